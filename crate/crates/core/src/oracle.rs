//! Brute-force ground truth: encoder pairs `p(x1 | u^n)`, `p(x2 | v^n)` on
//! i.i.d. sources, enumerated exhaustively (deterministic maps) or sampled
//! (stochastic kernels), with every spectral and binary bound checked on
//! each pair.
//!
//! The sweep uses a precomputed slot table: a slot is one conditioning event
//! (a subset of source letters together with their values) and each source
//! sequence pair knows the slots it contributes to. One pass over the
//! sequences then fills every conditional `P_X1X2` a pair needs. A sample of
//! pairs is re-checked through the tensor route in [`crate::dpi`].

use rayon::prelude::*;
use serde::Serialize;

use crate::binary::{self, BinaryScenario};
use crate::dpi;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::prob::{sample, Alphabet, FactoredDist, JointDist, Kernel, POSITIVE_EPS};
use crate::spectral;

/// Largest tensor built by [`induced_joint`].
pub const INDUCED_CELL_CAP: usize = 1 << 22;
/// Largest exhaustive enumeration.
pub const EXHAUSTIVE_CAP: u128 = 1 << 24;
/// Largest random budget.
pub const RANDOM_CAP: usize = 10_000_000;
/// Slack on every bound checked by the sweep.
pub const ORACLE_TOL: f64 = 1e-8;
/// Violations stored in full; the count is always exact.
const VIOLATION_KEEP: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncoderPair {
    pub enc1: Kernel,
    pub enc2: Kernel,
    pub n: usize,
}

impl EncoderPair {
    pub fn new(enc1: Kernel, enc2: Kernel, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        Ok(EncoderPair { enc1, enc2, n })
    }

    /// Both encoders forward the first letter (requires |X| >= |source|).
    pub fn copy(nu: usize, nv: usize, n1: usize, n2: usize, n: usize) -> Result<Self> {
        let first = |k: usize, m: usize| -> Vec<usize> {
            let stride = k.pow(n as u32 - 1);
            (0..k.pow(n as u32)).map(|r| (r / stride).min(m - 1)).collect()
        };
        let (un, vn) = (Alphabet::range(nu.pow(n as u32)), Alphabet::range(nv.pow(n as u32)));
        Ok(EncoderPair {
            enc1: Kernel::deterministic(&un, &Alphabet::range(n1), &first(nu, n1))?,
            enc2: Kernel::deterministic(&vn, &Alphabet::range(n2), &first(nv, n2))?,
            n,
        })
    }
}

fn check_pair(sources: &JointDist, pair: &EncoderPair) -> Result<(usize, usize)> {
    let (nu, nv) = sources.shape();
    let un = (nu as u128).checked_pow(pair.n as u32).unwrap_or(u128::MAX);
    let vn = (nv as u128).checked_pow(pair.n as u32).unwrap_or(u128::MAX);
    if pair.enc1.from().len() as u128 != un || pair.enc2.from().len() as u128 != vn {
        return Err(Error::AlphabetMismatch(format!(
            "encoders read {} and {} sequences, sources give {un} and {vn}",
            pair.enc1.from().len(),
            pair.enc2.from().len()
        )));
    }
    Ok((un as usize, vn as usize))
}

/// Exact tensor `p(u^n, v^n) p(x1 | u^n) p(x2 | v^n)` over axes
/// `x1, x2, u1..un, v1..vn`.
pub fn induced_joint(sources: &JointDist, pair: &EncoderPair) -> Result<FactoredDist> {
    let (nu, nv) = sources.shape();
    let n = pair.n;
    let (n1, n2) = (pair.enc1.to().len(), pair.enc2.to().len());
    let cells = (nu as u128 * nv as u128)
        .checked_pow(n as u32)
        .and_then(|c| c.checked_mul((n1 * n2) as u128))
        .unwrap_or(u128::MAX);
    if cells > INDUCED_CELL_CAP as u128 {
        return Err(Error::CapExceeded {
            requested: cells,
            cap: INDUCED_CELL_CAP as u128,
        });
    }
    check_pair(sources, pair)?;
    let mut axes = vec![
        ("x1".to_string(), pair.enc1.to().clone()),
        ("x2".to_string(), pair.enc2.to().clone()),
    ];
    for i in 1..=n {
        axes.push((format!("u{i}"), sources.rows().clone()));
    }
    for i in 1..=n {
        axes.push((format!("v{i}"), sources.cols().clone()));
    }
    let m = sources.mass();
    FactoredDist::from_fn(axes, |idx| {
        let (us, vs) = idx[2..].split_at(n);
        let mut p = 1.0;
        for (&u, &v) in us.iter().zip(vs) {
            p *= m[(u, v)];
        }
        let ru = us.iter().fold(0, |acc, &u| acc * nu + u);
        let rv = vs.iter().fold(0, |acc, &v| acc * nv + v);
        p * pair.enc1.row(ru)[idx[0]] * pair.enc2.row(rv)[idx[1]]
    })
}

/// Number of deterministic pairs `|X1|^(|U|^n) |X2|^(|V|^n)`.
pub fn deterministic_count(nu: usize, nv: usize, n: usize, sizes: (usize, usize)) -> u128 {
    let pow = |b: usize, e: u128| -> u128 {
        if e > 127 {
            return u128::MAX;
        }
        (b as u128).checked_pow(e as u32).unwrap_or(u128::MAX)
    };
    let un = pow(nu, n as u128);
    let vn = pow(nv, n as u128);
    pow(sizes.0, un).saturating_mul(pow(sizes.1, vn))
}

/// Deterministic pairs in a fixed order: the first encoder's map is the
/// major index, each map read as base-|X| digits with sequence 0 most
/// significant.
#[derive(Debug, Clone)]
pub struct DeterministicPairs {
    un: usize,
    vn: usize,
    n: usize,
    sizes: (usize, usize),
    count1: u128,
    count: u128,
    next: u128,
}

impl DeterministicPairs {
    pub fn total(&self) -> u128 {
        self.count
    }

    /// Maps of pair `id` as symbol lists.
    pub fn maps(&self, id: u128) -> (Vec<usize>, Vec<usize>) {
        let digits = |mut k: u128, len: usize, base: usize| -> Vec<usize> {
            let mut out = vec![0; len];
            for slot in out.iter_mut().rev() {
                *slot = (k % base as u128) as usize;
                k /= base as u128;
            }
            out
        };
        let count2 = self.count / self.count1;
        (
            digits(id / count2, self.un, self.sizes.0),
            digits(id % count2, self.vn, self.sizes.1),
        )
    }

    pub fn pair(&self, id: u128) -> EncoderPair {
        let (f1, f2) = self.maps(id);
        let (ua, va) = (Alphabet::range(self.un), Alphabet::range(self.vn));
        let (x1, x2) = (Alphabet::range(self.sizes.0), Alphabet::range(self.sizes.1));
        EncoderPair {
            enc1: Kernel::deterministic(&ua, &x1, &f1).expect("digits in range"),
            enc2: Kernel::deterministic(&va, &x2, &f2).expect("digits in range"),
            n: self.n,
        }
    }
}

impl Iterator for DeterministicPairs {
    type Item = EncoderPair;

    fn next(&mut self) -> Option<EncoderPair> {
        if self.next >= self.count {
            return None;
        }
        let p = self.pair(self.next);
        self.next += 1;
        Some(p)
    }
}

pub fn enumerate_deterministic(sources: &JointDist, n: usize, sizes: (usize, usize)) -> Result<DeterministicPairs> {
    enumerate_deterministic_with(sources, n, sizes, EXHAUSTIVE_CAP)
}

pub fn enumerate_deterministic_with(
    sources: &JointDist,
    n: usize,
    sizes: (usize, usize),
    cap: u128,
) -> Result<DeterministicPairs> {
    if n == 0 || sizes.0 == 0 || sizes.1 == 0 {
        return Err(Error::InvalidArgument("n and output sizes must be positive".into()));
    }
    let (nu, nv) = sources.shape();
    let count = deterministic_count(nu, nv, n, sizes);
    if count > cap {
        return Err(Error::CapExceeded { requested: count, cap });
    }
    let un = nu.pow(n as u32);
    let vn = nv.pow(n as u32);
    Ok(DeterministicPairs {
        un,
        vn,
        n,
        sizes,
        count1: (sizes.0 as u128).pow(un as u32),
        count,
        next: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exhaustive,
    Random,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Mode::Exhaustive),
            "random" => Ok(Mode::Random),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierConfig {
    pub n: usize,
    pub sizes: (usize, usize),
    pub mode: Mode,
    /// Number of random pairs; ignored in exhaustive mode.
    pub budget: usize,
    pub seed: u64,
    /// Every pair whose id is a multiple of this is re-checked through the
    /// tensor route; 0 disables the cross-check.
    pub cross_check_every: usize,
}

impl Default for FrontierConfig {
    fn default() -> Self {
        FrontierConfig {
            n: 1,
            sizes: (2, 2),
            mode: Mode::Exhaustive,
            budget: 100_000,
            seed: 0,
            cross_check_every: 97,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub pair: usize,
    pub check: String,
    pub measured: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossCheck {
    pub pairs: usize,
    /// Largest difference between the two routes' worst conditional λ.
    pub max_abs_diff: f64,
    pub disagreements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierResult {
    pub mode: Mode,
    pub n: usize,
    pub seed: u64,
    pub lambda2_uv: f64,
    /// Largest observed `λ_i(P~_X1X2)` for i = 2, 3, ...
    pub best_lambda: Vec<f64>,
    /// Pair id attaining each entry of `best_lambda` (smallest id on ties).
    pub argmax: Vec<Option<usize>>,
    /// Encoders attaining the best λ₂.
    pub best_pair: Option<EncoderPair>,
    pub samples_evaluated: usize,
    /// Pairs on which the binary outer bounds were checked.
    pub binary_checked: usize,
    pub cross_check: CrossCheck,
    pub violation_count: usize,
    pub violations: Vec<Violation>,
    pub pass: bool,
}

/// Conditioning events over subsets of source letters.
struct SlotTable {
    n: usize,
    nv: usize,
    /// Slot ids touched by each (u^n, v^n) sequence pair, row-major.
    by_point: Vec<Vec<u32>>,
    labels: Vec<(u32, u32, Vec<usize>, Vec<usize>)>,
}

impl SlotTable {
    fn new(nu: usize, nv: usize, n: usize) -> Self {
        let un = nu.pow(n as u32);
        let vn = nv.pow(n as u32);
        let digits = |mut r: usize, k: usize| -> Vec<usize> {
            let mut d = vec![0; n];
            for slot in d.iter_mut().rev() {
                *slot = r % k;
                r /= k;
            }
            d
        };
        let mut offsets = vec![0usize; 1 << (2 * n)];
        let mut labels = Vec::new();
        let mut total = 0;
        for mv in 0..(1u32 << n) {
            for mu in 0..(1u32 << n) {
                offsets[((mv << n) | mu) as usize] = total;
                let ku = mu.count_ones();
                let kv = mv.count_ones();
                let size = nu.pow(ku) * nv.pow(kv);
                for s in 0..size {
                    let (a, b) = (s / nv.pow(kv), s % nv.pow(kv));
                    let du: Vec<usize> = {
                        let mut d = vec![0; ku as usize];
                        let mut a = a;
                        for slot in d.iter_mut().rev() {
                            *slot = a % nu;
                            a /= nu;
                        }
                        d
                    };
                    let dv: Vec<usize> = {
                        let mut d = vec![0; kv as usize];
                        let mut b = b;
                        for slot in d.iter_mut().rev() {
                            *slot = b % nv;
                            b /= nv;
                        }
                        d
                    };
                    labels.push((mu, mv, du, dv));
                }
                total += size;
            }
        }
        let mut by_point = Vec::with_capacity(un * vn);
        for ru in 0..un {
            let du = digits(ru, nu);
            for rv in 0..vn {
                let dv = digits(rv, nv);
                let mut slots = Vec::with_capacity(1 << (2 * n));
                for mv in 0..(1u32 << n) {
                    for mu in 0..(1u32 << n) {
                        let mut a = 0;
                        for (i, &d) in du.iter().enumerate() {
                            if mu >> i & 1 == 1 {
                                a = a * nu + d;
                            }
                        }
                        let mut b = 0;
                        for (i, &d) in dv.iter().enumerate() {
                            if mv >> i & 1 == 1 {
                                b = b * nv + d;
                            }
                        }
                        let kv = mv.count_ones();
                        let off = offsets[((mv << n) | mu) as usize];
                        slots.push((off + a * nv.pow(kv) + b) as u32);
                    }
                }
                by_point.push(slots);
            }
        }
        SlotTable {
            n,
            nv,
            by_point,
            labels,
        }
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn label(&self, slot: usize) -> String {
        let (mu, mv, du, dv) = &self.labels[slot];
        let mut parts = Vec::new();
        let mut k = 0;
        for i in 0..self.n {
            if mu >> i & 1 == 1 {
                parts.push(format!("u{}={}", i + 1, du[k]));
                k += 1;
            }
        }
        let mut k = 0;
        for i in 0..self.n {
            if mv >> i & 1 == 1 {
                parts.push(format!("v{}={}", i + 1, dv[k]));
                k += 1;
            }
        }
        if parts.is_empty() {
            "x1x2".into()
        } else {
            format!("x1x2|{}", parts.join(","))
        }
    }
}

/// Everything the sweep learns from one pair.
struct PairOutcome {
    /// `λ_i` for i >= 2 of the unconditional `P_X1X2`.
    lambdas: Vec<f64>,
    /// Worst `λ_2` over all non-null conditioning events.
    worst_conditional: f64,
    binary_checked: bool,
    violations: Vec<Violation>,
}

struct Sweep<'a> {
    sources: &'a JointDist,
    seq_mass: Vec<f64>,
    table: SlotTable,
    lambda2_uv: f64,
    /// Binary outer bounds apply: binary symmetric source with positive
    /// correlation and binary encoder outputs.
    binary: bool,
    sizes: (usize, usize),
}

impl<'a> Sweep<'a> {
    fn new(sources: &'a JointDist, n: usize, sizes: (usize, usize)) -> Result<Self> {
        let (nu, nv) = sources.shape();
        let lambda2_uv = spectral::lambda2(sources)?;
        let pn = sources.kron_power(n)?;
        let m = sources.mass();
        let symmetric = sources.shape() == (2, 2)
            && (m[(0, 1)] - m[(1, 0)]).abs() < 1e-12
            && (m[(0, 0)] - m[(1, 1)]).abs() < 1e-12
            && m[(0, 0)] > m[(0, 1)];
        Ok(Sweep {
            sources,
            seq_mass: pn.mass().data().to_vec(),
            table: SlotTable::new(nu, nv, n),
            lambda2_uv,
            binary: symmetric && sizes == (2, 2),
            sizes,
        })
    }

    fn evaluate(&self, id: usize, pair: &EncoderPair) -> Result<PairOutcome> {
        let (n1, n2) = self.sizes;
        let cell = n1 * n2;
        let vn = self.table.nv.pow(self.table.n as u32);
        let mut acc = vec![0.0; self.table.len() * cell];
        let mut outer = vec![0.0; cell];
        for (p, slots) in self.table.by_point.iter().enumerate() {
            let m = self.seq_mass[p];
            if m <= 0.0 {
                continue;
            }
            let (e1, e2) = (pair.enc1.row(p / vn), pair.enc2.row(p % vn));
            for i in 0..n1 {
                for j in 0..n2 {
                    outer[i * n2 + j] = m * e1[i] * e2[j];
                }
            }
            for &s in slots {
                let base = s as usize * cell;
                for (a, o) in acc[base..base + cell].iter_mut().zip(&outer) {
                    *a += o;
                }
            }
        }
        let mut violations = Vec::new();
        let mut worst: f64 = 0.0;
        let mut lambdas = Vec::new();
        for s in 0..self.table.len() {
            let slice = &acc[s * cell..(s + 1) * cell];
            if slice.iter().sum::<f64>() < POSITIVE_EPS {
                continue;
            }
            let spec = spectral::support_spectrum(&Matrix::from_vec(n1, n2, slice.to_vec())?)?;
            let l2 = spec.lambda2();
            worst = worst.max(l2);
            if s == 0 {
                lambdas = (2..=n1.min(n2)).map(|i| spec.lambda(i)).collect();
            }
            if l2 > self.lambda2_uv + ORACLE_TOL {
                violations.push(Violation {
                    pair: id,
                    check: format!("spectral {}", self.table.label(s)),
                    measured: l2,
                    bound: self.lambda2_uv,
                });
            }
        }
        let mut binary_checked = false;
        if self.binary {
            let p = Matrix::from_vec(2, 2, acc[..4].to_vec())?;
            let (a2, b2) = (p[(0, 0)] + p[(0, 1)], p[(0, 0)] + p[(1, 0)]);
            let inside = |x: f64| x > 1e-9 && x < 1.0 - 1e-9;
            if inside(a2) && inside(b2) {
                let j = JointDist::new(p, Alphabet::range(2), Alphabet::range(2))?;
                let lam = binary::signed_lambda(&j)?;
                let b = binary::bounds(&BinaryScenario::from_squares(self.lambda2_uv, a2, b2)?)?;
                for (name, iv) in [("outer1", b.outer1), ("outer2", b.outer2)] {
                    if !iv.contains(lam, ORACLE_TOL) {
                        violations.push(Violation {
                            pair: id,
                            check: format!("binary {name} [{}, {}]", iv.lo, iv.hi),
                            measured: lam,
                            bound: if lam > iv.hi { iv.hi } else { iv.lo },
                        });
                    }
                }
                binary_checked = true;
            }
        }
        Ok(PairOutcome {
            lambdas,
            worst_conditional: worst,
            binary_checked,
            violations,
        })
    }

    /// The same worst conditional λ through the tensor route.
    fn generic_worst(&self, pair: &EncoderPair) -> Result<f64> {
        let f = induced_joint(self.sources, pair)?;
        let r = dpi::intersection_membership_with(&f, self.lambda2_uv, 1 << (2 * pair.n), dpi::DPI_TOL)?;
        Ok(r.constraints.iter().map(|c| c.measured).fold(0.0, f64::max))
    }
}

/// Partial result over a chunk of ids; merged by per-index maximum.
#[derive(Default)]
struct Acc {
    best: Vec<f64>,
    argmax: Vec<Option<usize>>,
    evaluated: usize,
    binary_checked: usize,
    violation_count: usize,
    violations: Vec<Violation>,
    cross: (usize, f64, usize),
}

impl Acc {
    fn absorb(&mut self, id: usize, o: PairOutcome) {
        if self.best.len() < o.lambdas.len() {
            self.best.resize(o.lambdas.len(), 0.0);
            self.argmax.resize(o.lambdas.len(), None);
        }
        for (i, &l) in o.lambdas.iter().enumerate() {
            if self.argmax[i].is_none() || l > self.best[i] {
                self.best[i] = l;
                self.argmax[i] = Some(id);
            }
        }
        self.evaluated += 1;
        self.binary_checked += o.binary_checked as usize;
        self.violation_count += o.violations.len();
        for v in o.violations {
            if self.violations.len() < VIOLATION_KEEP {
                self.violations.push(v);
            }
        }
    }

    /// `other` covers larger ids than `self`.
    fn merge(mut self, other: Acc) -> Acc {
        if self.best.len() < other.best.len() {
            self.best.resize(other.best.len(), 0.0);
            self.argmax.resize(other.best.len(), None);
        }
        for i in 0..other.best.len() {
            if other.argmax[i].is_some() && (self.argmax[i].is_none() || other.best[i] > self.best[i]) {
                self.best[i] = other.best[i];
                self.argmax[i] = other.argmax[i];
            }
        }
        self.evaluated += other.evaluated;
        self.binary_checked += other.binary_checked;
        self.violation_count += other.violation_count;
        for v in other.violations {
            if self.violations.len() < VIOLATION_KEEP {
                self.violations.push(v);
            }
        }
        self.cross = (
            self.cross.0 + other.cross.0,
            self.cross.1.max(other.cross.1),
            self.cross.2 + other.cross.2,
        );
        self
    }
}

const CHUNK: usize = 1024;

/// Sweeps encoder pairs and records the largest achieved correlation per
/// index together with every bound violation. The result depends only on
/// the inputs and the seed, never on the thread count.
pub fn frontier(sources: &JointDist, cfg: &FrontierConfig) -> Result<FrontierResult> {
    let (nu, nv) = sources.shape();
    let (total, det) = match cfg.mode {
        Mode::Exhaustive => {
            let e = enumerate_deterministic(sources, cfg.n, cfg.sizes)?;
            (e.total() as usize, Some(e))
        }
        Mode::Random => {
            if cfg.budget > RANDOM_CAP {
                return Err(Error::CapExceeded {
                    requested: cfg.budget as u128,
                    cap: RANDOM_CAP as u128,
                });
            }
            if cfg.n == 0 || cfg.sizes.0 == 0 || cfg.sizes.1 == 0 {
                return Err(Error::InvalidArgument("n and output sizes must be positive".into()));
            }
            (cfg.budget, None)
        }
    };
    let cells = (nu as u128 * nv as u128).checked_pow(cfg.n as u32).unwrap_or(u128::MAX);
    if cells > INDUCED_CELL_CAP as u128 {
        return Err(Error::CapExceeded {
            requested: cells,
            cap: INDUCED_CELL_CAP as u128,
        });
    }
    let sweep = Sweep::new(sources, cfg.n, cfg.sizes)?;
    let (ua, va) = (Alphabet::range(nu.pow(cfg.n as u32)), Alphabet::range(nv.pow(cfg.n as u32)));
    let (x1, x2) = (Alphabet::range(cfg.sizes.0), Alphabet::range(cfg.sizes.1));
    let make = |id: usize| -> EncoderPair {
        match &det {
            Some(e) => e.pair(id as u128),
            None => {
                let mut rng = sample::rng(cfg.seed, id as u64);
                EncoderPair {
                    enc1: sample::kernel(&mut rng, &ua, &x1),
                    enc2: sample::kernel(&mut rng, &va, &x2),
                    n: cfg.n,
                }
            }
        }
    };
    let chunks: Vec<usize> = (0..total.div_ceil(CHUNK)).collect();
    let partials: Vec<Acc> = chunks
        .par_iter()
        .map(|&c| -> Result<Acc> {
            let mut acc = Acc::default();
            for id in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let pair = make(id);
                let o = sweep.evaluate(id, &pair)?;
                if cfg.cross_check_every > 0 && id % cfg.cross_check_every == 0 {
                    let g = sweep.generic_worst(&pair)?;
                    let d = (g - o.worst_conditional).abs();
                    acc.cross.0 += 1;
                    acc.cross.1 = acc.cross.1.max(d);
                    acc.cross.2 += (d > 1e-9) as usize;
                }
                acc.absorb(id, o);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let acc = partials.into_iter().fold(Acc::default(), Acc::merge);
    let best_pair = acc.argmax.first().copied().flatten().map(make);
    let cross_check = CrossCheck {
        pairs: acc.cross.0,
        max_abs_diff: acc.cross.1,
        disagreements: acc.cross.2,
    };
    let ceiling_ok = acc.best.iter().all(|&l| l <= sweep.lambda2_uv + ORACLE_TOL);
    Ok(FrontierResult {
        mode: cfg.mode,
        n: cfg.n,
        seed: cfg.seed,
        lambda2_uv: sweep.lambda2_uv,
        best_lambda: acc.best,
        argmax: acc.argmax,
        best_pair,
        samples_evaluated: acc.evaluated,
        binary_checked: acc.binary_checked,
        cross_check,
        violation_count: acc.violation_count,
        pass: acc.violation_count == 0 && cross_check.disagreements == 0 && ceiling_ok,
        violations: acc.violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bss() -> JointDist {
        JointDist::dsbs(0.25)
    }

    #[test]
    fn induced_joint_examples() {
        let copy = EncoderPair::copy(2, 2, 2, 2, 1).unwrap();
        let f = induced_joint(&bss(), &copy).unwrap();
        assert_eq!(f.joint(&["x1"], &["x2"]).unwrap().mass(), bss().mass());

        let a = Alphabet::range(2);
        let c = EncoderPair::new(
            Kernel::deterministic(&a, &a, &[1, 1]).unwrap(),
            Kernel::deterministic(&a, &a, &[0, 0]).unwrap(),
            1,
        )
        .unwrap();
        let j = induced_joint(&bss(), &c).unwrap().joint(&["x1"], &["x2"]).unwrap();
        assert_eq!(j.mass()[(1, 0)], 1.0);

        let b = EncoderPair::new(Kernel::bsc(0.1), Kernel::bsc(0.1), 1).unwrap();
        let j = induced_joint(&bss(), &b).unwrap().joint(&["x1"], &["x2"]).unwrap();
        assert!((spectral::lambda2(&j).unwrap() - 0.32).abs() < 1e-12);

        assert!(matches!(
            induced_joint(&bss(), &EncoderPair::copy(2, 2, 2, 2, 12).unwrap()),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn enumeration_counts() {
        for (n, want) in [(1, 16u128), (2, 256), (3, 65536)] {
            let e = enumerate_deterministic(&bss(), n, (2, 2)).unwrap();
            assert_eq!(e.total(), want);
        }
        assert_eq!(enumerate_deterministic(&bss(), 1, (2, 2)).unwrap().count(), 16usize);
        match enumerate_deterministic(&bss(), 4, (2, 2)) {
            Err(Error::CapExceeded { requested, .. }) => assert_eq!(requested, 1u128 << 32),
            other => panic!("{other:?}"),
        }
        let all: Vec<_> = enumerate_deterministic(&bss(), 1, (2, 2)).unwrap().collect();
        assert_eq!(all.len(), 16);
        for i in 0..16 {
            for j in 0..i {
                assert_ne!(all[i], all[j]);
            }
        }
    }

    #[test]
    fn n1_frontier_is_the_source() {
        let r = frontier(&bss(), &FrontierConfig::default()).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.samples_evaluated, 16);
        assert!((r.best_lambda[0] - 0.5).abs() < 1e-12);
        let p = r.best_pair.unwrap();
        assert_eq!(p.enc1.matrix().data(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn independent_sources_give_zero() {
        let indep = JointDist::independent(
            &crate::prob::Marginal::from_probs(&[0.3, 0.7]).unwrap(),
            &crate::prob::Marginal::uniform(2),
        );
        let cfg = FrontierConfig {
            n: 2,
            ..FrontierConfig::default()
        };
        let r = frontier(&indep, &cfg).unwrap();
        assert!(r.pass);
        assert!(r.best_lambda[0] < 1e-8);
    }

    #[test]
    fn routes_agree_and_results_ignore_chunking() {
        let cfg = FrontierConfig {
            n: 2,
            cross_check_every: 5,
            ..FrontierConfig::default()
        };
        let r = frontier(&bss(), &cfg).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.cross_check.pairs, 52);
        assert!(r.cross_check.max_abs_diff < 1e-9);
        assert!(r.best_lambda[0] <= 0.5 + 1e-12);

        let rcfg = FrontierConfig {
            n: 2,
            mode: Mode::Random,
            budget: 3000,
            seed: 11,
            cross_check_every: 101,
            ..FrontierConfig::default()
        };
        let a = frontier(&bss(), &rcfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| frontier(&bss(), &rcfg).unwrap());
        assert_eq!(a, b);
        assert!(a.pass);
    }
}
