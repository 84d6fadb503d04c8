//! Membership tests for the encoder-set hierarchy, rate expressions for
//! distributed lossy coding and the multiple-access necessary condition.
//!
//! Axis names are fixed: `q` (time sharing), `u1`, `v1` (source letters),
//! `x1`, `x2` (encoder outputs) and `y` (channel output).

use rayon::prelude::*;
use serde::Serialize;

use crate::dpi::{self, MembershipReport};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::prob::{sample, Alphabet, FactoredDist, JointDist, Kernel, Marginal, POSITIVE_EPS};

/// Tolerance for the conditional-independence tests.
pub const MARKOV_TOL: f64 = 1e-9;
/// Residual below which a factorization certificate is accepted.
pub const SOUT2_TOL: f64 = 1e-6;
/// Slack on the rate inequalities.
pub const RATE_SLACK: f64 = 1e-9;
/// Largest encoder or time-sharing alphabet the region sampler accepts.
pub const SAMPLER_ALPHABET_CAP: usize = 4;
/// Largest sample budget for [`rd_region_sample`].
pub const SAMPLER_BUDGET_CAP: usize = 1_000_000;

/// Conditional law `p(x1, x2 | u, v)`, one `|X1| x |X2|` cell per source
/// pair, indexed `u * |V| + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondChannel {
    nu: usize,
    nv: usize,
    x1: Alphabet,
    x2: Alphabet,
    cells: Vec<Matrix>,
}

impl CondChannel {
    pub fn new(nu: usize, nv: usize, x1: Alphabet, x2: Alphabet, cells: Vec<Matrix>) -> Result<Self> {
        if cells.len() != nu * nv {
            return Err(Error::DimensionMismatch(format!(
                "expected {} cells, got {}",
                nu * nv,
                cells.len()
            )));
        }
        for (k, c) in cells.iter().enumerate() {
            if c.shape() != (x1.len(), x2.len()) {
                return Err(Error::DimensionMismatch(format!("cell {k} has shape {:?}", c.shape())));
            }
            for (i, &v) in c.data().iter().enumerate() {
                if v.is_nan() || v < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: k,
                        col: i,
                        value: v,
                    });
                }
            }
            let s = c.sum();
            if (s - 1.0).abs() > crate::prob::VALIDATION_TOL {
                return Err(Error::NotStochastic { row: k, sum: s });
            }
        }
        Ok(CondChannel { nu, nv, x1, x2, cells })
    }

    /// `p(x1 | u) p(x2 | v)`.
    pub fn product(k1: &Kernel, k2: &Kernel) -> Self {
        let (nu, nv) = (k1.from().len(), k2.from().len());
        let cells = (0..nu * nv)
            .map(|c| {
                let (u, v) = (c / nv, c % nv);
                Matrix::from_fn(k1.to().len(), k2.to().len(), |i, j| k1.row(u)[i] * k2.row(v)[j])
            })
            .collect();
        CondChannel {
            nu,
            nv,
            x1: k1.to().clone(),
            x2: k2.to().clone(),
            cells,
        }
    }

    /// `sum_w pi(w) p(x1 | w, u) p(x2 | w, v)`.
    pub fn mixture(pi: &[f64], k1: &[Kernel], k2: &[Kernel]) -> Result<Self> {
        if pi.len() != k1.len() || pi.len() != k2.len() || pi.is_empty() {
            return Err(Error::DimensionMismatch("mixture components differ in count".into()));
        }
        let mut out = CondChannel::product(&k1[0], &k2[0]);
        for c in out.cells.iter_mut() {
            *c = c.scale(pi[0]);
        }
        for w in 1..pi.len() {
            let part = CondChannel::product(&k1[w], &k2[w]);
            if part.cells[0].shape() != out.cells[0].shape() || part.cells.len() != out.cells.len() {
                return Err(Error::DimensionMismatch("mixture components differ in shape".into()));
            }
            for (c, p) in out.cells.iter_mut().zip(&part.cells) {
                *c = c.add(&p.scale(pi[w]));
            }
        }
        Ok(out)
    }

    pub fn cell(&self, u: usize, v: usize) -> &Matrix {
        &self.cells[u * self.nv + v]
    }

    pub fn source_sizes(&self) -> (usize, usize) {
        (self.nu, self.nv)
    }

    pub fn x1(&self) -> &Alphabet {
        &self.x1
    }

    pub fn x2(&self) -> &Alphabet {
        &self.x2
    }
}

/// The single-letter tensor `p(u, v) p(x1, x2 | u, v)` over `u1, v1, x1, x2`.
pub fn candidate_dist(puv: &JointDist, ch: &CondChannel) -> Result<FactoredDist> {
    check_sources(puv, ch)?;
    let m = puv.mass();
    FactoredDist::from_fn(
        vec![
            ("u1".into(), puv.rows().clone()),
            ("v1".into(), puv.cols().clone()),
            ("x1".into(), ch.x1.clone()),
            ("x2".into(), ch.x2.clone()),
        ],
        |i| m[(i[0], i[1])] * ch.cell(i[0], i[1])[(i[2], i[3])],
    )
}

fn check_sources(puv: &JointDist, ch: &CondChannel) -> Result<()> {
    if puv.shape() != (ch.nu, ch.nv) {
        return Err(Error::AlphabetMismatch(format!(
            "sources are {:?} but the channel expects {:?}",
            puv.shape(),
            (ch.nu, ch.nv)
        )));
    }
    Ok(())
}

/// `p(u, v, x1, x2)` laid out densely with the conditional law where
/// `p(u, v)` is positive.
struct Cube {
    nu: usize,
    nv: usize,
    n1: usize,
    n2: usize,
    puv: Vec<f64>,
    mass: Matrix,
}

impl Cube {
    fn from_dist(p: &FactoredDist) -> Result<Self> {
        let m = p.marginalize(&["u1", "v1", "x1", "x2"])?;
        let nu = m.axis("u1")?.alphabet.len();
        let nv = m.axis("v1")?.alphabet.len();
        let n1 = m.axis("x1")?.alphabet.len();
        let n2 = m.axis("x2")?.alphabet.len();
        let (mass, _, _) = m.grouped_matrix(&["u1", "v1"], &["x1", "x2"])?;
        let puv = mass.row_sums();
        Ok(Cube {
            nu,
            nv,
            n1,
            n2,
            puv,
            mass,
        })
    }

    fn support(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.nu * self.nv)
            .filter(|&r| self.puv[r] > POSITIVE_EPS)
            .map(|r| (r / self.nv, r % self.nv))
    }

    fn skipped(&self) -> Vec<String> {
        (0..self.nu * self.nv)
            .filter(|&r| self.puv[r] <= POSITIVE_EPS)
            .map(|r| format!("u1={},v1={}", r / self.nv, r % self.nv))
            .collect()
    }

    fn cond(&self, u: usize, v: usize, x1: usize, x2: usize) -> f64 {
        let r = u * self.nv + v;
        self.mass[(r, x1 * self.n2 + x2)] / self.puv[r]
    }

    /// `p(x1 | u)` from the joint.
    fn x1_given_u(&self) -> Matrix {
        let mut out = Matrix::zeros(self.nu, self.n1);
        for u in 0..self.nu {
            let pu: f64 = (0..self.nv).map(|v| self.puv[u * self.nv + v]).sum();
            if pu <= POSITIVE_EPS {
                continue;
            }
            for v in 0..self.nv {
                let r = u * self.nv + v;
                for x1 in 0..self.n1 {
                    for x2 in 0..self.n2 {
                        out.data_mut()[u * self.n1 + x1] += self.mass[(r, x1 * self.n2 + x2)] / pu;
                    }
                }
            }
        }
        out
    }

    fn x2_given_v(&self) -> Matrix {
        let mut out = Matrix::zeros(self.nv, self.n2);
        for v in 0..self.nv {
            let pv: f64 = (0..self.nu).map(|u| self.puv[u * self.nv + v]).sum();
            if pv <= POSITIVE_EPS {
                continue;
            }
            for u in 0..self.nu {
                let r = u * self.nv + v;
                for x1 in 0..self.n1 {
                    for x2 in 0..self.n2 {
                        out.data_mut()[v * self.n2 + x2] += self.mass[(r, x1 * self.n2 + x2)] / pv;
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovVerdict {
    pub member: bool,
    /// Largest absolute deviation from the required factorization.
    pub residual: f64,
    /// Source pairs with zero probability, where the test is vacuous.
    pub skipped: Vec<String>,
}

impl MarkovVerdict {
    fn new(residual: f64, skipped: Vec<String>) -> Self {
        MarkovVerdict {
            member: residual <= MARKOV_TOL,
            residual,
            skipped,
        }
    }
}

/// `p(x1, x2 | u, v) = p(x1 | u) p(x2 | v)` on the support of (U, V). Axes
/// other than `u1, v1, x1, x2` are summed out.
pub fn membership_sin(p: &FactoredDist) -> Result<MarkovVerdict> {
    let c = Cube::from_dist(p)?;
    let (a, b) = (c.x1_given_u(), c.x2_given_v());
    let mut res: f64 = 0.0;
    for (u, v) in c.support() {
        for x1 in 0..c.n1 {
            for x2 in 0..c.n2 {
                let want = a[(u, x1)] * b[(v, x2)];
                res = res.max((c.cond(u, v, x1, x2) - want).abs());
            }
        }
    }
    Ok(MarkovVerdict::new(res, c.skipped()))
}

/// The two chains X1 - U - V and U - V - X2.
pub fn membership_sout1(p: &FactoredDist) -> Result<MarkovVerdict> {
    let c = Cube::from_dist(p)?;
    let (a, b) = (c.x1_given_u(), c.x2_given_v());
    let mut res: f64 = 0.0;
    for (u, v) in c.support() {
        for x1 in 0..c.n1 {
            let m: f64 = (0..c.n2).map(|x2| c.cond(u, v, x1, x2)).sum();
            res = res.max((m - a[(u, x1)]).abs());
        }
        for x2 in 0..c.n2 {
            let m: f64 = (0..c.n1).map(|x1| c.cond(u, v, x1, x2)).sum();
            res = res.max((m - b[(v, x2)]).abs());
        }
    }
    Ok(MarkovVerdict::new(res, c.skipped()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sout2Config {
    /// Largest |W| tried; `None` means `|X1| |X2| + 2`.
    pub w_max: Option<usize>,
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for Sout2Config {
    fn default() -> Self {
        Sout2Config {
            w_max: None,
            restarts: 32,
            max_iters: 3000,
            seed: 0,
        }
    }
}

/// Outcome of the bounded search for `p(x1, x2 | u, v) = sum_w p(w)
/// p(x1 | w, u) p(x2 | w, v)`. A miss is not a proof of non-membership.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Sout2Verdict {
    Member { w: usize, residual: f64, pi: Vec<f64> },
    NotFoundUpTo { w_max: usize, best_residual: f64 },
}

impl Sout2Verdict {
    pub fn is_member(&self) -> bool {
        matches!(self, Sout2Verdict::Member { .. })
    }
}

/// Searches |W| = 1, 2, ... up to the configured maximum. |W| = 1 is
/// decided in closed form; larger W by multistart EM on the likelihood of
/// the latent-variable model, weighted by `p(u, v)`.
pub fn membership_sout2(p: &FactoredDist, cfg: &Sout2Config) -> Result<Sout2Verdict> {
    let c = Cube::from_dist(p)?;
    let w_max = cfg.w_max.unwrap_or(c.n1 * c.n2 + 2);
    if w_max == 0 {
        return Err(Error::InvalidArgument("w_max must be at least 1".into()));
    }
    let sin = membership_sin(p)?;
    if sin.residual < SOUT2_TOL {
        return Ok(Sout2Verdict::Member {
            w: 1,
            residual: sin.residual,
            pi: vec![1.0],
        });
    }
    let mut best = sin.residual;
    for w in 2..=w_max {
        for r in 0..cfg.restarts {
            let mut rng = sample::rng(cfg.seed, ((w as u64) << 32) | r as u64);
            let (res, pi) = em_fit(&c, w, cfg.max_iters, &mut rng);
            if res < SOUT2_TOL {
                return Ok(Sout2Verdict::Member { w, residual: res, pi });
            }
            best = best.min(res);
        }
    }
    Ok(Sout2Verdict::NotFoundUpTo {
        w_max,
        best_residual: best,
    })
}

fn em_fit(c: &Cube, w: usize, max_iters: usize, rng: &mut sample::Rng) -> (f64, Vec<f64>) {
    let (nu, nv, n1, n2) = (c.nu, c.nv, c.n1, c.n2);
    let mut pi = sample::simplex(rng, w);
    let mut a: Vec<f64> = (0..w * nu).flat_map(|_| sample::simplex(rng, n1)).collect();
    let mut b: Vec<f64> = (0..w * nv).flat_map(|_| sample::simplex(rng, n2)).collect();
    let total: f64 = c.puv.iter().sum();
    let support: Vec<(usize, usize)> = c.support().collect();
    let residual = |pi: &[f64], a: &[f64], b: &[f64]| -> f64 {
        let mut res: f64 = 0.0;
        for &(u, v) in &support {
            for x1 in 0..n1 {
                for x2 in 0..n2 {
                    let m: f64 = (0..w)
                        .map(|k| pi[k] * a[(k * nu + u) * n1 + x1] * b[(k * nv + v) * n2 + x2])
                        .sum();
                    res = res.max((m - c.cond(u, v, x1, x2)).abs());
                }
            }
        }
        res
    };
    let mut post = vec![0.0; w];
    for it in 0..max_iters {
        if it % 25 == 0 && residual(&pi, &a, &b) < SOUT2_TOL {
            break;
        }
        let mut npi = vec![0.0; w];
        let mut na = vec![0.0; a.len()];
        let mut nb = vec![0.0; b.len()];
        for &(u, v) in &support {
            let r = u * nv + v;
            for x1 in 0..n1 {
                for x2 in 0..n2 {
                    let t = c.mass[(r, x1 * n2 + x2)] / total;
                    if t <= 0.0 {
                        continue;
                    }
                    let mut s = 0.0;
                    for k in 0..w {
                        post[k] = pi[k] * a[(k * nu + u) * n1 + x1] * b[(k * nv + v) * n2 + x2];
                        s += post[k];
                    }
                    if s <= 0.0 {
                        continue;
                    }
                    for k in 0..w {
                        let q = t * post[k] / s;
                        npi[k] += q;
                        na[(k * nu + u) * n1 + x1] += q;
                        nb[(k * nv + v) * n2 + x2] += q;
                    }
                }
            }
        }
        let s: f64 = npi.iter().sum();
        pi = npi.iter().map(|x| x / s).collect();
        normalize_rows(&mut na, n1, &a);
        normalize_rows(&mut nb, n2, &b);
        a = na;
        b = nb;
    }
    (residual(&pi, &a, &b), pi)
}

/// Normalizes each length-`k` row; rows with no mass keep their old values.
fn normalize_rows(x: &mut [f64], k: usize, old: &[f64]) {
    for (row, prev) in x.chunks_mut(k).zip(old.chunks(k)) {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row.copy_from_slice(prev);
        }
    }
}

/// The four spectral conditions obtained by conditioning on nothing, on
/// `u1`, on `v1` and on both.
pub fn membership_sout4(p: &FactoredDist, lambda2_uv: f64) -> Result<MembershipReport> {
    let mut report = MembershipReport::new("S_out4");
    let subsets: [(&[&str], &[&str]); 4] = [(&[], &[]), (&["u1"], &[]), (&[], &["v1"]), (&["u1"], &["v1"])];
    for (su, sv) in subsets {
        report.merge(dpi::conditional_necc_check(p, lambda2_uv, su, sv)?);
    }
    Ok(report)
}

/// Time-shared single-letter test channel `p(q) p(u, v) p(x1, x2 | u, v, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestChannel {
    pq: Marginal,
    puv: JointDist,
    slices: Vec<CondChannel>,
    dist: FactoredDist,
}

impl TestChannel {
    pub fn new(pq: Marginal, puv: JointDist, slices: Vec<CondChannel>) -> Result<Self> {
        if slices.len() != pq.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} slices for a time-sharing alphabet of {}",
                slices.len(),
                pq.len()
            )));
        }
        let first = slices
            .first()
            .ok_or(Error::EmptyAlphabet)?;
        for s in &slices {
            check_sources(&puv, s)?;
            if s.x1 != first.x1 || s.x2 != first.x2 {
                return Err(Error::AlphabetMismatch("slices use different encoder alphabets".into()));
            }
        }
        let m = puv.mass();
        let dist = FactoredDist::from_fn(
            vec![
                ("q".into(), pq.alphabet().clone()),
                ("u1".into(), puv.rows().clone()),
                ("v1".into(), puv.cols().clone()),
                ("x1".into(), first.x1.clone()),
                ("x2".into(), first.x2.clone()),
            ],
            |i| pq.probs()[i[0]] * m[(i[1], i[2])] * slices[i[0]].cell(i[1], i[2])[(i[3], i[4])],
        )?;
        Ok(TestChannel { pq, puv, slices, dist })
    }

    /// Test channel without time sharing.
    pub fn single(puv: JointDist, ch: CondChannel) -> Result<Self> {
        Self::new(Marginal::uniform(1), puv, vec![ch])
    }

    /// Splits a tensor over `q, u1, v1, x1, x2` (the `q` axis is optional)
    /// back into its factors. Q must be independent of (U, V) within 1e-9.
    pub fn from_dist(f: &FactoredDist) -> Result<Self> {
        let f = if f.has_axis("q") {
            f.clone()
        } else {
            FactoredDist::new(vec![("q".into(), Alphabet::range(1))], vec![1.0])?.product(f)?
        };
        let names = f.axis_names();
        if names != ["q", "u1", "v1", "x1", "x2"] {
            return Err(Error::InvalidArgument(format!(
                "expected axes q, u1, v1, x1, x2; got {names:?}"
            )));
        }
        let pq = Marginal::new(f.axis("q")?.alphabet.clone(), f.marginalize(&["q"])?.mass().to_vec())?;
        let puv = f.joint(&["u1"], &["v1"])?;
        let (quv, _, _) = f.grouped_matrix(&["q"], &["u1", "v1"])?;
        let mut dep: f64 = 0.0;
        for k in 0..pq.len() {
            for (j, &x) in quv.row(k).iter().enumerate() {
                dep = dep.max((x - pq.probs()[k] * puv.mass().data()[j]).abs());
            }
        }
        if dep > MARKOV_TOL {
            return Err(Error::InvalidArgument(format!(
                "time sharing is not independent of the sources (residual {dep})"
            )));
        }
        let (nu, nv) = puv.shape();
        let x1 = f.axis("x1")?.alphabet.clone();
        let x2 = f.axis("x2")?.alphabet.clone();
        let (n1, n2) = (x1.len(), x2.len());
        let (full, _, _) = f.grouped_matrix(&["q", "u1", "v1"], &["x1", "x2"])?;
        let mut slices = Vec::with_capacity(pq.len());
        for k in 0..pq.len() {
            let cells = (0..nu * nv)
                .map(|r| {
                    let row = full.row(k * nu * nv + r);
                    let s: f64 = row.iter().sum();
                    if s > POSITIVE_EPS {
                        Matrix::from_vec(n1, n2, row.iter().map(|x| x / s).collect())
                    } else {
                        // unreachable cell: any law will do
                        Ok(Matrix::from_fn(n1, n2, |_, _| 1.0 / (n1 * n2) as f64))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            slices.push(CondChannel::new(nu, nv, x1.clone(), x2.clone(), cells)?);
        }
        Self::new(pq, puv, slices)
    }

    pub fn dist(&self) -> &FactoredDist {
        &self.dist
    }

    pub fn sources(&self) -> &JointDist {
        &self.puv
    }

    pub fn pq(&self) -> &Marginal {
        &self.pq
    }

    pub fn slices(&self) -> &[CondChannel] {
        &self.slices
    }

    /// Single-letter tensor of slice `k`.
    pub fn slice_dist(&self, k: usize) -> Result<FactoredDist> {
        candidate_dist(&self.puv, &self.slices[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    /// I(U, V; X1 | X2, Q)
    pub r1: f64,
    /// I(U, V; X2 | X1, Q)
    pub r2: f64,
    /// I(U, V; X1, X2 | Q)
    pub rsum: f64,
}

pub fn rd_rates(tc: &TestChannel) -> Result<RatePoint> {
    let d = &tc.dist;
    let uv = ["u1", "v1"];
    let r1 = d.mutual_information(&uv, &["x1"], &["x2", "q"])?.max(0.0);
    let r2 = d.mutual_information(&uv, &["x2"], &["x1", "q"])?.max(0.0);
    let rsum = d.mutual_information(&uv, &["x1", "x2"], &["q"])?.max(0.0);
    let i12 = d.mutual_information(&["x1"], &["x2"], &["q"])?;
    if rsum > r1 + r2 + i12 + 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "rate consistency violated: {rsum} > {r1} + {r2} + {i12}"
        )));
    }
    Ok(RatePoint { r1, r2, rsum })
}

/// Per-letter distortion tables `d1: U x U^` and `d2: V x V^`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionSpec {
    pub d1: Matrix,
    pub d2: Matrix,
}

impl DistortionSpec {
    pub fn new(d1: Matrix, d2: Matrix) -> Result<Self> {
        for d in [&d1, &d2] {
            if !d.is_finite() || d.data().iter().any(|&x| x < 0.0) {
                return Err(Error::InvalidArgument("distortions must be finite and nonnegative".into()));
            }
            if d.ncols() == 0 {
                return Err(Error::EmptyAlphabet);
            }
        }
        Ok(DistortionSpec { d1, d2 })
    }

    pub fn hamming(nu: usize, nv: usize) -> Self {
        let h = |n: usize| Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 });
        DistortionSpec { d1: h(nu), d2: h(nv) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reconstruction {
    pub q: usize,
    pub x1: usize,
    pub x2: usize,
    pub u_hat: usize,
    pub v_hat: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionOutcome {
    pub ed1: f64,
    pub ed2: f64,
    pub map: Vec<Reconstruction>,
}

/// Optimal reconstruction: expected distortion separates over the cells
/// (x1, x2, q), so each cell picks its own minimizers. Ties go to the
/// smallest index.
pub fn best_distortion(tc: &TestChannel, ds: &DistortionSpec) -> Result<DistortionOutcome> {
    let (nu, nv) = tc.puv.shape();
    if ds.d1.nrows() != nu || ds.d2.nrows() != nv {
        return Err(Error::AlphabetMismatch("distortion tables do not match the sources".into()));
    }
    let d = &tc.dist;
    let (mu, _, _) = d.marginalize(&["q", "u1", "x1", "x2"])?.grouped_matrix(&["q", "x1", "x2"], &["u1"])?;
    let (mv, _, _) = d.marginalize(&["q", "v1", "x1", "x2"])?.grouped_matrix(&["q", "x1", "x2"], &["v1"])?;
    let n1 = tc.slices[0].x1.len();
    let n2 = tc.slices[0].x2.len();
    let pick = |row: &[f64], table: &Matrix| -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for h in 0..table.ncols() {
            let cost: f64 = row.iter().enumerate().map(|(s, p)| p * table[(s, h)]).sum();
            if cost < best.1 {
                best = (h, cost);
            }
        }
        best
    };
    let (mut ed1, mut ed2) = (0.0, 0.0);
    let mut map = Vec::with_capacity(mu.nrows());
    for r in 0..mu.nrows() {
        let (uh, c1) = pick(mu.row(r), &ds.d1);
        let (vh, c2) = pick(mv.row(r), &ds.d2);
        ed1 += c1;
        ed2 += c2;
        map.push(Reconstruction {
            q: r / (n1 * n2),
            x1: (r / n2) % n1,
            x2: r % n2,
            u_hat: uh,
            v_hat: vh,
        });
    }
    Ok(DistortionOutcome { ed1, ed2, map })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SetPredicate {
    Sin,
    Sout2,
    Sout4,
    /// Both S_out2 and S_out4.
    Sout2Cap4,
}

impl std::str::FromStr for SetPredicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sin" => Ok(Self::Sin),
            "sout2" => Ok(Self::Sout2),
            "sout4" => Ok(Self::Sout4),
            "sout2cap4" => Ok(Self::Sout2Cap4),
            other => Err(Error::InvalidArgument(format!("unknown set {other:?}"))),
        }
    }
}

/// Evaluates a predicate on every time-sharing slice.
pub fn satisfies(tc: &TestChannel, pred: SetPredicate, lambda2_uv: f64, cfg: &Sout2Config) -> Result<bool> {
    for k in 0..tc.slices.len() {
        let f = tc.slice_dist(k)?;
        let ok = match pred {
            SetPredicate::Sin => membership_sin(&f)?.member,
            SetPredicate::Sout2 => membership_sout2(&f, cfg)?.is_member(),
            SetPredicate::Sout4 => membership_sout4(&f, lambda2_uv)?.pass,
            SetPredicate::Sout2Cap4 => {
                membership_sout4(&f, lambda2_uv)?.pass && membership_sout2(&f, cfg)?.is_member()
            }
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerConfig {
    pub budget: usize,
    pub seed: u64,
    pub n1: usize,
    pub n2: usize,
    pub nq: usize,
    pub sout2: Sout2Config,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            budget: 200,
            seed: 0,
            n1: 2,
            n2: 2,
            nq: 2,
            sout2: Sout2Config {
                w_max: Some(3),
                restarts: 4,
                max_iters: 1000,
                seed: 0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Constant,
    Copy,
    Product,
    Planted,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSample {
    pub id: usize,
    pub kind: SampleKind,
    pub rates: RatePoint,
    pub ed1: f64,
    pub ed2: f64,
    pub in_set: bool,
    /// In the set and within the distortion target.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionReport {
    pub predicate: SetPredicate,
    pub lambda2_uv: f64,
    pub samples: Vec<RegionSample>,
}

impl RegionReport {
    pub fn accepted(&self) -> impl Iterator<Item = &RegionSample> {
        self.samples.iter().filter(|s| s.accepted)
    }
}

/// Sample `id` of the stream: ids 0 and 1 are constant and copy encoders,
/// the rest cycle through product, planted-mixture and unconstrained laws.
pub fn sample_test_channel(puv: &JointDist, cfg: &SamplerConfig, id: usize) -> Result<(SampleKind, TestChannel)> {
    let (nu, nv) = puv.shape();
    let (x1, x2) = (Alphabet::range(cfg.n1), Alphabet::range(cfg.n2));
    let (ua, va) = (Alphabet::range(nu), Alphabet::range(nv));
    let mut rng = sample::rng(cfg.seed, id as u64);
    let kind = match id {
        0 => SampleKind::Constant,
        1 if cfg.n1 >= nu && cfg.n2 >= nv => SampleKind::Copy,
        _ => match id % 3 {
            0 => SampleKind::Product,
            1 => SampleKind::Planted,
            _ => SampleKind::Generic,
        },
    };
    let pq = if matches!(kind, SampleKind::Constant | SampleKind::Copy) {
        Marginal::uniform(1)
    } else {
        sample::marginal(&mut rng, cfg.nq)
    };
    let mut slices = Vec::with_capacity(pq.len());
    for _ in 0..pq.len() {
        let ch = match kind {
            SampleKind::Constant => CondChannel::product(
                &Kernel::deterministic(&ua, &x1, &vec![0; nu])?,
                &Kernel::deterministic(&va, &x2, &vec![0; nv])?,
            ),
            SampleKind::Copy => CondChannel::product(
                &Kernel::deterministic(&ua, &x1, &(0..nu).collect::<Vec<_>>())?,
                &Kernel::deterministic(&va, &x2, &(0..nv).collect::<Vec<_>>())?,
            ),
            SampleKind::Product => {
                CondChannel::product(&sample::kernel(&mut rng, &ua, &x1), &sample::kernel(&mut rng, &va, &x2))
            }
            SampleKind::Planted => {
                let pi = sample::simplex(&mut rng, 2);
                let k1: Vec<Kernel> = (0..2).map(|_| sample::kernel(&mut rng, &ua, &x1)).collect();
                let k2: Vec<Kernel> = (0..2).map(|_| sample::kernel(&mut rng, &va, &x2)).collect();
                CondChannel::mixture(&pi, &k1, &k2)?
            }
            SampleKind::Generic => {
                let cells = (0..nu * nv)
                    .map(|_| Matrix::from_vec(cfg.n1, cfg.n2, sample::simplex(&mut rng, cfg.n1 * cfg.n2)))
                    .collect::<Result<Vec<_>>>()?;
                CondChannel::new(nu, nv, x1.clone(), x2.clone(), cells)?
            }
        };
        slices.push(ch);
    }
    Ok((kind, TestChannel::new(pq, puv.clone(), slices)?))
}

/// Inner approximation of the rate region for a set predicate: every sampled
/// test channel is scored, and those in the set that meet the distortion
/// target `(d1_max, d2_max)` are accepted. Sample `id` depends only on
/// `(seed, id)`, so reports for different predicates share their streams.
pub fn rd_region_sample(
    puv: &JointDist,
    ds: &DistortionSpec,
    target: (f64, f64),
    pred: SetPredicate,
    cfg: &SamplerConfig,
) -> Result<RegionReport> {
    if cfg.budget > SAMPLER_BUDGET_CAP {
        return Err(Error::BudgetExceeded {
            requested: cfg.budget,
            cap: SAMPLER_BUDGET_CAP,
        });
    }
    for n in [cfg.n1, cfg.n2, cfg.nq] {
        if n == 0 || n > SAMPLER_ALPHABET_CAP {
            return Err(Error::BudgetExceeded {
                requested: n,
                cap: SAMPLER_ALPHABET_CAP,
            });
        }
    }
    let lambda2_uv = crate::spectral::lambda2(puv)?;
    let samples = (0..cfg.budget)
        .into_par_iter()
        .map(|id| -> Result<RegionSample> {
            let (kind, tc) = sample_test_channel(puv, cfg, id)?;
            let rates = rd_rates(&tc)?;
            let d = best_distortion(&tc, ds)?;
            let in_set = satisfies(&tc, pred, lambda2_uv, &cfg.sout2)?;
            let within = d.ed1 <= target.0 + RATE_SLACK && d.ed2 <= target.1 + RATE_SLACK;
            Ok(RegionSample {
                id,
                kind,
                rates,
                ed1: d.ed1,
                ed2: d.ed2,
                in_set,
                accepted: in_set && within,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionReport {
        predicate: pred,
        lambda2_uv,
        samples,
    })
}

/// Every sample accepted in `small` is accepted in `big` with the same rate
/// point. Both reports must come from the same sample stream.
pub fn region_contained(small: &RegionReport, big: &RegionReport) -> bool {
    small.accepted().all(|s| {
        big.samples
            .binary_search_by_key(&s.id, |b| b.id)
            .map(|i| big.samples[i].accepted && big.samples[i].rates == s.rates)
            .unwrap_or(false)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyTriple {
    pub h_u_given_v: f64,
    pub h_v_given_u: f64,
    pub h_uv: f64,
}

pub fn source_entropies(puv: &JointDist) -> Result<EntropyTriple> {
    let f = puv.to_factored("u1", "v1")?;
    Ok(EntropyTriple {
        h_u_given_v: f.conditional_entropy(&["u1"], &["v1"])?,
        h_v_given_u: f.conditional_entropy(&["v1"], &["u1"])?,
        h_uv: f.entropy(&["u1", "v1"])?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacBounds {
    /// I(X1; Y | X2, V, Q)
    pub i1: f64,
    /// I(X2; Y | X1, U, Q)
    pub i2: f64,
    /// I(X1, X2; Y | Q)
    pub i12: f64,
}

/// Joint tensor over `q, u1, v1, x1, x2, y` for a channel whose input
/// alphabet is the product `X1 x X2` (index `x1 * |X2| + x2`).
pub fn mac_dist(tc: &TestChannel, channel: &Kernel) -> Result<FactoredDist> {
    let x1 = tc.slices[0].x1.clone();
    let x2 = tc.slices[0].x2.clone();
    let n2 = x2.len();
    if channel.from().len() != x1.len() * n2 {
        return Err(Error::AlphabetMismatch(format!(
            "channel has {} inputs but X1 x X2 has {}",
            channel.from().len(),
            x1.len() * n2
        )));
    }
    let d = &tc.dist;
    FactoredDist::from_fn(
        vec![
            ("q".into(), tc.pq.alphabet().clone()),
            ("u1".into(), tc.puv.rows().clone()),
            ("v1".into(), tc.puv.cols().clone()),
            ("x1".into(), x1),
            ("x2".into(), x2),
            ("y".into(), channel.to().clone()),
        ],
        |i| d.get(&i[..5]) * channel.row(i[3] * n2 + i[4])[i[5]],
    )
}

pub fn mac_rates(tc: &TestChannel, channel: &Kernel) -> Result<MacBounds> {
    let d = mac_dist(tc, channel)?;
    Ok(MacBounds {
        i1: d.mutual_information(&["x1"], &["y"], &["x2", "v1", "q"])?.max(0.0),
        i2: d.mutual_information(&["x2"], &["y"], &["x1", "u1", "q"])?.max(0.0),
        i12: d.mutual_information(&["x1", "x2"], &["y"], &["q"])?.max(0.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MareReport {
    pub spectral: MembershipReport,
    pub bounds: MacBounds,
    pub entropies: EntropyTriple,
    /// `i1 - H(U|V)`, `i2 - H(V|U)`, `i12 - H(U,V)`.
    pub margins: [f64; 3],
    pub rates_ok: bool,
    pub pass: bool,
}

/// Necessary condition for sending correlated sources over a multiple-access
/// channel with single-letter encoders: every time-sharing slice passes the
/// four spectral conditions, and the source entropies fit under the three
/// mutual-information bounds (1e-9 slack).
pub fn mare_check(tc: &TestChannel, channel: &Kernel, lambda2_uv: f64) -> Result<MareReport> {
    let mut spectral = MembershipReport::new("S_mac");
    for k in 0..tc.slices.len() {
        let f = tc.slice_dist(k)?;
        let mut r = membership_sout4(&f, lambda2_uv)?;
        for c in r.constraints.iter_mut() {
            c.id = format!("q={k}:{}", c.id);
        }
        r.skipped.iter_mut().for_each(|s| *s = format!("q={k}:{s}"));
        spectral.merge(r);
    }
    let bounds = mac_rates(tc, channel)?;
    let entropies = source_entropies(&tc.puv)?;
    let margins = [
        bounds.i1 - entropies.h_u_given_v,
        bounds.i2 - entropies.h_v_given_u,
        bounds.i12 - entropies.h_uv,
    ];
    let rates_ok = margins.iter().all(|&m| m >= -RATE_SLACK);
    Ok(MareReport {
        pass: spectral.pass && rates_ok,
        spectral,
        bounds,
        entropies,
        margins,
        rates_ok,
    })
}

/// The common-information candidate `X1 = (U, W)`, `X2 = (V, W)` with W a
/// uniform bit independent of the sources. Symbols are indexed
/// `2 * letter + w`.
pub fn common_information_channel(nu: usize, nv: usize) -> Result<CondChannel> {
    let pi = [0.5, 0.5];
    let (ua, va) = (Alphabet::range(nu), Alphabet::range(nv));
    let (x1, x2) = (Alphabet::range(2 * nu), Alphabet::range(2 * nv));
    let k1: Vec<Kernel> = (0..2)
        .map(|w| Kernel::deterministic(&ua, &x1, &(0..nu).map(|u| 2 * u + w).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    let k2: Vec<Kernel> = (0..2)
        .map(|w| Kernel::deterministic(&va, &x2, &(0..nv).map(|v| 2 * v + w).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    CondChannel::mixture(&pi, &k1, &k2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bss() -> JointDist {
        JointDist::dsbs(0.25)
    }

    fn copy() -> CondChannel {
        let a = Alphabet::range(2);
        CondChannel::product(&Kernel::identity(&a), &Kernel::identity(&a))
    }

    fn identical_u() -> CondChannel {
        // X1 = X2 = U
        let cells = (0..4)
            .map(|c| {
                let u = c / 2;
                Matrix::from_fn(2, 2, |i, j| if i == u && j == u { 1.0 } else { 0.0 })
            })
            .collect();
        CondChannel::new(2, 2, Alphabet::range(2), Alphabet::range(2), cells).unwrap()
    }

    #[test]
    fn sin_and_sout1_examples() {
        let bsc = CondChannel::product(&Kernel::bsc(0.1), &Kernel::bsc(0.2));
        let f = candidate_dist(&bss(), &bsc).unwrap();
        assert!(membership_sin(&f).unwrap().member);
        assert!(membership_sout1(&f).unwrap().member);

        let f = candidate_dist(&bss(), &identical_u()).unwrap();
        assert!(!membership_sin(&f).unwrap().member);

        let ci = candidate_dist(&bss(), &common_information_channel(2, 2).unwrap()).unwrap();
        assert!(!membership_sin(&ci).unwrap().member);
        assert!(membership_sout1(&ci).unwrap().member);

        // X1 = V
        let cells = (0..4)
            .map(|c| Matrix::from_fn(2, 2, |i, j| if i == c % 2 && j == 0 { 1.0 } else { 0.0 }))
            .collect();
        let xv = CondChannel::new(2, 2, Alphabet::range(2), Alphabet::range(2), cells).unwrap();
        let f = candidate_dist(&bss(), &xv).unwrap();
        assert!(!membership_sout1(&f).unwrap().member);
    }

    #[test]
    fn sout2_examples() {
        let cfg = Sout2Config::default();
        let f = candidate_dist(&bss(), &copy()).unwrap();
        assert!(matches!(membership_sout2(&f, &cfg).unwrap(), Sout2Verdict::Member { w: 1, .. }));

        let ci = candidate_dist(&bss(), &common_information_channel(2, 2).unwrap()).unwrap();
        let v = membership_sout2(&ci, &cfg).unwrap();
        assert!(matches!(v, Sout2Verdict::Member { w: 2, .. }), "{v:?}");

        let f = candidate_dist(&bss(), &identical_u()).unwrap();
        let small = Sout2Config {
            w_max: Some(4),
            restarts: 8,
            max_iters: 500,
            seed: 1,
        };
        match membership_sout2(&f, &small).unwrap() {
            Sout2Verdict::NotFoundUpTo { w_max, best_residual } => {
                assert_eq!(w_max, 4);
                assert!(best_residual > 1e-3);
            }
            other => panic!("unexpected certificate {other:?}"),
        }
    }

    #[test]
    fn sout4_examples() {
        let ci = candidate_dist(&bss(), &common_information_channel(2, 2).unwrap()).unwrap();
        let r = membership_sout4(&ci, 0.5).unwrap();
        assert!(!r.pass);
        assert!((r.worst_constraint().unwrap().measured - 1.0).abs() < 1e-9);

        let bsc = CondChannel::product(&Kernel::bsc(0.1), &Kernel::bsc(0.1));
        let f = candidate_dist(&bss(), &bsc).unwrap();
        assert!(membership_sout4(&f, 0.5).unwrap().pass);
        assert_eq!(membership_sout4(&f, 0.5).unwrap().constraints.len(), 1 + 2 + 2 + 4);
    }

    #[test]
    fn rates_and_distortion() {
        let tc = TestChannel::single(bss(), copy()).unwrap();
        let r = rd_rates(&tc).unwrap();
        let h = crate::prob::binary_entropy(0.25);
        assert!((r.r1 - h).abs() < 1e-9 && (r.r2 - h).abs() < 1e-9);
        assert!((r.rsum - (1.0 + h)).abs() < 1e-9);
        let d = best_distortion(&tc, &DistortionSpec::hamming(2, 2)).unwrap();
        assert_eq!((d.ed1, d.ed2), (0.0, 0.0));

        let a = Alphabet::range(2);
        let constant = CondChannel::product(
            &Kernel::deterministic(&a, &a, &[0, 0]).unwrap(),
            &Kernel::deterministic(&a, &a, &[1, 1]).unwrap(),
        );
        let tc0 = TestChannel::single(bss(), constant.clone()).unwrap();
        let r = rd_rates(&tc0).unwrap();
        assert!(r.r1.abs() < 1e-12 && r.r2.abs() < 1e-12 && r.rsum.abs() < 1e-12);
        let d = best_distortion(&tc0, &DistortionSpec::hamming(2, 2)).unwrap();
        assert!((d.ed1 - 0.5).abs() < 1e-12 && (d.ed2 - 0.5).abs() < 1e-12);

        // half copy, half constant
        let mix = TestChannel::new(Marginal::uniform(2), bss(), vec![copy(), constant]).unwrap();
        let r = rd_rates(&mix).unwrap();
        assert!((r.r1 - h / 2.0).abs() < 1e-10);
        let d = best_distortion(&mix, &DistortionSpec::hamming(2, 2)).unwrap();
        assert!((d.ed1 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn test_channel_round_trips_through_its_tensor() {
        let bsc = CondChannel::product(&Kernel::bsc(0.1), &Kernel::bsc(0.3));
        let tc = TestChannel::new(Marginal::from_probs(&[0.4, 0.6]).unwrap(), bss(), vec![copy(), bsc]).unwrap();
        let back = TestChannel::from_dist(tc.dist()).unwrap();
        assert_eq!(back.slices().len(), 2);
        for (a, b) in back.dist().mass().iter().zip(tc.dist().mass()) {
            assert!((a - b).abs() < 1e-15);
        }
        let single = TestChannel::from_dist(&candidate_dist(&bss(), &copy()).unwrap()).unwrap();
        assert_eq!(single.pq().len(), 1);
    }

    #[test]
    fn mac_examples() {
        let tc = TestChannel::single(bss(), copy()).unwrap();
        let id = Kernel::identity(&Alphabet::range(4));
        let b = mac_rates(&tc, &id).unwrap();
        let h = crate::prob::binary_entropy(0.25);
        assert!((b.i12 - (1.0 + h)).abs() < 1e-9);
        let r = mare_check(&tc, &id, 0.5).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.margins[2].abs() < 1e-9);

        let dead = Kernel::constant(&Alphabet::range(4), &Marginal::uniform(2));
        let b = mac_rates(&tc, &dead).unwrap();
        assert!(b.i1.abs() < 1e-12 && b.i2.abs() < 1e-12 && b.i12.abs() < 1e-12);
        let r = mare_check(&tc, &dead, 0.5).unwrap();
        assert!(r.spectral.pass && !r.rates_ok && !r.pass);

        let ci = TestChannel::single(bss(), common_information_channel(2, 2).unwrap()).unwrap();
        let r = mare_check(&ci, &Kernel::identity(&Alphabet::range(16)), 0.5).unwrap();
        assert!(!r.spectral.pass && !r.pass);
    }

    #[test]
    fn sampled_regions_nest() {
        let cfg = SamplerConfig {
            budget: 40,
            seed: 3,
            ..SamplerConfig::default()
        };
        let ds = DistortionSpec::hamming(2, 2);
        let run = |p| rd_region_sample(&bss(), &ds, (0.5, 0.5), p, &cfg).unwrap();
        let sin = run(SetPredicate::Sin);
        let s4 = run(SetPredicate::Sout4);
        let s24 = run(SetPredicate::Sout2Cap4);
        assert!(region_contained(&sin, &s4));
        assert!(region_contained(&s24, &s4));
        // constant encoders always qualify at this distortion level
        assert!(sin.samples[0].accepted);
        assert_eq!(sin.samples[0].rates.rsum, 0.0);
    }
}
