//! n-letter spectra and a joint distribution of (X1, U^n) whose second
//! singular value is certified to approach 1 as n grows.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::prob::{Alphabet, JointDist, Marginal, POSITIVE_EPS};
use crate::spectral;

/// Largest `top_k` accepted by [`nletter_spectrum`].
pub const TOPK_CAP: usize = 1 << 20;
/// Largest |U|^n accepted by [`construct_witsenhausen`].
pub const SEQUENCE_CAP: usize = 1 << 22;
/// Columns per block in the streamed Gram accumulation.
const GRAM_BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NLetterSpectrum {
    /// Singular values of the base tilde matrix, λ₁ first.
    pub base: Vec<f64>,
    pub n: usize,
    /// Largest singular values of the n-fold Kronecker power, nonincreasing.
    pub values: Vec<f64>,
}

impl NLetterSpectrum {
    /// The leading value is 1 and positions 2 through n+1 all equal the base
    /// λ₂ (compared exactly).
    pub fn multiplicity_holds(&self) -> bool {
        if self.values.first() != Some(&1.0) {
            return false;
        }
        let l2 = self.base.get(1).copied().unwrap_or(0.0);
        let upto = (self.n + 1).min(self.values.len());
        self.values[1..upto].iter().all(|&v| v == l2)
    }
}

/// Top-`top_k` singular values of `P~_UV^{⊗n}`, enumerated as products of
/// base singular values without materializing the Kronecker power.
pub fn nletter_spectrum(j_uv: &JointDist, n: usize, top_k: usize) -> Result<NLetterSpectrum> {
    let t = spectral::tilde(j_uv)?;
    let mut base = spectral::singular_values(t.matrix())?;
    if let Some(first) = base.first_mut() {
        // the leading singular value of a valid joint is exactly 1
        if (*first - 1.0).abs() < spectral::SPECTRAL_TOL {
            *first = 1.0;
        }
    }
    for s in base.iter_mut().skip(1) {
        *s = s.clamp(0.0, 1.0);
    }
    let values = kron_top_values(&base, n, top_k)?;
    Ok(NLetterSpectrum { base, n, values })
}

#[derive(PartialEq)]
struct Node {
    value: f64,
    idx: Vec<u16>,
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // larger value first; ties by lexicographically smaller index tuple
        self.value
            .total_cmp(&other.value)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Best-first enumeration of the largest products `s[i1] s[i2] ... s[in]`
/// over ordered index tuples. `base` must be sorted nonincreasing and
/// nonnegative. Each tuple has a unique parent (decrement its last nonzero
/// coordinate), so every tuple is produced exactly once.
pub fn kron_top_values(base: &[f64], n: usize, top_k: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if top_k > TOPK_CAP {
        return Err(Error::CapExceeded {
            requested: top_k as u128,
            cap: TOPK_CAP as u128,
        });
    }
    let l = base.len();
    if l == 0 {
        return Ok(Vec::new());
    }
    if l > u16::MAX as usize {
        return Err(Error::CapExceeded {
            requested: l as u128,
            cap: u16::MAX as u128,
        });
    }
    let total = (l as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    let want = (top_k as u128).min(total) as usize;
    let mut heap = BinaryHeap::new();
    let start = vec![0u16; n];
    heap.push(Node {
        value: product(base, &start),
        idx: start,
    });
    let mut out = Vec::with_capacity(want);
    while out.len() < want {
        let Some(node) = heap.pop() else { break };
        out.push(node.value);
        let last = node.idx.iter().rposition(|&i| i > 0).unwrap_or(0);
        for j in last..n {
            if (node.idx[j] as usize) + 1 < l {
                let mut child = node.idx.clone();
                child[j] += 1;
                heap.push(Node {
                    value: product(base, &child),
                    idx: child,
                });
            }
        }
    }
    Ok(out)
}

fn product(base: &[f64], idx: &[u16]) -> f64 {
    idx.iter().map(|&i| base[i as usize]).product()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// P(S2) >= P(S1): the block (X1 - S1) x S2 keeps the surplus mass.
    S2AtLeastS1,
    /// P(S2) < P(S1): the block S1 x (U^n - S2) keeps the surplus mass.
    S2BelowS1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitsenhausenConstruction {
    pub px1: Vec<f64>,
    pub pu: Vec<f64>,
    pub n: usize,
    pub s1: Vec<usize>,
    /// Column indices of the chosen sequences (base-|U| digits, first letter
    /// most significant).
    pub s2: Vec<usize>,
    pub p_s1: f64,
    pub p_s2: f64,
    pub gap: f64,
    pub pmax: f64,
    pub branch: Branch,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub certified_lower: f64,
    /// Mass of each sequence of U^n.
    pub seq_mass: Vec<f64>,
    pub joint: JointDist,
}

/// Probability of every sequence in U^n, first letter most significant.
pub fn sequence_masses(pu: &[f64], n: usize) -> Result<Vec<f64>> {
    let k = pu.len() as u128;
    let total = k.checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > SEQUENCE_CAP as u128 {
        return Err(Error::CapExceeded {
            requested: total,
            cap: SEQUENCE_CAP as u128,
        });
    }
    let mut m = vec![1.0];
    for _ in 0..n {
        let mut next = Vec::with_capacity(m.len() * pu.len());
        for &a in &m {
            for &b in pu {
                next.push(a * b);
            }
        }
        m = next;
    }
    Ok(m)
}

/// Greedy choice of S2: sequences in descending mass (ties by index) are
/// accumulated while the total stays at most P(S1). One more sequence is
/// added when that shrinks the gap or the set is still empty, but never the
/// last remaining one.
pub fn choose_s2(seq_mass: &[f64], p_s1: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..seq_mass.len()).collect();
    order.sort_by(|&a, &b| seq_mass[b].total_cmp(&seq_mass[a]).then(a.cmp(&b)));
    let mut total = 0.0;
    let mut chosen = Vec::new();
    let mut next = None;
    for (pos, &i) in order.iter().enumerate() {
        if total + seq_mass[i] <= p_s1 * (1.0 + 1e-12) {
            total += seq_mass[i];
            chosen.push(i);
        } else {
            next = Some(pos);
            break;
        }
    }
    if let Some(pos) = next {
        let i = order[pos];
        let under = (p_s1 - total).abs();
        let over = (total + seq_mass[i] - p_s1).abs();
        let would_be_full = chosen.len() + 1 == seq_mass.len();
        if !would_be_full && (chosen.is_empty() || over < under) {
            chosen.push(i);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Builds the block-scaled joint of (X1, U^n) with marginals `px1` and
/// `pu^{⊗n}` that nearly decomposes along (S1, S2).
pub fn construct_witsenhausen(
    px1: &Marginal,
    pu: &Marginal,
    n: usize,
    s1: &[usize],
) -> Result<WitsenhausenConstruction> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !px1.is_positive() {
        return Err(Error::InvalidArgument("X1 marginal must be strictly positive".into()));
    }
    let pmax = pu.max();
    if pmax >= 1.0 - POSITIVE_EPS {
        return Err(Error::DegenerateSource { pmax });
    }
    let nx = px1.len();
    let mut in_s1 = vec![false; nx];
    for &x in s1 {
        if x >= nx {
            return Err(Error::InvalidArgument(format!("symbol {x} not in the X1 alphabet")));
        }
        in_s1[x] = true;
    }
    let p_s1: f64 = (0..nx).filter(|&x| in_s1[x]).map(|x| px1.probs()[x]).sum();
    if p_s1 <= 0.0 || p_s1 >= 1.0 - POSITIVE_EPS {
        return Err(Error::InvalidArgument(format!(
            "P(S1) = {p_s1} must lie strictly between 0 and 1"
        )));
    }
    let seq_mass = sequence_masses(pu.probs(), n)?;
    let s2 = choose_s2(&seq_mass, p_s1);
    let mut in_s2 = vec![false; seq_mass.len()];
    for &c in &s2 {
        in_s2[c] = true;
    }
    let p_s2: f64 = s2.iter().map(|&c| seq_mass[c]).sum();
    let gap = (p_s2 - p_s1).abs();
    let (a, b) = (p_s1, p_s2);
    let branch = if b >= a {
        Branch::S2AtLeastS1
    } else {
        Branch::S2BelowS1
    };
    // block scale factors applied to the independent joint
    let factor = |xs1: bool, us2: bool| -> f64 {
        match (branch, xs1, us2) {
            (Branch::S2AtLeastS1, true, true) => 1.0 / b,
            (Branch::S2AtLeastS1, true, false) => 0.0,
            (Branch::S2AtLeastS1, false, true) => (b - a) / ((1.0 - a) * b),
            (Branch::S2AtLeastS1, false, false) => 1.0 / (1.0 - a),
            (Branch::S2BelowS1, true, true) => 1.0 / a,
            (Branch::S2BelowS1, true, false) => (a - b) / (a * (1.0 - b)),
            (Branch::S2BelowS1, false, true) => 0.0,
            (Branch::S2BelowS1, false, false) => 1.0 / (1.0 - b),
        }
    };
    let ncols = seq_mass.len();
    let mut mass = Matrix::zeros(nx, ncols);
    for x in 0..nx {
        let px = px1.probs()[x];
        for c in 0..ncols {
            mass[(x, c)] = px * seq_mass[c] * factor(in_s1[x], in_s2[c]);
        }
    }
    let joint = JointDist::new(mass, px1.alphabet().clone(), Alphabet::range(ncols))?;

    let p1p = a.min(1.0 - a);
    let (c1, c2, c3, c4) = match branch {
        Branch::S2AtLeastS1 => {
            let c1 = 1.0 / (p1p * b);
            (c1, ((1.0 - a) / (1.0 - b)).sqrt() * c1, 1.0 / a.sqrt(), 1.0 / (1.0 - a).sqrt())
        }
        Branch::S2BelowS1 => {
            let c1 = 1.0 / (p1p * (1.0 - b));
            (c1, (a / b).sqrt() * c1, 1.0 / (1.0 - a).sqrt(), 1.0 / a.sqrt())
        }
    };
    let pn = pmax.powi(n as i32);
    let pn2 = pmax.powf(n as f64 / 2.0);
    let certified_lower = (1.0 - c4 * pn2).max(0.0) * (1.0 - c2 * pn).max(0.0);
    Ok(WitsenhausenConstruction {
        px1: px1.probs().to_vec(),
        pu: pu.probs().to_vec(),
        n,
        s1: (0..nx).filter(|&x| in_s1[x]).collect(),
        s2,
        p_s1,
        p_s2,
        gap,
        pmax,
        branch,
        c1,
        c2,
        c3,
        c4,
        certified_lower,
        seq_mass,
        joint,
    })
}

impl WitsenhausenConstruction {
    /// Diagonal of the scaling M with `P'_X1 = P_X1 M`: S1 rows by
    /// P(S2)/P(S1), the rest by (1 - P(S2))/(1 - P(S1)).
    pub fn scaling_diag(&self) -> Vec<f64> {
        let (a, b) = (self.p_s1, self.p_s2);
        (0..self.px1.len())
            .map(|x| {
                if self.s1.contains(&x) {
                    b / a
                } else {
                    (1.0 - b) / (1.0 - a)
                }
            })
            .collect()
    }

    /// The decomposing joint P' = P + E obtained by moving the off-block
    /// mass into the diagonal block that shares its columns.
    pub fn decomposed_mass(&self) -> Matrix {
        let m = self.joint.mass();
        let in_s2 = self.s2_mask();
        let (a, b) = (self.p_s1, self.p_s2);
        Matrix::from_fn(m.nrows(), m.ncols(), |x, c| {
            let xs1 = self.s1.contains(&x);
            match (self.branch, xs1, in_s2[c]) {
                (Branch::S2AtLeastS1, true, true) => m[(x, c)] * b / a,
                (Branch::S2AtLeastS1, false, true) => 0.0,
                (Branch::S2BelowS1, false, false) => m[(x, c)] * (1.0 - b) / (1.0 - a),
                (Branch::S2BelowS1, true, false) => 0.0,
                _ => m[(x, c)],
            }
        })
    }

    fn s2_mask(&self) -> Vec<bool> {
        let mut v = vec![false; self.seq_mass.len()];
        for &c in &self.s2 {
            v[c] = true;
        }
        v
    }

    /// Tilde matrix of the construction.
    pub fn tilde_matrix(&self) -> Matrix {
        let ix: Vec<f64> = self.px1.iter().map(|p| 1.0 / p.sqrt()).collect();
        let iy: Vec<f64> = self.seq_mass.iter().map(|p| 1.0 / p.sqrt()).collect();
        self.joint.mass().scale_rows_cols(&ix, &iy)
    }
}

/// Inputs of the two perturbation inequalities as they arise in the
/// construction: `A = M^{-1/2} P~`, `E' = M^{-1/2} P_X1^{-1/2} E P_U^{-1/2}`
/// (so that `A + E'` is the decomposing tilde matrix), and the diagonal of
/// `M^{1/2}` (so that `P~ = M^{1/2} A`).
pub fn perturbation_inputs(w: &WitsenhausenConstruction) -> (Matrix, Matrix, Vec<f64>) {
    let d = w.scaling_diag();
    let m_inv_half: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let ones = vec![1.0; w.seq_mass.len()];
    let a = w.tilde_matrix().scale_rows_cols(&m_inv_half, &ones);
    let e = w.decomposed_mass().sub(w.joint.mass());
    let ix: Vec<f64> = w
        .px1
        .iter()
        .zip(&m_inv_half)
        .map(|(p, m)| m / p.sqrt())
        .collect();
    let iy: Vec<f64> = w.seq_mass.iter().map(|p| 1.0 / p.sqrt()).collect();
    let e_scaled = e.scale_rows_cols(&ix, &iy);
    (a, e_scaled, d.iter().map(|x| x.sqrt()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub n: usize,
    pub gap: f64,
    pub gap_bound: f64,
    pub certified_lower: f64,
    /// From the eigenvalues of the |X1| x |X1| Gram matrix of P~.
    pub lambda2: f64,
    /// From the Frobenius identity `||P~||_F^2 = 1 + lambda2^2`, valid
    /// because the construction has rank at most 2.
    pub lambda2_frobenius: f64,
    pub gap_ok: bool,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub holds: bool,
}

/// Gram matrix `P~ P~^T`, accumulated over fixed column blocks whose partial
/// sums are added in block order, so the result does not depend on the
/// thread count.
pub fn streamed_gram(w: &WitsenhausenConstruction) -> Matrix {
    let nx = w.px1.len();
    let ncols = w.seq_mass.len();
    let mass = w.joint.mass();
    let ix: Vec<f64> = w.px1.iter().map(|p| 1.0 / p.sqrt()).collect();
    let blocks: Vec<usize> = (0..ncols.div_ceil(GRAM_BLOCK)).collect();
    let partials: Vec<Vec<f64>> = blocks
        .par_iter()
        .map(|&blk| {
            let lo = blk * GRAM_BLOCK;
            let hi = (lo + GRAM_BLOCK).min(ncols);
            let mut g = vec![0.0; nx * nx];
            let mut col = vec![0.0; nx];
            for c in lo..hi {
                let iy = 1.0 / w.seq_mass[c];
                for x in 0..nx {
                    col[x] = mass[(x, c)] * ix[x];
                }
                for i in 0..nx {
                    if col[i] == 0.0 {
                        continue;
                    }
                    for j in i..nx {
                        g[i * nx + j] += col[i] * col[j] * iy;
                    }
                }
            }
            g
        })
        .collect();
    let mut g = Matrix::zeros(nx, nx);
    for p in partials {
        for i in 0..nx {
            for j in i..nx {
                g[(i, j)] += p[i * nx + j];
            }
        }
    }
    for i in 0..nx {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    g
}

pub fn verify_app_bound(w: &WitsenhausenConstruction) -> Result<CertificateReport> {
    let g = streamed_gram(w);
    let eig = linalg::symmetric_eigen(&g)?;
    let lambda2 = eig.values.get(1).map_or(0.0, |v| v.max(0.0).sqrt());
    let trace: f64 = (0..g.nrows()).map(|i| g[(i, i)]).sum();
    let lambda2_frobenius = (trace - 1.0).max(0.0).sqrt();
    let gap_bound = w.pmax.powi(w.n as i32);
    let tol = 1e-8;
    let gap_ok = w.gap <= gap_bound * (1.0 + 1e-12);
    let lower_ok = w.certified_lower - tol <= lambda2;
    let upper_ok = lambda2 <= 1.0 + tol;
    Ok(CertificateReport {
        n: w.n,
        gap: w.gap,
        gap_bound,
        certified_lower: w.certified_lower,
        lambda2,
        lambda2_frobenius,
        gap_ok,
        lower_ok,
        upper_ok,
        holds: gap_ok && lower_ok && upper_ok,
    })
}

/// Certificates for every n in `ns`.
pub fn trajectory(
    px1: &Marginal,
    pu: &Marginal,
    ns: impl IntoIterator<Item = usize>,
    s1: &[usize],
) -> Result<Vec<CertificateReport>> {
    ns.into_iter()
        .map(|n| verify_app_bound(&construct_witsenhausen(px1, pu, n, s1)?))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub e_norm: f64,
    /// `||E||_2 - |lambda_i(A + E) - lambda_i(A)|` per index.
    pub additive_slack: Vec<f64>,
    /// `lambda_i(MA) - min|d| lambda_i(A)` per index.
    pub lower_slack: Vec<f64>,
    /// `max|d| lambda_i(A) - lambda_i(MA)` per index.
    pub upper_slack: Vec<f64>,
    pub holds: bool,
}

/// Checks the additive perturbation bound for `A + E` and the multiplicative
/// bound for `diag(m) A`, each within 1e-9.
pub fn perturbation_check(a: &Matrix, e: &Matrix, m: &[f64]) -> Result<LemmaReport> {
    if a.shape() != e.shape() {
        return Err(Error::DimensionMismatch("A and E differ in shape".into()));
    }
    if m.len() != a.nrows() {
        return Err(Error::DimensionMismatch(
            "scaling diagonal length differs from the row count".into(),
        ));
    }
    let dmin = m.iter().fold(f64::INFINITY, |acc, x| acc.min(x.abs()));
    let dmax = m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if dmin <= f64::MIN_POSITIVE || !dmin.is_finite() {
        return Err(Error::SingularScaling);
    }
    let tol = 1e-9;
    let sa = linalg::svd(a)?.sigma;
    let sae = linalg::svd(&a.add(e))?.sigma;
    let e_norm = linalg::spectral_norm(e)?;
    let ones = vec![1.0; a.ncols()];
    let sma = linalg::svd(&a.scale_rows_cols(m, &ones))?.sigma;
    let additive_slack: Vec<f64> = sa
        .iter()
        .zip(&sae)
        .map(|(x, y)| e_norm - (y - x).abs())
        .collect();
    let lower_slack: Vec<f64> = sa.iter().zip(&sma).map(|(x, y)| y - dmin * x).collect();
    let upper_slack: Vec<f64> = sa.iter().zip(&sma).map(|(x, y)| dmax * x - y).collect();
    let holds = additive_slack
        .iter()
        .chain(&lower_slack)
        .chain(&upper_slack)
        .all(|&s| s >= -tol);
    Ok(LemmaReport {
        e_norm,
        additive_slack,
        lower_slack,
        upper_slack,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_examples() {
        let s = nletter_spectrum(&JointDist::dsbs(0.25), 2, 4).unwrap();
        let want = [1.0, 0.5, 0.5, 0.25];
        assert!(s.values.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-14));
        assert!(s.multiplicity_holds());
        let s1 = nletter_spectrum(&JointDist::dsbs(0.25), 1, 10).unwrap();
        assert!((s1.values[1] - 0.5).abs() < 1e-15 && s1.values.len() == 2);
        let v = kron_top_values(&[1.0, 0.6, 0.2], 2, 4).unwrap();
        let want = [1.0, 0.6, 0.6, 0.36];
        assert!(v.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(matches!(
            kron_top_values(&[1.0], 1, TOPK_CAP + 1),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn greedy_gap_examples() {
        let u = Marginal::uniform(2);
        let w = construct_witsenhausen(&Marginal::uniform(2), &u, 3, &[0]).unwrap();
        assert_eq!(w.s2.len(), 4);
        assert_eq!(w.gap, 0.0);
        assert!(spectral::decomposes(&w.joint).is_some());

        let px = Marginal::from_probs(&[0.3, 0.7]).unwrap();
        let w = construct_witsenhausen(&px, &u, 4, &[0]).unwrap();
        assert!((w.gap - 0.0125).abs() < 1e-15);
        assert!((w.p_s2 - 5.0 / 16.0).abs() < 1e-15);

        let pu = Marginal::from_probs(&[0.9, 0.1]).unwrap();
        let w = construct_witsenhausen(&Marginal::uniform(2), &pu, 1, &[0]).unwrap();
        assert!((w.gap - 0.4).abs() < 1e-15);
    }

    #[test]
    fn degenerate_source() {
        let pu = Marginal::from_probs(&[1.0, 0.0]).unwrap();
        assert!(matches!(
            construct_witsenhausen(&Marginal::uniform(2), &pu, 2, &[0]),
            Err(Error::DegenerateSource { .. })
        ));
    }

    #[test]
    fn both_branches_have_prescribed_marginals() {
        let px = Marginal::from_probs(&[0.3, 0.2, 0.5]).unwrap();
        let pu = Marginal::from_probs(&[0.6, 0.4]).unwrap();
        for (n, s1) in [(3, vec![0]), (2, vec![0, 1]), (5, vec![2]), (4, vec![1])] {
            let w = construct_witsenhausen(&px, &pu, n, &s1).unwrap();
            let (rx, cu) = w.joint.marginals();
            assert!(rx.probs().iter().zip(px.probs()).all(|(a, b)| (a - b).abs() < 1e-12));
            assert!(cu.probs().iter().zip(&w.seq_mass).all(|(a, b)| (a - b).abs() < 1e-12));
            let r = verify_app_bound(&w).unwrap();
            assert!(r.holds, "{r:?}");
            assert!((r.lambda2 - r.lambda2_frobenius).abs() < 1e-9);
            let (a, e, m) = perturbation_inputs(&w);
            assert!(perturbation_check(&a, &e, &m).unwrap().holds);
            let decomposed = w.decomposed_mass();
            let dj = JointDist::new(decomposed, w.joint.rows().clone(), w.joint.cols().clone()).unwrap();
            assert!(spectral::decomposes(&dj).is_some());
        }
    }

    #[test]
    fn perturbation_examples() {
        let a = Matrix::from_rows(&[[0.9, 0.2, 0.1], [0.3, 0.5, 0.4], [0.0, 0.7, 0.6]]).unwrap();
        let z = Matrix::zeros(3, 3);
        let r = perturbation_check(&a, &z, &[1.0, 1.0, 1.0]).unwrap();
        assert!(r.holds);
        assert!(r.additive_slack.iter().all(|s| s.abs() < 1e-12));
        let e = Matrix::from_rows(&[[1e-3, -2e-3, 0.0], [0.0, 1e-3, 1e-3], [-1e-3, 0.0, 2e-3]]).unwrap();
        assert!(perturbation_check(&a, &e, &[2.0, 0.5, 1.0]).unwrap().holds);
        assert_eq!(
            perturbation_check(&a, &e, &[1.0, 0.0, 1.0]),
            Err(Error::SingularScaling)
        );
    }
}
