//! The normalized joint matrix `P~ = P_X^{-1/2} P P_Y^{-1/2}`, its singular
//! value decomposition and the correlation spectrum it carries.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm2, Matrix, SvdOptions};
use crate::prob::{JointDist, POSITIVE_EPS};

/// Default tolerance for spectral validity checks.
pub const SPECTRAL_TOL: f64 = 1e-8;

/// Normalized joint matrix, optionally carrying the marginals it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct TildeMatrix {
    mat: Matrix,
    px: Option<Vec<f64>>,
    py: Option<Vec<f64>>,
}

impl TildeMatrix {
    /// A candidate matrix with no marginals attached; [`untilde`] recovers
    /// them from the leading singular vectors.
    pub fn new(mat: Matrix) -> Self {
        Self {
            mat,
            px: None,
            py: None,
        }
    }

    pub fn with_marginals(mat: Matrix, px: Vec<f64>, py: Vec<f64>) -> Result<Self> {
        if px.len() != mat.nrows() || py.len() != mat.ncols() {
            return Err(Error::DimensionMismatch(
                "marginal lengths do not match the matrix".into(),
            ));
        }
        Ok(Self {
            mat,
            px: Some(px),
            py: Some(py),
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn px(&self) -> Option<&[f64]> {
        self.px.as_deref()
    }

    pub fn py(&self) -> Option<&[f64]> {
        self.py.as_deref()
    }
}

/// `P_X^{-1/2} P P_Y^{-1/2}`; both marginals must be strictly positive.
pub fn tilde(j: &JointDist) -> Result<TildeMatrix> {
    if let Some(e) = j.first_zero_marginal() {
        return Err(e);
    }
    let px = j.px();
    let py = j.py();
    let ix: Vec<f64> = px.iter().map(|p| 1.0 / p.sqrt()).collect();
    let iy: Vec<f64> = py.iter().map(|p| 1.0 / p.sqrt()).collect();
    Ok(TildeMatrix {
        mat: j.mass().scale_rows_cols(&ix, &iy),
        px: Some(px),
        py: Some(py),
    })
}

/// Inverse of [`tilde`]: `P = P_X^{1/2} P~ P_Y^{1/2}`.
pub fn untilde(t: &TildeMatrix) -> Result<JointDist> {
    let (px, py) = match (&t.px, &t.py) {
        (Some(px), Some(py)) => (px.clone(), py.clone()),
        _ => {
            let d = svd(t)?;
            if d.sigma.is_empty() {
                return Err(Error::InvalidTilde("empty matrix".into()));
            }
            let top = d.sigma[0];
            let group: Vec<usize> = (0..d.sigma.len())
                .filter(|&k| (d.sigma[k] - top).abs() <= SPECTRAL_TOL)
                .collect();
            let (mu, nu) = projected_pair(t, &d, &group).ok_or_else(|| {
                Error::InvalidTilde("leading singular subspace has no nonnegative direction".into())
            })?;
            if mu.iter().chain(&nu).any(|&x| x < -SPECTRAL_TOL) {
                return Err(Error::InvalidTilde(
                    "leading singular vectors are not nonnegative".into(),
                ));
            }
            let nn = norm2(&nu);
            (
                mu.iter().map(|x| x * x).collect(),
                nu.iter().map(|x| (x / nn).powi(2)).collect(),
            )
        }
    };
    let sx: Vec<f64> = px.iter().map(|p| p.max(0.0).sqrt()).collect();
    let sy: Vec<f64> = py.iter().map(|p| p.max(0.0).sqrt()).collect();
    let mass = t.mat.scale_rows_cols(&sx, &sy);
    let (r, c) = mass.shape();
    let j = JointDist::new(
        mass,
        crate::prob::Alphabet::range(r),
        crate::prob::Alphabet::range(c),
    )
    .map_err(|e| Error::InvalidTilde(e.to_string()))?;
    let consistent = j
        .px()
        .iter()
        .zip(&px)
        .chain(j.py().iter().zip(&py))
        .all(|(a, b)| (a - b).abs() <= 1e-9);
    if !consistent {
        return Err(Error::InvalidTilde(
            "recovered joint does not reproduce the marginals".into(),
        ));
    }
    Ok(j)
}

/// `T = M diag(sigma) N^T` with orthonormal columns in `left` (M) and
/// `right` (N).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub sigma: Vec<f64>,
    pub left: Matrix,
    pub right: Matrix,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> Matrix {
        linalg::Svd {
            u: self.left.clone(),
            sigma: self.sigma.clone(),
            v: self.right.clone(),
        }
        .reconstruct()
    }
}

pub fn svd(t: &TildeMatrix) -> Result<SpectralDecomposition> {
    svd_with(t, SvdOptions::default())
}

/// SVD under the deterministic sign and ordering convention: every left
/// vector's first nonzero coordinate is positive, the right vector follows
/// it, and equal singular values are ordered by their left vectors,
/// lexicographically descending.
pub fn svd_with(t: &TildeMatrix, opts: SvdOptions) -> Result<SpectralDecomposition> {
    let s = linalg::svd_with(&t.mat, opts)?;
    let l = s.sigma.len();
    let mut cols: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..l)
        .map(|k| {
            let mut u = s.u.column(k);
            let mut v = s.v.column(k);
            let lead = u.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(0.0);
            if lead < 0.0 {
                u.iter_mut().for_each(|x| *x = -*x);
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (s.sigma[k], u, v)
        })
        .collect();
    let scale = cols.first().map_or(0.0, |c| c.0).max(1.0);
    let mut start = 0;
    while start < l {
        let mut end = start + 1;
        while end < l && (cols[start].0 - cols[end].0).abs() <= 1e-12 * scale {
            end += 1;
        }
        if end - start > 1 {
            cols[start..end].sort_by(|a, b| {
                for (x, y) in a.1.iter().zip(&b.1) {
                    if (x - y).abs() > 1e-12 {
                        return y.total_cmp(x);
                    }
                }
                std::cmp::Ordering::Equal
            });
        }
        start = end;
    }
    let m = s.u.nrows();
    let n = s.v.nrows();
    Ok(SpectralDecomposition {
        sigma: cols.iter().map(|c| c.0).collect(),
        left: Matrix::from_fn(m, l, |i, k| cols[k].1[i]),
        right: Matrix::from_fn(n, l, |i, k| cols[k].2[i]),
    })
}

/// Singular values only. Two-by-two inputs use the closed form, everything
/// else goes through [`linalg::svd`].
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    if m.shape() == (2, 2) {
        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let fro2 = a * a + b * b + c * c + d * d;
        let det = (a * d - b * c).abs();
        let disc = ((fro2 - 2.0 * det) * (fro2 + 2.0 * det)).max(0.0).sqrt();
        let s1 = ((fro2 + disc) / 2.0).sqrt();
        let s2 = if s1 > 0.0 { det / s1 } else { 0.0 };
        return Ok(vec![s1, s2]);
    }
    Ok(linalg::svd(m)?.sigma)
}

/// λ₂, …, λ_l of a joint distribution, clamped to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationSpectrum {
    pub lambdas: Vec<f64>,
}

impl CorrelationSpectrum {
    /// λ_i for `i >= 2` (one-based, as usual for singular values); missing
    /// indices read as zero.
    pub fn lambda(&self, i: usize) -> f64 {
        assert!(i >= 2, "the correlation spectrum starts at index 2");
        self.lambdas.get(i - 2).copied().unwrap_or(0.0)
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda(2)
    }

    pub fn max(&self) -> f64 {
        self.lambdas.first().copied().unwrap_or(0.0)
    }
}

pub fn correlation_spectrum(j: &JointDist) -> Result<CorrelationSpectrum> {
    let t = tilde(j)?;
    let sigma = singular_values(t.matrix())?;
    Ok(CorrelationSpectrum {
        lambdas: sigma.iter().skip(1).map(|s| s.clamp(0.0, 1.0)).collect(),
    })
}

pub fn lambda2(j: &JointDist) -> Result<f64> {
    Ok(correlation_spectrum(j)?.lambda2())
}

/// Spectrum of an unnormalized nonnegative mass matrix after dropping the
/// rows and columns without mass. Used for conditional slices, where zero
/// symbols are routine. Returns an empty spectrum when the support has a
/// single row or column.
pub fn support_spectrum(mass: &Matrix) -> Result<CorrelationSpectrum> {
    let total = mass.sum();
    if total <= 0.0 {
        return Err(Error::ZeroEvent { prob: total });
    }
    let rs = mass.row_sums();
    let cs = mass.col_sums();
    let thr = POSITIVE_EPS * total;
    let rk: Vec<usize> = (0..rs.len()).filter(|&i| rs[i] > thr).collect();
    let ck: Vec<usize> = (0..cs.len()).filter(|&j| cs[j] > thr).collect();
    if rk.len() < 2 || ck.len() < 2 {
        return Ok(CorrelationSpectrum { lambdas: Vec::new() });
    }
    let sub = mass.select(&rk, &ck);
    let ix: Vec<f64> = rk.iter().map(|&i| 1.0 / rs[i].sqrt()).collect();
    let iy: Vec<f64> = ck.iter().map(|&j| 1.0 / cs[j].sqrt()).collect();
    let t = sub.scale_rows_cols(&ix, &iy);
    let sigma = singular_values(&t)?;
    Ok(CorrelationSpectrum {
        lambdas: sigma.iter().skip(1).map(|s| s.clamp(0.0, 1.0)).collect(),
    })
}

/// Outcome of the four-part validity test for a candidate tilde matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub sigma: Vec<f64>,
    pub sigma_in_unit_interval: bool,
    pub top_is_one: bool,
    pub positive_top_pair: bool,
    pub untilde_valid: bool,
    pub accept: bool,
    pub reason: Option<String>,
}

pub fn verify_theorem_iff(t: &TildeMatrix) -> ValidityReport {
    verify_theorem_iff_tol(t, SPECTRAL_TOL)
}

/// A nonnegative matrix is the tilde transform of a joint distribution
/// exactly when its singular values lie in [0, 1], the largest is 1, and the
/// unit singular value has a strictly positive singular vector pair.
pub fn verify_theorem_iff_tol(t: &TildeMatrix, tol: f64) -> ValidityReport {
    let mut reasons = Vec::new();
    let dec = match svd(t) {
        Ok(d) => d,
        Err(e) => {
            return ValidityReport {
                sigma: Vec::new(),
                sigma_in_unit_interval: false,
                top_is_one: false,
                positive_top_pair: false,
                untilde_valid: false,
                accept: false,
                reason: Some(e.to_string()),
            }
        }
    };
    let sigma = dec.sigma.clone();
    let in_range = sigma.iter().all(|&s| s >= -tol && s <= 1.0 + tol);
    if !in_range {
        reasons.push(format!(
            "singular value {} outside [0, 1]",
            sigma.iter().cloned().fold(f64::NAN, f64::max)
        ));
    }
    let top_is_one = sigma.first().is_some_and(|s| (s - 1.0).abs() <= tol);
    if !top_is_one {
        reasons.push(format!("largest singular value is {:?}", sigma.first()));
    }
    let positive = positive_unit_pair(t, &dec, tol);
    if !positive {
        reasons.push("no strictly positive singular vector pair for the unit singular value".into());
    }
    let untilde_valid = match untilde(t) {
        Ok(_) => true,
        Err(e) => {
            reasons.push(e.to_string());
            false
        }
    };
    let nonneg = t.mat.data().iter().all(|&x| x >= -tol);
    if !nonneg {
        reasons.push("negative entry".into());
    }
    let accept = in_range && top_is_one && positive && untilde_valid && nonneg;
    ValidityReport {
        sigma,
        sigma_in_unit_interval: in_range,
        top_is_one,
        positive_top_pair: positive,
        untilde_valid,
        accept,
        reason: if reasons.is_empty() {
            None
        } else {
            Some(reasons.join("; "))
        },
    }
}

/// Projects the all-ones vector onto the left singular subspace spanned by
/// `group` and pairs it with `T^T mu`. The right vector is not normalized so
/// callers can check that the pair really belongs to singular value 1.
fn projected_pair(
    t: &TildeMatrix,
    dec: &SpectralDecomposition,
    group: &[usize],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = t.mat.nrows();
    if group.is_empty() || m == 0 {
        return None;
    }
    let ones = vec![1.0; m];
    let mut mu = vec![0.0; m];
    for &k in group {
        let u = dec.left.column(k);
        let c = dot(&ones, &u);
        for (x, y) in mu.iter_mut().zip(&u) {
            *x += c * y;
        }
    }
    let nrm = norm2(&mu);
    if nrm <= 1e-12 {
        return None;
    }
    mu.iter_mut().for_each(|x| *x /= nrm);
    let nu = t.mat.tr_mul_vec(&mu);
    Some((mu, nu))
}

/// Looks for a strictly positive pair in the singular subspace of value 1.
/// The projection finds it whenever the subspace is one-dimensional, and for
/// any valid joint, where the square root of the row marginal always lies in
/// the subspace.
fn positive_unit_pair(t: &TildeMatrix, dec: &SpectralDecomposition, tol: f64) -> bool {
    let unit: Vec<usize> = (0..dec.sigma.len())
        .filter(|&k| (dec.sigma[k] - 1.0).abs() <= tol)
        .collect();
    let Some((mu, nu)) = projected_pair(t, dec, &unit) else {
        return false;
    };
    if (norm2(&nu) - 1.0).abs() > 1e-6 {
        return false;
    }
    mu.iter().all(|&x| x > 1e-12) && nu.iter().all(|&x| x > 1e-12)
}

/// A split of a decomposable joint: symbol sets `s1` (rows) and `s2`
/// (columns) with no mass on `(X - s1) x s2` or `s1 x (Y - s2)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decomposition {
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
}

/// Exact combinatorial test: the support graph (row i -- col j when
/// mass > 1e-12) has at least two components carrying mass.
pub fn decomposes(j: &JointDist) -> Option<Decomposition> {
    let (r, c) = j.shape();
    let mut parent: Vec<usize> = (0..r + c).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut has_edge = vec![false; r + c];
    for i in 0..r {
        for jj in 0..c {
            if j.mass()[(i, jj)] > POSITIVE_EPS {
                has_edge[i] = true;
                has_edge[r + jj] = true;
                let a = find(&mut parent, i);
                let b = find(&mut parent, r + jj);
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut roots: Vec<usize> = (0..r + c)
        .filter(|&x| has_edge[x])
        .map(|x| find(&mut parent, x))
        .collect();
    roots.sort_unstable();
    roots.dedup();
    if roots.len() < 2 {
        return None;
    }
    let first = roots[0];
    let s1: Vec<usize> = (0..r)
        .filter(|&i| has_edge[i] && find(&mut parent, i) == first)
        .collect();
    let s2: Vec<usize> = (0..c)
        .filter(|&jj| has_edge[r + jj] && find(&mut parent, r + jj) == first)
        .collect();
    Some(Decomposition { s1, s2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn indep() -> JointDist {
        JointDist::from_rows(&[[0.25, 0.25], [0.25, 0.25]]).unwrap()
    }

    fn identity() -> JointDist {
        JointDist::from_rows(&[[0.5, 0.0], [0.0, 0.5]]).unwrap()
    }

    #[test]
    fn tilde_examples() {
        assert!(tilde(&indep())
            .unwrap()
            .matrix()
            .sub(&Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap())
            .max_abs()
            < 1e-15);
        assert!(tilde(&identity()).unwrap().matrix().sub(&Matrix::identity(2)).max_abs() < 1e-15);
        let b = tilde(&JointDist::dsbs(0.25)).unwrap();
        let want = Matrix::from_rows(&[[0.75, 0.25], [0.25, 0.75]]).unwrap();
        assert!(b.matrix().sub(&want).max_abs() < 1e-15);
        let z = JointDist::from_rows(&[[0.5, 0.5], [0.0, 0.0]]).unwrap();
        assert!(matches!(tilde(&z), Err(Error::ZeroMarginal { .. })));
    }

    #[test]
    fn untilde_examples() {
        let t = TildeMatrix::with_marginals(
            Matrix::from_rows(&[[0.75, 0.25], [0.25, 0.75]]).unwrap(),
            vec![0.5, 0.5],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert!(untilde(&t).unwrap().mass().sub(JointDist::dsbs(0.25).mass()).max_abs() < 1e-15);
        let bare = TildeMatrix::new(Matrix::identity(2));
        assert!(untilde(&bare).unwrap().mass().sub(identity().mass()).max_abs() < 1e-12);
        let bad = TildeMatrix::new(Matrix::identity(2).scale(1.2));
        assert!(matches!(untilde(&bad), Err(Error::InvalidTilde(_))));
    }

    #[test]
    fn svd_examples() {
        let s = svd(&tilde(&indep()).unwrap()).unwrap();
        assert!(close(&s.sigma, &[1.0, 0.0], 1e-14));
        let s = svd(&tilde(&identity()).unwrap()).unwrap();
        assert!(close(&s.sigma, &[1.0, 1.0], 1e-14));
        let s = svd(&tilde(&JointDist::dsbs(0.25)).unwrap()).unwrap();
        assert!(close(&s.sigma, &[1.0, 0.5], 1e-14));
        let r = 0.5f64.sqrt();
        assert!(close(&s.left.column(0), &[r, r], 1e-14));
        assert!(close(&s.left.column(1), &[r, -r], 1e-14));
        assert!(close(&s.right.column(1), &[r, -r], 1e-14));
    }

    #[test]
    fn tie_order_is_deterministic() {
        let s = svd(&tilde(&identity()).unwrap()).unwrap();
        assert!(close(&s.left.column(0), &[1.0, 0.0], 1e-14));
        assert!(close(&s.left.column(1), &[0.0, 1.0], 1e-14));
    }

    #[test]
    fn iff_examples() {
        assert!(verify_theorem_iff(&tilde(&JointDist::dsbs(0.25)).unwrap()).accept);
        let diag = TildeMatrix::new(Matrix::diag(&[1.0, 0.5]));
        let r = verify_theorem_iff(&diag);
        assert!(!r.accept && !r.positive_top_pair);
        let scaled = TildeMatrix::new(tilde(&indep()).unwrap().matrix().scale(1.2));
        let r = verify_theorem_iff(&scaled);
        assert!(!r.accept && !r.top_is_one);
        assert!((r.sigma[0] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn spectrum_examples() {
        assert_eq!(correlation_spectrum(&indep()).unwrap().lambdas, vec![0.0]);
        assert!((lambda2(&identity()).unwrap() - 1.0).abs() < 1e-15);
        assert!((lambda2(&JointDist::dsbs(0.25)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_jacobi() {
        let m = Matrix::from_rows(&[[0.3, -1.2], [2.0, 0.7]]).unwrap();
        let a = singular_values(&m).unwrap();
        let b = linalg::svd(&m).unwrap().sigma;
        assert!(close(&a, &b, 1e-14));
    }

    #[test]
    fn decomposes_examples() {
        assert_eq!(
            decomposes(&identity()),
            Some(Decomposition {
                s1: vec![0],
                s2: vec![0]
            })
        );
        assert_eq!(decomposes(&JointDist::dsbs(0.25)), None);
        let b = JointDist::from_rows(&[[0.3, 0.0, 0.0], [0.0, 0.4, 0.3]]).unwrap();
        let d = decomposes(&b).unwrap();
        assert_eq!(d.s1, vec![0]);
        assert_eq!(d.s2, vec![0]);
        assert!((lambda2(&b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn support_spectrum_drops_empty_symbols() {
        let m = Matrix::from_rows(&[[0.2, 0.0, 0.1], [0.0, 0.0, 0.0], [0.1, 0.0, 0.2]]).unwrap();
        let s = support_spectrum(&m).unwrap();
        // the surviving block is a symmetric binary source with crossover 1/3
        let want = 1.0 / 3.0;
        assert!((s.lambda2() - want).abs() < 1e-14);
        let row = Matrix::from_rows(&[[0.5, 0.5], [0.0, 0.0]]).unwrap();
        assert!(support_spectrum(&row).unwrap().lambdas.is_empty());
    }
}
