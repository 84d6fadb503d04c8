//! Markov-chain composition, the spectral data-processing inequality and the
//! single-letter necessary conditions for n-letter chains
//! `X1 - U^n - V^n - X2`.
//!
//! Constraints are checked for singular value indices `i >= 2` only. The
//! leading singular value is always 1, so a constraint at `i = 1` could only
//! hold when `lambda2(UV) = 1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::prob::{FactoredDist, JointDist, Kernel, POSITIVE_EPS};
use crate::spectral::{self, support_spectrum, CorrelationSpectrum};

/// Default absolute tolerance on singular value inequalities.
pub const DPI_TOL: f64 = 1e-8;
/// Default cap on the number of subset pairs in [`intersection_membership`].
pub const DEFAULT_SUBSET_CAP: usize = 256;

/// Markov chain X - Y - Z given by P_XY and the kernel p(z | y).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub pxy: JointDist,
    pub kzy: Kernel,
}

impl ChainSpec {
    pub fn new(pxy: JointDist, kzy: Kernel) -> Result<Self> {
        if kzy.from() != pxy.cols() {
            return Err(Error::AlphabetMismatch(
                "kernel input alphabet differs from the Y alphabet of the joint".into(),
            ));
        }
        Ok(Self { pxy, kzy })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    pub pxz: JointDist,
    pub pyz: JointDist,
    /// `max |P~_XZ - P~_XY P~_YZ|`, present when all three marginals are
    /// strictly positive.
    pub factorization_residual: Option<f64>,
}

/// P_XZ = P_XY K_{Z|Y}, together with the residual of the tilde
/// factorization identity.
pub fn compose(chain: &ChainSpec) -> Result<Composition> {
    if chain.kzy.from() != chain.pxy.cols() {
        return Err(Error::AlphabetMismatch(
            "kernel input alphabet differs from the Y alphabet of the joint".into(),
        ));
    }
    let pxz_m = chain.pxy.mass().matmul(chain.kzy.matrix());
    let pxz = JointDist::new(pxz_m, chain.pxy.rows().clone(), chain.kzy.to().clone())?;
    let py = chain.pxy.marginals().1;
    let pyz = JointDist::from_marginal_and_kernel(&py, &chain.kzy)?;
    let residual = match (
        spectral::tilde(&chain.pxy),
        spectral::tilde(&pyz),
        spectral::tilde(&pxz),
    ) {
        (Ok(a), Ok(b), Ok(c)) => Some(c.matrix().sub(&a.matrix().matmul(b.matrix())).max_abs()),
        _ => None,
    };
    Ok(Composition {
        pxz,
        pyz,
        factorization_residual: residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpiReport {
    pub sigma_xy: CorrelationSpectrum,
    pub sigma_yz: CorrelationSpectrum,
    pub sigma_xz: CorrelationSpectrum,
    /// `lambda_i(XY) * lambda_2(YZ) - lambda_i(XZ)` for i = 2, 3, ...
    pub slack: Vec<f64>,
    pub factorization_residual: Option<f64>,
    pub holds: bool,
}

pub fn check_dpi(chain: &ChainSpec) -> Result<DpiReport> {
    check_dpi_tol(chain, DPI_TOL)
}

/// Checks `lambda_i(P~_XZ) <= lambda_i(P~_XY) lambda_2(P~_YZ)` for every
/// `i = 2 .. min(|X|, |Z|)`. Symbols of X or Z without mass are dropped;
/// Y must have a strictly positive marginal.
pub fn check_dpi_tol(chain: &ChainSpec, tol: f64) -> Result<DpiReport> {
    if let Some((i, _)) = chain
        .pxy
        .py()
        .iter()
        .enumerate()
        .find(|(_, &p)| p <= POSITIVE_EPS)
    {
        return Err(Error::ZeroMarginal {
            side: "col",
            index: i,
        });
    }
    let comp = compose(chain)?;
    let sxy = support_spectrum(chain.pxy.mass())?;
    let syz = support_spectrum(comp.pyz.mass())?;
    let sxz = support_spectrum(comp.pxz.mass())?;
    let l2yz = syz.lambda2();
    let top = chain.pxy.shape().0.min(comp.pxz.shape().1);
    let slack: Vec<f64> = (2..=top)
        .map(|i| sxy.lambda(i) * l2yz - sxz.lambda(i))
        .collect();
    let holds = slack.iter().all(|&s| s >= -tol);
    Ok(DpiReport {
        sigma_xy: sxy,
        sigma_yz: syz,
        sigma_xz: sxz,
        slack,
        factorization_residual: comp.factorization_residual,
        holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintVerdict {
    pub id: String,
    /// Largest singular value with index >= 2 (zero when the slice has a
    /// single row or column of support).
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub set: String,
    pub constraints: Vec<ConstraintVerdict>,
    /// Conditioning events with probability below 1e-12.
    pub skipped: Vec<String>,
    /// Index into `constraints` of the largest `measured - bound`.
    pub worst: Option<usize>,
    pub pass: bool,
}

impl MembershipReport {
    pub fn new(set: impl Into<String>) -> Self {
        Self {
            set: set.into(),
            constraints: Vec::new(),
            skipped: Vec::new(),
            worst: None,
            pass: true,
        }
    }

    pub fn push(&mut self, c: ConstraintVerdict) {
        let excess = c.measured - c.bound;
        let replace = match self.worst {
            None => true,
            Some(w) => {
                let cur = &self.constraints[w];
                excess > cur.measured - cur.bound
            }
        };
        if replace {
            self.worst = Some(self.constraints.len());
        }
        self.pass &= c.pass;
        self.constraints.push(c);
    }

    /// Conjunction of two reports.
    pub fn merge(&mut self, other: MembershipReport) {
        for c in other.constraints {
            self.push(c);
        }
        self.skipped.extend(other.skipped);
        self.pass &= other.pass;
    }

    pub fn worst_constraint(&self) -> Option<&ConstraintVerdict> {
        self.worst.map(|w| &self.constraints[w])
    }
}

fn check_lambda2(lambda2_uv: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda2_uv) {
        return Err(Error::InvalidArgument(format!(
            "lambda2 of the source must lie in [0, 1], got {lambda2_uv}"
        )));
    }
    Ok(())
}

pub fn necc_check(p_x1x2: &JointDist, lambda2_uv: f64) -> Result<MembershipReport> {
    necc_check_tol(p_x1x2, lambda2_uv, DPI_TOL)
}

/// Unconditional necessary condition: every `lambda_i(P~_X1X2)` with
/// `i >= 2` is at most `lambda2_uv`.
pub fn necc_check_tol(p_x1x2: &JointDist, lambda2_uv: f64, tol: f64) -> Result<MembershipReport> {
    check_lambda2(lambda2_uv)?;
    let s = support_spectrum(p_x1x2.mass())?;
    let mut r = MembershipReport::new("S[]");
    r.push(verdict("x1x2".into(), &s, lambda2_uv, tol));
    Ok(r)
}

fn verdict(id: String, s: &CorrelationSpectrum, bound: f64, tol: f64) -> ConstraintVerdict {
    let measured = s.max();
    ConstraintVerdict {
        id,
        measured,
        bound,
        pass: measured <= bound + tol,
    }
}

pub fn conditional_necc_check(
    f: &FactoredDist,
    lambda2_uv: f64,
    subset_u: &[&str],
    subset_v: &[&str],
) -> Result<MembershipReport> {
    conditional_necc_check_tol(f, lambda2_uv, subset_u, subset_v, DPI_TOL)
}

/// For every positive-probability assignment of the conditioning axes,
/// checks `lambda_i(P~_{X1X2 | assignment}) <= lambda2_uv`, `i >= 2`.
pub fn conditional_necc_check_tol(
    f: &FactoredDist,
    lambda2_uv: f64,
    subset_u: &[&str],
    subset_v: &[&str],
    tol: f64,
) -> Result<MembershipReport> {
    check_lambda2(lambda2_uv)?;
    f.axis_index("x1")?;
    f.axis_index("x2")?;
    let cond: Vec<&str> = subset_u.iter().chain(subset_v).copied().collect();
    for c in &cond {
        if *c == "x1" || *c == "x2" {
            return Err(Error::InvalidArgument("cannot condition on x1 or x2".into()));
        }
    }
    let mut keep = cond.clone();
    keep.push("x1");
    keep.push("x2");
    let m = f.marginalize(&keep)?;
    let (mass, _, _) = m.grouped_matrix(&cond, &["x1", "x2"])?;
    let sizes: Vec<usize> = cond
        .iter()
        .map(|c| m.axis(c).map(|a| a.alphabet.len()))
        .collect::<Result<_>>()?;
    let n1 = m.axis("x1")?.alphabet.len();
    let n2 = m.axis("x2")?.alphabet.len();
    let mut report = MembershipReport::new(format!("S[{}]", cond.join(",")));
    let mut idx = vec![0usize; cond.len()];
    for row in 0..mass.nrows() {
        let label = if cond.is_empty() {
            "x1x2".to_string()
        } else {
            let parts: Vec<String> = cond
                .iter()
                .zip(&idx)
                .map(|(c, v)| format!("{c}={v}"))
                .collect();
            format!("x1x2|{}", parts.join(","))
        };
        let slice = mass.row(row);
        let prob: f64 = slice.iter().sum();
        if prob < POSITIVE_EPS {
            report.skipped.push(label);
        } else {
            let mm = crate::linalg::Matrix::from_vec(n1, n2, slice.to_vec())?;
            let s = support_spectrum(&mm)?;
            report.push(verdict(label, &s, lambda2_uv, tol));
        }
        crate::prob::factored_increment(&mut idx, &sizes);
    }
    Ok(report)
}

/// Names of the source-letter axes: `u`, `u1`, `u2`, ... and likewise `v`.
pub fn source_axes(f: &FactoredDist) -> (Vec<String>, Vec<String>) {
    let is = |name: &str, p: char| {
        let mut ch = name.chars();
        ch.next() == Some(p) && ch.all(|c| c.is_ascii_digit())
    };
    let us = f
        .axis_names()
        .into_iter()
        .filter(|n| is(n, 'u'))
        .map(String::from)
        .collect();
    let vs = f
        .axis_names()
        .into_iter()
        .filter(|n| is(n, 'v'))
        .map(String::from)
        .collect();
    (us, vs)
}

pub fn intersection_membership(f: &FactoredDist, lambda2_uv: f64) -> Result<MembershipReport> {
    intersection_membership_with(f, lambda2_uv, DEFAULT_SUBSET_CAP, DPI_TOL)
}

/// Runs [`conditional_necc_check`] over every pair of subsets (U', V') of the
/// source axes, empty sets included, and reports the conjunction.
pub fn intersection_membership_with(
    f: &FactoredDist,
    lambda2_uv: f64,
    cap: usize,
    tol: f64,
) -> Result<MembershipReport> {
    let (us, vs) = source_axes(f);
    let k = us.len() + vs.len();
    let count: u128 = 1u128 << k.min(127);
    if count > cap as u128 {
        return Err(Error::SubsetExplosion { count, cap });
    }
    let mut report = MembershipReport::new("S'");
    for vm in 0..(1usize << vs.len()) {
        for um in 0..(1usize << us.len()) {
            let su: Vec<&str> = (0..us.len())
                .filter(|b| um >> b & 1 == 1)
                .map(|b| us[b].as_str())
                .collect();
            let sv: Vec<&str> = (0..vs.len())
                .filter(|b| vm >> b & 1 == 1)
                .map(|b| vs[b].as_str())
                .collect();
            report.merge(conditional_necc_check_tol(f, lambda2_uv, &su, &sv, tol)?);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{Alphabet, Kernel};

    /// p(u, v) p(x1 | u) p(x2 | v) over single letters.
    fn single_letter(puv: &JointDist, k1: &Kernel, k2: &Kernel) -> FactoredDist {
        let a = |n: usize| Alphabet::range(n);
        FactoredDist::from_fn(
            vec![
                ("u1".into(), a(puv.shape().0)),
                ("v1".into(), a(puv.shape().1)),
                ("x1".into(), a(k1.to().len())),
                ("x2".into(), a(k2.to().len())),
            ],
            |i| puv.mass()[(i[0], i[1])] * k1.row(i[0])[i[2]] * k2.row(i[1])[i[3]],
        )
        .unwrap()
    }

    #[test]
    fn compose_examples() {
        let id = JointDist::from_rows(&[[0.5, 0.0], [0.0, 0.5]]).unwrap();
        let c = compose(&ChainSpec::new(id, Kernel::bsc(0.25)).unwrap()).unwrap();
        assert!(c.pxz.mass().sub(JointDist::dsbs(0.25).mass()).max_abs() < 1e-15);

        let p = JointDist::from_rows(&[[0.1, 0.3], [0.4, 0.2]]).unwrap();
        let q = crate::prob::Marginal::from_probs(&[0.3, 0.7]).unwrap();
        let k = Kernel::constant(p.cols(), &q);
        let c = compose(&ChainSpec::new(p.clone(), k).unwrap()).unwrap();
        let want = JointDist::independent(&p.marginals().0, &q);
        assert!(c.pxz.mass().sub(want.mass()).max_abs() < 1e-15);

        let c = compose(&ChainSpec::new(JointDist::dsbs(0.25), Kernel::bsc(0.1)).unwrap()).unwrap();
        assert!((spectral::lambda2(&c.pxz).unwrap() - 0.4).abs() < 1e-14);
        assert!(c.factorization_residual.unwrap() < 1e-15);
    }

    #[test]
    fn alphabet_mismatch() {
        let k = Kernel::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
        assert!(matches!(
            ChainSpec::new(JointDist::dsbs(0.25), k),
            Err(Error::AlphabetMismatch(_))
        ));
    }

    #[test]
    fn symmetric_cascade_is_tight() {
        let r = check_dpi(&ChainSpec::new(JointDist::dsbs(0.25), Kernel::bsc(0.1)).unwrap()).unwrap();
        assert!(r.holds);
        assert_eq!(r.slack.len(), 1);
        assert!(r.slack[0].abs() < 1e-14);
    }

    #[test]
    fn necc_examples() {
        let ind = JointDist::from_rows(&[[0.25, 0.25], [0.25, 0.25]]).unwrap();
        assert!(necc_check(&ind, 0.0).unwrap().pass);
        let id = JointDist::from_rows(&[[0.5, 0.0], [0.0, 0.5]]).unwrap();
        let r = necc_check(&id, 0.5).unwrap();
        assert!(!r.pass);
        assert!((r.worst_constraint().unwrap().measured - 1.0).abs() < 1e-12);
        let c = compose(&ChainSpec::new(JointDist::dsbs(0.25), Kernel::bsc(0.1)).unwrap()).unwrap();
        assert!(necc_check(&c.pxz, 0.5).unwrap().pass);
        assert!(necc_check(&ind, 1.5).is_err());
    }

    #[test]
    fn conditional_examples() {
        let f = single_letter(&JointDist::dsbs(0.25), &Kernel::bsc(0.1), &Kernel::bsc(0.1));
        let full = conditional_necc_check(&f, 0.5, &[], &[]).unwrap();
        assert!(full.pass);
        assert!((full.constraints[0].measured - 0.32).abs() < 1e-14);
        let r = conditional_necc_check(&f, 0.5, &["u1"], &["v1"]).unwrap();
        assert!(r.pass);
        assert_eq!(r.constraints.len(), 4);
        assert!(r.constraints.iter().all(|c| c.measured < 1e-12));
        let all = intersection_membership(&f, 0.5).unwrap();
        assert!(all.pass);
        assert_eq!(all.constraints.len(), 1 + 2 + 2 + 4);
    }

    #[test]
    fn copy_violates_unconditioned() {
        let copy = Kernel::identity(&Alphabet::range(2));
        let f = single_letter(&JointDist::dsbs(0.25), &copy, &copy);
        // x2 copies u1 instead of v1
        let g = FactoredDist::from_fn(
            vec![
                ("u1".into(), Alphabet::range(2)),
                ("v1".into(), Alphabet::range(2)),
                ("x1".into(), Alphabet::range(2)),
                ("x2".into(), Alphabet::range(2)),
            ],
            |i| {
                JointDist::dsbs(0.25).mass()[(i[0], i[1])]
                    * f64::from(u8::from(i[2] == i[0] && i[3] == i[0]))
            },
        )
        .unwrap();
        let r = conditional_necc_check(&g, 0.5, &[], &[]).unwrap();
        assert!(!r.pass);
        assert!(intersection_membership(&f, 0.5).unwrap().pass);
    }

    #[test]
    fn zero_events_are_skipped() {
        let puv = JointDist::from_rows(&[[0.5, 0.0], [0.0, 0.5]]).unwrap();
        let f = single_letter(&puv, &Kernel::bsc(0.1), &Kernel::bsc(0.2));
        let r = conditional_necc_check(&f, 1.0, &["u1"], &["v1"]).unwrap();
        assert_eq!(r.skipped.len(), 2);
        assert_eq!(r.constraints.len(), 2);
    }

    #[test]
    fn subset_cap() {
        let f = single_letter(&JointDist::dsbs(0.25), &Kernel::bsc(0.1), &Kernel::bsc(0.1));
        assert_eq!(
            intersection_membership_with(&f, 0.5, 2, DPI_TOL),
            Err(Error::SubsetExplosion { count: 4, cap: 2 })
        );
    }
}
