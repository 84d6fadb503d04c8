//! Bounds on the signed correlation of a binary pair (X1, X2) generated
//! from a correlated source through n-letter encoders.
//!
//! Marginals are parametrized as `p_X1 = (a², 1 - a²)` and
//! `p_X2 = (b², 1 - b²)`. The second singular vectors of a 2x2 tilde matrix
//! are then fixed up to sign as `(√(1-a²), -a)` and `(√(1-b²), -b)`, so the
//! second singular value carries a well-defined sign.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::prob::{Alphabet, JointDist};

/// Largest n accepted by [`extreme_point_max`].
pub const EXTREME_N_CAP: usize = 12;
/// Largest pair count enumerated by [`extreme_point_brute_force`].
pub const BRUTE_PAIR_CAP: u128 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryScenario {
    pub lambda2uv: f64,
    pub a: f64,
    pub b: f64,
}

impl BinaryScenario {
    pub fn new(lambda2uv: f64, a: f64, b: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda2uv) {
            return Err(Error::InvalidArgument(format!(
                "lambda2 {lambda2uv} must lie in [0, 1]"
            )));
        }
        check_param(a)?;
        check_param(b)?;
        Ok(BinaryScenario { lambda2uv, a, b })
    }

    /// Scenario from squared parameters `a²` and `b²`.
    pub fn from_squares(lambda2uv: f64, a2: f64, b2: f64) -> Result<Self> {
        check_param(a2)?;
        check_param(b2)?;
        Self::new(lambda2uv, a2.sqrt(), b2.sqrt())
    }
}

fn check_param(a: f64) -> Result<()> {
    if a.is_finite() && a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        Err(Error::DegenerateMarginal(a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiTriple {
    pub xi1: f64,
    pub xi2: f64,
    pub xi3: f64,
}

pub fn xi_values(a: f64, b: f64) -> Result<XiTriple> {
    check_param(a)?;
    check_param(b)?;
    let (a2, b2) = (a * a, b * b);
    let denom = a * b * ((1.0 - a2) * (1.0 - b2)).sqrt();
    Ok(XiTriple {
        xi1: a2.min(b2) * (1.0 - a2).min(1.0 - b2) / denom,
        xi2: (1.0 - a2).min(b2) * a2.min(1.0 - b2) / denom,
        xi3: a2.min(1.0 - a2) * b2.min(1.0 - b2) / denom,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    pub fn within(&self, outer: &Interval, tol: f64) -> bool {
        self.lo >= outer.lo - tol && self.hi <= outer.hi + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSet {
    /// Holds for every n.
    pub outer1: Interval,
    /// Tighter outer bound on the limit set as n grows large.
    pub outer2: Interval,
    /// Achievable by single-letter chains.
    pub inner: Interval,
}

impl BoundSet {
    pub fn nested(&self, tol: f64) -> bool {
        self.inner.within(&self.outer2, tol) && self.outer2.within(&self.outer1, tol)
    }
}

pub fn bounds(s: &BinaryScenario) -> Result<BoundSet> {
    let xi = xi_values(s.a, s.b)?;
    let l = s.lambda2uv;
    let set = BoundSet {
        outer1: Interval {
            lo: -xi.xi2.min(l),
            hi: xi.xi1.min(l),
        },
        outer2: Interval {
            lo: -xi.xi2.min(l * (1.0 + xi.xi2) / 2.0),
            hi: xi.xi1.min(l * (1.0 + xi.xi1) / 2.0),
        },
        inner: Interval {
            lo: -l * xi.xi3,
            hi: l * xi.xi3,
        },
    };
    debug_assert!(set.nested(1e-12), "{set:?}");
    Ok(set)
}

/// Second singular value of a 2x2 joint, signed by alignment with the fixed
/// vector pair.
pub fn signed_lambda(p: &JointDist) -> Result<f64> {
    let (r, c) = p.shape();
    if r != 2 || c != 2 {
        return Err(Error::NotBinary { rows: r, cols: c });
    }
    let px = p.px();
    let py = p.py();
    check_param(px[0])?;
    check_param(py[0])?;
    let (a, b) = (px[0].sqrt(), py[0].sqrt());
    let mu = [(1.0 - px[0]).sqrt(), -a];
    let nu = [(1.0 - py[0]).sqrt(), -b];
    let sx = [a, (1.0 - px[0]).sqrt()];
    let sy = [b, (1.0 - py[0]).sqrt()];
    let m = p.mass();
    let mut lambda = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            lambda += mu[i] * m[(i, j)] / (sx[i] * sy[j]) * nu[j];
        }
    }
    Ok(lambda)
}

/// The joint whose tilde matrix is `√p_X1 √p_X2ᵀ + λ μ νᵀ`.
pub fn parametrized_joint(a: f64, b: f64, lambda: f64) -> Result<JointDist> {
    check_param(a)?;
    check_param(b)?;
    let sx = [a, (1.0 - a * a).sqrt()];
    let sy = [b, (1.0 - b * b).sqrt()];
    let mu = [sx[1], -a];
    let nu = [sy[1], -b];
    let mass = Matrix::from_fn(2, 2, |i, j| {
        sx[i] * sy[j] * (sx[i] * sy[j] + lambda * mu[i] * nu[j])
    });
    JointDist::new(mass, Alphabet::range(2), Alphabet::range(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub a: f64,
    pub b: f64,
    pub bounds: BoundSet,
}

/// Bound curves on the grid `a² = i / (grid + 1)`, `i = 1..=grid`. The
/// default is the diagonal `a = b`; `full_grid` covers every (a, b) pair.
pub fn curve_data(lambda2uv: f64, grid: usize, full_grid: bool) -> Result<Vec<CurveRow>> {
    if grid < 2 {
        return Err(Error::InvalidArgument("grid resolution must be at least 2".into()));
    }
    let sq = |i: usize| i as f64 / (grid + 1) as f64;
    let mut rows = Vec::new();
    for i in 1..=grid {
        let js: Vec<usize> = if full_grid { (1..=grid).collect() } else { vec![i] };
        for j in js {
            let s = BinaryScenario::from_squares(lambda2uv, sq(i), sq(j))?;
            rows.push(CurveRow {
                a: s.a,
                b: s.b,
                bounds: bounds(&s)?,
            });
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "a,b,outer1_lo,outer1_hi,outer2_lo,outer2_hi,inner_lo,inner_hi";

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let b = &r.bounds;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.a, r.b, b.outer1.lo, b.outer1.hi, b.outer2.lo, b.outer2.hi, b.inner.lo, b.inner.hi
        );
    }
    out
}

fn integral_count(a: f64, n: usize) -> Result<u64> {
    check_param(a)?;
    let count = (1u64 << n) as f64 * a * a;
    let k = count.round();
    if (count - k).abs() > 1e-9 || k < 1.0 || k >= (1u64 << n) as f64 {
        return Err(Error::NonIntegralCount { param: a * a, count });
    }
    Ok(k as u64)
}

/// Closed form `min(a²,b²) min(1-a²,1-b²) / (ab √((1-a²)(1-b²)))`.
pub fn extreme_closed_form(a: f64, b: f64) -> Result<f64> {
    Ok(xi_values(a, b)?.xi1)
}

/// Maximum of `c̄ᵀd̄ - ab/√((1-a²)(1-b²))` over extreme-point pairs. An
/// extreme point of the feasible polytope has `2ⁿa²` entries equal to
/// `h_a = 2^{-n/2} / (a√(1-a²))` and zeros elsewhere, so the inner product
/// only depends on the overlap count of the two supports.
pub fn extreme_point_max(a: f64, b: f64, n: usize) -> Result<f64> {
    if n > EXTREME_N_CAP {
        return Err(Error::CapExceeded {
            requested: n as u128,
            cap: EXTREME_N_CAP as u128,
        });
    }
    let ka = integral_count(a, n)?;
    let kb = integral_count(b, n)?;
    let len = 1u64 << n;
    let (ha, hb) = (heights(a, n), heights(b, n));
    let lo = (ka + kb).saturating_sub(len);
    let hi = ka.min(kb);
    let best = (lo..=hi)
        .map(|t| t as f64 * ha * hb)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best - offset(a, b))
}

/// Same maximum by enumerating every pair of supports. Intended for small n.
pub fn extreme_point_brute_force(a: f64, b: f64, n: usize) -> Result<f64> {
    if n > EXTREME_N_CAP {
        return Err(Error::CapExceeded {
            requested: n as u128,
            cap: EXTREME_N_CAP as u128,
        });
    }
    let ka = integral_count(a, n)?;
    let kb = integral_count(b, n)?;
    let len = 1u32 << n;
    let supports = |k: u64| -> Vec<u64> {
        (0u64..(1u64 << len))
            .filter(|m| m.count_ones() as u64 == k)
            .collect()
    };
    if len > 20 {
        return Err(Error::CapExceeded {
            requested: 1u128 << len,
            cap: BRUTE_PAIR_CAP,
        });
    }
    let (sa, sb) = (supports(ka), supports(kb));
    let pairs = sa.len() as u128 * sb.len() as u128;
    if pairs > BRUTE_PAIR_CAP {
        return Err(Error::CapExceeded {
            requested: pairs,
            cap: BRUTE_PAIR_CAP,
        });
    }
    let (ha, hb) = (heights(a, n), heights(b, n));
    let mut best = f64::NEG_INFINITY;
    for &x in &sa {
        for &y in &sb {
            best = best.max((x & y).count_ones() as f64 * ha * hb);
        }
    }
    Ok(best - offset(a, b))
}

fn heights(a: f64, n: usize) -> f64 {
    2f64.powf(-(n as f64) / 2.0) / (a * (1.0 - a * a).sqrt())
}

fn offset(a: f64, b: f64) -> f64 {
    a * b / ((1.0 - a * a) * (1.0 - b * b)).sqrt()
}
