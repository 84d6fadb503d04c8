//! Finite discrete distributions: alphabets, two-variable joints, kernels and
//! named multi-axis tensors.

mod factored;
mod info;
pub mod sample;

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use factored::{Axis, FactoredDist};
pub(crate) use factored::increment as factored_increment;
pub use info::{binary_entropy, entropy_bits};

/// Tolerance used when validating that masses or kernel rows sum to one.
pub const VALIDATION_TOL: f64 = 1e-9;
/// Marginal entries at or below this value count as zero for spectral use.
pub const POSITIVE_EPS: f64 = 1e-12;
/// Default cap on the number of cells of a Kronecker product.
pub const DEFAULT_KRON_CAP: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self { labels })
    }

    /// Labels `"0"`, `"1"`, ... `"n-1"`.
    pub fn range(n: usize) -> Self {
        assert!(n > 0, "alphabet size must be positive");
        Self {
            labels: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    /// Labels `prefix0`, `prefix1`, ...
    pub fn prefixed(prefix: &str, n: usize) -> Self {
        assert!(n > 0, "alphabet size must be positive");
        Self {
            labels: (0..n).map(|i| format!("{prefix}{i}")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Product alphabet in row-major order, labels joined with `.`.
    pub fn product(&self, other: &Alphabet) -> Alphabet {
        let mut labels = Vec::with_capacity(self.len() * other.len());
        for a in &self.labels {
            for b in &other.labels {
                labels.push(format!("{a}.{b}"));
            }
        }
        // joined labels may collide only if a label contains '.', which the
        // uniqueness check below catches
        Alphabet::new(labels).unwrap_or_else(|_| Alphabet::range(self.len() * other.len()))
    }

    pub fn select(&self, idx: &[usize]) -> Alphabet {
        Alphabet {
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }
}

impl TryFrom<Vec<String>> for Alphabet {
    type Error = Error;

    fn try_from(v: Vec<String>) -> Result<Self> {
        Alphabet::new(v)
    }
}

impl From<Alphabet> for Vec<String> {
    fn from(a: Alphabet) -> Self {
        a.labels
    }
}

/// Compares names so that embedded digit runs sort numerically
/// (`u2` before `u10`).
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let mut ai = a.char_indices().peekable();
    let mut bi = b.char_indices().peekable();
    loop {
        match (ai.peek().copied(), bi.peek().copied()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some((_, ca)), Some((_, cb))) => {
                if ca.is_ascii_digit() && cb.is_ascii_digit() {
                    let na = take_digits(&mut ai);
                    let nb = take_digits(&mut bi);
                    let ta = na.trim_start_matches('0');
                    let tb = nb.trim_start_matches('0');
                    let ord = ta.len().cmp(&tb.len()).then_with(|| ta.cmp(tb));
                    if ord != Ordering::Equal {
                        return ord;
                    }
                    let ord = na.len().cmp(&nb.len());
                    if ord != Ordering::Equal {
                        return ord;
                    }
                } else {
                    let ord = ca.cmp(&cb);
                    if ord != Ordering::Equal {
                        return ord;
                    }
                    ai.next();
                    bi.next();
                }
            }
        }
    }
}

fn take_digits(it: &mut std::iter::Peekable<std::str::CharIndices<'_>>) -> String {
    let mut s = String::new();
    while let Some(&(_, c)) = it.peek() {
        if !c.is_ascii_digit() {
            break;
        }
        s.push(c);
        it.next();
    }
    s
}

fn check_probability_vector(p: &[f64]) -> Result<()> {
    for (i, &x) in p.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::InvalidArgument(format!("entry {i} is not finite")));
        }
        if x < 0.0 {
            return Err(Error::NegativeEntry {
                row: i,
                col: 0,
                value: x,
            });
        }
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > VALIDATION_TOL {
        return Err(Error::SumNotOne { sum });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    alphabet: Alphabet,
    p: Vec<f64>,
}

impl Marginal {
    pub fn new(alphabet: Alphabet, p: Vec<f64>) -> Result<Self> {
        if alphabet.len() != p.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for an alphabet of {}",
                p.len(),
                alphabet.len()
            )));
        }
        check_probability_vector(&p)?;
        Ok(Self { alphabet, p })
    }

    /// Marginal over `Alphabet::range(p.len())`.
    pub fn from_probs(p: &[f64]) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        Self::new(Alphabet::range(p.len()), p.to_vec())
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            alphabet: Alphabet::range(n),
            p: vec![1.0 / n as f64; n],
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Elementwise square root, the leading singular vector of a tilde matrix.
    pub fn sqrt(&self) -> Vec<f64> {
        self.p.iter().map(|x| x.sqrt()).collect()
    }

    pub fn max(&self) -> f64 {
        self.p.iter().cloned().fold(0.0, f64::max)
    }

    pub fn is_positive(&self) -> bool {
        self.p.iter().all(|&x| x > POSITIVE_EPS)
    }

    pub fn entropy(&self) -> f64 {
        entropy_bits(&self.p)
    }

    pub fn kron(&self, other: &Marginal) -> Marginal {
        let mut p = Vec::with_capacity(self.len() * other.len());
        for a in &self.p {
            for b in &other.p {
                p.push(a * b);
            }
        }
        Marginal {
            alphabet: self.alphabet.product(&other.alphabet),
            p,
        }
    }
}

/// Which variable a conditional distribution is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Given {
    /// Rows p(y | x).
    Row,
    /// Rows p(x | y).
    Col,
}

/// Joint distribution of a pair (X, Y) stored as an |X| x |Y| matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    rows: Alphabet,
    cols: Alphabet,
    mass: Matrix,
}

impl JointDist {
    /// Validates a mass matrix against its alphabets.
    pub fn new(mass: Matrix, rows: Alphabet, cols: Alphabet) -> Result<Self> {
        if mass.nrows() != rows.len() || mass.ncols() != cols.len() {
            return Err(Error::DimensionMismatch(format!(
                "mass is {}x{} but alphabets are {}x{}",
                mass.nrows(),
                mass.ncols(),
                rows.len(),
                cols.len()
            )));
        }
        for i in 0..mass.nrows() {
            for (j, &x) in mass.row(i).iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i}, {j}) is not finite"
                    )));
                }
                if x < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: i,
                        col: j,
                        value: x,
                    });
                }
            }
        }
        let sum = mass.sum();
        if (sum - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::SumNotOne { sum });
        }
        Ok(Self { rows, cols, mass })
    }

    /// Joint over `Alphabet::range` labels on both sides.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let mass = Matrix::from_rows(rows)?;
        if mass.nrows() == 0 || mass.ncols() == 0 {
            return Err(Error::EmptyAlphabet);
        }
        let (r, c) = mass.shape();
        Self::new(mass, Alphabet::range(r), Alphabet::range(c))
    }

    /// Builds p(x) k(y|x).
    pub fn from_marginal_and_kernel(px: &Marginal, k: &Kernel) -> Result<Self> {
        if px.alphabet() != k.from() {
            return Err(Error::AlphabetMismatch(
                "marginal alphabet differs from kernel input alphabet".into(),
            ));
        }
        let mass = k.matrix().scale_rows_cols(px.probs(), &vec![1.0; k.to().len()]);
        Self::new(mass, k.from().clone(), k.to().clone())
    }

    /// Product distribution p(x) q(y).
    pub fn independent(px: &Marginal, py: &Marginal) -> Self {
        let mass = Matrix::from_fn(px.len(), py.len(), |i, j| px.probs()[i] * py.probs()[j]);
        Self {
            rows: px.alphabet().clone(),
            cols: py.alphabet().clone(),
            mass,
        }
    }

    /// Doubly symmetric binary source with crossover `eps`.
    pub fn dsbs(eps: f64) -> Self {
        let d = (1.0 - eps) / 2.0;
        let o = eps / 2.0;
        Self::from_rows(&[[d, o], [o, d]]).expect("valid symmetric binary source")
    }

    pub fn rows(&self) -> &Alphabet {
        &self.rows
    }

    pub fn cols(&self) -> &Alphabet {
        &self.cols
    }

    pub fn mass(&self) -> &Matrix {
        &self.mass
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mass.shape()
    }

    pub fn px(&self) -> Vec<f64> {
        self.mass.row_sums()
    }

    pub fn py(&self) -> Vec<f64> {
        self.mass.col_sums()
    }

    /// Row and column marginals.
    pub fn marginals(&self) -> (Marginal, Marginal) {
        (
            Marginal {
                alphabet: self.rows.clone(),
                p: self.px(),
            },
            Marginal {
                alphabet: self.cols.clone(),
                p: self.py(),
            },
        )
    }

    /// Symbols whose marginal mass is at most [`POSITIVE_EPS`].
    pub fn zero_marginals(&self) -> Vec<(&'static str, usize)> {
        let mut out = Vec::new();
        for (i, p) in self.px().into_iter().enumerate() {
            if p <= POSITIVE_EPS {
                out.push(("row", i));
            }
        }
        for (j, p) in self.py().into_iter().enumerate() {
            if p <= POSITIVE_EPS {
                out.push(("col", j));
            }
        }
        out
    }

    pub fn first_zero_marginal(&self) -> Option<Error> {
        self.zero_marginals()
            .first()
            .map(|&(side, index)| Error::ZeroMarginal { side, index })
    }

    pub fn transpose(&self) -> JointDist {
        JointDist {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            mass: self.mass.transpose(),
        }
    }

    /// Conditional kernel: `Given::Row` yields p(y|x), `Given::Col` yields p(x|y).
    pub fn conditional(&self, given: Given) -> Result<Kernel> {
        let j = match given {
            Given::Row => self.clone(),
            Given::Col => self.transpose(),
        };
        let px = j.px();
        for (i, &p) in px.iter().enumerate() {
            if p <= POSITIVE_EPS {
                let side = if given == Given::Row { "row" } else { "col" };
                return Err(Error::ZeroMarginal { side, index: i });
            }
        }
        let inv: Vec<f64> = px.iter().map(|p| 1.0 / p).collect();
        let rows = j.mass.scale_rows_cols(&inv, &vec![1.0; j.cols.len()]);
        Ok(Kernel {
            from: j.rows,
            to: j.cols,
            rows,
        })
    }

    /// Kronecker (i.i.d. pair) product with the default cell cap.
    pub fn kron(&self, other: &JointDist) -> Result<JointDist> {
        self.kron_with_cap(other, DEFAULT_KRON_CAP)
    }

    /// Joint of ((X, X'), (Y, Y')) with mass(ij, kl) = self(i,k) other(j,l).
    pub fn kron_with_cap(&self, other: &JointDist, cap: usize) -> Result<JointDist> {
        let cells = (self.mass.nrows() as u128)
            * (other.mass.nrows() as u128)
            * (self.mass.ncols() as u128)
            * (other.mass.ncols() as u128);
        if cells > cap as u128 {
            return Err(Error::SizeOverflow { cells, cap });
        }
        Ok(JointDist {
            rows: self.rows.product(&other.rows),
            cols: self.cols.product(&other.cols),
            mass: self.mass.kron(&other.mass),
        })
    }

    /// n-fold Kronecker power.
    pub fn kron_power(&self, n: usize) -> Result<JointDist> {
        assert!(n >= 1, "power must be at least 1");
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.kron(self)?;
        }
        Ok(acc)
    }

    /// Drops rows and columns with zero marginal mass; also returns the kept
    /// row and column indices.
    pub fn restrict_to_support(&self) -> (JointDist, Vec<usize>, Vec<usize>) {
        let rk: Vec<usize> = self
            .px()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > POSITIVE_EPS)
            .map(|(i, _)| i)
            .collect();
        let ck: Vec<usize> = self
            .py()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > POSITIVE_EPS)
            .map(|(i, _)| i)
            .collect();
        let mut mass = self.mass.select(&rk, &ck);
        // renormalize away the dropped crumbs below POSITIVE_EPS
        let s = mass.sum();
        if s > 0.0 {
            mass = mass.scale(1.0 / s);
        }
        (
            JointDist {
                rows: self.rows.select(&rk),
                cols: self.cols.select(&ck),
                mass,
            },
            rk,
            ck,
        )
    }

    /// Lifts the joint to a two-axis [`FactoredDist`].
    pub fn to_factored(&self, row_axis: &str, col_axis: &str) -> Result<FactoredDist> {
        FactoredDist::new(
            vec![
                (row_axis.to_string(), self.rows.clone()),
                (col_axis.to_string(), self.cols.clone()),
            ],
            self.mass.data().to_vec(),
        )
    }

    pub fn mutual_information(&self) -> f64 {
        let hx = entropy_bits(&self.px());
        let hy = entropy_bits(&self.py());
        hx + hy - entropy_bits(self.mass.data())
    }
}

/// Row-stochastic transition matrix from one alphabet to another.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    from: Alphabet,
    to: Alphabet,
    rows: Matrix,
}

impl Kernel {
    pub fn new(from: Alphabet, to: Alphabet, rows: Matrix) -> Result<Self> {
        if rows.nrows() != from.len() || rows.ncols() != to.len() {
            return Err(Error::DimensionMismatch(format!(
                "kernel matrix is {}x{} but alphabets are {}x{}",
                rows.nrows(),
                rows.ncols(),
                from.len(),
                to.len()
            )));
        }
        for i in 0..rows.nrows() {
            let r = rows.row(i);
            for (j, &x) in r.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "kernel entry ({i}, {j}) is not finite"
                    )));
                }
                if x < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: i,
                        col: j,
                        value: x,
                    });
                }
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > VALIDATION_TOL {
                return Err(Error::NotStochastic { row: i, sum });
            }
        }
        Ok(Self { from, to, rows })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = Matrix::from_rows(rows)?;
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::EmptyAlphabet);
        }
        let (r, c) = m.shape();
        Self::new(Alphabet::range(r), Alphabet::range(c), m)
    }

    pub fn identity(alphabet: &Alphabet) -> Self {
        Self {
            from: alphabet.clone(),
            to: alphabet.clone(),
            rows: Matrix::identity(alphabet.len()),
        }
    }

    /// Binary symmetric channel with crossover `eps`.
    pub fn bsc(eps: f64) -> Self {
        Self::from_rows(&[[1.0 - eps, eps], [eps, 1.0 - eps]]).expect("valid crossover")
    }

    /// Every row equal to `p`: the output is independent of the input.
    pub fn constant(from: &Alphabet, p: &Marginal) -> Self {
        Self {
            from: from.clone(),
            to: p.alphabet().clone(),
            rows: Matrix::from_fn(from.len(), p.len(), |_, j| p.probs()[j]),
        }
    }

    /// Deterministic map `x -> f[x]`.
    pub fn deterministic(from: &Alphabet, to: &Alphabet, f: &[usize]) -> Result<Self> {
        if f.len() != from.len() || f.iter().any(|&y| y >= to.len()) {
            return Err(Error::DimensionMismatch("map out of range".into()));
        }
        Ok(Self {
            from: from.clone(),
            to: to.clone(),
            rows: Matrix::from_fn(from.len(), to.len(), |i, j| if f[i] == j { 1.0 } else { 0.0 }),
        })
    }

    pub fn from(&self) -> &Alphabet {
        &self.from
    }

    pub fn to(&self) -> &Alphabet {
        &self.to
    }

    pub fn matrix(&self) -> &Matrix {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.rows.row(i)
    }

    /// Cascade `self` then `next`.
    pub fn then(&self, next: &Kernel) -> Result<Kernel> {
        if self.to != next.from {
            return Err(Error::AlphabetMismatch(
                "output alphabet of the first kernel differs from the input of the second".into(),
            ));
        }
        Ok(Kernel {
            from: self.from.clone(),
            to: next.to.clone(),
            rows: self.rows.matmul(&next.rows),
        })
    }

    /// Largest deviation of a row sum from one.
    pub fn stochasticity_residual(&self) -> f64 {
        self.rows
            .row_sums()
            .iter()
            .fold(0.0, |m, s| f64::max(m, (s - 1.0).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn natural_order() {
        let mut v = vec!["u10", "x1", "u2", "q", "v1", "u1", "x2", "y"];
        v.sort_by(|a, b| natural_cmp(a, b));
        assert_eq!(v, ["q", "u1", "u2", "u10", "v1", "x1", "x2", "y"]);
    }

    #[test]
    fn alphabet_rejects_duplicates() {
        assert_eq!(
            Alphabet::new(["a", "a"]),
            Err(Error::DuplicateLabel("a".into()))
        );
        assert_eq!(Alphabet::new(Vec::<String>::new()), Err(Error::EmptyAlphabet));
    }

    #[test]
    fn validate_examples() {
        let j = JointDist::from_rows(&[[0.25, 0.25], [0.25, 0.25]]).unwrap();
        let (px, py) = j.marginals();
        assert_eq!(px.probs(), &[0.5, 0.5]);
        assert_eq!(py.probs(), &[0.5, 0.5]);
        assert!(matches!(
            JointDist::from_rows(&[[0.5, 0.6], [-0.1, 0.0]]),
            Err(Error::NegativeEntry { row: 1, col: 0, .. })
        ));
        assert!(matches!(
            JointDist::from_rows(&[[0.5, 0.6], [0.1, 0.0]]),
            Err(Error::SumNotOne { .. })
        ));
        assert!(JointDist::from_rows(&[[0.375, 0.125], [0.125, 0.375]]).is_ok());
    }

    #[test]
    fn zero_marginal_is_flagged_not_fatal() {
        let j = JointDist::from_rows(&[[0.5, 0.5], [0.0, 0.0]]).unwrap();
        assert_eq!(j.zero_marginals(), vec![("row", 1)]);
        assert!(matches!(
            j.conditional(Given::Row),
            Err(Error::ZeroMarginal { side: "row", index: 1 })
        ));
        assert!(j.conditional(Given::Col).is_ok());
    }

    #[test]
    fn marginal_examples() {
        let j = JointDist::from_rows(&[[0.2, 0.0], [0.3, 0.5]]).unwrap();
        let (px, py) = j.marginals();
        assert!((px.probs()[0] - 0.2).abs() < 1e-15 && (px.probs()[1] - 0.8).abs() < 1e-15);
        assert!((py.probs()[0] - 0.5).abs() < 1e-15 && (py.probs()[1] - 0.5).abs() < 1e-15);
        let s = JointDist::from_rows(&[[1.0]]).unwrap();
        assert_eq!(s.marginals().0.probs(), &[1.0]);
    }

    #[test]
    fn conditional_examples() {
        let k = JointDist::dsbs(0.25).conditional(Given::Row).unwrap();
        assert_eq!(k.matrix().to_rows(), vec![vec![0.75, 0.25], vec![0.25, 0.75]]);
        let id = JointDist::from_rows(&[[0.5, 0.0], [0.0, 0.5]])
            .unwrap()
            .conditional(Given::Row)
            .unwrap();
        assert_eq!(id.matrix(), &Matrix::identity(2));
    }

    #[test]
    fn kron_examples() {
        let b = JointDist::dsbs(0.25);
        let k = b.kron(&b).unwrap();
        assert_eq!(k.shape(), (4, 4));
        assert!((k.mass()[(0, 0)] - 0.140625).abs() < 1e-15);
        let single = JointDist::from_rows(&[[1.0]]).unwrap();
        assert_eq!(b.kron(&single).unwrap().mass(), b.mass());
        let err = b.kron_with_cap(&b, 8).unwrap_err();
        assert_eq!(err, Error::SizeOverflow { cells: 16, cap: 8 });
    }

    #[test]
    fn kernel_cascade_stays_stochastic() {
        let k = Kernel::bsc(0.1).then(&Kernel::bsc(0.2)).unwrap();
        assert!(k.stochasticity_residual() < 1e-15);
        assert!((k.row(0)[1] - (0.1 * 0.8 + 0.9 * 0.2)).abs() < 1e-15);
        assert!(matches!(
            Kernel::from_rows(&[[0.5, 0.4]]),
            Err(Error::NotStochastic { row: 0, .. })
        ));
    }
}
