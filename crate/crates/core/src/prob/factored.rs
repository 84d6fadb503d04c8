use std::collections::HashSet;

use super::{check_probability_vector, entropy_bits, natural_cmp, Alphabet, JointDist, POSITIVE_EPS};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub alphabet: Alphabet,
}

/// Probability mass over a product of named alphabets.
///
/// Axes are kept in natural name order so that two tensors built from the
/// same variables always share a layout. Mass is row-major over that order.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredDist {
    axes: Vec<Axis>,
    mass: Vec<f64>,
}

impl FactoredDist {
    /// Builds a tensor from axes and row-major mass laid out in the given
    /// axis order; the result is re-laid out canonically.
    pub fn new(axes: Vec<(String, Alphabet)>, mass: Vec<f64>) -> Result<Self> {
        let d = Self::new_unchecked(axes, mass)?;
        check_probability_vector(&d.mass)?;
        Ok(d)
    }

    /// Same as [`FactoredDist::new`] but skips the nonnegativity and
    /// normalization checks (shape and names are still validated).
    pub(crate) fn new_unchecked(axes: Vec<(String, Alphabet)>, mass: Vec<f64>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (n, _) in &axes {
            if !seen.insert(n.clone()) {
                return Err(Error::DuplicateLabel(n.clone()));
            }
        }
        let cells: usize = axes.iter().map(|(_, a)| a.len()).product();
        if cells != mass.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} mass entries for {} cells",
                mass.len(),
                cells
            )));
        }
        let mut order: Vec<usize> = (0..axes.len()).collect();
        order.sort_by(|&i, &j| natural_cmp(&axes[i].0, &axes[j].0));
        let given: Vec<Axis> = axes
            .into_iter()
            .map(|(name, alphabet)| Axis { name, alphabet })
            .collect();
        if order.iter().enumerate().all(|(k, &i)| k == i) {
            return Ok(Self { axes: given, mass });
        }
        let shape: Vec<usize> = given.iter().map(|a| a.alphabet.len()).collect();
        let src_strides = strides(&shape);
        let new_axes: Vec<Axis> = order.iter().map(|&i| given[i].clone()).collect();
        let new_shape: Vec<usize> = order.iter().map(|&i| shape[i]).collect();
        let mut out = vec![0.0; mass.len()];
        let mut idx = vec![0usize; new_shape.len()];
        for slot in out.iter_mut() {
            let src: usize = idx
                .iter()
                .zip(&order)
                .map(|(&v, &ax)| v * src_strides[ax])
                .sum();
            *slot = mass[src];
            increment(&mut idx, &new_shape);
        }
        Ok(Self {
            axes: new_axes,
            mass: out,
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index, given in the
    /// axis order supplied by the caller.
    pub fn from_fn(axes: Vec<(String, Alphabet)>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let shape: Vec<usize> = axes.iter().map(|(_, a)| a.len()).collect();
        let cells: usize = shape.iter().product();
        let mut mass = Vec::with_capacity(cells);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..cells {
            mass.push(f(&idx));
            increment(&mut idx, &shape);
        }
        Self::new(axes, mass)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis_names(&self) -> Vec<&str> {
        self.axes.iter().map(|a| a.name.as_str()).collect()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.alphabet.len()).collect()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn has_axis(&self, name: &str) -> bool {
        self.axes.iter().any(|a| a.name == name)
    }

    pub fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAxis(name.to_string()))
    }

    pub fn axis(&self, name: &str) -> Result<&Axis> {
        Ok(&self.axes[self.axis_index(name)?])
    }

    /// Mass at a multi-index given in canonical axis order.
    pub fn get(&self, idx: &[usize]) -> f64 {
        let shape = self.shape();
        let st = strides(&shape);
        self.mass[idx.iter().zip(&st).map(|(i, s)| i * s).sum::<usize>()]
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Sums out every axis not listed in `keep`.
    pub fn marginalize(&self, keep: &[&str]) -> Result<FactoredDist> {
        let mut keep_idx = Vec::with_capacity(keep.len());
        for k in keep {
            let i = self.axis_index(k)?;
            if !keep_idx.contains(&i) {
                keep_idx.push(i);
            }
        }
        keep_idx.sort_unstable();
        let shape = self.shape();
        let new_shape: Vec<usize> = keep_idx.iter().map(|&i| shape[i]).collect();
        let new_strides = strides(&new_shape);
        let mut out = vec![0.0; new_shape.iter().product()];
        let mut idx = vec![0usize; shape.len()];
        for &m in &self.mass {
            let t: usize = keep_idx
                .iter()
                .zip(&new_strides)
                .map(|(&ax, &s)| idx[ax] * s)
                .sum();
            out[t] += m;
            increment(&mut idx, &shape);
        }
        Ok(FactoredDist {
            axes: keep_idx.iter().map(|&i| self.axes[i].clone()).collect(),
            mass: out,
        })
    }

    /// Probability of a partial assignment (axis name, symbol index).
    pub fn prob(&self, assignment: &[(&str, usize)]) -> Result<f64> {
        let names: Vec<&str> = assignment.iter().map(|(n, _)| *n).collect();
        let m = self.marginalize(&names)?;
        let mut idx = vec![0usize; m.axes.len()];
        for (n, v) in assignment {
            let i = m.axis_index(n)?;
            if *v >= m.axes[i].alphabet.len() {
                return Err(Error::InvalidArgument(format!(
                    "symbol index {v} out of range for axis {n}"
                )));
            }
            idx[i] = *v;
        }
        Ok(m.get(&idx))
    }

    /// Renormalized slice over the unassigned axes.
    pub fn condition(&self, assignment: &[(&str, usize)]) -> Result<FactoredDist> {
        let mut fixed: Vec<Option<usize>> = vec![None; self.axes.len()];
        for (n, v) in assignment {
            let i = self.axis_index(n)?;
            if *v >= self.axes[i].alphabet.len() {
                return Err(Error::InvalidArgument(format!(
                    "symbol index {v} out of range for axis {n}"
                )));
            }
            fixed[i] = Some(*v);
        }
        let shape = self.shape();
        let free: Vec<usize> = (0..shape.len()).filter(|&i| fixed[i].is_none()).collect();
        let new_shape: Vec<usize> = free.iter().map(|&i| shape[i]).collect();
        let mut out = Vec::with_capacity(new_shape.iter().product());
        let st = strides(&shape);
        let base: usize = fixed
            .iter()
            .zip(&st)
            .map(|(f, s)| f.unwrap_or(0) * s)
            .sum();
        let mut idx = vec![0usize; new_shape.len()];
        for _ in 0..new_shape.iter().product::<usize>() {
            let off: usize = idx.iter().zip(&free).map(|(&v, &ax)| v * st[ax]).sum();
            out.push(self.mass[base + off]);
            increment(&mut idx, &new_shape);
        }
        let prob: f64 = out.iter().sum();
        if prob < POSITIVE_EPS {
            return Err(Error::ZeroEvent { prob });
        }
        out.iter_mut().for_each(|x| *x /= prob);
        Ok(FactoredDist {
            axes: free.iter().map(|&i| self.axes[i].clone()).collect(),
            mass: out,
        })
    }

    /// Two-variable joint with rows indexed by `row_axes` and columns by
    /// `col_axes`, each group flattened row-major in the order given.
    pub fn joint(&self, row_axes: &[&str], col_axes: &[&str]) -> Result<JointDist> {
        let (mass, rows, cols) = self.grouped_matrix(row_axes, col_axes)?;
        JointDist::new(mass, rows, cols)
    }

    pub(crate) fn grouped_matrix(
        &self,
        row_axes: &[&str],
        col_axes: &[&str],
    ) -> Result<(Matrix, Alphabet, Alphabet)> {
        for r in row_axes {
            if col_axes.contains(r) {
                return Err(Error::InvalidArgument(format!(
                    "axis {r} used on both sides"
                )));
            }
        }
        let ri: Vec<usize> = row_axes
            .iter()
            .map(|n| self.axis_index(n))
            .collect::<Result<_>>()?;
        let ci: Vec<usize> = col_axes
            .iter()
            .map(|n| self.axis_index(n))
            .collect::<Result<_>>()?;
        let shape = self.shape();
        let rs: Vec<usize> = ri.iter().map(|&i| shape[i]).collect();
        let cs: Vec<usize> = ci.iter().map(|&i| shape[i]).collect();
        let (nr, nc) = (rs.iter().product::<usize>(), cs.iter().product::<usize>());
        let rst = strides(&rs);
        let cst = strides(&cs);
        let mut m = Matrix::zeros(nr, nc);
        let mut idx = vec![0usize; shape.len()];
        for &x in &self.mass {
            let r: usize = ri.iter().zip(&rst).map(|(&a, &s)| idx[a] * s).sum();
            let c: usize = ci.iter().zip(&cst).map(|(&a, &s)| idx[a] * s).sum();
            m[(r, c)] += x;
            increment(&mut idx, &shape);
        }
        let group_alpha = |ax: &[usize]| -> Alphabet {
            ax.iter()
                .map(|&i| self.axes[i].alphabet.clone())
                .reduce(|a, b| a.product(&b))
                .unwrap_or_else(|| Alphabet::range(1))
        };
        Ok((m, group_alpha(&ri), group_alpha(&ci)))
    }

    /// Joint entropy, in bits, of the listed axes.
    pub fn entropy(&self, axes: &[&str]) -> Result<f64> {
        if axes.is_empty() {
            return Ok(0.0);
        }
        Ok(entropy_bits(&self.marginalize(axes)?.mass))
    }

    /// Conditional entropy H(A | C) in bits.
    pub fn conditional_entropy(&self, a: &[&str], c: &[&str]) -> Result<f64> {
        let ac: Vec<&str> = a.iter().chain(c).copied().collect();
        Ok(self.entropy(&ac)? - self.entropy(c)?)
    }

    /// I(A; B | C) in bits. The groups must be disjoint.
    pub fn mutual_information(&self, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
        for x in a {
            if b.contains(x) || c.contains(x) {
                return Err(Error::InvalidArgument(format!("axis {x} appears in two groups")));
            }
        }
        for x in b {
            if c.contains(x) {
                return Err(Error::InvalidArgument(format!("axis {x} appears in two groups")));
            }
        }
        let ac: Vec<&str> = a.iter().chain(c).copied().collect();
        let bc: Vec<&str> = b.iter().chain(c).copied().collect();
        let abc: Vec<&str> = a.iter().chain(b).chain(c).copied().collect();
        Ok(self.entropy(&ac)? + self.entropy(&bc)? - self.entropy(&abc)? - self.entropy(c)?)
    }

    /// Product with an independent tensor over disjoint axes.
    pub fn product(&self, other: &FactoredDist) -> Result<FactoredDist> {
        let mut axes: Vec<(String, Alphabet)> = self
            .axes
            .iter()
            .map(|a| (a.name.clone(), a.alphabet.clone()))
            .collect();
        axes.extend(other.axes.iter().map(|a| (a.name.clone(), a.alphabet.clone())));
        let mut mass = Vec::with_capacity(self.mass.len() * other.mass.len());
        for a in &self.mass {
            for b in &other.mass {
                mass.push(a * b);
            }
        }
        Self::new_unchecked(axes, mass)
    }

    /// Renames an axis; the tensor is re-laid out if the order changes.
    pub fn rename(&self, from: &str, to: &str) -> Result<FactoredDist> {
        let i = self.axis_index(from)?;
        let axes: Vec<(String, Alphabet)> = self
            .axes
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let n = if k == i { to.to_string() } else { a.name.clone() };
                (n, a.alphabet.clone())
            })
            .collect();
        Self::new_unchecked(axes, self.mass.clone())
    }
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Row-major odometer step.
pub(crate) fn increment(idx: &mut [usize], shape: &[usize]) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < shape[k] {
            return;
        }
        idx[k] = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform3() -> FactoredDist {
        FactoredDist::from_fn(
            vec![
                ("x".into(), Alphabet::range(2)),
                ("y".into(), Alphabet::range(2)),
                ("z".into(), Alphabet::range(2)),
            ],
            |_| 0.125,
        )
        .unwrap()
    }

    #[test]
    fn canonical_layout() {
        let d = FactoredDist::new(
            vec![("y".into(), Alphabet::range(2)), ("x".into(), Alphabet::range(3))],
            vec![0.1, 0.2, 0.0, 0.3, 0.15, 0.25],
        )
        .unwrap();
        assert_eq!(d.axis_names(), vec!["x", "y"]);
        // original (y=1, x=0) = 0.3 sits at canonical (x=0, y=1)
        assert_eq!(d.get(&[0, 1]), 0.3);
        assert_eq!(d.get(&[2, 0]), 0.0);
    }

    #[test]
    fn marginalize_uniform() {
        let m = uniform3().marginalize(&["x"]).unwrap();
        assert_eq!(m.mass(), &[0.5, 0.5]);
        assert_eq!(
            uniform3().marginalize(&["w"]),
            Err(Error::UnknownAxis("w".into()))
        );
    }

    #[test]
    fn condition_dsbs() {
        let f = JointDist::dsbs(0.25).to_factored("u", "v").unwrap();
        let c = f.condition(&[("v", 0)]).unwrap();
        assert_eq!(c.axis_names(), vec!["u"]);
        assert!((c.mass()[0] - 0.75).abs() < 1e-15);
        let z = JointDist::from_rows(&[[0.5, 0.0], [0.5, 0.0]])
            .unwrap()
            .to_factored("a", "b")
            .unwrap();
        assert!(matches!(z.condition(&[("b", 1)]), Err(Error::ZeroEvent { .. })));
    }

    #[test]
    fn entropy_and_mi() {
        let f = JointDist::dsbs(0.25).to_factored("u", "v").unwrap();
        let h = f.conditional_entropy(&["u"], &["v"]).unwrap();
        assert!((h - 0.811_278_124_459_132_8).abs() < 1e-12);
        let u = uniform3();
        assert!(u.mutual_information(&["x"], &["y"], &["z"]).unwrap().abs() < 1e-12);
        assert!((u.entropy(&["x"]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grouped_joint() {
        let f = JointDist::dsbs(0.25).to_factored("u", "v").unwrap();
        let j = f.joint(&["v"], &["u"]).unwrap();
        assert_eq!(j.mass(), JointDist::dsbs(0.25).mass());
    }
}
