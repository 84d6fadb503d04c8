//! Seeded random distributions for tests, oracles and region sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use super::{Alphabet, JointDist, Kernel, Marginal};
use crate::linalg::Matrix;

pub type Rng = ChaCha8Rng;

/// Independent generator for `(seed, stream)`; streams never overlap.
pub fn rng(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Uniform point on the probability simplex (Dirichlet with unit weights),
/// from normalized exponentials.
pub fn simplex(rng: &mut Rng, n: usize) -> Vec<f64> {
    assert!(n > 0);
    loop {
        let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
        let s: f64 = e.iter().sum();
        if s > 0.0 {
            return e.into_iter().map(|x: f64| x / s).collect();
        }
    }
}

pub fn marginal(rng: &mut Rng, n: usize) -> Marginal {
    Marginal::new(Alphabet::range(n), simplex(rng, n)).expect("simplex point is a distribution")
}

/// Joint drawn uniformly from the simplex over `rows x cols` cells.
pub fn joint(rng: &mut Rng, rows: usize, cols: usize) -> JointDist {
    let m = Matrix::from_vec(rows, cols, simplex(rng, rows * cols)).expect("shape");
    JointDist::new(m, Alphabet::range(rows), Alphabet::range(cols)).expect("valid joint")
}

/// Kernel with every row drawn independently from the simplex.
pub fn kernel(rng: &mut Rng, from: &Alphabet, to: &Alphabet) -> Kernel {
    let mut data = Vec::with_capacity(from.len() * to.len());
    for _ in 0..from.len() {
        data.extend(simplex(rng, to.len()));
    }
    let m = Matrix::from_vec(from.len(), to.len(), data).expect("shape");
    Kernel::new(from.clone(), to.clone(), m).expect("rows are distributions")
}
