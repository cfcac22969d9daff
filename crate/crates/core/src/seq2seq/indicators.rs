use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ModelError;
use crate::autodiff::Tensor;

/// Fixed orthonormal vectors, one row per tune. Bound into graphs as inputs,
/// so they never receive a gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneIndicatorTable {
    pub vectors: Tensor,
}

impl TuneIndicatorTable {
    pub fn num_tunes(&self) -> usize {
        self.vectors.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.vectors.shape()[1]
    }

    pub fn row(&self, tune_id: usize) -> &[f64] {
        self.vectors.row(tune_id)
    }
}

/// Eigenvectors of a seeded random symmetric `dim x dim` matrix.
///
/// Entries of `M` are standard normal; the eigenvectors of `(M + M^T) / 2`
/// are taken in descending eigenvalue order and the first `num_tunes` become
/// the rows. Each row's sign is fixed so that its largest-magnitude entry is
/// positive.
pub fn make_tune_indicators(
    num_tunes: usize,
    dim: usize,
    seed: u64,
) -> Result<TuneIndicatorTable, ModelError> {
    if num_tunes > dim {
        return Err(ModelError::TooManyTunes { num_tunes, dim });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..dim * dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let m = DMatrix::from_row_slice(dim, dim, &raw);
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });

    let mut data = Vec::with_capacity(num_tunes * dim);
    for &k in order.iter().take(num_tunes) {
        let col = eig.eigenvectors.column(k);
        let norm = col.norm();
        let pivot = col.iter().copied().fold(0.0f64, |best, x| {
            if libm::fabs(x) > libm::fabs(best) {
                x
            } else {
                best
            }
        });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        data.extend(col.iter().map(|x| sign * x / norm));
    }
    Ok(TuneIndicatorTable {
        vectors: Tensor::new(alloc::vec![num_tunes, dim], data)?,
    })
}
