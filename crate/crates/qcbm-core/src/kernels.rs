//! Gaussian RBF mixture kernel and Gram-matrix helpers.
//!
//! `K(x, y) = (1/c) * sum_i exp(-|x - y|^2 / (2 sigma_i))`. The mixture is
//! shared by the image-space MMD loss, the deep-kernel MMD loss (applied to
//! feature vectors), and the kernel-form coding-rate gradient.

use nalgebra::{DMatrix, DVectorView};
use serde::{Deserialize, Serialize};

use crate::dist::SampleBatch;
use crate::error::{Error, Result};

/// Bandwidths spanning squared Hamming distances 1..n of small BAS images.
pub const DEFAULT_BANDWIDTHS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfKernel {
    bandwidths: Vec<f64>,
}

impl RbfKernel {
    pub fn new(bandwidths: Vec<f64>) -> Result<Self> {
        if bandwidths.is_empty() {
            return Err(Error::Config("kernel needs at least one bandwidth".into()));
        }
        if bandwidths.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Config("kernel bandwidths must be positive".into()));
        }
        Ok(Self { bandwidths })
    }

    pub fn default_mixture() -> Self {
        Self::new(DEFAULT_BANDWIDTHS.to_vec()).expect("defaults are positive")
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    /// Mixture value from a squared distance.
    pub fn from_sq_dist(&self, sq_dist: f64) -> f64 {
        let c = self.bandwidths.len() as f64;
        self.bandwidths
            .iter()
            .map(|&s| (-sq_dist / (2.0 * s)).exp())
            .sum::<f64>()
            / c
    }

    /// `K(x, y)` for equal-length vectors.
    pub fn value(&self, x: DVectorView<f64>, y: DVectorView<f64>) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                context: "kernel argument dimensions",
                left: x.len(),
                right: y.len(),
            });
        }
        let sq = x
            .iter()
            .zip(y.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        Ok(self.from_sq_dist(sq))
    }

    /// Gram matrix between column-sample matrices: entry `(i, j)` is
    /// `K(a_i, b_j)` for columns `a_i` of `a` and `b_j` of `b`.
    pub fn matrix(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if a.nrows() != b.nrows() {
            return Err(Error::DimensionMismatch {
                context: "kernel sample dimensions",
                left: a.nrows(),
                right: b.nrows(),
            });
        }
        let mut out = DMatrix::zeros(a.ncols(), b.ncols());
        for i in 0..a.ncols() {
            for j in 0..b.ncols() {
                out[(i, j)] = self
                    .value(a.column(i).into(), b.column(j).into())
                    .expect("row counts already checked");
            }
        }
        Ok(out)
    }
}

/// Kernel values for every pair of basis states of an `n`-bit register,
/// computed once from Hamming distances. Indexing the table is then O(1) per
/// sampled pair.
#[derive(Debug, Clone)]
pub struct BitKernelTable {
    n_bits: usize,
    values: Vec<f64>,
}

impl BitKernelTable {
    pub fn build(kernel: &RbfKernel, n_bits: usize) -> Self {
        let dim = 1usize << n_bits;
        // |x - y|^2 over {0,1}^n is the Hamming distance of the indices.
        let by_distance: Vec<f64> = (0..=n_bits)
            .map(|d| kernel.from_sq_dist(d as f64))
            .collect();
        let mut values = vec![0.0; dim * dim];
        for x in 0..dim {
            for y in 0..dim {
                values[x * dim + y] = by_distance[(x ^ y).count_ones() as usize];
            }
        }
        Self { n_bits, values }
    }

    /// Table over outcomes mapped through arbitrary feature columns:
    /// entry `(x, y)` is the kernel of `features[:, x]` and `features[:, y]`.
    /// Column count must be a power of two (one column per basis state).
    pub fn from_feature_columns(kernel: &RbfKernel, features: &DMatrix<f64>) -> Self {
        let dim = features.ncols();
        debug_assert!(dim.is_power_of_two());
        let n_bits = dim.trailing_zeros() as usize;
        let mut values = vec![0.0; dim * dim];
        for x in 0..dim {
            values[x * dim + x] = 1.0;
            for y in 0..x {
                let sq = (features.column(x) - features.column(y)).norm_squared();
                let v = kernel.from_sq_dist(sq);
                values[x * dim + y] = v;
                values[y * dim + x] = v;
            }
        }
        Self { n_bits, values }
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[x * (1 << self.n_bits) + y]
    }
}

/// Mean kernel value over all pairs of two sampled batches (V-statistic term).
pub fn mean_kernel_batches(table: &BitKernelTable, a: &SampleBatch, b: &SampleBatch) -> f64 {
    let mut sum = 0.0;
    for &x in a.states() {
        for &y in b.states() {
            sum += table.get(x, y);
        }
    }
    sum / (a.len() * b.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use rand::Rng;

    fn v(data: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(data)
    }

    #[test]
    fn value_is_one_at_zero_distance() {
        let k = RbfKernel::default_mixture();
        let x = v(&[0.3, -1.2, 4.0]);
        assert_abs_diff_eq!(k.value(x.as_view(), x.as_view()).unwrap(), 1.0);
    }

    #[test]
    fn single_bandwidth_example() {
        // sigma = 0.5 and |x-y|^2 = 1 gives exp(-1).
        let k = RbfKernel::new(vec![0.5]).unwrap();
        let x = v(&[0.0]);
        let y = v(&[1.0]);
        assert_abs_diff_eq!(
            k.value(x.as_view(), y.as_view()).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn symmetry() {
        let k = RbfKernel::default_mixture();
        let x = v(&[0.1, 0.9]);
        let y = v(&[1.0, -0.4]);
        assert_eq!(
            k.value(x.as_view(), y.as_view()).unwrap(),
            k.value(y.as_view(), x.as_view()).unwrap()
        );
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let k = RbfKernel::default_mixture();
        let x = v(&[0.0]);
        let y = v(&[0.0, 1.0]);
        assert!(k.value(x.as_view(), y.as_view()).is_err());
    }

    #[test]
    fn invalid_bandwidths_rejected() {
        assert!(RbfKernel::new(vec![]).is_err());
        assert!(RbfKernel::new(vec![0.0]).is_err());
        assert!(RbfKernel::new(vec![-1.0]).is_err());
    }

    #[test]
    fn gram_diagonal_is_all_ones() {
        let k = RbfKernel::default_mixture();
        let a = DMatrix::from_fn(3, 5, |i, j| (i * j) as f64 * 0.3);
        let g = k.matrix(&a, &a).unwrap();
        for i in 0..5 {
            assert_abs_diff_eq!(g[(i, i)], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gram_is_positive_semidefinite() {
        // eigenvalue oracle on random sample sets
        let k = RbfKernel::default_mixture();
        for trial in 0..5u64 {
            let mut rng = seeds::stream(31, &[trial]);
            let a = DMatrix::from_fn(4, 24, |_, _| rng.gen_range(-2.0..2.0));
            let g = k.matrix(&a, &a).unwrap();
            let eig = g.symmetric_eigen();
            let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
            assert!(min >= -1e-10, "negative eigenvalue {min}");
        }
    }

    #[test]
    fn one_by_one_matrix_reduces_to_value() {
        let k = RbfKernel::default_mixture();
        let a = DMatrix::from_row_slice(2, 1, &[0.2, 0.4]);
        let b = DMatrix::from_row_slice(2, 1, &[1.2, -0.8]);
        let g = k.matrix(&a, &b).unwrap();
        assert_eq!(g.nrows(), 1);
        assert_eq!(
            g[(0, 0)],
            k.value(a.column(0).into(), b.column(0).into()).unwrap()
        );
    }

    #[test]
    fn bit_table_matches_direct_evaluation() {
        let k = RbfKernel::default_mixture();
        let table = BitKernelTable::build(&k, 4);
        let batch = SampleBatch::new(4, vec![3, 9, 15, 0]).unwrap();
        let cols = batch.to_real_columns();
        for i in 0..4 {
            for j in 0..4 {
                let direct = k
                    .value(cols.column(i).into(), cols.column(j).into())
                    .unwrap();
                assert_abs_diff_eq!(
                    table.get(batch.states()[i], batch.states()[j]),
                    direct,
                    epsilon = 1e-12
                );
            }
        }
    }
}
