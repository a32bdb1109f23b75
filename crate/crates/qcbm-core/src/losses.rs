//! Loss objectives on finite batches: kernel MMD, non-saturating GAN losses,
//! the coding-rate-reduction distance, the interpolated generator loss, and
//! deep-kernel MMD.
//!
//! MMD estimates are plug-in V-statistics: all pairs enter, including `i = j`.
//! This keeps the estimator aligned with the plain expectation form at the
//! cost of a small positive bias on tiny batches.
//!
//! Weighted variants take per-sample weights summing to one; a uniform weight
//! vector recovers the batch forms, while weighting the full outcome table by
//! exact probabilities yields the infinite-sample forms used in exact-
//! expectation mode.

use nalgebra::DMatrix;

use crate::dist::{DiscreteDistribution, SampleBatch};
use crate::error::{Error, Result};
use crate::kernels::{BitKernelTable, RbfKernel};
use crate::neural::{clamp_score, MlpNet, NetKind};

/// Jitter added to `I + C` if the Cholesky factorization fails.
const LOGDET_JITTER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSource {
    Generated,
    Real,
}

/// Feature vectors as columns of a `d x m` matrix.
#[derive(Debug, Clone)]
pub struct FeatureBatch {
    pub columns: DMatrix<f64>,
    pub source: SampleSource,
}

impl FeatureBatch {
    pub fn new(columns: DMatrix<f64>, source: SampleSource) -> Result<Self> {
        if columns.ncols() == 0 {
            return Err(Error::EmptyBatch);
        }
        if columns.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature batch"));
        }
        Ok(Self { columns, source })
    }

    pub fn batch_size(&self) -> usize {
        self.columns.ncols()
    }
}

/// Coding-rate configuration: `eps_sq` is the squared distortion, and
/// `assume_centered` (the default) takes features as already zero-mean — the
/// BatchNorm ahead of the feature output serves as the centering mechanism.
/// Clearing the flag subtracts the (weighted) feature mean explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mcr2Config {
    pub eps_sq: f64,
    pub assume_centered: bool,
}

impl Default for Mcr2Config {
    fn default() -> Self {
        Self {
            eps_sq: 0.5,
            assume_centered: true,
        }
    }
}

impl Mcr2Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_sq > 0.0) || !self.eps_sq.is_finite() {
            return Err(Error::Config("eps_sq must be positive".into()));
        }
        Ok(())
    }
}

/// `log det(I + C)` for symmetric positive semidefinite `C`, by Cholesky with
/// a jitter retry.
pub fn logdet_i_plus(c: &DMatrix<f64>) -> Result<f64> {
    let dim = c.nrows();
    let mut a = DMatrix::identity(dim, dim) + c;
    for attempt in 0..2 {
        match a.clone().cholesky() {
            Some(chol) => {
                let l = chol.l();
                return Ok(2.0 * (0..dim).map(|i| l[(i, i)].ln()).sum::<f64>());
            }
            None if attempt == 0 => {
                for i in 0..dim {
                    a[(i, i)] += LOGDET_JITTER;
                }
            }
            None => break,
        }
    }
    Err(Error::NonFinite("logdet factorization"))
}

/// MMD V-statistic between two column-sample matrices in the same space.
pub fn mmd_loss_features(k: &RbfKernel, gen: &DMatrix<f64>, real: &DMatrix<f64>) -> Result<f64> {
    if gen.ncols() == 0 || real.ncols() == 0 {
        return Err(Error::EmptyBatch);
    }
    let gg = k.matrix(gen, gen)?;
    let gr = k.matrix(gen, real)?;
    let rr = k.matrix(real, real)?;
    Ok(gg.mean() - 2.0 * gr.mean() + rr.mean())
}

/// MMD V-statistic on bit samples through a precomputed kernel table.
pub fn mmd_loss_samples(
    table: &BitKernelTable,
    gen: &SampleBatch,
    real: &SampleBatch,
) -> Result<f64> {
    if gen.is_empty() || real.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let gg = crate::kernels::mean_kernel_batches(table, gen, gen);
    let gr = crate::kernels::mean_kernel_batches(table, gen, real);
    let rr = crate::kernels::mean_kernel_batches(table, real, real);
    Ok(gg - 2.0 * gr + rr)
}

/// MMD with both expectations taken exactly over probability tables.
pub fn mmd_exact(
    table: &BitKernelTable,
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
) -> f64 {
    let dim = p.len();
    let mut pp = 0.0;
    let mut pq = 0.0;
    let mut qq = 0.0;
    for x in 0..dim {
        for y in 0..dim {
            let k = table.get(x, y);
            pp += p.prob(x) * p.prob(y) * k;
            pq += p.prob(x) * q.prob(y) * k;
            qq += q.prob(x) * q.prob(y) * k;
        }
    }
    pp - 2.0 * pq + qq
}

/// Non-saturating GAN losses from already-computed scores:
/// `(loss_D, loss_G)` with logarithm arguments clamped.
pub fn gan_ns_losses(scores_real: &[f64], scores_gen: &[f64]) -> Result<(f64, f64)> {
    if scores_real.is_empty() || scores_gen.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mean_ln_d_real = scores_real
        .iter()
        .map(|&s| clamp_score(s).ln())
        .sum::<f64>()
        / scores_real.len() as f64;
    let mean_ln_one_minus_gen = scores_gen
        .iter()
        .map(|&s| (1.0 - clamp_score(s)).ln())
        .sum::<f64>()
        / scores_gen.len() as f64;
    let mean_ln_d_gen = scores_gen
        .iter()
        .map(|&s| clamp_score(s).ln())
        .sum::<f64>()
        / scores_gen.len() as f64;
    Ok((-mean_ln_d_real - mean_ln_one_minus_gen, -mean_ln_d_gen))
}

/// Weighted second moment `sum_i w_i z_i z_i^T`, optionally after subtracting
/// the weighted mean.
fn weighted_second_moment(z: &DMatrix<f64>, w: &[f64], center: bool) -> DMatrix<f64> {
    let d = z.nrows();
    let mut mean = nalgebra::DVector::zeros(d);
    if center {
        for (i, &wi) in w.iter().enumerate() {
            mean += z.column(i) * wi;
        }
    }
    let mut out = DMatrix::zeros(d, d);
    for (i, &wi) in w.iter().enumerate() {
        let zi = z.column(i) - &mean;
        out.syger(wi, &zi, &zi, 1.0);
    }
    // syger fills one triangle; mirror it
    for r in 0..d {
        for c in 0..r {
            out[(c, r)] = out[(r, c)];
        }
    }
    out
}

/// Coding-rate distance from weighted feature sets. `wx`/`wy` must each sum
/// to one; uniform `1/m` weights give the sample form, probability weights
/// over the full outcome table give the infinite form.
pub fn mcr2_weighted(
    zx: &DMatrix<f64>,
    wx: &[f64],
    zy: &DMatrix<f64>,
    wy: &[f64],
    cfg: &Mcr2Config,
) -> Result<f64> {
    cfg.validate()?;
    if zx.nrows() != zy.nrows() {
        return Err(Error::DimensionMismatch {
            context: "feature dimensions",
            left: zx.nrows(),
            right: zy.nrows(),
        });
    }
    if zx.ncols() != wx.len() || zy.ncols() != wy.len() {
        return Err(Error::DimensionMismatch {
            context: "weights vs columns",
            left: zx.ncols().max(zy.ncols()),
            right: wx.len().max(wy.len()),
        });
    }
    if zx.iter().chain(zy.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature batch"));
    }
    let center = !cfg.assume_centered;
    let d = zx.nrows() as f64;
    let scale = d / cfg.eps_sq;
    let cx = weighted_second_moment(zx, wx, center) * scale;
    let cy = weighted_second_moment(zy, wy, center) * scale;
    let pooled = (&cx + &cy) * 0.5;
    Ok(0.5 * logdet_i_plus(&pooled)? - 0.25 * logdet_i_plus(&cx)? - 0.25 * logdet_i_plus(&cy)?)
}

/// Coding-rate distance between two equal-size feature batches (sample form).
pub fn mcr2_distance(x: &FeatureBatch, y: &FeatureBatch, cfg: &Mcr2Config) -> Result<f64> {
    if x.batch_size() != y.batch_size() {
        return Err(Error::BatchSizeMismatch {
            left: x.batch_size(),
            right: y.batch_size(),
        });
    }
    let m = x.batch_size();
    let w = vec![1.0 / m as f64; m];
    mcr2_weighted(&x.columns, &w, &y.columns, &w, cfg)
}

/// Coding-rate distance between exact distributions mapped through a feature
/// table (`features` holds the feature vector of every outcome as a column).
pub fn mcr2_exact(
    features: &DMatrix<f64>,
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    cfg: &Mcr2Config,
) -> Result<f64> {
    mcr2_weighted(features, p.probs(), features, q.probs(), cfg)
}

/// Gradient of [`mcr2_weighted`] with respect to both feature sets.
pub fn mcr2_feature_grad(
    zx: &DMatrix<f64>,
    wx: &[f64],
    zy: &DMatrix<f64>,
    wy: &[f64],
    cfg: &Mcr2Config,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    cfg.validate()?;
    let center = !cfg.assume_centered;
    let dim = zx.nrows();
    let d = dim as f64;
    let scale = d / cfg.eps_sq;
    let cx = weighted_second_moment(zx, wx, center) * scale;
    let cy = weighted_second_moment(zy, wy, center) * scale;
    let pooled = (&cx + &cy) * 0.5;
    let eye = DMatrix::identity(dim, dim);
    let inv_pooled = (&eye + &pooled)
        .cholesky()
        .ok_or(Error::NonFinite("pooled covariance factorization"))?
        .inverse();
    let inv_x = (&eye + &cx)
        .cholesky()
        .ok_or(Error::NonFinite("covariance factorization"))?
        .inverse();
    let inv_y = (&eye + &cy)
        .cholesky()
        .ok_or(Error::NonFinite("covariance factorization"))?
        .inverse();

    let side = |z: &DMatrix<f64>, w: &[f64], inv_own: &DMatrix<f64>| -> DMatrix<f64> {
        let mut mean = nalgebra::DVector::zeros(dim);
        if center {
            for (i, &wi) in w.iter().enumerate() {
                mean += z.column(i) * wi;
            }
        }
        let diff = &inv_pooled - inv_own;
        let mut grad = DMatrix::zeros(dim, z.ncols());
        for (i, &wi) in w.iter().enumerate() {
            let zi = z.column(i) - &mean;
            let g = (&diff * zi) * (0.5 * scale * wi);
            grad.set_column(i, &g);
        }
        if center {
            // centered features: dz~_j / dz_i = delta_ij I - w_i I
            let total: nalgebra::DVector<f64> = grad
                .column_iter()
                .fold(nalgebra::DVector::zeros(dim), |acc, c| acc + c);
            for (i, &wi) in w.iter().enumerate() {
                let adj = grad.column(i) - &total * wi;
                grad.set_column(i, &adj);
            }
        }
        grad
    };

    Ok((side(zx, wx, &inv_x), side(zy, wy, &inv_y)))
}

/// Weighted V-statistic MMD on feature columns.
pub fn mmd_weighted(
    k: &RbfKernel,
    zx: &DMatrix<f64>,
    wx: &[f64],
    zy: &DMatrix<f64>,
    wy: &[f64],
) -> Result<f64> {
    let wxv = nalgebra::DVector::from_row_slice(wx);
    let wyv = nalgebra::DVector::from_row_slice(wy);
    let xx = k.matrix(zx, zx)?;
    let xy = k.matrix(zx, zy)?;
    let yy = k.matrix(zy, zy)?;
    Ok((wxv.transpose() * &xx * &wxv)[(0, 0)] - 2.0 * (wxv.transpose() * &xy * &wyv)[(0, 0)]
        + (wyv.transpose() * &yy * &wyv)[(0, 0)])
}

/// Gradient of [`mmd_weighted`] with respect to both feature sets.
pub fn mmd_feature_grad(
    k: &RbfKernel,
    zx: &DMatrix<f64>,
    wx: &[f64],
    zy: &DMatrix<f64>,
    wy: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let dim = zx.nrows();
    if zy.nrows() != dim {
        return Err(Error::DimensionMismatch {
            context: "feature dimensions",
            left: dim,
            right: zy.nrows(),
        });
    }
    // d/du K(u, v) = -(1/c) sum_s exp(-|u-v|^2 / (2 sigma_s)) (u - v) / sigma_s
    let pair_grad = |u: nalgebra::DVectorView<f64>,
                     v: nalgebra::DVectorView<f64>|
     -> nalgebra::DVector<f64> {
        let diff = u - v;
        let sq = diff.norm_squared();
        let c = k.bandwidths().len() as f64;
        let coef: f64 = k
            .bandwidths()
            .iter()
            .map(|&s| (-sq / (2.0 * s)).exp() / s)
            .sum::<f64>()
            / c;
        diff * (-coef)
    };

    let mut gx = DMatrix::zeros(dim, zx.ncols());
    for (i, &wi) in wx.iter().enumerate() {
        let mut acc = nalgebra::DVector::zeros(dim);
        for (j, &wj) in wx.iter().enumerate() {
            if i != j {
                acc += pair_grad(zx.column(i), zx.column(j)) * (2.0 * wi * wj);
            }
        }
        for (j, &wj) in wy.iter().enumerate() {
            acc -= pair_grad(zx.column(i), zy.column(j)) * (2.0 * wi * wj);
        }
        gx.set_column(i, &acc);
    }
    let mut gy = DMatrix::zeros(dim, zy.ncols());
    for (i, &wi) in wy.iter().enumerate() {
        let mut acc = nalgebra::DVector::zeros(dim);
        for (j, &wj) in wy.iter().enumerate() {
            if i != j {
                acc += pair_grad(zy.column(i), zy.column(j)) * (2.0 * wi * wj);
            }
        }
        for (j, &wj) in wx.iter().enumerate() {
            acc -= pair_grad(zy.column(i), zx.column(j)) * (2.0 * wi * wj);
        }
        gy.set_column(i, &acc);
    }
    Ok((gx, gy))
}

/// `(1 - alpha) * loss_g_ns + alpha * delta_r`.
pub fn interpolated_g_loss(alpha: f64, loss_g_ns: f64, delta_r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange(format!(
            "interpolation alpha {alpha} outside [0, 1]"
        )));
    }
    Ok((1.0 - alpha) * loss_g_ns + alpha * delta_r)
}

/// MMD between batches mapped through a frozen feature net (eval mode).
pub fn deep_kernel_mmd_loss(
    net: &MlpNet,
    k: &RbfKernel,
    gen: &SampleBatch,
    real: &SampleBatch,
) -> Result<f64> {
    if net.kind() != NetKind::FeatureMapper {
        return Err(Error::NetArchitecture(
            "deep-kernel MMD needs a feature mapper (no sigmoid head)",
        ));
    }
    let zg = net.features_eval(&gen.to_real_columns())?;
    let zr = net.features_eval(&real.to_real_columns())?;
    mmd_loss_features(k, &zg, &zr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_features(d: usize, m: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeds::stream(seed, &[55]);
        DMatrix::from_fn(d, m, |_, _| rng.gen_range(-1.5..1.5))
    }

    fn uniform_w(m: usize) -> Vec<f64> {
        vec![1.0 / m as f64; m]
    }

    /// Independent double-loop MMD oracle.
    fn mmd_oracle(k: &RbfKernel, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let pairs = |p: &DMatrix<f64>, q: &DMatrix<f64>| -> f64 {
            let mut acc = 0.0;
            for i in 0..p.ncols() {
                for j in 0..q.ncols() {
                    let sq: f64 = p
                        .column(i)
                        .iter()
                        .zip(q.column(j).iter())
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum();
                    acc += k.from_sq_dist(sq);
                }
            }
            acc / (p.ncols() * q.ncols()) as f64
        };
        pairs(a, a) - 2.0 * pairs(a, b) + pairs(b, b)
    }

    /// Eigenvalue-sum logdet oracle.
    fn logdet_oracle(c: &DMatrix<f64>) -> f64 {
        let a = DMatrix::identity(c.nrows(), c.ncols()) + c;
        a.symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|&l| l.ln())
            .sum()
    }

    fn mcr2_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>, eps_sq: f64) -> f64 {
        let d = x.nrows() as f64;
        let m = x.ncols() as f64;
        let sp = d / (2.0 * m * eps_sq);
        let ss = d / (m * eps_sq);
        let xxt = x * x.transpose();
        let yyt = y * y.transpose();
        0.5 * logdet_oracle(&((&xxt + &yyt) * sp))
            - 0.25 * logdet_oracle(&(&xxt * ss))
            - 0.25 * logdet_oracle(&(&yyt * ss))
    }

    #[test]
    fn mmd_identical_batches_is_zero() {
        let k = RbfKernel::default_mixture();
        let a = random_features(3, 6, 1);
        let v = mmd_loss_features(&k, &a, &a).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn mmd_singletons_formula() {
        let k = RbfKernel::default_mixture();
        let a = random_features(3, 1, 2);
        let b = random_features(3, 1, 3);
        let kxy = k.value(a.column(0), b.column(0)).unwrap();
        let v = mmd_loss_features(&k, &a, &b).unwrap();
        assert_abs_diff_eq!(v, 2.0 - 2.0 * kxy, epsilon = 1e-12);
        assert!(v >= 0.0);
    }

    #[test]
    fn mmd_matches_double_loop_oracle() {
        let k = RbfKernel::default_mixture();
        let a = random_features(4, 4, 4);
        let b = random_features(4, 4, 5);
        assert_abs_diff_eq!(
            mmd_loss_features(&k, &a, &b).unwrap(),
            mmd_oracle(&k, &a, &b),
            epsilon = 1e-12
        );
    }

    #[test]
    fn mmd_is_symmetric() {
        let k = RbfKernel::default_mixture();
        let a = random_features(4, 5, 6);
        let b = random_features(4, 7, 7);
        assert_abs_diff_eq!(
            mmd_loss_features(&k, &a, &b).unwrap(),
            mmd_loss_features(&k, &b, &a).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn mmd_weighted_uniform_matches_batch_form() {
        let k = RbfKernel::default_mixture();
        let a = random_features(3, 4, 8);
        let b = random_features(3, 4, 9);
        assert_abs_diff_eq!(
            mmd_weighted(&k, &a, &uniform_w(4), &b, &uniform_w(4)).unwrap(),
            mmd_loss_features(&k, &a, &b).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn mmd_empty_batch_is_an_error() {
        let k = RbfKernel::default_mixture();
        let a = random_features(3, 4, 10);
        let empty = DMatrix::<f64>::zeros(3, 0);
        assert!(mmd_loss_features(&k, &a, &empty).is_err());
    }

    #[test]
    fn gan_ns_half_scores() {
        let (ld, lg) = gan_ns_losses(&[0.5; 4], &[0.5; 4]).unwrap();
        assert_abs_diff_eq!(ld, 2.0 * std::f64::consts::LN_2, epsilon = 1e-12);
        assert_abs_diff_eq!(lg, std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn gan_ns_perfect_discriminator_limit() {
        let mut prev = f64::MAX;
        for delta in [1e-2, 1e-4, 1e-6] {
            let (ld, _) = gan_ns_losses(&[1.0 - delta; 3], &[delta; 3]).unwrap();
            assert!(ld < prev);
            prev = ld;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn gan_ns_generator_loss_is_monotone_in_scores() {
        let (_, lg_low) = gan_ns_losses(&[0.5], &[0.3, 0.4]).unwrap();
        let (_, lg_high) = gan_ns_losses(&[0.5], &[0.6, 0.4]).unwrap();
        assert!(lg_high < lg_low);
    }

    #[test]
    fn gan_ns_empty_is_an_error() {
        assert!(gan_ns_losses(&[], &[0.5]).is_err());
        assert!(gan_ns_losses(&[0.5], &[]).is_err());
    }

    #[test]
    fn mcr2_identical_batches_is_zero() {
        let cfg = Mcr2Config::default();
        let x = FeatureBatch::new(random_features(2, 8, 11), SampleSource::Generated).unwrap();
        let y = FeatureBatch::new(x.columns.clone(), SampleSource::Real).unwrap();
        assert!(mcr2_distance(&x, &y, &cfg).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mcr2_orthogonal_singletons_analytic() {
        // X = e1, Y = e2, d = 2, m = 1, eps^2 = 0.5: the three logdet
        // arguments are diag(3,3), diag(5,1), diag(1,5).
        let cfg = Mcr2Config {
            eps_sq: 0.5,
            assume_centered: true,
        };
        let x = FeatureBatch::new(
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            SampleSource::Generated,
        )
        .unwrap();
        let y = FeatureBatch::new(
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            SampleSource::Real,
        )
        .unwrap();
        let dr = mcr2_distance(&x, &y, &cfg).unwrap();
        let expected = 3.0f64.ln() - 0.5 * 5.0f64.ln();
        assert_abs_diff_eq!(dr, expected, epsilon = 1e-12);
    }

    #[test]
    fn mcr2_matches_eigen_oracle() {
        let cfg = Mcr2Config::default();
        for seed in 0..5u64 {
            let x = random_features(2, 8, 100 + seed);
            let y = random_features(2, 8, 200 + seed);
            let got = mcr2_distance(
                &FeatureBatch::new(x.clone(), SampleSource::Generated).unwrap(),
                &FeatureBatch::new(y.clone(), SampleSource::Real).unwrap(),
                &cfg,
            )
            .unwrap();
            assert_abs_diff_eq!(got, mcr2_oracle(&x, &y, cfg.eps_sq), epsilon = 1e-10);
        }
    }

    #[test]
    fn mcr2_nonnegative_on_random_pairs() {
        let cfg = Mcr2Config::default();
        for seed in 0..1000u64 {
            let x = random_features(2, 4, 300 + seed);
            let y = random_features(2, 4, 5300 + seed);
            let dr = mcr2_distance(
                &FeatureBatch::new(x, SampleSource::Generated).unwrap(),
                &FeatureBatch::new(y, SampleSource::Real).unwrap(),
                &cfg,
            )
            .unwrap();
            assert!(dr >= -1e-10, "negative coding rate {dr} at seed {seed}");
        }
    }

    #[test]
    fn mcr2_zero_under_orthogonal_column_mixing() {
        // Y = X Q with Q orthogonal keeps X X^T, hence zero distance.
        let cfg = Mcr2Config::default();
        let x = random_features(2, 4, 12);
        let theta: f64 = 0.83;
        let mut q = DMatrix::zeros(4, 4);
        q[(0, 0)] = theta.cos();
        q[(0, 1)] = -theta.sin();
        q[(1, 0)] = theta.sin();
        q[(1, 1)] = theta.cos();
        q[(2, 2)] = 1.0;
        q[(3, 3)] = -1.0;
        let y = &x * &q;
        let dr = mcr2_distance(
            &FeatureBatch::new(x, SampleSource::Generated).unwrap(),
            &FeatureBatch::new(y, SampleSource::Real).unwrap(),
            &cfg,
        )
        .unwrap();
        assert!(dr.abs() < 1e-10);
    }

    #[test]
    fn mcr2_batch_size_mismatch_is_an_error() {
        let cfg = Mcr2Config::default();
        let x = FeatureBatch::new(random_features(2, 4, 13), SampleSource::Generated).unwrap();
        let y = FeatureBatch::new(random_features(2, 5, 14), SampleSource::Real).unwrap();
        assert!(mcr2_distance(&x, &y, &cfg).is_err());
    }

    #[test]
    fn feature_batch_rejects_non_finite() {
        let mut bad = random_features(2, 4, 15);
        bad[(0, 0)] = f64::NAN;
        assert!(FeatureBatch::new(bad, SampleSource::Generated).is_err());
    }

    #[test]
    fn logdet_matches_eigen_oracle() {
        for seed in 0..5u64 {
            let a = random_features(3, 6, 400 + seed);
            let c = &a * a.transpose();
            assert_abs_diff_eq!(
                logdet_i_plus(&c).unwrap(),
                logdet_oracle(&c),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn mcr2_feature_grad_matches_finite_difference() {
        for center in [false, true] {
            let cfg = Mcr2Config {
                eps_sq: 0.5,
                assume_centered: !center,
            };
            let zx = random_features(2, 4, 16);
            let zy = random_features(2, 4, 17);
            let wx = uniform_w(4);
            let wy = [0.1, 0.2, 0.3, 0.4];
            let (gx, gy) = mcr2_feature_grad(&zx, &wx, &zy, &wy, &cfg).unwrap();
            let h = 1e-6;
            for (z, w, g, x_side) in [
                (&zx, &wx[..], &gx, true),
                (&zy, &wy[..], &gy, false),
            ] {
                for i in 0..z.nrows() {
                    for j in 0..z.ncols() {
                        let mut up = z.clone();
                        up[(i, j)] += h;
                        let mut dn = z.clone();
                        dn[(i, j)] -= h;
                        let (lu, ld) = if x_side {
                            (
                                mcr2_weighted(&up, w, &zy, &wy, &cfg).unwrap(),
                                mcr2_weighted(&dn, w, &zy, &wy, &cfg).unwrap(),
                            )
                        } else {
                            (
                                mcr2_weighted(&zx, &wx, &up, w, &cfg).unwrap(),
                                mcr2_weighted(&zx, &wx, &dn, w, &cfg).unwrap(),
                            )
                        };
                        let fd = (lu - ld) / (2.0 * h);
                        assert_abs_diff_eq!(g[(i, j)], fd, epsilon = 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn mmd_feature_grad_matches_finite_difference() {
        let k = RbfKernel::default_mixture();
        let zx = random_features(2, 4, 18);
        let zy = random_features(2, 3, 19);
        let wx = uniform_w(4);
        let wy = [0.5, 0.25, 0.25];
        let (gx, gy) = mmd_feature_grad(&k, &zx, &wx, &zy, &wy).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            for j in 0..4 {
                let mut up = zx.clone();
                up[(i, j)] += h;
                let mut dn = zx.clone();
                dn[(i, j)] -= h;
                let fd = (mmd_weighted(&k, &up, &wx, &zy, &wy).unwrap()
                    - mmd_weighted(&k, &dn, &wx, &zy, &wy).unwrap())
                    / (2.0 * h);
                assert_abs_diff_eq!(gx[(i, j)], fd, epsilon = 1e-7);
            }
            for j in 0..3 {
                let mut up = zy.clone();
                up[(i, j)] += h;
                let mut dn = zy.clone();
                dn[(i, j)] -= h;
                let fd = (mmd_weighted(&k, &zx, &wx, &up, &wy).unwrap()
                    - mmd_weighted(&k, &zx, &wx, &dn, &wy).unwrap())
                    / (2.0 * h);
                assert_abs_diff_eq!(gy[(i, j)], fd, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn interpolation_edge_cases() {
        assert_abs_diff_eq!(interpolated_g_loss(0.0, 2.0, 0.4).unwrap(), 2.0);
        assert_abs_diff_eq!(interpolated_g_loss(1.0, 2.0, 0.4).unwrap(), 0.4);
        assert_abs_diff_eq!(interpolated_g_loss(0.5, 2.0, 0.4).unwrap(), 1.2);
        assert!(interpolated_g_loss(1.5, 2.0, 0.4).is_err());
        assert!(interpolated_g_loss(-0.1, 2.0, 0.4).is_err());
    }

    #[test]
    fn deep_kernel_mmd_basics() {
        let k = RbfKernel::default_mixture();
        let net = MlpNet::feature_mapper(4, &mut seeds::stream(20, &[0]));
        let batch = SampleBatch::new(4, vec![1, 5, 9, 12]).unwrap();
        let v = deep_kernel_mmd_loss(&net, &k, &batch, &batch).unwrap();
        assert!(v.abs() < 1e-12);

        let other = SampleBatch::new(4, vec![0, 3, 3, 15]).unwrap();
        let via_features = mmd_loss_features(
            &k,
            &net.features_eval(&batch.to_real_columns()).unwrap(),
            &net.features_eval(&other.to_real_columns()).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(
            deep_kernel_mmd_loss(&net, &k, &batch, &other).unwrap(),
            via_features,
            epsilon = 1e-14
        );
    }

    #[test]
    fn deep_kernel_mmd_rejects_scorer_head() {
        let k = RbfKernel::default_mixture();
        let net = MlpNet::scorer(4, &mut seeds::stream(21, &[0]));
        let batch = SampleBatch::new(4, vec![1, 2]).unwrap();
        assert!(deep_kernel_mmd_loss(&net, &k, &batch, &batch).is_err());
    }
}
