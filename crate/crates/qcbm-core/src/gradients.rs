//! Sampling-based circuit-parameter gradient estimators via the
//! parameter-shift rule.
//!
//! Every estimator follows the same shape: precompute a per-outcome value
//! table at the current parameters, then for each parameter combine
//! expectations of that table under the `+pi/2` and `-pi/2` shifted circuits.
//! The shifted expectations are either batch means over fresh measurement
//! draws (`GenMode::Sampled`) or full sums over the exact shifted probability
//! tables (`GenMode::Exact`, the control used by the finite-difference
//! properties). Real-data expectations may likewise be batch means or exact
//! sums over the target table.
//!
//! Per step, the model-side batch at the unshifted parameters is drawn once
//! and shared across parameters, while each parameter gets fresh batches from
//! its two shifted circuits: `2P + 1` batches per gradient evaluation.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::circuit::{exact_distribution, generate, CircuitSpec, ParamVector, ShiftDir};
use crate::dist::{DiscreteDistribution, SampleBatch};
use crate::error::{Error, Result};
use crate::kernels::BitKernelTable;
use crate::losses::Mcr2Config;
use crate::neural::{clamp_score, MlpNet, NetKind};
use crate::seeds;

/// Seed tags for the independent random streams of one gradient evaluation.
const TAG_BASE_BATCH: u64 = 0;
const TAG_PARAM: u64 = 1;

/// Gradient of a loss with respect to every circuit parameter.
#[derive(Debug, Clone)]
pub struct GradEstimate {
    pub grad: Vec<f64>,
    /// Sample batches drawn from the simulator for this estimate.
    pub batches_used: usize,
}

impl GradEstimate {
    fn checked(grad: Vec<f64>, batches_used: usize) -> Result<Self> {
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient estimate"));
        }
        Ok(Self { grad, batches_used })
    }
}

/// How model-side expectations are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenMode {
    /// Batch means over `batch_m` fresh measurements per shifted circuit.
    Sampled { batch_m: usize },
    /// Full sums over the exact shifted probability tables.
    Exact,
}

impl GenMode {
    fn validate(&self) -> Result<()> {
        if let GenMode::Sampled { batch_m: 0 } = self {
            return Err(Error::Config("batch_m must be at least 1".into()));
        }
        Ok(())
    }
}

/// Source of real-data expectations: a sampled batch or the exact target
/// table (the full-knowledge control mode).
#[derive(Debug, Clone, Copy)]
pub enum RealSide<'a> {
    Batch(&'a SampleBatch),
    Exact(&'a DiscreteDistribution),
}

/// One side of a shifted expectation.
enum SideExpect {
    Table(DiscreteDistribution),
    Batch(SampleBatch),
}

impl SideExpect {
    fn expect(&self, f: &[f64]) -> f64 {
        match self {
            SideExpect::Table(p) => p.expect(|x| f[x]),
            SideExpect::Batch(b) => {
                b.states().iter().map(|&x| f[x]).sum::<f64>() / b.len() as f64
            }
        }
    }
}

/// Builds the two shifted-side expectations for parameter `index`.
fn shifted_sides(
    spec: &CircuitSpec,
    params: &ParamVector,
    index: usize,
    gen: GenMode,
    seed: u64,
) -> Result<(SideExpect, SideExpect, usize)> {
    let plus = params.shifted(index, ShiftDir::Plus)?;
    let minus = params.shifted(index, ShiftDir::Minus)?;
    match gen {
        GenMode::Exact => Ok((
            SideExpect::Table(exact_distribution(spec, &plus)?),
            SideExpect::Table(exact_distribution(spec, &minus)?),
            0,
        )),
        GenMode::Sampled { batch_m } => {
            let idx = index as u64;
            let bp = generate(
                spec,
                &plus,
                batch_m,
                &mut seeds::stream(seed, &[TAG_PARAM, idx, 0]),
            )?;
            let bm = generate(
                spec,
                &minus,
                batch_m,
                &mut seeds::stream(seed, &[TAG_PARAM, idx, 1]),
            )?;
            Ok((SideExpect::Batch(bp), SideExpect::Batch(bm), 2))
        }
    }
}

/// Shift-difference sweep: for each parameter, `E_plus[f] - E_minus[f]` for
/// each provided table `f`, scaled and summed by `combine`.
fn sweep_parameters(
    spec: &CircuitSpec,
    params: &ParamVector,
    gen: GenMode,
    seed: u64,
    tables: &[Vec<f64>],
    combine: impl Fn(&[f64]) -> f64 + Sync,
) -> Result<(Vec<f64>, usize)> {
    let per_param: Vec<(f64, usize)> = (0..spec.param_count())
        .into_par_iter()
        .map(|k| -> Result<(f64, usize)> {
            let (plus, minus, drawn) = shifted_sides(spec, params, k, gen, seed)?;
            let diffs: Vec<f64> = tables
                .iter()
                .map(|f| plus.expect(f) - minus.expect(f))
                .collect();
            Ok((combine(&diffs), drawn))
        })
        .collect::<Result<Vec<_>>>()?;
    let grad = per_param.iter().map(|&(g, _)| g).collect();
    let batches = per_param.iter().map(|&(_, b)| b).sum();
    Ok((grad, batches))
}

/// Model-side batch at the unshifted parameters, shared across parameters.
fn base_batch(
    spec: &CircuitSpec,
    params: &ParamVector,
    batch_m: usize,
    seed: u64,
) -> Result<SampleBatch> {
    generate(
        spec,
        params,
        batch_m,
        &mut seeds::stream(seed, &[TAG_BASE_BATCH]),
    )
}

/// Mean kernel value against a fixed side, tabulated for every outcome.
fn kernel_against_side(table: &BitKernelTable, side: &SideExpect) -> Vec<f64> {
    let dim = 1usize << table.n_bits();
    (0..dim)
        .map(|x| match side {
            SideExpect::Table(p) => p.expect(|y| table.get(x, y)),
            SideExpect::Batch(b) => {
                b.states().iter().map(|&y| table.get(x, y)).sum::<f64>() / b.len() as f64
            }
        })
        .collect()
}

fn real_to_side(real: RealSide) -> SideExpect {
    match real {
        RealSide::Batch(b) => SideExpect::Batch(b.clone()),
        RealSide::Exact(p) => SideExpect::Table(p.clone()),
    }
}

/// MMD gradient through a precomputed kernel table:
/// `E+[k(., model)] - E-[k(., model)] - E+[k(., real)] + E-[k(., real)]`.
pub fn grad_mmd(
    spec: &CircuitSpec,
    params: &ParamVector,
    table: &BitKernelTable,
    gen: GenMode,
    real: RealSide,
    seed: u64,
) -> Result<GradEstimate> {
    gen.validate()?;
    let mut batches = 0;
    let model_side = match gen {
        GenMode::Exact => SideExpect::Table(exact_distribution(spec, params)?),
        GenMode::Sampled { batch_m } => {
            batches += 1;
            SideExpect::Batch(base_batch(spec, params, batch_m, seed)?)
        }
    };
    let u_model = kernel_against_side(table, &model_side);
    let u_real = kernel_against_side(table, &real_to_side(real));
    let (grad, drawn) = sweep_parameters(spec, params, gen, seed, &[u_model, u_real], |d| {
        d[0] - d[1]
    })?;
    GradEstimate::checked(grad, batches + drawn)
}

/// Non-saturating GAN generator gradient:
/// `1/2 E-[ln D] - 1/2 E+[ln D]` with the scorer frozen in eval mode.
pub fn grad_gan_ns(
    spec: &CircuitSpec,
    params: &ParamVector,
    net: &MlpNet,
    gen: GenMode,
    seed: u64,
) -> Result<GradEstimate> {
    gen.validate()?;
    let ln_scores = all_state_ln_scores(net, spec.n_qubits())?;
    let (grad, drawn) =
        sweep_parameters(spec, params, gen, seed, &[ln_scores], |d| -0.5 * d[0])?;
    GradEstimate::checked(grad, drawn)
}

/// Coding-rate gradient with an explicit feature map (the net's 2-unit
/// BatchNorm output, eval mode).
///
/// Covariances are estimated at the current parameters from the shared model
/// batch (or the exact table) and the real side; each parameter then combines
/// shifted expectations of the quadratic form
/// `phi^T (I+C_pool)^{-1} phi - phi^T (I+C_model)^{-1} phi`, scaled by
/// `d / (8 eps^2)`.
pub fn grad_mcr2_explicit(
    spec: &CircuitSpec,
    params: &ParamVector,
    net: &MlpNet,
    real: RealSide,
    cfg: &Mcr2Config,
    gen: GenMode,
    seed: u64,
) -> Result<GradEstimate> {
    gen.validate()?;
    cfg.validate()?;
    let features = all_state_features(net, spec.n_qubits())?;
    let mut batches = 0;
    let model_side = match gen {
        GenMode::Exact => SideExpect::Table(exact_distribution(spec, params)?),
        GenMode::Sampled { batch_m } => {
            batches += 1;
            SideExpect::Batch(base_batch(spec, params, batch_m, seed)?)
        }
    };
    let quad = mcr2_quadratic_table(&features, &model_side, &real_to_side(real), cfg)?;
    let dim = features.nrows() as f64;
    let scale = dim / (8.0 * cfg.eps_sq);
    let (grad, drawn) =
        sweep_parameters(spec, params, gen, seed, &[quad], |d| scale * d[0])?;
    GradEstimate::checked(grad, batches + drawn)
}

/// Per-outcome quadratic form for the explicit coding-rate gradient.
fn mcr2_quadratic_table(
    features: &DMatrix<f64>,
    model: &SideExpect,
    real: &SideExpect,
    cfg: &Mcr2Config,
) -> Result<Vec<f64>> {
    let d = features.nrows();
    let n_states = features.ncols();
    let scale = d as f64 / cfg.eps_sq;

    let side_weights = |side: &SideExpect| -> Vec<f64> {
        match side {
            SideExpect::Table(p) => p.probs().to_vec(),
            SideExpect::Batch(b) => {
                let mut w = vec![0.0; n_states];
                for &x in b.states() {
                    w[x] += 1.0 / b.len() as f64;
                }
                w
            }
        }
    };
    let wm = side_weights(model);
    let wr = side_weights(real);

    let center = !cfg.assume_centered;
    let mut mean = nalgebra::DVector::zeros(d);
    if center {
        for (x, &w) in wm.iter().enumerate() {
            mean += features.column(x) * w;
        }
    }
    let moment = |w: &[f64], mu: &nalgebra::DVector<f64>| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(d, d);
        for (x, &wx) in w.iter().enumerate() {
            if wx != 0.0 {
                let z = features.column(x) - mu;
                for r in 0..d {
                    for c in 0..d {
                        out[(r, c)] += wx * z[r] * z[c];
                    }
                }
            }
        }
        out
    };
    // real-side centering uses the real mean; it only enters C_pool
    let mut mean_r = nalgebra::DVector::zeros(d);
    if center {
        for (x, &w) in wr.iter().enumerate() {
            mean_r += features.column(x) * w;
        }
    }
    let c_model = moment(&wm, &mean) * scale;
    let c_real = moment(&wr, &mean_r) * scale;
    let c_pool = (&c_model + &c_real) * 0.5;
    let eye = DMatrix::identity(d, d);
    let inv_pool = (&eye + &c_pool)
        .cholesky()
        .ok_or(Error::NonFinite("pooled covariance factorization"))?
        .inverse();
    let inv_model = (&eye + &c_model)
        .cholesky()
        .ok_or(Error::NonFinite("model covariance factorization"))?
        .inverse();

    let quad_of = |inv: &DMatrix<f64>, x: usize| -> f64 {
        let phi = features.column(x);
        let iphi = inv * phi;
        let mut q = phi.dot(&iphi);
        if center {
            q -= 2.0 * mean.dot(&iphi);
        }
        q
    };
    Ok((0..n_states)
        .map(|x| quad_of(&inv_pool, x) - quad_of(&inv_model, x))
        .collect())
}

/// Coding-rate gradient when only a kernel `K(x, y)` over outcomes is
/// available. `feature_dim` plays the role of `d` in the rate scaling.
///
/// The model batch `X` is drawn once (shared), `T = [X, Y]` concatenates it
/// with the real batch, and each parameter combines shifted expectations of
/// `s_A(x) - s_B(x)` where
/// `s_A(x) = K(x,x) - a K(x,T)(I + a K(T,T))^{-1} K(T,x)`, `a = d/(2m eps^2)`
/// and `s_B` uses `X` alone with `b = d/(m eps^2)`.
pub fn grad_mcr2_kernel(
    spec: &CircuitSpec,
    params: &ParamVector,
    kernel: &(dyn Fn(usize, usize) -> f64 + Sync),
    feature_dim: usize,
    real_batch: &SampleBatch,
    cfg: &Mcr2Config,
    gen: GenMode,
    seed: u64,
) -> Result<GradEstimate> {
    gen.validate()?;
    cfg.validate()?;
    if !cfg.assume_centered {
        return Err(Error::Config(
            "kernel-form coding-rate gradient supports only assume_centered".into(),
        ));
    }
    if real_batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let batch_m = match gen {
        GenMode::Sampled { batch_m } => batch_m,
        // exact mode still needs finite batches for the kernel trick; use the
        // real batch size
        GenMode::Exact => real_batch.len(),
    };
    if batch_m != real_batch.len() {
        return Err(Error::BatchSizeMismatch {
            left: batch_m,
            right: real_batch.len(),
        });
    }
    let x_batch = base_batch(spec, params, batch_m, seed)?;
    let m = batch_m as f64;
    let d = feature_dim as f64;
    let a = d / (2.0 * m * cfg.eps_sq);
    let b = d / (m * cfg.eps_sq);

    let t_states: Vec<usize> = x_batch
        .states()
        .iter()
        .chain(real_batch.states())
        .copied()
        .collect();
    let gram = |rows: &[usize], cols: &[usize]| -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| kernel(rows[i], cols[j]))
    };
    let k_tt = gram(&t_states, &t_states);
    let k_xx = gram(x_batch.states(), x_batch.states());
    let eye_t = DMatrix::identity(t_states.len(), t_states.len());
    let eye_x = DMatrix::identity(batch_m, batch_m);
    let chol_t = (eye_t + &k_tt * a)
        .cholesky()
        .ok_or(Error::NonFinite("kernel Gram factorization"))?;
    let chol_x = (eye_x + &k_xx * b)
        .cholesky()
        .ok_or(Error::NonFinite("kernel Gram factorization"))?;

    let n_states = 1usize << spec.n_qubits();
    let table: Vec<f64> = (0..n_states)
        .map(|x| {
            let kxt = nalgebra::DVector::from_fn(t_states.len(), |i, _| kernel(x, t_states[i]));
            let kxx_vec =
                nalgebra::DVector::from_fn(batch_m, |i, _| kernel(x, x_batch.states()[i]));
            let s_a = kernel(x, x) - a * kxt.dot(&chol_t.solve(&kxt));
            let s_b = kernel(x, x) - b * kxx_vec.dot(&chol_x.solve(&kxx_vec));
            s_a - s_b
        })
        .collect();

    let scale = d / (8.0 * cfg.eps_sq);
    let (grad, drawn) =
        sweep_parameters(spec, params, gen, seed, &[table], |diff| scale * diff[0])?;
    GradEstimate::checked(grad, 1 + drawn)
}

/// Deep-kernel MMD gradient: the image-space MMD plumbing with the kernel
/// evaluated on the frozen net's features.
pub fn grad_deep_mmd(
    spec: &CircuitSpec,
    params: &ParamVector,
    net: &MlpNet,
    kernel: &crate::kernels::RbfKernel,
    gen: GenMode,
    real: RealSide,
    seed: u64,
) -> Result<GradEstimate> {
    if net.kind() != NetKind::FeatureMapper {
        return Err(Error::NetArchitecture(
            "deep-kernel MMD gradient needs a feature mapper",
        ));
    }
    let features = all_state_features(net, spec.n_qubits())?;
    let table = BitKernelTable::from_feature_columns(kernel, &features);
    grad_mmd(spec, params, &table, gen, real, seed)
}

/// Eval-mode features of every basis state, one column per outcome.
pub fn all_state_features(net: &MlpNet, n_bits: usize) -> Result<DMatrix<f64>> {
    let all = SampleBatch::new(n_bits, (0..1usize << n_bits).collect())?;
    net.features_eval(&all.to_real_columns())
}

/// Eval-mode clamped log-scores of every basis state.
pub fn all_state_ln_scores(net: &MlpNet, n_bits: usize) -> Result<Vec<f64>> {
    let all = SampleBatch::new(n_bits, (0..1usize << n_bits).collect())?;
    Ok(net
        .scores_eval(&all.to_real_columns())?
        .into_iter()
        .map(|s| clamp_score(s).ln())
        .collect())
}
