//! Small feed-forward networks with hand-rolled reverse-mode differentiation
//! and an Adam optimizer.
//!
//! Two fixed templates are provided: a scorer head ending in
//! `Linear(2,1)-Sigmoid` (the GAN discriminator) and a feature mapper ending
//! at the 2-unit BatchNorm (the kernel / coding-rate feature map). Inputs are
//! column matrices: one sample per column, bits cast to reals in `{0,1}`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;
/// Arguments of `ln D` and `ln(1 - D)` are clamped to this band.
pub const SCORE_CLAMP: f64 = 1e-7;

pub const NET_CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetKind {
    /// Ends in `Linear(2,1)-Sigmoid`; scores in (0,1).
    Scorer,
    /// Ends at the 2-unit BatchNorm; features in R^2.
    FeatureMapper,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Layer {
    Linear {
        // out x in
        weight: DMatrix<f64>,
        bias: DVector<f64>,
    },
    BatchNorm {
        gamma: DVector<f64>,
        beta: DVector<f64>,
        running_mean: DVector<f64>,
        running_var: DVector<f64>,
    },
    Relu,
    Sigmoid,
}

impl Layer {
    fn linear(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Layer::Linear {
            weight: DMatrix::from_fn(out_dim, in_dim, |_, _| rng.gen_range(-bound..bound)),
            bias: DVector::zeros(out_dim),
        }
    }

    fn batch_norm(dim: usize) -> Self {
        Layer::BatchNorm {
            gamma: DVector::from_element(dim, 1.0),
            beta: DVector::zeros(dim),
            running_mean: DVector::zeros(dim),
            running_var: DVector::from_element(dim, 1.0),
        }
    }

    fn param_count(&self) -> usize {
        match self {
            Layer::Linear { weight, bias } => weight.len() + bias.len(),
            Layer::BatchNorm { gamma, beta, .. } => gamma.len() + beta.len(),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpNet {
    kind: NetKind,
    input_size: usize,
    layers: Vec<Layer>,
    mode: Mode,
    /// Output after this layer index is the 2-d feature vector.
    feature_layer: usize,
}

enum LayerCache {
    Linear {
        input: DMatrix<f64>,
    },
    BatchNorm {
        xhat: DMatrix<f64>,
        inv_std: DVector<f64>,
        batch_stats: bool,
    },
    Relu {
        mask: DMatrix<f64>,
    },
    Sigmoid {
        output: DMatrix<f64>,
    },
}

/// Per-layer activations recorded by a cached forward pass.
pub struct ForwardTrace {
    caches: Vec<LayerCache>,
    activations: Vec<DMatrix<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &DMatrix<f64> {
        self.activations.last().expect("trace has the input at least")
    }
}

impl MlpNet {
    /// `Linear(in,4)-BN-ReLU / Linear(4,4)-BN-ReLU / Linear(4,2)-BN /
    /// Linear(2,1)-Sigmoid`.
    pub fn scorer(input_size: usize, rng: &mut impl Rng) -> Self {
        let layers = vec![
            Layer::linear(input_size, 4, rng),
            Layer::batch_norm(4),
            Layer::Relu,
            Layer::linear(4, 4, rng),
            Layer::batch_norm(4),
            Layer::Relu,
            Layer::linear(4, 2, rng),
            Layer::batch_norm(2),
            Layer::linear(2, 1, rng),
            Layer::Sigmoid,
        ];
        Self {
            kind: NetKind::Scorer,
            input_size,
            layers,
            mode: Mode::Train,
            feature_layer: 7,
        }
    }

    /// Scorer template truncated after the 2-unit BatchNorm.
    pub fn feature_mapper(input_size: usize, rng: &mut impl Rng) -> Self {
        let layers = vec![
            Layer::linear(input_size, 4, rng),
            Layer::batch_norm(4),
            Layer::Relu,
            Layer::linear(4, 4, rng),
            Layer::batch_norm(4),
            Layer::Relu,
            Layer::linear(4, 2, rng),
            Layer::batch_norm(2),
        ];
        Self {
            kind: NetKind::FeatureMapper,
            input_size,
            layers,
            mode: Mode::Train,
            feature_layer: 7,
        }
    }

    pub fn kind(&self) -> NetKind {
        self.kind
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn feature_dim(&self) -> usize {
        2
    }

    fn check_input(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.nrows() != self.input_size {
            return Err(Error::DimensionMismatch {
                context: "network input width",
                left: x.nrows(),
                right: self.input_size,
            });
        }
        if x.ncols() == 0 {
            return Err(Error::EmptyBatch);
        }
        Ok(())
    }

    /// Forward pass in the current mode; train mode updates BatchNorm running
    /// statistics. Returns per-layer caches for [`MlpNet::backward`].
    pub fn forward_cached(&mut self, x: &DMatrix<f64>) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let batch_stats = self.mode == Mode::Train;
        let mut activations = vec![x.clone()];
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &mut self.layers {
            let (next, cache) = match layer {
                Layer::Linear { weight, bias } => {
                    let mut out = &*weight * &cur;
                    for mut col in out.column_iter_mut() {
                        col += &*bias;
                    }
                    (
                        out,
                        LayerCache::Linear {
                            input: cur.clone(),
                        },
                    )
                }
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                } => {
                    let m = cur.ncols() as f64;
                    let (mean, var) = if batch_stats {
                        let mean = DVector::from_fn(cur.nrows(), |j, _| cur.row(j).sum() / m);
                        let var = DVector::from_fn(cur.nrows(), |j, _| {
                            cur.row(j)
                                .iter()
                                .map(|v| (v - mean[j]) * (v - mean[j]))
                                .sum::<f64>()
                                / m
                        });
                        // running stats use the unbiased variance
                        let unbias = if cur.ncols() > 1 {
                            m / (m - 1.0)
                        } else {
                            1.0
                        };
                        *running_mean = &*running_mean * (1.0 - BN_MOMENTUM) + &mean * BN_MOMENTUM;
                        *running_var =
                            &*running_var * (1.0 - BN_MOMENTUM) + &var * (BN_MOMENTUM * unbias);
                        (mean, var)
                    } else {
                        (running_mean.clone(), running_var.clone())
                    };
                    let inv_std = var.map(|v| 1.0 / (v + BN_EPS).sqrt());
                    let mut xhat = cur.clone();
                    for j in 0..xhat.nrows() {
                        for k in 0..xhat.ncols() {
                            xhat[(j, k)] = (xhat[(j, k)] - mean[j]) * inv_std[j];
                        }
                    }
                    let mut out = xhat.clone();
                    for j in 0..out.nrows() {
                        for k in 0..out.ncols() {
                            out[(j, k)] = gamma[j] * out[(j, k)] + beta[j];
                        }
                    }
                    (
                        out,
                        LayerCache::BatchNorm {
                            xhat,
                            inv_std,
                            batch_stats,
                        },
                    )
                }
                Layer::Relu => {
                    let mask = cur.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                    (cur.component_mul(&mask), LayerCache::Relu { mask })
                }
                Layer::Sigmoid => {
                    let out = cur.map(|v| 1.0 / (1.0 + (-v).exp()));
                    (
                        out.clone(),
                        LayerCache::Sigmoid { output: out },
                    )
                }
            };
            activations.push(next.clone());
            caches.push(cache);
            cur = next;
        }
        Ok(ForwardTrace {
            caches,
            activations,
        })
    }

    /// Forward in the current mode, discarding caches.
    pub fn forward(&mut self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.forward_cached(x)?.output().clone())
    }

    fn forward_eval_upto(&self, x: &DMatrix<f64>, last_layer: usize) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &self.layers[..=last_layer] {
            cur = match layer {
                Layer::Linear { weight, bias } => {
                    let mut out = weight * &cur;
                    for mut col in out.column_iter_mut() {
                        col += bias;
                    }
                    out
                }
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                } => {
                    let inv_std = running_var.map(|v| 1.0 / (v + BN_EPS).sqrt());
                    DMatrix::from_fn(cur.nrows(), cur.ncols(), |j, k| {
                        gamma[j] * (cur[(j, k)] - running_mean[j]) * inv_std[j] + beta[j]
                    })
                }
                Layer::Relu => cur.map(|v| v.max(0.0)),
                Layer::Sigmoid => cur.map(|v| 1.0 / (1.0 + (-v).exp())),
            };
        }
        Ok(cur)
    }

    /// Eval-semantics forward through the whole net (running BN statistics;
    /// a deterministic per-sample map). Does not touch network state.
    pub fn forward_eval(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.forward_eval_upto(x, self.layers.len() - 1)
    }

    /// Eval-semantics scores of a scorer net, flattened to one value per
    /// sample.
    pub fn scores_eval(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if self.kind != NetKind::Scorer {
            return Err(Error::NetArchitecture("scores need a scorer head"));
        }
        Ok(self.forward_eval(x)?.row(0).iter().copied().collect())
    }

    /// Eval-semantics 2-d features (output of the 2-unit BatchNorm).
    pub fn features_eval(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.forward_eval_upto(x, self.feature_layer)
    }

    /// Reverse-mode pass. `grad_output` is dLoss/dOutput of the traced
    /// forward; returns flat parameter gradients (aligned with
    /// [`MlpNet::params_flat`]) and dLoss/dInput.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        grad_output: &DMatrix<f64>,
    ) -> Result<(Vec<f64>, DMatrix<f64>)> {
        if trace.caches.len() != self.layers.len() {
            return Err(Error::NetArchitecture("trace does not match network"));
        }
        let mut grads = vec![0.0; self.n_params()];
        let mut offset = self.n_params();
        let mut up = grad_output.clone();
        for (layer, cache) in self.layers.iter().zip(&trace.caches).rev() {
            offset -= layer.param_count();
            match (layer, cache) {
                (Layer::Linear { weight, .. }, LayerCache::Linear { input }) => {
                    let dw = &up * input.transpose();
                    let db = DVector::from_fn(up.nrows(), |j, _| up.row(j).sum());
                    let slot = &mut grads[offset..offset + layer.param_count()];
                    slot[..dw.len()].copy_from_slice(dw.as_slice());
                    slot[dw.len()..].copy_from_slice(db.as_slice());
                    up = weight.transpose() * up;
                }
                (
                    Layer::BatchNorm { gamma, .. },
                    LayerCache::BatchNorm {
                        xhat,
                        inv_std,
                        batch_stats,
                    },
                ) => {
                    let m = up.ncols() as f64;
                    let dgamma = DVector::from_fn(up.nrows(), |j, _| {
                        up.row(j)
                            .iter()
                            .zip(xhat.row(j).iter())
                            .map(|(g, x)| g * x)
                            .sum()
                    });
                    let dbeta = DVector::from_fn(up.nrows(), |j, _| up.row(j).sum());
                    let slot = &mut grads[offset..offset + layer.param_count()];
                    slot[..dgamma.len()].copy_from_slice(dgamma.as_slice());
                    slot[dgamma.len()..].copy_from_slice(dbeta.as_slice());

                    let mut dx = DMatrix::zeros(up.nrows(), up.ncols());
                    for j in 0..up.nrows() {
                        if *batch_stats {
                            // batch statistics were differentiated through
                            let sum_dy: f64 = up.row(j).iter().map(|g| g * gamma[j]).sum();
                            let sum_dy_xhat: f64 = up
                                .row(j)
                                .iter()
                                .zip(xhat.row(j).iter())
                                .map(|(g, x)| g * gamma[j] * x)
                                .sum();
                            for k in 0..up.ncols() {
                                let dxhat = up[(j, k)] * gamma[j];
                                dx[(j, k)] = inv_std[j] / m
                                    * (m * dxhat - sum_dy - xhat[(j, k)] * sum_dy_xhat);
                            }
                        } else {
                            for k in 0..up.ncols() {
                                dx[(j, k)] = up[(j, k)] * gamma[j] * inv_std[j];
                            }
                        }
                    }
                    up = dx;
                }
                (Layer::Relu, LayerCache::Relu { mask }) => {
                    up = up.component_mul(mask);
                }
                (Layer::Sigmoid, LayerCache::Sigmoid { output }) => {
                    up = DMatrix::from_fn(up.nrows(), up.ncols(), |j, k| {
                        up[(j, k)] * output[(j, k)] * (1.0 - output[(j, k)])
                    });
                }
                _ => return Err(Error::NetArchitecture("trace does not match network")),
            }
        }
        Ok((grads, up))
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Trainable parameters as one flat vector: per layer, Linear weights
    /// (column-major) then bias; BatchNorm gamma then beta. Running statistics
    /// are state, not parameters.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for layer in &self.layers {
            match layer {
                Layer::Linear { weight, bias } => {
                    out.extend_from_slice(weight.as_slice());
                    out.extend_from_slice(bias.as_slice());
                }
                Layer::BatchNorm { gamma, beta, .. } => {
                    out.extend_from_slice(gamma.as_slice());
                    out.extend_from_slice(beta.as_slice());
                }
                _ => {}
            }
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                context: "flat parameter length",
                left: flat.len(),
                right: self.n_params(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            match layer {
                Layer::Linear { weight, bias } => {
                    let wl = weight.len();
                    weight.as_mut_slice().copy_from_slice(&flat[offset..offset + wl]);
                    offset += wl;
                    let bl = bias.len();
                    bias.as_mut_slice().copy_from_slice(&flat[offset..offset + bl]);
                    offset += bl;
                }
                Layer::BatchNorm { gamma, beta, .. } => {
                    let gl = gamma.len();
                    gamma.as_mut_slice().copy_from_slice(&flat[offset..offset + gl]);
                    offset += gl;
                    let bl = beta.len();
                    beta.as_mut_slice().copy_from_slice(&flat[offset..offset + bl]);
                    offset += bl;
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct NetCheckpoint<'a> {
            version: u32,
            net: &'a MlpNet,
        }
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(
            file,
            &NetCheckpoint {
                version: NET_CHECKPOINT_VERSION,
                net: self,
            },
        )?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct NetCheckpoint {
            version: u32,
            net: MlpNet,
        }
        let file = std::fs::File::open(path)?;
        let ckpt: NetCheckpoint =
            serde_json::from_reader(file).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ckpt.version != NET_CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported net checkpoint version {}",
                ckpt.version
            )));
        }
        Ok(ckpt.net)
    }
}

/// Clamps a score into `[SCORE_CLAMP, 1 - SCORE_CLAMP]` before a logarithm.
pub fn clamp_score(s: f64) -> f64 {
    s.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP)
}

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// One update step: `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                context: "Adam parameter/gradient length",
                left: params.len().max(grads.len()),
                right: self.m.len(),
            });
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_input(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeds::stream(seed, &[99]);
        DMatrix::from_fn(rows, cols, |_, _| if rng.gen::<bool>() { 1.0 } else { 0.0 })
    }

    #[test]
    fn scorer_output_is_in_unit_interval() {
        let mut net = MlpNet::scorer(4, &mut seeds::stream(1, &[0]));
        let x = random_input(4, 8, 3);
        let out = net.forward(&x).unwrap();
        assert_eq!(out.nrows(), 1);
        assert_eq!(out.ncols(), 8);
        for &s in out.iter() {
            assert!(s > 0.0 && s < 1.0);
        }
    }

    #[test]
    fn feature_output_dimension_is_two() {
        let net = MlpNet::feature_mapper(6, &mut seeds::stream(2, &[0]));
        let x = random_input(6, 5, 4);
        let f = net.features_eval(&x).unwrap();
        assert_eq!((f.nrows(), f.ncols()), (2, 5));
    }

    #[test]
    fn eval_mode_is_a_per_sample_map() {
        let mut net = MlpNet::scorer(4, &mut seeds::stream(3, &[0]));
        // push some batch statistics into the running stats first
        let warm = random_input(4, 16, 5);
        net.forward(&warm).unwrap();

        let x = random_input(4, 3, 6);
        let mut doubled = DMatrix::zeros(4, 6);
        doubled.columns_mut(0, 3).copy_from(&x);
        doubled.columns_mut(3, 3).copy_from(&x);
        let single = net.scores_eval(&x).unwrap();
        let twice = net.scores_eval(&doubled).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(single[i], twice[i], epsilon = 1e-14);
            assert_abs_diff_eq!(single[i], twice[i + 3], epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_net_scores_one_half() {
        let mut net = MlpNet::scorer(4, &mut seeds::stream(4, &[0]));
        let zeros = vec![0.0; net.n_params()];
        net.set_params_flat(&zeros).unwrap();
        // restore BN scale to 1 so the map stays well-defined
        let mut p = net.params_flat();
        // gamma entries are the first block of each BatchNorm layer; rebuild
        // instead: fresh net with zero Linear weights only.
        let mut net = MlpNet::scorer(4, &mut seeds::stream(4, &[0]));
        p = net.params_flat();
        // Linear(4,4): 16+4, BN 4+4, Linear(4,4) 16+4, BN 4+4, Linear(4,2) 8+2, BN 2+2, Linear(2,1) 2+1
        // zero all Linear weights/biases, keep BN gamma=1, beta=0
        let mut offset = 0;
        for (len, is_linear) in [
            (16 + 4, true),
            (4 + 4, false),
            (16 + 4, true),
            (4 + 4, false),
            (8 + 2, true),
            (2 + 2, false),
            (2 + 1, true),
        ] {
            if is_linear {
                for v in &mut p[offset..offset + len] {
                    *v = 0.0;
                }
            }
            offset += len;
        }
        net.set_params_flat(&p).unwrap();
        let scores = net.scores_eval(&random_input(4, 4, 7)).unwrap();
        for s in scores {
            assert_abs_diff_eq!(s, 0.5, epsilon = 1e-12);
        }
    }

    /// Finite-difference oracle over every parameter of the net.
    fn check_backward_against_fd(mut net: MlpNet, batch_cols: usize, seed: u64) {
        let x = random_input(net.input_size(), batch_cols, seed);
        // scalar loss: weighted sum of outputs, fixed weights
        let mut wrng = seeds::stream(seed, &[17]);
        let trace = net.forward_cached(&x).unwrap();
        let weights = DMatrix::from_fn(trace.output().nrows(), trace.output().ncols(), |_, _| {
            wrng.gen_range(-1.0..1.0)
        });

        let loss_of = |net: &mut MlpNet, x: &DMatrix<f64>| -> f64 {
            // fresh copy so running-stat updates do not leak between probes
            let mut probe = net.clone();
            let t = probe.forward_cached(x).unwrap();
            t.output().component_mul(&weights).sum()
        };

        let (grads, _) = net.backward(&trace, &weights).unwrap();
        let base_params = net.params_flat();
        let h = 1e-5;
        for i in 0..base_params.len() {
            let mut up = base_params.clone();
            up[i] += h;
            let mut net_up = net.clone();
            net_up.set_params_flat(&up).unwrap();
            let lu = loss_of(&mut net_up, &x);

            let mut dn = base_params.clone();
            dn[i] -= h;
            let mut net_dn = net.clone();
            net_dn.set_params_flat(&dn).unwrap();
            let ld = loss_of(&mut net_dn, &x);

            let fd = (lu - ld) / (2.0 * h);
            let tol = 1e-5 * fd.abs().max(1.0);
            assert!(
                (grads[i] - fd).abs() < tol,
                "param {i}: backward {} vs fd {fd}",
                grads[i]
            );
        }
    }

    #[test]
    fn backward_matches_finite_difference_scorer() {
        let net = MlpNet::scorer(4, &mut seeds::stream(8, &[0]));
        check_backward_against_fd(net, 4, 21);
    }

    #[test]
    fn backward_matches_finite_difference_feature_mapper() {
        let net = MlpNet::feature_mapper(6, &mut seeds::stream(9, &[0]));
        check_backward_against_fd(net, 4, 22);
    }

    #[test]
    fn backward_matches_finite_difference_eval_mode() {
        let mut net = MlpNet::scorer(4, &mut seeds::stream(10, &[0]));
        net.forward(&random_input(4, 16, 11)).unwrap(); // warm running stats
        net.set_mode(Mode::Eval);
        check_backward_against_fd(net, 4, 23);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut net = MlpNet::scorer(4, &mut seeds::stream(12, &[0]));
        let x = random_input(4, 4, 13);
        let trace = net.forward_cached(&x).unwrap();
        let zeros = DMatrix::zeros(1, 4);
        let (grads, dx) = net.backward(&trace, &zeros).unwrap();
        assert!(grads.iter().all(|&g| g == 0.0));
        assert!(dx.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn relu_gradient_is_zero_at_negative_preactivation() {
        let mut net = MlpNet::feature_mapper(2, &mut seeds::stream(14, &[0]));
        let x = random_input(2, 4, 15);
        let trace = net.forward_cached(&x).unwrap();
        // locate the first ReLU cache and confirm masked entries kill gradient
        let up = DMatrix::from_element(2, 4, 1.0);
        let (_, _) = net.backward(&trace, &up).unwrap();
        if let LayerCache::Relu { mask } = &trace.caches[2] {
            assert!(mask.iter().all(|&m| m == 0.0 || m == 1.0));
            assert!(mask.iter().any(|&m| m == 0.0), "want a dead unit in the probe");
        } else {
            panic!("layer 2 should be ReLU");
        }
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let mut net = MlpNet::scorer(4, &mut seeds::stream(16, &[0]));
        assert!(net.forward(&DMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut params = vec![1.0, -2.0, 0.5];
        let mut adam = AdamState::new(3, 0.1);
        adam.step(&mut params, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(params, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn adam_constant_gradient_approaches_lr_sign() {
        let mut params = vec![0.0];
        let mut adam = AdamState::new(1, 0.01);
        let mut last = params[0];
        for _ in 0..500 {
            last = params[0];
            adam.step(&mut params, &[3.0]).unwrap();
        }
        let update = last - params[0];
        assert_abs_diff_eq!(update, 0.01, epsilon = 1e-4);
    }

    #[test]
    fn adam_single_step_hand_computed() {
        // m = 0.1*g, v = 0.001*g^2, m_hat = g, v_hat = g^2
        // update = lr * g / (|g| + eps)
        let mut params = vec![0.7];
        let mut adam = AdamState::new(1, 0.05);
        adam.step(&mut params, &[2.0]).unwrap();
        let expected = 0.7 - 0.05 * 2.0 / (2.0 + 1e-8);
        assert_abs_diff_eq!(params[0], expected, epsilon = 1e-12);
    }

    #[test]
    fn checkpoint_roundtrip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let mut net = MlpNet::scorer(6, &mut seeds::stream(18, &[0]));
        net.forward(&random_input(6, 8, 19)).unwrap(); // non-trivial running stats
        net.save(&path).unwrap();
        let loaded = MlpNet::load(&path).unwrap();
        let a = net.params_flat();
        let b = loaded.params_flat();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let probe = random_input(6, 4, 20);
        assert_eq!(
            net.scores_eval(&probe).unwrap(),
            loaded.scores_eval(&probe).unwrap()
        );
    }
}
