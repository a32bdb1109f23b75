//! Training orchestration: the five schemes, the two-step fine-tune
//! protocol, multi-seed runs, and learning-rate grids.
//!
//! Each generator iteration runs `d_steps_per_g` discriminator Adam updates
//! on the scheme's adversarial objective, then one generator Adam update on
//! the scheme's parameter-shift gradient estimate, evaluating the exact
//! learnt distribution every `eval_interval` iterations. All randomness is
//! derived from `root_seed`, so a run is bit-reproducible.
//!
//! With `exact_pstar` set (the full-knowledge control), real-data
//! expectations inside the generator gradient become exact sums over the
//! target table, and discriminator updates see the full valid-pattern support
//! as their real batch (the target is uniform on that support, so the
//! weighted sum is a plain batch mean).

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bas::{sample_target, target_distribution, BasSpec};
use crate::circuit::{generate, save_checkpoint, CircuitSpec, ParamVector};
use crate::dist::SampleBatch;
use crate::error::{Error, Result};
use crate::gradients::{
    grad_deep_mmd, grad_gan_ns, grad_mcr2_explicit, grad_mmd, GenMode, RealSide,
};
use crate::kernels::{BitKernelTable, RbfKernel, DEFAULT_BANDWIDTHS};
use crate::losses::{mcr2_feature_grad, mmd_feature_grad, Mcr2Config};
use crate::metrics::{evaluate, write_trace_csv, EvalReport};
use crate::neural::{clamp_score, AdamState, MlpNet, NetKind};
use crate::seeds;

/// Seed tags of a training run's streams.
const TAG_PARAM_INIT: u64 = 0;
const TAG_NET_INIT: u64 = 1;
const TAG_D_STEP: u64 = 3;
const TAG_G_STEP: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    MmdRbf,
    GanNs,
    GanMcr2,
    InterNsMcr2,
    DnnMmd,
    /// MMD-RBF continuation from a previous run's parameters.
    FineTune,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::MmdRbf => "mmd_rbf",
            Scheme::GanNs => "gan_ns",
            Scheme::GanMcr2 => "gan_mcr2",
            Scheme::InterNsMcr2 => "inter_ns_mcr2",
            Scheme::DnnMmd => "dnn_mmd",
            Scheme::FineTune => "fine_tune",
        }
    }

    fn net_kind(&self) -> Option<NetKind> {
        match self {
            Scheme::MmdRbf | Scheme::FineTune => None,
            Scheme::GanNs | Scheme::InterNsMcr2 => Some(NetKind::Scorer),
            Scheme::GanMcr2 | Scheme::DnnMmd => Some(NetKind::FeatureMapper),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    /// Interpolation weight of the coding-rate term (InterNsMcr2 only).
    pub alpha: f64,
    pub batch_m: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub d_steps_per_g: usize,
    pub iterations: usize,
    pub exact_pstar: bool,
    pub root_seed: u64,
    pub eval_interval: usize,
    pub bandwidths: Vec<f64>,
    pub eps_sq: f64,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            alpha: 0.0,
            batch_m: 4,
            lr_g: 1e-3,
            lr_d: 1e-3,
            d_steps_per_g: 2,
            iterations: 1000,
            exact_pstar: false,
            root_seed: 0,
            eval_interval: 10,
            bandwidths: DEFAULT_BANDWIDTHS.to_vec(),
            eps_sq: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.batch_m < 1 {
            return Err(Error::Config("batch_m must be at least 1".into()));
        }
        if !(self.lr_g > 0.0) || !(self.lr_d > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.eval_interval < 1 {
            return Err(Error::Config("eval_interval must be at least 1".into()));
        }
        if !(self.eps_sq > 0.0) {
            return Err(Error::Config("eps_sq must be positive".into()));
        }
        Ok(())
    }

    fn kernel(&self) -> Result<RbfKernel> {
        RbfKernel::new(self.bandwidths.clone())
    }

    fn mcr2(&self) -> Mcr2Config {
        Mcr2Config {
            eps_sq: self.eps_sq,
            ..Mcr2Config::default()
        }
    }
}

/// Outcome of one training run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: Vec<EvalReport>,
    pub final_params: ParamVector,
    pub final_net: Option<MlpNet>,
    pub seed: u64,
}

impl RunResult {
    pub fn final_tv(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.tv)
    }
}

/// Trains a fresh circuit under `cfg`.
pub fn train(cfg: &SchemeConfig, circuit: &CircuitSpec, bas: &BasSpec) -> Result<RunResult> {
    train_from(cfg, circuit, bas, None, 0)
}

/// Continues a previous run with an MMD-RBF (or any) configuration. The new
/// trace starts after the previous one and both are returned concatenated.
pub fn fine_tune(
    prior: &RunResult,
    ft_cfg: &SchemeConfig,
    circuit: &CircuitSpec,
    bas: &BasSpec,
) -> Result<RunResult> {
    let offset = prior.trace.last().map_or(0, |r| r.iteration);
    let mut continued = train_from(ft_cfg, circuit, bas, Some(prior.final_params.clone()), offset)?;
    let mut trace = prior.trace.clone();
    // the continuation re-evaluates the starting point; drop the duplicate
    trace.extend(continued.trace.drain(..).skip(usize::from(!trace.is_empty())));
    Ok(RunResult {
        trace,
        final_params: continued.final_params,
        final_net: continued.final_net,
        seed: ft_cfg.root_seed,
    })
}

fn train_from(
    cfg: &SchemeConfig,
    circuit: &CircuitSpec,
    bas: &BasSpec,
    initial_params: Option<ParamVector>,
    iteration_offset: usize,
) -> Result<RunResult> {
    cfg.validate()?;
    if circuit.n_qubits() != bas.n_qubits() {
        return Err(Error::DimensionMismatch {
            context: "circuit qubits vs BAS pixels",
            left: circuit.n_qubits(),
            right: bas.n_qubits(),
        });
    }
    let root = cfg.root_seed;
    let mut params = match initial_params {
        Some(p) => {
            if p.len() != circuit.param_count() {
                return Err(Error::ParamLength {
                    got: p.len(),
                    expected: circuit.param_count(),
                });
            }
            p
        }
        None => circuit.random_params(&mut seeds::stream(root, &[TAG_PARAM_INIT])),
    };
    let mut net = cfg
        .scheme
        .net_kind()
        .map(|kind| match kind {
            NetKind::Scorer => MlpNet::scorer(bas.n_qubits(), &mut seeds::stream(root, &[TAG_NET_INIT])),
            NetKind::FeatureMapper => {
                MlpNet::feature_mapper(bas.n_qubits(), &mut seeds::stream(root, &[TAG_NET_INIT]))
            }
        });
    let mut adam_g = AdamState::new(params.len(), cfg.lr_g);
    let mut adam_d = net
        .as_ref()
        .map(|n| AdamState::new(n.n_params(), cfg.lr_d));

    let kernel = cfg.kernel()?;
    let image_table = match cfg.scheme {
        Scheme::MmdRbf | Scheme::FineTune => Some(BitKernelTable::build(&kernel, bas.n_qubits())),
        _ => None,
    };
    let target = target_distribution(bas);
    let support_batch = SampleBatch::new(bas.n_qubits(), bas.valid_states())?;
    let mcr2_cfg = cfg.mcr2();

    let mut trace = Vec::new();
    let record = |it: usize, params: &ParamVector, trace: &mut Vec<EvalReport>| -> Result<()> {
        let mut report = evaluate(circuit, params, bas)?;
        report.iteration = iteration_offset + it;
        if !report.tv.is_finite() {
            return Err(Error::TrainingAborted {
                iteration: iteration_offset + it,
                reason: "non-finite total variation".into(),
            });
        }
        trace.push(report);
        Ok(())
    };
    record(0, &params, &mut trace)?;

    for it in 1..=cfg.iterations {
        let it_tag = it as u64;
        if let (Some(net), Some(adam_d)) = (net.as_mut(), adam_d.as_mut()) {
            for d_step in 0..cfg.d_steps_per_g {
                let ds = d_step as u64;
                let gen_batch = generate(
                    circuit,
                    &params,
                    cfg.batch_m,
                    &mut seeds::stream(root, &[TAG_D_STEP, it_tag, ds, 0]),
                )?;
                let real_batch = if cfg.exact_pstar {
                    support_batch.clone()
                } else {
                    sample_target(
                        bas,
                        cfg.batch_m,
                        &mut seeds::stream(root, &[TAG_D_STEP, it_tag, ds, 1]),
                    )
                };
                update_discriminator(
                    cfg.scheme,
                    net,
                    adam_d,
                    &gen_batch,
                    &real_batch,
                    &kernel,
                    &mcr2_cfg,
                )
                .map_err(|e| Error::TrainingAborted {
                    iteration: iteration_offset + it,
                    reason: format!("discriminator update failed: {e}"),
                })?;
            }
        }

        let step_seed = seeds::child_seed(root, &[TAG_G_STEP, it_tag]);
        let gen_mode = GenMode::Sampled {
            batch_m: cfg.batch_m,
        };
        let real_batch_g;
        let real_side = if cfg.exact_pstar {
            RealSide::Exact(&target)
        } else {
            real_batch_g = sample_target(
                bas,
                cfg.batch_m,
                &mut seeds::stream(root, &[TAG_G_STEP, it_tag, 1]),
            );
            RealSide::Batch(&real_batch_g)
        };

        let grad = match cfg.scheme {
            Scheme::MmdRbf | Scheme::FineTune => grad_mmd(
                circuit,
                &params,
                image_table.as_ref().expect("image table built for MMD"),
                gen_mode,
                real_side,
                step_seed,
            )?
            .grad,
            Scheme::GanNs => {
                grad_gan_ns(circuit, &params, net.as_ref().unwrap(), gen_mode, step_seed)?.grad
            }
            Scheme::GanMcr2 => {
                grad_mcr2_explicit(
                    circuit,
                    &params,
                    net.as_ref().unwrap(),
                    real_side,
                    &mcr2_cfg,
                    gen_mode,
                    step_seed,
                )?
                .grad
            }
            Scheme::InterNsMcr2 => {
                let ns = grad_gan_ns(circuit, &params, net.as_ref().unwrap(), gen_mode, step_seed)?;
                let dr = grad_mcr2_explicit(
                    circuit,
                    &params,
                    net.as_ref().unwrap(),
                    real_side,
                    &mcr2_cfg,
                    gen_mode,
                    step_seed,
                )?;
                ns.grad
                    .iter()
                    .zip(&dr.grad)
                    .map(|(a, b)| (1.0 - cfg.alpha) * a + cfg.alpha * b)
                    .collect()
            }
            Scheme::DnnMmd => {
                grad_deep_mmd(
                    circuit,
                    &params,
                    net.as_ref().unwrap(),
                    &kernel,
                    gen_mode,
                    real_side,
                    step_seed,
                )?
                .grad
            }
        };
        adam_g.step(params.as_mut_slice(), &grad)?;

        if it % cfg.eval_interval == 0 || it == cfg.iterations {
            record(it, &params, &mut trace)?;
        }
    }

    Ok(RunResult {
        trace,
        final_params: params,
        final_net: net,
        seed: root,
    })
}

/// One discriminator Adam update for the scheme's adversarial objective.
///
/// Generated and real samples are forwarded as one concatenated batch
/// (columns `[gen | real]`) in train mode. The BatchNorm layers — including
/// the one directly under the scorer head — then normalize over the joint
/// batch; normalizing the two sides separately would standardize away the
/// very statistics the discriminator must separate.
fn update_discriminator(
    scheme: Scheme,
    net: &mut MlpNet,
    adam: &mut AdamState,
    gen_batch: &SampleBatch,
    real_batch: &SampleBatch,
    kernel: &RbfKernel,
    mcr2_cfg: &Mcr2Config,
) -> Result<()> {
    net.set_mode(crate::neural::Mode::Train);
    let m_g = gen_batch.len();
    let m_r = real_batch.len();
    let xg = gen_batch.to_real_columns();
    let xr = real_batch.to_real_columns();
    let mut joint = nalgebra::DMatrix::zeros(xg.nrows(), m_g + m_r);
    joint.columns_mut(0, m_g).copy_from(&xg);
    joint.columns_mut(m_g, m_r).copy_from(&xr);
    let trace = net.forward_cached(&joint)?;
    let out = trace.output();

    let upstream = match scheme {
        Scheme::GanNs | Scheme::InterNsMcr2 => {
            // loss_D = -mean ln D(real) - mean ln(1 - D(gen))
            nalgebra::DMatrix::from_fn(1, m_g + m_r, |_, j| {
                let s = clamp_score(out[(0, j)]);
                if j < m_g {
                    1.0 / (m_g as f64 * (1.0 - s))
                } else {
                    -1.0 / (m_r as f64 * s)
                }
            })
        }
        Scheme::GanMcr2 | Scheme::DnnMmd => {
            // ascend the scheme's feature-space statistic
            let zg = out.columns(0, m_g).into_owned();
            let zr = out.columns(m_g, m_r).into_owned();
            let wg = vec![1.0 / m_g as f64; m_g];
            let wr = vec![1.0 / m_r as f64; m_r];
            let (dzg, dzr) = if scheme == Scheme::GanMcr2 {
                mcr2_feature_grad(&zg, &wg, &zr, &wr, mcr2_cfg)?
            } else {
                mmd_feature_grad(kernel, &zg, &wg, &zr, &wr)?
            };
            let mut up = nalgebra::DMatrix::zeros(out.nrows(), m_g + m_r);
            up.columns_mut(0, m_g).copy_from(&(-dzg));
            up.columns_mut(m_g, m_r).copy_from(&(-dzr));
            up
        }
        Scheme::MmdRbf | Scheme::FineTune => return Ok(()),
    };
    let (flat_grads, _) = net.backward(&trace, &upstream)?;
    if flat_grads.iter().any(|g: &f64| !g.is_finite()) {
        return Err(Error::NonFinite("discriminator gradient"));
    }
    let mut params = net.params_flat();
    adam.step(&mut params, &flat_grads)?;
    net.set_params_flat(&params)?;
    Ok(())
}

/// Per-cell aggregate of a learning-rate grid.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub lr_g: f64,
    pub lr_d: f64,
    pub runs: Vec<RunResult>,
    /// Eval iterations shared by all runs of the cell.
    pub iterations: Vec<usize>,
    pub mean_tv: Vec<f64>,
    pub sd_tv: Vec<f64>,
}

/// Runs `n_seeds` runs for every `(lr_g, lr_d)` cell, aggregating the TV
/// traces into mean and one-standard-deviation bands.
pub fn grid_search(
    base_cfg: &SchemeConfig,
    circuit: &CircuitSpec,
    bas: &BasSpec,
    lr_g_list: &[f64],
    lr_d_list: &[f64],
    n_seeds: usize,
) -> Result<Vec<GridCell>> {
    if lr_g_list.is_empty() || lr_d_list.is_empty() || n_seeds == 0 {
        return Err(Error::Config("grid lists and seed count must be non-empty".into()));
    }
    let mut jobs = Vec::new();
    for (gi, &lr_g) in lr_g_list.iter().enumerate() {
        for (di, &lr_d) in lr_d_list.iter().enumerate() {
            for s in 0..n_seeds {
                jobs.push((gi, di, lr_g, lr_d, s));
            }
        }
    }
    let results: Vec<(usize, usize, RunResult)> = jobs
        .into_par_iter()
        .map(|(gi, di, lr_g, lr_d, s)| -> Result<(usize, usize, RunResult)> {
            let mut cfg = base_cfg.clone();
            cfg.lr_g = lr_g;
            cfg.lr_d = lr_d;
            cfg.root_seed =
                seeds::child_seed(base_cfg.root_seed, &[gi as u64, di as u64, s as u64]);
            Ok((gi, di, train(&cfg, circuit, bas)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for (gi, &lr_g) in lr_g_list.iter().enumerate() {
        for (di, &lr_d) in lr_d_list.iter().enumerate() {
            let runs: Vec<RunResult> = results
                .iter()
                .filter(|(g, d, _)| *g == gi && *d == di)
                .map(|(_, _, r)| r.clone())
                .collect();
            let iterations: Vec<usize> = runs[0].trace.iter().map(|r| r.iteration).collect();
            let n_points = iterations.len();
            let mut mean_tv = vec![0.0; n_points];
            let mut sd_tv = vec![0.0; n_points];
            for (i, mean) in mean_tv.iter_mut().enumerate() {
                let vals: Vec<f64> = runs.iter().map(|r| r.trace[i].tv).collect();
                *mean = vals.iter().sum::<f64>() / vals.len() as f64;
                if vals.len() > 1 {
                    sd_tv[i] = (vals.iter().map(|v| (v - *mean) * (v - *mean)).sum::<f64>()
                        / (vals.len() - 1) as f64)
                        .sqrt();
                }
            }
            cells.push(GridCell {
                lr_g,
                lr_d,
                runs,
                iterations,
                mean_tv,
                sd_tv,
            });
        }
    }
    Ok(cells)
}

/// `scheme_lrg<g>_lrd<d>_seed<s>`, the per-run artifact directory name.
pub fn run_dir_name(scheme: Scheme, lr_g: f64, lr_d: f64, seed: u64) -> String {
    format!("{}_lrg{:e}_lrd{:e}_seed{}", scheme.name(), lr_g, lr_d, seed)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub scheme: Scheme,
    pub seed: u64,
    pub iterations: usize,
    pub final_eval: EvalReport,
}

/// Writes `trace.csv`, `report.json`, `checkpoint.json` and, when a net was
/// trained, `net.json` into `dir`.
pub fn write_run_artifacts(
    run: &RunResult,
    cfg: &SchemeConfig,
    circuit: &CircuitSpec,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_trace_csv(&run.trace, &dir.join("trace.csv"))?;
    let report = RunReport {
        schema_version: 1,
        scheme: cfg.scheme,
        seed: run.seed,
        iterations: cfg.iterations,
        final_eval: run
            .trace
            .last()
            .cloned()
            .ok_or_else(|| Error::Config("empty trace".into()))?,
    };
    let file = std::fs::File::create(dir.join("report.json"))?;
    serde_json::to_writer_pretty(file, &report)?;
    save_checkpoint(circuit, &run.final_params, &dir.join("checkpoint.json"))?;
    if let Some(net) = &run.final_net {
        net.save(&dir.join("net.json"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradients::all_state_features;
    use crate::losses::mcr2_exact;

    fn quick_cfg(scheme: Scheme) -> SchemeConfig {
        let mut cfg = SchemeConfig::new(scheme);
        cfg.iterations = 6;
        cfg.eval_interval = 2;
        cfg.root_seed = 11;
        cfg
    }

    fn bas22() -> (CircuitSpec, BasSpec) {
        (CircuitSpec::ring(4, 3).unwrap(), BasSpec::new(2, 2).unwrap())
    }

    #[test]
    fn runs_are_bit_deterministic() {
        let (circuit, bas) = bas22();
        for scheme in [Scheme::MmdRbf, Scheme::GanNs, Scheme::GanMcr2, Scheme::DnnMmd] {
            let cfg = quick_cfg(scheme);
            let a = train(&cfg, &circuit, &bas).unwrap();
            let b = train(&cfg, &circuit, &bas).unwrap();
            assert_eq!(a.trace, b.trace, "{scheme:?} trace diverged");
            for (x, y) in a
                .final_params
                .as_slice()
                .iter()
                .zip(b.final_params.as_slice())
            {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            if let (Some(na), Some(nb)) = (&a.final_net, &b.final_net) {
                assert_eq!(na.params_flat(), nb.params_flat());
            }
        }
    }

    #[test]
    fn trace_iterations_increase_and_tv_in_range() {
        let (circuit, bas) = bas22();
        let mut cfg = quick_cfg(Scheme::InterNsMcr2);
        cfg.alpha = 0.1;
        let run = train(&cfg, &circuit, &bas).unwrap();
        let mut prev = None;
        for r in &run.trace {
            if let Some(p) = prev {
                assert!(r.iteration > p);
            }
            prev = Some(r.iteration);
            assert!((0.0..=1.0).contains(&r.tv));
            let total = r.invalid_mass + r.mode_masses.iter().sum::<f64>();
            assert!((total - 1.0).abs() < 1e-10);
        }
        // first record is the initial parameters, last is the final iteration
        assert_eq!(run.trace.first().unwrap().iteration, 0);
        assert_eq!(run.trace.last().unwrap().iteration, cfg.iterations);
    }

    #[test]
    fn fine_tune_zero_iterations_keeps_params() {
        let (circuit, bas) = bas22();
        let cfg = quick_cfg(Scheme::GanNs);
        let run = train(&cfg, &circuit, &bas).unwrap();
        let mut ft = SchemeConfig::new(Scheme::FineTune);
        ft.iterations = 0;
        ft.root_seed = 99;
        let tuned = fine_tune(&run, &ft, &circuit, &bas).unwrap();
        for (a, b) in run
            .final_params
            .as_slice()
            .iter()
            .zip(tuned.final_params.as_slice())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(tuned.trace.len(), run.trace.len());
    }

    #[test]
    fn fine_tune_appends_to_trace() {
        let (circuit, bas) = bas22();
        let cfg = quick_cfg(Scheme::GanNs);
        let run = train(&cfg, &circuit, &bas).unwrap();
        let mut ft = SchemeConfig::new(Scheme::FineTune);
        ft.iterations = 4;
        ft.eval_interval = 2;
        ft.root_seed = 99;
        let tuned = fine_tune(&run, &ft, &circuit, &bas).unwrap();
        assert!(tuned.trace.len() > run.trace.len());
        let mut prev = None;
        for r in &tuned.trace {
            if let Some(p) = prev {
                assert!(r.iteration > p, "iterations must stay strictly increasing");
            }
            prev = Some(r.iteration);
        }
        assert_eq!(
            tuned.trace.last().unwrap().iteration,
            run.trace.last().unwrap().iteration + ft.iterations
        );
    }

    #[test]
    fn grid_shape_and_single_seed_mean() {
        let (circuit, bas) = bas22();
        let mut cfg = quick_cfg(Scheme::MmdRbf);
        cfg.iterations = 4;
        let cells = grid_search(&cfg, &circuit, &bas, &[1e-3, 1e-2], &[1e-3], 1).unwrap();
        assert_eq!(cells.len(), 2);
        for cell in &cells {
            assert_eq!(cell.runs.len(), 1);
            assert_eq!(cell.mean_tv.len(), cell.runs[0].trace.len());
            for (m, r) in cell.mean_tv.iter().zip(&cell.runs[0].trace) {
                assert_eq!(*m, r.tv);
            }
            assert!(cell.sd_tv.iter().all(|&s| s == 0.0));
        }
    }

    #[test]
    fn mcr2_discriminator_ascends_coding_rate() {
        // Frozen generator; 50 discriminator steps at a small learning rate
        // should raise the exact coding-rate distance in the median run.
        let (circuit, bas) = bas22();
        let target = target_distribution(&bas);
        let mut deltas = Vec::new();
        for seed in 0..20u64 {
            let params = circuit.random_params(&mut seeds::stream(seed, &[7]));
            let dist = crate::circuit::exact_distribution(&circuit, &params).unwrap();
            let mut net = MlpNet::feature_mapper(4, &mut seeds::stream(seed, &[8]));
            let mut adam = AdamState::new(net.n_params(), 1e-3);
            let cfg = Mcr2Config::default();
            let kernel = RbfKernel::default_mixture();

            let dr_of = |net: &MlpNet| {
                let features = all_state_features(net, 4).unwrap();
                mcr2_exact(&features, &dist, &target, &cfg).unwrap()
            };
            let before = dr_of(&net);
            for step in 0..50u64 {
                let gen_batch = dist.sample(4, &mut seeds::stream(seed, &[9, step]));
                let real_batch = sample_target(&bas, 4, &mut seeds::stream(seed, &[10, step]));
                update_discriminator(
                    Scheme::GanMcr2,
                    &mut net,
                    &mut adam,
                    &gen_batch,
                    &real_batch,
                    &kernel,
                    &cfg,
                )
                .unwrap();
            }
            deltas.push(dr_of(&net) - before);
        }
        deltas.sort_by(f64::total_cmp);
        let median = deltas[deltas.len() / 2];
        assert!(
            median >= 0.0,
            "median coding-rate change {median} should be non-negative"
        );
    }

    #[test]
    fn artifacts_are_written() {
        let (circuit, bas) = bas22();
        let cfg = quick_cfg(Scheme::GanNs);
        let run = train(&cfg, &circuit, &bas).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let run_dir = dir
            .path()
            .join(run_dir_name(cfg.scheme, cfg.lr_g, cfg.lr_d, cfg.root_seed));
        write_run_artifacts(&run, &cfg, &circuit, &run_dir).unwrap();
        for file in ["trace.csv", "report.json", "checkpoint.json", "net.json"] {
            assert!(run_dir.join(file).exists(), "{file} missing");
        }
        let report: RunReport =
            serde_json::from_str(&std::fs::read_to_string(run_dir.join("report.json")).unwrap())
                .unwrap();
        assert_eq!(report.final_eval, *run.trace.last().unwrap());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = SchemeConfig::new(Scheme::InterNsMcr2);
        cfg.alpha = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = SchemeConfig::new(Scheme::MmdRbf);
        cfg.batch_m = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = SchemeConfig::new(Scheme::MmdRbf);
        cfg.lr_g = 0.0;
        assert!(cfg.validate().is_err());
    }
}
