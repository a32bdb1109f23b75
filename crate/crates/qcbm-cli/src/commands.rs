//! Subcommand implementations: `run`, `reproduce`, `eval`.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};

use qcbm_core::bas::{dump_dataset, sample_target};
use qcbm_core::circuit::load_checkpoint;
use qcbm_core::metrics::evaluate;
use qcbm_core::seeds;
use qcbm_core::trainer::{
    fine_tune, grid_search, run_dir_name, train, write_run_artifacts, GridCell, RunResult,
};
use qcbm_core::{BasSpec, CircuitSpec, Scheme, SchemeConfig};

use crate::config::{ExperimentConfig, OUTPUT_ROOT_ENV};

/// Exit status 2: the configuration (file or flags) is invalid.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

pub type CliResult = Result<(), CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn cmd_run(config_path: &Path, dry_run: bool) -> CliResult {
    let cfg = ExperimentConfig::load(config_path).map_err(config_err)?;
    let bas = cfg.bas_spec().map_err(|e| config_err(e.to_string()))?;
    let circuit = cfg.circuit_spec().map_err(|e| config_err(e.to_string()))?;
    let scheme_cfg = cfg.scheme_config();
    if dry_run {
        println!(
            "config OK: {} on BAS({},{}), {} parameters, {} iterations",
            scheme_cfg.scheme.name(),
            bas.height,
            bas.width,
            circuit.param_count(),
            scheme_cfg.iterations
        );
        return Ok(());
    }
    let out_dir = cfg.resolved_output_dir();

    if let Some(grid) = &cfg.grid {
        let cells = grid_search(
            &scheme_cfg,
            &circuit,
            &bas,
            &grid.lr_g_list,
            &grid.lr_d_list,
            grid.n_seeds,
        )
        .context("grid search failed")?;
        for cell in &cells {
            for run in &cell.runs {
                let dir = out_dir.join(run_dir_name(
                    scheme_cfg.scheme,
                    cell.lr_g,
                    cell.lr_d,
                    run.seed,
                ));
                let mut run_cfg = scheme_cfg.clone();
                run_cfg.lr_g = cell.lr_g;
                run_cfg.lr_d = cell.lr_d;
                write_run_artifacts(run, &run_cfg, &circuit, &dir)
                    .context("writing run artifacts")?;
            }
        }
        write_grid_summary(&cells, &out_dir.join("grid_summary.csv"))?;
        println!(
            "grid complete: {} cells x {} seeds -> {}",
            grid.lr_g_list.len() * grid.lr_d_list.len(),
            grid.n_seeds,
            out_dir.display()
        );
        return Ok(());
    }

    let run = if scheme_cfg.scheme == Scheme::FineTune {
        let ckpt_path = cfg
            .scheme
            .init_checkpoint
            .as_ref()
            .expect("validated: fine_tune has init_checkpoint");
        let (ck_circuit, params) = load_checkpoint(ckpt_path)
            .map_err(|e| config_err(format!("init_checkpoint: {e}")))?;
        if ck_circuit.n_qubits() != circuit.n_qubits() || ck_circuit.depth() != circuit.depth() {
            return Err(config_err(format!(
                "init_checkpoint circuit ({} qubits, depth {}) does not match config ({} qubits, depth {})",
                ck_circuit.n_qubits(),
                ck_circuit.depth(),
                circuit.n_qubits(),
                circuit.depth()
            )));
        }
        let prior = RunResult {
            trace: Vec::new(),
            final_params: params,
            final_net: None,
            seed: scheme_cfg.root_seed,
        };
        fine_tune(&prior, &scheme_cfg, &circuit, &bas).context("fine-tune failed")?
    } else {
        train(&scheme_cfg, &circuit, &bas).context("training failed")?
    };

    let dir = out_dir.join(run_dir_name(
        scheme_cfg.scheme,
        scheme_cfg.lr_g,
        scheme_cfg.lr_d,
        scheme_cfg.root_seed,
    ));
    write_run_artifacts(&run, &scheme_cfg, &circuit, &dir).context("writing run artifacts")?;
    let dataset = sample_target(
        &bas,
        1000,
        &mut seeds::stream(scheme_cfg.root_seed, &[42]),
    );
    dump_dataset(&bas, &dataset, &dir.join("dataset")).context("writing dataset dump")?;
    println!(
        "run complete: final TV = {:.4} -> {}",
        run.final_tv(),
        dir.display()
    );
    Ok(())
}

fn write_grid_summary(cells: &[GridCell], path: &Path) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "lr_g,lr_d,iteration,mean_tv,sd_tv")?;
    for cell in cells {
        for (i, &it) in cell.iterations.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                cell.lr_g, cell.lr_d, it, cell.mean_tv[i], cell.sd_tv[i]
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Study {
    /// MMD-RBF / GAN-NS / GAN-MCR2 at batch sizes 4, 16, 64 on BAS(2,2).
    BatchSize,
    /// Interpolation-factor sweep and deep-kernel MMD on BAS(2,3), batch 4.
    MomentMatching,
    /// GAN-NS to convergence, then MMD-RBF refinement on BAS(2,2).
    FineTune,
}

fn study_output_root(study_name: &str) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) => PathBuf::from(root).join(study_name),
        None => PathBuf::from("runs").join(study_name),
    }
}

pub fn cmd_reproduce(study: Study, seeds: usize) -> CliResult {
    if seeds == 0 {
        return Err(config_err("--seeds must be at least 1"));
    }
    match study {
        Study::BatchSize => reproduce_batch_size(seeds).map_err(CliError::Runtime),
        Study::MomentMatching => reproduce_moment_matching(seeds).map_err(CliError::Runtime),
        Study::FineTune => reproduce_fine_tune(seeds).map_err(CliError::Runtime),
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Batch-size study: the full-knowledge control on BAS(2,2); learning rate
/// 1e-3 for D and G everywhere except GAN-NS at batch 4, which uses 1e-4
/// for D.
fn reproduce_batch_size(n_seeds: usize) -> anyhow::Result<()> {
    let out = study_output_root("batch_size");
    std::fs::create_dir_all(&out)?;
    let bas = BasSpec::new(2, 2)?;
    let circuit = CircuitSpec::ring(4, 3)?;
    let schemes = [Scheme::MmdRbf, Scheme::GanNs, Scheme::GanMcr2];
    let batch_sizes = [4usize, 16, 64];

    let mut summary = String::from("scheme,batch_m,median_final_tv\n");
    println!("batch-size study: median final TV over {n_seeds} seeds");
    println!("{:<12} {:>8} {:>8} {:>8}", "scheme", "b=4", "b=16", "b=64");
    for scheme in schemes {
        let mut row = format!("{:<12}", scheme.name());
        for &batch_m in &batch_sizes {
            let mut cfg = SchemeConfig::new(scheme);
            cfg.batch_m = batch_m;
            cfg.exact_pstar = true;
            cfg.iterations = 1000;
            cfg.lr_g = 1e-3;
            cfg.lr_d = if scheme == Scheme::GanNs && batch_m == 4 {
                1e-4
            } else {
                1e-3
            };
            let runs = parallel_runs(&cfg, &circuit, &bas, n_seeds, |s| s as u64)?;
            for run in &runs {
                let dir = out
                    .join(format!("{}_b{batch_m}", scheme.name()))
                    .join(format!("seed{}", run.seed));
                write_run_artifacts(run, &cfg, &circuit, &dir)?;
            }
            let mut finals: Vec<f64> = runs.iter().map(RunResult::final_tv).collect();
            let med = median(&mut finals);
            summary.push_str(&format!("{},{batch_m},{med}\n", scheme.name()));
            row.push_str(&format!(" {med:>8.4}"));
        }
        println!("{row}");
    }
    std::fs::write(out.join("summary.csv"), summary)?;
    println!("table written to {}", out.join("summary.csv").display());
    Ok(())
}

/// Moment-matching study on BAS(2,3): interpolation factors
/// {0, 0.01, 0.1, 0.5, 1.0} for the interpolated scheme plus the deep-kernel
/// MMD scheme, batch 4, sampled real batches.
fn reproduce_moment_matching(n_seeds: usize) -> anyhow::Result<()> {
    let out = study_output_root("moment_matching");
    std::fs::create_dir_all(&out)?;
    let bas = BasSpec::new(2, 3)?;
    let circuit = CircuitSpec::ring(6, 3)?;
    let alphas = [0.0, 0.01, 0.1, 0.5, 1.0];

    let mut summary = String::from("scheme,alpha,mean_final_tv,sd_final_tv\n");
    let mut curves = String::from("scheme,alpha,iteration,mean_tv,sd_tv\n");
    println!("moment-matching study: mean final TV over {n_seeds} seeds");

    let mut record = |label: &str,
                      alpha: f64,
                      cfg: &SchemeConfig,
                      runs: &[RunResult]|
     -> anyhow::Result<()> {
        for run in runs {
            let dir = out.join(label).join(format!("seed{}", run.seed));
            write_run_artifacts(run, cfg, &circuit, &dir)?;
        }
        let finals: Vec<f64> = runs.iter().map(RunResult::final_tv).collect();
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        let sd = if finals.len() > 1 {
            (finals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (finals.len() - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        summary.push_str(&format!("{label},{alpha},{mean},{sd}\n"));
        println!("{label:<18} mean final TV = {mean:.4} (sd {sd:.4})");
        let n_points = runs[0].trace.len();
        for i in 0..n_points {
            let vals: Vec<f64> = runs.iter().map(|r| r.trace[i].tv).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let s = if vals.len() > 1 {
                (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (vals.len() - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            curves.push_str(&format!(
                "{label},{alpha},{},{m},{s}\n",
                runs[0].trace[i].iteration
            ));
        }
        Ok(())
    };

    for &alpha in &alphas {
        let mut cfg = SchemeConfig::new(Scheme::InterNsMcr2);
        cfg.alpha = alpha;
        cfg.batch_m = 4;
        cfg.iterations = 1000;
        cfg.lr_g = 1e-3;
        cfg.lr_d = 1e-3;
        let runs = parallel_runs(&cfg, &circuit, &bas, n_seeds, |s| s as u64)?;
        record(&format!("inter_alpha{alpha}"), alpha, &cfg, &runs)?;
    }

    let mut cfg = SchemeConfig::new(Scheme::DnnMmd);
    cfg.batch_m = 4;
    cfg.iterations = 1000;
    cfg.lr_g = 1e-3;
    cfg.lr_d = 1e-3;
    let runs = parallel_runs(&cfg, &circuit, &bas, n_seeds, |s| s as u64)?;
    record("dnn_mmd", f64::NAN, &cfg, &runs)?;

    std::fs::write(out.join("summary.csv"), summary)?;
    std::fs::write(out.join("tv_curves.csv"), curves)?;
    println!("curves written to {}", out.join("tv_curves.csv").display());
    Ok(())
}

/// Two-step protocol: GAN-NS at batch 64 until the budget, pick the
/// worst-learnt circuit, refine with image-space MMD (lr 1e-4, batch 4,
/// 2000 iterations).
fn reproduce_fine_tune(n_seeds: usize) -> anyhow::Result<()> {
    let out = study_output_root("fine_tune");
    std::fs::create_dir_all(&out)?;
    let bas = BasSpec::new(2, 2)?;
    let circuit = CircuitSpec::ring(4, 3)?;

    let mut stage1 = SchemeConfig::new(Scheme::GanNs);
    stage1.batch_m = 64;
    stage1.exact_pstar = true;
    stage1.iterations = 1000;
    stage1.lr_g = 1e-3;
    stage1.lr_d = 1e-3;
    let runs = parallel_runs(&stage1, &circuit, &bas, n_seeds, |s| s as u64)?;
    let worst = runs
        .iter()
        .max_by(|a, b| a.final_tv().total_cmp(&b.final_tv()))
        .ok_or_else(|| anyhow!("no stage-1 runs"))?;
    let tv_before = worst.final_tv();
    println!("stage 1 (gan_ns, batch 64): worst final TV = {tv_before:.4} (seed {})", worst.seed);
    write_run_artifacts(worst, &stage1, &circuit, &out.join("stage1_worst"))?;

    let mut stage2 = SchemeConfig::new(Scheme::FineTune);
    stage2.batch_m = 4;
    stage2.exact_pstar = true;
    stage2.iterations = 2000;
    stage2.lr_g = 1e-4;
    stage2.root_seed = seeds::child_seed(worst.seed, &[2]);
    let tuned = fine_tune(worst, &stage2, &circuit, &bas)?;
    let tv_after = tuned.final_tv();
    println!("stage 2 (mmd_rbf refine): final TV = {tv_after:.4}");
    write_run_artifacts(&tuned, &stage2, &circuit, &out.join("stage2_refined"))?;

    let pair = serde_json::json!({
        "schema_version": 1,
        "tv_before": tv_before,
        "tv_after": tv_after,
        "stage1_seed": worst.seed,
    });
    std::fs::write(
        out.join("before_after.json"),
        serde_json::to_string_pretty(&pair)?,
    )?;
    println!("pair written to {}", out.join("before_after.json").display());
    Ok(())
}

/// Runs `n_seeds` independent seeds of one configuration in parallel.
fn parallel_runs(
    cfg: &SchemeConfig,
    circuit: &CircuitSpec,
    bas: &BasSpec,
    n_seeds: usize,
    seed_of: impl Fn(usize) -> u64 + Sync,
) -> anyhow::Result<Vec<RunResult>> {
    use rayon::prelude::*;
    (0..n_seeds)
        .into_par_iter()
        .map(|s| {
            let mut run_cfg = cfg.clone();
            run_cfg.root_seed = seed_of(s);
            train(&run_cfg, circuit, bas).map_err(|e| anyhow!("seed {s}: {e}"))
        })
        .collect()
}

pub fn cmd_eval(checkpoint: &Path, bas_arg: &str) -> CliResult {
    let bas = parse_bas(bas_arg).map_err(config_err)?;
    let (circuit, params) = load_checkpoint(checkpoint)
        .map_err(|e| CliError::Runtime(anyhow!("checkpoint {}: {e}", checkpoint.display())))?;
    if circuit.n_qubits() != bas.n_qubits() {
        return Err(config_err(format!(
            "checkpoint has {} qubits but BAS({},{}) needs {}",
            circuit.n_qubits(),
            bas.height,
            bas.width,
            bas.n_qubits()
        )));
    }
    let report = evaluate(&circuit, &params, &bas)
        .map_err(|e| CliError::Runtime(anyhow!("evaluation failed: {e}")))?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Runtime(anyhow!("serializing report: {e}")))?;
    println!("{json}");
    Ok(())
}

fn parse_bas(arg: &str) -> Result<BasSpec, String> {
    let (h, w) = arg
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("--bas expects HxW, got {arg:?}"))?;
    let h: usize = h
        .trim()
        .parse()
        .map_err(|_| format!("bad BAS height in {arg:?}"))?;
    let w: usize = w
        .trim()
        .parse()
        .map_err(|_| format!("bad BAS width in {arg:?}"))?;
    BasSpec::new(h, w).map_err(|e| e.to_string())
}
