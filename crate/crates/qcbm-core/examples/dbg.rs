// scratch probe
use qcbm_core::bas::*;
use qcbm_core::circuit::*;
use qcbm_core::trainer::*;
use rayon::prelude::*;

fn main() {
    let bas = BasSpec::new(2, 2).unwrap();
    let circuit = CircuitSpec::ring(4, 3).unwrap();
    let mut jobs = Vec::new();
    for lr_g in [1e-3f64, 3e-3, 1e-2] {
        for lr_d in [1e-3f64, 1e-2] {
            for seed in 0..5u64 {
                jobs.push((lr_g, lr_d, seed));
            }
        }
    }
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(lr_g, lr_d, seed)| {
            let mut cfg = SchemeConfig::new(Scheme::GanNs);
            cfg.batch_m = 4;
            cfg.lr_g = lr_g;
            cfg.lr_d = lr_d;
            cfg.iterations = 1000;
            cfg.exact_pstar = true;
            cfg.root_seed = seed;
            let run = train(&cfg, &circuit, &bas).unwrap();
            let fe = run.trace.last().unwrap();
            let min_mode = fe.mode_masses.iter().cloned().fold(f64::MAX, f64::min);
            (lr_g, lr_d, seed, fe.tv, fe.invalid_mass, min_mode)
        })
        .collect();
    for lr_g in [1e-3f64, 3e-3, 1e-2] {
        for lr_d in [1e-3f64, 1e-2] {
            let mut inv: Vec<f64> = results
                .iter()
                .filter(|r| r.0 == lr_g && r.1 == lr_d)
                .map(|r| r.4)
                .collect();
            inv.sort_by(f64::total_cmp);
            let med_inv = inv[inv.len() / 2];
            let mins: Vec<f64> = results
                .iter()
                .filter(|r| r.0 == lr_g && r.1 == lr_d)
                .map(|r| r.5)
                .collect();
            let mut mm = mins.clone();
            mm.sort_by(f64::total_cmp);
            println!(
                "lr_g={lr_g:.0e} lr_d={lr_d:.0e}: median_invalid={med_inv:.4} median_min_mode={:.4} (invalids: {:?})",
                mm[mm.len() / 2],
                inv.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>()
            );
        }
    }
}
