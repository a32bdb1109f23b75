use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use qcbm_core::bas::{target_distribution, BasSpec};
use qcbm_core::circuit::CircuitSpec;
use qcbm_core::gradients::{grad_gan_ns, grad_mmd, GenMode, RealSide};
use qcbm_core::kernels::BitKernelTable;
use qcbm_core::seeds;
use qcbm_core::{MlpNet, RbfKernel};

fn bench_mmd_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("grad_mmd_batch4");
    for (h, w) in [(2usize, 2usize), (2, 3)] {
        let bas = BasSpec::new(h, w).unwrap();
        let n = bas.n_qubits();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            let spec = CircuitSpec::ring(n, 3).unwrap();
            let params = spec.random_params(&mut seeds::stream(2, &[n as u64]));
            let table = BitKernelTable::build(&RbfKernel::default_mixture(), n);
            let target = target_distribution(&bas);
            let mut seed = 0u64;
            b.iter(|| {
                seed += 1;
                grad_mmd(
                    &spec,
                    &params,
                    &table,
                    GenMode::Sampled { batch_m: 4 },
                    RealSide::Exact(&target),
                    seed,
                )
                .unwrap()
            });
        });
    }
    group.finish();
}

fn bench_gan_gradient(c: &mut Criterion) {
    c.bench_function("grad_gan_ns_n6_batch4", |b| {
        let spec = CircuitSpec::ring(6, 3).unwrap();
        let params = spec.random_params(&mut seeds::stream(3, &[0]));
        let net = MlpNet::scorer(6, &mut seeds::stream(3, &[1]));
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            grad_gan_ns(&spec, &params, &net, GenMode::Sampled { batch_m: 4 }, seed).unwrap()
        });
    });
}

criterion_group!(benches, bench_mmd_gradient, bench_gan_gradient);
criterion_main!(benches);
