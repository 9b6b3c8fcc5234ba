use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use lcns::beam::{scaling_study, Quantity, ScalingConfig};
use lcns::exec::Execution;
use lcns::hum::{penalty_sweep, rough_initial, HumConfig};
use lcns::params::FluidModel;
use lcns::pde::{Grid1D, Mask};
use lcns::spectral::SymbolFamily;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn beam_ladder(c: &mut Criterion) {
    let mut group = c.benchmark_group("scaling_study");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    for (name, exec) in MODES {
        let mut cfg = ScalingConfig::new(SymbolFamily::NonBarotropic1D(FluidModel::p_star()), &[Quantity::VNorm, Quantity::TraceV]);
        cfg.ladder = vec![1e-2, 5e-3, 2e-3, 1e-3];
        cfg.exec = exec;
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| b.iter(|| scaling_study(cfg).unwrap()));
    }
    group.finish();
}

fn hum_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("penalty_sweep");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    let model = FluidModel::p_star();
    let grid = Grid1D::new(63, 64, 1.0, 1.0).unwrap();
    let cfg = HumConfig { o2: Mask::Interval(0.6, 0.9), ..HumConfig::new(rough_initial(&grid, 0), 1e-2) };
    let penalties = [1e-2, 1e-3, 1e-4, 1e-5];
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| penalty_sweep(&model, &cfg, &grid, &penalties, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, beam_ladder, hum_sweep);
criterion_main!(benches);
