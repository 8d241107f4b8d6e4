use std::hint::black_box;

use catgate::channel::{gate, oracle};
use catgate::characterization::{bloch_sweep, entangled_fidelity, BlochGrid};
use catgate::homodyne::{mle_reconstruct, sample, uniform_phases, BinProjectors, Binning, MleOptions};
use catgate::states::TWO_MODE_CUTOFF;
use catgate::{wigner, BellKind, CatQubitSpec, GateParams, GridSpec};
use catgate_bench::{cat_input, squeezed_input, ALPHA};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn channels(c: &mut Criterion) {
    let mut g = c.benchmark_group("gate");
    for cutoff in [12, 20, 30] {
        let rho = cat_input(cutoff);
        let p = GateParams::default().with_cutoff(cutoff);
        g.bench_with_input(BenchmarkId::new("kraus", cutoff), &rho, |b, rho| {
            b.iter(|| gate(black_box(rho), &p))
        });
    }
    let rho = cat_input(12);
    let p = GateParams::default().with_cutoff(12);
    g.bench_function("two_mode_oracle/12", |b| {
        b.iter(|| oracle::gate(black_box(&rho), &p, oracle::Convention::Standard))
    });
    g.finish();

    let spec = CatQubitSpec::new(ALPHA, TWO_MODE_CUTOFF).expect("valid alpha");
    let p = GateParams::default().with_cutoff(TWO_MODE_CUTOFF);
    c.bench_function("entangled_fidelity/30", |b| {
        b.iter(|| entangled_fidelity(&spec, &p, BellKind::PhiPlus))
    });

    let spec = CatQubitSpec::new(ALPHA, 20).expect("valid alpha");
    let grid = BlochGrid::new(10, 12).expect("grid");
    c.bench_function("bloch_sweep/10x12", |b| {
        b.iter(|| bloch_sweep(&spec, &GateParams::default(), &grid))
    });
}

fn homodyne(c: &mut Criterion) {
    let rho = squeezed_input(0.6, 20);
    let phases = uniform_phases(12);
    c.bench_function("wigner/101x101", |b| {
        b.iter(|| wigner(black_box(&rho), &GridSpec::symmetric(5.0, 101)))
    });
    c.bench_function("bin_projectors/20", |b| {
        b.iter(|| BinProjectors::new(Binning::default(), 20))
    });
    c.bench_function("sample/12x10000", |b| b.iter(|| sample(&rho, &phases, 10_000, 1)));

    let rec = sample(&rho, &phases, 2_000, 1).expect("sampling");
    let opts = MleOptions {
        cutoff: 12,
        max_iterations: 50,
        ..MleOptions::default()
    };
    let mut g = c.benchmark_group("mle");
    g.sample_size(10);
    g.bench_function("50_iterations/12", |b| b.iter(|| mle_reconstruct(&rec, &opts)));
    g.finish();
}

criterion_group!(benches, channels, homodyne);
criterion_main!(benches);
