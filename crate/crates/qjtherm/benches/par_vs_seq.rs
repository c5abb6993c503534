use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use qjtherm::model::{swap_from_lifetime, thermal_state, EnergyShift, TwoLevelMolecule};
use qjtherm::tcspc::{synth_histogram, synth_histogram_seq, SynthParams};
use qjtherm::thermo::{sample_sudden_quench_work, sample_sudden_quench_work_seq};
use qjtherm::trajectory::{
    sample_trajectories, sample_trajectories_seq, ProtocolParams,
};

fn protocol() -> ProtocolParams {
    let molecule = TwoLevelMolecule::from_gap(1e-3).unwrap();
    let occ = thermal_state(&molecule, 4.0).unwrap();
    let swap = swap_from_lifetime(5.0, 1.0).unwrap();
    ProtocolParams::new(molecule.gap_ev(), occ, swap, 50, 0.05).unwrap()
}

fn bench_trajectories(c: &mut Criterion) {
    let params = protocol();
    let mut group = c.benchmark_group("sample_trajectories");
    for n in [100_000u64, 1_000_000] {
        group.throughput(Throughput::Elements(n));
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| sample_trajectories(&params, n, 7).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| sample_trajectories_seq(&params, n, 7).unwrap())
        });
    }
    group.finish();
}

fn bench_synth(c: &mut Criterion) {
    let params = SynthParams {
        n_cycles: 1_000_000,
        dark_rate_hz: 200.0,
        ..SynthParams::default()
    };
    let mut group = c.benchmark_group("synth_histogram");
    group.throughput(Throughput::Elements(params.n_cycles));
    group.bench_function("parallel", |b| {
        b.iter(|| synth_histogram(&params, 7).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| synth_histogram_seq(&params, 7).unwrap())
    });
    group.finish();
}

fn bench_quench(c: &mut Criterion) {
    let molecule = TwoLevelMolecule::from_wavelength(785.0).unwrap();
    let shift = EnergyShift::new(5e-4, 2e-4);
    let n = 1_000_000u64;
    let mut group = c.benchmark_group("sudden_quench_work");
    group.throughput(Throughput::Elements(n));
    group.bench_function("parallel", |b| {
        b.iter(|| sample_sudden_quench_work(&molecule, &shift, 4.0, n, 7).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| sample_sudden_quench_work_seq(&molecule, &shift, 4.0, n, 7).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_trajectories, bench_synth, bench_quench);
criterion_main!(benches);
