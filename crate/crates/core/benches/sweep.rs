use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mixpack_core::exec::Execution;
use mixpack_core::packing::{SearchOptions, Signedness};
use mixpack_core::profile::DspProfile;
use mixpack_core::sim::{verify_choice, SamplePolicy};
use mixpack_core::table::{build_table, search_optimal, BuildOptions, KernelShape, SeqLen};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn verify(c: &mut Criterion) {
    let p = DspProfile::dsp48e2();
    let full = SearchOptions::full(Signedness::Unsigned);
    let mut g = c.benchmark_group("verify_choice");
    g.sample_size(10);
    // 4x4 lanes at 2 bits is exhaustive; 8-bit pairs fall back to sampling
    for (w, a) in [(2, 2), (8, 8)] {
        let choice = search_optimal(w, a, KernelShape::new(1, 1), SeqLen::Generic, &p, full).unwrap();
        for (name, exec) in MODES {
            let policy = SamplePolicy {
                exec,
                ..SamplePolicy::default()
            };
            g.bench_with_input(BenchmarkId::new(name, format!("{w}x{a}")), &choice, |b, ch| {
                b.iter(|| verify_choice(ch, &p, &policy, None).unwrap())
            });
        }
    }
    g.finish();
}

fn table(c: &mut Criterion) {
    let p = DspProfile::dsp48e2();
    let mut g = c.benchmark_group("build_table_3x3_2to5");
    g.sample_size(10);
    for (name, exec) in MODES {
        let mut opts = BuildOptions {
            bits_max: 5,
            ..BuildOptions::default()
        };
        opts.policy.exec = exec;
        g.bench_function(name, |b| {
            b.iter(|| build_table(KernelShape::new(3, 3), &p, &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, verify, table);
criterion_main!(benches);
