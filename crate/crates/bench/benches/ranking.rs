use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use segeval::ranking::{interscanner_rank, RankNormalization};
use segeval::{
    bootstrap_ci, final_rank, BootstrapConfig, ResultRecord, ResultTable, Scores, VolumeMetric,
};

/// Deterministic table of `methods` x `subjects` with spread-out scores.
fn table(methods: usize, subjects: usize) -> ResultTable {
    let mut records = Vec::with_capacity(methods * subjects);
    for m in 0..methods {
        for s in 0..subjects {
            let x = ((m * 7919 + s * 104_729) % 1000) as f64 / 1000.0;
            let skill = 1.0 - m as f64 / methods as f64;
            records.push(ResultRecord {
                method_id: format!("m{m:02}"),
                subject_id: format!("s{s:03}"),
                scanner_id: format!("scanner{}", s % 5),
                scores: Scores {
                    dsc: Some(0.5 * skill + 0.3 * x),
                    h95_mm: Some(5.0 + 20.0 * (1.0 - skill) + 10.0 * x),
                    avd_pct: Some(10.0 + 100.0 * x),
                    lavd: Some(0.1 + x * (1.0 - skill)),
                    recall: Some(0.4 * skill + 0.5 * x),
                    f1: Some(0.6 * skill + 0.2 * x),
                    ..Scores::default()
                },
            });
        }
    }
    ResultTable::new(records).unwrap()
}

fn ranking(c: &mut Criterion) {
    let t = table(20, 110);
    c.bench_function("final_rank/20x110", |b| {
        b.iter(|| final_rank(black_box(&t), VolumeMetric::Lavd).unwrap())
    });
    c.bench_function("interscanner/20x110", |b| {
        b.iter(|| {
            interscanner_rank(black_box(&t), VolumeMetric::Lavd, RankNormalization::MinMax).unwrap()
        })
    });

    let mut group = c.benchmark_group("bootstrap_ci/20x110");
    group.sample_size(10);
    for replicates in [200, 2000] {
        let config = BootstrapConfig {
            replicates,
            confidence: 0.95,
            seed: 1,
        };
        group.bench_with_input(
            BenchmarkId::from_parameter(replicates),
            &config,
            |b, cfg| b.iter(|| bootstrap_ci(black_box(&t), VolumeMetric::Lavd, cfg).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, ranking);
criterion_main!(benches);
