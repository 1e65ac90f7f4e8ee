use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use segeval::metrics::hausdorff95;
use segeval::synth::{generate_phantom, perturb_mask, PerturbOp, PhantomSpec};
use segeval::volume::connected_components;
use segeval::{evaluate_pair, staple_fuse, Connectivity, EvalConfig, LabelVolume, StapleParams};

fn pair(dims: [usize; 3], lesions: usize) -> (LabelVolume, LabelVolume) {
    let reference = generate_phantom(&PhantomSpec {
        dims,
        spacing: [0.96, 0.96, 3.0],
        n_lesions: lesions,
        size_range: (5, 400),
        seed: 17,
        ignore_fraction: 0.1,
    })
    .unwrap();
    let prediction = perturb_mask(
        &reference.mask_of(1),
        &[
            PerturbOp::Dilate(1),
            PerturbOp::DropComponents(vec![1, 3]),
            PerturbOp::AddBlobs {
                count: 5,
                size_range: (3, 40),
                seed: 3,
            },
        ],
    )
    .unwrap()
    .to_labels();
    (reference, prediction)
}

fn evaluate(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate_pair");
    group.sample_size(20);
    for (dims, lesions) in [
        ([64, 64, 24], 10),
        ([128, 128, 48], 30),
        ([256, 256, 48], 60),
    ] {
        let (reference, prediction) = pair(dims, lesions);
        let label = format!("{}x{}x{}", dims[0], dims[1], dims[2]);
        group.bench_with_input(
            BenchmarkId::from_parameter(label),
            &(reference, prediction),
            |b, (r, p)| {
                b.iter(|| {
                    evaluate_pair(black_box(r), black_box(p), &EvalConfig::default()).unwrap()
                })
            },
        );
    }
    group.finish();
}

fn parts(c: &mut Criterion) {
    let (reference, prediction) = pair([256, 256, 48], 60);
    let (r, p) = (reference.mask_of(1), prediction.nonzero());
    c.bench_function("hausdorff95/256x256x48", |b| {
        b.iter(|| hausdorff95(black_box(&r), black_box(&p)).unwrap())
    });
    for conn in [Connectivity::Six, Connectivity::TwentySix] {
        c.bench_function(&format!("components/{conn:?}/256x256x48"), |b| {
            b.iter(|| connected_components(black_box(&r), conn))
        });
    }
}

fn staple(c: &mut Criterion) {
    let (reference, _) = pair([128, 128, 48], 30);
    let truth = reference.mask_of(1);
    let raters: Vec<_> = (0..5u64)
        .map(|k| {
            perturb_mask(
                &truth,
                &[PerturbOp::AddBlobs {
                    count: 4,
                    size_range: (2, 30),
                    seed: k,
                }],
            )
            .unwrap()
        })
        .collect();
    c.bench_function("staple/5 raters/128x128x48", |b| {
        b.iter(|| staple_fuse(black_box(&raters), &StapleParams::default()).unwrap())
    });
}

criterion_group!(benches, evaluate, parts, staple);
criterion_main!(benches);
