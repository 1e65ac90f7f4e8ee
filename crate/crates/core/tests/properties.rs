mod common;

use proptest::prelude::*;
use segeval::fusion::{staple_fuse, StapleParams};
use segeval::metrics::{dice, evaluate_masks, evaluate_pair, hausdorff95, lavd, lesion_recall_f1};
use segeval::synth::{generate_phantom, perturb_mask, PerturbOp, PhantomSpec};
use segeval::volume::{
    connected_components, dilate, merge_labels, read_nifti, read_nifti_real, write_nifti,
    StructuringElement,
};
use segeval::{BinaryMask, Connectivity, EvalConfig, Grid, LabelVolume, RealVolume};

fn grid_strategy(max: usize) -> impl Strategy<Value = Grid> {
    (
        [1..=max, 1..=max, 1..=max],
        [0.5f64..2.0, 0.5f64..2.0, 0.5f64..4.0],
    )
        .prop_map(|(dims, spacing)| Grid::new(dims, spacing).unwrap())
}

fn mask_on(grid: Grid, density: f64) -> impl Strategy<Value = BinaryMask> {
    prop::collection::vec(prop::bool::weighted(density), grid.len())
        .prop_map(move |d| BinaryMask::new(grid, d).unwrap())
}

fn mask_pair(max: usize) -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
    grid_strategy(max).prop_flat_map(|g| (mask_on(g, 0.3), mask_on(g, 0.3)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nifti_round_trip(
        grid in grid_strategy(6),
        seed in any::<u64>(),
        wide in any::<bool>(),
        gz in any::<bool>(),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let max_label = if wide { 30_000 } else { 255 };
        let labels: Vec<u32> = (0..grid.len() as u64).map(|i| ((seed ^ i.wrapping_mul(0x9e37_79b9)) % (max_label + 1)) as u32).collect();
        let vol = LabelVolume::new(grid, labels).unwrap();
        let path = dir.path().join(if gz { "v.nii.gz" } else { "v.nii" });
        write_nifti(&vol, &path).unwrap();
        let back = read_nifti(&path).unwrap();
        prop_assert_eq!(back.data(), vol.data());
        prop_assert_eq!(back.dims(), vol.dims());
        for k in 0..3 {
            prop_assert!((back.spacing()[k] - vol.spacing()[k]).abs() <= 1e-6 * vol.spacing()[k]);
        }

        let real = RealVolume::new(grid, (0..grid.len()).map(|i| (i as f32 * 0.37).sin()).collect()).unwrap();
        write_nifti(&real, &path).unwrap();
        let back = read_nifti_real(&path).unwrap();
        prop_assert_eq!(back.data(), real.data());
    }

    #[test]
    fn component_count_non_increasing_in_connectivity(m in grid_strategy(8).prop_flat_map(|g| mask_on(g, 0.35))) {
        let six = connected_components(&m, Connectivity::Six).count;
        let eighteen = connected_components(&m, Connectivity::Eighteen).count;
        let twenty_six = connected_components(&m, Connectivity::TwentySix).count;
        prop_assert!(six >= eighteen && eighteen >= twenty_six);
    }

    #[test]
    fn dilation_is_extensive_and_monotone(m in grid_strategy(8).prop_flat_map(|g| mask_on(g, 0.1))) {
        let se = StructuringElement::in_plane_3x3();
        let once = dilate(&m, &se);
        let twice = dilate(&once, &se);
        prop_assert_eq!(m.and_not(&once).unwrap().count(), 0);
        prop_assert_eq!(once.and_not(&twice).unwrap().count(), 0);
    }

    #[test]
    fn merged_labels((wmh, other) in mask_pair(6)) {
        let merged = merge_labels(&wmh, &other).unwrap();
        prop_assert!(merged.data().iter().all(|&v| v <= 2));
        prop_assert_eq!(merged.mask_of(1), wmh);
    }

    #[test]
    fn dice_symmetric_and_bounded((a, b) in mask_pair(7)) {
        let ab = dice(&a, &b).unwrap();
        prop_assert_eq!(ab, dice(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab == 1.0, a == b);
        prop_assert_eq!(dice(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn hausdorff_symmetry_translation_and_scale(
        (a, b) in mask_pair(6),
        shift in [0usize..3, 0usize..3, 0usize..3],
        scale in 0.25f64..4.0,
    ) {
        let h = hausdorff95(&a, &b).unwrap();
        prop_assert_eq!(h, hausdorff95(&b, &a).unwrap());

        let g = *a.grid();
        let big = Grid::new([g.dims[0] + 3, g.dims[1] + 3, g.dims[2] + 3], g.spacing).unwrap();
        let moved = |m: &BinaryMask| {
            let coords: Vec<[usize; 3]> = m.coords().iter().map(|c| [c[0] + shift[0], c[1] + shift[1], c[2] + shift[2]]).collect();
            BinaryMask::from_coords(big, &coords)
        };
        let hm = hausdorff95(&moved(&a), &moved(&b)).unwrap();
        prop_assert!(common::close_opt(h, hm, 1e-9), "{:?} vs {:?}", h, hm);

        let scaled = Grid::new(g.dims, g.spacing.map(|s| s * scale)).unwrap();
        let rescale = |m: &BinaryMask| BinaryMask::new(scaled, m.data().to_vec()).unwrap();
        let hs = hausdorff95(&rescale(&a), &rescale(&b)).unwrap();
        prop_assert!(common::close_opt(h.map(|v| v * scale), hs, 1e-9));
    }

    #[test]
    fn lavd_depends_on_ratio_only(v in 0.01f64..100.0, k in 0.01f64..100.0) {
        let a = lavd(v, k * v).unwrap().unwrap();
        let b = lavd(k * v, k * k * v).unwrap().unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        let swapped = lavd(k * v, v).unwrap().unwrap();
        prop_assert!((a - swapped).abs() < 1e-12);
    }

    #[test]
    fn dropping_false_positive_component_helps_f1((r, p) in mask_pair(7)) {
        let before = lesion_recall_f1(&r, &p, Connectivity::TwentySix).unwrap();
        let cc = connected_components(&p, Connectivity::TwentySix);
        let Some(fp) = before.matches.pred_matched.iter().position(|&m| !m) else {
            return Ok(());
        };
        let after_mask = perturb_mask(&p, &[PerturbOp::DropComponents(vec![fp as u32 + 1])]).unwrap();
        prop_assert_eq!(after_mask.count(), p.count() - cc.sizes[fp]);
        let after = lesion_recall_f1(&r, &after_mask, Connectivity::TwentySix).unwrap();
        // Unchanged, except an empty reference turns recall to 1 once the prediction empties.
        prop_assert!(after.recall >= before.recall);
        if !r.is_empty() {
            prop_assert_eq!(after.recall, before.recall);
        }
        prop_assert!(after.f1 >= before.f1 - 1e-15);
    }

    #[test]
    fn ignore_label_on_shared_background_changes_nothing(
        (r, p) in mask_pair(6),
        ignore_seed in any::<u64>(),
    ) {
        let grid = *r.grid();
        let plain_ref: Vec<u32> = r.data().iter().map(|&v| v as u32).collect();
        let with_ignore: Vec<u32> = (0..grid.len())
            .map(|i| {
                let background = !r.data()[i] && !p.data()[i];
                if background && (ignore_seed >> (i % 64)) & 1 == 1 { 2 } else { plain_ref[i] }
            })
            .collect();
        let pred = p.to_labels();
        let cfg = EvalConfig::default();
        let a = evaluate_pair(&LabelVolume::new(grid, plain_ref).unwrap(), &pred, &cfg).unwrap();
        let b = evaluate_pair(&LabelVolume::new(grid, with_ignore).unwrap(), &pred, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn dilating_prediction_never_lowers_recall((r, p) in mask_pair(7), k in 1usize..3) {
        let grown = perturb_mask(&p, &[PerturbOp::Dilate(k)]).unwrap();
        let before = evaluate_masks(&r, &p, &EvalConfig::default()).unwrap();
        let after = evaluate_masks(&r, &grown, &EvalConfig::default()).unwrap();
        prop_assert!(after.recall >= before.recall);
    }

    #[test]
    fn staple_ignores_rater_order(
        masks in grid_strategy(5).prop_flat_map(|g| prop::collection::vec(mask_on(g, 0.4), 3..5)),
        rotate in 1usize..4,
    ) {
        prop_assume!(masks.iter().any(|m| !m.is_empty()));
        let params = StapleParams::default();
        let a = staple_fuse(&masks, &params).unwrap();
        let mut permuted = masks.clone();
        permuted.rotate_left(rotate % masks.len());
        let b = staple_fuse(&permuted, &params).unwrap();
        let again = staple_fuse(&masks, &params).unwrap();
        prop_assert_eq!(&a, &again);
        for (x, y) in a.weights.iter().zip(&b.weights) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        let shift = rotate % masks.len();
        for j in 0..masks.len() {
            let k = (j + masks.len() - shift) % masks.len();
            prop_assert!((a.sensitivities[j] - b.sensitivities[k]).abs() < 1e-9);
            prop_assert!((a.specificities[j] - b.specificities[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn phantoms_are_valid(seed in any::<u64>(), n in 0usize..6, fraction in 0.0f64..0.6) {
        let spec = PhantomSpec {
            dims: [20, 20, 10],
            spacing: [1.0, 1.0, 3.0],
            n_lesions: n,
            size_range: (2, 12),
            seed,
            ignore_fraction: fraction,
        };
        let v = generate_phantom(&spec).unwrap();
        prop_assert!(v.max_label() <= 2);
        prop_assert_eq!(connected_components(&v.mask_of(1), Connectivity::TwentySix).count, n);
        prop_assert_eq!(connected_components(&v.nonzero(), Connectivity::Six).count, n + spec.n_ignore());
    }
}
