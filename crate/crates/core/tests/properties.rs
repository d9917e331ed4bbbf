mod common;

use glance::features::{analyze_binary, compactness, ipf};
use glance::imagegrid::{BinaryImage, FlipAxis, GrayImage, Rotation};
use glance::pores::{exterior_mask, label_pores};
use glance::tabulate::row_tabulation;
use glance::{binarize, ThresholdConfig};
use proptest::prelude::*;

use common::brute_force_rows;

fn gray_image() -> impl Strategy<Value = GrayImage> {
    (1usize..=24, 1usize..=24).prop_flat_map(|(r, c)| {
        proptest::collection::vec(any::<u8>(), r * c).prop_map(move |px| GrayImage::new(r, c, px).unwrap())
    })
}

fn binary_image() -> impl Strategy<Value = BinaryImage> {
    (1usize..=24, 1usize..=24, 0.05f64..0.95).prop_flat_map(|(r, c, density)| {
        proptest::collection::vec(proptest::bool::weighted(density), r * c).prop_filter_map("no foreground", move |mask| {
            BinaryImage::from_mask(r, c, &mask).ok()
        })
    })
}

fn transform() -> impl Strategy<Value = usize> {
    0usize..5
}

fn apply_gray(img: &GrayImage, t: usize) -> GrayImage {
    match t {
        0..=2 => img.rotate(Rotation::ALL[t]),
        _ => img.flip(FlipAxis::ALL[t - 3]),
    }
}

fn apply_bin(img: &BinaryImage, t: usize) -> BinaryImage {
    match t {
        0..=2 => img.rotate(Rotation::ALL[t]),
        _ => img.flip(FlipAxis::ALL[t - 3]),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn transforms_preserve_histogram(img in gray_image(), t in transform()) {
        prop_assert_eq!(apply_gray(&img, t).histogram(), img.histogram());
    }

    #[test]
    fn r180_is_both_flips(img in gray_image()) {
        let flipped = img.flip(FlipAxis::Horizontal).flip(FlipAxis::Vertical);
        prop_assert_eq!(img.rotate(Rotation::R180), flipped);
    }

    #[test]
    fn four_quarter_turns_is_identity(img in gray_image()) {
        let mut out = img.clone();
        for _ in 0..4 {
            out = out.rotate(Rotation::R90);
        }
        prop_assert_eq!(out, img);
    }

    #[test]
    fn binarize_commutes_with_transforms(img in gray_image(), t in transform(), thr in any::<u8>()) {
        let cfg = ThresholdConfig::manual(thr);
        match (binarize(&img, &cfg), binarize(&apply_gray(&img, t), &cfg)) {
            (Ok(a), Ok(b)) => {
                let moved = apply_bin(&a, t);
                prop_assert_eq!(moved.labels(), b.labels());
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "outcomes differ: {:?} / {:?}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn counts_partition_the_image(b in binary_image()) {
        let r = analyze_binary(b.clone(), "p").unwrap().record;
        prop_assert_eq!(r.u + r.z, (b.rows() * b.cols()) as u64);
        prop_assert!(r.w <= r.y && r.y <= r.z);
        prop_assert!((r.s + r.c - 1.0).abs() <= 1e-15);
        let alt = 1.0 / (1.0 + r.z as f64 / r.u as f64);
        prop_assert!((r.ipf - alt).abs() <= 1e-12);
    }

    #[test]
    fn tabulation_matches_direct_scan(b in binary_image()) {
        let pm = label_pores(&b);
        let tab = row_tabulation(&b, &pm).unwrap();
        let direct = brute_force_rows(&b);
        prop_assert_eq!(tab.per_row.len(), b.rows());
        for (row, (span, fg, bg, scatter)) in tab.per_row.iter().zip(direct) {
            prop_assert_eq!((row.span, row.foreground, row.background, row.scatter), (span, fg, bg, scatter));
            prop_assert_eq!(row.scatter, row.span - row.foreground);
            prop_assert!(row.pore <= row.scatter);
        }
        prop_assert_eq!(tab.per_row.iter().map(|r| r.pore).sum::<u64>(), pm.total_area());
    }

    #[test]
    fn pore_percentages_sum_to_porousness(b in binary_image()) {
        let a = analyze_binary(b, "p").unwrap();
        let table = a.pores.per_pore_table(a.record.u);
        let total: f64 = table.iter().map(|p| p.percent).sum();
        prop_assert!((total - 100.0 * a.record.p).abs() <= 1e-9);
        prop_assert_eq!(table.len() as u64, a.record.n_p);
        for pair in table.windows(2) {
            prop_assert!(pair[0].area >= pair[1].area);
        }
    }

    #[test]
    fn pores_are_enclosed_background(b in binary_image()) {
        let pm = label_pores(&b);
        let ext = exterior_mask(&b);
        for r in 0..b.rows() {
            for c in 0..b.cols() {
                let i = r * b.cols() + c;
                let pore = pm.label(r, c) != 0;
                if b.is_foreground(r, c) {
                    prop_assert!(!pore && !ext[i]);
                } else {
                    prop_assert_eq!(pore, !ext[i]);
                }
                let on_border = r == 0 || c == 0 || r + 1 == b.rows() || c + 1 == b.cols();
                if on_border {
                    prop_assert!(!pore);
                }
            }
        }
    }

    #[test]
    fn compactness_falls_as_scatter_grows(u in 1u64..10_000, y in 0u64..10_000, dy in 1u64..1000) {
        prop_assert!(compactness(u, y + dy).unwrap() < compactness(u, y).unwrap());
    }

    #[test]
    fn ipf_in_unit_interval(u in 1u64..10_000, extra in 0u64..10_000) {
        let v = ipf(u, u + extra).unwrap();
        prop_assert!(v > 0.0 && v <= 1.0);
    }
}
