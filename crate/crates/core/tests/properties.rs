mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use canopy_core::evaluate::{nrmse, quartile_bins, Quartile};
use canopy_core::model::condition_code;
use canopy_core::normalize::{apply, cut_window, fit_stats, invert};
use canopy_core::raster_io::{decode_mask, decode_rts, encode_mask, encode_rts, RasterSeries, StudyMask};
use canopy_core::stitch::{cut_tiles, stitch, Weighting};
use canopy_core::tiling::{complete_coverage, plan_tiles, TileOrigin, TilePlan, TileRect};

use common::{brute_coverage, nrmse_oracle};

fn mask_strategy() -> impl Strategy<Value = StudyMask> {
    (8usize..48, 8usize..48)
        .prop_flat_map(|(h, w)| (Just(h), Just(w), proptest::collection::vec(any::<bool>(), h * w), 0..h * w))
        .prop_map(|(h, w, mut cells, seed)| {
            cells[seed] = true;
            StudyMask::new(h, w, cells).unwrap()
        })
}

fn window_holds_mask(mask: &StudyMask, t: &TileRect, window: usize) -> bool {
    (t.row..t.row + window).any(|r| (t.col..t.col + window).any(|c| mask.get(r, c)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plans_cover_mask_with_useful_tiles(mask in mask_strategy(), window in 1usize..9, stride_frac in 0.0f64..1.0) {
        let stride = 1 + (stride_frac * (window - 1) as f64) as usize;
        let plan = plan_tiles(&mask, window, stride).unwrap();
        prop_assert!(plan.validate().is_ok());
        prop_assert_eq!(brute_coverage(&plan, &mask), 1.0);
        for t in &plan.tiles {
            prop_assert!(t.row + window <= mask.height() && t.col + window <= mask.width());
            prop_assert!(window_holds_mask(&mask, t, window));
        }
    }

    #[test]
    fn completion_fills_sparse_grids(mask in mask_strategy(), window in 2usize..8) {
        let step = 2 * window;
        let grid: Vec<TileRect> = (0..=(mask.height() - window) / step)
            .flat_map(|i| (0..=(mask.width() - window) / step).map(move |j| (i * step, j * step)))
            .enumerate()
            .map(|(id, (row, col))| TileRect { id, row, col, origin: TileOrigin::Scan })
            .collect();
        let extra = complete_coverage(&mask, window, &grid).unwrap();
        for (k, t) in extra.iter().enumerate() {
            prop_assert_eq!(t.id, grid.len() + k);
            prop_assert_eq!(t.origin, TileOrigin::Completion);
            prop_assert!(window_holds_mask(&mask, t, window));
        }
        let plan = TilePlan {
            window,
            stride: window,
            height: mask.height(),
            width: mask.width(),
            tiles: grid.into_iter().chain(extra).collect(),
        };
        prop_assert_eq!(brute_coverage(&plan, &mask), 1.0);
    }

    #[test]
    fn normalize_round_trip(values in proptest::collection::vec(-1e4f32..1e4, 2 * 2 * 12 * 12), window in 2usize..7) {
        let series = RasterSeries::new(2, 2, 12, 12, f32::NAN, values).unwrap();
        let plan = plan_tiles(&StudyMask::filled(12, 12, true).unwrap(), window, window).unwrap();
        let stats = fit_stats(&series, &plan, None).unwrap();
        for tile in 0..plan.len() {
            for band in 0..2 {
                for t in 0..2 {
                    let norm = apply(&series, &plan, &stats, tile, band, t).unwrap();
                    prop_assert!(norm.values.iter().all(|v| (0.0..=1.0).contains(v)));
                    let back = invert(&norm.values, &stats, tile, band).unwrap();
                    let raw = cut_window(&series, &plan, tile, band, t).unwrap();
                    let s = stats.get(tile, band).unwrap();
                    let span = (s.max - s.min).max(1.0);
                    for (b, r) in back.iter().zip(&raw) {
                        prop_assert!((b - r.unwrap()).abs() <= 1e-6 * span);
                    }
                }
            }
        }
    }

    #[test]
    fn stats_match_single_pass(values in proptest::collection::vec(prop_oneof![9 => -500f32..500.0, 1 => Just(f32::NAN)], 3 * 10 * 10)) {
        let mut values = values;
        values[0] = 1.0;
        let series = RasterSeries::new(3, 1, 10, 10, f32::NAN, values).unwrap();
        let plan = plan_tiles(&StudyMask::filled(10, 10, true).unwrap(), 10, 10).unwrap();
        let stats = fit_stats(&series, &plan, Some(0..3)).unwrap();
        let s = stats.get(0, 0).unwrap();
        let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in series.samples().iter().filter(|v| !v.is_nan()) {
            let v = v as f64;
            n += 1.0;
            let d = v - mean;
            mean += d / n;
            m2 += d * (v - mean);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        prop_assert_eq!(s.min, lo);
        prop_assert_eq!(s.max, hi);
        prop_assert!((s.mean - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        prop_assert!((s.variance - m2 / n).abs() <= 1e-9 * (m2 / n).max(1.0));
    }

    #[test]
    fn quartiles_are_monotone_and_balanced(scores in proptest::collection::vec(0.0f64..3.0, 4..60)) {
        let pairs: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
        let bins = quartile_bins(&pairs).unwrap();
        for a in 0..pairs.len() {
            for b in 0..pairs.len() {
                if pairs[a].1 < pairs[b].1 {
                    prop_assert!(bins[a] <= bins[b]);
                }
            }
        }
        let n = pairs.len();
        for (g, q) in [Quartile::Q1, Quartile::Q2, Quartile::Q3, Quartile::Q4].into_iter().enumerate() {
            let size = bins.iter().filter(|&&b| b == q).count();
            prop_assert_eq!(size, n / 4 + usize::from(g < n % 4));
        }
    }

    #[test]
    fn stitch_conserves_covered_pixels(mask in mask_strategy(), window in 1usize..9, seed in any::<u64>()) {
        let plan = plan_tiles(&mask, window, window.div_ceil(2)).unwrap();
        let mut rng = canopy_core::rng::SplitMix64::new(seed);
        let (h, w) = (mask.height(), mask.width());
        let image: Vec<f64> = (0..h * w).map(|_| rng.uniform_range(-10.0, 10.0)).collect();
        let tiles = cut_tiles(&plan, &image).unwrap();
        let s = stitch(&plan, &tiles, h, w, -1e300, Weighting::Feathered).unwrap();
        for (p, &original) in image.iter().enumerate() {
            let (r, c) = (p / w, p % w);
            let brute = plan.tiles.iter().filter(|t| r >= t.row && r < t.row + window && c >= t.col && c < t.col + window).count();
            prop_assert_eq!(s.counts[p] as usize, brute);
            if brute > 0 {
                prop_assert!((s.values[p] - original).abs() < 1e-9);
            } else {
                prop_assert_eq!(s.values[p], -1e300);
            }
        }
    }

    #[test]
    fn nrmse_is_nonnegative_and_affine_invariant(
        pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..80),
        a in 0.1f64..10.0,
        b in -50.0f64..50.0,
    ) {
        let (truth, pred): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        match (nrmse(&truth, &pred), nrmse_oracle(&truth, &pred)) {
            (Ok(e), Some(o)) => {
                prop_assert!(e >= 0.0);
                prop_assert!((e - o).abs() <= 1e-9 * o.max(1.0));
                let t2: Vec<f64> = truth.iter().map(|x| a * x + b).collect();
                let p2: Vec<f64> = pred.iter().map(|x| a * x + b).collect();
                prop_assert!((nrmse(&t2, &p2).unwrap() - e).abs() <= 1e-9 * e.max(1.0));
            }
            (Err(_), None) => {}
            (got, want) => prop_assert!(false, "{got:?} vs {want:?}"),
        }
    }

    #[test]
    fn rts_round_trip(
        dims in (1usize..4, 1usize..4, 1usize..9, 1usize..9),
        seed in any::<u64>(),
        sentinel in prop_oneof![Just(f32::NAN), Just(-9999.0f32), Just(0.0f32)],
    ) {
        let (t, b, h, w) = dims;
        let mut rng = canopy_core::rng::SplitMix64::new(seed);
        let samples = (0..t * b * h * w)
            .map(|_| if rng.uniform() < 0.2 { sentinel } else { rng.gaussian() as f32 * 1e3 })
            .collect();
        let series = RasterSeries::new(t, b, h, w, sentinel, samples).unwrap();
        let bytes = encode_rts(&series);
        let back = decode_rts(&bytes).unwrap();
        prop_assert_eq!(&back, &series);
        prop_assert_eq!(encode_rts(&back), bytes);
    }

    #[test]
    fn mask_round_trip(mask in mask_strategy()) {
        let bytes = encode_mask(&mask);
        prop_assert_eq!(decode_mask(&bytes).unwrap(), mask);
    }

    #[test]
    fn condition_codes_are_distinct(plan_size in 1usize..300) {
        let mut seen = BTreeSet::new();
        for tile in 0..plan_size {
            for band in 0..8 {
                let code = condition_code(tile, band, plan_size).unwrap();
                prop_assert!(code.iter().all(|&v| v == 0.0 || v == 1.0));
                let key: Vec<u8> = code.iter().map(|&v| v as u8).collect();
                prop_assert!(seen.insert(key));
            }
        }
    }
}
