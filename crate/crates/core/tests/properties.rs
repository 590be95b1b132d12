use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use dyndepth::balance::{lambda_at, rate_weights};
use dyndepth::costvolume::uncertainty_mask;
use dyndepth::geometry::{bilinear_sample, project_pixel, Intrinsics, PixelCoord, Pose};
use dyndepth::grid::{DepthMap, ErrorMap, Grid, Image, PixelMask};
use dyndepth::harness::depth_metrics;
use dyndepth::photometric::{photometric_error, select_by_error};

fn intrinsics() -> Intrinsics {
    Intrinsics::new(90.0, 90.0, 55.5, 39.5, 112, 80).unwrap()
}

fn pose() -> impl Strategy<Value = Pose> {
    (prop::array::uniform3(-0.3..0.3f64), prop::array::uniform3(-1.0..1.0f64)).prop_map(|(r, t)| Pose::new(r, t))
}

fn image(w: usize, h: usize) -> impl Strategy<Value = Image> {
    prop::collection::vec(prop::array::uniform3(0.0..1.0f64), w * h)
        .prop_map(move |v| Image::new(Grid::from_vec(w, h, v).unwrap()))
}

fn depths(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.5..90.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pose_inverse_cancels(p in pose(), x in prop::array::uniform3(-5.0..5.0f64)) {
        let x = nalgebra::Vector3::from(x);
        let back = p.inverse().apply(&p.apply(&x));
        for i in 0..3 {
            assert_abs_diff_eq!(back[i], x[i], epsilon = 1e-12);
        }
        let both = p.compose(&p.inverse());
        for i in 0..3 {
            assert_abs_diff_eq!(both.translation[i], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(both.rotation[i], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn reprojection_round_trips(p in pose(), u in 0.0..111.0f64, v in 0.0..79.0f64, d in 2.0..50.0f64) {
        let k = intrinsics();
        let there = project_pixel(PixelCoord::new(u, v), d, &k, &p).unwrap();
        prop_assume!(there.depth > 0.0);
        let back = project_pixel(there.coord, there.depth, &k, &p.inverse()).unwrap();
        assert_abs_diff_eq!(back.coord.u, u, epsilon = 1e-8);
        assert_abs_diff_eq!(back.coord.v, v, epsilon = 1e-8);
        assert_abs_diff_eq!(back.depth, d, epsilon = 1e-9);
    }

    #[test]
    fn identity_pose_keeps_pixels(u in 0.0..111.0f64, v in 0.0..79.0f64, d in 0.1..80.0f64) {
        let r = project_pixel(PixelCoord::new(u, v), d, &intrinsics(), &Pose::identity()).unwrap();
        assert_abs_diff_eq!(r.coord.u, u, epsilon = 1e-12);
        assert_abs_diff_eq!(r.coord.v, v, epsilon = 1e-12);
        prop_assert!(r.valid);
    }

    #[test]
    fn bilinear_stays_within_corners(img in image(6, 5), u in 0.0..5.0f64, v in 0.0..4.0f64) {
        let s = bilinear_sample(&img, PixelCoord::new(u, v)).unwrap();
        let (x0, y0) = (u.floor() as usize, v.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(5), (y0 + 1).min(4));
        for c in 0..3 {
            let corners = [img.rgb(x0, y0)[c], img.rgb(x1, y0)[c], img.rgb(x0, y1)[c], img.rgb(x1, y1)[c]];
            let lo = corners.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(s[c] >= lo - 1e-12 && s[c] <= hi + 1e-12);
        }
        let (xi, yi) = (u.round().min(5.0), v.round().min(4.0));
        let at = bilinear_sample(&img, PixelCoord::new(xi, yi)).unwrap();
        prop_assert_eq!(at, img.rgb(xi as usize, yi as usize));
    }

    #[test]
    fn photometric_error_is_bounded_and_symmetric(a in image(7, 6), b in image(7, 6)) {
        let ab = photometric_error(&a, &b).unwrap();
        let ba = photometric_error(&b, &a).unwrap();
        let aa = photometric_error(&a, &a).unwrap();
        for i in 0..42 {
            let e = ab.values.as_slice()[i];
            prop_assert!((0.0..=1.0).contains(&e));
            assert_abs_diff_eq!(e, ba.values.as_slice()[i], epsilon = 1e-12);
            assert_abs_diff_eq!(aa.values.as_slice()[i], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn selection_takes_the_minimum(vals in prop::collection::vec(prop::array::uniform4(0.0..1.0f64), 20)) {
        let maps: Vec<ErrorMap> = (0..4)
            .map(|k| ErrorMap::new(Grid::from_fn(5, 4, |x, y| vals[x + 5 * y][k]), Grid::filled(5, 4, true)).unwrap())
            .collect();
        let refs: Vec<&ErrorMap> = maps.iter().collect();
        let sel = select_by_error(&refs).unwrap();
        for i in 0..20 {
            let k = sel.index.as_slice()[i].unwrap() as usize;
            let min = vals[i].iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(vals[i][k], min);
            prop_assert!(vals[i][..k].iter().all(|v| *v > min), "ties go to the earliest candidate");
        }
    }

    #[test]
    fn uncertainty_mask_is_symmetric_and_scale_free(a in depths(30), b in depths(30), c in 0.01..100.0f64) {
        let da = DepthMap::from_vec(30, 1, a.clone()).unwrap();
        let db = DepthMap::from_vec(30, 1, b.clone()).unwrap();
        let m = uncertainty_mask(&da, &db).unwrap();
        prop_assert_eq!(&m, &uncertainty_mask(&db, &da).unwrap());
        let sa = da.map(|d| d * c);
        let sb = db.map(|d| d * c);
        prop_assert_eq!(&m, &uncertainty_mask(&sa, &sb).unwrap());
        for i in 0..30 {
            let ratio = (a[i] / b[i]).max(b[i] / a[i]);
            if (ratio - 2.0).abs() > 1e-9 {
                prop_assert_eq!(m.as_slice()[i], ratio > 2.0);
            }
        }
    }

    #[test]
    fn rate_weights_are_a_distribution(r1 in 1e-3..1e3f64, r2 in 1e-3..1e3f64, lambda in -3.0..3.0f64) {
        let w = rate_weights([r1, r2], lambda);
        prop_assert!(w[0] >= 0.0 && w[1] >= 0.0);
        assert_abs_diff_eq!(w[0] + w[1], 1.0, epsilon = 1e-12);
        prop_assert_eq!(rate_weights([r1, r2], 0.0), [0.5, 0.5]);
        if lambda.abs() > 1e-6 && (r1 / r2 - 1.0).abs() > 1e-6 {
            prop_assert_eq!(w[0] > w[1], (lambda > 0.0) == (r1 > r2));
        }
    }

    #[test]
    fn schedule_is_linear(total in 1usize..2000, frac in 0.0..=1.0f64) {
        let step = (frac * total as f64).floor() as usize;
        let l = lambda_at(step, total).unwrap();
        assert_abs_diff_eq!(l, 3.0 - 6.0 * step as f64 / total as f64, epsilon = 1e-12);
        prop_assert!(lambda_at(total + 1, total).is_err());
    }

    #[test]
    fn metrics_ignore_global_scale(gt in depths(24), pred in depths(24), c in 0.05..20.0f64) {
        let gt = DepthMap::from_vec(6, 4, gt).unwrap();
        let pred = DepthMap::from_vec(6, 4, pred).unwrap();
        let all = PixelMask::filled(6, 4, true);
        let m = depth_metrics(&pred, &gt, &all).unwrap();
        let s = depth_metrics(&pred.map(|d| d * c), &gt, &all).unwrap();
        assert_abs_diff_eq!(m.abs_rel, s.abs_rel, epsilon = 1e-9);
        assert_abs_diff_eq!(m.rmse, s.rmse, epsilon = 1e-9);
        assert_abs_diff_eq!(m.rmse_log, s.rmse_log, epsilon = 1e-9);
        prop_assert_eq!([m.a1, m.a2, m.a3], [s.a1, s.a2, s.a3]);
        prop_assert!(m.a1 <= m.a2 && m.a2 <= m.a3);
    }
}
