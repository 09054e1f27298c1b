use proptest::prelude::*;

use fkhom::geometry::{dist_omega, dist_omega_bound, omega, signed_distance, squared_distance};
use fkhom::harness::{fit_loglog, read_rows, write_rows};
use fkhom::{DomainMask, ProblemConfig, SweepRow};

const H: f64 = 0.125;

fn mask_from(bits: &[bool], n: usize, shift: (i64, i64)) -> DomainMask {
    let origin = [shift.0 as f64 * H, shift.1 as f64 * H];
    DomainMask::from_fn(n, n, H, origin, |x| {
        let i = ((x[0] - origin[0]) / H).floor() as usize;
        let j = ((x[1] - origin[1]) / H).floor() as usize;
        bits[j * n + i]
    })
    .unwrap()
}

fn brute_squared_distance(n: usize, feature: &[bool]) -> Vec<f64> {
    (0..n * n)
        .map(|k| {
            let (i, j) = ((k % n) as f64, (k / n) as f64);
            (0..n * n)
                .filter(|&f| feature[f])
                .map(|f| {
                    let (fi, fj) = ((f % n) as f64, (f / n) as f64);
                    (i - fi).powi(2) + (j - fj).powi(2)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn set_operation_volumes(
        a in prop::collection::vec(any::<bool>(), 64),
        b in prop::collection::vec(any::<bool>(), 64),
        sa in (-3i64..3, -3i64..3),
        sb in (-3i64..3, -3i64..3),
    ) {
        let (ma, mb) = (mask_from(&a, 8, sa), mask_from(&b, 8, sb));
        let union = ma.union(&mb).unwrap().volume();
        let inter = ma.intersection(&mb).unwrap().volume();
        let sym = ma.symmetric_difference_volume(&mb).unwrap();
        prop_assert!((union + inter - ma.volume() - mb.volume()).abs() < 1e-12);
        prop_assert!((sym - (union - inter)).abs() < 1e-12);
        prop_assert!((sym - mb.symmetric_difference_volume(&ma).unwrap()).abs() < 1e-12);
        prop_assert!(ma.intersection(&mb).unwrap().is_subset_of(&ma).unwrap());
    }

    #[test]
    fn distance_transform_is_exact(bits in prop::collection::vec(prop::bool::weighted(0.15), 100)) {
        let fast = squared_distance(10, 10, &bits);
        let slow = brute_squared_distance(10, &bits);
        for (f, s) in fast.iter().zip(&slow) {
            if s.is_finite() {
                prop_assert_eq!(*f, *s);
            } else {
                prop_assert!(*f >= 1e20);
            }
        }
    }

    #[test]
    fn signed_distance_sign_convention(bits in prop::collection::vec(any::<bool>(), 64)) {
        prop_assume!(bits.iter().any(|&b| b) && bits.iter().any(|&b| !b));
        let m = mask_from(&bits, 8, (0, 0));
        let d = signed_distance(&m).unwrap();
        let frame = d.frame();
        let (oi, oj) = m.global_offset().unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let v = d.at_global(oi + i as i64, oj + j as i64);
                if m.get(i, j) {
                    prop_assert!(v < 0.0);
                } else {
                    prop_assert!(v > 0.0);
                }
                prop_assert!(v.abs() >= 0.5 * H - 1e-12);
            }
        }
        prop_assert!(frame.len() >= 64);
    }

    #[test]
    fn mask_text_round_trip(bits in prop::collection::vec(any::<bool>(), 64), s in (-5i64..5, -5i64..5)) {
        let m = mask_from(&bits, 8, s);
        let back = DomainMask::from_text(&m.to_text()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn dist_omega_is_symmetric_and_bounded(
        a in prop::collection::vec(prop::bool::weighted(0.7), 64),
        b in prop::collection::vec(prop::bool::weighted(0.7), 64),
    ) {
        let (ma, mb) = (mask_from(&a, 8, (0, 0)), mask_from(&b, 8, (0, 0)));
        prop_assume!(!ma.is_empty() && !mb.is_empty());
        let d = dist_omega(&ma, &mb, 7.0, 0.1).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(d <= 0.1 * ma.symmetric_difference_volume(&mb).unwrap() + 1e-15);
        prop_assert!(dist_omega_bound(&ma, &mb, 7.0, 0.1).unwrap().holds);
    }

    #[test]
    fn omega_is_monotone_and_capped(s in 1e-6f64..1e3, t in 1e-6f64..1e3) {
        let (lo, hi) = if s < t { (s, t) } else { (t, s) };
        prop_assert!(omega(lo, 7.0, 0.1) <= omega(hi, 7.0, 0.1));
        prop_assert!(omega(hi, 7.0, 0.1) <= 0.1);
    }

    #[test]
    fn loglog_fit_recovers_exponent(slope in -2.0f64..2.0, c in 0.1f64..10.0) {
        let x = [1.0, 2.0, 4.0, 8.0, 16.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| c * v.powf(slope)).collect();
        let fit = fit_loglog(&x, &y).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!(fit.residual < 1e-10);
    }

    #[test]
    fn sweep_csv_round_trip(vals in prop::collection::vec(0.001f64..100.0, 12), iters in 0usize..500) {
        let row = SweepRow {
            mu: vals[0],
            m: vals[1],
            lambda_a: vals[2],
            lambda_bar_ellipsoid: vals[3],
            scaled_err: vals[4],
            asym: vals[5],
            hausdorff_scaled: vals[6],
            lip_scaled: vals[7],
            nondeg_scaled: vals[8],
            kappa0: vals[9],
            strip_p: vals[10],
            cal_e: -vals[11],
            iters,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        write_rows(&path, &[row.clone(), row.clone()]).unwrap();
        prop_assert_eq!(read_rows(&path).unwrap(), vec![row.clone(), row]);
    }
}

#[test]
fn config_rejects_bad_values() {
    let ok = r#"{"coeff": {"kind": "trig", "params": {"c": 2.0, "A": 1.0}}}"#;
    assert!(ProblemConfig::from_json(ok).is_ok());
    let bad = [
        r#"{"dim": 3, "coeff": {"kind": "trig", "params": {"c": 2.0, "A": 1.0}}}"#,
        r#"{"coeff": {"kind": "trig", "params": {"c": 1.0, "A": 1.0}}}"#,
        r#"{"coeff": {"kind": "laminate", "params": {"alpha": -1.0, "beta": 4.0}}}"#,
        r#"{"coeff": {"kind": "trig", "params": {"c": 2.0, "A": 1.0}}, "sweep": {"factor": 1.5}}"#,
        r#"{"coeff": {"kind": "trig", "params": {"c": 2.0, "A": 1.0}}, "grid": {"cells_per_period": 2}}"#,
        r#"{"coeff": {"kind": "trig", "params": {"c": 2.0, "A": 1.0}}, "extra": 1}"#,
    ];
    for text in bad {
        let cfg = ProblemConfig::from_json(text).and_then(|c| c.build_field().map(|_| c));
        assert!(cfg.is_err(), "accepted {text}");
    }
}

#[test]
fn sweep_csv_rejects_foreign_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("other.csv");
    std::fs::write(&path, "a,b\n1,2\n").unwrap();
    assert!(read_rows(&path).is_err());
}
