mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fkhom::geometry::{
    asymmetry, density_report, dist_omega, dist_omega_bound, omega, signed_distance,
    signed_distance_on,
};
use fkhom::harness::{
    faber_krahn_check, faber_krahn_entry, mu_levels, rate_sweep, scaling_sweep,
};
use fkhom::shape_opt::{
    build_penalty, hard_constraint_pipeline, minimize_j, volume_map, Penalty, ShapeProblem,
};
use fkhom::{
    eigen, gap_stability_check, homogenized_tensor, CoeffField, DomainMask, EigenOptions,
    FieldKind, HomogenizedTensor, OptOptions, Sym2, SweepOptions,
};

fn line(id: usize, pass: bool, detail: String, elapsed: Duration) {
    println!(
        "criterion {id:2}: {} ({:.1} s) {detail}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
}

fn disk(r: f64, h: f64) -> DomainMask {
    DomainMask::around([0.0, 0.0], r + 3.0 * h, h, |x| x[0].hypot(x[1]) < r).unwrap()
}

fn trig() -> (CoeffField, HomogenizedTensor) {
    let a = CoeffField::build(FieldKind::Trig { c: 2.0, amplitude: 1.0 }, 8).unwrap();
    let abar = homogenized_tensor(&a, 1e-10, 50_000).unwrap();
    (a, abar)
}

fn random_blob(rng: &mut ChaCha8Rng, h: f64) -> DomainMask {
    let k = rng.gen_range(2..5);
    let disks: Vec<([f64; 2], f64)> = (0..k)
        .map(|_| {
            (
                [rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)],
                rng.gen_range(0.3..0.6),
            )
        })
        .collect();
    DomainMask::around([0.0, 0.0], 1.2, h, |x| {
        disks.iter().any(|(c, r)| (x[0] - c[0]).hypot(x[1] - c[1]) < *r)
    })
    .unwrap()
}

#[test]
fn criterion_01_cell_problem_oracles() {
    let mut pass = true;
    let mut detail = String::new();
    let mut slowest = Duration::ZERO;

    let t = Instant::now();
    let m = [[2.0, 0.3], [0.3, 1.0]];
    let c = CoeffField::build(FieldKind::Constant { m }, 16).unwrap();
    let abar = homogenized_tensor(&c, 1e-12, 10_000).unwrap().abar;
    let err_c = (abar.xx - 2.0).abs().max((abar.xy - 0.3).abs()).max((abar.yy - 1.0).abs());
    pass &= err_c < 1e-10;
    slowest = slowest.max(t.elapsed());

    let t = Instant::now();
    let lam = CoeffField::build(FieldKind::Laminate { alpha: 1.0, beta: 4.0 }, 128).unwrap();
    let abar = homogenized_tensor(&lam, 1e-10, 50_000).unwrap().abar;
    let (e1, e2) = ((abar.xx / 1.6 - 1.0).abs(), (abar.yy / 2.5 - 1.0).abs());
    pass &= e1 < 0.01 && e2 < 0.01 && abar.xy.abs() < 0.01;
    slowest = slowest.max(t.elapsed());

    let t = Instant::now();
    let cb = CoeffField::build(FieldKind::Checkerboard { alpha: 1.0, beta: 4.0 }, 256).unwrap();
    let abar = homogenized_tensor(&cb, 1e-10, 50_000).unwrap().abar;
    let ecb = (abar.xx / 2.0 - 1.0).abs().max((abar.yy / 2.0 - 1.0).abs());
    pass &= ecb < 0.05 && abar.xy.abs() < 0.1;
    slowest = slowest.max(t.elapsed());

    pass &= slowest < Duration::from_secs(30);
    detail += &format!(
        "constant err {err_c:.1e}; laminate rel err ({e1:.2e}, {e2:.2e}); checkerboard rel err {ecb:.2e}"
    );
    line(1, pass, detail, slowest);
    assert!(pass);
}

#[test]
fn criterion_02_eigenvalue_oracles() {
    let t = Instant::now();
    let h = 1.0 / 256.0;
    let opts = EigenOptions::default();
    let square = DomainMask::from_fn(256, 256, h, [0.0, 0.0], |_| true).unwrap();
    let ls = eigen(&Sym2::IDENTITY, &square, 1, &opts).unwrap().lambda1;
    let es = (ls / (2.0 * PI * PI) - 1.0).abs();
    let ld = eigen(&Sym2::IDENTITY, &disk(1.0, h), 1, &opts).unwrap().lambda1;
    let ed = (ld / common::lambda_disk() - 1.0).abs();
    let elapsed = t.elapsed();
    let pass = es < 1e-3 && ed < 0.01 && elapsed < Duration::from_secs(60);
    line(
        2,
        pass,
        format!("square rel err {es:.2e}; disk rel err {ed:.2e} (j01 oracle {:.8})", common::j01()),
        elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_03_optimizer_calibration() {
    let t = Instant::now();
    let h = 1.0 / 32.0;
    let lam = common::lambda_disk();
    let mu = lam / PI;
    let side = PI.sqrt();
    let init = DomainMask::around([0.0, 0.0], 2.0, h, |x| {
        x[0].abs() < side / 2.0 && x[1].abs() < side / 2.0
    })
    .unwrap();
    let res = minimize_j(
        &Sym2::IDENTITY,
        Penalty::Constant(mu),
        &init,
        &EigenOptions::default(),
        &OptOptions::default(),
    )
    .unwrap();
    let target = lam + mu * PI;
    let rel = (res.energy / target - 1.0).abs();
    let asym = asymmetry(&res.mask, Sym2::IDENTITY).unwrap();
    // against the unit disk itself, not just the best translate
    let unit = disk(1.0, h);
    let vs_unit = res.mask.symmetric_difference_volume(&unit).unwrap() / res.mask.volume();
    let elapsed = t.elapsed();
    let pass = asym.value < 0.05 && vs_unit < 0.05 && rel < 0.02 && elapsed < Duration::from_secs(300);
    line(
        3,
        pass,
        format!(
            "asymmetry {:.4}, |UΔB₁|/|U| {vs_unit:.4}, J rel err {rel:.2e}, {} iterations",
            asym.value,
            res.iterations()
        ),
        elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_04_scaling_exponents() {
    let t = Instant::now();
    let (a, abar) = trig();
    let p = ShapeProblem::new(&a, abar, 1.0 / 8.0);
    let s = scaling_sweep(&p, &mu_levels(&SweepOptions::default())).unwrap();
    let (sl, sm) = (s.lambda_fit.slope, s.volume_fit.slope);
    let pass = (sl - 0.5).abs() <= 0.05 && (sm + 0.5).abs() <= 0.05 && s.rows.len() == 4;
    line(4, pass, format!("slopes lambda {sl:.4}, volume {sm:.4}"), t.elapsed());
    assert!(pass);
}

#[test]
fn criterion_05_homogenization_rate() {
    let t = Instant::now();
    let (a, abar) = trig();
    let p = ShapeProblem::new(&a, abar, 1.0 / 8.0);
    let s = rate_sweep(&p, &mu_levels(&SweepOptions::default()), true, None).unwrap();
    let slope = s.err_fit.map(|f| f.slope).unwrap_or(f64::NAN);
    let errs: Vec<String> = s.rows.iter().map(|r| format!("{:.4}", r.scaled_err)).collect();
    let asym: Vec<String> = s.rows.iter().map(|r| format!("{:.4}", r.asym)).collect();
    let pass = s.rows.len() >= 4
        && s.err_strictly_decreasing()
        && s.asym_strictly_decreasing()
        && slope <= -0.25;
    line(
        5,
        pass,
        format!("scaled_err [{}], asym [{}], slope {slope:.3}", errs.join(", "), asym.join(", ")),
        t.elapsed(),
    );
    assert!(pass);
}

#[test]
fn criterion_06_volume_map_monotone() {
    let t = Instant::now();
    let (a, abar) = trig();
    let p = ShapeProblem::new(&a, abar, 1.0 / 8.0);
    let grid: Vec<f64> = (0..8).map(|k| 0.03 * 10f64.powf(k as f64 / 7.0)).collect();
    let scan = volume_map(&p, &grid);
    let (pass, detail) = match &scan {
        Ok(s) => {
            let vols: Vec<String> = s.rows.iter().map(|r| format!("{:.3}", r.volume)).collect();
            let ok = s.rows.len() == 8 && s.check_monotone().is_ok();
            (ok, format!("volumes [{}], jumps {:?}", vols.join(", "), s.detected_jumps))
        }
        Err(e) => (false, format!("{e}")),
    };
    line(6, pass, detail, t.elapsed());
    assert!(pass);
}

#[test]
fn criterion_07_penalization_identity() {
    let t = Instant::now();
    let h = 1.0 / 32.0;
    let (p, gamma0) = (7.0, 0.1);
    let u_star = disk(1.0, h);
    let mu_star = common::lambda_disk() / PI;
    let g = build_penalty(&u_star, mu_star, p, gamma0).unwrap();

    // ∫_{U*} ω from the distance field directly
    let df = signed_distance(&u_star).unwrap();
    let scale = u_star.volume().sqrt();
    let int_omega: f64 = df
        .values()
        .iter()
        .filter(|&&d| d < 0.0)
        .map(|&d| h * h * omega(-d / scale, p, gamma0))
        .sum();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let opts = EigenOptions::default();
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let om = random_blob(&mut rng, h);
        let lambda = eigen(&Sym2::IDENTITY, &om, 1, &opts).unwrap().lambda1;
        let j_g = lambda + g.integral(&om).unwrap();
        let j_mu = lambda + mu_star * om.volume();
        let d = dist_omega(&om, &u_star, p, gamma0).unwrap();
        let defect = (j_g - j_mu - mu_star * d + mu_star * int_omega).abs();
        worst = worst.max(defect / j_g);
    }
    let pass = worst < 1e-8;
    line(7, pass, format!("max relative defect {worst:.2e} over 5 masks"), t.elapsed());
    assert!(pass);
}

#[test]
fn criterion_08_dist_omega_bound() {
    let t = Instant::now();
    let h = 1.0 / 24.0;
    let (p, gamma) = (7.0, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = 0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..20 {
        let a = random_blob(&mut rng, h);
        let b = random_blob(&mut rng, h);
        let bound = dist_omega_bound(&a, &b, p, gamma).unwrap();
        // left side: plain cell counting
        let lhs = a.symmetric_difference_volume(&b).unwrap() / b.volume();
        // right side: dist_ω and a brute-force two-sided strip constant
        let d = dist_omega(&a, &b, p, gamma).unwrap();
        let frame = a.common_frame(&b).unwrap().pad(1);
        let df = signed_distance_on(&b, Some(frame)).unwrap();
        let mut dists: Vec<f64> = df.values().iter().map(|v| v.abs()).collect();
        dists.sort_by(f64::total_cmp);
        let vb = b.volume();
        let strip = dists
            .iter()
            .enumerate()
            .filter(|(k, &t)| dists.get(k + 1).is_none_or(|&n| n > t))
            .map(|(k, &t)| (k + 1) as f64 * h * h / (vb.sqrt() * t))
            .fold(0.0, f64::max);
        let rhs = if d > 0.0 {
            (d / vb) * (1.0 + 1.0 / gamma + (2.0 + strip * vb / d).ln().powf(p))
        } else {
            0.0
        };
        let agree = (lhs - bound.lhs).abs() <= 1e-12 && (rhs - bound.rhs).abs() <= 1e-9 * rhs.max(1.0);
        if !(lhs <= rhs && agree && bound.holds) {
            failures += 1;
        }
        if rhs > 0.0 {
            worst_ratio = worst_ratio.max(lhs / rhs);
        }
    }
    let pass = failures == 0;
    line(
        8,
        pass,
        format!("{failures} failures over 20 pairs; max lhs/rhs {worst_ratio:.3e}"),
        t.elapsed(),
    );
    assert!(pass);
}

#[test]
fn criterion_09_selection_pipeline() {
    let t = Instant::now();
    let h = 1.0 / 24.0;
    let opts = EigenOptions::default();
    let full = disk(1.0, h);
    // slot cut inward from the right edge, sized to 3% of the notched area
    let width = 0.25;
    let depth = 0.03 * PI / 1.03 / width;
    let mut u = full.clone();
    u.fill(|x| x[0].hypot(x[1]) < 1.0 && !(x[1].abs() < width / 2.0 && x[0] > 1.0 - depth));
    let notch = full.volume() - u.volume();
    let m = u.volume();

    let p = ShapeProblem::new(&Sym2::IDENTITY, HomogenizedTensor::identity(), h);
    let (omega_star, report) = hard_constraint_pipeline(&p, &u, 7.0, 0.1).unwrap();

    let lam_u = eigen(&Sym2::IDENTITY, &u, 1, &opts).unwrap().lambda1;
    let lam_full = eigen(&Sym2::IDENTITY, &full, 1, &opts).unwrap().lambda1;
    let r_m = (m / PI).sqrt();
    let lam_bm = eigen(&Sym2::IDENTITY, &disk(r_m, h), 1, &opts).unwrap().lambda1;
    let bound = 1.5 * m * (lam_u - lam_full).abs().max((lam_u - lam_bm).abs());

    let reg_full = density_report(&full).unwrap();
    let reg_star = density_report(&omega_star).unwrap();
    let within2 = |x: f64, y: f64| x <= 2.0 * y && y <= 2.0 * x;

    let pass = report.measure_closeness < 0.06
        && report.eigen_closeness <= bound
        && within2(reg_star.kappa0, reg_full.kappa0)
        && within2(reg_star.strip_p, reg_full.strip_p);
    line(
        9,
        pass,
        format!(
            "notch {:.3} of |U|; |UΔΩ*|/m {:.4}; m|Δλ| {:.4} (bound {bound:.4}); kappa0 {:.3} vs {:.3}; strip_P {:.3} vs {:.3}; mu* {:.4}",
            notch / m,
            report.measure_closeness,
            report.eigen_closeness,
            reg_star.kappa0,
            reg_full.kappa0,
            reg_star.strip_p,
            reg_full.strip_p,
            report.mu_star
        ),
        t.elapsed(),
    );
    assert!(pass);
}

#[test]
fn criterion_10_gap_stability() {
    let t = Instant::now();
    let h = 1.0 / 32.0;
    let (a, _) = trig();
    let rect = DomainMask::around([0.0, 0.0], 0.8, h, |x| x[0].abs() < 0.6 && x[1].abs() < 0.4)
        .unwrap();
    let blob = {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        random_blob(&mut rng, 1.0 / 8.0)
    };
    let opts = EigenOptions::default();
    let mut ratios = Vec::new();
    let mut pass = true;
    let cases: [(&dyn fkhom::Coefficients, &DomainMask); 2] = [(&Sym2::IDENTITY, &rect), (&a, &blob)];
    for (coef, mask) in cases {
        let res = eigen(coef, mask, 2, &opts).unwrap();
        let u2 = res.u2.clone().unwrap();
        for eps in [0.05, 0.1, 0.15, 0.2] {
            let c = (1.0 - eps * eps as f64).sqrt();
            let v: Vec<f64> = res.u.iter().zip(&u2).map(|(x, y)| c * x + eps * y).collect();
            let g = gap_stability_check(coef, mask, &res, &v).unwrap();
            let ratio = g.lhs / g.rhs;
            pass &= g.holds && !g.degenerate_gap && (0.2..=1.0).contains(&ratio);
            ratios.push(ratio);
        }
    }
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.4}")).collect();
    line(10, pass, format!("lhs/rhs [{}]", shown.join(", ")), t.elapsed());
    assert!(pass);
}

#[test]
fn criterion_11_faber_krahn_positivity() {
    let t = Instant::now();
    let opts = EigenOptions::default();
    let id = HomogenizedTensor::identity();

    let h = 1.0 / 64.0;
    let square = DomainMask::from_fn(64, 64, h, [0.0, 0.0], |_| true).unwrap();
    let sq = faber_krahn_entry(&square, &id, &opts).unwrap();
    let sq_report = faber_krahn_check(&[sq], &id).unwrap();
    let gap_oracle = 2.0 * PI * PI - PI * common::lambda_disk();
    let asym_oracle = common::square_asymmetry();
    let gap_err = (sq_report.margins[0].gap / gap_oracle - 1.0).abs();
    let asym_err = (sq.asym / asym_oracle - 1.0).abs();

    let h = 1.0 / 24.0;
    let mut corpus = Vec::new();
    for k in 0..5 {
        let aspect = 1.3 + 0.4 * k as f64;
        let (w, hh) = (aspect.sqrt() * 0.8, 0.8 / aspect.sqrt());
        corpus.push(DomainMask::around([0.0, 0.0], 2.0, h, |x| x[0].abs() < w && x[1].abs() < hh).unwrap());
        corpus.push(
            DomainMask::around([0.0, 0.0], 2.2, h, |x| (x[0] / w).hypot(x[1] / hh) < 1.2).unwrap(),
        );
    }
    corpus.push(DomainMask::around([0.0, 0.0], 1.2, h, |x| {
        x[0] > -1.0 && x[1] > -1.0 && (x[0] < 0.0 || x[1] < 0.0)
    })
    .unwrap());
    corpus.push(DomainMask::around([0.0, 0.0], 1.2, h, |x| {
        (x[0].abs() < 1.0 && x[1].abs() < 0.3) || (x[0].abs() < 0.3 && x[1].abs() < 1.0)
    })
    .unwrap());
    corpus.push(DomainMask::around([0.0, 0.0], 1.2, h, |x| x[1] > -0.8 && x[1] < 1.0 - 1.5 * x[0].abs()).unwrap());
    corpus.push(DomainMask::around([0.0, 0.0], 1.2, h, |x| {
        (x[0] + 0.45).hypot(x[1]) < 0.55 || (x[0] - 0.45).hypot(x[1]) < 0.55
    })
    .unwrap());
    corpus.push(DomainMask::around([0.0, 0.0], 1.2, h, |x| x[0].hypot(x[1]) < 1.0 && x[0].hypot(x[1]) > 0.35).unwrap());
    corpus.push(DomainMask::around([0.0, 0.0], 1.2, h, |x| x[0].abs() + x[1].abs() < 1.0).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    while corpus.len() < 20 {
        corpus.push(random_blob(&mut rng, h));
    }
    let entries: Vec<_> = corpus
        .iter()
        .map(|m| faber_krahn_entry(m, &id, &opts).unwrap())
        .collect();
    let report = faber_krahn_check(&entries, &id);
    let (positive, floor) = match &report {
        Ok(r) => (r.margins.iter().all(|m| m.ratio.is_some_and(|x| x > 0.0)), r.floor),
        Err(_) => (false, f64::NAN),
    };
    let pass = positive && corpus.len() == 20 && gap_err < 0.05 && asym_err < 0.05;
    line(
        11,
        pass,
        format!(
            "20 masks positive: {positive}, floor {floor:.2}; square gap {:.4} (oracle {gap_oracle:.4}), asymmetry {:.4} (oracle {asym_oracle:.4})",
            sq_report.margins[0].gap, sq.asym
        ),
        t.elapsed(),
    );
    assert!(pass);
}
