use fracepi::fracode::{
    convergence_order, corrector_weight, mittag_leffler, predictor_weight, solve, FracError, FractionalIvp,
    RhsResult, SolverConfig,
};

// High-precision series values (50 significant digits, truncated to f64).
const ML_REFERENCE: [(f64, f64, f64); 8] = [
    (0.5, -1.0, 0.427_583_576_155_807_004_41),
    (0.75, -1.0, 0.393_108_302_815_754_061_77),
    (0.9, -1.0, 0.376_066_021_424_641_879_02),
    (0.8, -1.0, 0.386_948_578_618_976_846_17),
    (0.5, 2.0, 108.940_904_389_977_972_41),
    (0.9, -5.0, 0.034_431_324_804_098_418_323),
    (0.3, -0.5, 0.632_649_005_943_599_022_46),
    (0.6, -3.0, 0.159_703_480_265_091_220_69),
];

fn decay(_t: f64, y: &[f64], out: &mut [f64]) -> RhsResult {
    out[0] = -y[0];
    Ok(())
}

fn linear_ivp(alpha: f64) -> FractionalIvp<fn(f64, &[f64], &mut [f64]) -> RhsResult> {
    FractionalIvp::new(alpha, 0.0, 1.0, vec![1.0], decay as fn(f64, &[f64], &mut [f64]) -> RhsResult).unwrap()
}

fn ml_reference(alpha: f64) -> impl Fn(f64) -> Result<Vec<f64>, String> {
    move |t: f64| {
        mittag_leffler(alpha, -t.powf(alpha))
            .map(|v| vec![v])
            .map_err(|e| e.to_string())
    }
}

#[test]
fn mittag_leffler_matches_high_precision_series() {
    for (alpha, z, expected) in ML_REFERENCE {
        let v = mittag_leffler(alpha, z).unwrap();
        // Alternating terms cancel for large negative z.
        let tol = if z < -2.0 { 1e-9 } else { 1e-12 };
        assert!(
            ((v - expected) / expected).abs() < tol,
            "E_{alpha}({z}) = {v}, expected {expected}"
        );
    }
}

#[test]
fn mittag_leffler_half_matches_erfc_closed_form() {
    for z in [-3.0_f64, -1.0, -0.25, 0.5, 1.5] {
        let closed = (z * z).exp() * libm::erfc(-z);
        let v = mittag_leffler(0.5, z).unwrap();
        let tol = if z < -2.0 { 1e-9 } else { 1e-12 };
        assert!(((v - closed) / closed).abs() < tol, "z = {z}: {v} vs {closed}");
    }
}

#[test]
fn mittag_leffler_edge_cases() {
    assert!((mittag_leffler(1.0, -1.0).unwrap() - (-1.0_f64).exp()).abs() < 1e-10);
    assert_eq!(mittag_leffler(0.37, 0.0).unwrap(), 1.0);
    assert!(matches!(mittag_leffler(0.5, 51.0), Err(FracError::MittagLefflerDomain(_))));
    assert!(matches!(mittag_leffler(1.5, 1.0), Err(FracError::InvalidOrder(_))));
}

#[test]
fn linear_problem_agrees_with_mittag_leffler() {
    for alpha in [0.5, 0.75, 0.9] {
        let traj = solve(&linear_ivp(alpha), &SolverConfig::new(400).unwrap()).unwrap();
        let reference = ml_reference(alpha);
        let worst = traj
            .times
            .iter()
            .zip(traj.rows())
            .map(|(&t, row)| {
                let e = reference(t).unwrap()[0];
                ((row[0] - e) / e).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-2, "alpha = {alpha}: max relative error {worst}");
    }
}

#[test]
fn classical_order_matches_exponential() {
    let traj = solve(&linear_ivp(1.0), &SolverConfig::new(1000).unwrap()).unwrap();
    assert!((traj.last()[0] - (-1.0_f64).exp()).abs() < 1e-5);
}

#[test]
fn order_point_eight_at_unit_time() {
    let traj = solve(&linear_ivp(0.8), &SolverConfig::new(400).unwrap()).unwrap();
    let expected = 0.386_948_578_618_976_846_17;
    assert!(((traj.last()[0] - expected) / expected).abs() < 1e-2);
}

#[test]
fn zero_rhs_keeps_constant() {
    let zero = |_t: f64, _y: &[f64], out: &mut [f64]| -> RhsResult {
        out.fill(0.0);
        Ok(())
    };
    let ivp = FractionalIvp::new(0.6, 0.0, 5.0, vec![3.5, -1.25], zero).unwrap();
    let traj = solve(&ivp, &SolverConfig::new(50).unwrap()).unwrap();
    for row in traj.rows() {
        assert_eq!(row, &[3.5, -1.25]);
    }
    let est = convergence_order(&ivp, |_| Ok(vec![3.5, -1.25]), &[10, 20, 40]).unwrap();
    assert!(est.is_degenerate());
}

#[test]
fn first_step_is_order_h_alpha() {
    // Bounded right-hand sides: sup |f| is known on the visited range.
    let cases: [(f64, Box<dyn Fn(f64, &[f64], &mut [f64]) -> RhsResult>, f64); 3] = [
        (
            0.5,
            Box::new(|_t, y, out| {
                out[0] = -y[0];
                Ok(())
            }),
            1.0,
        ),
        (
            0.75,
            Box::new(|t, _y, out| {
                out[0] = t.sin();
                Ok(())
            }),
            1.0,
        ),
        (
            0.3,
            Box::new(|_t, y, out| {
                out[0] = y[0].cos();
                Ok(())
            }),
            1.0,
        ),
    ];
    for (alpha, f, sup) in cases {
        for m in [10usize, 100, 1000] {
            let ivp = FractionalIvp::new(alpha, 0.0, 1.0, vec![1.0], &f).unwrap();
            let traj = solve(&ivp, &SolverConfig::new(m).unwrap()).unwrap();
            let h = 1.0 / m as f64;
            let bound = 2.0 * sup / libm::tgamma(alpha + 1.0) * h.powf(alpha);
            let jump = (traj.row(1)[0] - traj.row(0)[0]).abs();
            assert!(jump <= bound, "alpha = {alpha}, M = {m}: {jump} > {bound}");
        }
    }
}

#[test]
fn weights_positive_up_to_ten_thousand() {
    for i in 1..=20 {
        let alpha = 0.05 * i as f64;
        let alpha = alpha.min(1.0);
        for n in (0usize..=10_000).step_by(97).chain([1, 2, 3, 9_999, 10_000]) {
            for j in [0, 1, n / 2, n.saturating_sub(1), n].into_iter().filter(|&j| j <= n) {
                assert!(predictor_weight(n, j, alpha).unwrap() > 0.0, "b n={n} j={j} alpha={alpha}");
                assert!(corrector_weight(n, j, alpha).unwrap() > 0.0, "d n={n} j={j} alpha={alpha}");
            }
            assert_eq!(corrector_weight(n, n + 1, alpha).unwrap(), 1.0);
        }
    }
}

#[test]
fn classical_weights_collapse() {
    for n in [1usize, 5, 40, 999] {
        assert_eq!(corrector_weight(n, 0, 1.0).unwrap(), 1.0);
        for j in 1..=n {
            assert!((corrector_weight(n, j, 1.0).unwrap() - 2.0).abs() < 1e-12);
            assert_eq!(predictor_weight(n, j, 1.0).unwrap(), 1.0);
        }
        assert_eq!(corrector_weight(n, n + 1, 1.0).unwrap(), 1.0);
    }
    assert_eq!(corrector_weight(3, 0, 1.0).unwrap(), 1.0);
    assert_eq!(corrector_weight(3, 2, 1.0).unwrap(), 2.0);
    assert_eq!(corrector_weight(3, 4, 0.7).unwrap(), 1.0);
    assert!((predictor_weight(1, 0, 0.5).unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-15);
}

#[test]
fn solve_is_deterministic() {
    let a = solve(&linear_ivp(0.7), &SolverConfig::new(300).unwrap()).unwrap();
    let b = solve(&linear_ivp(0.7), &SolverConfig::new(300).unwrap()).unwrap();
    assert_eq!(a, b);
    let bits = |t: &fracepi::fracode::Trajectory| t.rows().map(|r| r[0].to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn empirical_orders() {
    let est = convergence_order(&linear_ivp(1.0), |t| Ok(vec![(-t).exp()]), &[50, 100, 200, 400]).unwrap();
    let slope = est.slope.unwrap();
    assert!((slope - 2.0).abs() < 0.1, "alpha = 1 slope {slope}");

    let est = convergence_order(&linear_ivp(0.9), ml_reference(0.9), &[50, 100, 200, 400]).unwrap();
    assert!(est.slope.unwrap() >= 1.5, "alpha = 0.9 slope {:?}", est.slope);
}

#[test]
fn study_requires_doubling_counts() {
    let r = |t: f64| Ok(vec![(-t).exp()]);
    assert!(matches!(convergence_order(&linear_ivp(1.0), r, &[50, 100]), Err(FracError::InvalidStudy(_))));
    assert!(matches!(convergence_order(&linear_ivp(1.0), r, &[50, 100, 300]), Err(FracError::InvalidStudy(_))));
}

#[test]
fn rhs_failure_reports_step() {
    let failing = |t: f64, y: &[f64], out: &mut [f64]| -> RhsResult {
        if t > 0.45 {
            return Err("domain left".into());
        }
        out[0] = -y[0];
        Ok(())
    };
    let ivp = FractionalIvp::new(0.9, 0.0, 1.0, vec![1.0], failing).unwrap();
    match solve(&ivp, &SolverConfig::new(10).unwrap()) {
        Err(FracError::RhsFailure { step, message }) => {
            assert_eq!(step, 5);
            assert!(message.contains("domain left"));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn blow_up_is_reported_as_non_finite() {
    let cubic = |_t: f64, y: &[f64], out: &mut [f64]| -> RhsResult {
        out[0] = y[0].powi(3) * 1e10;
        Ok(())
    };
    let ivp = FractionalIvp::new(0.9, 0.0, 10.0, vec![10.0], cubic).unwrap();
    assert!(matches!(
        solve(&ivp, &SolverConfig::new(100).unwrap()),
        Err(FracError::NonFinite { .. })
    ));
}

#[test]
fn classical_order_sums_history_directly() {
    let f = |t: f64, y: &[f64], out: &mut [f64]| -> RhsResult {
        out[0] = y[1] - 0.1 * y[0] * y[0];
        out[1] = -y[0] + t.cos();
        Ok(())
    };
    let ivp = FractionalIvp::new(1.0, 0.0, 3.0, vec![1.0, 0.5], f).unwrap();
    let m = 300;
    let traj = solve(&ivp, &SolverConfig::new(m).unwrap()).unwrap();
    let h = 3.0 / m as f64;
    let eval = |t: f64, y: &[f64]| {
        let mut out = vec![0.0; 2];
        f(t, y, &mut out).unwrap();
        out
    };
    let y0 = [1.0, 0.5];
    let mut hist = vec![eval(0.0, &y0)];
    for n in 0..m {
        let t = (n + 1) as f64 * h;
        let p: Vec<f64> = (0..2).map(|c| y0[c] + h * hist.iter().map(|v| v[c]).sum::<f64>()).collect();
        let fp = eval(t, &p);
        let y: Vec<f64> = (0..2)
            .map(|c| {
                let inner: f64 = hist[1..].iter().map(|v| v[c]).sum();
                y0[c] + h / 2.0 * (hist[0][c] + 2.0 * inner + fp[c])
            })
            .collect();
        for c in 0..2 {
            assert!((traj.row(n + 1)[c] - y[c]).abs() < 1e-12, "step {}: {:?} vs {y:?}", n + 1, traj.row(n + 1));
        }
        hist.push(eval(t, traj.row(n + 1)));
    }
}
