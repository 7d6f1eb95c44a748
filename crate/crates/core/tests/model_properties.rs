use fracepi::model::{
    disease_free_equilibria, endemic_equilibrium_residual, force_of_infection, r0, refine_endemic_equilibrium,
    rhs, EquilibriumKind, ModelParams, Param, RefineOptions, State,
};
use proptest::prelude::*;

/// Second evaluator written term by term from the model equations.
fn reference_rhs(y: &State, p: &ModelParams) -> [f64; 7] {
    let humans = y.s + y.a + y.i + y.d;
    let lambda = p.beta * (p.r * y.a + y.i) * y.d / humans + p.vartheta * y.g_f;
    let s = p.pi + p.xi * y.a - (1.0 - p.u) * lambda * y.s - p.mu_h * y.s;
    let a = (1.0 - p.u) * lambda * y.s - (p.mu_h + p.eta + p.xi) * y.a;
    let i = p.eta * y.a - (p.mu_h + p.delta) * y.i;
    let d = p.psi * (y.a + y.i) - ((1.0 - p.u) + p.theta + p.gamma) * y.d;
    let pf = p.sigma * y.g_f - (p.rho + p.mu_f) * y.p_f - p.tau * y.p_f * y.w_p;
    let gf = p.rho * y.p_f - p.mu_f * y.g_f;
    let wp = p.kappa * p.tau * y.p_f * y.w_p - p.mu_f * y.w_p;
    [s, a, i, d, pf, gf, wp]
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * scale.max(a.abs()).max(b.abs()).max(1.0)
}

fn feasible_state() -> impl Strategy<Value = State> {
    (
        1.0..1e6f64,
        0.0..1e6f64,
        0.0..1e5f64,
        0.0..1e5f64,
        0.0..1e6f64,
        0.0..1e6f64,
        0.0..1e4f64,
    )
        .prop_map(|(s, a, i, d, p_f, g_f, w_p)| State {
            s,
            a,
            i,
            d,
            p_f,
            g_f,
            w_p,
        })
}

fn valid_params() -> impl Strategy<Value = ModelParams> {
    (0.5..1.5f64, 0.5..1.5f64, 0.5..1.5f64, 0.0..1.0f64, 0.5..1.5f64, 0.5..1.5f64).prop_map(
        |(xi, rho, vartheta, u, kappa, tau)| {
            let b = ModelParams::baseline();
            b.with(Param::Xi, b.xi * xi)
                .with(Param::Rho, b.rho * rho)
                .with(Param::Vartheta, b.vartheta * vartheta)
                .with(Param::U, u)
                .with(Param::Kappa, b.kappa * kappa)
                .with(Param::Tau, b.tau * tau)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rhs_matches_second_evaluator(y in feasible_state(), p in valid_params()) {
        let got = rhs(0.0, &y, &p).unwrap();
        let want = reference_rhs(&y, &p);
        let scale = y.to_array().iter().fold(0.0_f64, |m, v| m.max(*v)) * 1e-3;
        for c in 0..7 {
            prop_assert!(close(got[c], want[c], scale), "component {c}: {} vs {}", got[c], want[c]);
        }
        let lambda = force_of_infection(&y, &p).unwrap();
        prop_assert!(lambda >= 0.0);
    }

    #[test]
    fn block_sums(y in feasible_state(), p in valid_params()) {
        let f = rhs(0.0, &y, &p).unwrap();
        let human = f[0] + f[1] + f[2] + f[3];
        let expected = p.pi - p.mu_h * (y.s + y.a + y.i) - p.delta * y.i + p.psi * (y.a + y.i) - p.k3() * y.d;
        prop_assert!(close(human, expected, y.n_h()));
        let fly = f[4] + f[5] + f[6];
        let expected = p.sigma * y.g_f - p.mu_f * y.n_f() - p.tau * y.p_f * y.w_p + p.kappa * p.tau * y.p_f * y.w_p;
        prop_assert!(close(fly, expected, y.n_f()));
    }

    #[test]
    fn field_points_inward_on_boundary(y in feasible_state(), p in valid_params(), c in 0usize..7) {
        let mut v = y.to_array();
        v[c] = 0.0;
        if v[..4].iter().sum::<f64>() > 0.0 {
            let f = rhs(0.0, &State::from_slice(&v), &p).unwrap();
            prop_assert!(f[c] >= 0.0, "compartment {c}: {}", f[c]);
        }
    }

    #[test]
    fn r0_non_negative_and_decreasing_in_u(p in valid_params(), u1 in 0.0..1.0f64, du in 1e-6..1.0f64) {
        let u2 = (u1 + du).min(1.0);
        let a = r0(&p.with(Param::U, u1)).unwrap();
        let b = r0(&p.with(Param::U, u2)).unwrap();
        prop_assert!(a >= 0.0 && b >= 0.0);
        prop_assert!(b < a);
    }
}

#[test]
fn baseline_r0_matches_high_precision_evaluation() {
    let p = ModelParams::baseline();
    let v = r0(&p).unwrap();
    assert!((v - 0.145_516_602_435_317_191_366_5).abs() < 1e-14, "{v}");
    let v = r0(&p.with(Param::U, 0.5)).unwrap();
    assert!((v - 0.140_138_480_909_196_703_829_2).abs() < 1e-14, "{v}");
}

#[test]
fn r0_grid_strictly_decreasing() {
    let p = ModelParams::baseline();
    let values: Vec<f64> = (0..=100).map(|k| r0(&p.with(Param::U, k as f64 / 100.0)).unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(values[100], 0.0);
}

#[test]
fn trivial_equilibrium_is_exact() {
    let p = ModelParams::baseline();
    let dfe = disease_free_equilibria(&p).unwrap();
    assert!((dfe.e2.s - 87_700.0).abs() < 1e-9);
    let res = rhs(0.0, &dfe.e2, &p).unwrap();
    assert!(res.iter().all(|r| r.abs() <= 1e-12 * 87_700.0), "{res:?}");
    assert!(dfe.warnings.is_empty());
}

#[test]
fn coexistence_point_residuals() {
    let p = ModelParams::baseline();
    let dfe = disease_free_equilibria(&p).unwrap();
    let rep = endemic_equilibrium_residual(&dfe.e1, &p).unwrap();
    let fly_scale = dfe.e1.p_f.max(dfe.e1.g_f).max(dfe.e1.w_p);
    assert!(rep.fly_residual() <= 1e-12 * fly_scale, "{:?}", rep.residual);
    // The infection term does not vanish at this point when u < 1 and vartheta > 0.
    let expected_s = -(1.0 - p.u) * p.vartheta * p.rho / (p.kappa * p.tau) * p.pi / p.mu_h;
    assert!(((rep.residual[0] - expected_s) / expected_s).abs() < 1e-12);
    assert_eq!(rep.kind, EquilibriumKind::DiseaseFree);

    let closed = endemic_equilibrium_residual(&dfe.e1, &p.with(Param::U, 1.0)).unwrap();
    assert!(closed.human_residual() <= 1e-12 * 87_700.0);
}

#[test]
fn negative_wasp_equilibrium_warns() {
    let p = ModelParams::baseline().with(Param::Sigma, 1e-6);
    let dfe = disease_free_equilibria(&p).unwrap();
    assert!(dfe.e1.w_p < 0.0);
    assert_eq!(dfe.warnings.len(), 1);
}

#[test]
fn generic_point_has_residual() {
    let p = ModelParams::baseline();
    let rep = endemic_equilibrium_residual(&State::baseline_initial(), &p).unwrap();
    assert!(rep.max_abs_residual > 0.0);
    assert_eq!(rep.kind, EquilibriumKind::Endemic);
    let direct = rhs(0.0, &State::baseline_initial(), &p).unwrap();
    assert_eq!(rep.residual, direct);
}

#[test]
fn refined_endemic_point_is_stationary() {
    let p = ModelParams::baseline();
    let r = refine_endemic_equilibrium(&State::baseline_initial(), &p, &RefineOptions::default()).unwrap();
    assert!(r.converged, "{} iterations, residual {}", r.iterations, r.report.max_abs_residual);
    let scale = r.report.point.to_array().iter().fold(1.0_f64, |m, v| m.max(*v));
    assert!(r.report.max_abs_residual <= 1e-10 * scale);
    assert!(r.report.point.a > 0.0);
}

#[test]
fn baseline_initial_rhs_is_infection_dominated() {
    let p = ModelParams::baseline();
    let y = State::baseline_initial();
    let f = rhs(0.0, &y, &p).unwrap();
    assert!(f.iter().all(|v| v.is_finite()));
    let infection = (1.0 - p.u) * force_of_infection(&y, &p).unwrap() * y.s;
    assert!(f[0] < 0.0);
    assert!(infection > (p.pi + p.xi * y.a).abs());
}
