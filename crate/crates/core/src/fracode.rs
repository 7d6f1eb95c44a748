//! Caputo fractional initial-value problems and the Adams-Bashforth-Moulton
//! predictor-corrector (PECE) scheme that integrates them.
//!
//! The solver works on the Volterra form of the problem,
//!
//! ```text
//! y(t) = y0 + 1/Γ(α) ∫_0^t (t - s)^(α-1) f(s, y(s)) ds,
//! ```
//!
//! discretised on a uniform grid `t_n = t0 + n h`, `h = (t_end - t0) / M`.
//! Each step evaluates a product-rectangle predictor followed by a single
//! product-trapezoid corrector pass. The whole history of right-hand-side
//! values is retained, so a solve costs `O(M^2)` operations.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FracError {
    #[error("fractional order alpha must lie in (0, 1], got {0}")]
    InvalidOrder(f64),
    #[error("weight index out of range: j = {j} with n = {n}")]
    InvalidIndex { n: usize, j: usize },
    #[error("time interval must satisfy t_end > t0 (got t0 = {t0}, t_end = {t_end})")]
    InvalidInterval { t0: f64, t_end: f64 },
    #[error("step count must be at least 1")]
    InvalidStepCount,
    #[error("initial state must have at least one component")]
    EmptyState,
    #[error("right-hand side returned {got} components at step {step}, expected {expected}")]
    DimensionMismatch {
        step: usize,
        expected: usize,
        got: usize,
    },
    #[error("right-hand side failed at step {step}: {message}")]
    RhsFailure { step: usize, message: String },
    #[error("non-finite value in component {component} at step {step} (t = {time})")]
    NonFinite {
        step: usize,
        component: usize,
        time: f64,
    },
    #[error("Mittag-Leffler argument |z| = {0} exceeds the series validity bound 50")]
    MittagLefflerDomain(f64),
    #[error("Mittag-Leffler series did not converge within {terms} terms (last term {last_term:e})")]
    MittagLefflerNonConvergence { terms: usize, last_term: f64 },
    #[error("convergence study needs at least 3 step counts, each doubling the previous: {0}")]
    InvalidStudy(String),
    #[error("reference solution failed at t = {time}: {message}")]
    ReferenceFailure { time: f64, message: String },
}

/// Error type a right-hand side may return; only its message is kept.
pub type RhsResult = Result<(), String>;

/// Right-hand side `f(t, y)` of `D^α y = f(t, y)`.
///
/// Implementations write `dim()` values into `out`. Closures of the shape
/// `Fn(f64, &[f64], &mut [f64]) -> RhsResult` are accepted directly.
pub trait Rhs {
    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) -> RhsResult;

    /// Output length, when it is known independently of `y0`.
    fn dim(&self) -> Option<usize> {
        None
    }
}

impl<F> Rhs for F
where
    F: Fn(f64, &[f64], &mut [f64]) -> RhsResult,
{
    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) -> RhsResult {
        self(t, y, out)
    }
}

/// Validated fractional order in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Order(f64);

impl Order {
    pub fn new(alpha: f64) -> Result<Self, FracError> {
        if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
            Ok(Self(alpha))
        } else {
            Err(FracError::InvalidOrder(alpha))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

pub struct FractionalIvp<R> {
    pub alpha: Order,
    pub t0: f64,
    pub t_end: f64,
    pub y0: Vec<f64>,
    pub rhs: R,
}

impl<R: Rhs> FractionalIvp<R> {
    pub fn new(alpha: f64, t0: f64, t_end: f64, y0: Vec<f64>, rhs: R) -> Result<Self, FracError> {
        let alpha = Order::new(alpha)?;
        if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
            return Err(FracError::InvalidInterval { t0, t_end });
        }
        if y0.is_empty() {
            return Err(FracError::EmptyState);
        }
        if let Some(d) = rhs.dim() {
            if d != y0.len() {
                return Err(FracError::DimensionMismatch {
                    step: 0,
                    expected: y0.len(),
                    got: d,
                });
            }
        }
        Ok(Self {
            alpha,
            t0,
            t_end,
            y0,
            rhs,
        })
    }

    pub fn dim(&self) -> usize {
        self.y0.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverConfig {
    step_count: usize,
}

impl SolverConfig {
    pub fn new(step_count: usize) -> Result<Self, FracError> {
        if step_count == 0 {
            return Err(FracError::InvalidStepCount);
        }
        Ok(Self { step_count })
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn step(&self, t0: f64, t_end: f64) -> f64 {
        (t_end - t0) / self.step_count as f64
    }
}

/// Metadata carried alongside a solved trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub alpha: f64,
    pub t0: f64,
    pub t_end: f64,
    pub step_count: usize,
    pub step: f64,
}

/// Uniform time grid and the `(M + 1) × d` state matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    states: Vec<f64>,
    dim: usize,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    /// A trajectory consisting of the initial row only (zero-length horizon).
    pub fn initial_only(t0: f64, y0: &[f64], alpha: f64) -> Self {
        Self {
            times: vec![t0],
            states: y0.to_vec(),
            dim: y0.len(),
            meta: TrajectoryMeta {
                alpha,
                t0,
                t_end: t0,
                step_count: 0,
                step: 0.0,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.states[n * self.dim..(n + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    pub fn last(&self) -> &[f64] {
        self.row(self.len() - 1)
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.rows().map(|r| r[c]).collect()
    }
}

fn check_order(alpha: f64) -> Result<f64, FracError> {
    Order::new(alpha).map(Order::get)
}

fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `(k+1)^α - k^α`, written to avoid cancellation for large `k`.
fn rectangle_weight(k: usize, alpha: f64) -> f64 {
    if k == 0 || alpha == 1.0 {
        return 1.0;
    }
    let k = k as f64;
    k.powf(alpha) * (alpha * (1.0 / k).ln_1p()).exp_m1()
}

/// `(k+2)^(α+1) + k^(α+1) - 2 (k+1)^(α+1)`.
fn trapezoid_interior_weight(k: usize, alpha: f64) -> f64 {
    let k = k as f64;
    let p = alpha + 1.0;
    (k + 2.0).powf(p) + k.powf(p) - 2.0 * (k + 1.0).powf(p)
}

/// `n^(α+1) - (n - α)(n+1)^α`.
fn trapezoid_first_weight(n: usize, alpha: f64) -> f64 {
    let n = n as f64;
    n.powf(alpha + 1.0) - (n - alpha) * (n + 1.0).powf(alpha)
}

/// Predictor weight `b_{j,n+1} = (n-j+1)^α - (n-j)^α`.
pub fn predictor_weight(n: usize, j: usize, alpha: f64) -> Result<f64, FracError> {
    let alpha = check_order(alpha)?;
    if j > n {
        return Err(FracError::InvalidIndex { n, j });
    }
    Ok(rectangle_weight(n - j, alpha))
}

/// Corrector weight `d_{j,n+1}` for `0 <= j <= n + 1`.
pub fn corrector_weight(n: usize, j: usize, alpha: f64) -> Result<f64, FracError> {
    let alpha = check_order(alpha)?;
    if j > n + 1 {
        return Err(FracError::InvalidIndex { n, j });
    }
    Ok(if j == n + 1 {
        1.0
    } else if j == 0 {
        trapezoid_first_weight(n, alpha)
    } else {
        trapezoid_interior_weight(n - j, alpha)
    })
}

/// Weight tables indexed by the lag `n - j`; only `d_{0,n+1}` depends on `n`
/// itself and is kept separately.
struct WeightTables {
    rectangle: Vec<f64>,
    trapezoid: Vec<f64>,
    trapezoid_first: Vec<f64>,
}

impl WeightTables {
    fn new(m: usize, alpha: f64) -> Self {
        Self {
            rectangle: (0..m).map(|k| rectangle_weight(k, alpha)).collect(),
            trapezoid: (0..m).map(|k| trapezoid_interior_weight(k, alpha)).collect(),
            trapezoid_first: (0..m).map(|n| trapezoid_first_weight(n, alpha)).collect(),
        }
    }
}

/// Sum of `w[n - j] * f[j]` for `j` in `lo..=n`.
#[inline]
fn lagged_dot(weights: &[f64], history: &[f64], lo: usize, n: usize) -> f64 {
    history[lo..=n]
        .iter()
        .rev()
        .zip(&weights[..=n - lo])
        .map(|(f, w)| f * w)
        .sum()
}

fn evaluate<R: Rhs>(rhs: &R, t: f64, y: &[f64], out: &mut [f64], step: usize) -> Result<(), FracError> {
    rhs.eval(t, y, out)
        .map_err(|message| FracError::RhsFailure { step, message })?;
    check_finite(out, step, t)
}

fn check_finite(values: &[f64], step: usize, time: f64) -> Result<(), FracError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(component) => Err(FracError::NonFinite {
            step,
            component,
            time,
        }),
        None => Ok(()),
    }
}

/// Integrates `ivp` on `M = cfg.step_count()` uniform steps with the PECE scheme.
pub fn solve<R: Rhs>(ivp: &FractionalIvp<R>, cfg: &SolverConfig) -> Result<Trajectory, FracError> {
    let alpha = ivp.alpha.get();
    let m = cfg.step_count();
    let d = ivp.dim();
    let h = cfg.step(ivp.t0, ivp.t_end);
    let time = |n: usize| ivp.t0 + n as f64 * h;

    let predictor_scale = h.powf(alpha) / gamma(alpha + 1.0);
    let corrector_scale = h.powf(alpha) / gamma(alpha + 2.0);
    let weights = WeightTables::new(m, alpha);

    // Column-major history of f(t_j, y_j), one vector per component.
    let mut history: Vec<Vec<f64>> = (0..d).map(|_| Vec::with_capacity(m + 1)).collect();
    let mut states = Vec::with_capacity((m + 1) * d);
    states.extend_from_slice(&ivp.y0);

    let mut f = vec![0.0; d];
    evaluate(&ivp.rhs, ivp.t0, &ivp.y0, &mut f, 0)?;
    for (col, v) in history.iter_mut().zip(&f) {
        col.push(*v);
    }

    // At α = 1 every predictor weight is 1 and the corrector weights are
    // (1, 2, ..., 2), so both history sums follow from a running total.
    let classical = alpha == 1.0;
    let mut running = f.clone();

    let mut predicted = vec![0.0; d];
    let mut f_predicted = vec![0.0; d];
    let mut next = vec![0.0; d];
    for n in 0..m {
        let t_next = time(n + 1);
        for c in 0..d {
            let sum = if classical {
                running[c]
            } else {
                lagged_dot(&weights.rectangle, &history[c], 0, n)
            };
            predicted[c] = ivp.y0[c] + predictor_scale * sum;
        }
        check_finite(&predicted, n + 1, t_next)?;
        evaluate(&ivp.rhs, t_next, &predicted, &mut f_predicted, n + 1)?;

        for c in 0..d {
            let col = &history[c];
            let sum = if classical {
                2.0 * running[c] - col[0]
            } else if n >= 1 {
                weights.trapezoid_first[n] * col[0] + lagged_dot(&weights.trapezoid, col, 1, n)
            } else {
                weights.trapezoid_first[n] * col[0]
            };
            next[c] = ivp.y0[c] + corrector_scale * (sum + f_predicted[c]);
        }
        check_finite(&next, n + 1, t_next)?;
        evaluate(&ivp.rhs, t_next, &next, &mut f, n + 1)?;
        for (c, (col, v)) in history.iter_mut().zip(&f).enumerate() {
            col.push(*v);
            running[c] += v;
        }
        states.extend_from_slice(&next);
    }

    Ok(Trajectory {
        times: (0..=m).map(time).collect(),
        states,
        dim: d,
        meta: TrajectoryMeta {
            alpha,
            t0: ivp.t0,
            t_end: ivp.t_end,
            step_count: m,
            step: h,
        },
    })
}

const ML_MAX_TERMS: usize = 10_000;
const ML_REL_TOL: f64 = 1e-14;

/// One-parameter Mittag-Leffler function `E_α(z) = Σ z^k / Γ(αk + 1)` by
/// direct series summation.
///
/// Terms are formed in log space so that `Γ(αk + 1)` never overflows. The
/// series is valid for `|z| <= 50`, though cancellation makes large negative
/// arguments inaccurate well before that bound.
pub fn mittag_leffler(alpha: f64, z: f64) -> Result<f64, FracError> {
    let alpha = check_order(alpha)?;
    if !(z.abs() <= 50.0) {
        return Err(FracError::MittagLefflerDomain(z.abs()));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let log_abs_z = z.abs().ln();
    let mut sum = 1.0;
    let mut previous = 1.0_f64;
    for k in 1..ML_MAX_TERMS {
        let kf = k as f64;
        let magnitude = (kf * log_abs_z - libm::lgamma(alpha * kf + 1.0)).exp();
        let term = if z < 0.0 && k % 2 == 1 {
            -magnitude
        } else {
            magnitude
        };
        sum += term;
        // Only stop once the terms are past their peak.
        if magnitude < previous && magnitude <= ML_REL_TOL * sum.abs() {
            return Ok(sum);
        }
        previous = magnitude;
    }
    Err(FracError::MittagLefflerNonConvergence {
        terms: ML_MAX_TERMS,
        last_term: previous,
    })
}

/// Result of an empirical order-of-accuracy study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceEstimate {
    pub step_sizes: Vec<f64>,
    pub max_errors: Vec<f64>,
    /// Least-squares slope of `log(error)` against `log(h)`; `None` when every
    /// error is at rounding level and the slope carries no information.
    pub slope: Option<f64>,
}

impl ConvergenceEstimate {
    pub fn is_degenerate(&self) -> bool {
        self.slope.is_none()
    }
}

/// Solves `ivp` at each step count and fits the observed order against
/// `reference(t)`, using the max-norm error over components at `t_end`.
pub fn convergence_order<R, F>(
    ivp: &FractionalIvp<R>,
    reference: F,
    step_counts: &[usize],
) -> Result<ConvergenceEstimate, FracError>
where
    R: Rhs,
    F: Fn(f64) -> Result<Vec<f64>, String>,
{
    if step_counts.len() < 3 {
        return Err(FracError::InvalidStudy(format!("{step_counts:?}")));
    }
    if step_counts[0] == 0 || step_counts.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(FracError::InvalidStudy(format!("{step_counts:?}")));
    }

    let mut step_sizes = Vec::with_capacity(step_counts.len());
    let mut max_errors = Vec::with_capacity(step_counts.len());
    let mut scale = 0.0_f64;
    for &m in step_counts {
        let cfg = SolverConfig::new(m)?;
        let traj = solve(ivp, &cfg)?;
        let t = *traj.times.last().expect("non-empty grid");
        let exact = reference(t).map_err(|message| FracError::ReferenceFailure { time: t, message })?;
        let mut err = 0.0_f64;
        for (a, b) in traj.last().iter().zip(&exact) {
            err = err.max((a - b).abs());
            scale = scale.max(b.abs());
        }
        step_sizes.push(cfg.step(ivp.t0, ivp.t_end));
        max_errors.push(err);
    }

    let floor = 64.0 * f64::EPSILON * scale.max(1.0);
    let slope = if max_errors.iter().all(|&e| e <= floor) {
        None
    } else {
        let xs: Vec<f64> = step_sizes.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = max_errors.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
        Some(least_squares_slope(&xs, &ys))
    };
    Ok(ConvergenceEstimate {
        step_sizes,
        max_errors,
        slope,
    })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(t: f64, y: &[f64], out: &mut [f64]) -> RhsResult {
        let _ = t;
        out[0] = -y[0];
        Ok(())
    }

    #[test]
    fn predictor_weight_examples() {
        assert_eq!(predictor_weight(0, 0, 0.5).unwrap(), 1.0);
        for j in 0..=5 {
            assert_eq!(predictor_weight(5, j, 1.0).unwrap(), 1.0);
        }
        let w = predictor_weight(1, 0, 0.5).unwrap();
        assert!((w - 0.414_213_562_373_095_1).abs() < 1e-15);
    }

    #[test]
    fn corrector_weight_examples() {
        assert_eq!(corrector_weight(3, 4, 0.7).unwrap(), 1.0);
        assert_eq!(corrector_weight(3, 0, 1.0).unwrap(), 1.0);
        assert_eq!(corrector_weight(3, 2, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn weight_domain_errors() {
        assert_eq!(predictor_weight(2, 3, 0.5), Err(FracError::InvalidIndex { n: 2, j: 3 }));
        assert_eq!(corrector_weight(2, 4, 0.5), Err(FracError::InvalidIndex { n: 2, j: 4 }));
        assert!(matches!(predictor_weight(1, 0, 0.0), Err(FracError::InvalidOrder(_))));
        assert!(matches!(corrector_weight(1, 0, 1.5), Err(FracError::InvalidOrder(_))));
        assert!(matches!(predictor_weight(1, 0, f64::NAN), Err(FracError::InvalidOrder(_))));
    }

    #[test]
    fn rectangle_weight_matches_plain_difference() {
        for &alpha in &[0.05, 0.3, 0.75, 1.0] {
            for k in [1usize, 2, 7, 100] {
                let plain = ((k + 1) as f64).powf(alpha) - (k as f64).powf(alpha);
                assert!((rectangle_weight(k, alpha) - plain).abs() < 1e-13 * plain.max(1e-3));
            }
        }
    }

    #[test]
    fn ivp_validation() {
        assert!(matches!(
            FractionalIvp::new(0.0, 0.0, 1.0, vec![1.0], decay),
            Err(FracError::InvalidOrder(_))
        ));
        assert!(matches!(
            FractionalIvp::new(0.5, 1.0, 1.0, vec![1.0], decay),
            Err(FracError::InvalidInterval { .. })
        ));
        assert!(matches!(
            FractionalIvp::new(0.5, 0.0, 1.0, vec![], decay),
            Err(FracError::EmptyState)
        ));
        assert_eq!(SolverConfig::new(0), Err(FracError::InvalidStepCount));
    }

    #[test]
    fn zero_rhs_keeps_constant() {
        let zero = |_t: f64, _y: &[f64], out: &mut [f64]| -> RhsResult {
            out.fill(0.0);
            Ok(())
        };
        let ivp = FractionalIvp::new(0.6, 0.0, 2.0, vec![3.5, -1.25], zero).unwrap();
        let traj = solve(&ivp, &SolverConfig::new(50).unwrap()).unwrap();
        assert_eq!(traj.len(), 51);
        for row in traj.rows() {
            assert_eq!(row, &[3.5, -1.25]);
        }
    }

    #[test]
    fn alpha_one_decay_matches_exp() {
        let ivp = FractionalIvp::new(1.0, 0.0, 1.0, vec![1.0], decay).unwrap();
        let traj = solve(&ivp, &SolverConfig::new(1000).unwrap()).unwrap();
        assert!((traj.last()[0] - (-1.0f64).exp()).abs() < 1e-5);
        assert_eq!(traj.times[1000], 1.0);
    }

    #[test]
    fn rhs_failure_carries_step() {
        let failing = |t: f64, y: &[f64], out: &mut [f64]| -> RhsResult {
            if t > 0.25 {
                return Err("boom".into());
            }
            out[0] = y[0];
            Ok(())
        };
        let ivp = FractionalIvp::new(0.9, 0.0, 1.0, vec![1.0], failing).unwrap();
        match solve(&ivp, &SolverConfig::new(10).unwrap()) {
            Err(FracError::RhsFailure { step, message }) => {
                assert_eq!(step, 3);
                assert_eq!(message, "boom");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn blow_up_is_reported_as_non_finite() {
        let cubic = |_t: f64, y: &[f64], out: &mut [f64]| -> RhsResult {
            out[0] = y[0].powi(3);
            Ok(())
        };
        let ivp = FractionalIvp::new(1.0, 0.0, 10.0, vec![10.0], cubic).unwrap();
        let err = solve(&ivp, &SolverConfig::new(20).unwrap()).unwrap_err();
        assert!(matches!(err, FracError::NonFinite { component: 0, .. }), "{err}");
    }

    #[test]
    fn wrong_output_dimension_is_rejected() {
        struct Fixed;
        impl Rhs for Fixed {
            fn eval(&self, _t: f64, _y: &[f64], out: &mut [f64]) -> RhsResult {
                out.fill(0.0);
                Ok(())
            }
            fn dim(&self) -> Option<usize> {
                Some(3)
            }
        }
        assert!(matches!(
            FractionalIvp::new(0.5, 0.0, 1.0, vec![0.0; 2], Fixed),
            Err(FracError::DimensionMismatch { expected: 2, got: 3, .. })
        ));
    }

    #[test]
    fn mittag_leffler_special_values() {
        assert_eq!(mittag_leffler(0.3, 0.0).unwrap(), 1.0);
        assert!((mittag_leffler(1.0, -1.0).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-10);
        assert!((mittag_leffler(1.0, 2.5).unwrap() - 2.5f64.exp()).abs() < 1e-12);
        assert!(matches!(mittag_leffler(0.5, 60.0), Err(FracError::MittagLefflerDomain(_))));
        assert!(matches!(mittag_leffler(0.5, f64::NAN), Err(FracError::MittagLefflerDomain(_))));
    }

    #[test]
    fn convergence_study_rejects_bad_counts() {
        let ivp = FractionalIvp::new(1.0, 0.0, 1.0, vec![1.0], decay).unwrap();
        let exact = |t: f64| Ok(vec![(-t).exp()]);
        assert!(convergence_order(&ivp, exact, &[10, 20]).is_err());
        assert!(convergence_order(&ivp, exact, &[10, 20, 30]).is_err());
    }

    #[test]
    fn constant_solution_is_degenerate() {
        let zero = |_t: f64, _y: &[f64], out: &mut [f64]| -> RhsResult {
            out[0] = 0.0;
            Ok(())
        };
        let ivp = FractionalIvp::new(0.7, 0.0, 1.0, vec![2.0], zero).unwrap();
        let est = convergence_order(&ivp, |_| Ok(vec![2.0]), &[8, 16, 32]).unwrap();
        assert!(est.is_degenerate());
        assert!(est.max_errors.iter().all(|&e| e < 1e-14));
    }
}
