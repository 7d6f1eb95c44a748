//! Food-borne disease transmission between humans and flies.
//!
//! Seven compartments: susceptible (`S`), asymptomatic (`A`) and symptomatic
//! (`I`) infected humans, online food delivery personnel (`D`), fly pupae
//! (`P_f`), adult flies (`G_f`) and parasitic wasps (`W_p`). The same
//! right-hand side drives both the classical (`α = 1`) and the Caputo
//! fractional-order system.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fracode::{Rhs, RhsResult};
use crate::sensitivity::unit_hypercube;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("total human population N_h is zero; force of infection is undefined")]
    ZeroHumanPopulation,
    #[error("parameter `{name}` = {value} is out of domain: {expected}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("derived constant {name} = {value} must be positive")]
    NonPositiveConstant { name: &'static str, value: f64 },
    #[error("reproduction number denominator k1*rho*vartheta*(1-u) + kappa*k1*tau*mu_h vanishes")]
    DegenerateR0,
    #[error("equilibrium denominator {0} vanishes")]
    DegenerateEquilibrium(&'static str),
    #[error("state component {name} = {value} is {reason}")]
    InvalidState {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("feasibility bounds are zero; the sampling box is degenerate")]
    DegenerateBox,
    #[error("{0}")]
    InvalidArgument(String),
}

/// Model parameters. Field names follow the usual symbols; all rates are per day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Human recruitment Π (persons per day).
    #[serde(rename = "Pi")]
    pub pi: f64,
    /// Temporal resistance rate ξ (A → S).
    pub xi: f64,
    /// Effective contact rate β.
    pub beta: f64,
    /// Relative infectivity of asymptomatic humans inside λ.
    pub r: f64,
    /// Government intervention level, constant over a run.
    pub u: f64,
    pub mu_h: f64,
    pub mu_f: f64,
    /// A → I progression rate η.
    pub eta: f64,
    /// Disease-induced death rate δ.
    pub delta: f64,
    /// Inflow into D from A and I.
    pub psi: f64,
    /// Environmental hygiene rate θ.
    pub theta: f64,
    /// Delivery failure rate γ.
    pub gamma: f64,
    /// Egg-laying rate σ.
    pub sigma: f64,
    /// Pupae → adult fly maturation rate ρ.
    pub rho: f64,
    /// Pupae-wasp interaction coefficient τ.
    pub tau: f64,
    /// Proportionality constant κ.
    pub kappa: f64,
    /// Fly-to-human transmission coefficient ϑ. No published value; always
    /// supplied explicitly.
    pub vartheta: f64,
}

/// Assumed default for ϑ, which the published parameter table leaves out.
pub const ASSUMED_VARTHETA: f64 = 0.002;

impl ModelParams {
    /// Published baseline values with ϑ set to [`ASSUMED_VARTHETA`] and no
    /// intervention (`u = 0`).
    pub fn baseline() -> Self {
        Self {
            pi: 1000.0,
            xi: 0.0021,
            beta: 0.0014,
            r: 0.0016667,
            u: 0.0,
            mu_h: 1.0 / 87.7,
            mu_f: 0.000233,
            eta: 0.000375,
            delta: 0.01,
            psi: 0.47,
            theta: 0.50,
            gamma: 0.001,
            sigma: 0.019,
            rho: 0.003,
            tau: 0.0021,
            kappa: 0.01,
            vartheta: ASSUMED_VARTHETA,
        }
    }

    pub fn k1(&self) -> f64 {
        self.mu_h + self.eta + self.xi
    }

    pub fn k2(&self) -> f64 {
        self.mu_h + self.delta
    }

    pub fn k3(&self) -> f64 {
        (1.0 - self.u) + self.theta + self.gamma
    }

    pub fn k4(&self) -> f64 {
        self.rho + self.mu_f
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for param in Param::ALL {
            let value = self.get(param);
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::InvalidParameter {
                    name: param.as_str(),
                    value,
                    expected: "a finite rate >= 0",
                });
            }
        }
        if self.u > 1.0 {
            return Err(ModelError::InvalidParameter {
                name: "u",
                value: self.u,
                expected: "a level in [0, 1]",
            });
        }
        for (name, value) in [("mu_h", self.mu_h), ("mu_f", self.mu_f)] {
            if value <= 0.0 {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    expected: "a death rate > 0",
                });
            }
        }
        for (name, value) in [("k1", self.k1()), ("k2", self.k2()), ("k3", self.k3()), ("k4", self.k4())] {
            if value <= 0.0 {
                return Err(ModelError::NonPositiveConstant { name, value });
            }
        }
        Ok(())
    }

    pub fn get(&self, param: Param) -> f64 {
        match param {
            Param::Pi => self.pi,
            Param::Xi => self.xi,
            Param::Beta => self.beta,
            Param::R => self.r,
            Param::U => self.u,
            Param::MuH => self.mu_h,
            Param::MuF => self.mu_f,
            Param::Eta => self.eta,
            Param::Delta => self.delta,
            Param::Psi => self.psi,
            Param::Theta => self.theta,
            Param::Gamma => self.gamma,
            Param::Sigma => self.sigma,
            Param::Rho => self.rho,
            Param::Tau => self.tau,
            Param::Kappa => self.kappa,
            Param::Vartheta => self.vartheta,
        }
    }

    pub fn set(&mut self, param: Param, value: f64) {
        let slot = match param {
            Param::Pi => &mut self.pi,
            Param::Xi => &mut self.xi,
            Param::Beta => &mut self.beta,
            Param::R => &mut self.r,
            Param::U => &mut self.u,
            Param::MuH => &mut self.mu_h,
            Param::MuF => &mut self.mu_f,
            Param::Eta => &mut self.eta,
            Param::Delta => &mut self.delta,
            Param::Psi => &mut self.psi,
            Param::Theta => &mut self.theta,
            Param::Gamma => &mut self.gamma,
            Param::Sigma => &mut self.sigma,
            Param::Rho => &mut self.rho,
            Param::Tau => &mut self.tau,
            Param::Kappa => &mut self.kappa,
            Param::Vartheta => &mut self.vartheta,
        };
        *slot = value;
    }

    pub fn with(mut self, param: Param, value: f64) -> Self {
        self.set(param, value);
        self
    }
}

/// Parameter identifiers, spelled as in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Param {
    Pi,
    Xi,
    Beta,
    R,
    U,
    MuH,
    MuF,
    Eta,
    Delta,
    Psi,
    Theta,
    Gamma,
    Sigma,
    Rho,
    Tau,
    Kappa,
    Vartheta,
}

impl Param {
    pub const ALL: [Param; 17] = [
        Param::Pi,
        Param::Xi,
        Param::Beta,
        Param::R,
        Param::U,
        Param::MuH,
        Param::MuF,
        Param::Eta,
        Param::Delta,
        Param::Psi,
        Param::Theta,
        Param::Gamma,
        Param::Sigma,
        Param::Rho,
        Param::Tau,
        Param::Kappa,
        Param::Vartheta,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Param::Pi => "Pi",
            Param::Xi => "xi",
            Param::Beta => "beta",
            Param::R => "r",
            Param::U => "u",
            Param::MuH => "mu_h",
            Param::MuF => "mu_f",
            Param::Eta => "eta",
            Param::Delta => "delta",
            Param::Psi => "psi",
            Param::Theta => "theta",
            Param::Gamma => "gamma",
            Param::Sigma => "sigma",
            Param::Rho => "rho",
            Param::Tau => "tau",
            Param::Kappa => "kappa",
            Param::Vartheta => "vartheta",
        }
    }

    /// Upper end of the validity domain (`u` is a level in `[0, 1]`).
    pub fn upper_limit(self) -> f64 {
        match self {
            Param::U => 1.0,
            _ => f64::INFINITY,
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Param {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Param::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Param::ALL.iter().map(|p| p.as_str()).collect();
                format!("unknown parameter `{s}` (expected one of {})", names.join(", "))
            })
    }
}

impl TryFrom<String> for Param {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Param> for String {
    fn from(p: Param) -> String {
        p.as_str().to_owned()
    }
}

pub const COMPARTMENTS: [&str; 7] = ["S", "A", "I", "D", "P_f", "G_f", "W_p"];

/// One point of the compartment vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct State {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "P_f")]
    pub p_f: f64,
    #[serde(rename = "G_f")]
    pub g_f: f64,
    #[serde(rename = "W_p")]
    pub w_p: f64,
}

impl State {
    /// Initial populations used for the published simulations.
    pub fn baseline_initial() -> Self {
        Self {
            s: 500_000.0,
            a: 300_000.0,
            i: 3_500.0,
            d: 2_000.0,
            p_f: 250_000.0,
            g_f: 200_000.0,
            w_p: 2_000.0,
        }
    }

    pub fn to_array(&self) -> [f64; 7] {
        [self.s, self.a, self.i, self.d, self.p_f, self.g_f, self.w_p]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self {
            s: y[0],
            a: y[1],
            i: y[2],
            d: y[3],
            p_f: y[4],
            g_f: y[5],
            w_p: y[6],
        }
    }

    pub fn n_h(&self) -> f64 {
        self.s + self.a + self.i + self.d
    }

    pub fn n_f(&self) -> f64 {
        self.p_f + self.g_f + self.w_p
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in COMPARTMENTS.iter().zip(self.to_array()) {
            if !value.is_finite() {
                return Err(ModelError::InvalidState {
                    name,
                    value,
                    reason: "not finite",
                });
            }
            if value < 0.0 {
                return Err(ModelError::InvalidState {
                    name,
                    value,
                    reason: "negative",
                });
            }
        }
        Ok(())
    }
}

fn lambda_raw(y: &[f64], p: &ModelParams) -> Result<f64, ModelError> {
    let n_h = y[0] + y[1] + y[2] + y[3];
    if n_h == 0.0 {
        return Err(ModelError::ZeroHumanPopulation);
    }
    Ok(p.beta * (p.r * y[1] + y[2]) * y[3] / n_h + p.vartheta * y[5])
}

/// Force of infection `λ = β(rA + I)D / N_h + ϑ G_f`.
pub fn force_of_infection(state: &State, p: &ModelParams) -> Result<f64, ModelError> {
    lambda_raw(&state.to_array(), p)
}

/// Writes the seven right-hand sides, in compartment order, into `out`.
pub fn rhs_into(y: &[f64], p: &ModelParams, out: &mut [f64]) -> Result<(), ModelError> {
    let [s, a, i, d, pf, gf, wp] = [y[0], y[1], y[2], y[3], y[4], y[5], y[6]];
    let lambda = lambda_raw(y, p)?;
    let infection = (1.0 - p.u) * lambda * s;
    out[0] = p.pi + p.xi * a - infection - p.mu_h * s;
    out[1] = infection - p.k1() * a;
    out[2] = p.eta * a - p.k2() * i;
    out[3] = p.psi * (a + i) - p.k3() * d;
    out[4] = p.sigma * gf - p.k4() * pf - p.tau * pf * wp;
    out[5] = p.rho * pf - p.mu_f * gf;
    out[6] = p.kappa * p.tau * pf * wp - p.mu_f * wp;
    Ok(())
}

/// Right-hand side of the (fractional) system at `state`. The dynamics are
/// autonomous; `t` is accepted for interface symmetry.
pub fn rhs(_t: f64, state: &State, p: &ModelParams) -> Result<[f64; 7], ModelError> {
    let mut out = [0.0; 7];
    rhs_into(&state.to_array(), p, &mut out)?;
    Ok(out)
}

/// The model as a solver right-hand side.
#[derive(Debug, Clone, Copy)]
pub struct FoodborneModel {
    pub params: ModelParams,
}

impl Rhs for FoodborneModel {
    fn eval(&self, _t: f64, y: &[f64], out: &mut [f64]) -> RhsResult {
        rhs_into(y, &self.params, out).map_err(|e| e.to_string())
    }

    fn dim(&self) -> Option<usize> {
        Some(7)
    }
}

/// `R0 = ξρϑ(1-u) / (k1 ρ ϑ (1-u) + κ k1 τ μ_h)`.
pub fn r0(p: &ModelParams) -> Result<f64, ModelError> {
    let k1 = p.k1();
    let open = 1.0 - p.u;
    let denominator = k1 * p.rho * p.vartheta * open + p.kappa * k1 * p.tau * p.mu_h;
    if denominator == 0.0 || !denominator.is_finite() {
        return Err(ModelError::DegenerateR0);
    }
    Ok(p.xi * p.rho * p.vartheta * open / denominator)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiseaseFreeEquilibria {
    /// Fly-and-wasp coexistence point.
    pub e1: State,
    /// Trivial point with no flies.
    pub e2: State,
    pub warnings: Vec<String>,
}

pub fn disease_free_equilibria(p: &ModelParams) -> Result<DiseaseFreeEquilibria, ModelError> {
    if p.mu_h == 0.0 {
        return Err(ModelError::DegenerateEquilibrium("mu_h"));
    }
    let kt = p.kappa * p.tau;
    if kt == 0.0 {
        return Err(ModelError::DegenerateEquilibrium("kappa*tau"));
    }
    if p.tau * p.mu_f == 0.0 {
        return Err(ModelError::DegenerateEquilibrium("tau*mu_f"));
    }
    let s = p.pi / p.mu_h;
    let w_p = (p.sigma * p.rho - p.k4() * p.mu_f) / (p.tau * p.mu_f);
    let mut warnings = Vec::new();
    if w_p < 0.0 {
        warnings.push(format!(
            "E1 has negative wasp population W_p = {w_p} (sigma*rho < (rho+mu_f)*mu_f); it lies outside the feasible region"
        ));
    }
    Ok(DiseaseFreeEquilibria {
        e1: State {
            s,
            a: 0.0,
            i: 0.0,
            d: 0.0,
            p_f: p.mu_f / kt,
            g_f: p.rho / kt,
            w_p,
        },
        e2: State {
            s,
            a: 0.0,
            i: 0.0,
            d: 0.0,
            p_f: 0.0,
            g_f: 0.0,
            w_p: 0.0,
        },
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumKind {
    DiseaseFree,
    Endemic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub point: State,
    pub residual: [f64; 7],
    pub max_abs_residual: f64,
    pub kind: EquilibriumKind,
}

impl EquilibriumReport {
    /// Largest residual of the human block (S, A, I, D equations).
    pub fn human_residual(&self) -> f64 {
        self.residual[..4].iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Largest residual of the fly block (P_f, G_f, W_p equations).
    pub fn fly_residual(&self) -> f64 {
        self.residual[4..].iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Residual of `rhs` at a candidate equilibrium.
pub fn endemic_equilibrium_residual(candidate: &State, p: &ModelParams) -> Result<EquilibriumReport, ModelError> {
    candidate.validate()?;
    let residual = rhs(0.0, candidate, p)?;
    let max_abs_residual = residual.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    let kind = if candidate.a == 0.0 && candidate.i == 0.0 && candidate.d == 0.0 {
        EquilibriumKind::DiseaseFree
    } else {
        EquilibriumKind::Endemic
    };
    Ok(EquilibriumReport {
        point: *candidate,
        residual,
        max_abs_residual,
        kind,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    pub damping: f64,
    pub max_iterations: usize,
    /// Target for `max_abs_residual / max(1, max component)`.
    pub tolerance: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iterations: 200,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub report: EquilibriumReport,
    pub iterations: usize,
    pub converged: bool,
}

fn scaled_residual(report: &EquilibriumReport) -> f64 {
    let scale = report.point.to_array().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    report.max_abs_residual / scale
}

/// Damped fixed-point iteration on the steady-state relations
///
/// ```text
/// S = Π k1 / ((1-u) λ (k1 - ξ) + k1 μ_h),  A = (1-u) λ S / k1,
/// I = η A / k2,  D = ψ (A + I) / k3,
/// P_f = μ_f / (κτ),  G_f = ρ / (κτ),  W_p = (σρ - (ρ+μ_f) μ_f) / (τ μ_f),
/// ```
///
/// re-evaluating λ at every pass. The residual report is returned even when
/// the iteration does not reach the tolerance.
pub fn refine_endemic_equilibrium(
    start: &State,
    p: &ModelParams,
    opts: &RefineOptions,
) -> Result<Refinement, ModelError> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(ModelError::InvalidArgument(format!(
            "damping must lie in (0, 1], got {}",
            opts.damping
        )));
    }
    let fly = disease_free_equilibria(p)?.e1;
    let (k1, k2, k3) = (p.k1(), p.k2(), p.k3());
    let open = 1.0 - p.u;
    let mut x = *start;
    let mut report = endemic_equilibrium_residual(&x, p)?;
    for iteration in 1..=opts.max_iterations {
        let lambda = force_of_infection(&x, p)?;
        let denominator = open * lambda * (k1 - p.xi) + k1 * p.mu_h;
        if denominator == 0.0 {
            return Err(ModelError::DegenerateEquilibrium("(1-u)*lambda*(k1-xi) + k1*mu_h"));
        }
        let s = p.pi * k1 / denominator;
        let a = open * lambda * s / k1;
        let i = p.eta * a / k2;
        let d = p.psi * (a + i) / k3;
        let target = State {
            s,
            a,
            i,
            d,
            p_f: fly.p_f,
            g_f: fly.g_f,
            w_p: fly.w_p,
        };
        let w = opts.damping;
        let blend = |old: f64, new: f64| (1.0 - w) * old + w * new;
        x = State {
            s: blend(x.s, target.s),
            a: blend(x.a, target.a),
            i: blend(x.i, target.i),
            d: blend(x.d, target.d),
            p_f: target.p_f,
            g_f: target.g_f,
            w_p: target.w_p,
        };
        // W_p may be negative when E1 is infeasible; evaluate without the
        // state-domain check in that case.
        let residual = rhs(0.0, &x, p)?;
        report = EquilibriumReport {
            point: x,
            max_abs_residual: residual.iter().fold(0.0_f64, |m, r| m.max(r.abs())),
            residual,
            kind: if x.a == 0.0 && x.i == 0.0 && x.d == 0.0 {
                EquilibriumKind::DiseaseFree
            } else {
                EquilibriumKind::Endemic
            },
        };
        if scaled_residual(&report) <= opts.tolerance {
            return Ok(Refinement {
                report,
                iterations: iteration,
                converged: true,
            });
        }
    }
    Ok(Refinement {
        report,
        iterations: opts.max_iterations,
        converged: false,
    })
}

/// Limits `(Π / μ_h, σ / μ_f)` of the total human and fly populations.
pub fn feasibility_bounds(p: &ModelParams) -> Result<(f64, f64), ModelError> {
    if !(p.mu_h > 0.0) {
        return Err(ModelError::InvalidParameter {
            name: "mu_h",
            value: p.mu_h,
            expected: "a death rate > 0",
        });
    }
    if !(p.mu_f > 0.0) {
        return Err(ModelError::InvalidParameter {
            name: "mu_f",
            value: p.mu_f,
            expected: "a death rate > 0",
        });
    }
    Ok((p.pi / p.mu_h, p.sigma / p.mu_f))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionBound {
    /// Estimated Lipschitz constant (max induced ∞-norm of the Jacobian).
    pub lipschitz: f64,
    /// `T^α L / Γ(α + 1)`.
    pub theta: f64,
    pub unique: bool,
}

/// Central finite-difference Jacobian with relative step `1e-6`, returned as
/// its induced ∞-norm (max absolute row sum).
pub fn jacobian_inf_norm<F>(f: &F, x: &[f64]) -> Result<f64, ModelError>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), ModelError>,
{
    let d = x.len();
    let mut row_sums = vec![0.0; d];
    let mut probe = x.to_vec();
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    for j in 0..d {
        let h = 1e-6 * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        f(&probe, &mut plus)?;
        probe[j] = x[j] - h;
        f(&probe, &mut minus)?;
        probe[j] = x[j];
        for i in 0..d {
            row_sums[i] += ((plus[i] - minus[i]) / (2.0 * h)).abs();
        }
    }
    Ok(row_sums.into_iter().fold(0.0, f64::max))
}

/// Largest Jacobian ∞-norm over `samples` Latin-hypercube points of the box
/// `[lower, upper]`.
pub fn lipschitz_estimate<F>(
    f: &F,
    lower: &[f64],
    upper: &[f64],
    samples: usize,
    seed: u64,
) -> Result<f64, ModelError>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), ModelError>,
{
    if lower.len() != upper.len() || lower.is_empty() {
        return Err(ModelError::InvalidArgument("box bounds must have equal, non-zero length".into()));
    }
    if lower.iter().zip(upper).any(|(l, u)| !(u > l)) {
        return Err(ModelError::DegenerateBox);
    }
    let unit = unit_hypercube(samples, lower.len(), seed);
    let mut point = vec![0.0; lower.len()];
    let mut best = 0.0_f64;
    for row in &unit {
        for (k, v) in row.iter().enumerate() {
            point[k] = lower[k] + v * (upper[k] - lower[k]);
        }
        best = best.max(jacobian_inf_norm(f, &point)?);
    }
    Ok(best)
}

/// Uniqueness diagnostic `Θ = T^α L / Γ(α+1) < 1`, with `L` estimated over the
/// feasible box `[0, Π/μ_h]^4 × [0, σ/μ_f]^3`.
pub fn contraction_bound(
    p: &ModelParams,
    horizon: f64,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<ContractionBound, ModelError> {
    if !(horizon > 0.0) {
        return Err(ModelError::InvalidArgument(format!("horizon T must be > 0, got {horizon}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(ModelError::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if samples < 100 {
        return Err(ModelError::InvalidArgument(format!("need at least 100 samples, got {samples}")));
    }
    let (human, fly) = feasibility_bounds(p)?;
    if human == 0.0 || fly == 0.0 {
        return Err(ModelError::DegenerateBox);
    }
    let lower = [0.0; 7];
    let upper = [human, human, human, human, fly, fly, fly];
    let f = |y: &[f64], out: &mut [f64]| rhs_into(y, p, out);
    let lipschitz = lipschitz_estimate(&f, &lower, &upper, samples, seed)?;
    Ok(contraction_from_lipschitz(lipschitz, horizon, alpha))
}

pub fn contraction_from_lipschitz(lipschitz: f64, horizon: f64, alpha: f64) -> ContractionBound {
    let theta = horizon.powf(alpha) * lipschitz / libm::tgamma(alpha + 1.0);
    ContractionBound {
        lipschitz,
        theta,
        unique: theta < 1.0,
    }
}
