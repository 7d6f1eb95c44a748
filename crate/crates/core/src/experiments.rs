//! Simulation studies built on the solver and the model: order sweeps,
//! control sweeps, ψ/θ sweeps, sensitivity runs and R0 surfaces, together
//! with CSV rendering and run manifests.
//!
//! Every study implements [`Experiment`] and is looked up by name in a
//! [`Registry`]. Studies produce their artifacts in memory so that a caller
//! can decide whether anything gets written.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fracode::{self, FracError, FractionalIvp, SolverConfig, Trajectory};
use crate::model::{self, FoodborneModel, ModelParams, Param, State, COMPARTMENTS};
use crate::scenario::Scenario;
use crate::sensitivity::{self, LhsDesign, SensitivityReport, SurfaceGrid};

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// Bad input detected before any work was done.
    #[error("{0}")]
    Invalid(String),
    /// The study started but could not finish; `partial` holds what exists.
    #[error("{message}")]
    Runtime {
        message: String,
        partial: Box<ExperimentOutput>,
    },
}

/// Solves the model on `[0, t_end]` with `steps` steps of order `alpha`.
pub fn simulate(
    params: &ModelParams,
    initial: &State,
    alpha: f64,
    t_end: f64,
    steps: usize,
) -> Result<Trajectory, FracError> {
    let y0 = initial.to_array().to_vec();
    if steps == 0 || t_end == 0.0 {
        fracode::Order::new(alpha)?;
        return Ok(Trajectory::initial_only(0.0, &y0, alpha));
    }
    let ivp = FractionalIvp::new(alpha, 0.0, t_end, y0, FoodborneModel { params: *params })?;
    fracode::solve(&ivp, &SolverConfig::new(steps)?)
}

/// One member of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub label: String,
    pub value: f64,
    pub outcome: Result<Trajectory, String>,
}

impl SweepRun {
    pub fn trajectory(&self) -> Option<&Trajectory> {
        self.outcome.as_ref().ok()
    }

    pub fn record(&self) -> RunRecord {
        RunRecord {
            label: self.label.clone(),
            status: match &self.outcome {
                Ok(_) => RunStatus::Ok,
                Err(reason) => RunStatus::Failed {
                    reason: reason.clone(),
                },
            },
        }
    }
}

struct Member {
    label: String,
    value: f64,
    params: ModelParams,
    alpha: f64,
}

fn run_members(sc: &Scenario, members: Vec<Member>) -> Result<Vec<SweepRun>, ExperimentError> {
    let steps = sc.step_count().map_err(|e| ExperimentError::Invalid(e.to_string()))?;
    for m in &members {
        m.params
            .validate()
            .map_err(|e| ExperimentError::Invalid(format!("{}: {e}", m.label)))?;
        fracode::Order::new(m.alpha).map_err(|e| ExperimentError::Invalid(format!("{}: {e}", m.label)))?;
    }
    Ok(members
        .into_par_iter()
        .map(|m| SweepRun {
            outcome: simulate(&m.params, &sc.initial, m.alpha, sc.solver.t_end, steps).map_err(|e| e.to_string()),
            label: m.label,
            value: m.value,
        })
        .collect())
}

/// One solve per order, all other settings from the scenario.
pub fn run_alpha_sweep(sc: &Scenario, alphas: &[f64]) -> Result<Vec<SweepRun>, ExperimentError> {
    let members = alphas
        .iter()
        .map(|&a| Member {
            label: format!("alpha={a}"),
            value: a,
            params: sc.params,
            alpha: a,
        })
        .collect();
    run_members(sc, members)
}

fn param_sweep(sc: &Scenario, param: Param, values: &[f64], alpha: f64) -> Result<Vec<SweepRun>, ExperimentError> {
    let members = values
        .iter()
        .map(|&v| Member {
            label: format!("{param}={v}"),
            value: v,
            params: sc.params.with(param, v),
            alpha,
        })
        .collect();
    run_members(sc, members)
}

/// One solve per control level `u` at a fixed order.
pub fn run_control_sweep(sc: &Scenario, u_values: &[f64], alpha: f64) -> Result<Vec<SweepRun>, ExperimentError> {
    if let Some(u) = u_values.iter().find(|u| !(0.0..=1.0).contains(*u)) {
        return Err(ExperimentError::Invalid(format!("control level u = {u} is outside [0, 1]")));
    }
    param_sweep(sc, Param::U, u_values, alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiThetaSweep {
    /// ψ varied with θ at its scenario value.
    pub psi: Vec<SweepRun>,
    /// θ varied with ψ at its scenario value.
    pub theta: Vec<SweepRun>,
}

pub fn run_psi_theta_sweep(
    sc: &Scenario,
    psi_values: &[f64],
    theta_values: &[f64],
    alpha: f64,
) -> Result<PsiThetaSweep, ExperimentError> {
    Ok(PsiThetaSweep {
        psi: param_sweep(sc, Param::Psi, psi_values, alpha)?,
        theta: param_sweep(sc, Param::Theta, theta_values, alpha)?,
    })
}

/// A named output file held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub label: String,
    #[serde(flatten)]
    pub status: RunStatus,
}

impl RunRecord {
    pub fn ok(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            status: RunStatus::Ok,
        }
    }

    pub fn failed(label: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            status: RunStatus::Failed { reason: reason.into() },
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub artifacts: Vec<Artifact>,
    pub runs: Vec<RunRecord>,
    /// Text for standard output.
    pub report: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeStatus {
    Complete,
    PartialFailure,
    Empty,
}

impl ExperimentOutput {
    pub fn status(&self) -> OutcomeStatus {
        if self.runs.is_empty() {
            OutcomeStatus::Empty
        } else if self.runs.iter().all(RunRecord::is_ok) {
            OutcomeStatus::Complete
        } else {
            OutcomeStatus::PartialFailure
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// RFC-4180 CSV from a header and string rows.
pub fn csv_bytes<I>(header: &[String], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// `time` followed by the seven compartments.
pub fn trajectory_csv(traj: &Trajectory) -> Vec<u8> {
    let header: Vec<String> = std::iter::once("time")
        .chain(COMPARTMENTS)
        .map(str::to_owned)
        .collect();
    let rows = traj.times.iter().zip(traj.rows()).map(|(t, row)| {
        std::iter::once(t.to_string())
            .chain(row.iter().map(|v| v.to_string()))
            .collect()
    });
    csv_bytes(&header, rows)
}

/// `time` followed by compartment `c` of every successful run, in sweep order.
pub fn comparison_csv(runs: &[SweepRun], c: usize) -> Vec<u8> {
    let ok: Vec<(&str, &Trajectory)> = runs
        .iter()
        .filter_map(|r| r.trajectory().map(|t| (r.label.as_str(), t)))
        .collect();
    let header: Vec<String> = std::iter::once("time".to_owned())
        .chain(ok.iter().map(|(l, _)| (*l).to_owned()))
        .collect();
    let times = ok.first().map(|(_, t)| t.times.clone()).unwrap_or_default();
    let rows = times.iter().enumerate().map(|(n, t)| {
        std::iter::once(t.to_string())
            .chain(ok.iter().map(|(_, traj)| traj.row(n)[c].to_string()))
            .collect()
    });
    csv_bytes(&header, rows)
}

/// One row per sample: the sampled parameters followed by the output.
pub fn samples_csv(design: &LhsDesign, outputs: &[f64], output_name: &str) -> Vec<u8> {
    let header: Vec<String> = std::iter::once("sample".to_owned())
        .chain(design.ranges.iter().map(|r| r.name.to_string()))
        .chain(std::iter::once(output_name.to_owned()))
        .collect();
    let rows = design.matrix.iter().zip(outputs).enumerate().map(|(i, (row, y))| {
        std::iter::once(i.to_string())
            .chain(row.iter().map(|v| v.to_string()))
            .chain(std::iter::once(y.to_string()))
            .collect()
    });
    csv_bytes(&header, rows)
}

/// One row per sampled parameter; an empty `prcc` cell means undefined.
pub fn prcc_csv(report: &SensitivityReport) -> Vec<u8> {
    let header: Vec<String> = ["parameter", "low", "high", "prcc"].map(str::to_owned).to_vec();
    let rows = report.design.ranges.iter().zip(&report.prcc).map(|(r, c)| {
        vec![r.name.to_string(), r.low.to_string(), r.high.to_string(), fmt_opt(*c)]
    });
    csv_bytes(&header, rows)
}

/// Long format `x, y, r0`; an empty `r0` cell means undefined.
pub fn surface_csv(grid: &SurfaceGrid) -> Vec<u8> {
    let header = vec![grid.x.to_string(), grid.y.to_string(), "r0".to_owned()];
    let mut rows = Vec::with_capacity(grid.values.len());
    for (ix, x) in grid.xs.iter().enumerate() {
        for (iy, y) in grid.ys.iter().enumerate() {
            rows.push(vec![x.to_string(), y.to_string(), fmt_opt(grid.get(ix, iy))]);
        }
    }
    csv_bytes(&header, rows)
}

/// Scalar outputs a sensitivity run can target.
pub trait OutputMetric: Send + Sync {
    fn name(&self) -> &'static str;
    fn evaluate(&self, params: &ModelParams, sc: &Scenario) -> Result<f64, String>;
}

struct R0Metric;

impl OutputMetric for R0Metric {
    fn name(&self) -> &'static str {
        "r0"
    }

    fn evaluate(&self, params: &ModelParams, _sc: &Scenario) -> Result<f64, String> {
        model::r0(params).map_err(|e| e.to_string())
    }
}

/// Maximum of `I(t)` over a solve at the first scenario order.
struct PeakInfected;

impl OutputMetric for PeakInfected {
    fn name(&self) -> &'static str {
        "peak_I"
    }

    fn evaluate(&self, params: &ModelParams, sc: &Scenario) -> Result<f64, String> {
        let steps = sc.step_count().map_err(|e| e.to_string())?;
        let traj = simulate(params, &sc.initial, sc.solver.alpha[0], sc.solver.t_end, steps).map_err(|e| e.to_string())?;
        Ok(traj.component(2).into_iter().fold(f64::NEG_INFINITY, f64::max))
    }
}

pub fn output_metrics() -> Vec<Box<dyn OutputMetric>> {
    vec![Box::new(R0Metric), Box::new(PeakInfected)]
}

pub fn find_metric(name: &str) -> Option<Box<dyn OutputMetric>> {
    output_metrics().into_iter().find(|m| m.name() == name)
}

/// Latin hypercube design over the scenario ranges, the metric at each
/// sample (evaluated in parallel, collected in sample order) and PRCC.
pub fn run_sensitivity(sc: &Scenario) -> Result<SensitivityReport, ExperimentError> {
    let metric = find_metric(&sc.sensitivity.metric).ok_or_else(|| {
        let known: Vec<_> = output_metrics().iter().map(|m| m.name()).collect();
        ExperimentError::Invalid(format!(
            "sensitivity.metric `{}` is unknown; expected one of {}",
            sc.sensitivity.metric,
            known.join(", ")
        ))
    })?;
    let design = sensitivity::lhs_sample(sc.sensitivity.samples, &sc.sensitivity.ranges, sc.run.seed)
        .map_err(|e| ExperimentError::Invalid(format!("sensitivity: {e}")))?;
    let results: Vec<Result<f64, String>> = (0..design.n_samples)
        .into_par_iter()
        .map(|i| metric.evaluate(&design.params_for(i, &sc.params), sc))
        .collect();
    let mut runs = Vec::new();
    let mut outputs = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(y) => outputs.push(y),
            Err(e) => runs.push(RunRecord::failed(format!("sample {i}"), e)),
        }
    }
    if !runs.is_empty() {
        let message = format!("{} of {} samples failed", runs.len(), design.n_samples);
        return Err(ExperimentError::Runtime {
            message,
            partial: Box::new(ExperimentOutput {
                runs,
                ..Default::default()
            }),
        });
    }
    sensitivity::prcc(&design, &outputs, metric.name()).map_err(|e| ExperimentError::Runtime {
        message: format!("PRCC: {e}"),
        partial: Box::new(ExperimentOutput {
            runs: vec![RunRecord::failed("prcc", e.to_string())],
            ..Default::default()
        }),
    })
}

/// A named study selectable at run time.
pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn run(&self, sc: &Scenario) -> Result<ExperimentOutput, ExperimentError>;
}

pub struct Registry {
    entries: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Simulate));
        r.register(Box::new(AlphaSweep));
        r.register(Box::new(ControlSweep));
        r.register(Box::new(PsiThetaSweepExperiment));
        r.register(Box::new(R0Report));
        r.register(Box::new(Equilibria));
        r.register(Box::new(Sensitivity));
        r.register(Box::new(Surface));
        r.register(Box::new(SelfTest));
        r
    }

    /// Adds `e`, replacing any study of the same name.
    pub fn register(&mut self, e: Box<dyn Experiment>) {
        self.entries.insert(e.name(), e);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Experiment> {
        self.entries.get(name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Experiment> {
        self.entries.values().map(|b| b.as_ref())
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

fn sweep_output(runs: &[SweepRun], prefix: &str, compartments: &[usize]) -> ExperimentOutput {
    let mut out = ExperimentOutput::default();
    for &c in compartments {
        out.artifacts.push(Artifact {
            name: format!("{prefix}_{}.csv", COMPARTMENTS[c]),
            bytes: comparison_csv(runs, c),
        });
    }
    append_runs(&mut out, runs);
    out
}

fn append_runs(out: &mut ExperimentOutput, runs: &[SweepRun]) {
    for r in runs {
        let record = r.record();
        match &record.status {
            RunStatus::Ok => {
                let last = r.trajectory().map(|t| t.last().to_vec()).unwrap_or_default();
                let _ = writeln!(out.report, "{}: ok, final state {:?}", r.label, last);
            }
            RunStatus::Failed { reason } => {
                let _ = writeln!(out.report, "{}: FAILED: {reason}", r.label);
            }
        }
        out.runs.push(record);
    }
}

const ALL_COMPARTMENTS: [usize; 7] = [0, 1, 2, 3, 4, 5, 6];
const D: usize = 3;

struct Simulate;

impl Experiment for Simulate {
    fn name(&self) -> &'static str {
        "simulate"
    }

    fn about(&self) -> &'static str {
        "solve the model at the first scenario order and write trajectory.csv"
    }

    fn run(&self, sc: &Scenario) -> Result<ExperimentOutput, ExperimentError> {
        let alpha = *sc
            .solver
            .alpha
            .first()
            .ok_or_else(|| ExperimentError::Invalid("solver.alpha is empty; simulate needs one order".into()))?;
        let runs = run_alpha_sweep(sc, &[alpha])?;
        let mut out = ExperimentOutput::default();
        if let Some(t) = runs[0].trajectory() {
            out.artifacts.push(Artifact {
                name: "trajectory.csv".into(),
                bytes: trajectory_csv(t),
            });
        }
        append_runs(&mut out, &runs);
        Ok(out)
    }
}

struct AlphaSweep;

impl Experiment for AlphaSweep {
    fn name(&self) -> &'static str {
        "alpha-sweep"
    }

    fn about(&self) -> &'static str {
        "one solve per order in solver.alpha; one CSV per compartment"
    }

    fn run(&self, sc: &Scenario) -> Result<ExperimentOutput, ExperimentError> {
        let runs = run_alpha_sweep(sc, &sc.solver.alpha)?;
        Ok(sweep_output(&runs, "alpha_sweep", &ALL_COMPARTMENTS))
    }
}

struct ControlSweep;

impl Experiment for ControlSweep {
    fn name(&self) -> &'static str {
        "control-sweep"
    }

    fn about(&self) -> &'static str {
        "one solve per control level in sweeps.u at sweeps.alpha"
    }

    fn run(&self, sc: &Scenario) -> Result<ExperimentOutput, ExperimentError> {
        let runs = run_control_sweep(sc, &sc.sweeps.u, sc.sweeps.alpha)?;
        Ok(sweep_output(&runs, "control_sweep", &ALL_COMPARTMENTS))
    }
}

struct PsiThetaSweepExperiment;

impl Experiment for PsiThetaSweepExperiment {
    fn name(&self) -> &'static str {
        "psitheta-sweep"
    }

    fn about(&self) -> &'static str {
        "vary psi and theta separately at sweeps.alpha; D comparison CSVs"
    }

    fn run(&self, sc: &Scenario) -> Result<ExperimentOutput, ExperimentError> {
        let sweep = run_psi_theta_sweep(sc, &sc.sweeps.psi, &sc.sweeps.theta, sc.sweeps.alpha)?;
        let mut out = sweep_output(&sweep.psi, "psi_sweep", &[D]);
        let theta = sweep_output(&sweep.theta, "theta_sweep", &[D]);
        out.artifacts.extend(theta.artifacts);
        out.runs.extend(theta.runs);
        out.report.push_str(&theta.report);
        Ok(out)
    }
}

fn param_rows(p: &ModelParams) -> Vec<Vec<String>> {
    Param::ALL
        .iter()
        .map(|&q| vec![q.to_string(), p.get(q).to_string()])
        .collect()
}

struct R0Report;

impl Experiment for R0Report {
    fn name(&self) -> &'static str {
        "r0"
    }

    fn about(&self) -> &'static str {
        "print the basic reproduction number and the parameters used"
    }

    fn run(&self, sc: &Scenario) -> Result<ExperimentOutput, ExperimentError> {
        let r0 = model::r0(&sc.params).map_err(|e| ExperimentError::Invalid(e.to_string()))?;
        let mut report = format!("{r0}\n");
        for row in param_rows(&sc.params) {
            let _ = writeln!(report, "{} = {}", row[0], row[1]);
        }
        let mut rows = param_rows(&sc.params);
        rows.push(vec!["R0".into(), r0.to_string()]);
        Ok(ExperimentOutput {
            artifacts: vec![Artifact {
                name: "r0.csv".into(),
                bytes: csv_bytes(&["quantity".to_owned(), "value".to_owned()], rows),
            }],
            runs: vec![RunRecord::ok("r0")],
            report,
        })
    }
}

struct Equilibria;

/// Lipschitz samples used for the uniqueness diagnostic.
const LIPSCHITZ_SAMPLES: usize = 1000;

impl Experiment for Equilibria {
    fn name(&self) -> &'static str {
        "equilibria"
    }

    fn about(&self) -> &'static str {
        "equilibrium points, their residuals, feasibility bounds and the uniqueness diagnostic"
    }

    fn run(&self, sc: &Scenario) -> Result<ExperimentOutput, ExperimentError> {
        let p = &sc.params;
        let invalid = |e: model::ModelError| ExperimentError::Invalid(e.to_string());
        let dfe = model::disease_free_equilibria(p).map_err(invalid)?;
        let mut reports = vec![
            ("E1", model::endemic_equilibrium_residual(&dfe.e1, p).map_err(invalid)?),
            ("E2", model::endemic_equilibrium_residual(&dfe.e2, p).map_err(invalid)?),
        ];
        let mut runs = vec![RunRecord::ok("disease-free")];
        let mut report = String::new();
        for w in &dfe.warnings {
            let _ = writeln!(report, "warning: {w}");
        }
        let mut diagnostics = vec![
            ("R0".to_owned(), model::r0(p).map_err(invalid)?.to_string()),
        ];
        let (nh, nf) = model::feasibility_bounds(p).map_err(invalid)?;
        diagnostics.push(("human_bound".into(), nh.to_string()));
        diagnostics.push(("fly_bound".into(), nf.to_string()));

        match model::refine_endemic_equilibrium(&sc.initial, p, &Default::default()) {
            Ok(r) => {
                diagnostics.push(("endemic_iterations".into(), r.iterations.to_string()));
                diagnostics.push(("endemic_converged".into(), r.converged.to_string()));
                runs.push(if r.converged {
                    RunRecord::ok("endemic")
                } else {
                    RunRecord::failed("endemic", format!("fixed-point iteration stopped after {} passes", r.iterations))
                });
                reports.push(("endemic", r.report));
            }
            Err(e) => runs.push(RunRecord::failed("endemic", e.to_string())),
        }
        if sc.solver.t_end > 0.0 {
            let alpha = sc.solver.alpha.first().copied().unwrap_or(1.0);
            match model::contraction_bound(p, sc.solver.t_end, alpha, LIPSCHITZ_SAMPLES, sc.run.seed) {
                Ok(b) => {
                    diagnostics.push(("lipschitz".into(), b.lipschitz.to_string()));
                    diagnostics.push(("contraction_theta".into(), b.theta.to_string()));
                    diagnostics.push(("contraction_unique".into(), b.unique.to_string()));
                    runs.push(RunRecord::ok("contraction"));
                }
                Err(e) => runs.push(RunRecord::failed("contraction", e.to_string())),
            }
        }

        let header: Vec<String> = ["point", "kind"]
            .into_iter()
            .map(str::to_owned)
            .chain(COMPARTMENTS.iter().map(|c| (*c).to_owned()))
            .chain(COMPARTMENTS.iter().map(|c| format!("residual_{c}")))
            .chain(std::iter::once("max_abs_residual".to_owned()))
            .collect();
        let rows = reports.iter().map(|(name, r)| {
            let kind = match r.kind {
                model::EquilibriumKind::DiseaseFree => "disease-free",
                model::EquilibriumKind::Endemic => "endemic",
            };
            [name.to_string(), kind.to_owned()]
                .into_iter()
                .chain(r.point.to_array().iter().map(|v| v.to_string()))
                .chain(r.residual.iter().map(|v| v.to_string()))
                .chain(std::iter::once(r.max_abs_residual.to_string()))
                .collect::<Vec<_>>()
        });
        let eq_csv = csv_bytes(&header, rows);
        for (name, r) in &reports {
            let _ = writeln!(
                report,
                "{name}: {:?} max |residual| = {} (human {}, fly {})",
                r.point.to_array(),
                r.max_abs_residual,
                r.human_residual(),
                r.fly_residual()
            );
        }
        for (k, v) in &diagnostics {
            let _ = writeln!(report, "{k} = {v}");
        }
        let diag_csv = csv_bytes(
            &["quantity".to_owned(), "value".to_owned()],
            diagnostics.into_iter().map(|(k, v)| vec![k, v]),
        );
        Ok(ExperimentOutput {
            artifacts: vec![
                Artifact {
                    name: "equilibria.csv".into(),
                    bytes: eq_csv,
                },
                Artifact {
                    name: "diagnostics.csv".into(),
                    bytes: diag_csv,
                },
            ],
            runs,
            report,
        })
    }
}

struct Sensitivity;

impl Experiment for Sensitivity {
    fn name(&self) -> &'static str {
        "sensitivity"
    }

    fn about(&self) -> &'static str {
        "Latin hypercube sample of the scenario ranges and PRCC of the chosen metric"
    }

    fn run(&self, sc: &Scenario) -> Result<ExperimentOutput, ExperimentError> {
        let rep = run_sensitivity(sc)?;
        let mut report = String::new();
        for (name, c) in rep.parameters.iter().zip(&rep.prcc) {
            let shown = c.map(|v| format!("{v:+.4}")).unwrap_or_else(|| "undefined".into());
            let _ = writeln!(report, "PRCC({name}, {}) = {shown}", rep.output_name);
        }
        Ok(ExperimentOutput {
            artifacts: vec![
                Artifact {
                    name: "lhs_samples.csv".into(),
                    bytes: samples_csv(&rep.design, &rep.outputs, &rep.output_name),
                },
                Artifact {
                    name: "prcc.csv".into(),
                    bytes: prcc_csv(&rep),
                },
            ],
            runs: vec![RunRecord::ok(format!("{} samples", rep.design.n_samples))],
            report,
        })
    }
}

struct Surface;

impl Experiment for Surface {
    fn name(&self) -> &'static str {
        "surface"
    }

    fn about(&self) -> &'static str {
        "R0 over a grid of two parameters"
    }

    fn run(&self, sc: &Scenario) -> Result<ExperimentOutput, ExperimentError> {
        let s = &sc.surface;
        let grid = sensitivity::r0_surface(&sc.params, &s.x, &s.y, s.nx, s.ny)
            .map_err(|e| ExperimentError::Invalid(format!("surface: {e}")))?;
        let undefined = grid.values.iter().filter(|v| v.is_none()).count();
        let report = format!(
            "R0 over {} x {} grid of ({}, {}); {undefined} undefined points\n",
            s.nx, s.ny, grid.x, grid.y
        );
        Ok(ExperimentOutput {
            artifacts: vec![Artifact {
                name: "r0_surface.csv".into(),
                bytes: surface_csv(&grid),
            }],
            runs: vec![RunRecord::ok(format!("{}x{}", s.nx, s.ny))],
            report,
        })
    }
}

/// Checks of the solver weights and oracles that need no scenario data.
pub fn selftest_checks() -> Vec<(String, Result<String, String>)> {
    let mut checks = Vec::new();
    let mut check = |name: &str, r: Result<String, String>| checks.push((name.to_owned(), r));

    check("weights-positive", {
        let mut bad = None;
        'outer: for &a in &[0.1, 0.5, 0.75, 0.95, 1.0] {
            for n in [0usize, 1, 2, 10, 100, 1000] {
                for j in 0..=n + 1 {
                    let b = if j <= n { fracode::predictor_weight(n, j, a).ok() } else { Some(1.0) };
                    let d = fracode::corrector_weight(n, j, a).ok();
                    if !(b.is_some_and(|v| v > 0.0) && d.is_some_and(|v| v > 0.0)) {
                        bad = Some(format!("alpha={a} n={n} j={j}"));
                        break 'outer;
                    }
                }
            }
        }
        bad.map_or(Ok("all predictor and corrector weights > 0".into()), Err)
    });

    check("weights-classical-limit", {
        let mut worst = 0.0_f64;
        for n in 1..50 {
            for j in 0..=n {
                let b = fracode::predictor_weight(n, j, 1.0).unwrap_or(f64::NAN);
                worst = worst.max((b - 1.0).abs());
                if j >= 1 {
                    let d = fracode::corrector_weight(n, j, 1.0).unwrap_or(f64::NAN);
                    worst = worst.max((d - 2.0).abs());
                }
            }
            let d0 = fracode::corrector_weight(n, 0, 1.0).unwrap_or(f64::NAN);
            worst = worst.max((d0 - 1.0).abs());
        }
        if worst < 1e-12 {
            Ok(format!("max deviation {worst:e}"))
        } else {
            Err(format!("max deviation {worst:e}"))
        }
    });

    check("mittag-leffler-half", {
        let z = -1.0_f64;
        let reference = (z * z).exp() * libm::erfc(-z);
        match fracode::mittag_leffler(0.5, z) {
            Ok(v) if ((v - reference) / reference).abs() < 1e-12 => Ok(format!("E_0.5(-1) = {v}")),
            Ok(v) => Err(format!("E_0.5(-1) = {v}, expected {reference}")),
            Err(e) => Err(e.to_string()),
        }
    });

    for &alpha in &[0.5, 0.75, 0.9, 1.0] {
        let m = if alpha == 1.0 { 1000 } else { 400 };
        let tol = if alpha == 1.0 { 1e-5 } else { 1e-2 };
        let r = linear_oracle_error(alpha, m).and_then(|err| {
            if err < tol {
                Ok(format!("max relative error {err:e} at M = {m}"))
            } else {
                Err(format!("max relative error {err:e} at M = {m} exceeds {tol:e}"))
            }
        });
        check(&format!("linear-oracle-alpha={alpha}"), r);
    }

    check("r0-full-control", {
        let p = ModelParams::baseline().with(Param::U, 1.0);
        match model::r0(&p) {
            Ok(v) if v == 0.0 => Ok("R0(u = 1) = 0".into()),
            Ok(v) => Err(format!("R0(u = 1) = {v}")),
            Err(e) => Err(e.to_string()),
        }
    });

    check("trivial-equilibrium", {
        let p = ModelParams::baseline();
        model::disease_free_equilibria(&p)
            .and_then(|d| model::endemic_equilibrium_residual(&d.e2, &p))
            .map_err(|e| e.to_string())
            .and_then(|r| {
                let scale = p.pi / p.mu_h;
                if r.max_abs_residual <= 1e-12 * scale {
                    Ok(format!("max |residual| = {}", r.max_abs_residual))
                } else {
                    Err(format!("max |residual| = {}", r.max_abs_residual))
                }
            })
    });

    check("lhs-strata", {
        let n = 16;
        let cube = sensitivity::unit_hypercube(n, 3, 7);
        let ok = (0..3).all(|j| {
            let mut seen = vec![false; n];
            for row in &cube {
                let s = (row[j] * n as f64).floor() as usize;
                if s >= n || seen[s] {
                    return false;
                }
                seen[s] = true;
            }
            true
        });
        if ok {
            Ok(format!("one sample per stratum, n = {n}"))
        } else {
            Err("stratum collision".into())
        }
    });

    checks
}

/// Max relative error of the solver on `D^α y = -y`, `y(0) = 1`, `t ∈ [0, 1]`.
pub fn linear_oracle_error(alpha: f64, m: usize) -> Result<f64, String> {
    let rhs = |_t: f64, y: &[f64], out: &mut [f64]| -> fracode::RhsResult {
        out[0] = -y[0];
        Ok(())
    };
    let ivp = FractionalIvp::new(alpha, 0.0, 1.0, vec![1.0], rhs).map_err(|e| e.to_string())?;
    let traj = fracode::solve(&ivp, &SolverConfig::new(m).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let mut worst = 0.0_f64;
    for (t, row) in traj.times.iter().zip(traj.rows()) {
        let exact = if alpha == 1.0 {
            (-t).exp()
        } else {
            fracode::mittag_leffler(alpha, -t.powf(alpha)).map_err(|e| e.to_string())?
        };
        worst = worst.max(((row[0] - exact) / exact).abs());
    }
    Ok(worst)
}

struct SelfTest;

impl Experiment for SelfTest {
    fn name(&self) -> &'static str {
        "selftest"
    }

    fn about(&self) -> &'static str {
        "run the solver weight and oracle checks and print pass/fail"
    }

    fn run(&self, _sc: &Scenario) -> Result<ExperimentOutput, ExperimentError> {
        let checks = selftest_checks();
        let mut out = ExperimentOutput::default();
        let mut rows = Vec::new();
        for (name, r) in checks {
            let (status, detail) = match &r {
                Ok(d) => ("pass", d.clone()),
                Err(d) => ("fail", d.clone()),
            };
            let _ = writeln!(out.report, "{status:<4} {name}: {detail}");
            rows.push(vec![name.clone(), status.to_owned(), detail.clone()]);
            out.runs.push(match r {
                Ok(_) => RunRecord::ok(name),
                Err(d) => RunRecord::failed(name, d),
            });
        }
        out.artifacts.push(Artifact {
            name: "selftest.csv".into(),
            bytes: csv_bytes(&["check".to_owned(), "status".to_owned(), "detail".to_owned()], rows),
        });
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProvenanceNote {
    pub key: String,
    pub note: String,
}

/// Everything needed to reproduce a run. Contains no timestamps or paths so
/// that identical inputs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: OutcomeStatus,
    pub seed: u64,
    pub scenario: serde_json::Value,
    pub provenance: Vec<ProvenanceNote>,
    pub runs: Vec<RunRecord>,
    pub artifacts: Vec<ArtifactRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Builds the manifest for a finished or partially finished study.
pub fn run_manifest(
    sc: &Scenario,
    defaulted: &[String],
    command: &str,
    output: &ExperimentOutput,
    error: Option<String>,
) -> Manifest {
    let mut scenario = serde_json::to_value(sc).expect("scenario serializes");
    if let Some(run) = scenario.get_mut("run").and_then(|r| r.as_object_mut()) {
        run.remove("output_dir");
    }
    let mut provenance: Vec<ProvenanceNote> = sc
        .assumed_keys()
        .into_iter()
        .map(|key| ProvenanceNote {
            note: if key == "params.vartheta" {
                "assumed: no published value".into()
            } else {
                "assumed".into()
            },
            key,
        })
        .collect();
    provenance.extend(defaulted.iter().map(|key| ProvenanceNote {
        key: key.clone(),
        note: "default applied".into(),
    }));
    let status = match (&error, output.status()) {
        (Some(_), OutcomeStatus::Complete) => OutcomeStatus::PartialFailure,
        (_, s) => s,
    };
    Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        status,
        seed: sc.run.seed,
        scenario,
        provenance,
        runs: output.runs.clone(),
        artifacts: output
            .artifacts
            .iter()
            .map(|a| ArtifactRecord {
                file: a.name.clone(),
                bytes: a.bytes.len(),
                sha256: a.sha256(),
            })
            .collect(),
        error,
    }
}
