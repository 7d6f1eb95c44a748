//! Latin hypercube sampling, partial rank correlation coefficients and
//! two-parameter R0 surfaces.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{r0, ModelParams, Param};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensitivityError {
    #[error("range for `{name}` is invalid: low = {low}, high = {high} ({reason})")]
    InvalidRange {
        name: Param,
        low: f64,
        high: f64,
        reason: &'static str,
    },
    #[error("Latin hypercube needs n >= 2 samples and at least one range (got n = {n}, k = {k})")]
    InvalidDesign { n: usize, k: usize },
    #[error("output vector has length {got}, design has {expected} samples")]
    OutputLength { expected: usize, got: usize },
    #[error("output value at sample {0} is not finite")]
    NonFiniteOutput(usize),
    #[error("surface needs nx, ny >= 2 and two distinct parameters")]
    InvalidSurface,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRange {
    pub name: Param,
    pub low: f64,
    pub high: f64,
}

impl ParamRange {
    pub fn new(name: Param, low: f64, high: f64) -> Result<Self, SensitivityError> {
        let r = Self { name, low, high };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), SensitivityError> {
        let err = |reason| SensitivityError::InvalidRange {
            name: self.name,
            low: self.low,
            high: self.high,
            reason,
        };
        if !(self.low.is_finite() && self.high.is_finite()) {
            return Err(err("bounds must be finite"));
        }
        if !(self.low < self.high) {
            return Err(err("low must be below high"));
        }
        if self.low < 0.0 || self.high > self.name.upper_limit() {
            return Err(err("outside the parameter's validity domain"));
        }
        Ok(())
    }

    pub fn span(&self) -> f64 {
        self.high - self.low
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.low + self.high)
    }

    /// `n` evenly spaced values from `low` to `high` inclusive.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        let last = (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.high
                } else {
                    self.low + self.span() * i as f64 / last
                }
            })
            .collect()
    }

    /// ±`fraction` around `baseline`, clipped to the parameter's domain.
    pub fn around(name: Param, baseline: f64, fraction: f64) -> Self {
        let low = (baseline * (1.0 - fraction)).max(0.0);
        let high = (baseline * (1.0 + fraction)).min(name.upper_limit());
        Self { name, low, high }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LhsDesign {
    pub n_samples: usize,
    pub ranges: Vec<ParamRange>,
    /// `n_samples` rows, one column per range.
    pub matrix: Vec<Vec<f64>>,
    pub seed: u64,
}

impl LhsDesign {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.matrix.iter().map(|row| row[j]).collect()
    }

    /// Parameters for sample `i`: `base` with every sampled column substituted.
    pub fn params_for(&self, i: usize, base: &ModelParams) -> ModelParams {
        let mut p = *base;
        for (range, v) in self.ranges.iter().zip(&self.matrix[i]) {
            p.set(range.name, *v);
        }
        p
    }
}

/// Draws one point per stratum `[i/n, (i+1)/n)` in each of `k` dimensions and
/// shuffles every column independently. Rows are returned.
pub fn unit_hypercube(n: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    stratified_columns(n, &vec![(0.0, 1.0); k], seed)
}

fn stratified_columns(n: usize, bounds: &[(f64, f64)], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = vec![vec![0.0; bounds.len()]; n];
    let mut column = vec![0.0; n];
    for (j, &(low, high)) in bounds.iter().enumerate() {
        let width = (high - low) / n as f64;
        for (i, slot) in column.iter_mut().enumerate() {
            let lower = low + i as f64 * width;
            let upper = low + (i + 1) as f64 * width;
            let u: f64 = rng.gen();
            *slot = (lower + u * width).clamp(lower, upper.next_down());
        }
        column.shuffle(&mut rng);
        for (row, v) in rows.iter_mut().zip(&column) {
            row[j] = *v;
        }
    }
    rows
}

pub fn lhs_sample(n: usize, ranges: &[ParamRange], seed: u64) -> Result<LhsDesign, SensitivityError> {
    if n < 2 || ranges.is_empty() {
        return Err(SensitivityError::InvalidDesign { n, k: ranges.len() });
    }
    for r in ranges {
        r.validate()?;
    }
    let bounds: Vec<(f64, f64)> = ranges.iter().map(|r| (r.low, r.high)).collect();
    Ok(LhsDesign {
        n_samples: n,
        ranges: ranges.to_vec(),
        matrix: stratified_columns(n, &bounds, seed),
        seed,
    })
}

/// Ranks starting at 1, ties receiving the average of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Orthonormal basis for the span of `columns` (modified Gram-Schmidt,
/// dependent columns dropped).
fn orthonormal_basis(columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(columns.len());
    for col in columns {
        let original = norm(col);
        if original == 0.0 {
            continue;
        }
        let mut v = col.clone();
        // Two passes keep the basis orthogonal to rounding level.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, qx)| *x -= c * qx);
            }
        }
        let remaining = norm(&v);
        if remaining > 1e-10 * original {
            v.iter_mut().for_each(|x| *x /= remaining);
            basis.push(v);
        }
    }
    basis
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut r = v.to_vec();
    for q in basis {
        let c = dot(q, &r);
        r.iter_mut().zip(q).for_each(|(x, qx)| *x -= c * qx);
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub output_name: String,
    pub parameters: Vec<Param>,
    /// `None` where the regression is singular and the coefficient undefined.
    pub prcc: Vec<Option<f64>>,
    pub design: LhsDesign,
    pub outputs: Vec<f64>,
}

/// Partial rank correlation of each sampled parameter with `outputs`.
pub fn prcc(design: &LhsDesign, outputs: &[f64], output_name: &str) -> Result<SensitivityReport, SensitivityError> {
    if outputs.len() != design.n_samples {
        return Err(SensitivityError::OutputLength {
            expected: design.n_samples,
            got: outputs.len(),
        });
    }
    if let Some(i) = outputs.iter().position(|v| !v.is_finite()) {
        return Err(SensitivityError::NonFiniteOutput(i));
    }
    let k = design.ranges.len();
    let n = design.n_samples;
    let ranks: Vec<Vec<f64>> = (0..k).map(|j| average_ranks(&design.column(j))).collect();
    let output_ranks = average_ranks(outputs);

    let mut coefficients = Vec::with_capacity(k);
    for j in 0..k {
        let mut regressors = Vec::with_capacity(k);
        regressors.push(vec![1.0; n]);
        regressors.extend(ranks.iter().enumerate().filter(|(m, _)| *m != j).map(|(_, c)| c.clone()));
        let basis = orthonormal_basis(&regressors);
        let rx = residual(&ranks[j], &basis);
        let ry = residual(&output_ranks, &basis);
        let (nx, ny) = (norm(&rx), norm(&ry));
        // Residuals at rounding level of rank magnitudes mean the column (or the
        // output) is explained entirely by the other parameters.
        let floor = 1e-9 * n as f64;
        let value = if nx <= floor || ny <= floor {
            None
        } else {
            Some((dot(&rx, &ry) / (nx * ny)).clamp(-1.0, 1.0))
        };
        coefficients.push(value);
    }
    Ok(SensitivityReport {
        output_name: output_name.to_owned(),
        parameters: design.ranges.iter().map(|r| r.name).collect(),
        prcc: coefficients,
        design: design.clone(),
        outputs: outputs.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub x: Param,
    pub y: Param,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Indexed `[ix * ny + iy]`; `None` where R0 is undefined.
    pub values: Vec<Option<f64>>,
}

impl SurfaceGrid {
    pub fn get(&self, ix: usize, iy: usize) -> Option<f64> {
        self.values[ix * self.ys.len() + iy]
    }
}

/// R0 over the tensor grid of two parameters, all others from `base`.
pub fn r0_surface(
    base: &ModelParams,
    x: &ParamRange,
    y: &ParamRange,
    nx: usize,
    ny: usize,
) -> Result<SurfaceGrid, SensitivityError> {
    if nx < 2 || ny < 2 || x.name == y.name {
        return Err(SensitivityError::InvalidSurface);
    }
    x.validate()?;
    y.validate()?;
    let xs = x.grid(nx);
    let ys = y.grid(ny);
    let mut values = Vec::with_capacity(nx * ny);
    for &xv in &xs {
        for &yv in &ys {
            let p = base.with(x.name, xv).with(y.name, yv);
            values.push(r0(&p).ok());
        }
    }
    Ok(SurfaceGrid {
        x: x.name,
        y: y.name,
        xs,
        ys,
        values,
    })
}
