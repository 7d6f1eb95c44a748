#![allow(dead_code)]

use fracepi::model::{self, ModelParams, State};
use fracepi::sensitivity::{LhsDesign, ParamRange};

/// Index of the stratum of `v` in `n` equal strata of `[low, high)`.
pub fn stratum(v: f64, low: f64, high: f64, n: usize) -> usize {
    ((v - low) / (high - low) * n as f64).floor() as usize
}

/// True when every column has exactly one value in each stratum.
pub fn one_per_stratum(design: &LhsDesign) -> bool {
    let n = design.n_samples;
    design.ranges.iter().enumerate().all(|(j, r)| {
        let mut seen = vec![false; n];
        design.column(j).into_iter().all(|v| {
            let s = stratum(v, r.low, r.high, n);
            s < n && !std::mem::replace(&mut seen[s], true)
        })
    })
}

/// Sign of the central difference of R0 along each range at the midpoint of
/// every range.
pub fn r0_gradient_signs(base: &ModelParams, ranges: &[ParamRange]) -> Vec<f64> {
    let mut mid = *base;
    for r in ranges {
        mid.set(r.name, 0.5 * (r.low + r.high));
    }
    ranges
        .iter()
        .map(|r| {
            let x = mid.get(r.name);
            let h = 1e-4 * (r.high - r.low);
            let up = model::r0(&mid.with(r.name, x + h)).unwrap();
            let down = model::r0(&mid.with(r.name, x - h)).unwrap();
            (up - down).signum()
        })
        .collect()
}

/// Classical fourth-order Runge-Kutta for the integer-order model.
pub fn rk4(p: &ModelParams, y0: &State, t_end: f64, steps: usize, mut visit: impl FnMut(usize, &[f64; 7])) {
    let h = t_end / steps as f64;
    let f = |y: &[f64; 7]| model::rhs(0.0, &State::from_slice(y), p).unwrap();
    let add = |y: &[f64; 7], k: &[f64; 7], c: f64| {
        let mut out = *y;
        for i in 0..7 {
            out[i] += c * k[i];
        }
        out
    };
    let mut y = y0.to_array();
    visit(0, &y);
    for n in 1..=steps {
        let k1 = f(&y);
        let k2 = f(&add(&y, &k1, h / 2.0));
        let k3 = f(&add(&y, &k2, h / 2.0));
        let k4 = f(&add(&y, &k3, h));
        for i in 0..7 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        visit(n, &y);
    }
}
