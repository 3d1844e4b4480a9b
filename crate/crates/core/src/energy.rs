//! Relative server power as a function of CPU utilization.
//!
//! `E(u) = a + (1 - a) * (m * u + (1 - m) * u^2)` where `a` is the idle power
//! fraction and `m` mixes a linear and a quadratic term. The defaults
//! (`a = 0.33`, `m = 0.36`) describe CPUs released after 2012; older hardware
//! needs refitted constants.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_IDLE_FRACTION: f64 = 0.33;
pub const DEFAULT_LINEAR_MIX: f64 = 0.36;

pub const POWER_SAMPLE_COLUMNS: [&str; 2] = ["utilization_percent", "relative_power"];

const GRID_STEP: f64 = 1e-3;
const REFINE_STEP: f64 = 1e-5;
/// Largest idle fraction the fit may return; `a` must stay below 1.
const MAX_IDLE_FRACTION: f64 = 1.0 - REFINE_STEP;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("idle fraction must lie in [0, 1), got {0}")]
    InvalidIdleFraction(f64),
    #[error("linear mix must lie in [0, 1], got {0}")]
    InvalidLinearMix(f64),
    #[error("fitting needs samples at two or more distinct utilizations")]
    DegenerateSamples,
    #[error("power sample {index}: {message}")]
    InvalidSample { index: usize, message: String },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    idle_fraction: f64,
    linear_mix: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            idle_fraction: DEFAULT_IDLE_FRACTION,
            linear_mix: DEFAULT_LINEAR_MIX,
        }
    }
}

impl EnergyModel {
    pub fn new(idle_fraction: f64, linear_mix: f64) -> Result<Self, EnergyError> {
        if !(0.0..1.0).contains(&idle_fraction) {
            return Err(EnergyError::InvalidIdleFraction(idle_fraction));
        }
        if !(0.0..=1.0).contains(&linear_mix) {
            return Err(EnergyError::InvalidLinearMix(linear_mix));
        }
        Ok(Self {
            idle_fraction,
            linear_mix,
        })
    }

    /// `E(u) = u`, the energy-proportional server.
    pub fn proportional() -> Self {
        Self {
            idle_fraction: 0.0,
            linear_mix: 1.0,
        }
    }

    pub fn idle_fraction(&self) -> f64 {
        self.idle_fraction
    }

    pub fn linear_mix(&self) -> f64 {
        self.linear_mix
    }

    /// `E(u)`. Callers keep `u` within `[0, 1]`.
    pub fn relative_power(&self, u: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&u), "utilization {u} outside [0, 1]");
        let (a, m) = (self.idle_fraction, self.linear_mix);
        a + (1.0 - a) * (m * u + (1.0 - m) * u * u)
    }

    /// `E'(u)`.
    pub fn derivative(&self, u: f64) -> f64 {
        let (a, m) = (self.idle_fraction, self.linear_mix);
        (1.0 - a) * (m + 2.0 * (1.0 - m) * u)
    }

    /// Energy of a workload at utilization `u` given `capacity` times the
    /// original resources: `E(min(u / c, 1)) * c`. Work beyond full
    /// utilization saturates.
    pub fn scaled_power(&self, u: f64, capacity: f64) -> f64 {
        self.relative_power((u / capacity).clamp(0.0, 1.0)) * capacity
    }

    /// `d/dc [E(u/c) c]` expressed at the scaled utilization `x = u / c`:
    /// `a - (1 - a)(1 - m) x^2`. Positive means adding capacity costs energy.
    pub fn marginal_allocation(&self, x: f64) -> f64 {
        let (a, m) = (self.idle_fraction, self.linear_mix);
        a - (1.0 - a) * (1.0 - m) * x * x
    }

    /// Scaled utilization below which extra capacity always raises energy:
    /// `sqrt(a / ((1 - a)(1 - m)))`, or infinity when the curve is linear.
    pub fn marginal_threshold(&self) -> f64 {
        let curvature = (1.0 - self.idle_fraction) * (1.0 - self.linear_mix);
        if curvature == 0.0 {
            f64::INFINITY
        } else {
            (self.idle_fraction / curvature).sqrt()
        }
    }
}

/// A measured `(utilization, power / full-load power)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    pub utilization: f64,
    pub relative_power: f64,
}

impl PowerSample {
    pub fn new(utilization: f64, relative_power: f64) -> Self {
        Self {
            utilization,
            relative_power,
        }
    }
}

/// Sums of products of the basis vectors `[1, u^2, u - u^2, p]`.
///
/// `E(u) = a * 1 + (1 - a) * u^2 + (1 - a) * m * (u - u^2)`, so the squared
/// error of any `(a, m)` is a quadratic form in these sums.
struct Gram {
    g: [[f64; 4]; 4],
}

impl Gram {
    fn new(samples: &[PowerSample]) -> Self {
        let mut g = [[0.0; 4]; 4];
        for s in samples {
            let u = s.utilization;
            let v = [1.0, u * u, u - u * u, s.relative_power];
            for i in 0..4 {
                for j in 0..4 {
                    g[i][j] += v[i] * v[j];
                }
            }
        }
        Self { g }
    }

    fn sse(&self, a: f64, m: f64) -> f64 {
        let w = [a, 1.0 - a, (1.0 - a) * m, -1.0];
        let mut total = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                total += w[i] * w[j] * self.g[i][j];
            }
        }
        total
    }
}

/// Least-squares fit of `(a, m)` over the box `[0, 1) x [0, 1]`.
///
/// A grid search at step 0.001 is followed by one finer pass (step 1e-5)
/// around the best grid point. Ties go to the smaller `a`, then smaller `m`.
pub fn fit(samples: &[PowerSample]) -> Result<EnergyModel, EnergyError> {
    for (index, s) in samples.iter().enumerate() {
        if !(0.0..=1.0).contains(&s.utilization) {
            return Err(EnergyError::InvalidSample {
                index,
                message: format!("utilization {} outside [0, 1]", s.utilization),
            });
        }
        if !(s.relative_power.is_finite() && s.relative_power > 0.0) {
            return Err(EnergyError::InvalidSample {
                index,
                message: format!("relative power {} is not positive", s.relative_power),
            });
        }
    }
    let first = samples.first().ok_or(EnergyError::DegenerateSamples)?;
    if samples.iter().all(|s| s.utilization == first.utilization) {
        return Err(EnergyError::DegenerateSamples);
    }

    let gram = Gram::new(samples);
    let grid_points = (1.0 / GRID_STEP).round() as usize;
    let (a0, m0) = search(
        &gram,
        (0..grid_points).map(|i| i as f64 * GRID_STEP),
        || (0..=grid_points).map(|j| j as f64 * GRID_STEP),
    );

    let refine = |center: f64, hi: f64| {
        let steps = (GRID_STEP / REFINE_STEP).round() as i64;
        (-steps..=steps)
            .map(move |k| center + k as f64 * REFINE_STEP)
            .filter(move |v| (0.0..=hi).contains(v))
    };
    let (a, m) = search(&gram, refine(a0, MAX_IDLE_FRACTION), || refine(m0, 1.0));
    EnergyModel::new(a, m)
}

fn search<A, M, I>(gram: &Gram, idle: A, mix: M) -> (f64, f64)
where
    A: Iterator<Item = f64>,
    M: Fn() -> I,
    I: Iterator<Item = f64>,
{
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for a in idle {
        for m in mix() {
            let err = gram.sse(a, m);
            if err < best.0 {
                best = (err, a, m);
            }
        }
    }
    (best.1, best.2)
}

/// Reads `utilization_percent,relative_power` rows.
pub fn parse_power_samples<R: Read>(source: R) -> Result<Vec<PowerSample>, EnergyError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(|e| EnergyError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().ne(POWER_SAMPLE_COLUMNS.iter().copied()) {
        return Err(EnergyError::Malformed {
            line: 1,
            message: format!("expected header {:?}", POWER_SAMPLE_COLUMNS.join(",")),
        });
    }
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| EnergyError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let number = |i: usize| -> Result<f64, EnergyError> {
            let raw = record.get(i).unwrap_or("");
            raw.parse().map_err(|_| EnergyError::Malformed {
                line,
                message: format!("{} is not a number: {raw:?}", POWER_SAMPLE_COLUMNS[i]),
            })
        };
        let percent = number(0)?;
        if !(0.0..=100.0).contains(&percent) {
            return Err(EnergyError::Malformed {
                line,
                message: format!("utilization {percent} outside [0, 100]"),
            });
        }
        samples.push(PowerSample::new(percent / 100.0, number(1)?));
    }
    Ok(samples)
}
