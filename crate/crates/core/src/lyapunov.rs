//! Exact one-step drifts of Lyapunov functionals.
//!
//! For a functional `f(x, t)` and a kernel with finite jump support, the
//! conditional expected increment `E[f(X + D, t + 1) - f(x, t)]` is a finite
//! sum. Each functional evaluates `f(x + d, t + 1) - f(x, t)` in a form that
//! avoids cancellation: rational functionals get an integer numerator over a
//! common denominator, power functionals go through `expm1`/`ln_1p`.
//!
//! Region scans evaluate the drift at every lattice point of a finite
//! `(x, t)` stencil and list the points where the wanted sign fails.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::Kernel;

/// Relative slack for sign tests: a drift `v` violates `v <= 0` only when
/// `v > SIGN_TOL * sum_i p_i |f(x + d_i, t + 1) - f(x, t)|`. Covers rounding
/// of the transition probabilities at points where the drift is exactly 0.
pub const SIGN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Functional {
    /// `t / x^2`
    TransienceY,
    /// `x^2 / t`
    RecurrenceY,
    /// `x^(1 - nu)`, `0 < nu < 1`
    FractionalW { nu: f64 },
    /// `(2n - x)^k`
    ExitPower { k: u32, n: f64 },
    /// `x / t^zeta`, `0 < zeta < 1`
    ScaledX { zeta: f64 },
}

impl Functional {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Functional::FractionalW { nu } if !(nu > 0.0 && nu < 1.0) => Err(invalid("nu", nu, "need 0 < nu < 1")),
            Functional::ExitPower { k, .. } if k < 1 => Err(invalid("k", k, "need k >= 1")),
            Functional::ExitPower { n, .. } if !(n.is_finite() && n > 0.0) => Err(invalid("n", n, "need n > 0")),
            Functional::ScaledX { zeta } if !(zeta > 0.0 && zeta < 1.0) => {
                Err(invalid("zeta", zeta, "need 0 < zeta < 1"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Functional::TransienceY => "TransienceY",
            Functional::RecurrenceY => "RecurrenceY",
            Functional::FractionalW { .. } => "FractionalW",
            Functional::ExitPower { .. } => "ExitPower",
            Functional::ScaledX { .. } => "ScaledX",
        }
    }

    /// `f(x, t)`.
    pub fn value(&self, x: f64, t: f64) -> f64 {
        match *self {
            Functional::TransienceY => t / (x * x),
            Functional::RecurrenceY => x * x / t,
            Functional::FractionalW { nu } => x.powf(1.0 - nu),
            Functional::ExitPower { k, n } => (2.0 * n - x).powi(k as i32),
            Functional::ScaledX { zeta } => x / t.powf(zeta),
        }
    }

    fn defined_at(&self, x: f64) -> bool {
        match *self {
            Functional::TransienceY | Functional::FractionalW { .. } => x > 0.0,
            Functional::ExitPower { n, .. } => x < 2.0 * n,
            _ => true,
        }
    }

    /// `f(x + d, t + 1) - f(x, t)`.
    #[inline]
    pub fn increment(&self, x: f64, d: f64, t: f64) -> f64 {
        match *self {
            Functional::TransienceY => {
                let y = x + d;
                (x * x - 2.0 * t * x * d - t * d * d) / (x * x * y * y)
            }
            Functional::RecurrenceY => (2.0 * t * x * d + t * d * d - x * x) / (t * (t + 1.0)),
            Functional::FractionalW { nu } => {
                let p = 1.0 - nu;
                x.powf(p) * (p * (d / x).ln_1p()).exp_m1()
            }
            Functional::ExitPower { k, n } => {
                let z = 2.0 * n - x;
                z.powi(k as i32) * (k as f64 * (-d / z).ln_1p()).exp_m1()
            }
            Functional::ScaledX { zeta } => (d - x * (zeta * (1.0 / t).ln_1p()).exp_m1()) / (t + 1.0).powf(zeta),
        }
    }
}

/// Drift and its magnitude scale `sum_i p_i |increment_i|`.
fn drift_and_scale(f: &Functional, kernel: &Kernel, x: f64, t: u64) -> Result<(f64, f64)> {
    if x.is_nan() || x <= 0.0 || !f.defined_at(x) {
        return Err(Error::UndefinedFunctional { x, t });
    }
    let law = kernel.step_law(x, t)?;
    let tf = t as f64;
    let mut sum = 0.0;
    let mut scale = 0.0;
    for &(d, p) in &law.outcomes {
        if !f.defined_at(x + d) {
            return Err(Error::UndefinedFunctional { x: x + d, t: t + 1 });
        }
        let inc = f.increment(x, d, tf);
        sum += p * inc;
        scale += p * inc.abs();
    }
    Ok((sum, scale))
}

/// `E[f(X_{t+1}, t + 1) - f(x, t) | X_t = x]` by enumeration of the step law.
pub fn expected_increment(f: &Functional, kernel: &Kernel, x: f64, t: u64) -> Result<f64> {
    f.validate()?;
    drift_and_scale(f, kernel, x, t).map(|(v, _)| v)
}

/// Smallest integer strictly greater than `1 + 16 c / b2`.
pub fn choose_exit_exponent(c: f64, b2: f64) -> Result<u32> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid("c", c, "need c > 0"));
    }
    if !(b2 > 0.0 && b2.is_finite()) {
        return Err(invalid("B2", b2, "need B2 > 0"));
    }
    let v = 1.0 + 16.0 * c / b2;
    Ok(v.floor() as u32 + 1)
}

/// Lower bound `((2 - gamma)^k - 1) / (2^k - 1)` on the probability of
/// leaving `[a, n]` downward from `gamma * n`.
pub fn nu_bound(gamma: f64, k: u32) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma", gamma, "need 0 < gamma < 1"));
    }
    if k < 1 {
        return Err(invalid("k", k, "need k >= 1"));
    }
    let k = k as i32;
    Ok(((2.0 - gamma).powi(k) - 1.0) / (2f64.powi(k) - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    /// Supermartingale: drift `<= 0`.
    NonPositive,
    /// Submartingale: drift `>= 0`.
    NonNegative,
}

/// Finite stencil of integer states.
///
/// For each `x` in `x_min..=x_max` (step `x_stride`) the times run from the
/// lower to the upper bound in steps of `t_stride`, always including the
/// upper bound. Optional constraints tighten the time window per `x`:
/// `x^2 / t >= ratio_min`, `x^2 / t <= ratio_max`, `t >= t_per_x_min * x`.
/// With `clamp_free`, states where the kernel caps the drift are skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: u64,
    pub x_max: u64,
    pub x_stride: u64,
    pub t_min: u64,
    pub t_max: u64,
    pub t_stride: u64,
    pub ratio_min: Option<f64>,
    pub ratio_max: Option<f64>,
    pub t_per_x_min: Option<f64>,
    pub clamp_free: bool,
}

impl Region {
    /// Rectangle `[x_min, x_max] x [t_min, t_max]` with unit strides.
    pub fn rect(x_min: u64, x_max: u64, t_min: u64, t_max: u64) -> Self {
        Self {
            x_min,
            x_max,
            x_stride: 1,
            t_min,
            t_max,
            t_stride: 1,
            ratio_min: None,
            ratio_max: None,
            t_per_x_min: None,
            clamp_free: false,
        }
    }

    fn validate(&self, kernel: &Kernel) -> Result<()> {
        if self.x_stride == 0 || self.t_stride == 0 {
            return Err(invalid("stride", 0, "strides must be positive"));
        }
        if self.x_min > self.x_max || self.t_min > self.t_max {
            return Err(Error::Empty("region"));
        }
        if (self.x_min as f64) < kernel.a.max(1.0) {
            return Err(invalid("x_min", self.x_min, "regions must satisfy x >= max(a, 1)"));
        }
        Ok(())
    }

    /// Inclusive time window at `x`, or `None` if empty.
    pub fn t_window(&self, x: u64, t0: u64) -> Option<(u64, u64)> {
        let xf = x as f64;
        let x2 = xf * xf;
        let mut lo = self.t_min.max(t0);
        let mut hi = self.t_max;
        if let Some(r) = self.ratio_min {
            let mut h = (x2 / r).floor().min(u64::MAX as f64) as u64;
            while h > 0 && x2 / (h as f64) < r {
                h -= 1;
            }
            while x2 / ((h + 1) as f64) >= r {
                h += 1;
            }
            hi = hi.min(h);
        }
        if let Some(r) = self.ratio_max {
            let mut l = (x2 / r).ceil().max(0.0) as u64;
            while l > 0 && x2 / (l as f64) > r {
                l += 1;
            }
            while l > 1 && x2 / ((l - 1) as f64) <= r {
                l -= 1;
            }
            lo = lo.max(l);
        }
        if let Some(c) = self.t_per_x_min {
            lo = lo.max((c * xf).ceil() as u64);
        }
        (lo <= hi).then_some((lo, hi))
    }

    fn x_values(&self) -> Vec<u64> {
        (self.x_min..=self.x_max).step_by(self.x_stride as usize).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub x: f64,
    pub t: u64,
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub functional: Functional,
    pub want: Sign,
    pub region: Region,
    pub points_checked: u64,
    pub violations: Vec<Violation>,
    pub max_drift: f64,
    pub min_drift: f64,
}

impl RegionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.points_checked > 0
    }
}

struct Partial {
    checked: u64,
    violations: Vec<Violation>,
    max: f64,
    min: f64,
}

fn scan_column(f: &Functional, kernel: &Kernel, region: &Region, want: Sign, x: u64) -> Result<Partial> {
    let mut part = Partial {
        checked: 0,
        violations: Vec::new(),
        max: f64::NEG_INFINITY,
        min: f64::INFINITY,
    };
    let Some((lo, hi)) = region.t_window(x, kernel.t0) else {
        return Ok(part);
    };
    let xf = x as f64;
    let mut visit = |t: u64| -> Result<()> {
        if region.clamp_free && kernel.probs(xf, t).clamped {
            return Ok(());
        }
        let (v, scale) = drift_and_scale(f, kernel, xf, t)?;
        let slack = SIGN_TOL * scale;
        let bad = match want {
            Sign::NonPositive => v > slack,
            Sign::NonNegative => v < -slack,
        };
        if bad {
            part.violations.push(Violation { x: xf, t, drift: v });
        }
        part.checked += 1;
        part.max = part.max.max(v);
        part.min = part.min.min(v);
        Ok(())
    };
    let mut t = lo;
    loop {
        visit(t)?;
        match t.checked_add(region.t_stride) {
            Some(next) if next <= hi => t = next,
            _ => break,
        }
    }
    if t != hi {
        visit(hi)?;
    }
    Ok(part)
}

/// Checks the sign of the drift of `f` at every point of `region`.
pub fn verify_region(
    f: &Functional,
    kernel: &Kernel,
    region: &Region,
    want: Sign,
    threads: usize,
) -> Result<RegionReport> {
    f.validate()?;
    region.validate(kernel)?;
    let xs = region.x_values();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;
    let parts: Vec<Result<Partial>> = pool.install(|| {
        xs.par_iter()
            .map(|&x| scan_column(f, kernel, region, want, x))
            .collect()
    });
    let mut report = RegionReport {
        functional: *f,
        want,
        region: *region,
        points_checked: 0,
        violations: Vec::new(),
        max_drift: f64::NEG_INFINITY,
        min_drift: f64::INFINITY,
    };
    for part in parts {
        let part = part?;
        report.points_checked += part.checked;
        report.violations.extend(part.violations);
        report.max_drift = report.max_drift.max(part.max);
        report.min_drift = report.min_drift.min(part.min);
    }
    if report.points_checked == 0 {
        return Err(Error::Empty("region (no admissible points)"));
    }
    Ok(report)
}
