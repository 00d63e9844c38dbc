//! Monte Carlo estimators with confidence intervals.
//!
//! Each estimator turns an almost-sure statement about the walk into a
//! finite-horizon probability or slope with a 95% interval. All of them
//! fan out over [`ReplicaPlan`] replicas and fold the per-replica records in
//! replica order, so results depend only on the inputs and the master seed.

use serde::{Deserialize, Serialize};

use crate::engine::{first_exit, first_exit_levels, try_replicate, ReplicaPlan, Trajectory, Walker};
use crate::error::{invalid, Error, Result};
use crate::kernels::Kernel;
use crate::lyapunov::{choose_exit_exponent, nu_bound};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959964;

/// Largest tolerated fraction of excluded (capped or degenerate) replicas.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CiMethod {
    Wilson,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateCI {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: u64,
    pub method: CiMethod,
}

impl EstimateCI {
    /// Binomial standard error `sqrt(p (1 - p) / n)` of a proportion.
    pub fn standard_error(&self) -> f64 {
        if self.n == 0 {
            return f64::INFINITY;
        }
        (self.point * (1.0 - self.point) / self.n as f64).sqrt()
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

/// Wilson score interval for `successes` out of `n`.
pub fn wilson(successes: u64, n: u64, z: f64) -> EstimateCI {
    if n == 0 {
        return EstimateCI {
            point: f64::NAN,
            lo: 0.0,
            hi: 1.0,
            n,
            method: CiMethod::Wilson,
        };
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (centre - half).clamp(0.0, p)
    };
    let hi = if successes == n {
        1.0
    } else {
        (centre + half).clamp(p, 1.0)
    };
    EstimateCI {
        point: p,
        lo,
        hi,
        n,
        method: CiMethod::Wilson,
    }
}

/// Normal interval for the mean of `values`.
pub fn normal_mean(values: &[f64], z: f64) -> EstimateCI {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let half = z * (var / n as f64).sqrt();
    EstimateCI {
        point: mean,
        lo: mean - half,
        hi: mean + half,
        n: n as u64,
        method: CiMethod::Normal,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingCurve {
    pub levels: Vec<f64>,
    /// `P(X < a before X > n)` per level, over uncapped replicas.
    pub estimates: Vec<EstimateCI>,
    pub a: f64,
    pub start: (f64, u64),
    pub capped_fraction: Vec<f64>,
    /// Some level had more than 1% capped replicas.
    pub unreliable: bool,
}

/// Estimates the probability of dropping below `a` before exceeding each
/// level. One path per replica serves every level.
#[allow(clippy::too_many_arguments)]
pub fn hitting_curve(
    kernel: &Kernel,
    a: f64,
    levels: &[f64],
    x0: f64,
    t0: u64,
    plan: &ReplicaPlan,
    cap: u64,
    threads: usize,
) -> Result<HittingCurve> {
    if levels.is_empty() {
        return Err(Error::Empty("level list"));
    }
    if !levels.windows(2).all(|w| w[0] < w[1]) {
        return Err(invalid(
            "levels",
            format!("{levels:?}"),
            "levels must be strictly increasing",
        ));
    }
    if !(a < x0 && x0 < levels[0]) {
        return Err(invalid("x0", x0, "need a < x0 < min(levels)"));
    }
    let set = try_replicate(plan, threads, |_, seed| {
        first_exit_levels(kernel, x0, t0, a, levels, cap, seed)
    })?;
    let total = set.len() as u64;
    let mut estimates = Vec::with_capacity(levels.len());
    let mut capped_fraction = Vec::with_capacity(levels.len());
    for j in 0..levels.len() {
        let (mut low, mut capped) = (0u64, 0u64);
        for outcomes in set.values() {
            let o = &outcomes[j];
            capped += o.capped as u64;
            low += o.exited_low as u64;
        }
        estimates.push(wilson(low, total - capped, Z95));
        capped_fraction.push(capped as f64 / total as f64);
    }
    let unreliable = capped_fraction.iter().any(|&f| f > MAX_EXCLUDED_FRACTION);
    Ok(HittingCurve {
        levels: levels.to_vec(),
        estimates,
        a,
        start: (x0, t0),
        capped_fraction,
        unreliable,
    })
}

/// Running maxima of `x / sqrt(t)` at the end of each horizon, one path.
pub fn sup_ratio_at_horizons(kernel: &Kernel, x0: f64, t0: u64, horizons: &[u64], seed: u64) -> Result<Vec<f64>> {
    let last = horizons.iter().copied().max().ok_or(Error::Empty("horizon list"))?;
    let mut order: Vec<usize> = (0..horizons.len()).collect();
    order.sort_by_key(|&i| horizons[i]);
    let mut out = vec![0.0; horizons.len()];
    let mut w = Walker::new(kernel, x0, t0, seed, last)?;
    let mut sup = x0 / (t0 as f64).sqrt();
    let mut steps = 0u64;
    for &i in &order {
        while steps < horizons[i] {
            w.step();
            steps += 1;
            let r = w.x / (w.t as f64).sqrt();
            if r > sup {
                sup = r;
            }
        }
        out[i] = sup;
    }
    Ok(out)
}

/// Estimates `P(exists t <= t0 + T: X_t > A sqrt(t))` for each horizon `T`.
///
/// Horizons share each replica's path, so the estimates are nondecreasing in
/// `T` and nonincreasing in `A` for a fixed seed.
#[allow(clippy::too_many_arguments)]
pub fn lil_crossing(
    kernel: &Kernel,
    threshold: f64,
    horizons: &[u64],
    x0: f64,
    t0: u64,
    plan: &ReplicaPlan,
    threads: usize,
) -> Result<Vec<EstimateCI>> {
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(invalid("A", threshold, "threshold must be finite and >= 0"));
    }
    if horizons.contains(&0) {
        return Err(invalid("horizons", 0, "horizons must be positive"));
    }
    let set = try_replicate(plan, threads, |_, seed| {
        sup_ratio_at_horizons(kernel, x0, t0, horizons, seed)
    })?;
    let n = set.len() as u64;
    Ok((0..horizons.len())
        .map(|j| {
            let hits = set.values().filter(|s| s[j] > threshold).count() as u64;
            wilson(hits, n, Z95)
        })
        .collect())
}

/// `4 h B1^2 / b^2`.
pub fn doob_bound(h: f64, b: f64, b1: f64) -> f64 {
    4.0 * h * b1 * b1 / (b * b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoobTail {
    pub estimate: EstimateCI,
    pub bound: f64,
    pub steps: u64,
    pub barrier: f64,
}

/// Empirical `P(min_{s <= h x^2} X_s < x0 - b x)` next to the maximal
/// inequality bound. Aborts if any visited state has negative drift.
#[allow(clippy::too_many_arguments)]
pub fn doob_tail(
    kernel: &Kernel,
    x: f64,
    h: f64,
    b: f64,
    x0: f64,
    t0: u64,
    plan: &ReplicaPlan,
    threads: usize,
) -> Result<DoobTail> {
    for (name, v) in [("x", x), ("h", h), ("b", b)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(name, v, "must be positive"));
        }
    }
    if b > x0 / x {
        return Err(invalid("b", b, "need b <= x0 / x so the barrier is nonnegative"));
    }
    let steps = (h * x * x).ceil() as u64;
    let barrier = x0 - b * x;
    let set = try_replicate(plan, threads, |_, seed| -> Result<(bool, u64)> {
        let mut w = Walker::new(kernel, x0, t0, seed, steps)?;
        let mut dropped = false;
        let mut negative = 0u64;
        for _ in 0..steps {
            negative += (w.current_drift() < 0.0) as u64;
            w.step();
            dropped |= w.x < barrier;
        }
        Ok((dropped, negative))
    })?;
    let negative: u64 = set.values().map(|r| r.1).sum();
    if negative > 0 {
        return Err(Error::NegativeDrift { count: negative });
    }
    let hits = set.values().filter(|r| r.0).count() as u64;
    Ok(DoobTail {
        estimate: wilson(hits, set.len() as u64, Z95),
        bound: doob_bound(h, b, kernel.hypothesis_bounds().b1),
        steps,
        barrier,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitBoundCheck {
    pub estimate: EstimateCI,
    pub nu: f64,
    pub k: u32,
    pub capped: u64,
    /// `estimate - 3 SE >= nu` and no replica hit the cap.
    pub passed: bool,
}

/// Runs the constant-drift kernel from `gamma * n` and compares the
/// probability of leaving `[a, n]` downward with the exponent bound.
#[allow(clippy::too_many_arguments)]
pub fn exit_bound_check(
    c: f64,
    b2: f64,
    gamma: f64,
    a: f64,
    n: u64,
    plan: &ReplicaPlan,
    cap: u64,
    threads: usize,
) -> Result<ExitBoundCheck> {
    let kernel = Kernel::const_drift(c, n, a.max(1.0))?;
    let certified = kernel.hypothesis_bounds();
    if b2 > certified.b2 {
        return Err(invalid("B2", b2, "exceeds the kernel's certified second-moment floor"));
    }
    let k = choose_exit_exponent(c, b2)?;
    let nu = nu_bound(gamma, k)?;
    if (n as f64) <= 2.0 * k as f64 * certified.b1 {
        return Err(invalid("n", n, "need n > 2 k B1"));
    }
    let x0 = gamma * n as f64;
    let set = try_replicate(plan, threads, |_, seed| {
        first_exit(&kernel, x0, kernel.t0, a, n as f64, cap, seed)
    })?;
    let capped = set.values().filter(|o| o.capped).count() as u64;
    let low = set.values().filter(|o| o.exited_low).count() as u64;
    let estimate = wilson(low, set.len() as u64 - capped, Z95);
    let passed = capped == 0 && estimate.point - 3.0 * estimate.standard_error() >= nu;
    Ok(ExitBoundCheck {
        estimate,
        nu,
        k,
        capped,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub estimate: EstimateCI,
    pub fitted: u64,
    pub excluded: u64,
}

/// Least-squares slope of `ln x` on `ln t` over `[t_end / 10, t_end]`.
/// `None` if the window touches `x = 0` or has fewer than two samples.
pub fn last_decade_slope(tr: &Trajectory) -> Option<f64> {
    let t_end = tr.final_point.0 as f64;
    let pts: Vec<(f64, f64)> = tr
        .samples
        .iter()
        .filter(|(t, _)| *t as f64 >= t_end / 10.0)
        .map(|&(t, x)| ((t as f64).ln(), x))
        .collect();
    if pts.len() < 2 || pts.iter().any(|&(_, x)| x <= 0.0) {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(lt, x) in &pts {
        sxy += (lt - mx) * (x.ln() - my);
        sxx += (lt - mx) * (lt - mx);
    }
    Some(sxy / sxx)
}

/// Mean last-decade growth exponent across trajectories.
pub fn growth_exponent(trajectories: &[Trajectory]) -> Result<GrowthFit> {
    let first = trajectories.first().ok_or(Error::Empty("trajectory list"))?;
    if trajectories
        .iter()
        .any(|t| (t.x0, t.t0, t.horizon) != (first.x0, first.t0, first.horizon))
    {
        return Err(invalid(
            "trajectories",
            "",
            "trajectories must share x0, t0 and horizon",
        ));
    }
    if ((first.t0 + first.horizon) as f64) < 100.0 * first.t0 as f64 {
        return Err(invalid("horizon", first.horizon, "need at least two decades of t"));
    }
    let slopes: Vec<f64> = trajectories.iter().filter_map(last_decade_slope).collect();
    let excluded = (trajectories.len() - slopes.len()) as u64;
    let total = trajectories.len() as u64;
    if slopes.is_empty() || excluded as f64 > MAX_EXCLUDED_FRACTION * total as f64 {
        return Err(Error::Exclusions {
            excluded,
            total,
            what: "trajectories touching 0 in the fitted window",
        });
    }
    Ok(GrowthFit {
        estimate: normal_mean(&slopes, Z95),
        fitted: slopes.len() as u64,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{DriftSpec, Variant};

    #[test]
    fn wilson_contains_point_and_handles_extremes() {
        for (s, n) in [(0, 10), (10, 10), (3, 10), (5000, 10000), (1, 1)] {
            let e = wilson(s, n, Z95);
            assert!(e.lo <= e.point && e.point <= e.hi, "{e:?}");
            assert!(e.lo >= 0.0 && e.hi <= 1.0);
        }
        let zero = wilson(0, 10, Z95);
        assert_eq!(zero.lo, 0.0);
        assert!(zero.hi > 0.0 && zero.hi < 1.0);
        let all = wilson(10, 10, Z95);
        assert_eq!(all.hi, 1.0);
        assert!(all.lo > 0.0 && all.lo < 1.0);
    }

    #[test]
    fn wilson_reference_value() {
        // Standard tabulated 95% Wilson interval for 3 successes in 10.
        let e = wilson(3, 10, Z95);
        assert!((e.lo - 0.1078).abs() < 1e-4, "{}", e.lo);
        assert!((e.hi - 0.6032).abs() < 1e-4, "{}", e.hi);
    }

    #[test]
    fn doob_bound_formula() {
        assert_eq!(doob_bound(1.0, 4.0, 1.0), 0.25);
        assert_eq!(doob_bound(0.5, 2.0, 1.0), 0.5);
    }

    #[test]
    fn lil_zero_threshold_is_certain() {
        let k = Kernel::new(DriftSpec::symmetric(), 1.0, Variant::LatticeNN).unwrap();
        let est = lil_crossing(&k, 0.0, &[10, 100], 1.0, 100, &ReplicaPlan::new(1, 50), 1).unwrap();
        assert!(est.iter().all(|e| e.point == 1.0));
    }

    #[test]
    fn hitting_curve_validates_geometry() {
        let k = Kernel::lattice(0.3, 1.0, 1.0, 2.0).unwrap();
        let plan = ReplicaPlan::new(1, 4);
        assert!(hitting_curve(&k, 2.0, &[16.0, 8.0], 5.0, 100, &plan, 100, 1).is_err());
        assert!(hitting_curve(&k, 2.0, &[16.0], 20.0, 100, &plan, 100, 1).is_err());
        assert!(hitting_curve(&k, 2.0, &[], 5.0, 100, &plan, 100, 1).is_err());
    }

    #[test]
    fn capped_curve_is_flagged() {
        let k = Kernel::lattice(0.3, 1.0, 1.0, 2.0).unwrap();
        let c = hitting_curve(&k, 2.0, &[1000.0], 500.0, 100, &ReplicaPlan::new(1, 20), 5, 1).unwrap();
        assert!(c.unreliable);
        assert_eq!(c.capped_fraction, vec![1.0]);
    }

    #[test]
    fn growth_needs_two_decades() {
        let k = Kernel::lattice(1.0, 0.0, 0.0, 1.0).unwrap();
        let tr = crate::engine::simulate(&k, 2.0, 100, 5000, 1).unwrap();
        assert!(growth_exponent(&[tr]).is_err());
    }

    #[test]
    fn deterministic_push_grows_linearly() {
        let k = Kernel::lattice(1.0, 0.0, 0.0, 1.0).unwrap();
        let trs: Vec<_> = (0..3)
            .map(|s| crate::engine::simulate(&k, 2.0, 100, 100_000, s).unwrap())
            .collect();
        let fit = growth_exponent(&trs).unwrap();
        // x = t - 98, so the local slope t / (t - 98) is within 1% of 1 on [1e4, 1e5].
        assert!((fit.estimate.point - 1.0).abs() < 1e-2, "{fit:?}");
    }

    #[test]
    fn exit_check_rejects_small_n() {
        let plan = ReplicaPlan::new(1, 10);
        assert!(exit_bound_check(0.25, 1.0, 0.5, 2.0, 10, &plan, 1000, 1).is_err());
        assert!(exit_bound_check(0.25, 2.0, 0.5, 2.0, 200, &plan, 1000, 1).is_err());
    }
}
