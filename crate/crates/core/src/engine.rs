//! Trajectory simulation, first-exit experiments and replica fan-out.
//!
//! A path is a pure function of `(kernel, x0, t0, seed)`: the `i`-th step
//! consumes the `i`-th uniform of the replica's Philox stream. Replicas run
//! on a rayon pool and are collected by index, so merged results do not
//! depend on the number of worker threads.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::Kernel;
use crate::rng::{split, Stream, DOMAIN_WALK};

/// Growth factor of the geometric sampling grid.
pub const SAMPLE_RATIO: f64 = 1.05;

/// Default per-replica step cap.
pub const DEFAULT_CAP: u64 = 10_000_000;

const MAX_TIME: u64 = i64::MAX as u64;

/// Stepping state of one walk.
#[derive(Debug, Clone)]
pub struct Walker<'k> {
    kernel: &'k Kernel,
    rng: Stream,
    pub x: f64,
    pub t: u64,
    pub clamp_hits: u64,
}

impl<'k> Walker<'k> {
    /// Starts a walk at `(x0, t0)`. `max_steps` bounds how far the caller
    /// will step, so time overflow is checked once here.
    pub fn new(kernel: &'k Kernel, x0: f64, t0: u64, seed: u64, max_steps: u64) -> Result<Self> {
        if !(x0.is_finite() && x0 >= 0.0) {
            return Err(invalid("x0", x0, "start must be finite and nonnegative"));
        }
        if t0 < kernel.t0 {
            return Err(Error::TimeBeforeOrigin { t: t0, t0: kernel.t0 });
        }
        match t0.checked_add(max_steps) {
            Some(end) if end <= MAX_TIME => {}
            _ => return Err(Error::TimeOverflow),
        }
        Ok(Self {
            kernel,
            rng: Stream::new(seed, DOMAIN_WALK),
            x: x0,
            t: t0,
            clamp_hits: 0,
        })
    }

    /// Advances one step and returns the jump.
    #[inline(always)]
    pub fn step(&mut self) -> f64 {
        let u = self.rng.next_f64();
        let (d, clamped) = self.kernel.sample_jump(self.x, self.t, u);
        self.x += d;
        self.t += 1;
        self.clamp_hits += clamped as u64;
        d
    }

    /// Mean jump of the law about to be sampled.
    #[inline]
    pub fn current_drift(&self) -> f64 {
        let p = self.kernel.probs(self.x, self.t);
        p.up - p.down
    }
}

/// Emits `t0` and then `ceil(t0 * 1.05^k)`, skipping repeats.
#[derive(Debug, Clone)]
struct SampleClock {
    t0: f64,
    factor: f64,
    next: u64,
}

impl SampleClock {
    fn new(t0: u64) -> Self {
        let mut clock = Self {
            t0: t0 as f64,
            factor: 1.0,
            next: t0,
        };
        clock.advance(t0);
        clock
    }

    fn advance(&mut self, last: u64) {
        while self.next <= last {
            self.factor *= SAMPLE_RATIO;
            self.next = (self.t0 * self.factor).ceil() as u64;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub x0: f64,
    pub t0: u64,
    pub horizon: u64,
    /// `(t, x)` on the geometric grid, plus the start and final points.
    pub samples: Vec<(u64, f64)>,
    pub final_point: (u64, f64),
    /// Running max of `x / sqrt(t)` over every visited state.
    pub sup_ratio: f64,
    pub min_x: f64,
    pub clamp_hits: u64,
}

impl Trajectory {
    /// `t,x` lines for plotting.
    pub fn to_text(&self) -> String {
        let mut out = String::from("t,x\n");
        for (t, x) in &self.samples {
            out.push_str(&format!("{t},{x}\n"));
        }
        out
    }
}

pub fn simulate(kernel: &Kernel, x0: f64, t0: u64, horizon: u64, seed: u64) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(invalid("horizon", 0, "horizon must be at least 1"));
    }
    let mut w = Walker::new(kernel, x0, t0, seed, horizon)?;
    let mut clock = SampleClock::new(t0);
    let mut samples = vec![(t0, x0)];
    let mut sup_ratio = x0 / (t0 as f64).sqrt();
    let mut min_x = x0;
    let end = t0 + horizon;
    while w.t < end {
        w.step();
        let r = w.x / (w.t as f64).sqrt();
        if r > sup_ratio {
            sup_ratio = r;
        }
        if w.x < min_x {
            min_x = w.x;
        }
        if w.t == clock.next || w.t == end {
            samples.push((w.t, w.x));
            clock.advance(w.t);
        }
    }
    Ok(Trajectory {
        seed,
        x0,
        t0,
        horizon,
        samples,
        final_point: (w.t, w.x),
        sup_ratio,
        min_x,
        clamp_hits: w.clamp_hits,
    })
}

/// Terminal event of a walk on `[a, n]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitOutcome {
    /// Left through the bottom (`X < a`).
    pub exited_low: bool,
    /// Steps taken until exit, or the cap.
    pub exit_time: u64,
    pub exit_x: f64,
    /// No exit within the cap; `exit_x` is the position at the cap.
    pub capped: bool,
}

fn check_exit_args(x0: f64, a: f64, n: f64, cap: u64) -> Result<()> {
    if !(a.is_finite() && n.is_finite() && a < n) {
        return Err(invalid("n", n, "exit interval must satisfy a < n"));
    }
    if !(a < x0 && x0 < n) {
        return Err(invalid("x0", x0, "start must lie strictly inside (a, n)"));
    }
    if cap == 0 {
        return Err(invalid("cap", 0, "cap must be at least 1"));
    }
    Ok(())
}

/// Walks until `X < a`, `X > n`, or `cap` steps.
pub fn first_exit(kernel: &Kernel, x0: f64, t0: u64, a: f64, n: f64, cap: u64, seed: u64) -> Result<ExitOutcome> {
    Ok(first_exit_levels(kernel, x0, t0, a, &[n], cap, seed)?[0])
}

/// [`first_exit`] for several upper levels along one path.
///
/// The outcome for each level is what a separate run with the same seed
/// would produce, since paths agree until the first exit.
pub fn first_exit_levels(
    kernel: &Kernel,
    x0: f64,
    t0: u64,
    a: f64,
    levels: &[f64],
    cap: u64,
    seed: u64,
) -> Result<Vec<ExitOutcome>> {
    let top = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if levels.is_empty() {
        return Err(Error::Empty("level list"));
    }
    for &n in levels {
        check_exit_args(x0, a, n, cap)?;
    }
    let mut w = Walker::new(kernel, x0, t0, seed, cap)?;
    // Levels are resolved in increasing order as the path climbs.
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&i, &j| levels[i].total_cmp(&levels[j]));
    let mut out = vec![None; levels.len()];
    let mut next = 0;
    let mut steps = 0u64;
    let mut max_x = x0;
    loop {
        if steps == cap {
            for &i in &order[next..] {
                out[i] = Some(ExitOutcome {
                    exited_low: false,
                    exit_time: cap,
                    exit_x: w.x,
                    capped: true,
                });
            }
            break;
        }
        w.step();
        steps += 1;
        if w.x < a {
            for &i in &order[next..] {
                out[i] = Some(ExitOutcome {
                    exited_low: true,
                    exit_time: steps,
                    exit_x: w.x,
                    capped: false,
                });
            }
            break;
        }
        if w.x > max_x {
            max_x = w.x;
            while next < order.len() && w.x > levels[order[next]] {
                out[order[next]] = Some(ExitOutcome {
                    exited_low: false,
                    exit_time: steps,
                    exit_x: w.x,
                    capped: false,
                });
                next += 1;
            }
            if w.x > top {
                break;
            }
        }
    }
    Ok(out.into_iter().map(|o| o.expect("every level resolved")).collect())
}

/// Master seed and replica count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaPlan {
    pub master_seed: u64,
    pub replicas: u64,
}

impl ReplicaPlan {
    pub fn new(master_seed: u64, replicas: u64) -> Self {
        Self { master_seed, replicas }
    }

    pub fn seed(&self, index: u64) -> u64 {
        split(self.master_seed, index)
    }
}

/// Per-replica records keyed by replica index.
///
/// Merging is set union ordered by index: associative, commutative on
/// disjoint sets, with the empty set as identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSet<R> {
    records: Vec<(u64, R)>,
}

impl<R> Default for ReplicaSet<R> {
    fn default() -> Self {
        Self { records: Vec::new() }
    }
}

impl<R> ReplicaSet<R> {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Panics if both sets contain the same replica index.
    pub fn merge(self, other: Self) -> Self {
        let mut records = Vec::with_capacity(self.records.len() + other.records.len());
        let mut a = self.records.into_iter().peekable();
        let mut b = other.records.into_iter().peekable();
        loop {
            let take_a = match (a.peek(), b.peek()) {
                (Some(x), Some(y)) => {
                    assert_ne!(x.0, y.0, "replica {} present in both sets", x.0);
                    x.0 < y.0
                }
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            records.push(if take_a { a.next() } else { b.next() }.unwrap());
        }
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[(u64, R)] {
        &self.records
    }

    pub fn values(&self) -> impl Iterator<Item = &R> {
        self.records.iter().map(|(_, r)| r)
    }

    pub fn into_values(self) -> Vec<R> {
        self.records.into_iter().map(|(_, r)| r).collect()
    }
}

/// Runs `task(index, seed)` for every replica of the plan.
///
/// `threads = 0` uses rayon's default pool size.
pub fn replicate<R, F>(plan: &ReplicaPlan, threads: usize, task: F) -> Result<ReplicaSet<R>>
where
    R: Send,
    F: Fn(u64, u64) -> R + Sync + Send,
{
    if plan.replicas == 0 {
        return Err(invalid("replicas", 0, "at least one replica required"));
    }
    replicate_range(plan, 0..plan.replicas, threads, task)
}

/// Runs the replicas with indices in `range`.
pub fn replicate_range<R, F>(plan: &ReplicaPlan, range: Range<u64>, threads: usize, task: F) -> Result<ReplicaSet<R>>
where
    R: Send,
    F: Fn(u64, u64) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;
    let records = pool.install(|| {
        range
            .into_par_iter()
            .map(|i| (i, task(i, plan.seed(i))))
            .collect::<Vec<_>>()
    });
    Ok(ReplicaSet { records })
}

/// Like [`replicate`] for fallible tasks; the first error by index wins.
pub fn try_replicate<R, F>(plan: &ReplicaPlan, threads: usize, task: F) -> Result<ReplicaSet<R>>
where
    R: Send,
    F: Fn(u64, u64) -> Result<R> + Sync + Send,
{
    let set = replicate(plan, threads, task)?;
    let mut records = Vec::with_capacity(set.records.len());
    for (i, r) in set.records {
        records.push((i, r?));
    }
    Ok(ReplicaSet { records })
}
