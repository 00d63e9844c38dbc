//! Two-colour Friedman urn and its coupling to the `alpha = beta = 1` walk.
//!
//! Each draw picks white with probability `W / (W + B)`, then adds `A` balls
//! of the drawn colour and `sigma - A` of the other. The normalised colour
//! difference `(W - B) / (mean(A) - (sigma - mean(A)))` moves by `+-1` when
//! `A` is deterministic and has conditional drift `rho x / t`.

use serde::{Deserialize, Serialize};

use crate::engine::{replicate, ReplicaPlan};
use crate::error::{invalid, Error, Result};
use crate::rng::{Stream, DOMAIN_URN};

const LAW_TOL: f64 = 1e-12;
const INTEGRAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrnSpec {
    pub sigma: f64,
    /// Atoms `(value, probability)` of the law of `A`.
    pub a_law: Vec<(f64, f64)>,
    pub w0: f64,
    pub b0: f64,
}

impl UrnSpec {
    pub fn new(sigma: f64, a_law: Vec<(f64, f64)>, w0: f64, b0: f64) -> Result<Self> {
        let spec = Self { sigma, a_law, w0, b0 };
        spec.validate()?;
        Ok(spec)
    }

    /// Urn adding a fixed `a` of the drawn colour.
    pub fn deterministic(sigma: f64, a: f64, w0: f64, b0: f64) -> Result<Self> {
        Self::new(sigma, vec![(a, 1.0)], w0, b0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", self.sigma, "must be positive and finite"));
        }
        if self.a_law.is_empty() {
            return Err(Error::Empty("a_law"));
        }
        let mut total = 0.0;
        for &(v, p) in &self.a_law {
            if !(0.0..=self.sigma).contains(&v) {
                return Err(invalid("a_law", v, "values of A must lie in [0, sigma]"));
            }
            if !(p >= 0.0 && p.is_finite()) {
                return Err(invalid("a_law", p, "probabilities must be nonnegative"));
            }
            total += p;
        }
        if (total - 1.0).abs() > LAW_TOL {
            return Err(invalid("a_law", total, "probabilities must sum to 1"));
        }
        let (ab, bb) = (self.alpha_bar(), self.beta_bar());
        if !(ab > bb && bb > 0.0) {
            return Err(invalid("a_law", ab, "need mean(A) > sigma - mean(A) > 0"));
        }
        for (name, v) in [("W0", self.w0), ("B0", self.b0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, v, "must be positive"));
            }
        }
        let t0 = (self.w0 + self.b0) / self.sigma;
        if (t0 - t0.round()).abs() > INTEGRAL_TOL || t0.round() < 1.0 {
            return Err(invalid(
                "W0 + B0",
                self.w0 + self.b0,
                "must be a positive multiple of sigma",
            ));
        }
        Ok(())
    }

    pub fn alpha_bar(&self) -> f64 {
        self.a_law.iter().map(|&(v, p)| v * p).sum()
    }

    pub fn beta_bar(&self) -> f64 {
        self.sigma - self.alpha_bar()
    }

    /// Normalising constant `alpha_bar - beta_bar` of the coupled walk.
    pub fn scale(&self) -> f64 {
        2.0 * self.alpha_bar() - self.sigma
    }

    pub fn t0(&self) -> u64 {
        ((self.w0 + self.b0) / self.sigma).round() as u64
    }

    pub fn initial(&self) -> UrnState {
        UrnState {
            w: self.w0,
            b: self.b0,
            t: self.t0(),
        }
    }

    /// `sigma / (alpha_bar - beta_bar)`, the largest coupled step.
    pub fn step_bound(&self) -> f64 {
        self.sigma / self.scale()
    }

    fn sample_a(&self, stream: &mut Stream) -> f64 {
        if let [(v, _)] = self.a_law[..] {
            return v;
        }
        let u = stream.next_f64();
        let mut acc = 0.0;
        for &(v, p) in &self.a_law {
            acc += p;
            if u < acc {
                return v;
            }
        }
        self.a_law.last().expect("law is non-empty").0
    }
}

pub fn urn_rho(spec: &UrnSpec) -> f64 {
    (spec.alpha_bar() - spec.beta_bar()) / spec.sigma
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UrnState {
    pub w: f64,
    pub b: f64,
    pub t: u64,
}

/// Applies one draw given the colour and the sampled `A`.
pub fn apply_draw(spec: &UrnSpec, s: UrnState, white: bool, a: f64) -> UrnState {
    let other = spec.sigma - a;
    let (w, b) = if white {
        (s.w + a, s.b + other)
    } else {
        (s.w + other, s.b + a)
    };
    UrnState { w, b, t: s.t + 1 }
}

/// Runs `draws` draws; the result includes the initial state.
pub fn run_urn(spec: &UrnSpec, draws: u64, seed: u64) -> Result<Vec<UrnState>> {
    spec.validate()?;
    if draws == 0 {
        return Err(invalid("draws", 0, "at least one draw required"));
    }
    let mut stream = Stream::new(seed, DOMAIN_URN);
    let mut s = spec.initial();
    let mut out = Vec::with_capacity(draws as usize + 1);
    out.push(s);
    for _ in 0..draws {
        let white = stream.next_f64() * (s.w + s.b) < s.w;
        let a = spec.sample_a(&mut stream);
        s = apply_draw(spec, s, white, a);
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMagnitudes {
    pub min: f64,
    pub max: f64,
    /// Sorted distinct `|dX|` values of the signed walk.
    pub distinct: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRecord {
    /// Final value of the coupled walk.
    pub x: f64,
    /// Largest `|E[dS | state] - rho S / t|` over visited states, `S` the
    /// signed walk.
    pub drift_identity_residual: f64,
    pub step_magnitudes: StepMagnitudes,
    /// `E[dS^2]`, the same at every state.
    pub step_second_moment: f64,
}

/// Exact conditional drift of the signed walk at a state.
pub fn signed_drift(spec: &UrnSpec, s: &UrnState) -> f64 {
    let total = s.w + s.b;
    let (pw, pb) = (s.w / total, s.b / total);
    let jump = (2.0 * spec.alpha_bar() - spec.sigma) / spec.scale();
    pw * jump - pb * jump
}

/// Maps an urn trajectory to `|W - B| / (alpha_bar - beta_bar)`.
pub fn coupled_walk(spec: &UrnSpec, path: &[UrnState]) -> Result<(Vec<f64>, CouplingRecord)> {
    spec.validate()?;
    let last = path.last().ok_or(Error::Empty("urn trajectory"))?;
    let scale = spec.scale();
    let rho = urn_rho(spec);
    let signed: Vec<f64> = path.iter().map(|s| (s.w - s.b) / scale).collect();
    let mut residual: f64 = 0.0;
    for (s, &x) in path.iter().zip(&signed) {
        let t = (s.w + s.b) / spec.sigma;
        residual = residual.max((signed_drift(spec, s) - rho * x / t).abs());
    }
    let mut distinct: Vec<f64> = Vec::new();
    for w in signed.windows(2) {
        let d = (w[1] - w[0]).abs();
        if !distinct.iter().any(|&v| (v - d).abs() <= 1e-12 * v.max(1.0)) {
            distinct.push(d);
        }
    }
    distinct.sort_by(f64::total_cmp);
    let step_second_moment = spec
        .a_law
        .iter()
        .map(|&(v, p)| p * ((2.0 * v - spec.sigma) / scale).powi(2))
        .sum();
    let record = CouplingRecord {
        x: (last.w - last.b).abs() / scale,
        drift_identity_residual: residual,
        step_magnitudes: StepMagnitudes {
            min: distinct.first().copied().unwrap_or(0.0),
            max: distinct.last().copied().unwrap_or(0.0),
            distinct,
        },
        step_second_moment,
    };
    Ok((signed.iter().map(|x| x.abs()).collect(), record))
}

/// Returns of `W - B` to its initial value up to one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnTally {
    pub horizon: u64,
    pub return_count: u64,
    /// Draw index of the last return, `None` if there was none.
    pub last_return_time: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRecord {
    pub replica: u64,
    /// One tally per horizon, in the order the horizons were given.
    pub tallies: Vec<ReturnTally>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Census {
    pub horizons: Vec<u64>,
    pub records: Vec<CensusRecord>,
}

impl Census {
    fn column(&self, h: usize) -> impl Iterator<Item = &ReturnTally> {
        self.records.iter().map(move |r| &r.tallies[h])
    }

    pub fn mean_return_count(&self, h: usize) -> f64 {
        self.column(h).map(|t| t.return_count as f64).sum::<f64>() / self.records.len() as f64
    }

    /// Fraction of replicas whose last return up to horizon `h` is after `after`.
    pub fn fraction_returning_after(&self, h: usize, after: u64) -> f64 {
        let n = self
            .column(h)
            .filter(|t| t.last_return_time.is_some_and(|l| l > after))
            .count();
        n as f64 / self.records.len() as f64
    }

    /// Distribution of last return times at horizon `h`, sorted, replicas
    /// without a return omitted.
    pub fn last_return_times(&self, h: usize) -> Vec<u64> {
        let mut v: Vec<u64> = self.column(h).filter_map(|t| t.last_return_time).collect();
        v.sort_unstable();
        v
    }
}

/// Integer encoding of the colour difference: `W - B = D0 + k * unit` and
/// each atom of `A` moves `k` by an integer.
struct Lattice {
    unit: f64,
    jumps: Vec<i64>,
}

fn lattice(spec: &UrnSpec) -> Result<Lattice> {
    let moves: Vec<f64> = spec.a_law.iter().map(|&(v, _)| 2.0 * v - spec.sigma).collect();
    let unit = moves
        .iter()
        .map(|m| m.abs())
        .filter(|&m| m > INTEGRAL_TOL)
        .fold(f64::INFINITY, f64::min);
    let mut jumps = Vec::with_capacity(moves.len());
    for m in moves {
        let j = m / unit;
        if (j - j.round()).abs() > INTEGRAL_TOL {
            return Err(invalid(
                "a_law",
                m,
                "return census needs the values of 2A - sigma on a common lattice",
            ));
        }
        jumps.push(j.round() as i64);
    }
    Ok(Lattice { unit, jumps })
}

fn census_replica(spec: &UrnSpec, lat: &Lattice, order: &[usize], horizons: &[u64], seed: u64) -> Vec<ReturnTally> {
    let mut stream = Stream::new(seed, DOMAIN_URN);
    let d0 = spec.w0 - spec.b0;
    let mut total = spec.w0 + spec.b0;
    let mut k: i64 = 0;
    let (mut count, mut last) = (0u64, None);
    let mut n = 0u64;
    let mut out = vec![
        ReturnTally {
            horizon: 0,
            return_count: 0,
            last_return_time: None
        };
        horizons.len()
    ];
    let deterministic = lat.jumps.len() == 1;
    for &i in order {
        while n < horizons[i] {
            let d = d0 + k as f64 * lat.unit;
            // White with probability W / (W + B) = (total + d) / (2 total).
            let white = 2.0 * stream.next_f64() * total < total + d;
            let j = if deterministic {
                lat.jumps[0]
            } else {
                let u = stream.next_f64();
                let mut acc = 0.0;
                let mut pick = lat.jumps.len() - 1;
                for (idx, &(_, p)) in spec.a_law.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = idx;
                        break;
                    }
                }
                lat.jumps[pick]
            };
            k += if white { j } else { -j };
            total += spec.sigma;
            n += 1;
            if k == 0 {
                count += 1;
                last = Some(n);
            }
        }
        out[i] = ReturnTally {
            horizon: horizons[i],
            return_count: count,
            last_return_time: last,
        };
    }
    out
}

/// Counts draws `n >= 1` with `W_n - B_n = W_0 - B_0`, for several horizons
/// along one path per replica.
pub fn zero_return_census_multi(
    spec: &UrnSpec,
    horizons: &[u64],
    plan: &ReplicaPlan,
    threads: usize,
) -> Result<Census> {
    spec.validate()?;
    if horizons.is_empty() {
        return Err(Error::Empty("horizon list"));
    }
    let lat = lattice(spec)?;
    let mut order: Vec<usize> = (0..horizons.len()).collect();
    order.sort_by_key(|&i| horizons[i]);
    let set = replicate(plan, threads, |_, seed| {
        census_replica(spec, &lat, &order, horizons, seed)
    })?;
    let records = set
        .records()
        .iter()
        .map(|(i, t)| CensusRecord {
            replica: *i,
            tallies: t.clone(),
        })
        .collect();
    Ok(Census {
        horizons: horizons.to_vec(),
        records,
    })
}

pub fn zero_return_census(spec: &UrnSpec, horizon: u64, plan: &ReplicaPlan, threads: usize) -> Result<Census> {
    zero_return_census_multi(spec, &[horizon], plan, threads)
}
