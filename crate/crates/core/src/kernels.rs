//! One-step transition kernels on the half-line with drift `rho * x^alpha / t^beta`.
//!
//! Every kernel has jumps in `{-1, 0, +1}`, so jump boundedness holds with
//! `B1 = 1`. Below the threshold `a` the walk is pushed up deterministically,
//! which makes the time spent in `[0, a]` dominated by a variable with a
//! finite, analytically known mean. Above `a` the mean jump is the power-law
//! drift, capped at the largest mean the jump support can realize.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Probability of holding still for [`Variant::LazyLattice`].
pub const LAZY_HOLD: f64 = 0.5;

/// Drift parameters `(rho, alpha, beta)`.
///
/// `rho = 0` is accepted and gives the symmetric reference walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl DriftSpec {
    pub fn new(rho: f64, alpha: f64, beta: f64) -> Result<Self> {
        let spec = Self { rho, alpha, beta };
        spec.validate()?;
        Ok(spec)
    }

    /// The unbiased walk.
    pub fn symmetric() -> Self {
        Self {
            rho: 0.0,
            alpha: 0.0,
            beta: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let Self { rho, alpha, beta } = *self;
        if !alpha.is_finite() || !beta.is_finite() || beta < 0.0 || alpha > beta {
            return Err(Error::Prohibited { alpha, beta });
        }
        if !rho.is_finite() || rho < 0.0 {
            return Err(Error::RhoOutOfRange {
                rho,
                reason: "rho must be finite and nonnegative",
            });
        }
        if alpha == beta && rho > 1.0 {
            return Err(Error::RhoOutOfRange {
                rho,
                reason: "alpha = beta requires rho <= 1 under the unit jump bound",
            });
        }
        Ok(())
    }

    /// `rho * x^alpha / t^beta` without clamping.
    #[inline]
    pub fn raw_drift(&self, x: f64, t: f64) -> f64 {
        if self.rho == 0.0 {
            return 0.0;
        }
        self.rho * pow_fast(x, self.alpha) / pow_fast(t, self.beta)
    }
}

#[inline(always)]
fn pow_fast(base: f64, exp: f64) -> f64 {
    if exp == 1.0 {
        base
    } else if exp == 0.0 {
        1.0
    } else if exp == 2.0 {
        base * base
    } else if exp == 0.5 {
        base.sqrt()
    } else {
        base.powf(exp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum Variant {
    /// `P(x -> x +- 1) = 1/2 +- drift/2`.
    LatticeNN,
    /// Holds with probability [`LAZY_HOLD`], otherwise `+-1` with the same mean drift.
    LazyLattice,
    /// Constant drift `c / n` above `a`, for exercising exit bounds on `[a, n]`.
    ConstDriftTest { c: f64, n: u64 },
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::LatticeNN => "LatticeNN",
            Variant::LazyLattice => "LazyLattice",
            Variant::ConstDriftTest { .. } => "ConstDriftTest",
        }
    }
}

/// Finite jump distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLaw {
    /// `(jump, probability)` pairs with nonzero probability.
    pub outcomes: Vec<(f64, f64)>,
}

impl StepLaw {
    pub fn total_probability(&self) -> f64 {
        self.outcomes.iter().map(|&(_, p)| p).sum()
    }

    pub fn mean(&self) -> f64 {
        self.outcomes.iter().map(|&(d, p)| d * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.outcomes.iter().map(|&(d, p)| d * d * p).sum()
    }

    pub fn probability_of(&self, jump: f64) -> f64 {
        self.outcomes.iter().filter(|&&(d, _)| d == jump).map(|&(_, p)| p).sum()
    }
}

/// Certified constants for jump boundedness, non-degeneracy above `a` and
/// the mean time needed to leave `[0, a]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisBounds {
    pub b1: f64,
    pub b2: f64,
    pub a: f64,
    pub exit_bound_mean: f64,
}

/// Transition probabilities at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probs {
    pub up: f64,
    pub hold: f64,
    pub down: f64,
    /// Drift was capped at this state.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub spec: DriftSpec,
    pub a: f64,
    pub t0: u64,
    pub variant: Variant,
}

impl Kernel {
    /// Builds a kernel with time origin `t0 = 1`.
    pub fn new(spec: DriftSpec, a: f64, variant: Variant) -> Result<Self> {
        spec.validate()?;
        if !(a.is_finite() && a >= 1.0) {
            return Err(invalid("a", a, "threshold must be finite and >= 1"));
        }
        if let Variant::ConstDriftTest { c, n } = variant {
            if !(c.is_finite() && c > 0.0) {
                return Err(invalid("c", c, "constant drift numerator must be positive"));
            }
            if (n as f64) <= a {
                return Err(invalid("n", n, "upper level must exceed a"));
            }
            if c > n as f64 {
                return Err(invalid("c", c, "drift c/n must not exceed the jump bound"));
            }
        }
        Ok(Self {
            spec,
            a,
            t0: 1,
            variant,
        })
    }

    pub fn lattice(rho: f64, alpha: f64, beta: f64, a: f64) -> Result<Self> {
        Self::new(DriftSpec::new(rho, alpha, beta)?, a, Variant::LatticeNN)
    }

    pub fn const_drift(c: f64, n: u64, a: f64) -> Result<Self> {
        Self::new(DriftSpec::symmetric(), a, Variant::ConstDriftTest { c, n })
    }

    pub fn with_t0(mut self, t0: u64) -> Result<Self> {
        if t0 == 0 {
            return Err(invalid("t0", t0, "time origin must be positive"));
        }
        self.t0 = t0;
        Ok(self)
    }

    /// Largest mean jump the variant can realize above `a`.
    pub fn drift_cap(&self) -> f64 {
        match self.variant {
            Variant::LazyLattice => 1.0 - LAZY_HOLD,
            _ => 1.0,
        }
    }

    /// Unclamped target drift at `(x, t)` for `x >= a`.
    #[inline]
    pub fn target_drift(&self, x: f64, t: u64) -> f64 {
        match self.variant {
            Variant::ConstDriftTest { c, n } => c / n as f64,
            _ => self.spec.raw_drift(x, t as f64),
        }
    }

    /// Transition probabilities; no time-origin check.
    #[inline(always)]
    pub fn probs(&self, x: f64, t: u64) -> Probs {
        if x < self.a {
            return Probs {
                up: 1.0,
                hold: 0.0,
                down: 0.0,
                clamped: false,
            };
        }
        let raw = self.target_drift(x, t);
        let cap = self.drift_cap();
        let clamped = raw.is_nan() || raw > cap;
        let d = if clamped { cap } else { raw };
        match self.variant {
            Variant::LazyLattice => {
                let half_move = 0.5 * (1.0 - LAZY_HOLD);
                Probs {
                    up: half_move + 0.5 * d,
                    hold: LAZY_HOLD,
                    down: half_move - 0.5 * d,
                    clamped,
                }
            }
            _ => Probs {
                up: 0.5 + 0.5 * d,
                hold: 0.0,
                down: 0.5 - 0.5 * d,
                clamped,
            },
        }
    }

    /// Maps a uniform `u` in `[0, 1)` to a jump. Returns the jump and whether
    /// the drift clamp was active.
    #[inline(always)]
    pub fn sample_jump(&self, x: f64, t: u64, u: f64) -> (f64, bool) {
        let p = self.probs(x, t);
        let jump = if u < p.up {
            1.0
        } else if u < p.up + p.hold {
            0.0
        } else {
            -1.0
        };
        (jump, p.clamped)
    }

    fn check_time(&self, t: u64) -> Result<()> {
        if t < self.t0 {
            Err(Error::TimeBeforeOrigin { t, t0: self.t0 })
        } else {
            Ok(())
        }
    }

    pub fn step_law(&self, x: f64, t: u64) -> Result<StepLaw> {
        self.check_time(t)?;
        let p = self.probs(x, t);
        let outcomes = [(1.0, p.up), (0.0, p.hold), (-1.0, p.down)]
            .into_iter()
            .filter(|&(_, q)| q > 0.0)
            .collect();
        Ok(StepLaw { outcomes })
    }

    /// Exact `(E D, E D^2)` over the finite support.
    pub fn moments(&self, x: f64, t: u64) -> Result<(f64, f64)> {
        let law = self.step_law(x, t)?;
        Ok((law.mean(), law.second_moment()))
    }

    /// Analytic constants per variant.
    ///
    /// Jumps are in `{-1, 0, 1}`, so `B1 = 1`. Above `a`, `E D^2` is 1 for the
    /// `+-1` variants and `1 - LAZY_HOLD` for the lazy one. Starting in
    /// `[0, a]` the walk climbs deterministically to the first lattice point
    /// `>= a`; if that point is `a` itself (integer `a`) it leaves upward with
    /// probability `q_up >= q_min` per attempt, a downward move costing one
    /// extra forced step, so the mean sojourn at `a` is at most
    /// `(1 + q_down_max) / q_min`.
    pub fn hypothesis_bounds(&self) -> HypothesisBounds {
        let (b2, q_min, q_down_max) = match self.variant {
            Variant::LazyLattice => {
                let m = 0.5 * (1.0 - LAZY_HOLD);
                (1.0 - LAZY_HOLD, m, m)
            }
            _ => (1.0, 0.5, 0.5),
        };
        let climb = self.a.ceil();
        let at_boundary = if self.a.fract() == 0.0 {
            (1.0 + q_down_max) / q_min
        } else {
            0.0
        };
        HypothesisBounds {
            b1: 1.0,
            b2,
            a: self.a,
            exit_bound_mean: climb + at_boundary,
        }
    }
}
