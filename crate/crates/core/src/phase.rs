//! Recurrence/transience verdicts on the `(alpha, beta)` plane.
//!
//! Regions (all with `beta >= 0`):
//! - transient strip: `0 <= beta < 1`, `2 beta - 1 < alpha < beta`
//! - recurrent region: `alpha < min(beta, 2 beta - 1)`
//! - diagonal `alpha = beta`: decided by `rho` and which side of 1 we are on
//! - line `2 beta - alpha = 1`: open except at its resolved points
//!
//! Inequalities are evaluated with a tolerance of [`BOUNDARY_TOL`]; anything
//! within it of a boundary that no result covers is reported as
//! [`Verdict::CriticalBoundary`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::DriftSpec;

pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Recurrent,
    Transient,
    OpenProblem,
    CriticalBoundary,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Justification {
    T1i,
    T1ii,
    T2i,
    T2ii,
    T3,
    T4,
    T5i,
    T5ii,
    C2i,
    C2ii,
    #[serde(rename = "LIL-line")]
    LilLine,
    OpenLine,
    Prohibited,
    /// On a boundary no result decides.
    Borderline,
    /// `rho` outside the range the diagonal results are normalized for.
    RhoRange,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Recurrent => "Recurrent",
            Verdict::Transient => "Transient",
            Verdict::OpenProblem => "OpenProblem",
            Verdict::CriticalBoundary => "CriticalBoundary",
            Verdict::Invalid => "Invalid",
        }
    }
}

impl Justification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Justification::T1i => "T1i",
            Justification::T1ii => "T1ii",
            Justification::T2i => "T2i",
            Justification::T2ii => "T2ii",
            Justification::T3 => "T3",
            Justification::T4 => "T4",
            Justification::T5i => "T5i",
            Justification::T5ii => "T5ii",
            Justification::C2i => "C2i",
            Justification::C2ii => "C2ii",
            Justification::LilLine => "LIL-line",
            Justification::OpenLine => "OpenLine",
            Justification::Prohibited => "Prohibited",
            Justification::Borderline => "Borderline",
            Justification::RhoRange => "RhoRange",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseLabel {
    pub verdict: Verdict,
    pub justification: Justification,
}

impl PhaseLabel {
    const fn new(verdict: Verdict, justification: Justification) -> Self {
        Self { verdict, justification }
    }
}

const fn label(v: Verdict, j: Justification) -> PhaseLabel {
    PhaseLabel::new(v, j)
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= BOUNDARY_TOL
}

/// `lhs < rhs` with margin.
fn lt(lhs: f64, rhs: f64) -> bool {
    lhs < rhs - BOUNDARY_TOL
}

/// Classifies a drift spec.
///
/// `second_moment_ratio` is `rho / E(D^2)` and is only consulted at the
/// Lamperti point `(alpha, beta) = (-1, 0)`, where it is required.
pub fn classify(spec: &DriftSpec, second_moment_ratio: Option<f64>) -> Result<PhaseLabel> {
    use Justification as J;
    use Verdict as V;
    let DriftSpec { rho, alpha, beta } = *spec;

    if !(alpha.is_finite() && beta.is_finite()) || lt(beta, 0.0) || lt(beta, alpha) {
        return Ok(label(V::Invalid, J::Prohibited));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Ok(label(V::Invalid, J::RhoRange));
    }

    if near(alpha, beta) {
        if lt(1.0, rho) {
            return Ok(label(V::Invalid, J::RhoRange));
        }
        if near(alpha, 1.0) {
            return Ok(if lt(0.5, rho) {
                label(V::Transient, J::T1i)
            } else if lt(rho, 0.5) {
                label(V::Recurrent, J::T2i)
            } else {
                label(V::CriticalBoundary, J::Borderline)
            });
        }
        if alpha < 1.0 {
            return Ok(if near(beta, 0.0) {
                label(V::CriticalBoundary, J::Borderline)
            } else {
                label(V::Transient, J::T3)
            });
        }
        return Ok(if lt(rho, 1.0) {
            label(V::Recurrent, J::T4)
        } else {
            label(V::CriticalBoundary, J::Borderline)
        });
    }

    if near(alpha, -1.0) && near(beta, 0.0) {
        let ratio = second_moment_ratio.ok_or(Error::MissingSecondMomentRatio)?;
        if !(ratio.is_finite() && ratio > 0.0) {
            return Ok(label(V::Invalid, J::RhoRange));
        }
        return Ok(if ratio > 0.5 {
            label(V::Transient, J::T5ii)
        } else {
            label(V::Recurrent, J::T5i)
        });
    }

    if near(alpha, 0.0) && near(beta, 0.5) {
        return Ok(label(V::Recurrent, J::LilLine));
    }

    if near(2.0 * beta - alpha, 1.0) {
        // alpha in (-1, 1) here: the endpoints were handled above and the
        // line leaves the admissible set outside [-1, 1].
        return Ok(label(V::OpenProblem, J::OpenLine));
    }

    if near(beta, 0.0) {
        if lt(alpha, -1.0) {
            return Ok(label(V::Recurrent, J::C2i));
        }
        if lt(-1.0, alpha) && lt(alpha, 0.0) {
            return Ok(label(V::Transient, J::C2ii));
        }
        return Ok(label(V::CriticalBoundary, J::Borderline));
    }

    if in_transient_strip(alpha, beta) {
        return Ok(label(V::Transient, J::T1ii));
    }
    if in_recurrent_region(alpha, beta) {
        return Ok(label(V::Recurrent, J::T2ii));
    }
    Ok(label(V::CriticalBoundary, J::Borderline))
}

/// `0 <= beta < 1` and `2 beta - 1 < alpha < beta`, strictly by the tolerance.
pub fn in_transient_strip(alpha: f64, beta: f64) -> bool {
    beta >= -BOUNDARY_TOL && lt(beta, 1.0) && lt(2.0 * beta - 1.0, alpha) && lt(alpha, beta)
}

/// `beta >= 0` and `alpha < min(beta, 2 beta - 1)`, strictly by the tolerance.
pub fn in_recurrent_region(alpha: f64, beta: f64) -> bool {
    beta >= -BOUNDARY_TOL && lt(alpha, beta.min(2.0 * beta - 1.0))
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn point(&self, i: usize, resolution: usize) -> f64 {
        if i + 1 == resolution {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * (i as f64 / (resolution - 1) as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub label: PhaseLabel,
}

/// Row-major grid of verdicts: rows run over `beta`, columns over `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub resolution: usize,
    pub cells: Vec<GridCell>,
}

impl PhaseGrid {
    pub fn cell(&self, row: usize, col: usize) -> &GridCell {
        &self.cells[row * self.resolution + col]
    }
}

/// Evaluates [`classify`] on a `resolution x resolution` lattice.
///
/// Cells on the Lamperti point use `second_moment_ratio = rho`, i.e. unit
/// second moment as for the `+-1` kernels.
pub fn region_grid(alpha_range: Interval, beta_range: Interval, resolution: usize, rho: f64) -> Result<PhaseGrid> {
    for r in [alpha_range, beta_range] {
        if !(r.lo.is_finite() && r.hi.is_finite() && r.lo < r.hi) {
            return Err(Error::Empty("parameter range"));
        }
    }
    if resolution < 2 {
        return Err(crate::error::invalid(
            "resolution",
            resolution,
            "grid needs at least 2 points per axis",
        ));
    }
    let mut cells = Vec::with_capacity(resolution * resolution);
    for row in 0..resolution {
        let beta = beta_range.point(row, resolution);
        for col in 0..resolution {
            let alpha = alpha_range.point(col, resolution);
            let spec = DriftSpec { rho, alpha, beta };
            let label = classify(&spec, Some(rho))?;
            cells.push(GridCell {
                alpha,
                beta,
                rho,
                label,
            });
        }
    }
    Ok(PhaseGrid { resolution, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Justification as J;
    use Verdict as V;

    fn c(alpha: f64, beta: f64, rho: f64) -> PhaseLabel {
        classify(&DriftSpec { rho, alpha, beta }, None).unwrap()
    }

    #[test]
    fn table_examples() {
        assert_eq!(c(1.0, 1.0, 0.7), label(V::Transient, J::T1i));
        assert_eq!(c(1.0, 1.0, 0.3), label(V::Recurrent, J::T2i));
        assert_eq!(c(0.2, 0.5, 1.0), label(V::Transient, J::T1ii));
        assert_eq!(c(-0.5, 0.25, 1.0), label(V::OpenProblem, J::OpenLine));
        assert_eq!(c(2.0, 1.5, 0.5), label(V::Invalid, J::Prohibited));
        assert_eq!(c(-2.0, 0.0, 1.0), label(V::Recurrent, J::C2i));
    }

    #[test]
    fn diagonal_and_special_points() {
        assert_eq!(c(1.0, 1.0, 0.5).verdict, V::CriticalBoundary);
        assert_eq!(c(0.5, 0.5, 1.0), label(V::Transient, J::T3));
        assert_eq!(c(1.5, 1.5, 0.5), label(V::Recurrent, J::T4));
        assert_eq!(c(1.5, 1.5, 1.0).verdict, V::CriticalBoundary);
        assert_eq!(c(0.5, 0.5, 1.5), label(V::Invalid, J::RhoRange));
        assert_eq!(c(0.0, 0.0, 0.5).verdict, V::CriticalBoundary);
        assert_eq!(c(0.0, 0.5, 123.0), label(V::Recurrent, J::LilLine));
        assert_eq!(c(-0.5, 0.0, 1.0), label(V::Transient, J::C2ii));
        assert_eq!(c(0.5, 1.0, 1.0), label(V::Recurrent, J::T2ii));
        assert_eq!(c(0.5, 0.75, 1.0), label(V::OpenProblem, J::OpenLine));
    }

    #[test]
    fn lamperti_point_needs_ratio() {
        let spec = DriftSpec {
            rho: 1.0,
            alpha: -1.0,
            beta: 0.0,
        };
        assert_eq!(classify(&spec, None), Err(Error::MissingSecondMomentRatio));
        assert_eq!(classify(&spec, Some(0.6)).unwrap(), label(V::Transient, J::T5ii));
        assert_eq!(classify(&spec, Some(0.5)).unwrap(), label(V::Recurrent, J::T5i));
    }

    #[test]
    fn non_finite_input_is_invalid() {
        for (a, b, r) in [
            (f64::NAN, 0.5, 1.0),
            (0.0, f64::INFINITY, 1.0),
            (0.0, 0.5, f64::NAN),
            (f64::NEG_INFINITY, 0.0, 1.0),
        ] {
            assert_eq!(c(a, b, r).verdict, V::Invalid);
        }
    }

    #[test]
    fn small_grid_matches_pointwise() {
        let g = region_grid(Interval::new(-1.0, 0.0), Interval::new(0.0, 1.0), 2, 1.0).unwrap();
        assert_eq!(g.cells.len(), 4);
        for cell in &g.cells {
            let direct = classify(
                &DriftSpec {
                    rho: 1.0,
                    alpha: cell.alpha,
                    beta: cell.beta,
                },
                Some(1.0),
            )
            .unwrap();
            assert_eq!(cell.label, direct);
        }
        assert_eq!(g.cell(0, 0).label, label(V::Transient, J::T5ii));
        assert_eq!(g.cell(1, 1).label, label(V::Recurrent, J::T2ii));
    }

    #[test]
    fn grid_rejects_degenerate_input() {
        assert!(region_grid(Interval::new(0.0, 0.0), Interval::new(0.0, 1.0), 3, 1.0).is_err());
        assert!(region_grid(Interval::new(-1.0, 1.0), Interval::new(0.0, 1.0), 1, 1.0).is_err());
    }

    #[test]
    fn lil_point_sits_in_grid() {
        let g = region_grid(Interval::new(-1.0, 1.0), Interval::new(0.0, 1.0), 101, 1.0).unwrap();
        let cell = g.cell(50, 50);
        assert_eq!((cell.alpha, cell.beta), (0.0, 0.5));
        assert_eq!(cell.label, label(V::Recurrent, J::LilLine));
    }
}
