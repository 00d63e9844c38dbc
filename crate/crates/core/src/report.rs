//! CSV and JSON renderings with fixed headers.
//!
//! Floats use Rust's shortest round-trip `Display`, so equal values always
//! produce equal bytes.

use std::fmt::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::phase::PhaseGrid;
use crate::stats::{EstimateCI, HittingCurve};
use crate::urn::Census;

pub const PHASE_HEADER: &str = "alpha,beta,rho,verdict,justification";
pub const PROBE_COLUMNS: &str = "probe_estimate,probe_lo,probe_hi";
pub const HITTING_HEADER: &str = "level,point,lo,hi,n,capped_fraction";
pub const CENSUS_HEADER: &str = "replica,return_count,last_return_time,horizon";
pub const ESTIMATE_HEADER: &str = "experiment,parameter,value,point,lo,hi,n";

/// Phase grid rows; `probes`, when given, holds one estimate per cell.
pub fn phase_grid_csv(grid: &PhaseGrid, probes: Option<&[Option<EstimateCI>]>) -> String {
    let mut s = String::from(PHASE_HEADER);
    if probes.is_some() {
        s.push(',');
        s.push_str(PROBE_COLUMNS);
    }
    s.push('\n');
    for (i, c) in grid.cells.iter().enumerate() {
        let _ = write!(
            s,
            "{},{},{},{},{}",
            c.alpha,
            c.beta,
            c.rho,
            c.label.verdict.as_str(),
            c.label.justification.as_str()
        );
        if let Some(p) = probes {
            match p.get(i).copied().flatten() {
                Some(e) => {
                    let _ = write!(s, ",{},{},{}", e.point, e.lo, e.hi);
                }
                None => s.push_str(",,,"),
            }
        }
        s.push('\n');
    }
    s
}

pub fn hitting_curve_csv(curve: &HittingCurve) -> String {
    let mut s = format!("{HITTING_HEADER}\n");
    for ((level, e), cf) in curve.levels.iter().zip(&curve.estimates).zip(&curve.capped_fraction) {
        let _ = writeln!(s, "{},{},{},{},{},{}", level, e.point, e.lo, e.hi, e.n, cf);
    }
    s
}

/// One row per replica and horizon; an empty last-return field means no
/// return.
pub fn census_csv(census: &Census) -> String {
    let mut s = format!("{CENSUS_HEADER}\n");
    for h in 0..census.horizons.len() {
        for r in &census.records {
            let t = &r.tallies[h];
            let last = t.last_return_time.map(|l| l.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{}", r.replica, t.return_count, last, t.horizon);
        }
    }
    s
}

/// A labelled estimate row for experiment summaries.
pub struct EstimateRow<'a> {
    pub experiment: &'a str,
    pub parameter: &'a str,
    pub value: f64,
    pub estimate: EstimateCI,
}

pub fn estimates_csv(rows: &[EstimateRow]) -> String {
    let mut s = format!("{ESTIMATE_HEADER}\n");
    for r in rows {
        let e = r.estimate;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.experiment, r.parameter, r.value, e.point, e.lo, e.hi, e.n
        );
    }
    s
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Serialize(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{region_grid, Interval};
    use crate::stats::wilson;

    #[test]
    fn phase_csv_shape() {
        let g = region_grid(Interval::new(0.0, 1.0), Interval::new(0.0, 1.0), 2, 0.3).unwrap();
        let csv = phase_grid_csv(&g, None);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], PHASE_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 5));
        let probes = vec![Some(wilson(1, 2, 1.96)), None, None, None];
        let with = phase_grid_csv(&g, Some(&probes));
        assert!(with.lines().next().unwrap().ends_with(PROBE_COLUMNS));
        assert!(with.lines().all(|l| l.split(',').count() == 8));
    }

    #[test]
    fn floats_round_trip() {
        let v = 0.1 + 0.2;
        let e = EstimateCI {
            point: v,
            lo: v,
            hi: v,
            n: 1,
            method: crate::stats::CiMethod::Normal,
        };
        let csv = estimates_csv(&[EstimateRow {
            experiment: "x",
            parameter: "p",
            value: v,
            estimate: e,
        }]);
        let field: f64 = csv.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(field, v);
    }
}
