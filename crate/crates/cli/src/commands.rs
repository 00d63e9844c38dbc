//! Subcommand dispatch: config in, buffered outputs out.

use std::collections::BTreeMap;

use clap::ValueEnum;
use serde::Serialize;

use driftlab::engine::{simulate, try_replicate, ReplicaPlan, DEFAULT_CAP};
use driftlab::lyapunov::{verify_region, Functional, Region, Sign};
use driftlab::phase::{classify, region_grid, Interval, PhaseLabel, Verdict};
use driftlab::report::{census_csv, estimates_csv, hitting_curve_csv, phase_grid_csv, to_json, EstimateRow};
use driftlab::stats::{doob_tail, exit_bound_check, growth_exponent, hitting_curve, lil_crossing, EstimateCI};
use driftlab::urn::{coupled_walk, run_urn, urn_rho, zero_return_census_multi, CouplingRecord, UrnSpec};
use driftlab::{rng, DriftSpec, Kernel, Variant};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::manifest::Outputs;
use crate::svg;

/// Upper bound on per-cell probe replicas in a sweep.
pub const MAX_PROBE_REPLICAS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    Classify,
    Simulate,
    Verify,
    Sweep,
    Urn,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Classify => "classify",
            Subcommand::Simulate => "simulate",
            Subcommand::Verify => "verify",
            Subcommand::Sweep => "sweep",
            Subcommand::Urn => "urn",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::value_variants().iter().copied().find(|s| s.name() == name)
    }
}

pub struct Context {
    pub seed: u64,
    pub threads: usize,
    pub svg: bool,
}

#[derive(Default)]
pub struct RunResult {
    pub outputs: Outputs,
    pub exclusions: BTreeMap<String, u64>,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
    /// Set when a `verify` run completed but the sign check failed.
    pub failure: Option<String>,
}

pub fn run(sub: Subcommand, cfg: &Config, ctx: &Context) -> Result<RunResult> {
    match sub {
        Subcommand::Classify => run_classify(cfg),
        Subcommand::Simulate => run_simulate(cfg, ctx),
        Subcommand::Verify => run_verify(cfg, ctx),
        Subcommand::Sweep => run_sweep(cfg, ctx),
        Subcommand::Urn => run_urn_cmd(cfg, ctx),
    }
}

const KERNEL_LATTICE: &[&str] = &["variant", "rho", "alpha", "beta", "a", "t0"];
const KERNEL_CONST: &[&str] = &["variant", "c", "n", "a", "t0"];

fn variant_name(cfg: &Config) -> &str {
    cfg.str("variant").unwrap_or("LatticeNN")
}

fn kernel_keys(cfg: &Config) -> Result<&'static [&'static str]> {
    match variant_name(cfg) {
        "LatticeNN" | "LazyLattice" => Ok(KERNEL_LATTICE),
        "ConstDriftTest" => Ok(KERNEL_CONST),
        v => Err(CliError::Config(format!(
            "unknown variant `{v}`; expected LatticeNN, LazyLattice or ConstDriftTest"
        ))),
    }
}

fn check(cfg: &Config, context: &str, groups: &[&[&str]]) -> Result<()> {
    let allowed: Vec<&str> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    cfg.check_keys(context, &allowed)
}

/// Kernel from config; its time origin is also where walks start.
fn build_kernel(cfg: &Config) -> Result<Kernel> {
    let a = cfg.or("a", 1.0)?;
    let kernel = match variant_name(cfg) {
        "ConstDriftTest" => Kernel::const_drift(cfg.require("c")?, cfg.require("n")?, a)?,
        name => {
            let spec = DriftSpec::new(cfg.require("rho")?, cfg.require("alpha")?, cfg.require("beta")?)?;
            let variant = if name == "LazyLattice" {
                Variant::LazyLattice
            } else {
                Variant::LatticeNN
            };
            Kernel::new(spec, a, variant)?
        }
    };
    Ok(kernel.with_t0(cfg.or("t0", 100)?)?)
}

fn default_x0(a: f64) -> f64 {
    a.ceil() + 1.0
}

#[derive(Serialize)]
struct ClassifyOutput {
    alpha: f64,
    beta: f64,
    rho: f64,
    #[serde(flatten)]
    label: PhaseLabel,
}

fn run_classify(cfg: &Config) -> Result<RunResult> {
    cfg.check_keys("classify", &["rho", "alpha", "beta", "second_moment_ratio"])?;
    let spec = DriftSpec::new(cfg.require("rho")?, cfg.require("alpha")?, cfg.require("beta")?)?;
    let label = classify(&spec, cfg.get("second_moment_ratio")?)?;
    let json = to_json(&ClassifyOutput {
        alpha: spec.alpha,
        beta: spec.beta,
        rho: spec.rho,
        label,
    })?;
    let mut r = RunResult::default();
    r.summary.push(json.clone());
    r.outputs.add("classify.json", json + "\n");
    Ok(r)
}

#[derive(Serialize)]
struct TrajectorySummary {
    replica: u64,
    seed: u64,
    final_point: (u64, f64),
    sup_ratio: f64,
    min_x: f64,
    clamp_hits: u64,
}

fn run_simulate(cfg: &Config, ctx: &Context) -> Result<RunResult> {
    let kind = cfg
        .str("kind")
        .ok_or_else(|| CliError::Config("missing required key `kind`".into()))?;
    let common: &[&str] = &["kind", "x0", "replicas"];
    match kind {
        "exit_bound" => check(
            cfg,
            "simulate kind exit_bound",
            &[&["kind", "c", "B2", "gamma", "a", "n", "replicas", "cap"]],
        )?,
        "trajectory" | "growth" => check(cfg, "simulate", &[kernel_keys(cfg)?, common, &["horizon"]])?,
        "hitting" => check(
            cfg,
            "simulate kind hitting",
            &[kernel_keys(cfg)?, common, &["levels", "cap"]],
        )?,
        "lil" => check(
            cfg,
            "simulate kind lil",
            &[kernel_keys(cfg)?, common, &["threshold", "horizons"]],
        )?,
        "doob" => check(
            cfg,
            "simulate kind doob",
            &[kernel_keys(cfg)?, common, &["scale", "h", "b"]],
        )?,
        k => {
            return Err(CliError::Config(format!(
                "unknown simulate kind `{k}`; expected trajectory, hitting, lil, doob, exit_bound or growth"
            )))
        }
    }
    let mut r = RunResult::default();
    let threads = ctx.threads;

    if kind == "exit_bound" {
        let n: u64 = cfg.require("n")?;
        let plan = ReplicaPlan::new(ctx.seed, cfg.or("replicas", 1000)?);
        let gamma: f64 = cfg.require("gamma")?;
        let check = exit_bound_check(
            cfg.require("c")?,
            cfg.require("B2")?,
            gamma,
            cfg.or("a", 1.0)?,
            n,
            &plan,
            cfg.or("cap", DEFAULT_CAP)?,
            threads,
        )?;
        r.exclusions.insert("capped".into(), check.capped);
        r.summary.push(format!(
            "P(exit low) = {} [{}, {}], nu = {}, k = {}, passed = {}",
            check.estimate.point, check.estimate.lo, check.estimate.hi, check.nu, check.k, check.passed
        ));
        let row = EstimateRow {
            experiment: "exit_bound",
            parameter: "gamma",
            value: gamma,
            estimate: check.estimate,
        };
        r.outputs.add("estimates.csv", estimates_csv(&[row]));
        r.outputs.add("result.json", to_json(&check)? + "\n");
        return Ok(r);
    }

    let kernel = build_kernel(cfg)?;
    let x0 = cfg.or("x0", default_x0(kernel.a))?;
    let t0 = kernel.t0;
    match kind {
        "trajectory" => {
            let plan = ReplicaPlan::new(ctx.seed, cfg.or("replicas", 1)?);
            let horizon = cfg.require("horizon")?;
            let set = try_replicate(&plan, threads, |_, seed| simulate(&kernel, x0, t0, horizon, seed))?;
            let mut summaries = Vec::with_capacity(set.len());
            for (i, tr) in set.records() {
                r.outputs.add(format!("trajectory_{i:04}.csv"), tr.to_text());
                summaries.push(TrajectorySummary {
                    replica: *i,
                    seed: tr.seed,
                    final_point: tr.final_point,
                    sup_ratio: tr.sup_ratio,
                    min_x: tr.min_x,
                    clamp_hits: tr.clamp_hits,
                });
            }
            r.summary
                .push(format!("{} trajectories to t = {}", summaries.len(), t0 + horizon));
            r.outputs.add("result.json", to_json(&summaries)? + "\n");
        }
        "growth" => {
            let plan = ReplicaPlan::new(ctx.seed, cfg.or("replicas", 1000)?);
            let horizon: u64 = cfg.require("horizon")?;
            let trs = try_replicate(&plan, threads, |_, seed| simulate(&kernel, x0, t0, horizon, seed))?.into_values();
            let fit = growth_exponent(&trs)?;
            r.exclusions.insert("excluded".into(), fit.excluded);
            r.summary.push(format!(
                "growth exponent {} [{}, {}] from {} paths, {} excluded",
                fit.estimate.point, fit.estimate.lo, fit.estimate.hi, fit.fitted, fit.excluded
            ));
            let row = EstimateRow {
                experiment: "growth",
                parameter: "horizon",
                value: horizon as f64,
                estimate: fit.estimate,
            };
            r.outputs.add("estimates.csv", estimates_csv(&[row]));
            r.outputs.add("result.json", to_json(&fit)? + "\n");
        }
        "hitting" => {
            let plan = ReplicaPlan::new(ctx.seed, cfg.or("replicas", 1000)?);
            let levels: Vec<f64> = cfg.list("levels")?;
            let curve = hitting_curve(
                &kernel,
                kernel.a,
                &levels,
                x0,
                t0,
                &plan,
                cfg.or("cap", DEFAULT_CAP)?,
                threads,
            )?;
            let worst = curve.capped_fraction.iter().fold(0.0f64, |m, &f| m.max(f));
            r.exclusions
                .insert("capped".into(), (worst * plan.replicas as f64).round() as u64);
            for (l, e) in curve.levels.iter().zip(&curve.estimates) {
                r.summary.push(format!("level {l}: {} [{}, {}]", e.point, e.lo, e.hi));
            }
            if curve.unreliable {
                r.summary
                    .push("warning: more than 1% of replicas hit the step cap".into());
            }
            r.outputs.add("hitting_curve.csv", hitting_curve_csv(&curve));
            r.outputs.add("result.json", to_json(&curve)? + "\n");
        }
        "lil" => {
            let plan = ReplicaPlan::new(ctx.seed, cfg.or("replicas", 1000)?);
            let horizons: Vec<u64> = cfg.list("horizons")?;
            let est = lil_crossing(&kernel, cfg.require("threshold")?, &horizons, x0, t0, &plan, threads)?;
            let rows: Vec<EstimateRow> = horizons
                .iter()
                .zip(&est)
                .map(|(&h, &e)| EstimateRow {
                    experiment: "lil",
                    parameter: "horizon",
                    value: h as f64,
                    estimate: e,
                })
                .collect();
            for row in &rows {
                r.summary.push(format!(
                    "T = {}: {} [{}, {}]",
                    row.value, row.estimate.point, row.estimate.lo, row.estimate.hi
                ));
            }
            r.outputs.add("estimates.csv", estimates_csv(&rows));
        }
        "doob" => {
            let plan = ReplicaPlan::new(ctx.seed, cfg.or("replicas", 1000)?);
            let h: f64 = cfg.require("h")?;
            let tail = doob_tail(
                &kernel,
                cfg.require("scale")?,
                h,
                cfg.require("b")?,
                x0,
                t0,
                &plan,
                threads,
            )?;
            r.summary.push(format!(
                "tail {} [{}, {}] vs bound {}",
                tail.estimate.point, tail.estimate.lo, tail.estimate.hi, tail.bound
            ));
            let row = EstimateRow {
                experiment: "doob",
                parameter: "h",
                value: h,
                estimate: tail.estimate,
            };
            r.outputs.add("estimates.csv", estimates_csv(&[row]));
            r.outputs.add("result.json", to_json(&tail)? + "\n");
        }
        _ => unreachable!("kind checked above"),
    }
    Ok(r)
}

const REGION_KEYS: &[&str] = &[
    "x_min",
    "x_max",
    "x_stride",
    "t_min",
    "t_max",
    "t_stride",
    "ratio_min",
    "ratio_max",
    "t_per_x_min",
    "clamp_free",
];

fn functional(cfg: &Config) -> Result<(Functional, &'static [&'static str], Sign)> {
    let name = cfg
        .str("functional")
        .ok_or_else(|| CliError::Config("missing required key `functional`".into()))?;
    Ok(match name {
        "TransienceY" => (Functional::TransienceY, &[], Sign::NonPositive),
        "RecurrenceY" => (Functional::RecurrenceY, &[], Sign::NonPositive),
        "FractionalW" => (
            Functional::FractionalW { nu: cfg.require("nu")? },
            &["nu"],
            Sign::NonPositive,
        ),
        "ScaledX" => (
            Functional::ScaledX {
                zeta: cfg.require("zeta")?,
            },
            &["zeta"],
            Sign::NonPositive,
        ),
        "ExitPower" => (
            Functional::ExitPower {
                k: cfg.require("k")?,
                n: cfg.require("level")?,
            },
            &["k", "level"],
            Sign::NonNegative,
        ),
        f => {
            return Err(CliError::Config(format!(
                "unknown functional `{f}`; expected TransienceY, RecurrenceY, FractionalW, ExitPower or ScaledX"
            )))
        }
    })
}

fn run_verify(cfg: &Config, ctx: &Context) -> Result<RunResult> {
    let (f, extra, default_sign) = functional(cfg)?;
    check(
        cfg,
        "verify",
        &[kernel_keys(cfg)?, REGION_KEYS, extra, &["functional", "want"]],
    )?;
    f.validate()?;
    let want = match cfg.str("want") {
        None => default_sign,
        Some("nonpositive") => Sign::NonPositive,
        Some("nonnegative") => Sign::NonNegative,
        Some(v) => {
            return Err(CliError::Config(format!(
                "`want` must be nonpositive or nonnegative, got `{v}`"
            )))
        }
    };
    let kernel = build_kernel(cfg)?;
    let region = Region {
        x_min: cfg.require("x_min")?,
        x_max: cfg.require("x_max")?,
        x_stride: cfg.or("x_stride", 1)?,
        t_min: cfg.require("t_min")?,
        t_max: cfg.require("t_max")?,
        t_stride: cfg.or("t_stride", 1)?,
        ratio_min: cfg.get("ratio_min")?,
        ratio_max: cfg.get("ratio_max")?,
        t_per_x_min: cfg.get("t_per_x_min")?,
        clamp_free: cfg.flag("clamp_free")?,
    };
    let report = verify_region(&f, &kernel, &region, want, ctx.threads)?;
    let mut r = RunResult::default();
    r.summary.push(format!(
        "{}: {} points, {} violations, drift in [{}, {}]",
        f.name(),
        report.points_checked,
        report.violations.len(),
        report.min_drift,
        report.max_drift
    ));
    if !report.passed() {
        r.failure = Some(format!(
            "{} of {} points violate the wanted sign",
            report.violations.len(),
            report.points_checked
        ));
    }
    r.outputs.add("region_report.json", to_json(&report)? + "\n");
    Ok(r)
}

const SWEEP_KEYS: &[&str] = &["rho", "alpha_min", "alpha_max", "beta_min", "beta_max", "resolution"];
const PROBE_KEYS: &[&str] = &["probe_replicas", "probe_level", "probe_a", "probe_x0", "probe_cap"];

fn run_sweep(cfg: &Config, ctx: &Context) -> Result<RunResult> {
    let probing = cfg.str("probe_replicas").is_some();
    if probing {
        check(cfg, "sweep", &[SWEEP_KEYS, PROBE_KEYS])?;
    } else {
        cfg.check_keys("sweep without probe_replicas", SWEEP_KEYS)?;
    }
    let rho: f64 = cfg.require("rho")?;
    let grid = region_grid(
        Interval::new(cfg.or("alpha_min", -1.0)?, cfg.or("alpha_max", 1.0)?),
        Interval::new(cfg.or("beta_min", 0.0)?, cfg.or("beta_max", 1.0)?),
        cfg.or("resolution", 101)?,
        rho,
    )?;
    let mut r = RunResult::default();
    let probes = if probing {
        let replicas: u64 = cfg.require("probe_replicas")?;
        if replicas == 0 || replicas > MAX_PROBE_REPLICAS {
            return Err(CliError::Config(format!(
                "probe_replicas must be in 1..={MAX_PROBE_REPLICAS}, got {replicas}"
            )));
        }
        let a: f64 = cfg.or("probe_a", 1.0)?;
        let level: f64 = cfg.or("probe_level", 64.0)?;
        let x0: f64 = cfg.or("probe_x0", default_x0(a))?;
        let cap: u64 = cfg.or("probe_cap", 1_000_000)?;
        let mut probes: Vec<Option<EstimateCI>> = Vec::with_capacity(grid.cells.len());
        let mut capped = 0u64;
        for (i, c) in grid.cells.iter().enumerate() {
            if c.label.verdict == Verdict::Invalid {
                probes.push(None);
                continue;
            }
            let kernel = Kernel::lattice(c.rho, c.alpha, c.beta, a)?.with_t0(100)?;
            let plan = ReplicaPlan::new(rng::split(ctx.seed, i as u64), replicas);
            let curve = hitting_curve(&kernel, a, &[level], x0, kernel.t0, &plan, cap, ctx.threads)?;
            capped += (curve.capped_fraction[0] * replicas as f64).round() as u64;
            probes.push(Some(curve.estimates[0]));
        }
        r.exclusions.insert("probe_capped".into(), capped);
        Some(probes)
    } else {
        None
    };
    let mut counts = BTreeMap::new();
    for c in &grid.cells {
        *counts.entry(c.label.verdict.as_str()).or_insert(0u64) += 1;
    }
    for (v, n) in counts {
        r.summary.push(format!("{v}: {n} cells"));
    }
    r.outputs
        .add("phase_grid.csv", phase_grid_csv(&grid, probes.as_deref()));
    if ctx.svg {
        r.outputs.add("phase_grid.svg", svg::heatmap(&grid));
    }
    Ok(r)
}

#[derive(Serialize)]
struct CensusSummary {
    rho: f64,
    replicas: u64,
    horizons: Vec<u64>,
    mean_return_count: Vec<f64>,
}

#[derive(Serialize)]
struct CouplingOutput {
    rho: f64,
    draws: u64,
    record: CouplingRecord,
}

fn run_urn_cmd(cfg: &Config, ctx: &Context) -> Result<RunResult> {
    let urn_keys: &[&str] = &["kind", "sigma", "a_law", "W0", "B0"];
    let kind = cfg.str("kind").unwrap_or("census");
    match kind {
        "census" => check(cfg, "urn kind census", &[urn_keys, &["horizons", "replicas"]])?,
        "coupling" => check(cfg, "urn kind coupling", &[urn_keys, &["draws"]])?,
        k => {
            return Err(CliError::Config(format!(
                "unknown urn kind `{k}`; expected census or coupling"
            )))
        }
    }
    let spec = UrnSpec::new(
        cfg.require("sigma")?,
        cfg.law("a_law")?,
        cfg.require("W0")?,
        cfg.require("B0")?,
    )?;
    let rho = urn_rho(&spec);
    let mut r = RunResult::default();
    if kind == "census" {
        let plan = ReplicaPlan::new(ctx.seed, cfg.or("replicas", 1000)?);
        let horizons: Vec<u64> = cfg.list("horizons")?;
        let census = zero_return_census_multi(&spec, &horizons, &plan, ctx.threads)?;
        let means: Vec<f64> = (0..census.horizons.len())
            .map(|h| census.mean_return_count(h))
            .collect();
        for (h, m) in census.horizons.iter().zip(&means) {
            r.summary.push(format!("rho = {rho}, horizon {h}: mean returns {m}"));
        }
        r.outputs.add("census.csv", census_csv(&census));
        let summary = CensusSummary {
            rho,
            replicas: plan.replicas,
            horizons: census.horizons.clone(),
            mean_return_count: means,
        };
        r.outputs.add("result.json", to_json(&summary)? + "\n");
    } else {
        let draws: u64 = cfg.require("draws")?;
        let path = run_urn(&spec, draws, ctx.seed)?;
        let (walk, record) = coupled_walk(&spec, &path)?;
        let mut text = String::from("t,x\n");
        for (s, x) in path.iter().zip(&walk) {
            text.push_str(&format!("{},{}\n", s.t, x));
        }
        r.summary.push(format!(
            "rho = {rho}, final X = {}, drift residual {}",
            record.x, record.drift_identity_residual
        ));
        r.outputs.add("coupled_walk.csv", text);
        r.outputs
            .add("coupling.json", to_json(&CouplingOutput { rho, draws, record })? + "\n");
    }
    Ok(r)
}
