use std::path::{Path, PathBuf};

use frog_core::classifier::{classify_with_facts, SpecFacts};
use frog_core::exact::{
    bound_check, bound_check_site, brute_force_reach, reach_prob, ExactError, ReachTable, WalkLaw,
    ENUMERATION_LIMIT,
};
use frog_core::montecarlo::{
    estimate_activation_profile, estimate_survival, SimConfig, SimError, SimResult,
};
use frog_core::{classify, ExtendedNat, Outcome, ProcessParams};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{runtime, Format, Table};
use crate::CliError;

/// What a subcommand hands back to `main` for printing and recording.
pub struct Report {
    pub stdout: String,
    pub config: Value,
    pub result: Value,
    pub exit: u8,
}

#[derive(Serialize)]
struct PhaseRow {
    #[serde(rename = "N")]
    n: u32,
    #[serde(rename = "L")]
    l: u32,
    outcome: Outcome,
    m: ExtendedNat,
    b: u64,
    #[serde(rename = "L0")]
    l0: ExtendedNat,
    #[serde(rename = "L1")]
    l1: ExtendedNat,
    min_e: f64,
    min_f: u64,
    n0: Option<u64>,
}

const PHASE_HEADER: &[&str] = &[
    "N", "L", "outcome", "m", "b", "L0", "L1", "min_e", "min_f", "n0",
];

fn phase_row(params: &ProcessParams, facts: &SpecFacts) -> PhaseRow {
    let v = classify_with_facts(params, facts);
    PhaseRow {
        n: params.particles,
        l: params.lifetime,
        outcome: v.outcome,
        m: v.values.m,
        b: v.values.b,
        l0: v.values.l0,
        l1: v.values.l1,
        min_e: v.values.min_exponent.power,
        min_f: v.values.min_exponent.log,
        n0: v.threshold.map(|t| t.n0),
    }
}

pub fn classify_cmd(params: ProcessParams, format: Format) -> Result<Report, CliError> {
    let verdict = classify(&params);
    let result = serde_json::to_value(&verdict).map_err(runtime)?;
    let stdout = match format {
        Format::Jsonl => format!("{result}\n"),
        Format::Csv => Table {
            header: PHASE_HEADER,
            rows: vec![phase_row(&params, &SpecFacts::compute(&params.spec))],
        }
        .render(Format::Csv)?,
    };
    let exit = match verdict.outcome {
        Outcome::Boundary | Outcome::Unknown => 3,
        _ => 0,
    };
    Ok(Report {
        stdout,
        config: serde_json::to_value(&params).map_err(runtime)?,
        result,
        exit,
    })
}

pub fn exact_cmd(params: ProcessParams, blocks: u64, format: Format) -> Result<Report, CliError> {
    let table = ReachTable::build(&params.spec, params.particles, params.lifetime, blocks)
        .map_err(exact_error)?;
    let rows = Table {
        header: &["n", "a_n", "lower", "upper", "partial_product"],
        rows: table.rows,
    };
    Ok(Report {
        stdout: rows.render(format)?,
        config: json!({ "params": params, "blocks": blocks }),
        result: rows.to_value(),
        exit: 0,
    })
}

#[derive(Serialize)]
struct SimRow {
    #[serde(rename = "N")]
    n: u32,
    #[serde(rename = "L")]
    l: u32,
    #[serde(rename = "M")]
    m: u64,
    trials: u64,
    seed: u64,
    ci_level: f64,
    survivals: u64,
    p_hat: f64,
    ci_low: f64,
    ci_high: f64,
    mean_max_site: f64,
}

#[derive(Serialize)]
struct SimRecord<'a> {
    config: &'a SimConfig,
    survivals: u64,
    p_hat: f64,
    ci_low: f64,
    ci_high: f64,
    mean_max_site: f64,
}

fn mean_max_site(r: &SimResult) -> f64 {
    r.max_sites.iter().map(|&s| s as f64).sum::<f64>() / r.max_sites.len() as f64
}

pub struct SimulateArgs {
    pub horizons: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
    pub ci_level: f64,
    pub profile: Option<PathBuf>,
}

pub fn simulate_cmd(
    params: ProcessParams,
    args: SimulateArgs,
    format: Format,
) -> Result<Report, CliError> {
    if args.horizons.is_empty() {
        return Err(CliError::Malformed(
            "at least one horizon is required".into(),
        ));
    }
    let configs: Vec<SimConfig> = args
        .horizons
        .iter()
        .map(|&m| SimConfig {
            ci_level: args.ci_level,
            ..SimConfig::new(params.clone(), m, args.trials, args.seed)
        })
        .collect();
    let results = configs
        .iter()
        .map(|cfg| estimate_survival(cfg).map_err(sim_error))
        .collect::<Result<Vec<_>, _>>()?;

    if let Some(path) = &args.profile {
        let widest = configs.iter().max_by_key(|c| c.horizon).unwrap();
        write_profile(path, widest)?;
    }

    let stdout = match format {
        Format::Jsonl => Table {
            header: &[],
            rows: results
                .iter()
                .map(|r| SimRecord {
                    config: &r.config,
                    survivals: r.survivals,
                    p_hat: r.p_hat,
                    ci_low: r.ci.0,
                    ci_high: r.ci.1,
                    mean_max_site: mean_max_site(r),
                })
                .collect(),
        }
        .render(format)?,
        Format::Csv => Table {
            header: &[
                "N",
                "L",
                "M",
                "trials",
                "seed",
                "ci_level",
                "survivals",
                "p_hat",
                "ci_low",
                "ci_high",
                "mean_max_site",
            ],
            rows: results
                .iter()
                .map(|r| SimRow {
                    n: params.particles,
                    l: params.lifetime,
                    m: r.config.horizon,
                    trials: r.config.trials,
                    seed: r.config.seed,
                    ci_level: r.config.ci_level,
                    survivals: r.survivals,
                    p_hat: r.p_hat,
                    ci_low: r.ci.0,
                    ci_high: r.ci.1,
                    mean_max_site: mean_max_site(r),
                })
                .collect(),
        }
        .render(format)?,
    };
    let result: Vec<Value> = results
        .iter()
        .map(|r| {
            json!({
                "M": r.config.horizon,
                "survivals": r.survivals,
                "p_hat": r.p_hat,
                "ci": [r.ci.0, r.ci.1],
            })
        })
        .collect();
    Ok(Report {
        stdout,
        config: json!({
            "params": params,
            "horizons": args.horizons,
            "trials": args.trials,
            "ci_level": args.ci_level,
        }),
        result: Value::Array(result),
        exit: 0,
    })
}

fn write_profile(path: &Path, cfg: &SimConfig) -> Result<(), CliError> {
    let profile = estimate_activation_profile(cfg).map_err(sim_error)?;
    let mut wtr = csv::Writer::from_path(path).map_err(runtime)?;
    wtr.write_record(["site", "p_hat_Ei", "lower_bound_curve"])
        .map_err(runtime)?;
    for row in profile.rows {
        let lb = row.lower_bound.map(|v| v.to_string()).unwrap_or_default();
        wtr.write_record([row.site.to_string(), row.p_hat.to_string(), lb])
            .map_err(runtime)?;
    }
    wtr.flush().map_err(runtime)
}

pub fn sweep_cmd(
    params: ProcessParams,
    n_range: (u32, u32),
    l_range: (u32, u32),
    format: Format,
) -> Result<Report, CliError> {
    let facts = SpecFacts::compute(&params.spec);
    let grid: Vec<(u32, u32)> = (n_range.0..=n_range.1)
        .flat_map(|n| (l_range.0..=l_range.1).map(move |l| (n, l)))
        .collect();
    let rows: Vec<PhaseRow> = grid
        .par_iter()
        .map(|&(n, l)| {
            let p = ProcessParams::new(n, l, params.spec.clone())
                .map_err(|e| CliError::Malformed(e.to_string()))?;
            Ok(phase_row(&p, &facts))
        })
        .collect::<Result<_, CliError>>()?;
    let table = Table {
        header: PHASE_HEADER,
        rows,
    };
    Ok(Report {
        stdout: table.render(format)?,
        config: json!({
            "spec": params.spec,
            "n_range": [n_range.0, n_range.1],
            "l_range": [l_range.0, l_range.1],
        }),
        result: table.to_value(),
        exit: 0,
    })
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub oracle_cases: u64,
    pub oracle_max_error: f64,
    pub sandwich_cases: u64,
    pub block_cases: u64,
    pub violations: Vec<String>,
    pub passed: bool,
}

const SANDWICH_Q: [f64; 12] = [
    0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99,
];

pub fn verify_cmd(
    params: Option<ProcessParams>,
    oracle_max_l: u32,
    blocks: u64,
    format: Format,
) -> Result<Report, CliError> {
    let max_l = params
        .as_ref()
        .map_or(oracle_max_l, |p| p.lifetime.max(oracle_max_l));
    if max_l > ENUMERATION_LIMIT {
        return Err(CliError::Invalid(format!(
            "oracle lifetime {max_l} exceeds the enumeration limit {ENUMERATION_LIMIT}"
        )));
    }
    let mut violations = Vec::new();

    let oracle: Vec<(u64, f64, Vec<String>)> = (1..=9u32)
        .into_par_iter()
        .map(|i| {
            let p = i as f64 / 10.0;
            let mut cases = 0;
            let mut worst = 0.0f64;
            let mut bad = Vec::new();
            for l in 1..=max_l {
                let law = WalkLaw::new(p, l).expect("p in (0,1)");
                for d in 1..=l {
                    let dp = reach_prob(&law, d).expect("d >= 1");
                    let bf = brute_force_reach(&law, d).expect("L within limit");
                    let err = (dp - bf).abs();
                    worst = worst.max(err);
                    cases += 1;
                    if err > 1e-12 {
                        bad.push(format!("oracle p={p} L={l} d={d}: dp={dp:e} enum={bf:e}"));
                    }
                }
            }
            (cases, worst, bad)
        })
        .collect();
    let oracle_cases = oracle.iter().map(|o| o.0).sum();
    let oracle_max_error = oracle.iter().map(|o| o.1).fold(0.0, f64::max);
    violations.extend(oracle.into_iter().flat_map(|o| o.2));

    let mut sandwich_cases = 0;
    for &q in &SANDWICH_Q {
        for n in 1..=4 {
            for l in 1..=8 {
                for j in 1..=l {
                    sandwich_cases += 1;
                    if let Err(e) = bound_check_site(q, n, l, j) {
                        violations.push(format!("sandwich q={q} N={n} L={l} j={j}: {e}"));
                    }
                }
            }
        }
    }

    let mut block_cases = 0;
    if let Some(p) = &params {
        for n in 0..blocks {
            block_cases += p.lifetime as u64;
            match bound_check(&p.spec, p.particles, p.lifetime, n) {
                Ok(_) => {}
                Err(e @ ExactError::BoundViolation { .. }) => violations.push(format!(
                    "block N={} L={} n={n}: {e}",
                    p.particles, p.lifetime
                )),
                Err(e) => return Err(exact_error(e)),
            }
        }
    }

    let report = VerifyReport {
        oracle_cases,
        oracle_max_error,
        sandwich_cases,
        block_cases,
        passed: violations.is_empty(),
        violations,
    };
    let result = serde_json::to_value(&report).map_err(runtime)?;
    let stdout = match format {
        Format::Jsonl => format!("{result}\n"),
        Format::Csv => Table {
            header: &[
                "oracle_cases",
                "oracle_max_error",
                "sandwich_cases",
                "block_cases",
                "violations",
                "passed",
            ],
            rows: vec![(
                report.oracle_cases,
                report.oracle_max_error,
                report.sandwich_cases,
                report.block_cases,
                report.violations.len(),
                report.passed,
            )],
        }
        .render(format)?,
    };
    let exit = if report.passed { 0 } else { 4 };
    if !report.passed {
        for v in &report.violations {
            eprintln!("{v}");
        }
    }
    Ok(Report {
        stdout,
        config: json!({
            "params": params,
            "oracle_max_l": max_l,
            "blocks": blocks,
        }),
        result,
        exit,
    })
}

fn exact_error(e: ExactError) -> CliError {
    match e {
        ExactError::TooLarge(_) | ExactError::OutOfRange { .. } => CliError::Invalid(e.to_string()),
        _ => CliError::Runtime(e.to_string()),
    }
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::Exact(e) => exact_error(e),
        SimError::BadProbability { .. } | SimError::ResourceLimit { .. } => {
            CliError::Invalid(e.to_string())
        }
        SimError::HorizonTooSmall { .. } | SimError::NoTrials | SimError::BadLevel(_) => {
            CliError::Malformed(e.to_string())
        }
    }
}
