//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use frog_core::classifier::{evaluate_rules, Rule, SpecFacts};
use frog_core::exact::{bound_check_site, extinction_threshold, reach_prob, ExactError, WalkLaw};
use frog_core::montecarlo::{
    estimate_activation_profile, estimate_survival, simulate_trial, wilson_interval, SimConfig,
};
use frog_core::{
    classify, ExtendedNat, Outcome, PrimitiveForm, ProcessParams, SequenceSpec, SparseOverride,
};

type Criterion = (&'static str, fn() -> Check);

struct Check {
    pass: bool,
    detail: String,
}

impl Check {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Check {
            pass,
            detail: detail.into(),
        }
    }
}

fn params(n: u32, l: u32, spec: &SequenceSpec) -> ProcessParams {
    ProcessParams::new(n, l, spec.clone()).unwrap()
}

fn single(form: PrimitiveForm) -> SequenceSpec {
    SequenceSpec::single(form).unwrap()
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let m = 2000u64;
    let spec = single(PrimitiveForm::power_with(1.0, 2.0, 1));
    let cfg = SimConfig::new(params(1, 1, &spec), m, 100_000, 2024);
    let r = estimate_survival(&cfg).unwrap();
    let elapsed = start.elapsed();
    let closed = (m + 1) as f64 / (2 * m) as f64;
    let product: f64 = (2..=m).map(|k| 1.0 - 1.0 / (k * k) as f64).product();
    let err = (r.p_hat - closed).abs();
    Check::new(
        err <= 0.01 && (product - closed).abs() < 1e-12 && elapsed < Duration::from_secs(60),
        format!(
            "p_hat={:.5} exact={closed:.5} |diff|={err:.5} time={}",
            r.p_hat,
            secs(elapsed)
        ),
    )
}

/// Running maximum over all 2^L paths, bit k of the mask is step k (1 = right).
fn enumerate_reach(p: f64, steps: u32, d: u32) -> f64 {
    let mut total = 0.0;
    for mask in 0u32..(1 << steps) {
        let (mut pos, mut max, mut w) = (0i64, 0i64, 1.0);
        for k in 0..steps {
            if mask >> k & 1 == 1 {
                pos += 1;
                w *= p;
            } else {
                pos -= 1;
                w *= 1.0 - p;
            }
            max = max.max(pos);
        }
        if max >= d as i64 {
            total += w;
        }
    }
    total
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for l in 1..=12 {
        for d in 1..=l {
            for i in 1..=9 {
                let p = i as f64 / 10.0;
                let dp = reach_prob(&WalkLaw::new(p, l).unwrap(), d).unwrap();
                worst = worst.max((dp - enumerate_reach(p, l, d)).abs());
                cases += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    Check::new(
        worst <= 1e-12 && elapsed < Duration::from_secs(10),
        format!("{cases} cases max_err={worst:.2e} time={}", secs(elapsed)),
    )
}

fn criterion_3() -> Check {
    let qs = [0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 0.99];
    let (mut cases, mut violations) = (0, 0);
    for &q in &qs {
        for n in 1..=4 {
            for l in 1..=8 {
                for j in 1..=l {
                    match bound_check_site(q, n, l, j) {
                        Ok(_) => {}
                        Err(ExactError::BoundViolation { .. }) => violations += 1,
                        Err(e) => panic!("{e}"),
                    }
                    cases += 1;
                }
            }
        }
    }
    Check::new(
        cases >= 500 && violations == 0,
        format!("{cases} tuples, {violations} violations"),
    )
}

fn criterion_4() -> Check {
    let mut mismatches = 0;
    for n in 1..=10u64 {
        for l in 1..=100u64 {
            let sum: u64 = (1..=l).map(|j| j.div_ceil(2)).sum();
            if extinction_threshold(n, l) != n * sum {
                mismatches += 1;
            }
        }
    }
    Check::new(
        mismatches == 0,
        format!("1000 pairs, {mismatches} mismatches"),
    )
}

fn mod2_spec() -> SequenceSpec {
    SequenceSpec::build(
        vec![PrimitiveForm::power(1.0), PrimitiveForm::log_inverse(2)],
        vec![],
        vec![0.9, 0.8],
    )
    .unwrap()
}

fn criterion_5() -> Check {
    let mut failures = Vec::new();

    let log = single(PrimitiveForm::log_inverse(2));
    let sqrt = SequenceSpec::build(
        vec![PrimitiveForm::power_with(1.0, 0.5, 0)],
        vec![],
        vec![0.9],
    )
    .unwrap();
    for n in 1..=8 {
        for l in 1..=8 {
            if classify(&params(n, l, &log)).outcome != Outcome::DiesAS {
                failures.push(format!("(a) N={n} L={l}"));
            }
            let survives = classify(&params(n, l, &sqrt)).outcome == Outcome::SurvivesWPP;
            if survives != (extinction_threshold(n as u64, l as u64) >= 3) {
                failures.push(format!("(b) N={n} L={l}"));
            }
        }
    }

    let mod2 = mod2_spec();
    let th = mod2.lifetime_thresholds();
    if th.l0 != ExtendedNat::Finite(2) || th.l1 != ExtendedNat::Finite(4) {
        failures.push(format!("(c) L0={:?} L1={:?}", th.l0, th.l1));
    }
    if classify(&params(1, 2, &mod2)).outcome != Outcome::DiesAS {
        failures.push("(c) N=1 L=2".into());
    }
    for n in 1..=8 {
        if n >= 2 && classify(&params(n, 2, &mod2)).outcome != Outcome::SurvivesWPP {
            failures.push(format!("(c) N={n} L=2"));
        }
        if classify(&params(n, 3, &mod2)).outcome != Outcome::SurvivesWPP {
            failures.push(format!("(c) N={n} L=3"));
        }
    }

    let dyadic = single(PrimitiveForm::log_inverse(2))
        .with_overrides(vec![SparseOverride::new(
            1,
            2,
            2,
            PrimitiveForm::power(1.0),
        )])
        .unwrap();
    let facts = SpecFacts::compute(&dyadic);
    for n in 1..=8 {
        for l in 1..=8 {
            let p = params(n, l, &dyadic);
            let via_r4 = evaluate_rules(&p, &facts)
                .iter()
                .any(|f| f.rule == Rule::R4 && f.outcome == Some(Outcome::DiesAS));
            if classify(&p).outcome != Outcome::DiesAS || !via_r4 {
                failures.push(format!("(d) N={n} L={l}"));
            }
        }
    }

    Check::new(
        failures.is_empty(),
        if failures.is_empty() {
            "(a)-(d) all hold".to_string()
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

fn criterion_6() -> Check {
    // alpha as num/den so the closed-form comparisons are exact
    let alphas = [(1u64, 10u64), (1, 4), (1, 3), (9, 10)];
    let mut mismatched = Vec::new();
    let mut total = 0;
    for &(num, den) in &alphas {
        let alpha = num as f64 / den as f64;
        let spec = SequenceSpec::build(
            vec![
                PrimitiveForm::power_with(1.0, alpha, 1),
                PrimitiveForm::log_inverse(2),
                PrimitiveForm::log_inverse(2),
            ],
            vec![],
            vec![0.9, 0.9],
        )
        .unwrap();
        for l in 3..=12u64 {
            let s: u64 = (0..l / 3).map(|i| (3 * i + 2) / 2).sum();
            for n in 1..=8u64 {
                let closed_dies = num * n * s < den;
                let dies = classify(&params(n as u32, l as u32, &spec)).outcome == Outcome::DiesAS;
                total += 1;
                if dies != closed_dies {
                    mismatched.push((l, n, num, den));
                }
            }
        }
    }

    let mut second_bad = 0;
    let mut second_total = 0;
    for &(num, den) in &[(1u64, 10u64), (1, 4), (1, 3), (1, 2), (9, 10)] {
        for &beta in &[1.5, 3.0] {
            let alpha = num as f64 / den as f64;
            let spec = SequenceSpec::build(
                vec![
                    PrimitiveForm::power_with(1.0, alpha, 1),
                    PrimitiveForm::power_with(1.0, alpha, 1),
                    PrimitiveForm::power_with(1.0, beta, 1),
                ],
                vec![],
                vec![0.9, 0.9],
            )
            .unwrap();
            for n in 1..=8u64 {
                let two = classify(&params(n as u32, 2, &spec)).outcome == Outcome::DiesAS;
                let one = classify(&params(n as u32, 1, &spec)).outcome == Outcome::DiesAS;
                second_total += 2;
                second_bad += (two != (2 * n * num <= den)) as u32;
                second_bad += (one != (n * num <= den)) as u32;
            }
        }
    }

    let mut ls: Vec<u64> = mismatched.iter().map(|m| m.0).collect();
    ls.sort_unstable();
    ls.dedup();
    Check::new(
        mismatched.is_empty() && second_bad == 0,
        format!(
            "closed form agrees on {}/{total} (mismatches at L in {ls:?}); second family {}/{second_total}",
            total - mismatched.len(),
            second_total - second_bad as usize
        ),
    )
}

fn criterion_7() -> Check {
    let start = Instant::now();
    let horizons = [100u64, 400, 1600];
    let trials = 10_000;
    let dies = [
        (1, 2, PrimitiveForm::power_with(0.5, 0.5, 1)),
        (1, 1, PrimitiveForm::power_with(0.7, 1.0, 1)),
        (3, 1, PrimitiveForm::log_inverse_with(0.5, 2)),
    ];
    let survives = [
        (1, 1, PrimitiveForm::power_with(1.0, 2.0, 1)),
        (1, 3, PrimitiveForm::power_with(1.0, 0.5, 1)),
        (2, 2, PrimitiveForm::power_with(1.0, 0.75, 1)),
    ];
    let mut failures = Vec::new();
    let run = |n, l, form, seed| {
        let p = params(n, l, &single(form));
        horizons
            .iter()
            .map(|&m| estimate_survival(&SimConfig::new(p.clone(), m, trials, seed)).unwrap())
            .collect::<Vec<_>>()
    };
    for (idx, &(n, l, form)) in dies.iter().enumerate() {
        let p = params(n, l, &single(form));
        if classify(&p).outcome != Outcome::DiesAS {
            failures.push(format!("dies#{idx} not classified DiesAS"));
        }
        let r = run(n, l, form, 100 + idx as u64);
        if !r.windows(2).all(|w| w[1].ci.1 < w[0].ci.0) {
            let ps: Vec<f64> = r.iter().map(|x| x.p_hat).collect();
            failures.push(format!("dies#{idx} p_hat={ps:?}"));
        }
    }
    for (idx, &(n, l, form)) in survives.iter().enumerate() {
        let p = params(n, l, &single(form));
        if classify(&p).outcome != Outcome::SurvivesWPP {
            failures.push(format!("survives#{idx} not classified SurvivesWPP"));
        }
        let r = run(n, l, form, 200 + idx as u64);
        if r[2].p_hat < 0.8 * r[0].p_hat {
            failures.push(format!(
                "survives#{idx} p_hat(1600)={} p_hat(100)={}",
                r[2].p_hat, r[0].p_hat
            ));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(300) {
        failures.push(format!("time {}", secs(elapsed)));
    }
    Check::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "3 DiesAS + 3 SurvivesWPP configs consistent, time={}",
                secs(elapsed)
            )
        } else {
            failures.join("; ")
        },
    )
}

fn criterion_8() -> Check {
    let specs = [
        single(PrimitiveForm::log_inverse(2)),
        single(PrimitiveForm::power_with(1.0, 0.5, 1)),
        mod2_spec(),
    ];
    let horizon = 300;
    let (mut checks, mut violations) = (0u64, 0u64);
    for (s, spec) in specs.iter().enumerate() {
        let q: Vec<f64> = (1..=horizon + 8).map(|i| spec.eval(i).unwrap()).collect();
        for n in 1..=3 {
            for l in 1..=4 {
                for trial in 0..1000 {
                    let seed = 31 + s as u64;
                    let base = simulate_trial(&q, n, l, seed, trial).activated();
                    let more_n = simulate_trial(&q, n + 1, l, seed, trial).activated();
                    let more_l = simulate_trial(&q, n, l + 1, seed, trial).activated();
                    let covers = |big: &std::ops::RangeInclusive<u64>| {
                        big.start() <= base.start() && big.end() >= base.end()
                    };
                    checks += 2;
                    violations += (!covers(&more_n)) as u64 + (!covers(&more_l)) as u64;
                }
            }
        }
    }
    Check::new(
        violations == 0,
        format!("{checks} inclusions checked, {violations} violations"),
    )
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn criterion_9() -> Check {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_frog"))
            .args(["--no-store", "--seed", "99", "--threads", threads])
            .args(["simulate", "--trials", "5000", "--horizon", "50,200"])
            .arg("--config")
            .arg(fixture("loginv.json"))
            .output()
            .unwrap()
    };
    let one = run("1");
    let four = run("4");
    let ok = one.status.success() && four.status.success() && one.stdout == four.stdout;
    Check::new(
        ok && !one.stdout.is_empty(),
        format!(
            "--threads 1 vs 4: {} bytes, identical={}",
            one.stdout.len(),
            one.stdout == four.stdout
        ),
    )
}

fn criterion_10() -> Check {
    let configs = [
        (1, 3, single(PrimitiveForm::power_with(1.0, 0.5, 1)), 200),
        (1, 1, single(PrimitiveForm::power_with(1.0, 2.0, 1)), 200),
        (2, 2, mod2_spec(), 200),
        (2, 2, single(PrimitiveForm::log_inverse(2)), 150),
        (1, 2, single(PrimitiveForm::power_with(0.5, 0.5, 1)), 300),
    ];
    let trials = 10_000;
    let mut failures = Vec::new();
    let mut rows_checked = 0;
    for (idx, (n, l, spec, m)) in configs.into_iter().enumerate() {
        let cfg = SimConfig::new(params(n, l, &spec), m, trials, 500 + idx as u64);
        let prof = estimate_activation_profile(&cfg).unwrap();
        let half = |p: f64| {
            let (lo, hi) = wilson_interval((p * trials as f64).round() as u64, trials, 0.95);
            (hi - lo) / 2.0
        };
        let mut best = (1.0f64, 0.0f64);
        for row in &prof.rows {
            rows_checked += 1;
            let hw = half(row.p_hat);
            if row.p_hat > best.0 + 3.0 * best.1 {
                failures.push(format!("config {idx} rises at site {}", row.site));
            }
            if row.p_hat < best.0 {
                best = (row.p_hat, hw);
            }
            if let Some(lb) = row.lower_bound {
                if row.p_hat + 3.0 * hw < lb {
                    failures.push(format!(
                        "config {idx} site {}: {} < lower {lb}",
                        row.site, row.p_hat
                    ));
                }
            }
        }
    }
    Check::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("5 configs, {rows_checked} sites monotone and above the lower curve")
        } else {
            failures.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("closed-form survival, L=1", criterion_1),
        ("DP equals path enumeration", criterion_2),
        ("block bound sandwich", criterion_3),
        ("b(N,L) identity", criterion_4),
        ("classifier regressions", criterion_5),
        ("mod-3 closed forms", criterion_6),
        ("Monte Carlo vs classifier", criterion_7),
        ("coupled monotonicity", criterion_8),
        ("thread-count determinism", criterion_9),
        ("activation profile", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let check = run();
        let tag = if check.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag}: {name}: {}", i + 1, check.detail);
        failed += (!check.pass) as u32;
    }
    println!("{} passed, {failed} failed", criteria.len() as u32 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
