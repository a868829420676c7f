//! Survival/extinction decisions for `Γ[N, L, (q_n)]`.
//!
//! Structural rules on `m`, `b(N, L)`, monotonicity and the lifetime thresholds
//! `L0`/`L1` run first. The series rule then decides `sum a_n` directly: since
//! `q^{N f(j)} <= P(n+j -/-> n+L+1) <= 2^{NL} q^{N f(j)}`, the block term `a_n` is
//! within constant factors of `prod_j q_{n+j}^{N f(j)}`, which for this sequence
//! language is `n^{-E} (log n)^{-F}` on each block alignment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{extinction_threshold, miss_exponent};
use crate::extended::ExtendedNat;
use crate::sequence::{D1Membership, Decay, LifetimeThresholds, SequenceSpec, EXPONENT_TOL};

/// Exponents further than this from 1 (but not within [`EXPONENT_TOL`]) are
/// treated as too close to call from floating-point inputs.
pub const AMBIGUITY_BAND: f64 = 1e-9;

pub const DEFAULT_N0_CAP: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("N must be at least 1")]
    ZeroParticles,
    #[error("L must be at least 1")]
    ZeroLifetime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ProcessParams {
    #[serde(rename = "N")]
    pub particles: u32,
    #[serde(rename = "L")]
    pub lifetime: u32,
    pub spec: SequenceSpec,
}

#[derive(Deserialize)]
struct RawParams {
    #[serde(rename = "N", alias = "particles")]
    particles: u32,
    #[serde(rename = "L", alias = "lifetime")]
    lifetime: u32,
    spec: SequenceSpec,
}

impl TryFrom<RawParams> for ProcessParams {
    type Error = ParamsError;

    fn try_from(raw: RawParams) -> Result<Self, ParamsError> {
        ProcessParams::new(raw.particles, raw.lifetime, raw.spec)
    }
}

impl ProcessParams {
    pub fn new(particles: u32, lifetime: u32, spec: SequenceSpec) -> Result<Self, ParamsError> {
        if particles == 0 {
            return Err(ParamsError::ZeroParticles);
        }
        if lifetime == 0 {
            return Err(ParamsError::ZeroLifetime);
        }
        Ok(ProcessParams {
            particles,
            lifetime,
            spec,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    DiesAS,
    SurvivesWPP,
    SurvivesForLargeN,
    SurvivesForLargeNL,
    Boundary,
    Unknown,
}

impl Outcome {
    pub fn is_decisive(self) -> bool {
        matches!(self, Outcome::DiesAS | Outcome::SurvivesWPP)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    R8,
}

impl Rule {
    pub fn citation(self) -> &'static str {
        match self {
            Rule::R1 => "Thm 1(b)",
            Rule::R2 => "Thm 1(a)",
            Rule::R3 => "Thm 2(a)",
            Rule::R4 => "Thm 2(b)",
            Rule::R5 => "Thm 3(a)",
            Rule::R6 => "Thm 3(c)",
            Rule::R7 => "series criterion: sum a_n = inf iff dies out",
            Rule::R8 => "Thm 3(b)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesBehavior {
    Converges,
    Diverges,
    Ambiguous,
}

/// `sum n^{-power} (log n)^{-log}`: diverges iff `power < 1`, or `power == 1` and `log <= 1`.
pub fn bertrand(power: f64, log: f64) -> SeriesBehavior {
    let gap = power - 1.0;
    if gap.abs() <= EXPONENT_TOL {
        if log <= 1.0 + EXPONENT_TOL {
            SeriesBehavior::Diverges
        } else {
            SeriesBehavior::Converges
        }
    } else if gap.abs() <= AMBIGUITY_BAND {
        SeriesBehavior::Ambiguous
    } else if gap < 0.0 {
        SeriesBehavior::Diverges
    } else {
        SeriesBehavior::Converges
    }
}

/// Exponents of the block sub-series over block starts `n ≡ residue (mod k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesExponent {
    pub residue: usize,
    /// `E_r = N * sum alpha f(j)` over power-law positions
    pub power: f64,
    /// `F_r = N * sum f(j)` over log-inverse positions
    pub log: u64,
}

impl SeriesExponent {
    pub fn behavior(&self) -> SeriesBehavior {
        bertrand(self.power, self.log as f64)
    }
}

/// Block sub-series around the members of one override family that fall on
/// `residue`, with the override at block position `position`. Along the family the
/// index grows like `b^j`, so any power-law neighbour makes the sum geometric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HoleExponent {
    pub family: usize,
    pub residue: usize,
    pub position: u32,
    pub power: f64,
    pub log: u64,
    /// `N f(position)`, the power carried by the override value itself
    pub override_weight: u64,
    #[serde(skip)]
    pub override_decay: Decay,
}

impl HoleExponent {
    pub fn behavior(&self) -> SeriesBehavior {
        if self.power > EXPONENT_TOL {
            return SeriesBehavior::Converges;
        }
        let log = self.log as f64;
        let w = self.override_weight as f64;
        match self.override_decay {
            Decay::Power(beta) => bertrand(log + beta * w, 0.0),
            Decay::LogInverse => bertrand(log, w),
            Decay::Flat => bertrand(log, 0.0),
        }
    }
}

fn weights(
    spec: &SequenceSpec,
    particles: u32,
    lifetime: u32,
    residue_at: impl Fn(u32) -> Option<usize>,
) -> (f64, u64) {
    let k = spec.modulus();
    // integer weight per residue keeps the float sum short
    let mut per_residue = vec![0u64; k];
    let mut log = 0u64;
    for j in 1..=lifetime {
        let Some(r) = residue_at(j) else { continue };
        let w = particles as u64 * miss_exponent(j, lifetime).expect("j in 1..=L") as u64;
        match spec.residue_forms()[r].decay() {
            Decay::Power(_) => per_residue[r] += w,
            Decay::LogInverse => log += w,
            Decay::Flat => {}
        }
    }
    let power = per_residue
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0)
        .map(|(r, &w)| match spec.residue_forms()[r].decay() {
            Decay::Power(alpha) => alpha * w as f64,
            _ => unreachable!(),
        })
        .sum();
    (power, log)
}

/// `(E_r, F_r)` for every block alignment `r` (overrides ignored).
pub fn alignment_exponents(
    spec: &SequenceSpec,
    particles: u32,
    lifetime: u32,
) -> Vec<SeriesExponent> {
    let k = spec.modulus();
    (0..k)
        .map(|r| {
            let (power, log) = weights(spec, particles, lifetime, |j| Some((r + j as usize) % k));
            SeriesExponent {
                residue: r,
                power,
                log,
            }
        })
        .collect()
}

/// Dominant alignment: smallest `E_r`, then smallest `F_r`, then smallest residue.
pub fn min_alignment_exponent(
    spec: &SequenceSpec,
    particles: u32,
    lifetime: u32,
) -> SeriesExponent {
    alignment_exponents(spec, particles, lifetime)
        .into_iter()
        .reduce(|best, e| {
            let power_tie = (e.power - best.power).abs() <= EXPONENT_TOL;
            if (!power_tie && e.power < best.power) || (power_tie && e.log < best.log) {
                e
            } else {
                best
            }
        })
        .expect("modulus >= 1")
}

pub fn hole_exponents(spec: &SequenceSpec, particles: u32, lifetime: u32) -> Vec<HoleExponent> {
    let k = spec.modulus();
    let mut out = Vec::new();
    for (family, o) in spec.overrides().iter().enumerate() {
        for residue in o.recurring_residues(k) {
            for position in 1..=lifetime {
                let (power, log) = weights(spec, particles, lifetime, |j| {
                    (j != position).then(|| {
                        (residue + k * lifetime as usize + j as usize - position as usize) % k
                    })
                });
                out.push(HoleExponent {
                    family,
                    residue,
                    position,
                    power,
                    log,
                    override_weight: particles as u64
                        * miss_exponent(position, lifetime).unwrap() as u64,
                    override_decay: o.form.decay(),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesTest {
    pub alignments: Vec<SeriesExponent>,
    pub holes: Vec<HoleExponent>,
    pub behavior: SeriesBehavior,
}

/// Decides `sum_n a_n` by splitting it into the per-alignment sub-series and the
/// sparse override sub-series.
pub fn series_test(spec: &SequenceSpec, particles: u32, lifetime: u32) -> SeriesTest {
    let alignments = alignment_exponents(spec, particles, lifetime);
    let holes = hole_exponents(spec, particles, lifetime);
    let all: Vec<SeriesBehavior> = alignments
        .iter()
        .map(SeriesExponent::behavior)
        .chain(holes.iter().map(HoleExponent::behavior))
        .collect();
    let behavior = if all.contains(&SeriesBehavior::Diverges) {
        SeriesBehavior::Diverges
    } else if all.contains(&SeriesBehavior::Ambiguous) {
        SeriesBehavior::Ambiguous
    } else {
        SeriesBehavior::Converges
    };
    SeriesTest {
        alignments,
        holes,
        behavior,
    }
}

/// Smallest `N <= cap` for which the series rule gives survival.
pub fn survival_threshold_n(spec: &SequenceSpec, lifetime: u32, cap: u64) -> ExtendedNat {
    (1..=cap)
        .find(|&n| series_test(spec, n as u32, lifetime).behavior == SeriesBehavior::Converges)
        .map_or(ExtendedNat::Infinite, ExtendedNat::Finite)
}

/// Per-sequence quantities shared by every `(N, L)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecFacts {
    pub m: ExtendedNat,
    pub d1: D1Membership,
    pub thresholds: LifetimeThresholds,
}

impl SpecFacts {
    pub fn compute(spec: &SequenceSpec) -> Self {
        SpecFacts {
            m: spec.m_of(),
            d1: spec.is_in_d1(),
            thresholds: spec.lifetime_thresholds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub rule: Rule,
    pub citation: &'static str,
    pub applies: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictValues {
    pub m: ExtendedNat,
    pub b: u64,
    #[serde(rename = "L0")]
    pub l0: ExtendedNat,
    #[serde(rename = "L1")]
    pub l1: ExtendedNat,
    pub d1: D1Membership,
    pub exponents: Vec<SeriesExponent>,
    pub min_exponent: SeriesExponent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LargeNThreshold {
    pub n0: u64,
    /// lifetimes `L0..=L1-1` where this kind of verdict can occur
    pub lifetimes: (ExtendedNat, ExtendedNat),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<LargeNThreshold>,
    pub trace: Vec<TraceEntry>,
    pub values: VerdictValues,
}

/// Result of one rule, evaluated independently of the others.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleFiring {
    pub rule: Rule,
    pub outcome: Option<Outcome>,
    pub detail: String,
}

/// Evaluates R1–R7 without short-circuiting.
pub fn evaluate_rules(params: &ProcessParams, facts: &SpecFacts) -> Vec<RuleFiring> {
    let n = params.particles;
    let l = params.lifetime;
    let b = extinction_threshold(n as u64, l as u64);
    let m = facts.m;
    let (l0, l1) = (facts.thresholds.l0, facts.thresholds.l1);
    let lifetime = ExtendedNat::Finite(l as u64);
    let fire = |cond: bool, outcome: Outcome| cond.then_some(outcome);

    let series = series_test(&params.spec, n, l);
    let series_outcome = match series.behavior {
        SeriesBehavior::Diverges => Outcome::DiesAS,
        SeriesBehavior::Converges => Outcome::SurvivesWPP,
        SeriesBehavior::Ambiguous => Outcome::Boundary,
    };
    let min = min_alignment_exponent(&params.spec, n, l);

    vec![
        RuleFiring {
            rule: Rule::R1,
            outcome: fire(
                m.is_finite() && m <= ExtendedNat::Finite(b),
                Outcome::SurvivesWPP,
            ),
            detail: format!("m = {m}, b(N,L) = {b}"),
        },
        RuleFiring {
            rule: Rule::R2,
            outcome: fire(
                m.is_finite() && facts.d1 == D1Membership::Yes && m > ExtendedNat::Finite(b),
                Outcome::DiesAS,
            ),
            detail: format!("m = {m}, b(N,L) = {b}, D1 = {:?}", facts.d1),
        },
        RuleFiring {
            rule: Rule::R3,
            outcome: fire(
                !m.is_finite() && facts.d1 == D1Membership::Yes,
                Outcome::DiesAS,
            ),
            detail: format!("m = {m}, D1 = {:?}", facts.d1),
        },
        RuleFiring {
            rule: Rule::R4,
            outcome: fire(!m.is_finite() && !l0.is_finite(), Outcome::DiesAS),
            detail: format!("m = {m}, L0 = {l0}"),
        },
        RuleFiring {
            rule: Rule::R5,
            outcome: fire(lifetime < l0, Outcome::DiesAS),
            detail: format!("L = {l}, L0 = {l0}"),
        },
        RuleFiring {
            rule: Rule::R6,
            outcome: fire(l1.is_finite() && lifetime >= l1, Outcome::SurvivesWPP),
            detail: format!("L = {l}, L1 = {l1}"),
        },
        RuleFiring {
            rule: Rule::R7,
            outcome: Some(series_outcome),
            detail: format!(
                "min alignment r = {}: E = {}, F = {}; {} override sub-series; {:?}",
                min.residue,
                min.power,
                min.log,
                series.holes.len(),
                series.behavior
            ),
        },
    ]
}

pub fn classify(params: &ProcessParams) -> Verdict {
    classify_with_facts(params, &SpecFacts::compute(&params.spec))
}

/// [`classify`] with precomputed per-sequence facts (for sweeps).
pub fn classify_with_facts(params: &ProcessParams, facts: &SpecFacts) -> Verdict {
    let n = params.particles;
    let l = params.lifetime;
    let values = VerdictValues {
        m: facts.m,
        b: extinction_threshold(n as u64, l as u64),
        l0: facts.thresholds.l0,
        l1: facts.thresholds.l1,
        d1: facts.d1,
        exponents: alignment_exponents(&params.spec, n, l),
        min_exponent: min_alignment_exponent(&params.spec, n, l),
    };

    let mut trace = Vec::new();
    for firing in evaluate_rules(params, facts) {
        let decisive = firing.outcome.is_some_and(Outcome::is_decisive);
        trace.push(TraceEntry {
            rule: firing.rule,
            citation: firing.rule.citation(),
            applies: firing.outcome.is_some(),
            outcome: firing.outcome,
            detail: firing.detail,
        });
        if decisive {
            return Verdict {
                outcome: firing.outcome.unwrap(),
                threshold: None,
                trace,
                values,
            };
        }
    }

    // Only an ambiguous series test gets here.
    let lifetime = ExtendedNat::Finite(l as u64);
    let (l0, l1) = (facts.thresholds.l0, facts.thresholds.l1);
    if l0 <= lifetime && lifetime < l1 {
        let cap = DEFAULT_N0_CAP;
        let n0 = (n as u64 + 1..=cap).find(|&cand| {
            series_test(&params.spec, cand as u32, l).behavior == SeriesBehavior::Converges
        });
        match n0 {
            Some(n0) => {
                trace.push(TraceEntry {
                    rule: Rule::R8,
                    citation: Rule::R8.citation(),
                    applies: true,
                    outcome: Some(Outcome::SurvivesForLargeN),
                    detail: format!(
                        "N0 = {n0} from the series exponents (a concrete threshold, beyond the qualitative statement)"
                    ),
                });
                let upper = match l1 {
                    ExtendedNat::Finite(v) => ExtendedNat::Finite(v - 1),
                    ExtendedNat::Infinite => ExtendedNat::Infinite,
                };
                return Verdict {
                    outcome: Outcome::SurvivesForLargeN,
                    threshold: Some(LargeNThreshold {
                        n0,
                        lifetimes: (l0, upper),
                    }),
                    trace,
                    values,
                };
            }
            None => trace.push(TraceEntry {
                rule: Rule::R8,
                citation: Rule::R8.citation(),
                applies: false,
                outcome: None,
                detail: format!("cap reached: no N <= {cap} with a convergent series"),
            }),
        }
    }
    if !facts.m.is_finite() && l0.is_finite() {
        trace.push(TraceEntry {
            rule: Rule::R8,
            citation: "Thm 2(c)",
            applies: true,
            outcome: Some(Outcome::SurvivesForLargeNL),
            detail: format!("a subsequence with finite m has bounded gaps (L0 = {l0})"),
        });
        return Verdict {
            outcome: Outcome::SurvivesForLargeNL,
            threshold: None,
            trace,
            values,
        };
    }
    Verdict {
        outcome: Outcome::Boundary,
        threshold: None,
        trace,
        values,
    }
}
