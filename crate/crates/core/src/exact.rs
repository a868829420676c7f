//! Exact finite computations for a single block of the process.
//!
//! The central quantity is the probability that a `±1` walk of `L` steps never
//! reaches a given displacement. It is computed by a forward dynamic program
//! over `(time, displacement)` with an absorbing barrier, keeping the surviving
//! mass directly so that tiny non-visit probabilities do not suffer from
//! cancellation.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sequence::{SequenceSpec, SpecError};

/// Path enumeration visits `2^L` sequences.
pub const ENUMERATION_LIMIT: u32 = 20;

/// Relative slack allowed when comparing a computed probability with its bounds.
pub const BOUND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExactError {
    #[error("{what} = {value} is out of range")]
    OutOfRange { what: &'static str, value: i64 },
    #[error("enumeration over 2^{0} paths refused (limit 2^{ENUMERATION_LIMIT})")]
    TooLarge(u32),
    #[error("probability {0} is outside (0, 1)")]
    BadProbability(f64),
    #[error("bound violated at j = {position}: lower {lower:e}, value {value:e}, upper {upper:e}")]
    BoundViolation {
        position: u32,
        lower: f64,
        value: f64,
        upper: f64,
    },
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// A nearest-neighbour walk of exactly `steps` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkLaw {
    p_right: f64,
    p_left: f64,
    steps: u32,
}

impl WalkLaw {
    pub fn new(p_right: f64, steps: u32) -> Result<Self, ExactError> {
        check_prob(p_right)?;
        Self::checked(p_right, 1.0 - p_right, steps)
    }

    /// Walk of a particle born at a site with left-jump probability `q`.
    pub fn from_left_prob(q: f64, steps: u32) -> Result<Self, ExactError> {
        check_prob(q)?;
        Self::checked(1.0 - q, q, steps)
    }

    fn checked(p_right: f64, p_left: f64, steps: u32) -> Result<Self, ExactError> {
        if steps == 0 {
            return Err(ExactError::OutOfRange {
                what: "steps",
                value: 0,
            });
        }
        Ok(WalkLaw {
            p_right,
            p_left,
            steps,
        })
    }

    pub fn p_right(&self) -> f64 {
        self.p_right
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    /// The same walk seen in a reflected frame (leftward targets become rightward).
    pub fn mirrored(&self) -> Self {
        WalkLaw {
            p_right: self.p_left,
            p_left: self.p_right,
            steps: self.steps,
        }
    }
}

fn check_prob(p: f64) -> Result<(), ExactError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(ExactError::BadProbability(p))
    }
}

fn check_displacement(d: u32) -> Result<(), ExactError> {
    if d == 0 {
        Err(ExactError::OutOfRange {
            what: "displacement",
            value: 0,
        })
    } else {
        Ok(())
    }
}

/// Mass split after each step of the barrier walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMass {
    pub retained: f64,
    pub absorbed: f64,
}

/// Runs the barrier DP toward displacement `d` and reports the mass split after
/// every step (entry `t` is after `t + 1` steps).
pub fn barrier_profile(law: &WalkLaw, d: u32) -> Result<Vec<StepMass>, ExactError> {
    check_displacement(d)?;
    let steps = law.steps as usize;
    let d = d as usize;
    // slot s holds displacement s - steps, for displacements in [-steps, d - 1]
    let width = steps + d;
    let mut mass = vec![0.0f64; width];
    let mut next = vec![0.0f64; width];
    mass[steps] = 1.0;
    let mut absorbed = 0.0;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        next.iter_mut().for_each(|m| *m = 0.0);
        for (s, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            if s + 1 == width {
                absorbed += m * law.p_right;
            } else {
                next[s + 1] += m * law.p_right;
            }
            if s > 0 {
                next[s - 1] += m * law.p_left;
            }
        }
        std::mem::swap(&mut mass, &mut next);
        out.push(StepMass {
            retained: mass.iter().sum(),
            absorbed,
        });
    }
    Ok(out)
}

/// Probability that the walk attains displacement `>= d` at some time in `[0, L]`.
pub fn reach_prob(law: &WalkLaw, d: u32) -> Result<f64, ExactError> {
    check_displacement(d)?;
    if d > law.steps {
        return Ok(0.0);
    }
    Ok(barrier_profile(law, d)?.last().map_or(0.0, |m| m.absorbed))
}

/// Probability that the walk never attains displacement `d`.
pub fn miss_prob(law: &WalkLaw, d: u32) -> Result<f64, ExactError> {
    check_displacement(d)?;
    if d > law.steps {
        return Ok(1.0);
    }
    Ok(barrier_profile(law, d)?.last().map_or(1.0, |m| m.retained))
}

/// Exact-rational reach probability, for regression fixtures with small `L`.
pub fn reach_prob_exact(
    p_right: &BigRational,
    steps: u32,
    d: u32,
) -> Result<BigRational, ExactError> {
    check_displacement(d)?;
    if steps > ENUMERATION_LIMIT {
        return Err(ExactError::TooLarge(steps));
    }
    if d > steps {
        return Ok(BigRational::zero());
    }
    let p_left = BigRational::one() - p_right;
    let steps = steps as usize;
    let width = steps + d as usize;
    let mut mass = vec![BigRational::zero(); width];
    mass[steps] = BigRational::one();
    let mut absorbed = BigRational::zero();
    for _ in 0..steps {
        let mut next = vec![BigRational::zero(); width];
        for (s, m) in mass.iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            if s + 1 == width {
                absorbed += m * p_right;
            } else {
                next[s + 1] += m * p_right;
            }
            if s > 0 {
                next[s - 1] += m * &p_left;
            }
        }
        mass = next;
    }
    Ok(absorbed)
}

/// Convenience for fixtures: `num / den` as a rational.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Sums the probability of every step sequence whose running maximum reaches `d`.
pub fn brute_force_reach(law: &WalkLaw, d: u32) -> Result<f64, ExactError> {
    check_displacement(d)?;
    if law.steps > ENUMERATION_LIMIT {
        return Err(ExactError::TooLarge(law.steps));
    }
    let steps = law.steps;
    let mut total = 0.0;
    for path in 0u32..(1 << steps) {
        let mut pos = 0i64;
        let mut hit = false;
        let mut prob = 1.0;
        for t in 0..steps {
            if path & (1 << t) != 0 {
                pos += 1;
                prob *= law.p_right;
            } else {
                pos -= 1;
                prob *= law.p_left;
            }
            hit |= pos >= d as i64;
        }
        if hit {
            total += prob;
        }
    }
    Ok(total)
}

/// `f(j) = floor((j + 1) / 2)`: left jumps a particle at block position `j` must
/// make to miss the site just past the block.
pub fn miss_exponent(j: u32, lifetime: u32) -> Result<u32, ExactError> {
    if j == 0 || j > lifetime {
        return Err(ExactError::OutOfRange {
            what: "block position",
            value: j as i64,
        });
    }
    Ok(j.div_ceil(2))
}

/// `b(N, L)`, the closed form of `N * sum_{j=1}^{L} f(j)`.
pub fn extinction_threshold(particles: u64, lifetime: u64) -> u64 {
    if lifetime % 2 == 1 {
        let h = lifetime.div_ceil(2);
        particles * h * h
    } else {
        particles * lifetime * (lifetime + 2) / 4
    }
}

/// `P(i -/-> i + delta)`: none of the `N` walks from a site with left probability
/// `q` visits the site at offset `delta`.
pub fn non_visit_prob(
    q: f64,
    particles: u32,
    lifetime: u32,
    delta: i64,
) -> Result<f64, ExactError> {
    if delta == 0 {
        return Err(ExactError::OutOfRange {
            what: "delta",
            value: 0,
        });
    }
    if delta.unsigned_abs() > lifetime as u64 {
        check_prob(q)?;
        return Ok(1.0);
    }
    let law = WalkLaw::from_left_prob(q, lifetime)?;
    let law = if delta > 0 { law } else { law.mirrored() };
    Ok(miss_prob(&law, delta.unsigned_abs() as u32)?.powi(particles as i32))
}

/// `a_n`: probability that no particle of the block `{n+1, ..., n+L}` visits `n+L+1`.
pub fn block_miss_prob(
    spec: &SequenceSpec,
    particles: u32,
    lifetime: u32,
    n: u64,
) -> Result<f64, ExactError> {
    let target = n + lifetime as u64 + 1;
    let mut prod = 1.0;
    for i in n + 1..target {
        prod *= non_visit_prob(spec.eval(i)?, particles, lifetime, (target - i) as i64)?;
    }
    Ok(prod)
}

/// `prod_{n=0}^{M-1} (1 - a_n)`.
///
/// `P(E_{n+L+1}) >= P(E_{n+L}) (1 - a_n)` for every `n >= 0`, so this times
/// `P(E_L)` bounds `P(E_{M+L})` from below. For `L = 1` it is exact.
pub fn partial_survival_product(
    spec: &SequenceSpec,
    particles: u32,
    lifetime: u32,
    blocks: u64,
) -> Result<f64, ExactError> {
    let a = (0..blocks)
        .map(|n| block_miss_prob(spec, particles, lifetime, n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(survival_product(a))
}

pub fn survival_product(a: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().map(|x| 1.0 - x).product()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub position: u32,
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub lower_margin: f64,
    pub upper_margin: f64,
}

/// Checks `q^{N f(j)} <= P(n+j -/-> n+L+1) <= 2^{NL} q^{N f(j)}` for one site.
pub fn bound_check_site(
    q: f64,
    particles: u32,
    lifetime: u32,
    j: u32,
) -> Result<BoundReport, ExactError> {
    let fj = miss_exponent(j, lifetime)?;
    let value = non_visit_prob(q, particles, lifetime, (lifetime + 1 - j) as i64)?;
    let lower = q.powi((particles * fj) as i32);
    let upper = (2f64.powi((particles * lifetime) as i32) * lower).min(1.0);
    let report = BoundReport {
        position: j,
        lower,
        value,
        upper,
        lower_margin: value - lower,
        upper_margin: upper - value,
    };
    if value < lower * (1.0 - BOUND_TOL) || value > upper * (1.0 + BOUND_TOL) {
        return Err(ExactError::BoundViolation {
            position: j,
            lower,
            value,
            upper,
        });
    }
    Ok(report)
}

/// [`bound_check_site`] for every position of the block starting after `n`.
pub fn bound_check(
    spec: &SequenceSpec,
    particles: u32,
    lifetime: u32,
    n: u64,
) -> Result<Vec<BoundReport>, ExactError> {
    (1..=lifetime)
        .map(|j| bound_check_site(spec.eval(n + j as u64)?, particles, lifetime, j))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachCell {
    pub site: u64,
    pub displacement: u32,
    pub reach_prob: f64,
    pub not_visit_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub n: u64,
    pub a_n: f64,
    pub lower: f64,
    pub upper: f64,
    /// `prod_{k=0}^{n} (1 - a_k)`
    pub partial_product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachTable {
    pub particles: u32,
    pub lifetime: u32,
    pub cells: Vec<ReachCell>,
    pub rows: Vec<BlockRow>,
}

impl ReachTable {
    /// Rows for `n = 0..blocks` and cells for every site they touch. Cells and rows
    /// are computed in parallel; the output order does not depend on scheduling.
    pub fn build(
        spec: &SequenceSpec,
        particles: u32,
        lifetime: u32,
        blocks: u64,
    ) -> Result<Self, ExactError> {
        let last_site = blocks + lifetime as u64;
        let cells = (1..=last_site)
            .into_par_iter()
            .flat_map_iter(|site| (1..=lifetime).map(move |d| (site, d)))
            .map(|(site, d)| -> Result<ReachCell, ExactError> {
                let q = spec.eval(site)?;
                let law = WalkLaw::from_left_prob(q, lifetime)?;
                Ok(ReachCell {
                    site,
                    displacement: d,
                    reach_prob: reach_prob(&law, d)?,
                    not_visit_prob: non_visit_prob(q, particles, lifetime, d as i64)?,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let l = lifetime as usize;
        let cell = |site: u64, d: u32| &cells[(site as usize - 1) * l + d as usize - 1];
        let scale = 2f64.powi((particles * lifetime) as i32);
        let mut rows: Vec<BlockRow> = (0..blocks)
            .into_par_iter()
            .map(|n| -> Result<BlockRow, ExactError> {
                let mut a_n = 1.0;
                let mut lower = 1.0;
                let mut upper = 1.0;
                for j in 1..=lifetime {
                    let site = n + j as u64;
                    a_n *= cell(site, lifetime + 1 - j).not_visit_prob;
                    let term = spec
                        .eval(site)?
                        .powi((particles * miss_exponent(j, lifetime)?) as i32);
                    lower *= term;
                    upper *= (scale * term).min(1.0);
                }
                Ok(BlockRow {
                    n,
                    a_n,
                    lower,
                    upper,
                    partial_product: 0.0,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut running = 1.0;
        for row in &mut rows {
            running *= 1.0 - row.a_n;
            row.partial_product = running;
        }
        Ok(ReachTable {
            particles,
            lifetime,
            cells,
            rows,
        })
    }
}
