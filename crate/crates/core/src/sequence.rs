//! Jump-probability sequences.
//!
//! A [`SequenceSpec`] describes `(q_n)_{n >= 1}` as `k` interleaved residue
//! classes, each following a [`PrimitiveForm`] evaluated on the block counter
//! (`q_{k c + r} = form_r(c)`), plus optional sparse geometric overrides and an
//! optional explicit head `q_1, ..., q_h`. The language is closed so that every
//! summability question has a symbolic answer.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extended::ExtendedNat;

/// Exponent comparisons within this distance of the threshold count as equal.
pub const EXPONENT_TOL: f64 = 1e-12;

/// Number of leading indices inspected when monotonicity cannot be decided symbolically.
pub const MONOTONE_SCAN_HORIZON: u64 = 1_000_000;

/// Subset enumeration for `L0`/`L1` is exponential in the modulus.
pub const MAX_MODULUS: usize = 16;

pub const MAX_OVERRIDES: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("modulus must be at least 1")]
    ZeroModulus,
    #[error("modulus {0} exceeds the supported maximum of {MAX_MODULUS}")]
    ModulusTooLarge(usize),
    #[error("residue {r} is outside 0..{modulus}")]
    ResidueOutOfRange { r: usize, modulus: usize },
    #[error("residue {0} is defined more than once")]
    DuplicateResidue(usize),
    #[error("residue {0} has no form")]
    MissingResidue(usize),
    #[error("override {0}: need a >= 1 and b >= 2")]
    BadOverride(usize),
    #[error("at most {MAX_OVERRIDES} overrides are supported")]
    TooManyOverrides,
    #[error("overrides {first} and {second} both claim index {shared}")]
    OverlappingOverrides {
        first: usize,
        second: usize,
        shared: u64,
    },
    #[error("invalid form parameters: {0}")]
    BadForm(String),
    #[error("q_{index} = {value} is outside (0, 1)")]
    ValueOutOfRange { index: u64, value: f64 },
    #[error("index {0} is out of range (indices start at 1)")]
    IndexOutOfRange(u64),
}

impl SpecError {
    /// Structural problems with the document, as opposed to probabilities out of range.
    pub fn is_schema_error(&self) -> bool {
        !matches!(
            self,
            SpecError::BadForm(_) | SpecError::ValueOutOfRange { .. }
        )
    }
}

/// Asymptotic shape of a form, the only thing summability depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay {
    /// `~ n^(-alpha)`
    Power(f64),
    /// `~ 1 / log n`
    LogInverse,
    /// bounded away from zero
    Flat,
}

fn unit() -> f64 {
    1.0
}

fn two() -> u64 {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum PrimitiveForm {
    /// `c * (n + offset)^(-alpha)`
    #[serde(rename = "power")]
    PowerLaw {
        #[serde(default = "unit")]
        c: f64,
        alpha: f64,
        #[serde(default)]
        offset: u64,
    },
    /// `c / ln(n + offset)`
    #[serde(rename = "loginv")]
    LogInverse {
        #[serde(default = "unit")]
        c: f64,
        #[serde(default = "two")]
        offset: u64,
    },
    #[serde(rename = "const")]
    Constant { q: f64 },
}

impl PrimitiveForm {
    pub fn power(alpha: f64) -> Self {
        PrimitiveForm::PowerLaw {
            c: 1.0,
            alpha,
            offset: 0,
        }
    }

    pub fn power_with(c: f64, alpha: f64, offset: u64) -> Self {
        PrimitiveForm::PowerLaw { c, alpha, offset }
    }

    pub fn log_inverse(offset: u64) -> Self {
        PrimitiveForm::LogInverse { c: 1.0, offset }
    }

    pub fn log_inverse_with(c: f64, offset: u64) -> Self {
        PrimitiveForm::LogInverse { c, offset }
    }

    pub fn constant(q: f64) -> Self {
        PrimitiveForm::Constant { q }
    }

    /// Value at counter `n`. Every form is nonincreasing in `n` wherever it is positive.
    pub fn value(&self, n: u64) -> f64 {
        match *self {
            PrimitiveForm::PowerLaw { c, alpha, offset } => {
                c * ((n as f64) + offset as f64).powf(-alpha)
            }
            PrimitiveForm::LogInverse { c, offset } => c / ((n as f64) + offset as f64).ln(),
            PrimitiveForm::Constant { q } => q,
        }
    }

    pub fn decay(&self) -> Decay {
        match *self {
            PrimitiveForm::PowerLaw { alpha, .. } => Decay::Power(alpha),
            PrimitiveForm::LogInverse { .. } => Decay::LogInverse,
            PrimitiveForm::Constant { .. } => Decay::Flat,
        }
    }

    /// Smallest `M` with `sum_n form(n)^M < infinity`.
    pub fn summability_index(&self) -> ExtendedNat {
        match self.decay() {
            Decay::Power(alpha) => ExtendedNat::Finite(min_summable_power(alpha)),
            Decay::LogInverse | Decay::Flat => ExtendedNat::Infinite,
        }
    }

    fn check_params(&self) -> Result<(), SpecError> {
        let ok = match *self {
            PrimitiveForm::PowerLaw { c, alpha, .. } => {
                c.is_finite() && c > 0.0 && alpha.is_finite() && alpha > 0.0
            }
            PrimitiveForm::LogInverse { c, .. } => c.is_finite() && c > 0.0,
            PrimitiveForm::Constant { q } => q > 0.0 && q < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(SpecError::BadForm(format!("{self:?}")))
        }
    }
}

/// Smallest positive integer `M` with `M * alpha > 1`; `M * alpha == 1` is harmonic and diverges.
pub fn min_summable_power(alpha: f64) -> u64 {
    assert!(alpha > 0.0, "alpha must be positive");
    let mut m = ((1.0 / alpha).floor() as u64).saturating_sub(1).max(1);
    while (m as f64) * alpha <= 1.0 + EXPONENT_TOL {
        m += 1;
    }
    m
}

/// Values on the sparse family `{ a * b^j : j >= j0 }`, with the form evaluated at `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseOverride {
    pub a: u64,
    pub b: u64,
    #[serde(default)]
    pub j0: u32,
    pub form: PrimitiveForm,
}

impl SparseOverride {
    pub fn new(a: u64, b: u64, j0: u32, form: PrimitiveForm) -> Self {
        SparseOverride { a, b, j0, form }
    }

    /// `(j, index)` pairs in increasing order, up to `u64` overflow.
    pub fn indices(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        let start = self
            .b
            .checked_pow(self.j0)
            .and_then(|p| p.checked_mul(self.a));
        std::iter::successors(start.map(|i| (self.j0, i)), move |&(j, i)| {
            i.checked_mul(self.b).map(|next| (j + 1, next))
        })
    }

    /// Exponent `j` if `n` belongs to the family.
    pub fn exponent_of(&self, n: u64) -> Option<u32> {
        if n == 0 || !n.is_multiple_of(self.a) {
            return None;
        }
        let mut rest = n / self.a;
        let mut j = 0u32;
        while rest.is_multiple_of(self.b) {
            rest /= self.b;
            j += 1;
        }
        (rest == 1 && j >= self.j0).then_some(j)
    }

    /// Residues mod `k` hit by infinitely many members (the cycle of `x -> b x mod k`).
    pub fn recurring_residues(&self, k: usize) -> BTreeSet<usize> {
        let k = k as u128;
        let b = self.b as u128 % k;
        let mut x = self.a as u128 % k;
        for _ in 0..self.j0 {
            x = x * b % k;
        }
        for _ in 0..k {
            x = x * b % k;
        }
        let start = x;
        let mut out = BTreeSet::new();
        loop {
            out.insert(x as usize);
            x = x * b % k;
            if x == start {
                break;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum D1Membership {
    Yes,
    No,
    Unknown,
}

/// One candidate subsequence in the `L0`/`L1` search: a union of residue classes,
/// with each override family hitting it either kept (raising `m`) or cut out
/// (leaving isolated holes that widen gaps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubseqAnalysis {
    pub residue_subset: Vec<usize>,
    pub included_overrides: Vec<usize>,
    pub excluded_overrides: Vec<usize>,
    pub m_value: ExtendedNat,
    pub l_value: ExtendedNat,
    pub in_dc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeThresholds {
    pub l0: ExtendedNat,
    pub l1: ExtendedNat,
    pub witnesses: Vec<SubseqAnalysis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDocument", into = "SpecDocument")]
pub struct SequenceSpec {
    modulus: usize,
    residues: Vec<PrimitiveForm>,
    overrides: Vec<SparseOverride>,
    head: Vec<f64>,
}

impl SequenceSpec {
    /// Interleaves `forms`: residue `r` of `forms.len()` follows `forms[r]`.
    pub fn new(forms: Vec<PrimitiveForm>) -> Result<Self, SpecError> {
        Self::build(forms, Vec::new(), Vec::new())
    }

    pub fn single(form: PrimitiveForm) -> Result<Self, SpecError> {
        Self::new(vec![form])
    }

    pub fn build(
        forms: Vec<PrimitiveForm>,
        overrides: Vec<SparseOverride>,
        head: Vec<f64>,
    ) -> Result<Self, SpecError> {
        let mut overrides = overrides;
        overrides.sort_by_key(|x| (x.a, x.b, x.j0));
        let spec = SequenceSpec {
            modulus: forms.len(),
            residues: forms,
            overrides,
            head,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_overrides(self, overrides: Vec<SparseOverride>) -> Result<Self, SpecError> {
        Self::build(self.residues, overrides, self.head)
    }

    pub fn with_head(self, head: Vec<f64>) -> Result<Self, SpecError> {
        Self::build(self.residues, self.overrides, head)
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    pub fn residue_forms(&self) -> &[PrimitiveForm] {
        &self.residues
    }

    pub fn overrides(&self) -> &[SparseOverride] {
        &self.overrides
    }

    pub fn head(&self) -> &[f64] {
        &self.head
    }

    fn validate(&self) -> Result<(), SpecError> {
        if self.modulus == 0 {
            return Err(SpecError::ZeroModulus);
        }
        if self.modulus > MAX_MODULUS {
            return Err(SpecError::ModulusTooLarge(self.modulus));
        }
        if self.overrides.len() > MAX_OVERRIDES {
            return Err(SpecError::TooManyOverrides);
        }
        for (i, o) in self.overrides.iter().enumerate() {
            if o.a < 1 || o.b < 2 {
                return Err(SpecError::BadOverride(i));
            }
        }
        for form in self
            .residues
            .iter()
            .chain(self.overrides.iter().map(|o| &o.form))
        {
            form.check_params()?;
        }
        self.check_overlaps()?;
        for (i, &v) in self.head.iter().enumerate() {
            check_value(i as u64 + 1, v)?;
        }

        // Forms are nonincreasing in their counter, so the first counter actually
        // used decides validity of the whole tail.
        let head_len = self.head.len() as u64;
        let k = self.modulus as u64;
        for (r, form) in self.residues.iter().enumerate() {
            let r = r as u64;
            let mut c = if r == 0 { 1 } else { 0 };
            if k * c + r <= head_len {
                c = (head_len - r) / k + 1;
            }
            loop {
                let index = k * c + r;
                if self.override_at(index).is_none() {
                    check_value(index, form.value(c))?;
                    break;
                }
                c += 1;
            }
        }
        for o in &self.overrides {
            if let Some((j, index)) = o.indices().find(|&(_, i)| i > head_len) {
                check_value(index, o.form.value(j as u64))?;
            }
        }
        Ok(())
    }

    fn check_overlaps(&self) -> Result<(), SpecError> {
        let sets: Vec<BTreeSet<u64>> = self
            .overrides
            .iter()
            .map(|o| o.indices().map(|(_, i)| i).collect())
            .collect();
        for first in 0..sets.len() {
            for second in first + 1..sets.len() {
                if let Some(&shared) = sets[first].intersection(&sets[second]).next() {
                    return Err(SpecError::OverlappingOverrides {
                        first,
                        second,
                        shared,
                    });
                }
            }
        }
        Ok(())
    }

    fn override_at(&self, n: u64) -> Option<(usize, u32)> {
        self.overrides
            .iter()
            .enumerate()
            .find_map(|(i, o)| o.exponent_of(n).map(|j| (i, j)))
    }

    /// `q_n`. The head wins over overrides, which win over residue forms.
    pub fn eval(&self, n: u64) -> Result<f64, SpecError> {
        if n == 0 {
            return Err(SpecError::IndexOutOfRange(n));
        }
        if let Some(&v) = self.head.get(n as usize - 1) {
            return Ok(v);
        }
        if let Some((i, j)) = self.override_at(n) {
            return Ok(self.overrides[i].form.value(j as u64));
        }
        let k = self.modulus as u64;
        Ok(self.residues[(n % k) as usize].value(n / k))
    }

    /// `q_1, ..., q_len` (position `i` holds `q_{i+1}`).
    pub fn values(&self, len: usize) -> Vec<f64> {
        (1..=len as u64)
            .map(|n| self.eval(n).expect("indices start at 1"))
            .collect()
    }

    /// `m((q_n))`: the smallest `M` making `sum q_n^M` finite.
    ///
    /// Decided per form. Override families are geometrically sparse, so they add
    /// their own constraint but never relax a residue class.
    pub fn m_of(&self) -> ExtendedNat {
        self.residues
            .iter()
            .chain(self.overrides.iter().map(|o| &o.form))
            .map(PrimitiveForm::summability_index)
            .max()
            .expect("modulus >= 1")
    }

    pub fn is_in_d(&self) -> bool {
        !self.m_of().is_finite()
    }

    pub fn is_in_d1(&self) -> D1Membership {
        let tail_monotone = self.overrides.is_empty()
            && (self.modulus == 1 || self.residues.iter().all(|f| *f == self.residues[0]));
        if tail_monotone {
            let head_monotone = self.head.windows(2).all(|w| w[0] >= w[1]);
            let joins = match self.head.last() {
                Some(&last) => last >= self.eval(self.head.len() as u64 + 1).unwrap(),
                None => true,
            };
            if head_monotone && joins {
                return D1Membership::Yes;
            }
        }
        let mut prev = self.eval(1).unwrap();
        for n in 2..=MONOTONE_SCAN_HORIZON {
            let cur = self.eval(n).unwrap();
            if cur > prev {
                return D1Membership::No;
            }
            prev = cur;
        }
        D1Membership::Unknown
    }

    /// Every candidate subsequence, in lexicographic order of residue subsets.
    pub fn subsequence_analyses(&self) -> Vec<SubseqAnalysis> {
        let k = self.modulus;
        let residue_m: Vec<ExtendedNat> = self
            .residues
            .iter()
            .map(PrimitiveForm::summability_index)
            .collect();
        let recurring: Vec<BTreeSet<usize>> = self
            .overrides
            .iter()
            .map(|o| o.recurring_residues(k))
            .collect();

        let mut subsets: Vec<Vec<usize>> = (1u32..(1 << k))
            .map(|mask| (0..k).filter(|r| mask & (1 << r) != 0).collect())
            .collect();
        subsets.sort();

        let mut out = Vec::new();
        for subset in subsets {
            let base_m = subset.iter().map(|&r| residue_m[r]).max().unwrap();
            let hitting: Vec<usize> = (0..self.overrides.len())
                .filter(|&i| subset.iter().any(|r| recurring[i].contains(r)))
                .collect();
            let (optional, forced): (Vec<usize>, Vec<usize>) = hitting
                .iter()
                .partition(|&&i| self.overrides[i].form.summability_index().is_finite());

            for choice in 0u32..(1 << optional.len()) {
                let included: Vec<usize> = optional
                    .iter()
                    .enumerate()
                    .filter(|(bit, _)| choice & (1 << bit) != 0)
                    .map(|(_, &i)| i)
                    .collect();
                let mut excluded: Vec<usize> = forced
                    .iter()
                    .chain(optional.iter())
                    .copied()
                    .filter(|i| !included.contains(i))
                    .collect();
                excluded.sort_unstable();

                let m_value = included
                    .iter()
                    .map(|&i| self.overrides[i].form.summability_index())
                    .fold(base_m, ExtendedNat::max);
                let holes: BTreeSet<usize> = excluded
                    .iter()
                    .flat_map(|&i| recurring[i].iter().copied())
                    .filter(|r| subset.contains(r))
                    .collect();
                let l_value = ExtendedNat::Finite(max_recurring_gap(&subset, &holes, k));
                out.push(SubseqAnalysis {
                    residue_subset: subset.clone(),
                    included_overrides: included,
                    excluded_overrides: excluded,
                    m_value,
                    l_value,
                    in_dc: m_value.is_finite(),
                });
            }
        }
        out
    }

    /// `L0` (smallest recurring gap) and `L1` (smallest gap times `m`) over
    /// subsequences with finite `m`. Override families on their own have unbounded
    /// gaps and never minimize.
    pub fn lifetime_thresholds(&self) -> LifetimeThresholds {
        let candidates: Vec<SubseqAnalysis> = self
            .subsequence_analyses()
            .into_iter()
            .filter(|a| a.in_dc)
            .collect();
        // min_by_key keeps the first minimum, i.e. the lexicographically smallest subset
        let w0 = candidates.iter().min_by_key(|a| a.l_value);
        let w1 = candidates.iter().min_by_key(|a| a.l_value * a.m_value);
        let l0 = w0.map_or(ExtendedNat::Infinite, |a| a.l_value);
        let l1 = w1.map_or(ExtendedNat::Infinite, |a| a.l_value * a.m_value);
        let mut witnesses: Vec<SubseqAnalysis> = w0.into_iter().cloned().collect();
        if let Some(w) = w1 {
            if Some(w) != w0 {
                witnesses.push(w.clone());
            }
        }
        LifetimeThresholds { l0, l1, witnesses }
    }
}

fn check_value(index: u64, value: f64) -> Result<(), SpecError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(SpecError::ValueOutOfRange { index, value })
    }
}

/// Largest gap between consecutive selected indices that recurs in every period.
/// A hole at residue `r` merges the gaps on either side of `r`.
fn max_recurring_gap(subset: &[usize], holes: &BTreeSet<usize>, k: usize) -> u64 {
    let t = subset.len();
    let gap_after = |i: usize| -> usize {
        if i + 1 < t {
            subset[i + 1] - subset[i]
        } else {
            subset[0] + k - subset[t - 1]
        }
    };
    let mut best = (0..t).map(gap_after).max().unwrap();
    for (i, r) in subset.iter().enumerate() {
        if holes.contains(r) {
            let before = gap_after((i + t - 1) % t);
            best = best.max(before + gap_after(i));
        }
    }
    best as u64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ResidueEntry {
    r: usize,
    form: PrimitiveForm,
}

/// Wire form of a [`SequenceSpec`]; converting it runs full validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecDocument {
    modulus: usize,
    residues: Vec<ResidueEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    overrides: Vec<SparseOverride>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    head: Vec<f64>,
}

impl TryFrom<SpecDocument> for SequenceSpec {
    type Error = SpecError;

    fn try_from(doc: SpecDocument) -> Result<Self, SpecError> {
        if doc.modulus == 0 {
            return Err(SpecError::ZeroModulus);
        }
        if doc.modulus > MAX_MODULUS {
            return Err(SpecError::ModulusTooLarge(doc.modulus));
        }
        let mut slots: Vec<Option<PrimitiveForm>> = vec![None; doc.modulus];
        for entry in doc.residues {
            let slot = slots.get_mut(entry.r).ok_or(SpecError::ResidueOutOfRange {
                r: entry.r,
                modulus: doc.modulus,
            })?;
            if slot.is_some() {
                return Err(SpecError::DuplicateResidue(entry.r));
            }
            *slot = Some(entry.form);
        }
        let forms = slots
            .into_iter()
            .enumerate()
            .map(|(r, f)| f.ok_or(SpecError::MissingResidue(r)))
            .collect::<Result<Vec<_>, _>>()?;
        SequenceSpec::build(forms, doc.overrides, doc.head)
    }
}

impl From<SequenceSpec> for SpecDocument {
    fn from(spec: SequenceSpec) -> Self {
        SpecDocument {
            modulus: spec.modulus,
            residues: spec
                .residues
                .into_iter()
                .enumerate()
                .map(|(r, form)| ResidueEntry { r, form })
                .collect(),
            overrides: spec.overrides,
            head: spec.head,
        }
    }
}
