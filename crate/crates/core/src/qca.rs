//! Fuzzy-set qualitative comparative analysis.
//!
//! Direct calibration into set memberships, truth-table construction with
//! frequency and consistency thresholds, exact Quine-McCluskey minimization
//! (parsimonious, intermediate, complex), and the standard fuzzy subset
//! metrics:
//!
//! * consistency = sum(min(X, Y)) / sum(X)
//! * raw coverage = sum(min(X, Y)) / sum(Y)
//! * unique coverage = (sum(min(S, Y)) - sum(min(S without X, Y))) / sum(Y)
//!
//! where a term's membership X is the minimum over its literals and a
//! solution's membership S is the maximum over its terms.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

pub const MAX_CONDITIONS: usize = 16;
pub const DEFAULT_FREQUENCY: usize = 1;
pub const DEFAULT_CONSISTENCY: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QcaError {
    #[error("degenerate anchors: need full non-membership {lo} < crossover {mid} < full membership {hi}")]
    DegenerateAnchors { lo: f64, mid: f64, hi: f64 },
    #[error("calibration targets must satisfy 0 < low < 0.5 < high < 1")]
    BadTargets,
    #[error("no values to calibrate")]
    NoValues,
    #[error("case `{case}` has {got} memberships for {expected} conditions")]
    MissingCondition { case: String, expected: usize, got: usize },
    #[error("membership {value} for `{what}` is outside [0, 1]")]
    BadMembership { what: String, value: f64 },
    #[error("{0} conditions exceed the limit of {MAX_CONDITIONS}")]
    TooManyConditions(usize),
    #[error("at least one condition is required")]
    NoConditions,
    #[error("expectations cover {got} conditions, table has {expected}")]
    ExpectationWidth { expected: usize, got: usize },
    #[error("column `{column}` cannot be calibrated: {reason}")]
    Column { column: String, reason: String },
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationAnchors {
    pub full_non_membership: f64,
    pub crossover: f64,
    pub full_membership: f64,
    /// Target memberships at the three anchors.
    pub targets: [f64; 3],
}

impl CalibrationAnchors {
    pub fn new(full_non_membership: f64, crossover: f64, full_membership: f64) -> Result<Self, QcaError> {
        Self::with_targets(full_non_membership, crossover, full_membership, [0.05, 0.5, 0.95])
    }

    pub fn with_targets(lo: f64, mid: f64, hi: f64, targets: [f64; 3]) -> Result<Self, QcaError> {
        if !(lo < mid && mid < hi) {
            return Err(QcaError::DegenerateAnchors { lo, mid, hi });
        }
        let [a, b, c] = targets;
        if !(0.0 < a && a < b && b < c && c < 1.0) || b != 0.5 {
            return Err(QcaError::BadTargets);
        }
        Ok(Self { full_non_membership: lo, crossover: mid, full_membership: hi, targets })
    }

    /// Observed minimum, median and maximum.
    pub fn from_values(values: &[f64]) -> Result<Self, QcaError> {
        if values.is_empty() {
            return Err(QcaError::NoValues);
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
        Self::new(v[0], median, v[n - 1])
    }

    /// Log-odds interpolation between anchors, clipped beyond them.
    pub fn membership(&self, x: f64) -> f64 {
        let [t_lo, t_mid, t_hi] = self.targets;
        let logit = |p: f64| (p / (1.0 - p)).ln();
        if x <= self.full_non_membership {
            return t_lo;
        }
        if x >= self.full_membership {
            return t_hi;
        }
        if x == self.crossover {
            return t_mid;
        }
        let z = if x < self.crossover {
            let f = (x - self.full_non_membership) / (self.crossover - self.full_non_membership);
            logit(t_lo) * (1.0 - f)
        } else {
            let f = (x - self.crossover) / (self.full_membership - self.crossover);
            logit(t_hi) * f
        };
        1.0 / (1.0 + (-z).exp())
    }
}

pub fn calibrate_direct(values: &[f64], anchors: &CalibrationAnchors) -> Vec<f64> {
    values.iter().map(|&x| anchors.membership(x)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub id: String,
    pub memberships: Vec<f64>,
    pub outcome: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyCaseSet {
    pub conditions: Vec<String>,
    pub outcome: String,
    pub cases: Vec<Case>,
}

impl FuzzyCaseSet {
    pub fn new(conditions: Vec<String>, outcome: &str, cases: Vec<Case>) -> Result<Self, QcaError> {
        if conditions.is_empty() {
            return Err(QcaError::NoConditions);
        }
        let unit = |what: String, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(QcaError::BadMembership { what, value: v })
            }
        };
        for c in &cases {
            if c.memberships.len() != conditions.len() {
                return Err(QcaError::MissingCondition {
                    case: c.id.clone(),
                    expected: conditions.len(),
                    got: c.memberships.len(),
                });
            }
            for (name, &m) in conditions.iter().zip(&c.memberships) {
                unit(format!("{}.{name}", c.id), m)?;
            }
            unit(format!("{}.{outcome}", c.id), c.outcome)?;
        }
        Ok(Self { conditions, outcome: outcome.into(), cases })
    }

    pub fn k(&self) -> usize {
        self.conditions.len()
    }
}

/// Condition flags of truth-table row `index`; the first condition is the
/// most significant bit.
pub fn row_combination(index: usize, k: usize) -> Vec<bool> {
    (0..k).map(|i| index >> (k - 1 - i) & 1 == 1).collect()
}

/// Fuzzy AND over the row: membership where present, its negation where absent.
pub fn row_membership(memberships: &[f64], row: &[bool]) -> Result<f64, QcaError> {
    if memberships.len() != row.len() {
        return Err(QcaError::MissingCondition { case: String::new(), expected: row.len(), got: memberships.len() });
    }
    Ok(memberships
        .iter()
        .zip(row)
        .map(|(&m, &present)| if present { m } else { 1.0 - m })
        .fold(1.0, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Positive,
    Negative,
    Remainder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub index: usize,
    pub combination: Vec<bool>,
    /// Cases with row membership above 0.5.
    pub count: usize,
    /// `None` when no case has any membership in the row.
    pub consistency: Option<f64>,
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTable {
    pub conditions: Vec<String>,
    pub rows: Vec<TruthRow>,
    pub frequency: usize,
    pub consistency: f64,
}

impl TruthTable {
    pub fn k(&self) -> usize {
        self.conditions.len()
    }

    pub fn indices(&self, status: RowStatus) -> Vec<usize> {
        self.rows.iter().filter(|r| r.status == status).map(|r| r.index).collect()
    }

    /// A table with explicit statuses, as used for crisp what-if analyses.
    pub fn from_statuses(conditions: Vec<String>, statuses: &[RowStatus]) -> Result<Self, QcaError> {
        let k = conditions.len();
        if k == 0 {
            return Err(QcaError::NoConditions);
        }
        if k > MAX_CONDITIONS {
            return Err(QcaError::TooManyConditions(k));
        }
        assert_eq!(statuses.len(), 1 << k, "one status per row");
        let rows = statuses
            .iter()
            .enumerate()
            .map(|(index, &status)| TruthRow {
                index,
                combination: row_combination(index, k),
                count: usize::from(status != RowStatus::Remainder),
                consistency: match status {
                    RowStatus::Positive => Some(1.0),
                    RowStatus::Negative => Some(0.0),
                    RowStatus::Remainder => None,
                },
                status,
            })
            .collect();
        Ok(Self { conditions, rows, frequency: DEFAULT_FREQUENCY, consistency: DEFAULT_CONSISTENCY })
    }
}

pub fn build_truth_table(cs: &FuzzyCaseSet, frequency: usize, consistency: f64) -> Result<TruthTable, QcaError> {
    let k = cs.k();
    if k > MAX_CONDITIONS {
        return Err(QcaError::TooManyConditions(k));
    }
    let rows = (0..1usize << k)
        .map(|index| {
            let combination = row_combination(index, k);
            let mut count = 0;
            let mut sum_row = 0.0;
            let mut sum_both = 0.0;
            for c in &cs.cases {
                let m = row_membership(&c.memberships, &combination).expect("validated width");
                count += usize::from(m > 0.5);
                sum_row += m;
                sum_both += m.min(c.outcome);
            }
            let cons = (sum_row > 0.0).then(|| sum_both / sum_row);
            let status = if count < frequency.max(1) {
                RowStatus::Remainder
            } else if cons.unwrap_or(0.0) >= consistency {
                RowStatus::Positive
            } else {
                RowStatus::Negative
            };
            TruthRow { index, combination, count, consistency: cons, status }
        })
        .collect();
    Ok(TruthTable { conditions: cs.conditions.clone(), rows, frequency, consistency })
}

/// Product term: `mask` bits are the conditions it constrains, `value` their required states.
/// Bit `k - 1 - i` corresponds to condition `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Implicant {
    pub k: usize,
    pub value: u32,
    pub mask: u32,
}

impl Implicant {
    pub fn minterm(index: usize, k: usize) -> Self {
        Self { k, value: index as u32, mask: (1u32 << k) - 1 }
    }

    pub fn covers(&self, index: usize) -> bool {
        (index as u32 & self.mask) == self.value
    }

    pub fn literal_count(&self) -> usize {
        self.mask.count_ones() as usize
    }

    /// Per condition: `Some(true)` present, `Some(false)` absent, `None` don't care.
    pub fn literal(&self, condition: usize) -> Option<bool> {
        let bit = 1u32 << (self.k - 1 - condition);
        (self.mask & bit != 0).then_some(self.value & bit != 0)
    }

    /// `self` covers every row `other` covers.
    pub fn subsumes(&self, other: &Implicant) -> bool {
        self.mask & other.mask == self.mask && other.value & self.mask == self.value
    }

    /// Fuzzy membership of a case in this term.
    pub fn membership(&self, memberships: &[f64]) -> f64 {
        (0..self.k).fold(1.0, |acc, i| match self.literal(i) {
            Some(true) => acc.min(memberships[i]),
            Some(false) => acc.min(1.0 - memberships[i]),
            None => acc,
        })
    }

    /// `'1'` present, `'0'` absent, `'-'` don't care, first condition first.
    pub fn pattern(&self) -> String {
        (0..self.k)
            .map(|i| match self.literal(i) {
                Some(true) => '1',
                Some(false) => '0',
                None => '-',
            })
            .collect()
    }

    pub fn expression(&self, conditions: &[String]) -> String {
        let lits: Vec<String> = (0..self.k)
            .filter_map(|i| self.literal(i).map(|p| if p { conditions[i].clone() } else { format!("~{}", conditions[i]) }))
            .collect();
        if lits.is_empty() {
            "1".into()
        } else {
            lits.join("*")
        }
    }
}

/// All prime implicants of `on ∪ dc` that cover at least one `on` row, sorted by pattern.
pub fn prime_implicants(k: usize, on: &[usize], dc: &[usize]) -> Vec<Implicant> {
    let mut level: HashSet<Implicant> = on.iter().chain(dc).map(|&i| Implicant::minterm(i, k)).collect();
    let mut primes: BTreeSet<(String, u32, u32)> = BTreeSet::new();
    while !level.is_empty() {
        let mut next = HashSet::new();
        let mut merged = HashSet::new();
        for imp in &level {
            for b in 0..k {
                let bit = 1u32 << b;
                if imp.mask & bit == 0 || imp.value & bit != 0 {
                    continue;
                }
                let partner = Implicant { value: imp.value | bit, ..*imp };
                if level.contains(&partner) {
                    merged.insert(*imp);
                    merged.insert(partner);
                    next.insert(Implicant { k, value: imp.value, mask: imp.mask & !bit });
                }
            }
        }
        for imp in &level {
            if !merged.contains(imp) {
                primes.insert((imp.pattern(), imp.value, imp.mask));
            }
        }
        level = next;
    }
    primes
        .into_iter()
        .map(|(_, value, mask)| Implicant { k, value, mask })
        .filter(|p| on.iter().any(|&i| p.covers(i)))
        .collect()
}

fn cover_key(cover: &[Implicant]) -> (usize, usize, Vec<String>) {
    let lits = cover.iter().map(Implicant::literal_count).sum();
    let mut pats: Vec<String> = cover.iter().map(Implicant::pattern).collect();
    pats.sort();
    (cover.len(), lits, pats)
}

struct CoverSearch<'a> {
    on: &'a [usize],
    primes: &'a [Implicant],
    /// For each `on` row, the primes covering it.
    coverers: Vec<Vec<usize>>,
    best: Option<(Vec<usize>, (usize, usize, Vec<String>))>,
}

impl CoverSearch<'_> {
    fn key(&self, chosen: &[usize]) -> (usize, usize, Vec<String>) {
        let terms: Vec<Implicant> = chosen.iter().map(|&p| self.primes[p]).collect();
        cover_key(&terms)
    }

    fn search(&mut self, chosen: &mut Vec<usize>, covered: &mut Vec<u32>) {
        let lits: usize = chosen.iter().map(|&p| self.primes[p].literal_count()).sum();
        if let Some((_, (bc, bl, _))) = &self.best {
            if (chosen.len(), lits) > (*bc, *bl) {
                return;
            }
        }
        // Uncovered row with the fewest covering primes.
        let pick = (0..self.on.len()).filter(|&r| covered[r] == 0).min_by_key(|&r| self.coverers[r].len());
        let Some(row) = pick else {
            let key = self.key(chosen);
            if self.best.as_ref().is_none_or(|(_, b)| key < *b) {
                let mut c = chosen.clone();
                c.sort_unstable();
                self.best = Some((c, key));
            }
            return;
        };
        if let Some((_, (bc, _, _))) = &self.best {
            if chosen.len() + 1 > *bc {
                return;
            }
        }
        for ci in 0..self.coverers[row].len() {
            let p = self.coverers[row][ci];
            chosen.push(p);
            for (r, &i) in self.on.iter().enumerate() {
                if self.primes[p].covers(i) {
                    covered[r] += 1;
                }
            }
            self.search(chosen, covered);
            for (r, &i) in self.on.iter().enumerate() {
                if self.primes[p].covers(i) {
                    covered[r] -= 1;
                }
            }
            chosen.pop();
        }
    }
}

/// Exact minimum cover of `on` by `primes`: fewest terms, then fewest
/// literals, then lexicographically smallest sorted pattern list.
pub fn minimum_cover(on: &[usize], primes: &[Implicant]) -> Vec<Implicant> {
    if on.is_empty() {
        return Vec::new();
    }
    let coverers: Vec<Vec<usize>> =
        on.iter().map(|&i| (0..primes.len()).filter(|&p| primes[p].covers(i)).collect()).collect();
    // Essential primes belong to every cover.
    let mut chosen: Vec<usize> = coverers.iter().filter(|c| c.len() == 1).map(|c| c[0]).collect();
    chosen.sort_unstable();
    chosen.dedup();
    let mut covered: Vec<u32> =
        on.iter().map(|&i| chosen.iter().filter(|&&p| primes[p].covers(i)).count() as u32).collect();
    let mut s = CoverSearch { on, primes, coverers, best: None };
    s.search(&mut chosen, &mut covered);
    let (best, _) = s.best.expect("primes cover every on row");
    let mut terms: Vec<Implicant> = best.into_iter().map(|p| primes[p]).collect();
    terms.sort_by_key(Implicant::pattern);
    terms
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    Complex,
    Parsimonious,
    Intermediate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionTerm {
    pub implicant: Implicant,
    pub pattern: String,
    pub expression: String,
    pub consistency: f64,
    pub raw_coverage: f64,
    pub unique_coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSet {
    pub kind: SolutionKind,
    pub conditions: Vec<String>,
    pub terms: Vec<SolutionTerm>,
    /// Remainder rows used as don't-cares.
    pub remainders_used: Vec<usize>,
    pub consistency: f64,
    pub coverage: f64,
    /// The table had no positive rows; `terms` is empty.
    pub empty: bool,
}

impl SolutionSet {
    pub fn implicants(&self) -> Vec<Implicant> {
        self.terms.iter().map(|t| t.implicant).collect()
    }

    pub fn patterns(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.pattern.clone()).collect()
    }
}

impl fmt::Display for SolutionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.empty {
            return f.write_str("(no positive configurations)");
        }
        let exprs: Vec<String> = self.terms.iter().map(|t| t.expression.clone()).collect();
        f.write_str(&exprs.join(" + "))
    }
}

fn solve(tt: &TruthTable, kind: SolutionKind, dc: Vec<usize>) -> SolutionSet {
    let k = tt.k();
    let on = tt.indices(RowStatus::Positive);
    let implicants = if on.is_empty() { Vec::new() } else { minimum_cover(&on, &prime_implicants(k, &on, &dc)) };
    let terms = implicants
        .iter()
        .map(|imp| SolutionTerm {
            implicant: *imp,
            pattern: imp.pattern(),
            expression: imp.expression(&tt.conditions),
            consistency: 0.0,
            raw_coverage: 0.0,
            unique_coverage: 0.0,
        })
        .collect();
    let used = dc.into_iter().filter(|&r| implicants.iter().any(|t| t.covers(r))).collect();
    SolutionSet {
        kind,
        conditions: tt.conditions.clone(),
        terms,
        remainders_used: used,
        consistency: 0.0,
        coverage: 0.0,
        empty: on.is_empty(),
    }
}

/// Positive rows only, no simplifying assumptions.
pub fn minimize_complex(tt: &TruthTable) -> SolutionSet {
    solve(tt, SolutionKind::Complex, Vec::new())
}

/// Every remainder is available as a don't-care.
pub fn minimize_parsimonious(tt: &TruthTable) -> SolutionSet {
    solve(tt, SolutionKind::Parsimonious, tt.indices(RowStatus::Remainder))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Present,
    Absent,
    None,
}

/// Remainders enter as don't-cares only when they agree with every stated expectation.
pub fn minimize_intermediate(tt: &TruthTable, expectations: &[Expectation]) -> Result<SolutionSet, QcaError> {
    if expectations.len() != tt.k() {
        return Err(QcaError::ExpectationWidth { expected: tt.k(), got: expectations.len() });
    }
    let easy = tt
        .rows
        .iter()
        .filter(|r| r.status == RowStatus::Remainder)
        .filter(|r| {
            r.combination.iter().zip(expectations).all(|(&present, e)| match e {
                Expectation::Present => present,
                Expectation::Absent => !present,
                Expectation::None => true,
            })
        })
        .map(|r| r.index)
        .collect();
    Ok(solve(tt, SolutionKind::Intermediate, easy))
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Fills term and solution consistency and coverage from case memberships.
pub fn solution_metrics(sol: &SolutionSet, cs: &FuzzyCaseSet) -> SolutionSet {
    let mut out = sol.clone();
    let term_m: Vec<Vec<f64>> =
        sol.terms.iter().map(|t| cs.cases.iter().map(|c| t.implicant.membership(&c.memberships)).collect()).collect();
    let y: Vec<f64> = cs.cases.iter().map(|c| c.outcome).collect();
    let sum_y: f64 = y.iter().sum();
    let solution_m = |skip: Option<usize>| -> Vec<f64> {
        (0..y.len())
            .map(|ci| {
                term_m.iter().enumerate().filter(|(t, _)| Some(*t) != skip).map(|(_, m)| m[ci]).fold(0.0, f64::max)
            })
            .collect()
    };
    let overlap = |m: &[f64]| m.iter().zip(&y).map(|(a, b)| a.min(*b)).sum::<f64>();
    let full = solution_m(None);
    let full_overlap = overlap(&full);
    for (t, term) in out.terms.iter_mut().enumerate() {
        let m = &term_m[t];
        let o = overlap(m);
        term.consistency = ratio(o, m.iter().sum());
        term.raw_coverage = ratio(o, sum_y);
        let without = overlap(&solution_m(Some(t)));
        term.unique_coverage = ratio(full_overlap - without, sum_y).min(term.raw_coverage);
    }
    out.consistency = ratio(full_overlap, full.iter().sum());
    out.coverage = ratio(full_overlap, sum_y);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Presence {
    CorePresent,
    CoreAbsent,
    PeripheralPresent,
    PeripheralAbsent,
    DontCare,
}

impl Presence {
    pub fn symbol(&self) -> &'static str {
        match self {
            Presence::CorePresent => "C+",
            Presence::CoreAbsent => "C-",
            Presence::PeripheralPresent => "p+",
            Presence::PeripheralAbsent => "p-",
            Presence::DontCare => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTerm {
    pub pattern: String,
    pub expression: String,
    /// One entry per condition.
    pub presence: Vec<Presence>,
    pub consistency: f64,
    pub raw_coverage: f64,
    pub unique_coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcaReport {
    pub conditions: Vec<String>,
    pub outcome: String,
    pub frequency: usize,
    pub consistency_threshold: f64,
    pub truth_table: TruthTable,
    pub parsimonious: SolutionSet,
    pub intermediate: SolutionSet,
    pub terms: Vec<ReportTerm>,
    pub solution_consistency: f64,
    pub solution_coverage: f64,
}

/// Full analysis: truth table, both solutions with metrics, and the
/// configuration chart. A literal of an intermediate term is core when a
/// parsimonious term subsuming that intermediate term carries it too;
/// otherwise it is peripheral.
pub fn analyze(
    cs: &FuzzyCaseSet,
    frequency: usize,
    consistency: f64,
    expectations: &[Expectation],
) -> Result<QcaReport, QcaError> {
    let tt = build_truth_table(cs, frequency, consistency)?;
    let pars = solution_metrics(&minimize_parsimonious(&tt), cs);
    let inter = solution_metrics(&minimize_intermediate(&tt, expectations)?, cs);
    let terms = inter
        .terms
        .iter()
        .map(|t| {
            let parents: Vec<&Implicant> =
                pars.terms.iter().map(|p| &p.implicant).filter(|p| p.subsumes(&t.implicant)).collect();
            let presence = (0..cs.k())
                .map(|i| match t.implicant.literal(i) {
                    None => Presence::DontCare,
                    Some(v) => {
                        let core = parents.iter().any(|p| p.literal(i) == Some(v));
                        match (core, v) {
                            (true, true) => Presence::CorePresent,
                            (true, false) => Presence::CoreAbsent,
                            (false, true) => Presence::PeripheralPresent,
                            (false, false) => Presence::PeripheralAbsent,
                        }
                    }
                })
                .collect();
            ReportTerm {
                pattern: t.pattern.clone(),
                expression: t.expression.clone(),
                presence,
                consistency: t.consistency,
                raw_coverage: t.raw_coverage,
                unique_coverage: t.unique_coverage,
            }
        })
        .collect();
    Ok(QcaReport {
        conditions: cs.conditions.clone(),
        outcome: cs.outcome.clone(),
        frequency,
        consistency_threshold: consistency,
        solution_consistency: inter.consistency,
        solution_coverage: inter.coverage,
        truth_table: tt,
        parsimonious: pars,
        intermediate: inter,
        terms,
    })
}

impl fmt::Display for QcaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "outcome: {}", self.outcome)?;
        writeln!(f, "parsimonious: {}", self.parsimonious)?;
        writeln!(f, "intermediate: {}", self.intermediate)?;
        let width = self.conditions.iter().map(String::len).max().unwrap_or(0).max(24);
        write!(f, "{:<width$}", "")?;
        for i in 0..self.terms.len() {
            write!(f, " {:>7}", format!("S{}", i + 1))?;
        }
        writeln!(f)?;
        for (ci, c) in self.conditions.iter().enumerate() {
            write!(f, "{c:<width$}")?;
            for t in &self.terms {
                write!(f, " {:>7}", t.presence[ci].symbol())?;
            }
            writeln!(f)?;
        }
        for (label, get) in [
            ("consistency", (|t: &ReportTerm| t.consistency) as fn(&ReportTerm) -> f64),
            ("raw coverage", |t| t.raw_coverage),
            ("unique coverage", |t| t.unique_coverage),
        ] {
            write!(f, "{label:<width$}")?;
            for t in &self.terms {
                write!(f, " {:>7.3}", get(t))?;
            }
            writeln!(f)?;
        }
        writeln!(f, "{:<width$} {:.3}", "overall solution consistency", self.solution_consistency)?;
        writeln!(f, "{:<width$} {:.3}", "overall solution coverage", self.solution_coverage)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCases {
    pub ids: Vec<String>,
    pub conditions: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub outcome: String,
    pub outcome_values: Vec<f64>,
}

/// Reads `case_id, condition..., outcome` with raw numeric values.
pub fn read_raw_cases<R: Read>(input: R) -> Result<RawCases, QcaError> {
    let csv_err = |e: csv::Error| QcaError::Csv(e.to_string());
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header.len() < 3 {
        return Err(QcaError::Csv("need a case id column, at least one condition and an outcome".into()));
    }
    let conditions = header[1..header.len() - 1].to_vec();
    let outcome = header[header.len() - 1].clone();
    let mut raw = RawCases { ids: Vec::new(), conditions, values: Vec::new(), outcome, outcome_values: Vec::new() };
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let parse = |i: usize| -> Result<f64, QcaError> {
            rec[i].trim().parse::<f64>().map_err(|e| {
                QcaError::Csv(format!("row {} column `{}`: {e}", line + 1, header[i]))
            })
        };
        raw.ids.push(rec[0].to_string());
        raw.values.push((1..header.len() - 1).map(parse).collect::<Result<_, _>>()?);
        raw.outcome_values.push(parse(header.len() - 1)?);
    }
    Ok(raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    /// Columns already hold memberships in [0, 1].
    Precalibrated,
    /// Crisp 0/1 columns pass through; the rest are calibrated on their min/median/max.
    Direct,
}

fn calibrate_column(name: &str, values: &[f64], mode: CalibrationMode) -> Result<(Vec<f64>, Option<CalibrationAnchors>), QcaError> {
    let is_unit = values.iter().all(|v| (0.0..=1.0).contains(v));
    let is_crisp = values.iter().all(|&v| v == 0.0 || v == 1.0);
    match mode {
        CalibrationMode::Precalibrated if is_unit => Ok((values.to_vec(), None)),
        CalibrationMode::Precalibrated => Err(QcaError::Column {
            column: name.into(),
            reason: "values outside [0, 1]".into(),
        }),
        CalibrationMode::Direct if is_crisp => Ok((values.to_vec(), None)),
        CalibrationMode::Direct => {
            let anchors = CalibrationAnchors::from_values(values)
                .map_err(|e| QcaError::Column { column: name.into(), reason: e.to_string() })?;
            Ok((calibrate_direct(values, &anchors), Some(anchors)))
        }
    }
}

/// Calibrated case set plus the anchors used per calibrated column.
pub fn calibrate_cases(
    raw: &RawCases,
    mode: CalibrationMode,
) -> Result<(FuzzyCaseSet, BTreeMap<String, CalibrationAnchors>), QcaError> {
    let mut anchors = BTreeMap::new();
    let mut columns = Vec::new();
    for (j, name) in raw.conditions.iter().enumerate() {
        let col: Vec<f64> = raw.values.iter().map(|r| r[j]).collect();
        let (m, a) = calibrate_column(name, &col, mode)?;
        if let Some(a) = a {
            anchors.insert(name.clone(), a);
        }
        columns.push(m);
    }
    let (outcome, a) = calibrate_column(&raw.outcome, &raw.outcome_values, mode)?;
    if let Some(a) = a {
        anchors.insert(raw.outcome.clone(), a);
    }
    let cases = raw
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| Case { id: id.clone(), memberships: columns.iter().map(|c| c[i]).collect(), outcome: outcome[i] })
        .collect();
    Ok((FuzzyCaseSet::new(raw.conditions.clone(), &raw.outcome, cases)?, anchors))
}

/// Orders implicant lists the way minimal covers are tie-broken.
pub fn compare_covers(a: &[Implicant], b: &[Implicant]) -> Ordering {
    cover_key(a).cmp(&cover_key(b))
}
