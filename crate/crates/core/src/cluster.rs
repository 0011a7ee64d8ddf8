//! k-modes clustering of categorical rows and silhouette-based choice of k.
//!
//! Two dissimilarities are available: simple matching (Hamming) between two
//! rows, and the frequency-weighted distance between a row and a cluster,
//! where a matching attribute costs `1 - n_j^r / n_l` (the share of cluster
//! members that do not carry the value) and a mismatch costs 1.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::schema::{FeatureRow, Taxonomy};
use crate::seed;

/// One value per attribute. For one-hot data each bit is an attribute.
pub type CategoricalRow = Vec<u32>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("rows have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("cluster is empty")]
    EmptyCluster,
    #[error("k = {k} is invalid for {distinct} distinct rows")]
    InvalidK { k: usize, distinct: usize },
    #[error("silhouette needs at least 2 clusters, got {0}")]
    TooFewClusters(usize),
    #[error("need at least 2 distinct rows, got {0}")]
    TooFewDistinct(usize),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

pub fn hamming(a: &[u32], b: &[u32]) -> Result<usize, ClusterError> {
    if a.len() != b.len() {
        return Err(ClusterError::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(mismatches(a, b))
}

fn mismatches(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Per-cluster mode and value counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub mode: CategoricalRow,
    pub size: usize,
    /// `freq[j][r]` = number of members whose attribute `j` equals `r`.
    pub freq: Vec<BTreeMap<u32, usize>>,
}

impl ClusterSummary {
    /// Summarizes member rows. Mode ties go to the smallest value.
    pub fn from_rows<'a, I>(members: I, width: usize) -> Result<Self, ClusterError>
    where
        I: IntoIterator<Item = &'a [u32]>,
    {
        let mut freq = vec![BTreeMap::new(); width];
        let mut size = 0;
        for row in members {
            if row.len() != width {
                return Err(ClusterError::LengthMismatch { left: width, right: row.len() });
            }
            for (j, v) in row.iter().enumerate() {
                *freq[j].entry(*v).or_insert(0) += 1;
            }
            size += 1;
        }
        if size == 0 {
            return Err(ClusterError::EmptyCluster);
        }
        let mode = freq
            .iter()
            .map(|counts| {
                // BTreeMap iterates ascending, so the first maximum is the smallest value.
                let mut best = (0u32, 0usize);
                for (&v, &n) in counts {
                    if n > best.1 {
                        best = (v, n);
                    }
                }
                best.0
            })
            .collect();
        Ok(Self { mode, size, freq })
    }

    pub fn count(&self, attribute: usize, value: u32) -> usize {
        self.freq[attribute].get(&value).copied().unwrap_or(0)
    }
}

/// Frequency-weighted dissimilarity between a row and a cluster.
pub fn center_dissimilarity(x: &[u32], c: &ClusterSummary) -> Result<f64, ClusterError> {
    if c.size == 0 {
        return Err(ClusterError::EmptyCluster);
    }
    if x.len() != c.mode.len() {
        return Err(ClusterError::LengthMismatch { left: x.len(), right: c.mode.len() });
    }
    Ok(phi(x, c))
}

fn phi(x: &[u32], c: &ClusterSummary) -> f64 {
    let n = c.size as f64;
    x.iter()
        .zip(&c.mode)
        .enumerate()
        .map(|(j, (xv, zv))| if xv == zv { 1.0 - c.count(j, *xv) as f64 / n } else { 1.0 })
        .sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Simple matching against the cluster mode.
    #[default]
    Hamming,
    /// Frequency-weighted matching against the cluster summary.
    Frequency,
}

impl Metric {
    fn to_center(self, x: &[u32], c: &ClusterSummary) -> f64 {
        match self {
            Metric::Hamming => mismatches(x, &c.mode) as f64,
            Metric::Frequency => phi(x, c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KModesParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub restarts: usize,
    pub metric: Metric,
}

impl KModesParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { k, seed, max_iter: 100, restarts: 10, metric: Metric::Hamming }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub summaries: Vec<ClusterSummary>,
    pub cost: f64,
    pub iterations: usize,
    pub seed: u64,
    pub metric: Metric,
    /// Index of the restart that produced this result.
    pub restart: usize,
    /// Total cost after every assign-then-update pass of that restart.
    pub cost_history: Vec<f64>,
}

impl Clustering {
    pub fn sizes(&self) -> Vec<usize> {
        self.summaries.iter().map(|s| s.size).collect()
    }

    /// Cost recomputed from scratch under the fit metric.
    pub fn recompute_cost(&self, rows: &[CategoricalRow]) -> f64 {
        total_cost(rows, &self.assignments, &self.summaries, self.metric)
    }
}

fn check_rows(rows: &[CategoricalRow]) -> Result<usize, ClusterError> {
    let first = rows.first().ok_or(ClusterError::EmptyDataset)?;
    let width = first.len();
    for r in rows {
        if r.len() != width {
            return Err(ClusterError::LengthMismatch { left: width, right: r.len() });
        }
    }
    Ok(width)
}

fn distinct_rows(rows: &[CategoricalRow]) -> Vec<&CategoricalRow> {
    rows.iter().collect::<BTreeSet<_>>().into_iter().collect()
}

pub fn distinct_count(rows: &[CategoricalRow]) -> usize {
    distinct_rows(rows).len()
}

fn summarize(
    rows: &[CategoricalRow],
    assignments: &[usize],
    k: usize,
    width: usize,
) -> Vec<Option<ClusterSummary>> {
    let mut members: Vec<Vec<&[u32]>> = vec![Vec::new(); k];
    for (row, &c) in rows.iter().zip(assignments) {
        members[c].push(row);
    }
    members
        .into_iter()
        .map(|m| ClusterSummary::from_rows(m, width).ok())
        .collect()
}

/// Recomputes summaries, refilling any empty cluster with the row that is
/// farthest from its current center.
fn update(
    rows: &[CategoricalRow],
    assignments: &mut [usize],
    k: usize,
    width: usize,
    metric: Metric,
) -> Vec<ClusterSummary> {
    loop {
        let summaries = summarize(rows, assignments, k, width);
        let Some(empty) = summaries.iter().position(Option::is_none) else {
            return summaries.into_iter().map(Option::unwrap).collect();
        };
        let mut farthest: Option<(f64, usize)> = None;
        for (i, row) in rows.iter().enumerate() {
            let Some(own) = &summaries[assignments[i]] else { continue };
            if own.size < 2 {
                continue;
            }
            let d = metric.to_center(row, own);
            let better = match farthest {
                None => true,
                Some((bd, bi)) => d > bd || (d == bd && row < &rows[bi]),
            };
            if better {
                farthest = Some((d, i));
            }
        }
        let (_, i) = farthest.expect("k <= distinct rows leaves a movable row");
        assignments[i] = empty;
    }
}

fn total_cost(
    rows: &[CategoricalRow],
    assignments: &[usize],
    summaries: &[ClusterSummary],
    metric: Metric,
) -> f64 {
    rows.iter()
        .zip(assignments)
        .map(|(r, &c)| metric.to_center(r, &summaries[c]))
        .sum()
}

/// One k-modes run from a seeded initialization.
pub fn kmodes_run(
    rows: &[CategoricalRow],
    k: usize,
    seed: u64,
    max_iter: usize,
    metric: Metric,
) -> Result<Clustering, ClusterError> {
    let width = check_rows(rows)?;
    let distinct = distinct_rows(rows);
    if k == 0 || k > distinct.len() {
        return Err(ClusterError::InvalidK { k, distinct: distinct.len() });
    }
    if max_iter == 0 {
        return Err(ClusterError::InvalidParam("max_iter must be at least 1".into()));
    }
    // Sampling from the sorted distinct values keeps the fit independent of row order.
    let mut rng = seed::rng(seed);
    let modes: Vec<&CategoricalRow> =
        index::sample(&mut rng, distinct.len(), k).into_iter().map(|i| distinct[i]).collect();
    let mut assignments: Vec<usize> = rows
        .iter()
        .map(|r| {
            let mut best = (usize::MAX, 0);
            for (c, m) in modes.iter().enumerate() {
                let d = mismatches(r, m);
                if d < best.0 {
                    best = (d, c);
                }
            }
            best.1
        })
        .collect();
    let mut summaries = update(rows, &mut assignments, k, width, metric);
    let mut cost_history = vec![total_cost(rows, &assignments, &summaries, metric)];
    let mut iterations = 1;

    while iterations < max_iter {
        let next: Vec<usize> = rows
            .iter()
            .zip(&assignments)
            .map(|(r, &current)| {
                let mut best = (metric.to_center(r, &summaries[current]), current);
                for (c, s) in summaries.iter().enumerate() {
                    let d = metric.to_center(r, s);
                    // Ties keep the current cluster; otherwise the lowest index wins.
                    if d < best.0 {
                        best = (d, c);
                    }
                }
                best.1
            })
            .collect();
        iterations += 1;
        if next == assignments {
            break;
        }
        assignments = next;
        summaries = update(rows, &mut assignments, k, width, metric);
        cost_history.push(total_cost(rows, &assignments, &summaries, metric));
    }

    Ok(Clustering {
        k,
        cost: *cost_history.last().unwrap(),
        assignments,
        summaries,
        iterations,
        seed,
        metric,
        restart: 0,
        cost_history,
    })
}

/// Best of `restarts` seeded runs by total cost (earliest restart wins ties).
pub fn kmodes_fit(rows: &[CategoricalRow], params: &KModesParams) -> Result<Clustering, ClusterError> {
    check_rows(rows)?;
    if params.restarts == 0 {
        return Err(ClusterError::InvalidParam("restarts must be at least 1".into()));
    }
    let runs: Vec<Result<Clustering, ClusterError>> = (0..params.restarts)
        .into_par_iter()
        .map(|r| {
            let mut c = kmodes_run(rows, params.k, seed::derive(params.seed, r as u64), params.max_iter, params.metric)?;
            c.restart = r;
            Ok(c)
        })
        .collect();
    let mut best: Option<Clustering> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    let mut best = best.unwrap();
    best.seed = params.seed;
    Ok(best)
}

/// Sum of frequency-weighted dissimilarities of rows to their clusters.
pub fn frequency_cost(rows: &[CategoricalRow], clustering: &Clustering) -> f64 {
    total_cost(rows, &clustering.assignments, &clustering.summaries, Metric::Frequency)
}

/// Per-row silhouette values under Hamming distance.
pub fn silhouette_samples(
    rows: &[CategoricalRow],
    assignments: &[usize],
    k: usize,
) -> Result<Vec<f64>, ClusterError> {
    check_rows(rows)?;
    if k < 2 {
        return Err(ClusterError::TooFewClusters(k));
    }
    if assignments.len() != rows.len() {
        return Err(ClusterError::LengthMismatch { left: rows.len(), right: assignments.len() });
    }
    let mut sizes = vec![0usize; k];
    for &c in assignments {
        if c >= k {
            return Err(ClusterError::InvalidParam(format!("cluster index {c} >= k = {k}")));
        }
        sizes[c] += 1;
    }
    if sizes.contains(&0) {
        return Err(ClusterError::EmptyCluster);
    }
    let values = rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut sums = vec![0usize; k];
            for (j, other) in rows.iter().enumerate() {
                if i != j {
                    sums[assignments[j]] += mismatches(row, other);
                }
            }
            let own = assignments[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let a = sums[own] as f64 / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] as f64 / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();
    Ok(values)
}

/// Mean silhouette of a clustering.
pub fn silhouette(rows: &[CategoricalRow], clustering: &Clustering) -> Result<f64, ClusterError> {
    let s = silhouette_samples(rows, &clustering.assignments, clustering.k)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectParams {
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub metric: Metric,
}

impl SelectParams {
    pub fn new(seed: u64) -> Self {
        Self { k_min: 2, k_max: 30, restarts: 10, seed, max_iter: 100, metric: Metric::Hamming }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KRecord {
    pub k: usize,
    pub silhouette: f64,
    pub clustering: Clustering,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// The first k whose silhouette beats all of its neighbours.
    FirstLocalMaximum,
    /// No strict local maximum existed; the global maximum was taken.
    GlobalMaximum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub records: Vec<KRecord>,
    pub chosen_k: usize,
    pub rule: SelectionRule,
    pub requested_k_max: usize,
    /// `k_max` after clamping to the number of distinct rows.
    pub effective_k_max: usize,
}

impl KSelection {
    pub fn chosen(&self) -> &KRecord {
        self.records.iter().find(|r| r.k == self.chosen_k).unwrap()
    }

    pub fn clamped(&self) -> bool {
        self.effective_k_max < self.requested_k_max
    }
}

/// Index of the first strict local maximum, boundaries compared to their one neighbour.
pub fn first_local_maximum(values: &[f64]) -> Option<usize> {
    if values.len() < 2 {
        return None;
    }
    (0..values.len()).find(|&i| {
        let left = i == 0 || values[i] > values[i - 1];
        let right = i + 1 == values.len() || values[i] > values[i + 1];
        left && right
    })
}

/// Scans k ascending and picks the first local maximum of mean silhouette.
pub fn select_k(rows: &[CategoricalRow], params: &SelectParams) -> Result<KSelection, ClusterError> {
    check_rows(rows)?;
    let distinct = distinct_count(rows);
    if distinct < 2 {
        return Err(ClusterError::TooFewDistinct(distinct));
    }
    if params.k_min < 2 {
        return Err(ClusterError::InvalidParam("k_min must be at least 2".into()));
    }
    let effective_k_max = params.k_max.min(distinct);
    if params.k_min > effective_k_max {
        return Err(ClusterError::InvalidParam(format!(
            "k_min {} exceeds usable k_max {effective_k_max}",
            params.k_min
        )));
    }
    let mut records = Vec::new();
    for k in params.k_min..=effective_k_max {
        let kp = KModesParams {
            k,
            seed: seed::derive(params.seed, k as u64),
            max_iter: params.max_iter,
            restarts: params.restarts,
            metric: params.metric,
        };
        let clustering = kmodes_fit(rows, &kp)?;
        let s = silhouette(rows, &clustering)?;
        records.push(KRecord { k, silhouette: s, clustering });
    }
    let values: Vec<f64> = records.iter().map(|r| r.silhouette).collect();
    let (idx, rule) = match first_local_maximum(&values) {
        Some(i) => (i, SelectionRule::FirstLocalMaximum),
        None => {
            let mut best = 0;
            for (i, v) in values.iter().enumerate() {
                if *v > values[best] {
                    best = i;
                }
            }
            (best, SelectionRule::GlobalMaximum)
        }
    };
    Ok(KSelection {
        chosen_k: records[idx].k,
        records,
        rule,
        requested_k_max: params.k_max,
        effective_k_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeParams {
    pub component_k: (usize, usize),
    pub success_k: (usize, usize),
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Metric driving assignment on raw characteristic blocks.
    pub metric: Metric,
}

impl ArchetypeParams {
    pub fn new(seed: u64) -> Self {
        Self {
            component_k: (2, 30),
            success_k: (2, 20),
            restarts: 10,
            max_iter: 100,
            seed,
            metric: Metric::Hamming,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentTypes {
    pub name: String,
    pub bits: Range<usize>,
    /// `None` when the block has fewer than two distinct configurations.
    pub selection: Option<KSelection>,
    pub types: usize,
    pub silhouette: Option<f64>,
    /// Frequency-weighted cost of the chosen clustering, for reporting.
    pub frequency_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pattern {
    pub cluster: usize,
    /// Component type per component, in component order.
    pub configuration: Vec<u32>,
    pub frequency: usize,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchetypeReport {
    pub components: Vec<ComponentTypes>,
    pub venture_ids: Vec<String>,
    /// Per venture, the cluster index within every component.
    pub memberships: Vec<CategoricalRow>,
    pub success_ids: Vec<String>,
    pub success: Option<KSelection>,
    pub patterns: Vec<Pattern>,
}

/// Two-stage archetype procedure: cluster each component block on its own,
/// re-express ventures as component-type memberships, then cluster the
/// successful ventures over those memberships.
pub fn archetypes(
    taxonomy: &Taxonomy,
    rows: &[FeatureRow],
    success: &[bool],
    params: &ArchetypeParams,
) -> Result<ArchetypeReport, ClusterError> {
    if rows.is_empty() {
        return Err(ClusterError::EmptyDataset);
    }
    if success.len() != rows.len() {
        return Err(ClusterError::LengthMismatch { left: rows.len(), right: success.len() });
    }
    let mut components = Vec::new();
    let mut memberships = vec![Vec::new(); rows.len()];
    for (ci, comp) in taxonomy.components().into_iter().enumerate() {
        let block: Vec<CategoricalRow> = rows
            .iter()
            .map(|r| r.bits[comp.bits.clone()].iter().map(|&b| u32::from(b)).collect())
            .collect();
        let distinct = distinct_count(&block);
        let (selection, clustering) = if distinct < 2 {
            let c = kmodes_fit(&block, &KModesParams { k: 1, ..KModesParams::new(1, params.seed) })?;
            (None, c)
        } else {
            let sp = SelectParams {
                k_min: params.component_k.0,
                k_max: params.component_k.1,
                restarts: params.restarts,
                seed: seed::derive(params.seed, ci as u64),
                max_iter: params.max_iter,
                metric: params.metric,
            };
            let sel = select_k(&block, &sp)?;
            let c = sel.chosen().clustering.clone();
            (Some(sel), c)
        };
        for (m, &a) in memberships.iter_mut().zip(&clustering.assignments) {
            m.push(a as u32);
        }
        components.push(ComponentTypes {
            name: comp.name,
            bits: comp.bits,
            types: clustering.k,
            silhouette: selection.as_ref().map(|s| s.chosen().silhouette),
            frequency_cost: frequency_cost(&block, &clustering),
            selection,
        });
    }

    let success_idx: Vec<usize> = (0..rows.len()).filter(|&i| success[i]).collect();
    let success_rows: Vec<CategoricalRow> = success_idx.iter().map(|&i| memberships[i].clone()).collect();
    let success_ids: Vec<String> = success_idx.iter().map(|&i| rows[i].venture_id.clone()).collect();
    let mut patterns = Vec::new();
    let selection = if !success_rows.is_empty() && distinct_count(&success_rows) >= 2 {
        let sp = SelectParams {
            k_min: params.success_k.0,
            k_max: params.success_k.1,
            restarts: params.restarts,
            seed: seed::derive(params.seed, u64::MAX),
            max_iter: params.max_iter,
            metric: Metric::Hamming,
        };
        let sel = select_k(&success_rows, &sp)?;
        let chosen = &sel.chosen().clustering;
        for (c, summary) in chosen.summaries.iter().enumerate() {
            patterns.push(Pattern {
                cluster: c,
                configuration: summary.mode.clone(),
                frequency: summary.size,
                members: success_ids
                    .iter()
                    .zip(&chosen.assignments)
                    .filter(|(_, &a)| a == c)
                    .map(|(id, _)| id.clone())
                    .collect(),
            });
        }
        patterns.sort_by(|a, b| b.frequency.cmp(&a.frequency).then(a.cluster.cmp(&b.cluster)));
        Some(sel)
    } else {
        None
    };

    Ok(ArchetypeReport {
        components,
        venture_ids: rows.iter().map(|r| r.venture_id.clone()).collect(),
        memberships,
        success_ids,
        success: selection,
        patterns,
    })
}
