//! Independent reference implementations and fixture builders shared by the
//! integration and acceptance suites. Nothing here calls the code under test.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f0a_c1e5)
}

// ---------------------------------------------------------------- k-modes

fn hamming(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Sum of mismatches to the attribute-wise mode of `group`.
fn mode_cost(group: &[&Vec<u32>]) -> usize {
    if group.is_empty() {
        return 0;
    }
    let m = group[0].len();
    (0..m)
        .map(|j| {
            let mut counts = std::collections::HashMap::new();
            for r in group {
                *counts.entry(r[j]).or_insert(0usize) += 1;
            }
            group.len() - counts.values().max().unwrap()
        })
        .sum()
}

/// Minimum over all 2-partitions into non-empty groups of the mode cost.
pub fn best_two_partition_cost(rows: &[Vec<u32>]) -> usize {
    let n = rows.len();
    let mut best = usize::MAX;
    // Fixing row 0 in group A halves the enumeration.
    for mask in 0u32..(1 << (n - 1)) {
        let full = mask << 1;
        let a: Vec<&Vec<u32>> = (0..n).filter(|&i| full >> i & 1 == 0).map(|i| &rows[i]).collect();
        let b: Vec<&Vec<u32>> = (0..n).filter(|&i| full >> i & 1 == 1).map(|i| &rows[i]).collect();
        if b.is_empty() {
            continue;
        }
        best = best.min(mode_cost(&a) + mode_cost(&b));
    }
    best
}

pub fn random_binary_rows(seed: u64, n: usize, m: usize) -> Vec<Vec<u32>> {
    let mut r = rng(seed);
    (0..n).map(|_| (0..m).map(|_| r.random_range(0..2)).collect()).collect()
}

/// Mean silhouette straight from the definition, Hamming distance.
pub fn silhouette_direct(rows: &[Vec<u32>], labels: &[usize]) -> f64 {
    let k = labels.iter().max().unwrap() + 1;
    let mut total = 0.0;
    for i in 0..rows.len() {
        let own: Vec<usize> = (0..rows.len()).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if own.is_empty() {
            continue;
        }
        let a = own.iter().map(|&j| hamming(&rows[i], &rows[j]) as f64).sum::<f64>() / own.len() as f64;
        let b = (0..k)
            .filter(|&c| c != labels[i])
            .map(|c| {
                let other: Vec<usize> = (0..rows.len()).filter(|&j| labels[j] == c).collect();
                other.iter().map(|&j| hamming(&rows[i], &rows[j]) as f64).sum::<f64>() / other.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        let d = a.max(b);
        if d > 0.0 {
            total += (b - a) / d;
        }
    }
    total / rows.len() as f64
}

/// Three groups of ten identical rows; group prototypes differ in at least
/// four of twelve attributes. Row order is shuffled.
pub fn planted_three_clusters(seed: u64) -> (Vec<Vec<u32>>, Vec<usize>) {
    let mut r = rng(seed);
    let protos: [Vec<u32>; 3] = loop {
        let p: Vec<Vec<u32>> = (0..3).map(|_| (0..12).map(|_| r.random_range(0..3)).collect()).collect();
        if hamming(&p[0], &p[1]) >= 4 && hamming(&p[0], &p[2]) >= 4 && hamming(&p[1], &p[2]) >= 4 {
            break [p[0].clone(), p[1].clone(), p[2].clone()];
        }
    };
    let mut rows: Vec<(Vec<u32>, usize)> =
        (0..30).map(|i| (protos[i / 10].clone(), i / 10)).collect();
    for i in (1..rows.len()).rev() {
        let j = r.random_range(0..=i);
        rows.swap(i, j);
    }
    rows.into_iter().unzip()
}

// ---------------------------------------------------------------- CART

pub enum OracleTree {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: Box<OracleTree>, right: Box<OracleTree> },
}

fn gini(labels: &[u8]) -> f64 {
    let n = labels.len() as f64;
    let p = labels.iter().filter(|&&y| y == 1).count() as f64 / n;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

/// Exhaustive threshold search at every node: every feature, every midpoint
/// between distinct sorted values. First strictly better split wins.
pub fn exhaustive_tree(rows: &[Vec<f64>], labels: &[u8], depth: usize) -> OracleTree {
    let n = labels.len();
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let leaf = OracleTree::Leaf(pos as f64 / n as f64);
    let parent = gini(labels);
    if depth == 0 || parent == 0.0 || n < 2 {
        return leaf;
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..rows[0].len() {
        let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            let l: Vec<u8> = (0..n).filter(|&i| rows[i][f] <= t).map(|i| labels[i]).collect();
            let r: Vec<u8> = (0..n).filter(|&i| rows[i][f] > t).map(|i| labels[i]).collect();
            let child = (l.len() as f64 * gini(&l) + r.len() as f64 * gini(&r)) / n as f64;
            let gain = parent - child;
            if best.is_none_or(|(g, _, _)| gain > g + 1e-12) {
                best = Some((gain, f, t));
            }
        }
    }
    match best {
        Some((gain, f, t)) if gain > 1e-12 => {
            let (li, ri): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| rows[i][f] <= t);
            let sub = |idx: &[usize]| {
                let r: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
                let y: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
                exhaustive_tree(&r, &y, depth - 1)
            };
            OracleTree::Split { feature: f, threshold: t, left: Box::new(sub(&li)), right: Box::new(sub(&ri)) }
        }
        _ => leaf,
    }
}

impl OracleTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self {
            OracleTree::Leaf(p) => *p,
            OracleTree::Split { feature, threshold, left, right } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }
}

/// Binary features where only feature `signal` carries the label (with
/// `flip` label noise); one constant column at index `constant`.
pub fn planted_signal(seed: u64, n: usize, width: usize, signal: usize, constant: usize, flip: f64) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut r = rng(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = (i % 2) as u8;
        let mut row: Vec<f64> = (0..width).map(|_| f64::from(r.random_range(0..2u8))).collect();
        row[signal] = f64::from(if r.random_bool(flip) { 1 - y } else { y });
        row[constant] = 1.0;
        rows.push(row);
        labels.push(y);
    }
    (rows, labels)
}

// ---------------------------------------------------------------- logistic

/// Mean log-loss with L2 penalty, evaluated directly (no shared code path).
pub fn logistic_loss(weights: &[f64], bias: f64, rows: &[Vec<f64>], labels: &[u8], l2: f64) -> f64 {
    let mut total = 0.0;
    for (x, &y) in rows.iter().zip(labels) {
        let z: f64 = bias + x.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>();
        let p = 1.0 / (1.0 + (-z).exp());
        total -= if y == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    total / rows.len() as f64 + l2 / 2.0 * weights.iter().map(|w| w * w).sum::<f64>()
}

// ---------------------------------------------------------------- QCA

/// Pattern string over '-', '0', '1' for an implicant given as per-condition options.
fn pattern(lits: &[Option<bool>]) -> String {
    lits.iter().map(|l| match l { None => '-', Some(false) => '0', Some(true) => '1' }).collect()
}

fn covers(lits: &[Option<bool>], row: usize) -> bool {
    let k = lits.len();
    lits.iter().enumerate().all(|(i, l)| match l {
        None => true,
        Some(v) => (row >> (k - 1 - i) & 1 == 1) == *v,
    })
}

/// Brute-force minimum cover. Every one of the 3^k product terms is checked;
/// primes are the allowed terms not strictly contained in another allowed
/// term; the cover is found by enumerating all subsets of primes and keeping
/// the minimum of (term count, literal count, sorted pattern list).
pub fn qm_oracle(k: usize, positives: &[usize], dont_cares: &[usize]) -> Vec<String> {
    if positives.is_empty() {
        return Vec::new();
    }
    let allowed = |r: usize| positives.contains(&r) || dont_cares.contains(&r);
    let mut terms: Vec<Vec<Option<bool>>> = Vec::new();
    for code in 0..3usize.pow(k as u32) {
        let mut c = code;
        let lits: Vec<Option<bool>> = (0..k)
            .map(|_| {
                let d = c % 3;
                c /= 3;
                match d { 0 => None, 1 => Some(false), _ => Some(true) }
            })
            .collect();
        let rows: Vec<usize> = (0..1 << k).filter(|&r| covers(&lits, r)).collect();
        if rows.iter().all(|&r| allowed(r)) {
            terms.push(lits);
        }
    }
    let rows_of = |t: &Vec<Option<bool>>| -> Vec<usize> { (0..1 << k).filter(|&r| covers(t, r)).collect() };
    let primes: Vec<Vec<Option<bool>>> = terms
        .iter()
        .filter(|t| {
            let mine = rows_of(t);
            !terms.iter().any(|o| {
                let theirs = rows_of(o);
                theirs.len() > mine.len() && mine.iter().all(|r| theirs.contains(r))
            })
        })
        .filter(|t| positives.iter().any(|&r| covers(t, r)))
        .cloned()
        .collect();
    let mut best: Option<(usize, usize, Vec<String>)> = None;
    for mask in 1u64..(1u64 << primes.len()) {
        let chosen: Vec<&Vec<Option<bool>>> =
            (0..primes.len()).filter(|&i| mask >> i & 1 == 1).map(|i| &primes[i]).collect();
        if !positives.iter().all(|&r| chosen.iter().any(|t| covers(t, r))) {
            continue;
        }
        let lits = chosen.iter().map(|t| t.iter().filter(|l| l.is_some()).count()).sum();
        let mut pats: Vec<String> = chosen.iter().map(|t| pattern(t)).collect();
        pats.sort();
        let key = (chosen.len(), lits, pats);
        if best.as_ref().is_none_or(|b| key < *b) {
            best = Some(key);
        }
    }
    best.unwrap().2
}

// ---------------------------------------------------------------- fusion

fn normal(g: &mut impl Rng) -> f64 {
    // Box-Muller, kept local so fixtures do not lean on the library's RNG plumbing.
    let u: f64 = g.random_range(f64::EPSILON..1.0);
    let v: f64 = g.random_range(0.0..1.0);
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Labels drawn from a logistic model over binary features where one driver
/// is repeated four times. Naive Bayes counts the repeated evidence four
/// times; the logistic fit shares the weight across the copies.
pub fn logistic_world(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut g = rng(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let a = f64::from(g.random_bool(0.5));
        let z = f64::from(g.random_bool(0.5));
        let noise: Vec<f64> = (0..2).map(|_| f64::from(g.random_bool(0.5))).collect();
        let logit = -0.5 + 3.0 * a - 2.0 * z + 0.3 * noise[0];
        let p = 1.0 / (1.0 + (-logit).exp());
        labels.push(u8::from(g.random_bool(p)));
        let mut row = vec![a, z, z, z, z];
        row.extend(noise);
        rows.push(row);
    }
    (rows, labels)
}

/// Truth probabilities and two independent unbiased noisy estimates.
pub fn noisy_pair(seed: u64, n: usize, sd: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut g = rng(seed);
    let truth: Vec<f64> = (0..n).map(|_| g.random_range(0.2..0.8)).collect();
    let mut est = || truth.iter().map(|t| (t + sd * normal(&mut g)).clamp(0.0, 1.0)).collect::<Vec<f64>>();
    let a = est();
    let b = est();
    (truth, a, b)
}

/// Labels plus a sharp and a weak probability lane.
pub fn strong_weak_lanes(seed: u64, n: usize) -> (Vec<u8>, Vec<f64>, Vec<f64>) {
    let mut g = rng(seed);
    let labels: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
    let strong = labels.iter().map(|&y| (0.15 + 0.7 * f64::from(y) + 0.15 * normal(&mut g)).clamp(0.0, 1.0)).collect();
    let weak = labels.iter().map(|&y| (0.5 + 0.05 * (2.0 * f64::from(y) - 1.0) + 0.25 * normal(&mut g)).clamp(0.0, 1.0)).collect();
    (labels, strong, weak)
}
