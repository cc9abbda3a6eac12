//! Hausdorff distance between complements and the distortion metrics `d′_H`, `d_α`.
//!
//! Distortion components are accumulated pair by pair in correspondence order,
//! `A = ‖β‖ + Σ (|ΔLeb| - Leb U)` and `B = ‖γ‖ + Σ (|ΔLeb| - Leb V)`, in both the
//! direct evaluation and the DP. Floating addition is monotone, so pruning a
//! componentwise-dominated DP state can never change the minimum and the DP
//! reproduces exhaustive enumeration bit for bit.

use crate::partition::{AnnotatedPartition, IntervalPartition};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("invalid correspondence: {0}")]
    InvalidCorrespondence(String),
}

/// Pairs of block indices, strictly increasing in both coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Correspondence {
    pub pairs: Vec<(usize, usize)>,
}

impl Correspondence {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        Self { pairs }
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<(), MetricError> {
        for w in self.pairs.windows(2) {
            if w[0].0 >= w[1].0 || w[0].1 >= w[1].1 {
                return Err(MetricError::InvalidCorrespondence(format!("{:?} then {:?} is not increasing", w[0], w[1])));
            }
        }
        if let Some(&(i, j)) = self.pairs.iter().find(|&&(i, j)| i >= n || j >= m) {
            return Err(MetricError::InvalidCorrespondence(format!("pair ({i}, {j}) out of range for {n} x {m} blocks")));
        }
        Ok(())
    }
}

/// Directed Hausdorff distance `sup_{x ∈ K1} d(x, K2)` for sorted disjoint closed components.
fn directed(k1: &[(f64, f64)], k2: &[(f64, f64)]) -> f64 {
    let dist = |x: f64| -> f64 {
        let idx = k2.partition_point(|&(p, _)| p <= x);
        let mut d = f64::INFINITY;
        if idx > 0 {
            let (p, q) = k2[idx - 1];
            d = if x <= q { 0.0 } else { x - q }.min(d);
            debug_assert!(p <= x);
        }
        if idx < k2.len() {
            d = d.min(k2[idx].0 - x);
        }
        d
    };
    let mut best = 0.0f64;
    for &(p, q) in k1 {
        best = best.max(dist(p)).max(dist(q));
        // Interior maxima sit at midpoints of the gaps of K2 inside [p, q].
        let start = k2.partition_point(|&(_, hi)| hi < p).saturating_sub(1);
        for w in k2[start..].windows(2) {
            let mid = 0.5 * (w[0].1 + w[1].0);
            if mid > q {
                break;
            }
            if mid >= p {
                best = best.max(dist(mid));
            }
        }
    }
    best
}

/// `d_H(C(β), C(γ))` for the complements `C = [0, M] ∖ ∪ blocks`.
pub fn hausdorff_complement(beta: &IntervalPartition, gamma: &IntervalPartition) -> f64 {
    let (k1, k2) = (beta.complement(), gamma.complement());
    directed(&k1, &k2).max(directed(&k2, &k1))
}

fn lens(p: &IntervalPartition) -> Vec<f64> {
    p.lengths().collect()
}

/// Increments of the three DP components for matching block `i` with block `j`.
#[inline]
fn pair_terms(a: f64, b: f64) -> (f64, f64) {
    let d = (a - b).abs();
    (d - a, d - b)
}

/// Distortion of `corr`; with annotations, the α-distortion.
pub fn distortion(
    beta: &IntervalPartition,
    gamma: &IntervalPartition,
    corr: &Correspondence,
    annotations: Option<(&AnnotatedPartition, &AnnotatedPartition)>,
) -> Result<f64, MetricError> {
    corr.validate(beta.len(), gamma.len())?;
    let (lb, lg) = (lens(beta), lens(gamma));
    let (mut a, mut b, mut c) = (beta.mass(), gamma.mass(), 0.0f64);
    for &(i, j) in &corr.pairs {
        let (da, db) = pair_terms(lb[i], lg[j]);
        a += da;
        b += db;
        if let Some((x, y)) = annotations {
            c = c.max((x.block_diversity[i] - y.block_diversity[j]).abs());
        }
    }
    let d = annotations.map_or(0.0, |(x, y)| (x.total_diversity - y.total_diversity).abs());
    Ok(a.max(b).max(c).max(d))
}

type State = [f64; 3];

fn dominated(v: &State, by: &State) -> bool {
    by[0] <= v[0] && by[1] <= v[1] && by[2] <= v[2]
}

fn insert(front: &mut Vec<State>, v: State) {
    if front.iter().any(|w| dominated(&v, w)) {
        return;
    }
    front.retain(|w| !dominated(w, &v));
    front.push(v);
}

fn pareto_min(lb: &[f64], lg: &[f64], mb: f64, mg: f64, marks: Option<(&[f64], &[f64])>) -> f64 {
    let (n, m) = (lb.len(), lg.len());
    let mut prev: Vec<Vec<State>> = vec![vec![[mb, mg, 0.0]]; m + 1];
    for i in 1..=n {
        let mut cur: Vec<Vec<State>> = Vec::with_capacity(m + 1);
        cur.push(prev[0].clone());
        for j in 1..=m {
            let mut front = prev[j].clone();
            for &v in &cur[j - 1] {
                insert(&mut front, v);
            }
            let (da, db) = pair_terms(lb[i - 1], lg[j - 1]);
            let dc = marks.map_or(0.0, |(x, y)| (x[i - 1] - y[j - 1]).abs());
            for v in &prev[j - 1] {
                insert(&mut front, [v[0] + da, v[1] + db, v[2].max(dc)]);
            }
            cur.push(front);
        }
        prev = cur;
    }
    prev[m].iter().map(|v| v[0].max(v[1]).max(v[2])).fold(f64::INFINITY, f64::min)
}

/// Exact infimum of the Hausdorff distortion over all correspondences.
pub fn dprime_h(beta: &IntervalPartition, gamma: &IntervalPartition) -> f64 {
    pareto_min(&lens(beta), &lens(gamma), beta.mass(), gamma.mass(), None)
}

/// Exact infimum of the α-distortion over all correspondences.
pub fn d_alpha(beta: &AnnotatedPartition, gamma: &AnnotatedPartition) -> f64 {
    let core = pareto_min(
        &lens(&beta.partition),
        &lens(&gamma.partition),
        beta.partition.mass(),
        gamma.partition.mass(),
        Some((&beta.block_diversity, &gamma.block_diversity)),
    );
    core.max((beta.total_diversity - gamma.total_diversity).abs())
}
