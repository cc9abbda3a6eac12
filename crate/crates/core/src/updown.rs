//! Up-down Markov chains on integer compositions.
//!
//! Up-steps follow the ordered Chinese restaurant seating rule: with `n`
//! boxes, part `j` grows with weight `σ_j - α`, a new part opens immediately
//! right of part `j` with weight `α`, and a new leftmost part opens with
//! weight `θ`; the weights sum to `n + θ`. Down-steps remove a uniform box.

use crate::moments::Composition;
use crate::partition::IntervalPartition;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::{Add, Div, Sub};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UpDownError {
    #[error("cannot remove a box from the empty composition")]
    EmptyComposition,
    #[error("chain size must be at least 1")]
    ZeroSize,
}

/// A single box addition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpMove {
    Grow(usize),
    InsertRight(usize),
    InsertLeftmost,
}

impl UpMove {
    pub fn apply(self, sigma: &Composition) -> Composition {
        let mut out = sigma.clone();
        let parts = out.parts_mut();
        match self {
            UpMove::Grow(j) => parts[j] += 1,
            UpMove::InsertRight(j) => parts.insert(j + 1, 1),
            UpMove::InsertLeftmost => parts.insert(0, 1),
        }
        out
    }
}

/// True for the empty composition with `θ = 0`, where the seating rule has no
/// mass and the convention of opening a single part applies.
pub fn is_degenerate_start(sigma: &Composition, theta: f64) -> bool {
    sigma.is_empty() && theta == 0.0
}

/// Up-step moves with their probabilities, in any arithmetic `T` that
/// embeds the integers through `int`.
pub fn up_moves_with<T>(sigma: &Composition, alpha: T, theta: T, int: impl Fn(u64) -> T) -> Vec<(UpMove, T)>
where
    T: Copy + PartialEq + Add<Output = T> + Sub<Output = T> + Div<Output = T>,
{
    if sigma.is_empty() {
        return vec![(UpMove::InsertLeftmost, int(1))];
    }
    let total = int(sigma.size() as u64) + theta;
    let mut out = Vec::with_capacity(2 * sigma.len() + 1);
    for (j, &p) in sigma.parts().iter().enumerate() {
        out.push((UpMove::Grow(j), (int(p as u64) - alpha) / total));
        out.push((UpMove::InsertRight(j), alpha / total));
    }
    out.push((UpMove::InsertLeftmost, theta / total));
    out
}

pub fn up_step<R: Rng + ?Sized>(sigma: &Composition, alpha: f64, theta: f64, rng: &mut R) -> Composition {
    if sigma.is_empty() {
        return Composition::ones(1);
    }
    let mut u = rng.random::<f64>() * (sigma.size() as f64 + theta);
    if u < theta {
        return UpMove::InsertLeftmost.apply(sigma);
    }
    u -= theta;
    let parts = sigma.parts();
    for (j, &p) in parts.iter().enumerate() {
        let grow = p as f64 - alpha;
        if u < grow {
            return UpMove::Grow(j).apply(sigma);
        }
        u -= grow;
        if u < alpha {
            return UpMove::InsertRight(j).apply(sigma);
        }
        u -= alpha;
    }
    UpMove::InsertRight(parts.len() - 1).apply(sigma)
}

/// Removes a box from part `j` chosen with probability `σ_j / |σ|`.
pub fn down_step<R: Rng + ?Sized>(sigma: &Composition, rng: &mut R) -> Result<Composition, UpDownError> {
    if sigma.is_empty() {
        return Err(UpDownError::EmptyComposition);
    }
    let mut u = rng.random_range(0..sigma.size());
    for (j, &p) in sigma.parts().iter().enumerate() {
        if u < p {
            return Ok(sigma.remove_box(j).expect("index in range"));
        }
        u -= p;
    }
    unreachable!("box index within |σ|")
}

/// `n` up-steps from the empty composition.
pub fn sample_ordered_crp<R: Rng + ?Sized>(n: u32, alpha: f64, theta: f64, rng: &mut R) -> Composition {
    let mut s = Composition::empty();
    for _ in 0..n {
        s = up_step(&s, alpha, theta, rng);
    }
    s
}

/// Exact law of `n` up-steps from the empty composition, by forward
/// propagation of [`up_moves_with`].
pub fn ocrp_pmf(n: u32, alpha: f64, theta: f64) -> BTreeMap<Composition, f64> {
    let mut cur = BTreeMap::from([(Composition::empty(), 1.0)]);
    for _ in 0..n {
        let mut next = BTreeMap::new();
        for (s, p) in &cur {
            for (mv, q) in up_moves_with(s, alpha, theta, |k| k as f64) {
                *next.entry(mv.apply(s)).or_insert(0.0) += p * q;
            }
        }
        cur = next;
    }
    cur
}

/// Order of the two half-steps in one chain transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepOrder {
    #[default]
    DownThenUp,
    UpThenDown,
}

/// Chain of size `n` started from `n` up-steps; returns the initial state and
/// the state after each of `steps` transitions.
pub fn run_chain<R: Rng + ?Sized>(
    n: u32,
    alpha: f64,
    theta: f64,
    steps: usize,
    order: StepOrder,
    rng: &mut R,
) -> Result<Vec<Composition>, UpDownError> {
    if n == 0 {
        return Err(UpDownError::ZeroSize);
    }
    let mut s = sample_ordered_crp(n, alpha, theta, rng);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(s.clone());
    for _ in 0..steps {
        s = match order {
            StepOrder::DownThenUp => up_step(&down_step(&s, rng)?, alpha, theta, rng),
            StepOrder::UpThenDown => down_step(&up_step(&s, alpha, theta, rng), rng)?,
        };
        out.push(s.clone());
    }
    Ok(out)
}

/// Part `j` becomes a block of length `σ_j / |σ|`, in composition order.
pub fn embed(sigma: &Composition) -> IntervalPartition {
    if sigma.is_empty() {
        return IntervalPartition::empty();
    }
    let n = sigma.size() as f64;
    let lens: Vec<f64> = sigma.parts().iter().map(|&p| p as f64 / n).collect();
    let mut p = IntervalPartition::from_lengths(&lens);
    p.normalize_mass(1.0);
    p
}
