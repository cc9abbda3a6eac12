//! Samplers for PDIP(α, θ) with controlled truncation.

use crate::dist::{self, DistError};
use crate::partition::{AnnotatedPartition, IntervalPartition};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

/// When to stop stick-breaking: the unplaced mass falls below `mass`, or
/// `max_blocks` blocks have been placed. The unplaced mass becomes dust.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub mass: f64,
    pub max_blocks: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { mass: 1e-6, max_blocks: 1 << 10 }
    }
}

impl Truncation {
    pub fn new(mass: f64, max_blocks: usize) -> Self {
        Self { mass, max_blocks }
    }
}

/// Unit-mass PDIP(α, θ) by stick-breaking with ordered insertion.
///
/// Block `n+1` goes immediately right of a uniform one of the first `n`
/// blocks with total weight `nα`, or leftmost with weight `θ`. The unplaced
/// remainder is spread as dust over the `n+1` insertion slots in proportion
/// to those weights, which is its expected allocation.
pub fn sample_pdip_stickbreaking<R: Rng + ?Sized>(
    alpha: f64,
    theta: f64,
    trunc: Truncation,
    rng: &mut R,
) -> Result<IntervalPartition, DistError> {
    dist::check_alpha(alpha)?;
    if !(theta >= 0.0) {
        return Err(DistError::OutOfRange { name: "theta", value: theta });
    }
    Ok(stickbreak(alpha, theta, trunc, rng))
}

pub(crate) fn stickbreak<R: Rng + ?Sized>(alpha: f64, theta: f64, trunc: Truncation, rng: &mut R) -> IntervalPartition {
    const NIL: usize = usize::MAX;
    let mut lens: Vec<f64> = Vec::new();
    let mut next: Vec<usize> = Vec::new();
    let mut head = NIL;
    let mut rest = 1.0;
    let max_blocks = trunc.max_blocks.max(1);
    while lens.len() < max_blocks && (lens.is_empty() || rest >= trunc.mass) {
        let n = lens.len();
        let w = dist::beta(theta + (n + 1) as f64 * alpha, 1.0 - alpha, rng);
        let p = rest * (1.0 - w);
        rest *= w;
        let id = n;
        lens.push(p);
        if n == 0 {
            next.push(NIL);
            head = id;
            continue;
        }
        let total = n as f64 * alpha + theta;
        let u = rng.random::<f64>() * total;
        if u < theta {
            next.push(head);
            head = id;
        } else {
            let j = (((u - theta) / alpha) as usize).min(n - 1);
            next.push(next[j]);
            next[j] = id;
        }
    }
    let n = lens.len();
    let total = n as f64 * alpha + theta;
    let slot_right = rest * alpha / total;
    let mut atoms = Vec::with_capacity(2 * n + 1);
    atoms.push((false, rest * theta / total));
    let mut cur = head;
    while cur != NIL {
        atoms.push((true, lens[cur]));
        atoms.push((false, slot_right));
        cur = next[cur];
    }
    let mut out = IntervalPartition::from_atoms(atoms);
    debug_assert!((out.mass() - 1.0).abs() < 1e-9);
    out.normalize_mass(1.0);
    out
}

/// `(S, S^{-1}({(0, S - Y(T-))} ⋆ β))` from the stable subordinator construction;
/// the normalized partition is PDIP(α, 0).
pub fn sample_pdip_alpha0_via_subordinator<R: Rng + ?Sized>(
    alpha: f64,
    lambda: f64,
    eps: f64,
    rng: &mut R,
) -> Result<(f64, IntervalPartition), DistError> {
    let run = dist::sample_stable_subordinator_range(lambda, alpha, eps, rng)?;
    let mut first = IntervalPartition::empty();
    first.push_block(run.overshoot);
    let joined = IntervalPartition::concat([&first, &run.partition]);
    Ok((run.level, joined.scaled(1.0 / run.level)))
}

/// Diversity marks from counts at each `h` in the decreasing `h_grid`,
/// followed by a linear-in-`h` extrapolation from the last two grid points.
pub fn annotate_diversity(beta: &IntervalPartition, alpha: f64, h_grid: &[f64]) -> AnnotatedPartition {
    assert!(!h_grid.is_empty(), "h_grid must be nonempty");
    let g = gamma(1.0 - alpha);
    let est = |h: f64, t: f64| g * h.powf(alpha) * beta.blocks().iter().filter(|&&(a, b)| b - a > h && b <= t).count() as f64;
    let extrap = |t: f64| {
        let m = h_grid.len();
        if m == 1 {
            return est(h_grid[0], t);
        }
        let (h1, h2) = (h_grid[m - 2], h_grid[m - 1]);
        let (d1, d2) = (est(h1, t), est(h2, t));
        ((h1 * d2 - h2 * d1) / (h1 - h2)).max(0.0)
    };
    let mut marks = Vec::with_capacity(beta.len());
    let mut run = 0.0f64;
    for &(a, _) in beta.blocks() {
        run = run.max(extrap(a));
        marks.push(run);
    }
    let total = extrap(f64::INFINITY).max(run);
    AnnotatedPartition::new(beta.clone(), marks, total)
}
