//! Exact transition kernels of the self-similar interval-partition evolution.
//!
//! Survival of a block `U` over a level increment `y` is decided by a
//! Poisson process of rate `r = 1/2y` laid along the mass axis: the block
//! survives iff it receives a point, and the number of points it receives is
//! then the zero-truncated Poisson index of `L_{Leb U, r}`. Points landing in
//! dust start dust clades. One exponential clock therefore serves all atoms.

use crate::dist::{self, DistError};
use crate::partition::{Atom, IntervalPartition};
use crate::pdip::{stickbreak, Truncation};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub alpha: f64,
    pub theta: f64,
    pub y: f64,
}

impl KernelParams {
    pub fn new(alpha: f64, theta: f64, y: f64) -> Result<Self, DistError> {
        dist::check_alpha(alpha)?;
        if !(theta >= 0.0) {
            return Err(DistError::OutOfRange { name: "theta", value: theta });
        }
        if !(y > 0.0) {
            return Err(DistError::OutOfRange { name: "y", value: y });
        }
        Ok(Self { alpha, theta, y })
    }

    pub fn r(&self) -> f64 {
        1.0 / (2.0 * self.y)
    }
}

/// Intensity of dust clades per unit of dust over a level increment `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DustCladeRate {
    /// `1/2y`, which gives extinction probability `e^{-m/2y}` from dust of mass `m`.
    #[default]
    HalfInverseLevel,
    /// `α/y`, as printed in the definition of the dust kernel.
    AlphaOverLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Truncation of each PDIP draw relative to its own mass.
    pub trunc: Truncation,
    /// Absolute floor: a PDIP draw of mass `g` also stops once its unplaced
    /// mass is below `abs_mass`. The remainder becomes dust, which evolves
    /// with the same total-mass law.
    #[serde(default)]
    pub abs_mass: f64,
    pub dust_rate: DustCladeRate,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { trunc: Truncation::default(), abs_mass: 0.0, dust_rate: DustCladeRate::default() }
    }
}

impl KernelConfig {
    pub fn with_trunc(trunc: Truncation) -> Self {
        Self { trunc, ..Self::default() }
    }

    /// Relative truncation of a PDIP draw scaled by `g`.
    fn for_scale(&self, g: f64) -> Truncation {
        Truncation { mass: self.trunc.mass.max(self.abs_mass / g), ..self.trunc }
    }
}

fn check_pos(name: &'static str, value: f64) -> Result<(), DistError> {
    if value > 0.0 {
        Ok(())
    } else {
        Err(DistError::OutOfRange { name, value })
    }
}

/// `L_{b,r}`: `Gamma(K - α, rate r)` with `K` zero-truncated Poisson(`br`).
pub fn sample_l<R: Rng + ?Sized>(b: f64, r: f64, alpha: f64, rng: &mut R) -> Result<f64, DistError> {
    check_pos("b", b)?;
    check_pos("r", r)?;
    dist::check_alpha(alpha)?;
    let k = dist::sample_zero_truncated_poisson(b * r, rng)?;
    Ok(dist::gamma_rate(k as f64 - alpha, r, rng))
}

/// Laplace transform `E e^{-λ L_{b,r}}` in closed form.
pub fn l_laplace(b: f64, r: f64, alpha: f64, lambda: f64) -> f64 {
    ((r + lambda) / r).powf(alpha) * (b * r * r / (r + lambda)).exp_m1() / (b * r).exp_m1()
}

/// `E L_{b,r} = (br / (1 - e^{-br}) - α) / r`.
pub fn l_mean(b: f64, r: f64, alpha: f64) -> f64 {
    (b * r / -(-b * r).exp_m1() - alpha) / r
}

/// Offspring of a surviving block given its Poisson index `k ≥ 1`:
/// `(0, L) ⋆ G β̄` with `G ~ Gamma(α, r)`, `β̄ ~ PDIP(α, α)`.
fn push_survivor<R: Rng + ?Sized>(out: &mut IntervalPartition, k: u64, r: f64, alpha: f64, cfg: &KernelConfig, rng: &mut R) {
    out.push_block(dist::gamma_rate(k as f64 - alpha, r, rng));
    let g = dist::gamma_rate(alpha, r, rng);
    if g > 0.0 {
        out.push_concat(&stickbreak(alpha, alpha, cfg.for_scale(g), rng).scaled(g));
    }
}

fn push_dust_clade<R: Rng + ?Sized>(out: &mut IntervalPartition, r: f64, alpha: f64, cfg: &KernelConfig, rng: &mut R) {
    let g = dist::exp1(rng) / r;
    out.push_concat(&stickbreak(alpha, 0.0, cfg.for_scale(g), rng).scaled(g));
}

/// `μ_{b,r}`: empty with probability `e^{-br}`, else `(0, L) ⋆ G β̄`.
pub fn sample_mu<R: Rng + ?Sized>(
    b: f64,
    r: f64,
    alpha: f64,
    trunc: Truncation,
    rng: &mut R,
) -> Result<IntervalPartition, DistError> {
    check_pos("b", b)?;
    check_pos("r", r)?;
    dist::check_alpha(alpha)?;
    let mut out = IntervalPartition::empty();
    let k = dist::poisson(b * r, rng);
    if k > 0 {
        push_survivor(&mut out, k, r, alpha, &KernelConfig::with_trunc(trunc), rng);
    }
    Ok(out)
}

/// `μ̃_{0,r}`: `G₀ β̄₀` with `G₀ ~ Exponential(r)`, `β̄₀ ~ PDIP(α, 0)`.
pub fn sample_mu_tilde<R: Rng + ?Sized>(r: f64, alpha: f64, trunc: Truncation, rng: &mut R) -> Result<IntervalPartition, DistError> {
    check_pos("r", r)?;
    dist::check_alpha(alpha)?;
    let mut out = IntervalPartition::empty();
    push_dust_clade(&mut out, r, alpha, &KernelConfig::with_trunc(trunc), rng);
    Ok(out)
}

/// One draw from `κ_y^{α,θ}(β, ·)`; dust in `β` is ignored.
pub fn kernel_step<R: Rng + ?Sized>(beta: &IntervalPartition, p: KernelParams, cfg: KernelConfig, rng: &mut R) -> IntervalPartition {
    step(beta, p, cfg, false, rng)
}

/// One draw from the kernel on generalized partitions: dust of measure `m`
/// spawns independent `μ̃_{0,1/2y}` clades at uniform positions, interleaved
/// with block offspring in spatial order.
pub fn kernel_step_generalized<R: Rng + ?Sized>(
    beta: &IntervalPartition,
    p: KernelParams,
    cfg: KernelConfig,
    rng: &mut R,
) -> IntervalPartition {
    step(beta, p, cfg, true, rng)
}

fn step<R: Rng + ?Sized>(beta: &IntervalPartition, p: KernelParams, cfg: KernelConfig, with_dust: bool, rng: &mut R) -> IntervalPartition {
    let (alpha, r) = (p.alpha, p.r());
    let mut out = IntervalPartition::empty();
    if p.theta > 0.0 {
        let g = dist::gamma_rate(p.theta, r, rng);
        if g > 0.0 {
            out.push_concat(&stickbreak(alpha, p.theta, cfg.for_scale(g), rng).scaled(g));
        }
    }
    let dust_mult = match cfg.dust_rate {
        DustCladeRate::HalfInverseLevel => 1.0,
        DustCladeRate::AlphaOverLevel => 2.0 * alpha,
    };
    // Distance along the (rate-adjusted) mass axis to the next Poisson point.
    let mut gap = dist::exp1(rng) / r;
    for atom in beta.atoms() {
        let (is_block, len) = match atom {
            Atom::Block { len, .. } => (true, len),
            Atom::Dust { len, .. } if with_dust => (false, len * dust_mult),
            Atom::Dust { .. } => continue,
        };
        let mut k = 0u64;
        let mut left = len;
        while gap <= left {
            left -= gap;
            k += 1;
            gap = dist::exp1(rng) / r;
        }
        gap -= left;
        if k == 0 {
            continue;
        }
        if is_block {
            push_survivor(&mut out, k, r, alpha, &cfg, rng);
        } else {
            for _ in 0..k {
                push_dust_clade(&mut out, r, alpha, &cfg, rng);
            }
        }
    }
    out
}

/// Markov iteration of the generalized kernel; `levels` are strictly
/// increasing, with the initial state at level 0. A leading level 0 returns
/// the initial state unchanged.
pub fn evolve<R: Rng + ?Sized>(
    init: &IntervalPartition,
    levels: &[f64],
    alpha: f64,
    theta: f64,
    cfg: KernelConfig,
    rng: &mut R,
) -> Result<Vec<IntervalPartition>, DistError> {
    let mut out = Vec::with_capacity(levels.len());
    let mut state = init.clone();
    let mut prev = 0.0;
    for &y in levels {
        if y < prev || (y == prev && !out.is_empty()) {
            return Err(DistError::OutOfRange { name: "levels", value: y });
        }
        if y > prev {
            state = kernel_step_generalized(&state, KernelParams::new(alpha, theta, y - prev)?, cfg, rng);
        }
        out.push(state.clone());
        prev = y;
    }
    Ok(out)
}
