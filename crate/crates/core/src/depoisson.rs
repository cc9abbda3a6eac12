//! De-Poissonization: time change by inverse total mass, then normalization.

use crate::kernel::{kernel_step_generalized, KernelConfig, KernelParams};
use crate::partition::IntervalPartition;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DepoissonError {
    #[error("the inverse-mass integral reaches only {reached} < u = {u} on the available levels")]
    TimeChangeExhausted { u: f64, reached: f64 },
    #[error("levels must be non-decreasing and start with a positive mass")]
    BadPath,
    #[error(transparent)]
    Dist(#[from] crate::dist::DistError),
}

/// Running trapezoid integral of `1/mass` along a level path.
#[derive(Debug, Clone)]
struct Clock {
    level: f64,
    inv_mass: f64,
    integral: f64,
}

impl Clock {
    fn start(level: f64, mass: f64) -> Self {
        Self { level, inv_mass: 1.0 / mass, integral: 0.0 }
    }

    /// Advances to `(level, mass)`; returns the previous `(level, integral)`.
    /// A nonpositive mass stops the clock.
    fn advance(&mut self, level: f64, mass: f64) -> Option<(f64, f64)> {
        if !(mass > 0.0) {
            return None;
        }
        let prev = (self.level, self.integral);
        let inv = 1.0 / mass;
        self.integral += 0.5 * (self.inv_mass + inv) * (level - self.level);
        self.level = level;
        self.inv_mass = inv;
        Some(prev)
    }

    /// Crossing level of `u` inside the cell ending at the current point.
    fn crossing(&self, prev: (f64, f64), u: f64) -> f64 {
        let (y0, i0) = prev;
        if self.integral == i0 {
            return self.level;
        }
        y0 + (u - i0) / (self.integral - i0) * (self.level - y0)
    }
}

/// `τ(u) = inf{y : ∫₀^y ‖β^z‖^{-1} dz > u}` with trapezoid quadrature on the
/// grid and linear interpolation of the integral inside the crossing cell.
pub fn time_change(masses: &[(f64, f64)], u: f64) -> Result<f64, DepoissonError> {
    let (&(y0, m0), rest) = masses.split_first().ok_or(DepoissonError::BadPath)?;
    if !(m0 > 0.0) {
        return Err(DepoissonError::BadPath);
    }
    if u <= 0.0 {
        return Ok(y0);
    }
    let mut clock = Clock::start(y0, m0);
    for &(y, m) in rest {
        if y < clock.level {
            return Err(DepoissonError::BadPath);
        }
        let Some(prev) = clock.advance(y, m) else { break };
        if clock.integral > u {
            return Ok(clock.crossing(prev, u));
        }
    }
    Err(DepoissonError::TimeChangeExhausted { u, reached: clock.integral })
}

/// A de-Poissonized state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepoissonState {
    pub u: f64,
    /// Interpolated `τ(u)`.
    pub tau: f64,
    /// Path level actually used, the grid point nearest `τ(u)`.
    pub level: f64,
    pub snap: f64,
    pub state: IntervalPartition,
}

fn normalized(p: &IntervalPartition) -> IntervalPartition {
    let mut q = p.scaled(1.0 / p.mass());
    q.normalize_mass(1.0);
    q
}

fn snapped(u: f64, tau: f64, a: (f64, &IntervalPartition), b: (f64, &IntervalPartition)) -> DepoissonState {
    let (level, st) = if (tau - a.0).abs() <= (b.0 - tau).abs() { a } else { b };
    DepoissonState { u, tau, level, snap: (level - tau).abs(), state: normalized(st) }
}

/// `β̄^u = ‖β^{τ(u)}‖^{-1} β^{τ(u)}` for each `u` in the increasing `u_grid`.
pub fn depoissonize(path: &[(f64, IntervalPartition)], u_grid: &[f64]) -> Result<Vec<DepoissonState>, DepoissonError> {
    let masses: Vec<(f64, f64)> = path.iter().map(|(y, p)| (*y, p.mass())).collect();
    let mut out = Vec::with_capacity(u_grid.len());
    for &u in u_grid {
        let tau = time_change(&masses, u)?;
        let k = masses.partition_point(|&(y, _)| y < tau).min(path.len() - 1);
        let lo = k.saturating_sub(1);
        out.push(snapped(u, tau, (path[lo].0, &path[lo].1), (path[k].0, &path[k].1)));
    }
    Ok(out)
}

/// PDIPE sampled at the increasing `u_grid`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdipePath {
    pub states: Vec<DepoissonState>,
    /// Level at which the evolution hit the empty partition before covering
    /// the whole `u_grid`; states for the remaining `u` are absent.
    pub absorbed_at: Option<f64>,
}

/// Evolves `init` on the level grid `k · level_step`, extending until the
/// time change passes the last `u`, and de-Poissonizes on the fly.
pub fn simulate_pdipe<R: Rng + ?Sized>(
    init: &IntervalPartition,
    alpha: f64,
    theta: f64,
    u_grid: &[f64],
    level_step: f64,
    cfg: KernelConfig,
    rng: &mut R,
) -> Result<PdipePath, DepoissonError> {
    if !(init.mass() > 0.0) || u_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(DepoissonError::BadPath);
    }
    let params = KernelParams::new(alpha, theta, level_step)?;
    let mut states = Vec::with_capacity(u_grid.len());
    let mut pending = u_grid.iter().copied().peekable();
    while let Some(&u) = pending.peek() {
        if u > 0.0 {
            break;
        }
        states.push(DepoissonState { u, tau: 0.0, level: 0.0, snap: 0.0, state: normalized(init) });
        pending.next();
    }
    let mut clock = Clock::start(0.0, init.mass());
    let mut cur = init.clone();
    let mut k = 0u64;
    while pending.peek().is_some() {
        k += 1;
        let level = k as f64 * level_step;
        let next = kernel_step_generalized(&cur, params, cfg, rng);
        let Some(prev) = clock.advance(level, next.mass()) else {
            return Ok(PdipePath { states, absorbed_at: Some(level) });
        };
        while let Some(&u) = pending.peek() {
            if clock.integral <= u {
                break;
            }
            let tau = clock.crossing(prev, u);
            states.push(snapped(u, tau, (prev.0, &cur), (level, &next)));
            pending.next();
        }
        cur = next;
    }
    Ok(PdipePath { states, absorbed_at: None })
}
