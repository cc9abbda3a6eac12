//! Test harnesses: KS, chi-square and moment z-scores, the generator
//! finite-difference test and the pseudo-stationarity test.
//!
//! Replicas run in parallel, each on the stream `derive(seed, [tag, rep])`,
//! and are aggregated in replica order, so reports do not depend on the
//! thread count.

use crate::depoisson::{simulate_pdipe, DepoissonError};
use crate::dist::{self, DistError, RngStream};
use crate::kernel::{kernel_step_generalized, KernelConfig, KernelParams};
use crate::moments::{generator_circ, m_circ, pdip_moment, Composition, MomentError};
use crate::partition::IntervalPartition;
use crate::pdip::stickbreak;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

/// Pre-registered significance level.
pub const SIGNIFICANCE: f64 = 1e-3;
/// Pre-registered moment band in standard errors.
pub const Z_BAND: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("need at least {need} observations, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Depoisson(#[from] DepoissonError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub d: f64,
    pub p: f64,
    /// Effective sample size entering the asymptotic law.
    pub n_eff: f64,
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

fn sorted(sample: &[f64]) -> Result<Vec<f64>, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(StatsError::Invalid("NaN in sample".into()));
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// One-sample two-sided KS statistic against a continuous `cdf`.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult, StatsError> {
    let v = sorted(sample)?;
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult { d, p: ks_p(d, n), n_eff: n })
}

/// Two-sample two-sided KS statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    let (x, y) = (sorted(a)?, sorted(b)?);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let n_eff = n * m / (n + m);
    Ok(KsResult { d, p: ks_p(d, n_eff), n_eff })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

pub fn mean_se(sample: &[f64]) -> Result<MeanSe, StatsError> {
    let n = sample.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples { need: 2, got: n });
    }
    let mean = sample.iter().sum::<f64>() / n as f64;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(MeanSe { mean, se: (var / n as f64).sqrt(), n })
}

/// `(mean - target) / SE`, with SE from `target_sd` when given, else estimated.
pub fn moment_z(sample: &[f64], target_mean: f64, target_sd: Option<f64>) -> Result<f64, StatsError> {
    let ms = mean_se(sample)?;
    let se = target_sd.map_or(ms.se, |sd| sd / (ms.n as f64).sqrt());
    Ok((ms.mean - target_mean) / se)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: usize,
    pub p: f64,
}

/// Pearson goodness of fit of `counts` against cell probabilities `probs`.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> Result<ChiSquareResult, StatsError> {
    if counts.len() != probs.len() || counts.len() < 2 {
        return Err(StatsError::Invalid("need matching count and probability vectors with at least two cells".into()));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(StatsError::EmptySample);
    }
    let mut stat = 0.0;
    for (&c, &p) in counts.iter().zip(probs) {
        if !(p > 0.0) {
            return Err(StatsError::Invalid(format!("cell probability {p} is not positive")));
        }
        let e = n as f64 * p;
        stat += (c as f64 - e).powi(2) / e;
    }
    let df = counts.len() - 1;
    let p = ChiSquared::new(df as f64).map_err(|e| StatsError::Invalid(e.to_string()))?.sf(stat);
    Ok(ChiSquareResult { statistic: stat, df, p })
}

/// Pearson test that two count vectors over the same cells share one law.
/// Cells empty in both samples are dropped.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<ChiSquareResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::Invalid("count vectors differ in length".into()));
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(StatsError::EmptySample);
    }
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let tot = (x + y) as f64;
        if tot == 0.0 {
            continue;
        }
        cells += 1;
        let (ea, eb) = (tot * na / (na + nb), tot * nb / (na + nb));
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    if cells < 2 {
        return Err(StatsError::Invalid("need at least two nonempty cells".into()));
    }
    let df = cells - 1;
    let p = ChiSquared::new(df as f64).map_err(|e| StatsError::Invalid(e.to_string()))?.sf(stat);
    Ok(ChiSquareResult { statistic: stat, df, p })
}

/// `E Z^k` for `Z = BESQ_{x0}(2θ)` at time `y`, from the transition
/// `Z ~ Gamma(θ + K, rate 1/2y)` with `K ~ Poisson(x0/2y)`.
pub fn besq_moment(x0: f64, theta: f64, y: f64, k: u32) -> f64 {
    if y == 0.0 {
        return x0.powi(k as i32);
    }
    let lam = x0 / (2.0 * y);
    let rising = |a: f64| (0..k).map(|i| a + i as f64).product::<f64>();
    let mut sum = 0.0;
    let mut pmf = (-lam).exp();
    let mut j = 0u64;
    loop {
        let term = pmf * rising(theta + j as f64);
        sum += term;
        j += 1;
        pmf *= lam / j as f64;
        if j as f64 > lam && term < 1e-17 * sum.max(1e-300) {
            break;
        }
    }
    (2.0 * y).powi(k as i32) * sum
}

fn replicate<T: Send>(reps: usize, seed: u64, tag: u64, f: impl Fn(&mut RngStream) -> T + Sync) -> Vec<T> {
    (0..reps).into_par_iter().map(|i| f(&mut RngStream::derive(seed, &[tag, i as u64]))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCheck {
    pub sigma: String,
    pub target: f64,
    pub estimate: MeanSe,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoStationarityReport {
    pub alpha: f64,
    pub theta: f64,
    pub y: f64,
    pub reps: usize,
    pub seed: u64,
    pub moments: Vec<MomentCheck>,
    /// Largest block of `β^y` against `Z(y)` times the largest block of an independent `β̄`.
    pub largest_block_ks: Option<KsResult>,
    pub pass: bool,
}

/// Starts from `β̄ ~ PDIP(α, θ)`, applies the kernel at level `y` and checks
/// `E m°_σ(β^y) = E Z(y)^{|σ|} · E m°_σ(β̄)` for `σ ∈ {(2), (1,1), (3)}` with
/// `Z ~ BESQ_1(2θ)`.
pub fn pseudo_stationarity_test(
    alpha: f64,
    theta: f64,
    y: f64,
    reps: usize,
    cfg: KernelConfig,
    seed: u64,
) -> Result<PseudoStationarityReport, StatsError> {
    dist::check_alpha(alpha)?;
    if reps < 2 {
        return Err(StatsError::TooFewSamples { need: 2, got: reps });
    }
    let sigmas: Vec<Composition> = ["(2)", "(1,1)", "(3)"].iter().map(|s| s.parse().expect("literal")).collect();
    let params = if y > 0.0 { Some(KernelParams::new(alpha, theta, y)?) } else { None };
    let rows = replicate(reps, seed, 0x5053, |rng| {
        let start = stickbreak(alpha, theta, cfg.trunc, rng);
        let end = match params {
            Some(p) => kernel_step_generalized(&start, p, cfg, rng),
            None => start,
        };
        let ms: Vec<f64> = sigmas.iter().map(|s| m_circ(s, &end)).collect();
        let z = if y > 0.0 { dist::besq_step(1.0, 2.0 * theta, y, rng) } else { 1.0 };
        let other = stickbreak(alpha, theta, cfg.trunc, rng);
        (ms, end.largest(), z * other.largest())
    });
    let mut moments = Vec::new();
    for (i, s) in sigmas.iter().enumerate() {
        let sample: Vec<f64> = rows.iter().map(|r| r.0[i]).collect();
        let target = besq_moment(1.0, theta, y, s.size()) * pdip_moment(s, alpha, theta);
        let estimate = mean_se(&sample)?;
        let z = (estimate.mean - target) / estimate.se;
        moments.push(MomentCheck { sigma: s.to_string(), target, estimate, z, pass: z.abs() <= Z_BAND });
    }
    let largest_block_ks = if y > 0.0 {
        let a: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let b: Vec<f64> = rows.iter().map(|r| r.2).collect();
        Some(ks_two_sample(&a, &b)?)
    } else {
        None
    };
    let pass = moments.iter().all(|m| m.pass) && largest_block_ks.is_none_or(|k| k.p > SIGNIFICANCE);
    Ok(PseudoStationarityReport { alpha, theta, y, reps, seed, moments, largest_block_ks, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdPoint {
    pub u: f64,
    /// `(E m°_σ(β̄^u) - m°_σ(β)) / u`.
    pub slope: MeanSe,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorFdReport {
    pub sigma: String,
    pub alpha: f64,
    pub theta: f64,
    pub reps: usize,
    pub seed: u64,
    pub level_step: f64,
    pub points: Vec<FdPoint>,
    /// Intercept at `u = 0` of the least-squares line through the per-`u`
    /// slopes, computed replica by replica so its SE accounts for the
    /// correlation between `u` values.
    pub extrapolated: MeanSe,
    /// `2 𝒜_{α,θ} m°_σ(β)`.
    pub target: f64,
    /// `max(rel_tol · |target|, 3 SE)`.
    pub tolerance: f64,
    pub pass: bool,
}

/// Settings of [`generator_fd_test`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdConfig {
    pub u_list: Vec<f64>,
    pub reps: usize,
    pub level_step: f64,
    /// Relative half-width of the acceptance band, floored at 3 SE.
    pub rel_tol: f64,
    pub kernel: KernelConfig,
    pub seed: u64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            u_list: vec![0.02, 0.01, 0.005],
            reps: 10_000,
            level_step: 1e-3,
            rel_tol: 0.1,
            kernel: KernelConfig { abs_mass: 1e-5, ..KernelConfig::default() },
            seed: 0,
        }
    }
}

/// Finite-difference estimates of the generator of the de-Poissonized
/// evolution on `m°_σ` at `β`, one report per `σ`, all from the same
/// `simulate_pdipe` replicas on the level grid `k · level_step`.
pub fn generator_fd_test(
    beta: &IntervalPartition,
    sigmas: &[Composition],
    alpha: f64,
    theta: f64,
    cfg: &FdConfig,
) -> Result<Vec<GeneratorFdReport>, StatsError> {
    if cfg.reps < 2 {
        return Err(StatsError::TooFewSamples { need: 2, got: cfg.reps });
    }
    let mut us = cfg.u_list.clone();
    us.sort_by(f64::total_cmp);
    us.dedup();
    if us.len() < 2 || us[0] <= 0.0 {
        return Err(StatsError::Invalid("need at least two distinct positive u values".into()));
    }
    let targets = sigmas
        .iter()
        .map(|s| generator_circ(s, beta, alpha, theta).map(|g| 2.0 * g))
        .collect::<Result<Vec<f64>, _>>()?;
    let m0: Vec<f64> = sigmas.iter().map(|s| m_circ(s, beta)).collect();
    let rows = replicate(cfg.reps, cfg.seed, 0x4644, |rng| -> Result<Vec<Vec<f64>>, StatsError> {
        let path = simulate_pdipe(beta, alpha, theta, &us, cfg.level_step, cfg.kernel, rng)?;
        if path.states.len() < us.len() {
            return Err(StatsError::Invalid(format!("evolution absorbed at level {:?}", path.absorbed_at)));
        }
        Ok(sigmas
            .iter()
            .zip(&m0)
            .map(|(sig, m0)| path.states.iter().map(|st| (m_circ(sig, &st.state) - m0) / st.u).collect())
            .collect())
    });
    let rows: Vec<Vec<Vec<f64>>> = rows.into_iter().collect::<Result<_, _>>()?;
    // Least-squares intercept weights for the line through (u_i, d_i).
    let k = us.len() as f64;
    let (su, suu) = (us.iter().sum::<f64>(), us.iter().map(|u| u * u).sum::<f64>());
    let w: Vec<f64> = us.iter().map(|u| (suu - u * su) / (k * suu - su * su)).collect();
    let mut out = Vec::with_capacity(sigmas.len());
    for (si, sig) in sigmas.iter().enumerate() {
        let mut points = Vec::new();
        for (i, &u) in us.iter().enumerate() {
            let col: Vec<f64> = rows.iter().map(|r| r[si][i]).collect();
            points.push(FdPoint { u, slope: mean_se(&col)? });
        }
        let ext: Vec<f64> = rows.iter().map(|r| r[si].iter().zip(&w).map(|(d, w)| d * w).sum()).collect();
        let extrapolated = mean_se(&ext)?;
        let target = targets[si];
        let tolerance = (cfg.rel_tol * target.abs()).max(Z_BAND * extrapolated.se);
        out.push(GeneratorFdReport {
            sigma: sig.to_string(),
            alpha,
            theta,
            reps: cfg.reps,
            seed: cfg.seed,
            level_step: cfg.level_step,
            points,
            extrapolated,
            target,
            tolerance,
            pass: (extrapolated.mean - target).abs() <= tolerance,
        });
    }
    Ok(out)
}
