//! Pre-registered cross-construction studies shared by the CLI `check`
//! command and the acceptance suite.

use crate::dist::{self, RngStream};
use crate::kernel::{kernel_step, kernel_step_generalized, KernelConfig, KernelParams};
use crate::partition::IntervalPartition;
use crate::scaffold::{self, ScaffoldConfig};
use crate::stats::{self, ChiSquareResult, KsResult, MeanSe, StatsError, SIGNIFICANCE, Z_BAND};
use crate::updown::{ocrp_pmf, run_chain, sample_ordered_crp, StepOrder};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

fn par_reps<T: Send>(reps: usize, seed: u64, tag: u64, f: impl Fn(&mut RngStream) -> T + Sync) -> Vec<T> {
    (0..reps).into_par_iter().map(|i| f(&mut RngStream::derive(seed, &[tag, i as u64]))).collect()
}

fn blocks_above(p: &IntervalPartition, h: f64) -> f64 {
    p.lengths().filter(|&l| l > h).count() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceParams {
    pub alpha: f64,
    pub b: f64,
    pub y: f64,
    pub eps0: f64,
    pub level_step0: f64,
    /// Number of times `ε` and the level step are halved after the first run.
    pub halvings: u32,
    pub reps: usize,
    pub ref_reps: usize,
    /// Bound on the KS statistic at the coarsest resolution.
    pub tol: f64,
    pub compensate_small: bool,
    pub seed: u64,
}

impl Default for ConvergenceParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            b: 1.0,
            y: 0.3,
            eps0: 1e-4,
            level_step0: 1e-3,
            halvings: 1,
            reps: 10_000,
            ref_reps: 100_000,
            tol: 0.02,
            compensate_small: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionRow {
    pub eps: f64,
    pub level_step: f64,
    pub snap: f64,
    /// Two-sample KS on the total mass at level `y`.
    pub ks_mass: KsResult,
    /// Two-sample KS on the number of blocks longer than 0.05.
    pub ks_blocks: KsResult,
    pub mean_mass: MeanSe,
    pub p_empty: f64,
    pub mean_jumps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub params: ConvergenceParams,
    pub kernel_mean_mass: MeanSe,
    pub kernel_p_empty: f64,
    pub rows: Vec<ResolutionRow>,
    pub non_increasing: bool,
    pub pass: bool,
}

/// Clades of one block of mass `b` read at level `y` against the exact
/// kernel with `θ = 0`, at `ε₀ / 2^k` and `step₀ / 2^k`. Runs at different
/// resolutions reuse replica seeds and share jump bands, so they are coupled.
pub fn scaffold_kernel_study(p: &ConvergenceParams) -> Result<ConvergenceReport, StatsError> {
    let kp = KernelParams::new(p.alpha, 0.0, p.y)?;
    let init = IntervalPartition::from_lengths(&[p.b]);
    let reference = par_reps(p.ref_reps, p.seed, 0x4b52, |rng| {
        let s = kernel_step(&init, kp, KernelConfig::default(), rng);
        (s.mass(), blocks_above(&s, 0.05))
    });
    let ref_mass: Vec<f64> = reference.iter().map(|r| r.0).collect();
    let ref_blocks: Vec<f64> = reference.iter().map(|r| r.1).collect();
    let mut rows = Vec::new();
    for k in 0..=p.halvings {
        let scale = 0.5f64.powi(k as i32);
        let mut cfg = ScaffoldConfig::new(p.alpha, p.eps0 * scale, p.level_step0 * scale);
        cfg.compensate_small = p.compensate_small;
        cfg.band_base = Some(p.eps0);
        let runs = par_reps(p.reps, p.seed, 0x434c, |rng| -> Result<(f64, f64, f64, u64), StatsError> {
            let field = scaffold::sample_clade_seeded(p.b, &[p.y], cfg, rng.next_u64())?;
            let sk = scaffold::skewer(p.y, &field);
            Ok((sk.partition.mass(), blocks_above(&sk.partition, 0.05), sk.snap, field.jump_count))
        });
        let runs: Vec<(f64, f64, f64, u64)> = runs.into_iter().collect::<Result<_, _>>()?;
        let mass: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let blocks: Vec<f64> = runs.iter().map(|r| r.1).collect();
        rows.push(ResolutionRow {
            eps: cfg.eps,
            level_step: cfg.level_step,
            snap: runs.first().map_or(0.0, |r| r.2),
            ks_mass: stats::ks_two_sample(&mass, &ref_mass)?,
            ks_blocks: stats::ks_two_sample(&blocks, &ref_blocks)?,
            mean_mass: stats::mean_se(&mass)?,
            p_empty: mass.iter().filter(|&&m| m == 0.0).count() as f64 / mass.len() as f64,
            mean_jumps: runs.iter().map(|r| r.3 as f64).sum::<f64>() / runs.len() as f64,
        });
    }
    let non_increasing = rows.windows(2).all(|w| w[1].ks_mass.d <= w[0].ks_mass.d);
    let pass = rows[0].ks_mass.d <= p.tol && non_increasing;
    Ok(ConvergenceReport {
        params: p.clone(),
        kernel_mean_mass: stats::mean_se(&ref_mass)?,
        kernel_p_empty: ref_mass.iter().filter(|&&m| m == 0.0).count() as f64 / ref_mass.len() as f64,
        rows,
        non_increasing,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelMassCheck {
    pub level: f64,
    /// One-sample KS of the total mass against `Gamma(θ, rate 1/2y)`.
    pub ks: KsResult,
    pub mean_mass: MeanSe,
    pub target_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayKnightReport {
    pub x: f64,
    pub theta: f64,
    pub config: ScaffoldConfig,
    pub reps: usize,
    pub seed: u64,
    pub levels: Vec<LevelMassCheck>,
    pub pass: bool,
}

/// Total mass of the perturbed Ray–Knight skewers against the marginals of
/// `BESQ_0(2θ)`.
pub fn ray_knight_mass_check(
    x: f64,
    theta: f64,
    levels: &[f64],
    cfg: ScaffoldConfig,
    reps: usize,
    seed: u64,
) -> Result<RayKnightReport, StatsError> {
    let runs = par_reps(reps, seed, 0x524b, |rng| scaffold::ray_knight_perturbed(x, theta, levels, cfg, rng));
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for (i, sk) in runs[0].iter().enumerate() {
        let y = sk.level;
        let mass: Vec<f64> = runs.iter().map(|r| r[i].partition.mass()).collect();
        let law = Gamma::new(theta, 1.0 / (2.0 * y)).map_err(|e| StatsError::Invalid(e.to_string()))?;
        out.push(LevelMassCheck {
            level: y,
            ks: stats::ks_one_sample(&mass, |m| law.cdf(m))?,
            mean_mass: stats::mean_se(&mass)?,
            target_mean: 2.0 * theta * y,
        });
    }
    let pass = out.iter().all(|c| c.ks.p > SIGNIFICANCE);
    Ok(RayKnightReport { x, theta, config: cfg, reps, seed, levels: out, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpDownReport {
    pub n: u32,
    pub alpha: f64,
    pub theta: f64,
    pub samples: usize,
    pub steps: usize,
    pub seed: u64,
    /// Cells in lexicographic order of compositions, as `(composition, chain count, direct count, exact probability)`.
    pub cells: Vec<(String, u64, u64, f64)>,
    /// Chain endpoints against the exact ordered-CRP law.
    pub goodness_of_fit: ChiSquareResult,
    /// Chain endpoints against direct ordered-CRP samples.
    pub homogeneity: ChiSquareResult,
    pub pass: bool,
}

/// Endpoints of independent chains of `steps` transitions started from `n`
/// up-steps of a different stream, compared with the ordered-CRP law.
pub fn updown_stationarity(n: u32, alpha: f64, theta: f64, samples: usize, steps: usize, seed: u64) -> Result<UpDownReport, StatsError> {
    let pmf = ocrp_pmf(n, alpha, theta);
    let index = |c: &crate::moments::Composition| pmf.keys().position(|k| k == c).expect("composition of n");
    let chain = par_reps(samples, seed, 0x5544, |rng| -> Result<usize, StatsError> {
        let path = run_chain(n, alpha, theta, steps, StepOrder::default(), rng).map_err(|e| StatsError::Invalid(e.to_string()))?;
        Ok(index(path.last().expect("nonempty path")))
    });
    let direct = par_reps(samples, seed, 0x4443, |rng| index(&sample_ordered_crp(n, alpha, theta, rng)));
    let mut cc = vec![0u64; pmf.len()];
    let mut dc = vec![0u64; pmf.len()];
    for i in chain {
        cc[i?] += 1;
    }
    for i in direct {
        dc[i] += 1;
    }
    let probs: Vec<f64> = pmf.values().copied().collect();
    let goodness_of_fit = stats::chi_square_gof(&cc, &probs)?;
    let homogeneity = stats::chi_square_homogeneity(&cc, &dc)?;
    let cells = pmf.iter().enumerate().map(|(i, (c, &p))| (c.to_string(), cc[i], dc[i], p)).collect();
    let pass = goodness_of_fit.p > SIGNIFICANCE && homogeneity.p > SIGNIFICANCE;
    Ok(UpDownReport { n, alpha, theta, samples, steps, seed, cells, goodness_of_fit, homogeneity, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZCheck {
    pub name: String,
    pub target: f64,
    pub estimate: MeanSe,
    pub z: f64,
    pub pass: bool,
}

impl ZCheck {
    pub fn new(name: &str, target: f64, estimate: MeanSe) -> Self {
        let z = (estimate.mean - target) / estimate.se;
        Self { name: name.to_string(), target, estimate, z, pass: z.abs() <= Z_BAND }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TotalMassReport {
    pub alpha: f64,
    pub theta: f64,
    pub y: f64,
    pub initial_mass: f64,
    pub reps: usize,
    pub seed: u64,
    pub checks: Vec<ZCheck>,
    pub pass: bool,
}

/// Mean and variance of `‖β^y‖` from `init` against `BESQ(2θ)`:
/// `M + 2θy` and `4My + 4θy²`.
pub fn total_mass_check(
    init: &IntervalPartition,
    alpha: f64,
    theta: f64,
    y: f64,
    reps: usize,
    cfg: KernelConfig,
    seed: u64,
) -> Result<TotalMassReport, StatsError> {
    let kp = KernelParams::new(alpha, theta, y)?;
    let m0 = init.mass();
    let masses = par_reps(reps, seed, 0x544d, |rng| kernel_step_generalized(init, kp, cfg, rng).mass());
    let mean_target = m0 + 2.0 * theta * y;
    let var_target = 4.0 * m0 * y + 4.0 * theta * y * y;
    let sq: Vec<f64> = masses.iter().map(|m| (m - mean_target).powi(2)).collect();
    let checks = vec![
        ZCheck::new("mean", mean_target, stats::mean_se(&masses)?),
        ZCheck::new("variance", var_target, stats::mean_se(&sq)?),
    ];
    let pass = checks.iter().all(|c| c.pass);
    Ok(TotalMassReport { alpha, theta, y, initial_mass: m0, reps, seed, checks, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DustEntranceReport {
    pub alpha: f64,
    pub z: f64,
    pub y: f64,
    pub reps: usize,
    pub seed: u64,
    pub checks: Vec<ZCheck>,
    pub pass: bool,
}

/// From pure dust of mass `z` with `θ = 0`: `P(β^y = ∅) = e^{-z/2y}` and `E‖β^y‖ = z`.
pub fn dust_entrance_check(alpha: f64, z: f64, y: f64, reps: usize, cfg: KernelConfig, seed: u64) -> Result<DustEntranceReport, StatsError> {
    let kp = KernelParams::new(alpha, 0.0, y)?;
    let init = IntervalPartition::dust_only(z);
    let masses = par_reps(reps, seed, 0x4445, |rng| kernel_step_generalized(&init, kp, cfg, rng).mass());
    let empty: Vec<f64> = masses.iter().map(|&m| if m == 0.0 { 1.0 } else { 0.0 }).collect();
    let p = dist::besq0_extinction_prob(z, y);
    let mut e = stats::mean_se(&empty)?;
    e.se = (p * (1.0 - p) / reps as f64).sqrt();
    let checks = vec![ZCheck::new("p_empty", p, e), ZCheck::new("mean_mass", z, stats::mean_se(&masses)?)];
    let pass = checks.iter().all(|c| c.pass);
    Ok(DustEntranceReport { alpha, z, y, reps, seed, checks, pass })
}
