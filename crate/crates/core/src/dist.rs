//! Seeded samplers for the nonstandard laws used by the constructions.
//!
//! All samplers are exact given a uniform source, except the subordinator and
//! stable-field routines, which truncate jumps below `ε` and replace them by
//! their mean drift.

use crate::partition::IntervalPartition;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("rate {0} is not positive")]
    NonPositiveRate(f64),
    #[error("negative input: x0 = {0}, dim = {1}, t = {2}")]
    NegativeInputs(f64, f64, f64),
    #[error("bridge grid point {0} lies outside (0, {1})")]
    GridOutsideBridge(f64, f64),
    #[error("level step {0} exceeds the initial value {1}")]
    StepTooCoarse(f64, f64),
    #[error("parameter {name} = {value} is out of range")]
    OutOfRange { name: &'static str, value: f64 },
}

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Distinct stream ids select disjoint ChaCha streams under the same key.
#[derive(Debug, Clone)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
    inner: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { seed, stream_id, inner }
    }

    /// Stream for a nested index path such as `(experiment, replica)`.
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        Self::new(seed, mix_path(path))
    }

    /// A child stream keyed by the next 64 bits of this one.
    pub fn split(&mut self) -> Self {
        let id = self.inner.next_u64();
        Self::new(self.seed ^ 0x9e37_79b9_7f4a_7c15, id)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix_path(path: &[u64]) -> u64 {
    path.iter().fold(0x51_7cc1_b727_220a, |h, &x| splitmix(h ^ splitmix(x)))
}

/// Uniform on the open interval `(0, 1)`.
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Gamma with the given shape and rate; shape 0 is the point mass at 0.
pub fn gamma_rate<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    if shape <= 0.0 {
        return 0.0;
    }
    Gamma::new(shape, 1.0 / rate).expect("valid gamma parameters").sample(rng)
}

pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("valid poisson mean").sample(rng) as u64
}

pub fn beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let x = gamma_rate(a, 1.0, rng);
    let y = gamma_rate(b, 1.0, rng);
    x / (x + y)
}

/// `P(K = k) = rate^k / (k! (e^rate - 1))` for `k ≥ 1`.
pub fn sample_zero_truncated_poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<u64, DistError> {
    if !(rate > 0.0) {
        return Err(DistError::NonPositiveRate(rate));
    }
    if rate < 1.0 {
        let mut u: f64 = rng.random();
        let mut k = 1u64;
        let mut p = rate / rate.exp_m1();
        while u > p {
            u -= p;
            k += 1;
            p *= rate / k as f64;
            if p < 1e-300 {
                break;
            }
        }
        return Ok(k);
    }
    loop {
        let k = poisson(rate, rng);
        if k >= 1 {
            return Ok(k);
        }
    }
}

/// One exact draw of `BESQ_{x0}(dim)` at time `t`.
pub fn sample_besq<R: Rng + ?Sized>(x0: f64, dim: f64, t: f64, rng: &mut R) -> Result<f64, DistError> {
    if x0 < 0.0 || dim < 0.0 || !(t > 0.0) {
        return Err(DistError::NegativeInputs(x0, dim, t));
    }
    Ok(besq_step(x0, dim, t, rng))
}

pub(crate) fn besq_step<R: Rng + ?Sized>(x0: f64, dim: f64, t: f64, rng: &mut R) -> f64 {
    let k = poisson(x0 / (2.0 * t), rng);
    gamma_rate(0.5 * dim + k as f64, 1.0 / (2.0 * t), rng)
}

/// `P(BESQ_z(0) is absorbed by time y) = e^{-z/2y}`.
pub fn besq0_extinction_prob(z: f64, y: f64) -> f64 {
    (-z / (2.0 * y)).exp()
}

/// Joint values of a `BESQ(dim)` bridge from 0 to 0 over `[0, z]` at the given
/// increasing interior points, by space-time inversion of `BESQ_0(dim)`.
pub fn sample_besq_bridge_grid<R: Rng + ?Sized>(
    z: f64,
    dim: f64,
    levels: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>, DistError> {
    let mut prev = 0.0;
    for &s in levels {
        if !(s > prev && s < z) {
            return Err(DistError::GridOutsideBridge(s, z));
        }
        prev = s;
    }
    Ok(bridge_values(z, dim, levels.iter().copied(), rng))
}

pub(crate) fn bridge_values<R: Rng + ?Sized, I: IntoIterator<Item = f64>>(
    z: f64,
    dim: f64,
    levels: I,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = Vec::new();
    let (mut t_prev, mut x) = (0.0, 0.0);
    for s in levels {
        let t = s * z / (z - s);
        x = besq_step(x, dim, t - t_prev, rng);
        t_prev = t;
        let w = (z - s) / z;
        out.push(w * w * x);
    }
    out
}

/// One step of `BESQ(-2α)` killed at 0, started from `x > 0`, over time `dt`.
///
/// With `G ~ Gamma(1+α)` and `λ = x/2dt`, absorption occurs iff `G > λ`, at
/// time `x/2G`. Otherwise the state is `Gamma(K+1, rate 1/2dt)` with
/// `K ~ Poisson(λ - G)`, which reproduces the `h`-transform of the
/// `BESQ(4+2α)` transition by `y^{-1-α}`.
pub(crate) enum NegStep {
    Alive(f64),
    Absorbed(f64),
}

pub(crate) fn besq_neg_step<R: Rng + ?Sized>(x: f64, alpha: f64, dt: f64, rng: &mut R) -> NegStep {
    let g = gamma_rate(1.0 + alpha, 1.0, rng);
    let lambda = x / (2.0 * dt);
    if g > lambda {
        return NegStep::Absorbed(x / (2.0 * g));
    }
    let k = poisson(lambda - g, rng);
    NegStep::Alive(gamma_rate(k as f64 + 1.0, 1.0 / (2.0 * dt), rng))
}

/// `BESQ_b(-2α)` sampled at increasing times `> 0` until absorption.
///
/// Returns the values at the times reached before absorption and the exact
/// lifetime.
pub(crate) fn besq_neg_at<R: Rng + ?Sized, I: IntoIterator<Item = f64>>(
    b: f64,
    alpha: f64,
    times: I,
    rng: &mut R,
) -> (Vec<f64>, f64) {
    let mut values = Vec::new();
    let (mut t_prev, mut x) = (0.0, b);
    for t in times {
        match besq_neg_step(x, alpha, t - t_prev, rng) {
            NegStep::Alive(y) => {
                values.push(y);
                x = y;
                t_prev = t;
            }
            NegStep::Absorbed(dt) => return (values, t_prev + dt),
        }
    }
    let g = gamma_rate(1.0 + alpha, 1.0, rng);
    (values, t_prev + x / (2.0 * g))
}

/// A grid path of `BESQ_b(-2α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NegPath {
    /// Values at `k · step` for `k = 0, 1, ...` while alive, then a final 0.
    pub path: Vec<f64>,
    pub lifetime: f64,
}

/// Grid path of `BESQ_b(-2α)` on `k · level_step`, absorbed at 0.
pub fn sample_besq_neg_path<R: Rng + ?Sized>(
    b: f64,
    alpha: f64,
    level_step: f64,
    rng: &mut R,
) -> Result<NegPath, DistError> {
    if !(b > 0.0) {
        return Err(DistError::OutOfRange { name: "b", value: b });
    }
    check_alpha(alpha)?;
    if !(level_step > 0.0) || level_step > b {
        return Err(DistError::StepTooCoarse(level_step, b));
    }
    let (values, lifetime) = besq_neg_at(b, alpha, (1..).map(|k| k as f64 * level_step), rng);
    let mut path = Vec::with_capacity(values.len() + 2);
    path.push(b);
    path.extend(values);
    path.push(0.0);
    Ok(NegPath { path, lifetime })
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), DistError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(DistError::OutOfRange { name: "alpha", value: alpha })
    }
}

/// Constants of the spectrally positive `(1+α)`-stable scaffolding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableLevy {
    pub alpha: f64,
    /// `2^α Γ(1-α) Γ(1+α)`.
    norm: f64,
}

impl StableLevy {
    pub fn new(alpha: f64) -> Result<Self, DistError> {
        check_alpha(alpha)?;
        Ok(Self { alpha, norm: 2f64.powf(alpha) * gamma(1.0 - alpha) * gamma(1.0 + alpha) })
    }

    /// Lévy density `α(α+1) z^{-α-2} / (2^α Γ(1-α) Γ(1+α))`.
    pub fn levy_density(&self, z: f64) -> f64 {
        let a = self.alpha;
        a * (a + 1.0) * z.powf(-a - 2.0) / self.norm
    }

    /// Rate of jumps larger than `eps`.
    pub fn rate(&self, eps: f64) -> f64 {
        self.alpha * eps.powf(-1.0 - self.alpha) / self.norm
    }

    /// Speed of the compensating downward drift for jumps larger than `eps`.
    pub fn drift(&self, eps: f64) -> f64 {
        (1.0 + self.alpha) * eps.powf(-self.alpha) / self.norm
    }

    /// Laplace exponent `ψ(λ) = λ^{1+α} / (2^α Γ(1+α))`, `E e^{-λX_t} = e^{tψ(λ)}`.
    pub fn laplace_exponent(&self, lambda: f64) -> f64 {
        lambda.powf(1.0 + self.alpha) / (2f64.powf(self.alpha) * gamma(1.0 + self.alpha))
    }

    /// Jump size with `P(Z > z) = (z/eps)^{-1-α}`.
    pub fn jump_size<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R) -> f64 {
        eps * open01(rng).powf(-1.0 / (1.0 + self.alpha))
    }

    /// Jump size conditioned to lie in `(lo, hi]`.
    pub fn jump_size_in<R: Rng + ?Sized>(&self, lo: f64, hi: f64, rng: &mut R) -> f64 {
        let a = 1.0 + self.alpha;
        let (tl, th) = (lo.powf(-a), hi.powf(-a));
        let u: f64 = rng.random();
        (th + u * (tl - th)).powf(-1.0 / a).clamp(lo, hi)
    }

    /// Exact first-passage time of the untruncated process down by `depth`.
    pub fn passage_time<R: Rng + ?Sized>(&self, depth: f64, rng: &mut R) -> f64 {
        let a = self.alpha;
        let c = 2f64.powf(a) * gamma(1.0 + a);
        depth.powf(1.0 + a) * c * positive_stable(1.0 / (1.0 + a), rng)
    }
}

/// Positive stable variable with `E e^{-qS} = e^{-q^ρ}`, by Kanter's representation.
pub fn positive_stable<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> f64 {
    let u = PI * open01(rng);
    let e = exp1(rng);
    let a = (rho * u).sin().powf(rho / (1.0 - rho)) * ((1.0 - rho) * u).sin() / u.sin().powf(1.0 / (1.0 - rho));
    (a / e).powf((1.0 - rho) / rho)
}

/// Jumps larger than `eps` of the scaffolding on `[0, horizon]`, in time order.
pub fn sample_stable_jump_field<R: Rng + ?Sized>(
    horizon: f64,
    alpha: f64,
    eps: f64,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>, DistError> {
    let lev = StableLevy::new(alpha)?;
    if !(eps > 0.0) {
        return Err(DistError::OutOfRange { name: "eps", value: eps });
    }
    let n = poisson(horizon * lev.rate(eps), rng);
    let mut times: Vec<f64> = (0..n).map(|_| horizon * rng.random::<f64>()).collect();
    times.sort_by(f64::total_cmp);
    Ok(times.into_iter().map(|t| (t, lev.jump_size(eps, rng))).collect())
}

/// Outcome of running a stable subordinator up to an independent exponential level.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordinatorRange {
    /// The exponential level `S`.
    pub level: f64,
    /// `Y(T-)`, the value just before first passage above `S`.
    pub pre_mass: f64,
    /// Jump intervals before `T`; the compensating drift appears as dust.
    pub partition: IntervalPartition,
    /// `S - Y(T-)`.
    pub overshoot: f64,
}

/// Stable(α) subordinator with Laplace exponent `q^α`, run to first passage
/// above `S ~ Exponential(λ)`.
pub fn sample_stable_subordinator_range<R: Rng + ?Sized>(
    lambda: f64,
    alpha: f64,
    eps: f64,
    rng: &mut R,
) -> Result<SubordinatorRange, DistError> {
    check_alpha(alpha)?;
    if !(lambda > 0.0) {
        return Err(DistError::NonPositiveRate(lambda));
    }
    if !(eps > 0.0) {
        return Err(DistError::OutOfRange { name: "eps", value: eps });
    }
    let level = exp1(rng) / lambda;
    let g = gamma(1.0 - alpha);
    let rate = eps.powf(-alpha) / g;
    let drift = alpha * eps.powf(1.0 - alpha) / ((1.0 - alpha) * g);
    let mut blocks = Vec::new();
    let mut y = 0.0;
    loop {
        let creep = drift * exp1(rng) / rate;
        if y + creep >= level {
            y = level;
            break;
        }
        y += creep;
        let z = eps * open01(rng).powf(-1.0 / alpha);
        if y + z > level {
            break;
        }
        blocks.push((y, y + z));
        y += z;
    }
    Ok(SubordinatorRange {
        level,
        pre_mass: y,
        partition: IntervalPartition::from_sorted_unchecked(blocks, y),
        overshoot: level - y,
    })
}
