//! Path-level construction: stable scaffolding marked by BESQ spindles, the
//! skewer map, clades and the two Ray–Knight constructions.
//!
//! The scaffolding keeps jumps larger than `ε` and replaces the rest by the
//! compensating linear drift. Three devices keep the construction exact
//! where possible and cheap elsewhere:
//!
//! * Spindles are sampled only at the recorded grid levels they straddle,
//!   from their exact finite-dimensional laws, so the level grid adds no bias.
//! * The scaffolding has no negative jumps, so it passes downward through a
//!   level continuously. Once it jumps above the highest recorded level the
//!   excursion above that level contributes nothing, and it is skipped: the
//!   walk resumes at that level after an exact stable passage time.
//! * Jumps are drawn from independent bands `(ε₀, ∞)`, `(ε₀/2, ε₀]`, ...,
//!   so runs at `ε₀/2^k` for different `k` share their larger jumps.
//!
//! Optionally, the expected mass of the discarded spindles shorter than `ε`
//! is added as dust wherever the drift crosses a recorded level.

use crate::dist::{self, DistError, RngStream, StableLevy};
use crate::partition::IntervalPartition;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaffoldConfig {
    pub alpha: f64,
    /// Jump truncation `ε`.
    pub eps: f64,
    /// Spacing of the level grid on which spindles are recorded.
    pub level_step: f64,
    /// Add the expected mass of spindles shorter than `ε` as dust.
    pub compensate_small: bool,
    /// Coarsest band edge `ε₀`; `ε` must equal `ε₀ / 2^k`. `None` means `ε₀ = ε`.
    pub band_base: Option<f64>,
    /// Abort a run after this many jumps, flagging the field as incomplete.
    pub max_jumps: u64,
}

impl ScaffoldConfig {
    pub fn new(alpha: f64, eps: f64, level_step: f64) -> Self {
        Self { alpha, eps, level_step, compensate_small: true, band_base: None, max_jumps: 1 << 34 }
    }

    fn validate(&self) -> Result<(), DistError> {
        dist::check_alpha(self.alpha)?;
        for (name, v) in [("eps", self.eps), ("level_step", self.level_step)] {
            if !(v > 0.0) {
                return Err(DistError::OutOfRange { name, value: v });
            }
        }
        Ok(())
    }

    fn halvings(&self) -> Result<(f64, u32), DistError> {
        let base = self.band_base.unwrap_or(self.eps);
        let k = (base / self.eps).log2().round();
        if !(k >= 0.0) || (base / 2f64.powf(k) - self.eps).abs() > 1e-9 * self.eps {
            return Err(DistError::OutOfRange { name: "band_base", value: base });
        }
        Ok((base, k as u32))
    }

    pub fn grid_index(&self, y: f64) -> i64 {
        (y / self.level_step).round() as i64
    }

    pub fn grid_level(&self, idx: i64) -> f64 {
        idx as f64 * self.level_step
    }
}

/// A scaffolding jump that straddles at least one recorded level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkedJump {
    pub time: f64,
    /// Jump size, equal to the spindle lifetime.
    pub size: f64,
    /// Skewer coordinate just before the jump.
    pub base: f64,
    /// Spindle widths at the recorded grid levels it straddles, as `(grid index, width)`.
    pub widths: Vec<(i64, f64)>,
}

/// Expected mass of sub-`ε` spindles met at one downward crossing of a level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallMass {
    pub time: f64,
    pub level: i64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpindleField {
    pub config: ScaffoldConfig,
    pub jumps: Vec<MarkedJump>,
    pub small: Vec<SmallMass>,
    /// `(time, X(t-), X(t))` for every jump; kept only by [`build_scaffolding`].
    pub skeleton: Vec<(f64, f64, f64)>,
    pub end_time: f64,
    /// Final value of the skewer coordinate.
    pub end_value: f64,
    pub jump_count: u64,
    /// Grid indices of recorded levels; `None` records every grid level.
    pub recorded: Option<Vec<i64>>,
    pub complete: bool,
}

/// A skewer read off a field, with the grid snapping it involved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skewer {
    pub requested: f64,
    pub level: f64,
    pub snap: f64,
    pub partition: IntervalPartition,
}

/// Blocks are the spindle widths at the grid level nearest `y`, in time
/// order, interleaved with any small-spindle dust recorded there.
pub fn skewer(y: f64, field: &SpindleField) -> Skewer {
    let idx = field.config.grid_index(y);
    let level = field.config.grid_level(idx);
    let mut items: Vec<(f64, bool, f64)> = Vec::new();
    for j in &field.jumps {
        if let Some(&(_, w)) = j.widths.iter().find(|(i, _)| *i == idx) {
            items.push((j.time, true, w));
        }
    }
    for s in field.small.iter().filter(|s| s.level == idx) {
        items.push((s.time, false, s.mass));
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let partition = IntervalPartition::from_atoms(items.into_iter().map(|(_, blk, m)| (blk, m)));
    Skewer { requested: y, level, snap: (level - y).abs(), partition }
}

struct Band {
    lo: f64,
    hi: f64,
    rate: f64,
    rng: RngStream,
    next: f64,
}

/// Merged Poisson streams of jumps, one per size band.
struct JumpSource {
    lev: StableLevy,
    bands: Vec<Band>,
    seed: u64,
    segment: u64,
}

impl JumpSource {
    fn new(lev: StableLevy, base: f64, halvings: u32, seed: u64) -> Self {
        let mut bands = Vec::with_capacity(halvings as usize + 1);
        let mut hi = f64::INFINITY;
        let mut lo = base;
        for _ in 0..=halvings {
            let rate = lev.rate(lo) - if hi.is_finite() { lev.rate(hi) } else { 0.0 };
            bands.push(Band { lo, hi, rate, rng: RngStream::new(seed, 0), next: 0.0 });
            hi = lo;
            lo *= 0.5;
        }
        let mut src = Self { lev, bands, seed, segment: 0 };
        src.restart(0.0);
        src
    }

    /// Fresh streams for a new segment starting at time `t`.
    fn restart(&mut self, t: f64) {
        self.segment += 1;
        for (k, b) in self.bands.iter_mut().enumerate() {
            b.rng = RngStream::derive(self.seed, &[self.segment, k as u64]);
            b.next = t + dist::exp1(&mut b.rng) / b.rate;
        }
    }

    fn control(&self) -> RngStream {
        RngStream::derive(self.seed, &[self.segment, u64::MAX])
    }

    /// Next jump as `(time, size, spindle seed)`.
    fn next_jump(&mut self) -> (f64, f64, u64) {
        let b = self
            .bands
            .iter_mut()
            .min_by(|x, y| x.next.total_cmp(&y.next))
            .expect("at least one band");
        let t = b.next;
        let z = if b.hi.is_finite() { self.lev.jump_size_in(b.lo, b.hi, &mut b.rng) } else { self.lev.jump_size(b.lo, &mut b.rng) };
        let s = b.rng.next_u64();
        b.next = t + dist::exp1(&mut b.rng) / b.rate;
        (t, z, s)
    }
}

#[derive(Debug, Clone, Copy)]
enum Mode {
    Raw { horizon: f64 },
    Clade,
    Dust { target: f64 },
    Shifted { kappa: f64, shift: f64 },
}

struct Walker {
    cfg: ScaffoldConfig,
    mode: Mode,
    kappa: f64,
    shift: f64,
    x: f64,
    xinf: f64,
    t: f64,
    drift: f64,
    small_rate: f64,
    recorded: Option<Vec<i64>>,
    top: f64,
    field: SpindleField,
}

impl Walker {
    fn coord(&self, x: f64) -> f64 {
        x - self.kappa * self.xinf + self.shift
    }

    /// Recorded grid indices `i` with `lo < level(i) <= hi` (`hi_open` makes it `< hi`).
    fn levels_between(&self, lo: f64, hi: f64, hi_open: bool) -> Vec<i64> {
        let step = self.cfg.level_step;
        let inside = |i: i64| {
            let y = i as f64 * step;
            y > lo && (y < hi || (!hi_open && y == hi))
        };
        match &self.recorded {
            None => {
                let (a, b) = ((lo / step).floor() as i64, (hi / step).ceil() as i64);
                (a..=b).filter(|&i| inside(i)).collect()
            }
            Some(rec) => {
                let start = rec.partition_point(|&i| (i as f64 * step) <= lo);
                rec[start..].iter().copied().take_while(|&i| i as f64 * step <= hi).filter(|&i| inside(i)).collect()
            }
        }
    }

    /// Drift with the running infimum fixed (`on_inf = false`) or dragged
    /// along (`on_inf = true`) from `x_from` down to `x_to`. Returns `true` if
    /// the stopping rule fired inside.
    fn piece(&mut self, x_from: f64, mut x_to: f64, on_inf: bool) -> bool {
        let c = self.drift;
        let slope = if on_inf { 1.0 - self.kappa } else { 1.0 };
        let s_of = |w: &Walker, x: f64| if on_inf { slope * x + w.shift } else { w.coord(x) };
        let s_from = s_of(self, x_from);
        let mut stopped = false;
        match self.mode {
            Mode::Clade | Mode::Shifted { .. } => {
                if s_of(self, x_to) < 0.0 && slope > 0.0 {
                    x_to = x_from - s_from / slope;
                    stopped = true;
                }
            }
            Mode::Dust { target } => {
                if on_inf && x_to <= target {
                    x_to = target;
                    stopped = true;
                }
            }
            Mode::Raw { .. } => {}
        }
        let s_to = if stopped { 0.0f64.min(s_of(self, x_to)) } else { s_of(self, x_to) };
        if self.cfg.compensate_small && slope > 0.0 && s_from > s_to {
            let v = slope * c;
            for idx in self.levels_between(s_to, s_from, false) {
                let y = self.cfg.grid_level(idx);
                let time = self.t + (s_from - y) / v;
                self.field.small.push(SmallMass { time, level: idx, mass: self.small_rate / v });
            }
        }
        self.t += (x_from - x_to) / c;
        self.x = x_to;
        if on_inf {
            self.xinf = x_to;
        }
        stopped
    }

    /// Drift over `dt`; returns `true` if the run stopped.
    fn drift_for(&mut self, dt: f64) -> bool {
        let xa = self.x;
        let xb = xa - self.drift * dt;
        if self.piece(xa, xb.max(self.xinf), false) {
            return true;
        }
        if xb < self.xinf {
            let from = self.xinf;
            return self.piece(from, xb, true);
        }
        false
    }

    fn mark(&mut self, time: f64, size: f64, base: f64, seed: u64) {
        let idxs = self.levels_between(base, base + size, true);
        let mut rng = RngStream::new(seed, 1);
        let keep_skeleton = matches!(self.mode, Mode::Raw { .. });
        if !idxs.is_empty() {
            let local: Vec<f64> = idxs.iter().map(|&i| self.cfg.grid_level(i) - base).collect();
            let vals = dist::bridge_values(size, 4.0 + 2.0 * self.cfg.alpha, local, &mut rng);
            let widths = idxs.into_iter().zip(vals).filter(|&(_, w)| w > 0.0).collect();
            self.field.jumps.push(MarkedJump { time, size, base, widths });
        } else if keep_skeleton {
            self.field.jumps.push(MarkedJump { time, size, base, widths: Vec::new() });
        }
    }

    fn run(mut self, src: &mut JumpSource) -> SpindleField {
        let skip = !matches!(self.mode, Mode::Raw { .. });
        loop {
            if skip && self.coord(self.x) > self.top {
                // The coordinate first returns to `top` when X first passes
                // below `target`; with no negative jumps it gets there continuously.
                let floor = (1.0 - self.kappa) * self.xinf + self.shift;
                let new_inf = floor > self.top;
                let target = if new_inf {
                    (self.top - self.shift) / (1.0 - self.kappa)
                } else {
                    self.x - (self.coord(self.x) - self.top)
                };
                let mut ctl = src.control();
                self.t += src.lev.passage_time(self.x - target, &mut ctl);
                self.x = target;
                if new_inf {
                    self.xinf = target;
                }
                src.restart(self.t);
            }
            if self.field.jump_count >= self.cfg.max_jumps {
                self.field.complete = false;
                break;
            }
            let (t, z, seed) = src.next_jump();
            let mut dt = t - self.t;
            if let Mode::Raw { horizon } = self.mode {
                if t > horizon {
                    dt = horizon - self.t;
                    self.drift_for(dt);
                    self.t = horizon;
                    break;
                }
            }
            if self.drift_for(dt) {
                break;
            }
            self.t = t;
            self.field.jump_count += 1;
            let base = self.coord(self.x);
            self.mark(t, z, base, seed);
            if matches!(self.mode, Mode::Raw { .. }) {
                self.field.skeleton.push((t, self.x, self.x + z));
            }
            self.x += z;
        }
        self.field.end_time = self.t;
        self.field.end_value = self.coord(self.x);
        self.field
    }
}

fn small_rate(cfg: &ScaffoldConfig, lev: &StableLevy) -> f64 {
    // (δ/6) ∫_0^ε z² Π(dz) with δ = 4 + 2α: the mean bridge area is δz²/6.
    let a = cfg.alpha;
    let density_scale = lev.levy_density(1.0);
    (4.0 + 2.0 * a) / 6.0 * density_scale * cfg.eps.powf(1.0 - a) / (1.0 - a)
}

fn walker(cfg: ScaffoldConfig, mode: Mode, recorded: Option<Vec<i64>>, lev: &StableLevy) -> Walker {
    let (kappa, shift) = match mode {
        Mode::Dust { .. } => (1.0, 0.0),
        Mode::Shifted { kappa, shift } => (kappa, shift),
        _ => (0.0, 0.0),
    };
    let top = recorded
        .as_ref()
        .and_then(|r| r.last())
        .map_or(f64::INFINITY, |&i| cfg.grid_level(i));
    Walker {
        cfg,
        mode,
        kappa,
        shift,
        x: 0.0,
        xinf: 0.0,
        t: 0.0,
        drift: lev.drift(cfg.eps),
        small_rate: small_rate(&cfg, lev),
        recorded: recorded.clone(),
        top,
        field: SpindleField {
            config: cfg,
            jumps: Vec::new(),
            small: Vec::new(),
            skeleton: Vec::new(),
            end_time: 0.0,
            end_value: 0.0,
            jump_count: 0,
            recorded,
            complete: true,
        },
    }
}

fn record_set(cfg: &ScaffoldConfig, levels: &[f64]) -> Vec<i64> {
    let mut v: Vec<i64> = levels.iter().map(|&y| cfg.grid_index(y)).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Compensated scaffolding on `[0, horizon]` with every jump marked by a
/// `BESQ(4+2α)` bridge recorded at every grid level it straddles.
pub fn build_scaffolding<R: Rng + ?Sized>(horizon: f64, cfg: ScaffoldConfig, rng: &mut R) -> Result<SpindleField, DistError> {
    cfg.validate()?;
    let (base, k) = cfg.halvings()?;
    let lev = StableLevy::new(cfg.alpha)?;
    let mut src = JumpSource::new(lev, base, k, rng.next_u64());
    let mut cfg = cfg;
    cfg.compensate_small = false;
    Ok(walker(cfg, Mode::Raw { horizon }, None, &lev).run(&mut src))
}

/// Clade of an initial block of mass `b`: a `BESQ_b(-2α)` spindle followed by
/// scaffolding until it returns to 0, recorded at the grid levels nearest
/// `levels`.
pub fn sample_clade<R: Rng + ?Sized>(b: f64, levels: &[f64], cfg: ScaffoldConfig, rng: &mut R) -> Result<SpindleField, DistError> {
    sample_clade_seeded(b, levels, cfg, rng.next_u64())
}

/// [`sample_clade`] driven by an explicit seed; equal seeds couple runs with
/// different `ε` sharing a `band_base`.
pub fn sample_clade_seeded(b: f64, levels: &[f64], cfg: ScaffoldConfig, seed: u64) -> Result<SpindleField, DistError> {
    cfg.validate()?;
    if !(b > 0.0) {
        return Err(DistError::OutOfRange { name: "b", value: b });
    }
    let (base, k) = cfg.halvings()?;
    let lev = StableLevy::new(cfg.alpha)?;
    let rec = record_set(&cfg, levels);
    let mut init_rng = RngStream::derive(seed, &[0, u64::MAX - 1]);
    let times: Vec<f64> = rec.iter().filter(|&&i| i > 0).map(|&i| cfg.grid_level(i)).collect();
    let (vals, life) = dist::besq_neg_at(b, cfg.alpha, times.iter().copied(), &mut init_rng);
    let mut widths: Vec<(i64, f64)> = Vec::new();
    if rec.contains(&0) {
        widths.push((0, b));
    }
    widths.extend(rec.iter().copied().filter(|&i| i > 0).zip(vals).filter(|&(i, _)| cfg.grid_level(i) < life));
    let mut w = walker(cfg, Mode::Clade, Some(rec), &lev);
    w.field.jumps.push(MarkedJump { time: 0.0, size: life, base: 0.0, widths });
    w.x = life;
    let mut src = JumpSource::new(lev, base, k, seed);
    Ok(w.run(&mut src))
}

fn check_levels(levels: &[f64], lo: f64, hi: f64) -> Result<(), DistError> {
    match levels.iter().find(|&&y| !(y > lo && y <= hi)) {
        Some(&y) => Err(DistError::OutOfRange { name: "level", value: y }),
        None => Ok(()),
    }
}

/// Skewers of `(N, X - X̲)` stopped at `T_{-z/2α}`, at each level; the law is
/// the evolution started from dust of mass `z` with `θ = 0`.
pub fn ray_knight_dust<R: Rng + ?Sized>(z: f64, levels: &[f64], cfg: ScaffoldConfig, rng: &mut R) -> Result<Vec<Skewer>, DistError> {
    cfg.validate()?;
    check_levels(levels, 0.0, f64::INFINITY)?;
    let (base, k) = cfg.halvings()?;
    let lev = StableLevy::new(cfg.alpha)?;
    let mut src = JumpSource::new(lev, base, k, rng.next_u64());
    let w = walker(cfg, Mode::Dust { target: -z / (2.0 * cfg.alpha) }, Some(record_set(&cfg, levels)), &lev);
    let field = w.run(&mut src);
    Ok(levels.iter().map(|&y| skewer(y, &field)).collect())
}

fn shifted(x: f64, kappa: f64, levels: &[f64], cfg: ScaffoldConfig, seed: u64) -> Result<SpindleField, DistError> {
    cfg.validate()?;
    check_levels(levels, 0.0, x)?;
    let (base, k) = cfg.halvings()?;
    let lev = StableLevy::new(cfg.alpha)?;
    let mut src = JumpSource::new(lev, base, k, seed);
    Ok(walker(cfg, Mode::Shifted { kappa, shift: x }, Some(record_set(&cfg, levels)), &lev).run(&mut src))
}

/// Skewers of `(N, x + X^{(θ)})` with `X^{(θ)} = X - (1 - α/θ) X̲`, stopped when
/// `X^{(θ)}` first goes below `-x`; the law is the evolution from the empty
/// partition with immigration `θ`, at levels in `(0, x]`.
pub fn ray_knight_perturbed<R: Rng + ?Sized>(
    x: f64,
    theta: f64,
    levels: &[f64],
    cfg: ScaffoldConfig,
    rng: &mut R,
) -> Result<Vec<Skewer>, DistError> {
    if !(theta > 0.0) {
        return Err(DistError::OutOfRange { name: "theta", value: theta });
    }
    let field = shifted(x, 1.0 - cfg.alpha / theta, levels, cfg, rng.next_u64())?;
    Ok(levels.iter().map(|&y| skewer(y, &field)).collect())
}

/// Skewers of `(N, x + X)` stopped at `T_{-x}`, without perturbation.
pub fn ray_knight_unperturbed<R: Rng + ?Sized>(x: f64, levels: &[f64], cfg: ScaffoldConfig, rng: &mut R) -> Result<Vec<Skewer>, DistError> {
    let field = shifted(x, 0.0, levels, cfg, rng.next_u64())?;
    Ok(levels.iter().map(|&y| skewer(y, &field)).collect())
}
