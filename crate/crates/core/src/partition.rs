//! Interval partitions of `[0, M]`, with optional dust.
//!
//! A single type covers both the strict case (blocks cover `[0, M]` up to a
//! Lebesgue-null set) and the generalized case where `M` exceeds the total
//! block length. The uncovered measure is the dust.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

/// Absolute tolerance on `mass - Σ lengths` for a partition to count as strict.
pub const MASS_TOL: f64 = 1e-12;
/// Blocks no longer than this are rejected as degenerate.
pub const MIN_BLOCK: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("blocks ({0}, {1}) and ({2}, {3}) overlap")]
    OverlappingBlocks(f64, f64, f64, f64),
    #[error("block ({0}, {1}) has non-positive length")]
    NegativeLength(f64, f64),
    #[error("block ({0}, {1}) lies outside [0, {2}]")]
    BlockOutsideRange(f64, f64, f64),
    #[error("scale factor {0} is not positive")]
    NonPositiveScale(f64),
    #[error("alpha = {0} is outside (0, 1)")]
    AlphaOutOfRange(f64),
    #[error("mass {0} is negative or not finite")]
    InvalidMass(f64),
}

/// Sorted disjoint open blocks `(a, b)` inside `[0, mass]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPartition", into = "RawPartition")]
pub struct IntervalPartition {
    blocks: Vec<(f64, f64)>,
    mass: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPartition {
    mass: f64,
    blocks: Vec<(f64, f64)>,
}

impl TryFrom<RawPartition> for IntervalPartition {
    type Error = PartitionError;
    fn try_from(raw: RawPartition) -> Result<Self, Self::Error> {
        IntervalPartition::new(raw.blocks, Some(raw.mass))
    }
}

impl From<IntervalPartition> for RawPartition {
    fn from(p: IntervalPartition) -> Self {
        RawPartition { mass: p.mass, blocks: p.blocks }
    }
}

/// One piece of the left-to-right structure: a block or a stretch of dust.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Atom {
    Block { left: f64, len: f64 },
    Dust { left: f64, len: f64 },
}

impl IntervalPartition {
    /// Validates and sorts `raw`. A missing mass defaults to the largest right endpoint.
    pub fn new(mut raw: Vec<(f64, f64)>, mass: Option<f64>) -> Result<Self, PartitionError> {
        for &(a, b) in &raw {
            if !(a.is_finite() && b.is_finite()) || b - a <= MIN_BLOCK {
                return Err(PartitionError::NegativeLength(a, b));
            }
        }
        raw.sort_by(|x, y| x.0.total_cmp(&y.0));
        for w in raw.windows(2) {
            if w[0].1 > w[1].0 {
                return Err(PartitionError::OverlappingBlocks(w[0].0, w[0].1, w[1].0, w[1].1));
            }
        }
        let sup = raw.last().map_or(0.0, |b| b.1);
        let mass = mass.unwrap_or(sup);
        if !mass.is_finite() || mass < 0.0 {
            return Err(PartitionError::InvalidMass(mass));
        }
        if let Some(&(a, b)) = raw.iter().find(|&&(a, b)| a < 0.0 || b > mass) {
            return Err(PartitionError::BlockOutsideRange(a, b, mass));
        }
        Ok(Self { blocks: raw, mass })
    }

    /// Builds a strict partition from consecutive lengths laid end to end.
    pub fn from_lengths(lengths: &[f64]) -> Self {
        let mut blocks = Vec::with_capacity(lengths.len());
        let mut x = 0.0;
        for &l in lengths {
            if l > 0.0 {
                blocks.push((x, x + l));
                x += l;
            }
        }
        Self { blocks, mass: x }
    }

    /// Builds a partition from atoms laid end to end; dust atoms leave gaps.
    pub fn from_atoms<I: IntoIterator<Item = (bool, f64)>>(atoms: I) -> Self {
        let mut blocks = Vec::new();
        let mut x = 0.0;
        for (is_block, l) in atoms {
            if l <= 0.0 {
                continue;
            }
            if is_block {
                blocks.push((x, x + l));
            }
            x += l;
        }
        Self { blocks, mass: x }
    }

    pub fn empty() -> Self {
        Self { blocks: Vec::new(), mass: 0.0 }
    }

    /// Pure dust of mass `m`.
    pub fn dust_only(m: f64) -> Self {
        Self { blocks: Vec::new(), mass: m.max(0.0) }
    }

    pub(crate) fn from_sorted_unchecked(blocks: Vec<(f64, f64)>, mass: f64) -> Self {
        debug_assert!(blocks.windows(2).all(|w| w[0].1 <= w[1].0 + 1e-9));
        Self { blocks, mass }
    }

    pub fn blocks(&self) -> &[(f64, f64)] {
        &self.blocks
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn lengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().map(|&(a, b)| b - a)
    }

    pub fn block_mass(&self) -> f64 {
        self.lengths().sum()
    }

    pub fn dust(&self) -> f64 {
        self.mass - self.block_mass()
    }

    /// True when the dust is within [`MASS_TOL`] of zero.
    pub fn is_strict(&self) -> bool {
        self.dust() <= MASS_TOL
    }

    /// Blocks and positive-length dust stretches in left-to-right order.
    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::with_capacity(2 * self.blocks.len() + 1);
        let mut x = 0.0;
        for &(a, b) in &self.blocks {
            if a > x {
                out.push(Atom::Dust { left: x, len: a - x });
            }
            out.push(Atom::Block { left: a, len: b - a });
            x = b;
        }
        if self.mass > x {
            out.push(Atom::Dust { left: x, len: self.mass - x });
        }
        out
    }

    /// Closed components `[p, q]` of `[0, M]` minus the blocks, `p == q` for points.
    pub fn complement(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.blocks.len() + 1);
        let mut x = 0.0;
        for &(a, b) in &self.blocks {
            out.push((x, a));
            x = b;
        }
        out.push((x, self.mass));
        out
    }

    /// Shifts each part by the total mass of its predecessors; masses add.
    pub fn concat<'a, I: IntoIterator<Item = &'a IntervalPartition>>(parts: I) -> Self {
        let mut blocks = Vec::new();
        let mut offset = 0.0;
        for p in parts {
            blocks.extend(p.blocks.iter().map(|&(a, b)| (a + offset, b + offset)));
            offset += p.mass;
        }
        Self { blocks, mass: offset }
    }

    /// Appends `other` shifted by the current mass.
    pub fn push_concat(&mut self, other: &IntervalPartition) {
        let off = self.mass;
        self.blocks.extend(other.blocks.iter().map(|&(a, b)| (a + off, b + off)));
        self.mass += other.mass;
    }

    /// Appends a block of length `len` at the right end.
    pub fn push_block(&mut self, len: f64) {
        if len > 0.0 {
            self.blocks.push((self.mass, self.mass + len));
            self.mass += len;
        }
    }

    /// Appends dust of measure `len` at the right end.
    pub fn push_dust(&mut self, len: f64) {
        if len > 0.0 {
            self.mass += len;
        }
    }

    /// Sets the mass to `m`, never below the last right endpoint.
    pub(crate) fn normalize_mass(&mut self, m: f64) {
        let sup = self.blocks.last().map_or(0.0, |b| b.1);
        self.mass = m.max(sup);
    }

    pub fn scale(&self, c: f64) -> Result<Self, PartitionError> {
        if !(c > 0.0) {
            return Err(PartitionError::NonPositiveScale(c));
        }
        Ok(self.scaled(c))
    }

    pub(crate) fn scaled(&self, c: f64) -> Self {
        Self {
            blocks: self.blocks.iter().map(|&(a, b)| (c * a, c * b)).collect(),
            mass: c * self.mass,
        }
    }

    /// Maps `(a, b)` to `(M - b, M - a)`.
    pub fn reverse(&self) -> Self {
        let m = self.mass;
        Self {
            blocks: self.blocks.iter().rev().map(|&(a, b)| (m - b, m - a)).collect(),
            mass: m,
        }
    }

    /// Block lengths, non-increasing.
    pub fn ranked(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.lengths().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    pub fn largest(&self) -> f64 {
        self.lengths().fold(0.0, f64::max)
    }

    /// `Γ(1-α) h^α · #{(a, b) : b - a > h, b ≤ t}`.
    pub fn diversity_estimate(&self, alpha: f64, h: f64, t: f64) -> Result<f64, PartitionError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(PartitionError::AlphaOutOfRange(alpha));
        }
        let count = self.blocks.iter().filter(|&&(a, b)| b - a > h && b <= t).count();
        Ok(gamma(1.0 - alpha) * h.powf(alpha) * count as f64)
    }

    /// CSV row `mass,a1,b1,a2,b2,...`.
    pub fn to_csv_row(&self) -> String {
        let mut s = format!("{}", self.mass);
        for &(a, b) in &self.blocks {
            s.push_str(&format!(",{a},{b}"));
        }
        s
    }
}

/// A partition with left-diversity marks per block and a total diversity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedPartition {
    pub partition: IntervalPartition,
    pub block_diversity: Vec<f64>,
    pub total_diversity: f64,
}

impl AnnotatedPartition {
    pub fn new(partition: IntervalPartition, block_diversity: Vec<f64>, total_diversity: f64) -> Self {
        assert_eq!(partition.len(), block_diversity.len());
        debug_assert!(block_diversity.windows(2).all(|w| w[0] <= w[1]));
        Self { partition, block_diversity, total_diversity }
    }

    /// Zero marks everywhere; `d_alpha` then reduces to `dprime_h`.
    pub fn unmarked(partition: IntervalPartition) -> Self {
        let n = partition.len();
        Self { partition, block_diversity: vec![0.0; n], total_diversity: 0.0 }
    }

    /// Concatenation; marks of later parts are raised by the total diversity to their left.
    pub fn concat(parts: &[AnnotatedPartition]) -> Self {
        let partition = IntervalPartition::concat(parts.iter().map(|p| &p.partition));
        let mut marks = Vec::with_capacity(partition.len());
        let mut acc = 0.0;
        for p in parts {
            marks.extend(p.block_diversity.iter().map(|d| d + acc));
            acc += p.total_diversity;
        }
        Self { partition, block_diversity: marks, total_diversity: acc }
    }
}
