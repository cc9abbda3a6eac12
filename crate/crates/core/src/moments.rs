//! Compositions and the moment polynomials `m°_σ`, `m*_σ` with their generators.
//!
//! Dust is treated as the limit of infinitely fine blocks: a stretch of dust of
//! measure `d` contributes `d^r / r!` to any run of `r` consecutive parts equal
//! to 1 and nothing to larger parts. This is the continuous extension of
//! `m°_σ` to generalized partitions, so `m°_{(1)} = M` for any partition.

use crate::partition::{Atom, IntervalPartition};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error("part index {0} out of range for composition of length {1}")]
    IndexOutOfRange(usize, usize),
    #[error("generator requires unit mass, got {0}")]
    NonUnitMass(f64),
    #[error("composition parts must be positive")]
    ZeroPart,
}

/// Tolerance on `|M - 1|` accepted by the generator formulas.
pub const UNIT_MASS_TOL: f64 = 1e-9;

/// A finite sequence of positive integers; the empty composition is allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Composition(Vec<u32>);

impl Composition {
    pub fn new(parts: Vec<u32>) -> Result<Self, MomentError> {
        if parts.contains(&0) {
            return Err(MomentError::ZeroPart);
        }
        Ok(Self(parts))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// `𝟙_k`, the composition of `k` ones.
    pub fn ones(k: usize) -> Self {
        Self(vec![1; k])
    }

    pub fn parts(&self) -> &[u32] {
        &self.0
    }

    pub(crate) fn parts_mut(&mut self) -> &mut Vec<u32> {
        &mut self.0
    }

    /// `|σ|`.
    pub fn size(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `ℓ(σ)`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `σ - □_j` if `σ_j ≥ 2`, else `σ ⊖ □_j`; `j` is zero-based.
    pub fn remove_box(&self, j: usize) -> Result<Self, MomentError> {
        if j >= self.0.len() {
            return Err(MomentError::IndexOutOfRange(j, self.0.len()));
        }
        let mut parts = self.0.clone();
        if parts[j] >= 2 {
            parts[j] -= 1;
        } else {
            parts.remove(j);
        }
        Ok(Self(parts))
    }

    /// No two consecutive parts equal to 1.
    pub fn in_c_tilde(&self) -> bool {
        !self.0.windows(2).any(|w| w[0] == 1 && w[1] == 1)
    }

    /// `ℓ₀` leading ones, then each part `≥ 2` with the run of ones after it.
    pub fn runs(&self) -> (usize, Vec<(usize, u32, usize)>) {
        let lead = self.0.iter().take_while(|&&p| p == 1).count();
        let mut big = Vec::new();
        let mut i = lead;
        while i < self.0.len() {
            let p = self.0[i];
            let ones = self.0[i + 1..].iter().take_while(|&&q| q == 1).count();
            big.push((i, p, ones));
            i += 1 + ones;
        }
        (lead, big)
    }

    /// All compositions of `n`, in lexicographic order of parts.
    pub fn all_of(n: u32) -> Vec<Composition> {
        fn rec(n: u32, cur: &mut Vec<u32>, out: &mut Vec<Composition>) {
            if n == 0 {
                out.push(Composition(cur.clone()));
                return;
            }
            for p in 1..=n {
                cur.push(p);
                rec(n - p, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(n, &mut Vec::new(), &mut out);
        out
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

impl std::str::FromStr for Composition {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')');
        if t.is_empty() {
            return Ok(Composition::empty());
        }
        let parts = t
            .split(',')
            .map(|x| x.trim().parse::<u32>().map_err(|e| format!("bad part {x:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        Composition::new(parts).map_err(|e| e.to_string())
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `k! / Π ρ_i!`.
pub fn multinomial(rho: &Composition) -> f64 {
    factorial(rho.size()) / rho.parts().iter().map(|&p| factorial(p)).product::<f64>()
}

/// `m°_σ(β)`: sum over strictly increasing tuples of blocks of `Π Leb(U_j)^{σ_j}`.
pub fn m_circ(sigma: &Composition, beta: &IntervalPartition) -> f64 {
    let parts = sigma.parts();
    let l = parts.len();
    if l == 0 {
        return 1.0;
    }
    let mut dp = vec![0.0; l + 1];
    dp[0] = 1.0;
    let mut scratch = vec![0.0; l + 1];
    for atom in beta.atoms() {
        match atom {
            Atom::Block { len, .. } => {
                for s in (0..l).rev() {
                    if dp[s] != 0.0 {
                        dp[s + 1] += dp[s] * len.powi(parts[s] as i32);
                    }
                }
            }
            Atom::Dust { len, .. } => {
                scratch.copy_from_slice(&dp);
                for s in 0..l {
                    if dp[s] == 0.0 {
                        continue;
                    }
                    let mut term = dp[s];
                    let mut r = 0;
                    while s + r < l && parts[s + r] == 1 {
                        r += 1;
                        term *= len / r as f64;
                        scratch[s + r] += term;
                    }
                }
                dp.copy_from_slice(&scratch);
            }
        }
    }
    dp[l]
}

/// `m°_{𝟙_k} = 1/k! - Σ_{ρ ∈ C_k, ρ ≠ 𝟙_k} (Π 1/ρ_i!) m°_ρ`, as a coefficient
/// list where the empty composition carries the constant term.
pub fn ones_expansion(k: u32) -> Vec<(Composition, f64)> {
    let mut out = vec![(Composition::empty(), 1.0 / factorial(k))];
    for rho in Composition::all_of(k) {
        if rho.parts().iter().all(|&p| p == 1) {
            continue;
        }
        let c = rho.parts().iter().map(|&p| 1.0 / factorial(p)).product::<f64>();
        out.push((rho, -c));
    }
    out
}

fn check_unit(beta: &IntervalPartition) -> Result<(), MomentError> {
    if (beta.mass() - 1.0).abs() > UNIT_MASS_TOL {
        Err(MomentError::NonUnitMass(beta.mass()))
    } else {
        Ok(())
    }
}

/// The generator terms of `𝒜_{α,θ} m°_σ` as a linear combination of `m°`.
pub fn generator_circ_terms(sigma: &Composition, alpha: f64, theta: f64) -> Vec<(Composition, f64)> {
    let n = sigma.size() as f64;
    let mut out = vec![(sigma.clone(), -n * (n - 1.0 + theta))];
    for (j, &p) in sigma.parts().iter().enumerate() {
        let rest = sigma.remove_box(j).expect("index in range");
        let c = if p >= 2 {
            let p = p as f64;
            p * (p - 1.0 - alpha)
        } else if j == 0 {
            theta
        } else {
            alpha
        };
        out.push((rest, c));
    }
    out
}

/// `𝒜_{α,θ} m°_σ(β)` on unit-mass `β`.
pub fn generator_circ(sigma: &Composition, beta: &IntervalPartition, alpha: f64, theta: f64) -> Result<f64, MomentError> {
    check_unit(beta)?;
    Ok(generator_circ_terms(sigma, alpha, theta).iter().map(|(rho, c)| c * m_circ(rho, beta)).sum())
}

/// `m*_σ(β)`: sum over increasing blocks for the parts `≥ 2` of
/// `‖β₀‖^{ℓ₀} Π Leb(U_j)^{σ_j} ‖β_j‖^{ℓ_j}`, where `β₀` lies left of the first
/// chosen block and `β_j` between the `j`-th chosen block and the next (or the
/// right end).
pub fn m_star(sigma: &Composition, beta: &IntervalPartition) -> f64 {
    let (lead, big) = sigma.runs();
    let shape: Vec<(u32, usize)> = big.iter().map(|&(_, p, ones)| (p, ones)).collect();
    star_sum(lead, &shape, beta)
}

/// The `m*` sum for an explicit shape: `lead` ones, then chosen blocks with
/// exponents `p ≥ 1`, each followed by a run of `ones`. Exponent 1 is allowed
/// so that a chosen block keeps its role after losing a box.
fn star_sum(lead: usize, shape: &[(u32, usize)], beta: &IntervalPartition) -> f64 {
    if shape.iter().any(|&(p, _)| p == 1) {
        return star_expanded(lead, shape, beta);
    }
    let m = beta.mass();
    if shape.is_empty() {
        return m.powi(lead as i32);
    }
    let bl = beta.blocks();
    let mut dp: Vec<f64> = bl.iter().map(|&(a, b)| a.powi(lead as i32) * (b - a).powi(shape[0].0 as i32)).collect();
    for w in shape.windows(2) {
        let (prev_ones, p) = (w[0].1 as i32, w[1].0 as i32);
        let mut next = vec![0.0; bl.len()];
        for (i, &(a, b)) in bl.iter().enumerate() {
            let acc: f64 = (0..i).map(|k| dp[k] * (a - bl[k].1).powi(prev_ones)).sum();
            next[i] = acc * (b - a).powi(p);
        }
        dp = next;
    }
    let last_ones = shape.last().expect("nonempty").1 as i32;
    bl.iter().zip(&dp).map(|(&(_, b), &v)| v * (m - b).powi(last_ones)).sum()
}

/// `m*` for a shape with exponent-1 chosen blocks, through
/// `‖β_j‖^ℓ = Σ_{ρ ∈ C_ℓ} multinomial(ρ) m°_ρ(β_j)`. On dusty `β` a chosen
/// block of exponent 1 then ranges over dust too, as refinement requires.
fn star_expanded(lead: usize, shape: &[(u32, usize)], beta: &IntervalPartition) -> f64 {
    let runs = |l: usize| -> Vec<(Vec<u32>, f64)> {
        if l == 0 {
            return vec![(Vec::new(), 1.0)];
        }
        Composition::all_of(l as u32).into_iter().map(|r| (r.0.clone(), multinomial(&r))).collect()
    };
    let mut terms = runs(lead);
    for &(p, ones) in shape {
        let tails = runs(ones);
        let mut next = Vec::with_capacity(terms.len() * tails.len());
        for (head, c) in &terms {
            for (tail, d) in &tails {
                let mut parts = head.clone();
                parts.push(p);
                parts.extend_from_slice(tail);
                next.push((parts, c * d));
            }
        }
        terms = next;
    }
    terms.into_iter().map(|(parts, c)| c * m_circ(&Composition(parts), beta)).sum()
}

/// `𝒜_{α,θ} m*_σ(β)` on unit-mass `β`. Lowered terms keep the chosen blocks
/// of `σ` fixed: a part 2 that loses a box stays a chosen block of exponent 1.
pub fn generator_star(sigma: &Composition, beta: &IntervalPartition, alpha: f64, theta: f64) -> Result<f64, MomentError> {
    check_unit(beta)?;
    let n = sigma.size() as f64;
    let (lead, big) = sigma.runs();
    let shape: Vec<(u32, usize)> = big.iter().map(|&(_, p, ones)| (p, ones)).collect();
    let mut acc = -n * (n - 1.0 + theta) * star_sum(lead, &shape, beta);
    if lead > 0 {
        let l0 = lead as f64;
        acc += l0 * (l0 - 1.0 + theta) * star_sum(lead - 1, &shape, beta);
    }
    for (j, &(p, ones)) in shape.iter().enumerate() {
        let mut lowered = shape.clone();
        lowered[j].0 = p - 1;
        let pf = p as f64;
        acc += pf * (pf - 1.0 - alpha) * star_sum(lead, &lowered, beta);
        if ones > 0 {
            let mut fewer = shape.clone();
            fewer[j].1 = ones - 1;
            let l = ones as f64;
            acc += l * (l - 1.0 + alpha) * star_sum(lead, &fewer, beta);
        }
    }
    Ok(acc)
}

/// `E m°_σ(β̄)` for `β̄ ~ PDIP(α, θ)`, from the stationarity identity
/// `E 𝒜_{α,θ} m°_σ(β̄) = 0` solved recursively in `|σ|`.
pub fn pdip_moment(sigma: &Composition, alpha: f64, theta: f64) -> f64 {
    fn rec(s: &Composition, a: f64, t: f64, memo: &mut HashMap<Composition, f64>) -> f64 {
        if s.is_empty() || s.parts() == [1] {
            return 1.0;
        }
        if let Some(&v) = memo.get(s) {
            return v;
        }
        let terms = generator_circ_terms(s, a, t);
        let diag = -terms[0].1;
        let v = terms[1..].iter().map(|(rho, c)| c * rec(rho, a, t, memo)).sum::<f64>() / diag;
        memo.insert(s.clone(), v);
        v
    }
    rec(sigma, alpha, theta, &mut HashMap::new())
}
