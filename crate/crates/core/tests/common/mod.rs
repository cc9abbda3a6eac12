#![allow(dead_code)]

use pdip_core::metrics::Correspondence;
use pdip_core::{Composition, IntervalPartition, RngStream};
use rand::Rng;

pub fn rng(tag: u64) -> RngStream {
    RngStream::new(20_240_601, tag)
}

/// `{(0, 0.5), (0.5, 0.8), (0.8, 1)}`.
pub fn three_blocks() -> IntervalPartition {
    IntervalPartition::from_lengths(&[0.5, 0.3, 0.2])
}

pub fn comp(s: &str) -> Composition {
    s.parse().expect("composition literal")
}

/// Unit-mass partition with `n` blocks; with `dust`, uniform gaps of total
/// mass up to a third are left between them.
pub fn random_unit<R: Rng>(n: usize, dust: bool, rng: &mut R) -> IntervalPartition {
    let mut atoms: Vec<(bool, f64)> = Vec::new();
    for _ in 0..n {
        if dust && rng.random::<f64>() < 0.5 {
            atoms.push((false, rng.random::<f64>() * 0.5));
        }
        atoms.push((true, 0.05 + rng.random::<f64>()));
    }
    if dust {
        atoms.push((false, rng.random::<f64>() * 0.5));
    }
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    IntervalPartition::from_atoms(atoms.into_iter().map(|(b, l)| (b, l / total)))
}

/// All compositions of every size in `1..=max`.
pub fn compositions_up_to(max: u32) -> Vec<Composition> {
    (1..=max).flat_map(Composition::all_of).collect()
}

/// Sum over strictly increasing block tuples, by recursion over start index.
pub fn brute_circ(parts: &[u32], lens: &[f64]) -> f64 {
    match parts.split_first() {
        None => 1.0,
        Some((&p, rest)) => (0..lens.len()).map(|i| lens[i].powi(p as i32) * brute_circ(rest, &lens[i + 1..])).sum(),
    }
}

/// `m*` from its definition: choose increasing blocks for the parts `≥ 2` and
/// weight the runs of ones by the mass of the gaps between chosen blocks.
pub fn brute_star(sigma: &Composition, beta: &IntervalPartition) -> f64 {
    let parts = sigma.parts();
    let lead = parts.iter().take_while(|&&p| p == 1).count();
    let mut big: Vec<(u32, usize)> = Vec::new();
    for &p in &parts[lead..] {
        if p >= 2 {
            big.push((p, 0));
        } else {
            big.last_mut().expect("run follows a big part").1 += 1;
        }
    }
    fn go(big: &[(u32, usize)], blocks: &[(f64, f64)], from: usize, left: f64, ones: usize, m: f64) -> f64 {
        match big.split_first() {
            None => (m - left).powi(ones as i32),
            Some((&(p, run), rest)) => (from..blocks.len())
                .map(|i| {
                    let (a, b) = blocks[i];
                    (a - left).powi(ones as i32) * (b - a).powi(p as i32) * go(rest, blocks, i + 1, b, run, m)
                })
                .sum(),
        }
    }
    go(&big, beta.blocks(), 0, 0.0, lead, beta.mass())
}

/// Every strictly increasing matching between `n` and `m` indices.
pub fn all_correspondences(n: usize, m: usize) -> Vec<Correspondence> {
    fn go(i: usize, j: usize, n: usize, m: usize, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Correspondence>) {
        out.push(Correspondence::new(cur.clone()));
        for a in i..n {
            for b in j..m {
                cur.push((a, b));
                go(a + 1, b + 1, n, m, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(0, 0, n, m, &mut Vec::new(), &mut out);
    out
}
