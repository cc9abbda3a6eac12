mod common;

use common::rng;
use pdip_core::dist::{RngStream, StableLevy};
use pdip_core::scaffold::{
    build_scaffolding, ray_knight_dust, ray_knight_perturbed, ray_knight_unperturbed, sample_clade, sample_clade_seeded, skewer,
};
use pdip_core::stats::{mean_se, moment_z};
use pdip_core::ScaffoldConfig;
use rayon::prelude::*;

const Z: f64 = 4.0;

fn par<T: Send>(reps: usize, tag: u64, f: impl Fn(&mut RngStream) -> T + Sync) -> Vec<T> {
    (0..reps).into_par_iter().map(|i| f(&mut RngStream::derive(7, &[tag, i as u64]))).collect()
}

#[test]
fn raw_scaffolding_invariants() {
    let cfg = ScaffoldConfig::new(0.5, 1e-3, 0.05);
    let lev = StableLevy::new(0.5).unwrap();
    let horizon = 2.0;
    let counts: Vec<f64> = par(400, 1, |r| {
        let f = build_scaffolding(horizon, cfg, r).unwrap();
        assert!(f.complete);
        assert_eq!(f.jump_count as usize, f.skeleton.len());
        assert!(f.skeleton.windows(2).all(|w| w[0].0 <= w[1].0));
        assert!(f.skeleton.iter().all(|&(t, a, b)| (0.0..=horizon).contains(&t) && b - a > cfg.eps));
        assert!(f.small.is_empty());
        for j in &f.jumps {
            assert!(j.widths.iter().all(|&(_, w)| w >= 0.0));
            assert!(j.widths.windows(2).all(|w| w[0].0 < w[1].0));
        }
        f.jump_count as f64
    });
    assert!(moment_z(&counts, horizon * lev.rate(cfg.eps), None).unwrap().abs() < Z);
}

#[test]
fn raw_scaffolding_is_centred() {
    // With compensation E X_t = 0.
    let cfg = ScaffoldConfig::new(0.6, 1e-3, 0.05);
    let ends: Vec<f64> = par(2000, 2, |r| build_scaffolding(1.0, cfg, r).unwrap().end_value);
    assert!(moment_z(&ends, 0.0, None).unwrap().abs() < Z);
}

#[test]
fn bands_share_large_jumps() {
    let base = ScaffoldConfig::new(0.5, 4e-3, 0.05);
    let fine = ScaffoldConfig { eps: 1e-3, band_base: Some(4e-3), ..base };
    let (mut r1, mut r2) = (rng(3), rng(3));
    let a = build_scaffolding(1.0, base, &mut r1).unwrap();
    let b = build_scaffolding(1.0, fine, &mut r2).unwrap();
    let big = |f: &pdip_core::scaffold::SpindleField| -> Vec<(f64, f64)> {
        f.skeleton.iter().filter(|s| s.2 - s.1 > 4e-3).map(|s| (s.0, s.2 - s.1)).collect()
    };
    let (ja, jb) = (big(&a), big(&b));
    assert!(!ja.is_empty());
    assert_eq!(ja.len(), jb.len());
    for (x, y) in ja.iter().zip(&jb) {
        assert_eq!(x.0, y.0);
        assert!((x.1 - y.1).abs() < 1e-12);
    }
    assert!(b.jump_count > a.jump_count);
    let bad = ScaffoldConfig { band_base: Some(3e-3), ..fine };
    assert!(build_scaffolding(1.0, bad, &mut r1).is_err());
}

#[test]
fn clade_extinction_and_mean() {
    let (b, y) = (1.0, 0.3);
    let cfg = ScaffoldConfig::new(0.5, 2e-4, 1e-3);
    let mass: Vec<f64> = par(3000, 4, |r| skewer(y, &sample_clade(b, &[y], cfg, r).unwrap()).partition.mass());
    let empty: Vec<f64> = mass.iter().map(|&m| if m == 0.0 { 1.0 } else { 0.0 }).collect();
    let p = (-b / (2.0 * y)).exp();
    assert!(moment_z(&empty, p, Some((p * (1.0 - p)).sqrt())).unwrap().abs() < Z, "{:?}", mean_se(&empty));
    assert!(moment_z(&mass, b, None).unwrap().abs() < Z, "{:?}", mean_se(&mass));
}

#[test]
fn clade_starts_with_its_initial_block() {
    let cfg = ScaffoldConfig::new(0.5, 1e-3, 1e-2);
    let f = sample_clade_seeded(0.8, &[0.0, 0.1], cfg, 11).unwrap();
    assert_eq!(skewer(0.0, &f).partition.blocks(), &[(0.0, 0.8)]);
    assert_eq!(f.jumps[0].time, 0.0);
    let again = sample_clade_seeded(0.8, &[0.0, 0.1], cfg, 11).unwrap();
    assert_eq!(f, again);
    assert!(sample_clade_seeded(0.0, &[0.1], cfg, 11).is_err());
}

#[test]
fn theta_equal_alpha_reproduces_unperturbed_run() {
    let cfg = ScaffoldConfig::new(0.4, 1e-3, 1e-2);
    for seed in 0..5 {
        let (mut r1, mut r2) = (rng(100 + seed), rng(100 + seed));
        let a = ray_knight_perturbed(0.5, 0.4, &[0.2, 0.5], cfg, &mut r1).unwrap();
        let b = ray_knight_unperturbed(0.5, &[0.2, 0.5], cfg, &mut r2).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn ray_knight_rejects_bad_input() {
    let cfg = ScaffoldConfig::new(0.4, 1e-3, 1e-2);
    let mut r = rng(5);
    assert!(ray_knight_perturbed(0.5, 0.0, &[0.2], cfg, &mut r).is_err());
    assert!(ray_knight_perturbed(0.5, 0.8, &[0.7], cfg, &mut r).is_err());
    assert!(ray_knight_dust(1.0, &[0.0], cfg, &mut r).is_err());
    assert!(ray_knight_dust(1.0, &[0.2], ScaffoldConfig { eps: 0.0, ..cfg }, &mut r).is_err());
}

#[test]
fn dust_ray_knight_marginals() {
    let (z, y) = (1.0, 0.5);
    let cfg = ScaffoldConfig::new(0.5, 2e-4, 1e-3);
    let mass: Vec<f64> = par(2000, 6, |r| ray_knight_dust(z, &[y], cfg, r).unwrap()[0].partition.mass());
    let empty: Vec<f64> = mass.iter().map(|&m| if m == 0.0 { 1.0 } else { 0.0 }).collect();
    let p = (-z / (2.0 * y)).exp();
    assert!(moment_z(&empty, p, Some((p * (1.0 - p)).sqrt())).unwrap().abs() < Z, "{:?}", mean_se(&empty));
    assert!(moment_z(&mass, z, None).unwrap().abs() < Z, "{:?}", mean_se(&mass));
}

#[test]
fn perturbed_ray_knight_mean_mass() {
    let (x, theta, y) = (0.5, 1.0, 0.25);
    let cfg = ScaffoldConfig::new(0.5, 5e-4, 1e-3);
    let mass: Vec<f64> = par(1500, 7, |r| ray_knight_perturbed(x, theta, &[y], cfg, r).unwrap()[0].partition.mass());
    assert!(moment_z(&mass, 2.0 * theta * y, None).unwrap().abs() < Z, "{:?}", mean_se(&mass));
}
