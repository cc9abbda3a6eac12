mod common;

use common::{all_correspondences, rng};
use pdip_core::metrics::{d_alpha, distortion, dprime_h, hausdorff_complement, Correspondence};
use pdip_core::{AnnotatedPartition, IntervalPartition};
use proptest::prelude::*;
use rand::Rng;

fn random_partition<R: Rng>(n: usize, rng: &mut R) -> IntervalPartition {
    let atoms: Vec<(bool, f64)> = (0..2 * n + 1).map(|i| (i % 2 == 1, 0.01 + rng.random::<f64>())).collect();
    IntervalPartition::from_atoms(atoms)
}

fn random_marks<R: Rng>(p: IntervalPartition, rng: &mut R) -> AnnotatedPartition {
    let mut acc = 0.0;
    let marks: Vec<f64> = (0..p.len())
        .map(|_| {
            acc += rng.random::<f64>();
            acc
        })
        .collect();
    AnnotatedPartition::new(p, marks, acc + rng.random::<f64>())
}

#[test]
fn correspondence_count_is_central_binomial_sum() {
    // Σ_k C(n,k) C(m,k) = C(n+m, n).
    assert_eq!(all_correspondences(3, 4).len(), 35);
    assert_eq!(all_correspondences(7, 7).len(), 3432);
}

#[test]
fn dp_equals_exhaustive_minimum() {
    let mut r = rng(30);
    for n in 0..=7 {
        for m in 0..=7 {
            let (b, g) = (random_partition(n, &mut r), random_partition(m, &mut r));
            let corrs = all_correspondences(n, m);
            let brute = corrs.iter().map(|c| distortion(&b, &g, c, None).unwrap()).fold(f64::INFINITY, f64::min);
            assert!((dprime_h(&b, &g) - brute).abs() <= 1e-12, "n={n} m={m}");
            let (ba, ga) = (random_marks(b.clone(), &mut r), random_marks(g.clone(), &mut r));
            let brute_a = corrs.iter().map(|c| distortion(&b, &g, c, Some((&ba, &ga))).unwrap()).fold(f64::INFINITY, f64::min);
            assert!((d_alpha(&ba, &ga) - brute_a).abs() <= 1e-12, "n={n} m={m}");
        }
    }
}

#[test]
fn invalid_correspondences_are_rejected() {
    let b = IntervalPartition::from_lengths(&[0.5, 0.5]);
    assert!(distortion(&b, &b, &Correspondence::new(vec![(1, 0), (0, 1)]), None).is_err());
    assert!(distortion(&b, &b, &Correspondence::new(vec![(0, 2)]), None).is_err());
    assert!(distortion(&b, &b, &Correspondence::new(vec![(0, 0), (0, 1)]), None).is_err());
}

#[test]
fn distortion_of_simple_pairs() {
    let b = IntervalPartition::from_lengths(&[0.5, 0.5]);
    let g = IntervalPartition::from_lengths(&[0.4, 0.6]);
    let empty = distortion(&b, &g, &Correspondence::default(), None).unwrap();
    assert_eq!(empty, 1.0);
    let full = distortion(&b, &g, &Correspondence::new(vec![(0, 0), (1, 1)]), None).unwrap();
    // Unmatched mass on each side: 0.1 + 0.1 of mismatch, nothing left over.
    assert!((full - 0.2).abs() < 1e-12);
    assert!((dprime_h(&b, &g) - 0.2).abs() < 1e-12);
    assert_eq!(dprime_h(&b, &b), 0.0);
}

/// Directed Hausdorff distance between closed sets approximated on a fine grid.
fn grid_hausdorff(a: &[(f64, f64)], b: &[(f64, f64)], step: f64) -> f64 {
    let dist = |x: f64, k: &[(f64, f64)]| k.iter().map(|&(p, q)| if x < p { p - x } else if x > q { x - q } else { 0.0 }).fold(f64::INFINITY, f64::min);
    let sweep = |k1: &[(f64, f64)], k2: &[(f64, f64)]| {
        let mut best = 0.0f64;
        for &(p, q) in k1 {
            let steps = ((q - p) / step).ceil() as usize;
            for i in 0..=steps {
                best = best.max(dist((p + i as f64 * step).min(q), k2));
            }
        }
        best
    };
    sweep(a, b).max(sweep(b, a))
}

#[test]
fn hausdorff_matches_grid_search() {
    let mut r = rng(31);
    for _ in 0..30 {
        let n = r.random_range(0..6);
        let m = r.random_range(0..6);
        let (b, g) = (random_partition(n, &mut r), random_partition(m, &mut r));
        let exact = hausdorff_complement(&b, &g);
        let approx = grid_hausdorff(&b.complement(), &g.complement(), 1e-4);
        assert!((exact - approx).abs() < 2e-4, "{exact} vs {approx}");
    }
}

proptest! {
    #[test]
    fn dprime_is_symmetric_and_bounded(seed in 0u64..2000, n in 0usize..6, m in 0usize..6) {
        let mut r = rng(40_000 + seed);
        let (b, g) = (random_partition(n, &mut r), random_partition(m, &mut r));
        let d = dprime_h(&b, &g);
        prop_assert!((d - dprime_h(&g, &b)).abs() <= 1e-12);
        prop_assert!(d >= (b.mass() - g.mass()).abs() - 1e-12);
        prop_assert!(d <= b.mass().max(g.mass()) + 1e-12);
    }

    #[test]
    fn dprime_triangle_inequality(seed in 0u64..2000) {
        let mut r = rng(50_000 + seed);
        let n: Vec<usize> = (0..3).map(|_| r.random_range(0..5)).collect();
        let p: Vec<IntervalPartition> = n.iter().map(|&k| random_partition(k, &mut r)).collect();
        prop_assert!(dprime_h(&p[0], &p[2]) <= dprime_h(&p[0], &p[1]) + dprime_h(&p[1], &p[2]) + 1e-12);
    }

    #[test]
    fn unmarked_alpha_metric_reduces(seed in 0u64..2000, n in 0usize..6, m in 0usize..6) {
        let mut r = rng(60_000 + seed);
        let (b, g) = (random_partition(n, &mut r), random_partition(m, &mut r));
        let da = d_alpha(&AnnotatedPartition::unmarked(b.clone()), &AnnotatedPartition::unmarked(g.clone()));
        prop_assert_eq!(da, dprime_h(&b, &g));
    }
}
