//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

mod common;

use common::{all_correspondences, brute_circ, brute_star, comp, compositions_up_to, random_unit, rng, three_blocks};
use num_rational::Ratio;
use pdip_core::depoisson::simulate_pdipe;
use pdip_core::dist::{sample_stable_subordinator_range, RngStream};
use pdip_core::experiments::{
    dust_entrance_check, ray_knight_mass_check, scaffold_kernel_study, total_mass_check, updown_stationarity, ConvergenceParams,
};
use pdip_core::kernel::{kernel_step, l_laplace, sample_l, sample_mu};
use pdip_core::metrics::{distortion, dprime_h};
use pdip_core::moments::{generator_circ, generator_star, m_circ, m_star, ones_expansion, pdip_moment};
use pdip_core::pdip::{sample_pdip_stickbreaking, Truncation};
use pdip_core::scaffold::{ray_knight_perturbed, ray_knight_unperturbed};
use pdip_core::stats::{
    generator_fd_test, ks_one_sample, ks_two_sample, mean_se, pseudo_stationarity_test, FdConfig, MeanSe, SIGNIFICANCE, Z_BAND,
};
use pdip_core::updown::up_moves_with;
use pdip_core::{Composition, IntervalPartition, KernelConfig, KernelParams, ScaffoldConfig};
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Gamma};
use std::io::Write;
use std::time::Instant;

const SEED: u64 = 2024;

/// Writes straight to the process stderr so the line survives test capture.
fn verdict(id: u32, name: &str, pass: bool, detail: &str, started: Instant) -> bool {
    let tag = if pass { "PASS" } else { "FAIL" };
    let secs = started.elapsed().as_secs_f64();
    let _ = writeln!(std::io::stderr(), "[acceptance] criterion {id:>2} {tag} {name} ({secs:.1}s): {detail}");
    pass
}

fn reps<T: Send>(n: usize, tag: u64, f: impl Fn(&mut RngStream) -> T + Sync) -> Vec<T> {
    (0..n).into_par_iter().map(|i| f(&mut RngStream::derive(SEED, &[tag, i as u64]))).collect()
}

fn z_of(est: &MeanSe, target: f64) -> f64 {
    (est.mean - target) / est.se
}

/// `(mean_a - mean_b) / sqrt(se_a² + se_b²)`.
fn z_two(a: &MeanSe, b: &MeanSe) -> f64 {
    (a.mean - b.mean) / (a.se * a.se + b.se * b.se).sqrt()
}

fn indicator(xs: &[f64], f: impl Fn(f64) -> bool) -> Vec<f64> {
    xs.iter().map(|&x| if f(x) { 1.0 } else { 0.0 }).collect()
}

#[test]
fn criterion_01_exact_algebra() {
    let t = Instant::now();
    let mut r = rng(1);
    let mut worst = [0.0f64; 4];
    for _ in 0..100 {
        let n = r.random_range(1..=10);
        let beta = random_unit(n, false, &mut r);
        for k in 2..=6 {
            let rhs: f64 = ones_expansion(k).iter().map(|(rho, c)| c * m_circ(rho, &beta)).sum();
            worst[0] = worst[0].max((m_circ(&Composition::ones(k as usize), &beta) - rhs).abs());
        }
    }
    let sigmas = compositions_up_to(6);
    for n in 1..=10 {
        let beta = random_unit(n, false, &mut r);
        let lens: Vec<f64> = beta.lengths().collect();
        for s in &sigmas {
            worst[1] = worst[1].max((m_circ(s, &beta) - brute_circ(s.parts(), &lens)).abs());
            worst[1] = worst[1].max((m_star(s, &beta) - brute_star(s, &beta)).abs());
            if s.in_c_tilde() {
                let d = generator_star(s, &beta, 0.5, 0.5).unwrap() - generator_circ(s, &beta, 0.5, 0.5).unwrap();
                worst[3] = worst[3].max(d.abs());
            }
        }
    }
    for n in 0..=7 {
        for m in 0..=7 {
            let b = if n == 0 { IntervalPartition::empty() } else { random_unit(n, false, &mut r) };
            let g = if m == 0 { IntervalPartition::empty() } else { random_unit(m, false, &mut r).scale(0.5 + r.random::<f64>()).unwrap() };
            let brute = all_correspondences(n, m).iter().map(|c| distortion(&b, &g, c, None).unwrap()).fold(f64::INFINITY, f64::min);
            worst[2] = worst[2].max((dprime_h(&b, &g) - brute).abs());
        }
    }
    let pass = worst[0] <= 1e-10 && worst[1] <= 1e-12 && worst[2] <= 1e-12 && worst[3] <= 1e-12;
    let detail = format!(
        "ones-expansion {:.1e}, moment DP vs enumeration {:.1e}, metric DP vs enumeration {:.1e}, star vs circ generator {:.1e}",
        worst[0], worst[1], worst[2], worst[3]
    );
    assert!(verdict(1, "exact algebra", pass, &detail, t), "{detail}");
}

#[test]
fn criterion_02_kernel_marginals() {
    let t = Instant::now();
    let (b, r, alpha) = (0.8, 1.25, 0.5);
    let n = 100_000;
    let draws = reps(n, 2, |g| {
        let mu = sample_mu(b, r, alpha, Truncation::default(), g).unwrap();
        (mu.mass(), sample_l(b, r, alpha, g).unwrap())
    });
    let mass: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let p = (-b * r).exp();
    let mut e = mean_se(&indicator(&mass, |m| m == 0.0)).unwrap();
    e.se = (p * (1.0 - p) / n as f64).sqrt();
    let mut zs = vec![("P(empty)".to_string(), z_of(&e, p)), ("mean mass".to_string(), z_of(&mean_se(&mass).unwrap(), b))];
    for lambda in [0.5, 1.0, 2.0] {
        let v: Vec<f64> = draws.iter().map(|d| (-lambda * d.1).exp()).collect();
        zs.push((format!("Laplace λ={lambda}"), z_of(&mean_se(&v).unwrap(), l_laplace(b, r, alpha, lambda))));
    }
    let pass = zs.iter().all(|(_, z)| z.abs() <= Z_BAND);
    let detail = zs.iter().map(|(k, z)| format!("{k} z={z:+.2}")).collect::<Vec<_>>().join(", ");
    assert!(verdict(2, "kernel marginal laws", pass, &detail, t), "{detail}");
}

#[test]
fn criterion_03_semigroup_and_scaling() {
    let t = Instant::now();
    let (alpha, theta) = (0.5, 0.5);
    let beta = three_blocks();
    let cfg = KernelConfig::default();
    let sigmas = [comp("2"), comp("1,1")];
    let n = 50_000;
    let moments = |p: &IntervalPartition| -> Vec<f64> { sigmas.iter().map(|s| m_circ(s, p)).collect() };
    let column = |rows: &[Vec<f64>], i: usize| mean_se(&rows.iter().map(|r| r[i]).collect::<Vec<_>>()).unwrap();
    let (y1, y2) = (0.15, 0.25);
    let one = reps(n, 31, |g| moments(&kernel_step(&beta, KernelParams::new(alpha, theta, y1 + y2).unwrap(), cfg, g)));
    let two = reps(n, 32, |g| {
        let mid = kernel_step(&beta, KernelParams::new(alpha, theta, y1).unwrap(), cfg, g);
        moments(&pdip_core::kernel::kernel_step_generalized(&mid, KernelParams::new(alpha, theta, y2).unwrap(), cfg, g))
    });
    let c = 2.0;
    let y = 0.4;
    let big = beta.scale(c).unwrap();
    let direct = reps(n, 33, |g| moments(&kernel_step(&big, KernelParams::new(alpha, theta, y).unwrap(), cfg, g)));
    let scaled = reps(n, 34, |g| moments(&kernel_step(&beta, KernelParams::new(alpha, theta, y / c).unwrap(), cfg, g).scale(c).unwrap()));
    let mut zs = Vec::new();
    for (i, s) in sigmas.iter().enumerate() {
        zs.push((format!("CK σ={s}"), z_two(&column(&one, i), &column(&two, i))));
        zs.push((format!("scaling σ={s}"), z_two(&column(&direct, i), &column(&scaled, i))));
    }
    let pass = zs.iter().all(|(_, z)| z.abs() <= Z_BAND);
    let detail = zs.iter().map(|(k, z)| format!("{k} z={z:+.2}")).collect::<Vec<_>>().join(", ");
    assert!(verdict(3, "semigroup and self-similarity", pass, &detail, t), "{detail}");
}

#[test]
fn criterion_04_total_mass_besq() {
    let t = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for (i, &(a, th)) in [(0.5, 0.0), (0.5, 0.5), (0.3, 1.2)].iter().enumerate() {
        let rep = total_mass_check(&three_blocks(), a, th, 0.5, 60_000, KernelConfig::default(), SEED + i as u64).unwrap();
        pass &= rep.pass;
        let zs = rep.checks.iter().map(|c| format!("{} z={:+.2}", c.name, c.z)).collect::<Vec<_>>().join(" ");
        parts.push(format!("(α={a}, θ={th}) {zs}"));
    }
    let detail = parts.join("; ");
    assert!(verdict(4, "total mass is BESQ(2θ)", pass, &detail, t), "{detail}");
}

#[test]
fn criterion_05_dust_entrance() {
    let t = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for (i, y) in [0.25, 0.5, 1.0].into_iter().enumerate() {
        let rep = dust_entrance_check(0.5, 1.0, y, 100_000, KernelConfig::default(), SEED + i as u64).unwrap();
        pass &= rep.pass;
        let zs = rep.checks.iter().map(|c| format!("{} z={:+.2}", c.name, c.z)).collect::<Vec<_>>().join(" ");
        parts.push(format!("y={y} {zs}"));
    }
    let detail = parts.join("; ");
    assert!(verdict(5, "dust entrance law", pass, &detail, t), "{detail}");
}

#[test]
fn criterion_06_pseudo_stationarity() {
    let t = Instant::now();
    let rep = pseudo_stationarity_test(0.5, 0.5, 0.25, 100_000, KernelConfig::default(), SEED).unwrap();
    let mut detail = rep.moments.iter().map(|m| format!("σ={} z={:+.2}", m.sigma, m.z)).collect::<Vec<_>>().join(", ");
    if let Some(ks) = rep.largest_block_ks {
        detail.push_str(&format!(", largest block KS D={:.4} p={:.3}", ks.d, ks.p));
    }
    assert!(verdict(6, "pseudo-stationarity", rep.pass, &detail, t), "{detail}");
}

#[test]
fn criterion_07_pdipe_stationarity() {
    let t = Instant::now();
    let (alpha, theta, u) = (0.5, 0.5, 0.5);
    let sigmas = [comp("2"), comp("1,1"), comp("3")];
    let cfg = KernelConfig { abs_mass: 1e-3, ..KernelConfig::default() };
    let n = 20_000;
    let evolved = reps(n, 71, |g| {
        let start = sample_pdip_stickbreaking(alpha, theta, Truncation::default(), g).unwrap();
        let path = simulate_pdipe(&start, alpha, theta, &[u], 0.01, cfg, g).unwrap();
        let end = &path.states.last().expect("u reached").state;
        sigmas.iter().map(|s| m_circ(s, end)).collect::<Vec<f64>>()
    });
    let direct = reps(n, 72, |g| {
        let p = sample_pdip_stickbreaking(alpha, theta, Truncation::default(), g).unwrap();
        sigmas.iter().map(|s| m_circ(s, &p)).collect::<Vec<f64>>()
    });
    let mut zs = Vec::new();
    for (i, s) in sigmas.iter().enumerate() {
        let a = mean_se(&evolved.iter().map(|r| r[i]).collect::<Vec<_>>()).unwrap();
        let b = mean_se(&direct.iter().map(|r| r[i]).collect::<Vec<_>>()).unwrap();
        zs.push((format!("σ={s}"), z_two(&a, &b), z_of(&a, pdip_moment(s, alpha, theta))));
    }
    let pass = zs.iter().all(|(_, z1, z2)| z1.abs() <= Z_BAND && z2.abs() <= Z_BAND);
    let detail = zs.iter().map(|(k, z1, z2)| format!("{k} z(vs sampler)={z1:+.2} z(vs exact)={z2:+.2}")).collect::<Vec<_>>().join(", ");
    assert!(verdict(7, "PDIPE stationarity", pass, &detail, t), "{detail}");
}

#[test]
fn criterion_08_generator_finite_difference() {
    let t = Instant::now();
    let cfg = FdConfig { reps: 50_000, seed: SEED, ..FdConfig::default() };
    let reports = generator_fd_test(&three_blocks(), &[comp("2"), comp("1,2")], 0.5, 0.5, &cfg).unwrap();
    let pass = reports.iter().all(|r| r.pass);
    let detail = reports
        .iter()
        .map(|r| {
            format!(
                "σ={} slope {:+.4} ± {:.4} vs target {:+.4} (tol {:.4})",
                r.sigma, r.extrapolated.mean, r.extrapolated.se, r.target, r.tolerance
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    assert!(verdict(8, "generator finite difference", pass, &detail, t), "{detail}");
}

#[test]
fn criterion_09_scaffold_kernel_agreement() {
    let t = Instant::now();
    let params = ConvergenceParams::default();
    let rep = scaffold_kernel_study(&params).unwrap();
    // Mean of the Kolmogorov law times the two-sample scale: the expected D with zero bias.
    let (n, m) = (params.reps as f64, params.ref_reps as f64);
    let floor = (std::f64::consts::PI / 2.0).sqrt() * std::f64::consts::LN_2 * ((n + m) / (n * m)).sqrt();
    let detail = rep
        .rows
        .iter()
        .map(|r| format!("ε={:.0e} step={:.0e} KS D={:.4}", r.eps, r.level_step, r.ks_mass.d))
        .collect::<Vec<_>>()
        .join(", ");
    let detail = format!("{detail}; non-increasing={}; zero-bias expected D={floor:.4}", rep.non_increasing);
    assert!(verdict(9, "scaffold vs kernel", rep.pass, &detail, t), "{detail}");
}

#[test]
fn criterion_10_perturbed_ray_knight() {
    let t = Instant::now();
    let alpha = 0.5;
    let cfg = ScaffoldConfig::new(alpha, 2e-4, 1e-3);
    let (x, levels) = (0.5, [0.25, 0.5]);
    let mut parts = Vec::new();
    let mut pass = true;
    for theta in [alpha, 2.0 * alpha] {
        let rep = ray_knight_mass_check(x, theta, &levels, cfg, 4000, SEED).unwrap();
        pass &= rep.pass;
        for c in &rep.levels {
            parts.push(format!(
                "θ={theta} y={} KS D={:.4} p={:.3} mean {:.4} vs {:.4}",
                c.level, c.ks.d, c.ks.p, c.mean_mass.mean, c.target_mean
            ));
        }
    }
    let identical = (0..20).all(|i| {
        let (mut a, mut b) = (rng(1000 + i), rng(1000 + i));
        ray_knight_perturbed(x, alpha, &levels, cfg, &mut a).unwrap() == ray_knight_unperturbed(x, &levels, cfg, &mut b).unwrap()
    });
    pass &= identical;
    parts.push(format!("θ=α bit-identical to unperturbed: {identical}"));
    let detail = parts.join("; ");
    assert!(verdict(10, "perturbed Ray-Knight", pass, &detail, t), "{detail}");
}

#[test]
fn criterion_11_updown_chain() {
    let t = Instant::now();
    let rep = updown_stationarity(4, 0.5, 0.5, 100_000, 25, SEED).unwrap();
    type Q = Ratio<i64>;
    let (a, th) = (Q::new(1, 2), Q::new(1, 2));
    let mut exact = true;
    for n in 1..=20u32 {
        for s in Composition::all_of(n) {
            let moves = up_moves_with(&s, a, th, |k| Q::from_integer(k as i64));
            let total = moves.iter().fold(Q::from_integer(0), |acc, (_, p)| acc + *p);
            exact &= total == Q::from_integer(1) && moves.iter().all(|(_, p)| *p >= Q::from_integer(0));
        }
    }
    let pass = rep.pass && exact;
    let detail = format!(
        "chain vs exact law χ²={:.2} p={:.3}, chain vs direct χ²={:.2} p={:.3}, rational normalization n≤20: {exact}",
        rep.goodness_of_fit.statistic, rep.goodness_of_fit.p, rep.homogeneity.statistic, rep.homogeneity.p
    );
    assert!(verdict(11, "up-down chain", pass, &detail, t), "{detail}");
}

#[test]
fn criterion_12_subordinator_construction() {
    let t = Instant::now();
    let (alpha, lambda, eps) = (0.4, 1.5, 1e-7);
    let n = 20_000;
    let runs = reps(n, 121, |g| sample_stable_subordinator_range(lambda, alpha, eps, g).unwrap());
    let pre: Vec<f64> = runs.iter().map(|r| r.pre_mass).collect();
    let over: Vec<f64> = runs.iter().map(|r| r.overshoot).collect();
    let ga = Gamma::new(alpha, lambda).unwrap();
    let gb = Gamma::new(1.0 - alpha, lambda).unwrap();
    let ks_pre = ks_one_sample(&pre, |x| ga.cdf(x)).unwrap();
    let ks_over = ks_one_sample(&over, |x| gb.cdf(x)).unwrap();
    let largest: Vec<f64> = runs.iter().filter(|r| r.pre_mass > 0.0).map(|r| r.partition.largest() / r.pre_mass).collect();
    let direct = reps(n, 122, |g| sample_pdip_stickbreaking(alpha, alpha, Truncation::default(), g).unwrap().largest());
    let ks_largest = ks_two_sample(&largest, &direct).unwrap();
    let pass = [ks_pre.p, ks_over.p, ks_largest.p].iter().all(|&p| p > SIGNIFICANCE);
    let detail = format!(
        "Y(T-) KS p={:.3}, S-Y(T-) KS p={:.3}, PDIP(α,α) largest block KS D={:.4} p={:.3}",
        ks_pre.p, ks_over.p, ks_largest.d, ks_largest.p
    );
    assert!(verdict(12, "subordinator construction", pass, &detail, t), "{detail}");
}
