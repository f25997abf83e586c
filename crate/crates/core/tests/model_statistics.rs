//! Statistical checks of the generated scenarios (3σ bands).

use num_complex::Complex64;

use si_amp::model::{sample_activity_trace, MarkovActivityModel, PhysicalLayout, PilotMatrix, ScenarioConfig, TrialScenario};
use si_amp::rng::SeedTree;

fn within_3_sigma(count: usize, trials: usize, p: f64) -> bool {
    let mean = trials as f64 * p;
    let sd = (trials as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - mean).abs() <= 3.0 * sd
}

#[test]
fn transition_frequencies() {
    let model = MarkovActivityModel::new(0.1, 0.46).unwrap();
    let trace = sample_activity_trace(&model, 20_000, 6, &mut SeedTree::new(1).stream("t", &[]));
    let (mut from_on, mut on_on, mut from_off, mut off_on) = (0, 0, 0, 0);
    for n in 0..trace.nrows() {
        for j in 1..trace.ncols() {
            if trace[[n, j - 1]] {
                from_on += 1;
                on_on += trace[[n, j]] as usize;
            } else {
                from_off += 1;
                off_on += trace[[n, j]] as usize;
            }
        }
    }
    assert!(within_3_sigma(on_on, from_on, 0.46), "{on_on}/{from_on}");
    assert!(within_3_sigma(off_on, from_off, 0.06), "{off_on}/{from_off}");
    for j in 0..trace.ncols() {
        let active = trace.column(j).iter().filter(|a| **a).count();
        assert!(within_3_sigma(active, trace.nrows(), 0.1), "block {j}: {active}");
    }
}

#[test]
fn memoryless_activity_is_uncorrelated() {
    let model = MarkovActivityModel::independent(0.2).unwrap();
    let trace = sample_activity_trace(&model, 10_000, 5, &mut SeedTree::new(2).stream("t", &[]));
    let (n, j) = trace.dim();
    let x = |a: bool| if a { 1.0 } else { 0.0 };
    let mut num = 0.0;
    let pairs = n * (j - 1);
    for d in 0..n {
        for b in 1..j {
            num += (x(trace[[d, b]]) - 0.2) * (x(trace[[d, b - 1]]) - 0.2);
        }
    }
    let corr = num / pairs as f64 / (0.2 * 0.8);
    assert!(corr.abs() < 3.0 / (pairs as f64).sqrt(), "lag-1 correlation {corr}");
}

fn config(n: usize, l: usize, m: usize, gain: f64, noise: f64) -> ScenarioConfig {
    ScenarioConfig {
        num_devices: n,
        pilot_length: l,
        num_antennas: m,
        num_blocks: 2,
        activity_rate: 0.1,
        persistence: 0.46,
        noise_variance: noise,
        path_losses: vec![gain; n],
        rng_seed: 9,
        amp_max_iters: 50,
        amp_convergence_tol: 1e-6,
    }
}

#[test]
fn pilot_entries_have_variance_one_over_l() {
    let (l, n) = (200, 500);
    let s = PilotMatrix::sample(l, n, &mut SeedTree::new(3).stream("p", &[]));
    let k = (l * n) as f64;
    let mean_sq: f64 = s.0.iter().map(Complex64::norm_sqr).sum::<f64>() / k;
    // |s|² is exponential with mean 1/L, so its sample mean has sd (1/L)/sqrt(k)
    assert!((mean_sq * l as f64 - 1.0).abs() < 3.0 / k.sqrt(), "{mean_sq}");
    let mean: Complex64 = s.0.iter().sum::<Complex64>() / k;
    assert!(mean.norm() < 3.0 * (1.0 / (l as f64 * k)).sqrt());
}

#[test]
fn pilots_fixed_across_blocks_and_noise_has_sigma_squared() {
    let cfg = config(300, 120, 3, 2.0, 0.25);
    let sc = TrialScenario::generate(&cfg, &SeedTree::new(cfg.rng_seed), 4).unwrap();
    let mut energy = 0.0;
    let mut count = 0usize;
    for (b, truth) in sc.received.iter().zip(&sc.truths) {
        energy += b.noise.iter().map(Complex64::norm_sqr).sum::<f64>();
        count += b.noise.len();
        let expected = sc.pilots.0.dot(&truth.signal) + &b.noise;
        assert!(expected.iter().zip(b.y.iter()).all(|(a, c)| (a - c).norm() < 1e-12));
    }
    let mean = energy / count as f64;
    assert!((mean / 0.25 - 1.0).abs() < 3.0 / (count as f64).sqrt(), "{mean}");
}

#[test]
fn channels_have_the_configured_gain() {
    let cfg = config(4000, 50, 2, 3.5, 1.0);
    let sc = TrialScenario::generate(&cfg, &SeedTree::new(cfg.rng_seed), 0).unwrap();
    let t = &sc.truths[0];
    let k = t.channels.len() as f64;
    let mean = t.channels.iter().map(Complex64::norm_sqr).sum::<f64>() / k;
    assert!((mean / 3.5 - 1.0).abs() < 3.0 / k.sqrt(), "{mean}");
    for (n, &a) in t.activity.iter().enumerate() {
        let row_zero = t.signal.row(n).iter().all(|v| *v == Complex64::new(0.0, 0.0));
        assert_eq!(row_zero, !a);
    }
}

#[test]
fn device_distances_fill_the_annulus_uniformly() {
    let layout = PhysicalLayout::default();
    let d = layout.sample_distances(50_000, &mut SeedTree::new(5).stream("g", &[]));
    assert!(d.iter().all(|&x| (0.05..=1.0).contains(&x)));
    let inside = d.iter().filter(|&&x| x < 0.5).count();
    let p = (0.25 - 0.0025) / (1.0 - 0.0025);
    assert!(within_3_sigma(inside, d.len(), p), "{inside}");
}

#[test]
fn trials_are_reproducible_and_distinct() {
    let cfg = config(100, 40, 1, 1.0, 0.1);
    let seeds = SeedTree::new(cfg.rng_seed);
    let a = TrialScenario::generate(&cfg, &seeds, 3).unwrap();
    let b = TrialScenario::generate(&cfg, &seeds, 3).unwrap();
    let c = TrialScenario::generate(&cfg, &seeds, 4).unwrap();
    assert_eq!(a.received[1].y, b.received[1].y);
    assert_eq!(a.activity, b.activity);
    assert_ne!(a.received[0].y, c.received[0].y);
}
