use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use irb_core::clifford::{compose_sequence, enumerate, CliffordElement};
use irb_core::modelsel::{
    aic, analytic_alpha, classify_with, fit_model, relative_probs, ClassifyOptions, ModelKind, ModelSpec,
};
use irb_core::protocols::{cell_rng, generate_rb_sequence, rb_experiment, ExactBackend, RbConfig, Shots, SpamBackend};
use irb_core::qchannel::{avg_gate_fidelity, Channel, QubitState, Unitary2, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn clifford() -> impl Strategy<Value = CliffordElement> {
    (0usize..24).prop_map(|i| CliffordElement::from_index(i).unwrap())
}

fn axis() -> impl Strategy<Value = [f64; 3]> {
    (0.0..PI, 0.0..2.0 * PI).prop_map(|(t, p)| [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()])
}

fn noisy_channel() -> impl Strategy<Value = Channel> {
    (axis(), -PI..PI, 1e-9..1e-6, 0.3f64..1.0, 0.9f64..1.0).prop_map(|(ax, angle, dur, t2_frac, p)| {
        let t1 = 45e-6;
        let t2 = (2.0 * t1 * t2_frac).max(1e-9);
        Channel::unitary(&Unitary2::rotation(ax, angle).unwrap())
            .then(&Channel::decoherence(dur, t1, t2).unwrap())
            .then(&Channel::depolarizing(p).unwrap())
    })
}

/// The six Pauli eigenstates form a state 2-design, so their mean overlap
/// equals the Haar average exactly.
fn design_average_fidelity(actual: &Channel, target: &Unitary2) -> f64 {
    let h = C64::from(std::f64::consts::FRAC_1_SQRT_2);
    let i = C64::new(0.0, 1.0);
    let one = C64::from(1.0);
    let zero = C64::from(0.0);
    let kets = [(one, zero), (zero, one), (h, h), (h, -h), (h, h * i), (h, -h * i)];
    let ideal = Channel::unitary(target);
    kets.iter()
        .map(|&(a, b)| {
            let psi = QubitState::pure(a, b).unwrap();
            let got = actual.apply(&psi);
            let want = ideal.apply(&psi);
            (want.rho() * got.rho()).trace().re
        })
        .sum::<f64>()
        / 6.0
}

fn random_ket(rng: &mut ChaCha8Rng) -> QubitState {
    let g = |rng: &mut ChaCha8Rng| {
        let (u1, u2): (f64, f64) = (rng.random_range(1e-12..1.0), rng.random());
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    };
    let (a, b, c, d) = (g(rng), g(rng), g(rng), g(rng));
    let norm = (a * a + b * b + c * c + d * d).sqrt();
    QubitState::pure(C64::new(a / norm, b / norm), C64::new(c / norm, d / norm)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn composition_is_a_homomorphism(a in clifford(), b in clifford()) {
        let product = b.unitary().mul(&a.unitary());
        prop_assert!(a.then(b).unitary().equals_up_to_phase(&product, 1e-12));
    }

    #[test]
    fn group_axioms(a in clifford(), b in clifford(), c in clifford()) {
        prop_assert_eq!(a.then(b).then(c), a.then(b.then(c)));
        prop_assert_eq!(a.then(a.inverse()), CliffordElement::IDENTITY);
        prop_assert_eq!(a.inverse().then(a), CliffordElement::IDENTITY);
        prop_assert_eq!(a.then(CliffordElement::IDENTITY), a);
    }

    #[test]
    fn rb_sequences_compose_to_identity(length in 1usize..400, seed in any::<u64>()) {
        let seq = generate_rb_sequence(length, &mut cell_rng(seed, length, 0, 0)).unwrap();
        prop_assert_eq!(seq.len(), length + 1);
        prop_assert_eq!(compose_sequence(&seq), CliffordElement::IDENTITY);
        let u = seq.iter().fold(Unitary2::identity(), |acc, c| c.unitary().mul(&acc));
        prop_assert!(u.equals_up_to_phase(&Unitary2::identity(), 1e-9));
    }

    #[test]
    fn composed_channels_stay_cptp(a in noisy_channel(), b in noisy_channel(), c in noisy_channel()) {
        let abc = a.then(&b).then(&c);
        prop_assert!(abc.is_cptp(1e-10));
        prop_assert!(abc.distance(&a.then(&b.then(&c))) < 1e-12);
    }

    #[test]
    fn fidelity_matches_design_average(ch in noisy_channel(), ax in axis(), angle in -PI..PI) {
        let target = Unitary2::rotation(ax, angle).unwrap();
        let f = avg_gate_fidelity(&ch, &target).avg_fidelity();
        prop_assert!((f - design_average_fidelity(&ch, &target)).abs() < 1e-12);
    }

    #[test]
    fn aic_shift_under_residual_scaling(rss in 1e-12f64..1e3, scale in 1e-3f64..1e3, num_points in 5usize..60, k in 1usize..4) {
        prop_assume!(num_points > k + 1);
        let shift = aic(rss * scale, num_points, k).unwrap() - aic(rss, num_points, k).unwrap();
        prop_assert!((shift - num_points as f64 * scale.ln()).abs() < 1e-8 * (1.0 + shift.abs()));
    }

    #[test]
    fn probabilities_invariant_to_common_shift(c in prop::collection::vec(-100.0..100.0, 1..6), shift in -1e3..1e3) {
        let p = relative_probs(&c);
        let q = relative_probs(&c.iter().map(|x| x + shift).collect::<Vec<_>>());
        prop_assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-9));
        prop_assert_eq!(p.iter().copied().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn uniform_scaling_keeps_the_verdict(scale in 0.5..1.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<(usize, f64)> = (0..=16)
            .map(|n| (n, 0.9995f64.powi(n as i32) * 0.999 + rng.random_range(-2e-5..2e-5)))
            .collect();
        let scaled: Vec<(usize, f64)> = points.iter().map(|(n, a)| (*n, a * scale)).collect();
        let opts = ClassifyOptions { weighted: false, ..ClassifyOptions::default() };
        let a = classify_with(&points, None, &opts).unwrap();
        let b = classify_with(&scaled, None, &opts).unwrap();
        prop_assert_eq!(a.verdict, b.verdict);
    }
}

#[test]
fn fidelity_matches_haar_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let target = Unitary2::rotation([0.0, 1.0, 0.0], PI / 2.0).unwrap();
    let actual = Channel::unitary(&Unitary2::rotation([0.0, 1.0, 0.0], PI / 2.0 + 0.2).unwrap())
        .then(&Channel::amplitude_damping(0.05).unwrap());
    let ideal = Channel::unitary(&target);
    let samples = 40_000;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let psi = random_ket(&mut rng);
        let f = (ideal.apply(&psi).rho() * actual.apply(&psi).rho()).trace().re;
        sum += f;
        sum_sq += f * f;
    }
    let mean = sum / samples as f64;
    let sd = ((sum_sq / samples as f64 - mean * mean) / samples as f64).sqrt();
    let f = avg_gate_fidelity(&actual, &target).avg_fidelity();
    assert!(
        (f - mean).abs() < 4.0 * sd,
        "closed form {f}, Monte Carlo {mean} +- {sd}"
    );
}

#[test]
fn rb_alpha_is_spam_invariant() {
    let cfg = RbConfig {
        num_seeds: 10,
        ..RbConfig::default()
    };
    let inner = ExactBackend::depolarizing(0.995).unwrap();
    let (_, clean) = rb_experiment(&cfg, &inner).unwrap();
    let spam = SpamBackend {
        inner: inner.clone(),
        preparation: Channel::unitary(&Unitary2::rotation([1.0, 0.0, 0.0], 0.3).unwrap())
            .then(&Channel::depolarizing(0.97).unwrap()),
        p1_given_0: 0.04,
        p0_given_1: 0.07,
    };
    let (_, dirty) = rb_experiment(&cfg, &spam).unwrap();
    assert_abs_diff_eq!(clean.alpha, 0.995, epsilon = 1e-9);
    assert_abs_diff_eq!(dirty.alpha, clean.alpha, epsilon = 1e-9);
    assert!((dirty.a - clean.a).abs() > 1e-3);
}

#[test]
fn alpha_interval_coverage() {
    let p = 0.99;
    let backend = ExactBackend::depolarizing(p).unwrap();
    let trials = 200;
    let mut covered = 0;
    for seed in 0..trials {
        let cfg = RbConfig {
            lengths: vec![1, 4, 10, 20, 40, 70, 110, 160],
            num_seeds: 10,
            shots: Shots::Finite(200),
            seed,
        };
        let (_, fit) = rb_experiment(&cfg, &backend).unwrap();
        if fit.alpha_ci95[0] <= p && p <= fit.alpha_ci95[1] {
            covered += 1;
        }
    }
    let rate = covered as f64 / trials as f64;
    assert!((0.9..=0.99).contains(&rate), "coverage {rate}");
}

#[test]
fn enumeration_covers_the_group_once() {
    let all = enumerate();
    assert_eq!(all.len(), 24);
    for (i, c) in all.iter().enumerate() {
        assert_eq!(c.index(), i);
        for d in &all[..i] {
            assert!(!c.unitary().equals_up_to_phase(&d.unitary(), 1e-9));
        }
    }
}

#[test]
fn combined_model_can_lose_to_quadratic() {
    let eps = PI / 1024.0;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n: Vec<f64> = (0..=16).map(f64::from).collect();
    let alpha: Vec<f64> = (0..=16)
        .map(|k| analytic_alpha(eps, k) + rng.random_range(-1e-6..1e-6))
        .collect();
    let (_, quad) = fit_model(&n, &alpha, ModelSpec::new(ModelKind::Quadratic), None).unwrap();
    let (_, comb) = fit_model(&n, &alpha, ModelSpec::new(ModelKind::Combined), None).unwrap();
    let (_, lin) = fit_model(&n, &alpha, ModelSpec::new(ModelKind::Linear), None).unwrap();
    assert!(comb <= quad && quad < lin);
    let c_quad = aic(quad, n.len(), 2).unwrap();
    let c_comb = aic(comb, n.len(), 3).unwrap();
    assert!(c_comb > c_quad, "combined {c_comb} quadratic {c_quad}");
}
