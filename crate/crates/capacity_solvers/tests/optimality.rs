//! Structural optimality properties that every solver output must carry:
//! the ensemble members sit at the capacity distance from the average,
//! no surface point sits farther, the two Holevo forms agree, at most
//! four states are used, and the optimal center does not depend on the
//! random seed.

use bloch_core::relative_entropy;
use capacity_solvers::{
    capacity_sweep, holevo_chi, iterative_capacity, max_relative_entropy_on_surface, solve_auto,
    CapacityResult, IterConfig,
};
use channel_model::{named_channel, ChannelParams, NamedChannelSpec, NamedKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

fn random_channel(rng: &mut ChaCha8Rng) -> ChannelParams {
    loop {
        let t = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let lam = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        if let Ok(p) = ChannelParams::new(t, lam) {
            return p;
        }
    }
}

fn assert_optimal(p: &ChannelParams, r: &CapacityResult, tol: f64) {
    r.ensemble.validate().expect("well-formed ensemble");
    assert!(r.ensemble.items.len() <= 4, "more than four signal states");
    assert!(
        r.max_equal_distance_residual <= tol,
        "equal-distance residual {} above {}",
        r.max_equal_distance_residual,
        tol
    );
    let (dmax, _) = max_relative_entropy_on_surface(p, r.average_output);
    assert!(
        (dmax - r.capacity_bits).abs() <= tol.max(1e-9),
        "surface max {} vs capacity {}",
        dmax,
        r.capacity_bits
    );
    let chi_sum: f64 = r
        .ensemble
        .items
        .iter()
        .map(|m| m.probability * relative_entropy(m.output, r.ensemble.average_output).unwrap())
        .sum();
    assert!(
        (holevo_chi(&r.ensemble) - chi_sum).abs() <= 1e-10,
        "entropy-difference chi {} vs distance-average chi {}",
        holevo_chi(&r.ensemble),
        chi_sum
    );
}

#[test]
fn solver_outputs_are_equal_and_maximal_distance() {
    let cfg = IterConfig::default();
    let zoo = [
        ChannelParams::new([0.0, 0.0, 0.2], [0.0, 0.0, 0.4]).unwrap(),
        ChannelParams::new([0.1, 0.2, 0.3], [0.0, 0.0, 0.4]).unwrap(),
        ChannelParams::new([0.3, 0.1, 0.0], [0.4, 0.5, 0.0]).unwrap(),
        named_channel(NamedChannelSpec { kind: NamedKind::AmplitudeDamping, x: 0.36 }).unwrap(),
        named_channel(NamedChannelSpec { kind: NamedKind::Depolarizing, x: 0.8 }).unwrap(),
        ChannelParams::new([0.0; 3], [0.7, -0.4, 0.2]).unwrap(),
    ];
    for p in &zoo {
        let r = solve_auto(p, &cfg).unwrap();
        assert_optimal(p, &r, 1e-8);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..6 {
        let p = random_channel(&mut rng);
        let r = solve_auto(&p, &cfg).unwrap();
        assert_optimal(&p, &r, 5e-6);
    }
}

#[test]
fn optimal_center_is_seed_independent() {
    let planar = ChannelParams::new([0.3, 0.1, 0.0], [0.4, 0.5, 0.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let skew = random_channel(&mut rng);
    for p in [&planar, &skew] {
        let reference = iterative_capacity(p, &IterConfig::default()).unwrap();
        for seed in 1..5 {
            let cfg = IterConfig { seed, ..IterConfig::default() };
            let r = iterative_capacity(p, &cfg).unwrap();
            assert!(
                r.average_output.distance(reference.average_output) <= 1e-4,
                "seed {seed} moved the center by {}",
                r.average_output.distance(reference.average_output)
            );
            assert!((r.capacity_bits - reference.capacity_bits).abs() <= 1e-6);
        }
    }
}

#[test]
fn unital_sweeps_match_the_binary_entropy_formula() {
    // closed form: C1 = 1 - H((1 + l_max)/2) with H in bits
    let capacity_of = |l: f64| {
        let hi = (1.0 + l.abs()) / 2.0;
        1.0 + xlog2x(hi) + xlog2x(1.0 - hi)
    };
    let xs: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    for (x, c) in capacity_sweep(NamedKind::Depolarizing, &xs).unwrap() {
        let l = (4.0 * x - 1.0) / 3.0;
        assert!((c - capacity_of(l)).abs() <= 1e-12, "depolarizing x = {x}");
    }
    for (x, c) in capacity_sweep(NamedKind::TwoPauli, &xs).unwrap() {
        let l = x.max((2.0 * x - 1.0).abs());
        assert!((c - capacity_of(l)).abs() <= 1e-12, "two-Pauli x = {x}");
    }
}

#[test]
fn two_pauli_parameter_symmetry() {
    // the largest scaling coincides at x = 1/3 - a and x = 1/3 + 2a, so
    // the capacities match exactly
    let cfg = IterConfig::default();
    for a in [0.05, 0.1, 0.15, 0.2] {
        let low = named_channel(NamedChannelSpec {
            kind: NamedKind::TwoPauli,
            x: 1.0 / 3.0 - a,
        })
        .unwrap();
        let high = named_channel(NamedChannelSpec {
            kind: NamedKind::TwoPauli,
            x: 1.0 / 3.0 + 2.0 * a,
        })
        .unwrap();
        let c_low = solve_auto(&low, &cfg).unwrap().capacity_bits;
        let c_high = solve_auto(&high, &cfg).unwrap().capacity_bits;
        assert!((c_low - c_high).abs() <= 1e-12, "alpha = {a}");
    }
}

#[test]
fn iterative_solver_agrees_with_unital_closed_form() {
    let cfg = IterConfig::default();
    for i in 1..=9 {
        let x = i as f64 / 10.0;
        let p = named_channel(NamedChannelSpec { kind: NamedKind::Depolarizing, x }).unwrap();
        let closed = solve_auto(&p, &cfg).unwrap().capacity_bits;
        let iterated = iterative_capacity(&p, &cfg).unwrap().capacity_bits;
        assert!(
            (closed - iterated).abs() <= 1e-5,
            "x = {x}: closed {closed} vs iterative {iterated}"
        );
    }
}

#[test]
fn sweeps_handle_degenerate_members() {
    // x = 1/4 collapses the depolarizing image to the center point
    let pts = capacity_sweep(NamedKind::Depolarizing, &[0.1, 0.25, 1.0]).unwrap();
    assert!(pts[0].1 > 0.0);
    assert_eq!(pts[1].1, 0.0);
    assert!((pts[2].1 - 1.0).abs() <= 1e-15);
}
