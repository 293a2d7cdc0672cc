use super::*;
use crate::mdp::evaluate_performance;
use crate::oracle::{build_z, compute_otp, value_iteration, DEFAULT_TOLERANCE};

fn classifier(id: u64, alleles: [[i32; 2]; 2], action: Action, weights: [f64; 3], fitness: f64) -> Classifier {
    Classifier {
        id,
        condition: UbrCondition::new(alleles),
        action,
        weights,
        rls: scaled_identity(10.0),
        error: 0.0,
        noise: 0.0,
        fitness,
        numerosity: 1,
        experience: 0,
        action_set_size: 1.0,
        timestamp: 0,
    }
}

fn det4() -> FlEnv {
    FlEnv::standard(4, 0.0).unwrap()
}

#[test]
fn prediction_array_is_fitness_weighted() {
    let s = State::new(1, 2);
    let cls = [
        classifier(0, [[0, 3], [0, 3]], Action::Left, [0.05, 0.0, 0.0], 0.2),
        classifier(1, [[1, 1], [2, 2]], Action::Left, [0.0, 0.1, 0.0], 0.6),
        classifier(2, [[0, 3], [0, 3]], Action::Up, [0.0, 0.0, 0.25], 1.0),
    ];
    let pa = prediction_array(cls.iter(), s, 10.0);
    // (0.2 * 0.5 + 0.6 * 0.1) / 0.8
    assert!((pa[0].unwrap() - 0.2).abs() < 1e-12);
    assert_eq!(pa[1], None);
    assert_eq!(pa[2], None);
    assert!((pa[3].unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(argmax(&pa), Decision::Act(Action::Up));
}

#[test]
fn argmax_ties_and_empty() {
    assert_eq!(argmax(&[None; 4]), Decision::Null);
    assert_eq!(
        argmax(&[None, Some(0.3), Some(0.3), Some(0.1)]),
        Decision::Act(Action::Down)
    );
}

#[test]
fn covering_fills_every_action() {
    let env = FlEnv::standard(8, 0.0).unwrap();
    let mut xcs = Xcs::new(XcsConfig::for_grid(8), &env).unwrap();
    let mut rng = RngStream::new(3);
    for s in env.initial_states().to_vec() {
        let m = xcs.match_set_with_covering(s, &mut rng);
        let mut seen = [false; 4];
        for &i in &m {
            let c = &xcs.population()[i];
            assert!(c.matches(s));
            for d in 0..2 {
                assert!(c.condition.upper(d) - c.condition.lower(d) <= 2 * xcs.config().r0);
                assert!(c.condition.lower(d) >= 0 && c.condition.upper(d) < 8);
            }
            seen[c.action.index()] = true;
        }
        assert_eq!(seen, [true; 4]);
    }
}

#[test]
fn empty_population_gives_null_and_zero_performance() {
    let env = det4();
    let xcs = Xcs::new(XcsConfig::for_grid(4), &env).unwrap();
    let z = build_z(&env, 1);
    let mut rng = RngStream::new(0);
    assert_eq!(xcs.greedy_decision(State::new(0, 0)), Decision::Null);
    assert_eq!(
        evaluate_performance(&env, &xcs.greedy_policy(), &z, &mut rng).unwrap(),
        0.0
    );
}

#[test]
fn population_bound_and_ids_hold_during_training() {
    let env = FlEnv::standard(4, 0.3).unwrap();
    let mut cfg = XcsConfig::for_grid(4);
    cfg.n = 60;
    let mut xcs = Xcs::new(cfg, &env).unwrap();
    let mut rng = RngStream::new(11);
    let mut ga = 0;
    for _ in 0..5000 {
        ga += xcs.train_step(&env, &mut rng).ga_invocations;
        assert!(xcs.numerosity_sum() <= 60);
    }
    assert_eq!(ga, xcs.ga_invocation_count());
    assert!(ga > 0);
    let ids: Vec<u64> = xcs.population().iter().map(|c| c.id).collect();
    assert!(ids.windows(2).all(|w| w[0] < w[1]));
    for c in xcs.population() {
        assert!(c.numerosity >= 1);
        assert!(c.fitness.is_finite() && c.error >= 0.0);
    }
}

#[test]
fn accurate_parent_subsumes_offspring() {
    let env = det4();
    let mut xcs = Xcs::new(XcsConfig::for_grid(4), &env).unwrap();
    let mut parent = classifier(0, [[0, 3], [0, 3]], Action::Right, [0.0; 3], 0.5);
    parent.experience = 100;
    parent.error = 0.001;
    xcs.set_population(vec![parent]);
    let child = classifier(5, [[1, 2], [0, 3]], Action::Right, [0.0; 3], 0.05);
    xcs.insert_offspring(child.clone(), &[0, 0]);
    assert_eq!(xcs.population().len(), 1);
    assert_eq!(xcs.population()[0].numerosity, 2);

    let mut other = child;
    other.action = Action::Up;
    xcs.insert_offspring(other, &[0, 0]);
    assert_eq!(xcs.population().len(), 2);
}

#[test]
fn identical_offspring_merge_into_macroclassifier() {
    let env = det4();
    let mut xcs = Xcs::new(XcsConfig::for_grid(4), &env).unwrap();
    xcs.set_population(vec![classifier(0, [[2, 0], [1, 1]], Action::Down, [0.0; 3], 0.5)]);
    xcs.insert(classifier(1, [[0, 2], [1, 1]], Action::Down, [0.0; 3], 0.5));
    assert_eq!(xcs.population().len(), 1);
    assert_eq!(xcs.population()[0].numerosity, 2);
}

#[test]
fn ga_respects_threshold() {
    let env = det4();
    let mut cfg = XcsConfig::for_grid(4);
    cfg.theta_ga = 5;
    let mut xcs = Xcs::new(cfg, &env).unwrap();
    xcs.set_population(vec![classifier(0, [[0, 3], [0, 3]], Action::Down, [0.0; 3], 0.5)]);
    let mut rng = RngStream::new(1);
    xcs.time = 5;
    xcs.run_ga(&[0], &mut rng);
    assert_eq!(xcs.ga_invocation_count(), 0);
    xcs.time = 6;
    xcs.run_ga(&[0], &mut rng);
    assert_eq!(xcs.ga_invocation_count(), 1);
    assert_eq!(xcs.numerosity_sum(), 3);
    assert!(xcs.population().iter().all(|c| c.timestamp == 6));
}

#[test]
fn update_without_noise_tracking_uses_mam() {
    let env = det4();
    let mut xcs = Xcs::new(XcsConfig::for_grid(4), &env).unwrap();
    xcs.set_population(vec![classifier(0, [[0, 3], [0, 3]], Action::Down, [0.0; 3], 0.5)]);
    xcs.update_set(&[0], State::new(0, 0), 1.0);
    let c = &xcs.population()[0];
    assert_eq!(c.experience, 1);
    // First update replaces the error by the observed |P - p| = 1.
    assert!((c.error - 1.0).abs() < 1e-12);
    assert_eq!(c.noise, 0.0);
    assert!(c.weights[0] > 0.0);
    // Single-classifier set: relative accuracy is 1, fitness moves by beta.
    assert!((c.fitness - 0.55).abs() < 1e-12);
}

#[test]
fn learns_deterministic_small_lake() {
    let env = det4();
    let mut xcs = Xcs::new(XcsConfig::for_grid(4), &env).unwrap();
    let mut rng = RngStream::new(7);
    for _ in 0..30_000 {
        xcs.train_step(&env, &mut rng);
    }
    let z = build_z(&env, 1);
    let q = value_iteration(&env, DEFAULT_TOLERANCE);
    let otp = compute_otp(&env, &q, &z, &mut rng).unwrap().otp;
    let perf = evaluate_performance(&env, &xcs.greedy_policy(), &z, &mut rng).unwrap();
    assert!(perf / otp > 0.9, "{perf} / {otp}");
}

#[test]
fn training_is_reproducible() {
    let env = FlEnv::standard(4, 0.3).unwrap();
    let run = || {
        let mut xcs = Xcs::new(XcsConfig::for_grid(4), &env).unwrap();
        let mut rng = RngStream::new(99);
        for _ in 0..2000 {
            xcs.train_step(&env, &mut rng);
        }
        xcs.population().to_vec()
    };
    assert_eq!(run(), run());
}
