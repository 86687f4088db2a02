mod common;

use approx::assert_relative_eq;

use rumrec::matrix::Matrix;
use rumrec::train::{
    adam_step, event_grad, event_loss, fit, fit_from, mean_nll, AdamState, SparseGrad, TrainConfig,
};
use rumrec::{
    generate_world, simulate_sessions, Choice, EnvConfig, Error, Family, ModelParams, SessionEvent,
};

fn one_user(family: Family, item_rows: Vec<Vec<f64>>) -> ModelParams {
    let d = item_rows[0].len();
    ModelParams {
        family,
        x: Matrix::from_rows(vec![vec![1.0; d]]).unwrap(),
        y: Matrix::from_rows(item_rows).unwrap(),
        rho: vec![0.0],
    }
}

fn event(exposed: Vec<usize>, choice: Choice) -> SessionEvent {
    SessionEvent {
        user: 0,
        session: 0,
        exposed,
        choice,
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut rng = common::rng(2024);
    for family in Family::ALL {
        for _ in 0..100 {
            let case = common::random_case(family, &mut rng);
            let err = common::max_gradient_error(&case);
            assert!(err < 1e-4, "{family}: relative error {err}");
        }
    }
}

#[test]
fn loss_examples() {
    // score 1 - 1*1 = 0 against no-buy
    let p = one_user(Family::RumMf, vec![vec![1.0]]);
    let e = event(vec![0], Choice::Item(0));
    assert_relative_eq!(
        event_loss(&p, &e, &[1.0]).unwrap(),
        std::f64::consts::LN_2,
        epsilon = 1e-15
    );

    let p = one_user(Family::MfPclick, vec![vec![0.0]]);
    assert_relative_eq!(
        event_loss(&p, &e, &[1.0]).unwrap(),
        std::f64::consts::LN_2,
        epsilon = 1e-15
    );

    let p = one_user(Family::MfSm, vec![vec![60.0]]);
    assert!(event_loss(&p, &e, &[1.0]).unwrap() < 1e-20);
}

#[test]
fn choice_outside_decision_set_is_rejected() {
    let p = one_user(Family::RumMf, vec![vec![1.0], vec![2.0]]);
    let e = event(vec![0], Choice::Item(1));
    assert!(matches!(
        event_loss(&p, &e, &[1.0, 1.0]),
        Err(Error::ChoiceNotExposed)
    ));
    assert!(matches!(
        event_grad(&p, &e, &[1.0, 1.0], 0.0),
        Err(Error::ChoiceNotExposed)
    ));
}

#[test]
fn gradient_vanishes_at_one_hot_optimum() {
    let p = one_user(Family::RumMf, vec![vec![900.0], vec![-5.0]]);
    let g = event_grad(&p, &event(vec![0, 1], Choice::Item(0)), &[1.0, 1.0], 0.0).unwrap();
    for (_, row) in g.x.iter().chain(&g.y) {
        assert!(row.iter().all(|v| *v == 0.0), "{g:?}");
    }
    assert!(g.rho.iter().all(|(_, v)| *v == 0.0));
}

#[test]
fn symmetric_items_get_antisymmetric_gradients() {
    // No-buy is negligible next to two identical, attractive items.
    let p = one_user(Family::RumMf, vec![vec![20.0, 20.0], vec![20.0, 20.0]]);
    let g = event_grad(&p, &event(vec![0, 1], Choice::Item(0)), &[1.0, 1.0], 0.0).unwrap();
    let (a, b) = (&g.y[0].1, &g.y[1].1);
    for (x, y) in a.iter().zip(b) {
        assert!(x.abs() > 0.1);
        assert_relative_eq!(*x, -*y, epsilon = 1e-12);
    }
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let mut p = one_user(Family::RumMf, vec![vec![0.5, -0.5]]);
    let before = p.clone();
    let cfg = TrainConfig::default();
    let mut state = AdamState::new(&p);
    let grads = SparseGrad {
        x: vec![(0, vec![3.0, -0.2])],
        y: vec![(0, vec![-1e-3, 40.0])],
        rho: vec![(0, 0.7)],
    };
    adam_step(&mut p, &grads, &mut state, &cfg).unwrap();
    let lr = cfg.learning_rate;
    assert_relative_eq!(p.x.row(0)[0], before.x.row(0)[0] - lr, epsilon = 1e-9);
    assert_relative_eq!(p.x.row(0)[1], before.x.row(0)[1] + lr, epsilon = 1e-9);
    assert_relative_eq!(p.y.row(0)[0], before.y.row(0)[0] + lr, epsilon = 1e-7);
    assert_relative_eq!(p.y.row(0)[1], before.y.row(0)[1] - lr, epsilon = 1e-9);
    assert_relative_eq!(p.rho[0], -lr, epsilon = 1e-9);
    assert_eq!(state.t, 1);
}

#[test]
fn zero_gradient_leaves_parameters_unchanged() {
    let mut p = one_user(Family::RumMf, vec![vec![0.5, -0.5], vec![1.0, 2.0]]);
    let before = p.clone();
    let mut state = AdamState::new(&p);
    let grads = SparseGrad {
        x: vec![(0, vec![0.0, 0.0])],
        y: vec![(0, vec![0.0, 0.0]), (1, vec![0.0, 0.0])],
        rho: vec![(0, 0.0)],
    };
    adam_step(&mut p, &grads, &mut state, &TrainConfig::default()).unwrap();
    assert_eq!(p, before);
}

#[test]
fn untouched_rows_keep_their_moments() {
    let mut p = one_user(Family::MfSm, vec![vec![0.5], vec![1.0]]);
    let mut state = AdamState::new(&p);
    let grads = SparseGrad {
        x: vec![],
        y: vec![(1, vec![2.0])],
        rho: vec![],
    };
    adam_step(&mut p, &grads, &mut state, &TrainConfig::default()).unwrap();
    assert_eq!(
        (state.steps_y[0], state.steps_y[1], state.steps_x[0]),
        (0, 1, 0)
    );
    assert_eq!((state.m_y[0], state.v_y[0]), (0.0, 0.0));
    assert_eq!(p.y.row(0), &[0.5]);
}

#[test]
fn non_finite_gradient_aborts_without_mutation() {
    let mut p = one_user(Family::RumMf, vec![vec![0.5]]);
    let before = p.clone();
    let mut state = AdamState::new(&p);
    let grads = SparseGrad {
        x: vec![(0, vec![1.0])],
        y: vec![(0, vec![f64::NAN])],
        rho: vec![],
    };
    let err = adam_step(&mut p, &grads, &mut state, &TrainConfig::default()).unwrap_err();
    assert!(
        matches!(err, Error::NonFiniteGradient { step: 1, .. }),
        "{err}"
    );
    assert_eq!(p, before);
}

fn tiny_world(seed: u64) -> (rumrec::LatentWorld, Vec<SessionEvent>) {
    let world = generate_world(&EnvConfig {
        nb_users: 10,
        nb_prods: 5,
        nb_sessions: 20,
        nb_items_session: 3,
        dimension: 2,
        latent_variance: 1.0,
        seed,
        ..EnvConfig::default()
    })
    .unwrap();
    let events = simulate_sessions(&world);
    (world, events)
}

fn quick() -> TrainConfig {
    TrainConfig {
        epochs: 60,
        batch: 32,
        dimension: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn fitting_reduces_the_loss() {
    let (world, events) = tiny_world(1);
    assert_eq!(events.len(), 200);
    for family in Family::ALL {
        let r = fit(&events, &world.prices, 10, family, &quick()).unwrap();
        assert!(
            r.final_nll < r.initial_nll,
            "{family}: {} -> {}",
            r.initial_nll,
            r.final_nll
        );
        assert_eq!(r.trace.len(), 60);
        assert!(r.params.is_finite());
    }
}

#[test]
fn training_is_deterministic() {
    let (world, events) = tiny_world(2);
    let a = fit(&events, &world.prices, 10, Family::RumMf, &quick()).unwrap();
    let b = fit(&events, &world.prices, 10, Family::RumMf, &quick()).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.trace, b.trace);
    let c = fit(
        &events,
        &world.prices,
        10,
        Family::RumMf,
        &TrainConfig { seed: 5, ..quick() },
    )
    .unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn empty_log_is_rejected() {
    assert!(matches!(
        fit(&[], &[1.0], 1, Family::MfSm, &quick()),
        Err(Error::EmptyEvents)
    ));
}

#[test]
fn heavy_regularization_shrinks_embeddings() {
    let (world, events) = tiny_world(3);
    let cfg = TrainConfig {
        l2_weight: 1e3,
        ..quick()
    };
    for family in Family::ALL {
        let r = fit(&events, &world.prices, 10, family, &cfg).unwrap();
        let norm = r.params.x.max_row_norm().max(r.params.y.max_row_norm());
        assert!(norm < 1e-2, "{family}: {norm}");
    }
}

#[test]
fn zero_prices_make_rum_mf_follow_mf_sm() {
    let (world, events) = tiny_world(4);
    let free = vec![0.0; world.nb_prods()];
    let cfg = quick();
    let init = ModelParams::init(Family::RumMf, 10, 5, 2, 17);
    let rum = fit_from(init.clone(), &events, &free, &cfg).unwrap();
    let sm = fit_from(
        ModelParams {
            family: Family::MfSm,
            ..init
        },
        &events,
        &free,
        &cfg,
    )
    .unwrap();
    assert_eq!(rum.params.x, sm.params.x);
    assert_eq!(rum.params.y, sm.params.y);
    assert!(rum.params.rho.iter().all(|r| *r == 0.0));
    assert_eq!(rum.trace, sm.trace);
}

#[test]
fn event_losses_add_up_to_the_log_loss() {
    let (world, events) = tiny_world(5);
    let params = ModelParams::init(Family::RumMf, 10, 5, 2, 1);
    let total: f64 = events
        .iter()
        .map(|e| event_loss(&params, e, &world.prices).unwrap())
        .sum();
    let mean = mean_nll(&params, &events, &world.prices).unwrap();
    assert!((total - mean * events.len() as f64).abs() < 1e-10);
}

#[test]
fn price_sensitivity_is_recovered_on_a_small_world() {
    let world = generate_world(&EnvConfig {
        nb_users: 20,
        nb_prods: 30,
        nb_sessions: 50,
        nb_items_session: 5,
        dimension: 2,
        latent_variance: 1.0,
        kappa_true: 1.0,
        seed: 0,
        ..EnvConfig::default()
    })
    .unwrap();
    let events = simulate_sessions(&world);
    let cfg = TrainConfig {
        epochs: 100,
        batch: 64,
        dimension: 2,
        ..TrainConfig::default()
    };
    let r = fit(&events, &world.prices, 20, Family::RumMf, &cfg).unwrap();
    let mut kappas: Vec<f64> = (0..20).map(|u| r.params.kappa(u)).collect();
    kappas.sort_by(f64::total_cmp);
    let median = (kappas[9] + kappas[10]) / 2.0;
    assert!((0.3..=3.0).contains(&median), "median sensitivity {median}");
}
