use proptest::prelude::*;

use super::stats::{quantile, Summary};
use super::*;
use crate::channel::{nominal_channel, ChannelPair, ComplexMatrix, Scenario, UncertaintyModel};
use crate::nets::{ActorVariant, CriticParameters};
use crate::rng::{normal_vec, rng_from};
use crate::secrecy::{Paradigm, ParadigmConfig};
use crate::Error;

fn tiny_config(variant: ActorVariant) -> TrainingConfig {
    TrainingConfig {
        epochs: 6,
        batch_size: 4,
        actor_variant: variant,
        network: NetworkShape {
            model_dim: 8,
            ffn_dim: 16,
            mlp_hidden: 8,
            critic_hidden: 8,
            ..NetworkShape::default()
        },
        paradigm: ParadigmConfig {
            mc_samples_train: 8,
            mc_samples_eval: 8,
            ..ParadigmConfig::new(Paradigm::Stochastic)
        },
        eval_every: 3,
        eval_episodes: 2,
        final_eval_episodes: 3,
        record_wall_clock: false,
        ..TrainingConfig::default()
    }
}

#[test]
fn state_layout() {
    let cfg = TrainingConfig::default();
    assert_eq!(cfg.state_dim(), 387);
    let zero = ChannelPair {
        h_b: ComplexMatrix::zeros(6, 16),
        h_e: ComplexMatrix::zeros(6, 16),
    };
    assert_eq!(make_state(&zero, &UncertaintyModel::none(), &cfg.state_scale), vec![0.0; 387]);

    let pair = nominal_channel::<f64>(&Scenario::default(), 3).unwrap();
    let u = UncertaintyModel::default();
    let s = make_state(&pair, &u, &cfg.state_scale);
    assert_eq!(s.len(), 387);
    assert_eq!(s, make_state(&pair, &u, &cfg.state_scale));
    assert_eq!(&s[384..], &[1.0, 1.0, 1.0]);
    assert_eq!(s[96], pair.h_b.im()[0] / 6e-5);
    assert_eq!(s[192], pair.h_e.re()[0] / 6e-5);
    // standardized channel features are of order one
    let rms = (s[..384].iter().map(|x| x * x).sum::<f64>() / 384.0).sqrt();
    assert!(rms > 0.2 && rms < 5.0, "{rms}");
}

#[test]
fn scenario_randomization_stays_in_box() {
    let base = Scenario::default();
    let r = Randomization::default();
    for seed in 0..200 {
        let s = randomize_scenario(&base, &r, seed);
        for (p, q) in [(s.uav_position, base.uav_position), (s.eve_position, base.eve_position)] {
            assert!((p[0] - q[0]).abs() <= 20.0 && (p[1] - q[1]).abs() <= 20.0);
            assert!((p[2] - q[2]).abs() <= 30.0);
        }
        assert_eq!(s.bs_position, base.bs_position);
    }
    assert_eq!(randomize_scenario(&base, &r, 5), randomize_scenario(&base, &r, 5));
}

#[test]
fn config_validation_names_fields() {
    let cfg = TrainingConfig::default();
    cfg.validate().unwrap();
    let back = TrainingConfig::from_json(&cfg.to_json()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(TrainingConfig::from_json("{}").unwrap(), cfg);

    let cases: Vec<(&str, serde_json::Value)> = vec![
        ("p_eve", serde_json::json!({"paradigm": {"paradigm": "chance", "p_eve": 1.5}})),
        ("epochs", serde_json::json!({"epochs": 0})),
        ("soft_update_tau", serde_json::json!({"soft_update_tau": 0.0})),
        ("batch_size", serde_json::json!({"batch_size": 20, "replay_capacity": 10})),
        ("randomization.vertical_m", serde_json::json!({"randomization": {"vertical_m": 90.0}})),
        ("network.n_heads", serde_json::json!({"network": {"n_heads": 3}})),
        ("beta_end", serde_json::json!({"schedule": {"beta_end": 1.5}})),
    ];
    for (field, json) in cases {
        let err = TrainingConfig::from_json(&json.to_string()).unwrap_err();
        assert!(matches!(&err, Error::Config { field: f, .. } if f == field), "{field}: {err}");
        assert!(err.to_string().contains(field));
    }
    let err = TrainingConfig::from_json(r#"{"epoch": 3}"#).unwrap_err();
    assert!(err.to_string().contains("epoch"));
}

#[test]
fn single_epoch_run() {
    let cfg = TrainingConfig {
        epochs: 1,
        ..tiny_config(ActorVariant::MlpDiffusion)
    };
    let mut t = Trainer::new(&cfg).unwrap();
    t.step().unwrap();
    assert_eq!(t.replay().len(), 1);
    let out = train(&cfg).unwrap();
    assert_eq!(out.metrics.len(), 1);
    assert_eq!(out.metrics.rows[0].epoch, 1);
    assert!(out.metrics.rows[0].iter_seconds.is_none());
}

#[test]
fn zero_learning_rate_freezes_parameters() {
    for variant in ActorVariant::ALL {
        let cfg = TrainingConfig {
            learning_rate: 0.0,
            ..tiny_config(variant)
        };
        let mut t = Trainer::new(&cfg).unwrap();
        let (a0, c0) = (t.actor().params.clone(), t.critic().params.clone());
        for _ in 0..5 {
            t.step().unwrap();
        }
        assert_eq!(t.actor().params, a0);
        assert_eq!(t.critic().params, c0);
    }
}

#[test]
fn training_is_reproducible() {
    for variant in [ActorVariant::MoeTransformerDiffusion, ActorVariant::Gaussian] {
        let cfg = tiny_config(variant);
        let a = train(&cfg).unwrap();
        let b = train(&cfg).unwrap();
        assert_eq!(a.metrics.to_csv(), b.metrics.to_csv());
        assert_eq!(a.actor.params, b.actor.params);
        let c = train(&TrainingConfig {
            master_seed: 1,
            ..cfg
        })
        .unwrap();
        assert_ne!(a.metrics.to_csv(), c.metrics.to_csv());
    }
}

#[test]
fn metrics_rows_are_complete() {
    let cfg = TrainingConfig {
        record_wall_clock: true,
        ..tiny_config(ActorVariant::MoeTransformerDiffusion)
    };
    let out = train(&cfg).unwrap();
    assert_eq!(out.metrics.len(), 6);
    for (i, r) in out.metrics.rows.iter().enumerate() {
        assert_eq!(r.epoch, i + 1);
        assert_eq!(r.eval_reward.is_some(), (i + 1) % 3 == 0);
        assert!(r.iter_seconds.unwrap() > 0.0);
        let f = r.expert_fractions();
        assert_eq!(f.len(), 4);
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let mlp = train(&tiny_config(ActorVariant::MlpDiffusion)).unwrap();
    assert!(mlp.metrics.rows.iter().all(|r| r.expert_fractions().is_empty()));
}

#[test]
fn exploding_updates_abort_with_diagnostic() {
    let cfg = TrainingConfig {
        learning_rate: 1e150,
        epochs: 40,
        ..tiny_config(ActorVariant::MlpDiffusion)
    };
    match train(&cfg) {
        Err(Error::Numerical { epoch, what }) => assert!(epoch >= 1 && !what.is_empty()),
        other => panic!("expected a numerical abort, got {:?}", other.map(|o| o.metrics.len())),
    }
}

#[test]
fn evaluation_examples() {
    let cfg = tiny_config(ActorVariant::MlpDiffusion);
    let t = Trainer::new(&cfg).unwrap();
    let one = evaluate(t.actor(), 1, &cfg, 3).unwrap();
    assert_eq!(one.summary.variance, 0.0);
    let zero = evaluate_policy(Policy::ZeroBeamformer, 8, &cfg, 3).unwrap();
    assert!(zero.rewards.iter().all(|&r| r == 0.0));
    let a = evaluate(t.actor(), 5, &cfg, 9).unwrap();
    let b = evaluate(t.actor(), 5, &cfg, 9).unwrap();
    assert_eq!(a, b);
    let s = a.summary;
    assert!(s.variance >= 0.0 && s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
    assert!(evaluate(t.actor(), 0, &cfg, 9).is_err());
}

#[test]
fn robust_evaluation_never_beats_stochastic() {
    let cfg = tiny_config(ActorVariant::Gaussian);
    let out = train(&cfg).unwrap();
    let with = |p: Paradigm| TrainingConfig {
        paradigm: ParadigmConfig {
            paradigm: p,
            ..cfg.paradigm
        },
        ..cfg.clone()
    };
    let st = evaluate(&out.actor, 6, &with(Paradigm::Stochastic), 4).unwrap();
    let ro = evaluate(&out.actor, 6, &with(Paradigm::Robust), 4).unwrap();
    for (r, s) in ro.rewards.iter().zip(&st.rewards) {
        assert!(r <= s);
    }
}

#[test]
fn critic_regression_descends_on_fixed_data() {
    let cfg = TrainingConfig {
        network: NetworkShape {
            critic_hidden: 16,
            ..NetworkShape::default()
        },
        ..TrainingConfig::default()
    };
    let trials = 20;
    let mut monotone = 0;
    for seed in 0..trials {
        let mut r = rng_from(seed);
        let mut buf = ReplayBuffer::new(64).unwrap();
        for _ in 0..32 {
            buf.push(Transition {
                state: normal_vec(&mut r, 387),
                action: normal_vec::<f64>(&mut r, 64).into_iter().map(f64::tanh).collect(),
                reward: normal_vec::<f64>(&mut r, 1)[0] + 1.0,
            })
            .unwrap();
        }
        let batch = buf.gather(&(0..32).collect::<Vec<_>>());
        let mut critic = CriticParameters::init(&cfg.critic_config(), seed + 100).unwrap();
        let mut opt = Adam::new(1e-4, &critic.params);
        let losses: Vec<f64> = (0..100)
            .map(|_| critic_update(&mut critic, &mut opt, &batch, false).unwrap())
            .collect();
        if losses.windows(2).all(|w| w[1] <= w[0]) {
            monotone += 1;
        }
    }
    assert!(monotone * 10 >= trials * 9, "{monotone} of {trials}");
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let critic = CriticParameters::<f64>::init(&TrainingConfig::default().critic_config(), 0).unwrap();
    let mut params = critic.params.clone();
    let grads: Vec<Vec<f64>> = params
        .tensors()
        .iter()
        .map(|t| (0..t.data.len()).map(|k| (k as f64 - 3.5) * 0.01).collect())
        .collect();
    let mut opt = Adam::new(1e-3, &params);
    opt.step(&mut params, &grads).unwrap();
    for ((after, before), g) in params.tensors().iter().zip(critic.params.tensors()).zip(&grads) {
        for ((a, b), g) in after.data.iter().zip(&before.data).zip(g) {
            let want = b - 1e-3 * g / (g.abs() + 1e-8);
            assert!((a - want).abs() < 1e-15);
        }
    }
    let mut grads = vec![vec![3.0, 4.0]];
    assert_eq!(clip_grad_norm(&mut grads, 1.0), 5.0);
    assert!((grad_norm(&grads) - 1.0).abs() < 1e-15);
}

proptest! {
    #[test]
    fn replay_is_bounded_fifo(capacity in 1usize..20, pushes in 0usize..60) {
        let mut buf = ReplayBuffer::new(capacity).unwrap();
        for i in 0..pushes {
            buf.push(Transition { state: vec![i as f64], action: vec![0.0], reward: i as f64 }).unwrap();
            prop_assert!(buf.len() <= capacity);
        }
        let kept = pushes.min(capacity);
        prop_assert_eq!(buf.len(), kept);
        for k in 0..kept {
            prop_assert_eq!(buf.get(k).unwrap().reward, (pushes - kept + k) as f64);
        }
    }
}

#[test]
fn replay_rejects_non_finite() {
    let mut buf = ReplayBuffer::new(2).unwrap();
    let t = Transition {
        state: vec![f64::NAN],
        action: vec![0.0],
        reward: 0.0,
    };
    assert!(buf.push(t).is_err());
    assert!(ReplayBuffer::new(0).is_err());
    assert!(buf.sample(1, &mut rng_from(0)).is_err());
}

#[test]
fn latency_needs_ten_iterations() {
    let cfg = tiny_config(ActorVariant::MlpDiffusion);
    assert!(measure_latency(&cfg, 9).is_err());
    let r = measure_latency(&cfg, 10).unwrap();
    assert_eq!(r.samples.len(), 10);
    assert!(r.mean_seconds > 0.0 && r.std_seconds >= 0.0);
}

#[test]
fn comparison_table_shape_and_identity() {
    let cfg = TrainingConfig {
        epochs: 3,
        ..tiny_config(ActorVariant::MlpDiffusion)
    };
    let a = CompareEntry::new(cfg.clone());
    let b = CompareEntry {
        label: "copy".into(),
        config: cfg.clone(),
    };
    let cmp = compare(&[a.clone(), b], &[1, 2, 3]).unwrap();
    assert_eq!(cmp.rows.iter().filter(|r| r.kind == RowKind::Run).count(), 6);
    assert_eq!(cmp.rows.iter().filter(|r| r.kind == RowKind::Aggregate).count(), 2);
    let copy = cmp.aggregate("copy").unwrap();
    assert_eq!(copy.relative_improvement, Some(0.0));
    assert_eq!((copy.wins, copy.losses), (Some(0), Some(0)));
    let csv = cmp.to_csv();
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.starts_with("kind,label,variant,seed,final_eval_reward"));

    assert!(compare(&[a.clone()], &[1]).is_err());
    assert!(compare(&[a.clone(), a.clone()], &[1, 1]).is_err());
    let robust = CompareEntry::new(TrainingConfig {
        paradigm: ParadigmConfig::new(Paradigm::Robust),
        ..cfg
    });
    let err = compare(&[a, robust], &[1]).unwrap_err();
    assert!(err.to_string().contains("paradigm"));
}

#[test]
fn metrics_csv_round_trip_and_errors() {
    let out = train(&tiny_config(ActorVariant::MoeTransformerDiffusion)).unwrap();
    let text = out.metrics.to_csv();
    assert_eq!(text.lines().next().unwrap(), METRICS_HEADER);
    assert_eq!(MetricsLog::from_csv(&text).unwrap(), out.metrics);
    let mut lines: Vec<&str> = text.lines().collect();
    lines[3] = "3,abc,0,0,,,,,,";
    let err = MetricsLog::from_csv(&lines.join("\n")).unwrap_err();
    assert!(err.to_string().contains("line 4"), "{err}");
    assert!(MetricsLog::from_csv("epoch,reward\n1,2\n").unwrap_err().to_string().contains("line 1"));
    assert_eq!(MetricsLog::default().to_csv().trim(), METRICS_HEADER);
    let s = out.metrics.summary(REWARD_WINDOW);
    assert_eq!(s.epochs, 6);
    assert_eq!(s.last_eval_reward, out.metrics.rows[5].eval_reward);
}

#[test]
fn quantiles_interpolate_linearly() {
    let s = [1.0, 2.0, 3.0, 4.0];
    let sum = Summary::of(&s);
    assert_eq!((sum.q1, sum.median, sum.q3), (1.5, 2.5, 3.5));
    assert_eq!(quantile(&s, 0.0), 1.0);
    assert_eq!(quantile(&s, 1.0), 4.0);
    assert_eq!(quantile(&[1.0, 2.0, 3.0], 0.5), 2.0);
    assert_eq!(quantile(&[7.0], 0.25), 7.0);
    assert_eq!((sum.min, sum.max, sum.mean), (1.0, 4.0, 2.5));
    assert_eq!(sum.variance, 1.25);
}
