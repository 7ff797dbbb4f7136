use proptest::prelude::*;
use rand::Rng as _;

use super::params::Builder;
use super::*;
use crate::gradcore::{Graph, NodeRef};
use crate::rng::{normal_vec, rng_from};

const STATE_DIM: usize = 12;

fn linear_apply(set: &ParamSet<f64>, name: &str, x: &[f64]) -> Vec<f64> {
    let w = set.get(&format!("{name}.weight")).unwrap();
    let b = set.get(&format!("{name}.bias")).unwrap();
    let (out, inp) = (w.shape[0], w.shape[1]);
    (0..out)
        .map(|o| b.data[o] + (0..inp).map(|i| w.data[o * inp + i] * x[i]).sum::<f64>())
        .collect()
}

fn attention_fixture(seed: u64) -> (MultiHeadAttention, ParamSet<f64>) {
    let mut b = Builder::<f64>::new(Some(seed));
    let att = MultiHeadAttention::new(&mut b, "att", 16, 4).unwrap();
    let mut set = b.finish();
    // nonzero biases so they are exercised
    let mut r = rng_from(seed ^ 0xb1a5);
    for t in set.tensors_mut() {
        if t.name.ends_with("bias") {
            t.data = normal_vec(&mut r, t.data.len());
        }
    }
    (att, set)
}

fn run_attention(att: &MultiHeadAttention, set: &ParamSet<f64>, tokens: &[f64], len: usize) -> (Vec<f64>, Vec<f64>) {
    let mut g = Graph::new();
    let p = set.bind(&mut g, false).unwrap();
    let x = g.constant(tokens.to_vec(), &[len, 16]).unwrap();
    let out = att.forward(&mut g, &p, x, 1, len).unwrap();
    (g.value(out.output).unwrap().to_vec(), g.value(out.weights).unwrap().to_vec())
}

/// Straight loops over heads, queries and keys.
fn attention_oracle(set: &ParamSet<f64>, tokens: &[f64], len: usize) -> Vec<f64> {
    let (d, heads) = (16, 4);
    let dh = d / heads;
    let proj = |name: &str| -> Vec<Vec<f64>> {
        (0..len)
            .map(|l| linear_apply(set, &format!("att.{name}"), &tokens[l * d..(l + 1) * d]))
            .collect()
    };
    let (q, k, v) = (proj("query"), proj("key"), proj("value"));
    let mut concat = vec![vec![0.0; d]; len];
    for h in 0..heads {
        for i in 0..len {
            let mut scores = Vec::new();
            for j in 0..len {
                let mut s = 0.0;
                for c in 0..dh {
                    s += q[i][h * dh + c] * k[j][h * dh + c];
                }
                scores.push(s / (dh as f64).sqrt());
            }
            let m = scores.iter().cloned().fold(f64::MIN, f64::max);
            let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
            let z: f64 = e.iter().sum();
            for c in 0..dh {
                concat[i][h * dh + c] = (0..len).map(|j| e[j] / z * v[j][h * dh + c]).sum();
            }
        }
    }
    concat
        .iter()
        .flat_map(|row| linear_apply(set, "att.output", row))
        .collect()
}

#[test]
fn attention_single_token_is_value_then_output_projection() {
    let (att, set) = attention_fixture(1);
    let x: Vec<f64> = normal_vec(&mut rng_from(2), 16);
    let (out, weights) = run_attention(&att, &set, &x, 1);
    assert_eq!(weights, vec![1.0; 4]);
    let want = linear_apply(&set, "att.output", &linear_apply(&set, "att.value", &x));
    for (a, b) in out.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn attention_matches_loop_oracle() {
    for seed in 0..10 {
        let (att, set) = attention_fixture(seed);
        let x: Vec<f64> = normal_vec(&mut rng_from(seed + 100), 48);
        let (out, _) = run_attention(&att, &set, &x, 3);
        let want = attention_oracle(&set, &x, 3);
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn attention_is_permutation_equivariant() {
    let (att, set) = attention_fixture(3);
    let x: Vec<f64> = normal_vec(&mut rng_from(4), 48);
    let perm = [2, 0, 1];
    let px: Vec<f64> = perm.iter().flat_map(|&l| x[l * 16..(l + 1) * 16].to_vec()).collect();
    let (out, _) = run_attention(&att, &set, &x, 3);
    let (pout, _) = run_attention(&att, &set, &px, 3);
    for (i, &l) in perm.iter().enumerate() {
        for c in 0..16 {
            assert!((pout[i * 16 + c] - out[l * 16 + c]).abs() < 1e-12);
        }
    }
}

#[test]
fn attention_rejects_bad_shapes() {
    let (att, set) = attention_fixture(0);
    let mut g = Graph::new();
    let p = set.bind(&mut g, false).unwrap();
    let x = g.constant(vec![0.0; 30], &[3, 10]).unwrap();
    assert!(att.forward(&mut g, &p, x, 1, 3).is_err());
    let mut b = Builder::<f64>::new(Some(0));
    assert!(MultiHeadAttention::new(&mut b, "bad", 10, 4).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn attention_rows_are_distributions(seed in 0u64..1000, len in 1usize..6, scale in 0.1f64..20.0) {
        let (att, set) = attention_fixture(seed);
        let x: Vec<f64> = normal_vec::<f64>(&mut rng_from(seed + 1), 16 * len).into_iter().map(|v| v * scale).collect();
        let (_, w) = run_attention(&att, &set, &x, len);
        for row in w.chunks(len) {
            prop_assert!(row.iter().all(|&p| p >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

fn moe_fixture(seed: u64, top_k: usize) -> (MoELayer, ParamSet<f64>) {
    let mut b = Builder::<f64>::new(Some(seed));
    let moe = MoELayer::new(&mut b, "moe", 8, 16, 4, top_k).unwrap();
    let mut set = b.finish();
    let mut r = rng_from(seed ^ 0x5eed);
    for t in set.tensors_mut() {
        if t.name.ends_with("bias") {
            t.data = normal_vec(&mut r, t.data.len());
        }
    }
    (moe, set)
}

fn forced_gate(scores: [f64; 4]) -> (MoELayer, ParamSet<f64>) {
    let (moe, mut set) = moe_fixture(0, 2);
    set.get_mut("moe.gate.weight").unwrap().data.fill(0.0);
    set.get_mut("moe.gate.bias").unwrap().data = scores.to_vec();
    (moe, set)
}

fn run_moe(moe: &MoELayer, set: &ParamSet<f64>, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<Vec<usize>>, GateReport) {
    let mut g = Graph::new();
    let p = set.bind(&mut g, false).unwrap();
    let tokens = x.len() / 8;
    let xn = g.constant(x.to_vec(), &[tokens, 8]).unwrap();
    let out = moe.forward(&mut g, &p, xn).unwrap();
    (
        g.value(out.output).unwrap().to_vec(),
        g.value(out.weights).unwrap().to_vec(),
        out.selected,
        out.report,
    )
}

#[test]
fn moe_gate_examples() {
    let x = normal_vec(&mut rng_from(1), 8);
    let (moe, set) = forced_gate([2.0, 1.0, 0.0, -1.0]);
    let (_, w, sel, _) = run_moe(&moe, &set, &x);
    assert_eq!(sel, vec![vec![0, 1]]);
    let e = (1.0f64).exp();
    assert!((w[0] - e / (e + 1.0)).abs() < 1e-15);
    assert!((w[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
    assert!((w[0] - 0.7311).abs() < 1e-4 && (w[1] - 0.2689).abs() < 1e-4);

    let (moe, set) = forced_gate([0.3; 4]);
    let (_, w, sel, _) = run_moe(&moe, &set, &x);
    assert_eq!(sel, vec![vec![0, 1]]);
    assert_eq!(w, vec![0.5, 0.5]);

    let (moe, set) = forced_gate([-1.0, 0.5, 3.0, 0.5]);
    let (_, _, sel, _) = run_moe(&moe, &set, &x);
    assert_eq!(sel, vec![vec![2, 1]]);
}

#[test]
fn moe_output_mixes_selected_experts() {
    let (moe, set) = moe_fixture(5, 2);
    let x = normal_vec(&mut rng_from(6), 8 * 5);
    let (out, w, sel, report) = run_moe(&moe, &set, &x);
    for t in 0..5 {
        let mut g = Graph::new();
        let p = set.bind(&mut g, false).unwrap();
        let xt = g.constant(x[t * 8..(t + 1) * 8].to_vec(), &[1, 8]).unwrap();
        let mut want = vec![0.0; 8];
        for (slot, &e) in sel[t].iter().enumerate() {
            let y = moe.expert_forward(&mut g, &p, e, xt).unwrap();
            for (acc, v) in want.iter_mut().zip(g.value(y).unwrap()) {
                *acc += w[t * 2 + slot] * v;
            }
        }
        for c in 0..8 {
            assert!((out[t * 8 + c] - want[c]).abs() < 1e-12);
        }
    }
    assert_eq!(report.counts.iter().sum::<usize>(), 10);
    assert!((report.fractions().iter().sum::<f64>() - 1.0).abs() < 1e-15);
}

#[test]
fn moe_all_experts_matches_dense_mixture() {
    for seed in 0..10 {
        let (mut moe, set) = moe_fixture(seed, 2);
        moe.set_top_k(4).unwrap();
        let x = normal_vec(&mut rng_from(seed + 40), 8 * 3);
        let (out, _, _, _) = run_moe(&moe, &set, &x);
        for t in 0..3 {
            let token = &x[t * 8..(t + 1) * 8];
            let scores = linear_apply(&set, "moe.gate", token);
            let m = scores.iter().cloned().fold(f64::MIN, f64::max);
            let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
            let mut want = vec![0.0; 8];
            for (e, s) in scores.iter().enumerate() {
                let h: Vec<f64> = linear_apply(&set, &format!("moe.expert{e}.0"), token)
                    .into_iter()
                    .map(|v| v / (1.0 + (-v).exp()))
                    .collect();
                let y = linear_apply(&set, &format!("moe.expert{e}.1"), &h);
                for c in 0..8 {
                    want[c] += (s - m).exp() / z * y[c];
                }
            }
            for c in 0..8 {
                assert!((out[t * 8 + c] - want[c]).abs() < 1e-10);
            }
        }
    }
    let (mut moe, _) = moe_fixture(0, 2);
    assert!(moe.set_top_k(5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn moe_routes_each_token_to_exactly_two(seed in 0u64..1000, tokens in 1usize..12) {
        let (moe, set) = moe_fixture(seed, 2);
        let x = normal_vec(&mut rng_from(seed + 9), 8 * tokens);
        let (_, w, sel, report) = run_moe(&moe, &set, &x);
        for (t, s) in sel.iter().enumerate() {
            prop_assert_eq!(s.len(), 2);
            prop_assert!(s[0] != s[1]);
            prop_assert!((w[2 * t] + w[2 * t + 1] - 1.0).abs() < 1e-12);
        }
        prop_assert_eq!(report.counts.iter().sum::<usize>(), 2 * tokens);
    }
}

#[test]
fn top_k_breaks_ties_by_index() {
    assert_eq!(top_k_indices(&[1.0, 3.0, 3.0, 0.0], 2), vec![1, 2]);
    assert_eq!(top_k_indices(&[0.0f64; 4], 2), vec![0, 1]);
    assert_eq!(top_k_indices(&[0.0, 1.0, 2.0, 3.0], 1), vec![3]);
}

fn tiny(variant: ActorVariant, seed: u64) -> ActorParameters<f64> {
    let mut actor = ActorParameters::init(&ActorConfig::tiny(variant, STATE_DIM), seed).unwrap();
    let mut r = rng_from(seed ^ 0xface);
    for t in actor.params.tensors_mut() {
        if t.name.ends_with("bias") {
            t.data = normal_vec::<f64>(&mut r, t.data.len()).into_iter().map(|v| 0.1 * v).collect();
        }
    }
    actor
}

fn actor_inputs(batch: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng_from(seed);
    (normal_vec(&mut r, batch * STATE_DIM), normal_vec(&mut r, batch * 64))
}

fn actor_sum(actor: &ActorParameters<f64>, s: &[f64], a: &[f64], step: usize, trainable: bool) -> (Graph<f64>, super::Bound, NodeRef) {
    let batch = s.len() / STATE_DIM;
    let mut g = Graph::new();
    let p = actor.bind(&mut g, trainable).unwrap();
    let sn = g.constant(s.to_vec(), &[batch, STATE_DIM]).unwrap();
    let an = g.constant(a.to_vec(), &[batch, 64]).unwrap();
    let out = actor.forward(&mut g, &p, sn, Some(an), step).unwrap();
    let total = g.sum(out.output).unwrap();
    (g, p, total)
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Central differences over every coordinate of every tensor.
fn check_all_coordinates(
    params: &ParamSet<f64>,
    analytic: &[Vec<f64>],
    mut eval: impl FnMut(&ParamSet<f64>) -> f64,
) -> f64 {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for (ti, grad) in analytic.iter().enumerate() {
        for k in 0..grad.len() {
            let orig = probe.tensors()[ti].data[k];
            probe.tensors_mut()[ti].data[k] = orig + h;
            let up = eval(&probe);
            probe.tensors_mut()[ti].data[k] = orig - h;
            let down = eval(&probe);
            probe.tensors_mut()[ti].data[k] = orig;
            let e = rel_err(grad[k], (up - down) / (2.0 * h));
            assert!(e < 1e-3, "{} [{k}]: analytic {} fd {}", params.tensors()[ti].name, grad[k], (up - down) / (2.0 * h));
            worst = worst.max(e);
        }
    }
    worst
}

#[test]
fn actor_output_gradients_match_finite_differences() {
    for variant in ActorVariant::ALL {
        for seed in 0..2 {
            let actor = tiny(variant, seed);
            let (s, a) = actor_inputs(2, seed + 7);
            let (mut g, p, total) = actor_sum(&actor, &s, &a, 3, true);
            g.backward(total).unwrap();
            let analytic = actor.params.gradients(&g, &p).unwrap();
            let mut probe = actor.clone();
            check_all_coordinates(&actor.params, &analytic, |set| {
                probe.params = set.clone();
                let (g, _, t) = actor_sum(&probe, &s, &a, 3, false);
                g.item(t).unwrap()
            });
        }
    }
}

#[test]
fn critic_gradients_match_finite_differences() {
    let cfg = CriticConfig {
        state_dim: STATE_DIM,
        action_dim: 64,
        hidden: 8,
    };
    let critic = CriticParameters::<f64>::init(&cfg, 3).unwrap();
    let (s, a) = actor_inputs(3, 11);
    let eval = |c: &CriticParameters<f64>, trainable: bool| {
        let mut g = Graph::new();
        let p = c.bind(&mut g, trainable).unwrap();
        let sn = g.constant(s.clone(), &[3, STATE_DIM]).unwrap();
        let an = g.constant(a.clone(), &[3, 64]).unwrap();
        let (q1, q2) = c.forward(&mut g, &p, sn, an).unwrap();
        let q = g.sub(q1, q2).unwrap();
        let q = g.square(q).unwrap();
        let both = g.add(q, q1).unwrap();
        let total = g.sum(both).unwrap();
        (g, p, total)
    };
    let (mut g, p, total) = eval(&critic, true);
    g.backward(total).unwrap();
    let analytic = critic.params.gradients(&g, &p).unwrap();
    let mut probe = critic.clone();
    check_all_coordinates(&critic.params, &analytic, |set| {
        probe.params = set.clone();
        let (g, _, t) = eval(&probe, false);
        g.item(t).unwrap()
    });
}

#[test]
fn zero_head_gives_zero_output() {
    for variant in ActorVariant::ALL {
        let mut actor = tiny(variant, 1);
        actor.zero_output_head();
        let (s, a) = actor_inputs(3, 2);
        for step in [0, 5] {
            let mut g = Graph::new();
            let p = actor.bind(&mut g, false).unwrap();
            let sn = g.constant(s.clone(), &[3, STATE_DIM]).unwrap();
            let an = g.constant(a.clone(), &[3, 64]).unwrap();
            let out = actor.forward(&mut g, &p, sn, Some(an), step).unwrap();
            let values = g.value(out.output).unwrap();
            if variant == ActorVariant::Gaussian {
                assert!(values.iter().all(|&v| v == 0.0));
            } else {
                assert_eq!(values, vec![0.0; 3 * 64].as_slice(), "{variant}");
            }
        }
    }
}

#[test]
fn forward_is_deterministic_and_checks_step() {
    for variant in ActorVariant::ALL {
        let actor = tiny(variant, 4);
        let (s, a) = actor_inputs(2, 5);
        let (g1, _, t1) = actor_sum(&actor, &s, &a, 2, false);
        let (g2, _, t2) = actor_sum(&actor, &s, &a, 2, false);
        assert_eq!(g1.item(t1).unwrap().to_bits(), g2.item(t2).unwrap().to_bits());
        let mut g = Graph::new();
        let p = actor.bind(&mut g, false).unwrap();
        let sn = g.constant(s.clone(), &[2, STATE_DIM]).unwrap();
        let an = g.constant(a.clone(), &[2, 64]).unwrap();
        let r = actor.forward(&mut g, &p, sn, Some(an), 6);
        if variant.is_diffusion() {
            assert!(matches!(r, Err(crate::Error::StepIndex { index: 6, steps: 6 })));
        } else {
            assert!(r.is_ok());
        }
    }
}

#[test]
fn gaussian_log_std_is_clamped() {
    let mut actor = tiny(ActorVariant::Gaussian, 0);
    let bias = actor.params.get_mut("trunk.2.bias").unwrap();
    for (k, b) in bias.data.iter_mut().enumerate() {
        if k >= 64 {
            *b = if k % 2 == 0 { 50.0 } else { -50.0 };
        }
    }
    let (s, _) = actor_inputs(2, 1);
    let mut g = Graph::new();
    let p = actor.bind(&mut g, false).unwrap();
    let sn = g.constant(s, &[2, STATE_DIM]).unwrap();
    let out = actor.forward(&mut g, &p, sn, None, 0).unwrap();
    let v = g.value(out.output).unwrap();
    for row in v.chunks(128) {
        for (k, &x) in row[64..].iter().enumerate() {
            assert_eq!(x, if k % 2 == 0 { LOG_STD_MAX } else { LOG_STD_MIN });
        }
    }
}

#[test]
fn moe_actor_reports_two_experts_per_token() {
    let actor = tiny(ActorVariant::MoeTransformerDiffusion, 2);
    let (s, a) = actor_inputs(5, 3);
    let mut g = Graph::new();
    let p = actor.bind(&mut g, false).unwrap();
    let sn = g.constant(s, &[5, STATE_DIM]).unwrap();
    let an = g.constant(a, &[5, 64]).unwrap();
    let out = actor.forward(&mut g, &p, sn, Some(an), 1).unwrap();
    let report = out.report.unwrap();
    // 5 sequences x 3 tokens x 2 blocks x top-2
    assert_eq!(report.assignments, 60);
    assert_eq!(report.counts.iter().sum::<usize>(), 60);
    assert!((report.fractions().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(g.item(out.balance.unwrap()).unwrap() >= 0.0);
}

#[test]
fn init_is_seeded_and_scaled() {
    let cfg = ActorConfig::full_size(ActorVariant::MlpDiffusion);
    let a = ActorParameters::<f64>::init(&cfg, 9).unwrap();
    let b = ActorParameters::<f64>::init(&cfg, 9).unwrap();
    let c = ActorParameters::<f64>::init(&cfg, 10).unwrap();
    assert_eq!(a.params, b.params);
    assert_ne!(a.params, c.params);

    let w = a.params.get("trunk.1.weight").unwrap();
    assert_eq!(w.shape, vec![256, 256]);
    let n = w.data.len() as f64;
    let mean = w.data.iter().sum::<f64>() / n;
    let std = (w.data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    // uniform on +-sqrt(6/512) has std sqrt(6/512)/sqrt(3)
    let theory = (6.0f64 / 512.0).sqrt() / 3f64.sqrt();
    assert!((std / theory - 1.0).abs() < 0.1, "{std} vs {theory}");
    assert!(a.params.get("trunk.1.bias").unwrap().data.iter().all(|&x| x == 0.0));
}

fn linear_count(i: usize, o: usize) -> usize {
    i * o + o
}

#[test]
fn parameter_counts_match_architecture() {
    let (s, a, d, f, h) = (387, 64, 256, 512, 256);
    let embed = linear_count(s, d) + linear_count(d, d) + linear_count(a, d);
    let attention = 4 * linear_count(d, d);
    let dense_ffn = linear_count(d, f) + linear_count(f, d);
    let moe = linear_count(d, 4) + 4 * dense_ffn;
    let ln = 2 * d;
    let tail = ln + linear_count(d, a);
    let expected = [
        (ActorVariant::MlpDiffusion, embed + linear_count(3 * d, h) + linear_count(h, h) + linear_count(h, a)),
        (ActorVariant::TransformerDiffusion, embed + 3 * d + 2 * (2 * ln + attention + dense_ffn) + tail),
        (ActorVariant::MoeTransformerDiffusion, embed + 3 * d + 2 * (2 * ln + attention + moe) + tail),
        (ActorVariant::Gaussian, linear_count(s, h) + linear_count(h, h) + linear_count(h, 2 * a)),
    ];
    for (variant, want) in expected {
        let actor = ActorParameters::<f64>::init(&ActorConfig::full_size(variant), 0).unwrap();
        assert_eq!(actor.param_count(), want, "{variant}");
    }
    // logged constants
    assert_eq!(expected[0].1, 460_864);
    assert_eq!(expected[1].1, 1_253_696);
    assert_eq!(expected[2].1, 2_833_224);
    assert_eq!(expected[3].1, 198_016);
    let critic = CriticParameters::<f64>::init(&CriticConfig::default(), 0).unwrap();
    assert_eq!(critic.param_count(), 2 * (linear_count(s + a, h) + linear_count(h, h) + linear_count(h, 1)));
}

#[test]
fn binary_round_trip_is_bit_exact() {
    for variant in ActorVariant::ALL {
        let actor = tiny(variant, 6);
        let mut buf = Vec::new();
        actor.write_to(&mut buf).unwrap();
        let back = ActorParameters::<f64>::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.config(), actor.config());
        for (x, y) in back.params.tensors().iter().zip(actor.params.tensors()) {
            assert_eq!(x.name, y.name);
            assert!(x.data.iter().zip(&y.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        let mut bad = buf.clone();
        bad[0] ^= 1;
        assert!(ActorParameters::<f64>::read_from(&mut bad.as_slice()).is_err());
        assert!(ActorParameters::<f64>::read_from(&mut &buf[..buf.len() - 3]).is_err());
        assert!(CriticParameters::<f64>::read_from(&mut buf.as_slice()).is_err());
    }
    let critic = CriticParameters::<f64>::init(&CriticConfig::default(), 1).unwrap();
    let mut buf = Vec::new();
    critic.write_to(&mut buf).unwrap();
    let back = CriticParameters::<f64>::read_from(&mut buf.as_slice()).unwrap();
    assert_eq!(back.params, critic.params);
}

#[test]
fn critic_heads_are_independent() {
    let mut critic = CriticParameters::<f64>::init(&CriticConfig::default(), 2).unwrap();
    let mut r = rng_from(3);
    let (s, a): (Vec<f64>, Vec<f64>) = (normal_vec(&mut r, 387), (0..64).map(|_| r.random_range(-1.0..1.0)).collect());
    let eval = |c: &CriticParameters<f64>| {
        let mut g = Graph::new();
        let p = c.bind(&mut g, false).unwrap();
        let sn = g.constant(s.clone(), &[1, 387]).unwrap();
        let an = g.constant(a.clone(), &[1, 64]).unwrap();
        let (q1, q2) = c.forward(&mut g, &p, sn, an).unwrap();
        (g.item(q1).unwrap(), g.item(q2).unwrap())
    };
    let (q1, q2) = eval(&critic);
    assert_ne!(q1, q2);
    critic.zero_final_layers();
    assert_eq!(eval(&critic), (0.0, 0.0));
}

#[test]
fn step_encoding_values() {
    let e = step_encoding(0, 6);
    assert_eq!(e, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    let e = step_encoding(2, 4);
    assert!((e[0] - 2f64.sin()).abs() < 1e-15);
    assert!((e[3] - (2.0 * 10000f64.powf(-0.5)).cos()).abs() < 1e-15);
}

#[test]
fn f32_actor_runs() {
    let actor = ActorParameters::<f32>::init(&ActorConfig::tiny(ActorVariant::MoeTransformerDiffusion, 4), 0).unwrap();
    let mut g = Graph::<f32>::new();
    let p = actor.bind(&mut g, true).unwrap();
    let s = g.constant(vec![0.5; 8], &[2, 4]).unwrap();
    let a = g.constant(vec![0.1; 128], &[2, 64]).unwrap();
    let out = actor.forward(&mut g, &p, s, Some(a), 0).unwrap();
    let t = g.sum(out.output).unwrap();
    g.backward(t).unwrap();
    assert!(actor.params.gradients(&g, &p).unwrap().iter().flatten().all(|x| x.is_finite()));
}
