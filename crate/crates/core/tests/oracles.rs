//! Cross-checks of the optimized code paths against naive references.

use hindsight_core::baseline::{random_act, EpsGreedyAgent, GreedyAgent};
use hindsight_core::features::{
    grad_log_likelihood, log_likelihood, AdamConfig, FeatureParams, History,
};
use hindsight_core::linalg::{elliptic_norm, Mat};
use hindsight_core::lowerbound::{LowerBoundWorld, A, B};
use hindsight_core::reference;
use hindsight_core::rng::Stream;
use hindsight_core::{
    instant_regret, run_protocol, Context, Environment, Instruction, LorilAgent, LorilConfig,
    LowRankTeacher, RandomAgent, Response, ResponseEmbeddings,
};
use nalgebra::DMatrix;

const S0: Context = Context(0);

fn random_simplex(rng: &mut Stream, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.uniform() + 1e-3).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn random_embeddings(rng: &mut Stream, d: usize, y_size: usize) -> ResponseEmbeddings {
    let data = (0..y_size).flat_map(|_| random_simplex(rng, d)).collect();
    ResponseEmbeddings::new(d, y_size, 1, data)
}

fn random_theta(rng: &mut Stream, n: usize) -> Vec<f64> {
    (0..n).map(|_| 2.0 * rng.normal()).collect()
}

/// Frequencies of `draws` over `probs.len()` cells are within 3 standard errors.
fn assert_frequencies(counts: &[usize], probs: &[f64], n: usize) {
    for (c, p) in counts.iter().zip(probs) {
        let freq = *c as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() <= 3.0 * se + 1e-12, "freq {freq} vs p {p} (se {se})");
    }
}

#[test]
fn teacher_matches_independent_rederivation() {
    let t = LowRankTeacher::build(42, 4, 3, 2, 1.0).unwrap();
    let table = reference::teacher_table(42, 4, 3, 2, 1.0);
    for x in 0..4 {
        for y in 0..3 {
            let p = t.teacher_prob(Instruction(x), Response(y));
            assert!((p - table[x][y]).abs() <= 1e-12, "({x},{y}): {p} vs {}", table[x][y]);
        }
    }
    let big = LowRankTeacher::build(7, 50, 6, 4, 0.75).unwrap();
    let table = reference::teacher_table(7, 50, 6, 4, 0.75);
    for x in 0..50 {
        for y in 0..6 {
            assert!((big.teacher_prob(Instruction(x), Response(y)) - table[x][y]).abs() <= 1e-12);
        }
    }
}

#[test]
fn teacher_prob_matches_dense_product_and_g_star_matches_matrix() {
    let t = LowRankTeacher::build(3, 30, 7, 4, 0.75).unwrap();
    let f = DMatrix::from_row_slice(30, 4, t.f_matrix());
    let g = DMatrix::from_row_slice(4, 7, t.g_matrix());
    let fg = &f * &g;
    for x in 0..30 {
        for y in 0..7 {
            assert!((t.teacher_prob(Instruction(x), Response(y)) - fg[(x, y)]).abs() <= 1e-12);
        }
    }
    for y in 0..7 {
        let col: Vec<f64> = g.column(y).iter().copied().collect();
        assert_eq!(t.g_star(Response(y)), col.as_slice());
        assert!((col.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn hindsight_frequencies_match_teacher_column() {
    let t = LowRankTeacher::build(5, 8, 3, 2, 0.75).unwrap();
    let n = 100_000;
    let mut rng = Stream::new(99, 0);
    let mut counts = vec![0; 8];
    for _ in 0..n {
        counts[t.sample_hindsight(Response(1), &mut rng).0] += 1;
    }
    assert_frequencies(&counts, t.column(Response(1)), n);
}

#[test]
fn lower_bound_hindsight_frequencies() {
    let w = LowerBoundWorld::build(1, 4, 100).unwrap();
    let n = 100_000;
    let mut rng = Stream::new(5, 0);
    for y in [Response(1), Response(2)] {
        let mut counts = vec![0; 2];
        for _ in 0..n {
            counts[w.sample_hindsight(y, S0, &mut rng).0] += 1;
        }
        assert_frequencies(&counts, &[w.world_prob(A, y), w.world_prob(B, y)], n);
    }
}

#[test]
fn log_likelihood_matches_direct_sum() {
    let mut rng = Stream::new(17, 0);
    for _ in 0..10 {
        let (x_size, d, y_size) = (6, 3, 4);
        let g = random_embeddings(&mut rng, d, y_size);
        let theta = random_theta(&mut rng, x_size * d);
        let p = FeatureParams::from_theta(x_size, d, theta.clone()).unwrap();
        let mut h = History::new();
        let mut records = Vec::new();
        for _ in 0..20 {
            let (x, y) = (rng.index(x_size), rng.index(y_size));
            h.push(Instruction(x), Response(y), S0);
            records.push((x, g.get(Response(y), S0).to_vec()));
        }
        let fast = log_likelihood(&p, &h, &g);
        let naive = reference::log_likelihood(&theta, x_size, d, &records);
        assert!((fast - naive).abs() <= 1e-12, "{fast} vs {naive}");
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = Stream::new(23, 0);
    let (x_size, d, y_size) = (7, 3, 5);
    let g = random_embeddings(&mut rng, d, y_size);
    let theta = random_theta(&mut rng, x_size * d);
    let mut h = History::new();
    let mut records = Vec::new();
    for _ in 0..25 {
        let (x, y) = (rng.index(x_size), rng.index(y_size));
        h.push(Instruction(x), Response(y), S0);
        records.push((x, g.get(Response(y), S0).to_vec()));
    }
    let p = FeatureParams::from_theta(x_size, d, theta.clone()).unwrap();
    let analytic = grad_log_likelihood(&p, &h, &g);
    let numeric = reference::finite_difference_gradient(&theta, 1e-5, |th| {
        reference::log_likelihood(th, x_size, d, &records)
    });
    for (a, n) in analytic.iter().zip(&numeric) {
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
        assert!(rel <= 1e-4, "{a} vs {n}");
    }
}

#[test]
fn model_class_is_a_conditional_distribution() {
    let mut rng = Stream::new(31, 0);
    let (x_size, d, y_size) = (40, 5, 6);
    let g = random_embeddings(&mut rng, d, y_size);
    let p = FeatureParams::from_theta(x_size, d, random_theta(&mut rng, x_size * d)).unwrap();
    let table = p.features();
    for y in 0..y_size {
        let total: f64 = (0..x_size)
            .map(|x| hindsight_core::linalg::dot(table.row(Instruction(x)), g.get(Response(y), S0)))
            .sum();
        assert!((total - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn elliptic_norm_matches_triple_product() {
    let mut rng = Stream::new(41, 0);
    for _ in 0..20 {
        let d = 1 + rng.index(6);
        let b = DMatrix::from_fn(d, d, |_, _| rng.normal());
        let m = &b * b.transpose() + DMatrix::identity(d, d) * 0.1;
        let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let mut triple = 0.0;
        for i in 0..d {
            for j in 0..d {
                triple += v[i] * m[(i, j)] * v[j];
            }
        }
        let ours = elliptic_norm(&v, &Mat::from_row_major(d, m.transpose().as_slice().to_vec())).unwrap();
        assert!((ours - triple.sqrt()).abs() <= 1e-12 * triple.sqrt().max(1.0));
    }
}

#[test]
fn single_update_inverse_matches_closed_form() {
    let mut rng = Stream::new(43, 0);
    let e = random_embeddings(&mut rng, 4, 3);
    let lambda = 0.1;
    let mut agent = LorilAgent::new(5, e.clone(), LorilConfig { lambda, ..LorilConfig::default() }).unwrap();
    agent.record(S0, Response(2), Instruction(1)).unwrap();
    let expected = reference::rank_one_inverse(lambda, e.get(Response(2), S0));
    for i in 0..4 {
        for j in 0..4 {
            assert!((agent.sigma_inv().get(i, j) - expected[i][j]).abs() <= 1e-10);
        }
    }
}

#[test]
fn repeated_play_bonus_matches_rank_one_closed_form() {
    let mut rng = Stream::new(47, 0);
    let e = random_embeddings(&mut rng, 3, 4);
    let (lambda, k) = (0.05, 1.7);
    let mut agent =
        LorilAgent::new(4, e.clone(), LorilConfig { lambda, k, ..LorilConfig::default() }).unwrap();
    for m in 0..30 {
        let expected = reference::repeated_bonus(k, lambda, e.get(Response(1), S0), m);
        assert!((agent.bonus(Response(1), S0) - expected).abs() <= 1e-10, "m = {m}");
        agent.record(S0, Response(1), Instruction(m % 4)).unwrap();
    }
}

#[test]
fn sequential_updates_match_direct_inverse() {
    let mut rng = Stream::new(53, 0);
    let e = random_embeddings(&mut rng, 10, 12);
    let lambda = 0.05;
    let cfg = LorilConfig {
        lambda,
        adam: AdamConfig { steps_per_fit: 1, ..AdamConfig::default() },
        ..LorilConfig::default()
    };
    let mut agent = LorilAgent::new(2, e.clone(), cfg).unwrap();
    let mut direct = DMatrix::<f64>::identity(10, 10) * lambda;
    for _ in 0..1000 {
        let y = Response(rng.index(12));
        agent.record(S0, y, Instruction(rng.index(2))).unwrap();
        let g = nalgebra::DVector::from_column_slice(e.get(y, S0));
        direct += &g * g.transpose();
    }
    let inv = direct.clone().try_inverse().unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            worst = worst.max((agent.sigma_inv().get(i, j) - inv[(i, j)]).abs());
            assert!((agent.sigma().get(i, j) - direct[(i, j)]).abs() <= 1e-8);
        }
    }
    assert!(worst <= 1e-8, "max diff {worst}");
    let min_eig = direct.symmetric_eigen().eigenvalues.min();
    assert!(min_eig >= lambda - 1e-9);
}

#[test]
fn loril_act_matches_exhaustive_scoring() {
    let mut rng = Stream::new(59, 0);
    for _ in 0..25 {
        let (x_size, d, y_size) = (5, 3, 6);
        let e = random_embeddings(&mut rng, d, y_size);
        let (lambda, k) = (0.1, 0.5 + rng.uniform());
        let mut agent =
            LorilAgent::new(x_size, e.clone(), LorilConfig { lambda, k, ..LorilConfig::default() }).unwrap();
        let mut sigma = DMatrix::<f64>::identity(d, d) * lambda;
        for _ in 0..rng.index(8) {
            let y = Response(rng.index(y_size));
            agent.record(S0, y, Instruction(rng.index(x_size))).unwrap();
            let g = nalgebra::DVector::from_column_slice(e.get(y, S0));
            sigma += &g * g.transpose();
        }
        let theta = random_theta(&mut rng, x_size * d);
        agent.set_params(FeatureParams::from_theta(x_size, d, theta.clone()).unwrap()).unwrap();
        let f = reference::softmax_features(&theta, x_size, d);
        let sigma_inv = sigma.try_inverse().unwrap();
        for x in 0..x_size {
            let scores: Vec<f64> = (0..y_size)
                .map(|y| {
                    let g = nalgebra::DVector::from_column_slice(e.get(Response(y), S0));
                    let value: f64 = (0..d).map(|i| f[x][i] * g[i]).sum();
                    value + k * (g.transpose() * &sigma_inv * &g)[(0, 0)].sqrt()
                })
                .collect();
            let ours = agent.choose(Instruction(x), S0);
            let best = reference::first_argmax(&scores);
            // Both routes agree unless the top two are numerically tied.
            assert!(ours.0 == best || (scores[ours.0] - scores[best]).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_bonus_loril_equals_greedy() {
    let mut rng = Stream::new(61, 0);
    for _ in 0..100 {
        let (x_size, d, y_size) = (6, 3, 5);
        let e = random_embeddings(&mut rng, d, y_size);
        let params = FeatureParams::from_theta(x_size, d, random_theta(&mut rng, x_size * d)).unwrap();
        let mut loril =
            LorilAgent::new(x_size, e.clone(), LorilConfig { k: 0.0, ..LorilConfig::default() }).unwrap();
        loril.set_params(params.clone()).unwrap();
        let mut greedy = GreedyAgent::new(x_size, e.clone(), AdamConfig::default()).unwrap();
        greedy.estimator_mut().set_params(params.clone()).unwrap();
        let x = Instruction(rng.index(x_size));
        assert_eq!(loril.choose(x, S0), greedy.greedy_act(x, S0));

        let table = reference::softmax_features(params.theta(), x_size, d);
        let scores: Vec<f64> = (0..y_size)
            .map(|y| (0..d).map(|i| table[x.0][i] * e.get(Response(y), S0)[i]).sum())
            .collect();
        let best = reference::first_argmax(&scores);
        let ours = greedy.greedy_act(x, S0).0;
        assert!(ours == best || (scores[ours] - scores[best]).abs() < 1e-12);
    }
}

#[test]
fn random_act_frequencies() {
    let n = 100_000;
    let mut rng = Stream::new(67, 1);
    let mut counts = vec![0; 10];
    for _ in 0..n {
        counts[random_act(10, &mut rng).0] += 1;
    }
    assert_frequencies(&counts, &[0.1; 10], n);
}

#[test]
fn eps_greedy_exploration_rate() {
    let y_size = 5;
    let e = ResponseEmbeddings::new(2, y_size, 1, vec![0.9, 0.1, 0.5, 0.5, 0.4, 0.6, 0.3, 0.7, 0.2, 0.8]);
    let mut agent = EpsGreedyAgent::new(3, e, AdamConfig::default(), 0.2).unwrap();
    agent
        .estimator_mut()
        .set_params(FeatureParams::from_theta(3, 2, vec![3.0, -1.0, 0.0, 0.0, -1.0, 2.0]).unwrap())
        .unwrap();
    let x = Instruction(0);
    let greedy = agent.estimator().greedy(x, S0);
    let n = 100_000;
    let mut rng = Stream::new(71, 1);
    let off = (0..n).filter(|_| agent.eps_greedy_act(x, S0, &mut rng) != greedy).count();
    let p = 0.2 * (1.0 - 1.0 / y_size as f64);
    assert_frequencies(&[off], &[p], n);

    let always = EpsGreedyAgent::new(3, ResponseEmbeddings::new(1, 4, 1, vec![1.0; 4]), AdamConfig::default(), 1.0).unwrap();
    let mut counts = vec![0; 4];
    for _ in 0..n {
        counts[always.eps_greedy_act(x, S0, &mut rng).0] += 1;
    }
    assert_frequencies(&counts, &[0.25; 4], n);
}

#[test]
fn lower_bound_table_and_argmax() {
    let w = LowerBoundWorld::build(2, 16, 10_000).unwrap();
    assert!((w.epsilon() - 0.04).abs() < 1e-15);
    let table = reference::lower_bound_table(2, 16, 10_000);
    for j in 0..16 {
        assert_eq!(w.world_prob(A, Response(j)), table[0][j]);
        assert_eq!(w.world_prob(B, Response(j)), table[1][j]);
    }
    let sets = reference::argmax_sets(&table);
    assert_eq!(sets[0], vec![2]);
    assert_eq!(sets[1], (0..16).filter(|&j| j != 2).collect::<Vec<_>>());
    assert_eq!(w.best_prob(A, S0), 0.54);
    assert_eq!(w.best_prob(B, S0), 0.5);
    // Exhaustive expectation of uniform play: eps / 2 per round.
    let per_round = reference::uniform_play_regret_per_round(&table);
    assert!((per_round - 0.02).abs() < 1e-15);
}

#[test]
fn instant_regret_examples() {
    let w = LowerBoundWorld::build(1, 4, 100).unwrap();
    assert_eq!(instant_regret(&w, A, S0, Response(1)).unwrap(), 0.0);
    let r = instant_regret(&w, A, S0, Response(3)).unwrap();
    assert!((r - 0.2).abs() < 1e-12);
    assert!(instant_regret(&w, Instruction(2), S0, Response(0)).is_err());
    assert!(instant_regret(&w, A, S0, Response(4)).is_err());

    let t = LowRankTeacher::build(9, 20, 6, 3, 0.75).unwrap();
    for x in 0..20 {
        let best = t.optimal_response(Instruction(x));
        assert_eq!(instant_regret(&t, Instruction(x), S0, best).unwrap(), 0.0);
        for y in 0..6 {
            let r = instant_regret(&t, Instruction(x), S0, Response(y)).unwrap();
            assert!((0.0..=1.0).contains(&r));
            assert_eq!(r == 0.0, t.teacher_prob(Instruction(x), Response(y)) == t.teacher_prob(Instruction(x), best));
        }
    }
}

#[test]
fn protocol_edge_cases() {
    // d = 1 makes P(x | y) identical across responses.
    let env = LowRankTeacher::build(4, 12, 5, 1, 0.75).unwrap();
    let mut agent = RandomAgent::new(12, 5).unwrap();
    let trace = run_protocol(&env, &mut agent, 10, 7).unwrap();
    assert_eq!(trace.len(), 10);
    assert_eq!(trace.final_regret(), 0.0);

    assert!(run_protocol(&env, &mut agent, 0, 7).is_err());
    let mut wrong = RandomAgent::new(12, 6).unwrap();
    assert!(run_protocol(&env, &mut wrong, 5, 7).is_err());
}

#[test]
fn protocol_records_are_consistent() {
    let env = LowRankTeacher::build(2, 30, 6, 3, 0.75).unwrap();
    let mut agent = LorilAgent::new(30, env.embeddings(), LorilConfig::default()).unwrap();
    let trace = run_protocol(&env, &mut agent, 200, 3).unwrap();
    let mut cum = 0.0;
    for (t, r) in trace.records().iter().enumerate() {
        assert_eq!(r.round, t + 1);
        assert_eq!(r.hidden_reward, env.prob(r.instruction, r.response, r.context));
        let expected = env.best_prob(r.instruction, r.context) - r.hidden_reward;
        assert_eq!(r.instant_regret, expected);
        cum += r.instant_regret;
        assert_eq!(r.cum_regret, cum);
    }
}

#[test]
fn runs_are_reproducible() {
    let env = LowRankTeacher::build(2, 30, 6, 3, 0.75).unwrap();
    let run = |seed| {
        let mut a = EpsGreedyAgent::new(30, env.embeddings(), AdamConfig::default(), 0.2).unwrap();
        run_protocol(&env, &mut a, 150, seed).unwrap().to_csv()
    };
    assert_eq!(run(11), run(11));
    assert_ne!(run(11), run(12));
}

#[test]
fn environment_draws_do_not_depend_on_agent() {
    let env = LowRankTeacher::build(2, 30, 6, 3, 0.75).unwrap();
    let mut random = RandomAgent::new(30, 6).unwrap();
    let mut eps = EpsGreedyAgent::new(30, env.embeddings(), AdamConfig::default(), 0.3).unwrap();
    let a = run_protocol(&env, &mut random, 100, 5).unwrap();
    let b = run_protocol(&env, &mut eps, 100, 5).unwrap();
    let xs = |t: &hindsight_core::RegretTrace| t.records().iter().map(|r| r.instruction).collect::<Vec<_>>();
    assert_eq!(xs(&a), xs(&b));
}
