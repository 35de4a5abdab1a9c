use std::sync::Arc;

use occo::ader::AderState;
use occo::aggregator::AggregatorState;
use occo::geometry::{
    bregman, hedge_step, kl_divergence, project_box, project_clipped_simplex_kl, BoxDomain, ClippedSimplex, MirrorPoint,
    Regularizer,
};
use occo::payoff::{loss_vector, rho_distance, QuadraticSaddle, SharedPayoff};
use occo::runtime::{ModularAlgorithm, OnlinePlayer, OptOppm, RuntimeConfig};
use occo::vi::{box_vi_gap, fixed_point_solve, lipschitz_bound, FixedPointOptions, OperatorContext, Rates, ProblemConstants, VariationalProblem};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit() -> BoxDomain {
    BoxDomain::interval(-1.0, 1.0).unwrap()
}

fn distribution(raw: Vec<f64>) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

prop_compose! {
    fn dist(d: usize)(raw in prop::collection::vec(0.01f64..1.0, d)) -> Vec<f64> {
        distribution(raw)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn box_projection_is_idempotent(p in prop::collection::vec(-5.0f64..5.0, 3)) {
        let dom = BoxDomain::new(vec![-1.0, 0.0, -0.5], vec![1.0, 2.0, 0.5]).unwrap();
        let once = project_box(&p, &dom).unwrap();
        prop_assert_eq!(project_box(&once, &dom).unwrap(), once);
    }

    #[test]
    fn bregman_is_nonnegative(p in prop::collection::vec(-1.0f64..1.0, 2), a in prop::collection::vec(-1.0f64..1.0, 2)) {
        let b = bregman(Regularizer::EuclideanHalfSquared, &p, &MirrorPoint::euclidean(a.clone())).unwrap();
        prop_assert!(b >= 0.0);
        prop_assert_eq!(b == 0.0, p == a);
    }

    #[test]
    fn entropic_coupling_is_nonnegative(p in dist(4), a in dist(4)) {
        let cs = ClippedSimplex::new(4, 4.0 * 0.001).unwrap();
        let b = bregman(Regularizer::NegativeEntropy, &p, &MirrorPoint::entropic(a.clone(), &cs).unwrap()).unwrap();
        prop_assert!(b >= -1e-15);
        prop_assert!(bregman(Regularizer::NegativeEntropy, &a, &MirrorPoint::entropic(a.clone(), &cs).unwrap()).unwrap().abs() < 1e-15);
    }

    #[test]
    fn pinsker_inequality(a in dist(5), b in dist(5)) {
        let l1: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        prop_assert!(kl_divergence(&a, &b).unwrap() >= l1 * l1 / 2.0 - 1e-12);
    }

    #[test]
    fn clipped_projection_is_feasible(q in prop::collection::vec(1e-6f64..10.0, 4), alpha in 0.01f64..1.0) {
        let cs = ClippedSimplex::new(4, alpha).unwrap();
        let p = project_clipped_simplex_kl(&q, &cs).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|v| *v >= cs.floor() - 1e-12));
    }

    #[test]
    fn hedge_is_shift_invariant(w in dist(4), loss in prop::collection::vec(0.0f64..2.0, 4), c in -3.0f64..3.0, rate in 0.01f64..10.0) {
        let cs = ClippedSimplex::new(4, 0.1).unwrap();
        let w = project_clipped_simplex_kl(&w, &cs).unwrap();
        let shifted: Vec<f64> = loss.iter().map(|l| l + c).collect();
        let a = hedge_step(&w, &loss, rate, &cs).unwrap();
        let b = hedge_step(&w, &shifted, rate, &cs).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn loss_vector_never_exceeds_rho(c in prop::collection::vec(-1.0f64..1.0, 6), probes in prop::collection::vec(-1.0f64..1.0, 6)) {
        let f = QuadraticSaddle::new(c[0], c[1]);
        let bank: Vec<SharedPayoff> = vec![Arc::new(QuadraticSaddle::new(c[2], c[3])), Arc::new(QuadraticSaddle::new(c[4], c[5]))];
        let px: [&[f64]; 3] = [&probes[0..1], &probes[1..2], &probes[2..3]];
        let py: [&[f64]; 3] = [&probes[3..4], &probes[4..5], &probes[5..6]];
        let l = loss_vector(&f, &bank, px, py).unwrap();
        for (lk, h) in l.iter().zip(&bank) {
            prop_assert!(*lk <= rho_distance(&f, h.as_ref(), &unit(), &unit()).unwrap().value + 1e-12);
        }
    }

    #[test]
    fn ader_stays_in_domain(seed in any::<u64>(), scale in 0.1f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = AderState::new(unit(), 4.0, 200).unwrap();
        for _ in 0..200 {
            let g: f64 = scale * rng.gen_range(-1.0..1.0);
            s.update(|_| vec![g]).unwrap();
            let p = s.predict();
            prop_assert!(p[0].abs() <= 1.0);
            prop_assert!(s.experts().iter().all(|e| e.iterate[0].abs() <= 1.0));
        }
    }

    #[test]
    fn aggregator_residual_is_nonnegative(seed in any::<u64>(), d in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = AggregatorState::new(d, 500, 1.0).unwrap();
        for _ in 0..500 {
            let loss: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            prop_assert!(s.update(&loss).unwrap() >= -1e-9);
            prop_assert!(s.simplex().contains(s.weights(), 1e-12));
        }
    }
}

fn random_context(rng: &mut ChaCha8Rng) -> OperatorContext {
    let t = rng.gen_range(8..=64);
    let floor = 1.0 / t as f64;
    let mut r = || rng.gen_range(-1.0..1.0);
    let h: SharedPayoff = Arc::new(QuadraticSaddle::new(r(), r()));
    let (xa, ya, xb, yb) = (r(), r(), r(), r());
    let s1 = 0.5 * (r() + 1.0) * t as f64;
    let s2 = 0.5 * (r() + 1.0) * t as f64;
    let rates = Rates {
        eta: 4.0 * (t as f64 + 1.0) / (1.0 + s1),
        gamma: 4.0 * (t as f64 + 1.0) / (1.0 + s2),
        theta: (t as f64).ln() / (1.0 + 0.5 * s1),
        vartheta: (t as f64).ln() / (1.0 + 0.5 * s2),
    };
    let wa = floor + (1.0 - 2.0 * floor) * 0.5 * (r() + 1.0);
    let oa = floor + (1.0 - 2.0 * floor) * 0.5 * (r() + 1.0);
    OperatorContext::new(h, unit(), unit(), vec![xa], vec![ya], wa, oa, vec![xb], vec![yb], rates, t).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solver_output_is_feasible_and_certified(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ctx = random_context(&mut rng);
        let lip = lipschitz_bound(&ctx.rates, ctx.horizon, &ProblemConstants::experiment());
        let (v, report) = fixed_point_solve(&ctx, lip, &FixedPointOptions::default()).unwrap();
        prop_assert!(report.certified);
        let flat = v.to_flat();
        prop_assert!(ctx.domain().contains(&flat, 0.0));
        let g = ctx.operator(&flat).unwrap();
        let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diam = ctx.domain().diameter();
        // the exact box maximum dominates any sample of z ∈ K
        prop_assert!(box_vi_gap(&ctx, &flat).unwrap() <= 1e-9 * (1.0 + gnorm * diam));
    }

    #[test]
    fn operator_is_lipschitz(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ctx = random_context(&mut rng);
        let lip = lipschitz_bound(&ctx.rates, ctx.horizon, &ProblemConstants::experiment());
        let dom = ctx.domain().clone();
        let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            dom.lower().iter().zip(dom.upper()).map(|(l, u)| rng.gen_range(*l..=*u)).collect()
        };
        for _ in 0..100 {
            let (a, b) = (sample(&mut rng), sample(&mut rng));
            let (ga, gb) = (ctx.operator(&a).unwrap(), ctx.operator(&b).unwrap());
            let dg = ga.iter().zip(&gb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let dv = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            prop_assert!(dg <= lip * dv * (1.0 + 1e-9));
        }
    }

    #[test]
    fn modular_run_invariants(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = RuntimeConfig { t0: 16, ..RuntimeConfig::default() };
        let mut alg = ModularAlgorithm::new(cfg, unit(), unit(), 1).unwrap();
        let mut prev: SharedPayoff = Arc::new(QuadraticSaddle::new(0.0, 0.0));
        let mut last_rates = None;
        let mut last_epoch = 0;
        for _ in 0..60 {
            let f: SharedPayoff = Arc::new(QuadraticSaddle::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let (x, y) = alg.decide(&[prev.clone()]).unwrap();
            prop_assert!(x[0].abs() <= 1.0 && y[0].abs() <= 1.0);
            let diag = alg.observe(f.clone()).unwrap();
            let rho = rho_distance(f.as_ref(), prev.as_ref(), &unit(), &unit()).unwrap().value;
            let r = diag.integration.unwrap();
            for v in [r.delta_x, r.delta_y, r.meta_x, r.meta_y] {
                prop_assert!(v >= -1e-9);
                prop_assert!(v <= 2.0 * rho + 1e-9, "{} > 2·{}", v, rho);
            }
            prop_assert!(diag.aggregator.unwrap() >= -1e-9);
            let rates = [diag.eta.unwrap(), diag.gamma.unwrap(), diag.theta.unwrap(), diag.vartheta.unwrap()];
            if let Some(prev_rates) = last_rates {
                if diag.epoch == last_epoch {
                    let prev_rates: [f64; 4] = prev_rates;
                    prop_assert!(rates.iter().zip(&prev_rates).all(|(a, b)| a <= b));
                }
            }
            last_rates = Some(rates);
            last_epoch = diag.epoch;
            prev = f;
        }
    }

    #[test]
    fn baseline_residual_bounds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = RuntimeConfig { t0: 64, ..RuntimeConfig::default() };
        let mut alg = OptOppm::new(cfg, unit(), unit()).unwrap();
        let mut prev: SharedPayoff = Arc::new(QuadraticSaddle::new(0.0, 0.0));
        let (d, g) = (2.0f64, 4.0f64);
        for _ in 0..60 {
            let f: SharedPayoff = Arc::new(QuadraticSaddle::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            alg.decide(&[prev.clone()]).unwrap();
            let diag = alg.observe(f.clone()).unwrap();
            let (nx, ny) = diag.nu.unwrap();
            let (eta, gamma) = (diag.eta.unwrap(), diag.gamma.unwrap());
            prop_assert!(nx >= -1e-9 && ny >= -1e-9);
            prop_assert!(nx <= (2.0 * d * g).min(2.0 * eta * g * g) + 1e-9);
            prop_assert!(ny <= (2.0 * d * g).min(2.0 * gamma * g * g) + 1e-9);
            prev = f;
        }
    }
}

#[test]
fn perfect_predictor_keeps_baseline_gap_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut alg = OptOppm::new(RuntimeConfig::default(), unit(), unit()).unwrap();
    let (u, v) = (0.25, -0.4);
    let mut cum = 0.0;
    let mut worst: f64 = 0.0;
    for _ in 0..2_000 {
        let f: SharedPayoff = Arc::new(QuadraticSaddle::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let (x, y) = alg.decide(&[f.clone()]).unwrap();
        cum += f.eval(&x, &[v]) - f.eval(&[u], &y);
        worst = worst.max(cum);
        alg.observe(f).unwrap();
    }
    // frozen from the reference run: the cumulative gap never climbs above 2ε
    assert!(worst <= 2.0 * 1.0 + 1e-6, "{worst}");
}

#[test]
fn aggregator_tracks_the_exact_predictor() {
    let (d, t) = (4, 10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut s = AggregatorState::new(d, t, 1.0).unwrap();
    let burn_in = 100;
    let mut reached = None;
    for r in 0..t {
        let mut loss: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..1.0)).collect();
        if r >= burn_in {
            loss[2] = 0.0;
        }
        s.update(&loss).unwrap();
        if reached.is_none() && r >= burn_in && s.weights()[2] > 1.0 - (d - 1) as f64 / t as f64 - 0.05 {
            reached = Some(r + 1 - burn_in);
        }
    }
    let rounds = reached.expect("weight never concentrated");
    assert!(rounds as f64 <= 10.0 * (t as f64).ln(), "{rounds} rounds");
}
