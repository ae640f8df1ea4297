mod common;

use common::*;
use poisson_disorder::model::{total_odds, Channel, ModelParams};
use poisson_disorder::policies::Policy;
use poisson_disorder::sim::*;

fn within(estimate: f64, expected: f64, se: f64, what: &str) {
    assert!((estimate - expected).abs() <= 4.0 * se, "{what}: {estimate} vs {expected} (se {se})");
}

#[test]
fn scenario_law() {
    let p = case_iibi2().with_priors(0.3, 0.1).unwrap();
    let n = 100_000u64;
    let draws: Vec<Scenario> = (0..n).map(|i| sample_scenario(&p, &mut replication_rng(1, i))).collect();
    let frac = |pred: &dyn Fn(&Scenario) -> bool| draws.iter().filter(|s| pred(s)).count() as f64 / n as f64;
    let se = |q: f64| (q * (1.0 - q) / n as f64).sqrt();
    let atom = frac(&|s| s.theta1 == 0.0);
    within(atom, 0.3, se(0.3), "atom of θ₁");
    for t in [0.5, 1.0, 2.0] {
        let q = 0.7 * 0.9 * (-2.0 * p.lambda() * t).exp();
        within(frac(&|s| s.theta() > t), q, se(q), "survival of θ");
        let q1 = 0.7 * (-p.lambda() * t).exp();
        within(frac(&|s| s.theta1 > t), q1, se(q1), "survival of θ₁");
    }
}

#[test]
fn jump_counts_have_the_right_rates() {
    let horizon = 3.0;
    let n = 4000u64;
    let mean_count = |p: &ModelParams, sc: Scenario| {
        let total: usize = (0..n)
            .map(|i| simulate_trajectory(&sc, p, horizon, &mut replication_rng(2, i)).unwrap().jumps().len())
            .sum();
        total as f64 / n as f64
    };
    let equal = ModelParams::with_rates(1.5, 1.5, 0.5, 1.0).unwrap();
    let sc = Scenario { theta1: 1.0, theta2: 2.0 };
    let m = 2.0 * 1.5 * horizon;
    within(mean_count(&equal, sc), m, (m / n as f64).sqrt(), "α = β");
    let p = case_i();
    let m = 2.0 * p.alpha() * horizon;
    let disordered = Scenario { theta1: 0.0, theta2: 0.0 };
    within(mean_count(&p, disordered), m, (m / n as f64).sqrt(), "θ = 0");
    let m = 2.0 * p.beta() * horizon;
    let never = Scenario { theta1: f64::INFINITY, theta2: f64::INFINITY };
    within(mean_count(&p, never), m, (m / n as f64).sqrt(), "θ = ∞");
}

#[test]
fn compensated_gaps_are_unit_exponential() {
    // Under the time change Λ(t) = β·min(t, θ) + α·(t − θ)⁺ the arrivals of a
    // channel form a unit-rate process.
    let p = ModelParams::with_rates(3.0, 0.7, 0.8, 1.0).unwrap();
    let per_traj = 5;
    let mut gaps = Vec::new();
    for i in 0..4000u64 {
        let mut rng = replication_rng(3, i);
        let sc = sample_scenario(&p, &mut rng);
        let traj = simulate_trajectory(&sc, &p, 200.0, &mut rng).unwrap();
        for ch in Channel::BOTH {
            let theta = sc.theta_of(ch);
            let clock = |t: f64| p.beta() * t.min(theta) + p.alpha() * (t - theta).max(0.0);
            let times: Vec<f64> = traj.jumps().iter().filter(|j| j.channel == ch).map(|j| j.time).collect();
            assert!(times.len() >= per_traj);
            let mut last = 0.0;
            for &t in &times[..per_traj] {
                gaps.push(clock(t) - clock(last));
                last = t;
            }
        }
    }
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len() as f64;
    let d = gaps
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let f = 1.0 - (-g).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(d < 1.628 / n.sqrt(), "KS statistic {d} over {n} gaps");
}

#[test]
fn statistic_path_matches_a_discrete_bayes_filter() {
    // Independent filter: per-channel posterior on a dt grid with the prior
    // hazard step and the Poisson likelihood ratio of each bin.
    let p = ModelParams::with_rates(2.0, 1.0, 0.5, 1.0).unwrap().with_priors(0.2, 0.05).unwrap();
    let dt = 1e-4;
    let horizon = 4.0;
    for rep in 0..5u64 {
        let mut rng = replication_rng(4, rep);
        let sc = sample_scenario(&p, &mut rng);
        let traj = simulate_trajectory(&sc, &p, horizon, &mut rng).unwrap();
        let path = statistic_path(&traj, &p).unwrap();
        let steps = (horizon / dt).round() as usize;
        let every = steps / 100;
        let hazard = 1.0 - (-p.lambda() * dt).exp();
        let mut post = [p.pi1(), p.pi2()];
        let mut next_jump = 0;
        for k in 1..=steps {
            let (lo, hi) = ((k - 1) as f64 * dt, k as f64 * dt);
            let mut counts = [0i32; 2];
            let jumps = traj.jumps();
            while next_jump < jumps.len() && jumps[next_jump].time <= hi {
                debug_assert!(jumps[next_jump].time > lo);
                counts[jumps[next_jump].channel.index()] += 1;
                next_jump += 1;
            }
            for i in 0..2 {
                let prior = post[i] + (1.0 - post[i]) * hazard;
                let lr = p.ratio().powi(counts[i]) * (-(p.alpha() - p.beta()) * dt).exp();
                post[i] = prior * lr / (prior * lr + 1.0 - prior);
            }
            if k % every == 0 {
                let odds = post.map(|q| q / (1.0 - q));
                let oracle = (1.0 + odds[0]) * (1.0 + odds[1]) - 1.0;
                let s = path.at(hi, &p);
                assert!(rel_err(total_odds(&s), oracle) <= 1e-3, "rep {rep} t {hi}: {} vs {oracle}", total_odds(&s));
                assert!(rel_err(s.phi_1, odds[0]) <= 1e-3);
            }
        }
    }
}

#[test]
fn path_states_stay_on_the_manifold() {
    let p = case_iii().with_priors(0.1, 0.2).unwrap();
    for rep in 0..200u64 {
        let mut rng = replication_rng(5, rep);
        let sc = sample_scenario(&p, &mut rng);
        let traj = simulate_trajectory(&sc, &p, 10.0, &mut rng).unwrap();
        let path = statistic_path(&traj, &p).unwrap();
        assert_eq!(path.states.len(), traj.jumps().len() + 1);
        for s in path.states.iter().chain(&path.pre_jump) {
            assert!(s.manifold_residual() <= 1e-9 * (1.0 + s.phi_x));
        }
    }
}

#[test]
fn never_alarming_has_closed_form_risk() {
    let p = case_iibi2();
    let horizon = 2.0;
    let never = Policy::ThresholdSum { threshold: f64::INFINITY };
    let (est, log) = estimate_risk_with_log(&never, &p, 50_000, horizon, 6).unwrap();
    let rate = 2.0 * p.lambda();
    let survive = (-rate * horizon).exp();
    let expected = survive + p.c() * (horizon - (1.0 - survive) / rate);
    within(est.risk, expected, est.std_error, "risk of never alarming");
    assert_eq!(est.censored, est.reps);
    let mean_loss = log.iter().map(|r| r.loss).sum::<f64>() / log.len() as f64;
    assert!((mean_loss - est.risk).abs() < 1e-12);
    for r in &log {
        assert_eq!(r.loss, f64::from(u8::from(r.false_alarm)) + p.c() * r.delay);
        assert_eq!(r.tau, horizon);
    }
}

#[test]
fn risk_bookkeeping_is_consistent() {
    let p = case_i().with_priors(0.1, 0.1).unwrap();
    let (est, log) = estimate_risk_with_log(&Policy::threshold_sum(&p), &p, 2000, default_horizon(&p), 7).unwrap();
    let fa = log.iter().filter(|r| r.false_alarm).count() as f64 / log.len() as f64;
    let delay = log.iter().map(|r| r.delay).sum::<f64>() / log.len() as f64;
    assert!((est.false_alarm - fa).abs() < 1e-12);
    assert!((est.mean_delay - delay).abs() < 1e-12);
    assert!((est.risk - (est.false_alarm + p.c() * est.mean_delay)).abs() < 1e-9);
    for r in &log {
        assert_eq!(r.false_alarm, r.tau < r.theta);
        assert!((r.delay - (r.tau - r.theta).max(0.0)).abs() < 1e-15);
    }
    let (lo, hi) = est.interval(1.96);
    assert!(lo < est.risk && est.risk < hi);
}
