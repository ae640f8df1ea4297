mod common;

use common::*;
use poisson_disorder::model::{flow_signed, init_statistic, DiscountMode, ModelParams, Statistic3};
use poisson_disorder::policies::*;
use poisson_disorder::sim::*;
use poisson_disorder::solver::{hitting_time_r, solve, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small() -> SolverConfig {
    SolverConfig { nx: 16, ny: 16, nz: 10, eps_conv: 1e-8, ..SolverConfig::default() }
}

#[test]
fn first_crossing_matches_a_dense_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let step = 1e-4;
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let s = random_feasible_state(&mut rng, p.kappa());
        let limit = 5.0;
        let scan = (0..=(limit / step) as usize)
            .map(|i| i as f64 * step)
            .find(|&t| flow_signed(t, &s, &p).sum() >= p.kappa());
        let t = first_crossing(&s, &p);
        match scan {
            Some(ts) => assert!(t <= ts && ts - t <= step + 1e-9, "{p:?} {s:?}: {t} vs scan {ts}"),
            None => assert!(t > limit - step, "{p:?} {s:?}: {t}"),
        }
    }
}

fn trajectories(p: &ModelParams, n: u64, horizon: f64) -> Vec<Trajectory> {
    (0..n)
        .map(|i| {
            let mut rng = replication_rng(8, i);
            let sc = sample_scenario(p, &mut rng);
            simulate_trajectory(&sc, p, horizon, &mut rng).unwrap()
        })
        .collect()
}

#[test]
fn threshold_rules_alarm_at_the_first_crossing_of_the_path() {
    let p = case_i().with_priors(0.05, 0.05).unwrap();
    let step = 1e-3;
    for traj in trajectories(&p, 200, 5.0) {
        let path = statistic_path(&traj, &p).unwrap();
        let scan = |pred: &dyn Fn(&Statistic3) -> bool| {
            (0..=(traj.horizon() / step) as usize)
                .map(|i| i as f64 * step)
                .find(|&t| pred(&path.at(t, &p)))
        };
        let sum = alarm_time(&Policy::threshold_sum(&p), &traj, &p).unwrap();
        let level = p.lambda() / p.c();
        let chan = alarm_time(&Policy::per_channel_min(&p), &traj, &p).unwrap();
        for (alarm, oracle) in [
            (sum, scan(&|s| s.sum() >= p.kappa())),
            (chan, scan(&|s| s.phi_1.max(s.phi_2()) >= level)),
        ] {
            match oracle {
                Some(t) => assert!(alarm.fired && alarm.time <= t + 1e-9 && t - alarm.time <= step, "{alarm:?} vs {t}"),
                None => assert!(!alarm.fired || alarm.time > traj.horizon() - step),
            }
        }
    }
}

#[test]
fn sum_rule_precedes_channel_rule_with_the_single_rate_discount() {
    let p = case_i().with_mode(DiscountMode::PaperLiteral).with_priors(0.05, 0.0).unwrap();
    for traj in trajectories(&p, 500, 5.0) {
        let a = alarm_time(&Policy::threshold_sum(&p), &traj, &p).unwrap();
        let b = alarm_time(&Policy::per_channel_min(&p), &traj, &p).unwrap();
        assert!(a.time <= b.time + 1e-9, "{a:?} vs {b:?}");
    }
}

#[test]
fn eps_optimal_rule_structure() {
    let p = case_i().with_priors(0.05, 0.05).unwrap();
    let out = solve(&p, &small()).unwrap();
    let cfg = &out.config;
    let eps = 0.01 / p.c();
    let rule = |n: usize, e: f64| build_eps_optimal(out.stages[..n].to_vec(), e, cfg).unwrap();
    let one = rule(1, eps);
    let init = init_statistic(p.pi1(), p.pi2()).unwrap();
    let r0 = hitting_time_r(&out.stages[0], &init, eps, &p, cfg);
    let k = out.stages.len();
    let rules: Vec<Policy> = (1..=k).map(|n| rule(n, 1e-9)).collect();
    let tau_star = Policy::value_region(std::sync::Arc::new(out.value.clone()), cfg);
    for traj in trajectories(&p, 300, 5.0) {
        let s1 = alarm_time(&one, &traj, &p).unwrap();
        let sigma1 = traj.jumps().first().map(|j| j.time).unwrap_or(f64::INFINITY);
        let expected = r0.min(sigma1).min(traj.horizon());
        assert!((s1.time - expected).abs() <= cfg.dt / 100.0, "{s1:?} vs {expected}");
        let times: Vec<f64> = rules.iter().map(|r| alarm_time(r, &traj, &p).unwrap().time).collect();
        for (n, t) in times.iter().enumerate() {
            if let Some(j) = traj.jumps().get(n) {
                assert!(*t <= j.time, "S_{} = {t} after σ = {}", n + 1, j.time);
            }
        }
        for w in times.windows(2) {
            assert!(w[0] <= w[1] + cfg.dt / 100.0, "{times:?}");
        }
        let star = alarm_time(&tau_star, &traj, &p).unwrap().time;
        assert!(times[k - 1] <= star + cfg.dt / 100.0);
    }
    assert_eq!(one.stage_count(), Some(1));
}

#[test]
fn malformed_trajectories_are_rejected() {
    use poisson_disorder::model::Channel::{One, Two};
    let bad = [
        (vec![Jump { time: 0.5, channel: One }, Jump { time: 0.2, channel: Two }], 1.0),
        (vec![Jump { time: 0.5, channel: One }, Jump { time: 0.5, channel: Two }], 1.0),
        (vec![Jump { time: 0.0, channel: One }], 1.0),
        (vec![Jump { time: 2.0, channel: One }], 1.0),
        (vec![], 0.0),
        (vec![], f64::NAN),
    ];
    for (jumps, horizon) in bad {
        assert!(Trajectory::new(jumps, horizon, None).is_err());
    }
}

#[test]
fn value_region_rule_alarms_inside_its_stop_set() {
    let p = case_iibi2().with_priors(0.1, 0.0).unwrap();
    let out = solve(&p, &small()).unwrap();
    let cfg = &out.config;
    let v = std::sync::Arc::new(out.value.clone());
    let rule = Policy::value_region(v.clone(), cfg);
    for traj in trajectories(&p, 100, 10.0) {
        let a = alarm_time(&rule, &traj, &p).unwrap();
        if a.fired {
            let s = statistic_path(&traj, &p).unwrap().at(a.time, &p);
            assert!(v.eval(&s) >= -cfg.eps_stop - 1e-9);
        }
    }
}
