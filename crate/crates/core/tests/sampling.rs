//! Distributional checks on episode sampling and per-step sensing.

use swarmdef::engine::Assignment;
use swarmdef::env::Environment;
use swarmdef::scenario::{sample_episode, ScenarioConfig};

/// Upper 0.1% points of the chi-square distribution.
const CHI2_DF2: f64 = 13.816;
const CHI2_DF9: f64 = 27.877;

fn chi_square(counts: &[usize], probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum()
}

fn drones(episodes: u64) -> Vec<swarmdef::scenario::DroneSpec> {
    let c = ScenarioConfig::default();
    (0..episodes)
        .flat_map(|s| sample_episode(&c, s).drones)
        .collect()
}

#[test]
fn class_frequencies_follow_their_pmfs() {
    let ds = drones(200);
    let mut speed = [0usize; 3];
    let mut size = [0usize; 3];
    let mut power = [0usize; 3];
    for d in &ds {
        speed[[10.0, 20.0, 30.0]
            .iter()
            .position(|&s| s == d.speed)
            .unwrap()] += 1;
        size[d.size.index()] += 1;
        power[d.power.index()] += 1;
    }
    assert!(chi_square(&speed, &[0.4, 0.4, 0.2]) < CHI2_DF2, "{speed:?}");
    assert!(chi_square(&size, &[0.3, 0.4, 0.3]) < CHI2_DF2, "{size:?}");
    assert!(chi_square(&power, &[0.6, 0.3, 0.1]) < CHI2_DF2, "{power:?}");
}

#[test]
fn intermediate_waypoint_count_is_uniform() {
    let mut counts = [0usize; 3];
    for d in drones(200) {
        counts[d.path.len() - 3] += 1;
    }
    assert!(
        chi_square(&counts, &[1.0 / 3.0; 3]) < CHI2_DF2,
        "{counts:?}"
    );
}

#[test]
fn targets_are_area_uniform_over_the_footprint() {
    let c = ScenarioConfig::default();
    let b = c.target_box;
    let mut xs = [0usize; 10];
    let mut ys = [0usize; 10];
    for d in drones(200) {
        assert_eq!(d.target.z, 0.0);
        let fx = (d.target.x - b.min.x) / (b.max.x - b.min.x);
        let fy = (d.target.y - b.min.y) / (b.max.y - b.min.y);
        xs[((fx * 10.0) as usize).min(9)] += 1;
        ys[((fy * 10.0) as usize).min(9)] += 1;
    }
    assert!(chi_square(&xs, &[0.1; 10]) < CHI2_DF9, "{xs:?}");
    assert!(chi_square(&ys, &[0.1; 10]) < CHI2_DF9, "{ys:?}");
}

#[test]
fn paths_start_in_spawn_box_and_progress_toward_target() {
    let c = ScenarioConfig::default();
    for d in drones(50) {
        assert!(c.spawn_box.contains(d.path[0]));
        assert_eq!(*d.path.last().unwrap(), d.target);
        assert!(d.path.iter().all(|p| c.domain_box.contains(*p)));
        assert!(d.path.windows(2).all(|w| w[1].x <= w[0].x));
        let len: f64 = d.path.windows(2).map(|w| w[0].distance(w[1])).sum();
        assert!((len - d.path_length).abs() < 1e-9);
    }
}

#[test]
fn position_noise_is_redrawn_every_step() {
    let mut env = Environment::new(ScenarioConfig::default()).unwrap();
    env.reset(4);
    let mut prev: Vec<_> = env
        .state()
        .unwrap()
        .tracks
        .iter()
        .map(|t| t.observed_position)
        .collect();
    for _ in 0..20 {
        env.step(&Assignment(vec![0, 1, 2, 3])).unwrap();
        let state = env.state().unwrap();
        for (i, t) in state.tracks.iter().enumerate() {
            if state.drones[i].status.is_active() {
                assert_ne!(t.observed_position, prev[i]);
                assert_ne!(t.observed_position, state.drones[i].position);
            }
        }
        prev = state.tracks.iter().map(|t| t.observed_position).collect();
    }
}

#[test]
fn detected_labels_are_fixed_within_an_episode() {
    let mut env = Environment::new(ScenarioConfig::default()).unwrap();
    env.reset(6);
    let labels = |env: &Environment| -> Vec<_> {
        env.state()
            .unwrap()
            .tracks
            .iter()
            .map(|t| (t.detected_size, t.detected_power))
            .collect()
    };
    let first = labels(&env);
    for _ in 0..30 {
        env.step(&Assignment(vec![0; 4])).unwrap();
        assert_eq!(labels(&env), first);
    }
}
