use rand::Rng;

use super::{dispatch_ranked, rank_ascending, rank_descending, Policy, PolicyInput};
use crate::encoding::ActionMask;
use crate::engine::Assignment;
use crate::error::Result;
use crate::geometry::Vec3;
use crate::rng::SimRng;
use crate::scenario::Zone;

/// Multiplies the status value (0 active, 1 neutralized, 2 impacted) so that
/// inactive drones saturate.
const STATUS_PENALTY: f64 = 1000.0;

/// Uniform choice over the valid drones of each effector, or over all
/// drones when none is valid.
pub fn random_policy(input: &PolicyInput<'_>, rng: &mut SimRng) -> Assignment {
    random_assignment(input.mask, rng)
}

/// The random policy needs only the mask, so protocol clients can
/// reproduce it exactly from a `(mask, rng)` pair.
pub fn random_assignment(mask: &ActionMask, rng: &mut SimRng) -> Assignment {
    let n = mask.n_drones;
    let targets = (0..mask.n_effectors)
        .map(|m| {
            let valid: Vec<usize> = (0..n).filter(|&j| mask.get(m, j)).collect();
            if valid.is_empty() {
                rng.random_range(0..n)
            } else {
                valid[rng.random_range(0..valid.len())]
            }
        })
        .collect();
    Assignment(targets)
}

/// Priority score per drone, lower is more urgent.
///
/// The weighted distance sums, over all zones, the distance to the zone
/// center divided by value times radius. It is divided by the detected
/// explosive scalar, inactive drones get a large status offset, and the result is
/// saturated at `d_max` and mapped onto `[-1, 1]`.
pub fn heuristic_scores(input: &PolicyInput<'_>) -> Vec<f64> {
    input
        .tracks
        .iter()
        .map(|t| {
            let pos = t.observed_position;
            let mut w: f64 = input
                .zones
                .iter()
                .map(|z| z.center.distance(pos) / (z.value * z.radius))
                .sum();
            w = w / t.detected_power.scalar() + t.status.index() as f64 * STATUS_PENALTY;
            w.min(input.d_max) / (0.5 * input.d_max) - 1.0
        })
        .collect()
}

pub fn heuristic_policy(input: &PolicyInput<'_>) -> Assignment {
    dispatch_ranked(&rank_ascending(&heuristic_scores(input)), input.mask)
}

/// Each effector independently engages the nearest valid drone.
pub fn closest_first(input: &PolicyInput<'_>) -> Assignment {
    let n = input.n_drones();
    let targets = input
        .effector_specs
        .iter()
        .enumerate()
        .map(|(m, spec)| {
            let any_valid = input.mask.any_valid(m);
            let mut best: Option<(f64, usize)> = None;
            for j in 0..n {
                if any_valid && !input.mask.get(m, j) {
                    continue;
                }
                let d = spec.position.distance(input.tracks[j].observed_position);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, j));
                }
            }
            best.map_or(0, |(_, j)| j)
        })
        .collect();
    Assignment(targets)
}

/// Ground-plane distance from `point` to the ray leaving `origin` along the
/// horizontal part of `velocity`, and the along-track distance of the
/// closest approach. A stationary drone degenerates to a point.
fn ground_ray(origin: Vec3, velocity: Vec3, point: Vec3) -> (f64, f64) {
    let (ox, oy) = (origin.x, origin.y);
    let (px, py) = (point.x - ox, point.y - oy);
    let speed = velocity.x.hypot(velocity.y);
    if speed < 1e-9 {
        return (px.hypot(py), 0.0);
    }
    let (ux, uy) = (velocity.x / speed, velocity.y / speed);
    let t = (px * ux + py * uy).max(0.0);
    ((px - t * ux).hypot(py - t * uy), t)
}

/// Zone closest to the drone's projected ground track.
pub fn heading_zone(position: Vec3, velocity: Vec3, zones: &[Zone]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, z) in zones.iter().enumerate() {
        let (d, _) = ground_ray(position, velocity, z.center);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Value of the zone nearest the drone's projected destination over its
/// distance to that zone plus one meter. Higher is more urgent.
pub fn zone_weighted_scores(input: &PolicyInput<'_>) -> Vec<f64> {
    input
        .tracks
        .iter()
        .zip(input.velocities)
        .map(|(t, &v)| {
            let z = &input.zones[heading_zone(t.observed_position, v, input.zones)];
            z.value / (t.observed_position.distance(z.center) + 1.0)
        })
        .collect()
}

pub fn zone_weighted(input: &PolicyInput<'_>) -> Assignment {
    dispatch_ranked(&rank_descending(&zone_weighted_scores(input)), input.mask)
}

/// Expected loss rate per drone: value of the zone its ground track
/// crosses (zero if none) times its detected explosive scalar, over the
/// time to reach that zone, floored at one timestep.
pub fn greedy_urgencies(input: &PolicyInput<'_>) -> Vec<f64> {
    input
        .tracks
        .iter()
        .zip(input.velocities)
        .map(|(t, &v)| {
            let pos = t.observed_position;
            let mut hit: Option<(f64, usize)> = None;
            for (i, z) in input.zones.iter().enumerate() {
                let (d, along) = ground_ray(pos, v, z.center);
                if d <= z.radius && hit.is_none_or(|(a, _)| along < a) {
                    hit = Some((along, i));
                }
            }
            let Some((_, zi)) = hit else {
                return 0.0;
            };
            let z = &input.zones[zi];
            let (_, along) = ground_ray(pos, v, z.center);
            let speed = v.norm();
            let ground_len = v.x.hypot(v.y);
            let aim = if ground_len < 1e-9 {
                Vec3::new(pos.x, pos.y, 0.0)
            } else {
                Vec3::new(
                    pos.x + along * v.x / ground_len,
                    pos.y + along * v.y / ground_len,
                    0.0,
                )
            };
            let time_to_impact = if speed > 1e-9 {
                pos.distance(aim) / speed
            } else {
                f64::INFINITY
            };
            z.value * t.detected_power.scalar() / time_to_impact.max(input.dt)
        })
        .collect()
}

pub fn greedy_expected_loss(input: &PolicyInput<'_>) -> Assignment {
    dispatch_ranked(&rank_descending(&greedy_urgencies(input)), input.mask)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn name(&self) -> String {
        "random".into()
    }

    fn act(&self, input: &PolicyInput<'_>, rng: &mut SimRng) -> Result<Assignment> {
        Ok(random_policy(input, rng))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicPolicy;

impl Policy for HeuristicPolicy {
    fn name(&self) -> String {
        "heuristic".into()
    }

    fn act(&self, input: &PolicyInput<'_>, _rng: &mut SimRng) -> Result<Assignment> {
        Ok(heuristic_policy(input))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ClosestFirst;

impl Policy for ClosestFirst {
    fn name(&self) -> String {
        "closest".into()
    }

    fn act(&self, input: &PolicyInput<'_>, _rng: &mut SimRng) -> Result<Assignment> {
        Ok(closest_first(input))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZoneWeighted;

impl Policy for ZoneWeighted {
    fn name(&self) -> String {
        "zone".into()
    }

    fn act(&self, input: &PolicyInput<'_>, _rng: &mut SimRng) -> Result<Assignment> {
        Ok(zone_weighted(input))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyExpectedLoss;

impl Policy for GreedyExpectedLoss {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn act(&self, input: &PolicyInput<'_>, _rng: &mut SimRng) -> Result<Assignment> {
        Ok(greedy_expected_loss(input))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::ActionMask;
    use crate::engine::{DroneStatus, EffectorState, Kinematic, Weapon};
    use crate::rng;
    use crate::scenario::{EffectorSpec, PowerClass, ScenarioConfig, SizeClass};
    use crate::sensing::DroneTrack;
    use rand::Rng;

    struct Fixture {
        tracks: Vec<DroneTrack>,
        effectors: Vec<EffectorState>,
        specs: Vec<EffectorSpec>,
        mask: ActionMask,
        zones: Vec<Zone>,
        velocities: Vec<Vec3>,
        d_max: f64,
    }

    impl Fixture {
        fn new(positions: &[Vec3]) -> Self {
            let c = ScenarioConfig::default();
            let tracks: Vec<DroneTrack> = positions
                .iter()
                .enumerate()
                .map(|(index, &p)| DroneTrack {
                    index,
                    observed_position: p,
                    detected_size: SizeClass::Medium,
                    detected_power: PowerClass::Low,
                    status: DroneStatus::Active,
                })
                .collect();
            let effectors = (0..c.n_effectors())
                .map(|index| EffectorState {
                    index,
                    azimuth: 0.0,
                    elevation: 0.0,
                    kinematic: Kinematic::Chasing,
                    weapon: Weapon::Ready,
                    charge_steps_left: 0,
                    assigned_drone: None,
                })
                .collect();
            let n = positions.len();
            Fixture {
                tracks,
                effectors,
                specs: c.effectors.clone(),
                mask: ActionMask::all_valid(c.n_effectors(), n),
                zones: c.zones.clone(),
                velocities: vec![Vec3::ZERO; n],
                d_max: c.d_max,
            }
        }

        fn set_status(&mut self, j: usize, s: DroneStatus) {
            self.tracks[j].status = s;
            let statuses: Vec<DroneStatus> = self.tracks.iter().map(|t| t.status).collect();
            self.mask = ActionMask::from_statuses(&statuses, self.effectors.len());
        }

        fn input(&self) -> PolicyInput<'_> {
            PolicyInput {
                tracks: &self.tracks,
                effectors: &self.effectors,
                effector_specs: &self.specs,
                mask: &self.mask,
                zones: &self.zones,
                d_max: self.d_max,
                dt: 0.1,
                velocities: &self.velocities,
                observation: &[],
            }
        }
    }

    fn random_positions(rng: &mut SimRng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-100.0..100.0),
                    rng.random_range(-100.0..100.0),
                    rng.random_range(0.0..50.0),
                )
            })
            .collect()
    }

    /// The three score lines, written out longhand.
    fn score_oracle(pos: [f64; 3], zones: &[Zone], e: f64, s: f64, d_max: f64) -> f64 {
        let mut w = 0.0;
        for z in zones {
            let dx = z.center.x - pos[0];
            let dy = z.center.y - pos[1];
            let dz = z.center.z - pos[2];
            w += (dx * dx + dy * dy + dz * dz).sqrt() / (z.value * z.radius);
        }
        w = w / e + s * 1000.0;
        let capped = if w < d_max { w } else { d_max };
        capped / (0.5 * d_max) - 1.0
    }

    #[test]
    fn heuristic_score_reference_point() {
        let f = Fixture::new(&[Vec3::new(100.0, 0.0, 10.0)]);
        let s = heuristic_scores(&f.input())[0];
        let expected = score_oracle([100.0, 0.0, 10.0], &f.zones, 1.0, 0.0, 100.0);
        assert!((s - expected).abs() <= 1e-12 * expected.abs());
        assert!((s - (-0.825_676_234_433_076_4)).abs() < 1e-12, "{s}");
    }

    #[test]
    fn inactive_drone_saturates_at_one() {
        let mut f = Fixture::new(&[Vec3::new(-30.0, -50.0, 0.0), Vec3::new(90.0, 0.0, 40.0)]);
        f.set_status(0, DroneStatus::Neutralized);
        f.set_status(1, DroneStatus::Impacted);
        for d_max in [1.0, 100.0, 1000.0] {
            f.d_max = d_max;
            assert!(heuristic_scores(&f.input()).iter().all(|&s| s == 1.0));
        }
    }

    #[test]
    fn doubling_power_halves_weighted_distance() {
        let mut f = Fixture::new(&[Vec3::new(10.0, 10.0, 10.0)]);
        f.d_max = 1e9;
        let w = |s: f64, d_max: f64| (s + 1.0) * 0.5 * d_max;
        let s1 = heuristic_scores(&f.input())[0];
        f.tracks[0].detected_power = PowerClass::Medium;
        let s2 = heuristic_scores(&f.input())[0];
        assert!((w(s2, f.d_max) - 0.5 * w(s1, f.d_max)).abs() < 1e-6);
    }

    #[test]
    fn heuristic_single_valid_drone_takes_all_effectors() {
        let mut f = Fixture::new(&[Vec3::new(0.0, 0.0, 10.0); 5]);
        for j in [0, 1, 3, 4] {
            f.set_status(j, DroneStatus::Neutralized);
        }
        assert_eq!(heuristic_policy(&f.input()).0, vec![2, 2, 2, 2]);
    }

    #[test]
    fn heuristic_assigns_distinct_drones_in_score_order() {
        let f = Fixture::new(&[
            Vec3::new(90.0, 0.0, 30.0),
            Vec3::new(-25.0, -45.0, 5.0),
            Vec3::new(50.0, 0.0, 30.0),
            Vec3::new(0.0, -40.0, 20.0),
            Vec3::new(95.0, 90.0, 45.0),
        ]);
        let scores = heuristic_scores(&f.input());
        let a = heuristic_policy(&f.input()).0;
        let mut expected: Vec<usize> = (0..5).collect();
        expected.sort_by(|&x, &y| scores[x].partial_cmp(&scores[y]).unwrap());
        assert_eq!(a, expected[..4].to_vec());
    }

    #[test]
    fn heuristic_permutation_equivariance() {
        let mut rng = rng::policy_rng(3);
        for _ in 0..200 {
            let pos = random_positions(&mut rng, 12);
            let mut perm: Vec<usize> = (0..12).collect();
            for i in (1..12).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let f = Fixture::new(&pos);
            let permuted: Vec<Vec3> = perm.iter().map(|&p| pos[p]).collect();
            let g = Fixture::new(&permuted);
            let a = heuristic_policy(&f.input()).0;
            let b = heuristic_policy(&g.input()).0;
            let mapped: Vec<usize> = b.iter().map(|&j| perm[j]).collect();
            assert_eq!(a, mapped);
        }
    }

    #[test]
    fn closest_single_and_colocated() {
        let f = Fixture::new(&[Vec3::new(50.0, 50.0, 20.0)]);
        assert_eq!(closest_first(&f.input()).0, vec![0; 4]);

        let c = ScenarioConfig::default();
        let mut pos = vec![Vec3::new(80.0, 0.0, 30.0); 6];
        pos[4] = c.effectors[2].position;
        let f = Fixture::new(&pos);
        assert_eq!(closest_first(&f.input()).0[2], 4);
    }

    #[test]
    fn closest_matches_brute_force() {
        let mut rng = rng::policy_rng(4);
        for _ in 0..1000 {
            let pos = random_positions(&mut rng, 20);
            let mut f = Fixture::new(&pos);
            for j in 0..20 {
                if rng.random_bool(0.3) {
                    f.set_status(j, DroneStatus::Neutralized);
                }
            }
            let got = closest_first(&f.input()).0;
            for (m, spec) in f.specs.iter().enumerate() {
                let valid: Vec<usize> = (0..20)
                    .filter(|&j| f.tracks[j].status.is_active())
                    .collect();
                let pool = if valid.is_empty() {
                    (0..20).collect()
                } else {
                    valid
                };
                let mut best = pool[0];
                for &j in &pool {
                    let dj = (spec.position - pos[j]).norm();
                    let db = (spec.position - pos[best]).norm();
                    if dj < db {
                        best = j;
                    }
                }
                assert_eq!(got[m], best);
            }
        }
    }

    #[test]
    fn zone_weighted_prefers_valuable_zone() {
        let c = ScenarioConfig::default();
        // Equidistant (15 m) from the value-10 and value-2 zone centers.
        let near_ten = c.zones[2].center + Vec3::new(0.0, 0.0, 15.0);
        let near_two = c.zones[0].center + Vec3::new(0.0, 0.0, 15.0);
        let f = Fixture::new(&[near_two, near_ten]);
        let s = zone_weighted_scores(&f.input());
        assert!(s[1] > s[0]);
        assert_eq!(zone_weighted(&f.input()).0[0], 1);
    }

    #[test]
    fn zone_weighted_is_finite_at_zero_distance() {
        let c = ScenarioConfig::default();
        let f = Fixture::new(&[c.zones[1].center]);
        let s = zone_weighted_scores(&f.input())[0];
        assert_eq!(s, c.zones[1].value);
    }

    #[test]
    fn zone_weighted_matches_oracle() {
        let mut rng = rng::policy_rng(5);
        for _ in 0..500 {
            let pos = random_positions(&mut rng, 10);
            let mut f = Fixture::new(&pos);
            for v in &mut f.velocities {
                *v = Vec3::new(
                    rng.random_range(-30.0..0.0),
                    rng.random_range(-10.0..10.0),
                    -2.0,
                );
            }
            let got = zone_weighted_scores(&f.input());
            for j in 0..10 {
                let (p, v) = (pos[j], f.velocities[j]);
                let vl = (v.x * v.x + v.y * v.y).sqrt();
                let (ux, uy) = (v.x / vl, v.y / vl);
                let mut best = (f64::INFINITY, 0);
                for (i, z) in f.zones.iter().enumerate() {
                    let (rx, ry) = (z.center.x - p.x, z.center.y - p.y);
                    let t = (rx * ux + ry * uy).max(0.0);
                    let d = ((rx - t * ux).powi(2) + (ry - t * uy).powi(2)).sqrt();
                    if d < best.0 {
                        best = (d, i);
                    }
                }
                let z = &f.zones[best.1];
                let expected = z.value / ((p - z.center).norm() + 1.0);
                assert!((got[j] - expected).abs() <= 1e-12 * expected);
            }
        }
    }

    #[test]
    fn greedy_prefers_imminent_high_value_impact() {
        let c = ScenarioConfig::default();
        let z10 = c.zones[2].center;
        let mut f = Fixture::new(&[Vec3::new(60.0, -10.0, 40.0), z10 + Vec3::new(1.0, 0.0, 1.0)]);
        f.velocities = vec![Vec3::new(-20.0, 0.0, -5.0), Vec3::new(-10.0, 0.0, -10.0)];
        let u = greedy_urgencies(&f.input());
        assert!(u[1] > u[0] && u[0] > 0.0);
        assert_eq!(greedy_expected_loss(&f.input()).0[0], 1);
    }

    #[test]
    fn greedy_zero_when_track_misses_all_zones() {
        let mut f = Fixture::new(&[Vec3::new(-90.0, 90.0, 10.0)]);
        f.velocities = vec![Vec3::new(-5.0, 5.0, -1.0)];
        assert_eq!(greedy_urgencies(&f.input()), vec![0.0]);
    }

    #[test]
    fn greedy_matches_oracle() {
        let mut rng = rng::policy_rng(6);
        for _ in 0..500 {
            let pos = random_positions(&mut rng, 10);
            let mut f = Fixture::new(&pos);
            for (j, v) in f.velocities.iter_mut().enumerate() {
                *v = Vec3::new(
                    rng.random_range(-30.0..-1.0),
                    rng.random_range(-10.0..10.0),
                    -3.0,
                );
                f.tracks[j].detected_power = PowerClass::from_index(j % 3);
            }
            let got = greedy_urgencies(&f.input());
            for j in 0..10 {
                let (p, v) = (pos[j], f.velocities[j]);
                let vl = v.x.hypot(v.y);
                let (ux, uy) = (v.x / vl, v.y / vl);
                let mut hit: Option<(f64, usize)> = None;
                for (i, z) in f.zones.iter().enumerate() {
                    let (rx, ry) = (z.center.x - p.x, z.center.y - p.y);
                    let t = (rx * ux + ry * uy).max(0.0);
                    let d = ((rx - t * ux).powi(2) + (ry - t * uy).powi(2)).sqrt();
                    if d <= z.radius && hit.is_none_or(|(bt, _)| t < bt) {
                        hit = Some((t, i));
                    }
                }
                let expected = match hit {
                    None => 0.0,
                    Some((t, i)) => {
                        let target = Vec3::new(p.x + t * ux, p.y + t * uy, 0.0);
                        let tti = (p - target).norm() / v.norm();
                        f.zones[i].value * ((j % 3) as f64 + 1.0) / tti.max(0.1)
                    }
                };
                assert!((got[j] - expected).abs() <= 1e-9 * expected.max(1.0));
            }
        }
    }

    #[test]
    fn random_forced_choice_and_determinism() {
        let mut f = Fixture::new(&[Vec3::ZERO; 6]);
        for j in [0, 1, 2, 4, 5] {
            f.set_status(j, DroneStatus::Impacted);
        }
        let mut r = rng::policy_rng(0);
        for _ in 0..100 {
            assert_eq!(random_policy(&f.input(), &mut r).0, vec![3; 4]);
        }
        let f = Fixture::new(&[Vec3::ZERO; 6]);
        let a: Vec<_> = (0..10)
            .scan(rng::policy_rng(1), |r, _| {
                Some(random_policy(&f.input(), r))
            })
            .collect();
        let b: Vec<_> = (0..10)
            .scan(rng::policy_rng(1), |r, _| {
                Some(random_policy(&f.input(), r))
            })
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn random_is_uniform_over_valid_set() {
        let mut f = Fixture::new(&[Vec3::ZERO; 5]);
        f.set_status(1, DroneStatus::Neutralized);
        let mut r = rng::policy_rng(2);
        let mut counts = [0usize; 5];
        let draws = 100_000;
        for _ in 0..draws / 4 {
            for j in random_policy(&f.input(), &mut r).0 {
                counts[j] += 1;
            }
        }
        assert_eq!(counts[1], 0);
        for j in [0, 2, 3, 4] {
            assert!((counts[j] as f64 / draws as f64 - 0.25).abs() < 0.01);
        }
    }
}
