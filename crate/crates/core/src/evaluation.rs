//! Seeded episodes and batches, per-episode metrics, and report export.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::replay::{write_replay, ReplayRecord};
use crate::engine::{FireEvent, ImpactEvent};
use crate::env::{damage_pct, Environment, TraceStep};
use crate::error::{Error, Result};
use crate::policies::Policy;
use crate::rng::{episode_seed, policy_rng};
use crate::scenario::{sample_episode, EpisodeSetup, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub seed: u64,
    pub steps: u32,
    pub damage_pct: f64,
    pub tracking_pct: f64,
    pub utilization_pct: f64,
    pub episode_return: f64,
    pub impacts: Vec<ImpactEvent>,
    pub fires: Vec<FireEvent>,
}

/// Percent of effector-steps spent `Tracking`.
pub fn tracking_pct(trace: &[TraceStep]) -> f64 {
    step_fraction(trace, |s| &s.tracking)
}

/// Percent of effector-steps with the weapon `Firing` or `Charging`.
pub fn utilization_pct(trace: &[TraceStep]) -> f64 {
    step_fraction(trace, |s| &s.busy)
}

fn step_fraction(trace: &[TraceStep], flags: impl Fn(&TraceStep) -> &Vec<bool>) -> f64 {
    let cells: usize = trace.iter().map(|s| flags(s).len()).sum();
    if cells == 0 {
        return 0.0;
    }
    let on = trace
        .iter()
        .flat_map(|s| flags(s).iter())
        .filter(|&&b| b)
        .count();
    100.0 * on as f64 / cells as f64
}

fn drive(
    env: &mut Environment,
    setup: EpisodeSetup,
    policy: &dyn Policy,
    seed: u64,
) -> Result<EpisodeReport> {
    let mut rng = policy_rng(seed);
    let mut last = env.reset_with_setup(setup)?;
    while !last.terminated {
        let action = policy.act(&env.policy_input()?, &mut rng)?;
        last = env.step(&action)?;
    }
    let trace = env.trace()?;
    let state = env.state()?;
    Ok(EpisodeReport {
        seed,
        steps: state.step_index,
        damage_pct: damage_pct(state.cumulative_damage, env.setup()?.max_damage),
        tracking_pct: tracking_pct(trace),
        utilization_pct: utilization_pct(trace),
        episode_return: env.episode_return()?,
        impacts: env.impacts()?.to_vec(),
        fires: env.fires()?.to_vec(),
    })
}

/// Run one episode to termination. The policy draws from the policy stream
/// of `seed`.
pub fn run_episode(
    config: &ScenarioConfig,
    setup: EpisodeSetup,
    policy: &dyn Policy,
    seed: u64,
) -> Result<EpisodeReport> {
    let mut env = Environment::new(config.clone())?;
    drive(&mut env, setup, policy, seed)
}

/// As [`run_episode`], also returning the per-step replay log.
pub fn run_episode_recorded(
    config: &ScenarioConfig,
    setup: EpisodeSetup,
    policy: &dyn Policy,
    seed: u64,
) -> Result<(EpisodeReport, Vec<ReplayRecord>)> {
    let mut env = Environment::new(config.clone())?.with_replay(true);
    let report = drive(&mut env, setup, policy, seed)?;
    let replay = env.replay()?.unwrap_or_default().to_vec();
    Ok((report, replay))
}

/// Sample the episode for `seed` and run it.
pub fn simulate(
    config: &ScenarioConfig,
    policy: &dyn Policy,
    seed: u64,
) -> Result<(EpisodeReport, Vec<ReplayRecord>)> {
    run_episode_recorded(config, sample_episode(config, seed), policy, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEpisode {
    /// Batch seed the episode belongs to.
    pub seed: u64,
    pub episode: u64,
    pub report: EpisodeReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation, 0 for fewer than two values.
    pub std: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MetricSummary { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub damage_pct: MetricSummary,
    pub tracking_pct: MetricSummary,
    pub utilization_pct: MetricSummary,
    pub episode_return: MetricSummary,
    pub steps: MetricSummary,
}

impl MetricSet {
    fn of<'a>(reports: impl Iterator<Item = &'a EpisodeReport> + Clone) -> Self {
        let col = |f: fn(&EpisodeReport) -> f64| {
            MetricSummary::of(&reports.clone().map(f).collect::<Vec<_>>())
        };
        MetricSet {
            damage_pct: col(|r| r.damage_pct),
            tracking_pct: col(|r| r.tracking_pct),
            utilization_pct: col(|r| r.utilization_pct),
            episode_return: col(|r| r.episode_return),
            steps: col(|r| f64::from(r.steps)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub episodes: usize,
    pub metrics: MetricSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub policy: String,
    pub config_fingerprint: String,
    pub episodes: Vec<BatchEpisode>,
    pub per_seed: Vec<SeedSummary>,
    pub overall: MetricSet,
}

/// Aggregate-only view of a batch, written as the summary report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub policy: String,
    pub config_fingerprint: String,
    pub episodes: usize,
    pub per_seed: Vec<SeedSummary>,
    pub overall: MetricSet,
}

impl BatchReport {
    /// Aggregate episodes, which must be ordered by seed then episode index.
    pub fn from_episodes(
        policy: String,
        config_fingerprint: String,
        episodes: Vec<BatchEpisode>,
    ) -> Self {
        let mut seeds: Vec<u64> = Vec::new();
        for e in &episodes {
            if seeds.last() != Some(&e.seed) {
                seeds.push(e.seed);
            }
        }
        let per_seed = seeds
            .into_iter()
            .map(|seed| {
                let reports = episodes
                    .iter()
                    .filter(move |e| e.seed == seed)
                    .map(|e| &e.report);
                SeedSummary {
                    seed,
                    episodes: reports.clone().count(),
                    metrics: MetricSet::of(reports),
                }
            })
            .collect();
        let overall = MetricSet::of(episodes.iter().map(|e| &e.report));
        BatchReport {
            policy,
            config_fingerprint,
            episodes,
            per_seed,
            overall,
        }
    }

    pub fn summary(&self) -> BatchSummary {
        BatchSummary {
            policy: self.policy.clone(),
            config_fingerprint: self.config_fingerprint.clone(),
            episodes: self.episodes.len(),
            per_seed: self.per_seed.clone(),
            overall: self.overall.clone(),
        }
    }
}

/// Run `episodes_per_seed` episodes for every seed on a pool of `workers`
/// threads. Episode `e` of seed `s` uses `episode_seed(s, e)`, so results do
/// not depend on the worker count.
pub fn run_batch(
    config: &ScenarioConfig,
    policy: &dyn Policy,
    episodes_per_seed: u64,
    seeds: &[u64],
    workers: usize,
) -> Result<BatchReport> {
    if episodes_per_seed == 0 {
        return Err(Error::Validation(
            "episodes_per_seed must be at least 1".into(),
        ));
    }
    config.validate()?;
    let jobs: Vec<(u64, u64)> = seeds
        .iter()
        .flat_map(|&s| (0..episodes_per_seed).map(move |e| (s, e)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;
    let episodes = pool.install(|| {
        jobs.par_iter()
            .map(|&(seed, episode)| {
                let es = episode_seed(seed, episode);
                let report = run_episode(config, sample_episode(config, es), policy, es)?;
                Ok(BatchEpisode {
                    seed,
                    episode,
                    report,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(BatchReport::from_episodes(
        policy.name(),
        config.fingerprint(),
        episodes,
    ))
}

/// One CSV row per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub policy: String,
    pub seed: u64,
    pub episode: u64,
    pub damage_pct: f64,
    pub tracking_pct: f64,
    pub utilization_pct: f64,
    pub steps: u32,
}

pub const CSV_HEADER: [&str; 7] = [
    "policy",
    "seed",
    "episode",
    "damage_pct",
    "tracking_pct",
    "utilization_pct",
    "steps",
];

pub fn csv_rows(report: &BatchReport) -> Vec<CsvRow> {
    report
        .episodes
        .iter()
        .map(|e| CsvRow {
            policy: report.policy.clone(),
            seed: e.seed,
            episode: e.episode,
            damage_pct: e.report.damage_pct,
            tracking_pct: e.report.tracking_pct,
            utilization_pct: e.report.utilization_pct,
            steps: e.report.steps,
        })
        .collect()
}

/// Floats are written in shortest round-trip form, so the file reproduces
/// the in-memory values exactly.
pub fn export_csv(report: &BatchReport, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(file));
    w.write_record(CSV_HEADER)?;
    for row in csv_rows(report) {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn export_replay(records: &[ReplayRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_replay(BufWriter::new(file), records)
}

pub fn export_summary(report: &BatchReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&report.summary())?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::policies::{HeuristicPolicy, RandomPolicy};
    use crate::scenario::{DroneSpec, PowerClass, SizeClass};

    fn trace(tracking: [bool; 2], busy: [bool; 2], steps: usize) -> Vec<TraceStep> {
        (0..steps)
            .map(|_| TraceStep {
                tracking: tracking.to_vec(),
                busy: busy.to_vec(),
            })
            .collect()
    }

    #[test]
    fn metric_fixtures() {
        assert_eq!(tracking_pct(&[]), 0.0);
        assert_eq!(utilization_pct(&[]), 0.0);

        let never = trace([false, false], [false, false], 4);
        assert_eq!(tracking_pct(&never), 0.0);
        assert_eq!(utilization_pct(&never), 0.0);

        let always = trace([true, true], [true, true], 4);
        assert_eq!(tracking_pct(&always), 100.0);
        assert_eq!(utilization_pct(&always), 100.0);

        let half = trace([true, false], [false, true], 4);
        assert_eq!(tracking_pct(&half), 50.0);
        assert_eq!(utilization_pct(&half), 50.0);

        // 10 steps, 2 effectors, 7 tracking effector-steps.
        let mut t: Vec<TraceStep> = (0..10)
            .map(|_| TraceStep {
                tracking: vec![false, false],
                busy: vec![false, false],
            })
            .collect();
        for (i, m) in [(0, 0), (1, 0), (2, 0), (3, 1), (4, 1), (5, 0), (9, 1)] {
            t[i].tracking[m] = true;
        }
        assert_eq!(tracking_pct(&t), 35.0);

        // One effector, 60 steps, one fire cycle of 1 + 5 busy steps.
        let t: Vec<TraceStep> = (0..60)
            .map(|i| TraceStep {
                tracking: vec![true],
                busy: vec![(10..16).contains(&i)],
            })
            .collect();
        assert_eq!(utilization_pct(&t), 10.0);
    }

    #[test]
    fn drone_missing_every_zone_does_no_damage() {
        let config = ScenarioConfig::default();
        let from = Vec3::new(config.spawn_box.max.x, 0.0, 30.0);
        let to = Vec3::new(config.target_box.max.x, config.domain_box.max.y - 1.0, 0.0);
        assert!(crate::scenario::zone_at(&config.zones, to).is_none());
        let mut c = config.clone();
        c.swarm.n_drones = 1;
        let drone = DroneSpec {
            speed: 40.0,
            size: SizeClass::Medium,
            power: PowerClass::High,
            target: to,
            path: vec![from, to],
            path_length: from.distance(to),
        };
        let setup = EpisodeSetup::from_drones(5, vec![drone], &c.zones);
        assert_eq!(setup.max_damage, 0.0);
        for policy in [&RandomPolicy as &dyn Policy, &HeuristicPolicy] {
            let r = run_episode(&c, setup.clone(), policy, 5).unwrap();
            assert_eq!(r.damage_pct, 0.0);
            assert_eq!(r.episode_return, 0.0);
        }
    }

    #[test]
    fn report_invariants_hold() {
        let c = ScenarioConfig::default();
        let r = run_episode(&c, sample_episode(&c, 9), &RandomPolicy, 9).unwrap();
        for v in [r.damage_pct, r.tracking_pct, r.utilization_pct] {
            assert!((0.0..=100.0).contains(&v), "{v}");
        }
        assert!((r.damage_pct + 100.0 * r.episode_return).abs() < 1e-9);
        assert!(r.steps <= c.max_steps);
    }

    #[test]
    fn batch_is_deterministic_and_worker_independent() {
        let c = ScenarioConfig {
            max_steps: 60,
            ..Default::default()
        };
        let a = run_batch(&c, &RandomPolicy, 3, &[0, 1], 1).unwrap();
        let b = run_batch(&c, &RandomPolicy, 3, &[0, 1], 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.episodes.len(), 6);
        assert_eq!(a.per_seed.len(), 2);
        assert!(run_batch(&c, &RandomPolicy, 0, &[0], 1).is_err());

        let mean = a.episodes.iter().map(|e| e.report.damage_pct).sum::<f64>() / 6.0;
        assert_eq!(a.overall.damage_pct.mean, mean);
    }

    #[test]
    fn sample_std_matches_hand_computation() {
        let s = MetricSummary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(MetricSummary::of(&[7.0]).std, 0.0);
    }

    #[test]
    fn csv_round_trip_and_empty_batch() {
        let dir = tempfile::tempdir().unwrap();
        let empty = BatchReport::from_episodes("random".into(), "x".into(), Vec::new());
        let path = dir.path().join("empty.csv");
        export_csv(&empty, &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap().trim_end(),
            CSV_HEADER.join(",")
        );
        assert!(read_csv(&path).unwrap().is_empty());

        let c = ScenarioConfig {
            max_steps: 40,
            ..Default::default()
        };
        let report = run_batch(&c, &HeuristicPolicy, 2, &[4, 5], 2).unwrap();
        let path = dir.path().join("batch.csv");
        export_csv(&report, &path).unwrap();
        let rows = read_csv(&path).unwrap();
        assert_eq!(rows, csv_rows(&report));
        let recomputed =
            MetricSummary::of(&rows.iter().map(|r| r.tracking_pct).collect::<Vec<_>>());
        assert_eq!(recomputed, report.overall.tracking_pct);
    }
}
