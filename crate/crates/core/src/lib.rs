//! Deterministic simulation engine and evaluation harness for defending
//! ground zones against a swarm of kamikaze drones with a small set of
//! azimuth/elevation effectors.
//!
//! The crate is organised bottom-up:
//!
//! - [`scenario`]: static configuration and seeded per-episode swarm sampling
//! - [`engine`]: fixed-step world update (drone motion, effector state
//!   machines, fire resolution, damage and reward)
//! - [`sensing`]: the defender's noisy view of the swarm
//! - [`encoding`]: flat normalized observations, action masks, action decoding
//! - [`policies`]: random, rule-based and MLP policies behind one trait
//! - [`env`]: reset/step wrapper shared by the evaluator and the step server
//! - [`evaluation`]: seeded episodes, batches, metrics, CSV and replay export
//! - [`stepserver`]: newline-delimited JSON reset/step protocol for external trainers

pub mod encoding;
pub mod engine;
pub mod env;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod policies;
pub mod rng;
pub mod scenario;
pub mod sensing;
pub mod stepserver;

pub use error::{Error, Result};
pub use geometry::Vec3;
