//! Phase 1 for batches of measurements with nearly equal launch angles.
//!
//! Neighbouring transmitter directions reflect off nearby boundary points, so
//! the receiver directions that worked for one member are a good starting
//! point for the next. Each member after the first searches a small patch of
//! the receiver grid around the previous solution and widens it on a miss.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::angles::{angle_diff, GridIndex};
use crate::dataset::{DataPoint, DEFAULT_PAIR_QUANTUM};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::medium::SpeedField;
use crate::reconstruct::{
    find_candidates_over, CandidateSolution, PointReport, PointStatus, ReconstructionConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedingConfig {
    /// Largest launch-angle distance allowed within a batch (rad).
    pub eps0: f64,
    /// Neighbourhood radius tried first, in grid steps.
    pub initial_radius: usize,
}

impl Default for SeedingConfig {
    fn default() -> Self {
        Self {
            eps0: 0.2,
            initial_radius: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeededResult {
    /// `data_point` indexes into the batch.
    pub candidates: Vec<CandidateSolution>,
    pub reports: Vec<PointReport>,
    /// Neighbourhood radius that produced each member's result; `None` for a
    /// full-grid search.
    pub radii: Vec<Option<usize>>,
}

fn launch_distance(a: &DataPoint, b: &DataPoint) -> f64 {
    (a.phi - b.phi).hypot(angle_diff(a.theta, b.theta))
}

pub fn validate_batch(batch: &[DataPoint], eps0: f64) -> Result<()> {
    let Some(first) = batch.first() else {
        return Err(Error::InvalidBatch("batch is empty".into()));
    };
    let key = first.pair_key(DEFAULT_PAIR_QUANTUM);
    if let Some(k) = batch
        .iter()
        .position(|b| b.pair_key(DEFAULT_PAIR_QUANTUM) != key)
    {
        return Err(Error::InvalidBatch(format!(
            "member {k} uses a different transmitter/receiver pair"
        )));
    }
    for (i, a) in batch.iter().enumerate() {
        for (j, b) in batch.iter().enumerate().skip(i + 1) {
            let d = launch_distance(a, b);
            if d > eps0 {
                return Err(Error::InvalidBatch(format!(
                    "members {i} and {j} launch {d} rad apart, more than eps0 = {eps0}"
                )));
            }
        }
    }
    Ok(())
}

/// Solves a batch, optionally starting from known receiver angles `seed`
/// instead of a full search for the first member.
pub fn seeded_find_candidates(
    batch: &[DataPoint],
    field: &SpeedField,
    dom: &Domain,
    cfg: &ReconstructionConfig,
    seeding: &SeedingConfig,
    seed: Option<&[(f64, f64)]>,
) -> Result<SeededResult> {
    validate_batch(batch, seeding.eps0)?;
    let grid = &cfg.grid;
    let full = grid.indices();
    let tol = 1e-9;
    let to_indices = |angles: &mut dyn Iterator<Item = (f64, f64)>| -> Vec<GridIndex> {
        angles
            .filter_map(|(p, t)| grid.locate(p, t, tol))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    };
    let mut seeds: Vec<GridIndex> =
        seed.map_or_else(Vec::new, |s| to_indices(&mut s.iter().copied()));

    let mut out = SeededResult {
        candidates: Vec::new(),
        reports: Vec::new(),
        radii: Vec::new(),
    };
    for (k, b) in batch.iter().enumerate() {
        let attempt = if seeds.is_empty() {
            find_candidates_over(b, &full, field, dom, cfg).map(|(c, _)| (c, None))
        } else {
            search_around(b, &seeds, seeding.initial_radius, field, dom, cfg)
        };
        let status = match attempt {
            Ok((mut c, radius)) => {
                c.iter_mut().for_each(|c| c.data_point = k);
                if !c.is_empty() {
                    seeds = to_indices(&mut c.iter().map(|c| (c.receiver_phi, c.receiver_theta)));
                }
                out.radii.push(radius);
                let status = if c.is_empty() {
                    PointStatus::NoSolution
                } else {
                    PointStatus::Solved
                };
                out.reports.push(PointReport {
                    data_point: k,
                    status: status.clone(),
                    candidates: c.len(),
                    n_phi: grid.n_phi,
                    n_theta: grid.n_theta,
                });
                out.candidates.extend(c);
                continue;
            }
            Err(e) => {
                log::warn!("batch member {k} skipped: {e}");
                PointStatus::from_error(&e)
            }
        };
        out.radii.push(None);
        out.reports.push(PointReport {
            data_point: k,
            status,
            candidates: 0,
            n_phi: grid.n_phi,
            n_theta: grid.n_theta,
        });
    }
    Ok(out)
}

/// Searches growing grid patches around `seeds` until something is found or
/// the patch covers the whole grid.
fn search_around(
    b: &DataPoint,
    seeds: &[GridIndex],
    initial_radius: usize,
    field: &SpeedField,
    dom: &Domain,
    cfg: &ReconstructionConfig,
) -> Result<(Vec<CandidateSolution>, Option<usize>)> {
    let grid = &cfg.grid;
    let cover = grid.covering_radius();
    let mut radius = initial_radius.max(1);
    loop {
        let patch: Vec<GridIndex> = seeds
            .iter()
            .flat_map(|s| grid.neighborhood(*s, radius))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let (c, _) = find_candidates_over(b, &patch, field, dom, cfg)?;
        if !c.is_empty() || radius >= cover {
            return Ok((c, Some(radius)));
        }
        log::debug!("seed patch of radius {radius} missed, widening");
        radius *= 2;
    }
}
