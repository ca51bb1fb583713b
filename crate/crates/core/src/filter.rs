//! Phase 2: keep only points that several transmitter/receiver pairs agree on.
//!
//! Candidates are clustered greedily within each sampling period. A cluster's
//! support is the number of distinct pairs among its members; clusters with
//! support below `q` are intangible and dropped.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::dataset::{DataPoint, PairKey, DEFAULT_PAIR_QUANTUM};
use crate::error::{Error, Result};
use crate::geometry::{lex_cmp, Point3};
use crate::reconstruct::CandidateSolution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Clustering radius (m).
    pub eps3: f64,
    /// Minimum number of distinct pairs.
    pub q: usize,
    /// Coordinate quantum that decides whether two pairs are the same (m).
    pub pair_quantum: f64,
}

impl FilterConfig {
    /// Defaults tied to the phase-1 distance tolerance: eps3 = 2·eps1, q = 3.
    pub fn for_eps1(eps1: f64) -> Self {
        Self {
            eps3: 2.0 * eps1,
            q: 3,
            pair_quantum: DEFAULT_PAIR_QUANTUM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps3 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eps3 must be positive, got {}",
                self.eps3
            )));
        }
        if self.q < 3 {
            return Err(Error::InvalidConfig(format!(
                "q must be at least 3, got {}",
                self.q
            )));
        }
        if !(self.pair_quantum > 0.0) {
            return Err(Error::InvalidConfig("pair quantum must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportCluster {
    pub period: String,
    pub representative: Point3,
    pub count: usize,
    /// Candidate indices, in seed order.
    pub members: Vec<usize>,
    pub pairs: Vec<PairKey>,
}

/// Candidate indices in canonical seed order, with each candidate's period.
fn seed_order<'a>(
    cands: &[CandidateSolution],
    data: &'a [DataPoint],
) -> Result<(Vec<usize>, Vec<&'a str>)> {
    let mut periods = Vec::with_capacity(cands.len());
    for (i, c) in cands.iter().enumerate() {
        let b = data.get(c.data_point).ok_or(Error::DanglingCandidate {
            candidate: i,
            data_point: c.data_point,
        })?;
        periods.push(b.period.as_str());
    }
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| {
        cands[a]
            .data_point
            .cmp(&cands[b].data_point)
            .then(lex_cmp(&cands[a].point, &cands[b].point))
            .then(a.cmp(&b))
    });
    Ok((order, periods))
}

fn make_cluster(
    seed: usize,
    members: Vec<usize>,
    cands: &[CandidateSolution],
    data: &[DataPoint],
    period: &str,
    cfg: &FilterConfig,
) -> SupportCluster {
    let pairs: BTreeSet<PairKey> = members
        .iter()
        .map(|&m| data[cands[m].data_point].pair_key(cfg.pair_quantum))
        .collect();
    SupportCluster {
        period: period.to_string(),
        representative: cands[seed].point,
        count: pairs.len(),
        members,
        pairs: pairs.into_iter().collect(),
    }
}

/// Reference clustering: every seed scans all remaining candidates.
pub fn cluster_and_count(
    cands: &[CandidateSolution],
    data: &[DataPoint],
    cfg: &FilterConfig,
) -> Result<Vec<SupportCluster>> {
    let (order, periods) = seed_order(cands, data)?;
    let mut assigned = vec![false; cands.len()];
    let mut clusters = Vec::new();
    for (k, &seed) in order.iter().enumerate() {
        if assigned[seed] {
            continue;
        }
        let p = cands[seed].point;
        let members: Vec<usize> = order[k..]
            .iter()
            .copied()
            .filter(|&j| {
                !assigned[j]
                    && periods[j] == periods[seed]
                    && (cands[j].point - p).norm() <= cfg.eps3
            })
            .collect();
        for &m in &members {
            assigned[m] = true;
        }
        clusters.push(make_cluster(seed, members, cands, data, periods[seed], cfg));
    }
    Ok(clusters)
}

type Cell = [i64; 3];

fn cell_of(p: &Point3, size: f64) -> Cell {
    [
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    ]
}

/// Same clusters as [`cluster_and_count`], with neighbours found through a
/// spatial hash of cell size eps3 so each seed only inspects 27 cells.
pub fn cluster_and_count_hashed(
    cands: &[CandidateSolution],
    data: &[DataPoint],
    cfg: &FilterConfig,
) -> Result<Vec<SupportCluster>> {
    let (order, periods) = seed_order(cands, data)?;
    let mut rank = vec![0usize; cands.len()];
    for (k, &i) in order.iter().enumerate() {
        rank[i] = k;
    }
    let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
    for &i in &order {
        cells
            .entry(cell_of(&cands[i].point, cfg.eps3))
            .or_default()
            .push(i);
    }
    let mut assigned = vec![false; cands.len()];
    let mut clusters = Vec::new();
    for &seed in &order {
        if assigned[seed] {
            continue;
        }
        let p = cands[seed].point;
        let c = cell_of(&p, cfg.eps3);
        let mut members = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                        continue;
                    };
                    members.extend(bucket.iter().copied().filter(|&j| {
                        !assigned[j]
                            && periods[j] == periods[seed]
                            && (cands[j].point - p).norm() <= cfg.eps3
                    }));
                }
            }
        }
        members.sort_by_key(|&j| rank[j]);
        for &m in &members {
            assigned[m] = true;
        }
        clusters.push(make_cluster(seed, members, cands, data, periods[seed], cfg));
    }
    Ok(clusters)
}

/// Clusters with enough support, ordered by period then lexicographically.
pub fn supported<'a>(
    clusters: &'a [SupportCluster],
    cfg: &FilterConfig,
) -> Vec<&'a SupportCluster> {
    let mut kept: Vec<&SupportCluster> = clusters.iter().filter(|c| c.count >= cfg.q).collect();
    kept.sort_by(|a, b| {
        a.period
            .cmp(&b.period)
            .then(lex_cmp(&a.representative, &b.representative))
    });
    if kept.is_empty() && !clusters.is_empty() {
        log::warn!(
            "no point is supported by {} distinct pairs; the scene may be under-instrumented",
            cfg.q
        );
    }
    kept
}

/// Representatives of clusters with support of at least `q`, sorted lexicographically.
pub fn filter_by_support(clusters: &[SupportCluster], cfg: &FilterConfig) -> Vec<Point3> {
    let mut pts: Vec<Point3> = supported(clusters, cfg)
        .into_iter()
        .map(|c| c.representative)
        .collect();
    pts.sort_by(lex_cmp);
    pts
}
