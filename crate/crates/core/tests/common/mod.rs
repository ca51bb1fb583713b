#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use obstacle_recon::angles::AngleGrid;
use obstacle_recon::config::PipelineConfig;
use obstacle_recon::dataset::DataPoint;
use obstacle_recon::reconstruct::{CandidateSolution, ReconstructionConfig};
use obstacle_recon::{Domain, Point3};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

pub fn load_config(name: &str, overrides: &[&str]) -> PipelineConfig {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    PipelineConfig::load(config_path(name), &o).unwrap()
}

/// (T, xp, yp) rows of the reference table for a point moving along x = y.
pub const TABLE1: [(f64, f64, f64); 8] = [
    (0.25, 0.09, 0.09),
    (0.5, 0.21, 0.21),
    (0.75, 0.35, 0.35),
    (1.0, 0.51, 0.51),
    (1.25, 0.71, 0.71),
    (1.5, 0.94, 0.94),
    (1.75, 1.22, 1.23),
    (2.0, 1.55, 1.55),
];

/// (theta, T, xp, yp) rows of the reference table for one obstacle snapshot.
pub const TABLE2: [(f64, f64, f64, f64); 6] = [
    (0.78, 1.55, 1.00, 0.99),
    (0.75, 1.56, 1.07, 0.92),
    (0.71, 1.58, 1.15, 0.86),
    (0.68, 1.61, 1.24, 0.81),
    (0.66, 1.65, 1.32, 0.77),
    (0.64, 1.70, 1.42, 0.74),
];

/// Launch angles that land on the tabulated points before rounding.
pub const TABLE2_THETA: [f64; 6] = [
    0.7828794, 0.7477408, 0.7143004, 0.6844152, 0.6617492, 0.6424308,
];

/// Circle through the tabulated points, least squares.
pub const TABLE2_CENTER: [f64; 3] = [1.63046838, 1.57278373, 0.0];
pub const TABLE2_RADIUS: f64 = 0.85919169;

pub fn wide_box(half: f64) -> Domain {
    Domain::new_box(
        Point3::new(-half, -half, -1.0),
        Point3::new(half, half, 1.0),
    )
    .unwrap()
}

/// Bistatic measurements on the ellipse |LP| + |PS| = 4 in c = 1 with foci
/// at x = -1 and x = 1.
pub fn ellipse_data() -> Vec<DataPoint> {
    let l = Point3::new(-1.0, 0.0, 0.0);
    [1.45, 1.5, 1.55, 1.6]
        .iter()
        .map(|&theta| DataPoint {
            transmitter: l,
            receiver: Point3::new(1.0, 0.0, 0.0),
            phi: FRAC_PI_2,
            theta,
            t: 4.0,
            xi: 40_000.0,
            period: "E".into(),
            truth: None,
        })
        .collect()
}

pub fn ellipse_config() -> ReconstructionConfig {
    let mut c = ReconstructionConfig::new(AngleGrid::planar_sector(2.1, 2.8, 160));
    c.ctl.h_init = 2e-3;
    c
}

/// Largest distance in a perfect matching between `a` and `b` that pairs only
/// points closer than `tol`, or `None` when no such matching exists.
pub fn matched_within(a: &[Point3], b: &[Point3], tol: f64) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let n = a.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn augment(
        i: usize,
        a: &[Point3],
        b: &[Point3],
        tol: f64,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for j in 0..b.len() {
            if seen[j] || (a[i] - b[j]).norm() >= tol {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|k| augment(k, a, b, tol, seen, owner)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    for i in 0..n {
        let mut seen = vec![false; n];
        if !augment(i, a, b, tol, &mut seen, &mut owner) {
            return None;
        }
    }
    Some(
        owner
            .iter()
            .enumerate()
            .map(|(j, i)| (a[i.unwrap()] - b[j]).norm())
            .fold(0.0, f64::max),
    )
}

/// Candidate points grouped by data point.
pub fn by_data_point(cands: &[CandidateSolution], n: usize) -> Vec<Vec<Point3>> {
    let mut out = vec![Vec::new(); n];
    for c in cands {
        out[c.data_point].push(c.point);
    }
    out
}

/// Worst matching distance over all data points, `None` if any set differs.
pub fn equivalent(
    a: &[CandidateSolution],
    b: &[CandidateSolution],
    n: usize,
    tol: f64,
) -> Option<f64> {
    let (ga, gb) = (by_data_point(a, n), by_data_point(b, n));
    ga.iter()
        .zip(&gb)
        .map(|(x, y)| matched_within(x, y, tol))
        .try_fold(0.0, |acc: f64, d| d.map(|d| acc.max(d)))
}
