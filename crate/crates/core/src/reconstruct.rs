//! Phase 1: candidate reflection points from single measurements.
//!
//! The transmitter ray of a data point is marched up to its travel time. Every
//! receiver launch direction in the configured grid is marched too, and each
//! pair of points (transmitter point at `T_s`, receiver point at `T_p`) with
//! `|T_s + T_p - t_k| < eps2` and distance below `eps1` is a match. Matches are
//! then collapsed so that one crossing of the transmitter ray with the
//! constant-travel-time surface yields one candidate.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angles::{AngleGrid, GridIndex};
use crate::dataset::DataPoint;
use crate::error::{Error, Result};
use crate::geometry::{Domain, Point3};
use crate::medium::SpeedField;
use crate::ray::{march, RayState, StepControl, TraceStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Refinement {
    pub enabled: bool,
    pub max_doublings: usize,
    /// Refinement stops once the grid's angle step would fall below this (rad).
    pub min_step: f64,
}

impl Default for Refinement {
    fn default() -> Self {
        Self {
            enabled: false,
            max_doublings: 4,
            min_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    /// Intersection distance tolerance (m).
    pub eps1: f64,
    /// Travel-time tolerance (s).
    pub eps2: f64,
    pub grid: AngleGrid,
    pub max_transmitter_steps: usize,
    pub max_receiver_steps: usize,
    pub ctl: StepControl,
    pub refinement: Refinement,
}

impl ReconstructionConfig {
    pub fn new(grid: AngleGrid) -> Self {
        Self {
            eps1: 1e-2,
            eps2: 1e-3,
            grid,
            max_transmitter_steps: 1_000_000,
            max_receiver_steps: 1_000_000,
            ctl: StepControl::default(),
            refinement: Refinement::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps1 > 0.0 && self.eps2 > 0.0) {
            return Err(Error::InvalidConfig(
                "eps1 and eps2 must be positive".into(),
            ));
        }
        self.grid.validate()?;
        self.ctl.validate()
    }
}

/// A possible reflection point found for one data point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSolution {
    pub data_point: usize,
    /// Point on the transmitter ray.
    pub point: Point3,
    pub t_transmitter: f64,
    pub t_receiver: f64,
    pub receiver_phi: f64,
    pub receiver_theta: f64,
    /// Distance between the matched transmitter and receiver points (m).
    pub distance: f64,
    /// Travel-time residual after sliding the receiver time to the point of
    /// the receiver ray nearest `point` (s).
    pub corrected_residual: f64,
}

impl CandidateSolution {
    /// `t_transmitter + t_receiver - t_k`.
    pub fn time_residual(&self, t_k: f64) -> f64 {
        self.t_transmitter + self.t_receiver - t_k
    }
}

/// Counters collected during one phase-1 run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub transmitter_points: usize,
    pub receiver_rays: usize,
    pub receiver_points: usize,
    pub comparisons: u64,
    /// Budget the receiver marches were given (s).
    pub receiver_budget: f64,
    /// Latest receiver time actually reached (s).
    pub max_receiver_time: f64,
    /// Largest `T_s + T_p` that was compared (s).
    pub max_scanned_total: f64,
}

/// A pair of nearby points whose times add up to the measured travel time.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Match {
    pub s: usize,
    pub point: Point3,
    pub t_tx: f64,
    pub t_rx: f64,
    pub rx_phi: f64,
    pub rx_theta: f64,
    pub distance: f64,
    pub corrected: f64,
}

/// `T_s + T_p + ((P - Q)·v)/|v|² - t_k`, with `v` the receiver ray velocity at Q.
pub(crate) fn corrected_residual(
    p: &Point3,
    t_tx: f64,
    q: &Point3,
    t_rx: f64,
    v: &Point3,
    t_k: f64,
) -> f64 {
    let vv = v.norm_squared();
    let slide = if vv > 0.0 { (p - q).dot(v) / vv } else { 0.0 };
    t_tx + t_rx + slide - t_k
}

/// Collapses raw matches into one candidate per crossing.
pub(crate) fn consolidate(
    mut matches: Vec<Match>,
    eps1: f64,
    data_point: usize,
) -> Vec<CandidateSolution> {
    let better = |a: &Match, b: &Match| {
        a.corrected
            .abs()
            .total_cmp(&b.corrected.abs())
            .then(a.distance.total_cmp(&b.distance))
            .then(a.rx_phi.total_cmp(&b.rx_phi))
            .then(a.rx_theta.total_cmp(&b.rx_theta))
            .then(a.t_rx.total_cmp(&b.t_rx))
    };
    // best match per transmitter point
    matches.sort_by(|a, b| a.s.cmp(&b.s).then(better(a, b)));
    matches.dedup_by_key(|m| m.s);

    // runs of consecutive transmitter points are one crossing
    let mut reps: Vec<Match> = Vec::new();
    let mut run: Option<(Match, Match)> = None; // (last member, best member)
    for m in matches {
        run = match run {
            Some((last, best)) if m.s == last.s + 1 && (m.point - last.point).norm() < eps1 => {
                let best = if better(&m, &best).is_lt() { m } else { best };
                Some((m, best))
            }
            Some((_, best)) => {
                reps.push(best);
                Some((m, m))
            }
            None => Some((m, m)),
        };
    }
    if let Some((_, best)) = run {
        reps.push(best);
    }

    reps.sort_by(better);
    let mut kept: Vec<Match> = Vec::new();
    for r in reps {
        if kept.iter().all(|k| (k.point - r.point).norm() >= eps1) {
            kept.push(r);
        }
    }
    kept.sort_by_key(|m| m.s);
    kept.into_iter()
        .map(|m| CandidateSolution {
            data_point,
            point: m.point,
            t_transmitter: m.t_tx,
            t_receiver: m.t_rx,
            receiver_phi: m.rx_phi,
            receiver_theta: m.rx_theta,
            distance: m.distance,
            corrected_residual: m.corrected,
        })
        .collect()
}

pub(crate) fn check_endpoints(b: &DataPoint, dom: &Domain) -> Result<()> {
    for (what, p) in [("transmitter", &b.transmitter), ("receiver", &b.receiver)] {
        if !dom.contains(p) {
            return Err(Error::OutsideDomain {
                what,
                x: p.x,
                y: p.y,
                z: p.z,
            });
        }
    }
    if !(b.t > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "travel time must be positive, got {}",
            b.t
        )));
    }
    Ok(())
}

/// States of the transmitter ray after the launch point.
pub(crate) fn transmitter_states(
    b: &DataPoint,
    field: &SpeedField,
    dom: &Domain,
    cfg: &ReconstructionConfig,
) -> Result<Vec<RayState>> {
    check_endpoints(b, dom)?;
    let start = RayState::new(b.transmitter, b.phi, b.theta);
    let path =
        march(start, b.t, cfg.max_transmitter_steps, &cfg.ctl, dom, field).map_err(|i| i.error)?;
    if path.status == TraceStatus::ExitedDomain {
        return Err(Error::MeasurementError { t: path.last().t });
    }
    Ok(path.states[1..].to_vec())
}

struct ReceiverRay {
    phi: f64,
    theta: f64,
    states: Vec<RayState>,
    /// Speed at each state, for the corrected residual.
    speeds: Vec<f64>,
}

fn trace_receivers(
    b: &DataPoint,
    directions: &[GridIndex],
    budget: f64,
    field: &SpeedField,
    dom: &Domain,
    cfg: &ReconstructionConfig,
) -> Vec<ReceiverRay> {
    directions
        .par_iter()
        .filter_map(|idx| {
            let (phi, theta) = cfg.grid.angles_at(*idx)?;
            let start = RayState::new(b.receiver, phi, theta);
            // a receiver ray that fails midway still contributes what it traced
            let path = match march(start, budget, cfg.max_receiver_steps, &cfg.ctl, dom, field) {
                Ok(p) => p,
                Err(i) => i.path,
            };
            let states = path.states[1..].to_vec();
            let speeds = states
                .iter()
                .map(|s| field.speed(&s.pos).unwrap_or(0.0))
                .collect();
            Some(ReceiverRay {
                phi,
                theta,
                states,
                speeds,
            })
        })
        .collect()
}

/// Phase 1 over an explicit subset of receiver directions.
pub(crate) fn find_candidates_over(
    b: &DataPoint,
    directions: &[GridIndex],
    field: &SpeedField,
    dom: &Domain,
    cfg: &ReconstructionConfig,
) -> Result<(Vec<CandidateSolution>, PhaseStats)> {
    let tx = transmitter_states(b, field, dom, cfg)?;
    let mut stats = PhaseStats {
        transmitter_points: tx.len(),
        ..PhaseStats::default()
    };
    let Some(first) = tx.first() else {
        return Ok((Vec::new(), stats));
    };
    let (t_k, eps1, eps2) = (b.t, cfg.eps1, cfg.eps2);
    let budget = t_k + eps2 - first.t;
    stats.receiver_budget = budget;
    let rays = trace_receivers(b, directions, budget, field, dom, cfg);
    stats.receiver_rays = rays.len();
    stats.receiver_points = rays.iter().map(|r| r.states.len()).sum();
    stats.max_receiver_time = rays
        .iter()
        .filter_map(|r| r.states.last().map(|s| s.t))
        .fold(0.0, f64::max);

    let per_point: Vec<(Vec<Match>, u64, f64)> = tx
        .par_iter()
        .enumerate()
        .map(|(s, p)| {
            let mut found = Vec::new();
            let mut comparisons = 0u64;
            let mut max_total = 0.0f64;
            for ray in &rays {
                for (q, speed) in ray.states.iter().zip(&ray.speeds) {
                    let total = p.t + q.t;
                    if total > t_k + eps2 {
                        break;
                    }
                    comparisons += 1;
                    max_total = max_total.max(total);
                    if (total - t_k).abs() >= eps2 {
                        continue;
                    }
                    let distance = (p.pos - q.pos).norm();
                    if distance >= eps1 {
                        continue;
                    }
                    let v = q.direction() * *speed;
                    found.push(Match {
                        s,
                        point: p.pos,
                        t_tx: p.t,
                        t_rx: q.t,
                        rx_phi: ray.phi,
                        rx_theta: ray.theta,
                        distance,
                        corrected: corrected_residual(&p.pos, p.t, &q.pos, q.t, &v, t_k),
                    });
                }
            }
            (found, comparisons, max_total)
        })
        .collect();

    let mut matches = Vec::new();
    for (m, c, total) in per_point {
        matches.extend(m);
        stats.comparisons += c;
        stats.max_scanned_total = stats.max_scanned_total.max(total);
    }
    Ok((consolidate(matches, eps1, 0), stats))
}

/// Brute-force phase 1 for one data point over the full receiver grid.
pub fn find_candidates(
    b: &DataPoint,
    field: &SpeedField,
    dom: &Domain,
    cfg: &ReconstructionConfig,
) -> Result<Vec<CandidateSolution>> {
    Ok(find_candidates_with_stats(b, field, dom, cfg)?.0)
}

pub fn find_candidates_with_stats(
    b: &DataPoint,
    field: &SpeedField,
    dom: &Domain,
    cfg: &ReconstructionConfig,
) -> Result<(Vec<CandidateSolution>, PhaseStats)> {
    find_candidates_over(b, &cfg.grid.indices(), field, dom, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointStatus {
    Solved,
    NoSolution,
    MeasurementError,
    StepUnderflow,
    Failed(String),
}

impl PointStatus {
    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::MeasurementError { .. } => PointStatus::MeasurementError,
            Error::StepUnderflow { .. } => PointStatus::StepUnderflow,
            other => PointStatus::Failed(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub data_point: usize,
    pub status: PointStatus,
    pub candidates: usize,
    /// Receiver grid that produced the result, after any refinement.
    pub n_phi: usize,
    pub n_theta: usize,
}

/// Runs `solve` on every data point in parallel and gathers candidates in
/// data-point order. Failures are logged and reported, never fatal.
pub fn run_all<F>(data: &[DataPoint], solve: F) -> (Vec<CandidateSolution>, Vec<PointReport>)
where
    F: Fn(usize, &DataPoint) -> (Result<Vec<CandidateSolution>>, AngleGrid) + Sync,
{
    let results: Vec<_> = data
        .par_iter()
        .enumerate()
        .map(|(k, b)| (k, solve(k, b)))
        .collect();
    let mut cands = Vec::new();
    let mut reports = Vec::with_capacity(data.len());
    for (k, (res, grid)) in results {
        let status = match res {
            Ok(mut c) => {
                c.iter_mut().for_each(|c| c.data_point = k);
                let n = c.len();
                cands.extend(c);
                if n > 0 {
                    PointStatus::Solved
                } else {
                    PointStatus::NoSolution
                }
            }
            Err(e) => {
                log::warn!("data point {k} skipped: {e}");
                PointStatus::from_error(&e)
            }
        };
        let candidates = cands.iter().rev().take_while(|c| c.data_point == k).count();
        reports.push(PointReport {
            data_point: k,
            status,
            candidates,
            n_phi: grid.n_phi,
            n_theta: grid.n_theta,
        });
    }
    (cands, reports)
}

/// Phase 1 over a whole dataset, using refinement when the config enables it.
pub fn reconstruct_all(
    data: &[DataPoint],
    field: &SpeedField,
    dom: &Domain,
    cfg: &ReconstructionConfig,
) -> (Vec<CandidateSolution>, Vec<PointReport>) {
    run_all(data, |_, b| {
        if cfg.refinement.enabled {
            let r = refine_angles(b, field, dom, cfg);
            match r {
                Ok(r) => (Ok(r.candidates), r.grid),
                Err(e) => (Err(e), cfg.grid),
            }
        } else {
            (find_candidates(b, field, dom, cfg), cfg.grid)
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub candidates: Vec<CandidateSolution>,
    pub grid: AngleGrid,
    pub doublings: usize,
    pub status: PointStatus,
}

/// Retries phase 1 with doubled receiver grids while nothing is found.
pub fn refine_angles(
    b: &DataPoint,
    field: &SpeedField,
    dom: &Domain,
    cfg: &ReconstructionConfig,
) -> Result<Refined> {
    let mut cfg = cfg.clone();
    let mut doublings = 0;
    loop {
        let candidates = find_candidates(b, field, dom, &cfg)?;
        if !candidates.is_empty() {
            return Ok(Refined {
                candidates,
                grid: cfg.grid,
                doublings,
                status: PointStatus::Solved,
            });
        }
        let next = cfg.grid.doubled();
        if doublings >= cfg.refinement.max_doublings || next.angle_step() < cfg.refinement.min_step
        {
            return Ok(Refined {
                candidates,
                grid: cfg.grid,
                doublings,
                status: PointStatus::NoSolution,
            });
        }
        log::debug!(
            "no candidate at {}x{} receiver angles, doubling",
            cfg.grid.n_phi,
            cfg.grid.n_theta
        );
        cfg.grid = next;
        doublings += 1;
    }
}

/// Wall-clock seconds spent in `f`.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

    use super::*;

    fn big_box() -> Domain {
        Domain::new_box(Point3::new(-5.0, -5.0, -5.0), Point3::new(5.0, 5.0, 5.0)).unwrap()
    }

    fn point(l: Point3, s: Point3, phi: f64, theta: f64, t: f64) -> DataPoint {
        DataPoint {
            transmitter: l,
            receiver: s,
            phi,
            theta,
            t,
            xi: 1.0,
            period: "P".into(),
            truth: None,
        }
    }

    fn cfg(grid: AngleGrid) -> ReconstructionConfig {
        ReconstructionConfig {
            ctl: StepControl {
                h_init: 2e-3,
                ..StepControl::default()
            },
            ..ReconstructionConfig::new(grid)
        }
    }

    #[test]
    fn straight_retro_single_candidate() {
        let f = SpeedField::constant(1.0).unwrap();
        let b = point(Point3::zeros(), Point3::zeros(), FRAC_PI_2, 0.0, 2.0);
        let c = find_candidates(&b, &f, &big_box(), &cfg(AngleGrid::planar(16))).unwrap();
        assert_eq!(c.len(), 1, "{c:?}");
        assert!((c[0].point - Point3::new(1.0, 0.0, 0.0)).norm() < 1e-2);
        assert!((c[0].t_transmitter - 1.0).abs() < 2e-3);
        assert!((c[0].t_receiver - 1.0).abs() < 2e-3);
    }

    #[test]
    fn curved_retro_matches_closed_form() {
        let f = SpeedField::affine_xy(1.0, 1.0, 1.0).unwrap();
        let b = point(Point3::zeros(), Point3::zeros(), FRAC_PI_2, FRAC_PI_4, 2.0);
        let grid = AngleGrid::planar_sector(0.0, FRAC_PI_2, 8);
        // the transmitter ray runs on to t = 2, near (7.96, 7.96)
        let dom =
            Domain::new_box(Point3::new(-0.5, -0.5, -1.0), Point3::new(10.0, 10.0, 1.0)).unwrap();
        let c = find_candidates(&b, &f, &dom, &cfg(grid)).unwrap();
        assert_eq!(c.len(), 1);
        let x = ((SQRT_2).exp() - 1.0) / 2.0;
        assert!((c[0].point.x - x).abs() / x < 1e-2);
        assert!((c[0].point.y - x).abs() / x < 1e-2);
    }

    #[test]
    fn ellipse_candidate() {
        let f = SpeedField::constant(1.0).unwrap();
        let b = point(
            Point3::zeros(),
            Point3::new(2.0, 0.0, 0.0),
            FRAC_PI_2,
            FRAC_PI_2,
            4.0,
        );
        // receiver must leave at atan2(1.5, -2)
        let target = 1.5f64.atan2(-2.0);
        let grid = AngleGrid::planar_sector(target - 0.05, target + 0.05, 20);
        let (c, stats) = find_candidates_with_stats(&b, &f, &big_box(), &cfg(grid)).unwrap();
        assert_eq!(c.len(), 1, "{c:?}");
        assert!((c[0].point - Point3::new(0.0, 1.5, 0.0)).norm() < 1e-2);
        assert!((c[0].t_transmitter - 1.5).abs() < 1e-2);
        assert!((c[0].t_receiver - 2.5).abs() < 1e-2);
        assert!(stats.max_scanned_total <= 4.0 + 1e-3);
        assert!(stats.max_receiver_time <= stats.receiver_budget + 1e-12);
    }

    #[test]
    fn every_candidate_passes_both_tests() {
        let f = SpeedField::affine_xy(0.5, 0.3, 1.0).unwrap();
        let b = point(
            Point3::new(0.1, 0.0, 0.0),
            Point3::new(0.6, 0.0, 0.0),
            FRAC_PI_2,
            1.1,
            2.2,
        );
        let c = cfg(AngleGrid::planar(64));
        for cand in find_candidates(&b, &f, &big_box(), &c).unwrap() {
            assert!(cand.time_residual(b.t).abs() < c.eps2);
            assert!(cand.distance < c.eps1);
        }
    }

    #[test]
    fn transmitter_exit_is_measurement_error() {
        let f = SpeedField::constant(1.0).unwrap();
        let b = point(Point3::zeros(), Point3::zeros(), FRAC_PI_2, 0.0, 20.0);
        assert!(matches!(
            find_candidates(&b, &f, &big_box(), &cfg(AngleGrid::planar(4))),
            Err(Error::MeasurementError { .. })
        ));
    }

    #[test]
    fn reconstruct_all_isolates_failures() {
        let f = SpeedField::constant(1.0).unwrap();
        let good = point(Point3::zeros(), Point3::zeros(), FRAC_PI_2, 0.0, 2.0);
        let bad = point(
            Point3::new(9.0, 0.0, 0.0),
            Point3::zeros(),
            FRAC_PI_2,
            0.0,
            2.0,
        );
        let data = vec![bad, good.clone(), good];
        let (cands, reports) = reconstruct_all(&data, &f, &big_box(), &cfg(AngleGrid::planar(16)));
        assert_eq!(reports.len(), 3);
        assert!(matches!(reports[0].status, PointStatus::Failed(_)));
        assert_eq!(reports[1].status, PointStatus::Solved);
        assert_eq!(
            cands.iter().map(|c| c.data_point).collect::<Vec<_>>(),
            vec![1, 2]
        );
        assert!(
            reconstruct_all(&[], &f, &big_box(), &cfg(AngleGrid::planar(4)))
                .0
                .is_empty()
        );
    }

    #[test]
    fn refinement_finds_missed_direction() {
        let f = SpeedField::constant(1.0).unwrap();
        // the receiver must launch at theta = pi/2; the offset grid skips it
        // at 8 azimuths and contains it at 16
        let b = point(
            Point3::new(0.0, -1.0, 0.0),
            Point3::zeros(),
            FRAC_PI_2,
            FRAC_PI_2,
            2.0,
        );
        let offset = PI / 8.0;
        let grid = AngleGrid {
            theta_min: FRAC_PI_2 - offset,
            theta_max: FRAC_PI_2 - offset + 2.0 * PI,
            ..AngleGrid::planar(8)
        };
        let mut c = cfg(grid);
        assert!(find_candidates(&b, &f, &big_box(), &c).unwrap().is_empty());
        c.refinement = Refinement {
            enabled: true,
            max_doublings: 3,
            min_step: 1e-3,
        };
        let r = refine_angles(&b, &f, &big_box(), &c).unwrap();
        assert_eq!(r.status, PointStatus::Solved);
        assert_eq!(r.doublings, 1);
        assert!((r.candidates[0].point - Point3::new(0.0, 0.5, 0.0)).norm() < 1e-2);
    }

    #[test]
    fn refinement_not_needed_when_found() {
        let f = SpeedField::constant(1.0).unwrap();
        let b = point(Point3::zeros(), Point3::zeros(), FRAC_PI_2, 0.0, 2.0);
        let mut c = cfg(AngleGrid::planar(8));
        c.refinement.enabled = true;
        let r = refine_angles(&b, &f, &big_box(), &c).unwrap();
        assert_eq!((r.doublings, r.status), (0, PointStatus::Solved));
    }

    #[test]
    fn refinement_gives_up_at_min_step() {
        let f = SpeedField::constant(1.0).unwrap();
        // receiver far off to the side, no direction can match within a tiny grid sector
        let b = point(
            Point3::zeros(),
            Point3::new(0.0, 3.0, 0.0),
            FRAC_PI_2,
            0.0,
            2.0,
        );
        let mut c = cfg(AngleGrid::planar_sector(4.0, 4.1, 2));
        c.refinement = Refinement {
            enabled: true,
            max_doublings: 10,
            min_step: 0.01,
        };
        let r = refine_angles(&b, &f, &big_box(), &c).unwrap();
        assert!(r.candidates.is_empty());
        assert_eq!(r.status, PointStatus::NoSolution);
        assert!(r.grid.angle_step() >= 0.01);
    }

    #[test]
    fn consolidate_keeps_one_per_crossing() {
        let m = |s: usize, x: f64, corrected: f64| Match {
            s,
            point: Point3::new(x, 0.0, 0.0),
            t_tx: x,
            t_rx: 1.0,
            rx_phi: FRAC_PI_2,
            rx_theta: 0.0,
            distance: 0.0,
            corrected,
        };
        let out = consolidate(
            vec![
                m(3, 0.003, 0.002),
                m(1, 0.001, 0.005),
                m(2, 0.002, -0.0001),
                m(9, 0.5, 0.0),
            ],
            1e-2,
            4,
        );
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].point.x, 0.002);
        assert_eq!(out[1].point.x, 0.5);
        assert!(out.iter().all(|c| c.data_point == 4));
    }
}
