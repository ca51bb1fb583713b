//! End-to-end driver: simulate or load data, phase 1, phase 2, artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, PipelineConfig};
use crate::dataset::{save_data_points, DataPoint, DEFAULT_PAIR_QUANTUM};
use crate::error::{Error, Result};
use crate::filter::{cluster_and_count_hashed, supported, SupportCluster};
use crate::geometry::{lex_cmp, Point3};
use crate::medium::SpeedField;
use crate::ray::{trace_ray, RayState};
use crate::reconstruct::{
    find_candidates, reconstruct_all, run_all, timed, CandidateSolution, PointReport, PointStatus,
};
use crate::region::{build_cache, load_cache, optimized_find_candidates, RegionTable};
use crate::seeded::seeded_find_candidates;
use crate::simulate::{perturb_travel_times, sampling_delta, Simulator};
use crate::svg::{render, Outline, Plot};

pub fn simulate(cfg: &PipelineConfig, field: &SpeedField) -> Result<Vec<DataPoint>> {
    let (Some(sim_cfg), Some(ob)) = (&cfg.simulation, &cfg.obstacle) else {
        return Err(Error::InvalidConfig(
            "simulation needs [simulation] and [obstacle]".into(),
        ));
    };
    let mut sim = Simulator::new(field, &cfg.domain, cfg.step, sim_cfg.max_time);
    sim.eps_hit = sim_cfg.eps_hit;
    let mut data = Vec::new();
    for period in ob.trajectory.keys() {
        for pair in &cfg.pairs {
            let (l, s) = (Point3::from(pair.transmitter), Point3::from(pair.receiver));
            let angles = pair.launch_angles();
            let batch = if l == s {
                sim.generate_retro_data(&[l], &angles, ob, period, sim_cfg.xi)?
            } else {
                sim.generate_bistatic_data(l, s, &angles, ob, period, sim_cfg.xi)?
            };
            data.extend(batch);
        }
    }
    if sim_cfg.noise > 0.0 {
        perturb_travel_times(&mut data, sim_cfg.noise, cfg.seed);
    }
    Ok(data)
}

pub fn load_or_simulate(cfg: &PipelineConfig, field: &SpeedField) -> Result<Vec<DataPoint>> {
    match &cfg.input.dataset {
        Some(path) => crate::dataset::load_data_points(path),
        None => simulate(cfg, field),
    }
}

/// Receivers in order of first appearance.
fn distinct_receivers(data: &[DataPoint]) -> Vec<Point3> {
    let mut out: Vec<Point3> = Vec::new();
    for b in data {
        if !out.iter().any(|r| (r - b.receiver).norm() < 1e-9) {
            out.push(b.receiver);
        }
    }
    out
}

pub fn build_table(
    cfg: &PipelineConfig,
    data: &[DataPoint],
    field: &SpeedField,
) -> Result<RegionTable> {
    if let Some(path) = &cfg.mesh.cache {
        return load_cache(path);
    }
    let budget = cfg
        .mesh
        .budget
        .unwrap_or_else(|| data.iter().map(|b| b.t).fold(0.0, f64::max) + cfg.reconstruction.eps2);
    build_cache(
        &distinct_receivers(data),
        &cfg.receiver_grid,
        budget,
        cfg.mesh.n_r,
        &cfg.domain,
        field,
        &cfg.mesh_spec()?,
    )
}

/// Splits data into batches sharing period and pair, with launch angles no
/// more than `eps0` apart. Each batch keeps data order.
pub fn seeded_batches(data: &[DataPoint], eps0: f64, quantum: f64) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<(String, [i64; 6]), Vec<usize>> = BTreeMap::new();
    for (k, b) in data.iter().enumerate() {
        groups
            .entry((b.period.clone(), b.pair_key(quantum)))
            .or_default()
            .push(k);
    }
    let mut batches: Vec<Vec<usize>> = Vec::new();
    for members in groups.into_values() {
        let mut current: Vec<usize> = Vec::new();
        for k in members {
            let fits = current.iter().all(|&j| {
                (data[j].phi - data[k].phi)
                    .hypot(crate::angles::angle_diff(data[j].theta, data[k].theta))
                    <= eps0
            });
            if !fits {
                batches.push(std::mem::take(&mut current));
            }
            current.push(k);
        }
        if !current.is_empty() {
            batches.push(current);
        }
    }
    batches.sort_by_key(|b| b[0]);
    batches
}

pub fn phase_one(
    cfg: &PipelineConfig,
    data: &[DataPoint],
    field: &SpeedField,
) -> Result<(Vec<CandidateSolution>, Vec<PointReport>)> {
    let rcfg = cfg.reconstruction_config();
    Ok(match cfg.reconstruction.mode {
        Mode::Brute => reconstruct_all(data, field, &cfg.domain, &rcfg),
        Mode::Cached => {
            let table = build_table(cfg, data, field)?;
            run_all(data, |_, b| {
                (
                    optimized_find_candidates(b, &table, field, &cfg.domain, &rcfg),
                    table.grid,
                )
            })
        }
        Mode::Seeded => {
            let seeding = cfg.reconstruction.seeding;
            let batches = seeded_batches(data, seeding.eps0, DEFAULT_PAIR_QUANTUM);
            let solved: Vec<(Vec<usize>, Result<_>)> = batches
                .into_par_iter()
                .map(|idx| {
                    let batch: Vec<DataPoint> = idx.iter().map(|&k| data[k].clone()).collect();
                    let r =
                        seeded_find_candidates(&batch, field, &cfg.domain, &rcfg, &seeding, None);
                    (idx, r)
                })
                .collect();
            let mut per_point: Vec<(Vec<CandidateSolution>, PointReport)> = Vec::new();
            for (idx, r) in solved {
                let r = r?;
                for (local, report) in r.reports.into_iter().enumerate() {
                    let k = idx[local];
                    let cands = r
                        .candidates
                        .iter()
                        .filter(|c| c.data_point == local)
                        .cloned()
                        .map(|mut c| {
                            c.data_point = k;
                            c
                        })
                        .collect();
                    per_point.push((
                        cands,
                        PointReport {
                            data_point: k,
                            ..report
                        },
                    ));
                }
            }
            per_point.sort_by_key(|(_, r)| r.data_point);
            let mut cands = Vec::new();
            let mut reports = Vec::new();
            for (c, r) in per_point {
                cands.extend(c);
                reports.push(r);
            }
            (cands, reports)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodSummary {
    pub id: String,
    pub data_points: usize,
    pub delta: Option<f64>,
    pub duration: Option<f64>,
    /// Whether d(Π) < δ holds; absent when the duration is unknown.
    pub constraint_satisfied: Option<bool>,
    pub solutions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub data_points: usize,
    pub status_counts: BTreeMap<String, usize>,
    pub statuses: Vec<PointReport>,
    pub candidates: usize,
    pub clusters: usize,
    pub solutions: usize,
    pub periods: Vec<PeriodSummary>,
    /// Largest |t_LP + t_PS - t_k| over all candidates (s).
    pub max_time_residual: f64,
    pub residuals_within_eps2: bool,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub simulate: f64,
    pub phase1: f64,
    pub phase2: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub data: Vec<DataPoint>,
    pub candidates: Vec<CandidateSolution>,
    pub clusters: Vec<SupportCluster>,
    pub report: RunReport,
    pub timings: Timings,
}

impl RunOutcome {
    /// Supported cluster representatives per period.
    pub fn solutions(&self) -> BTreeMap<String, Vec<Point3>> {
        let mut out: BTreeMap<String, Vec<Point3>> = BTreeMap::new();
        for c in retained(&self.clusters, &self.report.config) {
            out.entry(c.period.clone())
                .or_default()
                .push(c.representative);
        }
        out
    }
}

fn status_label(s: &PointStatus) -> &'static str {
    match s {
        PointStatus::Solved => "solved",
        PointStatus::NoSolution => "no-solution",
        PointStatus::MeasurementError => "measurement-error",
        PointStatus::StepUnderflow => "step-underflow",
        PointStatus::Failed(_) => "failed",
    }
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutcome> {
    let field = cfg.field.build()?;
    let (data, t_sim) = timed(|| load_or_simulate(cfg, &field));
    let data = data?;
    run_on_data(cfg, &field, data, t_sim)
}

/// Phases 1 and 2 on an existing dataset.
pub fn run_on_data(
    cfg: &PipelineConfig,
    field: &SpeedField,
    data: Vec<DataPoint>,
    t_sim: f64,
) -> Result<RunOutcome> {
    let (p1, t1) = timed(|| phase_one(cfg, &data, field));
    let (candidates, statuses) = p1?;
    let fcfg = cfg.filter_config();
    let (clusters, t2) = timed(|| cluster_and_count_hashed(&candidates, &data, &fcfg));
    let clusters = clusters?;
    let kept = retained(&clusters, cfg);

    let mut status_counts = BTreeMap::new();
    for s in &statuses {
        *status_counts
            .entry(status_label(&s.status).to_string())
            .or_insert(0) += 1;
    }
    let max_time_residual = candidates
        .iter()
        .map(|c| c.time_residual(data[c.data_point].t).abs())
        .fold(0.0, f64::max);

    let mut period_ids: Vec<String> = data.iter().map(|b| b.period.clone()).collect();
    period_ids.sort();
    period_ids.dedup();
    let declared = cfg.sampling_periods();
    let periods = period_ids
        .into_iter()
        .map(|id| {
            let members: Vec<DataPoint> = data.iter().filter(|b| b.period == id).cloned().collect();
            let decl = declared
                .iter()
                .find(|p| p.id == id)
                .filter(|p| p.duration.is_finite());
            let delta = decl.map(|p| sampling_delta(&members, p)).transpose()?;
            let spread = members
                .iter()
                .map(|b| b.t)
                .fold(f64::NEG_INFINITY, f64::max)
                - members.iter().map(|b| b.t).fold(f64::INFINITY, f64::min);
            if let Some(d) = &delta {
                if !d.satisfied {
                    log::warn!(
                        "period `{id}`: duration is not below the travel-time spread {}",
                        d.delta
                    );
                }
            }
            Ok(PeriodSummary {
                solutions: kept.iter().filter(|c| c.period == id).count(),
                data_points: members.len(),
                delta: Some(delta.map_or(spread, |d| d.delta)),
                duration: decl.map(|p| p.duration),
                constraint_satisfied: delta.map(|d| d.satisfied),
                id,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let report = RunReport {
        mode: cfg.reconstruction.mode,
        data_points: data.len(),
        status_counts,
        statuses,
        candidates: candidates.len(),
        clusters: clusters.len(),
        solutions: kept.len(),
        periods,
        max_time_residual,
        residuals_within_eps2: max_time_residual < cfg.reconstruction.eps2,
        config: cfg.clone(),
    };
    Ok(RunOutcome {
        data,
        candidates,
        clusters,
        report,
        timings: Timings {
            simulate: t_sim,
            phase1: t1,
            phase2: t2,
        },
    })
}

fn fmt_point(p: &Point3) -> String {
    format!("({},{},{})", p.x, p.y, p.z)
}

/// One line per retained point: period, coordinates, support, and the
/// contributing pairs as `(L)->(S)`.
/// Clusters that make it into the solutions file: those with enough support,
/// or all of them when the filter is disabled. Sorted by period, then
/// lexicographically.
pub fn retained<'a>(
    clusters: &'a [SupportCluster],
    cfg: &PipelineConfig,
) -> Vec<&'a SupportCluster> {
    if cfg.filter.enabled {
        return supported(clusters, &cfg.filter_config());
    }
    let mut all: Vec<&SupportCluster> = clusters.iter().collect();
    all.sort_by(|a, b| {
        a.period
            .cmp(&b.period)
            .then(lex_cmp(&a.representative, &b.representative))
    });
    all
}

pub fn solutions_text(kept: &[&SupportCluster], data: &[DataPoint], pair_quantum: f64) -> String {
    let mut pair_names: BTreeMap<[i64; 6], String> = BTreeMap::new();
    for b in data {
        pair_names
            .entry(b.pair_key(pair_quantum))
            .or_insert_with(|| {
                format!("{}->{}", fmt_point(&b.transmitter), fmt_point(&b.receiver))
            });
    }
    let mut out = String::from("# units: m\n# period x y z count pairs\n");
    for c in kept {
        let pairs: Vec<&str> = c.pairs.iter().map(|k| pair_names[k].as_str()).collect();
        let p = &c.representative;
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            c.period,
            p.x,
            p.y,
            p.z,
            c.count,
            pairs.join(" ")
        );
    }
    out
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub dataset: PathBuf,
    pub solutions: PathBuf,
    pub report: PathBuf,
    pub timings: PathBuf,
    pub plots: Vec<PathBuf>,
}

pub fn write_artifacts(outcome: &RunOutcome, dir: &Path) -> Result<Artifacts> {
    std::fs::create_dir_all(dir)?;
    let cfg = &outcome.report.config;
    let art = Artifacts {
        dataset: dir.join("dataset.txt"),
        solutions: dir.join("solutions.txt"),
        report: dir.join("report.json"),
        timings: dir.join("timings.json"),
        plots: Vec::new(),
    };
    save_data_points(&art.dataset, &outcome.data)?;
    std::fs::write(
        &art.solutions,
        solutions_text(
            &retained(&outcome.clusters, cfg),
            &outcome.data,
            cfg.filter.pair_quantum,
        ),
    )?;
    std::fs::write(&art.report, to_json(&outcome.report))?;
    std::fs::write(&art.timings, to_json(&outcome.timings))?;

    let mut plots = Vec::new();
    let solutions = outcome.solutions();
    for period in &outcome.report.periods {
        let mut points = solutions.get(&period.id).cloned().unwrap_or_default();
        points.sort_by(lex_cmp);
        let truth = cfg.obstacle.as_ref().and_then(|ob| {
            ob.center(&period.id).ok().map(|center| Outline {
                center,
                radius: ob.radius,
            })
        });
        let title = format!("period {}: {} points", period.id, points.len());
        let svg = render(&Plot {
            title: &title,
            axes: cfg.output.axes,
            points: &points,
            truth,
        });
        let path = dir.join(format!("plot_{}.svg", sanitize(&period.id)));
        std::fs::write(&path, svg)?;
        plots.push(path);
    }
    Ok(Artifacts { plots, ..art })
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

/// Travel times of the retro oracle scene, one per row of the reference table.
pub const ORACLE_TIMES: [f64; 8] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];

/// X = Y of the ray launched along the diagonal in c = x + y + 1 after time `t`.
pub fn oracle_xy(t: f64) -> f64 {
    ((std::f64::consts::SQRT_2 * t).exp() - 1.0) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub travel_time: f64,
    pub closed_form: f64,
    pub traced: [f64; 3],
    pub reconstructed: Option<[f64; 3]>,
    pub trace_error: f64,
    pub reconstruction_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rows: Vec<OracleRow>,
    pub max_trace_error: f64,
    pub max_reconstruction_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Traces the diagonal ray for every oracle travel time, reconstructs the
/// matching retro data point, and compares both with the closed form.
pub fn verify_oracle(cfg: &PipelineConfig) -> Result<VerifyReport> {
    let field = cfg.field.build()?;
    if field != SpeedField::affine_xy(1.0, 1.0, 1.0)? {
        return Err(Error::InvalidConfig(
            "verify needs the field c = x + y + 1".into(),
        ));
    }
    let rcfg = cfg.reconstruction_config();
    let (phi, theta) = (std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_4);
    let tolerance = 0.01;
    let rows = ORACLE_TIMES
        .par_iter()
        .map(|&t| {
            let x = oracle_xy(t / 2.0);
            let path = trace_ray(
                RayState::new(Point3::zeros(), phi, theta),
                t / 2.0,
                &cfg.step,
                &cfg.domain,
                &field,
            )?;
            let p = path.last().pos;
            let trace_error = ((p.x - x).abs()).max((p.y - x).abs()) / x;
            let b = DataPoint {
                transmitter: Point3::zeros(),
                receiver: Point3::zeros(),
                phi,
                theta,
                t,
                xi: 0.0,
                period: "oracle".into(),
                truth: None,
            };
            let rec = match find_candidates(&b, &field, &cfg.domain, &rcfg) {
                Ok(c) => c.first().map(|c| c.point),
                Err(e) => {
                    log::warn!("oracle reconstruction at T = {t} failed: {e}");
                    None
                }
            };
            Ok(OracleRow {
                travel_time: t,
                closed_form: x,
                traced: p.into(),
                reconstructed: rec.map(Into::into),
                trace_error,
                reconstruction_error: rec.map(|r| ((r.x - x).abs()).max((r.y - x).abs()) / x),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_trace_error = rows.iter().map(|r| r.trace_error).fold(0.0, f64::max);
    let max_reconstruction_error = rows
        .iter()
        .map(|r| r.reconstruction_error.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    Ok(VerifyReport {
        pass: max_trace_error < tolerance && max_reconstruction_error < tolerance,
        rows,
        max_trace_error,
        max_reconstruction_error,
        tolerance,
    })
}
