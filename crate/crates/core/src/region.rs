//! Cube mesh over the domain and the precomputed receiver-ray table.
//!
//! The bounding cube `M = [-l_m/2, l_m/2]^3` is split into `n_v^3` cubes of side
//! `b = l_m / n_v`. Every receiver ray is traced once with fixed steps and each
//! visited point is filed under its cube. Phase 1 then only has to look at the
//! cubes around each transmitter point instead of every receiver point.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angles::AngleGrid;
use crate::dataset::DataPoint;
use crate::error::{Error, Result};
use crate::geometry::{Domain, Point3};
use crate::medium::SpeedField;
use crate::ray::{rk4_step, RayState};
use crate::reconstruct::{
    consolidate, corrected_residual, transmitter_states, CandidateSolution, Match, PhaseStats,
    ReconstructionConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    /// Side of the bounding cube, centered at the origin (m).
    pub l_m: f64,
    /// Cubes per axis.
    pub n_v: usize,
}

pub type RegionId = usize;

impl MeshSpec {
    pub fn new(l_m: f64, n_v: usize) -> Result<Self> {
        let m = Self { l_m, n_v };
        m.validate()?;
        Ok(m)
    }

    /// Smallest centered cube that holds `dom`.
    pub fn covering(dom: &Domain, n_v: usize) -> Result<Self> {
        Self::new(2.0 * dom.max_abs_coordinate(), n_v)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_v == 0 || !(self.l_m.is_finite() && self.l_m > 0.0) {
            return Err(Error::InvalidMesh(format!(
                "need l_m > 0 and n_v >= 1, got l_m = {}, n_v = {}",
                self.l_m, self.n_v
            )));
        }
        Ok(())
    }

    /// Cube side b.
    pub fn cube_side(&self) -> f64 {
        self.l_m / self.n_v as f64
    }

    pub fn contains(&self, p: &Point3) -> bool {
        let half = self.l_m / 2.0;
        p.iter().all(|c| c.abs() <= half)
    }

    /// One-based cube indices along each axis.
    pub fn indices_of(&self, p: &Point3) -> Result<[usize; 3]> {
        if !self.contains(p) {
            return Err(Error::OutsideMesh {
                x: p.x,
                y: p.y,
                z: p.z,
            });
        }
        let b = self.cube_side();
        let half = self.l_m / 2.0;
        Ok([p.x, p.y, p.z].map(|c| (((c + half) / b).ceil() as usize).clamp(1, self.n_v)))
    }

    pub fn id_of(&self, idx: [usize; 3]) -> RegionId {
        let n = self.n_v;
        (idx[0] - 1) + n * (idx[1] - 1) + n * n * (idx[2] - 1)
    }

    pub fn indices_from_id(&self, id: RegionId) -> [usize; 3] {
        let n = self.n_v;
        [id % n + 1, (id / n) % n + 1, id / (n * n) + 1]
    }

    pub fn region_count(&self) -> usize {
        self.n_v.pow(3)
    }

    /// Ids of all cubes within `radius` cubes of `id` on every axis.
    pub fn regions_within(&self, id: RegionId, radius: usize) -> Vec<RegionId> {
        let c = self.indices_from_id(id);
        let range = |i: usize| i.saturating_sub(radius).max(1)..=(i + radius).min(self.n_v);
        let mut out = Vec::new();
        for k in range(c[2]) {
            for j in range(c[1]) {
                for i in range(c[0]) {
                    out.push(self.id_of([i, j, k]));
                }
            }
        }
        out
    }
}

pub fn region_of(p: &Point3, mesh: &MeshSpec) -> Result<RegionId> {
    Ok(mesh.id_of(mesh.indices_of(p)?))
}

/// The cube and its face, edge and corner neighbours.
pub fn adjacent_regions(id: RegionId, mesh: &MeshSpec) -> Vec<RegionId> {
    mesh.regions_within(id, 1)
}

/// Region number as the product of the one-based axis indices. Kept for
/// reference only: distinct cubes share numbers, e.g. (2,1,1) and (1,2,1).
pub fn product_region_number(idx: [usize; 3]) -> usize {
    idx[0] * idx[1] * idx[2]
}

/// One precomputed receiver-ray point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RtRecord {
    pub pointid: usize,
    pub rayid: usize,
    pub receiverid: usize,
    pub region: RegionId,
    /// Time from the receiver (s).
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl RtRecord {
    pub fn pos(&self) -> Point3 {
        Point3::new(self.x, self.y, self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayMeta {
    pub rayid: usize,
    pub receiverid: usize,
    pub phi: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionTable {
    pub mesh: MeshSpec,
    pub grid: AngleGrid,
    pub budget: f64,
    pub n_r: usize,
    pub receivers: Vec<Point3>,
    pub rays: Vec<RayMeta>,
    /// Records of one ray are contiguous and ordered by time.
    pub records: Vec<RtRecord>,
    groups: HashMap<RegionId, Vec<usize>>,
}

const RECEIVER_QUANTUM: f64 = 1e-6;

impl RegionTable {
    fn from_parts(
        mesh: MeshSpec,
        grid: AngleGrid,
        budget: f64,
        n_r: usize,
        receivers: Vec<Point3>,
        rays: Vec<RayMeta>,
        records: Vec<RtRecord>,
    ) -> Self {
        let mut groups: HashMap<RegionId, Vec<usize>> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            groups.entry(r.region).or_default().push(i);
        }
        for g in groups.values_mut() {
            g.sort_by(|&a, &b| records[a].t.total_cmp(&records[b].t).then(a.cmp(&b)));
        }
        Self {
            mesh,
            grid,
            budget,
            n_r,
            receivers,
            rays,
            records,
            groups,
        }
    }

    /// Record indices filed under `region`, ordered by time.
    pub fn group(&self, region: RegionId) -> &[usize] {
        self.groups.get(&region).map_or(&[], |g| g.as_slice())
    }

    pub fn receiver_id(&self, p: &Point3) -> Option<usize> {
        let q = |v: &Point3| v.map(|c| (c / RECEIVER_QUANTUM).round() as i64);
        self.receivers.iter().position(|r| q(r) == q(p))
    }

    /// Receiver-ray velocity at a record, by differences of its ray neighbours.
    fn velocity_at(&self, i: usize) -> Point3 {
        let r = &self.records[i];
        let same = |j: usize| self.records.get(j).filter(|n| n.rayid == r.rayid);
        let prev = i.checked_sub(1).and_then(same);
        let next = same(i + 1);
        match (prev, next) {
            (Some(a), Some(b)) => (b.pos() - a.pos()) / (b.t - a.t),
            (None, Some(b)) => (b.pos() - r.pos()) / (b.t - r.t),
            (Some(a), None) => (r.pos() - a.pos()) / (r.t - a.t),
            (None, None) => Point3::zeros(),
        }
    }
}

/// Traces every (receiver, direction) ray with fixed steps `budget / n_r`.
pub fn build_cache(
    receivers: &[Point3],
    grid: &AngleGrid,
    budget: f64,
    n_r: usize,
    dom: &Domain,
    field: &SpeedField,
    mesh: &MeshSpec,
) -> Result<RegionTable> {
    mesh.validate()?;
    grid.validate()?;
    if n_r == 0 || !(budget > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "cache needs a positive budget and N_r >= 1, got {budget} and {n_r}"
        )));
    }
    for r in receivers {
        if !dom.contains(r) {
            return Err(Error::OutsideDomain {
                what: "receiver",
                x: r.x,
                y: r.y,
                z: r.z,
            });
        }
    }
    let directions = grid.directions();
    let jobs: Vec<(usize, (f64, f64))> = (0..receivers.len())
        .flat_map(|r| directions.iter().map(move |d| (r, *d)))
        .collect();
    let h = budget / n_r as f64;
    let traced: Vec<Vec<(Point3, f64)>> = jobs
        .par_iter()
        .map(|&(r, (phi, theta))| {
            let mut s = RayState::new(receivers[r], phi, theta);
            let mut pts = Vec::with_capacity(n_r);
            for k in 1..=n_r {
                let Ok(mut next) = rk4_step(&s, h, field) else {
                    break;
                };
                if !dom.contains(&next.pos) || !mesh.contains(&next.pos) {
                    break;
                }
                next.theta = next.theta.rem_euclid(std::f64::consts::TAU);
                next.t = k as f64 * h;
                pts.push((next.pos, next.t));
                s = next;
            }
            pts
        })
        .collect();

    let mut rays = Vec::with_capacity(jobs.len());
    let mut records = Vec::new();
    for (rayid, (&(receiverid, (phi, theta)), pts)) in jobs.iter().zip(traced).enumerate() {
        rays.push(RayMeta {
            rayid,
            receiverid,
            phi,
            theta,
        });
        for (p, t) in pts {
            records.push(RtRecord {
                pointid: records.len(),
                rayid,
                receiverid,
                region: region_of(&p, mesh)?,
                t,
                x: p.x,
                y: p.y,
                z: p.z,
            });
        }
    }
    Ok(RegionTable::from_parts(
        *mesh,
        *grid,
        budget,
        n_r,
        receivers.to_vec(),
        rays,
        records,
    ))
}

/// All records in the cube holding `p` and its neighbours.
pub fn lookup_candidates<'a>(p: &Point3, table: &'a RegionTable) -> Result<Vec<&'a RtRecord>> {
    let id = region_of(p, &table.mesh)?;
    Ok(adjacent_regions(id, &table.mesh)
        .into_iter()
        .flat_map(|r| table.group(r).iter().map(|&i| &table.records[i]))
        .collect())
}

/// Cubes to search around a point so that nothing within `eps1` is missed.
pub fn search_radius(mesh: &MeshSpec, eps1: f64) -> usize {
    ((eps1 / mesh.cube_side()).ceil() as usize).max(1)
}

/// Phase 1 against a prebuilt table: per transmitter point, only records in
/// nearby cubes whose time lies in the matching window are examined.
pub fn optimized_find_candidates(
    b: &DataPoint,
    table: &RegionTable,
    field: &SpeedField,
    dom: &Domain,
    cfg: &ReconstructionConfig,
) -> Result<Vec<CandidateSolution>> {
    Ok(optimized_find_candidates_with_stats(b, table, field, dom, cfg)?.0)
}

pub fn optimized_find_candidates_with_stats(
    b: &DataPoint,
    table: &RegionTable,
    field: &SpeedField,
    dom: &Domain,
    cfg: &ReconstructionConfig,
) -> Result<(Vec<CandidateSolution>, PhaseStats)> {
    let receiverid = table.receiver_id(&b.receiver).ok_or_else(|| {
        Error::StaleCache(format!(
            "receiver {:?} is not in the table",
            b.receiver.as_slice()
        ))
    })?;
    if b.t > table.budget {
        return Err(Error::StaleCache(format!(
            "travel time {} exceeds the table budget {}",
            b.t, table.budget
        )));
    }
    let tx = transmitter_states(b, field, dom, cfg)?;
    let (t_k, eps1, eps2) = (b.t, cfg.eps1, cfg.eps2);
    let radius = search_radius(&table.mesh, eps1);
    let mut stats = PhaseStats {
        transmitter_points: tx.len(),
        receiver_budget: table.budget,
        ..PhaseStats::default()
    };

    let per_point: Vec<(Vec<Match>, u64)> = tx
        .par_iter()
        .enumerate()
        .map(|(s, p)| {
            let mut found = Vec::new();
            let mut comparisons = 0u64;
            let Ok(home) = region_of(&p.pos, &table.mesh) else {
                return (found, comparisons);
            };
            let (lo, hi) = (t_k - p.t - eps2, t_k - p.t + eps2);
            for region in table.mesh.regions_within(home, radius) {
                let group = table.group(region);
                let start = group.partition_point(|&i| table.records[i].t <= lo);
                for &i in &group[start..] {
                    let r = &table.records[i];
                    if r.t >= hi {
                        break;
                    }
                    comparisons += 1;
                    if r.receiverid != receiverid {
                        continue;
                    }
                    let q = r.pos();
                    let distance = (p.pos - q).norm();
                    if distance >= eps1 {
                        continue;
                    }
                    let ray = &table.rays[r.rayid];
                    let v = table.velocity_at(i);
                    found.push(Match {
                        s,
                        point: p.pos,
                        t_tx: p.t,
                        t_rx: r.t,
                        rx_phi: ray.phi,
                        rx_theta: ray.theta,
                        distance,
                        corrected: corrected_residual(&p.pos, p.t, &q, r.t, &v, t_k),
                    });
                }
            }
            (found, comparisons)
        })
        .collect();
    let mut matches = Vec::new();
    for (m, c) in per_point {
        matches.extend(m);
        stats.comparisons += c;
    }
    Ok((consolidate(matches, eps1, 0), stats))
}

/// Text form: a header with mesh, budget, N_r, grid and receivers, the ray
/// list, then one record per line as `pointid rayid receiverid region t x y z`.
pub fn write_cache(table: &RegionTable) -> String {
    let mut out = String::new();
    let g = &table.grid;
    let _ = writeln!(out, "# region cache");
    let _ = writeln!(out, "l_m {}", table.mesh.l_m);
    let _ = writeln!(out, "n_v {}", table.mesh.n_v);
    let _ = writeln!(out, "budget {}", table.budget);
    let _ = writeln!(out, "n_r {}", table.n_r);
    let _ = writeln!(
        out,
        "grid {} {} {} {} {} {}",
        g.phi_min, g.phi_max, g.theta_min, g.theta_max, g.n_phi, g.n_theta
    );
    let _ = writeln!(out, "receivers {}", table.receivers.len());
    for r in &table.receivers {
        let _ = writeln!(out, "{} {} {}", r.x, r.y, r.z);
    }
    let _ = writeln!(out, "rays {}", table.rays.len());
    for r in &table.rays {
        let _ = writeln!(out, "{} {} {} {}", r.rayid, r.receiverid, r.phi, r.theta);
    }
    let _ = writeln!(out, "records {}", table.records.len());
    let _ = writeln!(out, "pointid rayid receiverid region t x y z");
    for r in &table.records {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            r.pointid, r.rayid, r.receiverid, r.region, r.t, r.x, r.y, r.z
        );
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)>> = Box::new(
            text.lines()
                .enumerate()
                .map(|(n, l)| (n + 1, l.trim()))
                .filter(|(_, l)| !l.is_empty() && !l.starts_with('#')),
        );
        Self {
            inner: it.peekable(),
        }
    }

    fn next_fields(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        match self.inner.next() {
            Some((n, l)) => Ok((n, l.split_whitespace().collect())),
            None => Err(Error::SchemaMismatch(format!(
                "cache file ends before {what}"
            ))),
        }
    }

    /// A `key v1 v2 ...` line.
    fn keyed(&mut self, key: &str, count: usize) -> Result<(usize, Vec<&'a str>)> {
        let (n, f) = self.next_fields(key)?;
        if f.first() != Some(&key) {
            return Err(Error::SchemaMismatch(format!("line {n}: expected `{key}`")));
        }
        if f.len() != count + 1 {
            return Err(Error::Parse {
                line: n,
                message: format!("`{key}` takes {count} values"),
            });
        }
        Ok((n, f[1..].to_vec()))
    }

    fn row(&mut self, what: &str, count: usize) -> Result<(usize, Vec<&'a str>)> {
        let (n, f) = self.next_fields(what)?;
        if f.len() != count {
            return Err(Error::Parse {
                line: n,
                message: format!("{what} row needs {count} fields, found {}", f.len()),
            });
        }
        Ok((n, f))
    }
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("`{s}` is not a valid number"),
    })
}

pub fn parse_cache(text: &str) -> Result<RegionTable> {
    let mut lines = Lines::new(text);
    let (n, v) = lines.keyed("l_m", 1)?;
    let l_m: f64 = num(n, v[0])?;
    let (n, v) = lines.keyed("n_v", 1)?;
    let mesh = MeshSpec::new(l_m, num(n, v[0])?)?;
    let (n, v) = lines.keyed("budget", 1)?;
    let budget: f64 = num(n, v[0])?;
    let (n, v) = lines.keyed("n_r", 1)?;
    let n_r: usize = num(n, v[0])?;
    let (n, v) = lines.keyed("grid", 6)?;
    let grid = AngleGrid {
        phi_min: num(n, v[0])?,
        phi_max: num(n, v[1])?,
        theta_min: num(n, v[2])?,
        theta_max: num(n, v[3])?,
        n_phi: num(n, v[4])?,
        n_theta: num(n, v[5])?,
    };
    let (n, v) = lines.keyed("receivers", 1)?;
    let n_recv: usize = num(n, v[0])?;
    let mut receivers = Vec::with_capacity(n_recv);
    for _ in 0..n_recv {
        let (n, f) = lines.row("receiver", 3)?;
        receivers.push(Point3::new(num(n, f[0])?, num(n, f[1])?, num(n, f[2])?));
    }
    let (n, v) = lines.keyed("rays", 1)?;
    let n_rays: usize = num(n, v[0])?;
    let mut rays = Vec::with_capacity(n_rays);
    for _ in 0..n_rays {
        let (n, f) = lines.row("ray", 4)?;
        rays.push(RayMeta {
            rayid: num(n, f[0])?,
            receiverid: num(n, f[1])?,
            phi: num(n, f[2])?,
            theta: num(n, f[3])?,
        });
    }
    let (n, v) = lines.keyed("records", 1)?;
    let n_rec: usize = num(n, v[0])?;
    let (n, header) = lines.next_fields("record header")?;
    if header
        != [
            "pointid",
            "rayid",
            "receiverid",
            "region",
            "t",
            "x",
            "y",
            "z",
        ]
    {
        return Err(Error::SchemaMismatch(format!(
            "line {n}: unexpected record header"
        )));
    }
    let mut records = Vec::with_capacity(n_rec);
    for _ in 0..n_rec {
        let (n, f) = lines.row("record", 8)?;
        let r = RtRecord {
            pointid: num(n, f[0])?,
            rayid: num(n, f[1])?,
            receiverid: num(n, f[2])?,
            region: num(n, f[3])?,
            t: num(n, f[4])?,
            x: num(n, f[5])?,
            y: num(n, f[6])?,
            z: num(n, f[7])?,
        };
        if r.rayid >= rays.len()
            || r.receiverid >= receivers.len()
            || r.region >= mesh.region_count()
        {
            return Err(Error::Parse {
                line: n,
                message: "record refers to an unknown ray, receiver or region".into(),
            });
        }
        records.push(r);
    }
    if let Some((n, _)) = lines.inner.next() {
        return Err(Error::Parse {
            line: n,
            message: "trailing data after the last record".into(),
        });
    }
    Ok(RegionTable::from_parts(
        mesh, grid, budget, n_r, receivers, rays, records,
    ))
}

pub fn save_cache(path: impl AsRef<Path>, table: &RegionTable) -> Result<()> {
    std::fs::write(path, write_cache(table))?;
    Ok(())
}

pub fn load_cache(path: impl AsRef<Path>) -> Result<RegionTable> {
    parse_cache(&std::fs::read_to_string(path)?)
}
