//! Forward model: synthesizes broken-ray measurements from a known obstacle.
//!
//! The obstacle is a sphere whose center is fixed within each sampling period.
//! Reflection is diffuse, so any departure direction from the hit point is
//! admissible and the receiver leg is found by two-point ray shooting.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Matrix3x2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataPoint, Truth};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Point3};
use crate::medium::SpeedField;
use crate::ray::{march_until, rk4_step, RayPath, RayState, StepControl, POLAR_CUTOFF};

pub const DEFAULT_EPS_HIT: f64 = 1e-6;
/// A receiver ray that meets the obstacle farther than this from the intended
/// reflection point is blocked.
const SHADOW_SLACK: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub radius: f64,
    /// Center per sampling-period id.
    pub trajectory: BTreeMap<String, [f64; 3]>,
    #[serde(default = "lambertian_default")]
    pub lambertian: bool,
}

fn lambertian_default() -> bool {
    true
}

impl Obstacle {
    pub fn sphere(radius: f64, trajectory: BTreeMap<String, [f64; 3]>) -> Result<Self> {
        let ob = Self {
            radius,
            trajectory,
            lambertian: true,
        };
        ob.validate()?;
        Ok(ob)
    }

    /// One sphere that does not move, observed during `period`.
    pub fn stationary(radius: f64, center: Point3, period: &str) -> Result<Self> {
        Self::sphere(
            radius,
            BTreeMap::from([(period.to_string(), center.into())]),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidObstacle(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if self.trajectory.is_empty() {
            return Err(Error::InvalidObstacle("trajectory has no periods".into()));
        }
        Ok(())
    }

    /// Checks that the closed obstacle sits strictly inside `dom` in every period.
    pub fn validate_in(&self, dom: &Domain) -> Result<()> {
        for (period, c) in &self.trajectory {
            let c = Point3::from(*c);
            let inside = match dom {
                Domain::Box { min, max } => {
                    (0..3).all(|i| c[i] - self.radius > min[i] && c[i] + self.radius < max[i])
                }
                Domain::Ball { center, radius } => {
                    (c - Point3::from(*center)).norm() + self.radius < *radius
                }
            };
            if !inside {
                return Err(Error::InvalidObstacle(format!(
                    "obstacle in period `{period}` is not strictly inside the domain"
                )));
            }
        }
        Ok(())
    }

    pub fn center(&self, period: &str) -> Result<Point3> {
        self.trajectory
            .get(period)
            .map(|c| Point3::from(*c))
            .ok_or_else(|| Error::UnknownPeriod(period.to_string()))
    }

    /// Negative inside, zero on the boundary, positive outside.
    pub fn signed_distance(&self, p: &Point3, period: &str) -> Result<f64> {
        Ok((p - self.center(period)?).norm() - self.radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPeriod {
    pub id: String,
    /// Duration d(Π) in seconds.
    pub duration: f64,
}

/// Boundary crossing of a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub point: Point3,
    pub t: f64,
}

/// First entry of `path` into the obstacle, refined by bisection on the
/// crossing step (sub-steps re-integrated) until the bracket is below `eps_hit`.
pub fn first_obstacle_hit(
    path: &RayPath,
    field: &SpeedField,
    ob: &Obstacle,
    period: &str,
    eps_hit: f64,
) -> Result<Option<Hit>> {
    let center = ob.center(period)?;
    let sd = |p: &Point3| (p - center).norm() - ob.radius;
    let states = &path.states;
    let Some(k) =
        (1..states.len()).find(|&i| sd(&states[i - 1].pos) > 0.0 && sd(&states[i].pos) <= 0.0)
    else {
        return Ok(None);
    };
    let base = states[k - 1];
    let (mut lo, mut hi) = (0.0, path.steps[k - 1]);
    let (mut d_lo, mut d_hi) = (sd(&base.pos), sd(&states[k].pos));
    let mut p_lo = base.pos;
    let mut p_hi = states[k].pos;
    for _ in 0..200 {
        if (p_hi - p_lo).norm() < eps_hit {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let s = rk4_step(&base, mid, field)?;
        let d = sd(&s.pos);
        if d > 0.0 {
            (lo, d_lo, p_lo) = (mid, d, s.pos);
        } else {
            (hi, d_hi, p_hi) = (mid, d, s.pos);
        }
    }
    // final secant step inside the tiny bracket
    let tau = if d_lo - d_hi > 0.0 {
        lo + (hi - lo) * d_lo / (d_lo - d_hi)
    } else {
        hi
    };
    let s = if tau > 0.0 {
        rk4_step(&base, tau, field)?
    } else {
        base
    };
    Ok(Some(Hit {
        point: s.pos,
        t: s.t,
    }))
}

/// Outcome of aiming a ray from a point at a target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Connection {
    pub phi: f64,
    pub theta: f64,
    /// Travel time to the closest approach.
    pub t: f64,
    /// Remaining miss distance (m).
    pub miss: f64,
}

#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    pub field: &'a SpeedField,
    pub domain: &'a Domain,
    pub ctl: StepControl,
    /// Longest one-way travel time considered (s).
    pub max_time: f64,
    pub eps_hit: f64,
}

impl<'a> Simulator<'a> {
    pub fn new(field: &'a SpeedField, domain: &'a Domain, ctl: StepControl, max_time: f64) -> Self {
        Self {
            field,
            domain,
            ctl,
            max_time,
            eps_hit: DEFAULT_EPS_HIT,
        }
    }

    /// Launches a ray and returns where it first enters the obstacle.
    pub fn shoot(
        &self,
        from: Point3,
        phi: f64,
        theta: f64,
        ob: &Obstacle,
        period: &str,
    ) -> Result<Option<Hit>> {
        let center = ob.center(period)?;
        let start = RayState::new(from, phi, theta);
        let path = match march_until(
            start,
            self.max_time,
            usize::MAX,
            &self.ctl,
            self.domain,
            self.field,
            |s| (s.pos - center).norm() <= ob.radius,
        ) {
            Ok(p) => p,
            Err(e) => {
                log::debug!(
                    "ray from {from:?} at ({phi}, {theta}) abandoned: {}",
                    e.error
                );
                return Ok(None);
            }
        };
        first_obstacle_hit(&path, self.field, ob, period, self.eps_hit)
    }

    /// Closest approach of the ray launched at `(phi, theta)` to `target`.
    fn closest_approach(
        &self,
        from: Point3,
        phi: f64,
        theta: f64,
        target: &Point3,
    ) -> Option<(Point3, f64)> {
        let start = RayState::new(from, phi, theta);
        let scale = (target - from).norm();
        let mut best = scale;
        let path = march_until(
            start,
            self.max_time,
            usize::MAX,
            &self.ctl,
            self.domain,
            self.field,
            |s| {
                let d = (s.pos - target).norm();
                best = best.min(d);
                d > best + 0.25 * scale
            },
        )
        .unwrap_or_else(|i| i.path);
        let states = &path.states;
        let k = (0..states.len()).min_by(|&a, &b| {
            (states[a].pos - target)
                .norm()
                .total_cmp(&(states[b].pos - target).norm())
        })?;
        let mut out = (states[k].pos, states[k].t);
        for seg in [k.checked_sub(1), (k + 1 < states.len()).then_some(k)]
            .into_iter()
            .flatten()
        {
            if let Some(c) = self.refine_on_segment(&states[seg], path.steps[seg], target) {
                if (c.0 - target).norm() < (out.0 - target).norm() {
                    out = c;
                }
            }
        }
        Some(out)
    }

    /// Golden-section search for the closest point on one step.
    fn refine_on_segment(&self, base: &RayState, h: f64, target: &Point3) -> Option<(Point3, f64)> {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let eval = |tau: f64| {
            rk4_step(base, tau, self.field)
                .ok()
                .map(|s| ((s.pos - target).norm(), s))
        };
        let (mut a, mut b) = (0.0, h);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (eval(c)?.0, eval(d)?.0);
        for _ in 0..80 {
            if fc < fd {
                b = d;
                (d, fd) = (c, fc);
                c = b - g * (b - a);
                fc = eval(c)?.0;
            } else {
                a = c;
                (c, fc) = (d, fd);
                d = a + g * (b - a);
                fd = eval(d)?.0;
            }
        }
        let s = eval(0.5 * (a + b))?.1;
        Some((s.pos, s.t))
    }

    /// Two-point shooting from `from` to `target`: Gauss-Newton on the launch
    /// angles, minimizing the closest-approach miss vector.
    pub fn connect(&self, from: Point3, target: Point3) -> Option<Connection> {
        let d = (target - from).normalize();
        let straight = (d.z.clamp(-1.0, 1.0).acos(), d.y.atan2(d.x));
        let residual = |phi: f64, theta: f64| {
            self.closest_approach(from, phi, theta, &target)
                .map(|(p, t)| (p - target, t))
        };
        let mut starts = vec![straight];
        // coarse fallback starts around the straight-line guess
        for dphi in [-0.2, 0.0, 0.2] {
            for dtheta in [-0.4, -0.2, 0.2, 0.4] {
                starts.push((straight.0 + dphi, straight.1 + dtheta));
            }
        }
        let tol = 0.1 * self.eps_hit;
        let mut best: Option<Connection> = None;
        for (phi0, theta0) in starts {
            if let Some(c) = self.gauss_newton(phi0, theta0, &residual, tol) {
                if best.is_none_or(|b| c.miss < b.miss) {
                    best = Some(c);
                }
                if c.miss < tol {
                    break;
                }
            }
        }
        best.filter(|c| c.miss < self.eps_hit)
    }

    fn gauss_newton(
        &self,
        phi0: f64,
        theta0: f64,
        residual: &impl Fn(f64, f64) -> Option<(Point3, f64)>,
        tol: f64,
    ) -> Option<Connection> {
        let lo = POLAR_CUTOFF * 10.0;
        let clamp_phi = |p: f64| p.clamp(lo, std::f64::consts::PI - lo);
        let (mut phi, mut theta) = (clamp_phi(phi0), theta0);
        let (mut r, mut t) = residual(phi, theta)?;
        let delta = 1e-6;
        for _ in 0..40 {
            if r.norm() < tol {
                break;
            }
            let (rp, _) = residual(phi + delta, theta)?;
            let (rt, _) = residual(phi, theta + delta)?;
            let j = Matrix3x2::from_columns(&[(rp - r) / delta, (rt - r) / delta]);
            let jt = j.transpose();
            let normal: Matrix2<f64> = jt * j;
            let step: Vector2<f64> = -(normal.try_inverse()? * (jt * r));
            let mut lambda = 1.0;
            let mut improved = false;
            for _ in 0..12 {
                let (np, nt) = (clamp_phi(phi + lambda * step.x), theta + lambda * step.y);
                if let Some((nr, ntime)) = residual(np, nt) {
                    if nr.norm() < r.norm() {
                        (phi, theta, r, t) = (np, nt, nr, ntime);
                        improved = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !improved {
                break;
            }
        }
        Some(Connection {
            phi,
            theta: theta.rem_euclid(std::f64::consts::TAU),
            t,
            miss: r.norm(),
        })
    }

    /// Monostatic measurements: the echo returns along the incident ray, so the
    /// receiver is the transmitter and the travel time is twice the hit time.
    pub fn generate_retro_data(
        &self,
        transmitters: &[Point3],
        angles: &[(f64, f64)],
        ob: &Obstacle,
        period: &str,
        xi: f64,
    ) -> Result<Vec<DataPoint>> {
        ob.center(period)?;
        let jobs: Vec<(Point3, (f64, f64))> = transmitters
            .iter()
            .flat_map(|l| angles.iter().map(move |a| (*l, *a)))
            .collect();
        let out: Vec<Option<DataPoint>> = jobs
            .par_iter()
            .map(|&(l, (phi, theta))| {
                let hit = self.shoot(l, phi, theta, ob, period).ok().flatten()?;
                Some(DataPoint {
                    transmitter: l,
                    receiver: l,
                    phi,
                    theta,
                    t: 2.0 * hit.t,
                    xi,
                    period: period.to_string(),
                    truth: Some(Truth {
                        point: hit.point,
                        t_transmitter: hit.t,
                        t_receiver: hit.t,
                    }),
                })
            })
            .collect();
        Ok(out.into_iter().flatten().collect())
    }

    /// Measurements with separate transmitter and receiver. Hits that the
    /// receiver cannot see are dropped.
    #[allow(clippy::too_many_arguments)]
    pub fn generate_bistatic_data(
        &self,
        transmitter: Point3,
        receiver: Point3,
        angles: &[(f64, f64)],
        ob: &Obstacle,
        period: &str,
        xi: f64,
    ) -> Result<Vec<DataPoint>> {
        if ob.signed_distance(&receiver, period)? <= 0.0 {
            return Ok(Vec::new());
        }
        let out: Vec<Option<DataPoint>> = angles
            .par_iter()
            .map(|&(phi, theta)| {
                let hit = self
                    .shoot(transmitter, phi, theta, ob, period)
                    .ok()
                    .flatten()?;
                let t2 = if (receiver - hit.point).norm() < self.eps_hit {
                    0.0
                } else {
                    let conn = self.connect(receiver, hit.point)?;
                    if self.occluded(receiver, &conn, &hit, ob, period) {
                        return None;
                    }
                    conn.t
                };
                Some(DataPoint {
                    transmitter,
                    receiver,
                    phi,
                    theta,
                    t: hit.t + t2,
                    xi,
                    period: period.to_string(),
                    truth: Some(Truth {
                        point: hit.point,
                        t_transmitter: hit.t,
                        t_receiver: t2,
                    }),
                })
            })
            .collect();
        Ok(out.into_iter().flatten().collect())
    }

    fn occluded(
        &self,
        receiver: Point3,
        conn: &Connection,
        hit: &Hit,
        ob: &Obstacle,
        period: &str,
    ) -> bool {
        match self.shoot(receiver, conn.phi, conn.theta, ob, period) {
            Ok(Some(first)) => first.t < conn.t && (first.point - hit.point).norm() > SHADOW_SLACK,
            _ => false,
        }
    }
}

/// Spread of travel times within one sampling period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingDelta {
    pub delta: f64,
    /// Whether d(Π) < δ holds for the period.
    pub satisfied: bool,
}

pub fn sampling_delta(points: &[DataPoint], period: &SamplingPeriod) -> Result<SamplingDelta> {
    let first = points.first().ok_or(Error::EmptyPeriod)?;
    if let Some(other) = points.iter().find(|p| p.period != first.period) {
        return Err(Error::MixedPeriods(
            first.period.clone(),
            other.period.clone(),
        ));
    }
    if first.period != period.id {
        return Err(Error::MixedPeriods(first.period.clone(), period.id.clone()));
    }
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.t), hi.max(p.t))
        });
    let delta = hi - lo;
    Ok(SamplingDelta {
        delta,
        satisfied: period.duration < delta,
    })
}

/// Adds uniform noise in `[-amplitude, amplitude]` to every travel time.
pub fn perturb_travel_times(points: &mut [DataPoint], amplitude: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in points {
        let e: f64 = rng.gen_range(-amplitude..=amplitude);
        p.t = (p.t + e).max(f64::MIN_POSITIVE);
    }
}
