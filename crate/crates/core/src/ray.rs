//! Shooting-method ray tracing through a known speed field.
//!
//! A ray is parameterized by travel time. Its state is the position plus the
//! zenith angle `phi` (measured from +z) and the azimuth `theta` (measured from
//! +x in the xy-plane). The system integrated is
//!
//! ```text
//! dx/dt     = c sin(phi) cos(theta)
//! dy/dt     = c sin(phi) sin(theta)
//! dz/dt     = c cos(phi)
//! dphi/dt   = -cos(phi) (c_x cos(theta) + c_y sin(theta)) + c_z sin(phi)
//! dtheta/dt = (c_x sin(theta) - c_y cos(theta)) / sin(phi)
//! ```
//!
//! Steps are classical RK4. Adaptivity is step doubling: a step of `h` is
//! compared against two steps of `h/2` and `h` is halved until the two agree
//! within per-component tolerances.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point3};
use crate::medium::SpeedField;

/// Rays whose zenith angle comes closer than this to either pole are rejected.
pub const POLAR_CUTOFF: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayState {
    pub pos: Point3,
    pub phi: f64,
    pub theta: f64,
    pub t: f64,
}

impl RayState {
    pub fn new(pos: Point3, phi: f64, theta: f64) -> Self {
        Self {
            pos,
            phi,
            theta: theta.rem_euclid(TAU),
            t: 0.0,
        }
    }

    /// Unit propagation direction.
    pub fn direction(&self) -> Point3 {
        direction(self.phi, self.theta)
    }

    /// Same point, opposite direction of travel, clock reset to zero.
    pub fn reversed(&self) -> Self {
        Self::new(self.pos, PI - self.phi, self.theta + PI)
    }
}

pub fn direction(phi: f64, theta: f64) -> Point3 {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    Point3::new(sp * ct, sp * st, cp)
}

/// Time derivatives of (x, y, z, phi, theta).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayRates {
    pub velocity: Point3,
    pub phi: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepControl {
    pub h_init: f64,
    pub h_min: f64,
    /// Position tolerances for x, y, z (m).
    pub eps_pos: [f64; 3],
    pub eps_phi: f64,
    pub eps_theta: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            h_init: 1e-3,
            h_min: 1e-9,
            eps_pos: [1e-6; 3],
            eps_phi: 1e-6,
            eps_theta: 1e-6,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_min > 0.0 && self.h_min < self.h_init && self.h_init.is_finite()) {
            return Err(Error::InvalidStepControl(format!(
                "need 0 < h_min < h_init, got h_min = {}, h_init = {}",
                self.h_min, self.h_init
            )));
        }
        let tols = [
            self.eps_pos[0],
            self.eps_pos[1],
            self.eps_pos[2],
            self.eps_phi,
            self.eps_theta,
        ];
        if tols.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidStepControl(
                "tolerances must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Every tolerance multiplied by `factor`.
    pub fn scaled_tolerances(&self, factor: f64) -> Self {
        Self {
            eps_pos: self.eps_pos.map(|e| e * factor),
            eps_phi: self.eps_phi * factor,
            eps_theta: self.eps_theta * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceStatus {
    /// Marched to the time budget.
    Completed,
    /// Next state would have left the domain; it is not recorded.
    ExitedDomain,
    /// Stopped by the step-count cap.
    StepLimit,
    /// Stopped by the caller's predicate.
    Stopped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayPath {
    pub states: Vec<RayState>,
    /// `steps[i]` is the time step from `states[i]` to `states[i + 1]`.
    pub steps: Vec<f64>,
    pub status: TraceStatus,
}

impl RayPath {
    pub fn last(&self) -> &RayState {
        self.states
            .last()
            .expect("a path always holds its start state")
    }

    pub fn positions(&self) -> impl Iterator<Item = &Point3> {
        self.states.iter().map(|s| &s.pos)
    }
}

pub fn ray_derivatives(s: &RayState, field: &SpeedField) -> Result<RayRates> {
    let (sin_phi, cos_phi) = s.phi.sin_cos();
    if sin_phi.abs() < POLAR_CUTOFF.sin() {
        return Err(Error::PolarSingularity { phi: s.phi });
    }
    let (sin_theta, cos_theta) = s.theta.sin_cos();
    let (c, g) = field.speed_and_gradient(&s.pos)?;
    Ok(RayRates {
        velocity: Point3::new(
            c * sin_phi * cos_theta,
            c * sin_phi * sin_theta,
            c * cos_phi,
        ),
        phi: -cos_phi * (g.x * cos_theta + g.y * sin_theta) + g.z * sin_phi,
        theta: (g.x * sin_theta - g.y * cos_theta) / sin_phi,
    })
}

fn advance(s: &RayState, k: &RayRates, dt: f64) -> RayState {
    RayState {
        pos: s.pos + k.velocity * dt,
        phi: s.phi + k.phi * dt,
        theta: s.theta + k.theta * dt,
        t: s.t + dt,
    }
}

/// One classical RK4 step. `theta` is left unwrapped so that results of
/// different step sizes stay directly comparable.
pub fn rk4_step(s: &RayState, h: f64, field: &SpeedField) -> Result<RayState> {
    let k1 = ray_derivatives(s, field)?;
    let k2 = ray_derivatives(&advance(s, &k1, h / 2.0), field)?;
    let k3 = ray_derivatives(&advance(s, &k2, h / 2.0), field)?;
    let k4 = ray_derivatives(&advance(s, &k3, h), field)?;
    let w = h / 6.0;
    Ok(RayState {
        pos: s.pos + (k1.velocity + (k2.velocity + k3.velocity) * 2.0 + k4.velocity) * w,
        phi: s.phi + (k1.phi + 2.0 * (k2.phi + k3.phi) + k4.phi) * w,
        theta: s.theta + (k1.theta + 2.0 * (k2.theta + k3.theta) + k4.theta) * w,
        t: s.t + h,
    })
}

fn within_tolerance(a: &RayState, b: &RayState, ctl: &StepControl) -> bool {
    let d = a.pos - b.pos;
    d.x.abs() < ctl.eps_pos[0]
        && d.y.abs() < ctl.eps_pos[1]
        && d.z.abs() < ctl.eps_pos[2]
        && (a.phi - b.phi).abs() < ctl.eps_phi
        && (a.theta - b.theta).abs() < ctl.eps_theta
}

/// One adaptive step starting from `ctl.h_init`.
pub fn adaptive_step(
    s: &RayState,
    ctl: &StepControl,
    field: &SpeedField,
) -> Result<(RayState, f64)> {
    adaptive_step_from(s, ctl.h_init, ctl, field)
}

/// Halves `h` from `h_start` until one full step and two half steps agree.
/// Returns the two-half-step state (theta wrapped to [0, 2π)) and the step used.
pub fn adaptive_step_from(
    s: &RayState,
    h_start: f64,
    ctl: &StepControl,
    field: &SpeedField,
) -> Result<(RayState, f64)> {
    let mut h = h_start;
    loop {
        if h < ctl.h_min {
            return Err(Error::StepUnderflow { h_min: ctl.h_min });
        }
        let full = rk4_step(s, h, field);
        let halves = rk4_step(s, h / 2.0, field).and_then(|m| rk4_step(&m, h / 2.0, field));
        match (full, halves) {
            (Ok(full), Ok(mut fine)) => {
                if within_tolerance(&full, &fine, ctl) {
                    fine.theta = fine.theta.rem_euclid(TAU);
                    fine.t = s.t + h;
                    return Ok((fine, h));
                }
            }
            // a stage point strayed somewhere invalid; a smaller step may avoid
            // it, but the error itself is reported once steps run out
            (Err(e), _) | (_, Err(e)) => {
                if h / 2.0 < ctl.h_min {
                    return Err(e);
                }
            }
        }
        h /= 2.0;
    }
}

/// Why a march ended early, alongside whatever was traced before that.
#[derive(Debug, Clone, PartialEq)]
pub struct Interrupted {
    pub path: RayPath,
    pub error: Error,
}

/// Marches adaptive steps until `budget` (the last step is shortened to land
/// on it exactly), the domain is left, or `max_steps` steps were taken.
pub fn march(
    start: RayState,
    budget: f64,
    max_steps: usize,
    ctl: &StepControl,
    dom: &Domain,
    field: &SpeedField,
) -> std::result::Result<RayPath, Interrupted> {
    march_until(start, budget, max_steps, ctl, dom, field, |_| false)
}

/// Like [`march`], but also ends right after recording a state for which
/// `stop` returns true.
pub fn march_until(
    start: RayState,
    budget: f64,
    max_steps: usize,
    ctl: &StepControl,
    dom: &Domain,
    field: &SpeedField,
    mut stop: impl FnMut(&RayState) -> bool,
) -> std::result::Result<RayPath, Interrupted> {
    let mut states = vec![start];
    let mut steps = Vec::new();
    let end = start.t + budget;
    let mut status = TraceStatus::Completed;
    let mut current = start;
    loop {
        let remaining = end - current.t;
        if remaining < ctl.h_min {
            break;
        }
        if steps.len() >= max_steps {
            status = TraceStatus::StepLimit;
            break;
        }
        let (next, h) = match adaptive_step_from(&current, ctl.h_init.min(remaining), ctl, field) {
            Ok(r) => r,
            Err(error) => {
                return Err(Interrupted {
                    path: RayPath {
                        states,
                        steps,
                        status: TraceStatus::Completed,
                    },
                    error,
                })
            }
        };
        if !dom.contains(&next.pos) {
            status = TraceStatus::ExitedDomain;
            break;
        }
        let next = if (end - next.t).abs() < 1e-12 * end.abs().max(1.0) {
            RayState { t: end, ..next }
        } else {
            next
        };
        states.push(next);
        steps.push(h);
        current = next;
        if stop(&next) {
            status = TraceStatus::Stopped;
            break;
        }
    }
    Ok(RayPath {
        states,
        steps,
        status,
    })
}

/// Traces a ray for `budget` seconds of travel time.
pub fn trace_ray(
    start: RayState,
    budget: f64,
    ctl: &StepControl,
    dom: &Domain,
    field: &SpeedField,
) -> Result<RayPath> {
    if !dom.contains(&start.pos) {
        return Err(Error::OutsideDomain {
            what: "ray start",
            x: start.pos.x,
            y: start.pos.y,
            z: start.pos.z,
        });
    }
    march(start, budget, usize::MAX, ctl, dom, field).map_err(|i| i.error)
}

/// Relative mismatch between the path's elapsed time and the travel time
/// ∫ ds / c accumulated along its polyline by the trapezoid rule.
pub fn verify_time_consistency(path: &RayPath, field: &SpeedField) -> Result<f64> {
    let states = &path.states;
    if states.len() < 2 {
        return Ok(0.0);
    }
    let mut slowness_prev = 1.0 / field.speed(&states[0].pos)?;
    let mut integral = 0.0;
    for w in states.windows(2) {
        let slowness = 1.0 / field.speed(&w[1].pos)?;
        integral += (w[1].pos - w[0].pos).norm() * 0.5 * (slowness_prev + slowness);
        slowness_prev = slowness;
    }
    let elapsed = states[states.len() - 1].t - states[0].t;
    Ok((integral - elapsed).abs() / elapsed)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    use super::*;

    fn oracle(t: f64) -> f64 {
        ((SQRT_2 * t).exp() - 1.0) / 2.0
    }

    fn affine() -> SpeedField {
        SpeedField::affine_xy(1.0, 1.0, 1.0).unwrap()
    }

    fn big_box() -> Domain {
        Domain::new_box(Point3::new(-5.0, -5.0, -5.0), Point3::new(5.0, 5.0, 5.0)).unwrap()
    }

    #[test]
    fn derivatives_constant_speed() {
        let s = RayState::new(Point3::zeros(), FRAC_PI_2, 0.0);
        let r = ray_derivatives(&s, &SpeedField::constant(1.0).unwrap()).unwrap();
        assert!((r.velocity - Point3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        assert_eq!((r.phi, r.theta), (0.0, 0.0));
    }

    #[test]
    fn derivatives_affine_diagonal() {
        let s = RayState::new(Point3::zeros(), FRAC_PI_2, FRAC_PI_4);
        let r = ray_derivatives(&s, &affine()).unwrap();
        let h = SQRT_2 / 2.0;
        assert!((r.velocity - Point3::new(h, h, 0.0)).norm() < 1e-15);
        assert!(r.phi.abs() < 1e-15 && r.theta.abs() < 1e-15);
    }

    #[test]
    fn derivatives_zero_gradient_keeps_angles() {
        let s = RayState::new(Point3::new(0.3, -1.0, 2.0), FRAC_PI_2, 1.234);
        let r = ray_derivatives(&s, &SpeedField::constant(340.0).unwrap()).unwrap();
        assert_eq!((r.phi, r.theta), (0.0, 0.0));
    }

    #[test]
    fn derivatives_reject_pole() {
        let s = RayState::new(Point3::zeros(), 1e-9, 0.0);
        assert!(matches!(
            ray_derivatives(&s, &affine()),
            Err(Error::PolarSingularity { .. })
        ));
    }

    #[test]
    fn rk4_exact_for_constant_speed() {
        let s = RayState::new(Point3::zeros(), FRAC_PI_2, 0.0);
        let n = rk4_step(&s, 0.1, &SpeedField::constant(1.0).unwrap()).unwrap();
        assert!((n.pos - Point3::new(0.1, 0.0, 0.0)).norm() < 1e-15);
        assert!((n.t - 0.1).abs() < 1e-15);
        assert_eq!((n.phi, n.theta), (FRAC_PI_2, 0.0));
    }

    #[test]
    fn rk4_matches_closed_form() {
        let s = RayState::new(Point3::zeros(), FRAC_PI_2, FRAC_PI_4);
        let n = rk4_step(&s, 0.01, &affine()).unwrap();
        let x = oracle(0.01);
        assert!((n.pos.x - x).abs() < 1e-8 && (n.pos.y - x).abs() < 1e-8);
    }

    #[test]
    fn rk4_local_error_is_fifth_order() {
        // Richardson: the one-step vs two-half-step gap shrinks ~32x per halving.
        let s = RayState::new(Point3::new(0.2, 0.1, 0.0), 1.3, 0.4);
        let f = affine();
        let gap = |h: f64| {
            let one = rk4_step(&s, h, &f).unwrap();
            let two = rk4_step(&rk4_step(&s, h / 2.0, &f).unwrap(), h / 2.0, &f).unwrap();
            (one.pos - two.pos).norm()
        };
        let (g1, g2, g3) = (gap(0.2), gap(0.1), gap(0.05));
        for ratio in [g1 / g2, g2 / g3] {
            assert!(ratio > 24.0 && ratio < 40.0, "ratio {ratio}");
        }
    }

    #[test]
    fn adaptive_keeps_full_step_when_exact() {
        let s = RayState::new(Point3::zeros(), FRAC_PI_2, 0.3);
        let ctl = StepControl {
            h_init: 0.5,
            ..StepControl::default()
        };
        let (_, h) = adaptive_step(&s, &ctl, &SpeedField::constant(1.0).unwrap()).unwrap();
        assert_eq!(h, 0.5);
    }

    #[test]
    fn adaptive_halves_across_speed_jump() {
        use crate::medium::GridField;
        // speed flat at 1 up to x = 0.1, then ramps to 10 by x = 0.2
        let grid = GridField::from_fn(
            [3, 2, 2],
            Point3::new(0.0, -1.0, -1.0),
            Point3::new(0.1, 2.0, 2.0),
            |p| if p.x > 0.15 { 10.0 } else { 1.0 },
        )
        .unwrap();
        let field = SpeedField::GridSampled(grid);
        let s = RayState::new(Point3::new(0.09, 0.0, 0.0), FRAC_PI_2, 0.5);
        let ctl = StepControl {
            h_init: 0.02,
            h_min: 1e-12,
            eps_pos: [1e-9; 3],
            eps_phi: 1e-9,
            eps_theta: 1e-9,
        };
        let (_, h) = adaptive_step(&s, &ctl, &field).unwrap();
        assert!(h < ctl.h_init, "expected halving, got h = {h}");
    }

    #[test]
    fn adaptive_zero_tolerance_underflows() {
        let s = RayState::new(Point3::new(0.2, 0.3, 0.0), 1.2, 0.5);
        let ctl = StepControl {
            eps_pos: [0.0; 3],
            eps_phi: 0.0,
            eps_theta: 0.0,
            ..StepControl::default()
        };
        assert!(matches!(
            adaptive_step(&s, &ctl, &affine()),
            Err(Error::StepUnderflow { .. })
        ));
        let ctl = StepControl {
            eps_pos: [0.0; 3],
            eps_phi: 0.0,
            eps_theta: 0.0,
            ..StepControl::default()
        };
        assert!(adaptive_step(&s, &ctl, &SpeedField::constant(1.0).unwrap()).is_err());
    }

    #[test]
    fn straight_ray_reaches_budget() {
        let start = RayState::new(Point3::zeros(), FRAC_PI_2, 0.0);
        let path = trace_ray(
            start,
            2.0,
            &StepControl::default(),
            &big_box(),
            &SpeedField::constant(1.0).unwrap(),
        )
        .unwrap();
        let last = path.last();
        assert_eq!(path.status, TraceStatus::Completed);
        assert_eq!(last.t, 2.0);
        assert!((last.pos - Point3::new(2.0, 0.0, 0.0)).norm() < 1e-9);
        for (w, h) in path.states.windows(2).zip(&path.steps) {
            assert!(w[1].t > w[0].t);
            assert!((w[1].t - w[0].t - h).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_ray_matches_closed_form() {
        let start = RayState::new(Point3::zeros(), FRAC_PI_2, FRAC_PI_4);
        let ctl = StepControl::default();
        for (budget, expect) in [(1.0, 1.5566), (0.125, 0.0966)] {
            let path = trace_ray(start, budget, &ctl, &big_box(), &affine()).unwrap();
            let p = path.last().pos;
            assert!((p.x - expect).abs() / expect < 1e-2);
            assert!((p.y - expect).abs() / expect < 1e-2);
            assert!((p.x - oracle(budget)).abs() < 1e-9);
        }
    }

    #[test]
    fn ray_stops_at_domain_exit() {
        let dom =
            Domain::new_box(Point3::new(-1.0, -1.0, -1.0), Point3::new(1.0, 1.0, 1.0)).unwrap();
        let start = RayState::new(Point3::zeros(), FRAC_PI_2, 0.0);
        let path = trace_ray(
            start,
            5.0,
            &StepControl::default(),
            &dom,
            &SpeedField::constant(1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(path.status, TraceStatus::ExitedDomain);
        assert!(path.last().pos.x <= 1.0 && path.last().pos.x > 0.99);
    }

    #[test]
    fn time_consistency_straight_ray() {
        let start = RayState::new(Point3::zeros(), 1.1, 0.7);
        let field = SpeedField::constant(1.0).unwrap();
        let path = trace_ray(start, 2.0, &StepControl::default(), &big_box(), &field).unwrap();
        assert!(verify_time_consistency(&path, &field).unwrap() < 1e-10);
    }

    #[test]
    fn time_consistency_oracle_ray() {
        let start = RayState::new(Point3::zeros(), FRAC_PI_2, FRAC_PI_4);
        let field = affine();
        let path = trace_ray(start, 1.0, &StepControl::default(), &big_box(), &field).unwrap();
        assert!(verify_time_consistency(&path, &field).unwrap() < 1e-4);
    }

    #[test]
    fn time_consistency_single_panel_is_second_order() {
        // Trapezoid quadrature on a curved ray: halving the panel cuts the
        // residual by roughly four.
        let field = affine();
        let start = RayState::new(Point3::new(0.5, 0.0, 0.0), FRAC_PI_2, 2.0);
        let one = rk4_step(&start, 0.2, &field).unwrap();
        let mid = rk4_step(&start, 0.1, &field).unwrap();
        let two = rk4_step(&mid, 0.1, &field).unwrap();
        let single = RayPath {
            states: vec![start, one],
            steps: vec![0.2],
            status: TraceStatus::Completed,
        };
        let double = RayPath {
            states: vec![start, mid, two],
            steps: vec![0.1, 0.1],
            status: TraceStatus::Completed,
        };
        let r1 = verify_time_consistency(&single, &field).unwrap();
        let r2 = verify_time_consistency(&double, &field).unwrap();
        assert!(r1 > r2);
        let ratio = r1 / r2;
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
    }
}
