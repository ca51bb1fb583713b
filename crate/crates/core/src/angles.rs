//! Discretized launch directions for receiver sweeps.
//!
//! Azimuths are uniform in `theta`; zenith angles are uniform in `cos(phi)`
//! so that grid points cover equal solid angle. Doubling both counts yields a
//! grid that contains every point of the original one.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ray::POLAR_CUTOFF;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub phi_min: f64,
    pub phi_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub n_phi: usize,
    pub n_theta: usize,
}

/// Integer grid coordinates of one launch direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridIndex {
    pub i_phi: usize,
    pub j_theta: usize,
}

impl AngleGrid {
    pub fn full_sphere(n_phi: usize, n_theta: usize) -> Self {
        Self {
            phi_min: 0.0,
            phi_max: PI,
            theta_min: 0.0,
            theta_max: TAU,
            n_phi,
            n_theta,
        }
    }

    /// Directions in the xy-plane only.
    pub fn planar(n_theta: usize) -> Self {
        Self::planar_sector(0.0, TAU, n_theta)
    }

    pub fn planar_sector(theta_min: f64, theta_max: f64, n_theta: usize) -> Self {
        Self {
            phi_min: FRAC_PI_2,
            phi_max: FRAC_PI_2,
            theta_min,
            theta_max,
            n_phi: 1,
            n_theta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_phi == 0 || self.n_theta == 0 {
            return Err(Error::InvalidConfig(
                "angle grid counts must be at least 1".into(),
            ));
        }
        if !(0.0 <= self.phi_min && self.phi_min <= self.phi_max && self.phi_max <= PI) {
            return Err(Error::InvalidConfig(format!(
                "zenith range [{}, {}] must lie in [0, pi]",
                self.phi_min, self.phi_max
            )));
        }
        let span = self.theta_max - self.theta_min;
        if !(span > 0.0 && span <= TAU + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "azimuth range [{}, {}] must be nonempty and at most 2 pi wide",
                self.theta_min, self.theta_max
            )));
        }
        Ok(())
    }

    pub fn is_full_circle(&self) -> bool {
        self.theta_max - self.theta_min >= TAU - 1e-12
    }

    fn is_single_phi(&self) -> bool {
        self.phi_max - self.phi_min < 1e-15
    }

    pub fn phi_count(&self) -> usize {
        if self.is_single_phi() {
            1
        } else {
            self.n_phi + 1
        }
    }

    pub fn theta_count(&self) -> usize {
        if self.is_full_circle() {
            self.n_theta
        } else {
            self.n_theta + 1
        }
    }

    pub fn phi_at(&self, i: usize) -> f64 {
        if self.is_single_phi() {
            return self.phi_min;
        }
        let (c0, c1) = (self.phi_min.cos(), self.phi_max.cos());
        let c = c0 + (c1 - c0) * i as f64 / self.n_phi as f64;
        c.clamp(-1.0, 1.0).acos()
    }

    pub fn theta_at(&self, j: usize) -> f64 {
        self.theta_min + (self.theta_max - self.theta_min) * j as f64 / self.n_theta as f64
    }

    /// Launch angles at an index, or `None` for directions too close to a pole.
    pub fn angles_at(&self, idx: GridIndex) -> Option<(f64, f64)> {
        let phi = self.phi_at(idx.i_phi);
        if phi.sin().abs() < POLAR_CUTOFF.sin() {
            return None;
        }
        Some((phi, self.theta_at(idx.j_theta)))
    }

    /// All usable grid points, zenith-major.
    pub fn indices(&self) -> Vec<GridIndex> {
        let mut out = Vec::with_capacity(self.phi_count() * self.theta_count());
        for i_phi in 0..self.phi_count() {
            for j_theta in 0..self.theta_count() {
                let idx = GridIndex { i_phi, j_theta };
                if self.angles_at(idx).is_some() {
                    out.push(idx);
                }
            }
        }
        out
    }

    pub fn directions(&self) -> Vec<(f64, f64)> {
        self.indices()
            .into_iter()
            .filter_map(|idx| self.angles_at(idx))
            .collect()
    }

    /// Grid points within `radius` index steps of `center` on each axis; the
    /// azimuth wraps around on a full circle.
    pub fn neighborhood(&self, center: GridIndex, radius: usize) -> Vec<GridIndex> {
        let np = self.phi_count();
        let nt = self.theta_count();
        let i_lo = center.i_phi.saturating_sub(radius);
        let i_hi = (center.i_phi + radius).min(np - 1);
        let mut js: Vec<usize> = if self.is_full_circle() && 2 * radius + 1 >= nt {
            (0..nt).collect()
        } else if self.is_full_circle() {
            (0..=2 * radius)
                .map(|k| (center.j_theta + nt + k - radius) % nt)
                .collect()
        } else {
            (center.j_theta.saturating_sub(radius)..=(center.j_theta + radius).min(nt - 1))
                .collect()
        };
        js.sort_unstable();
        let mut out = Vec::new();
        for i_phi in i_lo..=i_hi {
            for &j_theta in &js {
                let idx = GridIndex { i_phi, j_theta };
                if self.angles_at(idx).is_some() {
                    out.push(idx);
                }
            }
        }
        out
    }

    /// Radius at which [`neighborhood`](Self::neighborhood) covers every point.
    pub fn covering_radius(&self) -> usize {
        self.phi_count().max(self.theta_count())
    }

    /// Largest angular spacing between neighbouring grid points (rad).
    pub fn angle_step(&self) -> f64 {
        let d_theta = (self.theta_max - self.theta_min) / self.n_theta as f64;
        if self.is_single_phi() {
            return d_theta;
        }
        // uniform in cos(phi): the widest gap sits next to the pole-most end
        let d_phi = (0..self.n_phi)
            .map(|i| (self.phi_at(i + 1) - self.phi_at(i)).abs())
            .fold(0.0, f64::max);
        d_theta.max(d_phi)
    }

    /// Same sector with both counts doubled.
    pub fn doubled(&self) -> Self {
        Self {
            n_phi: self.n_phi * 2,
            n_theta: self.n_theta * 2,
            ..*self
        }
    }

    /// Index of the grid point whose angles equal `(phi, theta)` within `tol`.
    pub fn locate(&self, phi: f64, theta: f64, tol: f64) -> Option<GridIndex> {
        self.indices().into_iter().find(|idx| {
            let (p, t) = self.angles_at(*idx).expect("indices are usable");
            (p - phi).abs() < tol && angle_diff(t, theta) < tol
        })
    }
}

/// Absolute difference of two azimuths on the circle.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_full_circle_has_n_points() {
        let g = AngleGrid::planar(8);
        let d = g.directions();
        assert_eq!(d.len(), 8);
        assert!(d.iter().all(|(p, _)| *p == FRAC_PI_2));
        assert!((d[2].1 - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn closed_sector_includes_both_ends() {
        let g = AngleGrid::planar_sector(0.5, 1.0, 5);
        let d = g.directions();
        assert_eq!(d.len(), 6);
        assert_eq!(d[0].1, 0.5);
        assert_eq!(d[5].1, 1.0);
    }

    #[test]
    fn full_sphere_skips_poles_and_is_uniform_in_cos() {
        let g = AngleGrid::full_sphere(4, 6);
        let d = g.directions();
        // 5 zenith rows, the two polar ones dropped
        assert_eq!(d.len(), 3 * 6);
        let cos: Vec<f64> = (0..=4).map(|i| g.phi_at(i).cos()).collect();
        for w in cos.windows(2) {
            assert!((w[0] - w[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_nests_grids() {
        let g = AngleGrid {
            phi_min: 0.3,
            phi_max: 2.0,
            theta_min: 0.0,
            theta_max: TAU,
            n_phi: 3,
            n_theta: 5,
        };
        let fine = g.doubled().directions();
        for (p, t) in g.directions() {
            assert!(fine
                .iter()
                .any(|(fp, ft)| (fp - p).abs() < 1e-12 && angle_diff(*ft, t) < 1e-12));
        }
    }

    #[test]
    fn neighborhood_wraps_and_clips() {
        let g = AngleGrid::planar(8);
        let n = g.neighborhood(
            GridIndex {
                i_phi: 0,
                j_theta: 0,
            },
            1,
        );
        let js: Vec<usize> = n.iter().map(|i| i.j_theta).collect();
        assert_eq!(js, vec![0, 1, 7]);
        let s = AngleGrid::planar_sector(0.0, 1.0, 4);
        let n = s.neighborhood(
            GridIndex {
                i_phi: 0,
                j_theta: 0,
            },
            2,
        );
        assert_eq!(n.len(), 3);
        assert_eq!(
            g.neighborhood(
                GridIndex {
                    i_phi: 0,
                    j_theta: 3
                },
                g.covering_radius()
            )
            .len(),
            8
        );
    }

    #[test]
    fn angle_step_shrinks_by_half() {
        let g = AngleGrid::planar(8);
        assert!((g.angle_step() - TAU / 8.0).abs() < 1e-15);
        assert!((g.doubled().angle_step() - TAU / 16.0).abs() < 1e-15);
    }

    #[test]
    fn locate_finds_index() {
        let g = AngleGrid::planar(16);
        let idx = g.locate(FRAC_PI_2, FRAC_PI_2, 1e-9).unwrap();
        assert_eq!(idx.j_theta, 4);
        assert!(g.locate(FRAC_PI_2, 0.1, 1e-9).is_none());
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(AngleGrid::planar(0).validate().is_err());
        assert!(AngleGrid::planar_sector(1.0, 1.0, 4).validate().is_err());
        assert!(AngleGrid::full_sphere(2, 2).validate().is_ok());
    }
}
