//! Points and the bounded observation domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cartesian position in meters.
pub type Point3 = nalgebra::Vector3<f64>;

/// The region the medium occupies. Closed: boundary points are inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Domain {
    Box { min: [f64; 3], max: [f64; 3] },
    Ball { center: [f64; 3], radius: f64 },
}

impl Domain {
    pub fn new_box(min: Point3, max: Point3) -> Result<Self> {
        let d = Domain::Box {
            min: min.into(),
            max: max.into(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn new_ball(center: Point3, radius: f64) -> Result<Self> {
        let d = Domain::Ball {
            center: center.into(),
            radius,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Box { min, max } => {
                let finite = min.iter().chain(max.iter()).all(|v| v.is_finite());
                if !finite || (0..3).any(|i| min[i] >= max[i]) {
                    return Err(Error::InvalidDomain(format!(
                        "box needs finite min < max on every axis, got {min:?} .. {max:?}"
                    )));
                }
            }
            Domain::Ball { center, radius } => {
                if !center.iter().all(|v| v.is_finite()) || !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidDomain(format!(
                        "ball needs a finite center and positive radius, got radius {radius}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point3) -> bool {
        match self {
            Domain::Box { min, max } => (0..3).all(|i| p[i] >= min[i] && p[i] <= max[i]),
            Domain::Ball { center, radius } => (p - Point3::from(*center)).norm() <= *radius,
        }
    }

    /// Largest absolute coordinate reached by the domain, used to size the region mesh.
    pub fn max_abs_coordinate(&self) -> f64 {
        match self {
            Domain::Box { min, max } => min
                .iter()
                .chain(max.iter())
                .fold(0.0_f64, |acc, v| acc.max(v.abs())),
            Domain::Ball { center, radius } => center
                .iter()
                .fold(0.0_f64, |acc, v| acc.max(v.abs() + radius)),
        }
    }
}

/// Lexicographic total order on points.
pub fn lex_cmp(a: &Point3, b: &Point3) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.z.total_cmp(&b.z))
}
