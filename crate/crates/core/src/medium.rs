//! The known speed-of-sound field c(x, y, z) and its gradient.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Speed of sound in m/s over the whole domain, obstacle excluded.
#[derive(Debug, Clone, PartialEq)]
pub enum SpeedField {
    Constant(f64),
    /// c = a·x + b·y + d
    AffineXY {
        a: f64,
        b: f64,
        d: f64,
    },
    GridSampled(GridField),
}

impl SpeedField {
    pub fn constant(c0: f64) -> Result<Self> {
        if !(c0.is_finite() && c0 > 0.0) {
            return Err(Error::InvalidField(format!(
                "constant speed must be positive, got {c0}"
            )));
        }
        Ok(SpeedField::Constant(c0))
    }

    pub fn affine_xy(a: f64, b: f64, d: f64) -> Result<Self> {
        if ![a, b, d].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidField(
                "affine coefficients must be finite".into(),
            ));
        }
        Ok(SpeedField::AffineXY { a, b, d })
    }

    pub fn speed(&self, p: &Point3) -> Result<f64> {
        let c = match self {
            SpeedField::Constant(c0) => *c0,
            SpeedField::AffineXY { a, b, d } => a * p.x + b * p.y + d,
            SpeedField::GridSampled(g) => g.interpolate(p)?.0,
        };
        check_positive(c, p)
    }

    pub fn gradient(&self, p: &Point3) -> Result<Point3> {
        Ok(self.speed_and_gradient(p)?.1)
    }

    /// Speed and gradient in one evaluation; this is what the ray equations call.
    pub fn speed_and_gradient(&self, p: &Point3) -> Result<(f64, Point3)> {
        match self {
            SpeedField::Constant(c0) => Ok((*c0, Point3::zeros())),
            SpeedField::AffineXY { a, b, d } => {
                let c = check_positive(a * p.x + b * p.y + d, p)?;
                Ok((c, Point3::new(*a, *b, 0.0)))
            }
            SpeedField::GridSampled(g) => {
                let (c, grad) = g.interpolate(p)?;
                Ok((check_positive(c, p)?, grad))
            }
        }
    }
}

fn check_positive(c: f64, p: &Point3) -> Result<f64> {
    if c > 0.0 {
        Ok(c)
    } else {
        Err(Error::NonPositiveSpeed {
            speed: c,
            x: p.x,
            y: p.y,
            z: p.z,
        })
    }
}

/// Speeds sampled on a regular lattice, trilinearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    dims: [usize; 3],
    origin: Point3,
    spacing: Point3,
    /// x-fastest ordering
    samples: Vec<f64>,
}

impl GridField {
    pub fn new(
        dims: [usize; 3],
        origin: Point3,
        spacing: Point3,
        samples: Vec<f64>,
    ) -> Result<Self> {
        if dims.iter().any(|&n| n < 2) {
            return Err(Error::InvalidField(format!(
                "grid needs at least two nodes per axis, got {dims:?}"
            )));
        }
        if !(0..3).all(|i| spacing[i].is_finite() && spacing[i] > 0.0) {
            return Err(Error::InvalidField("grid spacing must be positive".into()));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidField("grid origin must be finite".into()));
        }
        let n = dims[0] * dims[1] * dims[2];
        if samples.len() != n {
            return Err(Error::InvalidField(format!(
                "expected {n} samples, got {}",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidField(format!(
                "grid sample {bad} is not positive"
            )));
        }
        Ok(Self {
            dims,
            origin,
            spacing,
            samples,
        })
    }

    /// Samples a function at every node.
    pub fn from_fn(
        dims: [usize; 3],
        origin: Point3,
        spacing: Point3,
        f: impl Fn(&Point3) -> f64,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    samples.push(f(&Self::node_position(origin, spacing, [i, j, k])));
                }
            }
        }
        Self::new(dims, origin, spacing, samples)
    }

    fn node_position(origin: Point3, spacing: Point3, idx: [usize; 3]) -> Point3 {
        Point3::new(
            origin.x + idx[0] as f64 * spacing.x,
            origin.y + idx[1] as f64 * spacing.y,
            origin.z + idx[2] as f64 * spacing.z,
        )
    }

    pub fn node(&self, idx: [usize; 3]) -> Point3 {
        Self::node_position(self.origin, self.spacing, idx)
    }

    pub fn sample(&self, idx: [usize; 3]) -> f64 {
        self.samples[idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])]
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Far corner of the sampled region.
    pub fn extent(&self) -> Point3 {
        self.node([self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1])
    }

    /// Value and analytic gradient of the trilinear interpolant.
    fn interpolate(&self, p: &Point3) -> Result<(f64, Point3)> {
        let mut cell = [0usize; 3];
        let mut frac = [0.0; 3];
        for axis in 0..3 {
            let u = (p[axis] - self.origin[axis]) / self.spacing[axis];
            let last = (self.dims[axis] - 1) as f64;
            // tolerate round-off on the far face
            if !(u >= -1e-12 && u <= last + 1e-12) {
                return Err(Error::OutsideField {
                    x: p.x,
                    y: p.y,
                    z: p.z,
                });
            }
            let u = u.clamp(0.0, last);
            let i = (u.floor() as usize).min(self.dims[axis] - 2);
            cell[axis] = i;
            frac[axis] = u - i as f64;
        }
        let [i, j, k] = cell;
        let [fx, fy, fz] = frac;
        let c = |di, dj, dk| self.sample([i + di, j + dj, k + dk]);

        let (c000, c100, c010, c110) = (c(0, 0, 0), c(1, 0, 0), c(0, 1, 0), c(1, 1, 0));
        let (c001, c101, c011, c111) = (c(0, 0, 1), c(1, 0, 1), c(0, 1, 1), c(1, 1, 1));

        let c00 = c000 + fx * (c100 - c000);
        let c10 = c010 + fx * (c110 - c010);
        let c01 = c001 + fx * (c101 - c001);
        let c11 = c011 + fx * (c111 - c011);
        let c0 = c00 + fy * (c10 - c00);
        let c1 = c01 + fy * (c11 - c01);
        let value = c0 + fz * (c1 - c0);

        let lerp_yz = |a00: f64, a10: f64, a01: f64, a11: f64| {
            let a0 = a00 + fy * (a10 - a00);
            let a1 = a01 + fy * (a11 - a01);
            a0 + fz * (a1 - a0)
        };
        let dx = lerp_yz(c100 - c000, c110 - c010, c101 - c001, c111 - c011) / self.spacing.x;
        let dy = {
            let d0 = c10 - c00;
            let d1 = c11 - c01;
            (d0 + fz * (d1 - d0)) / self.spacing.y
        };
        let dz = (c1 - c0) / self.spacing.z;
        Ok((value, Point3::new(dx, dy, dz)))
    }

    /// Parses the text format: a header `nx ny nz ox oy oz dx dy dz` followed by
    /// nx·ny·nz whitespace-separated speeds, x fastest.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim_start().starts_with('#'))
            .flat_map(|(n, l)| l.split_whitespace().map(move |t| (n + 1, t)));

        let mut header = [0.0f64; 9];
        for (slot, value) in header.iter_mut().enumerate() {
            let (line, tok) = tokens.next().ok_or(Error::Parse {
                line: 1,
                message: format!("grid header needs 9 values, found {slot}"),
            })?;
            *value = tok.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad header value `{tok}`"),
            })?;
        }
        let dims = [header[0], header[1], header[2]].map(|v| v as usize);
        if header[..3].iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
            return Err(Error::Parse {
                line: 1,
                message: "grid dimensions must be non-negative integers".into(),
            });
        }
        let origin = Point3::new(header[3], header[4], header[5]);
        let spacing = Point3::new(header[6], header[7], header[8]);
        let samples = tokens
            .map(|(line, tok)| {
                tok.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad speed sample `{tok}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dims, origin, spacing, samples)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {} {} {} {} {} {} {}\n",
            self.dims[0],
            self.dims[1],
            self.dims[2],
            self.origin.x,
            self.origin.y,
            self.origin.z,
            self.spacing.x,
            self.spacing.y,
            self.spacing.z
        );
        for row in self.samples.chunks(self.dims[0]) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}
