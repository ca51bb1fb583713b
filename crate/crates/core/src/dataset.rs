//! Broken-ray measurements and their plain-text file format.
//!
//! ```text
//! # units: m s rad Hz
//! xl yl zl xr yr zr phi theta t xi period [px py pz t1 t2]
//! 0 0 0 0 0 0 1.5707963267948966 0.7853981633974483 2 40000 P1
//! ```
//!
//! One record per line, whitespace separated. The five trailing truth columns
//! are optional as a whole; when the header names them every record has them.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;

pub const UNITS_LINE: &str = "# units: m s rad Hz";
const BASE_COLUMNS: [&str; 11] = [
    "xl", "yl", "zl", "xr", "yr", "zr", "phi", "theta", "t", "xi", "period",
];
const TRUTH_COLUMNS: [&str; 5] = ["px", "py", "pz", "t1", "t2"];

/// Where a simulated broken ray actually reflected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub point: Point3,
    pub t_transmitter: f64,
    pub t_receiver: f64,
}

/// One measurement: a ray launched from `transmitter` at `(phi, theta)` was
/// heard at `receiver` after `t` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub transmitter: Point3,
    pub receiver: Point3,
    pub phi: f64,
    pub theta: f64,
    pub t: f64,
    /// Carrier frequency in Hz. Carried along, never interpreted.
    pub xi: f64,
    pub period: String,
    pub truth: Option<Truth>,
}

/// Identity of a transmitter/receiver pair: both positions quantized.
pub type PairKey = [i64; 6];

pub const DEFAULT_PAIR_QUANTUM: f64 = 1e-6;

impl DataPoint {
    pub fn pair_key(&self, quantum: f64) -> PairKey {
        let q = |v: f64| (v / quantum).round() as i64;
        let (l, s) = (&self.transmitter, &self.receiver);
        [q(l.x), q(l.y), q(l.z), q(s.x), q(s.y), q(s.z)]
    }
}

pub fn write_data_points(points: &[DataPoint]) -> String {
    let with_truth = points.iter().any(|p| p.truth.is_some());
    let mut out = String::new();
    out.push_str(UNITS_LINE);
    out.push('\n');
    out.push_str(&BASE_COLUMNS.join(" "));
    if with_truth {
        out.push(' ');
        out.push_str(&TRUTH_COLUMNS.join(" "));
    }
    out.push('\n');
    for p in points {
        let (l, s) = (&p.transmitter, &p.receiver);
        let _ = write!(
            out,
            "{} {} {} {} {} {} {} {} {} {} {}",
            l.x, l.y, l.z, s.x, s.y, s.z, p.phi, p.theta, p.t, p.xi, p.period
        );
        if with_truth {
            // records without truth in a truth-bearing file get NaN columns
            let t = p.truth.unwrap_or(Truth {
                point: Point3::repeat(f64::NAN),
                t_transmitter: f64::NAN,
                t_receiver: f64::NAN,
            });
            let _ = write!(
                out,
                " {} {} {} {} {}",
                t.point.x, t.point.y, t.point.z, t.t_transmitter, t.t_receiver
            );
        }
        out.push('\n');
    }
    out
}

pub fn parse_data_points(text: &str) -> Result<Vec<DataPoint>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let Some((_, header)) = lines.next() else {
        return Err(Error::SchemaMismatch("missing header line".into()));
    };
    let names: Vec<&str> = header.split_whitespace().collect();
    let with_truth = if names == BASE_COLUMNS {
        false
    } else if names.len() == 16 && names[..11] == BASE_COLUMNS && names[11..] == TRUTH_COLUMNS {
        true
    } else {
        return Err(Error::SchemaMismatch(format!(
            "expected header `{}` optionally followed by `{}`, got `{header}`",
            BASE_COLUMNS.join(" "),
            TRUTH_COLUMNS.join(" ")
        )));
    };
    let width = names.len();

    let mut points = Vec::new();
    for (line, record) in lines {
        let fields: Vec<&str> = record.split_whitespace().collect();
        if fields.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", fields.len()),
            });
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("column `{}`: `{}` is not a number", names[i], fields[i]),
            })
        };
        let t = num(8)?;
        if !(t > 0.0) {
            return Err(Error::Parse {
                line,
                message: format!("travel time must be positive, got {t}"),
            });
        }
        let truth = if with_truth {
            let v = [num(11)?, num(12)?, num(13)?, num(14)?, num(15)?];
            (!v.iter().any(|x| x.is_nan())).then(|| Truth {
                point: Point3::new(v[0], v[1], v[2]),
                t_transmitter: v[3],
                t_receiver: v[4],
            })
        } else {
            None
        };
        points.push(DataPoint {
            transmitter: Point3::new(num(0)?, num(1)?, num(2)?),
            receiver: Point3::new(num(3)?, num(4)?, num(5)?),
            phi: num(6)?,
            theta: num(7)?,
            t,
            xi: num(9)?,
            period: fields[10].to_string(),
            truth,
        });
    }
    Ok(points)
}

pub fn load_data_points(path: impl AsRef<Path>) -> Result<Vec<DataPoint>> {
    parse_data_points(&std::fs::read_to_string(path)?)
}

pub fn save_data_points(path: impl AsRef<Path>, points: &[DataPoint]) -> Result<()> {
    std::fs::write(path, write_data_points(points))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(truth: bool) -> DataPoint {
        DataPoint {
            transmitter: Point3::new(0.1, -0.2, 0.0),
            receiver: Point3::new(2.0, 0.0, 1e-7),
            phi: 1.57,
            theta: 0.79,
            t: 0.25,
            xi: 40_000.0,
            period: "P1".into(),
            truth: truth.then(|| Truth {
                point: Point3::new(0.0966, 0.0966, 0.0),
                t_transmitter: 0.125,
                t_receiver: 0.125,
            }),
        }
    }

    #[test]
    fn round_trip_with_and_without_truth() {
        for truth in [false, true] {
            let pts = vec![sample(truth), sample(truth)];
            let text = write_data_points(&pts);
            assert!(text.starts_with(UNITS_LINE));
            assert_eq!(parse_data_points(&text).unwrap(), pts);
        }
    }

    #[test]
    fn header_only_is_empty() {
        let text = format!("{UNITS_LINE}\n{}\n", BASE_COLUMNS.join(" "));
        assert!(parse_data_points(&text).unwrap().is_empty());
    }

    #[test]
    fn short_record_reports_line() {
        let text = "xl yl zl xr yr zr phi theta t xi period\n0 0 0 0 0 0 1.57 0.79 2\n";
        assert_eq!(
            parse_data_points(text).unwrap_err(),
            Error::Parse {
                line: 2,
                message: "expected 11 fields, found 9".into()
            }
        );
    }

    #[test]
    fn wrong_header_is_schema_mismatch() {
        assert!(matches!(
            parse_data_points("x y z\n"),
            Err(Error::SchemaMismatch(_))
        ));
        assert!(matches!(
            parse_data_points(""),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn bad_number_reports_column() {
        let text = "xl yl zl xr yr zr phi theta t xi period\n0 0 0 0 0 0 1.57 oops 2 1 P\n";
        match parse_data_points(text) {
            Err(Error::Parse { line: 2, message }) => assert!(message.contains("theta")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pair_key_quantizes() {
        let a = sample(false);
        let mut b = a.clone();
        b.receiver.z += 1e-9;
        assert_eq!(a.pair_key(1e-6), b.pair_key(1e-6));
        b.receiver.z += 1e-3;
        assert_ne!(a.pair_key(1e-6), b.pair_key(1e-6));
    }
}
