//! Pipeline configuration, read from TOML with `section.key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::angles::AngleGrid;
use crate::error::{Error, Result};
use crate::filter::FilterConfig;
use crate::geometry::{Domain, Point3};
use crate::medium::{GridField, SpeedField};
use crate::ray::StepControl;
use crate::reconstruct::{ReconstructionConfig, Refinement};
use crate::region::MeshSpec;
use crate::seeded::SeedingConfig;
use crate::simulate::{Obstacle, SamplingPeriod, DEFAULT_EPS_HIT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant { c0: f64 },
    AffineXy { a: f64, b: f64, d: f64 },
    Grid { path: PathBuf },
}

impl FieldSpec {
    pub fn build(&self) -> Result<SpeedField> {
        match self {
            FieldSpec::Constant { c0 } => SpeedField::constant(*c0),
            FieldSpec::AffineXy { a, b, d } => SpeedField::affine_xy(*a, *b, *d),
            FieldSpec::Grid { path } => Ok(SpeedField::GridSampled(GridField::load(path)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    /// Longest one-way travel time the simulator follows a ray (s).
    pub max_time: f64,
    #[serde(default = "default_eps_hit")]
    pub eps_hit: f64,
    /// Carrier frequency stamped on every data point (Hz).
    #[serde(default = "default_xi")]
    pub xi: f64,
    /// Uniform travel-time noise amplitude (s).
    #[serde(default)]
    pub noise: f64,
}

fn default_eps_hit() -> f64 {
    DEFAULT_EPS_HIT
}

fn default_xi() -> f64 {
    40_000.0
}

/// One transmitter/receiver pair and the directions its transmitter fires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub transmitter: [f64; 3],
    pub receiver: [f64; 3],
    /// Explicit `(phi, theta)` launch angles.
    #[serde(default)]
    pub angles: Vec<[f64; 2]>,
    /// Launch angles from a grid, added after the explicit ones.
    #[serde(default)]
    pub grid: Option<AngleGrid>,
}

impl PairSpec {
    pub fn launch_angles(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self.angles.iter().map(|a| (a[0], a[1])).collect();
        if let Some(g) = &self.grid {
            out.extend(g.directions());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Brute,
    Cached,
    Seeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionSection {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_eps1")]
    pub eps1: f64,
    #[serde(default = "default_eps2")]
    pub eps2: f64,
    #[serde(default = "default_max_steps")]
    pub max_transmitter_steps: usize,
    #[serde(default = "default_max_steps")]
    pub max_receiver_steps: usize,
    #[serde(default)]
    pub refinement: Refinement,
    #[serde(default)]
    pub seeding: SeedingConfig,
}

impl Default for ReconstructionSection {
    fn default() -> Self {
        Self {
            mode: Mode::Brute,
            eps1: default_eps1(),
            eps2: default_eps2(),
            max_transmitter_steps: default_max_steps(),
            max_receiver_steps: default_max_steps(),
            refinement: Refinement::default(),
            seeding: SeedingConfig::default(),
        }
    }
}

fn default_eps1() -> f64 {
    1e-2
}

fn default_eps2() -> f64 {
    1e-3
}

fn default_max_steps() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    /// When false, every phase-1 cluster is reported regardless of support.
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// Defaults to 2·eps1.
    pub eps3: Option<f64>,
    #[serde(default = "default_q")]
    pub q: usize,
    #[serde(default = "default_quantum")]
    pub pair_quantum: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            enabled: true,
            eps3: None,
            q: default_q(),
            pair_quantum: default_quantum(),
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_q() -> usize {
    3
}

fn default_quantum() -> f64 {
    crate::dataset::DEFAULT_PAIR_QUANTUM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    /// Defaults to the smallest cube around the domain.
    pub l_m: Option<f64>,
    #[serde(default = "default_n_v")]
    pub n_v: usize,
    /// Fixed steps per cached receiver ray.
    #[serde(default = "default_n_r")]
    pub n_r: usize,
    /// Cache budget; defaults to the largest travel time plus eps2.
    pub budget: Option<f64>,
    /// Load a prebuilt cache instead of building one.
    pub cache: Option<PathBuf>,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self {
            l_m: None,
            n_v: default_n_v(),
            n_r: default_n_r(),
            budget: None,
            cache: None,
        }
    }
}

fn default_n_v() -> usize {
    16
}

fn default_n_r() -> usize {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axes {
    #[default]
    Xy,
    Xz,
    Yz,
}

impl Axes {
    pub fn indices(&self) -> (usize, usize) {
        match self {
            Axes::Xy => (0, 1),
            Axes::Xz => (0, 2),
            Axes::Yz => (1, 2),
        }
    }

    pub fn labels(&self) -> (&'static str, &'static str) {
        match self {
            Axes::Xy => ("x", "y"),
            Axes::Xz => ("x", "z"),
            Axes::Yz => ("y", "z"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub axes: Axes,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            axes: Axes::Xy,
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    /// Existing dataset; when set, simulation is skipped.
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub field: FieldSpec,
    pub domain: Domain,
    #[serde(default)]
    pub step: StepControl,
    pub simulation: Option<SimulationSection>,
    pub obstacle: Option<Obstacle>,
    #[serde(default)]
    pub periods: Vec<SamplingPeriod>,
    #[serde(default)]
    pub pairs: Vec<PairSpec>,
    pub receiver_grid: AngleGrid,
    #[serde(default)]
    pub reconstruction: ReconstructionSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub input: InputSection,
}

impl PipelineConfig {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Value =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: Self = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.step.validate()?;
        self.receiver_grid.validate()?;
        self.reconstruction_config().validate()?;
        self.filter_config().validate()?;
        if let Some(ob) = &self.obstacle {
            ob.validate()?;
            ob.validate_in(&self.domain)?;
        }
        for p in &self.periods {
            if !(p.duration > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "period `{}` needs a positive duration",
                    p.id
                )));
            }
        }
        for (k, pair) in self.pairs.iter().enumerate() {
            for (what, p) in [
                ("transmitter", pair.transmitter),
                ("receiver", pair.receiver),
            ] {
                if !self.domain.contains(&Point3::from(p)) {
                    return Err(Error::InvalidConfig(format!(
                        "pair {k}: {what} lies outside the domain"
                    )));
                }
            }
            if let Some(g) = &pair.grid {
                g.validate()?;
            }
        }
        if self.input.dataset.is_none()
            && (self.simulation.is_none() || self.obstacle.is_none() || self.pairs.is_empty())
        {
            return Err(Error::InvalidConfig(
                "without [input] dataset the config needs [simulation], [obstacle] and [[pairs]]".into(),
            ));
        }
        MeshSpec::new(self.mesh.l_m.unwrap_or(1.0), self.mesh.n_v)?;
        if self.mesh.n_r == 0 {
            return Err(Error::InvalidConfig("mesh.n_r must be at least 1".into()));
        }
        Ok(())
    }

    pub fn reconstruction_config(&self) -> ReconstructionConfig {
        let r = &self.reconstruction;
        ReconstructionConfig {
            eps1: r.eps1,
            eps2: r.eps2,
            grid: self.receiver_grid,
            max_transmitter_steps: r.max_transmitter_steps,
            max_receiver_steps: r.max_receiver_steps,
            ctl: self.step,
            refinement: r.refinement,
        }
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            eps3: self.filter.eps3.unwrap_or(2.0 * self.reconstruction.eps1),
            q: self.filter.q,
            pair_quantum: self.filter.pair_quantum,
        }
    }

    pub fn mesh_spec(&self) -> Result<MeshSpec> {
        match self.mesh.l_m {
            Some(l) => MeshSpec::new(l, self.mesh.n_v),
            None => MeshSpec::covering(&self.domain, self.mesh.n_v),
        }
    }

    /// Declared periods, or the obstacle's periods with unknown duration.
    pub fn sampling_periods(&self) -> Vec<SamplingPeriod> {
        if !self.periods.is_empty() {
            return self.periods.clone();
        }
        self.obstacle
            .iter()
            .flat_map(|o| o.trajectory.keys())
            .map(|id| SamplingPeriod {
                id: id.clone(),
                duration: f64::NAN,
            })
            .collect()
    }
}

/// Applies `a.b.c=value`. The value is read as TOML when possible and as a
/// bare string otherwise.
pub fn apply_override(root: &mut toml::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidConfig(format!("bad override key `{key}`")));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("`{key}`: `{part}` is not a table")))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    node.as_table_mut()
        .ok_or_else(|| Error::InvalidConfig(format!("`{key}` does not name a table entry")))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
