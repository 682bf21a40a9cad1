use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fixtures;
use crate::laplacian::LaplacianParams;
use crate::pointcloud::PointCloud;
use crate::{Error, Result, Vec3};

/// Where the cloud comes from: a file, or a generated fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CloudSource {
    Path(PathBuf),
    Grid {
        nx: usize,
        ny: usize,
        spacing: f64,
    },
    WavySheet {
        nx: usize,
        ny: usize,
        spacing: f64,
        amplitude: f64,
        seed: u64,
    },
    Icosphere {
        subdivisions: u32,
        radius: f64,
    },
}

impl CloudSource {
    pub fn load(&self, base_dir: &Path) -> Result<PointCloud> {
        match self {
            CloudSource::Path(p) => PointCloud::load(&base_dir.join(p)),
            CloudSource::Grid { nx, ny, spacing } => {
                check_fixture(*nx * *ny, *spacing)?;
                Ok(fixtures::grid(*nx, *ny, *spacing))
            }
            CloudSource::WavySheet {
                nx,
                ny,
                spacing,
                amplitude,
                seed,
            } => {
                check_fixture(*nx * *ny, *spacing)?;
                Ok(fixtures::wavy_sheet(*nx, *ny, *spacing, *amplitude, *seed))
            }
            CloudSource::Icosphere {
                subdivisions,
                radius,
            } => {
                check_fixture(1, *radius)?;
                Ok(fixtures::icosphere(*subdivisions, *radius))
            }
        }
    }
}

fn check_fixture(count: usize, length: f64) -> Result<()> {
    if count == 0 || !(length > 0.0) {
        return Err(Error::Config(
            "fixture clouds need points and a positive size".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disk {
    pub center: [f64; 3],
    pub radius: f64,
    #[serde(default = "one")]
    pub mass: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// The cloud's own target column.
    Column,
    /// Uniform over the whole cloud.
    Uniform,
    /// Painted disks.
    Disks(Vec<Disk>),
    /// One value per line, in cloud order.
    File(PathBuf),
}

impl TargetSpec {
    pub fn evaluate(&self, cloud: &PointCloud, base_dir: &Path) -> Result<Vec<f64>> {
        let values = match self {
            TargetSpec::Column => cloud
                .target()
                .ok_or_else(|| Error::Config("cloud has no target column".into()))?
                .to_vec(),
            TargetSpec::Uniform => vec![1.0; cloud.len()],
            TargetSpec::Disks(disks) => {
                let d: Vec<(Vec3, f64, f64)> = disks
                    .iter()
                    .map(|d| (Vec3::from(d.center), d.radius, d.mass))
                    .collect();
                fixtures::painted_disks(cloud, &d)
            }
            TargetSpec::File(p) => {
                let path = base_dir.join(p);
                let text = std::fs::read_to_string(&path)?;
                let mut v = Vec::with_capacity(cloud.len());
                for (i, line) in text.lines().enumerate() {
                    let t = line.trim();
                    if t.is_empty() || t.starts_with('#') {
                        continue;
                    }
                    v.push(t.parse::<f64>().map_err(|e| Error::Parse {
                        line: i + 1,
                        msg: e.to_string(),
                    })?);
                }
                v
            }
        };
        if values.len() != cloud.len() {
            return Err(Error::Config(format!(
                "target has {} values for {} points",
                values.len(),
                cloud.len()
            )));
        }
        if values.iter().any(|p| !(*p >= 0.0)) || !(values.iter().sum::<f64>() > 0.0) {
            return Err(Error::Config(
                "target must be nonnegative with positive total".into(),
            ));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Spectral,
    Implicit,
}

/// Initial agent position. The seed picks among candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StartSpec {
    /// Any cloud point.
    Random,
    /// A fixed position.
    Point([f64; 3]),
    /// One of the `pool` points farthest from the target's centroid.
    Farthest { pool: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub cloud: CloudSource,
    pub target: TargetSpec,
    pub n_modes: usize,
    pub alpha: f64,
    pub agent_radius: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub steps: usize,
    /// Stop once ergodicity falls below this.
    pub stop_below: f64,
    pub seed: u64,
    pub solver: Solver,
    pub start: StartSpec,
    pub laplacian: LaplacianParams,
    pub output: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            cloud: CloudSource::Grid {
                nx: 30,
                ny: 30,
                spacing: 4.0,
            },
            target: TargetSpec::Uniform,
            n_modes: 100,
            alpha: 10.0,
            agent_radius: 7.5,
            v_max: 3.0,
            a_max: 3.0,
            dt: 0.1,
            epsilon: 2.0,
            steps: 1000,
            stop_below: 0.05,
            seed: 0,
            solver: Solver::Spectral,
            start: StartSpec::Random,
            laplacian: LaplacianParams::default(),
            output: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.n_modes < 1 {
            return bad("n_modes must be at least 1");
        }
        if self.steps < 1 {
            return bad("steps cap must be at least 1");
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("agent_radius", self.agent_radius),
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("dt", self.dt),
            ("epsilon", self.epsilon),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.stop_below >= 0.0) {
            return bad("stop_below must be nonnegative");
        }
        if let StartSpec::Farthest { pool } = self.start {
            if pool == 0 {
                return bad("farthest start needs a pool of at least one point");
            }
        }
        if self.laplacian.k < 6 {
            return bad("laplacian k must be at least 6");
        }
        Ok(())
    }

    /// Applies `key=value` overrides, one config field each.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let mut json = serde_json::to_value(&*self).expect("config serializes");
        let parsed: serde_json::Value = serde_json::from_str(value)
            .unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        let slot = json
            .get_mut(key)
            .ok_or_else(|| Error::Config(format!("unknown config field {key:?}")))?;
        *slot = parsed;
        *self = serde_json::from_value(json).map_err(|e| Error::Config(format!("{key}: {e}")))?;
        self.validate()
    }
}
