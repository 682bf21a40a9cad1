use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ScenarioConfig, Solver};
use super::run::{prepare, simulate, Prepared};
use crate::{Error, Result};

/// Runs whose final ergodicity exceeds this at the step cap are flagged.
pub const FLAG_THRESHOLD: f64 = 0.5;

/// Environment variable that sets the worker count when the spec does not.
pub const WORKERS_ENV: &str = "ERGOCOV_WORKERS";

/// A base scenario, a grid of field overrides, and the seeds to run each
/// grid cell with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub base: ScenarioConfig,
    /// Field name to the values it takes. Cells are the cartesian product.
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<serde_json::Value>>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Every grid cell as its override labels and resulting config.
    pub fn cells(&self) -> Result<Vec<(BTreeMap<String, String>, ScenarioConfig)>> {
        if self.seeds.is_empty() {
            return Err(Error::Config("sweep needs at least one seed".into()));
        }
        let mut cells = vec![(BTreeMap::new(), self.base.clone())];
        for (key, values) in &self.grid {
            if values.is_empty() {
                return Err(Error::Config(format!("grid field {key:?} has no values")));
            }
            let mut next = Vec::with_capacity(cells.len() * values.len());
            for (labels, cfg) in &cells {
                for v in values {
                    let text = v.to_string();
                    let mut cfg = cfg.clone();
                    cfg.apply_override(key, &text)?;
                    let mut labels = labels.clone();
                    labels.insert(key.clone(), text);
                    next.push((labels, cfg));
                }
            }
            cells = next;
        }
        for (_, cfg) in &cells {
            cfg.validate()?;
        }
        Ok(cells)
    }

    fn worker_count(&self) -> usize {
        self.workers
            .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
            .filter(|&n| n > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub cell: usize,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    pub final_ergodicity: Option<f64>,
    pub steps: usize,
    pub flagged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: usize,
    pub params: BTreeMap<String, String>,
    pub runs: usize,
    pub errors: usize,
    pub flagged: usize,
    pub median: Option<f64>,
    pub lower_quartile: Option<f64>,
    pub upper_quartile: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub runs: Vec<SweepRun>,
    pub cells: Vec<CellSummary>,
}

impl SweepReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("runs.csv"), runs_csv(&self.runs)?)?;
        let json = serde_json::to_string_pretty(&self.cells).expect("summary serializes");
        std::fs::write(dir.join("cells.json"), json)?;
        Ok(())
    }
}

/// Runs every cell and seed. Cells that share a cloud and Laplacian
/// parameters share one preprocessing pass; spectral cells use a
/// truncation of the largest basis any of them asks for.
pub fn run_sweep(spec: &SweepSpec, base_dir: &Path) -> Result<SweepReport> {
    let cells = spec.cells()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.worker_count())
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, (_, cfg)) in cells.iter().enumerate() {
        let key = serde_json::to_string(&(&cfg.cloud, &cfg.laplacian)).expect("config serializes");
        groups.entry(key).or_default().push(i);
    }

    let mut prepared: Vec<Option<Arc<Prepared>>> = vec![None; cells.len()];
    for members in groups.values() {
        let first = &cells[members[0]].1;
        let modes = members
            .iter()
            .filter(|&&i| cells[i].1.solver == Solver::Spectral)
            .map(|&i| cells[i].1.n_modes)
            .max();
        let cloud = first.cloud.load(base_dir)?;
        let prep = Arc::new(pool.install(|| prepare(cloud, &first.laplacian, modes))?);
        for &i in members {
            prepared[i] = Some(prep.clone());
        }
    }

    let targets = cells
        .iter()
        .zip(&prepared)
        .map(|((_, cfg), prep)| {
            cfg.target
                .evaluate(&prep.as_ref().expect("prepared").cloud, base_dir)
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| spec.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let runs: Vec<SweepRun> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, seed)| {
                let (params, cfg) = &cells[c];
                let cfg = ScenarioConfig {
                    seed,
                    output: None,
                    ..cfg.clone()
                };
                let prep = prepared[c].as_ref().expect("prepared");
                let (final_ergodicity, steps, error) = match simulate(prep, &targets[c], &cfg) {
                    Ok(t) => (Some(t.summary.final_ergodicity), t.summary.steps, None),
                    Err(e) => (None, 0, Some(e.to_string())),
                };
                SweepRun {
                    cell: c,
                    params: params.clone(),
                    seed,
                    flagged: final_ergodicity.is_some_and(|e| e > FLAG_THRESHOLD),
                    final_ergodicity,
                    steps,
                    error,
                }
            })
            .collect()
    });
    let cells = aggregate(&runs);
    Ok(SweepReport { runs, cells })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Per-cell statistics over seeds. Failed runs are counted, not averaged.
pub fn aggregate(runs: &[SweepRun]) -> Vec<CellSummary> {
    let mut by_cell: BTreeMap<usize, Vec<&SweepRun>> = BTreeMap::new();
    for r in runs {
        by_cell.entry(r.cell).or_default().push(r);
    }
    by_cell
        .into_iter()
        .map(|(cell, rs)| {
            let mut values: Vec<f64> = rs.iter().filter_map(|r| r.final_ergodicity).collect();
            values.sort_by(f64::total_cmp);
            let q = |p| (!values.is_empty()).then(|| quantile(&values, p));
            CellSummary {
                cell,
                params: rs[0].params.clone(),
                runs: rs.len(),
                errors: rs.iter().filter(|r| r.error.is_some()).count(),
                flagged: rs.iter().filter(|r| r.flagged).count(),
                median: q(0.5),
                lower_quartile: q(0.25),
                upper_quartile: q(0.75),
            }
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct RunRow {
    cell: usize,
    params: String,
    seed: u64,
    final_ergodicity: Option<f64>,
    steps: usize,
    flagged: bool,
    error: Option<String>,
}

fn params_to_string(p: &BTreeMap<String, String>) -> String {
    serde_json::to_string(p).expect("params serialize")
}

pub fn runs_csv(runs: &[SweepRun]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in runs {
        w.serialize(RunRow {
            cell: r.cell,
            params: params_to_string(&r.params),
            seed: r.seed,
            final_ergodicity: r.final_ergodicity,
            steps: r.steps,
            flagged: r.flagged,
            error: r.error.clone(),
        })
        .map_err(|e| Error::Parse {
            line: 0,
            msg: e.to_string(),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse {
        line: 0,
        msg: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn parse_runs_csv(text: &str) -> Result<Vec<SweepRun>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    rd.deserialize::<RunRow>()
        .enumerate()
        .map(|(i, row)| {
            let bad = |msg: String| Error::Parse { line: i + 2, msg };
            let row = row.map_err(|e| bad(e.to_string()))?;
            Ok(SweepRun {
                cell: row.cell,
                params: serde_json::from_str(&row.params).map_err(|e| bad(e.to_string()))?,
                seed: row.seed,
                final_ergodicity: row.final_ergodicity,
                steps: row.steps,
                flagged: row.flagged,
                error: row.error.filter(|e| !e.is_empty()),
            })
        })
        .collect()
}
