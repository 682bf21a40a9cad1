use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ScenarioConfig, Solver, StartSpec};
use crate::coverage::{
    acceleration_command, accumulate_coverage, ergodicity, estimate_gradient,
    estimate_gradient_with_degree, footprint_weights, project_agent, source_term, step_agent,
    AgentState, CoverageState, Neighborhood,
};
use crate::kdtree::KdTree;
use crate::laplacian::{build_laplacian_with, LaplacianOperator, LaplacianParams};
use crate::pointcloud::{mean_spacing_with, PointCloud};
use crate::spectral::{compute_basis, diffuse_implicit, diffuse_spectral, timestep, SpectralBasis};
use crate::{Error, Result, Vec3};

/// Everything computed once per cloud.
#[derive(Debug)]
pub struct Prepared {
    pub cloud: PointCloud,
    pub tree: KdTree,
    pub operator: LaplacianOperator,
    /// Present when a spectral basis was requested; may hold more modes
    /// than a given run uses.
    pub basis: Option<SpectralBasis>,
    pub spacing: f64,
    pub seconds: f64,
}

/// Builds the operator and, for `n_modes = Some(m)`, an `m`-mode basis.
pub fn prepare(
    cloud: PointCloud,
    params: &LaplacianParams,
    n_modes: Option<usize>,
) -> Result<Prepared> {
    let t0 = Instant::now();
    let tree = cloud.spatial_index();
    let spacing = mean_spacing_with(&cloud, &tree).map_err(|e| e.in_phase("preprocess"))?;
    let operator =
        build_laplacian_with(&cloud, &tree, params).map_err(|e| e.in_phase("preprocess"))?;
    let basis = match n_modes {
        Some(m) => Some(compute_basis(&operator, m).map_err(|e| e.in_phase("preprocess"))?),
        None => None,
    };
    Ok(Prepared {
        cloud,
        tree,
        operator,
        basis,
        spacing,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub position: Vec3,
    pub speed: f64,
    pub ergodicity: f64,
    pub source_l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_points: usize,
    pub spacing: f64,
    pub tau: f64,
    pub initial_ergodicity: f64,
    pub final_ergodicity: f64,
    pub steps: usize,
    pub stopped_early: bool,
    pub relocations: Vec<usize>,
    pub preprocess_seconds: f64,
    pub loop_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
    pub config: ScenarioConfig,
    pub version: String,
}

pub const TRACE_HEADER: &str = "step,x,y,z,speed,ergodicity,source_l1";

impl RunTrace {
    pub fn trace_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            let p = r.position;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.step, p.x, p.y, p.z, r.speed, r.ergodicity, r.source_l1
            );
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let v = serde_json::json!({
            "summary": self.summary,
            "config": self.config,
            "version": self.version,
        });
        serde_json::to_string_pretty(&v).expect("summary serializes")
    }

    /// Writes `trace.csv` and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("trace.csv"), self.trace_csv())?;
        std::fs::write(dir.join("summary.json"), self.summary_json())?;
        Ok(())
    }
}

/// Parses a trace written by [`RunTrace::trace_csv`].
pub fn parse_trace_csv(text: &str) -> Result<Vec<StepRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(Error::Parse {
            line: 1,
            msg: "unexpected trace header".into(),
        });
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |msg: String| Error::Parse { line: i + 2, msg };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad(format!("expected 7 fields, got {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(e.to_string()));
            Ok(StepRecord {
                step: f[0]
                    .parse()
                    .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                position: Vec3::new(num(f[1])?, num(f[2])?, num(f[3])?),
                speed: num(f[4])?,
                ergodicity: num(f[5])?,
                source_l1: num(f[6])?,
            })
        })
        .collect()
}

fn start_position(
    prep: &Prepared,
    target: &[f64],
    start: &StartSpec,
    rng: &mut ChaCha8Rng,
) -> Vec3 {
    let pts = prep.cloud.positions();
    match start {
        StartSpec::Random => pts[rng.random_range(0..pts.len())],
        StartSpec::Point(p) => Vec3::from(*p),
        StartSpec::Farthest { pool } => {
            let total: f64 = target.iter().sum();
            let centroid = pts.iter().zip(target).map(|(x, p)| x * *p).sum::<Vec3>() / total;
            let mut order: Vec<usize> = (0..pts.len()).collect();
            order.sort_by(|&a, &b| {
                let da = (pts[a] - centroid).norm();
                let db = (pts[b] - centroid).norm();
                db.total_cmp(&da).then(a.cmp(&b))
            });
            let k = (*pool).min(order.len());
            pts[order[rng.random_range(0..k)]]
        }
    }
}

fn relocate(prep: &Prepared, agent: &mut AgentState) -> Result<Neighborhood> {
    let i = prep
        .tree
        .nearest(&agent.position)
        .ok_or_else(|| Error::domain("empty cloud"))?;
    agent.position = prep.cloud.positions()[i];
    agent.velocity = Vec3::zeros();
    project_agent(&prep.cloud, &prep.tree, agent, prep.spacing)
}

fn is_lost(e: &Error) -> bool {
    matches!(e, Error::LostAgent { .. } | Error::Geometry(_))
}

/// Runs the coverage loop on a prepared cloud. `target` is unnormalized.
pub fn simulate(prep: &Prepared, target: &[f64], cfg: &ScenarioConfig) -> Result<RunTrace> {
    cfg.validate()?;
    let t0 = Instant::now();
    let cloud = &prep.cloud;
    let mass = prep.operator.mass();
    let tau = timestep(prep.spacing, cfg.alpha)?;
    let basis = match cfg.solver {
        Solver::Spectral => {
            let full = prep
                .basis
                .as_ref()
                .ok_or_else(|| Error::Config("spectral solver needs a precomputed basis".into()))?;
            if cfg.n_modes > full.len() {
                return Err(Error::Config(format!(
                    "n_modes {} exceeds the {} precomputed modes",
                    cfg.n_modes,
                    full.len()
                )));
            }
            Some(if cfg.n_modes == full.len() {
                full.clone()
            } else {
                full.truncated(cfg.n_modes)?
            })
        }
        Solver::Implicit => None,
    };
    let diffuse = |s: &[f64]| match &basis {
        Some(b) => diffuse_spectral(b, s, tau),
        None => diffuse_implicit(&prep.operator, s, tau),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = start_position(prep, target, &cfg.start, &mut rng);
    let mut agent = AgentState::new(start, cfg.agent_radius, cfg.v_max, cfg.a_max)?;
    let mut relocations = Vec::new();
    let mut nbh = match project_agent(cloud, &prep.tree, &agent, prep.spacing) {
        Ok(n) => n,
        Err(e) if is_lost(&e) => {
            relocations.push(0);
            relocate(prep, &mut agent)?
        }
        Err(e) => return Err(e.in_phase("coverage")),
    };
    agent.position = nbh.projected();

    let mut state = CoverageState::new(target, mass, cfg.dt)?;
    let initial = ergodicity(&state)?;
    let mut records = Vec::with_capacity(cfg.steps);
    let mut stopped_early = false;
    for step in 1..=cfg.steps {
        let mut run = || -> Result<_> {
            let w = footprint_weights(&nbh, cfg.epsilon)?;
            accumulate_coverage(&mut state, &nbh, &w, mass)?;
            let s = source_term(&mut state).to_vec();
            let source_l1: f64 = s.iter().sum();
            let u = diffuse(&s)?;
            let g = estimate_gradient(cloud, &u, &nbh, &w)
                .or_else(|_| estimate_gradient_with_degree(cloud, &u, &nbh, &w, 1))
                .unwrap_or_else(|_| Vec3::zeros());
            let scale = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            Ok((
                source_l1,
                acceleration_command(&g, scale, cfg.agent_radius, cfg.a_max),
            ))
        };
        let (source_l1, accel) = run().map_err(|e| e.in_phase("coverage"))?;
        match step_agent(cloud, &prep.tree, &agent, &accel, cfg.dt, prep.spacing) {
            Ok((a, n)) => {
                agent = a;
                nbh = n;
            }
            Err(e) if is_lost(&e) => {
                relocations.push(step);
                nbh = relocate(prep, &mut agent).map_err(|e| e.in_phase("coverage"))?;
                agent.position = nbh.projected();
            }
            Err(e) => return Err(e.in_phase("coverage")),
        }
        let eps = ergodicity(&state)?;
        records.push(StepRecord {
            step,
            position: agent.position,
            speed: agent.speed(),
            ergodicity: eps,
            source_l1,
        });
        if eps < cfg.stop_below {
            stopped_early = true;
            break;
        }
    }
    let loop_seconds = t0.elapsed().as_secs_f64();
    Ok(RunTrace {
        summary: RunSummary {
            n_points: cloud.len(),
            spacing: prep.spacing,
            tau,
            initial_ergodicity: initial,
            final_ergodicity: records.last().map_or(initial, |r| r.ergodicity),
            steps: records.len(),
            stopped_early,
            relocations,
            preprocess_seconds: prep.seconds,
            loop_seconds,
            total_seconds: prep.seconds + loop_seconds,
        },
        records,
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

/// Loads, preprocesses and simulates one scenario. Relative paths in the
/// config resolve against `base_dir`.
pub fn run_scenario(cfg: &ScenarioConfig, base_dir: &Path) -> Result<RunTrace> {
    let t0 = Instant::now();
    cfg.validate()?;
    let cloud = cfg.cloud.load(base_dir)?;
    let target = cfg.target.evaluate(&cloud, base_dir)?;
    let modes = (cfg.solver == Solver::Spectral).then_some(cfg.n_modes);
    let prep = prepare(cloud, &cfg.laplacian, modes)?;
    let mut trace = simulate(&prep, &target, cfg)?;
    trace.summary.total_seconds = t0.elapsed().as_secs_f64();
    if let Some(dir) = &cfg.output {
        trace.write(&base_dir.join(dir))?;
    }
    Ok(trace)
}
