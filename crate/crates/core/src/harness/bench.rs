use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fixtures::downsample_to;
use crate::laplacian::{build_laplacian, LaplacianOperator, LaplacianParams};
use crate::pointcloud::{mean_spacing, PointCloud};
use crate::sparse::EnvelopeCholesky;
use crate::spectral::{compute_basis, diffuse_spectral, timestep};
use crate::{Error, Result};

/// Largest cloud for which the dense inverse is formed (8 bytes × n²).
pub const DENSE_LIMIT: usize = 8000;

const REPEATS: usize = 5;
const ALPHA: f64 = 10.0;
/// Diffusion steps are batched until one measurement takes this long.
const MIN_BATCH_SECONDS: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMode {
    Preprocess,
    Diffuse,
}

impl std::str::FromStr for BenchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "preprocess" => Ok(BenchMode::Preprocess),
            "diffuse" => Ok(BenchMode::Diffuse),
            _ => Err(Error::Config(format!("unknown benchmark mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMethod {
    Spectral,
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    #[serde(rename = "n_P")]
    pub n_points: usize,
    #[serde(rename = "n_M")]
    pub n_modes: usize,
    pub method: BenchMethod,
    pub phase: BenchMode,
    /// Median over the timed repetitions; `None` when skipped.
    pub seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

/// The implicit route with its inverse formed up front:
/// `u_τ = (M + τS)⁻¹ M u₀` as one dense matrix.
pub fn dense_implicit_operator(op: &LaplacianOperator, tau: f64) -> Result<DMatrix<f64>> {
    let n = op.len();
    let a = op.stiffness().add_scaled_diagonal(tau, 1.0, op.mass());
    let chol = EnvelopeCholesky::factor(&a)?;
    let mut out = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = op.mass()[j];
        let col = chol.solve(&e);
        out.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    Ok(out)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// One discarded warmup, then the median of five.
fn time_median(mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    f()?;
    let mut times = Vec::with_capacity(REPEATS);
    for _ in 0..REPEATS {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64());
    }
    Ok(median(times))
}

/// Per-call time of a cheap operation, batching calls so each measurement
/// is long enough to resolve.
fn time_per_call(mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let t = Instant::now();
    f()?;
    let once = t.elapsed().as_secs_f64().max(1e-7);
    let batch = ((MIN_BATCH_SECONDS / once).ceil() as usize).clamp(1, 100_000);
    let total = time_median(|| {
        for _ in 0..batch {
            f()?;
        }
        Ok(())
    })?;
    Ok(total / batch as f64)
}

fn row(
    n: usize,
    m: usize,
    method: BenchMethod,
    phase: BenchMode,
    seconds: Option<f64>,
    note: Option<String>,
) -> BenchRow {
    BenchRow {
        n_points: n,
        n_modes: m,
        method,
        phase,
        seconds,
        note,
    }
}

/// Times both solution routes on `base` voxel-filtered to each size.
/// Laplacian construction is shared and not timed.
pub fn benchmark(
    base: &PointCloud,
    sizes: &[usize],
    n_modes: usize,
    mode: BenchMode,
    params: &LaplacianParams,
) -> Result<Vec<BenchRow>> {
    if sizes.is_empty() || n_modes == 0 {
        return Err(Error::Config(
            "benchmark needs sizes and at least one mode".into(),
        ));
    }
    let mut rows = Vec::new();
    for &size in sizes {
        let cloud = downsample_to(base, size)?;
        let n = cloud.len();
        let op = build_laplacian(&cloud, params)?;
        let tau = timestep(mean_spacing(&cloud)?, ALPHA)?;
        let m = n_modes.min(n);
        let dense_note = (n > DENSE_LIMIT).then(|| {
            format!("skipped: dense inverse of {n} points exceeds the {DENSE_LIMIT}-point limit")
        });
        match mode {
            BenchMode::Preprocess => {
                let s = time_median(|| compute_basis(&op, m).map(drop))?;
                rows.push(row(n, m, BenchMethod::Spectral, mode, Some(s), None));
                let s = match &dense_note {
                    Some(_) => None,
                    None => Some(time_median(|| dense_implicit_operator(&op, tau).map(drop))?),
                };
                rows.push(row(n, m, BenchMethod::Implicit, mode, s, dense_note));
            }
            BenchMode::Diffuse => {
                let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
                let u0: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let basis = compute_basis(&op, m)?;
                let s = time_per_call(|| diffuse_spectral(&basis, &u0, tau).map(drop))?;
                rows.push(row(n, m, BenchMethod::Spectral, mode, Some(s), None));
                let s = match &dense_note {
                    Some(_) => None,
                    None => {
                        let inv = dense_implicit_operator(&op, tau)?;
                        let v = DVector::from_vec(u0.clone());
                        Some(time_per_call(|| {
                            std::hint::black_box(&inv * &v);
                            Ok(())
                        })?)
                    }
                };
                rows.push(row(n, m, BenchMethod::Implicit, mode, s, dense_note));
            }
        }
    }
    Ok(rows)
}

/// Time at `hi` points over time at `lo` points for one method.
pub fn growth_ratio(rows: &[BenchRow], method: BenchMethod, lo: usize, hi: usize) -> Option<f64> {
    let find = |target: usize| {
        rows.iter()
            .filter(|r| r.method == method)
            .min_by_key(|r| r.n_points.abs_diff(target))
            .and_then(|r| r.seconds)
    };
    Some(find(hi)? / find(lo)?)
}

pub fn rows_json(rows: &[BenchRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::grid;
    use crate::spectral::diffuse_implicit;

    #[test]
    fn dense_inverse_matches_solver() {
        let cloud = grid(12, 12, 1.0);
        let op = build_laplacian(&cloud, &LaplacianParams::default()).unwrap();
        let inv = dense_implicit_operator(&op, 0.7).unwrap();
        let u0: Vec<f64> = (0..cloud.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let direct = diffuse_implicit(&op, &u0, 0.7).unwrap();
        let via = &inv * DVector::from_vec(u0);
        for (a, b) in direct.iter().zip(via.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rows_for_both_methods() {
        let base = grid(30, 30, 1.0);
        let rows = benchmark(
            &base,
            &[200, 400],
            5,
            BenchMode::Diffuse,
            &LaplacianParams::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.seconds.is_some_and(|s| s > 0.0)));
        assert!(growth_ratio(&rows, BenchMethod::Spectral, 200, 400).is_some());
        let json = rows_json(&rows);
        assert!(json.contains("\"n_P\"") && json.contains("\"implicit\""));
        assert!("sideways".parse::<BenchMode>().is_err());
    }
}
