//! Truncated Laplacian eigenbasis and heat diffusion.
//!
//! The basis solves `S φ = λ M φ` for the smallest `n_M` eigenvalues with a
//! block Lanczos iteration on the shift-inverted operator `(S − σM)⁻¹M`,
//! using full reorthogonalization in the `M` inner product. When the basis
//! covers most of the spectrum the dense symmetric solver is used instead.

use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DMatrixView, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::laplacian::LaplacianOperator;
use crate::sparse::EnvelopeCholesky;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    /// Relative residual `‖Ax − θx‖_M ≤ tol·θ` on the shift-inverted operator.
    pub tol: f64,
    /// Operator applications allowed per requested eigenpair.
    pub iterations_per_mode: usize,
    pub block: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-10,
            iterations_per_mode: 50,
            block: 6,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
    mass: Vec<f64>,
}

impl SpectralBasis {
    pub fn from_parts(
        eigenvalues: Vec<f64>,
        vectors: DMatrix<f64>,
        mass: Vec<f64>,
    ) -> Result<Self> {
        if vectors.ncols() != eigenvalues.len() || vectors.nrows() != mass.len() {
            return Err(Error::domain("basis parts have mismatched shapes"));
        }
        Ok(SpectralBasis {
            eigenvalues,
            vectors,
            mass,
        })
    }

    /// Number of modes `n_M`.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn n_points(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `n_P × n_M` matrix `Φ`, one eigenvector per column.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// The leading `m` modes.
    pub fn truncated(&self, m: usize) -> Result<SpectralBasis> {
        if m == 0 || m > self.len() {
            return Err(Error::domain(format!(
                "cannot truncate {} modes to {m}",
                self.len()
            )));
        }
        Ok(SpectralBasis {
            eigenvalues: self.eigenvalues[..m].to_vec(),
            vectors: self.vectors.columns(0, m).into_owned(),
            mass: self.mass.clone(),
        })
    }

    /// Largest entry of `|ΦᵀMΦ − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut mphi = self.vectors.clone();
        for (mut row, &m) in mphi.row_iter_mut().zip(&self.mass) {
            row *= m;
        }
        let g = self.vectors.tr_mul(&mphi);
        (g - DMatrix::identity(self.len(), self.len())).amax()
    }

    /// Text dump: eigenvalues on the first line, then one row of `Φ` per point.
    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let join = |it: &mut dyn Iterator<Item = f64>| {
            it.map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ")
        };
        out.push_str(&join(&mut self.eigenvalues.iter().copied()));
        out.push('\n');
        for row in self.vectors.row_iter() {
            out.push_str(&join(&mut row.iter().copied()));
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn read_text(path: &Path, mass: Vec<f64>) -> Result<SpectralBasis> {
        let text = fs::read_to_string(path)?;
        let mut rows = text.lines().enumerate().map(|(no, line)| {
            line.split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|e| Error::Parse {
                        line: no + 1,
                        msg: e.to_string(),
                    })
                })
                .collect::<Result<Vec<f64>>>()
        });
        let eigenvalues = rows
            .next()
            .ok_or_else(|| Error::domain("empty basis file"))??;
        let m = eigenvalues.len();
        let mut data = Vec::new();
        let mut n = 0;
        for row in rows {
            let row = row?;
            if row.is_empty() {
                continue;
            }
            if row.len() != m {
                return Err(Error::domain("ragged basis file"));
            }
            data.extend(row);
            n += 1;
        }
        SpectralBasis::from_parts(eigenvalues, DMatrix::from_row_slice(n, m, &data), mass)
    }
}

pub fn compute_basis(op: &LaplacianOperator, n_modes: usize) -> Result<SpectralBasis> {
    compute_basis_with(op, n_modes, &EigenOptions::default())
}

pub fn compute_basis_with(
    op: &LaplacianOperator,
    n_modes: usize,
    opts: &EigenOptions,
) -> Result<SpectralBasis> {
    let n = op.len();
    if n_modes == 0 || n_modes > n {
        return Err(Error::domain(format!("n_M = {n_modes} outside 1..={n}")));
    }
    if !(opts.tol > 0.0) || opts.block == 0 {
        return Err(Error::domain(
            "eigensolver tolerance and block size must be positive",
        ));
    }
    let (mut values, mut vectors) = if 2 * n_modes > n {
        dense_pairs(op, n_modes)
    } else {
        lanczos_pairs(op, n_modes, opts)?
    };
    for v in values.iter_mut() {
        *v = v.max(0.0);
    }
    for mut col in vectors.column_iter_mut() {
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
    SpectralBasis::from_parts(values, vectors, op.mass().to_vec())
}

fn dense_pairs(op: &LaplacianOperator, n_modes: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = op.len();
    let isq: Vec<f64> = op.mass().iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut a = DMatrix::zeros(n, n);
    for (i, j, v) in op.stiffness().triplets() {
        a[(i, j)] = v * isq[i] * isq[j];
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let values = order[..n_modes]
        .iter()
        .map(|&k| eig.eigenvalues[k])
        .collect();
    let mut vecs = DMatrix::zeros(n, n_modes);
    for (c, &k) in order[..n_modes].iter().enumerate() {
        for i in 0..n {
            vecs[(i, c)] = eig.eigenvectors[(i, k)] * isq[i];
        }
    }
    (values, vecs)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Shift-inverted operator in the symmetric coordinates `y = M^{1/2} x`.
struct ShiftInvert {
    chol: EnvelopeCholesky,
    sqrt_mass: Vec<f64>,
    /// Unit null direction `M^{1/2}·1 / ‖·‖`.
    null: Vec<f64>,
    sigma: f64,
}

impl ShiftInvert {
    fn new(op: &LaplacianOperator) -> Result<Self> {
        let n = op.len() as f64;
        let sigma = -1e-8 * op.stiffness().trace() / n;
        let k = op.stiffness().add_scaled_diagonal(1.0, -sigma, op.mass());
        let chol = EnvelopeCholesky::factor(&k)?;
        let sqrt_mass: Vec<f64> = op.mass().iter().map(|m| m.sqrt()).collect();
        let total: f64 = op.mass().iter().sum();
        let null = sqrt_mass.iter().map(|s| s / total.sqrt()).collect();
        Ok(ShiftInvert {
            chol,
            sqrt_mass,
            null,
            sigma,
        })
    }

    /// Applies the operator on the complement of the constant mode. That
    /// mode is an exact eigenvector with value `1/(−σ)`, far above the rest;
    /// keeping it in the iteration lets its rounding swamp the wanted pairs.
    fn apply(&self, y: &[f64]) -> Vec<f64> {
        let c = dot(&self.null, y);
        let b: Vec<f64> = y
            .iter()
            .zip(&self.null)
            .zip(&self.sqrt_mass)
            .map(|((yi, ei), s)| (yi - c * ei) * s)
            .collect();
        let z = self.chol.solve(&b);
        let mut w: Vec<f64> = z
            .iter()
            .zip(&self.sqrt_mass)
            .map(|(zi, s)| zi * s)
            .collect();
        self.deflate(&mut w);
        w
    }

    fn deflate(&self, w: &mut [f64]) {
        for _ in 0..2 {
            let c = dot(&self.null, w);
            axpy(-c, &self.null, w);
        }
    }
}

/// Growable set of length-`n` vectors stored column-major, so that ranges
/// of them can be used as matrices without copying.
struct Columns {
    n: usize,
    data: Vec<f64>,
}

impl Columns {
    fn new(n: usize) -> Self {
        Columns {
            n,
            data: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.data.len() / self.n
    }

    fn col(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    fn view(&self, cols: std::ops::Range<usize>) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(
            &self.data[cols.start * self.n..cols.end * self.n],
            self.n,
            cols.len(),
        )
    }

    fn push(&mut self, v: &[f64]) {
        self.data.extend_from_slice(v);
    }
}

/// Orthonormalizes the columns of `w` against `basis` and each other and
/// appends those that keep a meaningful norm. Returns how many were kept.
fn add_block(mut w: DMatrix<f64>, basis: &mut Columns, si: &ShiftInvert) -> usize {
    let before: Vec<f64> = w.column_iter().map(|c| c.norm()).collect();
    for mut col in w.column_iter_mut() {
        si.deflate(col.as_mut_slice());
    }
    let k = basis.len();
    if k > 0 {
        let v = basis.view(0..k);
        for _ in 0..2 {
            let c = v.tr_mul(&w);
            w.gemm(-1.0, &v, &c, 1.0);
        }
    }
    let start = k;
    let mut kept = 0;
    for (j, b) in before.into_iter().enumerate() {
        let mut col: Vec<f64> = w.column(j).iter().copied().collect();
        for _ in 0..2 {
            for i in start..start + kept {
                let c = dot(basis.col(i), &col);
                axpy(-c, basis.col(i), &mut col);
            }
        }
        let after = dot(&col, &col).sqrt();
        if after <= 1e-12 * b || after == 0.0 {
            continue;
        }
        col.iter_mut().for_each(|x| *x /= after);
        basis.push(&col);
        kept += 1;
    }
    kept
}

fn random_block(n: usize, count: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let data: Vec<f64> = (0..n * count)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    DMatrix::from_vec(n, count, data)
}

fn lanczos_pairs(
    op: &LaplacianOperator,
    n_modes: usize,
    opts: &EigenOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = op.len();
    let si = ShiftInvert::new(op)?;
    // the constant mode is known exactly; iterate for the rest
    let wanted = n_modes - 1;
    let dim = n - 1;
    if wanted == 0 {
        return Ok(finish(&si, &Columns::new(n), 0, &[], &DMatrix::zeros(0, 0)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let block = opts.block.min(dim);
    let cap = dim.min(
        opts.iterations_per_mode
            .saturating_mul(wanted)
            .max(wanted + 2 * block),
    );
    let check_every = block.max(wanted / 5);

    let mut basis = Columns::new(n);
    let mut images = Columns::new(n);
    // gram[j][i] = basis_iᵀ A basis_j for expanded columns j
    let mut gram: Vec<Vec<f64>> = Vec::new();

    // Appends the new basis columns' entries to every expanded gram column.
    let extend_gram = |gram: &mut [Vec<f64>], basis: &Columns, images: &Columns, from: usize| {
        let (expanded, len) = (images.len(), basis.len());
        if expanded == 0 || from == len {
            return;
        }
        let d = images.view(0..expanded).tr_mul(&basis.view(from..len));
        for (j, g) in gram.iter_mut().enumerate() {
            g.extend(d.row(j).iter());
        }
    };

    add_block(random_block(n, block, &mut rng), &mut basis, &si);

    let mut expanded = 0;
    let mut last_check = 0;
    let mut last_worst = f64::NAN;
    let mut previous_worst: Option<f64> = None;
    loop {
        if expanded == basis.len() {
            if basis.len() == dim {
                break;
            }
            // Krylov space exhausted before convergence; restart with fresh directions
            let mut tries = 0;
            while expanded == basis.len() && tries < 10 {
                let from = basis.len();
                add_block(random_block(n, 1, &mut rng), &mut basis, &si);
                extend_gram(&mut gram, &basis, &images, from);
                tries += 1;
            }
            if expanded == basis.len() {
                break;
            }
        }
        let end = (expanded + block).min(basis.len());
        let new_images: Vec<Vec<f64>> = (expanded..end)
            .into_par_iter()
            .map(|i| si.apply(basis.col(i)))
            .collect();
        for img in &new_images {
            images.push(img);
        }
        let fresh = images.view(expanded..end);
        let c = basis.view(0..basis.len()).tr_mul(&fresh);
        for col in c.column_iter() {
            gram.push(col.iter().copied().collect());
        }
        let candidates = fresh.into_owned();
        expanded = end;
        let from = basis.len();
        add_block(candidates, &mut basis, &si);
        extend_gram(&mut gram, &basis, &images, from);

        let done_space = expanded == dim;
        if expanded >= wanted
            && (expanded - last_check >= check_every || done_space || expanded >= cap)
        {
            last_check = expanded;
            let (thetas, coeffs, est) = ritz(&gram, expanded, basis.len(), wanted);
            let tight = est
                .iter()
                .zip(&thetas)
                .all(|(r, t)| *r <= 0.1 * opts.tol * t);
            if tight || done_space || expanded >= cap {
                let residuals = true_residuals(&basis, &images, expanded, &thetas, &coeffs);
                let worst = residuals
                    .iter()
                    .zip(&thetas)
                    .map(|(r, t)| r / t)
                    .fold(0.0, f64::max);
                last_worst = worst;
                if worst <= opts.tol || done_space {
                    return Ok(finish(&si, &basis, expanded, &thetas, &coeffs));
                }
                // Rounding in the solves puts a floor under the true residual.
                // Once it stops improving, accept it if it is near tolerance.
                if tight {
                    if previous_worst.is_some_and(|p| worst >= 0.9 * p) {
                        if worst <= STAGNATION_SLACK * opts.tol {
                            return Ok(finish(&si, &basis, expanded, &thetas, &coeffs));
                        }
                        break;
                    }
                    previous_worst = Some(worst);
                }
            }
            if expanded >= cap {
                break;
            }
        }
    }
    Err(Error::Solver(format!(
        "eigensolver did not converge after {expanded} operator applications \
         (worst relative residual {last_worst:e}, tolerance {:e})",
        opts.tol
    )))
}

/// How far above tolerance a stagnated residual may sit and still count.
const STAGNATION_SLACK: f64 = 1e3;

type RitzPairs = (Vec<f64>, DMatrix<f64>, Vec<f64>);

/// Largest Ritz values on the expanded subspace with cheap residual
/// estimates from the components that leave it.
fn ritz(gram: &[Vec<f64>], expanded: usize, len: usize, n_modes: usize) -> RitzPairs {
    let h = DMatrix::from_fn(expanded, expanded, |i, j| 0.5 * (gram[j][i] + gram[i][j]));
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..expanded).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut thetas = Vec::with_capacity(n_modes);
    let mut coeffs = DMatrix::zeros(expanded, n_modes);
    let mut est = Vec::with_capacity(n_modes);
    for (m, &k) in order[..n_modes].iter().enumerate() {
        let s = eig.eigenvectors.column(k);
        let outside: f64 = (expanded..len)
            .map(|i| {
                let c: f64 = (0..expanded).map(|j| gram[j][i] * s[j]).sum();
                c * c
            })
            .sum();
        thetas.push(eig.eigenvalues[k]);
        coeffs.set_column(m, &s);
        est.push(outside.sqrt());
    }
    (thetas, coeffs, est)
}

fn true_residuals(
    basis: &Columns,
    images: &Columns,
    expanded: usize,
    thetas: &[f64],
    coeffs: &DMatrix<f64>,
) -> Vec<f64> {
    let x = basis.view(0..expanded) * coeffs;
    let ax = images.view(0..expanded) * coeffs;
    thetas
        .iter()
        .enumerate()
        .map(|(k, &theta)| {
            ax.column(k)
                .iter()
                .zip(x.column(k).iter())
                .map(|(a, b)| (a - theta * b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

fn finish(
    si: &ShiftInvert,
    basis: &Columns,
    expanded: usize,
    thetas: &[f64],
    coeffs: &DMatrix<f64>,
) -> (Vec<f64>, DMatrix<f64>) {
    let n = si.sqrt_mass.len();
    let found = basis.view(0..expanded) * coeffs;
    let mut vecs = DMatrix::zeros(n, thetas.len() + 1);
    vecs.column_mut(0).copy_from_slice(&si.null);
    vecs.columns_mut(1, thetas.len()).copy_from(&found);
    for (i, mut row) in vecs.row_iter_mut().enumerate() {
        row /= si.sqrt_mass[i];
    }
    let values = std::iter::once(0.0)
        .chain(thetas.iter().map(|t| si.sigma + 1.0 / t))
        .collect();
    (values, vecs)
}

/// Diffusion time `τ = α·h²`.
pub fn timestep(h: f64, alpha: f64) -> Result<f64> {
    if !(h > 0.0) || !(alpha > 0.0) {
        return Err(Error::domain(format!(
            "timestep needs h > 0 and alpha > 0, got h = {h}, alpha = {alpha}"
        )));
    }
    Ok(alpha * h * h)
}

fn check_len(got: usize, want: usize, what: &str) -> Result<()> {
    if got != want {
        return Err(Error::domain(format!(
            "{what} has length {got}, expected {want}"
        )));
    }
    Ok(())
}

/// Coefficients `ΦᵀM u`.
pub fn project(basis: &SpectralBasis, u: &[f64]) -> Result<DVector<f64>> {
    check_len(u.len(), basis.n_points(), "field")?;
    let mu = DVector::from_iterator(u.len(), u.iter().zip(&basis.mass).map(|(x, m)| x * m));
    Ok(basis.vectors.tr_mul(&mu))
}

/// Field `Φ c`.
pub fn reconstruct(basis: &SpectralBasis, coeffs: &DVector<f64>) -> Result<Vec<f64>> {
    check_len(coeffs.len(), basis.len(), "coefficient vector")?;
    Ok((&basis.vectors * coeffs).data.into())
}

/// `Φ (e^{−λτ} ⊙ ΦᵀM u₀)`.
pub fn diffuse_spectral(basis: &SpectralBasis, u0: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::domain(format!(
            "diffusion time must be nonnegative, got {tau}"
        )));
    }
    let mut c = project(basis, u0)?;
    for (ck, lam) in c.iter_mut().zip(&basis.eigenvalues) {
        *ck *= (-lam * tau).exp();
    }
    reconstruct(basis, &c)
}

/// Per-operator cache of `M + τS` factorizations keyed by `τ`.
#[derive(Default)]
pub struct FactorCache {
    entries: Mutex<Vec<(u64, Arc<EnvelopeCholesky>)>>,
}

impl Clone for FactorCache {
    fn clone(&self) -> Self {
        FactorCache::default()
    }
}

impl std::fmt::Debug for FactorCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let n = self.entries.lock().map(|e| e.len()).unwrap_or(0);
        write!(f, "FactorCache({n} entries)")
    }
}

/// Factorization of `M + τS`, computed once per operator and `τ`.
pub fn implicit_factor(op: &LaplacianOperator, tau: f64) -> Result<Arc<EnvelopeCholesky>> {
    if !(tau >= 0.0) {
        return Err(Error::domain(format!(
            "diffusion time must be nonnegative, got {tau}"
        )));
    }
    let mut entries = op
        .factor_cache()
        .entries
        .lock()
        .unwrap_or_else(|p| p.into_inner());
    let key = tau.to_bits();
    if let Some((_, f)) = entries.iter().find(|(k, _)| *k == key) {
        return Ok(f.clone());
    }
    let a = op.stiffness().add_scaled_diagonal(tau, 1.0, op.mass());
    let f = Arc::new(EnvelopeCholesky::factor(&a)?);
    entries.push((key, f.clone()));
    Ok(f)
}

/// Solves `(M + τS) u = M u₀`.
pub fn diffuse_implicit(op: &LaplacianOperator, u0: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_len(u0.len(), op.len(), "field")?;
    if tau == 0.0 {
        return Ok(u0.to_vec());
    }
    let f = implicit_factor(op, tau)?;
    let rhs: Vec<f64> = u0.iter().zip(op.mass()).map(|(u, m)| u * m).collect();
    Ok(f.solve(&rhs))
}
