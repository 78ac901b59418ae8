//! Artificial reservoir baseline: a sparse echo state network with a fixed
//! spectral radius, driven by the stimulation patterns plus count noise
//! calibrated on spontaneous culture activity.

use crate::grid::{channel_index, StimPattern, N_CHANNELS};
use crate::rng;
use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{self, Read, Write};
use thiserror::Error;

pub const MATRIX_MAGIC: &[u8; 4] = b"BRCM";

#[derive(Debug, Error)]
pub enum ArError {
    #[error("esn config: {0}")]
    Config(String),
    #[error("unscaled spectral radius is numerically zero")]
    ZeroRadius,
    #[error("spectral radius did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("noise model needs more than 20 spontaneous windows, got {0}")]
    TooFewWindows(usize),
    #[error("window {index} has {got} channels, expected {expected}")]
    WindowLength { index: usize, got: usize, expected: usize },
}

/// Row-compressed sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(u32, u32, f64)]) -> Self {
        let mut t = triplets.to_vec();
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in t {
            assert!((r as usize) < n_rows && (c as usize) < n_cols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r as usize + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n_rows, n_cols, row_ptr, cols, vals }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != 0.0 {
                    t.push((r as u32, c as u32, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &t)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for (r, c, v) in self.triplets() {
            m[(r as usize, c as usize)] += v;
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn density(&self) -> f64 {
        self.nnz() as f64 / (self.n_rows * self.n_cols) as f64
    }

    pub fn triplets(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r as u32, self.cols[k], self.vals[k]))
        })
    }

    pub fn scale(&mut self, s: f64) {
        self.vals.iter_mut().for_each(|v| *v *= s);
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        y.par_iter_mut().with_min_len(256).enumerate().for_each(|(r, out)| {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            *out = self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(&c, &v)| v * x[c as usize]).sum();
        });
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    /// Header `BRCM`, u32 rows, u32 cols, u64 nnz, then `(u32 row, u32 col,
    /// f64 value)` triplets, all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MATRIX_MAGIC)?;
        w.write_all(&(self.n_rows as u32).to_le_bytes())?;
        w.write_all(&(self.n_cols as u32).to_le_bytes())?;
        w.write_all(&(self.nnz() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(16 * self.nnz());
        for (r, c, v) in self.triplets() {
            buf.extend_from_slice(&r.to_le_bytes());
            buf.extend_from_slice(&c.to_le_bytes());
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_binary<R: Read>(mut r: R) -> io::Result<Self> {
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let mut head = [0u8; 20];
        r.read_exact(&mut head)?;
        if &head[..4] != MATRIX_MAGIC {
            return Err(bad("not a sparse matrix file"));
        }
        let n_rows = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
        let n_cols = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        let nnz = u64::from_le_bytes(head[12..20].try_into().unwrap()) as usize;
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != nnz * 16 {
            return Err(bad("triplet section length does not match nnz"));
        }
        let mut t = Vec::with_capacity(nnz);
        for chunk in body.chunks_exact(16) {
            let row = u32::from_le_bytes(chunk[0..4].try_into().unwrap());
            let col = u32::from_le_bytes(chunk[4..8].try_into().unwrap());
            if row as usize >= n_rows || col as usize >= n_cols {
                return Err(bad("triplet index out of bounds"));
            }
            t.push((row, col, f64::from_le_bytes(chunk[8..16].try_into().unwrap())));
        }
        Ok(Self::from_triplets(n_rows, n_cols, &t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Poisson,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EsnConfig {
    pub n_units: usize,
    pub sparsity: f64,
    pub rho: f64,
    pub input_gain: f64,
    /// Leaky-integration rate; 1 means plain rate units.
    pub leak: f64,
    /// Recurrent iterations from rest before the state is read.
    pub steps: usize,
    /// Multiplier applied to noise counts before they enter the input.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for EsnConfig {
    fn default() -> Self {
        Self { n_units: N_CHANNELS, sparsity: 0.10, rho: 0.9, input_gain: 1.0, leak: 1.0, steps: 3, noise_scale: 1.0, seed: 1 }
    }
}

impl EsnConfig {
    pub fn validate(&self) -> Result<(), ArError> {
        if self.n_units == 0 {
            return Err(ArError::Config("n_units must be positive".into()));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return Err(ArError::Config(format!("sparsity must lie in (0, 1], got {}", self.sparsity)));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(ArError::Config(format!("rho must be non-negative, got {}", self.rho)));
        }
        if !(self.leak > 0.0 && self.leak <= 1.0) {
            return Err(ArError::Config(format!("leak must lie in (0, 1], got {}", self.leak)));
        }
        if !self.input_gain.is_finite() || !(self.noise_scale >= 0.0) {
            return Err(ArError::Config("input_gain must be finite and noise_scale non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EsnReservoir {
    pub cfg: EsnConfig,
    pub w_rec: SparseMatrix,
}

/// Draw a sparse Gaussian matrix and rescale it to spectral radius `cfg.rho`.
pub fn init_esn(cfg: &EsnConfig) -> Result<EsnReservoir, ArError> {
    cfg.validate()?;
    let n = cfg.n_units;
    let rows: Vec<Vec<(u32, u32, f64)>> = (0..n)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(cfg.seed, "esn-row", r as u64);
            let mut out = Vec::new();
            for c in 0..n {
                if g.random::<f64>() < cfg.sparsity {
                    let v: f64 = rand_distr::StandardNormal.sample(&mut g);
                    out.push((r as u32, c as u32, v));
                }
            }
            out
        })
        .collect();
    let t: Vec<_> = rows.into_iter().flatten().collect();
    let mut w = SparseMatrix::from_triplets(n, n, &t);
    if cfg.rho == 0.0 {
        w.scale(0.0);
        return Ok(EsnReservoir { cfg: cfg.clone(), w_rec: w });
    }
    let r0 = spectral_radius(&w)?;
    if !(r0 > 1e-300) {
        return Err(ArError::ZeroRadius);
    }
    w.scale(cfg.rho / r0);
    Ok(EsnReservoir { cfg: cfg.clone(), w_rec: w })
}

const RADIUS_TOL: f64 = 1e-12;

/// Largest eigenvalue magnitude. Tries power iteration, then an implicitly
/// restarted Arnoldi iteration for complex or clustered dominant spectra.
pub fn spectral_radius(m: &SparseMatrix) -> Result<f64, ArError> {
    if m.n_rows != m.n_cols {
        return Err(ArError::NotSquare(m.n_rows, m.n_cols));
    }
    if m.vals.iter().any(|v| !v.is_finite()) {
        return Err(ArError::NonFinite);
    }
    let n = m.n_rows;
    if n == 0 || m.vals.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    if let Some(r) = power_iteration(m, 300) {
        return Ok(r);
    }
    arnoldi_radius(m, 20, 60, 2000)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn start_vector(n: usize, index: u64) -> Vec<f64> {
    let mut g = rng::stream(0x5eed, "radius-start", index);
    let mut v: Vec<f64> = (0..n).map(|_| g.random::<f64>() - 0.5).collect();
    let s = norm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Succeeds only for a real dominant eigenvalue with a clear gap.
fn power_iteration(m: &SparseMatrix, iters: usize) -> Option<f64> {
    let n = m.n_rows;
    let mut x = start_vector(n, 0);
    let mut y = vec![0.0; n];
    for _ in 0..iters {
        m.matvec_into(&x, &mut y);
        let ny = norm(&y);
        if ny == 0.0 {
            // A^k maps a generic vector to zero, so A is nilpotent.
            return Some(0.0);
        }
        let lambda = dot(&x, &y);
        let resid = y.iter().zip(&x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        if resid <= RADIUS_TOL * lambda.abs().max(f64::MIN_POSITIVE) {
            return Some(lambda.abs());
        }
        x.iter_mut().zip(&y).for_each(|(a, b)| *a = b / ny);
    }
    None
}

struct Krylov {
    v: Vec<Vec<f64>>,
    h: DMatrix<f64>,
    f: Vec<f64>,
}

/// Extend an Arnoldi factorization from `k` to `m` columns with two-pass
/// Gram-Schmidt. Breakdowns restart from a fresh orthogonal vector.
fn extend(a: &SparseMatrix, kr: &mut Krylov, k: usize, m: usize, restarts: &mut u64) {
    let n = a.n_rows;
    for j in k..m {
        let beta = norm(&kr.f);
        if j > 0 {
            let scale = kr.h.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
            if beta <= 1e-13 * scale {
                let mut w = start_vector(n, 1000 + *restarts);
                *restarts += 1;
                for _ in 0..2 {
                    for vi in &kr.v[..j] {
                        let c = dot(vi, &w);
                        w.iter_mut().zip(vi).for_each(|(x, y)| *x -= c * y);
                    }
                }
                let s = norm(&w);
                w.iter_mut().for_each(|x| *x /= s);
                kr.h[(j, j - 1)] = 0.0;
                kr.v.truncate(j);
                kr.v.push(w);
            } else {
                kr.h[(j, j - 1)] = beta;
                kr.v.truncate(j);
                kr.v.push(kr.f.iter().map(|x| x / beta).collect());
            }
        }
        let mut w = a.matvec(&kr.v[j]);
        for _ in 0..2 {
            for (i, vi) in kr.v[..=j].iter().enumerate() {
                let c = dot(vi, &w);
                kr.h[(i, j)] += c;
                w.iter_mut().zip(vi).for_each(|(x, y)| *x -= c * y);
            }
        }
        kr.f = w;
    }
}

fn sorted_ritz(h: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = h.clone().complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
    ev
}

/// Last component of the unit eigenvector of `h` for eigenvalue `theta`,
/// by inverse iteration on the complex shifted matrix.
fn ritz_tail(h: &DMatrix<f64>, theta: Complex<f64>) -> f64 {
    let m = h.nrows();
    let scale = h.norm().max(1.0);
    let mut a: DMatrix<Complex<f64>> = h.map(|v| Complex::new(v, 0.0));
    for i in 0..m {
        a[(i, i)] -= theta + Complex::new(scale * 1e-14, 0.0);
    }
    let lu = a.lu();
    let mut y = DVector::from_element(m, Complex::new(1.0, 0.0));
    for _ in 0..3 {
        match lu.solve(&y) {
            Some(z) => {
                let s = z.norm();
                if !(s.is_finite() && s > 0.0) {
                    break;
                }
                y = z / Complex::new(s, 0.0);
            }
            None => break,
        }
    }
    y[m - 1].norm()
}

/// Implicitly restarted Arnoldi with exact shifts, keeping `nev` Ritz values
/// of a `ncv`-dimensional Krylov space per restart.
pub fn arnoldi_radius(a: &SparseMatrix, nev: usize, ncv: usize, max_restarts: usize) -> Result<f64, ArError> {
    let n = a.n_rows;
    let m = ncv.min(n);
    let mut kr = Krylov { v: vec![start_vector(n, 1)], h: DMatrix::zeros(m, m), f: vec![0.0; n] };
    let mut restarts = 0u64;
    extend(a, &mut kr, 0, m, &mut restarts);
    if m == n {
        // The factorization spans the whole space: H is similar to A.
        return Ok(sorted_ritz(&kr.h)[0].norm());
    }
    let mut last_resid = f64::INFINITY;
    for _ in 0..max_restarts {
        let ritz = sorted_ritz(&kr.h);
        let beta = norm(&kr.f);
        let top = ritz[0].norm();
        let tol = RADIUS_TOL * top.max(f64::MIN_POSITIVE);
        // Converge the leading Ritz value and, if complex, its conjugate.
        let resid = ritz_tail(&kr.h, ritz[0]) * beta;
        last_resid = resid;
        if resid <= tol || top == 0.0 {
            return Ok(top);
        }
        let mut k = nev.min(m - 2);
        if ritz[k - 1].im != 0.0 && ritz[k].im != 0.0 && (ritz[k - 1].conj() - ritz[k]).norm() < 1e-12 * top {
            k += 1;
        }
        let mut q = DMatrix::<f64>::identity(m, m);
        let mut h = kr.h.clone();
        let mut i = k;
        while i < m {
            let mu = ritz[i];
            let shift_poly = if mu.im.abs() > 0.0 && i + 1 < m {
                i += 2;
                &h * &h - &h * (2.0 * mu.re) + DMatrix::identity(m, m) * mu.norm_sqr()
            } else {
                i += 1;
                &h - DMatrix::identity(m, m) * mu.re
            };
            let qj = shift_poly.qr().q();
            h = qj.transpose() * &h * &qj;
            for r in 0..m {
                for c in 0..r.saturating_sub(1) {
                    h[(r, c)] = 0.0;
                }
            }
            q *= &qj;
        }
        let beta_k = h[(k, k - 1)];
        let sigma = q[(m - 1, k - 1)];
        let mut v_new: Vec<Vec<f64>> = vec![vec![0.0; n]; k + 1];
        v_new.par_iter_mut().enumerate().for_each(|(c, out)| {
            for (j, vj) in kr.v.iter().enumerate() {
                let w = q[(j, c)];
                if w != 0.0 {
                    out.iter_mut().zip(vj).for_each(|(o, x)| *o += w * x);
                }
            }
        });
        let vk = v_new.pop().unwrap();
        let f: Vec<f64> = vk.iter().zip(&kr.f).map(|(a, b)| beta_k * a + sigma * b).collect();
        let mut hk = DMatrix::zeros(m, m);
        hk.view_mut((0, 0), (k, k)).copy_from(&h.view((0, 0), (k, k)));
        kr = Krylov { v: v_new, h: hk, f };
        extend(a, &mut kr, k, m, &mut restarts);
    }
    Err(ArError::NoConvergence { iterations: max_restarts, residual: last_resid })
}

/// Per-channel count noise fitted on spontaneous windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub means: Vec<f64>,
    pub n_windows: usize,
    pub family: NoiseFamily,
}

impl NoiseModel {
    pub fn zero(n: usize) -> Self {
        Self { means: vec![0.0; n], n_windows: 0, family: NoiseFamily::Poisson }
    }

    pub fn sample(&self, g: &mut rng::Rng) -> Vec<f64> {
        self.means
            .iter()
            .map(|&m| {
                if m <= 0.0 {
                    return 0.0;
                }
                match self.family {
                    NoiseFamily::Poisson => Poisson::new(m).unwrap().sample(g),
                    NoiseFamily::Gaussian => Normal::new(m, m.sqrt()).unwrap().sample(g).max(0.0),
                }
            })
            .collect()
    }
}

pub fn estimate_noise(windows: &[Vec<u32>], family: NoiseFamily) -> Result<NoiseModel, ArError> {
    if windows.len() <= 20 {
        return Err(ArError::TooFewWindows(windows.len()));
    }
    let n = windows[0].len();
    let mut means = vec![0.0; n];
    for (i, w) in windows.iter().enumerate() {
        if w.len() != n {
            return Err(ArError::WindowLength { index: i, got: w.len(), expected: n });
        }
        means.iter_mut().zip(w).for_each(|(m, &c)| *m += c as f64);
    }
    means.iter_mut().for_each(|m| *m /= windows.len() as f64);
    Ok(NoiseModel { means, n_windows: windows.len(), family })
}

/// Input vector: +1 at positive poles, -1 at negative poles.
pub fn pattern_input(p: &StimPattern, n: usize) -> Vec<f64> {
    let mut u = vec![0.0; n];
    for pair in &p.pairs {
        for (e, s) in [(pair.positive, 1.0), (pair.negative, -1.0)] {
            if let Ok(ch) = channel_index(e) {
                if ch < n {
                    u[ch] = s;
                }
            }
        }
    }
    u
}

/// State after `steps` updates of `x = (1-a) x + a tanh(g u + W x)` from rest.
pub fn ar_state(esn: &EsnReservoir, p: &StimPattern, noise: &NoiseModel, seed: u64) -> Vec<f64> {
    let n = esn.cfg.n_units;
    let mut u = pattern_input(p, n);
    let mut g = rng::stream(seed, "ar-noise", 0);
    let eta = noise.sample(&mut g);
    u.iter_mut().zip(&eta).for_each(|(a, b)| *a += esn.cfg.noise_scale * b);
    let a = esn.cfg.leak;
    let mut x = vec![0.0; n];
    let mut wx = vec![0.0; n];
    for _ in 0..esn.cfg.steps {
        esn.w_rec.matvec_into(&x, &mut wx);
        for i in 0..n {
            x[i] = (1.0 - a) * x[i] + a * (esn.cfg.input_gain * u[i] + wx[i]).tanh();
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BipolarPair, ElectrodeCoord, Waveform};

    fn dense_radius(m: &DMatrix<f64>) -> f64 {
        m.clone().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn random_dense(n: usize, seed: u64) -> DMatrix<f64> {
        let mut g = rng::stream(seed, "test-dense", 0);
        DMatrix::from_fn(n, n, |_, _| rand_distr::StandardNormal.sample(&mut g))
    }

    #[test]
    fn trivial_radii() {
        let id = SparseMatrix::from_dense(&DMatrix::identity(7, 7));
        assert!((spectral_radius(&id).unwrap() - 1.0).abs() < 1e-12);
        let z = SparseMatrix::from_triplets(5, 5, &[]);
        assert_eq!(spectral_radius(&z).unwrap(), 0.0);
        let nil = SparseMatrix::from_triplets(2, 2, &[(0, 1, 2.0)]);
        assert!(spectral_radius(&nil).unwrap().abs() < 1e-12);
    }

    #[test]
    fn matches_dense_oracle() {
        for n in [3usize, 10, 33, 64] {
            for seed in 0..4 {
                let d = random_dense(n, seed * 100 + n as u64);
                let want = dense_radius(&d);
                let got = spectral_radius(&SparseMatrix::from_dense(&d)).unwrap();
                assert!((got - want).abs() <= 1e-6 * want, "n={n} got {got} want {want}");
            }
        }
    }

    #[test]
    fn restarted_arnoldi_on_larger_matrix() {
        let d = random_dense(150, 9);
        let want = dense_radius(&d);
        let got = arnoldi_radius(&SparseMatrix::from_dense(&d), 20, 60, 2000).unwrap();
        assert!((got - want).abs() <= 1e-9 * want, "got {got} want {want}");
    }

    #[test]
    fn small_esn_is_scaled() {
        let cfg = EsnConfig { n_units: 200, ..Default::default() };
        let esn = init_esn(&cfg).unwrap();
        let want = dense_radius(&esn.w_rec.to_dense());
        assert!((want - 0.9).abs() < 1e-8, "{want}");
        let dense4 = init_esn(&EsnConfig { n_units: 4, sparsity: 1.0, ..Default::default() }).unwrap();
        assert_eq!(dense4.w_rec.nnz(), 16);
        assert!((dense_radius(&dense4.w_rec.to_dense()) - 0.9).abs() < 1e-9);
        let zero = init_esn(&EsnConfig { n_units: 50, rho: 0.0, ..Default::default() }).unwrap();
        assert!(zero.w_rec.vals.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn binary_round_trip() {
        let m = SparseMatrix::from_triplets(3, 4, &[(0, 1, 0.1), (2, 3, -1.0 / 3.0), (1, 0, f64::MIN_POSITIVE)]);
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 20 + 3 * 16);
        assert_eq!(SparseMatrix::read_binary(&buf[..]).unwrap(), m);
        buf[0] = b'X';
        assert!(SparseMatrix::read_binary(&buf[..]).is_err());
    }

    #[test]
    fn noise_model_rules() {
        assert!(matches!(estimate_noise(&vec![vec![0; 4]; 20], NoiseFamily::Poisson), Err(ArError::TooFewWindows(20))));
        let z = estimate_noise(&vec![vec![0; 4]; 21], NoiseFamily::Poisson).unwrap();
        assert!(z.sample(&mut rng::stream(1, "t", 0)).iter().all(|&v| v == 0.0));
        let mut g = rng::stream(3, "windows", 0);
        let w: Vec<Vec<u32>> = (0..30).map(|_| vec![Poisson::new(2.0).unwrap().sample(&mut g) as u32]).collect();
        let m = estimate_noise(&w, NoiseFamily::Poisson).unwrap();
        assert!((m.means[0] - 2.0).abs() <= 0.5, "{}", m.means[0]);
    }

    #[test]
    fn state_from_rest() {
        let esn = init_esn(&EsnConfig { n_units: N_CHANNELS, sparsity: 0.01, ..Default::default() }).unwrap();
        let null = StimPattern::new(0, vec![], Waveform::monophasic(10.0, 20.0));
        let quiet = NoiseModel::zero(N_CHANNELS);
        assert!(ar_state(&esn, &null, &quiet, 1).iter().all(|&v| v == 0.0));
        let p = StimPattern::new(
            0,
            vec![BipolarPair::rightward(ElectrodeCoord::new(10, 10).unwrap()).unwrap()],
            Waveform::monophasic(10.0, 20.0),
        );
        let noisy = NoiseModel { means: vec![0.1; N_CHANNELS], n_windows: 21, family: NoiseFamily::Poisson };
        assert_eq!(ar_state(&esn, &p, &noisy, 5), ar_state(&esn, &p, &noisy, 5));
        assert_ne!(ar_state(&esn, &p, &noisy, 5), ar_state(&esn, &p, &noisy, 6));
    }
}
