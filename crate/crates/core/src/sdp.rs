//! `max Tr(H·V)` over `V ⪰ 0`, `V_nn ≤ 1` (n < N), `V_NN = 1`, solved by ADMM
//! between the PSD cone and the diagonal constraint set.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use std::io::{BufRead, Write};

use crate::channel::{CMatrix, CVector, ReflectionVector};
use crate::error::{Error, Result};
use crate::rng::complex_normal;
use crate::stats::{lift, EffectiveGainMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    /// Anderson acceleration memory; 0 gives plain ADMM.
    pub memory: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 5000, rho: 1.0, memory: 5 }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// PSD iterate; its diagonal violates the caps by at most `primal_residual`.
    pub v: CMatrix,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

impl SdpSolution {
    /// Largest violation of `V_nn ≤ 1` and `V_NN = 1`.
    pub fn constraint_residual(&self) -> f64 {
        let n = self.v.nrows();
        let caps = (0..n - 1).map(|i| (self.v[(i, i)].re - 1.0).max(0.0)).fold(0.0, f64::max);
        caps.max((self.v[(n - 1, n - 1)].re - 1.0).abs())
    }
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn project_psd(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut out = CMatrix::zeros(n, n);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 0.0 {
            let u = eig.eigenvectors.column(k);
            for j in 0..n {
                let uj = u[j].conj() * l;
                for i in j..n {
                    out[(i, j)] += u[i] * uj;
                }
            }
        }
    }
    for j in 0..n {
        out[(j, j)].im = 0.0;
        for i in j + 1..n {
            out[(j, i)] = out[(i, j)].conj();
        }
    }
    out
}

fn project_constraints(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        let d = m[(i, i)].re;
        m[(i, i)] = Complex64::new(if i + 1 == n { 1.0 } else { d.min(1.0) }, 0.0);
    }
}

fn admm_step(h: &CMatrix, rho: f64, z: &CMatrix, u: &CMatrix) -> (CMatrix, CMatrix, CMatrix) {
    let v = project_psd(&(z - u + h / Complex64::new(rho, 0.0)));
    let mut z1 = &v + u;
    project_constraints(&mut z1);
    let u1 = u + &v - &z1;
    (v, z1, u1)
}

fn pack(z: &CMatrix, u: &CMatrix) -> DVector<f64> {
    DVector::from_iterator(4 * z.len(), z.iter().chain(u.iter()).flat_map(|c| [c.re, c.im]))
}

fn unpack(x: &DVector<f64>, n: usize) -> (CMatrix, CMatrix) {
    let c = |k: usize| Complex64::new(x[2 * k], x[2 * k + 1]);
    let z = CMatrix::from_fn(n, n, |i, j| c(j * n + i));
    let u = CMatrix::from_fn(n, n, |i, j| c(n * n + j * n + i));
    (hermitian_part(&z), hermitian_part(&u))
}

/// Type-II Anderson acceleration of a fixed-point map `x ↦ g(x)`.
struct Anderson {
    memory: usize,
    dx: Vec<DVector<f64>>,
    df: Vec<DVector<f64>>,
    last: Option<(DVector<f64>, DVector<f64>)>,
}

impl Anderson {
    fn new(memory: usize) -> Self {
        Self { memory, dx: Vec::new(), df: Vec::new(), last: None }
    }

    fn reset(&mut self) {
        self.dx.clear();
        self.df.clear();
        self.last = None;
    }

    /// Returns the extrapolated point, or `None` when no history is available.
    fn extrapolate(&mut self, x: DVector<f64>, f: DVector<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
        if self.memory == 0 {
            return None;
        }
        if let Some((px, pf)) = self.last.take() {
            if self.dx.len() == self.memory {
                self.dx.remove(0);
                self.df.remove(0);
            }
            self.dx.push(&x - px);
            self.df.push(&f - pf);
        }
        self.last = Some((x, f.clone()));
        let m = self.df.len();
        if m == 0 {
            return None;
        }
        let mut gram = DMatrix::<f64>::from_fn(m, m, |i, j| self.df[i].dot(&self.df[j]));
        let reg = 1e-10 * (gram.trace() + f64::MIN_POSITIVE);
        for i in 0..m {
            gram[(i, i)] += reg;
        }
        let rhs = DVector::from_fn(m, |i, _| self.df[i].dot(&f));
        let gamma = gram.cholesky()?.solve(&rhs);
        let mut next = g.clone();
        for i in 0..m {
            next -= (&self.dx[i] + &self.df[i]) * gamma[i];
        }
        next.iter().all(|c| c.is_finite()).then_some(next)
    }
}

/// Gap between `Tr(H V)` and the dual bound `Σ y` at `y = ρ·diag(U)` shifted
/// to dual feasibility (`Diag(y) ⪰ H`, `y_i ≥ 0` on the capped entries).
fn duality_gap(h: &CMatrix, u: &CMatrix, rho: f64, v: &CMatrix) -> f64 {
    let n = h.nrows();
    let y: Vec<f64> = (0..n)
        .map(|i| if i + 1 == n { rho * u[(i, i)].re } else { (rho * u[(i, i)].re).max(0.0) })
        .collect();
    let mut slack = -h.clone();
    for (i, yi) in y.iter().enumerate() {
        slack[(i, i)] += Complex64::new(*yi, 0.0);
    }
    let lmin = SymmetricEigen::new(slack).eigenvalues.min();
    let bound = y.iter().sum::<f64>() + n as f64 * (-lmin).max(0.0);
    bound - (h * v).trace().re
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn check_hermitian(h: &CMatrix) -> Result<()> {
    if h.nrows() != h.ncols() || h.nrows() < 2 {
        return Err(Error::Dimension(format!("SDP objective is {}x{}", h.nrows(), h.ncols())));
    }
    let asym = max_abs(&(h - h.adjoint()));
    if asym > 1e-9 * max_abs(h).max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidParameter(format!("objective not Hermitian (residual {asym:e})")));
    }
    Ok(())
}

pub fn solve_diag_trace_sdp(h: &EffectiveGainMatrix, opts: &SdpOptions) -> Result<SdpSolution> {
    let h = &h.0;
    check_hermitian(h)?;
    let n = h.nrows();
    // A non-negative diagonal entry of H can be dropped: raising V(i,i) to 1
    // afterwards keeps V ⪰ 0 and restores the objective exactly.
    let mut off = hermitian_part(h);
    let raised: Vec<bool> = (0..n).map(|i| i + 1 == n || off[(i, i)].re >= 0.0).collect();
    for i in (0..n).filter(|&i| raised[i]) {
        off[(i, i)] = Complex64::new(0.0, 0.0);
    }
    let scale = off.norm();
    if scale == 0.0 {
        let v = CMatrix::from_diagonal(&CVector::from_fn(n, |i, _| {
            Complex64::new(if raised[i] { 1.0 } else { 0.0 }, 0.0)
        }));
        return Ok(SdpSolution {
            objective: (h * &v).trace().re,
            v,
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            converged: true,
        });
    }
    let hn = off / Complex64::new(scale, 0.0);
    let mut rho = opts.rho;
    let mut z = CMatrix::identity(n, n);
    let mut u = CMatrix::zeros(n, n);
    let mut v = z.clone();
    let (mut r_pri, mut r_dual) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = false;
    let mut accel = Anderson::new(opts.memory);
    // plain ADMM image of the last non-extrapolated point, with its residual norm
    let mut fallback: Option<(CMatrix, CMatrix, f64)> = None;
    while iterations < opts.max_iter {
        iterations += 1;
        let (v1, z1, u1) = admm_step(&hn, rho, &z, &u);
        let x = pack(&z, &u);
        let g = pack(&z1, &u1);
        let f = &g - &x;
        let f_norm = f.norm();
        if let Some((fz, fu, prev)) = fallback.take() {
            if f_norm > prev {
                accel.reset();
                z = fz;
                u = fu;
                continue;
            }
        }
        r_pri = max_abs(&(&v1 - &z1));
        r_dual = rho * max_abs(&(&z1 - &z));
        v = v1;
        if r_pri <= opts.tol && (r_dual <= opts.tol || (iterations % 10 == 0 && duality_gap(&hn, &u1, rho, &v) <= opts.tol)) {
            converged = true;
            break;
        }
        let factor = if iterations % 10 != 0 {
            1.0
        } else if r_pri > 10.0 * r_dual {
            2.0
        } else if r_dual > 10.0 * r_pri {
            0.5
        } else {
            1.0
        };
        if factor != 1.0 {
            rho *= factor;
            z = z1;
            u = u1 / Complex64::new(factor, 0.0);
            accel.reset();
            continue;
        }
        match accel.extrapolate(x, f, &g) {
            Some(next) => {
                fallback = Some((z1, u1, f_norm));
                (z, u) = unpack(&next, n);
            }
            None => {
                z = z1;
                u = u1;
            }
        }
    }
    for i in (0..n).filter(|&i| raised[i]) {
        v[(i, i)] = Complex64::new(v[(i, i)].re.max(1.0), 0.0);
    }
    let objective = (h * &v).trace().re;
    Ok(SdpSolution { v, objective, iterations, primal_residual: r_pri, dual_residual: r_dual, converged })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions {
    pub randomizations: usize,
    /// Element-wise phase ascent on the best candidate.
    pub polish: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { randomizations: 100, polish: true }
    }
}

/// Maps a lifted vector `[v*; t]` to unit-modulus `v` after removing the phase of `t`.
fn candidate_to_v(x: &CVector) -> ReflectionVector {
    let n = x.len() - 1;
    let t = x[n];
    let rot = if t.norm() > 0.0 { t.conj() / t.norm() } else { Complex64::new(1.0, 0.0) };
    ReflectionVector::unit_modulus(x.iter().take(n).map(|c| (c * rot).conj()))
}

/// Coordinate ascent over element phases; each step is the exact maximizer
/// for one element, so the objective never decreases.
pub fn phase_ascent(h: &CMatrix, v: &ReflectionVector, max_sweeps: usize) -> ReflectionVector {
    let n = v.len();
    let mut x = lift(&v.0);
    let value = |x: &CVector| x.dotc(&(h * x)).re;
    let mut current = value(&x);
    for _ in 0..max_sweeps {
        for i in 0..n {
            let s: Complex64 = (0..=n).filter(|j| *j != i).map(|j| h[(i, j)] * x[j]).sum();
            if s.norm() > 0.0 {
                x[i] = s / s.norm();
            }
        }
        let next = value(&x);
        let gain = next - current;
        current = next;
        if gain <= 1e-13 * current.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    ReflectionVector::unit_modulus(x.iter().take(n).map(|c| c.conj()))
}

/// Best unit-modulus `v` among the principal-eigenvector projection and
/// Gaussian randomizations drawn from `V`.
pub fn extract_rank_one<R: Rng + ?Sized>(
    v: &CMatrix,
    h: &EffectiveGainMatrix,
    opts: &ExtractOptions,
    rng: &mut R,
) -> Result<(ReflectionVector, f64)> {
    let n = v.nrows();
    if h.dim() != n {
        return Err(Error::Dimension(format!("V is {n}x{n}, H is {0}x{0}", h.dim())));
    }
    let eig = SymmetricEigen::new(hermitian_part(v));
    let lead = eig.eigenvalues.iamax();
    let mut best = candidate_to_v(&eig.eigenvectors.column(lead).into_owned());
    let mut best_val = h.lifted_value(&best.0);
    let sqrt_l = CVector::from_iterator(n, eig.eigenvalues.iter().map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0)));
    for _ in 0..opts.randomizations {
        let z = CVector::from_fn(n, |i, _| complex_normal(rng, 1.0) * sqrt_l[i]);
        let cand = candidate_to_v(&(&eig.eigenvectors * z));
        let val = h.lifted_value(&cand.0);
        if val > best_val {
            best = cand;
            best_val = val;
        }
    }
    if opts.polish {
        let polished = phase_ascent(&h.0, &best, 200);
        let val = h.lifted_value(&polished.0);
        if val >= best_val {
            best = polished;
            best_val = val;
        }
    }
    Ok((best, best_val))
}

/// Text format: a `rows cols` header, then one line per row of `re im` pairs.
pub fn write_matrix<W: Write>(out: &mut W, m: &CMatrix) -> Result<()> {
    writeln!(out, "{} {}", m.nrows(), m.ncols())?;
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|c| format!("{} {}", c.re, c.im)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(input: R) -> Result<CMatrix> {
    let mut lines = input.lines();
    let bad = |msg: String| Error::InvalidParameter(format!("matrix file: {msg}"));
    let header = lines.next().ok_or_else(|| bad("empty".into()))??;
    let dims: Vec<usize> =
        header.split_whitespace().map(|t| t.parse().map_err(|_| bad(format!("header {header:?}")))).collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else { return Err(bad(format!("header {header:?}"))) };
    let mut m = CMatrix::zeros(rows, cols);
    for i in 0..rows {
        let line = lines.next().ok_or_else(|| bad(format!("missing row {i}")))??;
        let vals: Vec<f64> =
            line.split_whitespace().map(|t| t.parse().map_err(|_| bad(format!("row {i}: {t:?}")))).collect::<Result<_>>()?;
        if vals.len() != 2 * cols {
            return Err(bad(format!("row {i} has {} numbers, expected {}", vals.len(), 2 * cols)));
        }
        for j in 0..cols {
            m[(i, j)] = Complex64::new(vals[2 * j], vals[2 * j + 1]);
        }
    }
    Ok(m)
}
