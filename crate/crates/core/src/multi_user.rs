//! Multi-user long-timescale design: SSCA or sum-channel-gain (SCG) inner
//! solvers for the reflection vector, and an outer DE over `ς = [q, ψ, φ]`.
//!
//! Rates are in bit/s/Hz. [`rate_jacobian`] differentiates the natural-log
//! sum rate; the SSCA divides it by ln 2 before use.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::beamforming::{best_precoder, sinr_and_rate, WmmseOptions};
use crate::channel::{
    ArraySurfaceConfig, CMatrix, CVector, InstantaneousChannels, IrsLayout, PathCoefficients, RadioContext,
    ReflectionVector, Regions, StatisticalCsi, Steering,
};
use crate::de::{run_de_seeded, Bounds, DeParams, EvalTag};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::sdp::{extract_rank_one, solve_diag_trace_sdp, ExtractOptions, SdpOptions};
use crate::single_user::{penalty, repair_spacing};
use crate::stats::{heff_matrix, EffectiveGainMatrix, ExpectedGainTerms, McEstimate};

/// Conjugate Wirtinger gradient `∂R/∂v*` of the natural-log sum rate with
/// the precoder held fixed.
pub fn rate_jacobian(ch: &InstantaneousChannels, w: &CMatrix, v: &[Complex64], noise: f64) -> Result<CVector> {
    if !(noise > 0.0) {
        return Err(Error::InvalidParameter(format!("noise power {noise}")));
    }
    let n = ch.g.nrows();
    let k = ch.num_users();
    if v.len() != n || w.ncols() != k || w.nrows() != ch.g.ncols() {
        return Err(Error::Dimension(format!("jacobian: N = {n}, |v| = {}, W is {}x{}", v.len(), w.nrows(), w.ncols())));
    }
    let gw = &ch.g * w;
    let mut f = CVector::zeros(n);
    for user in 0..k {
        let r = &ch.r[user];
        // a_kj = conj(r_k) ⊙ G w_j and s_kj = vᵀ a_kj + h_kᴴ w_j
        let a: Vec<CVector> = (0..k).map(|j| CVector::from_fn(n, |i, _| r[i].conj() * gw[(i, j)])).collect();
        let s: Vec<Complex64> = (0..k)
            .map(|j| a[j].iter().zip(v).map(|(x, y)| x * y).sum::<Complex64>() + ch.h[user].dotc(&w.column(j)))
            .collect();
        let total: f64 = s.iter().map(|x| x.norm_sqr()).sum::<f64>() + noise;
        let interference = total - s[user].norm_sqr();
        for j in 0..k {
            let mut coef = s[j] / total;
            if j != user {
                coef -= s[j] / interference;
            }
            f.zip_apply(&a[j], |fi, ai| *fi += ai.conj() * coef);
        }
    }
    Ok(f)
}

/// Natural-log sum rate, the function differentiated by [`rate_jacobian`].
pub fn sum_rate_nats(ch: &InstantaneousChannels, w: &CMatrix, v: &[Complex64], noise: f64) -> Result<f64> {
    let h = ch.effective_all(v)?;
    Ok(sinr_and_rate(&h, w, noise)?.1 * LN_2)
}

/// Per-element maximizer of `2Re{f*(x − v)} − τ|x − v|²` over `|x| ≤ 1`.
pub fn disk_step(v_prev: Complex64, f: Complex64, tau: f64) -> Complex64 {
    let x = v_prev + f / tau;
    let m = x.norm();
    if m <= 1.0 {
        x
    } else {
        x / m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SscaParams {
    pub samples: usize,
    pub tau: f64,
    pub tol: f64,
    pub window: usize,
    pub max_iter: usize,
    /// When set, the stopping rule compares the window spread to `tol·|surrogate|`.
    pub relative_tol: bool,
    pub warm_start: bool,
}

impl Default for SscaParams {
    fn default() -> Self {
        Self { samples: 50, tau: 0.015, tol: 1e-3, window: 10, max_iter: 300, relative_tol: false, warm_start: false }
    }
}

/// Link budget and WMMSE settings shared by every rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateContext {
    pub power: f64,
    pub noise: f64,
    pub wmmse: WmmseOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SscaState {
    pub iteration: usize,
    pub v: Vec<Complex64>,
    pub rate_estimates: Vec<f64>,
    pub gradient: CVector,
    pub tau: f64,
}

impl SscaState {
    pub fn new(v: Vec<Complex64>, users: usize, tau: f64) -> Self {
        let n = v.len();
        Self { iteration: 0, v, rate_estimates: vec![0.0; users], gradient: CVector::zeros(n), tau }
    }

    pub fn rho(i: usize) -> f64 {
        1.0 / (1.0 + i as f64).powf(0.8)
    }

    pub fn delta(i: usize) -> f64 {
        2.0 / (2.0 + i as f64)
    }

    /// `Σ R̂_k + 2Re{fᴴ(x − v)} − τ‖x − v‖²`.
    pub fn surrogate(&self, x: &[Complex64]) -> f64 {
        let mut lin = 0.0;
        let mut quad = 0.0;
        for ((xi, vi), fi) in x.iter().zip(&self.v).zip(self.gradient.iter()) {
            let d = xi - vi;
            lin += (fi.conj() * d).re;
            quad += d.norm_sqr();
        }
        self.rate_estimates.iter().sum::<f64>() + 2.0 * lin - self.tau * quad
    }
}

/// Per-sample rates (bit/s/Hz, per user) and gradient (per bit) at the current `v`.
#[derive(Debug, Clone)]
pub struct SampleEvaluation {
    pub rates: Vec<f64>,
    pub gradient: CVector,
}

pub fn evaluate_sample(ch: &InstantaneousChannels, v: &[Complex64], ctx: &RateContext) -> Result<SampleEvaluation> {
    let h = ch.effective_all(v)?;
    let pre = best_precoder(&h, ctx.power, ctx.noise, &ctx.wmmse)?;
    let (gamma, _) = sinr_and_rate(&h, &pre.w, ctx.noise)?;
    let gradient = rate_jacobian(ch, &pre.w, v, ctx.noise)? / Complex64::new(LN_2, 0.0);
    Ok(SampleEvaluation { rates: gamma.iter().map(|g| (1.0 + g).log2()).collect(), gradient })
}

/// Recursive averaging of rates and gradients with weight ρ over one batch.
pub fn ssca_surrogate_update(state: &mut SscaState, batch: &[SampleEvaluation], rho: f64) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("empty SSCA batch".into()));
    }
    let t = batch.len() as f64;
    for (k, r) in state.rate_estimates.iter_mut().enumerate() {
        let mean = batch.iter().map(|s| s.rates[k]).sum::<f64>() / t;
        *r = (1.0 - rho) * *r + rho * mean;
    }
    let mut mean_grad = CVector::zeros(state.gradient.len());
    for s in batch {
        mean_grad += &s.gradient;
    }
    state.gradient = &state.gradient * Complex64::new(1.0 - rho, 0.0) + mean_grad * Complex64::new(rho / t, 0.0);
    Ok(())
}

/// Rate of every sample in a batch, labelled with its index on failure.
fn batch_map<T: Send>(
    samples: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..samples)
        .into_par_iter()
        .map(|t| f(t).map_err(|e| Error::Sample { index: t, source: Box::new(e) }))
        .collect()
}

/// Sample-average sum rate at `v` over fresh draws on the stream `(seed, label, tag)`.
#[allow(clippy::too_many_arguments)]
pub fn average_sum_rate(
    steering: &Steering,
    scsi: &StatisticalCsi,
    v: &[Complex64],
    ctx: &RateContext,
    samples: usize,
    seed: u64,
    label: &str,
    tag: &[u64],
) -> Result<McEstimate> {
    let rates = batch_map(samples, |t| {
        let mut idx = tag.to_vec();
        idx.push(t as u64);
        let ch = steering.channels(PathCoefficients::draw(scsi, &mut stream(seed, label, &idx)))?;
        let h = ch.effective_all(v)?;
        let pre = best_precoder(&h, ctx.power, ctx.noise, &ctx.wmmse)?;
        Ok(sinr_and_rate(&h, &pre.w, ctx.noise)?.1)
    })?;
    Ok(McEstimate::from_samples(&rates))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SscaTracePoint {
    pub iteration: usize,
    pub surrogate: f64,
    pub rate_estimate: f64,
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub v: ReflectionVector,
    pub rate: McEstimate,
    pub iterations: usize,
    pub converged: bool,
    /// SSCA only: surrogate value at every iteration.
    pub trace: Vec<SscaTracePoint>,
    /// SSCA only: batch rate before the final unit-modulus projection.
    pub rate_before_projection: Option<f64>,
    /// SCG only: SDP objective and the lifted value of the extracted vector.
    pub sdp: Option<(f64, f64)>,
}

/// Everything an inner solver needs besides the configuration.
#[derive(Debug, Clone, Copy)]
pub struct InnerContext<'a> {
    pub radio: &'a RadioContext,
    pub scsi: &'a StatisticalCsi,
    pub layout: &'a IrsLayout,
    pub rate: RateContext,
    pub ssca: SscaParams,
    pub sdp: SdpOptions,
    pub extract: ExtractOptions,
    pub seed: u64,
}

fn window_spread(trace: &[SscaTracePoint], window: usize) -> Option<f64> {
    if trace.len() < window || window == 0 {
        return None;
    }
    let tail = &trace[trace.len() - window..];
    let hi = tail.iter().map(|p| p.surrogate).fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().map(|p| p.surrogate).fold(f64::INFINITY, f64::min);
    Some(hi - lo)
}

/// SSCA from `v_init` (all ones when `None`) at a fixed configuration.
pub fn ssca_inner(
    config: &ArraySurfaceConfig,
    ctx: &InnerContext,
    tag: &[u64],
    v_init: Option<&ReflectionVector>,
) -> Result<InnerResult> {
    let p = &ctx.ssca;
    if p.samples == 0 || !(p.tau > 0.0) {
        return Err(Error::InvalidParameter(format!("SSCA samples {} tau {}", p.samples, p.tau)));
    }
    let st = Steering::new(ctx.radio, ctx.scsi, config, ctx.layout)?;
    let n = st.num_elements();
    let v0 = v_init.map(|v| v.0.clone()).unwrap_or_else(|| ReflectionVector::ones(n).0);
    if v0.len() != n {
        return Err(Error::Dimension(format!("initial v has {} entries for N = {n}", v0.len())));
    }
    let mut state = SscaState::new(v0, ctx.scsi.num_users(), p.tau);
    let mut trace = Vec::new();
    let mut converged = false;
    for i in 1..=p.max_iter {
        let batch = batch_map(p.samples, |t| {
            let mut idx = tag.to_vec();
            idx.extend([i as u64, t as u64]);
            let ch = st.channels(PathCoefficients::draw(ctx.scsi, &mut stream(ctx.seed, "ssca-batch", &idx)))?;
            evaluate_sample(&ch, &state.v, &ctx.rate)
        })?;
        ssca_surrogate_update(&mut state, &batch, SscaState::rho(i))?;
        let target: Vec<Complex64> =
            state.v.iter().zip(state.gradient.iter()).map(|(v, f)| disk_step(*v, *f, p.tau)).collect();
        let surrogate = state.surrogate(&target);
        let delta = SscaState::delta(i);
        state.v = state.v.iter().zip(&target).map(|(v, t)| v * (1.0 - delta) + t * delta).collect();
        state.iteration = i;
        trace.push(SscaTracePoint { iteration: i, surrogate, rate_estimate: state.rate_estimates.iter().sum() });
        if let Some(spread) = window_spread(&trace, p.window) {
            let limit = if p.relative_tol { p.tol * surrogate.abs() } else { p.tol };
            if spread < limit {
                converged = true;
                break;
            }
        }
    }
    let raw = state.v.clone();
    let v = ReflectionVector::unit_modulus(raw.iter().copied());
    let eval_tag: Vec<u64> = tag.iter().copied().chain([u64::MAX]).collect();
    let rate = average_sum_rate(&st, ctx.scsi, &v.0, &ctx.rate, p.samples, ctx.seed, "inner-eval", &eval_tag)?;
    let before = average_sum_rate(&st, ctx.scsi, &raw, &ctx.rate, p.samples, ctx.seed, "inner-eval", &eval_tag)?;
    Ok(InnerResult {
        v,
        rate,
        iterations: state.iteration,
        converged,
        trace,
        rate_before_projection: Some(before.mean),
        sdp: None,
    })
}

/// Sum over users of the effective-gain matrices at a configuration.
pub fn scg_matrix(config: &ArraySurfaceConfig, ctx: &InnerContext) -> Result<EffectiveGainMatrix> {
    let st = Steering::new(ctx.radio, ctx.scsi, config, ctx.layout)?;
    let mats = (0..ctx.scsi.num_users())
        .map(|k| ExpectedGainTerms::from_steering(ctx.scsi, &st, k).map(|t| heff_matrix(&t)))
        .collect::<Result<Vec<_>>>()?;
    EffectiveGainMatrix::sum(&mats)
}

/// Maximizes the expected sum channel gain by SDR, then reports the sample
/// average WMMSE sum rate.
pub fn scg_inner(config: &ArraySurfaceConfig, ctx: &InnerContext, tag: &[u64]) -> Result<InnerResult> {
    let h = scg_matrix(config, ctx)?;
    let sol = solve_diag_trace_sdp(&h, &ctx.sdp)?;
    let (v, lifted) = extract_rank_one(&sol.v, &h, &ctx.extract, &mut stream(ctx.seed, "scg-extract", tag))?;
    let st = Steering::new(ctx.radio, ctx.scsi, config, ctx.layout)?;
    let rate = average_sum_rate(&st, ctx.scsi, &v.0, &ctx.rate, ctx.ssca.samples, ctx.seed, "scg-rate", tag)?;
    Ok(InnerResult {
        v,
        rate,
        iterations: sol.iterations,
        converged: sol.converged,
        trace: Vec::new(),
        rate_before_projection: None,
        sdp: Some((sol.objective, lifted)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    Ssca,
    Scg,
}

pub fn run_inner(
    solver: InnerSolver,
    config: &ArraySurfaceConfig,
    ctx: &InnerContext,
    tag: &[u64],
) -> Result<InnerResult> {
    match solver {
        InnerSolver::Scg => scg_inner(config, ctx, tag),
        InnerSolver::Ssca => {
            let warm = if ctx.ssca.warm_start { Some(scg_inner(config, ctx, tag)?.v) } else { None };
            ssca_inner(config, ctx, tag, warm.as_ref())
        }
    }
}

/// Inner average rate minus the spacing penalty.
pub fn outer_fitness(radio: &RadioContext, config: &ArraySurfaceConfig, inner_rate: f64, eta: f64) -> f64 {
    inner_rate - penalty(&config.positions, radio.min_spacing(), eta)
}

/// Search box for `ς`; `pinned_q` fixes the positions.
pub fn outer_bounds(regions: &Regions, m: usize, pinned_q: Option<&[f64]>) -> Result<Bounds> {
    let (mut lo, mut hi) = match pinned_q {
        Some(q) if q.len() == m => (q.to_vec(), q.to_vec()),
        Some(q) => return Err(Error::Dimension(format!("{} pinned positions for M = {m}", q.len()))),
        None => (vec![regions.q_min; m], vec![regions.q_max; m]),
    };
    lo.extend([regions.psi.0, regions.phi.0]);
    hi.extend([regions.psi.1, regions.phi.1]);
    Bounds::new(lo, hi)
}

pub fn config_from_individual(x: &[f64], regions: &Regions) -> ArraySurfaceConfig {
    let m = x.len() - 2;
    ArraySurfaceConfig { positions: x[..m].to_vec(), psi: x[m], phi: x[m + 1], regions: *regions }
}

#[derive(Debug, Clone)]
pub struct MultiUserResult {
    pub config: ArraySurfaceConfig,
    pub inner: InnerResult,
    /// Best outer fitness per generation.
    pub trace: Vec<f64>,
}

/// Outer DE over `ς` with the chosen inner solver; `start` joins the initial
/// population. The winner is made spacing-feasible and re-solved once.
pub fn extended_de(
    ctx: &InnerContext,
    bounds: &Bounds,
    regions: &Regions,
    de: &DeParams,
    solver: InnerSolver,
    start: Option<&ArraySurfaceConfig>,
) -> Result<MultiUserResult> {
    let m = bounds.dim() - 2;
    let fitness = |x: &[f64], tag: EvalTag| {
        let cfg = config_from_individual(x, regions);
        let inner = run_inner(solver, &cfg, ctx, &[tag.generation as u64, tag.index as u64])?;
        Ok(outer_fitness(ctx.radio, &cfg, inner.rate.mean, de.eta))
    };
    let mut rng = stream(ctx.seed, "outer-de", &[]);
    let seeded: Vec<Vec<f64>> =
        start.map(|c| c.positions.iter().copied().chain([c.psi, c.phi]).collect()).into_iter().collect();
    let out = run_de_seeded(bounds, de, m, &seeded, &mut rng, &fitness, true)?;
    let best = out.best();
    let mut config = config_from_individual(best, regions);
    let pinned = bounds.lo[..m] == bounds.hi[..m];
    if !pinned {
        config.positions = repair_spacing(&config.positions, ctx.radio.min_spacing(), regions.q_min, regions.q_max)?;
    }
    config.check(ctx.radio)?;
    let inner = run_inner(solver, &config, ctx, &[u64::MAX])?;
    Ok(MultiUserResult { config, inner, trace: out.trace })
}
