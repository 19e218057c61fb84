//! Single-user long-timescale design: 6DMA positions and rotation from the
//! BS-side alignment factor, IRS rotation and reflection from the SDR.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamforming::mrt;
use crate::channel::{
    ArraySurfaceConfig, IrsLayout, PathCoefficients, RadioContext, ReflectionVector, Regions, StatisticalCsi, Steering,
    SPACING_SLACK,
};
use crate::de::{run_de, Bounds, DeParams, EvalTag};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::sdp::{extract_rank_one, solve_diag_trace_sdp, ExtractOptions, SdpOptions};
use crate::stats::{heff_matrix, ExpectedGainTerms, McEstimate};

/// `|cos(φ₀ + ψ) + cos(φ₁₀ − ψ)|`.
pub fn delta_factor(bs_irs_aod: f64, bs_user_aod: f64, psi: f64) -> f64 {
    ((bs_irs_aod + psi).cos() + (bs_user_aod - psi).cos()).abs()
}

/// LoS departure angles at the BS toward the IRS and toward one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkAngles {
    pub bs_irs: f64,
    pub bs_user: f64,
}

impl LinkAngles {
    pub fn of_user(scsi: &StatisticalCsi, k: usize) -> Self {
        Self { bs_irs: scsi.bs_irs.departure[0], bs_user: scsi.bs_user[k].departure[0] }
    }

    pub fn delta(&self, psi: f64) -> f64 {
        delta_factor(self.bs_irs, self.bs_user, psi)
    }
}

/// `â = a_t,0ᴴ·ã₀ = Σ_m exp(−j·k·q_m·(cos(φ₀+ψ) + cos(φ₁₀−ψ)))`.
pub fn bs_alignment(radio: &RadioContext, q: &[f64], psi: f64, angles: &LinkAngles) -> Complex64 {
    let grad = radio.wavenumber() * ((angles.bs_irs + psi).cos() + (angles.bs_user - psi).cos());
    q.iter().map(|x| Complex64::cis(-grad * x)).sum()
}

/// Uniform sparse array `q_m = q_min + (m−1)·λ/Δ`.
pub fn sparse_array_positions(radio: &RadioContext, delta: f64, m: usize, q_min: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta factor {delta}")));
    }
    let step = radio.wavelength() / delta;
    Ok((0..m).map(|i| q_min + i as f64 * step).collect())
}

/// Summed spacing deficit and the number of pairs closer than `d`.
pub fn spacing_penalty(q: &[f64], d: f64) -> (f64, usize) {
    let mut deficit = 0.0;
    let mut count = 0;
    for i in 0..q.len() {
        for j in i + 1..q.len() {
            let gap = (q[i] - q[j]).abs();
            if gap < d {
                deficit += d - gap;
                count += 1;
            }
        }
    }
    (deficit, count)
}

pub fn penalty(q: &[f64], d: f64, eta: f64) -> f64 {
    let (b1, b2) = spacing_penalty(q, d);
    eta * b1 * b2 as f64
}

pub fn de_fitness(radio: &RadioContext, q: &[f64], psi: f64, angles: &LinkAngles, eta: f64) -> f64 {
    bs_alignment(radio, q, psi, angles).norm() - penalty(q, radio.min_spacing(), eta)
}

/// Sorts `q` and enforces the minimum spacing with the fewest forward and
/// backward shifts, keeping every element inside `[q_min, q_max]`.
pub fn repair_spacing(q: &[f64], d: f64, q_min: f64, q_max: f64) -> Result<Vec<f64>> {
    let mut x: Vec<f64> = q.iter().map(|v| v.clamp(q_min, q_max)).collect();
    x.sort_by(|a, b| a.total_cmp(b));
    if x.windows(2).all(|w| w[1] - w[0] >= d - SPACING_SLACK) {
        return Ok(x);
    }
    for i in 1..x.len() {
        x[i] = x[i].max(x[i - 1] + d);
    }
    let n = x.len();
    if n > 0 && x[n - 1] > q_max {
        x[n - 1] = q_max;
        for i in (0..n - 1).rev() {
            x[i] = x[i].min(x[i + 1] - d);
        }
    }
    if x.first().is_some_and(|v| *v < q_min - SPACING_SLACK) {
        return Err(Error::Infeasible(format!("{n} antennas do not fit in [{q_min}, {q_max}] at spacing {d}")));
    }
    if let Some(v) = x.first_mut() {
        *v = v.max(q_min);
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum P31Branch {
    ClosedForm,
    Evolution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct P31Solution {
    pub q: Vec<f64>,
    /// `|â|` at `q`.
    pub value: f64,
    pub branch: P31Branch,
    /// DE best fitness per generation; empty for the closed form.
    pub trace: Vec<f64>,
}

/// Positions for a fixed ψ: the sparse array when it fits the region
/// (equality included), DE otherwise.
pub fn solve_p31(
    radio: &RadioContext,
    psi: f64,
    angles: &LinkAngles,
    regions: &Regions,
    m: usize,
    params: &DeParams,
    seed: u64,
) -> Result<P31Solution> {
    if m == 0 {
        return Err(Error::InvalidParameter("no antennas".into()));
    }
    let aperture = regions.aperture();
    let d = radio.min_spacing();
    if (m - 1) as f64 * d > aperture + SPACING_SLACK {
        return Err(Error::Infeasible(format!("{m} antennas need {} m, region is {aperture} m", (m - 1) as f64 * d)));
    }
    let delta = angles.delta(psi);
    let threshold = (m - 1) as f64 * radio.wavelength() / aperture;
    if m == 1 || delta >= threshold {
        let q = if m == 1 { vec![regions.q_min] } else { sparse_array_positions(radio, delta, m, regions.q_min)? };
        let value = bs_alignment(radio, &q, psi, angles).norm();
        return Ok(P31Solution { q, value, branch: P31Branch::ClosedForm, trace: Vec::new() });
    }
    let bounds = Bounds::new(vec![regions.q_min; m], vec![regions.q_max; m])?;
    let fitness = |q: &[f64], _: EvalTag| Ok(de_fitness(radio, q, psi, angles, params.eta));
    let mut rng = stream(seed, "p31-de", &[psi.to_bits()]);
    let out = run_de(&bounds, params, m, &mut rng, &fitness, false)?;
    // The penalty tolerates tiny spacing deficits, so repair every final
    // individual and keep the best feasible one.
    let mut best: Option<(Vec<f64>, f64)> = None;
    for x in &out.population.individuals {
        let q = repair_spacing(x, d, regions.q_min, regions.q_max)?;
        let value = bs_alignment(radio, &q, psi, angles).norm();
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((q, value));
        }
    }
    let (q, value) = best.expect("population is non-empty");
    Ok(P31Solution { q, value, branch: P31Branch::Evolution, trace: out.trace })
}

/// `n` evenly spaced points over `[lo, hi]`; a single point sits at the midpoint.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Index of the first maximum, so ties resolve to the smallest grid angle.
fn first_argmax(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Exhaustive ψ search over an ascending grid.
pub fn search_psi(
    radio: &RadioContext,
    angles: &LinkAngles,
    regions: &Regions,
    m: usize,
    params: &DeParams,
    grid: &[f64],
    seed: u64,
) -> Result<(f64, P31Solution)> {
    let sols = grid
        .par_iter()
        .map(|psi| solve_p31(radio, *psi, angles, regions, m, params, seed))
        .collect::<Result<Vec<_>>>()?;
    let i = first_argmax(sols.iter().map(|s| s.value)).ok_or_else(|| Error::InvalidParameter("empty psi grid".into()))?;
    Ok((grid[i], sols.into_iter().nth(i).expect("index in range")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct P32Solution {
    pub v: ReflectionVector,
    /// Expected channel gain at `v`.
    pub value: f64,
    pub sdp_objective: f64,
    pub sdp_converged: bool,
}

pub fn solve_p32(
    terms: &ExpectedGainTerms,
    sdp: &SdpOptions,
    extract: &ExtractOptions,
    seed: u64,
) -> Result<P32Solution> {
    let h = heff_matrix(terms);
    let sol = solve_diag_trace_sdp(&h, sdp)?;
    let (v, _) = extract_rank_one(&sol.v, &h, extract, &mut stream(seed, "p32-extract", &[]))?;
    let value = terms.expected_gain(&v.0)?;
    Ok(P32Solution { v, value, sdp_objective: sol.objective, sdp_converged: sol.converged })
}

/// Exhaustive φ search; `terms_at(φ)` builds the closed-form terms.
pub fn search_phi<F>(
    terms_at: F,
    grid: &[f64],
    sdp: &SdpOptions,
    extract: &ExtractOptions,
    seed: u64,
) -> Result<(f64, P32Solution)>
where
    F: Fn(f64) -> Result<ExpectedGainTerms> + Sync,
{
    let sols = grid
        .par_iter()
        .enumerate()
        .map(|(i, phi)| solve_p32(&terms_at(*phi)?, sdp, extract, crate::rng::stream_id("phi", &[seed, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    let i = first_argmax(sols.iter().map(|s| s.value)).ok_or_else(|| Error::InvalidParameter("empty phi grid".into()))?;
    Ok((grid[i], sols.into_iter().nth(i).expect("index in range")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleUserOptions {
    pub de: DeParams,
    pub psi_grid: usize,
    pub phi_grid: usize,
    pub power: f64,
    pub noise: f64,
    pub eval_samples: usize,
    #[serde(skip)]
    pub sdp: SdpOptions,
    #[serde(skip)]
    pub extract: ExtractOptions,
}

impl Default for SingleUserOptions {
    fn default() -> Self {
        Self {
            de: DeParams::default(),
            psi_grid: 61,
            phi_grid: 61,
            power: 1.0,
            noise: 1e-7,
            eval_samples: 500,
            sdp: SdpOptions::default(),
            extract: ExtractOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SingleUserResult {
    pub config: ArraySurfaceConfig,
    pub v: ReflectionVector,
    pub predicted_gain: f64,
    pub rate: McEstimate,
    pub p31: P31Solution,
    pub sdp_converged: bool,
}

/// Average MRT rate of user 0 over fresh I-CSI draws.
#[allow(clippy::too_many_arguments)]
pub fn mrt_rate(
    radio: &RadioContext,
    scsi: &StatisticalCsi,
    config: &ArraySurfaceConfig,
    layout: &IrsLayout,
    v: &ReflectionVector,
    power: f64,
    noise: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let st = Steering::new(radio, scsi, config, layout)?;
    let rates = (0..samples)
        .map(|t| {
            let mut rng = stream(seed, "mrt-eval", &[t as u64]);
            let h = st.channels(PathCoefficients::draw(scsi, &mut rng))?.effective(0, &v.0)?;
            let w = mrt(&h, power)?;
            Ok((1.0 + h.dotc(&w).norm_sqr() / noise).log2())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_samples(&rates))
}

/// Subproblem 1 (ψ, q) followed by subproblem 2 (φ, v) for user 0, then a
/// Monte-Carlo MRT rate on an evaluation stream.
pub fn single_user_pipeline(
    radio: &RadioContext,
    scsi: &StatisticalCsi,
    layout: &IrsLayout,
    regions: &Regions,
    m: usize,
    opts: &SingleUserOptions,
    seed: u64,
) -> Result<SingleUserResult> {
    let angles = LinkAngles::of_user(scsi, 0);
    let psi_grid = uniform_grid(regions.psi.0, regions.psi.1, opts.psi_grid);
    let (psi, p31) = search_psi(radio, &angles, regions, m, &opts.de, &psi_grid, seed)?;
    let base = ArraySurfaceConfig { positions: p31.q.clone(), psi, phi: 0.0, regions: *regions };
    let terms_at = |phi: f64| {
        let cfg = ArraySurfaceConfig { phi, ..base.clone() };
        ExpectedGainTerms::new(radio, scsi, 0, &cfg, layout)
    };
    let phi_grid = uniform_grid(regions.phi.0, regions.phi.1, opts.phi_grid);
    let (phi, p32) = search_phi(terms_at, &phi_grid, &opts.sdp, &opts.extract, seed)?;
    let config = ArraySurfaceConfig { phi, ..base };
    config.check(radio)?;
    let rate = mrt_rate(radio, scsi, &config, layout, &p32.v, opts.power, opts.noise, opts.eval_samples, seed)?;
    Ok(SingleUserResult {
        config,
        v: p32.v,
        predicted_gain: p32.value,
        rate,
        p31,
        sdp_converged: p32.sdp_converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_scsi, NodeGeometry, PathCounts, ScsiSampling};
    use std::f64::consts::PI;

    fn radio() -> RadioContext {
        RadioContext::from_carrier(6e9).unwrap()
    }

    fn scsi(l: usize, seed: u64) -> StatisticalCsi {
        let mut rng = stream(seed, "su-test", &[]);
        let geo = NodeGeometry::with_random_users([1.0, 1.0, 0.0], [0.0; 3], [4.0, -18.0, 0.0], 3.0, 1, &mut rng)
            .unwrap();
        let s = ScsiSampling { paths: PathCounts::uniform(l), ..Default::default() };
        sample_scsi(&radio(), &geo, &s, &mut rng).unwrap()
    }

    #[test]
    fn delta_examples() {
        assert!(delta_factor(PI / 2.0, PI / 2.0, 0.0) < 1e-15);
        assert!((delta_factor(0.0, 0.0, 0.0) - 2.0).abs() < 1e-15);
        assert!(delta_factor(PI / 3.0, 2.0 * PI / 3.0, PI / 6.0) < 1e-15);
    }

    #[test]
    fn sparse_array_example_and_optimality() {
        let r = radio();
        let q = sparse_array_positions(&r, 1.0, 3, 0.0).unwrap();
        for (a, b) in q.iter().zip([0.0, 0.05, 0.10]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(sparse_array_positions(&r, 0.0, 3, 0.0).is_err());
        for (a, b, psi) in [(0.7, 1.1, 0.2), (2.0, 0.6, -0.4), (0.5, 0.5, 0.0)] {
            let ang = LinkAngles { bs_irs: a, bs_user: b };
            let q = sparse_array_positions(&r, ang.delta(psi), 7, -0.3).unwrap();
            assert!((bs_alignment(&r, &q, psi, &ang).norm() - 7.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fitness_penalty_examples() {
        let r = radio();
        let d = r.min_spacing();
        let ang = LinkAngles { bs_irs: 1.0, bs_user: 1.3 };
        let feasible = [0.0, d, 2.5 * d];
        assert_eq!(penalty(&feasible, d, 1000.0), 0.0);
        let close = [0.0, d / 2.0];
        let (b1, b2) = spacing_penalty(&close, d);
        assert!((b1 - d / 2.0).abs() < 1e-15);
        assert_eq!(b2, 1);
        let f = de_fitness(&r, &close, 0.0, &ang, 1000.0);
        assert!((f - (bs_alignment(&r, &close, 0.0, &ang).norm() - 1000.0 * d / 2.0)).abs() < 1e-12);
        let q = sparse_array_positions(&r, ang.delta(0.1), 5, 0.0).unwrap();
        assert!((de_fitness(&r, &q, 0.1, &ang, 1000.0) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn repair_makes_spacing_feasible() {
        let d = 0.025;
        let q = repair_spacing(&[0.0, 0.001, 0.002, 0.1], d, 0.0, 0.1).unwrap();
        assert!(q.windows(2).all(|w| w[1] - w[0] >= d - 1e-12));
        assert!(q.iter().all(|x| *x >= 0.0 && *x <= 0.1));
        let q = repair_spacing(&[0.1, 0.099, 0.098], d, 0.0, 0.1).unwrap();
        assert!(q.windows(2).all(|w| w[1] - w[0] >= d - 1e-12));
        assert!(repair_spacing(&[0.0; 6], d, 0.0, 0.1).is_err());
    }

    #[test]
    fn branch_selection() {
        let r = radio();
        let m = 4;
        let wide = Regions::scaled_ula(m, &r, 10.0, PI / 6.0);
        let ang = LinkAngles { bs_irs: 0.6, bs_user: 0.9 };
        let params = DeParams { generations: 30, ..Default::default() };
        let s = solve_p31(&r, 0.0, &ang, &wide, m, &params, 1).unwrap();
        assert_eq!(s.branch, P31Branch::ClosedForm);
        assert!((s.value - m as f64).abs() < 1e-9);

        let narrow = Regions::scaled_ula(m, &r, 1.2, PI / 6.0);
        let s = solve_p31(&r, 0.0, &ang, &narrow, m, &params, 1).unwrap();
        assert_eq!(s.branch, P31Branch::Evolution);
        let cfg = ArraySurfaceConfig { positions: s.q.clone(), psi: 0.0, phi: 0.0, regions: narrow };
        cfg.check(&r).unwrap();
        // any uniform λ/Δ array truncated to the region is dominated
        let step = r.wavelength() / ang.delta(0.0);
        for start in 0..10 {
            let q0 = narrow.q_min + start as f64 * 0.002;
            let trunc: Vec<f64> = (0..m).map(|i| (q0 + i as f64 * step).min(narrow.q_max)).collect();
            if let Ok(rep) = repair_spacing(&trunc, r.min_spacing(), narrow.q_min, narrow.q_max) {
                assert!(s.value >= bs_alignment(&r, &rep, 0.0, &ang).norm() - 1e-9);
            }
        }

        // exact boundary: aperture equals the sparse-array aperture
        let delta = ang.delta(0.0);
        let aperture = (m - 1) as f64 * r.wavelength() / delta;
        let tie = Regions { q_min: 0.0, q_max: aperture, ..wide };
        let s = solve_p31(&r, 0.0, &ang, &tie, m, &params, 1).unwrap();
        assert_eq!(s.branch, P31Branch::ClosedForm);
    }

    #[test]
    fn psi_search_properties() {
        let r = radio();
        let m = 4;
        let regions = Regions::scaled_ula(m, &r, 3.0, PI / 6.0);
        let ang = LinkAngles { bs_irs: 1.0, bs_user: 1.4 };
        let p = DeParams { generations: 20, population: 20, ..Default::default() };
        let (psi, _) = search_psi(&r, &ang, &regions, m, &p, &[0.05], 3).unwrap();
        assert_eq!(psi, 0.05);
        // symmetric scene: Δ(ψ) = Δ(−ψ) when the two angles coincide at π/2 ± ...
        let sym = LinkAngles { bs_irs: PI / 2.0, bs_user: PI / 2.0 };
        let wide = Regions::scaled_ula(m, &r, 10.0, PI / 6.0);
        let (psi, s) = search_psi(&r, &sym, &wide, m, &p, &uniform_grid(-0.5, 0.5, 11), 3).unwrap();
        assert!((psi + 0.5).abs() < 1e-12, "tie goes to the smallest angle, got {psi}");
        assert!((s.value - m as f64).abs() < 1e-9);
        let coarse = search_psi(&r, &ang, &regions, m, &p, &uniform_grid(-0.5, 0.5, 3), 3).unwrap().1.value;
        let fine = search_psi(&r, &ang, &regions, m, &p, &uniform_grid(-0.5, 0.5, 5), 3).unwrap().1.value;
        assert!(fine >= coarse - 1e-9);
    }

    #[test]
    fn p32_single_path_matches_alignment_bound() {
        let r = radio();
        let s = scsi(0, 4);
        let lay = IrsLayout::grid(2, 4, r.min_spacing());
        let cfg = ArraySurfaceConfig::centered_ula(4, &r, Regions::scaled_ula(4, &r, 3.0, PI / 6.0));
        let t = ExpectedGainTerms::new(&r, &s, 0, &cfg, &lay).unwrap();
        let sol = solve_p32(&t, &SdpOptions::default(), &ExtractOptions::default(), 1).unwrap();
        let n = 8.0;
        let want = t.c1
            + 4.0 * n * n * s.bs_irs.los.norm_sqr() * s.irs_user[0].los.norm_sqr()
            + 2.0 * n * t.omega.norm() * t.a_hat_bs.norm();
        assert!((sol.value - want).abs() < 0.01 * want);
        assert!(sol.value <= sol.sdp_objective * (1.0 + 1e-6));
    }

    #[test]
    fn p32_without_cross_term() {
        let r = radio();
        let s = scsi(2, 5);
        let lay = IrsLayout::grid(1, 3, r.min_spacing());
        let cfg = ArraySurfaceConfig::centered_ula(3, &r, Regions::scaled_ula(3, &r, 3.0, PI / 6.0));
        let mut t = ExpectedGainTerms::new(&r, &s, 0, &cfg, &lay).unwrap();
        t.omega = Complex64::new(0.0, 0.0);
        let sol = solve_p32(&t, &SdpOptions::default(), &ExtractOptions::default(), 2).unwrap();
        let mut best: f64 = 0.0;
        for a in 0..64 {
            for b in 0..64 {
                let v = ReflectionVector::from_phases(&[0.0, 2.0 * PI * a as f64 / 64.0, 2.0 * PI * b as f64 / 64.0]);
                best = best.max(t.reflected_power(&v.0));
            }
        }
        assert!(sol.value - t.c1 >= 0.98 * best);
    }

    #[test]
    fn single_path_gain_flat_over_phi() {
        let r = radio();
        let s = scsi(0, 6);
        let lay = IrsLayout::grid(2, 3, r.min_spacing());
        let cfg = ArraySurfaceConfig::centered_ula(4, &r, Regions::scaled_ula(4, &r, 3.0, PI / 6.0));
        let vals: Vec<f64> = uniform_grid(-PI / 6.0, PI / 6.0, 7)
            .into_iter()
            .map(|phi| {
                let c = ArraySurfaceConfig { phi, ..cfg.clone() };
                let t = ExpectedGainTerms::new(&r, &s, 0, &c, &lay).unwrap();
                solve_p32(&t, &SdpOptions::default(), &ExtractOptions::default(), 3).unwrap().value
            })
            .collect();
        let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
        let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!((hi - lo) / hi < 1e-6, "{vals:?}");
    }

    #[test]
    fn pipeline_beats_fixed_configuration() {
        let r = radio();
        let s = scsi(2, 7);
        let lay = IrsLayout::grid(2, 4, r.min_spacing());
        let m = 4;
        let regions = Regions::scaled_ula(m, &r, 3.0, PI / 6.0);
        let opts = SingleUserOptions {
            de: DeParams { population: 20, generations: 20, ..Default::default() },
            psi_grid: 13,
            phi_grid: 5,
            eval_samples: 200,
            ..Default::default()
        };
        let res = single_user_pipeline(&r, &s, &lay, &regions, m, &opts, 7).unwrap();
        res.config.check(&r).unwrap();
        let fixed = ArraySurfaceConfig::centered_ula(m, &r, regions);
        let t = ExpectedGainTerms::new(&r, &s, 0, &fixed, &lay).unwrap();
        let fixed_sol = solve_p32(&t, &opts.sdp, &opts.extract, 7).unwrap();
        assert!(res.predicted_gain >= fixed_sol.value * (1.0 - 1e-9));
    }

    #[test]
    fn single_antenna_de_is_trivial() {
        let r = radio();
        let regions = Regions { q_min: 0.0, q_max: 0.1, psi: (0.0, 0.0), phi: (0.0, 0.0) };
        let ang = LinkAngles { bs_irs: 0.8, bs_user: 1.9 };
        let s = solve_p31(&r, 0.0, &ang, &regions, 1, &DeParams::default(), 0).unwrap();
        assert_eq!(s.value, 1.0);
    }
}
