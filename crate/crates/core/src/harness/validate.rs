//! Quick oracle suite behind the `validate` command.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use std::f64::consts::PI;

use crate::beamforming::{mrt, sinr_and_rate, wmmse, WmmseOptions};
use crate::channel::{
    sample_scsi, ArraySurfaceConfig, CMatrix, CVector, InstantaneousChannels, IrsLayout, NodeGeometry, PathCoefficients,
    PathCounts, ReflectionVector, Regions, ScsiSampling,
};
use crate::error::Result;
use crate::multi_user::{rate_jacobian, sum_rate_nats};
use crate::rng::{complex_normal, stream};
use crate::sdp::{extract_rank_one, solve_diag_trace_sdp, ExtractOptions, SdpOptions};
use crate::single_user::{bs_alignment, sparse_array_positions, LinkAngles};
use crate::stats::{mc_gain_oracle, EffectiveGainMatrix, ExpectedGainTerms};

use super::config::ExperimentConfig;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, limit: f64) -> Check {
    Check { name, passed: worst < limit, detail: format!("worst {worst:.3e}, limit {limit:.0e}") }
}

pub fn run_suite(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    Ok(vec![
        expected_gain(cfg.seed)?,
        jacobian(cfg.seed)?,
        wmmse_checks(cfg.seed)?,
        sdp_grid(cfg.seed)?,
        sparse_array(cfg)?,
    ])
}

fn expected_gain(seed: u64) -> Result<Check> {
    let cfg = ExperimentConfig::default();
    let radio = cfg.radio()?;
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        let mut rng = stream(seed, "validate-gain", &[i]);
        let geo = NodeGeometry::with_random_users([1.0, 1.0, 0.0], [0.0; 3], [4.0, -18.0, 0.0], 3.0, 1, &mut rng)?;
        let scsi = sample_scsi(&radio, &geo, &ScsiSampling { paths: PathCounts::uniform(3), ..Default::default() }, &mut rng)?;
        let regions = Regions::scaled_ula(6, &radio, 3.0, PI / 6.0);
        let config = ArraySurfaceConfig::centered_ula(6, &radio, regions);
        let layout = IrsLayout::grid(4, 4, radio.min_spacing());
        let v = ReflectionVector::from_phases(&(0..16).map(|_| 2.0 * PI * rng.random::<f64>()).collect::<Vec<_>>());
        let terms = ExpectedGainTerms::new(&radio, &scsi, 0, &config, &layout)?;
        let closed = terms.expected_gain(&v.0)?;
        let mc = mc_gain_oracle(&radio, &scsi, 0, &config, &layout, &v.0, 100_000, &mut rng)?;
        worst = worst.max((closed - mc.mean).abs() / closed);
    }
    Ok(check("expected gain vs Monte Carlo", worst, 1e-2))
}

fn random_channels(seed: u64, i: u64) -> (InstantaneousChannels, CMatrix, Vec<Complex64>) {
    let mut rng = stream(seed, "validate-jacobian", &[i]);
    let mut c = |r: usize, k: usize, var: f64| CMatrix::from_fn(r, k, |_, _| complex_normal(&mut rng, var));
    let g = c(8, 4, 1.0);
    let r = (0..2).map(|_| c(8, 1, 1.0).column(0).into_owned()).collect();
    let h = (0..2).map(|_| c(4, 1, 1.0).column(0).into_owned()).collect();
    let w = c(4, 2, 0.25);
    let phases = c(8, 1, 1.0);
    let v = phases.iter().map(|z| z / z.norm()).collect();
    let coefficients = PathCoefficients { bs_irs: vec![], irs_user: vec![], bs_user: vec![] };
    (InstantaneousChannels { g, r, h, coefficients }, w, v)
}

fn jacobian(seed: u64) -> Result<Check> {
    let noise = 0.5;
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..5 {
        let (ch, w, v) = random_channels(seed, i);
        let f = rate_jacobian(&ch, &w, &v, noise)?;
        for n in 0..v.len() {
            for (dir, an) in [(Complex64::new(1.0, 0.0), 2.0 * f[n].re), (Complex64::new(0.0, 1.0), 2.0 * f[n].im)] {
                let (mut vp, mut vm) = (v.clone(), v.clone());
                vp[n] += dir * step;
                vm[n] -= dir * step;
                let fd = (sum_rate_nats(&ch, &w, &vp, noise)? - sum_rate_nats(&ch, &w, &vm, noise)?) / (2.0 * step);
                worst = worst.max((fd - an).abs() / an.abs().max(1e-3));
            }
        }
    }
    Ok(check("rate Jacobian vs central differences", worst, 1e-4))
}

fn wmmse_checks(seed: u64) -> Result<Check> {
    let mut rng = stream(seed, "validate-wmmse", &[]);
    let mut drop: f64 = 0.0;
    let mut mrt_gap: f64 = 0.0;
    for _ in 0..10 {
        let h: Vec<CVector> = (0..3).map(|_| CVector::from_fn(4, |_, _| complex_normal(&mut rng, 1.0))).collect();
        let res = wmmse(&h, 1.0, 0.1, &WmmseOptions::default())?;
        for pair in res.rates.windows(2) {
            drop = drop.max(pair[0] - pair[1]);
        }
        let single = &h[..1];
        let one = wmmse(single, 1.0, 0.1, &WmmseOptions::default())?.rate();
        let w = CMatrix::from_columns(&[mrt(&single[0], 1.0)?]);
        mrt_gap = mrt_gap.max((one - sinr_and_rate(single, &w, 0.1)?.1).abs());
    }
    let passed = drop <= 1e-9 && mrt_gap < 1e-6;
    Ok(Check {
        name: "WMMSE monotone, K = 1 equals MRT",
        passed,
        detail: format!("largest decrease {drop:.3e}, MRT gap {mrt_gap:.3e}"),
    })
}

fn sdp_grid(seed: u64) -> Result<Check> {
    let mut rng = stream(seed, "validate-sdp", &[]);
    let mut worst: f64 = 0.0;
    let grid = 64;
    for _ in 0..5 {
        let a = CMatrix::from_fn(3, 3, |_, _| complex_normal(&mut rng, 1.0));
        let h = EffectiveGainMatrix((&a * a.adjoint() + (&a * a.adjoint()).adjoint()) * Complex64::new(0.5, 0.0));
        let sol = solve_diag_trace_sdp(&h, &SdpOptions::default())?;
        let (_, value) = extract_rank_one(&sol.v, &h, &ExtractOptions::default(), &mut rng)?;
        let mut best = f64::NEG_INFINITY;
        for i in 0..grid {
            for j in 0..grid {
                let v = [Complex64::cis(2.0 * PI * i as f64 / grid as f64), Complex64::cis(2.0 * PI * j as f64 / grid as f64)];
                best = best.max(h.lifted_value(&v));
            }
        }
        worst = worst.max((best - value) / best);
    }
    Ok(check("SDR vs 64-point phase grid (N = 2)", worst, 2e-2))
}

fn sparse_array(cfg: &ExperimentConfig) -> Result<Check> {
    let radio = cfg.radio()?;
    let mut worst: f64 = 0.0;
    let mut rng = stream(cfg.seed, "validate-sparse", &[]);
    for m in [4, 8, 10] {
        let angles = LinkAngles { bs_irs: PI / 6.0 + rng.random::<f64>(), bs_user: PI / 2.0 + rng.random::<f64>() };
        let delta = angles.delta(0.0);
        if delta == 0.0 {
            continue;
        }
        let q = sparse_array_positions(&radio, delta, m, 0.0)?;
        worst = worst.max((bs_alignment(&radio, &q, 0.0, &angles).norm() - m as f64).abs());
    }
    Ok(check("sparse array reaches |a| = M", worst, 1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_default_config() {
        let checks = run_suite(&ExperimentConfig::default()).unwrap();
        assert_eq!(checks.len(), 5);
        for c in checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
