//! Short-timescale precoding: MRT and WMMSE.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::channel::{CMatrix, CVector};
use crate::error::{Error, Result};

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Columns are the per-user beamformers `w_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub w: CMatrix,
    pub power_budget: f64,
}

impl Precoder {
    pub fn power(&self) -> f64 {
        self.w.norm_squared()
    }

    pub fn is_feasible(&self) -> bool {
        self.power() <= self.power_budget * (1.0 + 1e-9)
    }
}

pub fn mrt(h: &CVector, power: f64) -> Result<CVector> {
    let n = h.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroChannel);
    }
    Ok(h * Complex64::new(power.sqrt() / n, 0.0))
}

fn check_dims(h: &[CVector], w: &CMatrix) -> Result<()> {
    if h.len() != w.ncols() || h.iter().any(|hk| hk.len() != w.nrows()) {
        return Err(Error::Dimension(format!("{} channels vs {}x{} precoder", h.len(), w.nrows(), w.ncols())));
    }
    Ok(())
}

/// Per-user SINR and the sum rate in bit/s/Hz.
pub fn sinr_and_rate(h: &[CVector], w: &CMatrix, noise: f64) -> Result<(Vec<f64>, f64)> {
    check_dims(h, w)?;
    if !(noise > 0.0) {
        return Err(Error::InvalidParameter(format!("noise power {noise}")));
    }
    let gamma: Vec<f64> = h
        .iter()
        .enumerate()
        .map(|(k, hk)| {
            let p: Vec<f64> = w.column_iter().map(|wi| hk.dotc(&wi).norm_sqr()).collect();
            let total: f64 = p.iter().sum();
            p[k] / (total - p[k] + noise)
        })
        .collect();
    let rate = gamma.iter().map(|g| (1.0 + g).log2()).sum();
    Ok((gamma, rate))
}

pub fn sum_rate(h: &[CVector], w: &CMatrix, noise: f64) -> Result<f64> {
    sinr_and_rate(h, w, noise).map(|(_, r)| r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WmmseOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relative power residual accepted by the μ bisection.
    pub power_tol: f64,
}

impl Default for WmmseOptions {
    fn default() -> Self {
        Self { tol: 1e-4, max_iter: 100, power_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseState {
    pub chi: Vec<Complex64>,
    pub kappa: Vec<f64>,
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct WmmseResult {
    pub precoder: Precoder,
    pub state: WmmseState,
    /// Sum rate after initialization and after every iteration.
    pub rates: Vec<f64>,
    pub converged: bool,
}

impl WmmseResult {
    pub fn rate(&self) -> f64 {
        *self.rates.last().expect("trace holds the initial rate")
    }
}

/// Finds μ ≥ 0 with `Σ|c_m|²/(λ_m+μ)² = P` and returns `(A + μI)⁻¹·B`.
fn power_constrained_solve(a: &CMatrix, b: &CMatrix, power: f64, tol: f64) -> Result<(CMatrix, f64)> {
    let eig = SymmetricEigen::new(a.clone());
    let u = &eig.eigenvectors;
    let lam = &eig.eigenvalues;
    let c = u.adjoint() * b;
    let row_power: Vec<f64> = c.row_iter().map(|r| r.norm_squared()).collect();
    let lmax = lam.iter().cloned().fold(0.0, f64::max);
    let null = 1e-12 * lmax.max(f64::MIN_POSITIVE);
    let power_at = |mu: f64| -> f64 {
        row_power
            .iter()
            .zip(lam.iter())
            .map(|(p, l)| {
                let d = l.max(0.0) + mu;
                if d <= null {
                    0.0
                } else {
                    p / (d * d)
                }
            })
            .sum()
    };
    let solve = |mu: f64| -> CMatrix {
        let mut scaled = c.clone();
        for (mut row, l) in scaled.row_iter_mut().zip(lam.iter()) {
            let d = l.max(0.0) + mu;
            let s = if d <= null { 0.0 } else { 1.0 / d };
            row *= Complex64::new(s, 0.0);
        }
        u * scaled
    };
    if power_at(0.0) <= power {
        return Ok((solve(0.0), 0.0));
    }
    let mut hi = (row_power.iter().sum::<f64>() / power).sqrt().max(f64::MIN_POSITIVE);
    let mut grow = 0;
    while power_at(hi) > power {
        hi *= 2.0;
        grow += 1;
        if grow > 200 || !hi.is_finite() {
            return Err(Error::Bisection(format!("no upper bracket for mu (power {power})")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let p = power_at(mid);
        if p > power {
            lo = mid;
        } else {
            hi = mid;
        }
        if (power - power_at(hi)).abs() <= tol * power || hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let residual = (power - power_at(hi)).abs() / power;
    if residual > tol.max(1e-9) {
        return Err(Error::Bisection(format!("power residual {residual:e} after bisection")));
    }
    Ok((solve(hi), hi))
}

/// Sum-rate WMMSE with unit user weights, initialized from equal-power MRT.
pub fn wmmse(h: &[CVector], power: f64, noise: f64, opts: &WmmseOptions) -> Result<WmmseResult> {
    let k = h.len();
    if k == 0 {
        return Err(Error::InvalidParameter("no users".into()));
    }
    if !(power > 0.0 && noise > 0.0) {
        return Err(Error::InvalidParameter(format!("power {power}, noise {noise}")));
    }
    let m = h[0].len();
    let cols = h.iter().map(|hk| mrt(hk, power / k as f64)).collect::<Result<Vec<_>>>()?;
    let mut w = CMatrix::from_columns(&cols);
    check_dims(h, &w)?;
    let mut rates = vec![sum_rate(h, &w, noise)?];
    let mut state = WmmseState { chi: vec![Complex64::new(0.0, 0.0); k], kappa: vec![1.0; k], mu: 0.0 };
    let mut converged = false;
    for _ in 0..opts.max_iter {
        for (j, hk) in h.iter().enumerate() {
            let t: f64 = w.column_iter().map(|wi| hk.dotc(&wi).norm_sqr()).sum::<f64>() + noise;
            let s = hk.dotc(&w.column(j));
            state.chi[j] = s / t;
            state.kappa[j] = 1.0 / (1.0 - (state.chi[j].conj() * s).re);
        }
        let mut a = CMatrix::zeros(m, m);
        let mut b = CMatrix::zeros(m, k);
        for (j, hk) in h.iter().enumerate() {
            let wgt = state.chi[j].norm_sqr() * state.kappa[j];
            a += hk * hk.adjoint() * Complex64::new(wgt, 0.0);
            b.set_column(j, &(hk * (state.chi[j] * state.kappa[j])));
        }
        let a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
        let (next, mu) = power_constrained_solve(&a, &b, power, opts.power_tol)?;
        w = next;
        state.mu = mu;
        let r = sum_rate(h, &w, noise)?;
        let delta = r - rates.last().unwrap();
        rates.push(r);
        if delta.abs() < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(WmmseResult { precoder: Precoder { w, power_budget: power }, state, rates, converged })
}

/// Rate-maximizing precoder: MRT for one user, WMMSE otherwise.
pub fn best_precoder(h: &[CVector], power: f64, noise: f64, opts: &WmmseOptions) -> Result<Precoder> {
    if h.len() == 1 {
        let w = mrt(&h[0], power)?;
        return Ok(Precoder { w: CMatrix::from_columns(&[w]), power_budget: power });
    }
    Ok(wmmse(h, power, noise, opts)?.precoder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal, stream, SimRng};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_channels(k: usize, m: usize, rng: &mut SimRng) -> Vec<CVector> {
        (0..k).map(|_| CVector::from_fn(m, |_, _| complex_normal(rng, 1.0))).collect()
    }

    #[test]
    fn dbm_conversions() {
        assert_eq!(dbm_to_watts(30.0), 1.0);
        assert!((dbm_to_watts(-40.0) - 1e-7).abs() < 1e-22);
        assert!((watts_to_dbm(dbm_to_watts(17.3)) - 17.3).abs() < 1e-12);
    }

    #[test]
    fn mrt_examples() {
        let w = mrt(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]), 4.0).unwrap();
        assert_eq!(w, CVector::from_vec(vec![c(2.0, 0.0), c(0.0, 0.0)]));
        let w = mrt(&CVector::from_vec(vec![c(0.0, 1.0), c(0.0, 1.0)]), 2.0).unwrap();
        assert!((w - CVector::from_vec(vec![c(0.0, 1.0), c(0.0, 1.0)])).norm() < 1e-15);
        assert!(matches!(mrt(&CVector::zeros(3), 1.0), Err(Error::ZeroChannel)));
    }

    #[test]
    fn mrt_rate_is_snr_formula() {
        let mut rng = stream(1, "bf", &[]);
        let h = random_channels(1, 5, &mut rng);
        let w = CMatrix::from_columns(&[mrt(&h[0], 2.0).unwrap()]);
        let (g, r) = sinr_and_rate(&h, &w, 0.1).unwrap();
        let snr = 2.0 * h[0].norm_squared() / 0.1;
        assert!((g[0] - snr).abs() < 1e-10 * snr);
        assert!((r - (1.0 + snr).log2()).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_users_equal_split() {
        let g: f64 = 3.0;
        let h: Vec<CVector> = (0..3)
            .map(|k| CVector::from_fn(3, |i, _| if i == k { c(g.sqrt(), 0.0) } else { c(0.0, 0.0) }))
            .collect();
        let w = CMatrix::from_columns(&h.iter().map(|hk| mrt(hk, 6.0 / 3.0).unwrap()).collect::<Vec<_>>());
        let (gamma, _) = sinr_and_rate(&h, &w, 0.5).unwrap();
        for gk in gamma {
            assert!((gk - 2.0 * g / 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn sinr_matches_scalar_evaluation() {
        let mut rng = stream(2, "bf", &[]);
        let h = random_channels(3, 4, &mut rng);
        let w = CMatrix::from_fn(4, 3, |_, _| complex_normal(&mut rng, 0.2));
        let (gamma, rate) = sinr_and_rate(&h, &w, 0.3).unwrap();
        let mut want_rate = 0.0;
        for k in 0..3 {
            let mut sig = 0.0;
            let mut intf = 0.0;
            for i in 0..3 {
                let mut z = c(0.0, 0.0);
                for m in 0..4 {
                    z += h[k][m].conj() * w[(m, i)];
                }
                if i == k {
                    sig = z.norm_sqr();
                } else {
                    intf += z.norm_sqr();
                }
            }
            let g = sig / (intf + 0.3);
            assert!((gamma[k] - g).abs() < 1e-12 * g);
            want_rate += (1.0 + g).log2();
        }
        assert!((rate - want_rate).abs() < 1e-12);
    }

    #[test]
    fn single_user_wmmse_is_mrt() {
        let mut rng = stream(3, "bf", &[]);
        for _ in 0..10 {
            let h = random_channels(1, 6, &mut rng);
            let res = wmmse(&h, 1.0, 0.05, &WmmseOptions::default()).unwrap();
            let w = res.precoder.w.column(0).into_owned();
            let m = mrt(&h[0], 1.0).unwrap();
            let align = w.dotc(&m).norm() / (w.norm() * m.norm());
            assert!((align - 1.0).abs() < 1e-12);
            let (_, r_mrt) = sinr_and_rate(&h, &CMatrix::from_columns(&[m]), 0.05).unwrap();
            assert!((res.rate() - r_mrt).abs() < 1e-6);
        }
    }

    #[test]
    fn orthogonal_symmetric_instance() {
        let h: Vec<CVector> = (0..2)
            .map(|k| CVector::from_fn(4, |i, _| if i == k { c(0.0, 2.0) } else { c(0.0, 0.0) }))
            .collect();
        let res = wmmse(&h, 2.0, 0.1, &WmmseOptions::default()).unwrap();
        for (k, hk) in h.iter().enumerate() {
            let wk = res.precoder.w.column(k).into_owned();
            assert!((wk.norm_squared() - 1.0).abs() < 1e-9);
            assert!((wk.dotc(hk).norm() - wk.norm() * hk.norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn monotone_and_feasible_on_random_instances() {
        let mut rng = stream(4, "bf", &[]);
        for t in 0..50 {
            let k = 2 + t % 3;
            let h = random_channels(k, 4, &mut rng);
            let res = wmmse(&h, 1.0, 0.01 + 0.1 * (t % 5) as f64, &WmmseOptions::default()).unwrap();
            for pair in res.rates.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-9, "{:?}", res.rates);
            }
            assert!(res.precoder.is_feasible());
            if res.state.mu > 0.0 {
                assert!((res.precoder.power() - 1.0).abs() <= 1e-6);
            }
            assert!(res.state.kappa.iter().all(|k| *k >= 1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn sinr_scale_covariant(seed in 0u64..1000, scale in 0.01f64..100.0) {
            let mut rng = stream(seed, "scale", &[]);
            let h = random_channels(3, 3, &mut rng);
            let w = CMatrix::from_fn(3, 3, |_, _| complex_normal(&mut rng, 1.0));
            let (g1, _) = sinr_and_rate(&h, &w, 0.2).unwrap();
            let hs: Vec<CVector> = h.iter().map(|x| x * Complex64::new(scale, 0.0)).collect();
            let (g2, _) = sinr_and_rate(&hs, &w, 0.2 * scale * scale).unwrap();
            for (a, b) in g1.iter().zip(&g2) {
                prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12));
            }
        }
    }
}
