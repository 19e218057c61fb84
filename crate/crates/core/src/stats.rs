//! Closed-form expectations over the I-CSI given S-CSI.
//!
//! With `x = v*` the reflected-path expectation is the Hermitian form
//! `xᴴ·Ĝ·x`, and the full gain is `[x;1]ᴴ·H_eff·[x;1]`.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{
    receive_frv, ArraySurfaceConfig, CMatrix, CVector, IrsLayout, LinkStatistics, PathCoefficients, RadioContext,
    StatisticalCsi, Steering,
};
use crate::error::{Error, Result};

/// `M·(|β̃₀|² + Σσ̃²)`, the expected direct-link power.
pub fn direct_power_c1(bs_user: &LinkStatistics, m: usize) -> f64 {
    m as f64 * bs_user.total_power()
}

fn path_weights(s: &LinkStatistics) -> impl Iterator<Item = f64> + '_ {
    std::iter::once(s.los.norm_sqr()).chain(s.nlos_variances.iter().copied())
}

/// Ĝ from the IRS receive FRM (N×(L+1)) and the IRS→user FRM (N×(L̄+1)).
pub fn reflected_gain_from_frm(
    bs_irs: &LinkStatistics,
    irs_user: &LinkStatistics,
    irs_rx: &CMatrix,
    irs_user_frm: &CMatrix,
    m: usize,
) -> Result<CMatrix> {
    let n = irs_rx.nrows();
    if irs_user_frm.nrows() != n
        || irs_rx.ncols() != bs_irs.path_count() + 1
        || irs_user_frm.ncols() != irs_user.path_count() + 1
    {
        return Err(Error::Dimension(format!(
            "FRMs {}x{} / {}x{} vs {} and {} paths",
            irs_rx.nrows(),
            irs_rx.ncols(),
            irs_user_frm.nrows(),
            irs_user_frm.ncols(),
            bs_irs.path_count() + 1,
            irs_user.path_count() + 1
        )));
    }
    let scaled_cols = |frm: &CMatrix, w: Vec<f64>| {
        let mut out = frm.clone();
        for (mut col, w) in out.column_iter_mut().zip(w) {
            col *= Complex64::new(w, 0.0);
        }
        out
    };
    let xi: Vec<f64> = path_weights(bs_irs).map(|p| m as f64 * p).collect();
    let g_bar = scaled_cols(irs_rx, xi) * irs_rx.adjoint();
    // Σ_ℓ w_ℓ·conj(ā_ℓ)·ā_ℓᵀ, applied elementwise to Ḡ.
    let conj_frm = irs_user_frm.map(|c| c.conj());
    let s = scaled_cols(&conj_frm, path_weights(irs_user).collect()) * irs_user_frm.transpose();
    Ok(g_bar.component_mul(&s))
}

pub fn reflected_gain_matrix(
    radio: &RadioContext,
    bs_irs: &LinkStatistics,
    irs_user: &LinkStatistics,
    layout: &IrsLayout,
    phi: f64,
    m: usize,
) -> Result<CMatrix> {
    let arrivals = bs_irs.arrival.as_deref().ok_or_else(|| Error::Dimension("missing arrival angles".into()))?;
    let rx: Vec<CVector> = arrivals.iter().map(|a| receive_frv(radio, layout, phi, *a)).collect();
    let ur: Vec<CVector> =
        irs_user.departure.iter().map(|a| crate::channel::irs_user_frv(radio, layout, phi, *a)).collect();
    reflected_gain_from_frm(bs_irs, irs_user, &CMatrix::from_columns(&rx), &CMatrix::from_columns(&ur), m)
}

/// Closed-form ingredients of one user's expected channel gain.
#[derive(Debug, Clone)]
pub struct ExpectedGainTerms {
    pub c1: f64,
    /// Diagonal of Ξ.
    pub xi: Vec<f64>,
    pub g_hat: CMatrix,
    /// `β₀·conj(β̄₀)·β̃₀`.
    pub omega: Complex64,
    /// `conj(ā₀) ⊙ a_r,0`.
    pub a_hat_irs: CVector,
    /// `a_t,0ᴴ·ã₀`.
    pub a_hat_bs: Complex64,
}

impl ExpectedGainTerms {
    pub fn new(
        radio: &RadioContext,
        scsi: &StatisticalCsi,
        k: usize,
        config: &ArraySurfaceConfig,
        layout: &IrsLayout,
    ) -> Result<Self> {
        let st = Steering::new(radio, scsi, config, layout)?;
        Self::from_steering(scsi, &st, k)
    }

    pub fn all_users(
        radio: &RadioContext,
        scsi: &StatisticalCsi,
        config: &ArraySurfaceConfig,
        layout: &IrsLayout,
    ) -> Result<Vec<Self>> {
        let st = Steering::new(radio, scsi, config, layout)?;
        (0..scsi.num_users()).map(|k| Self::from_steering(scsi, &st, k)).collect()
    }

    pub fn from_steering(scsi: &StatisticalCsi, st: &Steering, k: usize) -> Result<Self> {
        if k >= scsi.num_users() {
            return Err(Error::Dimension(format!("user {k} of {}", scsi.num_users())));
        }
        let m = st.num_antennas();
        let (iu, bu) = (&scsi.irs_user[k], &scsi.bs_user[k]);
        let g_hat = reflected_gain_from_frm(&scsi.bs_irs, iu, &st.irs_rx, &st.irs_user[k], m)?;
        let a_bar0 = st.irs_user[k].column(0);
        let a_r0 = st.irs_rx.column(0);
        let a_hat_irs = CVector::from_iterator(a_r0.len(), a_bar0.iter().zip(a_r0.iter()).map(|(b, r)| b.conj() * r));
        let a_hat_bs = st.bs_tx.column(0).dotc(&st.bs_user[k].column(0));
        Ok(Self {
            c1: direct_power_c1(bu, m),
            xi: path_weights(&scsi.bs_irs).map(|p| m as f64 * p).collect(),
            g_hat,
            omega: scsi.bs_irs.los * iu.los.conj() * bu.los,
            a_hat_irs,
            a_hat_bs,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.a_hat_irs.len()
    }

    fn check(&self, v: &[Complex64]) -> Result<()> {
        if v.len() != self.num_elements() {
            return Err(Error::Dimension(format!("|v| = {} for N = {}", v.len(), self.num_elements())));
        }
        Ok(())
    }

    /// `vᵀ·Ĝ·v*`.
    pub fn reflected_power(&self, v: &[Complex64]) -> f64 {
        let x = CVector::from_iterator(v.len(), v.iter().map(|c| c.conj()));
        x.dotc(&(&self.g_hat * &x)).re
    }

    fn v_dot_a(&self, v: &[Complex64]) -> Complex64 {
        v.iter().zip(self.a_hat_irs.iter()).map(|(a, b)| a * b).sum()
    }

    /// `E‖h_k + g_k‖² = c₁ + vᵀĜv* + 2·Re{ω·â_bs·vᵀâ_irs}`.
    pub fn expected_gain(&self, v: &[Complex64]) -> Result<f64> {
        self.check(v)?;
        Ok(self.c1 + self.reflected_power(v) + 2.0 * (self.omega * self.a_hat_bs * self.v_dot_a(v)).re)
    }

    /// Same expectation with the cross term stripped of the phase of `ω·â_bs`.
    /// Depends on (q, ψ) only through `|â_bs|`.
    pub fn decoupled_gain(&self, v: &[Complex64]) -> Result<f64> {
        self.check(v)?;
        let cross = self.omega.norm() * self.a_hat_bs.norm() * self.v_dot_a(v).re;
        Ok(self.c1 + self.reflected_power(v) + 2.0 * cross)
    }

    /// Rotates `v` by `exp(-j·arg(ω·â_bs))`, mapping the decoupled value at
    /// `v` onto the true expectation at the result.
    pub fn compensate_phase(&self, v: &[Complex64]) -> Vec<Complex64> {
        let rot = Complex64::cis(-(self.omega * self.a_hat_bs).arg());
        v.iter().map(|c| c * rot).collect()
    }

    /// `b = ω·â_bs·â_irs`.
    pub fn cross_vector(&self) -> CVector {
        &self.a_hat_irs * (self.omega * self.a_hat_bs)
    }
}

/// Convenience wrapper over [`ExpectedGainTerms::expected_gain`].
pub fn expected_equivalent_gain(terms: &ExpectedGainTerms, v: &[Complex64]) -> Result<f64> {
    terms.expected_gain(v)
}

/// `[[Ĝ, b], [bᴴ, c₁]]`, acting on `[v*; 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGainMatrix(pub CMatrix);

impl EffectiveGainMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `xᴴ·H·x` with `x = [v*; 1]`.
    pub fn lifted_value(&self, v: &[Complex64]) -> f64 {
        let x = lift(v);
        x.dotc(&(&self.0 * &x)).re
    }

    /// Sum over users, for the sum-channel-gain objective.
    pub fn sum<'a>(items: impl IntoIterator<Item = &'a EffectiveGainMatrix>) -> Result<Self> {
        let mut it = items.into_iter();
        let first = it.next().ok_or_else(|| Error::InvalidParameter("empty sum".into()))?.0.clone();
        it.try_fold(first, |acc, h| {
            if h.0.shape() != acc.shape() {
                return Err(Error::Dimension("effective gain matrices differ in size".into()));
            }
            Ok(acc + &h.0)
        })
        .map(Self)
    }
}

pub fn lift(v: &[Complex64]) -> CVector {
    CVector::from_iterator(v.len() + 1, v.iter().map(|c| c.conj()).chain(std::iter::once(Complex64::new(1.0, 0.0))))
}

pub fn heff_matrix(terms: &ExpectedGainTerms) -> EffectiveGainMatrix {
    let n = terms.num_elements();
    let b = terms.cross_vector();
    let mut h = CMatrix::zeros(n + 1, n + 1);
    h.view_mut((0, 0), (n, n)).copy_from(&terms.g_hat);
    for i in 0..n {
        h[(i, n)] = b[i];
        h[(n, i)] = b[i].conj();
    }
    h[(n, n)] = Complex64::new(terms.c1, 0.0);
    // Ĝ is Hermitian up to rounding; make it exact.
    let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
    EffectiveGainMatrix(h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Self { mean, std_error: (var / n as f64).sqrt(), samples: n }
    }
}

/// Sample mean of `‖h_k + g_k‖²` over fresh I-CSI draws.
#[allow(clippy::too_many_arguments)]
pub fn mc_gain_oracle<R: Rng + ?Sized>(
    radio: &RadioContext,
    scsi: &StatisticalCsi,
    k: usize,
    config: &ArraySurfaceConfig,
    layout: &IrsLayout,
    v: &[Complex64],
    n_samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples = 0".into()));
    }
    let st = Steering::new(radio, scsi, config, layout)?;
    let xs = (0..n_samples)
        .map(|_| {
            let ch = st.channels(PathCoefficients::draw(scsi, rng))?;
            Ok(ch.effective(k, v)?.norm_squared())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_samples(&xs))
}
