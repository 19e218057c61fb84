use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{
    bs_user_frv, distance, effective_channel, irs_user_frv, receive_frv, transmit_frv, ArraySurfaceConfig, CMatrix,
    CVector, IrsLayout, LinkStatistics, NodeGeometry, RadioContext, StatisticalCsi,
};
use crate::error::{Error, Result};
use crate::rng::complex_normal;

/// Number of NLoS paths per link type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathCounts {
    pub bs_irs: usize,
    pub irs_user: usize,
    pub bs_user: usize,
}

impl PathCounts {
    pub fn uniform(l: usize) -> Self {
        Self { bs_irs: l, irs_user: l, bs_user: l }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScsiSampling {
    pub paths: PathCounts,
    /// Total NLoS power relative to the LoS power, split evenly over the paths.
    pub nlos_power_ratio: f64,
    pub angle_range: (f64, f64),
}

impl Default for ScsiSampling {
    fn default() -> Self {
        Self { paths: PathCounts::uniform(5), nlos_power_ratio: 1.0, angle_range: (PI / 6.0, 5.0 * PI / 6.0) }
    }
}

fn draw_angles<R: Rng + ?Sized>(n: usize, range: (f64, f64), rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| range.0 + (range.1 - range.0) * rng.random::<f64>()).collect()
}

#[allow(clippy::too_many_arguments)]
fn link<R: Rng + ?Sized>(
    radio: &RadioContext,
    from: &super::Point,
    to: &super::Point,
    paths: usize,
    sampling: &ScsiSampling,
    with_arrival: bool,
    name: &'static str,
    rng: &mut R,
) -> Result<LinkStatistics> {
    let r = distance(from, to);
    if r <= 0.0 {
        return Err(Error::CoincidentNodes(name));
    }
    let los = radio.los_coefficient(r);
    let departure = draw_angles(paths + 1, sampling.angle_range, rng);
    let arrival = with_arrival.then(|| draw_angles(paths + 1, sampling.angle_range, rng));
    let var = if paths == 0 { 0.0 } else { sampling.nlos_power_ratio * los.norm_sqr() / paths as f64 };
    Ok(LinkStatistics { departure, arrival, los, nlos_variances: vec![var; paths] })
}

/// Draws angles for every link and fixes LoS coefficients from the node distances.
pub fn sample_scsi<R: Rng + ?Sized>(
    radio: &RadioContext,
    geometry: &NodeGeometry,
    sampling: &ScsiSampling,
    rng: &mut R,
) -> Result<StatisticalCsi> {
    if geometry.users.is_empty() {
        return Err(Error::InvalidParameter("no users".into()));
    }
    if !(sampling.nlos_power_ratio >= 0.0) {
        return Err(Error::InvalidParameter(format!("nlos_power_ratio {}", sampling.nlos_power_ratio)));
    }
    let p = sampling.paths;
    let bs_irs = link(radio, &geometry.bs, &geometry.irs, p.bs_irs, sampling, true, "bs-irs", rng)?;
    let mut irs_user = Vec::with_capacity(geometry.users.len());
    let mut bs_user = Vec::with_capacity(geometry.users.len());
    for u in &geometry.users {
        irs_user.push(link(radio, &geometry.irs, u, p.irs_user, sampling, false, "irs-user", rng)?);
        bs_user.push(link(radio, &geometry.bs, u, p.bs_user, sampling, false, "bs-user", rng)?);
    }
    Ok(StatisticalCsi { bs_irs, irs_user, bs_user })
}

/// Field-response matrices for one configuration. Column ℓ holds path ℓ.
#[derive(Debug, Clone)]
pub struct Steering {
    /// `a_t,ℓ`, M×(L+1).
    pub bs_tx: CMatrix,
    /// `a_r,ℓ`, N×(L+1).
    pub irs_rx: CMatrix,
    pub irs_user: Vec<CMatrix>,
    pub bs_user: Vec<CMatrix>,
}

fn stack(rows: usize, cols: impl Iterator<Item = CVector>) -> CMatrix {
    let cols: Vec<CVector> = cols.collect();
    if cols.is_empty() {
        return CMatrix::zeros(rows, 0);
    }
    CMatrix::from_columns(&cols)
}

impl Steering {
    pub fn new(
        radio: &RadioContext,
        scsi: &StatisticalCsi,
        config: &ArraySurfaceConfig,
        layout: &IrsLayout,
    ) -> Result<Self> {
        scsi.validate()?;
        let (m, n) = (config.num_antennas(), layout.len());
        if m == 0 || n == 0 {
            return Err(Error::Dimension(format!("M = {m}, N = {n}")));
        }
        let q = &config.positions;
        let bs_tx = stack(m, scsi.bs_irs.departure.iter().map(|a| transmit_frv(radio, q, config.psi, *a)));
        let irs_rx = stack(n, scsi.bs_irs_arrivals().iter().map(|a| receive_frv(radio, layout, config.phi, *a)));
        let irs_user = scsi
            .irs_user
            .iter()
            .map(|s| stack(n, s.departure.iter().map(|a| irs_user_frv(radio, layout, config.phi, *a))))
            .collect();
        let bs_user = scsi
            .bs_user
            .iter()
            .map(|s| stack(m, s.departure.iter().map(|a| bs_user_frv(radio, q, config.psi, *a))))
            .collect();
        Ok(Self { bs_tx, irs_rx, irs_user, bs_user })
    }

    pub fn num_antennas(&self) -> usize {
        self.bs_tx.nrows()
    }

    pub fn num_elements(&self) -> usize {
        self.irs_rx.nrows()
    }

    pub fn channels(&self, coefficients: PathCoefficients) -> Result<InstantaneousChannels> {
        let c = &coefficients;
        if c.bs_irs.len() != self.bs_tx.ncols()
            || c.irs_user.len() != self.irs_user.len()
            || c.bs_user.len() != self.bs_user.len()
        {
            return Err(Error::Dimension("path coefficients do not match steering".into()));
        }
        let scaled = DMatrix::from_fn(self.irs_rx.nrows(), self.irs_rx.ncols(), |i, l| self.irs_rx[(i, l)] * c.bs_irs[l]);
        let g = scaled * self.bs_tx.adjoint();
        let r = self
            .irs_user
            .iter()
            .zip(&c.irs_user)
            .map(|(a, b)| a * CVector::from_column_slice(b))
            .collect();
        let h = self
            .bs_user
            .iter()
            .zip(&c.bs_user)
            .map(|(a, b)| a * CVector::from_column_slice(b))
            .collect();
        Ok(InstantaneousChannels { g, r, h, coefficients })
    }
}

/// One draw of every path coefficient. Index 0 is the deterministic LoS term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCoefficients {
    pub bs_irs: Vec<Complex64>,
    pub irs_user: Vec<Vec<Complex64>>,
    pub bs_user: Vec<Vec<Complex64>>,
}

fn draw_link<R: Rng + ?Sized>(s: &LinkStatistics, rng: &mut R) -> Vec<Complex64> {
    std::iter::once(s.los).chain(s.nlos_variances.iter().map(|v| complex_normal(rng, *v))).collect()
}

impl PathCoefficients {
    pub fn draw<R: Rng + ?Sized>(scsi: &StatisticalCsi, rng: &mut R) -> Self {
        let bs_irs = draw_link(&scsi.bs_irs, rng);
        let mut irs_user = Vec::with_capacity(scsi.num_users());
        let mut bs_user = Vec::with_capacity(scsi.num_users());
        for (a, b) in scsi.irs_user.iter().zip(&scsi.bs_user) {
            irs_user.push(draw_link(a, rng));
            bs_user.push(draw_link(b, rng));
        }
        Self { bs_irs, irs_user, bs_user }
    }
}

/// One I-CSI realization: `G` (N×M), `r_k` (N) and `h_k` (M).
#[derive(Debug, Clone)]
pub struct InstantaneousChannels {
    pub g: CMatrix,
    pub r: Vec<CVector>,
    pub h: Vec<CVector>,
    pub coefficients: PathCoefficients,
}

impl InstantaneousChannels {
    pub fn num_users(&self) -> usize {
        self.h.len()
    }

    pub fn effective(&self, k: usize, v: &[Complex64]) -> Result<CVector> {
        effective_channel(&self.h[k], &self.r[k], &self.g, v)
    }

    pub fn effective_all(&self, v: &[Complex64]) -> Result<Vec<CVector>> {
        (0..self.num_users()).map(|k| self.effective(k, v)).collect()
    }
}

pub fn sample_icsi<R: Rng + ?Sized>(
    radio: &RadioContext,
    scsi: &StatisticalCsi,
    config: &ArraySurfaceConfig,
    layout: &IrsLayout,
    rng: &mut R,
) -> Result<InstantaneousChannels> {
    Steering::new(radio, scsi, config, layout)?.channels(PathCoefficients::draw(scsi, rng))
}
