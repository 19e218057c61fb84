//! Field-response channel model for the BS→IRS, IRS→user and BS→user links.
//!
//! All geometry is one-dimensional: the BS array is a line of movable
//! elements at offsets `q` that can be rotated by `psi`, and the IRS response
//! depends only on each element's x-coordinate and the surface rotation `phi`.

mod sample;

pub use sample::{
    sample_icsi, sample_scsi, InstantaneousChannels, PathCoefficients, PathCounts, ScsiSampling, Steering,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Carrier wavelength and the derived minimum antenna spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioContext {
    carrier_hz: f64,
    wavelength: f64,
}

impl RadioContext {
    pub fn from_carrier(carrier_hz: f64) -> Result<Self> {
        if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
            return Err(Error::InvalidParameter(format!("carrier frequency {carrier_hz}")));
        }
        Ok(Self { carrier_hz, wavelength: SPEED_OF_LIGHT / carrier_hz })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    /// Minimum spacing between BS antennas, half a wavelength.
    pub fn min_spacing(&self) -> f64 {
        self.wavelength / 2.0
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Free-space LoS coefficient `λ/(4πr)·exp(-j2πr/λ)`.
    pub fn los_coefficient(&self, distance: f64) -> Complex64 {
        let mag = self.wavelength / (4.0 * PI * distance);
        Complex64::from_polar(mag, -self.wavenumber() * distance)
    }
}

pub type Point = [f64; 3];

pub fn distance(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Node positions of one deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeGeometry {
    pub bs: Point,
    pub irs: Point,
    pub user_center: Point,
    pub user_radius: f64,
    pub users: Vec<Point>,
}

impl NodeGeometry {
    pub fn new(bs: Point, irs: Point, user_center: Point, user_radius: f64, users: Vec<Point>) -> Result<Self> {
        if user_radius < 0.0 {
            return Err(Error::InvalidParameter(format!("user radius {user_radius}")));
        }
        for (k, u) in users.iter().enumerate() {
            if distance(u, &user_center) > user_radius * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter(format!("user {k} outside the user disk")));
            }
        }
        Ok(Self { bs, irs, user_center, user_radius, users })
    }

    /// Places `k` users uniformly in the horizontal disk.
    pub fn with_random_users<R: rand::Rng + ?Sized>(
        bs: Point,
        irs: Point,
        user_center: Point,
        user_radius: f64,
        k: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let users = (0..k)
            .map(|_| {
                let r = user_radius * rng.random::<f64>().sqrt();
                let t = 2.0 * PI * rng.random::<f64>();
                [user_center[0] + r * t.cos(), user_center[1] + r * t.sin(), user_center[2]]
            })
            .collect();
        Self::new(bs, irs, user_center, user_radius, users)
    }
}

/// Statistics of one multipath link. Index 0 of every angle array is the LoS path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkStatistics {
    /// Departure angles (radians), `L + 1` entries.
    pub departure: Vec<f64>,
    /// Arrival angles at the IRS; only the BS→IRS link carries them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival: Option<Vec<f64>>,
    pub los: Complex64,
    /// Variances of the `L` NLoS coefficients.
    pub nlos_variances: Vec<f64>,
}

impl LinkStatistics {
    pub fn path_count(&self) -> usize {
        self.nlos_variances.len()
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let paths = self.path_count() + 1;
        if self.departure.len() != paths {
            return Err(Error::Dimension(format!("{name}: {} departure angles for {paths} paths", self.departure.len())));
        }
        if let Some(a) = &self.arrival {
            if a.len() != paths {
                return Err(Error::Dimension(format!("{name}: {} arrival angles for {paths} paths", a.len())));
            }
        }
        if self.nlos_variances.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("{name}: negative NLoS variance")));
        }
        Ok(())
    }

    /// `|β₀|² + Σ σ_ℓ²`, the mean power carried by the link per unit array gain.
    pub fn total_power(&self) -> f64 {
        self.los.norm_sqr() + self.nlos_variances.iter().sum::<f64>()
    }
}

/// Statistical CSI of every link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticalCsi {
    pub bs_irs: LinkStatistics,
    pub irs_user: Vec<LinkStatistics>,
    pub bs_user: Vec<LinkStatistics>,
}

impl StatisticalCsi {
    pub fn num_users(&self) -> usize {
        self.irs_user.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.irs_user.is_empty() || self.irs_user.len() != self.bs_user.len() {
            return Err(Error::Dimension(format!(
                "{} IRS-user links vs {} BS-user links",
                self.irs_user.len(),
                self.bs_user.len()
            )));
        }
        self.bs_irs.validate("bs_irs")?;
        if self.bs_irs.arrival.is_none() {
            return Err(Error::Dimension("bs_irs: missing arrival angles".into()));
        }
        for (k, (a, b)) in self.irs_user.iter().zip(&self.bs_user).enumerate() {
            a.validate(&format!("irs_user[{k}]"))?;
            b.validate(&format!("bs_user[{k}]"))?;
        }
        Ok(())
    }

    pub fn bs_irs_arrivals(&self) -> &[f64] {
        self.bs_irs.arrival.as_deref().unwrap_or(&[])
    }
}

/// Allowed movement and rotation ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regions {
    pub q_min: f64,
    pub q_max: f64,
    pub psi: (f64, f64),
    pub phi: (f64, f64),
}

impl Regions {
    pub fn aperture(&self) -> f64 {
        self.q_max - self.q_min
    }

    /// Movement region `[-a·D_ULA/2, a·D_ULA/2]` with `D_ULA = (M-1)d` and
    /// symmetric rotation ranges `[-max_rot, max_rot]`.
    pub fn scaled_ula(m: usize, radio: &RadioContext, aperture_factor: f64, max_rot: f64) -> Self {
        let half = aperture_factor * (m.saturating_sub(1)) as f64 * radio.min_spacing() / 2.0;
        Self { q_min: -half, q_max: half, psi: (-max_rot, max_rot), phi: (-max_rot, max_rot) }
    }
}

/// BS positions/rotation and IRS rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArraySurfaceConfig {
    pub positions: Vec<f64>,
    pub psi: f64,
    pub phi: f64,
    pub regions: Regions,
}

/// Absolute slack when checking the minimum-spacing constraint.
pub const SPACING_SLACK: f64 = 1e-12;

impl ArraySurfaceConfig {
    pub fn num_antennas(&self) -> usize {
        self.positions.len()
    }

    /// Centered half-wavelength ULA with zero rotations.
    pub fn centered_ula(m: usize, radio: &RadioContext, regions: Regions) -> Self {
        let d = radio.min_spacing();
        let c = (m as f64 - 1.0) / 2.0;
        Self { positions: (0..m).map(|i| (i as f64 - c) * d).collect(), psi: 0.0, phi: 0.0, regions }
    }

    /// Checks movement region, minimum spacing and rotation ranges.
    pub fn check(&self, radio: &RadioContext) -> Result<()> {
        let r = &self.regions;
        if let Some(q) = self.positions.iter().find(|q| !(**q >= r.q_min && **q <= r.q_max)) {
            return Err(Error::Infeasible(format!("position {q} outside [{}, {}]", r.q_min, r.q_max)));
        }
        let d = radio.min_spacing();
        for i in 0..self.positions.len() {
            for j in i + 1..self.positions.len() {
                let gap = (self.positions[i] - self.positions[j]).abs();
                if gap < d - SPACING_SLACK {
                    return Err(Error::Infeasible(format!("antennas {i},{j} only {gap} m apart (< {d})")));
                }
            }
        }
        if !(self.psi >= r.psi.0 && self.psi <= r.psi.1) {
            return Err(Error::Infeasible(format!("psi {} outside range", self.psi)));
        }
        if !(self.phi >= r.phi.0 && self.phi <= r.phi.1) {
            return Err(Error::Infeasible(format!("phi {} outside range", self.phi)));
        }
        Ok(())
    }
}

/// Planar IRS whose response depends on the element x-coordinates only.
/// Element `n = row·cols + col` sits at `x = (col - (cols-1)/2)·spacing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrsLayout {
    pub rows: usize,
    pub cols: usize,
    pub x: Vec<f64>,
}

impl IrsLayout {
    pub fn grid(rows: usize, cols: usize, spacing: f64) -> Self {
        let c0 = (cols as f64 - 1.0) / 2.0;
        let x = (0..rows).flat_map(|_| (0..cols).map(move |c| (c as f64 - c0) * spacing)).collect();
        Self { rows, cols, x }
    }

    /// Layout from explicit coordinates, one row.
    pub fn from_coordinates(x: Vec<f64>) -> Self {
        Self { rows: 1, cols: x.len(), x }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

fn phase_vector(coords: &[f64], phase_per_meter: f64) -> CVector {
    CVector::from_iterator(coords.len(), coords.iter().map(|c| Complex64::cis(phase_per_meter * c)))
}

/// BS transmit FRV toward the IRS: `exp(+j·k·q_m·cos(aod + ψ))`.
pub fn transmit_frv(radio: &RadioContext, q: &[f64], psi: f64, aod: f64) -> CVector {
    phase_vector(q, radio.wavenumber() * (aod + psi).cos())
}

/// IRS receive FRV: `exp(+j·k·x_n·cos(aoa − φ))`.
pub fn receive_frv(radio: &RadioContext, layout: &IrsLayout, phi: f64, aoa: f64) -> CVector {
    phase_vector(&layout.x, radio.wavenumber() * (aoa - phi).cos())
}

/// IRS→user FRV: `exp(−j·k·x_n·cos(aod + φ))`.
pub fn irs_user_frv(radio: &RadioContext, layout: &IrsLayout, phi: f64, aod: f64) -> CVector {
    phase_vector(&layout.x, -radio.wavenumber() * (aod + phi).cos())
}

/// BS→user FRV: `exp(−j·k·q_m·cos(aod − ψ))`.
pub fn bs_user_frv(radio: &RadioContext, q: &[f64], psi: f64, aod: f64) -> CVector {
    phase_vector(q, -radio.wavenumber() * (aod - psi).cos())
}

/// Unit-modulus IRS reflection coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionVector(pub Vec<Complex64>);

impl ReflectionVector {
    pub fn ones(n: usize) -> Self {
        Self(vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn from_phases(phases: &[f64]) -> Self {
        Self(phases.iter().map(|t| Complex64::cis(*t)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_vector(&self) -> CVector {
        CVector::from_column_slice(&self.0)
    }

    pub fn phases(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.arg()).collect()
    }

    /// Projects every entry onto the unit circle; zero entries become 1.
    pub fn unit_modulus(values: impl IntoIterator<Item = Complex64>) -> Self {
        Self(
            values
                .into_iter()
                .map(|c| {
                    let m = c.norm();
                    if m > 0.0 {
                        c / m
                    } else {
                        Complex64::new(1.0, 0.0)
                    }
                })
                .collect(),
        )
    }
}

/// Effective downlink channel `h + Gᴴ·diag(v)ᴴ·r`, i.e. the conjugate
/// transpose of the row `hᴴ + rᴴ·diag(v)·G`.
pub fn effective_channel(h: &CVector, r: &CVector, g: &CMatrix, v: &[Complex64]) -> Result<CVector> {
    let (n, m) = g.shape();
    if h.len() != m || r.len() != n || v.len() != n {
        return Err(Error::Dimension(format!(
            "effective channel: G is {n}x{m}, |h| = {}, |r| = {}, |v| = {}",
            h.len(),
            r.len(),
            v.len()
        )));
    }
    let weighted = CVector::from_iterator(n, r.iter().zip(v).map(|(ri, vi)| vi.conj() * ri));
    Ok(h + g.ad_mul(&weighted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::assert_close;

    mod approx_eq {
        macro_rules! assert_close {
            ($a:expr, $b:expr, $tol:expr) => {{
                let (a, b): (Complex64, Complex64) = ($a, $b);
                assert!((a - b).norm() < $tol, "{a} != {b}");
            }};
        }
        pub(crate) use assert_close;
    }

    fn radio() -> RadioContext {
        RadioContext::from_carrier(6e9).unwrap()
    }

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn wavelength_and_spacing() {
        let r = radio();
        assert!((r.wavelength() - 0.05).abs() < 1e-15);
        assert_eq!(r.min_spacing(), r.wavelength() / 2.0);
    }

    #[test]
    fn transmit_frv_cases() {
        let r = radio();
        let lam = r.wavelength();
        for v in transmit_frv(&r, &[0.0; 4], 0.3, 1.1).iter() {
            assert_close!(*v, one(), 1e-15);
        }
        let a = transmit_frv(&r, &[0.0, lam / 2.0], 0.0, PI / 2.0);
        assert_close!(a[1], one(), 1e-12);
        let a = transmit_frv(&r, &[0.0, lam / 2.0], 0.0, 0.0);
        assert_close!(a[1], -one(), 1e-12);
    }

    #[test]
    fn receive_and_irs_user_frv_cases() {
        let r = radio();
        let lam = r.wavelength();
        let zero = IrsLayout::from_coordinates(vec![0.0; 3]);
        assert!(receive_frv(&r, &zero, 0.2, 0.9).iter().all(|v| (v - one()).norm() < 1e-15));
        assert!(irs_user_frv(&r, &zero, 0.2, 0.9).iter().all(|v| (v - one()).norm() < 1e-15));

        let lay = IrsLayout::from_coordinates(vec![0.0, 0.013, 0.04]);
        let aligned = receive_frv(&r, &lay, 0.4, 0.4);
        for (x, v) in lay.x.iter().zip(aligned.iter()) {
            assert_close!(*v, Complex64::cis(r.wavenumber() * x), 1e-12);
        }
        // cos(aod + φ) = 1 when aod = -φ, conjugate sign
        let u = irs_user_frv(&r, &lay, 0.4, -0.4);
        for (x, v) in lay.x.iter().zip(u.iter()) {
            assert_close!(*v, Complex64::cis(-r.wavenumber() * x), 1e-12);
        }

        let half = IrsLayout::from_coordinates(vec![0.0, lam / 2.0]);
        assert_close!(receive_frv(&r, &half, 0.0, PI)[1], -one(), 1e-12);
        assert_close!(irs_user_frv(&r, &half, 0.0, PI)[1], -one(), 1e-12);
    }

    #[test]
    fn bs_user_frv_cases() {
        let r = radio();
        let lam = r.wavelength();
        assert!(bs_user_frv(&r, &[0.0; 3], 0.5, 0.1).iter().all(|v| (v - one()).norm() < 1e-15));
        assert_close!(bs_user_frv(&r, &[0.0, lam / 2.0], 0.0, PI / 2.0)[1], one(), 1e-12);
        assert_close!(bs_user_frv(&r, &[0.0, lam / 2.0], 0.0, 0.0)[1], -one(), 1e-12);
    }

    #[test]
    fn ula_is_feasible_and_centered() {
        let r = radio();
        let regions = Regions::scaled_ula(5, &r, 3.0, PI / 6.0);
        let cfg = ArraySurfaceConfig::centered_ula(5, &r, regions);
        cfg.check(&r).unwrap();
        assert!((cfg.positions.iter().sum::<f64>()).abs() < 1e-15);
        let mut bad = cfg.clone();
        bad.positions[1] = bad.positions[0] + r.min_spacing() / 2.0;
        assert!(matches!(bad.check(&r), Err(Error::Infeasible(_))));
    }

    #[test]
    fn grid_layout_duplicates_columns() {
        let lay = IrsLayout::grid(3, 4, 0.025);
        assert_eq!(lay.len(), 12);
        assert_eq!(lay.x[1], lay.x[5]);
        assert!((lay.x[1] - lay.x[0] - 0.025).abs() < 1e-15);
    }

    #[test]
    fn effective_channel_reduces_to_direct() {
        let h = CVector::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.1)]);
        let g = CMatrix::from_fn(3, 2, |i, j| Complex64::new(i as f64, j as f64 + 1.0));
        let v = vec![Complex64::cis(0.3); 3];
        let zero_r = CVector::zeros(3);
        assert_eq!(effective_channel(&h, &zero_r, &g, &v).unwrap(), h);
        let r = CVector::from_element(3, Complex64::new(0.2, -0.7));
        assert_eq!(effective_channel(&h, &r, &CMatrix::zeros(3, 2), &v).unwrap(), h);
        assert!(effective_channel(&h, &r, &g, &v[..2]).is_err());
    }

    #[test]
    fn effective_channel_matches_row_form() {
        let mut rng = crate::rng::stream(3, "eff", &[]);
        let c = |rng: &mut crate::rng::SimRng| crate::rng::complex_normal(rng, 1.0);
        let g = CMatrix::from_fn(2, 2, |_, _| c(&mut rng));
        let h = CVector::from_fn(2, |_, _| c(&mut rng));
        let r = CVector::from_fn(2, |_, _| c(&mut rng));
        let v = vec![Complex64::cis(0.7), Complex64::cis(-2.0)];
        // row = hᴴ + rᴴ Θ G, evaluated entry by entry
        for j in 0..2 {
            let mut row = h[j].conj();
            for i in 0..2 {
                row += r[i].conj() * v[i] * g[(i, j)];
            }
            let got = effective_channel(&h, &r, &g, &v).unwrap()[j];
            assert_close!(got, row.conj(), 1e-12);
        }
    }
}
