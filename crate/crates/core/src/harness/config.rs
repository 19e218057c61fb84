use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::Path;

use crate::beamforming::{dbm_to_watts, WmmseOptions};
use crate::channel::{NodeGeometry, PathCounts, Point, RadioContext, Regions, ScsiSampling};
use crate::de::DeParams;
use crate::error::{Error, Result};
use crate::multi_user::{InnerSolver, SscaParams};
use crate::sdp::{ExtractOptions, SdpOptions};

use super::scheme::SchemeId;

/// Physical system parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub carrier_hz: f64,
    /// BS antennas `M`.
    pub antennas: usize,
    pub irs_rows: usize,
    pub irs_cols: usize,
    pub users: usize,
    /// NLoS paths on every link.
    pub paths: usize,
    pub nlos_power_ratio: f64,
    pub tx_power_dbm: f64,
    pub noise_dbm: f64,
    /// Movement region aperture as a multiple of the ULA aperture.
    pub aperture_factor: f64,
    /// Half-width of the ψ and φ ranges, degrees.
    pub rotation_limit_deg: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 6e9,
            antennas: 10,
            irs_rows: 20,
            irs_cols: 10,
            users: 4,
            paths: 5,
            nlos_power_ratio: 1.0,
            tx_power_dbm: 30.0,
            noise_dbm: -40.0,
            aperture_factor: 3.0,
            rotation_limit_deg: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub bs: Point,
    pub irs: Point,
    pub user_center: Point,
    pub user_radius: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { bs: [1.0, 1.0, 0.0], irs: [0.0; 3], user_center: [4.0, -18.0, 0.0], user_radius: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub de: DeParams,
    pub ssca: SscaParams,
    /// Inner solver used by `proposed` and the restricted multi-user schemes.
    pub inner: InnerSolver,
    pub psi_grid: usize,
    pub phi_grid: usize,
    pub sdp_tol: f64,
    pub sdp_max_iter: usize,
    pub randomizations: usize,
    pub wmmse_tol: f64,
    pub wmmse_max_iter: usize,
    /// I-CSI draws behind every reported rate.
    pub test_samples: usize,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        let sdp = SdpOptions::default();
        let w = WmmseOptions::default();
        Self {
            de: DeParams::default(),
            ssca: SscaParams::default(),
            inner: InnerSolver::Scg,
            psi_grid: 61,
            phi_grid: 61,
            sdp_tol: sdp.tol,
            sdp_max_iter: sdp.max_iter,
            randomizations: ExtractOptions::default().randomizations,
            wmmse_tol: w.tol,
            wmmse_max_iter: w.max_iter,
            test_samples: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Transmit power, dBm.
    Power,
    /// IRS elements `N`; the row count is kept.
    Elements,
    /// NLoS paths per link.
    Paths,
    /// Aperture factor of the movement region.
    Aperture,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 4] = [SweepAxis::Power, SweepAxis::Elements, SweepAxis::Paths, SweepAxis::Aperture];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Power => "power",
            SweepAxis::Elements => "elements",
            SweepAxis::Paths => "paths",
            SweepAxis::Aperture => "aperture",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown sweep axis `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub points: Vec<f64>,
    pub schemes: Vec<SchemeId>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::Power,
            points: vec![20.0, 25.0, 30.0, 35.0, 40.0],
            schemes: vec![SchemeId::Proposed, SchemeId::SixdmaFirs, SchemeId::RirsOnly, SchemeId::FixedConfiguration],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Number of S-CSI realizations.
    pub seeds: usize,
    pub scheme: SchemeId,
    pub system: SystemConfig,
    pub geometry: GeometryConfig,
    pub algorithm: AlgorithmConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            seeds: 10,
            scheme: SchemeId::Proposed,
            system: SystemConfig::default(),
            geometry: GeometryConfig::default(),
            algorithm: AlgorithmConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reduced profile that runs on a laptop: M = 6, N = 8×4, K = 3, T_H = 20
    /// and a smaller DE budget.
    pub fn desk() -> Self {
        let mut c = Self::default();
        c.apply_desk();
        c
    }

    pub fn apply_desk(&mut self) {
        self.seeds = 10;
        self.system.antennas = 6;
        self.system.irs_rows = 8;
        self.system.irs_cols = 4;
        self.system.users = 3;
        self.algorithm.ssca.samples = 20;
        self.algorithm.de.population = 6;
        self.algorithm.de.generations = 6;
        self.algorithm.psi_grid = 31;
        self.algorithm.phi_grid = 31;
        self.algorithm.test_samples = 200;
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if s.antennas == 0 || s.irs_rows == 0 || s.irs_cols == 0 || s.users == 0 {
            return bad("antennas, IRS rows/cols and users must be positive");
        }
        if self.seeds == 0 {
            return bad("seeds must be positive");
        }
        if !(s.aperture_factor >= 1.0) {
            return bad("aperture_factor must be at least 1");
        }
        if !(s.rotation_limit_deg >= 0.0 && s.rotation_limit_deg < 90.0) {
            return bad("rotation_limit_deg must lie in [0, 90)");
        }
        if !(s.nlos_power_ratio >= 0.0) {
            return bad("nlos_power_ratio must be non-negative");
        }
        if self.algorithm.test_samples == 0 || self.algorithm.ssca.samples == 0 {
            return bad("sample counts must be positive");
        }
        self.algorithm.de.validate()?;
        RadioContext::from_carrier(s.carrier_hz)?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn radio(&self) -> Result<RadioContext> {
        RadioContext::from_carrier(self.system.carrier_hz)
    }

    pub fn power(&self) -> f64 {
        dbm_to_watts(self.system.tx_power_dbm)
    }

    pub fn noise(&self) -> f64 {
        dbm_to_watts(self.system.noise_dbm)
    }

    pub fn regions(&self, radio: &RadioContext) -> Regions {
        let s = &self.system;
        Regions::scaled_ula(s.antennas, radio, s.aperture_factor, s.rotation_limit_deg.to_radians())
    }

    pub fn sampling(&self) -> ScsiSampling {
        ScsiSampling {
            paths: PathCounts::uniform(self.system.paths),
            nlos_power_ratio: self.system.nlos_power_ratio,
            angle_range: (PI / 6.0, 5.0 * PI / 6.0),
        }
    }

    pub fn sdp(&self) -> SdpOptions {
        SdpOptions { tol: self.algorithm.sdp_tol, max_iter: self.algorithm.sdp_max_iter, ..Default::default() }
    }

    pub fn extract(&self) -> ExtractOptions {
        ExtractOptions { randomizations: self.algorithm.randomizations, ..Default::default() }
    }

    pub fn wmmse(&self) -> WmmseOptions {
        WmmseOptions { tol: self.algorithm.wmmse_tol, max_iter: self.algorithm.wmmse_max_iter, ..Default::default() }
    }

    /// Copy with one sweep coordinate replaced.
    pub fn at_point(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut c = self.clone();
        let s = &mut c.system;
        match axis {
            SweepAxis::Power => s.tx_power_dbm = value,
            SweepAxis::Aperture => s.aperture_factor = value,
            SweepAxis::Paths => s.paths = count(value, "paths")?,
            SweepAxis::Elements => {
                let n = count(value, "elements")?;
                if n == 0 || n % s.irs_rows != 0 {
                    return Err(Error::Config(format!("{n} elements do not fill {} rows", s.irs_rows)));
                }
                s.irs_cols = n / s.irs_rows;
            }
        }
        c.validate()?;
        Ok(c)
    }

    /// Node positions with users drawn in the disk.
    pub fn geometry<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<NodeGeometry> {
        let g = &self.geometry;
        NodeGeometry::with_random_users(g.bs, g.irs, g.user_center, g.user_radius, self.system.users, rng)
    }
}

fn count(value: f64, what: &str) -> Result<usize> {
    if value >= 0.0 && value.fract() == 0.0 && value < 1e9 {
        Ok(value as usize)
    } else {
        Err(Error::Config(format!("{what} must be a non-negative integer, got {value}")))
    }
}
