use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    sample_scsi, ArraySurfaceConfig, IrsLayout, NodeGeometry, RadioContext, ReflectionVector, Regions, StatisticalCsi,
    Steering,
};
use crate::error::{Error, Result};
use crate::multi_user::{
    average_sum_rate, extended_de, outer_bounds, run_inner, InnerContext, InnerSolver, RateContext, SscaTracePoint,
};
use crate::rng::stream;
use crate::single_user::{
    bs_alignment, search_phi, search_psi, single_user_pipeline, solve_p31, solve_p32, uniform_grid, LinkAngles,
    SingleUserOptions,
};
use crate::stats::{ExpectedGainTerms, McEstimate};

use super::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    Proposed,
    FixedConfiguration,
    SixdmaFirs,
    RirsOnly,
    RotatableFirs,
    PositionableFirs,
    DeSsca,
    LowComplexity,
}

/// Which long-timescale variables a scheme optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Freedom {
    pub positions: bool,
    pub bs_rotation: bool,
    pub irs_rotation: bool,
}

impl SchemeId {
    pub const ALL: [SchemeId; 8] = [
        SchemeId::Proposed,
        SchemeId::FixedConfiguration,
        SchemeId::SixdmaFirs,
        SchemeId::RirsOnly,
        SchemeId::RotatableFirs,
        SchemeId::PositionableFirs,
        SchemeId::DeSsca,
        SchemeId::LowComplexity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::Proposed => "proposed",
            SchemeId::FixedConfiguration => "fixed_configuration",
            SchemeId::SixdmaFirs => "sixdma_firs",
            SchemeId::RirsOnly => "rirs_only",
            SchemeId::RotatableFirs => "rotatable_firs",
            SchemeId::PositionableFirs => "positionable_firs",
            SchemeId::DeSsca => "de_ssca",
            SchemeId::LowComplexity => "low_complexity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}`")))
    }

    pub fn freedom(self) -> Freedom {
        let f = |positions, bs_rotation, irs_rotation| Freedom { positions, bs_rotation, irs_rotation };
        match self {
            SchemeId::Proposed | SchemeId::DeSsca | SchemeId::LowComplexity => f(true, true, true),
            SchemeId::FixedConfiguration => f(false, false, false),
            SchemeId::SixdmaFirs => f(true, true, false),
            SchemeId::RirsOnly => f(false, false, true),
            SchemeId::RotatableFirs => f(false, true, false),
            SchemeId::PositionableFirs => f(true, false, false),
        }
    }

    /// Inner solver for the multi-user pipeline.
    pub fn inner(self, default: InnerSolver) -> InnerSolver {
        match self {
            SchemeId::DeSsca => InnerSolver::Ssca,
            SchemeId::LowComplexity => InnerSolver::Scg,
            _ => default,
        }
    }

    /// Regions with the pinned rotations collapsed to zero.
    pub fn restrict(self, regions: &Regions) -> Regions {
        let f = self.freedom();
        Regions {
            psi: if f.bs_rotation { regions.psi } else { (0.0, 0.0) },
            phi: if f.irs_rotation { regions.phi } else { (0.0, 0.0) },
            ..*regions
        }
    }
}

impl std::fmt::Display for SchemeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One S-CSI realization and everything derived from the configuration.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub index: u64,
    pub radio: RadioContext,
    pub geometry: NodeGeometry,
    pub scsi: StatisticalCsi,
    pub layout: IrsLayout,
    pub regions: Regions,
    pub antennas: usize,
    pub rate: RateContext,
}

impl Scenario {
    /// Realization `index` of the configuration; users and S-CSI come from
    /// the stream `(seed, "scenario", index)`.
    pub fn build(cfg: &ExperimentConfig, index: u64) -> Result<Self> {
        let radio = cfg.radio()?;
        let mut rng = stream(cfg.seed, "scenario", &[index]);
        let geometry = cfg.geometry(&mut rng)?;
        let scsi = sample_scsi(&radio, &geometry, &cfg.sampling(), &mut rng)?;
        Ok(Self {
            index,
            layout: IrsLayout::grid(cfg.system.irs_rows, cfg.system.irs_cols, radio.min_spacing()),
            regions: cfg.regions(&radio),
            antennas: cfg.system.antennas,
            rate: RateContext { power: cfg.power(), noise: cfg.noise(), wmmse: cfg.wmmse() },
            radio,
            geometry,
            scsi,
        })
    }

    pub fn fixed_config(&self) -> ArraySurfaceConfig {
        ArraySurfaceConfig::centered_ula(self.antennas, &self.radio, self.regions)
    }

    pub fn inner_context(&self, cfg: &ExperimentConfig, seed: u64) -> InnerContext<'_> {
        InnerContext {
            radio: &self.radio,
            scsi: &self.scsi,
            layout: &self.layout,
            rate: self.rate,
            ssca: cfg.algorithm.ssca,
            sdp: cfg.sdp(),
            extract: cfg.extract(),
            seed,
        }
    }

    /// Average sum rate on the test batch, a stream no optimizer touches.
    pub fn test_rate(&self, cfg: &ExperimentConfig, config: &ArraySurfaceConfig, v: &ReflectionVector) -> Result<McEstimate> {
        let st = Steering::new(&self.radio, &self.scsi, config, &self.layout)?;
        average_sum_rate(&st, &self.scsi, &v.0, &self.rate, cfg.algorithm.test_samples, cfg.seed, "test-batch", &[self.index])
    }
}

/// Optimization traces kept for the convergence output.
#[derive(Debug, Clone, Default)]
pub struct Traces {
    /// Best DE fitness per generation.
    pub de: Vec<f64>,
    pub ssca: Vec<SscaTracePoint>,
}

#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub scheme: SchemeId,
    pub config: ArraySurfaceConfig,
    pub v: ReflectionVector,
    /// Value of the objective the optimizer maximized.
    pub objective: f64,
    pub rate: McEstimate,
    pub converged: bool,
    pub traces: Traces,
}

/// Seed of every optimizer stream for realization `index`.
pub fn optimization_seed(cfg: &ExperimentConfig, index: u64) -> u64 {
    stream(cfg.seed, "optimize", &[index]).random()
}

/// Optimizes the scheme's variables on one scenario and evaluates the
/// result on the test batch.
pub fn run_scheme(cfg: &ExperimentConfig, scheme: SchemeId, scenario: &Scenario) -> Result<SchemeOutcome> {
    let opt_seed = optimization_seed(cfg, scenario.index);
    let multi = scenario.scsi.num_users() > 1 || matches!(scheme, SchemeId::DeSsca | SchemeId::LowComplexity);
    let (config, v, objective, converged, traces) = if multi {
        multi_user_scheme(cfg, scheme, scenario, opt_seed)?
    } else {
        single_user_scheme(cfg, scheme, scenario, opt_seed)?
    };
    config.check(&scenario.radio)?;
    let rate = scenario.test_rate(cfg, &config, &v)?;
    Ok(SchemeOutcome { scheme, config, v, objective, rate, converged, traces })
}

type Optimized = (ArraySurfaceConfig, ReflectionVector, f64, bool, Traces);

fn multi_user_scheme(cfg: &ExperimentConfig, scheme: SchemeId, sc: &Scenario, seed: u64) -> Result<Optimized> {
    let ctx = sc.inner_context(cfg, seed);
    let solver = scheme.inner(cfg.algorithm.inner);
    let free = scheme.freedom();
    let fixed = sc.fixed_config();
    if !(free.positions || free.bs_rotation || free.irs_rotation) {
        let inner = run_inner(solver, &fixed, &ctx, &[u64::MAX])?;
        let traces = Traces { de: Vec::new(), ssca: inner.trace };
        return Ok((fixed, inner.v, inner.rate.mean, inner.converged, traces));
    }
    let regions = scheme.restrict(&sc.regions);
    let pinned = (!free.positions).then_some(fixed.positions.as_slice());
    let bounds = outer_bounds(&regions, sc.antennas, pinned)?;
    let res = extended_de(&ctx, &bounds, &regions, &cfg.algorithm.de, solver, Some(&fixed))?;
    let config = ArraySurfaceConfig { regions: sc.regions, ..res.config };
    let fitness = res.trace.last().copied().unwrap_or(f64::NAN);
    let traces = Traces { de: res.trace, ssca: res.inner.trace };
    Ok((config, res.inner.v, fitness, res.inner.converged, traces))
}

fn single_user_scheme(cfg: &ExperimentConfig, scheme: SchemeId, sc: &Scenario, seed: u64) -> Result<Optimized> {
    let radio = &sc.radio;
    let (sdp, extract) = (cfg.sdp(), cfg.extract());
    let de = cfg.algorithm.de;
    let angles = LinkAngles::of_user(&sc.scsi, 0);
    let regions = sc.regions;
    let fixed = sc.fixed_config();
    let p32_at = |config: ArraySurfaceConfig| -> Result<Optimized> {
        let terms = ExpectedGainTerms::new(radio, &sc.scsi, 0, &config, &sc.layout)?;
        let p = solve_p32(&terms, &sdp, &extract, seed)?;
        Ok((config, p.v, p.value, p.sdp_converged, Traces::default()))
    };
    let psi_grid = uniform_grid(regions.psi.0, regions.psi.1, cfg.algorithm.psi_grid);
    match scheme {
        SchemeId::Proposed | SchemeId::DeSsca | SchemeId::LowComplexity => {
            let opts = SingleUserOptions {
                de,
                psi_grid: cfg.algorithm.psi_grid,
                phi_grid: cfg.algorithm.phi_grid,
                power: sc.rate.power,
                noise: sc.rate.noise,
                eval_samples: 1,
                sdp,
                extract,
            };
            let r = single_user_pipeline(radio, &sc.scsi, &sc.layout, &regions, sc.antennas, &opts, seed)?;
            let traces = Traces { de: r.p31.trace, ssca: Vec::new() };
            Ok((r.config, r.v, r.predicted_gain, r.sdp_converged, traces))
        }
        SchemeId::FixedConfiguration => p32_at(fixed),
        SchemeId::RirsOnly => {
            let terms_at = |phi: f64| {
                let c = ArraySurfaceConfig { phi, ..fixed.clone() };
                ExpectedGainTerms::new(radio, &sc.scsi, 0, &c, &sc.layout)
            };
            let grid = uniform_grid(regions.phi.0, regions.phi.1, cfg.algorithm.phi_grid);
            let (phi, p) = search_phi(terms_at, &grid, &sdp, &extract, seed)?;
            Ok((ArraySurfaceConfig { phi, ..fixed }, p.v, p.value, p.sdp_converged, Traces::default()))
        }
        SchemeId::SixdmaFirs => {
            let (psi, p31) = search_psi(radio, &angles, &regions, sc.antennas, &de, &psi_grid, seed)?;
            let mut out = p32_at(ArraySurfaceConfig { positions: p31.q, psi, ..fixed })?;
            out.4.de = p31.trace;
            Ok(out)
        }
        SchemeId::PositionableFirs => {
            let p31 = solve_p31(radio, 0.0, &angles, &regions, sc.antennas, &de, seed)?;
            let mut out = p32_at(ArraySurfaceConfig { positions: p31.q, ..fixed })?;
            out.4.de = p31.trace;
            Ok(out)
        }
        SchemeId::RotatableFirs => {
            let mut best = (0.0, f64::NEG_INFINITY);
            for psi in psi_grid {
                let a = bs_alignment(radio, &fixed.positions, psi, &angles).norm();
                if a > best.1 {
                    best = (psi, a);
                }
            }
            p32_at(ArraySurfaceConfig { psi: best.0, ..fixed })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(users: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::desk();
        c.system.users = users;
        c.system.antennas = 3;
        c.system.irs_rows = 2;
        c.system.irs_cols = 3;
        c.system.paths = 2;
        c.algorithm.de.population = 4;
        c.algorithm.de.generations = 2;
        c.algorithm.psi_grid = 5;
        c.algorithm.phi_grid = 5;
        c.algorithm.ssca.samples = 4;
        c.algorithm.ssca.max_iter = 15;
        c.algorithm.test_samples = 30;
        c.algorithm.randomizations = 10;
        c
    }

    #[test]
    fn names_round_trip() {
        for s in SchemeId::ALL {
            assert_eq!(SchemeId::parse(s.name()).unwrap(), s);
        }
        assert!(SchemeId::parse("best").is_err());
    }

    #[test]
    fn restrictions_pin_rotations() {
        let r = Regions { q_min: -1.0, q_max: 1.0, psi: (-0.5, 0.5), phi: (-0.4, 0.4) };
        assert_eq!(SchemeId::RirsOnly.restrict(&r).psi, (0.0, 0.0));
        assert_eq!(SchemeId::RirsOnly.restrict(&r).phi, (-0.4, 0.4));
        assert_eq!(SchemeId::SixdmaFirs.restrict(&r).phi, (0.0, 0.0));
        assert_eq!(SchemeId::Proposed.restrict(&r), r);
        assert_eq!(SchemeId::DeSsca.inner(InnerSolver::Scg), InnerSolver::Ssca);
        assert_eq!(SchemeId::Proposed.inner(InnerSolver::Scg), InnerSolver::Scg);
    }

    #[test]
    fn scenarios_are_matched_across_schemes() {
        let c = tiny(2);
        let a = Scenario::build(&c, 3).unwrap();
        let b = Scenario::build(&c, 3).unwrap();
        assert_eq!(a.scsi, b.scsi);
        assert_ne!(Scenario::build(&c, 4).unwrap().scsi, a.scsi);
    }

    #[test]
    fn every_scheme_respects_its_restriction() {
        for users in [1, 2] {
            let c = tiny(users);
            let sc = Scenario::build(&c, 0).unwrap();
            let fixed = sc.fixed_config();
            for s in SchemeId::ALL {
                let out = run_scheme(&c, s, &sc).unwrap();
                let f = s.freedom();
                if !f.positions {
                    assert_eq!(out.config.positions, fixed.positions, "{s}");
                }
                if !f.bs_rotation {
                    assert_eq!(out.config.psi, 0.0, "{s}");
                }
                if !f.irs_rotation {
                    assert_eq!(out.config.phi, 0.0, "{s}");
                }
                assert!(out.rate.mean > 0.0 && out.rate.mean.is_finite());
                assert!(out.v.0.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
            }
        }
    }
}
