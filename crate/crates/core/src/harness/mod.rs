//! Experiment configuration, scheme runners, sweeps and their CSV/JSON outputs.

pub mod config;
pub mod output;
pub mod scheme;
pub mod validate;

pub use config::{AlgorithmConfig, ExperimentConfig, GeometryConfig, SweepAxis, SweepConfig, SystemConfig};
pub use output::{ResultRecord, SummaryRow, TraceRow};
pub use scheme::{run_scheme, Scenario, SchemeId, SchemeOutcome, Traces};

use rayon::prelude::*;
use std::path::Path;

use crate::de::{run_de, Bounds};
use crate::error::Result;
use crate::multi_user::ssca_inner;
use crate::rng::stream;
use crate::single_user::{de_fitness, LinkAngles};
use output::{summarize, trace_rows, write_csv, Manifest};

/// Rows produced by one command.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub records: Vec<ResultRecord>,
    pub summary: Vec<SummaryRow>,
    pub traces: Vec<TraceRow>,
}

impl RunOutput {
    fn from_parts(parts: Vec<(ResultRecord, Vec<TraceRow>)>) -> Self {
        let (records, traces): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
        Self { summary: summarize(&records), records, traces: traces.into_iter().flatten().collect() }
    }

    /// Writes `results.csv`, `summary.csv`, `trace.csv` and `manifest.json`.
    pub fn write(&self, dir: &Path, manifest_command: &str, cfg: &ExperimentConfig, git_hash: Option<String>) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let open = |name: &str| std::fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
        write_csv(open("results.csv")?, &self.records)?;
        write_csv(open("summary.csv")?, &self.summary)?;
        write_csv(open("trace.csv")?, &self.traces)?;
        let files = ["results.csv", "summary.csv", "trace.csv"];
        Manifest::new(manifest_command, cfg, git_hash, &files).write(dir)
    }
}

/// `cfg.scheme` on every S-CSI realization.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let hash = cfg.hash();
    let parts = (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|s| {
            let sc = Scenario::build(cfg, s)?;
            let out = run_scheme(cfg, cfg.scheme, &sc)?;
            Ok((ResultRecord::new(&out, "none", None, s, &hash), trace_rows(&out, s)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunOutput::from_parts(parts))
}

/// Every scheme at every point of the sweep axis, on matched S-CSI
/// realizations. Rows are ordered by scheme, point, then realization.
pub fn run_sweep(cfg: &ExperimentConfig, schemes: &[SchemeId], axis: SweepAxis, points: &[f64]) -> Result<RunOutput> {
    cfg.validate()?;
    let hash = cfg.hash();
    let configs = points.iter().map(|p| cfg.at_point(axis, *p)).collect::<Result<Vec<_>>>()?;
    let tasks: Vec<(usize, usize, u64)> = (0..schemes.len())
        .flat_map(|i| (0..points.len()).flat_map(move |j| (0..cfg.seeds as u64).map(move |s| (i, j, s))))
        .collect();
    let parts = tasks
        .into_par_iter()
        .map(|(i, j, s)| {
            let sc = Scenario::build(&configs[j], s)?;
            let out = run_scheme(&configs[j], schemes[i], &sc)?;
            Ok((ResultRecord::new(&out, axis.name(), Some(points[j]), s, &hash), trace_rows(&out, s)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunOutput::from_parts(parts))
}

/// DE best fitness of the single-user position problem at ψ = 0, one row
/// per generation, for realization 0.
pub fn single_user_convergence(cfg: &ExperimentConfig) -> Result<Vec<TraceRow>> {
    let sc = Scenario::build(cfg, 0)?;
    let angles = LinkAngles::of_user(&sc.scsi, 0);
    let de = cfg.algorithm.de;
    let m = sc.antennas;
    let bounds = Bounds::new(vec![sc.regions.q_min; m], vec![sc.regions.q_max; m])?;
    let fitness = |q: &[f64], _: crate::de::EvalTag| Ok(de_fitness(&sc.radio, q, 0.0, &angles, de.eta));
    let mut rng = stream(cfg.seed, "convergence-de", &[]);
    let out = run_de(&bounds, &de, m, &mut rng, &fitness, false)?;
    Ok(out
        .trace
        .iter()
        .enumerate()
        .skip(1)
        .map(|(g, v)| TraceRow { kind: "de".into(), scheme: SchemeId::Proposed, seed_index: 0, iteration: g, value: *v })
        .collect())
}

/// SSCA surrogate at the fixed configuration, then the outer DE traces of
/// DE-SSCA and the low-complexity scheme, all on realization 0.
pub fn multi_user_convergence(cfg: &ExperimentConfig) -> Result<Vec<TraceRow>> {
    let sc = Scenario::build(cfg, 0)?;
    let seed = scheme::optimization_seed(cfg, 0);
    let ctx = sc.inner_context(cfg, seed);
    let ssca = ssca_inner(&sc.fixed_config(), &ctx, &[u64::MAX - 1], None)?;
    let mut rows: Vec<TraceRow> = ssca
        .trace
        .iter()
        .map(|p| TraceRow {
            kind: "ssca".into(),
            scheme: SchemeId::DeSsca,
            seed_index: 0,
            iteration: p.iteration,
            value: p.surrogate,
        })
        .collect();
    for scheme in [SchemeId::DeSsca, SchemeId::LowComplexity] {
        let out = run_scheme(cfg, scheme, &sc)?;
        rows.extend(trace_rows(&out, 0).into_iter().filter(|r| r.kind == "de"));
    }
    Ok(rows)
}

pub fn write_traces(dir: &Path, rows: &[TraceRow], command: &str, cfg: &ExperimentConfig, git_hash: Option<String>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(std::io::BufWriter::new(std::fs::File::create(dir.join("trace.csv"))?), rows)?;
    Manifest::new(command, cfg, git_hash, &["trace.csv"]).write(dir)
}
