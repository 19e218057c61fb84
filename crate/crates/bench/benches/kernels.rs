use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use sixdma::beamforming::{wmmse, WmmseOptions};
use sixdma::channel::{PathCoefficients, ReflectionVector, Steering};
use sixdma::harness::{ExperimentConfig, Scenario};
use sixdma::multi_user::scg_matrix;
use sixdma::rng::stream;
use sixdma::sdp::{solve_diag_trace_sdp, SdpOptions};
use sixdma::single_user::{solve_p31, LinkAngles};

fn desk() -> (ExperimentConfig, Scenario) {
    let cfg = ExperimentConfig::desk();
    let sc = Scenario::build(&cfg, 0).expect("desk scenario");
    (cfg, sc)
}

fn channel_sampling(c: &mut Criterion) {
    let (_, sc) = desk();
    let st = Steering::new(&sc.radio, &sc.scsi, &sc.fixed_config(), &sc.layout).unwrap();
    let mut rng = stream(1, "bench", &[]);
    c.bench_function("icsi draw (M=6, N=32, K=3)", |b| {
        b.iter(|| st.channels(PathCoefficients::draw(&sc.scsi, &mut rng)).unwrap())
    });
}

fn wmmse_solve(c: &mut Criterion) {
    let (_, sc) = desk();
    let st = Steering::new(&sc.radio, &sc.scsi, &sc.fixed_config(), &sc.layout).unwrap();
    let ch = st.channels(PathCoefficients::draw(&sc.scsi, &mut stream(2, "bench", &[]))).unwrap();
    let h = ch.effective_all(&ReflectionVector::ones(32).0).unwrap();
    c.bench_function("wmmse (M=6, K=3)", |b| {
        b.iter(|| wmmse(black_box(&h), sc.rate.power, sc.rate.noise, &WmmseOptions::default()).unwrap())
    });
}

fn sdp_solve(c: &mut Criterion) {
    let (cfg, sc) = desk();
    let h = scg_matrix(&sc.fixed_config(), &sc.inner_context(&cfg, 0)).unwrap();
    let mut group = c.benchmark_group("sdp");
    group.sample_size(10);
    group.bench_function("sum-gain SDP (N=32)", |b| b.iter(|| solve_diag_trace_sdp(black_box(&h), &SdpOptions::default()).unwrap()));
    group.finish();
}

fn position_de(c: &mut Criterion) {
    let (cfg, sc) = desk();
    let angles = LinkAngles::of_user(&sc.scsi, 0);
    let mut narrow = sc.regions;
    narrow.q_max = narrow.q_min + 0.6 * (narrow.q_max - narrow.q_min);
    let mut group = c.benchmark_group("de");
    group.sample_size(10);
    group.bench_function("position DE (M=6, P=S=50)", |b| {
        b.iter(|| solve_p31(&sc.radio, 0.0, &angles, &narrow, 6, &ExperimentConfig::default().algorithm.de, cfg.seed).unwrap())
    });
    group.finish();
}

criterion_group!(benches, channel_sampling, wmmse_solve, sdp_solve, position_de);
criterion_main!(benches);
