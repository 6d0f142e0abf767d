use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::haar::ginibre;
use super::spectrum::{bipartite_spectrum, SpectralReport};
use super::state::{build_pure_state, check_state_dim, resolve_ops, BuildOptions, SampleRng, VertexUnitary};
use super::{Guards, C64};
use crate::error::{Error, Result};
use crate::graph::Marginal;
use crate::spectral::mp_moment;

/// Highest rescaled moment recorded in a report.
pub const MOMENT_ORDER: usize = 4;

const TOLERANCE_NOTE: &str = "reproducible for identical seed, inputs and build; \
    eigensolver round-off may differ across platforms";

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub build: BuildOptions,
    pub guards: Guards,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Keep per-sample spectra in the report (for CSV export).
    pub keep_spectra: bool,
    /// Sample single-loop marginals as normalized Ginibre matrices.
    pub wishart: bool,
    pub q_list: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            build: BuildOptions::default(),
            guards: Guards::default(),
            jobs: None,
            keep_spectra: false,
            wishart: true,
            q_list: vec![0.0, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    Wishart,
    Graph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenyiMean {
    pub q: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub method: SamplingMethod,
    pub samples: usize,
    pub seed: u64,
    pub dim_system: usize,
    pub dim_environment: usize,
    #[serde(rename = "mean_H")]
    pub mean_entropy: f64,
    #[serde(rename = "stderr_H")]
    pub stderr_entropy: f64,
    #[serde(rename = "H")]
    pub entropies: Vec<f64>,
    pub renyi: Vec<RenyiMean>,
    pub min_rank: usize,
    pub max_rank: usize,
    /// Mean of `(1/dim_S) Σ_i (dim_S λ_i)^p` for `p = 1..=4`.
    pub rescaled_moments: Vec<f64>,
    pub skipped_traced: Vec<String>,
    pub skipped_surviving: Vec<String>,
    pub note: String,
    #[serde(skip)]
    pub spectra: Option<Vec<Vec<f64>>>,
}

struct Sample {
    report: SpectralReport,
    moments: Vec<f64>,
}

#[derive(Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

fn kahan_mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    let mut k = Kahan::default();
    xs.for_each(|x| k.add(x));
    k.sum / n as f64
}

fn moments(eigenvalues: &[f64], dim_s: usize) -> Vec<f64> {
    let scale = dim_s as f64;
    (1..=MOMENT_ORDER)
        .map(|p| kahan_mean(eigenvalues.iter().map(|&x| (scale * x).powi(p as i32)), dim_s))
        .collect()
}

fn is_single_loop(m: &Marginal) -> bool {
    let g = m.graph();
    g.vertex_count() == 1 && g.edge_count() == 1 && m.s(0) == 1
}

/// Estimates `E H(ρ_S)` over `samples` independent draws. Sample `i` uses
/// ChaCha20 stream `i` keyed by `seed`, so results do not depend on `jobs`.
pub fn run_experiment(m: &Marginal, n: usize, samples: usize, seed: u64, config: &ExperimentConfig) -> Result<MCReport> {
    if samples == 0 {
        return Err(Error::Validation("at least one sample is required".into()));
    }
    if n == 0 {
        return Err(Error::Validation("N must be positive".into()));
    }
    if config.wishart && is_single_loop(m) {
        check_state_dim(m, n, &config.guards)?;
        let d = m.graph().leg_dim(0, n);
        return run_wishart(d, d, samples, seed, config);
    }

    let g = m.graph();
    let unitaries = vec![VertexUnitary::Haar; g.vertex_count()];
    let (_, skipped_traced, skipped_surviving) = resolve_ops(m, n, &unitaries, &config.build, &config.guards)?;
    let dim_s: usize = m.surviving_legs().iter().map(|&l| g.leg_dim(l, n)).product();
    let dim_t: usize = m.traced_legs().iter().map(|&l| g.leg_dim(l, n)).product();

    let draw = |i: usize| -> Result<Vec<f64>> {
        let rng = SampleRng { seed, stream: i as u64 };
        build_pure_state(m, n, &unitaries, &config.build, &config.guards, rng)?.marginal_spectrum(m)
    };
    let mut report = collect(samples, seed, dim_s, dim_t, config, draw)?;
    report.method = SamplingMethod::Graph;
    report.skipped_traced = skipped_traced.iter().map(|&v| g.name(v).to_string()).collect();
    report.skipped_surviving = skipped_surviving.iter().map(|&v| g.name(v).to_string()).collect();
    Ok(report)
}

/// Normalized Wishart states `ρ = GG†/Tr GG†` with `G` of size `dim_s × dim_t`.
pub fn run_wishart(dim_s: usize, dim_t: usize, samples: usize, seed: u64, config: &ExperimentConfig) -> Result<MCReport> {
    if samples == 0 {
        return Err(Error::Validation("at least one sample is required".into()));
    }
    let total = (dim_s as u128) * (dim_t as u128);
    if total > config.guards.state_dim_limit {
        return Err(Error::Guard(format!(
            "Wishart matrix of {total} entries exceeds state_dim_limit {}",
            config.guards.state_dim_limit
        )));
    }
    let draw = |i: usize| -> Result<Vec<f64>> {
        let mut rng = SampleRng { seed, stream: i as u64 }.lane(0);
        let gm = ginibre(dim_t, dim_s, &mut rng);
        let norm = gm.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        // column-major dim_t × dim_s storage is the row-major dim_s × dim_t array
        let psi: Vec<C64> = gm.iter().map(|z| z / norm).collect();
        bipartite_spectrum(&psi, dim_s, dim_t)
    };
    collect(samples, seed, dim_s, dim_t, config, draw)
}

fn collect(
    samples: usize,
    seed: u64,
    dim_s: usize,
    dim_t: usize,
    config: &ExperimentConfig,
    draw: impl Fn(usize) -> Result<Vec<f64>> + Sync,
) -> Result<MCReport> {
    let one = |i: usize| -> Result<Sample> {
        let eig = draw(i)?;
        let report = SpectralReport::from_eigenvalues(eig, &config.q_list);
        let moments = moments(&report.eigenvalues, dim_s);
        Ok(Sample { report, moments })
    };
    let results: Vec<Result<Sample>> = match config.jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::Validation(format!("cannot start {j} worker threads: {e}")))?;
            pool.install(|| (0..samples).into_par_iter().map(one).collect())
        }
        None => (0..samples).into_par_iter().map(one).collect(),
    };
    let samples_out: Vec<Sample> = results.into_iter().collect::<Result<_>>()?;

    let entropies: Vec<f64> = samples_out.iter().map(|s| s.report.entropy).collect();
    let mean = kahan_mean(entropies.iter().copied(), samples);
    let stderr = if samples > 1 {
        let var = kahan_mean(entropies.iter().map(|h| (h - mean).powi(2)), samples - 1);
        (var / samples as f64).sqrt()
    } else {
        0.0
    };
    let renyi = config
        .q_list
        .iter()
        .enumerate()
        .map(|(k, &q)| RenyiMean { q, mean: kahan_mean(samples_out.iter().map(|s| s.report.renyi[k].value), samples) })
        .collect();
    let rescaled_moments =
        (0..MOMENT_ORDER).map(|p| kahan_mean(samples_out.iter().map(|s| s.moments[p]), samples)).collect();
    let ranks = samples_out.iter().map(|s| s.report.rank);
    Ok(MCReport {
        method: SamplingMethod::Wishart,
        samples,
        seed,
        dim_system: dim_s,
        dim_environment: dim_t,
        mean_entropy: mean,
        stderr_entropy: stderr,
        renyi,
        min_rank: ranks.clone().min().unwrap_or(0),
        max_rank: ranks.max().unwrap_or(0),
        rescaled_moments,
        skipped_traced: Vec::new(),
        skipped_surviving: Vec::new(),
        note: TOLERANCE_NOTE.to_string(),
        spectra: config.keep_spectra.then(|| samples_out.iter().map(|s| s.report.eigenvalues.clone()).collect()),
        entropies,
    })
}

/// Mean of `(1/dim_S) Tr (rescale · ρ_S)^p` for `p = 1..=4`.
pub fn empirical_moments(report: &MCReport, rescale: f64) -> Vec<f64> {
    let ratio = rescale / report.dim_system as f64;
    report.rescaled_moments.iter().enumerate().map(|(k, m)| m * ratio.powi(k as i32 + 1)).collect()
}

/// `|empirical moment p - mp_moment(c, p)|` for `p = 1..=4`.
pub fn empirical_vs_mp(report: &MCReport, c: f64, rescale: f64) -> Result<Vec<f64>> {
    empirical_moments(report, rescale)
        .iter()
        .enumerate()
        .map(|(k, m)| Ok((m - mp_moment(c, k + 1)?).abs()))
        .collect()
}

/// Writes kept spectra as CSV with header `sample,index,eigenvalue`.
pub fn write_spectra_csv<W: Write>(report: &MCReport, out: W) -> Result<()> {
    let spectra = report
        .spectra
        .as_ref()
        .ok_or_else(|| Error::Validation("spectra were not kept for this report".into()))?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["sample", "index", "eigenvalue"]).map_err(io)?;
    for (s, eig) in spectra.iter().enumerate() {
        for (i, x) in eig.iter().enumerate() {
            w.write_record([s.to_string(), i.to_string(), format!("{x:e}")]).map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}
