//! Seeded experiment sweeps, aggregation and CSV/SVG output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{bias_monte_carlo, inverse_moment_check, scale_equivariance_check, truncation_audit, MonteCarloReport, ScaleScenario};
use crate::error::{Error, Result};
use crate::estimators::{
    fit_paq, fit_paq_direct, fit_paq_naive, fit_pairwise, fit_ranking, fit_triplet, normalize_unit_fro, PairwiseOutcome,
    RankingQuery, SolverConfig, TripletData, TripletOutcome,
};
use crate::linalg::{generate_metric_orthonormal, generate_metric_wishart, normalized_error, MetricMatrix};
use crate::oracles::{pairwise_oracle, paq_respond, ranking_oracle, sample_query_vector, triplet_oracle, NoiseModel, PaqResponse};
use crate::pipeline::{choose_m, policy_with_m, run_pipeline, PipelineConfig, SpectrumSummary};

pub const COMPARE_DIM: usize = 50;
pub const COMPARE_RANK: usize = 10;
pub const COMPARE_LAMBDA: f64 = 0.05;
/// Multiplier on the theoretical λ for the PAQ sweeps, chosen by held-out
/// validation over a grid of powers of two.
pub const DEFAULT_C1: f64 = 0.015625;

pub const CSV_HEADER: &str = "experiment,query_type,N,d,r,m,tau,lambda,trial,seed,normalized_error,wall_time_s,truncation_hits";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    CompareQueries,
    SweepD,
    SweepR,
    SweepM,
    Diagnostics,
    ScaleCheck,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::CompareQueries => "compare_queries",
            ExperimentKind::SweepD => "sweep_d",
            ExperimentKind::SweepR => "sweep_r",
            ExperimentKind::SweepM => "sweep_m",
            ExperimentKind::Diagnostics => "diagnostics",
            ExperimentKind::ScaleCheck => "scale_check",
        }
    }

    pub fn is_sweep(self) -> bool {
        matches!(self, ExperimentKind::SweepD | ExperimentKind::SweepR | ExperimentKind::SweepM)
    }

    pub fn default_trials(self) -> usize {
        match self {
            ExperimentKind::CompareQueries => 10,
            _ => 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QueryType {
    Pairwise,
    Triplet,
    Ranking(usize),
    PaqDirect,
    /// Averaged and truncated pipeline.
    Paq,
    PaqNaive,
}

impl QueryType {
    pub const COMPARISON_SET: [QueryType; 5] =
        [QueryType::Pairwise, QueryType::Triplet, QueryType::Ranking(8), QueryType::Ranking(16), QueryType::PaqDirect];

    pub fn name(self) -> String {
        match self {
            QueryType::Pairwise => "pairwise".into(),
            QueryType::Triplet => "triplet".into(),
            QueryType::Ranking(k) => format!("ranking-{k}"),
            QueryType::PaqDirect => "paq-direct".into(),
            QueryType::Paq => "paq".into(),
            QueryType::PaqNaive => "paq-naive".into(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pairwise" => QueryType::Pairwise,
            "triplet" => QueryType::Triplet,
            "paq-direct" => QueryType::PaqDirect,
            "paq" => QueryType::Paq,
            "paq-naive" => QueryType::PaqNaive,
            _ => QueryType::Ranking(s.strip_prefix("ranking-")?.parse().ok().filter(|k| *k >= 2)?),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    /// Total measurement counts.
    #[serde(rename = "N", default, skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<usize>,
    /// Measurement counts given relative to `d`; exclusive with `N`.
    #[serde(rename = "N_per_d", default, skip_serializing_if = "Vec::is_empty")]
    pub n_per_d: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub r: Vec<usize>,
    /// Fixed averaging parameters; empty means the policy chooses `m`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub grid: Grid,
    pub y: f64,
    #[serde(default)]
    pub eta_up: f64,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    /// λ itself for the query comparison, a multiplier on the policy λ for sweeps.
    #[serde(default)]
    pub lambda_scale: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or_else(|| self.experiment.default_trials())
    }

    pub fn lambda_scale(&self) -> f64 {
        self.lambda_scale.unwrap_or(match self.experiment {
            ExperimentKind::CompareQueries => COMPARE_LAMBDA,
            _ => DEFAULT_C1,
        })
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        let noise = if self.eta_up == 0.0 { NoiseModel::none(self.y) } else { NoiseModel::uniform(self.y, self.eta_up) };
        noise.map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.y > 0.0) || !self.y.is_finite() {
            return bad(format!("y must be positive, got {}", self.y));
        }
        if !(self.eta_up >= 0.0) || self.eta_up > self.y {
            return bad(format!("eta_up must lie in [0, y], got {}", self.eta_up));
        }
        if self.trials == Some(0) {
            return bad("trials must be at least 1".into());
        }
        if let Some(l) = self.lambda_scale {
            if !(l >= 0.0) || !l.is_finite() {
                return bad(format!("lambda_scale must be finite and >= 0, got {l}"));
            }
        }
        let g = &self.grid;
        if [&g.n, &g.n_per_d, &g.d, &g.r, &g.m].iter().any(|v| v.contains(&0)) {
            return bad("grid values must be at least 1".into());
        }
        match self.experiment {
            ExperimentKind::CompareQueries => {
                if self.eta_up != 0.0 {
                    return bad("compare_queries uses noiseless oracles; eta_up must be 0".into());
                }
                if g.n.is_empty() || !g.n_per_d.is_empty() {
                    return bad("compare_queries needs grid.N and no grid.N_per_d".into());
                }
            }
            kind if kind.is_sweep() => {
                if g.n.is_empty() == g.n_per_d.is_empty() {
                    return bad("exactly one of grid.N and grid.N_per_d must be given".into());
                }
                if g.d.is_empty() || g.r.is_empty() {
                    return bad("sweeps need grid.d and grid.r".into());
                }
                for &d in &g.d {
                    if let Some(&r) = g.r.iter().find(|&&r| r > d) {
                        return bad(format!("rank {r} exceeds dimension {d}"));
                    }
                }
                if kind == ExperimentKind::SweepM && g.m.is_empty() {
                    return bad("sweep_m needs grid.m".into());
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds the master seed, the experiment id and the coordinates through the
/// splitmix64 finalizer, one 64-bit word at a time.
pub fn derive_trial_seed(master_seed: u64, experiment: &str, coords: &[u64]) -> u64 {
    let mut h = splitmix64(master_seed);
    for chunk in experiment.as_bytes().chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        h = splitmix64(h ^ u64::from_le_bytes(word));
    }
    h = splitmix64(h ^ experiment.len() as u64);
    for &c in coords {
        h = splitmix64(h ^ c);
    }
    h
}

/// Everything needed to run, and rerun, one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub experiment: ExperimentKind,
    pub query_type: QueryType,
    pub total: usize,
    pub d: usize,
    pub r: usize,
    /// `None` lets the policy choose.
    pub m: Option<usize>,
    pub y: f64,
    pub eta_up: f64,
    pub lambda_scale: f64,
    pub trial: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub experiment: ExperimentKind,
    pub query_type: QueryType,
    pub total: usize,
    pub d: usize,
    pub r: usize,
    pub m: usize,
    pub tau: f64,
    pub lambda: f64,
    pub trial: usize,
    pub seed: u64,
    pub normalized_error: f64,
    pub wall_time_s: f64,
    pub truncation_hits: usize,
}

impl TrialRecord {
    fn sort_key(&self) -> (ExperimentKind, QueryType, usize, usize, usize, usize, usize) {
        (self.experiment, self.query_type, self.total, self.d, self.r, self.m, self.trial)
    }
}

/// Expands a config into its full factorial of trials.
pub fn plan_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialSpec>> {
    cfg.validate()?;
    let id = cfg.experiment.as_str();
    let trials = cfg.trials();
    let lambda_scale = cfg.lambda_scale();
    let mut specs = Vec::new();
    match cfg.experiment {
        ExperimentKind::CompareQueries => {
            let d = cfg.grid.d.first().copied().unwrap_or(COMPARE_DIM);
            let r = cfg.grid.r.first().copied().unwrap_or(COMPARE_RANK);
            for &total in &cfg.grid.n {
                for trial in 0..trials {
                    // Query types share the seed so they see the same Σ*.
                    let seed = derive_trial_seed(cfg.master_seed, id, &[total as u64, d as u64, r as u64, trial as u64]);
                    for q in QueryType::COMPARISON_SET {
                        specs.push(TrialSpec {
                            experiment: cfg.experiment,
                            query_type: q,
                            total,
                            d,
                            r,
                            m: Some(1),
                            y: cfg.y,
                            eta_up: 0.0,
                            lambda_scale,
                            trial,
                            seed,
                        });
                    }
                }
            }
        }
        kind if kind.is_sweep() => {
            let ms: Vec<Option<usize>> =
                if cfg.grid.m.is_empty() { vec![None] } else { cfg.grid.m.iter().map(|&m| Some(m)).collect() };
            for &d in &cfg.grid.d {
                let totals: Vec<usize> = if cfg.grid.n.is_empty() {
                    cfg.grid.n_per_d.iter().map(|k| k * d).collect()
                } else {
                    cfg.grid.n.clone()
                };
                for &r in &cfg.grid.r {
                    for &total in &totals {
                        for trial in 0..trials {
                            // m is left out so that every m sees the same Σ* and vectors.
                            let seed = derive_trial_seed(cfg.master_seed, id, &[total as u64, d as u64, r as u64, trial as u64]);
                            for &m in &ms {
                                specs.push(TrialSpec {
                                    experiment: kind,
                                    query_type: QueryType::Paq,
                                    total,
                                    d,
                                    r,
                                    m,
                                    y: cfg.y,
                                    eta_up: cfg.eta_up,
                                    lambda_scale,
                                    trial,
                                    seed,
                                });
                            }
                        }
                    }
                }
            }
        }
        other => return Err(Error::Config(format!("{} does not produce trial records", other.as_str()))),
    }
    Ok(specs)
}

fn noise_for(spec: &TrialSpec) -> Result<NoiseModel> {
    if spec.eta_up == 0.0 {
        NoiseModel::none(spec.y)
    } else {
        NoiseModel::uniform(spec.y, spec.eta_up)
    }
}

fn ordinal_item(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    sample_query_vector(d, rng)
}

struct Fitted {
    estimate: MetricMatrix,
    m: usize,
    tau: f64,
    lambda: f64,
    hits: usize,
}

/// Runs one trial. The result depends only on the spec.
pub fn run_trial(spec: &TrialSpec) -> Result<TrialRecord> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (d, r, total) = (spec.d, spec.r, spec.total);
    let comparison = spec.experiment == ExperimentKind::CompareQueries;
    let sigma = if comparison { generate_metric_wishart(d, r, &mut rng)? } else { generate_metric_orthonormal(d, r, &mut rng)? };

    let fitted = match spec.query_type {
        QueryType::Paq => {
            let noise = noise_for(spec)?;
            let m = spec.m.unwrap_or_else(|| choose_m(&noise, total, d));
            let policy = policy_with_m(&SpectrumSummary::from_metric(&sigma)?, &noise, total, d, m, spec.lambda_scale)?;
            let cfg = PipelineConfig::new(total, m, policy.tau, noise)?;
            let out = run_pipeline(&sigma, &cfg, &mut rng)?;
            let fit = fit_paq(&out, spec.y, &SolverConfig::smooth(policy.lambda))?;
            Fitted { estimate: fit.estimate, m, tau: policy.tau, lambda: policy.lambda, hits: out.truncation_hits }
        }
        QueryType::PaqNaive => {
            let noise = noise_for(spec)?;
            let policy = policy_with_m(&SpectrumSummary::from_metric(&sigma)?, &noise, total, d, 1, spec.lambda_scale)?;
            let cfg = PipelineConfig::new(total, 1, f64::INFINITY, noise)?;
            let out = run_pipeline(&sigma, &cfg, &mut rng)?;
            let responses: Vec<PaqResponse> = (0..out.len())
                .map(|i| PaqResponse {
                    query: out.sensing_vectors.row(i).transpose(),
                    gamma_sq: out.averaged_responses[i],
                    noise: out.noise_means[i],
                })
                .collect();
            let fit = fit_paq_naive(&responses, spec.y, &SolverConfig::smooth(policy.lambda))?;
            Fitted { estimate: fit.estimate, m: 1, tau: f64::INFINITY, lambda: policy.lambda, hits: 0 }
        }
        q => {
            let lambda = spec.lambda_scale;
            let fit = fit_comparison(q, &sigma, total, spec.y, lambda, &mut rng)?;
            Fitted { estimate: fit, m: 1, tau: f64::INFINITY, lambda, hits: 0 }
        }
    };

    let normalized_error = if comparison {
        let truth = normalize_unit_fro(&sigma)?;
        match normalize_unit_fro(&fitted.estimate) {
            Ok(est) => normalized_error(&est, &truth)?,
            // An all-zero estimate carries no direction; its error is 1.
            Err(Error::ZeroMatrix) => 1.0,
            Err(e) => return Err(e),
        }
    } else {
        normalized_error(&fitted.estimate, &sigma)?
    };

    Ok(TrialRecord {
        experiment: spec.experiment,
        query_type: spec.query_type,
        total,
        d,
        r,
        m: fitted.m,
        tau: fitted.tau,
        lambda: fitted.lambda,
        trial: spec.trial,
        seed: spec.seed,
        normalized_error,
        wall_time_s: start.elapsed().as_secs_f64(),
        truncation_hits: fitted.hits,
    })
}

/// Noiseless queries of one type answered against Σ*, then fit.
fn fit_comparison(q: QueryType, sigma: &MetricMatrix, total: usize, y: f64, lambda: f64, rng: &mut ChaCha8Rng) -> Result<MetricMatrix> {
    let d = sigma.dim();
    let fit = match q {
        QueryType::Pairwise => {
            let mut outcomes = Vec::with_capacity(total);
            for _ in 0..total {
                let (x1, x2) = (ordinal_item(d, rng), ordinal_item(d, rng));
                let label = pairwise_oracle(sigma, &x1, &x2, y)?;
                outcomes.push(PairwiseOutcome { x1, x2, label });
            }
            fit_pairwise(&outcomes, y, &SolverConfig::hinge(lambda))?
        }
        QueryType::Triplet => {
            let mut outcomes = Vec::with_capacity(total);
            for _ in 0..total {
                let (x1, x2, x3) = (ordinal_item(d, rng), ordinal_item(d, rng), ordinal_item(d, rng));
                let label = triplet_oracle(sigma, &x1, &x2, &x3)?;
                outcomes.push(TripletOutcome { x1, x2, x3, label });
            }
            fit_triplet(&TripletData::from_outcomes(&outcomes), &SolverConfig::hinge(lambda))?
        }
        QueryType::Ranking(k) => {
            let mut queries = Vec::with_capacity(total);
            for _ in 0..total {
                let reference = ordinal_item(d, rng);
                let items: Vec<_> = (0..k).map(|_| ordinal_item(d, rng)).collect();
                let perm = ranking_oracle(sigma, &reference, &items)?;
                queries.push(RankingQuery { reference, items, perm });
            }
            fit_ranking(&queries, &SolverConfig::hinge(lambda))?
        }
        QueryType::PaqDirect => {
            let none = NoiseModel::none(y)?;
            let mut responses = Vec::with_capacity(total);
            for _ in 0..total {
                let a = sample_query_vector(d, rng);
                responses.push(paq_respond(sigma, &a, &none, rng)?);
            }
            fit_paq_direct(&responses, y, &SolverConfig::smooth(lambda))?
        }
        QueryType::Paq | QueryType::PaqNaive => unreachable!("handled by the pipeline branch"),
    };
    Ok(fit.estimate)
}

/// Runs every trial in parallel and returns the records sorted by key.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let specs = plan_trials(cfg)?;
    let mut records = specs.par_iter().map(run_trial).collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| r.sort_key());
    Ok(records)
}

fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.9e}")
    } else if v > 0.0 {
        "inf".into()
    } else {
        v.to_string()
    }
}

/// CSV text for the records, rows sorted by their key columns. With
/// `timing` off the wall-time column is written as zero so that reruns are
/// byte-identical.
pub fn render_csv(records: &[TrialRecord], timing: bool) -> Result<String> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to write".into()));
    }
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.sort_key());
    let mut out = String::with_capacity(128 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in sorted {
        let wall = if timing { r.wall_time_s } else { 0.0 };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.experiment.as_str(),
            r.query_type.name(),
            r.total,
            r.d,
            r.r,
            r.m,
            fmt_float(r.tau),
            fmt_float(r.lambda),
            r.trial,
            r.seed,
            fmt_float(r.normalized_error),
            fmt_float(wall),
            r.truncation_hits
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

pub fn emit_csv(records: &[TrialRecord], path: &Path, timing: bool) -> Result<()> {
    let text = render_csv(records, timing)?;
    fs::write(path, text)?;
    Ok(())
}

/// Mean and standard error of one series at one x value.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub x: f64,
    pub mean: f64,
    pub standard_error: f64,
    pub count: usize,
}

/// Mean and standard error of the mean (sample standard deviation over √k).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn series_and_x(r: &TrialRecord) -> (String, f64) {
    match r.experiment {
        ExperimentKind::SweepD => (format!("d={}", r.d), r.total as f64 / r.d as f64),
        ExperimentKind::SweepR => (format!("r={}", r.r), r.total as f64),
        ExperimentKind::SweepM => (format!("N={},d={}", r.total, r.d), r.m as f64),
        _ => (r.query_type.name(), r.total as f64),
    }
}

pub fn x_label(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::SweepD => "N/d",
        ExperimentKind::SweepM => "m",
        _ => "N",
    }
}

/// Groups records into plot series, each sorted by x.
pub fn aggregate(records: &[TrialRecord]) -> BTreeMap<String, Vec<SeriesPoint>> {
    let mut groups: BTreeMap<String, BTreeMap<u64, (f64, Vec<f64>)>> = BTreeMap::new();
    for r in records {
        let (series, x) = series_and_x(r);
        groups.entry(series).or_default().entry(x.to_bits()).or_insert_with(|| (x, Vec::new())).1.push(r.normalized_error);
    }
    groups
        .into_iter()
        .map(|(name, points)| {
            let mut pts: Vec<SeriesPoint> = points
                .into_values()
                .map(|(x, vals)| {
                    let (mean, standard_error) = mean_and_se(&vals);
                    SeriesPoint { x, mean, standard_error, count: vals.len() }
                })
                .collect();
            pts.sort_by(|a, b| a.x.total_cmp(&b.x));
            (name, pts)
        })
        .collect()
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Mean-error curves with ±1 standard-error bands as a standalone SVG.
pub fn render_svg(records: &[TrialRecord]) -> Result<String> {
    let first = records.first().ok_or_else(|| Error::InvalidArgument("no records to plot".into()))?;
    let series = aggregate(records);
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (70.0, 170.0, 30.0, 60.0);
    let pw = w - left - right;
    let ph = h - top - bottom;

    let pts = series.values().flatten();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y1 = 0.0f64;
    for p in pts {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y1 = y1.max(p.mean + p.standard_error);
    }
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if !(y1 > 0.0) {
        y1 = 1.0;
    }
    y1 *= 1.05;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - y / y1 * ph;

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<line x1="{left}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#, top + ph, left + pw, top + ph).unwrap();
    writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.2}" stroke="black"/>"#, top + ph).unwrap();
    for i in 0..=5 {
        let fx = x0 + (x1 - x0) * i as f64 / 5.0;
        let fy = y1 * i as f64 / 5.0;
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, sx(fx), top + ph + 18.0, tick(fx)).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, left - 6.0, sy(fy) + 4.0, tick(fy)).unwrap();
    }
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 15.0, x_label(first.experiment)).unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">normalized error</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    )
    .unwrap();

    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if pts.len() > 1 && pts.iter().any(|p| p.standard_error > 0.0) {
            let upper = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean + p.standard_error)));
            let lower = pts.iter().rev().map(|p| format!("{:.2},{:.2}", sx(p.x), sy((p.mean - p.standard_error).max(0.0))));
            let poly: Vec<String> = upper.chain(lower).collect();
            writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, poly.join(" ")).unwrap();
        }
        if pts.len() > 1 {
            let line: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean))).collect();
            writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" ")).unwrap();
        }
        for p in pts {
            writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(p.x), sy(p.mean)).unwrap();
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="12" height="12" fill="{color}"/>"#, w - right + 15.0, ly - 10.0).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, w - right + 32.0, ly, name).unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        let t = format!("{v:.3}");
        t.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

pub fn emit_plot(records: &[TrialRecord], path: &Path) -> Result<()> {
    let svg = render_svg(records)?;
    fs::write(path, svg)?;
    Ok(())
}

/// Held-out squared loss `(y − γ̃² aᵀΣ̂a)²` for each λ multiplier in `grid`.
///
/// The spec's pipeline data are split into the first `1 − holdout` share for
/// fitting and the rest for scoring; Σ* is used only to simulate responses.
pub fn validate_lambda_scale(spec: &TrialSpec, grid: &[f64], holdout: f64) -> Result<Vec<(f64, f64)>> {
    if !(holdout > 0.0 && holdout < 1.0) {
        return Err(Error::InvalidArgument(format!("holdout share must lie in (0, 1), got {holdout}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sigma = generate_metric_orthonormal(spec.d, spec.r, &mut rng)?;
    let noise = noise_for(spec)?;
    let m = spec.m.unwrap_or_else(|| choose_m(&noise, spec.total, spec.d));
    let summary = SpectrumSummary::from_metric(&sigma)?;
    let policy = policy_with_m(&summary, &noise, spec.total, spec.d, m, 1.0)?;
    let out = run_pipeline(&sigma, &PipelineConfig::new(spec.total, m, policy.tau, noise)?, &mut rng)?;
    let n = out.len();
    let fit_n = ((n as f64) * (1.0 - holdout)).round() as usize;
    if fit_n == 0 || fit_n == n {
        return Err(Error::InvalidArgument("holdout split leaves an empty side".into()));
    }
    let train = crate::estimators::TraceRegression::new(
        out.sensing_vectors.rows(0, fit_n).into_owned(),
        out.truncated_responses[..fit_n].to_vec(),
        vec![spec.y; fit_n],
    )?;
    let test = crate::estimators::TraceRegression::new(
        out.sensing_vectors.rows(fit_n, n - fit_n).into_owned(),
        out.truncated_responses[fit_n..].to_vec(),
        vec![spec.y; n - fit_n],
    )?;
    let train_policy = policy_with_m(&summary, &noise, fit_n * m, spec.d, m, 1.0)?;
    grid.iter()
        .map(|&c| {
            let fit = train.solve(&SolverConfig::smooth(train_policy.lambda * c))?;
            Ok((c, test.loss(&fit.estimate.matrix)))
        })
        .collect()
}

/// Monte Carlo sample count used by the diagnostics run.
pub const DIAGNOSTIC_SAMPLES: usize = 1_000_000;
/// Scale factors exercised by the scale check.
pub const SCALE_FACTORS: [f64; 2] = [0.01, 7.3];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub estimate: f64,
    pub target: f64,
    pub standard_error: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsSummary {
    pub checks: Vec<CheckLine>,
    pub truncation_n: usize,
    pub truncation_hits: usize,
    pub truncation_hit_rate: f64,
}

fn check_line(name: String, rep: &MonteCarloReport, pick: impl Fn(&nalgebra::DMatrix<f64>) -> f64) -> Option<CheckLine> {
    let target = rep.target.as_ref()?;
    Some(CheckLine {
        name,
        estimate: pick(&rep.estimate),
        target: pick(target),
        standard_error: rep.max_standard_error(),
        z_score: rep.z_score.unwrap_or(f64::NAN),
    })
}

/// Bias and inverse-moment Monte Carlo checks plus a truncation audit, all
/// seeded from the config's master seed.
///
/// The bias check uses Σ* = I_d for each `d` in the grid (default 10); the
/// audit runs one pipeline at the first grid point (defaults N = 20000,
/// d = 50, r = 9) with policy m and τ.
pub fn run_diagnostics(cfg: &ExperimentConfig) -> Result<DiagnosticsSummary> {
    let id = ExperimentKind::Diagnostics.as_str();
    let noise = cfg.noise()?;
    let dims = if cfg.grid.d.is_empty() { vec![10] } else { cfg.grid.d.clone() };
    let mut checks = Vec::new();
    for &d in &dims {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_trial_seed(cfg.master_seed, id, &[1, d as u64]));
        let eye = MetricMatrix::new(crate::linalg::SymMatrix::identity(d))?;
        let mean_diag = |m: &nalgebra::DMatrix<f64>| m.diagonal().mean();
        let rep = bias_monte_carlo(&eye, &noise, DIAGNOSTIC_SAMPLES, &mut rng)?;
        checks.extend(check_line(format!("bias_noisy_d{d}"), &rep, mean_diag));
        let rep = bias_monte_carlo(&eye, &NoiseModel::none(cfg.y)?, DIAGNOSTIC_SAMPLES, &mut rng)?;
        checks.extend(check_line(format!("bias_noiseless_d{d}"), &rep, mean_diag));
        for p in [1, 4] {
            match inverse_moment_check(d, p, DIAGNOSTIC_SAMPLES, &mut rng) {
                Ok(rep) => checks.extend(check_line(format!("inverse_moment_d{d}_p{p}"), &rep, |m| m[(0, 0)])),
                Err(Error::InvalidDim { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }

    let total = cfg.grid.n.first().copied().unwrap_or(20_000);
    let d = cfg.grid.d.first().copied().unwrap_or(50);
    let r = cfg.grid.r.first().copied().unwrap_or(9);
    if r > d {
        return Err(Error::Config(format!("rank {r} exceeds dimension {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_trial_seed(cfg.master_seed, id, &[2, total as u64, d as u64, r as u64]));
    let sigma = generate_metric_orthonormal(d, r, &mut rng)?;
    let m = cfg.grid.m.first().copied().unwrap_or_else(|| choose_m(&noise, total, d));
    let policy = policy_with_m(&SpectrumSummary::from_metric(&sigma)?, &noise, total, d, m, cfg.lambda_scale())?;
    let out = run_pipeline(&sigma, &PipelineConfig::new(total, m, policy.tau, noise)?, &mut rng)?;
    let audit = truncation_audit(&out)?;
    Ok(DiagnosticsSummary {
        checks,
        truncation_n: audit.n,
        truncation_hits: audit.hits,
        truncation_hit_rate: audit.hit_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleLine {
    pub c: f64,
    pub relative_deviation: f64,
}

/// Duplicated-randomness scale check at each of [`SCALE_FACTORS`], using the
/// first grid point (defaults N = 2000, d = 20, r = 10).
pub fn run_scale_check(cfg: &ExperimentConfig) -> Result<Vec<ScaleLine>> {
    let total = cfg.grid.n.first().copied().unwrap_or(2000);
    let d = cfg.grid.d.first().copied().unwrap_or(20);
    let r = cfg.grid.r.first().copied().unwrap_or(10);
    if r > d {
        return Err(Error::Config(format!("rank {r} exceeds dimension {d}")));
    }
    let noise = cfg.noise()?;
    let seed = derive_trial_seed(cfg.master_seed, ExperimentKind::ScaleCheck.as_str(), &[total as u64, d as u64, r as u64]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scenario = ScaleScenario {
        sigma: generate_metric_orthonormal(d, r, &mut rng)?,
        noise,
        total,
        m: cfg.grid.m.first().copied().unwrap_or_else(|| choose_m(&noise, total, d)),
        c1_scale: cfg.lambda_scale(),
        seed: derive_trial_seed(seed, "data", &[]),
        solver: SolverConfig::smooth(0.0),
    };
    SCALE_FACTORS
        .iter()
        .map(|&c| Ok(ScaleLine { c, relative_deviation: scale_equivariance_check(&scenario, c)? }))
        .collect()
}
