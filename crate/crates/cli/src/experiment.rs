//! End-to-end memory experiments: build, sample both arms, decode with the
//! marginalized model, summarize.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use tcmem_core::{
    autocorrelation, build_dem, build_event_catalog, build_layout, build_memory_circuit,
    confidence_interval, fit, marginalize_catalog, per_round_rate, teraquop_distance,
    threshold_estimate, AutocorrMatrix, Basis, Decoder, DetectorErrorModel, EventCatalog,
    FitModel, FitResult, MarginalModel, MemoryCircuit, NoiseSpec, Sampler, ShotBatch, Teraquop,
    ThresholdEstimate,
};

use crate::config::ExperimentConfig;

/// Which noise the detection events are sampled from. Both arms are decoded
/// with the marginalized model's DEM.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Correlated,
    Marginal,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Correlated, Arm::Marginal];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Correlated => "correlated",
            Arm::Marginal => "marginal",
        }
    }

    fn index(self) -> u64 {
        match self {
            Arm::Correlated => 0,
            Arm::Marginal => 1,
        }
    }
}

/// Everything needed to sample and decode one (distance, rounds, noise)
/// point.
pub struct Prepared {
    pub circuit: MemoryCircuit,
    pub catalog: EventCatalog,
    pub marginal: MarginalModel,
    pub dem: DetectorErrorModel,
    pub decoder: Decoder,
    independent: EventCatalog,
}

impl Prepared {
    pub fn new(distance: usize, rounds: usize, basis: Basis, noise: &NoiseSpec) -> Result<Self> {
        let circuit = build_memory_circuit(&build_layout(distance)?, rounds, basis)?;
        let catalog = build_event_catalog(&circuit, noise)?;
        let marginal = marginalize_catalog(&circuit, &catalog)?;
        let dem = build_dem(&circuit, &marginal)?;
        let decoder = Decoder::from_dem(&dem)?;
        // With no noise there are no edges and nothing to decode.
        if !dem.mechanisms.is_empty() {
            decoder.graph().check_connected()?;
        }
        let independent = marginal.to_catalog();
        Ok(Prepared {
            circuit,
            catalog,
            marginal,
            dem,
            decoder,
            independent,
        })
    }

    pub fn sampler(&self, arm: Arm) -> Sampler {
        match arm {
            Arm::Correlated => Sampler::new(&self.circuit, &self.catalog),
            Arm::Marginal => Sampler::new(&self.circuit, &self.independent),
        }
    }

    /// Samples `shots` shots of `arm` and counts decoding failures, one block
    /// at a time.
    pub fn count_failures(&self, arm: Arm, shots: usize, seed: u64) -> Result<u64> {
        let per_block = self.sampler(arm).map_blocks(shots, seed, |_, batch| self.block_failures(&batch));
        let mut total = 0;
        for f in per_block {
            total += f?;
        }
        Ok(total)
    }

    fn block_failures(&self, batch: &ShotBatch) -> Result<u64> {
        let mut failures = 0;
        for (shot, defects) in batch.defects().iter().enumerate() {
            if self.decoder.decode(defects)?.prediction != batch.observable(shot) {
                failures += 1;
            }
        }
        Ok(failures)
    }

    /// Samples and keeps the whole batch, returning it with its failure count.
    pub fn sample_and_decode(&self, arm: Arm, shots: usize, seed: u64) -> Result<(ShotBatch, u64)> {
        let batch = self.sampler(arm).sample(shots, seed);
        let predictions = self.decoder.decode_batch(&batch)?;
        let (failures, _) = tcmem_core::logical_error_rate(&batch, &predictions)?;
        Ok((batch, failures))
    }
}

/// Seed of one job, mixed from the run seed and the job's coordinates so that
/// jobs are independent and order does not matter.
pub fn job_seed(seed: u64, distance: usize, point: usize, arm: Arm) -> u64 {
    let mut z = seed
        ^ (distance as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (point as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ arm.index().wrapping_mul(0x1656_67B1_9E37_79F9);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub d: usize,
    pub rounds: usize,
    pub model: &'static str,
    pub p: f64,
    pub shots: usize,
    pub failures: u64,
    pub p_l: f64,
    pub p_round: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Row {
    pub const HEADER: &'static str = "d,rounds,model,p,shots,failures,p_L,p_round,ci_lo,ci_hi";

    pub fn new(d: usize, rounds: usize, arm: Arm, p: f64, shots: usize, failures: u64) -> Self {
        let p_l = if shots == 0 { 0.0 } else { failures as f64 / shots as f64 };
        let (lo, hi) = confidence_interval(failures, shots as u64);
        Row {
            d,
            rounds,
            model: arm.name(),
            p,
            shots,
            failures,
            p_l,
            p_round: per_round_rate(p_l, rounds),
            ci_lo: per_round_rate(lo, rounds),
            ci_hi: per_round_rate(hi, rounds),
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:e},{:e},{:e},{:e}",
            self.d, self.rounds, self.model, self.p, self.shots, self.failures, self.p_l, self.p_round, self.ci_lo, self.ci_hi
        )
    }
}

pub fn rows_to_csv(rows: &[Row]) -> String {
    let mut out = String::from(Row::HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv());
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct FitSummary {
    pub model: String,
    pub p: f64,
    pub fit: &'static str,
    pub amplitude: f64,
    pub rate: f64,
    pub residual: f64,
    /// Odd distance, or `"none"` / `"unrealistic"`.
    pub teraquop: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdSummary {
    pub model: String,
    /// `None` when no pair of curves crosses.
    pub median: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub crossings: Vec<(u32, u32, f64)>,
}

pub struct AutocorrResult {
    pub d: usize,
    pub p: f64,
    pub arm: Arm,
    pub matrix: AutocorrMatrix,
}

pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<Row>,
    /// `(d, p, clipped events)` for points whose correlated events were clipped.
    pub clipped: Vec<(usize, f64, usize)>,
    pub autocorrelations: Vec<AutocorrResult>,
}

pub fn teraquop_label(t: Teraquop) -> String {
    match t {
        Teraquop::Distance(d) => d.to_string(),
        Teraquop::Unrealistic => "unrealistic".into(),
        Teraquop::Never => "none".into(),
    }
}

pub fn fit_model_name(m: FitModel) -> &'static str {
    match m {
        FitModel::Exponential => "exponential",
        FitModel::PowerLaw => "powerlaw",
    }
}

impl ExperimentReport {
    /// Exponential and power-law fits of `p_round` against `d` for each arm
    /// and noise rate with at least three distances and nonzero rates.
    pub fn fits(&self) -> Vec<FitSummary> {
        let mut out = Vec::new();
        for arm in Arm::BOTH {
            for (p, _) in self.config.noise_points() {
                let points: Vec<(f64, f64)> = self
                    .rows
                    .iter()
                    .filter(|r| r.model == arm.name() && r.p.to_bits() == p.to_bits())
                    .map(|r| (r.d as f64, r.p_round))
                    .collect();
                if points.len() < 3 || points.iter().any(|&(_, y)| y <= 0.0) {
                    continue;
                }
                for model in [FitModel::Exponential, FitModel::PowerLaw] {
                    if let Ok(f) = fit(&points, model) {
                        out.push(fit_summary(arm.name(), p, &f));
                    }
                }
            }
        }
        out
    }

    /// Threshold crossings of `p_round` curves for each arm, when several
    /// rates were swept.
    pub fn thresholds(&self) -> Vec<ThresholdSummary> {
        let mut out = Vec::new();
        if self.config.noise_points().len() < 2 || self.config.distances.len() < 2 {
            return out;
        }
        for arm in Arm::BOTH {
            let curves = curves(
                self.rows
                    .iter()
                    .filter(|r| r.model == arm.name())
                    .map(|r| (r.d, r.p, r.p_round)),
            );
            if let Ok(t) = threshold_estimate(&curves) {
                out.push(threshold_summary(arm.name(), t));
            }
        }
        out
    }

    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            config: &'a ExperimentConfig,
            rows: &'a [Row],
            fits: Vec<FitSummary>,
            thresholds: Vec<ThresholdSummary>,
            clipped_events: Vec<(usize, f64, usize)>,
        }
        Ok(serde_json::to_string_pretty(&Summary {
            config: &self.config,
            rows: &self.rows,
            fits: self.fits(),
            thresholds: self.thresholds(),
            clipped_events: self.clipped.clone(),
        })?)
    }

    /// Writes `results.csv`, `summary.json`, `config.toml` and any
    /// autocorrelation matrices into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let write = |name: &str, text: &str| {
            let path = dir.join(name);
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
        };
        write("results.csv", &rows_to_csv(&self.rows))?;
        write("summary.json", &self.summary_json()?)?;
        write("config.toml", &self.config.to_toml()?)?;
        for a in &self.autocorrelations {
            write(&format!("autocorr_{}_d{}_p{}.csv", a.arm.name(), a.d, a.p), &a.matrix.to_csv())?;
        }
        Ok(())
    }
}

pub fn fit_summary(model: &str, p: f64, f: &FitResult) -> FitSummary {
    FitSummary {
        model: model.to_string(),
        p,
        fit: fit_model_name(f.model),
        amplitude: f.amplitude,
        rate: f.rate,
        residual: f.residual,
        teraquop: teraquop_label(teraquop_distance(f)),
    }
}

pub fn threshold_summary(model: &str, t: ThresholdEstimate) -> ThresholdSummary {
    let model = model.to_string();
    match t {
        ThresholdEstimate::Crossing {
            median,
            min,
            max,
            crossings,
        } => ThresholdSummary {
            model,
            median: Some(median),
            min: Some(min),
            max: Some(max),
            crossings,
        },
        ThresholdEstimate::Open => ThresholdSummary {
            model,
            median: None,
            min: None,
            max: None,
            crossings: Vec::new(),
        },
    }
}

/// Groups `(d, p, y)` points into per-distance `(p, y)` curves.
pub fn curves(points: impl IntoIterator<Item = (usize, f64, f64)>) -> Vec<(u32, Vec<(f64, f64)>)> {
    let mut by_d: std::collections::BTreeMap<u32, Vec<(f64, f64)>> = Default::default();
    for (d, p, y) in points {
        by_d.entry(d as u32).or_default().push((p, y));
    }
    by_d.into_iter().collect()
}

/// Runs every (distance, rate, arm) job of `config`. `progress` sees each row
/// as it completes.
pub fn run_experiment(config: &ExperimentConfig, mut progress: impl FnMut(&Row)) -> Result<ExperimentReport> {
    config.validate()?;
    let basis = config.basis()?;
    let mut rows = Vec::new();
    let mut clipped = Vec::new();
    let mut autocorrelations = Vec::new();
    for (point, (p, noise)) in config.noise_points().into_iter().enumerate() {
        for &d in &config.distances {
            let rounds = config.rounds.rounds(d);
            let prepared = Prepared::new(d, rounds, basis, &noise.to_spec())
                .with_context(|| format!("preparing d={d} p={p}"))?;
            if prepared.catalog.clipped > 0 {
                clipped.push((d, p, prepared.catalog.clipped));
            }
            for arm in Arm::BOTH {
                let seed = job_seed(config.seed, d, point, arm);
                let failures = if config.autocorrelation {
                    let (batch, failures) = prepared.sample_and_decode(arm, config.shots, seed)?;
                    if config.shots >= 2 {
                        autocorrelations.push(AutocorrResult {
                            d,
                            p,
                            arm,
                            matrix: autocorrelation(&batch, prepared.circuit.detectors())?,
                        });
                    }
                    failures
                } else {
                    prepared.count_failures(arm, config.shots, seed)?
                };
                let row = Row::new(d, rounds, arm, p, config.shots, failures);
                progress(&row);
                rows.push(row);
            }
        }
    }
    Ok(ExperimentReport {
        config: config.clone(),
        rows,
        clipped,
        autocorrelations,
    })
}
