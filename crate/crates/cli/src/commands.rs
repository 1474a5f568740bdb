//! Command-line interface.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tcmem_core::{
    autocorrelation, build_dem, build_event_catalog, build_layout, build_memory_circuit, fit,
    logical_error_rate, marginalize_catalog, threshold_estimate, Basis, Decoder,
    DetectorErrorModel, FitModel, NoiseSpec, ShotBatch,
};

use crate::config::{recipe, ClassConfig, ExperimentConfig, NoiseConfig, RoundsRule, StructureName};
use crate::experiment::{curves, fit_summary, run_experiment, threshold_summary, Arm, Prepared, Row};

#[derive(Parser, Debug)]
#[command(name = "tcmem", version, about = "Surface-code memory under temporally correlated noise")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "TCMEM_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the gate listing and detector map of a memory circuit.
    Circuit(CircuitArgs),
    /// Write the detector error model of the marginalized noise.
    Dem(NoiseArgs),
    /// Write per-location marginal error probabilities.
    Marginals(NoiseArgs),
    /// Sample detection events.
    Sample(SampleArgs),
    /// Decode detection events with a detector error model.
    Decode(DecodeArgs),
    /// Fit scaling laws, estimate thresholds or compute autocorrelations.
    Analyze(AnalyzeArgs),
    /// Run a full experiment from a config file or bundled recipe.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
pub struct CircuitArgs {
    #[arg(long, visible_alias = "d")]
    pub distance: usize,
    #[arg(long)]
    pub rounds: usize,
    #[arg(long, default_value = "Z")]
    pub basis: Basis,
    /// Listing file (default: stdout, followed by the detector map).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Detector map file (default: next to `--out` with a `.detectors` suffix).
    #[arg(long)]
    pub detector_map: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct NoiseArgs {
    #[arg(long, visible_alias = "d")]
    pub distance: usize,
    #[arg(long)]
    pub rounds: usize,
    #[arg(long, default_value = "Z")]
    pub basis: Basis,
    /// Config file whose `[noise]` tables are used (default: standard
    /// independent noise at `--p`).
    #[arg(long)]
    pub noise_config: Option<PathBuf>,
    /// Characteristic error rate; overrides the config's rates.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl NoiseArgs {
    fn noise(&self) -> Result<NoiseSpec> {
        let config = match &self.noise_config {
            Some(path) => ExperimentConfig::load(path)?.noise,
            None => NoiseConfig {
                class0: ClassConfig::Independent { p: 1e-3 },
                class1: ClassConfig::Independent { p: 1e-3 },
                class2: ClassConfig::Independent { p: 1e-3 },
            },
        };
        let config = match self.p {
            Some(p) => config.with_p(p),
            None => config,
        };
        let spec = config.to_spec();
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ArmArg {
    Correlated,
    Marginal,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, default_value_t = 100_000)]
    pub shots: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample the correlated catalog or its marginalized independent model.
    #[arg(long, value_enum, default_value = "correlated")]
    pub arm: ArmArg,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    #[arg(long)]
    pub dem: PathBuf,
    /// Detection events, text or binary (detected from the first byte).
    #[arg(long)]
    pub events: PathBuf,
    /// Predictions file, one bit per line (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON (default: stderr).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FitArg {
    Exponential,
    Powerlaw,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Fit `p_round` against `d`. The input is either an experiment CSV or
    /// lines of `d p_round`.
    #[arg(long, value_enum)]
    pub fit: Option<FitArg>,
    /// Estimate thresholds from an experiment CSV with several rates.
    #[arg(long)]
    pub threshold: bool,
    /// Autocorrelation of a detection-event file; needs the circuit flags.
    #[arg(long)]
    pub autocorr: bool,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, visible_alias = "d")]
    pub distance: Option<usize>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, default_value = "Z")]
    pub basis: Basis,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[arg(long, conflicts_with = "recipe", required_unless_present = "recipe")]
    pub noise_config: Option<PathBuf>,
    /// One of the bundled recipes (fig3_pairwise, fig3_streaky,
    /// fig4_threshold, fig5_sweep, fig6_autocorr).
    #[arg(long)]
    pub recipe: Option<String>,
    /// Multiplies the shot count.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Replaces the distance list (repeatable).
    #[arg(long, visible_alias = "d")]
    pub distance: Vec<usize>,
    /// Fixed round count (default: the config's rule).
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Runs a single rate instead of the config's.
    #[arg(long)]
    pub p: Option<f64>,
    /// Switches every correlated class to this structure.
    #[arg(long, value_enum)]
    pub structure: Option<StructureArg>,
    /// Moves the correlations to this error class (0, 1 or 2).
    #[arg(long)]
    pub correlated_class: Option<usize>,
    /// Output directory (default: the config's `output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StructureArg {
    Pairwise,
    Streaky,
}

impl ExperimentArgs {
    pub fn config(&self) -> Result<ExperimentConfig> {
        let mut config = match (&self.noise_config, &self.recipe) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => recipe(name)?,
            (None, None) => bail!("give --noise-config or --recipe"),
        };
        if !(self.scale > 0.0) {
            bail!("--scale must be positive");
        }
        config = config.scaled(self.scale);
        if !self.distance.is_empty() {
            config.distances = self.distance.clone();
        }
        if let Some(n) = self.rounds {
            config.rounds = RoundsRule::Fixed(n);
        }
        if let Some(s) = self.shots {
            config.shots = s;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(p) = self.p {
            config.p_sweep = None;
            config.noise = config.noise.with_p(p);
        }
        if let Some(s) = self.structure {
            config.noise = config.noise.with_structure(match s {
                StructureArg::Pairwise => StructureName::Pairwise,
                StructureArg::Streaky => StructureName::Streaky,
            });
        }
        if let Some(c) = self.correlated_class {
            config.noise = config.noise.with_correlated_class(c)?;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            Ok(stdout.flush()?)
        }
    }
}

fn read_events(path: &Path, detectors: usize) -> Result<ShotBatch> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let batch = if bytes.first() == Some(&0xDE) {
        ShotBatch::from_binary(&bytes)?
    } else {
        ShotBatch::from_text(std::str::from_utf8(&bytes).context("events file is not text")?, detectors)?
    };
    if batch.detector_count() != detectors {
        bail!("events have {} detectors, expected {detectors}", batch.detector_count());
    }
    Ok(batch)
}

#[derive(Serialize)]
struct DecodeSummary {
    failures: u64,
    shots: usize,
    #[serde(rename = "p_L")]
    p_l: f64,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Circuit(a) => {
            let c = build_memory_circuit(&build_layout(a.distance)?, a.rounds, a.basis)?;
            match &a.out {
                Some(out) => {
                    emit(Some(out), c.listing().as_bytes())?;
                    let map = a.detector_map.clone().unwrap_or_else(|| {
                        let mut p = out.clone().into_os_string();
                        p.push(".detectors");
                        p.into()
                    });
                    emit(Some(&map), c.detector_map().as_bytes())?;
                }
                None => {
                    emit(None, c.listing().as_bytes())?;
                    match &a.detector_map {
                        Some(map) => emit(Some(map), c.detector_map().as_bytes())?,
                        None => emit(None, c.detector_map().as_bytes())?,
                    }
                }
            }
        }
        Command::Dem(a) => {
            let c = build_memory_circuit(&build_layout(a.distance)?, a.rounds, a.basis)?;
            let m = marginalize_catalog(&c, &build_event_catalog(&c, &a.noise()?)?)?;
            emit(a.out.as_deref(), build_dem(&c, &m)?.to_text().as_bytes())?;
        }
        Command::Marginals(a) => {
            let c = build_memory_circuit(&build_layout(a.distance)?, a.rounds, a.basis)?;
            let m = marginalize_catalog(&c, &build_event_catalog(&c, &a.noise()?)?)?;
            emit(a.out.as_deref(), m.to_table().as_bytes())?;
        }
        Command::Sample(a) => {
            let n = &a.noise;
            let prepared = Prepared::new(n.distance, n.rounds, n.basis, &n.noise()?)?;
            let arm = match a.arm {
                ArmArg::Correlated => Arm::Correlated,
                ArmArg::Marginal => Arm::Marginal,
            };
            let batch = prepared.sampler(arm).sample(a.shots, a.seed);
            let bytes = match a.format {
                Format::Text => batch.to_text().into_bytes(),
                Format::Binary => batch.to_binary()?,
            };
            emit(n.out.as_deref(), &bytes)?;
        }
        Command::Decode(a) => {
            let text = std::fs::read_to_string(&a.dem).with_context(|| format!("reading {}", a.dem.display()))?;
            let dem = DetectorErrorModel::from_text(&text)?;
            let batch = read_events(&a.events, dem.detector_count)?;
            let predictions = Decoder::from_dem(&dem)?.decode_batch(&batch)?;
            let (failures, p_l) = logical_error_rate(&batch, &predictions)?;
            let mut lines = String::with_capacity(2 * predictions.len());
            for p in &predictions {
                lines.push(if *p { '1' } else { '0' });
                lines.push('\n');
            }
            emit(a.out.as_deref(), lines.as_bytes())?;
            let summary = serde_json::to_string_pretty(&DecodeSummary {
                failures,
                shots: batch.shot_count(),
                p_l,
            })?;
            match &a.summary {
                Some(path) => emit(Some(path), format!("{summary}\n").as_bytes())?,
                None => eprintln!("{summary}"),
            }
        }
        Command::Analyze(a) => analyze(&a)?,
        Command::Experiment(a) => {
            let config = a.config()?;
            let report = run_experiment(&config, |r: &Row| {
                eprintln!(
                    "d={} rounds={} {} p={} failures={}/{} p_round={:.3e}",
                    r.d, r.rounds, r.model, r.p, r.failures, r.shots, r.p_round
                );
            })?;
            report.write(&config.output_dir)?;
            eprintln!("wrote {}", config.output_dir.display());
        }
    }
    Ok(())
}

/// Parses `(d, model, p, p_round, p_L)` from an experiment CSV, or `(d,
/// p_round)` lines.
fn read_points(text: &str) -> Result<Vec<(usize, String, f64, f64)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let Some(first) = lines.next() else {
        bail!("no data");
    };
    if first.starts_with("d,") {
        let cols: Vec<&str> = first.split(',').collect();
        let col = |name: &str| cols.iter().position(|c| *c == name).with_context(|| format!("missing column {name}"));
        let (cd, cm, cp, cr) = (col("d")?, col("model")?, col("p")?, col("p_round")?);
        lines
            .enumerate()
            .map(|(i, l)| {
                let f: Vec<&str> = l.split(',').collect();
                let get = |c: usize| f.get(c).copied().with_context(|| format!("row {}: too few fields", i + 2));
                Ok((get(cd)?.parse()?, get(cm)?.to_string(), get(cp)?.parse()?, get(cr)?.parse()?))
            })
            .collect()
    } else {
        std::iter::once(first)
            .chain(lines)
            .map(|l| {
                let f: Vec<&str> = l.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
                let [d, y] = f[..] else {
                    bail!("expected `d p_round`, got {l:?}");
                };
                Ok((d.parse()?, "data".to_string(), f64::NAN, y.parse()?))
            })
            .collect()
    }
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let modes = [a.fit.is_some(), a.threshold, a.autocorr].iter().filter(|&&m| m).count();
    if modes != 1 {
        bail!("choose exactly one of --fit, --threshold, --autocorr");
    }
    if a.autocorr {
        let (Some(d), Some(n)) = (a.distance, a.rounds) else {
            bail!("--autocorr needs --distance and --rounds");
        };
        let c = build_memory_circuit(&build_layout(d)?, n, a.basis)?;
        let batch = read_events(&a.input, c.detector_count())?;
        let m = autocorrelation(&batch, c.detectors())?;
        if !m.constant_detectors.is_empty() {
            eprintln!("{} constant detectors counted as uncorrelated", m.constant_detectors.len());
        }
        let mut out = m.to_csv();
        out.push_str("\nseparation,mean\n");
        for (s, v) in m.curve() {
            out.push_str(&format!("{s},{v}\n"));
        }
        return emit(a.out.as_deref(), out.as_bytes());
    }
    let text = std::fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let points = read_points(&text)?;
    let json = match a.fit {
        Some(kind) => {
            let kind = match kind {
                FitArg::Exponential => FitModel::Exponential,
                FitArg::Powerlaw => FitModel::PowerLaw,
            };
            let mut groups: BTreeMap<(String, u64), Vec<(f64, f64)>> = BTreeMap::new();
            for (d, model, p, y) in &points {
                groups.entry((model.clone(), p.to_bits())).or_default().push((*d as f64, *y));
            }
            let fits = groups
                .iter()
                .map(|((model, p), pts)| Ok(fit_summary(model, f64::from_bits(*p), &fit(pts, kind)?)))
                .collect::<Result<Vec<_>>>()?;
            serde_json::to_string_pretty(&fits)?
        }
        None => {
            let mut models: Vec<&str> = points.iter().map(|p| p.1.as_str()).collect();
            models.sort_unstable();
            models.dedup();
            let summaries = models
                .iter()
                .map(|&model| {
                    let c = curves(points.iter().filter(|q| q.1 == model).map(|q| (q.0, q.2, q.3)));
                    Ok(threshold_summary(model, threshold_estimate(&c)?))
                })
                .collect::<Result<Vec<_>>>()?;
            serde_json::to_string_pretty(&summaries)?
        }
    };
    emit(a.out.as_deref(), format!("{json}\n").as_bytes())
}
