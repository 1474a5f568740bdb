//! Experiment configuration files (TOML) and the bundled recipes.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tcmem_core::{Basis, ClassNoise, CorrelatedSpec, Decay, NoiseSpec, Structure};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoundsRule {
    Fixed(usize),
    /// `2·d` rounds at distance `d`.
    TwoD,
}

impl RoundsRule {
    pub fn rounds(self, distance: usize) -> usize {
        match self {
            RoundsRule::Fixed(n) => n,
            RoundsRule::TwoD => 2 * distance,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RoundsRepr {
    Fixed(usize),
    Rule(String),
}

impl Serialize for RoundsRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            RoundsRule::Fixed(n) => RoundsRepr::Fixed(n),
            RoundsRule::TwoD => RoundsRepr::Rule("2d".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RoundsRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match RoundsRepr::deserialize(d)? {
            RoundsRepr::Fixed(0) => Err(serde::de::Error::custom("rounds must be at least 1")),
            RoundsRepr::Fixed(n) => Ok(RoundsRule::Fixed(n)),
            RoundsRepr::Rule(s) if s == "2d" => Ok(RoundsRule::TwoD),
            RoundsRepr::Rule(s) => Err(serde::de::Error::custom(format!("rounds must be an integer or \"2d\", got {s:?}"))),
        }
    }
}

impl fmt::Display for RoundsRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoundsRule::Fixed(n) => write!(f, "{n}"),
            RoundsRule::TwoD => f.write_str("2d"),
        }
    }
}

/// A decay exponent; written as `"inf"` when infinite so that it survives
/// JSON.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent(pub f64);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExponentRepr {
    Number(f64),
    Text(String),
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            ExponentRepr::Text("inf".into()).serialize(s)
        } else {
            ExponentRepr::Number(self.0).serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match ExponentRepr::deserialize(d)? {
            ExponentRepr::Number(x) => Ok(Exponent(x)),
            ExponentRepr::Text(s) if s == "inf" || s == "infinity" => Ok(Exponent(f64::INFINITY)),
            ExponentRepr::Text(s) => Err(serde::de::Error::custom(format!("bad exponent {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureName {
    Pairwise,
    Streaky,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayName {
    Polynomial,
    Exponential,
}

/// Noise for one error class, as written in a config file.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ClassConfig {
    #[default]
    None,
    Independent { p: f64 },
    Correlated {
        structure: StructureName,
        decay: DecayName,
        #[serde(rename = "A")]
        amplitude: f64,
        exponent: Exponent,
        p: f64,
    },
}

impl ClassConfig {
    pub fn to_class_noise(self) -> ClassNoise {
        match self {
            ClassConfig::None => ClassNoise::None,
            ClassConfig::Independent { p } => ClassNoise::Independent(p),
            ClassConfig::Correlated {
                structure,
                decay,
                amplitude,
                exponent,
                p,
            } => ClassNoise::Correlated(CorrelatedSpec {
                structure: match structure {
                    StructureName::Pairwise => Structure::Pairwise,
                    StructureName::Streaky => Structure::Streaky,
                },
                decay: match decay {
                    DecayName::Polynomial => Decay::Polynomial,
                    DecayName::Exponential => Decay::Exponential,
                },
                amplitude,
                exponent: exponent.0,
                p,
            }),
        }
    }

    /// The same class with its characteristic rate replaced by `p`.
    pub fn with_p(self, new_p: f64) -> Self {
        match self {
            ClassConfig::None => ClassConfig::None,
            ClassConfig::Independent { .. } => ClassConfig::Independent { p: new_p },
            ClassConfig::Correlated {
                structure,
                decay,
                amplitude,
                exponent,
                ..
            } => ClassConfig::Correlated {
                structure,
                decay,
                amplitude,
                exponent,
                p: new_p,
            },
        }
    }

    pub fn p(self) -> Option<f64> {
        match self {
            ClassConfig::None => None,
            ClassConfig::Independent { p } | ClassConfig::Correlated { p, .. } => Some(p),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub class0: ClassConfig,
    #[serde(default)]
    pub class1: ClassConfig,
    #[serde(default)]
    pub class2: ClassConfig,
}

impl NoiseConfig {
    pub fn to_spec(&self) -> NoiseSpec {
        NoiseSpec {
            classes: [
                self.class0.to_class_noise(),
                self.class1.to_class_noise(),
                self.class2.to_class_noise(),
            ],
        }
    }

    /// Every class that has noise moved to rate `p`; amplitudes are kept.
    pub fn with_p(&self, p: f64) -> Self {
        NoiseConfig {
            class0: self.class0.with_p(p),
            class1: self.class1.with_p(p),
            class2: self.class2.with_p(p),
        }
    }

    /// Every correlated class switched to `structure`.
    pub fn with_structure(&self, structure: StructureName) -> Self {
        let switch = |c: ClassConfig| match c {
            ClassConfig::Correlated {
                decay,
                amplitude,
                exponent,
                p,
                ..
            } => ClassConfig::Correlated {
                structure,
                decay,
                amplitude,
                exponent,
                p,
            },
            other => other,
        };
        NoiseConfig {
            class0: switch(self.class0),
            class1: switch(self.class1),
            class2: switch(self.class2),
        }
    }

    /// The first correlated class's model moved to `class` (0, 1 or 2), with
    /// the other two classes independent at the same rate. Class 2 gets half
    /// the amplitude of classes 0 and 1.
    pub fn with_correlated_class(&self, class: usize) -> Result<Self> {
        if class > 2 {
            bail!("error class must be 0, 1 or 2, got {class}");
        }
        let classes = [self.class0, self.class1, self.class2];
        let Some((from, &ClassConfig::Correlated { structure, decay, amplitude, exponent, p })) = classes
            .iter()
            .enumerate()
            .find(|(_, c)| matches!(c, ClassConfig::Correlated { .. }))
        else {
            bail!("no correlated class to move");
        };
        let base = if from == 2 { 2.0 * amplitude } else { amplitude };
        let mut out = [ClassConfig::Independent { p }; 3];
        out[class] = ClassConfig::Correlated {
            structure,
            decay,
            amplitude: if class == 2 { base / 2.0 } else { base },
            exponent,
            p,
        };
        Ok(NoiseConfig {
            class0: out[0],
            class1: out[1],
            class2: out[2],
        })
    }

    /// The characteristic rate shared by the classes, if they agree.
    pub fn common_p(&self) -> Option<f64> {
        let ps: Vec<f64> = [self.class0, self.class1, self.class2].iter().filter_map(|c| c.p()).collect();
        match ps.split_first() {
            Some((&first, rest)) if rest.iter().all(|&p| p == first) => Some(first),
            None => Some(0.0),
            _ => None,
        }
    }
}

fn default_distances() -> Vec<usize> {
    vec![3, 5, 7]
}

fn default_rounds() -> RoundsRule {
    RoundsRule::TwoD
}

fn default_basis() -> String {
    "Z".into()
}

fn default_shots() -> usize {
    100_000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_distances")]
    pub distances: Vec<usize>,
    #[serde(default = "default_rounds")]
    pub rounds: RoundsRule,
    #[serde(default = "default_basis")]
    pub basis: String,
    #[serde(default = "default_shots")]
    pub shots: usize,
    #[serde(default)]
    pub seed: u64,
    /// When present, every noisy class is run at each of these rates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_sweep: Option<Vec<f64>>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Also write same-site detector autocorrelation matrices.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub autocorrelation: bool,
    #[serde(default)]
    pub noise: NoiseConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            distances: default_distances(),
            rounds: default_rounds(),
            basis: default_basis(),
            shots: default_shots(),
            seed: 0,
            p_sweep: None,
            output_dir: default_output_dir(),
            workers: None,
            autocorrelation: false,
            noise: NoiseConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).context("invalid experiment config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn basis(&self) -> Result<Basis> {
        Ok(self.basis.parse()?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.distances.is_empty() {
            bail!("no distances given");
        }
        if let Some(&d) = self.distances.iter().find(|&&d| d < 3 || d % 2 == 0) {
            bail!("distance {d} must be odd and at least 3");
        }
        self.basis()?;
        if let Some(sweep) = &self.p_sweep {
            if sweep.is_empty() {
                bail!("p_sweep is empty");
            }
            if let Some(p) = sweep.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                bail!("p_sweep value {p} outside [0, 1]");
            }
        }
        if self.workers == Some(0) {
            bail!("workers must be at least 1");
        }
        self.noise.to_spec().validate()?;
        Ok(())
    }

    /// The noise configurations to run: one per `p_sweep` value, or the
    /// configured noise as is.
    pub fn noise_points(&self) -> Vec<(f64, NoiseConfig)> {
        match &self.p_sweep {
            Some(sweep) => sweep.iter().map(|&p| (p, self.noise.with_p(p))).collect(),
            None => vec![(self.noise.common_p().unwrap_or(f64::NAN), self.noise)],
        }
    }

    /// Multiplies the shot count by `scale` (at least one shot).
    pub fn scaled(mut self, scale: f64) -> Self {
        self.shots = ((self.shots as f64 * scale).round() as usize).max(1);
        self
    }
}

/// Bundled reproduction recipes, by name.
pub const RECIPES: [(&str, &str); 5] = [
    ("fig3_pairwise", include_str!("../../../recipes/fig3_pairwise.toml")),
    ("fig3_streaky", include_str!("../../../recipes/fig3_streaky.toml")),
    ("fig4_threshold", include_str!("../../../recipes/fig4_threshold.toml")),
    ("fig5_sweep", include_str!("../../../recipes/fig5_sweep.toml")),
    ("fig6_autocorr", include_str!("../../../recipes/fig6_autocorr.toml")),
];

pub fn recipe(name: &str) -> Result<ExperimentConfig> {
    match RECIPES.iter().find(|(n, _)| *n == name) {
        Some((_, text)) => ExperimentConfig::from_toml(text).with_context(|| format!("recipe {name}")),
        None => {
            let names: Vec<&str> = RECIPES.iter().map(|r| r.0).collect();
            bail!("unknown recipe {name:?}; available: {}", names.join(", "))
        }
    }
}
