//! Error channels, independent and temporally correlated noise, and the
//! event catalog every sampler and marginal computation works from.
//!
//! All noise is expressed as a list of [`ErrorEvent`]s. Each event fires
//! independently with its probability and then picks one Pauli configuration
//! over its sites. An independent channel is a single-site event; a pairwise
//! correlation is a two-site event spanning two rounds; a streak is an event
//! over every round it covers.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::circuit::{ErrorClass, MemoryCircuit};
use crate::error::{invalid, Error, Result};
use crate::pauli::Pauli;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelKind {
    /// X with probability p.
    BitFlip,
    /// X, Y, Z each with probability p/3.
    Depol1,
    /// Each of the 15 non-identity two-qubit Paulis with probability p/15.
    Depol2,
}

impl ChannelKind {
    pub fn qubits(self) -> usize {
        match self {
            ChannelKind::Depol2 => 2,
            _ => 1,
        }
    }

    /// Number of Pauli bits a site of this channel can carry.
    pub fn site_bits(self) -> u32 {
        match self {
            ChannelKind::BitFlip => 1,
            ChannelKind::Depol1 => 2,
            ChannelKind::Depol2 => 4,
        }
    }

    /// Non-identity Paulis the channel applies.
    pub fn support(self) -> Vec<Pauli> {
        match self {
            ChannelKind::BitFlip => vec![Pauli::X],
            ChannelKind::Depol1 => Pauli::non_identity(1).collect(),
            ChannelKind::Depol2 => Pauli::non_identity(2).collect(),
        }
    }

    pub fn support_size(self) -> usize {
        (1 << self.site_bits()) - 1
    }

    /// Pauli for a packed site value of `site_bits` bits.
    pub fn pauli(self, value: u8) -> Pauli {
        Pauli::from_bits(value, self.qubits() as u8)
    }

    /// Ratio between the twirled fidelity parameter and the error probability:
    /// composing channels multiplies `1 - c·p`.
    pub fn twirl_factor(self) -> f64 {
        match self {
            ChannelKind::BitFlip => 2.0,
            ChannelKind::Depol1 => 4.0 / 3.0,
            ChannelKind::Depol2 => 16.0 / 15.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::BitFlip => "bitflip1",
            ChannelKind::Depol1 => "depol1",
            ChannelKind::Depol2 => "depol2",
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bitflip1" => Ok(ChannelKind::BitFlip),
            "depol1" => Ok(ChannelKind::Depol1),
            "depol2" => Ok(ChannelKind::Depol2),
            other => Err(invalid(format!("unknown channel {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Channel {
    pub kind: ChannelKind,
    pub p: f64,
}

impl Channel {
    pub fn new(kind: ChannelKind, p: f64) -> Result<Self> {
        check_probability(p)?;
        Ok(Channel { kind, p })
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!("probability {p} outside [0, 1]")))
    }
}

/// Draws one Pauli from `channel`: identity with probability `1 - p`,
/// otherwise uniform over the channel's non-identity support.
pub fn sample_channel<R: Rng + ?Sized>(channel: Channel, rng: &mut R) -> Pauli {
    let kind = channel.kind;
    if rng.gen::<f64>() >= channel.p {
        return Pauli::identity(kind.qubits() as u8);
    }
    let value = rng.gen_range(1..=kind.support_size() as u8);
    kind.pauli(value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Structure {
    Pairwise,
    Streaky,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decay {
    /// `A·p / Δt^n`
    Polynomial,
    /// `A·p / n^Δt`
    Exponential,
}

/// Parameters of a temporally correlated model for one error class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelatedSpec {
    pub structure: Structure,
    pub decay: Decay,
    pub amplitude: f64,
    /// Decay parameter `n`; `f64::INFINITY` is allowed.
    pub exponent: f64,
    pub p: f64,
}

impl CorrelatedSpec {
    pub fn validate(&self) -> Result<()> {
        check_probability(self.p)?;
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(invalid(format!("amplitude {} must be >= 0", self.amplitude)));
        }
        if !(self.exponent > 0.0) {
            return Err(invalid(format!("exponent {} must be > 0", self.exponent)));
        }
        Ok(())
    }

    fn raw_probability(&self, dt: u32) -> f64 {
        let dt = f64::from(dt);
        let denom = match self.decay {
            Decay::Polynomial => dt.powf(self.exponent),
            Decay::Exponential => self.exponent.powf(dt),
        };
        self.amplitude * self.p / denom
    }
}

/// Probability of a correlated event whose rounds are `dt` apart (the streak
/// span for streaky models), clipped to `[0, 1]`.
pub fn event_probability(spec: &CorrelatedSpec, dt: u32) -> Result<f64> {
    if dt < 1 {
        return Err(invalid("round separation must be at least 1"));
    }
    spec.validate()?;
    Ok(spec.raw_probability(dt).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClassNoise {
    None,
    /// The class's channel at this rate, independently at every location.
    Independent(f64),
    Correlated(CorrelatedSpec),
}

/// Noise assignment for the three error classes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub classes: [ClassNoise; 3],
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec {
            classes: [ClassNoise::None; 3],
        }
    }

    /// Standard circuit-level noise: every channel at rate `p`.
    pub fn standard(p: f64) -> Self {
        NoiseSpec {
            classes: [ClassNoise::Independent(p); 3],
        }
    }

    /// All three classes correlated with `A_class0 = A_class1 = 2·A_class2 = amplitude`.
    pub fn fully_correlated(
        structure: Structure,
        decay: Decay,
        amplitude: f64,
        exponent: f64,
        p: f64,
    ) -> Self {
        let spec = |a| {
            ClassNoise::Correlated(CorrelatedSpec {
                structure,
                decay,
                amplitude: a,
                exponent,
                p,
            })
        };
        NoiseSpec {
            classes: [spec(amplitude), spec(amplitude), spec(amplitude / 2.0)],
        }
    }

    /// One class correlated, the other two independent at `spec.p`.
    pub fn single_class(class: ErrorClass, spec: CorrelatedSpec) -> Self {
        let mut noise = NoiseSpec::standard(spec.p);
        noise.classes[class.index()] = ClassNoise::Correlated(spec);
        noise
    }

    pub fn class(&self, class: ErrorClass) -> &ClassNoise {
        &self.classes[class.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.classes {
            match c {
                ClassNoise::None => {}
                ClassNoise::Independent(p) => check_probability(*p)?,
                ClassNoise::Correlated(spec) => spec.validate()?,
            }
        }
        Ok(())
    }
}

/// Conditional distribution over Pauli configurations of an event's sites.
#[derive(Clone, Debug, PartialEq)]
pub enum OutcomeDist {
    /// A single configuration with probability 1.
    Fixed(Vec<Pauli>),
    /// Uniform over every configuration except all-identity.
    UniformNonIdentity,
    /// Each site independently uniform over its full Pauli alphabet, identity included.
    IndependentUniform,
}

/// An independently occurring error event with a conditional outcome distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorEvent {
    pub probability: f64,
    /// Channel kind shared by every site.
    pub channel: ChannelKind,
    /// Location indices in the circuit.
    pub sites: Vec<u32>,
    pub outcome: OutcomeDist,
}

impl ErrorEvent {
    /// Single-site event equivalent to `channel` acting at `site`.
    pub fn single(site: u32, channel: Channel) -> Self {
        ErrorEvent {
            probability: channel.p,
            channel: channel.kind,
            sites: vec![site],
            outcome: OutcomeDist::UniformNonIdentity,
        }
    }

    /// Probability, given the event fires, that site number `index` receives a
    /// non-identity Pauli.
    pub fn conditional_error(&self, index: usize) -> f64 {
        let w = self.channel.site_bits() as i32;
        match &self.outcome {
            OutcomeDist::Fixed(paulis) => {
                if paulis[index].is_identity() {
                    0.0
                } else {
                    1.0
                }
            }
            OutcomeDist::UniformNonIdentity => {
                // (2^w - 1)·2^(B-w) / (2^B - 1), written to stay finite for large B.
                let total = w * self.sites.len() as i32;
                (1.0 - 2f64.powi(-w)) / (1.0 - 2f64.powi(-total))
            }
            OutcomeDist::IndependentUniform => 1.0 - 2f64.powi(-w),
        }
    }

    /// Draws a configuration and reports each non-identity `(site, pauli)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, mut emit: impl FnMut(u32, Pauli)) {
        let kind = self.channel;
        let w = kind.site_bits();
        let mask = ((1u16 << w) - 1) as u8;
        match &self.outcome {
            OutcomeDist::Fixed(paulis) => {
                for (&site, &p) in self.sites.iter().zip(paulis) {
                    if !p.is_identity() {
                        emit(site, p);
                    }
                }
            }
            OutcomeDist::UniformNonIdentity => {
                let total = w as usize * self.sites.len();
                if total < 64 {
                    let mut r = rng.gen_range(1..(1u64 << total));
                    for &site in &self.sites {
                        let v = (r as u8) & mask;
                        r >>= w;
                        if v != 0 {
                            emit(site, kind.pauli(v));
                        }
                    }
                } else {
                    // Rejection sampling; all-identity has probability 2^-64 or less.
                    loop {
                        let values: Vec<u8> =
                            self.sites.iter().map(|_| rng.gen::<u8>() & mask).collect();
                        if values.iter().any(|&v| v != 0) {
                            for (&site, v) in self.sites.iter().zip(values) {
                                if v != 0 {
                                    emit(site, kind.pauli(v));
                                }
                            }
                            break;
                        }
                    }
                }
            }
            OutcomeDist::IndependentUniform => {
                for &site in &self.sites {
                    let v = rng.gen::<u8>() & mask;
                    if v != 0 {
                        emit(site, kind.pauli(v));
                    }
                }
            }
        }
    }

    /// Explicit conditional distribution, for events with at most 16 Pauli bits.
    pub fn configurations(&self) -> Option<Vec<(Vec<Pauli>, f64)>> {
        let kind = self.channel;
        let w = kind.site_bits() as usize;
        let total = w * self.sites.len();
        if total > 16 {
            return None;
        }
        let mask = (1u32 << w) - 1;
        let split = |r: u32| -> Vec<Pauli> {
            (0..self.sites.len())
                .map(|i| kind.pauli(((r >> (w * i)) & mask) as u8))
                .collect()
        };
        let count = 1u32 << total;
        Some(match &self.outcome {
            OutcomeDist::Fixed(paulis) => vec![(paulis.clone(), 1.0)],
            OutcomeDist::UniformNonIdentity => (1..count)
                .map(|r| (split(r), 1.0 / f64::from(count - 1)))
                .collect(),
            OutcomeDist::IndependentUniform => {
                (0..count).map(|r| (split(r), 1.0 / f64::from(count))).collect()
            }
        })
    }
}

/// The full list of error events for a circuit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventCatalog {
    pub events: Vec<ErrorEvent>,
    /// Number of correlated events whose probability had to be clipped to 1.
    pub clipped: usize,
}

impl EventCatalog {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Expands a noise assignment into the circuit's event catalog.
///
/// Zero-probability events are omitted, so an exponential decay with infinite
/// exponent contributes nothing.
pub fn build_event_catalog(circuit: &MemoryCircuit, spec: &NoiseSpec) -> Result<EventCatalog> {
    spec.validate()?;
    let mut catalog = EventCatalog::default();
    for class in ErrorClass::ALL {
        let channel = class.channel();
        match *spec.class(class) {
            ClassNoise::None => {}
            ClassNoise::Independent(p) => {
                if p == 0.0 {
                    continue;
                }
                for (id, loc) in circuit.error_locations().iter().enumerate() {
                    if loc.class == class {
                        catalog
                            .events
                            .push(ErrorEvent::single(id as u32, Channel { kind: channel, p }));
                    }
                }
            }
            ClassNoise::Correlated(cs) => {
                for series in circuit.location_series(class) {
                    correlated_events(&mut catalog, class, &cs, &series);
                }
            }
        }
    }
    Ok(catalog)
}

fn correlated_events(catalog: &mut EventCatalog, class: ErrorClass, spec: &CorrelatedSpec, series: &[u32]) {
    let n = series.len();
    for t1 in 0..n {
        for t2 in t1 + 1..n {
            let dt = (t2 - t1) as u32;
            let raw = spec.raw_probability(dt);
            if raw > 1.0 {
                catalog.clipped += 1;
            }
            let probability = raw.clamp(0.0, 1.0);
            if probability == 0.0 {
                continue;
            }
            let (sites, outcome) = match spec.structure {
                Structure::Pairwise => {
                    let outcome = match class {
                        ErrorClass::Class1 => OutcomeDist::Fixed(vec![Pauli::X, Pauli::X]),
                        _ => OutcomeDist::UniformNonIdentity,
                    };
                    (vec![series[t1], series[t2]], outcome)
                }
                Structure::Streaky => (series[t1..=t2].to_vec(), OutcomeDist::IndependentUniform),
            };
            catalog.events.push(ErrorEvent {
                probability,
                channel: class.channel(),
                sites,
                outcome,
            });
        }
    }
}
