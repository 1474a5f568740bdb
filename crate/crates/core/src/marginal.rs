//! Per-location marginals of an event catalog and the temporally independent
//! model that shares them.
//!
//! An event contributes `q_i = P_i · Pr(non-identity at the location | event)`.
//! Restricted to one location each event acts as a symmetric channel of the
//! location's kind, and symmetric channels compose multiplicatively in their
//! twirled parameter `1 - c·q`, so the combined error probability is
//! `(1 - Π(1 - c·q_i)) / c`.

use std::fmt::Write as _;

use crate::circuit::MemoryCircuit;
use crate::error::{Error, Result};
use crate::noise::{Channel, ChannelKind, ErrorEvent, EventCatalog};

/// Above this many contributions at one location the product is accumulated
/// as a sum of logarithms.
const LOG_SPACE_THRESHOLD: usize = 1000;

/// Marginal error probability `q_i` of `event` at `location` (0 if the event
/// does not touch it).
pub fn event_marginal(event: &ErrorEvent, location: u32) -> f64 {
    match event.sites.iter().position(|&s| s == location) {
        Some(i) => event.probability * event.conditional_error(i),
        None => 0.0,
    }
}

/// Running product of `1 - c·q_i` for one location.
#[derive(Clone, Copy, Debug, Default)]
struct Accumulator {
    count: usize,
    first: f64,
    product: f64,
    log_sum: f64,
}

impl Accumulator {
    fn new() -> Self {
        Accumulator {
            count: 0,
            first: 0.0,
            product: 1.0,
            log_sum: 0.0,
        }
    }

    fn push(&mut self, kind: ChannelKind, q: f64, location: Option<usize>) -> Result<()> {
        let t = kind.twirl_factor() * q;
        if t > 1.0 {
            return Err(Error::InvalidMarginal { location, t });
        }
        if self.count == 0 {
            self.first = q;
        }
        self.count += 1;
        self.product *= 1.0 - t;
        self.log_sum += (-t).ln_1p();
        Ok(())
    }

    fn finish(&self, kind: ChannelKind) -> f64 {
        match self.count {
            0 => return 0.0,
            1 => return self.first,
            _ => {}
        }
        let t = if self.count > LOG_SPACE_THRESHOLD {
            -self.log_sum.exp_m1()
        } else {
            1.0 - self.product
        };
        t / kind.twirl_factor()
    }
}

/// Combined error probability of independent contributions `qs` at one
/// location of channel kind `kind`.
pub fn combine_marginals(kind: ChannelKind, qs: &[f64]) -> Result<f64> {
    let mut acc = Accumulator::new();
    for &q in qs {
        acc.push(kind, q, None)?;
    }
    Ok(acc.finish(kind))
}

/// Error probability at every location of a circuit, indexed by location id.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalModel {
    kinds: Vec<ChannelKind>,
    probabilities: Vec<f64>,
}

impl MarginalModel {
    pub fn new(kinds: Vec<ChannelKind>, probabilities: Vec<f64>) -> Result<Self> {
        if kinds.len() != probabilities.len() {
            return Err(Error::InvalidInput("kinds and probabilities differ in length".into()));
        }
        if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidInput(format!("marginal probability {p} outside [0, 1]")));
        }
        Ok(MarginalModel { kinds, probabilities })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probability(&self, location: u32) -> f64 {
        self.probabilities[location as usize]
    }

    pub fn kind(&self, location: u32) -> ChannelKind {
        self.kinds[location as usize]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// The independent model as single-site events, for sampling.
    pub fn to_catalog(&self) -> EventCatalog {
        let events = self
            .kinds
            .iter()
            .zip(&self.probabilities)
            .enumerate()
            .filter(|(_, (_, &p))| p > 0.0)
            .map(|(id, (&kind, &p))| ErrorEvent::single(id as u32, Channel { kind, p }))
            .collect();
        EventCatalog { events, clipped: 0 }
    }

    /// Text table, one line per location: `LOCATION-ID channel p`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (id, (kind, p)) in self.kinds.iter().zip(&self.probabilities).enumerate() {
            let _ = writeln!(out, "{id} {kind} {p:e}");
        }
        out
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut kinds = Vec::new();
        let mut probabilities = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [id, kind, p] = fields[..] else {
                return Err(err("expected `LOCATION-ID channel p`".into()));
            };
            let id: usize = id.parse().map_err(|_| err(format!("bad location id {id:?}")))?;
            if id != kinds.len() {
                return Err(err(format!("expected location {}, found {id}", kinds.len())));
            }
            kinds.push(kind.parse().map_err(|e: Error| err(e.to_string()))?);
            let p: f64 = p.parse().map_err(|_| err(format!("bad probability {p:?}")))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(err(format!("probability {p} outside [0, 1]")));
            }
            probabilities.push(p);
        }
        Ok(MarginalModel { kinds, probabilities })
    }
}

/// Marginal model of `catalog` on `circuit`'s locations.
pub fn marginalize_catalog(circuit: &MemoryCircuit, catalog: &EventCatalog) -> Result<MarginalModel> {
    let locations = circuit.error_locations();
    let kinds: Vec<ChannelKind> = locations.iter().map(|l| l.channel).collect();
    let mut acc = vec![Accumulator::new(); locations.len()];
    for event in &catalog.events {
        for (i, &site) in event.sites.iter().enumerate() {
            let kind = *kinds.get(site as usize).ok_or_else(|| {
                Error::InvalidInput(format!("event site {site} is not a location of the circuit"))
            })?;
            if kind != event.channel {
                return Err(Error::InvalidInput(format!(
                    "event channel {} does not match location {site} channel {kind}",
                    event.channel
                )));
            }
            let q = event.probability * event.conditional_error(i);
            acc[site as usize].push(kind, q, Some(site as usize))?;
        }
    }
    let probabilities = acc.iter().zip(&kinds).map(|(a, &k)| a.finish(k)).collect();
    Ok(MarginalModel { kinds, probabilities })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_layout, build_memory_circuit, Basis, ErrorClass};
    use crate::noise::{build_event_catalog, ClassNoise, CorrelatedSpec, Decay, NoiseSpec, OutcomeDist, Structure};
    use crate::pauli::Pauli;

    #[test]
    fn event_marginal_examples() {
        let class1 = ErrorEvent {
            probability: 1e-3,
            channel: ChannelKind::BitFlip,
            sites: vec![4, 9],
            outcome: OutcomeDist::Fixed(vec![Pauli::X, Pauli::X]),
        };
        assert_eq!(event_marginal(&class1, 4), 1e-3);
        assert_eq!(event_marginal(&class1, 9), 1e-3);
        assert_eq!(event_marginal(&class1, 5), 0.0);
        let class0 = ErrorEvent {
            probability: 1e-3,
            channel: ChannelKind::Depol1,
            sites: vec![4, 9],
            outcome: OutcomeDist::UniformNonIdentity,
        };
        assert!((event_marginal(&class0, 9) - 8e-4).abs() < 1e-15);
        let zero = ErrorEvent { probability: 0.0, ..class0 };
        assert_eq!(event_marginal(&zero, 4), 0.0);
    }

    #[test]
    fn combine_examples() {
        assert!((combine_marginals(ChannelKind::BitFlip, &[0.1, 0.1]).unwrap() - 0.18).abs() < 1e-12);
        assert_eq!(combine_marginals(ChannelKind::Depol2, &[0.0123]).unwrap(), 0.0123);
        assert!((combine_marginals(ChannelKind::Depol1, &[0.15, 0.15]).unwrap() - 0.27).abs() < 1e-12);
        assert!(matches!(
            combine_marginals(ChannelKind::BitFlip, &[0.6]),
            Err(Error::InvalidMarginal { .. })
        ));
    }

    #[test]
    fn log_space_agrees_with_product() {
        let qs = vec![1e-4; 1500];
        let p = combine_marginals(ChannelKind::Depol1, &qs).unwrap();
        let c = 4.0 / 3.0;
        let direct = (1.0 - (1.0 - c * 1e-4f64).powi(1500)) / c;
        assert!((p - direct).abs() < 1e-12);
    }

    #[test]
    fn independent_catalog_is_identity() {
        let c = build_memory_circuit(&build_layout(3).unwrap(), 3, Basis::Z).unwrap();
        let cat = build_event_catalog(&c, &NoiseSpec::standard(1e-3)).unwrap();
        let m = marginalize_catalog(&c, &cat).unwrap();
        assert!(m.probabilities().iter().all(|&p| p == 1e-3));
        // Idempotence: the model's own catalog marginalizes back to itself.
        assert_eq!(marginalize_catalog(&c, &m.to_catalog()).unwrap(), m);
    }

    #[test]
    fn pairwise_middle_rounds_are_worst() {
        let n = 8;
        let c = build_memory_circuit(&build_layout(3).unwrap(), n, Basis::Z).unwrap();
        let spec = CorrelatedSpec {
            structure: Structure::Pairwise,
            decay: Decay::Polynomial,
            amplitude: 1.0,
            exponent: 2.0,
            p: 1e-3,
        };
        let mut noise = NoiseSpec::none();
        noise.classes[1] = ClassNoise::Correlated(spec);
        let m = marginalize_catalog(&c, &build_event_catalog(&c, &noise).unwrap()).unwrap();
        let series = &c.location_series(ErrorClass::Class1)[0];
        let rates: Vec<f64> = series.iter().map(|&l| m.probability(l)).collect();
        let mid = rates[n / 2 - 1].max(rates[n / 2]);
        assert!(mid > rates[0] && mid > rates[n - 1]);
        for t in 0..n {
            assert!((rates[t] - rates[n - 1 - t]).abs() < 1e-15);
        }
    }

    #[test]
    fn table_round_trip() {
        let c = build_memory_circuit(&build_layout(3).unwrap(), 2, Basis::X).unwrap();
        let noise = NoiseSpec::fully_correlated(Structure::Streaky, Decay::Polynomial, 1.0, 2.0, 1e-3);
        let m = marginalize_catalog(&c, &build_event_catalog(&c, &noise).unwrap()).unwrap();
        let text = m.to_table();
        assert!(text.lines().next().unwrap().starts_with("0 "));
        assert_eq!(MarginalModel::from_table(&text).unwrap(), m);
        assert!(MarginalModel::from_table("0 depol1 0.1\n2 depol1 0.1\n").is_err());
    }

    #[test]
    fn rejects_overstrong_events() {
        let c = build_memory_circuit(&build_layout(3).unwrap(), 3, Basis::Z).unwrap();
        let mut noise = NoiseSpec::none();
        noise.classes[1] = ClassNoise::Correlated(CorrelatedSpec {
            structure: Structure::Pairwise,
            decay: Decay::Polynomial,
            amplitude: 800.0,
            exponent: 2.0,
            p: 1e-3,
        });
        let cat = build_event_catalog(&c, &noise).unwrap();
        assert!(matches!(
            marginalize_catalog(&c, &cat),
            Err(Error::InvalidMarginal { location: Some(_), .. })
        ));
    }
}
