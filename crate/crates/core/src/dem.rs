//! Detector error models: every elementary error of an independent noise
//! model, as the detectors and observable it flips.
//!
//! Each non-identity Pauli of a location's channel is split into its X-type
//! and Z-type parts, which are propagated separately; each part inherits the
//! Pauli's probability. Parts that flip more than two detectors are split
//! into edges that some other part already produces. Mechanisms with
//! identical symptoms are merged as independent XOR sources.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use crate::circuit::{Basis, MemoryCircuit};
use crate::error::{Error, Result};
use crate::frame::{symptoms, Symptom};
use crate::marginal::MarginalModel;
use crate::pauli::Pauli;

/// Mechanisms below this probability after merging are dropped.
pub const PRUNE_BELOW: f64 = 1e-15;

/// Probability that exactly one of two independent flips with probabilities
/// `p1`, `p2` happens.
pub fn merge_probability(p1: f64, p2: f64) -> f64 {
    p1 + p2 - 2.0 * p1 * p2
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorMechanism {
    pub probability: f64,
    /// Flipped detectors, ascending, at most two.
    pub detectors: Vec<u32>,
    pub observable: bool,
    /// A location and Pauli whose injection produces exactly this symptom,
    /// if known (models parsed from text have none).
    pub source: Option<(u32, Pauli)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorErrorModel {
    pub mechanisms: Vec<ErrorMechanism>,
    pub detector_count: usize,
    pub distance: Option<usize>,
    pub rounds: Option<usize>,
    pub basis: Option<Basis>,
}

#[derive(Clone, Copy, Debug)]
struct Part {
    location: u32,
    pauli: Pauli,
    probability: f64,
    symptom: usize,
}

/// Builds the matchable detector error model of `circuit` under `marginal`.
pub fn build_dem(circuit: &MemoryCircuit, marginal: &MarginalModel) -> Result<DetectorErrorModel> {
    let locations = circuit.error_locations();
    if marginal.len() != locations.len() {
        return Err(Error::InvalidInput(format!(
            "marginal model has {} locations, circuit has {}",
            marginal.len(),
            locations.len()
        )));
    }

    let mut probes: Vec<(u32, Pauli)> = Vec::new();
    let mut probe_index: HashMap<(u32, Pauli), usize> = HashMap::new();
    let mut parts: Vec<Part> = Vec::new();
    for (id, loc) in locations.iter().enumerate() {
        let id = id as u32;
        let p = marginal.probability(id);
        if p == 0.0 {
            continue;
        }
        let support = loc.channel.support();
        let each = p / support.len() as f64;
        for pauli in support {
            for part in [pauli.x_part(), pauli.z_part()] {
                if part.is_identity() {
                    continue;
                }
                let symptom = *probe_index.entry((id, part)).or_insert_with(|| {
                    probes.push((id, part));
                    probes.len() - 1
                });
                parts.push(Part {
                    location: id,
                    pauli: part,
                    probability: each,
                    symptom,
                });
            }
        }
    }
    let found = symptoms(circuit, &probes);

    // Edges produced directly by some part, with their first source.
    let mut edges: BTreeMap<(Vec<u32>, bool), (u32, Pauli)> = BTreeMap::new();
    for (probe, s) in probes.iter().zip(&found) {
        if s.detectors.len() <= 2 && !(s.detectors.is_empty() && !s.observable) {
            edges.entry((s.detectors.clone(), s.observable)).or_insert(*probe);
        }
    }
    let known: HashSet<Vec<u32>> = edges.keys().map(|(d, _)| d.clone()).collect();

    let mut merged: BTreeMap<(Vec<u32>, bool), f64> = BTreeMap::new();
    let mut add = |key: (Vec<u32>, bool), p: f64| {
        let slot = merged.entry(key).or_insert(0.0);
        *slot = merge_probability(*slot, p);
    };
    let mut decomposed: HashMap<usize, Vec<Symptom>> = HashMap::new();
    for part in &parts {
        let s = &found[part.symptom];
        if s.detectors.is_empty() && !s.observable {
            continue;
        }
        if s.detectors.len() <= 2 {
            add((s.detectors.clone(), s.observable), part.probability);
            continue;
        }
        if let std::collections::hash_map::Entry::Vacant(e) = decomposed.entry(part.symptom) {
            let pieces = decompose(s, &known, &edges).ok_or_else(|| Error::Undecomposable {
                location: part.location as usize,
                pauli: part.pauli.to_string(),
                detectors: s.detectors.clone(),
            })?;
            e.insert(pieces);
        }
        for piece in &decomposed[&part.symptom] {
            add((piece.detectors.clone(), piece.observable), part.probability);
        }
    }

    let mechanisms = merged
        .into_iter()
        .filter(|(_, p)| *p >= PRUNE_BELOW)
        .map(|((detectors, observable), probability)| {
            let source = edges.get(&(detectors.clone(), observable)).copied();
            ErrorMechanism {
                probability,
                detectors,
                observable,
                source,
            }
        })
        .collect();
    Ok(DetectorErrorModel {
        mechanisms,
        detector_count: circuit.detector_count(),
        distance: Some(circuit.distance()),
        rounds: Some(circuit.rounds),
        basis: Some(circuit.basis),
    })
}

/// Splits a symptom into known edges whose detector sets partition it and
/// whose observable flips XOR to the symptom's.
fn decompose(
    s: &Symptom,
    known: &HashSet<Vec<u32>>,
    edges: &BTreeMap<(Vec<u32>, bool), (u32, Pauli)>,
) -> Option<Vec<Symptom>> {
    fn search(
        rest: &[u32],
        known: &HashSet<Vec<u32>>,
        edges: &BTreeMap<(Vec<u32>, bool), (u32, Pauli)>,
        want: bool,
        acc: &mut Vec<Symptom>,
    ) -> bool {
        let Some((&first, tail)) = rest.split_first() else {
            return !want;
        };
        let mut groups: Vec<(Vec<u32>, Vec<u32>)> = tail
            .iter()
            .enumerate()
            .map(|(i, &other)| {
                let mut remaining = tail.to_vec();
                remaining.remove(i);
                (vec![first, other], remaining)
            })
            .collect();
        groups.push((vec![first], tail.to_vec()));
        for (group, remaining) in groups {
            if !known.contains(&group) {
                continue;
            }
            for obs in [false, true] {
                if edges.contains_key(&(group.clone(), obs)) {
                    acc.push(Symptom {
                        detectors: group.clone(),
                        observable: obs,
                    });
                    if search(&remaining, known, edges, want ^ obs, acc) {
                        return true;
                    }
                    acc.pop();
                }
            }
        }
        false
    }
    let mut acc = Vec::new();
    search(&s.detectors, known, edges, s.observable, &mut acc).then_some(acc)
}

impl DetectorErrorModel {
    /// One mechanism per line, `error(<p>) D<i> [D<j>] [L0]`, after a
    /// comment line recording the circuit parameters.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "# detectors {}", self.detector_count);
        if let Some(d) = self.distance {
            let _ = write!(out, " distance {d}");
        }
        if let Some(n) = self.rounds {
            let _ = write!(out, " rounds {n}");
        }
        if let Some(b) = self.basis {
            let _ = write!(out, " basis {}", if b == Basis::Z { "Z" } else { "X" });
        }
        out.push('\n');
        for m in &self.mechanisms {
            let _ = write!(out, "error({:e})", m.probability);
            for d in &m.detectors {
                let _ = write!(out, " D{d}");
            }
            if m.observable {
                out.push_str(" L0");
            }
            out.push('\n');
        }
        out
    }

    /// Parses the text format. Without a `# detectors` comment the detector
    /// count is one past the largest index mentioned.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut dem = DetectorErrorModel {
            mechanisms: Vec::new(),
            detector_count: 0,
            distance: None,
            rounds: None,
            basis: None,
        };
        let mut declared = None;
        for (i, line) in text.lines().enumerate() {
            let err = |message: String| Error::Parse { line: i + 1, message };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let words: Vec<&str> = comment.split_whitespace().collect();
                for pair in words.chunks(2) {
                    if let [key, value] = pair {
                        let number = || value.parse::<usize>().map_err(|_| err(format!("bad {key} {value:?}")));
                        match *key {
                            "detectors" => declared = Some(number()?),
                            "distance" => dem.distance = Some(number()?),
                            "rounds" => dem.rounds = Some(number()?),
                            "basis" => dem.basis = Some(value.parse().map_err(|e: Error| err(e.to_string()))?),
                            _ => {}
                        }
                    }
                }
                continue;
            }
            let rest = line
                .strip_prefix("error(")
                .ok_or_else(|| err("expected `error(<p>)`".into()))?;
            let (p, targets) = rest
                .split_once(')')
                .ok_or_else(|| err("missing `)`".into()))?;
            let probability: f64 = p.trim().parse().map_err(|_| err(format!("bad probability {p:?}")))?;
            if !(0.0..1.0).contains(&probability) {
                return Err(err(format!("probability {probability} outside [0, 1)")));
            }
            let mut detectors = Vec::new();
            let mut observable = false;
            for t in targets.split_whitespace() {
                if let Some(d) = t.strip_prefix('D') {
                    detectors.push(d.parse::<u32>().map_err(|_| err(format!("bad detector {t:?}")))?);
                } else if t == "L0" {
                    observable = !observable;
                } else {
                    return Err(err(format!("unknown target {t:?}")));
                }
            }
            if detectors.len() > 2 {
                return Err(err("mechanisms may flip at most two detectors".into()));
            }
            if detectors.windows(2).any(|w| w[0] >= w[1]) {
                return Err(err("detectors must be strictly ascending".into()));
            }
            dem.mechanisms.push(ErrorMechanism {
                probability,
                detectors,
                observable,
                source: None,
            });
        }
        let used = dem
            .mechanisms
            .iter()
            .flat_map(|m| m.detectors.iter())
            .map(|&d| d as usize + 1)
            .max()
            .unwrap_or(0);
        dem.detector_count = match declared {
            Some(n) if n < used => {
                return Err(Error::InvalidInput(format!(
                    "detector index {} out of range for {n} detectors",
                    used - 1
                )))
            }
            Some(n) => n,
            None => used,
        };
        Ok(dem)
    }
}
