//! Rotated surface-code memory circuits.
//!
//! Data qubits sit at odd grid coordinates `(2i + 1, 2j + 1)` for
//! `0 <= i, j < d`; syndrome qubits sit at even coordinates `(2i, 2j)` and
//! measure the plaquette of data qubits at the four diagonal neighbours.
//! Plaquettes alternate X/Z in a checkerboard. Weight-2 X plaquettes run
//! along the top and bottom edges, weight-2 Z plaquettes along the left and
//! right edges.
//!
//! Every round is reset, H on X syndromes, four CNOT layers, H, measure. The
//! four CNOT layers use the zigzag order (X and Z plaquettes traverse their
//! data qubits in mirrored orders) so hook errors run parallel to the logical
//! operator they could otherwise shorten.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::noise::ChannelKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QubitKind {
    Data,
    SyndromeX,
    SyndromeZ,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QubitCoord {
    pub x: i32,
    pub y: i32,
    pub kind: QubitKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    /// The syndrome type whose detectors exist in the first and final round.
    pub fn syndrome_kind(self) -> QubitKind {
        match self {
            Basis::Z => QubitKind::SyndromeZ,
            Basis::X => QubitKind::SyndromeX,
        }
    }
}

impl std::str::FromStr for Basis {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Z" | "z" => Ok(Basis::Z),
            "X" | "x" => Ok(Basis::X),
            other => Err(invalid(format!("unknown basis {other:?}"))),
        }
    }
}

/// Data-qubit offsets visited by X plaquettes, one per CNOT layer.
pub const X_ORDER: [(i32, i32); 4] = [(1, 1), (-1, 1), (1, -1), (-1, -1)];
/// Data-qubit offsets visited by Z plaquettes, one per CNOT layer.
pub const Z_ORDER: [(i32, i32); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

/// One stabilizer measured by a syndrome qubit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stabilizer {
    /// Qubit index of the syndrome qubit.
    pub qubit: u32,
    pub kind: QubitKind,
    /// Data qubit touched in each CNOT layer, `None` where the plaquette is truncated.
    pub data: [Option<u32>; 4],
}

impl Stabilizer {
    pub fn weight(&self) -> usize {
        self.data.iter().flatten().count()
    }

    pub fn support(&self) -> impl Iterator<Item = u32> + '_ {
        self.data.iter().flatten().copied()
    }
}

/// Qubit placement and stabilizer adjacency of a distance-`d` rotated patch.
#[derive(Clone, Debug)]
pub struct Layout {
    pub distance: usize,
    /// Data qubits first (`0..d²`), then syndrome qubits in stabilizer order.
    pub qubits: Vec<QubitCoord>,
    pub stabilizers: Vec<Stabilizer>,
}

impl Layout {
    pub fn data_count(&self) -> usize {
        self.distance * self.distance
    }

    pub fn data_qubits(&self) -> std::ops::Range<u32> {
        0..self.data_count() as u32
    }

    pub fn coord(&self, qubit: u32) -> QubitCoord {
        self.qubits[qubit as usize]
    }

    pub fn cnot_count(&self) -> usize {
        self.stabilizers.iter().map(Stabilizer::weight).sum()
    }

    /// Data qubits carrying the logical observable: the row `y = 1` for Z
    /// memory, the column `x = 1` for X memory.
    pub fn logical_support(&self, basis: Basis) -> Vec<u32> {
        self.data_qubits()
            .filter(|&q| {
                let c = self.coord(q);
                match basis {
                    Basis::Z => c.y == 1,
                    Basis::X => c.x == 1,
                }
            })
            .collect()
    }
}

/// Builds the qubit layout of a distance-`distance` rotated surface code.
pub fn build_layout(distance: usize) -> Result<Layout> {
    if distance < 3 || distance.is_multiple_of(2) {
        return Err(invalid(format!(
            "distance must be odd and at least 3, got {distance}"
        )));
    }
    let d = distance as i32;
    let mut qubits = Vec::with_capacity(2 * distance * distance - 1);
    let mut index = HashMap::new();
    for j in 0..d {
        for i in 0..d {
            let (x, y) = (2 * i + 1, 2 * j + 1);
            index.insert((x, y), qubits.len() as u32);
            qubits.push(QubitCoord {
                x,
                y,
                kind: QubitKind::Data,
            });
        }
    }

    let mut stabilizers = Vec::with_capacity(distance * distance - 1);
    for j in 0..=d {
        for i in 0..=d {
            let kind = if (i + j) % 2 == 0 {
                QubitKind::SyndromeX
            } else {
                QubitKind::SyndromeZ
            };
            let interior = (1..d).contains(&i) && (1..d).contains(&j);
            let on_top_bottom = (j == 0 || j == d) && (1..d).contains(&i);
            let on_left_right = (i == 0 || i == d) && (1..d).contains(&j);
            let keep = interior
                || (on_top_bottom && kind == QubitKind::SyndromeX)
                || (on_left_right && kind == QubitKind::SyndromeZ);
            if !keep {
                continue;
            }
            let (x, y) = (2 * i, 2 * j);
            let order = match kind {
                QubitKind::SyndromeX => X_ORDER,
                _ => Z_ORDER,
            };
            let mut data = [None; 4];
            for (slot, (dx, dy)) in data.iter_mut().zip(order) {
                *slot = index.get(&(x + dx, y + dy)).copied();
            }
            let qubit = qubits.len() as u32;
            qubits.push(QubitCoord { x, y, kind });
            stabilizers.push(Stabilizer { qubit, kind, data });
        }
    }

    Ok(Layout {
        distance,
        qubits,
        stabilizers,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    Reset,
    Hadamard,
    Cnot,
    Measure,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Cnot => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            GateKind::Reset => "R",
            GateKind::Hadamard => "H",
            GateKind::Cnot => "CX",
            GateKind::Measure => "M",
        }
    }
}

/// A gate in the schedule. For CNOT, `qubits[0]` is the control.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GateInstruction {
    pub kind: GateKind,
    pub qubits: [u32; 2],
    /// Round 0 holds data preparation only; `rounds + 1` holds the data readout.
    pub round: u32,
    pub layer: u32,
}

impl GateInstruction {
    pub fn targets(&self) -> &[u32] {
        &self.qubits[..self.kind.arity()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorClass {
    Class0,
    Class1,
    Class2,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 3] = [ErrorClass::Class0, ErrorClass::Class1, ErrorClass::Class2];

    pub fn channel(self) -> ChannelKind {
        match self {
            ErrorClass::Class0 => ChannelKind::Depol1,
            ErrorClass::Class1 => ChannelKind::BitFlip,
            ErrorClass::Class2 => ChannelKind::Depol2,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Idle,
    AfterReset,
    BeforeMeasure,
    /// After the CNOT in the given layer (0..4).
    AfterCnot(u8),
}

/// A place in the circuit where an error channel acts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ErrorLocation {
    pub class: ErrorClass,
    pub channel: ChannelKind,
    pub qubits: [u32; 2],
    pub round: u32,
    pub slot: Slot,
}

impl ErrorLocation {
    pub fn targets(&self) -> &[u32] {
        &self.qubits[..self.channel.qubits()]
    }
}

/// A detector: the parity of the referenced measurements is 0 without errors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetectorDef {
    /// Syndrome qubit index.
    pub syndrome: u32,
    pub coord: (i32, i32),
    pub kind: QubitKind,
    pub round: u32,
    pub measurements: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Measurement {
    pub qubit: u32,
    pub round: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Gate(GateInstruction),
    /// Error channel at the given location index.
    Noise(u32),
}

/// A memory experiment: schedule, error locations, detectors and observable.
#[derive(Clone, Debug)]
pub struct MemoryCircuit {
    pub layout: Layout,
    pub rounds: usize,
    pub basis: Basis,
    ops: Vec<Op>,
    locations: Vec<ErrorLocation>,
    measurements: Vec<Measurement>,
    detectors: Vec<DetectorDef>,
    observable: Vec<u32>,
}

/// Builds a memory circuit of `rounds` syndrome-extraction rounds.
pub fn build_memory_circuit(layout: &Layout, rounds: usize, basis: Basis) -> Result<MemoryCircuit> {
    if rounds == 0 {
        return Err(invalid("rounds must be at least 1"));
    }
    let mut b = Builder::default();
    let data: Vec<u32> = layout.data_qubits().collect();
    let syndromes: Vec<u32> = layout.stabilizers.iter().map(|s| s.qubit).collect();
    let x_syndromes: Vec<u32> = layout
        .stabilizers
        .iter()
        .filter(|s| s.kind == QubitKind::SyndromeX)
        .map(|s| s.qubit)
        .collect();

    for &q in &data {
        b.gate(GateKind::Reset, [q, 0], 0, 0);
    }
    if basis == Basis::X {
        for &q in &data {
            b.gate(GateKind::Hadamard, [q, 0], 0, 1);
        }
    }

    let mut syndrome_meas: Vec<Vec<u32>> = vec![Vec::with_capacity(rounds); layout.stabilizers.len()];
    for t in 1..=rounds as u32 {
        for &q in &syndromes {
            b.gate(GateKind::Reset, [q, 0], t, 0);
        }
        for &q in &syndromes {
            b.noise(ErrorClass::Class1, [q, 0], t, Slot::AfterReset);
        }
        for &q in &data {
            b.noise(ErrorClass::Class0, [q, 0], t, Slot::Idle);
        }
        for &q in &x_syndromes {
            b.gate(GateKind::Hadamard, [q, 0], t, 1);
        }
        for layer in 0..4u8 {
            let mut pairs = Vec::new();
            for s in &layout.stabilizers {
                if let Some(q) = s.data[layer as usize] {
                    let pair = match s.kind {
                        QubitKind::SyndromeX => [s.qubit, q],
                        _ => [q, s.qubit],
                    };
                    pairs.push(pair);
                }
            }
            for &pair in &pairs {
                b.gate(GateKind::Cnot, pair, t, 2 + layer as u32);
            }
            for &pair in &pairs {
                b.noise(ErrorClass::Class2, pair, t, Slot::AfterCnot(layer));
            }
        }
        for &q in &x_syndromes {
            b.gate(GateKind::Hadamard, [q, 0], t, 6);
        }
        for &q in &syndromes {
            b.noise(ErrorClass::Class1, [q, 0], t, Slot::BeforeMeasure);
        }
        for (i, &q) in syndromes.iter().enumerate() {
            let m = b.measure(q, t, 7);
            syndrome_meas[i].push(m);
        }
    }

    let readout = rounds as u32 + 1;
    if basis == Basis::X {
        for &q in &data {
            b.gate(GateKind::Hadamard, [q, 0], readout, 0);
        }
    }
    let mut data_meas = vec![0u32; data.len()];
    for &q in &data {
        data_meas[q as usize] = b.measure(q, readout, 1);
    }

    let boundary_kind = basis.syndrome_kind();
    let mut detectors = Vec::with_capacity(rounds * layout.stabilizers.len());
    for t in 1..=rounds as u32 {
        for (i, s) in layout.stabilizers.iter().enumerate() {
            let measurements = if t == 1 {
                if s.kind != boundary_kind {
                    continue;
                }
                vec![syndrome_meas[i][0]]
            } else {
                vec![syndrome_meas[i][t as usize - 2], syndrome_meas[i][t as usize - 1]]
            };
            detectors.push(detector_def(layout, s, t, measurements));
        }
    }
    for (i, s) in layout.stabilizers.iter().enumerate() {
        if s.kind != boundary_kind {
            continue;
        }
        let mut measurements = vec![syndrome_meas[i][rounds - 1]];
        measurements.extend(s.support().map(|q| data_meas[q as usize]));
        detectors.push(detector_def(layout, s, readout, measurements));
    }

    let observable = layout
        .logical_support(basis)
        .into_iter()
        .map(|q| data_meas[q as usize])
        .collect();

    Ok(MemoryCircuit {
        layout: layout.clone(),
        rounds,
        basis,
        ops: b.ops,
        locations: b.locations,
        measurements: b.measurements,
        detectors,
        observable,
    })
}

fn detector_def(layout: &Layout, s: &Stabilizer, round: u32, measurements: Vec<u32>) -> DetectorDef {
    let c = layout.coord(s.qubit);
    DetectorDef {
        syndrome: s.qubit,
        coord: (c.x, c.y),
        kind: s.kind,
        round,
        measurements,
    }
}

#[derive(Default)]
struct Builder {
    ops: Vec<Op>,
    locations: Vec<ErrorLocation>,
    measurements: Vec<Measurement>,
}

impl Builder {
    fn gate(&mut self, kind: GateKind, qubits: [u32; 2], round: u32, layer: u32) {
        self.ops.push(Op::Gate(GateInstruction {
            kind,
            qubits,
            round,
            layer,
        }));
    }

    fn measure(&mut self, qubit: u32, round: u32, layer: u32) -> u32 {
        self.gate(GateKind::Measure, [qubit, 0], round, layer);
        self.measurements.push(Measurement { qubit, round });
        self.measurements.len() as u32 - 1
    }

    fn noise(&mut self, class: ErrorClass, qubits: [u32; 2], round: u32, slot: Slot) {
        let id = self.locations.len() as u32;
        self.locations.push(ErrorLocation {
            class,
            channel: class.channel(),
            qubits,
            round,
            slot,
        });
        self.ops.push(Op::Noise(id));
    }
}

impl MemoryCircuit {
    pub fn distance(&self) -> usize {
        self.layout.distance
    }

    pub fn qubit_count(&self) -> usize {
        self.layout.qubits.len()
    }

    /// Gates and noise channels in execution order.
    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn gates(&self) -> impl Iterator<Item = &GateInstruction> {
        self.ops.iter().filter_map(|op| match op {
            Op::Gate(g) => Some(g),
            Op::Noise(_) => None,
        })
    }

    pub fn error_locations(&self) -> &[ErrorLocation] {
        &self.locations
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn detectors(&self) -> &[DetectorDef] {
        &self.detectors
    }

    pub fn detector_count(&self) -> usize {
        self.detectors.len()
    }

    /// Measurement indices whose parity is the logical observable.
    pub fn observable(&self) -> &[u32] {
        &self.observable
    }

    /// Groups error locations that differ only in their round.
    ///
    /// Each returned series lists one location per round, in round order;
    /// these are the sites a temporally correlated event spans.
    pub fn location_series(&self, class: ErrorClass) -> Vec<Vec<u32>> {
        let mut series: BTreeMap<(Slot, [u32; 2]), Vec<u32>> = BTreeMap::new();
        for (id, loc) in self.locations.iter().enumerate() {
            if loc.class == class {
                series
                    .entry((loc.slot, loc.qubits))
                    .or_default()
                    .push(id as u32);
            }
        }
        series.into_values().collect()
    }

    /// One instruction per line: `ROUND t LAYER l GATE x,y ...`.
    pub fn listing(&self) -> String {
        let mut out = String::new();
        for g in self.gates() {
            let _ = write!(out, "ROUND {} LAYER {} {}", g.round, g.layer, g.kind.name());
            for &q in g.targets() {
                let c = self.layout.coord(q);
                let _ = write!(out, " {},{}", c.x, c.y);
            }
            out.push('\n');
        }
        out
    }

    /// One detector per line, canonical order: `DETECTOR x y t: m<i> ...`.
    pub fn detector_map(&self) -> String {
        let mut out = String::new();
        for d in &self.detectors {
            let _ = write!(out, "DETECTOR {} {} {}:", d.coord.0, d.coord.1, d.round);
            for m in &d.measurements {
                let _ = write!(out, " m{m}");
            }
            out.push('\n');
        }
        let _ = write!(out, "OBSERVABLE 0:");
        for m in &self.observable {
            let _ = write!(out, " m{m}");
        }
        out.push('\n');
        out
    }
}
