//! Bit-packed Pauli frame simulation.
//!
//! Shots are simulated in fixed blocks of [`BLOCK_SHOTS`], one bit per shot
//! in each `u64` word. Block `b` draws all of its randomness from a ChaCha8
//! stream keyed by `(seed, b)`, so shot `i` of a run depends only on the seed
//! and `i`: results do not change with the thread count, and a run of `N`
//! shots is a prefix of any longer run with the same seed.
//!
//! Event activations are drawn before propagation by geometric skipping over
//! the `(event, shot)` grid of each group of equal-probability events, so the
//! cost per block scales with the number of activations rather than the
//! number of events.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::{GateInstruction, GateKind, MemoryCircuit, Op};
use crate::noise::{ErrorEvent, EventCatalog};
use crate::pauli::Pauli;
use crate::shots::ShotBatch;

/// Shots per simulation block.
pub const BLOCK_SHOTS: usize = 1024;
const BLOCK_WORDS: usize = BLOCK_SHOTS / 64;
const NO_SLOT: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
enum Inst {
    Reset(u32),
    H(u32),
    Cnot(u32, u32),
    /// Qubit and measurement index.
    Measure(u32, u32),
    Noise(u32),
}

/// The circuit flattened for word-parallel execution.
#[derive(Clone, Debug)]
struct Program {
    insts: Vec<Inst>,
    /// First instruction of each round `0..=rounds + 1`, then the end.
    round_start: Vec<usize>,
    targets: Vec<([u32; 2], u8)>,
    location_rounds: Vec<u32>,
    detectors: Vec<Vec<u32>>,
    detector_rounds: Vec<u32>,
    observable: Vec<u32>,
    qubits: usize,
    measurements: usize,
    rounds: u32,
}

impl Program {
    fn new(circuit: &MemoryCircuit) -> Self {
        let rounds = circuit.rounds as u32;
        let locations = circuit.error_locations();
        let mut insts = Vec::with_capacity(circuit.ops().len());
        let mut round_start = vec![usize::MAX; rounds as usize + 3];
        let mut measurement = 0u32;
        for op in circuit.ops() {
            let (inst, round) = match *op {
                Op::Gate(g) => {
                    let q = g.qubits;
                    let inst = match g.kind {
                        GateKind::Reset => Inst::Reset(q[0]),
                        GateKind::Hadamard => Inst::H(q[0]),
                        GateKind::Cnot => Inst::Cnot(q[0], q[1]),
                        GateKind::Measure => {
                            measurement += 1;
                            Inst::Measure(q[0], measurement - 1)
                        }
                    };
                    (inst, g.round)
                }
                Op::Noise(id) => (Inst::Noise(id), locations[id as usize].round),
            };
            let start = &mut round_start[round as usize];
            if *start == usize::MAX {
                *start = insts.len();
            }
            insts.push(inst);
        }
        *round_start.last_mut().unwrap() = insts.len();
        for r in (0..round_start.len() - 1).rev() {
            if round_start[r] == usize::MAX {
                round_start[r] = round_start[r + 1];
            }
        }
        Program {
            insts,
            round_start,
            targets: locations
                .iter()
                .map(|l| (l.qubits, l.channel.qubits() as u8))
                .collect(),
            location_rounds: locations.iter().map(|l| l.round).collect(),
            detectors: circuit.detectors().iter().map(|d| d.measurements.clone()).collect(),
            detector_rounds: circuit.detectors().iter().map(|d| d.round).collect(),
            observable: circuit.observable().to_vec(),
            qubits: circuit.qubit_count(),
            measurements: measurement as usize,
            rounds,
        }
    }
}

/// Word-parallel frames for `w * 64` lanes plus recorded measurement flips.
struct Frames {
    w: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    /// Row of each measurement in `meas`, or `NO_SLOT` if not recorded.
    slots: Vec<u32>,
    meas: Vec<u64>,
}

impl Frames {
    fn new(qubits: usize, w: usize, slots: Vec<u32>) -> Self {
        let recorded = slots.iter().filter(|&&s| s != NO_SLOT).count();
        Frames {
            w,
            x: vec![0; qubits * w],
            z: vec![0; qubits * w],
            slots,
            meas: vec![0; recorded * w],
        }
    }

    fn inject(&mut self, targets: ([u32; 2], u8), bits: u8, lane: usize) {
        let (word, mask) = (lane / 64, 1u64 << (lane % 64));
        for k in 0..targets.1 as usize {
            let q = targets.0[k] as usize * self.w + word;
            if bits >> (2 * k) & 1 == 1 {
                self.x[q] ^= mask;
            }
            if bits >> (2 * k + 1) & 1 == 1 {
                self.z[q] ^= mask;
            }
        }
    }

    fn run(
        &mut self,
        program: &Program,
        range: std::ops::Range<usize>,
        mut gauge: Option<&mut ChaCha8Rng>,
        mut noise: impl FnMut(u32, &mut Frames),
    ) {
        let w = self.w;
        for inst in &program.insts[range] {
            match *inst {
                Inst::Reset(q) => {
                    let q = q as usize * w;
                    self.x[q..q + w].fill(0);
                    match gauge.as_deref_mut() {
                        Some(rng) => self.z[q..q + w].iter_mut().for_each(|v| *v = rng.gen()),
                        None => self.z[q..q + w].fill(0),
                    }
                }
                Inst::H(q) => {
                    let q = q as usize * w;
                    let (x, z) = (&mut self.x[q..q + w], &mut self.z[q..q + w]);
                    x.swap_with_slice(z);
                }
                Inst::Cnot(c, t) => {
                    let (c, t) = (c as usize * w, t as usize * w);
                    for i in 0..w {
                        self.x[t + i] ^= self.x[c + i];
                        self.z[c + i] ^= self.z[t + i];
                    }
                }
                Inst::Measure(q, m) => {
                    let q = q as usize * w;
                    let slot = self.slots[m as usize];
                    if slot != NO_SLOT {
                        let row = slot as usize * w;
                        self.meas[row..row + w].copy_from_slice(&self.x[q..q + w]);
                    }
                    if let Some(rng) = gauge.as_deref_mut() {
                        self.z[q..q + w].iter_mut().for_each(|v| *v ^= rng.gen::<u64>());
                    }
                }
                Inst::Noise(loc) => noise(loc, self),
            }
        }
    }

    /// XOR of the recorded rows of `measurements` into `out`.
    fn parity(&self, measurements: &[u32], out: &mut [u64]) {
        out.fill(0);
        for &m in measurements {
            let slot = self.slots[m as usize];
            if slot != NO_SLOT {
                let row = &self.meas[slot as usize * self.w..][..self.w];
                out.iter_mut().zip(row).for_each(|(o, r)| *o ^= r);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Injection {
    location: u32,
    lane: u32,
    bits: u8,
}

#[derive(Clone, Debug)]
struct EventGroup {
    /// `ln(1 - p)`, negative, or `-inf` for `p = 1`.
    log_miss: f64,
    events: Vec<u32>,
}

/// Number of failures before the next success of a Bernoulli(p) sequence.
fn geometric<R: Rng>(rng: &mut R, log_miss: f64) -> usize {
    if log_miss == f64::NEG_INFINITY {
        return 0;
    }
    let u = 1.0 - rng.gen::<f64>();
    let skip = u.ln() / log_miss;
    if skip >= usize::MAX as f64 {
        usize::MAX
    } else {
        skip as usize
    }
}

/// Samples detection events of a circuit under an event catalog.
#[derive(Clone, Debug)]
pub struct Sampler {
    program: Program,
    events: Vec<ErrorEvent>,
    groups: Vec<EventGroup>,
    gauge: bool,
}

impl Sampler {
    pub fn new(circuit: &MemoryCircuit, catalog: &EventCatalog) -> Self {
        let mut by_probability: std::collections::BTreeMap<u64, Vec<u32>> = Default::default();
        for (i, e) in catalog.events.iter().enumerate() {
            if e.probability > 0.0 {
                by_probability.entry(e.probability.to_bits()).or_default().push(i as u32);
            }
        }
        let groups = by_probability
            .into_iter()
            .map(|(bits, events)| {
                EventGroup {
                    log_miss: (-f64::from_bits(bits)).ln_1p(),
                    events,
                }
            })
            .collect();
        Sampler {
            program: Program::new(circuit),
            events: catalog.events.clone(),
            groups,
            gauge: false,
        }
    }

    /// Randomizes the Z frame after every reset and measurement.
    ///
    /// These Z flips act trivially on the physical state, so every detector
    /// and the observable must be unaffected; a detector that changes under
    /// this mode is not deterministic.
    pub fn with_gauge_randomization(mut self, enabled: bool) -> Self {
        self.gauge = enabled;
        self
    }

    pub fn detector_count(&self) -> usize {
        self.program.detectors.len()
    }

    fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        rng
    }

    fn draw_injections(&self, rng: &mut ChaCha8Rng) -> Vec<Injection> {
        let mut out = Vec::new();
        for group in &self.groups {
            let trials = group.events.len().saturating_mul(BLOCK_SHOTS);
            let mut i = geometric(rng, group.log_miss);
            while i < trials {
                let event = &self.events[group.events[i / BLOCK_SHOTS] as usize];
                let lane = (i % BLOCK_SHOTS) as u32;
                event.draw(rng, |location, pauli| {
                    out.push(Injection {
                        location,
                        lane,
                        bits: pauli.bits(),
                    })
                });
                i = i.saturating_add(1).saturating_add(geometric(rng, group.log_miss));
            }
        }
        out.sort_unstable();
        out
    }

    /// Simulates one full block of [`BLOCK_SHOTS`] shots.
    pub fn sample_block(&self, seed: u64, block: u64) -> ShotBatch {
        let program = &self.program;
        let mut rng = Self::block_rng(seed, block);
        let injections = self.draw_injections(&mut rng);
        let slots = (0..program.measurements as u32).collect();
        let mut frames = Frames::new(program.qubits, BLOCK_WORDS, slots);
        let mut next = 0;
        let gauge = if self.gauge { Some(&mut rng) } else { None };
        frames.run(program, 0..program.insts.len(), gauge, |loc, f| {
            while next < injections.len() && injections[next].location == loc {
                let j = injections[next];
                f.inject(program.targets[loc as usize], j.bits, j.lane as usize);
                next += 1;
            }
        });

        let mut batch = ShotBatch::new(program.detectors.len(), BLOCK_SHOTS);
        for (d, measurements) in program.detectors.iter().enumerate() {
            frames.parity(measurements, batch.detector_row_mut(d));
        }
        frames.parity(&program.observable, batch.observable_row_mut());
        batch
    }

    /// Applies `f` to every block of a `shots`-shot run, in parallel.
    ///
    /// The last block is truncated to the requested shot count. Results are
    /// returned in block order.
    pub fn map_blocks<T, F>(&self, shots: usize, seed: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64, ShotBatch) -> T + Sync + Send,
    {
        let blocks = shots.div_ceil(BLOCK_SHOTS);
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let batch = self.sample_block(seed, b as u64);
                let keep = (shots - b * BLOCK_SHOTS).min(BLOCK_SHOTS);
                let batch = if keep < BLOCK_SHOTS { batch.truncated(keep) } else { batch };
                f(b as u64, batch)
            })
            .collect()
    }

    pub fn sample(&self, shots: usize, seed: u64) -> ShotBatch {
        let blocks = self.map_blocks(shots, seed, |_, b| b);
        let mut out = ShotBatch::new(self.detector_count(), shots);
        for (i, block) in blocks.iter().enumerate() {
            out.copy_words_from(block, i * BLOCK_WORDS);
        }
        out
    }

    /// For each error location, the number of shots in which the Paulis
    /// injected there multiply to a non-identity operator.
    pub fn location_error_counts(&self, shots: usize, seed: u64) -> Vec<u64> {
        let locations = self.program.targets.len();
        let blocks = shots.div_ceil(BLOCK_SHOTS);
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let keep = ((shots - b * BLOCK_SHOTS).min(BLOCK_SHOTS)) as u32;
                let mut rng = Self::block_rng(seed, b as u64);
                let injections = self.draw_injections(&mut rng);
                let mut counts = vec![0u64; locations];
                let mut i = 0;
                while i < injections.len() {
                    let (loc, lane) = (injections[i].location, injections[i].lane);
                    let mut bits = 0u8;
                    while i < injections.len()
                        && injections[i].location == loc
                        && injections[i].lane == lane
                    {
                        bits ^= injections[i].bits;
                        i += 1;
                    }
                    if bits != 0 && lane < keep {
                        counts[loc as usize] += 1;
                    }
                }
                counts
            })
            .reduce(
                || vec![0u64; locations],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    }
}

/// Samples `shots` shots of `circuit` under `catalog`.
pub fn sample(circuit: &MemoryCircuit, catalog: &EventCatalog, shots: usize, seed: u64) -> ShotBatch {
    Sampler::new(circuit, catalog).sample(shots, seed)
}

/// Detectors and observable flipped by a set of injected Paulis.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symptom {
    /// Flipped detectors, ascending.
    pub detectors: Vec<u32>,
    pub observable: bool,
}

/// Symptoms of single Paulis injected at error locations, one per probe.
///
/// Probes in the same round are simulated together, one lane each. A probe
/// in round `t` is propagated through rounds `t` and `t + 1` only: after that
/// the syndrome qubits have been reset, the data frame no longer changes,
/// later detectors cannot fire, and the observable is read by applying the
/// final readout to the remaining data frame.
pub fn symptoms(circuit: &MemoryCircuit, probes: &[(u32, Pauli)]) -> Vec<Symptom> {
    let program = Program::new(circuit);
    let rounds = program.rounds as usize;
    let mut by_round: Vec<Vec<usize>> = vec![Vec::new(); rounds + 2];
    for (i, &(loc, _)) in probes.iter().enumerate() {
        by_round[program.location_rounds[loc as usize] as usize].push(i);
    }
    let results: Vec<Vec<(usize, Symptom)>> = by_round
        .par_iter()
        .enumerate()
        .filter(|(_, members)| !members.is_empty())
        .map(|(t, members)| probe_round(&program, t, members, probes))
        .collect();
    let mut out = vec![Symptom::default(); probes.len()];
    for (i, s) in results.into_iter().flatten() {
        out[i] = s;
    }
    out
}

fn probe_round(
    program: &Program,
    t: usize,
    members: &[usize],
    probes: &[(u32, Pauli)],
) -> Vec<(usize, Symptom)> {
    let rounds = program.rounds as usize;
    let rs = &program.round_start;
    let end = program.insts.len();
    #[allow(clippy::single_range_in_vec_init)]
    let (ranges, last_round) = if t + 1 >= rounds {
        (vec![rs[t]..end], rounds as u32 + 1)
    } else {
        (vec![rs[t]..rs[t + 2], rs[rounds + 1]..end], t as u32 + 1)
    };

    let mut slots = vec![NO_SLOT; program.measurements];
    let mut recorded = 0;
    for r in &ranges {
        for inst in &program.insts[r.clone()] {
            if let Inst::Measure(_, m) = *inst {
                slots[m as usize] = recorded;
                recorded += 1;
            }
        }
    }

    let lanes = members.len();
    let w = lanes.div_ceil(64);
    let mut injections: Vec<Injection> = members
        .iter()
        .enumerate()
        .map(|(lane, &i)| Injection {
            location: probes[i].0,
            lane: lane as u32,
            bits: probes[i].1.bits(),
        })
        .collect();
    injections.sort_unstable();

    let mut frames = Frames::new(program.qubits, w, slots);
    let mut next = 0;
    for r in ranges {
        frames.run(program, r, None, |loc, f| {
            while next < injections.len() && injections[next].location == loc {
                let j = injections[next];
                f.inject(program.targets[loc as usize], j.bits, j.lane as usize);
                next += 1;
            }
        });
    }

    let mut result: Vec<Symptom> = vec![Symptom::default(); lanes];
    let mut row = vec![0u64; w];
    for (d, measurements) in program.detectors.iter().enumerate() {
        let round = program.detector_rounds[d];
        if round < t as u32 || round > last_round {
            continue;
        }
        frames.parity(measurements, &mut row);
        for_each_lane(&row, lanes, |lane| result[lane].detectors.push(d as u32));
    }
    frames.parity(&program.observable, &mut row);
    for_each_lane(&row, lanes, |lane| result[lane].observable = true);
    members.iter().copied().zip(result).collect()
}

fn for_each_lane(row: &[u64], lanes: usize, mut f: impl FnMut(usize)) {
    for (w, &word) in row.iter().enumerate() {
        let mut bits = word;
        while bits != 0 {
            let lane = w * 64 + bits.trailing_zeros() as usize;
            bits &= bits - 1;
            if lane < lanes {
                f(lane);
            }
        }
    }
}

/// A single-shot Pauli frame: one X and one Z flip bit per qubit.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PauliFrame {
    pub x: Vec<bool>,
    pub z: Vec<bool>,
}

impl PauliFrame {
    pub fn new(qubits: usize) -> Self {
        PauliFrame {
            x: vec![false; qubits],
            z: vec![false; qubits],
        }
    }

    /// Conjugates the frame by `gate`. Returns the outcome flip for a measurement.
    pub fn propagate(&mut self, gate: &GateInstruction) -> Option<bool> {
        let [a, b] = gate.qubits.map(|q| q as usize);
        match gate.kind {
            GateKind::Reset => {
                self.x[a] = false;
                self.z[a] = false;
                None
            }
            GateKind::Hadamard => {
                std::mem::swap(&mut self.x[a], &mut self.z[a]);
                None
            }
            GateKind::Cnot => {
                self.x[b] ^= self.x[a];
                self.z[a] ^= self.z[b];
                None
            }
            GateKind::Measure => Some(self.x[a]),
        }
    }

    /// Multiplies `pauli` into the frame on `qubits`.
    pub fn inject(&mut self, qubits: &[u32], pauli: Pauli) {
        for (k, &q) in qubits.iter().enumerate() {
            self.x[q as usize] ^= pauli.x(k);
            self.z[q as usize] ^= pauli.z(k);
        }
    }

    /// Runs the whole circuit once with the given `(location, pauli)`
    /// injections and no other noise.
    pub fn run(circuit: &MemoryCircuit, injections: &[(u32, Pauli)]) -> Symptom {
        let mut frame = PauliFrame::new(circuit.qubit_count());
        let mut flips = Vec::with_capacity(circuit.measurements().len());
        for op in circuit.ops() {
            match op {
                Op::Gate(g) => {
                    if let Some(f) = frame.propagate(g) {
                        flips.push(f);
                    }
                }
                Op::Noise(id) => {
                    let loc = &circuit.error_locations()[*id as usize];
                    for &(at, p) in injections {
                        if at == *id {
                            frame.inject(loc.targets(), p);
                        }
                    }
                }
            }
        }
        let parity = |ms: &[u32]| ms.iter().fold(false, |acc, &m| acc ^ flips[m as usize]);
        Symptom {
            detectors: circuit
                .detectors()
                .iter()
                .enumerate()
                .filter(|(_, d)| parity(&d.measurements))
                .map(|(i, _)| i as u32)
                .collect(),
            observable: parity(circuit.observable()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_layout, build_memory_circuit, Basis};
    use crate::noise::{build_event_catalog, NoiseSpec};

    fn circuit(d: usize, n: usize, basis: Basis) -> MemoryCircuit {
        build_memory_circuit(&build_layout(d).unwrap(), n, basis).unwrap()
    }

    fn gate(kind: GateKind, a: u32, b: u32) -> GateInstruction {
        GateInstruction {
            kind,
            qubits: [a, b],
            round: 1,
            layer: 0,
        }
    }

    #[test]
    fn conjugation_rules() {
        let mut f = PauliFrame::new(2);
        f.x[0] = true;
        f.propagate(&gate(GateKind::Cnot, 0, 1));
        assert_eq!((f.x.clone(), f.z.clone()), (vec![true, true], vec![false, false]));

        let mut f = PauliFrame::new(2);
        f.z[1] = true;
        f.propagate(&gate(GateKind::Cnot, 0, 1));
        assert_eq!((f.x.clone(), f.z.clone()), (vec![false, false], vec![true, true]));

        let mut f = PauliFrame::new(1);
        f.x[0] = true;
        f.propagate(&gate(GateKind::Hadamard, 0, 0));
        assert!(f.z[0] && !f.x[0]);
        f.propagate(&gate(GateKind::Hadamard, 0, 0));
        assert!(f.x[0] && !f.z[0]);
        assert_eq!(f.propagate(&gate(GateKind::Measure, 0, 0)), Some(true));
        f.propagate(&gate(GateKind::Reset, 0, 0));
        assert!(!f.x[0] && !f.z[0]);
    }

    #[test]
    fn noiseless_is_all_zero() {
        for basis in [Basis::Z, Basis::X] {
            let c = circuit(3, 3, basis);
            let s = Sampler::new(&c, &EventCatalog::default()).with_gauge_randomization(true);
            let b = s.sample(3000, 5);
            assert!((0..b.detector_count()).all(|d| b.fire_count(d) == 0));
            assert!(b.observables().iter().all(|&o| !o));
        }
    }

    #[test]
    fn prefix_property() {
        let c = circuit(3, 3, Basis::Z);
        let cat = build_event_catalog(&c, &NoiseSpec::standard(5e-3)).unwrap();
        let s = Sampler::new(&c, &cat);
        let long = s.sample(2500, 11);
        let short = s.sample(1100, 11);
        assert_eq!(long.truncated(1100), short);
        assert_ne!(s.sample(1100, 12), short);
    }

    #[test]
    fn probe_symptoms_match_full_propagation() {
        for basis in [Basis::Z, Basis::X] {
            let c = circuit(3, 5, basis);
            let mut probes = Vec::new();
            for (id, loc) in c.error_locations().iter().enumerate() {
                for p in Pauli::non_identity(loc.channel.qubits() as u8) {
                    probes.push((id as u32, p));
                }
            }
            let fast = symptoms(&c, &probes);
            for (probe, got) in probes.iter().zip(&fast) {
                assert_eq!(got, &PauliFrame::run(&c, &[*probe]), "{probe:?}");
            }
        }
    }

    #[test]
    fn block_sampler_matches_single_shot_frames() {
        // Replay each shot's activations through the scalar frame.
        let c = circuit(3, 3, Basis::X);
        let cat = build_event_catalog(&c, &NoiseSpec::standard(2e-2)).unwrap();
        let s = Sampler::new(&c, &cat);
        let batch = s.sample_block(3, 0);
        let mut rng = Sampler::block_rng(3, 0);
        let injections = s.draw_injections(&mut rng);
        for lane in 0..200u32 {
            let mine: Vec<(u32, Pauli)> = injections
                .iter()
                .filter(|j| j.lane == lane)
                .map(|j| (j.location, c.error_locations()[j.location as usize].channel.pauli(j.bits)))
                .collect();
            let expect = PauliFrame::run(&c, &mine);
            assert_eq!(batch.shot_detectors(lane as usize), expect.detectors);
            assert_eq!(batch.observable(lane as usize), expect.observable);
        }
    }
}
