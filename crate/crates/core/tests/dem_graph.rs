use std::collections::{HashMap, VecDeque};

use tcmem_core::*;

fn model(d: usize, rounds: usize, basis: Basis, noise: &NoiseSpec) -> (MemoryCircuit, MarginalModel, DetectorErrorModel) {
    let c = build_memory_circuit(&build_layout(d).unwrap(), rounds, basis).unwrap();
    let m = marginalize_catalog(&c, &build_event_catalog(&c, noise).unwrap()).unwrap();
    let dem = build_dem(&c, &m).unwrap();
    (c, m, dem)
}

/// Fewest mechanisms whose combined effect fires no detector but flips the
/// observable, by breadth-first search over (node, observable parity).
fn graph_distance(dem: &DetectorErrorModel) -> usize {
    let boundary = dem.detector_count;
    let mut adj: Vec<Vec<(usize, bool)>> = vec![Vec::new(); boundary + 1];
    for m in &dem.mechanisms {
        let (u, v) = match m.detectors[..] {
            [a] => (a as usize, boundary),
            [a, b] => (a as usize, b as usize),
            _ => continue,
        };
        adj[u].push((v, m.observable));
        adj[v].push((u, m.observable));
    }
    let mut best = usize::MAX;
    for start in 0..=boundary {
        let mut dist = vec![[usize::MAX; 2]; boundary + 1];
        dist[start][0] = 0;
        let mut queue = VecDeque::from([(start, false)]);
        while let Some((u, par)) = queue.pop_front() {
            let du = dist[u][par as usize];
            if du >= best {
                break;
            }
            for &(v, obs) in &adj[u] {
                let np = par ^ obs;
                if dist[v][np as usize] == usize::MAX {
                    dist[v][np as usize] = du + 1;
                    queue.push_back((v, np));
                }
            }
        }
        best = best.min(dist[start][1]);
    }
    best
}

#[test]
fn circuit_distance_equals_code_distance() {
    for d in [3, 5, 7] {
        for basis in [Basis::Z, Basis::X] {
            let (_, _, dem) = model(d, d, basis, &NoiseSpec::standard(1e-3));
            assert_eq!(graph_distance(&dem), d, "d={d} basis={basis:?}");
        }
    }
}

#[test]
fn every_mechanism_source_reproduces_its_symptom() {
    for basis in [Basis::Z, Basis::X] {
        let noise = NoiseSpec::fully_correlated(Structure::Streaky, Decay::Polynomial, 1.0, 2.0, 1e-3);
        let (c, _, dem) = model(3, 4, basis, &noise);
        assert!(!dem.mechanisms.is_empty());
        for m in &dem.mechanisms {
            let (loc, pauli) = m.source.expect("mechanism built from a circuit has a source");
            let s = PauliFrame::run(&c, &[(loc, pauli)]);
            assert_eq!(s.detectors, m.detectors, "source {loc} {pauli}");
            assert_eq!(s.observable, m.observable);
        }
    }
}

#[test]
fn matching_graph_reaches_boundary_everywhere() {
    for d in [3, 5] {
        for rounds in [1, 2, 2 * d] {
            let (c, _, dem) = model(d, rounds, Basis::Z, &NoiseSpec::standard(1e-3));
            let g = MatchingGraph::from_dem(&dem).unwrap();
            assert_eq!(g.detector_count(), c.detector_count());
            g.check_connected().unwrap();
        }
    }
}

#[test]
fn bulk_mechanisms_are_time_translation_invariant() {
    let (c, _, dem) = model(3, 10, Basis::Z, &NoiseSpec::standard(1e-3));
    let defs = c.detectors();
    // Mechanisms grouped by earliest round, as shapes relative to it.
    type Shape = (Vec<(u32, u32)>, bool, f64);
    let mut shapes: HashMap<u32, Vec<Shape>> = HashMap::new();
    for m in &dem.mechanisms {
        let keys: Vec<(u32, u32)> = m
            .detectors
            .iter()
            .map(|&x| (defs[x as usize].syndrome, defs[x as usize].round))
            .collect();
        let t0 = keys.iter().map(|k| k.1).min().unwrap();
        let rel = keys.iter().map(|&(s, t)| (s, t - t0)).collect();
        shapes.entry(t0).or_default().push((rel, m.observable, m.probability));
    }
    let mut reference = shapes.remove(&3).unwrap();
    reference.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
    for t0 in 4..=7 {
        let mut v = shapes.remove(&t0).unwrap();
        v.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
        assert_eq!(v.len(), reference.len(), "round {t0}");
        for (x, y) in v.iter().zip(&reference) {
            assert_eq!((&x.0, x.1), (&y.0, y.1));
            assert!((x.2 / y.2 - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn single_errors_never_cause_logical_failure_at_distance_three() {
    for basis in [Basis::Z, Basis::X] {
        let (c, _, dem) = model(3, 3, basis, &NoiseSpec::standard(1e-3));
        let decoder = Decoder::from_dem(&dem).unwrap();
        for (id, loc) in c.error_locations().iter().enumerate() {
            for pauli in loc.channel.support() {
                let s = PauliFrame::run(&c, &[(id as u32, pauli)]);
                let out = decoder.decode(&s.detectors).unwrap();
                assert_eq!(out.prediction, s.observable, "location {id} {pauli} {basis:?}");
            }
        }
    }
}

#[test]
fn dem_text_round_trips_through_decoder() {
    let (_, _, dem) = model(3, 3, Basis::Z, &NoiseSpec::standard(2e-3));
    let parsed = DetectorErrorModel::from_text(&dem.to_text()).unwrap();
    let a = Decoder::from_dem(&dem).unwrap();
    let b = Decoder::from_dem(&parsed).unwrap();
    for defects in [vec![0u32], vec![1, 5], vec![0, 3, 9, 12]] {
        assert_eq!(a.decode(&defects).unwrap().prediction, b.decode(&defects).unwrap().prediction);
    }
}
