use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tcmem_core::*;

/// All-pairs shortest paths over detectors plus boundary, by Floyd-Warshall
/// on the matching graph's edges.
fn floyd(g: &MatchingGraph) -> Vec<Vec<f64>> {
    let n = g.detector_count() + 1;
    let mut dist = vec![vec![f64::INFINITY; n]; n];
    for (u, row) in dist.iter_mut().enumerate() {
        row[u] = 0.0;
        for e in g.edges(u as u32) {
            row[e.to as usize] = row[e.to as usize].min(e.weight);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = dist[i][k] + dist[k][j];
                if via < dist[i][j] {
                    dist[i][j] = via;
                }
            }
        }
    }
    dist
}

/// Minimum total weight over all ways to pair defects with each other or
/// with the boundary.
fn brute_force(dist: &[Vec<f64>], boundary: usize, defects: &[usize]) -> f64 {
    let Some((&first, rest)) = defects.split_first() else {
        return 0.0;
    };
    let mut best = dist[first][boundary] + brute_force(dist, boundary, rest);
    for i in 0..rest.len() {
        let mut remaining = rest.to_vec();
        let other = remaining.remove(i);
        best = best.min(dist[first][other] + brute_force(dist, boundary, &remaining));
    }
    best
}

fn distance_three_dem(basis: Basis, p: f64) -> DetectorErrorModel {
    let c = build_memory_circuit(&build_layout(3).unwrap(), 3, basis).unwrap();
    let m = marginalize_catalog(&c, &build_event_catalog(&c, &NoiseSpec::standard(p)).unwrap()).unwrap();
    build_dem(&c, &m).unwrap()
}

#[test]
fn matched_weight_equals_exhaustive_minimum() {
    let dem = distance_three_dem(Basis::Z, 1e-3);
    let decoder = Decoder::from_dem(&dem).unwrap();
    let dist = floyd(decoder.graph());
    let boundary = dem.detector_count;
    let all: Vec<usize> = (0..dem.detector_count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let k = rng.gen_range(1..=6);
        let mut defects: Vec<usize> = all.choose_multiple(&mut rng, k).copied().collect();
        defects.sort_unstable();
        let ids: Vec<u32> = defects.iter().map(|&d| d as u32).collect();
        let got = decoder.decode(&ids).unwrap().weight;
        let want = brute_force(&dist, boundary, &defects);
        assert!((got - want).abs() < 1e-6 * (1.0 + want), "{defects:?}: {got} vs {want}");
    }
}

#[test]
fn decoding_is_invariant_under_weight_scaling() {
    let dem = distance_three_dem(Basis::X, 2e-3);
    let a = Decoder::from_dem(&dem).unwrap();
    let b = Decoder::new(a.graph().scaled(3.7));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let k = rng.gen_range(1..=8);
        let mut defects: Vec<u32> = (0..dem.detector_count as u32).collect::<Vec<_>>().choose_multiple(&mut rng, k).copied().collect();
        defects.sort_unstable();
        let (x, y) = (a.decode(&defects).unwrap(), b.decode(&defects).unwrap());
        assert_eq!(x.prediction, y.prediction, "{defects:?}");
        assert!((x.weight * 3.7 - y.weight).abs() < 1e-5);
    }
}

#[test]
fn logical_error_rate_falls_with_distance_below_threshold() {
    let p = 3e-3;
    let shots = 50_000;
    let mut rates = Vec::new();
    for d in [3, 5, 7] {
        let c = build_memory_circuit(&build_layout(d).unwrap(), d, Basis::Z).unwrap();
        let cat = build_event_catalog(&c, &NoiseSpec::standard(p)).unwrap();
        let dem = build_dem(&c, &marginalize_catalog(&c, &cat).unwrap()).unwrap();
        let batch = Sampler::new(&c, &cat).sample(shots, 3);
        let predictions = Decoder::from_dem(&dem).unwrap().decode_batch(&batch).unwrap();
        let (failures, _) = logical_error_rate(&batch, &predictions).unwrap();
        rates.push(failures as f64);
    }
    // Poisson counts: successive differences must exceed 3σ.
    for w in rates.windows(2) {
        assert!(w[0] - w[1] > 3.0 * (w[0] + w[1]).sqrt(), "{rates:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matching_is_no_heavier_than_any_explanation(picks in prop::collection::vec(any::<prop::sample::Index>(), 0..5)) {
        let dem = distance_three_dem(Basis::Z, 1e-3);
        let decoder = Decoder::from_dem(&dem).unwrap();
        let mut fired = vec![false; dem.detector_count];
        let mut bound = 0.0;
        for idx in &picks {
            let m = &dem.mechanisms[idx.index(dem.mechanisms.len())];
            bound += ((1.0 - m.probability) / m.probability).ln();
            for &d in &m.detectors {
                fired[d as usize] ^= true;
            }
        }
        let defects: Vec<u32> = (0..fired.len() as u32).filter(|&d| fired[d as usize]).collect();
        let w = decoder.decode(&defects).unwrap().weight;
        prop_assert!(w <= bound + 1e-6, "{} > {}", w, bound);
    }
}
