//! Fixtures shared by the benchmarks.

use tcmem_core::*;

/// Circuit, correlated catalog and decoder for a `2d`-round Z memory.
pub struct Fixture {
    pub circuit: MemoryCircuit,
    pub catalog: EventCatalog,
    pub decoder: Decoder,
}

pub fn fixture(d: usize, noise: &NoiseSpec) -> Fixture {
    let circuit = build_memory_circuit(&build_layout(d).unwrap(), 2 * d, Basis::Z).unwrap();
    let catalog = build_event_catalog(&circuit, noise).unwrap();
    let marginal = marginalize_catalog(&circuit, &catalog).unwrap();
    let decoder = Decoder::from_dem(&build_dem(&circuit, &marginal).unwrap()).unwrap();
    Fixture {
        circuit,
        catalog,
        decoder,
    }
}

pub fn streaky(p: f64) -> NoiseSpec {
    NoiseSpec::fully_correlated(Structure::Streaky, Decay::Polynomial, 1.0, 2.0, p)
}

pub fn pairwise(p: f64) -> NoiseSpec {
    NoiseSpec::fully_correlated(Structure::Pairwise, Decay::Polynomial, 1.0, 2.0, p)
}
