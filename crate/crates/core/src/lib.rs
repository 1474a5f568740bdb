//! Surface-code quantum memory under temporally correlated circuit-level noise.
//!
//! The pipeline is: build a rotated surface-code memory circuit
//! ([`circuit`]), describe its noise as a catalog of independent error events
//! ([`noise`]), compute the temporally independent model with the same
//! per-location marginals ([`marginal`]), sample detection events with a
//! bit-packed Pauli frame simulator ([`frame`]), build a matchable detector
//! error model ([`dem`]), decode with minimum-weight perfect matching
//! ([`decoder`]) and post-process the results ([`analysis`]).

pub mod analysis;
pub mod circuit;
pub mod decoder;
pub mod dem;
pub mod error;
pub mod frame;
pub mod marginal;
pub mod matching;
pub mod noise;
pub mod pauli;
pub mod shots;

pub use analysis::{
    autocorrelation, confidence_interval, fit, fit_weighted, pearson, per_round_rate,
    teraquop_distance, threshold_estimate, AutocorrMatrix, FitModel, FitResult, Teraquop,
    ThresholdEstimate,
};
pub use circuit::{
    build_layout, build_memory_circuit, Basis, DetectorDef, ErrorClass, ErrorLocation,
    GateInstruction, GateKind, Layout, MemoryCircuit, Op, QubitCoord, QubitKind, Slot,
};
pub use decoder::{logical_error_rate, Decoded, Decoder, MatchingGraph};
pub use dem::{build_dem, merge_probability, DetectorErrorModel, ErrorMechanism, PRUNE_BELOW};
pub use error::{Error, Result};
pub use frame::{sample, symptoms, PauliFrame, Sampler, Symptom, BLOCK_SHOTS};
pub use matching::{max_weight_matching, min_weight_perfect_matching};
pub use marginal::{combine_marginals, event_marginal, marginalize_catalog, MarginalModel};
pub use noise::{
    build_event_catalog, event_probability, sample_channel, Channel, ChannelKind, ClassNoise,
    CorrelatedSpec, Decay, ErrorEvent, EventCatalog, OutcomeDist, NoiseSpec, Structure,
};
pub use pauli::Pauli;
pub use shots::ShotBatch;
