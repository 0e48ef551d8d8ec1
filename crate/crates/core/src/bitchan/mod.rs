//! Bit-channel analysis: the successive-cancellation recursion, entropy
//! profiles, index-set selection, and two-layer code construction.
//!
//! After the polarization transform, bit `i` of `U^N = G_N X^N` sees the
//! synthetic "bit channel" with output `(U^{i−1}, S^N)`, where `S` is
//! whatever side information the observer holds (Bob's `Y`, Eve's `Z`, or
//! nothing). The conditional entropies `h_i = H(U_i | U^{i−1}, S^N)` form the
//! *entropy profile* of the block; thresholding the profile yields the
//! nearly-uniform set `R` (`h_i ≥ 1 − ε`), the nearly-deterministic set `D`
//! (`h_i ≤ ε`) and the unpolarized remainder `I`.
//!
//! Three estimators are provided: exact enumeration (small blocks), Monte
//! Carlo plug-in estimation (any block length), and the closed-form erasure
//! recursion (binary erasure side information). [`construct_code`] combines
//! them into a two-layer code description: the inner partition at `ε₁` with
//! respect to Bob, and per-level outer extraction sets at `ε₂` with respect
//! to the eavesdropper's joint view.

pub(crate) mod construct;
mod profile;
mod sc;
mod spec;

pub use construct::{
    construct_code, exact_transformed_law, rebuild_encoder_model, ConstructParams, ContextTracker,
    OuterEncoderModel, TransformedAtom, EMPIRICAL_CONTEXT_BITS, EXACT_INNER_MAX_L,
};
pub use profile::{
    bec_entropy_profile, exact_entropy_profile, exact_entropy_profile_atoms, mc_entropy_profile,
    select_sets, EntropyProfile, Provenance, SetPartition, SideAtom, EXHAUSTIVE_STATE_CAP,
    MIN_MC_TRIALS,
};
pub use sc::{check_combine, sc_pass, var_combine, BitSource, Feed, ProbPair, ScEngine, ScPassOutput};
pub use spec::{CodeSpec, ConstructionMode, CODE_SPEC_SCHEMA};
