//! Serializable description of a constructed two-layer code.
//!
//! A [`CodeSpec`] pins everything needed to run the key-agreement and
//! private-coding protocols deterministically: block lengths, thresholds,
//! the inner set partition, the per-level outer freeze sets, and a content
//! hash over the construction-relevant fields.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::construct::OuterEncoderModel;
use super::profile::{EntropyProfile, SetPartition};
use crate::{Error, Result};

/// Schema version of the serialized form.
pub const CODE_SPEC_SCHEMA: u32 = 1;

/// How the profiles behind a code were estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionMode {
    /// Exhaustive enumeration (small instances only).
    Exact,
    /// Monte Carlo estimation.
    Mc,
}

impl std::fmt::Display for ConstructionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConstructionMode::Exact => write!(f, "exact"),
            ConstructionMode::Mc => write!(f, "mc"),
        }
    }
}

impl std::str::FromStr for ConstructionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ConstructionMode::Exact),
            "mc" => Ok(ConstructionMode::Mc),
            other => Err(Error::invalid(format!(
                "unknown construction mode {other:?} (expected \"exact\" or \"mc\")"
            ))),
        }
    }
}

/// A constructed two-layer code.
///
/// The inner layer works at block length `l`: its set partition (against the
/// legitimate observation) marks the retained set `E_K` — the `d` indices
/// that are nearly deterministic given the legitimate observation plus the
/// published complement, so the legitimate receiver can recover them. The
/// complement (`r ∪ i`) is published. The outer layer works at block length
/// `m` across `m` inner blocks: level `j` carries the `j`-th retained bit of
/// every block, and `outer_f[j]` lists the transformed outer indices that are
/// nearly uniform given the adversary's observations — the key / message
/// positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSpec {
    /// Serialization schema version.
    pub schema_version: u32,
    /// Inner block length (power of two).
    pub l: usize,
    /// Outer block length (power of two); also the number of inner blocks.
    pub m: usize,
    /// Inner polarization threshold.
    pub eps1: f64,
    /// Outer polarization threshold.
    pub eps2: f64,
    /// Profile estimator used for construction.
    pub mode: ConstructionMode,
    /// Monte Carlo trials per profile (0 for exact mode).
    pub trials: u64,
    /// Master seed used during construction.
    pub seed: u64,
    /// Content hash of the source/channel the code was built for.
    pub source_hash: String,
    /// Inner-layer partition of the `l` transformed indices against the
    /// legitimate observation.
    pub inner: SetPartition,
    /// Inner-layer partition against the adversary observation (diagnostic;
    /// its `r` set is the nearly-uniform-for-the-adversary part).
    pub inner_adversary: SetPartition,
    /// Per-level outer freeze-complement sets: `outer_f[j]` are the outer
    /// indices of level `j` (ascending) that carry key/message bits.
    pub outer_f: Vec<Vec<usize>>,
    /// Inner entropy profile against the legitimate observation, if retained.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_profile: Option<EntropyProfile>,
    /// Inner entropy profile against the adversary observation, if retained.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_adversary_profile: Option<EntropyProfile>,
    /// Per-level outer entropy profiles, if retained.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_profiles: Option<Vec<EntropyProfile>>,
    /// Unix timestamp of construction (excluded from the content hash).
    pub created_unix: u64,
    /// SHA-256 over the canonical serialization of all fields above except
    /// `created_unix` and this field.
    pub content_hash: String,
    /// In-memory model of the retained-bit law used by the private-coding
    /// encoder. Rebuilt on load; never serialized.
    #[serde(skip)]
    pub encoder_model: Option<OuterEncoderModel>,
}

/// Helper mirror of the hashed subset of fields, in declaration order.
#[derive(Serialize)]
struct HashedView<'a> {
    schema_version: u32,
    l: usize,
    m: usize,
    eps1: f64,
    eps2: f64,
    mode: ConstructionMode,
    trials: u64,
    seed: u64,
    source_hash: &'a str,
    inner: &'a SetPartition,
    inner_adversary: &'a SetPartition,
    outer_f: &'a Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inner_profile: &'a Option<EntropyProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inner_adversary_profile: &'a Option<EntropyProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outer_profiles: &'a Option<Vec<EntropyProfile>>,
}

impl CodeSpec {
    /// Number of retained bits per inner block.
    pub fn k(&self) -> usize {
        self.inner.d.len()
    }

    /// Retained inner indices (nearly deterministic for the legitimate
    /// receiver), ascending.
    pub fn e_k(&self) -> &[usize] {
        &self.inner.d
    }

    /// Published inner indices, ascending: the complement of [`Self::e_k`].
    pub fn e_k_complement(&self) -> Vec<usize> {
        let mut keep = vec![true; self.l];
        for &i in &self.inner.d {
            keep[i] = false;
        }
        (0..self.l).filter(|&i| keep[i]).collect()
    }

    /// Total key/message bits across all outer levels.
    pub fn j_total(&self) -> usize {
        self.outer_f.iter().map(Vec::len).sum()
    }

    /// Total raw symbols covered by one protocol run: `l · m`.
    pub fn n(&self) -> usize {
        self.l * self.m
    }

    /// Key/message bits per raw symbol.
    pub fn rate(&self) -> f64 {
        self.j_total() as f64 / self.n() as f64
    }

    /// Computes the content hash over the construction-relevant fields.
    pub fn compute_content_hash(&self) -> String {
        let view = HashedView {
            schema_version: self.schema_version,
            l: self.l,
            m: self.m,
            eps1: self.eps1,
            eps2: self.eps2,
            mode: self.mode,
            trials: self.trials,
            seed: self.seed,
            source_hash: &self.source_hash,
            inner: &self.inner,
            inner_adversary: &self.inner_adversary,
            outer_f: &self.outer_f,
            inner_profile: &self.inner_profile,
            inner_adversary_profile: &self.inner_adversary_profile,
            outer_profiles: &self.outer_profiles,
        };
        let bytes = serde_json::to_vec(&view).expect("code spec view serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Structural validation plus content-hash verification.
    pub fn verify(&self) -> Result<()> {
        if self.schema_version != CODE_SPEC_SCHEMA {
            return Err(Error::invalid(format!(
                "code spec schema {} unsupported (expected {CODE_SPEC_SCHEMA})",
                self.schema_version
            )));
        }
        for (name, v) in [("l", self.l), ("m", self.m)] {
            if v == 0 || !v.is_power_of_two() {
                return Err(Error::invalid(format!(
                    "code spec: {name} = {v} is not a power of two"
                )));
            }
        }
        self.inner.validate(self.l)?;
        self.inner_adversary.validate(self.l)?;
        if self.outer_f.len() != self.k() {
            return Err(Error::invalid(format!(
                "code spec: {} outer levels but {} retained inner bits",
                self.outer_f.len(),
                self.k()
            )));
        }
        for (j, f) in self.outer_f.iter().enumerate() {
            let mut prev = None;
            for &i in f {
                if i >= self.m {
                    return Err(Error::invalid(format!(
                        "code spec: outer level {j} index {i} ≥ m = {}",
                        self.m
                    )));
                }
                if let Some(p) = prev {
                    if i <= p {
                        return Err(Error::invalid(format!(
                            "code spec: outer level {j} indices not strictly ascending"
                        )));
                    }
                }
                prev = Some(i);
            }
        }
        if let Some(profiles) = &self.outer_profiles {
            if profiles.len() != self.k() {
                return Err(Error::invalid(
                    "code spec: outer profile count differs from retained bits",
                ));
            }
        }
        let expect = self.compute_content_hash();
        if self.content_hash != expect {
            return Err(Error::invalid(format!(
                "code spec content hash mismatch: stored {}, computed {expect}",
                self.content_hash
            )));
        }
        Ok(())
    }

    /// Serializes to pretty JSON.
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and verifies a serialized spec. The in-memory encoder model is
    /// not restored; rebuild it via the construction entry point if needed.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: CodeSpec = serde_json::from_str(s)?;
        spec.verify()?;
        Ok(spec)
    }
}
