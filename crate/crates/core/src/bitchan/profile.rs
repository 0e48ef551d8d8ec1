//! Bit-channel entropy profiles and threshold set selection.
//!
//! A profile lists `h_i = H(U_i | U^{i−1}, S^N)` for every bit index of a
//! transformed block whose source bits are i.i.d. pairs `(X, S)`. Three
//! estimators:
//!
//! * [`exact_entropy_profile`] — full enumeration over side configurations
//!   and transformed blocks, feasible while `(2 · #distinct posteriors)^N`
//!   stays within the work bound;
//! * [`mc_entropy_profile`] — Monte Carlo plug-in: the per-index average of
//!   `−log₂ P(U_i = u_i | u^{i−1}, s^N)` over sampled blocks, with per-index
//!   standard errors and an argmax-mismatch error proxy;
//! * [`bec_entropy_profile`] — the closed-form erasure recursion
//!   `z⁻ = 2z − z²`, `z⁺ = z²` for uniform input through a binary erasure
//!   observation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::sc::{Feed, ProbPair, ScEngine};
use crate::probability::{Categorical, PairJoint};
use crate::rng::{Domain, Streams};
use crate::{Error, Result};

/// Work bound for exhaustive profile enumeration: the number of enumerated
/// `(u^N, side^N)` states may not exceed `2^26`.
pub const EXHAUSTIVE_STATE_CAP: f64 = (1u64 << 26) as f64;

/// Trials per parallel chunk in Monte Carlo estimation. Chunks are reduced in
/// index order, so results are bit-identical for any thread count.
const MC_CHUNK: u64 = 256;

/// Minimum Monte Carlo sample size accepted by the estimators.
pub const MIN_MC_TRIALS: u64 = 100;

/// How a profile was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum Provenance {
    /// Full enumeration.
    Exact,
    /// Monte Carlo plug-in estimate.
    MonteCarlo {
        /// Number of sampled blocks.
        trials: u64,
    },
    /// Erasure closed-form recursion.
    BecClosedForm,
}

/// Per-index conditional entropies of a transformed block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile {
    /// `h[i] = H(U_i | U^{i−1}, S^N)` in bits, clamped to `[0, 1]`.
    pub h: Vec<f64>,
    /// Estimator provenance.
    pub provenance: Provenance,
    /// Per-index standard error of the Monte Carlo mean (estimators only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_err: Option<Vec<f64>>,
    /// Per-index argmax-mismatch frequency, an error-probability proxy
    /// (Monte Carlo only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub err_proxy: Option<Vec<f64>>,
}

impl EntropyProfile {
    /// Block length.
    pub fn len(&self) -> usize {
        self.h.len()
    }

    /// True for an empty profile.
    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// Mean entry; by the chain rule this equals `H(X | S)` for exact
    /// profiles.
    pub fn mean(&self) -> f64 {
        if self.h.is_empty() {
            return 0.0;
        }
        self.h.iter().sum::<f64>() / self.h.len() as f64
    }
}

fn clamp_unit(v: f64, what: &str) -> Result<f64> {
    if !(-1e-9..=1.0 + 1e-9).contains(&v) {
        return Err(Error::invalid(format!(
            "{what}: entropy entry {v} outside [0, 1] beyond tolerance"
        )));
    }
    Ok(v.clamp(0.0, 1.0))
}

fn require_block_len(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::invalid(format!(
            "profile length {n} is not a power of two"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// exact enumeration
// ---------------------------------------------------------------------------

/// One support atom of a binary-`X` pair source: `P(X = x, S = side)`.
///
/// The sparse atom form lets callers describe side alphabets that are huge as
/// an index space but small in support (e.g. composite side symbols of an
/// enumerated super-source).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideAtom {
    /// The bit value.
    pub x: u8,
    /// Opaque side-symbol key.
    pub side: u64,
    /// Joint probability.
    pub p: f64,
}

/// Exact entropy profile of a binary pair source at block length `n`.
pub fn exact_entropy_profile(joint: &PairJoint, n: usize) -> Result<EntropyProfile> {
    if joint.x_card != 2 {
        return Err(Error::invalid(format!(
            "exact profile: X must be binary (got |X| = {})",
            joint.x_card
        )));
    }
    let mut atoms = Vec::new();
    for x in 0..2u8 {
        for s in 0..joint.s_card {
            let p = joint.p(x as usize, s);
            if p > 0.0 {
                atoms.push(SideAtom {
                    x,
                    side: s as u64,
                    p,
                });
            }
        }
    }
    exact_entropy_profile_atoms(&atoms, n)
}

/// Exact entropy profile from sparse pair-source atoms (see [`SideAtom`]).
///
/// Side symbols with bitwise-identical posteriors are merged before
/// enumeration; the work bound then applies to
/// `(2 · #posterior classes)^n` states.
pub fn exact_entropy_profile_atoms(atoms: &[SideAtom], n: usize) -> Result<EntropyProfile> {
    require_block_len(n)?;
    let classes = posterior_classes(atoms)?;
    let nc = classes.len();
    let states = (2.0 * nc as f64).powi(n as i32);
    if states > EXHAUSTIVE_STATE_CAP {
        return Err(Error::Infeasible {
            detail: format!("exact profile at n = {n} over {nc} posterior classes"),
            estimate: states,
            cap: EXHAUSTIVE_STATE_CAP,
        });
    }

    let size = 1usize << n;
    // u_to_x[u] = integer encoding of G applied to the bits of u, both packed
    // with bit index 0 as the most significant position of the n-bit word so
    // that prefixes of u are contiguous integer ranges.
    let u_to_x = transform_index_map(n);

    let mut h_acc = vec![0.0f64; n];
    // Odometer over class assignments for the n positions.
    let mut assign = vec![0usize; n];
    let mut table_x = vec![0.0f64; size];
    let mut table_u = vec![0.0f64; size];
    loop {
        let mut weight = 1.0;
        for k in 0..n {
            weight *= classes[assign[k]].prob;
        }
        if weight > 0.0 {
            // P(x-block | classes), built as an iterated tensor product with
            // position 0 as the most significant bit.
            table_x[0] = 1.0;
            let mut filled = 1usize;
            for k in 0..n {
                let post = &classes[assign[k]].posterior;
                for i in (0..filled).rev() {
                    let base = table_x[i];
                    table_x[2 * i] = base * post.p0();
                    table_x[2 * i + 1] = base * post.p1();
                }
                filled *= 2;
            }
            for u in 0..size {
                table_u[u] = table_x[u_to_x[u]];
            }
            // Fold tails to obtain prefix probabilities and accumulate
            // per-index conditional entropies.
            // After iteration i the table holds P(u^{i}) over 2^i prefixes.
            let mut len = size;
            let mut i = n;
            while i >= 1 {
                len /= 2;
                for p in 0..len {
                    let a = table_u[2 * p];
                    let b = table_u[2 * p + 1];
                    let tot = a + b;
                    if tot > 0.0 {
                        let mut contrib = 0.0;
                        if a > 0.0 {
                            contrib -= a * (a / tot).log2();
                        }
                        if b > 0.0 {
                            contrib -= b * (b / tot).log2();
                        }
                        h_acc[i - 1] += weight * contrib;
                    }
                    table_u[p] = tot;
                }
                i -= 1;
            }
        }
        // Advance the odometer.
        let mut k = 0;
        loop {
            if k == n {
                break;
            }
            assign[k] += 1;
            if assign[k] < nc {
                break;
            }
            assign[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }

    let h = h_acc
        .into_iter()
        .map(|v| clamp_unit(v, "exact profile"))
        .collect::<Result<Vec<_>>>()?;
    Ok(EntropyProfile {
        h,
        provenance: Provenance::Exact,
        std_err: None,
        err_proxy: None,
    })
}

struct PosteriorClass {
    prob: f64,
    posterior: ProbPair,
}

/// Groups side symbols by bitwise-identical posterior pairs.
///
/// Ordered maps keep every accumulation order — and therefore every floating
/// point result — independent of hasher state across runs.
fn posterior_classes(atoms: &[SideAtom]) -> Result<Vec<PosteriorClass>> {
    let mut by_side: BTreeMap<u64, [f64; 2]> = BTreeMap::new();
    for a in atoms {
        if a.x > 1 {
            return Err(Error::invalid("side atom with non-binary x"));
        }
        if !(a.p.is_finite()) || a.p < 0.0 {
            return Err(Error::invalid(format!("side atom with bad probability {}", a.p)));
        }
        by_side.entry(a.side).or_default()[a.x as usize] += a.p;
    }
    let total: f64 = by_side.values().map(|v| v[0] + v[1]).sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "side atoms sum to {total}, not a distribution"
        )));
    }
    let mut by_posterior: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    for v in by_side.values() {
        let mass = v[0] + v[1];
        if mass <= 0.0 {
            continue;
        }
        let post = ProbPair::new(v[0], v[1])?;
        *by_posterior
            .entry((post.p0().to_bits(), post.p1().to_bits()))
            .or_insert(0.0) += mass / total;
    }
    Ok(by_posterior
        .into_iter()
        .map(|((b0, b1), prob)| PosteriorClass {
            prob,
            posterior: ProbPair::new(f64::from_bits(b0), f64::from_bits(b1))
                .expect("stored posterior is valid"),
        })
        .collect())
}

/// For each `u` (bits packed with index 0 most significant), the packed
/// transform `G u`.
fn transform_index_map(n: usize) -> Vec<usize> {
    let size = 1usize << n;
    let mut map = vec![0usize; size];
    let mut bits = vec![0u8; n];
    for u in 0..size {
        for (k, b) in bits.iter_mut().enumerate() {
            *b = ((u >> (n - 1 - k)) & 1) as u8;
        }
        crate::polar::transform_in_place(&mut bits).expect("power of two");
        let mut x = 0usize;
        for (k, &b) in bits.iter().enumerate() {
            x |= (b as usize) << (n - 1 - k);
        }
        map[u] = x;
    }
    map
}

// ---------------------------------------------------------------------------
// Monte Carlo estimation
// ---------------------------------------------------------------------------

/// Monte Carlo entropy profile of a binary pair source at block length `n`.
///
/// Each trial samples `n` i.i.d. `(x, s)` pairs, transforms the `x` block and
/// replays it through the exact pass, accumulating `−log₂` of the true-bit
/// conditional at every index (the plug-in estimator) together with the
/// argmax-mismatch frequency. Trials derive their random streams from
/// `(seed, trial index)`, so the estimate is reproducible for any thread
/// count.
pub fn mc_entropy_profile(
    joint: &PairJoint,
    n: usize,
    trials: u64,
    seed: u64,
) -> Result<EntropyProfile> {
    mc_entropy_profile_streamed(joint, n, trials, &Streams::new(seed), 0)
}

/// Monte Carlo profile drawing trial `t` from stream `stream_offset + t` of
/// the given stream family. Lets multi-phase procedures estimate several
/// profiles from one master seed without stream reuse.
pub(crate) fn mc_entropy_profile_streamed(
    joint: &PairJoint,
    n: usize,
    trials: u64,
    streams: &Streams,
    stream_offset: u64,
) -> Result<EntropyProfile> {
    require_block_len(n)?;
    if joint.x_card != 2 {
        return Err(Error::invalid(format!(
            "mc profile: X must be binary (got |X| = {})",
            joint.x_card
        )));
    }
    if trials < MIN_MC_TRIALS {
        return Err(Error::invalid(format!(
            "mc profile: {trials} trials below the minimum of {MIN_MC_TRIALS}"
        )));
    }
    let model = PairModel::new(joint)?;

    let nchunks = trials.div_ceil(MC_CHUNK);
    let chunks: Vec<McAccum> = (0..nchunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * MC_CHUNK;
            let hi = (lo + MC_CHUNK).min(trials);
            let mut acc = McAccum::new(n);
            let mut engine = ScEngine::new();
            let mut xbits = vec![0u8; n];
            let mut ubits = vec![0u8; n];
            let mut leaves = vec![ProbPair::uniform(); n];
            for trial in lo..hi {
                let mut rng = streams.stream(Domain::Construction, stream_offset + trial);
                model.sample_block(&mut rng, &mut xbits, &mut leaves);
                ubits.copy_from_slice(&xbits);
                crate::polar::transform_in_place(&mut ubits).expect("power of two");
                match engine.pass(&leaves, &mut Feed::new(&ubits)) {
                    Ok(()) => acc.absorb(engine.pairs(), &ubits),
                    Err(Error::ZeroProbability { .. }) => acc.aborted += 1,
                    Err(e) => panic!("unexpected pass failure: {e}"),
                }
            }
            acc
        })
        .collect();

    let mut total = McAccum::new(n);
    for c in chunks {
        total.merge(&c);
    }
    total.finish(trials)
}

/// Precomputed sampler plus posteriors for a binary pair source.
pub(crate) struct PairModel {
    sampler: Categorical,
    s_card: usize,
    /// Posterior `P(x | s)` per side symbol (undefined sides never sampled).
    posteriors: Vec<ProbPair>,
}

impl PairModel {
    pub(crate) fn new(joint: &PairJoint) -> Result<Self> {
        let side = joint.side_marginal();
        let posteriors = (0..joint.s_card)
            .map(|s| {
                if side[s] > 0.0 {
                    ProbPair::new(joint.p(0, s), joint.p(1, s))
                } else {
                    Ok(ProbPair::uniform())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PairModel {
            sampler: Categorical::new(&joint.p),
            s_card: joint.s_card,
            posteriors,
        })
    }

    pub(crate) fn sample_block<R: rand::Rng>(
        &self,
        rng: &mut R,
        x: &mut [u8],
        leaves: &mut [ProbPair],
    ) {
        for k in 0..x.len() {
            let flat = self.sampler.sample(rng);
            x[k] = (flat / self.s_card) as u8;
            leaves[k] = self.posteriors[flat % self.s_card];
        }
    }
}

struct McAccum {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    mismatch: Vec<u64>,
    aborted: u64,
}

impl McAccum {
    fn new(n: usize) -> Self {
        McAccum {
            sum: vec![0.0; n],
            sumsq: vec![0.0; n],
            mismatch: vec![0; n],
            aborted: 0,
        }
    }

    fn absorb(&mut self, pairs: &[ProbPair], u: &[u8]) {
        for i in 0..u.len() {
            let p = pairs[i].p(u[i]);
            let v = -p.log2();
            self.sum[i] += v;
            self.sumsq[i] += v * v;
            if pairs[i].argmax() != u[i] {
                self.mismatch[i] += 1;
            }
        }
    }

    fn merge(&mut self, other: &McAccum) {
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sumsq[i] += other.sumsq[i];
            self.mismatch[i] += other.mismatch[i];
        }
        self.aborted += other.aborted;
    }

    fn finish(self, trials: u64) -> Result<EntropyProfile> {
        let used = trials - self.aborted;
        if used == 0 {
            return Err(Error::invalid(
                "mc profile: every trial hit a zero-probability event",
            ));
        }
        let t = used as f64;
        let n = self.sum.len();
        let mut h = Vec::with_capacity(n);
        let mut se = Vec::with_capacity(n);
        let mut proxy = Vec::with_capacity(n);
        for i in 0..n {
            let mean = self.sum[i] / t;
            let var = (self.sumsq[i] / t - mean * mean).max(0.0);
            h.push(mean.clamp(0.0, 1.0));
            se.push((var / t).sqrt());
            proxy.push(self.mismatch[i] as f64 / t);
        }
        Ok(EntropyProfile {
            h,
            provenance: Provenance::MonteCarlo { trials: used },
            std_err: Some(se),
            err_proxy: Some(proxy),
        })
    }
}

// ---------------------------------------------------------------------------
// erasure closed form
// ---------------------------------------------------------------------------

/// Closed-form entropy profile for uniform input observed through a binary
/// erasure with probability `erasure`.
///
/// Bit `i`'s entry evolves the erasure parameter along the binary expansion
/// of `i` (most significant level first): a first-half branch applies
/// `z ← 2z − z²`, a second-half branch `z ← z²`. The entry equals the exact
/// conditional entropy `H(U_i | U^{i−1}, S^N)`.
pub fn bec_entropy_profile(erasure: f64, n: usize) -> Result<EntropyProfile> {
    require_block_len(n)?;
    if !(0.0..=1.0).contains(&erasure) {
        return Err(Error::invalid(format!(
            "bec profile: erasure {erasure} not in [0, 1]"
        )));
    }
    let levels = n.trailing_zeros();
    let h = (0..n)
        .map(|i| {
            let mut z = erasure;
            for level in (0..levels).rev() {
                if (i >> level) & 1 == 0 {
                    z = 2.0 * z - z * z;
                } else {
                    z = z * z;
                }
            }
            z
        })
        .collect();
    Ok(EntropyProfile {
        h,
        provenance: Provenance::BecClosedForm,
        std_err: None,
        err_proxy: None,
    })
}

// ---------------------------------------------------------------------------
// set selection
// ---------------------------------------------------------------------------

/// Threshold partition of a profile: nearly uniform `R` (`h ≥ 1 − eps`),
/// nearly deterministic `D` (`h ≤ eps`), unpolarized remainder `I`.
///
/// Boundary values belong to `R` and `D` respectively. All index lists are
/// sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetPartition {
    /// Threshold used for the split.
    pub eps: f64,
    /// Nearly uniform indices.
    pub r: Vec<usize>,
    /// Nearly deterministic indices.
    pub d: Vec<usize>,
    /// Unpolarized indices.
    pub i: Vec<usize>,
}

impl SetPartition {
    /// Checks internal consistency against a block length.
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(0.0 < self.eps && self.eps < 0.5) {
            return Err(Error::invalid(format!(
                "set partition: eps {} outside (0, 0.5)",
                self.eps
            )));
        }
        let mut seen = vec![false; n];
        for set in [&self.r, &self.d, &self.i] {
            let mut prev = None;
            for &idx in set {
                if idx >= n {
                    return Err(Error::invalid(format!("set partition: index {idx} ≥ {n}")));
                }
                if let Some(p) = prev {
                    if idx <= p {
                        return Err(Error::invalid("set partition: indices not strictly ascending"));
                    }
                }
                if seen[idx] {
                    return Err(Error::invalid(format!("set partition: index {idx} repeated")));
                }
                seen[idx] = true;
                prev = Some(idx);
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::invalid("set partition: indices do not cover the block"));
        }
        Ok(())
    }
}

/// Splits a profile at threshold `eps ∈ (0, 0.5)`.
pub fn select_sets(profile: &EntropyProfile, eps: f64) -> Result<SetPartition> {
    if !(0.0 < eps && eps < 0.5) {
        return Err(Error::invalid(format!(
            "select_sets: eps {eps} outside (0, 0.5)"
        )));
    }
    let mut r = Vec::new();
    let mut d = Vec::new();
    let mut i = Vec::new();
    for (idx, &h) in profile.h.iter().enumerate() {
        if h >= 1.0 - eps {
            r.push(idx);
        } else if h <= eps {
            d.push(idx);
        } else {
            i.push(idx);
        }
    }
    Ok(SetPartition { eps, r, d, i })
}
