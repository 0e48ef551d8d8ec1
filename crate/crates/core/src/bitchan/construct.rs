//! Two-layer code construction.
//!
//! The inner layer profiles the transformed source bits against the
//! legitimate observation at block length `l` and retains the nearly
//! deterministic set `E_K`. The outer layer then treats the retained bits of
//! `m` consecutive blocks as `K` bit levels, profiles each level against the
//! adversary's full view (retained bits of lower levels, the published
//! complement, and the adversary sequence), and selects the nearly uniform
//! outer indices `F_(j)` that carry key or message bits.
//!
//! Construction runs in two modes: exhaustive enumeration for small blocks,
//! and seeded Monte Carlo estimation otherwise. Both are deterministic given
//! their inputs and seed.

use rayon::prelude::*;
use std::collections::BTreeMap;

use super::profile::{
    exact_entropy_profile, exact_entropy_profile_atoms, mc_entropy_profile_streamed, select_sets,
    EntropyProfile, PairModel, Provenance, SetPartition, SideAtom, MIN_MC_TRIALS,
};
use super::sc::{Feed, ProbPair, ScEngine};
use super::spec::{CodeSpec, ConstructionMode, CODE_SPEC_SCHEMA};
use crate::probability::{PairJoint, WiretapSource};
use crate::rng::{Domain, Streams};
use crate::{Error, Result};

/// Largest inner block accepted in exhaustive mode.
pub const EXACT_INNER_MAX_L: usize = 8;

/// Context window (in bit levels) of the fitted retained-bit model.
pub const EMPIRICAL_CONTEXT_BITS: u32 = 8;

/// Stream-index spacing between construction phases, so every phase of a
/// multi-phase construction draws from disjoint streams of one master seed.
const PHASE_SPAN: u64 = 1 << 40;

/// Super-block trials per parallel chunk in the Monte Carlo outer phase;
/// chunks reduce in index order for thread-count-independent results.
const OUTER_CHUNK: u64 = 64;

/// Parameters of [`construct_code`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructParams {
    /// Inner block length (power of two).
    pub l: usize,
    /// Outer block length = number of inner blocks per run (power of two).
    pub m: usize,
    /// Inner threshold (retained set: entries ≤ `eps1` against the
    /// legitimate observation).
    pub eps1: f64,
    /// Outer threshold (key set: entries ≥ `1 − eps2` against the adversary).
    pub eps2: f64,
    /// Estimator choice.
    pub mode: ConstructionMode,
    /// Monte Carlo trials per profile phase (ignored in exact mode).
    pub trials: u64,
    /// Master seed for Monte Carlo phases.
    pub seed: u64,
    /// Embed the estimated profiles in the resulting spec.
    pub keep_profiles: bool,
}

// ---------------------------------------------------------------------------
// exhaustive transformed law
// ---------------------------------------------------------------------------

/// One atom of the joint law of (transformed block, side sequence).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedAtom {
    /// Transformed bits, packed with block position `k` at integer bit `k`.
    pub v: u64,
    /// Side sequence index `Σ_k side_k · |S|^k`.
    pub side: u64,
    /// Joint probability.
    pub p: f64,
}

/// Enumerates the exact joint law of `(V, S^n)` where `V` is the transform of
/// `n` i.i.d. source bits and `S^n` the matching side sequence.
///
/// Only atoms with positive probability are returned, in a fixed order.
pub fn exact_transformed_law(joint: &PairJoint, n: usize) -> Result<Vec<TransformedAtom>> {
    if joint.x_card != 2 {
        return Err(Error::invalid(format!(
            "transformed law: X must be binary (got |X| = {})",
            joint.x_card
        )));
    }
    if n == 0 || !n.is_power_of_two() || n > 26 {
        return Err(Error::invalid(format!(
            "transformed law: block length {n} not a power of two in [1, 26]"
        )));
    }
    let states = 2f64.powi(n as i32) * (joint.s_card as f64).powi(n as i32);
    let cap = super::profile::EXHAUSTIVE_STATE_CAP;
    if states > cap {
        return Err(Error::Infeasible {
            detail: format!(
                "transformed-law enumeration at n = {n} over a side alphabet of {}",
                joint.s_card
            ),
            estimate: states,
            cap,
        });
    }

    let sc = joint.s_card;
    let mut atoms = Vec::new();
    let mut bits = vec![0u8; n];
    let mut digits = vec![0usize; n];
    for x in 0u64..(1 << n) {
        for (k, b) in bits.iter_mut().enumerate() {
            *b = ((x >> k) & 1) as u8;
        }
        crate::polar::transform_in_place(&mut bits)?;
        let mut v = 0u64;
        for (k, &b) in bits.iter().enumerate() {
            v |= (b as u64) << k;
        }
        digits.iter_mut().for_each(|d| *d = 0);
        let mut side = 0u64;
        loop {
            let mut p = 1.0;
            for k in 0..n {
                p *= joint.p(((x >> k) & 1) as usize, digits[k]);
                if p == 0.0 {
                    break;
                }
            }
            if p > 0.0 {
                atoms.push(TransformedAtom { v, side, p });
            }
            // Advance the side odometer, keeping the packed index in step.
            let mut k = 0;
            let mut place = 1u64;
            loop {
                if k == n {
                    break;
                }
                digits[k] += 1;
                side += place;
                if digits[k] < sc {
                    break;
                }
                side -= place * sc as u64;
                digits[k] = 0;
                place *= sc as u64;
                k += 1;
            }
            if k == n {
                break;
            }
        }
    }
    Ok(atoms)
}

/// Bit `r` of the result is bit `positions[r]` of `v`.
pub(crate) fn pack_bits(v: u64, positions: &[usize]) -> u64 {
    let mut out = 0u64;
    for (r, &pos) in positions.iter().enumerate() {
        out |= ((v >> pos) & 1) << r;
    }
    out
}

// ---------------------------------------------------------------------------
// encoder-side model of the retained-bit law
// ---------------------------------------------------------------------------

/// Conditional model `P(T_j | T_{<j})` of the retained bits of one inner
/// block, used by the private-coding encoder to simulate non-message outer
/// bits. Held in memory only; rebuilt from the source when a spec is loaded.
#[derive(Debug, Clone, PartialEq)]
pub enum OuterEncoderModel {
    /// Retained bits are i.i.d. fair coins (exact for a uniform binary
    /// source, since the transform is a bijection).
    Uniform,
    /// Exhaustively enumerated conditionals; `levels[j][ctx]` holds the
    /// masses of `T_j = 0, 1` given the full context `ctx = t_{<j}` packed
    /// with level `r` at integer bit `r`.
    Exact { levels: Vec<Vec<[f64; 2]>> },
    /// Counts fitted from sampled blocks over a sliding context window;
    /// `levels[j]` maps a windowed context key to observation counts.
    Empirical {
        levels: Vec<BTreeMap<u64, [u64; 2]>>,
        width: u32,
    },
}

/// Rolling context key matching a model's window; feed retained bits in
/// level order and read the key before each level's decision.
#[derive(Debug, Clone, Copy)]
pub struct ContextTracker {
    key: u64,
    filled: u32,
    width: u32,
}

impl ContextTracker {
    /// Current context key for the next level.
    pub fn key(&self) -> u64 {
        self.key
    }

    /// Records the realized bit of the level just decided.
    pub fn push(&mut self, bit: u8) {
        debug_assert!(bit <= 1);
        if self.width == 0 {
            return;
        }
        if self.filled < self.width {
            self.key |= (bit as u64) << self.filled;
            self.filled += 1;
        } else {
            self.key = (self.key >> 1) | ((bit as u64) << (self.width - 1));
        }
    }
}

impl OuterEncoderModel {
    /// Context window width in levels.
    fn context_width(&self) -> u32 {
        match self {
            OuterEncoderModel::Uniform => 0,
            // Full context; construction caps exhaustive mode far below 63
            // levels.
            OuterEncoderModel::Exact { .. } => 63,
            OuterEncoderModel::Empirical { width, .. } => *width,
        }
    }

    /// Fresh tracker for one block's retained-bit sequence.
    pub fn tracker(&self) -> ContextTracker {
        ContextTracker {
            key: 0,
            filled: 0,
            width: self.context_width(),
        }
    }

    /// Conditional of level `level` given the tracked context. The flag is
    /// true when the context was outside the model's support and the uniform
    /// fallback was substituted.
    pub fn leaf_prior(&self, level: usize, key: u64) -> (ProbPair, bool) {
        match self {
            OuterEncoderModel::Uniform => (ProbPair::uniform(), false),
            OuterEncoderModel::Exact { levels } => {
                let [m0, m1] = levels[level][key as usize];
                if m0 + m1 > 0.0 {
                    (ProbPair::new(m0, m1).expect("positive mass"), false)
                } else {
                    (ProbPair::uniform(), true)
                }
            }
            OuterEncoderModel::Empirical { levels, .. } => match levels[level].get(&key) {
                Some(&[c0, c1]) if c0 + c1 > 0 => (
                    ProbPair::new(c0 as f64, c1 as f64).expect("positive count"),
                    false,
                ),
                _ => (ProbPair::uniform(), true),
            },
        }
    }
}

/// Exhaustive retained-tuple conditionals for i.i.d. bits with marginal
/// `p_x` transformed at length `l` and read at `positions`.
fn exact_retained_model(p_x: &[f64], l: usize, positions: &[usize]) -> Result<OuterEncoderModel> {
    let k = positions.len();
    if k > 26 {
        return Err(Error::Infeasible {
            detail: format!("exhaustive retained-bit model over {k} levels"),
            estimate: 2f64.powi(k as i32),
            cap: (1u64 << 26) as f64,
        });
    }
    let mut t_law = vec![0.0f64; 1 << k];
    let mut bits = vec![0u8; l];
    for x in 0u64..(1 << l) {
        let mut p = 1.0;
        for (kk, b) in bits.iter_mut().enumerate() {
            *b = ((x >> kk) & 1) as u8;
            p *= p_x[*b as usize];
        }
        if p == 0.0 {
            continue;
        }
        crate::polar::transform_in_place(&mut bits)?;
        let mut t = 0u64;
        for (r, &pos) in positions.iter().enumerate() {
            t |= (bits[pos] as u64) << r;
        }
        t_law[t as usize] += p;
    }
    let mut levels = Vec::with_capacity(k);
    for j in 0..k {
        let mut table = vec![[0.0f64; 2]; 1 << j];
        let mask = (1u64 << j) - 1;
        for (t, &p) in t_law.iter().enumerate() {
            let ctx = (t as u64 & mask) as usize;
            let bit = (t >> j) & 1;
            table[ctx][bit] += p;
        }
        levels.push(table);
    }
    Ok(OuterEncoderModel::Exact { levels })
}

fn x_is_uniform(source: &WiretapSource) -> bool {
    let m = source.x_marginal();
    m.len() == 2 && (m.p(0) - 0.5).abs() < 1e-9
}

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

/// Builds a two-layer code for a source, tagging it with the caller's hash of
/// that source. Deterministic given `(source, params)`.
pub fn construct_code(
    source: &WiretapSource,
    source_hash: &str,
    params: &ConstructParams,
) -> Result<CodeSpec> {
    let (nx, _, _) = source.dims();
    if nx != 2 {
        return Err(Error::invalid(format!(
            "construction requires a binary source (got |X| = {nx})"
        )));
    }
    for (name, v) in [("l", params.l), ("m", params.m)] {
        if v == 0 || !v.is_power_of_two() {
            return Err(Error::invalid(format!(
                "construction: {name} = {v} is not a power of two"
            )));
        }
    }
    for (name, eps) in [("eps1", params.eps1), ("eps2", params.eps2)] {
        if !(0.0 < eps && eps < 0.5) {
            return Err(Error::invalid(format!(
                "construction: {name} = {eps} outside (0, 0.5)"
            )));
        }
    }

    let xy = source.xy_joint();
    let xz = source.xz_joint();
    let built = match params.mode {
        ConstructionMode::Exact => build_exact(source, &xy, &xz, params)?,
        ConstructionMode::Mc => build_mc(source, &xy, &xz, params)?,
    };
    let BuiltCode {
        inner_profile,
        adversary_profile,
        outer_profiles,
        outer_f,
        model,
        trials,
    } = built;

    let inner = inner_partition(&inner_profile, params.eps1)?;
    let inner_adversary = select_sets(&adversary_profile, params.eps1)?;

    let created_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut spec = CodeSpec {
        schema_version: CODE_SPEC_SCHEMA,
        l: params.l,
        m: params.m,
        eps1: params.eps1,
        eps2: params.eps2,
        mode: params.mode,
        trials,
        seed: params.seed,
        source_hash: source_hash.to_string(),
        inner,
        inner_adversary,
        outer_f,
        inner_profile: params.keep_profiles.then_some(inner_profile),
        inner_adversary_profile: params.keep_profiles.then_some(adversary_profile),
        outer_profiles: params.keep_profiles.then_some(outer_profiles),
        created_unix,
        content_hash: String::new(),
        encoder_model: Some(model),
    };
    spec.content_hash = spec.compute_content_hash();
    spec.verify()?;
    Ok(spec)
}

struct BuiltCode {
    inner_profile: EntropyProfile,
    adversary_profile: EntropyProfile,
    outer_profiles: Vec<EntropyProfile>,
    outer_f: Vec<Vec<usize>>,
    model: OuterEncoderModel,
    trials: u64,
}

/// Inner partition used for the receiver's decodable set.
///
/// The entropy threshold alone does not control the decoder's error rate: an
/// index can satisfy `h ≤ ε₁` while its conditional is occasionally close to
/// uniform, and those occasions become decode errors. Monte Carlo profiles
/// therefore record each index's argmax-mismatch frequency, and any
/// below-threshold index whose construction sample observed at least one
/// mismatch is demoted from `D` to the undecided set `I`. The demoted
/// indices are still published (they sit in the complement), so reliability
/// improves at a small rate cost; every retained index keeps `h ≤ ε₁`, so
/// entropy-budget bounds over the retained set are unaffected. Exact and
/// closed-form profiles carry no mismatch record and are left as selected.
fn inner_partition(profile: &EntropyProfile, eps1: f64) -> Result<SetPartition> {
    let mut sets = select_sets(profile, eps1)?;
    if let Some(err) = &profile.err_proxy {
        let (keep, demote): (Vec<usize>, Vec<usize>) =
            sets.d.iter().partition(|&&i| err[i] <= 0.0);
        if !demote.is_empty() {
            sets.d = keep;
            sets.i.extend(demote);
            sets.i.sort_unstable();
        }
    }
    Ok(sets)
}

fn retained_set(profile: &EntropyProfile, eps1: f64) -> Result<Vec<usize>> {
    Ok(inner_partition(profile, eps1)?.d)
}

fn build_exact(
    source: &WiretapSource,
    xy: &PairJoint,
    xz: &PairJoint,
    params: &ConstructParams,
) -> Result<BuiltCode> {
    if params.l > EXACT_INNER_MAX_L {
        return Err(Error::Infeasible {
            detail: format!(
                "exhaustive construction at inner block {} (cap {EXACT_INNER_MAX_L})",
                params.l
            ),
            estimate: params.l as f64,
            cap: EXACT_INNER_MAX_L as f64,
        });
    }
    let inner_profile = exact_entropy_profile(xy, params.l)?;
    let adversary_profile = exact_entropy_profile(xz, params.l)?;
    let e_k = retained_set(&inner_profile, params.eps1)?;

    let (outer_f, outer_profiles) = exact_outer(xz, params.l, params.m, &e_k, params.eps2)?;
    let model = exact_retained_model(&source.x_marginal().probs().to_vec(), params.l, &e_k)?;
    Ok(BuiltCode {
        inner_profile,
        adversary_profile,
        outer_profiles,
        outer_f,
        model,
        trials: 0,
    })
}

/// Per level, the exact outer profile and its selected key set.
fn exact_outer(
    xz: &PairJoint,
    l: usize,
    m: usize,
    e_k: &[usize],
    eps2: f64,
) -> Result<(Vec<Vec<usize>>, Vec<EntropyProfile>)> {
    let k = e_k.len();
    if k == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let atoms_vz = exact_transformed_law(xz, l)?;
    let comp: Vec<usize> = {
        let mut keep = vec![true; l];
        for &i in e_k {
            keep[i] = false;
        }
        (0..l).filter(|&i| keep[i]).collect()
    };
    let side_bits = atoms_vz
        .iter()
        .map(|a| 64 - a.side.leading_zeros())
        .max()
        .unwrap_or(0);
    if (k - 1) as u32 + comp.len() as u32 + side_bits > 63 {
        return Err(Error::Infeasible {
            detail: "outer side key exceeds 63 bits".into(),
            estimate: ((k - 1) + comp.len()) as f64 + side_bits as f64,
            cap: 63.0,
        });
    }

    let mut outer_f = Vec::with_capacity(k);
    let mut profiles = Vec::with_capacity(k);
    let mut atoms: Vec<SideAtom> = Vec::with_capacity(atoms_vz.len());
    for j in 0..k {
        atoms.clear();
        let shift_z = (j + comp.len()) as u32;
        for a in &atoms_vz {
            // Composite side: retained prefix, published complement, and the
            // adversary sequence of the same block.
            let t_pre = pack_bits(a.v, &e_k[..j]);
            let c = pack_bits(a.v, &comp);
            atoms.push(SideAtom {
                x: ((a.v >> e_k[j]) & 1) as u8,
                side: t_pre | (c << j) | (a.side << shift_z),
                p: a.p,
            });
        }
        let profile = exact_entropy_profile_atoms(&atoms, m)?;
        outer_f.push(select_sets(&profile, eps2)?.r);
        profiles.push(profile);
    }
    Ok((outer_f, profiles))
}

fn build_mc(
    source: &WiretapSource,
    xy: &PairJoint,
    xz: &PairJoint,
    params: &ConstructParams,
) -> Result<BuiltCode> {
    if params.trials < MIN_MC_TRIALS {
        return Err(Error::invalid(format!(
            "mc construction: {} trials below the minimum of {MIN_MC_TRIALS}",
            params.trials
        )));
    }
    let streams = Streams::new(params.seed);
    let inner_profile = mc_entropy_profile_streamed(xy, params.l, params.trials, &streams, 0)?;
    let adversary_profile =
        mc_entropy_profile_streamed(xz, params.l, params.trials, &streams, PHASE_SPAN)?;
    let e_k = retained_set(&inner_profile, params.eps1)?;

    let uniform = x_is_uniform(source);
    let outcome = mc_outer(
        xz,
        params.l,
        params.m,
        &e_k,
        params.eps2,
        params.trials,
        &streams,
        !uniform,
    )?;
    let model = if uniform {
        OuterEncoderModel::Uniform
    } else {
        OuterEncoderModel::Empirical {
            levels: outcome.counts,
            width: EMPIRICAL_CONTEXT_BITS,
        }
    };
    Ok(BuiltCode {
        inner_profile,
        adversary_profile,
        outer_profiles: outcome.profiles,
        outer_f: outcome.outer_f,
        model,
        trials: params.trials,
    })
}

struct McOuterOutcome {
    outer_f: Vec<Vec<usize>>,
    profiles: Vec<EntropyProfile>,
    counts: Vec<BTreeMap<u64, [u64; 2]>>,
}

struct McOuterAccum {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    mismatch: Vec<u64>,
    counts: Vec<BTreeMap<u64, [u64; 2]>>,
    aborted: u64,
}

impl McOuterAccum {
    fn new(k: usize, m: usize, fit: bool) -> Self {
        McOuterAccum {
            sum: vec![0.0; k * m],
            sumsq: vec![0.0; k * m],
            mismatch: vec![0; k * m],
            counts: if fit { vec![BTreeMap::new(); k] } else { Vec::new() },
            aborted: 0,
        }
    }

    fn merge(&mut self, other: McOuterAccum) {
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sumsq[i] += other.sumsq[i];
            self.mismatch[i] += other.mismatch[i];
        }
        for (mine, theirs) in self.counts.iter_mut().zip(other.counts) {
            for (key, [c0, c1]) in theirs {
                let e = mine.entry(key).or_insert([0, 0]);
                e[0] += c0;
                e[1] += c1;
            }
        }
        self.aborted += other.aborted;
    }
}

/// Monte Carlo outer phase: samples whole super-blocks, estimates every
/// level's outer profile via the exact per-block prefix conditionals given
/// the adversary sequence, and (optionally) fits the retained-bit context
/// model from the same samples.
#[allow(clippy::too_many_arguments)]
fn mc_outer(
    xz: &PairJoint,
    l: usize,
    m: usize,
    e_k: &[usize],
    eps2: f64,
    trials: u64,
    streams: &Streams,
    fit: bool,
) -> Result<McOuterOutcome> {
    let k = e_k.len();
    if k == 0 {
        return Ok(McOuterOutcome {
            outer_f: Vec::new(),
            profiles: Vec::new(),
            counts: Vec::new(),
        });
    }
    let model = PairModel::new(xz)?;
    let width = EMPIRICAL_CONTEXT_BITS;

    let nchunks = trials.div_ceil(OUTER_CHUNK);
    let chunks: Vec<McOuterAccum> = (0..nchunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * OUTER_CHUNK;
            let hi = (lo + OUTER_CHUNK).min(trials);
            let mut acc = McOuterAccum::new(k, m, fit);
            let mut inner_engine = ScEngine::new();
            let mut outer_engine = ScEngine::new();
            let mut xbits = vec![0u8; l];
            let mut vbits = vec![0u8; l];
            let mut leaves = vec![ProbPair::uniform(); l];
            let mut t_cols = vec![0u8; k * m];
            let mut pis = vec![ProbPair::uniform(); k * m];
            let mut t_row = vec![0u8; m];
            let mut u_row = vec![0u8; m];
            let mut leaves_out = vec![ProbPair::uniform(); m];
            let mut trial_v = vec![0.0f64; k * m];
            let mut trial_mis = vec![false; k * m];
            let mut pending: Vec<(usize, u64, u8)> = Vec::with_capacity(k * m);

            'trial: for trial in lo..hi {
                let mut rng = streams.stream(Domain::Construction, 2 * PHASE_SPAN + trial);
                pending.clear();
                for b in 0..m {
                    model.sample_block(&mut rng, &mut xbits, &mut leaves);
                    vbits.copy_from_slice(&xbits);
                    crate::polar::transform_in_place(&mut vbits).expect("power of two");
                    if inner_engine.pass(&leaves, &mut Feed::new(&vbits)).is_err() {
                        acc.aborted += 1;
                        continue 'trial;
                    }
                    let pairs = inner_engine.pairs();
                    let mut ctx = ContextTracker {
                        key: 0,
                        filled: 0,
                        width,
                    };
                    for (j, &pos) in e_k.iter().enumerate() {
                        let bit = vbits[pos];
                        t_cols[j * m + b] = bit;
                        pis[j * m + b] = pairs[pos];
                        if fit {
                            pending.push((j, ctx.key(), bit));
                        }
                        ctx.push(bit);
                    }
                }
                for j in 0..k {
                    t_row.copy_from_slice(&t_cols[j * m..(j + 1) * m]);
                    u_row.copy_from_slice(&t_row);
                    crate::polar::transform_in_place(&mut u_row).expect("power of two");
                    leaves_out.copy_from_slice(&pis[j * m..(j + 1) * m]);
                    if outer_engine
                        .pass(&leaves_out, &mut Feed::new(&u_row))
                        .is_err()
                    {
                        acc.aborted += 1;
                        continue 'trial;
                    }
                    let pairs = outer_engine.pairs();
                    for i in 0..m {
                        let p = pairs[i].p(u_row[i]);
                        if p <= 0.0 {
                            acc.aborted += 1;
                            continue 'trial;
                        }
                        trial_v[j * m + i] = -p.log2();
                        trial_mis[j * m + i] = pairs[i].argmax() != u_row[i];
                    }
                }
                for i in 0..k * m {
                    let v = trial_v[i];
                    acc.sum[i] += v;
                    acc.sumsq[i] += v * v;
                    acc.mismatch[i] += trial_mis[i] as u64;
                }
                for &(j, key, bit) in &pending {
                    let e = acc.counts[j].entry(key).or_insert([0, 0]);
                    e[bit as usize] += 1;
                }
            }
            acc
        })
        .collect();

    let mut total = McOuterAccum::new(k, m, fit);
    for c in chunks {
        total.merge(c);
    }
    let used = trials - total.aborted;
    if used == 0 {
        return Err(Error::invalid(
            "mc outer phase: every super-block trial hit a zero-probability event",
        ));
    }
    let t = used as f64;
    let mut outer_f = Vec::with_capacity(k);
    let mut profiles = Vec::with_capacity(k);
    for j in 0..k {
        let mut h = Vec::with_capacity(m);
        let mut se = Vec::with_capacity(m);
        let mut proxy = Vec::with_capacity(m);
        for i in 0..m {
            let idx = j * m + i;
            let mean = total.sum[idx] / t;
            let var = (total.sumsq[idx] / t - mean * mean).max(0.0);
            h.push(mean.clamp(0.0, 1.0));
            se.push((var / t).sqrt());
            proxy.push(total.mismatch[idx] as f64 / t);
        }
        let profile = EntropyProfile {
            h,
            provenance: Provenance::MonteCarlo { trials: used },
            std_err: Some(se),
            err_proxy: Some(proxy),
        };
        outer_f.push(select_sets(&profile, eps2)?.r);
        profiles.push(profile);
    }
    Ok(McOuterOutcome {
        outer_f,
        profiles,
        counts: total.counts,
    })
}

/// Recomputes the in-memory encoder model for a deserialized spec. Exhaustive
/// specs re-enumerate the retained-bit law; Monte Carlo specs either detect
/// the uniform-source shortcut or replay the fitting phase with the spec's
/// recorded seed and trial count.
pub fn rebuild_encoder_model(spec: &mut CodeSpec, source: &WiretapSource) -> Result<()> {
    let (nx, _, _) = source.dims();
    if nx != 2 {
        return Err(Error::invalid("encoder model requires a binary source"));
    }
    let model = match spec.mode {
        ConstructionMode::Exact => exact_retained_model(
            &source.x_marginal().probs().to_vec(),
            spec.l,
            &spec.inner.d.clone(),
        )?,
        ConstructionMode::Mc => {
            if x_is_uniform(source) {
                OuterEncoderModel::Uniform
            } else {
                let outcome = mc_outer(
                    &source.xz_joint(),
                    spec.l,
                    spec.m,
                    &spec.inner.d.clone(),
                    spec.eps2,
                    spec.trials,
                    &Streams::new(spec.seed),
                    true,
                )?;
                OuterEncoderModel::Empirical {
                    levels: outcome.counts,
                    width: EMPIRICAL_CONTEXT_BITS,
                }
            }
        }
    };
    spec.encoder_model = Some(model);
    Ok(())
}
