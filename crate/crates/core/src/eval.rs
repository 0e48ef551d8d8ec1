//! Measurement harness: seeded trial batches with confidence intervals, an
//! exact strong-secrecy oracle at toy sizes, the entropy-accounting secrecy
//! bound that scales to real block lengths, polarization tables, and the
//! exhaustive super-source diagnostic.
//!
//! Strong secrecy at realistic sizes cannot be measured directly (the joint
//! law of key, adversary view and public message is exponentially large), so
//! the harness pairs two instruments: an exhaustive oracle that computes the
//! exact L1 secrecy distance on instances small enough to enumerate, and a
//! bound derived purely from the selected outer entropy profile that is
//! available at any size. Reports carry both where possible.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitchan::{
    exact_entropy_profile, exact_transformed_law, select_sets, CodeSpec, EntropyProfile,
    OuterEncoderModel, ScEngine, TransformedAtom, EXHAUSTIVE_STATE_CAP,
};
use crate::codec::{prior_leaves, replay_into, FrozenMap};
use crate::pcc::{pcc_decode, pcc_encode_with_options, transmit, uniform_message};
use crate::polar::{transform_multilevel, BitBlock, BitMatrix};
use crate::probability::{WiretapChannel, WiretapSource};
use crate::rng::{Domain, Streams};
use crate::ska::{expand_public_matrix, ska_trial};
use crate::{Error, Result};

/// Version tag embedded in every serialized report.
pub const REPORT_SCHEMA: u32 = 1;

/// Tolerance for identities that must hold up to floating-point rounding.
const IDENTITY_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// numeric report helpers
// ---------------------------------------------------------------------------

/// Rounds to 12 significant decimal digits — the precision every serialized
/// report number carries.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float reparses")
}

/// 95% Wilson score interval for a binomial proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilsonInterval {
    /// Lower endpoint.
    pub lo: f64,
    /// Upper endpoint.
    pub hi: f64,
}

/// Wilson score interval at 95% coverage for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> WilsonInterval {
    if trials == 0 {
        return WilsonInterval { lo: 0.0, hi: 1.0 };
    }
    let z = 1.959_963_984_540_054f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    WilsonInterval {
        lo: (((center - spread) / denom).max(0.0)).min(1.0),
        hi: (((center + spread) / denom).min(1.0)).max(0.0),
    }
}

// ---------------------------------------------------------------------------
// trial batches
// ---------------------------------------------------------------------------

/// Which protocol a batch runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    /// One-way secret-key agreement over a source.
    Ska,
    /// Private channel coding over a wiretap channel.
    Pcc,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolKind::Ska => "ska",
            ProtocolKind::Pcc => "pcc",
        })
    }
}

/// Input for one batch: the protocol together with its random experiment.
#[derive(Debug, Clone, Copy)]
pub enum TrialTask<'a> {
    /// Sample the source and run key agreement.
    Ska {
        /// Joint law of `(X, Y, Z)`.
        source: &'a WiretapSource,
    },
    /// Draw a uniform message, encode, transmit, decode.
    Pcc {
        /// Channel with its input distribution.
        channel: &'a WiretapChannel,
        /// Publish only the unpolarized complement bits (the nearly uniform
        /// ones are pinned to zero as code metadata).
        reduce_public: bool,
    },
}

/// One row of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    /// Trial index (also the per-trial stream index).
    pub trial: u64,
    /// Key/message disagreement, including aborted decodes.
    pub mismatch: bool,
    /// Decoder hit an impossible observation and gave up.
    pub decode_abort: bool,
    /// Secret length `J`.
    pub secret_bits: usize,
    /// Published bits in this run.
    pub public_bits: usize,
    /// Encoder model fallbacks (always 0 for key agreement).
    pub fallbacks: u64,
}

/// Batch aggregate; every float is stored at full precision and rounded to
/// 12 significant digits on serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    /// Report schema version.
    pub schema_version: u32,
    /// Protocol tag.
    pub protocol: ProtocolKind,
    /// Content hash of the code used.
    pub code_hash: String,
    /// Hash of the source/channel the code was built for.
    pub source_hash: String,
    /// Master seed of the batch.
    pub seed: u64,
    /// Number of trials.
    pub trials: u64,
    /// Inner block length.
    pub l: usize,
    /// Outer block length.
    pub m: usize,
    /// Total symbols per run.
    pub n: usize,
    /// Secret length `J`.
    pub secret_bits: usize,
    /// `J / N`.
    pub rate: f64,
    /// Published bits per run.
    pub public_bits_per_run: usize,
    /// Whether the public message was reduced to the unpolarized set.
    pub reduced_public: bool,
    /// Trials whose secrets disagreed (aborts included).
    pub mismatches: u64,
    /// Trials aborted by the decoder.
    pub decode_aborts: u64,
    /// `mismatches / trials`.
    pub mismatch_rate: f64,
    /// 95% Wilson interval for the mismatch rate.
    pub mismatch_interval: WilsonInterval,
    /// Total encoder-model fallbacks across the batch.
    pub encoder_fallbacks: u64,
}

impl TrialSummary {
    /// Copy with every float rounded to report precision.
    pub fn rounded(&self) -> Self {
        let mut out = self.clone();
        out.rate = round_sig(out.rate);
        out.mismatch_rate = round_sig(out.mismatch_rate);
        out.mismatch_interval = WilsonInterval {
            lo: round_sig(out.mismatch_interval.lo),
            hi: round_sig(out.mismatch_interval.hi),
        };
        out
    }

    /// JSON aggregate at report precision.
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.rounded())?)
    }
}

/// A batch: aggregate plus one record per trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    /// Aggregate statistics.
    pub summary: TrialSummary,
    /// Per-trial rows in trial order.
    pub records: Vec<TrialRecord>,
}

impl TrialReport {
    /// CSV with one row per trial.
    pub fn records_csv(&self) -> String {
        let mut out =
            String::from("trial,mismatch,decode_abort,secret_bits,public_bits,fallbacks\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.trial,
                u8::from(r.mismatch),
                u8::from(r.decode_abort),
                r.secret_bits,
                r.public_bits,
                r.fallbacks
            ));
        }
        out
    }
}

/// Runs a seeded batch. Trials are independent (one random stream per trial
/// index), so the aggregate is invariant under execution order and thread
/// count. Decode aborts are counted as mismatches, never as batch failures.
pub fn run_trials(
    task: &TrialTask,
    code: &CodeSpec,
    trials: u64,
    master_seed: u64,
) -> Result<TrialReport> {
    if trials == 0 {
        return Err(Error::invalid("run_trials: at least one trial required"));
    }
    let streams = Streams::new(master_seed);
    let records: Vec<TrialRecord> = match task {
        TrialTask::Ska { source } => {
            let full_public = code.m * code.e_k_complement().len();
            (0..trials)
                .into_par_iter()
                .map(|trial| -> Result<TrialRecord> {
                    let mut rng = streams.stream(Domain::Sampling, trial);
                    let tr = ska_trial(source, code, &mut rng)?;
                    Ok(TrialRecord {
                        trial,
                        mismatch: !tr.keys_agree(),
                        decode_abort: tr.key_bob.is_none(),
                        secret_bits: tr.key_alice.len(),
                        public_bits: full_public,
                        fallbacks: 0,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        TrialTask::Pcc {
            channel,
            reduce_public,
        } => {
            let xy = channel.source().xy_joint();
            (0..trials)
                .into_par_iter()
                .map(|trial| -> Result<TrialRecord> {
                    let mut msg_rng = streams.stream(Domain::Message, trial);
                    let message = uniform_message(code, &mut msg_rng);
                    let mut rng = streams.stream(Domain::Sampling, trial);
                    let enc = pcc_encode_with_options(
                        &message,
                        code,
                        channel.input(),
                        *reduce_public,
                        &mut rng,
                    )?;
                    let (y, _z) = transmit(&enc.x, channel, &mut rng);
                    let full = if *reduce_public {
                        expand_public_matrix(&enc.public, code)?
                    } else {
                        enc.public.clone()
                    };
                    let guess = pcc_decode(&y, &full, code, &xy)?;
                    Ok(TrialRecord {
                        trial,
                        mismatch: guess.as_ref() != Some(&message),
                        decode_abort: guess.is_none(),
                        secret_bits: message.len(),
                        public_bits: enc.public.num_rows() * enc.public.num_cols(),
                        fallbacks: enc.fallbacks as u64,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };

    let mismatches = records.iter().filter(|r| r.mismatch).count() as u64;
    let decode_aborts = records.iter().filter(|r| r.decode_abort).count() as u64;
    let encoder_fallbacks = records.iter().map(|r| r.fallbacks).sum();
    let (protocol, reduced_public) = match task {
        TrialTask::Ska { .. } => (ProtocolKind::Ska, false),
        TrialTask::Pcc { reduce_public, .. } => (ProtocolKind::Pcc, *reduce_public),
    };
    let public_bits_per_run = records.first().map_or(0, |r| r.public_bits);
    let summary = TrialSummary {
        schema_version: REPORT_SCHEMA,
        protocol,
        code_hash: code.content_hash.clone(),
        source_hash: code.source_hash.clone(),
        seed: master_seed,
        trials,
        l: code.l,
        m: code.m,
        n: code.n(),
        secret_bits: code.j_total(),
        rate: code.rate(),
        public_bits_per_run,
        reduced_public,
        mismatches,
        decode_aborts,
        mismatch_rate: mismatches as f64 / trials as f64,
        mismatch_interval: wilson_interval(mismatches, trials),
        encoder_fallbacks,
    };
    Ok(TrialReport { summary, records })
}

// ---------------------------------------------------------------------------
// exact strong-secrecy oracle (toy sizes)
// ---------------------------------------------------------------------------

fn secrecy_guard(n: usize, nz: usize) -> Result<()> {
    let states = (2.0 * nz as f64).powi(n as i32);
    let cap = EXHAUSTIVE_STATE_CAP as f64;
    if !(states <= cap) {
        return Err(Error::Infeasible {
            detail: format!("exact secrecy enumeration over n = {n}, |Z| = {nz}"),
            estimate: states,
            cap,
        });
    }
    Ok(())
}

fn require_binary_x(source: &WiretapSource) -> Result<()> {
    if source.dims().0 != 2 {
        return Err(Error::invalid("exact secrecy oracle requires binary X"));
    }
    Ok(())
}

/// Exact L1 distance between the realized joint of (secret, adversary view,
/// public message) and the ideal product of a uniform secret with that view:
/// `Σ |P(s, z, c) − 2^{−J} P(z, c)|`. Exhaustive; toy sizes only.
pub fn exact_secrecy_l1(
    source: &WiretapSource,
    code: &CodeSpec,
    protocol: ProtocolKind,
) -> Result<f64> {
    require_binary_x(source)?;
    secrecy_guard(code.n(), source.dims().2)?;
    match protocol {
        ProtocolKind::Ska => ska_secrecy_primary(source, code),
        ProtocolKind::Pcc => pcc_secrecy_primary(source, code),
    }
}

/// Independent re-implementation of [`exact_secrecy_l1`]: different
/// enumeration order, different transform derivation (direct superset-parity
/// instead of the butterfly network), different accumulation structures.
/// Agreement within 1e-9 is an acceptance requirement.
pub fn exact_secrecy_l1_alternate(
    source: &WiretapSource,
    code: &CodeSpec,
    protocol: ProtocolKind,
) -> Result<f64> {
    require_binary_x(source)?;
    secrecy_guard(code.n(), source.dims().2)?;
    match protocol {
        ProtocolKind::Ska => ska_secrecy_alternate(source, code),
        ProtocolKind::Pcc => pcc_secrecy_alternate(source, code),
    }
}

/// Parity of `x` over all positions whose index is a bitwise superset of
/// `i` — the closed form of the transform, used by the alternate oracle so
/// the two routes do not share the butterfly code.
fn superset_parity(x: &[u8], i: usize) -> u8 {
    let mut acc = 0u8;
    for (j, &b) in x.iter().enumerate() {
        if i & !j == 0 {
            acc ^= b;
        }
    }
    acc
}

/// L1 distance of a grouped joint (adversary-view key → secret → mass)
/// against uniform-secret × view-marginal.
fn l1_from_grouped(joint: &BTreeMap<(u64, u64), BTreeMap<u64, f64>>, j_total: usize) -> f64 {
    let uniform = 0.5f64.powi(j_total as i32);
    let n_secrets = 1u64 << j_total;
    let mut l1 = 0.0;
    for by_s in joint.values() {
        let q: f64 = by_s.values().sum();
        for &p in by_s.values() {
            l1 += (p - uniform * q).abs();
        }
        l1 += (n_secrets - by_s.len() as u64) as f64 * uniform * q;
    }
    l1
}

fn ska_secrecy_primary(source: &WiretapSource, code: &CodeSpec) -> Result<f64> {
    let n = code.n();
    let nz = source.dims().2;
    let xz = source.xz_joint();
    // (z-and-public view) → secret → probability.
    let mut joint: BTreeMap<(u64, u64), BTreeMap<u64, f64>> = BTreeMap::new();
    let mut x_bits = vec![0u8; n];
    for xv in 0u64..(1 << n) {
        for (i, b) in x_bits.iter_mut().enumerate() {
            *b = ((xv >> i) & 1) as u8;
        }
        let x = BitBlock::new(x_bits.clone())?;
        let (key, public, _) = crate::ska::ska_alice(&x, code)?;
        let s_pack = pack_block(&key);
        let c_pack = pack_matrix(&public);
        // Walk all adversary sequences with a base-|Z| odometer.
        let mut z_digits = vec![0usize; n];
        for zv in 0..(nz as u64).pow(n as u32) {
            let mut w = 1.0;
            for (i, &zd) in z_digits.iter().enumerate() {
                w *= xz.p(x_bits[i] as usize, zd);
            }
            if w > 0.0 {
                *joint
                    .entry((zv, c_pack))
                    .or_default()
                    .entry(s_pack)
                    .or_insert(0.0) += w;
            }
            advance_odometer(&mut z_digits, nz);
        }
    }
    Ok(l1_from_grouped(&joint, code.j_total()))
}

fn ska_secrecy_alternate(source: &WiretapSource, code: &CodeSpec) -> Result<f64> {
    let n = code.n();
    let nz = source.dims().2;
    let xz = source.xz_joint();
    let e_k = code.e_k();
    let comp = code.e_k_complement();
    // Flat accumulation keyed (secret, z, public), filled z-outer with x
    // descending; marginals recomputed in a second pass.
    let mut flat: BTreeMap<(u64, u64, u64), f64> = BTreeMap::new();
    let mut z_digits = vec![0usize; n];
    let z_total = (nz as u64).pow(n as u32);
    for zv in 0..z_total {
        let mut x_bits = vec![0u8; n];
        for xv in (0u64..(1 << n)).rev() {
            for (i, b) in x_bits.iter_mut().enumerate() {
                *b = ((xv >> i) & 1) as u8;
            }
            let mut w = 1.0;
            for (i, &zd) in z_digits.iter().enumerate() {
                w *= xz.p(x_bits[i] as usize, zd);
            }
            if w == 0.0 {
                continue;
            }
            // Hand-derived protocol outputs via superset parity.
            let mut t = vec![vec![0u8; code.m]; e_k.len()];
            let mut c_pack = 0u64;
            let mut c_idx = 0;
            for b in 0..code.m {
                let block = &x_bits[b * code.l..(b + 1) * code.l];
                for (j, &pos) in e_k.iter().enumerate() {
                    t[j][b] = superset_parity(block, pos);
                }
                for &pos in &comp {
                    c_pack |= (superset_parity(block, pos) as u64) << c_idx;
                    c_idx += 1;
                }
            }
            let mut s_pack = 0u64;
            let mut s_idx = 0;
            for (j, f) in code.outer_f.iter().enumerate() {
                for &i in f {
                    s_pack |= (superset_parity(&t[j], i) as u64) << s_idx;
                    s_idx += 1;
                }
            }
            *flat.entry((s_pack, zv, c_pack)).or_insert(0.0) += w;
        }
        advance_odometer(&mut z_digits, nz);
    }
    // View marginal, then the full L1 including zero-mass secrets.
    let mut view: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    for (&(_, zv, c), &p) in &flat {
        *view.entry((zv, c)).or_insert(0.0) += p;
    }
    let j_total = code.j_total();
    let uniform = 0.5f64.powi(j_total as i32);
    let mut l1 = 0.0;
    for (&(zv, c), &q) in &view {
        for s in 0..(1u64 << j_total) {
            let p = flat.get(&(s, zv, c)).copied().unwrap_or(0.0);
            l1 += (p - uniform * q).abs();
        }
    }
    Ok(l1)
}

/// Per-symbol adversary channel `P(z | x)` derived from the joint.
fn z_given_x(source: &WiretapSource) -> Vec<Vec<f64>> {
    let xz = source.xz_joint();
    let px = source.x_marginal();
    (0..2)
        .map(|x| {
            (0..xz.s_card)
                .map(|z| {
                    if px.p(x) > 0.0 {
                        xz.p(x, z) / px.p(x)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

fn model_of(code: &CodeSpec) -> Result<&OuterEncoderModel> {
    code.encoder_model.as_ref().ok_or_else(|| {
        Error::invalid("exact secrecy for channel coding needs the encoder model in memory")
    })
}

fn pcc_secrecy_primary(source: &WiretapSource, code: &CodeSpec) -> Result<f64> {
    let n = code.n();
    let nz = source.dims().2;
    let model = model_of(code)?;
    let p_x = source.x_marginal();
    let cz = z_given_x(source);
    let e_k = code.e_k();
    let comp = code.e_k_complement();
    let k = e_k.len();
    let m = code.m;
    let inner_leaves = prior_leaves(&p_x, code.l)?;
    let mut engine = ScEngine::new();
    let mut joint: BTreeMap<(u64, u64), BTreeMap<u64, f64>> = BTreeMap::new();
    let msg_prior = 0.5f64.powi(code.j_total() as i32);

    for vbar in 0u64..(1 << n) {
        // Split the transform-domain word into blocks and derive the
        // retained levels and outer rows.
        let mut v_rows: Vec<Vec<u8>> = Vec::with_capacity(m);
        for b in 0..m {
            v_rows.push(
                (0..code.l)
                    .map(|i| ((vbar >> (b * code.l + i)) & 1) as u8)
                    .collect(),
            );
        }
        let mut t = BitMatrix::zeros(k, m);
        for b in 0..m {
            for (j, &pos) in e_k.iter().enumerate() {
                t.set(j, b, v_rows[b][pos]);
            }
        }
        let u = if k > 0 {
            transform_multilevel(&t)?
        } else {
            BitMatrix::zeros(0, m)
        };

        // Encoder probability of exactly this realization: uniform message
        // times every sampled bit's sequential conditional.
        let mut weight = msg_prior;
        let mut trackers = vec![model.tracker(); m];
        let mut aborted = false;
        for j in 0..k {
            let mut leaves = Vec::with_capacity(m);
            for tracker in &trackers {
                leaves.push(model.leaf_prior(j, tracker.key()).0);
            }
            let f = &code.outer_f[j];
            let pins: Vec<u8> = f.iter().map(|&i| u.row(j)[i]).collect();
            let mut frozen = FrozenMap::free(m);
            frozen.set_values(f, &pins)?;
            let sampled: Vec<usize> = (0..m).filter(|i| f.binary_search(i).is_err()).collect();
            frozen.set_sampled(&sampled)?;
            match replay_into(&mut engine, &leaves, &frozen, u.row(j).bits()) {
                Ok(wj) => weight *= wj,
                Err(Error::ZeroProbability { .. }) => {
                    aborted = true;
                    break;
                }
                Err(e) => return Err(e),
            }
            for (b, tracker) in trackers.iter_mut().enumerate() {
                tracker.push(t.row(j)[b]);
            }
            if weight == 0.0 {
                break;
            }
        }
        if aborted || weight == 0.0 {
            continue;
        }
        let mut x_bits = Vec::with_capacity(n);
        for v_row in &v_rows {
            let retained: Vec<u8> = e_k.iter().map(|&pos| v_row[pos]).collect();
            let mut frozen = FrozenMap::free(code.l);
            frozen.set_values(e_k, &retained)?;
            frozen.set_sampled(&comp)?;
            match replay_into(&mut engine, &inner_leaves, &frozen, v_row) {
                Ok(wb) => weight *= wb,
                Err(Error::ZeroProbability { .. }) => {
                    aborted = true;
                    break;
                }
                Err(e) => return Err(e),
            }
            x_bits.extend_from_slice(engine.x());
        }
        if aborted || weight == 0.0 {
            continue;
        }

        // Implied message and published bits.
        let mut s_pack = 0u64;
        let mut s_idx = 0;
        for (j, f) in code.outer_f.iter().enumerate() {
            for &i in f {
                s_pack |= (u.row(j)[i] as u64) << s_idx;
                s_idx += 1;
            }
        }
        let mut c_pack = 0u64;
        let mut c_idx = 0;
        for v_row in &v_rows {
            for &pos in &comp {
                c_pack |= (v_row[pos] as u64) << c_idx;
                c_idx += 1;
            }
        }

        // Channel factor over all adversary sequences.
        let mut z_digits = vec![0usize; n];
        for zv in 0..(nz as u64).pow(n as u32) {
            let mut w = weight;
            for (i, &zd) in z_digits.iter().enumerate() {
                w *= cz[x_bits[i] as usize][zd];
            }
            if w > 0.0 {
                *joint
                    .entry((zv, c_pack))
                    .or_default()
                    .entry(s_pack)
                    .or_insert(0.0) += w;
            }
            advance_odometer(&mut z_digits, nz);
        }
    }
    Ok(l1_from_grouped(&joint, code.j_total()))
}

/// Mass of all completions of a transform-domain prefix under a product law
/// on the transformed side — brute-force suffix summation, the alternate
/// oracle's independent form of the sequential conditionals.
fn brute_prefix_mass(leaves: &[(f64, f64)], prefix: &[u8]) -> f64 {
    let m = leaves.len();
    let p = prefix.len();
    let mut u = vec![0u8; m];
    u[..p].copy_from_slice(prefix);
    let mut total = 0.0;
    for suffix in 0u64..(1 << (m - p)) {
        for (kk, slot) in u[p..].iter_mut().enumerate() {
            *slot = ((suffix >> kk) & 1) as u8;
        }
        let mut w = 1.0;
        for (b, &(l0, l1)) in leaves.iter().enumerate() {
            w *= if superset_parity(&u, b) == 0 { l0 } else { l1 };
        }
        total += w;
    }
    total
}

/// Product of the sequential conditionals at the sampled positions of a
/// realized transform-domain row, via brute prefix masses.
fn brute_sampling_weight(leaves: &[(f64, f64)], row: &[u8], sampled: &[bool]) -> f64 {
    let mut w = 1.0;
    for pos in 0..row.len() {
        if !sampled[pos] {
            continue;
        }
        let denom = brute_prefix_mass(leaves, &row[..pos]);
        if denom == 0.0 {
            return 0.0;
        }
        w *= brute_prefix_mass(leaves, &row[..=pos]) / denom;
        if w == 0.0 {
            return 0.0;
        }
    }
    w
}

fn pcc_secrecy_alternate(source: &WiretapSource, code: &CodeSpec) -> Result<f64> {
    let n = code.n();
    let nz = source.dims().2;
    let model = model_of(code)?;
    let p_x = source.x_marginal();
    let cz = z_given_x(source);
    let e_k = code.e_k();
    let comp = code.e_k_complement();
    let k = e_k.len();
    let m = code.m;
    let inner_leaf = (p_x.p(0), p_x.p(1));
    let mut inner_sampled = vec![false; code.l];
    for &pos in &comp {
        inner_sampled[pos] = true;
    }
    let mut flat: BTreeMap<(u64, u64, u64), f64> = BTreeMap::new();
    let msg_prior = 0.5f64.powi(code.j_total() as i32);

    for vbar in (0u64..(1 << n)).rev() {
        let v_rows: Vec<Vec<u8>> = (0..m)
            .map(|b| {
                (0..code.l)
                    .map(|i| ((vbar >> (b * code.l + i)) & 1) as u8)
                    .collect()
            })
            .collect();
        let t_rows: Vec<Vec<u8>> = (0..k)
            .map(|j| (0..m).map(|b| v_rows[b][e_k[j]]).collect())
            .collect();
        let u_rows: Vec<Vec<u8>> = t_rows
            .iter()
            .map(|t_row| (0..m).map(|i| superset_parity(t_row, i)).collect())
            .collect();

        let mut weight = msg_prior;
        let mut trackers = vec![model.tracker(); m];
        for j in 0..k {
            let leaves: Vec<(f64, f64)> = trackers
                .iter()
                .map(|tr| {
                    let (pair, _) = model.leaf_prior(j, tr.key());
                    (pair.p0(), pair.p1())
                })
                .collect();
            let sampled: Vec<bool> = (0..m)
                .map(|i| code.outer_f[j].binary_search(&i).is_err())
                .collect();
            weight *= brute_sampling_weight(&leaves, &u_rows[j], &sampled);
            if weight == 0.0 {
                break;
            }
            for (b, tracker) in trackers.iter_mut().enumerate() {
                tracker.push(t_rows[j][b]);
            }
        }
        if weight == 0.0 {
            continue;
        }
        for v_row in &v_rows {
            weight *= brute_sampling_weight(
                &vec![inner_leaf; code.l],
                v_row,
                &inner_sampled,
            );
            if weight == 0.0 {
                break;
            }
        }
        if weight == 0.0 {
            continue;
        }

        let mut s_pack = 0u64;
        let mut s_idx = 0;
        for (j, f) in code.outer_f.iter().enumerate() {
            for &i in f {
                s_pack |= (u_rows[j][i] as u64) << s_idx;
                s_idx += 1;
            }
        }
        let mut c_pack = 0u64;
        let mut c_idx = 0;
        for v_row in &v_rows {
            for &pos in &comp {
                c_pack |= (v_row[pos] as u64) << c_idx;
                c_idx += 1;
            }
        }
        let x_bits: Vec<u8> = v_rows
            .iter()
            .flat_map(|v_row| (0..code.l).map(|i| superset_parity(v_row, i)))
            .collect();

        let mut z_digits = vec![0usize; n];
        for zv in 0..(nz as u64).pow(n as u32) {
            let mut w = weight;
            for (i, &zd) in z_digits.iter().enumerate() {
                w *= cz[x_bits[i] as usize][zd];
            }
            if w > 0.0 {
                *flat.entry((s_pack, zv, c_pack)).or_insert(0.0) += w;
            }
            advance_odometer(&mut z_digits, nz);
        }
    }

    let mut view: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    for (&(_, zv, c), &p) in &flat {
        *view.entry((zv, c)).or_insert(0.0) += p;
    }
    let j_total = code.j_total();
    let uniform = 0.5f64.powi(j_total as i32);
    let mut l1 = 0.0;
    for (&(zv, c), &q) in &view {
        for s in 0..(1u64 << j_total) {
            let p = flat.get(&(s, zv, c)).copied().unwrap_or(0.0);
            l1 += (p - uniform * q).abs();
        }
    }
    Ok(l1)
}

fn pack_block(b: &BitBlock) -> u64 {
    let mut out = 0u64;
    for (i, &bit) in b.bits().iter().enumerate() {
        out |= (bit as u64) << i;
    }
    out
}

fn pack_matrix(mtx: &BitMatrix) -> u64 {
    let mut out = 0u64;
    let mut idx = 0;
    for row in mtx.rows() {
        for &bit in row.bits() {
            out |= (bit as u64) << idx;
            idx += 1;
        }
    }
    out
}

fn advance_odometer(digits: &mut [usize], base: usize) {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < base {
            return;
        }
        *d = 0;
    }
}

// ---------------------------------------------------------------------------
// secrecy bound from the selected outer profile
// ---------------------------------------------------------------------------

/// Entropy-accounting secrecy bound: how far the selected key coordinates
/// fall short of `J` full bits of adversary-conditioned entropy, and the L1
/// bound that deficit implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecrecyReport {
    /// Report schema version.
    pub schema_version: u32,
    /// Secret length.
    pub j_total: usize,
    /// Outer selection threshold the code was built with.
    pub eps2: f64,
    /// `J − Σ h` over the selected coordinates (adversary-conditioned).
    pub entropy_deficit: f64,
    /// `J · eps2` — the deficit budget the selection rule guarantees when
    /// the profile is exact.
    pub deficit_budget: f64,
    /// `sqrt((ln 2 / 2) · max(0, deficit))` — upper bound on half the L1
    /// secrecy distance.
    pub pinsker_bound: f64,
    /// Selected coordinates whose profile value is below `1 − eps2`
    /// (possible only for estimated profiles; a construction violation).
    pub selection_violations: usize,
    /// Exact L1 distance when an exhaustive oracle ran (toy sizes).
    pub exact_l1: Option<f64>,
}

impl SecrecyReport {
    /// Copy with floats at report precision.
    pub fn rounded(&self) -> Self {
        let mut out = self.clone();
        out.eps2 = round_sig(out.eps2);
        out.entropy_deficit = round_sig(out.entropy_deficit);
        out.deficit_budget = round_sig(out.deficit_budget);
        out.pinsker_bound = round_sig(out.pinsker_bound);
        out.exact_l1 = out.exact_l1.map(round_sig);
        out
    }

    /// JSON at report precision.
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.rounded())?)
    }
}

/// Recomputes the secrecy bound chain from a code's selected coordinates and
/// the outer profiles they were selected from (one profile per retained
/// level, adversary-conditioned).
pub fn secrecy_bound_chain(
    code: &CodeSpec,
    outer_profiles: &[EntropyProfile],
) -> Result<SecrecyReport> {
    if outer_profiles.len() != code.k() {
        return Err(Error::invalid(format!(
            "secrecy bound: {} profiles for {} retained levels",
            outer_profiles.len(),
            code.k()
        )));
    }
    let mut sum_h = 0.0;
    let mut violations = 0usize;
    for (j, profile) in outer_profiles.iter().enumerate() {
        if profile.len() != code.m {
            return Err(Error::invalid(format!(
                "secrecy bound: profile {j} has length {} (block length {})",
                profile.len(),
                code.m
            )));
        }
        for &i in &code.outer_f[j] {
            let h = profile.h[i];
            sum_h += h;
            if h < 1.0 - code.eps2 - 1e-12 {
                violations += 1;
            }
        }
    }
    let j_total = code.j_total();
    let deficit = j_total as f64 - sum_h;
    Ok(SecrecyReport {
        schema_version: REPORT_SCHEMA,
        j_total,
        eps2: code.eps2,
        entropy_deficit: deficit,
        deficit_budget: j_total as f64 * code.eps2,
        pinsker_bound: (std::f64::consts::LN_2 / 2.0 * deficit.max(0.0)).sqrt(),
        selection_violations: violations,
        exact_l1: None,
    })
}

// ---------------------------------------------------------------------------
// polarization tables
// ---------------------------------------------------------------------------

/// One row of a polarization table: how the three-way split evolves with
/// block length for a fixed source family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarizationRow {
    /// Block length.
    pub n: usize,
    /// Fraction of nearly uniform positions.
    pub r_fraction: f64,
    /// Fraction of nearly deterministic positions.
    pub d_fraction: f64,
    /// Fraction of unpolarized positions.
    pub i_fraction: f64,
    /// Mean of the profile (estimates the per-symbol conditional entropy).
    pub profile_mean: f64,
    /// `target − |R|/n`: distance of the uniform fraction from its limit.
    pub r_deficit: f64,
    /// `(1 − target) − |D|/n`: distance of the deterministic fraction from
    /// its limit.
    pub d_deficit: f64,
}

/// Builds the table for profiles of one source family at several lengths.
/// `target` is the per-symbol conditional entropy the fractions approach.
pub fn polarization_report(
    profiles: &[(usize, EntropyProfile)],
    eps: f64,
    target: f64,
) -> Result<Vec<PolarizationRow>> {
    profiles
        .iter()
        .map(|(n, profile)| {
            if profile.len() != *n {
                return Err(Error::invalid(format!(
                    "polarization report: profile length {} labelled n = {n}",
                    profile.len()
                )));
            }
            let sets = select_sets(profile, eps)?;
            let nf = *n as f64;
            let r_fraction = sets.r.len() as f64 / nf;
            let d_fraction = sets.d.len() as f64 / nf;
            Ok(PolarizationRow {
                n: *n,
                r_fraction,
                d_fraction,
                i_fraction: sets.i.len() as f64 / nf,
                profile_mean: profile.mean(),
                r_deficit: target - r_fraction,
                d_deficit: (1.0 - target) - d_fraction,
            })
        })
        .collect()
}

/// CSV form of a polarization table at report precision.
pub fn polarization_csv(rows: &[PolarizationRow]) -> String {
    let mut out = String::from(
        "n,r_fraction,d_fraction,i_fraction,profile_mean,r_deficit,d_deficit\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n,
            round_sig(r.r_fraction),
            round_sig(r.d_fraction),
            round_sig(r.i_fraction),
            round_sig(r.profile_mean),
            round_sig(r.r_deficit),
            round_sig(r.d_deficit),
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// super-source diagnostic
// ---------------------------------------------------------------------------

/// Exhaustive check that one inner transform layer leaves the receiver with
/// almost no uncertainty about the retained bits, plus the chain-rule rate
/// identity on the adversary side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuperSourceReport {
    /// Inner block length.
    pub l: usize,
    /// Number of retained positions.
    pub k: usize,
    /// Selection threshold used for the inner partition.
    pub eps1: f64,
    /// `H(V[E] | V[E^c], Y^l)` where `E` is the retained set.
    pub retained_given_receiver: f64,
    /// `k · eps1` — the bound the selection rule implies.
    pub receiver_budget: f64,
    /// Budget minus achieved value (nonnegative when the bound holds).
    pub receiver_slack: f64,
    /// Whether the receiver bound holds within tolerance.
    pub holds: bool,
    /// `(1/l) H(V[E] | V[E^c], Z^l)` — the per-symbol key-rate term.
    pub retained_rate_adversary: f64,
    /// `H(X|Z) − (1/l) H(V[E^c] | Z^l)` — the same quantity through the
    /// chain rule.
    pub rate_identity_rhs: f64,
    /// Absolute gap between the two forms (must vanish).
    pub rate_identity_gap: f64,
}

fn packed_conditional_entropy<A, B>(atoms: &[TransformedAtom], a_of: A, b_of: B) -> f64
where
    A: Fn(&TransformedAtom) -> u64,
    B: Fn(&TransformedAtom) -> u64,
{
    let mut groups: BTreeMap<u64, BTreeMap<u64, f64>> = BTreeMap::new();
    for at in atoms {
        if at.p <= 0.0 {
            continue;
        }
        *groups
            .entry(b_of(at))
            .or_default()
            .entry(a_of(at))
            .or_insert(0.0) += at.p;
    }
    let mut h = 0.0;
    for by_a in groups.values() {
        let q: f64 = by_a.values().sum();
        if q <= 0.0 {
            continue;
        }
        for &p in by_a.values() {
            if p > 0.0 {
                h -= p * (p / q).log2();
            }
        }
    }
    h
}

/// Builds the inner partition for `(X | Y)` at `eps1` from the exact profile
/// and verifies, by exhaustive enumeration of the transformed law, that the
/// retained bits are nearly deterministic for the receiver and that the
/// adversary-side rate identity holds.
pub fn super_source_check(
    source: &WiretapSource,
    l: usize,
    eps1: f64,
) -> Result<SuperSourceReport> {
    require_binary_x(source)?;
    let xy = source.xy_joint();
    let profile = exact_entropy_profile(&xy, l)?;
    let sets = select_sets(&profile, eps1)?;
    let e = sets.d.clone();
    let comp: Vec<usize> = (0..l).filter(|i| !e.contains(i)).collect();
    let k = e.len();

    let atoms_y = exact_transformed_law(&xy, l)?;
    let comp_bits = comp.len() as u32;
    let b_key = |at: &TransformedAtom| {
        crate::bitchan::construct::pack_bits(at.v, &comp) | (at.side << comp_bits)
    };
    let retained_given_receiver =
        packed_conditional_entropy(&atoms_y, |at| crate::bitchan::construct::pack_bits(at.v, &e), b_key);

    let xz = source.xz_joint();
    let atoms_z = exact_transformed_law(&xz, l)?;
    let retained_given_adversary = packed_conditional_entropy(
        &atoms_z,
        |at| crate::bitchan::construct::pack_bits(at.v, &e),
        |at| crate::bitchan::construct::pack_bits(at.v, &comp) | (at.side << comp_bits),
    );
    let comp_given_adversary = packed_conditional_entropy(
        &atoms_z,
        |at| crate::bitchan::construct::pack_bits(at.v, &comp),
        |at| at.side,
    );

    let budget = k as f64 * eps1;
    let lf = l as f64;
    let retained_rate_adversary = retained_given_adversary / lf;
    let rate_identity_rhs = source.h_x_given_z() - comp_given_adversary / lf;
    Ok(SuperSourceReport {
        l,
        k,
        eps1,
        retained_given_receiver,
        receiver_budget: budget,
        receiver_slack: budget - retained_given_receiver,
        holds: retained_given_receiver <= budget + IDENTITY_TOL,
        retained_rate_adversary,
        rate_identity_rhs,
        rate_identity_gap: (retained_rate_adversary - rate_identity_rhs).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitchan::{bec_entropy_profile, construct_code, ConstructParams, ConstructionMode};
    use crate::probability::{binary_entropy, Pmf};

    fn exact_params(l: usize, m: usize, eps1: f64, eps2: f64) -> ConstructParams {
        ConstructParams {
            l,
            m,
            eps1,
            eps2,
            mode: ConstructionMode::Exact,
            trials: 0,
            seed: 1,
            keep_profiles: true,
        }
    }

    fn identity_eve_blind() -> WiretapSource {
        let mut joint = vec![0.0; 8];
        for x in 0..2 {
            for z in 0..2 {
                joint[(x * 2 + x) * 2 + z] = 0.25;
            }
        }
        WiretapSource::new(2, 2, 2, joint).unwrap()
    }

    #[test]
    fn rounding_gives_twelve_significant_digits() {
        let x = std::f64::consts::PI;
        let r = round_sig(x);
        assert!((r - x).abs() < 1e-11);
        assert_eq!(round_sig(r), r, "rounding is idempotent");
        assert_eq!(round_sig(0.0), 0.0);
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
    }

    #[test]
    fn wilson_interval_sanity() {
        let all_zero = wilson_interval(0, 100);
        assert!(all_zero.lo.abs() < 1e-12);
        assert!(all_zero.hi > 0.0 && all_zero.hi < 0.05);
        let all_one = wilson_interval(100, 100);
        assert!((all_one.hi - 1.0).abs() < 1e-12);
        assert!(all_one.lo > 0.95);
        let half = wilson_interval(50, 100);
        assert!((half.lo + half.hi - 1.0).abs() < 1e-12, "symmetric at ½");
        assert!(half.lo < 0.5 && half.hi > 0.5);
        // Wider sample → tighter interval.
        let tight = wilson_interval(500, 1000);
        assert!(tight.hi - tight.lo < half.hi - half.lo);
    }

    #[test]
    fn ska_batch_on_noiseless_source_never_mismatches() {
        let src = identity_eve_blind();
        let code = construct_code(&src, "srchash", &exact_params(4, 2, 0.1, 0.1)).unwrap();
        let report = run_trials(&TrialTask::Ska { source: &src }, &code, 40, 7).unwrap();
        assert_eq!(report.summary.mismatches, 0);
        assert_eq!(report.summary.mismatch_rate, 0.0);
        assert_eq!(report.summary.decode_aborts, 0);
        assert_eq!(report.summary.trials, 40);
        assert_eq!(report.summary.secret_bits, code.j_total());
        assert_eq!(report.summary.rate, code.rate());
        assert_eq!(report.summary.source_hash, "srchash");
        assert_eq!(report.records.len(), 40);
        // Deterministic reruns, byte-identical serializations.
        let again = run_trials(&TrialTask::Ska { source: &src }, &code, 40, 7).unwrap();
        assert_eq!(report, again);
        assert_eq!(
            report.summary.to_json_string().unwrap(),
            again.summary.to_json_string().unwrap()
        );
        assert_eq!(report.records_csv(), again.records_csv());
        assert!(report.records_csv().starts_with("trial,mismatch"));
    }

    #[test]
    fn zero_rate_batch_reports_rate_zero() {
        let mut joint = vec![0.0; 8];
        joint[0] = 0.5;
        joint[7] = 0.5;
        let src = WiretapSource::new(2, 2, 2, joint).unwrap();
        let code = construct_code(&src, "src", &exact_params(4, 2, 0.1, 0.1)).unwrap();
        assert_eq!(code.j_total(), 0);
        let report = run_trials(&TrialTask::Ska { source: &src }, &code, 10, 3).unwrap();
        assert_eq!(report.summary.rate, 0.0);
        assert_eq!(report.summary.secret_bits, 0);
        assert_eq!(report.summary.mismatches, 0, "empty keys always agree");
    }

    #[test]
    fn pcc_batch_counts_and_reduced_accounting() {
        let w = WiretapChannel::bec_pair(0.4, 0.6, Pmf::uniform(2)).unwrap();
        let src = w.source();
        let code = construct_code(&src, "src", &exact_params(8, 2, 0.1, 0.1)).unwrap();
        assert!(!code.inner.r.is_empty());
        let full = run_trials(
            &TrialTask::Pcc {
                channel: &w,
                reduce_public: false,
            },
            &code,
            30,
            11,
        )
        .unwrap();
        assert_eq!(
            full.summary.public_bits_per_run,
            code.m * code.e_k_complement().len()
        );
        let reduced = run_trials(
            &TrialTask::Pcc {
                channel: &w,
                reduce_public: true,
            },
            &code,
            30,
            11,
        )
        .unwrap();
        assert_eq!(
            reduced.summary.public_bits_per_run,
            code.m * code.inner.i.len()
        );
        assert!(reduced.summary.public_bits_per_run < full.summary.public_bits_per_run);
        assert!(reduced.summary.reduced_public);
        // Batches are deterministic.
        let again = run_trials(
            &TrialTask::Pcc {
                channel: &w,
                reduce_public: true,
            },
            &code,
            30,
            11,
        )
        .unwrap();
        assert_eq!(reduced, again);
    }

    #[test]
    fn secrecy_oracle_ideal_source_is_perfect() {
        let src = identity_eve_blind();
        let code = construct_code(&src, "src", &exact_params(4, 2, 0.1, 0.1)).unwrap();
        assert_eq!(code.j_total(), 8);
        let l1 = exact_secrecy_l1(&src, &code, ProtocolKind::Ska).unwrap();
        assert!(l1.abs() < 1e-9, "bijective uniform key, blind adversary: {l1}");
        let alt = exact_secrecy_l1_alternate(&src, &code, ProtocolKind::Ska).unwrap();
        assert!((l1 - alt).abs() < 1e-9);
    }

    #[test]
    fn secrecy_oracle_key_known_to_adversary_saturates() {
        // Y = X and Z = X: an omniscient adversary. Hand-build a one-bit key
        // the construction would never select.
        let mut joint = vec![0.0; 8];
        joint[0b000] = 0.5;
        joint[0b111] = 0.5;
        let src = WiretapSource::new(2, 2, 2, joint).unwrap();
        let mut code = construct_code(&src, "src", &exact_params(2, 2, 0.1, 0.1)).unwrap();
        assert_eq!(code.k(), 2, "noiseless receiver retains everything");
        assert_eq!(code.j_total(), 0, "construction refuses a known key");
        code.outer_f = vec![vec![0], vec![]];
        let l1 = exact_secrecy_l1(&src, &code, ProtocolKind::Ska).unwrap();
        assert!(
            (l1 - 1.0).abs() < 1e-9,
            "a fully known fair bit sits at L1 = 1: {l1}"
        );
        let alt = exact_secrecy_l1_alternate(&src, &code, ProtocolKind::Ska).unwrap();
        assert!((l1 - alt).abs() < 1e-9);
    }

    #[test]
    fn secrecy_oracles_agree_on_noisy_sources() {
        for (p1, p2) in [(0.05, 0.15), (0.11, 0.25)] {
            let src = WiretapChannel::bsc_cascade(p1, p2, Pmf::uniform(2))
                .unwrap()
                .source();
            let code = construct_code(&src, "src", &exact_params(4, 2, 0.2, 0.2)).unwrap();
            let a = exact_secrecy_l1(&src, &code, ProtocolKind::Ska).unwrap();
            let b = exact_secrecy_l1_alternate(&src, &code, ProtocolKind::Ska).unwrap();
            assert!((a - b).abs() < 1e-9, "({p1}, {p2}): {a} vs {b}");
            assert!((0.0..=2.0).contains(&a));
        }
    }

    #[test]
    fn pcc_secrecy_oracles_agree() {
        let src = WiretapChannel::bsc_cascade(0.05, 0.15, Pmf::uniform(2))
            .unwrap()
            .source();
        let code = construct_code(&src, "src", &exact_params(4, 2, 0.2, 0.2)).unwrap();
        let a = exact_secrecy_l1(&src, &code, ProtocolKind::Pcc).unwrap();
        let b = exact_secrecy_l1_alternate(&src, &code, ProtocolKind::Pcc).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        assert!((0.0..=2.0).contains(&a));
    }

    #[test]
    fn secrecy_oracle_rejects_oversized_instances() {
        let src = WiretapChannel::bsc_cascade(0.05, 0.15, Pmf::uniform(2))
            .unwrap()
            .source();
        let code = construct_code(
            &src,
            "src",
            &ConstructParams {
                l: 64,
                m: 2,
                eps1: 0.1,
                eps2: 0.1,
                mode: ConstructionMode::Mc,
                trials: 200,
                seed: 1,
                keep_profiles: false,
            },
        )
        .unwrap();
        assert!(matches!(
            exact_secrecy_l1(&src, &code, ProtocolKind::Ska),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn secrecy_bound_chain_edges_and_formula() {
        let src = identity_eve_blind();
        let code = construct_code(&src, "src", &exact_params(4, 2, 0.1, 0.1)).unwrap();
        let profiles = code.outer_profiles.clone().unwrap();
        let report = secrecy_bound_chain(&code, &profiles).unwrap();
        assert_eq!(report.j_total, 8);
        // A blind adversary leaves every selected coordinate fully uniform.
        assert!(report.entropy_deficit.abs() < 1e-9);
        assert!(report.pinsker_bound.abs() < 1e-6);
        assert_eq!(report.selection_violations, 0);
        assert!((report.deficit_budget - 0.8).abs() < 1e-12);
        // Formula is recomputable.
        assert!(
            (report.pinsker_bound
                - (std::f64::consts::LN_2 / 2.0 * report.entropy_deficit.max(0.0)).sqrt())
            .abs()
                < 1e-12
        );

        // J = 0: everything zero.
        let mut joint = vec![0.0; 8];
        joint[0] = 0.5;
        joint[7] = 0.5;
        let omni = WiretapSource::new(2, 2, 2, joint).unwrap();
        let code0 = construct_code(&omni, "src", &exact_params(4, 2, 0.1, 0.1)).unwrap();
        let report0 =
            secrecy_bound_chain(&code0, &code0.outer_profiles.clone().unwrap()).unwrap();
        assert_eq!(report0.j_total, 0);
        assert_eq!(report0.entropy_deficit, 0.0);
        assert_eq!(report0.pinsker_bound, 0.0);
        assert_eq!(report0.deficit_budget, 0.0);

        // Wrong shape rejected.
        assert!(secrecy_bound_chain(&code, &profiles[..1]).is_err());
    }

    #[test]
    fn polarization_table_tracks_the_erasure_recursion() {
        let eps = 0.1;
        let rows: Vec<(usize, EntropyProfile)> = (6..=10)
            .map(|log_n| {
                let n = 1usize << log_n;
                (n, bec_entropy_profile(0.5, n).unwrap())
            })
            .collect();
        let table = polarization_report(&rows, eps, 0.5).unwrap();
        assert_eq!(table.len(), 5);
        for pair in table.windows(2) {
            assert!(
                pair[1].i_fraction <= pair[0].i_fraction + 1e-12,
                "unpolarized fraction must not grow: {pair:?}"
            );
        }
        for row in &table {
            assert!((row.profile_mean - 0.5).abs() < 1e-9, "erasure mean is exact");
            assert!(row.r_fraction + row.d_fraction + row.i_fraction > 0.999);
        }
        let csv = polarization_csv(&table);
        assert!(csv.lines().count() == 6 && csv.starts_with("n,"));
    }

    #[test]
    fn super_source_noiseless_and_noisy() {
        // Noiseless receiver: everything retained, zero uncertainty.
        let ident = identity_eve_blind();
        let rep = super_source_check(&ident, 4, 0.1).unwrap();
        assert_eq!(rep.k, 4);
        assert!(rep.retained_given_receiver.abs() < 1e-9);
        assert!(rep.holds);
        assert!(rep.rate_identity_gap < 1e-9);

        // Noisy receiver at l = 8.
        let src = WiretapChannel::bsc_cascade(0.11, 0.3, Pmf::uniform(2))
            .unwrap()
            .source();
        let rep = super_source_check(&src, 8, 0.1).unwrap();
        assert!(rep.k < 8, "some positions stay unresolved for the receiver");
        assert!(rep.holds, "retained uncertainty {} over budget {}", rep.retained_given_receiver, rep.receiver_budget);
        assert!(rep.receiver_slack >= 0.0);
        assert!(rep.rate_identity_gap < 1e-9);
        // Cross-check the adversary term against the closed forms.
        assert!(rep.retained_rate_adversary <= binary_entropy(0.11 * 0.7 + 0.89 * 0.3) + 1e-9);
    }

    #[test]
    fn super_source_erasure_pair() {
        let src = WiretapChannel::bec_pair(0.4, 0.7, Pmf::uniform(2))
            .unwrap()
            .source();
        let rep = super_source_check(&src, 4, 0.2).unwrap();
        assert!(rep.holds);
        assert!(rep.rate_identity_gap < 1e-9);
    }
}
