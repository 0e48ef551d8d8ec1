//! One-way secret-key agreement over an i.i.d. wiretap source.
//!
//! One run covers `N = l · m` source symbols. The sender transforms each of
//! the `m` inner blocks, keeps the retained bits `t = v[E_K]`, and publishes
//! the complement `c = v[E_K^c]`. The `K` retained-bit levels are then
//! transformed across blocks, and the key is read off the outer key sets
//! `F_(j)` — level-major, index-ascending. The receiver decodes each inner
//! block with the published bits frozen, reconstructs the retained levels,
//! and extracts with the identical rule; the outer layer needs no further
//! decoding because it is a fixed bijection of the retained bits.
//!
//! The published complement can shrink further: bits that are nearly uniform
//! for the receiver anyway (the inner `r` set) are fixed to zero by
//! convention and only the unpolarized `i` bits travel
//! ([`reduce_public`] / [`expand_public`]).

use rand::Rng;

use crate::bitchan::{CodeSpec, ScEngine};
use crate::codec::{decode_into, posterior_leaves, FrozenMap};
use crate::polar::{transform, transform_multilevel, BitBlock, BitMatrix};
use crate::probability::{PairJoint, WiretapSource};
use crate::{Error, Result};

/// Everything produced by one key-agreement run.
#[derive(Debug, Clone, PartialEq)]
pub struct SkaTranscript {
    /// Sender key of length `J`.
    pub key_alice: BitBlock,
    /// Receiver key of length `J`; `None` when a block decode aborted on an
    /// impossible observation.
    pub key_bob: Option<BitBlock>,
    /// Published complement bits, one row per inner block.
    pub public: BitMatrix,
    /// Realized source symbols.
    pub x: BitBlock,
    /// Receiver observations.
    pub y: Vec<usize>,
    /// Adversary observations.
    pub z: Vec<usize>,
}

impl SkaTranscript {
    /// True when the receiver's key exists and equals the sender's.
    pub fn keys_agree(&self) -> bool {
        self.key_bob.as_ref() == Some(&self.key_alice)
    }
}

fn check_symbol_len(len: usize, code: &CodeSpec) -> Result<()> {
    if len != code.n() {
        return Err(Error::invalid(format!(
            "sequence length {len} does not match the code's n = {} ({} blocks of {})",
            code.n(),
            code.m,
            code.l
        )));
    }
    Ok(())
}

/// Extracts the key coordinates from the outer-transformed levels:
/// level-major, ascending outer index within each level.
fn extract_key(u: &BitMatrix, code: &CodeSpec) -> BitBlock {
    let mut key = Vec::with_capacity(code.j_total());
    for (j, f) in code.outer_f.iter().enumerate() {
        let row = u.row(j);
        for &i in f {
            key.push(row[i]);
        }
    }
    BitBlock::new(key).expect("extracted bits are bits")
}

/// Outer layer shared by both parties: transform the retained-bit levels
/// across blocks and read the key sets. `t` has one row per level.
fn outer_extract(t: &BitMatrix, code: &CodeSpec) -> Result<BitBlock> {
    if code.k() == 0 {
        return Ok(BitBlock::new(Vec::new())?);
    }
    let u = transform_multilevel(t)?;
    Ok(extract_key(&u, code))
}

/// Sender's map: returns the key, the published complement rows, and the
/// retained-bit levels (one row per level, columns indexed by block).
pub fn ska_alice(x: &BitBlock, code: &CodeSpec) -> Result<(BitBlock, BitMatrix, BitMatrix)> {
    check_symbol_len(x.len(), code)?;
    let e_k = code.e_k();
    let comp = code.e_k_complement();
    let k = e_k.len();
    let mut t = BitMatrix::zeros(k, code.m);
    let mut public = BitMatrix::zeros(code.m, comp.len());
    for b in 0..code.m {
        let block = BitBlock::new(x.bits()[b * code.l..(b + 1) * code.l].to_vec())?;
        let v = transform(&block)?;
        for (j, &pos) in e_k.iter().enumerate() {
            t.set(j, b, v[pos]);
        }
        for (r, &pos) in comp.iter().enumerate() {
            public.set(b, r, v[pos]);
        }
    }
    let key = outer_extract(&t, code)?;
    Ok((key, public, t))
}

/// Receiver's map: decode each inner block with the published bits frozen,
/// then extract through the outer bijection. Returns `None` when a block
/// decode hits an impossible observation.
pub fn ska_bob(
    y: &[usize],
    public: &BitMatrix,
    code: &CodeSpec,
    xy: &PairJoint,
) -> Result<Option<BitBlock>> {
    check_symbol_len(y.len(), code)?;
    let comp = code.e_k_complement();
    if public.num_rows() != code.m || public.num_cols() != comp.len() {
        return Err(Error::invalid(format!(
            "public message is {}×{}, expected {}×{}",
            public.num_rows(),
            public.num_cols(),
            code.m,
            comp.len()
        )));
    }
    let e_k = code.e_k();
    let mut t = BitMatrix::zeros(e_k.len(), code.m);
    let mut engine = ScEngine::new();
    for b in 0..code.m {
        let leaves = match posterior_leaves(xy, &y[b * code.l..(b + 1) * code.l]) {
            Ok(l) => l,
            Err(Error::ZeroProbability { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let frozen = FrozenMap::from_values(code.l, &comp, public.row(b).bits())?;
        match decode_into(&mut engine, &leaves, &frozen) {
            Ok(()) => {}
            Err(Error::ZeroProbability { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
        for (j, &pos) in e_k.iter().enumerate() {
            t.set(j, b, engine.u()[pos]);
        }
    }
    Ok(Some(outer_extract(&t, code)?))
}

/// Samples one source realization and runs both ends of the protocol.
pub fn ska_trial<R: Rng>(
    source: &WiretapSource,
    code: &CodeSpec,
    rng: &mut R,
) -> Result<SkaTranscript> {
    let sample = source.sample(code.n(), rng);
    let x = BitBlock::new(sample.x.iter().map(|&v| v as u8).collect::<Vec<_>>())
        .map_err(|_| Error::invalid("key agreement requires a binary source"))?;
    let (key_alice, public, _) = ska_alice(&x, code)?;
    let key_bob = ska_bob(&sample.y, &public, code, &source.xy_joint())?;
    Ok(SkaTranscript {
        key_alice,
        key_bob,
        public,
        x,
        y: sample.y,
        z: sample.z,
    })
}

// ---------------------------------------------------------------------------
// public-message reduction
// ---------------------------------------------------------------------------

/// Positions within a published row, split into the fixable nearly uniform
/// part and the unpolarized part that must travel.
fn row_split(code: &CodeSpec) -> (Vec<usize>, Vec<usize>) {
    let comp = code.e_k_complement();
    let mut fixable = Vec::new();
    let mut carried = Vec::new();
    for (r, &pos) in comp.iter().enumerate() {
        if code.inner.r.binary_search(&pos).is_ok() {
            fixable.push(r);
        } else {
            carried.push(r);
        }
    }
    (fixable, carried)
}

/// Shrinks one published row to its unpolarized bits. The nearly uniform
/// bits are fixed to zero by code convention; a row whose fixable bits are
/// not all zero cannot be represented and is reported.
pub fn reduce_public(c: &BitBlock, code: &CodeSpec) -> Result<BitBlock> {
    let (fixable, carried) = row_split(code);
    if c.len() != fixable.len() + carried.len() {
        return Err(Error::invalid(format!(
            "published row has {} bits, expected {}",
            c.len(),
            fixable.len() + carried.len()
        )));
    }
    if let Some(&r) = fixable.iter().find(|&&r| c[r] != 0) {
        return Err(Error::invalid(format!(
            "published row bit {r} is in the fixed-to-zero set but equals 1"
        )));
    }
    Ok(c.gather(&carried))
}

/// Applies [`reduce_public`] to every row of a published matrix.
pub fn reduce_public_matrix(public: &BitMatrix, code: &CodeSpec) -> Result<BitMatrix> {
    let rows = public
        .rows()
        .iter()
        .map(|row| reduce_public(row, code))
        .collect::<Result<Vec<_>>>()?;
    BitMatrix::new(rows)
}

/// Applies [`expand_public`] to every row of a reduced matrix.
pub fn expand_public_matrix(reduced: &BitMatrix, code: &CodeSpec) -> Result<BitMatrix> {
    let rows = reduced
        .rows()
        .iter()
        .map(|row| expand_public(row, code))
        .collect::<Result<Vec<_>>>()?;
    BitMatrix::new(rows)
}

/// Rebuilds a full published row from its reduced form, restoring the
/// fixed-to-zero bits.
pub fn expand_public(reduced: &BitBlock, code: &CodeSpec) -> Result<BitBlock> {
    let (fixable, carried) = row_split(code);
    if reduced.len() != carried.len() {
        return Err(Error::invalid(format!(
            "reduced row has {} bits, expected {}",
            reduced.len(),
            carried.len()
        )));
    }
    let mut full = BitBlock::zeros(fixable.len() + carried.len());
    for (idx, &r) in carried.iter().enumerate() {
        full.bits_mut()[r] = reduced[idx];
    }
    Ok(full)
}
