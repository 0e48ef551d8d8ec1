//! Exact successive-cancellation recursion over probability pairs.
//!
//! The pass works in the probability domain (not log-likelihood ratios): each
//! leaf carries the exact posterior `P(x_k = · | s_k)` of its source bit given
//! that position's side information, and the recursion composes them with two
//! rules. For a block split into halves with per-position pairs `P₁` (first
//! half position) and `P₂` (matching second-half position):
//!
//! * check node (first-half bit `a = x ⊕ x'`):
//!   `P⁻(a) ∝ Σ_{x'} P₁(a ⊕ x') P₂(x')`;
//! * variable node (second-half bit `x'`, after `a` is decided):
//!   `P⁺(x') ∝ P₁(a ⊕ x') P₂(x')`.
//!
//! Every combine renormalizes, so the pair emitted at bit `i` is exactly
//! `P(U_i = · | U^{i−1} = decided prefix, S^N = observed)`. The recursion
//! visits bits in natural index order and costs `O(N log N)` combines.

use rand::Rng;

use crate::polar::BitBlock;
use crate::{Error, Result};

/// An exact probability pair `(p0, p1)` for one bit conditional.
///
/// Invariant: entries are nonnegative and sum to one within `1e-12`
/// (constructors renormalize; a zero-mass pair is rejected).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbPair {
    p0: f64,
    p1: f64,
}

impl ProbPair {
    /// Builds a normalized pair from nonnegative weights.
    pub fn new(w0: f64, w1: f64) -> Result<Self> {
        if !(w0.is_finite() && w1.is_finite()) || w0 < 0.0 || w1 < 0.0 {
            return Err(Error::invalid(format!("prob pair: bad weights ({w0}, {w1})")));
        }
        let sum = w0 + w1;
        if sum <= 0.0 {
            return Err(Error::ZeroProbability { index: 0 });
        }
        Ok(ProbPair {
            p0: w0 / sum,
            p1: w1 / sum,
        })
    }

    /// The uniform pair.
    pub fn uniform() -> Self {
        ProbPair { p0: 0.5, p1: 0.5 }
    }

    /// A pair that is certain about `bit`.
    pub fn certain(bit: u8) -> Self {
        if bit == 0 {
            ProbPair { p0: 1.0, p1: 0.0 }
        } else {
            ProbPair { p0: 0.0, p1: 1.0 }
        }
    }

    /// `P(bit = 0)`.
    pub fn p0(&self) -> f64 {
        self.p0
    }

    /// `P(bit = 1)`.
    pub fn p1(&self) -> f64 {
        self.p1
    }

    /// Probability of a given bit value.
    pub fn p(&self, bit: u8) -> f64 {
        if bit == 0 {
            self.p0
        } else {
            self.p1
        }
    }

    /// Binary entropy of the pair in bits.
    pub fn entropy(&self) -> f64 {
        let mut h = 0.0;
        for p in [self.p0, self.p1] {
            if p > 0.0 {
                h -= p * p.log2();
            }
        }
        h
    }

    /// Most likely bit; an exact tie resolves to 0.
    pub fn argmax(&self) -> u8 {
        u8::from(self.p1 > self.p0)
    }

    /// Draws a bit from the pair.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        u8::from(rng.gen::<f64>() < self.p1)
    }
}

/// Check-node combine: distribution of `a = x₁ ⊕ x₂` for independent bits
/// with pairs `p1`, `p2`. Always well defined for valid inputs.
pub fn check_combine(p1: &ProbPair, p2: &ProbPair) -> ProbPair {
    let w0 = p1.p0 * p2.p0 + p1.p1 * p2.p1;
    let w1 = p1.p0 * p2.p1 + p1.p1 * p2.p0;
    // Inputs are normalized, so w0 + w1 = 1 up to rounding; renormalize to
    // keep the invariant exact across deep recursions.
    let sum = w0 + w1;
    ProbPair {
        p0: w0 / sum,
        p1: w1 / sum,
    }
}

/// Variable-node combine: distribution of `x₂` given the decided first-half
/// bit `a = x₁ ⊕ x₂`. Fails when the conditioning event has probability zero.
pub fn var_combine(p1: &ProbPair, p2: &ProbPair, a: u8) -> Result<ProbPair> {
    let w0 = p1.p(a) * p2.p0;
    let w1 = p1.p(a ^ 1) * p2.p1;
    let sum = w0 + w1;
    if sum <= 0.0 {
        return Err(Error::ZeroProbability { index: 0 });
    }
    Ok(ProbPair {
        p0: w0 / sum,
        p1: w1 / sum,
    })
}

/// Supplies the decision for each bit of a pass, in index order.
///
/// The pass hands the decision source the bit index and the exact conditional
/// pair for that bit given all earlier decisions; the source returns the bit
/// to commit (a known true value, a frozen value, an argmax estimate, or a
/// sampled bit, depending on the driver).
pub trait BitSource {
    /// Decides bit `index` given its conditional pair.
    fn decide(&mut self, index: usize, cond: &ProbPair) -> Result<u8>;
}

impl<F> BitSource for F
where
    F: FnMut(usize, &ProbPair) -> Result<u8>,
{
    fn decide(&mut self, index: usize, cond: &ProbPair) -> Result<u8> {
        self(index, cond)
    }
}

/// Decision source that feeds known true bits (profile estimation).
pub struct Feed<'a> {
    bits: &'a [u8],
}

impl<'a> Feed<'a> {
    /// Feeds the bits of `u` in order.
    pub fn new(bits: &'a [u8]) -> Self {
        Feed { bits }
    }
}

impl BitSource for Feed<'_> {
    fn decide(&mut self, index: usize, _cond: &ProbPair) -> Result<u8> {
        Ok(self.bits[index])
    }
}

/// Output view of one successive-cancellation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ScPassOutput {
    /// Exact conditional pair for every bit, in index order.
    pub pairs: Vec<ProbPair>,
    /// The decided transformed bits `u`.
    pub u: BitBlock,
    /// The corresponding source-domain block `x = G u`.
    pub x: BitBlock,
}

/// Reusable workspace plus output buffers for successive-cancellation passes.
///
/// One engine serves any block length up to its capacity; hot loops keep an
/// engine alive to avoid per-pass allocation.
#[derive(Debug, Default)]
pub struct ScEngine {
    /// Scratch pair buffer per recursion depth; buffer at depth `d` holds the
    /// combined pairs for a node of size `capacity >> d`.
    bufs: Vec<Vec<ProbPair>>,
    pairs: Vec<ProbPair>,
    u: Vec<u8>,
    x: Vec<u8>,
}

impl ScEngine {
    /// Creates an engine (buffers grow on first use).
    pub fn new() -> Self {
        ScEngine::default()
    }

    fn ensure_capacity(&mut self, n: usize) {
        let depths = n.trailing_zeros() as usize;
        while self.bufs.len() < depths {
            let d = self.bufs.len();
            self.bufs.push(vec![ProbPair::uniform(); n >> (d + 1)]);
        }
        for (d, buf) in self.bufs.iter_mut().enumerate() {
            if buf.len() < n >> (d + 1) {
                buf.resize(n >> (d + 1), ProbPair::uniform());
            }
        }
    }

    /// Runs one pass over `leaves` with decisions from `source`.
    ///
    /// `leaves[k]` is the exact posterior of source bit `k` given that
    /// position's observation. The leaf count must be a power of two.
    pub fn pass<S: BitSource>(&mut self, leaves: &[ProbPair], source: &mut S) -> Result<()> {
        let n = leaves.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::invalid(format!(
                "sc pass: leaf count {n} is not a power of two"
            )));
        }
        self.ensure_capacity(n);
        self.pairs.clear();
        self.pairs.reserve(n);
        self.u.clear();
        self.u.reserve(n);
        self.x.clear();
        self.x.resize(n, 0);
        let mut x = std::mem::take(&mut self.x);
        let result = {
            let mut ctx = PassCtx {
                pairs: &mut self.pairs,
                u: &mut self.u,
                source,
            };
            sc_rec(leaves, &mut x, &mut self.bufs, &mut ctx)
        };
        self.x = x;
        result
    }

    /// Conditional pairs of the last pass, in bit-index order.
    pub fn pairs(&self) -> &[ProbPair] {
        &self.pairs
    }

    /// Decided transformed bits of the last pass.
    pub fn u(&self) -> &[u8] {
        &self.u
    }

    /// Source-domain block of the last pass (`x = G u`).
    pub fn x(&self) -> &[u8] {
        &self.x
    }

    /// Clones the last pass into an owned output.
    pub fn output(&self) -> ScPassOutput {
        ScPassOutput {
            pairs: self.pairs.clone(),
            u: BitBlock::new(self.u.to_vec()).expect("bits"),
            x: BitBlock::new(self.x.to_vec()).expect("bits"),
        }
    }
}

struct PassCtx<'a, S: BitSource> {
    pairs: &'a mut Vec<ProbPair>,
    u: &'a mut Vec<u8>,
    source: &'a mut S,
}

/// Recursive worker. Writes the realized source-domain bits of this node into
/// `xout`; scratch buffers `bufs[0]` belongs to this node's depth.
fn sc_rec<S: BitSource>(
    leaves: &[ProbPair],
    xout: &mut [u8],
    bufs: &mut [Vec<ProbPair>],
    ctx: &mut PassCtx<'_, S>,
) -> Result<()> {
    let n = leaves.len();
    if n == 1 {
        let index = ctx.u.len();
        let cond = leaves[0];
        let bit = ctx.source.decide(index, &cond)?;
        if bit > 1 {
            return Err(Error::invalid(format!("bit source returned {bit}")));
        }
        ctx.pairs.push(cond);
        ctx.u.push(bit);
        xout[0] = bit;
        return Ok(());
    }
    let half = n / 2;
    let (buf0, deeper) = bufs.split_at_mut(1);
    let buf = &mut buf0[0][..half];
    let (xa, xb) = xout.split_at_mut(half);

    for j in 0..half {
        buf[j] = check_combine(&leaves[j], &leaves[j + half]);
    }
    sc_rec(buf, xa, deeper, ctx)?;

    for j in 0..half {
        buf[j] = var_combine(&leaves[j], &leaves[j + half], xa[j]).map_err(|e| match e {
            Error::ZeroProbability { .. } => Error::ZeroProbability { index: ctx.u.len() },
            other => other,
        })?;
    }
    sc_rec(buf, xb, deeper, ctx)?;

    // xa currently holds the first-half combination a = x_j ⊕ x_{j+half} and
    // xb the second-half bits; restore the source-domain layout.
    for j in 0..half {
        xa[j] ^= xb[j];
    }
    Ok(())
}

/// One-shot pass: allocates an engine, runs it, returns the owned output.
pub fn sc_pass<S: BitSource>(leaves: &[ProbPair], source: &mut S) -> Result<ScPassOutput> {
    let mut engine = ScEngine::new();
    engine.pass(leaves, source)?;
    Ok(engine.output())
}
