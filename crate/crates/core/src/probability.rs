//! Finite probability distributions and wiretap channel/source descriptions.
//!
//! A *wiretap source* is an i.i.d. joint distribution `P(x, y, z)`: Alice
//! observes `X`, Bob `Y`, the eavesdropper `Z`. A *wiretap channel* is the
//! coding-theoretic view of the same object: an input distribution together
//! with per-input rows `P(y, z | x)`. The two convert into each other and
//! share one JSON schema (explicit table, or the `bsc_cascade` / `bec_pair`
//! shorthands).
//!
//! The module also provides the channel-order predicates used to classify
//! instances (more capable, less noisy — decided on binary-input grids), the
//! corresponding rate formulas, i.i.d. sampling, and the data-processing
//! entropy check for nearly deterministic side information.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Absolute tolerance for inequality checks on derived quantities.
pub const INEQ_TOL: f64 = 1e-9;

/// Probabilities are renormalized when their sum deviates from one by at most
/// this much; larger deviations are a hard validation error.
pub const PROB_SUM_TOL: f64 = 1e-6;

/// Entries more negative than this are a validation error; tiny negative
/// values (rounding noise) are clamped to zero.
pub const PROB_NEG_TOL: f64 = 1e-12;

/// Default grid step for binary-input channel-order scans.
pub const GRID_STEP: f64 = 1e-3;

// ---------------------------------------------------------------------------
// elementary quantities
// ---------------------------------------------------------------------------

/// Shannon entropy in bits of a probability vector; `0 log 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &v in p {
        if v > 0.0 {
            h -= v * v.log2();
        }
    }
    h
}

/// Binary entropy `h(p)` in bits.
pub fn binary_entropy(p: f64) -> f64 {
    entropy(&[p, 1.0 - p])
}

/// Conditional entropy `H(A | B)` in bits from a joint table `p[a][b]`.
///
/// Rows must all have the same length; the table is used as-is (no
/// renormalization), so callers pass a valid joint distribution.
pub fn conditional_entropy(joint: &[Vec<f64>]) -> f64 {
    let nb = joint.first().map_or(0, Vec::len);
    let mut p_b = vec![0.0; nb];
    for row in joint {
        for (b, &v) in row.iter().enumerate() {
            p_b[b] += v;
        }
    }
    let mut h = 0.0;
    for row in joint {
        for (b, &v) in row.iter().enumerate() {
            if v > 0.0 {
                h -= v * (v / p_b[b]).log2();
            }
        }
    }
    h
}

/// Unnormalized L1 distance `Σ |p_i − q_i|` between equal-length vectors.
pub fn l1_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "l1_distance: length mismatch {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum())
}

/// Variational distance `δ(p, q) = ½ Σ |p_i − q_i|`.
pub fn variational_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    Ok(0.5 * l1_distance(p, q)?)
}

/// Mutual information `I(A; B)` in bits from a joint table `p[a][b]`.
pub fn mutual_information(joint: &[Vec<f64>]) -> f64 {
    let nb = joint.first().map_or(0, Vec::len);
    let mut p_b = vec![0.0; nb];
    let mut p_a = vec![0.0; joint.len()];
    for (a, row) in joint.iter().enumerate() {
        for (b, &v) in row.iter().enumerate() {
            p_b[b] += v;
            p_a[a] += v;
        }
    }
    let mut i = 0.0;
    for (a, row) in joint.iter().enumerate() {
        for (b, &v) in row.iter().enumerate() {
            if v > 0.0 {
                i += v * (v / (p_a[a] * p_b[b])).log2();
            }
        }
    }
    i
}

fn validate_prob_vec(p: &[f64], what: &str) -> Result<Vec<f64>> {
    if p.is_empty() {
        return Err(Error::invalid(format!("{what}: empty probability vector")));
    }
    let mut out = Vec::with_capacity(p.len());
    for (i, &v) in p.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::invalid(format!("{what}: entry {i} not finite")));
        }
        if v < -PROB_NEG_TOL {
            return Err(Error::invalid(format!("{what}: entry {i} negative ({v})")));
        }
        out.push(v.max(0.0));
    }
    let sum: f64 = out.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::invalid(format!(
            "{what}: probabilities sum to {sum}, beyond tolerance {PROB_SUM_TOL}"
        )));
    }
    // Sums within 1e-12 validate as-is (keeps exact inputs bit-stable across
    // save/load); anything between 1e-12 and 1e-6 is renormalized once here.
    if (sum - 1.0).abs() > 1e-12 {
        for v in &mut out {
            *v /= sum;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Pmf
// ---------------------------------------------------------------------------

/// A validated probability mass function over `{0, …, n−1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    /// Validates and renormalizes `probs` into a [`Pmf`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Ok(Pmf {
            probs: validate_prob_vec(&probs, "pmf")?,
        })
    }

    /// Uniform distribution over `n` symbols.
    pub fn uniform(n: usize) -> Self {
        Pmf {
            probs: vec![1.0 / n as f64; n.max(1)],
        }
    }

    /// Point mass on symbol `i` out of `n`.
    pub fn point(n: usize, i: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[i] = 1.0;
        Pmf { probs }
    }

    /// Number of symbols (including zero-probability ones).
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    /// True when the support is a single known symbol.
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability of symbol `i`.
    pub fn p(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// The underlying probability vector.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Entropy in bits.
    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }
}

/// Cumulative-distribution sampler for a fixed categorical distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    cdf: Vec<f64>,
}

impl Categorical {
    /// Builds the sampler from (unnormalized is fine) nonnegative weights.
    pub fn new(weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|&w| {
                acc += w / total;
                acc
            })
            .collect();
        Categorical { cdf }
    }

    /// Draws one symbol index.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        // Linear scan: alphabets here are tiny (≤ a few dozen symbols).
        for (i, &c) in self.cdf.iter().enumerate() {
            if u < c {
                return i;
            }
        }
        self.cdf.len() - 1
    }
}

// ---------------------------------------------------------------------------
// pair joints
// ---------------------------------------------------------------------------

/// Joint distribution of a symbol `X` and a side-information symbol `S`,
/// stored as a flat row-major table `p[x * s_card + s]`.
///
/// This is the common input shape for bit-channel entropy profiles: the
/// profile of `X` given side information `S` only depends on this pair law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairJoint {
    /// Alphabet size of `X`.
    pub x_card: usize,
    /// Alphabet size of `S`.
    pub s_card: usize,
    /// Flat row-major joint probabilities.
    pub p: Vec<f64>,
}

impl PairJoint {
    /// Validates the table shape and total mass.
    pub fn new(x_card: usize, s_card: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != x_card * s_card {
            return Err(Error::invalid(format!(
                "pair joint: table has {} entries, expected {}",
                p.len(),
                x_card * s_card
            )));
        }
        let p = validate_prob_vec(&p, "pair joint")?;
        Ok(PairJoint { x_card, s_card, p })
    }

    /// Joint probability `P(x, s)`.
    pub fn p(&self, x: usize, s: usize) -> f64 {
        self.p[x * self.s_card + s]
    }

    /// Marginal of the side symbol.
    pub fn side_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.s_card];
        for x in 0..self.x_card {
            for s in 0..self.s_card {
                m[s] += self.p(x, s);
            }
        }
        m
    }

    /// Marginal of `X`.
    pub fn x_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.x_card];
        for x in 0..self.x_card {
            for s in 0..self.s_card {
                m[x] += self.p(x, s);
            }
        }
        m
    }

    /// Conditional entropy `H(X | S)` in bits.
    pub fn h_x_given_s(&self) -> f64 {
        let rows: Vec<Vec<f64>> = (0..self.x_card)
            .map(|x| (0..self.s_card).map(|s| self.p(x, s)).collect())
            .collect();
        conditional_entropy(&rows)
    }
}

// ---------------------------------------------------------------------------
// wiretap source / channel
// ---------------------------------------------------------------------------

/// An i.i.d. wiretap source: the joint law `P(x, y, z)` of one symbol triple.
#[derive(Debug, Clone, PartialEq)]
pub struct WiretapSource {
    nx: usize,
    ny: usize,
    nz: usize,
    /// Flat row-major joint `p[(x * ny + y) * nz + z]`.
    joint: Vec<f64>,
    sampler: Categorical,
}

impl WiretapSource {
    /// Validates a flat row-major joint table into a source.
    pub fn new(nx: usize, ny: usize, nz: usize, joint: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::invalid("wiretap source: empty alphabet"));
        }
        if joint.len() != nx * ny * nz {
            return Err(Error::invalid(format!(
                "wiretap source: table has {} entries, expected {}",
                joint.len(),
                nx * ny * nz
            )));
        }
        let joint = validate_prob_vec(&joint, "wiretap source joint")?;
        let sampler = Categorical::new(&joint);
        Ok(WiretapSource {
            nx,
            ny,
            nz,
            joint,
            sampler,
        })
    }

    /// Alphabet sizes `(|X|, |Y|, |Z|)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }

    /// Joint probability `P(x, y, z)`.
    pub fn p(&self, x: usize, y: usize, z: usize) -> f64 {
        self.joint[(x * self.ny + y) * self.nz + z]
    }

    /// Marginal distribution of `X`.
    pub fn x_marginal(&self) -> Pmf {
        let mut m = vec![0.0; self.nx];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for z in 0..self.nz {
                    m[x] += self.p(x, y, z);
                }
            }
        }
        Pmf { probs: m }
    }

    /// Pair law of `(X, Y)`.
    pub fn xy_joint(&self) -> PairJoint {
        let mut p = vec![0.0; self.nx * self.ny];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for z in 0..self.nz {
                    p[x * self.ny + y] += self.p(x, y, z);
                }
            }
        }
        PairJoint {
            x_card: self.nx,
            s_card: self.ny,
            p,
        }
    }

    /// Pair law of `(X, Z)`.
    pub fn xz_joint(&self) -> PairJoint {
        let mut p = vec![0.0; self.nx * self.nz];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for z in 0..self.nz {
                    p[x * self.nz + z] += self.p(x, y, z);
                }
            }
        }
        PairJoint {
            x_card: self.nx,
            s_card: self.nz,
            p,
        }
    }

    /// Pair law of `X` and the combined side symbol `(Y, Z)`.
    pub fn x_yz_joint(&self) -> PairJoint {
        let mut p = vec![0.0; self.nx * self.ny * self.nz];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for z in 0..self.nz {
                    p[x * self.ny * self.nz + y * self.nz + z] = self.p(x, y, z);
                }
            }
        }
        PairJoint {
            x_card: self.nx,
            s_card: self.ny * self.nz,
            p,
        }
    }

    /// `H(X | Y)` in bits.
    pub fn h_x_given_y(&self) -> f64 {
        self.xy_joint().h_x_given_s()
    }

    /// `H(X | Z)` in bits.
    pub fn h_x_given_z(&self) -> f64 {
        self.xz_joint().h_x_given_s()
    }

    /// Draws `n` i.i.d. symbol triples into `(x, y, z)` index vectors.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> SampleTriple {
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        for _ in 0..n {
            let flat = self.sampler.sample(rng);
            x.push(flat / (self.ny * self.nz));
            y.push((flat / self.nz) % self.ny);
            z.push(flat % self.nz);
        }
        SampleTriple { x, y, z }
    }

    /// The coding view of this source: input marginal plus `P(y, z | x)` rows.
    ///
    /// Fails if some `x` has zero probability (its channel row is undefined).
    pub fn channel_view(&self) -> Result<WiretapChannel> {
        let px = self.x_marginal();
        let mut w = Vec::with_capacity(self.nx);
        for x in 0..self.nx {
            if px.p(x) <= 0.0 {
                return Err(Error::invalid(format!(
                    "channel view undefined: input symbol {x} has zero probability"
                )));
            }
            let mut row = Vec::with_capacity(self.ny * self.nz);
            for y in 0..self.ny {
                for z in 0..self.nz {
                    row.push(self.p(x, y, z) / px.p(x));
                }
            }
            w.push(row);
        }
        WiretapChannel::new(self.ny, self.nz, px, w)
    }
}

/// One batch of i.i.d. draws from a [`WiretapSource`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTriple {
    /// Alice's symbols.
    pub x: Vec<usize>,
    /// Bob's symbols.
    pub y: Vec<usize>,
    /// The eavesdropper's symbols.
    pub z: Vec<usize>,
}

/// A discrete memoryless wiretap channel: input distribution plus transition
/// rows `P(y, z | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WiretapChannel {
    ny: usize,
    nz: usize,
    input: Pmf,
    /// `w[x][y * nz + z] = P(y, z | x)`.
    w: Vec<Vec<f64>>,
}

impl WiretapChannel {
    /// Validates transition rows (each must be a distribution over `(y, z)`).
    pub fn new(ny: usize, nz: usize, input: Pmf, w: Vec<Vec<f64>>) -> Result<Self> {
        if w.len() != input.len() {
            return Err(Error::invalid(format!(
                "wiretap channel: {} transition rows for {} input symbols",
                w.len(),
                input.len()
            )));
        }
        let mut rows = Vec::with_capacity(w.len());
        for (x, row) in w.iter().enumerate() {
            if row.len() != ny * nz {
                return Err(Error::invalid(format!(
                    "wiretap channel: row {x} has {} entries, expected {}",
                    row.len(),
                    ny * nz
                )));
            }
            rows.push(validate_prob_vec(row, &format!("transition row {x}"))?);
        }
        Ok(WiretapChannel {
            ny,
            nz,
            input,
            w: rows,
        })
    }

    /// Alphabet sizes `(|X|, |Y|, |Z|)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.input.len(), self.ny, self.nz)
    }

    /// The declared input distribution.
    pub fn input(&self) -> &Pmf {
        &self.input
    }

    /// Transition probability `P(y, z | x)`.
    pub fn p_yz_given_x(&self, x: usize, y: usize, z: usize) -> f64 {
        self.w[x][y * self.nz + z]
    }

    /// The i.i.d. source induced by the declared input distribution.
    pub fn source(&self) -> WiretapSource {
        self.source_with_input(&self.input)
            .expect("validated channel always induces a source")
    }

    /// The i.i.d. source induced by an alternative input distribution.
    pub fn source_with_input(&self, input: &Pmf) -> Result<WiretapSource> {
        if input.len() != self.w.len() {
            return Err(Error::invalid("input distribution has wrong alphabet"));
        }
        let nx = self.w.len();
        let mut joint = vec![0.0; nx * self.ny * self.nz];
        for x in 0..nx {
            for y in 0..self.ny {
                for z in 0..self.nz {
                    joint[(x * self.ny + y) * self.nz + z] =
                        input.p(x) * self.p_yz_given_x(x, y, z);
                }
            }
        }
        WiretapSource::new(nx, self.ny, self.nz, joint)
    }

    /// Joint law of `(X, Y)` under input `p`: rows `P(x, y)`.
    fn xy_rows(&self, p: &[f64]) -> Vec<Vec<f64>> {
        (0..self.w.len())
            .map(|x| {
                (0..self.ny)
                    .map(|y| {
                        let mut v = 0.0;
                        for z in 0..self.nz {
                            v += p[x] * self.p_yz_given_x(x, y, z);
                        }
                        v
                    })
                    .collect()
            })
            .collect()
    }

    /// Joint law of `(X, Z)` under input `p`: rows `P(x, z)`.
    fn xz_rows(&self, p: &[f64]) -> Vec<Vec<f64>> {
        (0..self.w.len())
            .map(|x| {
                (0..self.nz)
                    .map(|z| {
                        let mut v = 0.0;
                        for y in 0..self.ny {
                            v += p[x] * self.p_yz_given_x(x, y, z);
                        }
                        v
                    })
                    .collect()
            })
            .collect()
    }

    /// Samples one `(y, z)` pair for input symbol `x`.
    pub fn transmit_symbol<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> (usize, usize) {
        // Rows are tiny; a scan per symbol is fine.
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let row = &self.w[x];
        for (i, &v) in row.iter().enumerate() {
            acc += v;
            if u < acc {
                return (i / self.nz, i % self.nz);
            }
        }
        (self.ny - 1, self.nz - 1)
    }

    // -- constructions -------------------------------------------------------

    /// Binary symmetric cascade: `Y = BSC(p1)(X)`, `Z = BSC(p2)(Y)`.
    ///
    /// The eavesdropper observes a degradation of Bob's symbol, so the channel
    /// to Bob is less noisy (hence more capable) than the channel to Eve.
    pub fn bsc_cascade(p1: f64, p2: f64, input: Pmf) -> Result<Self> {
        for (name, p) in [("p1", p1), ("p2", p2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("bsc_cascade: {name} = {p} not in [0, 1]")));
            }
        }
        if input.len() != 2 {
            return Err(Error::invalid("bsc_cascade: input must be binary"));
        }
        let bsc = |flip: f64, a: usize, b: usize| if a == b { 1.0 - flip } else { flip };
        let w = (0..2usize)
            .map(|x| {
                let mut row = Vec::with_capacity(4);
                for y in 0..2usize {
                    for z in 0..2usize {
                        row.push(bsc(p1, x, y) * bsc(p2, y, z));
                    }
                }
                row
            })
            .collect();
        WiretapChannel::new(2, 2, input, w)
    }

    /// Independent erasure pair: `Y = BEC(e1)(X)`, `Z = BEC(e2)(X)`,
    /// conditionally independent given `X`. Output symbol `2` is the erasure.
    pub fn bec_pair(e1: f64, e2: f64, input: Pmf) -> Result<Self> {
        for (name, e) in [("e1", e1), ("e2", e2)] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::invalid(format!("bec_pair: {name} = {e} not in [0, 1]")));
            }
        }
        if input.len() != 2 {
            return Err(Error::invalid("bec_pair: input must be binary"));
        }
        let bec = |erase: f64, x: usize, out: usize| {
            if out == 2 {
                erase
            } else if out == x {
                1.0 - erase
            } else {
                0.0
            }
        };
        let w = (0..2usize)
            .map(|x| {
                let mut row = Vec::with_capacity(9);
                for y in 0..3usize {
                    for z in 0..3usize {
                        row.push(bec(e1, x, y) * bec(e2, x, z));
                    }
                }
                row
            })
            .collect();
        WiretapChannel::new(3, 3, input, w)
    }
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

/// Explicit-table JSON form of a wiretap channel.
///
/// `w[x]` is the row `P(y, z | x)` in row-major `(y, z)` order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelTableJson {
    /// `|X|`.
    pub x: usize,
    /// `|Y|`.
    pub y: usize,
    /// `|Z|`.
    pub z: usize,
    /// Input distribution over `X`.
    pub p_x: Vec<f64>,
    /// Transition rows.
    pub w: Vec<Vec<f64>>,
}

/// JSON forms accepted for a wiretap channel: shorthand constructors or an
/// explicit table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelJson {
    /// Named shorthand constructions.
    Shorthand {
        /// `"bsc_cascade"` (fields `p1`, `p2`) or `"bec_pair"` (`e1`, `e2`).
        kind: String,
        /// Flip probability Alice→Bob (cascade form).
        #[serde(skip_serializing_if = "Option::is_none")]
        p1: Option<f64>,
        /// Flip probability Bob→Eve (cascade form).
        #[serde(skip_serializing_if = "Option::is_none")]
        p2: Option<f64>,
        /// Erasure probability toward Bob (erasure-pair form).
        #[serde(skip_serializing_if = "Option::is_none")]
        e1: Option<f64>,
        /// Erasure probability toward Eve (erasure-pair form).
        #[serde(skip_serializing_if = "Option::is_none")]
        e2: Option<f64>,
        /// Optional input distribution; uniform when omitted.
        #[serde(skip_serializing_if = "Option::is_none")]
        p_x: Option<Vec<f64>>,
    },
    /// Explicit table.
    Table(ChannelTableJson),
}

impl WiretapChannel {
    /// Parses a channel from its JSON description (table or shorthand).
    pub fn from_json_str(s: &str) -> Result<Self> {
        let parsed: ChannelJson = serde_json::from_str(s)?;
        match parsed {
            ChannelJson::Table(t) => {
                if t.w.len() != t.x {
                    return Err(Error::invalid("channel json: w rows must match x"));
                }
                if t.p_x.len() != t.x {
                    return Err(Error::invalid("channel json: p_x length must match x"));
                }
                WiretapChannel::new(t.y, t.z, Pmf::new(t.p_x)?, t.w)
            }
            ChannelJson::Shorthand {
                kind,
                p1,
                p2,
                e1,
                e2,
                p_x,
            } => {
                let input = match p_x {
                    Some(v) => Pmf::new(v)?,
                    None => Pmf::uniform(2),
                };
                match kind.as_str() {
                    "bsc_cascade" => {
                        let (p1, p2) = match (p1, p2) {
                            (Some(a), Some(b)) => (a, b),
                            _ => {
                                return Err(Error::invalid(
                                    "bsc_cascade shorthand requires p1 and p2",
                                ))
                            }
                        };
                        WiretapChannel::bsc_cascade(p1, p2, input)
                    }
                    "bec_pair" => {
                        let (e1, e2) = match (e1, e2) {
                            (Some(a), Some(b)) => (a, b),
                            _ => {
                                return Err(Error::invalid("bec_pair shorthand requires e1 and e2"))
                            }
                        };
                        WiretapChannel::bec_pair(e1, e2, input)
                    }
                    other => Err(Error::invalid(format!("unknown channel kind {other:?}"))),
                }
            }
        }
    }

    /// Canonical explicit-table JSON for this channel.
    pub fn to_json_string(&self) -> String {
        let t = ChannelTableJson {
            x: self.w.len(),
            y: self.ny,
            z: self.nz,
            p_x: self.input.probs().to_vec(),
            w: self.w.clone(),
        };
        serde_json::to_string_pretty(&ChannelJson::Table(t)).expect("channel serializes")
    }

    /// SHA-256 over the canonical table serialization, hex-encoded.
    ///
    /// Code descriptions embed this hash so runs can verify they pair a code
    /// with the channel it was constructed for.
    pub fn content_hash(&self) -> String {
        let t = ChannelTableJson {
            x: self.w.len(),
            y: self.ny,
            z: self.nz,
            p_x: self.input.probs().to_vec(),
            w: self.w.clone(),
        };
        let canon = serde_json::to_string(&ChannelJson::Table(t)).expect("channel serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }
}

// ---------------------------------------------------------------------------
// channel-order predicates
// ---------------------------------------------------------------------------

/// Outcome of a channel-order scan over binary input distributions.
#[derive(Debug, Clone)]
pub struct ClassCheck {
    /// Whether the property holds everywhere on the grid (within tolerance).
    pub holds: bool,
    /// Worst-case margin; its sign convention is documented per predicate.
    pub margin: f64,
    /// Input distribution achieving the worst case.
    pub witness_input: Pmf,
}

fn require_binary_input(channel: &WiretapChannel, what: &str) -> Result<()> {
    if channel.dims().0 != 2 {
        return Err(Error::invalid(format!(
            "{what}: only binary-input channels are supported (|X| = {})",
            channel.dims().0
        )));
    }
    Ok(())
}

fn grid_points(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Decides whether the channel to Bob is *more capable* than the channel to
/// Eve: `I(X; Y) ≥ I(X; Z)` for every input distribution.
///
/// Binary inputs only; the inequality is checked on a grid over
/// `P(X = 1)` with the given step. `margin` is the minimum of
/// `I(X; Y) − I(X; Z)` over the grid (negative means a violation) and
/// `witness_input` attains it.
pub fn is_more_capable(channel: &WiretapChannel, step: f64) -> Result<ClassCheck> {
    require_binary_input(channel, "is_more_capable")?;
    let mut worst = f64::INFINITY;
    let mut worst_p = 0.0;
    for p1 in grid_points(step) {
        let p = [1.0 - p1, p1];
        let gap = mutual_information(&channel.xy_rows(&p)) - mutual_information(&channel.xz_rows(&p));
        if gap < worst {
            worst = gap;
            worst_p = p1;
        }
    }
    Ok(ClassCheck {
        holds: worst >= -INEQ_TOL,
        margin: worst,
        witness_input: Pmf::new(vec![1.0 - worst_p, worst_p])?,
    })
}

/// Decides whether the channel to Bob is *less noisy* than the channel to
/// Eve: `I(U; Y) ≥ I(U; Z)` for every `U — X — (Y, Z)`.
///
/// For binary inputs this is equivalent to concavity of
/// `f(P_X) = I(X; Y) − I(X; Z)` as a function of `P(X = 1)`, so the scan
/// checks discrete second differences of `f` on a grid. `margin` is the
/// largest second difference found (a value above tolerance is a strict
/// convexity violation) and `witness_input` is the violating midpoint.
pub fn is_less_noisy(channel: &WiretapChannel, step: f64) -> Result<ClassCheck> {
    require_binary_input(channel, "is_less_noisy")?;
    let grid = grid_points(step);
    let f: Vec<f64> = grid
        .iter()
        .map(|&p1| {
            let p = [1.0 - p1, p1];
            mutual_information(&channel.xy_rows(&p)) - mutual_information(&channel.xz_rows(&p))
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_p = 0.0;
    for i in 1..f.len() - 1 {
        let second = f[i - 1] + f[i + 1] - 2.0 * f[i];
        if second > worst {
            worst = second;
            worst_p = grid[i];
        }
    }
    Ok(ClassCheck {
        holds: worst <= INEQ_TOL,
        margin: worst,
        witness_input: Pmf::new(vec![1.0 - worst_p, worst_p])?,
    })
}

/// One-way secret-key rate `H(X | Z) − H(X | Y)` of a source, achievable by
/// the key-agreement protocol when the channel to Eve is less noisy than the
/// channel to Bob with the roles as given (Bob's side info is `Y`).
pub fn key_rate_less_noisy(source: &WiretapSource) -> f64 {
    source.h_x_given_z() - source.h_x_given_y()
}

/// Secrecy capacity `max_{P_X} [H(X | Z) − H(X | Y)]` of a more-capable
/// binary-input wiretap channel, maximized on a grid over `P(X = 1)`.
///
/// Returns the capacity (clamped at zero) and the maximizing input.
pub fn secrecy_capacity_more_capable(channel: &WiretapChannel, step: f64) -> Result<(f64, Pmf)> {
    require_binary_input(channel, "secrecy_capacity_more_capable")?;
    let mut best = f64::NEG_INFINITY;
    let mut best_p = 0.5;
    for p1 in grid_points(step) {
        let p = [1.0 - p1, p1];
        // Rows are indexed by x, columns by the observation, so these are
        // H(X | Z) and H(X | Y) directly.
        let gap = conditional_entropy(&channel.xz_rows(&p))
            - conditional_entropy(&channel.xy_rows(&p));
        if gap > best {
            best = gap;
            best_p = p1;
        }
    }
    Ok((best.max(0.0), Pmf::new(vec![1.0 - best_p, best_p])?))
}

// ---------------------------------------------------------------------------
// Markov triples and the nearly-deterministic side-information check
// ---------------------------------------------------------------------------

/// A Markov chain `U — X — (Y, Z)` given by its three factors.
#[derive(Debug, Clone)]
pub struct MarkovTriple {
    /// Distribution of `X`.
    pub p_x: Pmf,
    /// Rows `P(u | x)`, indexed `[x][u]`.
    pub p_u_given_x: Vec<Vec<f64>>,
    /// Rows `P(y, z | x)` in row-major `(y, z)` order, indexed `[x]`.
    pub p_yz_given_x: Vec<Vec<f64>>,
    /// `|Y|`.
    pub ny: usize,
    /// `|Z|`.
    pub nz: usize,
}

/// Outcome of [`noisy_observation_entropy_check`].
#[derive(Debug, Clone, Copy)]
pub struct NoisyObservationOutcome {
    /// Whether `H(U | Y) ≤ H(U | Z) + eps` holds (within tolerance).
    pub holds: bool,
    /// Whether the precondition `H(X | Y) ≤ eps` failed, making the check
    /// vacuous for this triple.
    pub vacuous: bool,
    /// `H(U | Y)`.
    pub h_u_given_y: f64,
    /// `H(U | Z)`.
    pub h_u_given_z: f64,
    /// `H(X | Y)`.
    pub h_x_given_y: f64,
}

impl MarkovTriple {
    fn validate(&self) -> Result<(usize, usize)> {
        let nx = self.p_x.len();
        if self.p_u_given_x.len() != nx || self.p_yz_given_x.len() != nx {
            return Err(Error::invalid("markov triple: row counts must match |X|"));
        }
        let nu = self
            .p_u_given_x
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("markov triple: empty"))?;
        for (x, row) in self.p_u_given_x.iter().enumerate() {
            if row.len() != nu {
                return Err(Error::invalid(format!("markov triple: ragged U row {x}")));
            }
            validate_prob_vec(row, &format!("P(u|x={x})"))?;
        }
        for (x, row) in self.p_yz_given_x.iter().enumerate() {
            if row.len() != self.ny * self.nz {
                return Err(Error::invalid(format!("markov triple: ragged YZ row {x}")));
            }
            validate_prob_vec(row, &format!("P(yz|x={x})"))?;
        }
        Ok((nx, nu))
    }

    /// Joint tables `P(u, y)` and `P(u, z)` plus `P(x, y)`.
    fn joints(&self) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let (nx, nu) = self.validate()?;
        let mut uy = vec![vec![0.0; self.ny]; nu];
        let mut uz = vec![vec![0.0; self.nz]; nu];
        let mut xy = vec![vec![0.0; self.ny]; nx];
        for x in 0..nx {
            for y in 0..self.ny {
                for z in 0..self.nz {
                    let pxyz = self.p_x.p(x) * self.p_yz_given_x[x][y * self.nz + z];
                    if pxyz == 0.0 {
                        continue;
                    }
                    xy[x][y] += pxyz;
                    for u in 0..nu {
                        let v = pxyz * self.p_u_given_x[x][u];
                        uy[u][y] += v;
                        uz[u][z] += v;
                    }
                }
            }
        }
        Ok((uy, uz, xy))
    }
}

/// Checks the data-processing entropy bound for nearly deterministic side
/// information: if `H(X | Y) ≤ eps` for a Markov chain `U — X — (Y, Z)`, then
/// `H(U | Y) ≤ H(U | Z) + eps`.
///
/// When the precondition fails the outcome is flagged `vacuous` (and `holds`
/// reports the inequality as observed, for information only).
pub fn noisy_observation_entropy_check(
    triple: &MarkovTriple,
    eps: f64,
) -> Result<NoisyObservationOutcome> {
    let (uy, uz, xy) = triple.joints()?;
    let h_u_given_y = conditional_entropy(&uy);
    let h_u_given_z = conditional_entropy(&uz);
    let h_x_given_y = conditional_entropy(&xy);
    Ok(NoisyObservationOutcome {
        holds: h_u_given_y <= h_u_given_z + eps + INEQ_TOL,
        vacuous: h_x_given_y > eps + INEQ_TOL,
        h_u_given_y,
        h_u_given_z,
        h_x_given_y,
    })
}
