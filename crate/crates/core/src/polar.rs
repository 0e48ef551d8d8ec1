//! The GF(2) polarization transform and bit containers.
//!
//! The transform multiplies a length-`N` bit column (`N` a power of two) by
//! the `log2 N`-fold Kronecker power of the kernel `[[1, 1], [0, 1]]`, in
//! natural (non-bit-reversed) index order. Over GF(2) this matrix is an
//! involution, so the same in-place butterfly both applies and inverts it.
//!
//! The butterfly processes strides from widest to narrowest: for stride `h`
//! it xors `x[j + h]` into `x[j]` for every block of `2h` positions, doing
//! `(N / 2) · log2 N` xor operations in total.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A vector of bits stored one byte per bit (values 0 or 1).
///
/// Blocks of arbitrary length are allowed (protocol keys are not power-of-two
/// sized); the transform itself requires a power-of-two length.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BitBlock(Vec<u8>);

impl BitBlock {
    /// Validates that every entry is 0 or 1.
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::invalid(format!(
                "bit block: entry {pos} is {} (must be 0 or 1)",
                bits[pos]
            )));
        }
        Ok(BitBlock(bits))
    }

    /// All-zero block of length `n`.
    pub fn zeros(n: usize) -> Self {
        BitBlock(vec![0; n])
    }

    /// Number of bits.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True for a zero-length block.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The bits as a slice.
    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    /// The bits as a mutable slice.
    pub fn bits_mut(&mut self) -> &mut [u8] {
        &mut self.0
    }

    /// Consumes the block into its bit vector.
    pub fn into_bits(self) -> Vec<u8> {
        self.0
    }

    /// Elementwise xor with another block of the same length.
    pub fn xor(&self, other: &BitBlock) -> Result<BitBlock> {
        if self.len() != other.len() {
            return Err(Error::invalid("bit block xor: length mismatch"));
        }
        Ok(BitBlock(
            self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect(),
        ))
    }

    /// Extracts the bits at `positions` (ascending block positions).
    pub fn gather(&self, positions: &[usize]) -> BitBlock {
        BitBlock(positions.iter().map(|&i| self.0[i]).collect())
    }

    // -- trace serialization -------------------------------------------------

    /// Packs the block into the binary trace format: an 8-byte little-endian
    /// bit count followed by the bits packed 8 per byte, least-significant
    /// bit first within each byte.
    pub fn to_trace_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.0.len().div_ceil(8));
        out.extend_from_slice(&(self.0.len() as u64).to_le_bytes());
        let mut byte = 0u8;
        for (i, &b) in self.0.iter().enumerate() {
            byte |= b << (i % 8);
            if i % 8 == 7 {
                out.push(byte);
                byte = 0;
            }
        }
        if self.0.len() % 8 != 0 {
            out.push(byte);
        }
        out
    }

    /// Parses a block from the binary trace format.
    pub fn from_trace_bytes(data: &[u8]) -> Result<Self> {
        if data.len() < 8 {
            return Err(Error::invalid("bit trace: missing length header"));
        }
        let n = u64::from_le_bytes(data[..8].try_into().expect("8 bytes")) as usize;
        let payload = &data[8..];
        if payload.len() != n.div_ceil(8) {
            return Err(Error::invalid(format!(
                "bit trace: payload has {} bytes for {} bits",
                payload.len(),
                n
            )));
        }
        let mut bits = Vec::with_capacity(n);
        for i in 0..n {
            bits.push((payload[i / 8] >> (i % 8)) & 1);
        }
        // Trailing pad bits must be zero so every block has one encoding.
        if n % 8 != 0 {
            let last = payload[n / 8];
            if last >> (n % 8) != 0 {
                return Err(Error::invalid("bit trace: nonzero padding bits"));
            }
        }
        Ok(BitBlock(bits))
    }

    /// Debug form `"<len>:<hex of packed bits>"`.
    pub fn to_hex(&self) -> String {
        let packed = self.to_trace_bytes();
        format!("{}:{}", self.0.len(), hex::encode(&packed[8..]))
    }

    /// Parses the debug form produced by [`BitBlock::to_hex`].
    pub fn from_hex(s: &str) -> Result<Self> {
        let (len, body) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid("bit hex: missing ':' separator"))?;
        let n: usize = len
            .parse()
            .map_err(|_| Error::invalid("bit hex: bad length prefix"))?;
        let payload = hex::decode(body).map_err(|e| Error::invalid(format!("bit hex: {e}")))?;
        let mut data = (n as u64).to_le_bytes().to_vec();
        data.extend_from_slice(&payload);
        BitBlock::from_trace_bytes(&data)
    }
}

impl From<BitBlock> for Vec<u8> {
    fn from(b: BitBlock) -> Vec<u8> {
        b.0
    }
}

impl std::ops::Index<usize> for BitBlock {
    type Output = u8;
    fn index(&self, i: usize) -> &u8 {
        &self.0[i]
    }
}

/// A rectangular stack of equal-length bit rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitMatrix {
    rows: Vec<BitBlock>,
}

impl BitMatrix {
    /// Validates that all rows have equal length.
    pub fn new(rows: Vec<BitBlock>) -> Result<Self> {
        if let Some(first) = rows.first() {
            let n = first.len();
            if rows.iter().any(|r| r.len() != n) {
                return Err(Error::invalid("bit matrix: ragged rows"));
            }
        }
        Ok(BitMatrix { rows })
    }

    /// All-zero matrix with `rows` rows of `cols` bits.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BitMatrix {
            rows: (0..rows).map(|_| BitBlock::zeros(cols)).collect(),
        }
    }

    /// Number of rows.
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Number of columns (0 for an empty matrix).
    pub fn num_cols(&self) -> usize {
        self.rows.first().map_or(0, BitBlock::len)
    }

    /// Row accessor.
    pub fn row(&self, r: usize) -> &BitBlock {
        &self.rows[r]
    }

    /// Mutable row accessor.
    pub fn row_mut(&mut self, r: usize) -> &mut BitBlock {
        &mut self.rows[r]
    }

    /// All rows.
    pub fn rows(&self) -> &[BitBlock] {
        &self.rows
    }

    /// Column `c` as a new block.
    pub fn column(&self, c: usize) -> BitBlock {
        BitBlock(self.rows.iter().map(|r| r[c]).collect())
    }

    /// Sets entry `(r, c)`.
    pub fn set(&mut self, r: usize, c: usize, bit: u8) {
        self.rows[r].bits_mut()[c] = bit & 1;
    }
}

fn require_power_of_two(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::invalid(format!(
            "transform length {n} is not a power of two"
        )));
    }
    Ok(())
}

/// In-place butterfly; returns the number of xor operations performed.
fn butterfly(bits: &mut [u8]) -> usize {
    let n = bits.len();
    let mut ops = 0;
    let mut h = n / 2;
    while h >= 1 {
        let mut start = 0;
        while start < n {
            for j in start..start + h {
                bits[j] ^= bits[j + h];
                ops += 1;
            }
            start += 2 * h;
        }
        h /= 2;
    }
    ops
}

/// Applies the polarization transform in place to a power-of-two slice of bits.
pub fn transform_in_place(bits: &mut [u8]) -> Result<()> {
    require_power_of_two(bits.len())?;
    butterfly(bits);
    Ok(())
}

/// Returns the transform of `x` (length must be a power of two).
pub fn transform(x: &BitBlock) -> Result<BitBlock> {
    let mut bits = x.bits().to_vec();
    transform_in_place(&mut bits)?;
    Ok(BitBlock(bits))
}

/// Inverse transform; identical to [`transform`] because the matrix is an
/// involution over GF(2).
pub fn inverse_transform(u: &BitBlock) -> Result<BitBlock> {
    transform(u)
}

/// Applies the length-`M` transform independently to every row of `t`.
///
/// This is the multilevel (outer-layer) form: `K` rows transform in parallel,
/// one per inner level.
pub fn transform_multilevel(t: &BitMatrix) -> Result<BitMatrix> {
    if t.num_rows() > 0 {
        require_power_of_two(t.num_cols())?;
    }
    let rows = t
        .rows()
        .iter()
        .map(|r| transform(r).expect("validated length"))
        .collect();
    Ok(BitMatrix { rows })
}

/// Instrumented transform used by cost tests; returns the xor count.
#[doc(hidden)]
pub fn transform_counting(bits: &mut [u8]) -> Result<usize> {
    require_power_of_two(bits.len())?;
    Ok(butterfly(bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Test-side oracle: build the Kronecker-power matrix explicitly and
    /// multiply over GF(2).
    fn kronecker_matrix(n: usize) -> Vec<Vec<u8>> {
        let mut g = vec![vec![1u8]];
        let kernel = [[1u8, 1u8], [0u8, 1u8]];
        let mut size = 1;
        while size < n {
            let mut next = vec![vec![0u8; size * 2]; size * 2];
            for bi in 0..2 {
                for bj in 0..2 {
                    if kernel[bi][bj] == 0 {
                        continue;
                    }
                    for i in 0..size {
                        for j in 0..size {
                            next[bi * size + i][bj * size + j] = g[i][j];
                        }
                    }
                }
            }
            g = next;
            size *= 2;
        }
        g
    }

    fn matrix_apply(g: &[Vec<u8>], x: &[u8]) -> Vec<u8> {
        g.iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a & b).fold(0, |s, v| s ^ v))
            .collect()
    }

    #[test]
    fn worked_examples() {
        let u = transform(&BitBlock::new(vec![0, 1]).unwrap()).unwrap();
        assert_eq!(u.bits(), &[1, 1]);
        let u = transform(&BitBlock::new(vec![1, 1, 0, 1]).unwrap()).unwrap();
        assert_eq!(u.bits(), &[1, 0, 1, 1]);
        // Length one is the identity.
        let u = transform(&BitBlock::new(vec![1]).unwrap()).unwrap();
        assert_eq!(u.bits(), &[1]);
    }

    #[test]
    fn rejects_bad_lengths_and_values() {
        assert!(transform(&BitBlock::zeros(3)).is_err());
        assert!(transform(&BitBlock::zeros(0)).is_err());
        assert!(BitBlock::new(vec![0, 2]).is_err());
    }

    #[test]
    fn matches_matrix_oracle_up_to_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for logn in 0..=6 {
            let n = 1usize << logn;
            let g = kronecker_matrix(n);
            for _ in 0..40 {
                let x: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
                let expect = matrix_apply(&g, &x);
                let got = transform(&BitBlock::new(x).unwrap()).unwrap();
                assert_eq!(got.bits(), &expect[..]);
            }
        }
    }

    #[test]
    fn involution_up_to_two_to_twenty() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for logn in [0usize, 1, 3, 7, 10, 14, 20] {
            let n = 1usize << logn;
            let x: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
            let once = transform(&BitBlock::new(x.clone()).unwrap()).unwrap();
            let twice = transform(&once).unwrap();
            assert_eq!(twice.bits(), &x[..], "involution failed at n = {n}");
        }
    }

    #[test]
    fn xor_cost_scales_as_n_log_n() {
        let mut prev: Option<(usize, usize)> = None;
        for logn in 4..=12 {
            let n = 1usize << logn;
            let mut bits = vec![0u8; n];
            let ops = transform_counting(&mut bits).unwrap();
            assert_eq!(ops, n / 2 * logn, "exact op count at n = {n}");
            if let Some((pn, pops)) = prev {
                let ratio = ops as f64 / pops as f64;
                let model = (n as f64 * (n as f64).log2()) / (pn as f64 * (pn as f64).log2());
                assert!(
                    (ratio / model - 1.0).abs() < 0.10,
                    "cost ratio {ratio} deviates from n log n model {model}"
                );
            }
            prev = Some((n, ops));
        }
    }

    #[test]
    fn multilevel_is_rowwise() {
        let t = BitMatrix::new(vec![
            BitBlock::new(vec![0, 1]).unwrap(),
            BitBlock::new(vec![1, 1]).unwrap(),
        ])
        .unwrap();
        let u = transform_multilevel(&t).unwrap();
        assert_eq!(u.row(0).bits(), &[1, 1]);
        assert_eq!(u.row(1).bits(), &[0, 1]);
        // Involution rowwise as well.
        let back = transform_multilevel(&u).unwrap();
        assert_eq!(back, t);
        // Ragged input is rejected at construction.
        assert!(BitMatrix::new(vec![BitBlock::zeros(2), BitBlock::zeros(4)]).is_err());
    }

    #[test]
    fn trace_and_hex_round_trip() {
        for n in [0usize, 1, 5, 8, 9, 64, 100] {
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
            let block = BitBlock::new(bits).unwrap();
            let back = BitBlock::from_trace_bytes(&block.to_trace_bytes()).unwrap();
            assert_eq!(back, block);
            let back = BitBlock::from_hex(&block.to_hex()).unwrap();
            assert_eq!(back, block);
        }
        // Corrupt padding is rejected.
        let mut data = BitBlock::new(vec![1, 0, 1]).unwrap().to_trace_bytes();
        *data.last_mut().unwrap() |= 0b1000;
        assert!(BitBlock::from_trace_bytes(&data).is_err());
    }

    proptest! {
        #[test]
        fn transform_is_linear(seed in 0u64..1000, logn in 0usize..7) {
            let n = 1usize << logn;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
            let b: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
            let a = BitBlock::new(a).unwrap();
            let b = BitBlock::new(b).unwrap();
            let lhs = transform(&a.xor(&b).unwrap()).unwrap();
            let rhs = transform(&a).unwrap().xor(&transform(&b).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn transform_is_involutive(seed in 0u64..1000, logn in 0usize..11) {
            let n = 1usize << logn;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
            let x = BitBlock::new(x).unwrap();
            prop_assert_eq!(transform(&transform(&x).unwrap()).unwrap(), x);
        }
    }
}
