//! Successive-cancellation decoding and encoder-side bit simulation.
//!
//! Both protocols drive the same exact pass (see [`crate::bitchan`]) with
//! different per-position decision policies, described by a [`FrozenMap`]:
//!
//! * decoding: frozen positions take their communicated values, free
//!   positions take the argmax of the exact conditional (ties toward 0);
//! * simulation (encoder side): pinned positions take provided values
//!   (message or retained bits), the rest are sampled from their exact model
//!   conditional — no channel output is consulted;
//! * weighted replay: as simulation, but sampled positions are forced to a
//!   given assignment and the product of their conditionals is returned —
//!   the probability that the simulator would have produced exactly that
//!   assignment.

use rand::Rng;

use crate::bitchan::{BitSource, ProbPair, ScEngine};
use crate::polar::BitBlock;
use crate::probability::{PairJoint, Pmf};
use crate::{Error, Result};

/// Per-position decision rule for positions not decided by the pass itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrozenRule {
    /// The position carries this known bit.
    Value(u8),
    /// The position is generated on the fly from its model conditional
    /// (simulation only).
    Sample,
}

/// Assignment of decision rules to a block's positions. Positions without a
/// rule are "free": argmax under decoding, invalid under simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrozenMap {
    rules: Vec<Option<FrozenRule>>,
}

impl FrozenMap {
    /// A map with every position free.
    pub fn free(n: usize) -> Self {
        FrozenMap {
            rules: vec![None; n],
        }
    }

    /// Block length.
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    /// True for a zero-length block.
    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Rule at a position.
    pub fn rule(&self, pos: usize) -> Option<FrozenRule> {
        self.rules[pos]
    }

    /// Pins `positions[r]` to `bits[r]`.
    pub fn set_values(&mut self, positions: &[usize], bits: &[u8]) -> Result<()> {
        if positions.len() != bits.len() {
            return Err(Error::invalid(format!(
                "frozen map: {} positions but {} bits",
                positions.len(),
                bits.len()
            )));
        }
        for (&pos, &bit) in positions.iter().zip(bits) {
            self.set(pos, FrozenRule::Value(bit))?;
        }
        Ok(())
    }

    /// Marks positions as sampled on the fly.
    pub fn set_sampled(&mut self, positions: &[usize]) -> Result<()> {
        for &pos in positions {
            self.set(pos, FrozenRule::Sample)?;
        }
        Ok(())
    }

    fn set(&mut self, pos: usize, rule: FrozenRule) -> Result<()> {
        if pos >= self.rules.len() {
            return Err(Error::invalid(format!(
                "frozen map: position {pos} ≥ length {}",
                self.rules.len()
            )));
        }
        if let FrozenRule::Value(b) = rule {
            if b > 1 {
                return Err(Error::invalid(format!("frozen map: bit value {b}")));
            }
        }
        if self.rules[pos].is_some() {
            return Err(Error::invalid(format!(
                "frozen map: position {pos} assigned twice"
            )));
        }
        self.rules[pos] = Some(rule);
        Ok(())
    }

    /// Frozen map of the given length with `positions[r]` pinned to
    /// `bits[r]` and everything else free.
    pub fn from_values(n: usize, positions: &[usize], bits: &[u8]) -> Result<Self> {
        let mut map = FrozenMap::free(n);
        map.set_values(positions, bits)?;
        Ok(map)
    }
}

// ---------------------------------------------------------------------------
// decision sources
// ---------------------------------------------------------------------------

struct DecodeSource<'a> {
    frozen: &'a FrozenMap,
}

impl BitSource for DecodeSource<'_> {
    fn decide(&mut self, index: usize, cond: &ProbPair) -> Result<u8> {
        match self.frozen.rules[index] {
            Some(FrozenRule::Value(b)) => Ok(b),
            Some(FrozenRule::Sample) => Err(Error::invalid(
                "decode: sampling rules are an encoder-side concept",
            )),
            None => Ok(cond.argmax()),
        }
    }
}

struct SimulateSource<'a, R: Rng> {
    frozen: &'a FrozenMap,
    rng: &'a mut R,
}

impl<R: Rng> BitSource for SimulateSource<'_, R> {
    fn decide(&mut self, index: usize, cond: &ProbPair) -> Result<u8> {
        match self.frozen.rules[index] {
            Some(FrozenRule::Value(b)) => Ok(b),
            Some(FrozenRule::Sample) => Ok(cond.sample(self.rng)),
            None => Err(Error::invalid(format!(
                "simulate: position {index} has no rule"
            ))),
        }
    }
}

struct ReplaySource<'a> {
    frozen: &'a FrozenMap,
    forced: &'a [u8],
    weight: f64,
}

impl BitSource for ReplaySource<'_> {
    fn decide(&mut self, index: usize, cond: &ProbPair) -> Result<u8> {
        match self.frozen.rules[index] {
            Some(FrozenRule::Value(b)) => Ok(b),
            Some(FrozenRule::Sample) => {
                let b = self.forced[index];
                self.weight *= cond.p(b);
                Ok(b)
            }
            None => Err(Error::invalid(format!(
                "replay: position {index} has no rule"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// drivers
// ---------------------------------------------------------------------------

fn check_sizes(leaves: &[ProbPair], frozen: &FrozenMap) -> Result<()> {
    if leaves.len() != frozen.len() {
        return Err(Error::invalid(format!(
            "{} leaves but frozen map of length {}",
            leaves.len(),
            frozen.len()
        )));
    }
    Ok(())
}

/// Decodes one block into a reusable engine; read the transform-domain
/// estimate from `engine.u()` afterwards. Frozen positions must carry
/// values; free positions take the conditional argmax (ties toward 0).
pub fn decode_into(engine: &mut ScEngine, leaves: &[ProbPair], frozen: &FrozenMap) -> Result<()> {
    check_sizes(leaves, frozen)?;
    engine.pass(leaves, &mut DecodeSource { frozen })
}

/// One-shot decode; returns the full transform-domain estimate.
pub fn sc_decode(leaves: &[ProbPair], frozen: &FrozenMap) -> Result<BitBlock> {
    let mut engine = ScEngine::new();
    decode_into(&mut engine, leaves, frozen)?;
    Ok(BitBlock::new(engine.u().to_vec())?)
}

/// Runs the encoder-side simulation pass into a reusable engine: pinned
/// positions take their values, sampled positions draw from the exact model
/// conditional. Every position must carry a rule. Afterwards `engine.u()`
/// holds the transform-domain block and `engine.x()` its transform.
pub fn simulate_into<R: Rng>(
    engine: &mut ScEngine,
    leaves: &[ProbPair],
    frozen: &FrozenMap,
    rng: &mut R,
) -> Result<()> {
    check_sizes(leaves, frozen)?;
    engine.pass(leaves, &mut SimulateSource { frozen, rng })
}

/// As [`simulate_into`], but positions marked [`FrozenRule::Sample`] are
/// forced to `forced[position]` and the probability of that joint sampling
/// outcome — the product of the forced bits' conditionals — is returned.
pub fn replay_into(
    engine: &mut ScEngine,
    leaves: &[ProbPair],
    frozen: &FrozenMap,
    forced: &[u8],
) -> Result<f64> {
    check_sizes(leaves, frozen)?;
    if forced.len() != leaves.len() {
        return Err(Error::invalid(format!(
            "replay: {} forced bits for block length {}",
            forced.len(),
            leaves.len()
        )));
    }
    let mut source = ReplaySource {
        frozen,
        forced,
        weight: 1.0,
    };
    engine.pass(leaves, &mut source)?;
    Ok(source.weight)
}

// ---------------------------------------------------------------------------
// leaf builders
// ---------------------------------------------------------------------------

/// Per-position posteriors `P(x | side_k)` for an observed side sequence.
///
/// A side symbol with zero marginal probability is an impossible observation
/// and reports the offending position.
pub fn posterior_leaves(joint: &PairJoint, sides: &[usize]) -> Result<Vec<ProbPair>> {
    if joint.x_card != 2 {
        return Err(Error::invalid(format!(
            "posterior leaves: X must be binary (got |X| = {})",
            joint.x_card
        )));
    }
    sides
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            if s >= joint.s_card {
                return Err(Error::invalid(format!(
                    "posterior leaves: side symbol {s} ≥ |S| = {}",
                    joint.s_card
                )));
            }
            ProbPair::new(joint.p(0, s), joint.p(1, s))
                .map_err(|_| Error::ZeroProbability { index: k })
        })
        .collect()
}

/// `n` copies of the prior of a binary marginal — the encoder-side leaves,
/// which never see a channel output.
pub fn prior_leaves(p_x: &Pmf, n: usize) -> Result<Vec<ProbPair>> {
    if p_x.len() != 2 {
        return Err(Error::invalid(format!(
            "prior leaves: X must be binary (got |X| = {})",
            p_x.len()
        )));
    }
    let pair = ProbPair::new(p_x.p(0), p_x.p(1))?;
    Ok(vec![pair; n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitchan::{mc_entropy_profile, select_sets, Feed};
    use crate::polar::transform;
    use crate::probability::WiretapChannel;
    use crate::rng::{Domain, Streams};

    fn bsc_xy(flip: f64) -> PairJoint {
        PairJoint::new(
            2,
            2,
            vec![
                0.5 * (1.0 - flip),
                0.5 * flip,
                0.5 * flip,
                0.5 * (1.0 - flip),
            ],
        )
        .unwrap()
    }

    #[test]
    fn frozen_map_rules() {
        let mut map = FrozenMap::free(4);
        map.set_values(&[0, 2], &[1, 0]).unwrap();
        map.set_sampled(&[3]).unwrap();
        assert_eq!(map.rule(0), Some(FrozenRule::Value(1)));
        assert_eq!(map.rule(1), None);
        assert_eq!(map.rule(3), Some(FrozenRule::Sample));
        // Double assignment and out-of-range rejected.
        assert!(map.set_sampled(&[0]).is_err());
        assert!(map.set_values(&[4], &[0]).is_err());
        assert!(FrozenMap::from_values(2, &[0], &[2]).is_err());
    }

    #[test]
    fn noiseless_decode_recovers_any_frozen_subset() {
        let streams = Streams::new(3);
        let mut rng = streams.stream(Domain::Sampling, 0);
        for n in [1usize, 2, 8, 32] {
            for _ in 0..20 {
                let x: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
                let v = transform(&BitBlock::new(x.clone()).unwrap()).unwrap();
                let leaves: Vec<ProbPair> =
                    x.iter().map(|&b| ProbPair::certain(b)).collect();
                // Freeze a random subset with true values.
                let positions: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
                let bits: Vec<u8> = positions.iter().map(|&i| v[i]).collect();
                let frozen = FrozenMap::from_values(n, &positions, &bits).unwrap();
                let decoded = sc_decode(&leaves, &frozen).unwrap();
                assert_eq!(decoded.bits(), v.bits());
            }
        }
    }

    /// Enumerated dual-route block-error oracle: running the decoder must
    /// fail exactly when some free position's conditional argmax along the
    /// *true* path disagrees with the true bit.
    #[test]
    fn decoder_errors_match_true_path_argmax_oracle() {
        for n in [4usize, 8] {
            let joint = bsc_xy(0.11);
            // Partition from the exact profile at a mid threshold.
            let profile = crate::bitchan::exact_entropy_profile(&joint, n).unwrap();
            let parts = select_sets(&profile, 0.3).unwrap();
            let frozen_pos: Vec<usize> = {
                let mut v: Vec<usize> = parts.r.iter().chain(&parts.i).copied().collect();
                v.sort_unstable();
                v
            };
            let mut engine = ScEngine::new();
            let mut block_err = 0.0;
            let mut total = 0.0;
            for x in 0u32..(1 << n) {
                let xbits: Vec<u8> = (0..n).map(|k| ((x >> k) & 1) as u8).collect();
                let v = transform(&BitBlock::new(xbits.clone()).unwrap()).unwrap();
                for y in 0u32..(1 << n) {
                    let ybits: Vec<usize> = (0..n).map(|k| ((y >> k) & 1) as usize).collect();
                    let mut p = 1.0;
                    for k in 0..n {
                        p *= joint.p(xbits[k] as usize, ybits[k]);
                    }
                    if p == 0.0 {
                        continue;
                    }
                    total += p;
                    let leaves = posterior_leaves(&joint, &ybits).unwrap();
                    let bits: Vec<u8> = frozen_pos.iter().map(|&i| v[i]).collect();
                    let frozen = FrozenMap::from_values(n, &frozen_pos, &bits).unwrap();
                    decode_into(&mut engine, &leaves, &frozen).unwrap();
                    let decoder_failed = engine.u() != v.bits();

                    // Independent route: true-value feed, inspect argmax at
                    // free positions along the true path.
                    let mut probe = ScEngine::new();
                    probe.pass(&leaves, &mut Feed::new(v.bits())).unwrap();
                    let oracle_failed = parts
                        .d
                        .iter()
                        .any(|&i| probe.pairs()[i].argmax() != v[i]);

                    assert_eq!(
                        decoder_failed, oracle_failed,
                        "n={n} x={x:b} y={y:b}: decoder and oracle disagree"
                    );
                    if decoder_failed {
                        block_err += p;
                    }
                }
            }
            assert!((total - 1.0).abs() < 1e-9);
            assert!(block_err < 0.5, "oracle block error unexpectedly large");
        }
    }

    #[test]
    fn mid_size_decoding_error_rate_is_small() {
        // Uniform input over a mildly noisy binary symmetric observation;
        // retained set from a seeded Monte Carlo profile.
        let l = 256;
        let joint = bsc_xy(0.02);
        let profile = mc_entropy_profile(&joint, l, 4000, 11).unwrap();
        let parts = select_sets(&profile, 0.01).unwrap();
        let frozen_pos: Vec<usize> = {
            let mut v: Vec<usize> = parts.r.iter().chain(&parts.i).copied().collect();
            v.sort_unstable();
            v
        };
        assert!(!parts.d.is_empty(), "no decodable positions at this size");

        let model = WiretapChannel::bsc_cascade(0.02, 0.25, crate::probability::Pmf::uniform(2))
            .unwrap()
            .source();
        let streams = Streams::new(99);
        let mut engine = ScEngine::new();
        let mut errors = 0u32;
        for trial in 0..200u64 {
            let mut rng = streams.stream(Domain::Sampling, trial);
            let sample = model.sample(l, &mut rng);
            let v = transform(&BitBlock::new(
                sample.x.iter().map(|&b| b as u8).collect(),
            )
            .unwrap())
            .unwrap();
            let leaves = posterior_leaves(&joint, &sample.y).unwrap();
            let bits: Vec<u8> = frozen_pos.iter().map(|&i| v[i]).collect();
            let frozen = FrozenMap::from_values(l, &frozen_pos, &bits).unwrap();
            decode_into(&mut engine, &leaves, &frozen).unwrap();
            if engine.u() != v.bits() {
                errors += 1;
            }
        }
        assert!(
            errors <= 10,
            "block error rate {}/200 exceeds 5%",
            errors
        );
    }

    #[test]
    fn simulation_conditionals_and_determinism() {
        let uniform = Pmf::uniform(2);
        let leaves = prior_leaves(&uniform, 4).unwrap();
        let mut frozen = FrozenMap::free(4);
        frozen.set_sampled(&[0, 1, 2, 3]).unwrap();

        // Uniform source: every conditional along any path is exactly a fair
        // coin, and seeded runs reproduce.
        let streams = Streams::new(21);
        let mut engine = ScEngine::new();
        let mut rng = streams.stream(Domain::InnerBlock, 0);
        simulate_into(&mut engine, &leaves, &frozen, &mut rng).unwrap();
        let first: Vec<u8> = engine.u().to_vec();
        for pair in engine.pairs() {
            assert_eq!(pair.p1(), 0.5);
        }
        let mut rng = streams.stream(Domain::InnerBlock, 0);
        simulate_into(&mut engine, &leaves, &frozen, &mut rng).unwrap();
        assert_eq!(engine.u(), first.as_slice());

        // x = transform(u) inside the same pass.
        let x = transform(&BitBlock::new(first.clone()).unwrap()).unwrap();
        assert_eq!(engine.x(), x.bits());

        // Degenerate source: all bits forced, sampled block is the constant
        // block's transform.
        let ones = Pmf::point(2, 1);
        let leaves = prior_leaves(&ones, 4).unwrap();
        let mut rng = streams.stream(Domain::InnerBlock, 1);
        simulate_into(&mut engine, &leaves, &frozen, &mut rng).unwrap();
        assert_eq!(engine.x(), &[1, 1, 1, 1]);
        let v = transform(&BitBlock::new(vec![1, 1, 1, 1]).unwrap()).unwrap();
        assert_eq!(engine.u(), v.bits());
    }

    #[test]
    fn simulate_requires_full_coverage_and_decode_rejects_sample() {
        let leaves = prior_leaves(&Pmf::uniform(2), 2).unwrap();
        let mut engine = ScEngine::new();
        // One position has no rule.
        let mut partial = FrozenMap::free(2);
        partial.set_sampled(&[0]).unwrap();
        let streams = Streams::new(0);
        let mut rng = streams.stream(Domain::InnerBlock, 0);
        assert!(simulate_into(&mut engine, &leaves, &partial, &mut rng).is_err());
        // Decode over a sampling rule is meaningless.
        assert!(decode_into(&mut engine, &leaves, &partial).is_err());
    }

    #[test]
    fn replay_weight_is_sampling_probability() {
        // Uniform source, all positions sampled: every forced assignment has
        // weight 2^-n.
        let n = 8;
        let leaves = prior_leaves(&Pmf::uniform(2), n).unwrap();
        let mut frozen = FrozenMap::free(n);
        frozen.set_sampled(&(0..n).collect::<Vec<_>>()).unwrap();
        let mut engine = ScEngine::new();
        let forced = vec![1u8, 0, 0, 1, 1, 1, 0, 0];
        let w = replay_into(&mut engine, &leaves, &frozen, &forced).unwrap();
        assert!((w - 2f64.powi(-(n as i32))).abs() < 1e-15);
        assert_eq!(engine.u(), forced.as_slice());

        // Pinning half the positions halves the number of sampled factors.
        let mut frozen = FrozenMap::free(n);
        frozen
            .set_values(&[0, 1, 2, 3], &forced[..4].to_vec())
            .unwrap();
        frozen.set_sampled(&[4, 5, 6, 7]).unwrap();
        let w = replay_into(&mut engine, &leaves, &frozen, &forced).unwrap();
        assert!((w - 2f64.powi(-4)).abs() < 1e-15);

        // Biased source at n=1: the weight is the prior itself.
        let biased = Pmf::new(vec![0.3, 0.7]).unwrap();
        let leaves = prior_leaves(&biased, 1).unwrap();
        let mut frozen = FrozenMap::free(1);
        frozen.set_sampled(&[0]).unwrap();
        let w = replay_into(&mut engine, &leaves, &frozen, &[1]).unwrap();
        assert!((w - 0.7).abs() < 1e-15);
    }

    #[test]
    fn replay_weights_sum_to_one_over_all_assignments() {
        // For a biased source with pinned positions, the replay weights over
        // all sampled-bit assignments form a conditional distribution.
        let n = 4;
        let leaves = prior_leaves(&Pmf::new(vec![0.3, 0.7]).unwrap(), n).unwrap();
        let mut frozen = FrozenMap::free(n);
        frozen.set_values(&[1], &[1]).unwrap();
        frozen.set_sampled(&[0, 2, 3]).unwrap();
        let mut engine = ScEngine::new();
        let mut total = 0.0;
        for a in 0u32..8 {
            let mut forced = vec![0u8; n];
            forced[1] = 1;
            for (r, &pos) in [0usize, 2, 3].iter().enumerate() {
                forced[pos] = ((a >> r) & 1) as u8;
            }
            total += replay_into(&mut engine, &leaves, &frozen, &forced).unwrap();
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn posterior_leaves_validate_and_signal_impossible_sides() {
        let joint = bsc_xy(0.1);
        let leaves = posterior_leaves(&joint, &[0, 1]).unwrap();
        assert!((leaves[0].p0() - 0.9).abs() < 1e-12);
        assert!((leaves[1].p1() - 0.9).abs() < 1e-12);
        assert!(posterior_leaves(&joint, &[2]).is_err());

        // An impossible side symbol reports its position.
        let half = PairJoint::new(2, 2, vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        match posterior_leaves(&half, &[0, 1]) {
            Err(Error::ZeroProbability { index }) => assert_eq!(index, 1),
            other => panic!("expected zero-probability error, got {other:?}"),
        }
    }
}
