//! Private channel coding: the key-agreement map run in reverse.
//!
//! The encoder places the message at the outer key coordinates, samples the
//! remaining outer bits from the retained-bit conditional model, transforms
//! each level back into retained bits, and then fills every inner block:
//! retained bits pinned, complement bits sampled from the source-prior
//! conditionals. The sampled complement is published and the block transform
//! becomes the channel input. The decoder is the receiver side of key
//! agreement with the message read off instead of a key.

use rand::Rng;

use crate::bitchan::{CodeSpec, ScEngine};
use crate::codec::{prior_leaves, simulate_into, FrozenMap};
use crate::polar::{BitBlock, BitMatrix};
use crate::probability::{PairJoint, Pmf, WiretapChannel};
use crate::{Error, Result};

/// Output of one encoding: channel input, published bits, and the complete
/// transform-domain record (simulated and pinned bits alike) so the run can
/// be replayed or audited.
#[derive(Debug, Clone, PartialEq)]
pub struct PccEncoding {
    /// Channel input sequence of length `n`.
    pub x: BitBlock,
    /// Published complement bits, one row per inner block.
    pub public: BitMatrix,
    /// Outer transform-domain levels (`k × m`); message bits sit at the
    /// outer key coordinates.
    pub outer_u: BitMatrix,
    /// Inner transform-domain blocks (`m × l`); retained bits at `E_K`,
    /// published bits on the complement.
    pub inner_v: BitMatrix,
    /// Number of sampled outer bits whose context fell outside the fitted
    /// model and took the uniform fallback.
    pub fallbacks: usize,
}

/// Everything produced by one encode–transmit–decode run.
#[derive(Debug, Clone, PartialEq)]
pub struct PccTranscript {
    /// Transmitted message of length `J`.
    pub message: BitBlock,
    /// Receiver's guess; `None` when a block decode aborted.
    pub guess: Option<BitBlock>,
    /// Channel input sequence.
    pub x: BitBlock,
    /// Published complement bits.
    pub public: BitMatrix,
    /// Receiver observations.
    pub y: Vec<usize>,
    /// Adversary observations.
    pub z: Vec<usize>,
    /// Uniform-fallback count from the encoder.
    pub fallbacks: usize,
}

impl PccTranscript {
    /// True when the receiver decoded and the guess equals the message.
    pub fn delivered(&self) -> bool {
        self.guess.as_ref() == Some(&self.message)
    }
}

fn encoder_model_of(code: &CodeSpec) -> Result<&crate::bitchan::OuterEncoderModel> {
    code.encoder_model.as_ref().ok_or_else(|| {
        Error::invalid(
            "code has no encoder model in memory; rebuild it from the source before encoding",
        )
    })
}

/// Randomized encoder. `p_x` is the source/channel input marginal the code
/// was built for; the sampled bits follow the code's conditional model so
/// the emitted `(x, public)` pair mimics the key-agreement source statistics.
pub fn pcc_encode<R: Rng>(
    message: &BitBlock,
    code: &CodeSpec,
    p_x: &Pmf,
    rng: &mut R,
) -> Result<PccEncoding> {
    pcc_encode_with_options(message, code, p_x, false, rng)
}

/// As [`pcc_encode`], but the nearly uniform complement bits are pinned to
/// zero (code metadata, nothing to transmit) and the published rows carry
/// only the unpolarized set. Decode by expanding the rows back to full
/// width first ([`crate::ska::expand_public`]).
pub fn pcc_encode_reduced<R: Rng>(
    message: &BitBlock,
    code: &CodeSpec,
    p_x: &Pmf,
    rng: &mut R,
) -> Result<PccEncoding> {
    pcc_encode_with_options(message, code, p_x, true, rng)
}

/// Encoder with the public-reduction choice explicit.
pub fn pcc_encode_with_options<R: Rng>(
    message: &BitBlock,
    code: &CodeSpec,
    p_x: &Pmf,
    reduce_public: bool,
    rng: &mut R,
) -> Result<PccEncoding> {
    if message.len() != code.j_total() {
        return Err(Error::invalid(format!(
            "message has {} bits, code carries J = {}",
            message.len(),
            code.j_total()
        )));
    }
    let model = encoder_model_of(code)?;
    let e_k = code.e_k();
    let comp = code.e_k_complement();
    let k = e_k.len();
    let m = code.m;

    // Outer layer, level by level: pin the message at the key coordinates,
    // sample the rest from the model conditional given each block's realized
    // retained prefix, then transform the level back into retained bits.
    let mut outer_u = BitMatrix::zeros(k, m);
    let mut t = BitMatrix::zeros(k, m);
    let mut trackers = vec![model.tracker(); m];
    let mut fallbacks = 0usize;
    let mut engine = ScEngine::new();
    let mut cursor = 0usize;
    for j in 0..k {
        let mut leaves = Vec::with_capacity(m);
        for tracker in &trackers {
            let (pair, fell_back) = model.leaf_prior(j, tracker.key());
            if fell_back {
                fallbacks += 1;
            }
            leaves.push(pair);
        }
        let f = &code.outer_f[j];
        let msg_bits = &message.bits()[cursor..cursor + f.len()];
        cursor += f.len();
        let mut frozen = FrozenMap::free(m);
        frozen.set_values(f, msg_bits)?;
        let sampled: Vec<usize> = (0..m).filter(|i| f.binary_search(i).is_err()).collect();
        frozen.set_sampled(&sampled)?;
        simulate_into(&mut engine, &leaves, &frozen, rng)?;
        for b in 0..m {
            outer_u.set(j, b, engine.u()[b]);
            t.set(j, b, engine.x()[b]);
        }
        for (b, tracker) in trackers.iter_mut().enumerate() {
            tracker.push(t.row(j)[b]);
        }
    }

    // Inner layer, block by block: retained column pinned, complement
    // sampled from the i.i.d. source-prior conditionals and published. In
    // reduced mode the nearly uniform part of the complement is pinned to
    // zero instead and only the unpolarized bits are published.
    let published: &[usize] = if reduce_public { &code.inner.i } else { &comp };
    let inner_leaves = prior_leaves(p_x, code.l)?;
    let mut inner_v = BitMatrix::zeros(m, code.l);
    let mut public = BitMatrix::zeros(m, published.len());
    let mut x = Vec::with_capacity(code.n());
    for b in 0..m {
        let retained: Vec<u8> = (0..k).map(|j| t.row(j)[b]).collect();
        let mut frozen = FrozenMap::free(code.l);
        frozen.set_values(e_k, &retained)?;
        if reduce_public {
            frozen.set_values(&code.inner.r, &vec![0u8; code.inner.r.len()])?;
            frozen.set_sampled(&code.inner.i)?;
        } else {
            frozen.set_sampled(&comp)?;
        }
        simulate_into(&mut engine, &inner_leaves, &frozen, rng)?;
        for (pos, &bit) in engine.u().iter().enumerate() {
            inner_v.set(b, pos, bit);
        }
        for (r, &pos) in published.iter().enumerate() {
            public.set(b, r, engine.u()[pos]);
        }
        x.extend_from_slice(engine.x());
    }

    Ok(PccEncoding {
        x: BitBlock::new(x)?,
        public,
        outer_u,
        inner_v,
        fallbacks,
    })
}

/// Two-stage decoder: identical machinery to the key-agreement receiver,
/// reading the outer key coordinates as the message guess.
pub fn pcc_decode(
    y: &[usize],
    public: &BitMatrix,
    code: &CodeSpec,
    xy: &PairJoint,
) -> Result<Option<BitBlock>> {
    crate::ska::ska_bob(y, public, code, xy)
}

/// Sends each input bit through one independent channel use.
pub fn transmit<R: Rng>(
    x: &BitBlock,
    w: &WiretapChannel,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    let mut y = Vec::with_capacity(x.len());
    let mut z = Vec::with_capacity(x.len());
    for &bit in x.bits() {
        let (yi, zi) = w.transmit_symbol(bit as usize, rng);
        y.push(yi);
        z.push(zi);
    }
    (y, z)
}

/// Encodes a message, transmits it, and decodes — one full trial.
pub fn pcc_trial<R: Rng>(
    message: &BitBlock,
    code: &CodeSpec,
    w: &WiretapChannel,
    rng: &mut R,
) -> Result<PccTranscript> {
    let enc = pcc_encode(message, code, w.input(), rng)?;
    let (y, z) = transmit(&enc.x, w, rng);
    let guess = pcc_decode(&y, &enc.public, code, &w.source().xy_joint())?;
    Ok(PccTranscript {
        message: message.clone(),
        guess,
        x: enc.x,
        public: enc.public,
        y,
        z,
        fallbacks: enc.fallbacks,
    })
}

/// Draws a uniform message of the code's length.
pub fn uniform_message<R: Rng>(code: &CodeSpec, rng: &mut R) -> BitBlock {
    let bits: Vec<u8> = (0..code.j_total()).map(|_| rng.gen_range(0..2u8)).collect();
    BitBlock::new(bits).expect("random bits are bits")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitchan::{construct_code, ConstructParams, ConstructionMode};
    use crate::polar::{transform, transform_multilevel};
    use crate::rng::{Domain, Streams};

    fn identity_channel() -> WiretapChannel {
        // Y = X noiselessly; Z independent of X.
        let w = vec![
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 0.5, 0.5],
        ];
        WiretapChannel::new(2, 2, Pmf::uniform(2), w).unwrap()
    }

    fn exact_code(l: usize, m: usize, src: &crate::probability::WiretapSource) -> CodeSpec {
        construct_code(
            src,
            "src",
            &ConstructParams {
                l,
                m,
                eps1: 0.1,
                eps2: 0.1,
                mode: ConstructionMode::Exact,
                trials: 0,
                seed: 1,
                keep_profiles: false,
            },
        )
        .unwrap()
    }

    #[test]
    fn every_message_survives_a_noiseless_channel() {
        let w = identity_channel();
        let src = w.source();
        let code = exact_code(4, 2, &src);
        let j = code.j_total();
        assert!(j > 0 && j <= 8);
        let streams = Streams::new(3);
        for msg_val in 0u32..(1 << j.min(4)) {
            let bits: Vec<u8> = (0..j).map(|b| ((msg_val >> b) & 1) as u8).collect();
            let message = BitBlock::new(bits).unwrap();
            for rep in 0..3u64 {
                let mut rng = streams.stream(Domain::Message, (msg_val as u64) * 8 + rep);
                let tr = pcc_trial(&message, &code, &w, &mut rng).unwrap();
                assert!(tr.delivered(), "message {msg_val:#06b} lost (rep {rep})");
            }
        }
    }

    #[test]
    fn record_is_internally_consistent() {
        let w = identity_channel();
        let src = w.source();
        let code = exact_code(4, 4, &src);
        let streams = Streams::new(9);
        let mut rng = streams.stream(Domain::Message, 0);
        let message = uniform_message(&code, &mut rng);
        let enc = pcc_encode(&message, &code, w.input(), &mut rng).unwrap();

        // Outer involution: retained levels are the transform of the u
        // levels, and transforming back recovers u.
        let t = transform_multilevel(&enc.outer_u).unwrap();
        assert_eq!(transform_multilevel(&t).unwrap(), enc.outer_u);

        // Message bits occupy the key coordinates level-major.
        let mut cursor = 0;
        for (j, f) in code.outer_f.iter().enumerate() {
            for &i in f {
                assert_eq!(enc.outer_u.row(j)[i], message[cursor]);
                cursor += 1;
            }
        }

        // Inner blocks: retained column matches t, published bits match the
        // complement, channel input is the blockwise transform.
        for b in 0..code.m {
            for (j, &pos) in code.e_k().iter().enumerate() {
                assert_eq!(enc.inner_v.row(b)[pos], t.row(j)[b]);
            }
            for (r, &pos) in code.e_k_complement().iter().enumerate() {
                assert_eq!(enc.public.row(b)[r], enc.inner_v.row(b)[pos]);
            }
            let x_block = transform(&enc.inner_v.row(b).clone()).unwrap();
            assert_eq!(&enc.x.bits()[b * code.l..(b + 1) * code.l], x_block.bits());
        }
    }

    #[test]
    fn encoding_is_seed_deterministic() {
        let w = WiretapChannel::bsc_cascade(0.05, 0.15, Pmf::uniform(2)).unwrap();
        let src = w.source();
        let code = exact_code(8, 4, &src);
        let streams = Streams::new(21);
        let mut rng = streams.stream(Domain::Message, 0);
        let message = uniform_message(&code, &mut rng);
        let mut r1 = streams.stream(Domain::Sampling, 7);
        let mut r2 = streams.stream(Domain::Sampling, 7);
        let a = pcc_encode(&message, &code, w.input(), &mut r1).unwrap();
        let b = pcc_encode(&message, &code, w.input(), &mut r2).unwrap();
        assert_eq!(a, b);
        let mut r3 = streams.stream(Domain::Sampling, 8);
        let c = pcc_encode(&message, &code, w.input(), &mut r3).unwrap();
        assert_ne!(a.x, c.x, "different randomness should move the codeword");
    }

    #[test]
    fn zero_rate_code_encodes_pure_noise() {
        let mut joint = vec![0.0; 8];
        joint[0] = 0.5;
        joint[7] = 0.5;
        let src = crate::probability::WiretapSource::new(2, 2, 2, joint).unwrap();
        let code = exact_code(4, 2, &src);
        assert_eq!(code.j_total(), 0);
        let streams = Streams::new(2);
        let mut rng = streams.stream(Domain::Message, 0);
        let message = BitBlock::new(Vec::new()).unwrap();
        let enc = pcc_encode(&message, &code, &Pmf::uniform(2), &mut rng).unwrap();
        assert_eq!(enc.x.len(), 8);
        assert_eq!(enc.fallbacks, 0);
    }

    #[test]
    fn wrong_message_length_rejected() {
        let w = identity_channel();
        let code = exact_code(4, 2, &w.source());
        let streams = Streams::new(2);
        let mut rng = streams.stream(Domain::Message, 0);
        let bad = BitBlock::zeros(code.j_total() + 1);
        assert!(pcc_encode(&bad, &code, w.input(), &mut rng).is_err());
    }

    #[test]
    fn transmit_matches_channel_statistics() {
        let w = identity_channel();
        let streams = Streams::new(5);
        let mut rng = streams.stream(Domain::Sampling, 0);
        let x = BitBlock::new(vec![0, 1, 1, 0, 1, 0, 0, 1]).unwrap();
        let (y, _) = transmit(&x, &w, &mut rng);
        let x_as_usize: Vec<usize> = x.bits().iter().map(|&b| b as usize).collect();
        assert_eq!(y, x_as_usize);

        // Flip rates of a cascade within 3 standard errors at 10^5 uses.
        let w = WiretapChannel::bsc_cascade(0.1, 0.2, Pmf::uniform(2)).unwrap();
        let n = 100_000usize;
        let x = BitBlock::zeros(n);
        let mut rng = streams.stream(Domain::Sampling, 1);
        let (y, z) = transmit(&x, &w, &mut rng);
        let y_flips = y.iter().filter(|&&v| v == 1).count() as f64 / n as f64;
        // Z sees Y through a second flip: effective 0.1 ⋆ 0.2 = 0.26.
        let z_flips = z.iter().filter(|&&v| v == 1).count() as f64 / n as f64;
        let se = |p: f64| (p * (1.0 - p) / n as f64).sqrt();
        assert!((y_flips - 0.1).abs() < 3.0 * se(0.1), "y flip rate {y_flips}");
        assert!((z_flips - 0.26).abs() < 3.0 * se(0.26), "z flip rate {z_flips}");
    }

    #[test]
    fn missing_encoder_model_is_reported() {
        let w = identity_channel();
        let code = exact_code(4, 2, &w.source());
        let json = code.to_json_string().unwrap();
        let loaded = CodeSpec::from_json_str(&json).unwrap();
        assert!(loaded.encoder_model.is_none());
        let streams = Streams::new(2);
        let mut rng = streams.stream(Domain::Message, 0);
        let message = BitBlock::zeros(loaded.j_total());
        let err = pcc_encode(&message, &loaded, w.input(), &mut rng).unwrap_err();
        assert!(err.to_string().contains("encoder model"));
    }

    #[test]
    fn reduced_public_round_trips_through_decode() {
        // Erasure pair: the partition has all three inner sets, yet a fully
        // unerased observation decodes exactly.
        let w = WiretapChannel::bec_pair(0.4, 0.6, Pmf::uniform(2)).unwrap();
        let src = w.source();
        let code = exact_code(8, 2, &src);
        assert!(
            !code.inner.r.is_empty(),
            "test needs a nonempty fixed-to-zero set"
        );
        let streams = Streams::new(11);
        let mut rng = streams.stream(Domain::Message, 0);
        let message = uniform_message(&code, &mut rng);
        let enc = pcc_encode_reduced(&message, &code, w.input(), &mut rng).unwrap();
        assert_eq!(enc.public.num_cols(), code.inner.i.len());
        // Pinned bits really are zero in the transform-domain record.
        for b in 0..code.m {
            for &pos in &code.inner.r {
                assert_eq!(enc.inner_v.row(b)[pos], 0);
            }
        }
        // Expanding restores full rows; a noiseless receiver then recovers
        // the message.
        let full = crate::ska::expand_public_matrix(&enc.public, &code).unwrap();
        assert_eq!(
            crate::ska::reduce_public_matrix(&full, &code).unwrap(),
            enc.public
        );
        let y: Vec<usize> = enc.x.bits().iter().map(|&b| b as usize).collect();
        let guess = pcc_decode(&y, &full, &code, &src.xy_joint()).unwrap().unwrap();
        assert_eq!(guess, message);
    }

    #[test]
    fn cascade_delivery_rate_is_high() {
        let w = WiretapChannel::bsc_cascade(0.01, 0.2, Pmf::uniform(2)).unwrap();
        let src = w.source();
        let code = construct_code(
            &src,
            "src",
            &ConstructParams {
                l: 64,
                m: 4,
                eps1: 0.01,
                eps2: 0.1,
                mode: ConstructionMode::Mc,
                trials: 3000,
                seed: 5,
                keep_profiles: false,
            },
        )
        .unwrap();
        assert!(code.j_total() > 0);
        let streams = Streams::new(33);
        let mut delivered = 0;
        for trial in 0..50u64 {
            let mut msg_rng = streams.stream(Domain::Message, trial);
            let message = uniform_message(&code, &mut msg_rng);
            let mut rng = streams.stream(Domain::Sampling, trial);
            let tr = pcc_trial(&message, &code, &w, &mut rng).unwrap();
            if tr.delivered() {
                delivered += 1;
            }
        }
        assert!(delivered >= 45, "only {delivered}/50 messages delivered");
    }
}
