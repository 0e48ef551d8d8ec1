//! Polarization-based secret-key agreement and private channel coding over
//! discrete memoryless wiretap sources.
//!
//! The library implements a two-layer polar construction. An inner transform
//! of length `L` splits each block of source bits into positions that the
//! legitimate receiver can reconstruct from her observations (nearly
//! deterministic given `Y`) and positions that look uniform to her. An outer
//! transform of length `M`, applied per inner level, then concentrates the
//! randomness that is still unpredictable for the eavesdropper (given `Z` and
//! the public helper message) into the extracted key coordinates.
//!
//! Two protocols are built on top of the same code description:
//!
//! * **key agreement** ([`ska`]): Alice observes `X^N`, publishes the inner
//!   complement bits, and both sides extract a shared key that is nearly
//!   uniform and nearly independent of everything the eavesdropper holds;
//! * **private channel coding** ([`pcc`]): the key-agreement map is run in
//!   reverse — message bits are planted into the key coordinates, every other
//!   position is sampled from its model conditional, and the resulting `X^N`
//!   is transmitted over the wiretap channel.
//!
//! Supporting modules: [`probability`] (finite distributions, wiretap
//! channel/source descriptions, channel-class checks), [`polar`] (the GF(2)
//! Kronecker-power transform), [`bitchan`] (exact, Monte Carlo and erasure
//! closed-form bit-channel entropy profiles plus code construction),
//! [`codec`] (successive-cancellation decoding and encoder-side samplers),
//! and [`eval`] (trial harness, exact secrecy enumeration at toy sizes, and
//! polarization diagnostics).

pub mod bitchan;
pub mod codec;
pub mod eval;
pub mod pcc;
pub mod polar;
pub mod probability;
pub mod ska;

mod error;
pub mod rng;

pub use bitchan::{CodeSpec, EntropyProfile, ProbPair, Provenance, SetPartition};
pub use error::{Error, Result};
pub use polar::{BitBlock, BitMatrix};
pub use probability::{MarkovTriple, Pmf, WiretapChannel, WiretapSource};
