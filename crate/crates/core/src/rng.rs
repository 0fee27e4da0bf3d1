//! Counter-based random streams.
//!
//! Every replicate owns one [`RngStream`] addressed by `(seed, stream_id)`.
//! ChaCha is a counter-mode generator with 2^64 independent streams per key,
//! so parallel work never shares state and results do not depend on how
//! replicates are scheduled onto threads.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 32-bit words consumed so far.
    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Uniform on `(0, 1]` with 53 bits of resolution. Never returns 0, which
    /// keeps inverse-survival sampling and `ln u` finite.
    #[inline]
    pub fn uniform_open_closed(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) + 1) as f64 * TWO_POW_M53
    }
}

/// `seed_stream` in the harness vocabulary.
pub fn seed_stream(seed: u64, stream_id: u64) -> RngStream {
    RngStream::new(seed, stream_id)
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
