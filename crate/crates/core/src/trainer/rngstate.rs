use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

/// Exact position of a ChaCha stream, enough to resume it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }

    /// Packs the state into 32-bit words: 8 seed, 2 stream, 4 position.
    pub fn to_words(&self) -> [u32; 14] {
        let mut w = [0u32; 14];
        for (i, c) in self.seed.chunks(4).enumerate() {
            w[i] = u32::from_le_bytes(c.try_into().unwrap());
        }
        w[8] = self.stream as u32;
        w[9] = (self.stream >> 32) as u32;
        for i in 0..4 {
            w[10 + i] = (self.word_pos >> (32 * i)) as u32;
        }
        w
    }

    pub fn from_words(w: &[u32; 14]) -> Self {
        let mut seed = [0u8; 32];
        for i in 0..8 {
            seed[4 * i..4 * i + 4].copy_from_slice(&w[i].to_le_bytes());
        }
        let stream = w[8] as u64 | (w[9] as u64) << 32;
        let word_pos = (0..4).fold(0u128, |acc, i| acc | (w[10 + i] as u128) << (32 * i));
        RngState { seed, stream, word_pos }
    }
}

/// A ChaCha stream derived from the run seed; distinct `stream`s are
/// independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
