use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// ChaCha8 generator that serializes as `(seed, word position)` so a saved
/// session resumes the exact stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SessionRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl RngCore for SessionRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[derive(Serialize, Deserialize)]
struct RngState {
    seed: u64,
    // u128 does not survive every serde format; split it.
    word_pos_hi: u64,
    word_pos_lo: u64,
}

impl Serialize for SessionRng {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let pos = self.inner.get_word_pos();
        RngState { seed: self.seed, word_pos_hi: (pos >> 64) as u64, word_pos_lo: pos as u64 }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SessionRng {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let st = RngState::deserialize(d)?;
        let mut rng = SessionRng::new(st.seed);
        rng.inner.set_word_pos(((st.word_pos_hi as u128) << 64) | st.word_pos_lo as u128);
        Ok(rng)
    }
}

/// Independent per-purpose seed derived from a session seed (splitmix64).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
