//! Seeded, splittable random streams.
//!
//! Every stochastic routine derives its generator from a 64-bit master seed,
//! a purpose tag and an index (usually a pixel index). Streams are
//! independent of the order in which they are created, so per-pixel work can
//! be spread over any number of threads without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A master seed from which labelled sub-streams are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

impl Seed {
    /// Child seed for a named purpose. Different tags give unrelated streams.
    pub fn derive(self, tag: &str) -> Seed {
        let mut h = mix(self.0);
        for b in tag.bytes() {
            h = mix(h ^ u64::from(b));
        }
        Seed(h)
    }

    /// Child seed for an integer index (iteration number, trial number, ...).
    pub fn child(self, index: u64) -> Seed {
        Seed(mix(self.0 ^ mix(index.wrapping_add(0x5851_F42D_4C95_7F2D))))
    }

    /// Generator for stream `index` under this seed.
    pub fn stream(self, index: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(index);
        rng
    }

    pub fn rng(self) -> StreamRng {
        self.stream(0)
    }
}
