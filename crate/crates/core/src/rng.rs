//! Seeded random substreams. A substream is keyed by the root seed plus a
//! list of labels, so independent units draw from independent generators and
//! adding units never perturbs existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn substream(seed: u64, labels: &[&[u8]]) -> StreamRng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for l in labels {
        h.update((l.len() as u64).to_le_bytes());
        h.update(l);
    }
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

pub fn indexed_substream(seed: u64, domain: &str, index: u64) -> StreamRng {
    substream(seed, &[domain.as_bytes(), &index.to_le_bytes()])
}
