//! Stable hashing for deriving per-request seeds and noise draws.
//!
//! `std`'s default hasher is not guaranteed stable across releases, so
//! seeds that end up in output files are derived with FNV-1a + splitmix64.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Combines a base seed with a sequence of string parts.
pub fn derive(seed: u64, parts: &[&str]) -> u64 {
    parts.iter().fold(splitmix64(seed), |acc, part| {
        let mut bytes = acc.to_le_bytes().to_vec();
        bytes.extend_from_slice(part.as_bytes());
        splitmix64(fnv1a(&bytes))
    })
}

/// Uniform draw in [0, 1) from a derived seed.
pub fn unit(seed: u64, parts: &[&str]) -> f64 {
    (derive(seed, parts) >> 11) as f64 / (1u64 << 53) as f64
}
