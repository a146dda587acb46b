//! Deterministic sub-seed derivation for per-cell random streams.
//!
//! Each (participant, day, k) simulation cell gets its own seed derived by a
//! stable byte-level hash, so results do not depend on worker count,
//! scheduling, or iteration order, and any single cell can be replayed in
//! isolation.

/// FNV-1a over the component bytes, then a SplitMix64 finalizer to spread
/// low-entropy inputs (small day indices, similar ids) across the seed space.
pub(crate) fn stream_seed(master: u64, domain: &str, label: &str, index: u64, extra: u64) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

    let mut hash = FNV_OFFSET;
    let mut eat = |bytes: &[u8]| {
        for &byte in bytes {
            hash = (hash ^ u64::from(byte)).wrapping_mul(FNV_PRIME);
        }
        hash = (hash ^ 0xff).wrapping_mul(FNV_PRIME);
    };
    eat(&master.to_le_bytes());
    eat(domain.as_bytes());
    eat(label.as_bytes());
    eat(&index.to_le_bytes());
    eat(&extra.to_le_bytes());

    let mut z = hash.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
