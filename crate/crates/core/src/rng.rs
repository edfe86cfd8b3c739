use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams derived from one scenario seed. Each component
/// gets its own ChaCha stream so adding draws in one place never perturbs
/// another.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Mobility = 1,
    Blockers = 2,
    SweepPhase = 3,
    ScanStart = 4,
}

pub(crate) fn stream(seed: u64, component_seed: u64, which: Stream) -> ChaCha8Rng {
    // splitmix64 finalizer to decorrelate nearby seeds
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(component_seed.rotate_left(29));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    let mut rng = ChaCha8Rng::seed_from_u64(z);
    rng.set_stream(which as u64);
    rng
}
