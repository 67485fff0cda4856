//! Independent random streams keyed by (master seed, purpose, scenario, replication).

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type SimRng = ChaCha12Rng;

/// What a stream is used for; distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamPurpose {
    SuperPopulation = 1,
    Trial = 2,
    CrossValidation = 3,
    Calibration = 4,
}

/// ChaCha stream for one work unit.
///
/// The key is derived from `master_seed`; the 64-bit stream id packs the
/// purpose (8 bits), scenario id (24 bits) and replication index (32 bits),
/// so the numbers drawn depend only on these four values.
pub fn stream(master_seed: u64, purpose: StreamPurpose, scenario_id: u32, replication: u32) -> SimRng {
    let mut rng = SimRng::seed_from_u64(master_seed);
    let id = ((purpose as u64) << 56) | ((u64::from(scenario_id) & 0x00FF_FFFF) << 32) | u64::from(replication);
    rng.set_stream(id);
    rng
}
