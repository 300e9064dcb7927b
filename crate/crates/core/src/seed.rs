//! Seed derivation.
//!
//! Every random decision flows from one master seed. Components draw from
//! their own ChaCha stream, selected by a fixed label, so changing how often
//! one component consumes randomness never perturbs another.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Labels of the independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Stream {
    MazeGeneration = 1,
    Carving = 2,
    QPolicy = 3,
    RbqlPolicy = 4,
    BenchMaze = 5,
    BenchAgent = 6,
}

/// A generator for `stream`, further split by two indices (e.g. maze size and
/// maze id). Indices are packed into the 64-bit ChaCha stream id.
pub fn stream_rng(seed: u64, stream: Stream, major: u32, minor: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = ((stream as u64) << 56) | ((major as u64 & 0x00ff_ffff) << 32) | minor as u64;
    rng.set_stream(id);
    rng
}

/// Derives a child seed; used when a whole sub-run needs its own seed value.
pub fn derive_seed(seed: u64, stream: Stream, major: u32, minor: u32) -> u64 {
    stream_rng(seed, stream, major, minor).next_u64()
}
