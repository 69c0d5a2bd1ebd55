//! Synthetic training data whose labels are readable from the features.

use dualdrive_core::encoder::{EncoderConfig, TrainingRecord, INTENTS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Steering takes one of these evenly spaced values in [-1, 1].
pub const STEER_CLASSES: usize = 11;
const BRAKE_CHANNEL: usize = STEER_CLASSES;
const DISTRACTORS: usize = 24;

/// Smallest grid width the layout fits in.
pub const MIN_CHANNELS: usize = STEER_CLASSES + 2 + 1;

/// Records with steering one-hot in the first channels and a braking flag
/// after it, repeated on every row over low uniform noise. The last
/// channels carry per-record random distractors of comparable magnitude,
/// so an untrained encoder retrieves poorly on steering. Intent and speed
/// are random.
pub fn separable(n: usize, seed: u64, cfg: &EncoderConfig) -> Vec<TrainingRecord> {
    assert!(cfg.grid_c >= MIN_CHANNELS, "grid needs at least {MIN_CHANNELS} channels");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first_distractor = (BRAKE_CHANNEL + 2).max(cfg.grid_c.saturating_sub(DISTRACTORS));
    (0..n)
        .map(|_| {
            let class = rng.random_range(0..STEER_CLASSES);
            let braking = rng.random_bool(0.5);
            let distract: Vec<f64> = (first_distractor..cfg.grid_c).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut features = vec![0.0; cfg.grid_n * cfg.grid_c];
            for row in features.chunks_mut(cfg.grid_c) {
                for v in row.iter_mut() {
                    *v = rng.random_range(0.0..0.1);
                }
                row[class] = 1.0;
                row[BRAKE_CHANNEL + braking as usize] = 1.0;
                row[first_distractor..].copy_from_slice(&distract);
            }
            TrainingRecord {
                features,
                intent: rng.random_range(0..INTENTS as u8),
                speed: rng.random_range(0.0..15.0),
                steer: -1.0 + 2.0 * class as f64 / (STEER_CLASSES - 1) as f64,
                brake: if braking { rng.random_range(0.3..1.0) } else { 0.0 },
            }
        })
        .collect()
}
