use rand::Rng;

use crate::diff::Tensor;
use crate::error::{Error, Result};
use crate::skeleton::SkeletonSequence;

/// Bounds `[start, end)` of split `i` when `frames` are cut into `splits`
/// equal-width pieces.
pub fn split_bounds(frames: usize, splits: usize, i: usize) -> (usize, usize) {
    (i * frames / splits, (i + 1) * frames / splits)
}

/// Frame indices drawn one per uniform split. Splits narrower than a frame
/// (short sequences) reuse the frame they start in.
pub fn uniform_indices(frames: usize, target: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..target)
        .map(|i| {
            let (start, end) = split_bounds(frames, target, i);
            if end > start {
                rng.gen_range(start..end)
            } else {
                start.min(frames - 1)
            }
        })
        .collect()
}

/// Temporal resampling to exactly `target` frames, applied identically to
/// every person.
pub fn uniform_sample(
    seq: &SkeletonSequence,
    target: usize,
    rng: &mut impl Rng,
) -> Result<SkeletonSequence> {
    if seq.frames() == 0 || target == 0 {
        return Err(Error::InsufficientData("cannot sample zero frames".into()));
    }
    let idx = uniform_indices(seq.frames(), target, rng);
    let (persons, joints, c) = (seq.persons(), seq.joints(), seq.channels());
    let mut data = Vec::with_capacity(persons * joints * target * c);
    for i in 0..persons {
        for j in 0..joints {
            for &t in &idx {
                data.extend_from_slice(seq.point(i, j, t));
            }
        }
    }
    SkeletonSequence::new(
        seq.layout_id(),
        Tensor::new(&[persons, joints, target, c], data)?,
        seq.label(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ten_to_five_picks_one_per_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let idx = uniform_indices(10, 5, &mut rng);
            for (i, &t) in idx.iter().enumerate() {
                assert!(t == 2 * i || t == 2 * i + 1, "{idx:?}");
            }
        }
    }

    #[test]
    fn equal_length_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(uniform_indices(7, 7, &mut rng), (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn short_sequences_repeat_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let idx = uniform_indices(3, 8, &mut rng);
        assert_eq!(idx.len(), 8);
        assert!(idx.windows(2).all(|w| w[0] <= w[1]));
        assert!(idx.iter().all(|&t| t < 3));
    }

    #[test]
    fn seeded_selection_is_reproducible() {
        let a = uniform_indices(100, 16, &mut ChaCha8Rng::seed_from_u64(9));
        let b = uniform_indices(100, 16, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }
}
