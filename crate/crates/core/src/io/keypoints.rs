use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::diff::Tensor;
use crate::error::{Error, Result};
use crate::skeleton::{SkeletonSequence, WHOLEBODY_COUNT};

/// One detected person in one frame.
#[derive(Debug, Deserialize)]
struct Record {
    frame: usize,
    person: u64,
    keypoints: Vec<Vec<f64>>,
}

/// Reads line-delimited JSON keypoint records, one per frame per person:
///
/// ```text
/// {"frame": 0, "person": 3, "keypoints": [[x, y, c], ... 133 triples]}
/// ```
///
/// Persons missing from a frame get zeros with confidence 0. When more than
/// `persons` people appear, those with the highest mean confidence are kept.
/// Output persons are ordered by id and zero-padded to exactly `persons`.
pub fn parse_keypoint_jsonl(text: &str, persons: usize, label: Option<usize>) -> Result<SkeletonSequence> {
    if persons == 0 {
        return Err(Error::config("person count must be positive"));
    }
    let joints = WHOLEBODY_COUNT;
    let mut tracks: BTreeMap<u64, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    let mut offset = 0;
    for (n, line) in text.split_inclusive('\n').enumerate() {
        let start = offset;
        offset += line.len();
        let body = line.trim();
        if body.is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(body).map_err(|e| Error::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        if rec.keypoints.len() != joints {
            return Err(Error::Format {
                offset: start,
                message: format!(
                    "line {}: expected {joints} keypoints, found {}",
                    n + 1,
                    rec.keypoints.len()
                ),
            });
        }
        if let Some(k) = rec.keypoints.iter().position(|p| p.len() != 3) {
            return Err(Error::Format {
                offset: start,
                message: format!("line {}: keypoint {k} is not an (x, y, confidence) triple", n + 1),
            });
        }
        let flat: Vec<f64> = rec.keypoints.into_iter().flatten().collect();
        if tracks.entry(rec.person).or_default().insert(rec.frame, flat).is_some() {
            return Err(Error::Format {
                offset: start,
                message: format!("line {}: person {} repeated in frame {}", n + 1, rec.person, rec.frame),
            });
        }
    }
    let frames = tracks
        .values()
        .flat_map(|t| t.keys())
        .max()
        .map(|&f| f + 1)
        .ok_or_else(|| Error::InsufficientData("no keypoint records".into()))?;

    let mean_conf = |t: &BTreeMap<usize, Vec<f64>>| {
        t.values()
            .flat_map(|p| p.chunks(3).map(|k| k[2]))
            .sum::<f64>()
            / (frames * joints) as f64
    };
    let mut ranked: Vec<(u64, f64)> = tracks.iter().map(|(&id, t)| (id, mean_conf(t))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut kept: Vec<u64> = ranked.into_iter().take(persons).map(|(id, _)| id).collect();
    kept.sort_unstable();

    let mut data = vec![0.0; persons * joints * frames * 3];
    for (i, id) in kept.iter().enumerate() {
        for (&t, flat) in &tracks[id] {
            for j in 0..joints {
                let dst = ((i * joints + j) * frames + t) * 3;
                data[dst..dst + 3].copy_from_slice(&flat[j * 3..j * 3 + 3]);
            }
        }
    }
    SkeletonSequence::new(
        "wholebody",
        Tensor::new(&[persons, joints, frames, 3], data)?,
        label,
    )
}

pub fn import_keypoint_json(
    path: impl AsRef<Path>,
    persons: usize,
    label: Option<usize>,
) -> Result<SkeletonSequence> {
    parse_keypoint_jsonl(&std::fs::read_to_string(path)?, persons, label)
}
