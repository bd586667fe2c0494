//! Keypoint statistics and the 133 → 65 point selection.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::diff::Tensor;
use crate::error::{Error, Result};
use crate::skeleton::{KeypointLayout, Region, SkeletonSequence, FACE_RANGE, WHOLEBODY_COUNT};

/// Area scale ε per region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AreaScale {
    pub body: f64,
    pub face: f64,
    pub hand: f64,
    pub foot: f64,
}

impl Default for AreaScale {
    fn default() -> Self {
        AreaScale {
            body: 1.0,
            face: 0.2,
            hand: 0.15,
            foot: 0.15,
        }
    }
}

impl AreaScale {
    pub fn of(&self, region: Region) -> f64 {
        match region {
            Region::Body => self.body,
            Region::Face => self.face,
            Region::LeftHand | Region::RightHand => self.hand,
            Region::LeftFoot | Region::RightFoot => self.foot,
        }
    }

    /// Multiplies every coefficient by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        AreaScale {
            body: self.body * alpha,
            face: self.face * alpha,
            hand: self.hand * alpha,
            foot: self.foot * alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    /// Inclusive whole-body index ranges to drop.
    pub drop_ranges: Vec<(usize, usize)>,
    pub area_scale: AreaScale,
    /// Quantile at or above which a video variance counts as high.
    pub video_quantile: f64,
    /// Quantile at or below which a motion variance counts as low.
    pub motion_quantile: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            drop_ranges: vec![FACE_RANGE],
            area_scale: AreaScale::default(),
            video_quantile: 0.5,
            motion_quantile: 0.5,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        for &(a, b) in &self.drop_ranges {
            if a > b || b >= WHOLEBODY_COUNT {
                return Err(Error::config(format!(
                    "drop range [{a}, {b}] must be ordered and within [0, {}]",
                    WHOLEBODY_COUNT - 1
                )));
            }
        }
        let e = self.area_scale;
        if [e.body, e.face, e.hand, e.foot]
            .iter()
            .any(|&v| !(v > 0.0 && v.is_finite()))
        {
            return Err(Error::config("area scale coefficients must be positive"));
        }
        if !(0.0..=1.0).contains(&self.video_quantile) || !(0.0..=1.0).contains(&self.motion_quantile)
        {
            return Err(Error::config("quantile thresholds must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Whole-body indices that survive the drop ranges, in order.
    pub fn kept_indices(&self) -> Vec<usize> {
        (0..WHOLEBODY_COUNT)
            .filter(|i| !self.drop_ranges.iter().any(|&(a, b)| (a..=b).contains(i)))
            .collect()
    }

    /// Configuration for one of the named keypoint protocols.
    pub fn protocol(p: Protocol) -> Self {
        SelectionConfig {
            drop_ranges: p.drop_ranges(),
            ..Self::default()
        }
    }
}

/// Named keypoint subsets of the whole-body layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Wholebody,
    WoFace,
    WoFeet,
    SimpleFingers,
    WoHands,
}

const LEFT_HAND: RangeInclusive<usize> = 91..=111;
const RIGHT_HAND: RangeInclusive<usize> = 112..=132;

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::Wholebody,
        Protocol::WoFace,
        Protocol::WoFeet,
        Protocol::SimpleFingers,
        Protocol::WoHands,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Wholebody => "wholebody",
            Protocol::WoFace => "wo-face",
            Protocol::WoFeet => "wo-feet",
            Protocol::SimpleFingers => "simple-fingers",
            Protocol::WoHands => "wo-hands",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown protocol '{s}'; expected one of {}",
                    Self::ALL.map(|p| p.name()).join(", ")
                ))
            })
    }

    /// Layout id of the selected output.
    pub fn layout_id(self) -> &'static str {
        match self {
            Protocol::Wholebody => "wholebody",
            Protocol::WoFace => "expressive",
            p => p.name(),
        }
    }

    pub fn keypoint_count(self) -> usize {
        match self {
            Protocol::Wholebody => 133,
            Protocol::WoFace => 65,
            Protocol::WoFeet => 59,
            Protocol::SimpleFingers => 35,
            Protocol::WoHands => 23,
        }
    }

    fn drop_ranges(self) -> Vec<(usize, usize)> {
        let face = FACE_RANGE;
        match self {
            Protocol::Wholebody => vec![],
            Protocol::WoFace => vec![face],
            Protocol::WoFeet => vec![(17, 22), face],
            Protocol::SimpleFingers => {
                // keep the wrist root and the tip of each finger
                let mut r = vec![face];
                for hand in [LEFT_HAND, RIGHT_HAND] {
                    let root = *hand.start();
                    r.extend((0..5).map(|f| (root + 1 + 4 * f, root + 3 + 4 * f)));
                }
                r
            }
            Protocol::WoHands => vec![face, (91, 132)],
        }
    }
}

/// Per-keypoint statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeypointStats {
    pub video_variance: Vec<f64>,
    pub motion_variance: Vec<f64>,
}

/// Whether a keypoint observation counts: confidence must be non-zero when
/// present.
fn visible(p: &[f64]) -> bool {
    p.len() < 3 || p[2] != 0.0
}

fn non_empty_persons(seq: &SkeletonSequence) -> Vec<usize> {
    (0..seq.persons())
        .filter(|&i| {
            (0..seq.joints()).any(|j| (0..seq.frames()).any(|t| seq.point(i, j, t).iter().any(|&v| v != 0.0)))
        })
        .collect()
}

fn check_dataset(dataset: &[SkeletonSequence], min_videos: usize) -> Result<usize> {
    if dataset.len() < min_videos {
        return Err(Error::InsufficientData(format!(
            "need at least {min_videos} videos, got {}",
            dataset.len()
        )));
    }
    let j = dataset[0].joints();
    if let Some((s, v)) = dataset.iter().enumerate().find(|(_, v)| v.joints() != j) {
        return Err(Error::Layout(format!(
            "video {s} has {} keypoints, video 0 has {j}",
            v.joints()
        )));
    }
    if dataset.iter().any(|v| v.channels() < 2) {
        return Err(Error::shape("keypoint statistics need (x, y) channels"));
    }
    Ok(j)
}

/// Mean position of keypoint `j` over the visible frames of every non-empty
/// person, or `None` when it is never visible.
fn mean_position(seq: &SkeletonSequence, persons: &[usize], j: usize) -> Option<[f64; 2]> {
    let (mut sum, mut n) = ([0.0; 2], 0usize);
    for &i in persons {
        for t in 0..seq.frames() {
            let p = seq.point(i, j, t);
            if visible(p) {
                sum[0] += p[0];
                sum[1] += p[1];
                n += 1;
            }
        }
    }
    (n > 0).then(|| [sum[0] / n as f64, sum[1] / n as f64])
}

/// Cross-video variance of each keypoint's mean position, summed over the
/// coordinate axes.
pub fn video_variance(dataset: &[SkeletonSequence]) -> Result<Vec<f64>> {
    let joints = check_dataset(dataset, 2)?;
    let persons: Vec<Vec<usize>> = dataset.iter().map(non_empty_persons).collect();
    Ok((0..joints)
        .map(|j| {
            let means: Vec<[f64; 2]> = dataset
                .iter()
                .zip(&persons)
                .filter_map(|(v, p)| mean_position(v, p, j))
                .collect();
            if means.is_empty() {
                return 0.0;
            }
            let s = means.len() as f64;
            let centre = [
                means.iter().map(|m| m[0]).sum::<f64>() / s,
                means.iter().map(|m| m[1]).sum::<f64>() / s,
            ];
            means
                .iter()
                .map(|m| (m[0] - centre[0]).powi(2) + (m[1] - centre[1]).powi(2))
                .sum::<f64>()
                / s
        })
        .collect())
}

/// Population standard deviation across videos of each keypoint's mean
/// per-frame displacement divided by its region's ε.
pub fn motion_variance(
    dataset: &[SkeletonSequence],
    regions: &[Region],
    scale: &AreaScale,
) -> Result<Vec<f64>> {
    let joints = check_dataset(dataset, 1)?;
    if regions.len() != joints {
        return Err(Error::Layout(format!(
            "{} region labels for {joints} keypoints",
            regions.len()
        )));
    }
    if let Some((s, v)) = dataset.iter().enumerate().find(|(_, v)| v.frames() < 2) {
        return Err(Error::InsufficientData(format!(
            "video {s} has {} frame(s); motion needs at least 2",
            v.frames()
        )));
    }
    let persons: Vec<Vec<usize>> = dataset.iter().map(non_empty_persons).collect();
    Ok((0..joints)
        .map(|j| {
            let eps = scale.of(regions[j]);
            let per_video: Vec<f64> = dataset
                .iter()
                .zip(&persons)
                .filter_map(|(v, ps)| {
                    let (mut sum, mut n) = (0.0, 0usize);
                    for &i in ps {
                        for t in 0..v.frames() - 1 {
                            let (a, b) = (v.point(i, j, t), v.point(i, j, t + 1));
                            if visible(a) && visible(b) {
                                sum += (b[0] - a[0]).hypot(b[1] - a[1]) / eps;
                                n += 1;
                            }
                        }
                    }
                    (n > 0).then(|| sum / n as f64)
                })
                .collect();
            population_std(&per_video)
        })
        .collect())
}

fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Both statistics for a dataset over `layout`.
pub fn keypoint_stats(
    dataset: &[SkeletonSequence],
    layout: &KeypointLayout,
    cfg: &SelectionConfig,
) -> Result<KeypointStats> {
    cfg.validate()?;
    if let Some(v) = dataset.iter().find(|v| v.joints() != layout.count()) {
        return Err(Error::Layout(format!(
            "layout '{}' has {} keypoints, video has {}",
            layout.id(),
            layout.count(),
            v.joints()
        )));
    }
    Ok(KeypointStats {
        video_variance: video_variance(dataset)?,
        motion_variance: motion_variance(dataset, layout.regions(), &cfg.area_scale)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankRow {
    pub index: usize,
    pub name: String,
    pub video_variance: f64,
    pub motion_variance: f64,
    pub high_video: bool,
    pub low_motion: bool,
}

impl RankRow {
    pub fn candidate(&self) -> bool {
        self.high_video && self.low_motion
    }
}

/// Value at quantile `q` of `v` (nearest-rank on the sorted values).
fn quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let idx = ((s.len() - 1) as f64 * q).round() as usize;
    s[idx]
}

/// Keypoints ordered by video variance (descending) then motion variance
/// (ascending). Ties keep input order.
pub fn rank_keypoints(
    stats: &KeypointStats,
    names: &[String],
    cfg: &SelectionConfig,
) -> Result<Vec<RankRow>> {
    let n = stats.video_variance.len();
    if stats.motion_variance.len() != n || names.len() != n {
        return Err(Error::shape(format!(
            "{} video, {} motion statistics and {} names",
            n,
            stats.motion_variance.len(),
            names.len()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let v_cut = quantile(&stats.video_variance, cfg.video_quantile);
    let m_cut = quantile(&stats.motion_variance, cfg.motion_quantile);
    let mut rows: Vec<RankRow> = (0..n)
        .map(|i| RankRow {
            index: i,
            name: names[i].clone(),
            video_variance: stats.video_variance[i],
            motion_variance: stats.motion_variance[i],
            high_video: stats.video_variance[i] >= v_cut,
            low_motion: stats.motion_variance[i] <= m_cut,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.video_variance
            .total_cmp(&a.video_variance)
            .then(a.motion_variance.total_cmp(&b.motion_variance))
    });
    Ok(rows)
}

/// Tab-separated report with a header line.
pub fn format_report(rows: &[RankRow]) -> String {
    let mut out = String::from("rank\tindex\tname\tvideo_variance\tmotion_variance\tcandidate\n");
    for (r, row) in rows.iter().enumerate() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{:.6e}\t{:.6e}\t{}\n",
            r + 1,
            row.index,
            row.name,
            row.video_variance,
            row.motion_variance,
            if row.candidate() { "yes" } else { "no" }
        ));
    }
    out
}

fn gather_joints(seq: &SkeletonSequence, keep: &[usize], layout_id: &str) -> Result<SkeletonSequence> {
    let (persons, frames, c) = (seq.persons(), seq.frames(), seq.channels());
    let mut data = Vec::with_capacity(persons * keep.len() * frames * c);
    for i in 0..persons {
        for &j in keep {
            for t in 0..frames {
                data.extend_from_slice(seq.point(i, j, t));
            }
        }
    }
    SkeletonSequence::new(
        layout_id,
        Tensor::new(&[persons, keep.len(), frames, c], data)?,
        seq.label(),
    )
}

fn require_wholebody(seq: &SkeletonSequence) -> Result<()> {
    if seq.joints() != WHOLEBODY_COUNT {
        return Err(Error::Layout(format!(
            "selection expects {WHOLEBODY_COUNT} whole-body keypoints, got {}",
            seq.joints()
        )));
    }
    Ok(())
}

/// Drops the configured ranges (the face by default) from a whole-body
/// sequence, keeping the order of the remaining points.
pub fn select_expressive(seq: &SkeletonSequence, cfg: &SelectionConfig) -> Result<SkeletonSequence> {
    cfg.validate()?;
    require_wholebody(seq)?;
    let keep = cfg.kept_indices();
    let id = if cfg.drop_ranges == [FACE_RANGE] {
        "expressive"
    } else {
        "custom"
    };
    gather_joints(seq, &keep, id)
}

/// Applies a named protocol.
pub fn select_protocol(seq: &SkeletonSequence, p: Protocol) -> Result<SkeletonSequence> {
    require_wholebody(seq)?;
    gather_joints(seq, &SelectionConfig::protocol(p).kept_indices(), p.layout_id())
}

/// Layout of a protocol's output, edges contracted through dropped points.
pub fn protocol_layout(p: Protocol) -> Result<KeypointLayout> {
    match p {
        Protocol::Wholebody => Ok(KeypointLayout::wholebody()),
        Protocol::WoFace => Ok(KeypointLayout::expressive()),
        _ => KeypointLayout::wholebody()
            .contract(p.layout_id(), &SelectionConfig::protocol(p).kept_indices()),
    }
}

/// Re-inserts zeros at the dropped indices, restoring 133 keypoints.
pub fn pad_to_wholebody(seq: &SkeletonSequence, cfg: &SelectionConfig) -> Result<SkeletonSequence> {
    let keep = cfg.kept_indices();
    if seq.joints() != keep.len() {
        return Err(Error::Layout(format!(
            "selection keeps {} keypoints, sequence has {}",
            keep.len(),
            seq.joints()
        )));
    }
    let (persons, frames, c) = (seq.persons(), seq.frames(), seq.channels());
    let mut out = Tensor::zeros(&[persons, WHOLEBODY_COUNT, frames, c]);
    let block = frames * c;
    let src = seq.data().data();
    let dst = out.data_mut();
    for i in 0..persons {
        for (new, &old) in keep.iter().enumerate() {
            let s = (i * keep.len() + new) * block;
            let d = (i * WHOLEBODY_COUNT + old) * block;
            dst[d..d + block].copy_from_slice(&src[s..s + block]);
        }
    }
    SkeletonSequence::new("wholebody", out, seq.label())
}
