use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WHOLEBODY_COUNT: usize = 133;
pub const EXPRESSIVE_COUNT: usize = 65;

/// Inclusive whole-body index range of the 68 facial points.
pub const FACE_RANGE: (usize, usize) = (23, 90);

const WHOLEBODY_EDGES: &str = include_str!("../../data/wholebody_133.edges");
const EXPRESSIVE_EDGES: &str = include_str!("../../data/expressive_65.edges");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Body,
    Face,
    LeftHand,
    RightHand,
    LeftFoot,
    RightFoot,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::Body => "body",
            Region::Face => "face",
            Region::LeftHand => "left_hand",
            Region::RightHand => "right_hand",
            Region::LeftFoot => "left_foot",
            Region::RightFoot => "right_foot",
        }
    }
}

/// Named keypoints with their body region and an undirected edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointLayout {
    id: String,
    names: Vec<String>,
    regions: Vec<Region>,
    edges: Vec<(usize, usize)>,
}

const BODY_NAMES: [&str; 17] = [
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

const FOOT_NAMES: [&str; 6] = [
    "left_big_toe",
    "left_small_toe",
    "left_heel",
    "right_big_toe",
    "right_small_toe",
    "right_heel",
];

const FINGERS: [&str; 5] = ["thumb", "index", "middle", "ring", "pinky"];

fn hand_names(side: &str) -> Vec<String> {
    let mut out = vec![format!("{side}_hand_root")];
    for f in FINGERS {
        for k in 1..=4 {
            out.push(format!("{side}_{f}{k}"));
        }
    }
    out
}

/// Parses an edge table: one `i j` pair per line, `#` starts a comment.
pub fn parse_edge_table(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: n + 1,
                message: format!("'{s}' is not a joint index"),
            })
        };
        match fields.as_slice() {
            [a, b] => edges.push((parse(a)?, parse(b)?)),
            _ => {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("expected 'i j', got '{line}'"),
                })
            }
        }
    }
    Ok(edges)
}

impl KeypointLayout {
    /// Validates and builds a layout. Edges are stored as given.
    pub fn new(
        id: impl Into<String>,
        names: Vec<String>,
        regions: Vec<Region>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let count = names.len();
        if count == 0 {
            return Err(Error::Layout("layout has no keypoints".into()));
        }
        if regions.len() != count {
            return Err(Error::Layout(format!(
                "{} names but {} region labels",
                count,
                regions.len()
            )));
        }
        let mut seen = HashSet::new();
        for &(a, b) in &edges {
            if a >= count || b >= count {
                return Err(Error::Layout(format!(
                    "edge ({a}, {b}) out of range for {count} keypoints"
                )));
            }
            if a == b {
                return Err(Error::Layout(format!("self-edge on keypoint {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::Layout(format!("duplicate edge ({a}, {b})")));
            }
        }
        Ok(KeypointLayout {
            id: id.into(),
            names,
            regions,
            edges,
        })
    }

    /// Generic layout with numbered names and every point in the body region.
    pub fn custom(id: impl Into<String>, count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        Self::new(
            id,
            (0..count).map(|i| format!("joint_{i}")).collect(),
            vec![Region::Body; count],
            edges,
        )
    }

    /// The 133-point COCO-WholeBody layout.
    pub fn wholebody() -> Self {
        let mut names: Vec<String> = BODY_NAMES.iter().map(|s| s.to_string()).collect();
        let mut regions = vec![Region::Body; 17];
        names.extend(FOOT_NAMES.iter().map(|s| s.to_string()));
        regions.extend([Region::LeftFoot; 3]);
        regions.extend([Region::RightFoot; 3]);
        names.extend((0..68).map(|i| format!("face_{i}")));
        regions.extend([Region::Face; 68]);
        names.extend(hand_names("left"));
        regions.extend([Region::LeftHand; 21]);
        names.extend(hand_names("right"));
        regions.extend([Region::RightHand; 21]);
        let edges = parse_edge_table(WHOLEBODY_EDGES).expect("bundled table parses");
        Self::new("wholebody", names, regions, edges).expect("bundled layout is valid")
    }

    /// The 65-point Expressive layout: whole-body without the face.
    pub fn expressive() -> Self {
        let wb = Self::wholebody();
        let keep: Vec<usize> = (0..WHOLEBODY_COUNT)
            .filter(|i| !(FACE_RANGE.0..=FACE_RANGE.1).contains(i))
            .collect();
        let names = keep.iter().map(|&i| wb.names[i].clone()).collect();
        let regions = keep.iter().map(|&i| wb.regions[i]).collect();
        let edges = parse_edge_table(EXPRESSIVE_EDGES).expect("bundled table parses");
        Self::new("expressive", names, regions, edges).expect("bundled layout is valid")
    }

    /// Looks up a bundled layout by id.
    pub fn by_id(id: &str) -> Option<Self> {
        match id {
            "wholebody" => Some(Self::wholebody()),
            "expressive" => Some(Self::expressive()),
            _ => None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn with_edges(&self, edges: Vec<(usize, usize)>) -> Result<Self> {
        Self::new(self.id.clone(), self.names.clone(), self.regions.clone(), edges)
    }

    /// Restricts the layout to `keep` (in the given order). Edges survive when
    /// both endpoints are kept and are renumbered.
    pub fn restrict(&self, id: impl Into<String>, keep: &[usize]) -> Result<Self> {
        let mut remap = vec![None; self.count()];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.count() {
                return Err(Error::Layout(format!(
                    "keypoint {old} out of range for layout '{}'",
                    self.id
                )));
            }
            if remap[old].is_some() {
                return Err(Error::Layout(format!("keypoint {old} kept twice")));
            }
            remap[old] = Some(new);
        }
        let edges = self
            .edges
            .iter()
            .filter_map(|&(a, b)| Some((remap[a]?, remap[b]?)))
            .collect();
        Self::new(
            id,
            keep.iter().map(|&i| self.names[i].clone()).collect(),
            keep.iter().map(|&i| self.regions[i]).collect(),
            edges,
        )
    }

    /// Restricts the layout to `keep` and reconnects each kept point to its
    /// nearest kept ancestor in the edge tree rooted at point 0, so chains
    /// through dropped points collapse to single edges.
    pub fn contract(&self, id: impl Into<String>, keep: &[usize]) -> Result<Self> {
        let base = self.restrict(id, keep)?;
        let n = self.count();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some(u);
                    queue.push_back(v);
                }
            }
        }
        let mut remap = vec![None; n];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = Some(new);
        }
        let mut edges = Vec::new();
        for &old in keep {
            let mut up = parent[old];
            while let Some(p) = up {
                if let Some(np) = remap[p] {
                    edges.push((np, remap[old].expect("kept")));
                    break;
                }
                up = parent[p];
            }
        }
        base.with_edges(edges)
    }

    /// Number of connected components of the edge graph.
    pub fn components(&self) -> usize {
        let n = self.count();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut comps = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            comps += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        comps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_layouts_have_expected_sizes() {
        let wb = KeypointLayout::wholebody();
        assert_eq!(wb.count(), 133);
        assert_eq!(wb.regions().iter().filter(|&&r| r == Region::Face).count(), 68);
        assert_eq!(wb.edges().len(), 132);
        assert_eq!(wb.components(), 1);

        let ex = KeypointLayout::expressive();
        assert_eq!(ex.count(), 65);
        assert!(ex.regions().iter().all(|&r| r != Region::Face));
        assert_eq!(ex.names()[23], "left_hand_root");
        assert_eq!(ex.names()[44], "right_hand_root");
    }

    #[test]
    fn expressive_table_equals_restricted_wholebody_tree() {
        let wb = KeypointLayout::wholebody();
        let keep: Vec<usize> = (0..23).chain(91..133).collect();
        let restricted = wb.restrict("expressive", &keep).unwrap();
        let mut a: Vec<_> = restricted.edges().to_vec();
        let mut b: Vec<_> = KeypointLayout::expressive().edges().to_vec();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_edges_rejected() {
        assert!(KeypointLayout::custom("t", 3, vec![(0, 3)]).is_err());
        assert!(KeypointLayout::custom("t", 3, vec![(1, 1)]).is_err());
        assert!(KeypointLayout::custom("t", 3, vec![(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn edge_table_parse_errors_carry_line() {
        let err = parse_edge_table("0 1\n# c\n2 x\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 3,
                message: "'x' is not a joint index".into()
            }
        );
    }
}
