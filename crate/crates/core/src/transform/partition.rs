use crate::error::{Error, Result};

const PARTITION_65_27: &str = include_str!("../../data/partition_65_27.txt");
const PARTITION_27_11: &str = include_str!("../../data/partition_27_11.txt");

/// Disjoint assignment of `source_count` joints to target parts.
///
/// Part `k` lists the source joints fused into target joint `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMap {
    source_count: usize,
    parts: Vec<Vec<usize>>,
}

impl PartitionMap {
    /// Validates that the parts are non-empty, disjoint and cover
    /// `0..source_count`. Member lists are sorted.
    pub fn new(source_count: usize, mut parts: Vec<Vec<usize>>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Partition("partition has no parts".into()));
        }
        let mut owner = vec![None; source_count];
        for (k, part) in parts.iter_mut().enumerate() {
            if part.is_empty() {
                return Err(Error::Partition(format!("part {k} is empty")));
            }
            part.sort_unstable();
            for &j in part.iter() {
                if j >= source_count {
                    return Err(Error::Partition(format!(
                        "part {k} names joint {j}, source has {source_count}"
                    )));
                }
                if let Some(prev) = owner[j] {
                    return Err(Error::Partition(format!(
                        "joint {j} appears in parts {prev} and {k}"
                    )));
                }
                owner[j] = Some(k);
            }
        }
        if let Some(j) = owner.iter().position(Option::is_none) {
            return Err(Error::Partition(format!("joint {j} belongs to no part")));
        }
        Ok(PartitionMap {
            source_count,
            parts,
        })
    }

    /// Every joint in its own part.
    pub fn singleton(n: usize) -> Self {
        PartitionMap {
            source_count: n,
            parts: (0..n).map(|j| vec![j]).collect(),
        }
    }

    /// Parses the `k: j1 j2 …` table format. Part lines must appear in order
    /// `0, 1, …`; `#` starts a comment.
    pub fn parse(text: &str, source_count: usize) -> Result<Self> {
        let mut parts = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: n + 1,
                message,
            };
            let (head, tail) = line
                .split_once(':')
                .ok_or_else(|| err(format!("expected 'k: j1 j2 ...', got '{line}'")))?;
            let k: usize = head
                .trim()
                .parse()
                .map_err(|_| err(format!("'{}' is not a part index", head.trim())))?;
            if k != parts.len() {
                return Err(err(format!("expected part {}, found part {k}", parts.len())));
            }
            let members = tail
                .split_whitespace()
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| err(format!("'{s}' is not a joint index")))
                })
                .collect::<Result<Vec<_>>>()?;
            parts.push(members);
        }
        Self::new(source_count, parts)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (k, p) in self.parts.iter().enumerate() {
            let members: Vec<String> = p.iter().map(usize::to_string).collect();
            out.push_str(&format!("{k}: {}\n", members.join(" ")));
        }
        out
    }

    /// Bundled 65 → 27 partition of the Expressive layout.
    pub fn expressive_65_to_27() -> Self {
        Self::parse(PARTITION_65_27, 65).expect("bundled partition is valid")
    }

    /// Bundled 27 → 11 partition.
    pub fn coarse_27_to_11() -> Self {
        Self::parse(PARTITION_27_11, 27).expect("bundled partition is valid")
    }

    pub fn source_count(&self) -> usize {
        self.source_count
    }

    pub fn target_count(&self) -> usize {
        self.parts.len()
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    /// Target part owning source joint `j`.
    pub fn part_of(&self, j: usize) -> Option<usize> {
        self.parts.iter().position(|p| p.contains(&j))
    }
}
