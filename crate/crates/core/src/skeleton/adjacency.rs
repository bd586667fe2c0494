use serde::{Deserialize, Serialize};

use super::layout::KeypointLayout;
use crate::diff::Tensor;
use crate::error::{Error, Result};

/// Square non-negative joint-to-joint weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    joints: usize,
    values: Vec<f64>,
}

/// How [`normalize_adjacency`] rescales a matrix with self-links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `D⁻¹Ã`, rows sum to one.
    #[default]
    Row,
    /// `D^{-1/2} Ã D^{-1/2}`.
    Symmetric,
}

impl AdjacencyMatrix {
    pub fn zeros(joints: usize) -> Self {
        AdjacencyMatrix {
            joints,
            values: vec![0.0; joints * joints],
        }
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match *t.shape() {
            [a, b] if a == b => Ok(AdjacencyMatrix {
                joints: a,
                values: t.data().to_vec(),
            }),
            _ => Err(Error::shape(format!(
                "adjacency must be square, got {:?}",
                t.shape()
            ))),
        }
    }

    /// Symmetric 0/1 matrix from an undirected edge list.
    pub fn from_edges(joints: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut a = Self::zeros(joints);
        for &(i, j) in edges {
            if i >= joints || j >= joints {
                return Err(Error::Layout(format!(
                    "edge ({i}, {j}) out of range for {joints} joints"
                )));
            }
            if i == j {
                return Err(Error::Layout(format!("self-edge on joint {i}")));
            }
            if a.get(i, j) != 0.0 {
                return Err(Error::Layout(format!("duplicate edge ({i}, {j})")));
            }
            a.set(i, j, 1.0);
            a.set(j, i, 1.0);
        }
        Ok(a)
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.joints + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.joints + j] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(&[self.joints, self.joints], self.values.clone()).expect("square shape")
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.values[i * self.joints..(i + 1) * self.joints].iter().sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.joints).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    pub fn is_non_negative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }
}

pub fn build_adjacency(layout: &KeypointLayout) -> Result<AdjacencyMatrix> {
    AdjacencyMatrix::from_edges(layout.count(), layout.edges())
}

/// `Ã = A + I`. The input must not already carry self-links.
pub fn add_self_links(a: &AdjacencyMatrix) -> Result<AdjacencyMatrix> {
    if let Some(i) = (0..a.joints).find(|&i| a.get(i, i) != 0.0) {
        return Err(Error::config(format!(
            "adjacency already has a self-link on joint {i}"
        )));
    }
    let mut out = a.clone();
    for i in 0..a.joints {
        out.set(i, i, 1.0);
    }
    Ok(out)
}

pub fn normalize_adjacency(a: &AdjacencyMatrix, mode: Normalization) -> Result<AdjacencyMatrix> {
    let n = a.joints;
    let sums: Vec<f64> = (0..n).map(|i| a.row_sum(i)).collect();
    if let Some(i) = sums.iter().position(|&s| s <= 0.0) {
        return Err(Error::IsolatedJoint(i));
    }
    let mut out = a.clone();
    for i in 0..n {
        for j in 0..n {
            let v = a.get(i, j);
            let scaled = match mode {
                Normalization::Row => v / sums[i],
                Normalization::Symmetric => v / (sums[i].sqrt() * sums[j].sqrt()),
            };
            out.set(i, j, scaled);
        }
    }
    Ok(out)
}
