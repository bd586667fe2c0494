use super::partition::PartitionMap;
use crate::diff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::skeleton::AdjacencyMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappingKind {
    /// Dense `J_i × J_{i+1}` joint-fusion matrix.
    Downsample,
    /// Diagonal `J_i × J_i` joint re-weighting, stored as its diagonal.
    Reweight,
}

/// Learnable joint mapping whose values live in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct MappingMatrix {
    kind: MappingKind,
    source: usize,
    target: usize,
    param: ParamId,
}

/// Entry `(j, k)` is `1/|P_k|` when joint `j` belongs to part `k`, else 0.
pub fn init_downsample_matrix(p: &PartitionMap) -> Tensor {
    let (src, dst) = (p.source_count(), p.target_count());
    let mut m = Tensor::zeros(&[src, dst]);
    for (k, part) in p.parts().iter().enumerate() {
        let w = 1.0 / part.len() as f64;
        for &j in part {
            m.set(&[j, k], w);
        }
    }
    m
}

/// Diagonal of an identity re-weighting.
pub fn init_reweight_matrix(joints: usize) -> Tensor {
    Tensor::full(&[joints], 1.0)
}

impl MappingMatrix {
    pub fn downsample(store: &mut ParamStore, name: impl Into<String>, p: &PartitionMap) -> Self {
        let param = store.add(name, init_downsample_matrix(p));
        MappingMatrix {
            kind: MappingKind::Downsample,
            source: p.source_count(),
            target: p.target_count(),
            param,
        }
    }

    pub fn reweight(store: &mut ParamStore, name: impl Into<String>, joints: usize) -> Self {
        let param = store.add(name, init_reweight_matrix(joints));
        MappingMatrix {
            kind: MappingKind::Reweight,
            source: joints,
            target: joints,
            param,
        }
    }

    pub fn kind(&self) -> MappingKind {
        self.kind
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn param(&self) -> ParamId {
        self.param
    }

    /// Number of learnable scalars.
    pub fn scalar_count(&self) -> usize {
        match self.kind {
            MappingKind::Downsample => self.source * self.target,
            MappingKind::Reweight => self.source,
        }
    }

    /// Dense `source × target` matrix (off-diagonals of a reweight are zero).
    pub fn dense(&self, store: &ParamStore) -> Tensor {
        let v = store.value(self.param);
        match self.kind {
            MappingKind::Downsample => v.clone(),
            MappingKind::Reweight => {
                let mut m = Tensor::zeros(&[self.source, self.source]);
                for (j, &d) in v.data().iter().enumerate() {
                    m.set(&[j, j], d);
                }
                m
            }
        }
    }

    /// Contracts the joint axis of `x[J_i×T×C]`:
    /// `out[k,t,c] = Σ_j M[j,k]·x[j,t,c]` (downsample) or
    /// `out[j,t,c] = d[j]·x[j,t,c]` (reweight).
    pub fn apply(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let shape = tape.value(x).shape().to_vec();
        if shape.len() != 3 || shape[0] != self.source {
            return Err(Error::shape(format!(
                "mapping expects {} joints on axis 0, got input {:?}",
                self.source, shape
            )));
        }
        let m = tape.param(store, self.param);
        match self.kind {
            MappingKind::Reweight => tape.scale_joints(m, x),
            MappingKind::Downsample => {
                let (t, c) = (shape[1], shape[2]);
                let mt = tape.transpose(m)?;
                let flat = tape.reshape(x, &[self.source, t * c])?;
                let y = tape.matmul(mt, flat)?;
                tape.reshape(y, &[self.target, t, c])
            }
        }
    }
}

/// `A' = MᵀAM` for a downsample mapping.
pub fn transform_adjacency(
    a: &AdjacencyMatrix,
    m: &MappingMatrix,
    store: &ParamStore,
) -> Result<AdjacencyMatrix> {
    if m.kind != MappingKind::Downsample {
        return Err(Error::config(
            "adjacency transform needs a downsample mapping",
        ));
    }
    transform_adjacency_dense(a, store.value(m.param))
}

/// `A' = MᵀAM` for an arbitrary `J × J'` matrix.
pub fn transform_adjacency_dense(a: &AdjacencyMatrix, m: &Tensor) -> Result<AdjacencyMatrix> {
    let (src, dst) = match *m.shape() {
        [s, d] => (s, d),
        _ => return Err(Error::shape(format!("mapping must be 2-D, got {:?}", m.shape()))),
    };
    if src != a.joints() {
        return Err(Error::shape(format!(
            "mapping has {src} source joints, adjacency has {}",
            a.joints()
        )));
    }
    use crate::diff::kernels::{matmul, transpose};
    let am = matmul(&a.to_tensor(), m)?;
    let out = matmul(&transpose(m)?, &am)?;
    debug_assert_eq!(out.shape(), &[dst, dst]);
    AdjacencyMatrix::from_tensor(&out)
}
