//! Operation tape for reverse-mode differentiation.
//!
//! Every forward call appends a node holding its output value and an
//! [`OpRecord`] naming the op and its input nodes. Input values stay on the
//! tape, so the record plus the tape is enough to replay or differentiate the
//! op. [`Tape::backward`] walks the nodes in reverse.

use super::kernels;
use super::param::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, PartialEq)]
pub enum OpRecord {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Add(Var, Var),
    Relu(Var),
    Conv1dTemporal { x: Var, w: Var, stride: usize },
    ScaleJoints { d: Var, x: Var },
    ChannelAffine { x: Var, scale: Var, bias: Var },
    BiasAdd { x: Var, bias: Var },
    JointEncoding { x: Var, enc: Var },
    InstancesToChannels(Var),
    SliceLast { x: Var, start: usize, end: usize },
    ConcatLast(Vec<Var>),
    SubsampleFrames { x: Var, stride: usize },
    MeanPool(Var),
    MaxLeading(Var),
    SoftmaxCrossEntropy { logits: Var, label: usize },
    WeightedSum { x: Var, weights: Tensor },
}

impl OpRecord {
    pub fn kind(&self) -> &'static str {
        match self {
            OpRecord::Constant => "constant",
            OpRecord::Param(_) => "param",
            OpRecord::MatMul(..) => "matmul",
            OpRecord::Transpose(_) => "transpose",
            OpRecord::Reshape(_) => "reshape",
            OpRecord::Add(..) => "add",
            OpRecord::Relu(_) => "relu",
            OpRecord::Conv1dTemporal { .. } => "conv1d_temporal",
            OpRecord::ScaleJoints { .. } => "scale_joints",
            OpRecord::ChannelAffine { .. } => "channel_affine",
            OpRecord::BiasAdd { .. } => "bias_add",
            OpRecord::JointEncoding { .. } => "joint_encoding",
            OpRecord::InstancesToChannels(_) => "instances_to_channels",
            OpRecord::SliceLast { .. } => "slice_last",
            OpRecord::ConcatLast(_) => "concat_last",
            OpRecord::SubsampleFrames { .. } => "subsample_frames",
            OpRecord::MeanPool(_) => "mean_pool",
            OpRecord::MaxLeading(_) => "max_leading",
            OpRecord::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
            OpRecord::WeightedSum { .. } => "weighted_sum",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: OpRecord,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn record(&self, v: Var) -> &OpRecord {
        &self.nodes[v.0].op
    }

    fn push(&mut self, value: Tensor, op: OpRecord) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, OpRecord::Constant)
    }

    /// Places a parameter on the tape. Frozen parameters become constants.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let p = store.get(id);
        let op = if p.requires_grad {
            OpRecord::Param(id)
        } else {
            OpRecord::Constant
        };
        self.push(p.value.clone(), op)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = kernels::matmul(self.value(a), self.value(b))?;
        Ok(self.push(y, OpRecord::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let y = kernels::transpose(self.value(a))?;
        Ok(self.push(y, OpRecord::Transpose(a)))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let y = kernels::reshape(self.value(a), shape)?;
        Ok(self.push(y, OpRecord::Reshape(a)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = kernels::add(self.value(a), self.value(b))?;
        Ok(self.push(y, OpRecord::Add(a, b)))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = kernels::relu(self.value(x));
        self.push(y, OpRecord::Relu(x))
    }

    pub fn conv1d_temporal(&mut self, x: Var, w: Var, stride: usize) -> Result<Var> {
        let y = kernels::conv1d_temporal(self.value(x), self.value(w), stride)?;
        Ok(self.push(y, OpRecord::Conv1dTemporal { x, w, stride }))
    }

    pub fn scale_joints(&mut self, d: Var, x: Var) -> Result<Var> {
        let y = kernels::scale_joints(self.value(d), self.value(x))?;
        Ok(self.push(y, OpRecord::ScaleJoints { d, x }))
    }

    pub fn channel_affine(&mut self, x: Var, scale: Var, bias: Var) -> Result<Var> {
        let y = kernels::channel_affine(self.value(x), self.value(scale), self.value(bias))?;
        Ok(self.push(y, OpRecord::ChannelAffine { x, scale, bias }))
    }

    pub fn bias_add(&mut self, x: Var, bias: Var) -> Result<Var> {
        let y = kernels::bias_add(self.value(x), self.value(bias))?;
        Ok(self.push(y, OpRecord::BiasAdd { x, bias }))
    }

    pub fn add_joint_encoding(&mut self, x: Var, enc: Var) -> Result<Var> {
        let y = kernels::add_joint_encoding(self.value(x), self.value(enc))?;
        Ok(self.push(y, OpRecord::JointEncoding { x, enc }))
    }

    pub fn instances_to_channels(&mut self, x: Var) -> Result<Var> {
        let y = kernels::instances_to_channels(self.value(x))?;
        Ok(self.push(y, OpRecord::InstancesToChannels(x)))
    }

    pub fn slice_last(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let y = kernels::slice_last(self.value(x), start, end)?;
        Ok(self.push(y, OpRecord::SliceLast { x, start, end }))
    }

    pub fn concat_last(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        let refs: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let y = kernels::concat_last(&refs)?;
        Ok(self.push(y, OpRecord::ConcatLast(parts.to_vec())))
    }

    pub fn subsample_frames(&mut self, x: Var, stride: usize) -> Result<Var> {
        if stride == 1 {
            return Ok(x);
        }
        let y = kernels::subsample_frames(self.value(x), stride)?;
        Ok(self.push(y, OpRecord::SubsampleFrames { x, stride }))
    }

    pub fn mean_pool(&mut self, x: Var) -> Var {
        let y = kernels::mean_pool(self.value(x));
        self.push(y, OpRecord::MeanPool(x))
    }

    pub fn max_leading(&mut self, z: Var) -> Result<Var> {
        let y = kernels::max_leading(self.value(z))?;
        Ok(self.push(y, OpRecord::MaxLeading(z)))
    }

    pub fn softmax_cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let y = kernels::softmax_cross_entropy(self.value(logits), label)?;
        Ok(self.push(y, OpRecord::SoftmaxCrossEntropy { logits, label }))
    }

    pub fn weighted_sum(&mut self, x: Var, weights: Tensor) -> Result<Var> {
        let y = kernels::weighted_sum(self.value(x), &weights)?;
        Ok(self.push(y, OpRecord::WeightedSum { x, weights }))
    }

    /// Re-evaluates the forward rule of `v` from the input values on the tape.
    pub fn replay(&self, v: Var) -> Result<Tensor> {
        let val = |x: &Var| self.value(*x);
        match &self.nodes[v.0].op {
            OpRecord::Constant | OpRecord::Param(_) => Ok(self.value(v).clone()),
            OpRecord::MatMul(a, b) => kernels::matmul(val(a), val(b)),
            OpRecord::Transpose(a) => kernels::transpose(val(a)),
            OpRecord::Reshape(a) => kernels::reshape(val(a), self.value(v).shape()),
            OpRecord::Add(a, b) => kernels::add(val(a), val(b)),
            OpRecord::Relu(x) => Ok(kernels::relu(val(x))),
            OpRecord::Conv1dTemporal { x, w, stride } => {
                kernels::conv1d_temporal(val(x), val(w), *stride)
            }
            OpRecord::ScaleJoints { d, x } => kernels::scale_joints(val(d), val(x)),
            OpRecord::ChannelAffine { x, scale, bias } => {
                kernels::channel_affine(val(x), val(scale), val(bias))
            }
            OpRecord::BiasAdd { x, bias } => kernels::bias_add(val(x), val(bias)),
            OpRecord::JointEncoding { x, enc } => kernels::add_joint_encoding(val(x), val(enc)),
            OpRecord::InstancesToChannels(x) => kernels::instances_to_channels(val(x)),
            OpRecord::SliceLast { x, start, end } => kernels::slice_last(val(x), *start, *end),
            OpRecord::ConcatLast(parts) => {
                let refs: Vec<&Tensor> = parts.iter().map(val).collect();
                kernels::concat_last(&refs)
            }
            OpRecord::SubsampleFrames { x, stride } => kernels::subsample_frames(val(x), *stride),
            OpRecord::MeanPool(x) => Ok(kernels::mean_pool(val(x))),
            OpRecord::MaxLeading(z) => kernels::max_leading(val(z)),
            OpRecord::SoftmaxCrossEntropy { logits, label } => {
                kernels::softmax_cross_entropy(val(logits), *label)
            }
            OpRecord::WeightedSum { x, weights } => kernels::weighted_sum(val(x), weights),
        }
    }

    /// Reverse sweep from a one-element output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if out.len() != 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar output, got {:?}",
                out.shape()
            )));
        }
        if !out.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite output {}",
                out.data()[0]
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Tensor::full(out.shape(), 1.0));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let send = |grads: &mut Vec<Option<Tensor>>, to: Var, d: Tensor| {
                match &mut grads[to.0] {
                    Some(acc) => acc.add_assign(&d),
                    slot @ None => *slot = Some(d),
                }
            };
            let val = |x: &Var| &self.nodes[x.0].value;
            match &node.op {
                OpRecord::Constant | OpRecord::Param(_) => {
                    grads[idx] = Some(g);
                    continue;
                }
                OpRecord::MatMul(a, b) => {
                    let (da, db) = kernels::matmul_backward(val(a), val(b), &g);
                    send(&mut grads, *a, da);
                    send(&mut grads, *b, db);
                }
                OpRecord::Transpose(a) => {
                    send(&mut grads, *a, kernels::transpose(&g)?);
                }
                OpRecord::Reshape(a) => {
                    send(&mut grads, *a, g.reshaped(val(a).shape())?);
                }
                OpRecord::Add(a, b) => {
                    let (da, db) = kernels::add_backward(val(a), val(b), &g);
                    send(&mut grads, *a, da);
                    send(&mut grads, *b, db);
                }
                OpRecord::Relu(x) => {
                    send(&mut grads, *x, kernels::relu_backward(val(x), &g));
                }
                OpRecord::Conv1dTemporal { x, w, stride } => {
                    let (dx, dw) = kernels::conv1d_temporal_backward(val(x), val(w), *stride, &g);
                    send(&mut grads, *x, dx);
                    send(&mut grads, *w, dw);
                }
                OpRecord::ScaleJoints { d, x } => {
                    let (dd, dx) = kernels::scale_joints_backward(val(d), val(x), &g);
                    send(&mut grads, *d, dd);
                    send(&mut grads, *x, dx);
                }
                OpRecord::ChannelAffine { x, scale, bias } => {
                    let (dx, ds, db) = kernels::channel_affine_backward(val(x), val(scale), &g);
                    send(&mut grads, *x, dx);
                    send(&mut grads, *scale, ds);
                    send(&mut grads, *bias, db);
                }
                OpRecord::BiasAdd { x, bias } => {
                    let (dx, db) = kernels::bias_add_backward(val(x), &g);
                    send(&mut grads, *x, dx);
                    send(&mut grads, *bias, db);
                }
                OpRecord::JointEncoding { x, enc } => {
                    let (dx, de) = kernels::add_joint_encoding_backward(val(x), val(enc), &g);
                    send(&mut grads, *x, dx);
                    send(&mut grads, *enc, de);
                }
                OpRecord::InstancesToChannels(x) => {
                    send(&mut grads, *x, kernels::instances_to_channels_backward(val(x), &g));
                }
                OpRecord::SliceLast { x, start, end } => {
                    let dx = kernels::slice_last_backward(val(x), *start, *end, &g);
                    send(&mut grads, *x, dx);
                }
                OpRecord::ConcatLast(parts) => {
                    let refs: Vec<&Tensor> = parts.iter().map(val).collect();
                    let ds = kernels::concat_last_backward(&refs, &g);
                    for (p, d) in parts.iter().zip(ds) {
                        send(&mut grads, *p, d);
                    }
                }
                OpRecord::SubsampleFrames { x, stride } => {
                    let dx = kernels::subsample_frames_backward(val(x), *stride, &g);
                    send(&mut grads, *x, dx);
                }
                OpRecord::MeanPool(x) => {
                    send(&mut grads, *x, kernels::mean_pool_backward(val(x), &g));
                }
                OpRecord::MaxLeading(z) => {
                    send(&mut grads, *z, kernels::max_leading_backward(val(z), &g));
                }
                OpRecord::SoftmaxCrossEntropy { logits, label } => {
                    let d = kernels::softmax_cross_entropy_backward(val(logits), *label, &g);
                    send(&mut grads, *logits, d);
                }
                OpRecord::WeightedSum { x, weights } => {
                    send(&mut grads, *x, weights.map(|w| w * g.data()[0]));
                }
            }
        }
        Ok(Gradients { grads })
    }

    /// Parameter nodes on the tape, in recording order.
    fn param_nodes(&self) -> impl Iterator<Item = (usize, ParamId)> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n.op {
            OpRecord::Param(id) => Some((i, id)),
            _ => None,
        })
    }
}

/// Result of a reverse sweep: one optional gradient per tape node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the output with respect to `v`, if `v` influenced it.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Adds the gradients of every parameter node into `store`.
    /// A parameter used several times receives the sum.
    pub fn accumulate_into(&self, tape: &Tape, store: &mut ParamStore) {
        for (node, id) in tape.param_nodes() {
            if let Some(g) = self.grads.get(node).and_then(Option::as_ref) {
                store.get_mut(id).grad.add_assign(g);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_reproduces_every_node_exactly() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::new(&[2, 3, 2], (0..12).map(|v| v as f64 * 0.3 - 1.1).collect()).unwrap());
        let w = t.constant(Tensor::new(&[3, 2, 2], (0..12).map(|v| (v as f64).sin()).collect()).unwrap());
        let y = t.conv1d_temporal(x, w, 2).unwrap();
        let r = t.relu(y);
        let s = t.slice_last(r, 0, 1).unwrap();
        let c = t.concat_last(&[s, r]).unwrap();
        let p = t.mean_pool(c);
        let l = t.softmax_cross_entropy(p, 1).unwrap();
        for v in [y, r, s, c, p, l] {
            assert_eq!(&t.replay(v).unwrap(), t.value(v), "{}", t.record(v).kind());
        }
    }

    #[test]
    fn shared_parameter_gradients_sum() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::new(&[1, 1], vec![3.0]).unwrap());
        let mut t = Tape::new();
        let a = t.param(&store, id);
        let b = t.param(&store, id);
        let y = t.matmul(a, b).unwrap();
        let g = t.backward(y).unwrap();
        g.accumulate_into(&t, &mut store);
        // d(w*w)/dw = 2w
        assert_eq!(store.get(id).grad.data(), &[6.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::zeros(&[2]));
        assert!(t.backward(x).is_err());
    }
}
