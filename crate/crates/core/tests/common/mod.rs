//! Straight-line reference implementations shared by the integration tests.
//! They work on nested vectors and index loops, independent of the kernels.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skelet_core::diff::{check_gradients, ParamStore, Tape, Tensor, Var};
use skelet_core::network::Network;
use skelet_core::skeleton::{
    add_self_links, normalize_adjacency, AdjacencyMatrix, KeypointLayout, Normalization, Region,
    SkeletonSequence,
};
use skelet_core::transform::{ActivationOrder, BlockConfig, BlockKind, GroupedMappingBlock};
use skelet_core::Result;

/// `x[j][t][c]`
pub type Grid = Vec<Vec<Vec<f64>>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub fn to_grid(x: &Tensor) -> Grid {
    let s = x.shape();
    (0..s[0])
        .map(|j| {
            (0..s[1])
                .map(|t| (0..s[2]).map(|c| x.at(&[j, t, c])).collect())
                .collect()
        })
        .collect()
}

pub fn from_grid(g: &Grid) -> Tensor {
    let shape = [g.len(), g[0].len(), g[0][0].len()];
    Tensor::new(&shape, g.iter().flatten().flatten().copied().collect()).unwrap()
}

pub fn matrix(t: &Tensor) -> Vec<Vec<f64>> {
    let s = t.shape();
    (0..s[0]).map(|i| (0..s[1]).map(|k| t.at(&[i, k])).collect()).collect()
}

/// `out[k][t][c] = Σ_j m[j][k]·x[j][t][c]`
pub fn contract_joints(m: &[Vec<f64>], x: &Grid) -> Grid {
    let (jn, kn) = (m.len(), m[0].len());
    let (tn, cn) = (x[0].len(), x[0][0].len());
    let mut out = vec![vec![vec![0.0; cn]; tn]; kn];
    for k in 0..kn {
        for t in 0..tn {
            for c in 0..cn {
                let mut s = 0.0;
                for j in 0..jn {
                    s += m[j][k] * x[j][t][c];
                }
                out[k][t][c] = s;
            }
        }
    }
    out
}

/// `out[j][t][:] = x[j][t][:]·w`
pub fn channel_map(x: &Grid, w: &[Vec<f64>]) -> Grid {
    x.iter()
        .map(|row| {
            row.iter()
                .map(|v| {
                    (0..w[0].len())
                        .map(|o| (0..v.len()).map(|i| v[i] * w[i][o]).sum())
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// `out[i][t][c] = Σ_j a[i][j]·x[j][t][c]`
pub fn graph_aggregate(a: &[Vec<f64>], x: &Grid) -> Grid {
    let (tn, cn) = (x[0].len(), x[0][0].len());
    (0..a.len())
        .map(|i| {
            (0..tn)
                .map(|t| {
                    (0..cn)
                        .map(|c| (0..x.len()).map(|j| a[i][j] * x[j][t][c]).sum())
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn affine(x: &Grid, scale: &[f64], bias: &[f64]) -> Grid {
    x.iter()
        .map(|r| {
            r.iter()
                .map(|v| v.iter().enumerate().map(|(c, &e)| e * scale[c] + bias[c]).collect())
                .collect()
        })
        .collect()
}

pub fn relu(x: &Grid) -> Grid {
    x.iter()
        .map(|r| r.iter().map(|v| v.iter().map(|&e| e.max(0.0)).collect()).collect())
        .collect()
}

pub fn add(a: &Grid, b: &Grid) -> Grid {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| {
            ra.iter()
                .zip(rb)
                .map(|(va, vb)| va.iter().zip(vb).map(|(x, y)| x + y).collect())
                .collect()
        })
        .collect()
}

/// Centred zero-padded temporal convolution; `w[d][i][o]` for offsets
/// `d - k/2`.
pub fn temporal_conv(x: &Grid, w: &Tensor, stride: usize) -> Grid {
    let (k, ci, co) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    let tn = x[0].len();
    let t_out = tn.div_ceil(stride);
    let half = (k / 2) as isize;
    x.iter()
        .map(|row| {
            (0..t_out)
                .map(|to| {
                    (0..co)
                        .map(|o| {
                            let mut s = 0.0;
                            for d in 0..k {
                                let t = (to * stride) as isize + d as isize - half;
                                if t < 0 || t >= tn as isize {
                                    continue;
                                }
                                for i in 0..ci {
                                    s += row[t as usize][i] * w.at(&[d, i, o]);
                                }
                            }
                            s
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn subsample(x: &Grid, stride: usize) -> Grid {
    x.iter()
        .map(|r| r.iter().step_by(stride).cloned().collect())
        .collect()
}

pub fn channels(x: &Grid, start: usize, end: usize) -> Grid {
    x.iter()
        .map(|r| r.iter().map(|v| v[start..end].to_vec()).collect())
        .collect()
}

pub fn concat(parts: &[Grid]) -> Grid {
    let mut out = parts[0].clone();
    for p in &parts[1..] {
        for (ro, rp) in out.iter_mut().zip(p) {
            for (vo, vp) in ro.iter_mut().zip(rp) {
                vo.extend_from_slice(vp);
            }
        }
    }
    out
}

/// Reference single-graph block:
/// `affine₂(T(σ(affine₁(Â·X·W_g·W)))) + res(X)`.
pub struct PlainBlock<'a> {
    pub adjacency: &'a [Vec<f64>],
    pub graph_weight: &'a [Vec<f64>],
    pub shared: &'a [Vec<f64>],
    pub affine1: (&'a [f64], &'a [f64]),
    pub kernel: &'a Tensor,
    pub affine2: (&'a [f64], &'a [f64]),
    pub projection: Option<(&'a [Vec<f64>], &'a [f64])>,
    pub stride: usize,
    pub order: ActivationOrder,
}

impl PlainBlock<'_> {
    pub fn forward(&self, x: &Grid) -> Grid {
        let g = channel_map(&graph_aggregate(self.adjacency, x), self.graph_weight);
        let h = match self.order {
            ActivationOrder::WeightThenActivation => {
                relu(&affine(&channel_map(&g, self.shared), self.affine1.0, self.affine1.1))
            }
            ActivationOrder::ActivationThenWeight => {
                channel_map(&relu(&affine(&g, self.affine1.0, self.affine1.1)), self.shared)
            }
        };
        let t = affine(
            &temporal_conv(&h, self.kernel, self.stride),
            self.affine2.0,
            self.affine2.1,
        );
        let res = subsample(x, self.stride);
        let res = match self.projection {
            Some((w, b)) => {
                let ones = vec![1.0; b.len()];
                affine(&channel_map(&res, w), &ones, b)
            }
            None => res,
        };
        add(&t, &res)
    }
}

fn vector(t: &Tensor) -> Vec<f64> {
    t.data().to_vec()
}

/// Reference forward of a grouped mapping block from its raw parameters.
pub fn block_oracle(block: &GroupedMappingBlock, store: &ParamStore, x: &Grid) -> Grid {
    let cfg = block.config();
    let p = block.params();
    let k = cfg.groups;
    let gi = cfg.in_group_width();
    let a = matrix(block.adjacency());
    let mut mapped = Vec::new();
    let mut outs = Vec::new();
    for g in 0..k {
        let xg = channels(x, g * gi, (g + 1) * gi);
        let mg = match p.mappings.get(g) {
            Some(m) => contract_joints(&matrix(&m.dense(store)), &xg),
            None => xg,
        };
        let w = matrix(store.value(p.graph_weights[g]));
        outs.push(channel_map(&graph_aggregate(&a, &mg), &w));
        mapped.push(mg);
    }
    let cat = concat(&outs);
    let shared = matrix(store.value(p.shared_weight));
    let s1 = vector(store.value(p.graph_affine.scale));
    let b1 = vector(store.value(p.graph_affine.bias));
    let h = match cfg.order {
        ActivationOrder::WeightThenActivation => relu(&affine(&channel_map(&cat, &shared), &s1, &b1)),
        ActivationOrder::ActivationThenWeight => channel_map(&relu(&affine(&cat, &s1, &b1)), &shared),
    };
    let s2 = vector(store.value(p.temporal_affine.scale));
    let b2 = vector(store.value(p.temporal_affine.bias));
    let t = affine(
        &temporal_conv(&h, store.value(p.temporal_kernel), cfg.stride),
        &s2,
        &b2,
    );
    let res = match cfg.kind {
        BlockKind::Downsample => concat(&mapped),
        _ => x.clone(),
    };
    let res = subsample(&res, cfg.stride);
    let res = match p.residual {
        Some(r) => {
            let w = matrix(store.value(r.weight));
            let b = vector(store.value(r.bias));
            affine(&channel_map(&res, &w), &vec![1.0; b.len()], &b)
        }
        None => res,
    };
    add(&t, &res)
}

/// Reference logits of a network.
pub fn network_oracle(net: &Network, x: &Tensor) -> Vec<f64> {
    let store = net.store();
    let mut h = to_grid(x);
    for b in net.blocks() {
        h = block_oracle(b, store, &h);
    }
    let c = h[0][0].len();
    let count = (h.len() * h[0].len()) as f64;
    let mut pooled = vec![0.0; c];
    for r in &h {
        for v in r {
            for (p, e) in pooled.iter_mut().zip(v) {
                *p += e;
            }
        }
    }
    for p in &mut pooled {
        *p /= count;
    }
    let w = matrix(store.value(net.classifier().weight));
    let b = store.value(net.classifier().bias).data();
    (0..b.len())
        .map(|o| b[o] + (0..c).map(|i| pooled[i] * w[i][o]).sum::<f64>())
        .collect()
}

/// Replaces every parameter with uniform noise in `[-scale, scale)`, keeping
/// those whose name matches `keep`.
pub fn randomize(store: &mut ParamStore, rng: &mut impl Rng, scale: f64, keep: impl Fn(&str) -> bool) {
    for p in store.iter_mut() {
        if keep(&p.name) {
            continue;
        }
        for v in p.value.data_mut() {
            *v = rng.gen_range(-scale..scale);
        }
    }
}

pub fn max_abs_diff(a: &Grid, b: &Grid) -> f64 {
    a.iter()
        .flatten()
        .flatten()
        .zip(b.iter().flatten().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Random spanning tree over `n` joints.
pub fn random_tree(r: &mut impl Rng, n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|j| (r.gen_range(0..j), j)).collect()
}

/// `D⁻¹(A + I)` computed from an edge list.
pub fn row_normalized(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for &(i, j) in edges {
        a[i][j] = 1.0;
        a[j][i] = 1.0;
    }
    for row in &mut a {
        let s: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    a
}

pub fn block_forward(block: &GroupedMappingBlock, store: &ParamStore, x: &Tensor) -> Tensor {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let y = block.forward(&mut tape, store, xv).unwrap();
    tape.value(y).clone()
}

/// Runs one random single-group instance against the plain block; returns the
/// largest deviation.
pub fn plain_block_case(seed: u64, kind: BlockKind) -> f64 {
    let mut r = rng(seed);
    let joints = r.gen_range(2..8);
    let frames = r.gen_range(1..10);
    let c_in = r.gen_range(1..6);
    let c_out = if r.gen_bool(0.5) { c_in } else { r.gen_range(1..6) };
    let order = if r.gen_bool(0.5) {
        ActivationOrder::WeightThenActivation
    } else {
        ActivationOrder::ActivationThenWeight
    };
    let kernel_size = [1, 3, 5][r.gen_range(0..3)];
    let edges = random_tree(&mut r, joints);
    let adj = normalize_adjacency(
        &add_self_links(&AdjacencyMatrix::from_edges(joints, &edges).unwrap()).unwrap(),
        Normalization::Row,
    )
    .unwrap();
    let cfg = BlockConfig {
        index: 1,
        kind,
        in_channels: c_in,
        out_channels: c_out,
        groups: 1,
        stride: 1,
        kernel_size,
        partition: None,
        order,
    };
    let mut store = ParamStore::new();
    let block = GroupedMappingBlock::new(cfg, joints, &adj, &mut store, &mut r).unwrap();
    randomize(&mut store, &mut r, 1.0, |name| name.contains("mapping"));
    let x = random_tensor(&mut r, &[joints, frames, c_in]);

    let p = block.params();
    let a = row_normalized(joints, &edges);
    let gw = matrix(store.value(p.graph_weights[0]));
    let shared = matrix(store.value(p.shared_weight));
    let s1 = store.value(p.graph_affine.scale).data().to_vec();
    let b1 = store.value(p.graph_affine.bias).data().to_vec();
    let s2 = store.value(p.temporal_affine.scale).data().to_vec();
    let b2 = store.value(p.temporal_affine.bias).data().to_vec();
    let proj = p
        .residual
        .map(|q| (matrix(store.value(q.weight)), store.value(q.bias).data().to_vec()));
    let plain = PlainBlock {
        adjacency: &a,
        graph_weight: &gw,
        shared: &shared,
        affine1: (&s1, &b1),
        kernel: store.value(p.temporal_kernel),
        affine2: (&s2, &b2),
        projection: proj.as_ref().map(|(w, b)| (w.as_slice(), b.as_slice())),
        stride: 1,
        order,
    };
    let expected = plain.forward(&to_grid(&x));
    max_abs_diff(&to_grid(&block_forward(&block, &store, &x)), &expected)
}

/// Registers `inputs` as parameters, reduces `f`'s output against fixed random
/// weights and returns the worst relative gradient error.
pub fn op_error(seed: u64, inputs: Vec<Tensor>, f: impl Fn(&mut Tape, &[Var]) -> Result<Var>) -> f64 {
    let mut store = ParamStore::new();
    let ids: Vec<_> = inputs
        .into_iter()
        .enumerate()
        .map(|(i, t)| store.add(format!("in{i}"), t))
        .collect();
    let shape = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ids.iter().map(|&id| tape.param(&store, id)).collect();
        let out = f(&mut tape, &vars).unwrap();
        tape.value(out).shape().to_vec()
    };
    let weights = random_tensor(&mut rng(seed ^ 0x5eed), &shape);
    let report = check_gradients(&mut store, |tape, st| {
        let vars: Vec<Var> = ids.iter().map(|&id| tape.param(st, id)).collect();
        let out = f(tape, &vars)?;
        tape.weighted_sum(out, weights.clone())
    })
    .unwrap();
    assert!(report.coordinates > 0);
    report.max_rel_error
}

pub fn rt(seed: u64, shape: &[usize]) -> Tensor {
    random_tensor(&mut rng(seed), shape)
}


pub const VIDEOS: usize = 8;
pub const FRAMES: usize = 8;

/// Whole-body videos whose bodies sit still at a shared pose while the face
/// moves rigidly between videos. Hands swing with a per-video amplitude around
/// a fixed centre, so they move but their mean position does not change. All
/// values are multiples of 1/16 so every statistic is computed exactly.
pub fn face_jitter_dataset(seed: u64) -> Vec<SkeletonSequence> {
    let mut r = rng(seed);
    let layout = KeypointLayout::wholebody();
    let base: Vec<[f64; 2]> = (0..133)
        .map(|_| [r.gen_range(-32..32) as f64 / 16.0, r.gen_range(-32..32) as f64 / 16.0])
        .collect();
    (0..VIDEOS)
        .map(|_| {
            let shift = [r.gen_range(-16..16) as f64 / 16.0, r.gen_range(-16..16) as f64 / 16.0];
            let amp = r.gen_range(1..8) as f64 / 16.0;
            let mut data = Vec::with_capacity(133 * FRAMES * 3);
            for (j, region) in layout.regions().iter().enumerate() {
                for t in 0..FRAMES {
                    let (mut x, mut y) = (base[j][0], base[j][1]);
                    match region {
                        Region::Face => {
                            x += shift[0];
                            y += shift[1];
                        }
                        Region::LeftHand | Region::RightHand => {
                            y += if t % 2 == 0 { amp } else { -amp };
                        }
                        _ => {}
                    }
                    data.extend([x, y, 1.0]);
                }
            }
            SkeletonSequence::single("wholebody", Tensor::new(&[133, FRAMES, 3], data).unwrap(), None)
                .unwrap()
        })
        .collect()
}

pub fn translated(data: &[SkeletonSequence], dx: f64, dy: f64) -> Vec<SkeletonSequence> {
    data.iter()
        .map(|s| {
            let mut t = s.data().clone();
            for p in t.data_mut().chunks_mut(3) {
                p[0] += dx;
                p[1] += dy;
            }
            SkeletonSequence::new(s.layout_id(), t, s.label()).unwrap()
        })
        .collect()
}


/// Worst relative gradient error of every tape operation on small random
/// inputs, by operation name.
pub fn op_suite() -> Vec<(&'static str, f64)> {
    vec![
        ("matmul", op_error(1, vec![rt(1, &[5, 4]), rt(2, &[4, 3])], |t, v| t.matmul(v[0], v[1]))),
        ("transpose", op_error(2, vec![rt(3, &[3, 4])], |t, v| t.transpose(v[0]))),
        ("reshape", op_error(3, vec![rt(4, &[3, 4])], |t, v| t.reshape(v[0], &[2, 6]))),
        ("add", op_error(4, vec![rt(5, &[2, 3, 4]), rt(6, &[2, 3, 4])], |t, v| t.add(v[0], v[1]))),
        (
            "add_broadcast",
            op_error(5, vec![rt(7, &[1, 3, 4, 2]), rt(8, &[4, 3, 4, 2])], |t, v| t.add(v[0], v[1])),
        ),
        ("relu", op_error(6, vec![rt(9, &[4, 5])], |t, v| Ok(t.relu(v[0])))),
        (
            "conv1d_temporal",
            op_error(7, vec![rt(10, &[3, 8, 2]), rt(11, &[5, 2, 3])], |t, v| {
                t.conv1d_temporal(v[0], v[1], 1)
            }),
        ),
        (
            "conv1d_temporal_stride2",
            op_error(8, vec![rt(12, &[3, 9, 2]), rt(13, &[3, 2, 2])], |t, v| {
                t.conv1d_temporal(v[0], v[1], 2)
            }),
        ),
        (
            "scale_joints",
            op_error(9, vec![rt(14, &[3]), rt(15, &[3, 4, 2])], |t, v| t.scale_joints(v[0], v[1])),
        ),
        (
            "channel_affine",
            op_error(10, vec![rt(16, &[3, 4, 2]), rt(17, &[2]), rt(18, &[2])], |t, v| {
                t.channel_affine(v[0], v[1], v[2])
            }),
        ),
        ("bias_add", op_error(11, vec![rt(19, &[5, 3]), rt(20, &[3])], |t, v| t.bias_add(v[0], v[1]))),
        (
            "joint_encoding",
            op_error(12, vec![rt(21, &[3, 4, 5, 2]), rt(22, &[4, 2])], |t, v| {
                t.add_joint_encoding(v[0], v[1])
            }),
        ),
        (
            "instances_to_channels",
            op_error(13, vec![rt(23, &[3, 2, 4, 2])], |t, v| t.instances_to_channels(v[0])),
        ),
        ("slice_last", op_error(14, vec![rt(24, &[3, 5, 6])], |t, v| t.slice_last(v[0], 1, 4))),
        (
            "concat_last",
            op_error(15, vec![rt(25, &[3, 5, 2]), rt(26, &[3, 5, 3])], |t, v| t.concat_last(&[v[0], v[1]])),
        ),
        ("subsample_frames", op_error(16, vec![rt(27, &[3, 7, 2])], |t, v| t.subsample_frames(v[0], 2))),
        ("mean_pool", op_error(17, vec![rt(28, &[3, 4, 2])], |t, v| Ok(t.mean_pool(v[0])))),
        ("max_leading", op_error(18, vec![rt(29, &[4, 3, 2, 2])], |t, v| t.max_leading(v[0]))),
        (
            "softmax_cross_entropy",
            op_error(19, vec![rt(30, &[5])], |t, v| t.softmax_cross_entropy(v[0], 2)),
        ),
    ]
}
