//! Finite-difference checks of every tape operation, the block, instance
//! pooling and the toy network.

mod common;

use common::{op_error, op_suite, rng, rt};
use rand::Rng;
use skelet_core::diff::{check_gradients, ParamStore, Tape, Tensor, Var};
use skelet_core::network::synthetic::toy_setup;
use skelet_core::network::build_network;
use skelet_core::pooling::{group_pool, IPConfig, InstancePooling};
use skelet_core::skeleton::{add_self_links, build_adjacency, normalize_adjacency, Normalization};
use skelet_core::transform::{
    ActivationOrder, BlockConfig, BlockKind, GroupedMappingBlock, PartitionMap,
};
use skelet_core::Result;

const OP_TOL: f64 = 1e-4;

#[test]
fn matmul_gradient() {
    let e = op_error(1, vec![rt(1, &[5, 4]), rt(2, &[4, 3])], |t, v| t.matmul(v[0], v[1]));
    assert!(e < 1e-6, "{e}");
}

#[test]
fn transpose_and_reshape_gradients() {
    let e = op_error(2, vec![rt(3, &[3, 4])], |t, v| {
        let a = t.transpose(v[0])?;
        t.reshape(a, &[2, 6])
    });
    assert!(e < OP_TOL, "{e}");
}

#[test]
fn conv_gradient_stride_one_and_two() {
    for stride in [1, 2] {
        let e = op_error(3, vec![rt(4, &[3, 8, 2]), rt(5, &[5, 2, 3])], |t, v| {
            t.conv1d_temporal(v[0], v[1], stride)
        });
        assert!(e < 1e-5, "stride {stride}: {e}");
    }
}

#[test]
fn relu_gradient() {
    let e = op_error(4, vec![rt(6, &[4, 5])], |t, v| Ok(t.relu(v[0])));
    assert!(e < OP_TOL, "{e}");
}

#[test]
fn add_gradient_same_shape_and_broadcast() {
    let e = op_error(5, vec![rt(7, &[2, 3, 4]), rt(8, &[2, 3, 4])], |t, v| t.add(v[0], v[1]));
    assert!(e < OP_TOL, "{e}");
    let e = op_error(6, vec![rt(9, &[1, 3, 4, 2]), rt(10, &[4, 3, 4, 2])], |t, v| {
        t.add(v[0], v[1])
    });
    assert!(e < OP_TOL, "{e}");
    let e = op_error(7, vec![rt(11, &[4, 3, 4, 2]), rt(12, &[1, 3, 4, 2])], |t, v| {
        t.add(v[0], v[1])
    });
    assert!(e < OP_TOL, "{e}");
}

#[test]
fn broadcast_add_backward_sums_over_instances() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::zeros(&[1, 2, 2, 1]));
    let b = tape.constant(Tensor::zeros(&[3, 2, 2, 1]));
    let s = tape.add(a, b).unwrap();
    assert_eq!(tape.value(s).shape(), &[3, 2, 2, 1]);
    let out = tape.weighted_sum(s, Tensor::full(&[3, 2, 2, 1], 1.0)).unwrap();
    let g = tape.backward(out).unwrap();
    assert!(g.wrt(a).unwrap().data().iter().all(|&v| v == 3.0));
    assert!(g.wrt(b).unwrap().data().iter().all(|&v| v == 1.0));
}

#[test]
fn softmax_cross_entropy_gradient() {
    for label in 0..4 {
        let e = op_error(8, vec![rt(13 + label as u64, &[4])], |t, v| {
            t.softmax_cross_entropy(v[0], label)
        });
        assert!(e < OP_TOL, "label {label}: {e}");
    }
}

#[test]
fn scale_joints_gradient() {
    let e = op_error(9, vec![rt(20, &[3]), rt(21, &[3, 4, 2])], |t, v| t.scale_joints(v[0], v[1]));
    assert!(e < OP_TOL, "{e}");
}

#[test]
fn channel_affine_and_bias_gradients() {
    let e = op_error(10, vec![rt(22, &[3, 4, 2]), rt(23, &[2]), rt(24, &[2])], |t, v| {
        t.channel_affine(v[0], v[1], v[2])
    });
    assert!(e < OP_TOL, "{e}");
    let e = op_error(11, vec![rt(25, &[5, 3]), rt(26, &[3])], |t, v| t.bias_add(v[0], v[1]));
    assert!(e < OP_TOL, "{e}");
}

#[test]
fn joint_encoding_gradient() {
    let e = op_error(12, vec![rt(27, &[3, 4, 5, 2]), rt(28, &[4, 2])], |t, v| {
        t.add_joint_encoding(v[0], v[1])
    });
    assert!(e < OP_TOL, "{e}");
}

#[test]
fn instances_to_channels_gradient() {
    let e = op_error(13, vec![rt(29, &[3, 2, 4, 2])], |t, v| t.instances_to_channels(v[0]));
    assert!(e < OP_TOL, "{e}");
}

#[test]
fn slice_concat_subsample_gradients() {
    let e = op_error(14, vec![rt(30, &[3, 5, 6]), rt(31, &[3, 5, 2])], |t, v| {
        let a = t.slice_last(v[0], 1, 4)?;
        t.concat_last(&[a, v[1]])
    });
    assert!(e < OP_TOL, "{e}");
    let e = op_error(15, vec![rt(32, &[3, 7, 2])], |t, v| t.subsample_frames(v[0], 2));
    assert!(e < OP_TOL, "{e}");
}

#[test]
fn pooling_gradients() {
    let e = op_error(16, vec![rt(33, &[3, 4, 2])], |t, v| Ok(t.mean_pool(v[0])));
    assert!(e < OP_TOL, "{e}");
    let e = op_error(17, vec![rt(34, &[4, 3, 2, 2])], |t, v| t.max_leading(v[0]));
    assert!(e < OP_TOL, "{e}");
}

fn small_block(kind: BlockKind, groups: usize, c_in: usize, c_out: usize, store: &mut ParamStore) -> GroupedMappingBlock {
    let layout = skelet_core::network::synthetic::chain_layout("g6", 6);
    let partition = PartitionMap::new(6, vec![vec![0, 1], vec![2, 3], vec![4, 5]]).unwrap();
    let base = add_self_links(&build_adjacency(&layout).unwrap()).unwrap();
    let (adj, part, stride) = match kind {
        BlockKind::Downsample => {
            let m = skelet_core::transform::init_downsample_matrix(&partition);
            let a = skelet_core::transform::transform_adjacency_dense(&base, &m).unwrap();
            (a, Some(partition), 2)
        }
        _ => (base, None, 1),
    };
    let adj = normalize_adjacency(&adj, Normalization::Row).unwrap();
    let cfg = BlockConfig {
        index: 1,
        kind,
        in_channels: c_in,
        out_channels: c_out,
        groups,
        stride,
        kernel_size: 3,
        partition: part,
        order: ActivationOrder::WeightThenActivation,
    };
    GroupedMappingBlock::new(cfg, 6, &adj, store, &mut rng(40)).unwrap()
}

fn block_error(kind: BlockKind, groups: usize, c_in: usize, c_out: usize) -> f64 {
    let mut store = ParamStore::new();
    let block = small_block(kind, groups, c_in, c_out, &mut store);
    // Move the mappings off their structured init.
    let mut r = rng(41);
    for p in store.iter_mut() {
        for v in p.value.data_mut() {
            *v += r.gen_range(-0.1..0.1);
        }
    }
    let x = rt(42, &[6, 4, c_in]);
    let out_shape = {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let y = block.forward(&mut tape, &store, xv).unwrap();
        tape.value(y).shape().to_vec()
    };
    let w = rt(43, &out_shape);
    check_gradients(&mut store, |tape, st| {
        let xv = tape.constant(x.clone());
        let y = block.forward(tape, st, xv)?;
        tape.weighted_sum(y, w.clone())
    })
    .unwrap()
    .max_rel_error
}

#[test]
fn block_gradients_every_kind() {
    for (kind, groups, c_in, c_out) in [
        (BlockKind::Normal, 2, 4, 4),
        (BlockKind::Normal, 1, 4, 6),
        (BlockKind::Downsample, 2, 4, 8),
        (BlockKind::Baseline, 1, 4, 4),
    ] {
        let e = block_error(kind, groups, c_in, c_out);
        assert!(e < OP_TOL, "{kind:?} K={groups}: {e}");
    }
}

#[test]
fn toy_network_end_to_end_gradient() {
    let (cfg, layout, parts) = toy_setup();
    let net = build_network(&cfg, &layout, &parts, true, 3).unwrap();
    let x = rt(50, &[cfg.joints[0], cfg.frames, cfg.in_channels]);
    let report = net.gradcheck(&x, 1).unwrap();
    assert!(report.max_rel_error < 1e-3, "{report:?}");
}

fn ip_setup(persons: usize) -> (ParamStore, InstancePooling) {
    let mut store = ParamStore::new();
    let cfg = IPConfig {
        persons,
        channels: 8,
        crop: true,
    };
    let ip = InstancePooling::new(&cfg, 4, 3, &mut store, 7).unwrap();
    let mut r = rng(8);
    for p in store.iter_mut() {
        for v in p.value.data_mut() {
            *v += r.gen_range(-0.3..0.3);
        }
    }
    (store, ip)
}

fn ip_error(part: &str) -> f64 {
    let (mut store, ip) = ip_setup(3);
    let x = rt(60, &[3, 4, 5, 3]);
    let run = |tape: &mut Tape, st: &ParamStore| -> Result<Var> {
        let xv = tape.constant(x.clone());
        match part {
            "embed" => ip.embed(tape, st, xv),
            "concat_pool" => {
                let y = ip.embed(tape, st, xv)?;
                ip.concat_pool(tape, st, y)
            }
            _ => ip.forward(tape, st, xv),
        }
    };
    let shape = {
        let mut tape = Tape::new();
        let y = run(&mut tape, &store).unwrap();
        tape.value(y).shape().to_vec()
    };
    let w = rt(61, &shape);
    check_gradients(&mut store, |tape, st| {
        let y = run(tape, st)?;
        tape.weighted_sum(y, w.clone())
    })
    .unwrap()
    .max_rel_error
}

#[test]
fn instance_pooling_gradients() {
    for part in ["embed", "concat_pool", "instance_pool"] {
        let e = ip_error(part);
        assert!(e < OP_TOL, "{part}: {e}");
    }
}

#[test]
fn group_pool_gradient_through_tape() {
    let e = op_error(18, vec![rt(70, &[3, 4, 2, 3])], |t, v| group_pool(t, v[0]));
    assert!(e < OP_TOL, "{e}");
}

#[test]
fn every_operation_in_the_suite() {
    for (name, e) in op_suite() {
        assert!(e < OP_TOL, "{name}: {e}");
    }
}
