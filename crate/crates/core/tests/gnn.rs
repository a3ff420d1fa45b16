mod common;

use mpisentinel_core::gnn::*;
use mpisentinel_core::*;
use common::oracles::fd_check;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn two_fn_graph() -> ProgramGraph {
    let text = common::read(&common::fixtures().join("ir/two_fn_call.ll"));
    build_graph(&parse_ir(&text).unwrap()).unwrap()
}

fn add_loop_graph() -> ProgramGraph {
    let text = common::read(&common::fixtures().join("ir/add_loop.ll"));
    build_graph(&parse_ir(&text).unwrap()).unwrap()
}

fn labels(names: &[&str]) -> Vec<ClassLabel> {
    names.iter().map(|n| ClassLabel(n.to_string())).collect()
}

fn small_config(seed: u64) -> GnnConfig {
    GnnConfig { layer_sizes: [5, 4, 3], node_embed_dim: 4, fc_hidden: 3, rng_seed: seed, ..Default::default() }
}

fn m(rows: usize, cols: usize, v: &[f64]) -> Matrix {
    Matrix::from_vec(rows, cols, v.to_vec())
}

// mpmath at 50 digits: -(l[t] - max - log(sum(exp(l - max))))
#[test]
fn cross_entropy_matches_high_precision_reference() {
    let cases: [(&[f64], usize, f64); 6] = [
        (&[-28.180024, -19.036308, -22.707714, 23.533243], 2, 46.24095699999999809),
        (&[-19.421312, 25.514442, 0.779433, 2.997228, -24.816476, 12.542582], 1, 2.3250201633476304002e-6),
        (&[-11.103231, -3.033198, 3.885647, 12.553597], 0, 23.657000166712347155),
        (&[28.621984, 17.93035, 3.304338, 16.908334], 2, 25.317676915249944704),
        (&[0.522922, -0.296075, 28.215428, 16.055752, -15.56226], 2, 5.2374366931527622232e-6),
        (&[-5.946417, -10.741087, -11.85901, -25.773549], 1, 4.8055890639101524077),
    ];
    for (logits, t, want) in cases {
        let got = cross_entropy(logits, t).unwrap();
        assert!((got - want).abs() < 1e-10, "{logits:?}: {got} vs {want}");
    }
    assert!((cross_entropy(&[0.3; 5], 4).unwrap() - 5f64.ln()).abs() < 1e-15);
    assert!(cross_entropy(&[1000.0, 0.0], 0).unwrap().abs() < 1e-300);
    assert!(matches!(cross_entropy(&[1.0], 1), Err(GnnError::ClassOutOfRange { .. })));
}

#[test]
fn gatv2_three_node_hand_case() {
    // h = rows [1,0], [0,1], [1,1]; edges 0->2, 1->2, 2->0
    let h = m(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    let w_src = m(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    let w_dst = m(2, 2, &[-1.0, 1.0, 0.0, 0.0]);
    let att = m(2, 1, &[1.0, -1.0]);
    let w_msg = m(2, 2, &[2.0, 0.0, 0.0, 1.0]);
    let p = RelationParams { w_src: &w_src, w_dst: &w_dst, att: &att, w_msg: &w_msg };
    let out = gatv2_relation(&h, &h, &[(0, 2), (1, 2), (2, 0)], &p, 0.2).unwrap();
    // by hand: hd*Wdst = [-1,1] for node 2
    //   edge 0->2: z = [1,0]+[-1,1] = [0,1], leaky [0,1], score -1
    //   edge 1->2: z = [0,1]+[-1,1] = [-1,2], leaky [-0.2,2], score -2.2
    //   alpha = sigmoid(1.2), 1 - sigmoid(1.2); messages [2,0] and [0,1]
    // node 0 has the single edge 2->0: message [1,1]*Wmsg = [2,1]
    let want = [2.0, 1.0, 0.0, 0.0, 1.5370495669980352701, 0.23147521650098236497];
    for (g, w) in out.data.iter().zip(want) {
        assert!((g - w).abs() < 1e-12, "{:?}", out.data);
    }
}

#[test]
fn gatv2_single_edge_and_symmetric_pair() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut r = |n: usize| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    let (w_src, w_dst, att, w_msg) = (m(3, 2, &r(6)), m(3, 2, &r(6)), m(2, 1, &r(2)), m(3, 2, &r(6)));
    let p = RelationParams { w_src: &w_src, w_dst: &w_dst, att: &att, w_msg: &w_msg };
    let src = m(2, 3, &[0.5, -1.0, 2.0, 0.5, -1.0, 2.0]);
    let dst = m(1, 3, &r(3));
    let msg = src.matmul(&w_msg);
    let one = gatv2_relation(&src, &dst, &[(0, 0)], &p, 0.2).unwrap();
    assert_eq!(one.data, msg.row(0).to_vec());
    // identical sources: alpha 0.5 each, so the output is the common message
    let two = gatv2_relation(&src, &dst, &[(0, 0), (1, 0)], &p, 0.2).unwrap();
    for (a, b) in two.data.iter().zip(msg.row(0)) {
        assert!((a - b).abs() < 1e-15);
    }
}

// ---- straight-line oracle: plain loops, no tape ----

fn vec_mat(v: &[f64], w: &Matrix) -> Vec<f64> {
    (0..w.cols).map(|c| (0..w.rows).map(|r| v[r] * w.at(r, c)).sum()).collect()
}

fn relation_for(g: &ProgramGraph, src: usize, dst: usize, edge: Option<EdgeType>) -> usize {
    let (s, d) = (g.nodes[src].node_type, g.nodes[dst].node_type);
    RELATIONS.iter().position(|r| r.src == s && r.dst == d && r.edge == edge).unwrap()
}

/// One hetero layer by per-destination double loop.
fn oracle_layer(model: &GnnModel, g: &ProgramGraph, h: &[Vec<f64>], layer: usize) -> Vec<Vec<f64>> {
    let dout = model.config.layer_sizes[layer];
    let slope = model.config.leaky_slope;
    let mut incoming: Vec<Vec<(usize, usize)>> = vec![Vec::new(); g.nodes.len()];
    for e in &g.edges {
        incoming[e.dst].push((e.src, relation_for(g, e.src, e.dst, Some(e.edge_type))));
    }
    for n in &g.nodes {
        incoming[n.id].push((n.id, relation_for(g, n.id, n.id, None)));
    }
    let mut out = Vec::new();
    for j in 0..g.nodes.len() {
        let mut pre = vec![0.0; dout];
        for r in 0..RELATIONS.len() {
            let edges: Vec<usize> = incoming[j].iter().filter(|e| e.1 == r).map(|e| e.0).collect();
            if edges.is_empty() {
                continue;
            }
            let p = model.relation_params(layer, r);
            let hd = vec_mat(&h[j], p.w_dst);
            let scores: Vec<f64> = edges
                .iter()
                .map(|&i| {
                    let hs = vec_mat(&h[i], p.w_src);
                    (0..dout)
                        .map(|k| {
                            let z = hs[k] + hd[k];
                            let z = if z > 0.0 { z } else { slope * z };
                            z * p.att.at(k, 0)
                        })
                        .sum()
                })
                .collect();
            let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let den: f64 = scores.iter().map(|s| (s - mx).exp()).sum();
            for (&i, s) in edges.iter().zip(&scores) {
                let a = (s - mx).exp() / den;
                for (k, x) in vec_mat(&h[i], p.w_msg).into_iter().enumerate() {
                    pre[k] += a * x;
                }
            }
        }
        out.push(pre.into_iter().map(|x| if x > 0.0 { x } else { x.exp_m1() }).collect());
    }
    out
}

fn oracle_forward(model: &GnnModel, g: &ProgramGraph) -> (Vec<Vec<Vec<f64>>>, Vec<f64>) {
    let emb = model.embedding();
    let mut h: Vec<Vec<f64>> = g.nodes.iter().map(|n| emb.row(model.token_index(&n.token)).to_vec()).collect();
    let mut layers = Vec::new();
    for l in 0..3 {
        h = oracle_layer(model, g, &h, l);
        layers.push(h.clone());
    }
    let pooled: Vec<f64> = (0..h[0].len()).map(|k| h.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let [w1, b1, w2, b2] = model.fc();
    let z: Vec<f64> = vec_mat(&pooled, w1).iter().zip(&b1.data).map(|(a, b)| (a + b).max(0.0)).collect();
    let logits = vec_mat(&z, w2).iter().zip(&b2.data).map(|(a, b)| a + b).collect();
    (layers, logits)
}

fn seeded_model(cfg: GnnConfig, graphs: &[&ProgramGraph], classes: &[&str]) -> GnnModel {
    GnnModel::for_graphs(cfg, graphs.iter().copied(), labels(classes)).unwrap()
}

#[test]
fn forward_matches_straight_line_oracle() {
    for g in [two_fn_graph(), add_loop_graph()] {
        for seed in 0..3 {
            let model = seeded_model(GnnConfig { rng_seed: seed, ..Default::default() }, &[&g], &["a", "b", "c"]);
            let (layers, want) = oracle_forward(&model, &g);
            let got = forward(&model, &g).unwrap();
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-7, "{got:?} vs {want:?}");
            }
            // each hetero layer against the double-loop accumulation
            let batch = GraphBatch::new(&model, &[&g]).unwrap();
            let mut tape = Tape::new();
            let (vars, _) = forward_on_tape(&model, &batch, &mut tape);
            for (v, oracle) in vars.iter().zip(&layers) {
                let t = tape.value(*v);
                for (j, row) in oracle.iter().enumerate() {
                    for (a, b) in t.row(j).iter().zip(row) {
                        assert!((a - b).abs() < 1e-9);
                    }
                }
            }
        }
    }
}

#[test]
fn finite_difference_gradient_check_every_block() {
    let g = two_fn_graph();
    assert!(g.nodes.len() <= 20);
    let cfg = small_config(11);
    let mut model = seeded_model(cfg, &[&g], &["a", "b", "c"]);
    // give the zero-initialized biases non-trivial values too
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for p in model.params.iter_mut() {
        if p.data.iter().all(|x| *x == 0.0) {
            p.data.iter_mut().for_each(|x| *x = rng.gen_range(-0.5..0.5));
        }
    }
    let (worst, at) = fd_check(&mut model, &g, 1, |_, len| (0..len).collect());
    assert!(worst < 1e-3, "{at}");
}

#[test]
fn gradient_check_default_dimensions_sampled() {
    let g = two_fn_graph();
    let mut model = seeded_model(GnnConfig { rng_seed: 4, ..Default::default() }, &[&g], &["a", "b"]);
    let rng = std::cell::RefCell::new(ChaCha8Rng::seed_from_u64(9));
    let (worst, at) = fd_check(&mut model, &g, 0, |_, len| (0..4).map(|_| rng.borrow_mut().gen_range(0..len)).collect());
    assert!(worst < 1e-3, "{at}");
}

#[test]
fn node_permutation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for g in [two_fn_graph(), add_loop_graph()] {
        let model = seeded_model(GnnConfig { rng_seed: 2, ..Default::default() }, &[&g], &["a", "b"]);
        let base = forward(&model, &g).unwrap();
        for _ in 0..5 {
            let mut perm: Vec<usize> = (0..g.nodes.len()).collect();
            rand::seq::SliceRandom::shuffle(&mut perm[..], &mut rng);
            let p = g.permuted(&perm);
            let got = forward(&model, &p).unwrap();
            for (a, b) in got.iter().zip(&base) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn batched_losses_equal_individual_losses() {
    let graphs = [two_fn_graph(), add_loop_graph(), two_fn_graph()];
    let refs: Vec<&ProgramGraph> = graphs.iter().collect();
    let model = seeded_model(GnnConfig { rng_seed: 8, ..Default::default() }, &refs, &["a", "b", "c"]);
    let classes = [2, 0, 1];
    let batched = batch_losses(&model, &refs, &classes).unwrap();
    for (i, g) in refs.iter().enumerate() {
        let single = batch_losses(&model, &[g], &[classes[i]]).unwrap()[0];
        assert!((batched[i] - single).abs() < 1e-9);
    }
}

fn synthetic_graphs(max: usize) -> Vec<(String, ClassLabel, ProgramGraph)> {
    let dir = common::fixtures().join("synthetic/mbi");
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "ll"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .take(max)
        .map(|p| {
            let stem = p.file_stem().unwrap().to_str().unwrap().to_string();
            let label = ClassLabel(stem.split('_').next().unwrap().to_string());
            let g = build_graph(&parse_ir(&common::read(&p)).unwrap()).unwrap();
            (stem, label, g)
        })
        .collect()
}

#[test]
fn training_is_deterministic() {
    let items = synthetic_graphs(usize::MAX);
    let items: Vec<_> = items.iter().step_by(6).collect();
    let data: Vec<(&ProgramGraph, ClassLabel)> = items.iter().map(|i| (&i.2, i.1.clone())).collect();
    let mut space: Vec<ClassLabel> = data.iter().map(|d| d.1.clone()).collect();
    space.sort();
    space.dedup();
    let cfg = GnnConfig { rng_seed: 3, epochs: 3, batch_size: 4, ..Default::default() };
    let run = || {
        let m = GnnModel::for_graphs(cfg.clone(), data.iter().map(|d| d.0), space.clone()).unwrap();
        train(m, &data, &cfg).unwrap()
    };
    let (m1, l1) = run();
    let (m2, l2) = run();
    assert_eq!(l1, l2);
    assert_eq!(m1.to_json(), m2.to_json());
}

fn has_barrier(g: &ProgramGraph) -> bool {
    g.nodes.iter().any(|n| n.token == "call:MPI_Barrier")
}

#[test]
fn two_graph_barrier_dataset_is_learned() {
    let with = add_loop_graph();
    let without = two_fn_graph();
    // brute-force check that the token separates the two labels
    assert!(has_barrier(&with) && !has_barrier(&without));
    let data = vec![(&with, ClassLabel("Correct".into())), (&without, ClassLabel("Incorrect".into()))];
    let space = labels(&["Correct", "Incorrect"]);
    for seed in 0..5 {
        let cfg = GnnConfig { rng_seed: seed, ..Default::default() };
        let m = GnnModel::for_graphs(cfg.clone(), [&with, &without], space.clone()).unwrap();
        let (m, _) = train(m, &data, &cfg).unwrap();
        for (g, l) in &data {
            assert_eq!(&predict_gnn(&m, g).unwrap(), l, "seed {seed}");
        }
    }
}

#[test]
fn synthetic_loss_decreases_over_ten_epochs() {
    let items = synthetic_graphs(usize::MAX);
    let data: Vec<(&ProgramGraph, ClassLabel)> = items.iter().map(|i| (&i.2, i.1.clone())).collect();
    let mut space: Vec<ClassLabel> = data.iter().map(|d| d.1.clone()).collect();
    space.sort();
    space.dedup();
    let mut passes = 0;
    for seed in 0..5 {
        let cfg = GnnConfig { rng_seed: seed, ..Default::default() };
        let m = GnnModel::for_graphs(cfg.clone(), data.iter().map(|d| d.0), space.clone()).unwrap();
        let (_, log) = train(m, &data, &cfg).unwrap();
        assert_eq!(log.len(), 10);
        if log[9].mean_loss < log[0].mean_loss {
            passes += 1;
        }
    }
    assert!(passes >= 4, "{passes}/5 seeds decreased");
}

#[test]
fn checkpoint_file_round_trip_keeps_predictions() {
    let g = two_fn_graph();
    let model = seeded_model(GnnConfig { rng_seed: 6, ..Default::default() }, &[&g], &["x", "y"]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let back = GnnModel::load(&path).unwrap();
    assert_eq!(forward(&back, &g).unwrap(), forward(&model, &g).unwrap());
}
