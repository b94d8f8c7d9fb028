use loopcodec::nn::*;
use loopcodec::tensor::fd::{central_difference, relative_error};
use loopcodec::tensor::{Shape, Tensor};
use loopcodec::train::mse_loss;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain `c x h x w` feature maps for the oracle.
type Maps = Vec<Vec<Vec<f64>>>;

fn maps_of(t: &Tensor<f64>) -> Maps {
    let s = t.shape();
    (0..s.channels)
        .map(|c| (0..s.height).map(|i| (0..s.width).map(|j| t.get(c, i, j)).collect()).collect())
        .collect()
}

/// Zero-padded "same" convolution straight from the weight layout
/// `[out][in][kh][kw]`, optionally followed by ReLU.
fn conv(x: &Maps, p: &Param<f64>, relu: bool) -> Maps {
    let (o, c, kh, kw) = (p.dims[0], p.dims[1], p.dims[2], p.dims[3]);
    assert_eq!(c, x.len());
    let (h, w) = (x[0].len(), x[0][0].len());
    let mut out = vec![vec![vec![0.0; w]; h]; o];
    for oc in 0..o {
        for i in 0..h {
            for j in 0..w {
                let mut acc = p.bias[oc];
                for ic in 0..c {
                    for u in 0..kh {
                        for v in 0..kw {
                            let si = i as isize + u as isize - (kh / 2) as isize;
                            let sj = j as isize + v as isize - (kw / 2) as isize;
                            if si >= 0 && sj >= 0 && (si as usize) < h && (sj as usize) < w {
                                let wt = p.weights[((oc * c + ic) * kh + u) * kw + v];
                                acc += wt * x[ic][si as usize][sj as usize];
                            }
                        }
                    }
                }
                out[oc][i][j] = if relu { acc.max(0.0) } else { acc };
            }
        }
    }
    out
}

fn cat(parts: &[&Maps]) -> Maps {
    parts.iter().flat_map(|p| p.iter().cloned()).collect()
}

fn add(a: &Maps, b: &Maps) -> Maps {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(r, s)| r.iter().zip(s).map(|(u, v)| u + v).collect()).collect())
        .collect()
}

fn inception_oracle(s: &WeightStore<f64>, blocks: usize, x: &Maps) -> Maps {
    let p = |id: &str| s.get(id).unwrap_or_else(|| panic!("no {id}"));
    let mut h = conv(&conv(x, p("pre1"), true), p("pre2"), true);
    for i in 1..=blocks {
        let q = |n: &str| p(&format!("block{i}.{n}"));
        let a = conv(&h, q("a1x1"), true);
        let b = conv(&h, q("b1x1"), true);
        let (b13, b31) = (conv(&b, q("b1x3"), true), conv(&b, q("b3x1"), true));
        let c = conv(&conv(&h, q("c1x1"), true), q("c3x3"), true);
        let (c13, c31) = (conv(&c, q("c1x3"), true), conv(&c, q("c3x1"), true));
        h = cat(&[&a, &b13, &b31, &c13, &c31]);
    }
    add(&conv(&h, p("post"), false), x)
}

fn vrcnn_oracle(s: &WeightStore<f64>, x: &Maps) -> Maps {
    let p = |id: &str| s.get(id).unwrap();
    let l1 = conv(x, p("layer1"), true);
    let l2 = cat(&[&conv(&l1, p("layer2.5x5"), true), &conv(&l1, p("layer2.3x3"), true)]);
    let l3 = cat(&[&conv(&l2, p("layer3.3x3"), true), &conv(&l2, p("layer3.1x1"), true)]);
    add(&conv(&l3, p("layer4"), false), x)
}

fn arcnn_oracle(s: &WeightStore<f64>, x: &Maps) -> Maps {
    let p = |id: &str| s.get(id).unwrap();
    let h = conv(&conv(&conv(x, p("extract"), true), p("enhance"), true), p("map"), true);
    conv(&h, p("reconstruct"), false)
}

fn fc_oracle(s: &WeightStore<f64>, layers: &[&str], x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    for (li, id) in layers.iter().enumerate() {
        let p = s.get(id).unwrap();
        let (o, i) = (p.dims[0], p.dims[1]);
        v = (0..o)
            .map(|r| {
                let y = p.bias[r] + (0..i).map(|c| p.weights[r * i + c] * v[c]).sum::<f64>();
                if li + 1 < layers.len() {
                    y.max(0.0)
                } else {
                    y
                }
            })
            .collect();
    }
    v
}

/// Xavier weights plus random nonzero biases, so bias paths are exercised.
fn random_store(graph: &NetworkGraph, seed: u64) -> WeightStore<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = WeightStore::<f64>::xavier(graph, &mut rng);
    for (_, p) in s.iter_mut() {
        for b in p.bias.iter_mut() {
            *b = rng.gen_range(-0.1..0.1);
        }
    }
    s
}

fn random_input(rng: &mut ChaCha8Rng, shape: Shape) -> Tensor<f64> {
    Tensor::from_fn(shape, |_, _, _| rng.gen_range(0.0..1.0))
}

fn max_diff(a: &Maps, t: &Tensor<f64>) -> f64 {
    let m = maps_of(t);
    a.iter()
        .flatten()
        .flatten()
        .zip(m.iter().flatten().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn check_against_oracle(graph: &NetworkGraph, oracle: impl Fn(&WeightStore<f64>, &Maps) -> Maps, seed: u64) {
    let store = random_store(graph, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5);
    let x = random_input(&mut rng, Shape::new(1, 7, 9));
    let want = oracle(&store, &maps_of(&x));

    let got64 = forward(graph, &store, &x).unwrap();
    assert!(max_diff(&want, &got64) < 1e-10, "{}: f64 path", graph.arch());

    let got32 = forward(graph, &store.cast::<f32>(), &x.cast::<f32>()).unwrap();
    assert!(max_diff(&want, &got32.cast::<f64>()) < 1e-4, "{}: f32 path", graph.arch());
}

#[test]
fn inception_matches_hand_written_oracle() {
    for (blocks, pre, br) in [(1, 6, 3), (2, 8, 4), (0, 5, 2)] {
        let cfg = InceptionConfig {
            blocks,
            pre_maps: pre,
            branch_maps: br,
        };
        check_against_oracle(&build_inception(cfg), |s, x| inception_oracle(s, blocks, x), blocks as u64);
    }
}

#[test]
fn baselines_match_hand_written_oracles() {
    check_against_oracle(&build_vrcnn(), vrcnn_oracle, 21);
    check_against_oracle(&build_arcnn(), arcnn_oracle, 22);
}

#[test]
fn fc_predictor_matches_oracle() {
    let g = build_fc_predictor(8, 4, &[32, 16]).unwrap();
    let store = random_store(&g, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let len = context_len(8, 4);
    let x: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0)).collect();
    let want = fc_oracle(&store, &["fc1", "fc2", "out"], &x);
    let t = Tensor::new(Shape::new(len, 1, 1), x).unwrap();
    let got = forward(&g, &store, &t).unwrap();
    assert_eq!(got.data().len(), 64);
    for (a, b) in want.iter().zip(got.data()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn published_parameter_counts() {
    use ParamConvention::*;
    assert_eq!(build_inception_filter(12).count_parameters(WithBias), 475_233);
    assert_eq!(build_vrcnn().count_parameters(WithoutBias), 54_512);
    assert_eq!(build_arcnn().count_parameters(WithoutBias), 106_448);
}

/// Backpropagation through the whole reduced network against central
/// differences of the MSE loss, at 20 random parameters.
#[test]
fn reduced_network_gradients_match_finite_differences() {
    let cfg = InceptionConfig {
        blocks: 2,
        pre_maps: 6,
        branch_maps: 3,
    };
    let graph = build_inception(cfg);
    let store = random_store(&graph, 77);
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    let x = random_input(&mut rng, Shape::new(1, 6, 6));
    let target = random_input(&mut rng, Shape::new(1, 6, 6));

    let model = Model::new(graph.clone(), store.clone()).unwrap();
    let trace = model.trace(&x).unwrap();
    let (_, g) = mse_loss(trace.output(), &target).unwrap();
    let (grads, grad_in) = model.backward(&trace, &g).unwrap();

    let loss_with = |s: &WeightStore<f64>, x: &Tensor<f64>| {
        mse_loss(&forward(&graph, s, x).unwrap(), &target).unwrap().0
    };

    let ids: Vec<String> = store.iter().map(|(id, _)| id.to_string()).collect();
    let mut checked = 0;
    let mut worst = 0.0f64;
    while checked < 20 {
        let id = &ids[rng.gen_range(0..ids.len())];
        let p = store.get(id).unwrap();
        let use_bias = rng.gen_bool(0.3);
        let len = if use_bias { p.bias.len() } else { p.weights.len() };
        let idx = rng.gen_range(0..len);
        let analytic = if use_bias {
            grads.get(id).unwrap().bias[idx]
        } else {
            grads.get(id).unwrap().weights[idx]
        };
        if analytic.abs() < 1e-9 {
            // dead ReLU paths carry no signal to compare
            continue;
        }
        let base = if use_bias { p.bias.clone() } else { p.weights.clone() };
        let num = central_difference(
            |v| {
                let mut s = store.clone();
                let q = s.get_mut(id).unwrap();
                if use_bias {
                    q.bias.copy_from_slice(v);
                } else {
                    q.weights.copy_from_slice(v);
                }
                loss_with(&s, &x)
            },
            &base,
            &[idx],
            1e-5,
        )[0];
        worst = worst.max(relative_error(num, analytic));
        checked += 1;
    }
    assert!(worst <= 1e-4, "worst relative error {worst}");

    let xs = x.data().to_vec();
    let num = central_difference(
        |v| loss_with(&store, &Tensor::new(x.shape(), v.to_vec()).unwrap()),
        &xs,
        &[0, 7, 20, 35],
        1e-5,
    );
    for (n, &i) in num.iter().zip(&[0usize, 7, 20, 35]) {
        assert!(relative_error(*n, grad_in.data()[i]) <= 1e-4);
    }
}

#[test]
fn zero_weights_are_identity_for_residual_nets() {
    let g = build_inception(InceptionConfig {
        blocks: 1,
        pre_maps: 4,
        branch_maps: 2,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_input(&mut rng, Shape::new(1, 5, 5));
    assert_eq!(forward(&g, &WeightStore::zeros(&g), &x).unwrap(), x);
}

#[test]
fn weight_file_rejects_wrong_architecture() {
    let dir = tempfile::tempdir().unwrap();
    let g = build_vrcnn();
    let path = dir.path().join("v.nnwt");
    save_weights(&WeightStore::zeros(&g), &g, &path).unwrap();
    assert!(load_weights_for(&path, &g).is_ok());
    assert!(matches!(
        load_weights_for(&path, &build_arcnn()),
        Err(loopcodec::Error::Architecture { .. })
    ));
}

#[test]
fn exported_vectors_reproduce() {
    let g = build_inception(InceptionConfig {
        blocks: 1,
        pre_maps: 4,
        branch_maps: 2,
    });
    let store = random_store(&g, 9).cast::<f32>();
    let model = Model::new(g, store).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cases: Vec<VectorCase> = (0..3)
        .map(|_| {
            let input: Vec<f32> = (0..1024).map(|_| rng.gen_range(0.0..1.0)).collect();
            let t = Tensor::new(Shape::new(1, 32, 32), input.clone()).unwrap();
            VectorCase {
                input,
                output: model.forward(&t).unwrap().data().to_vec(),
            }
        })
        .collect();
    let bytes = encode_vectors(&cases).unwrap();
    assert_eq!(&bytes[..4], b"NNTV");
    assert_eq!(bytes.len(), 8 + 3 * 2048 * 4);
    let back = decode_vectors(&bytes).unwrap();
    assert_eq!(back, cases);
    assert_eq!(max_vector_deviation(&model, &back).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weight_files_round_trip(seed in any::<u64>(), blocks in 0usize..3) {
        let g = build_inception(InceptionConfig { blocks, pre_maps: 3, branch_maps: 2 });
        let s = random_store(&g, seed).cast::<f32>();
        let loaded = decode_weights(&encode_weights(&s, &g).unwrap()).unwrap();
        prop_assert_eq!(loaded.arch, g.arch().to_string());
        prop_assert_eq!(loaded.store, s);
    }

    #[test]
    fn bank_bands_partition_qp_range(mut qps in proptest::collection::btree_set(0u8..=51, 1..6)) {
        let trained: Vec<u8> = std::mem::take(&mut qps).into_iter().collect();
        let ranges = band_ranges(&trained).unwrap();
        prop_assert_eq!(*ranges[0].start(), 0);
        prop_assert_eq!(*ranges.last().unwrap().end(), MAX_QP);
        for (w, q) in ranges.windows(2).zip(&trained) {
            prop_assert_eq!(*w[1].start(), *w[0].end() + 1);
            prop_assert!(w[0].contains(q));
        }
        prop_assert!(ranges.last().unwrap().contains(trained.last().unwrap()));
    }
}
