//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines appear in order; exits nonzero if any criterion fails.

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use common::*;
use loopcodec::codec::rdo::evaluate_candidates;
use loopcodec::codec::*;
use loopcodec::eval::{bd_rate, curve_of, sweep};
use loopcodec::nn::*;
use loopcodec::train::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const QPS: [u8; 4] = [22, 27, 32, 37];
const HELDOUT: [&str; 3] = ["gravel", "motorcycle", "rocket"];

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn heldout() -> Vec<(&'static str, Plane)> {
    HELDOUT
        .iter()
        .map(|&n| (n, read_pgm(fixture(&format!("heldout/{n}.pgm"))).unwrap()))
        .collect()
}

fn training_images() -> Vec<Plane> {
    read_manifest(fixture("train/manifest.txt"))
        .unwrap()
        .iter()
        .map(|p| read_pgm(p).unwrap())
        .collect()
}

struct Tally {
    failed: usize,
}

impl Tally {
    fn line(&mut self, name: &str, pass: bool, detail: String, started: Instant) {
        if !pass {
            self.failed += 1;
        }
        println!(
            "{} {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
}

fn parameter_counts(t: &mut Tally) {
    let s = Instant::now();
    let inc = build_inception_filter(12).count_parameters(ParamConvention::WithBias);
    let vr = build_vrcnn().count_parameters(ParamConvention::WithoutBias);
    let ar = build_arcnn().count_parameters(ParamConvention::WithoutBias);
    t.line(
        "parameter counts",
        (inc, vr, ar) == (475_233, 54_512, 106_448),
        format!("inception12 {inc} with bias, vrcnn {vr} and arcnn {ar} without"),
        s,
    );
}

fn conv_conformance(t: &mut Tally) {
    let s = Instant::now();
    let fwd = conv_forward_suite(0xC0);
    let bwd = conv_backward_suite(0xFD);
    t.line(
        "convolution conformance",
        fwd <= 1e-6 && bwd <= 1e-5,
        format!("50 forward cases max abs dev {fwd:.2e} (<= 1e-6), 20 f64 backward cases max rel err {bwd:.2e} (<= 1e-5)"),
        s,
    );
}

fn rd_sanity(t: &mut Tally) {
    let s = Instant::now();
    let mut images: Vec<(String, Plane)> = heldout().into_iter().map(|(n, p)| (n.to_string(), p)).collect();
    for p in read_manifest(fixture("train/manifest.txt")).unwrap() {
        images.push((p.file_stem().unwrap().to_string_lossy().into_owned(), read_pgm(&p).unwrap()));
    }
    let mut bad = Vec::new();
    for (name, img) in &images {
        let m = sweep(&Frame::monochrome(img.clone()), &QPS, &CodecConfig::new(22), &ModelSet::empty(0)).unwrap();
        let ok = m.windows(2).all(|w| w[1].bpp < w[0].bpp && w[1].psnr[0] < w[0].psnr[0]);
        if !ok {
            bad.push(name.clone());
        }
    }
    t.line(
        "RD sanity",
        bad.is_empty(),
        format!(
            "bpp and PSNR strictly decrease over QP 22..37 on {}/{} natural fixtures{}",
            images.len() - bad.len(),
            images.len(),
            if bad.is_empty() { String::new() } else { format!(", violated by {}", bad.join(" ")) }
        ),
        s,
    );
}

fn bd_oracle(t: &mut Tally) {
    let s = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xBD);
    let base = smooth_curve(&mut rng);
    let identical = bd_rate(&to_curve(&base), &to_curve(&base)).unwrap();
    let scaled: Vec<_> = base.iter().map(|&(r, p)| (r * 1.10, p)).collect();
    let ten = bd_rate(&to_curve(&base), &to_curve(&scaled)).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = smooth_curve(&mut rng);
        let b = perturbed(&mut rng, &a);
        let got = bd_rate(&to_curve(&a), &to_curve(&b)).unwrap();
        worst = worst.max((got - oracle_bd_rate(&a, &b)).abs());
    }
    t.line(
        "BD-rate oracle",
        identical.abs() <= 1e-9 && (ten - 10.0).abs() <= 0.01 && worst <= 0.05,
        format!("identical {identical:.2e} (0 +- 1e-9), x1.10 rate {ten:.4}% (10 +- 0.01), quadrature max diff {worst:.2e} (<= 0.05) over 20 curves"),
        s,
    );
}

/// Smooth synthetic luminance ramp with gentle curvature.
fn gradient(a: f64, b: f64, c: f64, d: f64, size: usize) -> Plane {
    Plane::from_fn(size, size, |x, y| {
        let (x, y) = (x as f64 - size as f64 / 2.0, y as f64 - size as f64 / 2.0);
        (a + b * x + c * y + d * (x * x + y * y)).round().clamp(0.0, 255.0) as u8
    })
}

fn random_gradient(rng: &mut ChaCha8Rng) -> Plane {
    gradient(
        rng.gen_range(40.0..200.0),
        rng.gen_range(-0.8..0.8),
        rng.gen_range(-0.8..0.8),
        rng.gen_range(-0.004..0.004),
        128,
    )
}

fn train_predictor() -> (NetworkGraph, WeightStore<f32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let imgs: Vec<Plane> = (0..32).map(|_| random_gradient(&mut rng)).collect();
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        batch_size: 16,
        steps: 300,
        seed: 3,
        ..TrainConfig::default()
    };
    let (g, out) = train_fc_predictor(&imgs, BLOCK_SIZE, 4, &[64], &cfg).unwrap();
    (g, out.weights)
}

/// Replays the encoder's block loop on the final reconstruction and checks
/// that every signalled mode is the first candidate of minimal RD cost.
fn chosen_modes_minimal(orig: &Plane, enc: &Encoded, models: &ModelSet, qp: u8) -> bool {
    let n = BLOCK_SIZE;
    let (model, k) = models.predictor_for(n).unwrap();
    let coder = BlockCoder::new(n, qp, rdo::DEFAULT_LAMBDA_SCALE);
    let recon = &enc.recon.y;
    let mut partial = Plane::filled(orig.width(), orig.height(), 0);
    let mut idx = 0;
    for y0 in (0..orig.height()).step_by(n) {
        for x0 in (0..orig.width()).step_by(n) {
            let refs = gather_references(&partial, x0, y0, n);
            let context = gather_context(&partial, &refs, x0, y0, k);
            let nn = NeuralInput { context: &context, model };
            let cands = evaluate_candidates(&orig.block(x0, y0, n), &refs, Some(&nn), &coder).unwrap();
            let best = cands.iter().map(|c| c.cost).fold(f64::INFINITY, f64::min);
            let first = cands.iter().position(|c| c.cost == best).unwrap();
            let chosen = &cands[first];
            if chosen.mode != enc.stats.modes[idx] || chosen.recon != recon.block(x0, y0, n) {
                return false;
            }
            partial.put_block(x0, y0, n, &recon.block(x0, y0, n));
            idx += 1;
        }
    }
    idx == enc.stats.modes.len()
}

fn neural_mode(t: &mut Tally, models: &ModelSet) {
    let s = Instant::now();
    let probe = gradient(90.0, 0.45, -0.3, 0.0025, 128);
    let mut selected = Vec::new();
    let mut neural_total = 0;
    let (mut exact, mut minimal) = (true, true);
    for qp in QPS {
        let enc = encode_frame(&Frame::monochrome(probe.clone()), &CodecConfig::new(qp).with_neural(true), models).unwrap();
        let dec = decode_frame(&enc.bytes, models).unwrap();
        exact &= dec.frame == enc.recon && dec.stats.modes == enc.stats.modes;
        minimal &= chosen_modes_minimal(&probe, &enc, models, qp);
        neural_total += enc.stats.neural;
        selected.push(format!("qp{qp} {}/{}", enc.stats.neural, enc.stats.blocks));
    }
    t.line(
        "neural-mode plumbing",
        neural_total > 0 && exact && minimal,
        format!(
            "neural blocks on the gradient image: {}; bit-exact decode {exact}; every chosen mode RD-minimal {minimal}",
            selected.join(", ")
        ),
        s,
    );
}

/// Returns the trained bank for reuse by the round-trip check.
fn learning_effect(t: &mut Tally) -> ModelBank {
    let s = Instant::now();
    let images = training_images();
    let held = heldout();
    let cfg = TrainConfig {
        batch_size: 8,
        steps: 500,
        seed: 0,
        qp: 37,
        arch: InceptionConfig::new(2),
        ..TrainConfig::default()
    };
    let (bank, _) = build_model_bank(&images, &QPS, &cfg).unwrap();

    // (a) the QP 37 band against its own initialization (band seed = seed + qp)
    let held_pairs = make_filter_dataset(&held.iter().map(|h| h.1.clone()).collect::<Vec<_>>(), 37).unwrap();
    let band_cfg = TrainConfig { seed: cfg.seed + 37, steps: 0, ..cfg.clone() };
    let init = train_filter(&held_pairs[..1], &cfg.graph(), &band_cfg).unwrap().weights;
    let before = patch_mse(&Model::new(cfg.graph(), init).unwrap(), &held_pairs).unwrap();
    let after = patch_mse(&Model::new(cfg.graph(), bank.select(37).weights.clone()).unwrap(), &held_pairs).unwrap();
    let reduction = (before - after) / before * 100.0;
    let unfiltered = baseline_mse(&held_pairs);
    t.line(
        "learning effect (a) held-out patch MSE",
        reduction >= 20.0,
        format!("init {before:.4e} -> trained {after:.4e}, reduction {reduction:.1}% (>= 20%); unfiltered {unfiltered:.4e}"),
        s,
    );

    // (b) filter on vs off with the 4-band bank, on every held-out image
    let s = Instant::now();
    let models = ModelSet::empty(1).with_filter(bank.clone());
    let mut all = true;
    let mut parts = Vec::new();
    for (name, img) in &held {
        let f = Frame::monochrome(img.clone());
        let off = sweep(&f, &QPS, &CodecConfig::new(22), &models).unwrap();
        let on = sweep(&f, &QPS, &CodecConfig::new(22).with_filter(true), &models).unwrap();
        let bd = bd_rate(&curve_of(&off, 0).unwrap(), &curve_of(&on, 0).unwrap()).unwrap();
        all &= bd <= 0.0;
        parts.push(format!("{name} {bd:+.2}%"));
    }
    t.line(
        "learning effect (b) BD-rate filter on vs off",
        all,
        format!("Y BD-rate {} (each <= 0)", parts.join(", ")),
        s,
    );
    bank
}

fn round_trip(t: &mut Tally, models: &ModelSet) {
    let s = Instant::now();
    let mut cases = 0;
    let mut mismatched = Vec::new();
    for (name, img) in heldout() {
        let f = Frame::monochrome(img);
        for qp in QPS {
            for filter in [false, true] {
                for neural in [false, true] {
                    let cfg = CodecConfig::new(qp).with_filter(filter).with_neural(neural);
                    let enc = encode_frame(&f, &cfg, models).unwrap();
                    let dec = decode_frame(&enc.bytes, models).unwrap();
                    cases += 1;
                    if dec.frame != enc.recon || dec.consumed != enc.bytes.len() {
                        mismatched.push(format!("{name}/qp{qp}/f{}n{}", filter as u8, neural as u8));
                    }
                }
            }
        }
    }

    let g = models.filter.as_ref().unwrap().graph().clone();
    let zero = ModelSet::empty(2).with_filter(
        ModelBank::new(g.clone(), QPS.iter().map(|&q| (q, WeightStore::zeros(&g))).collect()).unwrap(),
    );
    let mut zero_same = true;
    for (_, img) in heldout() {
        let f = Frame::monochrome(img);
        for qp in QPS {
            let off = encode_frame(&f, &CodecConfig::new(qp), &zero).unwrap();
            let on = encode_frame(&f, &CodecConfig::new(qp).with_filter(true), &zero).unwrap();
            zero_same &= on.bytes[frame::HEADER_LEN..] == off.bytes[frame::HEADER_LEN..] && on.recon == off.recon;
        }
    }
    t.line(
        "codec round trip",
        mismatched.is_empty() && zero_same,
        format!(
            "{}/{cases} encodes decode bit-exactly{}; zero-weight bank payload and recon identical to filter off: {zero_same}",
            cases - mismatched.len(),
            if mismatched.is_empty() { String::new() } else { format!(" (mismatch: {})", mismatched.join(" ")) }
        ),
        s,
    );
}

fn main() {
    let mut t = Tally { failed: 0 };
    parameter_counts(&mut t);
    conv_conformance(&mut t);
    rd_sanity(&mut t);
    bd_oracle(&mut t);

    let (pg, pw) = train_predictor();
    let predictor_only = ModelSet::empty(1).with_predictor(pg.clone(), pw.clone()).unwrap();
    neural_mode(&mut t, &predictor_only);

    let bank = learning_effect(&mut t);
    let full = ModelSet::empty(1).with_filter(bank).with_predictor(pg, pw).unwrap();
    round_trip(&mut t, &full);

    println!("acceptance: {} failed", t.failed);
    if t.failed > 0 {
        std::process::exit(1);
    }
}
