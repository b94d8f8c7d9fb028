use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use loopcodec::codec::{
    chroma_size, decode_stream, encode_frame, read_pgm, read_yuv420, write_pgm, write_yuv420_frames,
    yuv420_frame_count, CodecConfig, Frame, ModelSet, Plane,
};
use loopcodec::eval::{
    bd_psnr, bd_rate, bits_per_pixel, curve_of, emit_report, format_psnr, psnr, sweep, BdReport, Measurement,
    RdCurve, RdPoint,
};
use loopcodec::nn::{graph_from_tag, InceptionConfig, Op, ParamConvention};
use loopcodec::train::{
    build_model_bank_with, read_manifest, train_fc_predictor_with, write_loss_csv, TrainConfig,
};

use crate::config::{parse_list, FileConfig};
use crate::{
    BdrateArgs, CliError, DecodeArgs, EncodeArgs, EvalArgs, InfoArgs, RawDims, TrainCommon, TrainFilterArgs,
    TrainIntraArgs,
};

type CliResult<T = ()> = Result<T, CliError>;

const ENCODE_KEYS: &[&str] = &[
    "input", "output", "qp", "filter", "neural", "bank", "recon", "lambda-scale", "width", "height", "frames",
];
const DECODE_KEYS: &[&str] = &["input", "output", "bank"];
const TRAIN_KEYS: &[&str] = &[
    "manifest", "output", "steps", "lr", "batch", "seed", "bank-id", "log-every",
];
const FILTER_KEYS: &[&str] = &["qps", "blocks", "pre-maps", "branch-maps"];
const INTRA_KEYS: &[&str] = &["context", "hidden"];
const EVAL_KEYS: &[&str] = &[
    "input", "qps", "bank", "anchor-filter", "anchor-neural", "test-filter", "test-neural", "report-csv",
    "report-md", "points", "width", "height", "frames",
];

const DEFAULT_QPS: &str = "22,27,32,37";

fn required<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::input(format!("--{flag} is required")))
}

fn load_bank(path: Option<&Path>) -> CliResult<ModelSet> {
    match path {
        None => Ok(ModelSet::empty(0)),
        Some(p) => {
            if !p.join("bank.cfg").exists() {
                return Err(CliError::input(format!("{}: not a model bank directory", p.display())));
            }
            ModelSet::load_dir(p).map_err(|e| CliError::from(e).context(p.display()))
        }
    }
}

fn is_pgm(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// PGM images are one monochrome frame; anything else is raw YUV 4:2:0.
fn read_frames(path: &Path, dims: &RawDims) -> CliResult<Vec<Frame>> {
    let ctx = |e: loopcodec::Error| CliError::from(e).context(path.display());
    if !path.exists() {
        return Err(CliError::input(format!("{}: no such file", path.display())));
    }
    if is_pgm(path) {
        return Ok(vec![Frame::monochrome(read_pgm(path).map_err(ctx)?)]);
    }
    let (Some(w), Some(h)) = (dims.width, dims.height) else {
        return Err(CliError::input(format!(
            "{}: raw YUV input needs --width and --height",
            path.display()
        )));
    };
    if w == 0 || h == 0 {
        return Err(CliError::input("frame dimensions must be positive"));
    }
    let available = yuv420_frame_count(path, w, h).map_err(ctx)?;
    let count = dims.frames.unwrap_or(available);
    if count == 0 {
        return Err(CliError::input(format!("{}: no whole {w}x{h} frame", path.display())));
    }
    (0..count).map(|i| read_yuv420(path, w, h, i).map_err(ctx)).collect()
}

fn write_frames(path: &Path, frames: &[Frame]) -> CliResult {
    let ctx = |e: loopcodec::Error| CliError::from(e).context(path.display());
    if is_pgm(path) {
        if frames.len() != 1 {
            return Err(CliError::input(format!(
                "{}: PGM holds one frame, stream has {}",
                path.display(),
                frames.len()
            )));
        }
        return write_pgm(path, &frames[0].y).map_err(ctx);
    }
    let full: Vec<Frame> = frames
        .iter()
        .map(|f| match f.chroma {
            Some(_) => Ok(f.clone()),
            None => {
                let (cw, ch) = chroma_size(f.width(), f.height());
                Frame::yuv420(f.y.clone(), Plane::filled(cw, ch, 128), Plane::filled(cw, ch, 128))
            }
        })
        .collect::<Result<_, _>>()?;
    write_yuv420_frames(path, &full).map_err(ctx)
}

fn raw_dims(file: &FileConfig, d: &RawDims) -> CliResult<RawDims> {
    Ok(RawDims {
        width: file.pick("width", d.width)?,
        height: file.pick("height", d.height)?,
        frames: file.pick("frames", d.frames)?,
    })
}

fn mean_psnr(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn encode(a: EncodeArgs) -> CliResult {
    let file = FileConfig::load(a.config.as_deref(), ENCODE_KEYS)?;
    let input: PathBuf = required(file.pick("input", a.input)?, "input")?;
    let output: PathBuf = required(file.pick("output", a.output)?, "output")?;
    let mut cfg = CodecConfig::new(file.pick("qp", a.qp)?.unwrap_or(32))
        .with_filter(file.switch("filter", a.filter)?)
        .with_neural(file.switch("neural", a.neural)?);
    if let Some(s) = file.pick("lambda-scale", a.lambda_scale)? {
        cfg.lambda_scale = s;
    }
    cfg.validate()?;
    let recon_path: Option<PathBuf> = file.pick("recon", a.recon)?;
    let bank_path: Option<PathBuf> = file.pick("bank", a.bank)?;
    let dims = raw_dims(&file, &a.dims)?;

    let models = load_bank(bank_path.as_deref())?;
    let frames = read_frames(&input, &dims)?;
    let mut bytes = Vec::new();
    let mut recon = Vec::new();
    let mut bits = 0u64;
    let mut scores: Vec<Vec<f64>> = Vec::new();
    for f in &frames {
        let enc = encode_frame(f, &cfg, &models)?;
        bits += enc.payload_bits;
        let per_plane = f
            .planes()
            .iter()
            .zip(enc.recon.planes())
            .map(|(x, y)| psnr(x, y))
            .collect::<Result<Vec<_>, _>>()?;
        scores.push(per_plane);
        bytes.extend_from_slice(&enc.bytes);
        recon.push(enc.recon);
    }
    fs::write(&output, &bytes).map_err(|e| CliError::input(format!("{}: {e}", output.display())))?;
    if let Some(p) = recon_path {
        write_frames(&p, &recon)?;
    }
    let (w, h) = (frames[0].width(), frames[0].height());
    let mut line = format!(
        "frames={} qp={} bits={bits} bpp={:.6}",
        frames.len(),
        cfg.qp,
        bits_per_pixel(bits, w * frames.len(), h)
    );
    for (i, name) in ["y", "u", "v"].iter().enumerate().take(scores[0].len()) {
        let col: Vec<f64> = scores.iter().map(|s| s[i]).collect();
        line.push_str(&format!(" psnr_{name}={}", format_psnr(mean_psnr(&col))));
    }
    println!("{line}");
    Ok(())
}

pub fn decode(a: DecodeArgs) -> CliResult {
    let file = FileConfig::load(a.config.as_deref(), DECODE_KEYS)?;
    let input: PathBuf = required(file.pick("input", a.input)?, "input")?;
    let output: PathBuf = required(file.pick("output", a.output)?, "output")?;
    let bank_path: Option<PathBuf> = file.pick("bank", a.bank)?;
    let bytes = fs::read(&input).map_err(|e| CliError::input(format!("{}: {e}", input.display())))?;
    let models = load_bank(bank_path.as_deref())?;
    let decoded = decode_stream(&bytes, &models).map_err(|e| CliError::from_lib(e, true).context(input.display()))?;
    let frames: Vec<Frame> = decoded.into_iter().map(|d| d.frame).collect();
    write_frames(&output, &frames)?;
    println!("frames={} {}x{}", frames.len(), frames[0].width(), frames[0].height());
    Ok(())
}

struct TrainSetup {
    images: Vec<Plane>,
    output: PathBuf,
    cfg: TrainConfig,
    bank_id: Option<u8>,
    log_every: usize,
}

fn train_setup(c: &TrainCommon, extra: &[&str]) -> CliResult<(FileConfig, TrainSetup)> {
    let keys: Vec<&str> = TRAIN_KEYS.iter().chain(extra).copied().collect();
    let file = FileConfig::load(c.config.as_deref(), &keys)?;
    let manifest: PathBuf = required(file.pick("manifest", c.manifest.clone())?, "manifest")?;
    let output: PathBuf = required(file.pick("output", c.output.clone())?, "output")?;
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: file.pick("lr", c.lr)?.unwrap_or(d.learning_rate),
        batch_size: file.pick("batch", c.batch)?.unwrap_or(d.batch_size),
        steps: file.pick("steps", c.steps)?.unwrap_or(d.steps),
        seed: file.pick("seed", c.seed)?.unwrap_or(d.seed),
        ..d
    };
    cfg.validate()?;
    let bank_id = file.pick("bank-id", c.bank_id)?;
    let log_every = file.pick("log-every", c.log_every)?.unwrap_or(50);
    let paths = read_manifest(&manifest).map_err(|e| CliError::from(e).context(manifest.display()))?;
    let images = paths
        .iter()
        .map(|p| read_pgm(p).map_err(|e| CliError::from(e).context(p.display())))
        .collect::<CliResult<Vec<_>>>()?;
    Ok((
        file,
        TrainSetup {
            images,
            output,
            cfg,
            bank_id,
            log_every,
        },
    ))
}

/// Existing bank in `dir` (to keep its other half), or a fresh one.
fn bank_to_update(dir: &Path, id: Option<u8>) -> CliResult<ModelSet> {
    let mut set = if dir.join("bank.cfg").exists() {
        load_bank(Some(dir))?
    } else {
        ModelSet::empty(0)
    };
    if let Some(id) = id {
        set.id = id;
    }
    Ok(set)
}

fn progress(label: &str, every: usize, step: usize, loss: f64) {
    if every > 0 && step % every == 0 {
        eprintln!("{label} step {step} loss {loss:.6e}");
    }
}

pub fn train_filter(a: TrainFilterArgs) -> CliResult {
    let (file, mut s) = train_setup(&a.common, FILTER_KEYS)?;
    let qps: Vec<u8> = parse_list(&file.pick("qps", a.qps)?.unwrap_or_else(|| DEFAULT_QPS.into()))?;
    if qps.is_empty() {
        return Err(CliError::input("--qps is empty"));
    }
    let blocks = file.pick("blocks", a.blocks)?.unwrap_or(s.cfg.arch.blocks);
    let base = InceptionConfig::new(blocks);
    s.cfg.arch = InceptionConfig {
        blocks,
        pre_maps: file.pick("pre-maps", a.pre_maps)?.unwrap_or(base.pre_maps),
        branch_maps: file.pick("branch-maps", a.branch_maps)?.unwrap_or(base.branch_maps),
    };
    s.cfg.validate()?;
    let every = s.log_every;
    let (bank, curves) = build_model_bank_with(&s.images, &qps, &s.cfg, |qp, step, loss| {
        progress(&format!("qp{qp:02}"), every, step, loss)
    })?;
    let set = bank_to_update(&s.output, s.bank_id)?.with_filter(bank);
    set.save_dir(&s.output)?;
    for (band, losses) in set.filter.as_ref().unwrap().bands().iter().zip(&curves) {
        write_loss_csv(s.output.join(format!("loss_qp{:02}.csv", band.trained_qp)), losses)?;
        if let Some(l) = losses.last() {
            println!("qp{:02} final_loss={l:.6e}", band.trained_qp);
        }
    }
    println!("bank {} written to {}", set.id, s.output.display());
    Ok(())
}

pub fn train_intra(a: TrainIntraArgs) -> CliResult {
    let (file, s) = train_setup(&a.common, INTRA_KEYS)?;
    let k = file.pick("context", a.context)?.unwrap_or(4);
    let hidden: Vec<usize> = parse_list(&file.pick("hidden", a.hidden)?.unwrap_or_else(|| "128,128".into()))?;
    let n = loopcodec::codec::BLOCK_SIZE;
    let every = s.log_every;
    let (graph, out) = train_fc_predictor_with(&s.images, n, k, &hidden, &s.cfg, |step, loss| {
        progress("intra", every, step, loss)
    })?;
    let set = bank_to_update(&s.output, s.bank_id)?.with_predictor(graph, out.weights)?;
    set.save_dir(&s.output)?;
    write_loss_csv(s.output.join("loss_intra.csv"), &out.losses)?;
    if let Some(l) = out.losses.last() {
        println!("intra final_loss={l:.6e}");
    }
    println!("bank {} written to {}", set.id, s.output.display());
    Ok(())
}

/// Measurements of every input for one configuration, frames pooled: bits
/// add up and per-plane PSNR is averaged.
fn sweep_sequence(frames: &[Frame], qps: &[u8], base: &CodecConfig, models: &ModelSet) -> CliResult<Vec<Measurement>> {
    let per_frame = frames
        .iter()
        .map(|f| sweep(f, qps, base, models))
        .collect::<Result<Vec<_>, _>>()?;
    let (w, h) = (frames[0].width(), frames[0].height());
    Ok((0..qps.len())
        .map(|q| {
            let bits: u64 = per_frame.iter().map(|s| s[q].payload_bits).sum();
            let planes = per_frame[0][q].psnr.len();
            Measurement {
                qp: qps[q],
                payload_bits: bits,
                bpp: bits_per_pixel(bits, w * frames.len(), h),
                psnr: (0..planes)
                    .map(|p| mean_psnr(&per_frame.iter().map(|s| s[q].psnr[p]).collect::<Vec<_>>()))
                    .collect(),
            }
        })
        .collect())
}

fn write_points(path: &Path, m: &[Measurement]) -> CliResult {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::input(format!("{}: {e}", path.display()));
    w.write_record(["qp", "rate", "psnr", "psnr_u", "psnr_v"]).map_err(io)?;
    for p in m {
        let mut rec = vec![p.qp.to_string(), format!("{:.9}", p.bpp)];
        rec.extend((0..3).map(|i| p.psnr.get(i).map(|v| format!("{v:.6}")).unwrap_or_default()));
        w.write_record(rec).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn eval(a: EvalArgs) -> CliResult {
    let file = FileConfig::load(a.config.as_deref(), EVAL_KEYS)?;
    let inputs: Vec<PathBuf> = if a.input.is_empty() {
        file.pick::<String>("input", None)?
            .map(|s| parse_list::<PathBuf>(&s))
            .transpose()?
            .unwrap_or_default()
    } else {
        a.input.clone()
    };
    if inputs.is_empty() {
        return Err(CliError::input("--input is required"));
    }
    let qps: Vec<u8> = parse_list(&file.pick("qps", a.qps)?.unwrap_or_else(|| DEFAULT_QPS.into()))?;
    if qps.len() < 4 {
        return Err(CliError::input(format!("BD-rate needs at least 4 QPs, got {}", qps.len())));
    }
    let anchor = CodecConfig::new(qps[0])
        .with_filter(file.switch("anchor-filter", a.anchor_filter)?)
        .with_neural(file.switch("anchor-neural", a.anchor_neural)?);
    let test = CodecConfig::new(qps[0])
        .with_filter(file.switch("test-filter", a.test_filter)?)
        .with_neural(file.switch("test-neural", a.test_neural)?);
    for &qp in &qps {
        CodecConfig::new(qp).validate()?;
    }
    let bank_path: Option<PathBuf> = file.pick("bank", a.bank)?;
    let report_csv: Option<PathBuf> = file.pick("report-csv", a.report_csv)?;
    let report_md: Option<PathBuf> = file.pick("report-md", a.report_md)?;
    let points: Option<PathBuf> = file.pick("points", a.points)?;
    let dims = raw_dims(&file, &a.dims)?;
    let models = load_bank(bank_path.as_deref())?;

    let mut report: Option<BdReport> = None;
    for path in &inputs {
        let frames = read_frames(path, &dims)?;
        let ma = sweep_sequence(&frames, &qps, &anchor, &models)?;
        let mt = sweep_sequence(&frames, &qps, &test, &models)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        if let Some(dir) = &points {
            fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
            write_points(&dir.join(format!("{name}_anchor.csv")), &ma)?;
            write_points(&dir.join(format!("{name}_test.csv")), &mt)?;
        }
        let planes = ma[0].psnr.len();
        let rep = report.get_or_insert_with(|| {
            BdReport::new(["Y", "U", "V"].iter().take(planes).map(|s| s.to_string()).collect())
        });
        if rep.columns.len() != planes {
            return Err(CliError::input(format!(
                "{}: mixes monochrome and color inputs in one report",
                path.display()
            )));
        }
        let row = (0..planes)
            .map(|p| bd_rate(&curve_of(&ma, p)?, &curve_of(&mt, p)?))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::from(e).context(&name))?;
        for (ra, rt) in ma.iter().zip(&mt) {
            eprintln!(
                "{name} qp{:02} anchor bpp={:.5} psnr_y={} test bpp={:.5} psnr_y={}",
                ra.qp,
                ra.bpp,
                format_psnr(ra.psnr[0]),
                rt.bpp,
                format_psnr(rt.psnr[0])
            );
        }
        rep.push(name, row);
    }
    let report = report.expect("at least one input");
    emit_report(&report, report_csv.as_deref(), report_md.as_deref())?;
    print!("{}", report.to_markdown());
    Ok(())
}

fn read_curve(path: &Path) -> CliResult<RdCurve> {
    let err = |m: String| CliError::input(format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = r.headers().map_err(|e| err(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| err(format!("missing `{name}` column")))
    };
    let (ri, pi) = (col("rate")?, col("psnr")?);
    let mut pts = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let num = |i: usize| {
            rec.get(i)
                .unwrap_or("")
                .trim()
                .parse::<f64>()
                .map_err(|_| err(format!("bad number in row {}", pts.len() + 1)))
        };
        pts.push(RdPoint::new(num(ri)?, num(pi)?));
    }
    RdCurve::new(pts).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn bdrate(a: BdrateArgs) -> CliResult {
    let anchor = read_curve(&a.anchor)?;
    let test = read_curve(&a.test)?;
    println!("bd_rate={:.4}%", bd_rate(&anchor, &test)?);
    println!("bd_psnr={:.4}dB", bd_psnr(&anchor, &test)?);
    Ok(())
}

fn thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

pub fn info(a: InfoArgs) -> CliResult {
    let g = graph_from_tag(&a.arch)?;
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "architecture {}", g.arch());
    let _ = writeln!(out, "input {} output {}", g.input_shape(), g.output_shape());
    for n in g.nodes() {
        match n.op {
            Op::Conv { in_ch, out_ch, kh, kw } => {
                let _ = writeln!(out, "  {:<14} conv {kh}x{kw} {in_ch} -> {out_ch}", n.id);
            }
            Op::FullyConnected { in_len, out_len } => {
                let _ = writeln!(out, "  {:<14} fc {in_len} -> {out_len}", n.id);
            }
            _ => {}
        }
    }
    let _ = writeln!(
        out,
        "parameters with bias: {}",
        thousands(g.count_parameters(ParamConvention::WithBias))
    );
    let _ = writeln!(
        out,
        "parameters without bias: {}",
        thousands(g.count_parameters(ParamConvention::WithoutBias))
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::thousands;

    #[test]
    fn digit_groups() {
        assert_eq!(thousands(475233), "475,233");
        assert_eq!(thousands(54512), "54,512");
        assert_eq!(thousands(999), "999");
        assert_eq!(thousands(1000000), "1,000,000");
    }
}
