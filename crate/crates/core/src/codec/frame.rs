//! Frame encoder and decoder.
//!
//! Stream layout: a 12-byte header (`"NCV1"`, u16 width, u16 height, u8 qp,
//! u8 flags, u8 bank id, u8 reserved; little-endian) followed by the payload
//! bits, zero-padded to a byte. Planes are coded one after another (Y, U, V),
//! each in raster order of 32x32 blocks. Several frames are simply
//! concatenated streams.

use super::entropy::{entropy_decode_block, entropy_encode_block, BitReader, BitWriter, BlockMode};
use super::models::ModelSet;
use super::plane::{chroma_size, Frame, Plane};
use super::predict::{predict_intra, predict_neural, to_sample};
use super::rdo::{rd_select_mode, BlockCoder, NeuralInput, DEFAULT_LAMBDA_SCALE};
use super::refs::{gather_context, gather_references};
use crate::error::{Error, Result};
use crate::nn::{Model, MAX_QP};
use crate::tensor::{Shape, Tensor};

pub const BLOCK_SIZE: usize = 32;
pub const STREAM_MAGIC: [u8; 4] = *b"NCV1";
pub const HEADER_LEN: usize = 12;

pub const FLAG_NEURAL: u8 = 1;
pub const FLAG_FILTER: u8 = 2;
/// Luma only (no chroma planes follow).
pub const FLAG_MONOCHROME: u8 = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct CodecConfig {
    pub qp: u8,
    pub neural_mode: bool,
    pub in_loop_filter: bool,
    pub lambda_scale: f64,
}

impl CodecConfig {
    pub fn new(qp: u8) -> Self {
        Self {
            qp,
            neural_mode: false,
            in_loop_filter: false,
            lambda_scale: DEFAULT_LAMBDA_SCALE,
        }
    }

    pub fn with_neural(mut self, on: bool) -> Self {
        self.neural_mode = on;
        self
    }

    pub fn with_filter(mut self, on: bool) -> Self {
        self.in_loop_filter = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.qp > MAX_QP {
            return Err(Error::Invalid(format!("qp {} outside 0..=51", self.qp)));
        }
        if !(self.lambda_scale.is_finite() && self.lambda_scale >= 0.0) {
            return Err(Error::Invalid(format!("lambda scale {} must be >= 0", self.lambda_scale)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub width: u16,
    pub height: u16,
    pub qp: u8,
    pub flags: u8,
    pub bank_id: u8,
}

impl Header {
    pub fn neural_mode(&self) -> bool {
        self.flags & FLAG_NEURAL != 0
    }

    pub fn in_loop_filter(&self) -> bool {
        self.flags & FLAG_FILTER != 0
    }

    pub fn monochrome(&self) -> bool {
        self.flags & FLAG_MONOCHROME != 0
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[..4].copy_from_slice(&STREAM_MAGIC);
        b[4..6].copy_from_slice(&self.width.to_le_bytes());
        b[6..8].copy_from_slice(&self.height.to_le_bytes());
        b[8] = self.qp;
        b[9] = self.flags;
        b[10] = self.bank_id;
        b
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::CorruptStream(format!(
                "stream has {} bytes, header needs {HEADER_LEN}",
                bytes.len()
            )));
        }
        if bytes[..4] != STREAM_MAGIC {
            return Err(Error::CorruptStream(format!("bad magic {:?}", &bytes[..4])));
        }
        let h = Self {
            width: u16::from_le_bytes([bytes[4], bytes[5]]),
            height: u16::from_le_bytes([bytes[6], bytes[7]]),
            qp: bytes[8],
            flags: bytes[9],
            bank_id: bytes[10],
        };
        if h.width == 0 || h.height == 0 {
            return Err(Error::HeaderMismatch("zero frame dimension".into()));
        }
        if h.qp > MAX_QP {
            return Err(Error::HeaderMismatch(format!("qp {} outside 0..=51", h.qp)));
        }
        if h.flags & !(FLAG_NEURAL | FLAG_FILTER | FLAG_MONOCHROME) != 0 || bytes[11] != 0 {
            return Err(Error::HeaderMismatch(format!("unknown flags {:#04x}", h.flags)));
        }
        Ok(h)
    }
}

/// Mode usage over the coded blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeStats {
    pub blocks: usize,
    pub neural: usize,
    pub classical: [usize; 35],
    /// Mode of every block in coding order, plane after plane.
    pub modes: Vec<BlockMode>,
}

impl Default for ModeStats {
    fn default() -> Self {
        Self {
            blocks: 0,
            neural: 0,
            classical: [0; 35],
            modes: Vec::new(),
        }
    }
}

impl ModeStats {
    fn record(&mut self, m: BlockMode) {
        self.blocks += 1;
        self.modes.push(m);
        match m {
            BlockMode::Neural => self.neural += 1,
            BlockMode::Classical(i) => self.classical[i as usize] += 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Encoded {
    pub bytes: Vec<u8>,
    pub header: Header,
    /// Encoder-side reconstruction (what the decoder will output).
    pub recon: Frame,
    /// Payload bits, header excluded.
    pub payload_bits: u64,
    pub stats: ModeStats,
}

#[derive(Clone, Debug)]
pub struct Decoded {
    pub frame: Frame,
    pub header: Header,
    pub payload_bits: u64,
    /// Stream bytes consumed (header + padded payload).
    pub consumed: usize,
    pub stats: ModeStats,
}

/// Per-plane coding tools resolved from the header and the model set.
struct Tools<'a> {
    coder: BlockCoder,
    filter: Option<Model<f32>>,
    neural: Option<(&'a Model<f32>, usize)>,
}

impl<'a> Tools<'a> {
    fn new(h: &Header, lambda_scale: f64, models: &'a ModelSet) -> Result<Self> {
        if (h.in_loop_filter() || h.neural_mode()) && h.bank_id != models.id {
            return Err(Error::MissingModel {
                bank_id: h.bank_id,
                what: "the model bank named in the stream",
            });
        }
        let filter = if h.in_loop_filter() {
            Some(models.filter_model(h.qp)?)
        } else {
            None
        };
        let neural = if h.neural_mode() {
            Some(models.predictor_for(BLOCK_SIZE)?)
        } else {
            None
        };
        Ok(Self {
            coder: BlockCoder::new(BLOCK_SIZE, h.qp, lambda_scale),
            filter,
            neural,
        })
    }

    /// In-loop filter of one reconstructed block; no-op when disabled.
    fn filter(&self, block: Vec<u8>) -> Result<Vec<u8>> {
        match &self.filter {
            None => Ok(block),
            Some(m) => filter_block(m, &block, BLOCK_SIZE),
        }
    }
}

/// Runs a restoration filter on an `n x n` 8-bit block.
pub fn filter_block(model: &Model<f32>, block: &[u8], n: usize) -> Result<Vec<u8>> {
    let x = Tensor::new(Shape::new(1, n, n), block.iter().map(|&v| v as f32 / 255.0).collect())?;
    let y = model.forward(&x)?;
    Ok(y.data().iter().map(|&v| to_sample(v)).collect())
}

fn encode_plane(
    orig: &Plane,
    tools: &Tools<'_>,
    w: &mut BitWriter,
    stats: &mut ModeStats,
) -> Result<Plane> {
    let n = BLOCK_SIZE;
    let orig = orig.pad_to_multiple(n);
    let mut recon = Plane::filled(orig.width(), orig.height(), 0);
    for y0 in (0..orig.height()).step_by(n) {
        for x0 in (0..orig.width()).step_by(n) {
            let refs = gather_references(&recon, x0, y0, n);
            let context;
            let neural = match tools.neural {
                Some((model, k)) => {
                    context = gather_context(&recon, &refs, x0, y0, k);
                    Some(NeuralInput {
                        context: &context,
                        model,
                    })
                }
                None => None,
            };
            let block = orig.block(x0, y0, n);
            let choice = rd_select_mode(&block, &refs, neural.as_ref(), &tools.coder)?;
            entropy_encode_block(w, choice.mode, &choice.levels);
            stats.record(choice.mode);
            recon.put_block(x0, y0, n, &tools.filter(choice.recon)?);
        }
    }
    Ok(recon)
}

fn decode_plane(
    width: usize,
    height: usize,
    tools: &Tools<'_>,
    r: &mut BitReader<'_>,
    stats: &mut ModeStats,
) -> Result<Plane> {
    let n = BLOCK_SIZE;
    let (pw, ph) = (width.div_ceil(n) * n, height.div_ceil(n) * n);
    let mut recon = Plane::filled(pw, ph, 0);
    for y0 in (0..ph).step_by(n) {
        for x0 in (0..pw).step_by(n) {
            let refs = gather_references(&recon, x0, y0, n);
            let (mode, levels) = entropy_decode_block(r, n * n)?;
            let pred = match mode {
                BlockMode::Classical(m) => predict_intra(&refs, m)?,
                BlockMode::Neural => {
                    let Some((model, k)) = tools.neural else {
                        return Err(Error::CorruptStream(format!(
                            "block at ({x0}, {y0}) uses the neural mode but the header disables it"
                        )));
                    };
                    predict_neural(&gather_context(&recon, &refs, x0, y0, k), model)?
                }
            };
            stats.record(mode);
            let block = tools.coder.reconstruct(&pred, &levels);
            recon.put_block(x0, y0, n, &tools.filter(block)?);
        }
    }
    Ok(recon.crop(width, height))
}

pub fn encode_frame(frame: &Frame, config: &CodecConfig, models: &ModelSet) -> Result<Encoded> {
    config.validate()?;
    let (w, h) = (frame.width(), frame.height());
    let dims = |v: usize| u16::try_from(v).map_err(|_| Error::Invalid(format!("dimension {v} exceeds 65535")));
    let mut flags = 0;
    if config.neural_mode {
        flags |= FLAG_NEURAL;
    }
    if config.in_loop_filter {
        flags |= FLAG_FILTER;
    }
    if frame.chroma.is_none() {
        flags |= FLAG_MONOCHROME;
    }
    let header = Header {
        width: dims(w)?,
        height: dims(h)?,
        qp: config.qp,
        flags,
        bank_id: if config.neural_mode || config.in_loop_filter { models.id } else { 0 },
    };
    let tools = Tools::new(&header, config.lambda_scale, models)?;
    let mut bw = BitWriter::new();
    let mut stats = ModeStats::default();
    let mut planes = Vec::new();
    for p in frame.planes() {
        let rec = encode_plane(p, &tools, &mut bw, &mut stats)?;
        planes.push(rec.crop(p.width(), p.height()));
    }
    let mut planes = planes.into_iter();
    let y = planes.next().unwrap();
    let recon = match (planes.next(), planes.next()) {
        (Some(u), Some(v)) => Frame::yuv420(y, u, v)?,
        _ => Frame::monochrome(y),
    };
    let payload_bits = bw.bit_len();
    let mut bytes = header.to_bytes().to_vec();
    bytes.extend(bw.into_bytes());
    Ok(Encoded {
        bytes,
        header,
        recon,
        payload_bits,
        stats,
    })
}

/// Decodes the first frame of `bytes`.
pub fn decode_frame(bytes: &[u8], models: &ModelSet) -> Result<Decoded> {
    let header = Header::parse(bytes)?;
    let tools = Tools::new(&header, DEFAULT_LAMBDA_SCALE, models)?;
    let (w, h) = (header.width as usize, header.height as usize);
    let mut r = BitReader::new(&bytes[HEADER_LEN..]);
    let mut stats = ModeStats::default();
    let y = decode_plane(w, h, &tools, &mut r, &mut stats)?;
    let frame = if header.monochrome() {
        Frame::monochrome(y)
    } else {
        let (cw, ch) = chroma_size(w, h);
        let u = decode_plane(cw, ch, &tools, &mut r, &mut stats)?;
        let v = decode_plane(cw, ch, &tools, &mut r, &mut stats)?;
        Frame::yuv420(y, u, v)?
    };
    let payload_bits = r.position();
    Ok(Decoded {
        frame,
        header,
        payload_bits,
        consumed: HEADER_LEN + payload_bits.div_ceil(8) as usize,
        stats,
    })
}

/// Decodes concatenated frames until the stream is exhausted.
pub fn decode_stream(bytes: &[u8], models: &ModelSet) -> Result<Vec<Decoded>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let d = decode_frame(&bytes[pos..], models)?;
        pos += d.consumed;
        out.push(d);
    }
    if out.is_empty() {
        return Err(Error::CorruptStream("empty stream".into()));
    }
    Ok(out)
}
