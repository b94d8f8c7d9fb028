//! Raw planar YUV 4:2:0 and binary PGM (P5) I/O.

use std::fs;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use super::plane::{chroma_size, Frame, Plane};
use crate::error::{Error, Result};

pub fn yuv420_frame_len(width: usize, height: usize) -> u64 {
    let (cw, ch) = chroma_size(width, height);
    (width * height + 2 * cw * ch) as u64
}

pub fn read_yuv420(path: impl AsRef<Path>, width: usize, height: usize, frame_index: usize) -> Result<Frame> {
    let mut f = fs::File::open(path.as_ref())?;
    let frame_len = yuv420_frame_len(width, height);
    let expected = (frame_index as u64 + 1) * frame_len;
    let actual = f.metadata()?.len();
    if actual < expected {
        return Err(Error::ShortFile { expected, actual });
    }
    f.seek(SeekFrom::Start(frame_index as u64 * frame_len))?;
    let mut buf = vec![0u8; frame_len as usize];
    f.read_exact(&mut buf)?;
    let (cw, ch) = chroma_size(width, height);
    let (y, rest) = buf.split_at(width * height);
    let (u, v) = rest.split_at(cw * ch);
    Frame::yuv420(
        Plane::new(width, height, y.to_vec())?,
        Plane::new(cw, ch, u.to_vec())?,
        Plane::new(cw, ch, v.to_vec())?,
    )
}

/// Number of whole frames in a raw file.
pub fn yuv420_frame_count(path: impl AsRef<Path>, width: usize, height: usize) -> Result<usize> {
    let len = fs::metadata(path)?.len();
    Ok((len / yuv420_frame_len(width, height)) as usize)
}

fn frame_bytes(frame: &Frame) -> Result<Vec<u8>> {
    let Some([u, v]) = &frame.chroma else {
        return Err(Error::Invalid("YUV output needs a frame with chroma planes".into()));
    };
    let mut out = frame.y.samples().to_vec();
    out.extend_from_slice(u.samples());
    out.extend_from_slice(v.samples());
    Ok(out)
}

pub fn write_yuv420(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    fs::write(path, frame_bytes(frame)?)?;
    Ok(())
}

/// Writes frames back to back.
pub fn write_yuv420_frames(path: impl AsRef<Path>, frames: &[Frame]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for fr in frames {
        f.write_all(&frame_bytes(fr)?)?;
    }
    Ok(())
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Plane> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::BadHeader("PGM header ends early".into()));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).unwrap_or("").to_string());
    }
    if fields[0] != "P5" {
        return Err(Error::BadHeader(format!("expected P5, found `{}`", fields[0])));
    }
    let num = |s: &str, what: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::BadHeader(format!("{what} `{s}` is not a number")))
    };
    let width = num(&fields[1], "width")?;
    let height = num(&fields[2], "height")?;
    let maxval = num(&fields[3], "maxval")?;
    if maxval != 255 {
        return Err(Error::Maxval(maxval as u32));
    }
    if width == 0 || height == 0 {
        return Err(Error::BadHeader("zero image dimension".into()));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() < need {
        return Err(Error::ShortFile {
            expected: (pos + need) as u64,
            actual: bytes.len() as u64,
        });
    }
    Plane::new(width, height, raster[..need].to_vec())
}

pub fn encode_pgm(plane: &Plane) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", plane.width(), plane.height()).into_bytes();
    out.extend_from_slice(plane.samples());
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Plane> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_pgm(path: impl AsRef<Path>, plane: &Plane) -> Result<()> {
    fs::write(path, encode_pgm(plane))?;
    Ok(())
}
