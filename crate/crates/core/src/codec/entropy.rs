//! Bit I/O, order-0 Exp-Golomb codes and per-block syntax.

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bits: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_bit(&mut self, bit: bool) {
        if self.bits % 8 == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> (self.bits % 8);
        }
        self.bits += 1;
    }

    /// Writes the low `count` bits of `value`, most significant first.
    pub fn put_bits(&mut self, value: u64, count: u32) {
        for i in (0..count).rev() {
            self.put_bit(value >> i & 1 == 1);
        }
    }

    /// Order-0 Exp-Golomb: `len(v+1) - 1` zeros, then `v + 1` in binary.
    pub fn put_ue(&mut self, v: u32) {
        let x = v as u64 + 1;
        let len = 64 - x.leading_zeros();
        self.put_bits(0, len - 1);
        self.put_bits(x, len);
    }

    pub fn bit_len(&self) -> u64 {
        self.bits
    }

    /// Zero-padded to a whole byte.
    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

#[derive(Clone, Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.bytes.len() as u64 * 8 - self.pos
    }

    pub fn get_bit(&mut self) -> Result<bool> {
        let byte = self
            .bytes
            .get((self.pos / 8) as usize)
            .ok_or_else(|| Error::CorruptStream(format!("read past end of payload at bit {}", self.pos)))?;
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn get_bits(&mut self, count: u32) -> Result<u64> {
        let mut v = 0;
        for _ in 0..count {
            v = v << 1 | self.get_bit()? as u64;
        }
        Ok(v)
    }

    pub fn get_ue(&mut self) -> Result<u32> {
        let mut zeros = 0u32;
        while !self.get_bit()? {
            zeros += 1;
            if zeros > 32 {
                return Err(Error::CorruptStream(format!(
                    "Exp-Golomb prefix longer than 32 bits at bit {}",
                    self.pos
                )));
            }
        }
        let x = (1u64 << zeros) | self.get_bits(zeros)?;
        u32::try_from(x - 1).map_err(|_| Error::CorruptStream("Exp-Golomb value overflows".into()))
    }

    /// Skips to the next byte boundary.
    pub fn align(&mut self) {
        self.pos = self.pos.div_ceil(8) * 8;
    }
}

/// `v <= 0 -> -2v`, `v > 0 -> 2v - 1`.
pub fn map_signed(v: i32) -> u32 {
    if v <= 0 {
        (-(v as i64) * 2) as u32
    } else {
        (v as u32) * 2 - 1
    }
}

pub fn unmap_signed(u: u32) -> i32 {
    if u % 2 == 1 {
        (u / 2 + 1) as i32
    } else {
        -((u / 2) as i64) as i32
    }
}

/// Bits of the order-0 Exp-Golomb codeword for `v`.
pub fn ue_len(v: u32) -> u32 {
    let len = 64 - (v as u64 + 1).leading_zeros();
    2 * len - 1
}

/// Raster indices of an `n x n` block in zigzag order (anti-diagonals,
/// alternating direction, starting to the right).
pub fn zigzag(n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n * n);
    for s in 0..2 * n - 1 {
        let lo = s.saturating_sub(n - 1);
        let hi = s.min(n - 1);
        if s % 2 == 0 {
            // up-right: row decreasing
            for r in (lo..=hi).rev() {
                out.push(r * n + (s - r));
            }
        } else {
            for r in lo..=hi {
                out.push(r * n + (s - r));
            }
        }
    }
    out
}

/// Intra mode of a block: one of the 35 classical modes or the neural mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockMode {
    Classical(u8),
    Neural,
}

impl BlockMode {
    pub fn signal_bits(self) -> u32 {
        match self {
            BlockMode::Neural => 1,
            BlockMode::Classical(_) => 7,
        }
    }
}

/// Writes the mode signaling and the levels (given in zigzag order).
pub fn entropy_encode_block(w: &mut BitWriter, mode: BlockMode, levels: &[i32]) {
    match mode {
        BlockMode::Neural => w.put_bit(true),
        BlockMode::Classical(m) => {
            w.put_bit(false);
            w.put_bits(m as u64, 6);
        }
    }
    for &l in levels {
        w.put_ue(map_signed(l));
    }
}

/// Reads one block's mode and `count` levels (zigzag order).
pub fn entropy_decode_block(r: &mut BitReader<'_>, count: usize) -> Result<(BlockMode, Vec<i32>)> {
    let mode = if r.get_bit()? {
        BlockMode::Neural
    } else {
        let m = r.get_bits(6)? as u8;
        if m >= 35 {
            return Err(Error::CorruptStream(format!("mode index {m} out of range")));
        }
        BlockMode::Classical(m)
    };
    let levels = (0..count)
        .map(|_| r.get_ue().map(unmap_signed))
        .collect::<Result<_>>()?;
    Ok((mode, levels))
}

/// Exact bit cost of `entropy_encode_block`.
pub fn block_bits(mode: BlockMode, levels: &[i32]) -> u64 {
    mode.signal_bits() as u64 + levels.iter().map(|&l| ue_len(map_signed(l)) as u64).sum::<u64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits_of(f: impl FnOnce(&mut BitWriter)) -> String {
        let mut w = BitWriter::new();
        f(&mut w);
        let n = w.bit_len() as usize;
        w.into_bytes()
            .iter()
            .map(|b| format!("{b:08b}"))
            .collect::<String>()[..n]
            .to_string()
    }

    #[test]
    fn codewords() {
        assert_eq!(bits_of(|w| w.put_ue(map_signed(0))), "1");
        assert_eq!(bits_of(|w| w.put_ue(map_signed(1))), "010");
        assert_eq!(bits_of(|w| w.put_ue(map_signed(-1))), "011");
        assert_eq!(bits_of(|w| w.put_ue(3)), "00100");
        assert_eq!(ue_len(3), 5);
    }

    #[test]
    fn signed_map_is_bijective_near_zero() {
        for v in -1000..=1000 {
            assert_eq!(unmap_signed(map_signed(v)), v);
        }
        assert_eq!(map_signed(-2), 4);
        assert_eq!(map_signed(2), 3);
    }

    #[test]
    fn zigzag_4x4() {
        assert_eq!(zigzag(4), vec![0, 1, 4, 8, 5, 2, 3, 6, 9, 12, 13, 10, 7, 11, 14, 15]);
        let mut z = zigzag(32);
        z.sort();
        assert_eq!(z, (0..1024).collect::<Vec<_>>());
    }

    #[test]
    fn truncated_prefix_is_corrupt() {
        let mut r = BitReader::new(&[0x00]);
        assert!(matches!(r.get_ue(), Err(Error::CorruptStream(_))));
        let mut r = BitReader::new(&[0b0111_1111]);
        assert!(matches!(entropy_decode_block(&mut r, 1), Err(Error::CorruptStream(_))));
    }
}
