use crate::imaging::Image;

use super::dct;
use super::tables::{scaled_table, HuffSpec, AC_CHROMA, AC_LUMA, CHROMA_QUANT, DC_CHROMA, DC_LUMA, LUMA_QUANT, ZIGZAG};
use super::JpegError;

/// Canonical code table for encoding: `(code, length)` per symbol.
struct HuffCodes([(u16, u8); 256]);

impl HuffCodes {
    fn new(spec: &HuffSpec) -> Self {
        let mut table = [(0u16, 0u8); 256];
        let mut code = 0u16;
        let mut k = 0;
        for (len, &count) in spec.bits.iter().enumerate() {
            for _ in 0..count {
                table[spec.vals[k] as usize] = (code, len as u8 + 1);
                code += 1;
                k += 1;
            }
            code <<= 1;
        }
        HuffCodes(table)
    }
}

struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    nbits: u32,
}

impl BitWriter {
    fn new(out: Vec<u8>) -> Self {
        BitWriter { out, acc: 0, nbits: 0 }
    }

    fn put(&mut self, bits: u32, len: u32) {
        if len == 0 {
            return;
        }
        self.acc = (self.acc << len) | (bits & ((1 << len) - 1));
        self.nbits += len;
        while self.nbits >= 8 {
            let byte = (self.acc >> (self.nbits - 8)) as u8;
            self.out.push(byte);
            if byte == 0xFF {
                self.out.push(0x00);
            }
            self.nbits -= 8;
        }
        self.acc &= (1 << self.nbits) - 1;
    }

    fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            let pad = 8 - self.nbits;
            self.put((1 << pad) - 1, pad);
        }
        self.out
    }
}

fn magnitude_bits(v: i32) -> (u32, u32) {
    let size = 32 - v.unsigned_abs().leading_zeros();
    let bits = if v < 0 { (v - 1) as u32 } else { v as u32 };
    (bits & ((1u32 << size) - 1), size)
}

struct Channel<'a> {
    quant: [u16; 64],
    dc: &'a HuffCodes,
    ac: &'a HuffCodes,
    prev_dc: i32,
}

fn encode_block(samples: &[f64; 64], ch: &mut Channel<'_>, w: &mut BitWriter) {
    let coefs = dct::forward(samples);
    let mut zz = [0i32; 64];
    for (k, &n) in ZIGZAG.iter().enumerate() {
        zz[k] = (coefs[n] / ch.quant[n] as f64).round() as i32;
    }
    let diff = zz[0] - ch.prev_dc;
    ch.prev_dc = zz[0];
    let (bits, size) = magnitude_bits(diff);
    let (code, len) = ch.dc.0[size as usize];
    w.put(code as u32, len as u32);
    w.put(bits, size);
    let mut run = 0;
    for &z in &zz[1..] {
        if z == 0 {
            run += 1;
            continue;
        }
        while run > 15 {
            let (code, len) = ch.ac.0[0xF0];
            w.put(code as u32, len as u32);
            run -= 16;
        }
        let (bits, size) = magnitude_bits(z);
        let (code, len) = ch.ac.0[((run << 4) | size) as usize];
        w.put(code as u32, len as u32);
        w.put(bits, size);
        run = 0;
    }
    if run > 0 {
        let (code, len) = ch.ac.0[0x00];
        w.put(code as u32, len as u32);
    }
}

fn segment(out: &mut Vec<u8>, marker: u8, body: &[u8]) {
    out.extend_from_slice(&[0xFF, marker]);
    out.extend_from_slice(&((body.len() + 2) as u16).to_be_bytes());
    out.extend_from_slice(body);
}

fn dht_body(out: &mut Vec<u8>, class_id: u8, spec: &HuffSpec) {
    out.push(class_id);
    out.extend_from_slice(&spec.bits);
    out.extend_from_slice(spec.vals);
}

/// Edge-replicated, level-shifted 8x8 block at block coordinates `(bx, by)`.
fn block_at(plane: &[f64], w: usize, h: usize, bx: usize, by: usize) -> [f64; 64] {
    let mut b = [0.0; 64];
    for y in 0..8 {
        let sy = (by * 8 + y).min(h - 1);
        for x in 0..8 {
            let sx = (bx * 8 + x).min(w - 1);
            b[y * 8 + x] = plane[sy * w + sx] - 128.0;
        }
    }
    b
}

/// Chroma subsampling factor per axis: 2 (4:2:0), except 1 (4:4:4) at quality 100,
/// where 4:2:0 alone would cap fidelity on saturated colors.
pub fn chroma_subsampling(quality: u8) -> usize {
    if quality >= 100 {
        1
    } else {
        2
    }
}

/// Encodes a baseline sequential JFIF stream. RGB input is stored as YCbCr,
/// subsampled per [`chroma_subsampling`].
pub fn encode(img: &Image, quality: u8) -> Result<Vec<u8>, JpegError> {
    if !(1..=100).contains(&quality) {
        return Err(JpegError::InvalidQuality(quality as i64));
    }
    if img.width() > u16::MAX as u32 || img.height() > u16::MAX as u32 {
        return Err(JpegError::TooLarge(img.width(), img.height()));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let color = img.channels() == 3;
    let luma_q = scaled_table(&LUMA_QUANT, quality);
    let chroma_q = scaled_table(&CHROMA_QUANT, quality);

    let mut out = vec![0xFF, 0xD8];
    segment(&mut out, 0xE0, &[b'J', b'F', b'I', b'F', 0, 1, 1, 0, 0, 1, 0, 1, 0, 0]);
    let mut dqt = vec![0x00];
    dqt.extend(ZIGZAG.iter().map(|&n| luma_q[n] as u8));
    if color {
        dqt.push(0x01);
        dqt.extend(ZIGZAG.iter().map(|&n| chroma_q[n] as u8));
    }
    segment(&mut out, 0xDB, &dqt);
    let mut sof = vec![8];
    sof.extend_from_slice(&(h as u16).to_be_bytes());
    sof.extend_from_slice(&(w as u16).to_be_bytes());
    if color {
        let luma_sampling = (chroma_subsampling(quality) as u8) * 0x11;
        sof.extend_from_slice(&[3, 1, luma_sampling, 0, 2, 0x11, 1, 3, 0x11, 1]);
    } else {
        sof.extend_from_slice(&[1, 1, 0x11, 0]);
    }
    segment(&mut out, 0xC0, &sof);
    let mut dht = Vec::new();
    dht_body(&mut dht, 0x00, &DC_LUMA);
    dht_body(&mut dht, 0x10, &AC_LUMA);
    if color {
        dht_body(&mut dht, 0x01, &DC_CHROMA);
        dht_body(&mut dht, 0x11, &AC_CHROMA);
    }
    segment(&mut out, 0xC4, &dht);
    if color {
        segment(&mut out, 0xDA, &[3, 1, 0x00, 2, 0x11, 3, 0x11, 0, 63, 0]);
    } else {
        segment(&mut out, 0xDA, &[1, 1, 0x00, 0, 63, 0]);
    }

    let (dc_l, ac_l) = (HuffCodes::new(&DC_LUMA), HuffCodes::new(&AC_LUMA));
    let mut luma = Channel { quant: luma_q, dc: &dc_l, ac: &ac_l, prev_dc: 0 };
    let mut writer = BitWriter::new(out);
    let s = img.samples();

    if !color {
        let plane: Vec<f64> = s.iter().map(|&v| v as f64).collect();
        for by in 0..h.div_ceil(8) {
            for bx in 0..w.div_ceil(8) {
                encode_block(&block_at(&plane, w, h, bx, by), &mut luma, &mut writer);
            }
        }
    } else {
        let (dc_c, ac_c) = (HuffCodes::new(&DC_CHROMA), HuffCodes::new(&AC_CHROMA));
        let mut cb_ch = Channel { quant: chroma_q, dc: &dc_c, ac: &ac_c, prev_dc: 0 };
        let mut cr_ch = Channel { quant: chroma_q, dc: &dc_c, ac: &ac_c, prev_dc: 0 };
        let sub = chroma_subsampling(quality);
        let mcu = 8 * sub;
        let (mcux, mcuy) = (w.div_ceil(mcu), h.div_ceil(mcu));
        // Pad to whole MCUs by edge replication before subsampling.
        let (pw, ph) = (mcux * mcu, mcuy * mcu);
        let mut y_plane = vec![0.0; pw * ph];
        let mut cb_full = vec![0.0; pw * ph];
        let mut cr_full = vec![0.0; pw * ph];
        for y in 0..ph {
            let sy = y.min(h - 1);
            for x in 0..pw {
                let sx = x.min(w - 1);
                let i = (sy * w + sx) * 3;
                let (r, g, b) = (s[i] as f64, s[i + 1] as f64, s[i + 2] as f64);
                let o = y * pw + x;
                y_plane[o] = 0.299 * r + 0.587 * g + 0.114 * b;
                cb_full[o] = -0.168_736 * r - 0.331_264 * g + 0.5 * b + 128.0;
                cr_full[o] = 0.5 * r - 0.418_688 * g - 0.081_312 * b + 128.0;
            }
        }
        let (cw, chh) = (pw / sub, ph / sub);
        let subsample = |full: Vec<f64>| -> Vec<f64> {
            if sub == 1 {
                return full;
            }
            let mut out = vec![0.0; cw * chh];
            for y in 0..chh {
                for x in 0..cw {
                    let i = 2 * y * pw + 2 * x;
                    out[y * cw + x] = (full[i] + full[i + 1] + full[i + pw] + full[i + pw + 1]) / 4.0;
                }
            }
            out
        };
        let (cb, cr) = (subsample(cb_full), subsample(cr_full));
        for my in 0..mcuy {
            for mx in 0..mcux {
                for dy in 0..sub {
                    for dx in 0..sub {
                        let (bx, by) = (sub * mx + dx, sub * my + dy);
                        encode_block(&block_at(&y_plane, pw, ph, bx, by), &mut luma, &mut writer);
                    }
                }
                encode_block(&block_at(&cb, cw, chh, mx, my), &mut cb_ch, &mut writer);
                encode_block(&block_at(&cr, cw, chh, mx, my), &mut cr_ch, &mut writer);
            }
        }
    }
    let mut out = writer.finish();
    out.extend_from_slice(&[0xFF, 0xD9]);
    Ok(out)
}
