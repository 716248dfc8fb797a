use crate::imaging::{clamp_u8, Image};

use super::dct;
use super::tables::ZIGZAG;
use super::JpegError;

fn corrupt(msg: impl Into<String>) -> JpegError {
    JpegError::Corrupt(msg.into())
}

/// Decoding table built from a DHT segment (T.81 Annex F.2.2.3).
#[derive(Clone)]
struct HuffTable {
    maxcode: [i32; 17],
    valptr: [i32; 17],
    mincode: [i32; 17],
    vals: Vec<u8>,
}

impl HuffTable {
    fn new(bits: &[u8; 16], vals: Vec<u8>) -> Result<Self, JpegError> {
        let mut maxcode = [-1i32; 17];
        let mut valptr = [0i32; 17];
        let mut mincode = [0i32; 17];
        let mut code = 0i32;
        let mut k = 0i32;
        for len in 1..=16 {
            let n = bits[len - 1] as i32;
            if n > 0 {
                valptr[len] = k;
                mincode[len] = code;
                code += n;
                k += n;
                maxcode[len] = code - 1;
            }
            if code > (1 << len) {
                return Err(corrupt("over-subscribed Huffman table"));
            }
            code <<= 1;
        }
        if k as usize != vals.len() {
            return Err(corrupt("Huffman symbol count mismatch"));
        }
        Ok(HuffTable { maxcode, valptr, mincode, vals })
    }
}

struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    acc: u32,
    nbits: u32,
    hit_marker: bool,
}

impl<'a> BitReader<'a> {
    fn new(data: &'a [u8], pos: usize) -> Self {
        BitReader { data, pos, acc: 0, nbits: 0, hit_marker: false }
    }

    fn fill(&mut self) {
        while self.nbits <= 24 {
            let mut byte = 0u8;
            if !self.hit_marker && self.pos < self.data.len() {
                byte = self.data[self.pos];
                if byte == 0xFF {
                    match self.data.get(self.pos + 1) {
                        Some(0x00) => self.pos += 2,
                        _ => {
                            self.hit_marker = true;
                            byte = 0;
                        }
                    }
                } else {
                    self.pos += 1;
                }
            } else if !self.hit_marker {
                self.hit_marker = true;
            }
            self.acc |= (byte as u32) << (24 - self.nbits);
            self.nbits += 8;
        }
    }

    fn bit(&mut self) -> u32 {
        if self.nbits == 0 {
            self.fill();
        }
        let b = self.acc >> 31;
        self.acc <<= 1;
        self.nbits -= 1;
        b
    }

    fn bits(&mut self, n: u32) -> u32 {
        if n == 0 {
            return 0;
        }
        if self.nbits < n {
            self.fill();
        }
        let v = self.acc >> (32 - n);
        self.acc <<= n;
        self.nbits -= n;
        v
    }

    fn decode(&mut self, t: &HuffTable) -> Result<u8, JpegError> {
        let mut code = self.bit() as i32;
        for len in 1..=16 {
            if t.maxcode[len] >= code && t.maxcode[len] >= 0 {
                let idx = t.valptr[len] + code - t.mincode[len];
                return t.vals.get(idx as usize).copied().ok_or_else(|| corrupt("bad Huffman code"));
            }
            code = (code << 1) | self.bit() as i32;
        }
        Err(corrupt("bad Huffman code"))
    }

    fn receive_extend(&mut self, size: u32) -> Result<i32, JpegError> {
        if size > 16 {
            return Err(corrupt("coefficient magnitude category too large"));
        }
        let v = self.bits(size) as i32;
        if size > 0 && v < (1 << (size - 1)) {
            Ok(v - (1 << size) + 1)
        } else {
            Ok(v)
        }
    }

    /// Drops buffered bits and consumes the expected restart marker.
    fn restart(&mut self, expected: u8) -> Result<(), JpegError> {
        self.acc = 0;
        self.nbits = 0;
        self.hit_marker = false;
        while self.pos + 1 < self.data.len() && !(self.data[self.pos] == 0xFF && (0xD0..=0xD7).contains(&self.data[self.pos + 1])) {
            self.pos += 1;
        }
        match self.data.get(self.pos + 1) {
            Some(&m) if m == 0xD0 + expected => {
                self.pos += 2;
                Ok(())
            }
            _ => Err(corrupt("missing restart marker")),
        }
    }

    /// Position of the next marker after the entropy-coded segment.
    fn marker_position(&self) -> usize {
        let mut p = self.pos;
        while p + 1 < self.data.len() {
            if self.data[p] == 0xFF && self.data[p + 1] != 0x00 && !(0xD0..=0xD7).contains(&self.data[p + 1]) {
                return p;
            }
            p += 1;
        }
        self.data.len()
    }
}

#[derive(Clone)]
struct Component {
    id: u8,
    h: usize,
    v: usize,
    tq: usize,
    /// Block grid covering whole MCUs.
    bw: usize,
    bh: usize,
    coefs: Vec<[i32; 64]>,
}

struct Frame {
    width: usize,
    height: usize,
    hmax: usize,
    vmax: usize,
    components: Vec<Component>,
}

fn read_u16(data: &[u8], pos: usize) -> Result<usize, JpegError> {
    match data.get(pos..pos + 2) {
        Some(b) => Ok(u16::from_be_bytes([b[0], b[1]]) as usize),
        None => Err(JpegError::Truncated),
    }
}

fn segment(data: &[u8], pos: usize) -> Result<&[u8], JpegError> {
    let len = read_u16(data, pos)?;
    if len < 2 {
        return Err(corrupt("segment length below 2"));
    }
    data.get(pos + 2..pos + len).ok_or(JpegError::Truncated)
}

fn parse_sof(body: &[u8]) -> Result<Frame, JpegError> {
    if body.len() < 6 {
        return Err(JpegError::Truncated);
    }
    if body[0] != 8 {
        return Err(JpegError::Unsupported(format!("{}-bit precision", body[0])));
    }
    let height = u16::from_be_bytes([body[1], body[2]]) as usize;
    let width = u16::from_be_bytes([body[3], body[4]]) as usize;
    let n = body[5] as usize;
    if width == 0 || height == 0 {
        return Err(corrupt("zero image dimension"));
    }
    if n != 1 && n != 3 {
        return Err(JpegError::Unsupported(format!("{n} components")));
    }
    if body.len() < 6 + 3 * n {
        return Err(JpegError::Truncated);
    }
    let mut components = Vec::with_capacity(n);
    for c in 0..n {
        let b = &body[6 + 3 * c..9 + 3 * c];
        let (h, v) = ((b[1] >> 4) as usize, (b[1] & 15) as usize);
        if !(1..=2).contains(&h) || !(1..=2).contains(&v) {
            return Err(JpegError::Unsupported(format!("sampling factors {h}x{v}")));
        }
        if b[2] > 3 {
            return Err(corrupt("quantization table id out of range"));
        }
        components.push(Component { id: b[0], h, v, tq: b[2] as usize, bw: 0, bh: 0, coefs: Vec::new() });
    }
    let hmax = components.iter().map(|c| c.h).max().unwrap_or(1);
    let vmax = components.iter().map(|c| c.v).max().unwrap_or(1);
    let (mcux, mcuy) = (width.div_ceil(8 * hmax), height.div_ceil(8 * vmax));
    for c in &mut components {
        c.bw = mcux * c.h;
        c.bh = mcuy * c.v;
        c.coefs = vec![[0; 64]; c.bw * c.bh];
    }
    Ok(Frame { width, height, hmax, vmax, components })
}

fn decode_block(
    r: &mut BitReader<'_>,
    dc: &HuffTable,
    ac: &HuffTable,
    pred: &mut i32,
    out: &mut [i32; 64],
) -> Result<(), JpegError> {
    let size = r.decode(dc)? as u32;
    *pred = pred.wrapping_add(r.receive_extend(size)?);
    out[0] = *pred;
    let mut k = 1;
    while k < 64 {
        let rs = r.decode(ac)?;
        let (run, size) = ((rs >> 4) as usize, (rs & 15) as u32);
        if size == 0 {
            if run == 15 {
                k += 16;
                continue;
            }
            break;
        }
        k += run;
        if k > 63 {
            return Err(corrupt("AC run past end of block"));
        }
        out[ZIGZAG[k]] = r.receive_extend(size)?;
        k += 1;
    }
    Ok(())
}

/// Decodes a baseline (sequential, Huffman) JPEG with 1 or 3 components.
pub fn decode(data: &[u8]) -> Result<Image, JpegError> {
    if data.len() < 4 || data[0] != 0xFF || data[1] != 0xD8 {
        return Err(corrupt("missing SOI marker"));
    }
    let mut pos = 2;
    let mut qt: [Option<[u16; 64]>; 4] = [None; 4];
    let mut dc_tables: [Option<HuffTable>; 4] = [None, None, None, None];
    let mut ac_tables: [Option<HuffTable>; 4] = [None, None, None, None];
    let mut frame: Option<Frame> = None;
    let mut restart_interval = 0usize;
    let mut scanned = false;

    loop {
        while pos < data.len() && data[pos] != 0xFF {
            pos += 1;
        }
        while pos < data.len() && data[pos] == 0xFF {
            pos += 1;
        }
        let Some(&marker) = data.get(pos) else {
            if scanned {
                break;
            }
            return Err(JpegError::Truncated);
        };
        pos += 1;
        match marker {
            0xD9 => break,
            0xD8 | 0x01 | 0xD0..=0xD7 => {}
            0xC0 | 0xC1 => {
                if frame.is_some() {
                    return Err(corrupt("multiple frames"));
                }
                frame = Some(parse_sof(segment(data, pos)?)?);
                pos += read_u16(data, pos)?;
            }
            0xC2 | 0xC3 | 0xC5..=0xC7 | 0xC9..=0xCB | 0xCD..=0xCF => {
                return Err(JpegError::Unsupported(format!("frame type SOF{}", marker - 0xC0)));
            }
            0xDB => {
                let body = segment(data, pos)?;
                let mut i = 0;
                while i < body.len() {
                    let (pq, tq) = (body[i] >> 4, (body[i] & 15) as usize);
                    if tq > 3 || pq > 1 {
                        return Err(corrupt("bad DQT header"));
                    }
                    let n = if pq == 0 { 64 } else { 128 };
                    let vals = body.get(i + 1..i + 1 + n).ok_or(JpegError::Truncated)?;
                    let mut t = [0u16; 64];
                    for k in 0..64 {
                        t[ZIGZAG[k]] = if pq == 0 { vals[k] as u16 } else { u16::from_be_bytes([vals[2 * k], vals[2 * k + 1]]) };
                    }
                    qt[tq] = Some(t);
                    i += 1 + n;
                }
                pos += body.len() + 2;
            }
            0xC4 => {
                let body = segment(data, pos)?;
                let mut i = 0;
                while i < body.len() {
                    let (tc, th) = (body[i] >> 4, (body[i] & 15) as usize);
                    if tc > 1 || th > 3 {
                        return Err(corrupt("bad DHT header"));
                    }
                    let bits: [u8; 16] = body.get(i + 1..i + 17).ok_or(JpegError::Truncated)?.try_into().expect("16 bytes");
                    let n: usize = bits.iter().map(|&b| b as usize).sum();
                    let vals = body.get(i + 17..i + 17 + n).ok_or(JpegError::Truncated)?.to_vec();
                    let table = HuffTable::new(&bits, vals)?;
                    if tc == 0 {
                        dc_tables[th] = Some(table);
                    } else {
                        ac_tables[th] = Some(table);
                    }
                    i += 17 + n;
                }
                pos += body.len() + 2;
            }
            0xDD => {
                let body = segment(data, pos)?;
                if body.len() < 2 {
                    return Err(JpegError::Truncated);
                }
                restart_interval = u16::from_be_bytes([body[0], body[1]]) as usize;
                pos += body.len() + 2;
            }
            0xDA => {
                let f = frame.as_mut().ok_or_else(|| corrupt("scan before frame header"))?;
                let body = segment(data, pos)?;
                pos += body.len() + 2;
                let ns = *body.first().ok_or(JpegError::Truncated)? as usize;
                if ns == 0 || body.len() < 1 + 2 * ns + 3 {
                    return Err(corrupt("bad scan header"));
                }
                let mut scan = Vec::with_capacity(ns);
                for s in 0..ns {
                    let (cid, tables) = (body[1 + 2 * s], body[2 + 2 * s]);
                    let ci = f
                        .components
                        .iter()
                        .position(|c| c.id == cid)
                        .ok_or_else(|| corrupt("scan references unknown component"))?;
                    let dc = dc_tables[(tables >> 4) as usize & 3].clone().ok_or_else(|| corrupt("missing DC table"))?;
                    let ac = ac_tables[(tables & 15) as usize & 3].clone().ok_or_else(|| corrupt("missing AC table"))?;
                    scan.push((ci, dc, ac));
                }
                pos = decode_scan(data, pos, f, &scan, restart_interval)?;
                scanned = true;
            }
            0xE0..=0xEF | 0xFE | 0xDC | 0xDE | 0xDF | 0xF0..=0xFD | 0xC8 | 0xCC => {
                let body = segment(data, pos)?;
                pos += body.len() + 2;
            }
            m => return Err(corrupt(format!("unexpected marker 0x{m:02X}"))),
        }
    }

    let f = frame.ok_or_else(|| corrupt("no frame header"))?;
    if !scanned {
        return Err(corrupt("no scan data"));
    }
    reconstruct(&f, &qt)
}

fn decode_scan(
    data: &[u8],
    pos: usize,
    f: &mut Frame,
    scan: &[(usize, HuffTable, HuffTable)],
    restart_interval: usize,
) -> Result<usize, JpegError> {
    let mut r = BitReader::new(data, pos);
    let mut preds = vec![0i32; scan.len()];
    let mut unit = 0usize;
    let mut next_rst = 0u8;
    let mut step = |r: &mut BitReader<'_>, preds: &mut Vec<i32>| -> Result<(), JpegError> {
        if restart_interval > 0 && unit > 0 && unit % restart_interval == 0 {
            r.restart(next_rst)?;
            next_rst = (next_rst + 1) & 7;
            preds.iter_mut().for_each(|p| *p = 0);
        }
        unit += 1;
        Ok(())
    };
    if scan.len() == 1 {
        let (ci, dc, ac) = &scan[0];
        let c = &mut f.components[*ci];
        let bw = (f.width * c.h).div_ceil(f.hmax).div_ceil(8);
        let bh = (f.height * c.v).div_ceil(f.vmax).div_ceil(8);
        for by in 0..bh {
            for bx in 0..bw {
                step(&mut r, &mut preds)?;
                decode_block(&mut r, dc, ac, &mut preds[0], &mut c.coefs[by * c.bw + bx])?;
            }
        }
    } else {
        let (mcux, mcuy) = (f.width.div_ceil(8 * f.hmax), f.height.div_ceil(8 * f.vmax));
        for my in 0..mcuy {
            for mx in 0..mcux {
                step(&mut r, &mut preds)?;
                for (s, (ci, dc, ac)) in scan.iter().enumerate() {
                    let c = &mut f.components[*ci];
                    for v in 0..c.v {
                        for h in 0..c.h {
                            let (bx, by) = (mx * c.h + h, my * c.v + v);
                            decode_block(&mut r, dc, ac, &mut preds[s], &mut c.coefs[by * c.bw + bx])?;
                        }
                    }
                }
            }
        }
    }
    Ok(r.marker_position())
}

/// Dequantizes, inverse-transforms, upsamples (bilinear, centered) and color-converts.
fn reconstruct(f: &Frame, qt: &[Option<[u16; 64]>; 4]) -> Result<Image, JpegError> {
    let mut planes = Vec::with_capacity(f.components.len());
    for c in &f.components {
        let q = qt[c.tq].ok_or_else(|| corrupt("missing quantization table"))?;
        let pw = c.bw * 8;
        let mut plane = vec![0.0f64; pw * c.bh * 8];
        for by in 0..c.bh {
            for bx in 0..c.bw {
                let coefs = &c.coefs[by * c.bw + bx];
                let mut deq = [0.0; 64];
                for k in 0..64 {
                    deq[k] = coefs[k] as f64 * q[k] as f64;
                }
                let px = dct::inverse(&deq);
                for y in 0..8 {
                    for x in 0..8 {
                        plane[(by * 8 + y) * pw + bx * 8 + x] = (px[y * 8 + x] + 128.0).clamp(0.0, 255.0);
                    }
                }
            }
        }
        let (cw, ch) = ((f.width * c.h).div_ceil(f.hmax), (f.height * c.v).div_ceil(f.vmax));
        let full = if c.h == f.hmax && c.v == f.vmax {
            let mut out = vec![0.0; f.width * f.height];
            for y in 0..f.height {
                out[y * f.width..(y + 1) * f.width].copy_from_slice(&plane[y * pw..y * pw + f.width]);
            }
            out
        } else {
            upsample(&plane, pw, cw, ch, f.width, f.height, f.hmax / c.h, f.vmax / c.v)
        };
        planes.push(full);
    }
    let n = f.width * f.height;
    let data: Vec<u8> = if planes.len() == 1 {
        planes[0].iter().map(|&v| clamp_u8(v)).collect()
    } else {
        let mut out = Vec::with_capacity(n * 3);
        for i in 0..n {
            let (y, cb, cr) = (planes[0][i], planes[1][i] - 128.0, planes[2][i] - 128.0);
            out.push(clamp_u8(y + 1.402 * cr));
            out.push(clamp_u8(y - 0.344_136 * cb - 0.714_136 * cr));
            out.push(clamp_u8(y + 1.772 * cb));
        }
        out
    };
    let channels = if planes.len() == 1 { 1 } else { 3 };
    Image::new(f.width as u32, f.height as u32, channels, data).map_err(|e| corrupt(e.to_string()))
}

#[allow(clippy::too_many_arguments)]
fn upsample(plane: &[f64], stride: usize, cw: usize, ch: usize, w: usize, h: usize, sx: usize, sy: usize) -> Vec<f64> {
    let coord = |i: usize, s: usize, n: usize| -> (usize, usize, f64) {
        let p = ((i as f64 + 0.5) / s as f64 - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = p.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, p - i0 as f64)
    };
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let (y0, y1, ty) = coord(y, sy, ch);
        for x in 0..w {
            let (x0, x1, tx) = coord(x, sx, cw);
            let top = plane[y0 * stride + x0] * (1.0 - tx) + plane[y0 * stride + x1] * tx;
            let bottom = plane[y1 * stride + x0] * (1.0 - tx) + plane[y1 * stride + x1] * tx;
            out[y * w + x] = top * (1.0 - ty) + bottom * ty;
        }
    }
    out
}
