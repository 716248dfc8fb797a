use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::imaging::Image;
use crate::stochastic::SimplexField;

use super::blur::{convolve_separable, gaussian_kernel};
use super::FaceContext;

/// Spot size class; the noise wavelength is `coefficient * iod`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpotScale {
    Big,
    Med,
    Small,
}

impl SpotScale {
    pub fn coefficient(self) -> f64 {
        match self {
            SpotScale::Big => 1.0,
            SpotScale::Med => 0.5,
            SpotScale::Small => 0.25,
        }
    }
}

impl FromStr for SpotScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "big" => Ok(SpotScale::Big),
            "med" => Ok(SpotScale::Med),
            "small" => Ok(SpotScale::Small),
            _ => Err(format!("unknown scale {s:?}")),
        }
    }
}

impl fmt::Display for SpotScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpotScale::Big => "big",
            SpotScale::Med => "med",
            SpotScale::Small => "small",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Softness {
    Clear,
    Blurry,
}

impl FromStr for Softness {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clear" => Ok(Softness::Clear),
            "blurry" => Ok(Softness::Blurry),
            _ => Err(format!("unknown softness {s:?}")),
        }
    }
}

impl fmt::Display for Softness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Softness::Clear => "clear",
            Softness::Blurry => "blurry",
        })
    }
}

/// Pixel index range `[x0, x1) x [y0, y1)` whose centers lie in the face box, clipped.
pub(crate) fn box_pixels(ctx: &FaceContext, width: u32, height: u32) -> (usize, usize, usize, usize) {
    let b = &ctx.bbox;
    let span = |lo: f64, hi: f64, n: u32| {
        let a = ((lo - 0.5).ceil().max(0.0) as usize).min(n as usize);
        let z = ((hi - 0.5).ceil().max(0.0) as usize).min(n as usize);
        (a, z.max(a))
    };
    let (x0, x1) = span(b.x, b.right(), width);
    let (y0, y1) = span(b.y, b.bottom(), height);
    (x0, y0, x1, y1)
}

/// Boolean mask (row-major, full image size) of the pixels the leopard filter blackens.
///
/// Noise is sampled at pixel centers relative to the face-box origin. In clear
/// mode exactly `ceil(coverage * n)` of the `n` in-box pixels are masked: those
/// with the largest noise values, earlier raster position winning ties.
pub fn leopard_mask(
    width: u32,
    height: u32,
    ctx: &FaceContext,
    coverage: f64,
    scale: SpotScale,
    softness: Softness,
    seed: u64,
) -> Vec<bool> {
    let mut mask = vec![false; width as usize * height as usize];
    let (x0, y0, x1, y1) = box_pixels(ctx, width, height);
    let (bw, bh) = (x1 - x0, y1 - y0);
    let n = bw * bh;
    let target = ((coverage * n as f64) - 1e-9).ceil().max(0.0) as usize;
    if n == 0 || target == 0 {
        return mask;
    }
    let field = SimplexField::new(seed, scale.coefficient() * ctx.iod).expect("iod validated positive");
    let noise: Vec<f64> = (0..n)
        .map(|i| {
            let (x, y) = (x0 + i % bw, y0 + i / bw);
            field.sample(x as f64 + 0.5 - ctx.bbox.x, y as f64 + 0.5 - ctx.bbox.y)
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| noise[b].total_cmp(&noise[a]).then(a.cmp(&b)));
    let mut local = vec![false; n];
    for &i in &order[..target.min(n)] {
        local[i] = true;
    }
    if softness == Softness::Blurry {
        let plane: Vec<f64> = local.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        let blurred = convolve_separable(&plane, bw, bh, &gaussian_kernel(0.1 * ctx.iod));
        for (m, v) in local.iter_mut().zip(blurred) {
            *m = v >= 0.5;
        }
    }
    for (i, &m) in local.iter().enumerate() {
        if m {
            mask[(y0 + i / bw) * width as usize + x0 + i % bw] = true;
        }
    }
    mask
}

/// Blackens the leopard mask inside the face box; pixels outside the box are untouched.
pub fn leopard_spots(
    img: &Image,
    ctx: &FaceContext,
    coverage: f64,
    scale: SpotScale,
    softness: Softness,
    seed: u64,
) -> Image {
    let mask = leopard_mask(img.width(), img.height(), ctx, coverage, scale, softness, seed);
    let mut out = img.clone();
    let ch = img.channels() as usize;
    let data = out.samples_mut();
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        data[i * ch..(i + 1) * ch].fill(0);
    }
    out
}
