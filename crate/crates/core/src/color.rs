//! Color transforms used by the metrics.
//!
//! * YCbCr (BT.709 or BT.601, full range) for color PSNR.
//! * CIELAB, optionally remapped to LAB2000HL through a lookup table, for PCQM.
//! * The Gaussian color model (one luminance and two chrominance responses)
//!   for GraphSIM.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloud::Rgb;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YcbcrMatrix {
    #[default]
    Bt709,
    Bt601,
}

impl YcbcrMatrix {
    /// Luma weights `(Kr, Kb)`.
    fn weights(self) -> (f64, f64) {
        match self {
            YcbcrMatrix::Bt709 => (0.2126, 0.0722),
            YcbcrMatrix::Bt601 => (0.299, 0.114),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YCbCr {
    pub y: f64,
    pub cb: f64,
    pub cr: f64,
}

/// Full-range RGB → YCbCr with a 128 chroma offset, clamped to `[0, 255]`.
pub fn rgb_to_ycbcr(rgb: Rgb, matrix: YcbcrMatrix) -> YCbCr {
    let (kr, kb) = matrix.weights();
    let [r, g, b] = rgb.map(f64::from);
    // Written relative to G so that gray inputs give Y = G exactly.
    let y = g + kr * (r - g) + kb * (b - g);
    let cb = (b - y) / (2.0 * (1.0 - kb)) + 128.0;
    let cr = (r - y) / (2.0 * (1.0 - kr)) + 128.0;
    YCbCr {
        y: y.clamp(0.0, 255.0),
        cb: cb.clamp(0.0, 255.0),
        cr: cr.clamp(0.0, 255.0),
    }
}

/// Lightness `l`, chromatic coordinates `a`, `b` and chroma `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceptualColor {
    pub l: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl PerceptualColor {
    fn new(l: f64, a: f64, b: f64) -> Self {
        Self {
            l,
            a,
            b,
            c: a.hypot(b),
        }
    }
}

// sRGB (IEC 61966-2-1) linear RGB → XYZ, D65.
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

fn srgb_to_linear(v: u8) -> f64 {
    let c = f64::from(v) / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// sRGB → CIELAB under D65. The reference white is the image of RGB white
/// through the same matrix, so neutral inputs map to `a = b = 0`.
pub fn rgb_to_cielab(rgb: Rgb) -> PerceptualColor {
    let lin = rgb.map(srgb_to_linear);
    let xyz = SRGB_TO_XYZ.map(|row| row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2]);
    let white = SRGB_TO_XYZ.map(|row| row[0] + row[1] + row[2]);
    let f = [0, 1, 2].map(|k| lab_f(xyz[k] / white[k]));
    PerceptualColor::new(116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2]))
}

/// Regular grid sampling the map `(a, b) → (a_hl, b_hl)`.
///
/// Text format: a first line `lab2000hl <na> <nb> <a_min> <a_max> <b_min> <b_max>`
/// followed by `na * nb` lines `a_hl b_hl`, row-major with `b` varying fastest.
/// Lines starting with `#` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Lab2000HlTable {
    na: usize,
    nb: usize,
    a_range: (f64, f64),
    b_range: (f64, f64),
    samples: Vec<(f64, f64)>,
}

impl Lab2000HlTable {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::BadTable(m.to_string());
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("empty table"))?
            .split_whitespace()
            .collect();
        if header.len() != 7 || header[0] != "lab2000hl" {
            return Err(bad("expected `lab2000hl na nb a_min a_max b_min b_max`"));
        }
        let na: usize = header[1].parse().map_err(|_| bad("bad na"))?;
        let nb: usize = header[2].parse().map_err(|_| bad("bad nb"))?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad range value"));
        let a_range = (num(header[3])?, num(header[4])?);
        let b_range = (num(header[5])?, num(header[6])?);
        if na < 2 || nb < 2 || !(a_range.1 > a_range.0) || !(b_range.1 > b_range.0) {
            return Err(bad("grid needs at least 2x2 samples over a non-empty range"));
        }
        let samples = lines
            .map(|l| {
                let mut it = l.split_whitespace().map(|s| s.parse::<f64>());
                match (it.next(), it.next()) {
                    (Some(Ok(a)), Some(Ok(b))) => Ok((a, b)),
                    _ => Err(bad("bad sample line")),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if samples.len() != na * nb {
            return Err(bad("sample count does not match grid size"));
        }
        Ok(Self {
            na,
            nb,
            a_range,
            b_range,
            samples,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Bilinear interpolation; queries outside the grid are clamped to it.
    pub fn lookup(&self, a: f64, b: f64) -> (f64, f64) {
        let cell = |v: f64, (lo, hi): (f64, f64), n: usize| {
            let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0) * (n - 1) as f64;
            let i = (t.floor() as usize).min(n - 2);
            (i, t - i as f64)
        };
        let (i, ta) = cell(a, self.a_range, self.na);
        let (j, tb) = cell(b, self.b_range, self.nb);
        let at = |i: usize, j: usize| self.samples[i * self.nb + j];
        let lerp = |p: (f64, f64), q: (f64, f64), t: f64| (p.0 + (q.0 - p.0) * t, p.1 + (q.1 - p.1) * t);
        let lo = lerp(at(i, j), at(i, j + 1), tb);
        let hi = lerp(at(i + 1, j), at(i + 1, j + 1), tb);
        lerp(lo, hi, ta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerceptualMode {
    #[default]
    Cielab,
    Lab2000hl,
}

/// sRGB → perceptual color. LAB2000HL mode keeps CIELAB lightness and remaps
/// `(a, b)` through the table.
pub fn rgb_to_perceptual(
    rgb: Rgb,
    mode: PerceptualMode,
    table: Option<&Lab2000HlTable>,
) -> Result<PerceptualColor> {
    let lab = rgb_to_cielab(rgb);
    match mode {
        PerceptualMode::Cielab => Ok(lab),
        PerceptualMode::Lab2000hl => {
            let table = table.ok_or(Error::TableMissing)?;
            let (a, b) = table.lookup(lab.a, lab.b);
            Ok(PerceptualColor::new(lab.l, a, b))
        }
    }
}

/// Rows produce `(E, E_λ, E_λλ)` from `(R, G, B)`.
pub const DEFAULT_GAUSSIAN_MATRIX: [[f64; 3]; 3] = [
    [0.06, 0.63, 0.27],
    [0.30, 0.04, -0.35],
    [0.34, -0.60, 0.17],
];

/// Luminance `e` and chrominance `e_l`, `e_ll` responses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianColor {
    pub e: f64,
    pub e_l: f64,
    pub e_ll: f64,
}

impl GaussianColor {
    pub fn channel(&self, c: usize) -> f64 {
        match c {
            0 => self.e,
            1 => self.e_l,
            _ => self.e_ll,
        }
    }
}

pub fn rgb_to_gaussian(rgb: Rgb, matrix: &[[f64; 3]; 3]) -> GaussianColor {
    let v = rgb.map(f64::from);
    let [e, e_l, e_ll] = matrix.map(|row| row[0] * v[0] + row[1] * v[1] + row[2] * v[2]);
    GaussianColor { e, e_l, e_ll }
}
