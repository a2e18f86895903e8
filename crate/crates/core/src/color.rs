//! sRGB / CIELAB conversion and statistics-matching color transfer.

use image::{Rgb, RgbImage};

// sRGB primaries, D65 white.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];
const XYZ_TO_RGB: [[f64; 3]; 3] = invert(&RGB_TO_XYZ);
const WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];
const DELTA: f64 = 6.0 / 29.0;

/// Below this L*a*b* standard deviation a channel is treated as constant.
pub const SIGMA_EPSILON: f64 = 1e-6;

fn srgb_to_linear(c: f64) -> f64 {
    let s = c.abs();
    let v = if s <= 0.040_45 {
        s / 12.92
    } else {
        ((s + 0.055) / 1.055).powf(2.4)
    };
    v.copysign(c)
}

fn linear_to_srgb(c: f64) -> f64 {
    let s = c.abs();
    let v = if s <= 0.003_130_8 {
        s * 12.92
    } else {
        1.055 * s.powf(1.0 / 2.4) - 0.055
    };
    v.copysign(c)
}

fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn lab_f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

const fn invert(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    [
        [
            c00 / det,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det,
        ],
        [
            c01 / det,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det,
        ],
        [
            c02 / det,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det,
        ],
    ]
}

fn mat_mul(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// RGB on the 0–255 scale (not necessarily integral) to L*a*b*.
pub fn rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(|c| srgb_to_linear(c / 255.0));
    let xyz = mat_mul(&RGB_TO_XYZ, lin);
    let f = [
        lab_f(xyz[0] / WHITE[0]),
        lab_f(xyz[1] / WHITE[1]),
        lab_f(xyz[2] / WHITE[2]),
    ];
    [116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])]
}

/// Inverse of [`rgb_to_lab`]; the result may fall outside 0–255.
pub fn lab_to_rgb(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [
        WHITE[0] * lab_f_inv(fx),
        WHITE[1] * lab_f_inv(fy),
        WHITE[2] * lab_f_inv(fz),
    ];
    mat_mul(&XYZ_TO_RGB, xyz).map(|c| linear_to_srgb(c) * 255.0)
}

/// RGB image with `f64` samples on the 0–255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<[f64; 3]>,
}

impl FloatImage {
    pub fn from_rgb8(img: &RgbImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.pixels().map(|p| p.0.map(f64::from)).collect(),
        }
    }

    /// Rounds to the nearest integer and saturates to 0–255.
    pub fn to_rgb8(&self) -> RgbImage {
        let mut out = RgbImage::new(self.width, self.height);
        for (dst, src) in out.pixels_mut().zip(&self.data) {
            *dst = Rgb(src.map(|c| c.round().clamp(0.0, 255.0) as u8));
        }
        out
    }

    pub fn to_lab(&self) -> Vec<[f64; 3]> {
        self.data.iter().map(|&p| rgb_to_lab(p)).collect()
    }
}

/// Per-channel mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl ChannelStats {
    pub fn of(pixels: &[[f64; 3]]) -> Self {
        let n = pixels.len() as f64;
        let mut mean = [0.0; 3];
        for p in pixels {
            for k in 0..3 {
                mean[k] += p[k];
            }
        }
        mean = mean.map(|m| m / n);
        let mut var = [0.0; 3];
        for p in pixels {
            for k in 0..3 {
                let d = p[k] - mean[k];
                var[k] += d * d;
            }
        }
        Self {
            mean,
            std: var.map(|v| (v / n).sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferOutput {
    /// Recolored patch, clipped to 0–255 but not quantized.
    pub image: FloatImage,
    /// Transferred L*a*b* values before conversion back to RGB.
    pub lab: Vec<[f64; 3]>,
    /// Pixels with at least one channel clipped.
    pub clipped_pixels: usize,
}

impl TransferOutput {
    pub fn clipped_fraction(&self) -> f64 {
        if self.lab.is_empty() {
            0.0
        } else {
            self.clipped_pixels as f64 / self.lab.len() as f64
        }
    }
}

/// Recolors `patch` so its L*a*b* channel means and standard deviations
/// match those of `target_region`.
///
/// Per channel: `out = (src − μ_src)·(σ_tgt/σ_src) + μ_tgt`, or
/// `out = src − μ_src + μ_tgt` when `σ_src` is below [`SIGMA_EPSILON`].
///
/// # Panics
/// If either block is empty.
pub fn color_transfer(patch: &RgbImage, target_region: &RgbImage) -> TransferOutput {
    assert!(
        patch.width() * patch.height() > 0 && target_region.width() * target_region.height() > 0,
        "color transfer needs non-empty blocks"
    );
    let src = FloatImage::from_rgb8(patch).to_lab();
    let tgt = FloatImage::from_rgb8(target_region).to_lab();
    let s = ChannelStats::of(&src);
    let t = ChannelStats::of(&tgt);
    let lab: Vec<[f64; 3]> = src
        .iter()
        .map(|p| {
            let mut out = [0.0; 3];
            for k in 0..3 {
                out[k] = if s.std[k] < SIGMA_EPSILON {
                    p[k] - s.mean[k] + t.mean[k]
                } else {
                    (p[k] - s.mean[k]) * (t.std[k] / s.std[k]) + t.mean[k]
                };
            }
            out
        })
        .collect();

    let mut clipped_pixels = 0;
    let data = lab
        .iter()
        .map(|&l| {
            let rgb = lab_to_rgb(l);
            if rgb.iter().any(|&c| !(0.0..=255.0).contains(&c)) {
                clipped_pixels += 1;
            }
            rgb.map(|c| c.clamp(0.0, 255.0))
        })
        .collect();
    TransferOutput {
        image: FloatImage {
            width: patch.width(),
            height: patch.height(),
            data,
        },
        lab,
        clipped_pixels,
    }
}
