//! Built-in synthetic test images. All are 3-channel, values in `[0, 255]`.

use std::f64::consts::PI;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::RasterImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticImage {
    Constant {
        value: f64,
    },
    /// `offset + gx * x + gy * y` with `x, y` in pixels, clipped to `[0, 255]`.
    Ramp {
        offset: f64,
        gx: f64,
        gy: f64,
    },
    /// Radial chirp about the image center whose local frequency rises
    /// linearly from `f_min` at the center to `f_max` (cycles/um) at the
    /// largest radius.
    ZonePlate {
        f_min: f64,
        f_max: f64,
        amplitude: f64,
    },
    Checkerboard {
        /// Square side in pixels.
        period: usize,
        low: f64,
        high: f64,
    },
    /// Sum of random oriented cosines up to `f_max` cycles/um, with per-channel
    /// mixing. Frequencies are drawn as `f_max * U^2`, so most energy sits at
    /// low frequencies as in natural scenes.
    Texture {
        seed: u64,
        components: usize,
        f_max: f64,
    },
}

impl SyntheticImage {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::Ramp { .. } => "ramp",
            Self::ZonePlate { .. } => "zone_plate",
            Self::Checkerboard { .. } => "checkerboard",
            Self::Texture { .. } => "texture",
        }
    }

    pub fn render(&self, height: usize, width: usize, pitch: f64) -> Result<RasterImage> {
        if height == 0 || width == 0 {
            return Err(Error::TooSmall("synthetic image needs nonzero size".into()));
        }
        let data = match *self {
            Self::Constant { value } => Array3::from_elem((3, height, width), value),
            Self::Ramp { offset, gx, gy } => Array3::from_shape_fn((3, height, width), |(_, i, j)| {
                (offset + gx * j as f64 + gy * i as f64).clamp(0.0, 255.0)
            }),
            Self::ZonePlate {
                f_min,
                f_max,
                amplitude,
            } => {
                let (cy, cx) = (0.5 * (height as f64 - 1.0), 0.5 * (width as f64 - 1.0));
                let r_max = (cx * cx + cy * cy).sqrt() * pitch;
                let slope = (f_max - f_min) / r_max;
                Array3::from_shape_fn((3, height, width), |(_, i, j)| {
                    let r = ((i as f64 - cy).powi(2) + (j as f64 - cx).powi(2)).sqrt() * pitch;
                    let phase = 2.0 * PI * (f_min * r + 0.5 * slope * r * r);
                    127.5 + amplitude * phase.cos()
                })
            }
            Self::Checkerboard { period, low, high } => {
                if period == 0 {
                    return Err(Error::InvalidParameter("checkerboard period must be > 0".into()));
                }
                Array3::from_shape_fn((3, height, width), |(_, i, j)| {
                    if (i / period + j / period) % 2 == 0 {
                        low
                    } else {
                        high
                    }
                })
            }
            Self::Texture {
                seed,
                components,
                f_max,
            } => {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                let waves: Vec<_> = (0..components)
                    .map(|_| {
                        let f = f_max * rng.random::<f64>().powi(2);
                        let theta = rng.random_range(0.0..PI);
                        let phase = rng.random_range(0.0..2.0 * PI);
                        let mix = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
                        (f * theta.cos(), f * theta.sin(), phase, mix)
                    })
                    .collect();
                let norm = 90.0 / (components.max(1) as f64).sqrt();
                Array3::from_shape_fn((3, height, width), |(c, i, j)| {
                    let (x, y) = (j as f64 * pitch, i as f64 * pitch);
                    let s: f64 = waves
                        .iter()
                        .map(|(u, v, p, m)| (0.5 + m[c]) * (2.0 * PI * (u * x + v * y) + p).cos())
                        .sum();
                    (127.5 + norm * s).clamp(0.0, 255.0)
                })
            }
        };
        RasterImage::new(data, pitch)
    }
}

/// The default synthetic suite: constant, ramp, zone plate, checkerboard and
/// two textures.
pub fn standard_suite() -> Vec<SyntheticImage> {
    vec![
        SyntheticImage::Constant { value: 128.0 },
        SyntheticImage::Ramp {
            offset: 20.0,
            gx: 1.5,
            gy: 0.75,
        },
        SyntheticImage::ZonePlate {
            f_min: 0.0,
            f_max: 0.4,
            amplitude: 100.0,
        },
        SyntheticImage::Checkerboard {
            period: 8,
            low: 40.0,
            high: 210.0,
        },
        SyntheticImage::Texture {
            seed: 1,
            components: 24,
            f_max: 0.3,
        },
        SyntheticImage::Texture {
            seed: 2,
            components: 24,
            f_max: 0.3,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_renders_in_range() {
        for s in standard_suite() {
            let img = s.render(32, 40, 1.0).unwrap();
            assert_eq!(img.data.dim(), (3, 32, 40));
            assert!(img.data.iter().all(|v| (0.0..=255.0).contains(v)), "{}", s.name());
        }
        assert!(SyntheticImage::Constant { value: 1.0 }.render(0, 4, 1.0).is_err());
    }

    #[test]
    fn texture_is_seeded() {
        let t = SyntheticImage::Texture {
            seed: 5,
            components: 8,
            f_max: 0.2,
        };
        assert_eq!(t.render(16, 16, 1.0).unwrap(), t.render(16, 16, 1.0).unwrap());
    }
}
