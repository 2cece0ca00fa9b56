//! PSNR and SSIM on luma and RGB with border shaving.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::image::RasterImage;

pub const DEFAULT_SHAVE: usize = 6;
pub const PEAK: f64 = 255.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// YCbCr luma convention.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LumaSwing {
    /// BT.601 studio swing, Y in `[16, 235]`.
    #[default]
    Studio,
    /// BT.601 full swing, Y in `[0, 255]`.
    Full,
}

pub fn to_luma(img: &RasterImage, swing: LumaSwing) -> Result<RasterImage> {
    if img.channels() != 3 {
        return Err(Error::ChannelCount {
            expected: 3,
            got: img.channels(),
        });
    }
    let (r, g, b) = (img.channel(0), img.channel(1), img.channel(2));
    let mut y = Array2::zeros(r.dim());
    ndarray::Zip::from(&mut y)
        .and(&r)
        .and(&g)
        .and(&b)
        .for_each(|y, &r, &g, &b| {
            *y = match swing {
                LumaSwing::Studio => 16.0 + (65.481 * r + 128.553 * g + 24.966 * b) / 255.0,
                LumaSwing::Full => 0.299 * r + 0.587 * g + 0.114 * b,
            }
        });
    RasterImage::from_planes(&[y], img.pitch)
}

fn shaved<'a>(img: &'a RasterImage, shave: usize) -> Result<ndarray::ArrayView3<'a, f64>> {
    let (h, w) = (img.height(), img.width());
    if 2 * shave >= h.min(w) {
        return Err(Error::TooSmall(format!("{h}x{w} image cannot lose {shave} px per edge")));
    }
    Ok(img.data.slice(s![.., shave..h - shave, shave..w - shave]))
}

/// PSNR in dB pooling every channel into one MSE. Identical inputs give
/// `f64::INFINITY`.
pub fn psnr(a: &RasterImage, b: &RasterImage, peak: f64, shave: usize) -> Result<f64> {
    a.check_same_shape(b)?;
    let (va, vb) = (shaved(a, shave)?, shaved(b, shave)?);
    let n = va.len() as f64;
    let mse = va
        .iter()
        .zip(vb.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn gaussian_window() -> Array1<f64> {
    let c = (SSIM_WINDOW / 2) as f64;
    let g = Array1::from_shape_fn(SSIM_WINDOW, |i| {
        let x = i as f64 - c;
        (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
    });
    let s = g.sum();
    g / s
}

/// Separable 'valid' correlation with a symmetric 1-D window.
fn filter_valid(x: ArrayView2<f64>, g: &Array1<f64>) -> Array2<f64> {
    let k = g.len();
    let (h, w) = x.dim();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut rows = Array2::<f64>::zeros((h, ow));
    for i in 0..h {
        for j in 0..ow {
            rows[[i, j]] = (0..k).map(|t| g[t] * x[[i, j + t]]).sum();
        }
    }
    let mut out = Array2::<f64>::zeros((oh, ow));
    for i in 0..oh {
        for j in 0..ow {
            out[[i, j]] = (0..k).map(|t| g[t] * rows[[i + t, j]]).sum();
        }
    }
    out
}

fn ssim_plane(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let g = gaussian_window();
    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let mu_a = filter_valid(a, &g);
    let mu_b = filter_valid(b, &g);
    let aa = filter_valid((&a * &a).view(), &g);
    let bb = filter_valid((&b * &b).view(), &g);
    let ab = filter_valid((&a * &b).view(), &g);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a.as_slice().unwrap()[i], mu_b.as_slice().unwrap()[i]);
        let va = aa.as_slice().unwrap()[i] - ma * ma;
        let vb = bb.as_slice().unwrap()[i] - mb * mb;
        let cov = ab.as_slice().unwrap()[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    total / mu_a.len() as f64
}

/// Mean SSIM over the shaved interior; multi-channel inputs average the
/// per-channel values.
pub fn ssim(a: &RasterImage, b: &RasterImage, shave: usize) -> Result<f64> {
    a.check_same_shape(b)?;
    let (va, vb) = (shaved(a, shave)?, shaved(b, shave)?);
    let (_, h, w) = va.dim();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::TooSmall(format!(
            "{h}x{w} after shaving, SSIM needs {SSIM_WINDOW}x{SSIM_WINDOW}"
        )));
    }
    let per: Vec<f64> = va
        .axis_iter(Axis(0))
        .zip(vb.axis_iter(Axis(0)))
        .map(|(x, y)| ssim_plane(x, y))
        .collect();
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MetricReport {
    pub psnr_y: f64,
    pub ssim_y: f64,
    pub psnr_rgb: f64,
    pub ssim_rgb: f64,
    pub shave: usize,
}

/// All four metrics of an RGB estimate against the truth.
pub fn evaluate(estimate: &RasterImage, truth: &RasterImage, shave: usize, swing: LumaSwing) -> Result<MetricReport> {
    let (ye, yt) = (to_luma(estimate, swing)?, to_luma(truth, swing)?);
    Ok(MetricReport {
        psnr_y: psnr(&ye, &yt, PEAK, shave)?,
        ssim_y: ssim(&ye, &yt, shave)?,
        psnr_rgb: psnr(estimate, truth, PEAK, shave)?,
        ssim_rgb: ssim(estimate, truth, shave)?,
        shave,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array3;

    fn rgb(r: f64, g: f64, b: f64) -> RasterImage {
        let mut img = RasterImage::zeros(3, 1, 1, 1.0);
        img.data[[0, 0, 0]] = r;
        img.data[[1, 0, 0]] = g;
        img.data[[2, 0, 0]] = b;
        img
    }

    #[test]
    fn luma_endpoints() {
        let y = |r, g, b| to_luma(&rgb(r, g, b), LumaSwing::Studio).unwrap().data[[0, 0, 0]];
        assert_abs_diff_eq!(y(255.0, 255.0, 255.0), 235.0, epsilon = 0.01);
        assert_eq!(y(0.0, 0.0, 0.0), 16.0);
        assert!(y(128.0, 128.0, 128.0) > 16.0 && y(128.0, 128.0, 128.0) < 235.0);
        let full = to_luma(&rgb(255.0, 255.0, 255.0), LumaSwing::Full).unwrap();
        assert_abs_diff_eq!(full.data[[0, 0, 0]], 255.0, epsilon = 1e-9);
        assert!(to_luma(&RasterImage::zeros(1, 2, 2, 1.0), LumaSwing::Studio).is_err());
    }

    #[test]
    fn psnr_of_unit_mse() {
        let a = RasterImage::filled(3, 20, 20, 1.0, 50.0);
        let b = a.map(|v| v + 1.0);
        assert_abs_diff_eq!(psnr(&a, &b, PEAK, 6).unwrap(), 48.1308, epsilon = 1e-3);
        assert_eq!(psnr(&a, &a, PEAK, 6).unwrap(), f64::INFINITY);
        assert!(psnr(&a, &b, PEAK, 10).is_err());
    }

    #[test]
    fn ssim_constant_closed_form() {
        let a = RasterImage::filled(1, 30, 30, 1.0, 100.0);
        let b = a.map(|v| v + 10.0);
        let c1 = (0.01f64 * 255.0).powi(2);
        let expect = (2.0 * 100.0 * 110.0 + c1) / (100.0f64.powi(2) + 110.0f64.powi(2) + c1);
        assert_abs_diff_eq!(ssim(&a, &b, 6).unwrap(), expect, epsilon = 1e-9);
        let small = RasterImage::zeros(1, 20, 20, 1.0);
        assert!(matches!(ssim(&small, &small, 6), Err(Error::TooSmall(_))));
    }

    #[test]
    fn ssim_of_negative_is_below_one() {
        let a = RasterImage::new(
            Array3::from_shape_fn((1, 30, 30), |(_, i, j)| ((i * 31 + j * 17) % 256) as f64),
            1.0,
        )
        .unwrap();
        let b = a.map(|v| 255.0 - v);
        assert_eq!(ssim(&a, &a, 6).unwrap(), 1.0);
        assert!(ssim(&a, &b, 6).unwrap() < 1.0);
    }
}
