//! Frequency-domain Wiener restoration and noise-to-signal ratio fitting.

use ndarray::{s, Array2, ArrayView2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{fft2_inplace, fft2_real, kernel_transfer, symmetric_double};
use crate::image::RasterImage;
use crate::observe::check_pitch;
use crate::optics::DiscretePsf;

/// Filter gains are zeroed where `|H|^2 + nsr` falls below this.
const MIN_DENOMINATOR: f64 = 1e-20;

pub const NSR_RANGE: (f64, f64) = (1e-5, 1.0);
pub const GOLDEN_ITERATIONS: usize = 40;
pub const SCAN_POINTS: usize = 50;

#[derive(Debug, Clone)]
pub struct WienerFilterSpec {
    pub psf: DiscretePsf,
    pub nsr: f64,
    pub channel: String,
}

impl WienerFilterSpec {
    pub fn new(psf: DiscretePsf, nsr: f64, channel: impl Into<String>) -> Result<Self> {
        if !(nsr >= 0.0 && nsr.is_finite()) {
            return Err(Error::InvalidParameter(format!("nsr must be >= 0, got {nsr}")));
        }
        Ok(Self {
            psf,
            nsr,
            channel: channel.into(),
        })
    }
}

#[inline]
fn gain(h: Complex64, nsr: f64) -> Complex64 {
    let den = h.norm_sqr() + nsr;
    if den < MIN_DENOMINATOR {
        Complex64::new(0.0, 0.0)
    } else {
        h.conj() / den
    }
}

/// Restored spectrum inverse-transformed on the mirrored period (complex).
fn restore_doubled(plane: ArrayView2<f64>, kernel: ArrayView2<f64>, nsr: f64) -> Array2<Complex64> {
    let (h, w) = plane.dim();
    let transfer = kernel_transfer(kernel, 2 * h, 2 * w);
    let mut spec = fft2_real(symmetric_double(plane).view());
    spec.zip_mut_with(&transfer, |g, &t| *g *= gain(t, nsr));
    fft2_inplace(&mut spec, true);
    let n = (4 * h * w) as f64;
    spec.mapv_inplace(|z| z / n);
    spec
}

/// Wiener filter `conj(H) / (|H|^2 + nsr)` on one plane, with half-sample
/// symmetric extension.
pub fn wiener_plane(plane: ArrayView2<f64>, kernel: ArrayView2<f64>, nsr: f64) -> Array2<f64> {
    let (h, w) = plane.dim();
    restore_doubled(plane, kernel, nsr)
        .slice(s![..h, ..w])
        .mapv(|z| z.re)
}

/// Restores each channel with its own filter.
pub fn wiener_restore(img: &RasterImage, specs: &[WienerFilterSpec]) -> Result<RasterImage> {
    if specs.len() != img.channels() {
        return Err(Error::ChannelCount {
            expected: img.channels(),
            got: specs.len(),
        });
    }
    for s in specs {
        check_pitch(img.pitch, s.psf.pitch)?;
    }
    let planes: Vec<Array2<f64>> = specs
        .par_iter()
        .enumerate()
        .map(|(c, s)| wiener_plane(img.channel(c), s.psf.kernel.view(), s.nsr))
        .collect();
    RasterImage::from_planes(&planes, img.pitch)
}

/// Outcome of an NSR fit for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NsrFit {
    /// Arithmetic mean of the per-image optima.
    pub nsr: f64,
    pub per_image: Vec<f64>,
    /// Set when a coarse scan found a non-unimodal MSE curve for some image;
    /// the golden-section search was then confined around the scan minimum.
    pub fallback_used: bool,
}

fn is_mirror_symmetric(k: ArrayView2<f64>) -> bool {
    let (h, w) = k.dim();
    let tol = 1e-12 * k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    k.indexed_iter().all(|((i, j), &v)| {
        (v - k[[h - 1 - i, j]]).abs() <= tol && (v - k[[i, w - 1 - j]]).abs() <= tol
    })
}

/// MSE of the restored plane against the truth as a function of nsr.
enum MseEvaluator<'a> {
    /// Filtering on the precomputed mirrored-period spectrum; valid for
    /// mirror-symmetric kernels, whose output stays mirror-symmetric.
    /// Without a shave the MSE follows from Parseval.
    Spectral {
        numer: Array2<Complex64>,
        power: Array2<f64>,
        truth_spectrum: Array2<Complex64>,
        truth: ArrayView2<'a, f64>,
        shave: usize,
    },
    Direct {
        deg: ArrayView2<'a, f64>,
        truth: ArrayView2<'a, f64>,
        kernel: ArrayView2<'a, f64>,
        shave: usize,
    },
}

fn interior_mse(r: ArrayView2<f64>, truth: ArrayView2<f64>, b: usize) -> f64 {
    let (h, w) = truth.dim();
    let (r, t) = (r.slice(s![b..h - b, b..w - b]), truth.slice(s![b..h - b, b..w - b]));
    let n = r.len() as f64;
    r.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n
}

impl<'a> MseEvaluator<'a> {
    fn new(deg: ArrayView2<'a, f64>, truth: ArrayView2<'a, f64>, kernel: ArrayView2<'a, f64>, shave: usize) -> Self {
        if !is_mirror_symmetric(kernel) {
            return Self::Direct {
                deg,
                truth,
                kernel,
                shave,
            };
        }
        let (h, w) = deg.dim();
        let transfer = kernel_transfer(kernel, 2 * h, 2 * w);
        let g = fft2_real(symmetric_double(deg).view());
        let numer = &g * &transfer.mapv(|t| t.conj());
        let power = transfer.mapv(|t| t.norm_sqr());
        let truth_spectrum = if shave == 0 {
            fft2_real(symmetric_double(truth).view())
        } else {
            Array2::zeros((0, 0))
        };
        Self::Spectral {
            numer,
            power,
            truth_spectrum,
            truth,
            shave,
        }
    }

    fn mse(&self, nsr: f64) -> f64 {
        let filter = |num: &Complex64, p: f64| {
            let den = p + nsr;
            if den < MIN_DENOMINATOR {
                Complex64::new(0.0, 0.0)
            } else {
                num / den
            }
        };
        match self {
            Self::Spectral {
                numer,
                power,
                truth_spectrum,
                shave: 0,
                ..
            } => {
                let n = numer.len() as f64;
                let acc: f64 = numer
                    .iter()
                    .zip(power)
                    .zip(truth_spectrum)
                    .map(|((num, &p), t)| (filter(num, p) - t).norm_sqr())
                    .sum();
                acc / (n * n)
            }
            Self::Spectral {
                numer,
                power,
                truth,
                shave,
                ..
            } => {
                let mut spec = Array2::from_shape_fn(numer.dim(), |ix| filter(&numer[ix], power[ix]));
                fft2_inplace(&mut spec, true);
                let n = spec.len() as f64;
                let (h, w) = truth.dim();
                let r = spec.slice(s![..h, ..w]).mapv(|z| z.re / n);
                interior_mse(r.view(), *truth, *shave)
            }
            Self::Direct {
                deg,
                truth,
                kernel,
                shave,
            } => interior_mse(wiener_plane(*deg, *kernel, nsr).view(), *truth, *shave),
        }
    }
}

/// Golden-section minimization of `f` on `[a, b]`.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iterations: usize) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iterations {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Minimizes MSE over `log10(nsr)` in `range`. Returns the nsr and whether
/// the fallback bracket was used.
fn fit_one(eval: &MseEvaluator<'_>, range: (f64, f64)) -> (f64, bool) {
    let (lo, hi) = (range.0.log10(), range.1.log10());
    let f = |x: f64| eval.mse(10f64.powf(x));
    let xs: Vec<f64> = (0..SCAN_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let best = ys
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let unimodal =
        ys[..=best].windows(2).all(|w| w[1] <= w[0]) && ys[best..].windows(2).all(|w| w[1] >= w[0]);
    let (a, b) = if unimodal {
        (lo, hi)
    } else {
        (xs[best.saturating_sub(1)], xs[(best + 1).min(SCAN_POINTS - 1)])
    };
    let x = golden_section(f, a, b, GOLDEN_ITERATIONS);
    (10f64.powf(x), !unimodal)
}

/// Fits the nsr of one channel over `(degraded, truth)` pairs.
pub fn fit_nsr(
    pairs: &[(RasterImage, RasterImage)],
    channel: usize,
    psf: &DiscretePsf,
    range: (f64, f64),
) -> Result<NsrFit> {
    fit_nsr_interior(pairs, channel, psf, range, 0)
}

/// [`fit_nsr`] with the MSE taken over the image interior only, `shave`
/// pixels in from every edge. The filter still runs on the whole image.
pub fn fit_nsr_interior(
    pairs: &[(RasterImage, RasterImage)],
    channel: usize,
    psf: &DiscretePsf,
    range: (f64, f64),
    shave: usize,
) -> Result<NsrFit> {
    if pairs.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if !(range.0 > 0.0 && range.1 > range.0) {
        return Err(Error::InvalidParameter(format!("bad nsr range {range:?}")));
    }
    for (deg, truth) in pairs {
        deg.check_same_shape(truth)?;
        check_pitch(deg.pitch, psf.pitch)?;
        if channel >= deg.channels() {
            return Err(Error::ChannelCount {
                expected: channel + 1,
                got: deg.channels(),
            });
        }
        if 2 * shave >= deg.height().min(deg.width()) {
            return Err(Error::TooSmall(format!(
                "shave {shave} leaves nothing of a {}x{} image",
                deg.height(),
                deg.width()
            )));
        }
    }
    let fits: Vec<(f64, bool)> = pairs
        .par_iter()
        .map(|(deg, truth)| {
            let eval = MseEvaluator::new(deg.channel(channel), truth.channel(channel), psf.kernel.view(), shave);
            fit_one(&eval, range)
        })
        .collect();
    let per_image: Vec<f64> = fits.iter().map(|f| f.0).collect();
    Ok(NsrFit {
        nsr: per_image.iter().sum::<f64>() / per_image.len() as f64,
        fallback_used: fits.iter().any(|f| f.1),
        per_image,
    })
}
