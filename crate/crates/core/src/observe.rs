//! Forward observation model: blur, resampling onto the detector lattice,
//! additive Gaussian noise and 8-bit quantization.

use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{fft2_inplace, kernel_transfer, symmetric_double};
use crate::image::{HexImage, RasterImage};
use crate::interp::bicubic_at;
use crate::optics::DiscretePsf;
use crate::sampling::{FieldOfView, HexGrid, RectGrid};

/// Relative tolerance when comparing pitches.
const PITCH_TOL: f64 = 1e-9;

pub(crate) fn check_pitch(image: f64, expected: f64) -> Result<()> {
    if ((image - expected) / expected).abs() > PITCH_TOL {
        return Err(Error::PitchMismatch { image, expected });
    }
    Ok(())
}

/// Convolution with a centered odd kernel under half-sample symmetric
/// extension, computed by FFT on the `2H x 2W` mirrored period.
pub fn convolve_symmetric(plane: ArrayView2<f64>, kernel: ArrayView2<f64>) -> Array2<f64> {
    if kernel.dim() == (1, 1) {
        return plane.mapv(|v| v * kernel[[0, 0]]);
    }
    let (h, w) = plane.dim();
    let doubled = symmetric_double(plane);
    let transfer = kernel_transfer(kernel, 2 * h, 2 * w);
    let mut spec = doubled.mapv(|v| Complex64::new(v, 0.0));
    fft2_inplace(&mut spec, false);
    spec *= &transfer;
    fft2_inplace(&mut spec, true);
    let norm = (4 * h * w) as f64;
    spec.slice(s![..h, ..w]).mapv(|z| z.re / norm)
}

/// Blurs each channel with its PSF.
pub fn blur(hr: &RasterImage, psfs: &[DiscretePsf]) -> Result<RasterImage> {
    if psfs.len() != hr.channels() {
        return Err(Error::ChannelCount {
            expected: hr.channels(),
            got: psfs.len(),
        });
    }
    for psf in psfs {
        check_pitch(hr.pitch, psf.pitch)?;
    }
    let planes: Vec<Array2<f64>> = psfs
        .par_iter()
        .enumerate()
        .map(|(c, psf)| convolve_symmetric(hr.channel(c), psf.kernel.view()))
        .collect();
    RasterImage::from_planes(&planes, hr.pitch)
}

fn fractional_index(img: &RasterImage, p: [f64; 2]) -> Result<(f64, f64)> {
    if !img.support().contains(p) {
        return Err(Error::OutsideImage { x: p[0], y: p[1] });
    }
    Ok((p[1] / img.pitch, p[0] / img.pitch))
}

/// Bicubic evaluation of `deg` at the points of `lr_grid`.
pub fn sample_to_rect(deg: &RasterImage, lr_grid: &RectGrid) -> Result<RasterImage> {
    let idx = lr_grid
        .points()
        .into_iter()
        .map(|p| fractional_index(deg, p))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Array3::zeros((deg.channels(), lr_grid.rows, lr_grid.cols));
    for (c, mut plane) in out.axis_iter_mut(Axis(0)).enumerate() {
        let src = deg.channel(c);
        for (v, &(r, col)) in plane.iter_mut().zip(&idx) {
            *v = bicubic_at(src, r, col);
        }
    }
    RasterImage::new(out, lr_grid.pitch)
}

/// Bicubic evaluation of `deg` at the hexagonal sample positions.
pub fn sample_to_hex(deg: &RasterImage, grid: &HexGrid) -> Result<HexImage> {
    let mut img = HexImage::zeros(*grid, deg.channels());
    for (k, plane) in img.planes.iter_mut().enumerate() {
        let (rows, cols) = grid.dims[k];
        let mut idx = Vec::with_capacity(rows * cols);
        for m in 0..rows {
            for n in 0..cols {
                idx.push(fractional_index(deg, grid.point(k, m, n))?);
            }
        }
        for (c, mut chan) in plane.axis_iter_mut(Axis(0)).enumerate() {
            let src = deg.channel(c);
            for (v, &(r, col)) in chan.iter_mut().zip(&idx) {
                *v = bicubic_at(src, r, col);
            }
        }
    }
    Ok(img)
}

/// Gaussian read noise followed by 8-bit quantization.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation in DU.
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { sigma, seed })
    }

    /// Spec for the `index`-th image of a dataset.
    pub fn for_image(&self, index: u64) -> Self {
        Self {
            sigma: self.sigma,
            seed: self
                .seed
                .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        }
    }

    /// ChaCha20 generator for one channel: seeded from `seed`, stream = channel.
    pub fn channel_rng(&self, channel: usize) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(channel as u64);
        rng
    }
}

/// Sample containers the noise model can act on.
pub trait SampleBuffer: Clone {
    fn channel_count(&self) -> usize;
    /// Visits every sample of a channel in storage order.
    fn for_each_in_channel(&mut self, channel: usize, f: &mut dyn FnMut(&mut f64));
}

impl SampleBuffer for RasterImage {
    fn channel_count(&self) -> usize {
        self.channels()
    }

    fn for_each_in_channel(&mut self, channel: usize, f: &mut dyn FnMut(&mut f64)) {
        self.channel_mut(channel).iter_mut().for_each(f);
    }
}

impl SampleBuffer for HexImage {
    fn channel_count(&self) -> usize {
        self.channels()
    }

    fn for_each_in_channel(&mut self, channel: usize, f: &mut dyn FnMut(&mut f64)) {
        for p in self.planes.iter_mut() {
            p.index_axis_mut(Axis(0), channel).iter_mut().for_each(&mut *f);
        }
    }
}

#[inline]
pub fn quantize(v: f64) -> f64 {
    v.clamp(0.0, 255.0).round()
}

/// Adds i.i.d. Gaussian noise, clips to `[0, 255]` and rounds.
pub fn add_noise_and_quantize<T: SampleBuffer>(img: &T, noise: &NoiseSpec) -> T {
    let mut out = img.clone();
    for c in 0..out.channel_count() {
        if noise.sigma > 0.0 {
            let dist = Normal::new(0.0, noise.sigma).expect("sigma checked");
            let mut rng = noise.channel_rng(c);
            out.for_each_in_channel(c, &mut |v| *v = quantize(*v + dist.sample(&mut rng)));
        } else {
            out.for_each_in_channel(c, &mut |v| *v = quantize(*v));
        }
    }
    out
}

/// `10 log10(var(clean) / var(noisy - clean))` over all samples.
pub fn snr_db(clean: &[f64], noisy: &[f64]) -> f64 {
    assert_eq!(clean.len(), noisy.len());
    fn var(x: impl Iterator<Item = f64> + Clone) -> f64 {
        let n = x.clone().count() as f64;
        let mean = x.clone().sum::<f64>() / n;
        x.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
    }
    let signal = var(clean.iter().copied());
    let noise = var(clean.iter().zip(noisy).map(|(a, b)| b - a));
    10.0 * (signal / noise).log10()
}

/// One element of the dihedral group of the square, acting on images:
/// optionally transpose, then optionally flip columns, then rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dihedral {
    pub transpose: bool,
    pub flip_lr: bool,
    pub flip_ud: bool,
}

type Mat2 = [[i8; 2]; 2];

impl Dihedral {
    pub const IDENTITY: Dihedral = Dihedral {
        transpose: false,
        flip_lr: false,
        flip_ud: false,
    };

    /// Identity, LR, UD, both flips, then the same four after a transpose.
    pub fn all() -> [Dihedral; 8] {
        let mut out = [Self::IDENTITY; 8];
        for (k, e) in out.iter_mut().enumerate() {
            *e = Dihedral {
                transpose: k >= 4,
                flip_lr: k % 2 == 1,
                flip_ud: (k / 2) % 2 == 1,
            };
        }
        out
    }

    /// Action on centered `(row, col)` coordinates.
    pub fn matrix(&self) -> Mat2 {
        let (su, sl) = (
            if self.flip_ud { -1 } else { 1 },
            if self.flip_lr { -1 } else { 1 },
        );
        if self.transpose {
            [[0, su], [sl, 0]]
        } else {
            [[su, 0], [0, sl]]
        }
    }

    pub fn from_matrix(m: Mat2) -> Dihedral {
        if m[0][1] == 0 {
            Dihedral {
                transpose: false,
                flip_ud: m[0][0] < 0,
                flip_lr: m[1][1] < 0,
            }
        } else {
            Dihedral {
                transpose: true,
                flip_ud: m[0][1] < 0,
                flip_lr: m[1][0] < 0,
            }
        }
    }

    /// `self` after `other`.
    pub fn compose(&self, other: &Dihedral) -> Dihedral {
        let (a, b) = (self.matrix(), other.matrix());
        let mut m = [[0i8; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Dihedral::from_matrix(m)
    }

    pub fn inverse(&self) -> Dihedral {
        // Signed permutation matrices are orthogonal.
        let m = self.matrix();
        Dihedral::from_matrix([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn apply(&self, img: &RasterImage) -> RasterImage {
        let mut v = img.data.view();
        if self.transpose {
            v.swap_axes(1, 2);
        }
        if self.flip_lr {
            v.invert_axis(Axis(2));
        }
        if self.flip_ud {
            v.invert_axis(Axis(1));
        }
        RasterImage {
            data: v.as_standard_layout().into_owned(),
            pitch: img.pitch,
        }
    }
}

/// The eight dihedral variants of `img`, in `Dihedral::all` order.
pub fn dihedral_augment(img: &RasterImage) -> Vec<RasterImage> {
    Dihedral::all().iter().map(|e| e.apply(img)).collect()
}

/// Low-resolution rectangular grid at pitch `d` anchored at the first HR
/// pixel center and covering the image.
pub fn lr_rect_grid(hr: &RasterImage, d: f64) -> Result<RectGrid> {
    RectGrid::covering(d, &hr.sampling_window())
}

/// Hexagonal grid anchored like `lr_rect_grid`.
pub fn lr_hex_grid(hr: &RasterImage, t1: f64, t2: f64) -> Result<HexGrid> {
    let fov: FieldOfView = hr.sampling_window();
    HexGrid::covering(t1, t2, &fov, false)
}

/// Blur, bicubic resampling to `grid`, noise and quantization.
pub fn observe_rect(
    hr: &RasterImage,
    psfs: &[DiscretePsf],
    grid: &RectGrid,
    noise: &NoiseSpec,
) -> Result<RasterImage> {
    let deg = blur(hr, psfs)?;
    Ok(add_noise_and_quantize(&sample_to_rect(&deg, grid)?, noise))
}

/// Hexagonal counterpart of [`observe_rect`].
pub fn observe_hex(
    hr: &RasterImage,
    psfs: &[DiscretePsf],
    grid: &HexGrid,
    noise: &NoiseSpec,
) -> Result<HexImage> {
    let deg = blur(hr, psfs)?;
    Ok(add_noise_and_quantize(&sample_to_hex(&deg, grid)?, noise))
}
