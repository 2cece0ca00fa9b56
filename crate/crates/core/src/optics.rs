//! Optical transfer function of a diffraction-limited camera with finite
//! detector elements, and its impulse-invariant discrete PSF.
//!
//! The continuous OTF is the product of the circular-pupil diffraction OTF
//! and the normalized Fourier transform magnitude of the detector footprint:
//!
//! ```text
//! H(u, v) = H_dif(rho / rho_c) * |H_det(u, v)|,   rho_c = 1 / (lambda * F)
//! ```
//!
//! Lengths are micrometres and spatial frequencies cycles per micrometre
//! throughout.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use ndarray::{s, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft2_inplace, signed_bin};

/// Maximum fraction of squared kernel mass that may fall outside the PSF window.
pub const TAIL_ENERGY_LIMIT: f64 = 1e-6;

/// Default PSF support at a 1 um HR pitch.
pub const DEFAULT_KERNEL_SIZE: usize = 129;

/// Wavelength and f-number of one color channel, plus the HR pitch the
/// channel is simulated on.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChannelOptics {
    /// Center wavelength in um.
    pub wavelength: f64,
    pub f_number: f64,
    /// HR sample pitch `p` in um.
    pub hr_pitch: f64,
}

impl ChannelOptics {
    pub fn new(wavelength: f64, f_number: f64, hr_pitch: f64) -> Result<Self> {
        for (name, v) in [
            ("wavelength", wavelength),
            ("f_number", f_number),
            ("hr_pitch", hr_pitch),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            wavelength,
            f_number,
            hr_pitch,
        })
    }

    /// Red channel of the reference camera (620 nm, F/4, 1 um HR pitch).
    pub fn red() -> Self {
        Self {
            wavelength: 0.620,
            f_number: 4.0,
            hr_pitch: 1.0,
        }
    }

    /// Green channel of the reference camera (540 nm, F/4, 1 um HR pitch).
    pub fn green() -> Self {
        Self {
            wavelength: 0.540,
            f_number: 4.0,
            hr_pitch: 1.0,
        }
    }

    /// Blue channel of the reference camera (460 nm, F/4, 1 um HR pitch).
    pub fn blue() -> Self {
        Self {
            wavelength: 0.460,
            f_number: 4.0,
            hr_pitch: 1.0,
        }
    }

    /// RGB channels in order.
    pub fn rgb() -> [Self; 3] {
        [Self::red(), Self::green(), Self::blue()]
    }

    /// Optical cutoff `1 / (lambda F)` in cycles/um.
    pub fn cutoff_frequency(&self) -> f64 {
        1.0 / (self.wavelength * self.f_number)
    }

    /// Largest sample pitch that avoids aliasing, `1 / (2 rho_c)`.
    pub fn nyquist_pitch(&self) -> f64 {
        0.5 * self.wavelength * self.f_number
    }

    /// Folding frequency of the HR grid, `1 / (2 p)`.
    pub fn folding_frequency(&self) -> f64 {
        0.5 / self.hr_pitch
    }
}

/// Diffraction OTF of a circular pupil at normalized radial frequency.
pub fn diffraction_otf(rho_normalized: f64) -> f64 {
    if rho_normalized >= 1.0 {
        return 0.0;
    }
    let rho = rho_normalized.max(0.0);
    (2.0 / PI) * (rho.acos() - rho * (1.0 - rho * rho).sqrt())
}

/// Active area of one detector element. Both shapes tile the focal plane
/// with 100% fill factor.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorShape {
    /// Square detector of side `width` on a rectangular lattice of the same pitch.
    Rectangle { width: f64 },
    /// Voronoi cell of the hexagonal lattice with horizontal pitch `t1` and
    /// vertical interlace pitch `t2`.
    Hexagon { t1: f64, t2: f64 },
}

impl DetectorShape {
    pub fn area(&self) -> f64 {
        match *self {
            DetectorShape::Rectangle { width } => width * width,
            DetectorShape::Hexagon { t1, t2 } => 0.5 * t1 * t2,
        }
    }

    /// Counter-clockwise vertices of the detector footprint, centered on the origin.
    pub fn polygon(&self) -> Vec<[f64; 2]> {
        match *self {
            DetectorShape::Rectangle { width } => {
                let h = 0.5 * width;
                vec![[-h, -h], [h, -h], [h, h], [-h, h]]
            }
            DetectorShape::Hexagon { t1, t2 } => voronoi_cell(t1, t2),
        }
    }
}

/// Voronoi cell of the lattice `{(i t1, j t2)} + {0, (t1/2, t2/2)}` around the origin.
fn voronoi_cell(t1: f64, t2: f64) -> Vec<[f64; 2]> {
    let l = 2.0 * (t1 + t2);
    let mut poly = vec![[-l, -l], [l, -l], [l, l], [-l, l]];
    for i in -2..=2 {
        for j in -2..=2 {
            for half in [0.0, 0.5] {
                let q = [(i as f64 + half) * t1, (j as f64 + half) * t2];
                let q2 = q[0] * q[0] + q[1] * q[1];
                if q2 == 0.0 {
                    continue;
                }
                poly = clip_half_plane(&poly, q, 0.5 * q2);
            }
        }
    }
    let scale = t1.max(t2);
    poly.dedup_by(|a, b| (a[0] - b[0]).hypot(a[1] - b[1]) < 1e-12 * scale);
    if poly.len() > 1 {
        let (first, last) = (poly[0], poly[poly.len() - 1]);
        if (first[0] - last[0]).hypot(first[1] - last[1]) < 1e-12 * scale {
            poly.pop();
        }
    }
    poly
}

/// Sutherland-Hodgman clip of a convex polygon by `{x : n . x <= c}`.
fn clip_half_plane(poly: &[[f64; 2]], n: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    let side = |p: [f64; 2]| n[0] * p[0] + n[1] * p[1] - c;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        let (sa, sb) = (side(a), side(b));
        if sa <= 0.0 {
            out.push(a);
        }
        if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
            let t = sa / (sa - sb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Continuous Fourier transform of a polygon's indicator function.
///
/// Uses the divergence theorem to turn the area integral into a sum over
/// edges, each contributing `(k x e) exp(-2 pi i k.m) sinc(k.e)` where `e`
/// is the edge vector and `m` its midpoint.
pub fn polygon_fourier_transform(poly: &[[f64; 2]], u: f64, v: f64) -> Complex64 {
    let k2 = u * u + v * v;
    let diam = poly
        .iter()
        .map(|p| p[0].hypot(p[1]))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    if k2.sqrt() * diam < 1e-9 {
        return Complex64::new(polygon_area(poly), 0.0);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let e = [b[0] - a[0], b[1] - a[1]];
        let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let cross = u * e[1] - v * e[0];
        let phase = -2.0 * PI * (u * m[0] + v * m[1]);
        acc += Complex64::from_polar(cross * sinc(u * e[0] + v * e[1]), phase);
    }
    acc * Complex64::new(0.0, 1.0 / (2.0 * PI * k2))
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let mut a = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

/// Detector OTF: magnitude of the footprint's Fourier transform, normalized
/// to unit DC gain.
pub fn detector_otf(shape: &DetectorShape, u: f64, v: f64) -> f64 {
    let poly = shape.polygon();
    polygon_fourier_transform(&poly, u, v).norm() / polygon_area(&poly)
}

/// Anything that can be evaluated as a real transfer function `H(u, v)`.
pub trait TransferFunction: Send + Sync + fmt::Debug {
    fn eval(&self, u: f64, v: f64) -> f64;
}

/// The identity system, `H = 1` everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitTransfer;

impl TransferFunction for UnitTransfer {
    fn eval(&self, _u: f64, _v: f64) -> f64 {
        1.0
    }
}

/// Diffraction times detector OTF for one channel.
#[derive(Debug, Clone)]
pub struct OtfModel {
    pub optics: ChannelOptics,
    pub detector: DetectorShape,
    polygon: Vec<[f64; 2]>,
    area: f64,
}

impl OtfModel {
    pub fn new(optics: ChannelOptics, detector: DetectorShape) -> Self {
        Self {
            optics,
            detector,
            polygon: detector.polygon(),
            area: polygon_area(&detector.polygon()),
        }
    }

    pub fn detector_value(&self, u: f64, v: f64) -> f64 {
        polygon_fourier_transform(&self.polygon, u, v).norm() / self.area
    }

    /// Radial frequency along the horizontal axis at which the combined OTF
    /// first drops below `level` (a fraction of the unit peak).
    pub fn contour_radius(&self, level: f64) -> f64 {
        contour_radius(self, self.optics.cutoff_frequency(), level)
    }
}

/// First radius along the `u` axis where `otf` falls below `level`, searched
/// on `[0, cutoff]` and refined by bisection. Returns `cutoff` if never crossed.
pub fn contour_radius(otf: &dyn TransferFunction, cutoff: f64, level: f64) -> f64 {
    let step = cutoff / 4096.0;
    let mut r = 0.0;
    let (mut lo, mut hi) = (cutoff, cutoff);
    while r < cutoff {
        let next = (r + step).min(cutoff);
        if otf.eval(next, 0.0) < level {
            lo = r;
            hi = next;
            break;
        }
        r = next;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if otf.eval(mid, 0.0) < level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

impl TransferFunction for OtfModel {
    fn eval(&self, u: f64, v: f64) -> f64 {
        let rho = u.hypot(v) / self.optics.cutoff_frequency();
        if rho >= 1.0 {
            return 0.0;
        }
        diffraction_otf(rho) * self.detector_value(u, v)
    }
}

/// Symmetric frequency axis `k * spacing` for `k` in `-half_count..=half_count`,
/// used for both `u` and `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub spacing: f64,
    pub half_count: usize,
}

impl FrequencyGrid {
    /// Grid with the given spacing that reaches at least `extent`.
    pub fn covering(extent: f64, spacing: f64) -> Self {
        let half_count = (extent / spacing).ceil() as usize;
        Self {
            spacing,
            half_count,
        }
    }

    pub fn len(&self) -> usize {
        2 * self.half_count + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn extent(&self) -> f64 {
        self.half_count as f64 * self.spacing
    }

    pub fn axis(&self) -> Vec<f64> {
        let h = self.half_count as isize;
        (-h..=h).map(|k| k as f64 * self.spacing).collect()
    }
}

/// A transfer function sampled on a frequency grid. `values[[iv, iu]]`.
#[derive(Debug, Clone)]
pub struct OtfSpec {
    pub grid: FrequencyGrid,
    pub values: Array2<f64>,
    /// Radial frequency beyond which the function is zero, if any.
    pub cutoff: Option<f64>,
    pub label: String,
    source: Arc<dyn TransferFunction>,
}

impl OtfSpec {
    /// Samples an arbitrary transfer function without resolution checks.
    pub fn from_transfer(
        source: Arc<dyn TransferFunction>,
        grid: FrequencyGrid,
        cutoff: Option<f64>,
        label: impl Into<String>,
    ) -> Self {
        let axis = grid.axis();
        let n = axis.len();
        let values = Array2::from_shape_fn((n, n), |(iv, iu)| source.eval(axis[iu], axis[iv]));
        Self {
            grid,
            values,
            cutoff,
            label: label.into(),
            source,
        }
    }

    pub fn value_at(&self, u: f64, v: f64) -> f64 {
        self.source.eval(u, v)
    }

    /// Writes the grid as CSV: the first row holds the `u` axis, the first
    /// column the `v` axis.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let axis = self.grid.axis();
        write!(out, "v\\u")?;
        for u in &axis {
            write!(out, ",{u}")?;
        }
        writeln!(out)?;
        for (iv, v) in axis.iter().enumerate() {
            write!(out, "{v}")?;
            for x in self.values.row(iv) {
                write!(out, ",{x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

impl TransferFunction for OtfSpec {
    fn eval(&self, u: f64, v: f64) -> f64 {
        self.source.eval(u, v)
    }
}

/// Samples the combined diffraction and detector OTF of one channel.
///
/// The grid must reach the optical cutoff and resolve it with at least 32
/// samples.
pub fn combined_otf(
    optics: &ChannelOptics,
    shape: &DetectorShape,
    grid: FrequencyGrid,
) -> Result<OtfSpec> {
    let rc = optics.cutoff_frequency();
    let limit = rc / 32.0;
    if grid.spacing > limit {
        return Err(Error::GridTooCoarse {
            spacing: grid.spacing,
            limit,
        });
    }
    if grid.extent() < rc {
        return Err(Error::GridTooSmall {
            extent: grid.extent(),
            cutoff: rc,
        });
    }
    let model = OtfModel::new(*optics, *shape);
    let label = format!(
        "lambda={} F={} {:?}",
        optics.wavelength, optics.f_number, shape
    );
    Ok(OtfSpec::from_transfer(
        Arc::new(model),
        grid,
        Some(rc),
        label,
    ))
}

/// Fraction of the OTF volume lying outside the square `[-f, f]^2`.
///
/// Both volumes use 2-D trapezoidal weights on the sample grid; a node counts
/// as outside when `max(|u|, |v|) > f`.
pub fn otf_volume_fraction_beyond(otf: &OtfSpec, folding_frequency: f64) -> f64 {
    let axis = otf.grid.axis();
    let n = axis.len();
    let w = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    let mut total = 0.0;
    let mut outside = 0.0;
    for iv in 0..n {
        for iu in 0..n {
            let x = w(iu) * w(iv) * otf.values[[iv, iu]];
            total += x;
            if axis[iu].abs() > folding_frequency || axis[iv].abs() > folding_frequency {
                outside += x;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        (outside / total).clamp(0.0, 1.0)
    }
}

/// Impulse-invariant PSF sampled at the HR pitch.
#[derive(Debug, Clone)]
pub struct DiscretePsf {
    /// Centered odd-sized kernel, summing to one.
    pub kernel: Array2<f64>,
    pub pitch: f64,
    /// Kernel sum before normalization.
    pub dc_gain: f64,
    /// Fraction of squared kernel mass outside the window (estimated against
    /// a 4x larger transform).
    pub tail_energy: f64,
    /// OTF volume dropped by the folding-frequency truncation, when known.
    pub truncated_volume: Option<f64>,
}

impl DiscretePsf {
    pub fn size(&self) -> usize {
        self.kernel.nrows()
    }

    /// The delta kernel: blurring with it is the identity.
    pub fn identity(pitch: f64) -> Self {
        Self {
            kernel: Array2::from_elem((1, 1), 1.0),
            pitch,
            dc_gain: 1.0,
            tail_energy: 0.0,
            truncated_volume: Some(0.0),
        }
    }

    /// Writes the kernel as CSV with spatial offsets (um) on the first row
    /// and column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.size();
        let c = (n / 2) as f64;
        let axis: Vec<f64> = (0..n).map(|i| (i as f64 - c) * self.pitch).collect();
        write!(out, "y\\x")?;
        for x in &axis {
            write!(out, ",{x}")?;
        }
        writeln!(out)?;
        for (i, y) in axis.iter().enumerate() {
            write!(out, "{y}")?;
            for v in self.kernel.row(i) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Samples `otf` on the DFT grid of an `n x n` array at `pitch`, zeroes content
/// beyond the folding frequency, and returns the centered inverse transform
/// (unnormalized).
pub fn sampled_kernel(otf: &dyn TransferFunction, pitch: f64, n: usize) -> Array2<f64> {
    let folding = 0.5 / pitch;
    let freq = |k: usize| signed_bin(k, n) as f64 / (n as f64 * pitch);
    let mut spectrum = Array2::from_shape_fn((n, n), |(kv, ku)| {
        let (u, v) = (freq(ku), freq(kv));
        if u.abs() > folding || v.abs() > folding {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(otf.eval(u, v), 0.0)
        }
    });
    fft2_inplace(&mut spectrum, true);
    let norm = (n * n) as f64;
    let c = n / 2;
    Array2::from_shape_fn((n, n), |(i, j)| {
        let si = (i + n - c) % n;
        let sj = (j + n - c) % n;
        spectrum[[si, sj]].re / norm
    })
}

/// Builds the impulse-invariant discrete PSF of a transfer function.
///
/// Fails when the `kernel_size` window discards [`TAIL_ENERGY_LIMIT`] or more
/// of the kernel's squared mass.
pub fn impulse_invariant_kernel(
    otf: &dyn TransferFunction,
    hr_pitch: f64,
    kernel_size: usize,
) -> Result<DiscretePsf> {
    if kernel_size.is_multiple_of(2) || kernel_size == 0 {
        return Err(Error::EvenKernel(kernel_size));
    }
    if !(hr_pitch > 0.0 && hr_pitch.is_finite()) {
        return Err(Error::NonPositivePitch(hr_pitch));
    }
    let mut kernel = sampled_kernel(otf, hr_pitch, kernel_size);

    let big = 4 * kernel_size + 1;
    let reference = sampled_kernel(otf, hr_pitch, big);
    let (c, r) = (big / 2, kernel_size / 2);
    let total: f64 = reference.iter().map(|v| v * v).sum();
    let inner: f64 = reference
        .slice(s![c - r..=c + r, c - r..=c + r])
        .iter()
        .map(|v| v * v)
        .sum();
    let tail_energy = if total > 0.0 {
        ((total - inner) / total).max(0.0)
    } else {
        0.0
    };
    if tail_energy >= TAIL_ENERGY_LIMIT {
        return Err(Error::KernelTooSmall {
            size: kernel_size,
            tail: tail_energy,
            limit: TAIL_ENERGY_LIMIT,
        });
    }

    let dc_gain: f64 = kernel.sum();
    kernel.mapv_inplace(|v| v / dc_gain);
    Ok(DiscretePsf {
        kernel,
        pitch: hr_pitch,
        dc_gain,
        tail_energy,
        truncated_volume: None,
    })
}

/// Impulse-invariant PSF of a sampled OTF, also reporting the OTF volume the
/// folding-frequency truncation removed.
pub fn impulse_invariant_psf(
    otf: &OtfSpec,
    hr_pitch: f64,
    kernel_size: usize,
) -> Result<DiscretePsf> {
    let mut psf = impulse_invariant_kernel(otf, hr_pitch, kernel_size)?;
    psf.truncated_volume = Some(otf_volume_fraction_beyond(otf, 0.5 / hr_pitch));
    if psf.kernel.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite PSF".into()));
    }
    Ok(psf)
}

/// Frequency grid resolving the cutoff of `optics` with `per_cutoff` samples.
pub fn diagnostic_grid(optics: &ChannelOptics, per_cutoff: usize) -> FrequencyGrid {
    let rc = optics.cutoff_frequency();
    FrequencyGrid::covering(rc, rc / per_cutoff as f64)
}

/// PSF of one channel at its HR pitch with the default diagnostic grid.
pub fn channel_psf(
    optics: &ChannelOptics,
    detector: &DetectorShape,
    kernel_size: usize,
) -> Result<DiscretePsf> {
    let otf = combined_otf(optics, detector, diagnostic_grid(optics, 64))?;
    impulse_invariant_psf(&otf, optics.hr_pitch, kernel_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diffraction_spot_values() {
        assert_eq!(diffraction_otf(0.0), 1.0);
        assert_eq!(diffraction_otf(1.0), 0.0);
        assert_eq!(diffraction_otf(3.5), 0.0);
        let direct = (2.0 / PI) * (0.5f64.acos() - 0.5 * 0.75f64.sqrt());
        assert_abs_diff_eq!(diffraction_otf(0.5), direct, epsilon = 1e-15);
        assert_abs_diff_eq!(diffraction_otf(0.5), 0.391002, epsilon = 1e-6);
    }

    #[test]
    fn table_channel_constants() {
        let g = ChannelOptics::green();
        assert_abs_diff_eq!(g.cutoff_frequency(), 0.4630, epsilon = 5e-4);
        assert_abs_diff_eq!(g.nyquist_pitch(), 1.080, epsilon = 1e-3);
        assert_abs_diff_eq!(ChannelOptics::red().cutoff_frequency(), 0.4032, epsilon = 1e-4);
        assert_abs_diff_eq!(ChannelOptics::blue().nyquist_pitch(), 0.92, epsilon = 1e-4);
        for ch in ChannelOptics::rgb() {
            assert_eq!(ch.nyquist_pitch() * ch.cutoff_frequency() * 2.0, 1.0);
        }
        assert!(ChannelOptics::new(0.5, -1.0, 1.0).is_err());
    }

    #[test]
    fn ideal_hexagon_cell_is_regular() {
        let t1 = 4.298;
        let shape = DetectorShape::Hexagon {
            t1,
            t2: 3f64.sqrt() * t1,
        };
        let poly = shape.polygon();
        assert_eq!(poly.len(), 6);
        let r = t1 / 3f64.sqrt();
        for p in &poly {
            assert_abs_diff_eq!(p[0].hypot(p[1]), r, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(polygon_area(&poly), shape.area(), epsilon = 1e-10);
    }

    #[test]
    fn detector_areas_match() {
        let rect = DetectorShape::Rectangle { width: 4.0 };
        let hex = DetectorShape::Hexagon {
            t1: 4.298,
            t2: 7.445,
        };
        assert_eq!(rect.area(), 16.0);
        assert!((hex.area() - 16.0).abs() / 16.0 < 1e-3);
    }

    #[test]
    fn rectangle_detector_is_a_sinc() {
        let rect = DetectorShape::Rectangle { width: 4.0 };
        assert_eq!(detector_otf(&rect, 0.0, 0.0), 1.0);
        assert!(detector_otf(&rect, 0.25, 0.0) < 1e-14);
        for &(u, v) in &[(0.1, 0.0), (0.13, 0.07), (-0.31, 0.2), (0.45, -0.45)] {
            let expect = (sinc(4.0 * u) * sinc(4.0 * v)).abs();
            assert_abs_diff_eq!(detector_otf(&rect, u, v), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn hexagon_detector_has_unit_dc() {
        let hex = DetectorShape::Hexagon {
            t1: 4.298,
            t2: 7.445,
        };
        assert_abs_diff_eq!(detector_otf(&hex, 0.0, 0.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn combined_otf_rejects_coarse_grids() {
        let g = ChannelOptics::green();
        let rect = DetectorShape::Rectangle { width: 4.0 };
        let rc = g.cutoff_frequency();
        let coarse = FrequencyGrid::covering(rc, rc / 16.0);
        assert!(matches!(
            combined_otf(&g, &rect, coarse),
            Err(Error::GridTooCoarse { .. })
        ));
        let short = FrequencyGrid {
            spacing: rc / 64.0,
            half_count: 10,
        };
        assert!(matches!(
            combined_otf(&g, &rect, short),
            Err(Error::GridTooSmall { .. })
        ));
    }

    #[test]
    fn combined_otf_spot_values() {
        let g = ChannelOptics::green();
        let rect = DetectorShape::Rectangle { width: 4.0 };
        let otf = combined_otf(&g, &rect, diagnostic_grid(&g, 64)).unwrap();
        let h = otf.grid.half_count;
        assert_eq!(otf.values[[h, h]], 1.0);
        assert_eq!(otf.value_at(g.cutoff_frequency(), 0.0), 0.0);
        assert_eq!(otf.value_at(0.4630, 0.0), 0.0);
        assert!(otf.value_at(0.25, 0.0) < 1e-14);
        assert!(otf.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn unit_otf_gives_delta_kernel() {
        let psf = impulse_invariant_kernel(&UnitTransfer, 1.0, 9).unwrap();
        for ((i, j), &v) in psf.kernel.indexed_iter() {
            let expect = if i == 4 && j == 4 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(v, expect, epsilon = 1e-12);
        }
        assert_eq!(psf.tail_energy, 0.0);
    }

    #[test]
    fn psf_rejects_even_or_small_kernels() {
        let model = OtfModel::new(ChannelOptics::green(), DetectorShape::Rectangle { width: 4.0 });
        assert!(matches!(
            impulse_invariant_kernel(&model, 1.0, 32),
            Err(Error::EvenKernel(32))
        ));
        assert!(matches!(
            impulse_invariant_kernel(&model, 1.0, 33),
            Err(Error::KernelTooSmall { .. })
        ));
        assert!(matches!(
            impulse_invariant_kernel(&model, 0.0, 33),
            Err(Error::NonPositivePitch(_))
        ));
    }

    #[test]
    fn green_psf_is_normalized() {
        let psf = channel_psf(
            &ChannelOptics::green(),
            &DetectorShape::Rectangle { width: 4.0 },
            DEFAULT_KERNEL_SIZE,
        )
        .unwrap();
        assert_abs_diff_eq!(psf.kernel.sum(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(psf.dc_gain, 1.0, epsilon = 1e-9);
        assert!(psf.tail_energy < TAIL_ENERGY_LIMIT);
        assert_eq!(psf.truncated_volume, Some(0.0));
    }

    #[test]
    fn volume_fraction_vanishes_past_cutoff() {
        let g = ChannelOptics::green();
        let otf = combined_otf(&g, &DetectorShape::Rectangle { width: 4.0 }, diagnostic_grid(&g, 64))
            .unwrap();
        assert_eq!(otf_volume_fraction_beyond(&otf, g.cutoff_frequency()), 0.0);
        assert_eq!(otf_volume_fraction_beyond(&otf, 0.5), 0.0);
    }

    #[test]
    fn contour_radius_brackets_level() {
        let model = OtfModel::new(ChannelOptics::green(), DetectorShape::Rectangle { width: 4.0 });
        let r = model.contour_radius(0.1);
        assert!(model.eval(r - 1e-6, 0.0) >= 0.1);
        assert!(model.eval(r + 1e-6, 0.0) < 0.1);
    }

    #[test]
    fn csv_export_has_axes() {
        let psf = DiscretePsf::identity(1.0);
        let mut buf = Vec::new();
        psf.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "y\\x,0\n0,1\n");
    }
}
