//! Two-dimensional FFT helpers on top of `rustfft`, plus the half-sample
//! symmetric periodization shared by blurring and Wiener restoration.
//!
//! Convolving the half-sample symmetric extension of an image with any kernel
//! equals circular convolution on the `2H x 2W` mirrored array, so the
//! frequency-domain routes here are exact rather than approximate.

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place 2-D transform. `inverse` applies the unnormalized inverse.
pub fn fft2_inplace(data: &mut Array2<Complex64>, inverse: bool) {
    let (rows, cols) = data.dim();
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(cols)
    } else {
        planner.plan_fft_forward(cols)
    };
    let col_fft = if inverse {
        planner.plan_fft_inverse(rows)
    } else {
        planner.plan_fft_forward(rows)
    };

    let mut buf = vec![Complex64::default(); cols.max(rows)];
    for mut row in data.axis_iter_mut(Axis(0)) {
        let line = &mut buf[..cols];
        for (dst, src) in line.iter_mut().zip(row.iter()) {
            *dst = *src;
        }
        row_fft.process(line);
        for (dst, src) in row.iter_mut().zip(line.iter()) {
            *dst = *src;
        }
    }
    for mut col in data.axis_iter_mut(Axis(1)) {
        let line = &mut buf[..rows];
        for (dst, src) in line.iter_mut().zip(col.iter()) {
            *dst = *src;
        }
        col_fft.process(line);
        for (dst, src) in col.iter_mut().zip(line.iter()) {
            *dst = *src;
        }
    }
}

/// Forward transform of a real array.
pub fn fft2_real(data: ArrayView2<f64>) -> Array2<Complex64> {
    let mut out = data.mapv(|v| Complex64::new(v, 0.0));
    fft2_inplace(&mut out, false);
    out
}

/// Normalized inverse transform.
pub fn ifft2(spectrum: &Array2<Complex64>) -> Array2<Complex64> {
    let mut out = spectrum.clone();
    fft2_inplace(&mut out, true);
    let n = (out.len()) as f64;
    out.mapv_inplace(|v| v / n);
    out
}

/// Maps an arbitrary integer index onto `0..len` by half-sample symmetric
/// reflection (`x[-1] = x[0]`), i.e. the `2 * len` periodic mirror.
#[inline]
pub fn reflect_index(i: isize, len: usize) -> usize {
    let n = len as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    if m < n {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Builds the `2H x 2W` half-sample symmetric periodization of `plane`.
pub fn symmetric_double(plane: ArrayView2<f64>) -> Array2<f64> {
    let (h, w) = plane.dim();
    Array2::from_shape_fn((2 * h, 2 * w), |(i, j)| {
        plane[[reflect_index(i as isize, h), reflect_index(j as isize, w)]]
    })
}

/// Transfer function of a centered odd-sized kernel on a `rows x cols`
/// periodic grid. Taps that wrap past the period are folded, which is what
/// circular convolution with a periodic signal does anyway.
pub fn kernel_transfer(kernel: ArrayView2<f64>, rows: usize, cols: usize) -> Array2<Complex64> {
    let (kh, kw) = kernel.dim();
    let (ch, cw) = ((kh / 2) as isize, (kw / 2) as isize);
    let mut placed = Array2::<Complex64>::zeros((rows, cols));
    for ((i, j), &v) in kernel.indexed_iter() {
        let r = (i as isize - ch).rem_euclid(rows as isize) as usize;
        let c = (j as isize - cw).rem_euclid(cols as isize) as usize;
        placed[[r, c]].re += v;
    }
    fft2_inplace(&mut placed, false);
    placed
}

/// Signed DFT frequency index for bin `k` of an `n`-point transform.
#[inline]
pub fn signed_bin(k: usize, n: usize) -> isize {
    if k <= n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn reflect_matches_mirror_rule() {
        let got: Vec<usize> = (-4..8).map(|i| reflect_index(i, 3)).collect();
        assert_eq!(got, vec![2, 2, 1, 0, 0, 1, 2, 2, 1, 0, 0, 1]);
    }

    #[test]
    fn forward_inverse_round_trip() {
        let a = array![[1.0, 2.0, 3.0], [4.0, 5.0, -6.0]];
        let back = ifft2(&fft2_real(a.view()));
        for (x, y) in a.iter().zip(back.iter()) {
            assert!((x - y.re).abs() < 1e-12 && y.im.abs() < 1e-12);
        }
    }

    #[test]
    fn delta_kernel_has_flat_transfer() {
        let mut k = Array2::zeros((3, 3));
        k[[1, 1]] = 1.0;
        let t = kernel_transfer(k.view(), 4, 6);
        assert!(t.iter().all(|v| (v.re - 1.0).abs() < 1e-15 && v.im.abs() < 1e-15));
    }
}
