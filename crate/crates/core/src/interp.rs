//! Keys cubic convolution.

use ndarray::ArrayView2;

use crate::fft::reflect_index;

/// Keys kernel parameter.
pub const KEYS_A: f64 = -0.5;

#[inline]
pub fn keys_kernel(t: f64) -> f64 {
    let a = KEYS_A;
    let t = t.abs();
    if t < 1.0 {
        ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
    } else {
        0.0
    }
}

/// Tap weights for offsets `-1, 0, 1, 2` at fractional position `t` in `[0, 1)`.
#[inline]
pub fn keys_weights(t: f64) -> [f64; 4] {
    [
        keys_kernel(1.0 + t),
        keys_kernel(t),
        keys_kernel(1.0 - t),
        keys_kernel(2.0 - t),
    ]
}

/// Separable bicubic value at fractional pixel coordinates `(row, col)`.
/// Taps beyond the edge are mirrored about the outer pixel edge.
pub fn bicubic_at(plane: ArrayView2<f64>, row: f64, col: f64) -> f64 {
    let (h, w) = plane.dim();
    let (r0, c0) = (row.floor(), col.floor());
    let wr = keys_weights(row - r0);
    let wc = keys_weights(col - c0);
    let (r0, c0) = (r0 as isize, c0 as isize);
    let cols = [
        reflect_index(c0 - 1, w),
        reflect_index(c0, w),
        reflect_index(c0 + 1, w),
        reflect_index(c0 + 2, w),
    ];
    let mut acc = 0.0;
    for (dr, &a) in wr.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let r = reflect_index(r0 - 1 + dr as isize, h);
        let mut row_acc = 0.0;
        for (dc, &b) in wc.iter().enumerate() {
            if b != 0.0 {
                row_acc += b * plane[[r, cols[dc]]];
            }
        }
        acc += a * row_acc;
    }
    acc
}
