use hexsr_core::image::{HexImage, RasterImage};
use hexsr_core::resample::*;
use hexsr_core::sampling::{FieldOfView, HexGrid, Lattice, RectGrid};
use ndarray::Array3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const T1: f64 = 4.298;

fn brute_force(points: &[[f64; 2]], target: &RectGrid) -> Vec<f64> {
    target
        .points()
        .iter()
        .map(|q| {
            points
                .iter()
                .map(|p| {
                    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
                    (dx * dx + dy * dy).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

#[test]
fn distance_matrix_equals_brute_force() {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    for _ in 0..25 {
        let n = rng.random_range(1..=500);
        let spread = rng.random_range(5.0..80.0);
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random_range(-10.0..spread), rng.random_range(-10.0..spread)])
            .collect();
        let target = RectGrid::new(
            rng.random_range(0.3..2.0),
            rng.random_range(1..=50),
            rng.random_range(1..=50),
            [rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)],
        )
        .unwrap();
        let fast = distance_matrix(&pts, &target).unwrap();
        assert_eq!(fast.values.iter().copied().collect::<Vec<_>>(), brute_force(&pts, &target));
    }
}

fn hex_lattice(extent: f64) -> Vec<[f64; 2]> {
    let g = HexGrid::ideal(T1, [0.0; 2], [(0, 0); 2]).unwrap();
    g.enumerate(&FieldOfView::new(-extent, -extent, 3.0 * extent, 3.0 * extent))
}

#[test]
fn hex_deep_hole_bounds_distance() {
    let pts = hex_lattice(30.0);
    let hole = [0.5 * T1, T1 / (2.0 * 3f64.sqrt())];
    let target = RectGrid::new(0.25, 60, 60, hole).unwrap();
    let d = distance_matrix(&pts, &target).unwrap();
    let bound = T1 / 3f64.sqrt();
    assert!(d.values.iter().all(|&v| v >= 0.0 && v <= bound + 1e-9));
    assert!((d.max() - bound).abs() < 1e-6, "max {}", d.max());
    assert!((bound - 2.482).abs() < 1e-3);
}

#[test]
fn distance_matrix_is_periodic_along_rows() {
    let pts = hex_lattice(30.0);
    let target = RectGrid::new(T1 / 4.0, 12, 24, [1.0, 2.0]).unwrap();
    let d = distance_matrix(&pts, &target).unwrap();
    for m in 0..12 {
        for n in 0..20 {
            assert!((d.values[[m, n]] - d.values[[m, n + 4]]).abs() < 1e-9);
        }
    }
}

fn hex_image_of(mut f: impl FnMut(f64, f64) -> f64, dims: [(usize, usize); 2]) -> HexImage {
    let grid = HexGrid::ideal(T1, [0.0; 2], dims).unwrap();
    let mut img = HexImage::zeros(grid, 1);
    for k in 0..2 {
        for m in 0..dims[k].0 {
            for n in 0..dims[k].1 {
                let p = grid.point(k, m, n);
                img.planes[k][[0, m, n]] = f(p[0], p[1]);
            }
        }
    }
    img
}

#[test]
fn nonuniform_interpolation_reproduces_planes() {
    let img = hex_image_of(|x, y| 2.0 * x + 3.0 * y + 5.0, [(8, 10), (8, 10)]);
    let target = RectGrid::new(1.0, 56, 42, [0.0; 2]).unwrap();
    let out = nonuniform_interpolate(&img, &target).unwrap();
    let hull = FieldOfView::new(T1 / 2.0, 0.0, 9.0 * T1 - T1 / 2.0, 7.5 * img.grid.t2);
    let mut checked = 0;
    for m in 0..56 {
        for n in 0..42 {
            let p = target.point(m, n);
            if hull.contains(p) {
                assert!((out.data[[0, m, n]] - (2.0 * p[0] + 3.0 * p[1] + 5.0)).abs() < 1e-9);
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
    // Far outside the hull.
    let far = RectGrid::new(1.0, 1, 1, [500.0, 500.0]).unwrap();
    assert_eq!(nonuniform_interpolate(&img, &far).unwrap().data[[0, 0, 0]], FILL_VALUE);
}

#[test]
fn interpolation_at_a_sample_returns_it() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let img = hex_image_of(|_, _| rng.random_range(0.0..255.0), [(5, 5), (5, 5)]);
    let grid = img.grid;
    let vals = img.values(0);
    for (i, p) in grid.points().iter().enumerate() {
        let t = RectGrid::new(1.0, 1, 1, *p).unwrap();
        assert_eq!(nonuniform_interpolate(&img, &t).unwrap().data[[0, 0, 0]], vals[i]);
    }
}

fn poly_image(f: impl Fn(f64, f64) -> f64, h: usize, w: usize) -> RasterImage {
    RasterImage::new(
        Array3::from_shape_fn((1, h, w), |(_, i, j)| f(j as f64, i as f64)),
        1.0,
    )
    .unwrap()
}

fn interior_rms(out: &RasterImage, f: impl Fn(f64, f64) -> f64, factor: usize, margin: usize) -> f64 {
    let (h, w) = (out.height(), out.width());
    let s = factor as f64;
    let (mut acc, mut n) = (0.0, 0.0);
    for i in margin * factor..h - margin * factor {
        for j in margin * factor..w - margin * factor {
            let e = out.data[[0, i, j]] - f(j as f64 / s, i as f64 / s);
            acc += e * e;
            n += 1.0;
        }
    }
    (acc / n).sqrt()
}

#[test]
fn bicubic_upsampling_polynomial_reproduction() {
    let cubic = |x: f64, y: f64| 0.01 * x * x * x - 0.02 * y * y * y + 0.1 * x * y + 0.3 * x - 0.5 * y + 4.0;
    let quad = |x: f64, y: f64| 0.05 * x * x - 0.03 * y * y + 0.1 * x * y + 2.0 * x + 1.0;
    let up2 = bicubic_upsample(&poly_image(cubic, 20, 24), 2).unwrap();
    assert!(interior_rms(&up2, cubic, 2, 2) < 1e-9);
    let up4 = bicubic_upsample(&poly_image(quad, 20, 24), 4).unwrap();
    assert!(interior_rms(&up4, quad, 4, 2) < 1e-9);
}

#[test]
fn bicubic_upsampling_collocation_and_constants() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let src = RasterImage::new(
        Array3::from_shape_fn((3, 9, 11), |_| rng.random_range(0.0..255.0)),
        4.0,
    )
    .unwrap();
    for f in [2, 4] {
        let up = bicubic_upsample(&src, f).unwrap();
        assert_eq!(up.pitch, 4.0 / f as f64);
        for c in 0..3 {
            for i in 0..9 {
                for j in 0..11 {
                    assert_eq!(up.data[[c, f * i, f * j]], src.data[[c, i, j]]);
                }
            }
        }
    }
    let flat = RasterImage::filled(1, 6, 6, 1.0, 42.0);
    assert!(bicubic_upsample(&flat, 2).unwrap().data.iter().all(|v| (v - 42.0).abs() < 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn interpolation_stays_within_source_range(seed in 0u64..10_000) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let img = hex_image_of(|_, _| rng.random_range(0.0..255.0), [(6, 6), (6, 6)]);
        let vals = img.values(0);
        let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let target = RectGrid::new(0.7, 40, 30, [T1 / 2.0, img.grid.t2 / 2.0]).unwrap();
        let out = nonuniform_interpolate(&img, &target).unwrap();
        let interp = LinearInterpolator::new(&img.grid.points()).unwrap();
        for (k, p) in target.points().iter().enumerate() {
            let v = out.data.as_slice().unwrap()[k];
            if interp.weights(*p).is_some() {
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            } else {
                prop_assert_eq!(v, FILL_VALUE);
            }
        }
    }

    #[test]
    fn random_scatter_reproduces_affine(seed in 0u64..10_000) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let pts: Vec<[f64; 2]> = (0..60).map(|_| [rng.random_range(0.0..30.0), rng.random_range(0.0..30.0)]).collect();
        let f = |p: [f64; 2]| 2.0 * p[0] + 3.0 * p[1] + 5.0;
        let set = ScatterSet::new(pts.clone(), vec![pts.iter().map(|&p| f(p)).collect()]).unwrap();
        let target = RectGrid::new(1.0, 30, 30, [0.0; 2]).unwrap();
        let out = interpolate_scattered(&set, &target).unwrap();
        let interp = LinearInterpolator::new(&pts).unwrap();
        for (k, p) in target.points().iter().enumerate() {
            if interp.weights(*p).is_some() {
                prop_assert!((out.data.as_slice().unwrap()[k] - f(*p)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn distance_is_nonnegative_and_zero_on_samples(seed in 0u64..10_000) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let pts: Vec<[f64; 2]> = (0..40).map(|_| [rng.random_range(0..20) as f64, rng.random_range(0..20) as f64]).collect();
        let target = RectGrid::new(1.0, 20, 20, [0.0; 2]).unwrap();
        let d = distance_matrix(&pts, &target).unwrap();
        prop_assert!(d.values.iter().all(|&v| v >= 0.0));
        for p in &pts {
            prop_assert_eq!(d.values[[p[1] as usize, p[0] as usize]], 0.0);
        }
    }
}
