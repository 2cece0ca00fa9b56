use hexsr_core::optics::{combined_otf, diagnostic_grid, ChannelOptics, DetectorShape};
use hexsr_core::sampling::*;
use proptest::prelude::*;

const T1: f64 = 4.298;

fn ideal_hex(t1: f64, origin: [f64; 2]) -> HexGrid {
    HexGrid::ideal(t1, origin, [(0, 0); 2]).unwrap()
}

fn min_pair_distance(pts: &[[f64; 2]]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.min((pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]));
        }
    }
    best
}

#[test]
fn hex_nearest_neighbor_is_t1() {
    let g = ideal_hex(T1, [0.0; 2]);
    let pts = g.enumerate(&FieldOfView::new(0.0, 0.0, 40.0, 40.0));
    assert!((min_pair_distance(&pts) - T1).abs() < 1e-6);
    assert!((g.nearest_neighbor_distance() - T1).abs() < 1e-12);
    assert!((g.t2 / g.t1 / 3f64.sqrt() - 1.0).abs() < 1e-9);
}

#[test]
fn equal_density_sample_counts() {
    let fov = FieldOfView::new(0.0, 0.0, 430.0, 430.0);
    let hex = ideal_hex(hex_pitch_from_rect(4.0).unwrap(), [0.0; 2]);
    let rect = RectGrid::new(4.0, 0, 0, [0.0; 2]).unwrap();
    let ratio = hex.enumerate(&fov).len() as f64 / rect.enumerate(&fov).len() as f64;
    assert!((ratio - 1.0).abs() <= 0.02, "ratio {ratio}");
}

#[test]
fn covering_grid_plane_counts_differ_by_one_row_at_most() {
    let fov = FieldOfView::new(0.0, 0.0, 511.5, 383.5);
    let g = HexGrid::covering(T1, 3f64.sqrt() * T1, &fov, false).unwrap();
    let (r0, c0) = g.dims[0];
    let (r1, c1) = g.dims[1];
    let (n0, n1) = (r0 * c0, r1 * c1);
    assert!(n0.abs_diff(n1) <= c0.max(c1) + r0.max(r1));
    assert_eq!(g.len(), g.enumerate(&fov).len());
}

#[test]
fn packing_intrusion_favors_hex() {
    let green = ChannelOptics::green();
    let rect_det = DetectorShape::Rectangle { width: 4.0 };
    let t1 = hex_pitch_from_rect(4.0).unwrap();
    let hex_det = DetectorShape::Hexagon {
        t1,
        t2: 3f64.sqrt() * t1,
    };
    let grid = diagnostic_grid(&green, 64);
    let rect = RectGrid::new(4.0, 0, 0, [0.0; 2]).unwrap();
    let hex = ideal_hex(t1, [0.0; 2]);
    let r = frequency_packing_report(&rect, &combined_otf(&green, &rect_det, grid).unwrap(), 0.1).unwrap();
    let h = frequency_packing_report(&hex, &combined_otf(&green, &hex_det, grid).unwrap(), 0.1).unwrap();
    assert!((r.nearest_replica - 0.25).abs() < 1e-12);
    assert!((h.nearest_replica - (1.0 / t1).hypot(1.0 / (3f64.sqrt() * t1))).abs() < 1e-12);
    assert!(h.intrusion_margin > r.intrusion_margin);
    assert!(r.contour_radius > 0.0 && r.contour_radius < green.cutoff_frequency());

    let mut csv = Vec::new();
    h.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("kind,u,v\n"));
    assert_eq!(text.lines().count(), h.replica_centers.len() + 2);
}

#[test]
fn points_csv() {
    let mut out = Vec::new();
    write_points_csv(&[[0.0, 1.5], [2.0, 3.0]], &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "x,y\n0,1.5\n2,3\n");
}

proptest! {
    #[test]
    fn enumeration_has_no_duplicates_and_stays_inside(
        t1 in 1.0f64..6.0,
        ox in -5.0f64..5.0,
        oy in -5.0f64..5.0,
        x0 in -10.0f64..10.0,
        y0 in -10.0f64..10.0,
        w in 1.0f64..40.0,
        h in 1.0f64..40.0,
    ) {
        let fov = FieldOfView::new(x0, y0, w, h);
        let hex = ideal_hex(t1, [ox, oy]);
        let rect = RectGrid::new(t1, 0, 0, [ox, oy]).unwrap();
        for pts in [hex.enumerate(&fov), rect.enumerate(&fov)] {
            prop_assert!(pts.iter().all(|&p| fov.contains(p)));
            if pts.len() > 1 {
                prop_assert!(min_pair_distance(&pts) > 1e-9);
            }
        }
    }

    #[test]
    fn enumeration_is_complete(t1 in 1.0f64..6.0, ox in -5.0f64..5.0, oy in -5.0f64..5.0) {
        // Brute force over a generous index range.
        let fov = FieldOfView::new(-3.0, 2.0, 25.0, 17.0);
        let hex = ideal_hex(t1, [ox, oy]);
        let mut expect = 0;
        for plane in 0..2 {
            let o = hex.plane_origin(plane);
            for m in -40i64..40 {
                for n in -40i64..40 {
                    let p = [o[0] + n as f64 * hex.t1, o[1] + m as f64 * hex.t2];
                    if fov.contains(p) {
                        expect += 1;
                    }
                }
            }
        }
        prop_assert_eq!(hex.enumerate(&fov).len(), expect);
    }

    #[test]
    fn density_converges(d in 0.5f64..5.0) {
        let side = 100.0 * d;
        let fov = FieldOfView::new(0.0, 0.0, side, side);
        let hex = ideal_hex(hex_pitch_from_rect(d).unwrap(), [0.0; 2]);
        let rect = RectGrid::new(d, 0, 0, [0.0; 2]).unwrap();
        for (n, density) in [
            (hex.enumerate(&fov).len(), hex.density()),
            (rect.enumerate(&fov).len(), rect.density()),
        ] {
            let measured = n as f64 / fov.area();
            prop_assert!((measured / density - 1.0).abs() < 0.02);
        }
        prop_assert!((hex.density() * d * d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_percentages_are_constant(rho in 0.01f64..5.0) {
        let r = nyquist_density_comparison(rho).unwrap();
        prop_assert!((r.density_saving_pct - 13.397_459_621_556_13).abs() < 1e-9);
        prop_assert!((r.cutoff_gain_pct - 7.456_993_182_354_01).abs() < 1e-9);
    }
}
