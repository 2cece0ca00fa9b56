//! Rectangular and hexagonal sampling lattices.
//!
//! A hexagonal grid is stored as two interlaced rectangular planes with
//! pitches `t1` (horizontal) and `t2` (vertical); plane 1 is offset by
//! `(t1 / 2, t2 / 2)`. The ideal lattice has `t2 = sqrt(3) t1`, which makes
//! all six nearest neighbors equidistant.

use std::f64::consts::SQRT_2;
use std::io::Write;

use crate::error::{Error, Result};
use crate::optics::{contour_radius, OtfSpec};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Axis-aligned window `[x0, x0 + width) x [y0, y0 + height)` in um.
/// Closed at the low edge, open at the high edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOfView {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl FieldOfView {
    pub fn new(x0: f64, y0: f64, width: f64, height: f64) -> Self {
        Self {
            x0,
            y0,
            width,
            height,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0
            && p[0] < self.x0 + self.width
            && p[1] >= self.y0
            && p[1] < self.y0 + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Integer range `{k : lo <= origin + k * pitch < hi}`.
fn index_range(origin: f64, pitch: f64, lo: f64, hi: f64) -> std::ops::Range<i64> {
    let mut start = ((lo - origin) / pitch).ceil() as i64;
    while origin + (start - 1) as f64 * pitch >= lo {
        start -= 1;
    }
    while origin + start as f64 * pitch < lo {
        start += 1;
    }
    let mut end = ((hi - origin) / pitch).ceil() as i64;
    while origin + end as f64 * pitch < hi {
        end += 1;
    }
    while end > start && origin + (end - 1) as f64 * pitch >= hi {
        end -= 1;
    }
    start..end.max(start)
}

fn span(r: std::ops::Range<i64>) -> usize {
    (r.end - r.start) as usize
}

/// A sampling lattice that can be enumerated over a window.
pub trait Lattice {
    /// Lattice points inside `fov` in deterministic row-major order.
    fn enumerate(&self, fov: &FieldOfView) -> Vec<[f64; 2]>;

    /// Samples per square um.
    fn density(&self) -> f64;

    /// Centers of the spectral replicas produced by sampling on this
    /// lattice, within `|u|, |v| <= extent` (cycles/um), DC included.
    fn replica_centers(&self, extent: f64) -> Vec<[f64; 2]>;
}

/// Rectangular grid with equal horizontal and vertical pitch.
/// Sample `(m, n)` sits at `origin + (n * pitch, m * pitch)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RectGrid {
    pub pitch: f64,
    pub rows: usize,
    pub cols: usize,
    pub origin: [f64; 2],
}

impl RectGrid {
    pub fn new(pitch: f64, rows: usize, cols: usize, origin: [f64; 2]) -> Result<Self> {
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::NonPositivePitch(pitch));
        }
        Ok(Self {
            pitch,
            rows,
            cols,
            origin,
        })
    }

    /// Grid anchored at the window corner holding every lattice point inside it.
    pub fn covering(pitch: f64, fov: &FieldOfView) -> Result<Self> {
        let mut g = Self::new(pitch, 0, 0, [fov.x0, fov.y0])?;
        g.cols = span(index_range(fov.x0, pitch, fov.x0, fov.x0 + fov.width));
        g.rows = span(index_range(fov.y0, pitch, fov.y0, fov.y0 + fov.height));
        Ok(g)
    }

    #[inline]
    pub fn point(&self, m: usize, n: usize) -> [f64; 2] {
        [
            self.origin[0] + n as f64 * self.pitch,
            self.origin[1] + m as f64 * self.pitch,
        ]
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for m in 0..self.rows {
            for n in 0..self.cols {
                out.push(self.point(m, n));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Lattice for RectGrid {
    fn enumerate(&self, fov: &FieldOfView) -> Vec<[f64; 2]> {
        let cols = index_range(self.origin[0], self.pitch, fov.x0, fov.x0 + fov.width);
        let rows = index_range(self.origin[1], self.pitch, fov.y0, fov.y0 + fov.height);
        let mut out = Vec::with_capacity(span(cols.clone()) * span(rows.clone()));
        for m in rows {
            for n in cols.clone() {
                out.push([
                    self.origin[0] + n as f64 * self.pitch,
                    self.origin[1] + m as f64 * self.pitch,
                ]);
            }
        }
        out
    }

    fn density(&self) -> f64 {
        1.0 / (self.pitch * self.pitch)
    }

    fn replica_centers(&self, extent: f64) -> Vec<[f64; 2]> {
        let step = 1.0 / self.pitch;
        let k = (extent / step).floor() as i64;
        let mut out = Vec::new();
        for l in -k..=k {
            for j in -k..=k {
                out.push([j as f64 * step, l as f64 * step]);
            }
        }
        out
    }
}

/// Hexagonal grid as two interlaced rectangular planes.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HexGrid {
    pub t1: f64,
    pub t2: f64,
    pub origin: [f64; 2],
    /// `(rows, cols)` of plane 0 and plane 1.
    pub dims: [(usize, usize); 2],
    /// Set when `t2 / t1` is deliberately not `sqrt(3)`.
    pub approximate: bool,
}

impl HexGrid {
    /// Checks the pitches; `t2 = sqrt(3) t1` is required unless `approximate`.
    pub fn new(
        t1: f64,
        t2: f64,
        origin: [f64; 2],
        dims: [(usize, usize); 2],
        approximate: bool,
    ) -> Result<Self> {
        for p in [t1, t2] {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::NonPositivePitch(p));
            }
        }
        if !approximate && ((t2 / t1) / SQRT_3 - 1.0).abs() > 1e-9 {
            return Err(Error::NotHexagonal { t1, t2 });
        }
        Ok(Self {
            t1,
            t2,
            origin,
            dims,
            approximate,
        })
    }

    /// Ideal lattice with `t2 = sqrt(3) t1`.
    pub fn ideal(t1: f64, origin: [f64; 2], dims: [(usize, usize); 2]) -> Result<Self> {
        Self::new(t1, SQRT_3 * t1, origin, dims, false)
    }

    /// Grid whose plane 0 is anchored at the window corner, holding every
    /// lattice point inside the window.
    pub fn covering(t1: f64, t2: f64, fov: &FieldOfView, approximate: bool) -> Result<Self> {
        let mut g = Self::new(t1, t2, [fov.x0, fov.y0], [(0, 0); 2], approximate)?;
        for plane in 0..2 {
            let o = g.plane_origin(plane);
            let cols = span(index_range(o[0], t1, fov.x0, fov.x0 + fov.width));
            let rows = span(index_range(o[1], t2, fov.y0, fov.y0 + fov.height));
            g.dims[plane] = (rows, cols);
        }
        Ok(g)
    }

    pub fn plane_origin(&self, plane: usize) -> [f64; 2] {
        if plane == 0 {
            self.origin
        } else {
            [self.origin[0] + 0.5 * self.t1, self.origin[1] + 0.5 * self.t2]
        }
    }

    #[inline]
    pub fn point(&self, plane: usize, m: usize, n: usize) -> [f64; 2] {
        let o = self.plane_origin(plane);
        [o[0] + n as f64 * self.t1, o[1] + m as f64 * self.t2]
    }

    /// All samples: plane 0 row-major, then plane 1 row-major.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.len());
        for plane in 0..2 {
            let (rows, cols) = self.dims[plane];
            for m in 0..rows {
                for n in 0..cols {
                    out.push(self.point(plane, m, n));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.dims[0].0 * self.dims[0].1 + self.dims[1].0 * self.dims[1].1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distance between closest lattice points.
    pub fn nearest_neighbor_distance(&self) -> f64 {
        self.t1.min(self.t2).min((0.5 * self.t1).hypot(0.5 * self.t2))
    }
}

impl Lattice for HexGrid {
    fn enumerate(&self, fov: &FieldOfView) -> Vec<[f64; 2]> {
        let mut out = Vec::new();
        for plane in 0..2 {
            let o = self.plane_origin(plane);
            let cols = index_range(o[0], self.t1, fov.x0, fov.x0 + fov.width);
            let rows = index_range(o[1], self.t2, fov.y0, fov.y0 + fov.height);
            for m in rows {
                for n in cols.clone() {
                    out.push([o[0] + n as f64 * self.t1, o[1] + m as f64 * self.t2]);
                }
            }
        }
        out
    }

    fn density(&self) -> f64 {
        2.0 / (self.t1 * self.t2)
    }

    /// `(2k / t1, 2l / t2)` and `((2k + 1) / t1, (2l + 1) / t2)`.
    fn replica_centers(&self, extent: f64) -> Vec<[f64; 2]> {
        let ku = (extent * self.t1).floor() as i64;
        let kv = (extent * self.t2).floor() as i64;
        let mut out = Vec::new();
        for b in -kv..=kv {
            for a in -ku..=ku {
                if (a + b).rem_euclid(2) == 0 {
                    out.push([a as f64 / self.t1, b as f64 / self.t2]);
                }
            }
        }
        out
    }
}

/// Hexagonal pitch `t1` whose ideal lattice has the same density as a
/// rectangular grid of pitch `d`: `t1 = sqrt(2 / sqrt(3)) d`.
pub fn hex_pitch_from_rect(d: f64) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::NonPositivePitch(d));
    }
    Ok((2.0 / SQRT_3).sqrt() * d)
}

/// Nyquist sampling densities of the two lattice types for one cutoff.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GridDensityReport {
    /// `4 rho_c^2` samples/um^2.
    pub rect_density: f64,
    /// `6 rho_c^2 / sqrt(3)` samples/um^2.
    pub hex_density: f64,
    /// How much sparser the hexagonal Nyquist grid is, in percent.
    pub density_saving_pct: f64,
    /// How much higher a cutoff the hexagonal grid supports at equal density, in percent.
    pub cutoff_gain_pct: f64,
}

pub fn nyquist_density_comparison(rho_c: f64) -> Result<GridDensityReport> {
    if !(rho_c > 0.0 && rho_c.is_finite()) {
        return Err(Error::InvalidParameter(format!("cutoff must be positive, got {rho_c}")));
    }
    let rect_density = 4.0 * rho_c * rho_c;
    let hex_density = 6.0 * rho_c * rho_c / SQRT_3;
    Ok(GridDensityReport {
        rect_density,
        hex_density,
        density_saving_pct: 100.0 * (1.0 - hex_density / rect_density),
        // Equal densities: 4 rc_rect^2 = 6 rc_hex^2 / sqrt(3).
        cutoff_gain_pct: 100.0 * ((rect_density / hex_density).sqrt() - 1.0),
    })
}

/// Spectral replica layout of a lattice against an OTF isocontour.
#[derive(Debug, Clone, PartialEq)]
pub struct PackingReport {
    pub replica_centers: Vec<[f64; 2]>,
    /// Radial frequency where the OTF first drops below the contour level.
    pub contour_radius: f64,
    /// Distance from DC to the closest non-DC replica center.
    pub nearest_replica: f64,
    /// `nearest_replica - contour_radius`. Larger means the replicas intrude
    /// less on the baseband.
    pub intrusion_margin: f64,
}

impl PackingReport {
    /// CSV with one `u,v` row per replica center and the radius in a comment-free
    /// trailing row tagged `radius`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "kind,u,v")?;
        for c in &self.replica_centers {
            writeln!(out, "replica,{},{}", c[0], c[1])?;
        }
        writeln!(out, "radius,{},0", self.contour_radius)?;
        Ok(())
    }
}

pub fn frequency_packing_report(
    grid: &dyn Lattice,
    otf: &OtfSpec,
    contour_level: f64,
) -> Result<PackingReport> {
    if !(contour_level > 0.0 && contour_level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "contour level must be in (0, 1), got {contour_level}"
        )));
    }
    let cutoff = otf.cutoff.unwrap_or(otf.grid.extent());
    let contour_radius = contour_radius(otf, cutoff, contour_level);
    let replica_centers = grid.replica_centers(2.0 * cutoff * SQRT_2);
    let nearest_replica = replica_centers
        .iter()
        .map(|c| c[0].hypot(c[1]))
        .filter(|&r| r > 0.0)
        .fold(f64::INFINITY, f64::min);
    Ok(PackingReport {
        replica_centers,
        contour_radius,
        nearest_replica,
        intrusion_margin: nearest_replica - contour_radius,
    })
}

/// Writes sample coordinates as `x,y` CSV.
pub fn write_points_csv<W: Write>(points: &[[f64; 2]], mut out: W) -> std::io::Result<()> {
    writeln!(out, "x,y")?;
    for p in points {
        writeln!(out, "{},{}", p[0], p[1])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{combined_otf, diagnostic_grid, ChannelOptics, DetectorShape};
    use approx::assert_abs_diff_eq;

    #[test]
    fn hex_pitch_matches_table() {
        assert_abs_diff_eq!(hex_pitch_from_rect(4.0).unwrap(), 4.298, epsilon = 1e-3);
        assert_abs_diff_eq!(hex_pitch_from_rect(1.0).unwrap(), 1.07457, epsilon = 1e-5);
        assert!(hex_pitch_from_rect(0.0).is_err());
        assert!(hex_pitch_from_rect(-2.0).is_err());
    }

    #[test]
    fn equal_density_round_trip() {
        let d = 4.0;
        let hex = HexGrid::ideal(hex_pitch_from_rect(d).unwrap(), [0.0; 2], [(0, 0); 2]).unwrap();
        let rect = RectGrid::new(d, 0, 0, [0.0; 2]).unwrap();
        assert_abs_diff_eq!(hex.density() / rect.density(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hex.t2, 7.445, epsilon = 2e-3);
    }

    #[test]
    fn density_claims() {
        let r = nyquist_density_comparison(0.4630).unwrap();
        assert_abs_diff_eq!(r.density_saving_pct, 13.40, epsilon = 0.01);
        assert_abs_diff_eq!(r.cutoff_gain_pct, 7.46, epsilon = 0.01);
        assert_abs_diff_eq!(r.rect_density, 0.8575, epsilon = 1e-4);
        assert!(nyquist_density_comparison(0.0).is_err());
    }

    #[test]
    fn non_hexagonal_pitches_need_flag() {
        assert!(matches!(
            HexGrid::new(2.0, 4.0, [0.0; 2], [(1, 1); 2], false),
            Err(Error::NotHexagonal { .. })
        ));
        let g = HexGrid::new(2.0, 4.0, [0.0; 2], [(1, 1); 2], true).unwrap();
        assert!(g.approximate);
    }

    #[test]
    fn rect_enumeration_is_half_open() {
        let g = RectGrid::new(4.0, 0, 0, [0.0; 2]).unwrap();
        let pts = g.enumerate(&FieldOfView::new(0.0, 0.0, 8.0, 8.0));
        assert_eq!(pts, vec![[0.0, 0.0], [4.0, 0.0], [0.0, 4.0], [4.0, 4.0]]);
        let covering = RectGrid::covering(4.0, &FieldOfView::new(0.0, 0.0, 8.0, 8.0)).unwrap();
        assert_eq!((covering.rows, covering.cols), (2, 2));
        assert_eq!(covering.points(), pts);
    }

    #[test]
    fn empty_window_enumerates_nothing() {
        let g = RectGrid::new(4.0, 0, 0, [0.0; 2]).unwrap();
        assert!(g.enumerate(&FieldOfView::new(1.0, 1.0, 2.0, 2.0)).is_empty());
    }

    #[test]
    fn hex_planes_interlace() {
        let fov = FieldOfView::new(0.0, 0.0, 40.0, 40.0);
        let g = HexGrid::covering(4.298, 3f64.sqrt() * 4.298, &fov, false).unwrap();
        assert_eq!(g.point(1, 0, 0), [2.149, 0.5 * g.t2]);
        let (r0, c0) = g.dims[0];
        let (r1, c1) = g.dims[1];
        assert!(r0.abs_diff(r1) <= 1 && c0.abs_diff(c1) <= 1);
        assert_eq!(g.points(), g.enumerate(&fov));
    }

    #[test]
    fn packing_replica_spacing() {
        let g = ChannelOptics::green();
        let otf = combined_otf(&g, &DetectorShape::Rectangle { width: 4.0 }, diagnostic_grid(&g, 64))
            .unwrap();
        let rect = RectGrid::new(4.0, 0, 0, [0.0; 2]).unwrap();
        let rep = frequency_packing_report(&rect, &otf, 0.1).unwrap();
        assert_abs_diff_eq!(rep.nearest_replica, 0.25, epsilon = 1e-12);
        assert!(rep.replica_centers.contains(&[0.25, 0.25]));

        let hex = HexGrid::ideal(4.298, [0.0; 2], [(0, 0); 2]).unwrap();
        let centers = hex.replica_centers(1.0);
        let has = |u: f64, v: f64| {
            centers
                .iter()
                .any(|c| (c[0] - u).abs() < 1e-12 && (c[1] - v).abs() < 1e-12)
        };
        assert!(has(2.0 / 4.298, 0.0));
        assert!(has(1.0 / 4.298, 1.0 / hex.t2));
        assert!(!has(1.0 / 4.298, 0.0));
        assert_abs_diff_eq!(2.0 / 4.298, 0.4653, epsilon = 1e-4);
        assert!(frequency_packing_report(&rect, &otf, 1.0).is_err());
    }
}
