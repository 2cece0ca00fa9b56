//! Hexagonal to rectangular resampling, bicubic upsampling and the sub-pixel
//! distance matrix.

use ndarray::{Array2, Array3, Axis};
use rayon::prelude::*;
use spade::handles::FixedVertexHandle;
use spade::{DelaunayTriangulation, HasPosition, Point2, PositionInTriangulation, Triangulation};

use crate::error::{Error, Result};
use crate::image::{HexImage, RasterImage};
use crate::interp::bicubic_at;
use crate::sampling::RectGrid;

/// Points closer than this are duplicates.
pub const DUPLICATE_TOL: f64 = 1e-9;

/// Value given to targets outside the convex hull of the samples.
pub const FILL_VALUE: f64 = 0.0;

/// Scattered samples with per-channel values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterSet {
    pub points: Vec<[f64; 2]>,
    /// `values[c][i]` belongs to `points[i]`.
    pub values: Vec<Vec<f64>>,
}

impl ScatterSet {
    pub fn new(points: Vec<[f64; 2]>, values: Vec<Vec<f64>>) -> Result<Self> {
        for (c, v) in values.iter().enumerate() {
            if v.len() != points.len() {
                return Err(Error::Shape(format!(
                    "channel {c} has {} values for {} points",
                    v.len(),
                    points.len()
                )));
            }
        }
        if let Some(p) = find_duplicate(&points) {
            return Err(Error::DuplicatePoint { x: p[0], y: p[1] });
        }
        Ok(Self { points, values })
    }

    pub fn from_hex(img: &HexImage) -> Self {
        Self {
            points: img.grid.points(),
            values: (0..img.channels()).map(|c| img.values(c)).collect(),
        }
    }

    pub fn channels(&self) -> usize {
        self.values.len()
    }
}

fn find_duplicate(points: &[[f64; 2]]) -> Option<[f64; 2]> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]));
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if points[j][0] - points[i][0] > DUPLICATE_TOL {
                break;
            }
            if (points[j][1] - points[i][1]).abs() <= DUPLICATE_TOL {
                return Some(points[j]);
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy)]
struct Site {
    pos: Point2<f64>,
    index: usize,
}

impl HasPosition for Site {
    type Scalar = f64;

    fn position(&self) -> Point2<f64> {
        self.pos
    }
}

/// Delaunay triangulation of a scatter set answering linear interpolation
/// weight queries.
pub struct LinearInterpolator {
    tri: DelaunayTriangulation<Site>,
}

impl std::fmt::Debug for LinearInterpolator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearInterpolator")
            .field("vertices", &self.tri.num_vertices())
            .field("faces", &self.tri.num_inner_faces())
            .finish()
    }
}

impl LinearInterpolator {
    pub fn new(points: &[[f64; 2]]) -> Result<Self> {
        let sites = points
            .iter()
            .enumerate()
            .map(|(index, p)| Site {
                pos: Point2::new(p[0], p[1]),
                index,
            })
            .collect();
        let tri = DelaunayTriangulation::<Site>::bulk_load_stable(sites)
            .map_err(|e| Error::InvalidParameter(format!("triangulation failed: {e:?}")))?;
        if tri.num_inner_faces() == 0 {
            return Err(Error::DegenerateTriangulation);
        }
        Ok(Self { tri })
    }

    fn site_index(&self, h: FixedVertexHandle) -> usize {
        self.tri.vertex(h).data().index
    }

    /// Sample indices and weights whose combination gives the linear
    /// interpolant at `q`, or `None` outside the convex hull. Unused slots
    /// carry zero weight.
    pub fn weights(&self, q: [f64; 2]) -> Option<[(usize, f64); 3]> {
        let p = Point2::new(q[0], q[1]);
        match self.tri.locate(p) {
            PositionInTriangulation::OnVertex(v) => Some([(self.site_index(v), 1.0), (0, 0.0), (0, 0.0)]),
            PositionInTriangulation::OnEdge(e) => {
                let [a, b] = self.tri.directed_edge(e).vertices();
                let (pa, pb) = (a.data().pos, b.data().pos);
                let (dx, dy) = (pb.x - pa.x, pb.y - pa.y);
                let t = ((p.x - pa.x) * dx + (p.y - pa.y) * dy) / (dx * dx + dy * dy);
                Some([(a.data().index, 1.0 - t), (b.data().index, t), (0, 0.0)])
            }
            PositionInTriangulation::OnFace(f) => {
                let face = self.tri.face(f);
                let [a, b, c] = face.vertices();
                let [wa, wb, wc] = face.barycentric_interpolation(p);
                Some([
                    (a.data().index, wa),
                    (b.data().index, wb),
                    (c.data().index, wc),
                ])
            }
            _ => None,
        }
    }

    /// Interpolates `values` (indexed like the input points) at `q`.
    pub fn interpolate(&self, values: &[f64], q: [f64; 2]) -> Option<f64> {
        self.weights(q).map(|w| combine(&w, values))
    }
}

/// `v_a + w_b (v_b - v_a) + w_c (v_c - v_a)`, which equals the weighted sum
/// (weights sum to one) and reproduces constants bit-exactly.
fn combine(w: &[(usize, f64); 3], values: &[f64]) -> f64 {
    let anchor = values[w[0].0];
    w[1..]
        .iter()
        .filter(|&&(_, a)| a != 0.0)
        .fold(anchor, |acc, &(i, a)| acc + a * (values[i] - anchor))
}

/// Linear interpolation of scattered samples onto the points of `target`.
pub fn interpolate_scattered(set: &ScatterSet, target: &RectGrid) -> Result<RasterImage> {
    let interp = LinearInterpolator::new(&set.points)?;
    let pts = target.points();
    let weights: Vec<Option<[(usize, f64); 3]>> =
        pts.par_iter().map(|&q| interp.weights(q)).collect();
    let mut out = Array3::from_elem((set.channels(), target.rows, target.cols), FILL_VALUE);
    for (c, mut plane) in out.axis_iter_mut(Axis(0)).enumerate() {
        let vals = &set.values[c];
        for (o, w) in plane.iter_mut().zip(&weights) {
            if let Some(w) = w {
                *o = combine(w, vals);
            }
        }
    }
    RasterImage::new(out, target.pitch)
}

/// Delaunay-linear interpolation of a hexagonal image onto a rectangular grid.
pub fn nonuniform_interpolate(src: &HexImage, target: &RectGrid) -> Result<RasterImage> {
    interpolate_scattered(&ScatterSet::from_hex(src), target)
}

/// Separable Keys bicubic upsampling by 2 or 4. Output pixel `i` samples the
/// source at `i / factor`.
pub fn bicubic_upsample(src: &RasterImage, factor: usize) -> Result<RasterImage> {
    if factor != 2 && factor != 4 {
        return Err(Error::UnsupportedFactor(factor));
    }
    let (h, w) = (src.height() * factor, src.width() * factor);
    let f = factor as f64;
    let planes: Vec<Array2<f64>> = (0..src.channels())
        .into_par_iter()
        .map(|c| {
            let s = src.channel(c);
            Array2::from_shape_fn((h, w), |(i, j)| bicubic_at(s, i as f64 / f, j as f64 / f))
        })
        .collect();
    RasterImage::from_planes(&planes, src.pitch / f)
}

/// Uniform bucket grid over a point set for exact nearest-neighbor queries.
#[derive(Debug, Clone)]
pub struct PointIndex {
    points: Vec<[f64; 2]>,
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    /// Point indices per bucket, row-major.
    buckets: Vec<Vec<usize>>,
}

impl PointIndex {
    pub fn new(points: &[[f64; 2]]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("no source points".into()));
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let (wx, wy) = (hi[0] - lo[0], hi[1] - lo[1]);
        let area = (wx * wy).max(wx.max(wy).powi(2) * 1e-6);
        let mut cell = (area / points.len() as f64).sqrt();
        if !(cell > 0.0) {
            cell = 1.0;
        }
        let nx = (wx / cell).floor() as usize + 1;
        let ny = (wy / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (i, p) in points.iter().enumerate() {
            let cx = (((p[0] - lo[0]) / cell) as usize).min(nx - 1);
            let cy = (((p[1] - lo[1]) / cell) as usize).min(ny - 1);
            buckets[cy * nx + cx].push(i);
        }
        Ok(Self {
            points: points.to_vec(),
            origin: lo,
            cell,
            nx,
            ny,
            buckets,
        })
    }

    /// Index of and distance to the nearest point.
    pub fn nearest(&self, q: [f64; 2]) -> (usize, f64) {
        let cx = ((q[0] - self.origin[0]) / self.cell).floor() as i64;
        let cy = ((q[1] - self.origin[1]) / self.cell).floor() as i64;
        let (nx, ny) = (self.nx as i64, self.ny as i64);
        let reach = cx.abs().max((cx - nx + 1).abs()).max(cy.abs()).max((cy - ny + 1).abs());
        let mut best = (usize::MAX, f64::INFINITY);
        let visit = |x: i64, y: i64, best: &mut (usize, f64)| {
            if x < 0 || y < 0 || x >= nx || y >= ny {
                return;
            }
            for &i in &self.buckets[(y * nx + x) as usize] {
                let d = euclidean(q, self.points[i]);
                if d < best.1 || (d == best.1 && i < best.0) {
                    *best = (i, d);
                }
            }
        };
        for k in 0..=reach {
            if k == 0 {
                visit(cx, cy, &mut best);
            } else {
                for x in cx - k..=cx + k {
                    visit(x, cy - k, &mut best);
                    visit(x, cy + k, &mut best);
                }
                for y in cy - k + 1..cy + k {
                    visit(cx - k, y, &mut best);
                    visit(cx + k, y, &mut best);
                }
            }
            // Every bucket in ring k + 1 is at least k cells away.
            if best.1 <= k as f64 * self.cell {
                break;
            }
        }
        best
    }
}

#[inline]
pub fn euclidean(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    (dx * dx + dy * dy).sqrt()
}

/// Distance from each target pixel to the nearest source sample, in um.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub values: Array2<f64>,
    pub target: RectGrid,
}

impl DistanceMatrix {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Single-channel raster view at the target pitch.
    pub fn to_raster(&self) -> RasterImage {
        RasterImage {
            data: self.values.clone().insert_axis(Axis(0)),
            pitch: self.target.pitch,
        }
    }
}

pub fn distance_matrix(src_points: &[[f64; 2]], target: &RectGrid) -> Result<DistanceMatrix> {
    let index = PointIndex::new(src_points)?;
    let pts = target.points();
    let d: Vec<f64> = pts.par_iter().map(|&q| index.nearest(q).1).collect();
    let values = Array2::from_shape_vec((target.rows, target.cols), d)
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok(DistanceMatrix {
        values,
        target: *target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::HexGrid;
    use approx::assert_abs_diff_eq;

    #[test]
    fn three_four_five() {
        let grid = RectGrid::new(1.0, 5, 5, [0.0; 2]).unwrap();
        let d = distance_matrix(&[[0.0, 0.0]], &grid).unwrap();
        assert_eq!(d.values[[4, 3]], 5.0);
        assert_eq!(d.values[[0, 0]], 0.0);
        assert!(distance_matrix(&[], &grid).is_err());
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        assert!(matches!(
            LinearInterpolator::new(&pts),
            Err(Error::DegenerateTriangulation)
        ));
    }

    #[test]
    fn duplicates_rejected() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 5e-10]];
        assert!(matches!(
            ScatterSet::new(pts, vec![vec![0.0; 4]]),
            Err(Error::DuplicatePoint { .. })
        ));
    }

    #[test]
    fn vertex_and_edge_queries() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]];
        let vals = [1.0, 3.0, 5.0, 7.0];
        let it = LinearInterpolator::new(&pts).unwrap();
        assert_eq!(it.interpolate(&vals, [2.0, 0.0]), Some(3.0));
        assert_abs_diff_eq!(it.interpolate(&vals, [1.0, 0.0]).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(it.interpolate(&vals, [3.0, 3.0]), None);
    }

    #[test]
    fn unsupported_factor() {
        let img = RasterImage::zeros(1, 4, 4, 1.0);
        assert!(matches!(bicubic_upsample(&img, 3), Err(Error::UnsupportedFactor(3))));
        let up = bicubic_upsample(&img, 4).unwrap();
        assert_eq!((up.height(), up.pitch), (16, 0.25));
    }

    #[test]
    fn hex_deep_hole() {
        let t1 = 4.298;
        let grid = HexGrid::ideal(t1, [0.0; 2], [(6, 6), (6, 6)]).unwrap();
        let target = RectGrid::new(1.0, 1, 1, [t1, t1 / 3f64.sqrt()]).unwrap();
        let d = distance_matrix(&grid.points(), &target).unwrap();
        assert_abs_diff_eq!(d.values[[0, 0]], t1 / 3f64.sqrt(), epsilon = 1e-12);
    }
}
