//! Raster and hexagonal image containers.

use ndarray::{Array2, Array3, ArrayView2, ArrayViewMut2, Axis};

use crate::error::{Error, Result};
use crate::sampling::{FieldOfView, HexGrid, RectGrid};

/// Planar image on a rectangular grid, values in digital units.
///
/// `data` is `(channels, height, width)`. Pixel `(i, j)` sits at
/// `(j * pitch, i * pitch)` um, so each pixel covers `[-pitch/2, pitch/2)`
/// around its center.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub data: Array3<f64>,
    pub pitch: f64,
}

impl RasterImage {
    pub fn new(data: Array3<f64>, pitch: f64) -> Result<Self> {
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::NonPositivePitch(pitch));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("image holds non-finite values".into()));
        }
        Ok(Self { data, pitch })
    }

    pub fn zeros(channels: usize, height: usize, width: usize, pitch: f64) -> Self {
        Self {
            data: Array3::zeros((channels, height, width)),
            pitch,
        }
    }

    pub fn filled(channels: usize, height: usize, width: usize, pitch: f64, value: f64) -> Self {
        Self {
            data: Array3::from_elem((channels, height, width), value),
            pitch,
        }
    }

    /// Stacks single-channel planes.
    pub fn from_planes(planes: &[Array2<f64>], pitch: f64) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::Shape("no planes given".into()))?;
        let (h, w) = first.dim();
        let mut data = Array3::zeros((planes.len(), h, w));
        for (c, p) in planes.iter().enumerate() {
            if p.dim() != (h, w) {
                return Err(Error::Shape(format!(
                    "plane {c} is {:?}, expected {:?}",
                    p.dim(),
                    (h, w)
                )));
            }
            data.index_axis_mut(Axis(0), c).assign(p);
        }
        Self::new(data, pitch)
    }

    pub fn channels(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    pub fn channel(&self, c: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(Axis(0), c)
    }

    pub fn channel_mut(&mut self, c: usize) -> ArrayViewMut2<'_, f64> {
        self.data.index_axis_mut(Axis(0), c)
    }

    /// Region covered by the pixels.
    pub fn support(&self) -> FieldOfView {
        let p = self.pitch;
        FieldOfView::new(
            -0.5 * p,
            -0.5 * p,
            self.width() as f64 * p,
            self.height() as f64 * p,
        )
    }

    /// Grid of the pixel centers.
    pub fn grid(&self) -> RectGrid {
        RectGrid {
            pitch: self.pitch,
            rows: self.height(),
            cols: self.width(),
            origin: [0.0, 0.0],
        }
    }

    /// Window from the first pixel center to the far support edge. Low
    /// resolution grids anchored at the origin cover exactly this.
    pub fn sampling_window(&self) -> FieldOfView {
        let p = self.pitch;
        FieldOfView::new(
            0.0,
            0.0,
            (self.width() as f64 - 0.5) * p,
            (self.height() as f64 - 0.5) * p,
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            data: self.data.mapv(f),
            pitch: self.pitch,
        }
    }

    /// Crop `[top, top + h) x [left, left + w)`.
    pub fn crop(&self, top: usize, left: usize, h: usize, w: usize) -> Result<Self> {
        if top + h > self.height() || left + w > self.width() {
            return Err(Error::Shape(format!(
                "crop {h}x{w} at ({top}, {left}) exceeds {}x{}",
                self.height(),
                self.width()
            )));
        }
        Ok(Self {
            data: self
                .data
                .slice(ndarray::s![.., top..top + h, left..left + w])
                .to_owned(),
            pitch: self.pitch,
        })
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.data.dim() != other.data.dim() {
            return Err(Error::Shape(format!(
                "{:?} vs {:?}",
                self.data.dim(),
                other.data.dim()
            )));
        }
        Ok(())
    }
}

/// Hexagonally sampled image as two interlaced planes, each
/// `(channels, rows, cols)` with the dimensions given by the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HexImage {
    pub grid: HexGrid,
    pub planes: [Array3<f64>; 2],
}

impl HexImage {
    pub fn new(grid: HexGrid, planes: [Array3<f64>; 2]) -> Result<Self> {
        let c = planes[0].dim().0;
        for (k, p) in planes.iter().enumerate() {
            let (pc, rows, cols) = p.dim();
            if pc != c || (rows, cols) != grid.dims[k] {
                return Err(Error::Shape(format!(
                    "plane {k} is {:?}, grid expects {c} x {:?}",
                    p.dim(),
                    grid.dims[k]
                )));
            }
        }
        Ok(Self { grid, planes })
    }

    pub fn zeros(grid: HexGrid, channels: usize) -> Self {
        let plane = |k: usize| Array3::zeros((channels, grid.dims[k].0, grid.dims[k].1));
        Self {
            grid,
            planes: [plane(0), plane(1)],
        }
    }

    pub fn channels(&self) -> usize {
        self.planes[0].dim().0
    }

    /// Values of one channel in `HexGrid::points` order.
    pub fn values(&self, channel: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.len());
        for p in &self.planes {
            out.extend(p.index_axis(Axis(0), channel).iter().copied());
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            planes: [self.planes[0].mapv(&f), self.planes[1].mapv(&f)],
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_helpers() {
        let img = RasterImage::zeros(3, 8, 12, 1.0);
        assert_eq!((img.channels(), img.height(), img.width()), (3, 8, 12));
        let s = img.support();
        assert_eq!((s.x0, s.width), (-0.5, 12.0));
        let w = img.sampling_window();
        assert_eq!((w.width, w.height), (11.5, 7.5));
        assert!(RasterImage::new(Array3::zeros((1, 2, 2)), 0.0).is_err());
        assert!(RasterImage::new(Array3::from_elem((1, 1, 1), f64::NAN), 1.0).is_err());
    }

    #[test]
    fn hex_values_follow_point_order() {
        let grid = HexGrid::ideal(2.0, [0.0; 2], [(2, 2), (1, 2)]).unwrap();
        let mut img = HexImage::zeros(grid, 1);
        let mut k = 0.0;
        for p in img.planes.iter_mut() {
            for v in p.iter_mut() {
                *v = k;
                k += 1.0;
            }
        }
        assert_eq!(img.values(0), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(img.len(), grid.points().len());
        assert!(HexImage::new(grid, [Array3::zeros((1, 2, 2)), Array3::zeros((1, 2, 2))]).is_err());
    }
}
