//! PNG, sidecar metadata and the raw-plane container.
//!
//! Raw-plane container layout:
//!
//! ```text
//! HEXSR-PLANES 1\n
//! <TOML header, UTF-8>\n
//! %%DATA%%\n
//! <f32 little-endian samples>
//! ```
//!
//! Samples are stored channel-major, then plane-major, then row-major within
//! a plane. For a hexagonal image with `C` channels that is
//! `c0/plane0, c0/plane1, c1/plane0, ...`. The byte count must equal
//! `4 * channels * sum(rows * cols)`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{HexImage, RasterImage};
use crate::optics::ChannelOptics;
use crate::resample::DistanceMatrix;
use crate::sampling::{HexGrid, RectGrid};

pub const CONTAINER_MAGIC: &str = "HEXSR-PLANES 1";
pub const DATA_SENTINEL: &str = "%%DATA%%";

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Loads an 8-bit PNG as RGB (or single-channel for grayscale files).
pub fn read_png(path: &Path, pitch: f64) -> Result<RasterImage> {
    let img = ::image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let gray = matches!(
        img.color(),
        ::image::ColorType::L8 | ::image::ColorType::L16
    );
    if gray {
        let g = img.to_luma8();
        let (w, h) = g.dimensions();
        let data = Array3::from_shape_fn((1, h as usize, w as usize), |(_, i, j)| {
            g.get_pixel(j as u32, i as u32)[0] as f64
        });
        return RasterImage::new(data, pitch);
    }
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    let data = Array3::from_shape_fn((3, h as usize, w as usize), |(c, i, j)| {
        rgb.get_pixel(j as u32, i as u32)[c] as f64
    });
    RasterImage::new(data, pitch)
}

/// Writes a 1- or 3-channel image as 8-bit PNG, clipping and rounding.
pub fn write_png(img: &RasterImage, path: &Path) -> Result<()> {
    let (h, w) = (img.height() as u32, img.width() as u32);
    let q = |v: f64| v.clamp(0.0, 255.0).round() as u8;
    let res = match img.channels() {
        1 => ::image::GrayImage::from_fn(w, h, |x, y| {
            ::image::Luma([q(img.data[[0, y as usize, x as usize]])])
        })
        .save(path),
        3 => ::image::RgbImage::from_fn(w, h, |x, y| {
            let (i, j) = (y as usize, x as usize);
            ::image::Rgb([
                q(img.data[[0, i, j]]),
                q(img.data[[1, i, j]]),
                q(img.data[[2, i, j]]),
            ])
        })
        .save(path),
        n => {
            return Err(Error::ChannelCount {
                expected: 3,
                got: n,
            })
        }
    };
    res.map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// How an image was produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub optics: Vec<ChannelOptics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

/// Metadata written next to a rectangular LR PNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectSidecar {
    pub pitch: f64,
    pub rows: usize,
    pub cols: usize,
    pub origin: [f64; 2],
    #[serde(default)]
    pub provenance: Provenance,
}

impl RectSidecar {
    pub fn new(grid: &RectGrid, provenance: Provenance) -> Self {
        Self {
            pitch: grid.pitch,
            rows: grid.rows,
            cols: grid.cols,
            origin: grid.origin,
            provenance,
        }
    }
}

pub fn sidecar_path(png: &Path) -> std::path::PathBuf {
    png.with_extension("toml")
}

pub fn write_toml<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| format_err(path, e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| format_err(path, e.to_string()))
}

/// Sampling geometry recorded in a container header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Hex {
        t1: f64,
        t2: f64,
        origin: [f64; 2],
        approximate: bool,
    },
    Rect {
        pitch: f64,
        origin: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerHeader {
    pub channels: usize,
    /// `[rows, cols]` per plane.
    pub planes: Vec<[usize; 2]>,
    pub sample_format: String,
    pub geometry: Geometry,
    #[serde(default)]
    pub provenance: Provenance,
}

impl ContainerHeader {
    fn sample_count(&self) -> usize {
        self.channels * self.planes.iter().map(|p| p[0] * p[1]).sum::<usize>()
    }
}

/// Writes a container from planes already in storage order.
pub fn write_container<W: Write>(
    mut out: W,
    header: &ContainerHeader,
    samples: impl Iterator<Item = f64>,
) -> std::io::Result<()> {
    let text = toml::to_string(header).map_err(std::io::Error::other)?;
    writeln!(out, "{CONTAINER_MAGIC}")?;
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        writeln!(out)?;
    }
    writeln!(out, "{DATA_SENTINEL}")?;
    for v in samples {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    out.flush()
}

/// Reads a container; returns the header and samples in storage order.
pub fn read_container(path: &Path) -> Result<(ContainerHeader, Vec<f32>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    if line.trim_end() != CONTAINER_MAGIC {
        return Err(format_err(path, "missing container magic"));
    }
    let mut header_text = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Err(format_err(path, "header not terminated"));
        }
        if line.trim_end() == DATA_SENTINEL {
            break;
        }
        header_text.push_str(&line);
    }
    let header: ContainerHeader =
        toml::from_str(&header_text).map_err(|e| format_err(path, e.to_string()))?;
    if header.sample_format != "f32le" {
        return Err(format_err(path, format!("unsupported sample format {}", header.sample_format)));
    }
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let expected = 4 * header.sample_count();
    if bytes.len() != expected {
        return Err(format_err(
            path,
            format!("expected {expected} data bytes, found {}", bytes.len()),
        ));
    }
    let samples = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok((header, samples))
}

pub fn write_hex_image(img: &HexImage, provenance: Provenance, path: &Path) -> Result<()> {
    let g = &img.grid;
    let header = ContainerHeader {
        channels: img.channels(),
        planes: g.dims.iter().map(|&(r, c)| [r, c]).collect(),
        sample_format: "f32le".into(),
        geometry: Geometry::Hex {
            t1: g.t1,
            t2: g.t2,
            origin: g.origin,
            approximate: g.approximate,
        },
        provenance,
    };
    let samples = (0..img.channels()).flat_map(|c| {
        img.planes
            .iter()
            .flat_map(move |p| p.index_axis(ndarray::Axis(0), c).iter().copied().collect::<Vec<_>>())
    });
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_container(std::io::BufWriter::new(file), &header, samples).map_err(|e| Error::io(path, e))
}

pub fn read_hex_image(path: &Path) -> Result<(HexImage, Provenance)> {
    let (header, samples) = read_container(path)?;
    let Geometry::Hex {
        t1,
        t2,
        origin,
        approximate,
    } = header.geometry
    else {
        return Err(format_err(path, "not a hexagonal image"));
    };
    if header.planes.len() != 2 {
        return Err(format_err(path, "hexagonal image needs two planes"));
    }
    let dims = [
        (header.planes[0][0], header.planes[0][1]),
        (header.planes[1][0], header.planes[1][1]),
    ];
    let grid = HexGrid::new(t1, t2, origin, dims, approximate)?;
    let mut img = HexImage::zeros(grid, header.channels);
    let mut it = samples.into_iter();
    for c in 0..header.channels {
        for p in img.planes.iter_mut() {
            for v in p.index_axis_mut(ndarray::Axis(0), c).iter_mut() {
                *v = it.next().expect("length checked") as f64;
            }
        }
    }
    Ok((img, header.provenance))
}

pub fn write_distance_matrix(d: &DistanceMatrix, path: &Path) -> Result<()> {
    let header = ContainerHeader {
        channels: 1,
        planes: vec![[d.target.rows, d.target.cols]],
        sample_format: "f32le".into(),
        geometry: Geometry::Rect {
            pitch: d.target.pitch,
            origin: d.target.origin,
        },
        provenance: Provenance {
            source: Some("distance_matrix".into()),
            ..Default::default()
        },
    };
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_container(
        std::io::BufWriter::new(file),
        &header,
        d.values.iter().copied(),
    )
    .map_err(|e| Error::io(path, e))
}

pub fn read_distance_matrix(path: &Path) -> Result<DistanceMatrix> {
    let (header, samples) = read_container(path)?;
    let Geometry::Rect { pitch, origin } = header.geometry else {
        return Err(format_err(path, "not a rectangular container"));
    };
    if header.channels != 1 || header.planes.len() != 1 {
        return Err(format_err(path, "distance matrix must be one plane, one channel"));
    }
    let [rows, cols] = header.planes[0];
    let target = RectGrid::new(pitch, rows, cols, origin)?;
    let values = Array2::from_shape_vec((rows, cols), samples.into_iter().map(f64::from).collect())
        .map_err(|e| format_err(path, e.to_string()))?;
    Ok(DistanceMatrix { values, target })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_container_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.hex");
        let grid = HexGrid::ideal(2.0, [0.5, 0.0], [(2, 3), (1, 3)]).unwrap();
        let mut img = HexImage::zeros(grid, 2);
        let mut k = 0.0;
        for p in img.planes.iter_mut() {
            for v in p.iter_mut() {
                *v = k;
                k += 1.5;
            }
        }
        let prov = Provenance {
            seed: Some(7),
            sigma: Some(1.0),
            optics: ChannelOptics::rgb().to_vec(),
            source: None,
        };
        write_hex_image(&img, prov.clone(), &path).unwrap();
        let (back, p2) = read_hex_image(&path).unwrap();
        assert_eq!(back, img);
        assert_eq!(p2, prov);

        // Byte layout: channel 0 plane 0 first.
        let bytes = fs::read(&path).unwrap();
        let tail = &bytes[bytes.len() - 4 * 18..];
        let first = f32::from_le_bytes([tail[0], tail[1], tail[2], tail[3]]);
        assert_eq!(first as f64, img.planes[0][[0, 0, 0]]);
        let seventh = f32::from_le_bytes([tail[24], tail[25], tail[26], tail[27]]);
        assert_eq!(seventh as f64, img.planes[1][[0, 0, 0]]);
    }

    #[test]
    fn truncated_container_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let d = DistanceMatrix {
            values: Array2::from_elem((2, 2), 1.25),
            target: RectGrid::new(1.0, 2, 2, [0.0; 2]).unwrap(),
        };
        write_distance_matrix(&d, &path).unwrap();
        assert_eq!(read_distance_matrix(&path).unwrap(), d);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(read_distance_matrix(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = RasterImage::new(
            Array3::from_shape_fn((3, 4, 5), |(c, i, j)| (c * 40 + i * 10 + j) as f64),
            1.0,
        )
        .unwrap();
        write_png(&img, &path).unwrap();
        assert_eq!(read_png(&path, 1.0).unwrap(), img);
        assert!(matches!(
            read_png(&dir.path().join("missing.png"), 1.0),
            Err(Error::Image { .. })
        ));
    }
}
