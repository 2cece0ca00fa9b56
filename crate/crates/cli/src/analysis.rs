//! Diagnostic exports: OTFs, PSFs, lattices, spectral packing and distance
//! maps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hexsr_core::image::RasterImage;
use hexsr_core::io::write_distance_matrix;
use hexsr_core::optics::{channel_psf, combined_otf, diagnostic_grid, otf_volume_fraction_beyond, DetectorShape};
use hexsr_core::resample::DistanceMatrix;
use hexsr_core::sampling::{frequency_packing_report, nyquist_density_comparison, write_points_csv, Lattice as GridLattice};
use hexsr_nnet::train::{write_curve_csv, CurvePoint};

use crate::config::{ExperimentConfig, Lattice};
use crate::error::{Error, Result};
use crate::pipeline::{hex_distance, Camera};

const CHANNELS: [&str; 3] = ["red", "green", "blue"];

/// Samples per optical cutoff of the exported OTF grids.
pub const OTF_SAMPLES_PER_CUTOFF: usize = 64;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn export(path: PathBuf, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<PathBuf> {
    let mut w = create(&path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn detector(cfg: &ExperimentConfig, lattice: Lattice) -> DetectorShape {
    match lattice {
        Lattice::Rect => DetectorShape::Rectangle { width: cfg.grid.rect_pitch },
        Lattice::Hex => DetectorShape::Hexagon {
            t1: cfg.grid.hex_t1,
            t2: cfg.grid.hex_t2,
        },
    }
}

fn lattice_name(l: Lattice) -> &'static str {
    match l {
        Lattice::Rect => "rect",
        Lattice::Hex => "hex",
    }
}

/// Combined OTF and PSF of every channel and detector, plus
/// `otf_summary.csv` with the OTF volume beyond the HR and LR folding
/// frequencies.
pub fn export_otf(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let optics = cfg.channel_optics()?;
    let mut files = Vec::new();
    let mut summary = Vec::new();
    for lattice in [Lattice::Rect, Lattice::Hex] {
        let det = detector(cfg, lattice);
        let ln = lattice_name(lattice);
        for (o, ch) in optics.iter().zip(CHANNELS) {
            let otf = combined_otf(o, &det, diagnostic_grid(o, OTF_SAMPLES_PER_CUTOFF))?;
            files.push(export(dir.join(format!("otf_{ln}_{ch}.csv")), |w| otf.write_csv(w))?);
            let psf = channel_psf(o, &det, cfg.optics.kernel_size)?;
            files.push(export(dir.join(format!("psf_{ln}_{ch}.csv")), |w| psf.write_csv(w))?);
            summary.push(format!(
                "{ln},{ch},{},{},{}",
                o.cutoff_frequency(),
                otf_volume_fraction_beyond(&otf, o.folding_frequency()),
                otf_volume_fraction_beyond(&otf, 0.5 / cfg.grid.rect_pitch)
            ));
        }
    }
    files.push(export(dir.join("otf_summary.csv"), |w| {
        writeln!(w, "lattice,channel,cutoff,beyond_hr_folding,beyond_lr_folding")?;
        summary.iter().try_for_each(|l| writeln!(w, "{l}"))
    })?);
    Ok(files)
}

/// Sample positions of both LR lattices over a `size` x `size` HR image,
/// their spectral replica layouts against the green OTF at `contour_level`,
/// and the Nyquist density comparison for every channel.
pub fn export_grids(cfg: &ExperimentConfig, dir: &Path, size: usize, contour_level: f64) -> Result<Vec<PathBuf>> {
    let camera = Camera::new(cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let hr = RasterImage::zeros(1, size, size, camera.hr_pitch);
    let rect = camera.rect_grid(&hr)?;
    let hex = camera.hex_grid(&hr)?;
    let mut files = vec![
        export(dir.join("points_rect.csv"), |w| write_points_csv(&rect.points(), w))?,
        export(dir.join("points_hex.csv"), |w| write_points_csv(&hex.points(), w))?,
    ];
    let green = camera.optics[1];
    let lattices: [(Lattice, &dyn GridLattice); 2] = [(Lattice::Rect, &rect), (Lattice::Hex, &hex)];
    let mut margins = Vec::new();
    for (lattice, grid) in lattices {
        let otf = combined_otf(&green, &detector(cfg, lattice), diagnostic_grid(&green, OTF_SAMPLES_PER_CUTOFF))?;
        let rep = frequency_packing_report(grid, &otf, contour_level)?;
        let ln = lattice_name(lattice);
        files.push(export(dir.join(format!("packing_{ln}.csv")), |w| rep.write_csv(w))?);
        margins.push(format!(
            "{ln},{},{},{},{}",
            grid.density(),
            rep.contour_radius,
            rep.nearest_replica,
            rep.intrusion_margin
        ));
    }
    files.push(export(dir.join("packing_summary.csv"), |w| {
        writeln!(w, "lattice,density,contour_radius,nearest_replica,intrusion_margin")?;
        margins.iter().try_for_each(|l| writeln!(w, "{l}"))
    })?);
    let mut density = Vec::new();
    for (o, ch) in camera.optics.iter().zip(CHANNELS) {
        let r = nyquist_density_comparison(o.cutoff_frequency())?;
        density.push(format!(
            "{ch},{},{},{},{},{}",
            o.cutoff_frequency(),
            r.rect_density,
            r.hex_density,
            r.density_saving_pct,
            r.cutoff_gain_pct
        ));
    }
    files.push(export(dir.join("nyquist_density.csv"), |w| {
        writeln!(w, "channel,cutoff,rect_density,hex_density,density_saving_pct,cutoff_gain_pct")?;
        density.iter().try_for_each(|l| writeln!(w, "{l}"))
    })?);
    Ok(files)
}

/// Heatmap CSV: the first row holds the `x` coordinates, the first column
/// the `y` coordinates, in um.
pub fn write_heatmap_csv<W: Write>(d: &DistanceMatrix, mut out: W) -> std::io::Result<()> {
    let g = &d.target;
    write!(out, "y\\x")?;
    for n in 0..g.cols {
        write!(out, ",{}", g.point(0, n)[0])?;
    }
    writeln!(out)?;
    for m in 0..g.rows {
        write!(out, "{}", g.point(m, 0)[1])?;
        for v in d.values.row(m) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Distance from every pixel of the `upsample`-times interpolation grid to
/// the nearest hexagonal sample, for a `size` x `size` HR image.
pub fn export_distance(cfg: &ExperimentConfig, dir: &Path, size: usize, upsample: usize) -> Result<Vec<PathBuf>> {
    let camera = Camera::new(cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let hr = RasterImage::zeros(3, size, size, camera.hr_pitch);
    let hex = camera.observe_hex(&hr, &hexsr_core::observe::NoiseSpec::new(0.0, 0)?)?;
    let d = hex_distance(&hex, &camera.interp_grid((size, size), upsample)?)?;
    let heat = export(dir.join(format!("distance_x{upsample}.csv")), |w| write_heatmap_csv(&d, w))?;
    let bin = dir.join(format!("distance_x{upsample}.hxd"));
    write_distance_matrix(&d, &bin)?;
    Ok(vec![heat, bin])
}

pub fn export_curve(curve: &[CurvePoint], path: &Path) -> Result<PathBuf> {
    export(path.to_path_buf(), |w| write_curve_csv(curve, w))
}
