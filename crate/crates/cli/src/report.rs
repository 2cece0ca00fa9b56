//! Metric tables.

use std::io::Write;
use std::path::Path;

use hexsr_core::metrics::MetricReport;

use crate::config::{ExperimentConfig, SystemVariant};
use crate::error::{Error, Result};
use crate::pipeline::MetricRow;

pub const REPORT_HEADER: &str = "system,psnr_y,ssim_y,psnr_rgb,ssim_rgb";
pub const PER_IMAGE_HEADER: &str = "image,system,psnr_y,ssim_y,psnr_rgb,ssim_rgb";

/// Mean metrics of one table row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanMetrics {
    pub psnr_y: f64,
    pub ssim_y: f64,
    pub psnr_rgb: f64,
    pub ssim_rgb: f64,
}

impl MeanMetrics {
    fn of<'a>(items: impl Iterator<Item = [f64; 4]> + 'a) -> Option<Self> {
        let (mut s, mut n) = ([0.0; 4], 0usize);
        for v in items {
            for k in 0..4 {
                s[k] += v[k];
            }
            n += 1;
        }
        (n > 0).then(|| {
            let m = s.map(|x| x / n as f64);
            Self {
                psnr_y: m[0],
                ssim_y: m[1],
                psnr_rgb: m[2],
                ssim_rgb: m[3],
            }
        })
    }

    fn array(&self) -> [f64; 4] {
        [self.psnr_y, self.ssim_y, self.psnr_rgb, self.ssim_rgb]
    }
}

fn metrics_array(m: &MetricReport) -> [f64; 4] {
    [m.psnr_y, m.ssim_y, m.psnr_rgb, m.ssim_rgb]
}

/// One row per system present, in the fixed system order, each averaged over
/// its images, then a `mean` row averaging those system rows.
pub fn summarize(rows: &[MetricRow]) -> Vec<(String, MeanMetrics)> {
    let mut out: Vec<(String, MeanMetrics)> = SystemVariant::ALL
        .iter()
        .filter_map(|&v| {
            MeanMetrics::of(rows.iter().filter(|r| r.system == v).map(|r| metrics_array(&r.metrics)))
                .map(|m| (v.label().to_owned(), m))
        })
        .collect();
    if let Some(m) = MeanMetrics::of(out.iter().map(|(_, m)| m.array())) {
        out.push(("mean".to_owned(), m));
    }
    out
}

pub fn write_report_csv<W: Write>(rows: &[MetricRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER.split(','))?;
    for (label, m) in summarize(rows) {
        let [a, b, c, d] = m.array();
        w.write_record([label, a.to_string(), b.to_string(), c.to_string(), d.to_string()])?;
    }
    w.flush()
}

/// Rows sorted by image name, then system order.
pub fn write_per_image_csv<W: Write>(rows: &[MetricRow], out: W) -> std::io::Result<()> {
    let mut sorted: Vec<&MetricRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.image.cmp(&b.image).then(a.system.cmp(&b.system)));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PER_IMAGE_HEADER.split(','))?;
    for r in sorted {
        let mut record = vec![r.image.clone(), r.system.label().to_owned()];
        record.extend(metrics_array(&r.metrics).map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()
}

/// Reads a file written by [`write_per_image_csv`].
pub fn read_per_image_csv(path: &Path, shave: usize) -> Result<Vec<MetricRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: u64, why: &str| Error::Dataset(format!("{}:{line}: {why}", path.display()));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(1, &e.to_string()))?;
    if !header.iter().eq(PER_IMAGE_HEADER.split(',')) {
        return Err(bad(1, "missing per-image header"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            bad(line, &e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let system = SystemVariant::ALL
            .iter()
            .copied()
            .find(|v| v.label() == &record[1])
            .ok_or_else(|| bad(line, "unknown system"))?;
        let mut v = [0.0; 4];
        for k in 0..4 {
            v[k] = record[k + 2].parse().map_err(|_| bad(line, "bad number"))?;
        }
        rows.push(MetricRow {
            image: record[0].to_owned(),
            system,
            metrics: MetricReport {
                psnr_y: v[0],
                ssim_y: v[1],
                psnr_rgb: v[2],
                ssim_rgb: v[3],
                shave,
            },
        });
    }
    Ok(rows)
}

/// Plain-text description of how the numbers were produced.
pub fn summary_text(cfg: &ExperimentConfig, rows: &[MetricRow], failures: &[(String, String)], synthetic: bool) -> String {
    let mut images: Vec<&str> = rows.iter().map(|r| r.image.as_str()).collect();
    images.sort_unstable();
    images.dedup();
    let mut s = String::new();
    s.push_str(&format!("images evaluated: {}\n", images.len()));
    s.push_str(&format!("failed images: {}\n", failures.len()));
    for (name, err) in failures {
        s.push_str(&format!("  {name}: {err}\n"));
    }
    s.push_str(&format!("luma: {:?} swing BT.601\n", cfg.evaluation.luma));
    s.push_str(&format!("border shave: {} px\n", cfg.evaluation.shave));
    s.push_str(&format!("noise sigma: {} (seed {})\n", cfg.noise.sigma, cfg.noise.seed));
    s.push_str(&format!(
        "pitches: HR {} um, rect {} um, hex {} x {} um\n",
        cfg.grid.hr_pitch, cfg.grid.rect_pitch, cfg.grid.hex_t1, cfg.grid.hex_t2
    ));
    if synthetic {
        s.push_str("data: built-in synthetic images (no dataset root configured)\n");
    }
    for (lat, nsr) in [("hex", cfg.wiener.hex_nsr), ("rect", cfg.wiener.rect_nsr)] {
        if let Some(n) = nsr {
            s.push_str(&format!("wiener nsr {lat}: {} {} {}\n", n[0], n[1], n[2]));
        }
    }
    s
}

/// Writes `report.csv`, `per_image.csv` and `summary.txt` into `dir`.
pub fn write_report_files(dir: &Path, cfg: &ExperimentConfig, rows: &[MetricRow], failures: &[(String, String)], synthetic: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: Vec<u8>| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    let mut buf = Vec::new();
    write_report_csv(rows, &mut buf).map_err(|e| Error::io(dir, e))?;
    write("report.csv", buf)?;
    let mut buf = Vec::new();
    write_per_image_csv(rows, &mut buf).map_err(|e| Error::io(dir, e))?;
    write("per_image.csv", buf)?;
    write("summary.txt", summary_text(cfg, rows, failures, synthetic).into_bytes())
}
