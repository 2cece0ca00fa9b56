use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hexsr::analysis::{export_curve, export_distance, export_grids, export_otf};
use hexsr::config::{ExperimentConfig, Lattice, SystemVariant};
use hexsr::dataset::resolve_dataset;
use hexsr::error::{Error, Result};
use hexsr::pipeline::{fit_wiener_nsr, hex_distance, hex_ni, run_pipeline, train_variant, wiener, Camera};
use hexsr::report::{read_per_image_csv, write_report_csv, write_report_files};
use hexsr_core::image::RasterImage;
use hexsr_core::io::{read_hex_image, read_png, read_toml, sidecar_path, write_distance_matrix, write_hex_image, write_png, write_toml, Provenance, RectSidecar};
use hexsr_core::resample::bicubic_upsample;

/// Hexagonal-sampling super-resolution experiments.
#[derive(Parser)]
#[command(name = "hexsr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Dataset root of numbered PNGs; overrides `data.root`.
    #[arg(long, env = "HEXSR_DATA")]
    data: Option<PathBuf>,

    /// Overrides `noise.sigma`.
    #[arg(long)]
    sigma: Option<f64>,

    /// Overrides `noise.seed`.
    #[arg(long)]
    seed: Option<u64>,

    /// Overrides `systems`.
    #[arg(long, value_delimiter = ',')]
    systems: Option<Vec<SystemVariant>>,

    /// Overrides `training.schedule.steps`.
    #[arg(long)]
    steps: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.sigma {
            cfg.noise.sigma = s;
        }
        if let Some(s) = self.seed {
            cfg.noise.seed = s;
        }
        if let Some(s) = &self.systems {
            cfg.systems = s.clone();
        }
        if let Some(s) = self.steps {
            cfg.training.schedule.steps = s;
        }
        if let Some(d) = &self.data {
            cfg.data.root = Some(d.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the default configuration.
    DefaultConfig {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate an LR capture of an HR PNG.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        lattice: Lattice,
        /// Rect: PNG with a TOML sidecar. Hex: plane container.
        #[arg(long)]
        out: PathBuf,
        /// Noise stream index.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Interpolate an LR capture onto a finer rectangular grid.
    Resample {
        #[command(flatten)]
        common: Common,
        /// Rect PNG (with sidecar) or hex plane container.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        lattice: Lattice,
        /// 2 or 4 relative to the LR rectangular pitch.
        #[arg(long, default_value_t = 4)]
        factor: usize,
        /// HR size `HEIGHTxWIDTH` in pixels; required for hex input.
        #[arg(long, value_parser = parse_size)]
        hr_size: Option<(usize, usize)>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the distance matrix (hex only).
        #[arg(long)]
        distance: Option<PathBuf>,
    },
    /// Wiener-deconvolve an interpolated image at the HR pitch.
    RestoreWiener {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        lattice: Lattice,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit per-channel Wiener NSRs on the training split.
    FitNsr {
        #[command(flatten)]
        common: Common,
        /// Defaults to both lattices.
        #[arg(long, value_enum)]
        lattice: Option<Lattice>,
        /// Write the config with the fitted NSRs here.
        #[arg(long)]
        write_config: Option<PathBuf>,
    },
    /// Train a learned system and save a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        system: SystemVariant,
        #[arg(long)]
        out: PathBuf,
        /// Learning-curve CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Run every configured system on the test split and write reports.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Also write every SR image as PNG.
        #[arg(long)]
        save_images: bool,
    },
    /// Export OTF and PSF tables.
    AnalyzeOtf {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export lattice, spectral-packing and distance-matrix tables.
    AnalyzeGrid {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// HR image side in pixels.
        #[arg(long, default_value_t = 64)]
        size: usize,
        /// OTF isocontour level for the packing report.
        #[arg(long, default_value_t = 0.1)]
        level: f64,
    },
    /// Rebuild the summary table from a per-image CSV.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = s.split_once('x').ok_or("expected HEIGHTxWIDTH")?;
    Ok((h.parse().map_err(|e| format!("{e}"))?, w.parse().map_err(|e| format!("{e}"))?))
}

fn read_rect(path: &Path, pitch: f64) -> Result<RasterImage> {
    let side = sidecar_path(path);
    let pitch = if side.exists() { read_toml::<RectSidecar>(&side)?.pitch } else { pitch };
    Ok(read_png(path, pitch)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::DefaultConfig { out } => {
            let cfg = ExperimentConfig::default();
            match out {
                Some(p) => cfg.save(&p)?,
                None => print!("{}", cfg.to_toml_string()?),
            }
        }
        Command::Simulate {
            common,
            input,
            lattice,
            out,
            index,
        } => {
            let cfg = common.load()?;
            let camera = Camera::new(&cfg)?;
            let hr = read_png(&input, camera.hr_pitch)?;
            let noise = camera.noise.for_image(index);
            let prov = Provenance {
                seed: Some(cfg.noise.seed),
                sigma: Some(cfg.noise.sigma),
                optics: camera.optics.to_vec(),
                source: Some(input.display().to_string()),
            };
            match lattice {
                Lattice::Rect => {
                    let lr = camera.observe_rect(&hr, &noise)?;
                    write_png(&lr, &out)?;
                    write_toml(&RectSidecar::new(&camera.rect_grid(&hr)?, prov), &sidecar_path(&out))?;
                }
                Lattice::Hex => write_hex_image(&camera.observe_hex(&hr, &noise)?, prov, &out)?,
            }
        }
        Command::Resample {
            common,
            input,
            lattice,
            factor,
            hr_size,
            out,
            distance,
        } => {
            let cfg = common.load()?;
            let camera = Camera::new(&cfg)?;
            match lattice {
                Lattice::Rect => {
                    let lr = read_rect(&input, camera.rect_pitch)?;
                    write_png(&bicubic_upsample(&lr, factor)?, &out)?;
                }
                Lattice::Hex => {
                    let dims = hr_size.ok_or_else(|| Error::Config("--hr-size is required for hex input".into()))?;
                    let (hex, _) = read_hex_image(&input)?;
                    let grid = camera.interp_grid(dims, factor)?;
                    write_png(&hex_ni(&hex, &grid)?, &out)?;
                    if let Some(d) = distance {
                        write_distance_matrix(&hex_distance(&hex, &grid)?, &d)?;
                    }
                }
            }
        }
        Command::RestoreWiener {
            common,
            input,
            lattice,
            out,
        } => {
            let cfg = common.load()?;
            let camera = Camera::new(&cfg)?;
            let nsr = cfg
                .wiener
                .nsr(lattice)
                .ok_or_else(|| Error::Config("no NSR configured for this lattice (run fit-nsr)".into()))?;
            let img = read_png(&input, camera.hr_pitch)?;
            write_png(&wiener(&img, camera.psf(lattice), nsr)?, &out)?;
        }
        Command::FitNsr {
            common,
            lattice,
            write_config,
        } => {
            let mut cfg = common.load()?;
            let camera = Camera::new(&cfg)?;
            let (ds, _) = resolve_dataset(&cfg.data, None)?;
            let lattices = lattice.map_or(vec![Lattice::Hex, Lattice::Rect], |l| vec![l]);
            for l in lattices {
                let (nsr, fits) = fit_wiener_nsr(l, &ds.train, &camera, cfg.evaluation.shave)?;
                for (c, f) in fits.iter().enumerate() {
                    let flag = if f.fallback_used { " (scan fallback)" } else { "" };
                    println!("{l:?} channel {c}: nsr {:.6e}{flag}", f.nsr);
                }
                cfg.wiener.set_nsr(l, nsr);
            }
            if let Some(p) = write_config {
                cfg.save(&p)?;
            }
        }
        Command::Train {
            common,
            system,
            out,
            curve,
        } => {
            let cfg = common.load()?;
            if !system.is_learned() {
                return Err(Error::Config(format!("{system} has no trainable network")));
            }
            let camera = Camera::new(&cfg)?;
            let (ds, _) = resolve_dataset(&cfg.data, None)?;
            let t = train_variant(&cfg, system, &ds, &camera)?;
            t.model.save(&t.meta, &out)?;
            if let Some(p) = curve {
                export_curve(&t.curve, &p)?;
            }
            match t.best_val_psnr_y {
                Some(v) => println!("best step {} (validation Y-PSNR {v:.3} dB)", t.best_step),
                None => println!("trained {} steps", t.best_step),
            }
        }
        Command::Evaluate { common, out, save_images } => {
            let mut cfg = common.load()?;
            let (ds, synthetic) = resolve_dataset(&cfg.data, None)?;
            let img_dir = out.join("images");
            if save_images {
                std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
            }
            let outcome = run_pipeline(&cfg, &ds, save_images.then_some(img_dir.as_path()))?;
            for (&l, &nsr) in &outcome.fitted_nsr {
                cfg.wiener.set_nsr(l, nsr);
            }
            write_report_files(&out, &cfg, &outcome.rows, &outcome.failures, synthetic)?;
            for (v, t) in &outcome.trained {
                export_curve(&t.curve, &out.join(format!("curve_{}.csv", hexsr::pipeline::variant_slug(*v))))?;
            }
            for (name, err) in &outcome.failures {
                eprintln!("{name}: {err}");
            }
            if !outcome.failures.is_empty() {
                return Err(Error::Partial {
                    failed: outcome.failures.len(),
                    total: ds.test.len(),
                });
            }
        }
        Command::AnalyzeOtf { common, out } => {
            for p in export_otf(&common.load()?, &out)? {
                println!("{}", p.display());
            }
        }
        Command::AnalyzeGrid { common, out, size, level } => {
            let cfg = common.load()?;
            let mut files = export_grids(&cfg, &out, size, level)?;
            for up in [2, 4] {
                files.extend(export_distance(&cfg, &out, size, up)?);
            }
            for p in files {
                println!("{}", p.display());
            }
        }
        Command::Report { input, out } => {
            let rows = read_per_image_csv(&input, 0)?;
            let mut buf = Vec::new();
            write_report_csv(&rows, &mut buf).map_err(|e| Error::io(&input, e))?;
            match out {
                Some(p) => std::fs::write(&p, buf).map_err(|e| Error::io(&p, e))?,
                None => print!("{}", String::from_utf8_lossy(&buf)),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
