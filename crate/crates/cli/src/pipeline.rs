//! Camera simulation, the seven restoration chains, NSR fitting and
//! training-pair generation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hexsr_core::image::{HexImage, RasterImage};
use hexsr_core::io::write_png;
use hexsr_core::metrics::{evaluate, MetricReport};
use hexsr_core::observe::{lr_hex_grid, lr_rect_grid, observe_hex, observe_rect, Dihedral, NoiseSpec};
use hexsr_core::optics::{channel_psf, ChannelOptics, DetectorShape, DiscretePsf};
use hexsr_core::resample::{bicubic_upsample, distance_matrix, nonuniform_interpolate, DistanceMatrix};
use hexsr_core::sampling::{HexGrid, RectGrid};
use hexsr_core::wiener::{fit_nsr_interior, wiener_restore, NsrFit, WienerFilterSpec, NSR_RANGE};
use hexsr_nnet::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
use hexsr_nnet::train::{train, CurvePoint, TrainOutcome, TrainPair};
use hexsr_nnet::{Restorer, Scalar};
use ndarray::Array2;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Lattice, Precision, SystemVariant};
use crate::dataset::{Dataset, ImageSource};
use crate::error::{Error, Result};

const CHANNEL_NAMES: [&str; 3] = ["red", "green", "blue"];

/// The simulated rectangular and hexagonal cameras of one experiment.
#[derive(Debug, Clone)]
pub struct Camera {
    pub optics: [ChannelOptics; 3],
    pub hr_pitch: f64,
    pub rect_pitch: f64,
    pub hex_t1: f64,
    pub hex_t2: f64,
    pub approximate_hex: bool,
    /// `d / p`.
    pub factor: usize,
    /// Per-channel PSFs at the HR pitch: optics times square detector.
    pub rect_psf: Vec<DiscretePsf>,
    /// Optics times hexagonal detector.
    pub hex_psf: Vec<DiscretePsf>,
    pub noise: NoiseSpec,
}

impl Camera {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let optics = cfg.channel_optics()?;
        let g = &cfg.grid;
        let rect = DetectorShape::Rectangle { width: g.rect_pitch };
        let hex = DetectorShape::Hexagon { t1: g.hex_t1, t2: g.hex_t2 };
        let k = cfg.optics.kernel_size;
        let psfs = |shape: &DetectorShape| -> Result<Vec<DiscretePsf>> {
            optics.iter().map(|o| Ok(channel_psf(o, shape, k)?)).collect()
        };
        Ok(Self {
            optics,
            hr_pitch: g.hr_pitch,
            rect_pitch: g.rect_pitch,
            hex_t1: g.hex_t1,
            hex_t2: g.hex_t2,
            approximate_hex: g.approximate_hex,
            factor: g.factor().expect("validated"),
            rect_psf: psfs(&rect)?,
            hex_psf: psfs(&hex)?,
            noise: NoiseSpec::new(cfg.noise.sigma, cfg.noise.seed)?,
        })
    }

    pub fn psf(&self, lattice: Lattice) -> &[DiscretePsf] {
        match lattice {
            Lattice::Rect => &self.rect_psf,
            Lattice::Hex => &self.hex_psf,
        }
    }

    fn check_hr(&self, hr: &RasterImage) -> Result<()> {
        let f = self.factor;
        if hr.channels() != 3 || !hr.height().is_multiple_of(f) || !hr.width().is_multiple_of(f) || hr.height() < 4 * f || hr.width() < 4 * f {
            return Err(Error::Core(hexsr_core::Error::Shape(format!(
                "HR image must be RGB with sides a multiple of {f} and at least {}, got {}x{}x{}",
                4 * f,
                hr.channels(),
                hr.height(),
                hr.width()
            ))));
        }
        if (hr.pitch - self.hr_pitch).abs() > 1e-12 {
            return Err(Error::Core(hexsr_core::Error::PitchMismatch {
                image: hr.pitch,
                expected: self.hr_pitch,
            }));
        }
        Ok(())
    }

    pub fn rect_grid(&self, hr: &RasterImage) -> Result<RectGrid> {
        Ok(lr_rect_grid(hr, self.rect_pitch)?)
    }

    pub fn hex_grid(&self, hr: &RasterImage) -> Result<HexGrid> {
        if self.approximate_hex {
            let fov = hr.sampling_window();
            return Ok(HexGrid::covering(self.hex_t1, self.hex_t2, &fov, true)?);
        }
        Ok(lr_hex_grid(hr, self.hex_t1, self.hex_t2)?)
    }

    /// Noise stream of image `id`, dihedral copy `copy`.
    pub fn noise_for(&self, id: u32, copy: usize) -> NoiseSpec {
        self.noise.for_image(u64::from(id) * 8 + copy as u64)
    }

    pub fn observe_rect(&self, hr: &RasterImage, noise: &NoiseSpec) -> Result<RasterImage> {
        self.check_hr(hr)?;
        Ok(observe_rect(hr, &self.rect_psf, &self.rect_grid(hr)?, noise)?)
    }

    pub fn observe_hex(&self, hr: &RasterImage, noise: &NoiseSpec) -> Result<HexImage> {
        self.check_hr(hr)?;
        Ok(observe_hex(hr, &self.hex_psf, &self.hex_grid(hr)?, noise)?)
    }

    /// Rectangular grid with `upsample` times the LR rectangular density per
    /// axis (pitch `d / upsample`), aligned with the HR pixels.
    pub fn interp_grid(&self, hr_dims: (usize, usize), upsample: usize) -> Result<RectGrid> {
        let m = self.factor / upsample;
        if upsample == 0 || !self.factor.is_multiple_of(upsample) {
            return Err(Error::Config(format!("cannot upsample by {upsample} with d/p = {}", self.factor)));
        }
        Ok(RectGrid::new(self.rect_pitch / upsample as f64, hr_dims.0 / m, hr_dims.1 / m, [0.0, 0.0])?)
    }
}

/// Delaunay interpolation of `hex` and its distance matrix on `grid`.
pub fn hex_ni(hex: &HexImage, grid: &RectGrid) -> Result<RasterImage> {
    Ok(nonuniform_interpolate(hex, grid)?)
}

pub fn hex_distance(hex: &HexImage, grid: &RectGrid) -> Result<DistanceMatrix> {
    Ok(distance_matrix(&hex.grid.points(), grid)?)
}

pub fn wiener(img: &RasterImage, psfs: &[DiscretePsf], nsr: [f64; 3]) -> Result<RasterImage> {
    let specs = psfs
        .iter()
        .zip(nsr)
        .zip(CHANNEL_NAMES)
        .map(|((p, n), name)| WienerFilterSpec::new(p.clone(), n, name))
        .collect::<hexsr_core::Result<Vec<_>>>()?;
    Ok(wiener_restore(img, &specs)?)
}

/// A trained restorer at either precision.
#[derive(Debug, Clone)]
pub enum Model {
    F64(Restorer<f64>),
    F32(Restorer<f32>),
}

impl Model {
    pub fn forward(&self, input: &RasterImage, dist: Option<&Array2<f64>>) -> Result<RasterImage> {
        Ok(match self {
            Model::F64(m) => m.forward(input, dist)?,
            Model::F32(m) => m.forward(input, dist)?,
        })
    }

    pub fn uses_distance(&self) -> bool {
        match self {
            Model::F64(m) => m.config.use_distance_head,
            Model::F32(m) => m.config.use_distance_head,
        }
    }

    pub fn load(path: &Path, precision: Precision) -> Result<(Self, CheckpointMeta)> {
        Ok(match precision {
            Precision::F64 => {
                let (m, meta) = load_checkpoint::<f64>(path)?;
                (Model::F64(m), meta)
            }
            Precision::F32 => {
                let (m, meta) = load_checkpoint::<f32>(path)?;
                (Model::F32(m), meta)
            }
        })
    }

    pub fn save(&self, meta: &CheckpointMeta, path: &Path) -> Result<()> {
        match self {
            Model::F64(m) => save_checkpoint(m, meta, path)?,
            Model::F32(m) => save_checkpoint(m, meta, path)?,
        }
        Ok(())
    }
}

/// Network input (and distance matrix) of a learned variant.
pub fn learned_input(variant: SystemVariant, hr: &RasterImage, noise: &NoiseSpec, camera: &Camera, with_dist: bool) -> Result<(RasterImage, Option<Array2<f64>>)> {
    match variant {
        SystemVariant::HexNi2Rcan2 => {
            let hex = camera.observe_hex(hr, noise)?;
            let grid = camera.interp_grid((hr.height(), hr.width()), 2)?;
            let dist = if with_dist { Some(hex_distance(&hex, &grid)?.values) } else { None };
            Ok((hex_ni(&hex, &grid)?, dist))
        }
        SystemVariant::RectBic2Rcan2 => {
            let lr = camera.observe_rect(hr, noise)?;
            Ok((bicubic_upsample(&lr, camera.factor / 2)?, None))
        }
        SystemVariant::Rect4Rcan4 => Ok((camera.observe_rect(hr, noise)?, None)),
        v => Err(Error::Config(format!("{v} is not a learned system"))),
    }
}

/// Interpolated image at the HR pitch before any restoration.
pub fn interpolated(lattice: Lattice, hr: &RasterImage, noise: &NoiseSpec, camera: &Camera) -> Result<RasterImage> {
    match lattice {
        Lattice::Hex => {
            let hex = camera.observe_hex(hr, noise)?;
            hex_ni(&hex, &camera.interp_grid((hr.height(), hr.width()), camera.factor)?)
        }
        Lattice::Rect => Ok(bicubic_upsample(&camera.observe_rect(hr, noise)?, camera.factor)?),
    }
}

/// Everything a restoration chain needs beyond the camera.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub hex_nsr: Option<[f64; 3]>,
    pub rect_nsr: Option<[f64; 3]>,
    pub models: BTreeMap<SystemVariant, Model>,
}

/// Runs one system on one HR image and returns the SR estimate at the HR
/// pitch, clipped to `[0, 255]`.
pub fn run_variant(variant: SystemVariant, hr: &RasterImage, noise: &NoiseSpec, camera: &Camera, res: &Resources) -> Result<RasterImage> {
    let out = if variant.is_learned() {
        let model = res
            .models
            .get(&variant)
            .ok_or_else(|| Error::Config(format!("no trained model for {variant}")))?;
        let (input, dist) = learned_input(variant, hr, noise, camera, model.uses_distance())?;
        model.forward(&input, dist.as_ref())?
    } else {
        let lattice = variant.lattice();
        let img = interpolated(lattice, hr, noise, camera)?;
        if variant.uses_wiener() {
            let nsr = match lattice {
                Lattice::Hex => res.hex_nsr,
                Lattice::Rect => res.rect_nsr,
            }
            .ok_or_else(|| Error::Config(format!("no NSR for {variant}")))?;
            wiener(&img, camera.psf(lattice), nsr)?
        } else {
            img
        }
    };
    Ok(out.map(|v| v.clamp(0.0, 255.0)))
}

/// HR images of `sources`, each followed by its seven non-identity dihedral
/// copies when `augment` is set, tagged with `(id, copy)`.
fn load_hr(sources: &[ImageSource], pitch: f64, augment: bool) -> Result<Vec<(u32, usize, RasterImage)>> {
    let mut out = Vec::new();
    for s in sources {
        let hr = s.load(pitch)?;
        if augment {
            for (k, t) in Dihedral::all().iter().enumerate() {
                out.push((s.id(), k, t.apply(&hr)));
            }
        } else {
            out.push((s.id(), 0, hr));
        }
    }
    Ok(out)
}

/// Network training pairs for `variant` from HR sources.
pub fn training_pairs(variant: SystemVariant, sources: &[ImageSource], camera: &Camera, with_dist: bool, augment: bool) -> Result<Vec<TrainPair>> {
    load_hr(sources, camera.hr_pitch, augment)?
        .into_par_iter()
        .map(|(id, k, hr)| {
            let (input, dist) = learned_input(variant, &hr, &camera.noise_for(id, k), camera, with_dist)?;
            Ok(TrainPair { input, dist, target: hr })
        })
        .collect()
}

/// Per-channel NSR fit over `(interpolated, truth)` pairs of the sources,
/// scoring the same `shave`d interior as the metrics.
pub fn fit_wiener_nsr(lattice: Lattice, sources: &[ImageSource], camera: &Camera, shave: usize) -> Result<([f64; 3], Vec<NsrFit>)> {
    let pairs: Vec<(RasterImage, RasterImage)> = load_hr(sources, camera.hr_pitch, false)?
        .into_par_iter()
        .map(|(id, k, hr)| Ok((interpolated(lattice, &hr, &camera.noise_for(id, k), camera)?, hr)))
        .collect::<Result<_>>()?;
    let mut nsr = [0.0; 3];
    let mut fits = Vec::with_capacity(3);
    for (c, psf) in camera.psf(lattice).iter().enumerate() {
        let fit = fit_nsr_interior(&pairs, c, psf, NSR_RANGE, shave)?;
        nsr[c] = fit.nsr;
        fits.push(fit);
    }
    Ok((nsr, fits))
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: Model,
    pub meta: CheckpointMeta,
    pub best_step: usize,
    pub best_val_psnr_y: Option<f64>,
    pub curve: Vec<CurvePoint>,
}

fn train_at<S: Scalar>(cfg: &ExperimentConfig, variant: SystemVariant, train_set: &[TrainPair], val_set: &[TrainPair]) -> Result<TrainOutcome<S>> {
    let rc = variant
        .restorer_config(&cfg.network)
        .ok_or_else(|| Error::Config(format!("{variant} is not a learned system")))?;
    let model = Restorer::<S>::new(rc, cfg.network.init_seed)?;
    Ok(train(model, train_set, val_set, &cfg.training.schedule)?)
}

/// Simulates training and validation pairs and trains `variant`.
pub fn train_variant(cfg: &ExperimentConfig, variant: SystemVariant, dataset: &Dataset, camera: &Camera) -> Result<Trained> {
    let with_dist = variant.restorer_config(&cfg.network).is_some_and(|r| r.use_distance_head);
    let train_set = training_pairs(variant, &dataset.train, camera, with_dist, cfg.training.augment)?;
    let val_set = training_pairs(variant, &dataset.val, camera, with_dist, false)?;
    let t = &cfg.training.schedule;
    let meta = |step| CheckpointMeta {
        step,
        seed: t.seed,
        lr: t.lr,
        adam: t.adam,
        loss: t.loss,
    };
    Ok(match cfg.network.precision {
        Precision::F64 => {
            let out = train_at::<f64>(cfg, variant, &train_set, &val_set)?;
            Trained {
                model: Model::F64(out.model),
                meta: meta(out.best_step),
                best_step: out.best_step,
                best_val_psnr_y: out.best_val_psnr_y,
                curve: out.curve,
            }
        }
        Precision::F32 => {
            let out = train_at::<f32>(cfg, variant, &train_set, &val_set)?;
            Trained {
                model: Model::F32(out.model),
                meta: meta(out.best_step),
                best_step: out.best_step,
                best_val_psnr_y: out.best_val_psnr_y,
                curve: out.curve,
            }
        }
    })
}

/// Networks trained during a run, by system.
pub type TrainedModels = BTreeMap<SystemVariant, Trained>;
/// NSRs fitted during a run, by lattice.
pub type FittedNsr = BTreeMap<Lattice, [f64; 3]>;

/// Metrics of one system on one test image.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub image: String,
    pub system: SystemVariant,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOutcome {
    pub rows: Vec<MetricRow>,
    /// `(image, error)` for every image that failed.
    pub failures: Vec<(String, String)>,
    pub trained: TrainedModels,
    /// NSRs fitted because the configuration left them unset.
    pub fitted_nsr: FittedNsr,
}

/// Builds the restoration resources: configured NSRs (fitted on the training
/// split when unset) and, for learned systems, the checkpoint or a freshly
/// trained network.
pub fn prepare_resources(cfg: &ExperimentConfig, dataset: &Dataset, camera: &Camera) -> Result<(Resources, TrainedModels, FittedNsr)> {
    let mut res = Resources {
        hex_nsr: cfg.wiener.hex_nsr,
        rect_nsr: cfg.wiener.rect_nsr,
        models: BTreeMap::new(),
    };
    let mut fitted = BTreeMap::new();
    for lattice in [Lattice::Hex, Lattice::Rect] {
        let needed = cfg.systems.iter().any(|v| v.uses_wiener() && v.lattice() == lattice);
        if needed && cfg.wiener.nsr(lattice).is_none() {
            let (nsr, _) = fit_wiener_nsr(lattice, &dataset.train, camera, cfg.evaluation.shave)?;
            match lattice {
                Lattice::Hex => res.hex_nsr = Some(nsr),
                Lattice::Rect => res.rect_nsr = Some(nsr),
            }
            fitted.insert(lattice, nsr);
        }
    }
    let mut trained = BTreeMap::new();
    for &v in cfg.systems.iter().filter(|v| v.is_learned()) {
        if res.models.contains_key(&v) {
            continue;
        }
        match cfg.checkpoints.get(v) {
            Some(path) => {
                res.models.insert(v, Model::load(path, cfg.network.precision)?.0);
            }
            None => {
                let t = train_variant(cfg, v, dataset, camera)?;
                res.models.insert(v, t.model.clone());
                trained.insert(v, t);
            }
        }
    }
    Ok((res, trained, fitted))
}

/// Runs every configured system on every test image. Images that fail are
/// recorded and skipped; configuration problems abort up front. When
/// `out_dir` is set the SR images are written as `{image}_{system}.png`.
pub fn run_pipeline(cfg: &ExperimentConfig, dataset: &Dataset, out_dir: Option<&Path>) -> Result<PipelineOutcome> {
    let camera = Camera::new(cfg)?;
    let (res, trained, fitted_nsr) = prepare_resources(cfg, dataset, &camera)?;
    let mut systems = cfg.systems.clone();
    systems.sort();
    systems.dedup();
    let per_image: Vec<std::result::Result<Vec<MetricRow>, (String, String)>> = dataset
        .test
        .par_iter()
        .map(|src| {
            let name = src.name();
            let run = || -> Result<Vec<MetricRow>> {
                let hr = src.load(camera.hr_pitch)?;
                let noise = camera.noise_for(src.id(), 0);
                let mut rows = Vec::with_capacity(systems.len());
                for &v in &systems {
                    let sr = run_variant(v, &hr, &noise, &camera, &res)?;
                    if let Some(dir) = out_dir {
                        write_png(&sr.map(|x| x.round()), &sr_path(dir, &name, v))?;
                    }
                    rows.push(MetricRow {
                        image: name.clone(),
                        system: v,
                        metrics: evaluate(&sr, &hr, cfg.evaluation.shave, cfg.evaluation.luma)?,
                    });
                }
                Ok(rows)
            };
            run().map_err(|e| (name.clone(), e.to_string()))
        })
        .collect();
    let mut out = PipelineOutcome {
        trained,
        fitted_nsr,
        ..Default::default()
    };
    for r in per_image {
        match r {
            Ok(rows) => out.rows.extend(rows),
            Err(f) => out.failures.push(f),
        }
    }
    Ok(out)
}

pub fn sr_path(dir: &Path, image: &str, v: SystemVariant) -> PathBuf {
    dir.join(format!("{image}_{}.png", variant_slug(v)))
}

/// The config spelling of a system (`hex_ni4`, ...).
pub fn variant_slug(v: SystemVariant) -> String {
    toml::Value::try_from(v)
        .ok()
        .and_then(|t| t.as_str().map(str::to_owned))
        .unwrap_or_else(|| format!("{v:?}"))
}
