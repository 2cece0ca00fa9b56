//! Patch sampling, Adam training and best-validation selection.

use std::io::Write;

use hexsr_core::image::RasterImage;
use hexsr_core::metrics::{psnr, to_luma, LumaSwing, DEFAULT_SHAVE, PEAK};
use ndarray::{s, Array1, Array2, Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{loss, LossKind};
use crate::model::{stack, Restorer};
use crate::optim::{Adam, AdamConfig, LrSchedule};
use crate::scalar::Scalar;
use crate::tape::Tape;

/// One training image: network input, optional aligned distance matrix and
/// the high-resolution target (`scale` times larger).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPair {
    pub input: RasterImage,
    pub dist: Option<Array2<f64>>,
    pub target: RasterImage,
}

impl TrainPair {
    fn check(&self, scale: usize, with_dist: bool) -> Result<()> {
        let (h, w) = (self.input.height(), self.input.width());
        if self.input.channels() != 3 || self.target.channels() != 3 {
            return Err(Error::Shape("training images need 3 channels".into()));
        }
        if (self.target.height(), self.target.width()) != (h * scale, w * scale) {
            return Err(Error::Shape(format!(
                "target {}x{} is not {scale}x input {h}x{w}",
                self.target.height(),
                self.target.width()
            )));
        }
        match (&self.dist, with_dist) {
            (Some(d), true) if d.dim() == (h, w) => Ok(()),
            (Some(d), true) => Err(Error::Shape(format!("distance {:?} for {h}x{w} input", d.dim()))),
            (None, true) => Err(Error::MissingDistance),
            (Some(_), false) => Err(Error::UnexpectedDistance),
            (None, false) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    /// Input-side patch size; targets are `scale` times larger.
    pub patch_size: usize,
    pub lr: f64,
    /// Steps at which the learning rate halves.
    pub milestones: Vec<usize>,
    pub adam: AdamConfig,
    pub loss: LossKind,
    pub seed: u64,
    /// Validate every this many steps (and after the last); 0 disables.
    pub validate_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 4,
            patch_size: 32,
            lr: 1e-3,
            milestones: vec![1000, 1500],
            adam: AdamConfig::default(),
            loss: LossKind::default(),
            seed: 0,
            validate_every: 250,
        }
    }
}

impl TrainConfig {
    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            base: self.lr,
            milestones: self.milestones.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Batch<S> {
    pub inputs: Array4<S>,
    pub dists: Option<Array4<S>>,
    pub targets: Array4<S>,
}

impl<S: Scalar> Batch<S> {
    /// Whole images as a batch of one.
    pub fn single(pair: &TrainPair) -> Self {
        Self {
            inputs: stack(&[pair.input.data.view()]),
            dists: pair
                .dist
                .as_ref()
                .map(|d| stack(&[d.view().insert_axis(Axis(0))])),
            targets: stack(&[pair.target.data.view()]),
        }
    }
}

fn views(v: &[RasterImage]) -> Vec<ndarray::ArrayView3<'_, f64>> {
    v.iter().map(|x| x.data.view()).collect()
}

/// Draws `batch_size` random aligned patches.
pub fn sample_batch<S: Scalar>(
    data: &[TrainPair],
    scale: usize,
    patch: usize,
    batch_size: usize,
    rng: &mut ChaCha20Rng,
) -> Result<Batch<S>> {
    let mut inputs = Vec::with_capacity(batch_size);
    let mut dists = Vec::with_capacity(batch_size);
    let mut targets = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let pair = &data[rng.random_range(0..data.len())];
        let (h, w) = (pair.input.height(), pair.input.width());
        if h < patch || w < patch {
            return Err(Error::Shape(format!("{h}x{w} input is smaller than the {patch} px patch")));
        }
        let i = rng.random_range(0..=h - patch);
        let j = rng.random_range(0..=w - patch);
        let inp = pair.input.crop(i, j, patch, patch)?;
        let tgt = pair.target.crop(scale * i, scale * j, scale * patch, scale * patch)?;
        let dst = match &pair.dist {
            Some(d) => Some(RasterImage::from_planes(
                &[d.slice(s![i..i + patch, j..j + patch]).to_owned()],
                pair.input.pitch,
            )?),
            None => None,
        };
        inputs.push(inp);
        dists.push(dst);
        targets.push(tgt);
    }
    let dists: Option<Vec<RasterImage>> = dists.into_iter().collect();
    Ok(Batch {
        inputs: stack(&views(&inputs)),
        dists: dists.map(|d| stack(&views(&d))),
        targets: stack(&views(&targets)),
    })
}

/// Loss and parameter gradients for one batch.
pub fn batch_gradients<S: Scalar>(model: &Restorer<S>, batch: &Batch<S>, kind: LossKind) -> Result<(f64, Vec<Array1<S>>)> {
    let mut tape = Tape::new(&model.params);
    let x = tape.leaf(batch.inputs.clone());
    let d = batch.dists.as_ref().map(|d| tape.leaf(d.clone()));
    let y = model.graph(&mut tape, x, d)?;
    let (value, seed) = loss(kind, &batch.targets, tape.value(y))?;
    let grads = tape.backward(y, seed)?;
    Ok((value.f64(), grads.params))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub val_psnr_y: Option<f64>,
}

pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "step,lr,loss,val_psnr_y")?;
    for p in curve {
        let v = p.val_psnr_y.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", p.step, p.lr, p.loss, v)?;
    }
    Ok(())
}

/// Mean Y-channel PSNR (studio swing, default shave) of clipped network
/// outputs over whole images.
pub fn validation_psnr_y<S: Scalar>(model: &Restorer<S>, data: &[TrainPair]) -> Result<f64> {
    let mut total = 0.0;
    for p in data {
        let out = model.forward(&p.input, p.dist.as_ref())?.map(|v| v.clamp(0.0, 255.0));
        let (a, b) = (to_luma(&out, LumaSwing::Studio)?, to_luma(&p.target, LumaSwing::Studio)?);
        total += psnr(&a, &b, PEAK, DEFAULT_SHAVE)?;
    }
    Ok(total / data.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<S> {
    /// Parameters at the best validation PSNR (the last step if validation
    /// is disabled).
    pub model: Restorer<S>,
    pub best_step: usize,
    pub best_val_psnr_y: Option<f64>,
    pub curve: Vec<CurvePoint>,
}

pub fn train<S: Scalar>(
    mut model: Restorer<S>,
    train_set: &[TrainPair],
    val_set: &[TrainPair],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<S>> {
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.batch_size == 0 || cfg.patch_size == 0 {
        return Err(Error::Config("batch_size and patch_size must be positive".into()));
    }
    let scale = model.config.scale;
    let with_dist = model.config.use_distance_head;
    for p in train_set.iter().chain(val_set) {
        p.check(scale, with_dist)?;
    }
    let schedule = cfg.schedule();
    let mut adam = Adam::new(cfg.adam, &model.params);
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut curve = Vec::with_capacity(cfg.steps);
    let validate = cfg.validate_every > 0 && !val_set.is_empty();
    let mut best: Option<(f64, usize, crate::params::ParamStore<S>)> = None;

    for step in 0..cfg.steps {
        let batch = sample_batch(train_set, scale, cfg.patch_size, cfg.batch_size, &mut rng)?;
        let (value, grads) = batch_gradients(&model, &batch, cfg.loss)?;
        if !value.is_finite() {
            return Err(Error::Divergence { step, loss: value });
        }
        let lr = schedule.lr_at(step);
        adam.step(&mut model.params, &grads, lr);
        let done = step + 1;
        let val = if validate && (done % cfg.validate_every == 0 || done == cfg.steps) {
            let v = validation_psnr_y(&model, val_set)?;
            if best.as_ref().is_none_or(|b| v > b.0) {
                best = Some((v, done, model.params.clone()));
            }
            Some(v)
        } else {
            None
        };
        curve.push(CurvePoint {
            step: done,
            lr,
            loss: value,
            val_psnr_y: val,
        });
    }

    let (best_val, best_step) = match best {
        Some((v, s, params)) => {
            model.params = params;
            (Some(v), s)
        }
        None => (None, cfg.steps),
    };
    Ok(TrainOutcome {
        model,
        best_step,
        best_val_psnr_y: best_val,
        curve,
    })
}
