//! RCAN-lite: shallow head, optional distance head, residual-in-residual body
//! with channel attention, pixel-shuffle upsampler and output convolution.

use hexsr_core::image::RasterImage;
use ndarray::{Array2, Array4, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};

pub const BODY_KERNEL: usize = 3;
pub const DIST_KERNEL: usize = 7;
/// Images enter the network divided by this and leave multiplied by it.
pub const INTENSITY_SCALE: f64 = 255.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestorerConfig {
    pub groups: usize,
    pub blocks_per_group: usize,
    pub feature_channels: usize,
    pub attention_reduction: usize,
    pub scale: usize,
    pub use_distance_head: bool,
}

impl Default for RestorerConfig {
    fn default() -> Self {
        Self {
            groups: 2,
            blocks_per_group: 2,
            feature_channels: 16,
            attention_reduction: 4,
            scale: 2,
            use_distance_head: true,
        }
    }
}

impl RestorerConfig {
    pub fn validate(&self) -> Result<()> {
        let c = self.feature_channels;
        let r = self.attention_reduction;
        if c == 0 || r == 0 || !c.is_multiple_of(r) {
            return Err(Error::Config(format!(
                "feature_channels ({c}) must be a positive multiple of attention_reduction ({r})"
            )));
        }
        if self.scale != 2 && self.scale != 4 {
            return Err(Error::Config(format!("scale must be 2 or 4, got {}", self.scale)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConvLayer {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Debug, Clone, Copy)]
pub struct Attention {
    pub down: ConvLayer,
    pub up: ConvLayer,
}

#[derive(Debug, Clone, Copy)]
pub struct Rcab {
    pub conv1: ConvLayer,
    pub conv2: ConvLayer,
    pub attention: Attention,
}

#[derive(Debug, Clone)]
pub struct Group {
    pub blocks: Vec<Rcab>,
    pub tail: ConvLayer,
}

/// Parameter ids per layer. The registration order here is the checkpoint
/// order: head, dist.0..2, body groups (blocks then tail), lsc, up stages, out.
#[derive(Debug, Clone)]
pub struct Layout {
    pub head: ConvLayer,
    pub dist: Option<[ConvLayer; 3]>,
    pub groups: Vec<Group>,
    pub lsc: ConvLayer,
    pub up: Vec<ConvLayer>,
    pub out: ConvLayer,
}

impl Layout {
    /// Registers every parameter in `store`, drawing weights from `init`
    /// (uniform fan-in scaled) or leaving zeros.
    fn build<S: Scalar>(cfg: &RestorerConfig, store: &mut ParamStore<S>, mut rng: Option<&mut ChaCha20Rng>) -> Self {
        let mut conv = |store: &mut ParamStore<S>, name: &str, cin: usize, cout: usize, k: usize| {
            let shape = [cout, cin, k, k];
            let w = match rng.as_deref_mut() {
                Some(r) => store.uniform(format!("{name}.w"), &shape, cin * k * k, r),
                None => store.zeros(format!("{name}.w"), &shape),
            };
            let b = store.zeros(format!("{name}.b"), &[cout]);
            ConvLayer { w, b }
        };
        let c = cfg.feature_channels;
        let k = BODY_KERNEL;
        let head = conv(store, "head", 3, c, k);
        let dist = cfg.use_distance_head.then(|| {
            [
                conv(store, "dist.0", 1, c, DIST_KERNEL),
                conv(store, "dist.1", c, c, DIST_KERNEL),
                conv(store, "dist.2", c, c, DIST_KERNEL),
            ]
        });
        let groups = (0..cfg.groups)
            .map(|g| Group {
                blocks: (0..cfg.blocks_per_group)
                    .map(|b| {
                        let p = format!("body.{g}.{b}");
                        Rcab {
                            conv1: conv(store, &format!("{p}.conv1"), c, c, k),
                            conv2: conv(store, &format!("{p}.conv2"), c, c, k),
                            attention: Attention {
                                down: conv(store, &format!("{p}.ca.down"), c, c / cfg.attention_reduction, 1),
                                up: conv(store, &format!("{p}.ca.up"), c / cfg.attention_reduction, c, 1),
                            },
                        }
                    })
                    .collect(),
                tail: conv(store, &format!("body.{g}.tail"), c, c, k),
            })
            .collect();
        let lsc = conv(store, "lsc", c, c, k);
        let stages = if cfg.scale == 4 { 2 } else { 1 };
        let up = (0..stages).map(|i| conv(store, &format!("up.{i}"), c, 4 * c, k)).collect();
        let out = conv(store, "out", c, 3, k);
        Layout {
            head,
            dist,
            groups,
            lsc,
            up,
            out,
        }
    }

    /// Every body-layer convolution (RCABs, attention, group tails, lsc).
    pub fn body_layers(&self) -> Vec<ConvLayer> {
        let mut v = Vec::new();
        for g in &self.groups {
            for b in &g.blocks {
                v.extend([b.conv1, b.conv2, b.attention.down, b.attention.up]);
            }
            v.push(g.tail);
        }
        v.push(self.lsc);
        v
    }
}

#[derive(Debug, Clone)]
pub struct Restorer<S> {
    pub config: RestorerConfig,
    pub params: ParamStore<S>,
    pub layout: Layout,
}

impl<S: Scalar> Restorer<S> {
    pub fn new(config: RestorerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let layout = Layout::build(&config, &mut params, Some(&mut rng));
        Ok(Self { config, params, layout })
    }

    /// Wraps existing parameters, checking names and shapes against `config`.
    pub fn from_params(config: RestorerConfig, params: ParamStore<S>) -> Result<Self> {
        config.validate()?;
        let mut expect = ParamStore::<S>::new();
        let layout = Layout::build(&config, &mut expect, None);
        if expect.len() != params.len() {
            return Err(Error::Shape(format!("expected {} tensors, got {}", expect.len(), params.len())));
        }
        for (e, p) in expect.params.iter().zip(&params.params) {
            if e.name != p.name || e.shape != p.shape || p.data.len() != e.data.len() {
                return Err(Error::Shape(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    p.name, p.shape, e.name, e.shape
                )));
            }
        }
        Ok(Self { config, params, layout })
    }

    fn conv(&self, tape: &mut Tape<'_, S>, l: ConvLayer, x: Var) -> Result<Var> {
        tape.conv(x, l.w, l.b)
    }

    /// Pool, squeeze, ReLU, expand, sigmoid, gate.
    pub fn channel_attention(&self, tape: &mut Tape<'_, S>, a: Attention, x: Var) -> Result<Var> {
        let p = tape.avg_pool(x);
        let d = self.conv(tape, a.down, p)?;
        let d = tape.relu(d);
        let u = self.conv(tape, a.up, d)?;
        let gate = tape.sigmoid(u);
        tape.mul_channel(x, gate)
    }

    fn rcab(&self, tape: &mut Tape<'_, S>, b: &Rcab, x: Var) -> Result<Var> {
        let y = self.conv(tape, b.conv1, x)?;
        let y = tape.relu(y);
        let y = self.conv(tape, b.conv2, y)?;
        let y = self.channel_attention(tape, b.attention, y)?;
        tape.add(x, y)
    }

    /// `H_dist(D)`: three padded 7x7 convolutions with ReLU between them.
    pub fn distance_features(&self, tape: &mut Tape<'_, S>, d: Var) -> Result<Var> {
        let [l0, l1, l2] = self.layout.dist.ok_or(Error::UnexpectedDistance)?;
        let h = self.conv(tape, l0, d)?;
        let h = tape.relu(h);
        let h = self.conv(tape, l1, h)?;
        let h = tape.relu(h);
        self.conv(tape, l2, h)
    }

    /// Shallow feature `F0 = H_input(x / 255) (+ dist_features)`.
    pub fn shallow_features(&self, tape: &mut Tape<'_, S>, x: Var, dist_features: Option<Var>) -> Result<Var> {
        let xn = tape.scale(x, S::one() / S::of(INTENSITY_SCALE));
        let f0 = self.conv(tape, self.layout.head, xn)?;
        match dist_features {
            Some(h) => tape.add(f0, h),
            None => Ok(f0),
        }
    }

    /// Residual groups plus long skip: `F_DF = F0 + Conv_LSC(body(F0))`.
    pub fn deep_features(&self, tape: &mut Tape<'_, S>, f0: Var) -> Result<Var> {
        let mut b = f0;
        for g in &self.layout.groups {
            let gin = b;
            for blk in &g.blocks {
                b = self.rcab(tape, blk, b)?;
            }
            let t = self.conv(tape, g.tail, b)?;
            b = tape.add(gin, t)?;
        }
        let l = self.conv(tape, self.layout.lsc, b)?;
        tape.add(f0, l)
    }

    /// Upsampler and output convolution, rescaled to intensities.
    pub fn reconstruct(&self, tape: &mut Tape<'_, S>, f: Var) -> Result<Var> {
        let mut f = f;
        for &stage in &self.layout.up {
            let u = self.conv(tape, stage, f)?;
            f = tape.pixel_shuffle(u, 2)?;
        }
        let y = self.conv(tape, self.layout.out, f)?;
        Ok(tape.scale(y, S::of(INTENSITY_SCALE)))
    }

    /// Records the full network on `tape`. `x` is `(n, 3, h, w)` in 0-255,
    /// `d` is `(n, 1, h, w)` in micrometres.
    pub fn graph(&self, tape: &mut Tape<'_, S>, x: Var, d: Option<Var>) -> Result<Var> {
        let xv = tape.value(x).dim();
        if xv.1 != 3 {
            return Err(Error::Shape(format!("input needs 3 channels, got {}", xv.1)));
        }
        let h = match (self.config.use_distance_head, d) {
            (true, None) => return Err(Error::MissingDistance),
            (false, Some(_)) => return Err(Error::UnexpectedDistance),
            (true, Some(d)) => {
                let dv = tape.value(d).dim();
                if dv != (xv.0, 1, xv.2, xv.3) {
                    return Err(Error::Shape(format!("distance {dv:?} for input {xv:?}")));
                }
                Some(self.distance_features(tape, d)?)
            }
            (false, None) => None,
        };
        let f0 = self.shallow_features(tape, x, h)?;
        let f = self.deep_features(tape, f0)?;
        self.reconstruct(tape, f)
    }

    /// Runs one image. The output pitch is the input pitch divided by the scale.
    pub fn forward(&self, input: &RasterImage, dist: Option<&Array2<f64>>) -> Result<RasterImage> {
        let (h, w) = (input.height(), input.width());
        if let Some(d) = dist {
            if d.dim() != (h, w) {
                return Err(Error::Shape(format!("distance {:?} for {h}x{w} input", d.dim())));
            }
        }
        let mut tape = Tape::new(&self.params);
        let x = tape.leaf(input.data.mapv(S::of).insert_axis(Axis(0)));
        let d = dist.map(|d| tape.leaf(d.mapv(S::of).insert_axis(Axis(0)).insert_axis(Axis(0))));
        let y = self.graph(&mut tape, x, d)?;
        let out = tape.value(y).index_axis(Axis(0), 0).mapv(|v| v.f64());
        Ok(RasterImage::new(out, input.pitch / self.config.scale as f64)?)
    }

    /// Zeroes every body-layer weight and bias.
    pub fn zero_body(&mut self) {
        for l in self.layout.body_layers() {
            self.params.get_mut(l.w).data.fill(S::zero());
            self.params.get_mut(l.b).data.fill(S::zero());
        }
    }

    pub fn cast<T: Scalar>(&self) -> Restorer<T> {
        Restorer {
            config: self.config.clone(),
            params: self.params.cast(),
            layout: self.layout.clone(),
        }
    }
}

/// Stacks images `(c, h, w)` into a batch `(n, c, h, w)`.
pub fn stack<S: Scalar>(items: &[ndarray::ArrayView3<'_, f64>]) -> Array4<S> {
    let (c, h, w) = items[0].dim();
    let mut out = Array4::zeros((items.len(), c, h, w));
    for (mut dst, src) in out.axis_iter_mut(Axis(0)).zip(items) {
        dst.zip_mut_with(src, |d, &s| *d = S::of(s));
    }
    out
}
