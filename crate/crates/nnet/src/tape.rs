//! Reverse-mode gradient tape over `(batch, channel, row, col)` tensors.
//!
//! Parameters live in a [`ParamStore`] outside the tape; operations refer to
//! them by id, and [`Tape::backward`] returns one gradient per parameter plus
//! the gradients reaching each leaf.

use ndarray::{Array1, Array2, Array4, Axis};

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;

pub type Tensor<S> = Array4<S>;

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op<S> {
    Leaf,
    Conv { x: Var, w: ParamId, b: ParamId, k: usize },
    Relu(Var),
    Add(Var, Var),
    Scale(Var, S),
    AvgPool(Var),
    Sigmoid(Var),
    MulChannel(Var, Var),
    PixelShuffle(Var, usize),
}

pub struct Tape<'p, S> {
    params: &'p ParamStore<S>,
    values: Vec<Tensor<S>>,
    ops: Vec<Op<S>>,
}

pub struct Gradients<S> {
    pub params: Vec<Array1<S>>,
    values: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn param(&self, id: ParamId) -> &Array1<S> {
        &self.params[id.0]
    }

    /// Gradient reaching a leaf; `None` for intermediate values or leaves
    /// nothing flowed into.
    pub fn value(&self, v: Var) -> Option<&Tensor<S>> {
        self.values[v.0].as_ref()
    }
}

fn same_dims<S>(a: &Tensor<S>, b: &Tensor<S>, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("{what}: {:?} vs {:?}", a.dim(), b.dim())));
    }
    Ok(())
}

/// Zero-padded patch matrix: row `(ci*k + ky)*k + kx`, column `(s*h + y)*w + x`.
fn im2col<S: Scalar>(x: &Tensor<S>, k: usize) -> Array2<S> {
    let (n, c, h, w) = x.dim();
    let p = k / 2;
    let hw = h * w;
    let total = n * hw;
    let xs = x.as_slice().expect("standard layout");
    let mut cols = Array2::zeros((c * k * k, total));
    let cs = cols.as_slice_mut().expect("fresh array");
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let r = (ci * k + ky) * k + kx;
                let row = &mut cs[r * total..(r + 1) * total];
                let x0 = p.saturating_sub(kx);
                let x1 = (w + p).saturating_sub(kx).min(w);
                if x0 >= x1 {
                    continue;
                }
                for s in 0..n {
                    let src = &xs[(s * c + ci) * hw..(s * c + ci + 1) * hw];
                    let dst = &mut row[s * hw..(s + 1) * hw];
                    for y in 0..h {
                        let sy = y + ky;
                        if sy < p || sy - p >= h {
                            continue;
                        }
                        let base = (sy - p) * w + kx;
                        dst[y * w + x0..y * w + x1].copy_from_slice(&src[base + x0 - p..base + x1 - p]);
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`].
fn col2im<S: Scalar>(cols: &Array2<S>, dims: (usize, usize, usize, usize), k: usize) -> Tensor<S> {
    let (n, c, h, w) = dims;
    let p = k / 2;
    let hw = h * w;
    let total = n * hw;
    let cs = cols.as_slice().expect("standard layout");
    let mut out = Tensor::zeros(dims);
    let os = out.as_slice_mut().expect("fresh array");
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let r = (ci * k + ky) * k + kx;
                let row = &cs[r * total..(r + 1) * total];
                let x0 = p.saturating_sub(kx);
                let x1 = (w + p).saturating_sub(kx).min(w);
                if x0 >= x1 {
                    continue;
                }
                for s in 0..n {
                    let dst = &mut os[(s * c + ci) * hw..(s * c + ci + 1) * hw];
                    let src = &row[s * hw..(s + 1) * hw];
                    for y in 0..h {
                        let sy = y + ky;
                        if sy < p || sy - p >= h {
                            continue;
                        }
                        let base = (sy - p) * w + kx;
                        for (d, &v) in dst[base + x0 - p..base + x1 - p]
                            .iter_mut()
                            .zip(&src[y * w + x0..y * w + x1])
                        {
                            *d += v;
                        }
                    }
                }
            }
        }
    }
    out
}

/// `(n, c, h, w)` to `(c, n*h*w)`.
fn channels_first<S: Scalar>(t: &Tensor<S>) -> Array2<S> {
    let (n, c, h, w) = t.dim();
    let v = t.view().permuted_axes([1, 0, 2, 3]);
    let v = v.as_standard_layout().into_owned();
    v.into_shape_with_order((c, n * h * w)).expect("contiguous")
}

/// Inverse of [`channels_first`].
fn batch_first<S: Scalar>(m: Array2<S>, n: usize, h: usize, w: usize) -> Tensor<S> {
    let c = m.nrows();
    let t = m.into_shape_with_order((c, n, h, w)).expect("size matches");
    t.permuted_axes([1, 0, 2, 3]).as_standard_layout().into_owned()
}

fn sigmoid<S: Scalar>(v: S) -> S {
    if v >= S::zero() {
        S::one() / (S::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (S::one() + e)
    }
}

impl<'p, S: Scalar> Tape<'p, S> {
    pub fn new(params: &'p ParamStore<S>) -> Self {
        Self {
            params,
            values: Vec::new(),
            ops: Vec::new(),
        }
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> Var {
        self.values.push(value);
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.values[v.0]
    }

    /// Sign of every ReLU input on the tape, in recording order. Two tapes of
    /// the same graph with equal patterns lie on the same linear piece of
    /// every ReLU, which finite-difference checks use to detect kinks.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.ops
            .iter()
            .filter_map(|op| match op {
                Op::Relu(x) => Some(x),
                _ => None,
            })
            .flat_map(|x| self.values[x.0].iter().map(|&v| v > S::zero()))
            .collect()
    }

    pub fn params(&self) -> &ParamStore<S> {
        self.params
    }

    pub fn leaf(&mut self, t: Tensor<S>) -> Var {
        self.push(t.as_standard_layout().into_owned(), Op::Leaf)
    }

    /// Same-size convolution with zero padding `k / 2`. The weight has shape
    /// `(out, in, k, k)`, the bias `(out)`.
    pub fn conv(&mut self, x: Var, w: ParamId, b: ParamId) -> Result<Var> {
        let (wp, bp) = (self.params.get(w), self.params.get(b));
        if wp.shape.len() != 4 || wp.shape[2] != wp.shape[3] || wp.shape[2] % 2 == 0 {
            return Err(Error::Shape(format!("{}: bad conv weight shape {:?}", wp.name, wp.shape)));
        }
        let (cout, cin, k) = (wp.shape[0], wp.shape[1], wp.shape[2]);
        if bp.shape != [cout] {
            return Err(Error::Shape(format!("{}: bias shape {:?}, want [{cout}]", bp.name, bp.shape)));
        }
        let xv = &self.values[x.0];
        let (n, c, h, wd) = xv.dim();
        if c != cin {
            return Err(Error::Shape(format!("{}: input has {c} channels, want {cin}", wp.name)));
        }
        let mut out = wp.matrix().dot(&im2col(xv, k));
        for (mut row, &bv) in out.axis_iter_mut(Axis(0)).zip(bp.data.iter()) {
            row.mapv_inplace(|v| v + bv);
        }
        let value = batch_first(out, n, h, wd);
        Ok(self.push(value, Op::Conv { x, w, b, k }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.values[x.0].mapv(|a| a.max(S::zero()));
        self.push(v, Op::Relu(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_dims(&self.values[a.0], &self.values[b.0], "add")?;
        let v = &self.values[a.0] + &self.values[b.0];
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn scale(&mut self, x: Var, c: S) -> Var {
        let v = self.values[x.0].mapv(|a| a * c);
        self.push(v, Op::Scale(x, c))
    }

    /// Global average pool to `(n, c, 1, 1)`.
    pub fn avg_pool(&mut self, x: Var) -> Var {
        let xv = &self.values[x.0];
        let (n, c, h, w) = xv.dim();
        let inv = S::one() / S::of((h * w) as f64);
        let v = Tensor::from_shape_fn((n, c, 1, 1), |(s, ch, _, _)| {
            xv.index_axis(Axis(0), s).index_axis(Axis(0), ch).sum() * inv
        });
        self.push(v, Op::AvgPool(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.values[x.0].mapv(sigmoid);
        self.push(v, Op::Sigmoid(x))
    }

    /// Multiplies each channel of `x` by `gate[n, c, 0, 0]`.
    pub fn mul_channel(&mut self, x: Var, gate: Var) -> Result<Var> {
        let (xv, gv) = (&self.values[x.0], &self.values[gate.0]);
        let (n, c, _, _) = xv.dim();
        if gv.dim() != (n, c, 1, 1) {
            return Err(Error::Shape(format!("gate {:?} for input {:?}", gv.dim(), xv.dim())));
        }
        let mut v = xv.clone();
        for ((s, ch), g) in (0..n).flat_map(|s| (0..c).map(move |ch| (s, ch))).zip(gv.iter()) {
            v.index_axis_mut(Axis(0), s).index_axis_mut(Axis(0), ch).mapv_inplace(|a| a * *g);
        }
        Ok(self.push(v, Op::MulChannel(x, gate)))
    }

    /// `(n, c*r*r, h, w)` to `(n, c, h*r, w*r)`; output `(y*r + i, x*r + j)` of
    /// channel `c` reads input channel `c*r*r + i*r + j`.
    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let xv = &self.values[x.0];
        let (n, cr, h, w) = xv.dim();
        if r == 0 || cr % (r * r) != 0 {
            return Err(Error::Shape(format!("pixel shuffle by {r} needs channels divisible by {}, got {cr}", r * r)));
        }
        let c = cr / (r * r);
        let v = Tensor::from_shape_fn((n, c, h * r, w * r), |(s, ch, y, xx)| {
            xv[[s, ch * r * r + (y % r) * r + xx % r, y / r, xx / r]]
        });
        Ok(self.push(v, Op::PixelShuffle(x, r)))
    }

    /// Propagates `seed` (the gradient of the objective with respect to
    /// `out`) back through the tape.
    pub fn backward(&self, out: Var, seed: Tensor<S>) -> Result<Gradients<S>> {
        same_dims(&self.values[out.0], &seed, "backward seed")?;
        let mut grads: Vec<Option<Tensor<S>>> = vec![None; self.values.len()];
        let mut pgrads = self.params.zeros_like();
        grads[out.0] = Some(seed);

        fn accumulate<S: Scalar>(slot: &mut Option<Tensor<S>>, g: Tensor<S>) {
            match slot {
                Some(t) => *t += &g,
                None => *slot = Some(g),
            }
        }

        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.ops[i] {
                Op::Leaf => grads[i] = Some(g),
                Op::Conv { x, w, b, k } => {
                    let xv = &self.values[x.0];
                    let (n, _, h, wd) = xv.dim();
                    let g2 = channels_first(&g);
                    let cols = im2col(xv, *k);
                    let dw = g2.dot(&cols.t());
                    pgrads[w.0] += &Array1::from_iter(dw.iter().copied());
                    pgrads[b.0] += &g2.sum_axis(Axis(1));
                    let dcols = self.params.get(*w).matrix().t().dot(&g2);
                    let dx = col2im(&dcols, xv.dim(), *k);
                    debug_assert_eq!(dx.dim().0, n);
                    debug_assert_eq!((dx.dim().2, dx.dim().3), (h, wd));
                    accumulate(&mut grads[x.0], dx);
                }
                Op::Relu(x) => {
                    let mut dx = g;
                    dx.zip_mut_with(&self.values[x.0], |d, &a| {
                        if a <= S::zero() {
                            *d = S::zero();
                        }
                    });
                    accumulate(&mut grads[x.0], dx);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g);
                }
                Op::Scale(x, c) => {
                    let c = *c;
                    accumulate(&mut grads[x.0], g.mapv(|v| v * c));
                }
                Op::AvgPool(x) => {
                    let xv = &self.values[x.0];
                    let (_, _, h, w) = xv.dim();
                    let inv = S::one() / S::of((h * w) as f64);
                    let dx = Tensor::from_shape_fn(xv.dim(), |(s, ch, _, _)| g[[s, ch, 0, 0]] * inv);
                    accumulate(&mut grads[x.0], dx);
                }
                Op::Sigmoid(x) => {
                    let mut dx = g;
                    dx.zip_mut_with(&self.values[i], |d, &y| *d *= y * (S::one() - y));
                    accumulate(&mut grads[x.0], dx);
                }
                Op::MulChannel(x, gate) => {
                    let (xv, gv) = (&self.values[x.0], &self.values[gate.0]);
                    let (n, c, _, _) = xv.dim();
                    let mut dx = g.clone();
                    let mut dg = Tensor::zeros((n, c, 1, 1));
                    for s in 0..n {
                        for ch in 0..c {
                            let gate_v = gv[[s, ch, 0, 0]];
                            let gs = g.index_axis(Axis(0), s);
                            let gs = gs.index_axis(Axis(0), ch);
                            let xs = xv.index_axis(Axis(0), s);
                            let xs = xs.index_axis(Axis(0), ch);
                            dg[[s, ch, 0, 0]] = gs.iter().zip(xs.iter()).map(|(&a, &b)| a * b).sum();
                            dx.index_axis_mut(Axis(0), s)
                                .index_axis_mut(Axis(0), ch)
                                .mapv_inplace(|v| v * gate_v);
                        }
                    }
                    accumulate(&mut grads[x.0], dx);
                    accumulate(&mut grads[gate.0], dg);
                }
                Op::PixelShuffle(x, r) => {
                    let r = *r;
                    let (n, cr, h, w) = self.values[x.0].dim();
                    let dx = Tensor::from_shape_fn((n, cr, h, w), |(s, ci, y, xx)| {
                        let (c, rem) = (ci / (r * r), ci % (r * r));
                        g[[s, c, y * r + rem / r, xx * r + rem % r]]
                    });
                    accumulate(&mut grads[x.0], dx);
                }
            }
        }

        for (p, g) in self.params.params.iter().zip(&pgrads) {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { layer: p.name.clone() });
            }
        }
        Ok(Gradients {
            params: pgrads,
            values: grads,
        })
    }
}
