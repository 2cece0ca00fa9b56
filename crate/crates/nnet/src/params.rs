//! Named parameter tensors stored flat, in registration order.

use ndarray::{Array1, ArrayView2};
use rand::Rng;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param<S> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Array1<S>,
}

impl<S: Scalar> Param<S> {
    /// Views the tensor as `(shape[0], rest)`.
    pub fn matrix(&self) -> ArrayView2<'_, S> {
        let rows = self.shape[0];
        let cols = self.data.len() / rows.max(1);
        ArrayView2::from_shape((rows, cols), self.data.as_slice().expect("contiguous"))
            .expect("param size matches shape")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore<S> {
    pub params: Vec<Param<S>>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        let n: usize = shape.iter().product();
        self.params.push(Param {
            name: name.into(),
            shape: shape.to_vec(),
            data: Array1::zeros(n),
        });
        ParamId(self.params.len() - 1)
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn uniform<R: Rng>(&mut self, name: impl Into<String>, shape: &[usize], fan_in: usize, rng: &mut R) -> ParamId {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let id = self.zeros(name, shape);
        for v in self.params[id.0].data.iter_mut() {
            *v = S::of(rng.random_range(-bound..=bound));
        }
        id
    }

    pub fn get(&self, id: ParamId) -> &Param<S> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<S> {
        &mut self.params[id.0]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    pub fn zeros_like(&self) -> Vec<Array1<S>> {
        self.params.iter().map(|p| Array1::zeros(p.data.len())).collect()
    }

    pub fn cast<T: Scalar>(&self) -> ParamStore<T> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    data: p.data.mapv(|v| T::of(v.f64())),
                })
                .collect(),
        }
    }
}
