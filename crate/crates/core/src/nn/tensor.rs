use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Dense row-major array of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape {
                context: "tensor construction",
                expected: vec![expected],
                actual: vec![data.len()],
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Entries drawn from `U(-limit, limit)`.
    pub fn uniform(shape: &[usize], limit: f64, rng: &mut Rng) -> Self {
        let mut t = Self::zeros(shape);
        for x in &mut t.data {
            *x = (2.0 * rng::unit(rng) - 1.0) * limit;
        }
        t
    }

    pub fn normal(shape: &[usize], std: f64, rng: &mut Rng) -> Self {
        let dist = Normal::new(0.0, std).expect("positive std");
        let mut t = Self::zeros(shape);
        for x in &mut t.data {
            *x = dist.sample(rng);
        }
        t
    }

    /// Glorot/Xavier uniform: limit `sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Self::uniform(shape, limit, rng)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::Shape {
                context: "reshape",
                expected: shape.to_vec(),
                actual: self.shape,
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Row `i` of the tensor viewed as `(shape[0], rest)`.
    pub fn row(&self, i: usize) -> &[f64] {
        let width = self.data.len() / self.shape[0];
        &self.data[i * width..(i + 1) * width]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let width = self.data.len() / self.shape[0];
        &mut self.data[i * width..(i + 1) * width]
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape)
    }

    pub fn expect_shape(&self, context: &'static str, expected: &[usize]) -> Result<()> {
        if self.shape == expected {
            Ok(())
        } else {
            Err(Error::Shape {
                context,
                expected: expected.to_vec(),
                actual: self.shape.clone(),
            })
        }
    }

    /// NaN/Inf tripwire.
    pub fn check_finite(&self, layer: &str) -> Result<()> {
        if self.data.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(layer.to_string()))
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }
}
