use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major tensor with finite values.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    dims: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(dims: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if len != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "tensor dims {dims:?} need {len} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{dims:?}")));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: vec![T::zero(); len],
        }
    }

    pub(crate) fn from_raw(dims: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        Self { dims, data }
    }

    pub fn scalar(v: T) -> Self {
        Self::from_raw(vec![1], vec![v])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn reshape(self, dims: Vec<usize>) -> Result<Self> {
        if dims.iter().product::<usize>() != self.data.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot reshape {:?} into {dims:?}",
                self.dims
            )));
        }
        Ok(Self::from_raw(dims, self.data))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(self.dims.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor::from_raw(
            self.dims.clone(),
            self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        )
    }

    pub fn max_abs_diff(&self, other: &Self) -> Option<T> {
        if self.dims != other.dims {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (*a - *b).abs())
                .fold(T::zero(), T::max),
        )
    }
}
