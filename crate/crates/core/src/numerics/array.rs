use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Row-major `f64` tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseArray {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NumericsError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NumericsError::ShapeMismatch(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(DenseArray { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        DenseArray { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        DenseArray { shape: vec![data.len()], data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        Self::new(vec![rows, cols], data)
    }

    pub fn scalar(value: f64) -> Self {
        DenseArray { shape: vec![1], data: vec![value] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[1..].iter().product()
        } else {
            1
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Matrix times vector for a 2-D array.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, NumericsError> {
        if self.shape.len() != 2 || self.shape[1] != x.len() {
            return Err(NumericsError::ShapeMismatch(format!(
                "cannot multiply {:?} by a vector of length {}",
                self.shape,
                x.len()
            )));
        }
        Ok((0..self.shape[0]).map(|r| dot(self.row(r), x)).collect())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `log softmax(logits)[i]` for every i.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// `-ln p[target]`. Targets with zero mass are an error rather than an
/// infinite loss.
pub fn cross_entropy(distribution: &DenseArray, target: usize) -> Result<f64, NumericsError> {
    let p = *distribution
        .data()
        .get(target)
        .ok_or_else(|| NumericsError::ShapeMismatch(format!("target {target} out of range")))?;
    if p <= 0.0 {
        return Err(NumericsError::ZeroProbabilityTarget(target));
    }
    Ok(-p.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0, -3.0, 2.5, 0.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn cross_entropy_cases() {
        let certain = DenseArray::vector(vec![0.0, 1.0, 0.0]);
        assert_eq!(cross_entropy(&certain, 1).unwrap(), 0.0);
        let uniform = DenseArray::vector(vec![0.25; 4]);
        assert!((cross_entropy(&uniform, 2).unwrap() - 4f64.ln()).abs() < 1e-15);
        let skewed = DenseArray::vector(vec![0.5, 0.25, 0.125, 0.125]);
        assert!((cross_entropy(&skewed, 1).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!(matches!(cross_entropy(&certain, 0), Err(NumericsError::ZeroProbabilityTarget(0))));
    }

    #[test]
    fn shape_is_checked() {
        assert!(DenseArray::new(vec![2, 3], vec![0.0; 5]).is_err());
        let m = DenseArray::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.matvec(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
        assert!(m.matvec(&[1.0]).is_err());
    }
}
