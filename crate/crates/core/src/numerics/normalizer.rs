use crate::error::{Error, Result};

/// Per-dimension running mean/std with clipping of the normalized output.
///
/// Uses population statistics. With no data yet, mean is 0 and std is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningNormalizer {
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
    pub count: f64,
    pub eps_std: f64,
    pub clip: f64,
}

impl RunningNormalizer {
    pub fn new(dim: usize) -> Self {
        Self::with_params(dim, 1e-2, 5.0)
    }

    pub fn with_params(dim: usize, eps_std: f64, clip: f64) -> Self {
        Self {
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
            count: 0.0,
            eps_std,
            clip,
        }
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    /// Folds a row-major batch of `dim`-sized rows into the running sums.
    pub fn update(&mut self, batch: &[f64]) -> Result<()> {
        let dim = self.dim();
        if dim == 0 || batch.len() % dim != 0 {
            return Err(Error::Input(format!(
                "normalizer batch of {} values is not a multiple of dim {dim}",
                batch.len()
            )));
        }
        for row in batch.chunks_exact(dim) {
            for ((s, q), &x) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(row) {
                *s += x;
                *q += x * x;
            }
        }
        self.count += (batch.len() / dim) as f64;
        Ok(())
    }

    pub fn mean(&self) -> Vec<f64> {
        if self.count == 0.0 {
            return vec![0.0; self.dim()];
        }
        self.sum.iter().map(|s| s / self.count).collect()
    }

    pub fn std(&self) -> Vec<f64> {
        if self.count == 0.0 {
            return vec![1.0_f64.max(self.eps_std); self.dim()];
        }
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| {
                let mean = s / self.count;
                let var = (q / self.count - mean * mean).max(0.0);
                var.sqrt().max(self.eps_std)
            })
            .collect()
    }

    /// Normalizes one row-major batch into `out`.
    pub fn normalize_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let dim = self.dim();
        if dim == 0 || v.len() % dim != 0 || out.len() != v.len() {
            return Err(Error::Input(format!(
                "cannot normalize {} values with dim {dim} into {}",
                v.len(),
                out.len()
            )));
        }
        let mean = self.mean();
        let std = self.std();
        for (row, orow) in v.chunks_exact(dim).zip(out.chunks_exact_mut(dim)) {
            for i in 0..dim {
                orow[i] = ((row[i] - mean[i]) / std[i]).clamp(-self.clip, self.clip);
            }
        }
        Ok(())
    }

    pub fn normalize(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; v.len()];
        self.normalize_into(v, &mut out)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_normalizer_only_clips() {
        let n = RunningNormalizer::new(3);
        let out = n.normalize(&[0.5, -7.0, 9.0]).unwrap();
        assert_eq!(out, vec![0.5, -5.0, 5.0]);
    }

    #[test]
    fn constant_batches_normalize_to_zero() {
        let mut n = RunningNormalizer::new(1);
        n.update(&[2.5, 2.5, 2.5]).unwrap();
        n.update(&[2.5]).unwrap();
        assert_eq!(n.normalize(&[2.5]).unwrap(), vec![0.0]);
    }

    #[test]
    fn population_std_convention() {
        let mut n = RunningNormalizer::new(1);
        n.update(&[1.0, 3.0]).unwrap();
        let out = n.normalize(&[3.0]).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn std_floor_applies() {
        let mut n = RunningNormalizer::new(1);
        n.update(&[1.0, 1.001]).unwrap();
        assert_eq!(n.std()[0], 1e-2);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let mut n = RunningNormalizer::new(2);
        assert!(n.update(&[1.0, 2.0, 3.0]).is_err());
        assert!(n.normalize(&[1.0]).is_err());
    }
}
