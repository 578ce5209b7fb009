//! Dense tanh network stored as one flat parameter vector.
//!
//! Layer `l` occupies `params[offset_l..]` as a row-major `(out, in)` weight
//! matrix followed by `out` biases. Batched inputs are row-major `(batch, in)`.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};

use crate::error::{Error, Result};
use crate::numerics::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Tanh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
    output: OutputActivation,
}

/// Per-layer activations kept from a batched forward pass for backprop.
/// `activations[0]` is the input, the last entry is the network output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache holds at least the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

/// `tanh` through one `exp`; within an ulp of `f64::tanh` and cheaper.
#[inline]
fn tanh(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    ((1.0 - e) / (1.0 + e)).copysign(x)
}

fn param_count_for(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl Mlp {
    /// Network with all parameters zero.
    pub fn zeros(layer_sizes: &[usize], output: OutputActivation) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "layer sizes must have at least two positive entries, got {layer_sizes:?}"
            )));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params: vec![0.0; param_count_for(layer_sizes)],
            output,
        })
    }

    /// Weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn new(layer_sizes: &[usize], output: OutputActivation, rng: &mut SeededRng) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, output)?;
        let mut off = 0;
        for w in layer_sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let bound = 1.0 / (n_in as f64).sqrt();
            for p in &mut net.params[off..off + (n_in + 1) * n_out] {
                *p = rng.uniform_range(-bound, bound);
            }
            off += (n_in + 1) * n_out;
        }
        Ok(net)
    }

    pub fn from_params(layer_sizes: &[usize], output: OutputActivation, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, output)?;
        if params.len() != net.params.len() {
            return Err(Error::Config(format!(
                "expected {} parameters for {layer_sizes:?}, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    fn layer_offset(&self, layer: usize) -> usize {
        param_count_for(&self.layer_sizes[..=layer])
    }

    fn weights(&self, layer: usize) -> (ArrayView2<'_, f64>, &[f64]) {
        let (n_in, n_out) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
        let off = self.layer_offset(layer);
        let w = ArrayView2::from_shape((n_out, n_in), &self.params[off..off + n_in * n_out])
            .expect("layout matches layer sizes");
        (w, &self.params[off + n_in * n_out..off + (n_in + 1) * n_out])
    }

    fn is_tanh_layer(&self, layer: usize) -> bool {
        layer + 1 < self.n_layers() || self.output == OutputActivation::Tanh
    }

    /// Batched forward pass keeping every activation.
    pub fn forward_batch(&self, input: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Config(format!(
                "input has {} columns, network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        let mut activations = Vec::with_capacity(self.layer_sizes.len());
        activations.push(input.to_owned());
        for layer in 0..self.n_layers() {
            let (w, b) = self.weights(layer);
            let prev = activations.last().unwrap();
            let mut z = Array2::<f64>::zeros((prev.nrows(), w.nrows()));
            general_mat_mul(1.0, prev, &w.t(), 0.0, &mut z);
            let squash = self.is_tanh_layer(layer);
            for mut row in z.rows_mut() {
                for (v, &bias) in row.iter_mut().zip(b) {
                    *v += bias;
                    if squash {
                        *v = tanh(*v);
                    }
                }
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical {
                    layer,
                    what: "forward activation".into(),
                });
            }
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, input.len()), input).expect("1-row view");
        let cache = self.forward_batch(view)?;
        Ok(cache.output().iter().copied().collect())
    }

    /// Backpropagates `upstream` (d loss / d output, shape `(batch, out)`).
    ///
    /// Parameter gradients are summed over the batch; the input gradient is
    /// returned per row.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<'_, f64>,
    ) -> Result<(Vec<f64>, Array2<f64>)> {
        self.backprop(cache, upstream, true)
    }

    /// Gradient with respect to the input only; parameter gradients are skipped.
    pub fn backward_input(&self, cache: &ForwardCache, upstream: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.backprop(cache, upstream, false).map(|(_, dx)| dx)
    }

    fn backprop(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<'_, f64>,
        want_params: bool,
    ) -> Result<(Vec<f64>, Array2<f64>)> {
        let out = cache.output();
        if upstream.dim() != out.dim() || cache.activations.len() != self.layer_sizes.len() {
            return Err(Error::Config(format!(
                "upstream gradient shape {:?} does not match output {:?}",
                upstream.dim(),
                out.dim()
            )));
        }
        let mut grads = vec![0.0; if want_params { self.params.len() } else { 0 }];
        let mut delta = upstream.to_owned();
        for layer in (0..self.n_layers()).rev() {
            let y = &cache.activations[layer + 1];
            if self.is_tanh_layer(layer) {
                delta.zip_mut_with(y, |d, &a| *d *= 1.0 - a * a);
            }
            let a_prev = &cache.activations[layer];
            let (n_in, n_out) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
            let off = self.layer_offset(layer);
            if want_params {
                let (gw, gb) = grads[off..off + (n_in + 1) * n_out].split_at_mut(n_in * n_out);
                let mut gw = ArrayViewMut2::from_shape((n_out, n_in), gw).expect("layout");
                general_mat_mul(1.0, &delta.t(), a_prev, 0.0, &mut gw);
                for (g, s) in gb.iter_mut().zip(delta.sum_axis(Axis(0))) {
                    *g = s;
                }
            }
            let (w, _) = self.weights(layer);
            let mut prev_delta = Array2::<f64>::zeros((delta.nrows(), n_in));
            general_mat_mul(1.0, &delta, &w, 0.0, &mut prev_delta);
            let bad_params = want_params && grads[off..off + (n_in + 1) * n_out].iter().any(|v| !v.is_finite());
            if bad_params || prev_delta.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical {
                    layer,
                    what: "backward gradient".into(),
                });
            }
            delta = prev_delta;
        }
        Ok((grads, delta))
    }

    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<Gradients> {
        if upstream.len() != self.output_dim() {
            return Err(Error::Config(format!(
                "upstream gradient has {} entries, network outputs {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let view = ArrayView2::from_shape((1, input.len()), input).expect("1-row view");
        let cache = self.forward_batch(view)?;
        let up = ArrayView2::from_shape((1, upstream.len()), upstream).expect("1-row view");
        let (params, input_grad) = self.backward_batch(&cache, up)?;
        Ok(Gradients {
            params,
            input: input_grad.iter().copied().collect(),
        })
    }
}

/// `target <- tau * target + (1 - tau) * main`, elementwise.
pub fn polyak_update(target: &mut [f64], main: &[f64], tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Config(format!("polyak coefficient {tau} outside [0, 1]")));
    }
    if target.len() != main.len() {
        return Err(Error::Config(format!(
            "polyak length mismatch: {} vs {}",
            target.len(),
            main.len()
        )));
    }
    for (t, &m) in target.iter_mut().zip(main) {
        let (lo, hi) = if *t <= m { (*t, m) } else { (m, *t) };
        *t = (tau * *t + (1.0 - tau) * m).clamp(lo, hi);
    }
    Ok(())
}
