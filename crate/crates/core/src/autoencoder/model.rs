use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Identity => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Fully connected layer computing `act(W x + b)`; `weights` is `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        DenseLayer {
            weights: DenseMatrix::zeros(output, input),
            bias: vec![0.0; output],
            activation,
        }
    }

    /// Xavier-uniform weights, zero bias.
    pub fn xavier(input: usize, output: usize, activation: Activation, rng: &mut Rng) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        DenseLayer {
            weights: DenseMatrix::from_fn(output, input, |_, _| rng.uniform(-limit, limit)),
            bias: vec![0.0; output],
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .row_iter()
            .zip(&self.bias)
            .map(|(w, b)| self.activation.apply(crate::numerics::dot(w, input) + b))
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }
}

/// Widths of the two outer hidden layers between input `d` and code `k`:
/// `h1 = round(d^(2/3) k^(1/3))`, `h2 = round(d^(1/3) k^(2/3))`, each at least 4.
pub fn hidden_widths(d: usize, k: usize) -> (usize, usize) {
    let (d, k) = (d as f64, k as f64);
    let h1 = (d.powf(2.0 / 3.0) * k.powf(1.0 / 3.0)).round() as usize;
    let h2 = (d.powf(1.0 / 3.0) * k.powf(2.0 / 3.0)).round() as usize;
    (h1.max(4), h2.max(4))
}

/// Stack of dense layers with a designated code layer.
///
/// `z` is the output of layer `latent_layer`; `x̂` is the output of the last
/// layer. [`AutoencoderModel::new`] builds the standard symmetric network
/// `[d, h1, h2, k, h2, h1, d]` (five hidden layers, tanh hidden units, linear
/// output).
#[derive(Clone, Debug, PartialEq)]
pub struct AutoencoderModel {
    layers: Vec<DenseLayer>,
    latent_layer: usize,
}

/// Activations of every layer for one input, `trace[0]` being the input.
pub(crate) type ForwardTrace = Vec<Vec<f64>>;

impl AutoencoderModel {
    pub fn new(input_dim: usize, latent_dim: usize, rng: &mut Rng) -> Result<Self> {
        if input_dim == 0 || latent_dim == 0 {
            return Err(Error::parameter("autoencoder input and latent dimensions must be >= 1"));
        }
        let (h1, h2) = hidden_widths(input_dim, latent_dim);
        let dims = [input_dim, h1, h2, latent_dim, h2, h1, input_dim];
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { Activation::Identity } else { Activation::Tanh };
                DenseLayer::xavier(w[0], w[1], act, rng)
            })
            .collect();
        Ok(AutoencoderModel { layers, latent_layer: 2 })
    }

    /// General constructor; layers must chain and the output must match the input width.
    pub fn from_layers(layers: Vec<DenseLayer>, latent_layer: usize) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::parameter("autoencoder needs at least one layer"))?;
        if latent_layer >= layers.len() {
            return Err(Error::parameter(format!(
                "latent layer {latent_layer} out of range for {} layers",
                layers.len()
            )));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].output_dim() != w[1].input_dim() {
                return Err(Error::dimension("autoencoder layer chain", w[0].output_dim(), format!("{} at layer {}", w[1].input_dim(), i + 1)));
            }
        }
        for layer in &layers {
            if layer.bias.len() != layer.output_dim() {
                return Err(Error::dimension("layer bias", layer.output_dim(), layer.bias.len()));
            }
        }
        let input = first.input_dim();
        let output = layers.last().unwrap().output_dim();
        if input != output {
            return Err(Error::dimension("autoencoder output width", input, output));
        }
        Ok(AutoencoderModel { layers, latent_layer })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn latent_layer(&self) -> usize {
        self.latent_layer
    }

    /// Widths from input to output, e.g. `[d, h1, h2, k, h2, h1, d]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].input_dim()];
        dims.extend(self.layers.iter().map(DenseLayer::output_dim));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[self.latent_layer].output_dim()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(DenseLayer::num_parameters).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::dimension("autoencoder input", self.input_dim(), x.len()));
        }
        Ok(())
    }

    pub(crate) fn trace(&self, x: &[f64]) -> ForwardTrace {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for layer in &self.layers {
            let next = layer.forward(acts.last().unwrap());
            acts.push(next);
        }
        acts
    }

    /// Returns `(z, x̂)`.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(x)?;
        let mut acts = self.trace(x);
        let x_hat = acts.pop().unwrap();
        let z = if self.latent_layer + 1 == self.layers.len() {
            x_hat.clone()
        } else {
            acts.swap_remove(self.latent_layer + 1)
        };
        Ok((z, x_hat))
    }

    /// Code vector only; stops after the latent layer.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for layer in &self.layers[..=self.latent_layer] {
            a = layer.forward(&a);
        }
        Ok(a)
    }

    /// Codes for every row of `x` (`rows × k`).
    pub fn encode_batch(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(x.rows(), self.latent_dim());
        for (r, row) in x.row_iter().enumerate() {
            out.row_mut(r).copy_from_slice(&self.encode(row)?);
        }
        Ok(out)
    }

    /// Reconstructions for every row of `x`.
    pub fn reconstruct_batch(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(x.rows(), x.cols());
        for (r, row) in x.row_iter().enumerate() {
            out.row_mut(r).copy_from_slice(&self.forward(row)?.1);
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}
