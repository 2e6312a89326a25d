use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Batch, Context, Ideal, NnError};

/// Layer widths of the network that maps onto the photonic cores.
pub const MNIST_DIMS: [usize; 3] = [784, 50, 10];

/// Fully connected layer. Weights are stored input-major:
/// `weights[i * outputs + j]` connects input `i` to neuron `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn weight(&self, input: usize, neuron: usize) -> f64 {
        self.weights[input * self.outputs + neuron]
    }

    /// The weights feeding `neuron` (one weight-bank row).
    pub fn row(&self, neuron: usize) -> Vec<f64> {
        (0..self.inputs).map(|i| self.weight(i, neuron)).collect()
    }

    /// `out[j] = sum_i x[i] * w[i][j]`, accumulated in increasing `i`.
    /// Zero inputs are skipped; adding an exact zero product never changes
    /// the sum, so the result is the same as the dense loop.
    fn mac(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (xi, row) in x.iter().zip(self.weights.chunks_exact(self.outputs)) {
            if *xi == 0.0 {
                continue;
            }
            for (acc, w) in out.iter_mut().zip(row) {
                *acc += xi * w;
            }
        }
    }
}

/// Multilayer perceptron: ReLU on hidden layers, log-softmax on the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Per-layer weight and bias gradients, same layout as [`Dense`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: mlp.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().for_each(|g| g.fill(0.0));
        self.bias.iter_mut().for_each(|g| g.fill(0.0));
    }
}

/// Activations recorded during a forward pass for backpropagation.
#[derive(Debug, Clone, Default)]
struct Tape {
    /// Input to each layer after input perturbation.
    inputs: Vec<Vec<f64>>,
    /// Preactivation of each layer.
    pre: Vec<Vec<f64>>,
    gains: Vec<f64>,
    output: Vec<f64>,
}

pub(crate) fn log_softmax(z: &[f64], out: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
    let log_norm = max + sum.ln();
    for (o, v) in out.iter_mut().zip(z) {
        *o = v - log_norm;
    }
}

impl Mlp {
    /// Random network with weights uniform in +-sqrt(6/(fan_in+fan_out)) and
    /// zero biases.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self, NnError> {
        let mut mlp = Self::zeros(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut mlp.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(mlp)
    }

    pub fn zeros(dims: &[usize]) -> Result<Self, NnError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(NnError::Config(format!("invalid layer dims {dims:?}")));
        }
        Ok(Self {
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::Empty("layer list"));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(NnError::Dimension {
                    expected: pair[0].outputs,
                    actual: pair[1].inputs,
                });
            }
        }
        for l in &layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(NnError::Dimension {
                    expected: l.inputs * l.outputs,
                    actual: l.weights.len(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].inputs];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NnError> {
        if x.len() != self.input_dim() {
            return Err(NnError::Dimension {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn run(&self, x: &[f64], ctx: &mut impl Context, tape: &mut Tape) {
        let n = self.layers.len();
        tape.inputs.resize_with(n, Vec::new);
        tape.pre.resize_with(n, Vec::new);
        tape.gains.resize(n, 1.0);
        tape.inputs[0].clear();
        tape.inputs[0].extend_from_slice(x);
        for (l, layer) in self.layers.iter().enumerate() {
            ctx.perturb_inputs(l, &mut tape.inputs[l]);
            let gain = ctx.mac_gain(l);
            tape.gains[l] = gain;
            let z = &mut tape.pre[l];
            z.resize(layer.outputs, 0.0);
            layer.mac(&tape.inputs[l], z);
            for (zj, b) in z.iter_mut().zip(&layer.bias) {
                *zj = gain * *zj + b;
            }
            ctx.perturb_preactivations(l, z);
            if l + 1 < n {
                let next = &mut tape.inputs[l + 1];
                next.clear();
                next.extend(tape.pre[l].iter().map(|v| v.max(0.0)));
            }
        }
        tape.output.resize(self.output_dim(), 0.0);
        log_softmax(&tape.pre[n - 1], &mut tape.output);
    }

    /// Per-class log-probabilities of `x` under `ctx`.
    pub fn forward(&self, x: &[f64], ctx: &mut impl Context) -> Result<Vec<f64>, NnError> {
        self.check_input(x)?;
        let mut tape = Tape::default();
        self.run(x, ctx, &mut tape);
        Ok(tape.output)
    }

    /// Accumulates the NLL gradient of the sample recorded on `tape`.
    /// Input perturbations are treated as constants (straight-through).
    fn backprop(&self, tape: &Tape, label: usize, grads: &mut Gradients, delta: &mut Vec<f64>) {
        delta.clear();
        delta.extend(tape.output.iter().map(|lp| lp.exp()));
        delta[label] -= 1.0;
        let mut prev = Vec::new();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let gain = tape.gains[l];
            let x = &tape.inputs[l];
            for (gb, d) in grads.bias[l].iter_mut().zip(delta.iter()) {
                *gb += d;
            }
            let gw = &mut grads.weights[l];
            for (i, xi) in x.iter().enumerate() {
                if *xi == 0.0 {
                    continue;
                }
                let scale = gain * xi;
                for (g, d) in gw[i * layer.outputs..(i + 1) * layer.outputs]
                    .iter_mut()
                    .zip(delta.iter())
                {
                    *g += scale * d;
                }
            }
            if l == 0 {
                break;
            }
            let below = &tape.pre[l - 1];
            prev.clear();
            prev.extend(
                layer
                    .weights
                    .chunks_exact(layer.outputs)
                    .zip(below)
                    .map(|(row, &z)| {
                        if z > 0.0 {
                            gain * row.iter().zip(delta.iter()).map(|(w, d)| w * d).sum::<f64>()
                        } else {
                            0.0
                        }
                    }),
            );
            std::mem::swap(delta, &mut prev);
        }
    }

    /// Mean NLL over `batch` and its gradient, running every sample through
    /// `ctx` (which is advanced once per sample).
    pub fn loss_and_gradients(
        &self,
        batch: &Batch,
        ctx: &mut impl Context,
    ) -> Result<(f64, Gradients), NnError> {
        let mut grads = Gradients::zeros_like(self);
        let loss = self.accumulate(batch, ctx, &mut grads)?;
        Ok((loss, grads))
    }

    /// Largest relative difference between the backprop gradient and
    /// central finite differences of the ideal loss with step `h`. The
    /// denominator is floored at 1e-6 so vanishing entries compare in
    /// absolute terms.
    pub fn gradient_check(&self, batch: &Batch, h: f64) -> Result<f64, NnError> {
        let (_, grads) = self.loss_and_gradients(batch, &mut Ideal)?;
        let mut probe = self.clone();
        let mut loss_at = |l: usize, i: usize, bias: bool, w: f64| -> Result<f64, NnError> {
            let layer = &mut probe.layers[l];
            let slot = if bias { &mut layer.bias[i] } else { &mut layer.weights[i] };
            let orig = *slot;
            *slot = w;
            let loss = probe.loss_and_gradients(batch, &mut Ideal).map(|r| r.0);
            let layer = &mut probe.layers[l];
            if bias {
                layer.bias[i] = orig;
            } else {
                layer.weights[i] = orig;
            }
            loss
        };
        let mut worst: f64 = 0.0;
        for (l, layer) in self.layers.iter().enumerate() {
            let params = layer
                .weights
                .iter()
                .enumerate()
                .map(|(i, &w)| (i, false, w, grads.weights[l][i]))
                .chain(layer.bias.iter().enumerate().map(|(i, &b)| (i, true, b, grads.bias[l][i])));
            for (i, bias, w, analytic) in params {
                let numeric = (loss_at(l, i, bias, w + h)? - loss_at(l, i, bias, w - h)?) / (2.0 * h);
                let scale = analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
        Ok(worst)
    }

    fn accumulate(
        &self,
        batch: &Batch,
        ctx: &mut impl Context,
        grads: &mut Gradients,
    ) -> Result<f64, NnError> {
        if batch.is_empty() {
            return Err(NnError::Empty("batch"));
        }
        if batch.dim != self.input_dim() {
            return Err(NnError::Dimension {
                expected: self.input_dim(),
                actual: batch.dim,
            });
        }
        grads.clear();
        let mut tape = Tape::default();
        let mut delta = Vec::new();
        let mut loss = 0.0;
        for s in 0..batch.len() {
            let label = batch.labels[s] as usize;
            self.run(batch.input(s), ctx, &mut tape);
            loss -= tape.output[label];
            self.backprop(&tape, label, grads, &mut delta);
            ctx.advance();
        }
        let inv = 1.0 / batch.len() as f64;
        grads.weights.iter_mut().flatten().for_each(|g| *g *= inv);
        grads.bias.iter_mut().flatten().for_each(|g| *g *= inv);
        Ok(loss * inv)
    }

    /// Plain SGD: `w -= lr * g`.
    pub fn apply(&mut self, grads: &Gradients, lr: f64) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (w, g) in layer.weights.iter_mut().zip(&grads.weights[l]) {
                *w -= lr * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(&grads.bias[l]) {
                *b -= lr * g;
            }
        }
    }

    /// One weight-update event: forward/backward over `batch` under `ctx`,
    /// then a plain SGD step and `ctx.after_update`. Returns the batch loss.
    ///
    /// The weights are considered rewritten at the step, so `ctx.refresh()`
    /// is called afterwards.
    pub fn backward_and_step(
        &mut self,
        batch: &Batch,
        ctx: &mut impl Context,
        lr: f64,
    ) -> Result<f64, NnError> {
        Sgd::new(self, 0.0).step(self, batch, ctx, lr, 0)
    }
}

/// SGD state carried across updates: scratch gradients and, with non-zero
/// momentum, the velocity `v <- momentum * v + g`, `w <- w - lr * v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    grads: Gradients,
    velocity: Option<Gradients>,
    momentum: f64,
}

impl Sgd {
    pub fn new(mlp: &Mlp, momentum: f64) -> Self {
        Self {
            grads: Gradients::zeros_like(mlp),
            velocity: (momentum != 0.0).then(|| Gradients::zeros_like(mlp)),
            momentum,
        }
    }

    pub fn step(
        &mut self,
        mlp: &mut Mlp,
        batch: &Batch,
        ctx: &mut impl Context,
        lr: f64,
        update: usize,
    ) -> Result<f64, NnError> {
        let loss = mlp.accumulate(batch, ctx, &mut self.grads)?;
        if !loss.is_finite() {
            return Err(NnError::Diverged { update, loss });
        }
        if let Some(v) = &mut self.velocity {
            let pairs = v
                .weights
                .iter_mut()
                .chain(v.bias.iter_mut())
                .zip(self.grads.weights.iter().chain(self.grads.bias.iter()));
            for (vl, gl) in pairs {
                for (vi, gi) in vl.iter_mut().zip(gl) {
                    *vi = self.momentum * *vi + gi;
                }
            }
        }
        if lr != 0.0 {
            mlp.apply(self.velocity.as_ref().unwrap_or(&self.grads), lr);
        }
        ctx.after_update(mlp);
        ctx.refresh();
        Ok(loss)
    }
}
