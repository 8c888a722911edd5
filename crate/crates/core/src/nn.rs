//! Fixed-topology dense networks with exact reverse-mode gradients and Adam.
//!
//! A [`DenseNet`] is a stack of affine maps, each followed by ReLU or the
//! identity. [`DenseNet::forward`] records a [`Tape`] of the intermediate
//! activations; [`DenseNet::backward`] consumes it and returns the gradient of
//! `Σ_batch ⟨output, output_grad⟩` with respect to every parameter and to the
//! input. ReLU uses subgradient 0 at exactly 0.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Identity => z,
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One affine map `y = act(x Wᵀ + b)` with `W` shaped `[fan_out × fan_in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Option<Vec<f64>>,
    pub activation: Activation,
}

impl Layer {
    pub fn fan_in(&self) -> usize {
        self.weight.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDenseNet")]
pub struct DenseNet {
    layers: Vec<Layer>,
    use_bias: bool,
}

#[derive(Deserialize)]
struct RawDenseNet {
    layers: Vec<Layer>,
    use_bias: bool,
}

impl TryFrom<RawDenseNet> for DenseNet {
    type Error = Error;

    fn try_from(raw: RawDenseNet) -> Result<Self> {
        DenseNet::from_layers(raw.layers, raw.use_bias)
    }
}

/// Cached activations from one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre: Vec<Matrix>,
    checksum: u64,
}

/// Parameter gradients, laid out like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Option<Vec<f64>>>,
}

impl DenseNet {
    /// Random network `input_dim → widths[0] → … → widths[last]`, ReLU on
    /// hidden layers and identity on the output layer. Parameters are drawn
    /// uniformly from `[−1/√fan_in, 1/√fan_in]`.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        widths: &[usize],
        use_bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || widths.is_empty() || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "network shape {input_dim} -> {widths:?} has an empty layer"
            )));
        }
        let mut layers = Vec::with_capacity(widths.len());
        let mut fan_in = input_dim;
        for (i, &fan_out) in widths.iter().enumerate() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut weight = Matrix::zeros(fan_out, fan_in);
            for w in weight.as_mut_slice() {
                *w = rng.random_range(-bound..=bound);
            }
            let bias = use_bias.then(|| {
                (0..fan_out)
                    .map(|_| rng.random_range(-bound..=bound))
                    .collect()
            });
            let activation = if i + 1 == widths.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            layers.push(Layer {
                weight,
                bias,
                activation,
            });
            fan_in = fan_out;
        }
        Ok(DenseNet { layers, use_bias })
    }

    /// Assembles a network from explicit layers, checking that shapes chain,
    /// parameters are finite and bias presence agrees with `use_bias`.
    pub fn from_layers(layers: Vec<Layer>, use_bias: bool) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("network has no layers"));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.fan_in() == 0 || layer.fan_out() == 0 {
                return Err(Error::InvalidArgument(format!("layer {i} is empty")));
            }
            if i > 0 && layers[i - 1].fan_out() != layer.fan_in() {
                return Err(Error::DimensionMismatch {
                    expected: layers[i - 1].fan_out(),
                    found: layer.fan_in(),
                });
            }
            match (&layer.bias, use_bias) {
                (Some(b), true) if b.len() != layer.fan_out() => {
                    return Err(Error::DimensionMismatch {
                        expected: layer.fan_out(),
                        found: b.len(),
                    })
                }
                (Some(_), false) | (None, true) => {
                    return Err(Error::InvalidArgument(format!(
                        "layer {i}: bias presence disagrees with use_bias={use_bias}"
                    )))
                }
                _ => {}
            }
            let bias_finite = layer.bias.iter().flatten().all(|v| v.is_finite());
            if !layer.weight.is_finite() || !bias_finite {
                return Err(Error::InvalidArgument(format!(
                    "layer {i} has non-finite parameters"
                )));
            }
        }
        Ok(DenseNet { layers, use_bias })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn use_bias(&self) -> bool {
        self.use_bias
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.as_ref().map_or(0, Vec::len))
            .sum()
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: batch.cols(),
            });
        }
        if !batch.is_finite() {
            return Err(Error::InvalidArgument("batch contains non-finite values".into()));
        }
        Ok(())
    }

    fn affine(layer: &Layer, input: &Matrix) -> Matrix {
        let mut z = input.matmul_transposed(&layer.weight);
        if let Some(b) = &layer.bias {
            for r in 0..z.rows() {
                for (v, bj) in z.row_mut(r).iter_mut().zip(b) {
                    *v += bj;
                }
            }
        }
        z
    }

    fn activate(act: Activation, z: &Matrix) -> Matrix {
        let mut a = z.clone();
        a.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
        a
    }

    /// Output only, without recording a tape.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let mut a = batch.clone();
        for layer in &self.layers {
            let z = Self::affine(layer, &a);
            a = Self::activate(layer.activation, &z);
        }
        Ok(a)
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, Tape)> {
        self.check_input(batch)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = batch.clone();
        for layer in &self.layers {
            let z = Self::affine(layer, &a);
            let next = Self::activate(layer.activation, &z);
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        let tape = Tape {
            inputs,
            pre,
            checksum: self.checksum(),
        };
        Ok((a, tape))
    }

    pub fn backward(&self, tape: &Tape, output_grad: &Matrix) -> Result<(Gradients, Matrix)> {
        if tape.pre.len() != self.layers.len() || tape.checksum != self.checksum() {
            return Err(Error::StaleTape);
        }
        let last = &tape.pre[tape.pre.len() - 1];
        if output_grad.rows() != last.rows() || output_grad.cols() != last.cols() {
            return Err(Error::DimensionMismatch {
                expected: last.rows() * last.cols(),
                found: output_grad.rows() * output_grad.cols(),
            });
        }

        let mut weights = vec![Matrix::zeros(0, 0); self.layers.len()];
        let mut biases = vec![None; self.layers.len()];
        let mut grad = output_grad.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let z = &tape.pre[l];
            for (g, &zv) in grad.as_mut_slice().iter_mut().zip(z.as_slice()) {
                *g *= layer.activation.derivative(zv);
            }
            weights[l] = grad.transposed_matmul(&tape.inputs[l]);
            if layer.bias.is_some() {
                biases[l] = Some(grad.column_sums());
            }
            grad = grad.matmul(&layer.weight);
        }
        Ok((Gradients { weights, biases }, grad))
    }

    /// Parameters flattened as layer 0 weights (row-major), layer 0 bias,
    /// layer 1 weights, …
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            out.extend_from_slice(layer.weight.as_slice());
            if let Some(b) = &layer.bias {
                out.extend_from_slice(b);
            }
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                found: params.len(),
            });
        }
        let mut it = params.iter();
        self.for_each_param_mut(|p| *p = *it.next().expect("length checked"));
        Ok(())
    }

    fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for layer in &mut self.layers {
            layer.weight.as_mut_slice().iter_mut().for_each(&mut f);
            if let Some(b) = &mut layer.bias {
                b.iter_mut().for_each(&mut f);
            }
        }
    }

    /// FNV-1a over the parameter bit patterns.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: f64| {
            for byte in v.to_bits().to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for layer in &self.layers {
            layer.weight.as_slice().iter().for_each(|&v| eat(v));
            layer.bias.iter().flatten().for_each(|&v| eat(v));
        }
        h
    }

    /// `(α/2) · Σ_ℓ ‖W_ℓ‖²` over weight matrices; biases are not decayed.
    pub fn weight_decay_term(&self, alpha: f64) -> f64 {
        let sq: f64 = self.layers.iter().map(|l| l.weight.sum_squares()).sum();
        0.5 * alpha * sq
    }

    /// Adds `∂/∂W (α/2)‖W‖² = α·W` to the weight gradients.
    pub fn add_weight_decay_grad(&self, alpha: f64, grads: &mut Gradients) {
        if alpha == 0.0 {
            return;
        }
        for (g, layer) in grads.weights.iter_mut().zip(&self.layers) {
            for (gv, wv) in g.as_mut_slice().iter_mut().zip(layer.weight.as_slice()) {
                *gv += alpha * wv;
            }
        }
    }
}


impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            if let Some(b) = b {
                out.extend_from_slice(b);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.as_slice().len() + b.as_ref().map_or(0, Vec::len))
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite)
            && self.biases.iter().flatten().flatten().all(|v| v.is_finite())
    }
}

/// Bias-corrected Adam state for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    /// Fresh state with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub fn for_net(net: &DenseNet, learning_rate: f64) -> Self {
        Self::new(net.num_params(), learning_rate)
    }

    /// Applies one update to a flat parameter vector.
    pub fn step_flat(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                found: if params.len() != self.m.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// One Adam update of `net` with `grads`.
pub fn adam_step(net: &mut DenseNet, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if grads.len() != net.num_params() {
        return Err(Error::DimensionMismatch {
            expected: net.num_params(),
            found: grads.len(),
        });
    }
    let mut params = net.params();
    state.step_flat(&mut params, &grads.flatten())?;
    net.set_params(&params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use rand_distr::{Distribution, Normal};

    fn random_matrix(rows: usize, cols: usize, sd: f64, seed: u64) -> Matrix {
        let mut rng = stream_rng(seed, Stream::Probe, 0);
        let n = Normal::new(0.0, sd).unwrap();
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| n.sample(&mut rng)).collect())
            .unwrap()
    }

    fn small_net(use_bias: bool, seed: u64) -> DenseNet {
        let mut rng = stream_rng(seed, Stream::EncoderInit, 0);
        let mut net = DenseNet::new(3, &[4, 3, 2], use_bias, &mut rng).unwrap();
        let n = Normal::new(0.0, 0.5).unwrap();
        let p: Vec<f64> = (0..net.num_params()).map(|_| n.sample(&mut rng)).collect();
        net.set_params(&p).unwrap();
        net
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let layer = Layer {
            weight: Matrix::identity(3),
            bias: None,
            activation: Activation::Identity,
        };
        let net = DenseNet::from_layers(vec![layer], false).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.5], vec![0.0, 4.0, -1.0]]).unwrap();
        assert_eq!(net.predict(&x).unwrap(), x);
    }

    #[test]
    fn relu_layer_clips_negative() {
        let layer = Layer {
            weight: Matrix::identity(2),
            bias: None,
            activation: Activation::Relu,
        };
        let net = DenseNet::from_layers(vec![layer], false).unwrap();
        let x = Matrix::from_rows(&[vec![-1.0, 2.0]]).unwrap();
        assert_eq!(net.predict(&x).unwrap().as_slice(), &[0.0, 2.0]);
    }

    #[test]
    fn two_layer_forward_matches_scalar_recomputation() {
        let net = small_net(true, 4);
        let x = random_matrix(6, 3, 1.0, 5);
        let out = net.predict(&x).unwrap();
        for r in 0..x.rows() {
            let mut a: Vec<f64> = x.row(r).to_vec();
            for layer in net.layers() {
                let mut next = vec![0.0; layer.fan_out()];
                for (o, nv) in next.iter_mut().enumerate() {
                    let mut s = layer.bias.as_ref().map_or(0.0, |b| b[o]);
                    for (i, av) in a.iter().enumerate() {
                        s += layer.weight.get(o, i) * av;
                    }
                    *nv = match layer.activation {
                        Activation::Relu => s.max(0.0),
                        Activation::Identity => s,
                    };
                }
                a = next;
            }
            for (o, v) in a.iter().enumerate() {
                assert!((out.get(r, o) - v).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = small_net(false, 1);
        let x = Matrix::zeros(2, 5);
        assert!(matches!(
            net.forward(&x),
            Err(Error::DimensionMismatch { expected: 3, found: 5 })
        ));
    }

    #[test]
    fn chain_mismatch_rejected() {
        let a = Layer {
            weight: Matrix::zeros(4, 3),
            bias: None,
            activation: Activation::Relu,
        };
        let b = Layer {
            weight: Matrix::zeros(2, 5),
            bias: None,
            activation: Activation::Identity,
        };
        assert!(DenseNet::from_layers(vec![a, b], false).is_err());
    }

    #[test]
    fn biasless_relu_net_maps_zero_to_zero() {
        let net = small_net(false, 2);
        let out = net.predict(&Matrix::zeros(3, 3)).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    /// Central differences of `Σ ⟨net(x), g⟩` against `backward`.
    fn check_gradients(net: &DenseNet, x: &Matrix, g: &Matrix) -> f64 {
        let (_, tape) = net.forward(x).unwrap();
        let (grads, input_grad) = net.backward(&tape, g).unwrap();
        let objective = |n: &DenseNet, x: &Matrix| -> f64 {
            let out = n.predict(x).unwrap();
            out.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).sum()
        };
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let base = net.params();
        let analytic = grads.flatten();
        let mut probe = net.clone();
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] += h;
            probe.set_params(&p).unwrap();
            let up = objective(&probe, x);
            p[i] -= 2.0 * h;
            probe.set_params(&p).unwrap();
            let down = objective(&probe, x);
            let fd = (up - down) / (2.0 * h);
            worst = worst.max(rel_err(analytic[i], fd));
        }
        for i in 0..x.as_slice().len() {
            let mut xp = x.clone();
            xp.as_mut_slice()[i] += h;
            let up = objective(net, &xp);
            xp.as_mut_slice()[i] -= 2.0 * h;
            let down = objective(net, &xp);
            let fd = (up - down) / (2.0 * h);
            worst = worst.max(rel_err(input_grad.as_slice()[i], fd));
        }
        worst
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn backward_matches_finite_differences() {
        for seed in 0..5 {
            let net = small_net(seed % 2 == 0, seed);
            assert!(net.num_params() <= 50);
            let x = random_matrix(4, 3, 1.0, seed + 100);
            let g = random_matrix(4, 2, 1.0, seed + 200);
            let err = check_gradients(&net, &x, &g);
            assert!(err < 1e-4, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let net = small_net(true, 3);
        let x = random_matrix(5, 3, 1.0, 8);
        let (_, tape) = net.forward(&x).unwrap();
        let (grads, input_grad) = net.backward(&tape, &Matrix::zeros(5, 2)).unwrap();
        assert!(grads.flatten().iter().all(|&v| v == 0.0));
        assert!(input_grad.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let layer = Layer {
            weight: Matrix::identity(1),
            bias: None,
            activation: Activation::Relu,
        };
        let net = DenseNet::from_layers(vec![layer], false).unwrap();
        let x = Matrix::from_rows(&[vec![0.0]]).unwrap();
        let (_, tape) = net.forward(&x).unwrap();
        let (grads, input_grad) = net
            .backward(&tape, &Matrix::from_rows(&[vec![1.0]]).unwrap())
            .unwrap();
        assert_eq!(grads.flatten(), vec![0.0]);
        assert_eq!(input_grad.as_slice(), &[0.0]);
    }

    #[test]
    fn stale_tape_rejected() {
        let mut net = small_net(false, 6);
        let x = random_matrix(2, 3, 1.0, 1);
        let (out, tape) = net.forward(&x).unwrap();
        let mut p = net.params();
        p[0] += 1.0;
        net.set_params(&p).unwrap();
        let g = Matrix::zeros(out.rows(), out.cols());
        assert!(matches!(net.backward(&tape, &g), Err(Error::StaleTape)));
    }

    #[test]
    fn backward_leaves_parameters_untouched() {
        let net = small_net(true, 7);
        let before = net.clone();
        let x = random_matrix(3, 3, 1.0, 2);
        let (_, tape) = net.forward(&x).unwrap();
        net.backward(&tape, &random_matrix(3, 2, 1.0, 3)).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn weight_decay_examples() {
        let layer = Layer {
            weight: Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap(),
            bias: Some(vec![100.0]),
            activation: Activation::Identity,
        };
        let net = DenseNet::from_layers(vec![layer], true).unwrap();
        assert_eq!(net.weight_decay_term(0.0), 0.0);
        assert_eq!(net.weight_decay_term(2.0), 25.0);
    }

    #[test]
    fn weight_decay_gradient_matches_finite_differences() {
        let net = small_net(true, 9);
        let alpha = 0.3;
        let mut grads = Gradients {
            weights: net
                .layers()
                .iter()
                .map(|l| Matrix::zeros(l.fan_out(), l.fan_in()))
                .collect(),
            biases: net
                .layers()
                .iter()
                .map(|l| l.bias.as_ref().map(|b| vec![0.0; b.len()]))
                .collect(),
        };
        net.add_weight_decay_grad(alpha, &mut grads);
        let analytic = grads.flatten();
        let base = net.params();
        let mut probe = net.clone();
        let h = 1e-5;
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] += h;
            probe.set_params(&p).unwrap();
            let up = probe.weight_decay_term(alpha);
            p[i] -= 2.0 * h;
            probe.set_params(&p).unwrap();
            let down = probe.weight_decay_term(alpha);
            let fd = (up - down) / (2.0 * h);
            assert!(rel_err(analytic[i], fd) < 1e-6, "param {i}");
        }
    }

    #[test]
    fn adam_zero_gradient_is_fixed_point() {
        let mut net = small_net(true, 11);
        let before = net.clone();
        let zero = vec![0.0; net.num_params()];
        let mut state = AdamState::for_net(&net, 1e-3);
        let mut p = net.params();
        for _ in 0..5 {
            state.step_flat(&mut p, &zero).unwrap();
        }
        net.set_params(&p).unwrap();
        assert_eq!(net, before);
        assert_eq!(state.step, 5);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        // Step 1: m̂ = g, v̂ = g², so Δ = lr · g / (|g| + ε).
        let mut p = [1.0];
        let mut state = AdamState::new(1, 0.1);
        state.step_flat(&mut p, &[1.0]).unwrap();
        let expected = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((1.0 - p[0] - 0.1).abs() < 1e-8);
    }

    #[test]
    fn adam_shape_mismatch() {
        let mut state = AdamState::new(3, 0.1);
        let mut p = [0.0; 2];
        assert!(state.step_flat(&mut p, &[0.0; 2]).is_err());
    }

    #[test]
    fn adam_trajectories_are_bitwise_reproducible() {
        let run = || {
            let mut net = small_net(true, 12);
            let mut state = AdamState::for_net(&net, 1e-2);
            let x = random_matrix(8, 3, 1.0, 13);
            for _ in 0..20 {
                let (out, tape) = net.forward(&x).unwrap();
                let (grads, _) = net.backward(&tape, &out).unwrap();
                adam_step(&mut net, &grads, &mut state).unwrap();
            }
            net.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
