//! Dense ReLU network with a linear head, parameters in one flat vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    sizes: Vec<usize>,
    params: Vec<f64>,
    /// `(weights, biases)` offsets per layer; weights are `out x in`, row-major.
    offsets: Vec<(usize, usize)>,
}

fn layout(sizes: &[usize]) -> (Vec<(usize, usize)>, usize) {
    let mut offsets = Vec::with_capacity(sizes.len().saturating_sub(1));
    let mut n = 0;
    for w in sizes.windows(2) {
        let (i, o) = (w[0], w[1]);
        offsets.push((n, n + i * o));
        n += i * o + o;
    }
    (offsets, n)
}

impl QNetwork {
    /// He-uniform weights and zero biases.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..net.n_layers() {
            let (w, _) = net.offsets[l];
            let fan_in = sizes[l];
            let limit = (6.0 / fan_in as f64).sqrt();
            for p in &mut net.params[w..w + fan_in * sizes[l + 1]] {
                *p = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "network needs at least an input and an output layer of non-zero width, got {sizes:?}"
            )));
        }
        let (offsets, n) = layout(sizes);
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; n],
            offsets,
        })
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::InvalidParameter(format!(
                "layer sizes {sizes:?} need {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_layers(&self) -> usize {
        self.offsets.len()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Fills `acts` with the input and every layer's output.
    pub fn forward_cached(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) {
        assert_eq!(x.len(), self.input_dim(), "input dimension");
        acts.resize_with(self.sizes.len(), Vec::new);
        acts[0].clear();
        acts[0].extend_from_slice(x);
        let last = self.n_layers() - 1;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w, b) = self.offsets[l];
            let (prev, rest) = acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut rest[0];
            out.clear();
            for o in 0..n_out {
                let row = &self.params[w + o * n_in..w + (o + 1) * n_in];
                let z = self.params[b + o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                out.push(if l < last { z.max(0.0) } else { z });
            }
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut acts = Vec::new();
        self.forward_cached(x, &mut acts);
        acts.pop().expect("output layer")
    }

    /// Adds d(loss)/d(params) to `grad` given d(loss)/d(output) for the pass
    /// recorded in `acts`.
    pub fn backward(&self, acts: &[Vec<f64>], grad_out: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len(), "gradient length");
        let mut g = grad_out.to_vec();
        let mut g_prev = Vec::new();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w, b) = self.offsets[l];
            let input = &acts[l];
            for o in 0..n_out {
                let go = g[o];
                if go == 0.0 {
                    continue;
                }
                grad[b + o] += go;
                for (gw, a) in grad[w + o * n_in..w + (o + 1) * n_in].iter_mut().zip(input) {
                    *gw += go * a;
                }
            }
            if l == 0 {
                break;
            }
            g_prev.clear();
            g_prev.resize(n_in, 0.0);
            for o in 0..n_out {
                let go = g[o];
                if go == 0.0 {
                    continue;
                }
                let row = &self.params[w + o * n_in..w + (o + 1) * n_in];
                for (gp, wv) in g_prev.iter_mut().zip(row) {
                    *gp += go * wv;
                }
            }
            for (gp, a) in g_prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *gp = 0.0;
                }
            }
            std::mem::swap(&mut g, &mut g_prev);
        }
    }
}

/// Huber loss with threshold `delta`.
pub fn huber(d: f64, delta: f64) -> f64 {
    if d.abs() <= delta {
        0.5 * d * d
    } else {
        delta * (d.abs() - 0.5 * delta)
    }
}

pub fn huber_grad(d: f64, delta: f64) -> f64 {
    d.clamp(-delta, delta)
}

/// Mean Huber loss of `Q(s_i, a_i) - y_i` and its gradient.
pub fn td_loss_and_grad(
    net: &QNetwork,
    inputs: &[&[f64]],
    actions: &[usize],
    targets: &[f64],
    delta: f64,
) -> (f64, Vec<f64>) {
    let n = inputs.len();
    let mut grad = vec![0.0; net.n_params()];
    let mut acts = Vec::new();
    let mut loss = 0.0;
    let mut grad_out = vec![0.0; net.output_dim()];
    for i in 0..n {
        net.forward_cached(inputs[i], &mut acts);
        let q = acts.last().expect("output")[actions[i]];
        let d = q - targets[i];
        loss += huber(d, delta);
        grad_out.iter_mut().for_each(|g| *g = 0.0);
        grad_out[actions[i]] = huber_grad(d, delta) / n as f64;
        net.backward(&acts, &grad_out, &mut grad);
    }
    (loss / n as f64, grad)
}

/// Adaptive-moment optimiser.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Rescales `grad` in place so its L2 norm is at most `max_norm`.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}
