//! Small fully-connected network with hand-rolled reverse-mode gradients.
//!
//! tanh hidden layers, linear output. Weights live in one flat buffer so the
//! optimizer can treat the whole field as a single parameter vector.

use fur_core::Pcg32;

#[derive(Clone, Debug)]
pub struct Mlp {
    /// Layer widths, input first.
    pub sizes: Vec<usize>,
    /// Per layer: weight matrix (out x in, row-major) followed by biases.
    pub params: Vec<f64>,
}

/// Forward-pass activations kept for the backward pass.
pub struct MlpCache {
    /// Post-activation values per layer, input included.
    activations: Vec<Vec<f64>>,
}

impl Mlp {
    /// Offset of layer l's weights inside the flat parameter buffer.
    fn layer_offset(&self, layer: usize) -> usize {
        let mut off = 0;
        for l in 0..layer {
            off += self.sizes[l + 1] * (self.sizes[l] + 1);
        }
        off
    }

    pub fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    /// Xavier-uniform weights, zero biases, deterministic for a fixed seed.
    pub fn init(sizes: &[usize], seed: u64) -> Mlp {
        let mut rng = Pcg32::new(seed, 0x6d1f);
        let mut params = Vec::with_capacity(Self::param_count(sizes));
        for w in sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let bound = (6.0 / (n_in + n_out) as f64).sqrt();
            for _ in 0..n_in * n_out {
                params.push((rng.next_f64() * 2.0 - 1.0) * bound);
            }
            params.extend(std::iter::repeat(0.0).take(n_out));
        }
        Mlp {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn forward(&self, input: &[f64]) -> (Vec<f64>, MlpCache) {
        debug_assert_eq!(input.len(), self.sizes[0]);
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(input.to_vec());
        let mut x = input.to_vec();
        for layer in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let off = self.layer_offset(layer);
            let weights = &self.params[off..off + n_out * n_in];
            let biases = &self.params[off + n_out * n_in..off + n_out * (n_in + 1)];
            let mut y = vec![0.0; n_out];
            for (o, yo) in y.iter_mut().enumerate() {
                let row = &weights[o * n_in..(o + 1) * n_in];
                let mut acc = biases[o];
                for (w, xi) in row.iter().zip(&x) {
                    acc += w * xi;
                }
                *yo = acc;
            }
            if layer + 1 < self.n_layers() {
                for v in y.iter_mut() {
                    *v = v.tanh();
                }
            }
            activations.push(y.clone());
            x = y;
        }
        let out = activations.last().unwrap().clone();
        (out, MlpCache { activations })
    }

    /// Backpropagate `d_out` through the cached forward pass. Accumulates the
    /// parameter gradient into `grad` (same layout as `params`) and returns
    /// the gradient with respect to the input.
    pub fn backward(&self, cache: &MlpCache, d_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(grad.len(), self.params.len());
        let mut delta = d_out.to_vec();
        for layer in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let off = self.layer_offset(layer);
            // Hidden layers: fold the tanh derivative into delta.
            if layer + 1 < self.n_layers() {
                let act = &cache.activations[layer + 1];
                for (d, a) in delta.iter_mut().zip(act) {
                    *d *= 1.0 - a * a;
                }
            }
            let x = &cache.activations[layer];
            let (w_grad, b_grad) = grad[off..off + n_out * (n_in + 1)].split_at_mut(n_out * n_in);
            for o in 0..n_out {
                let d = delta[o];
                let row = &mut w_grad[o * n_in..(o + 1) * n_in];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += d * xi;
                }
                b_grad[o] += d;
            }
            let weights = &self.params[off..off + n_out * n_in];
            let mut d_in = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                let row = &weights[o * n_in..(o + 1) * n_in];
                for (di, w) in d_in.iter_mut().zip(row) {
                    *di += d * w;
                }
            }
            delta = d_in;
        }
        delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_param_grad(mlp: &Mlp, input: &[f64], probe: &[f64], idx: usize, h: f64) -> f64 {
        let mut plus = mlp.clone();
        plus.params[idx] += h;
        let mut minus = mlp.clone();
        minus.params[idx] -= h;
        let f = |m: &Mlp| -> f64 {
            let (y, _) = m.forward(input);
            y.iter().zip(probe).map(|(a, b)| a * b).sum()
        };
        (f(&plus) - f(&minus)) / (2.0 * h)
    }

    #[test]
    fn parameter_gradient_matches_fd() {
        let mlp = Mlp::init(&[5, 16, 16, 4], 3);
        let mut rng = Pcg32::seeded(10);
        let input: Vec<f64> = (0..5).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        let probe: Vec<f64> = (0..4).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        let (_, cache) = mlp.forward(&input);
        let mut grad = vec![0.0; mlp.params.len()];
        mlp.backward(&cache, &probe, &mut grad);
        for _ in 0..40 {
            let idx = rng.next_below(mlp.params.len());
            let fd = fd_param_grad(&mlp, &input, &probe, idx, 1e-6);
            let denom = fd.abs().max(grad[idx].abs()).max(1e-8);
            assert!(
                (grad[idx] - fd).abs() / denom < 1e-5,
                "param {idx}: {} vs {}",
                grad[idx],
                fd
            );
        }
    }

    #[test]
    fn input_gradient_matches_fd() {
        let mlp = Mlp::init(&[6, 12, 3], 7);
        let mut rng = Pcg32::seeded(11);
        let input: Vec<f64> = (0..6).map(|_| rng.next_f64() - 0.5).collect();
        let probe = [0.3, -1.1, 0.7];
        let (_, cache) = mlp.forward(&input);
        let mut grad = vec![0.0; mlp.params.len()];
        let d_in = mlp.backward(&cache, &probe, &mut grad);
        for d in 0..6 {
            let mut p = input.clone();
            let mut m = input.clone();
            p[d] += 1e-6;
            m[d] -= 1e-6;
            let f = |x: &[f64]| -> f64 {
                let (y, _) = mlp.forward(x);
                y.iter().zip(probe).map(|(a, b)| a * b).sum()
            };
            let fd = (f(&p) - f(&m)) / 2e-6;
            assert!((d_in[d] - fd).abs() / fd.abs().max(1e-8) < 1e-5);
        }
    }

    #[test]
    fn zero_params_give_bias_output() {
        let mut mlp = Mlp::init(&[3, 8, 4], 1);
        for p in mlp.params.iter_mut() {
            *p = 0.0;
        }
        let (y, _) = mlp.forward(&[1.0, -2.0, 3.0]);
        assert!(y.iter().all(|&v| v == 0.0));
    }
}
