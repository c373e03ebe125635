use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::sigmoid;
use crate::TaskKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `fan_in × fan_out`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Rectifier MLP with a single linear output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

pub const INIT_SCHEME: &str = "uniform_fan_in";

impl Mlp {
    /// Weights and biases drawn from `U(-1/√fan_in, 1/√fan_in)`.
    pub fn init(input_dim: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0].max(1) as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || {
                        rng.gen_range(-bound..=bound)
                    }),
                    bias: Array1::from_shape_simple_fn(w[1], || rng.gen_range(-bound..=bound)),
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.bias.len()));
        w
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Output logits (classification) or values (regression), one per row.
    pub fn forward(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let mut h = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = h.dot(&layer.weights) + &layer.bias;
            if i < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        h.index_axis_move(Axis(1), 0)
    }

    /// Mean loss and its gradient with respect to every parameter.
    pub fn loss_and_grad(
        &self,
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
        task: TaskKind,
    ) -> (f64, Vec<Dense>) {
        let n = x.nrows() as f64;
        let last = self.layers.len() - 1;
        let mut acts = vec![x.to_owned()];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&layer.weights) + &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        let out = acts[last + 1].column(0);
        let (loss, dout): (f64, Array1<f64>) = match task {
            TaskKind::Classification => {
                let loss = out
                    .iter()
                    .zip(y)
                    .map(|(&z, &t)| softplus(z) - t * z)
                    .sum::<f64>()
                    / n;
                let d = out
                    .iter()
                    .zip(y)
                    .map(|(&z, &t)| (sigmoid(z) - t) / n)
                    .collect();
                (loss, d)
            }
            TaskKind::Regression => {
                let loss = out.iter().zip(y).map(|(&z, &t)| (z - t).powi(2)).sum::<f64>() / n;
                let d = out.iter().zip(y).map(|(&z, &t)| 2.0 * (z - t) / n).collect();
                (loss, d)
            }
        };
        let mut delta = dout.insert_axis(Axis(1));
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let gw = acts[i].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights.t());
                // rectifier derivative from the stored activation
                back.zip_mut_with(&acts[i], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
            grads.push(Dense {
                weights: gw,
                bias: gb,
            });
        }
        grads.reverse();
        (loss, grads)
    }

    pub fn loss(&self, x: ArrayView2<f64>, y: ArrayView1<f64>, task: TaskKind) -> f64 {
        let out = self.forward(x);
        let n = x.nrows() as f64;
        match task {
            TaskKind::Classification => {
                out.iter().zip(y).map(|(&z, &t)| softplus(z) - t * z).sum::<f64>() / n
            }
            TaskKind::Regression => out.iter().zip(y).map(|(&z, &t)| (z - t).powi(2)).sum::<f64>() / n,
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

pub struct Adam {
    params: AdamParams,
    step: i32,
    m: Vec<Dense>,
    v: Vec<Dense>,
}

impl Adam {
    pub fn new(model: &Mlp, params: AdamParams) -> Self {
        let zeros = || -> Vec<Dense> {
            model
                .layers
                .iter()
                .map(|l| Dense {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect()
        };
        Adam {
            params,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn update(&mut self, model: &mut Mlp, grads: &[Dense]) {
        self.step += 1;
        let AdamParams {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.params;
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let apply = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((layer, g), m), v) in model
            .layers
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            ndarray::Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(|p, &g, m, v| apply(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| apply(p, g, m, v));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn shapes_and_determinism() {
        let a = Mlp::init(5, &[7, 3], &mut ChaCha8Rng::seed_from_u64(1));
        let b = Mlp::init(5, &[7, 3], &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        assert_eq!(a.widths(), vec![5, 7, 3, 1]);
        assert_eq!(a.n_params(), 5 * 7 + 7 + 7 * 3 + 3 + 3 + 1);
        let bound = 1.0 / 5f64.sqrt();
        assert!(a.layers[0].weights.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn zero_output_layer_gives_half() {
        let mut m = Mlp::init(2, &[4], &mut ChaCha8Rng::seed_from_u64(3));
        m.layers[1].weights.fill(0.0);
        m.layers[1].bias.fill(0.0);
        let z = m.forward(array![[1.0, 2.0], [-3.0, 0.5]].view());
        assert!(z.iter().all(|&v| sigmoid(v) == 0.5));
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut m = Mlp::init(1, &[], &mut ChaCha8Rng::seed_from_u64(0));
        let before = m.layers[0].weights[[0, 0]];
        let grads = vec![Dense {
            weights: array![[0.3]],
            bias: array![-2.0],
        }];
        let mut opt = Adam::new(&m, AdamParams::default());
        opt.update(&mut m, &grads);
        assert!((before - m.layers[0].weights[[0, 0]] - 1e-3).abs() < 1e-9);
    }
}
