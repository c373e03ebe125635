//! Planted probe targets and a finite-difference gradient check.

use ndarray::{Array1, Array2};
use qprobe::probes::Mlp;
use qprobe::TaskKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn random_data(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

/// Gradient of every parameter against central differences, as
/// ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖).
pub fn gradient_error(mlp: &Mlp, x: &Array2<f64>, y: &Array1<f64>, task: TaskKind) -> f64 {
    let (_, grads) = mlp.loss_and_grad(x.view(), y.view(), task);
    let h = 1e-6;
    let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
    let mut probe = mlp.clone();
    for (l, g) in grads.iter().enumerate() {
        let n_w = g.weights.len();
        for k in 0..n_w + g.bias.len() {
            let analytic = if k < n_w {
                g.weights[[k / g.weights.ncols(), k % g.weights.ncols()]]
            } else {
                g.bias[k - n_w]
            };
            let nudge = |m: &mut Mlp, delta: f64| {
                let layer = &mut m.layers[l];
                if k < n_w {
                    let cols = layer.weights.ncols();
                    layer.weights[[k / cols, k % cols]] += delta;
                } else {
                    layer.bias[k - n_w] += delta;
                }
            };
            nudge(&mut probe, h);
            let up = probe.loss(x.view(), y.view(), task);
            nudge(&mut probe, -2.0 * h);
            let down = probe.loss(x.view(), y.view(), task);
            nudge(&mut probe, h);
            let numeric = (up - down) / (2.0 * h);
            diff += (analytic - numeric).powi(2);
            na += analytic * analytic;
            nn += numeric * numeric;
        }
    }
    diff.sqrt() / na.sqrt().max(nn.sqrt()).max(1e-12)
}

/// Smallest |pre-activation| over every hidden unit and sample.
pub fn closest_kink(mlp: &Mlp, x: &Array2<f64>) -> f64 {
    let mut a = x.clone();
    let mut closest = f64::INFINITY;
    for layer in &mlp.layers[..mlp.layers.len() - 1] {
        let z = a.dot(&layer.weights) + &layer.bias;
        closest = z.iter().fold(closest, |m, v| m.min(v.abs()));
        a = z.mapv(|v| v.max(0.0));
    }
    closest
}

/// Inputs uniform on [-1, 1]^dim. Regression: y = w·x + 0.01·noise with w
/// scaled so the signal has standard deviation 0.1, about the spread of a
/// normalized complexity score. Classification: the sign of w·x, with every
/// point pushed 0.3 away from the boundary.
pub fn planted(task: TaskKind, n: usize, dim: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let w: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = random_data(n, dim, seed + 1);
    let mut y = Vec::with_capacity(n);
    for mut row in x.rows_mut() {
        // unit-variance projection: uniform coordinates have variance 1/3
        let s: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / norm * 3f64.sqrt();
        match task {
            TaskKind::Regression => y.push(0.1 * s + 0.01 * normal.sample(&mut rng)),
            TaskKind::Classification => {
                let side = if s >= 0.0 { 1.0 } else { -1.0 };
                for (v, wj) in row.iter_mut().zip(&w) {
                    *v += side * 0.3 * wj / norm;
                }
                y.push(if side > 0.0 { 1.0 } else { 0.0 });
            }
        }
    }
    (x, y)
}

