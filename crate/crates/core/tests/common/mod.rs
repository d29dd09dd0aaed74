#![allow(dead_code)]

use pidoc_core::loss::ControlLoss;
use pidoc_core::nn::{self, JetLoss, LayerSpec, NetworkParams};
use pidoc_core::sim::{integrate, VdpConfig};
use pidoc_core::{DesiredSignal, LambdaMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random tanh network whose input weights are scaled to the [0, 30] time
/// window and whose deeper weights are scaled by fan-in, so it is not
/// saturated over the window.
pub fn random_network(rng: &mut ChaCha8Rng) -> NetworkParams {
    let depth = rng.random_range(1..=3);
    let width = rng.random_range(1..=10);
    let spec = LayerSpec::hidden(depth, width).unwrap();
    let flat = (0..spec.param_count())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let raw = NetworkParams::from_flat(spec.clone(), flat).unwrap();
    let (mut ws, bs) = raw.to_layers();
    ws[0] /= 30.0;
    for w in ws.iter_mut().skip(1) {
        let fan_in = w.ncols() as f64;
        *w /= fan_in.sqrt();
    }
    NetworkParams::from_layers(spec, &ws, &bs).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn fd_first(params: &NetworkParams, t: f64, h: f64) -> f64 {
    (nn::forward(params, t + h) - nn::forward(params, t - h)) / (2.0 * h)
}

pub fn fd_second(params: &NetworkParams, t: f64, h: f64) -> f64 {
    (nn::forward(params, t + h) - 2.0 * nn::forward(params, t) + nn::forward(params, t - h)) / (h * h)
}

/// The full loss on an `n_points` grid of the benchmark oscillator.
pub fn benchmark_loss(n_points: usize, amplitude: f64, mode: LambdaMode) -> (Vec<f64>, ControlLoss) {
    let data = integrate(&VdpConfig {
        n_points,
        ..Default::default()
    })
    .unwrap();
    let desired = DesiredSignal::new(amplitude).unwrap().sample(&data.t);
    let loss = ControlLoss::new(data.x, desired, amplitude, mode).unwrap();
    (data.t, loss)
}

/// Worst relative error between the reverse-mode gradient and central
/// differences of the loss value.
pub fn worst_gradient_error<L: JetLoss>(params: &NetworkParams, times: &[f64], loss: &L, h: f64) -> f64 {
    let (_, _, grad) = nn::loss_gradient(params, times, loss);
    let value = |flat: Vec<f64>| {
        let p = NetworkParams::from_flat(params.spec().clone(), flat).unwrap();
        nn::loss_gradient(&p, times, loss).0
    };
    (0..params.len())
        .map(|k| {
            let mut up = params.as_flat().to_vec();
            let mut down = up.clone();
            up[k] += h;
            down[k] -= h;
            rel_err(grad[k], (value(up) - value(down)) / (2.0 * h))
        })
        .fold(0.0, f64::max)
}
