//! Shared workloads for the criterion benches.

use pidoc_core::loss::ControlLoss;
use pidoc_core::nn::{init_params, LayerSpec, NetworkParams};
use pidoc_core::sim::{integrate, VdpConfig};
use pidoc_core::{DesiredSignal, ExperimentConfig};

/// One loss-and-gradient evaluation's inputs for the given network shape.
pub struct GradientWorkload {
    pub params: NetworkParams,
    pub times: Vec<f64>,
    pub loss: ControlLoss,
}

pub fn gradient_workload(depth: usize, width: usize, n_points: usize) -> GradientWorkload {
    let cfg = ExperimentConfig::default();
    let vdp = VdpConfig {
        n_points,
        ..cfg.vdp.clone()
    };
    let data = integrate(&vdp).expect("benchmark oscillator integrates");
    let desired = DesiredSignal::new(cfg.amplitude)
        .expect("positive")
        .sample(&data.t);
    let loss = ControlLoss::new(data.x, desired, cfg.amplitude, cfg.lambda_mode).expect("consistent");
    let spec = LayerSpec::hidden(depth, width).expect("valid shape");
    GradientWorkload {
        params: init_params(&spec, cfg.seed),
        times: data.t,
        loss,
    }
}
