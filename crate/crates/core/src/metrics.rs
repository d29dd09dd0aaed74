//! Run-level estimates and pointwise error traces.

use crate::error::{check_len, Error, Result};

/// Default mask threshold for [`abs_mean_error`] relative to the amplitude.
pub const MASK_FRACTION: f64 = 1e-3;

/// `|mean((x_pred - x_D) / x_D)|` over the points where `|x_D| >= eps`.
pub fn abs_mean_error(x_pred: &[f64], x_desired: &[f64], eps: f64) -> Result<f64> {
    check_len(x_desired.len(), x_pred.len())?;
    let (sum, count) = x_pred
        .iter()
        .zip(x_desired)
        .filter(|(_, d)| d.abs() >= eps)
        .fold((0.0, 0usize), |(s, c), (p, d)| (s + (p - d) / d, c + 1));
    if count == 0 {
        return Err(Error::AllPointsMasked { eps });
    }
    Ok((sum / count as f64).abs())
}

pub fn mean_loss(history: &[f64]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    Ok(history.iter().sum::<f64>() / history.len() as f64)
}

/// Per-iteration time relative to the benchmark's per-iteration time.
pub fn normalized_time(wall: f64, iters: usize, bench_wall: f64, bench_iters: usize) -> f64 {
    (wall / iters as f64) / (bench_wall / bench_iters as f64)
}

/// Velocity and acceleration errors, desired minus predicted.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTraces {
    pub velocity: Vec<f64>,
    pub acceleration: Vec<f64>,
}

pub fn error_traces(
    v_pred: &[f64],
    a_pred: &[f64],
    v_desired: &[f64],
    a_desired: &[f64],
) -> Result<ErrorTraces> {
    let n = v_desired.len();
    check_len(n, v_pred.len())?;
    check_len(n, a_pred.len())?;
    check_len(n, a_desired.len())?;
    Ok(ErrorTraces {
        velocity: v_desired.iter().zip(v_pred).map(|(d, p)| d - p).collect(),
        acceleration: a_desired.iter().zip(a_pred).map(|(d, p)| d - p).collect(),
    })
}

/// Angular frequency in `[w_min, w_max]` where the Hann-windowed,
/// mean-removed signal has its largest Fourier magnitude.
///
/// The transform is evaluated directly on a fine frequency grid, so the
/// resolution is set by `steps` rather than the record length.
pub fn dominant_angular_frequency(
    t: &[f64],
    signal: &[f64],
    w_min: f64,
    w_max: f64,
    steps: usize,
) -> Result<f64> {
    check_len(t.len(), signal.len())?;
    if t.len() < 2 || steps < 2 || w_max.is_nan() || w_min.is_nan() || w_max <= w_min {
        return Err(Error::InvalidConfig(
            "need >= 2 samples and a non-empty band".into(),
        ));
    }
    let n = t.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let windowed: Vec<f64> = signal
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
            (s - mean) * w
        })
        .collect();
    let mut best = (w_min, -1.0);
    for k in 0..steps {
        let w = w_min + (w_max - w_min) * k as f64 / (steps - 1) as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (ti, xi) in t.iter().zip(&windowed) {
            let (s, c) = (w * ti).sin_cos();
            re += xi * c;
            im -= xi * s;
        }
        let power = re * re + im * im;
        if power > best.1 {
            best = (w, power);
        }
    }
    Ok(best.0)
}

pub fn rms(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}
