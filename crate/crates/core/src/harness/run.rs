use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Profile};
use crate::error::{Error, Result};
use crate::loss::{ControlLoss, LossBreakdown};
use crate::metrics::{self, MASK_FRACTION};
use crate::nn::{self, NetworkParams};
use crate::optim::{self, Evaluation, Termination};
use crate::signal::DesiredSignal;
use crate::sim::{self, vdp_rhs};

pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMING_FILE: &str = "timing.json";
pub const LOSSES_FILE: &str = "losses.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const PARAMS_FILE: &str = "params.txt";
pub const FAILURE_MARKER: &str = "FAILED";

/// Deterministic part of a run's results, written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub abs_mean_err: f64,
    /// Threshold below which `|x_D|` points are excluded from `abs_mean_err`.
    pub mask_eps: f64,
    pub mean_loss: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    pub final_loss: LossBreakdown,
    pub parameter_count: usize,
}

/// Wall-clock measurements, kept out of the summary so it stays reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Seconds spent in the optimizer.
    pub wall_time: f64,
    /// Per-iteration time relative to the benchmark run.
    pub norm_time: f64,
    /// Set when `wall_time` is not comparable across runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// One row of `trajectory.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x_pred: f64,
    pub v_pred: f64,
    pub a_pred: f64,
    pub x_d: f64,
    pub v_d: f64,
    pub a_d: f64,
    pub x_train: f64,
    pub v_train: f64,
}

/// One row of `losses.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub iteration: usize,
    pub mse_nn: f64,
    pub mse_i: f64,
    pub mse_d: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub summary: RunSummary,
    pub timing: Timing,
    pub trajectory: Vec<TrajectoryRow>,
    pub losses: Vec<LossRow>,
}

impl RunRecord {
    pub fn column(&self, f: impl Fn(&TrajectoryRow) -> f64) -> Vec<f64> {
        self.trajectory.iter().map(f).collect()
    }

    pub fn error_traces(&self) -> metrics::ErrorTraces {
        metrics::error_traces(
            &self.column(|r| r.v_pred),
            &self.column(|r| r.a_pred),
            &self.column(|r| r.v_d),
            &self.column(|r| r.a_d),
        )
        .expect("columns share one length")
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join(SUMMARY_FILE), &self.summary)?;
        write_json(&dir.join(TIMING_FILE), &self.timing)?;
        write_rows(&dir.join(LOSSES_FILE), &self.losses)?;
        write_rows(&dir.join(TRAJECTORY_FILE), &self.trajectory)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let summary = read_json(&dir.join(SUMMARY_FILE))?;
        let timing = read_json(&dir.join(TIMING_FILE))?;
        let losses = read_rows(&dir.join(LOSSES_FILE))?;
        let trajectory = read_rows(&dir.join(TRAJECTORY_FILE))?;
        let mut summary: RunSummary = summary;
        summary.config.output_dir = dir.to_path_buf();
        Ok(Self {
            summary,
            timing,
            trajectory,
            losses,
        })
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

pub(crate) fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Simulate, train and evaluate one configuration; nothing is written.
pub fn train(cfg: &ExperimentConfig) -> Result<(RunRecord, NetworkParams)> {
    cfg.validate()?;
    let data = sim::integrate(&cfg.vdp)?;
    let signal = DesiredSignal::new(cfg.amplitude)?;
    let desired = signal.sample(&data.t);
    let loss = ControlLoss::new(data.x.clone(), desired.clone(), cfg.amplitude, cfg.lambda_mode)?;

    let spec = cfg.layers.clone();
    let x0 = nn::init_params(&spec, cfg.seed).into_flat();
    let n_params = x0.len();
    let times = data.t.clone();
    let objective = |flat: &[f64]| match NetworkParams::from_flat(spec.clone(), flat.to_vec()) {
        Ok(params) => {
            let (value, info, gradient) = nn::loss_gradient(&params, &times, &loss);
            Evaluation {
                value,
                gradient,
                info,
            }
        }
        Err(_) => Evaluation {
            value: f64::NAN,
            gradient: vec![f64::NAN; n_params],
            info: crate::loss::total_loss(f64::NAN, f64::NAN, f64::NAN, cfg.lambda_mode),
        },
    };

    let mut losses = Vec::new();
    let started = Instant::now();
    let result = optim::minimize(
        objective,
        x0,
        &cfg.effective_optimizer(),
        |iteration, b: &LossBreakdown| {
            losses.push(LossRow {
                iteration,
                mse_nn: b.mse_nn,
                mse_i: b.mse_i,
                mse_d: b.mse_d,
                total: b.total,
            })
        },
    )?;
    let wall_time = started.elapsed().as_secs_f64();

    let params = NetworkParams::from_flat(spec, result.final_params)?;
    let jets = nn::forward_jets(&params, &data.t);
    let trajectory: Vec<TrajectoryRow> = (0..data.len())
        .map(|i| TrajectoryRow {
            t: data.t[i],
            x_pred: jets[i].val,
            v_pred: jets[i].d1,
            a_pred: jets[i].d2,
            x_d: desired[i].x,
            v_d: desired[i].v,
            a_d: desired[i].a,
            x_train: data.x[i],
            v_train: data.v[i],
        })
        .collect();

    let mask_eps = MASK_FRACTION * cfg.amplitude;
    let x_pred: Vec<f64> = jets.iter().map(|j| j.val).collect();
    let x_d: Vec<f64> = desired.iter().map(|d| d.x).collect();
    let abs_mean_err = metrics::abs_mean_error(&x_pred, &x_d, mask_eps)?;
    let mean_loss = if result.loss_history.is_empty() {
        result.final_loss
    } else {
        metrics::mean_loss(&result.loss_history)?
    };

    let note = (cfg.profile == Profile::Desk).then(|| {
        format!(
            "desk profile: optimizer capped at {} iterations; wall times are not comparable to full-budget runs",
            super::config::DESK_MAX_ITERS
        )
    });
    let record = RunRecord {
        summary: RunSummary {
            config: cfg.clone(),
            abs_mean_err,
            mask_eps,
            mean_loss,
            iterations: result.iterations,
            evaluations: result.evaluations,
            termination: result.termination,
            final_loss: result.final_info,
            parameter_count: n_params,
        },
        timing: Timing {
            wall_time,
            norm_time: 1.0,
            note,
        },
        trajectory,
        losses,
    };
    Ok((record, params))
}

/// Train and persist one configuration under `cfg.output_dir`. On failure a
/// `FAILED` marker holding the error message is left in the directory.
pub fn run_one(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let marker = dir.join(FAILURE_MARKER);
    if marker.exists() {
        std::fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    }
    let outcome = train(cfg).and_then(|(record, params)| {
        record.save(dir)?;
        params.write_checkpoint(&dir.join(PARAMS_FILE))?;
        Ok(record)
    });
    if let Err(e) = &outcome {
        std::fs::write(&marker, format!("{e}\n")).map_err(|io| Error::io(&marker, io))?;
    }
    outcome
}

/// Acceleration of the uncontrolled system at each trajectory row.
pub fn training_acceleration(record: &RunRecord) -> Vec<f64> {
    let mu = record.summary.config.vdp.mu;
    record
        .trajectory
        .iter()
        .map(|r| vdp_rhs([r.x_train, r.v_train], mu)[1])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LambdaMode;
    use crate::nn::LayerSpec;

    pub(crate) fn small_config(dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            layers: LayerSpec::hidden(1, 6).unwrap(),
            output_dir: dir.to_path_buf(),
            ..Default::default()
        };
        cfg.vdp.n_points = 200;
        cfg.optimizer.max_iters = 30;
        cfg
    }

    #[test]
    fn small_run_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let record = run_one(&cfg).unwrap();
        for f in [
            SUMMARY_FILE,
            TIMING_FILE,
            LOSSES_FILE,
            TRAJECTORY_FILE,
            PARAMS_FILE,
        ] {
            assert!(dir.path().join(f).exists(), "{f} missing");
        }
        assert!(!dir.path().join(FAILURE_MARKER).exists());
        assert_eq!(record.trajectory.len(), 200);
        assert_eq!(record.losses.len(), record.summary.iterations);
        assert!(record.summary.iterations >= 1);
        assert!(record.timing.wall_time > 0.0);
        assert_eq!(record.timing.norm_time, 1.0);

        let header = std::fs::read_to_string(dir.path().join(TRAJECTORY_FILE)).unwrap();
        assert!(header.starts_with("t,x_pred,v_pred,a_pred,x_d,v_d,a_d,x_train,v_train\n"));
        let header = std::fs::read_to_string(dir.path().join(LOSSES_FILE)).unwrap();
        assert!(header.starts_with("iteration,mse_nn,mse_i,mse_d,total\n"));

        let loaded = RunRecord::load(dir.path()).unwrap();
        assert_eq!(loaded.summary, record.summary);
        assert_eq!(loaded.trajectory.len(), record.trajectory.len());
    }

    #[test]
    fn loss_history_is_non_increasing() {
        let dir = tempfile::tempdir().unwrap();
        let record = train(&small_config(dir.path())).unwrap().0;
        assert!(record.losses.windows(2).all(|w| w[1].total <= w[0].total));
    }

    #[test]
    fn summary_omits_output_dir() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_one(&small_config(a.path())).unwrap();
        run_one(&small_config(b.path())).unwrap();
        for f in [SUMMARY_FILE, TRAJECTORY_FILE, LOSSES_FILE, PARAMS_FILE] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap(),
                "{f} differs"
            );
        }
    }

    #[test]
    fn failure_leaves_marker() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.lambda_mode = LambdaMode::Finite(1.0);
        cfg.amplitude = -2.0;
        assert!(run_one(&cfg).is_err());
        let msg = std::fs::read_to_string(dir.path().join(FAILURE_MARKER)).unwrap();
        assert!(msg.contains("amplitude"));

        cfg.amplitude = 2.0;
        run_one(&cfg).unwrap();
        assert!(!dir.path().join(FAILURE_MARKER).exists());
    }
}
