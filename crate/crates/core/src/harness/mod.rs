//! Experiment orchestration: configuration, single runs, sweeps and plot data.

mod config;
mod plot;
mod run;
mod sweep;

pub use config::{ConfigOverrides, ExperimentConfig, Profile, DESK_MAX_ITERS};
pub use plot::{
    emit_plot_data, emit_plot_data_from_dir, Manifest, ManifestEntry, PlotSet, DESIRED_SERIES, FIGDATA_DIR,
    MANIFEST_FILE, VDP_SERIES,
};
pub use run::{
    run_one, train, training_acceleration, LossRow, RunRecord, RunSummary, Timing, TrajectoryRow,
    FAILURE_MARKER, LOSSES_FILE, PARAMS_FILE, SUMMARY_FILE, TIMING_FILE, TRAJECTORY_FILE,
};
pub use sweep::{
    cell_dir_name, load_sweep, run_sweep, SweepCellMeta, SweepKind, SweepMeta, SweepOutcome, SweepSpec,
    SweepValue, TablePreset, METRIC_COLUMNS, SWEEP_META_FILE, TABLE_FILE,
};
