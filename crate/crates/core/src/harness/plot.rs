//! Plot-ready CSV bundles.
//!
//! Every data file is in long format with a leading `series` column so any
//! plotting tool can split it by label; `manifest.json` lists each file's
//! panel, columns and series.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::{training_acceleration, write_json, RunRecord, TrajectoryRow, SUMMARY_FILE};
use super::sweep::{load_sweep, SweepKind, SweepValue, SWEEP_META_FILE};
use crate::error::{Error, Result};
use crate::loss::LambdaMode;

pub const FIGDATA_DIR: &str = "figdata";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Series label for the desired trajectory.
pub const DESIRED_SERIES: &str = "desired";
/// Series label for the uncontrolled oscillator.
pub const VDP_SERIES: &str = "vdp";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub panel: String,
    pub columns: Vec<String>,
    pub series: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub source: String,
    pub files: Vec<ManifestEntry>,
}

/// What a set of records came from; decides which extra panels are emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotSet {
    Single,
    Sweep(SweepKind),
}

type Column = fn(&TrajectoryRow) -> f64;
type Series = Box<dyn Fn(&RunRecord) -> Vec<Vec<f64>>>;

struct Bundle<'a> {
    dir: &'a Path,
    entries: Vec<ManifestEntry>,
    written: Vec<PathBuf>,
}

impl Bundle<'_> {
    fn file(
        &mut self,
        name: &str,
        panel: &str,
        columns: &[&str],
        series: Vec<(String, Vec<Vec<f64>>)>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        let mut header = vec!["series"];
        header.extend_from_slice(columns);
        w.write_record(&header)?;
        for (label, cols) in &series {
            let n = cols.first().map_or(0, Vec::len);
            for i in 0..n {
                let mut rec = vec![label.clone()];
                rec.extend(cols.iter().map(|c| c[i].to_string()));
                w.write_record(&rec)?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.entries.push(ManifestEntry {
            file: name.to_string(),
            panel: panel.to_string(),
            columns: header.iter().map(|s| s.to_string()).collect(),
            series: series.into_iter().map(|(l, _)| l).collect(),
        });
        self.written.push(path);
        Ok(())
    }
}

/// Write the plot bundle for `records` (label, record) into `out_dir`.
///
/// The first record supplies the desired and uncontrolled reference series,
/// except for sweeps that change the training data (initial point and mu),
/// where every cell contributes its own uncontrolled trajectory.
pub fn emit_plot_data(
    records: &[(String, &RunRecord)],
    set: PlotSet,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let (_, first) = records
        .first()
        .ok_or_else(|| Error::InvalidConfig("no records to plot".into()))?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut bundle = Bundle {
        dir: out_dir,
        entries: Vec::new(),
        written: Vec::new(),
    };

    let per_cell_data = matches!(
        set,
        PlotSet::Sweep(SweepKind::InitialPosition) | PlotSet::Sweep(SweepKind::Nonlinearity)
    );
    let per_cell_desired = matches!(set, PlotSet::Sweep(SweepKind::Amplitude));

    let desired_series = |rec: &RunRecord, label: String, cols: &[Column]| {
        (label, cols.iter().map(|f| rec.column(f)).collect::<Vec<_>>())
    };

    let reference = |f_desired: &[Column], f_vdp: Series| {
        let mut out = Vec::new();
        if per_cell_desired {
            for (label, rec) in records {
                out.push(desired_series(
                    rec,
                    format!("{DESIRED_SERIES} {label}"),
                    f_desired,
                ));
            }
        } else {
            out.push(desired_series(first, DESIRED_SERIES.to_string(), f_desired));
        }
        if per_cell_data {
            for (label, rec) in records {
                out.push((format!("{VDP_SERIES} {label}"), f_vdp(rec)));
            }
        } else {
            out.push((VDP_SERIES.to_string(), f_vdp(first)));
        }
        out
    };

    let mut phase = reference(
        &[|r| r.x_d, |r| r.v_d],
        Box::new(|r: &RunRecord| vec![r.column(|q| q.x_train), r.column(|q| q.v_train)]),
    );
    let mut position = reference(
        &[|r| r.t, |r| r.x_d],
        Box::new(|r: &RunRecord| vec![r.column(|q| q.t), r.column(|q| q.x_train)]),
    );
    let mut acceleration = reference(
        &[|r| r.t, |r| r.a_d],
        Box::new(|r: &RunRecord| vec![r.column(|q| q.t), training_acceleration(r)]),
    );
    for (label, rec) in records {
        phase.push((
            label.clone(),
            vec![rec.column(|r| r.x_pred), rec.column(|r| r.v_pred)],
        ));
        position.push((label.clone(), vec![rec.column(|r| r.t), rec.column(|r| r.x_pred)]));
        acceleration.push((label.clone(), vec![rec.column(|r| r.t), rec.column(|r| r.a_pred)]));
    }

    bundle.file("phase.csv", "phase portrait (x, v)", &["x", "v"], phase)?;
    bundle.file("position.csv", "position against time", &["t", "x"], position)?;
    bundle.file(
        "acceleration.csv",
        "acceleration against time",
        &["t", "a"],
        acceleration,
    )?;

    if let PlotSet::Sweep(kind) = set {
        let losses = records
            .iter()
            .map(|(label, rec)| {
                let it = rec.losses.iter().map(|l| l.iteration as f64).collect();
                let total = rec.losses.iter().map(|l| l.total).collect();
                (label.clone(), vec![it, total])
            })
            .collect();
        bundle.file(
            "losses.csv",
            "loss against iteration",
            &["iteration", "total"],
            losses,
        )?;

        match kind {
            SweepKind::Nonlinearity => {
                let (mut acc, mut vel) = (Vec::new(), Vec::new());
                for (label, rec) in records {
                    let e = rec.error_traces();
                    acc.push((label.clone(), vec![rec.column(|r| r.t), e.acceleration]));
                    vel.push((label.clone(), vec![rec.column(|r| r.t), e.velocity]));
                }
                bundle.file(
                    "error_acceleration.csv",
                    "acceleration error, desired minus predicted",
                    &["t", "e_acc"],
                    acc,
                )?;
                bundle.file(
                    "error_velocity.csv",
                    "velocity error, desired minus predicted",
                    &["t", "e_vel"],
                    vel,
                )?;
            }
            SweepKind::LambdaWeight => {
                let zoom = records
                    .iter()
                    .filter(|(_, rec)| match rec.summary.config.lambda_mode {
                        LambdaMode::Infinite => true,
                        LambdaMode::Finite(l) => l >= 1e3,
                    })
                    .map(|(label, rec)| {
                        (
                            label.clone(),
                            vec![rec.column(|r| r.x_pred), rec.column(|r| r.v_pred)],
                        )
                    })
                    .collect();
                bundle.file(
                    "phase_zoom.csv",
                    "phase portrait of the heavily weighted runs at small scale",
                    &["x", "v"],
                    zoom,
                )?;
            }
            _ => {}
        }
    }

    let manifest = Manifest {
        source: match set {
            PlotSet::Single => "run".to_string(),
            PlotSet::Sweep(kind) => format!("{kind} sweep"),
        },
        files: bundle.entries,
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    write_json(&manifest_path, &manifest)?;
    let mut written = bundle.written;
    written.push(manifest_path);
    Ok(written)
}

/// Emit `figdata/` for a run or sweep directory.
pub fn emit_plot_data_from_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let out = dir.join(FIGDATA_DIR);
    if dir.join(SWEEP_META_FILE).exists() {
        let (meta, cells) = load_sweep(dir)?;
        let labelled: Vec<(String, &RunRecord)> = cells
            .iter()
            .map(|(v, r): &(SweepValue, RunRecord)| (v.label(), r))
            .collect();
        emit_plot_data(&labelled, PlotSet::Sweep(meta.kind), &out)
    } else if dir.join(SUMMARY_FILE).exists() {
        let record = RunRecord::load(dir)?;
        emit_plot_data(&[("pidoc".to_string(), &record)], PlotSet::Single, &out)
    } else {
        Err(Error::InvalidConfig(format!(
            "{} holds neither {SUMMARY_FILE} nor {SWEEP_META_FILE}",
            dir.display()
        )))
    }
}
