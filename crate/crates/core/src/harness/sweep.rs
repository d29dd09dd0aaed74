//! Parameter sweeps and the comparison tables they produce.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{read_json, run_one, write_json, RunRecord, TIMING_FILE};
use crate::error::{Error, Result};
use crate::loss::LambdaMode;
use crate::metrics::normalized_time;
use crate::nn::LayerSpec;

pub const TABLE_FILE: &str = "table.csv";
pub const SWEEP_META_FILE: &str = "sweep.json";

/// Metric columns shared by every table.
pub const METRIC_COLUMNS: [&str; 4] = ["abs_mean_err", "T", "mean_loss", "norm_time"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Amplitude,
    #[serde(rename = "initial")]
    InitialPosition,
    #[serde(rename = "mu")]
    Nonlinearity,
    #[serde(rename = "shape")]
    NetworkShape,
    #[serde(rename = "lambda")]
    LambdaWeight,
}

impl SweepKind {
    pub const ALL: [SweepKind; 5] = [
        Self::Amplitude,
        Self::InitialPosition,
        Self::Nonlinearity,
        Self::NetworkShape,
        Self::LambdaWeight,
    ];

    /// Leading configuration columns of this kind's table.
    pub fn config_columns(self) -> &'static [&'static str] {
        match self {
            Self::Amplitude => &["Lambda"],
            Self::InitialPosition => &["I"],
            Self::Nonlinearity => &["mu"],
            Self::NetworkShape => &["Layers", "Neurons"],
            Self::LambdaWeight => &["lambda"],
        }
    }

    pub fn columns(self) -> Vec<&'static str> {
        self.config_columns()
            .iter()
            .chain(METRIC_COLUMNS.iter())
            .copied()
            .collect()
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Amplitude => "amplitude",
            Self::InitialPosition => "initial",
            Self::Nonlinearity => "mu",
            Self::NetworkShape => "shape",
            Self::LambdaWeight => "lambda",
        })
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.to_string() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown sweep kind {s:?}")))
    }
}

/// One override applied on top of the sweep's base configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepValue {
    Amplitude(f64),
    Initial([f64; 2]),
    Mu(f64),
    Shape(LayerSpec),
    Lambda(LambdaMode),
}

impl SweepValue {
    pub fn kind(&self) -> SweepKind {
        match self {
            Self::Amplitude(_) => SweepKind::Amplitude,
            Self::Initial(_) => SweepKind::InitialPosition,
            Self::Mu(_) => SweepKind::Nonlinearity,
            Self::Shape(_) => SweepKind::NetworkShape,
            Self::Lambda(_) => SweepKind::LambdaWeight,
        }
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        match self {
            Self::Amplitude(a) => cfg.amplitude = *a,
            Self::Initial(p) => cfg.vdp.initial = *p,
            Self::Mu(m) => cfg.vdp.mu = *m,
            Self::Shape(s) => cfg.layers = s.clone(),
            Self::Lambda(l) => cfg.lambda_mode = *l,
        }
    }

    /// The value as read off `cfg`, for locating the benchmark cell.
    fn of(kind: SweepKind, cfg: &ExperimentConfig) -> Self {
        match kind {
            SweepKind::Amplitude => Self::Amplitude(cfg.amplitude),
            SweepKind::InitialPosition => Self::Initial(cfg.vdp.initial),
            SweepKind::Nonlinearity => Self::Mu(cfg.vdp.mu),
            SweepKind::NetworkShape => Self::Shape(cfg.layers.clone()),
            SweepKind::LambdaWeight => Self::Lambda(cfg.lambda_mode),
        }
    }

    /// Table cells for the configuration columns.
    pub fn cells(&self) -> Vec<String> {
        match self {
            Self::Amplitude(a) => vec![a.to_string()],
            Self::Initial([x, v]) => vec![format!("({x}, {v})")],
            Self::Mu(m) => vec![m.to_string()],
            Self::Shape(s) => {
                let hidden = s.hidden_layers();
                let neurons = match s.uniform_shape() {
                    Some((_, w)) => w.to_string(),
                    None => hidden.iter().map(|w| w.to_string()).collect::<Vec<_>>().join("-"),
                };
                vec![hidden.len().to_string(), neurons]
            }
            Self::Lambda(l) => vec![l.to_string()],
        }
    }

    /// Short series label, also used in cell directory names.
    pub fn label(&self) -> String {
        match self {
            Self::Amplitude(a) => format!("Lambda={a}"),
            Self::Initial([x, v]) => format!("I=({x},{v})"),
            Self::Mu(m) => format!("mu={m}"),
            Self::Shape(s) => s.to_string(),
            Self::Lambda(l) => format!("lambda={l}"),
        }
    }

    pub fn parse(kind: SweepKind, s: &str) -> Result<Self> {
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("cannot parse {s:?} as a number")))
        };
        Ok(match kind {
            SweepKind::Amplitude => Self::Amplitude(num(s)?),
            SweepKind::Nonlinearity => Self::Mu(num(s)?),
            SweepKind::NetworkShape => Self::Shape(s.parse()?),
            SweepKind::LambdaWeight => Self::Lambda(s.parse()?),
            SweepKind::InitialPosition => {
                let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
                let (x, v) = inner.split_once([',', ':']).ok_or_else(|| {
                    Error::InvalidConfig(format!("initial point {s:?} should look like x0:v0"))
                })?;
                Self::Initial([num(x)?, num(v)?])
            }
        })
    }
}

/// Preset sweeps, one per comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TablePreset {
    /// Amplitude 1 to 5.
    Amplitude,
    /// Initial points (1, 0), (5, 0), (0, 5).
    InitialPosition,
    /// mu in {1, 3, 5, 7, 9}.
    Nonlinearity,
    /// Six network shapes at mu = 1.
    ShapeLowNonlinearity,
    /// Deeper 30-wide networks at mu = 5.
    ShapeHighNonlinearity,
    /// lambda in {0, 1, 10, 1e3, inf}.
    LambdaWeight,
}

impl TablePreset {
    pub const ALL: [TablePreset; 6] = [
        Self::Amplitude,
        Self::InitialPosition,
        Self::Nonlinearity,
        Self::ShapeLowNonlinearity,
        Self::ShapeHighNonlinearity,
        Self::LambdaWeight,
    ];

    pub fn kind(self) -> SweepKind {
        match self {
            Self::Amplitude => SweepKind::Amplitude,
            Self::InitialPosition => SweepKind::InitialPosition,
            Self::Nonlinearity => SweepKind::Nonlinearity,
            Self::ShapeLowNonlinearity | Self::ShapeHighNonlinearity => SweepKind::NetworkShape,
            Self::LambdaWeight => SweepKind::LambdaWeight,
        }
    }

    /// Preset for a sweep kind; shape sweeps pick the table by the base mu.
    pub fn for_kind(kind: SweepKind, base: &ExperimentConfig) -> Self {
        match kind {
            SweepKind::Amplitude => Self::Amplitude,
            SweepKind::InitialPosition => Self::InitialPosition,
            SweepKind::Nonlinearity => Self::Nonlinearity,
            SweepKind::NetworkShape if base.vdp.mu >= 5.0 => Self::ShapeHighNonlinearity,
            SweepKind::NetworkShape => Self::ShapeLowNonlinearity,
            SweepKind::LambdaWeight => Self::LambdaWeight,
        }
    }

    fn values(self) -> Vec<SweepValue> {
        let shapes = |list: &[(usize, usize)]| {
            list.iter()
                .map(|&(d, w)| SweepValue::Shape(LayerSpec::hidden(d, w).expect("valid preset")))
                .collect()
        };
        match self {
            Self::Amplitude => (1..=5).map(|a| SweepValue::Amplitude(a as f64)).collect(),
            Self::InitialPosition => [[1.0, 0.0], [5.0, 0.0], [0.0, 5.0]]
                .into_iter()
                .map(SweepValue::Initial)
                .collect(),
            Self::Nonlinearity => [1.0, 3.0, 5.0, 7.0, 9.0]
                .into_iter()
                .map(SweepValue::Mu)
                .collect(),
            Self::ShapeLowNonlinearity => shapes(&[(1, 30), (3, 30), (6, 30), (1, 10), (3, 10), (6, 10)]),
            Self::ShapeHighNonlinearity => shapes(&[(6, 30), (9, 30), (15, 30), (30, 30), (50, 30)]),
            Self::LambdaWeight => [
                LambdaMode::Finite(0.0),
                LambdaMode::Finite(1.0),
                LambdaMode::Finite(10.0),
                LambdaMode::Finite(1e3),
                LambdaMode::Infinite,
            ]
            .into_iter()
            .map(SweepValue::Lambda)
            .collect(),
        }
    }

    /// The preset sweep on top of `base`.
    pub fn sweep(self, mut base: ExperimentConfig) -> SweepSpec {
        if self == Self::ShapeHighNonlinearity {
            base.vdp.mu = 5.0;
        }
        SweepSpec::new(self.kind(), self.values(), base).expect("presets are well formed")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub values: Vec<SweepValue>,
    pub base: ExperimentConfig,
    /// Cell whose per-iteration time normalizes the `norm_time` column.
    pub benchmark: usize,
    /// Run cells one at a time so that wall times are comparable.
    pub serial: bool,
}

impl SweepSpec {
    /// The benchmark cell is the one matching `base`, else the first.
    pub fn new(kind: SweepKind, values: Vec<SweepValue>, base: ExperimentConfig) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfig("a sweep needs at least one value".into()));
        }
        if let Some(v) = values.iter().find(|v| v.kind() != kind) {
            return Err(Error::InvalidConfig(format!(
                "value {} does not belong to a {kind} sweep",
                v.label()
            )));
        }
        let own = SweepValue::of(kind, &base);
        let benchmark = values.iter().position(|v| *v == own).unwrap_or(0);
        Ok(Self {
            kind,
            values,
            base,
            benchmark,
            serial: true,
        })
    }

    pub fn cell_config(&self, index: usize) -> ExperimentConfig {
        let mut cfg = self.base.clone();
        self.values[index].apply(&mut cfg);
        cfg.output_dir = self
            .base
            .output_dir
            .join(cell_dir_name(index, &self.values[index]));
        cfg
    }
}

pub fn cell_dir_name(index: usize, value: &SweepValue) -> String {
    let label: String = value
        .label()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("cell{index:02}_{label}")
}

/// Sidecar describing a sweep directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub kind: SweepKind,
    pub benchmark: usize,
    pub cells: Vec<SweepCellMeta>,
    /// Set when cells ran concurrently and `T` is indicative only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCellMeta {
    pub value: SweepValue,
    pub dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    /// One entry per cell, in sweep order.
    pub records: Vec<Result<RunRecord>>,
    pub table: Vec<Vec<String>>,
    pub meta: SweepMeta,
}

impl SweepOutcome {
    pub fn record(&self, index: usize) -> Option<&RunRecord> {
        self.records.get(index).and_then(|r| r.as_ref().ok())
    }
}

/// Run every cell, fill in `norm_time` against the benchmark cell and write
/// `table.csv` plus `sweep.json` under the base output directory.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    let root = &spec.base.output_dir;
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let run_cell = |i: usize| run_one(&spec.cell_config(i));
    let mut records: Vec<Result<RunRecord>> = if spec.serial {
        (0..spec.values.len()).map(run_cell).collect()
    } else {
        (0..spec.values.len()).into_par_iter().map(run_cell).collect()
    };

    let bench = records
        .get(spec.benchmark)
        .and_then(|r| r.as_ref().ok())
        .map(|r| (r.timing.wall_time, r.summary.iterations.max(1)));
    let timing_note = (!spec.serial).then(|| "cells ran concurrently; T is indicative only".to_string());
    for (i, rec) in records.iter_mut().enumerate() {
        if let Ok(rec) = rec {
            rec.timing.norm_time = if i == spec.benchmark {
                1.0
            } else if let Some((t, m)) = bench {
                normalized_time(rec.timing.wall_time, rec.summary.iterations.max(1), t, m)
            } else {
                f64::NAN
            };
            if let Some(note) = &timing_note {
                rec.timing.note = Some(note.clone());
            }
            write_json(&spec.cell_config(i).output_dir.join(TIMING_FILE), &rec.timing)?;
        }
    }

    let mut table = Vec::new();
    let mut cells = Vec::new();
    for (i, (value, rec)) in spec.values.iter().zip(&records).enumerate() {
        let dir = PathBuf::from(cell_dir_name(i, value));
        match rec {
            Ok(r) => {
                let mut row = value.cells();
                row.extend([
                    r.summary.abs_mean_err.to_string(),
                    r.timing.wall_time.to_string(),
                    r.summary.mean_loss.to_string(),
                    r.timing.norm_time.to_string(),
                ]);
                table.push(row);
                cells.push(SweepCellMeta {
                    value: value.clone(),
                    dir,
                    error: None,
                });
            }
            Err(e) => cells.push(SweepCellMeta {
                value: value.clone(),
                dir,
                error: Some(e.to_string()),
            }),
        }
    }

    write_table(&root.join(TABLE_FILE), spec.kind, &table)?;
    let meta = SweepMeta {
        kind: spec.kind,
        benchmark: spec.benchmark,
        cells,
        timing_note,
    };
    write_json(&root.join(SWEEP_META_FILE), &meta)?;
    Ok(SweepOutcome { records, table, meta })
}

fn write_table(path: &Path, kind: SweepKind, rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(kind.columns())?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Load a finished sweep directory: its metadata and every successful cell.
pub fn load_sweep(root: &Path) -> Result<(SweepMeta, Vec<(SweepValue, RunRecord)>)> {
    let meta: SweepMeta = read_json(&root.join(SWEEP_META_FILE))?;
    let mut cells = Vec::new();
    for cell in &meta.cells {
        if cell.error.is_none() {
            cells.push((cell.value.clone(), RunRecord::load(&root.join(&cell.dir))?));
        }
    }
    Ok((meta, cells))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_table_rows() {
        let base = ExperimentConfig::default();
        let t1 = TablePreset::Amplitude.sweep(base.clone());
        assert_eq!(t1.values.len(), 5);
        assert_eq!(t1.values[t1.benchmark], SweepValue::Amplitude(2.0));

        let t2 = TablePreset::InitialPosition.sweep(base.clone());
        assert_eq!(t2.benchmark, 0);
        assert_eq!(t2.values[2].cells(), vec!["(0, 5)"]);

        let t3 = TablePreset::Nonlinearity.sweep(base.clone());
        assert_eq!(t3.values.len(), 5);
        assert_eq!(t3.benchmark, 0);

        let t4 = TablePreset::ShapeLowNonlinearity.sweep(base.clone());
        assert_eq!(t4.values.len(), 6);
        assert_eq!(t4.values[t4.benchmark].cells(), vec!["6", "30"]);

        let t5 = TablePreset::ShapeHighNonlinearity.sweep(base.clone());
        assert_eq!(t5.base.vdp.mu, 5.0);
        assert_eq!(t5.values[4].cells(), vec!["50", "30"]);
        assert_eq!(t5.benchmark, 0);

        let t6 = TablePreset::LambdaWeight.sweep(base);
        assert_eq!(
            t6.values[t6.benchmark],
            SweepValue::Lambda(LambdaMode::Finite(1.0))
        );
        assert_eq!(t6.values[4].cells(), vec!["inf"]);
    }

    #[test]
    fn sweep_value_parsing() {
        assert_eq!(
            SweepValue::parse(SweepKind::InitialPosition, "(5, 0)").unwrap(),
            SweepValue::Initial([5.0, 0.0])
        );
        assert_eq!(
            SweepValue::parse(SweepKind::InitialPosition, "0:5").unwrap(),
            SweepValue::Initial([0.0, 5.0])
        );
        assert_eq!(
            SweepValue::parse(SweepKind::LambdaWeight, "inf").unwrap(),
            SweepValue::Lambda(LambdaMode::Infinite)
        );
        assert!(SweepValue::parse(SweepKind::Nonlinearity, "x").is_err());
        assert_eq!("shape".parse::<SweepKind>().unwrap(), SweepKind::NetworkShape);
        assert!("bogus".parse::<SweepKind>().is_err());
    }

    #[test]
    fn mixed_values_are_rejected() {
        let base = ExperimentConfig::default();
        let values = vec![SweepValue::Mu(1.0), SweepValue::Amplitude(2.0)];
        assert!(SweepSpec::new(SweepKind::Nonlinearity, values, base.clone()).is_err());
        assert!(SweepSpec::new(SweepKind::Nonlinearity, vec![], base).is_err());
    }

    #[test]
    fn cell_dirs_are_filesystem_safe() {
        let name = cell_dir_name(3, &SweepValue::Initial([0.0, 5.0]));
        assert_eq!(name, "cell03_I__0_5_");
        assert_eq!(
            cell_dir_name(0, &SweepValue::Lambda(LambdaMode::Finite(1000.0))),
            "cell00_lambda_1000"
        );
    }
}
