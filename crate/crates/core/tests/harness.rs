use std::collections::BTreeSet;
use std::path::Path;

use pidoc_core::harness::*;
use pidoc_core::nn::LayerSpec;
use pidoc_core::ExperimentConfig;

fn tiny(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.vdp.n_points = 60;
    cfg.layers = LayerSpec::hidden(1, 4).unwrap();
    cfg.optimizer.max_iters = 4;
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(str::to_string).collect()
}

fn file_names(paths: &[std::path::PathBuf]) -> BTreeSet<String> {
    paths
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect()
}

#[test]
fn every_preset_writes_its_table_schema() {
    let metrics = ["abs_mean_err", "T", "mean_loss", "norm_time"];
    let expected =
        |config: &[&str]| -> Vec<String> { config.iter().chain(&metrics).map(|s| s.to_string()).collect() };
    let root = tempfile::tempdir().unwrap();
    for (table, config_cols, rows) in [
        (TablePreset::Amplitude, &["Lambda"][..], 5),
        (TablePreset::InitialPosition, &["I"][..], 3),
        (TablePreset::Nonlinearity, &["mu"][..], 5),
        (TablePreset::ShapeLowNonlinearity, &["Layers", "Neurons"][..], 6),
        (TablePreset::ShapeHighNonlinearity, &["Layers", "Neurons"][..], 5),
        (TablePreset::LambdaWeight, &["lambda"][..], 5),
    ] {
        let dir = root.path().join(format!("{table:?}"));
        let mut base = tiny(&dir);
        base.optimizer.max_iters = 1;
        base.vdp.n_points = 20;
        let outcome = run_sweep(&table.sweep(base)).unwrap();
        assert_eq!(header(&dir.join(TABLE_FILE)), expected(config_cols), "{table:?}");
        assert_eq!(outcome.table.len(), rows, "{table:?}");
        assert!(outcome.table.iter().all(|row| row.len() == config_cols.len() + 4));
        let bench = &outcome.table[outcome.meta.benchmark];
        assert_eq!(bench.last().unwrap(), "1");
        let ones = outcome
            .table
            .iter()
            .filter(|row| row.last().unwrap() == "1")
            .count();
        assert_eq!(ones, 1, "{table:?}");
    }
}

#[test]
fn single_run_plot_bundle() {
    let dir = tempfile::tempdir().unwrap();
    run_one(&tiny(dir.path())).unwrap();
    let written = emit_plot_data_from_dir(dir.path()).unwrap();
    assert_eq!(
        file_names(&written),
        ["acceleration.csv", "manifest.json", "phase.csv", "position.csv"]
            .map(String::from)
            .into()
    );
    let fig = dir.path().join(FIGDATA_DIR);
    assert_eq!(header(&fig.join("phase.csv")), ["series", "x", "v"]);
    let text = std::fs::read_to_string(fig.join("position.csv")).unwrap();
    // desired, uncontrolled and controlled series, 60 rows each.
    assert_eq!(text.lines().count(), 1 + 3 * 60);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fig.join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest["files"].as_array().unwrap().len(), 3);
}

#[test]
fn sweep_plot_bundles_carry_their_extra_panels() {
    let root = tempfile::tempdir().unwrap();
    let common = [
        "acceleration.csv",
        "losses.csv",
        "manifest.json",
        "phase.csv",
        "position.csv",
    ];
    for (table, extra) in [
        (TablePreset::Amplitude, &[][..]),
        (
            TablePreset::Nonlinearity,
            &["error_acceleration.csv", "error_velocity.csv"][..],
        ),
        (TablePreset::LambdaWeight, &["phase_zoom.csv"][..]),
    ] {
        let dir = root.path().join(format!("{table:?}"));
        run_sweep(&table.sweep(tiny(&dir))).unwrap();
        let written = emit_plot_data_from_dir(&dir).unwrap();
        let expected: BTreeSet<String> = common.iter().chain(extra).map(|s| s.to_string()).collect();
        assert_eq!(file_names(&written), expected, "{table:?}");
    }
}

#[test]
fn nonlinearity_bundle_has_one_reference_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let spec = TablePreset::Nonlinearity.sweep(tiny(dir.path()));
    run_sweep(&spec).unwrap();
    emit_plot_data_from_dir(dir.path()).unwrap();
    let mut r = csv::Reader::from_path(dir.path().join(FIGDATA_DIR).join("phase.csv")).unwrap();
    let series: BTreeSet<String> = r.records().map(|rec| rec.unwrap()[0].to_string()).collect();
    // one desired, five uncontrolled, five controlled.
    assert_eq!(series.len(), 11, "{series:?}");
}

#[test]
fn parallel_and_serial_sweeps_agree() {
    let root = tempfile::tempdir().unwrap();
    let mut summaries = Vec::new();
    for serial in [true, false] {
        let dir = root.path().join(if serial { "serial" } else { "parallel" });
        let mut spec = TablePreset::Amplitude.sweep(tiny(&dir));
        spec.serial = serial;
        run_sweep(&spec).unwrap();
        let (meta, cells) = load_sweep(&dir).unwrap();
        assert_eq!(meta.timing_note.is_some(), !serial);
        summaries.push(
            meta.cells
                .iter()
                .map(|c| std::fs::read(dir.join(&c.dir).join(SUMMARY_FILE)).unwrap())
                .collect::<Vec<_>>(),
        );
        assert_eq!(cells.len(), 5);
    }
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn failed_cell_is_dropped_from_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let values = vec![SweepValue::Amplitude(2.0), SweepValue::Amplitude(-1.0)];
    let spec = SweepSpec::new(SweepKind::Amplitude, values, tiny(dir.path())).unwrap();
    let outcome = run_sweep(&spec).unwrap();
    assert_eq!(outcome.table.len(), 1);
    assert!(outcome.meta.cells[1].error.is_some());
    assert!(dir
        .path()
        .join(&outcome.meta.cells[1].dir)
        .join(FAILURE_MARKER)
        .exists());
    let (_, loaded) = load_sweep(dir.path()).unwrap();
    assert_eq!(loaded.len(), 1);
}
