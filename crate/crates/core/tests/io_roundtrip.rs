use plate_core::diagnostics::{assemble_report, ReportInputs};
use plate_core::grid::{Container, Field, Grid, Support};
use plate_core::io::*;
use plate_core::optimizer::{certify_result, minimize_penalized, HistoryRow};
use plate_core::theory::PenaltyKind;
use plate_core::Error;

#[test]
fn minimal_config_gets_defaults() {
    let cfg =
        RunConfig::from_json_str(r#"{"dim": 2, "omega0": 2.5, "container": {"box": 3.0}}"#)
            .unwrap();
    assert_eq!(cfg.cells_per_side, 128);
    assert_eq!(cfg.tol, 1e-8);
    assert_eq!(cfg.penalty, PenaltyKind::NonRewarding);
    assert_eq!(cfg.init, InitSpec::Ball { volume_factor: 1.5 });
    let th = plate_core::theory::thresholds(2, 2.5, 1.0).unwrap();
    assert_eq!(cfg.resolved_eps().unwrap(), 0.9 * th.eps1);
}

#[test]
fn relative_eps_forms() {
    let cfg = RunConfig::from_json_str(
        r#"{"dim": 2, "omega0": 3.0, "container": {"box": 3.0}, "eps": {"fraction_of": "eps0", "factor": 0.5}}"#,
    )
    .unwrap();
    let th = plate_core::theory::thresholds(2, 3.0, 1.0).unwrap();
    assert_eq!(cfg.resolved_eps().unwrap(), 0.5 * th.eps0);
    let cfg = RunConfig::from_json_str(
        r#"{"dim": 2, "omega0": 3.0, "container": {"box": 3.0}, "eps": 0.125}"#,
    )
    .unwrap();
    assert_eq!(cfg.resolved_eps().unwrap(), 0.125);
}

#[test]
fn oversized_target_names_both_values() {
    let err = RunConfig::from_json_str(r#"{"dim": 2, "omega0": 9.0, "container": {"box": 3.0}}"#)
        .unwrap_err();
    let msg = err.to_string();
    assert!(
        msg.contains("omega0 = 9") && msg.contains("measure 9"),
        "{msg}"
    );
}

#[test]
fn unknown_field_reports_path() {
    let err = RunConfig::from_json_str(
        r#"{"dim": 2, "omega0": 1.0, "container": {"box": 3.0}, "diagnostics": {"enabled": true, "bogus": 1}}"#,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    assert!(err.to_string().contains("diagnostics"), "{err}");
}

#[test]
fn syntax_error_has_position() {
    let err = RunConfig::from_json_str("{\"dim\": 2,\n \"omega0\": }").unwrap_err();
    assert!(matches!(err, Error::Json { .. }));
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn empty_history_is_header_only() {
    let rows: Vec<HistoryRow<f64>> = Vec::new();
    assert_eq!(history_csv(&rows), "iter,I,lambda,volume,moved_cells\n");
}

#[test]
fn twelve_significant_digits() {
    assert_eq!(format_sig12(14.681970642123646), "14.6819706421");
    assert_eq!(format_sig12(3.0), "3.00000000000");
    assert_eq!(format_sig12(0.000123456789012345), "0.000123456789012");
    assert_eq!(format_sig12(9.9999999999999), "10.0000000000");
    assert_eq!(format_sig12(0.0), "0");
}

#[test]
fn pgm_of_indicator() {
    let g = Grid::<f64>::build(2, 16, Container::Box { side: 1.0 }).unwrap();
    let active: Vec<bool> = (0..g.node_count())
        .map(|i| g.in_container(i) && g.axis_index(i, 1) > 10)
        .collect();
    let s = Support::from_active(g.clone(), active).unwrap();
    let values: Vec<f64> = s
        .active()
        .iter()
        .map(|&a| if a { 1.0 } else { 0.0 })
        .collect();
    let (bytes, scale) = pgm_bytes(&g, &values);
    let header = b"P5\n16 16\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    let pixels = &bytes[header.len()..];
    assert_eq!(pixels.len(), 16 * 16);
    assert_eq!(scale, PgmScale { min: 0.0, max: 1.0 });
    // top row is y index 15, which is active except at x = 0
    assert_eq!(pixels[0], 0);
    assert_eq!(pixels[1], 255);
    // bottom row is y index 0, inactive
    assert!(pixels[15 * 16..].iter().all(|&p| p == 0));
    assert!(pixels.iter().all(|&p| p == 0 || p == 255));
}

#[test]
fn field_csv_restores_support() {
    let g = Grid::<f64>::build(2, 12, Container::Box { side: 1.0 }).unwrap();
    let f = Field::from_fn(g.clone(), |p| {
        if p[0] > 0.3 && p[0] < 0.7 && p[1] > 0.2 && p[1] < 0.6 {
            p[0]
        } else {
            0.0
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    write_field_csv(&path, &f).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("i,j,x,y,u\n"));
    let s = read_support_csv(&path, &g).unwrap();
    let expected = plate_core::grid::support_of(&f, 0.0);
    assert_eq!(s, expected);
}

#[test]
fn result_json_round_trips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::from_json_str(
        r#"{"dim": 2, "omega0": 3.141592653589793, "container": {"box": 3.0}, "cells_per_side": 24}"#,
    )
    .unwrap();
    cfg.output_dir = dir.path().join("out");
    let prep = cfg.prepare().unwrap();
    let result = minimize_penalized(&prep.optimize).unwrap();
    let cert = certify_result(&result, &prep.thresholds, &prep.params).unwrap();
    let mut inputs = ReportInputs::new(&result.support, Some(&result.eig), prep.thresholds.c_n);
    inputs.monotonicity_pairs = 1;
    let report = assemble_report(&inputs);
    let record = RunRecord {
        config: &cfg,
        thresholds: &prep.thresholds,
        result: &result,
        certificate: &cert,
        report: Some(&report),
    };
    let paths = cfg.output_paths();
    write_outputs(&record, &paths).unwrap();
    let stored = read_result(&paths.result()).unwrap();
    assert_eq!(stored.volume.to_bits(), result.volume.to_bits());
    assert_eq!(stored.lambda.to_bits(), result.eig.lambda.to_bits());
    assert_eq!(stored.i_eps.to_bits(), result.i_eps.to_bits());
    assert_eq!(
        stored.support().unwrap().indices(),
        result.support.indices()
    );
    assert_eq!(stored.config.cells_per_side, 24);

    let history = std::fs::read_to_string(paths.history()).unwrap();
    assert_eq!(history.lines().count(), result.history.len() + 1);
    let pgm = std::fs::read(paths.field_image()).unwrap();
    assert_eq!(pgm.len(), b"P5\n24 24\n255\n".len() + 24 * 24);
}
