use nalgebra::{dmatrix, dvector};
use sttmpc::simulator::{run_closed_loop, Scenario};
use sttmpc_cli::config::ExperimentConfig;
use sttmpc_cli::plot::{emit_plots, trajectory_svg, tube_polygon, volume_svg};
use sttmpc_cli::table::*;

fn groups() -> Vec<VolumeGroup> {
    vec![
        VolumeGroup { delta: 0.01, runs: vec![vec![1.0, 0.5, 0.2], vec![1.0, 0.3, 0.1]] },
        VolumeGroup { delta: 0.1, runs: vec![vec![1.0, 0.4, 0.04]] },
    ]
}

#[test]
fn mean_and_standard_error_by_hand() {
    // Values 50 and 30: mean 40, sample sd 14.142, se = sd / sqrt(2) = 10.
    let (m, se) = mean_and_se(&groups()[0].runs, 2);
    assert!((m - 40.0).abs() < 1e-12 && (se - 10.0).abs() < 1e-12);
    let (m, se) = mean_and_se(&groups()[1].runs, 3);
    assert!((m - 4.0).abs() < 1e-12 && se == 0.0);
    assert!(mean_and_se(&groups()[1].runs, 4).0.is_nan());
}

#[test]
fn csv_golden() {
    let table = aggregate_volumes(&groups(), &[1, 2, 3]);
    let expected = "delta,seeds,mean_t1,se_t1,mean_t2,se_t2,mean_t3,se_t3\n\
                    1e-1,1,100,0,40,0,4,0\n\
                    1e-2,2,100,0,40,10,15,5\n";
    assert_eq!(table.to_csv(), expected);
    let text = table.to_text();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().next().unwrap().trim_start().starts_with("delta"));
    assert!(text.contains("100.00% ± 0.00%"));
}

#[test]
fn too_short_runs_show_a_dash() {
    let text = aggregate_volumes(&groups(), &[3, 5]).to_text();
    assert!(text.lines().nth(1).unwrap().trim_end().ends_with('-'));
}

#[test]
fn delta_dir_names_round_trip() {
    for d in [1e-1, 1e-2, 1e-3, 1e-4] {
        let name = delta_dir_name(d);
        assert_eq!(name.strip_prefix("delta_").unwrap().parse::<f64>().unwrap(), d);
    }
    assert_eq!(delta_dir_name(0.1), "delta_1e-1");
}

#[test]
fn volume_svg_is_well_formed() {
    let svg = volume_svg(&groups()).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 2);
    assert!(volume_svg(&[]).is_none());
}

#[test]
fn square_tube_polygon() {
    let t = dmatrix![1.0, 0.0; -1.0, 0.0; 0.0, 1.0; 0.0, -1.0];
    let p = tube_polygon(&t, &dvector![1.0, 1.0, 2.0, 2.0]).unwrap();
    assert_eq!(p.len(), 4);
    let area: f64 = (0..4).map(|i| {
        let (a, b) = (p[i], p[(i + 1) % 4]);
        a.0 * b.1 - b.0 * a.1
    }).sum::<f64>() / 2.0;
    // Counterclockwise order gives a positive shoelace area of 2 × 4.
    assert!((area - 8.0).abs() < 1e-9);
}

#[test]
fn trajectory_svg_for_a_short_run() {
    let cfg = ExperimentConfig::parse(sttmpc_cli::config::PAPER_TOML, &["experiment.steps=6".into()]).unwrap();
    let sc: Scenario = cfg.scenario();
    let (plant, setup) = (sc.plant().unwrap(), sc.setup().unwrap());
    let tr = run_closed_loop(&plant, &cfg.run_config(0.1, 0).unwrap(), &setup).unwrap();
    // The first tube cross section contains x0.
    let s1 = tr.step(1).unwrap();
    let alpha0 = &s1.alpha[0];
    assert!((&setup.design.t * &s1.x - alpha0).max() <= 1e-9);
    assert!(tube_polygon(&setup.design.t, alpha0).is_some());
    let svg = trajectory_svg(&tr, &setup.design, &[1, 5]).unwrap();
    roxmltree::Document::parse(&svg).unwrap();
}

#[test]
fn emit_plots_on_empty_dir_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_plots(dir.path()).unwrap().is_empty());
    assert!(!dir.path().join("plots").exists());
    assert!(load_groups(dir.path()).unwrap().is_empty());
}
