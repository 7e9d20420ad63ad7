//! Desk-scale fixture against recorded outputs. Set `GSPLAN_BLESS=1` to
//! re-record after an intentional change.

use std::fs;
use std::path::Path;

use gsplan::config::load_config;
use gsplan::geogrid::GridSpec;
use gsplan::output::{write_sites_csv, write_stats_csv};
use gsplan::planner::{load_inputs, run_plan, InputKind};
use gsplan::synthetic::write_case_study;

fn check(name: &str, extra_config: &str) {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_case_study(tmp.path(), &GridSpec::global(1.0).unwrap(), 2023).unwrap();
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str(extra_config);
    fs::write(&path, text).unwrap();
    let cfg = load_config(&path).unwrap();
    let inputs = load_inputs(&cfg, &InputKind::ALL).unwrap();
    let outcome = run_plan(&cfg, &inputs).unwrap();
    assert!(outcome.invariant_violations().is_empty());

    let mut stats = Vec::new();
    write_stats_csv(&outcome.report, &mut stats).unwrap();
    let mut sites = Vec::new();
    write_sites_csv(&outcome.report, &mut sites).unwrap();

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for (suffix, bytes) in [("stats.csv", stats), ("sites.csv", sites)] {
        let golden = dir.join(format!("{name}_{suffix}"));
        if std::env::var_os("GSPLAN_BLESS").is_some() {
            fs::write(&golden, &bytes).unwrap();
        }
        let want = fs::read_to_string(&golden).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), want, "{} differs", golden.display());
    }
}

#[test]
fn desk_scale_walker_8x8() {
    check("desk_8x8", "");
}

#[test]
fn desk_scale_walker_16x16() {
    check("desk_16x16", "\n[constellation]\nplanes = 16\nsats_per_plane = 16\n");
}
