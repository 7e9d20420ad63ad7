use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use gsplan::geogrid::GridSpec;
use gsplan::synthetic::write_case_study;
use gsplan_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(gsplan_last_error()) }.to_string_lossy().into_owned()
}

fn reference_inputs() -> GsplanRainInputs {
    GsplanRainInputs {
        frequency_ghz: 30.0,
        elevation_deg: 10.0,
        polarization_tilt_deg: 45.0,
        rain_rate_mm_h: 30.0,
        rain_height_km: 5.0,
        station_height_km: 0.0,
        latitude_deg: 45.0,
    }
}

#[test]
fn attenuation_through_a_table_handle() {
    unsafe {
        let mut table = ptr::null_mut();
        assert_eq!(gsplan_table_bundled(&mut table), GsplanStatus::Ok);
        let mut db = 0.0;
        assert_eq!(gsplan_rain_attenuation(table, &reference_inputs(), &mut db), GsplanStatus::Ok);
        assert!((db - 71.60091331819078).abs() < 1e-9, "{db}");

        let bad = GsplanRainInputs { frequency_ghz: 500.0, ..reference_inputs() };
        assert_eq!(gsplan_rain_attenuation(table, &bad, &mut db), GsplanStatus::InvalidArgument);
        assert!(last_error().contains("500"));
        assert_eq!(gsplan_rain_attenuation(ptr::null(), &bad, &mut db), GsplanStatus::InvalidArgument);
        gsplan_table_free(table);
        gsplan_table_free(ptr::null_mut());
    }
}

#[test]
fn table_from_missing_file() {
    let path = CString::new("/nonexistent/coefficients.csv").unwrap();
    let mut table = ptr::null_mut();
    let st = unsafe { gsplan_table_from_csv(path.as_ptr(), &mut table) };
    assert_eq!(st, GsplanStatus::DataError);
    assert!(table.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn elevation_examples() {
    let mut el = 0.0;
    let r = 6_378_137.0 + 800e3;
    let st = unsafe { gsplan_elevation_deg(0.0, 0.0, 0.0, r, 0.0, 0.0, &mut el) };
    assert_eq!(st, GsplanStatus::Ok);
    assert!((el - 90.0).abs() < 1e-9);
    let st = unsafe { gsplan_elevation_deg(91.0, 0.0, 0.0, r, 0.0, 0.0, &mut el) };
    assert_eq!(st, GsplanStatus::InvalidArgument);
}

#[test]
fn geopolitical_mask_into_caller_buffer() {
    let spec = GsplanGridSpec { lat_min: -12.5, lat_max: 12.5, lon_min: -20.0, lon_max: 20.0, step_lat: 0.1, step_lon: 0.1 };
    let mut n = 0;
    assert_eq!(unsafe { gsplan_grid_len(&spec, &mut n) }, GsplanStatus::Ok);
    assert_eq!(n, 100_000);
    let mut buf = vec![9u8; n];
    let st = unsafe { gsplan_geopolitical_mask(&spec, 0x5EED_2023, 0.1, buf.as_mut_ptr(), n) };
    assert_eq!(st, GsplanStatus::Ok);
    assert_eq!(buf.iter().filter(|b| **b == 0).count(), 10_115);
    assert!(buf.iter().all(|b| *b <= 1));
    let st = unsafe { gsplan_geopolitical_mask(&spec, 1, 0.1, buf.as_mut_ptr(), n - 1) };
    assert_eq!(st, GsplanStatus::InvalidArgument);
    let bad = GsplanGridSpec { lat_max: -20.0, ..spec };
    assert_eq!(unsafe { gsplan_grid_len(&bad, &mut n) }, GsplanStatus::InvalidArgument);
}

#[test]
fn plan_handle_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = write_case_study(tmp.path(), &GridSpec::global(2.0).unwrap(), 11).unwrap();
    // a denser shell so that sites exist
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text.push_str("\n[constellation]\nplanes = 16\nsats_per_plane = 16\n");
    cfg.set_file_name("dense.toml");
    std::fs::write(&cfg, text).unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    unsafe {
        let mut plan = ptr::null_mut();
        assert_eq!(gsplan_plan_run(path.as_ptr(), &mut plan), GsplanStatus::Ok, "{}", last_error());
        let n = gsplan_plan_site_count(plan);
        let all = gsplan_plan_all_fraction(plan);
        assert!((0.0..=1.0).contains(&all));
        assert_eq!(n > 0, all > 0.0);
        for i in 0..n {
            let mut site = GsplanSite::default();
            assert_eq!(gsplan_plan_site(plan, i, &mut site), GsplanStatus::Ok);
            assert_eq!(site.gw_id, i);
            assert!(site.region_cells >= 1);
        }
        let mut site = GsplanSite::default();
        assert_eq!(gsplan_plan_site(plan, n, &mut site), GsplanStatus::OutOfRange);

        let mut json = ptr::null_mut();
        assert_eq!(gsplan_plan_report_json(plan, &mut json), GsplanStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        gsplan_string_free(json);
        assert!(text.contains("\"all_criteria_fraction\""));
        gsplan_plan_free(plan);
    }
    assert_eq!(unsafe { gsplan_plan_site_count(ptr::null()) }, 0);
}

#[test]
fn plan_errors_map_to_status_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_case_study(tmp.path(), &GridSpec::global(10.0).unwrap(), 3).unwrap();
    std::fs::remove_file(tmp.path().join("rain_r001.asc")).unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    let mut plan = ptr::null_mut();
    assert_eq!(unsafe { gsplan_plan_run(path.as_ptr(), &mut plan) }, GsplanStatus::ConfigError);
    assert!(last_error().contains("rain layer"));
    assert_eq!(unsafe { gsplan_plan_run(ptr::null(), &mut plan) }, GsplanStatus::InvalidArgument);

    let cfg = write_case_study(tmp.path(), &GridSpec::global(10.0).unwrap(), 3).unwrap();
    std::fs::write(tmp.path().join("terrain.asc"), "garbage").unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { gsplan_plan_run(path.as_ptr(), &mut plan) }, GsplanStatus::DataError);
    assert!(plan.is_null());
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/gsplan.h")
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(header()).unwrap();
    for sym in [
        "gsplan_last_error",
        "gsplan_string_free",
        "gsplan_table_bundled",
        "gsplan_table_from_csv",
        "gsplan_table_free",
        "gsplan_rain_attenuation",
        "gsplan_elevation_deg",
        "gsplan_grid_len",
        "gsplan_geopolitical_mask",
        "gsplan_plan_run",
        "gsplan_plan_free",
        "gsplan_plan_site_count",
        "gsplan_plan_all_fraction",
        "gsplan_plan_site",
        "gsplan_plan_report_json",
        "typedef struct GsplanPlan GsplanPlan;",
        "typedef struct GsplanCoefficientTable GsplanCoefficientTable;",
        "GSPLAN_STATUS_OUT_OF_RANGE = 5",
    ] {
        assert!(h.contains(sym), "{sym} missing from header");
    }
}

#[test]
fn header_compiles_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"gsplan.h\"\n\
         int main(void) {\n\
           GsplanCoefficientTable *t = 0;\n\
           GsplanRainInputs in = {30.0, 10.0, 45.0, 30.0, 5.0, 0.0, 45.0};\n\
           double db = 0.0;\n\
           if (gsplan_table_bundled(&t) != GSPLAN_STATUS_OK) return 1;\n\
           GsplanStatus s = gsplan_rain_attenuation(t, &in, &db);\n\
           gsplan_table_free(t);\n\
           return s == GSPLAN_STATUS_OK && db > 71.0 && db < 72.0 ? 0 : 2;\n\
         }\n",
    )
    .unwrap();
    let include = header().parent().unwrap().to_path_buf();
    for (lang, std) in [("c", "-std=c99"), ("c++", "-std=c++11")] {
        let st = Command::new(&cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", std, "-x", lang])
            .arg("-I")
            .arg(&include)
            .arg(&src)
            .status()
            .unwrap();
        assert!(st.success(), "header does not compile as {lang}");
    }

    // link against the static library built alongside this test and run it
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libgsplan_ffi.a");
    if !lib.is_file() {
        eprintln!("{} not built; skipping link check", lib.display());
        return;
    }
    let exe = tmp.path().join("use");
    let st = Command::new(&cc)
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(st.success(), "linking against the static library failed");
    assert_eq!(Command::new(&exe).status().unwrap().code(), Some(0));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "clang", "gcc"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
