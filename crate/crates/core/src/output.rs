//! Report, CSV, GeoJSON and raster writers.
//!
//! Every writer is a pure function of the plan outcome, so two runs of the
//! same configuration produce identical bytes.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::Artifact;
use crate::geogrid::ascii::{write_grid, write_mask};
use crate::geogrid::is_nodata;
use crate::planner::{LayerData, PlanOutcome, PlanReport};

pub fn write_report_json<W: Write>(report: &PlanReport, mut w: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)
}

fn num(v: f64) -> String {
    if is_nodata(v) {
        String::new()
    } else {
        v.to_string()
    }
}

/// `gw_id,lat,lon,region_id,region_cells,<criterion columns>`.
pub fn write_sites_csv<W: Write>(report: &PlanReport, w: W) -> io::Result<()> {
    let names = report.criterion_names();
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["gw_id", "lat", "lon", "region_id", "region_cells"];
    header.extend(&names);
    out.write_record(&header)?;
    for s in &report.sites {
        let mut row = vec![
            s.gw_id.to_string(),
            num(s.lat),
            num(s.lon),
            s.region_id.to_string(),
            s.region_cells.to_string(),
        ];
        row.extend(names.iter().map(|n| num(s.criterion_values[*n])));
        out.write_record(&row)?;
    }
    out.flush()
}

/// `criteria,fraction`: singles, then pairs as `a+b`, then `all`.
pub fn write_stats_csv<W: Write>(report: &PlanReport, w: W) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["criteria", "fraction"])?;
    for (name, f) in report.stats_rows() {
        out.write_record([name, f.to_string()])?;
    }
    out.flush()
}

fn collection(features: Vec<Value>) -> Value {
    json!({ "type": "FeatureCollection", "features": features })
}

/// One MultiPoint feature of cell centers per region.
pub fn regions_geojson(outcome: &PlanOutcome) -> Value {
    let spec = outcome.evaluation.combined.spec();
    let features = outcome
        .regions
        .iter()
        .map(|r| {
            let coords: Vec<[f64; 2]> = r
                .cells
                .iter()
                .map(|c| {
                    let (lat, lon) = spec.cell_center(*c).expect("region cell");
                    [lon, lat]
                })
                .collect();
            json!({
                "type": "Feature",
                "geometry": { "type": "MultiPoint", "coordinates": coords },
                "properties": {
                    "region_id": r.region_id,
                    "n_cells": r.cells.len(),
                    "centroid_lat": r.centroid.lat,
                    "centroid_lon": r.centroid.lon,
                    "degenerate_centroid": r.centroid.degenerate,
                },
            })
        })
        .collect();
    collection(features)
}

/// One Point feature per gateway site.
pub fn sites_geojson(report: &PlanReport) -> Value {
    let features = report
        .sites
        .iter()
        .map(|s| {
            let mut props = serde_json::Map::new();
            props.insert("gw_id".into(), json!(s.gw_id));
            props.insert("region_id".into(), json!(s.region_id));
            props.insert("region_cells".into(), json!(s.region_cells));
            for (k, v) in &s.criterion_values {
                props.insert(k.clone(), json!(v));
            }
            json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [s.lon, s.lat] },
                "properties": props,
            })
        })
        .collect();
    collection(features)
}

fn write_json<W: Write>(v: &Value, mut w: W) -> io::Result<()> {
    serde_json::to_writer(&mut w, v)?;
    writeln!(w)
}

fn create(dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> io::Result<BufWriter<File>> {
    let p = dir.join(name);
    let f = File::create(&p)?;
    written.push(p);
    Ok(BufWriter::new(f))
}

/// Writes the requested artifacts into `dir`, creating it if needed.
/// Returns the written paths in write order.
pub fn write_artifacts(outcome: &PlanOutcome, dir: &Path, emit: &[Artifact]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let report = &outcome.report;
    for a in emit {
        match a {
            Artifact::Report => {
                let mut w = create(dir, "report.json", &mut written)?;
                write_report_json(report, &mut w)?;
                w.flush()?;
            }
            Artifact::Csv => {
                let mut w = create(dir, "sites.csv", &mut written)?;
                write_sites_csv(report, &mut w)?;
                w.flush()?;
                let mut w = create(dir, "stats.csv", &mut written)?;
                write_stats_csv(report, &mut w)?;
                w.flush()?;
            }
            Artifact::Geojson => {
                let mut w = create(dir, "regions.geojson", &mut written)?;
                write_json(&regions_geojson(outcome), &mut w)?;
                w.flush()?;
                let mut w = create(dir, "sites.geojson", &mut written)?;
                write_json(&sites_geojson(report), &mut w)?;
                w.flush()?;
            }
            Artifact::Masks => {
                for l in &outcome.evaluation.layers {
                    let mut w = create(dir, &format!("mask_{}.asc", l.name), &mut written)?;
                    write_mask(&l.mask, &mut w)?;
                    w.flush()?;
                }
            }
            Artifact::Grids => {
                for l in &outcome.layers {
                    let grid = match &l.data {
                        LayerData::Scalar { grid, .. } | LayerData::Mask { values: Some(grid), .. } => grid,
                        LayerData::Mask { values: None, .. } => continue,
                    };
                    let mut w = create(dir, &format!("grid_{}.asc", l.name), &mut written)?;
                    write_grid(grid, &mut w)?;
                    w.flush()?;
                }
            }
        }
    }
    Ok(written)
}
