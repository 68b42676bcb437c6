//! Run directories: series CSVs, colormap grids and the JSON manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::sweep::{json_digest, plan_sweep, strictly_increasing, Colormap, PointRecord, RunOptions, Runner, SweepRow};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";
pub const CSV_HEADER: [&str; 7] = ["x", "c", "c_stderr", "rms_co", "rms_df", "seed", "walltime_s"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesManifest {
    pub name: String,
    pub file: String,
    pub x_label: String,
    pub monotonic_increasing: Option<bool>,
    pub points: Vec<PointRecord>,
    pub colormaps: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_fingerprint: String,
    pub master_seed: u64,
    pub complete: bool,
    pub config: RunConfig,
    pub series: Vec<SeriesManifest>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?)
    }
}

/// Digest of the resolved config, excluding where it is written.
pub fn config_fingerprint(cfg: &RunConfig) -> String {
    let cfg = RunConfig { output_dir: None, ..cfg.clone() };
    json_digest(&serde_json::to_value(&cfg).expect("config serializes"))
}

/// Shortest decimal string that parses back to the same value.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v}")
    }
}

pub fn write_rows_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            format_float(r.x),
            format_float(r.c),
            format_float(r.c_stderr),
            format_float(r.rms_co),
            format_float(r.rms_df),
            r.seed.to_string(),
            r.walltime_s.map(format_float).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Config(format!("{} has an unexpected header", path.display())));
    }
    let bad = |field: &str| Error::Config(format!("{}: cannot parse {field:?}", path.display()));
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad(s));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let walltime = rec.get(6).unwrap_or("");
        rows.push(SweepRow {
            x: num(&rec[0])?,
            c: num(&rec[1])?,
            c_stderr: num(&rec[2])?,
            rms_co: num(&rec[3])?,
            rms_df: num(&rec[4])?,
            seed: rec[5].parse().map_err(|_| bad(&rec[5]))?,
            walltime_s: if walltime.is_empty() { None } else { Some(num(walltime)?) },
        });
    }
    Ok(rows)
}

/// One row per snapshot: ζ followed by the intensity at every τ sample.
pub fn write_colormap_csv(path: &Path, map: &Colormap) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["zeta".to_string()];
    header.extend(map.taus.iter().map(|&t| format_float(t)));
    w.write_record(&header)?;
    for (z, row) in map.zetas.iter().zip(&map.rows) {
        let mut rec = vec![format_float(*z)];
        rec.extend(row.iter().map(|&v| format_float(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn colormap_file_name(power: f64) -> String {
    format!("colormap_p0_{}W.csv", format_float(power))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub series: Vec<(String, Vec<SweepRow>)>,
    pub computed: usize,
    pub reused: usize,
    pub failures: Vec<String>,
}

fn is_nonempty_dir(dir: &Path) -> Result<bool> {
    Ok(dir.is_dir() && fs::read_dir(dir)?.next().is_some())
}

/// Runs the sweep into `out_dir`. An existing directory written by the same
/// configuration is resumed: rows already on disk are kept and only missing
/// points are computed. Any other existing directory is refused unless
/// `force` is set, in which case it is replaced.
pub fn simulate(cfg: &RunConfig, out_dir: &Path, opts: &RunOptions, force: bool) -> Result<RunSummary> {
    cfg.validate()?;
    let fingerprint = config_fingerprint(cfg);
    let mut previous = None;
    if out_dir.exists() && !out_dir.is_dir() {
        return Err(Error::RunExists(out_dir.to_path_buf()));
    }
    if is_nonempty_dir(out_dir)? {
        match Manifest::load(out_dir) {
            Ok(m) if m.config_fingerprint == fingerprint => previous = Some(m),
            _ if force => fs::remove_dir_all(out_dir)?,
            _ => return Err(Error::RunExists(out_dir.to_path_buf())),
        }
    }
    fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join(CONFIG_FILE), cfg)?;

    let plan = plan_sweep(cfg);
    let mut manifest = Manifest {
        tool: "coprop".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_fingerprint: fingerprint,
        master_seed: cfg.master_seed,
        complete: false,
        config: cfg.clone(),
        series: plan
            .iter()
            .map(|s| SeriesManifest {
                name: s.name.clone(),
                file: s.file_name(),
                x_label: s.x_label.clone(),
                monotonic_increasing: None,
                points: Vec::new(),
                colormaps: Vec::new(),
            })
            .collect(),
    };
    let mut runner = Runner::new(cfg, opts.clone())?;
    let mut summary = RunSummary { out_dir: out_dir.to_path_buf(), series: Vec::new(), computed: 0, reused: 0, failures: Vec::new() };

    for (si, spec) in plan.iter().enumerate() {
        let csv_path = out_dir.join(spec.file_name());
        let old_rows: BTreeMap<u64, SweepRow> = match (&previous, csv_path.exists()) {
            (Some(_), true) => read_rows_csv(&csv_path)?.into_iter().map(|r| (r.x.to_bits(), r)).collect(),
            _ => BTreeMap::new(),
        };
        let old_records: BTreeMap<u64, PointRecord> = previous
            .as_ref()
            .and_then(|m| m.series.iter().find(|s| s.name == spec.name))
            .map(|s| s.points.iter().map(|p| (p.x.to_bits(), p.clone())).collect())
            .unwrap_or_default();

        let mut rows: Vec<SweepRow> = Vec::new();
        for point in &spec.points {
            let key = point.x.to_bits();
            let map_file = point.snapshots.map(|_| colormap_file_name(point.power));
            let have_map = map_file.as_ref().is_none_or(|f| out_dir.join(f).exists());
            if let (Some(row), Some(rec), true) = (old_rows.get(&key), old_records.get(&key), have_map) {
                rows.push(row.clone());
                manifest.series[si].points.push(rec.clone());
                if let Some(f) = map_file {
                    manifest.series[si].colormaps.push(f);
                }
                summary.reused += 1;
                continue;
            }
            let outcome = runner.run_point(spec, point);
            if let Some(err) = &outcome.record.error {
                summary.failures.push(format!("{} x={}: {err}", spec.name, format_float(point.x)));
            }
            if let (Some(map), Some(f)) = (&outcome.colormap, map_file) {
                write_colormap_csv(&out_dir.join(&f), map)?;
                manifest.series[si].colormaps.push(f);
            }
            rows.push(outcome.row);
            manifest.series[si].points.push(outcome.record);
            summary.computed += 1;
            write_rows_csv(&csv_path, &rows)?;
            write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
        }
        write_rows_csv(&csv_path, &rows)?;
        if spec.check_monotonic {
            manifest.series[si].monotonic_increasing = Some(strictly_increasing(&rows));
        }
        summary.series.push((spec.name.clone(), rows));
    }
    manifest.complete = true;
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(summary)
}
