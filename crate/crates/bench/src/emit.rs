//! CSV tables and SVG line charts for simulation and LOOCV results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rpcr_core::MethodTag;

use crate::loocv::LoocvResult;
use crate::manifest::SimConfig;
use crate::monte_carlo::ExperimentResult;
use crate::simgen::{Contamination, ErrorLaw};

pub const RECORDS_HEADER: [&str; 13] = [
    "config_id",
    "model",
    "n",
    "p",
    "kappa",
    "error_law",
    "contamination",
    "replicate",
    "method",
    "prediction_error",
    "support_size",
    "lambda0",
    "lambda_hat",
];

pub const AGGREGATES_HEADER: [&str; 13] = [
    "config_id",
    "model",
    "n",
    "p",
    "kappa",
    "error_law",
    "contamination",
    "method",
    "replicates",
    "failures",
    "mean_error",
    "se_error",
    "mean_support",
];

pub const FAILURES_HEADER: [&str; 4] = ["config_id", "replicate", "method", "message"];
pub const TIMINGS_HEADER: [&str; 4] = ["config_id", "replicate", "method", "wall_ms"];
pub const LOOCV_SUMMARY_HEADER: [&str; 4] = ["c", "method", "mean_squared_error", "failures"];
pub const LOOCV_DIFFERENCES_HEADER: [&str; 6] =
    ["c", "first", "second", "mean_difference", "se_difference", "units"];
pub const LOOCV_OBSERVATIONS_HEADER: [&str; 5] =
    ["c", "observation", "method", "prediction", "squared_error"];

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn config_cells(c: &SimConfig) -> Vec<String> {
    vec![
        c.config_id.to_string(),
        c.model.to_string(),
        c.n.to_string(),
        c.p.to_string(),
        opt(c.kappa),
        c.error_law.to_string(),
        c.contamination.to_string(),
    ]
}

/// Writes `records.csv`, `aggregates.csv`, `failures.csv` and `timings.csv` into `dir`,
/// plus `summary.svg` when asked. Every file except `timings.csv` is a deterministic
/// function of the manifest.
pub fn emit_simulation(result: &ExperimentResult, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let by_id: BTreeMap<usize, &SimConfig> = result.configs.iter().map(|c| (c.config_id, c)).collect();
    let mut written = Vec::new();

    let rows = result
        .records
        .iter()
        .map(|r| {
            let mut row = config_cells(by_id[&r.config_id]);
            row.extend([
                r.replicate.to_string(),
                r.method.to_string(),
                num(r.prediction_error),
                r.support_size.to_string(),
                opt(r.lambda0),
                num(r.lambda_hat),
            ]);
            row
        })
        .collect();
    written.push(dir.join("records.csv"));
    write_csv(written.last().unwrap(), &RECORDS_HEADER, rows)?;

    let rows = result
        .aggregates
        .iter()
        .map(|a| {
            let mut row = config_cells(by_id[&a.config_id]);
            row.extend([
                a.method.to_string(),
                a.replicates.to_string(),
                a.failures.to_string(),
                num(a.mean_error),
                num(a.se_error),
                num(a.mean_support),
            ]);
            row
        })
        .collect();
    written.push(dir.join("aggregates.csv"));
    write_csv(written.last().unwrap(), &AGGREGATES_HEADER, rows)?;

    let rows = result
        .failures
        .iter()
        .map(|f| {
            vec![
                f.config_id.to_string(),
                f.replicate.to_string(),
                f.method.map(|m| m.to_string()).unwrap_or_default(),
                f.message.clone(),
            ]
        })
        .collect();
    written.push(dir.join("failures.csv"));
    write_csv(written.last().unwrap(), &FAILURES_HEADER, rows)?;

    let rows = result
        .timings
        .iter()
        .map(|t| {
            vec![
                t.config_id.to_string(),
                t.replicate.to_string(),
                t.method.to_string(),
                format!("{:.3}", t.wall_ms),
            ]
        })
        .collect();
    written.push(dir.join("timings.csv"));
    write_csv(written.last().unwrap(), &TIMINGS_HEADER, rows)?;

    if svg {
        written.push(dir.join("summary.svg"));
        fs::write(written.last().unwrap(), render_svg(result))
            .with_context(|| format!("writing {}", dir.join("summary.svg").display()))?;
    }
    Ok(written)
}

/// Writes `loocv_summary.csv`, `loocv_differences.csv` and `loocv_observations.csv`.
pub fn emit_loocv(result: &LoocvResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();

    let rows = result
        .summaries
        .iter()
        .map(|s| vec![num(s.c), s.method.to_string(), num(s.mean_squared_error), s.failures.to_string()])
        .collect();
    written.push(dir.join("loocv_summary.csv"));
    write_csv(written.last().unwrap(), &LOOCV_SUMMARY_HEADER, rows)?;

    let rows = result
        .differences
        .iter()
        .map(|d| {
            vec![
                num(d.c),
                d.first.to_string(),
                d.second.to_string(),
                num(d.mean_difference),
                num(d.se_difference),
                d.units.to_string(),
            ]
        })
        .collect();
    written.push(dir.join("loocv_differences.csv"));
    write_csv(written.last().unwrap(), &LOOCV_DIFFERENCES_HEADER, rows)?;

    let rows = result
        .observations
        .iter()
        .map(|o| {
            vec![
                num(o.c),
                o.observation.to_string(),
                o.method.to_string(),
                num(o.prediction),
                num(o.squared_error),
            ]
        })
        .collect();
    written.push(dir.join("loocv_observations.csv"));
    write_csv(written.last().unwrap(), &LOOCV_OBSERVATIONS_HEADER, rows)?;
    Ok(written)
}

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

/// One panel per (contamination, error law). The x axis is κ when the sweep varies κ
/// (one series per method and p), otherwise p (one series per method).
pub fn render_svg(result: &ExperimentResult) -> String {
    let by_id: BTreeMap<usize, &SimConfig> = result.configs.iter().map(|c| (c.config_id, c)).collect();
    let kappa_axis = {
        let mut ks: Vec<u64> = result.configs.iter().filter_map(|c| c.kappa.map(f64::to_bits)).collect();
        ks.sort_unstable();
        ks.dedup();
        ks.len() > 1
    };
    let mut panels: BTreeMap<(Contamination, ErrorLaw), BTreeMap<(MethodTag, usize), Vec<(f64, f64)>>> =
        BTreeMap::new();
    for a in &result.aggregates {
        if a.replicates == 0 {
            continue;
        }
        let cfg = by_id[&a.config_id];
        let (x, key) = if kappa_axis {
            (cfg.kappa.unwrap_or(0.0), (a.method, cfg.p))
        } else {
            (cfg.p as f64, (a.method, 0))
        };
        panels
            .entry((cfg.contamination, cfg.error_law))
            .or_default()
            .entry(key)
            .or_default()
            .push((x, a.mean_error));
    }

    let cols = panels.len().clamp(1, 3);
    let rows = panels.len().div_ceil(cols).max(1);
    let width = cols as f64 * PANEL_W;
    let height = rows as f64 * PANEL_H;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, "<!-- manifest-sha256: {} seed: {} -->", result.manifest_hash, result.seed);
    for (idx, ((cont, law), series)) in panels.iter().enumerate() {
        let ox = (idx % cols) as f64 * PANEL_W;
        let oy = (idx / cols) as f64 * PANEL_H;
        let series: Vec<Series> = series
            .iter()
            .map(|((method, p), pts)| {
                let mut points = pts.clone();
                points.sort_by(|a, b| a.0.total_cmp(&b.0));
                let label = if kappa_axis { format!("{method} p={p}") } else { method.to_string() };
                Series { label, points }
            })
            .collect();
        panel(&mut out, ox, oy, &format!("{cont} / {law}"), if kappa_axis { "kappa" } else { "p" }, &series);
    }
    out.push_str("</svg>\n");
    out
}

fn panel(out: &mut String, ox: f64, oy: f64, title: &str, xlabel: &str, series: &[Series]) {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (xmin, xmax) = bounds(all.iter().map(|p| p.0));
    let (ymin, ymax) = bounds(all.iter().map(|p| p.1));
    let pw = PANEL_W - 2.0 * MARGIN;
    let ph = PANEL_H - 2.0 * MARGIN;
    let sx = |x: f64| ox + MARGIN + (x - xmin) / (xmax - xmin) * pw;
    let sy = |y: f64| oy + PANEL_H - MARGIN - (y - ymin) / (ymax - ymin) * ph;

    let _ = writeln!(out, r#"<g class="panel">"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{title}</text>"#,
        ox + PANEL_W / 2.0,
        oy + MARGIN / 2.0
    );
    let _ = writeln!(
        out,
        r#"<rect x="{:.2}" y="{:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="gray"/>"#,
        ox + MARGIN,
        oy + MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{xlabel}</text>"#,
        ox + PANEL_W / 2.0,
        oy + PANEL_H - 8.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="9">{}</text><text x="{:.2}" y="{:.2}" font-size="9">{}</text>"#,
        ox + 2.0,
        oy + MARGIN + 8.0,
        fmt_tick(ymax),
        ox + 2.0,
        oy + PANEL_H - MARGIN,
        fmt_tick(ymin)
    );
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            pts.join(" "),
            s.label
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="9" fill="{color}">{}</text>"#,
            ox + PANEL_W - MARGIN + 2.0,
            oy + MARGIN + 12.0 * (k as f64 + 1.0),
            s.label
        );
    }
    let _ = writeln!(out, "</g>");
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 0.0 {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn fmt_tick(v: f64) -> String {
    format!("{v:.3e}")
}
