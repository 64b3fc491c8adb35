//! Static SVG charts from sweep and benchmark outputs.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::bench::MemoryRow;
use super::read_csv;
use super::sweep::{SeriesRow, SweepRow};
use crate::error::{Error, Result};

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn chart_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Chart(e.to_string())
}

/// Render one line chart. Nothing is written when every series is empty.
pub fn line_chart(path: &Path, title: &str, x_desc: &str, y_desc: &str, series: &[Series], source: &Path) -> Result<()> {
    let pts = || series.iter().flat_map(|s| s.points.iter());
    if pts().next().is_none() {
        return Err(Error::EmptyTrace(source.to_path_buf()));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, 0.0f64, f64::MIN);
    for &(x, y) in pts() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    y1 += (y1 - y0) * 0.05;

    let root = SVGBackend::new(path, (800, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(chart_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(chart_err)?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc(y_desc)
        .draw()
        .map_err(chart_err)?;
    for (i, s) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
            .map_err(chart_err)?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(chart_err)?;
    root.present().map_err(chart_err)?;
    Ok(())
}

fn scenario_series<F>(rows: &[SeriesRow], kind: &str, value: F) -> Vec<Series>
where
    F: Fn(&SeriesRow) -> Option<f64>,
{
    let mut names: Vec<&str> = rows
        .iter()
        .map(|r| r.scenario.as_str())
        .filter(|s| s.starts_with(kind))
        .collect();
    names.dedup();
    names.sort();
    names.dedup();
    names
        .into_iter()
        .map(|n| Series {
            label: n.to_owned(),
            points: rows
                .iter()
                .filter(|r| r.scenario == n)
                .filter_map(|r| value(r).map(|v| (r.time_s as f64, v)))
                .collect(),
        })
        .collect()
}

/// Render every chart whose input exists under `input`; returns the files
/// written. A missing or empty `sweep_series.csv` is an error.
pub fn render_all(input: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let series_csv = input.join("sweep_series.csv");
    if !series_csv.is_file() {
        return Err(Error::EmptyTrace(series_csv));
    }
    let rows: Vec<SeriesRow> = read_csv(&series_csv)?;
    if rows.is_empty() {
        return Err(Error::EmptyTrace(series_csv));
    }
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let specs: [(&str, &str, &str, fn(&SeriesRow) -> Option<f64>); 6] = [
        ("LDA", "lda_hit_rate.svg", "gateway cache hit rate", |r| r.gateway_hit_rate),
        ("LDA", "lda_rtt.svg", "average RTT (ms)", |r| r.avg_rtt_ms),
        ("FLA", "fla_hit_rate.svg", "gateway cache hit rate", |r| r.gateway_hit_rate),
        ("FLA", "fla_pit_available.svg", "gateway PIT available rate", |r| r.gateway_pit_available_rate),
        ("FLA", "fla_rtt.svg", "average RTT (ms)", |r| r.avg_rtt_ms),
        ("baseline", "control_hit_rate.svg", "gateway cache hit rate", |r| r.gateway_hit_rate),
    ];
    for (kind, file, y, f) in specs {
        let s = scenario_series(&rows, kind, f);
        if s.is_empty() {
            continue;
        }
        let path = out.join(file);
        line_chart(&path, &format!("{kind}: {y}"), "time (s)", y, &s, &series_csv)?;
        written.push(path);
    }

    let summary_csv = input.join("sweep_summary.csv");
    if summary_csv.is_file() {
        let rows: Vec<SweepRow> = read_csv(&summary_csv)?;
        let idx = |i: usize| i as f64 + 1.0;
        let s = vec![
            Series {
                label: "detection rate".into(),
                points: rows
                    .iter()
                    .enumerate()
                    .filter_map(|(i, r)| r.detection_rate.map(|d| (idx(i), d)))
                    .collect(),
            },
            Series {
                label: "false positive rate".into(),
                points: rows.iter().enumerate().map(|(i, r)| (idx(i), r.false_positive_rate)).collect(),
            },
        ];
        let path = out.join("detection.svg");
        line_chart(&path, "detection per scenario (sweep order)", "scenario", "rate", &s, &summary_csv)?;
        written.push(path);
    }

    let bench_json = input.join("bench.json");
    if bench_json.is_file() {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&bench_json)?)?;
        let mut s = Vec::new();
        for r in v["results"].as_array().into_iter().flatten() {
            let label = r["mode"].as_str().unwrap_or("?").to_owned();
            let ips = r["interests_per_second"].as_f64().unwrap_or(0.0);
            s.push(Series {
                label,
                points: vec![(0.0, ips), (1.0, ips)],
            });
        }
        let path = out.join("throughput.svg");
        line_chart(&path, "insert-path throughput", "", "interests per second", &s, &bench_json)?;
        written.push(path);
    }

    let memory_csv = input.join("memory.csv");
    if memory_csv.is_file() {
        let rows: Vec<MemoryRow> = read_csv(&memory_csv)?;
        let s = vec![
            Series {
                label: "ELDA per prefix".into(),
                points: rows.iter().map(|r| (r.distinct_names as f64, r.elda_bits_per_prefix as f64)).collect(),
            },
            Series {
                label: "frequency baseline".into(),
                points: rows.iter().map(|r| (r.distinct_names as f64, r.frequency_baseline_bits as f64)).collect(),
            },
        ];
        let path = out.join("resources.svg");
        line_chart(&path, "detector state", "distinct names", "bits", &s, &memory_csv)?;
        written.push(path);
    }
    Ok(written)
}
