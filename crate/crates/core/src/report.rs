//! CSV and SVG emitters for sweep results and privacy tables.
//!
//! All numbers use `.` as the decimal separator and every line ends in `\n`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;

use crate::experiment::{Metric, SweepResult};
use crate::metrics::PrivacyReport;
use crate::selection::SecurityPolicy;

pub const TRIALS_HEADER: [&str; 5] = ["scenario", "param", "policy", "trial", "value"];
pub const SUMMARY_HEADER: [&str; 7] = ["scenario", "param", "policy", "mean", "trials", "failures", "attempts"];

/// Formats a metric value at the precision it is reported with.
pub fn format_value(metric: Metric, value: Option<f64>) -> String {
    match value {
        None => "NA".into(),
        Some(v) => match metric {
            Metric::Security => format!("{v:.6}"),
            Metric::Performance => format!("{v:.1}"),
            Metric::Privacy => format!("{v:.0}"),
        },
    }
}

fn csv_writer<W: io::Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn finish<W: io::Write>(w: csv::Writer<W>) -> io::Result<()> {
    w.into_inner().map_err(|e| e.into_error())?.flush()
}

/// One line per (sweep point, policy, trial).
pub fn write_trials_csv<W: io::Write>(result: &SweepResult, out: W) -> io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(TRIALS_HEADER)?;
    for row in &result.rows {
        for (t, v) in row.values.iter().enumerate() {
            w.write_record([
                row.scenario.kind(),
                row.scenario.params(),
                row.policy.name().to_owned(),
                t.to_string(),
                format_value(result.metric, *v),
            ])?;
        }
    }
    finish(w)
}

/// One line per (sweep point, policy) with the mean over trials.
pub fn write_summary_csv<W: io::Write>(result: &SweepResult, out: W) -> io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for row in &result.rows {
        w.write_record([
            row.scenario.kind(),
            row.scenario.params(),
            row.policy.name().to_owned(),
            format_value(result.metric, row.mean()),
            row.values.len().to_string(),
            row.failures.to_string(),
            row.attempts.to_string(),
        ])?;
    }
    finish(w)
}

/// `p,policy,count` lines for a list of (p, report) pairs.
pub fn write_privacy_csv<W: io::Write>(table: &[(f64, PrivacyReport)], out: W) -> io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["p", "policy", "count"])?;
    for (p, rep) in table {
        for policy in SecurityPolicy::ALL {
            w.write_record([p.to_string(), policy.name().to_owned(), rep.counts[&policy].to_string()])?;
        }
    }
    finish(w)
}

/// One plotted observation: scenario parameters, series policy and value.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub params: Vec<(String, f64)>,
    pub policy: String,
    pub value: Option<f64>,
}

/// Parses a `name=value name=value` parameter string.
pub fn parse_params(s: &str) -> Option<Vec<(String, f64)>> {
    s.split_whitespace()
        .map(|kv| {
            let (k, v) = kv.split_once('=')?;
            Some((k.to_owned(), v.parse().ok()?))
        })
        .collect()
}

pub fn chart_points(result: &SweepResult) -> Vec<ChartPoint> {
    result
        .rows
        .iter()
        .map(|row| ChartPoint {
            params: parse_params(&row.scenario.params()).expect("scenario params are well formed"),
            policy: row.policy.name().to_owned(),
            value: row.mean(),
        })
        .collect()
}

/// Reads the points back from a summary CSV.
pub fn read_summary_csv<R: io::Read>(input: R) -> Result<Vec<ChartPoint>, String> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("summary is missing the {name:?} column"))
    };
    let (param, policy, mean) = (col("param")?, col("policy")?, col("mean")?);
    let mut points = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = i + 2;
        let params = parse_params(&rec[param]).ok_or_else(|| format!("line {line}: bad param {:?}", &rec[param]))?;
        let value = match &rec[mean] {
            "NA" => None,
            v => Some(v.parse().map_err(|_| format!("line {line}: bad mean {v:?}"))?),
        };
        points.push(ChartPoint {
            params,
            policy: rec[policy].to_owned(),
            value,
        });
    }
    Ok(points)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders a line chart with one polyline per series. The x axis is the
/// first parameter that varies across points; when several parameters vary,
/// the others become part of the series label.
pub fn render_svg(points: &[ChartPoint], title: &str, y_label: &str) -> String {
    let names: Vec<String> = points
        .first()
        .map(|p| p.params.iter().map(|(k, _)| k.clone()).collect())
        .unwrap_or_default();
    let varies = |k: &str| {
        let mut vals = points
            .iter()
            .filter_map(|p| p.params.iter().find(|(n, _)| n == k).map(|&(_, v)| v));
        let first = vals.next();
        vals.any(|v| Some(v) != first)
    };
    let x_name = names
        .iter()
        .find(|k| varies(k))
        .or(names.first())
        .cloned()
        .unwrap_or_default();
    let x_of = |p: &ChartPoint| p.params.iter().find(|(n, _)| *n == x_name).map_or(0.0, |&(_, v)| v);

    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for p in points {
        let mut label = p.policy.clone();
        for (k, v) in &p.params {
            if *k != x_name && varies(k) {
                let _ = write!(label, " {k}={v}");
            }
        }
        let entry = series.entry(label).or_default();
        if let Some(v) = p.value {
            entry.push((x_of(p), v));
        }
    }

    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (70.0, 200.0, 40.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let xs = points.iter().map(x_of);
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let y1 = series
        .values()
        .flatten()
        .map(|&(_, y)| y)
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - y / y1 * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<g stroke="black"><line x1="{left}" y1="{}" x2="{}" y2="{}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{}"/></g>"#,
        top + ph,
        left + pw,
        top + ph,
        top + ph
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (xv, yv) = (x0 + f * (x1 - x0), f * y1);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(xv),
            top + ph + 18.0,
            fmt_tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 6.0,
            sy(yv) + 4.0,
            fmt_tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 10.0,
        escape(&x_name)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );
    for (i, (label, mut pts)) in series.into_iter().enumerate() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"><title>{}</title></polyline>"#,
            coords.join(" "),
            escape(&label)
        );
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = left + pw + 16.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}
