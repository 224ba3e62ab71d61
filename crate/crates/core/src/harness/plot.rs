use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::train::CSV_COLUMNS;
use crate::error::{Error, Result};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// A metrics CSV and the series it belongs to. Files sharing a label are
/// seeds of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSource {
    pub label: String,
    pub path: PathBuf,
}

impl CurveSource {
    /// Accepts `label=path` or a bare path. A bare path is labelled by its
    /// directory, skipping a `seed<N>` level, so `runs/push-lite/multihead/seed0/metrics.csv`
    /// becomes `multihead`.
    pub fn parse(arg: &str) -> Self {
        if let Some((label, path)) = arg.split_once('=') {
            if !label.is_empty() && !label.contains(['/', '\\']) {
                return Self {
                    label: label.into(),
                    path: path.into(),
                };
            }
        }
        let path = PathBuf::from(arg);
        Self {
            label: default_label(&path),
            path,
        }
    }
}

fn default_label(path: &Path) -> String {
    let names: Vec<String> = path
        .ancestors()
        .skip(1)
        .filter_map(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .take(2)
        .collect();
    match names.as_slice() {
        [seed, variant, ..] if seed.starts_with("seed") => variant.clone(),
        [dir, ..] => dir.clone(),
        [] => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    }
}

/// One labelled series; each run is a list of (env_steps, mean_return) points.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub runs: Vec<Vec<(f64, f64)>>,
}

pub(crate) fn read_curve(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ctx = path.display().to_string();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
    let missing: Vec<&str> = CSV_COLUMNS.iter().copied().filter(|c| !header.contains(c)).collect();
    if !missing.is_empty() {
        return Err(Error::format(ctx, format!("missing columns: {}", missing.join(", "))));
    }
    let col = |name: &str| header.iter().position(|h| *h == name).expect("checked above");
    let (xi, yi) = (col("env_steps"), col("mean_return"));
    let mut points = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::format(
                &ctx,
                format!("row {}: expected {} fields, got {}", n + 1, header.len(), fields.len()),
            ));
        }
        let num = |i: usize| {
            fields[i].trim().parse::<f64>().map_err(|_| {
                Error::format(
                    &ctx,
                    format!("row {}: bad number {:?} in {}", n + 1, fields[i], header[i]),
                )
            })
        };
        points.push((num(xi)?, num(yi)?));
    }
    if points.is_empty() {
        return Err(Error::format(ctx, "no data rows"));
    }
    Ok(points)
}

/// Reads the CSVs, groups them by label and writes an SVG learning-curve
/// figure. Nothing is written if any input is unusable.
pub fn plot_curves(sources: &[CurveSource], out: &Path) -> Result<()> {
    if sources.is_empty() {
        return Err(Error::Argument("no curves to plot".into()));
    }
    let mut series: Vec<Series> = Vec::new();
    for src in sources {
        let run = read_curve(&src.path)?;
        match series.iter_mut().find(|s| s.label == src.label) {
            Some(s) => s.runs.push(run),
            None => series.push(Series {
                label: src.label.clone(),
                runs: vec![run],
            }),
        }
    }
    let svg = render_svg(&series)?;
    std::fs::write(out, svg).map_err(|e| Error::io(out, e))
}

struct Summary {
    xs: Vec<f64>,
    mean: Vec<f64>,
    band: Option<(Vec<f64>, Vec<f64>)>,
}

fn summarize(s: &Series) -> Summary {
    let mut by_x: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for run in &s.runs {
        for &(x, y) in run {
            // Non-negative step counts order the same as their bit patterns.
            by_x.entry(x.max(0.0).to_bits()).or_default().push(y);
        }
    }
    let xs = by_x.keys().map(|&b| f64::from_bits(b)).collect();
    let mean = by_x
        .values()
        .map(|ys| ys.iter().sum::<f64>() / ys.len() as f64)
        .collect();
    let band = (s.runs.len() >= 2).then(|| {
        let lo = by_x
            .values()
            .map(|ys| ys.iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        let hi = by_x
            .values()
            .map(|ys| ys.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        (lo, hi)
    });
    Summary { xs, mean, band }
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo > 1e-12 {
        (lo, hi)
    } else {
        let pad = (lo.abs() * 0.1).max(0.5);
        (lo - pad, hi + pad)
    }
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders the series as a standalone SVG document: mean curve per series,
/// min/max shading when a series has more than one run.
pub fn render_svg(series: &[Series]) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.runs.iter().all(Vec::is_empty)) {
        return Err(Error::Argument("no curves to plot".into()));
    }
    let sums: Vec<Summary> = series.iter().map(summarize).collect();
    let all_x = sums.iter().flat_map(|s| s.xs.iter().copied());
    let all_y = sums.iter().flat_map(|s| {
        let band = s.band.iter().flat_map(|(lo, hi)| lo.iter().chain(hi));
        s.mean.iter().chain(band).copied()
    });
    let (x0, x1) = all_x.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (y0, y1) = all_y.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    if ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("curve data contains non-finite values".into()));
    }
    let (x0, x1) = padded_range(x0, x1);
    let (y0, y1) = padded_range(y0, y1);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut o = String::new();
    let w = &mut o;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    for t in nice_ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            w,
            r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="#e5e5e5"/>"##,
            TOP + ph
        );
        let _ = writeln!(
            w,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph + 18.0,
            fmt_tick(t)
        );
    }
    for t in nice_ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(
            w,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/>"##,
            LEFT + pw
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        w,
        r##"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#333"/>"##
    );
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">environment steps</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        w,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">mean eval return</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (i, (s, sum)) in series.iter().zip(&sums).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if let Some((lo, hi)) = &sum.band {
            let upper = sum
                .xs
                .iter()
                .zip(hi)
                .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)));
            let lower = sum
                .xs
                .iter()
                .zip(lo)
                .rev()
                .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)));
            let pts: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(
                w,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                pts.join(" ")
            );
        }
        let pts: Vec<String> = sum
            .xs
            .iter()
            .zip(&sum.mean)
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            w,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            w,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}">{} (n={})</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label),
            s.runs.len()
        );
    }
    let _ = writeln!(w, "</svg>");
    Ok(o)
}
