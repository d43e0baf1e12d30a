//! Experiment reports: a fixed-layout numeric table plus named pass/fail
//! verdicts, emitted as CSV, JSON, or SVG plots. Emission is deterministic:
//! the same report value always produces the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One sequence member with its measured data. The vectors `m`, `delta`, and
/// `ratio` are aligned with [`Report::r_values`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportRow {
    /// Position in the sequence.
    pub index: usize,
    /// Sequence parameter: mesh resolution, perturbation amplitude, offset
    /// distance, or hull sample count, depending on the runner.
    pub param: f64,
    /// Hausdorff distance to the reference surface.
    pub hausdorff: f64,
    /// Reach lower bound for this member (0 for raw polytopes).
    pub reach: f64,
    /// Volume of the symmetric difference with the reference region.
    pub omega: f64,
    /// Total curvatures M_r of this member.
    pub m: Vec<f64>,
    /// |M_r(member) - M_r(reference)|.
    pub delta: Vec<f64>,
    /// delta / omega (0 when both vanish, inf when only omega does).
    pub ratio: Vec<f64>,
}

/// A named decision recomputable from the table values and the tolerances.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Verdict { name: name.into(), passed, detail: detail.into() }
    }
}

/// Table plus verdicts for one scenario run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub scenario_id: String,
    /// Curvature orders reported in the vector columns.
    pub r_values: Vec<usize>,
    /// Reference totals M_r of the limit surface, aligned with `r_values`.
    pub reference: Vec<f64>,
    pub rows: Vec<ReportRow>,
    pub verdicts: Vec<Verdict>,
}

/// Output format for [`emit_report`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" | "json-compatible" => Ok(ReportFormat::Json),
            "svg" | "svg-plot" => Ok(ReportFormat::Svg),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

impl Report {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    /// CSV table. Column order is fixed: `index,param,hausdorff,reach,omega`
    /// followed by `m{r},delta{r},ratio{r}` for each r in `r_values`. An
    /// empty table yields the header line alone.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,param,hausdorff,reach,omega");
        for r in &self.r_values {
            let _ = write!(out, ",m{r},delta{r},ratio{r}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                row.index,
                fmt_full(row.param),
                fmt_full(row.hausdorff),
                fmt_full(row.reach),
                fmt_full(row.omega)
            );
            for j in 0..self.r_values.len() {
                let _ = write!(
                    out,
                    ",{},{},{}",
                    fmt_full(row.m[j]),
                    fmt_full(row.delta[j]),
                    fmt_full(row.ratio[j])
                );
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    /// Plot of |delta M_r| against the sequence index, one series per r.
    pub fn svg_delta(&self) -> String {
        let series: Vec<(String, Vec<(f64, f64)>)> = self
            .r_values
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let pts =
                    self.rows.iter().map(|row| (row.index as f64, row.delta[j])).collect();
                (format!("delta M_{r}"), pts)
            })
            .collect();
        svg_plot(
            &format!("{}: curvature error by sequence index", self.scenario_id),
            "index",
            "|delta M_r|",
            &series,
            true,
        )
    }

    /// Plot of M_r against the sequence parameter, one series per r.
    pub fn svg_sweep(&self) -> String {
        let series: Vec<(String, Vec<(f64, f64)>)> = self
            .r_values
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let pts = self.rows.iter().map(|row| (row.param, row.m[j])).collect();
                (format!("M_{r}"), pts)
            })
            .collect();
        svg_plot(
            &format!("{}: total curvatures by parameter", self.scenario_id),
            "parameter",
            "M_r",
            &series,
            false,
        )
    }

    /// One line per verdict, suitable for terminal output.
    pub fn verdict_lines(&self) -> String {
        let mut out = String::new();
        for v in &self.verdicts {
            let tag = if v.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "[{tag}] {}: {}", v.name, v.detail);
        }
        out
    }
}

/// Write the report under `dir` in the requested format and return the paths
/// written. CSV and JSON produce one file, SVG produces the two plots.
pub fn emit_report(report: &Report, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let base = sanitize(&report.scenario_id);
    let mut written = Vec::new();
    match format {
        ReportFormat::Csv => {
            let path = dir.join(format!("{base}.csv"));
            fs::write(&path, report.to_csv())?;
            written.push(path);
        }
        ReportFormat::Json => {
            let path = dir.join(format!("{base}.json"));
            fs::write(&path, report.to_json()?)?;
            written.push(path);
        }
        ReportFormat::Svg => {
            let delta = dir.join(format!("{base}.delta.svg"));
            fs::write(&delta, report.svg_delta())?;
            written.push(delta);
            let sweep = dir.join(format!("{base}.sweep.svg"));
            fs::write(&sweep, report.svg_sweep())?;
            written.push(sweep);
        }
    }
    Ok(written)
}

fn sanitize(id: &str) -> String {
    let cleaned: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '-' })
        .collect();
    if cleaned.is_empty() {
        "report".into()
    } else {
        cleaned
    }
}

/// Full-precision float text: shortest string that round-trips the value.
fn fmt_full(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

/// Compact tick label, deterministic for identical inputs.
fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let mut s = format!("{v:.4}");
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
        s
    } else {
        format!("{v:.2e}")
    }
}

const PALETTE: [&str; 6] = ["#1b6ca8", "#c23b22", "#2e8540", "#8a4f9e", "#b8860b", "#3a3a3a"];

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 74.0;
const MR: f64 = 24.0;
const MT: f64 = 40.0;
const MB: f64 = 52.0;

/// Scatter-with-lines plot. With `log_y` the vertical axis is log10 and
/// nonpositive values are dropped; if nothing survives, falls back to linear.
fn svg_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
    log_y: bool,
) -> String {
    // Keep finite points, transforming y when in log mode.
    let keep = |log: bool| -> Vec<Vec<(f64, f64)>> {
        series
            .iter()
            .map(|(_, pts)| {
                pts.iter()
                    .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log || *y > 0.0))
                    .map(|&(x, y)| (x, if log { y.log10() } else { y }))
                    .collect()
            })
            .collect()
    };
    let mut log = log_y;
    let mut kept = keep(log);
    if log && kept.iter().all(|p| p.is_empty()) {
        log = false;
        kept = keep(false);
    }

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\">\n"
    );
    let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"#ffffff\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"24\" font-size=\"14\" fill=\"#222\">{}</text>",
        ML,
        escape(title)
    );

    let pw = W - ML - MR;
    let ph = H - MT - MB;
    let frame = format!(
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" \
         stroke=\"#444\" stroke-width=\"1\"/>"
    );

    let pts_flat: Vec<(f64, f64)> = kept.iter().flatten().copied().collect();
    if pts_flat.is_empty() {
        let _ = writeln!(svg, "{frame}");
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" fill=\"#666\">no data</text>",
            ML + pw / 2.0 - 24.0,
            MT + ph / 2.0
        );
        svg.push_str("</svg>\n");
        return svg;
    }

    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts_flat {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad = |lo: &mut f64, hi: &mut f64| {
        let span = *hi - *lo;
        let eps = if span > 0.0 { 0.05 * span } else { 0.5 * lo.abs().max(1e-9) + 1e-9 };
        *lo -= eps;
        *hi += eps;
    };
    pad(&mut x0, &mut x1);
    pad(&mut y0, &mut y1);
    let px = |x: f64| ML + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| MT + ph - (y - y0) / (y1 - y0) * ph;

    // Axis ticks: five per axis, evenly spaced over the padded range.
    for k in 0..5 {
        let f = k as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let (gx, gy) = (px(xv), py(yv));
        let _ = writeln!(
            svg,
            "<line x1=\"{gx:.2}\" y1=\"{MT}\" x2=\"{gx:.2}\" y2=\"{:.2}\" stroke=\"#ddd\"/>",
            MT + ph
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{ML}\" y1=\"{gy:.2}\" x2=\"{:.2}\" y2=\"{gy:.2}\" stroke=\"#ddd\"/>",
            ML + pw
        );
        let _ = writeln!(
            svg,
            "<text x=\"{gx:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#333\" \
             text-anchor=\"middle\">{}</text>",
            MT + ph + 16.0,
            fmt_tick(xv)
        );
        let ylab = if log { fmt_tick(10f64.powf(yv)) } else { fmt_tick(yv) };
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#333\" \
             text-anchor=\"end\">{ylab}</text>",
            ML - 6.0,
            gy + 4.0
        );
    }
    let _ = writeln!(svg, "{frame}");
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#222\" \
         text-anchor=\"middle\">{}</text>",
        ML + pw / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let ylab = if log { format!("{y_label} (log)") } else { y_label.to_string() };
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{:.2}\" font-size=\"12\" fill=\"#222\" \
         transform=\"rotate(-90 16 {:.2})\" text-anchor=\"middle\">{}</text>",
        MT + ph / 2.0,
        MT + ph / 2.0,
        escape(&ylab)
    );

    for (s, ((label, _), pts)) in series.iter().zip(&kept).enumerate() {
        let color = PALETTE[s % PALETTE.len()];
        if pts.len() > 1 {
            let mut attr = String::new();
            for (x, y) in pts {
                let _ = write!(attr, "{:.2},{:.2} ", px(*x), py(*y));
            }
            let _ = writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                attr.trim_end()
            );
        }
        for (x, y) in pts {
            let _ = writeln!(
                svg,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>",
                px(*x),
                py(*y)
            );
        }
        let ly = MT + 16.0 + 16.0 * s as f64;
        let lx = ML + pw - 130.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>",
            lx + 18.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#222\">{}</text>",
            lx + 24.0,
            ly + 4.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
