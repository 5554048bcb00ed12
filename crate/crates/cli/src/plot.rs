//! Static SVG rendering of summary curves: one polyline per estimator over
//! the `d` grid, optional 85% percentile error bars, and optional
//! theoretical bound overlays. No display server involved.

use anyhow::{bail, Context, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use interp_core::bounds::{ideal_mse_lower_gaussian, ideal_mse_upper_gaussian, BoundParams};
use interp_core::experiments::SummaryRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Median,
    Mean,
}

impl std::str::FromStr for Style {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(Style::Median),
            "mean" => Ok(Style::Mean),
            other => bail!("unknown plot style '{other}' (expected median|mean)"),
        }
    }
}

/// Parameters recovered from the summary header comments, used for bound
/// overlays.
#[derive(Debug, Default, Clone)]
pub struct HeaderParams {
    pub scenario: Option<String>,
    pub n: Option<usize>,
    pub sigma2: Option<f64>,
}

pub fn parse_header(text: &str) -> HeaderParams {
    let mut params = HeaderParams::default();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim();
        if let Some((key, value)) = body.split_once('=') {
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            match key {
                "scenario" => params.scenario = Some(value.to_string()),
                "n" => params.n = value.parse().ok(),
                "sigma2" => params.sigma2 = value.parse().ok(),
                _ => {}
            }
        }
    }
    params
}

/// Reads summary rows, checking the column set.
pub fn read_summary(path: &Path) -> Result<(HeaderParams, Vec<SummaryRow>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let params = parse_header(&text);
    let data: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    let mut lines = data.lines();
    let header = lines.next().unwrap_or_default();
    let columns: Vec<&str> = header.split(',').collect();
    for required in interp_core::experiments::record::SUMMARY_COLUMNS {
        if !columns.contains(&required) {
            bail!("missing column '{required}' in {}", path.display());
        }
    }
    let col = |name: &str| columns.iter().position(|c| *c == name).unwrap();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let opt = |i: usize| -> Option<f64> { fields.get(i).and_then(|s| s.parse().ok()) };
        rows.push(SummaryRow {
            scenario: fields[col("scenario")].to_string(),
            estimator: fields[col("estimator")].to_string(),
            n: fields[col("n")].parse().unwrap_or(0),
            d: fields[col("d")].parse().unwrap_or(0),
            trials_total: fields[col("trials_total")].parse().unwrap_or(0),
            trials_ok: fields[col("trials_ok")].parse().unwrap_or(0),
            mean: opt(col("mean")),
            median: opt(col("median")),
            p7_5: opt(col("p7_5")),
            p92_5: opt(col("p92_5")),
        });
    }
    Ok((params, rows))
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    band: Vec<(f64, f64, f64)>, // (x, lo, hi)
    dashed: bool,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Renders the summary into SVG files in `out_dir`: `<scenario>-<style>.svg`
/// and, for the median style, an `-errorbars` variant with the 85% band.
pub fn render(
    summary_path: &Path,
    style: Style,
    out_dir: &Path,
    overlay_bounds: bool,
) -> Result<Vec<PathBuf>> {
    let (params, rows) = read_summary(summary_path)?;
    if rows.is_empty() {
        bail!("summary {} contains no data rows", summary_path.display());
    }
    let scenario = params
        .scenario
        .clone()
        .or_else(|| rows.first().map(|r| r.scenario.clone()))
        .unwrap_or_else(|| "summary".into());

    let mut estimators: Vec<String> = Vec::new();
    for r in &rows {
        if !estimators.contains(&r.estimator) {
            estimators.push(r.estimator.clone());
        }
    }

    let build_series = |with_band: bool| -> Vec<Series> {
        let mut out: Vec<Series> = estimators
            .iter()
            .map(|est| {
                let mut pts = Vec::new();
                let mut band = Vec::new();
                for r in rows.iter().filter(|r| &r.estimator == est) {
                    let v = match style {
                        Style::Median => r.median,
                        Style::Mean => r.mean,
                    };
                    if let Some(v) = v {
                        pts.push((r.d as f64, v));
                        if with_band {
                            if let (Some(lo), Some(hi)) = (r.p7_5, r.p92_5) {
                                band.push((r.d as f64, lo, hi));
                            }
                        }
                    }
                }
                pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                band.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                Series {
                    label: est.clone(),
                    points: pts,
                    band,
                    dashed: false,
                }
            })
            .collect();
        if overlay_bounds {
            if let (Some(n), Some(sigma2)) = (params.n, params.sigma2) {
                let ds: Vec<usize> = rows.iter().map(|r| r.d).collect();
                let mut lower = Vec::new();
                let mut upper = Vec::new();
                for &d in &ds {
                    if d == 0 {
                        continue;
                    }
                    let p = BoundParams::new(n, d, sigma2, 0.5);
                    lower.push((d as f64, ideal_mse_lower_gaussian(&p)));
                    let up = ideal_mse_upper_gaussian(&p);
                    if !up.flagged {
                        upper.push((d as f64, up.value));
                    }
                }
                lower.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                lower.dedup_by(|a, b| a.0 == b.0);
                upper.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                upper.dedup_by(|a, b| a.0 == b.0);
                out.push(Series {
                    label: "ideal lower bound (delta=0.5)".into(),
                    points: lower,
                    band: Vec::new(),
                    dashed: true,
                });
                out.push(Series {
                    label: "ideal upper bound (delta=0.5)".into(),
                    points: upper,
                    band: Vec::new(),
                    dashed: true,
                });
            }
        }
        out.retain(|s| !s.points.is_empty());
        out
    };

    std::fs::create_dir_all(out_dir)?;
    let style_name = match style {
        Style::Median => "median",
        Style::Mean => "mean",
    };
    let mut written = Vec::new();

    let base = build_series(false);
    if base.is_empty() {
        bail!("no plottable values in {}", summary_path.display());
    }
    let path = out_dir.join(format!("{scenario}-{style_name}.svg"));
    std::fs::write(&path, render_svg(&scenario, style_name, &base)?)?;
    written.push(path);

    if style == Style::Median {
        let banded = build_series(true);
        let path = out_dir.join(format!("{scenario}-{style_name}-errorbars.svg"));
        std::fs::write(
            &path,
            render_svg(&scenario, "median with 85% band", &banded)?,
        )?;
        written.push(path);
    }
    Ok(written)
}

fn render_svg(title: &str, subtitle: &str, series: &[Series]) -> Result<String> {
    const W: f64 = 840.0;
    const H: f64 = 560.0;
    const ML: f64 = 80.0;
    const MR: f64 = 220.0;
    const MT: f64 = 50.0;
    const MB: f64 = 60.0;

    let xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    let mut ys: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).collect();
    ys.extend(series.iter().flat_map(|s| s.band.iter().flat_map(|b| [b.1, b.2])));
    let (xmin, xmax) = min_max(&xs);
    let positive_y: Vec<f64> = ys.iter().cloned().filter(|v| *v > 0.0).collect();

    // Log axes once the data spans enough range (the paper's figures are
    // log-log); degenerate/negative data falls back to linear.
    let logx = xmin > 0.0 && xmax / xmin >= 8.0;
    let (ymin_pos, ymax_pos) = if positive_y.is_empty() {
        (1e-3, 1.0)
    } else {
        min_max(&positive_y)
    };
    let logy = !positive_y.is_empty()
        && positive_y.len() == ys.len()
        && ymax_pos / ymin_pos >= 100.0;
    let (ymin, ymax) = if logy {
        (ymin_pos, ymax_pos)
    } else {
        min_max(&ys)
    };

    let fx = move |x: f64| -> f64 {
        let (a, b) = if logx {
            (x.ln(), (xmin.ln(), xmax.ln()))
        } else {
            (x, (xmin, xmax))
        };
        let span = (b.1 - b.0).max(1e-12);
        ML + (a - b.0) / span * (W - ML - MR)
    };
    let fy = move |y: f64| -> f64 {
        let (a, b) = if logy {
            (y.max(1e-300).ln(), (ymin.ln(), ymax.ln()))
        } else {
            (y, (ymin, ymax))
        };
        let span = (b.1 - b.0).max(1e-12);
        H - MB - (a - b.0) / span * (H - MT - MB)
    };

    let mut svg = String::new();
    write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )?;
    write!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#)?;
    write!(
        svg,
        r#"<text x="{}" y="28" font-family="sans-serif" font-size="18">{} ({})</text>"#,
        ML,
        escape(title),
        escape(subtitle)
    )?;
    // Axes.
    write!(
        svg,
        r#"<line x1="{ML}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - MB,
        W - MR,
        H - MB
    )?;
    write!(
        svg,
        r#"<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{}" stroke="black"/>"#,
        H - MB
    )?;
    // Tick labels at the extremes plus intermediate decades on log axes.
    let x_ticks = axis_ticks(xmin, xmax, logx);
    for t in &x_ticks {
        let px = fx(*t);
        write!(
            svg,
            r#"<line x1="{px}" y1="{}" x2="{px}" y2="{}" stroke="black"/>"#,
            H - MB,
            H - MB + 5.0
        )?;
        write!(
            svg,
            r#"<text x="{px}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            H - MB + 18.0,
            format_tick(*t)
        )?;
    }
    let y_ticks = axis_ticks(ymin, ymax, logy);
    for t in &y_ticks {
        let py = fy(*t);
        write!(
            svg,
            r#"<line x1="{}" y1="{py}" x2="{ML}" y2="{py}" stroke="black"/>"#,
            ML - 5.0
        )?;
        write!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            ML - 8.0,
            py + 4.0,
            format_tick(*t)
        )?;
    }
    write!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">number of features d</text>"#,
        (ML + W - MR) / 2.0,
        H - 18.0
    )?;
    write!(
        svg,
        r#"<text x="20" y="{}" font-family="sans-serif" font-size="13" transform="rotate(-90 20 {})" text-anchor="middle">test MSE</text>"#,
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    )?;

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        // Error bars first so lines draw over them.
        for (x, lo, hi) in &s.band {
            let px = fx(*x);
            write!(
                svg,
                r#"<line x1="{px}" y1="{}" x2="{px}" y2="{}" stroke="{color}" stroke-width="1" opacity="0.6"/>"#,
                fy(*lo),
                fy(*hi)
            )?;
            for v in [*lo, *hi] {
                write!(
                    svg,
                    r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="1" opacity="0.6"/>"#,
                    px - 4.0,
                    fy(v),
                    px + 4.0,
                    fy(v)
                )?;
            }
        }
        let path: String = s
            .points
            .iter()
            .enumerate()
            .map(|(j, (x, y))| {
                format!("{}{:.2},{:.2}", if j == 0 { "M" } else { "L" }, fx(*x), fy(*y))
            })
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        write!(
            svg,
            r#"<path d="{path}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#
        )?;
        for (x, y) in &s.points {
            write!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                fx(*x),
                fy(*y)
            )?;
        }
        // Legend.
        let ly = MT + 18.0 * i as f64;
        write!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#,
            W - MR + 10.0,
            W - MR + 40.0
        )?;
        write!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            W - MR + 46.0,
            ly + 4.0,
            escape(&s.label)
        )?;
    }
    svg.push_str("</svg>");
    Ok(svg)
}

fn min_max(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn axis_ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log && lo > 0.0 {
        let mut ticks = Vec::new();
        let mut decade = 10f64.powf(lo.log10().floor());
        while decade <= hi * 1.0000001 {
            if decade >= lo * 0.9999999 {
                ticks.push(decade);
            }
            decade *= 10.0;
        }
        if ticks.len() < 2 {
            vec![lo, hi]
        } else {
            ticks
        }
    } else {
        let span = hi - lo;
        (0..=4).map(|i| lo + span * i as f64 / 4.0).collect()
    }
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 && v.abs() < 10_000.0 {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
