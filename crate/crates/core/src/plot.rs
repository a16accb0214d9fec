//! Log–log SVG chart of mean MSE against training-set size.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fileio::parse_f64;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 4] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd"];

/// One named series of (J, MSE) points, J ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Reads a `problem,mode,J,mean_mse` file into one series per mode.
pub fn parse_means(text: &str) -> Result<(String, Vec<Series>)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "problem,mode,J,mean_mse" => {}
        _ => {
            return Err(Error::Format {
                line: 1,
                message: "expected header 'problem,mode,J,mean_mse'".into(),
            })
        }
    }
    let mut problem = None;
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (idx, line) in lines {
        let no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Format {
                line: no,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        match &problem {
            None => problem = Some(fields[0].to_string()),
            Some(p) if p != fields[0] => {
                return Err(Error::Format {
                    line: no,
                    message: "means file mixes problems".into(),
                })
            }
            _ => {}
        }
        let j = parse_f64(fields[2], no)?;
        let mse = parse_f64(fields[3], no)?;
        if !(j > 0.0) {
            return Err(Error::Format {
                line: no,
                message: format!("J must be positive, got {j}"),
            });
        }
        series.entry(fields[1].to_string()).or_default().push((j, mse));
    }
    let problem = problem.ok_or(Error::Format {
        line: 2,
        message: "means file has no data rows".into(),
    })?;
    let series = series
        .into_iter()
        .map(|(name, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { name, points }
        })
        .collect();
    Ok((problem, series))
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

/// Renders the series on log₂ J and log₁₀ MSE axes. Non-positive or
/// non-finite MSE values are left out of the polylines.
pub fn render_svg(title: &str, series: &[Series]) -> Result<String> {
    let usable = |p: &&(f64, f64)| p.1 > 0.0 && p.1.is_finite();
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().filter(usable)).copied().collect();
    if all.is_empty() {
        return Err(Error::Format {
            line: 0,
            message: "nothing to plot".into(),
        });
    }
    let lx: Vec<f64> = all.iter().map(|p| p.0.log2()).collect();
    let ly: Vec<f64> = all.iter().map(|p| p.1.log10()).collect();
    let (mut x0, mut x1) = (lx.iter().cloned().fold(f64::INFINITY, f64::min), lx.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let mut y0 = ly.iter().cloned().fold(f64::INFINITY, f64::min).floor();
    let mut y1 = ly.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil();
    x0 = x0.floor();
    x1 = x1.ceil();
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |v: f64| LEFT + (v - x0) / (x1 - x0) * plot_w;
    let sy = |v: f64| TOP + (y1 - v) / (y1 - y0) * plot_h;

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        px(LEFT + plot_w / 2.0),
        escape(title)
    )
    .unwrap();
    writeln!(
        out,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        px(LEFT),
        px(TOP),
        px(plot_w),
        px(plot_h)
    )
    .unwrap();
    let mut e = x0 as i64;
    while e as f64 <= x1 {
        let x = sx(e as f64);
        writeln!(
            out,
            r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#dddddd"/><text x="{0}" y="{3}" text-anchor="middle">2<tspan baseline-shift="super" font-size="9">{4}</tspan></text>"##,
            px(x),
            px(TOP),
            px(TOP + plot_h),
            px(TOP + plot_h + 18.0),
            e
        )
        .unwrap();
        e += 1;
    }
    let mut e = y0 as i64;
    while e as f64 <= y1 {
        let y = sy(e as f64);
        writeln!(
            out,
            r##"<line x1="{1}" y1="{0}" x2="{2}" y2="{0}" stroke="#dddddd"/><text x="{3}" y="{4}" text-anchor="end">10<tspan baseline-shift="super" font-size="9">{5}</tspan></text>"##,
            px(y),
            px(LEFT),
            px(LEFT + plot_w),
            px(LEFT - 6.0),
            px(y + 4.0),
            e
        )
        .unwrap();
        e += 1;
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">J</text>"#,
        px(LEFT + plot_w / 2.0),
        px(HEIGHT - 15.0)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">MSE</text>"#,
        px(TOP + plot_h / 2.0)
    )
    .unwrap();
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(usable)
            .map(|p| format!("{},{}", px(sx(p.0.log2())), px(sy(p.1.log10()))))
            .collect();
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        )
        .unwrap();
        for p in &pts {
            let (x, y) = p.split_once(',').unwrap();
            writeln!(out, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#).unwrap();
        }
        let ly = TOP + 16.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 15.0;
        writeln!(
            out,
            r#"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{tx}" y="{ty}">{name}</text>"#,
            x0 = px(lx),
            y = px(ly),
            x1 = px(lx + 24.0),
            tx = px(lx + 30.0),
            ty = px(ly + 4.0),
            name = escape(&s.name)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Means file text to SVG text.
pub fn emit_plot(means_csv: &str) -> Result<String> {
    let (problem, series) = parse_means(means_csv)?;
    render_svg(&format!("{problem}: MSE vs J"), &series)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
