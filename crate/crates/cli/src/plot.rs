//! Self-contained SVG plots of sweep results and spectra.

use crate::CliError;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 56.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// BER columns of a sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub param: String,
    pub x: Vec<f64>,
    pub ber: Vec<f64>,
    /// Per-row per-band BER.
    pub band_ber: Vec<Vec<f64>>,
}

fn parse_err(line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::Parse { line, msg: msg.to_string() }
}

/// Reads the `param`, `value`, `ber` and `band_ber` columns of a sweep CSV.
pub fn read_sweep_csv(text: &str) -> Result<SweepTable, CliError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_err(e.position().map_or(1, |p| p.line()), e))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column '{name}'")))
    };
    let (c_param, c_value, c_ber, c_band) = (column("param")?, column("value")?, column("ber")?, column("band_ber")?);
    let mut table = SweepTable {
        param: String::new(),
        x: Vec::new(),
        ber: Vec::new(),
        band_ber: Vec::new(),
    };
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e))?;
        let line = record.position().map_or(i as u64 + 2, |p| p.line());
        let number = |s: &str, what: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("bad {what} '{s}'")))
        };
        if i == 0 {
            table.param = record[c_param].to_string();
        }
        let x = if record[c_value].is_empty() { i as f64 } else { number(&record[c_value], "value")? };
        let ber = number(&record[c_ber], "ber")?;
        let bands = record[c_band]
            .split(';')
            .map(|s| number(s, "band BER"))
            .collect::<Result<Vec<_>, _>>()?;
        if !(0.0..=1.0).contains(&ber) || bands.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(parse_err(line, "BER outside [0, 1]"));
        }
        table.x.push(x);
        table.ber.push(ber);
        table.band_ber.push(bands);
    }
    if table.x.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    Ok(table)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn x_range(xs: &[f64]) -> (f64, f64) {
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, xticks: &[f64], xlabel: &str, yticks: &[(f64, String)], ylabel: &str) {
    let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(out, r#"<rect x="{l}" y="{t}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#, r - l, b - t);
    for &x in xticks {
        let px = f.px(x);
        let _ = writeln!(out, r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{:.1}" stroke="black"/>"#, b + 5.0);
        let _ = writeln!(out, r#"<text x="{px:.2}" y="{:.1}" text-anchor="middle">{}</text>"#, b + 18.0, fmt_tick(x));
    }
    for (y, label) in yticks {
        let py = f.py(*y);
        let _ = writeln!(out, r##"<line x1="{l}" y1="{py:.2}" x2="{r}" y2="{py:.2}" stroke="#dddddd"/>"##);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#, l - 6.0, py + 4.0, label);
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, HEIGHT - 14.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(ylabel)
    );
}

fn x_ticks(xs: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut distinct: Vec<f64> = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() <= 12 {
        distinct
    } else {
        (0..=5).map(|i| lo + (hi - lo) * i as f64 / 5.0).collect()
    }
}

fn axis_label(param: &str) -> &str {
    match param {
        "alpha" => "compression factor alpha",
        "l_bands" => "number of sub-bands L",
        "rop_dbm" => "received optical power (dBm)",
        "noise_psd" => "receiver noise variance",
        _ => "run",
    }
}

/// BER against the swept value on a logarithmic axis. Points with BER 0
/// are drawn at the axis minimum as hollow triangles.
pub fn ber_plot_svg(table: &SweepTable) -> String {
    let positive = table
        .ber
        .iter()
        .chain(table.band_ber.iter().flatten())
        .cloned()
        .filter(|&b| b > 0.0);
    let min_pos = positive.clone().fold(f64::INFINITY, f64::min);
    let max_pos = positive.fold(0.0, f64::max);
    let any_zero = table.ber.iter().chain(table.band_ber.iter().flatten()).any(|&b| b == 0.0);
    let (mut lo, hi) = if min_pos.is_finite() {
        (min_pos.log10().floor(), max_pos.log10().ceil().max(min_pos.log10().floor() + 1.0))
    } else {
        (-6.0, 0.0)
    };
    if any_zero && min_pos.is_finite() {
        lo -= 1.0;
    }
    let (x0, x1) = x_range(&table.x);
    let f = Frame { x0, x1, y0: lo, y1: hi };
    let mut out = String::new();
    let title = if table.param.is_empty() { "BER".to_string() } else { format!("BER vs {}", table.param) };
    header(&mut out, &title);
    let yticks: Vec<(f64, String)> = (lo as i64..=hi as i64).map(|d| (d as f64, format!("1e{d}"))).collect();
    axes(&mut out, &f, &x_ticks(&table.x, x0, x1), axis_label(&table.param), &yticks, "BER");

    let n_bands = table.band_ber.iter().map(Vec::len).max().unwrap_or(0);
    let mut series: Vec<(String, &str, Vec<f64>, bool)> = Vec::new();
    if n_bands > 1 {
        for band in 0..n_bands {
            let ys = table
                .band_ber
                .iter()
                .map(|r| r.get(band).copied().unwrap_or(f64::NAN))
                .collect();
            series.push((format!("band {}", band + 1), COLOURS[band % COLOURS.len()], ys, true));
        }
    }
    series.push(("overall".into(), "black", table.ber.clone(), false));

    for (idx, (name, colour, ys, dashed)) in series.iter().enumerate() {
        let dash = if *dashed { r#" stroke-dasharray="5 3""# } else { "" };
        let pts: Vec<String> = table
            .x
            .iter()
            .zip(ys)
            .filter(|(_, y)| y.is_finite())
            .map(|(&x, &y)| {
                let ly = if y > 0.0 { y.log10() } else { lo };
                format!("{:.2},{:.2}", f.px(x), f.py(ly))
            })
            .collect();
        if pts.len() > 1 {
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"{dash}/>"#,
                pts.join(" ")
            );
        }
        for (&x, &y) in table.x.iter().zip(ys).filter(|(_, y)| y.is_finite()) {
            let (px, py) = (f.px(x), f.py(if y > 0.0 { y.log10() } else { lo }));
            if y > 0.0 {
                let _ = writeln!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{colour}"/>"#);
            } else {
                let _ = writeln!(
                    out,
                    r#"<path class="zero-ber" d="M{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2} Z" fill="white" stroke="{colour}"/>"#,
                    px - 5.0,
                    py - 8.0,
                    px + 5.0,
                    py - 8.0,
                    px,
                    py
                );
            }
        }
        let ly = TOP + 14.0 + 18.0 * idx as f64;
        let lx = WIDTH - RIGHT + 14.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{colour}" stroke-width="1.5"{dash}/>"#,
            lx + 24.0
        );
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 30.0, ly + 4.0, escape(name));
    }
    if any_zero {
        let ly = TOP + 14.0 + 18.0 * series.len() as f64;
        let lx = WIDTH - RIGHT + 14.0;
        let _ = writeln!(
            out,
            r#"<path d="M{:.1},{:.1} L{:.1},{:.1} L{:.1},{:.1} Z" fill="white" stroke="black"/>"#,
            lx + 7.0,
            ly - 6.0,
            lx + 17.0,
            ly - 6.0,
            lx + 12.0,
            ly + 2.0
        );
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">BER = 0</text>"#, lx + 30.0, ly + 4.0);
    }
    out.push_str("</svg>\n");
    out
}

/// Power spectrum in dB against frequency, with an optional marked edge.
pub fn psd_plot_svg(spectrum: &[(f64, f64)], edge_hz: Option<f64>, floor_db: f64) -> String {
    let xs: Vec<f64> = spectrum.iter().map(|(f, _)| f / 1e9).collect();
    let x1 = xs.iter().cloned().fold(0.0, f64::max).max(1e-9);
    let f = Frame { x0: 0.0, x1, y0: floor_db, y1: 0.0 };
    let mut out = String::new();
    header(&mut out, "Power spectral density");
    let step = if -floor_db > 40.0 { 20.0 } else { 10.0 };
    let yticks: Vec<(f64, String)> = (0..)
        .map(|i| -(i as f64) * step)
        .take_while(|&v| v >= floor_db)
        .map(|v| (v, fmt_tick(v)))
        .collect();
    let xticks: Vec<f64> = (0..)
        .map(|i| i as f64 * 2.0)
        .take_while(|&v| v <= x1)
        .collect();
    axes(&mut out, &f, &xticks, "frequency (GHz)", &yticks, "PSD (dB)");
    let pts: Vec<String> = spectrum
        .iter()
        .map(|&(hz, db)| format!("{:.2},{:.2}", f.px(hz / 1e9), f.py(db.max(floor_db))))
        .collect();
    let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##, pts.join(" "));
    if let Some(edge) = edge_hz {
        let px = f.px(edge / 1e9);
        let _ = writeln!(
            out,
            r##"<line class="edge" x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.1}" stroke="#d62728" stroke-dasharray="4 3"/>"##,
            HEIGHT - BOTTOM
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.1}" fill="#d62728">{:.2} GHz</text>"##,
            px + 4.0,
            TOP + 14.0,
            edge / 1e9
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Reads a sweep CSV and writes its BER plot next to it with an `.svg`
/// extension.
pub fn emit_ber_plot(csv_path: &Path) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(csv_path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", csv_path.display())))?;
    let table = read_sweep_csv(&text)?;
    let out = csv_path.with_extension("svg");
    std::fs::write(&out, ber_plot_svg(&table))
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", out.display())))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "param,value,ber,band_ber\nalpha,1,1.00000e-3,2.00000e-3;0.00000e0\nalpha,0.9,1.00000e-4,1.00000e-4;1.00000e-4\nalpha,0.8,0.00000e0,0.00000e0;0.00000e0\n";

    #[test]
    fn reads_sweep_columns() {
        let t = read_sweep_csv(CSV).unwrap();
        assert_eq!(t.param, "alpha");
        assert_eq!(t.x, vec![1.0, 0.9, 0.8]);
        assert_eq!(t.ber, vec![1e-3, 1e-4, 0.0]);
        assert_eq!(t.band_ber[0], vec![2e-3, 0.0]);
    }

    #[test]
    fn malformed_rows_report_their_line() {
        let bad = CSV.replace("1.00000e-4,1.00000e-4;", "oops,1.00000e-4;");
        match read_sweep_csv(&bad) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let short = "param,value,ber,band_ber\nalpha,1,1e-3\n";
        match read_sweep_csv(short) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_sweep_csv("param,value\n"), Err(CliError::Parse { line: 1, .. })));
        assert!(read_sweep_csv("param,value,ber,band_ber\n").is_err());
        let big = CSV.replace("1.00000e-3,2", "1.5,2");
        assert!(read_sweep_csv(&big).is_err());
    }

    #[test]
    fn zero_ber_is_clamped_to_axis_minimum() {
        let t = read_sweep_csv(CSV).unwrap();
        let svg = ber_plot_svg(&t);
        // smallest positive BER is 1e-4, so the axis starts a decade lower
        assert!(svg.contains(">1e-5<"));
        assert!(!svg.contains(">1e-6<"));
        assert_eq!(svg.matches(r#"class="zero-ber""#).count(), 4);
        assert!(svg.contains("BER = 0"));
        let bottom = format!("{:.2}", HEIGHT - BOTTOM);
        assert!(svg.lines().filter(|l| l.contains("zero-ber")).all(|l| l.contains(&bottom)));
    }

    #[test]
    fn all_zero_sweep_still_plots() {
        let t = SweepTable {
            param: "rop_dbm".into(),
            x: vec![-1.0],
            ber: vec![0.0],
            band_ber: vec![vec![0.0]],
        };
        let svg = ber_plot_svg(&t);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("1e-6"));
    }

    #[test]
    fn psd_plot_marks_edge() {
        let spec: Vec<(f64, f64)> = (0..=130).map(|i| (i as f64 * 1e8, if i < 98 { 0.0 } else { -30.0 })).collect();
        let svg = psd_plot_svg(&spec, Some(9.75e9), -60.0);
        assert!(svg.contains("9.75 GHz"));
        assert!(svg.contains(r#"class="edge""#));
    }
}
