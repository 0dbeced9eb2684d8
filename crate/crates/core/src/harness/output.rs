//! CSV tables, a tiny SVG plotter and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

/// Shortest round-trip form, so identical runs give identical bytes.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub struct Emitter {
    dir: PathBuf,
    pub files: Vec<String>,
}

impl Emitter {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<String>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(self.path(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(name.to_string())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<String> {
        std::fs::write(self.path(name), body)?;
        self.files.push(name.to_string());
        Ok(name.to_string())
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ExperimentRecord {
    pub name: String,
    pub files: Vec<String>,
    pub pass: BTreeMap<String, bool>,
    pub values: BTreeMap<String, Value>,
    /// Reported but not gating the exit code.
    pub advisory: BTreeMap<String, Value>,
}

impl ExperimentRecord {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn pass(&mut self, key: &str, ok: bool) {
        self.pass.insert(key.to_string(), ok);
    }

    pub fn value(&mut self, key: &str, v: impl Serialize) {
        self.values.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn advisory(&mut self, key: &str, v: impl Serialize) {
        self.advisory.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn all_pass(&self) -> bool {
        self.pass.values().all(|v| *v)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub scenario: String,
    pub seed: u64,
    pub overrides: Vec<String>,
    pub parameters: BTreeMap<String, String>,
    pub experiments: Vec<ExperimentRecord>,
    /// Every file written to the output directory, this one included.
    pub files: Vec<String>,
    pub exit_code: i32,
    pub error: Option<String>,
}

/// One data series of a plot.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    pub line: bool,
    pub color: &'a str,
}

pub struct Plot<'a> {
    pub title: &'a str,
    pub xlabel: &'a str,
    pub ylabel: &'a str,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series<'a>>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const L: f64 = 70.0;
const R: f64 = 20.0;
const T: f64 = 40.0;
const B: f64 = 50.0;

fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        (lo.floor() as i32..=hi.ceil() as i32)
            .map(f64::from)
            .filter(|v| *v >= lo - 1e-9 && *v <= hi + 1e-9)
            .collect()
    } else {
        let span = (hi - lo).max(1e-300);
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let first = (lo / step).ceil() as i64;
        let last = (hi / step).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    }
}

impl Plot<'_> {
    pub fn render(&self) -> String {
        let tx = |v: f64| if self.log_x { v.log10() } else { v };
        let ty = |v: f64| if self.log_y { v.log10() } else { v };
        let pts: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().cloned())
            .filter(|(x, y)| (!self.log_x || *x > 0.0) && (!self.log_y || *y > 0.0) && x.is_finite() && y.is_finite())
            .map(|(x, y)| (tx(x), ty(y)))
            .collect();
        let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), (x, y)| (a.min(*x), b.max(*x), c.min(*y), d.max(*y)),
        );
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 < 1e-12 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let px = |x: f64| L + (x - x0) / (x1 - x0) * (W - L - R);
        let py = |y: f64| H - B - (y - y0) / (y1 - y0) * (H - T - B);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(self.title));
        let _ = writeln!(
            s,
            r#"<rect x="{L}" y="{T}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - L - R,
            H - T - B
        );
        for t in ticks(x0, x1, self.log_x) {
            let label = if self.log_x { format!("1e{t}") } else { short(t) };
            let x = px(t);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, H - B, H - B + 5.0);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{label}</text>"#, H - B + 18.0);
        }
        for t in ticks(y0, y1, self.log_y) {
            let label = if self.log_y { format!("1e{t}") } else { short(t) };
            let y = py(t);
            let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{L}" y2="{y:.2}" stroke="black"/>"#, L - 5.0);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, L - 8.0, y + 4.0);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (L + W - R) / 2.0, H - 12.0, esc(self.xlabel));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            (T + H - B) / 2.0,
            esc(self.ylabel)
        );
        for (k, ser) in self.series.iter().enumerate() {
            let p: Vec<(f64, f64)> = ser
                .points
                .iter()
                .filter(|(x, y)| (!self.log_x || *x > 0.0) && (!self.log_y || *y > 0.0) && x.is_finite() && y.is_finite())
                .map(|(x, y)| (px(tx(*x)), py(ty(*y))))
                .collect();
            if ser.line {
                let d: Vec<String> = p.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, ser.color, d.join(" "));
            } else {
                for (x, y) in p {
                    let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"/>"#, ser.color);
                }
            }
            if !ser.label.is_empty() {
                let y = T + 16.0 + 16.0 * k as f64;
                let _ = writeln!(s, r#"<text x="{}" y="{y}" fill="{}">{}</text>"#, L + 10.0, ser.color, esc(ser.label));
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn short(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, 1e-300, -2.5, 123456.789, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let p = Plot {
            title: "a < b",
            xlabel: "x",
            ylabel: "y",
            log_x: true,
            log_y: true,
            series: vec![Series {
                label: "pts",
                points: vec![(1e-3, 1e-2), (1e-1, 1.0), (0.0, 1.0)],
                line: false,
                color: "black",
            }],
        };
        let s = p.render();
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert_eq!(s.matches("<circle").count(), 2);
        assert!(s.contains("a &lt; b"));
    }
}
