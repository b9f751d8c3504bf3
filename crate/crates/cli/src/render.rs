//! Small deterministic SVG line and bar plots for the results CSVs.

use std::fmt::Write as _;

use crate::artifact::ResultsCsv;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Curve,
    Decay,
    Table,
}

impl PlotKind {
    pub fn detect(csv: &ResultsCsv) -> Result<Self, String> {
        let has = |c: &str| csv.columns.iter().any(|x| x == c);
        let (kind, wanted): (PlotKind, &[&str]) = if has("C_hat") {
            (PlotKind::Curve, &["t", "C_hat", "stderr"])
        } else if has("entropy") {
            (PlotKind::Decay, &["t", "entropy"])
        } else if has("lambda_hat") {
            (PlotKind::Table, &["m", "n", "lambda_hat"])
        } else {
            return Err(format!(
                "unrecognized results CSV (columns {:?}); expected a C_hat, entropy or lambda_hat column",
                csv.columns
            ));
        };
        let missing = csv.missing(wanted);
        if missing.is_empty() {
            Ok(kind)
        } else {
            Err(format!("missing columns: {}", missing.join(", ")))
        }
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    log_y: bool,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let span = if self.x1 > self.x0 { self.x1 - self.x0 } else { 1.0 };
        LEFT + (x - self.x0) / span * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let (a, b, v) = if self.log_y { (self.y0.log10(), self.y1.log10(), y.log10()) } else { (self.y0, self.y1, y) };
        let span = if b > a { b - a } else { 1.0 };
        H - BOTTOM - (v - a) / span * (H - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (l, r, t, b) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(out, r#"<path d="M{l},{t}V{b}H{r}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let x = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
        let px = f.px(x);
        let _ = writeln!(out, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, b + 16.0, tick(x));
    }
    let ticks: Vec<f64> = if f.log_y {
        let (lo, hi) = (f.y0.log10().floor() as i32, f.y1.log10().ceil() as i32);
        (lo..=hi).map(|e| 10f64.powi(e)).filter(|y| *y >= f.y0 * 0.999 && *y <= f.y1 * 1.001).collect()
    } else {
        (0..=4).map(|i| f.y0 + (f.y1 - f.y0) * i as f64 / 4.0).collect()
    };
    for y in ticks {
        let py = f.py(y);
        let _ = writeln!(out, r#"<path d="M{:.2},{py:.2}H{l}" stroke="black"/>"#, l - 4.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, l - 6.0, py + 4.0, tick(y));
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>"#, (l + r) / 2.0, H - 12.0);
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{ylabel}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn polyline(out: &mut String, f: &Frame, pts: &[(f64, f64)], color: &str, dash: bool) {
    let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
    let dash = if dash { r#" stroke-dasharray="6 4""# } else { "" };
    let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#, d.join(" "));
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = TOP + 12.0 + 16.0 * i as f64;
        let x = W - RIGHT - 150.0;
        let _ = writeln!(out, r#"<path d="M{x},{y}h20" stroke="{color}" stroke-width="2"/>"#);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{label}</text>"#, x + 26.0, y + 4.0);
    }
}

fn positive_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite() && *v > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    (lo <= hi).then(|| if lo == hi { (lo / 2.0, hi * 2.0) } else { (lo, hi) })
}

fn curve(csv: &ResultsCsv) -> Result<String, String> {
    let t = csv.column("t").expect("checked");
    let c = csv.column("C_hat").expect("checked");
    let se = csv.column("stderr").expect("checked");
    let upper: Vec<f64> = c.iter().zip(&se).map(|(c, s)| c + s).collect();
    let lower: Vec<f64> = c.iter().zip(&se).map(|(c, s)| c - s).collect();
    let (y0, y1) = positive_range(c.iter().chain(&upper).chain(&lower).copied())
        .ok_or("C_hat has no positive values to plot on a log axis")?;
    let f = Frame { x0: t[0], x1: *t.last().unwrap(), y0, y1, log_y: true };
    let mut out = String::new();
    header(&mut out, "gradient estimate C(t)");
    axes(&mut out, &f, "t", "C_hat (log scale)");
    let band: Vec<(f64, f64)> = t
        .iter()
        .zip(&upper)
        .map(|(&x, &y)| (x, y))
        .chain(t.iter().zip(&lower).rev().map(|(&x, &y)| (x, y.max(y0))))
        .collect();
    let d: Vec<String> = band.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
    let _ = writeln!(out, r##"<polygon points="{}" fill="#1f77b4" fill-opacity="0.2" stroke="none"/>"##, d.join(" "));
    let pts: Vec<(f64, f64)> = t.iter().zip(&c).filter(|(_, y)| **y > 0.0).map(|(&x, &y)| (x, y)).collect();
    polyline(&mut out, &f, &pts, PALETTE[0], false);
    legend(&mut out, &[("C_hat", PALETTE[0]), ("± stderr", "#a6c8e4")]);
    out.push_str("</svg>\n");
    Ok(out)
}

fn decay(csv: &ResultsCsv) -> Result<String, String> {
    let t = csv.column("t").expect("checked");
    let d = csv.column("entropy").expect("checked");
    let lambda = csv.note("lambda_hat").and_then(|v| v.parse::<f64>().ok());
    let envelope: Option<Vec<f64>> = lambda.map(|l| t.iter().map(|&x| (-2.0 * l * (x - t[0])).exp() * d[0]).collect());
    let (y0, y1) = positive_range(d.iter().chain(envelope.iter().flatten()).copied())
        .ok_or("entropy has no positive values to plot on a log axis")?;
    let f = Frame { x0: t[0], x1: *t.last().unwrap(), y0, y1, log_y: true };
    let mut out = String::new();
    header(&mut out, "relative entropy decay");
    axes(&mut out, &f, "t", "D(t) (log scale)");
    let pts: Vec<(f64, f64)> = t.iter().zip(&d).filter(|(_, y)| **y > 0.0).map(|(&x, &y)| (x, y)).collect();
    polyline(&mut out, &f, &pts, PALETTE[0], false);
    let mut entries = vec![("D(S_t rho)", PALETTE[0])];
    if let Some(env) = &envelope {
        let pts: Vec<(f64, f64)> = t.iter().zip(env).filter(|(_, y)| **y >= y0).map(|(&x, &y)| (x, y)).collect();
        polyline(&mut out, &f, &pts, PALETTE[1], true);
        entries.push(("exp(-2 lambda t) D(0)", PALETTE[1]));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    Ok(out)
}

fn bars(csv: &ResultsCsv) -> Result<String, String> {
    let m = csv.column("m").expect("checked");
    let n = csv.column("n").expect("checked");
    let lam = csv.column("lambda_hat").expect("checked");
    let mut ms: Vec<f64> = m.clone();
    ms.sort_by(f64::total_cmp);
    ms.dedup();
    let mut ns: Vec<f64> = n.clone();
    ns.sort_by(f64::total_cmp);
    ns.dedup();
    let top = lam.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max).max(f64::MIN_POSITIVE) * 1.1;
    let f = Frame { x0: 0.0, x1: ns.len() as f64, y0: 0.0, y1: top, log_y: false };
    let mut out = String::new();
    header(&mut out, "lambda_hat versus n");
    let (l, r, b) = (LEFT, W - RIGHT, H - BOTTOM);
    let _ = writeln!(out, r#"<path d="M{l},{TOP}V{b}H{r}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let y = top * i as f64 / 4.0;
        let py = f.py(y);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, l - 6.0, py + 4.0, tick(y));
    }
    let group = (r - l) / ns.len() as f64;
    let width = group * 0.8 / ms.len() as f64;
    for (gi, nv) in ns.iter().enumerate() {
        let gx = l + group * gi as f64 + group * 0.1;
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">n={nv}</text>"#, gx + group * 0.4, b + 16.0);
        for (mi, mv) in ms.iter().enumerate() {
            if let Some(k) = (0..m.len()).find(|&k| m[k] == *mv && n[k] == *nv) {
                let y = f.py(lam[k].max(0.0));
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{y:.2}" width="{width:.2}" height="{:.2}" fill="{}"/>"#,
                    gx + width * mi as f64,
                    b - y,
                    PALETTE[mi % PALETTE.len()]
                );
            }
        }
    }
    let labels: Vec<String> = ms.iter().map(|v| format!("m={v}")).collect();
    let entries: Vec<(&str, &str)> =
        labels.iter().enumerate().map(|(i, s)| (s.as_str(), PALETTE[i % PALETTE.len()])).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render(csv: &ResultsCsv) -> Result<(PlotKind, String), String> {
    let kind = PlotKind::detect(csv)?;
    let svg = match kind {
        PlotKind::Curve => curve(csv)?,
        PlotKind::Decay => decay(csv)?,
        PlotKind::Table => bars(csv)?,
    };
    Ok((kind, svg))
}
