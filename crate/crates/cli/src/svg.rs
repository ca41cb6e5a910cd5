//! Four-panel trajectory plot: states, estimates, estimate errors, tracking errors.

use std::fmt::Write;

use bitrack::engine::TrajectoryPoint;
use bitrack::Experiment;

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 48.0;

struct Series {
    label: String,
    values: Vec<f64>,
    dashed: bool,
}

fn xpos(k: u64, k_max: f64) -> f64 {
    // log axis, k = 0 sits at the left edge
    ((k as f64) + 1.0).log10() / (k_max + 1.0).log10().max(1e-12)
}

fn panel(out: &mut String, ox: f64, oy: f64, title: &str, ks: &[u64], series: &[Series]) {
    let k_max = *ks.last().unwrap_or(&1) as f64;
    let (mut lo, mut hi) = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let (pw, ph) = (PANEL_W - 1.5 * MARGIN, PANEL_H - 1.5 * MARGIN);
    let (x0, y0) = (ox + MARGIN, oy + MARGIN * 0.5);
    let sx = |k: u64| x0 + xpos(k, k_max) * pw;
    let sy = |v: f64| y0 + (hi - v) / (hi - lo) * ph;

    let _ = writeln!(out, r##"<g class="panel"><rect x="{x0:.1}" y="{y0:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="#444"/>"##);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{title}</text>"#, x0 + pw / 2.0, oy + 16.0);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{hi:.3}</text>"#, x0 - 4.0, y0 + 8.0);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{lo:.3}</text>"#, x0 - 4.0, y0 + ph);
    if lo < 0.0 && hi > 0.0 {
        let _ = writeln!(out, r##"<line x1="{x0:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#bbb" stroke-dasharray="2,2"/>"##, x0 + pw, y = sy(0.0));
    }
    let mut decade = 1u64;
    while decade as f64 <= k_max {
        let x = sx(decade);
        let _ = writeln!(out, r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/>"##, y0 + ph, y0 + ph + 4.0);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="middle">{decade}</text>"#, y0 + ph + 15.0);
        decade = decade.saturating_mul(10);
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">k</text>"#, x0 + pw / 2.0, y0 + ph + 28.0);

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = ks
            .iter()
            .zip(&s.values)
            .filter(|(_, v)| v.is_finite())
            .map(|(&k, &v)| format!("{:.2},{:.2}", sx(k), sy(v)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="6,3""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2"{dash} points="{}"><title>{}</title></polyline>"#,
            points.join(" "),
            s.label
        );
        let ly = y0 + 10.0 + 11.0 * i as f64;
        if ly < y0 + ph - 4.0 {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{ly:.1}" font-size="9" fill="{color}" text-anchor="end">{}</text>"#,
                x0 + pw - 4.0,
                s.label
            );
        }
    }
    out.push_str("</g>\n");
}

pub fn four_panel(exp: &Experiment, traj: &[TrajectoryPoint]) -> String {
    let n = exp.topology.n_followers();
    let edges = exp.topology.edge_index().edges();
    let ks: Vec<u64> = traj.iter().map(|p| p.k).collect();
    let column = |f: &dyn Fn(&TrajectoryPoint) -> f64| traj.iter().map(f).collect::<Vec<f64>>();

    let states: Vec<Series> = (0..=n)
        .map(|i| Series {
            label: if i == n { "leader".into() } else { format!("x{}", i + 1) },
            values: column(&|p| p.x[i]),
            dashed: i == n,
        })
        .collect();
    let edge_label = |e: &bitrack::Edge| format!("{}→{}", e.observed + 1, e.observer + 1);
    let estimates: Vec<Series> = edges
        .iter()
        .enumerate()
        .map(|(p, e)| Series { label: edge_label(e), values: column(&|t| t.estimates[p]), dashed: false })
        .collect();
    let errors: Vec<Series> = edges
        .iter()
        .enumerate()
        .map(|(p, e)| Series { label: edge_label(e), values: column(&|t| t.theta[p]), dashed: false })
        .collect();
    let tracking: Vec<Series> = (0..n)
        .map(|i| Series { label: format!("x{} − leader", i + 1), values: column(&|p| p.x[i] - p.x[n]), dashed: false })
        .collect();

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
        w = 2.0 * PANEL_W,
        h = 2.0 * PANEL_H
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    panel(&mut out, 0.0, 0.0, "(a) states", &ks, &states);
    panel(&mut out, PANEL_W, 0.0, "(b) estimates", &ks, &estimates);
    panel(&mut out, 0.0, PANEL_H, "(c) estimate error", &ks, &errors);
    panel(&mut out, PANEL_W, PANEL_H, "(d) tracking error", &ks, &tracking);
    out.push_str("</svg>\n");
    out
}
