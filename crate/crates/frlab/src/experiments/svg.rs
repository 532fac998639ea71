//! Standalone SVG line charts of sweep results: mean excess risk per
//! estimator against gamma = p/n, with ±1 standard-error whiskers.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

use super::sweep::SweepResult;

#[derive(Debug, Clone, Copy)]
pub struct PlotOptions {
    pub log_y: bool,
    /// One series per estimator; otherwise all rows pool into one series.
    pub per_estimator_series: bool,
    pub log_gamma: bool,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            log_y: true,
            per_estimator_series: true,
            log_gamma: false,
        }
    }
}

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 7] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
];
const LOG_FLOOR: f64 = 1e-12;

struct SeriesPoint {
    gamma: f64,
    mean: f64,
    se: f64,
    clamped: bool,
}

/// Aggregates converged rows into (estimator -> gamma -> mean, se).
fn aggregate(result: &SweepResult, options: &PlotOptions) -> Vec<(String, Vec<SeriesPoint>)> {
    let mut groups: BTreeMap<String, BTreeMap<u64, (f64, Vec<f64>)>> = BTreeMap::new();
    for row in &result.rows {
        if row.excess_vs_oracle.is_nan() {
            continue;
        }
        let key = if options.per_estimator_series {
            row.estimator.clone()
        } else {
            "all".to_string()
        };
        groups
            .entry(key)
            .or_default()
            .entry(row.gamma.to_bits())
            .or_insert((row.gamma, Vec::new()))
            .1
            .push(row.excess_vs_oracle);
    }
    groups
        .into_iter()
        .map(|(name, by_gamma)| {
            let mut points: Vec<SeriesPoint> = by_gamma
                .into_values()
                .map(|(gamma, vals)| {
                    let m = vals.iter().sum::<f64>() / vals.len() as f64;
                    let se = if vals.len() > 1 {
                        let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
                            / (vals.len() - 1) as f64;
                        (var / vals.len() as f64).sqrt()
                    } else {
                        0.0
                    };
                    SeriesPoint {
                        gamma,
                        mean: m,
                        se,
                        clamped: false,
                    }
                })
                .collect();
            points.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
            (name, points)
        })
        .collect()
}

pub fn render_svg_plot(result: &SweepResult, options: &PlotOptions) -> Result<String> {
    let mut series = aggregate(result, options);
    if series.is_empty() || series.iter().all(|(_, pts)| pts.is_empty()) {
        return Err(Error::ContractViolation(
            "nothing to plot: no finite rows".into(),
        ));
    }

    let mut any_clamped = false;
    if options.log_y {
        for (_, pts) in series.iter_mut() {
            for p in pts.iter_mut() {
                if p.mean < LOG_FLOOR {
                    p.mean = LOG_FLOOR;
                    p.clamped = true;
                    any_clamped = true;
                }
            }
        }
    }

    let xs: Vec<f64> = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.gamma))
        .collect();
    let ys_lo: Vec<f64> = series
        .iter()
        .flat_map(|(_, pts)| {
            pts.iter().map(|p| {
                if options.log_y {
                    p.mean.max(LOG_FLOOR)
                } else {
                    p.mean - p.se
                }
            })
        })
        .collect();
    let ys_hi: Vec<f64> = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.mean + p.se))
        .collect();

    let tx = |g: f64| -> f64 { if options.log_gamma { g.ln() } else { g } };
    let ty = |v: f64| -> f64 {
        if options.log_y {
            v.max(LOG_FLOOR).log10()
        } else {
            v
        }
    };
    let (mut x_min, mut x_max) = min_max(xs.iter().map(|&g| tx(g)));
    let (mut y_min, mut y_max) = (
        min_max(ys_lo.iter().map(|&v| ty(v))).0,
        min_max(ys_hi.iter().map(|&v| ty(v))).1,
    );
    if x_max - x_min < 1e-12 {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if y_max - y_min < 1e-12 {
        y_min -= 0.5;
        y_max += 0.5;
    }

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |g: f64| MARGIN_L + (tx(g) - x_min) / (x_max - x_min) * plot_w;
    let py = |v: f64| MARGIN_T + (y_max - ty(v)) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Axes.
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    svg.push_str(&format!(
        "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y0:.2}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x0:.2}\" y2=\"{y1:.2}\" stroke=\"black\"/>\n"
    ));

    // Ticks.
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let gx = x_min + t * (x_max - x_min);
        let label = if options.log_gamma { gx.exp() } else { gx };
        let sx = MARGIN_L + t * plot_w;
        svg.push_str(&format!(
            "<line x1=\"{sx:.2}\" y1=\"{y0:.2}\" x2=\"{sx:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            y0 + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{sx:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            y0 + 20.0,
            trim_label(label)
        ));

        let vy = y_min + t * (y_max - y_min);
        let label = if options.log_y { 10f64.powf(vy) } else { vy };
        let sy = MARGIN_T + (1.0 - t) * plot_h;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{sy:.2}\" x2=\"{x0:.2}\" y2=\"{sy:.2}\" stroke=\"black\"/>\n",
            x0 - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
            x0 - 8.0,
            sy + 4.0,
            trim_label(label)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">gamma = p/n</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">mean excess risk</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    ));

    // Series.
    for (si, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if pts.len() > 1 {
            let path: Vec<String> = pts
                .iter()
                .map(|p| format!("{:.2},{:.2}", px(p.gamma), py(p.mean)))
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
                path.join(" ")
            ));
        }
        for p in pts {
            let cx = px(p.gamma);
            let cy = py(p.mean);
            svg.push_str(&format!(
                "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"3\" fill=\"{color}\"/>\n"
            ));
            if p.se > 0.0 {
                let lo = py(if options.log_y {
                    (p.mean - p.se).max(LOG_FLOOR)
                } else {
                    p.mean - p.se
                });
                let hi = py(p.mean + p.se);
                svg.push_str(&format!(
                    "<line x1=\"{cx:.2}\" y1=\"{lo:.2}\" x2=\"{cx:.2}\" y2=\"{hi:.2}\" stroke=\"{color}\"/>\n"
                ));
                for yy in [lo, hi] {
                    svg.push_str(&format!(
                        "<line x1=\"{:.2}\" y1=\"{yy:.2}\" x2=\"{:.2}\" y2=\"{yy:.2}\" stroke=\"{color}\"/>\n",
                        cx - 3.0,
                        cx + 3.0
                    ));
                }
            }
            if p.clamped {
                svg.push_str(&format!(
                    "<text x=\"{cx:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\" fill=\"{color}\">clamped</text>\n",
                    cy - 6.0
                ));
            }
        }
        // Legend entry.
        let ly = MARGIN_T + 16.0 * si as f64 + 10.0;
        let lx = WIDTH - MARGIN_R + 12.0;
        svg.push_str(&format!(
            "<line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            lx + 22.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">{name}</text>\n",
            lx + 28.0,
            ly + 4.0
        ));
    }
    if any_clamped {
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#555555\">zero/negative means clamped to 1e-12 on the log axis</text>\n",
            MARGIN_L,
            MARGIN_T - 10.0
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_svg_plot(result: &SweepResult, path: &Path, options: &PlotOptions) -> Result<()> {
    let svg = render_svg_plot(result, options)?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.display().to_string(),
                source: e,
            })?;
        }
    }
    std::fs::write(path, svg).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn trim_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (0.01..10_000.0).contains(&a) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::sweep::SweepRow;

    fn row(gamma: f64, estimator: &str, excess: f64, rep: usize) -> SweepRow {
        SweepRow {
            design: "custom".into(),
            gamma,
            k: 2,
            n: 10,
            p: (gamma * 10.0) as usize,
            replicate: rep,
            estimator: estimator.into(),
            risk: excess + 1.0,
            excess_vs_oracle: excess,
            excess_vs_star: excess,
            null_risk: 3.0,
            interp_residual: 0.0,
            coef_norm_sq: 1.0,
            converged: true,
        }
    }

    /// Minimal well-formedness check: every opened tag closes in order.
    fn assert_well_formed_xml(text: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = text;
        while let Some(start) = rest.find('<') {
            let end = rest[start..].find('>').expect("unclosed tag") + start;
            let tag = &rest[start + 1..end];
            rest = &rest[end + 1..];
            if let Some(name) = tag.strip_prefix('/') {
                assert_eq!(stack.pop().as_deref(), Some(name), "mismatched close");
            } else if !tag.ends_with('/') && !tag.starts_with('?') && !tag.starts_with('!') {
                let name: String = tag
                    .split_whitespace()
                    .next()
                    .unwrap()
                    .chars()
                    .collect();
                stack.push(name);
            }
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
    }

    #[test]
    fn single_point_single_series() {
        let result = SweepResult {
            rows: vec![row(2.0, "min_norm", 0.5, 0)],
            bounds: vec![],
        };
        let svg = render_svg_plot(&result, &PlotOptions::default()).unwrap();
        assert_well_formed_xml(&svg);
        assert!(svg.contains("<circle"));
        assert!(svg.contains("min_norm"));
    }

    #[test]
    fn log_axis_clamps_zero_mean_with_annotation() {
        let result = SweepResult {
            rows: vec![row(1.0, "null", 0.0, 0), row(2.0, "null", 1.0, 0)],
            bounds: vec![],
        };
        let svg = render_svg_plot(&result, &PlotOptions::default()).unwrap();
        assert_well_formed_xml(&svg);
        assert!(svg.contains("clamped"));
    }

    #[test]
    fn deterministic_output() {
        let result = SweepResult {
            rows: vec![
                row(1.0, "min_norm", 0.5, 0),
                row(1.0, "min_norm", 0.7, 1),
                row(2.0, "min_norm", 0.3, 0),
                row(2.0, "min_norm", 0.4, 1),
                row(1.0, "ridge", 0.6, 0),
                row(2.0, "ridge", 0.2, 0),
            ],
            bounds: vec![],
        };
        let a = render_svg_plot(&result, &PlotOptions::default()).unwrap();
        let b = render_svg_plot(&result, &PlotOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_well_formed_xml(&a);
        // Whiskers present where replicates vary.
        assert!(a.matches("<line").count() > 10);
    }

    #[test]
    fn empty_result_is_an_error() {
        assert!(render_svg_plot(&SweepResult::default(), &PlotOptions::default()).is_err());
    }
}
