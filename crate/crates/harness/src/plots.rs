//! Minimal deterministic SVG output: convergence curves (best fitness vs
//! evaluations) and coverage bar charts. No dependencies, fixed-precision
//! number formatting, so identical inputs give identical bytes.

use coversearch::coverage::CoverageReport;
use coversearch::error::{Error, Result};
use coversearch::optim::TraceRow;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;

const SERIES_COLORS: [&str; 6] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

fn svg_header(title: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"20\" font-family=\"monospace\" font-size=\"14\" ",
            "text-anchor=\"middle\">{title}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        tx = WIDTH / 2.0,
        title = title,
    )
}

fn axes(x_label: &str, y_label: &str, x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> String {
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    let mut s = String::new();
    s.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" \
         text-anchor=\"middle\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        x_label
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        y_label
    ));
    for (v, anchor, x, y) in [
        (x_min, "start", x0, y0 + 16.0),
        (x_max, "end", x1, y0 + 16.0),
    ] {
        s.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-family=\"monospace\" font-size=\"10\" \
             text-anchor=\"{anchor}\">{}</text>\n",
            fmt(v)
        ));
    }
    for (v, y) in [(y_min, y0), (y_max, y1)] {
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\" \
             text-anchor=\"end\">{}</text>\n",
            x0 - 6.0,
            y + 4.0,
            fmt(v)
        ));
    }
    s
}

/// Overlay convergence plot: one polyline per labeled trace.
pub fn convergence_svg(series: &[(String, &[TraceRow])]) -> Result<String> {
    if series.is_empty() || series.iter().any(|(_, t)| t.is_empty()) {
        return Err(Error::invalid("records", "every trace must be nonempty"));
    }
    let x_max = series
        .iter()
        .flat_map(|(_, t)| t.iter())
        .map(|r| r.evaluations_used as f64)
        .fold(0.0, f64::max);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, t) in series {
        for r in *t {
            y_min = y_min.min(r.best_fitness);
            y_max = y_max.max(r.best_fitness);
        }
    }
    if y_max - y_min < 1e-12 {
        y_max = y_min + 1.0;
    }
    let to_x = |evals: f64| MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) * evals / x_max.max(1.0);
    let to_y = |fit: f64| {
        (HEIGHT - MARGIN_B)
            - (HEIGHT - MARGIN_T - MARGIN_B) * (fit - y_min) / (y_max - y_min)
    };

    let mut svg = svg_header("best fitness vs evaluations");
    svg.push_str(&axes("evaluations", "best fitness", 0.0, x_max, y_min, y_max));
    for (i, (label, trace)) in series.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let points: Vec<String> = trace
            .iter()
            .map(|r| format!("{},{}", fmt(to_x(r.evaluations_used as f64)), fmt(to_y(r.best_fitness))))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" \
             fill=\"{color}\">{label}</text>\n",
            WIDTH - MARGIN_R - 180.0,
            MARGIN_T + 14.0 * (i as f64 + 1.0),
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Bars of each master's full-dataset MSC plus a cumulative coverage line.
pub fn coverage_svg(report: &CoverageReport) -> Result<String> {
    if report.per_iteration.is_empty() {
        return Err(Error::invalid("report", "coverage report has no iterations"));
    }
    let n = report.per_iteration.len();
    let y_max = report
        .per_iteration
        .iter()
        .map(|it| it.msc_full)
        .fold(report.cumulative_percent, f64::max)
        .max(1e-9);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let bar_w = plot_w / n as f64 * 0.6;
    let to_y = |v: f64| (HEIGHT - MARGIN_B) - plot_h * v / y_max;

    let mut svg = svg_header("per-master MSC and cumulative coverage (%)");
    svg.push_str(&axes("master index", "percent", 0.0, n as f64 - 1.0, 0.0, y_max));
    let mut cumulative = 0.0;
    let mut line_points = Vec::new();
    for (i, it) in report.per_iteration.iter().enumerate() {
        let cx = MARGIN_L + plot_w * (i as f64 + 0.5) / n as f64;
        let y = to_y(it.msc_full);
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#1f77b4\"/>\n",
            fmt(cx - bar_w / 2.0),
            fmt(y),
            fmt(bar_w),
            fmt((HEIGHT - MARGIN_B) - y)
        ));
        cumulative += 100.0 * it.matched_ids.len() as f64 / report.dataset_size as f64;
        line_points.push(format!("{},{}", fmt(cx), fmt(to_y(cumulative))));
    }
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\" points=\"{}\"/>\n",
        line_points.join(" ")
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(iteration: u64, evals: u64, fit: f64) -> TraceRow {
        TraceRow {
            iteration,
            evaluations_used: evals,
            best_fitness: fit,
            mean_pool_score: None,
            monitor_accuracy: None,
            reinit_flag: false,
        }
    }

    #[test]
    fn empty_trace_errors() {
        assert!(convergence_svg(&[("a".into(), &[][..])]).is_err());
        assert!(convergence_svg(&[]).is_err());
    }

    #[test]
    fn two_series_overlay_and_deterministic_bytes() {
        let t1 = vec![row(0, 22, 0.9), row(1, 44, 0.5)];
        let t2 = vec![row(0, 22, 0.95), row(1, 44, 0.7), row(2, 66, 0.4)];
        let series =
            vec![("lmmaes".to_string(), t1.as_slice()), ("random".to_string(), t2.as_slice())];
        let a = convergence_svg(&series).unwrap();
        let b = convergence_svg(&series).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("<polyline").count(), 2);
        assert!(a.contains("lmmaes"));
    }
}
