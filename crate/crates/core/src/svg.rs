//! Deterministic SVG line plots of trace signals.

use std::fmt::Write as _;
use std::path::Path;

use crate::engine::Trace;
use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn unit(signal: &str) -> &'static str {
    if signal.starts_with("il_") || signal == "i_in" {
        "A"
    } else if signal.starts_with('p') {
        "W"
    } else {
        "V"
    }
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    step * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    }
}

/// Plot `signals` (CSV column names) against time. With `last_cycles`, only
/// the final cycles of the trace are drawn.
pub fn render_svg(trace: &Trace, signals: &[&str], last_cycles: Option<usize>) -> Result<String> {
    if signals.is_empty() {
        return Err(Error::Plot("no signals selected".into()));
    }
    if trace.samples.len() < 2 {
        return Err(Error::Plot("trace has fewer than two samples".into()));
    }
    let columns = trace.columns();
    let mut series = Vec::new();
    for &name in signals {
        if !columns.iter().any(|c| c == name) {
            return Err(Error::Plot(format!(
                "unknown signal `{name}`; available: {}",
                columns[1..].join(", ")
            )));
        }
        series.push((name, trace.signal(name).expect("column exists")));
    }
    let times = trace.times();
    let t_end = trace.end_time();
    let t_start = match last_cycles {
        Some(c) => (t_end - c as f64 * trace.period).max(trace.start_time()),
        None => trace.start_time(),
    };
    let keep: Vec<usize> = (0..times.len())
        .filter(|&i| times[i] >= t_start - 1e-12 * trace.period)
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, values) in &series {
        for &i in &keep {
            lo = lo.min(values[i]);
            hi = hi.max(values[i]);
        }
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Plot("signal values are not finite".into()));
    }
    if hi - lo < 1e-12 * hi.abs().max(1.0) {
        let pad = 0.5 * hi.abs().max(1.0) * 1e-3;
        lo -= pad;
        hi += pad;
    } else {
        let pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let span_t = (t_end - t_start).max(f64::MIN_POSITIVE);
    let x = |t: f64| LEFT + (t - t_start) / span_t * plot_w;
    let y = |v: f64| TOP + (hi - v) / (hi - lo) * plot_h;

    let mut s = String::new();
    let w = &mut s;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .expect("string write");
    writeln!(
        w,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .expect("string write");
    writeln!(
        w,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    )
    .expect("string write");
    for v in ticks(lo, hi) {
        let py = y(v);
        writeln!(
            w,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            py + 4.0,
            label(v)
        )
        .expect("string write");
    }
    for t in ticks(t_start, t_end) {
        let px = x(t);
        writeln!(
            w,
            r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#dddddd"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + plot_h,
            TOP + plot_h + 18.0,
            label(t)
        )
        .expect("string write");
    }
    let units: Vec<&str> = {
        let mut u: Vec<&str> = signals.iter().map(|s| unit(s)).collect();
        u.dedup();
        u
    };
    writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time (s)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    )
    .expect("string write");
    writeln!(
        w,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">value ({})</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        units.join(", ")
    )
    .expect("string write");
    for (k, (name, values)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut points = String::new();
        for &i in &keep {
            if !points.is_empty() {
                points.push(' ');
            }
            write!(points, "{:.2},{:.2}", x(times[i]), y(values[i])).expect("string write");
        }
        writeln!(
            w,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{points}"/>"#
        )
        .expect("string write");
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = LEFT + plot_w + 12.0;
        writeln!(
            w,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{name} ({})</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            unit(name)
        )
        .expect("string write");
    }
    writeln!(w, "</svg>").expect("string write");
    Ok(s)
}

pub fn write_svg(
    trace: &Trace,
    signals: &[&str],
    last_cycles: Option<usize>,
    path: &Path,
) -> Result<()> {
    let svg = render_svg(trace, signals, last_cycles)?;
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_steps_are_round() {
        assert_eq!(nice_step(10.0), 2.0);
        assert_eq!(nice_step(1.0), 0.2);
        assert_eq!(ticks(0.0, 1.0).len(), 6);
        assert_eq!(label(0.25), "0.25");
        assert_eq!(label(3.3e-5), "3.30e-5");
    }
}
