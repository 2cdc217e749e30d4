//! Plain-text artifacts: schedule and rank-one reports, CCP traces and the
//! objective-versus-iteration plot.
//!
//! Reports print six significant digits (integers in full above 10⁶); the
//! trace CSV is meant to be read back by programs and prints every value at
//! full round-trip precision.

use std::fmt::Write;

use crate::case::CaseStudy;
use crate::ccp::CcpTrace;
use crate::shor::Schedule;

/// `x` with six significant digits in fixed notation, never dropping integer
/// digits, or in scientific notation for very small or very large values.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..12).contains(&magnitude) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new digit (9.999995 → 10.00000)
    if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() > 6 && decimals > 0 {
        let decimals = decimals - 1;
        return format!("{x:.decimals$}");
    }
    s
}

/// Generation in MW, one line per period and one column per plant, hydro
/// plants first.
pub fn generation_csv(case: &CaseStudy, schedule: &Schedule) -> String {
    let ids: Vec<&str> = case.hydro.iter().map(|p| p.id.as_str()).chain(case.thermal.iter().map(|p| p.id.as_str())).collect();
    let mut out = format!("period,{}\n", ids.join(","));
    for t in 0..schedule.num_periods() {
        let values: Vec<String> = schedule.hydro_mw[t].iter().chain(&schedule.p[t]).map(|x| sig6(*x)).collect();
        let _ = writeln!(out, "{},{}", t + 1, values.join(","));
    }
    out
}

/// Storage, discharge and spillage, one line per period and hydro plant.
pub fn trajectory_csv(case: &CaseStudy, schedule: &Schedule) -> String {
    let mut out = String::from("period,plant,volume_hm3,discharge_m3s,spillage_m3s\n");
    for t in 0..schedule.num_periods() {
        for (h, plant) in case.hydro.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                t + 1,
                plant.id,
                sig6(schedule.v[t][h]),
                sig6(schedule.q[t][h]),
                sig6(schedule.s[t][h])
            );
        }
    }
    out
}

/// `[t][h]` rank-one ratios keyed by period and plant.
pub fn rank1_csv(case: &CaseStudy, ratios: &[Vec<f64>]) -> String {
    let mut out = String::from("period,plant,rank1_ratio\n");
    for (t, row) in ratios.iter().enumerate() {
        for (h, r) in row.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", t + 1, case.hydro[h].id, sig6(*r));
        }
    }
    out
}

/// Full-precision trace; the metric of the starting relaxation is empty.
pub fn trace_csv(trace: &CcpTrace) -> String {
    let mut out = String::from("k,objective,metric,rank1_max\n");
    for it in &trace.iterations {
        let metric = it.metric.map(|m| format!("{m:?}")).unwrap_or_default();
        let _ = writeln!(out, "{},{:?},{},{:?}", it.k, it.objective, metric, it.rank1_max);
    }
    out
}

const PLOT_WIDTH: f64 = 640.0;
const PLOT_HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 90.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// Self-contained SVG of the objective against the iteration number.
pub fn trace_svg(trace: &CcpTrace) -> String {
    let points: Vec<(f64, f64)> = trace.iterations.iter().map(|it| (it.k as f64, it.objective)).collect();
    let (k_max, mut lo, mut hi) = points.iter().fold((1.0f64, f64::INFINITY, f64::NEG_INFINITY), |(k, lo, hi), &(x, y)| {
        (k.max(x), lo.min(y), hi.max(y))
    });
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-12 * hi.abs().max(1.0) {
        lo -= 0.5 * hi.abs().max(1.0) * 1e-3;
        hi += 0.5 * hi.abs().max(1.0) * 1e-3;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let plot_w = PLOT_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PLOT_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |k: f64| MARGIN_LEFT + k / k_max * plot_w;
    let sy = |y: f64| MARGIN_TOP + (hi - y) / (hi - lo) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_WIDTH}" height="{PLOT_HEIGHT}" viewBox="0 0 {PLOT_WIDTH} {PLOT_HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let y = lo + (hi - lo) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            sy(y) + 4.0,
            sig6(y)
        );
    }
    let step = (k_max / 10.0).ceil().max(1.0);
    let mut k = 0.0;
    while k <= k_max {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{k}</text>"#,
            sx(k),
            MARGIN_TOP + plot_h + 16.0
        );
        k += step;
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">iteration k</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        PLOT_HEIGHT - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">objective ($)</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );
    let path: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    let _ = writeln!(out, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, path.join(" "));
    for &(x, y) in &points {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, sx(x), sy(y));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccp::CcpIteration;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(1551.4), "1551.40");
        assert_eq!(sig6(2_729_565.52), "2729566");
        assert_eq!(sig6(-0.012345678), "-0.0123457");
        assert_eq!(sig6(9.999996), "10.0000");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.5e-7), "1.50000e-7");
    }

    fn trace() -> CcpTrace {
        let schedule = Schedule { v: vec![], q: vec![], s: vec![], hydro_mw: vec![], p: vec![], objective: 0.0 };
        let it = |k: usize, objective: f64, metric: Option<f64>| CcpIteration {
            k,
            objective,
            metric,
            rank1_max: 0.1,
            schedule: schedule.clone(),
        };
        CcpTrace { iterations: vec![it(0, 1.0 / 3.0, None), it(1, 2.0, Some(0.25))], converged: true, eps: 1e-2 }
    }

    #[test]
    fn trace_round_trips_exactly() {
        let csv = trace_csv(&trace());
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[0], "0");
        assert_eq!(row[1].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(row[2], "");
        assert_eq!(csv.lines().nth(2).unwrap(), "1,2.0,0.25,0.1");
    }

    #[test]
    fn plot_has_one_marker_per_iteration() {
        let svg = trace_svg(&trace());
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
