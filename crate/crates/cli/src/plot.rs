//! Hand-emitted SVG density scatter: self-assessed score on x, predicted
//! on y, both axes spanning the measurement's full range. Points are
//! colored by local density from a 25x25 histogram over that range.

use std::fmt::Write;

use voicewell_core::data::Measurement;

const BINS: usize = 25;
const PLOT: f64 = 420.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 64.0;

/// Cold blue through green to hot red.
fn ramp(t: f64) -> (u8, u8, u8) {
    const STOPS: [(f64, [f64; 3]); 3] = [
        (0.0, [42.0, 72.0, 161.0]),
        (0.5, [64.0, 180.0, 112.0]),
        (1.0, [226.0, 61.0, 40.0]),
    ];
    let t = t.clamp(0.0, 1.0);
    let (lo, hi) = if t <= STOPS[1].0 {
        (STOPS[0], STOPS[1])
    } else {
        (STOPS[1], STOPS[2])
    };
    let u = (t - lo.0) / (hi.0 - lo.0);
    let channel = |i: usize| (lo.1[i] + (hi.1[i] - lo.1[i]) * u).round() as u8;
    (channel(0), channel(1), channel(2))
}

fn tick_label(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

pub fn density_scatter_svg(m: Measurement, pairs: &[(f64, f64)]) -> String {
    let (lo, hi) = m.range();
    let span = hi - lo;
    let width = MARGIN_LEFT + PLOT + MARGIN_RIGHT;
    let height = MARGIN_TOP + PLOT + MARGIN_BOTTOM;
    let x_of = |v: f64| MARGIN_LEFT + (v.clamp(lo, hi) - lo) / span * PLOT;
    let y_of = |v: f64| MARGIN_TOP + PLOT - (v.clamp(lo, hi) - lo) / span * PLOT;
    let bin_of = |v: f64| {
        (((v - lo) / span * BINS as f64).floor() as isize).clamp(0, BINS as isize - 1) as usize
    };

    let mut counts = [[0u32; BINS]; BINS];
    for &(pred, target) in pairs {
        counts[bin_of(target)][bin_of(pred)] += 1;
    }
    let max_count = counts.iter().flatten().copied().max().unwrap_or(0).max(1);

    let mut svg = String::new();
    let w = &mut svg;
    let _ = write!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = write!(w, r#"<rect width="{width:.0}" height="{height:.0}" fill="white"/>"#);
    let _ = write!(
        w,
        r##"<rect x="{MARGIN_LEFT:.0}" y="{MARGIN_TOP:.0}" width="{PLOT:.0}" height="{PLOT:.0}" fill="none" stroke="#444" stroke-width="1"/>"##
    );

    let bottom = MARGIN_TOP + PLOT;
    for i in 0..=5 {
        let v = lo + span * i as f64 / 5.0;
        let (x, y) = (x_of(v), y_of(v));
        let label = tick_label(v);
        let _ = write!(
            w,
            r##"<line x1="{x:.2}" y1="{bottom:.0}" x2="{x:.2}" y2="{:.0}" stroke="#444"/>"##,
            bottom + 6.0
        );
        let _ = write!(
            w,
            r#"<text x="{x:.2}" y="{:.0}" text-anchor="middle" font-family="sans-serif" font-size="12">{label}</text>"#,
            bottom + 22.0
        );
        let _ = write!(
            w,
            r##"<line x1="{:.0}" y1="{y:.2}" x2="{MARGIN_LEFT:.0}" y2="{y:.2}" stroke="#444"/>"##,
            MARGIN_LEFT - 6.0
        );
        let _ = write!(
            w,
            r#"<text x="{:.0}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="12">{label}</text>"#,
            MARGIN_LEFT - 10.0,
            y + 4.0
        );
    }

    // y = x reference under the points.
    let _ = write!(
        w,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="5 4"/>"##,
        x_of(lo),
        y_of(lo),
        x_of(hi),
        y_of(hi)
    );

    for &(pred, target) in pairs {
        let density = counts[bin_of(target)][bin_of(pred)] as f64 / max_count as f64;
        let (r, g, b) = ramp(density);
        let _ = write!(
            w,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#{r:02x}{g:02x}{b:02x}" fill-opacity="0.8"/>"##,
            x_of(target),
            y_of(pred)
        );
    }

    let name = m.as_str();
    let _ = write!(
        w,
        r#"<text x="{:.2}" y="{:.0}" text-anchor="middle" font-family="sans-serif" font-size="14">self-assessed {name}</text>"#,
        MARGIN_LEFT + PLOT / 2.0,
        height - 16.0
    );
    let _ = write!(
        w,
        r#"<text transform="translate(20 {:.2}) rotate(-90)" text-anchor="middle" font-family="sans-serif" font-size="14">predicted {name}</text>"#,
        MARGIN_TOP + PLOT / 2.0
    );
    svg.push_str("</svg>");
    svg
}
