//! Output formatting shared by every emitted artifact: number rendering,
//! JSON normalization and self-contained SVG charts.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

/// Significant digits kept in every reported number.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("scientific notation parses");
    if rounded == 0.0 {
        0.0
    } else {
        rounded
    }
}

/// Shortest decimal that round-trips the 9-significant-digit value.
pub fn fmt_num(x: f64) -> String {
    format!("{}", round_sig(x))
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// Applies [`round_sig`] to every floating-point number in a JSON tree.
pub fn round_json(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or_default());
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with rounded numbers and a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let tree = round_json(serde_json::to_value(value)?);
    let mut text = serde_json::to_string_pretty(&tree)?;
    text.push('\n');
    Ok(text)
}

/// Writes rows as CSV text.
pub fn csv_text<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    writer.write_record(header).expect("in-memory write");
    for row in rows {
        writer
            .write_record(row.into_iter().collect::<Vec<_>>())
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn px(x: f64) -> String {
    format!("{:.2}", x)
}

/// Line chart with the y axis fixed to [0, 1].
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let x_min = xs.clone().fold(f64::INFINITY, f64::min);
    let x_max = xs.fold(f64::NEG_INFINITY, f64::max);
    let (x_min, x_max) = if x_min.is_finite() && x_max > x_min {
        (x_min, x_max)
    } else if x_min.is_finite() {
        (x_min - 1.0, x_min + 1.0)
    } else {
        (0.0, 1.0)
    };
    let sx = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (1.0 - y.clamp(0.0, 1.0)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="28" font-size="18" text-anchor="middle">{}</text>"#,
        px(MARGIN_LEFT + plot_w / 2.0),
        escape(title)
    );
    for i in 0..=5 {
        let y = i as f64 / 5.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#e0e0e0"/><text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"##,
            px(MARGIN_LEFT),
            px(sy(y)),
            px(MARGIN_LEFT + plot_w),
            px(sy(y)),
            px(MARGIN_LEFT - 6.0),
            px(sy(y) + 4.0),
            fmt_num(y)
        );
    }
    let mut ticks: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    if ticks.len() > 24 {
        let step = ticks.len().div_ceil(12);
        ticks = ticks.into_iter().step_by(step).collect();
    }
    for x in ticks {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
            px(sx(x)),
            px(MARGIN_TOP + plot_h + 16.0),
            fmt_num(x)
        );
    }
    let _ = writeln!(
        svg,
        r##"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="#333"/><line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="#333"/>"##,
        l = px(MARGIN_LEFT),
        r = px(MARGIN_LEFT + plot_w),
        t = px(MARGIN_TOP),
        b = px(MARGIN_TOP + plot_h)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{}</text>"#,
        px(MARGIN_LEFT + plot_w / 2.0),
        px(HEIGHT - 15.0),
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        px(MARGIN_TOP + plot_h / 2.0),
        px(MARGIN_TOP + plot_h / 2.0),
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", px(sx(x)), px(sy(y))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = MARGIN_TOP + 10.0 + i as f64 * 16.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}" font-size="11">{}</text>"#,
            px(WIDTH - MARGIN_RIGHT + 15.0),
            px(ly - 9.0),
            px(WIDTH - MARGIN_RIGHT + 30.0),
            px(ly),
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Square heatmap over labelled rows/columns for values in [-1, 1]. Missing
/// cells are drawn grey.
pub fn heatmap_svg(title: &str, labels: &[&str], values: &[Vec<Option<f64>>]) -> String {
    let n = labels.len();
    let cell = 22.0;
    let left = 110.0;
    let top = 120.0;
    let size_w = left + cell * n as f64 + 20.0;
    let size_h = top + cell * n as f64 + 20.0;
    let color = |v: Option<f64>| match v {
        None => "#cccccc".to_string(),
        Some(v) => {
            let v = v.clamp(-1.0, 1.0);
            // white at 0, red for positive, blue for negative
            let fade = (255.0 * (1.0 - v.abs())).round() as u8;
            if v >= 0.0 {
                format!("#ff{fade:02x}{fade:02x}")
            } else {
                format!("#{fade:02x}{fade:02x}ff")
            }
        }
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif">"#,
        px(size_w),
        px(size_h),
        px(size_w),
        px(size_h)
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-size="16" text-anchor="middle">{}</text>"#,
        px(size_w / 2.0),
        escape(title)
    );
    for (i, label) in labels.iter().enumerate() {
        let c = i as f64 * cell + cell / 2.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#,
            px(left - 4.0),
            px(top + c + 3.0),
            escape(label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="10" transform="rotate(-60 {x} {y})">{}</text>"#,
            escape(label),
            x = px(left + c),
            y = px(top - 4.0)
        );
    }
    for (i, row) in values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let _ = writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="{}" stroke="white"><title>{} / {}: {}</title></rect>"#,
                px(left + j as f64 * cell),
                px(top + i as f64 * cell),
                color(*v),
                escape(labels[i]),
                escape(labels[j]),
                v.map(fmt_num).unwrap_or_else(|| "undefined".into())
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}
