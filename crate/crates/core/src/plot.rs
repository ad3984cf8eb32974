//! Minimal SVG line charts for training metrics.
//!
//! No plotting dependency: the charts are simple enough (axes, ticks, a few
//! polylines) that emitting SVG text directly is less code than binding a
//! library.

use std::fmt::Write as FmtWrite;
use std::path::{Path, PathBuf};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
}

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if (hi - lo).abs() < 1e-12 {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

/// Render one chart with a shared x axis.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (x_lo, x_hi) = nice_range(
        all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        all.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y_lo, y_hi) = nice_range(
        all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        all.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let px = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{title}</text>\n",
        WIDTH / 2.0
    );

    // Axes.
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    let _ = write!(
        svg,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    );

    // Ticks: 5 per axis with grid lines.
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x_lo + f * (x_hi - x_lo);
        let yv = y_lo + f * (y_hi - y_lo);
        let xp = px(xv);
        let yp = py(yv);
        let _ = write!(
            svg,
            "<line x1=\"{xp}\" y1=\"{y0}\" x2=\"{xp}\" y2=\"{y1}\" stroke=\"#eee\"/>\n\
             <text x=\"{xp}\" y=\"{}\" text-anchor=\"middle\">{xv:.0}</text>\n\
             <line x1=\"{x0}\" y1=\"{yp}\" x2=\"{x1}\" y2=\"{yp}\" stroke=\"#eee\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{yv:.2}</text>\n",
            y0 + 18.0,
            x0 - 6.0,
            yp + 4.0
        );
    }

    for (i, s) in series.iter().enumerate() {
        let pts: String = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = write!(
            svg,
            "<polyline points=\"{pts}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            s.color
        );
        // Legend entry.
        let lx = x0 + 10.0;
        let ly = y1 + 14.0 + i as f64 * 18.0;
        let _ = write!(
            svg,
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{}\" stroke-width=\"2\"/>\n\
             <text x=\"{}\" y=\"{}\">{}</text>\n",
            lx + 24.0,
            s.color,
            lx + 30.0,
            ly + 4.0,
            s.name
        );
    }

    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n\
         <text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>\n\
         </svg>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    svg
}

#[derive(Debug, Clone, Default)]
pub struct MetricsTable {
    pub step: Vec<f64>,
    pub eval_reward: Vec<f64>,
    pub avg_speed: Vec<f64>,
    pub collision_rate: Vec<f64>,
    pub intervention_rate: Vec<f64>,
}

/// Parse the trainer's metrics CSV (header validated against known columns).
pub fn read_metrics_csv(path: &Path) -> anyhow::Result<MetricsTable> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| anyhow::anyhow!("empty metrics file"))?;
    if header != crate::trainer::METRICS_HEADER {
        anyhow::bail!("unexpected metrics header: {header}");
    }
    let mut t = MetricsTable::default();
    for (n, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            anyhow::bail!("metrics row {} has {} columns", n + 2, cols.len());
        }
        let f = |i: usize| -> anyhow::Result<f64> {
            cols[i]
                .parse()
                .map_err(|e| anyhow::anyhow!("row {}: {e}", n + 2))
        };
        t.step.push(f(0)?);
        t.eval_reward.push(f(2)?);
        t.avg_speed.push(f(3)?);
        t.collision_rate.push(f(4)?);
        t.intervention_rate.push(f(5)?);
    }
    Ok(t)
}

/// Write reward, speed, and rate charts next to the metrics file.
pub fn plot_metrics(csv_path: &Path, out_dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let t = read_metrics_csv(csv_path)?;
    if t.step.is_empty() {
        anyhow::bail!("no metric rows to plot");
    }
    std::fs::create_dir_all(out_dir)?;
    let zip = |ys: &[f64]| -> Vec<(f64, f64)> {
        t.step.iter().copied().zip(ys.iter().copied()).collect()
    };

    let charts: [(&str, String); 3] = [
        (
            "reward.svg",
            line_chart(
                "Evaluation reward",
                "environment steps",
                "mean episode reward",
                &[Series {
                    name: "eval reward".into(),
                    color: "#1f77b4",
                    points: zip(&t.eval_reward),
                }],
            ),
        ),
        (
            "speed.svg",
            line_chart(
                "Average AV speed",
                "environment steps",
                "speed (m/s)",
                &[Series {
                    name: "avg speed".into(),
                    color: "#2ca02c",
                    points: zip(&t.avg_speed),
                }],
            ),
        ),
        (
            "rates.svg",
            line_chart(
                "Collision and intervention rates",
                "environment steps",
                "rate",
                &[
                    Series {
                        name: "collision rate".into(),
                        color: "#d62728",
                        points: zip(&t.collision_rate),
                    },
                    Series {
                        name: "intervention rate".into(),
                        color: "#ff7f0e",
                        points: zip(&t.intervention_rate),
                    },
                ],
            ),
        ),
    ];

    let mut written = Vec::new();
    for (name, svg) in charts {
        let path = out_dir.join(name);
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}
