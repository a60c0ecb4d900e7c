//! SVG line charts of log channels.

use std::path::Path;

use plotters::prelude::*;

use crate::log::{FormatError, LogTable};

struct Panel {
    title: &'static str,
    unit: &'static str,
    /// `(legend, column)` pairs.
    series: &'static [(&'static str, &'static str)],
}

struct Channel {
    name: &'static str,
    panels: &'static [Panel],
}

const CHANNELS: &[Channel] = &[
    Channel {
        name: "F_ext",
        panels: &[
            Panel { title: "F_x", unit: "N", series: &[("true", "F_true_x"), ("estimated", "F_x")] },
            Panel { title: "F_y", unit: "N", series: &[("true", "F_true_y"), ("estimated", "F_y")] },
            Panel { title: "F_z", unit: "N", series: &[("true", "F_true_z"), ("estimated", "F_z")] },
        ],
    },
    Channel {
        name: "tau_ext",
        panels: &[Panel { title: "tau_z", unit: "N m", series: &[("true", "tau_true_z"), ("estimated", "tau_z")] }],
    },
    Channel {
        name: "position",
        panels: &[
            Panel { title: "x", unit: "m", series: &[("reference", "ref_x"), ("actual", "p_x")] },
            Panel { title: "y", unit: "m", series: &[("reference", "ref_y"), ("actual", "p_y")] },
            Panel { title: "z", unit: "m", series: &[("reference", "ref_z"), ("actual", "p_z")] },
        ],
    },
    Channel {
        name: "velocity",
        panels: &[
            Panel { title: "v_x", unit: "m/s", series: &[("measured", "m_v_x"), ("actual", "v_x")] },
            Panel { title: "v_y", unit: "m/s", series: &[("measured", "m_v_y"), ("actual", "v_y")] },
            Panel { title: "v_z", unit: "m/s", series: &[("measured", "m_v_z"), ("actual", "v_z")] },
        ],
    },
    Channel {
        name: "rate",
        panels: &[
            Panel { title: "w_x", unit: "rad/s", series: &[("measured", "m_w_x"), ("actual", "w_x")] },
            Panel { title: "w_y", unit: "rad/s", series: &[("measured", "m_w_y"), ("actual", "w_y")] },
            Panel { title: "w_z", unit: "rad/s", series: &[("measured", "m_w_z"), ("actual", "w_z")] },
        ],
    },
    Channel {
        name: "rotors",
        panels: &[Panel {
            title: "rotor speeds",
            unit: "rad/s",
            series: &[("n_1", "n_1"), ("n_2", "n_2"), ("n_3", "n_3"), ("n_4", "n_4"), ("n_5", "n_5"), ("n_6", "n_6")],
        }],
    },
];

pub fn channel_names() -> Vec<&'static str> {
    CHANNELS.iter().map(|c| c.name).collect()
}

#[derive(thiserror::Error, Debug)]
pub enum PlotError {
    #[error("unknown channel `{name}`; valid channels: {}", valid.join(", "))]
    UnknownChannel { name: String, valid: Vec<String> },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("cannot render plot: {0}")]
    Render(String),
}

fn render_err<E: std::fmt::Display>(e: E) -> PlotError {
    PlotError::Render(e.to_string())
}

fn lookup(names: &[String]) -> Result<Vec<&'static Channel>, PlotError> {
    names
        .iter()
        .map(|n| {
            CHANNELS.iter().find(|c| c.name == n).ok_or_else(|| PlotError::UnknownChannel {
                name: n.clone(),
                valid: channel_names().into_iter().map(String::from).collect(),
            })
        })
        .collect()
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        (0.0, 1.0)
    } else if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Writes one SVG with a panel per axis of every selected channel.
/// Returns the number of panels drawn.
pub fn plot(table: &LogTable, channels: &[String], out: &Path) -> Result<usize, PlotError> {
    let selected = lookup(channels)?;
    let panels: Vec<&Panel> = selected.iter().flat_map(|c| c.panels.iter()).collect();
    let missing = |name: &str| FormatError {
        row: 0,
        message: format!("missing column `{name}`"),
    };
    let t = table.series("t").ok_or_else(|| missing("t"))?;
    let mut data = Vec::with_capacity(panels.len());
    for p in &panels {
        let cols = p
            .series
            .iter()
            .map(|(_, c)| table.series(c).ok_or_else(|| missing(c)))
            .collect::<Result<Vec<_>, _>>()?;
        data.push(cols);
    }

    let height = 240 * panels.len().max(1) as u32;
    let root = SVGBackend::new(out, (900, height)).into_drawing_area();
    root.fill(&WHITE).map_err(render_err)?;
    let areas = root.split_evenly((panels.len().max(1), 1));
    let (t0, t1) = span(t.iter().copied());
    for ((area, panel), cols) in areas.iter().zip(&panels).zip(&data) {
        let (y0, y1) = span(cols.iter().flatten().copied());
        let mut chart = ChartBuilder::on(area)
            .caption(panel.title, ("sans-serif", 16))
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(60)
            .build_cartesian_2d(t0..t1, y0..y1)
            .map_err(render_err)?;
        chart
            .configure_mesh()
            .x_desc("t [s]")
            .y_desc(panel.unit)
            .draw()
            .map_err(render_err)?;
        for (i, ((label, _), values)) in panel.series.iter().zip(cols).enumerate() {
            let color = Palette99::pick(i).to_rgba();
            let points: Vec<(f64, f64)> =
                t.iter().zip(values).filter(|(_, v)| v.is_finite()).map(|(t, v)| (*t, *v)).collect();
            chart
                .draw_series(LineSeries::new(points, color.stroke_width(1)))
                .map_err(render_err)?
                .label(*label)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
        }
        chart
            .configure_series_labels()
            .border_style(BLACK)
            .background_style(WHITE.mix(0.8))
            .draw()
            .map_err(render_err)?;
    }
    root.present().map_err(render_err)?;
    Ok(panels.len())
}
