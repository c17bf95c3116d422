//! Static SVG figures. Logarithmic axes are drawn as log10 of the data on
//! linear axes, with the axis label saying so.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log10,
}

impl Scale {
    fn map(self, v: f64) -> Option<f64> {
        match self {
            Scale::Linear => v.is_finite().then_some(v),
            Scale::Log10 => (v > 0.0 && v.is_finite()).then(|| v.log10()),
        }
    }

    fn label(self, name: &str) -> String {
        match self {
            Scale::Linear => name.to_string(),
            Scale::Log10 => format!("log10 {name}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub line: bool,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points, line: true }
    }

    pub fn markers(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points, line: false }
    }
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub series: Vec<Series>,
}

fn plot_err<E: std::fmt::Debug>(e: E) -> CliError {
    CliError::Plot(format!("{e:?}"))
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span <= 0.0 {
        let w = lo.abs().max(1.0) * 0.05;
        return (lo - w, hi + w);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn draw_panel<DB: DrawingBackend>(area: &DrawingArea<DB, plotters::coord::Shift>, panel: &Panel) -> CliResult<()> {
    let mapped: Vec<Vec<(f64, f64)>> = panel
        .series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter_map(|&(x, y)| Some((panel.x_scale.map(x)?, panel.y_scale.map(y)?)))
                .collect()
        })
        .collect();
    let all = mapped.iter().flatten();
    let (xlo, xhi) = all.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (ylo, yhi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let (xlo, xhi) = padded(xlo, xhi);
    let (ylo, yhi) = padded(ylo, yhi);

    let mut chart = ChartBuilder::on(area)
        .caption(&panel.title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(xlo..xhi, ylo..yhi)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(panel.x_scale.label(&panel.x_label))
        .y_desc(panel.y_scale.label(&panel.y_label))
        .draw()
        .map_err(plot_err)?;

    for (k, (s, pts)) in panel.series.iter().zip(&mapped).enumerate() {
        let color = Palette99::pick(k).to_rgba();
        if s.line {
            chart
                .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
                .map_err(plot_err)?
                .label(&s.label)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        } else {
            chart
                .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
                .map_err(plot_err)?
                .label(&s.label)
                .legend(move |(x, y)| Circle::new((x + 10, y), 3, color.filled()));
        }
    }
    if panel.series.len() > 1 {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
    }
    Ok(())
}

/// Writes the panels stacked vertically into one SVG file.
pub fn write_svg(path: &Path, panels: &[Panel]) -> CliResult<()> {
    let height = 420 * panels.len().max(1) as u32;
    let root = SVGBackend::new(path, (720, height)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let areas = root.split_evenly((panels.len().max(1), 1));
    for (area, panel) in areas.iter().zip(panels) {
        draw_panel(area, panel)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_log_and_linear_panels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.svg");
        let pts: Vec<(f64, f64)> = (1..20).map(|i| (i as f64, (i * i) as f64)).collect();
        let panels = [
            Panel {
                title: "a".into(),
                x_label: "t".into(),
                y_label: "F".into(),
                x_scale: Scale::Log10,
                y_scale: Scale::Log10,
                series: vec![Series::line("one", pts.clone()), Series::markers("two", vec![(0.0, -1.0), (2.0, 3.0)])],
            },
            Panel {
                title: "b".into(),
                x_label: "t".into(),
                y_label: "n".into(),
                x_scale: Scale::Linear,
                y_scale: Scale::Linear,
                series: vec![Series::line("one", vec![(1.0, 1.0)])],
            },
        ];
        write_svg(&path, &panels).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<svg") && text.contains("log10 t"));
    }
}
