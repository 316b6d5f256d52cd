//! Static SVG plots of a finished run: the forward/backward work spectra on
//! a log scale with peak markers, and the Crooks ratio scatter against the
//! exact and fitted exponentials.

use std::path::Path;

use plotters::prelude::*;

use crate::run::PipelineOutput;
use crate::{CliError, CliResult};

/// W window (internal units) rendered in the spectrum plot; sidebands beyond
/// third order carry no weight in the supported quenches.
const W_WINDOW: f64 = 3.5;

fn draw_err<E: std::error::Error + Send + Sync + 'static>(e: E) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

/// Renders spectra.svg and, when a fit exists, ratio.svg. Returns the file
/// names written.
pub fn emit_plots(out: &PipelineOutput, dir: &Path) -> CliResult<Vec<&'static str>> {
    let mut written = vec!["spectra.svg"];
    spectra_plot(out, &dir.join("spectra.svg"))?;
    if ratio_plot(out, &dir.join("ratio.svg"))? {
        written.push("ratio.svg");
    }
    Ok(written)
}

fn spectra_plot(out: &PipelineOutput, path: &Path) -> CliResult<()> {
    let f_khz = out.config.trap.frequency_khz;
    let max_p = out
        .spectrum_forward
        .density
        .iter()
        .chain(&out.spectrum_backward.density)
        .cloned()
        .fold(f64::MIN_POSITIVE, f64::max)
        / f_khz;
    let floor = max_p * 1e-9;

    // P_F(W) and the mirrored P_B(−W), restricted to the line window
    let series = |spec: &qwork::spectrum::WorkSpectrum, mirror: bool| -> Vec<(f64, f64)> {
        spec.w_grid
            .iter()
            .zip(&spec.density)
            .filter(|(w, _)| w.abs() <= W_WINDOW)
            .map(|(w, p)| {
                let w_out = if mirror { -w } else { *w };
                (w_out * f_khz, (p / f_khz).max(floor))
            })
            .collect()
    };
    let mut fwd = series(&out.spectrum_forward, false);
    let mut bwd = series(&out.spectrum_backward, true);
    fwd.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    bwd.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let x_range = -W_WINDOW * f_khz..W_WINDOW * f_khz;
    let y_range = (floor..max_p * 2.0).log_scale();

    let root = SVGBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(45)
        .y_label_area_size(70)
        .caption("Work distributions", ("sans-serif", 22))
        .build_cartesian_2d(x_range, y_range)
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .x_desc("W (kHz)")
        .y_desc("P (1/kHz)")
        .draw()
        .map_err(draw_err)?;

    chart
        .draw_series(LineSeries::new(fwd, &BLUE))
        .map_err(draw_err)?
        .label("P_F(W)")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], BLUE));
    chart
        .draw_series(LineSeries::new(bwd, &RED))
        .map_err(draw_err)?
        .label("P_B(-W)")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], RED));

    if let Some(peaks) = &out.peaks_forward {
        chart
            .draw_series(peaks.peaks.iter().map(|p| {
                Circle::new(
                    (p.w * f_khz, (p.amplitude / f_khz).max(floor)),
                    4,
                    BLUE.filled(),
                )
            }))
            .map_err(draw_err)?;
    }
    if let Some(peaks) = &out.peaks_backward {
        chart
            .draw_series(peaks.peaks.iter().map(|p| {
                Circle::new(
                    (-p.w * f_khz, (p.amplitude / f_khz).max(floor)),
                    4,
                    RED.filled(),
                )
            }))
            .map_err(draw_err)?;
    }

    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.8))
        .draw()
        .map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(())
}

/// Returns false (and writes nothing) when there are no ratio points.
fn ratio_plot(out: &PipelineOutput, path: &Path) -> CliResult<bool> {
    let fit = match &out.fit {
        Some(f) if !f.points.is_empty() => f,
        _ => return Ok(false),
    };
    let f_khz = out.config.trap.frequency_khz;
    let beta = out.report.exact.beta_internal;
    let delta_f = out.report.exact.delta_f_internal;

    let w_lo = fit.points.first().unwrap().w - 0.5;
    let w_hi = fit.points.last().unwrap().w + 0.5;
    let exact_line: Vec<(f64, f64)> = (0..=200)
        .map(|k| {
            let w = w_lo + (w_hi - w_lo) * k as f64 / 200.0;
            (w * f_khz, (beta * (w - delta_f)).exp())
        })
        .collect();
    let fitted_line: Vec<(f64, f64)> = (0..=200)
        .map(|k| {
            let w = w_lo + (w_hi - w_lo) * k as f64 / 200.0;
            (w * f_khz, (fit.a * w - fit.b).exp())
        })
        .collect();

    let y_min = exact_line
        .iter()
        .chain(&fitted_line)
        .map(|(_, y)| *y)
        .chain(fit.points.iter().map(|p| p.ratio))
        .fold(f64::INFINITY, f64::min)
        * 0.5;
    let y_max = exact_line
        .iter()
        .chain(&fitted_line)
        .map(|(_, y)| *y)
        .chain(fit.points.iter().map(|p| p.ratio))
        .fold(0.0f64, f64::max)
        * 2.0;

    let root = SVGBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(45)
        .y_label_area_size(70)
        .caption("Tasaki-Crooks ratio", ("sans-serif", 22))
        .build_cartesian_2d(w_lo * f_khz..w_hi * f_khz, (y_min..y_max).log_scale())
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .x_desc("W (kHz)")
        .y_desc("P_F(W) / P_B(-W)")
        .draw()
        .map_err(draw_err)?;

    chart
        .draw_series(LineSeries::new(exact_line, &BLACK))
        .map_err(draw_err)?
        .label("exp(beta (W - dF)), exact")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], BLACK));
    chart
        .draw_series(LineSeries::new(fitted_line, RED.stroke_width(1)))
        .map_err(draw_err)?
        .label("exp(A W - B), fitted")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], RED));
    chart
        .draw_series(
            fit.points
                .iter()
                .map(|p| Cross::new((p.w * f_khz, p.ratio), 6, BLUE.stroke_width(2))),
        )
        .map_err(draw_err)?
        .label("peak ratios")
        .legend(|(x, y)| Cross::new((x + 9, y), 5, BLUE.stroke_width(2)));

    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.8))
        .draw()
        .map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(true)
}
