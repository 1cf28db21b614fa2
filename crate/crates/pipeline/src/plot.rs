//! Static SVG result plots.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use flickerloc::events::Micros;
use flickerloc::sim::interpolate_pose;

use crate::metrics::interpolate_pixel;
use crate::run::{RunLogs, TruthData};
use crate::PipelineError;

pub const TRAJECTORY_SVG: &str = "trajectory.svg";
pub const POSITION_ERROR_SVG: &str = "position_error.svg";
pub const TRACKING_SVG: &str = "tracking.svg";

const SIZE: (u32, u32) = (960, 540);

fn plot_err(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Plot(e.to_string())
}

/// Bounds of `v` padded by 5%, never empty.
fn range(v: impl Iterator<Item = f64>) -> std::ops::Range<f64> {
    let (lo, hi) = v.filter(|x| x.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return 0.0..1.0;
    }
    let pad = ((hi - lo) * 0.05).max(1e-6);
    (lo - pad)..(hi + pad)
}

fn secs(t: Micros) -> f64 {
    t as f64 / 1e6
}

/// Estimated and true camera positions projected on the horizontal and a
/// vertical plane.
pub fn plot_trajectory(path: &Path, logs: &RunLogs, truth: &TruthData) -> Result<(), PipelineError> {
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let (left, right) = root.split_horizontally(SIZE.0 / 2);
    let est: Vec<[f64; 3]> = logs.poses.iter().map(|r| [r.tx, r.ty, r.tz]).collect();
    let gt: Vec<[f64; 3]> = truth.poses.iter().map(|p| [p.position.x, p.position.y, p.position.z]).collect();
    for (area, (i, j), title) in [(left, (0, 1), "top view (x, y)"), (right, (0, 2), "side view (x, z)")] {
        let all = || est.iter().chain(gt.iter());
        let mut chart = ChartBuilder::on(&area)
            .caption(title, ("sans-serif", 18))
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(50)
            .build_cartesian_2d(range(all().map(|p| p[i])), range(all().map(|p| p[j])))
            .map_err(plot_err)?;
        chart.configure_mesh().x_desc("m").y_desc("m").draw().map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(gt.iter().map(|p| (p[i], p[j])), &BLACK))
            .map_err(plot_err)?
            .label("truth")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLACK));
        chart
            .draw_series(LineSeries::new(est.iter().map(|p| (p[i], p[j])), &RED))
            .map_err(plot_err)?
            .label("estimate")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], RED));
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    }
    root.present().map_err(plot_err)
}

/// Position error per axis against time.
pub fn plot_position_error(path: &Path, logs: &RunLogs, truth: &TruthData) -> Result<(), PipelineError> {
    let err: Vec<(f64, [f64; 3])> = logs
        .poses
        .iter()
        .filter_map(|r| {
            let gt = interpolate_pose(&truth.poses, r.t_us)?;
            Some((secs(r.t_us), [r.tx - gt.position.x, r.ty - gt.position.y, r.tz - gt.position.z]))
        })
        .collect();
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("position error", ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(60)
        .build_cartesian_2d(range(err.iter().map(|e| e.0)), range(err.iter().flat_map(|e| e.1)))
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("t (s)").y_desc("error (m)").draw().map_err(plot_err)?;
    for (k, (name, color)) in [("x", RED), ("y", GREEN), ("z", BLUE)].into_iter().enumerate() {
        chart
            .draw_series(LineSeries::new(err.iter().map(|e| (e.0, e.1[k])), color))
            .map_err(plot_err)?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Tracked image positions of every landmark over the true projections.
pub fn plot_tracking(path: &Path, logs: &RunLogs, truth: &TruthData) -> Result<(), PipelineError> {
    let mut ids: Vec<u32> = logs.tracks.iter().map(|r| r.id).collect();
    ids.sort_unstable();
    ids.dedup();
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let u = range(logs.tracks.iter().map(|r| r.u));
    let v = range(logs.tracks.iter().map(|r| r.v));
    // Image rows grow downwards.
    let mut chart = ChartBuilder::on(&root)
        .caption("landmark tracks (line) and true projections (dots)", ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(50)
        .build_cartesian_2d(u, v.end..v.start)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("u (px)").y_desc("v (px)").draw().map_err(plot_err)?;
    for (k, id) in ids.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        let rows: Vec<_> = logs.tracks.iter().filter(|r| r.id == *id).collect();
        chart
            .draw_series(rows.iter().filter_map(|r| {
                interpolate_pixel(&truth.pixels, r.id, r.t_us).map(|p| Circle::new((p.x, p.y), 1, color.mix(0.4).filled()))
            }))
            .map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(rows.iter().map(|r| (r.u, r.v)), color))
            .map_err(plot_err)?
            .label(format!("landmark {id}"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Writes all plots into `dir` and returns their paths.
pub fn write_plots(dir: &Path, logs: &RunLogs, truth: &TruthData) -> Result<Vec<PathBuf>, PipelineError> {
    let paths = [TRAJECTORY_SVG, POSITION_ERROR_SVG, TRACKING_SVG].map(|n| dir.join(n));
    plot_trajectory(&paths[0], logs, truth)?;
    plot_position_error(&paths[1], logs, truth)?;
    plot_tracking(&paths[2], logs, truth)?;
    Ok(paths.to_vec())
}
