//! SVG frames of a recorded episode, one file per decision step.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cgrl_sim::{VEHICLE_LENGTH, VEHICLE_WIDTH};

use crate::error::{io_err, HarnessError, Result};
use crate::eval::{Frame, Trajectory};

/// Pixels per metre.
pub const SCALE: f64 = 10.0;

/// World metres to file pixels; y points down in the file.
pub fn to_file_coords(traj: &Trajectory, x: f64, y: f64) -> (f64, f64) {
    let extent = traj.half_length + traj.lane_width;
    ((x + extent) * SCALE, (extent - y) * SCALE)
}

pub fn frame_svg(traj: &Trajectory, frame: &Frame) -> String {
    let extent = traj.half_length + traj.lane_width;
    let size = 2.0 * extent * SCALE;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#);
    let _ = writeln!(s, r##"<rect width="{size}" height="{size}" fill="#6b8e4e"/>"##);
    let (h, w) = (traj.half_length, traj.lane_width);
    for (x0, y0, x1, y1) in [(-w, -h, w, h), (-h, -w, h, w)] {
        let (px0, py0) = to_file_coords(traj, x0, y1);
        let (px1, py1) = to_file_coords(traj, x1, y0);
        let _ = writeln!(
            s,
            r##"<polygon class="lane" points="{px0},{py0} {px1},{py0} {px1},{py1} {px0},{py1}" fill="#555"/>"##
        );
    }
    for (a, b) in [((0.0, -h), (0.0, h)), ((-h, 0.0), (h, 0.0))] {
        let (x0, y0) = to_file_coords(traj, a.0, a.1);
        let (x1, y1) = to_file_coords(traj, b.0, b.1);
        let _ = writeln!(s, r##"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="#eee" stroke-dasharray="8 8"/>"##);
    }
    let (lx, ly) = (VEHICLE_LENGTH * SCALE, VEHICLE_WIDTH * SCALE);
    for v in &frame.vehicles {
        let (cx, cy) = to_file_coords(traj, v.x, v.y);
        let deg = -v.heading.to_degrees();
        let fill = if v.is_ego { "#d62728" } else { "#1f77b4" };
        let _ = writeln!(
            s,
            r#"<g class="vehicle" data-id="{}" transform="translate({cx},{cy}) rotate({deg})"><rect x="{}" y="{}" width="{lx}" height="{ly}" fill="{fill}"/></g>"#,
            v.id,
            -lx / 2.0,
            -ly / 2.0,
        );
    }
    let _ = writeln!(s, r#"<text x="10" y="24" font-size="18" fill="white">step {} reward {:.3}</text>"#, frame.step, frame.reward);
    s.push_str("</svg>\n");
    s
}

/// Writes `frame-00001.svg`, ... into `dir`; returns the paths in order.
pub fn render_episode(traj: &Trajectory, dir: &Path) -> Result<Vec<PathBuf>> {
    if traj.frames.is_empty() {
        return Err(HarnessError::Domain("cannot render an empty trajectory".into()));
    }
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    traj.frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let p = dir.join(format!("frame-{:05}.svg", i + 1));
            std::fs::write(&p, frame_svg(traj, f)).map_err(io_err(&p))?;
            Ok(p)
        })
        .collect()
}
