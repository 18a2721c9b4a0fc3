//! Trajectory overlays as plain SVG: terrain cells underneath, one polyline
//! per trial colored by the gait in use.

use std::fmt::Write as _;

use amco_core::grid::{Gait, TerrainClass};
use amco_core::sim::{Outcome, TrialLog, World};

const PX_PER_M: f64 = 40.0;

fn terrain_fill(t: TerrainClass) -> &'static str {
    match t {
        TerrainClass::Stable => "#e8e4da",
        TerrainClass::Granular => "#f2d98c",
        TerrainClass::PoorFoothold => "#a88a6a",
        TerrainClass::HighResistance => "#9fcf8f",
        TerrainClass::Obstacle => "#555555",
        TerrainClass::Unknown => "#ffffff",
    }
}

pub fn gait_stroke(g: Gait) -> &'static str {
    match g {
        Gait::Trot => "#1f6fd1",
        Gait::Amble => "#e07b00",
        Gait::Crawl => "#b0128a",
    }
}

pub fn trajectory_svg(world: &World, logs: &[TrialLog], title: &str) -> String {
    let (w, h) = (world.width_m() * PX_PER_M, world.height_m() * PX_PER_M);
    let px = |x: f64, y: f64| (x * PX_PER_M, h - y * PX_PER_M);
    let legend = 24.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{:.0}" viewBox="0 0 {w:.0} {:.0}">"#,
        h + legend,
        h + legend
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));

    let cs = world.cell_size * PX_PER_M;
    for row in 0..world.rows {
        for col in 0..world.cols {
            let cell = world.cell(col, row);
            let fill = if cell.obstacle { terrain_fill(TerrainClass::Obstacle) } else { terrain_fill(cell.terrain) };
            let (x, y) = px(col as f64 * world.cell_size, (row + 1) as f64 * world.cell_size);
            let _ = writeln!(s, r#"<rect x="{x:.1}" y="{y:.1}" width="{cs:.1}" height="{cs:.1}" fill="{fill}"/>"#);
        }
    }

    for log in logs {
        let path = log.path();
        // consecutive points of one gait form a polyline
        let mut run: Vec<(f64, f64)> = Vec::new();
        let mut gait = None;
        for (i, step) in log.steps.iter().enumerate() {
            if gait.is_some_and(|g| g != step.gait) {
                run.push(path[i]);
                polyline(&mut s, &run, gait.unwrap(), px);
                run.clear();
            }
            gait = Some(step.gait);
            run.push(path[i]);
        }
        if let Some(g) = gait {
            run.push(*path.last().unwrap());
            polyline(&mut s, &run, g, px);
        }
        if log.summary.outcome != Outcome::Success {
            let (x, y) = px(log.summary.final_pose.x, log.summary.final_pose.y);
            let _ = writeln!(
                s,
                r##"<path d="M{:.1} {:.1}l8 8m0 -8l-8 8" stroke="#d11" stroke-width="2"><title>{}</title></path>"##,
                x - 4.0,
                y - 4.0,
                log.summary.outcome
            );
        }
    }

    let (sx, sy) = px(world.start.x, world.start.y);
    let _ = writeln!(s, r##"<circle cx="{sx:.1}" cy="{sy:.1}" r="5" fill="#222"/>"##);
    let (gx, gy) = px(world.goal.0, world.goal.1);
    let _ = writeln!(s, r##"<circle cx="{gx:.1}" cy="{gy:.1}" r="7" fill="none" stroke="#222" stroke-width="2"/>"##);

    let mut lx = 8.0;
    for g in Gait::ALL {
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{:.0}" width="14" height="4" fill="{}"/><text x="{}" y="{:.0}" font-size="12" font-family="sans-serif">{}</text>"#,
            h + 10.0,
            gait_stroke(g),
            lx + 18.0,
            h + 16.0,
            g.name()
        );
        lx += 80.0;
    }
    s.push_str("</svg>\n");
    s
}

fn polyline(s: &mut String, pts: &[(f64, f64)], gait: Gait, px: impl Fn(f64, f64) -> (f64, f64)) {
    let coords: Vec<String> = pts
        .iter()
        .map(|&(x, y)| {
            let (u, v) = px(x, y);
            format!("{u:.1},{v:.1}")
        })
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2" stroke-opacity="0.7"/>"#,
        coords.join(" "),
        gait_stroke(gait)
    );
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
