//! CSV and JSON output.

use std::io::Write;

use serde::Serialize;

use crate::simulator::{McSummary, Trace};
use crate::so3::{log_so3, Vec3};

/// Header of the trace CSV.
pub const TRACE_HEADER: [&str; 20] = [
    "t", "agent", "R00", "R01", "R02", "R10", "R11", "R12", "R20", "R21", "R22", "Tx", "Ty", "Tz",
    "wx", "wy", "wz", "vx", "vy", "vz",
];

fn num(x: f64) -> String {
    format!("{x}")
}

/// One row per agent and snapshot.
pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for snap in &trace.snapshots {
        for (i, a) in snap.agents.iter().enumerate() {
            let mut row = vec![num(snap.t), i.to_string()];
            row.extend(a.pose.to_row_major().iter().map(|&x| num(x)));
            row.extend(a.omega.iter().chain(a.v.iter()).map(|&x| num(x)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `t,agent,neighbors` with the neighbor list space separated.
pub fn write_events_csv<W: Write>(trace: &Trace, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "agent", "neighbors"])?;
    for e in &trace.events {
        let nb: Vec<String> = e.neighbors.iter().map(|j| j.to_string()).collect();
        w.write_record([num(e.t), e.agent.to_string(), nb.join(" ")])?;
    }
    w.flush()?;
    Ok(())
}

/// Which poses a figure is drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FigureFrame {
    /// The simulated poses `G_i`.
    World,
    /// `G̃_i = G_i G_i*⁻¹`; identical to `World` without formation targets.
    Formation,
}

/// Plot data relative to agent 0: `‖G_i − G_0‖_F`, `‖R_i − R_0‖_F`,
/// `‖x_i − x_0‖` in axis-angle coordinates (empty outside the chart),
/// `‖T_i − T_0‖`, and the upper-left rotation entry of every agent.
pub fn write_figure_csv<W: Write>(trace: &Trace, frame: FigureFrame, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = trace.n;
    let mut header = vec!["t".to_string()];
    for prefix in ["g_err", "rot_err", "x_err", "trans_err"] {
        header.extend((1..n).map(|i| format!("{prefix}_{i}")));
    }
    header.extend((0..n).map(|i| format!("R00_{i}")));
    w.write_record(&header)?;
    for snap in &trace.snapshots {
        let poses = match frame {
            FigureFrame::World => snap.poses(),
            FigureFrame::Formation => trace.tilde_poses(snap),
        };
        let x: Vec<Option<Vec3>> = poses.iter().map(|p| log_so3(&p.r).ok()).collect();
        let mut row = vec![num(snap.t)];
        row.extend((1..n).map(|i| num((poses[i].to_matrix() - poses[0].to_matrix()).norm())));
        row.extend((1..n).map(|i| num((poses[i].r.matrix() - poses[0].r.matrix()).norm())));
        row.extend((1..n).map(|i| match (x[i], x[0]) {
            (Some(a), Some(b)) => num((a - b).norm()),
            _ => String::new(),
        }));
        row.extend((1..n).map(|i| num((poses[i].t - poses[0].t).norm())));
        row.extend(poses.iter().map(|p| num(p.r.matrix()[(0, 0)])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per Monte-Carlo trial.
pub fn write_mc_csv<W: Write>(summary: &McSummary, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "seed",
        "outcome",
        "final_rotation_error",
        "final_translation_error",
        "success",
    ])?;
    for r in &summary.results {
        w.write_record([
            r.index.to_string(),
            r.seed.to_string(),
            r.outcome.name().to_string(),
            r.final_rotation_error.map(num).unwrap_or_default(),
            num(r.final_translation_error),
            r.success.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON followed by a newline.
pub fn write_json<W: Write, T: Serialize>(value: &T, mut out: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")
}
