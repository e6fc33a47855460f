//! Loop trajectories as CSV, in both directions.

use std::path::Path;

use ep3_core::encircle::{default_threshold, detect_conversions, LoopSample, LoopTrajectory};
use ep3_core::solver::EigenFrame;
use ep3_core::{ControlPoint, C64};

use crate::output::{num, Table};
use crate::CliError;

pub const HEADER: [&str; 10] =
    ["theta", "delta", "lambda_re", "lambda_im", "re_e1", "im_e1", "re_e2", "im_e2", "re_e3", "im_e3"];

pub fn to_table(traj: &LoopTrajectory) -> Table {
    let mut t = Table::new(&HEADER);
    for s in &traj.samples {
        let mut row = vec![num(s.theta), num(s.point.delta), num(s.point.lambda_re), num(s.point.lambda_im)];
        for e in s.frame.values {
            row.push(num(e.re));
            row.push(num(e.im));
        }
        t.push(row);
    }
    t
}

/// Reads a trajectory written by [`to_table`]. Eigenvectors are not stored,
/// so downstream phase computation recomputes them; conversion events are
/// re-detected with the default threshold.
pub fn load(path: &Path) -> Result<LoopTrajectory, CliError> {
    let bad = |msg: String| CliError::Usage(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(bad(format!("expected header {}", HEADER.join(","))));
    }
    let mut samples = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let v: Vec<f64> = rec
            .iter()
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", line + 2)))?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(bad(format!("row {}: non-finite value", line + 2)));
        }
        let values = [C64::new(v[4], v[5]), C64::new(v[6], v[7]), C64::new(v[8], v[9])];
        samples.push(LoopSample {
            theta: v[0],
            point: ControlPoint::new(v[1], v[2], v[3]),
            frame: EigenFrame::from_values(values),
        });
    }
    if samples.len() < 3 {
        return Err(bad(format!("{} samples, at least 3 are required", samples.len())));
    }
    let mut traj = LoopTrajectory { contour: None, samples, events: Vec::new(), refinements: 0 };
    traj.events = detect_conversions(&traj, default_threshold(&traj));
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ep3_core::encircle::{track_loop, Contour};
    use ep3_core::SystemConfig;

    #[test]
    fn round_trip_keeps_twelve_digits_and_events() {
        let cfg = SystemConfig::default();
        let (traj, _) = track_loop(&cfg, &Contour::new(0.6, 0.25, 2.5, 1.0).with_steps(512)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, to_table(&traj).to_bytes()).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back.samples.len(), traj.samples.len());
        for (a, b) in back.samples.iter().zip(&traj.samples) {
            for k in 0..3 {
                assert!((a.frame.values[k] - b.frame.values[k]).norm() < 1e-11);
            }
        }
        assert_eq!(back.events.len(), traj.events.len());
        for (a, b) in back.events.iter().zip(&traj.events) {
            assert_eq!(a.branches, b.branches);
            assert!((a.theta - b.theta).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "theta,x\n1,2\n").unwrap();
        assert!(matches!(load(&path), Err(CliError::Usage(_))));
        std::fs::write(&path, format!("{}\n0,1,1,1,1,1,1,1,1,nope\n", HEADER.join(","))).unwrap();
        assert!(matches!(load(&path), Err(CliError::Usage(_))));
    }
}
