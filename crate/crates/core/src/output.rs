//! CSV and summary output for a simulation record.
//!
//! Every CSV has a header row, LF line endings and the time column first.
//! Numbers are printed with 17 significant digits so they parse back to the
//! same `f64`. Agent and component labels in headers are one-based.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use nalgebra::DVector;

use crate::matgraph::MatrixWeightedNetwork;
use crate::sim::{
    bipartite_disagreement, leader_tracking_error, predict_consensus_value, zeno_report, PredictionAnchor,
};
use crate::sim::SimulationRecord;

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const CONTROLS_CSV: &str = "controls.csv";
pub const EVENTS_CSV: &str = "events.csv";
pub const PSI_CSV: &str = "psi.csv";
pub const SUMMARY_TXT: &str = "summary.txt";

pub const OUTPUT_FILES: [&str; 5] = [TRAJECTORY_CSV, CONTROLS_CSV, EVENTS_CSV, PSI_CSV, SUMMARY_TXT];

/// Lossless decimal form of `v`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn stacked_header(prefix: &str, n: usize, d: usize) -> String {
    let mut h = String::from("t");
    for i in 1..=n {
        for k in 1..=d {
            write!(h, ",{prefix}{i}_{k}").unwrap();
        }
    }
    h.push('\n');
    h
}

fn series_csv(header: String, times: &[f64], rows: &[DVector<f64>]) -> String {
    let mut out = header;
    for (t, row) in times.iter().zip(rows) {
        out.push_str(&fmt_num(*t));
        for v in row.iter() {
            out.push(',');
            out.push_str(&fmt_num(*v));
        }
        out.push('\n');
    }
    out
}

pub fn trajectory_csv(rec: &SimulationRecord) -> String {
    series_csv(stacked_header("x", rec.n, rec.d), &rec.times, &rec.states)
}

pub fn controls_csv(rec: &SimulationRecord) -> String {
    series_csv(stacked_header("u", rec.n, rec.d), &rec.times, &rec.controls)
}

/// One row per broadcast, in time order.
pub fn events_csv(rec: &SimulationRecord) -> String {
    let mut out = String::from("t,agent\n");
    for e in &rec.events {
        writeln!(out, "{},{}", fmt_num(e.time), e.agent + 1).unwrap();
    }
    out
}

/// Auxiliary variables; header only in continuous modes.
pub fn psi_csv(rec: &SimulationRecord) -> String {
    let mut header = String::from("t");
    for i in 1..=rec.n {
        write!(header, ",psi{i}").unwrap();
    }
    header.push('\n');
    series_csv(header, &rec.times, &rec.psi)
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_num(*x)).collect();
    format!("[{}]", parts.join(", "))
}

pub fn summary_txt(rec: &SimulationRecord, g: &MatrixWeightedNetwork) -> String {
    let mut s = String::new();
    writeln!(s, "mode: {}", rec.mode.name()).unwrap();
    writeln!(s, "agents: {}", rec.n).unwrap();
    writeln!(s, "dimension: {}", rec.d).unwrap();
    writeln!(s, "t_end: {}", fmt_num(rec.t_end)).unwrap();
    writeln!(s, "samples: {}", rec.len()).unwrap();
    let (pos, neg) = rec.gauge.partition();
    let one_based = |v: Vec<usize>| v.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",");
    writeln!(s, "partition: {{{}}} / {{{}}}", one_based(pos), one_based(neg)).unwrap();
    match rec.t_sf {
        Some(t) => writeln!(s, "T_sf: {}", fmt_num(t)).unwrap(),
        None => writeln!(s, "T_sf: none").unwrap(),
    }
    match rec.final_state() {
        Some(x) => {
            writeln!(s, "final_disagreement: {}", fmt_num(bipartite_disagreement(x, g))).unwrap();
            if let Some(w0) = &rec.target {
                writeln!(s, "final_tracking_error: {}", fmt_num(leader_tracking_error(x, w0))).unwrap();
            }
        }
        None => writeln!(s, "final_disagreement: none").unwrap(),
    }
    if rec.target.is_none() {
        match predict_consensus_value(rec, &rec.gauge) {
            Some(p) => {
                let anchor = match p.anchor {
                    PredictionAnchor::SaturationFree(t) => format!("gauged average at T_sf = {}", fmt_num(t)),
                    PredictionAnchor::Initial => "gauged average of x(0)".to_string(),
                };
                writeln!(s, "predicted_consensus: {} ({anchor})", fmt_vec(&p.value)).unwrap();
            }
            None => writeln!(s, "predicted_consensus: none").unwrap(),
        }
    }
    let zeno = zeno_report(rec, g);
    writeln!(s, "total_events: {}", rec.total_events()).unwrap();
    match zeno.min_gap {
        Some(gap) => writeln!(s, "min_gap: {}", fmt_num(gap)).unwrap(),
        None => writeln!(s, "min_gap: none").unwrap(),
    }
    writeln!(s, "agent,events,min_gap").unwrap();
    for i in 0..rec.n {
        let count = rec.event_counts.get(i).copied().unwrap_or(0);
        let gap = zeno
            .agents
            .get(i)
            .and_then(|a| a.min_gap)
            .map_or_else(|| "none".to_string(), fmt_num);
        writeln!(s, "{},{count},{gap}", i + 1).unwrap();
    }
    s
}

/// Write the full file set into `dir`, creating it if needed.
pub fn write_outputs(rec: &SimulationRecord, g: &MatrixWeightedNetwork, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(TRAJECTORY_CSV), trajectory_csv(rec))?;
    fs::write(dir.join(CONTROLS_CSV), controls_csv(rec))?;
    fs::write(dir.join(EVENTS_CSV), events_csv(rec))?;
    fs::write(dir.join(PSI_CSV), psi_csv(rec))?;
    fs::write(dir.join(SUMMARY_TXT), summary_txt(rec, g))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn header_layout() {
        assert_eq!(stacked_header("x", 2, 2), "t,x1_1,x1_2,x2_1,x2_2\n");
    }
}
