use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::run::ResultBundle;
use crate::error::{Error, Result};
use crate::plan::scale;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const BITS_FILE: &str = "bits.csv";
pub const ENERGY_FILE: &str = "energy.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Energy columns in `energy.csv`, in order.
pub const ENERGY_COLUMNS: [&str; 6] = ["comp_uav", "comp_leo", "tx_sensor_uav", "tx_uav_leo", "tx_leo_uav", "flying"];

/// Nine significant digits.
fn f9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Twelve significant digits, enough for per-frame sums to reproduce the
/// totals at 1e-9.
fn f12(x: f64) -> String {
    format!("{x:.11e}")
}

fn round12(x: f64) -> Value {
    let r: f64 = f12(x).parse().unwrap_or(x);
    if r.is_finite() {
        json!(r)
    } else {
        Value::Null
    }
}

pub fn trajectory_csv(bundle: &ResultBundle) -> String {
    let mut s = String::from("n,x_km,y_km\n");
    for (i, p) in bundle.decision.trajectory.waypoints.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", i + 1, f9(p.x / scale::POSITION), f9(p.y / scale::POSITION));
    }
    s
}

pub fn bits_csv(bundle: &ResultBundle) -> String {
    let a = &bundle.decision.alloc;
    let mut s = String::from("k,n,L_IU,L_UL,l_L,L_LU,l_U\n");
    for k in 0..a.uplink_sensor_uav.len() {
        for n in 0..a.uplink_sensor_uav[k].len() {
            let cols = [
                a.uplink_sensor_uav[k][n],
                a.uplink_uav_leo[k][n],
                a.compute_leo[k][n],
                a.downlink_leo_uav[k][n],
                a.compute_uav[k][n],
            ];
            let _ = write!(s, "{},{}", k + 1, n + 1);
            for c in cols {
                let _ = write!(s, ",{}", f9(c / scale::BITS));
            }
            s.push('\n');
        }
    }
    s
}

/// Per-frame energy components, summed over sensors.
pub fn energy_rows(bundle: &ResultBundle) -> Vec<[f64; 6]> {
    let b = &bundle.breakdown;
    let sum_k = |m: &Vec<Vec<f64>>, n: usize| m.iter().map(|row| row[n]).sum::<f64>();
    (0..b.flying.len())
        .map(|n| {
            [
                sum_k(&b.comp_uav, n),
                sum_k(&b.comp_leo, n),
                sum_k(&b.tx_sensor_uav, n),
                sum_k(&b.tx_uav_leo, n),
                sum_k(&b.tx_leo_uav, n),
                b.flying[n],
            ]
        })
        .collect()
}

pub fn energy_csv(bundle: &ResultBundle) -> String {
    let mut s = format!("n,{}\n", ENERGY_COLUMNS.map(|c| format!("{c}_J")).join(","));
    for (n, row) in energy_rows(bundle).iter().enumerate() {
        let _ = write!(s, "{}", n + 1);
        for c in row {
            let _ = write!(s, ",{}", f12(*c));
        }
        s.push('\n');
    }
    s
}

/// Summary record. Contains no wall-clock data, so it is a pure function of
/// the configuration and seed.
pub fn summary_json(bundle: &ResultBundle) -> String {
    let t = &bundle.breakdown.totals;
    let value = json!({
        "seed": bundle.seed,
        "scheme": bundle.scheme.label(),
        "scenario": bundle.scenario.label(),
        "sensors": bundle.mission.sensor_count(),
        "frames": bundle.mission.frame_count,
        "beta": bundle.beta,
        "termination": bundle.termination,
        "iterations": bundle.iterations,
        "final_residual": bundle.final_residual().map_or(Value::Null, round12),
        "max_violation": round12(bundle.max_violation),
        "data_usage_rate": round12(bundle.data_usage_rate),
        "total_energy_J": round12(t.objective),
        "totals_J": {
            "comp_uav": round12(t.comp_uav),
            "comp_leo": round12(t.comp_leo),
            "tx_sensor_uav": round12(t.tx_sensor_uav),
            "tx_uav_leo": round12(t.tx_uav_leo),
            "tx_leo_uav": round12(t.tx_leo_uav),
            "flying": round12(t.flying),
            "downlink_end": round12(t.downlink_end),
            "objective": round12(t.objective),
            "report": round12(t.report),
        },
    });
    let mut s = serde_json::to_string_pretty(&value).expect("summary is plain JSON");
    s.push('\n');
    s
}

/// Writes the five result files into `dir`, creating it if needed, and
/// returns their paths.
pub fn export_results(bundle: &ResultBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        (TRAJECTORY_FILE, trajectory_csv(bundle)),
        (BITS_FILE, bits_csv(bundle)),
        (ENERGY_FILE, energy_csv(bundle)),
        (TRACE_FILE, bundle.trace.to_csv()),
        (SUMMARY_FILE, summary_json(bundle)),
    ];
    files
        .into_iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
