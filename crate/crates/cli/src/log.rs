//! CSV log format, version 1.
//!
//! The first line is the comment `# logv1`, the second the column header.
//! Numbers are written with 17 significant digits so a write/read cycle
//! reproduces every `f64` bit for bit. Missing estimates are `NaN`;
//! vehicles without a state machine log mode `none`.

use std::io::Write;

use mavforce_core::admittance::{Mode, ReferencePose};
use mavforce_core::dynamics::{RotorSpeeds, SimState, Wrench};
use mavforce_core::estimator::{Measurement, StateVector};
use mavforce_core::math::UnitQuaternion;
use mavforce_core::sim::{Event, Frame};
use nalgebra::Vector3;

pub const MAGIC: &str = "# logv1";

const STATE: [&str; 13] = [
    "p_x", "p_y", "p_z", "v_x", "v_y", "v_z", "q_x", "q_y", "q_z", "q_w", "w_x", "w_y", "w_z",
];
const ROTORS: [&str; 6] = ["n_1", "n_2", "n_3", "n_4", "n_5", "n_6"];
const ESTIMATE: [&str; 4] = ["F_x", "F_y", "F_z", "tau_z"];
const TRUE_WRENCH: [&str; 4] = ["F_true_x", "F_true_y", "F_true_z", "tau_true_z"];
const REFERENCE: [&str; 4] = ["ref_x", "ref_y", "ref_z", "ref_yaw"];
const COVARIANCE: [&str; 16] = [
    "P_p_x", "P_p_y", "P_p_z", "P_v_x", "P_v_y", "P_v_z", "P_e_x", "P_e_y", "P_e_z", "P_w_x", "P_w_y",
    "P_w_z", "P_F_x", "P_F_y", "P_F_z", "P_tau_z",
];

/// Column names of a simulation log in order.
pub fn log_columns() -> Vec<String> {
    let mut c = vec!["t".to_string()];
    c.extend(STATE.iter().map(|s| s.to_string()));
    c.extend(STATE.iter().map(|s| format!("m_{s}")));
    c.extend(ROTORS.iter().map(|s| s.to_string()));
    c.extend(ESTIMATE.iter().map(|s| s.to_string()));
    c.extend(TRUE_WRENCH.iter().map(|s| s.to_string()));
    c.extend(REFERENCE.iter().map(|s| s.to_string()));
    c.push("mode".into());
    c
}

pub fn estimate_columns() -> Vec<String> {
    let mut c = vec!["t".to_string()];
    c.extend(ESTIMATE.iter().map(|s| s.to_string()));
    c.extend(COVARIANCE.iter().map(|s| s.to_string()));
    c
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn state_fields(out: &mut Vec<String>, s: &SimState) {
    let q = s.attitude.to_array();
    out.extend(s.position.iter().chain(s.velocity.iter()).map(|x| num(*x)));
    out.extend(q.iter().map(|x| num(*x)));
    out.extend(s.angular_rate.iter().map(|x| num(*x)));
}

fn wrench_fields(out: &mut Vec<String>, w: Option<&Wrench>) {
    match w {
        Some(w) => {
            out.extend(w.force.iter().map(|x| num(*x)));
            out.push(num(w.torque));
        }
        None => out.extend(std::iter::repeat_n(num(f64::NAN), 4)),
    }
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

pub fn write_log<W: Write>(mut out: W, frames: &[Frame]) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(log_columns()).map_err(csv_err)?;
    let mut row = Vec::with_capacity(50);
    for f in frames {
        row.clear();
        row.push(num(f.t));
        state_fields(&mut row, &f.truth);
        state_fields(&mut row, &f.measurement.as_state());
        row.extend(f.rotors.0.iter().map(|x| num(*x)));
        wrench_fields(&mut row, f.estimate.as_ref());
        wrench_fields(&mut row, Some(&f.true_wrench));
        row.extend(f.reference.position.iter().map(|x| num(*x)));
        row.push(num(f.reference.yaw));
        row.push(f.mode.map_or("none", Mode::name).to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_estimates<W: Write>(mut out: W, rows: &[(f64, Wrench, StateVector)]) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(estimate_columns()).map_err(csv_err)?;
    for (t, wr, p) in rows {
        let mut row = vec![num(*t)];
        wrench_fields(&mut row, Some(wr));
        row.extend(p.iter().map(|x| num(*x)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_events<W: Write>(out: W, events: &[Event]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "vehicle", "kind", "detail"]).map_err(csv_err)?;
    for e in events {
        w.write_record([num(e.t), e.vehicle.to_string(), e.kind.name().to_string(), e.kind.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()
}

/// Malformed log. `row` counts data rows from 1; 0 means the header.
#[derive(thiserror::Error, Debug, Clone, PartialEq)]
#[error("format error at row {row}: {message}")]
pub struct FormatError {
    pub row: usize,
    pub message: String,
}

fn format_error(row: usize, message: impl Into<String>) -> FormatError {
    FormatError {
        row,
        message: message.into(),
    }
}

/// Parsed log: numeric columns plus the optional text mode column.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTable {
    pub columns: Vec<String>,
    /// One vector per row; the mode column, if any, holds `NaN` here.
    pub rows: Vec<Vec<f64>>,
    pub modes: Vec<String>,
}

impl LogTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    fn require(&self, names: &[&str]) -> Result<Vec<usize>, FormatError> {
        names
            .iter()
            .map(|n| self.column(n).ok_or_else(|| format_error(0, format!("missing column `{n}`"))))
            .collect()
    }
}

pub fn read_table(text: &str) -> Result<LogTable, FormatError> {
    let Some(first) = text.lines().next() else {
        return Err(format_error(0, "empty log"));
    };
    if first.trim() != MAGIC {
        return Err(format_error(0, format!("missing `{MAGIC}` header line")));
    }
    let body = &text[first.len()..];
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(body.trim_start_matches(['\r', '\n']).as_bytes());
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| format_error(0, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if columns.is_empty() || columns.iter().all(|c| c.is_empty()) {
        return Err(format_error(0, "missing column header"));
    }
    let mode_col = columns.iter().position(|c| c == "mode");
    let mut rows = Vec::new();
    let mut modes = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| format_error(row, e.to_string()))?;
        if rec.len() != columns.len() {
            return Err(format_error(row, format!("expected {} fields, found {}", columns.len(), rec.len())));
        }
        let mut values = Vec::with_capacity(columns.len());
        for (i, field) in rec.iter().enumerate() {
            if Some(i) == mode_col {
                modes.push(field.to_string());
                values.push(f64::NAN);
                continue;
            }
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| format_error(row, format!("column `{}`: `{field}` is not a number", columns[i])))?;
            values.push(v);
        }
        rows.push(values);
    }
    Ok(LogTable { columns, rows, modes })
}

fn state_at(row: &[f64], idx: &[usize], k: usize) -> Result<SimState, FormatError> {
    let g = |i: usize| row[idx[i]];
    let norm2: f64 = (6..10).map(|i| g(i) * g(i)).sum();
    if !((norm2 - 1.0).abs() < 1e-9) {
        return Err(format_error(k + 1, "attitude quaternion is not unit norm"));
    }
    Ok(SimState {
        position: Vector3::new(g(0), g(1), g(2)),
        velocity: Vector3::new(g(3), g(4), g(5)),
        attitude: UnitQuaternion::from_array_unchecked([g(6), g(7), g(8), g(9)]),
        angular_rate: Vector3::new(g(10), g(11), g(12)),
    })
}

fn rotors_at(row: &[f64], idx: &[usize]) -> RotorSpeeds {
    RotorSpeeds(std::array::from_fn(|i| row[idx[i]]))
}

/// Time, measurement and applied rotor speeds of every row.
pub fn replay_inputs(table: &LogTable) -> Result<Vec<(f64, Measurement, RotorSpeeds)>, FormatError> {
    let t = table.require(&["t"])?[0];
    let m_names: Vec<String> = STATE.iter().map(|s| format!("m_{s}")).collect();
    let m_refs: Vec<&str> = m_names.iter().map(String::as_str).collect();
    let m = table.require(&m_refs)?;
    let n = table.require(&ROTORS)?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let finite = row[t].is_finite() && m.iter().chain(n.iter()).all(|&i| row[i].is_finite());
            if !finite {
                return Err(format_error(k + 1, "non-finite measurement or rotor speed"));
            }
            let z = state_at(row, &m, k)?;
            Ok((row[t], Measurement::exact(&z), rotors_at(row, &n)))
        })
        .collect()
}

fn wrench_at(row: &[f64], idx: &[usize]) -> Option<Wrench> {
    let w = Wrench::new(Vector3::new(row[idx[0]], row[idx[1]], row[idx[2]]), row[idx[3]]);
    (!w.force.iter().any(|x| x.is_nan()) && !w.torque.is_nan()).then_some(w)
}

/// Full frames back from a simulation log.
pub fn read_frames(table: &LogTable) -> Result<Vec<Frame>, FormatError> {
    let t = table.require(&["t"])?[0];
    let s = table.require(&STATE)?;
    let inputs = replay_inputs(table)?;
    let est = table.require(&ESTIMATE)?;
    let tw = table.require(&TRUE_WRENCH)?;
    let r = table.require(&REFERENCE)?;
    if table.modes.len() != table.rows.len() {
        return Err(format_error(0, "missing column `mode`"));
    }
    table
        .rows
        .iter()
        .zip(inputs)
        .zip(&table.modes)
        .enumerate()
        .map(|(k, ((row, (_, z, n)), mode))| {
            let mode = match mode.as_str() {
                "none" => None,
                m => Some(Mode::from_name(m).ok_or_else(|| format_error(k + 1, format!("unknown mode `{m}`")))?),
            };
            Ok(Frame {
                t: row[t],
                truth: state_at(row, &s, k)?,
                measurement: z,
                rotors: n,
                estimate: wrench_at(row, &est),
                true_wrench: wrench_at(row, &tw).unwrap_or_default(),
                reference: ReferencePose {
                    position: Vector3::new(row[r[0]], row[r[1]], row[r[2]]),
                    yaw: row[r[3]],
                },
                mode,
            })
        })
        .collect()
}
