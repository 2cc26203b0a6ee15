//! Per-step trace rows and their CSV form.
//!
//! CSV columns are fixed: `k,y,u,y_star,f_true,f_est,loss,regret_avg,theta_err,mu_k,r_k,flags`.
//! Columns a mode cannot fill are left empty. Floats are written in shortest
//! round-trip form, so a trace read back reproduces every value exactly.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const TRACE_COLUMNS: [&str; 12] = [
    "k",
    "y",
    "u",
    "y_star",
    "f_true",
    "f_est",
    "loss",
    "regret_avg",
    "theta_err",
    "mu_k",
    "r_k",
    "flags",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepFlags {
    /// The control target was unreachable inside the actuator range.
    pub saturated: bool,
    /// The estimated input gain vanished; the previous control was held.
    pub singular_gain: bool,
    /// The estimate norm exceeded the divergence threshold.
    pub diverged: bool,
}

impl StepFlags {
    pub fn any(&self) -> bool {
        self.saturated || self.singular_gain || self.diverged
    }

    pub fn encode(&self) -> String {
        let mut parts = Vec::new();
        if self.saturated {
            parts.push("saturated");
        }
        if self.singular_gain {
            parts.push("singular_gain");
        }
        if self.diverged {
            parts.push("diverged");
        }
        parts.join("|")
    }

    pub fn decode(s: &str) -> Result<Self> {
        let mut f = StepFlags::default();
        for part in s.split('|').filter(|p| !p.is_empty()) {
            match part {
                "saturated" => f.saturated = true,
                "singular_gain" => f.singular_gain = true,
                "diverged" => f.diverged = true,
                other => {
                    return Err(Error::Parse {
                        what: "trace flags".into(),
                        message: format!("unknown flag `{other}`"),
                    })
                }
            }
        }
        Ok(f)
    }
}

/// One step: regressor `phi_k`, estimate `theta_k`, observation `y_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: u64,
    /// Observation `y_{k+1}`.
    pub y: f64,
    /// Control `u_k` (control mode only).
    pub u: Option<f64>,
    /// Reference `y*_{k+1}` (control mode only).
    pub y_star: Option<f64>,
    /// Optimal prediction `f(phi_k, theta*)`, when the truth is known.
    pub f_true: Option<f64>,
    /// Adaptive prediction `f(phi_k, theta_k)`.
    pub f_est: f64,
    /// Observed loss `L(y_{k+1}, f(phi_k, theta_k))`.
    pub loss: f64,
    /// Per-step regret `L(t*, f_est) - L(t*, t*)`.
    pub regret: Option<f64>,
    /// Running mean of `regret` over rows `0..=k`.
    pub regret_avg: Option<f64>,
    /// `||theta_{k+1} - theta*||`, the error after this row's update.
    pub theta_err: Option<f64>,
    pub mu_k: f64,
    pub r_k: f64,
    /// `||grad f(phi_k, theta_k)||^2`. Not written to CSV; equals the `r_k`
    /// increment.
    pub grad_norm_sq: f64,
    /// Additive plant noise `w_{k+1}`. Not written to CSV.
    pub noise: Option<f64>,
    pub flags: StepFlags,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trace_csv<W: Write>(out: W, rows: &[StepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse {
        what: "trace csv".into(),
        message: e.to_string(),
    };
    w.write_record(TRACE_COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.y.to_string(),
            opt(r.u),
            opt(r.y_star),
            opt(r.f_true),
            r.f_est.to_string(),
            r.loss.to_string(),
            opt(r.regret_avg),
            opt(r.theta_err),
            r.mu_k.to_string(),
            r.r_k.to_string(),
            r.flags.encode(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse {
        what: "trace csv".into(),
        message: e.to_string(),
    })
}

pub fn save_trace(path: &Path, rows: &[StepRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_csv(std::io::BufWriter::new(file), rows)
}

/// A trace row as read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: u64,
    pub y: f64,
    pub u: Option<f64>,
    pub y_star: Option<f64>,
    pub f_true: Option<f64>,
    pub f_est: f64,
    pub loss: f64,
    pub regret_avg: Option<f64>,
    pub theta_err: Option<f64>,
    pub mu_k: f64,
    pub r_k: f64,
    pub flags: StepFlags,
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            what: "trace header".into(),
            message: e.to_string(),
        })?
        .clone();
    if headers.iter().ne(TRACE_COLUMNS.iter().copied()) {
        return Err(Error::Parse {
            what: "trace header".into(),
            message: format!("expected {}", TRACE_COLUMNS.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Data {
            line,
            message: e.to_string(),
        })?;
        let num = |j: usize| -> Result<f64> {
            rec[j].parse::<f64>().map_err(|e| Error::Data {
                line,
                message: format!("column {}: {e}", TRACE_COLUMNS[j]),
            })
        };
        let opt_num = |j: usize| -> Result<Option<f64>> {
            if rec[j].is_empty() {
                Ok(None)
            } else {
                num(j).map(Some)
            }
        };
        rows.push(TraceRow {
            k: rec[0].parse().map_err(|e| Error::Data {
                line,
                message: format!("column k: {e}"),
            })?,
            y: num(1)?,
            u: opt_num(2)?,
            y_star: opt_num(3)?,
            f_true: opt_num(4)?,
            f_est: num(5)?,
            loss: num(6)?,
            regret_avg: opt_num(7)?,
            theta_err: opt_num(8)?,
            mu_k: num(9)?,
            r_k: num(10)?,
            flags: StepFlags::decode(&rec[11])?,
        });
    }
    Ok(rows)
}

pub fn load_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace_csv(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: u64) -> StepRecord {
        StepRecord {
            k,
            y: 0.1 + k as f64 / 3.0,
            u: Some(-2.5e-7),
            y_star: Some(0.5),
            f_true: None,
            f_est: 1.0 / 7.0,
            loss: 3.0,
            regret: None,
            regret_avg: None,
            theta_err: Some(2.0f64.sqrt()),
            mu_k: 1e-4,
            r_k: 12345.678,
            grad_norm_sq: 0.0,
            noise: None,
            flags: StepFlags {
                saturated: k.is_multiple_of(2),
                singular_gain: true,
                diverged: false,
            },
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows: Vec<_> = (0..3).map(row).collect();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text
            .starts_with("k,y,u,y_star,f_true,f_est,loss,regret_avg,theta_err,mu_k,r_k,flags\n"));
        let back = read_trace_csv(&buf[..]).unwrap();
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.y.to_bits(), b.y.to_bits());
            assert_eq!(a.u, b.u);
            assert_eq!(b.f_true, None);
            assert_eq!(a.theta_err, b.theta_err);
            assert_eq!(a.flags, b.flags);
        }
    }

    #[test]
    fn bad_header_rejected() {
        assert!(read_trace_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn unknown_flag_rejected() {
        assert!(StepFlags::decode("saturated|bogus").is_err());
        assert_eq!(StepFlags::decode("").unwrap(), StepFlags::default());
    }
}
