//! CSV and JSON artifacts written by a run.
//!
//! Numbers use Rust's shortest round-trip formatting, so equal values always
//! produce equal bytes. `+∞` appears as `inf` in CSV and as `null` in JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gcgm_core::{Ext, ReferenceSolution, ResidualSeries, ScreenReport, SupportCertificate, TraceRecord};
use serde::{Deserialize, Serialize};

use crate::Error;

pub const TRACE_HEADER: &str = "t,objective,gap,min_gap,sigma,active_atoms,nonzeros,xi,elapsed_s";
pub const SCREEN_HEADER: &str = "t,threshold,sigma,removed,remaining,removed_ids";
pub const RESIDUAL_HEADER: &str = "t,objective_error,gap,min_gap,gradient_error,gradient_bound,support_error";

pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in trace {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.t, r.objective, r.gap, r.min_gap, r.sigma, r.active_atoms, r.nonzero_coeffs, r.xi, r.elapsed
        );
    }
    s
}

pub fn screen_csv(events: &[ScreenReport]) -> String {
    let mut s = String::from(SCREEN_HEADER);
    s.push('\n');
    for e in events {
        let ids: Vec<String> = e.removed_ids.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            e.t,
            e.threshold,
            e.sigma,
            e.removed_ids.len(),
            e.remaining,
            ids.join(";")
        );
    }
    s
}

pub fn residual_csv(series: &ResidualSeries) -> String {
    let mut s = String::from(RESIDUAL_HEADER);
    s.push('\n');
    for r in &series.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.t, r.objective_error, r.gap, r.min_gap, r.gradient_error, r.gradient_bound, r.support_error
        );
    }
    s
}

fn ext_json(v: Ext) -> Option<f64> {
    match v {
        Ext::Finite(x) => Some(x),
        Ext::PosInf => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateJson {
    pub support_ids: Vec<usize>,
    /// `null` when every atom is in the support.
    pub delta: Option<f64>,
    pub identified_at: Option<usize>,
    #[serde(rename = "L")]
    pub smoothness: f64,
    pub min_gap: Option<f64>,
}

impl From<&SupportCertificate> for CertificateJson {
    fn from(c: &SupportCertificate) -> Self {
        CertificateJson {
            support_ids: c.support_ids.clone(),
            delta: ext_json(c.delta),
            identified_at: c.identified_at,
            smoothness: c.smoothness,
            min_gap: c.min_gap.is_finite().then_some(c.min_gap),
        }
    }
}

/// A reference solution on disk, tied to its problem by a fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceJson {
    pub fingerprint: String,
    pub objective: f64,
    pub gap: f64,
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
    pub coeffs: Vec<(usize, f64)>,
    pub support_ids: Vec<usize>,
    pub delta: Option<f64>,
    #[serde(rename = "L")]
    pub smoothness: f64,
    pub iterations: usize,
    pub reached_tolerance: bool,
    pub refined: bool,
}

impl ReferenceJson {
    pub fn new(fingerprint: String, r: &ReferenceSolution) -> Self {
        ReferenceJson {
            fingerprint,
            objective: r.objective,
            gap: r.gap,
            x: r.x.clone(),
            grad: r.grad.clone(),
            coeffs: r.coeffs.iter().map(|(k, v)| (*k, *v)).collect(),
            support_ids: r.support_ids.clone(),
            delta: ext_json(r.delta),
            smoothness: r.smoothness,
            iterations: r.iterations,
            reached_tolerance: r.reached_tolerance,
            refined: r.refined,
        }
    }

    pub fn solution(&self) -> ReferenceSolution {
        ReferenceSolution {
            x: self.x.clone(),
            grad: self.grad.clone(),
            coeffs: self.coeffs.iter().copied().collect(),
            objective: self.objective,
            gap: self.gap,
            support_ids: self.support_ids.clone(),
            delta: self.delta.map_or(Ext::PosInf, Ext::Finite),
            smoothness: self.smoothness,
            iterations: self.iterations,
            reached_tolerance: self.reached_tolerance,
            refined: self.refined,
        }
    }
}

pub fn write(path: &Path, contents: &str) -> Result<(), Error> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    write(path, &text)
}

pub fn read_reference(path: &Path) -> Result<ReferenceJson, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        let offset = text.lines().take(e.line().saturating_sub(1)).map(|l| l.len() + 1).sum::<usize>() + e.column();
        Error::format(path, offset.saturating_sub(1) as u64, e.to_string())
    })
}

/// `(t, column)` pairs from any CSV with a `t` column, such as a trace or
/// residual file.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<(f64, f64)>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.split_inclusive('\n');
    let header = lines.next().ok_or_else(|| Error::format(path, 0, "empty CSV"))?;
    let names: Vec<&str> = header.trim().split(',').collect();
    let t_at = names.iter().position(|n| *n == "t").ok_or_else(|| Error::format(path, 0, "no `t` column"))?;
    let v_at = names
        .iter()
        .position(|n| *n == column)
        .ok_or_else(|| Error::format(path, 0, format!("no `{column}` column")))?;
    let mut offset = header.len();
    let mut out = Vec::new();
    for line in lines {
        let cells: Vec<&str> = line.trim().split(',').collect();
        if cells.len() == names.len() {
            let t = cells[t_at].parse::<f64>();
            let v = cells[v_at].parse::<f64>();
            match (t, v) {
                (Ok(t), Ok(v)) => out.push((t, v)),
                _ => return Err(Error::format(path, offset as u64, "unparsable row")),
            }
        } else if !line.trim().is_empty() {
            return Err(Error::format(path, offset as u64, format!("expected {} cells", names.len())));
        }
        offset += line.len();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: usize) -> TraceRecord {
        TraceRecord {
            t,
            objective: 0.5,
            gap: f64::INFINITY,
            min_gap: 0.25,
            sigma: 1.0,
            active_atoms: 4,
            nonzero_coeffs: 1,
            xi: 2.0,
            elapsed: 0.0,
        }
    }

    #[test]
    fn trace_format() {
        let csv = trace_csv(&[record(1), record(2)]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        assert_eq!(lines.next(), Some("1,0.5,inf,0.25,1,4,1,2,0"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn screen_ids_use_semicolons() {
        let ev = ScreenReport { t: 3, removed_ids: vec![1, 5], threshold: 0.5, sigma: 2.0, remaining: 8 };
        assert_eq!(screen_csv(&[ev]).lines().nth(1), Some("3,0.5,2,2,8,1;5"));
    }

    #[test]
    fn reference_round_trip() {
        let r = ReferenceSolution {
            x: vec![1.0 / 3.0],
            grad: vec![-0.1],
            coeffs: [(0, 1.0 / 3.0)].into_iter().collect(),
            objective: 0.7,
            gap: 1e-17,
            support_ids: vec![0],
            delta: Ext::PosInf,
            smoothness: 1.0,
            iterations: 10,
            reached_tolerance: true,
            refined: false,
        };
        let json = serde_json::to_string(&ReferenceJson::new("ab".into(), &r)).unwrap();
        let back: ReferenceJson = serde_json::from_str(&json).unwrap();
        assert_eq!(back.solution(), r);
    }
}
