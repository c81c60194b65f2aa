//! CSV and JSON emission, and the matching readers.
//!
//! Trace files are long-format with header `t_ns,channel_name,value`, one row
//! per bin centre; undefined bins carry an empty value. Trajectory files hold
//! the time and the 3×3 density matrix as 18 real columns, row-major over
//! {g, H, V}. Floats are written in shortest round-trip form, so reading a
//! file back reproduces the values exactly.

use std::io::{Read, Write};

use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::gates::GateResult;
use crate::state::ExcitonDensityMatrix;
use crate::trace::{TimeTrace, TraceKind};
use crate::{Error, Result, C64};

pub const TRACE_HEADER: [&str; 3] = ["t_ns", "channel_name", "value"];

const BASIS: [&str; 3] = ["g", "H", "V"];

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Csv {
        line,
        reason: e.to_string(),
    }
}

pub fn write_traces_csv<W: Write>(w: W, traces: &[TimeTrace]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER).map_err(csv_err)?;
    for tr in traces {
        for (i, c) in tr.centers().iter().enumerate() {
            let v = match tr.get(i) {
                Some(v) => v.to_string(),
                None => String::new(),
            };
            out.write_record([c.to_string().as_str(), &tr.channel, &v]).map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn traces_to_csv_string(traces: &[TimeTrace]) -> Result<String> {
    let mut buf = Vec::new();
    write_traces_csv(&mut buf, traces)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

fn parse_f64(s: &str, line: usize, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Csv {
        line,
        reason: format!("{what} `{s}` is not a number"),
    })
}

/// (channel, centres, values, valid, first line)
type Group = (String, Vec<f64>, Vec<f64>, Vec<bool>, usize);

/// Read a trace file. Channels come back in order of first appearance;
/// `kind` is applied to all of them (the file does not record it).
pub fn read_traces_csv<R: Read>(r: R, kind: TraceKind) -> Result<Vec<TimeTrace>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(Error::Csv {
            line: 1,
            reason: format!("expected header {}, found {}", TRACE_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut groups: Vec<Group> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 3 {
            return Err(Error::Csv {
                line,
                reason: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        let t = parse_f64(&rec[0], line, "t_ns")?;
        let (v, ok) = if rec[2].trim().is_empty() {
            (0.0, false)
        } else {
            (parse_f64(&rec[2], line, "value")?, true)
        };
        let name = &rec[1];
        let idx = match groups.iter().position(|g| g.0 == name) {
            Some(i) => i,
            None => {
                groups.push((name.to_string(), Vec::new(), Vec::new(), Vec::new(), line));
                groups.len() - 1
            }
        };
        let g = &mut groups[idx];
        g.1.push(t);
        g.2.push(v);
        g.3.push(ok);
    }
    groups
        .into_iter()
        .map(|(name, centers, values, valid, line)| {
            if centers.len() < 2 {
                return Err(Error::Csv {
                    line,
                    reason: format!("channel `{name}` needs ≥ 2 bins to fix the bin width"),
                });
            }
            let width = (centers[centers.len() - 1] - centers[0]) / (centers.len() - 1) as f64;
            let mut tr = TimeTrace::from_centers(name, &centers, values, width).map_err(|e| Error::Csv {
                line,
                reason: e.to_string(),
            })?;
            tr.valid = valid;
            tr.kind = kind;
            Ok(tr)
        })
        .collect()
}

/// `t_ns` followed by `re_ij`, `im_ij` for i, j ∈ {g, H, V}.
pub fn trajectory_header() -> Vec<String> {
    let mut h = vec!["t_ns".to_string()];
    for a in BASIS {
        for b in BASIS {
            h.push(format!("re_{a}{b}"));
            h.push(format!("im_{a}{b}"));
        }
    }
    h
}

pub fn write_trajectory_csv<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(trajectory_header()).map_err(csv_err)?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let mut row = Vec::with_capacity(19);
        row.push(t.to_string());
        for i in 0..3 {
            for j in 0..3 {
                let z = s.rho[(i, j)];
                row.push(z.re.to_string());
                row.push(z.im.to_string());
            }
        }
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(r: R) -> Result<Vec<(f64, ExcitonDensityMatrix)>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().map(str::to_string).collect::<Vec<_>>() != trajectory_header() {
        return Err(Error::Csv {
            line: 1,
            reason: "not a trajectory file (expected t_ns + 18 matrix columns)".into(),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 19 {
            return Err(Error::Csv {
                line,
                reason: format!("expected 19 fields, found {}", rec.len()),
            });
        }
        let t = parse_f64(&rec[0], line, "t_ns")?;
        let mut rho = nalgebra::Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let k = 1 + 2 * (3 * i + j);
                rho[(i, j)] = C64::new(parse_f64(&rec[k], line, "re")?, parse_f64(&rec[k + 1], line, "im")?);
            }
        }
        rows.push((t, ExcitonDensityMatrix { rho }));
    }
    Ok(rows)
}

/// Plain numeric table with a header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn write_table_csv<W: Write>(w: W, table: &Table) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(&table.header).map_err(csv_err)?;
    for row in &table.rows {
        out.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_table_csv<R: Read>(r: R) -> Result<Table> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push(rec.iter().map(|s| parse_f64(s, line, "cell")).collect::<Result<Vec<_>>>()?);
    }
    Ok(Table { header, rows })
}

/// Render any CSV writer closure into a string.
pub fn to_csv_string(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

pub fn to_json_pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Fidelity-vs-time CSV of a gate run (model and, if present, measured).
pub fn gate_result_csv(r: &GateResult) -> Result<String> {
    let mut traces = vec![r.fidelity_vs_time.clone()];
    traces.extend(r.measured_fidelity.clone());
    traces_to_csv_string(&traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{build_noise, propagate, uniform_grid};
    use crate::photonics::encode_exciton;
    use crate::pulse::PulseProfile;
    use crate::state::QubitState;
    use crate::DeviceParams;

    #[test]
    fn trace_round_trip_with_invalid_bins() {
        let centers: Vec<f64> = (0..40).map(|i| i as f64 * 0.025).collect();
        let mut a = TimeTrace::from_centers("D", &centers, centers.iter().map(|t| (7.1 * t).sin().abs() / 3.0).collect(), 0.025).unwrap();
        a.valid[3] = false;
        a.values[3] = 0.0;
        let b = TimeTrace::from_centers("A, odd name", &centers, vec![1.0 / 7.0; 40], 0.025).unwrap();
        let text = traces_to_csv_string(&[a.clone(), b.clone()]).unwrap();
        assert!(text.starts_with("t_ns,channel_name,value\n"));
        let back = read_traces_csv(text.as_bytes(), TraceKind::Intensity).unwrap();
        assert_eq!(back.len(), 2);
        for (x, y) in back.iter().zip([&a, &b]) {
            assert_eq!(x.channel, y.channel);
            assert_eq!(x.values, y.values);
            assert_eq!(x.valid, y.valid);
            assert!(x.same_bins(y));
        }
    }

    #[test]
    fn trajectory_round_trip_is_exact() {
        let params = DeviceParams::default();
        let traj = propagate(
            &encode_exciton(&QubitState::from_angles(0.3, 0.7)).unwrap(),
            &PulseProfile::single(-175.0, -19.0, 0.5, 0.389),
            &params,
            &build_noise(&params).unwrap(),
            &uniform_grid(0.0, 1.0, 0.025),
        )
        .unwrap();
        let text = to_csv_string(|b| write_trajectory_csv(b, &traj)).unwrap();
        assert_eq!(text.lines().next().unwrap().split(',').count(), 19);
        let back = read_trajectory_csv(text.as_bytes()).unwrap();
        assert_eq!(back.len(), traj.len());
        for ((t, s), (t0, s0)) in back.iter().zip(traj.times.iter().zip(&traj.states)) {
            assert_eq!(t, t0);
            assert_eq!(s, s0);
        }
    }

    #[test]
    fn table_round_trip_and_errors() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1.5, -0.1]);
        t.push(vec![f64::INFINITY, 3.0e-17]);
        let text = to_csv_string(|b| write_table_csv(b, &t)).unwrap();
        assert_eq!(read_table_csv(text.as_bytes()).unwrap(), t);

        let bad = "t_ns,channel_name,value\n0,D,1\n0.025,D,x\n";
        match read_traces_csv(bad.as_bytes(), TraceKind::Intensity) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(read_traces_csv("t,c,v\n".as_bytes(), TraceKind::Intensity).is_err());
    }
}
