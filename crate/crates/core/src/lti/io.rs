//! Trajectory CSV format.
//!
//! One row per time `t = 0..T` with columns
//! `t, x_0..x_{n-1}, u_0..u_{m-1}, d_0..d_{n-1}, attacked`. The last row
//! (`t = T`) carries only the state; its other cells are empty. Floats are
//! written with the shortest representation that parses back exactly.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::schedule::AttackSchedule;
use super::simulate::Trajectory;
use crate::error::{Result, SysidError};

pub fn trajectory_header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((0..n).map(|i| format!("x_{i}")));
    h.extend((0..m).map(|i| format!("u_{i}")));
    h.extend((0..n).map(|i| format!("d_{i}")));
    h.push("attacked".into());
    h
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let (n, m, t) = (traj.n(), traj.m(), traj.horizon());
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| SysidError::parse("trajectory csv", e);
    w.write_record(trajectory_header(n, m)).map_err(to_err)?;
    let mask = traj.schedule().mask();
    for i in 0..=t {
        let mut row = Vec::with_capacity(2 + 2 * n + m);
        row.push(i.to_string());
        row.extend(traj.states().column(i).iter().map(|v| format!("{v}")));
        if i < t {
            row.extend(traj.inputs().column(i).iter().map(|v| format!("{v}")));
            row.extend(traj.disturbances().column(i).iter().map(|v| format!("{v}")));
            row.push(if mask[i] { "1" } else { "0" }.into());
        } else {
            row.extend(std::iter::repeat_n(String::new(), m + n + 1));
        }
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| SysidError::parse("trajectory csv", e))?;
    Ok(())
}

pub fn read_trajectory<R: Read>(input: R) -> Result<Trajectory> {
    let ctx = "trajectory csv";
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| SysidError::parse(ctx, e))?.clone();
    let n = header.iter().filter(|h| h.starts_with("x_")).count();
    let m = header.iter().filter(|h| h.starts_with("u_")).count();
    let nd = header.iter().filter(|h| h.starts_with("d_")).count();
    if n == 0 || nd != n || header.len() != 2 + 2 * n + m || header.get(0) != Some("t") {
        return Err(SysidError::parse(ctx, "unexpected header"));
    }
    if header.iter().ne(trajectory_header(n, m).iter().map(String::as_str)) {
        return Err(SysidError::parse(ctx, "columns out of order"));
    }

    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(|e| SysidError::parse(ctx, e))?);
    }
    if rows.len() < 2 {
        return Err(SysidError::parse(ctx, "need at least two rows"));
    }
    let t = rows.len() - 1;
    let num = |s: &str, line: usize| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| SysidError::parse(ctx, format!("row {line}: {e}")))
    };
    let mut states = DMatrix::zeros(n, t + 1);
    let mut inputs = DMatrix::zeros(m, t);
    let mut dist = DMatrix::zeros(n, t);
    let mut times = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if row.get(0).map(str::trim) != Some(i.to_string().as_str()) {
            return Err(SysidError::parse(ctx, format!("row {i}: time index out of sequence")));
        }
        for k in 0..n {
            states[(k, i)] = num(&row[1 + k], i)?;
        }
        if i == t {
            break;
        }
        for k in 0..m {
            inputs[(k, i)] = num(&row[1 + n + k], i)?;
        }
        for k in 0..n {
            dist[(k, i)] = num(&row[1 + n + m + k], i)?;
        }
        match row[1 + 2 * n + m].trim() {
            "1" => times.push(i),
            "0" => {}
            other => {
                return Err(SysidError::parse(ctx, format!("row {i}: bad attacked flag {other:?}")))
            }
        }
    }
    let schedule = AttackSchedule::new(t, times)?;
    Trajectory::from_parts(states, inputs, dist, schedule, 0)
}

pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| SysidError::io(path, e))?;
    write_trajectory(traj, std::io::BufWriter::new(file))
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let file = std::fs::File::open(path).map_err(|e| SysidError::io(path, e))?;
    read_trajectory(std::io::BufReader::new(file))
}
