//! Trajectory CSV: header `t,x1,…,xn[,dx1,…,dxn]`, one row per sample.
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! write followed by a read reproduces every number bit for bit.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::trajectory::{Trajectory, TrajectoryMeta};

fn header(n: usize, with_derivatives: bool) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    if with_derivatives {
        h.extend((1..=n).map(|i| format!("dx{i}")));
    }
    h
}

pub fn write_trajectory<W: Write>(mut w: W, traj: &Trajectory) -> std::io::Result<()> {
    let n = traj.n_states();
    writeln!(w, "{}", header(n, traj.derivatives.is_some()).join(","))?;
    let mut line = String::new();
    for i in 0..traj.len() {
        line.clear();
        line.push_str(&traj.times[i].to_string());
        for j in 0..n {
            line.push(',');
            line.push_str(&traj.states[(i, j)].to_string());
        }
        if let Some(d) = &traj.derivatives {
            for j in 0..n {
                line.push(',');
                line.push_str(&d[(i, j)].to_string());
            }
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trajectory(BufWriter::new(file), traj).map_err(|e| Error::io(path, e))
}

/// Parses a trajectory; `source` only labels error messages.
pub fn read_trajectory<R: Read>(r: R, source: &Path) -> Result<Trajectory> {
    let parse_err = |line: u64, message: String| Error::Parse { file: source.to_path_buf(), line, message };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if columns.iter().all(|c| c.is_empty()) {
        return Err(parse_err(1, "missing header".into()));
    }
    let width = columns.len();
    let (n, with_d) = match width.checked_sub(1) {
        Some(k) if k >= 1 && columns == header(k, false) => (k, false),
        Some(k) if k >= 2 && k % 2 == 0 && columns == header(k / 2, true) => (k / 2, true),
        _ => {
            return Err(parse_err(
                1,
                format!("expected header `t,x1,…,xn[,dx1,…,dxn]`, got `{}`", columns.join(",")),
            ))
        }
    };

    let mut times = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(parse_err(line, format!("expected {width} fields, found {}", record.len())));
        }
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("column `{}`: `{field}` is not a number", columns[k])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column `{}` is not finite", columns[k])));
            }
            if k == 0 {
                if times.last().is_some_and(|&prev| v <= prev) {
                    return Err(parse_err(line, "times must be strictly increasing".into()));
                }
                times.push(v);
            } else {
                values.push(v);
            }
        }
    }
    if times.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    let m = times.len();
    let stride = width - 1;
    let states = DMatrix::from_fn(m, n, |i, j| values[i * stride + j]);
    let step = if m >= 2 { times[1] - times[0] } else { 0.0 };
    let meta = TrajectoryMeta { game: String::new(), seed: None, step, noise_sigma: 0.0, blocks: Vec::new() };
    let mut traj = Trajectory::new(times, states, meta)?;
    if with_d {
        traj.derivatives = Some(DMatrix::from_fn(m, n, |i, j| values[i * stride + n + j]));
    }
    Ok(traj)
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_trajectory(std::io::BufReader::new(file), path)
}
