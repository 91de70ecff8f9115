use std::io::{Read, Write};

use super::{ParticleState, StatSeries};
use crate::error::{invalid, Error, Result};
use crate::measures::fmt_f64;

/// Writes `time,<label>,...` rows. All series must share one time grid.
pub fn write_series_csv<W: Write>(series: &[StatSeries], out: W) -> Result<()> {
    let Some(first) = series.first() else { return invalid("no series to export") };
    if series.iter().any(|s| s.times != first.times) {
        return invalid("series exported together must share their time grid");
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(std::iter::once("time").chain(series.iter().map(|s| s.label.as_str())))?;
    for (k, t) in first.times.iter().enumerate() {
        w.write_record(std::iter::once(fmt_f64(*t)).chain(series.iter().map(|s| fmt_f64(s.values[k]))))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series_csv<R: Read>(input: R) -> Result<Vec<StatSeries>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("time") || headers.len() < 2 {
        return invalid("series CSV must start with a time column followed by statistics");
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for rec in r.records() {
        let rec = rec?;
        for (c, f) in cols.iter_mut().zip(rec.iter()) {
            c.push(f.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad number '{f}'")))?);
        }
    }
    let times = cols[0].clone();
    headers.iter().zip(cols).skip(1).map(|(h, v)| StatSeries::new(h, times.clone(), v)).collect()
}

/// Writes `time,particle,x0,...` rows, one per particle.
pub fn write_snapshot_csv<W: Write>(states: &[ParticleState], out: W) -> Result<()> {
    let Some(first) = states.first() else { return invalid("no snapshots to export") };
    let d = first.dim();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time".to_string(), "particle".to_string()].into_iter().chain((0..d).map(|k| format!("x{k}"))))?;
    for s in states {
        if s.dim() != d {
            return Err(Error::DimensionMismatch("snapshots of different dimension".into()));
        }
        for i in 0..s.n() {
            w.write_record(
                [fmt_f64(s.time), i.to_string()].into_iter().chain(s.particle(i).iter().map(|v| fmt_f64(*v))),
            )?;
        }
    }
    w.flush()?;
    Ok(())
}
