use std::io::{Read, Write};

use super::{EmpiricalMeasure, GridMeasure1D, GridSpec};
use crate::error::{invalid, Result};

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes one row per atom with columns `x0, x1, ...`.
pub fn write_empirical_csv<W: Write>(m: &EmpiricalMeasure, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((0..m.dim()).map(|k| format!("x{k}")))?;
    for i in 0..m.len() {
        w.write_record(m.point(i).iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_empirical_csv<R: Read>(input: R) -> Result<EmpiricalMeasure> {
    let mut r = csv::Reader::from_reader(input);
    let dim = r.headers()?.len();
    let mut pts = Vec::new();
    for rec in r.records() {
        for field in rec?.iter() {
            pts.push(parse(field)?);
        }
    }
    EmpiricalMeasure::new(dim, pts)
}

/// Writes `x,density` rows, one per node.
pub fn write_grid_csv<W: Write>(m: &GridMeasure1D, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "density"])?;
    for (x, d) in m.grid().points().iter().zip(m.density()) {
        w.write_record([fmt_f64(*x), fmt_f64(*d)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_csv<R: Read>(input: R) -> Result<GridMeasure1D> {
    let mut r = csv::Reader::from_reader(input);
    let mut xs = Vec::new();
    let mut ds = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return invalid("grid CSV rows need exactly two fields");
        }
        xs.push(parse(&rec[0])?);
        ds.push(parse(&rec[1])?);
    }
    if xs.len() < 2 {
        return invalid("grid CSV needs at least two nodes");
    }
    let grid = GridSpec::new(xs[0], xs[xs.len() - 1], xs.len())?;
    GridMeasure1D::new(grid, ds)
}

fn parse(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .or_else(|_| invalid(format!("not a number: {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn empirical_round_trip(pts in prop::collection::vec(-1e6f64..1e6, 2..40)) {
            let m = EmpiricalMeasure::new(2, pts[..pts.len() / 2 * 2].to_vec()).unwrap();
            let mut buf = Vec::new();
            write_empirical_csv(&m, &mut buf).unwrap();
            let back = read_empirical_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back, m);
        }
    }

    #[test]
    fn grid_round_trip_is_byte_stable() {
        let g = GridMeasure1D::gaussian(GridSpec::new(-5.0, 5.0, 101).unwrap(), 0.2, 0.7).unwrap();
        let mut a = Vec::new();
        write_grid_csv(&g, &mut a).unwrap();
        let back = read_grid_csv(a.as_slice()).unwrap();
        assert_eq!(back.density(), g.density());
        let mut b = Vec::new();
        write_grid_csv(&back, &mut b).unwrap();
        assert_eq!(a, b);
    }
}
