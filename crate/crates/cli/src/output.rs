//! Result tables and their CSV / JSON encodings.
//!
//! Floats are written with 17 significant digits so files round-trip
//! exactly, and every table has a fixed header.

use std::io::Write;

use critdelay::commensurate::CommensuratePoint;
use critdelay::free_delay::{CriticalPoint, InfiniteMode};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(x) => serde_json::Number::from_f64(*x)
                .map(Value::Number)
                .unwrap_or(Value::Null),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn write_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// One JSON object per row, keyed by the header.
    pub fn json_rows(&self) -> Vec<Value> {
        self.rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .header
                    .iter()
                    .cloned()
                    .zip(row.iter().map(Cell::json))
                    .collect();
                Value::Object(obj)
            })
            .collect()
    }
}

fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |k| format!("{prefix}_{k}"))
}

/// `phi_1..phi_{m-1}, z_re, z_im, omega, h_1..h_m, p_1..p_m, residual, gap`.
pub fn sweep_header(m: usize) -> Vec<String> {
    numbered("phi", m - 1)
        .chain(["z_re", "z_im", "omega"].map(String::from))
        .chain(numbered("h", m))
        .chain(numbered("p", m))
        .chain(["residual", "gap"].map(String::from))
        .collect()
}

pub fn sweep_table(m: usize, points: &[CriticalPoint]) -> Table {
    let mut t = Table::new(sweep_header(m));
    for p in points {
        let mut row: Vec<Cell> = p.phi.iter().map(|&x| Cell::Float(x)).collect();
        row.extend([
            Cell::Float(p.z.re),
            Cell::Float(p.z.im),
            Cell::Float(p.omega),
        ]);
        row.extend(p.delays.iter().map(|&h| Cell::Float(h)));
        row.extend(p.branches.iter().map(|&b| Cell::Int(b as i64)));
        row.extend([Cell::Float(p.residual), Cell::Float(p.gap)]);
        t.rows.push(row);
    }
    t
}

/// `h, z_re, z_im, omega, h_1..h_m, p, residual, gap`.
pub fn commensurate_table(m: usize, points: &[CommensuratePoint]) -> Table {
    let header = ["h", "z_re", "z_im", "omega"]
        .map(String::from)
        .into_iter()
        .chain(numbered("h", m))
        .chain(["p", "residual", "gap"].map(String::from))
        .collect();
    let mut t = Table::new(header);
    for p in points {
        let mut row = vec![
            Cell::Float(p.h),
            Cell::Float(p.z.re),
            Cell::Float(p.z.im),
            Cell::Float(p.omega),
        ];
        row.extend(p.delays.iter().map(|&h| Cell::Float(h)));
        row.extend([
            Cell::Int(p.p as i64),
            Cell::Float(p.residual),
            Cell::Float(p.gap),
        ]);
        t.rows.push(row);
    }
    t
}

/// One row per admissible branch of each `h_m`-independent mode; the last
/// delay is free and has no column.
pub fn infinite_table(m: usize, n: usize, modes: &[InfiniteMode]) -> Table {
    let header = numbered("phi", m - 1)
        .chain(std::iter::once("omega".to_string()))
        .chain((1..=n).flat_map(|k| [format!("v_re_{k}"), format!("v_im_{k}")]))
        .chain(std::iter::once("condition_residual".to_string()))
        .chain(numbered("h", m - 1))
        .chain(numbered("p", m - 1))
        .collect();
    let mut t = Table::new(header);
    for mode in modes {
        let mut base: Vec<Cell> = mode.phi.iter().map(|&x| Cell::Float(x)).collect();
        base.push(Cell::Float(mode.omega));
        for i in 0..mode.v.nrows() {
            base.extend([Cell::Float(mode.v[i].re), Cell::Float(mode.v[i].im)]);
        }
        base.push(Cell::Float(mode.condition_residual));
        if mode.delays.is_empty() {
            let mut row = base.clone();
            row.extend(std::iter::repeat_n(Cell::Empty, 2 * (m - 1)));
            t.rows.push(row);
        }
        for (hs, ps) in &mode.delays {
            let mut row = base.clone();
            row.extend(hs.iter().map(|&h| Cell::Float(h)));
            row.extend(ps.iter().map(|&p| Cell::Int(p as i64)));
            t.rows.push(row);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_header_layout() {
        assert_eq!(
            sweep_header(2),
            ["phi_1", "z_re", "z_im", "omega", "h_1", "h_2", "p_1", "p_2", "residual", "gap"]
        );
        assert_eq!(sweep_header(1)[0], "z_re");
    }

    #[test]
    fn floats_round_trip() {
        let x = std::f64::consts::PI / 7.0;
        let s = Cell::Float(x).csv();
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert_eq!(Cell::Float(f64::NAN).json(), Value::Null);
    }

    #[test]
    fn csv_and_json_agree() {
        let mut t = Table::new(vec!["a".into(), "b".into()]);
        t.rows.push(vec![Cell::Float(0.5), Cell::Int(-2)]);
        assert_eq!(t.to_csv_string(), "a,b\n5.0000000000000000e-1,-2\n");
        assert_eq!(t.json_rows()[0]["b"], Value::from(-2));
    }
}
