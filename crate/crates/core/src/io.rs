//! File formats: samples CSV, single-column value CSVs and elevation grids.
//!
//! Floats are written with 17 significant digits so that files round-trip
//! bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid_graph::GridSpec;

/// Formats a float with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Contents of a samples file: `index,x1[,x2,…],y[,clean_f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    /// Row-major `n × d` coordinates.
    pub coords: Vec<f64>,
    pub d: usize,
    pub y: Vec<f64>,
    pub clean: Option<Vec<f64>>,
}

impl SampleTable {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Grid matching the sample count: `m = n^{1/d}`.
    pub fn grid(&self, k: usize) -> Result<GridSpec> {
        let n = self.n();
        let m = (n as f64).powf(1.0 / self.d as f64).round() as usize;
        let spec = GridSpec::new(self.d, m, k)?;
        if spec.n() != n {
            return Err(Error::InvalidSpec(format!("{n} samples do not form a {}-dimensional square grid", self.d)));
        }
        Ok(spec)
    }
}

fn parse_float(s: &str, line: usize, column: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse { line, message: format!("column '{column}': cannot parse '{s}': {e}") })
}

fn check_index(s: &str, expected: usize, line: usize) -> Result<()> {
    match s.trim().parse::<usize>() {
        Ok(i) if i == expected => Ok(()),
        Ok(i) => Err(Error::Parse { line, message: format!("index {i} out of sequence (expected {expected})") }),
        Err(e) => Err(Error::Parse { line, message: format!("bad index '{s}': {e}") }),
    }
}

fn record_line(r: &csv::StringRecord, fallback: usize) -> usize {
    r.position().map(|p| p.line() as usize).unwrap_or(fallback)
}

fn csv_error_line(e: &csv::Error) -> usize {
    e.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn into_parse(e: csv::Error) -> Error {
    Error::Parse { line: csv_error_line(&e), message: e.to_string() }
}

pub fn write_samples<W: Write>(out: W, table: &SampleTable, include_clean: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string()];
    header.extend((1..=table.d).map(|a| format!("x{a}")));
    header.push("y".into());
    let clean = if include_clean { table.clean.as_ref() } else { None };
    if clean.is_some() {
        header.push("clean_f".into());
    }
    w.write_record(&header)?;
    for i in 0..table.n() {
        let mut row = vec![i.to_string()];
        row.extend(table.coords[i * table.d..(i + 1) * table.d].iter().map(|&c| fmt_float(c)));
        row.push(fmt_float(table.y[i]));
        if let Some(c) = clean {
            row.push(fmt_float(c[i]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples<R: Read>(input: R) -> Result<SampleTable> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers().map_err(into_parse)?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.first() != Some(&"index") {
        return Err(Error::Parse { line: 1, message: "first column must be 'index'".into() });
    }
    let y_col = names
        .iter()
        .position(|&c| c == "y")
        .ok_or_else(|| Error::Parse { line: 1, message: "missing 'y' column".into() })?;
    let d = y_col - 1;
    if d == 0 || (1..=d).any(|a| names[a] != format!("x{a}")) {
        return Err(Error::Parse { line: 1, message: "expected coordinate columns x1..xd before 'y'".into() });
    }
    let has_clean = match &names[y_col + 1..] {
        [] => false,
        ["clean_f"] => true,
        other => return Err(Error::Parse { line: 1, message: format!("unexpected columns {other:?}") }),
    };

    let mut table = SampleTable { coords: Vec::new(), d, y: Vec::new(), clean: has_clean.then(Vec::new) };
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(into_parse)?;
        let line = record_line(&rec, i + 2);
        check_index(&rec[0], i, line)?;
        for a in 1..=d {
            table.coords.push(parse_float(&rec[a], line, names[a])?);
        }
        table.y.push(parse_float(&rec[y_col], line, "y")?);
        if let Some(c) = table.clean.as_mut() {
            c.push(parse_float(&rec[y_col + 1], line, "clean_f")?);
        }
    }
    Ok(table)
}

/// Writes `index,<name>` rows.
pub fn write_values<W: Write>(out: W, name: &str, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", name])?;
    for (i, &v) in values.iter().enumerate() {
        w.write_record([i.to_string(), fmt_float(v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `index,<name>` file; returns the column name and values.
pub fn read_values<R: Read>(input: R) -> Result<(String, Vec<f64>)> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers().map_err(into_parse)?.clone();
    if header.len() != 2 || &header[0] != "index" {
        return Err(Error::Parse { line: 1, message: "expected header 'index,<value>'".into() });
    }
    let name = header[1].to_string();
    let mut values = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(into_parse)?;
        let line = record_line(&rec, i + 2);
        check_index(&rec[0], i, line)?;
        values.push(parse_float(&rec[1], line, &name)?);
    }
    Ok((name, values))
}

/// Reads a grid file: first line `rows cols`, then `rows·cols`
/// whitespace-separated values in row-major order.
pub fn read_grid<R: Read>(input: R) -> Result<(usize, usize, Vec<f64>)> {
    let mut lines = BufReader::new(input).lines().enumerate();
    let (rows, cols) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(Error::Parse { line: 1, message: "empty grid file".into() });
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let dims: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Parse { line: i + 1, message: format!("bad dimension '{s}': {e}") })
        };
        match dims.as_slice() {
            [r, c] => break (parse(r)?, parse(c)?),
            _ => return Err(Error::Parse { line: i + 1, message: "expected 'rows cols'".into() }),
        }
    };
    let expected = rows * cols;
    let mut values = Vec::with_capacity(expected);
    for (i, line) in lines {
        for tok in line?.split_whitespace() {
            if values.len() == expected {
                return Err(Error::Parse { line: i + 1, message: format!("more than {expected} values") });
            }
            values.push(parse_float(tok, i + 1, "elevation")?);
        }
    }
    if values.len() != expected {
        return Err(Error::Parse { line: 0, message: format!("expected {expected} values, found {}", values.len()) });
    }
    Ok((rows, cols, values))
}

pub fn read_grid_file(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    read_grid(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_round_trip() {
        let t = SampleTable {
            coords: vec![0.0, 0.5, 1.0],
            d: 1,
            y: vec![0.1, 0.2 + 1e-17, 1.0 / 3.0],
            clean: Some(vec![-1.9, 2.2, 0.1]),
        };
        let mut buf = Vec::new();
        write_samples(&mut buf, &t, true).unwrap();
        assert_eq!(read_samples(buf.as_slice()).unwrap(), t);

        let mut blind = Vec::new();
        write_samples(&mut blind, &t, false).unwrap();
        assert!(read_samples(blind.as_slice()).unwrap().clean.is_none());
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "index,x1,y\n0,0.0,0.1\n1,0.5,abc\n";
        match read_samples(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_dimensional_grid_inferred() {
        let text = "index,x1,x2,y\n0,0,0,0.1\n1,0,1,0.2\n2,1,0,0.3\n3,1,1,0.4\n";
        let t = read_samples(text.as_bytes()).unwrap();
        assert_eq!(t.d, 2);
        assert_eq!(t.grid(1).unwrap().m(), 2);
    }

    #[test]
    fn values_round_trip() {
        let mut buf = Vec::new();
        write_values(&mut buf, "r_hat", &[0.25, 0.75]).unwrap();
        let (name, v) = read_values(buf.as_slice()).unwrap();
        assert_eq!(name, "r_hat");
        assert_eq!(v, vec![0.25, 0.75]);
    }

    #[test]
    fn grid_reader() {
        let (r, c, v) = read_grid("2 3\n1 2 3\n4 5 6\n".as_bytes()).unwrap();
        assert_eq!((r, c), (2, 3));
        assert_eq!(v, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(read_grid("2 2\n1 2 3\n".as_bytes()).is_err());
        assert!(matches!(read_grid("2 2\n1 x\n3 4\n".as_bytes()), Err(Error::Parse { line: 2, .. })));
    }
}
