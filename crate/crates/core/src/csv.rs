//! Plain CSV tables with `#` metadata lines, LF endings and 17 significant
//! digits per value.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::estimators::DriftEstimate;
use crate::grid::TimeGrid;
use crate::process::Path;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `# key = value` lines.
pub fn write_metadata<W: Write>(out: &mut W, metadata: &[(String, String)]) -> Result<()> {
    for (k, v) in metadata {
        writeln!(out, "# {k} = {v}")?;
    }
    Ok(())
}

/// Writes a header and numeric columns of equal length.
pub fn write_columns<W: Write>(
    out: &mut W,
    metadata: &[(String, String)],
    header: &[&str],
    columns: &[&[f64]],
) -> Result<()> {
    write_metadata(out, metadata)?;
    writeln!(out, "{}", header.join(","))?;
    let rows = columns.first().map_or(0, |c| c.len());
    for i in 0..rows {
        let line: Vec<String> = columns.iter().map(|c| fmt_f64(c[i])).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Reads a numeric table, skipping `#` lines; returns the header and columns.
pub fn read_columns<R: BufRead>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut header: Option<Vec<String>> = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        match &header {
            None => {
                columns = vec![Vec::new(); fields.len()];
                header = Some(fields.iter().map(|s| s.to_string()).collect());
            }
            Some(h) => {
                if fields.len() != h.len() {
                    return Err(Error::Parse {
                        line: idx + 1,
                        reason: format!("expected {} fields, found {}", h.len(), fields.len()),
                    });
                }
                for (col, f) in columns.iter_mut().zip(&fields) {
                    col.push(f.parse().map_err(|e| Error::Parse {
                        line: idx + 1,
                        reason: format!("`{f}`: {e}"),
                    })?);
                }
            }
        }
    }
    let header = header.ok_or(Error::Parse {
        line: 0,
        reason: "missing header".into(),
    })?;
    Ok((header, columns))
}

fn expect_header(found: &[String], expected: &[&str]) -> Result<()> {
    if found.iter().map(String::as_str).eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(Error::Parse {
            line: 0,
            reason: format!("expected header {}, found {}", expected.join(","), found.join(",")),
        })
    }
}

fn grid_from_times(times: &[f64]) -> Result<TimeGrid> {
    if times.len() < 3 {
        return Err(Error::Parse {
            line: 0,
            reason: "need at least 3 grid points".into(),
        });
    }
    let grid = TimeGrid::new(*times.last().expect("nonempty"), times.len() - 1)?;
    for (i, t) in times.iter().enumerate() {
        if (t - grid.t(i)).abs() > 1e-12 * grid.horizon() {
            return Err(Error::GridMismatch(format!("time {t} at row {i} is not on a uniform grid")));
        }
    }
    Ok(grid)
}

impl Path {
    pub const CSV_HEADER: [&'static str; 2] = ["t", "x"];

    pub fn write_csv<W: Write>(&self, out: &mut W, metadata: &[(String, String)]) -> Result<()> {
        let times: Vec<f64> = self.grid().points().collect();
        write_columns(out, metadata, &Self::CSV_HEADER, &[&times, self.values()])
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let (header, cols) = read_columns(input)?;
        expect_header(&header, &Self::CSV_HEADER)?;
        let grid = grid_from_times(&cols[0])?;
        Path::new(grid, cols[1].clone())
    }
}

impl DriftEstimate {
    pub const CSV_HEADER: [&'static str; 2] = ["t", "u_hat"];

    pub fn write_csv<W: Write>(&self, out: &mut W, metadata: &[(String, String)]) -> Result<()> {
        let times: Vec<f64> = self.grid.points().collect();
        write_columns(out, metadata, &Self::CSV_HEADER, &[&times, &self.values])
    }

    /// Reads the `t,u_hat` columns back as `(grid, values)`.
    pub fn read_csv<R: BufRead>(input: R) -> Result<(TimeGrid, Vec<f64>)> {
        let (header, cols) = read_columns(input)?;
        expect_header(&header, &Self::CSV_HEADER)?;
        Ok((grid_from_times(&cols[0])?, cols[1].clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn path_csv_layout() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let p = Path::new(grid, vec![0.0, 0.1, -0.2, 0.3, 1.0 / 3.0]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf, &[("seed".into(), "7".into())]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.split('\n').collect();
        assert_eq!(lines[0], "# seed = 7");
        assert_eq!(lines[1], "t,x");
        assert_eq!(lines[6], "1.0000000000000000e0,3.3333333333333331e-1");
        assert!(!text.contains('\r'));
    }

    #[test]
    fn rejects_malformed_tables() {
        assert!(Path::read_csv("t,y\n0,0\n0.5,1\n1,2\n".as_bytes()).is_err());
        assert!(Path::read_csv("t,x\n0,0\n0.5\n1,2\n".as_bytes()).is_err());
        assert!(Path::read_csv("t,x\n0,0\n0.7,1\n1,2\n".as_bytes()).is_err());
        assert!(Path::read_csv("t,x\n0,1\n0.5,1\n1,2\n".as_bytes()).is_err());
        assert!(Path::read_csv("".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn path_roundtrip_is_bit_exact(
            tail in proptest::collection::vec(-1e6f64..1e6, 2..40),
            horizon in 0.01f64..100.0,
        ) {
            let grid = TimeGrid::new(horizon, tail.len()).unwrap();
            let mut values = vec![0.0];
            values.extend(&tail);
            let p = Path::new(grid, values).unwrap();
            let mut buf = Vec::new();
            p.write_csv(&mut buf, &[]).unwrap();
            let back = Path::read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.values(), p.values());
            prop_assert_eq!(back.grid().intervals(), grid.intervals());
        }
    }
}
