//! Matrix Market coordinate format (`real general` / `integer general`).
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! matrix read back from its own output is bit-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

pub fn write<W: Write>(m: &SparseMatrix, mut w: W) -> Result<()> {
    let field = if m.is_integer() { "integer" } else { "real" };
    writeln!(w, "%%MatrixMarket matrix coordinate {field} general")?;
    writeln!(w, "{} {} {}", m.rows(), m.cols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        if field == "integer" {
            writeln!(w, "{} {} {}", i + 1, j + 1, v as i64)?;
        } else {
            writeln!(w, "{} {} {}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

pub fn to_string(m: &SparseMatrix) -> String {
    let mut buf = Vec::new();
    write(m, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("ascii output")
}

pub fn write_file(m: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write(m, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Reads a coordinate matrix. Negative values flag the result as signed.
pub fn read<R: Read>(r: R) -> Result<SparseMatrix> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines.next().ok_or(Error::MatrixMarket { line: 1, msg: "empty input".into() })?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::MatrixMarket { line: 1, msg: format!("bad banner: {header}") });
    }
    if tokens[2] != "coordinate" {
        return Err(Error::MatrixMarket { line: 1, msg: "only coordinate format is supported".into() });
    }
    let pattern = match tokens[3].as_str() {
        "real" | "integer" => false,
        "pattern" => true,
        other => return Err(Error::MatrixMarket { line: 1, msg: format!("unsupported field {other}") }),
    };
    if tokens[4] != "general" {
        return Err(Error::MatrixMarket { line: 1, msg: "only general symmetry is supported".into() });
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut trip = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        let bad = |msg: &str| Error::MatrixMarket { line: lineno, msg: msg.to_string() };
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(bad("expected `rows cols nnz`"));
                }
                let p: Vec<usize> =
                    parts.iter().map(|s| s.parse().map_err(|_| bad("bad size line"))).collect::<Result<_>>()?;
                size = Some((p[0], p[1], p[2]));
                trip.reserve(p[2]);
            }
            Some((rows, cols, _)) => {
                let want = if pattern { 2 } else { 3 };
                if parts.len() != want {
                    return Err(bad("wrong number of fields in entry"));
                }
                let i: usize = parts[0].parse().map_err(|_| bad("bad row index"))?;
                let j: usize = parts[1].parse().map_err(|_| bad("bad column index"))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(bad("index out of range"));
                }
                let v: f64 = if pattern { 1.0 } else { parts[2].parse().map_err(|_| bad("bad value"))? };
                trip.push((i - 1, j - 1, v));
            }
        }
    }
    let (rows, cols, nnz) = size.ok_or(Error::MatrixMarket { line: 0, msg: "missing size line".into() })?;
    if trip.len() != nnz {
        return Err(Error::MatrixMarket { line: 0, msg: format!("declared {nnz} entries, found {}", trip.len()) });
    }
    let signed = trip.iter().any(|t| t.2 < 0.0);
    SparseMatrix::from_triplets(rows, cols, trip, signed)
}

pub fn read_file(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    read(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_pattern_and_comments() {
        let src = "%%MatrixMarket matrix coordinate pattern general\n% comment\n2 3 2\n1 1\n2 3\n";
        let m = read(src.as_bytes()).unwrap();
        assert_eq!((m.rows(), m.cols(), m.nnz()), (2, 3, 2));
        assert_eq!(m.get(1, 2), 1.0);
    }

    #[test]
    fn rejects_bad_counts_and_banner() {
        assert!(read("%%MatrixMarket matrix array real general\n1 1\n1\n".as_bytes()).is_err());
        assert!(read("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n".as_bytes()).is_err());
        assert!(read("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n".as_bytes()).is_err());
    }

    #[test]
    fn float_values_round_trip_exactly() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 0.1 + 0.2), (1, 0, 1.0 / 3.0)], false).unwrap();
        let back = read(to_string(&m).as_bytes()).unwrap();
        assert_eq!(m, back);
    }
}
