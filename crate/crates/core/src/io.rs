//! Plain-text complex matrices.
//!
//! The first line holds `rows cols`; each of the following `rows` lines holds
//! `cols` whitespace-separated `re im` pairs. Blank lines and lines starting
//! with `#` are skipped.

use std::fs;
use std::path::{Path, PathBuf};

use crate::doa::SampledManifold;
use crate::{CMatrix, Error, Result, C64};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_header<const N: usize>(path: &Path, line: Option<(usize, &str)>) -> Result<[usize; N]> {
    let (no, text) = line.ok_or_else(|| parse_err(path, 1, "missing header"))?;
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != N {
        return Err(parse_err(path, no, format!("header needs {N} integers, found {}", fields.len())));
    }
    let mut out = [0; N];
    for (slot, f) in out.iter_mut().zip(&fields) {
        *slot = f
            .parse()
            .map_err(|_| parse_err(path, no, format!("`{f}` is not a size")))?;
    }
    Ok(out)
}

fn parse_row(path: &Path, no: usize, text: &str, cols: usize) -> Result<Vec<C64>> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != 2 * cols {
        return Err(parse_err(
            path,
            no,
            format!("expected {} numbers, found {}", 2 * cols, fields.len()),
        ));
    }
    let mut vals = Vec::with_capacity(cols);
    for (c, pair) in fields.chunks(2).enumerate() {
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| parse_err(path, no, format!("column {}: `{s}` is not a number", c + 1)))
        };
        vals.push(C64::new(num(pair[0])?, num(pair[1])?));
    }
    Ok(vals)
}

/// Parse matrix text; `path` only labels errors.
pub fn parse_matrix(text: &str, path: &Path) -> Result<CMatrix> {
    let mut lines = content_lines(text);
    let [rows, cols] = parse_header::<2>(path, lines.next())?;
    let mut m = CMatrix::zeros(rows, cols);
    for r in 0..rows {
        let (no, line) = lines
            .next()
            .ok_or_else(|| parse_err(path, text.lines().count(), format!("expected {rows} rows, found {r}")))?;
        for (c, v) in parse_row(path, no, line, cols)?.into_iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    if let Some((no, _)) = lines.next() {
        return Err(parse_err(path, no, format!("more than {rows} rows")));
    }
    Ok(m)
}

pub fn format_matrix(m: &CMatrix) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|c| format!("{} {}", m[(r, c)].re, m[(r, c)].im))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<CMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text, path)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &CMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix(m)).map_err(|e| Error::io(path, e))
}

/// Measured manifold: header `antennas Q1 Q2`, then one line per antenna with
/// `Q1 * Q2` `re im` pairs ordered by azimuth index, then elevation index.
pub fn read_manifold(path: impl AsRef<Path>) -> Result<SampledManifold> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut lines = content_lines(&text);
    let [ant, q1, q2] = parse_header::<3>(&path, lines.next())?;
    let mut samples = CMatrix::zeros(ant, q1 * q2);
    for a in 0..ant {
        let (no, line) = lines
            .next()
            .ok_or_else(|| parse_err(&path, text.lines().count(), format!("expected {ant} antennas, found {a}")))?;
        for (c, v) in parse_row(&path, no, line, q1 * q2)?.into_iter().enumerate() {
            samples[(a, c)] = v;
        }
    }
    SampledManifold::new([q1, q2], samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_complex_matrix, substream, Stream};

    #[test]
    fn round_trip_is_exact() {
        let m = standard_complex_matrix(&mut substream(1, 0, 0, Stream::Noise), 4, 3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        write_matrix(&p, &m).unwrap();
        assert_eq!(read_matrix(&p).unwrap(), m);
    }

    #[test]
    fn example_text() {
        let m = parse_matrix("2 1\n1 0\n# comment\n\n0.5 -2\n", Path::new("x")).unwrap();
        assert_eq!(m[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(m[(1, 0)], C64::new(0.5, -2.0));
    }

    #[test]
    fn errors_carry_position() {
        let err = parse_matrix("2 2\n1 0 0 0\n1 0 x 0\n", Path::new("y.txt")).unwrap_err();
        match err {
            Error::Parse { line, path, .. } => {
                assert_eq!(line, 3);
                assert_eq!(path, Path::new("y.txt"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_matrix("2 2\n1 0 0 0\n", Path::new("z")), Err(Error::Parse { .. })));
        assert!(matches!(parse_matrix("2\n", Path::new("z")), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_matrix("/nonexistent/file"), Err(Error::Io { .. })));
    }

    #[test]
    fn manifold_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("man.txt");
        std::fs::write(&p, "1 2 2\n1 0 0 1 -1 0 0 -1\n").unwrap();
        let man = read_manifold(&p).unwrap();
        assert_eq!(man.grid(), [2, 2]);
        assert_eq!(man.samples()[(0, 1)], C64::new(0.0, 1.0));
    }
}
