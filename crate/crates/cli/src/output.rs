//! CSV reports with a metadata comment block, and PGM images.

use std::fmt::Write as _;
use std::path::Path;

use addernet::Error;

/// A CSV table. The file starts with `# key=value` lines (tool version,
/// command, seed and every resolved setting), then the header row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvReport {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvReport {
    pub fn new(meta: &[(String, String)], header: &[&str]) -> Self {
        CsvReport {
            meta: meta.to_vec(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

/// Binary PGM (P5), one byte per pixel, row 0 of `labels` first (top).
/// Class `c` of `classes` gets gray level `255 c / (classes − 1)`.
///
/// Header: `P5\n<width> <height>\n255\n`.
pub fn pgm_bytes(labels: &[Vec<usize>], classes: usize) -> Result<Vec<u8>, Error> {
    let h = labels.len();
    let w = labels.first().map_or(0, Vec::len);
    if h == 0 || w == 0 {
        return Err(Error::InvalidArgument("cannot render an empty grid".into()));
    }
    if labels.iter().any(|r| r.len() != w) {
        return Err(Error::InvalidArgument("grid rows differ in length".into()));
    }
    if classes < 2 {
        return Err(Error::InvalidArgument("need at least two classes".into()));
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    for row in labels {
        for &c in row {
            if c >= classes {
                return Err(Error::LabelOutOfRange { label: c, classes });
            }
            out.push((255 * c / (classes - 1)) as u8);
        }
    }
    Ok(out)
}

pub fn render_boundary(labels: &[Vec<usize>], classes: usize, path: &Path) -> Result<(), Error> {
    std::fs::write(path, pgm_bytes(labels, classes)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checker() {
        let b = pgm_bytes(&[vec![0, 1], vec![1, 0]], 2).unwrap();
        assert_eq!(b, b"P5\n2 2\n255\n\x00\xff\xff\x00".to_vec());
    }

    #[test]
    fn uniform_and_errors() {
        let b = pgm_bytes(&vec![vec![1; 3]; 2], 2).unwrap();
        assert!(b.ends_with(&[255; 6]));
        assert!(pgm_bytes(&[], 2).is_err());
        assert!(pgm_bytes(&[vec![0], vec![0, 1]], 2).is_err());
        assert!(pgm_bytes(&[vec![2]], 2).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut c = CsvReport::new(&[("seed".into(), "3".into())], &["a", "b"]);
        c.push(vec![num(0.5), opt_num(None)]);
        assert_eq!(c.render(), "# seed=3\na,b\n0.5,\n");
    }
}
