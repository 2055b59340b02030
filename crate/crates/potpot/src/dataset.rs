//! Labeled point clouds and their CSV representation.
//!
//! File layout: one row per point, coordinates first, the class label
//! (an integer in 1..q) in the last column. An optional header row is
//! detected by a non-numeric first field.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// n points in ℝᵈ with class labels in {1..q}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledDataset {
    points: Vec<DVector<f64>>,
    labels: Vec<usize>,
    q: usize,
}

impl LabeledDataset {
    /// Validates: labels contiguous from 1, every class nonempty, finite
    /// coordinates, consistent dimension.
    pub fn new(points: Vec<DVector<f64>>, labels: Vec<usize>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidDataset("no points".into()));
        }
        if points.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::InvalidDataset("zero-dimensional points".into()));
        }
        for p in &points {
            if p.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: p.len() });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset("non-finite coordinate".into()));
            }
        }
        let q = *labels.iter().max().unwrap();
        let mut counts = vec![0usize; q + 1];
        for &l in &labels {
            if l == 0 {
                return Err(Error::InvalidDataset("labels must start at 1".into()));
            }
            counts[l] += 1;
        }
        if counts[1..].iter().any(|&c| c == 0) {
            return Err(Error::InvalidDataset("labels not contiguous from 1".into()));
        }
        Ok(LabeledDataset { points, labels, q })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn point(&self, i: usize) -> &DVector<f64> {
        &self.points[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Number of points per class, indexed 1..=q at positions 0..q.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.q];
        for &l in &self.labels {
            counts[l - 1] += 1;
        }
        counts
    }

    /// Empirical priors p_j = n_j / n.
    pub fn priors(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.class_counts().iter().map(|&c| c as f64 / n).collect()
    }

    /// Indices of the points of class j (1-based).
    pub fn class_indices(&self, j: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.labels[i] == j).collect()
    }

    /// Points of class j (1-based), cloned.
    pub fn class_points(&self, j: usize) -> Vec<DVector<f64>> {
        self.class_indices(j).iter().map(|&i| self.points[i].clone()).collect()
    }

    /// Subset by point indices; labels are kept as-is and re-validated.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        LabeledDataset::new(points, labels)
    }

    /// Binary restriction to classes (a, b), relabeled 1 and 2.
    pub fn restrict_pair(&self, a: usize, b: usize) -> Result<Self> {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for i in 0..self.n() {
            if self.labels[i] == a {
                points.push(self.points[i].clone());
                labels.push(1);
            } else if self.labels[i] == b {
                points.push(self.points[i].clone());
                labels.push(2);
            }
        }
        LabeledDataset::new(points, labels)
    }

    /// One-vs-all relabeling: class j becomes 1, everything else 2.
    pub fn relabel_one_vs_rest(&self, j: usize) -> Result<Self> {
        let labels = self.labels.iter().map(|&l| if l == j { 1 } else { 2 }).collect();
        LabeledDataset::new(self.points.clone(), labels)
    }
}

/// Loads a dataset from a CSV file: coordinates then an integer label per row.
pub fn load_csv(path: &Path) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<LabeledDataset> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|f| f.trim().trim_matches('"')).collect();
        if idx == 0 && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            // header row
            continue;
        }
        if fields.len() < 2 {
            return Err(Error::CsvParse {
                line: lineno,
                msg: "need at least one coordinate and a label".into(),
            });
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::CsvParse {
                    line: lineno,
                    msg: format!("ragged row: {} fields, expected {}", fields.len(), w),
                })
            }
            _ => {}
        }
        let d = fields.len() - 1;
        let mut coords = Vec::with_capacity(d);
        for f in &fields[..d] {
            let v: f64 = f.parse().map_err(|_| Error::CsvParse {
                line: lineno,
                msg: format!("non-numeric cell '{f}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::CsvParse {
                    line: lineno,
                    msg: format!("non-finite value '{f}'"),
                });
            }
            coords.push(v);
        }
        let label_field = fields[d];
        let label: f64 = label_field.parse().map_err(|_| Error::CsvParse {
            line: lineno,
            msg: format!("non-numeric label '{label_field}'"),
        })?;
        if label.fract() != 0.0 || label < 1.0 {
            return Err(Error::CsvParse {
                line: lineno,
                msg: format!("label '{label_field}' is not a positive integer"),
            });
        }
        points.push(DVector::from_vec(coords));
        labels.push(label as usize);
    }
    LabeledDataset::new(points, labels)
}

/// Writes a dataset in the same CSV layout (`.` decimal separator, LF endings).
pub fn save_csv(data: &LabeledDataset, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..data.n() {
        for v in data.point(i).iter() {
            write!(out, "{v:?},")?;
        }
        writeln!(out, "{}", data.label(i))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_small_file() {
        let data = parse_csv("1.0,2.0,1\n2.0,1.0,2\n0.0,0.0,1\n").unwrap();
        assert_eq!(data.n(), 3);
        assert_eq!(data.dim(), 2);
        assert_eq!(data.q(), 2);
    }

    #[test]
    fn skips_header() {
        let data = parse_csv("x1,x2,label\n1.0,2.0,1\n2.0,1.0,2\n").unwrap();
        assert_eq!(data.n(), 2);
    }

    #[test]
    fn rejects_noncontiguous_labels() {
        let err = parse_csv("1.0,2.0,1\n2.0,1.0,3\n").unwrap_err();
        assert!(err.to_string().contains("not contiguous"));
    }

    #[test]
    fn reports_ragged_rows_with_line_numbers() {
        let err = parse_csv("1.0,2.0,1\n2.0,1\n").unwrap_err();
        match err {
            Error::CsvParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_nan() {
        assert!(parse_csv("NaN,2.0,1\n1.0,1.0,2\n").is_err());
    }

    #[test]
    fn roundtrip_exact() {
        let data = parse_csv("1.5,-2.25,1\n0.125,3.0,2\n").unwrap();
        let dir = std::env::temp_dir().join("potpot_dataset_test.csv");
        save_csv(&data, &dir).unwrap();
        let back = load_csv(&dir).unwrap();
        assert_eq!(back.n(), data.n());
        for i in 0..data.n() {
            assert_eq!(back.point(i), data.point(i));
            assert_eq!(back.label(i), data.label(i));
        }
    }
}
