use crate::error::{Error, Result};

/// Column-major feature storage.
#[derive(Debug, Clone, PartialEq)]
pub enum Columns {
    /// Encoded 0..=255 values, the same bytes the thumbnails carry.
    Bytes(Vec<Vec<u8>>),
    /// Raw real-valued features.
    Real(Vec<Vec<f64>>),
}

/// Labeled training matrix for tree growth.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    columns: Columns,
    labels: Vec<usize>,
    n_classes: usize,
}

impl TrainingSet {
    pub fn from_byte_rows(rows: &[Vec<u8>], labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let d = check_rows(rows.iter().map(Vec::len), &labels, n_classes)?;
        let columns = (0..d).map(|f| rows.iter().map(|r| r[f]).collect()).collect();
        Ok(TrainingSet {
            columns: Columns::Bytes(columns),
            labels,
            n_classes,
        })
    }

    pub fn from_real_rows(rows: &[Vec<f64>], labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let d = check_rows(rows.iter().map(Vec::len), &labels, n_classes)?;
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("feature values must be finite".into()));
        }
        let columns = (0..d).map(|f| rows.iter().map(|r| r[f]).collect()).collect();
        Ok(TrainingSet {
            columns: Columns::Real(columns),
            labels,
            n_classes,
        })
    }

    pub fn columns(&self) -> &Columns {
        &self.columns
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        match &self.columns {
            Columns::Bytes(c) => c.len(),
            Columns::Real(c) => c.len(),
        }
    }

    pub fn value(&self, feature: usize, row: usize) -> f64 {
        match &self.columns {
            Columns::Bytes(c) => c[feature][row] as f64,
            Columns::Real(c) => c[feature][row],
        }
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.n_features()).map(|f| self.value(f, row)).collect()
    }

    /// Keeps only the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> TrainingSet {
        let columns = match &self.columns {
            Columns::Bytes(c) => {
                Columns::Bytes(c.iter().map(|col| indices.iter().map(|&i| col[i]).collect()).collect())
            }
            Columns::Real(c) => {
                Columns::Real(c.iter().map(|col| indices.iter().map(|&i| col[i]).collect()).collect())
            }
        };
        TrainingSet {
            columns,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }
}

fn check_rows(
    lens: impl Iterator<Item = usize>,
    labels: &[usize],
    n_classes: usize,
) -> Result<usize> {
    let lens: Vec<usize> = lens.collect();
    if lens.len() != labels.len() {
        return Err(Error::InvalidParam(format!(
            "{} rows but {} labels",
            lens.len(),
            labels.len()
        )));
    }
    let d = lens.first().copied().unwrap_or(0);
    if lens.iter().any(|&l| l != d) {
        return Err(Error::InvalidParam("rows differ in length".into()));
    }
    if let Some(bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::InvalidParam(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    Ok(d)
}
