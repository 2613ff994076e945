//! Labeled feature matrices.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::error::{contract, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    n_cols: usize,
}

impl Matrix {
    pub fn new(data: Vec<f64>, n_cols: usize) -> Result<Self> {
        if n_cols == 0 {
            return Err(contract("matrix needs at least one column"));
        }
        if data.len() % n_cols != 0 {
            return Err(contract(format!(
                "{} values do not fill rows of width {n_cols}",
                data.len()
            )));
        }
        Ok(Self { data, n_cols })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            if r.as_ref().len() != n_cols {
                return Err(contract(format!(
                    "row {i} has {} columns, expected {n_cols}",
                    r.as_ref().len()
                )));
            }
            data.extend_from_slice(r.as_ref());
        }
        Self::new(data, n_cols)
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.n_cols
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.n_cols, "row width mismatch");
        self.data.extend_from_slice(row);
    }

    /// Column-major copy, used by the tree builders.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_cols)
            .map(|c| self.rows().map(|r| r[c]).collect())
            .collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            data,
            n_cols: self.n_cols,
        }
    }
}

/// Feature matrix plus binary labels with cached class counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<u8>,
    n_pos: usize,
    n_neg: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<u8>) -> Result<Self> {
        if features.n_rows() != labels.len() {
            return Err(contract(format!(
                "{} feature rows but {} labels",
                features.n_rows(),
                labels.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(contract(format!("label at row {i} is not 0 or 1")));
        }
        if let Some(i) = features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(contract(format!(
                "non-finite feature at row {}, column {}",
                i / features.n_cols(),
                i % features.n_cols()
            )));
        }
        let n_pos = labels.iter().filter(|&&l| l == 1).count();
        let n_neg = labels.len() - n_pos;
        Ok(Self {
            features,
            labels,
            n_pos,
            n_neg,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn has_both_classes(&self) -> bool {
        self.n_pos > 0 && self.n_neg > 0
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let labels: Vec<u8> = idx.iter().map(|&i| self.labels[i]).collect();
        let n_pos = labels.iter().filter(|&&l| l == 1).count();
        Self {
            features: self.features.select_rows(idx),
            n_neg: labels.len() - n_pos,
            labels,
            n_pos,
        }
    }

    /// Appends rows from another dataset of the same width.
    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        if other.n_features() != self.n_features() {
            return Err(contract("cannot concatenate datasets of different widths"));
        }
        for r in other.features.rows() {
            self.features.push_row(r);
        }
        self.labels.extend_from_slice(&other.labels);
        self.n_pos += other.n_pos;
        self.n_neg += other.n_neg;
        Ok(())
    }

    /// Hash of one row's exact bit pattern and label.
    pub fn row_hash(&self, i: usize) -> u64 {
        let mut h = DefaultHasher::new();
        for v in self.features.row(i) {
            v.to_bits().hash(&mut h);
        }
        self.labels[i].hash(&mut h);
        h.finish()
    }

    /// Order-sensitive digest over every row.
    pub fn digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.n_features().hash(&mut h);
        for i in 0..self.n_rows() {
            self.row_hash(i).hash(&mut h);
        }
        h.finish()
    }
}
