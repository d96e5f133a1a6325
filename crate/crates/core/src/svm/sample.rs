use std::ops::Range;

use crate::error::{Error, Result};
use crate::features::GroupSpan;
use crate::scalar::Scalar;

/// Labeled feature vectors with named channel spans.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet<T> {
    dim: usize,
    x: Vec<T>,
    labels: Vec<i8>,
    groups: Vec<GroupSpan>,
}

impl<T: Scalar> SampleSet<T> {
    /// `x` is row-major `labels.len() x dim`. An empty `groups` list means a
    /// single group `"all"` spanning every dimension.
    pub fn new(dim: usize, x: Vec<T>, labels: Vec<i8>, groups: Vec<GroupSpan>) -> Result<Self> {
        if x.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * labels.len(),
                actual: x.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l != 1 && l != -1) {
            return Err(Error::InvalidLabel(bad as f64));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature value".into()));
        }
        let groups = if groups.is_empty() {
            vec![GroupSpan {
                name: "all".into(),
                range: 0..dim,
            }]
        } else {
            groups
        };
        for (i, g) in groups.iter().enumerate() {
            if g.range.end > dim || g.range.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "group {} spans {:?} outside dimension {dim}",
                    g.name, g.range
                )));
            }
            if groups[..i].iter().any(|o| o.name == g.name) {
                return Err(Error::DuplicateGroup(g.name.clone()));
            }
        }
        Ok(Self {
            dim,
            x,
            labels,
            groups,
        })
    }

    pub fn from_rows(rows: &[Vec<T>], labels: Vec<i8>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.len(),
            });
        }
        Self::new(dim, rows.concat(), labels, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn groups(&self) -> &[GroupSpan] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Result<Range<usize>> {
        self.groups
            .iter()
            .find(|g| g.name == name)
            .map(|g| g.range.clone())
            .ok_or_else(|| Error::MissingGroup(name.into()))
    }

    /// Errors unless both classes are present.
    pub fn check_two_classes(&self) -> Result<()> {
        let pos = self.labels.iter().any(|&l| l == 1);
        let neg = self.labels.iter().any(|&l| l == -1);
        if pos && neg {
            Ok(())
        } else {
            Err(Error::SingleClass)
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut x = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            x.extend_from_slice(self.row(i));
        }
        Self {
            dim: self.dim,
            x,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            groups: self.groups.clone(),
        }
    }

    /// Appends another set with the same layout.
    pub fn extend(&mut self, other: &Self) -> Result<()> {
        if other.dim != self.dim || other.groups != self.groups {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        self.x.extend_from_slice(&other.x);
        self.labels.extend_from_slice(&other.labels);
        Ok(())
    }
}
