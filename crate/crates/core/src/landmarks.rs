//! Greedy min-max (farthest point) landmark selection over navigator columns.

use ndarray::Axis;

use crate::error::{Error, Result};
use crate::transforms::{CMatrix, CasoratiMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkSet {
    /// Column `k` equals navigator column `indices[k]`.
    pub lambda_mat: CMatrix,
    /// Selected navigator columns in selection order.
    pub indices: Vec<usize>,
}

impl LandmarkSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn squared_distance(y: &CMatrix, a: usize, b: usize) -> f64 {
    y.column(a)
        .iter()
        .zip(y.column(b).iter())
        .map(|(p, q)| (p - q).norm_sqr())
        .sum()
}

/// Starts at the column of largest norm, then repeatedly adds the unselected
/// column farthest from the selected set. Ties go to the lowest index.
pub fn select_landmarks(y_nav: &CasoratiMatrix, n_landmarks: usize) -> Result<LandmarkSet> {
    let n = y_nav.ncols();
    if n == 0 || y_nav.nrows() == 0 {
        return Err(Error::shape("navigator matrix is empty"));
    }
    if n_landmarks == 0 || n_landmarks > n {
        return Err(Error::config(format!(
            "landmark count {n_landmarks} must lie in 1..={n}"
        )));
    }

    let norms: Vec<f64> = y_nav
        .axis_iter(Axis(1))
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let first = argmax_lowest(norms.iter().copied().enumerate()).expect("n ≥ 1");

    let mut selected = vec![false; n];
    let mut indices = Vec::with_capacity(n_landmarks);
    selected[first] = true;
    indices.push(first);
    // running min squared distance of every column to the selected set
    let mut min_dist: Vec<f64> = (0..n).map(|j| squared_distance(y_nav, j, first)).collect();

    while indices.len() < n_landmarks {
        let next = argmax_lowest(
            min_dist
                .iter()
                .copied()
                .enumerate()
                .filter(|&(j, _)| !selected[j]),
        )
        .expect("unselected columns remain");
        selected[next] = true;
        indices.push(next);
        for j in 0..n {
            if !selected[j] {
                min_dist[j] = min_dist[j].min(squared_distance(y_nav, j, next));
            }
        }
    }

    let lambda_mat = y_nav.select(Axis(1), &indices);
    Ok(LandmarkSet {
        lambda_mat,
        indices,
    })
}

fn argmax_lowest(items: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in items {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((j, v)),
        }
    }
    best.map(|(j, _)| j)
}

/// Min distance of each landmark to its predecessors, in selection order.
/// The first entry is `+∞`.
pub fn selection_radii(set: &LandmarkSet) -> Vec<f64> {
    let m = &set.lambda_mat;
    (0..m.ncols())
        .map(|k| {
            (0..k)
                .map(|i| squared_distance(m, i, k).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}
