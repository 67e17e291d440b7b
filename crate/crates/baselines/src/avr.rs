//! Augmented variance ratio feature ranking.
//!
//! `AVR(f) = Var(f) / ((1/C) sum_c Var_c(f) / min_{d != c} |mu_c - mu_d|)`,
//! with population variances. Zero denominators are replaced by
//! [`EPSILON`], so a feature constant over all samples scores 0.

use std::collections::BTreeMap;

use crate::error::{BaselineError, Result};

pub const EPSILON: f64 = 1e-8;
pub const DEFAULT_SELECT: usize = 400;

fn mean_var(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Samples grouped by label, checking the class-count preconditions.
fn class_members(labels: &[usize]) -> Result<Vec<Vec<usize>>> {
    let mut by: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by.entry(l).or_default().push(i);
    }
    if by.len() < 2 {
        return Err(BaselineError::TooFewClasses(format!("{} class present", by.len())));
    }
    if let Some((l, m)) = by.iter().find(|(_, m)| m.len() < 2) {
        return Err(BaselineError::TooFewClasses(format!("class {l} has {} sample", m.len())));
    }
    Ok(by.into_values().collect())
}

/// Score of feature column `j` of `rows`.
pub fn avr_score(rows: &[Vec<f64>], classes: &[Vec<usize>], j: usize) -> f64 {
    let (_, total_var) = mean_var(rows.iter().map(|r| r[j]));
    let stats: Vec<(f64, f64)> = classes.iter().map(|m| mean_var(m.iter().map(|&i| rows[i][j]))).collect();
    let mut denom = 0.0;
    for (c, &(mu_c, var_c)) in stats.iter().enumerate() {
        let gap = stats
            .iter()
            .enumerate()
            .filter(|&(d, _)| d != c)
            .map(|(_, &(mu_d, _))| (mu_c - mu_d).abs())
            .fold(f64::INFINITY, f64::min);
        denom += var_c / gap.max(EPSILON);
    }
    denom /= stats.len() as f64;
    total_var / denom.max(EPSILON)
}

/// Feature indices sorted by descending score; ties keep index order.
pub fn avr_rank(rows: &[Vec<f64>], labels: &[usize]) -> Result<Vec<usize>> {
    if rows.len() != labels.len() || rows.is_empty() {
        return Err(BaselineError::Shape(format!("{} rows, {} labels", rows.len(), labels.len())));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(BaselineError::Shape("ragged feature rows".into()));
    }
    let classes = class_members(labels)?;
    let scores: Vec<f64> = (0..dim).map(|j| avr_score(rows, &classes, j)).collect();
    let mut idx: Vec<usize> = (0..dim).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(idx)
}

pub fn select_top(ranked: &[usize], k: usize) -> Vec<usize> {
    ranked[..k.min(ranked.len())].to_vec()
}

/// Keeps the listed columns of every row.
pub fn project(rows: &[Vec<f64>], columns: &[usize]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| columns.iter().map(|&j| r[j]).collect()).collect()
}
