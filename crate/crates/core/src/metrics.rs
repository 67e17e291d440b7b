//! Confusion matrices over the 17 groups, with the per-group summary used in
//! reports: accuracy is averaged over groups and the spread is the sample
//! standard deviation of the per-group accuracies.

use serde::{Deserialize, Serialize};

use crate::group::{subgroup_of, WallpaperGroup, NUM_GROUPS};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[true][predicted]`.
    pub counts: [[u64; NUM_GROUPS]; NUM_GROUPS],
    margin_sum: [f64; NUM_GROUPS],
    margin_sq: [f64; NUM_GROUPS],
    margin_n: [u64; NUM_GROUPS],
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return Summary { mean: f64::NAN, std: f64::NAN };
    }
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Summary { mean, std }
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, truth: WallpaperGroup, predicted: WallpaperGroup) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    /// Records a prediction together with its decision margin.
    pub fn add_with_margin(&mut self, truth: WallpaperGroup, predicted: WallpaperGroup, margin: f64) {
        self.add(truth, predicted);
        let i = truth.index();
        self.margin_sum[i] += margin;
        self.margin_sq[i] += margin * margin;
        self.margin_n[i] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for i in 0..NUM_GROUPS {
            for j in 0..NUM_GROUPS {
                self.counts[i][j] += other.counts[i][j];
            }
            self.margin_sum[i] += other.margin_sum[i];
            self.margin_sq[i] += other.margin_sq[i];
            self.margin_n[i] += other.margin_n[i];
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, truth: WallpaperGroup) -> u64 {
        self.counts[truth.index()].iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..NUM_GROUPS).map(|i| self.counts[i][i]).sum()
    }

    /// Fraction of all samples on the diagonal.
    pub fn accuracy(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            0.0
        } else {
            self.correct() as f64 / t as f64
        }
    }

    /// Row-normalized rates; empty rows are all zero.
    pub fn rates(&self) -> [[f64; NUM_GROUPS]; NUM_GROUPS] {
        let mut r = [[0.0; NUM_GROUPS]; NUM_GROUPS];
        for (i, row) in self.counts.iter().enumerate() {
            let n: u64 = row.iter().sum();
            if n > 0 {
                for j in 0..NUM_GROUPS {
                    r[i][j] = row[j] as f64 / n as f64;
                }
            }
        }
        r
    }

    /// Accuracy per true group; `None` for groups without samples.
    pub fn group_accuracy(&self) -> [Option<f64>; NUM_GROUPS] {
        let mut out = [None; NUM_GROUPS];
        for g in WallpaperGroup::ALL {
            let n = self.row_total(g);
            if n > 0 {
                out[g.index()] = Some(self.counts[g.index()][g.index()] as f64 / n as f64);
            }
        }
        out
    }

    /// Mean and spread of per-group accuracy over the groups present.
    pub fn group_summary(&self) -> Summary {
        let accs: Vec<f64> = self.group_accuracy().iter().flatten().copied().collect();
        summarize(&accs)
    }

    /// Mean and spread of recorded margins for one true group.
    pub fn margin_summary(&self, truth: WallpaperGroup) -> Option<Summary> {
        let i = truth.index();
        let n = self.margin_n[i];
        if n == 0 {
            return None;
        }
        let nf = n as f64;
        let mean = self.margin_sum[i] / nf;
        let var = if n > 1 {
            ((self.margin_sq[i] - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Some(Summary { mean, std: var.sqrt() })
    }

    /// Largest off-diagonal count as `(truth, predicted, count)`; ties go to
    /// the lower row, then the lower column.
    pub fn largest_confusion(&self) -> Option<(WallpaperGroup, WallpaperGroup, u64)> {
        let mut best: Option<(WallpaperGroup, WallpaperGroup, u64)> = None;
        for t in WallpaperGroup::ALL {
            for p in WallpaperGroup::ALL {
                let c = self.counts[t.index()][p.index()];
                if t != p && c > 0 && best.map_or(true, |b| c > b.2) {
                    best = Some((t, p, c));
                }
            }
        }
        best
    }

    /// Error mass from a group to one of its proper supergroups, and from a
    /// group to one of its proper subgroups.
    pub fn hierarchy_error_mass(&self) -> (u64, u64) {
        let (mut up, mut down) = (0, 0);
        for t in WallpaperGroup::ALL {
            for p in WallpaperGroup::ALL {
                if t == p {
                    continue;
                }
                let c = self.counts[t.index()][p.index()];
                if subgroup_of(t, p) {
                    up += c;
                } else if subgroup_of(p, t) {
                    down += c;
                }
            }
        }
        (up, down)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use WallpaperGroup as G;

    #[test]
    fn diagonal_matrix_is_perfect() {
        let mut m = ConfusionMatrix::new();
        for g in G::ALL {
            for _ in 0..3 {
                m.add(g, g);
            }
        }
        assert_eq!(m.accuracy(), 1.0);
        assert_eq!(m.group_summary(), Summary { mean: 1.0, std: 0.0 });
        assert!(m.largest_confusion().is_none());
    }

    #[test]
    fn rates_rows_sum_to_one() {
        let mut m = ConfusionMatrix::new();
        m.add(G::P3, G::P6);
        m.add(G::P3, G::P3);
        m.add(G::P3, G::P31M);
        m.add(G::PG, G::PGG);
        let r = m.rates();
        for g in [G::P3, G::PG] {
            assert!((r[g.index()].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(r[G::P1.index()].iter().sum::<f64>(), 0.0);
        assert_eq!(m.row_total(G::P3), 3);
        // ties resolve to the lowest row, then the lowest column
        assert_eq!(m.largest_confusion(), Some((G::PG, G::PGG, 1)));
    }

    #[test]
    fn summary_uses_sample_deviation() {
        let mut m = ConfusionMatrix::new();
        m.add(G::P1, G::P1);
        m.add(G::P2, G::P1);
        let s = m.group_summary();
        assert_eq!(s.mean, 0.5);
        assert!((s.std - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hierarchy_direction() {
        let mut m = ConfusionMatrix::new();
        m.add(G::P3, G::P6); // toward a supergroup
        m.add(G::P3, G::P6);
        m.add(G::P6, G::P3); // toward a subgroup
        m.add(G::P4, G::P3); // unrelated
        assert_eq!(m.hierarchy_error_mass(), (2, 1));
    }

    #[test]
    fn margins_accumulate() {
        let mut m = ConfusionMatrix::new();
        m.add_with_margin(G::PM, G::PM, 0.2);
        m.add_with_margin(G::PM, G::PM, 0.4);
        let s = m.margin_summary(G::PM).unwrap();
        assert!((s.mean - 0.3).abs() < 1e-12);
        assert!((s.std - 0.02f64.sqrt()).abs() < 1e-9);
        assert!(m.margin_summary(G::P1).is_none());
    }
}
