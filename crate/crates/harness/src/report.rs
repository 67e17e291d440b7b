//! Reports: confusion matrices with accuracy summaries, written as CSV,
//! JSON and a PNG heatmap of the row-normalized rates.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use escher_core::group::{subgroup_of, WallpaperGroup, NUM_GROUPS};
use escher_core::image::PatternImage;
use escher_core::metrics::ConfusionMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Side of one matrix cell in the heatmap, in pixels.
pub const HEATMAP_CELL: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub classifier: String,
    pub confusion: ConfusionMatrix,
    /// Fraction of all test images classified correctly.
    pub accuracy: f64,
    /// Mean of the per-group accuracies.
    pub group_mean: f64,
    /// Sample standard deviation between the per-group accuracies.
    pub group_std: f64,
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl Report {
    pub fn new(name: impl Into<String>, classifier: impl Into<String>, confusion: ConfusionMatrix) -> Self {
        let s = confusion.group_summary();
        Self {
            name: name.into(),
            classifier: classifier.into(),
            accuracy: confusion.accuracy(),
            group_mean: s.mean,
            group_std: s.std,
            confusion,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Serialize) -> Self {
        self.meta.insert(key.to_string(), serde_json::to_value(value).expect("meta serializes"));
        self
    }

    /// Largest off-diagonal cell and whether its groups are related in the hierarchy.
    pub fn largest_confusion(&self) -> Option<(WallpaperGroup, WallpaperGroup, u64, bool)> {
        self.confusion
            .largest_confusion()
            .map(|(t, p, c)| (t, p, c, subgroup_of(t, p) || subgroup_of(p, t)))
    }
}

fn header() -> Vec<String> {
    std::iter::once("truth".to_string())
        .chain(WallpaperGroup::ALL.iter().map(|g| g.name().to_string()))
        .collect()
}

/// Counts: one header row and one row per true group.
pub fn confusion_csv(m: &ConfusionMatrix) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header())?;
    for g in WallpaperGroup::ALL {
        let row = m.counts[g.index()].iter().map(u64::to_string);
        w.write_record(std::iter::once(g.name().to_string()).chain(row))?;
    }
    into_bytes(w)
}

/// Row-normalized rates, shortest round-trip decimal form.
pub fn rates_csv(m: &ConfusionMatrix) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header())?;
    for (g, row) in WallpaperGroup::ALL.iter().zip(m.rates()) {
        w.write_record(std::iter::once(g.name().to_string()).chain(row.iter().map(f64::to_string)))?;
    }
    into_bytes(w)
}

/// One row per group; accuracy is empty for groups without test images.
pub fn group_csv(m: &ConfusionMatrix) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["group", "n", "correct", "accuracy"])?;
    for (g, acc) in WallpaperGroup::ALL.iter().zip(m.group_accuracy()) {
        w.write_record([
            g.name().to_string(),
            m.row_total(*g).to_string(),
            m.counts[g.index()][g.index()].to_string(),
            acc.map(|a| a.to_string()).unwrap_or_default(),
        ])?;
    }
    into_bytes(w)
}

fn into_bytes(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| HarnessError::Data(format!("csv buffer: {e}")))
}

/// Grayscale heatmap of the rates, `HEATMAP_CELL` pixels per cell; white is 1.
pub fn heatmap(m: &ConfusionMatrix) -> PatternImage {
    let r = m.rates();
    let side = NUM_GROUPS * HEATMAP_CELL;
    PatternImage::from_fn(side, side, |x, y| r[y / HEATMAP_CELL][x / HEATMAP_CELL] as f32).expect("nonzero size")
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

/// Writes `<name>.json`, `<name>_confusion.csv`, `<name>_rates.csv`,
/// `<name>_groups.csv` and `<name>_confusion.png` under `dir`.
pub fn write_report(r: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    let files = [
        (format!("{}.json", r.name), serde_json::to_vec_pretty(r)?),
        (format!("{}_confusion.csv", r.name), confusion_csv(&r.confusion)?),
        (format!("{}_rates.csv", r.name), rates_csv(&r.confusion)?),
        (format!("{}_groups.csv", r.name), group_csv(&r.confusion)?),
        (format!("{}_confusion.png", r.name), heatmap(&r.confusion).encode_png()),
    ];
    let mut out = Vec::new();
    for (name, bytes) in files {
        let p = dir.join(name);
        write_file(&p, &bytes)?;
        out.push(p);
    }
    Ok(out)
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Plain table written as CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        into_bytes(w)
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use WallpaperGroup as G;

    #[test]
    fn csv_has_header_and_seventeen_rows() {
        let mut m = ConfusionMatrix::new();
        m.add(G::P1, G::P2);
        let text = String::from_utf8(confusion_csv(&m).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 18);
        assert_eq!(lines[0].split(',').count(), 18);
        assert_eq!(lines[1], "P1,0,1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0");
    }

    #[test]
    fn report_names_hierarchy_relation_of_worst_cell() {
        let mut m = ConfusionMatrix::new();
        for _ in 0..3 {
            m.add(G::PG, G::PGG);
        }
        m.add(G::P4, G::P3);
        let (t, p, c, related) = Report::new("x", "cnn", m).largest_confusion().unwrap();
        assert_eq!((t, p, c, related), (G::PG, G::PGG, 3, true));
    }
}
