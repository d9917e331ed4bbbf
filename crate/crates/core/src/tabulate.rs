//! Per-row tabulation chart: span length, foreground, background, scatter
//! and pore counts for every row, plus column totals.

use serde::Serialize;

use crate::imagegrid::BinaryImage;
use crate::pores::PoreMap;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RowCounts {
    /// Inclusive distance from the first to the last foreground pixel.
    pub span: u64,
    pub foreground: u64,
    pub background: u64,
    /// Background pixels strictly inside the span.
    pub scatter: u64,
    pub pore: u64,
}

impl std::ops::AddAssign for RowCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.span += rhs.span;
        self.foreground += rhs.foreground;
        self.background += rhs.background;
        self.scatter += rhs.scatter;
        self.pore += rhs.pore;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowTabulation {
    pub per_row: Vec<RowCounts>,
    pub totals: RowCounts,
    pub image_size: u64,
}

impl RowTabulation {
    /// CSV with columns `row,L,u,z,y,w`, rows numbered from 1, then a
    /// `total` line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,L,u,z,y,w\n");
        let line = |label: &str, r: &RowCounts| {
            format!("{label},{},{},{},{},{}\n", r.span, r.foreground, r.background, r.scatter, r.pore)
        };
        for (i, r) in self.per_row.iter().enumerate() {
            out.push_str(&line(&format!("R{}", i + 1), r));
        }
        out.push_str(&line("total", &self.totals));
        out
    }
}

/// Builds the tabulation chart of `bin`, taking pore membership from `pores`.
/// A row without foreground contributes `(0, 0, cols, 0, 0)`.
pub fn row_tabulation(bin: &BinaryImage, pores: &PoreMap) -> Result<RowTabulation> {
    if bin.rows() != pores.rows() || bin.cols() != pores.cols() {
        return Err(Error::DimensionMismatch(format!(
            "binary image {}x{} vs pore map {}x{}",
            bin.rows(),
            bin.cols(),
            pores.rows(),
            pores.cols()
        )));
    }
    let cols = bin.cols();
    let mut per_row = Vec::with_capacity(bin.rows());
    let mut totals = RowCounts::default();
    for r in 0..bin.rows() {
        let fg: Vec<usize> = (0..cols).filter(|&c| bin.is_foreground(r, c)).collect();
        let foreground = fg.len() as u64;
        let span = match (fg.first(), fg.last()) {
            (Some(&a), Some(&b)) => (b - a + 1) as u64,
            _ => 0,
        };
        let pore = pores.labels()[r * cols..(r + 1) * cols].iter().filter(|&&l| l != 0).count() as u64;
        let row = RowCounts {
            span,
            foreground,
            background: cols as u64 - foreground,
            scatter: span - foreground,
            pore,
        };
        totals += row;
        per_row.push(row);
    }
    Ok(RowTabulation { per_row, totals, image_size: (bin.rows() * cols) as u64 })
}
