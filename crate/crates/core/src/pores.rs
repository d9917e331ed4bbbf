//! Pore detection: background regions sealed off from the image border.
//!
//! A background pixel belongs to the exterior when an 8-connected path of
//! background pixels links it to some border pixel. Every other background
//! pixel is a pore pixel, and pores are the 8-connected components of those.

use std::collections::VecDeque;

use crate::imagegrid::{BinaryImage, Label};

const NEIGHBOURS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

fn neighbours(rows: usize, cols: usize, idx: usize) -> impl Iterator<Item = usize> {
    let (r, c) = ((idx / cols) as isize, (idx % cols) as isize);
    NEIGHBOURS.iter().filter_map(move |&(dr, dc)| {
        let (nr, nc) = (r + dr, c + dc);
        (nr >= 0 && nc >= 0 && (nr as usize) < rows && (nc as usize) < cols).then(|| nr as usize * cols + nc as usize)
    })
}

/// Marks every background pixel reachable from a border background pixel.
/// Foreground pixels are never marked.
pub fn exterior_mask(bin: &BinaryImage) -> Vec<bool> {
    let (rows, cols) = (bin.rows(), bin.cols());
    let labels = bin.labels();
    let mut mask = vec![false; labels.len()];
    let mut queue = VecDeque::new();

    let border = (0..cols)
        .flat_map(|c| [c, (rows - 1) * cols + c])
        .chain((0..rows).flat_map(|r| [r * cols, r * cols + cols - 1]));
    for idx in border {
        if labels[idx] == Label::Background && !mask[idx] {
            mask[idx] = true;
            queue.push_back(idx);
        }
    }
    while let Some(idx) = queue.pop_front() {
        for n in neighbours(rows, cols, idx) {
            if labels[n] == Label::Background && !mask[n] {
                mask[n] = true;
                queue.push_back(n);
            }
        }
    }
    mask
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pore {
    /// 1 is the largest pore.
    pub id: u32,
    pub area: u64,
    /// Row-major index of the pore's first pixel in scan order.
    pub first_pixel: usize,
}

/// Pore labelling of a binary image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoreMap {
    rows: usize,
    cols: usize,
    labels: Vec<u32>,
    pores: Vec<Pore>,
    total_area: u64,
}

impl PoreMap {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major pore ids; 0 marks a non-pore pixel.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.cols + col]
    }

    /// Pores in descending area order.
    pub fn pores(&self) -> &[Pore] {
        &self.pores
    }

    /// Total pore area `w`.
    pub fn total_area(&self) -> u64 {
        self.total_area
    }

    /// Pore count `n_p`.
    pub fn count(&self) -> usize {
        self.pores.len()
    }

    /// Per-pore porosity rows `(id, area, 100 * area / (u + w))`.
    pub fn per_pore_table(&self, foreground: u64) -> Vec<PoreRow> {
        let denom = (foreground + self.total_area) as f64;
        self.pores
            .iter()
            .map(|p| PoreRow { id: p.id, area: p.area, percent: 100.0 * p.area as f64 / denom })
            .collect()
    }
}

/// Labels the pores of `bin`.
///
/// Components are discovered in scan order, then sorted by area, largest
/// first, keeping scan order among equal areas. Ids follow the sorted order.
pub fn label_pores(bin: &BinaryImage) -> PoreMap {
    let (rows, cols) = (bin.rows(), bin.cols());
    let exterior = exterior_mask(bin);
    let is_pore: Vec<bool> = bin
        .labels()
        .iter()
        .zip(&exterior)
        .map(|(&l, &ext)| l == Label::Background && !ext)
        .collect();

    let mut provisional = vec![0u32; is_pore.len()];
    let mut found: Vec<(u64, usize)> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..is_pore.len() {
        if !is_pore[start] || provisional[start] != 0 {
            continue;
        }
        let id = found.len() as u32 + 1;
        provisional[start] = id;
        queue.push_back(start);
        let mut area = 0u64;
        while let Some(idx) = queue.pop_front() {
            area += 1;
            for n in neighbours(rows, cols, idx) {
                if is_pore[n] && provisional[n] == 0 {
                    provisional[n] = id;
                    queue.push_back(n);
                }
            }
        }
        found.push((area, start));
    }

    let mut order: Vec<usize> = (0..found.len()).collect();
    order.sort_by(|&a, &b| found[b].0.cmp(&found[a].0));
    let mut remap = vec![0u32; found.len() + 1];
    let pores: Vec<Pore> = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            remap[i + 1] = rank as u32 + 1;
            Pore { id: rank as u32 + 1, area: found[i].0, first_pixel: found[i].1 }
        })
        .collect();
    let labels = provisional.into_iter().map(|l| remap[l as usize]).collect();
    let total_area = pores.iter().map(|p| p.area).sum();
    PoreMap { rows, cols, labels, pores, total_area }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoreRow {
    pub id: u32,
    pub area: u64,
    pub percent: f64,
}

/// Formats `value` with four significant digits, e.g. `6.250`, `9.069`,
/// `0.05362`, `20.35`.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{:.*}", digits.saturating_sub(1), value);
    }
    let decimals = |v: f64| (digits as i32 - 1 - v.abs().log10().floor() as i32).max(0) as usize;
    let d = decimals(value);
    let text = format!("{value:.d$}");
    // rounding may carry into a new leading digit (9.9996 -> 10.000)
    let rounded: f64 = text.parse().unwrap_or(value);
    let d2 = decimals(rounded);
    if d2 < d {
        format!("{value:.d2$}")
    } else {
        text
    }
}

/// CSV with header `pore_id,area_pixels,percent_porousness`.
pub fn pore_table_csv(rows: &[PoreRow]) -> String {
    let mut out = String::from("pore_id,area_pixels,percent_porousness\n");
    for row in rows {
        out.push_str(&format!("{},{},{}\n", row.id, row.area, format_significant(row.percent, 4)));
    }
    out
}
