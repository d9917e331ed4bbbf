//! Synthetic phantoms with analytically known features.
//!
//! A phantom is a canvas holding axis-aligned foreground rectangles, each
//! with zero or more strictly interior rectangular holes. Shapes never touch
//! each other (not even diagonally), and neither do holes within a shape, so
//! every hole is exactly one pore and all other background is exterior.
//! Under those rules each row's counts follow from the geometry alone:
//! the row span runs from the leftmost to the rightmost shape edge, and the
//! foreground count is the covered width minus the hole widths.
//!
//! Images are drawn with foreground 255 on background 0. Randomized
//! geometry comes from `ChaCha8Rng`, a portable generator, seeded explicitly.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binarize::ThresholdConfig;
use crate::features::{extract, FeatureRecord};
use crate::imagegrid::GrayImage;
use crate::{Error, Result};

/// Threshold the expected records assume.
pub const PHANTOM_THRESHOLD: u8 = 128;
pub const FOREGROUND_LEVEL: u8 = 255;
pub const BACKGROUND_LEVEL: u8 = 0;

pub fn threshold_config() -> ThresholdConfig {
    ThresholdConfig::manual(PHANTOM_THRESHOLD)
}

/// An axis-aligned block of pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Region {
    pub fn new(top: usize, left: usize, height: usize, width: usize) -> Self {
        Self { top, left, height, width }
    }

    fn bottom(&self) -> usize {
        self.top + self.height - 1
    }

    fn right(&self) -> usize {
        self.left + self.width - 1
    }

    fn area(&self) -> u64 {
        (self.height * self.width) as u64
    }

    fn covers_row(&self, row: usize) -> bool {
        (self.top..=self.bottom()).contains(&row)
    }

    /// True when no pixel of `self` is 8-adjacent to or inside `other`.
    fn separated_from(&self, other: &Region) -> bool {
        self.right() + 1 < other.left
            || other.right() + 1 < self.left
            || self.bottom() + 1 < other.top
            || other.bottom() + 1 < self.top
    }

    fn strictly_inside(&self, outer: &Region) -> bool {
        self.top > outer.top && self.left > outer.left && self.bottom() < outer.bottom() && self.right() < outer.right()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub outer: Region,
    pub holes: Vec<Region>,
}

impl Shape {
    pub fn solid(outer: Region) -> Self {
        Self { outer, holes: Vec::new() }
    }

    /// A one-pixel-thick outline around `outer`.
    pub fn ring(outer: Region) -> Self {
        let hole = Region::new(outer.top + 1, outer.left + 1, outer.height.saturating_sub(2), outer.width.saturating_sub(2));
        Self { outer, holes: vec![hole] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    Rect,
    RectWithHole,
    ScatterDots,
    Ring,
    Composite,
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhantomKind::Rect => "rect",
            PhantomKind::RectWithHole => "rect_with_hole",
            PhantomKind::ScatterDots => "scatter_dots",
            PhantomKind::Ring => "ring",
            PhantomKind::Composite => "composite",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub rows: usize,
    pub cols: usize,
    pub shapes: Vec<Shape>,
}

impl PhantomSpec {
    pub fn rect(rows: usize, cols: usize, rect: Region) -> Self {
        Self { kind: PhantomKind::Rect, rows, cols, shapes: vec![Shape::solid(rect)] }
    }

    pub fn rect_with_hole(rows: usize, cols: usize, rect: Region, hole: Region) -> Self {
        Self { kind: PhantomKind::RectWithHole, rows, cols, shapes: vec![Shape { outer: rect, holes: vec![hole] }] }
    }

    /// A `rect` sized rectangle centred on the canvas with a centred hole.
    pub fn centred_rect_with_hole(rows: usize, cols: usize, rect: (usize, usize), hole: (usize, usize)) -> Self {
        let outer = Region::new(rows.saturating_sub(rect.0) / 2, cols.saturating_sub(rect.1) / 2, rect.0, rect.1);
        let inner = Region::new(
            outer.top + rect.0.saturating_sub(hole.0) / 2,
            outer.left + rect.1.saturating_sub(hole.1) / 2,
            hole.0,
            hole.1,
        );
        Self::rect_with_hole(rows, cols, outer, inner)
    }

    pub fn ring(rows: usize, cols: usize, outline: Region) -> Self {
        Self { kind: PhantomKind::Ring, rows, cols, shapes: vec![Shape::ring(outline)] }
    }

    /// A lattice of single-pixel dots, `spacing` background pixels apart.
    pub fn scatter_dots(rows: usize, cols: usize, origin: (usize, usize), dot_rows: usize, dots_per_row: usize, spacing: usize) -> Self {
        let pitch = spacing + 1;
        let shapes = (0..dot_rows)
            .flat_map(|i| (0..dots_per_row).map(move |j| (i, j)))
            .map(|(i, j)| Shape::solid(Region::new(origin.0 + i * pitch, origin.1 + j * pitch, 1, 1)))
            .collect();
        Self { kind: PhantomKind::ScatterDots, rows, cols, shapes }
    }

    pub fn composite(rows: usize, cols: usize, shapes: Vec<Shape>) -> Self {
        Self { kind: PhantomKind::Composite, rows, cols, shapes }
    }

    pub fn validate(&self) -> Result<()> {
        let oob = |msg: String| Err(Error::SpecOutOfBounds(msg));
        if self.rows == 0 || self.cols == 0 {
            return oob(format!("empty canvas {}x{}", self.rows, self.cols));
        }
        if self.shapes.is_empty() {
            return oob("no shapes; a phantom needs foreground".into());
        }
        for (i, shape) in self.shapes.iter().enumerate() {
            let o = &shape.outer;
            if o.height == 0 || o.width == 0 {
                return oob(format!("shape {i} is empty"));
            }
            if o.top + o.height > self.rows || o.left + o.width > self.cols {
                return oob(format!("shape {i} {o:?} leaves the {}x{} canvas", self.rows, self.cols));
            }
            for (j, hole) in shape.holes.iter().enumerate() {
                if hole.height == 0 || hole.width == 0 {
                    return oob(format!("hole {j} of shape {i} is empty"));
                }
                if !hole.strictly_inside(o) {
                    return oob(format!("hole {j} of shape {i} is not strictly interior"));
                }
                if shape.holes[..j].iter().any(|h| !h.separated_from(hole)) {
                    return oob(format!("hole {j} of shape {i} touches another hole"));
                }
            }
            if self.shapes[..i].iter().any(|s| !s.outer.separated_from(o)) {
                return oob(format!("shape {i} touches another shape"));
            }
        }
        Ok(())
    }

    /// Closed-form feature record for this geometry.
    pub fn expected_record(&self, source_id: &str) -> Result<FeatureRecord> {
        self.validate()?;
        let (mut u, mut y) = (0u64, 0u64);
        for row in 0..self.rows {
            let mut left = usize::MAX;
            let mut right = 0usize;
            let mut covered = 0u64;
            for shape in self.shapes.iter().filter(|s| s.outer.covers_row(row)) {
                left = left.min(shape.outer.left);
                right = right.max(shape.outer.right());
                let hole_width: usize = shape.holes.iter().filter(|h| h.covers_row(row)).map(|h| h.width).sum();
                covered += (shape.outer.width - hole_width) as u64;
            }
            if covered > 0 {
                let span = (right - left + 1) as u64;
                u += covered;
                y += span - covered;
            }
        }
        let holes = self.shapes.iter().flat_map(|s| &s.holes);
        let w: u64 = holes.clone().map(Region::area).sum();
        let n_p = holes.count() as u64;
        FeatureRecord::from_counts(source_id, self.rows, self.cols, PHANTOM_THRESHOLD, u, y, w, n_p)
    }

    pub fn render(&self) -> Result<GrayImage> {
        self.validate()?;
        let mut pixels = vec![BACKGROUND_LEVEL; self.rows * self.cols];
        for shape in &self.shapes {
            fill(&mut pixels, self.cols, &shape.outer, FOREGROUND_LEVEL);
            for hole in &shape.holes {
                fill(&mut pixels, self.cols, hole, BACKGROUND_LEVEL);
            }
        }
        GrayImage::new(self.rows, self.cols, pixels)
    }
}

fn fill(pixels: &mut [u8], cols: usize, region: &Region, value: u8) {
    for r in region.top..=region.bottom() {
        pixels[r * cols + region.left..=r * cols + region.right()].fill(value);
    }
}

/// Renders `spec` and returns it with its closed-form expected record.
pub fn generate(spec: &PhantomSpec) -> Result<(GrayImage, FeatureRecord)> {
    let expected = spec.expected_record(&spec.kind.to_string())?;
    Ok((spec.render()?, expected))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    /// Brain with both eyes in the slice.
    Eyes,
    BrainNoEyes,
    /// No brain; background trapped inside a thin skull-like ring.
    NoBrain,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Eyes, ClassLabel::BrainNoEyes, ClassLabel::NoBrain];

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Eyes => "eyes",
            ClassLabel::BrainNoEyes => "brain_no_eyes",
            ClassLabel::NoBrain => "no_brain",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassLabel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown class label {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledItem {
    pub record: FeatureRecord,
    pub label: ClassLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub items: Vec<LabeledItem>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn class_count(&self, label: ClassLabel) -> usize {
        self.items.iter().filter(|i| i.label == label).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub id: String,
    pub label: ClassLabel,
    pub spec: PhantomSpec,
}

pub const DATASET_CANVAS: usize = 64;

fn jitter(rng: &mut ChaCha8Rng, centre: usize, spread: usize) -> usize {
    rng.gen_range(centre - spread..=centre + spread)
}

fn eyes_phantom(rng: &mut ChaCha8Rng) -> PhantomSpec {
    let n = DATASET_CANVAS;
    let h = rng.gen_range(18..=24);
    let w = rng.gen_range(26..=34);
    let brain = Region::new(rng.gen_range(36..=n - 1 - h), jitter(rng, (n - w) / 2, 2), h, w);
    let hole = Region::new(brain.top + rng.gen_range(2..=h - 5), brain.left + rng.gen_range(2..=w - 5), 2, 2);
    let s = rng.gen_range(9..=12);
    let top = rng.gen_range(8..=14);
    let left = rng.gen_range(6..=12);
    let right_left = n - left - s + rng.gen_range(0..=1) - 1;
    let eye_left = Region::new(top, left, s, s);
    let eye_right = Region::new(jitter(rng, top, 1), right_left, s, s);
    PhantomSpec::composite(
        n,
        n,
        vec![Shape { outer: brain, holes: vec![hole] }, Shape::ring(eye_left), Shape::ring(eye_right)],
    )
}

fn brain_phantom(rng: &mut ChaCha8Rng) -> PhantomSpec {
    let n = DATASET_CANVAS;
    let h = rng.gen_range(36..=46);
    let w = rng.gen_range(40..=50);
    let brain = Region::new(jitter(rng, (n - h) / 2, 2), jitter(rng, (n - w) / 2, 2), h, w);
    // one hole per horizontal third keeps holes apart
    let slot = (w - 2) / 3;
    let holes = (0..rng.gen_range(1..=3))
        .map(|k| {
            let (hh, hw) = (rng.gen_range(1..=2), rng.gen_range(2..=3));
            let top = brain.top + rng.gen_range(2..=h - 2 - hh);
            let left = brain.left + 1 + k * slot + rng.gen_range(1..=slot - hw - 1);
            Region::new(top, left, hh, hw)
        })
        .collect();
    PhantomSpec::composite(n, n, vec![Shape { outer: brain, holes }])
}

fn no_brain_phantom(rng: &mut ChaCha8Rng) -> PhantomSpec {
    let n = DATASET_CANVAS;
    let h = rng.gen_range(34..=44);
    let w = rng.gen_range(34..=44);
    let outline = Region::new(jitter(rng, (n - h) / 2, 2), jitter(rng, (n - w) / 2, 2), h, w);
    PhantomSpec::composite(n, n, vec![Shape::ring(outline)])
}

/// Phantom geometry for a three-class dataset, classes interleaved.
pub fn dataset_entries(n_per_class: usize, seed: u64) -> Result<Vec<DatasetEntry>> {
    if n_per_class < 10 {
        return Err(Error::InvalidArgument(format!("{n_per_class} items per class, need at least 10")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(3 * n_per_class);
    for i in 0..n_per_class {
        for label in ClassLabel::ALL {
            let spec = match label {
                ClassLabel::Eyes => eyes_phantom(&mut rng),
                ClassLabel::BrainNoEyes => brain_phantom(&mut rng),
                ClassLabel::NoBrain => no_brain_phantom(&mut rng),
            };
            entries.push(DatasetEntry { id: format!("{}_{i:04}", label.name()), label, spec });
        }
    }
    Ok(entries)
}

/// A labelled feature dataset built by running the extraction pipeline on
/// freshly generated phantoms.
pub fn generate_dataset(n_per_class: usize, seed: u64) -> Result<LabeledDataset> {
    let items = dataset_entries(n_per_class, seed)?
        .into_iter()
        .map(|e| {
            let img = e.spec.render()?;
            let record = extract(&img, &threshold_config(), &e.id)?;
            Ok(LabeledItem { record, label: e.label })
        })
        .collect::<Result<_>>()?;
    Ok(LabeledDataset { items })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesSpec {
    pub length: usize,
    /// Index of a ring-only slice with no brain, if any.
    pub faulty: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesSlice {
    pub id: String,
    pub faulty: bool,
    pub spec: PhantomSpec,
}

fn series_slice(rng: &mut ChaCha8Rng, index: usize, length: usize) -> PhantomSpec {
    let n = DATASET_CANVAS;
    // brain cross-section grows towards the middle of the scan and shrinks again
    let bulge = (std::f64::consts::PI * (index as f64 + 0.5) / length as f64).sin();
    let h = 20 + (20.0 * bulge).round() as usize;
    let w = 26 + (20.0 * bulge).round() as usize;
    let brain = Region::new((n - h) / 2, (n - w) / 2, h, w);
    let holes = (0..rng.gen_range(1..=2))
        .map(|k| {
            let side = rng.gen_range(2..=3);
            let top = brain.top + rng.gen_range(2..=h - 2 - side);
            let half = w / 2;
            let left = brain.left + k * half + rng.gen_range(2..=half - side - 2);
            Region::new(top, left, side, side)
        })
        .collect();
    PhantomSpec::composite(n, n, vec![Shape { outer: brain, holes }])
}

/// A scan-ordered slice series; slice ids sort in scan order.
pub fn generate_series(spec: &SeriesSpec) -> Result<Vec<SeriesSlice>> {
    if spec.length < 3 {
        return Err(Error::SeriesTooShort(spec.length));
    }
    if spec.faulty.is_some_and(|f| f >= spec.length) {
        return Err(Error::SpecOutOfBounds(format!("faulty slice {:?} outside series of {}", spec.faulty, spec.length)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let width = spec.length.to_string().len().max(3);
    Ok((0..spec.length)
        .map(|i| {
            let faulty = spec.faulty == Some(i);
            let phantom = if faulty { no_brain_phantom(&mut rng) } else { series_slice(&mut rng, i, spec.length) };
            SeriesSlice { id: format!("slice_{i:0width$}"), faulty, spec: phantom }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::analyze;

    fn check(spec: &PhantomSpec) -> FeatureRecord {
        let (img, expected) = generate(spec).unwrap();
        let got = extract(&img, &threshold_config(), &expected.source_id).unwrap();
        assert_eq!(got, expected, "{spec:?}");
        expected
    }

    #[test]
    fn rect_with_centred_hole() {
        let rec = check(&PhantomSpec::centred_rect_with_hole(64, 64, (20, 30), (4, 6)));
        assert_eq!((rec.u, rec.y, rec.w, rec.n_p), (576, 24, 24, 1));
        assert_eq!(rec.ipf, 576.0 / 4096.0);
        assert_eq!(rec.c, 0.96);
        assert_eq!(rec.p, 0.04);
    }

    #[test]
    fn solid_rect() {
        let rec = check(&PhantomSpec::rect(10, 12, Region::new(2, 3, 4, 5)));
        assert_eq!((rec.u, rec.y, rec.w, rec.n_p, rec.c, rec.p), (20, 0, 0, 0, 1.0, 0.0));
    }

    #[test]
    fn ring_encloses_interior() {
        let rec = check(&PhantomSpec::ring(20, 20, Region::new(3, 4, 8, 10)));
        assert_eq!((rec.w, rec.n_p), (6 * 8, 1));
        assert_eq!(rec.u, 2 * 8 + 2 * 10 - 4);
    }

    #[test]
    fn scatter_dots_have_no_pores() {
        let rec = check(&PhantomSpec::scatter_dots(16, 16, (1, 1), 3, 4, 2));
        assert_eq!((rec.u, rec.y, rec.w), (12, 3 * 3 * 2, 0));
    }

    #[test]
    fn composite_side_by_side() {
        let spec = PhantomSpec::composite(
            12,
            20,
            vec![Shape::ring(Region::new(1, 1, 5, 5)), Shape::solid(Region::new(3, 8, 6, 4))],
        );
        check(&spec);
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            PhantomSpec::rect(10, 10, Region::new(5, 5, 6, 2)),
            PhantomSpec::rect_with_hole(10, 10, Region::new(1, 1, 5, 5), Region::new(1, 2, 2, 2)),
            PhantomSpec::ring(10, 10, Region::new(1, 1, 2, 5)),
            PhantomSpec::composite(10, 10, vec![Shape::solid(Region::new(1, 1, 2, 2)), Shape::solid(Region::new(3, 3, 2, 2))]),
            PhantomSpec::composite(10, 10, vec![]),
        ];
        for spec in &bad {
            assert!(matches!(generate(spec).unwrap_err(), Error::SpecOutOfBounds(_)), "{spec:?}");
        }
    }

    #[test]
    fn dataset_deterministic_and_balanced() {
        let a = generate_dataset(50, 7).unwrap();
        assert_eq!(a, generate_dataset(50, 7).unwrap());
        assert_ne!(a, generate_dataset(50, 8).unwrap());
        assert_eq!(a.len(), 150);
        for label in ClassLabel::ALL {
            assert_eq!(a.class_count(label), 50);
        }
    }

    #[test]
    fn dataset_entries_match_closed_form() {
        for e in dataset_entries(10, 3).unwrap() {
            check(&e.spec);
        }
    }

    #[test]
    fn dataset_class_ordering() {
        let ds = generate_dataset(50, 11).unwrap();
        let mean = |label: ClassLabel, f: &dyn Fn(&FeatureRecord) -> f64| {
            let v: Vec<f64> = ds.items.iter().filter(|i| i.label == label).map(|i| f(&i.record)).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let p = |r: &FeatureRecord| r.p;
        let w_avg = |r: &FeatureRecord| r.w_avg.unwrap_or(0.0);
        assert!(mean(ClassLabel::Eyes, &p) > mean(ClassLabel::BrainNoEyes, &p));
        let no_brain = mean(ClassLabel::NoBrain, &w_avg);
        assert!(no_brain > mean(ClassLabel::Eyes, &w_avg));
        assert!(no_brain > mean(ClassLabel::BrainNoEyes, &w_avg));
    }

    #[test]
    fn series_faulty_slice() {
        let slices = generate_series(&SeriesSpec { length: 32, faulty: Some(31), seed: 1 }).unwrap();
        assert_eq!(slices.len(), 32);
        assert_eq!(slices.iter().filter(|s| s.faulty).count(), 1);
        assert!(slices.windows(2).all(|w| w[0].id < w[1].id));
        for s in &slices {
            let img = s.spec.render().unwrap();
            let a = analyze(&img, &threshold_config(), &s.id).unwrap();
            assert_eq!(a.record, s.spec.expected_record(&s.id).unwrap());
        }
        assert!(generate_series(&SeriesSpec { length: 2, faulty: None, seed: 1 }).is_err());
        assert!(generate_series(&SeriesSpec { length: 5, faulty: Some(5), seed: 1 }).is_err());
    }
}
