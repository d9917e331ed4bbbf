//! Image containers, grayscale file I/O and the right-angle transforms.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Background,
    Foreground,
}

/// Which side of the threshold holds the background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Background is dark: intensities above the threshold are foreground.
    #[default]
    DarkBackground,
    /// Background is light: intensities at or below the threshold are foreground.
    LightBackground,
}

/// Clockwise rotation by a multiple of 90 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rotation {
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 3] = [Rotation::R90, Rotation::R180, Rotation::R270];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlipAxis {
    /// Mirror left to right; each row is reversed.
    Horizontal,
    /// Mirror top to bottom; row order is reversed.
    Vertical,
}

impl FlipAxis {
    pub const ALL: [FlipAxis; 2] = [FlipAxis::Horizontal, FlipAxis::Vertical];
}

fn rotate_cells<T: Copy>(rows: usize, cols: usize, data: &[T], rotation: Rotation) -> (usize, usize, Vec<T>) {
    let mut out = Vec::with_capacity(data.len());
    match rotation {
        Rotation::R90 => {
            for r in 0..cols {
                for c in 0..rows {
                    out.push(data[(rows - 1 - c) * cols + r]);
                }
            }
            (cols, rows, out)
        }
        Rotation::R180 => {
            out.extend(data.iter().rev());
            (rows, cols, out)
        }
        Rotation::R270 => {
            for r in 0..cols {
                for c in 0..rows {
                    out.push(data[c * cols + (cols - 1 - r)]);
                }
            }
            (cols, rows, out)
        }
    }
}

fn flip_cells<T: Copy>(rows: usize, cols: usize, data: &[T], axis: FlipAxis) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len());
    match axis {
        FlipAxis::Horizontal => {
            for row in data.chunks_exact(cols) {
                out.extend(row.iter().rev());
            }
        }
        FlipAxis::Vertical => {
            for r in (0..rows).rev() {
                out.extend_from_slice(&data[r * cols..(r + 1) * cols]);
            }
        }
    }
    out
}

/// A rectangular grid of 8-bit intensities stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyInput);
        }
        if pixels.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for a {rows}x{cols} grid",
                pixels.len()
            )));
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn filled(rows: usize, cols: usize, value: u8) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.cols + col]
    }

    pub fn histogram(&self) -> [u64; 256] {
        let mut hist = [0u64; 256];
        for &p in &self.pixels {
            hist[p as usize] += 1;
        }
        hist
    }

    pub fn rotate(&self, rotation: Rotation) -> Self {
        let (rows, cols, pixels) = rotate_cells(self.rows, self.cols, &self.pixels, rotation);
        Self { rows, cols, pixels }
    }

    pub fn flip(&self, axis: FlipAxis) -> Self {
        let pixels = flip_cells(self.rows, self.cols, &self.pixels, axis);
        Self { rows: self.rows, cols: self.cols, pixels }
    }
}

/// A two-level segmentation together with the cut that produced it.
///
/// Always holds at least one foreground pixel: an image with nothing to
/// analyse has no defined features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    rows: usize,
    cols: usize,
    labels: Vec<Label>,
    threshold: u8,
    polarity: Polarity,
}

impl BinaryImage {
    pub fn new(rows: usize, cols: usize, labels: Vec<Label>, threshold: u8, polarity: Polarity) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyInput);
        }
        if labels.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for a {rows}x{cols} grid",
                labels.len()
            )));
        }
        if !labels.contains(&Label::Foreground) {
            return Err(Error::EmptyForeground);
        }
        Ok(Self { rows, cols, labels, threshold, polarity })
    }

    /// Builds an image from a boolean foreground mask, recording threshold 0
    /// and a dark background.
    pub fn from_mask(rows: usize, cols: usize, mask: &[bool]) -> Result<Self> {
        let labels = mask
            .iter()
            .map(|&f| if f { Label::Foreground } else { Label::Background })
            .collect();
        Self::new(rows, cols, labels, 0, Polarity::DarkBackground)
    }

    /// Parses rows of `0`/`1` characters, e.g. `["0110", "1110"]`.
    pub fn from_rows(rows: &[&str]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut mask = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::RaggedRows { line: i + 1, expected: cols, found: row.len() });
            }
            for ch in row.chars() {
                match ch {
                    '0' => mask.push(false),
                    '1' => mask.push(true),
                    other => return Err(Error::ValueOutOfRange(format!("mask character {other:?}"))),
                }
            }
        }
        Self::from_mask(rows.len(), cols, &mask)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn threshold(&self) -> u8 {
        self.threshold
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn get(&self, row: usize, col: usize) -> Label {
        self.labels[row * self.cols + col]
    }

    pub fn is_foreground(&self, row: usize, col: usize) -> bool {
        self.get(row, col) == Label::Foreground
    }

    pub fn foreground_count(&self) -> u64 {
        self.labels.iter().filter(|&&l| l == Label::Foreground).count() as u64
    }

    pub fn background_count(&self) -> u64 {
        (self.labels.len() as u64) - self.foreground_count()
    }

    pub fn rotate(&self, rotation: Rotation) -> Self {
        let (rows, cols, labels) = rotate_cells(self.rows, self.cols, &self.labels, rotation);
        Self { rows, cols, labels, ..*self }
    }

    pub fn flip(&self, axis: FlipAxis) -> Self {
        let labels = flip_cells(self.rows, self.cols, &self.labels, axis);
        Self { labels, ..*self }
    }

    /// Renders foreground as 255 and background as 0.
    pub fn to_gray(&self) -> GrayImage {
        let pixels = self
            .labels
            .iter()
            .map(|&l| if l == Label::Foreground { 255 } else { 0 })
            .collect();
        GrayImage { rows: self.rows, cols: self.cols, pixels }
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    /// Reads the next unsigned decimal token, or `None` at end of stream.
    fn next_number(&mut self) -> std::result::Result<Option<u64>, String> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            if self.pos == self.bytes.len() {
                return Ok(None);
            }
            return Err(format!("unexpected byte 0x{:02x} at offset {}", self.bytes[self.pos], self.pos));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse::<u64>().map(Some).map_err(|e| format!("{text}: {e}"))
    }

    fn header_field(&mut self, name: &str) -> Result<u64> {
        match self.next_number() {
            Ok(Some(v)) => Ok(v),
            Ok(None) => Err(Error::MalformedHeader(format!("missing {name}"))),
            Err(e) => Err(Error::MalformedHeader(format!("{name}: {e}"))),
        }
    }
}

fn rescale(value: u64, maxval: u64) -> u8 {
    if maxval == 255 {
        return value as u8;
    }
    // round(value * 255 / maxval), halves away from zero
    ((value * 255 * 2 + maxval) / (2 * maxval)) as u8
}

/// Decodes a PGM stream (`P2` or `P5`), rescaling to 0..=255 when the
/// declared maxval differs from 255.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 {
        return Err(Error::MalformedHeader("stream shorter than magic number".into()));
    }
    let binary = match &bytes[..2] {
        b"P2" => false,
        b"P5" => true,
        other => return Err(Error::UnsupportedMagic(String::from_utf8_lossy(other).into_owned())),
    };
    let mut reader = HeaderReader { bytes, pos: 2 };
    if reader.pos < bytes.len() && !bytes[reader.pos].is_ascii_whitespace() && bytes[reader.pos] != b'#' {
        return Err(Error::MalformedHeader("missing separator after magic number".into()));
    }
    let width = reader.header_field("width")? as usize;
    let height = reader.header_field("height")? as usize;
    let maxval = reader.header_field("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!("zero dimension {width}x{height}")));
    }
    if !(1..=65535).contains(&maxval) {
        return Err(Error::MalformedHeader(format!("maxval {maxval} outside 1..=65535")));
    }
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| Error::MalformedHeader(format!("dimensions {width}x{height} overflow")))?;

    let mut pixels = Vec::with_capacity(expected);
    let check = |v: u64| {
        if v > maxval {
            Err(Error::ValueOutOfRange(format!("sample {v} exceeds maxval {maxval}")))
        } else {
            Ok(rescale(v, maxval))
        }
    };
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if reader.pos >= bytes.len() || !bytes[reader.pos].is_ascii_whitespace() {
            return Err(Error::TruncatedData { expected, found: 0 });
        }
        let data = &bytes[reader.pos + 1..];
        let width_bytes = if maxval < 256 { 1 } else { 2 };
        let found = data.len() / width_bytes;
        if found < expected {
            return Err(Error::TruncatedData { expected, found });
        }
        if width_bytes == 1 {
            for &b in &data[..expected] {
                pixels.push(check(b as u64)?);
            }
        } else {
            for pair in data[..expected * 2].chunks_exact(2) {
                pixels.push(check(u16::from_be_bytes([pair[0], pair[1]]) as u64)?);
            }
        }
    } else {
        while pixels.len() < expected {
            match reader.next_number() {
                Ok(Some(v)) => pixels.push(check(v)?),
                Ok(None) => return Err(Error::TruncatedData { expected, found: pixels.len() }),
                Err(e) => return Err(Error::ValueOutOfRange(e)),
            }
        }
    }
    GrayImage::new(height, width, pixels)
}

/// Encodes as binary PGM with maxval 255.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.cols, img.rows).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Parses the grid CSV fixture format: one image row per line,
/// comma-separated integers in 0..=255.
pub fn load_grid_csv(text: &str) -> Result<GrayImage> {
    let mut lines: Vec<&str> = text.split('\n').collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    if lines.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut cols = 0;
    let mut pixels = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        let fields: Vec<&str> = line.split(',').collect();
        if i == 0 {
            cols = fields.len();
        } else if fields.len() != cols {
            return Err(Error::RaggedRows { line: i + 1, expected: cols, found: fields.len() });
        }
        for field in fields {
            let field = field.trim();
            let value: i64 = field
                .parse()
                .map_err(|_| Error::ValueOutOfRange(format!("line {}: {field:?} is not an integer", i + 1)))?;
            if !(0..=255).contains(&value) {
                return Err(Error::ValueOutOfRange(format!("line {}: {value} outside 0..=255", i + 1)));
            }
            pixels.push(value as u8);
        }
    }
    GrayImage::new(lines.len(), cols, pixels)
}

pub fn write_grid_csv(img: &GrayImage) -> String {
    let mut out = String::with_capacity(img.pixels.len() * 4);
    for row in img.pixels.chunks_exact(img.cols) {
        for (i, p) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{p}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Reads a grid CSV (`.csv` extension) or a PGM file (anything else).
pub fn read_image_file(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path)?;
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::ValueOutOfRange(format!("not UTF-8: {e}")))?;
        load_grid_csv(text)
    } else {
        load_pgm(&bytes)
    }
}
