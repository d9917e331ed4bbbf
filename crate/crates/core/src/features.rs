//! Scalar features, the extraction pipeline and series-level anomaly flags.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::binarize::{binarize, ThresholdConfig};
use crate::imagegrid::{BinaryImage, GrayImage};
use crate::pores::{label_pores, PoreMap};
use crate::tabulate::{row_tabulation, RowTabulation};
use crate::{Error, Result};

fn ratio(num: u64, den: u64) -> f64 {
    num as f64 / den as f64
}

/// Information packing factor `u / (u + z)`, with `total = u + z`.
pub fn ipf(u: u64, total: u64) -> Result<f64> {
    if u == 0 {
        return Err(Error::EmptyForeground);
    }
    if total < u {
        return Err(Error::InconsistentCounts(format!("image size {total} below foreground count {u}")));
    }
    Ok(ratio(u, total))
}

/// Compactness `u / (u + y)`.
pub fn compactness(u: u64, y: u64) -> Result<f64> {
    if u == 0 {
        return Err(Error::EmptyForeground);
    }
    Ok(ratio(u, u + y))
}

/// Scatterness `y / (u + y)`, the complement of compactness.
pub fn scatterness(u: u64, y: u64) -> Result<f64> {
    if u == 0 {
        return Err(Error::EmptyForeground);
    }
    Ok(ratio(y, u + y))
}

/// Porousness `w / (u + w)`.
pub fn porousness(u: u64, w: u64) -> Result<f64> {
    if u == 0 {
        return Err(Error::EmptyForeground);
    }
    Ok(ratio(w, u + w))
}

/// Average pore area `w / n_p`; `None` when there are no pores.
pub fn average_pore_area(w: u64, n_p: u64) -> Result<Option<f64>> {
    match (w, n_p) {
        (0, 0) => Ok(None),
        (w, 0) => Err(Error::InconsistentCounts(format!("pore area {w} with zero pores"))),
        (w, n) => Ok(Some(ratio(w, n))),
    }
}

/// Feature values of one image. The integer counts are canonical; the
/// fractions are derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub source_id: String,
    pub rows: usize,
    pub cols: usize,
    pub threshold: u8,
    pub u: u64,
    pub z: u64,
    pub y: u64,
    pub w: u64,
    pub n_p: u64,
    pub ipf: f64,
    pub c: f64,
    pub s: f64,
    pub p: f64,
    pub w_avg: Option<f64>,
}

impl FeatureRecord {
    /// Derives every fraction from the raw counts.
    #[allow(clippy::too_many_arguments)]
    pub fn from_counts(
        source_id: impl Into<String>,
        rows: usize,
        cols: usize,
        threshold: u8,
        u: u64,
        y: u64,
        w: u64,
        n_p: u64,
    ) -> Result<Self> {
        let total = (rows * cols) as u64;
        let ipf = ipf(u, total)?;
        Ok(Self {
            source_id: source_id.into(),
            rows,
            cols,
            threshold,
            u,
            z: total - u,
            y,
            w,
            n_p,
            ipf,
            c: compactness(u, y)?,
            s: scatterness(u, y)?,
            p: porousness(u, w)?,
            w_avg: average_pore_area(w, n_p)?,
        })
    }

    pub fn value(&self, feature: Feature) -> f64 {
        match feature {
            Feature::Ipf => self.ipf,
            Feature::Compactness => self.c,
            Feature::PoreArea => self.w as f64,
            Feature::PoreCount => self.n_p as f64,
            Feature::Porousness => self.p,
        }
    }
}

pub const CSV_HEADER: &str = "source_id,rows,cols,threshold,u,z,y,w,n_p,ipf,c,s,p,w_avg";

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

/// One CSV line (no trailing newline); fractions with 6 decimals and an
/// empty field for a missing average pore area.
pub fn record_csv_line(r: &FeatureRecord) -> String {
    let w_avg = r.w_avg.map(|v| format!("{v:.6}")).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
        csv_field(&r.source_id),
        r.rows,
        r.cols,
        r.threshold,
        r.u,
        r.z,
        r.y,
        r.w,
        r.n_p,
        r.ipf,
        r.c,
        r.s,
        r.p,
        w_avg
    )
}

pub fn records_csv(records: &[FeatureRecord]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in records {
        out.push_str(&record_csv_line(r));
        out.push('\n');
    }
    out
}

pub fn records_json(records: &[FeatureRecord]) -> Result<String> {
    let mut text = serde_json::to_string_pretty(records)?;
    text.push('\n');
    Ok(text)
}

/// Every intermediate of one extraction.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub binary: BinaryImage,
    pub pores: PoreMap,
    pub tabulation: RowTabulation,
    pub record: FeatureRecord,
}

pub fn analyze_binary(binary: BinaryImage, source_id: &str) -> Result<Analysis> {
    let pores = label_pores(&binary);
    let tabulation = row_tabulation(&binary, &pores)?;
    let t = &tabulation.totals;
    let record = FeatureRecord::from_counts(
        source_id,
        binary.rows(),
        binary.cols(),
        binary.threshold(),
        t.foreground,
        t.scatter,
        t.pore,
        pores.count() as u64,
    )?;
    Ok(Analysis { binary, pores, tabulation, record })
}

/// Binarizes, labels pores, tabulates and derives all features.
pub fn analyze(img: &GrayImage, cfg: &ThresholdConfig, source_id: &str) -> Result<Analysis> {
    analyze_binary(binarize(img, cfg)?, source_id)
}

pub fn extract(img: &GrayImage, cfg: &ThresholdConfig, source_id: &str) -> Result<FeatureRecord> {
    analyze(img, cfg, source_id).map(|a| a.record)
}

/// One of the five classifier inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feature {
    #[serde(rename = "ipf")]
    Ipf,
    #[serde(rename = "c")]
    Compactness,
    #[serde(rename = "w")]
    PoreArea,
    #[serde(rename = "n_p")]
    PoreCount,
    #[serde(rename = "p")]
    Porousness,
}

impl Feature {
    pub fn name(self) -> &'static str {
        match self {
            Feature::Ipf => "ipf",
            Feature::Compactness => "c",
            Feature::PoreArea => "w",
            Feature::PoreCount => "n_p",
            Feature::Porousness => "p",
        }
    }

    /// Parses a comma-separated list such as `ipf,c,w`.
    pub fn parse_list(text: &str) -> Result<Vec<Feature>> {
        let list: Vec<Feature> = text.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?;
        if list.is_empty() {
            return Err(Error::InvalidArgument("empty feature list".into()));
        }
        for (i, f) in list.iter().enumerate() {
            if list[..i].contains(f) {
                return Err(Error::InvalidArgument(format!("feature {} listed twice", f.name())));
            }
        }
        Ok(list)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ipf" => Ok(Feature::Ipf),
            "c" => Ok(Feature::Compactness),
            "w" => Ok(Feature::PoreArea),
            "n_p" | "np" => Ok(Feature::PoreCount),
            "p" => Ok(Feature::Porousness),
            other => Err(Error::InvalidArgument(format!("unknown feature {other:?}"))),
        }
    }
}

/// The four preset feature combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Combo {
    C1,
    C2,
    C3,
    C4,
}

impl Combo {
    pub const ALL: [Combo; 4] = [Combo::C1, Combo::C2, Combo::C3, Combo::C4];

    pub fn features(self) -> &'static [Feature] {
        use Feature::*;
        match self {
            Combo::C1 => &[Ipf, Compactness, PoreArea],
            Combo::C2 => &[Ipf, Compactness, PoreArea, PoreCount],
            Combo::C3 => &[Ipf, Compactness, PoreArea, Porousness],
            Combo::C4 => &[Ipf, Compactness, PoreArea, PoreCount, Porousness],
        }
    }
}

impl FromStr for Combo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "C1" => Ok(Combo::C1),
            "C2" => Ok(Combo::C2),
            "C3" => Ok(Combo::C3),
            "C4" => Ok(Combo::C4),
            other => Err(Error::InvalidArgument(format!("unknown combination {other:?}"))),
        }
    }
}

pub fn combo(rec: &FeatureRecord, which: Combo) -> Vec<f64> {
    feature_vector(rec, which.features())
}

pub fn feature_vector(rec: &FeatureRecord, features: &[Feature]) -> Vec<f64> {
    features.iter().map(|&f| rec.value(f)).collect()
}

pub const DEFAULT_ANOMALY_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesReport {
    /// Sorted by `source_id`.
    pub records: Vec<FeatureRecord>,
    pub flags: Vec<bool>,
    pub factor: f64,
}

impl SeriesReport {
    /// CSV with columns `slice_id,ipf,c,p,w_avg,flagged`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slice_id,ipf,c,p,w_avg,flagged\n");
        for (r, flag) in self.records.iter().zip(&self.flags) {
            let w_avg = r.w_avg.map(|v| format!("{v:.6}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{},{}\n",
                csv_field(&r.source_id),
                r.ipf,
                r.c,
                r.p,
                w_avg,
                flag
            ));
        }
        out
    }

    pub fn flagged_ids(&self) -> Vec<&str> {
        self.records
            .iter()
            .zip(&self.flags)
            .filter(|(_, &f)| f)
            .map(|(r, _)| r.source_id.as_str())
            .collect()
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Flags slices whose average pore area exceeds `factor` times the series
/// median. Slices without pores never flag.
pub fn flag_anomalies(series: Vec<FeatureRecord>, factor: f64) -> Result<SeriesReport> {
    if series.len() < 3 {
        return Err(Error::SeriesTooShort(series.len()));
    }
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::InvalidArgument(format!("anomaly factor {factor} must be positive")));
    }
    let mut records = series;
    records.sort_by(|a, b| a.source_id.cmp(&b.source_id));
    let mut present: Vec<f64> = records.iter().filter_map(|r| r.w_avg).collect();
    present.sort_by(f64::total_cmp);
    let flags = if present.is_empty() {
        vec![false; records.len()]
    } else {
        let cutoff = factor * median(&present);
        records.iter().map(|r| r.w_avg.is_some_and(|v| v > cutoff)).collect()
    };
    Ok(SeriesReport { records, flags, factor })
}
