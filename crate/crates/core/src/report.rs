//! JSON schemas shared by the CLI and downstream consumers.
//!
//! Every document carries `format_version`; bump [`FORMAT_VERSION`] on any
//! incompatible change. PSNR infinities are written as the string `"inf"`,
//! undefined p-values as `"n/a"`.

use serde::{Deserialize, Serialize};

use crate::degrade::{DegradationSpec, Provenance};
use crate::evaluate::MetricPairSummary;
use crate::io::HuWindow;
use crate::metrics::MetricSample;
use crate::stats::WilcoxonResult;

pub const FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Significance level for the baseline-vs-proposed flags.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Settings that every metric report records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub format_version: u32,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    pub max_i: f64,
    pub tol_mm: f64,
    /// Window used to normalize HU inputs; `None` when inputs were used as is.
    pub hu_window: Option<HuWindow>,
    /// Denominator of the reported standard deviations.
    pub std_denominator: String,
}

impl ReportMeta {
    pub fn new(max_i: f64, tol_mm: f64, hu_window: Option<HuWindow>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            generated_at: None,
            max_i,
            tol_mm,
            hu_window,
            std_denominator: "population".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    #[serde(flatten)]
    pub meta: ReportMeta,
    pub pair_id: String,
    pub prediction: String,
    pub reference: String,
    pub n_matched_slices: usize,
    /// Summary over per-slice samples.
    pub slice_summary: MetricPairSummary,
    /// Single sample over all matched voxels.
    pub volume: MetricSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairProvenance {
    pub pair_id: String,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Whether a method differs significantly from the proposed method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignificanceFlags {
    pub psnr_db: bool,
    pub rmse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub n_slices: usize,
    pub n_volumes: usize,
    /// Aggregated over all aligned slices of all pairs.
    pub slice: MetricPairSummary,
    /// Aggregated over per-volume samples.
    pub volume: MetricPairSummary,
    /// Slice-level Wilcoxon p < [`SIGNIFICANCE_LEVEL`] against the proposed
    /// method; absent for the proposed method itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub significant_vs_proposed: Option<SignificanceFlags>,
    pub runs: Vec<PairProvenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceEntry {
    pub baseline: String,
    pub reference: String,
    pub metric: String,
    pub granularity: String,
    /// Paired samples entering the test (before dropping zero differences).
    pub n_paired: usize,
    #[serde(with = "p_value_or_na")]
    pub p_value: Option<f64>,
    pub significant: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wilcoxon: Option<WilcoxonResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    #[serde(flatten)]
    pub meta: ReportMeta,
    pub dataset_label: String,
    pub thickness_mm: f64,
    pub increment_mm: f64,
    pub n_pairs: usize,
    pub zero_difference_handling: String,
    pub significance_level: f64,
    pub methods: Vec<MethodReport>,
    pub significance: Vec<SignificanceEntry>,
    /// Method labels, best first (highest mean slice PSNR).
    pub ranking_psnr: Vec<String>,
    /// Method labels, best first (lowest mean slice RMSE).
    pub ranking_rmse: Vec<String>,
}

impl ComparisonReport {
    pub fn method(&self, label: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub pair_id: String,
    pub thin_path: String,
    pub thick_path: String,
    pub method: String,
    pub method_params: DegradationSpec,
    pub thickness_mm: f64,
    pub increment_mm: f64,
    pub hu_window: HuWindow,
}

/// Thin/thick training pairs written by `export-pairs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairManifest {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    pub entries: Vec<ManifestEntry>,
}

impl Default for PairManifest {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            generated_at: None,
            entries: Vec::new(),
        }
    }
}

impl PairManifest {
    /// Insert or replace entries by `pair_id`, keeping entries sorted by id.
    pub fn merge(&mut self, entries: impl IntoIterator<Item = ManifestEntry>) {
        for entry in entries {
            match self.entries.iter_mut().find(|e| e.pair_id == entry.pair_id) {
                Some(slot) => *slot = entry,
                None => self.entries.push(entry),
            }
        }
        self.entries.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    }

    pub fn has_unique_ids(&self) -> bool {
        let mut ids: Vec<&str> = self.entries.iter().map(|e| e.pair_id.as_str()).collect();
        ids.sort_unstable();
        ids.windows(2).all(|w| w[0] != w[1])
    }
}

/// `Option<f64>` p-values, `None` written as `"n/a"`.
pub mod p_value_or_na {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(value: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(p) => s.serialize_f64(*p),
            None => s.serialize_str("n/a"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        struct PVisitor;
        impl Visitor<'_> for PVisitor {
            type Value = Option<f64>;
            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("a p-value or \"n/a\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Ok(Some(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(Some(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(Some(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                if v == "n/a" {
                    Ok(None)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(PVisitor)
    }
}
