//! Fine-grained concept-separation metrics over annotation records.
//!
//! Annotators count, per prompt, how many attributes landed on the right
//! entity, how many leaked somewhere wrong (once per attribute, however many
//! wrong targets it touched), and how many of the mentioned entities were
//! depicted at all. The corpus-level metrics are micro-averages: counts are
//! summed before dividing, so concatenating corpora composes by weight.
//! Macro averages (mean of per-record ratios) are available separately for
//! analysis.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("record {row} ({prompt_id}): {detail}")]
    InvalidRecord {
        row: usize,
        prompt_id: String,
        detail: String,
    },
    #[error("no attributes in the corpus; proper/improper binding are undefined")]
    ZeroAttributes,
    #[error("no entities in the corpus; entity neglect is undefined")]
    ZeroEntities,
    #[error("no records with a nonzero denominator for a macro average")]
    EmptyMacro,
    #[error("row {row}: {source}")]
    Csv {
        row: usize,
        #[source]
        source: csv::Error,
    },
    #[error("row {row}: {source}")]
    Json {
        row: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-prompt annotation counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub prompt_id: String,
    pub total_attributes: u64,
    pub correctly_mapped: u64,
    /// Counted per attribute: several wrong targets of one attribute still
    /// count once.
    pub incorrectly_mapped_attributes: u64,
    pub entities_in_prompt: u64,
    pub entities_depicted: u64,
}

impl AnnotationRecord {
    pub fn validate(&self, row: usize) -> Result<(), MetricsError> {
        let fail = |detail: String| MetricsError::InvalidRecord {
            row,
            prompt_id: self.prompt_id.clone(),
            detail,
        };
        if self.correctly_mapped > self.total_attributes {
            return Err(fail(format!(
                "correctly_mapped {} exceeds total_attributes {}",
                self.correctly_mapped, self.total_attributes
            )));
        }
        if self.incorrectly_mapped_attributes > self.total_attributes {
            return Err(fail(format!(
                "incorrectly_mapped_attributes {} exceeds total_attributes {}",
                self.incorrectly_mapped_attributes, self.total_attributes
            )));
        }
        if self.entities_depicted > self.entities_in_prompt {
            return Err(fail(format!(
                "entities_depicted {} exceeds entities_in_prompt {}",
                self.entities_depicted, self.entities_in_prompt
            )));
        }
        Ok(())
    }
}

fn attribute_totals(records: &[AnnotationRecord]) -> Result<(u64, u64, u64), MetricsError> {
    let total: u64 = records.iter().map(|r| r.total_attributes).sum();
    if total == 0 {
        return Err(MetricsError::ZeroAttributes);
    }
    let correct = records.iter().map(|r| r.correctly_mapped).sum();
    let incorrect = records.iter().map(|r| r.incorrectly_mapped_attributes).sum();
    Ok((total, correct, incorrect))
}

/// Ratio of correctly mapped attributes to all attributes (micro-average).
pub fn proper_binding(records: &[AnnotationRecord]) -> Result<f64, MetricsError> {
    let (total, correct, _) = attribute_totals(records)?;
    Ok(correct as f64 / total as f64)
}

/// Ratio of incorrectly mapped attributes to all attributes (micro-average).
/// Proper and improper binding need not sum to one: an attribute can be
/// placed correctly and still leak elsewhere.
pub fn improper_binding(records: &[AnnotationRecord]) -> Result<f64, MetricsError> {
    let (total, _, incorrect) = attribute_totals(records)?;
    Ok(incorrect as f64 / total as f64)
}

/// Complement of the ratio of mentioned entities that are depicted.
pub fn entity_neglect(records: &[AnnotationRecord]) -> Result<f64, MetricsError> {
    let mentioned: u64 = records.iter().map(|r| r.entities_in_prompt).sum();
    if mentioned == 0 {
        return Err(MetricsError::ZeroEntities);
    }
    let depicted: u64 = records.iter().map(|r| r.entities_depicted).sum();
    Ok(1.0 - depicted as f64 / mentioned as f64)
}

fn macro_mean(
    records: &[AnnotationRecord],
    ratio: impl Fn(&AnnotationRecord) -> Option<f64>,
) -> Result<f64, MetricsError> {
    let ratios: Vec<f64> = records.iter().filter_map(ratio).collect();
    if ratios.is_empty() {
        return Err(MetricsError::EmptyMacro);
    }
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
}

/// Mean of per-record proper-binding ratios; records without attributes are
/// skipped.
pub fn proper_binding_macro(records: &[AnnotationRecord]) -> Result<f64, MetricsError> {
    macro_mean(records, |r| {
        (r.total_attributes > 0).then(|| r.correctly_mapped as f64 / r.total_attributes as f64)
    })
}

/// Mean of per-record improper-binding ratios.
pub fn improper_binding_macro(records: &[AnnotationRecord]) -> Result<f64, MetricsError> {
    macro_mean(records, |r| {
        (r.total_attributes > 0)
            .then(|| r.incorrectly_mapped_attributes as f64 / r.total_attributes as f64)
    })
}

/// Mean of per-record entity-neglect ratios.
pub fn entity_neglect_macro(records: &[AnnotationRecord]) -> Result<f64, MetricsError> {
    macro_mean(records, |r| {
        (r.entities_in_prompt > 0)
            .then(|| 1.0 - r.entities_depicted as f64 / r.entities_in_prompt as f64)
    })
}

/// The three corpus metrics in one JSON-friendly summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub proper_binding: f64,
    pub improper_binding: f64,
    pub entity_neglect: f64,
    pub records: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proper_binding_macro: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub improper_binding_macro: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entity_neglect_macro: Option<f64>,
}

/// Compute the summary; `include_macro` adds the macro-averaged variants.
pub fn summarize(
    records: &[AnnotationRecord],
    include_macro: bool,
) -> Result<MetricsSummary, MetricsError> {
    Ok(MetricsSummary {
        proper_binding: proper_binding(records)?,
        improper_binding: improper_binding(records)?,
        entity_neglect: entity_neglect(records)?,
        records: records.len(),
        proper_binding_macro: include_macro.then(|| proper_binding_macro(records)).transpose()?,
        improper_binding_macro: include_macro
            .then(|| improper_binding_macro(records))
            .transpose()?,
        entity_neglect_macro: include_macro.then(|| entity_neglect_macro(records)).transpose()?,
    })
}

/// Read annotation records from CSV with a header row.
pub fn read_records_csv(r: impl std::io::Read) -> Result<Vec<AnnotationRecord>, MetricsError> {
    let mut reader = csv::Reader::from_reader(r);
    let mut records = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        let record: AnnotationRecord = row.map_err(|source| MetricsError::Csv { row: i + 1, source })?;
        record.validate(i + 1)?;
        records.push(record);
    }
    Ok(records)
}

/// Read annotation records from JSON-lines.
pub fn read_records_jsonl(r: impl BufRead) -> Result<Vec<AnnotationRecord>, MetricsError> {
    let mut records = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AnnotationRecord =
            serde_json::from_str(&line).map_err(|source| MetricsError::Json { row: i + 1, source })?;
        record.validate(i + 1)?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_summary_json(summary: &MetricsSummary, w: &mut impl Write) -> Result<(), MetricsError> {
    serde_json::to_writer_pretty(&mut *w, summary)
        .map_err(|source| MetricsError::Json { row: 0, source })?;
    w.write_all(b"\n")?;
    Ok(())
}
