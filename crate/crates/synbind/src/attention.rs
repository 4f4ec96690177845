//! Token-to-patch attention maps and their containers.
//!
//! Every prompt token owns a probability distribution over the patches of a
//! D×D grid. Maps are epsilon-floored so that Kullback-Leibler terms stay
//! finite on disjoint supports: after normalization each entry is at least
//! `EPS_FLOOR / (1 + P·EPS_FLOOR)` for a map of `P` patches.
//!
//! Two construction routes exist. Externally dumped maps arrive as
//! non-negative scores in tokens→patches orientation and are row-normalized
//! ([`normalize_rows`]); the toy model parameterizes maps as logits pushed
//! through a per-token softmax ([`AttentionTensor::from_logits`]), which is
//! the differentiable path used by [`crate::loss::grad_scores`].

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Floor added to every map entry before renormalization.
pub const EPS_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum AttentionError {
    #[error("row {row}: non-finite entry")]
    NonFinite { row: usize },
    #[error("row {row}: negative entry")]
    Negative { row: usize },
    #[error("row {row}: all entries are zero")]
    ZeroRow { row: usize },
    #[error("expected {expected} entries per map, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("matrix data length {len} does not match {rows}x{cols}")]
    BadMatrixShape { len: usize, rows: usize, cols: usize },
    #[error("word {word} has an empty piece list")]
    EmptyPieces { word: usize },
    #[error("piece {piece} is assigned to more than one word")]
    OverlappingPieces { piece: usize },
    #[error("piece {piece} is out of range for a tensor of {rows} rows")]
    PieceOutOfRange { piece: usize, rows: usize },
    #[error("attention tensor has no maps")]
    Empty,
    #[error("grid side {grid_side} does not describe {patches} patches")]
    NotSquare { grid_side: usize, patches: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// One token's probability distribution over patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionMap {
    values: Vec<f64>,
}

impl AttentionMap {
    /// Normalize a row of non-negative scores into a floored distribution.
    pub fn from_raw(row: &[f64]) -> Result<Self, AttentionError> {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(AttentionError::NonFinite { row: 0 });
        }
        if row.iter().any(|v| *v < 0.0) {
            return Err(AttentionError::Negative { row: 0 });
        }
        let sum: f64 = row.iter().sum();
        if sum <= 0.0 {
            return Err(AttentionError::ZeroRow { row: 0 });
        }
        Ok(Self::floor_normalized(row.iter().map(|v| v / sum)))
    }

    /// Softmax of a token's logits, then the epsilon floor.
    pub fn from_logits(logits: &[f64]) -> Result<Self, AttentionError> {
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(AttentionError::NonFinite { row: 0 });
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
        let sum: f64 = exp.iter().sum();
        Ok(Self::floor_normalized(exp.iter().map(|e| e / sum)))
    }

    fn floor_normalized(probs: impl Iterator<Item = f64>) -> Self {
        let raised: Vec<f64> = probs.map(|p| p + EPS_FLOOR).collect();
        let scale = 1.0 + raised.len() as f64 * EPS_FLOOR;
        AttentionMap {
            values: raised.into_iter().map(|p| p / scale).collect(),
        }
    }

    pub fn uniform(len: usize) -> Self {
        Self::floor_normalized(std::iter::repeat_n(1.0 / len as f64, len))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the most attended patch; first index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

/// All token maps of one prompt. `grid_side` records the patch-grid side for
/// rendering; tests may carry degenerate patch counts that are not squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionTensor {
    maps: Vec<AttentionMap>,
    grid_side: usize,
}

impl AttentionTensor {
    pub fn new(maps: Vec<AttentionMap>, grid_side: usize) -> Result<Self, AttentionError> {
        let Some(first) = maps.first() else {
            return Err(AttentionError::Empty);
        };
        let expected = first.len();
        for map in &maps {
            if map.len() != expected {
                return Err(AttentionError::ShapeMismatch {
                    expected,
                    found: map.len(),
                });
            }
        }
        Ok(AttentionTensor { maps, grid_side })
    }

    /// Per-token softmax over each row of a logit matrix.
    pub fn from_logits(scores: &ScoreMatrix) -> Result<Self, AttentionError> {
        let maps = (0..scores.n_rows())
            .map(|r| {
                AttentionMap::from_logits(scores.row(r))
                    .map_err(|_| AttentionError::NonFinite { row: r })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(maps, scores.grid_side())
    }

    pub fn maps(&self) -> &[AttentionMap] {
        &self.maps
    }

    pub fn map(&self, row: usize) -> Option<&AttentionMap> {
        self.maps.get(row)
    }

    pub fn n_maps(&self) -> usize {
        self.maps.len()
    }

    pub fn n_patches(&self) -> usize {
        self.maps[0].len()
    }

    pub fn grid_side(&self) -> usize {
        self.grid_side
    }
}

/// Row-normalize a tokens→patches score matrix into an [`AttentionTensor`].
///
/// The input is the transpose of a model-native patches→tokens matrix; each
/// row is divided by its sum and then floored.
pub fn normalize_rows(rows: &[Vec<f64>], grid_side: usize) -> Result<AttentionTensor, AttentionError> {
    let maps = rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            AttentionMap::from_raw(row).map_err(|e| match e {
                AttentionError::NonFinite { .. } => AttentionError::NonFinite { row: r },
                AttentionError::Negative { .. } => AttentionError::Negative { row: r },
                AttentionError::ZeroRow { .. } => AttentionError::ZeroRow { row: r },
                other => other,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    AttentionTensor::new(maps, grid_side)
}

/// Dense row-major matrix of raw scores or logits, one row per token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    n_rows: usize,
    grid_side: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn zeros(n_rows: usize, grid_side: usize) -> Self {
        ScoreMatrix {
            n_rows,
            grid_side,
            data: vec![0.0; n_rows * grid_side * grid_side],
        }
    }

    pub fn from_data(n_rows: usize, grid_side: usize, data: Vec<f64>) -> Result<Self, AttentionError> {
        let cols = grid_side * grid_side;
        if data.len() != n_rows * cols {
            return Err(AttentionError::BadMatrixShape {
                len: data.len(),
                rows: n_rows,
                cols,
            });
        }
        Ok(ScoreMatrix {
            n_rows,
            grid_side,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn grid_side(&self) -> usize {
        self.grid_side
    }

    pub fn patch_count(&self) -> usize {
        self.grid_side * self.grid_side
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.patch_count();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.patch_count();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Word-to-piece alignment: maps each 1-based prompt word index to the
/// tensor rows holding its word pieces. Rows for special tokens simply do
/// not appear in the mapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PieceAlignment {
    words: BTreeMap<usize, Vec<usize>>,
}

impl PieceAlignment {
    /// Build from an explicit map, checking pieces are non-empty and disjoint.
    pub fn from_map(words: BTreeMap<usize, Vec<usize>>) -> Result<Self, AttentionError> {
        let mut seen = std::collections::BTreeSet::new();
        for (&word, pieces) in &words {
            if pieces.is_empty() {
                return Err(AttentionError::EmptyPieces { word });
            }
            for &p in pieces {
                if !seen.insert(p) {
                    return Err(AttentionError::OverlappingPieces { piece: p });
                }
            }
        }
        Ok(PieceAlignment { words })
    }

    /// Word `i` maps to row `i - 1`: single-piece words, no special tokens.
    pub fn identity(n_words: usize) -> Self {
        PieceAlignment {
            words: (1..=n_words).map(|w| (w, vec![w - 1])).collect(),
        }
    }

    /// Consecutive piece blocks: `counts[i]` pieces for word `i + 1`.
    pub fn from_piece_counts(counts: &[usize]) -> Result<Self, AttentionError> {
        let mut words = BTreeMap::new();
        let mut next = 0usize;
        for (i, &count) in counts.iter().enumerate() {
            if count == 0 {
                return Err(AttentionError::EmptyPieces { word: i + 1 });
            }
            words.insert(i + 1, (next..next + count).collect());
            next += count;
        }
        Ok(PieceAlignment { words })
    }

    pub fn pieces(&self, word: usize) -> Option<&[usize]> {
        self.words.get(&word).map(|v| v.as_slice())
    }

    pub fn words(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.words.iter().map(|(&w, p)| (w, p.as_slice()))
    }

    pub fn n_pieces(&self) -> usize {
        self.words.values().map(|v| v.len()).sum()
    }

    /// Check every piece index fits a tensor of `rows` rows.
    pub fn validate_rows(&self, rows: usize) -> Result<(), AttentionError> {
        for pieces in self.words.values() {
            for &p in pieces {
                if p >= rows {
                    return Err(AttentionError::PieceOutOfRange { piece: p, rows });
                }
            }
        }
        Ok(())
    }
}

/// Wire format for attention tensors: `{ "grid_side": D, "maps": [[..], ..] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorRecord {
    pub grid_side: usize,
    pub maps: Vec<Vec<f64>>,
}

impl TensorRecord {
    pub fn from_tensor(tensor: &AttentionTensor) -> Self {
        TensorRecord {
            grid_side: tensor.grid_side(),
            maps: tensor.maps().iter().map(|m| m.values().to_vec()).collect(),
        }
    }

    /// Re-normalize the stored rows into a tensor.
    pub fn into_tensor(self) -> Result<AttentionTensor, AttentionError> {
        normalize_rows(&self.maps, self.grid_side)
    }
}

pub fn write_tensor_json(tensor: &AttentionTensor, w: &mut impl Write) -> Result<(), AttentionError> {
    serde_json::to_writer(&mut *w, &TensorRecord::from_tensor(tensor))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_tensor_json(r: impl std::io::Read) -> Result<AttentionTensor, AttentionError> {
    let record: TensorRecord = serde_json::from_reader(r)?;
    record.into_tensor()
}

/// One CSV row per token, shortest round-trip decimals.
pub fn write_tensor_csv(tensor: &AttentionTensor, w: impl Write) -> Result<(), AttentionError> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for map in tensor.maps() {
        writer.serialize(map.values())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_tensor_csv(r: impl BufRead, grid_side: usize) -> Result<AttentionTensor, AttentionError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(r);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.deserialize() {
        let row: Vec<f64> = record?;
        rows.push(row);
    }
    normalize_rows(&rows, grid_side)
}
