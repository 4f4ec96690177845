//! Attention-map losses over syntactic binding structures.
//!
//! The distance between two maps is a symmetric Kullback-Leibler divergence.
//! The positive loss sums the distance over every (modifier, noun) pair of
//! every binding set, pulling bound maps together. The negative loss pushes
//! those pairs away from the unmatched words: for each set the sum of
//! `(dist(m, u) + dist(u, n)) / 2` over pairs and unmatched words, scaled by
//! `-1 / |U|`. The total is their plain sum.
//!
//! Words split into several pieces contribute through the piece pair that
//! maximizes the distance; gradients flow only through that pair.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{AttentionMap, AttentionTensor, PieceAlignment, ScoreMatrix, EPS_FLOOR};
use crate::binding::ExtractedSet;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("maps have different sizes: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("word {0} is not present in the piece alignment")]
    UnknownWord(usize),
    #[error("piece {piece} is out of range for a tensor of {rows} maps")]
    PieceOutOfRange { piece: usize, rows: usize },
    #[error("attention error: {0}")]
    Attention(#[from] crate::attention::AttentionError),
}

/// Symmetric Kullback-Leibler divergence between two floored maps, using the
/// natural logarithm: `(D_KL(a||b) + D_KL(b||a)) / 2`, computed in the
/// algebraically equal form `sum((a - b) * (ln a - ln b)) / 2` which is
/// exactly symmetric and non-negative term by term.
pub fn sym_kl(a: &AttentionMap, b: &AttentionMap) -> Result<f64, LossError> {
    if a.len() != b.len() {
        return Err(LossError::DimensionMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let total = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| (x - y) * (x.ln() - y.ln()))
        .sum::<f64>();
    Ok(0.5 * total)
}

/// Distance between two prompt words: the maximum [`sym_kl`] over all piece
/// pairs. Ties keep the earliest pair in piece order.
pub fn word_distance(
    word_a: usize,
    word_b: usize,
    tensor: &AttentionTensor,
    align: &PieceAlignment,
) -> Result<f64, LossError> {
    word_distance_argmax(word_a, word_b, tensor, align).map(|(d, _, _)| d)
}

/// Like [`word_distance`], also reporting the maximizing piece pair.
pub fn word_distance_argmax(
    word_a: usize,
    word_b: usize,
    tensor: &AttentionTensor,
    align: &PieceAlignment,
) -> Result<(f64, usize, usize), LossError> {
    let pieces_a = align
        .pieces(word_a)
        .ok_or(LossError::UnknownWord(word_a))?;
    let pieces_b = align
        .pieces(word_b)
        .ok_or(LossError::UnknownWord(word_b))?;
    let fetch = |piece: usize| {
        tensor.map(piece).ok_or(LossError::PieceOutOfRange {
            piece,
            rows: tensor.n_maps(),
        })
    };
    let mut best: Option<(f64, usize, usize)> = None;
    for &pa in pieces_a {
        for &pb in pieces_b {
            let d = sym_kl(fetch(pa)?, fetch(pb)?)?;
            if best.map(|(bd, _, _)| d > bd).unwrap_or(true) {
                best = Some((d, pa, pb));
            }
        }
    }
    // Alignment guarantees non-empty piece lists.
    Ok(best.expect("piece lists are non-empty"))
}

/// Positive loss: sum of pair distances over all binding sets.
pub fn loss_pos(
    tensor: &AttentionTensor,
    sets: &[ExtractedSet],
    align: &PieceAlignment,
) -> Result<f64, LossError> {
    let mut total = 0.0;
    for set in sets {
        for &(m, n) in &set.pairs.pairs {
            total += word_distance(m, n, tensor, align)?;
        }
    }
    Ok(total)
}

/// Negative loss: for each set, the average pair-to-unmatched distance summed
/// over pairs and unmatched words, scaled by `-1 / |U|`. Sets with an empty
/// unmatched set contribute zero.
pub fn loss_neg(
    tensor: &AttentionTensor,
    sets: &[ExtractedSet],
    align: &PieceAlignment,
) -> Result<f64, LossError> {
    let mut total = 0.0;
    for set in sets {
        let u_len = set.unmatched.tokens.len();
        if u_len == 0 {
            continue;
        }
        let inv = 1.0 / u_len as f64;
        for &(m, n) in &set.pairs.pairs {
            for &u in &set.unmatched.tokens {
                let d_mu = word_distance(m, u, tensor, align)?;
                let d_un = word_distance(u, n, tensor, align)?;
                total -= inv * 0.5 * (d_mu + d_un);
            }
        }
    }
    Ok(total)
}

/// Distance of one (modifier, noun) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub modifier: usize,
    pub noun: usize,
    pub distance: f64,
}

/// Averaged distance of one (pair, unmatched word) combination, before the
/// `1 / |U|` scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnmatchedDistance {
    pub modifier: usize,
    pub noun: usize,
    pub unmatched: usize,
    pub distance: f64,
}

/// Loss totals with the per-term breakdown behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_pos: f64,
    pub l_neg: f64,
    pub l_total: f64,
    pub per_pair: Vec<PairDistance>,
    pub per_unmatched: Vec<UnmatchedDistance>,
}

impl LossReport {
    pub fn zero() -> Self {
        LossReport {
            l_pos: 0.0,
            l_neg: 0.0,
            l_total: 0.0,
            per_pair: Vec::new(),
            per_unmatched: Vec::new(),
        }
    }
}

/// Evaluate both losses and their sum, with per-term breakdowns.
pub fn loss_total(
    tensor: &AttentionTensor,
    sets: &[ExtractedSet],
    align: &PieceAlignment,
) -> Result<LossReport, LossError> {
    let mut report = LossReport::zero();
    for set in sets {
        for &(m, n) in &set.pairs.pairs {
            let d = word_distance(m, n, tensor, align)?;
            report.l_pos += d;
            report.per_pair.push(PairDistance {
                modifier: m,
                noun: n,
                distance: d,
            });
        }
        let u_len = set.unmatched.tokens.len();
        if u_len == 0 {
            continue;
        }
        let inv = 1.0 / u_len as f64;
        for &(m, n) in &set.pairs.pairs {
            for &u in &set.unmatched.tokens {
                let d_mu = word_distance(m, u, tensor, align)?;
                let d_un = word_distance(u, n, tensor, align)?;
                let avg = 0.5 * (d_mu + d_un);
                report.l_neg -= inv * avg;
                report.per_unmatched.push(UnmatchedDistance {
                    modifier: m,
                    noun: n,
                    unmatched: u,
                    distance: avg,
                });
            }
        }
    }
    report.l_total = report.l_pos + report.l_neg;
    Ok(report)
}

/// Partial derivatives of [`sym_kl`] in its symmetric form with respect to
/// each argument's entries.
fn sym_kl_backward(a: &AttentionMap, b: &AttentionMap, coeff: f64, da: &mut [f64], db: &mut [f64]) {
    for (j, (&x, &y)) in a.values().iter().zip(b.values()).enumerate() {
        let log_ratio = x.ln() - y.ln();
        da[j] += coeff * 0.5 * (log_ratio + 1.0 - y / x);
        db[j] += coeff * 0.5 * (1.0 - x / y - log_ratio);
    }
}

/// Analytic gradient of the total loss with respect to the logits that
/// generate the attention maps.
///
/// The forward chain per token is softmax, then the epsilon floor; both are
/// differentiated exactly, so central finite differences on [`loss_total`]
/// composed with [`AttentionTensor::from_logits`] reproduce this gradient.
/// For multi-piece words only the maximizing piece pair receives gradient;
/// ties break toward the earliest pair, matching [`word_distance_argmax`].
pub fn grad_scores(
    scores: &ScoreMatrix,
    sets: &[ExtractedSet],
    align: &PieceAlignment,
) -> Result<ScoreMatrix, LossError> {
    let tensor = AttentionTensor::from_logits(scores)?;
    align.validate_rows(tensor.n_maps())?;
    let n = tensor.n_maps();
    let p = tensor.n_patches();
    // d(loss) / d(map entries), one row per tensor row.
    let mut grad_maps = vec![vec![0.0f64; p]; n];

    let mut accumulate = |word_a: usize, word_b: usize, coeff: f64| -> Result<(), LossError> {
        let (_, pa, pb) = word_distance_argmax(word_a, word_b, &tensor, align)?;
        if pa == pb {
            // Same tensor row on both sides: the distance is identically zero.
            return Ok(());
        }
        let (a, b) = (tensor.map(pa).unwrap(), tensor.map(pb).unwrap());
        // Split the accumulator so both rows can be borrowed mutably.
        let (left, right) = grad_maps.split_at_mut(pa.max(pb));
        let (da, db) = if pa < pb {
            (&mut left[pa], &mut right[0])
        } else {
            (&mut right[0], &mut left[pb])
        };
        sym_kl_backward(a, b, coeff, da, db);
        Ok(())
    };

    for set in sets {
        for &(m, n) in &set.pairs.pairs {
            accumulate(m, n, 1.0)?;
        }
        let u_len = set.unmatched.tokens.len();
        if u_len == 0 {
            continue;
        }
        let coeff = -0.5 / u_len as f64;
        for &(m, n) in &set.pairs.pairs {
            for &u in &set.unmatched.tokens {
                accumulate(m, u, coeff)?;
                accumulate(u, n, coeff)?;
            }
        }
    }

    // Backpropagate through the floor and the softmax of each row.
    let floor_scale = 1.0 + p as f64 * EPS_FLOOR;
    let mut grad = ScoreMatrix::zeros(scores.n_rows(), scores.grid_side());
    for (r, dmap) in grad_maps.iter().enumerate().take(n) {
        let probs = softmax(scores.row(r));
        let dprobs: Vec<f64> = dmap.iter().map(|g| g / floor_scale).collect();
        let dot: f64 = probs.iter().zip(&dprobs).map(|(p, g)| p * g).sum();
        for ((out, &prob), &dprob) in grad.row_mut(r).iter_mut().zip(&probs).zip(&dprobs) {
            *out = prob * (dprob - dot);
        }
    }
    Ok(grad)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}
