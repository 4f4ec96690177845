//! Latent-intervention loop over the toy attention model.
//!
//! A latent vector of per-token logits deterministically generates every
//! attention map. During the intervention window the latent moves against
//! the loss gradient, `z' = z - alpha * grad`, optionally followed by a
//! seeded Gaussian drift standing in for the background evolution of a
//! denoiser; after the window only the drift applies. Every step of the
//! trajectory records the loss breakdown, so separation dynamics can be
//! inspected after the fact.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::attention::{AttentionTensor, PieceAlignment, ScoreMatrix};
use crate::binding::ExtractedSet;
use crate::loss::{grad_scores, loss_total, LossReport};

/// Decorrelates the drift stream from the latent-initialization stream.
const DRIFT_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid dimensions: n_tokens={n_tokens}, grid_side={grid_side}")]
    InvalidDimensions { n_tokens: usize, grid_side: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("step {step} is outside the intervention window of {limit} steps")]
    PastInterventionWindow { step: usize, limit: usize },
    #[error("diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },
    #[error("loss evaluation failed: {0}")]
    Loss(#[from] crate::loss::LossError),
    #[error("attention error: {0}")]
    Attention(#[from] crate::attention::AttentionError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Logits for every token map plus the current step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub scores: ScoreMatrix,
    pub step: usize,
}

/// Knobs of the intervention schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub total_steps: usize,
    pub intervention_steps: usize,
    pub scale_factor: f64,
    pub drift_stddev: f64,
    pub rng_seed: u64,
    /// Full map snapshots are kept every this many steps; 0 disables them.
    pub snapshot_every: usize,
    /// A latent entry beyond this magnitude aborts the run as divergence.
    ///
    /// Softmax plus the epsilon floor keep every loss and gradient finite in
    /// f64, so runaway steps do not overflow; they saturate the maps and
    /// freeze. The magnitude guard is what detects that blow-up. Sane runs
    /// stay under ~1e2; logit spreads beyond ~7e2 already underflow the
    /// softmax, so the default of 1e4 only trips on runaway schedules.
    pub blowup_limit: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            total_steps: 50,
            intervention_steps: 25,
            scale_factor: 20.0,
            drift_stddev: 0.0,
            rng_seed: 0,
            snapshot_every: 5,
            blowup_limit: 1e4,
        }
    }
}

impl ScheduleConfig {
    /// The shipped toy-model setting. The default `scale_factor` of 20 is
    /// calibrated to denoiser latents and overshoots on unit-scale logits
    /// (descent stops being monotone); 5 separates fully while keeping every
    /// step a strict descent step.
    pub fn toy() -> Self {
        ScheduleConfig {
            scale_factor: 5.0,
            ..ScheduleConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.intervention_steps > self.total_steps {
            return Err(HarnessError::InvalidSchedule(format!(
                "intervention_steps {} exceeds total_steps {}",
                self.intervention_steps, self.total_steps
            )));
        }
        if !self.scale_factor.is_finite() || self.scale_factor < 0.0 {
            return Err(HarnessError::InvalidSchedule(format!(
                "scale_factor must be finite and non-negative, got {}",
                self.scale_factor
            )));
        }
        if !self.drift_stddev.is_finite() || self.drift_stddev < 0.0 {
            return Err(HarnessError::InvalidSchedule(format!(
                "drift_stddev must be finite and non-negative, got {}",
                self.drift_stddev
            )));
        }
        if !self.blowup_limit.is_finite() || self.blowup_limit <= 0.0 {
            return Err(HarnessError::InvalidSchedule(format!(
                "blowup_limit must be positive, got {}",
                self.blowup_limit
            )));
        }
        Ok(())
    }
}

/// Draw i.i.d. standard-normal logits for `n_tokens` maps on a D×D grid.
pub fn init_latent(
    n_tokens: usize,
    grid_side: usize,
    rng_seed: u64,
) -> Result<LatentState, HarnessError> {
    if n_tokens < 1 || grid_side < 2 {
        return Err(HarnessError::InvalidDimensions {
            n_tokens,
            grid_side,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut scores = ScoreMatrix::zeros(n_tokens, grid_side);
    for v in scores.data_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
    Ok(LatentState { scores, step: 0 })
}

/// Render the attention maps the latent currently generates.
pub fn render_maps(state: &LatentState) -> Result<AttentionTensor, HarnessError> {
    Ok(AttentionTensor::from_logits(&state.scores)?)
}

/// One gradient update plus the loss recomputed at the new latent.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: LatentState,
    pub report: LossReport,
}

/// Apply `z' = z - alpha * grad` with divergence checks; does not touch the
/// step counter or the drift stream.
fn apply_gradient(
    state: &LatentState,
    sets: &[ExtractedSet],
    align: &PieceAlignment,
    config: &ScheduleConfig,
    step: usize,
) -> Result<ScoreMatrix, HarnessError> {
    let grad = grad_scores(&state.scores, sets, align)?;
    if let Some(pos) = grad.data().iter().position(|g| !g.is_finite()) {
        return Err(HarnessError::Divergence {
            step,
            detail: format!("non-finite gradient entry at flat index {pos}"),
        });
    }
    let mut next = state.scores.clone();
    for (z, g) in next.data_mut().iter_mut().zip(grad.data()) {
        *z -= config.scale_factor * g;
    }
    check_latent(&next, config, step)?;
    Ok(next)
}

fn check_latent(scores: &ScoreMatrix, config: &ScheduleConfig, step: usize) -> Result<(), HarnessError> {
    for (i, z) in scores.data().iter().enumerate() {
        if !z.is_finite() {
            return Err(HarnessError::Divergence {
                step,
                detail: format!("non-finite latent entry at flat index {i}"),
            });
        }
        if z.abs() > config.blowup_limit {
            return Err(HarnessError::Divergence {
                step,
                detail: format!(
                    "latent entry at flat index {i} has magnitude {:.3e}, beyond the blow-up limit {:.3e}",
                    z.abs(),
                    config.blowup_limit
                ),
            });
        }
    }
    Ok(())
}

/// A single intervention step: gradient update, step increment, and the loss
/// recomputed at the new latent.
pub fn update_step(
    state: &LatentState,
    sets: &[ExtractedSet],
    align: &PieceAlignment,
    config: &ScheduleConfig,
) -> Result<StepOutcome, HarnessError> {
    config.validate()?;
    if state.step >= config.intervention_steps {
        return Err(HarnessError::PastInterventionWindow {
            step: state.step,
            limit: config.intervention_steps,
        });
    }
    let scores = apply_gradient(state, sets, align, config, state.step + 1)?;
    let next = LatentState {
        scores,
        step: state.step + 1,
    };
    let report = loss_total(&render_maps(&next)?, sets, align)?;
    Ok(StepOutcome {
        state: next,
        report,
    })
}

/// Per-step record of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub report: LossReport,
    /// Argmax patch of each binding-set root (root token, patch index).
    pub root_argmax: Vec<(usize, usize)>,
}

/// Full map snapshot at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSnapshot {
    pub step: usize,
    pub tensor: AttentionTensor,
}

/// Everything recorded over one run: length `total_steps + 1` including the
/// initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<MapSnapshot>,
}

fn record_step(
    step: usize,
    state: &LatentState,
    sets: &[ExtractedSet],
    align: &PieceAlignment,
) -> Result<(StepRecord, AttentionTensor), HarnessError> {
    let tensor = render_maps(state)?;
    let report = loss_total(&tensor, sets, align)?;
    let root_argmax = sets
        .iter()
        .filter_map(|s| {
            let root = s.binding.root_noun;
            let piece = *align.pieces(root)?.first()?;
            let map = tensor.map(piece)?;
            Some((root, map.argmax()))
        })
        .collect();
    Ok((
        StepRecord {
            step,
            report,
            root_argmax,
        },
        tensor,
    ))
}

/// Run the full schedule from an initial latent at step 0.
///
/// Steps `1..=intervention_steps` take a gradient update (then the drift, if
/// enabled); the remaining steps apply only the drift. The drift stream is
/// seeded from `rng_seed` independently of latent initialization.
pub fn run(
    initial: &LatentState,
    sets: &[ExtractedSet],
    align: &PieceAlignment,
    config: &ScheduleConfig,
) -> Result<Trajectory, HarnessError> {
    config.validate()?;
    if initial.step != 0 {
        return Err(HarnessError::InvalidSchedule(format!(
            "run expects an initial latent at step 0, got step {}",
            initial.step
        )));
    }
    align.validate_rows(initial.scores.n_rows())?;
    let mut drift_rng = ChaCha8Rng::seed_from_u64(config.rng_seed ^ DRIFT_SEED_SALT);
    let mut state = initial.clone();
    let mut records = Vec::with_capacity(config.total_steps + 1);
    let mut snapshots = Vec::new();

    let take_snapshot =
        |step: usize| config.snapshot_every > 0 && step.is_multiple_of(config.snapshot_every);
    let (record, tensor) = record_step(0, &state, sets, align)?;
    records.push(record);
    if take_snapshot(0) {
        snapshots.push(MapSnapshot { step: 0, tensor });
    }

    for step in 1..=config.total_steps {
        if step <= config.intervention_steps {
            state.scores = apply_gradient(&state, sets, align, config, step)?;
        }
        if config.drift_stddev > 0.0 {
            for z in state.scores.data_mut() {
                let noise: f64 = StandardNormal.sample(&mut drift_rng);
                *z += config.drift_stddev * noise;
            }
            check_latent(&state.scores, config, step)?;
        }
        state.step = step;
        let (record, tensor) = record_step(step, &state, sets, align)?;
        records.push(record);
        if take_snapshot(step) {
            snapshots.push(MapSnapshot { step, tensor });
        }
    }
    Ok(Trajectory { records, snapshots })
}

/// Per-step separation summary of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationSummary {
    /// Mean bound-pair distance per step; `None` when the prompt has no pairs.
    pub mean_pair: Option<Vec<f64>>,
    /// Mean pair-to-unmatched distance per step; `None` when no set has
    /// unmatched words (single-set prompts).
    pub mean_unmatched: Option<Vec<f64>>,
    /// `mean_pair / mean_unmatched` per step, when both exist.
    pub ratio: Option<Vec<f64>>,
    /// Number of distinct root pairs sharing a top-1 patch, per step.
    pub argmax_collisions: Vec<usize>,
}

/// Summarize how bound pairs contract and unmatched words separate.
pub fn separation_metrics(traj: &Trajectory) -> SeparationSummary {
    let mean = |values: &[f64]| values.iter().sum::<f64>() / values.len() as f64;
    let mut mean_pair = Vec::new();
    let mut mean_unmatched = Vec::new();
    let mut collisions = Vec::new();
    let mut has_pairs = false;
    let mut has_unmatched = false;
    for record in &traj.records {
        let pairs: Vec<f64> = record.report.per_pair.iter().map(|p| p.distance).collect();
        let unmatched: Vec<f64> = record
            .report
            .per_unmatched
            .iter()
            .map(|u| u.distance)
            .collect();
        if !pairs.is_empty() {
            has_pairs = true;
            mean_pair.push(mean(&pairs));
        }
        if !unmatched.is_empty() {
            has_unmatched = true;
            mean_unmatched.push(mean(&unmatched));
        }
        let mut count = 0;
        for (i, &(_, pa)) in record.root_argmax.iter().enumerate() {
            for &(_, pb) in &record.root_argmax[i + 1..] {
                if pa == pb {
                    count += 1;
                }
            }
        }
        collisions.push(count);
    }
    let ratio = if has_pairs && has_unmatched && mean_pair.len() == mean_unmatched.len() {
        Some(
            mean_pair
                .iter()
                .zip(&mean_unmatched)
                .map(|(p, u)| p / u)
                .collect(),
        )
    } else {
        None
    };
    SeparationSummary {
        mean_pair: has_pairs.then_some(mean_pair),
        mean_unmatched: has_unmatched.then_some(mean_unmatched),
        ratio,
        argmax_collisions: collisions,
    }
}

/// Wire format of one trajectory record.
#[derive(Debug, Serialize, Deserialize)]
struct WireRecord {
    step: usize,
    l_pos: f64,
    l_neg: f64,
    l_total: f64,
    pair_dists: BTreeMap<String, f64>,
    unmatched_dists: BTreeMap<String, f64>,
}

impl From<&StepRecord> for WireRecord {
    fn from(record: &StepRecord) -> Self {
        WireRecord {
            step: record.step,
            l_pos: record.report.l_pos,
            l_neg: record.report.l_neg,
            l_total: record.report.l_total,
            pair_dists: record
                .report
                .per_pair
                .iter()
                .map(|p| (format!("{}-{}", p.modifier, p.noun), p.distance))
                .collect(),
            unmatched_dists: record
                .report
                .per_unmatched
                .iter()
                .map(|u| {
                    (
                        format!("{}-{}:{}", u.modifier, u.noun, u.unmatched),
                        u.distance,
                    )
                })
                .collect(),
        }
    }
}

/// Write the trajectory as JSON-lines, one record per step.
pub fn write_trajectory_jsonl(traj: &Trajectory, w: &mut impl Write) -> Result<(), HarnessError> {
    for record in &traj.records {
        serde_json::to_writer(&mut *w, &WireRecord::from(record))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Write one 16-bit ASCII PGM (P2) image of a map, values scaled to the
/// map's maximum, row-major over the D×D grid.
pub fn write_pgm(
    map: &crate::attention::AttentionMap,
    grid_side: usize,
    w: &mut impl Write,
) -> Result<(), HarnessError> {
    if grid_side * grid_side != map.len() {
        return Err(HarnessError::Attention(
            crate::attention::AttentionError::NotSquare {
                grid_side,
                patches: map.len(),
            },
        ));
    }
    let max = map.values().iter().cloned().fold(f64::MIN, f64::max);
    writeln!(w, "P2")?;
    writeln!(w, "{grid_side} {grid_side}")?;
    writeln!(w, "65535")?;
    for row in 0..grid_side {
        let line: Vec<String> = (0..grid_side)
            .map(|col| {
                let v = map.values()[row * grid_side + col];
                format!("{}", (v / max * 65535.0).round() as u32)
            })
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Write every snapshot of a trajectory as `tok{row}_step{t}.pgm` files.
pub fn write_snapshots(traj: &Trajectory, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    for snapshot in &traj.snapshots {
        for (row, map) in snapshot.tensor.maps().iter().enumerate() {
            let path = dir.join(format!("tok{row}_step{}.pgm", snapshot.step));
            let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
            write_pgm(map, snapshot.tensor.grid_side(), &mut file)?;
        }
    }
    Ok(())
}
