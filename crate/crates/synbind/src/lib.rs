//! Syntax-driven binding control for cross-attention maps.
//!
//! Text-to-image models often attach attributes to the wrong object: asked
//! for "a pink sunflower and a yellow flamingo" they may paint the sunflower
//! yellow. The remedy implemented here reads the binding structure straight
//! off the prompt's dependency parse and steers per-token attention maps to
//! respect it: maps of a modifier and its noun are pulled together, and both
//! are pushed away from the maps of unrelated words, by a gradient step on
//! the latent scores that generate the maps.
//!
//! The crate provides the full pipeline against a differentiable toy
//! attention model, so every part can be exercised deterministically on a
//! desktop:
//!
//! - [`binding`] — CoNLL-U ingestion and extraction of binding sets, pair
//!   sets, and unmatched sets;
//! - [`attention`] — floored token→patch probability maps, piece alignment,
//!   and tensor I/O;
//! - [`loss`] — the symmetric-KL distance, the positive/negative losses, and
//!   analytic gradients with respect to the latent scores;
//! - [`harness`] — the latent update schedule, trajectory recording, and
//!   separation summaries;
//! - [`dvmp`] — the diverse visual-modifier prompt generator with gold
//!   bindings and swapped counterparts;
//! - [`metrics`] — proper/improper binding and entity neglect over
//!   annotation records.

pub mod attention;
pub mod binding;
pub mod dvmp;
pub mod harness;
pub mod loss;
pub mod metrics;

pub use attention::{
    normalize_rows, AttentionMap, AttentionTensor, PieceAlignment, ScoreMatrix, EPS_FLOOR,
};
pub use binding::{
    collect_modifiers, extract_all, extract_entity_nouns, pair_set, parse_conllu, unmatched_set,
    BindingDocument, BindingSet, DependencyGraph, ExtractedSet, PairSet, Token, UnmatchedSet, Upos,
};
pub use dvmp::{generate_dataset, sample_prompt, swap_counterpart, EntityPool, PromptRecord};
pub use harness::{
    init_latent, render_maps, run, separation_metrics, update_step, LatentState, ScheduleConfig,
    Trajectory,
};
pub use loss::{grad_scores, loss_neg, loss_pos, loss_total, sym_kl, word_distance, LossReport};
pub use metrics::{entity_neglect, improper_binding, proper_binding, AnnotationRecord};
