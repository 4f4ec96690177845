//! Extraction of (entity-noun, modifier-set) structures from dependency parses.
//!
//! A sentence like "a black striped dog" yields one binding set rooted at
//! "dog" with modifiers {"black", "striped"}, the pair set
//! {(black, dog), (striped, dog)}, and an unmatched set holding the content
//! words that belong to no part of the binding set. These structures drive
//! the attention losses in [`crate::loss`].
//!
//! Parses are produced offline by any UD-style parser and ingested as
//! CoNLL-U; this module validates and traverses, it does not parse raw text.

mod conllu;

pub use conllu::{parse_conllu, ConlluError, ParseUposError, Upos};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dependency relations that connect a modifier to the word it modifies.
pub const MODIFIER_RELS: [&str; 6] = ["amod", "nmod", "compound", "npadvmod", "acomp", "conj"];

/// Relations that disqualify a noun from being a top-level entity when its
/// head is itself a noun. `conj` is deliberately absent: a conjoined noun
/// remains a top-level entity.
const NOUN_MODIFIER_RELS: [&str; 5] = ["amod", "nmod", "compound", "npadvmod", "acomp"];

fn is_modifier_rel(rel: &str) -> bool {
    MODIFIER_RELS.contains(&rel)
}

/// One word of a parsed sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position within the sentence.
    pub index: usize,
    pub surface: String,
    pub lemma: String,
    pub upos: Upos,
    /// Index of the governing token, 0 for the root.
    pub head: usize,
    pub deprel: String,
}

/// A dependency-parsed sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub tokens: Vec<Token>,
    pub sentence_text: String,
}

impl DependencyGraph {
    pub fn token(&self, index: usize) -> Option<&Token> {
        self.tokens.get(index.checked_sub(1)?)
    }

    fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.tokens.len() + 1];
        for tok in &self.tokens {
            children[tok.head].push(tok.index);
        }
        children
    }
}

/// One entity-noun root plus its recursively collected modifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingSet {
    pub root_noun: usize,
    pub modifiers: BTreeSet<usize>,
    /// Ordinal of this set within its sentence, 1-based.
    pub set_id: usize,
}

/// The (modifier, root-noun) pairs of a binding set, in token order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSet {
    pub pairs: Vec<(usize, usize)>,
}

/// Content words of the sentence that lie outside a binding set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnmatchedSet {
    pub tokens: BTreeSet<usize>,
}

/// A binding set together with its derived pair and unmatched sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedSet {
    pub binding: BindingSet,
    pub pairs: PairSet,
    pub unmatched: UnmatchedSet,
}

#[derive(Debug, Error)]
pub enum BindingError {
    #[error("token index {0} does not exist in this sentence")]
    UnknownToken(usize),
    #[error("token {0} is not an entity noun of this sentence")]
    NotAnEntityNoun(usize),
}

/// Collect the modifier subtree of `root` without ordinal bookkeeping.
///
/// Traversal follows arcs labelled with any of [`MODIFIER_RELS`], except
/// that `conj` arcs leaving the root itself are skipped: a noun conjoined
/// to the root is a separate entity, while `conj` below a modifier extends
/// the modifier chain ("black and white"). Only content words are admitted;
/// an admitted `acomp` reached through a copular verb whose nominal subject
/// is the root is bound as well ("The apple is blue").
fn collect_set(graph: &DependencyGraph, root: usize, children: &[Vec<usize>]) -> BTreeSet<usize> {
    let mut found = BTreeSet::new();
    let mut stack = vec![root];
    let admit = |idx: usize, found: &mut BTreeSet<usize>, stack: &mut Vec<usize>| {
        if idx != root && found.insert(idx) {
            stack.push(idx);
        }
    };
    // Copular route: an acomp under a verb whose nominal subject is `root`.
    for tok in &graph.tokens {
        if tok.deprel != "acomp" || !tok.upos.is_content() {
            continue;
        }
        let Some(verb) = graph.token(tok.head) else { continue };
        if !matches!(verb.upos, Upos::VERB | Upos::AUX) {
            continue;
        }
        let subject_is_root = children[verb.index]
            .iter()
            .any(|&c| c == root && graph.tokens[c - 1].deprel.starts_with("nsubj"));
        if subject_is_root {
            admit(tok.index, &mut found, &mut stack);
        }
    }
    while let Some(node) = stack.pop() {
        for &child_idx in &children[node] {
            let child = &graph.tokens[child_idx - 1];
            if !is_modifier_rel(&child.deprel) {
                continue;
            }
            if child.deprel == "conj" && node == root {
                continue;
            }
            if child.upos.is_content() {
                admit(child_idx, &mut found, &mut stack);
            }
        }
    }
    found
}

/// Return the top-level entity nouns of a sentence, in token order.
///
/// A noun qualifies unless it directly modifies another noun (its deprel is
/// a noun-modifier relation with a noun head) or it ends up inside another
/// candidate's modifier set through a non-`conj` arc, as happens with
/// noun-under-adjective chains like "a watermelon styled chair".
pub fn extract_entity_nouns(graph: &DependencyGraph) -> Vec<usize> {
    let children = graph.children();
    let candidates: Vec<usize> = graph
        .tokens
        .iter()
        .filter(|t| t.upos.is_noun())
        .filter(|t| {
            let noun_head = graph.token(t.head).map(|h| h.upos.is_noun()).unwrap_or(false);
            !(noun_head && NOUN_MODIFIER_RELS.contains(&t.deprel.as_str()))
        })
        .map(|t| t.index)
        .collect();
    let sets: Vec<BTreeSet<usize>> = candidates
        .iter()
        .map(|&c| collect_set(graph, c, &children))
        .collect();
    candidates
        .iter()
        .enumerate()
        .filter(|&(i, &c)| {
            graph.tokens[c - 1].deprel == "conj"
                || !sets
                    .iter()
                    .enumerate()
                    .any(|(j, set)| j != i && set.contains(&c))
        })
        .map(|(_, &c)| c)
        .collect()
}

/// Collect the binding set rooted at `noun`.
///
/// `noun` must have been returned by [`extract_entity_nouns`]; the set
/// ordinal is the noun's rank among the sentence's entity nouns.
pub fn collect_modifiers(graph: &DependencyGraph, noun: usize) -> Result<BindingSet, BindingError> {
    if graph.token(noun).is_none() {
        return Err(BindingError::UnknownToken(noun));
    }
    let rank = extract_entity_nouns(graph)
        .iter()
        .position(|&n| n == noun)
        .ok_or(BindingError::NotAnEntityNoun(noun))?;
    let children = graph.children();
    Ok(BindingSet {
        root_noun: noun,
        modifiers: collect_set(graph, noun, &children),
        set_id: rank + 1,
    })
}

/// Expand a binding set into its (modifier, root-noun) pairs, in token order.
pub fn pair_set(set: &BindingSet) -> PairSet {
    PairSet {
        pairs: set.modifiers.iter().map(|&m| (m, set.root_noun)).collect(),
    }
}

/// Content words of the sentence outside `set`.
pub fn unmatched_set(set: &BindingSet, graph: &DependencyGraph) -> UnmatchedSet {
    let tokens = graph
        .tokens
        .iter()
        .filter(|t| t.upos.is_content())
        .map(|t| t.index)
        .filter(|idx| *idx != set.root_noun && !set.modifiers.contains(idx))
        .collect();
    UnmatchedSet { tokens }
}

/// Extract every binding structure of the sentence in one pass.
pub fn extract_all(graph: &DependencyGraph) -> Vec<ExtractedSet> {
    warn_orphan_acomps(graph);
    extract_entity_nouns(graph)
        .into_iter()
        .enumerate()
        .map(|(i, noun)| {
            let children = graph.children();
            let binding = BindingSet {
                root_noun: noun,
                modifiers: collect_set(graph, noun, &children),
                set_id: i + 1,
            };
            let pairs = pair_set(&binding);
            let unmatched = unmatched_set(&binding, graph);
            ExtractedSet {
                binding,
                pairs,
                unmatched,
            }
        })
        .collect()
}

/// An acomp under a verb with no nominal subject can never bind to a noun.
fn warn_orphan_acomps(graph: &DependencyGraph) {
    let children = graph.children();
    for tok in &graph.tokens {
        if tok.deprel != "acomp" {
            continue;
        }
        let Some(verb) = graph.token(tok.head) else { continue };
        if !matches!(verb.upos, Upos::VERB | Upos::AUX) {
            continue;
        }
        let has_subject = children[verb.index]
            .iter()
            .any(|&c| graph.tokens[c - 1].deprel.starts_with("nsubj"));
        if !has_subject {
            log::warn!(
                "dropping acomp `{}` (token {}): verb `{}` has no nominal subject",
                tok.surface,
                tok.index,
                verb.surface
            );
        }
    }
}

/// Reference to a token in the JSON output, carrying index and surface form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRef {
    pub index: usize,
    pub surface: String,
}

/// JSON record for one binding set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingSetRecord {
    pub root: TokenRef,
    pub modifiers: Vec<TokenRef>,
    pub pairs: Vec<[usize; 2]>,
    pub unmatched: Vec<TokenRef>,
}

/// JSON document emitted per sentence. Indices are 1-based token indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingDocument {
    pub sentence: String,
    pub sets: Vec<BindingSetRecord>,
}

impl BindingDocument {
    pub fn from_graph(graph: &DependencyGraph, sets: &[ExtractedSet]) -> Self {
        let token_ref = |idx: usize| TokenRef {
            index: idx,
            surface: graph.tokens[idx - 1].surface.clone(),
        };
        BindingDocument {
            sentence: graph.sentence_text.clone(),
            sets: sets
                .iter()
                .map(|s| BindingSetRecord {
                    root: token_ref(s.binding.root_noun),
                    modifiers: s.binding.modifiers.iter().map(|&m| token_ref(m)).collect(),
                    pairs: s.pairs.pairs.iter().map(|&(m, n)| [m, n]).collect(),
                    unmatched: s.unmatched.tokens.iter().map(|&u| token_ref(u)).collect(),
                })
                .collect(),
        }
    }

    /// Rebuild the extraction structures from a serialized document.
    pub fn to_extracted_sets(&self) -> Vec<ExtractedSet> {
        self.sets
            .iter()
            .enumerate()
            .map(|(i, rec)| ExtractedSet {
                binding: BindingSet {
                    root_noun: rec.root.index,
                    modifiers: rec.modifiers.iter().map(|m| m.index).collect(),
                    set_id: i + 1,
                },
                pairs: PairSet {
                    pairs: rec.pairs.iter().map(|p| (p[0], p[1])).collect(),
                },
                unmatched: UnmatchedSet {
                    tokens: rec.unmatched.iter().map(|u| u.index).collect(),
                },
            })
            .collect()
    }

    /// Largest token index mentioned anywhere in the document.
    pub fn max_token_index(&self) -> usize {
        self.sets
            .iter()
            .flat_map(|s| {
                std::iter::once(s.root.index)
                    .chain(s.modifiers.iter().map(|m| m.index))
                    .chain(s.unmatched.iter().map(|u| u.index))
            })
            .max()
            .unwrap_or(0)
    }
}
