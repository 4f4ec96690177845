//! Generator for diverse visual-modifier prompts with gold bindings.
//!
//! Prompts are coordinations of one to three noun phrases, each carrying one
//! to three modifiers drawn from a color pool shared by every entity and
//! from per-category modifier pools. Keeping modifiers inside their entity's
//! category is what rules out incoherent phrases like "a sliced bowl".
//! Every record carries its gold (entity, modifiers) bindings, and a
//! template renderer emits the matching dependency parse so extraction can
//! be checked against the gold sets end to end.

use std::collections::HashSet;
use std::io::Write;

use rand::seq::index::sample as index_sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Colors every category may use.
pub const COLORS: [&str; 13] = [
    "red", "orange", "yellow", "green", "blue", "purple", "pink", "brown", "gray", "black",
    "white", "beige", "teal",
];

const GENERAL_ENTITIES: [&str; 18] = [
    "backpack",
    "crown",
    "suitcase",
    "chair",
    "balloon",
    "bow",
    "car",
    "bowl",
    "bench",
    "clock",
    "camera",
    "umbrella",
    "guitar",
    "shoe",
    "hat",
    "surfboard",
    "skateboard",
    "bicycle",
];
const GENERAL_MODIFIERS: [&str; 7] = [
    "modern",
    "spotted",
    "wooden",
    "metal",
    "curved",
    "spiky",
    "checkered",
];
const FRUIT_ENTITIES: [&str; 4] = ["apple", "tomato", "banana", "strawberry"];
const FRUIT_MODIFIERS: [&str; 2] = ["sliced", "skewered"];
const ANIMAL_ENTITIES: [&str; 16] = [
    "cat", "dog", "bird", "bear", "lion", "horse", "elephant", "monkey", "frog", "turtle",
    "rabbit", "mouse", "panda", "zebra", "gorilla", "penguin",
];
const ANIMAL_MODIFIERS: [&str; 4] = ["furry", "baby", "sleepy", "spotted"];

/// Modifiers that are themselves nouns and parse as compounds.
const NOUN_MODIFIERS: [&str; 2] = ["baby", "metal"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    General,
    Fruit,
    Animal,
}

/// One entity category with its nouns and category-specific modifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityPool {
    pub category: Category,
    pub entities: Vec<String>,
    pub category_modifiers: Vec<String>,
}

fn owned(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

/// The built-in pools: 18 general objects with 7 modifiers, 4 fruits with 2,
/// 16 animals with 4, plus the 13 shared colors.
pub fn builtin_pools() -> Vec<EntityPool> {
    vec![
        EntityPool {
            category: Category::General,
            entities: owned(&GENERAL_ENTITIES),
            category_modifiers: owned(&GENERAL_MODIFIERS),
        },
        EntityPool {
            category: Category::Fruit,
            entities: owned(&FRUIT_ENTITIES),
            category_modifiers: owned(&FRUIT_MODIFIERS),
        },
        EntityPool {
            category: Category::Animal,
            entities: owned(&ANIMAL_ENTITIES),
            category_modifiers: owned(&ANIMAL_MODIFIERS),
        },
    ]
}

/// Category of a built-in entity noun, if it is one.
pub fn category_of(entity: &str) -> Option<Category> {
    if GENERAL_ENTITIES.contains(&entity) {
        Some(Category::General)
    } else if FRUIT_ENTITIES.contains(&entity) {
        Some(Category::Fruit)
    } else if ANIMAL_ENTITIES.contains(&entity) {
        Some(Category::Animal)
    } else {
        None
    }
}

/// A modifier is coherent on an entity when it is a color or belongs to the
/// entity's category pool. Entities outside the built-in pools accept only
/// colors.
pub fn modifier_fits(entity: &str, modifier: &str) -> bool {
    if COLORS.contains(&modifier) {
        return true;
    }
    match category_of(entity) {
        Some(Category::General) => GENERAL_MODIFIERS.contains(&modifier),
        Some(Category::Fruit) => FRUIT_MODIFIERS.contains(&modifier),
        Some(Category::Animal) => ANIMAL_MODIFIERS.contains(&modifier),
        None => false,
    }
}

/// "a" or "an" by the first letter of the following word.
pub fn article_for(word: &str) -> &'static str {
    match word.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// One entity of a prompt with its modifiers in text order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSet {
    pub entity: String,
    pub modifiers: Vec<String>,
}

/// A generated prompt with its gold bindings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub text: String,
    pub gold_sets: Vec<GoldSet>,
    pub seed: u64,
    pub n_entities: usize,
    pub n_modifiers_total: usize,
}

#[derive(Debug, Error)]
pub enum DvmpError {
    #[error("{name} must lie in 1..=3, got {value}")]
    InvalidRange { name: &'static str, value: usize },
    #[error("requested {requested} modifiers but only {available} are coherent for `{entity}`")]
    PoolExhausted {
        entity: String,
        requested: usize,
        available: usize,
    },
    #[error("swap needs at least two entities with at least one modifier each")]
    SwapPrecondition,
    #[error("no coherent swap found after {0} attempts")]
    NoCoherentSwap(usize),
    #[error("could not locate `{word}` in the prompt text")]
    TextLayout { word: String },
    #[error("could not sample a fresh prompt after {0} attempts")]
    DedupExhausted(usize),
}

/// Sample one prompt with `n_entities` phrases of up to `max_mods_per_entity`
/// modifiers each. Entities are drawn without replacement; each entity's
/// modifiers come without replacement from the colors plus its category
/// pool. Non-color modifiers precede or follow the colors uniformly at
/// random.
pub fn sample_prompt(
    rng_seed: u64,
    n_entities: usize,
    max_mods_per_entity: usize,
) -> Result<PromptRecord, DvmpError> {
    if !(1..=3).contains(&n_entities) {
        return Err(DvmpError::InvalidRange {
            name: "n_entities",
            value: n_entities,
        });
    }
    if !(1..=3).contains(&max_mods_per_entity) {
        return Err(DvmpError::InvalidRange {
            name: "max_mods_per_entity",
            value: max_mods_per_entity,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let pools = builtin_pools();
    let all_entities: Vec<(&str, Category)> = pools
        .iter()
        .flat_map(|pool| pool.entities.iter().map(|e| (e.as_str(), pool.category)))
        .collect();
    let picks = index_sample(&mut rng, all_entities.len(), n_entities);

    let mut gold_sets = Vec::with_capacity(n_entities);
    let mut n_modifiers_total = 0;
    for idx in picks {
        let (entity, category) = all_entities[idx];
        let category_mods = pools
            .iter()
            .find(|p| p.category == category)
            .expect("category pool exists")
            .category_modifiers
            .iter()
            .map(|m| m.as_str());
        let mut mod_pool: Vec<&str> = COLORS.to_vec();
        mod_pool.extend(category_mods);
        let n_mods = rng.gen_range(1..=max_mods_per_entity);
        if n_mods > mod_pool.len() {
            return Err(DvmpError::PoolExhausted {
                entity: entity.to_string(),
                requested: n_mods,
                available: mod_pool.len(),
            });
        }
        let chosen: Vec<&str> = index_sample(&mut rng, mod_pool.len(), n_mods)
            .iter()
            .map(|i| mod_pool[i])
            .collect();
        let (colors, others): (Vec<&str>, Vec<&str>) =
            chosen.iter().partition(|m| COLORS.contains(m));
        let ordered: Vec<String> = if rng.gen_bool(0.5) {
            others.iter().chain(colors.iter()).map(|m| m.to_string()).collect()
        } else {
            colors.iter().chain(others.iter()).map(|m| m.to_string()).collect()
        };
        n_modifiers_total += ordered.len();
        gold_sets.push(GoldSet {
            entity: entity.to_string(),
            modifiers: ordered,
        });
    }

    Ok(PromptRecord {
        text: render_text(&gold_sets),
        n_entities: gold_sets.len(),
        n_modifiers_total,
        gold_sets,
        seed: rng_seed,
    })
}

fn render_text(gold_sets: &[GoldSet]) -> String {
    gold_sets
        .iter()
        .map(|set| {
            let first = set
                .modifiers
                .first()
                .map(|m| m.as_str())
                .unwrap_or(set.entity.as_str());
            let mut phrase = vec![article_for(first).to_string()];
            phrase.extend(set.modifiers.iter().cloned());
            phrase.push(set.entity.clone());
            phrase.join(" ")
        })
        .collect::<Vec<_>>()
        .join(" and ")
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Per-index sub-seed so records are independent of generation order.
fn record_seed(rng_seed: u64, index: usize, attempt: usize) -> u64 {
    splitmix64(splitmix64(rng_seed ^ splitmix64(index as u64 + 1)) ^ (attempt as u64))
}

/// Generate `count` unique prompts. Entity counts are uniform over {1, 2}
/// and per-entity modifier counts uniform over 1..=3; duplicate texts are
/// resampled from a fresh per-index sub-seed.
pub fn generate_dataset(rng_seed: u64, count: usize) -> Result<Vec<PromptRecord>, DvmpError> {
    const MAX_ATTEMPTS: usize = 10_000;
    let mut records = Vec::with_capacity(count);
    let mut seen: HashSet<String> = HashSet::with_capacity(count);
    for index in 0..count {
        let mut accepted = false;
        for attempt in 0..MAX_ATTEMPTS {
            let sub_seed = record_seed(rng_seed, index, attempt);
            let mut picker = ChaCha8Rng::seed_from_u64(sub_seed);
            let n_entities = picker.gen_range(1..=2usize);
            let sample_seed = picker.next_u64();
            let record = sample_prompt(sample_seed, n_entities, 3)?;
            if seen.insert(record.text.clone()) {
                records.push(record);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(DvmpError::DedupExhausted(MAX_ATTEMPTS));
        }
    }
    Ok(records)
}

/// Positions of each gold set's tokens inside the whitespace-split text.
struct TextLayout {
    words: Vec<String>,
    /// Per gold set: (noun position, modifier positions in gold order).
    sets: Vec<(usize, Vec<usize>)>,
}

fn layout(record: &PromptRecord) -> Result<TextLayout, DvmpError> {
    let words: Vec<String> = record.text.split_whitespace().map(str::to_string).collect();
    let mut sets = Vec::with_capacity(record.gold_sets.len());
    let mut cursor = 0usize;
    for set in &record.gold_sets {
        let noun_pos = words
            .iter()
            .enumerate()
            .skip(cursor)
            .find(|(_, w)| **w == set.entity)
            .map(|(i, _)| i)
            .ok_or_else(|| DvmpError::TextLayout {
                word: set.entity.clone(),
            })?;
        let mut mod_positions = Vec::with_capacity(set.modifiers.len());
        let mut claimed: HashSet<usize> = HashSet::new();
        for modifier in &set.modifiers {
            let pos = (cursor..noun_pos)
                .find(|i| words[*i] == *modifier && !claimed.contains(i))
                .ok_or_else(|| DvmpError::TextLayout {
                    word: modifier.clone(),
                })?;
            claimed.insert(pos);
            mod_positions.push(pos);
        }
        sets.push((noun_pos, mod_positions));
        cursor = noun_pos + 1;
    }
    Ok(TextLayout { words, sets })
}

fn fix_article(words: &mut [String], first_mod_pos: usize) {
    let Some(art_pos) = first_mod_pos.checked_sub(1) else {
        return;
    };
    let article = article_for(&words[first_mod_pos]);
    let replacement = match words[art_pos].as_str() {
        "a" | "an" => article.to_string(),
        "A" | "An" => {
            let mut s = article.to_string();
            s.replace_range(0..1, "A");
            s
        }
        _ => return,
    };
    words[art_pos] = replacement;
}

/// Exchange one modifier between two entities, keeping the prompt coherent.
///
/// The entities and slots are drawn uniformly; an exchange that would place
/// a modifier on an incompatible entity is resampled, up to 100 attempts.
/// The slot choice depends only on the record's shape, so applying the same
/// seed to the output swaps the pair straight back.
pub fn swap_counterpart(record: &PromptRecord, rng_seed: u64) -> Result<PromptRecord, DvmpError> {
    const MAX_ATTEMPTS: usize = 100;
    let eligible: Vec<usize> = record
        .gold_sets
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.modifiers.is_empty())
        .map(|(i, _)| i)
        .collect();
    if record.gold_sets.len() < 2 || eligible.len() < 2 {
        return Err(DvmpError::SwapPrecondition);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..MAX_ATTEMPTS {
        let a = eligible[rng.gen_range(0..eligible.len())];
        let b = loop {
            let candidate = eligible[rng.gen_range(0..eligible.len())];
            if candidate != a {
                break candidate;
            }
        };
        let slot_a = rng.gen_range(0..record.gold_sets[a].modifiers.len());
        let slot_b = rng.gen_range(0..record.gold_sets[b].modifiers.len());
        let mod_a = record.gold_sets[a].modifiers[slot_a].clone();
        let mod_b = record.gold_sets[b].modifiers[slot_b].clone();
        if !modifier_fits(&record.gold_sets[a].entity, &mod_b)
            || !modifier_fits(&record.gold_sets[b].entity, &mod_a)
        {
            continue;
        }
        let mut gold_sets = record.gold_sets.clone();
        gold_sets[a].modifiers[slot_a] = mod_b;
        gold_sets[b].modifiers[slot_b] = mod_a;

        let mut text_layout = layout(record)?;
        let pos_a = text_layout.sets[a].1[slot_a];
        let pos_b = text_layout.sets[b].1[slot_b];
        text_layout.words.swap(pos_a, pos_b);
        for &set_idx in &[a, b] {
            if let Some(&first) = text_layout.sets[set_idx].1.iter().min() {
                fix_article(&mut text_layout.words, first);
            }
        }
        return Ok(PromptRecord {
            text: text_layout.words.join(" "),
            gold_sets,
            seed: rng_seed,
            n_entities: record.n_entities,
            n_modifiers_total: record.n_modifiers_total,
        });
    }
    Err(DvmpError::NoCoherentSwap(MAX_ATTEMPTS))
}

/// Render the template parse of a record as CoNLL-U.
///
/// Articles attach as `det`, adjective modifiers as `amod`, noun modifiers
/// ("baby", "metal") as `compound`; each later noun conjoins to the first
/// with its "and" attached as `cc`. Only template-shaped records (phrases
/// joined by "and") can be rendered.
pub fn to_conllu(record: &PromptRecord) -> String {
    let mut lines = vec![format!("# text = {}", record.text)];
    let mut idx = 0usize;
    let mut first_noun = 0usize;
    for (si, set) in record.gold_sets.iter().enumerate() {
        let and_pos = (si > 0).then_some(idx + 1);
        let offset = usize::from(si > 0);
        let art_pos = idx + 1 + offset;
        let noun_pos = art_pos + 1 + set.modifiers.len();
        if let Some(pos) = and_pos {
            lines.push(conllu_line(pos, "and", "CCONJ", noun_pos, "cc"));
        }
        let first_word = set
            .modifiers
            .first()
            .map(|m| m.as_str())
            .unwrap_or(set.entity.as_str());
        lines.push(conllu_line(art_pos, article_for(first_word), "DET", noun_pos, "det"));
        for (mi, modifier) in set.modifiers.iter().enumerate() {
            let (upos, deprel) = if NOUN_MODIFIERS.contains(&modifier.as_str()) {
                ("NOUN", "compound")
            } else {
                ("ADJ", "amod")
            };
            lines.push(conllu_line(art_pos + 1 + mi, modifier, upos, noun_pos, deprel));
        }
        if si == 0 {
            first_noun = noun_pos;
            lines.push(conllu_line(noun_pos, &set.entity, "NOUN", 0, "root"));
        } else {
            lines.push(conllu_line(noun_pos, &set.entity, "NOUN", first_noun, "conj"));
        }
        idx = noun_pos;
    }
    lines.push(String::new());
    lines.join("\n")
}

fn conllu_line(id: usize, form: &str, upos: &str, head: usize, deprel: &str) -> String {
    format!("{id}\t{form}\t{form}\t{upos}\t_\t_\t{head}\t{deprel}\t_\t_")
}

/// A coherence or layout violation found by [`validate_record`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoherenceViolation {
    #[error("`{modifier}` is not a coherent modifier for `{entity}`")]
    IncoherentModifier { entity: String, modifier: String },
    #[error("`{entity}` is not a known entity")]
    UnknownEntity { entity: String },
    #[error("modifier `{modifier}` does not precede its entity `{entity}` in the text")]
    ModifierPlacement { entity: String, modifier: String },
    #[error("article `{found}` disagrees with the following word `{word}`")]
    ArticleMismatch { found: String, word: String },
}

/// Check a record against the category table, modifier placement, and
/// article agreement.
pub fn validate_record(record: &PromptRecord) -> Result<(), CoherenceViolation> {
    for set in &record.gold_sets {
        if category_of(&set.entity).is_none() {
            return Err(CoherenceViolation::UnknownEntity {
                entity: set.entity.clone(),
            });
        }
        for modifier in &set.modifiers {
            if !modifier_fits(&set.entity, modifier) {
                return Err(CoherenceViolation::IncoherentModifier {
                    entity: set.entity.clone(),
                    modifier: modifier.clone(),
                });
            }
        }
    }
    let text_layout = match layout(record) {
        Ok(l) => l,
        Err(DvmpError::TextLayout { word }) => {
            // A modifier missing from its window means it does not precede
            // its entity.
            let set = record
                .gold_sets
                .iter()
                .find(|s| s.modifiers.contains(&word) || s.entity == word);
            return Err(CoherenceViolation::ModifierPlacement {
                entity: set.map(|s| s.entity.clone()).unwrap_or_default(),
                modifier: word,
            });
        }
        Err(_) => unreachable!("layout only fails with TextLayout"),
    };
    for (_, mods) in &text_layout.sets {
        let Some(&first) = mods.iter().min() else { continue };
        let Some(art_pos) = first.checked_sub(1) else { continue };
        let word = &text_layout.words[first];
        let found = &text_layout.words[art_pos];
        if matches!(found.as_str(), "a" | "an" | "A" | "An")
            && found.to_lowercase() != article_for(word)
        {
            return Err(CoherenceViolation::ArticleMismatch {
                found: found.clone(),
                word: word.clone(),
            });
        }
    }
    Ok(())
}

/// One prompt per line.
pub fn write_prompts_txt(records: &[PromptRecord], w: &mut impl Write) -> std::io::Result<()> {
    for record in records {
        writeln!(w, "{}", record.text)?;
    }
    Ok(())
}

/// One gold record per line as JSON.
pub fn write_gold_jsonl(records: &[PromptRecord], w: &mut impl Write) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut *w, record)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
