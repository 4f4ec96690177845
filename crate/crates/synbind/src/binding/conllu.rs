//! CoNLL-U reader for dependency-parsed prompts.
//!
//! Only the columns needed for binding extraction are retained: ID, FORM,
//! LEMMA, UPOS, HEAD and DEPREL. Multiword-token ranges (`1-2`) and empty
//! nodes (`1.1`) are skipped. Sentences are separated by blank lines and
//! `#` comment lines are ignored.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{DependencyGraph, Token};

/// Universal POS tags (UD v2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum Upos {
    ADJ,
    ADP,
    ADV,
    AUX,
    CCONJ,
    DET,
    INTJ,
    NOUN,
    NUM,
    PART,
    PRON,
    PROPN,
    PUNCT,
    SCONJ,
    SYM,
    VERB,
    X,
}

impl Upos {
    /// Nouns that can anchor a binding set.
    pub fn is_noun(self) -> bool {
        matches!(self, Upos::NOUN | Upos::PROPN)
    }

    /// Content words: the only tokens eligible as modifiers or unmatched words.
    pub fn is_content(self) -> bool {
        matches!(
            self,
            Upos::NOUN | Upos::PROPN | Upos::ADJ | Upos::VERB | Upos::NUM
        )
    }
}

impl fmt::Display for Upos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

#[derive(Debug, PartialEq, Eq, Error)]
#[error("unknown UPOS tag `{0}`")]
pub struct ParseUposError(String);

impl FromStr for Upos {
    type Err = ParseUposError;

    fn from_str(value: &str) -> Result<Self, Self::Err> {
        use Upos::*;
        match value {
            "ADJ" => Ok(ADJ),
            "ADP" => Ok(ADP),
            "ADV" => Ok(ADV),
            "AUX" => Ok(AUX),
            "CCONJ" => Ok(CCONJ),
            "DET" => Ok(DET),
            "INTJ" => Ok(INTJ),
            "NOUN" => Ok(NOUN),
            "NUM" => Ok(NUM),
            "PART" => Ok(PART),
            "PRON" => Ok(PRON),
            "PROPN" => Ok(PROPN),
            "PUNCT" => Ok(PUNCT),
            "SCONJ" => Ok(SCONJ),
            "SYM" => Ok(SYM),
            "VERB" => Ok(VERB),
            "X" => Ok(X),
            other => Err(ParseUposError(other.to_string())),
        }
    }
}

/// Errors raised while reading a CoNLL-U document.
#[derive(Debug, Error)]
pub enum ConlluError {
    #[error("line {line}: expected 10 tab-separated columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("line {line}: invalid token id `{value}`")]
    InvalidId { line: usize, value: String },
    #[error("line {line}: invalid head `{value}`")]
    InvalidHead { line: usize, value: String },
    #[error("line {line}: {source}")]
    InvalidUpos {
        line: usize,
        #[source]
        source: ParseUposError,
    },
    #[error("sentence ending at line {line}: token ids are not contiguous from 1")]
    NonContiguousIds { line: usize },
    #[error("sentence ending at line {line}: head {head} of token {token} does not exist")]
    DanglingHead { line: usize, token: usize, head: usize },
    #[error("sentence ending at line {line}: expected exactly one root token, found {found}")]
    RootCount { line: usize, found: usize },
    #[error("sentence ending at line {line}: cyclic head chain through token {token}")]
    CyclicHeads { line: usize, token: usize },
}

/// Parse a CoNLL-U document into one [`DependencyGraph`] per sentence.
pub fn parse_conllu(document: &str) -> Result<Vec<DependencyGraph>, ConlluError> {
    let mut graphs = Vec::new();
    let mut pending: Vec<Token> = Vec::new();
    let mut text_comment: Option<String> = None;
    let mut last_line = 0usize;

    let mut flush = |tokens: &mut Vec<Token>,
                     text: &mut Option<String>,
                     line: usize|
     -> Result<(), ConlluError> {
        if tokens.is_empty() {
            return Ok(());
        }
        let graph = validate_sentence(std::mem::take(tokens), text.take(), line)?;
        graphs.push(graph);
        Ok(())
    };

    for (idx, raw) in document.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut pending, &mut text_comment, line_no)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "text" {
                    text_comment = Some(value.trim().to_string());
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(ConlluError::ColumnCount {
                line: line_no,
                found: cols.len(),
            });
        }
        // Multiword ranges ("1-2") and empty nodes ("1.1") carry no arcs.
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let index: usize = cols[0].parse().map_err(|_| ConlluError::InvalidId {
            line: line_no,
            value: cols[0].to_string(),
        })?;
        let head: usize = cols[6].parse().map_err(|_| ConlluError::InvalidHead {
            line: line_no,
            value: cols[6].to_string(),
        })?;
        let upos: Upos = cols[3].parse().map_err(|source| ConlluError::InvalidUpos {
            line: line_no,
            source,
        })?;
        pending.push(Token {
            index,
            surface: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos,
            head,
            deprel: cols[7].to_string(),
        });
    }
    flush(&mut pending, &mut text_comment, last_line)?;
    Ok(graphs)
}

fn validate_sentence(
    tokens: Vec<Token>,
    text: Option<String>,
    line: usize,
) -> Result<DependencyGraph, ConlluError> {
    let n = tokens.len();
    for (i, tok) in tokens.iter().enumerate() {
        if tok.index != i + 1 {
            return Err(ConlluError::NonContiguousIds { line });
        }
        if tok.head > n {
            return Err(ConlluError::DanglingHead {
                line,
                token: tok.index,
                head: tok.head,
            });
        }
    }
    let roots = tokens.iter().filter(|t| t.head == 0).count();
    if roots != 1 {
        return Err(ConlluError::RootCount { line, found: roots });
    }
    // Walk each head chain; a chain longer than n tokens must revisit a node.
    for tok in &tokens {
        let mut cursor = tok.head;
        let mut hops = 0usize;
        while cursor != 0 {
            hops += 1;
            if hops > n {
                return Err(ConlluError::CyclicHeads {
                    line,
                    token: tok.index,
                });
            }
            cursor = tokens[cursor - 1].head;
        }
    }
    let sentence_text =
        text.unwrap_or_else(|| tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" "));
    Ok(DependencyGraph {
        tokens,
        sentence_text,
    })
}
