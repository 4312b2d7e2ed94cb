//! Reading, validating and writing CoNLL-U treebanks.
//!
//! Only basic nodes become [`Token`]s. Comment lines, multiword-token
//! ranges and empty nodes are kept as opaque lines so that a sentence read
//! from a file is written back byte-for-byte.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const N_COLUMNS: usize = 10;
const COL_ID: usize = 0;
const COL_FORM: usize = 1;
const COL_UPOS: usize = 3;
const COL_HEAD: usize = 6;
const COL_DEPREL: usize = 7;

/// A basic node of a dependency tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub upos: Option<String>,
    /// Head position, `0` for the root. `None` when unannotated.
    pub head: Option<usize>,
    pub deprel: Option<String>,
    columns: Option<Vec<String>>,
}

impl Token {
    pub fn new(index: usize, form: impl Into<String>) -> Self {
        Token {
            index,
            form: form.into(),
            upos: None,
            head: None,
            deprel: None,
            columns: None,
        }
    }

    pub fn with_upos(mut self, upos: impl Into<String>) -> Self {
        self.upos = Some(upos.into());
        self
    }

    pub fn with_dep(mut self, head: usize, deprel: impl Into<String>) -> Self {
        self.head = Some(head);
        self.deprel = Some(deprel.into());
        self
    }

    /// Number of Unicode scalar values in the form.
    pub fn char_count(&self) -> usize {
        self.form.chars().count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Line {
    Comment(String),
    Word(usize),
    Opaque(String),
}

/// A sentence with its tokens, optional source treebank (1-based id) and the
/// original line layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<Token>,
    pub source_treebank: Option<usize>,
    layout: Vec<Line>,
}

impl Sentence {
    /// Builds a sentence with `sent_id` and `text` comments.
    pub fn new(id: impl Into<String>, tokens: Vec<Token>, source_treebank: Option<usize>) -> Self {
        let id = id.into();
        let text = tokens
            .iter()
            .map(|t| t.form.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let mut layout = vec![
            Line::Comment(format!("# sent_id = {id}")),
            Line::Comment(format!("# text = {text}")),
        ];
        layout.extend((0..tokens.len()).map(Line::Word));
        Sentence {
            id,
            tokens,
            source_treebank,
            layout,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }

    /// True when every token carries a head and a label.
    pub fn is_annotated(&self) -> bool {
        self.tokens
            .iter()
            .all(|t| t.head.is_some() && t.deprel.is_some())
    }

    pub fn heads(&self) -> Option<Vec<usize>> {
        self.tokens.iter().map(|t| t.head).collect()
    }

    /// Comment lines in the order they appear.
    pub fn comments(&self) -> impl Iterator<Item = &str> {
        self.layout.iter().filter_map(|l| match l {
            Line::Comment(c) => Some(c.as_str()),
            _ => None,
        })
    }

    /// Returns a copy with HEAD and DEPREL replaced by the given annotation.
    pub fn with_annotation(&self, heads: &[usize], deprels: &[String]) -> Result<Sentence> {
        if heads.len() != self.len() || deprels.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: heads.len().min(deprels.len()),
            });
        }
        let mut out = self.clone();
        for ((token, &head), deprel) in out.tokens.iter_mut().zip(heads).zip(deprels) {
            token.head = Some(head);
            token.deprel = Some(deprel.clone());
        }
        Ok(out)
    }

    /// Returns a copy with all HEAD and DEPREL columns cleared.
    pub fn without_annotation(&self) -> Sentence {
        let mut out = self.clone();
        for token in &mut out.tokens {
            token.head = None;
            token.deprel = None;
        }
        out
    }
}

/// A treebank with named splits (`train`, `dev`, `test`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Treebank {
    /// 1-based id within a model.
    pub id: usize,
    pub name: String,
    pub splits: BTreeMap<String, Vec<Sentence>>,
}

impl Treebank {
    pub fn new(id: usize, name: impl Into<String>) -> Self {
        Treebank {
            id,
            name: name.into(),
            splits: BTreeMap::new(),
        }
    }

    pub fn split(&self, name: &str) -> &[Sentence] {
        self.splits.get(name).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// A failed tree invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    MissingHead { token: usize },
    MissingDeprel { token: usize },
    HeadOutOfRange { token: usize, head: usize },
    SelfLoop { token: usize },
    NoRoot,
    MultipleRoots { tokens: Vec<usize> },
    Cycle { tokens: Vec<usize> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingHead { token } => write!(f, "token {token} has no head"),
            Violation::MissingDeprel { token } => write!(f, "token {token} has no deprel"),
            Violation::HeadOutOfRange { token, head } => {
                write!(f, "token {token} has out-of-range head {head}")
            }
            Violation::SelfLoop { token } => write!(f, "token {token} is its own head"),
            Violation::NoRoot => write!(f, "no root"),
            Violation::MultipleRoots { tokens } => write!(f, "multiple roots {tokens:?}"),
            Violation::Cycle { tokens } => write!(f, "cycle through {tokens:?}"),
        }
    }
}

/// Checks the tree invariants of an annotated sentence.
pub fn validate_tree(sentence: &Sentence) -> Result<(), Vec<Violation>> {
    let n = sentence.len();
    let mut violations = Vec::new();
    let mut heads = Vec::with_capacity(n);
    for token in &sentence.tokens {
        match token.head {
            None => violations.push(Violation::MissingHead { token: token.index }),
            Some(h) if h > n => violations.push(Violation::HeadOutOfRange {
                token: token.index,
                head: h,
            }),
            Some(h) if h == token.index => violations.push(Violation::SelfLoop { token: token.index }),
            Some(_) => {}
        }
        if matches!(token.deprel.as_deref(), None | Some("")) {
            violations.push(Violation::MissingDeprel { token: token.index });
        }
        heads.push(token.head.filter(|&h| h <= n));
    }

    let roots: Vec<usize> = (0..n).filter(|&i| heads[i] == Some(0)).map(|i| i + 1).collect();
    if n > 0 && roots.is_empty() {
        violations.push(Violation::NoRoot);
    } else if roots.len() > 1 {
        violations.push(Violation::MultipleRoots { tokens: roots });
    }

    // Walk up from every token; a walk longer than n revisits a node.
    let mut in_cycle = BTreeSet::new();
    for start in 1..=n {
        let mut node = start;
        let mut steps = 0;
        while let Some(Some(h)) = heads.get(node - 1) {
            if *h == 0 || steps > n {
                break;
            }
            node = *h;
            steps += 1;
        }
        if steps > n {
            // `node` is on the cycle; collect it.
            let mut cur = node;
            loop {
                in_cycle.insert(cur);
                cur = heads[cur - 1].expect("cycle member has head");
                if cur == node {
                    break;
                }
            }
        }
    }
    // Self loops are reported separately.
    let cycle: Vec<usize> = in_cycle
        .into_iter()
        .filter(|&t| heads[t - 1] != Some(t))
        .collect();
    if !cycle.is_empty() {
        violations.push(Violation::Cycle { tokens: cycle });
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

fn optional(field: &str) -> Option<String> {
    if field == "_" {
        None
    } else {
        Some(field.to_string())
    }
}

/// Parses CoNLL-U text.
///
/// Sentences without a `# sent_id` comment get the id `<prefix>:<ordinal>`.
/// Fully annotated sentences must be valid trees; fully unannotated
/// sentences (all HEAD `_`) are accepted as parser input.
pub fn read_conllu(text: &str, treebank: Option<usize>, prefix: &str) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut layout: Vec<Line> = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut sent_id: Option<String> = None;
    let mut start_line = 1;

    let mut finish = |layout: &mut Vec<Line>,
                      tokens: &mut Vec<Token>,
                      sent_id: &mut Option<String>,
                      start_line: usize|
     -> Result<()> {
        if layout.is_empty() {
            return Ok(());
        }
        if tokens.is_empty() {
            return Err(Error::Parse {
                line: start_line,
                message: "sentence block without basic tokens".into(),
            });
        }
        let ordinal = sentences.len() + 1;
        let id = sent_id
            .take()
            .unwrap_or_else(|| format!("{prefix}:{ordinal}"));
        let sentence = Sentence {
            id,
            tokens: std::mem::take(tokens),
            source_treebank: treebank,
            layout: std::mem::take(layout),
        };
        check_sentence(&sentence)?;
        sentences.push(sentence);
        Ok(())
    };

    for (lineno, raw) in text.split('\n').enumerate() {
        let lineno = lineno + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            finish(&mut layout, &mut tokens, &mut sent_id, start_line)?;
            continue;
        }
        if layout.is_empty() {
            start_line = lineno;
        }
        if line.starts_with('#') {
            if let Some(rest) = line.strip_prefix("# sent_id") {
                if let Some(value) = rest.trim_start().strip_prefix('=') {
                    sent_id = Some(value.trim().to_string());
                }
            }
            layout.push(Line::Comment(line.to_string()));
            continue;
        }
        let columns: Vec<&str> = line.split('\t').collect();
        if columns.len() != N_COLUMNS {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {N_COLUMNS} tab-separated fields, found {}", columns.len()),
            });
        }
        let id = columns[COL_ID];
        if id.contains('-') || id.contains('.') {
            layout.push(Line::Opaque(line.to_string()));
            continue;
        }
        let index: usize = id.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("invalid token id {id:?}"),
        })?;
        if index != tokens.len() + 1 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("token id {index} out of sequence"),
            });
        }
        let head = match columns[COL_HEAD] {
            "_" => None,
            h => Some(h.parse::<usize>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("non-integer HEAD {h:?}"),
            })?),
        };
        layout.push(Line::Word(tokens.len()));
        tokens.push(Token {
            index,
            form: columns[COL_FORM].to_string(),
            upos: optional(columns[COL_UPOS]),
            head,
            deprel: optional(columns[COL_DEPREL]),
            columns: Some(columns.iter().map(|c| c.to_string()).collect()),
        });
    }
    finish(&mut layout, &mut tokens, &mut sent_id, start_line)?;
    Ok(sentences)
}

fn check_sentence(sentence: &Sentence) -> Result<()> {
    let any_head = sentence.tokens.iter().any(|t| t.head.is_some());
    if !any_head {
        return Ok(());
    }
    validate_tree(sentence).map_err(|violations| Error::InvalidTree {
        sentence: sentence.id.clone(),
        violations,
    })
}

pub fn read_conllu_file(path: &Path, treebank: Option<usize>, prefix: &str) -> Result<Vec<Sentence>> {
    let text = fs::read_to_string(path)?;
    read_conllu(&text, treebank, prefix)
}

/// Serializes sentences as CoNLL-U with LF line endings.
pub fn write_conllu(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for sentence in sentences {
        for line in &sentence.layout {
            match line {
                Line::Comment(c) | Line::Opaque(c) => out.push_str(c),
                Line::Word(i) => write_token(&mut out, &sentence.tokens[*i]),
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

fn write_token(out: &mut String, token: &Token) {
    let head = token.head.map(|h| h.to_string());
    let mut columns: Vec<&str> = match &token.columns {
        Some(c) => c.iter().map(String::as_str).collect(),
        None => vec!["_"; N_COLUMNS],
    };
    let index = token.index.to_string();
    if token.columns.is_none() {
        columns[COL_ID] = &index;
    }
    columns[COL_FORM] = &token.form;
    columns[COL_UPOS] = token.upos.as_deref().unwrap_or("_");
    // Keep the original spelling of an unchanged head (e.g. leading zeros).
    let original_head = token
        .columns
        .as_ref()
        .and_then(|c| c[COL_HEAD].parse::<usize>().ok());
    if original_head != token.head {
        columns[COL_HEAD] = head.as_deref().unwrap_or("_");
    }
    columns[COL_DEPREL] = token.deprel.as_deref().unwrap_or("_");
    out.push_str(&columns.join("\t"));
}
