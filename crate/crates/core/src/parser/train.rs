use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conllu::{validate_tree, Sentence};
use crate::error::{Error, Result};
use crate::parser::config::ParserConfig;
use crate::parser::model::{ParserModel, Params, Vocab, UNK};
use crate::parser::transition::{is_projective, oracle_transitions, projectivize, Action, OracleError};

/// One training treebank: its name and annotated sentences.
#[derive(Clone, Debug)]
pub struct TrainingTreebank {
    pub name: String,
    pub sentences: Vec<Sentence>,
}

/// Losses summed over each epoch, in order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    /// Sentences whose trees were lifted to make them projective.
    pub projectivized: usize,
}

pub(crate) struct Example {
    pub id: String,
    pub treebank: usize,
    pub words: Vec<usize>,
    pub chars: Vec<Vec<usize>>,
    pub actions: Vec<Action>,
}

fn gold_of(sentence: &Sentence) -> Result<(Vec<usize>, Vec<String>)> {
    if let Err(violations) = validate_tree(sentence) {
        return Err(Error::InvalidTree {
            sentence: sentence.id.clone(),
            violations,
        });
    }
    let heads = sentence.heads().expect("validated tree has heads");
    let deprels = sentence
        .tokens
        .iter()
        .map(|t| t.deprel.clone().expect("validated tree has labels"))
        .collect();
    Ok((heads, deprels))
}

impl ParserModel {
    /// Encodes a gold sentence as word ids, char ids and oracle actions.
    /// Non-projective trees are lifted first; the flag reports whether that
    /// happened.
    pub(crate) fn example(&self, treebank: usize, sentence: &Sentence) -> Result<(Example, bool)> {
        if treebank == 0 || treebank > self.m() {
            return Err(Error::TreebankOutOfRange {
                index: treebank,
                m: self.m(),
            });
        }
        let (mut heads, deprels) = gold_of(sentence)?;
        let lifted = !is_projective(&heads);
        if lifted {
            heads = projectivize(&heads);
        }
        let labels = deprels
            .iter()
            .map(|d| {
                self.labels
                    .get(d)
                    .ok_or_else(|| Error::Config(format!("sentence {}: unknown label {d:?}", sentence.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        let actions = oracle_transitions(self.system(), &heads, &labels).map_err(|e| match e {
            OracleError::NonProjective | OracleError::Malformed(_) => {
                Error::Config(format!("sentence {}: {e}", sentence.id))
            }
        })?;
        let example = Example {
            id: sentence.id.clone(),
            treebank,
            words: sentence.forms().map(|f| self.word_id(f)).collect(),
            chars: sentence.forms().map(|f| self.char_ids(f)).collect(),
            actions,
        };
        Ok((example, lifted))
    }

    /// Summed loss and gradient over gold sentences, each paired with its
    /// 1-based treebank id. No dropout is applied.
    pub fn loss_and_gradient(&self, data: &[(usize, &Sentence)]) -> Result<(f64, Params<f64>)> {
        let mut grads = Params::zeros_like(&self.params);
        let mut loss = 0.0;
        for &(treebank, sentence) in data {
            let (ex, _) = self.example(treebank, sentence)?;
            loss += self.sentence_gradient(&ex.words, &ex.chars, ex.treebank, &ex.actions, &mut grads);
        }
        Ok((loss, grads))
    }

    /// Summed loss over gold sentences.
    pub fn loss(&self, data: &[(usize, &Sentence)]) -> Result<f64> {
        Ok(self.loss_and_gradient(data)?.0)
    }
}

/// Builds vocabularies from the training data: words seen at least
/// `min_word_freq` times, every character, every label.
fn build_vocabs(config: &ParserConfig, treebanks: &[TrainingTreebank]) -> Result<(Vocab, Vocab, Vocab)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut chars = BTreeSet::new();
    let mut labels = BTreeSet::new();
    for sentence in treebanks.iter().flat_map(|t| &t.sentences) {
        for token in &sentence.tokens {
            *counts.entry(token.form.as_str()).or_default() += 1;
            chars.extend(token.form.chars());
            if let Some(d) = &token.deprel {
                labels.insert(d.clone());
            }
        }
    }
    let words = Vocab::with_reserved_words(
        counts
            .into_iter()
            .filter(|&(_, c)| c >= config.min_word_freq)
            .map(|(w, _)| w.to_string()),
    )?;
    let mut char_items = vec!["<unk>".to_string()];
    char_items.extend(chars.into_iter().map(String::from));
    Ok((words, Vocab::new(char_items)?, Vocab::new(labels.into_iter().collect())?))
}

/// Trains a parser on several treebanks jointly with plain per-sentence SGD.
pub fn train(config: ParserConfig, treebanks: &[TrainingTreebank], seed: u64) -> Result<(ParserModel, TrainReport)> {
    config.validate()?;
    if treebanks.is_empty() || treebanks.iter().all(|t| t.sentences.is_empty()) {
        return Err(Error::EmptyTrainingData);
    }
    for sentence in treebanks.iter().flat_map(|t| &t.sentences) {
        gold_of(sentence)?;
    }
    let (words, chars, labels) = build_vocabs(&config, treebanks)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = treebanks.iter().map(|t| t.name.clone()).collect();
    let mut model = ParserModel::initialize(config, names, words, chars, labels, &mut rng)?;

    let mut report = TrainReport::default();
    let mut examples = Vec::new();
    for (i, tb) in treebanks.iter().enumerate() {
        for sentence in &tb.sentences {
            let (ex, lifted) = model.example(i + 1, sentence)?;
            report.projectivized += usize::from(lifted);
            examples.push(ex);
        }
    }

    let dropout = model.config.word_dropout;
    let lr = model.config.learning_rate;
    let mut grads = Params::zeros_like(&model.params);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..model.config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let ex = &examples[i];
            let words: Vec<usize> = ex
                .words
                .iter()
                .map(|&w| if w != UNK && rng.gen::<f64>() < dropout { UNK } else { w })
                .collect();
            grads.clear();
            let loss = model.sentence_gradient(&words, &ex.chars, ex.treebank, &ex.actions, &mut grads);
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch: epoch + 1,
                    sentence: ex.id.clone(),
                    loss,
                });
            }
            model.apply_gradient(&grads, lr);
            total += loss;
        }
        report.epoch_losses.push(total);
    }
    if !model.is_finite() {
        return Err(Error::Diverged {
            epoch: model.config.epochs,
            sentence: String::new(),
            loss: f64::NAN,
        });
    }
    if let (Some(&first), Some(&last)) = (report.epoch_losses.first(), report.epoch_losses.last()) {
        if report.epoch_losses.len() > 1 && last >= first {
            return Err(Error::NoProgress { initial: first, last });
        }
    }
    Ok((model, report))
}
