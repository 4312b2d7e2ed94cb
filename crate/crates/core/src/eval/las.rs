use crate::conllu::Sentence;
use crate::error::{Error, Result};
use crate::parser::ParseResult;

/// Labelled attachment counts `(correct, total)`; every token counts,
/// punctuation included.
pub fn las(gold: &Sentence, predicted: &ParseResult) -> Result<(usize, usize)> {
    let n = gold.len();
    if predicted.heads.len() != n || predicted.deprels.len() != n {
        return Err(Error::SentenceMismatch(format!(
            "sentence {}: gold has {n} tokens, prediction has {}",
            gold.id,
            predicted.heads.len()
        )));
    }
    let mut correct = 0;
    for (i, token) in gold.tokens.iter().enumerate() {
        let (Some(head), Some(deprel)) = (token.head, token.deprel.as_deref()) else {
            return Err(Error::SentenceMismatch(format!("sentence {} has no gold annotation", gold.id)));
        };
        if head == predicted.heads[i] && deprel == predicted.deprels[i] {
            correct += 1;
        }
    }
    Ok((correct, n))
}

/// Ratio of summed counts; 0 for an empty total.
pub fn micro_average(counts: impl IntoIterator<Item = (usize, usize)>) -> (usize, usize, f64) {
    let (c, t) = counts.into_iter().fold((0, 0), |(a, b), (c, t)| (a + c, b + t));
    (c, t, if t == 0 { 0.0 } else { c as f64 / t as f64 })
}
