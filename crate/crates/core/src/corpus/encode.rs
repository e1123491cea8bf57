use super::parse::{QaSample, Story};
use super::vocab::{TokenId, Vocabulary};
use crate::error::Result;

/// A question with its context flattened to token ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSample {
    /// Context tokens with an end-of-sentence id after every sentence.
    pub input_ids: Vec<TokenId>,
    /// Positions of the end-of-sentence ids in `input_ids`.
    pub eos_positions: Vec<usize>,
    pub question_ids: Vec<TokenId>,
    pub answer_id: TokenId,
    /// Carried for inspection only.
    pub supporting_facts: Vec<usize>,
}

impl EncodedSample {
    pub fn fact_count(&self) -> usize {
        self.eos_positions.len()
    }

    /// Token ids of each context sentence, without the end-of-sentence marker.
    pub fn sentences(&self) -> impl Iterator<Item = &[TokenId]> {
        let mut start = 0;
        self.eos_positions.iter().map(move |&end| {
            let s = &self.input_ids[start..end];
            start = end + 1;
            s
        })
    }
}

pub fn encode_sample(story: &Story, qa: &QaSample, vocab: &Vocabulary) -> Result<EncodedSample> {
    let mut input_ids = Vec::new();
    let mut eos_positions = Vec::with_capacity(qa.context.len());
    for sentence in story.context_sentences(qa) {
        for t in &sentence.tokens {
            input_ids.push(vocab.lookup(t)?);
        }
        eos_positions.push(input_ids.len());
        input_ids.push(TokenId::EOS);
    }
    let question_ids = qa.question.iter().map(|t| vocab.lookup(t)).collect::<Result<Vec<_>>>()?;
    Ok(EncodedSample {
        input_ids,
        eos_positions,
        question_ids,
        answer_id: vocab.lookup(&qa.answer)?,
        supporting_facts: qa.supporting_facts.clone(),
    })
}

/// Encodes every question of every story, in file order.
pub fn encode_stories(stories: &[Story], vocab: &Vocabulary) -> Result<Vec<EncodedSample>> {
    let mut out = Vec::new();
    for story in stories {
        for qa in &story.qas {
            out.push(encode_sample(story, qa, vocab)?);
        }
    }
    Ok(out)
}
