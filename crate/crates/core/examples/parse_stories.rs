//! Parses a bAbI block and shows stories, questions and the encoded input.

use dmtn::corpus::{build_vocabulary, encode_sample, parse_task_file};

const BLOCK: &str = "1 Mary got the milk there.
2 John moved to the bedroom.
3 Sandra went back to the kitchen.
4 Mary travelled to the hallway.
5 Where is the milk?\thallway\t1 4
6 John got the football there.
7 John went to the hallway.
8 Where is the football?\thallway\t6 7
";

fn main() -> dmtn::Result<()> {
    let stories = parse_task_file(BLOCK)?;
    let vocab = build_vocabulary(&stories, &[]);
    println!("{} story, vocabulary of {} tokens", stories.len(), vocab.len());
    for story in &stories {
        for qa in &story.qas {
            let context: Vec<usize> = story.context_sentences(qa).map(|s| s.line).collect();
            println!(
                "\nQ: {}  A: {}  supports {:?}  context lines {:?}",
                qa.question.join(" "),
                qa.answer,
                qa.supporting_facts,
                context
            );
            let encoded = encode_sample(story, qa, &vocab)?;
            let ids: Vec<u32> = encoded.input_ids.iter().map(|t| t.0).collect();
            println!("   input ids {ids:?}");
            println!("   end-of-sentence positions {:?}", encoded.eos_positions);
        }
    }
    Ok(())
}
