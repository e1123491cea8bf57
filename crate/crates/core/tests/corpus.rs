use dmtn::corpus::{build_vocabulary, encode_sample, encode_stories, parse_task_file, synthetic, TokenId, Vocabulary};
use dmtn::Error;
use proptest::prelude::*;

const BLOCK: &str = "1 Mary got the milk there.
2 John moved to the bedroom.
3 Sandra went back to the kitchen.
4 Mary travelled to the hallway.
5 Where is the milk?\thallway\t1 4
6 John got the football there.
7 John went to the hallway.
8 Where is the football?\thallway\t6 7
";

#[test]
fn example_block_parses_into_one_story() {
    let stories = parse_task_file(BLOCK).unwrap();
    assert_eq!(stories.len(), 1);
    let story = &stories[0];
    assert_eq!(story.sentences.len(), 8);
    assert_eq!(story.qas.len(), 2);

    let first = &story.qas[0];
    assert_eq!(first.question, ["where", "is", "the", "milk"]);
    assert_eq!(first.answer, "hallway");
    assert_eq!(first.supporting_facts, [1, 4]);
    let lines: Vec<usize> = story.context_sentences(first).map(|s| s.line).collect();
    assert_eq!(lines, [1, 2, 3, 4]);

    let second = &story.qas[1];
    assert_eq!(second.question, ["where", "is", "the", "football"]);
    assert_eq!(second.answer, "hallway");
    assert_eq!(second.supporting_facts, [6, 7]);
    let lines: Vec<usize> = story.context_sentences(second).map(|s| s.line).collect();
    assert_eq!(lines, [1, 2, 3, 4, 6, 7]);
}

#[test]
fn empty_input_has_no_stories() {
    assert!(parse_task_file("").unwrap().is_empty());
}

#[test]
fn line_number_reset_starts_a_new_story() {
    let doubled = format!("{BLOCK}{BLOCK}");
    let stories = parse_task_file(&doubled).unwrap();
    assert_eq!(stories.len(), 2);
    assert_eq!(stories[0], stories[1]);
}

#[test]
fn vocabulary_base_case_and_contents() {
    let empty = build_vocabulary(&[], &[]);
    assert_eq!(empty.len(), 2);
    assert_eq!(empty.token(TokenId::PAD), Some("<pad>"));
    assert_eq!(empty.token(TokenId::EOS), Some("<eos>"));

    let stories = parse_task_file(BLOCK).unwrap();
    let vocab = build_vocabulary(&stories, &[]);
    let ids: Vec<TokenId> = ["mary", "hallway", "where", "football"].iter().map(|t| vocab.id(t).unwrap()).collect();
    assert!(ids.iter().all(|id| id.0 >= 2));
    let mut unique = ids.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), 4);
    // first occurrence order
    assert_eq!(vocab.id("mary"), Some(TokenId(2)));
}

#[test]
fn vocabulary_is_deterministic_and_closed_over_both_splits() {
    let a = build_vocabulary(&parse_task_file(BLOCK).unwrap(), &[]);
    let b = build_vocabulary(&parse_task_file(BLOCK).unwrap(), &[]);
    assert_eq!(a, b);

    let test = parse_task_file("1 Bill went to the park.\n2 Where is Bill?\tpark\t1\n").unwrap();
    let v = build_vocabulary(&parse_task_file(BLOCK).unwrap(), &test);
    assert!(v.id("bill").is_some() && v.id("park").is_some());
    assert_eq!(Vocabulary::from_tokens(v.tokens().to_vec()).unwrap(), v);
}

#[test]
fn encode_single_sentence_context() {
    let stories = parse_task_file("1 Mary got the milk there.\n2 Where is the milk?\tmilk\t1\n").unwrap();
    let vocab = build_vocabulary(&stories, &[]);
    let s = encode_sample(&stories[0], &stories[0].qas[0], &vocab).unwrap();
    assert_eq!(s.input_ids.len(), 6);
    assert_eq!(s.input_ids.last(), Some(&TokenId::EOS));
    assert_eq!(s.eos_positions, [5]);
    assert_eq!(s.answer_id, vocab.id("milk").unwrap());
}

#[test]
fn encode_example_block_questions() {
    let stories = parse_task_file(BLOCK).unwrap();
    let vocab = build_vocabulary(&stories, &[]);
    let samples = encode_stories(&stories, &vocab).unwrap();
    assert_eq!(samples[0].eos_positions.len(), 4);
    assert_eq!(samples[1].eos_positions.len(), 6);
    assert_eq!(samples[0].sentences().count(), 4);
    assert_eq!(samples[0].supporting_facts, [1, 4]);
}

#[test]
fn encode_empty_context_and_unknown_token() {
    let stories = parse_task_file("1 Where is Mary?\tnowhere\t\n").unwrap();
    let vocab = build_vocabulary(&stories, &[]);
    let s = encode_sample(&stories[0], &stories[0].qas[0], &vocab).unwrap();
    assert!(s.input_ids.is_empty() && s.eos_positions.is_empty());

    let other = Vocabulary::new();
    let err = encode_sample(&stories[0], &stories[0].qas[0], &other).unwrap_err();
    assert!(matches!(err, Error::Vocabulary(ref t) if t == "where"), "{err}");
}

#[test]
fn synthetic_generator_yields_five_questions_per_story() {
    let stories = parse_task_file(&synthetic::single_supporting_fact(200, 7)).unwrap();
    assert_eq!(stories.len(), 200);
    assert_eq!(stories.iter().map(|s| s.qas.len()).sum::<usize>(), 1000);
    assert_eq!(synthetic::single_supporting_fact(3, 1), synthetic::single_supporting_fact(3, 1));
}

proptest! {
    #[test]
    fn render_then_reparse_is_identity(seed in any::<u64>(), n in 1usize..6) {
        let stories = parse_task_file(&synthetic::single_supporting_fact(n, seed)).unwrap();
        let rendered: String = stories.iter().map(|s| s.to_babi_text()).collect();
        prop_assert_eq!(parse_task_file(&rendered).unwrap(), stories);
    }

    #[test]
    fn supporting_facts_reference_statements(seed in any::<u64>()) {
        let stories = parse_task_file(&synthetic::single_supporting_fact(4, seed)).unwrap();
        for story in &stories {
            for qa in &story.qas {
                for f in &qa.supporting_facts {
                    let s = story.sentences.iter().find(|s| s.line == *f).unwrap();
                    prop_assert!(!s.is_question);
                }
            }
        }
    }
}
