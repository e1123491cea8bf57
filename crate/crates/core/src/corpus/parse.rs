use std::fmt::Write as _;

use crate::error::{Error, Result};

/// One numbered line of a story.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    /// 1-based line number as printed in the file.
    pub line: usize,
    pub tokens: Vec<String>,
    pub is_question: bool,
}

/// A question with its single answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QaSample {
    /// Indices into [`Story::sentences`] of every statement before the question.
    pub context: Vec<usize>,
    pub question: Vec<String>,
    pub answer: String,
    /// 1-based line numbers of the supporting statements. Never used for training.
    pub supporting_facts: Vec<usize>,
}

/// A narrative that starts where the line numbering resets to 1.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Story {
    pub sentences: Vec<Sentence>,
    pub qas: Vec<QaSample>,
}

impl Story {
    pub fn context_sentences<'a>(&'a self, qa: &'a QaSample) -> impl Iterator<Item = &'a Sentence> + 'a {
        qa.context.iter().map(move |&i| &self.sentences[i])
    }

    /// Renders the story back into bAbI line format (normalized tokens).
    pub fn to_babi_text(&self) -> String {
        let mut out = String::new();
        let mut qa_iter = self.qas.iter();
        for s in &self.sentences {
            let text = s.tokens.join(" ");
            if s.is_question {
                let qa = qa_iter.next().expect("one QA per question line");
                let support: Vec<String> = qa.supporting_facts.iter().map(|n| n.to_string()).collect();
                let _ = writeln!(out, "{} {}?\t{}\t{}", s.line, text, qa.answer, support.join(" "));
            } else {
                let _ = writeln!(out, "{} {}.", s.line, text);
            }
        }
        out
    }
}

/// Lowercases and splits a sentence, dropping `.` and `?`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(|w| w.trim_end_matches(['.', '?']).to_lowercase()).filter(|w| !w.is_empty()).collect()
}

/// Parses a bAbI task file into stories.
pub fn parse_task_file(text: &str) -> Result<Vec<Story>> {
    let mut stories: Vec<Story> = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let lineno = index + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let line = line.trim_start();
        let (number, rest) = line.split_once(' ').unwrap_or((line, ""));
        let number: usize = number.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("expected a leading line number, found `{number}`"),
        })?;
        if number == 0 {
            return Err(Error::Parse { line: lineno, message: "line numbers start at 1".into() });
        }
        if number == 1 {
            stories.push(Story::default());
        }
        let story = stories.last_mut().ok_or_else(|| Error::Parse {
            line: lineno,
            message: format!("story must start at line number 1, found {number}"),
        })?;
        if let Some(prev) = story.sentences.last() {
            if number <= prev.line {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("line number {number} does not follow {}", prev.line),
                });
            }
        }

        if rest.contains('?') || rest.contains('\t') {
            let mut fields = rest.split('\t');
            let question = fields.next().unwrap_or_default();
            let answer = fields.next().map(str::trim).unwrap_or_default();
            if answer.is_empty() {
                return Err(Error::Parse {
                    line: lineno,
                    message: "question is missing its tab-separated answer".into(),
                });
            }
            let supporting_facts = fields
                .next()
                .unwrap_or_default()
                .split_whitespace()
                .map(|n| {
                    n.parse::<usize>().map_err(|_| Error::Parse {
                        line: lineno,
                        message: format!("supporting fact `{n}` is not a line number"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            for &fact in &supporting_facts {
                let ok = story.sentences.iter().any(|s| s.line == fact && !s.is_question);
                if !ok {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("supporting fact {fact} is not an earlier statement"),
                    });
                }
            }
            let context = story.sentences.iter().enumerate().filter(|(_, s)| !s.is_question).map(|(i, _)| i).collect();
            story.sentences.push(Sentence { line: number, tokens: tokenize(question), is_question: true });
            story.qas.push(QaSample {
                context,
                question: tokenize(question),
                answer: answer.to_lowercase(),
                supporting_facts,
            });
        } else {
            story.sentences.push(Sentence { line: number, tokens: tokenize(rest), is_question: false });
        }
    }
    Ok(stories)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_normalizes() {
        assert_eq!(tokenize("Where is the milk? "), ["where", "is", "the", "milk"]);
        assert_eq!(tokenize("Mary got the milk there."), ["mary", "got", "the", "milk", "there"]);
    }

    #[test]
    fn list_answers_stay_atomic() {
        let stories = parse_task_file("1 Mary got the milk.\n2 What is Mary carrying?\tmilk,apple\t1\n").unwrap();
        assert_eq!(stories[0].qas[0].answer, "milk,apple");
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let err = parse_task_file("1 Mary moved.\nhello there\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_task_file("1 Mary moved.\n2 Where is Mary?\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_task_file("3 Mary moved.\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = parse_task_file("1 Mary moved.\n2 Where is Mary?\thall\t2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn accepts_official_spacing_and_crlf() {
        let text = "1 Mary moved to the bathroom.\r\n2 Where is Mary? \tbathroom\t1\r\n";
        let stories = parse_task_file(text).unwrap();
        assert_eq!(stories[0].qas[0].question, ["where", "is", "mary"]);
        assert_eq!(stories[0].qas[0].supporting_facts, [1]);
    }
}
