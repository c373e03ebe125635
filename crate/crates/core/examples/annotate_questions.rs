//! Label polar and content questions with the builtin English pack and with
//! a small custom pack loaded from TOML.

use std::collections::BTreeMap;

use qprobe::annotator::{annotate_corpus, classify_question, RulePack};
use qprobe::corpus::{DepSentence, Token};

fn sentence(id: &str, words: &[(&str, &str)]) -> DepSentence {
    let tokens = words
        .iter()
        .enumerate()
        .map(|(i, (form, upos))| Token {
            index: i + 1,
            form: form.to_string(),
            lemma: form.to_lowercase(),
            upos: upos.to_string(),
            head: if i == 0 { 0 } else { 1 },
            deprel: if i == 0 { "root".into() } else { "dep".into() },
        })
        .collect();
    DepSentence::new(id, "eng", tokens)
}

const CUSTOM: &str = r#"
language = "eng"
default_verdict = "abstain"

[[rules]]
id = "wh-first"
kind = "initial_token_class"
target_field = "lemma"
payload = ["what", "who", "where"]
verdict = "content"
priority = 10
"#;

fn main() -> qprobe::Result<()> {
    let corpus = vec![
        sentence("q1", &[("Is", "AUX"), ("it", "PRON"), ("raining", "VERB"), ("?", "PUNCT")]),
        sentence("q2", &[("Where", "ADV"), ("is", "AUX"), ("she", "PRON"), ("?", "PUNCT")]),
        sentence("q3", &[("You", "PRON"), ("left", "VERB"), ("?", "PUNCT")]),
        sentence("q4", &[("It", "PRON"), ("rains", "VERB"), (".", "PUNCT")]),
    ];

    let builtin = RulePack::builtin("eng")?;
    let packs = BTreeMap::from([("eng".to_string(), builtin)]);
    let (annotated, coverage) = annotate_corpus(&corpus, &packs)?;
    for a in &annotated {
        println!("{:<4} {:<28} {:?}", a.sentence.id, a.sentence.text, a.classification);
    }
    println!("coverage: {} polar, {} content, {} abstained\n", coverage.polar, coverage.content, coverage.abstained);

    let custom = RulePack::from_toml(CUSTOM)?;
    for s in &corpus {
        println!("custom {:<4} {:?}", s.id, classify_question(s, &custom).label());
    }
    Ok(())
}
