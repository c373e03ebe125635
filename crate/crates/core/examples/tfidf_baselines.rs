//! Fit a train-only TF-IDF vocabulary over subword pieces, then compare the
//! dummy, logistic regression and gradient-boosted trees on question type.
//! The logistic model is dumped to JSON with its vocabulary.

use qprobe::baselines::{fit_baseline, predict_baseline, BaselineKind, BaselineModel, ModelDump, SparseMatrix};
use qprobe::corpus::QuestionType;
use qprobe::features::{fit_vocabulary, vectorize, SubwordSequence};
use qprobe::runner::{evaluate, make_splits};
use qprobe::synthetic::{synthetic_corpus, synthetic_subwords};
use qprobe::TaskKind;

fn rows(seqs: &[SubwordSequence], idx: &[usize], vocab: &qprobe::features::TfidfVocabulary) -> qprobe::Result<SparseMatrix> {
    SparseMatrix::from_rows(idx.iter().map(|&i| vectorize(&seqs[i], vocab)).collect(), vocab.len())
}

fn main() -> qprobe::Result<()> {
    let corpus = synthetic_corpus(&["syn"], 300, 5);
    let subwords = synthetic_subwords(&corpus);
    let labels: Vec<f64> = corpus
        .iter()
        .map(|s| f64::from(s.question_label.map_or(0, QuestionType::as_label)))
        .collect();
    let splits = make_splits(corpus.len(), 42, Some(&labels))?;

    let train: Vec<SubwordSequence> = splits.train.iter().map(|&i| subwords[i].clone()).collect();
    let vocab = fit_vocabulary(&train, "syn/train")?;
    let x_train = rows(&subwords, &splits.train, &vocab)?;
    let x_test = rows(&subwords, &splits.test, &vocab)?;
    let y_train: Vec<f64> = splits.train.iter().map(|&i| labels[i]).collect();
    let y_test: Vec<f64> = splits.test.iter().map(|&i| labels[i]).collect();
    println!("vocabulary: {} pieces, train {}, test {}", vocab.len(), y_train.len(), y_test.len());

    let mut logistic = None;
    for kind in [BaselineKind::Dummy, BaselineKind::Linear, BaselineKind::Gbt] {
        let model = fit_baseline(kind, &x_train, &y_train, TaskKind::Classification)?;
        let acc = evaluate(&predict_baseline(&model, &x_test)?, &y_test, TaskKind::Classification)?;
        println!("{:<8} accuracy {acc:.1}%", kind.name());
        if let BaselineModel::Linear(_) = model {
            logistic = Some(model);
        }
    }

    let dump = ModelDump::new("syn", TaskKind::Classification, Some(vocab), logistic.expect("linear was fitted"));
    let path = std::env::temp_dir().join("qprobe-logistic.json");
    dump.save(&path)?;
    let back = ModelDump::load(&path)?;
    println!("dumped to {} (format v{})", path.display(), back.format_version);
    Ok(())
}
