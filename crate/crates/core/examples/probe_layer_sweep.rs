//! Train an MLP probe per layer on real labels and one permuted control,
//! then report per-layer accuracy, selectivity and the layer profile.

use qprobe::corpus::QuestionType;
use qprobe::probes::{layer_sweep, ProbeConfig};
use qprobe::report::{best_layer, layer_profile};
use qprobe::runner::make_splits;
use qprobe::selectivity::{label_variants, selectivity_cls};
use qprobe::synthetic::{synthetic_corpus, synthetic_store};
use qprobe::TaskKind;

fn main() -> qprobe::Result<()> {
    let corpus = synthetic_corpus(&["syn"], 240, 9);
    let store = synthetic_store(&corpus, 6, 24, 10)?;
    let labels: Vec<f64> = corpus
        .iter()
        .map(|s| f64::from(s.question_label.map_or(0, QuestionType::as_label)))
        .collect();
    let splits = make_splits(labels.len(), 42, Some(&labels))?;
    let variants = label_variants(&labels, &[11])?;

    let mut config = ProbeConfig::for_task(TaskKind::Classification);
    config.max_epochs = 30;
    let results = layer_sweep(&store, &variants, &splits, &config)?;

    let mut per_layer = Vec::new();
    println!("layer\treal\tcontrol\tS\tstopped");
    for pair in results.chunks(2) {
        let (real, ctrl) = (&pair[0], &pair[1]);
        println!(
            "{}\t{:.1}\t{:.1}\t{:.2}\t{}",
            real.layer,
            real.metric,
            ctrl.metric,
            selectivity_cls(real.metric, ctrl.metric)?,
            real.stopped_epoch
        );
        per_layer.push((real.layer, real.metric));
    }
    if let Some((layer, acc)) = best_layer(&per_layer, TaskKind::Classification) {
        println!("best layer {layer} ({acc:.1}%)");
    }
    let errors: Vec<f64> = per_layer.iter().map(|(_, acc)| 1.0 - acc / 100.0).collect();
    let profile = layer_profile(&errors)?;
    println!("error range {:.3}: {}", profile.range, profile.class);
    Ok(())
}
