//! Control tasks: every control is a seeded permutation of the real labels,
//! so it keeps the label distribution while breaking the link to the input.
//! Selectivity compares a model on the real task with the same model on the
//! controls.

use qprobe::selectivity::{make_controls, SelectivityScore, DEFAULT_CONTROL_SEEDS};
use qprobe::TaskKind;

fn main() -> qprobe::Result<()> {
    let real = [1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0];
    for control in make_controls(&real, &DEFAULT_CONTROL_SEEDS)? {
        println!("{:<11} {:?}", control.name(), control.labels);
    }

    let cls = SelectivityScore::compute(TaskKind::Classification, 97.4, &[53.2, 51.0, 55.4])?;
    println!("\nclassification: scores {:?}, mean {:.2}", round(&cls.scores), cls.mean);
    let reg = SelectivityScore::compute(TaskKind::Regression, 0.016, &[0.073, 0.070, 0.075])?;
    println!("regression:     scores {:?}, mean {:.2}", round(&reg.scores), reg.mean);
    Ok(())
}

fn round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}
