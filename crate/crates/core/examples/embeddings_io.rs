//! Write a sentence-level QEMB file with its JSON manifest, read it back, and
//! align the store to a different sentence order.

use qprobe::probes::{load_embeddings, manifest_path, save_embeddings};
use qprobe::synthetic::{synthetic_corpus, synthetic_store};

fn main() -> qprobe::Result<()> {
    let corpus = synthetic_corpus(&["syn"], 20, 1);
    let store = synthetic_store(&corpus, 4, 8, 2)?;
    let (data, manifest) = store.to_qemb();

    let path = std::env::temp_dir().join("qprobe-example.qemb");
    save_embeddings(&path, &data, &manifest)?;
    println!("wrote {} and {}", path.display(), manifest_path(&path).display());

    let loaded = load_embeddings(&path)?;
    println!(
        "{} layers × {} sentences × {} dims",
        loaded.n_layers(),
        loaded.n_sentences(),
        loaded.dim()
    );
    // values are stored as f32
    let diff = (&loaded.layer(2)? - &store.layer(2)?).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
    println!("max |difference| on layer 2: {diff:.2e}");

    let mut reversed: Vec<String> = loaded.sentence_ids().to_vec();
    reversed.reverse();
    let aligned = loaded.aligned_to(&reversed)?;
    println!("first id after alignment: {}", aligned.sentence_ids()[0]);
    Ok(())
}
