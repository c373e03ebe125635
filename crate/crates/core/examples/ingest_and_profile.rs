//! Parse CoNLL-U, compute the six complexity metrics per sentence and
//! normalize them per language.

use qprobe::corpus::parse_conllu;
use qprobe::metrics::{normalize_corpus, profile_corpus, MetricConfig, NormalizationGroup};

const CONLLU: &str = "\
# sent_id = en-1
# text = Did you also buy those two tickets?
1\tDid\tdo\tAUX\t_\t_\t4\taux\t_\t_
2\tyou\tyou\tPRON\t_\t_\t4\tnsubj\t_\t_
3\talso\talso\tADV\t_\t_\t4\tadvmod\t_\t_
4\tbuy\tbuy\tVERB\t_\t_\t0\troot\t_\t_
5\tthose\tthat\tDET\t_\t_\t7\tdet\t_\t_
6\ttwo\ttwo\tNUM\t_\t_\t7\tnummod\t_\t_
7\ttickets\tticket\tNOUN\t_\t_\t4\tobj\t_\t_
8\t?\t?\tPUNCT\t_\t_\t4\tpunct\t_\t_

# sent_id = en-2
# text = Who said you would come?
1\tWho\twho\tPRON\t_\t_\t2\tnsubj\t_\t_
2\tsaid\tsay\tVERB\t_\t_\t0\troot\t_\t_
3\tyou\tyou\tPRON\t_\t_\t5\tnsubj\t_\t_
4\twould\twould\tAUX\t_\t_\t5\taux\t_\t_
5\tcome\tcome\tVERB\t_\t_\t2\tccomp\t_\t_
6\t?\t?\tPUNCT\t_\t_\t2\tpunct\t_\t_

# sent_id = en-3
# text = Why?
1\tWhy\twhy\tADV\t_\t_\t0\troot\t_\t_
2\t?\t?\tPUNCT\t_\t_\t1\tpunct\t_\t_

";

fn main() -> qprobe::Result<()> {
    let sentences = parse_conllu(CONLLU, "eng")?;
    let raw = profile_corpus(&sentences, &MetricConfig::default());
    // a one-word sentence has no dependency length and is left out
    println!("{} of {} sentences profiled\n", raw.len(), sentences.len());
    let profiles = normalize_corpus(&raw, NormalizationGroup::PerLanguage)?;

    println!("id\t|T|\tLD\tADL\tMTD\tVE\tASC\tcombined");
    for p in &profiles {
        println!(
            "{}\t{}\t{:.3}\t{:.3}\t{}\t{:.3}\t{:.3}\t{:.3}",
            p.sentence_id,
            p.token_count,
            p.lexical_density,
            p.avg_dep_length,
            p.max_tree_depth,
            p.avg_verbal_edges,
            p.avg_sub_chain,
            p.combined.unwrap_or(f64::NAN),
        );
    }
    Ok(())
}
