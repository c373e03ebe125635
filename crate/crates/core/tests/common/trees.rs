//! Tree builders and brute-force metric oracles. The oracles work from raw
//! head arrays and never call into the crate's tree code.

use qprobe::corpus::{DepSentence, Token};

pub const SUBORDINATE: [&str; 5] = ["csubj", "ccomp", "xcomp", "advcl", "acl"];
pub const CONTENT: [&str; 5] = ["NOUN", "PROPN", "VERB", "ADJ", "ADV"];

/// A token spec: (upos, head, deprel), 1-based heads, 0 for the root.
pub type Spec = (&'static str, usize, &'static str);

pub fn sentence(id: &str, specs: &[Spec]) -> DepSentence {
    let tokens = specs
        .iter()
        .enumerate()
        .map(|(i, &(upos, head, deprel))| Token {
            index: i + 1,
            form: format!("w{}", i + 1),
            lemma: format!("w{}", i + 1),
            upos: upos.to_string(),
            head,
            deprel: deprel.to_string(),
        })
        .collect();
    DepSentence::new(id, "tst", tokens)
}

/// Every head array over `n` tokens that forms a tree with a single root.
pub fn all_trees(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut heads = vec![0usize; n];
    loop {
        if is_tree(&heads) {
            out.push(heads.clone());
        }
        // odometer over {0..=n}^n
        let mut k = 0;
        loop {
            if k == n {
                return out;
            }
            heads[k] += 1;
            if heads[k] <= n {
                break;
            }
            heads[k] = 0;
            k += 1;
        }
    }
}

pub fn is_tree(heads: &[usize]) -> bool {
    let n = heads.len();
    if heads.iter().filter(|&&h| h == 0).count() != 1 {
        return false;
    }
    (0..n).all(|i| {
        let mut cur = i + 1;
        for _ in 0..=n {
            if heads[cur - 1] == cur {
                return false;
            }
            cur = heads[cur - 1];
            if cur == 0 {
                return true;
            }
        }
        false
    })
}

fn is_punct(upos: &str) -> bool {
    upos == "PUNCT"
}

/// Mean |pos(dep) − pos(head)| over links between non-punctuation tokens,
/// positions counted among non-punctuation tokens, divided by N − 1.
pub fn adl_oracle(upos: &[&str], heads: &[usize]) -> Option<f64> {
    let mut pos = vec![None; upos.len()];
    let mut next = 0;
    for (i, u) in upos.iter().enumerate() {
        if !is_punct(u) {
            next += 1;
            pos[i] = Some(next as i64);
        }
    }
    if next < 2 {
        return None;
    }
    let mut sum = 0i64;
    for (d, &h) in heads.iter().enumerate() {
        if h == 0 {
            continue;
        }
        if let (Some(a), Some(b)) = (pos[d], pos[h - 1]) {
            sum += (a - b).abs();
        }
    }
    Some(sum as f64 / (next - 1) as f64)
}

/// Depth of every token by recursive DFS from the root (root depth 0), max
/// over non-punctuation tokens.
pub fn mtd_oracle(upos: &[&str], heads: &[usize]) -> usize {
    fn dfs(node: usize, depth: usize, heads: &[usize], upos: &[&str], best: &mut usize) {
        if !is_punct(upos[node - 1]) {
            *best = (*best).max(depth);
        }
        for (c, &h) in heads.iter().enumerate() {
            if h == node {
                dfs(c + 1, depth + 1, heads, upos, best);
            }
        }
    }
    let root = heads.iter().position(|&h| h == 0).expect("tree has a root") + 1;
    let mut best = 0;
    dfs(root, 0, heads, upos, &mut best);
    best
}

fn ancestors(i: usize, heads: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut cur = heads[i - 1];
    while cur != 0 {
        out.push(cur);
        cur = heads[cur - 1];
    }
    out
}

/// Every subordinate head with no subordinate head below it ends one chain;
/// the chain is the set of subordinate heads on its root path.
pub fn asc_oracle(deprels: &[&str], heads: &[usize]) -> f64 {
    let n = heads.len();
    let sub = |i: usize| {
        let base = deprels[i - 1].split(':').next().unwrap_or("");
        SUBORDINATE.contains(&base)
    };
    let subs: Vec<usize> = (1..=n).filter(|&i| sub(i)).collect();
    if subs.is_empty() {
        return 0.0;
    }
    let mut lengths = Vec::new();
    for &s in &subs {
        let has_sub_below = subs.iter().any(|&t| t != s && ancestors(t, heads).contains(&s));
        if !has_sub_below {
            lengths.push(1 + ancestors(s, heads).iter().filter(|&&a| sub(a)).count());
        }
    }
    lengths.iter().sum::<usize>() as f64 / lengths.len() as f64
}

pub fn ld_oracle(upos: &[&str]) -> Option<f64> {
    let words: Vec<&&str> = upos.iter().filter(|u| !is_punct(u)).collect();
    if words.is_empty() {
        return None;
    }
    Some(words.iter().filter(|u| CONTENT.contains(u)).count() as f64 / words.len() as f64)
}

pub fn ve_oracle(upos: &[&str], heads: &[usize]) -> f64 {
    let verbs: Vec<usize> = (1..=upos.len()).filter(|&i| upos[i - 1] == "VERB").collect();
    if verbs.is_empty() {
        return 0.0;
    }
    let total: usize = verbs
        .iter()
        .map(|&v| {
            (0..upos.len())
                .filter(|&d| heads[d] == v && !is_punct(upos[d]) && upos[d] != "AUX")
                .count()
        })
        .sum();
    total as f64 / verbs.len() as f64
}

/// The worked example: "Did you also buy those two tickets ?"
pub fn worked_example() -> DepSentence {
    sentence(
        "worked",
        &[
            ("AUX", 4, "aux"),
            ("PRON", 4, "nsubj"),
            ("ADV", 4, "advmod"),
            ("VERB", 0, "root"),
            ("DET", 7, "det"),
            ("NUM", 7, "nummod"),
            ("NOUN", 4, "obj"),
            ("PUNCT", 4, "punct"),
        ],
    )
}

/// Deterministic labels for exhaustive enumeration: `pattern` selects which
/// tokens are verbs, subordinate heads and punctuation.
pub fn labels_for(n: usize, heads: &[usize], pattern: usize) -> (Vec<&'static str>, Vec<&'static str>) {
    const UPOS: [&str; 6] = ["VERB", "NOUN", "AUX", "ADJ", "DET", "PUNCT"];
    const RELS: [&str; 6] = ["ccomp", "obj", "advcl:rel", "amod", "acl", "nsubj"];
    let mut upos = Vec::with_capacity(n);
    let mut rels = Vec::with_capacity(n);
    for (i, &head) in heads.iter().enumerate().take(n) {
        let k = (i * (pattern + 1) + pattern) % 6;
        // keep at least two non-punctuation tokens so ADL is defined
        upos.push(if UPOS[k] == "PUNCT" && i < 2 { "VERB" } else { UPOS[k] });
        rels.push(if head == 0 { "root" } else { RELS[(k + pattern) % 6] });
    }
    (upos, rels)
}

pub fn build(upos: &[&'static str], heads: &[usize], rels: &[&'static str]) -> DepSentence {
    let specs: Vec<Spec> = (0..upos.len()).map(|i| (upos[i], heads[i], rels[i])).collect();
    sentence("t", &specs)
}
