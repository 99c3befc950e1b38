//! Invariant checks for a realized caption, written against the caption
//! text and sentence trace rather than the realizer's internals.

use std::collections::{BTreeMap, BTreeSet};

use sgf_core::realizer::{surface_coverage, Realization, SentenceKind};
use sgf_core::sampler::SceneGraph;

const ORDINALS: [&str; 20] = [
    "first",
    "second",
    "third",
    "fourth",
    "fifth",
    "sixth",
    "seventh",
    "eighth",
    "ninth",
    "tenth",
    "eleventh",
    "twelfth",
    "thirteenth",
    "fourteenth",
    "fifteenth",
    "sixteenth",
    "seventeenth",
    "eighteenth",
    "nineteenth",
    "twentieth",
];

fn lemma(id: &sgf_core::taxonomy::ConceptId) -> &str {
    id.as_str().split('/').nth(1).expect("category/lemma/sense")
}

/// Returns a description of the first broken invariant.
pub fn check(graph: &SceneGraph, trace: &Realization, text: &str) -> Result<(), String> {
    let joined: Vec<&str> = trace.sentences.iter().map(|(_, s)| s.as_str()).collect();
    if joined.join(" ") != text {
        return Err("text is not the trace sentences joined by single spaces".into());
    }
    if text.contains("  ") || text.ends_with(char::is_whitespace) || text.starts_with(char::is_whitespace) {
        return Err("stray whitespace".into());
    }
    for (_, s) in &trace.sentences {
        if !s.ends_with('.') || !s.chars().next().is_some_and(char::is_uppercase) {
            return Err(format!("malformed sentence `{s}`"));
        }
    }

    let report = surface_coverage(graph, text);
    if !report.is_complete() {
        return Err(format!("coverage misses: {:?}", report.misses));
    }

    let n = graph.objects.len();
    let mut degree = vec![0; n];
    for r in &graph.relations {
        degree[r.src] += 1;
        degree[r.dst] += 1;
    }

    // skip rule
    let mut standalone = BTreeSet::new();
    for (kind, s) in &trace.sentences {
        if let SentenceKind::Standalone { object } = kind {
            if degree[*object] > 0 {
                return Err(format!("object {object} has relations but got `{s}`"));
            }
            if !standalone.insert(*object) {
                return Err(format!("object {object} stands alone twice"));
            }
        }
    }
    let isolated: BTreeSet<usize> = (0..n).filter(|&i| degree[i] == 0).collect();
    if standalone != isolated {
        return Err(format!(
            "standalone sentences {standalone:?}, isolated objects {isolated:?}"
        ));
    }
    if text.matches("There is ").count() != isolated.len() {
        return Err("`There is` count differs from isolated object count".into());
    }

    // every edge exactly once, sources introduced no later than their clause
    let mut edge_sentence = vec![None; graph.relations.len()];
    for (i, (kind, _)) in trace.sentences.iter().enumerate() {
        if let SentenceKind::Relation { edge } = kind {
            if edge_sentence[*edge].replace(i).is_some() {
                return Err(format!("edge {edge} realized twice"));
            }
        }
    }
    for (e, r) in graph.relations.iter().enumerate() {
        let Some(s) = edge_sentence[e] else {
            return Err(format!("edge {e} never realized"));
        };
        if trace.introduced_in[r.src] > s || trace.introduced_in[r.dst] > s {
            return Err(format!("edge {e} precedes the introduction of its endpoints"));
        }
    }
    // clause order is a topological order of the sources
    let mut first_as_src = vec![usize::MAX; n];
    let mut last_as_src = vec![0; n];
    for (i, (kind, _)) in trace.sentences.iter().enumerate() {
        if let SentenceKind::Relation { edge } = kind {
            let s = graph.relations[*edge].src;
            first_as_src[s] = first_as_src[s].min(i);
            last_as_src[s] = last_as_src[s].max(i);
        }
    }
    for r in &graph.relations {
        if first_as_src[r.dst] != usize::MAX && first_as_src[r.dst] < last_as_src[r.src] {
            return Err(format!("clauses of {} come before clauses of {}", r.dst, r.src));
        }
    }

    // ordinal soundness
    let mut by_lemma: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, o) in graph.objects.iter().enumerate() {
        by_lemma.entry(lemma(&o.concept_id)).or_default().push(i);
    }
    for (l, objs) in &by_lemma {
        let mut ordinals_seen = Vec::new();
        for &i in objs {
            let intro = &trace.introductions[i];
            let s = &trace.sentences[trace.introduced_in[i]].1;
            if !s.to_lowercase().contains(&intro.to_lowercase()) {
                return Err(format!("introduction `{intro}` missing from `{s}`"));
            }
            let word = intro.strip_prefix("the ").and_then(|rest| rest.split(' ').next());
            let ordinal = word.and_then(|w| ORDINALS.iter().position(|o| *o == w));
            match (objs.len() >= 2, ordinal) {
                (true, Some(k)) => ordinals_seen.push(k + 1),
                (true, None) if objs.len() > ORDINALS.len() => {}
                (true, None) => return Err(format!("duplicate `{l}` introduced without ordinal: `{intro}`")),
                (false, _) => {
                    if !(intro.starts_with("a ") || intro.starts_with("an ")) {
                        return Err(format!("unique `{l}` introduced without article: `{intro}`"));
                    }
                }
            }
        }
        if objs.len() >= 2 && objs.len() <= ORDINALS.len() {
            ordinals_seen.sort_unstable();
            if ordinals_seen != (1..=objs.len()).collect::<Vec<_>>() {
                return Err(format!("ordinals of `{l}` are {ordinals_seen:?}"));
            }
        }
    }
    Ok(())
}
