//! Deterministic caption realization.
//!
//! Objects are visited in topological order of the relation edges (ties by
//! object index). Each outgoing edge becomes `<NP(src)> is <relation> <NP(dst)>.`,
//! with edges of one source ordered by the target's topological position.
//! Objects never mentioned by a relation get one `There is <NP>.` sentence,
//! in index order. Scene attributes close the caption as one sentence of
//! comma-joined template phrases.
//!
//! Noun phrases carry attributes only on first mention. Lemmas shared by
//! several objects are told apart with ordinals (`the first cat`,
//! `the second cat`) assigned in object-index order.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::category::SceneAttrKind;
use crate::enumerator::topological_order;
use crate::error::{Error, Result};
use crate::sampler::{SceneAttributeSet, SceneGraph};
use crate::taxonomy::ConceptId;

/// `a` or `an` by the ASCII-vowel rule on the first word.
pub fn article(phrase: &str) -> Result<&'static str> {
    let first = phrase
        .split_whitespace()
        .next()
        .and_then(|w| w.chars().next())
        .ok_or_else(|| Error::InvalidArgument("article of an empty phrase".into()))?;
    Ok(match first.to_ascii_lowercase() {
        'a' | 'e' | 'i' | 'o' | 'u' => "an",
        _ => "a",
    })
}

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

/// Ordinal word for `n >= 1`; numeric (`21st`, `112th`) past twenty.
pub fn ordinal_word(n: usize) -> String {
    if (1..=ORDINALS.len()).contains(&n) {
        return ORDINALS[n - 1].to_string();
    }
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

fn lemma_of(id: &ConceptId) -> Result<&str> {
    id.lemma()
        .ok_or_else(|| Error::InvalidGraph(format!("concept id `{id}` has no lemma")))
}

/// Per-object mention bookkeeping for one caption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionState {
    pub introduced: Vec<bool>,
    pub ordinal: Vec<Option<usize>>,
    pub lemma_counts: BTreeMap<String, usize>,
}

impl MentionState {
    pub fn new(graph: &SceneGraph) -> Result<Self> {
        let mut lemma_counts: BTreeMap<String, usize> = BTreeMap::new();
        for o in &graph.objects {
            *lemma_counts.entry(lemma_of(&o.concept_id)?.to_string()).or_default() += 1;
        }
        let mut next: HashMap<&str, usize> = HashMap::new();
        let mut ordinal = Vec::with_capacity(graph.objects.len());
        for o in &graph.objects {
            let lemma = lemma_of(&o.concept_id)?;
            if lemma_counts[lemma] >= 2 {
                let n = next.entry(lemma).or_insert(0);
                *n += 1;
                ordinal.push(Some(*n));
            } else {
                ordinal.push(None);
            }
        }
        Ok(MentionState {
            introduced: vec![false; graph.objects.len()],
            ordinal,
            lemma_counts,
        })
    }
}

/// Noun phrase for object `index`, marking it introduced.
pub fn noun_phrase(graph: &SceneGraph, index: usize, state: &mut MentionState) -> Result<String> {
    let obj = graph
        .objects
        .get(index)
        .ok_or_else(|| Error::InvalidGraph(format!("no object {index}")))?;
    let lemma = lemma_of(&obj.concept_id)?;
    let first = !state.introduced[index];
    state.introduced[index] = true;

    let mut words: Vec<&str> = Vec::new();
    if first {
        for a in &obj.attributes {
            words.push(lemma_of(a)?);
        }
    }
    words.push(lemma);
    let body = words.join(" ");
    Ok(match state.ordinal[index] {
        Some(n) => format!("the {} {body}", ordinal_word(n)),
        None if first => format!("{} {body}", article(&body)?),
        None => format!("the {body}"),
    })
}

/// Scene-attribute phrase templates, one `{}` placeholder each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RealizationTemplates {
    table: BTreeMap<SceneAttrKind, String>,
}

impl Default for RealizationTemplates {
    fn default() -> Self {
        use SceneAttrKind::*;
        let table = [
            (Artist, "by {}"),
            (Genre, "in the {} genre"),
            (PaintingStyle, "in the style of {}"),
            (PaintingTechnique, "painted with {}"),
            (CameraModel, "shot on {}"),
            (FocalLength, "at {} focal length"),
            (Perspective, "from a {} perspective"),
            (Aperture, "at aperture {}"),
            (DepthOfField, "with {} depth of field"),
            (ShotScale, "in a {} shot"),
            (Location, "at {}"),
            (Weather, "in {} weather"),
            (Lighting, "under {} lighting"),
            (CameraRig, "filmed with {}"),
            (CameraMovement, "with a {} camera movement"),
            (VideoEditingStyle, "edited in {} style"),
            (TemporalSpan, "over {}"),
            (ThreedAttribute, "rendered in {} style"),
        ]
        .into_iter()
        .map(|(k, v)| (k, v.to_string()))
        .collect();
        RealizationTemplates { table }
    }
}

impl RealizationTemplates {
    pub fn empty() -> Self {
        RealizationTemplates { table: BTreeMap::new() }
    }

    pub fn insert(&mut self, kind: SceneAttrKind, template: &str) -> Result<()> {
        if template.matches("{}").count() != 1 {
            return Err(Error::InvalidArgument(format!(
                "template for {kind} must contain exactly one `{{}}`: `{template}`"
            )));
        }
        self.table.insert(kind, template.to_string());
        Ok(())
    }

    pub fn get(&self, kind: SceneAttrKind) -> Option<&str> {
        self.table.get(&kind).map(String::as_str)
    }

    /// Parses a JSON object `{subcategory: template}`.
    pub fn from_json(text: &str, origin: impl AsRef<Path>) -> Result<Self> {
        let raw: BTreeMap<SceneAttrKind, String> = serde_json::from_str(text).map_err(|source| Error::Json {
            path: origin.as_ref().to_path_buf(),
            source,
        })?;
        let mut out = RealizationTemplates::empty();
        for (k, v) in raw {
            out.insert(k, &v)?;
        }
        Ok(out)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    /// The defaults with `overrides` layered on top.
    pub fn merged(mut self, overrides: &RealizationTemplates) -> Self {
        for (k, v) in &overrides.table {
            self.table.insert(*k, v.clone());
        }
        self
    }

    fn phrase(&self, kind: SceneAttrKind, value: &str) -> Result<String> {
        let t = self.get(kind).ok_or_else(|| Error::MissingTemplate(kind.to_string()))?;
        Ok(t.replacen("{}", value, 1))
    }
}

/// What produced each sentence of a caption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SentenceKind {
    /// Relation clause for `graph.relations[edge]`.
    Relation {
        edge: usize,
    },
    /// Standalone `There is` sentence for an object.
    Standalone {
        object: usize,
    },
    SceneAttributes,
}

/// Sentence-level record of a realization, for checking invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Realization {
    pub sentences: Vec<(SentenceKind, String)>,
    /// Sentence index that first mentions each object.
    pub introduced_in: Vec<usize>,
    /// Noun phrase used at each object's first mention.
    pub introductions: Vec<String>,
}

impl Realization {
    pub fn text(&self) -> String {
        let parts: Vec<&str> = self.sentences.iter().map(|(_, s)| s.as_str()).collect();
        parts.join(" ")
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Realizes a caption.
pub fn realize(
    graph: &SceneGraph,
    scene_attrs: &SceneAttributeSet,
    templates: &RealizationTemplates,
) -> Result<String> {
    Ok(realize_traced(graph, scene_attrs, templates)?.text())
}

/// [`realize`] with the sentence trace kept.
pub fn realize_traced(
    graph: &SceneGraph,
    scene_attrs: &SceneAttributeSet,
    templates: &RealizationTemplates,
) -> Result<Realization> {
    let n = graph.objects.len();
    let out = graph.out_edges();
    let topo = topological_order(&out).ok_or_else(|| Error::InvalidGraph("relations contain a cycle".into()))?;
    let mut pos = vec![0usize; n];
    for (p, &v) in topo.iter().enumerate() {
        pos[v] = p;
    }
    let mut by_src: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, r) in graph.relations.iter().enumerate() {
        by_src[r.src].push(i);
    }

    let mut state = MentionState::new(graph)?;
    let mut trace = Realization {
        sentences: Vec::new(),
        introduced_in: vec![usize::MAX; n],
        introductions: vec![String::new(); n],
    };
    let mention = |idx: usize, sentence: usize, state: &mut MentionState, trace: &mut Realization| -> Result<String> {
        let first = !state.introduced[idx];
        let np = noun_phrase(graph, idx, state)?;
        if first {
            trace.introduced_in[idx] = sentence;
            trace.introductions[idx] = np.clone();
        }
        Ok(np)
    };

    for &src in &topo {
        let mut edges = by_src[src].clone();
        edges.sort_by_key(|&e| pos[graph.relations[e].dst]);
        for e in edges {
            let rel = &graph.relations[e];
            let sentence = trace.sentences.len();
            let subject = mention(src, sentence, &mut state, &mut trace)?;
            let object = mention(rel.dst, sentence, &mut state, &mut trace)?;
            let text = format!("{subject} is {} {object}.", lemma_of(&rel.concept_id)?);
            trace
                .sentences
                .push((SentenceKind::Relation { edge: e }, capitalize(&text)));
        }
    }
    for idx in 0..n {
        if !state.introduced[idx] {
            let sentence = trace.sentences.len();
            let np = mention(idx, sentence, &mut state, &mut trace)?;
            trace
                .sentences
                .push((SentenceKind::Standalone { object: idx }, format!("There is {np}.")));
        }
    }
    if !scene_attrs.is_empty() {
        let phrases = scene_attrs
            .items
            .iter()
            .map(|item| templates.phrase(item.subcategory, lemma_of(&item.concept_id)?))
            .collect::<Result<Vec<_>>>()?;
        trace.sentences.push((
            SentenceKind::SceneAttributes,
            capitalize(&format!("{}.", phrases.join(", "))),
        ));
    }
    Ok(trace)
}

/// A phrase found fewer times than the graph requires.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMiss {
    pub phrase: String,
    pub expected: usize,
    pub found: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverageReport {
    pub misses: Vec<CoverageMiss>,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.misses.is_empty()
    }
}

/// Checks that every object lemma, attribute lemma and relation phrase of
/// `graph` occurs in `caption` at least as often as the realization rules
/// require: an object once per relation it takes part in (once if it has
/// none), each attribute and each relation phrase once.
pub fn surface_coverage(graph: &SceneGraph, caption: &str) -> CoverageReport {
    let mut expected: BTreeMap<&str, usize> = BTreeMap::new();
    let mut degree = vec![0usize; graph.objects.len()];
    for r in &graph.relations {
        if let Some(d) = degree.get_mut(r.src) {
            *d += 1;
        }
        if let Some(d) = degree.get_mut(r.dst) {
            *d += 1;
        }
        if let Some(l) = r.concept_id.lemma() {
            *expected.entry(l).or_default() += 1;
        }
    }
    for (o, deg) in graph.objects.iter().zip(&degree) {
        if let Some(l) = o.concept_id.lemma() {
            *expected.entry(l).or_default() += (*deg).max(1);
        }
        for a in &o.attributes {
            if let Some(l) = a.lemma() {
                *expected.entry(l).or_default() += 1;
            }
        }
    }
    let misses = expected
        .into_iter()
        .filter_map(|(phrase, want)| {
            let found = count_bounded(caption, phrase);
            (found < want).then(|| CoverageMiss {
                phrase: phrase.to_string(),
                expected: want,
                found,
            })
        })
        .collect();
    CoverageReport { misses }
}

/// Occurrences of `needle` in `hay` not flanked by alphanumerics.
pub fn count_bounded(hay: &str, needle: &str) -> usize {
    if needle.is_empty() {
        return 0;
    }
    let mut count = 0;
    let mut start = 0;
    while let Some(off) = hay[start..].find(needle) {
        let at = start + off;
        let end = at + needle.len();
        let before_ok = hay[..at].chars().next_back().is_none_or(|c| !c.is_alphanumeric());
        let after_ok = hay[end..].chars().next().is_none_or(|c| !c.is_alphanumeric());
        if before_ok && after_ok {
            count += 1;
        }
        start = at + hay[at..].chars().next().map_or(1, char::len_utf8);
    }
    count
}
