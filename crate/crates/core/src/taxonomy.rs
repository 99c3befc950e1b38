//! Hierarchical taxonomy of visual concepts.
//!
//! Objects form a deep hypernym tree built from a sense-annotated edge list.
//! Attributes, relations and scene attributes form flat trees: one root per
//! subcategory with the entries directly beneath it.
//!
//! Tree construction keeps only the first-listed parent of every child, then
//! removes any lemma that has two or more senses under the same parent and
//! hands their children to that parent. Nodes that cannot reach the root are
//! dropped and counted.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::category::Category;
use crate::error::{Error, Result};

/// Stable identifier of a concept: `<category>/<lemma>/<sense>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(String);

impl ConceptId {
    pub fn new(category: Category, lemma: &str, sense: &str) -> Self {
        ConceptId(format!("{category}/{lemma}/{sense}"))
    }

    /// Wraps an existing id string without checking its shape.
    pub fn from_raw(raw: impl Into<String>) -> Self {
        ConceptId(raw.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The lemma embedded in the id, when the id has the standard shape.
    pub fn lemma(&self) -> Option<&str> {
        let mut parts = self.0.splitn(3, '/');
        let _category = parts.next()?;
        let lemma = parts.next()?;
        parts.next()?;
        Some(lemma)
    }

    pub fn category(&self) -> Option<Category> {
        self.0.split('/').next()?.parse().ok()
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptNode {
    pub id: ConceptId,
    pub lemma: String,
    pub sense: String,
    pub category: Category,
    pub parent: Option<ConceptId>,
    #[serde(default)]
    pub tags: BTreeSet<String>,
}

/// One line of a sense-edge TSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SenseEdge {
    pub child_lemma: String,
    pub child_sense: String,
    pub parent_lemma: String,
    pub parent_sense: String,
    pub tags: Vec<String>,
    /// 1-based source line, 0 for synthesized edges.
    pub line: usize,
}

/// Reads a sense-edge TSV file.
pub fn load_sense_edges(path: impl AsRef<Path>) -> Result<Vec<SenseEdge>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sense_edges(&text, path)
}

pub fn parse_sense_edges(text: &str, origin: impl AsRef<Path>) -> Result<Vec<SenseEdge>> {
    let origin = origin.as_ref();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(Error::parse(
                origin,
                line_no,
                format!("expected 4 or 5 tab-separated fields, found {}", fields.len()),
            ));
        }
        for (name, value) in ["child lemma", "child sense", "parent lemma", "parent sense"]
            .iter()
            .zip(&fields)
        {
            check_key_part(value).map_err(|m| Error::parse(origin, line_no, format!("{name}: {m}")))?;
        }
        let tags = fields
            .get(4)
            .map(|t| {
                t.split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default();
        out.push(SenseEdge {
            child_lemma: fields[0].to_string(),
            child_sense: fields[1].to_string(),
            parent_lemma: fields[2].to_string(),
            parent_sense: fields[3].to_string(),
            tags,
            line: line_no,
        });
    }
    Ok(out)
}

fn check_key_part(value: &str) -> std::result::Result<(), String> {
    if value.trim().is_empty() {
        Err("empty".into())
    } else if value.contains('/') {
        Err(format!("`{value}` contains '/'"))
    } else {
        Ok(())
    }
}

/// What `build_tree` discarded along the way.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    /// Parent edges ignored because the child already had a primary parent.
    pub secondary_parents: usize,
    /// Sense nodes removed by the same-parent ambiguity rule.
    pub collapsed: Vec<ConceptId>,
    /// Nodes that could not reach the root.
    pub unreachable: usize,
}

type Key = (String, String);

/// Builds the object taxonomy rooted at `root` (lemma, sense).
pub fn build_tree(entries: &[SenseEdge], root: (&str, &str)) -> Result<(Taxonomy, BuildReport)> {
    let root_key: Key = (root.0.to_string(), root.1.to_string());
    let mut report = BuildReport::default();

    let mut order: Vec<Key> = Vec::new();
    let mut seen: HashSet<Key> = HashSet::new();
    let mut parent: HashMap<Key, Key> = HashMap::new();
    let mut tags: HashMap<Key, BTreeSet<String>> = HashMap::new();

    for e in entries {
        let child = (e.child_lemma.clone(), e.child_sense.clone());
        let par = (e.parent_lemma.clone(), e.parent_sense.clone());
        for k in [&child, &par] {
            if seen.insert(k.clone()) {
                order.push(k.clone());
            }
        }
        tags.entry(child.clone()).or_default().extend(e.tags.iter().cloned());
        if child == root_key {
            // the root's own hypernyms lie outside the tree
            continue;
        }
        match parent.get(&child) {
            Some(existing) if *existing != par => report.secondary_parents += 1,
            Some(_) => {}
            None => {
                parent.insert(child, par);
            }
        }
    }
    if !seen.contains(&root_key) {
        return Err(Error::MissingRoot(format!("{}/{}", root.0, root.1)));
    }

    if let Some(cycle) = find_cycle(&order, &parent) {
        return Err(Error::Cycle(
            cycle.into_iter().map(|(l, s)| format!("{l}/{s}")).collect(),
        ));
    }

    // Same-parent sense collapse, repeated until no lemma has two senses
    // under one surviving parent.
    let mut removed: HashSet<Key> = HashSet::new();
    loop {
        let effective = effective_parents(&order, &parent, &removed);
        let mut groups: BTreeMap<(&str, &Key), Vec<&Key>> = BTreeMap::new();
        for k in &order {
            if removed.contains(k) || *k == root_key {
                continue;
            }
            if let Some(p) = effective.get(k) {
                groups.entry((k.0.as_str(), p)).or_default().push(k);
            }
        }
        let fresh: Vec<Key> = groups
            .into_values()
            .filter(|senses| senses.len() >= 2)
            .flatten()
            .cloned()
            .collect();
        if fresh.is_empty() {
            break;
        }
        removed.extend(fresh);
    }
    let effective = effective_parents(&order, &parent, &removed);

    let id_of = |k: &Key| ConceptId::new(Category::Object, &k.0, &k.1);
    let mut collapsed: Vec<ConceptId> = removed.iter().map(id_of).collect();
    collapsed.sort();
    report.collapsed = collapsed;

    let mut nodes = Vec::new();
    for k in &order {
        if removed.contains(k) {
            continue;
        }
        if *k != root_key && !reaches(k, &root_key, &effective) {
            report.unreachable += 1;
            continue;
        }
        nodes.push(ConceptNode {
            id: id_of(k),
            lemma: k.0.clone(),
            sense: k.1.clone(),
            category: Category::Object,
            parent: if *k == root_key {
                None
            } else {
                effective.get(k).map(id_of)
            },
            tags: tags.remove(k).unwrap_or_default(),
        });
    }
    Ok((Taxonomy::from_nodes(nodes), report))
}

fn find_cycle(order: &[Key], parent: &HashMap<Key, Key>) -> Option<Vec<Key>> {
    // 0 = unvisited, 1 = on current path, 2 = done
    let mut state: HashMap<&Key, u8> = HashMap::new();
    for start in order {
        if state.get(start).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut path: Vec<&Key> = Vec::new();
        let mut cur = start;
        loop {
            match state.get(cur).copied().unwrap_or(0) {
                1 => {
                    let pos = path.iter().position(|k| *k == cur).unwrap_or(0);
                    let mut witness: Vec<Key> = path[pos..].iter().map(|k| (*k).clone()).collect();
                    witness.push(cur.clone());
                    return Some(witness);
                }
                2 => break,
                _ => {}
            }
            state.insert(cur, 1);
            path.push(cur);
            match parent.get(cur) {
                Some(p) => cur = p,
                None => break,
            }
        }
        for k in path {
            state.insert(k, 2);
        }
    }
    None
}

fn effective_parents(order: &[Key], parent: &HashMap<Key, Key>, removed: &HashSet<Key>) -> HashMap<Key, Key> {
    let mut out = HashMap::new();
    for k in order {
        let mut p = parent.get(k);
        while let Some(candidate) = p {
            if !removed.contains(candidate) {
                break;
            }
            p = parent.get(candidate);
        }
        if let Some(p) = p {
            out.insert(k.clone(), p.clone());
        }
    }
    out
}

fn reaches(start: &Key, root: &Key, parent: &HashMap<Key, Key>) -> bool {
    let mut cur = start;
    // acyclic by construction, so this terminates
    while let Some(p) = parent.get(cur) {
        if p == root {
            return true;
        }
        cur = p;
    }
    false
}

/// A flat-category entry: attributes, relations and scene attributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatEntry {
    pub lemma: String,
    pub sense: String,
    pub category: Category,
    #[serde(default)]
    pub tags: BTreeSet<String>,
}

/// Sense key used for the root node of a flat subcategory tree.
pub const FLAT_ROOT_SENSE: &str = "root";

/// The concept forest. Immutable once built.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    nodes: Vec<ConceptNode>,
    index: HashMap<ConceptId, usize>,
    roots: BTreeMap<Category, ConceptId>,
    children: HashMap<ConceptId, Vec<ConceptId>>,
}

impl PartialEq for Taxonomy {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.roots == other.roots
    }
}

impl Eq for Taxonomy {}

#[derive(Serialize, Deserialize)]
struct TaxonomyFile {
    nodes: Vec<ConceptNode>,
    roots: BTreeMap<String, ConceptId>,
}

impl Taxonomy {
    /// Assembles a taxonomy from raw nodes without checking invariants; run
    /// [`Taxonomy::validate`] on anything that did not come from `build_tree`.
    pub fn from_nodes(mut nodes: Vec<ConceptNode>) -> Self {
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(nodes.len());
        let mut roots = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            index.entry(n.id.clone()).or_insert(i);
            if n.parent.is_none() {
                roots.entry(n.category).or_insert_with(|| n.id.clone());
            }
        }
        let mut children: HashMap<ConceptId, Vec<ConceptId>> = HashMap::new();
        for n in &nodes {
            if let Some(p) = &n.parent {
                children.entry(p.clone()).or_default().push(n.id.clone());
            }
        }
        for list in children.values_mut() {
            list.sort_by(|a, b| {
                let (na, nb) = (&nodes[index[a]], &nodes[index[b]]);
                (&na.lemma, &na.sense, &na.id).cmp(&(&nb.lemma, &nb.sense, &nb.id))
            });
        }
        Taxonomy {
            nodes,
            index,
            roots,
            children,
        }
    }

    /// Returns a taxonomy extended with flat-category entries. Each
    /// subcategory gets a root node named after it when first seen.
    pub fn with_flat_entries(&self, entries: &[FlatEntry]) -> Result<Taxonomy> {
        let mut nodes = self.nodes.clone();
        let mut ids: HashSet<ConceptId> = nodes.iter().map(|n| n.id.clone()).collect();
        for e in entries {
            if e.category == Category::Object {
                return Err(Error::InvalidArgument(format!(
                    "flat entry `{}` cannot be an object; objects come from the hypernym tree",
                    e.lemma
                )));
            }
            check_key_part(&e.lemma).map_err(|m| Error::InvalidArgument(format!("lemma {m}")))?;
            check_key_part(&e.sense).map_err(|m| Error::InvalidArgument(format!("sense {m}")))?;
            let sub = e.category.subcategory().unwrap_or_default();
            let root_id = ConceptId::new(e.category, sub, FLAT_ROOT_SENSE);
            if ids.insert(root_id.clone()) {
                nodes.push(ConceptNode {
                    id: root_id.clone(),
                    lemma: sub.to_string(),
                    sense: FLAT_ROOT_SENSE.to_string(),
                    category: e.category,
                    parent: None,
                    tags: BTreeSet::new(),
                });
            }
            let id = ConceptId::new(e.category, &e.lemma, &e.sense);
            if ids.insert(id.clone()) {
                nodes.push(ConceptNode {
                    id,
                    lemma: e.lemma.clone(),
                    sense: e.sense.clone(),
                    category: e.category,
                    parent: Some(root_id),
                    tags: e.tags.clone(),
                });
            }
        }
        Ok(Taxonomy::from_nodes(nodes))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[ConceptNode] {
        &self.nodes
    }

    pub fn roots(&self) -> &BTreeMap<Category, ConceptId> {
        &self.roots
    }

    pub fn root(&self, category: Category) -> Option<&ConceptId> {
        self.roots.get(&category)
    }

    pub fn get(&self, id: &ConceptId) -> Option<&ConceptNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: &ConceptId) -> bool {
        self.index.contains_key(id)
    }

    pub fn lookup(&self, category: Category, lemma: &str, sense: &str) -> Option<&ConceptNode> {
        self.get(&ConceptId::new(category, lemma, sense))
    }

    /// First node (in id order) with the given lemma in a category.
    pub fn find_lemma(&self, category: Category, lemma: &str) -> Option<&ConceptNode> {
        self.nodes.iter().find(|n| n.category == category && n.lemma == lemma)
    }

    pub fn children(&self, id: &ConceptId) -> &[ConceptId] {
        self.children.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn parent(&self, id: &ConceptId) -> Option<&ConceptId> {
        self.get(id).and_then(|n| n.parent.as_ref())
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.parent.is_some()).count()
    }

    /// Number of parent steps from `id` to its root.
    pub fn depth(&self, id: &ConceptId) -> Option<usize> {
        let mut cur = self.get(id)?;
        let mut steps = 0;
        while let Some(p) = &cur.parent {
            cur = self.get(p)?;
            steps += 1;
            if steps > self.nodes.len() {
                return None;
            }
        }
        Some(steps)
    }

    /// `node` followed by all of its descendants in pre-order.
    pub fn subtree(&self, node: &ConceptId) -> Result<Vec<ConceptId>> {
        if !self.contains(node) {
            return Err(Error::UnknownConcept(node.to_string()));
        }
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(id) = stack.pop() {
            out.push(id.clone());
            stack.extend(self.children(id).iter().rev());
        }
        Ok(out)
    }

    /// Whether `node` lies in the subtree rooted at `ancestor`.
    pub fn is_descendant(&self, node: &ConceptId, ancestor: &ConceptId) -> bool {
        let mut cur = Some(node);
        let mut steps = 0;
        while let Some(id) = cur {
            if id == ancestor {
                return true;
            }
            cur = self.parent(id);
            steps += 1;
            if steps > self.nodes.len() {
                return false;
            }
        }
        false
    }

    /// Object-tree edges in pre-order, suitable for `build_tree`.
    pub fn to_sense_edges(&self) -> Vec<SenseEdge> {
        let Some(root) = self.root(Category::Object) else {
            return Vec::new();
        };
        let order = self.subtree(root).unwrap_or_default();
        order
            .iter()
            .filter_map(|id| {
                let n = self.get(id)?;
                let p = self.get(n.parent.as_ref()?)?;
                Some(SenseEdge {
                    child_lemma: n.lemma.clone(),
                    child_sense: n.sense.clone(),
                    parent_lemma: p.lemma.clone(),
                    parent_sense: p.sense.clone(),
                    tags: n.tags.iter().cloned().collect(),
                    line: 0,
                })
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = TaxonomyFile {
            nodes: self.nodes.clone(),
            roots: self.roots.iter().map(|(c, id)| (c.to_string(), id.clone())).collect(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("taxonomy serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str, origin: impl AsRef<Path>) -> Result<Taxonomy> {
        let file: TaxonomyFile = serde_json::from_str(text).map_err(|source| Error::Json {
            path: origin.as_ref().to_path_buf(),
            source,
        })?;
        Ok(Taxonomy::from_nodes(file.nodes))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Taxonomy> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Taxonomy::from_json(&text, path)
    }

    /// Checks the forest invariants and tallies nodes per category.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for n in &self.nodes {
            *report.counts.entry(n.category.to_string()).or_default() += 1;
        }

        let mut ids = HashSet::new();
        let mut keys = HashSet::new();
        for n in &self.nodes {
            if !ids.insert(&n.id) {
                report.violations.push(format!("duplicate id {}", n.id));
            }
            if !keys.insert((&n.lemma, &n.sense, n.category)) {
                report
                    .violations
                    .push(format!("duplicate key ({}, {}, {})", n.lemma, n.sense, n.category));
            }
        }

        let mut parentless: BTreeMap<Category, usize> = BTreeMap::new();
        for n in &self.nodes {
            match &n.parent {
                None => *parentless.entry(n.category).or_default() += 1,
                Some(p) => match self.get(p) {
                    None => {
                        report.orphans += 1;
                        report.violations.push(format!("{} has missing parent {p}", n.id));
                    }
                    Some(pn) if pn.category != n.category => report.violations.push(format!(
                        "{} ({}) has parent of category {}",
                        n.id, n.category, pn.category
                    )),
                    Some(_) => {}
                },
            }
        }
        for (cat, count) in &parentless {
            if *count > 1 {
                report
                    .violations
                    .push(format!("category {cat} has {count} parentless nodes"));
            }
        }

        for n in &self.nodes {
            let mut cur = n;
            let mut steps = 0;
            while let Some(p) = cur.parent.as_ref().and_then(|p| self.get(p)) {
                steps += 1;
                if steps > self.nodes.len() {
                    report.violations.push(format!("cycle through {}", n.id));
                    break;
                }
                cur = p;
            }
        }

        let edges = self.edge_count();
        if report.orphans == 0 && edges + self.roots.len() != self.nodes.len() {
            report.violations.push(format!(
                "edge count {edges} != nodes {} - roots {}",
                self.nodes.len(),
                self.roots.len()
            ));
        }
        report
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub counts: BTreeMap<String, usize>,
    pub orphans: usize,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Node totals grouped by top-level kind (`object`, `attribute`, ...).
    pub fn kind_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for (cat, n) in &self.counts {
            let kind = cat.split(':').next().unwrap_or(cat);
            *out.entry(kind.to_string()).or_default() += n;
        }
        out
    }
}
