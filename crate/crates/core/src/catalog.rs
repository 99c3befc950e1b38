//! Metadata catalogs and scoped views over them.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::category::{AttributeKind, Category, Kind, Media, RelationKind, SceneAttrKind, Target};
use crate::error::{Error, Result};
use crate::taxonomy::{ConceptId, Taxonomy};

/// Element totals of the full metadata release, by kind.
pub const FULL_KIND_COUNTS: [(&str, usize); 4] = [
    ("object", 28_787),
    ("attribute", 1_494),
    ("relation", 10_492),
    ("scene_attr", 2_193),
];

/// Per-subcategory attribute totals of the full release; they sum to 1,494.
pub const FULL_ATTRIBUTE_COUNTS: [(&str, usize); 9] = [
    ("attribute:color", 677),
    ("attribute:material", 76),
    ("attribute:texture", 42),
    ("attribute:architectural_style", 25),
    ("attribute:state", 85),
    ("attribute:shape", 41),
    ("attribute:size", 24),
    ("attribute:human_descriptor", 59),
    ("attribute:adjective", 465),
];

/// Declared counts for the full release, keyed by kind and by attribute
/// subcategory.
pub fn full_release_counts() -> BTreeMap<String, usize> {
    FULL_KIND_COUNTS
        .iter()
        .chain(FULL_ATTRIBUTE_COUNTS.iter())
        .map(|(k, v)| (k.to_string(), *v))
        .collect()
}

/// One entry of a catalog JSON file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogFileEntry {
    pub lemma: String,
    pub sense: String,
    pub category: Category,
    #[serde(default)]
    pub tags: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media: Option<Media>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct EntryMeta {
    tags: BTreeSet<String>,
    media: Option<Media>,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    taxonomy: Arc<Taxonomy>,
    entries: BTreeMap<Category, Vec<ConceptId>>,
    meta: HashMap<ConceptId, EntryMeta>,
    declared_counts: Option<BTreeMap<String, usize>>,
}

/// A declared count that disagrees with the loaded catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMismatch {
    pub key: String,
    pub declared: usize,
    pub actual: usize,
}

pub fn read_catalog_file(path: impl AsRef<Path>) -> Result<Vec<CatalogFileEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads and resolves catalog files against `taxonomy`.
pub fn load_catalog<P: AsRef<Path>>(taxonomy: Arc<Taxonomy>, paths: &[P]) -> Result<Catalog> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(read_catalog_file(p)?);
    }
    Catalog::from_entries(taxonomy, &all)
}

impl Catalog {
    pub fn from_entries(taxonomy: Arc<Taxonomy>, file_entries: &[CatalogFileEntry]) -> Result<Catalog> {
        let mut entries: BTreeMap<Category, Vec<ConceptId>> = BTreeMap::new();
        let mut meta: HashMap<ConceptId, EntryMeta> = HashMap::new();
        let mut unresolved = Vec::new();
        for e in file_entries {
            let id = ConceptId::new(e.category, &e.lemma, &e.sense);
            match taxonomy.get(&id) {
                Some(node) if node.category == e.category => {}
                _ => {
                    unresolved.push(format!("{} ({}, {})", e.lemma, e.sense, e.category));
                    continue;
                }
            }
            match meta.get_mut(&id) {
                Some(m) => {
                    m.tags.extend(e.tags.iter().cloned());
                    if e.media.is_some() {
                        m.media = e.media;
                    }
                }
                None => {
                    meta.insert(
                        id.clone(),
                        EntryMeta {
                            tags: e.tags.clone(),
                            media: e.media,
                        },
                    );
                    entries.entry(e.category).or_default().push(id);
                }
            }
        }
        if !unresolved.is_empty() {
            let count = unresolved.len();
            unresolved.truncate(10);
            return Err(Error::Unresolved {
                count,
                first: unresolved,
            });
        }
        Ok(Catalog {
            taxonomy,
            entries,
            meta,
            declared_counts: None,
        })
    }

    pub fn with_declared_counts(mut self, counts: BTreeMap<String, usize>) -> Self {
        self.declared_counts = Some(counts);
        self
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn taxonomy_arc(&self) -> Arc<Taxonomy> {
        Arc::clone(&self.taxonomy)
    }

    pub fn entries(&self) -> &BTreeMap<Category, Vec<ConceptId>> {
        &self.entries
    }

    pub fn list(&self, category: Category) -> &[ConceptId] {
        self.entries.get(&category).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Tags from the catalog entry merged with the taxonomy node's tags.
    pub fn tags(&self, id: &ConceptId) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = BTreeSet::new();
        if let Some(m) = self.meta.get(id) {
            out.extend(m.tags.iter().map(String::as_str));
        }
        if let Some(n) = self.taxonomy.get(id) {
            out.extend(n.tags.iter().map(String::as_str));
        }
        out
    }

    /// Media gate of a scene-attribute entry; other kinds admit everything.
    pub fn media(&self, id: &ConceptId) -> Media {
        if let Some(media) = self.meta.get(id).and_then(|m| m.media) {
            return media;
        }
        match id.category() {
            Some(Category::SceneAttr(k)) => k.default_media(),
            _ => Media::Any,
        }
    }

    /// Entry counts keyed both by kind and by full category name.
    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut out: BTreeMap<String, usize> = Kind::ALL.iter().map(|k| (k.to_string(), 0)).collect();
        for (cat, list) in &self.entries {
            *out.entry(cat.kind().to_string()).or_default() += list.len();
            if cat.subcategory().is_some() {
                out.insert(cat.to_string(), list.len());
            }
        }
        out
    }

    /// Compares declared counts with the loaded entries. Mismatches are
    /// informational; an absent declaration yields no mismatches.
    pub fn reconcile(&self) -> Vec<CountMismatch> {
        let Some(declared) = &self.declared_counts else {
            return Vec::new();
        };
        let actual = self.counts();
        declared
            .iter()
            .filter_map(|(key, &want)| {
                let have = actual.get(key).copied().unwrap_or(0);
                (have != want).then(|| CountMismatch {
                    key: key.clone(),
                    declared: want,
                    actual: have,
                })
            })
            .collect()
    }
}

/// User-defined sampling scope.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScopeSpec {
    pub include_subtrees: Vec<ConceptId>,
    pub exclude_subtrees: Vec<ConceptId>,
    pub required_tags: BTreeSet<String>,
    pub allowed_attribute_subcategories: Option<BTreeSet<AttributeKind>>,
    pub allowed_relation_subcategories: Option<BTreeSet<RelationKind>>,
    pub allowed_scene_attr_subcategories: Option<BTreeSet<SceneAttrKind>>,
}

impl ScopeSpec {
    pub fn is_empty(&self) -> bool {
        *self == ScopeSpec::default()
    }
}

/// The catalog as seen through a [`ScopeSpec`].
#[derive(Debug, Clone)]
pub struct CatalogView<'a> {
    source: &'a Catalog,
    resolved: BTreeMap<Category, Vec<ConceptId>>,
    attributes: Vec<ConceptId>,
    relations: Vec<ConceptId>,
}

/// Restricts `catalog` to the entries admitted by `spec`.
pub fn scope_filter<'a>(catalog: &'a Catalog, spec: &ScopeSpec) -> Result<CatalogView<'a>> {
    let tax = catalog.taxonomy();
    for id in spec.include_subtrees.iter().chain(&spec.exclude_subtrees) {
        if !tax.contains(id) {
            return Err(Error::UnknownConcept(id.to_string()));
        }
    }

    // Membership sets from subtree expansion; cheaper than walking parent
    // chains for every entry when the subtrees are small.
    let expand = |ids: &[ConceptId]| -> Result<HashSet<ConceptId>> {
        let mut set = HashSet::new();
        for id in ids {
            set.extend(tax.subtree(id)?);
        }
        Ok(set)
    };
    let included = expand(&spec.include_subtrees)?;
    let excluded = expand(&spec.exclude_subtrees)?;

    let mut resolved = BTreeMap::new();
    for (&cat, list) in catalog.entries() {
        let keep_category = match cat {
            Category::Object => true,
            Category::Attribute(k) => allowed(&spec.allowed_attribute_subcategories, k),
            Category::Relation(k) => allowed(&spec.allowed_relation_subcategories, k),
            Category::SceneAttr(k) => allowed(&spec.allowed_scene_attr_subcategories, k),
        };
        if !keep_category {
            continue;
        }
        let kept: Vec<ConceptId> = if cat == Category::Object {
            list.iter()
                .filter(|id| spec.include_subtrees.is_empty() || included.contains(*id))
                .filter(|id| !excluded.contains(*id))
                .filter(|id| {
                    let tags = catalog.tags(id);
                    spec.required_tags.iter().all(|t| tags.contains(t.as_str()))
                })
                .cloned()
                .collect()
        } else {
            list.clone()
        };
        resolved.insert(cat, kept);
    }
    Ok(CatalogView::new(catalog, resolved))
}

fn allowed<T: Ord>(set: &Option<BTreeSet<T>>, value: T) -> bool {
    set.as_ref().is_none_or(|s| s.contains(&value))
}

impl<'a> CatalogView<'a> {
    fn new(source: &'a Catalog, resolved: BTreeMap<Category, Vec<ConceptId>>) -> Self {
        let concat = |kind: Kind| -> Vec<ConceptId> {
            resolved
                .iter()
                .filter(|(c, _)| c.kind() == kind)
                .flat_map(|(_, l)| l.iter().cloned())
                .collect()
        };
        let attributes = concat(Kind::Attribute);
        let relations = concat(Kind::Relation);
        CatalogView {
            source,
            resolved,
            attributes,
            relations,
        }
    }

    /// The unscoped view of a catalog.
    pub fn full(source: &'a Catalog) -> Self {
        CatalogView::new(source, source.entries().clone())
    }

    pub fn source(&self) -> &'a Catalog {
        self.source
    }

    pub fn resolved(&self) -> &BTreeMap<Category, Vec<ConceptId>> {
        &self.resolved
    }

    pub fn list(&self, category: Category) -> &[ConceptId] {
        self.resolved.get(&category).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn objects(&self) -> &[ConceptId] {
        self.list(Category::Object)
    }

    /// All attribute entries, subcategories in canonical order.
    pub fn attributes(&self) -> &[ConceptId] {
        &self.attributes
    }

    pub fn relations(&self) -> &[ConceptId] {
        &self.relations
    }

    /// Scene-attribute entries of `kind` admitted for `target`.
    pub fn scene_attrs(&self, kind: SceneAttrKind, target: Target) -> Vec<&ConceptId> {
        self.list(Category::SceneAttr(kind))
            .iter()
            .filter(|id| self.source.media(id).admits(target))
            .collect()
    }

    /// Subcategories with at least one entry admitted for `target`, in
    /// precedence order.
    pub fn admissible_scene_kinds(&self, target: Target) -> Vec<SceneAttrKind> {
        SceneAttrKind::ALL
            .iter()
            .copied()
            .filter(|&k| !self.scene_attrs(k, target).is_empty())
            .collect()
    }

    pub fn contains(&self, id: &ConceptId) -> bool {
        id.category().map(|c| self.list(c).contains(id)).unwrap_or(false)
    }
}

/// Sizes of the resolved lists per kind; every kind is present.
pub fn counts(view: &CatalogView<'_>) -> BTreeMap<String, usize> {
    let mut out: BTreeMap<String, usize> = Kind::ALL.iter().map(|k| (k.to_string(), 0)).collect();
    for (cat, list) in view.resolved() {
        *out.entry(cat.kind().to_string()).or_default() += list.len();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::{build_tree, FlatEntry, SenseEdge};

    fn edge(c: &str, p: &str, tags: &[&str]) -> SenseEdge {
        SenseEdge {
            child_lemma: c.into(),
            child_sense: "n.01".into(),
            parent_lemma: p.into(),
            parent_sense: "n.01".into(),
            tags: tags.iter().map(|t| t.to_string()).collect(),
            line: 0,
        }
    }

    fn fixture() -> Arc<Taxonomy> {
        let mut edges = vec![edge("thing", "entity", &[])];
        for i in 0..10 {
            let tags: &[&str] = if i < 3 { &["common"] } else { &[] };
            edges.push(edge(&format!("o{i}"), "thing", tags));
        }
        let (tax, _) = build_tree(&edges, ("entity", "n.01")).unwrap();
        let flat: Vec<FlatEntry> = ["red", "blue"]
            .iter()
            .map(|l| FlatEntry {
                lemma: l.to_string(),
                sense: "1".into(),
                category: "attribute:color".parse().unwrap(),
                tags: BTreeSet::new(),
            })
            .chain(std::iter::once(FlatEntry {
                lemma: "wooden".into(),
                sense: "1".into(),
                category: "attribute:material".parse().unwrap(),
                tags: BTreeSet::new(),
            }))
            .collect();
        Arc::new(tax.with_flat_entries(&flat).unwrap())
    }

    fn object_entries() -> Vec<CatalogFileEntry> {
        (0..10)
            .map(|i| CatalogFileEntry {
                lemma: format!("o{i}"),
                sense: "n.01".into(),
                category: Category::Object,
                tags: BTreeSet::new(),
                media: None,
            })
            .collect()
    }

    fn attr(lemma: &str, cat: &str) -> CatalogFileEntry {
        CatalogFileEntry {
            lemma: lemma.into(),
            sense: "1".into(),
            category: cat.parse().unwrap(),
            tags: BTreeSet::new(),
            media: None,
        }
    }

    #[test]
    fn unknown_lemma_fails_resolution() {
        let mut entries = object_entries();
        entries.push(CatalogFileEntry {
            lemma: "unicorn".into(),
            ..entries[0].clone()
        });
        match Catalog::from_entries(fixture(), &entries).unwrap_err() {
            Error::Unresolved { count, first } => {
                assert_eq!(count, 1);
                assert!(first[0].contains("unicorn"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicates_are_merged() {
        let mut entries = object_entries();
        entries.push(entries[0].clone());
        let cat = Catalog::from_entries(fixture(), &entries).unwrap();
        assert_eq!(cat.list(Category::Object).len(), 10);
    }

    #[test]
    fn required_tags_filter_objects() {
        let cat = Catalog::from_entries(fixture(), &object_entries()).unwrap();
        let spec = ScopeSpec {
            required_tags: ["common".to_string()].into(),
            ..ScopeSpec::default()
        };
        let view = scope_filter(&cat, &spec).unwrap();
        assert_eq!(view.objects().len(), 3);
    }

    #[test]
    fn empty_spec_is_identity() {
        let mut entries = object_entries();
        entries.push(attr("red", "attribute:color"));
        entries.push(attr("wooden", "attribute:material"));
        let cat = Catalog::from_entries(fixture(), &entries).unwrap();
        let view = scope_filter(&cat, &ScopeSpec::default()).unwrap();
        assert_eq!(view.resolved(), cat.entries());
        assert_eq!(counts(&view)["attribute"], 2);
    }

    #[test]
    fn attribute_subcategory_gate() {
        let mut entries = object_entries();
        entries.push(attr("red", "attribute:color"));
        entries.push(attr("wooden", "attribute:material"));
        let cat = Catalog::from_entries(fixture(), &entries).unwrap();
        let spec = ScopeSpec {
            allowed_attribute_subcategories: Some([AttributeKind::Material].into()),
            ..ScopeSpec::default()
        };
        let view = scope_filter(&cat, &spec).unwrap();
        assert_eq!(view.attributes().len(), 1);
        assert_eq!(view.attributes()[0].lemma(), Some("wooden"));
    }

    #[test]
    fn unknown_scope_id_is_an_error() {
        let cat = Catalog::from_entries(fixture(), &object_entries()).unwrap();
        let spec = ScopeSpec {
            exclude_subtrees: vec![ConceptId::new(Category::Object, "ghost", "n.01")],
            ..ScopeSpec::default()
        };
        assert!(matches!(scope_filter(&cat, &spec), Err(Error::UnknownConcept(_))));
    }

    #[test]
    fn empty_view_counts_are_zero() {
        let cat = Catalog::from_entries(fixture(), &[]).unwrap();
        let c = counts(&CatalogView::full(&cat));
        assert_eq!(c.len(), 4);
        assert!(c.values().all(|&v| v == 0));
    }

    #[test]
    fn declared_counts_reconcile_without_failing() {
        let cat = Catalog::from_entries(fixture(), &object_entries())
            .unwrap()
            .with_declared_counts(full_release_counts());
        let mismatches = cat.reconcile();
        let object = mismatches.iter().find(|m| m.key == "object").unwrap();
        assert_eq!((object.declared, object.actual), (28_787, 10));
    }

    #[test]
    fn full_attribute_counts_sum_to_kind_total() {
        let total: usize = FULL_ATTRIBUTE_COUNTS.iter().map(|(_, n)| n).sum();
        assert_eq!(total, 1_494);
    }
}
