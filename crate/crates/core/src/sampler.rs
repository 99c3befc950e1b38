//! Populating structure templates with concepts, sampling scene attributes,
//! and growing user-supplied seed graphs.
//!
//! Draw order within one stream is fixed: object concepts in index order,
//! then each object's attributes (distinct within the object), then relation
//! concepts in template edge order.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::catalog::CatalogView;
use crate::category::{Category, SceneAttrKind, Target};
use crate::enumerator::{query_structures, topological_order, StructureQuery, StructureStore, StructureTemplate};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::taxonomy::ConceptId;

/// Probability that a seed expansion links the new component to the seed
/// with one relation. Drawn as a fair coin.
pub const ATTACH_PROBABILITY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SceneObject {
    pub index: usize,
    pub concept_id: ConceptId,
    #[serde(default)]
    pub attributes: Vec<ConceptId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SceneRelation {
    pub src: usize,
    pub dst: usize,
    pub concept_id: ConceptId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SceneGraph {
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub relations: Vec<SceneRelation>,
}

impl SceneGraph {
    pub fn attribute_count(&self) -> usize {
        self.objects.iter().map(|o| o.attributes.len()).sum()
    }

    /// Objects + attributes + relations.
    pub fn complexity(&self) -> usize {
        self.objects.len() + self.attribute_count() + self.relations.len()
    }

    pub fn attr_counts(&self) -> Vec<usize> {
        self.objects.iter().map(|o| o.attributes.len()).collect()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.relations.iter().map(|r| (r.src, r.dst)).collect()
    }

    /// Outgoing adjacency over object indices.
    pub fn out_edges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.objects.len()];
        for r in &self.relations {
            if r.src < out.len() {
                out[r.src].push(r.dst);
            }
        }
        out
    }

    /// Checks indices, categories and acyclicity.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGraph(m));
        for (i, o) in self.objects.iter().enumerate() {
            if o.index != i {
                return bad(format!("object at position {i} has index {}", o.index));
            }
            if o.concept_id.category() != Some(Category::Object) {
                return bad(format!("object {i} has non-object concept {}", o.concept_id));
            }
            let mut seen = HashSet::new();
            for a in &o.attributes {
                if !matches!(a.category(), Some(Category::Attribute(_))) {
                    return bad(format!("object {i} has non-attribute {a}"));
                }
                if !seen.insert(a) {
                    return bad(format!("object {i} repeats attribute {a}"));
                }
            }
        }
        let n = self.objects.len();
        let mut pairs = HashSet::new();
        for r in &self.relations {
            if r.src >= n || r.dst >= n {
                return bad(format!("relation ({}, {}) out of range", r.src, r.dst));
            }
            if r.src == r.dst {
                return bad(format!("self-relation on object {}", r.src));
            }
            if !pairs.insert((r.src, r.dst)) {
                return bad(format!("duplicate relation ({}, {})", r.src, r.dst));
            }
            if !matches!(r.concept_id.category(), Some(Category::Relation(_))) {
                return bad(format!("relation uses non-relation concept {}", r.concept_id));
            }
        }
        if topological_order(&self.out_edges()).is_none() {
            return bad("relations contain a cycle".into());
        }
        Ok(())
    }

    /// Whether the graph has the exact shape of `template`.
    pub fn matches_shape(&self, template: &StructureTemplate) -> bool {
        self.attr_counts() == template.attr_counts && self.edges() == template.edges
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SceneAttribute {
    pub subcategory: SceneAttrKind,
    pub concept_id: ConceptId,
}

/// Caption-level modifiers, ordered by subcategory precedence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SceneAttributeSet {
    pub items: Vec<SceneAttribute>,
}

impl SceneAttributeSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Fills every slot of `template` with a uniform draw from `view`.
pub fn populate(template: &StructureTemplate, view: &CatalogView<'_>, rng: &mut SeededRng) -> Result<SceneGraph> {
    let objects = view.objects();
    let attributes = view.attributes();
    let relations = view.relations();
    if objects.is_empty() {
        return Err(too_narrow("object", 1, 0));
    }
    let max_attrs = template.attr_counts.iter().copied().max().unwrap_or(0);
    if max_attrs > attributes.len() {
        return Err(too_narrow("attribute", max_attrs, attributes.len()));
    }
    if !template.edges.is_empty() && relations.is_empty() {
        return Err(too_narrow("relation", 1, 0));
    }

    let mut graph = SceneGraph {
        objects: (0..template.n_objects)
            .map(|index| SceneObject {
                index,
                concept_id: objects[rng.index(objects.len())].clone(),
                attributes: Vec::new(),
            })
            .collect(),
        relations: Vec::with_capacity(template.edges.len()),
    };
    for (obj, &count) in graph.objects.iter_mut().zip(&template.attr_counts) {
        obj.attributes = rng
            .sample_distinct(attributes.len(), count)
            .into_iter()
            .map(|i| attributes[i].clone())
            .collect();
    }
    for &(src, dst) in &template.edges {
        graph.relations.push(SceneRelation {
            src,
            dst,
            concept_id: relations[rng.index(relations.len())].clone(),
        });
    }
    Ok(graph)
}

fn too_narrow(category: &str, needed: usize, available: usize) -> Error {
    Error::ScopeTooNarrow {
        category: category.into(),
        needed,
        available,
    }
}

/// Draws between `lo` and `hi` scene attributes of distinct subcategories
/// admitted for `target`.
pub fn sample_scene_attributes(
    view: &CatalogView<'_>,
    (lo, hi): (usize, usize),
    target: Target,
    rng: &mut SeededRng,
) -> Result<SceneAttributeSet> {
    let kinds = view.admissible_scene_kinds(target);
    if lo > hi {
        return Err(Error::InvalidRange {
            lo,
            hi,
            reason: "lower bound exceeds upper bound".into(),
        });
    }
    if hi > kinds.len() {
        return Err(Error::InvalidRange {
            lo,
            hi,
            reason: format!("only {} scene-attribute subcategories admit {target:?}", kinds.len()),
        });
    }
    let k = rng.range_inclusive(lo, hi);
    let mut chosen: Vec<SceneAttrKind> = rng
        .sample_distinct(kinds.len(), k)
        .into_iter()
        .map(|i| kinds[i])
        .collect();
    chosen.sort();
    let items = chosen
        .into_iter()
        .map(|kind| {
            let entries = view.scene_attrs(kind, target);
            SceneAttribute {
                subcategory: kind,
                concept_id: entries[rng.index(entries.len())].clone(),
            }
        })
        .collect();
    Ok(SceneAttributeSet { items })
}

/// Grows `seed` to exactly `target_complexity` without touching its content.
///
/// The deficit is filled by one sampled structure. With probability one half
/// (and when the deficit allows it) that structure is one smaller and a new
/// relation joins a uniformly chosen new object to a uniformly chosen seed
/// object, in a direction chosen by a fair coin. The two parts are disjoint
/// before the link, so the result stays acyclic.
pub fn expand_seed_graph(
    seed: &SceneGraph,
    target_complexity: usize,
    view: &CatalogView<'_>,
    store: &StructureStore,
    rng: &mut SeededRng,
) -> Result<SceneGraph> {
    seed.validate()?;
    let have = seed.complexity();
    if have > target_complexity {
        return Err(Error::InvalidArgument(format!(
            "seed complexity {have} exceeds target {target_complexity}"
        )));
    }
    let deficit = target_complexity - have;
    if deficit == 0 {
        return Ok(seed.clone());
    }

    let attach = rng.coin() && deficit >= 2 && !seed.objects.is_empty() && !view.relations().is_empty();
    let size = if attach { deficit - 1 } else { deficit };
    let candidates = query_structures(store, size, &StructureQuery::default())?;
    if candidates.is_empty() {
        return Err(Error::NoStructures(size));
    }
    let template = candidates[rng.index(candidates.len())];
    let part = populate(template, view, rng)?;

    let offset = seed.objects.len();
    let mut out = seed.clone();
    out.objects.extend(part.objects.into_iter().map(|mut o| {
        o.index += offset;
        o
    }));
    out.relations.extend(part.relations.into_iter().map(|mut r| {
        r.src += offset;
        r.dst += offset;
        r
    }));
    if attach {
        let fresh = offset + rng.index(out.objects.len() - offset);
        let old = rng.index(offset);
        let relations = view.relations();
        let concept_id = relations[rng.index(relations.len())].clone();
        let (src, dst) = if rng.coin() { (fresh, old) } else { (old, fresh) };
        out.relations.push(SceneRelation { src, dst, concept_id });
    }
    if out.complexity() != target_complexity {
        return Err(Error::Invariant(format!(
            "expansion produced complexity {} instead of {target_complexity}",
            out.complexity()
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;

    #[test]
    fn single_object_view_forces_the_draw() {
        let catalog = sample::catalog();
        let cat_id = ConceptId::new(Category::Object, "cat", "n.01");
        let spec = crate::catalog::ScopeSpec {
            include_subtrees: vec![cat_id.clone()],
            exclude_subtrees: vec![ConceptId::new(Category::Object, "kitten", "n.01")],
            ..Default::default()
        };
        let view = crate::catalog::scope_filter(&catalog, &spec).unwrap();
        assert_eq!(view.objects(), std::slice::from_ref(&cat_id));
        let t = StructureTemplate::new(vec![0], vec![]).unwrap();
        let g = populate(&t, &view, &mut SeededRng::new(1, 0)).unwrap();
        assert_eq!(
            g,
            SceneGraph {
                objects: vec![SceneObject {
                    index: 0,
                    concept_id: cat_id,
                    attributes: vec![]
                }],
                relations: vec![]
            }
        );
    }

    #[test]
    fn shape_is_preserved() {
        let catalog = sample::catalog();
        let view = CatalogView::full(&catalog);
        let t = StructureTemplate::new(vec![0, 0], vec![(0, 1)]).unwrap();
        let g = populate(&t, &view, &mut SeededRng::new(3, 9)).unwrap();
        assert_eq!(g.objects.len(), 2);
        assert_eq!(g.relations.len(), 1);
        assert_eq!(g.attr_counts(), vec![0, 0]);
        g.validate().unwrap();
    }

    #[test]
    fn too_many_attribute_slots_is_scope_error() {
        let catalog = sample::catalog();
        let view = CatalogView::full(&catalog);
        let t = StructureTemplate::new(vec![view.attributes().len() + 1], vec![]).unwrap();
        match populate(&t, &view, &mut SeededRng::new(0, 0)) {
            Err(Error::ScopeTooNarrow { category, .. }) => assert_eq!(category, "attribute"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_scene_attribute_range() {
        let catalog = sample::catalog();
        let view = CatalogView::full(&catalog);
        let s = sample_scene_attributes(&view, (0, 0), Target::Image, &mut SeededRng::new(0, 0)).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn image_target_excludes_video_and_3d_subcategories() {
        let catalog = sample::catalog();
        let view = CatalogView::full(&catalog);
        let banned = [
            SceneAttrKind::CameraRig,
            SceneAttrKind::CameraMovement,
            SceneAttrKind::VideoEditingStyle,
            SceneAttrKind::TemporalSpan,
            SceneAttrKind::ThreedAttribute,
        ];
        for stream in 0..200 {
            let s = sample_scene_attributes(&view, (2, 2), Target::Image, &mut SeededRng::new(5, stream)).unwrap();
            assert_eq!(s.len(), 2);
            assert_ne!(s.items[0].subcategory, s.items[1].subcategory);
            assert!(s.items[0].subcategory < s.items[1].subcategory);
            assert!(s.items.iter().all(|i| !banned.contains(&i.subcategory)));
        }
    }

    #[test]
    fn upper_bound_beyond_admissible_is_rejected() {
        let catalog = sample::catalog();
        let view = CatalogView::full(&catalog);
        let n = view.admissible_scene_kinds(Target::Threed).len();
        assert!(sample_scene_attributes(&view, (0, n + 1), Target::Threed, &mut SeededRng::new(0, 0)).is_err());
    }

    #[test]
    fn zero_deficit_returns_seed() {
        let catalog = sample::catalog();
        let view = CatalogView::full(&catalog);
        let store = StructureStore::enumerate(1..=5).unwrap();
        let t = StructureTemplate::new(vec![1, 0], vec![(0, 1)]).unwrap();
        let seed = populate(&t, &view, &mut SeededRng::new(0, 0)).unwrap();
        assert_eq!(seed.complexity(), 4);
        let out = expand_seed_graph(&seed, 4, &view, &store, &mut SeededRng::new(0, 1)).unwrap();
        assert_eq!(out, seed);
    }

    #[test]
    fn oversize_seed_is_rejected() {
        let catalog = sample::catalog();
        let view = CatalogView::full(&catalog);
        let store = StructureStore::enumerate(1..=3).unwrap();
        let t = StructureTemplate::new(vec![1, 0], vec![(0, 1)]).unwrap();
        let seed = populate(&t, &view, &mut SeededRng::new(0, 0)).unwrap();
        assert!(expand_seed_graph(&seed, 3, &view, &store, &mut SeededRng::new(0, 1)).is_err());
    }

    #[test]
    fn invalid_seed_is_rejected() {
        let catalog = sample::catalog();
        let view = CatalogView::full(&catalog);
        let store = StructureStore::enumerate(1..=3).unwrap();
        let cat = ConceptId::new(Category::Object, "cat", "n.01");
        let seed = SceneGraph {
            objects: vec![SceneObject {
                index: 0,
                concept_id: cat,
                attributes: vec![],
            }],
            relations: vec![SceneRelation {
                src: 0,
                dst: 0,
                concept_id: view.relations()[0].clone(),
            }],
        };
        assert!(matches!(
            expand_seed_graph(&seed, 3, &view, &store, &mut SeededRng::new(0, 0)),
            Err(Error::InvalidGraph(_))
        ));
    }
}
