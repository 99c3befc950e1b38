mod support;

use proptest::prelude::*;
use sgf_core::catalog::{scope_filter, CatalogView, ScopeSpec};
use sgf_core::category::{Category, Target};
use sgf_core::enumerator::StructureStore;
use sgf_core::realizer::{realize, realize_traced, RealizationTemplates};
use sgf_core::rng::SeededRng;
use sgf_core::sample;
use sgf_core::sampler::{populate, sample_scene_attributes};
use sgf_core::taxonomy::ConceptId;

#[test]
fn random_desk_graphs_satisfy_every_invariant() {
    let catalog = sample::catalog();
    let store = StructureStore::enumerate(1..=12).unwrap();
    support::checks::realization_sweep(&CatalogView::full(&catalog), &store, 31, 1_000).unwrap();
}

#[test]
fn duplicate_heavy_graphs_get_ordinals() {
    let catalog = sample::catalog();
    let keep = ["cat", "dog"];
    let exclude: Vec<ConceptId> = catalog
        .list(Category::Object)
        .iter()
        .filter(|id| !keep.contains(&id.lemma().unwrap()))
        .cloned()
        .collect();
    let view = scope_filter(
        &catalog,
        &ScopeSpec {
            exclude_subtrees: exclude,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(view.objects().len(), 2);
    let store = StructureStore::enumerate(1..=12).unwrap();
    support::checks::realization_sweep(&view, &store, 32, 500).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn realization_is_pure(seed in any::<u64>(), c in 1usize..10) {
        let catalog = sample::catalog();
        let view = CatalogView::full(&catalog);
        let store = StructureStore::enumerate(c..=c).unwrap();
        let level = store.level(c).unwrap();
        let mut rng = SeededRng::new(seed, 0);
        let graph = populate(&level[rng.index(level.len())], &view, &mut rng).unwrap();
        let attrs = sample_scene_attributes(&view, (0, 3), Target::Video, &mut rng).unwrap();
        let t = RealizationTemplates::default();
        prop_assert_eq!(realize(&graph, &attrs, &t).unwrap(), realize(&graph.clone(), &attrs.clone(), &t).unwrap());
    }
}

#[test]
fn checker_rejects_tampered_captions() {
    use sgf_core::realizer::SentenceKind;
    use sgf_core::sampler::{SceneAttributeSet, SceneGraph, SceneObject, SceneRelation};

    let o = |i: usize, l: &str| SceneObject {
        index: i,
        concept_id: ConceptId::new(Category::Object, l, "n.01"),
        attributes: vec![],
    };
    let graph = SceneGraph {
        objects: vec![o(0, "cat"), o(1, "cat"), o(2, "dog"), o(3, "owl")],
        relations: vec![SceneRelation {
            src: 0,
            dst: 2,
            concept_id: ConceptId::from_raw("relation:spatial/next to/r.01"),
        }],
    };
    let t = RealizationTemplates::default();
    let trace = realize_traced(&graph, &SceneAttributeSet::default(), &t).unwrap();
    let text = trace.text();
    assert_eq!(
        text,
        "The first cat is next to a dog. There is the second cat. There is an owl."
    );
    support::realization::check(&graph, &trace, &text).unwrap();

    let mut swapped = trace.clone();
    swapped.sentences.swap(1, 2);
    assert!(support::realization::check(&graph, &swapped, &swapped.text()).is_err());

    let mut extra = trace.clone();
    extra
        .sentences
        .push((SentenceKind::Standalone { object: 2 }, "There is the dog.".into()));
    assert!(support::realization::check(&graph, &extra, &extra.text()).is_err());

    let mut no_ordinal = trace.clone();
    no_ordinal.introductions[1] = "a cat".into();
    no_ordinal.sentences[1].1 = "There is a cat.".into();
    assert!(support::realization::check(&graph, &no_ordinal, &no_ordinal.text()).is_err());

    let dropped = text.replace(" next to", "");
    assert!(support::realization::check(&graph, &trace, &dropped).is_err());
}
