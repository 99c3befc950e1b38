//! Desk-scale sample taxonomy and catalogs compiled into the crate.
//!
//! 50 objects, 20 attributes, 20 relations and two entries for every
//! scene-attribute subcategory. Used as the default data source by the CLI
//! and throughout the tests.

use std::sync::Arc;

use crate::catalog::{Catalog, CatalogFileEntry};
use crate::taxonomy::{build_tree, parse_sense_edges, FlatEntry, Taxonomy};

pub const OBJECT_EDGES_TSV: &str = include_str!("../data/sample/objects.tsv");
pub const OBJECTS_JSON: &str = include_str!("../data/sample/objects.json");
pub const ATTRIBUTES_JSON: &str = include_str!("../data/sample/attributes.json");
pub const RELATIONS_JSON: &str = include_str!("../data/sample/relations.json");
pub const SCENE_ATTRIBUTES_JSON: &str = include_str!("../data/sample/scene_attributes.json");

/// Root of the sample object tree.
pub const ROOT: (&str, &str) = ("physical_object", "n.01");

fn parse_entries(text: &str) -> Vec<CatalogFileEntry> {
    serde_json::from_str(text).expect("embedded sample catalog parses")
}

/// Catalog entries of every sample file, objects first.
pub fn catalog_entries() -> Vec<CatalogFileEntry> {
    [OBJECTS_JSON, ATTRIBUTES_JSON, RELATIONS_JSON, SCENE_ATTRIBUTES_JSON]
        .iter()
        .flat_map(|t| parse_entries(t))
        .collect()
}

/// Converts non-object catalog entries into flat taxonomy entries.
pub fn flat_entries(entries: &[CatalogFileEntry]) -> Vec<FlatEntry> {
    entries
        .iter()
        .filter(|e| e.category != crate::category::Category::Object)
        .map(|e| FlatEntry {
            lemma: e.lemma.clone(),
            sense: e.sense.clone(),
            category: e.category,
            tags: e.tags.clone(),
        })
        .collect()
}

pub fn taxonomy() -> Taxonomy {
    let edges = parse_sense_edges(OBJECT_EDGES_TSV, "sample/objects.tsv").expect("embedded sample edges parse");
    let (tax, _) = build_tree(&edges, ROOT).expect("sample tree builds");
    tax.with_flat_entries(&flat_entries(&catalog_entries()))
        .expect("sample flat entries are valid")
}

pub fn catalog() -> Catalog {
    Catalog::from_entries(Arc::new(taxonomy()), &catalog_entries()).expect("sample catalog resolves")
}
