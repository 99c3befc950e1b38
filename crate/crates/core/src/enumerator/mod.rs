//! Enumeration of scene-graph structure templates up to isomorphism.
//!
//! A template's complexity is its object count plus relation edges plus
//! attribute slots. Every template decomposes uniquely into weakly connected
//! components, so the enumerator first lists the connected shapes of each
//! complexity (exhaustively, over upper-triangular edge sets, which reach every
//! DAG through a topological labeling) and then forms every multiset of
//! connected shapes whose complexities add up to the budget. Each multiset is
//! exactly one isomorphism class, so no global deduplication pass is needed.

mod canon;
mod store;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use store::{query_structures, store_structures, StoreHeader, StructureQuery, StructureStore};

pub(crate) use canon::topological_order;

/// Default ceiling on the number of structures enumerated per complexity.
pub const DEFAULT_CEILING: usize = 5_000_000;

/// Relabeling-invariant serialization of a template.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalKey(Vec<u8>);

impl CanonicalKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn from_hex(text: &str) -> Result<Self> {
        hex::decode(text)
            .map(CanonicalKey)
            .map_err(|e| Error::InvalidTemplate(format!("bad canonical key `{text}`: {e}")))
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for CanonicalKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for CanonicalKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        CanonicalKey::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// An unlabeled scene-graph shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureTemplate {
    pub n_objects: usize,
    pub attr_counts: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    pub complexity: usize,
    pub canonical_key: CanonicalKey,
}

impl StructureTemplate {
    /// Builds a template from raw parts, validating the shape and computing
    /// complexity and key.
    pub fn new(attr_counts: Vec<usize>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let adj = canon::check_shape(&attr_counts, &edges)?;
        let (key, _) = canon::canonical_labeling(&attr_counts, &adj);
        Ok(StructureTemplate {
            n_objects: attr_counts.len(),
            complexity: attr_counts.len() + edges.len() + attr_counts.iter().sum::<usize>(),
            attr_counts,
            edges,
            canonical_key: CanonicalKey(key),
        })
    }

    pub fn attribute_total(&self) -> usize {
        self.attr_counts.iter().sum()
    }

    /// Re-checks the structural invariants, including the stored complexity
    /// and key.
    pub fn validate(&self) -> Result<()> {
        if self.attr_counts.len() != self.n_objects {
            return Err(Error::InvalidTemplate(format!(
                "attr_counts has {} entries for {} objects",
                self.attr_counts.len(),
                self.n_objects
            )));
        }
        let expected = self.n_objects + self.edges.len() + self.attribute_total();
        if expected != self.complexity {
            return Err(Error::InvalidTemplate(format!(
                "complexity {} != objects + edges + attributes = {expected}",
                self.complexity
            )));
        }
        if canonical_key(self)? != self.canonical_key {
            return Err(Error::InvalidTemplate("stale canonical key".into()));
        }
        Ok(())
    }
}

/// Computes the canonical key of a template's shape. Errors on self-loops,
/// duplicate edges, cycles and out-of-range indices.
pub fn canonical_key(template: &StructureTemplate) -> Result<CanonicalKey> {
    if template.attr_counts.len() != template.n_objects {
        return Err(Error::InvalidTemplate(
            "attr_counts length differs from n_objects".into(),
        ));
    }
    let adj = canon::check_shape(&template.attr_counts, &template.edges)?;
    Ok(CanonicalKey(canon::canonical_labeling(&template.attr_counts, &adj).0))
}

/// Optional caps applied during enumeration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationLimits {
    pub max_objects: Option<usize>,
    pub max_edges: Option<usize>,
    pub max_attrs_per_object: Option<usize>,
}

/// Connected shape, stored in canonical vertex order.
#[derive(Debug, Clone)]
struct Connected {
    key: Vec<u8>,
    complexity: usize,
    attrs: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

/// Enumerates every isomorphism class of templates of exactly `complexity`,
/// sorted by canonical key.
pub fn enumerate_structures(complexity: usize, limits: EnumerationLimits) -> Result<Vec<StructureTemplate>> {
    enumerate_with_ceiling(complexity, limits, DEFAULT_CEILING)
}

pub fn enumerate_with_ceiling(
    complexity: usize,
    limits: EnumerationLimits,
    ceiling: usize,
) -> Result<Vec<StructureTemplate>> {
    if complexity < 1 {
        return Err(Error::ComplexityTooSmall(complexity));
    }
    let parts = connected_shapes(complexity, &limits);
    let max_objects = limits.max_objects.unwrap_or(complexity);
    let max_edges = limits.max_edges.unwrap_or(complexity);

    let mut picks: Vec<Vec<usize>> = Vec::new();
    let mut stack = Vec::new();
    collect_multisets(
        &parts,
        parts.len(),
        complexity,
        (max_objects, max_edges),
        &mut stack,
        &mut picks,
        ceiling,
    )
    .map_err(|()| Error::Overflow { complexity, ceiling })?;

    let mut out: Vec<StructureTemplate> = picks
        .par_iter()
        .map(|pick| assemble(&parts, pick, complexity))
        .collect();
    out.par_sort_unstable_by(|a, b| a.canonical_key.cmp(&b.canonical_key));
    Ok(out)
}

/// Connected shapes of complexity 1..=budget, sorted by (complexity, key).
fn connected_shapes(budget: usize, limits: &EnumerationLimits) -> Vec<Connected> {
    let max_objects = limits.max_objects.unwrap_or(budget);
    let max_edges = limits.max_edges.unwrap_or(budget);
    let mut jobs: Vec<(usize, usize)> = Vec::new();
    for k in 1..=max_objects.min(budget) {
        for e in k - 1..=max_edges.min(budget - k) {
            if k + e <= budget {
                jobs.push((k, e));
            }
        }
    }
    let mut shapes: Vec<Connected> = jobs
        .par_iter()
        .flat_map_iter(|&(k, e)| connected_with(k, e, budget - k - e, limits))
        .collect();
    shapes.sort_by(|a, b| (a.complexity, &a.key).cmp(&(b.complexity, &b.key)));
    shapes
}

/// All connected shapes with `k` objects and `e` edges, carrying between 0
/// and `max_attrs` attribute slots in total.
fn connected_with(k: usize, e: usize, max_attrs: usize, limits: &EnumerationLimits) -> Vec<Connected> {
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    if e > pairs.len() {
        return Vec::new();
    }
    // unlabeled DAG skeletons first
    let mut skeletons: BTreeMap<Vec<u8>, Vec<(usize, usize)>> = BTreeMap::new();
    for_each_subset(pairs.len(), e, &mut |subset| {
        let edges: Vec<(usize, usize)> = subset.iter().map(|&i| pairs[i]).collect();
        if !weakly_connected(k, &edges) {
            return;
        }
        let form = canon::LocalGraph::from_parts(vec![0; k], &edges).canonical_form();
        skeletons
            .entry(form.key)
            .or_insert_with(|| relabel(&edges, &form.order));
    });

    let per_object = limits.max_attrs_per_object.unwrap_or(max_attrs);
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let mut out = Vec::new();
    for edges in skeletons.into_values() {
        for total in 0..=max_attrs {
            for_each_composition(total, k, per_object, &mut |attrs| {
                let form = canon::LocalGraph::from_parts(attrs.to_vec(), &edges).canonical_form();
                if seen.insert(form.key.clone()) {
                    let canon_attrs: Vec<usize> = form.order.iter().map(|&v| attrs[v]).collect();
                    out.push(Connected {
                        complexity: k + e + total,
                        attrs: canon_attrs,
                        edges: relabel(&edges, &form.order),
                        key: form.key,
                    });
                }
            });
        }
    }
    out
}

/// Rewrites edges so that vertex `order[p]` becomes `p`; edges come back sorted.
fn relabel(edges: &[(usize, usize)], order: &[usize]) -> Vec<(usize, usize)> {
    let mut pos = vec![0usize; order.len()];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    let mut out: Vec<(usize, usize)> = edges.iter().map(|&(s, d)| (pos[s], pos[d])).collect();
    out.sort_unstable();
    out
}

fn weakly_connected(k: usize, edges: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut c = x;
        while p[c] != r {
            let next = p[c];
            p[c] = r;
            c = next;
        }
        r
    }
    let mut groups = k;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            groups -= 1;
        }
    }
    groups == 1
}

/// Calls `f` with every `size`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, size: usize, f: &mut dyn FnMut(&[usize])) {
    if size > n {
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        f(&idx);
        let mut i = size;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - size + i {
                idx[i] += 1;
                for j in i + 1..size {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Calls `f` with every vector of `parts` non-negative integers summing to
/// `total`, each at most `cap`.
fn for_each_composition(total: usize, parts: usize, cap: usize, f: &mut dyn FnMut(&[usize])) {
    fn go(i: usize, left: usize, cap: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        let parts = cur.len();
        if i + 1 == parts {
            if left <= cap {
                cur[i] = left;
                f(cur);
            }
            return;
        }
        for v in 0..=left.min(cap) {
            cur[i] = v;
            go(i + 1, left - v, cap, cur, f);
        }
    }
    let mut cur = vec![0; parts];
    go(0, total, cap, &mut cur, f);
}

/// Non-increasing index sequences over `parts[..upper]` whose complexities
/// sum to `left`.
fn collect_multisets(
    parts: &[Connected],
    upper: usize,
    left: usize,
    caps: (usize, usize),
    stack: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
    ceiling: usize,
) -> std::result::Result<(), ()> {
    if left == 0 {
        if out.len() >= ceiling {
            return Err(());
        }
        out.push(stack.clone());
        return Ok(());
    }
    for i in (0..upper).rev() {
        let p = &parts[i];
        if p.complexity > left {
            continue;
        }
        let (objs, edges) = (p.attrs.len(), p.edges.len());
        if objs > caps.0 || edges > caps.1 {
            continue;
        }
        stack.push(i);
        collect_multisets(
            parts,
            i + 1,
            left - p.complexity,
            (caps.0 - objs, caps.1 - edges),
            stack,
            out,
            ceiling,
        )?;
        stack.pop();
    }
    Ok(())
}

fn assemble(parts: &[Connected], pick: &[usize], complexity: usize) -> StructureTemplate {
    let mut chosen: Vec<&Connected> = pick.iter().map(|&i| &parts[i]).collect();
    chosen.sort_by(|a, b| a.key.cmp(&b.key));
    let mut attr_counts = Vec::new();
    let mut edges = Vec::new();
    let mut key = Vec::new();
    for c in chosen {
        let offset = attr_counts.len();
        attr_counts.extend_from_slice(&c.attrs);
        edges.extend(c.edges.iter().map(|&(s, d)| (s + offset, d + offset)));
        key.extend_from_slice(&c.key);
    }
    StructureTemplate {
        n_objects: attr_counts.len(),
        attr_counts,
        edges,
        complexity,
        canonical_key: CanonicalKey(key),
    }
}
