//! Canonical labeling of structure templates.
//!
//! A template is split into weakly connected components. Each component is
//! labeled by individualization-refinement: colour refinement seeded with
//! (attribute count, in-degree, out-degree), then a search that individualizes
//! the vertices of the first non-singleton cell until the partition is
//! discrete. The smallest serialization over all leaves is the component's
//! form. Vertices of a cell that are twins (same attribute count, same in-
//! and out-neighbourhoods) are interchangeable by an automorphism, so only one
//! per twin class is branched on.
//!
//! The template key is the concatenation of its component forms in ascending
//! byte order. Component forms are self-delimiting:
//! `[k, attrs.., e, (src, dst)..]`, one byte each.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Validates the raw shape of a template and returns its adjacency lists.
pub(crate) fn check_shape(attr_counts: &[usize], edges: &[(usize, usize)]) -> Result<Adjacency> {
    let n = attr_counts.len();
    if n == 0 {
        return Err(Error::InvalidTemplate("a template needs at least one object".into()));
    }
    if n > u8::MAX as usize {
        return Err(Error::InvalidTemplate(format!(
            "{n} objects exceeds the 255-object key limit"
        )));
    }
    if let Some(a) = attr_counts.iter().find(|&&a| a > u8::MAX as usize) {
        return Err(Error::InvalidTemplate(format!("attribute count {a} exceeds 255")));
    }
    if edges.len() > u8::MAX as usize {
        return Err(Error::InvalidTemplate(format!(
            "{} edges exceeds the 255-edge key limit",
            edges.len()
        )));
    }
    let mut adj = Adjacency {
        out: vec![Vec::new(); n],
        inc: vec![Vec::new(); n],
    };
    for &(s, d) in edges {
        if s >= n || d >= n {
            return Err(Error::InvalidTemplate(format!(
                "edge ({s}, {d}) out of range for {n} objects"
            )));
        }
        if s == d {
            return Err(Error::InvalidTemplate(format!("self-loop on object {s}")));
        }
        if adj.out[s].contains(&d) {
            return Err(Error::InvalidTemplate(format!("duplicate edge ({s}, {d})")));
        }
        adj.out[s].push(d);
        adj.inc[d].push(s);
    }
    if topological_order(&adj.out).is_none() {
        return Err(Error::InvalidTemplate("relation edges contain a cycle".into()));
    }
    for list in adj.out.iter_mut().chain(adj.inc.iter_mut()) {
        list.sort_unstable();
    }
    Ok(adj)
}

#[derive(Debug, Clone)]
pub(crate) struct Adjacency {
    pub out: Vec<Vec<usize>>,
    pub inc: Vec<Vec<usize>>,
}

/// Kahn's algorithm; ties broken by smallest index. `None` on a cycle.
pub(crate) fn topological_order(out: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = out.len();
    let mut indeg = vec![0usize; n];
    for targets in out {
        for &d in targets {
            indeg[d] += 1;
        }
    }
    let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &d in &out[v] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                ready.insert(d);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Weakly connected components, each sorted, listed by smallest member.
pub(crate) fn components(adj: &Adjacency) -> Vec<Vec<usize>> {
    let n = adj.out.len();
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut i = 0;
        while i < members.len() {
            let v = members[i];
            i += 1;
            for &w in adj.out[v].iter().chain(&adj.inc[v]) {
                if comp[w] == usize::MAX {
                    comp[w] = id;
                    members.push(w);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Canonical form of one connected component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ComponentForm {
    pub key: Vec<u8>,
    /// Component-local vertex indices in canonical position order.
    pub order: Vec<usize>,
}

/// A small directed graph with vertex weights, indexed 0..k.
pub(crate) struct LocalGraph {
    pub attrs: Vec<usize>,
    pub out: Vec<Vec<usize>>,
    pub inc: Vec<Vec<usize>>,
    pub edge_count: usize,
}

impl LocalGraph {
    pub fn from_parts(attrs: Vec<usize>, edges: &[(usize, usize)]) -> Self {
        let k = attrs.len();
        let mut out = vec![Vec::new(); k];
        let mut inc = vec![Vec::new(); k];
        for &(s, d) in edges {
            out[s].push(d);
            inc[d].push(s);
        }
        for l in out.iter_mut().chain(inc.iter_mut()) {
            l.sort_unstable();
        }
        LocalGraph {
            attrs,
            out,
            inc,
            edge_count: edges.len(),
        }
    }

    fn len(&self) -> usize {
        self.attrs.len()
    }

    fn twins(&self, u: usize, w: usize) -> bool {
        self.attrs[u] == self.attrs[w] && self.out[u] == self.out[w] && self.inc[u] == self.inc[w]
    }

    /// Colour refinement to a stable partition. Colours are ranks of the
    /// sorted distinct signatures, so they depend only on the isomorphism
    /// type of (graph, initial colouring).
    fn refine(&self, mut colors: Vec<u32>) -> Vec<u32> {
        let k = self.len();
        let mut classes = count_distinct(&colors);
        loop {
            let sigs: Vec<(u32, Vec<u32>, Vec<u32>)> = (0..k)
                .map(|v| {
                    let mut o: Vec<u32> = self.out[v].iter().map(|&w| colors[w]).collect();
                    let mut i: Vec<u32> = self.inc[v].iter().map(|&w| colors[w]).collect();
                    o.sort_unstable();
                    i.sort_unstable();
                    (colors[v], o, i)
                })
                .collect();
            let mut distinct: Vec<&(u32, Vec<u32>, Vec<u32>)> = sigs.iter().collect();
            distinct.sort();
            distinct.dedup();
            let next: Vec<u32> = sigs
                .iter()
                .map(|s| distinct.binary_search(&s).expect("signature present") as u32)
                .collect();
            colors = next;
            if distinct.len() == classes {
                return colors;
            }
            classes = distinct.len();
        }
    }

    fn initial_colors(&self) -> Vec<u32> {
        let sigs: Vec<(usize, usize, usize)> = (0..self.len())
            .map(|v| (self.attrs[v], self.inc[v].len(), self.out[v].len()))
            .collect();
        let mut distinct = sigs.clone();
        distinct.sort_unstable();
        distinct.dedup();
        sigs.iter()
            .map(|s| distinct.binary_search(s).expect("present") as u32)
            .collect()
    }

    fn serialize(&self, colors: &[u32]) -> Vec<u8> {
        let k = self.len();
        let mut order = vec![0usize; k];
        for (v, &c) in colors.iter().enumerate() {
            order[c as usize] = v;
        }
        let mut key = Vec::with_capacity(2 + k + 2 * self.edge_count);
        key.push(k as u8);
        key.extend(order.iter().map(|&v| self.attrs[v] as u8));
        key.push(self.edge_count as u8);
        let mut edges: Vec<(u8, u8)> = Vec::with_capacity(self.edge_count);
        for (s, targets) in self.out.iter().enumerate() {
            for &d in targets {
                edges.push((colors[s] as u8, colors[d] as u8));
            }
        }
        edges.sort_unstable();
        for (s, d) in edges {
            key.push(s);
            key.push(d);
        }
        key
    }

    pub fn canonical_form(&self) -> ComponentForm {
        let start = self.refine(self.initial_colors());
        let mut best: Option<(Vec<u8>, Vec<u32>)> = None;
        self.search(start, &mut best);
        let (key, colors) = best.expect("search visits at least one leaf");
        let mut order = vec![0usize; self.len()];
        for (v, &c) in colors.iter().enumerate() {
            order[c as usize] = v;
        }
        ComponentForm { key, order }
    }

    fn search(&self, colors: Vec<u32>, best: &mut Option<(Vec<u8>, Vec<u32>)>) {
        let k = self.len();
        let mut sizes = vec![0usize; k];
        for &c in &colors {
            sizes[c as usize] += 1;
        }
        let Some(target) = sizes.iter().position(|&s| s > 1) else {
            let key = self.serialize(&colors);
            let better = match best {
                None => true,
                Some((b, _)) => key.cmp(b) == Ordering::Less,
            };
            if better {
                *best = Some((key, colors));
            }
            return;
        };
        let target = target as u32;
        let cell: Vec<usize> = (0..k).filter(|&v| colors[v] == target).collect();
        let mut representatives: Vec<usize> = Vec::new();
        for &v in &cell {
            if !representatives.iter().any(|&r| self.twins(r, v)) {
                representatives.push(v);
            }
        }
        for v in representatives {
            let split: Vec<u32> = (0..k)
                .map(|x| {
                    let c = 2 * colors[x];
                    if colors[x] == target && x != v {
                        c + 1
                    } else {
                        c
                    }
                })
                .collect();
            let refined = self.refine(split);
            self.search(refined, best);
        }
    }
}

fn count_distinct(colors: &[u32]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

/// Canonical key bytes and a canonical vertex order for a validated shape.
pub(crate) fn canonical_labeling(attr_counts: &[usize], adj: &Adjacency) -> (Vec<u8>, Vec<usize>) {
    let mut forms: Vec<(ComponentForm, Vec<usize>)> = components(adj)
        .into_iter()
        .map(|members| {
            let local = |v: usize| members.binary_search(&v).expect("member");
            let attrs: Vec<usize> = members.iter().map(|&v| attr_counts[v]).collect();
            let edges: Vec<(usize, usize)> = members
                .iter()
                .flat_map(|&s| adj.out[s].iter().map(move |&d| (s, d)))
                .map(|(s, d)| (local(s), local(d)))
                .collect();
            let form = LocalGraph::from_parts(attrs, &edges).canonical_form();
            (form, members)
        })
        .collect();
    forms.sort_by(|a, b| a.0.key.cmp(&b.0.key));
    let mut key = Vec::new();
    let mut order = Vec::with_capacity(attr_counts.len());
    for (form, members) in &forms {
        key.extend_from_slice(&form.key);
        order.extend(form.order.iter().map(|&i| members[i]));
    }
    (key, order)
}
