//! Brute-force reference implementations shared by the integration and
//! acceptance tests. Nothing here calls into the algorithms under test.

#![allow(dead_code)]

pub mod checks;
pub mod realization;

use std::collections::{BTreeMap, BTreeSet, HashSet};

/// A labeled template: attribute count per object and directed edges.
pub type Labeled = (Vec<usize>, Vec<(usize, usize)>);

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                go(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

pub fn is_acyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    // 0 = unvisited, 1 = on stack, 2 = done
    fn visit(v: usize, adj: &[Vec<usize>], state: &mut [u8]) -> bool {
        state[v] = 1;
        for &w in &adj[v] {
            if state[w] == 1 || (state[w] == 0 && !visit(w, adj, state)) {
                return false;
            }
        }
        state[v] = 2;
        true
    }
    let mut adj = vec![Vec::new(); n];
    for &(s, d) in edges {
        adj[s].push(d);
    }
    let mut state = vec![0u8; n];
    (0..n).all(|v| state[v] != 0 || visit(v, &adj, &mut state))
}

/// Every way to write `total` as an ordered sum of `parts` non-negative terms.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn subsets<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
    if k == 0 {
        return vec![vec![]];
    }
    if items.len() < k {
        return vec![];
    }
    let mut out = subsets(&items[1..], k);
    for mut s in subsets(&items[1..], k - 1) {
        s.insert(0, items[0].clone());
        out.push(s);
    }
    out
}

/// All labeled templates of exactly complexity `c`.
pub fn labeled_templates(c: usize) -> Vec<Labeled> {
    let mut out = Vec::new();
    for n in 1..=c {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        for e in 0..=(c - n) {
            let a = c - n - e;
            let edge_sets: Vec<Vec<(usize, usize)>> =
                subsets(&pairs, e).into_iter().filter(|s| is_acyclic(n, s)).collect();
            if edge_sets.is_empty() {
                continue;
            }
            for attrs in compositions(a, n) {
                for edges in &edge_sets {
                    out.push((attrs.clone(), edges.clone()));
                }
            }
        }
    }
    out
}

/// Relabels a template: object `i` becomes `perm[i]`.
pub fn relabel((attrs, edges): &Labeled, perm: &[usize]) -> Labeled {
    let mut new_attrs = vec![0; attrs.len()];
    for (i, &a) in attrs.iter().enumerate() {
        new_attrs[perm[i]] = a;
    }
    let mut new_edges: Vec<(usize, usize)> = edges.iter().map(|&(s, d)| (perm[s], perm[d])).collect();
    new_edges.sort_unstable();
    (new_attrs, new_edges)
}

/// Lexicographically least relabeling over all permutations.
pub fn oracle_form(t: &Labeled, perms: &[Vec<usize>]) -> Labeled {
    perms
        .iter()
        .map(|p| relabel(t, p))
        .min()
        .expect("at least one permutation")
}

/// Isomorphism by trying every permutation.
pub fn isomorphic(a: &Labeled, b: &Labeled, perms: &[Vec<usize>]) -> bool {
    if a.0.len() != b.0.len() || a.1.len() != b.1.len() {
        return false;
    }
    let mut target = b.clone();
    target.1.sort_unstable();
    perms.iter().any(|p| relabel(a, p) == target)
}

/// Isomorphism classes of complexity `c`, as the set of their least forms.
pub fn oracle_classes(c: usize) -> BTreeSet<Labeled> {
    let mut perms_by_n: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
    labeled_templates(c)
        .into_iter()
        .map(|t| {
            let n = t.0.len();
            let perms = perms_by_n.entry(n).or_insert_with(|| permutations(n));
            oracle_form(&t, perms)
        })
        .collect()
}

/// Mean and count of `scores` over the captions in `captions` that have one.
pub fn scan_mean<'a>(
    captions: impl IntoIterator<Item = &'a str>,
    scores: &BTreeMap<String, f64>,
) -> Option<(f64, usize)> {
    let mut seen = HashSet::new();
    let mut sum = 0.0;
    let mut n = 0;
    for c in captions {
        if !seen.insert(c) {
            continue;
        }
        if let Some(v) = scores.get(c) {
            sum += v;
            n += 1;
        }
    }
    (n > 0).then(|| (sum / n as f64, n))
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs()).max(1e-300);
    (a - b).abs() <= tol * scale || a == b
}
