//! Oracle comparisons returning a description of the first disagreement.
//! Shared by the integration tests and the acceptance harness.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use sgf_core::analysis::{compare_models, concept_scores, percentile_buckets, rollup, ScoreRecord, ScoreTable};
use sgf_core::catalog::{CatalogView, ScopeSpec};
use sgf_core::category::Target;
use sgf_core::enumerator::{
    canonical_key, enumerate_structures, CanonicalKey, EnumerationLimits, StructureStore, StructureTemplate,
};
use sgf_core::pipeline::{generate_dataset, prepare_store, CaptionRecord, GenerationConfig};
use sgf_core::realizer::{realize, realize_traced, RealizationTemplates};
use sgf_core::rng::SeededRng;
use sgf_core::sample;
use sgf_core::sampler::{expand_seed_graph, populate, sample_scene_attributes, SceneGraph};
use sgf_core::taxonomy::{ConceptId, Taxonomy};

use super::{labeled_templates, oracle_classes, oracle_form, permutations, rel_close, scan_mean, Labeled};

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub fn template(t: &Labeled) -> StructureTemplate {
    StructureTemplate::new(t.0.clone(), t.1.clone()).unwrap()
}

pub fn labeled(t: &StructureTemplate) -> Labeled {
    (t.attr_counts.clone(), t.edges.clone())
}

/// Enumeration at `c` against the labeled brute force: count, class set and
/// key set. Returns the count.
pub fn enumeration_vs_oracle(c: usize) -> Result<usize, String> {
    let got = enumerate_structures(c, EnumerationLimits::default()).map_err(|e| e.to_string())?;
    let want = oracle_classes(c);
    ensure!(
        got.len() == want.len(),
        "complexity {c}: {} structures, oracle {}",
        got.len(),
        want.len()
    );
    ensure!(
        got.iter().all(|t| t.complexity == c),
        "complexity {c}: wrong template complexity"
    );
    ensure!(
        got.windows(2).all(|w| w[0].canonical_key < w[1].canonical_key),
        "complexity {c}: keys not strictly sorted"
    );
    let forms: BTreeSet<Labeled> = got
        .iter()
        .map(|t| oracle_form(&labeled(t), &permutations(t.n_objects)))
        .collect();
    ensure!(forms == want, "complexity {c}: class sets differ");
    let got_keys: BTreeSet<&CanonicalKey> = got.iter().map(|t| &t.canonical_key).collect();
    let want_keys: BTreeSet<CanonicalKey> = want.iter().map(|t| canonical_key(&template(t)).unwrap()).collect();
    ensure!(
        got_keys == want_keys.iter().collect(),
        "complexity {c}: key sets differ"
    );
    Ok(got.len())
}

/// Over every labeled template of complexity `c`, key equality must be
/// exactly oracle-form equality. Returns the number of templates checked.
pub fn keys_vs_isomorphism(c: usize) -> Result<usize, String> {
    let mut by_form: HashMap<Labeled, CanonicalKey> = HashMap::new();
    let mut by_key: HashMap<CanonicalKey, Labeled> = HashMap::new();
    let all = labeled_templates(c);
    for t in &all {
        let form = oracle_form(t, &permutations(t.0.len()));
        let key = canonical_key(&template(t)).map_err(|e| e.to_string())?;
        ensure!(
            by_form.entry(form.clone()).or_insert_with(|| key.clone()) == &key,
            "isomorphic templates got different keys: {t:?}"
        );
        ensure!(
            by_key.entry(key).or_insert_with(|| form.clone()) == &form,
            "non-isomorphic templates share a key: {t:?}"
        );
    }
    Ok(all.len())
}

/// Realizes `count` random graphs (complexity 1..=12, up to five scene
/// attributes) and checks every caption invariant.
pub fn realization_sweep(view: &CatalogView<'_>, store: &StructureStore, seed: u64, count: u64) -> Result<(), String> {
    let templates = RealizationTemplates::default();
    for i in 0..count {
        let mut rng = SeededRng::new(seed, i);
        let c = rng.range_inclusive(1, 12);
        let level = store.level(c).ok_or(format!("complexity {c} not in store"))?;
        let graph = populate(&level[rng.index(level.len())], view, &mut rng).map_err(|e| e.to_string())?;
        let attrs = sample_scene_attributes(view, (0, 5), Target::Image, &mut rng).map_err(|e| e.to_string())?;
        let trace = realize_traced(&graph, &attrs, &templates).map_err(|e| e.to_string())?;
        let text = realize(&graph, &attrs, &templates).map_err(|e| e.to_string())?;
        super::realization::check(&graph, &trace, &text).map_err(|e| format!("graph {i}: {e}\n{text}"))?;
    }
    Ok(())
}

fn relation_set(g: &SceneGraph, limit: usize) -> BTreeSet<(usize, usize, String)> {
    g.relations
        .iter()
        .filter(|r| r.src < limit && r.dst < limit)
        .map(|r| (r.src, r.dst, r.concept_id.to_string()))
        .collect()
}

/// Expands `pairs` random seeds (complexity 1..=5) by 0..=3 and checks that
/// the seed survives as an induced subgraph. Returns how many expansions
/// linked the seed to new material.
pub fn seed_expansion_sweep(pairs: u64) -> Result<usize, String> {
    let catalog = sample::catalog();
    let view = CatalogView::full(&catalog);
    let store = StructureStore::enumerate(1..=8).map_err(|e| e.to_string())?;
    let mut rng = SeededRng::new(77, 0);
    let mut linked = 0;
    for i in 0..pairs {
        let c = rng.range_inclusive(1, 5);
        let level = store.level(c).ok_or(format!("complexity {c} not in store"))?;
        let seed = populate(&level[rng.index(level.len())], &view, &mut rng).map_err(|e| e.to_string())?;
        let target = c + rng.range_inclusive(0, 3);
        let out = expand_seed_graph(&seed, target, &view, &store, &mut SeededRng::new(5, i))
            .map_err(|e| format!("pair {i}: {e}"))?;
        out.validate().map_err(|e| format!("pair {i}: {e}"))?;
        ensure!(
            out.complexity() == target,
            "pair {i}: complexity {} != {target}",
            out.complexity()
        );
        let n = seed.objects.len();
        ensure!(
            out.objects.len() >= n && out.objects[..n] == seed.objects[..],
            "pair {i}: seed objects changed"
        );
        ensure!(
            relation_set(&out, n) == relation_set(&seed, n),
            "pair {i}: seed is not induced"
        );
        if target == c {
            ensure!(out == seed, "pair {i}: zero deficit changed the seed");
        }
        let crossing = out.relations.iter().filter(|r| (r.src < n) != (r.dst < n)).count();
        ensure!(crossing <= 1, "pair {i}: {crossing} edges cross into the seed");
        linked += crossing;
    }
    Ok(linked)
}

/// 200 generated captions with uniform scores for models `a` and `b` under
/// metric `vqa`. Model `b` skips about a tenth of the captions. Each record
/// carries a tie-heavy `complexity` property and a continuous `noise` one.
pub struct ScoreFixture {
    pub records: Vec<CaptionRecord>,
    pub taxonomy: Taxonomy,
    pub a: BTreeMap<String, f64>,
    pub b: BTreeMap<String, f64>,
}

pub fn unit(rng: &mut SeededRng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

pub const TOL: f64 = 1e-12;

impl ScoreFixture {
    pub fn build() -> ScoreFixture {
        let config = GenerationConfig {
            master_seed: 606,
            count: 200,
            complexity_range: (1, 8),
            scene_attr_range: (0, 2),
            target: Target::Image,
            scope: ScopeSpec::default(),
            structure_constraints: None,
            stratified: false,
            output_path: None,
        };
        let store = prepare_store(&config, None).unwrap();
        let catalog = sample::catalog();
        let mut records = generate_dataset(&config, &store, &catalog, &RealizationTemplates::default(), 2).unwrap();
        let mut rng = SeededRng::new(99, 0);
        let (mut a, mut b) = (BTreeMap::new(), BTreeMap::new());
        for r in &mut records {
            a.insert(r.caption_id.clone(), unit(&mut rng));
            if rng.below(10) != 0 {
                b.insert(r.caption_id.clone(), unit(&mut rng));
            }
            r.properties.insert("complexity".into(), r.complexity as f64);
            r.properties.insert("noise".into(), unit(&mut rng));
        }
        ScoreFixture {
            records,
            taxonomy: catalog.taxonomy().clone(),
            a,
            b,
        }
    }

    pub fn table(&self, f: impl Fn(f64) -> f64) -> ScoreTable {
        let rows = |model: &str, s: &BTreeMap<String, f64>| -> Vec<ScoreRecord> {
            s.iter()
                .map(|(c, &v)| ScoreRecord {
                    caption_id: c.clone(),
                    model_id: model.into(),
                    metric_id: "vqa".into(),
                    value: f(v),
                })
                .collect()
        };
        ScoreTable::from_records(rows("a", &self.a).into_iter().chain(rows("b", &self.b))).unwrap()
    }

    /// Concepts a caption mentions, collected straight from the graph.
    pub fn mentions(r: &CaptionRecord) -> Vec<&ConceptId> {
        let g = &r.scene_graph;
        let mut out = Vec::new();
        for o in &g.objects {
            out.push(&o.concept_id);
            out.extend(&o.attributes);
        }
        out.extend(g.relations.iter().map(|e| &e.concept_id));
        out
    }

    pub fn all_concepts(&self) -> BTreeSet<&ConceptId> {
        self.records.iter().flat_map(Self::mentions).collect()
    }

    /// Scan mean of `scores` over the captions mentioning `concept`.
    pub fn concept_mean(&self, concept: &ConceptId, scores: &BTreeMap<String, f64>) -> Option<(f64, usize)> {
        scan_mean(
            self.records
                .iter()
                .filter(|r| Self::mentions(r).contains(&concept))
                .map(|r| r.caption_id.as_str()),
            scores,
        )
    }

    fn under(&self, id: &ConceptId, node: &ConceptId) -> bool {
        let mut cur = Some(id);
        while let Some(c) = cur {
            if c == node {
                return true;
            }
            cur = self.taxonomy.parent(c);
        }
        false
    }

    /// Scan mean over captions mentioning anything whose parent chain
    /// passes through `node`.
    pub fn node_mean(&self, node: &ConceptId, scores: &BTreeMap<String, f64>) -> Option<(f64, usize)> {
        scan_mean(
            self.records
                .iter()
                .filter(|r| Self::mentions(r).iter().any(|c| self.under(c, node)))
                .map(|r| r.caption_id.as_str()),
            scores,
        )
    }

    /// Members of each bin by brute force: rank of the first caption with
    /// an equal value, divided by the bin width.
    pub fn oracle_bins(&self, property: &str, n_buckets: usize) -> Vec<Vec<&str>> {
        let mut rows: Vec<(f64, &str)> = self
            .records
            .iter()
            .filter(|r| self.a.contains_key(&r.caption_id))
            .map(|r| (r.properties[property], r.caption_id.as_str()))
            .collect();
        rows.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(y.1)));
        let width = (rows.len() / n_buckets).max(1);
        let mut bins = vec![Vec::new(); n_buckets];
        for &(v, id) in &rows {
            let first = rows.iter().position(|r| r.0 == v).unwrap() + 1;
            bins[((first - 1) / width).min(n_buckets - 1)].push(id);
        }
        bins
    }
}

fn close_opt(got: Option<f64>, want: Option<f64>, what: &str) -> Result<(), String> {
    match (got, want) {
        (None, None) => Ok(()),
        (Some(g), Some(w)) if rel_close(g, w, TOL) => Ok(()),
        other => Err(format!("{what}: got {:?}, want {:?}", other.0, other.1)),
    }
}

pub fn check_concept_scores(f: &ScoreFixture) -> Result<usize, String> {
    let got = concept_scores(&f.table(|x| x), &f.records, "a", "vqa").map_err(|e| e.to_string())?;
    let all = f.all_concepts();
    ensure!(
        got.len() == all.len(),
        "{} concepts scored, {} mentioned",
        got.len(),
        all.len()
    );
    for c in all {
        let (mean, n) = f.concept_mean(c, &f.a).ok_or(format!("{c} has no scored caption"))?;
        let stat = got[c];
        ensure!(stat.n == n, "{c}: n {} vs {n}", stat.n);
        close_opt(Some(stat.mean), Some(mean), c.as_str())?;
    }
    Ok(got.len())
}

/// Returns the number of taxonomy nodes with coverage.
pub fn check_rollups(f: &ScoreFixture) -> Result<usize, String> {
    let table = f.table(|x| x);
    let mut covered = 0;
    for node in f.taxonomy.nodes() {
        let got = rollup(&table, &f.records, &f.taxonomy, &node.id, "a", "vqa").map_err(|e| e.to_string())?;
        let want = f.node_mean(&node.id, &f.a);
        ensure!(
            got.map(|s| s.n) == want.map(|w| w.1),
            "{}: n {:?} vs {:?}",
            node.id,
            got,
            want
        );
        close_opt(got.map(|s| s.mean), want.map(|w| w.0), node.id.as_str())?;
        covered += usize::from(want.is_some());
    }
    Ok(covered)
}

pub fn check_comparison(f: &ScoreFixture) -> Result<(), String> {
    let table = f.table(|x| x);
    let shared: HashSet<&String> = f.a.keys().filter(|k| f.b.contains_key(*k)).collect();
    ensure!(shared.len() < f.a.len(), "model b should skip some captions");
    let restrict = |s: &BTreeMap<String, f64>| -> BTreeMap<String, f64> {
        s.iter()
            .filter(|(k, _)| shared.contains(k))
            .map(|(k, v)| (k.clone(), *v))
            .collect()
    };
    let (a, b) = (restrict(&f.a), restrict(&f.b));
    let nodes: Vec<ConceptId> = f.taxonomy.nodes().iter().map(|n| n.id.clone()).collect();
    let ab = compare_models(&table, &f.records, &f.taxonomy, "a", "b", "vqa", &nodes).map_err(|e| e.to_string())?;
    let ba = compare_models(&table, &f.records, &f.taxonomy, "b", "a", "vqa", &nodes).map_err(|e| e.to_string())?;
    for (x, y) in ab.iter().zip(&ba) {
        let (wa, wb) = (f.node_mean(&x.node, &a), f.node_mean(&x.node, &b));
        ensure!(x.n == wa.map_or(0, |w| w.1), "{}: n {} vs {:?}", x.node, x.n, wa);
        close_opt(x.mean_a, wa.map(|w| w.0), x.node.as_str())?;
        close_opt(x.mean_b, wb.map(|w| w.0), x.node.as_str())?;
        if let (Some(d), Some((ma, _)), Some((mb, _))) = (x.delta, wa, wb) {
            ensure!(
                (d - (ma - mb)).abs().total_cmp(&TOL).is_le(),
                "{}: delta {d} vs {}",
                x.node,
                ma - mb
            );
        }
        ensure!(
            x.n == y.n && x.delta.map(|d| -d) == y.delta,
            "{}: comparison is not antisymmetric",
            x.node
        );
    }
    Ok(())
}

pub fn check_buckets(f: &ScoreFixture) -> Result<(), String> {
    let table = f.table(|x| x);
    for property in ["complexity", "noise"] {
        for n_buckets in [1, 3, 7, 10, 400] {
            let got =
                percentile_buckets(&f.records, &table, "a", "vqa", property, n_buckets).map_err(|e| e.to_string())?;
            let want = f.oracle_bins(property, n_buckets);
            ensure!(got.len() == n_buckets, "{property}/{n_buckets}: {} bins", got.len());
            ensure!(
                got.iter().map(|b| b.n).sum::<usize>() == f.a.len(),
                "{property}/{n_buckets}: bins do not partition the captions"
            );
            for (b, ids) in got.iter().zip(&want) {
                let what = format!("{property}/{n_buckets} bin {}", b.bucket);
                ensure!(b.n == ids.len(), "{what}: {} members vs {}", b.n, ids.len());
                close_opt(b.mean, scan_mean(ids.iter().copied(), &f.a).map(|w| w.0), &what)?;
            }
            for pair in got.windows(2) {
                if let (Some(hi), Some(lo)) = (pair[0].value_hi, pair[1].value_lo) {
                    ensure!(
                        hi.total_cmp(&lo).is_lt(),
                        "{property}/{n_buckets}: value {hi} straddles bins"
                    );
                }
            }
        }
    }
    Ok(())
}
