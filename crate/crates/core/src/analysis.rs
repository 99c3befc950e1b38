//! Aggregation of externally computed per-caption scores: concept means,
//! taxonomy rollups, model comparison, gap ranking, percentile buckets and
//! selection strategies.
//!
//! A caption counts once for a concept however many times the concept
//! occurs in it. Percentiles are nearest-rank.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{parse_finite, CaptionRecord};
use crate::taxonomy::{ConceptId, Taxonomy};

pub const DEFAULT_MIN_SUPPORT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub caption_id: String,
    pub model_id: String,
    pub metric_id: String,
    pub value: f64,
}

/// Immutable score lookup keyed by `(model, metric)` then caption.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    by_series: BTreeMap<(String, String), BTreeMap<String, f64>>,
    len: usize,
}

impl ScoreTable {
    pub fn from_records(records: impl IntoIterator<Item = ScoreRecord>) -> Result<Self> {
        let mut table = ScoreTable::default();
        for r in records {
            table.insert(r)?;
        }
        Ok(table)
    }

    fn insert(&mut self, r: ScoreRecord) -> Result<()> {
        if !r.value.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite score for ({}, {}, {})",
                r.caption_id, r.model_id, r.metric_id
            )));
        }
        let series = self
            .by_series
            .entry((r.model_id.clone(), r.metric_id.clone()))
            .or_default();
        if series.contains_key(&r.caption_id) {
            return Err(Error::DuplicateScore(r.caption_id, r.model_id, r.metric_id));
        }
        series.insert(r.caption_id, r.value);
        self.len += 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, caption_id: &str, model: &str, metric: &str) -> Option<f64> {
        self.series(model, metric).and_then(|s| s.get(caption_id).copied())
    }

    pub fn series(&self, model: &str, metric: &str) -> Option<&BTreeMap<String, f64>> {
        self.by_series.get(&(model.to_string(), metric.to_string()))
    }

    /// The non-empty score series for `(model, metric)`.
    pub fn require(&self, model: &str, metric: &str) -> Result<&BTreeMap<String, f64>> {
        self.series(model, metric)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::NoScores {
                model: model.into(),
                metric: metric.into(),
            })
    }

    pub fn models(&self) -> BTreeSet<&str> {
        self.by_series.keys().map(|(m, _)| m.as_str()).collect()
    }
}

/// Parses `caption_id,model_id,metric_id,value` rows; a header row is optional.
pub fn parse_scores(reader: impl Read, origin: impl AsRef<Path>) -> Result<ScoreTable> {
    let origin = origin.as_ref();
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut table = ScoreTable::default();
    for (i, row) in csv.records().enumerate() {
        let line = i + 1;
        let row = row.map_err(|e| Error::parse(origin, line, e.to_string()))?;
        if row.len() != 4 {
            return Err(Error::parse(
                origin,
                line,
                format!("expected 4 fields, found {}", row.len()),
            ));
        }
        if line == 1 && &row[0] == "caption_id" {
            continue;
        }
        let value =
            parse_finite(&row[3]).ok_or_else(|| Error::parse(origin, line, format!("invalid score `{}`", &row[3])))?;
        table.insert(ScoreRecord {
            caption_id: row[0].into(),
            model_id: row[1].into(),
            metric_id: row[2].into(),
            value,
        })?;
    }
    Ok(table)
}

pub fn ingest_scores(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_scores(file, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConceptStat {
    pub mean: f64,
    pub n: usize,
}

/// Object, attribute and relation concepts of a caption, without repeats.
pub fn caption_concepts(record: &CaptionRecord) -> BTreeSet<&ConceptId> {
    let g = &record.scene_graph;
    g.objects
        .iter()
        .flat_map(|o| std::iter::once(&o.concept_id).chain(&o.attributes))
        .chain(g.relations.iter().map(|r| &r.concept_id))
        .collect()
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<ConceptStat> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| ConceptStat {
        mean: sum / n as f64,
        n,
    })
}

/// Mean score per concept over the scored captions containing it.
pub fn concept_scores(
    table: &ScoreTable,
    records: &[CaptionRecord],
    model: &str,
    metric: &str,
) -> Result<BTreeMap<ConceptId, ConceptStat>> {
    let scores = table.require(model, metric)?;
    let mut acc: BTreeMap<ConceptId, (f64, usize)> = BTreeMap::new();
    for r in records {
        let Some(&v) = scores.get(&r.caption_id) else { continue };
        for c in caption_concepts(r) {
            let e = acc.entry(c.clone()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    Ok(acc
        .into_iter()
        .map(|(c, (sum, n))| {
            (
                c,
                ConceptStat {
                    mean: sum / n as f64,
                    n,
                },
            )
        })
        .collect())
}

fn subtree_set(taxonomy: &Taxonomy, node: &ConceptId) -> Result<HashSet<ConceptId>> {
    Ok(taxonomy.subtree(node)?.into_iter().collect())
}

fn rollup_over(
    records: &[CaptionRecord],
    scores: &BTreeMap<String, f64>,
    subtree: &HashSet<ConceptId>,
    allowed: Option<&HashSet<&str>>,
) -> Option<ConceptStat> {
    mean_of(records.iter().filter_map(|r| {
        if allowed.is_some_and(|a| !a.contains(r.caption_id.as_str())) {
            return None;
        }
        let v = *scores.get(&r.caption_id)?;
        caption_concepts(r).iter().any(|c| subtree.contains(*c)).then_some(v)
    }))
}

/// Mean over the distinct scored captions containing any concept under
/// `node`. `None` when no scored caption does.
pub fn rollup(
    table: &ScoreTable,
    records: &[CaptionRecord],
    taxonomy: &Taxonomy,
    node: &ConceptId,
    model: &str,
    metric: &str,
) -> Result<Option<ConceptStat>> {
    let scores = table.require(model, metric)?;
    let subtree = subtree_set(taxonomy, node)?;
    Ok(rollup_over(records, scores, &subtree, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeComparison {
    pub node: ConceptId,
    pub mean_a: Option<f64>,
    pub mean_b: Option<f64>,
    pub delta: Option<f64>,
    pub n: usize,
}

impl NodeComparison {
    pub fn covered(&self) -> bool {
        self.n > 0
    }
}

/// Rollups of two models per node over the captions both have scores for;
/// `delta = mean_a - mean_b`. Nodes without coverage are kept with `n = 0`.
pub fn compare_models(
    table: &ScoreTable,
    records: &[CaptionRecord],
    taxonomy: &Taxonomy,
    model_a: &str,
    model_b: &str,
    metric: &str,
    nodes: &[ConceptId],
) -> Result<Vec<NodeComparison>> {
    let a = table.require(model_a, metric)?;
    let b = table.require(model_b, metric)?;
    let shared: HashSet<&str> = a.keys().filter(|k| b.contains_key(*k)).map(String::as_str).collect();
    nodes
        .iter()
        .map(|node| {
            let subtree = subtree_set(taxonomy, node)?;
            let ra = rollup_over(records, a, &subtree, Some(&shared));
            let rb = rollup_over(records, b, &subtree, Some(&shared));
            let n = ra.map_or(0, |s| s.n);
            let (mean_a, mean_b) = (ra.map(|s| s.mean), rb.map(|s| s.mean));
            Ok(NodeComparison {
                node: node.clone(),
                mean_a,
                mean_b,
                delta: mean_a.zip(mean_b).map(|(x, y)| x - y),
                n,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptGap {
    pub concept_id: ConceptId,
    pub mean_a: f64,
    pub n_a: usize,
    pub mean_b: f64,
    pub n_b: usize,
    /// `mean_b - mean_a`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRanking {
    pub entries: Vec<ConceptGap>,
    /// Number of eligible concepts when it falls short of `k`.
    pub shortfall: Option<usize>,
}

/// Concepts where `model_b` beats `model_a` by the widest margin.
pub fn gap_ranking(
    table: &ScoreTable,
    records: &[CaptionRecord],
    model_a: &str,
    model_b: &str,
    metric: &str,
    k: usize,
    min_support: usize,
) -> Result<GapRanking> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let a = concept_scores(table, records, model_a, metric)?;
    let b = concept_scores(table, records, model_b, metric)?;
    let mut entries: Vec<ConceptGap> = a
        .iter()
        .filter_map(|(c, sa)| {
            let sb = b.get(c)?;
            (sa.n >= min_support && sb.n >= min_support).then(|| ConceptGap {
                concept_id: c.clone(),
                mean_a: sa.mean,
                n_a: sa.n,
                mean_b: sb.mean,
                n_b: sb.n,
                gap: sb.mean - sa.mean,
            })
        })
        .collect();
    entries.sort_by(|x, y| y.gap.total_cmp(&x.gap).then_with(|| x.concept_id.cmp(&y.concept_id)));
    let shortfall = (entries.len() < k).then_some(entries.len());
    entries.truncate(k);
    Ok(GapRanking { entries, shortfall })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub bucket: usize,
    /// Nominal percentile span of the bin.
    pub percentile_lo: f64,
    pub percentile_hi: f64,
    /// Property values of the first and last member.
    pub value_lo: Option<f64>,
    pub value_hi: Option<f64>,
    pub mean: Option<f64>,
    pub n: usize,
}

impl Bucket {
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Splits the captions scored by `(model, metric)` into `n_buckets`
/// contiguous bins by `property`.
///
/// Captions are sorted by property then caption id. With `N` captions and
/// width `w = max(1, N / n_buckets)`, a caption whose value first occurs at
/// rank `r` goes to bin `min(n_buckets - 1, (r - 1) / w)`, so equal values
/// share a bin and the last bin absorbs the remainder.
pub fn percentile_buckets(
    records: &[CaptionRecord],
    table: &ScoreTable,
    model: &str,
    metric: &str,
    property: &str,
    n_buckets: usize,
) -> Result<Vec<Bucket>> {
    if n_buckets == 0 {
        return Err(Error::InvalidArgument("n_buckets must be at least 1".into()));
    }
    let scores = table.require(model, metric)?;
    let mut rows: Vec<(f64, &str, f64)> = records
        .iter()
        .filter_map(|r| scores.get(&r.caption_id).map(|&s| (r, s)))
        .map(|(r, s)| {
            let p = r
                .properties
                .get(property)
                .copied()
                .ok_or_else(|| Error::MissingProperty {
                    property: property.into(),
                    caption_id: r.caption_id.clone(),
                })?;
            Ok((p, r.caption_id.as_str(), s))
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.cmp(y.1)));

    let total = rows.len();
    let width = (total / n_buckets).max(1);
    let mut members: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n_buckets];
    let mut first_rank = 1;
    for (i, &(p, _, s)) in rows.iter().enumerate() {
        if i == 0 || p != rows[i - 1].0 {
            first_rank = i + 1;
        }
        let bin = ((first_rank - 1) / width).min(n_buckets - 1);
        members[bin].push((p, s));
    }
    Ok(members
        .into_iter()
        .enumerate()
        .map(|(b, m)| {
            let stat = mean_of(m.iter().map(|&(_, s)| s));
            Bucket {
                bucket: b,
                percentile_lo: 100.0 * b as f64 / n_buckets as f64,
                percentile_hi: 100.0 * (b + 1) as f64 / n_buckets as f64,
                value_lo: m.first().map(|x| x.0),
                value_hi: m.last().map(|x| x.0),
                mean: stat.map(|s| s.mean),
                n: m.len(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub candidate_id: String,
    pub score: f64,
}

/// Highest-scoring candidate per group; ties go to the lowest candidate id.
pub fn select_best_per_group(groups: &BTreeMap<String, Vec<Candidate>>) -> Result<BTreeMap<String, Candidate>> {
    groups
        .iter()
        .map(|(caption, cands)| {
            let best = cands
                .iter()
                .min_by(|x, y| {
                    y.score
                        .total_cmp(&x.score)
                        .then_with(|| x.candidate_id.cmp(&y.candidate_id))
                })
                .ok_or_else(|| Error::InvalidArgument(format!("group {caption} has no candidates")))?;
            Ok((caption.clone(), best.clone()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCaption {
    pub caption_id: String,
    pub score: f64,
}

/// The best `floor(fraction * N)` captions (at least one), score descending,
/// ties by caption id.
pub fn select_top_fraction(items: &[ScoredCaption], fraction: f64) -> Result<Vec<ScoredCaption>> {
    if items.is_empty() {
        return Err(Error::InvalidArgument("nothing to select from".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("fraction {fraction} outside (0, 1]")));
    }
    let size = ((fraction * items.len() as f64).floor() as usize).max(1);
    let mut sorted = items.to_vec();
    sorted.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then_with(|| x.caption_id.cmp(&y.caption_id))
    });
    sorted.truncate(size);
    Ok(sorted)
}

/// Reads `caption_id,candidate_id,score` rows into groups.
pub fn parse_candidates(reader: impl Read, origin: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<Candidate>>> {
    let origin = origin.as_ref();
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut groups: BTreeMap<String, Vec<Candidate>> = BTreeMap::new();
    for (i, row) in csv.records().enumerate() {
        let line = i + 1;
        let row = row.map_err(|e| Error::parse(origin, line, e.to_string()))?;
        if row.len() != 3 {
            return Err(Error::parse(
                origin,
                line,
                format!("expected 3 fields, found {}", row.len()),
            ));
        }
        if line == 1 && &row[0] == "caption_id" {
            continue;
        }
        let score =
            parse_finite(&row[2]).ok_or_else(|| Error::parse(origin, line, format!("invalid score `{}`", &row[2])))?;
        groups.entry(row[0].into()).or_default().push(Candidate {
            candidate_id: row[1].into(),
            score,
        });
    }
    Ok(groups)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

pub fn concept_scores_csv(scores: &BTreeMap<ConceptId, ConceptStat>) -> String {
    csv_string(
        &["concept_id", "mean", "n"],
        scores
            .iter()
            .map(|(c, s)| vec![c.to_string(), s.mean.to_string(), s.n.to_string()]),
    )
}

pub fn rollup_csv(rows: &[(ConceptId, Option<ConceptStat>)]) -> String {
    csv_string(
        &["node", "mean", "n"],
        rows.iter()
            .map(|(c, s)| vec![c.to_string(), opt(s.map(|s| s.mean)), s.map_or(0, |s| s.n).to_string()]),
    )
}

pub fn comparison_csv(rows: &[NodeComparison]) -> String {
    csv_string(
        &["node", "mean_a", "mean_b", "delta", "n", "coverage"],
        rows.iter().map(|r| {
            vec![
                r.node.to_string(),
                opt(r.mean_a),
                opt(r.mean_b),
                opt(r.delta),
                r.n.to_string(),
                if r.covered() { "ok" } else { "no coverage" }.to_string(),
            ]
        }),
    )
}

pub fn gaps_csv(ranking: &GapRanking) -> String {
    csv_string(
        &["rank", "concept_id", "mean_a", "n_a", "mean_b", "n_b", "gap"],
        ranking.entries.iter().enumerate().map(|(i, g)| {
            vec![
                (i + 1).to_string(),
                g.concept_id.to_string(),
                g.mean_a.to_string(),
                g.n_a.to_string(),
                g.mean_b.to_string(),
                g.n_b.to_string(),
                g.gap.to_string(),
            ]
        }),
    )
}

pub fn buckets_csv(buckets: &[Bucket]) -> String {
    csv_string(
        &[
            "bucket",
            "percentile_lo",
            "percentile_hi",
            "value_lo",
            "value_hi",
            "mean",
            "n",
        ],
        buckets.iter().map(|b| {
            vec![
                (b.bucket + 1).to_string(),
                b.percentile_lo.to_string(),
                b.percentile_hi.to_string(),
                opt(b.value_lo),
                opt(b.value_hi),
                opt(b.mean),
                b.n.to_string(),
            ]
        }),
    )
}

pub fn best_csv(best: &BTreeMap<String, Candidate>) -> String {
    csv_string(
        &["caption_id", "candidate_id", "score"],
        best.iter()
            .map(|(c, b)| vec![c.clone(), b.candidate_id.clone(), b.score.to_string()]),
    )
}

pub fn top_csv(selected: &[ScoredCaption]) -> String {
    csv_string(
        &["caption_id", "score"],
        selected.iter().map(|s| vec![s.caption_id.clone(), s.score.to_string()]),
    )
}

/// Captions scored by `(model, metric)`, optionally restricted to `records`.
pub fn scored_captions(
    table: &ScoreTable,
    model: &str,
    metric: &str,
    records: Option<&[CaptionRecord]>,
) -> Result<Vec<ScoredCaption>> {
    let scores = table.require(model, metric)?;
    Ok(match records {
        Some(rs) => rs
            .iter()
            .filter_map(|r| {
                scores.get(&r.caption_id).map(|&score| ScoredCaption {
                    caption_id: r.caption_id.clone(),
                    score,
                })
            })
            .collect(),
        None => scores
            .iter()
            .map(|(c, &score)| ScoredCaption {
                caption_id: c.clone(),
                score,
            })
            .collect(),
    })
}
