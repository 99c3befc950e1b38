//! End-to-end caption generation, JSONL persistence, external properties
//! and property filters.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{scope_filter, Catalog, ScopeSpec};
use crate::category::Target;
use crate::enumerator::{query_structures, StructureQuery, StructureStore, StructureTemplate};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::realizer::{realize, RealizationTemplates};
use crate::rng::{SeedInfo, SeededRng};
use crate::sampler::{populate, sample_scene_attributes, SceneAttributeSet, SceneGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub master_seed: u64,
    pub count: usize,
    pub complexity_range: (usize, usize),
    pub scene_attr_range: (usize, usize),
    pub target: Target,
    #[serde(default)]
    pub scope: ScopeSpec,
    #[serde(default)]
    pub structure_constraints: Option<StructureQuery>,
    /// Cycle through the complexity range by index instead of drawing.
    #[serde(default)]
    pub stratified: bool,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

pub const PRESETS: [&str; 2] = ["paper-image", "paper-3d"];

impl GenerationConfig {
    pub fn preset(name: &str, master_seed: u64) -> Result<Self> {
        let (count, complexity_range, scene_attr_range, target) = match name {
            "paper-image" => (10_000, (3, 12), (0, 5), Target::Image),
            "paper-3d" => (1_000, (1, 3), (0, 2), Target::Threed),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown preset `{other}` (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(GenerationConfig {
            master_seed,
            count,
            complexity_range,
            scene_attr_range,
            target,
            scope: ScopeSpec::default(),
            structure_constraints: None,
            stratified: false,
            output_path: None,
        })
    }

    pub fn from_json(text: &str, origin: impl AsRef<Path>) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            path: origin.as_ref().to_path_buf(),
            source,
        })
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.complexity_range;
        if lo < 1 || lo > hi {
            return Err(Error::InvalidRange {
                lo,
                hi,
                reason: "complexity range needs 1 <= lo <= hi".into(),
            });
        }
        let (lo, hi) = self.scene_attr_range;
        if lo > hi {
            return Err(Error::InvalidRange {
                lo,
                hi,
                reason: "scene-attribute range needs lo <= hi".into(),
            });
        }
        Ok(())
    }

    pub fn complexities(&self) -> std::ops::RangeInclusive<usize> {
        self.complexity_range.0..=self.complexity_range.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementCounts {
    pub objects: usize,
    pub attributes: usize,
    pub relations: usize,
}

impl ElementCounts {
    pub fn of(graph: &SceneGraph) -> Self {
        ElementCounts {
            objects: graph.objects.len(),
            attributes: graph.attribute_count(),
            relations: graph.relations.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptionRecord {
    pub caption_id: String,
    pub index: usize,
    pub text: String,
    pub scene_graph: SceneGraph,
    pub scene_attributes: SceneAttributeSet,
    pub complexity: usize,
    pub element_counts: ElementCounts,
    pub seed: SeedInfo,
    #[serde(default)]
    pub properties: BTreeMap<String, f64>,
}

impl CaptionRecord {
    /// Checks the embedded counts and that `templates` reproduce the text.
    pub fn verify(&self, templates: &RealizationTemplates) -> Result<()> {
        self.scene_graph.validate()?;
        if self.complexity != self.scene_graph.complexity()
            || self.element_counts != ElementCounts::of(&self.scene_graph)
        {
            return Err(Error::InvalidGraph(format!(
                "record {} counts disagree with its scene graph",
                self.caption_id
            )));
        }
        let text = realize(&self.scene_graph, &self.scene_attributes, templates)?;
        if text != self.text {
            return Err(Error::InvalidGraph(format!(
                "record {} text does not match its realization",
                self.caption_id
            )));
        }
        Ok(())
    }
}

/// Lowercase hex of the first 128 bits of SHA-256 over the seed, the index
/// and the compact JSON of graph and scene attributes.
pub fn caption_id(master_seed: u64, index: usize, graph: &SceneGraph, attrs: &SceneAttributeSet) -> String {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update((index as u64).to_le_bytes());
    h.update(serde_json::to_vec(&(graph, attrs)).expect("scene graphs serialize"));
    hex::encode(&h.finalize()[..16])
}

/// Enumerates (or loads from `dir`) every complexity the config needs.
pub fn prepare_store(config: &GenerationConfig, dir: Option<&Path>) -> Result<StructureStore> {
    config.validate()?;
    let mut store = StructureStore::new();
    for c in config.complexities() {
        match dir {
            Some(d) => store.load_or_enumerate(d, c)?,
            None => store.ensure(c, Default::default())?,
        }
    }
    Ok(store)
}

/// Generates `config.count` records in index order.
///
/// Record `i` uses stream `i` of `config.master_seed` alone, so the output
/// does not depend on `workers`.
pub fn generate_dataset(
    config: &GenerationConfig,
    store: &StructureStore,
    catalog: &Catalog,
    templates: &RealizationTemplates,
    workers: usize,
) -> Result<Vec<CaptionRecord>> {
    config.validate()?;
    let view = scope_filter(catalog, &config.scope)?;
    let query = config.structure_constraints.unwrap_or_default();
    let mut pools: HashMap<usize, Vec<&StructureTemplate>> = HashMap::new();
    for c in config.complexities() {
        let found = query_structures(store, c, &query)?;
        if found.is_empty() {
            return Err(Error::NoStructures(c));
        }
        pools.insert(c, found);
    }

    let one = |index: usize| -> Result<CaptionRecord> {
        let mut rng = SeededRng::new(config.master_seed, index as u64);
        let (lo, hi) = config.complexity_range;
        let complexity = if config.stratified {
            lo + index % (hi - lo + 1)
        } else {
            rng.range_inclusive(lo, hi)
        };
        let pool = &pools[&complexity];
        let template = pool[rng.index(pool.len())];
        let graph = populate(template, &view, &mut rng)?;
        let attrs = sample_scene_attributes(&view, config.scene_attr_range, config.target, &mut rng)?;
        let text = realize(&graph, &attrs, templates)?;
        Ok(CaptionRecord {
            caption_id: caption_id(config.master_seed, index, &graph, &attrs),
            index,
            text,
            complexity: graph.complexity(),
            element_counts: ElementCounts::of(&graph),
            seed: rng.seed_info(),
            scene_graph: graph,
            scene_attributes: attrs,
            properties: BTreeMap::new(),
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Invariant(format!("worker pool: {e}")))?;
    let results: Vec<Result<CaptionRecord>> = pool.install(|| (0..config.count).into_par_iter().map(one).collect());
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| e.at_index(i)))
        .collect()
}

pub fn to_jsonl(records: &[CaptionRecord]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(records.len() * 512);
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("records serialize");
        buf.push(b'\n');
    }
    buf
}

/// Writes one record per line, atomically.
pub fn emit_jsonl(records: &[CaptionRecord], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &to_jsonl(records))
}

pub fn parse_jsonl(text: &str, origin: impl AsRef<Path>) -> Result<Vec<CaptionRecord>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| serde_json::from_str(line).map_err(|e| Error::parse(origin.as_ref(), i + 1, e.to_string())))
        .collect()
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<CaptionRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(&text, path)
}

/// Outcome of [`attach_properties`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttachReport {
    pub applied: usize,
    /// `(line, caption_id)` of rows naming no record.
    pub unknown: Vec<(usize, String)>,
}

/// Reads `caption_id,property,value` rows (header optional) into a list of
/// `(line, caption_id, property, value)`.
pub fn read_property_rows(reader: impl Read, origin: impl AsRef<Path>) -> Result<Vec<(usize, String, String, f64)>> {
    let origin = origin.as_ref();
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
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
        let value =
            parse_finite(&row[2]).ok_or_else(|| Error::parse(origin, line, format!("invalid value `{}`", &row[2])))?;
        rows.push((line, row[0].to_string(), row[1].to_string(), value));
    }
    Ok(rows)
}

pub(crate) fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Merges property rows into `records`. Later rows overwrite earlier ones.
pub fn attach_property_rows(records: &mut [CaptionRecord], rows: &[(usize, String, String, f64)]) -> AttachReport {
    let by_id: HashMap<String, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.caption_id.clone(), i))
        .collect();
    let mut report = AttachReport::default();
    for (line, id, property, value) in rows {
        match by_id.get(id) {
            Some(&i) => {
                records[i].properties.insert(property.clone(), *value);
                report.applied += 1;
            }
            None => report.unknown.push((*line, id.clone())),
        }
    }
    report
}

pub fn attach_properties(records: &mut [CaptionRecord], scores_path: impl AsRef<Path>) -> Result<AttachReport> {
    let path = scores_path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let rows = read_property_rows(file, path)?;
    Ok(attach_property_rows(records, &rows))
}

/// Bounds for [`filter_records`]; all present conditions must hold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Inclusive nearest-rank percentiles `[p_lo, p_hi]`, each in `0..=100`.
    pub percentile_range: Option<(f64, f64)>,
}

impl Predicate {
    pub fn is_empty(&self) -> bool {
        self.min.is_none() && self.max.is_none() && self.percentile_range.is_none()
    }
}

/// Rank of the nearest-rank `p`-th percentile among `n` values (1-based).
pub fn nearest_rank(p: f64, n: usize) -> usize {
    let r = (p * n as f64 / 100.0).ceil() as usize;
    r.clamp(1, n.max(1))
}

/// Keeps records whose `property` satisfies `predicate`, in input order.
/// Records lacking the property fail any bound; with no bounds every record
/// is kept.
pub fn filter_records(records: &[CaptionRecord], property: &str, predicate: &Predicate) -> Result<Vec<CaptionRecord>> {
    if predicate.is_empty() {
        return Ok(records.to_vec());
    }
    let mut lo = predicate.min.unwrap_or(f64::NEG_INFINITY);
    let mut hi = predicate.max.unwrap_or(f64::INFINITY);
    if let Some((p_lo, p_hi)) = predicate.percentile_range {
        if !(0.0..=100.0).contains(&p_lo) || !(0.0..=100.0).contains(&p_hi) || p_lo > p_hi {
            return Err(Error::InvalidArgument(format!(
                "percentile range [{p_lo}, {p_hi}] must satisfy 0 <= lo <= hi <= 100"
            )));
        }
        let mut values = records
            .iter()
            .map(|r| {
                r.properties
                    .get(property)
                    .copied()
                    .ok_or_else(|| Error::MissingProperty {
                        property: property.into(),
                        caption_id: r.caption_id.clone(),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Ok(Vec::new());
        }
        values.sort_by(f64::total_cmp);
        let n = values.len();
        lo = lo.max(values[nearest_rank(p_lo, n) - 1]);
        hi = hi.min(values[nearest_rank(p_hi, n) - 1]);
    }
    Ok(records
        .iter()
        .filter(|r| r.properties.get(property).is_some_and(|&v| v >= lo && v <= hi))
        .cloned()
        .collect())
}
