//! In-memory structure store and its one-file-per-complexity persistence.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{enumerate_with_ceiling, EnumerationLimits, StructureTemplate, DEFAULT_CEILING};
use crate::error::{Error, Result};
use crate::io::write_atomic;

const FORMAT: &str = "sgf-structures/1";

/// First line of a persisted store file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub format: String,
    pub complexity: usize,
    pub limits: EnumerationLimits,
    pub ceiling: usize,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StructureStore {
    by_complexity: BTreeMap<usize, Vec<StructureTemplate>>,
    provenance: BTreeMap<usize, StoreHeader>,
}

/// Exact-match filters for [`query_structures`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructureQuery {
    pub n_objects: Option<usize>,
    pub min_edges: Option<usize>,
    pub max_edges: Option<usize>,
}

impl StructureQuery {
    pub fn matches(&self, t: &StructureTemplate) -> bool {
        self.n_objects.is_none_or(|n| t.n_objects == n)
            && self.min_edges.is_none_or(|m| t.edges.len() >= m)
            && self.max_edges.is_none_or(|m| t.edges.len() <= m)
    }
}

/// Adds one complexity level to the store. All templates must share a
/// complexity and have distinct keys; they are kept in key order.
pub fn store_structures(
    mut store: StructureStore,
    mut templates: Vec<StructureTemplate>,
    limits: EnumerationLimits,
) -> Result<StructureStore> {
    let Some(first) = templates.first() else {
        return Err(Error::InvalidArgument("no templates to store".into()));
    };
    let complexity = first.complexity;
    if let Some(t) = templates.iter().find(|t| t.complexity != complexity) {
        return Err(Error::InvalidTemplate(format!(
            "mixed complexities {complexity} and {} in one store level",
            t.complexity
        )));
    }
    templates.sort_by(|a, b| a.canonical_key.cmp(&b.canonical_key));
    if let Some(w) = templates.windows(2).find(|w| w[0].canonical_key == w[1].canonical_key) {
        return Err(Error::InvalidTemplate(format!(
            "duplicate canonical key {} at complexity {complexity}",
            w[0].canonical_key
        )));
    }
    store.provenance.insert(
        complexity,
        StoreHeader {
            format: FORMAT.into(),
            complexity,
            limits,
            ceiling: DEFAULT_CEILING,
            count: templates.len(),
        },
    );
    store.by_complexity.insert(complexity, templates);
    Ok(store)
}

/// Templates of `complexity` passing `query`, in canonical-key order.
pub fn query_structures<'s>(
    store: &'s StructureStore,
    complexity: usize,
    query: &StructureQuery,
) -> Result<Vec<&'s StructureTemplate>> {
    let level = store
        .by_complexity
        .get(&complexity)
        .ok_or(Error::NotEnumerated(complexity))?;
    Ok(level.iter().filter(|t| query.matches(t)).collect())
}

impl StructureStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Enumerates every complexity in `range` with default limits.
    pub fn enumerate(range: std::ops::RangeInclusive<usize>) -> Result<Self> {
        let mut store = StructureStore::new();
        for c in range {
            store.ensure(c, EnumerationLimits::default())?;
        }
        Ok(store)
    }

    /// Enumerates `complexity` unless it is already present.
    pub fn ensure(&mut self, complexity: usize, limits: EnumerationLimits) -> Result<()> {
        if self.by_complexity.contains_key(&complexity) {
            return Ok(());
        }
        let templates = enumerate_with_ceiling(complexity, limits, DEFAULT_CEILING)?;
        *self = store_structures(std::mem::take(self), templates, limits)?;
        Ok(())
    }

    pub fn complexities(&self) -> impl Iterator<Item = usize> + '_ {
        self.by_complexity.keys().copied()
    }

    pub fn contains(&self, complexity: usize) -> bool {
        self.by_complexity.contains_key(&complexity)
    }

    pub fn level(&self, complexity: usize) -> Option<&[StructureTemplate]> {
        self.by_complexity.get(&complexity).map(Vec::as_slice)
    }

    pub fn provenance(&self, complexity: usize) -> Option<&StoreHeader> {
        self.provenance.get(&complexity)
    }

    pub fn file_name(complexity: usize) -> String {
        format!("structures-c{complexity:02}.jsonl")
    }

    /// Serializes one complexity level: header line then one template per line.
    pub fn level_to_jsonl(&self, complexity: usize) -> Result<Vec<u8>> {
        let level = self.level(complexity).ok_or(Error::NotEnumerated(complexity))?;
        let header = self.provenance(complexity).ok_or(Error::NotEnumerated(complexity))?;
        let mut buf = Vec::with_capacity(level.len() * 96);
        serde_json::to_writer(&mut buf, header).map_err(|e| Error::Invariant(e.to_string()))?;
        buf.push(b'\n');
        for t in level {
            serde_json::to_writer(&mut buf, t).map_err(|e| Error::Invariant(e.to_string()))?;
            buf.push(b'\n');
        }
        Ok(buf)
    }

    /// Writes one file per stored complexity into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for c in self.complexities() {
            let path = dir.join(Self::file_name(c));
            write_atomic(&path, &self.level_to_jsonl(c)?)?;
            written.push(path);
        }
        Ok(written)
    }

    /// Loads a level file, checking header count, ordering and key uniqueness.
    pub fn read_level(&mut self, path: impl AsRef<Path>) -> Result<usize> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing header"))?
            .map_err(|e| Error::io(path, e))?;
        let header: StoreHeader =
            serde_json::from_str(&header_line).map_err(|e| Error::parse(path, 1, e.to_string()))?;
        if header.format != FORMAT {
            return Err(Error::parse(path, 1, format!("unsupported format `{}`", header.format)));
        }
        let mut templates = Vec::with_capacity(header.count);
        let mut keys = HashSet::with_capacity(header.count);
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            let t: StructureTemplate =
                serde_json::from_str(&line).map_err(|e| Error::parse(path, line_no, e.to_string()))?;
            if t.complexity != header.complexity {
                return Err(Error::parse(path, line_no, "complexity differs from header"));
            }
            if !keys.insert(t.canonical_key.clone()) {
                return Err(Error::parse(path, line_no, "duplicate canonical key"));
            }
            templates.push(t);
        }
        if templates.len() != header.count {
            return Err(Error::parse(
                path,
                templates.len() + 1,
                format!(
                    "header declares {} templates, file has {}",
                    header.count,
                    templates.len()
                ),
            ));
        }
        if templates.windows(2).any(|w| w[0].canonical_key >= w[1].canonical_key) {
            return Err(Error::parse(path, 1, "templates are not sorted by canonical key"));
        }
        let c = header.complexity;
        self.provenance.insert(c, header);
        self.by_complexity.insert(c, templates);
        Ok(c)
    }

    /// Loads `complexity` from `dir` if its file exists, otherwise enumerates
    /// it and writes the file.
    pub fn load_or_enumerate(&mut self, dir: impl AsRef<Path>, complexity: usize) -> Result<()> {
        if self.contains(complexity) {
            return Ok(());
        }
        let dir = dir.as_ref();
        let path = dir.join(Self::file_name(complexity));
        if path.exists() {
            let mut cached = StructureStore::new();
            let c = cached.read_level(&path)?;
            if c != complexity {
                return Err(Error::parse(
                    &path,
                    1,
                    format!("header complexity {c}, expected {complexity}"),
                ));
            }
            // a level cut down by limits is no substitute for the full one
            if cached
                .provenance(c)
                .is_some_and(|h| h.limits == EnumerationLimits::default())
            {
                self.provenance.extend(cached.provenance);
                self.by_complexity.extend(cached.by_complexity);
                return Ok(());
            }
            return self.ensure(complexity, EnumerationLimits::default());
        }
        self.ensure(complexity, EnumerationLimits::default())?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&path, &self.level_to_jsonl(complexity)?)
    }
}
