//! CSV ingestion of session edges and object catalogs, and CSV export of
//! recommendation vectors and edge dumps.
//!
//! Edge files carry one `kernel, object` pair per row under a header; the
//! column names are configured per file so visit logs and order items can
//! share one loader. Bad rows are rejected and reported rather than
//! aborting the load, unless strict mode is on.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Serialize;

use crate::engine::RecommendationVector;
use crate::graph::{GraphBuilder, GraphError, KernelClass, NodeId, SessionGraph};

pub const DEFAULT_KERNEL_COLUMN: &str = "kernel_id";
pub const DEFAULT_OBJECT_COLUMN: &str = "object_id";
pub const DEFAULT_NAME_COLUMN: &str = "name";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("{}: missing column `{column}`", path.display())]
    MissingColumn { path: PathBuf, column: String },
    #[error("kernel and object columns must differ (both `{0}`)")]
    SameColumn(String),
    #[error("{}: line {line}: {reason}", path.display())]
    RejectedRow { path: PathBuf, line: u64, reason: String },
    #[error("invalid edge spec `{0}`: expected CLASS:PATH[:KERNEL_COL:OBJECT_COL]")]
    BadSpec(String),
    #[error("invalid date `{0}`, expected YYYY-MM-DD")]
    BadDate(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| match source.kind() {
        io::ErrorKind::NotFound => IngestError::FileNotFound(path.to_path_buf()),
        _ => IngestError::Io {
            path: path.to_path_buf(),
            source,
        },
    })
}

fn create(path: &Path) -> Result<File, IngestError> {
    File::create(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Where one class of edges comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeFileSpec {
    pub path: PathBuf,
    pub class_id: String,
    pub kernel_column: String,
    pub object_column: String,
}

impl EdgeFileSpec {
    pub fn new(class_id: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        EdgeFileSpec {
            path: path.into(),
            class_id: class_id.into(),
            kernel_column: DEFAULT_KERNEL_COLUMN.to_string(),
            object_column: DEFAULT_OBJECT_COLUMN.to_string(),
        }
    }

    pub fn with_columns(mut self, kernel_column: impl Into<String>, object_column: impl Into<String>) -> Self {
        self.kernel_column = kernel_column.into();
        self.object_column = object_column.into();
        self
    }

    /// Parses `CLASS:PATH[:KERNEL_COL:OBJECT_COL]`.
    pub fn parse(s: &str) -> Result<Self, IngestError> {
        let bad = || IngestError::BadSpec(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        let spec = match parts.as_slice() {
            [class, path] => EdgeFileSpec::new(*class, *path),
            [class, path, kcol, ocol] => EdgeFileSpec::new(*class, *path).with_columns(*kcol, *ocol),
            _ => return Err(bad()),
        };
        if spec.class_id.is_empty()
            || spec.path.as_os_str().is_empty()
            || spec.kernel_column.is_empty()
            || spec.object_column.is_empty()
        {
            return Err(bad());
        }
        Ok(spec)
    }
}

/// Inclusive date window applied to a date column before graph
/// construction. Only the leading `YYYY-MM-DD` of a value is read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DateFilter {
    pub column: String,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
}

impl DateFilter {
    fn admits(&self, date: NaiveDate) -> bool {
        self.from.is_none_or(|f| date >= f) && self.to.is_none_or(|t| date <= t)
    }
}

pub fn parse_date(s: &str) -> Result<NaiveDate, IngestError> {
    let head = s.trim().get(..10).unwrap_or(s.trim());
    NaiveDate::parse_from_str(head, "%Y-%m-%d").map_err(|_| IngestError::BadDate(s.to_string()))
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Turn the first rejected row into an error.
    pub strict: bool,
    pub date_filter: Option<DateFilter>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

/// Per-file load summary. `rows_read = edges_added + duplicates + rejected`;
/// rows dropped by the date filter are counted in `filtered` only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub path: PathBuf,
    pub class_id: String,
    pub rows_read: usize,
    pub edges_added: usize,
    pub duplicates: usize,
    pub filtered: usize,
    pub rejected: Vec<RejectedRow>,
}

fn column_index(headers: &csv::StringRecord, column: &str, path: &Path) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| IngestError::MissingColumn {
            path: path.to_path_buf(),
            column: column.to_string(),
        })
}

fn csv_reader(file: File) -> csv::Reader<File> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file)
}

/// Adds one edge per data row of `spec.path` to `g`.
pub fn load_edges(spec: &EdgeFileSpec, g: &mut GraphBuilder, opts: &LoadOptions) -> Result<IngestReport, IngestError> {
    if spec.kernel_column == spec.object_column {
        return Err(IngestError::SameColumn(spec.kernel_column.clone()));
    }
    if !g.has_class(&spec.class_id) {
        return Err(GraphError::UnknownClass(spec.class_id.clone()).into());
    }
    let mut reader = csv_reader(open(&spec.path)?);
    let headers = reader.headers()?.clone();
    let kernel_col = column_index(&headers, &spec.kernel_column, &spec.path)?;
    let object_col = column_index(&headers, &spec.object_column, &spec.path)?;
    let date_col = match &opts.date_filter {
        Some(f) => Some((column_index(&headers, &f.column, &spec.path)?, f)),
        None => None,
    };

    let mut report = IngestReport {
        path: spec.path.clone(),
        class_id: spec.class_id.clone(),
        ..IngestReport::default()
    };
    let mut record = csv::StringRecord::new();
    loop {
        let (line, outcome) = match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => (
                record.position().map_or(0, |p| p.line()),
                row_edge(&record, kernel_col, object_col, date_col, &spec.class_id),
            ),
            Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Err(e.into()),
            Err(e) => (e.position().map_or(0, |p| p.line()), Err(e.to_string())),
        };
        let result = match outcome {
            Ok(None) => {
                report.filtered += 1;
                continue;
            }
            Ok(Some((kernel, object))) => g.add_edge(&kernel, &spec.class_id, &object).map_err(|e| e.to_string()),
            Err(reason) => Err(reason),
        };
        report.rows_read += 1;
        match result {
            Ok(true) => report.edges_added += 1,
            Ok(false) => report.duplicates += 1,
            Err(reason) => {
                if opts.strict {
                    return Err(IngestError::RejectedRow {
                        path: spec.path.clone(),
                        line,
                        reason,
                    });
                }
                report.rejected.push(RejectedRow { line, reason });
            }
        }
    }
    Ok(report)
}

// Ok(None): row outside the date window.
fn row_edge(
    record: &csv::StringRecord,
    kernel_col: usize,
    object_col: usize,
    date_col: Option<(usize, &DateFilter)>,
    class_id: &str,
) -> Result<Option<(NodeId, NodeId)>, String> {
    if let Some((col, filter)) = date_col {
        let raw = record.get(col).unwrap_or_default();
        let date = parse_date(raw).map_err(|e| e.to_string())?;
        if !filter.admits(date) {
            return Ok(None);
        }
    }
    let field = |col: usize, what: &str| match record.get(col) {
        Some(v) if !v.is_empty() => Ok(v),
        Some(_) => Err(format!("empty {what} id")),
        None => Err(format!("missing {what} column ({} fields)", record.len())),
    };
    let kernel = NodeId::kernel(class_id, field(kernel_col, "kernel")?).map_err(|e| e.to_string())?;
    let object = NodeId::object(field(object_col, "object")?).map_err(|e| e.to_string())?;
    Ok(Some((kernel, object)))
}

/// A frozen graph plus the per-file reports that built it.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: SessionGraph,
    pub reports: Vec<IngestReport>,
}

impl LoadedGraph {
    pub fn rejected_rows(&self) -> usize {
        self.reports.iter().map(|r| r.rejected.len()).sum()
    }
}

/// Declares one class per distinct `class_id` (in order of appearance),
/// loads every file in order and freezes.
pub fn build_graph(specs: &[EdgeFileSpec], opts: &LoadOptions) -> Result<LoadedGraph, IngestError> {
    let mut classes: Vec<KernelClass> = Vec::new();
    for spec in specs {
        if !classes.iter().any(|c| c.class_id == spec.class_id) {
            classes.push(KernelClass::new(spec.class_id.clone(), spec.path.display().to_string()));
        }
    }
    let mut builder = GraphBuilder::new(classes)?;
    let reports = specs
        .iter()
        .map(|spec| load_edges(spec, &mut builder, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LoadedGraph {
        graph: builder.freeze(),
        reports,
    })
}

/// Display names for objects. May list ids the graph does not contain.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObjectCatalog {
    names: HashMap<NodeId, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CatalogReport {
    pub rows_read: usize,
    /// Ids seen more than once; the last row won.
    pub duplicate_ids: Vec<String>,
    pub rejected: Vec<RejectedRow>,
}

impl ObjectCatalog {
    pub fn insert(&mut self, object: NodeId, name: impl Into<String>) -> Option<String> {
        self.names.insert(object, name.into())
    }

    pub fn name(&self, object: &NodeId) -> Option<&str> {
        self.names.get(object).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Loads an `object_id,name` catalog.
pub fn load_catalog(path: &Path) -> Result<(ObjectCatalog, CatalogReport), IngestError> {
    load_catalog_with(path, DEFAULT_OBJECT_COLUMN, DEFAULT_NAME_COLUMN)
}

pub fn load_catalog_with(
    path: &Path,
    id_column: &str,
    name_column: &str,
) -> Result<(ObjectCatalog, CatalogReport), IngestError> {
    let mut reader = csv_reader(open(path)?);
    let headers = reader.headers()?.clone();
    let id_col = column_index(&headers, id_column, path)?;
    let name_col = column_index(&headers, name_column, path)?;
    let mut catalog = ObjectCatalog::default();
    let mut report = CatalogReport::default();
    for row in reader.records() {
        report.rows_read += 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                report.rejected.push(RejectedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        let id = match row.get(id_col).map(NodeId::object) {
            Some(Ok(id)) => id,
            _ => {
                report.rejected.push(RejectedRow {
                    line,
                    reason: "missing object id".into(),
                });
                continue;
            }
        };
        let name = row.get(name_col).unwrap_or_default();
        if catalog.insert(id.clone(), name).is_some() {
            report.duplicate_ids.push(id.raw().to_string());
        }
    }
    Ok((catalog, report))
}

/// Writes `rank,object_id,score[,name]` rows (LF line endings).
pub fn write_vector<W: Write>(vec: &RecommendationVector, catalog: Option<&ObjectCatalog>, out: W) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    match catalog {
        Some(_) => w.write_record(["rank", "object_id", "score", "name"])?,
        None => w.write_record(["rank", "object_id", "score"])?,
    }
    for (i, entry) in vec.entries.iter().enumerate() {
        let rank = (i + 1).to_string();
        let score = entry.score.to_string();
        match catalog {
            Some(c) => {
                let name = c.name(&entry.object).unwrap_or_default();
                w.write_record([rank.as_str(), entry.object.raw(), score.as_str(), name])?;
            }
            None => w.write_record([rank.as_str(), entry.object.raw(), score.as_str()])?,
        }
    }
    w.flush().map_err(|source| IngestError::Io {
        path: PathBuf::from("<output>"),
        source,
    })
}

pub fn export_vector(vec: &RecommendationVector, catalog: Option<&ObjectCatalog>, path: &Path) -> Result<(), IngestError> {
    write_vector(vec, catalog, create(path)?)
}

/// One parsed row of a vector CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorRow {
    pub rank: usize,
    pub object_id: String,
    pub score: String,
    pub name: Option<String>,
}

pub fn read_vector(path: &Path) -> Result<Vec<VectorRow>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(open(path)?);
    let headers = reader.headers()?.clone();
    let rank_col = column_index(&headers, "rank", path)?;
    let id_col = column_index(&headers, "object_id", path)?;
    let score_col = column_index(&headers, "score", path)?;
    let name_col = headers.iter().position(|h| h == "name");
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |reason: &str| IngestError::RejectedRow {
            path: path.to_path_buf(),
            line,
            reason: reason.to_string(),
        };
        rows.push(VectorRow {
            rank: record.get(rank_col).and_then(|r| r.parse().ok()).ok_or_else(|| bad("bad rank"))?,
            object_id: record.get(id_col).ok_or_else(|| bad("missing object_id"))?.to_string(),
            score: record.get(score_col).ok_or_else(|| bad("missing score"))?.to_string(),
            name: name_col.and_then(|c| record.get(c)).map(str::to_string),
        });
    }
    Ok(rows)
}

/// Writes the edges of one class as `kernel_id,object_id` rows.
pub fn write_edges<W: Write>(g: &SessionGraph, class_id: &str, out: W) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record([DEFAULT_KERNEL_COLUMN, DEFAULT_OBJECT_COLUMN])?;
    for (kernel, object) in g.edges().filter(|(k, _)| k.namespace() == class_id) {
        w.write_record([kernel.raw(), object.raw()])?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: PathBuf::from("<output>"),
        source,
    })
}

/// Dumps every class into `<dir>/<class_id>.csv` and returns matching specs.
pub fn export_edges(g: &SessionGraph, dir: &Path) -> Result<Vec<EdgeFileSpec>, IngestError> {
    g.classes()
        .iter()
        .map(|class| {
            let path = dir.join(format!("{}.csv", class.class_id));
            write_edges(g, &class.class_id, create(&path)?)?;
            Ok(EdgeFileSpec::new(class.class_id.clone(), path))
        })
        .collect()
}
