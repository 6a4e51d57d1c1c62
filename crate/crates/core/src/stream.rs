//! Schemas, instances, data blocks and the block-assembling stream source.
//!
//! A [`StreamSource`] hands out instances in arrival order. The sliding
//! window reads `winsize` of them at a time and wraps them in a
//! [`DataBlock`]; the last block of a finite stream may be shorter.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("file contains no data rows")]
    Empty,
    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),
    #[error("instance {position} does not match schema: {message}")]
    Mismatch { position: u64, message: String },
    #[error("block is empty")]
    EmptyBlock,
    #[error("winsize must be at least 1")]
    ZeroWinsize,
    #[error("invalid schema file: {0}")]
    SchemaFile(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Numeric,
    /// Values are referenced by their position in this list.
    Categorical(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Numeric,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        values: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Categorical(values.into_iter().map(Into::into).collect()),
        }
    }
}

/// Attribute layout and closed label domain of a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct Schema {
    attributes: Vec<Attribute>,
    labels: Vec<String>,
}

#[derive(Deserialize)]
struct RawSchema {
    attributes: Vec<Attribute>,
    labels: Vec<String>,
}

impl TryFrom<RawSchema> for Schema {
    type Error = StreamError;

    fn try_from(raw: RawSchema) -> Result<Self, Self::Error> {
        Schema::new(raw.attributes, raw.labels)
    }
}

fn first_duplicate<'a>(items: impl IntoIterator<Item = &'a String>) -> Option<&'a String> {
    let mut seen = std::collections::HashSet::new();
    items.into_iter().find(|item| !seen.insert(item.as_str()))
}

impl Schema {
    pub fn new<S: Into<String>>(
        attributes: Vec<Attribute>,
        labels: impl IntoIterator<Item = S>,
    ) -> Result<Self, StreamError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(StreamError::Schema("label list is empty".into()));
        }
        if let Some(dup) = first_duplicate(&labels) {
            return Err(StreamError::Schema(format!("duplicate label `{dup}`")));
        }
        if let Some(dup) = first_duplicate(attributes.iter().map(|a| &a.name)) {
            return Err(StreamError::Schema(format!("duplicate attribute `{dup}`")));
        }
        for attr in &attributes {
            if let AttributeKind::Categorical(values) = &attr.kind {
                if values.is_empty() {
                    return Err(StreamError::Schema(format!(
                        "categorical attribute `{}` has no values",
                        attr.name
                    )));
                }
                if let Some(dup) = first_duplicate(values) {
                    return Err(StreamError::Schema(format!(
                        "attribute `{}` repeats value `{dup}`",
                        attr.name
                    )));
                }
            }
        }
        Ok(Self { attributes, labels })
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, StreamError> {
        let file = File::open(path)?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    pub fn attribute_count(&self) -> usize {
        self.attributes.len()
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    /// Checks arity, categorical ranges and the label index of `instance`.
    pub fn check(&self, instance: &Instance) -> Result<(), String> {
        if instance.features.len() != self.attributes.len() {
            return Err(format!(
                "expected {} features, found {}",
                self.attributes.len(),
                instance.features.len()
            ));
        }
        if instance.label >= self.labels.len() {
            return Err(format!("label index {} out of range", instance.label));
        }
        for (attr, &value) in self.attributes.iter().zip(&instance.features) {
            match &attr.kind {
                AttributeKind::Numeric if !value.is_finite() => {
                    return Err(format!("attribute `{}` is not finite", attr.name));
                }
                AttributeKind::Categorical(values)
                    if value < 0.0 || value.fract() != 0.0 || value as usize >= values.len() =>
                {
                    return Err(format!(
                        "attribute `{}` has invalid category index {value}",
                        attr.name
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// One labeled example. Categorical features hold the value index.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub features: Vec<f64>,
    pub label: usize,
}

impl Instance {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self { features, label }
    }
}

/// A time-ordered batch of instances read from the sliding window.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBlock {
    pub instances: Vec<Instance>,
    pub block_index: usize,
}

impl DataBlock {
    pub fn new(block_index: usize, instances: Vec<Instance>) -> Self {
        Self {
            instances,
            block_index,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.instances.iter().map(|i| i.label)
    }
}

/// Counts occurrences of each label over the full domain `0..label_count`.
pub(crate) fn label_counts(
    labels: impl IntoIterator<Item = usize>,
    label_count: usize,
) -> Result<Vec<usize>, usize> {
    let mut counts = vec![0usize; label_count];
    for label in labels {
        *counts.get_mut(label).ok_or(label)? += 1;
    }
    Ok(counts)
}

/// Empirical label distribution of a block, over the whole label domain.
pub fn label_histogram(block: &DataBlock, label_count: usize) -> Result<Vec<f64>, StreamError> {
    if block.is_empty() {
        return Err(StreamError::EmptyBlock);
    }
    let counts = label_counts(block.labels(), label_count).map_err(|label| {
        StreamError::Schema(format!(
            "label {label} outside domain of size {label_count}"
        ))
    })?;
    let n = block.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Origin {
    Csv(PathBuf),
    Generator(String),
    Memory,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Csv(path) => write!(f, "csv:{}", path.display()),
            Origin::Generator(name) => write!(f, "generator:{name}"),
            Origin::Memory => f.write_str("memory"),
        }
    }
}

type InstanceIter = Box<dyn Iterator<Item = Result<Instance, StreamError>> + Send>;

/// Single-consumer source of instances with a fixed schema.
pub struct StreamSource {
    origin: Origin,
    schema: Arc<Schema>,
    inner: InstanceIter,
    cursor: u64,
    blocks_emitted: usize,
}

impl fmt::Debug for StreamSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StreamSource")
            .field("origin", &self.origin)
            .field("cursor", &self.cursor)
            .field("blocks_emitted", &self.blocks_emitted)
            .finish_non_exhaustive()
    }
}

impl StreamSource {
    pub fn from_iter<I>(schema: Arc<Schema>, origin: Origin, iter: I) -> Self
    where
        I: Iterator<Item = Instance> + Send + 'static,
    {
        Self::from_fallible(schema, origin, iter.map(Ok))
    }

    pub fn from_fallible<I>(schema: Arc<Schema>, origin: Origin, iter: I) -> Self
    where
        I: Iterator<Item = Result<Instance, StreamError>> + Send + 'static,
    {
        Self {
            origin,
            schema,
            inner: Box::new(iter),
            cursor: 0,
            blocks_emitted: 0,
        }
    }

    pub fn from_instances(schema: Schema, instances: Vec<Instance>) -> Self {
        Self::from_iter(Arc::new(schema), Origin::Memory, instances.into_iter())
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    /// Number of instances handed out so far.
    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    pub fn next_instance(&mut self) -> Result<Option<Instance>, StreamError> {
        match self.inner.next() {
            None => Ok(None),
            Some(Err(e)) => Err(e),
            Some(Ok(instance)) => {
                self.schema
                    .check(&instance)
                    .map_err(|message| StreamError::Mismatch {
                        position: self.cursor,
                        message,
                    })?;
                self.cursor += 1;
                Ok(Some(instance))
            }
        }
    }

    /// Reads the next `winsize` instances. A short tail is returned as a
    /// final partial block; `None` marks the end of the stream.
    pub fn next_block(&mut self, winsize: usize) -> Result<Option<DataBlock>, StreamError> {
        if winsize == 0 {
            return Err(StreamError::ZeroWinsize);
        }
        let mut instances = Vec::with_capacity(winsize);
        while instances.len() < winsize {
            match self.next_instance()? {
                Some(instance) => instances.push(instance),
                None => break,
            }
        }
        if instances.is_empty() {
            return Ok(None);
        }
        let block = DataBlock::new(self.blocks_emitted, instances);
        self.blocks_emitted += 1;
        Ok(Some(block))
    }

    /// Wraps the source, rewriting each instance. The closure receives the
    /// zero-based stream position of the instance.
    pub fn map_instances<F>(self, mut f: F) -> Self
    where
        F: FnMut(u64, Instance) -> Instance + Send + 'static,
    {
        let mut position = 0u64;
        let inner = self.inner.map(move |item| {
            item.map(|instance| {
                let out = f(position, instance);
                position += 1;
                out
            })
        });
        Self {
            origin: self.origin,
            schema: self.schema,
            inner: Box::new(inner),
            cursor: self.cursor,
            blocks_emitted: self.blocks_emitted,
        }
    }

    pub fn collect_instances(mut self) -> Result<Vec<Instance>, StreamError> {
        let mut out = Vec::new();
        while let Some(instance) = self.next_instance()? {
            out.push(instance);
        }
        Ok(out)
    }

    /// Drains the source into `writer` as CSV with a header row and the
    /// label in the last column named `class`.
    pub fn write_csv<W: Write>(mut self, writer: W) -> Result<u64, StreamError> {
        let mut out = csv::Writer::from_writer(writer);
        let schema = Arc::clone(&self.schema);
        let mut header: Vec<&str> = schema.attributes.iter().map(|a| a.name.as_str()).collect();
        header.push("class");
        out.write_record(&header)?;
        let mut written = 0;
        let mut record = Vec::with_capacity(header.len());
        while let Some(instance) = self.next_instance()? {
            record.clear();
            for (attr, &value) in schema.attributes.iter().zip(&instance.features) {
                record.push(match &attr.kind {
                    AttributeKind::Numeric => value.to_string(),
                    AttributeKind::Categorical(values) => values[value as usize].clone(),
                });
            }
            record.push(schema.labels[instance.label].clone());
            out.write_record(&record)?;
            written += 1;
        }
        out.flush()?;
        Ok(written)
    }
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Named(String),
}

struct RawTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    label_idx: usize,
}

fn read_table(path: &Path, label_column: &LabelColumn) -> Result<RawTable, StreamError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(StreamError::Empty);
    }
    if header.len() < 2 {
        return Err(StreamError::Schema(
            "need at least one attribute column and a label column".into(),
        ));
    }
    let label_idx = match label_column {
        LabelColumn::Last => header.len() - 1,
        LabelColumn::Named(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| StreamError::MissingLabelColumn(name.clone()))?,
    };
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| StreamError::Row {
            row,
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(StreamError::Row {
                row,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        rows.push(record.iter().map(str::to_owned).collect());
    }
    if rows.is_empty() {
        return Err(StreamError::Empty);
    }
    Ok(RawTable {
        header,
        rows,
        label_idx,
    })
}

fn infer_schema(table: &RawTable) -> Result<Schema, StreamError> {
    let mut attributes = Vec::with_capacity(table.header.len() - 1);
    for (col, name) in table.header.iter().enumerate() {
        if col == table.label_idx {
            continue;
        }
        let numeric = table.rows.iter().all(|r| r[col].parse::<f64>().is_ok());
        if numeric {
            attributes.push(Attribute::numeric(name.clone()));
        } else {
            attributes.push(Attribute::categorical(
                name.clone(),
                distinct_in_order(table.rows.iter().map(|r| r[col].as_str())),
            ));
        }
    }
    let labels = distinct_in_order(table.rows.iter().map(|r| r[table.label_idx].as_str()));
    Schema::new(attributes, labels)
}

fn distinct_in_order<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    values
        .filter(|v| seen.insert(*v))
        .map(str::to_owned)
        .collect()
}

fn decode_rows(table: RawTable, schema: &Schema) -> Result<Vec<Instance>, StreamError> {
    if table.header.len() - 1 != schema.attribute_count() {
        return Err(StreamError::Schema(format!(
            "file has {} attribute columns, schema declares {}",
            table.header.len() - 1,
            schema.attribute_count()
        )));
    }
    let lookups: Vec<Option<HashMap<&str, usize>>> = schema
        .attributes
        .iter()
        .map(|a| match &a.kind {
            AttributeKind::Numeric => None,
            AttributeKind::Categorical(values) => Some(
                values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v.as_str(), i))
                    .collect(),
            ),
        })
        .collect();
    let labels: HashMap<&str, usize> = schema
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();

    let mut instances = Vec::with_capacity(table.rows.len());
    for (i, row) in table.rows.iter().enumerate() {
        let row_no = i + 1;
        let mut features = Vec::with_capacity(schema.attribute_count());
        let cells = row
            .iter()
            .enumerate()
            .filter(|(col, _)| *col != table.label_idx)
            .map(|(_, cell)| cell);
        for ((cell, attr), lookup) in cells.zip(&schema.attributes).zip(&lookups) {
            let value = match lookup {
                None => cell.parse::<f64>().map_err(|_| StreamError::Row {
                    row: row_no,
                    message: format!("`{cell}` is not numeric (attribute `{}`)", attr.name),
                })?,
                Some(map) => *map.get(cell.as_str()).ok_or_else(|| StreamError::Row {
                    row: row_no,
                    message: format!("unknown value `{cell}` for attribute `{}`", attr.name),
                })? as f64,
            };
            features.push(value);
        }
        let label_cell = &row[table.label_idx];
        let label = *labels
            .get(label_cell.as_str())
            .ok_or_else(|| StreamError::Row {
                row: row_no,
                message: format!("label `{label_cell}` is not in the label domain"),
            })?;
        instances.push(Instance::new(features, label));
    }
    Ok(instances)
}

/// Opens a CSV dataset, inferring the schema: a column is numeric when every
/// row parses as a real number, categorical otherwise. Label values form the
/// label domain in order of first appearance.
pub fn open_csv(
    path: impl AsRef<Path>,
    label_column: LabelColumn,
) -> Result<StreamSource, StreamError> {
    let path = path.as_ref();
    let table = read_table(path, &label_column)?;
    let schema = infer_schema(&table)?;
    let instances = decode_rows(table, &schema)?;
    Ok(StreamSource::from_iter(
        Arc::new(schema),
        Origin::Csv(path.to_path_buf()),
        instances.into_iter(),
    ))
}

/// Opens a CSV dataset against an explicit schema instead of inferring one.
pub fn open_csv_with_schema(
    path: impl AsRef<Path>,
    label_column: LabelColumn,
    schema: Schema,
) -> Result<StreamSource, StreamError> {
    let path = path.as_ref();
    let table = read_table(path, &label_column)?;
    let instances = decode_rows(table, &schema)?;
    Ok(StreamSource::from_iter(
        Arc::new(schema),
        Origin::Csv(path.to_path_buf()),
        instances.into_iter(),
    ))
}
