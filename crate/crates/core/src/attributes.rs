//! Binary node attributes obtained by one-hot encoding categorical covariates.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::ops::Range;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;

/// Per-node categorical covariates, as read from the attribute file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeTable {
    pub covariates: Vec<String>,
    /// `(node id, one value per covariate)`; an empty string is a missing value.
    pub rows: Vec<(String, Vec<String>)>,
}

/// The one-hot column block produced by one covariate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeGroup {
    pub name: String,
    pub levels: Vec<String>,
    pub start: usize,
}

impl AttributeGroup {
    pub fn columns(&self) -> Range<usize> {
        self.start..self.start + self.levels.len()
    }
}

/// `N × Z` binary matrix `X` plus the covariate each column came from.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeMatrix {
    x: Array2<f64>,
    groups: Vec<AttributeGroup>,
}

impl AttributeMatrix {
    /// An attribute matrix with no columns, for structure-only fits.
    pub fn empty(num_nodes: usize) -> Self {
        AttributeMatrix {
            x: Array2::zeros((num_nodes, 0)),
            groups: Vec::new(),
        }
    }

    /// One covariate with `levels` values, node `i` taking value `labels[i]`.
    pub fn from_labels(labels: &[usize], levels: usize) -> Result<Self> {
        let mut x = Array2::zeros((labels.len(), levels));
        for (i, &l) in labels.iter().enumerate() {
            if l >= levels {
                return Err(Error::Shape(format!("label {l} outside 0..{levels}")));
            }
            x[[i, l]] = 1.0;
        }
        Ok(AttributeMatrix {
            x,
            groups: vec![AttributeGroup {
                name: "attribute".into(),
                levels: (0..levels).map(|l| l.to_string()).collect(),
                start: 0,
            }],
        })
    }

    /// Wraps a dense 0/1 matrix; each column becomes its own group.
    pub fn from_dense(x: Array2<f64>) -> Result<Self> {
        if x.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Shape("attribute entries must be 0 or 1".into()));
        }
        let groups = (0..x.ncols())
            .map(|z| AttributeGroup {
                name: format!("x{z}"),
                levels: vec!["1".into()],
                start: z,
            })
            .collect();
        Ok(AttributeMatrix { x, groups })
    }

    pub fn num_nodes(&self) -> usize {
        self.x.nrows()
    }

    pub fn num_attributes(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn groups(&self) -> &[AttributeGroup] {
        &self.groups
    }

    pub fn get(&self, node: usize, z: usize) -> bool {
        self.x[[node, z]] != 0.0
    }

    /// The rows `nodes`, in that order, with the same columns.
    pub fn select_rows(&self, nodes: &[usize]) -> AttributeMatrix {
        AttributeMatrix {
            x: self.x.select(ndarray::Axis(0), nodes),
            groups: self.groups.clone(),
        }
    }

    /// Column labels of the form `covariate=level`.
    pub fn column_names(&self) -> Vec<String> {
        self.groups
            .iter()
            .flat_map(|g| g.levels.iter().map(move |l| format!("{}={}", g.name, l)))
            .collect()
    }

    /// Writes the attribute file format, recovering the categorical value of
    /// each node from its one-hot block.
    pub fn write_csv<W: Write>(&self, node_ids: &[String], out: W) -> Result<()> {
        if node_ids.len() != self.num_nodes() {
            return Err(Error::Shape(format!(
                "{} node ids for {} attribute rows",
                node_ids.len(),
                self.num_nodes()
            )));
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["node".to_string()];
        header.extend(self.groups.iter().map(|g| g.name.clone()));
        w.write_record(&header).map_err(csv_err)?;
        for (i, id) in node_ids.iter().enumerate() {
            let mut record = vec![id.clone()];
            for g in &self.groups {
                let value = g
                    .columns()
                    .position(|z| self.get(i, z))
                    .map(|p| g.levels[p].clone())
                    .unwrap_or_default();
                record.push(value);
            }
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line: 0,
            msg: format!("{other:?}"),
        },
    }
}

/// Reads the attribute file: header `node,<cov1>,<cov2>,…`, one row per node.
pub fn read_attribute_table<R: Read>(reader: R) -> Result<AttributeTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.is_empty() || &headers[0] != "node" {
        return Err(Error::Parse {
            line: 1,
            msg: "attribute header must start with `node`".into(),
        });
    }
    let covariates: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: i + 2,
            msg: e.to_string(),
        })?;
        let id = record.get(0).unwrap_or_default().to_string();
        let values: Vec<String> = (1..=covariates.len())
            .map(|c| record.get(c).unwrap_or_default().to_string())
            .collect();
        rows.push((id, values));
    }
    Ok(AttributeTable { covariates, rows })
}

/// One-hot encodes a covariate table against the node order of `h`.
///
/// Each covariate with `z_p` observed values (sorted lexicographically) becomes
/// a block of `z_p` columns. Every hypergraph node must have a row, and every
/// row must name a hypergraph node.
pub fn one_hot_encode(table: &AttributeTable, h: &Hypergraph) -> Result<AttributeMatrix> {
    let index = h.node_index();
    let n = h.num_nodes();
    let p = table.covariates.len();
    let mut by_node: Vec<Option<&[String]>> = vec![None; n];
    for (id, values) in &table.rows {
        let &i = index
            .get(id.as_str())
            .ok_or_else(|| Error::UnknownNode(id.clone()))?;
        by_node[i] = Some(values);
    }

    let mut groups = Vec::with_capacity(p);
    let mut start = 0;
    let mut level_maps: Vec<HashMap<&str, usize>> = Vec::with_capacity(p);
    for (c, name) in table.covariates.iter().enumerate() {
        let levels: BTreeSet<&str> = table
            .rows
            .iter()
            .map(|(_, v)| v[c].as_str())
            .filter(|s| !s.is_empty())
            .collect();
        level_maps.push(levels.iter().enumerate().map(|(k, &l)| (l, k)).collect());
        let levels: Vec<String> = levels.into_iter().map(str::to_string).collect();
        let width = levels.len();
        groups.push(AttributeGroup {
            name: name.clone(),
            levels,
            start,
        });
        start += width;
    }

    let mut x = Array2::zeros((n, start));
    for (i, values) in by_node.iter().enumerate() {
        let values = values.ok_or_else(|| Error::MissingValue {
            node: h.node_ids()[i].clone(),
            covariate: table.covariates.first().cloned().unwrap_or_default(),
        })?;
        for (c, group) in groups.iter().enumerate() {
            let v = values[c].as_str();
            let &level = level_maps[c].get(v).ok_or_else(|| Error::MissingValue {
                node: h.node_ids()[i].clone(),
                covariate: group.name.clone(),
            })?;
            x[[i, group.start + level]] = 1.0;
        }
    }
    Ok(AttributeMatrix { x, groups })
}
