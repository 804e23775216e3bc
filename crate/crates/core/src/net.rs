//! Layered feedforward network structure, validation, reachability queries,
//! and the JSON file format.
//!
//! A network stores the explicit layers L_1..L_m and the 0/1 connectivity
//! matrices between consecutive layers. The single final aggregator that
//! combines the last layer is implicit and always fully connected, so it never
//! appears in the data. Layers and agents are 1-indexed everywhere a human
//! sees them (files, reports, this module's query API); only raw matrix
//! accessors are 0-indexed.

use crate::rat::{format_rat, parse_rat, rat_int, Rat};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("a network needs at least one layer")]
    NoLayers,
    #[error("layer {layer} has size {size}; sizes must be at least 1")]
    BadLayerSize { layer: usize, size: usize },
    #[error("expected {expected} connectivity matrices for {layers} layers, found {found}")]
    MatrixCount {
        layers: usize,
        expected: usize,
        found: usize,
    },
    #[error(
        "connectivity matrix {index} has shape {rows}x{cols}, expected {want_rows}x{want_cols}"
    )]
    MatrixShape {
        index: usize,
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("connectivity matrix {index} is ragged at row {row}")]
    RaggedMatrix { index: usize, row: usize },
    #[error("connectivity matrix {index} entry ({row},{col}) is {value}; entries must be 0 or 1")]
    BadEntry {
        index: usize,
        row: usize,
        col: usize,
        value: u8,
    },
    #[error("layer index {layer} out of range 1..={max}")]
    LayerOutOfRange { layer: usize, max: usize },
    #[error("agent index {agent} out of range 1..={max} in layer {layer}")]
    AgentOutOfRange {
        layer: usize,
        agent: usize,
        max: usize,
    },
    #[error("path endpoints must satisfy from < to, got {from} and {to}")]
    BadPathEndpoints { from: usize, to: usize },
    #[error("precision entry {index} is {value}; precisions must be positive")]
    NonPositivePrecision { index: usize, value: String },
    #[error("variance entry {index} is {value}; variances must be positive")]
    NonPositiveVariance { index: usize, value: String },
    #[error("{field} has {found} entries, expected {expected} (first layer size)")]
    PrecisionLength {
        field: &'static str,
        found: usize,
        expected: usize,
    },
    #[error("{field}[{index}]: {source}")]
    BadRational {
        field: &'static str,
        index: usize,
        source: crate::rat::RatParseError,
    },
    #[error("a file may give precisions or variances, not both")]
    PrecisionsAndVariances,
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
}

/// Dense boolean matrix; connectivity between consecutive layers and
/// path-reachability matrices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BoolMat {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl BoolMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BoolMat {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = true;
        }
        m
    }

    pub fn from_binary_rows(rows: &[Vec<u8>]) -> Result<Self, NetError> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(NetError::RaggedMatrix { index: 0, row: i });
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => m.set(i, j, true),
                    other => {
                        return Err(NetError::BadEntry {
                            index: 0,
                            row: i,
                            col: j,
                            value: other,
                        })
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.data[i * self.cols + j] = value;
    }

    /// Column indices (0-based) of the true entries in row i.
    pub fn row_support(&self, i: usize) -> Vec<usize> {
        (0..self.cols).filter(|&j| self.get(i, j)).collect()
    }

    pub fn row_sum(&self, i: usize) -> usize {
        (0..self.cols).filter(|&j| self.get(i, j)).count()
    }

    pub fn col_sum(&self, j: usize) -> usize {
        (0..self.rows).filter(|&i| self.get(i, j)).count()
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Boolean matrix product: entry (i,j) is true iff some k links both.
    pub fn bool_mul(&self, rhs: &BoolMat) -> BoolMat {
        assert_eq!(self.cols, rhs.rows, "boolean product shape mismatch");
        let mut out = BoolMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                if !self.get(i, k) {
                    continue;
                }
                for j in 0..rhs.cols {
                    if rhs.get(k, j) {
                        out.set(i, j, true);
                    }
                }
            }
        }
        out
    }

    pub fn to_binary_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| u8::from(self.get(i, j))).collect())
            .collect()
    }
}

/// Exact inverse variances of the first-layer measurements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrecisionVector {
    values: Vec<Rat>,
}

impl PrecisionVector {
    pub fn new(values: Vec<Rat>) -> Result<Self, NetError> {
        for (i, v) in values.iter().enumerate() {
            if !v.is_positive() {
                return Err(NetError::NonPositivePrecision {
                    index: i + 1,
                    value: format_rat(v),
                });
            }
        }
        Ok(PrecisionVector { values })
    }

    pub fn ones(n: usize) -> Self {
        PrecisionVector {
            values: vec![Rat::one(); n],
        }
    }

    /// Builds w = 1/sigma^2 from measurement variances, exactly.
    pub fn from_variances(variances: Vec<Rat>) -> Result<Self, NetError> {
        let mut values = Vec::with_capacity(variances.len());
        for (i, v) in variances.iter().enumerate() {
            if !v.is_positive() {
                return Err(NetError::NonPositiveVariance {
                    index: i + 1,
                    value: format_rat(v),
                });
            }
            values.push(Rat::one() / v);
        }
        Ok(PrecisionVector { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Rat] {
        &self.values
    }

    /// Entry for a 1-based agent index.
    pub fn get(&self, agent: usize) -> &Rat {
        &self.values[agent - 1]
    }

    pub fn sum(&self) -> Rat {
        let mut acc = Rat::zero();
        for v in &self.values {
            acc += v;
        }
        acc
    }

    /// Measurement variances 1/w_i, exactly.
    pub fn inverses(&self) -> Vec<Rat> {
        self.values.iter().map(|v| Rat::one() / v).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IsolationKind {
    NoInputs,
    NoOutputs,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IsolatedAgent {
    pub layer: usize,
    pub agent: usize,
    pub kind: IsolationKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub isolated_agents: Vec<IsolatedAgent>,
}

/// Strictly layered feedforward network: explicit layers 1..m plus the
/// connectivity matrix C^(k) (shape L_{k+1} x L_k) for each consecutive pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredNetwork {
    layer_sizes: Vec<usize>,
    connectivity: Vec<BoolMat>,
}

impl LayeredNetwork {
    pub fn new(layer_sizes: Vec<usize>, connectivity: Vec<BoolMat>) -> Result<Self, NetError> {
        if layer_sizes.is_empty() {
            return Err(NetError::NoLayers);
        }
        for (k, &size) in layer_sizes.iter().enumerate() {
            if size == 0 {
                return Err(NetError::BadLayerSize {
                    layer: k + 1,
                    size,
                });
            }
        }
        if connectivity.len() + 1 != layer_sizes.len() {
            return Err(NetError::MatrixCount {
                layers: layer_sizes.len(),
                expected: layer_sizes.len() - 1,
                found: connectivity.len(),
            });
        }
        for (k, m) in connectivity.iter().enumerate() {
            let want_rows = layer_sizes[k + 1];
            let want_cols = layer_sizes[k];
            if m.rows() != want_rows || m.cols() != want_cols {
                return Err(NetError::MatrixShape {
                    index: k + 1,
                    rows: m.rows(),
                    cols: m.cols(),
                    want_rows,
                    want_cols,
                });
            }
        }
        Ok(LayeredNetwork {
            layer_sizes,
            connectivity,
        })
    }

    /// Number of explicit layers m (the implicit aggregator not counted).
    pub fn layer_count(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Size of a 1-based layer.
    pub fn layer_size(&self, layer: usize) -> usize {
        self.layer_sizes[layer - 1]
    }

    /// C^(k) for 1 <= k <= m-1. Panics out of range; queries below return errors.
    pub fn connectivity(&self, k: usize) -> &BoolMat {
        &self.connectivity[k - 1]
    }

    pub fn connectivity_matrices(&self) -> &[BoolMat] {
        &self.connectivity
    }

    pub fn edge_count(&self) -> usize {
        self.connectivity.iter().map(BoolMat::count_ones).sum()
    }

    fn check_layer(&self, layer: usize) -> Result<(), NetError> {
        if layer == 0 || layer > self.layer_count() {
            return Err(NetError::LayerOutOfRange {
                layer,
                max: self.layer_count(),
            });
        }
        Ok(())
    }

    /// Flags every agent that receives nothing (layers >= 2) or sends nothing
    /// (layers <= m-1). Such agents are allowed in stored files; downstream
    /// analyses decide what they mean.
    pub fn validate(&self) -> ValidationReport {
        let m = self.layer_count();
        let mut isolated = Vec::new();
        for layer in 1..=m {
            let size = self.layer_size(layer);
            for agent in 1..=size {
                if layer >= 2 && self.connectivity(layer - 1).row_sum(agent - 1) == 0 {
                    isolated.push(IsolatedAgent {
                        layer,
                        agent,
                        kind: IsolationKind::NoInputs,
                    });
                }
                if layer < m && self.connectivity(layer).col_sum(agent - 1) == 0 {
                    isolated.push(IsolatedAgent {
                        layer,
                        agent,
                        kind: IsolationKind::NoOutputs,
                    });
                }
            }
        }
        ValidationReport {
            ok: isolated.is_empty(),
            isolated_agents: isolated,
        }
    }

    /// Reachability between two explicit layers: entry (i,j) is 1 iff a
    /// directed path runs from agent j of from_layer to agent i of to_layer.
    /// Equals the boolean product of the connectivity matrices in between.
    pub fn path_matrix(&self, from_layer: usize, to_layer: usize) -> Result<BoolMat, NetError> {
        self.check_layer(from_layer)?;
        self.check_layer(to_layer)?;
        if from_layer >= to_layer {
            return Err(NetError::BadPathEndpoints {
                from: from_layer,
                to: to_layer,
            });
        }
        let mut acc = self.connectivity(from_layer).clone();
        for k in from_layer + 1..to_layer {
            acc = self.connectivity(k).bool_mul(&acc);
        }
        Ok(acc)
    }

    /// Out-degree of every agent in a layer (1 <= layer <= m-1): column sums
    /// of that layer's connectivity matrix.
    pub fn out_degrees(&self, layer: usize) -> Result<Vec<usize>, NetError> {
        self.check_layer(layer)?;
        if layer == self.layer_count() {
            return Err(NetError::LayerOutOfRange {
                layer,
                max: self.layer_count() - 1,
            });
        }
        let c = self.connectivity(layer);
        Ok((0..c.cols()).map(|j| c.col_sum(j)).collect())
    }

    /// The 1-based previous-layer agents feeding `agent` of `layer`
    /// (2 <= layer <= m), in ascending order. This is the one-step input map;
    /// the transitive first-layer version is the row support of
    /// path_matrix(1, layer).
    pub fn input_set(&self, layer: usize, agent: usize) -> Result<Vec<usize>, NetError> {
        self.check_layer(layer)?;
        if layer < 2 {
            return Err(NetError::LayerOutOfRange {
                layer,
                max: self.layer_count(),
            });
        }
        let size = self.layer_size(layer);
        if agent == 0 || agent > size {
            return Err(NetError::AgentOutOfRange {
                layer,
                agent,
                max: size,
            });
        }
        Ok(self
            .connectivity(layer - 1)
            .row_support(agent - 1)
            .into_iter()
            .map(|j| j + 1)
            .collect())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RationalEntry {
    Int(i64),
    Text(String),
}

impl RationalEntry {
    fn to_rat(&self, field: &'static str, index: usize) -> Result<Rat, NetError> {
        match self {
            RationalEntry::Int(v) => Ok(rat_int(*v)),
            RationalEntry::Text(s) => parse_rat(s).map_err(|source| NetError::BadRational {
                field,
                index: index + 1,
                source,
            }),
        }
    }
}

/// On-disk form. `precisions` holds w_i; a file may instead give `variances`
/// (sigma_i^2), which the loader inverts exactly. Saving always writes
/// precisions. Any other key is rejected.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    layers: Vec<usize>,
    connectivity: Vec<Vec<Vec<u8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    precisions: Option<Vec<RationalEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variances: Option<Vec<RationalEntry>>,
}

fn entries_to_rats(
    entries: &[RationalEntry],
    field: &'static str,
    expected: usize,
) -> Result<Vec<Rat>, NetError> {
    if entries.len() != expected {
        return Err(NetError::PrecisionLength {
            field,
            found: entries.len(),
            expected,
        });
    }
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| e.to_rat(field, i))
        .collect()
}

pub fn network_from_json(text: &str) -> Result<(LayeredNetwork, PrecisionVector), NetError> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|source| NetError::Parse {
        path: "<string>".to_owned(),
        source,
    })?;
    network_from_file(file)
}

fn network_from_file(file: NetworkFile) -> Result<(LayeredNetwork, PrecisionVector), NetError> {
    let mut matrices = Vec::with_capacity(file.connectivity.len());
    for (k, rows) in file.connectivity.iter().enumerate() {
        let m = BoolMat::from_binary_rows(rows).map_err(|e| match e {
            NetError::RaggedMatrix { row, .. } => NetError::RaggedMatrix { index: k + 1, row },
            NetError::BadEntry {
                row, col, value, ..
            } => NetError::BadEntry {
                index: k + 1,
                row,
                col,
                value,
            },
            other => other,
        })?;
        matrices.push(m);
    }
    let net = LayeredNetwork::new(file.layers, matrices)?;
    let first = net.layer_size(1);
    let precisions = match (&file.precisions, &file.variances) {
        (Some(_), Some(_)) => return Err(NetError::PrecisionsAndVariances),
        (Some(entries), None) => {
            PrecisionVector::new(entries_to_rats(entries, "precisions", first)?)?
        }
        (None, Some(entries)) => {
            PrecisionVector::from_variances(entries_to_rats(entries, "variances", first)?)?
        }
        (None, None) => PrecisionVector::ones(first),
    };
    Ok((net, precisions))
}

pub fn network_to_json(net: &LayeredNetwork, precisions: &PrecisionVector) -> String {
    let file = NetworkFile {
        layers: net.layer_sizes().to_vec(),
        connectivity: net
            .connectivity_matrices()
            .iter()
            .map(BoolMat::to_binary_rows)
            .collect(),
        precisions: Some(
            precisions
                .values()
                .iter()
                .map(|v| RationalEntry::Text(format_rat(v)))
                .collect(),
        ),
        variances: None,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("network serialization");
    text.push('\n');
    text
}

pub fn load(path: &Path) -> Result<(LayeredNetwork, PrecisionVector), NetError> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| NetError::Io {
        path: display.clone(),
        source,
    })?;
    let file: NetworkFile = serde_json::from_str(&text).map_err(|source| NetError::Parse {
        path: display,
        source,
    })?;
    network_from_file(file)
}

/// Writes via a sibling temp file and rename so a crash can't leave a
/// half-written network behind.
pub fn save(net: &LayeredNetwork, precisions: &PrecisionVector, path: &Path) -> Result<(), NetError> {
    let text = network_to_json(net, precisions);
    let display = path.display().to_string();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp_path = std::path::PathBuf::from(tmp);
    let io_err = |source| NetError::Io {
        path: display.clone(),
        source,
    };
    fs::write(&tmp_path, text).map_err(io_err)?;
    fs::rename(&tmp_path, path).map_err(io_err)?;
    Ok(())
}

/// Builds a network from layer sizes and plain 0/1 row arrays; the
/// constructor everything in-crate uses for fixtures and generators.
pub fn network_from_rows(
    layer_sizes: Vec<usize>,
    matrices: &[Vec<Vec<u8>>],
) -> Result<LayeredNetwork, NetError> {
    let mats = matrices
        .iter()
        .map(|rows| BoolMat::from_binary_rows(rows))
        .collect::<Result<Vec<_>, _>>()?;
    LayeredNetwork::new(layer_sizes, mats)
}
