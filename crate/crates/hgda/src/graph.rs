//! Graph data model, dataset-directory I/O, and the normalized spectral
//! operators the filter channels consume.
//!
//! A dataset directory holds four files:
//!
//! - `meta.json` — `{"name", "num_nodes", "num_classes", "feature_dim"}`
//! - `edges.csv` — one `src,dst` pair of 0-based ids per line, each
//!   undirected edge listed once
//! - `features.csv` — `num_nodes` rows of `feature_dim` comma-separated floats
//! - `labels.csv` — one integer in `[0, num_classes)` per line, `-1` for
//!   unknown; the file may be absent for an unlabeled graph
//!
//! Adjacency is stored symmetric in CSR with both `(i,j)` and `(j,i)`,
//! no self-loops, no duplicates. All arithmetic is `f64`.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mat::Mat;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("missing file: {0}")]
    MissingFile(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("node id {id} out of range for {num_nodes} nodes")]
    NodeOutOfRange { id: usize, num_nodes: usize },
    #[error("label {value} out of range for {num_classes} classes")]
    LabelOutOfRange { value: i64, num_classes: usize },
    #[error("features row {row} has {got} columns, expected {expected}")]
    NonRectangularFeatures {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("{file} has {got} rows, expected {expected}")]
    RowCountMismatch {
        file: String,
        got: usize,
        expected: usize,
    },
    #[error("operator is {op_rows}x{op_cols} but dense input has {rows} rows")]
    DimMismatch {
        op_rows: usize,
        op_cols: usize,
        rows: usize,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    name: String,
    num_nodes: usize,
    num_classes: usize,
    feature_dim: usize,
}

/// An undirected attributed graph: CSR adjacency, dense features, and an
/// optional label vector (entries may individually be unknown).
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    name: String,
    num_nodes: usize,
    num_classes: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    features: Mat,
    labels: Option<Vec<Option<usize>>>,
}

impl Graph {
    /// Canonicalizing constructor: drops self-loops, symmetrizes, dedups,
    /// sorts neighbor lists, and validates labels against `num_classes`.
    pub fn new(
        name: impl Into<String>,
        num_nodes: usize,
        num_classes: usize,
        edges: &[(usize, usize)],
        features: Mat,
        labels: Option<Vec<Option<usize>>>,
    ) -> Result<Self, GraphError> {
        if features.rows() != num_nodes {
            return Err(GraphError::RowCountMismatch {
                file: "features".into(),
                got: features.rows(),
                expected: num_nodes,
            });
        }
        if let Some(ls) = &labels {
            if ls.len() != num_nodes {
                return Err(GraphError::RowCountMismatch {
                    file: "labels".into(),
                    got: ls.len(),
                    expected: num_nodes,
                });
            }
            for l in ls.iter().flatten() {
                if *l >= num_classes {
                    return Err(GraphError::LabelOutOfRange {
                        value: *l as i64,
                        num_classes,
                    });
                }
            }
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for &(a, b) in edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(GraphError::NodeOutOfRange {
                    id: a.max(b),
                    num_nodes,
                });
            }
            if a == b {
                continue; // self-loops in inputs are ignored
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut row_ptr = Vec::with_capacity(num_nodes + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for nbrs in &mut adj {
            nbrs.sort_unstable();
            nbrs.dedup();
            col_idx.extend_from_slice(nbrs);
            row_ptr.push(col_idx.len());
        }
        Ok(Graph {
            name: name.into(),
            num_nodes,
            num_classes,
            row_ptr,
            col_idx,
            features,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Undirected edge count (each edge counted once).
    pub fn num_edges(&self) -> usize {
        self.col_idx.len() / 2
    }

    /// Each undirected edge once, with `src < dst`.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for v in 0..self.num_nodes {
            for &u in self.neighbors(v) {
                if v < u {
                    out.push((v, u));
                }
            }
        }
        out
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[v]..self.row_ptr[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row_ptr[v + 1] - self.row_ptr[v]
    }

    pub fn features(&self) -> &Mat {
        &self.features
    }

    pub fn label(&self, v: usize) -> Option<usize> {
        self.labels.as_ref().and_then(|ls| ls[v])
    }

    pub fn labels(&self) -> Option<&[Option<usize>]> {
        self.labels.as_deref()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.labels
            .as_ref()
            .is_some_and(|ls| ls.iter().all(Option::is_some))
    }

    /// Label vector for a fully labeled graph.
    pub fn label_vec(&self) -> Option<Vec<usize>> {
        let ls = self.labels.as_ref()?;
        ls.iter().copied().collect()
    }

    /// Load a graph from a dataset directory.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, GraphError> {
        let dir = dir.as_ref();
        let meta_raw = read_required(dir, "meta.json")?;
        let meta: Meta =
            serde_json::from_str(&meta_raw).map_err(|e| GraphError::Parse {
                file: file_at(dir, "meta.json"),
                line: e.line(),
                msg: e.to_string(),
            })?;

        let edges_raw = read_required(dir, "edges.csv")?;
        let mut edges = Vec::new();
        for (i, line) in edges_raw.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| GraphError::Parse {
                file: file_at(dir, "edges.csv"),
                line: i + 1,
                msg: format!("expected `src,dst`, got `{line}`"),
            })?;
            let parse = |s: &str| {
                s.trim().parse::<usize>().map_err(|_| GraphError::Parse {
                    file: file_at(dir, "edges.csv"),
                    line: i + 1,
                    msg: format!("invalid node id `{}`", s.trim()),
                })
            };
            edges.push((parse(a)?, parse(b)?));
        }

        let feat_raw = read_required(dir, "features.csv")?;
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(meta.num_nodes);
        for (i, line) in feat_raw.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| GraphError::Parse {
                        file: file_at(dir, "features.csv"),
                        line: i + 1,
                        msg: format!("invalid float `{}`", s.trim()),
                    })
                })
                .collect::<Result<_, _>>()?;
            if row.len() != meta.feature_dim {
                return Err(GraphError::NonRectangularFeatures {
                    row: i + 1,
                    got: row.len(),
                    expected: meta.feature_dim,
                });
            }
            rows.push(row);
        }
        if rows.len() != meta.num_nodes {
            return Err(GraphError::RowCountMismatch {
                file: file_at(dir, "features.csv"),
                got: rows.len(),
                expected: meta.num_nodes,
            });
        }
        let features = Mat::from_rows(&rows);

        let labels_path = dir.join("labels.csv");
        let labels = if labels_path.exists() {
            let raw = fs::read_to_string(&labels_path).map_err(|e| GraphError::Io {
                path: labels_path.display().to_string(),
                source: e,
            })?;
            let mut ls = Vec::with_capacity(meta.num_nodes);
            for (i, line) in raw.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let v: i64 = line.parse().map_err(|_| GraphError::Parse {
                    file: file_at(dir, "labels.csv"),
                    line: i + 1,
                    msg: format!("invalid label `{line}`"),
                })?;
                if v == -1 {
                    ls.push(None);
                } else if v < 0 || v as usize >= meta.num_classes {
                    return Err(GraphError::LabelOutOfRange {
                        value: v,
                        num_classes: meta.num_classes,
                    });
                } else {
                    ls.push(Some(v as usize));
                }
            }
            if ls.len() != meta.num_nodes {
                return Err(GraphError::RowCountMismatch {
                    file: file_at(dir, "labels.csv"),
                    got: ls.len(),
                    expected: meta.num_nodes,
                });
            }
            Some(ls)
        } else {
            None
        };

        Graph::new(
            meta.name,
            meta.num_nodes,
            meta.num_classes,
            &edges,
            features,
            labels,
        )
    }

    /// Write the dataset directory format. Each undirected edge is listed
    /// once with `src < dst`; floats use shortest round-trip formatting so
    /// `load(save(g)) == g` exactly.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), GraphError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| GraphError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        let meta = Meta {
            name: self.name.clone(),
            num_nodes: self.num_nodes,
            num_classes: self.num_classes,
            feature_dim: self.feature_dim(),
        };
        write_file(
            dir,
            "meta.json",
            &(serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n"),
        )?;

        let mut edges = String::new();
        for v in 0..self.num_nodes {
            for &u in self.neighbors(v) {
                if v < u {
                    edges.push_str(&format!("{v},{u}\n"));
                }
            }
        }
        write_file(dir, "edges.csv", &edges)?;

        let mut feats = String::new();
        for v in 0..self.num_nodes {
            let row = self.features.row(v);
            for (i, x) in row.iter().enumerate() {
                if i > 0 {
                    feats.push(',');
                }
                feats.push_str(&format!("{x}"));
            }
            feats.push('\n');
        }
        write_file(dir, "features.csv", &feats)?;

        if let Some(ls) = &self.labels {
            let mut out = String::new();
            for l in ls {
                match l {
                    Some(v) => out.push_str(&format!("{v}\n")),
                    None => out.push_str("-1\n"),
                }
            }
            write_file(dir, "labels.csv", &out)?;
        }
        Ok(())
    }
}

fn file_at(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn read_required(dir: &Path, name: &str) -> Result<String, GraphError> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(GraphError::MissingFile(path.display().to_string()));
    }
    fs::read_to_string(&path).map_err(|e| GraphError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), GraphError> {
    let path = dir.join(name);
    let mut f = fs::File::create(&path).map_err(|e| GraphError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    f.write_all(contents.as_bytes()).map_err(|e| GraphError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Sparse matrix in CSR form, used for the normalized operators.
/// Column indices are sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn identity(n: usize) -> Self {
        SparseOperator {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `r` as parallel (column, value) slices.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(i) => vals[i],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                m.set(r, c, v);
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if (self.entry(c, r) - v).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Sparse × dense product. Row-parallel above the same threshold as
    /// dense products; bit-identical across thread counts.
    pub fn mul_dense(&self, m: &Mat) -> Result<Mat, GraphError> {
        if self.cols != m.rows() {
            return Err(GraphError::DimMismatch {
                op_rows: self.rows,
                op_cols: self.cols,
                rows: m.rows(),
            });
        }
        let w = m.cols();
        let mut out = Mat::zeros(self.rows, w);
        let body = |(r, out_row): (usize, &mut [f64])| {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let src = m.row(c);
                for (o, &x) in out_row.iter_mut().zip(src) {
                    *o += v * x;
                }
            }
        };
        if self.rows >= 64 {
            out.as_mut_slice()
                .par_chunks_mut(w.max(1))
                .enumerate()
                .for_each(body);
        } else {
            out.as_mut_slice()
                .chunks_mut(w.max(1))
                .enumerate()
                .for_each(body);
        }
        Ok(out)
    }

    /// Transposed product `selfᵀ · m`, serial scatter.
    pub fn mul_dense_transposed(&self, m: &Mat) -> Result<Mat, GraphError> {
        if self.rows != m.rows() {
            return Err(GraphError::DimMismatch {
                op_rows: self.rows,
                op_cols: self.cols,
                rows: m.rows(),
            });
        }
        let w = m.cols();
        let mut out = Mat::zeros(self.cols, w);
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let src = m.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let dst = out.row_mut(c);
                for (o, &x) in dst.iter_mut().zip(src) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }
}

/// Symmetric normalized adjacency with self-loops,
/// `(D+I)^{-1/2} (A+I) (D+I)^{-1/2}`.
pub fn normalized_adjacency(g: &Graph) -> SparseOperator {
    let n = g.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| 1.0 / ((g.degree(v) + 1) as f64).sqrt())
        .collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for v in 0..n {
        let nbrs = g.neighbors(v);
        // Merge the diagonal into the sorted neighbor list.
        let mut placed_diag = false;
        for &u in nbrs {
            if !placed_diag && u > v {
                col_idx.push(v);
                values.push(inv_sqrt[v] * inv_sqrt[v]);
                placed_diag = true;
            }
            col_idx.push(u);
            values.push(inv_sqrt[v] * inv_sqrt[u]);
        }
        if !placed_diag {
            col_idx.push(v);
            values.push(inv_sqrt[v] * inv_sqrt[v]);
        }
        row_ptr.push(col_idx.len());
    }
    SparseOperator {
        rows: n,
        cols: n,
        row_ptr,
        col_idx,
        values,
    }
}

/// Normalized Laplacian `I − Ã`, built entrywise from `Ã` so the identity
/// `Ã + L̃ = I` holds exactly.
pub fn normalized_laplacian(g: &Graph) -> SparseOperator {
    let mut op = normalized_adjacency(g);
    for r in 0..op.rows {
        let span = op.row_ptr[r]..op.row_ptr[r + 1];
        for i in span {
            if op.col_idx[i] == r {
                op.values[i] = 1.0 - op.values[i];
            } else {
                op.values[i] = -op.values[i];
            }
        }
    }
    op
}

/// Sparse × dense product with shape checking (the library entry point;
/// `SparseOperator::mul_dense` is the kernel).
pub fn spmm(op: &SparseOperator, m: &Mat) -> Result<Mat, GraphError> {
    op.mul_dense(m)
}
