//! Global graph, labels, and the per-device restricted views.
//!
//! Vertex ids in input files may be arbitrary non-negative integers; they are
//! compacted to `0..n-1` on load and the mapping is kept for output.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Undirected, unweighted graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    /// Compact id -> original id from the input file.
    original_ids: Vec<u64>,
}

/// The one-vertex slice of the graph a device is allowed to see.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceView {
    pub vertex: usize,
    pub neighbors: Vec<usize>,
}

/// Multi-label assignment over graph vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<BTreeSet<usize>>,
    num_labels: usize,
}

impl Graph {
    /// Build from undirected edges over compact ids already in `0..num_vertices`.
    /// Duplicate and reversed edges are deduplicated; self-loops are rejected.
    pub fn from_edges(num_vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); num_vertices];
        for &(u, v) in edges {
            if u == v {
                return Err(Error::SelfLoop {
                    path: "<memory>".into(),
                    line: 0,
                    vertex: u as u64,
                });
            }
            if u >= num_vertices || v >= num_vertices {
                return Err(Error::VertexOutOfRange {
                    id: u.max(v) as u64,
                    num_vertices,
                });
            }
            sets[u].insert(v);
            sets[v].insert(u);
        }
        Ok(Graph {
            adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
            original_ids: (0..num_vertices as u64).collect(),
        })
    }

    pub fn load_edge_list(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let reader = BufReader::new(file);

        let mut raw_edges: Vec<(u64, u64)> = Vec::new();
        let mut ids: BTreeSet<u64> = BTreeSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let mut parts = text.split_whitespace();
            let (a, b) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => (a, b),
                (_, _, Some(_)) => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: line_no,
                        message: "expected exactly two columns (weighted input is rejected)"
                            .into(),
                    })
                }
                _ => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: line_no,
                        message: "expected two vertex ids".into(),
                    })
                }
            };
            let parse = |tok: &str| -> Result<u64> {
                tok.parse::<u64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: format!("invalid vertex id {tok:?}"),
                })
            };
            let (u, v) = (parse(a)?, parse(b)?);
            if u == v {
                return Err(Error::SelfLoop {
                    path: path.to_path_buf(),
                    line: line_no,
                    vertex: u,
                });
            }
            ids.insert(u);
            ids.insert(v);
            raw_edges.push((u, v));
        }

        let original_ids: Vec<u64> = ids.into_iter().collect();
        let compact: BTreeMap<u64, usize> = original_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();

        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); original_ids.len()];
        for (u, v) in raw_edges {
            let (cu, cv) = (compact[&u], compact[&v]);
            sets[cu].insert(cv);
            sets[cv].insert(cu);
        }
        Ok(Graph {
            adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
            original_ids,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(|a| a.len()).max().unwrap_or(0)
    }

    pub fn original_id(&self, v: usize) -> u64 {
        self.original_ids[v]
    }

    /// Vertices eligible as walk starts.
    pub fn non_isolated(&self) -> Vec<usize> {
        (0..self.num_vertices())
            .filter(|&v| !self.adjacency[v].is_empty())
            .collect()
    }

    pub fn device_views(&self) -> Vec<DeviceView> {
        (0..self.num_vertices()).map(|v| self.device_view(v)).collect()
    }

    pub fn device_view(&self, v: usize) -> DeviceView {
        DeviceView {
            vertex: v,
            neighbors: self.adjacency[v].clone(),
        }
    }

    /// Write the edge list (original ids, one `u v` line per edge, u < v in compact order).
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for u in 0..self.num_vertices() {
            for &v in &self.adjacency[u] {
                if u < v {
                    writeln!(w, "{} {}", self.original_ids[u], self.original_ids[v])?;
                }
            }
        }
        Ok(())
    }

    /// Write the compact-id -> original-id mapping as two-column text.
    pub fn write_id_map<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (compact, original) in self.original_ids.iter().enumerate() {
            writeln!(w, "{compact} {original}")?;
        }
        Ok(())
    }
}

impl LabelSet {
    pub fn load(path: &Path, graph: &Graph) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let reader = BufReader::new(file);

        let compact: BTreeMap<u64, usize> = graph
            .original_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();

        let mut raw: Vec<(usize, Vec<u64>)> = Vec::new();
        let mut label_ids: BTreeSet<u64> = BTreeSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let (vtx_tok, rest) = match text.split_once(char::is_whitespace) {
                Some(pair) => pair,
                None => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: line_no,
                        message: "expected `vertex l1,l2,...`".into(),
                    })
                }
            };
            let vid: u64 = vtx_tok.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("invalid vertex id {vtx_tok:?}"),
            })?;
            let vertex = *compact.get(&vid).ok_or(Error::VertexOutOfRange {
                id: vid,
                num_vertices: graph.num_vertices(),
            })?;
            let mut labels = Vec::new();
            for tok in rest.trim().split(',') {
                if tok.is_empty() {
                    continue;
                }
                labels.push(tok.trim().parse::<u64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: format!("invalid label id {tok:?}"),
                })?);
            }
            label_ids.extend(labels.iter().copied());
            raw.push((vertex, labels));
        }

        let label_compact: BTreeMap<u64, usize> = label_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        let mut labels = vec![BTreeSet::new(); graph.num_vertices()];
        for (vertex, ls) in raw {
            for l in ls {
                labels[vertex].insert(label_compact[&l]);
            }
        }
        Ok(LabelSet {
            labels,
            num_labels: label_ids.len(),
        })
    }

    pub fn from_labels(labels: Vec<BTreeSet<usize>>, num_labels: usize) -> Self {
        LabelSet { labels, num_labels }
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn of(&self, vertex: usize) -> &BTreeSet<usize> {
        &self.labels[vertex]
    }

    /// Vertices with at least one label.
    pub fn labeled_vertices(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&v| !self.labels[v].is_empty())
            .collect()
    }
}
