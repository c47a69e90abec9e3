//! Hierarchical clustering tree construction from noised per-device
//! structural summaries: random bins, Laplace-noised degree vectors, ordered
//! degree matrices, DTW dissimilarity, and average-linkage clustering.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::DeviceView;
use crate::privacy::{noise_counts, RandomSource};

/// Random partition of vertices into `k` non-empty bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinAssignment {
    pub k: usize,
    bin_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

/// Noised per-bin neighbor counts of one vertex. Entries may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector {
    pub entries: Vec<f64>,
}

impl DegreeVector {
    /// Sum of the noised entries, the estimated degree of the vertex.
    pub fn estimated_degree(&self) -> f64 {
        self.entries.iter().sum()
    }
}

/// A vertex's neighbors' degree vectors stacked in ascending estimated-degree
/// order; shape `|N(v)| x k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedDegreeMatrix {
    pub rows: Vec<Vec<f64>>,
    pub row_vertices: Vec<usize>,
}

impl OrderedDegreeMatrix {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    /// Placeholder for a degree-0 vertex: a single all-zero row so DTW stays total.
    pub fn zero_row(k: usize) -> Self {
        OrderedDegreeMatrix {
            rows: vec![vec![0.0; k]],
            row_vertices: Vec::new(),
        }
    }
}

/// Dense symmetric dissimilarity table, stored as a packed lower triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    n: usize,
    // values[i*(i+1)/2 + j] holds (i, j) for j <= i; diagonal is zero.
    values: Vec<f64>,
}

/// Binary hierarchical clustering tree. Nodes `0..n` are leaves (leaf i is
/// vertex i); nodes `n..2n-1` are internal, the last one the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hct {
    num_leaves: usize,
    parent: Vec<usize>, // root points to itself
    children: Vec<(usize, usize)>, // indexed by internal node - num_leaves
    leaf_count: Vec<usize>,
    depth: Vec<usize>,
}

/// Default bin rule: floor(ln |V|), at least 1.
pub fn default_bin_count(num_vertices: usize) -> usize {
    ((num_vertices as f64).ln().floor() as usize).max(1)
}

/// Randomly group vertices into `k` bins, every bin non-empty. The first `k`
/// slots of a shuffled vertex order seed the bins; the rest land uniformly.
pub fn assign_bins(num_vertices: usize, k: usize, rng: &mut RandomSource) -> Result<BinAssignment> {
    if k < 1 || k > num_vertices {
        return Err(Error::BinCountOutOfRange { k, num_vertices });
    }
    let mut order: Vec<usize> = (0..num_vertices).collect();
    rng.shuffle(&mut order);
    let mut bin_of = vec![0usize; num_vertices];
    for (slot, &v) in order.iter().enumerate() {
        bin_of[v] = if slot < k { slot } else { rng.uniform_index(k) };
    }
    let mut members = vec![Vec::new(); k];
    for (v, &b) in bin_of.iter().enumerate() {
        members[b].push(v);
    }
    Ok(BinAssignment { k, bin_of, members })
}

impl BinAssignment {
    pub fn bin_of(&self, vertex: usize) -> usize {
        self.bin_of[vertex]
    }

    pub fn members(&self, bin: usize) -> &[usize] {
        &self.members[bin]
    }

    pub fn num_vertices(&self) -> usize {
        self.bin_of.len()
    }
}

/// Per-bin neighbor counts of `view.vertex`, noised with Laplace(0, 1/epsilon).
pub fn local_degree_vector(
    view: &DeviceView,
    bins: &BinAssignment,
    epsilon: f64,
    rng: &mut RandomSource,
) -> Result<DegreeVector> {
    let mut counts = vec![0u64; bins.k];
    for &u in &view.neighbors {
        counts[bins.bin_of(u)] += 1;
    }
    Ok(DegreeVector {
        entries: noise_counts(&counts, epsilon, rng)?,
    })
}

/// Exact (noise-free) per-bin neighbor counts; the zero-noise reference.
pub fn exact_degree_vector(view: &DeviceView, bins: &BinAssignment) -> DegreeVector {
    let mut counts = vec![0.0; bins.k];
    for &u in &view.neighbors {
        counts[bins.bin_of(u)] += 1.0;
    }
    DegreeVector { entries: counts }
}

/// Stack the neighbors' degree vectors in ascending estimated-degree order,
/// ties by ascending vertex id.
pub fn ordered_degree_matrix(
    view: &DeviceView,
    vectors: &HashMap<usize, DegreeVector>,
) -> Result<OrderedDegreeMatrix> {
    let mut keyed: Vec<(f64, usize)> = Vec::with_capacity(view.neighbors.len());
    for &u in &view.neighbors {
        let vec = vectors
            .get(&u)
            .ok_or(Error::MissingNeighborVector { vertex: u })?;
        keyed.push((vec.estimated_degree(), u));
    }
    keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let row_vertices: Vec<usize> = keyed.iter().map(|&(_, u)| u).collect();
    let rows = row_vertices
        .iter()
        .map(|u| vectors[u].entries.clone())
        .collect();
    Ok(OrderedDegreeMatrix { rows, row_vertices })
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// DTW alignment cost between two ordered degree matrices:
/// `cost(i,j) = min(cost(i-1,j), cost(i,j-1), cost(i-1,j-1)) + ||row_i - row_j'||_1`,
/// with `cost(1,1)` the single L1 distance and the first row/column
/// accumulating along their only predecessor.
pub fn dtw_dissimilarity(a: &OrderedDegreeMatrix, b: &OrderedDegreeMatrix) -> Result<f64> {
    if a.rows.is_empty() || b.rows.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if a.num_cols() != b.num_cols() {
        return Err(Error::ColumnMismatch {
            left: a.num_cols(),
            right: b.num_cols(),
        });
    }
    let (x, y) = (a.rows.len(), b.rows.len());
    let mut prev = vec![0.0f64; y];
    let mut curr = vec![0.0f64; y];
    for i in 0..x {
        for j in 0..y {
            let d = l1(&a.rows[i], &b.rows[j]);
            curr[j] = d + match (i, j) {
                (0, 0) => 0.0,
                (0, _) => curr[j - 1],
                (_, 0) => prev[0],
                _ => prev[j].min(curr[j - 1]).min(prev[j - 1]),
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[y - 1])
}

/// Pairwise DTW over all vertices; only the upper triangle is computed and
/// mirrored. `matrices[v]` must exist for every vertex (degree-0 vertices use
/// [`OrderedDegreeMatrix::zero_row`]).
pub fn dissimilarity_matrix(matrices: &[OrderedDegreeMatrix]) -> Result<DissimilarityMatrix> {
    let n = matrices.len();
    let mut out = DissimilarityMatrix::zeros(n);
    for i in 0..n {
        for j in 0..i {
            let d = dtw_dissimilarity(&matrices[i], &matrices[j])?;
            out.set(i, j, d);
        }
    }
    Ok(out)
}

impl DissimilarityMatrix {
    pub fn zeros(n: usize) -> Self {
        DissimilarityMatrix {
            n,
            values: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    #[inline]
    fn index(&self, u: usize, v: usize) -> usize {
        let (i, j) = if u >= v { (u, v) } else { (v, u) };
        i * (i + 1) / 2 + j
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[self.index(u, v)]
    }

    pub fn set(&mut self, u: usize, v: usize, value: f64) {
        let idx = self.index(u, v);
        self.values[idx] = value;
    }

    /// Payload size in bytes under the 8-bytes-per-real accounting model.
    pub fn payload_bytes(&self) -> usize {
        self.values.len() * 8
    }

    const MAGIC: &'static [u8; 8] = b"FWDISSIM";

    /// Binary row-major lower-triangle file: magic, |V|, k, epsilon, values.
    pub fn save(&self, path: &Path, k: usize, epsilon: f64) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        file.write_all(Self::MAGIC).map_err(io)?;
        file.write_all(&(self.n as u64).to_le_bytes()).map_err(io)?;
        file.write_all(&(k as u64).to_le_bytes()).map_err(io)?;
        file.write_all(&epsilon.to_le_bytes()).map_err(io)?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        file.write_all(&buf).map_err(io)
    }

    /// Returns the matrix together with the stored `(k, epsilon)` metadata.
    pub fn load(path: &Path) -> Result<(Self, usize, f64)> {
        let mut file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut data = Vec::new();
        file.read_to_end(&mut data).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let bad = |message: &str| Error::BadFormat {
            path: path.to_path_buf(),
            message: message.into(),
        };
        if data.len() < 32 || &data[..8] != Self::MAGIC {
            return Err(bad("missing dissimilarity header"));
        }
        let n = u64::from_le_bytes(data[8..16].try_into().unwrap()) as usize;
        let k = u64::from_le_bytes(data[16..24].try_into().unwrap()) as usize;
        let epsilon = f64::from_le_bytes(data[24..32].try_into().unwrap());
        let expected = n * (n + 1) / 2;
        let body = &data[32..];
        if body.len() != expected * 8 {
            return Err(bad("truncated dissimilarity body"));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((DissimilarityMatrix { n, values }, k, epsilon))
    }
}

/// Average-linkage (UPGMA-style) agglomerative clustering over the
/// dissimilarity matrix. Deterministic: among minimum-distance candidate
/// pairs, the lexicographically smallest `(min id, max id)` merges first.
pub fn build_hct(dissim: &DissimilarityMatrix) -> Hct {
    let n = dissim.num_vertices();
    assert!(n >= 1, "cannot cluster an empty vertex set");
    let total_nodes = 2 * n - 1;
    let mut parent: Vec<usize> = (0..total_nodes).collect();
    let mut children: Vec<(usize, usize)> = Vec::with_capacity(n.saturating_sub(1));
    let mut leaf_count = vec![1usize; total_nodes];

    // Active clusters keyed by node id, with pairwise average-linkage distances.
    let mut active: Vec<usize> = (0..n).collect();
    let mut dist: HashMap<(usize, usize), f64> = HashMap::new();
    for i in 0..n {
        for j in 0..i {
            dist.insert((j, i), dissim.get(i, j));
        }
    }
    let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };

    for step in 0..n.saturating_sub(1) {
        // Find the minimum-distance active pair, ties by (min id, max id).
        let mut best: Option<((usize, usize), f64)> = None;
        for ai in 0..active.len() {
            for bi in 0..ai {
                let pair = key(active[bi], active[ai]);
                let d = dist[&pair];
                let better = match best {
                    None => true,
                    Some((bp, bd)) => d < bd || (d == bd && pair < bp),
                };
                if better {
                    best = Some((pair, d));
                }
            }
        }
        let ((a, b), _) = best.expect("at least two active clusters");
        let merged = n + step;
        parent[a] = merged;
        parent[b] = merged;
        children.push((a, b));
        leaf_count[merged] = leaf_count[a] + leaf_count[b];

        // Lance-Williams average-linkage update.
        active.retain(|&c| c != a && c != b);
        let (wa, wb) = (leaf_count[a] as f64, leaf_count[b] as f64);
        for &c in &active {
            let da = dist[&key(a, c)];
            let db = dist[&key(b, c)];
            dist.insert(key(merged, c), (wa * da + wb * db) / (wa + wb));
        }
        active.push(merged);
    }

    let mut depth = vec![0usize; total_nodes];
    // Depths walk down from the root; children always have smaller ids than
    // their parent, so a reverse scan suffices.
    for node in (0..total_nodes).rev() {
        if node >= n {
            let (l, r) = children[node - n];
            depth[l] = depth[node] + 1;
            depth[r] = depth[node] + 1;
        }
    }

    Hct {
        num_leaves: n,
        parent,
        children,
        leaf_count,
        depth,
    }
}

impl Hct {
    pub fn num_leaves(&self) -> usize {
        self.num_leaves
    }

    pub fn num_internal(&self) -> usize {
        self.children.len()
    }

    pub fn root(&self) -> usize {
        if self.num_leaves == 1 {
            0
        } else {
            2 * self.num_leaves - 2
        }
    }

    pub fn children_of(&self, internal: usize) -> (usize, usize) {
        self.children[internal - self.num_leaves]
    }

    /// Leaves in the subtree rooted at `node` (1 for a leaf).
    pub fn subtree_leaves(&self, node: usize) -> usize {
        self.leaf_count[node]
    }

    fn check_leaf(&self, v: usize) -> Result<()> {
        if v < self.num_leaves {
            Ok(())
        } else {
            Err(Error::UnknownVertex { vertex: v })
        }
    }

    /// Least common ancestor of two leaves.
    pub fn lca(&self, v1: usize, v2: usize) -> Result<usize> {
        self.check_leaf(v1)?;
        self.check_leaf(v2)?;
        let (mut a, mut b) = (v1, v2);
        while self.depth[a] > self.depth[b] {
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b];
        }
        while a != b {
            a = self.parent[a];
            b = self.parent[b];
        }
        Ok(a)
    }

    /// Number of leaves under the subtree rooted at the LCA of `v1` and `v2`.
    pub fn lca_leaf_count(&self, v1: usize, v2: usize) -> Result<usize> {
        Ok(self.leaf_count[self.lca(v1, v2)?])
    }

    /// Edges on the leaf-to-leaf path.
    pub fn tree_distance(&self, v1: usize, v2: usize) -> Result<usize> {
        let lca = self.lca(v1, v2)?;
        Ok(self.depth[v1] + self.depth[v2] - 2 * self.depth[lca])
    }

    /// Serialized size in bytes under the 4-bytes-per-id accounting model
    /// (two child ids per internal node).
    pub fn payload_bytes(&self) -> usize {
        self.num_internal() * 2 * 4
    }

    /// Text form: one `leaf <vertex>` line per leaf, then
    /// `<node> <left> <right>` per internal node.
    pub fn save<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for v in 0..self.num_leaves {
            writeln!(w, "leaf {v}")?;
        }
        for (i, (l, r)) in self.children.iter().enumerate() {
            writeln!(w, "{} {} {}", self.num_leaves + i, l, r)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let bad = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut num_leaves = 0usize;
        let mut children: Vec<(usize, usize)> = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = text.split_whitespace().collect();
            match toks.as_slice() {
                ["leaf", v] => {
                    let v: usize = v
                        .parse()
                        .map_err(|_| bad(idx + 1, format!("bad leaf id {v:?}")))?;
                    if v != num_leaves {
                        return Err(bad(idx + 1, "leaves must be listed in order".into()));
                    }
                    num_leaves += 1;
                }
                [node, l, r] => {
                    let parse = |t: &str| {
                        t.parse::<usize>()
                            .map_err(|_| bad(idx + 1, format!("bad node id {t:?}")))
                    };
                    let (node, l, r) = (parse(node)?, parse(l)?, parse(r)?);
                    if node != num_leaves + children.len() {
                        return Err(bad(idx + 1, "internal nodes must be listed in order".into()));
                    }
                    children.push((l, r));
                }
                _ => return Err(bad(idx + 1, "expected `leaf v` or `node l r`".into())),
            }
        }
        if num_leaves == 0 || children.len() + 1 != num_leaves {
            return Err(Error::BadFormat {
                path: path.to_path_buf(),
                message: format!(
                    "tree shape mismatch: {} leaves, {} internal nodes",
                    num_leaves,
                    children.len()
                ),
            });
        }
        let total = 2 * num_leaves - 1;
        let mut parent: Vec<usize> = (0..total).collect();
        let mut leaf_count = vec![1usize; total];
        for (i, &(l, r)) in children.iter().enumerate() {
            let node = num_leaves + i;
            parent[l] = node;
            parent[r] = node;
            leaf_count[node] = leaf_count[l] + leaf_count[r];
        }
        let mut depth = vec![0usize; total];
        for node in (num_leaves..total).rev() {
            let (l, r) = children[node - num_leaves];
            depth[l] = depth[node] + 1;
            depth[r] = depth[node] + 1;
        }
        Ok(Hct {
            num_leaves,
            parent,
            children,
            leaf_count,
            depth,
        })
    }
}

/// Upper bound on the expected dissimilarity inflation caused by the
/// Laplace noise: `3 k (max_degree)^2 / (2 epsilon)`.
pub fn noise_inflation_bound(k: usize, max_degree: usize, epsilon: f64) -> f64 {
    3.0 * k as f64 * (max_degree as f64).powi(2) / (2.0 * epsilon)
}
