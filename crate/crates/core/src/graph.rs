//! DAG information structures: transitive closure, ancestor/descendant sets,
//! block partitions and closure-conformant submatrices.
//!
//! Nodes are indexed `0..N` and the index order must already be a
//! topological order, so every closure matrix is lower triangular.

use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;

/// Default absolute tolerance on a forbidden block's spectral norm.
pub const DEFAULT_SPARSITY_TOL: f64 = 1e-9;

/// Dimensions of consecutive blocks of a partitioned vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Structure(format!("block {i} has size zero")));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        Ok(BlockPartition { sizes, offsets })
    }

    /// Partition into `n` blocks of size one.
    pub fn unit(n: usize) -> Self {
        BlockPartition {
            sizes: vec![1; n],
            offsets: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn size(&self, block: usize) -> usize {
        self.sizes[block]
    }

    pub fn offset(&self, block: usize) -> usize {
        self.offsets[block]
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn range(&self, block: usize) -> std::ops::Range<usize> {
        self.offsets[block]..self.offsets[block] + self.sizes[block]
    }

    /// Scalar indices covered by `blocks`, in the given block order.
    pub fn indices(&self, blocks: &[usize]) -> Vec<usize> {
        blocks.iter().flat_map(|&b| self.range(b)).collect()
    }

    /// Total dimension of a subset of blocks.
    pub fn dim_of(&self, blocks: &[usize]) -> usize {
        blocks.iter().map(|&b| self.sizes[b]).sum()
    }

    /// Partition restricted to `blocks`.
    pub fn restrict(&self, blocks: &[usize]) -> BlockPartition {
        BlockPartition::new(blocks.iter().map(|&b| self.sizes[b]).collect())
            .expect("sizes already validated")
    }
}

/// Directed acyclic graph whose node order is topological.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    state_part: BlockPartition,
    input_part: BlockPartition,
}

impl Dag {
    /// Builds a DAG from edges `(from, to)`.
    ///
    /// Rejects cycles, edges with `from >= to` (node order is not
    /// topological), out-of-range endpoints and zero block sizes.
    pub fn new(
        node_count: usize,
        edges: Vec<(usize, usize)>,
        state_sizes: Vec<usize>,
        input_sizes: Vec<usize>,
    ) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::Structure("graph has no nodes".into()));
        }
        if state_sizes.len() != node_count || input_sizes.len() != node_count {
            return Err(Error::Structure(format!(
                "expected {node_count} state and input block sizes, got {} and {}",
                state_sizes.len(),
                input_sizes.len()
            )));
        }
        for &(from, to) in &edges {
            for v in [from, to] {
                if v >= node_count {
                    return Err(Error::NodeOutOfRange {
                        index: v,
                        count: node_count,
                    });
                }
            }
        }
        if let Some(cycle_node) = find_cycle(node_count, &edges) {
            return Err(Error::Structure(format!(
                "cycle detected through node {cycle_node}"
            )));
        }
        if let Some(&(from, to)) = edges.iter().find(|(f, t)| f >= t) {
            return Err(Error::Structure(format!(
                "edge {from} -> {to} violates the topological node order"
            )));
        }
        let state_part = BlockPartition::new(state_sizes)
            .map_err(|e| Error::Structure(format!("state partition: {e}")))?;
        let input_part = BlockPartition::new(input_sizes)
            .map_err(|e| Error::Structure(format!("input partition: {e}")))?;
        Ok(Dag {
            node_count,
            edges,
            state_part,
            input_part,
        })
    }

    /// DAG with unit state and input blocks.
    pub fn with_unit_blocks(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        Dag::new(node_count, edges, vec![1; node_count], vec![1; node_count])
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn state_partition(&self) -> &BlockPartition {
        &self.state_part
    }

    pub fn input_partition(&self) -> &BlockPartition {
        &self.input_part
    }
}

fn find_cycle(n: usize, edges: &[(usize, usize)]) -> Option<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(f, t) in edges {
        adj[f].push(t);
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    for root in 0..n {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some((v, next)) = stack.pop() {
            if next < adj[v].len() {
                stack.push((v, next + 1));
                let w = adj[v][next];
                match state[w] {
                    0 => {
                        state[w] = 1;
                        stack.push((w, 0));
                    }
                    1 => return Some(w),
                    _ => {}
                }
            } else {
                state[v] = 2;
            }
        }
    }
    None
}

/// Reflexive-transitive closure of a DAG.
///
/// `reach(i, j)` is true when there is a directed path from `j` to `i`
/// (including `i == j`), matching the lower-triangular adjacency layout
/// used for block sparsity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureTable {
    n: usize,
    s: Vec<bool>,
    anc: Vec<Vec<usize>>,
    des: Vec<Vec<usize>>,
}

impl ClosureTable {
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// `S[i][j]`: node `j` is an ancestor of node `i`.
    pub fn reach(&self, i: usize, j: usize) -> bool {
        self.s[i * self.n + j]
    }

    /// Closure as a dense 0/1 matrix.
    pub fn matrix(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.reach(i, j) as u8).collect())
            .collect()
    }

    /// Ancestors of `i` including `i`, increasing.
    pub fn ancestors(&self, i: usize) -> Result<&[usize]> {
        self.check(i)?;
        Ok(&self.anc[i])
    }

    /// Descendants of `i` including `i`, increasing.
    pub fn descendants(&self, i: usize) -> Result<&[usize]> {
        self.check(i)?;
        Ok(&self.des[i])
    }

    /// Descendants of `i` excluding `i`.
    pub fn strict_descendants(&self, i: usize) -> Result<&[usize]> {
        Ok(&self.descendants(i)?[1..])
    }

    /// Ancestors of `i` excluding `i`.
    pub fn strict_ancestors(&self, i: usize) -> Result<&[usize]> {
        let a = self.ancestors(i)?;
        Ok(&a[..a.len() - 1])
    }

    /// Closure restricted to an ordered node subset.
    pub fn restrict(&self, nodes: &[usize]) -> Vec<Vec<bool>> {
        nodes
            .iter()
            .map(|&i| nodes.iter().map(|&j| self.reach(i, j)).collect())
            .collect()
    }

    fn check(&self, i: usize) -> Result<()> {
        if i >= self.n {
            Err(Error::NodeOutOfRange {
                index: i,
                count: self.n,
            })
        } else {
            Ok(())
        }
    }
}

/// Computes the closure by one pass in topological order: the ancestor row
/// of node `i` is the union of its parents' rows plus `i` itself.
pub fn transitive_closure(dag: &Dag) -> ClosureTable {
    let n = dag.node_count();
    let mut s = vec![false; n * n];
    let mut parents = vec![Vec::new(); n];
    for &(f, t) in dag.edges() {
        parents[t].push(f);
    }
    for i in 0..n {
        s[i * n + i] = true;
        for &p in &parents[i] {
            for j in 0..=p {
                if s[p * n + j] {
                    s[i * n + j] = true;
                }
            }
        }
    }
    let anc = (0..n)
        .map(|i| (0..n).filter(|&j| s[i * n + j]).collect())
        .collect();
    let des = (0..n)
        .map(|j| (0..n).filter(|&i| s[i * n + j]).collect())
        .collect();
    ClosureTable { n, s, anc, des }
}

/// Block submatrix of `m` on the given node rows and columns, blocks
/// concatenated in the order given.
pub fn extract_submatrix<N: ComplexField>(
    m: &DMatrix<N>,
    rows: &[usize],
    cols: &[usize],
    row_part: &BlockPartition,
    col_part: &BlockPartition,
) -> Result<DMatrix<N>> {
    if m.nrows() != row_part.total() || m.ncols() != col_part.total() {
        return Err(Error::Dimension(format!(
            "matrix is {}x{} but partitions total {}x{}",
            m.nrows(),
            m.ncols(),
            row_part.total(),
            col_part.total()
        )));
    }
    for &b in rows {
        if b >= row_part.len() {
            return Err(Error::NodeOutOfRange {
                index: b,
                count: row_part.len(),
            });
        }
    }
    for &b in cols {
        if b >= col_part.len() {
            return Err(Error::NodeOutOfRange {
                index: b,
                count: col_part.len(),
            });
        }
    }
    let ri = row_part.indices(rows);
    let ci = col_part.indices(cols);
    Ok(DMatrix::from_fn(ri.len(), ci.len(), |r, c| {
        m[(ri[r], ci[c])].clone()
    }))
}

/// Block row of the identity on `set` that picks out node `i`'s block.
pub fn embedding_selector<N: ComplexField>(
    i: usize,
    set: &[usize],
    part: &BlockPartition,
) -> Result<DMatrix<N>> {
    let pos = set
        .iter()
        .position(|&v| v == i)
        .ok_or_else(|| Error::InvalidArgument(format!("node {i} is not in {set:?}")))?;
    if let Some(&bad) = set.iter().find(|&&v| v >= part.len()) {
        return Err(Error::NodeOutOfRange {
            index: bad,
            count: part.len(),
        });
    }
    let width = part.dim_of(set);
    let offset = part.dim_of(&set[..pos]);
    let h = part.size(i);
    let mut sel = DMatrix::zeros(h, width);
    for k in 0..h {
        sel[(k, offset + k)] = N::one();
    }
    Ok(sel)
}

/// A forbidden block carrying a non-negligible norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockViolation {
    pub row: usize,
    pub col: usize,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparsityReport {
    pub violations: Vec<BlockViolation>,
}

impl SparsityReport {
    pub fn is_conformant(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every block `(i, j)` with `S[i][j] = 0` whose spectral norm exceeds
/// `tol`.
pub fn validate_sparsity<N: ComplexField>(
    m: &DMatrix<N>,
    closure: &ClosureTable,
    row_part: &BlockPartition,
    col_part: &BlockPartition,
    tol: f64,
) -> Result<SparsityReport>
where
    N::RealField: num_traits::ToPrimitive,
{
    if m.nrows() != row_part.total() || m.ncols() != col_part.total() {
        return Err(Error::Dimension(format!(
            "matrix is {}x{} but partitions total {}x{}",
            m.nrows(),
            m.ncols(),
            row_part.total(),
            col_part.total()
        )));
    }
    let n = closure.node_count();
    if row_part.len() != n || col_part.len() != n {
        return Err(Error::Dimension(format!(
            "partitions have {} and {} blocks for {n} nodes",
            row_part.len(),
            col_part.len()
        )));
    }
    let mut violations = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if closure.reach(i, j) {
                continue;
            }
            let block = m
                .view(
                    (row_part.offset(i), col_part.offset(j)),
                    (row_part.size(i), col_part.size(j)),
                )
                .into_owned();
            let norm = num_traits::ToPrimitive::to_f64(&spectral_norm(&block)).unwrap_or(f64::NAN);
            if !(norm <= tol) {
                violations.push(BlockViolation { row: i, col: j, norm });
            }
        }
    }
    Ok(SparsityReport { violations })
}
