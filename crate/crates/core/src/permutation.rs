//! Bandwidth and XOR-colour statistics of sparsity patterns, and node
//! reordering by reverse Cuthill-McKee.
//!
//! A narrow band means few colours: every entry `(i, j)` with `|i − j| ≤ k`
//! has `i ⊕ j` drawn from `O(k log n)` values, so permuting the grid first
//! directly cuts the number of measurement circuits.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{Bound, QcqpProblem};
use crate::linalg::SparseMatrix;
use crate::{rng, Error, Result};

/// Symmetric set of `(row, col)` positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    entries: BTreeSet<(usize, usize)>,
}

impl SparsityPattern {
    /// Builds a pattern; transposed positions are added automatically.
    pub fn new(n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, j) in entries {
            if i >= n || j >= n {
                return Err(Error::validation(format!("pattern entry ({i}, {j}) outside {n}x{n}")));
            }
            set.insert((i, j));
            set.insert((j, i));
        }
        Ok(SparsityPattern { n, entries: set })
    }

    pub fn of_matrix(m: &SparseMatrix) -> Self {
        Self::new(m.dim(), m.entries().iter().map(|&(r, c, _)| (r, c))).expect("matrix indices in range")
    }

    /// Union of the patterns of `M₀` and every constraint matrix.
    pub fn of_problem(problem: &QcqpProblem) -> Self {
        let mut p = Self::of_matrix(&problem.m0);
        for c in &problem.constraints {
            p.entries.extend(c.matrix.entries().iter().map(|&(r, c, _)| (r, c)));
        }
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.iter().copied()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.entries.contains(&(i, j))
    }

    pub fn is_subset_of(&self, other: &SparsityPattern) -> bool {
        self.entries.is_subset(&other.entries)
    }

    /// Off-diagonal entries only.
    pub fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries().filter(|(i, j)| i != j)
    }

    /// Zero-extends to dimension `n`.
    pub fn padded(&self, n: usize) -> Self {
        assert!(n >= self.n);
        SparsityPattern { n, entries: self.entries.clone() }
    }

    pub fn permuted(&self, perm: &NodePermutation) -> Self {
        assert_eq!(perm.len(), self.n, "permutation length mismatch");
        let f = &perm.forward;
        SparsityPattern { n: self.n, entries: self.entries.iter().map(|&(i, j)| (f[i], f[j])).collect() }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (i, j) in self.off_diagonal() {
            adj[i].push(j);
        }
        adj
    }
}

/// `forward[old] = new`, `inverse[new] = old`. Serialized as the forward map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPermutation", into = "RawPermutation")]
pub struct NodePermutation {
    pub forward: Vec<usize>,
    pub inverse: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawPermutation {
    forward: Vec<usize>,
}

impl TryFrom<RawPermutation> for NodePermutation {
    type Error = Error;

    fn try_from(raw: RawPermutation) -> Result<Self> {
        NodePermutation::from_forward(raw.forward)
    }
}

impl From<NodePermutation> for RawPermutation {
    fn from(p: NodePermutation) -> Self {
        RawPermutation { forward: p.forward }
    }
}

impl NodePermutation {
    pub fn identity(n: usize) -> Self {
        NodePermutation { forward: (0..n).collect(), inverse: (0..n).collect() }
    }

    pub fn from_forward(forward: Vec<usize>) -> Result<Self> {
        let mut inverse = vec![usize::MAX; forward.len()];
        for (old, &new) in forward.iter().enumerate() {
            if new >= forward.len() || inverse[new] != usize::MAX {
                return Err(Error::validation("forward map is not a bijection"));
            }
            inverse[new] = old;
        }
        Ok(NodePermutation { forward, inverse })
    }

    /// From the visiting order (`order[new] = old`).
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let mut forward = vec![usize::MAX; order.len()];
        for (new, &old) in order.iter().enumerate() {
            if old >= order.len() || forward[old] != usize::MAX {
                return Err(Error::validation("order is not a bijection"));
            }
            forward[old] = new;
        }
        Ok(NodePermutation { forward, inverse: order })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Appends fixed indices `len..n` (padding stays after the real nodes).
    pub fn extended(&self, n: usize) -> Self {
        assert!(n >= self.len());
        let mut p = self.clone();
        p.forward.extend(self.len()..n);
        p.inverse.extend(self.len()..n);
        p
    }

    /// `(Px)[forward[i]] = x[i]`.
    pub fn apply<T: Clone>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.len());
        self.inverse.iter().map(|&old| x[old].clone()).collect()
    }

    /// Undoes [`apply`](Self::apply).
    pub fn unapply<T: Clone>(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.len());
        self.forward.iter().map(|&new| y[new].clone()).collect()
    }
}

/// `max |i − j|` over entries; 0 for an empty or diagonal pattern.
pub fn bandwidth(pattern: &SparsityPattern) -> usize {
    pattern.entries().map(|(i, j)| i.abs_diff(j)).max().unwrap_or(0)
}

/// `{ i ⊕ j }` over entries. Requires a power-of-two dimension.
pub fn color_set(pattern: &SparsityPattern) -> Result<BTreeSet<usize>> {
    if !pattern.n.is_power_of_two() {
        return Err(Error::validation(format!("colour sets need a power-of-two dimension, got {}", pattern.n)));
    }
    Ok(pattern.entries().map(|(i, j)| i ^ j).collect())
}

/// Reverse Cuthill-McKee from `start`. Neighbours are queued by ascending
/// degree, ties by ascending index.
pub fn rcm_order(pattern: &SparsityPattern, start: usize) -> Result<NodePermutation> {
    let n = pattern.n;
    if start >= n {
        return Err(Error::validation(format!("start node {start} out of range")));
    }
    let adj = pattern.adjacency();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([start]);
    visited[start] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        let mut next: Vec<usize> = adj[u].iter().copied().filter(|&w| !visited[w]).collect();
        next.sort_by_key(|&w| (degree[w], w));
        for w in next {
            visited[w] = true;
            queue.push_back(w);
        }
    }
    if let Some(missing) = visited.iter().position(|&v| !v) {
        return Err(Error::validation(format!("pattern is disconnected: node {missing} is unreachable from node {start}")));
    }
    order.reverse();
    NodePermutation::from_order(order)
}

/// Best of `runs` RCM orderings from seeded uniform start nodes (drawn with
/// replacement). Run `r` uses the stream `derive(seed, r)`; ties go to the
/// lowest run index, so the result does not depend on scheduling.
pub fn best_rcm(pattern: &SparsityPattern, runs: usize, seed: u64) -> Result<NodePermutation> {
    if runs == 0 {
        return Err(Error::validation("best_rcm needs at least one run"));
    }
    let n = pattern.n;
    let results: Vec<Result<(usize, usize, NodePermutation)>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let start = rng::derived_rng(seed, r as u64).random_range(0..n);
            let perm = rcm_order(pattern, start)?;
            Ok((bandwidth(&pattern.permuted(&perm)), r, perm))
        })
        .collect();
    let mut best: Option<(usize, usize, NodePermutation)> = None;
    for res in results {
        let cand = res?;
        if best.as_ref().is_none_or(|b| (cand.0, cand.1) < (b.0, b.1)) {
            best = Some(cand);
        }
    }
    Ok(best.expect("runs >= 1").2)
}

/// Start node drawn by run `r` of [`best_rcm`].
pub fn rcm_start(n: usize, seed: u64, run: usize) -> usize {
    rng::derived_rng(seed, run as u64).random_range(0..n)
}

/// Conjugates every matrix by the permutation; bounds and order unchanged.
pub fn permute_problem(problem: &QcqpProblem, perm: &NodePermutation) -> Result<QcqpProblem> {
    if perm.len() != problem.dim() {
        return Err(Error::dimension(format!("permutation of length {} for a {}-dimensional problem", perm.len(), problem.dim())));
    }
    Ok(QcqpProblem {
        n: problem.n,
        m0: problem.m0.permuted(&perm.forward),
        objective_offset: problem.objective_offset,
        constraints: problem
            .constraints
            .iter()
            .map(|c| Bound { matrix: c.matrix.permuted(&perm.forward), bound: c.bound })
            .collect(),
        labels: problem.labels.clone(),
    })
}

/// Pattern of an `n × n` band of half-width `k`.
pub fn banded_pattern(n: usize, k: usize) -> SparsityPattern {
    SparsityPattern::new(n, (0..n).flat_map(|i| (i..n.min(i + k + 1)).map(move |j| (i, j)))).expect("in range")
}
