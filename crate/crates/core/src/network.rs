//! Graph topologies, combination matrices and Perron eigenvectors.
//!
//! Matrices are indexed `(l, k)`: entry `a[l][k]` is the weight agent `k`
//! places on information received from neighbour `l`. Combination matrices
//! are left-stochastic (every column sums to one), so the Perron vector is
//! the right eigenvector `A pi = pi`.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AslError, Result};

/// Directed topology; `edge(l, k)` is true when `l` may send to `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency {
    n: usize,
    edges: Vec<bool>,
}

impl Adjacency {
    /// Graph on `n` agents with no edges and no self-loops.
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(AslError::TopologyInvalid("agent count must be at least 1".into()));
        }
        Ok(Self { n, edges: vec![false; n * n] })
    }

    /// Complete graph with self-loops.
    pub fn complete(n: usize) -> Result<Self> {
        let mut adj = Self::empty(n)?;
        adj.edges.iter_mut().for_each(|e| *e = true);
        Ok(adj)
    }

    /// Star graph with agent 0 as the hub and self-loops everywhere.
    pub fn star(n: usize) -> Result<Self> {
        let mut adj = Self::empty(n)?;
        for k in 0..n {
            adj.set(k, k, true);
            adj.set_undirected(0, k, true);
        }
        Ok(adj)
    }

    /// Directed ring `0 -> 1 -> ... -> n-1 -> 0`, optionally with self-loops.
    pub fn directed_cycle(n: usize, self_loops: bool) -> Result<Self> {
        let mut adj = Self::empty(n)?;
        for k in 0..n {
            adj.set(k, (k + 1) % n, true);
            if self_loops {
                adj.set(k, k, true);
            }
        }
        Ok(adj)
    }

    /// Build from a dense row-major boolean matrix.
    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let n = rows.len();
        let mut adj = Self::empty(n)?;
        for (l, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(AslError::TopologyInvalid(format!(
                    "row {l} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (k, &e) in row.iter().enumerate() {
                adj.set(l, k, e);
            }
        }
        Ok(adj)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge(&self, l: usize, k: usize) -> bool {
        self.edges[l * self.n + k]
    }

    pub fn set(&mut self, l: usize, k: usize, present: bool) {
        self.edges[l * self.n + k] = present;
    }

    pub fn set_undirected(&mut self, l: usize, k: usize, present: bool) {
        self.set(l, k, present);
        self.set(k, l, present);
    }

    pub fn self_loop(&self, k: usize) -> bool {
        self.edge(k, k)
    }

    /// Neighbourhood of `k`: every `l` with an edge `l -> k` (including `k`
    /// itself when it has a self-loop).
    pub fn neighbors(&self, k: usize) -> Vec<usize> {
        (0..self.n).filter(|&l| self.edge(l, k)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|l| (0..l).all(|k| self.edge(l, k) == self.edge(k, l)))
    }

    pub fn rows(&self) -> Vec<Vec<bool>> {
        (0..self.n).map(|l| (0..self.n).map(|k| self.edge(l, k)).collect()).collect()
    }

    fn reachable_from(&self, start: usize, forward: bool) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            for v in 0..self.n {
                let e = if forward { self.edge(u, v) } else { self.edge(v, u) };
                if e && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

/// True iff the directed graph is strongly connected and at least one agent
/// has a self-loop, which together make any compatible combination matrix
/// primitive.
pub fn check_strong_connectivity(adj: &Adjacency) -> bool {
    let has_loop = (0..adj.n()).any(|k| adj.self_loop(k));
    has_loop
        && adj.reachable_from(0, true).iter().all(|&r| r)
        && adj.reachable_from(0, false).iter().all(|&r| r)
}

/// Left-stochastic matrix of combination weights, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CombinationMatrix {
    pub const COLUMN_TOL: f64 = 1e-12;

    /// Wrap and validate a dense matrix (rows indexed by sender `l`).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Self::from_rows_unchecked(rows)?;
        m.validate()?;
        Ok(m)
    }

    fn from_rows_unchecked(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(AslError::InvalidMatrix("empty matrix".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (l, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(AslError::InvalidMatrix(format!(
                    "row {l} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let rows: Vec<Vec<f64>> =
            (0..n).map(|l| (0..n).map(|k| if l == k { 1.0 } else { 0.0 }).collect()).collect();
        Self::from_rows(&rows)
    }

    /// Nonnegative entries and unit column sums.
    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self.data.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(AslError::InvalidMatrix(format!("entry {bad} is negative or non-finite")));
        }
        for k in 0..self.n {
            let s = self.column_sum(k);
            if (s - 1.0).abs() > Self::COLUMN_TOL {
                return Err(AslError::InvalidMatrix(format!("column {k} sums to {s}")));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.data[l * self.n + k]
    }

    pub fn column_sum(&self, k: usize) -> f64 {
        (0..self.n).map(|l| self.get(l, k)).sum()
    }

    pub fn row_sum(&self, l: usize) -> f64 {
        self.data[l * self.n..(l + 1) * self.n].iter().sum()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|c| c.to_vec()).collect()
    }

    /// Topology implied by the strictly positive entries.
    pub fn support(&self) -> Adjacency {
        let mut adj = Adjacency::empty(self.n).expect("n >= 1");
        for l in 0..self.n {
            for k in 0..self.n {
                adj.set(l, k, self.get(l, k) > 0.0);
            }
        }
        adj
    }

    /// `A v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.data.chunks(self.n).map(|row| row.iter().zip(v).map(|(a, x)| a * x).sum()).collect()
    }

    /// Sparse column view: for each receiver `k`, the list of `(l, a[l][k])`
    /// with positive weight.
    pub fn in_weights(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.n)
            .map(|k| {
                (0..self.n).filter_map(|l| {
                    let w = self.get(l, k);
                    (w > 0.0).then_some((l, w))
                })
                .collect()
            })
            .collect()
    }

    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        (0..self.n).all(|l| (self.row_sum(l) - 1.0).abs() <= tol)
            && (0..self.n).all(|k| (self.column_sum(k) - 1.0).abs() <= tol)
    }
}

/// Strictly positive probability vector fixed by a combination matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PerronVector(Vec<f64>);

impl PerronVector {
    pub const SUM_TOL: f64 = 1e-12;

    /// Validate a weight vector: entries strictly positive, sum one.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(weights, Self::SUM_TOL)
    }

    pub fn with_tolerance(weights: Vec<f64>, tol: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(AslError::InvalidMatrix("empty Perron vector".into()));
        }
        if let Some(k) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(AslError::InvalidMatrix(format!(
                "Perron entry {k} = {} is not strictly positive",
                weights[k]
            )));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > tol {
            return Err(AslError::InvalidMatrix(format!("Perron vector sums to {s}")));
        }
        Ok(Self(weights))
    }

    /// Normalize an arbitrary positive vector to sum one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        Self::new(weights.into_iter().map(|w| w / s).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for PerronVector {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

pub const PERRON_TOL: f64 = 1e-12;
pub const PERRON_MAX_ITER: usize = 100_000;

/// Power iteration for the Perron eigenvector of a left-stochastic matrix.
pub fn perron_eigenvector(a: &CombinationMatrix, tol: f64, max_iter: usize) -> Result<PerronVector> {
    a.validate()?;
    if !check_strong_connectivity(&a.support()) {
        return Err(AslError::NotPrimitive(
            "support is not strongly connected or has no self-loop".into(),
        ));
    }
    let n = a.n();
    let mut pi = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut next = a.apply(&pi);
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        let check = a.apply(&next);
        residual = check.iter().zip(&next).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        pi = next;
        if residual <= tol {
            // The residual understates the distance to the fixed point by the
            // spectral gap; keep iterating while it still shrinks.
            for _ in 0..10_000 {
                let mut next = a.apply(&pi);
                let s: f64 = next.iter().sum();
                next.iter_mut().for_each(|x| *x /= s);
                let check = a.apply(&next);
                let r = check.iter().zip(&next).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                if r >= residual {
                    break;
                }
                pi = next;
                residual = r;
                if residual <= 1e-3 * tol {
                    break;
                }
            }
            if let Some(k) = pi.iter().position(|&x| x <= 0.0) {
                return Err(AslError::NotPrimitive(format!("entry {k} vanished at convergence")));
            }
            return PerronVector::with_tolerance(pi, 1e-12);
        }
    }
    Err(AslError::NonConvergence { iterations: max_iter, residual })
}

fn random_initial<R: Rng + ?Sized>(adj: &Adjacency, rng: &mut R) -> Vec<Vec<f64>> {
    let n = adj.n();
    let mut rows = vec![vec![0.0; n]; n];
    for (l, row) in rows.iter_mut().enumerate() {
        for (k, w) in row.iter_mut().enumerate() {
            if adj.edge(l, k) {
                *w = rng.random_range(0.1..1.0);
            }
        }
    }
    rows
}

fn normalize_columns(rows: &mut [Vec<f64>]) {
    let n = rows.len();
    for k in 0..n {
        let s: f64 = rows.iter().map(|r| r[k]).sum();
        rows.iter_mut().for_each(|r| r[k] /= s);
    }
}

fn require_connected(adj: &Adjacency) -> Result<()> {
    if check_strong_connectivity(adj) {
        Ok(())
    } else {
        Err(AslError::TopologyInvalid(
            "graph must be strongly connected with at least one self-loop".into(),
        ))
    }
}

/// Random weights on the allowed entries, normalized column by column.
pub fn gen_left_stochastic<R: Rng + ?Sized>(adj: &Adjacency, rng: &mut R) -> Result<CombinationMatrix> {
    require_connected(adj)?;
    let mut rows = random_initial(adj, rng);
    normalize_columns(&mut rows);
    CombinationMatrix::from_rows(&rows)
}

pub const SINKHORN_TOL: f64 = 1e-10;

/// Random weights balanced to unit row and column sums by alternating
/// row and column normalization.
pub fn gen_doubly_stochastic<R: Rng + ?Sized>(
    adj: &Adjacency,
    rng: &mut R,
    tol: f64,
    max_iter: usize,
) -> Result<CombinationMatrix> {
    require_connected(adj)?;
    let mut rows = random_initial(adj, rng);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        for row in rows.iter_mut() {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|w| *w /= s);
            }
        }
        normalize_columns(&mut rows);
        // Columns are exact after the last step; only rows can drift.
        residual = rows
            .iter()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        if residual <= tol {
            return CombinationMatrix::from_rows(&rows);
        }
    }
    Err(AslError::NonConvergence { iterations: max_iter, residual })
}

/// Combination matrix on an undirected topology whose Perron eigenvector is
/// the prescribed `pi`: off-diagonal weights `a[l][k] = pi[l]` for
/// neighbours, diagonal entries absorb the remaining mass.
///
/// For a normalized `pi` every diagonal entry is at least `pi[k]`, so the
/// construction only fails when the inputs violate their preconditions.
pub fn matrix_from_eigenvector(adj: &Adjacency, pi: &PerronVector) -> Result<CombinationMatrix> {
    let n = adj.n();
    if pi.len() != n {
        return Err(AslError::InvalidMatrix(format!(
            "Perron vector has {} entries for {n} agents",
            pi.len()
        )));
    }
    if !adj.is_symmetric() || !(0..n).all(|k| adj.self_loop(k)) {
        return Err(AslError::TopologyInvalid(
            "eigenvector-prescribed synthesis needs an undirected graph with all self-loops".into(),
        ));
    }
    let mut rows = vec![vec![0.0; n]; n];
    let mut bad = Vec::new();
    for k in 0..n {
        let mut off = 0.0;
        for l in 0..n {
            if l != k && adj.edge(l, k) {
                rows[l][k] = pi[l];
                off += pi[l];
            }
        }
        let diag = 1.0 - off;
        if diag <= 0.0 {
            bad.push(k);
        }
        rows[k][k] = diag;
    }
    if !bad.is_empty() {
        return Err(AslError::EigenvectorIncompatible { agents: bad });
    }
    CombinationMatrix::from_rows(&rows)
}

/// Uniform averaging rule `a[l][k] = 1 / |N_k|`.
pub fn uniform_averaging(adj: &Adjacency) -> Result<CombinationMatrix> {
    let n = adj.n();
    let mut rows = vec![vec![0.0; n]; n];
    for k in 0..n {
        let nb = adj.neighbors(k);
        if nb.is_empty() {
            return Err(AslError::TopologyInvalid(format!("agent {k} has no neighbours")));
        }
        let w = 1.0 / nb.len() as f64;
        for l in nb {
            rows[l][k] = w;
        }
    }
    CombinationMatrix::from_rows(&rows)
}

pub const ER_ATTEMPTS: usize = 100;

/// Undirected Erdős–Rényi graph with all self-loops, redrawn until connected.
pub fn gen_erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Adjacency> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(AslError::DomainError(format!("edge probability {p} not in (0, 1]")));
    }
    for _ in 0..ER_ATTEMPTS {
        let mut adj = Adjacency::empty(n)?;
        for k in 0..n {
            adj.set(k, k, true);
            for l in 0..k {
                if rng.random::<f64>() < p {
                    adj.set_undirected(l, k, true);
                }
            }
        }
        if check_strong_connectivity(&adj) {
            return Ok(adj);
        }
    }
    Err(AslError::TopologyInvalid(format!(
        "no connected draw of G({n}, {p}) in {ER_ATTEMPTS} attempts"
    )))
}

/// Plain-text dense matrix: first line `n`, then `n` whitespace-separated
/// rows in row-major order.
pub fn write_matrix_text(rows: &[Vec<f64>]) -> String {
    let mut out = format!("{}\n", rows.len());
    for row in rows {
        let line: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn parse_matrix_text(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines
        .next()
        .ok_or(AslError::Parse { line: 1, message: "missing header line".into() })?;
    let n: usize = header.parse().map_err(|_| AslError::Parse {
        line: hline,
        message: format!("header `{header}` is not an agent count"),
    })?;
    let mut rows = Vec::with_capacity(n);
    for (line, text) in lines {
        if rows.len() == n {
            return Err(AslError::Parse { line, message: "more rows than declared".into() });
        }
        let row: std::result::Result<Vec<f64>, _> =
            text.split_whitespace().map(str::parse::<f64>).collect();
        let row = row.map_err(|e| AslError::Parse { line, message: e.to_string() })?;
        if row.len() != n {
            return Err(AslError::Parse {
                line,
                message: format!("expected {n} entries, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(AslError::Parse {
            line: text.lines().count(),
            message: format!("expected {n} rows, found {}", rows.len()),
        });
    }
    Ok(rows)
}

impl CombinationMatrix {
    pub fn to_text(&self) -> String {
        write_matrix_text(&self.rows())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_rows(&parse_matrix_text(text)?)
    }
}

impl Adjacency {
    pub fn to_text(&self) -> String {
        let rows: Vec<Vec<f64>> = self
            .rows()
            .into_iter()
            .map(|r| r.into_iter().map(|e| if e { 1.0 } else { 0.0 }).collect())
            .collect();
        write_matrix_text(&rows)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let rows = parse_matrix_text(text)?;
        if rows.iter().flatten().any(|&x| x != 0.0 && x != 1.0) {
            return Err(AslError::Parse { line: 2, message: "adjacency entries must be 0 or 1".into() });
        }
        let rows: Vec<Vec<bool>> = rows.into_iter().map(|r| r.into_iter().map(|x| x == 1.0).collect()).collect();
        Self::from_rows(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::tagged_stream;
    use proptest::prelude::*;

    /// Reachability by explicit enumeration of simple paths, independent of
    /// the DFS used by the implementation.
    fn path_exists(adj: &Adjacency, from: usize, to: usize) -> bool {
        fn walk(adj: &Adjacency, at: usize, to: usize, visited: &mut Vec<usize>) -> bool {
            if at == to {
                return true;
            }
            for next in 0..adj.n() {
                if adj.edge(at, next) && !visited.contains(&next) {
                    visited.push(next);
                    if walk(adj, next, to, visited) {
                        return true;
                    }
                    visited.pop();
                }
            }
            false
        }
        walk(adj, from, to, &mut vec![from])
    }

    fn oracle_connected(adj: &Adjacency) -> bool {
        let n = adj.n();
        (0..n).any(|k| adj.self_loop(k))
            && (0..n).all(|a| (0..n).all(|b| a == b || path_exists(adj, a, b)))
    }

    #[test]
    fn connectivity_examples() {
        assert!(check_strong_connectivity(&Adjacency::complete(3).unwrap()));
        let mut two = Adjacency::empty(2).unwrap();
        two.set(0, 1, true);
        two.set(0, 0, true);
        assert!(!check_strong_connectivity(&two));
        // Strongly connected but without a self-loop: not primitive.
        let cycle = Adjacency::directed_cycle(3, false).unwrap();
        assert!(!check_strong_connectivity(&cycle));
        assert!(oracle_connected(&Adjacency::directed_cycle(3, true).unwrap()));
    }

    proptest! {
        #[test]
        fn connectivity_matches_path_enumeration(n in 1usize..=6, bits in proptest::collection::vec(any::<bool>(), 36)) {
            let mut adj = Adjacency::empty(n).unwrap();
            for l in 0..n {
                for k in 0..n {
                    adj.set(l, k, bits[l * 6 + k]);
                }
            }
            prop_assert_eq!(check_strong_connectivity(&adj), oracle_connected(&adj));
        }
    }

    #[test]
    fn perron_of_two_by_two() {
        let (a, b) = (0.3, 0.1);
        let m = CombinationMatrix::from_rows(&[vec![1.0 - a, b], vec![a, 1.0 - b]]).unwrap();
        let pi = perron_eigenvector(&m, PERRON_TOL, PERRON_MAX_ITER).unwrap();
        assert!((pi[0] - b / (a + b)).abs() < 1e-12);
        assert!((pi[1] - a / (a + b)).abs() < 1e-12);
    }

    #[test]
    fn perron_of_identity_fails() {
        let m = CombinationMatrix::identity(3).unwrap();
        assert!(matches!(
            perron_eigenvector(&m, PERRON_TOL, PERRON_MAX_ITER),
            Err(AslError::NotPrimitive(_))
        ));
    }

    #[test]
    fn left_stochastic_generation() {
        let adj = Adjacency::star(5).unwrap();
        let m = gen_left_stochastic(&adj, &mut tagged_stream(0, 0)).unwrap();
        for k in 0..5 {
            assert!((m.column_sum(k) - 1.0).abs() < 1e-12);
        }
        // Leaves are not connected to each other.
        assert_eq!(m.get(1, 2), 0.0);
        let pi = perron_eigenvector(&m, PERRON_TOL, PERRON_MAX_ITER).unwrap();
        assert!(pi.as_slice().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn doubly_stochastic_generation() {
        let adj = Adjacency::complete(6).unwrap();
        for seed in 0..5 {
            let m = gen_doubly_stochastic(&adj, &mut tagged_stream(seed, 1), SINKHORN_TOL, 10_000).unwrap();
            assert!(m.is_doubly_stochastic(SINKHORN_TOL));
            let pi = perron_eigenvector(&m, PERRON_TOL, PERRON_MAX_ITER).unwrap();
            for &x in pi.as_slice() {
                assert!((x - 1.0 / 6.0).abs() < 10.0 * SINKHORN_TOL);
            }
        }
        assert!(matches!(
            gen_doubly_stochastic(&adj, &mut tagged_stream(0, 1), SINKHORN_TOL, 0),
            Err(AslError::NonConvergence { .. })
        ));
    }

    #[test]
    fn eigenvector_prescribed_matrix() {
        let adj = Adjacency::complete(4).unwrap();
        let m = matrix_from_eigenvector(&adj, &PerronVector::uniform(4)).unwrap();
        for l in 0..4 {
            for k in 0..4 {
                assert!((m.get(l, k) - 0.25).abs() < 1e-15);
            }
        }

        let mut rng = tagged_stream(3, 3);
        let adj = gen_erdos_renyi(10, 0.5, &mut rng).unwrap();
        let pi = PerronVector::normalized((1..=10).map(|k| k as f64).collect()).unwrap();
        let m = matrix_from_eigenvector(&adj, &pi).unwrap();
        let api = m.apply(pi.as_slice());
        for k in 0..10 {
            assert!((api[k] - pi[k]).abs() < 1e-10);
        }
        let back = perron_eigenvector(&m, PERRON_TOL, PERRON_MAX_ITER).unwrap();
        for k in 0..10 {
            assert!((back[k] - pi[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn star_with_concentrated_hub_is_still_compatible() {
        // Diagonal entries are 1 - sum of neighbour weights >= pi[k] > 0.
        let adj = Adjacency::star(5).unwrap();
        let pi = PerronVector::new(vec![0.9, 0.025, 0.025, 0.025, 0.025]).unwrap();
        let m = matrix_from_eigenvector(&adj, &pi).unwrap();
        assert!((m.get(0, 0) - 0.9).abs() < 1e-12);
        for k in 1..5 {
            assert!((m.get(k, k) - 0.1).abs() < 1e-12);
            assert!(m.get(k, k) >= pi[k]);
        }
    }

    #[test]
    fn directed_topology_rejected_for_synthesis() {
        let adj = Adjacency::directed_cycle(3, true).unwrap();
        assert!(matches!(
            matrix_from_eigenvector(&adj, &PerronVector::uniform(3)),
            Err(AslError::TopologyInvalid(_))
        ));
    }

    #[test]
    fn erdos_renyi_examples() {
        let mut rng = tagged_stream(42, 0);
        assert_eq!(gen_erdos_renyi(10, 1.0, &mut rng).unwrap(), Adjacency::complete(10).unwrap());
        let single = gen_erdos_renyi(1, 0.5, &mut rng).unwrap();
        assert!(single.self_loop(0));
        let g = gen_erdos_renyi(10, 0.5, &mut rng).unwrap();
        assert!(check_strong_connectivity(&g));
        assert!(g.is_symmetric());
        assert!(gen_erdos_renyi(5, 0.0, &mut rng).is_err());
    }

    #[test]
    fn matrix_text_format() {
        let m = CombinationMatrix::from_rows(&[vec![0.75, 0.5], vec![0.25, 0.5]]).unwrap();
        let text = m.to_text();
        assert_eq!(text, "2\n0.75 0.5\n0.25 0.5\n");
        assert_eq!(CombinationMatrix::from_text(&text).unwrap(), m);
        let err = CombinationMatrix::from_text("2\n1 0\n0\n").unwrap_err();
        assert!(matches!(err, AslError::Parse { line: 3, .. }));
        let adj = Adjacency::star(3).unwrap();
        assert_eq!(Adjacency::from_text(&adj.to_text()).unwrap(), adj);
    }

    proptest! {
        #[test]
        fn generated_matrices_respect_sparsity(seed in 0u64..500) {
            let mut rng = tagged_stream(seed, 9);
            let adj = gen_erdos_renyi(7, 0.4, &mut rng).unwrap();
            let m = gen_left_stochastic(&adj, &mut rng).unwrap();
            for l in 0..7 {
                for k in 0..7 {
                    prop_assert_eq!(m.get(l, k) > 0.0, adj.edge(l, k));
                }
            }
            for k in 0..7 {
                prop_assert!((m.column_sum(k) - 1.0).abs() <= 1e-12);
            }
        }
    }
}
