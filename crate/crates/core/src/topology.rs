//! Network graphs, consensus weights and the edge incidence machinery.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymEig};

const MAX_RESAMPLES: usize = 1000;

/// Undirected simple graph stored as sorted neighbor lists plus the
/// lexicographically ordered list of directed edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    adjacency: Vec<Vec<usize>>,
    directed_edges: Vec<(usize, usize)>,
    seed: u64,
}

impl Topology {
    /// Builds a topology from undirected pairs; duplicates are merged.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 nodes, got {n}")));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("edge ({i},{j}) out of range for n={n}")));
            }
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop at node {i}")));
            }
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for nb in &mut adjacency {
            nb.sort_unstable();
            nb.dedup();
        }
        let directed_edges = (0..n)
            .flat_map(|i| adjacency[i].iter().map(move |&j| (i, j)))
            .collect();
        let top = Self {
            n,
            adjacency,
            directed_edges,
            seed,
        };
        if !top.is_connected() {
            return Err(Error::InvalidArgument(format!("graph on {n} nodes is disconnected")));
        }
        Ok(top)
    }

    /// Erdős–Rényi sample conditioned on connectivity. Disconnected draws are
    /// discarded and redrawn with `seed + 1`, `seed + 2`, ...
    pub fn random(n: usize, p_c: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 nodes, got {n}")));
        }
        if !(p_c > 0.0 && p_c <= 1.0) {
            return Err(Error::InvalidArgument(format!("edge probability {p_c} not in (0,1]")));
        }
        for attempt in 0..MAX_RESAMPLES as u64 {
            let s = seed.wrapping_add(attempt);
            let edges = sample_edges(n, p_c, s);
            if let Ok(top) = Self::from_edges(n, &edges, s) {
                return Ok(top);
            }
        }
        Err(Error::Disconnected {
            n,
            p_c,
            attempts: MAX_RESAMPLES,
        })
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges, 0)
    }

    /// Star centered at node 0.
    pub fn star(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Self::from_edges(n, &edges, 0)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::from_edges(n, &edges, 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn directed_edges(&self) -> &[(usize, usize)] {
        &self.directed_edges
    }

    /// Number of directed edges, i.e. twice the undirected edge count.
    pub fn m(&self) -> usize {
        self.directed_edges.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn are_adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn is_bipartite(&self) -> bool {
        let mut color = vec![None; self.n];
        color[0] = Some(false);
        let mut queue = VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            let cu = color[u].unwrap_or(false);
            for &v in &self.adjacency[u] {
                match color[v] {
                    None => {
                        color[v] = Some(!cu);
                        queue.push_back(v);
                    }
                    Some(cv) if cv == cu => return false,
                    Some(_) => {}
                }
            }
        }
        true
    }

    /// Line format: `n m seed` header, then one `i j` line per directed edge.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n, self.m(), self.seed);
        for (i, j) in &self.directed_edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty topology file".into()))?;
        let head: Vec<u64> = parse_fields(header)?;
        let [n, m, seed] = head[..] else {
            return Err(Error::Parse(format!("header needs `n m seed`, got `{header}`")));
        };
        let mut edges = Vec::with_capacity(m as usize);
        for line in lines {
            let f: Vec<u64> = parse_fields(line)?;
            let [i, j] = f[..] else {
                return Err(Error::Parse(format!("edge line needs `i j`, got `{line}`")));
            };
            edges.push((i as usize, j as usize));
        }
        if edges.len() != m as usize {
            return Err(Error::Parse(format!("header announces {m} edges, found {}", edges.len())));
        }
        let top = Self::from_edges(n as usize, &edges, seed)?;
        let mut sorted = edges.clone();
        sorted.sort_unstable();
        if sorted != top.directed_edges {
            return Err(Error::Parse("edge list is not symmetric or has duplicates".into()));
        }
        Ok(top)
    }
}

fn parse_fields(line: &str) -> Result<Vec<u64>> {
    line.split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad integer `{t}`"))))
        .collect()
}

fn sample_edges(n: usize, p_c: f64, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p_c {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Symmetric doubly stochastic consensus weights with cached diagonal bounds.
#[derive(Debug, Clone)]
pub struct WeightMatrix {
    w: Matrix,
    delta: f64,
    delta_upper: f64,
}

/// Output of [`WeightMatrix::check_bounds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightBounds {
    pub delta: f64,
    #[serde(rename = "Delta")]
    pub delta_upper: f64,
    /// Second largest eigenvalue modulus of W.
    pub rho_w: f64,
}

impl WeightMatrix {
    /// Metropolis-Hastings rule: `w_ij = 1 / (1 + max(d_i, d_j))` on edges.
    pub fn metropolis(top: &Topology) -> Self {
        let n = top.n();
        let mut w = Matrix::zeros(n, n);
        for i in 0..n {
            for &j in top.neighbors(i) {
                w[(i, j)] = 1.0 / (1 + top.degree(i).max(top.degree(j))) as f64;
            }
        }
        for i in 0..n {
            let off: f64 = top.neighbors(i).iter().map(|&j| w[(i, j)]).sum();
            w[(i, i)] = 1.0 - off;
        }
        Self::from_matrix_unchecked(w)
    }

    /// Validated custom weights: symmetric, nonnegative, stochastic, and
    /// supported on the graph. Diagonal bounds are checked separately by
    /// [`WeightMatrix::check_bounds`].
    pub fn from_matrix(w: Matrix, top: &Topology) -> Result<Self> {
        let n = top.n();
        if w.nrows() != n || w.ncols() != n {
            return Err(Error::Dimension {
                context: "weight matrix",
                expected: n,
                actual: w.nrows(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = w[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidWeights(format!("w[{i}][{j}] = {v} is negative or not finite")));
                }
                if (v - w[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidWeights(format!("asymmetric at ({i},{j})")));
                }
                if i != j && v != 0.0 && !top.are_adjacent(i, j) {
                    return Err(Error::InvalidWeights(format!("w[{i}][{j}] = {v} but ({i},{j}) is not an edge")));
                }
            }
        }
        let wm = Self::from_matrix_unchecked(w);
        wm.check_stochastic()?;
        Ok(wm)
    }

    /// Wraps a matrix without validation, for constructing deliberately
    /// broken fixtures.
    pub fn from_matrix_unchecked(w: Matrix) -> Self {
        let diag = w.diagonal();
        let delta = diag.min();
        let delta_upper = diag.max();
        Self {
            w,
            delta,
            delta_upper,
        }
    }

    /// Whitespace-separated rows, one per line.
    pub fn from_text(text: &str, top: &Topology) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad weight `{t}`"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parse("weight matrix must be square".into()));
        }
        let w = Matrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::from_matrix(w, top)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.w
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn delta_upper(&self) -> f64 {
        self.delta_upper
    }

    fn check_stochastic(&self) -> Result<()> {
        for (i, row) in self.w.row_iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidWeights(format!("row {i} sums to {s}")));
            }
        }
        Ok(())
    }

    /// Returns the diagonal bounds and the second largest eigenvalue modulus,
    /// failing when `Delta >= 1` or the spectral gap is closed.
    pub fn check_bounds(&self) -> Result<WeightBounds> {
        self.check_stochastic()?;
        if self.delta < 0.0 || self.delta_upper >= 1.0 {
            return Err(Error::WeightBounds(format!(
                "delta = {}, Delta = {}",
                self.delta, self.delta_upper
            )));
        }
        let eig = SymEig::new(&self.w);
        let vals = &eig.values;
        let rho_w = vals[..vals.len() - 1]
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        if rho_w >= 1.0 - 1e-12 {
            return Err(Error::WeightBounds(format!(
                "second eigenvalue modulus {rho_w} is not below 1 (graph disconnected?)"
            )));
        }
        Ok(WeightBounds {
            delta: self.delta,
            delta_upper: self.delta_upper,
            rho_w,
        })
    }
}

/// Edge incidence matrices of the directed-edge formulation and their
/// spectral constants.
#[derive(Debug, Clone)]
pub struct IncidenceSet {
    pub p: usize,
    pub a_s: Matrix,
    pub a_d: Matrix,
    pub e_o: Matrix,
    pub e_u: Matrix,
    pub l_o: Matrix,
    pub l_u: Matrix,
    pub d_deg: Matrix,
    pub degrees: Vec<usize>,
    /// Smallest singular value of `E_u` (zero iff the graph is bipartite).
    pub gamma_u: f64,
    /// Largest singular value of `E_u`.
    pub gamma_u_max: f64,
    /// Smallest nonzero singular value of `E_o`.
    pub gamma_o: f64,
}

impl IncidenceSet {
    pub fn build(top: &Topology, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("block dimension p must be at least 1".into()));
        }
        let (n, m) = (top.n(), top.m());
        let mut a_s = Matrix::zeros(m * p, n * p);
        let mut a_d = Matrix::zeros(m * p, n * p);
        for (e, &(i, j)) in top.directed_edges().iter().enumerate() {
            for k in 0..p {
                a_s[(e * p + k, i * p + k)] = 1.0;
                a_d[(e * p + k, j * p + k)] = 1.0;
            }
        }
        let e_o = &a_s - &a_d;
        let e_u = &a_s + &a_d;
        let gram_o = e_o.transpose() * &e_o;
        let gram_u = e_u.transpose() * &e_u;
        let l_o = &gram_o * 0.5;
        let l_u = &gram_u * 0.5;
        let d_deg = (&l_u + &l_o) * 0.5;

        let eig_u = SymEig::new(&gram_u);
        let gamma_u_max = eig_u.max().max(0.0).sqrt();
        let gamma_u = if eig_u.min() > 1e-10 * eig_u.max() {
            eig_u.min().sqrt()
        } else {
            0.0
        };
        let eig_o = SymEig::new(&gram_o);
        let thresh = 1e-10 * eig_o.max();
        let gamma_o = eig_o
            .values
            .iter()
            .copied()
            .find(|&v| v > thresh)
            .unwrap_or(0.0)
            .sqrt();

        Ok(Self {
            p,
            a_s,
            a_d,
            e_o,
            e_u,
            l_o,
            l_u,
            d_deg,
            degrees: (0..n).map(|i| top.degree(i)).collect(),
            gamma_u,
            gamma_u_max,
            gamma_o,
        })
    }

    /// Stacked constraint matrix `[A_s; A_d]`.
    pub fn a_stacked(&self) -> Matrix {
        let (r, c) = self.a_s.shape();
        let mut a = Matrix::zeros(2 * r, c);
        a.rows_mut(0, r).copy_from(&self.a_s);
        a.rows_mut(r, r).copy_from(&self.a_d);
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bfs_reach(top: &Topology) -> usize {
        let mut seen = vec![false; top.n()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in top.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.iter().filter(|s| **s).count()
    }

    #[test]
    fn complete_small_graphs() {
        let t2 = Topology::random(2, 1.0, 0).unwrap();
        assert_eq!(t2.m(), 2);
        assert_eq!(t2.directed_edges(), &[(0, 1), (1, 0)]);
        let t3 = Topology::random(3, 1.0, 0).unwrap();
        assert_eq!(t3.m(), 6);
        assert!((0..3).all(|i| t3.degree(i) == 2));
    }

    #[test]
    fn random_sample_is_connected_and_reproducible() {
        let a = Topology::random(10, 0.4, 7).unwrap();
        let b = Topology::random(10, 0.4, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(bfs_reach(&a), 10);
        // Independent replay of the sampling procedure.
        let mut seed = 7u64;
        let expected = loop {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut edges = Vec::new();
            for i in 0..10 {
                for j in i + 1..10 {
                    if rng.random::<f64>() < 0.4 {
                        edges.push((i, j));
                    }
                }
            }
            if let Ok(t) = Topology::from_edges(10, &edges, seed) {
                break t;
            }
            seed += 1;
        };
        assert_eq!(a, expected);
    }

    #[test]
    fn sparse_probability_exhausts_resamples() {
        let err = Topology::random(40, 1e-6, 1).unwrap_err();
        assert!(matches!(err, Error::Disconnected { n: 40, .. }));
        assert!(err.to_string().contains("n=40"));
    }

    #[test]
    fn symmetric_edges() {
        let t = Topology::random(12, 0.3, 3).unwrap();
        for &(i, j) in t.directed_edges() {
            assert!(t.directed_edges().contains(&(j, i)));
            assert_ne!(i, j);
        }
    }

    #[test]
    fn metropolis_fixtures() {
        let w2 = WeightMatrix::metropolis(&Topology::path(2).unwrap());
        assert_abs_diff_eq!(w2.matrix(), &Matrix::from_element(2, 2, 0.5), epsilon = 1e-15);
        assert_eq!((w2.delta(), w2.delta_upper()), (0.5, 0.5));

        let w3 = WeightMatrix::metropolis(&Topology::complete(3).unwrap());
        assert_abs_diff_eq!(w3.matrix(), &Matrix::from_element(3, 3, 1.0 / 3.0), epsilon = 1e-15);

        let star = WeightMatrix::metropolis(&Topology::star(3).unwrap());
        assert_abs_diff_eq!(star.get(0, 1), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(star.get(0, 2), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(star.get(0, 0), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(star.get(1, 1), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(star.delta(), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(star.delta_upper(), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn weight_bounds_fixtures() {
        let b = WeightMatrix::metropolis(&Topology::path(2).unwrap())
            .check_bounds()
            .unwrap();
        assert_abs_diff_eq!(b.rho_w, 0.0, epsilon = 1e-12);
        assert_eq!((b.delta, b.delta_upper), (0.5, 0.5));
        let tri = WeightMatrix::metropolis(&Topology::complete(3).unwrap())
            .check_bounds()
            .unwrap();
        assert_abs_diff_eq!(tri.rho_w, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn forced_identity_weights_violate_diagonal_bound() {
        let w = WeightMatrix::from_matrix_unchecked(Matrix::identity(3, 3));
        assert!(matches!(w.check_bounds(), Err(Error::WeightBounds(_))));
    }

    #[test]
    fn non_stochastic_rows_rejected() {
        let top = Topology::path(2).unwrap();
        let w = Matrix::from_row_slice(2, 2, &[0.5, 0.4, 0.4, 0.5]);
        assert!(matches!(WeightMatrix::from_matrix(w.clone(), &top), Err(Error::InvalidWeights(_))));
        let forced = WeightMatrix::from_matrix_unchecked(w);
        assert!(matches!(forced.check_bounds(), Err(Error::InvalidWeights(_))));
    }

    #[test]
    fn weights_off_support_rejected() {
        let top = Topology::path(3).unwrap();
        let mut w = Matrix::from_element(3, 3, 1.0 / 3.0);
        w[(0, 0)] = 1.0 / 3.0;
        assert!(WeightMatrix::from_matrix(w, &top).is_err());
    }

    #[test]
    fn random_metropolis_invariants() {
        for seed in 0..20 {
            let top = Topology::random(9, 0.35, seed).unwrap();
            let w = WeightMatrix::metropolis(&top);
            let wm = w.matrix();
            for i in 0..9 {
                assert_abs_diff_eq!(wm.row(i).sum(), 1.0, epsilon = 1e-12);
                for j in 0..9 {
                    assert_eq!(wm[(i, j)], wm[(j, i)]);
                    assert!(wm[(i, j)] >= 0.0);
                    if i != j && !top.are_adjacent(i, j) {
                        assert_eq!(wm[(i, j)], 0.0);
                    }
                }
            }
            let b = w.check_bounds().unwrap();
            assert!(b.delta > 0.0 && b.delta_upper < 1.0 && b.rho_w < 1.0);
        }
    }

    #[test]
    fn incidence_on_two_node_path() {
        let inc = IncidenceSet::build(&Topology::path(2).unwrap(), 1).unwrap();
        let m = |v: &[f64]| Matrix::from_row_slice(2, 2, v);
        assert_eq!(inc.e_o, m(&[1.0, -1.0, -1.0, 1.0]));
        assert_eq!(inc.e_u, m(&[1.0, 1.0, 1.0, 1.0]));
        assert_eq!(inc.l_o, m(&[1.0, -1.0, -1.0, 1.0]));
        assert_eq!(inc.l_u, m(&[1.0, 1.0, 1.0, 1.0]));
        assert_eq!(inc.d_deg, Matrix::identity(2, 2));
        assert_eq!(inc.gamma_u, 0.0);
    }

    #[test]
    fn incidence_on_triangle() {
        let inc = IncidenceSet::build(&Topology::complete(3).unwrap(), 1).unwrap();
        assert_abs_diff_eq!(inc.gamma_u, 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(inc.gamma_u_max, 2.0 * 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(inc.gamma_o, 6f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn incidence_identities_on_random_graphs() {
        for seed in 0..10 {
            let top = Topology::random(7, 0.4, seed).unwrap();
            for p in 1..=3 {
                let inc = IncidenceSet::build(&top, p).unwrap();
                let a = inc.a_stacked();
                assert_eq!(a.transpose() * &a, &inc.d_deg * 2.0);
                assert_eq!(&inc.l_u + &inc.l_o, &inc.d_deg * 2.0);
                for i in 0..top.n() {
                    for k in 0..p {
                        assert_eq!(inc.d_deg[(i * p + k, i * p + k)], top.degree(i) as f64);
                    }
                }
                let consensus = crate::linalg::Vector::from_fn(top.n() * p, |r, _| (r % p) as f64 + 0.5);
                assert!((&inc.l_o * consensus).amax() < 1e-12);
                assert!(crate::linalg::eigenvalues(&inc.l_u)[0] > -1e-10);
                assert!(crate::linalg::eigenvalues(&inc.l_o)[0] > -1e-10);
                assert_eq!(inc.gamma_u == 0.0, top.is_bipartite());
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let t = Topology::random(8, 0.5, 11).unwrap();
        let text = t.to_text();
        assert!(text.starts_with(&format!("8 {} {}\n", t.m(), t.seed())));
        assert_eq!(Topology::from_text(&text).unwrap(), t);
    }

    #[test]
    fn text_rejects_asymmetric_edges() {
        assert!(Topology::from_text("2 1 0\n0 1\n").is_err());
        assert!(Topology::from_text("2 2 0\n0 1\n").is_err());
    }
}
