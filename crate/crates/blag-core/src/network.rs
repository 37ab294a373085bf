//! Undirected social networks: construction, per-edge transmission
//! probabilities, node sensitivity states, and extraction of the target set
//! the bandit instances are built from.
//!
//! Node ids are dense `u32` indices. Graphs ingested from edge-list files
//! keep a map back to the original ids. Adjacency lists are sorted, so every
//! scan over neighbors is deterministic.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use rand::rngs::StdRng;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::rng::shuffle;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no connected node set of size {requested} exists")]
    Infeasible { requested: usize },
    #[error("no sensitive node has an uninformed neighbor")]
    EmptyTargetSet,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sensitivity state of a node. `Informed` and `Uninformed` only make sense
/// for non-sensitive nodes; sensitive nodes are the diffusion sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeState {
    Sensitive,
    Informed,
    Uninformed,
}

/// Undirected graph with per-edge transmission probabilities and per-node
/// sensitivity states. Topology is immutable once built; weights and states
/// are replaced wholesale by the builder-style methods below.
#[derive(Debug, Clone)]
pub struct Network<F: Scalar> {
    adjacency: Vec<Vec<u32>>,
    states: Vec<NodeState>,
    /// Normalized `(lo, hi)` endpoint pairs in construction order.
    edges: Vec<(u32, u32)>,
    edge_index: HashMap<(u32, u32), u32>,
    edge_prob: Vec<F>,
    original_ids: Option<Vec<u64>>,
}

impl<F: Scalar> Network<F> {
    /// Builds a graph from an edge list. Self-loops and duplicate edges are
    /// dropped silently; everything else (sorting, indexing) is set up here.
    pub fn from_edges(node_count: usize, raw_edges: &[(u32, u32)]) -> Self {
        let mut adjacency = vec![Vec::new(); node_count];
        let mut edges = Vec::new();
        let mut edge_index = HashMap::new();
        for &(a, b) in raw_edges {
            if a == b {
                continue;
            }
            let key = (a.min(b), a.max(b));
            if edge_index.contains_key(&key) {
                continue;
            }
            edge_index.insert(key, edges.len() as u32);
            edges.push(key);
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let edge_prob = vec![F::zero(); edges.len()];
        Network {
            adjacency,
            states: vec![NodeState::Informed; node_count],
            edges,
            edge_index,
            edge_prob,
            original_ids: None,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, v: u32) -> u32 {
        self.adjacency[v as usize].len() as u32
    }

    /// Neighbors of `v`, sorted ascending.
    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adjacency[v as usize]
    }

    /// Edges in construction order, as normalized `(lo, hi)` pairs.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn state(&self, v: u32) -> NodeState {
        self.states[v as usize]
    }

    pub fn set_state(&mut self, v: u32, s: NodeState) {
        self.states[v as usize] = s;
    }

    pub fn states(&self) -> &[NodeState] {
        &self.states
    }

    /// Transmission probability stored on edge `{a, b}`, if the edge exists.
    pub fn edge_probability(&self, a: u32, b: u32) -> Option<F> {
        let key = (a.min(b), a.max(b));
        self.edge_index.get(&key).map(|&i| self.edge_prob[i as usize])
    }

    /// Original ids for ingested graphs, indexed by compact id.
    pub fn original_ids(&self) -> Option<&[u64]> {
        self.original_ids.as_deref()
    }

    pub fn sensitive_count(&self) -> usize {
        self.states
            .iter()
            .filter(|s| matches!(s, NodeState::Sensitive))
            .count()
    }

    /// Replaces every edge probability with an independent draw from
    /// `U(0, xi)`. Deterministic given the seed: edges are visited in
    /// construction order.
    pub fn sample_edge_weights(&self, xi: F, seed: u64) -> Result<Self, NetworkError> {
        if !(xi > F::zero() && xi <= F::one()) {
            return Err(NetworkError::InvalidParameters(format!(
                "xi must be in (0, 1], got {xi}"
            )));
        }
        let mut rng = StdRng::seed_from_u64(seed);
        let mut out = self.clone();
        for p in &mut out.edge_prob {
            *p = rng.gen_range(F::zero()..xi);
        }
        Ok(out)
    }

    /// Marks a connected set of `seed_count` nodes sensitive, grown from a
    /// random start one random frontier node at a time. Then a uniformly
    /// random `uninformed_fraction` of the non-sensitive neighbors of the
    /// sensitive set become `Uninformed`; all remaining non-sensitive nodes
    /// become `Informed`.
    pub fn assign_states(
        &self,
        seed_count: usize,
        uninformed_fraction: F,
        seed: u64,
    ) -> Result<Self, NetworkError> {
        let n = self.node_count();
        if seed_count == 0 || seed_count > n {
            return Err(NetworkError::InvalidParameters(format!(
                "seed_count must be in 1..={n}, got {seed_count}"
            )));
        }
        if !(uninformed_fraction >= F::zero() && uninformed_fraction <= F::one()) {
            return Err(NetworkError::InvalidParameters(format!(
                "uninformed_fraction must be in [0, 1], got {uninformed_fraction}"
            )));
        }
        let mut rng = StdRng::seed_from_u64(seed);

        // A connected set of the requested size exists inside a component iff
        // the component has at least that many nodes. Try starts in random
        // order until one qualifies.
        let mut start_order: Vec<u32> = (0..n as u32).collect();
        shuffle(&mut start_order, &mut rng);
        let mut start = None;
        for &cand in &start_order {
            if self.component_size(cand) >= seed_count {
                start = Some(cand);
                break;
            }
        }
        let start = start.ok_or(NetworkError::Infeasible {
            requested: seed_count,
        })?;

        let mut out = self.clone();
        let mut sensitive = vec![false; n];
        sensitive[start as usize] = true;
        let mut in_frontier = vec![false; n];
        let mut frontier: Vec<u32> = Vec::new();
        for &w in self.neighbors(start) {
            if !in_frontier[w as usize] {
                in_frontier[w as usize] = true;
                frontier.push(w);
            }
        }
        let mut chosen = 1;
        while chosen < seed_count {
            let pick = rng.gen_range(0..frontier.len());
            let v = frontier.swap_remove(pick);
            in_frontier[v as usize] = false;
            sensitive[v as usize] = true;
            chosen += 1;
            for &w in self.neighbors(v) {
                if !sensitive[w as usize] && !in_frontier[w as usize] {
                    in_frontier[w as usize] = true;
                    frontier.push(w);
                }
            }
        }

        // Boundary: non-sensitive neighbors of the sensitive set, deduped and
        // sorted so the uninformed draw is deterministic.
        let mut boundary: Vec<u32> = Vec::new();
        let mut seen = vec![false; n];
        for v in 0..n as u32 {
            if !sensitive[v as usize] {
                continue;
            }
            for &w in self.neighbors(v) {
                if !sensitive[w as usize] && !seen[w as usize] {
                    seen[w as usize] = true;
                    boundary.push(w);
                }
            }
        }
        boundary.sort_unstable();
        let k = (uninformed_fraction * F::from_usize(boundary.len()).unwrap())
            .round()
            .to_usize()
            .unwrap_or(0)
            .min(boundary.len());
        let mut uninformed = vec![false; n];
        if k > 0 {
            for i in index::sample(&mut rng, boundary.len(), k) {
                uninformed[boundary[i] as usize] = true;
            }
        }

        for v in 0..n {
            out.states[v] = if sensitive[v] {
                NodeState::Sensitive
            } else if uninformed[v] {
                NodeState::Uninformed
            } else {
                NodeState::Informed
            };
        }
        Ok(out)
    }

    /// Collects every (sensitive, uninformed-neighbor) pair as a target edge.
    /// An uninformed node adjacent to several sensitive nodes contributes one
    /// entry per such edge. Deterministic: sensitive nodes ascending, then
    /// their sorted adjacency.
    pub fn extract_target_set(&self) -> Result<TargetSet<F>, NetworkError> {
        let mut target_node_ids = Vec::new();
        let mut target_edges = Vec::new();
        let mut degrees = Vec::new();
        let mut beta0 = Vec::new();
        for v in 0..self.node_count() as u32 {
            if self.state(v) != NodeState::Sensitive {
                continue;
            }
            for &w in self.neighbors(v) {
                if self.state(w) == NodeState::Uninformed {
                    target_node_ids.push(w);
                    target_edges.push((v, w));
                    degrees.push(self.degree(w));
                    beta0.push(
                        self.edge_probability(v, w)
                            .expect("adjacent nodes share an edge"),
                    );
                }
            }
        }
        if target_edges.is_empty() {
            return Err(NetworkError::EmptyTargetSet);
        }
        let mut sort_permutation: Vec<u32> = (0..degrees.len() as u32).collect();
        sort_permutation.sort_by_key(|&i| (degrees[i as usize], i));
        Ok(TargetSet {
            target_node_ids,
            target_edges,
            degrees,
            beta0,
            sort_permutation,
        })
    }

    fn component_size(&self, start: u32) -> usize {
        let mut seen = vec![false; self.node_count()];
        let mut queue = vec![start];
        seen[start as usize] = true;
        let mut size = 0;
        while let Some(v) = queue.pop() {
            size += 1;
            for &w in self.neighbors(v) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    queue.push(w);
                }
            }
        }
        size
    }
}

/// The slice of the network the bandit acts on: one entry per
/// (sensitive, uninformed) edge.
#[derive(Debug, Clone)]
pub struct TargetSet<F: Scalar> {
    /// Uninformed endpoint of each target edge.
    pub target_node_ids: Vec<u32>,
    /// (sensitive, uninformed) pairs in extraction order.
    pub target_edges: Vec<(u32, u32)>,
    /// Full-graph degree of each target node (all incident edges count).
    pub degrees: Vec<u32>,
    /// Stored transmission probability of each target edge.
    pub beta0: Vec<F>,
    /// Maps rank to stored index: `sort_permutation[k]` is the index of the
    /// k-th smallest degree (stable: ties keep stored order).
    pub sort_permutation: Vec<u32>,
}

impl<F: Scalar> TargetSet<F> {
    pub fn len(&self) -> usize {
        self.target_edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target_edges.is_empty()
    }

    pub fn degrees_scaled(&self) -> Vec<F> {
        self.degrees
            .iter()
            .map(|&d| F::from_u32(d).unwrap())
            .collect()
    }
}

/// Barabasi-Albert preferential attachment. The seed component is `p` nodes
/// connected in a path; each subsequent node attaches `p` distinct edges,
/// with endpoints drawn from the repeated-endpoints list (so attachment is
/// proportional to degree). Total non-seed edges: `p * (n - p)`.
pub fn generate_ba<F: Scalar>(n: usize, p: usize, seed: u64) -> Result<Network<F>, NetworkError> {
    if p < 1 || n <= p {
        return Err(NetworkError::InvalidParameters(format!(
            "need n > p >= 1, got n={n}, p={p}"
        )));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(p * (n - p) + p - 1);
    // Each edge endpoint appears once; sampling an index uniformly is then
    // degree-proportional sampling.
    let mut repeated: Vec<u32> = Vec::with_capacity(2 * (p * (n - p) + p));
    for i in 0..p.saturating_sub(1) {
        let (a, b) = (i as u32, i as u32 + 1);
        edges.push((a, b));
        repeated.push(a);
        repeated.push(b);
    }
    let mut targets: Vec<u32> = Vec::with_capacity(p);
    let mut picked: HashSet<u32> = HashSet::with_capacity(p);
    for v in p..n {
        targets.clear();
        picked.clear();
        while targets.len() < p {
            // Empty only for p = 1, where the path seed has no edges yet;
            // fall back to a uniform draw over existing nodes.
            let t = if repeated.is_empty() {
                rng.gen_range(0..v as u32)
            } else {
                repeated[rng.gen_range(0..repeated.len())]
            };
            if picked.insert(t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((v as u32, t));
            repeated.push(v as u32);
            repeated.push(t);
        }
    }
    Ok(Network::from_edges(n, &edges))
}

/// Reads a whitespace-separated edge list (the SNAP layout): one `u v` pair
/// per line, `#` starts a comment line, blank lines are skipped. Node ids are
/// compacted to `0..n-1` in first-appearance order; the original ids are
/// retained. Self-loops and duplicate edges are dropped silently.
pub fn load_edge_list<F: Scalar, R: BufRead>(reader: R) -> Result<Network<F>, NetworkError> {
    let mut id_map: HashMap<u64, u32> = HashMap::new();
    let mut original_ids: Vec<u64> = Vec::new();
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut intern = |raw: u64, original_ids: &mut Vec<u64>| -> u32 {
        *id_map.entry(raw).or_insert_with(|| {
            original_ids.push(raw);
            (original_ids.len() - 1) as u32
        })
    };
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let parse = |tok: Option<&str>, lineno: usize| -> Result<u64, NetworkError> {
            let tok = tok.ok_or(NetworkError::Parse {
                line: lineno + 1,
                msg: "expected two node ids".into(),
            })?;
            tok.parse::<u64>().map_err(|_| NetworkError::Parse {
                line: lineno + 1,
                msg: format!("not an integer node id: {tok:?}"),
            })
        };
        let a = parse(tokens.next(), lineno)?;
        let b = parse(tokens.next(), lineno)?;
        if tokens.next().is_some() {
            return Err(NetworkError::Parse {
                line: lineno + 1,
                msg: "expected exactly two node ids".into(),
            });
        }
        let a = intern(a, &mut original_ids);
        let b = intern(b, &mut original_ids);
        edges.push((a, b));
    }
    let mut net = Network::from_edges(original_ids.len(), &edges);
    net.original_ids = Some(original_ids);
    Ok(net)
}

/// Writes the edge list in the same layout `load_edge_list` reads.
pub fn write_edge_list<F: Scalar, W: std::io::Write>(
    net: &Network<F>,
    mut w: W,
) -> std::io::Result<()> {
    for &(a, b) in net.edges() {
        writeln!(w, "{a}\t{b}")?;
    }
    Ok(())
}
