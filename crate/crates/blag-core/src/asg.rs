//! Action-set graph: arms are nodes, an edge joins any two arms that are
//! jointly admissible.
//!
//! With hundreds of arms the graph is dense and quadratic to materialize,
//! and the learner only ever looks at short neighborhood prefixes. So
//! adjacency is discovered on demand: each node scans the arm list in a
//! fixed shuffled order and remembers how far it got, and later queries
//! resume from that cursor. A full pass only happens for small instances
//! (tests, brute-force baselines).

use std::cell::RefCell;
use std::collections::HashMap;

use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::action::BaseAction;
use crate::rng::shuffle;
use crate::scalar::{interval_tolerance, Scalar};

#[derive(Debug, Clone, Default)]
struct NeighborCache {
    /// Next `scan_order` index to inspect.
    cursor: usize,
    /// Neighbors confirmed so far, in scan order.
    found: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct ActionSetGraph<F: Scalar> {
    beta0: Vec<F>,
    arms: Vec<BaseAction<F>>,
    /// The order every node scans candidates in; one shared shuffle of
    /// `0..M` so neighbor prefixes are reproducible.
    scan_order: Vec<u32>,
    cache: RefCell<HashMap<u32, NeighborCache>>,
}

impl<F: Scalar> ActionSetGraph<F> {
    /// `arms` must be id-indexed (`arms[i].id == i`). `shuffle_seed` pins
    /// the scan order.
    pub fn new(beta0: Vec<F>, arms: Vec<BaseAction<F>>, shuffle_seed: u64) -> Self {
        debug_assert!(arms.iter().enumerate().all(|(i, a)| a.id == i as u32));
        debug_assert!(arms.iter().all(|a| {
            (a.idx_plus as usize) < beta0.len() && (a.idx_minus as usize) < beta0.len()
        }));
        let mut scan_order: Vec<u32> = (0..arms.len() as u32).collect();
        let mut rng = StdRng::seed_from_u64(shuffle_seed);
        shuffle(&mut scan_order, &mut rng);
        ActionSetGraph {
            beta0,
            arms,
            scan_order,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn arm_count(&self) -> usize {
        self.arms.len()
    }

    pub fn component_count(&self) -> usize {
        self.beta0.len()
    }

    pub fn beta0(&self) -> &[F] {
        &self.beta0
    }

    pub fn arms(&self) -> &[BaseAction<F>] {
        &self.arms
    }

    pub fn arm(&self, id: u32) -> &BaseAction<F> {
        &self.arms[id as usize]
    }

    pub fn scan_order(&self) -> &[u32] {
        &self.scan_order
    }

    /// Joint admissibility of the pair `{u, v}`. At most four components
    /// are touched, so the check is O(1); overlapping components (the two
    /// arms sharing an endpoint) accumulate before the interval test.
    pub fn pairwise_valid(&self, u: u32, v: u32) -> bool {
        let a = &self.arms[u as usize];
        let b = &self.arms[v as usize];
        let mut touched: [(u32, F); 4] = [(0, F::zero()); 4];
        let mut n = 0;
        for (idx, shift) in [
            (a.idx_plus, a.magnitude),
            (a.idx_minus, -a.magnitude),
            (b.idx_plus, b.magnitude),
            (b.idx_minus, -b.magnitude),
        ] {
            match touched[..n].iter_mut().find(|(i, _)| *i == idx) {
                Some(slot) => slot.1 += shift,
                None => {
                    touched[n] = (idx, shift);
                    n += 1;
                }
            }
        }
        let tol = interval_tolerance::<F>();
        touched[..n].iter().all(|&(j, s)| {
            let v = self.beta0[j as usize] + s;
            v >= -tol && v <= F::one() + tol
        })
    }

    /// The first `limit` neighbors of `u` in scan order (fewer if the node
    /// has fewer). Resumes the cached scan, so asking for a longer prefix
    /// later never re-tests candidates already seen.
    pub fn neighbors_upto(&self, u: u32, limit: usize) -> Vec<u32> {
        let mut cache = self.cache.borrow_mut();
        let entry = cache.entry(u).or_default();
        while entry.found.len() < limit && entry.cursor < self.scan_order.len() {
            let candidate = self.scan_order[entry.cursor];
            entry.cursor += 1;
            if candidate != u && self.pairwise_valid(u, candidate) {
                entry.found.push(candidate);
            }
        }
        entry.found[..entry.found.len().min(limit)].to_vec()
    }

    /// Degree of `u`; exhausts the scan for that node.
    pub fn degree(&self, u: u32) -> usize {
        self.neighbors_upto(u, self.arms.len()).len()
    }

    /// Every edge as `(u, v)` with `u < v`, by brute force over all pairs.
    /// Quadratic; intended for small instances.
    pub fn materialized_edges(&self) -> Vec<(u32, u32)> {
        let m = self.arms.len() as u32;
        let mut edges = Vec::new();
        for u in 0..m {
            for v in u + 1..m {
                if self.pairwise_valid(u, v) {
                    edges.push((u, v));
                }
            }
        }
        edges
    }
}
