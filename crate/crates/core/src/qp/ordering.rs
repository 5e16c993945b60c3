//! Minimum-degree fill-reducing ordering.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use crate::scalar::Scalar;
use crate::sparse::CscMatrix;

/// Minimum-degree ordering of the symmetric pattern stored in the upper triangle `upper`.
///
/// Returns `perm` with `perm[k]` the original index eliminated at step `k`. Ties are
/// broken by the lowest index so the result is fully deterministic.
pub fn minimum_degree<T: Scalar>(upper: &CscMatrix<T>) -> Vec<usize> {
    let n = upper.ncols();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (r, c, _) in upper.triplets() {
        if r != c {
            adj[r].insert(c);
            adj[c].insert(r);
        }
    }

    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut eliminated = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    let mut nbrs: Vec<usize> = Vec::new();

    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        perm.push(v);

        nbrs.clear();
        nbrs.extend(std::mem::take(&mut adj[v]));
        for &w in &nbrs {
            adj[w].remove(&v);
        }
        // neighbours of v become a clique
        for (i, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        for &w in &nbrs {
            heap.push(Reverse((adj[w].len(), w)));
        }
    }
    debug_assert_eq!(perm.len(), n);
    perm
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}
