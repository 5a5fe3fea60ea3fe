//! Reachability over directed edge sets.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Transitive (non-reflexive) closure: `(a, b)` is included iff `b` is
/// reachable from `a` by a path of one or more edges.
pub fn transitive_closure<N, I>(edges: I) -> BTreeSet<(N, N)>
where
    N: Ord + Clone,
    I: IntoIterator<Item = (N, N)>,
{
    let adjacency = adjacency(edges);
    let mut closure = BTreeSet::new();
    for start in adjacency.keys() {
        for reached in reachable_from(&adjacency, start) {
            closure.insert((start.clone(), reached));
        }
    }
    closure
}

pub(crate) fn adjacency<N, I>(edges: I) -> BTreeMap<N, BTreeSet<N>>
where
    N: Ord + Clone,
    I: IntoIterator<Item = (N, N)>,
{
    let mut adjacency: BTreeMap<N, BTreeSet<N>> = BTreeMap::new();
    for (from, to) in edges {
        adjacency.entry(from).or_default().insert(to);
    }
    adjacency
}

/// Nodes reachable from `start` by at least one edge.
pub(crate) fn reachable_from<N: Ord + Clone>(
    adjacency: &BTreeMap<N, BTreeSet<N>>,
    start: &N,
) -> BTreeSet<N> {
    let mut seen = BTreeSet::new();
    let mut queue: VecDeque<&N> = VecDeque::new();
    queue.push_back(start);
    while let Some(node) = queue.pop_front() {
        if let Some(next) = adjacency.get(node) {
            for n in next {
                if seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
    }
    seen
}

/// True when `to` is reachable from `from` through a path of at least two
/// edges that does not use the direct edge `(from, to)`.
pub(crate) fn reachable_without_edge<N: Ord + Clone>(
    adjacency: &BTreeMap<N, BTreeSet<N>>,
    from: &N,
    to: &N,
) -> bool {
    let mut seen = BTreeSet::new();
    let mut queue: VecDeque<&N> = VecDeque::new();
    if let Some(next) = adjacency.get(from) {
        for n in next.iter().filter(|n| *n != to) {
            if seen.insert(n.clone()) {
                queue.push_back(n);
            }
        }
    }
    while let Some(node) = queue.pop_front() {
        if let Some(next) = adjacency.get(node) {
            for n in next {
                if n == to {
                    return true;
                }
                if seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
    }
    false
}
