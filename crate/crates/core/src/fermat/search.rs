use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// When a single-source search may stop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stop {
    /// Settle every reachable node.
    Never,
    /// Stop once this node is settled.
    Target(usize),
    /// Stop before settling any node at distance `>= t`.
    Threshold(f64),
}

pub(crate) const NO_PRED: u32 = u32::MAX;

/// Output of a single-source search. `dist[v]` is `+inf` for nodes that were
/// not settled (unreachable, or cut off by [`Stop`]).
#[derive(Clone, Debug)]
pub struct ShortestPaths {
    pub source: usize,
    pub dist: Vec<f64>,
    pred: Vec<u32>,
    /// Nodes in the order they were settled.
    pub settled: Vec<usize>,
}

impl ShortestPaths {
    pub(crate) fn new(source: usize, dist: Vec<f64>, pred: Vec<u32>, settled: Vec<usize>) -> Self {
        Self {
            source,
            dist,
            pred,
            settled,
        }
    }

    pub fn is_settled(&self, v: usize) -> bool {
        self.dist[v].is_finite()
    }

    /// Node sequence from the source to `v`, if `v` was settled.
    pub fn path_to(&self, v: usize) -> Option<Vec<usize>> {
        if !self.is_settled(v) {
            return None;
        }
        let mut path = vec![v];
        let mut cur = v;
        while self.pred[cur] != NO_PRED {
            cur = self.pred[cur] as usize;
            path.push(cur);
        }
        path.reverse();
        debug_assert_eq!(path[0], self.source);
        Some(path)
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct HeapEntry {
    pub dist: f64,
    pub node: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    // min-heap on (dist, node)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Binary-heap Dijkstra over an adjacency given as a closure
/// `neighbours(u, relax)` that calls `relax(v, w)` for every edge `u -> v`.
pub(crate) fn heap_dijkstra<F>(n: usize, source: usize, stop: Stop, mut neighbours: F) -> ShortestPaths
where
    F: FnMut(usize, &mut dyn FnMut(usize, f64)),
{
    let mut tentative = vec![f64::INFINITY; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NO_PRED; n];
    let mut done = vec![false; n];
    let mut settled = Vec::new();
    let mut heap = BinaryHeap::new();
    tentative[source] = 0.0;
    heap.push(HeapEntry {
        dist: 0.0,
        node: source as u32,
    });
    while let Some(HeapEntry { dist: du, node }) = heap.pop() {
        let u = node as usize;
        if done[u] || du > tentative[u] {
            continue;
        }
        if let Stop::Threshold(t) = stop {
            if du >= t {
                break;
            }
        }
        done[u] = true;
        dist[u] = du;
        settled.push(u);
        if stop == Stop::Target(u) {
            break;
        }
        neighbours(u, &mut |v, w| {
            if done[v] {
                return;
            }
            let cand = du + w;
            if cand < tentative[v] {
                tentative[v] = cand;
                pred[v] = u as u32;
                heap.push(HeapEntry {
                    dist: cand,
                    node: v as u32,
                });
            }
        });
    }
    ShortestPaths::new(source, dist, pred, settled)
}
