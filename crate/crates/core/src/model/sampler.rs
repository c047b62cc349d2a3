//! Layer-wise neighbour sampling into message-passing blocks.

use std::rc::Rc;

use rand::seq::index;
use rand::Rng;

use super::tape::Adjacency;
use crate::graph::Graph;

/// Node frontiers and blocks for an `L`-layer pass.
///
/// `frontiers[L]` are the targets in caller order; `frontiers[l]` for
/// `l < L` is the sorted set of nodes whose layer-`l` hidden state is needed.
/// `blocks[l]` maps rows of `frontiers[l]` into rows of `frontiers[l + 1]`
/// and `self_rows[l]` locates each row of `frontiers[l + 1]` in
/// `frontiers[l]`.
#[derive(Debug, Clone)]
pub struct SampledBatch {
    pub frontiers: Vec<Vec<u32>>,
    pub blocks: Vec<Rc<Adjacency>>,
    pub self_rows: Vec<Rc<Vec<usize>>>,
}

/// Samples up to `fanout` in-neighbours per node and layer, uniformly without
/// replacement; `None` keeps every neighbour. Kept neighbours stay in
/// ascending node order.
pub fn sample_blocks<R: Rng>(
    graph: &Graph,
    targets: &[u32],
    layers: usize,
    fanout: Option<usize>,
    rng: &mut R,
) -> SampledBatch {
    let mut frontiers = vec![Vec::new(); layers + 1];
    frontiers[layers] = targets.to_vec();
    let mut blocks = vec![Rc::new(Adjacency { offsets: vec![0], sources: vec![] }); layers];
    let mut self_rows = vec![Rc::new(Vec::new()); layers];
    for l in (0..layers).rev() {
        let dst = &frontiers[l + 1];
        let mut picked: Vec<Vec<u32>> = Vec::with_capacity(dst.len());
        for &v in dst {
            let nb = graph.neighbors(v as usize);
            let chosen = match fanout {
                Some(k) if nb.len() > k => {
                    let mut pos = index::sample(rng, nb.len(), k).into_vec();
                    pos.sort_unstable();
                    pos.into_iter().map(|p| nb[p]).collect()
                }
                _ => nb.to_vec(),
            };
            picked.push(chosen);
        }
        let mut src: Vec<u32> = dst.iter().chain(picked.iter().flatten()).copied().collect();
        src.sort_unstable();
        src.dedup();
        let row_of = |node: u32| src.binary_search(&node).expect("node in source frontier");
        let mut offsets = Vec::with_capacity(dst.len() + 1);
        offsets.push(0);
        let mut sources = Vec::new();
        for p in &picked {
            sources.extend(p.iter().map(|&n| row_of(n)));
            offsets.push(sources.len());
        }
        self_rows[l] = Rc::new(dst.iter().map(|&n| row_of(n)).collect());
        blocks[l] = Rc::new(Adjacency { offsets, sources });
        frontiers[l] = src;
    }
    SampledBatch {
        frontiers,
        blocks,
        self_rows,
    }
}
