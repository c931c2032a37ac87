// SPDX-License-Identifier: Apache-2.0

//! Edit distance by enumerating every partial injective node mapping.
//!
//! Cost of a mapping: unmapped nodes on either side cost 1, mapped nodes
//! with different labels cost 1. For every ordered node pair the edges are
//! multisets of operand indices; a pair of multisets costs the size of the
//! larger minus the indices they share (unshared ones are either changed
//! or inserted/deleted). Pairs whose endpoints are not both mapped cost
//! their edge count.

use std::collections::HashMap;

use s3diff::symgraph::SymGraph;

fn multisets(g: &SymGraph) -> HashMap<(usize, usize), Vec<u32>> {
    let mut m: HashMap<(usize, usize), Vec<u32>> = HashMap::new();
    for e in &g.edges {
        m.entry((e.parent, e.child)).or_default().push(e.index);
    }
    m
}

fn pair_cost(a: &[u32], b: &[u32]) -> u32 {
    let mut rest = b.to_vec();
    let mut shared = 0;
    for x in a {
        if let Some(i) = rest.iter().position(|y| y == x) {
            rest.swap_remove(i);
            shared += 1;
        }
    }
    a.len().max(b.len()) as u32 - shared
}

fn mapping_cost(
    a: &SymGraph,
    b: &SymGraph,
    ea: &HashMap<(usize, usize), Vec<u32>>,
    eb: &HashMap<(usize, usize), Vec<u32>>,
    map: &[Option<usize>],
) -> u32 {
    let mut cost = 0;
    let mut hit = vec![false; b.labels.len()];
    for (u, m) in map.iter().enumerate() {
        match m {
            None => cost += 1,
            Some(x) => {
                hit[*x] = true;
                cost += u32::from(a.labels[u] != b.labels[*x]);
            }
        }
    }
    cost += hit.iter().filter(|h| !**h).count() as u32;
    let empty = Vec::new();
    let mut covered: Vec<(usize, usize)> = Vec::new();
    for (&(u, v), list) in ea {
        match (map[u], map[v]) {
            (Some(x), Some(y)) => {
                covered.push((x, y));
                cost += pair_cost(list, eb.get(&(x, y)).unwrap_or(&empty));
            }
            _ => cost += list.len() as u32,
        }
    }
    for (pair, list) in eb {
        if !covered.contains(pair) {
            cost += list.len() as u32;
        }
    }
    cost
}

/// Minimum cost over all mappings.
pub fn ged(a: &SymGraph, b: &SymGraph) -> u32 {
    let (ea, eb) = (multisets(a), multisets(b));
    let mut best = u32::MAX;
    let mut map = vec![None; a.labels.len()];
    let mut used = vec![false; b.labels.len()];
    #[allow(clippy::too_many_arguments)]
    fn walk(
        u: usize,
        a: &SymGraph,
        b: &SymGraph,
        ea: &HashMap<(usize, usize), Vec<u32>>,
        eb: &HashMap<(usize, usize), Vec<u32>>,
        map: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut u32,
    ) {
        if u == map.len() {
            *best = (*best).min(mapping_cost(a, b, ea, eb, map));
            return;
        }
        map[u] = None;
        walk(u + 1, a, b, ea, eb, map, used, best);
        for x in 0..used.len() {
            if !used[x] {
                used[x] = true;
                map[u] = Some(x);
                walk(u + 1, a, b, ea, eb, map, used, best);
                used[x] = false;
            }
        }
        map[u] = None;
    }
    walk(0, a, b, &ea, &eb, &mut map, &mut used, &mut best);
    best
}
