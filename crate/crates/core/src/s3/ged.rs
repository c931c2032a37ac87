// SPDX-License-Identifier: Apache-2.0

//! Graph edit distance with unit costs.
//!
//! An edit path is induced by a partial injective node mapping from the
//! first graph into the second. Costs: deleting or inserting a node is 1,
//! relabeling a node is 1 when the labels differ, deleting or inserting an
//! edge is 1, and changing an edge's operand index is 1. Edges between the
//! same ordered node pair are matched as multisets of operand indices.
//!
//! Small graphs are solved exactly with A* over the mapping of first-graph
//! nodes. Larger graphs get an admissible lower bound, a greedy upper bound
//! from a simultaneous walk from the roots, and a budgeted A* that tightens
//! both; the result is exact only if the bounds meet.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::symgraph::SymGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GedConfig {
    /// Largest node count solved exactly regardless of effort.
    pub exact_max_nodes: usize,
    /// Search states A* may generate for larger graphs.
    pub budget: usize,
}

impl Default for GedConfig {
    fn default() -> Self {
        GedConfig {
            exact_max_nodes: 12,
            budget: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GedResult {
    /// Cost of the best edit path found.
    pub distance: u32,
    /// Proven lower bound; equals `distance` when `exact`.
    pub lower_bound: u32,
    pub exact: bool,
    /// Image of each first-graph node in the second graph, if any.
    pub mapping: Vec<Option<usize>>,
}

type Groups = HashMap<(usize, usize), Vec<u32>>;

/// Edges between the same ordered pair of nodes, as sorted index lists.
fn groups(g: &SymGraph) -> Groups {
    let mut m: Groups = HashMap::new();
    for e in &g.edges {
        m.entry((e.parent, e.child)).or_default().push(e.index);
    }
    for v in m.values_mut() {
        v.sort_unstable();
    }
    m
}

/// Edit cost between two multisets of operand indices on one node pair.
fn pair_cost(a: &[u32], b: &[u32]) -> u32 {
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    (a.len().max(b.len()) - common) as u32
}

/// Two multisets over small integer keys with their overlap maintained
/// incrementally; `excess` is the edit lower bound between them.
#[derive(Clone)]
struct Overlap {
    a: Vec<u32>,
    b: Vec<u32>,
    na: u32,
    nb: u32,
    common: u32,
}

impl Overlap {
    fn new(keys: usize) -> Overlap {
        Overlap {
            a: vec![0; keys],
            b: vec![0; keys],
            na: 0,
            nb: 0,
            common: 0,
        }
    }

    fn excess(&self) -> u32 {
        self.na.max(self.nb) - self.common
    }

    fn add_a(&mut self, k: usize) {
        self.a[k] += 1;
        self.na += 1;
        if self.a[k] <= self.b[k] {
            self.common += 1;
        }
    }

    fn add_b(&mut self, k: usize) {
        self.b[k] += 1;
        self.nb += 1;
        if self.b[k] <= self.a[k] {
            self.common += 1;
        }
    }

    fn remove_a(&mut self, k: usize) {
        if self.a[k] <= self.b[k] {
            self.common -= 1;
        }
        self.a[k] -= 1;
        self.na -= 1;
    }

    fn remove_b(&mut self, k: usize) {
        if self.b[k] <= self.a[k] {
            self.common -= 1;
        }
        self.b[k] -= 1;
        self.nb -= 1;
    }
}

/// Remaining-work bound: label overlap of unplaced first-graph nodes with
/// unused second-graph nodes, plus operand-index overlap of edges with an
/// unplaced endpoint on either side.
#[derive(Clone)]
struct Bound {
    nodes: Overlap,
    edges: Overlap,
}

impl Bound {
    fn value(&self) -> u32 {
        self.nodes.excess() + self.edges.excess()
    }
}

struct Problem<'a> {
    a: &'a SymGraph,
    b: &'a SymGraph,
    la: Vec<u32>,
    lb: Vec<u32>,
    ga: Groups,
    gb: Groups,
    /// Neighbors of each node (either direction), deduplicated.
    nbr_a: Vec<Vec<usize>>,
    nbr_b: Vec<Vec<usize>>,
    /// Incident edges of each node as (operand index, other endpoint).
    inc_a: Vec<Vec<(u32, usize)>>,
    inc_b: Vec<Vec<(u32, usize)>>,
    labels: usize,
    indices: usize,
    order: Vec<usize>,
    /// Position of each first-graph node in `order`.
    rank: Vec<usize>,
    empty: Vec<u32>,
}

fn incident(n: usize, g: &SymGraph) -> Vec<Vec<(u32, usize)>> {
    let mut v = vec![Vec::new(); n];
    for e in &g.edges {
        v[e.parent].push((e.index, e.child));
        v[e.child].push((e.index, e.parent));
    }
    v
}

fn neighbors(n: usize, g: &SymGraph) -> Vec<Vec<usize>> {
    let mut v = vec![Vec::new(); n];
    for e in &g.edges {
        v[e.parent].push(e.child);
        v[e.child].push(e.parent);
    }
    for l in &mut v {
        l.sort_unstable();
        l.dedup();
    }
    v
}

impl<'a> Problem<'a> {
    fn new(a: &'a SymGraph, b: &'a SymGraph) -> Problem<'a> {
        let mut ids: HashMap<&str, u32> = HashMap::new();
        let mut intern = |l: &'a String| {
            let n = ids.len() as u32;
            *ids.entry(l.as_str()).or_insert(n)
        };
        let la: Vec<u32> = a.labels.iter().map(&mut intern).collect();
        let lb: Vec<u32> = b.labels.iter().map(&mut intern).collect();
        // breadth-first from the roots keeps mapped neighbors close together
        let n = a.labels.len();
        let nbr_a = neighbors(n, a);
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        let mut queue: std::collections::VecDeque<usize> = a.roots.iter().copied().collect();
        let mut starts: Vec<usize> = (0..n).rev().collect();
        loop {
            while let Some(x) = queue.pop_front() {
                if seen[x] {
                    continue;
                }
                seen[x] = true;
                order.push(x);
                queue.extend(nbr_a[x].iter().copied().filter(|&y| !seen[y]));
            }
            match starts.iter().position(|&s| !seen[s]) {
                Some(i) => queue.push_back(starts.remove(i)),
                None => break,
            }
        }
        let mut rank = vec![0; n];
        for (i, &x) in order.iter().enumerate() {
            rank[x] = i;
        }
        let indices = a
            .edges
            .iter()
            .chain(&b.edges)
            .map(|e| e.index as usize + 1)
            .max()
            .unwrap_or(0);
        Problem {
            a,
            b,
            la,
            lb,
            inc_a: incident(n, a),
            inc_b: incident(b.labels.len(), b),
            labels: ids.len(),
            indices,
            ga: groups(a),
            gb: groups(b),
            nbr_a,
            nbr_b: neighbors(b.labels.len(), b),
            order,
            rank,
            empty: Vec::new(),
        }
    }

    fn ea(&self, u: usize, v: usize) -> &[u32] {
        self.ga.get(&(u, v)).unwrap_or(&self.empty)
    }

    fn eb(&self, x: usize, y: usize) -> &[u32] {
        self.gb.get(&(x, y)).unwrap_or(&self.empty)
    }

    /// Cost added by mapping `u` to `x`, given the images `map` of nodes
    /// already placed (indexed by first-graph node) and the preimages `inv`.
    fn step_cost(
        &self,
        u: usize,
        x: Option<usize>,
        map: &[Option<Option<usize>>],
        inv: &[Option<usize>],
    ) -> u32 {
        let mut c = match x {
            None => 1,
            Some(x) => u32::from(self.la[u] != self.lb[x]),
        };
        for &v in &self.nbr_a[u] {
            let Some(y) = map[v] else { continue };
            match (x, y) {
                (Some(x), Some(y)) => {
                    c += pair_cost(self.ea(u, v), self.eb(x, y))
                        + pair_cost(self.ea(v, u), self.eb(y, x));
                }
                _ => c += (self.ea(u, v).len() + self.ea(v, u).len()) as u32,
            }
        }
        if let Some(x) = x {
            // second-graph edges to already placed images with no first-graph counterpart
            for &y in &self.nbr_b[x] {
                let Some(v) = inv[y] else { continue };
                if !self.nbr_a[u].contains(&v) {
                    c += (self.eb(x, y).len() + self.eb(y, x).len()) as u32;
                }
            }
        }
        c
    }

    /// Admissible estimate of the cost of placing `order[k..]`.
    fn bound(&self, k: usize, inv: &[Option<usize>]) -> Bound {
        let mut nodes = Overlap::new(self.labels);
        let mut edges = Overlap::new(self.indices);
        for &u in &self.order[k..] {
            nodes.add_a(self.la[u] as usize);
        }
        for (x, &l) in self.lb.iter().enumerate() {
            if inv[x].is_none() {
                nodes.add_b(l as usize);
            }
        }
        for e in &self.a.edges {
            if self.rank[e.parent] >= k || self.rank[e.child] >= k {
                edges.add_a(e.index as usize);
            }
        }
        for e in &self.b.edges {
            if inv[e.parent].is_none() || inv[e.child].is_none() {
                edges.add_b(e.index as usize);
            }
        }
        Bound { nodes, edges }
    }

    fn heuristic(&self, k: usize, inv: &[Option<usize>]) -> u32 {
        self.bound(k, inv).value()
    }

    /// Full cost of a complete mapping.
    fn cost(&self, mapping: &[Option<usize>]) -> u32 {
        let mut map: Vec<Option<Option<usize>>> = vec![None; mapping.len()];
        let mut inv = vec![None; self.lb.len()];
        let mut total = 0;
        for &u in &self.order {
            total += self.step_cost(u, mapping[u], &map, &inv);
            map[u] = Some(mapping[u]);
            if let Some(x) = mapping[u] {
                inv[x] = Some(u);
            }
        }
        total + self.heuristic(self.order.len(), &inv)
    }

    /// Greedy mapping: pair nodes reached by the same operand positions from
    /// paired roots, then pair leftovers with equal labels.
    fn greedy(&self) -> Vec<Option<usize>> {
        let na = self.la.len();
        let mut mapping = vec![None; na];
        let mut used = vec![false; self.lb.len()];
        let kids = |g: &SymGraph, n: usize| {
            let mut v: Vec<(u32, usize)> = g
                .edges
                .iter()
                .filter(|e| e.parent == n)
                .map(|e| (e.index, e.child))
                .collect();
            v.sort_unstable();
            v
        };
        let mut ka: Vec<Vec<(u32, usize)>> = (0..na).map(|n| kids(self.a, n)).collect();
        let mut kb: Vec<Vec<(u32, usize)>> = (0..self.lb.len()).map(|n| kids(self.b, n)).collect();
        let mut stack: Vec<(usize, usize)> = self
            .a
            .roots
            .iter()
            .copied()
            .zip(self.b.roots.iter().copied())
            .collect();
        stack.reverse();
        let mut done = vec![false; na];
        while let Some((u, x)) = stack.pop() {
            if done[u] || used[x] {
                continue;
            }
            done[u] = true;
            used[x] = true;
            mapping[u] = Some(x);
            let (ca, cb) = (std::mem::take(&mut ka[u]), std::mem::take(&mut kb[x]));
            for (&(_, cu), &(_, cx)) in ca.iter().zip(cb.iter()).rev() {
                stack.push((cu, cx));
            }
        }
        for &u in &self.order {
            if mapping[u].is_some() {
                continue;
            }
            if let Some(x) = (0..self.lb.len()).find(|&x| !used[x] && self.lb[x] == self.la[u]) {
                used[x] = true;
                mapping[u] = Some(x);
            }
        }
        mapping
    }
}

#[derive(Clone)]
struct Node {
    parent: u32,
    k: u32,
    target: Option<u32>,
    g: u32,
}

/// Best-first search. Returns the best complete mapping with its cost and
/// whether it is proven optimal, plus the best proven lower bound.
fn astar(
    p: &Problem<'_>,
    mut best: (u32, Vec<Option<usize>>),
    budget: usize,
) -> (u32, Vec<Option<usize>>, u32, bool) {
    let na = p.la.len();
    let nb = p.lb.len();
    let mut arena: Vec<Node> = vec![Node {
        parent: u32::MAX,
        k: 0,
        target: None,
        g: 0,
    }];
    let mut open: BinaryHeap<Reverse<(u32, Reverse<u32>, u32)>> = BinaryHeap::new();
    let root_h = p.heuristic(0, &vec![None; nb]);
    open.push(Reverse((root_h, Reverse(0), 0)));
    let mut generated = 0usize;
    let mut map: Vec<Option<Option<usize>>> = vec![None; na];
    let mut inv: Vec<Option<usize>> = vec![None; nb];
    while let Some(Reverse((f, _, id))) = open.pop() {
        if f >= best.0 {
            // nothing cheaper remains
            return (best.0, best.1, best.0, true);
        }
        let node = arena[id as usize].clone();
        // rebuild the partial mapping of this state
        map.iter_mut().for_each(|m| *m = None);
        inv.iter_mut().for_each(|m| *m = None);
        let mut cur = id;
        while cur != 0 {
            let n = &arena[cur as usize];
            let u = p.order[n.k as usize - 1];
            map[u] = Some(n.target.map(|t| t as usize));
            if let Some(t) = n.target {
                inv[t as usize] = Some(u);
            }
            cur = n.parent;
        }
        let k = node.k as usize;
        if k == na {
            // goal: the heuristic at a full mapping is the exact remainder
            let mapping: Vec<Option<usize>> = map.iter().map(|m| m.flatten()).collect();
            return (f, mapping, f, true);
        }
        generated += nb + 1 - inv.iter().filter(|m| m.is_some()).count();
        if generated > budget {
            return (best.0, best.1, f, false);
        }
        let u = p.order[k];
        // placing u retires its label and its edges to already placed nodes
        let mut base = p.bound(k, &inv);
        base.nodes.remove_a(p.la[u] as usize);
        for &(i, v) in &p.inc_a[u] {
            if p.rank[v] < k {
                base.edges.remove_a(i as usize);
            }
        }
        let mut targets: Vec<Option<usize>> =
            (0..nb).filter(|&x| inv[x].is_none()).map(Some).collect();
        targets.push(None);
        for t in targets {
            let g = node.g + p.step_cost(u, t, &map, &inv);
            let h = match t {
                None => base.value(),
                Some(x) => {
                    // apply x's share, read the bound, then undo it
                    base.nodes.remove_b(p.lb[x] as usize);
                    let retired = p.inc_b[x].iter().filter(|&&(_, y)| inv[y].is_some());
                    retired
                        .clone()
                        .for_each(|&(i, _)| base.edges.remove_b(i as usize));
                    let h = base.value();
                    retired.for_each(|&(i, _)| base.edges.add_b(i as usize));
                    base.nodes.add_b(p.lb[x] as usize);
                    h
                }
            };
            let f = g + h;
            if f >= best.0 {
                continue;
            }
            arena.push(Node {
                parent: id,
                k: node.k + 1,
                target: t.map(|x| x as u32),
                g,
            });
            let nid = (arena.len() - 1) as u32;
            if k + 1 == na {
                // complete: f is its exact cost
                let mut full: Vec<Option<usize>> = map.iter().map(|m| m.flatten()).collect();
                full[u] = t;
                best = (f, full);
            }
            open.push(Reverse((f, Reverse(node.k + 1), nid)));
        }
    }
    (best.0, best.1.clone(), best.0, true)
}

/// Edit distance with diagnostics of how it was obtained.
pub fn ged_with(a: &SymGraph, b: &SymGraph, cfg: &GedConfig) -> GedResult {
    let p = Problem::new(a, b);
    if a == b {
        return GedResult {
            distance: 0,
            lower_bound: 0,
            exact: true,
            mapping: (0..a.labels.len()).map(Some).collect(),
        };
    }
    let greedy = p.greedy();
    let ub = p.cost(&greedy);
    // distinct graphs with single roots encode distinct expressions
    let lb0 = p.heuristic(0, &vec![None; b.labels.len()]).max(1);
    if lb0 >= ub {
        return GedResult {
            distance: ub,
            lower_bound: ub,
            exact: true,
            mapping: greedy,
        };
    }
    let budget = if a.labels.len().max(b.labels.len()) <= cfg.exact_max_nodes {
        usize::MAX
    } else {
        cfg.budget
    };
    let (d, mapping, lb, exact) = astar(&p, (ub, greedy), budget);
    let lower_bound = if exact { d } else { lb.max(lb0).min(d) };
    GedResult {
        distance: d,
        lower_bound,
        exact,
        mapping,
    }
}

/// Exact or best-effort edit distance under the default configuration.
pub fn ged(a: &SymGraph, b: &SymGraph) -> u32 {
    ged_with(a, b, &GedConfig::default()).distance
}

/// First node pair where the mapping disagrees, walking the first graph
/// breadth-first from its roots; `None` on the side of an insertion or
/// deletion.
pub fn first_difference(
    a: &SymGraph,
    b: &SymGraph,
    mapping: &[Option<usize>],
) -> Option<(Option<String>, Option<String>)> {
    let p = Problem::new(a, b);
    for &u in &p.order {
        match mapping[u] {
            None => return Some((Some(a.labels[u].clone()), None)),
            Some(x) if a.labels[u] != b.labels[x] => {
                return Some((Some(a.labels[u].clone()), Some(b.labels[x].clone())))
            }
            _ => {}
        }
    }
    let used: std::collections::HashSet<usize> = mapping.iter().flatten().copied().collect();
    (0..b.labels.len())
        .find(|x| !used.contains(x))
        .map(|x| (None, Some(b.labels[x].clone())))
}
