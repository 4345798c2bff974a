//! Directed-graph helpers for subsumption structure: strongly connected
//! components and the condensation's source components.

use alloc::vec;
use alloc::vec::Vec;

/// The strongly connected components of `adj` (adjacency lists, nodes
/// `0..n`). Each component's node list is sorted ascending. Component order
/// is reverse-topological over the condensation: every edge between distinct
/// components points from a later entry to an earlier one.
pub fn strongly_connected_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    const UNVISITED: usize = usize::MAX;
    let mut indices = vec![UNVISITED; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0usize;
    // Explicit frames of (node, next-edge cursor) instead of recursion so
    // deep graphs cannot overflow the call stack.
    let mut frames: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if indices[root] != UNVISITED {
            continue;
        }
        indices[root] = counter;
        lowlink[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        frames.push((root, 0));

        while let Some(frame) = frames.last_mut() {
            let v = frame.0;
            if frame.1 < adj[v].len() {
                let w = adj[v][frame.1];
                frame.1 += 1;
                if indices[w] == UNVISITED {
                    indices[w] = counter;
                    lowlink[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] && indices[w] < lowlink[v] {
                    lowlink[v] = indices[w];
                }
            } else {
                frames.pop();
                if let Some(parent) = frames.last() {
                    let p = parent.0;
                    if lowlink[v] < lowlink[p] {
                        lowlink[p] = lowlink[v];
                    }
                }
                if lowlink[v] == indices[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("component root is on the stack");
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    component.sort_unstable();
                    components.push(component);
                }
            }
        }
    }
    components
}

/// The condensation of `adj`: components, a node-to-component map, and
/// which components receive an edge from a different component.
pub struct Condensation {
    pub components: Vec<Vec<usize>>,
    pub component_of: Vec<usize>,
    pub has_incoming: Vec<bool>,
}

impl Condensation {
    pub fn of(adj: &[Vec<usize>]) -> Self {
        let components = strongly_connected_components(adj);
        let mut component_of = vec![0usize; adj.len()];
        for (c, members) in components.iter().enumerate() {
            for &node in members {
                component_of[node] = c;
            }
        }
        let mut has_incoming = vec![false; components.len()];
        for (u, targets) in adj.iter().enumerate() {
            for &w in targets {
                if component_of[u] != component_of[w] {
                    has_incoming[component_of[w]] = true;
                }
            }
        }
        Condensation {
            components,
            component_of,
            has_incoming,
        }
    }

    /// Components with no incoming cross edges, in component order.
    pub fn source_components(&self) -> Vec<usize> {
        (0..self.components.len())
            .filter(|&c| !self.has_incoming[c])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// a→b, b→c, b→d, e→f as nodes 0..6.
    fn two_trees() -> Vec<Vec<usize>> {
        vec![vec![1], vec![2, 3], vec![], vec![], vec![5], vec![]]
    }

    #[test]
    fn isolated_chains_have_singleton_components_and_two_sources() {
        let adj = two_trees();
        let cond = Condensation::of(&adj);
        assert_eq!(cond.components.len(), 6);
        let sources = cond.source_components();
        let mut source_nodes: Vec<usize> = sources
            .iter()
            .flat_map(|&c| cond.components[c].iter().copied())
            .collect();
        source_nodes.sort_unstable();
        assert_eq!(source_nodes, vec![0, 4]);
    }

    #[test]
    fn cycles_collapse_into_one_component() {
        // c→a, a↔b: component {a,b} with one incoming edge, {c} a source.
        let adj = vec![vec![1], vec![0], vec![0]];
        let cond = Condensation::of(&adj);
        assert_eq!(cond.components.len(), 2);
        assert_eq!(cond.component_of[0], cond.component_of[1]);
        assert_ne!(cond.component_of[2], cond.component_of[0]);
        let sources = cond.source_components();
        assert_eq!(sources.len(), 1);
        assert_eq!(cond.components[sources[0]], vec![2]);
    }

    #[test]
    fn component_order_is_reverse_topological() {
        let adj = two_trees();
        let cond = Condensation::of(&adj);
        for (u, targets) in adj.iter().enumerate() {
            for &w in targets {
                assert!(cond.component_of[w] < cond.component_of[u]);
            }
        }
    }

    #[test]
    fn components_match_mutual_reachability_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5CC);
        for _ in 0..30 {
            let n = 8usize;
            let mut adj = vec![Vec::new(); n];
            for u in 0..n {
                for w in 0..n {
                    if u != w && rng.gen_bool(0.2) {
                        adj[u].push(w);
                    }
                }
            }
            let reach = |start: usize| {
                let mut seen = vec![false; n];
                let mut stack = vec![start];
                while let Some(v) = stack.pop() {
                    if seen[v] {
                        continue;
                    }
                    seen[v] = true;
                    stack.extend(adj[v].iter().copied().filter(|&w| !seen[w]));
                }
                seen
            };
            let reachable: Vec<Vec<bool>> = (0..n).map(reach).collect();
            let cond = Condensation::of(&adj);
            for u in 0..n {
                for w in 0..n {
                    let mutual = reachable[u][w] && reachable[w][u];
                    assert_eq!(
                        cond.component_of[u] == cond.component_of[w],
                        mutual || u == w,
                        "nodes {u},{w}"
                    );
                }
            }
        }
    }
}
