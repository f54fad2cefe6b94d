//! Strongly connected components and DAG condensation over a CSR graph.

/// Compressed adjacency: the successors of node `v` are
/// `targets[offsets[v]..offsets[v + 1]]`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Csr {
    pub offsets: Vec<u32>,
    pub targets: Vec<u32>,
}

impl Csr {
    /// Builds from an edge list over nodes `0..n`. Duplicate edges and
    /// self-loops are dropped; successor lists come out sorted.
    pub fn from_edges(n: usize, edges: &mut Vec<(u32, u32)>) -> Self {
        edges.retain(|(a, b)| a != b);
        Self::grouped(n, edges)
    }

    /// Groups `(key, value)` pairs by key; keys and values may come from
    /// different id spaces, so nothing is dropped except duplicates.
    pub fn grouped(n: usize, edges: &mut Vec<(u32, u32)>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        let mut offsets = vec![0u32; n + 1];
        for &(a, _) in edges.iter() {
            offsets[a as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets = edges.iter().map(|&(_, b)| b).collect();
        Csr { offsets, targets }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    #[inline]
    pub fn successors(&self, v: u32) -> &[u32] {
        let v = v as usize;
        &self.targets[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }
}

/// Result of condensing a graph into its component DAG.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Condensation {
    /// Component of every node. Components are numbered in topological
    /// order: every DAG edge goes from a lower to a higher id.
    pub comp_of: Vec<u32>,
    pub dag: Csr,
}

impl Condensation {
    pub fn component_count(&self) -> usize {
        self.dag.node_count()
    }

    /// Checks the topological-numbering witness, which implies acyclicity.
    pub fn is_topologically_numbered(&self) -> bool {
        (0..self.component_count() as u32).all(|c| self.dag.successors(c).iter().all(|&d| d > c))
    }
}

/// Tarjan's algorithm with an explicit call stack.
pub fn strongly_connected(graph: &Csr) -> Vec<u32> {
    const UNSEEN: u32 = u32::MAX;
    let n = graph.node_count();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut comp = vec![UNSEEN; n];
    let mut next_index = 0u32;
    let mut next_comp = 0u32;
    // (node, position in its successor list)
    let mut calls: Vec<(u32, usize)> = Vec::new();

    for root in 0..n as u32 {
        if index[root as usize] != UNSEEN {
            continue;
        }
        calls.push((root, 0));
        index[root as usize] = next_index;
        low[root as usize] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root as usize] = true;

        while let Some(&mut (v, ref mut pos)) = calls.last_mut() {
            let succ = graph.successors(v);
            if *pos < succ.len() {
                let w = succ[*pos];
                *pos += 1;
                if index[w as usize] == UNSEEN {
                    index[w as usize] = next_index;
                    low[w as usize] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w as usize] = true;
                    calls.push((w, 0));
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
                continue;
            }
            calls.pop();
            if let Some(&(parent, _)) = calls.last() {
                low[parent as usize] = low[parent as usize].min(low[v as usize]);
            }
            if low[v as usize] == index[v as usize] {
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w as usize] = false;
                    comp[w as usize] = next_comp;
                    if w == v {
                        break;
                    }
                }
                next_comp += 1;
            }
        }
    }
    comp
}

/// Condenses `graph` into its SCC DAG.
pub fn condense(graph: &Csr) -> Condensation {
    let raw = strongly_connected(graph);
    let count = raw.iter().copied().max().map_or(0, |m| m + 1);
    // Tarjan emits sinks first; flip so edges point to larger ids.
    let comp_of: Vec<u32> = raw.iter().map(|&c| count - 1 - c).collect();
    let mut edges = Vec::new();
    for v in 0..graph.node_count() as u32 {
        let cv = comp_of[v as usize];
        for &w in graph.successors(v) {
            let cw = comp_of[w as usize];
            if cv != cw {
                edges.push((cv, cw));
            }
        }
    }
    let dag = Csr::from_edges(count as usize, &mut edges);
    Condensation { comp_of, dag }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reach_matrix(n: usize, next: impl Fn(u32) -> Vec<u32>) -> Vec<Vec<bool>> {
        (0..n)
            .map(|s| {
                let mut seen = vec![false; n];
                let mut stack = vec![s as u32];
                seen[s] = true;
                while let Some(v) = stack.pop() {
                    for w in next(v) {
                        if !seen[w as usize] {
                            seen[w as usize] = true;
                            stack.push(w);
                        }
                    }
                }
                seen
            })
            .collect()
    }

    #[test]
    fn two_cycle_is_one_component() {
        let g = Csr::from_edges(3, &mut vec![(0, 1), (1, 0), (1, 2)]);
        let c = condense(&g);
        assert_eq!(c.comp_of[0], c.comp_of[1]);
        assert_ne!(c.comp_of[0], c.comp_of[2]);
        assert_eq!(c.component_count(), 2);
        assert!(c.is_topologically_numbered());
    }

    #[test]
    fn long_chain_does_not_overflow() {
        let n = 200_000u32;
        let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        edges.push((n - 1, 0));
        let c = condense(&Csr::from_edges(n as usize, &mut edges));
        assert_eq!(c.component_count(), 1);
    }

    proptest! {
        #[test]
        fn condensation_preserves_reachability(
            n in 1usize..40,
            raw in proptest::collection::vec((0u32..40, 0u32..40), 0..120),
        ) {
            let mut edges: Vec<_> = raw.into_iter().map(|(a, b)| (a % n as u32, b % n as u32)).collect();
            let g = Csr::from_edges(n, &mut edges);
            let c = condense(&g);
            prop_assert!(c.is_topologically_numbered());
            let direct = reach_matrix(n, |v| g.successors(v).to_vec());
            let cm = reach_matrix(c.component_count(), |v| c.dag.successors(v).to_vec());
            for s in 0..n {
                for t in 0..n {
                    prop_assert_eq!(direct[s][t], cm[c.comp_of[s] as usize][c.comp_of[t] as usize]);
                    let same = c.comp_of[s] == c.comp_of[t];
                    prop_assert_eq!(same, direct[s][t] && direct[t][s]);
                }
            }
        }
    }
}
