/// Flags each bond that lies on a cycle of the bond graph.
///
/// A bond is on a cycle iff it is not a bridge; bridges are found with an
/// iterative low-link depth-first search. Parallel bonds between the same
/// pair count as a cycle.
pub fn ring_bonds(n_atoms: usize, bonds: &[(usize, usize)]) -> Vec<bool> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_atoms];
    for (e, &(a, b)) in bonds.iter().enumerate() {
        adj[a].push((b, e));
        adj[b].push((a, e));
    }
    const UNSEEN: usize = usize::MAX;
    let mut disc = vec![UNSEEN; n_atoms];
    let mut low = vec![0usize; n_atoms];
    let mut in_ring = vec![true; bonds.len()];
    let mut clock = 0;

    for root in 0..n_atoms {
        if disc[root] != UNSEEN {
            continue;
        }
        // (node, edge used to reach it, next adjacency position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = clock;
        low[root] = clock;
        clock += 1;
        while let Some(top) = stack.last_mut() {
            let (v, via) = (top.0, top.1);
            if top.2 < adj[v].len() {
                let (w, e) = adj[v][top.2];
                top.2 += 1;
                if e == via {
                    continue;
                }
                if disc[w] == UNSEEN {
                    disc[w] = clock;
                    low[w] = clock;
                    clock += 1;
                    stack.push((w, e, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[v]);
                    if low[v] > disc[parent] {
                        in_ring[via] = false;
                    }
                }
            }
        }
    }
    in_ring
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_has_no_ring_bonds() {
        assert_eq!(ring_bonds(4, &[(0, 1), (1, 2), (2, 3)]), vec![false; 3]);
    }

    #[test]
    fn fused_and_pendant() {
        // triangle 0-1-2 plus pendant 2-3 and square 3-4-5-6
        let bonds = [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 6), (6, 3)];
        assert_eq!(
            ring_bonds(7, &bonds),
            vec![true, true, true, false, true, true, true, true]
        );
    }

    #[test]
    fn disconnected_components() {
        assert_eq!(ring_bonds(5, &[(0, 1), (2, 3), (3, 4), (4, 2)]), vec![false, true, true, true]);
        assert!(ring_bonds(1, &[]).is_empty());
    }
}
