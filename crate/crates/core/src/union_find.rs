//! Disjoint-set forest with path compression and union by rank.

#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        assert!(
            n <= u32::MAX as usize,
            "union-find supports at most 2^32-1 elements"
        );
        UnionFind {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] as usize != root {
            root = self.parent[root] as usize;
        }
        let mut cur = x;
        while self.parent[cur] as usize != root {
            let next = self.parent[cur] as usize;
            self.parent[cur] = root as u32;
            cur = next;
        }
        root
    }

    /// Returns `true` if `a` and `b` were in different sets.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb as u32,
            std::cmp::Ordering::Greater => self.parent[rb] = ra as u32,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra as u32;
                self.rank[ra] = self.rank[ra].saturating_add(1);
            }
        }
        true
    }

    pub fn connected(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    /// Fully compresses every path, so `parent[x]` is the root of `x`.
    pub fn compress(&mut self) {
        for x in 0..self.parent.len() {
            self.find(x);
        }
    }

    /// Members of every set, each sorted ascending, sets ordered by smallest
    /// member.
    pub fn components(&mut self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut slot_of_root = vec![usize::MAX; n];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for x in 0..n {
            let r = self.find(x);
            if slot_of_root[r] == usize::MAX {
                slot_of_root[r] = out.len();
                out.push(Vec::new());
            }
            out[slot_of_root[r]].push(x);
        }
        out
    }
}

/// Transitive closure of `groups` over `n` elements: every group is treated as
/// a clique (applied as a star on its first member).
///
/// # Panics
///
/// If any index is `>= n`.
pub fn union_find_closure<G: AsRef<[usize]>>(n: usize, groups: &[G]) -> UnionFind {
    let mut uf = UnionFind::new(n);
    for group in groups {
        let group = group.as_ref();
        for &m in group {
            assert!(m < n, "index {m} out of range for {n} elements");
        }
        if let Some((&head, rest)) = group.split_first() {
            for &m in rest {
                uf.union(head, m);
            }
        }
    }
    uf.compress();
    uf
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::collections::VecDeque;

    /// Component label per node via BFS over the explicit clique graph.
    fn bfs_labels(n: usize, groups: &[Vec<usize>]) -> Vec<usize> {
        let mut adj = vec![Vec::new(); n];
        for g in groups {
            for &a in g {
                for &b in g {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        let mut label = vec![usize::MAX; n];
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let mut queue = VecDeque::from([start]);
            label[start] = start;
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if label[w] == usize::MAX {
                        label[w] = start;
                        queue.push_back(w);
                    }
                }
            }
        }
        label
    }

    #[test]
    fn transitive_chain() {
        let mut uf = union_find_closure(3, &[vec![0, 1], vec![1, 2]]);
        assert!(uf.connected(0, 2));
        assert_eq!(uf.components(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn no_groups_gives_singletons() {
        let mut uf = union_find_closure::<Vec<usize>>(3, &[]);
        assert_eq!(uf.components(), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn out_of_range_panics() {
        union_find_closure(2, &[vec![0, 2]]);
    }

    #[test]
    fn matches_bfs_on_random_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.gen_range(1..=50);
            let groups: Vec<Vec<usize>> = (0..rng.gen_range(0..20))
                .map(|_| {
                    (0..rng.gen_range(1..5))
                        .map(|_| rng.gen_range(0..n))
                        .collect()
                })
                .collect();
            let mut uf = union_find_closure(n, &groups);
            let labels = bfs_labels(n, &groups);
            for a in 0..n {
                for b in 0..n {
                    assert_eq!(uf.connected(a, b), labels[a] == labels[b]);
                }
            }
        }
    }

    #[test]
    fn compressed_parents_are_roots() {
        let mut uf = union_find_closure(6, &[vec![0, 1], vec![2, 3], vec![1, 3], vec![4, 5]]);
        for x in 0..6 {
            let r = uf.parent[x] as usize;
            assert_eq!(uf.parent[r] as usize, r);
            assert_eq!(uf.find(x), r);
            let root = uf.find(x);
            assert_eq!(uf.find(root), root);
        }
    }
}
