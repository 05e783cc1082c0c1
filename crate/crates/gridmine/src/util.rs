//! Small internal helpers: disjoint sets and an exact assignment solver.

/// Disjoint-set forest with union by rank and path halving.
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Maximum-weight one-to-one assignment between rows and columns of a
/// nonnegative weight matrix (Kuhn-Munkres with potentials). Returns the
/// total matched weight. Rectangular inputs are padded internally.
pub(crate) fn max_weight_assignment(weights: &[Vec<u64>]) -> u64 {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0;
    }
    let n = rows.max(cols);
    // Minimize negated weights over a square matrix padded with zeros.
    let cost = |i: usize, j: usize| -> i64 {
        if i < rows && j < cols {
            -(weights[i][j] as i64)
        } else {
            0
        }
    };
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // column -> row, 1-indexed
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0u64;
    for j in 1..=n {
        let i = matched_row[j];
        if i >= 1 && i - 1 < rows && j - 1 < cols {
            total += weights[i - 1][j - 1];
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(weights: &[Vec<u64>]) -> u64 {
        let rows = weights.len();
        let cols = weights[0].len();
        let mut best = 0;
        let mut cols_perm: Vec<usize> = (0..cols).collect();
        permute(&mut cols_perm, 0, &mut |perm| {
            let take = rows.min(cols);
            let total: u64 = (0..take).map(|i| weights[i][perm[i]]).sum();
            // Rows beyond cols stay unmatched; also try every row subset by
            // relying on zero weights being no worse than skipping.
            best = best.max(total);
        });
        // For rows > cols the loop above only matches the first `cols` rows;
        // cover the general case by trying row permutations too.
        let mut rows_perm: Vec<usize> = (0..rows).collect();
        permute(&mut rows_perm, 0, &mut |perm| {
            let take = rows.min(cols);
            let total: u64 = (0..take).map(|j| weights[perm[j]][j]).sum();
            best = best.max(total);
        });
        best
    }

    fn permute(items: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == items.len() {
            f(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, f);
            items.swap(k, i);
        }
    }

    #[test]
    fn assignment_matches_brute_force() {
        let cases: Vec<Vec<Vec<u64>>> = vec![
            vec![vec![5]],
            vec![vec![1, 2], vec![3, 4]],
            vec![vec![7, 5, 11], vec![5, 4, 1], vec![9, 3, 2]],
            vec![vec![1, 0, 0, 4], vec![0, 9, 0, 0], vec![3, 0, 8, 0]],
            vec![vec![2, 2], vec![2, 2], vec![2, 2]],
            vec![vec![0, 0], vec![0, 0]],
        ];
        for w in cases {
            assert_eq!(max_weight_assignment(&w), brute_force(&w), "case {w:?}");
        }
    }

    #[test]
    fn assignment_random_small() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let rows = rng.random_range(1..=5);
            let cols = rng.random_range(1..=5);
            let w: Vec<Vec<u64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.random_range(0..20)).collect())
                .collect();
            assert_eq!(max_weight_assignment(&w), brute_force(&w), "case {w:?}");
        }
    }

    #[test]
    fn union_find_components() {
        let mut uf = UnionFind::new(6);
        uf.union(0, 1);
        uf.union(1, 2);
        uf.union(4, 5);
        assert_eq!(uf.find(0), uf.find(2));
        assert_ne!(uf.find(0), uf.find(3));
        assert_eq!(uf.find(4), uf.find(5));
        assert!(!uf.union(0, 2));
    }
}
