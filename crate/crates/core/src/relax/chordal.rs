//! Chordal completion by minimum-degree elimination, clique trees, and
//! rank-one completion of clique-wise blocks.

use std::collections::{BTreeSet, VecDeque};

use num_complex::Complex64;

use crate::numerics::{hermitian_eigenvalues, principal_eigvec, ComplexVector, HermitianMatrix, ZERO_EIG_RTOL};
use crate::{Error, Result};

/// Maximal cliques of a chordal completion, joined into a spanning forest
/// with the running-intersection property.
#[derive(Debug, Clone, PartialEq)]
pub struct CliqueTree {
    pub n: usize,
    /// Sorted vertex lists.
    pub cliques: Vec<Vec<usize>>,
    /// Tree edges `(a, b, separator)` with `a < b`.
    pub edges: Vec<(usize, usize, Vec<usize>)>,
}

impl CliqueTree {
    /// Single clique covering all vertices.
    pub fn dense(n: usize) -> Self {
        Self { n, cliques: vec![(0..n).collect()], edges: Vec::new() }
    }

    /// Cliques in breadth-first order from the lowest clique of each tree,
    /// paired with their parent.
    pub fn bfs_order(&self) -> Vec<(usize, Option<usize>)> {
        let k = self.cliques.len();
        let mut adj = vec![Vec::new(); k];
        for (a, b, _) in &self.edges {
            adj[*a].push(*b);
            adj[*b].push(*a);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        let mut seen = vec![false; k];
        let mut out = Vec::with_capacity(k);
        for root in 0..k {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut q = VecDeque::from([(root, None)]);
            while let Some((c, parent)) = q.pop_front() {
                out.push((c, parent));
                for &d in &adj[c] {
                    if !seen[d] {
                        seen[d] = true;
                        q.push_back((d, Some(c)));
                    }
                }
            }
        }
        out
    }

    /// Edges of the filled graph, `(i, j)` with `i < j`, sorted.
    pub fn filled_edges(&self) -> Vec<(usize, usize)> {
        let mut set = BTreeSet::new();
        for c in &self.cliques {
            for (a, &i) in c.iter().enumerate() {
                for &j in &c[a + 1..] {
                    set.insert((i.min(j), i.max(j)));
                }
            }
        }
        set.into_iter().collect()
    }

    /// Every separator lies in all cliques on the tree path between its ends.
    pub fn has_running_intersection(&self) -> bool {
        // Equivalent check: for each vertex, the cliques containing it
        // induce a connected subtree.
        let k = self.cliques.len();
        let mut adj = vec![Vec::new(); k];
        for (a, b, _) in &self.edges {
            adj[*a].push(*b);
            adj[*b].push(*a);
        }
        for v in 0..self.n {
            let holders: Vec<usize> = (0..k).filter(|&c| self.cliques[c].binary_search(&v).is_ok()).collect();
            let Some(&start) = holders.first() else { continue };
            let mut seen = vec![false; k];
            seen[start] = true;
            let mut stack = vec![start];
            let mut count = 1;
            while let Some(c) = stack.pop() {
                for &d in &adj[c] {
                    if !seen[d] && self.cliques[d].binary_search(&v).is_ok() {
                        seen[d] = true;
                        count += 1;
                        stack.push(d);
                    }
                }
            }
            if count != holders.len() {
                return false;
            }
        }
        true
    }
}

/// Chordal completion of the graph on `n` vertices by minimum-degree
/// elimination (ties to the lowest index).
pub fn chordal_decompose(n: usize, edges: &[(usize, usize)]) -> CliqueTree {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(a, b) in edges {
        if a != b {
            adj[a].insert(b);
            adj[b].insert(a);
        }
    }
    let mut alive = vec![true; n];
    let mut raw: Vec<Vec<usize>> = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n).filter(|&v| alive[v]).min_by_key(|&v| (adj[v].len(), v)).expect("vertex left");
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        for (a, &x) in nbrs.iter().enumerate() {
            for &y in &nbrs[a + 1..] {
                adj[x].insert(y);
                adj[y].insert(x);
            }
        }
        for &x in &nbrs {
            adj[x].remove(&v);
        }
        alive[v] = false;
        let mut c = nbrs;
        c.push(v);
        c.sort_unstable();
        raw.push(c);
    }
    // Keep maximal cliques, in elimination order.
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    for (idx, c) in raw.iter().enumerate() {
        let dominated = raw.iter().enumerate().any(|(o, d)| {
            o != idx && d.len() >= c.len() && is_subset(c, d) && (d.len() > c.len() || o < idx)
        });
        if !dominated {
            cliques.push(c.clone());
        }
    }
    // Maximum-weight spanning forest on intersection sizes (Kruskal).
    let k = cliques.len();
    let mut cand = Vec::new();
    for a in 0..k {
        for b in (a + 1)..k {
            let sep = intersection(&cliques[a], &cliques[b]);
            if !sep.is_empty() {
                cand.push((sep.len(), a, b, sep));
            }
        }
    }
    cand.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut uf: Vec<usize> = (0..k).collect();
    fn find(uf: &mut [usize], mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    let mut tree = Vec::new();
    for (_, a, b, sep) in cand {
        let (ra, rb) = (find(&mut uf, a), find(&mut uf, b));
        if ra != rb {
            uf[ra] = rb;
            tree.push((a, b, sep));
        }
    }
    CliqueTree { n, cliques, edges: tree }
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_ok())
}

fn intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|x| b.binary_search(x).is_ok()).collect()
}

/// Recovers `x` with `(xx*)_c = X_c` on every clique, up to a global phase.
///
/// `blocks[c]` holds the values on `ct.cliques[c]` in that order. Blocks
/// must be rank one within tolerance and agree in magnitude on shared
/// entries; otherwise [`Error::Completion`] names the offending pair.
pub fn rank_one_complete(ct: &CliqueTree, blocks: &[HermitianMatrix]) -> Result<ComplexVector> {
    complete(ct, blocks, true)
}

/// Like [`rank_one_complete`] but without the rank and consistency checks:
/// each block contributes its scaled principal eigenvector, rotated to best
/// match the entries already placed. Used for rounding.
pub fn rank_one_complete_lenient(ct: &CliqueTree, blocks: &[HermitianMatrix]) -> Result<ComplexVector> {
    complete(ct, blocks, false)
}

fn complete(ct: &CliqueTree, blocks: &[HermitianMatrix], strict: bool) -> Result<ComplexVector> {
    if blocks.len() != ct.cliques.len() {
        return Err(Error::Invalid(format!("{} blocks for {} cliques", blocks.len(), ct.cliques.len())));
    }
    let mut x = ComplexVector::zeros(ct.n);
    let mut placed = vec![false; ct.n];
    for (c, parent) in ct.bfs_order() {
        let blk = &blocks[c];
        let idx = &ct.cliques[c];
        if blk.dim() != idx.len() {
            return Err(Error::Invalid(format!("block {c} has dimension {} for clique of size {}", blk.dim(), idx.len())));
        }
        let (lam, v) = principal_eigvec(blk)?;
        let tr = blk.trace().abs();
        if strict && idx.len() > 1 {
            let eigs = hermitian_eigenvalues(blk);
            let second = eigs.get(1).copied().unwrap_or(0.0);
            if second > ZERO_EIG_RTOL * (1.0 + tr) || eigs.last().copied().unwrap_or(0.0) < -ZERO_EIG_RTOL * (1.0 + tr) {
                return Err(Error::Completion(c, parent.unwrap_or(c), format!("block {c} is not rank one (λ₂ = {second:.3e})")));
            }
        }
        let scale = lam.max(0.0).sqrt();
        let local: Vec<Complex64> = (0..idx.len()).map(|a| v.get(a) * scale).collect();
        // Best rotation onto already placed entries.
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, &vi) in idx.iter().enumerate() {
            if placed[vi] {
                acc += local[a].conj() * x.get(vi);
            }
        }
        let rot = if acc.norm() > 0.0 { acc / acc.norm() } else { Complex64::new(1.0, 0.0) };
        for (a, &vi) in idx.iter().enumerate() {
            let val = local[a] * rot;
            if placed[vi] {
                if strict {
                    let old = x.get(vi);
                    let tol = 1e-6 * (1.0 + tr.sqrt());
                    if (old.norm() - val.norm()).abs() > tol {
                        return Err(Error::Completion(
                            parent.unwrap_or(c),
                            c,
                            format!("magnitude mismatch at index {vi}: {:.6e} vs {:.6e}", old.norm(), val.norm()),
                        ));
                    }
                    if (old - val).norm() > tol {
                        return Err(Error::Completion(parent.unwrap_or(c), c, format!("phase mismatch at index {vi}")));
                    }
                }
            } else {
                x.set(vi, val);
                placed[vi] = true;
            }
        }
    }
    Ok(x)
}

/// Extracts the blocks of `xx*` on each clique.
pub fn extract_blocks(ct: &CliqueTree, x: &ComplexVector) -> Vec<HermitianMatrix> {
    ct.cliques
        .iter()
        .map(|c| {
            let sub: Vec<Complex64> = c.iter().map(|&i| x.get(i)).collect();
            HermitianMatrix::outer(&ComplexVector::from_complex(&sub))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn path_graph() {
        let ct = chordal_decompose(3, &[(0, 1), (1, 2)]);
        assert_eq!(ct.cliques.len(), 2);
        assert!(ct.cliques.contains(&vec![0, 1]));
        assert!(ct.cliques.contains(&vec![1, 2]));
        assert_eq!(ct.edges.len(), 1);
        assert_eq!(ct.edges[0].2, vec![1]);
    }

    #[test]
    fn four_cycle_gets_one_chord() {
        let ct = chordal_decompose(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(ct.cliques.len(), 2);
        assert!(ct.cliques.iter().all(|c| c.len() == 3));
        // Exactly one of the two chords appears.
        let f = ct.filled_edges();
        assert_eq!(f.len(), 5);
        assert!(f.contains(&(0, 2)) ^ f.contains(&(1, 3)));
        assert!(ct.has_running_intersection());
    }

    #[test]
    fn dense_pattern_is_one_clique() {
        let mut e = Vec::new();
        for i in 0..5 {
            for j in (i + 1)..5 {
                e.push((i, j));
            }
        }
        let ct = chordal_decompose(5, &e);
        assert_eq!(ct.cliques, vec![vec![0, 1, 2, 3, 4]]);
        assert!(ct.edges.is_empty());
    }

    #[test]
    fn isolated_vertices_get_singletons() {
        let ct = chordal_decompose(3, &[(0, 1)]);
        assert_eq!(ct.cliques.len(), 2);
        assert!(ct.cliques.contains(&vec![2]));
    }

    #[test]
    fn completion_two_cliques() {
        let ct = chordal_decompose(3, &[(0, 1), (1, 2)]);
        let x = ComplexVector::new(vec![1.0, -0.5, 0.3], vec![0.2, 0.7, -1.1]).unwrap();
        let y = rank_one_complete(&ct, &extract_blocks(&ct, &x)).unwrap();
        assert!(equal_up_to_phase(&x, &y) < 1e-10);
    }

    #[test]
    fn zero_separator_leaves_phase_free() {
        let ct = chordal_decompose(3, &[(0, 1), (1, 2)]);
        let x = ComplexVector::new(vec![1.0, 0.0, 0.3], vec![0.2, 0.0, -1.1]).unwrap();
        let y = rank_one_complete(&ct, &extract_blocks(&ct, &x)).unwrap();
        for i in 0..3 {
            assert!((x.get(i).norm() - y.get(i).norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn inconsistent_magnitudes_are_reported() {
        let ct = chordal_decompose(3, &[(0, 1), (1, 2)]);
        let a = ComplexVector::new(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let b = ComplexVector::new(vec![2.0, 1.0], vec![0.0, 0.0]).unwrap();
        let blocks: Vec<HermitianMatrix> = ct
            .cliques
            .iter()
            .map(|c| if c.contains(&0) { HermitianMatrix::outer(&a) } else { HermitianMatrix::outer(&b) })
            .collect();
        match rank_one_complete(&ct, &blocks) {
            Err(Error::Completion(c1, c2, _)) => assert_ne!(c1, c2),
            other => panic!("expected completion error, got {other:?}"),
        }
    }

    #[test]
    fn rank_two_block_rejected_in_strict_mode() {
        let ct = CliqueTree::dense(2);
        assert!(rank_one_complete(&ct, &[HermitianMatrix::identity(2)]).is_err());
        assert!(rank_one_complete_lenient(&ct, &[HermitianMatrix::identity(2)]).is_ok());
    }

    pub(crate) fn equal_up_to_phase(x: &ComplexVector, y: &ComplexVector) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..x.len() {
            acc += y.get(i).conj() * x.get(i);
        }
        let rot = if acc.norm() > 0.0 { acc / acc.norm() } else { Complex64::new(1.0, 0.0) };
        (0..x.len()).map(|i| (x.get(i) - y.get(i) * rot).norm()).fold(0.0, f64::max)
    }

    fn graph_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (2usize..=10).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
            let m = pairs.len();
            (Just(n), proptest::collection::vec(any::<bool>(), m)).prop_map(move |(n, mask)| {
                let e = pairs.iter().zip(mask).filter(|(_, k)| *k).map(|(p, _)| *p).collect();
                (n, e)
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn decomposition_is_a_clique_tree((n, e) in graph_strategy()) {
            let ct = chordal_decompose(n, &e);
            prop_assert!(ct.has_running_intersection());
            let filled = ct.filled_edges();
            for &(a, b) in &e {
                prop_assert!(filled.contains(&(a.min(b), a.max(b))));
            }
            let mut cover = vec![false; n];
            for c in &ct.cliques { for &v in c { cover[v] = true; } }
            prop_assert!(cover.iter().all(|&c| c));
            // Forest: edges = cliques − components.
            prop_assert!(ct.edges.len() < ct.cliques.len());
        }
    }
}
