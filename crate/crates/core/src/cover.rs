//! Valuation covers of bipartite graphs and their automorphisms.
//!
//! Vertices of the full cover over a base graph pair a base vertex with a
//! 0/1 valuation of the opposite base side; `(x, chi)` and `(u, psi)` are
//! adjacent exactly when `chi(u) != psi(x)`. The base embeds by sending a
//! left vertex to its adjacency row and a right vertex to the zero
//! valuation, and every partial automorphism of the base extends to a total
//! automorphism of the cover.
//!
//! The full cover is exponentially large, so [`k_magic_closure`] instead
//! returns the orbit of the embedded copy under the group of cover
//! automorphisms whose flip rows lie in a fixed permutation-stable linear
//! code; that orbit has closed form and is still closed under an extending
//! automorphism for every small partial map of the base.

use thiserror::Error;

use crate::bits::Bitset;
use crate::graph::{
    check_partial_automorphism, enumerate_partial_automorphisms, invert_permutation,
    is_permutation, Graph, Label, PartialMap, TotalAut,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoverError {
    #[error("size guard exceeded: {0}")]
    SizeGuardExceeded(String),
    #[error("map is not a partial automorphism of the base")]
    NotPartialAutomorphism,
    #[error("object does not match the base graph")]
    BaseMismatch,
    #[error("vertex image falls outside the closure")]
    NotInClosure,
}

/// A cover vertex: a base vertex index plus a valuation of the opposite base
/// side, packed as bits of a `u64`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CoverVertex {
    pub base: usize,
    pub valuation: u64,
}

/// Bits of the adjacency row of left vertex `x`, indexed by right vertex.
pub fn left_row_bits(g: &Graph, x: usize) -> u64 {
    let mut bits = 0u64;
    for u in 0..g.right_size() {
        if g.edge(x, u) {
            bits |= 1 << u;
        }
    }
    bits
}

/// Rewire bits: output bit `i` is input bit `map[i]`.
fn select_bits(v: u64, map: &[usize]) -> u64 {
    let mut out = 0u64;
    for (i, &src) in map.iter().enumerate() {
        if v >> src & 1 == 1 {
            out |= 1 << i;
        }
    }
    out
}

fn swap_bits(v: u64, i: usize) -> u64 {
    let a = v >> i & 1;
    let b = v >> (i + 1) & 1;
    v ^ ((a ^ b) << i) ^ ((a ^ b) << (i + 1))
}

// ---------------------------------------------------------------------------
// Full cover
// ---------------------------------------------------------------------------

/// The full valuation cover of a base graph, with lazily computed edges.
/// Left vertex `x * 2^|R| + chi` is `(x, chi)`; right vertex `u * 2^|L| +
/// psi` is `(u, psi)`.
pub struct CoverGraph {
    base: Graph,
}

impl CoverGraph {
    /// Both base sides must have at most 12 vertices.
    pub fn new(base: &Graph) -> Result<CoverGraph, CoverError> {
        if base.left_size() > 12 || base.right_size() > 12 {
            return Err(CoverError::SizeGuardExceeded(format!(
                "full cover of a {}x{} base",
                base.left_size(),
                base.right_size()
            )));
        }
        Ok(CoverGraph { base: base.clone() })
    }

    pub fn base(&self) -> &Graph {
        &self.base
    }

    pub fn left_count(&self) -> u64 {
        (self.base.left_size() as u64) << self.base.right_size()
    }

    pub fn right_count(&self) -> u64 {
        (self.base.right_size() as u64) << self.base.left_size()
    }

    /// Each of the `|L| * |R|` base pairs contributes `2^(|L|+|R|-1)` edges.
    pub fn edge_count(&self) -> u128 {
        let l = self.base.left_size() as u128;
        let r = self.base.right_size() as u128;
        l * r * (1u128 << (self.base.left_size() + self.base.right_size() - 1))
    }

    pub fn left_vertex(&self, index: u64) -> CoverVertex {
        let span = 1u64 << self.base.right_size();
        CoverVertex {
            base: (index / span) as usize,
            valuation: index % span,
        }
    }

    pub fn right_vertex(&self, index: u64) -> CoverVertex {
        let span = 1u64 << self.base.left_size();
        CoverVertex {
            base: (index / span) as usize,
            valuation: index % span,
        }
    }

    pub fn left_index(&self, v: &CoverVertex) -> u64 {
        (v.base as u64) << self.base.right_size() | v.valuation
    }

    pub fn right_index(&self, v: &CoverVertex) -> u64 {
        (v.base as u64) << self.base.left_size() | v.valuation
    }

    pub fn edge(&self, left: &CoverVertex, right: &CoverVertex) -> bool {
        (left.valuation >> right.base ^ right.valuation >> left.base) & 1 == 1
    }

    pub fn embedded_left(&self, x: usize) -> CoverVertex {
        CoverVertex {
            base: x,
            valuation: left_row_bits(&self.base, x),
        }
    }

    pub fn embedded_right(&self, u: usize) -> CoverVertex {
        CoverVertex {
            base: u,
            valuation: 0,
        }
    }
}

// ---------------------------------------------------------------------------
// Cover automorphisms
// ---------------------------------------------------------------------------

/// An automorphism of the full cover: a permutation per base side plus one
/// flip row per left base vertex, indexed by image coordinates. Any such
/// triple preserves the cover edge relation.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct CoverAut {
    left_perm: Vec<usize>,
    right_perm: Vec<usize>,
    left_inv: Vec<usize>,
    right_inv: Vec<usize>,
    flips: Vec<u64>,
}

impl CoverAut {
    pub fn new(
        left_perm: Vec<usize>,
        right_perm: Vec<usize>,
        flips: Vec<u64>,
    ) -> Result<CoverAut, CoverError> {
        if !is_permutation(&left_perm) || !is_permutation(&right_perm) {
            return Err(CoverError::NotPartialAutomorphism);
        }
        if flips.len() != left_perm.len() {
            return Err(CoverError::BaseMismatch);
        }
        let left_inv = invert_permutation(&left_perm);
        let right_inv = invert_permutation(&right_perm);
        Ok(CoverAut {
            left_perm,
            right_perm,
            left_inv,
            right_inv,
            flips,
        })
    }

    pub fn identity(left: usize, right: usize) -> CoverAut {
        CoverAut::new((0..left).collect(), (0..right).collect(), vec![0; left])
            .expect("identity is valid")
    }

    pub fn left_perm(&self) -> &[usize] {
        &self.left_perm
    }

    pub fn right_perm(&self) -> &[usize] {
        &self.right_perm
    }

    pub fn flips(&self) -> &[u64] {
        &self.flips
    }

    pub fn is_identity(&self) -> bool {
        self.left_perm.iter().enumerate().all(|(i, &x)| i == x)
            && self.right_perm.iter().enumerate().all(|(i, &x)| i == x)
            && self.flips.iter().all(|&f| f == 0)
    }

    /// `(x, chi) -> (P x, chi . Q^-1 + flip row at P x)`.
    pub fn apply_left(&self, v: &CoverVertex) -> CoverVertex {
        let base = self.left_perm[v.base];
        CoverVertex {
            base,
            valuation: select_bits(v.valuation, &self.right_inv) ^ self.flips[base],
        }
    }

    /// `(u, psi) -> (Q u, psi . P^-1 + flip column at Q u)`.
    pub fn apply_right(&self, v: &CoverVertex) -> CoverVertex {
        let base = self.right_perm[v.base];
        let mut column = 0u64;
        for (y, &row) in self.flips.iter().enumerate() {
            column |= (row >> base & 1) << y;
        }
        CoverVertex {
            base,
            valuation: select_bits(v.valuation, &self.left_inv) ^ column,
        }
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &CoverAut) -> CoverAut {
        let left_perm: Vec<usize> = first.left_perm.iter().map(|&x| self.left_perm[x]).collect();
        let right_perm: Vec<usize> = first
            .right_perm
            .iter()
            .map(|&u| self.right_perm[u])
            .collect();
        let flips: Vec<u64> = (0..left_perm.len())
            .map(|y| {
                self.flips[y] ^ select_bits(first.flips[self.left_inv[y]], &self.right_inv)
            })
            .collect();
        CoverAut::new(left_perm, right_perm, flips).expect("composition is valid")
    }

    pub fn inverse(&self) -> CoverAut {
        let flips: Vec<u64> = (0..self.left_perm.len())
            .map(|x| select_bits(self.flips[self.left_perm[x]], &self.right_perm))
            .collect();
        CoverAut::new(self.left_inv.clone(), self.right_inv.clone(), flips)
            .expect("inverse is valid")
    }
}

/// Extend a partial automorphism of the base to a cover automorphism fixing
/// the embedded copy accordingly: side permutations are the lexicographically
/// minimal completions, flip rows correct the embedded adjacency rows at the
/// image of the mapped left vertices and vanish elsewhere.
pub fn extend_in_cover(g: &Graph, p: &PartialMap) -> Result<CoverAut, CoverError> {
    if g.left_size() > 63 || g.right_size() > 63 {
        return Err(CoverError::SizeGuardExceeded(
            "base sides must fit u64 valuations".into(),
        ));
    }
    match check_partial_automorphism(g, p) {
        Ok(true) => {}
        Ok(false) => return Err(CoverError::NotPartialAutomorphism),
        Err(_) => return Err(CoverError::BaseMismatch),
    }
    let left_perm = min_completion(&p.left, g.left_size());
    let right_perm = min_completion(&p.right, g.right_size());
    let right_inv = invert_permutation(&right_perm);
    let mut flips = vec![0u64; g.left_size()];
    for (&x, &y) in &p.left {
        flips[y] = select_bits(left_row_bits(g, x), &right_inv) ^ left_row_bits(g, y);
    }
    CoverAut::new(left_perm, right_perm, flips)
}

/// Complete an injective partial map on `0..n` to a permutation: scan the
/// domain in ascending order and give each unmapped point the smallest
/// unused target.
fn min_completion(map: &std::collections::BTreeMap<usize, usize>, n: usize) -> Vec<usize> {
    let mut out = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for (&k, &v) in map {
        out[k] = v;
        used[v] = true;
    }
    let mut free = (0..n).filter(|&i| !used[i]);
    for slot in out.iter_mut() {
        if *slot == usize::MAX {
            *slot = free.next().expect("enough free targets");
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Valuation codes
// ---------------------------------------------------------------------------

/// A GF(2) linear code on right-side valuations, stable under all
/// coordinate permutations, generated by the pairwise differences of the
/// base's left adjacency rows and the differences of each row with its
/// coordinate transposes. Kept in reduced echelon form with pivots
/// descending, so every codeword has a unique rank in `0..2^dim`.
#[derive(Clone, Debug)]
pub struct ValCode {
    len: usize,
    basis: Vec<u64>,
}

impl ValCode {
    pub fn build(g: &Graph) -> ValCode {
        let r = g.right_size();
        let mut code = ValCode {
            len: r,
            basis: Vec::new(),
        };
        let rows: Vec<u64> = (0..g.left_size()).map(|x| left_row_bits(g, x)).collect();
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                code.insert(rows[i] ^ rows[j]);
            }
            for t in 0..r.saturating_sub(1) {
                code.insert(rows[i] ^ swap_bits(rows[i], t));
            }
        }
        loop {
            let snapshot = code.basis.clone();
            let mut grew = false;
            for b in snapshot {
                for t in 0..r.saturating_sub(1) {
                    grew |= code.insert(swap_bits(b, t));
                }
            }
            if !grew {
                break;
            }
        }
        code
    }

    fn insert(&mut self, mut v: u64) -> bool {
        for &b in &self.basis {
            let p = 63 - b.leading_zeros();
            if v >> p & 1 == 1 {
                v ^= b;
            }
        }
        if v == 0 {
            return false;
        }
        let p = 63 - v.leading_zeros();
        for b in &mut self.basis {
            if *b >> p & 1 == 1 {
                *b ^= v;
            }
        }
        let pos = self
            .basis
            .iter()
            .position(|b| 63 - b.leading_zeros() < p)
            .unwrap_or(self.basis.len());
        self.basis.insert(pos, v);
        true
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn contains(&self, v: u64) -> bool {
        self.coords(v).is_some()
    }

    /// Rank of a codeword, or `None` if `v` is outside the code.
    pub fn coords(&self, mut v: u64) -> Option<u64> {
        let mut rank = 0u64;
        for (i, &b) in self.basis.iter().enumerate() {
            let p = 63 - b.leading_zeros();
            if v >> p & 1 == 1 {
                rank |= 1 << i;
                v ^= b;
            }
        }
        (v == 0).then_some(rank)
    }

    /// Codeword with the given rank in `0..2^dim`.
    pub fn decode(&self, rank: u64) -> u64 {
        self.basis
            .iter()
            .enumerate()
            .filter(|(i, _)| rank >> i & 1 == 1)
            .fold(0, |acc, (_, &b)| acc ^ b)
    }
}

// ---------------------------------------------------------------------------
// Magic closures
// ---------------------------------------------------------------------------

const WITNESS_BUDGET: u128 = 200_000;
const SIDE_GUARD: usize = 1 << 18;

/// The orbit of the embedded base inside the full cover under all cover
/// automorphisms whose flip rows lie in the base's valuation code, realized
/// as a finite graph. Index layout: the embedded copy comes first on both
/// sides; further left vertices follow in blocks per codeword rank, further
/// right vertices in blocks per valuation value.
pub struct MagicClosure {
    graph: Graph,
    base: Graph,
    code: ValCode,
    full: bool,
    generators: Vec<CoverAut>,
    scheduled_k: usize,
    witness_k: usize,
}

/// Compute the closure of `g` for maps of up to `k` points. For `k = 0` the
/// graph itself (with an identity witness) already suffices. Otherwise the
/// closure is the code orbit described on [`MagicClosure`]; it extends every
/// partial automorphism of the base, not only the small ones.
///
/// Stored witness automorphisms are collected for partial maps of up to
/// `witness_k <= k` points, where `witness_k` is capped so that the
/// enumeration stays within a fixed budget.
pub fn k_magic_closure(g: &Graph, k: usize) -> Result<MagicClosure, CoverError> {
    let lb = g.left_size();
    let rb = g.right_size();
    if lb > 63 || rb > 63 {
        return Err(CoverError::SizeGuardExceeded(
            "base sides must fit u64 valuations".into(),
        ));
    }
    let code = ValCode::build(g);
    let full = k >= 1 && !code.is_trivial();
    if full {
        let left_total = (lb as u128) << code.dim();
        let right_total = (rb as u128) << lb;
        if left_total > SIDE_GUARD as u128 || right_total > SIDE_GUARD as u128 {
            return Err(CoverError::SizeGuardExceeded(format!(
                "closure would have {left_total} left and {right_total} right vertices"
            )));
        }
    }
    let graph = if full {
        closure_graph(g, &code)?
    } else {
        g.clone()
    };
    let witness_k = (0..=k)
        .rev()
        .find(|&c| candidate_count(lb, rb, c) <= WITNESS_BUDGET)
        .unwrap_or(0);
    let mut generators: Vec<CoverAut> = Vec::new();
    let mut seen: std::collections::HashSet<CoverAut> = std::collections::HashSet::new();
    for p in enumerate_partial_automorphisms(g, witness_k) {
        let aut = extend_in_cover(g, &p)?;
        if seen.insert(aut.clone()) {
            generators.push(aut);
        }
    }
    Ok(MagicClosure {
        graph,
        base: g.clone(),
        code,
        full,
        generators,
        scheduled_k: k,
        witness_k,
    })
}

fn closure_graph(g: &Graph, code: &ValCode) -> Result<Graph, CoverError> {
    let lb = g.left_size();
    let rb = g.right_size();
    let rank_count = 1usize << code.dim();
    let psi_count = 1u64 << lb;
    let left_total = lb * rank_count;
    let right_total = rb * psi_count as usize;

    let chis: Vec<u64> = (0..left_total)
        .map(|i| {
            let (x, rank) = split_left_index(i, lb);
            left_row_bits(g, x) ^ code.decode(rank)
        })
        .collect();

    // Per base right vertex: the chi bits at that coordinate, over all left
    // closure vertices.
    let mut col = vec![Bitset::new(left_total); rb];
    for (i, &chi) in chis.iter().enumerate() {
        for (u, c) in col.iter_mut().enumerate() {
            if chi >> u & 1 == 1 {
                c.set(i, true);
            }
        }
    }
    // Per right valuation: the psi bits at the base coordinate of each left
    // closure vertex.
    let mut pattern = vec![Bitset::new(left_total); psi_count as usize];
    for (psi, pat) in pattern.iter_mut().enumerate() {
        for (i, _) in chis.iter().enumerate() {
            let (x, _) = split_left_index(i, lb);
            if psi >> x & 1 == 1 {
                pat.set(i, true);
            }
        }
    }

    let mut rows = Vec::with_capacity(right_total);
    for i in 0..right_total {
        let (u, psi) = split_right_index(i, rb);
        let mut row = col[u].clone();
        row.xor_assign(&pattern[psi as usize]);
        rows.push(row);
    }

    let fresh_base = 1 + g
        .labels()
        .iter()
        .flat_map(|l| l.iter().copied())
        .max()
        .unwrap_or(0);
    let mut labels: Vec<Label> = g.labels().to_vec();
    for j in 0..right_total - rb {
        labels.push(vec![fresh_base + j as u32]);
    }

    Graph::from_rows(left_total, labels, rows).map_err(|_| CoverError::BaseMismatch)
}

fn split_left_index(i: usize, lb: usize) -> (usize, u64) {
    if i < lb {
        (i, 0)
    } else {
        let j = i - lb;
        (j % lb, 1 + (j / lb) as u64)
    }
}

fn split_right_index(i: usize, rb: usize) -> (usize, u64) {
    if i < rb {
        (i, 0)
    } else {
        let j = i - rb;
        (j % rb, 1 + (j / rb) as u64)
    }
}

fn candidate_count(l: usize, r: usize, cap: usize) -> u128 {
    fn choose_arrange(n: usize, k: usize) -> u128 {
        // C(n, k) * n! / (n - k)!
        if k > n {
            return 0;
        }
        let mut c = 1u128;
        for i in 0..k {
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        let mut a = 1u128;
        for i in 0..k {
            a *= (n - i) as u128;
        }
        c * a
    }
    let mut total = 0u128;
    for s in 0..=cap {
        for a in 0..=s {
            total += choose_arrange(l, a) * choose_arrange(r, s - a);
        }
    }
    total
}

impl MagicClosure {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn base(&self) -> &Graph {
        &self.base
    }

    pub fn code(&self) -> &ValCode {
        &self.code
    }

    pub fn generators(&self) -> &[CoverAut] {
        &self.generators
    }

    pub fn scheduled_k(&self) -> usize {
        self.scheduled_k
    }

    pub fn witness_k(&self) -> usize {
        self.witness_k
    }

    /// Did the closure add vertices beyond the embedded copy?
    pub fn is_proper(&self) -> bool {
        self.full
    }

    pub fn left_vertex(&self, i: usize) -> CoverVertex {
        let (x, rank) = split_left_index(i, self.base.left_size());
        CoverVertex {
            base: x,
            valuation: left_row_bits(&self.base, x) ^ self.code.decode(rank),
        }
    }

    pub fn right_vertex(&self, i: usize) -> CoverVertex {
        let (u, psi) = split_right_index(i, self.base.right_size());
        CoverVertex {
            base: u,
            valuation: psi,
        }
    }

    pub fn left_index(&self, v: &CoverVertex) -> Option<usize> {
        let lb = self.base.left_size();
        if v.base >= lb {
            return None;
        }
        let c = v.valuation ^ left_row_bits(&self.base, v.base);
        let rank = self.code.coords(c)?;
        if rank == 0 {
            Some(v.base)
        } else if self.full {
            Some(lb + (rank as usize - 1) * lb + v.base)
        } else {
            None
        }
    }

    pub fn right_index(&self, v: &CoverVertex) -> Option<usize> {
        let rb = self.base.right_size();
        if v.base >= rb {
            return None;
        }
        if v.valuation == 0 {
            Some(v.base)
        } else if self.full && v.valuation < 1u64 << self.base.left_size() {
            Some(rb + (v.valuation as usize - 1) * rb + v.base)
        } else {
            None
        }
    }

    /// The action of a cover automorphism on the closure's vertices, as a
    /// total automorphism of the closure graph. Fails when some image is
    /// outside the closure.
    pub fn restrict(&self, aut: &CoverAut) -> Result<TotalAut, CoverError> {
        if aut.left_perm.len() != self.base.left_size()
            || aut.right_perm.len() != self.base.right_size()
        {
            return Err(CoverError::BaseMismatch);
        }
        let mut left = Vec::with_capacity(self.graph.left_size());
        for i in 0..self.graph.left_size() {
            let image = aut.apply_left(&self.left_vertex(i));
            left.push(self.left_index(&image).ok_or(CoverError::NotInClosure)?);
        }
        let mut right = Vec::with_capacity(self.graph.right_size());
        for i in 0..self.graph.right_size() {
            let image = aut.apply_right(&self.right_vertex(i));
            right.push(self.right_index(&image).ok_or(CoverError::NotInClosure)?);
        }
        Ok(TotalAut::new(left, right).expect("cover automorphisms act bijectively"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn matching() -> Graph {
        Graph::new(2, vec![vec![1], vec![2]], &[(0, 0), (1, 1)]).unwrap()
    }

    fn lopsided_23() -> Graph {
        Graph::new(2, vec![vec![1], vec![2], vec![3]], &[(0, 0), (0, 1), (1, 0)]).unwrap()
    }

    #[test]
    fn full_cover_counts() {
        let c = CoverGraph::new(&matching()).unwrap();
        assert_eq!(c.left_count(), 8);
        assert_eq!(c.right_count(), 8);
        assert_eq!(c.edge_count(), 32);
        let k11 = Graph::new(1, vec![vec![1]], &[(0, 0)]).unwrap();
        let c = CoverGraph::new(&k11).unwrap();
        assert_eq!(c.left_count(), 2);
        assert_eq!(c.right_count(), 2);
        assert_eq!(c.edge_count(), 2);
    }

    #[test]
    fn full_cover_edge_count_matches_brute_force() {
        let g = lopsided_23();
        let c = CoverGraph::new(&g).unwrap();
        let mut edges = 0u128;
        for i in 0..c.left_count() {
            for j in 0..c.right_count() {
                if c.edge(&c.left_vertex(i), &c.right_vertex(j)) {
                    edges += 1;
                }
            }
        }
        assert_eq!(edges, c.edge_count());
    }

    #[test]
    fn embedding_preserves_the_base() {
        let g = lopsided_23();
        let c = CoverGraph::new(&g).unwrap();
        for x in 0..g.left_size() {
            for u in 0..g.right_size() {
                assert_eq!(
                    c.edge(&c.embedded_left(x), &c.embedded_right(u)),
                    g.edge(x, u)
                );
            }
        }
    }

    #[test]
    fn full_cover_guard() {
        let g = Graph::new(13, (0..2).map(|u| vec![u + 1]).collect(), &[]).unwrap();
        assert!(matches!(
            CoverGraph::new(&g),
            Err(CoverError::SizeGuardExceeded(_))
        ));
    }

    #[test]
    fn extend_swap_on_matching() {
        let g = matching();
        let p = PartialMap::new(&[(0, 1)], &[]).unwrap();
        let aut = extend_in_cover(&g, &p).unwrap();
        let c = CoverGraph::new(&g).unwrap();
        // Embedded vertices of the domain land on embedded images.
        assert_eq!(aut.apply_left(&c.embedded_left(0)), c.embedded_left(1));
        // The whole embedded right side stays embedded: flips columns vanish
        // on the image of mapped rights, and no rights are mapped here, so
        // only the mapped left row is corrected.
        let q_img = aut.apply_right(&c.embedded_right(0));
        assert_eq!(q_img.base, aut.right_perm()[0]);
    }

    #[test]
    fn extend_rejects_non_automorphism() {
        let g = matching();
        let bad = PartialMap::new(&[(0, 1)], &[(0, 0)]).unwrap();
        assert_eq!(
            extend_in_cover(&g, &bad),
            Err(CoverError::NotPartialAutomorphism)
        );
    }

    #[test]
    fn extension_fixes_all_embedded_domain_points() {
        let g = lopsided_23();
        let c = CoverGraph::new(&g).unwrap();
        for p in enumerate_partial_automorphisms(&g, 3) {
            let aut = extend_in_cover(&g, &p).unwrap();
            for (&x, &y) in &p.left {
                assert_eq!(aut.apply_left(&c.embedded_left(x)), c.embedded_left(y));
            }
            for (&u, &v) in &p.right {
                assert_eq!(aut.apply_right(&c.embedded_right(u)), c.embedded_right(v));
            }
        }
    }

    #[test]
    fn code_of_matching() {
        let code = ValCode::build(&matching());
        assert_eq!(code.dim(), 1);
        assert!(code.contains(0b11));
        assert!(!code.contains(0b01));
        assert_eq!(code.decode(0), 0);
        assert_eq!(code.decode(1), 0b11);
        assert_eq!(code.coords(0b11), Some(1));
    }

    #[test]
    fn code_of_trivial_bases() {
        let empty = Graph::new(2, vec![vec![1], vec![2]], &[]).unwrap();
        assert!(ValCode::build(&empty).is_trivial());
        let complete =
            Graph::new(2, vec![vec![1], vec![2]], &[(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        assert!(ValCode::build(&complete).is_trivial());
    }

    #[test]
    fn code_round_trip() {
        let code = ValCode::build(&lopsided_23());
        assert_eq!(code.dim(), 3);
        for rank in 0..8u64 {
            assert_eq!(code.coords(code.decode(rank)), Some(rank));
        }
    }

    #[test]
    fn closure_of_matching_is_4_by_8() {
        let mc = k_magic_closure(&matching(), 1).unwrap();
        assert_eq!(mc.graph().left_size(), 4);
        assert_eq!(mc.graph().right_size(), 8);
        assert!(mc.is_proper());
        // The embedded corner is the base graph.
        for x in 0..2 {
            for u in 0..2 {
                assert_eq!(mc.graph().edge(x, u), matching().edge(x, u));
            }
        }
        // Embedded rights keep their labels; new rights get fresh singleton
        // names.
        assert_eq!(mc.graph().label(0), &vec![1]);
        assert_eq!(mc.graph().label(2), &vec![3]);
    }

    #[test]
    fn closure_of_trivial_base_is_the_base() {
        let empty = Graph::new(3, (0..2).map(|u| vec![u + 1]).collect(), &[]).unwrap();
        let mc = k_magic_closure(&empty, 2).unwrap();
        assert!(!mc.is_proper());
        assert_eq!(mc.graph(), &empty);
    }

    #[test]
    fn zero_k_closure_is_the_base() {
        let g = matching();
        let mc = k_magic_closure(&g, 0).unwrap();
        assert_eq!(mc.graph(), &g);
        assert_eq!(mc.witness_k(), 0);
        assert_eq!(mc.generators().len(), 1);
        assert!(mc.generators()[0].is_identity());
    }

    #[test]
    fn closure_witnesses_extend_embedded_maps() {
        let g = matching();
        let mc = k_magic_closure(&g, 1).unwrap();
        for p in enumerate_partial_automorphisms(&g, 1) {
            let aut = extend_in_cover(&g, &p).unwrap();
            let total = mc.restrict(&aut).unwrap();
            assert!(total.verify(mc.graph()));
            for (&x, &y) in &p.left {
                assert_eq!(total.left[x], y);
            }
            for (&u, &v) in &p.right {
                assert_eq!(total.right[u], v);
            }
        }
    }

    #[test]
    fn stored_generators_restrict() {
        let mc = k_magic_closure(&lopsided_23(), 2).unwrap();
        assert_eq!(mc.witness_k(), 2);
        assert!(!mc.generators().is_empty());
        for aut in mc.generators() {
            let total = mc.restrict(aut).unwrap();
            assert!(total.verify(mc.graph()));
        }
    }

    /// The closure really is the orbit of the embedded copy under the group
    /// of cover automorphisms with codeword flip rows.
    fn orbit_cross_check(g: &Graph) {
        let mc = k_magic_closure(g, 2).unwrap();
        let code = mc.code();
        let cover = CoverGraph::new(g).unwrap();
        let l = g.left_size();
        let r = g.right_size();
        let words: Vec<u64> = (0..1u64 << code.dim()).map(|rk| code.decode(rk)).collect();
        let mut left_orbit: HashSet<CoverVertex> = HashSet::new();
        let mut right_orbit: HashSet<CoverVertex> = HashSet::new();
        for lp in (0..l).permutations(l) {
            for rp in (0..r).permutations(r) {
                for rows in (0..l).map(|_| words.iter().copied()).multi_cartesian_product() {
                    let aut = CoverAut::new(lp.clone(), rp.clone(), rows).unwrap();
                    for x in 0..l {
                        left_orbit.insert(aut.apply_left(&cover.embedded_left(x)));
                    }
                    for u in 0..r {
                        right_orbit.insert(aut.apply_right(&cover.embedded_right(u)));
                    }
                }
            }
        }
        let closure_left: HashSet<CoverVertex> = (0..mc.graph().left_size())
            .map(|i| mc.left_vertex(i))
            .collect();
        let closure_right: HashSet<CoverVertex> = (0..mc.graph().right_size())
            .map(|i| mc.right_vertex(i))
            .collect();
        assert_eq!(left_orbit, closure_left);
        assert_eq!(right_orbit, closure_right);
    }

    #[test]
    fn closure_is_the_code_orbit_matching() {
        orbit_cross_check(&matching());
    }

    #[test]
    fn closure_is_the_code_orbit_lopsided() {
        orbit_cross_check(&lopsided_23());
    }

    fn perm_strategy(n: usize) -> impl Strategy<Value = Vec<usize>> {
        Just((0..n).collect::<Vec<usize>>()).prop_shuffle()
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

        /// Every permutation-plus-flips triple preserves cover adjacency.
        #[test]
        fn any_triple_preserves_edges(
            lp in perm_strategy(3),
            rp in perm_strategy(4),
            flips in proptest::collection::vec(0u64..16, 3),
            li in 0u64..24,
            ri in 0u64..32,
        ) {
            let g = Graph::new(3, (0..4).map(|u| vec![u + 1]).collect(), &[(0, 0), (1, 2)]).unwrap();
            let c = CoverGraph::new(&g).unwrap();
            let aut = CoverAut::new(lp, rp, flips).unwrap();
            let a = c.left_vertex(li);
            let b = c.right_vertex(ri);
            prop_assert_eq!(
                c.edge(&a, &b),
                c.edge(&aut.apply_left(&a), &aut.apply_right(&b))
            );
        }

        /// Composition acts as sequential application; inverses cancel.
        #[test]
        fn compose_and_invert(
            lp1 in perm_strategy(3), rp1 in perm_strategy(4),
            f1 in proptest::collection::vec(0u64..16, 3),
            lp2 in perm_strategy(3), rp2 in perm_strategy(4),
            f2 in proptest::collection::vec(0u64..16, 3),
            li in 0u64..24, ri in 0u64..32,
        ) {
            let g = Graph::new(3, (0..4).map(|u| vec![u + 1]).collect(), &[]).unwrap();
            let c = CoverGraph::new(&g).unwrap();
            let a1 = CoverAut::new(lp1, rp1, f1).unwrap();
            let a2 = CoverAut::new(lp2, rp2, f2).unwrap();
            let both = a2.compose(&a1);
            let v = c.left_vertex(li);
            let w = c.right_vertex(ri);
            prop_assert_eq!(both.apply_left(&v), a2.apply_left(&a1.apply_left(&v)));
            prop_assert_eq!(both.apply_right(&w), a2.apply_right(&a1.apply_right(&w)));
            let inv = a1.inverse();
            prop_assert_eq!(inv.apply_left(&a1.apply_left(&v)), v);
            prop_assert_eq!(inv.apply_right(&a1.apply_right(&w)), w);
            prop_assert!(a1.compose(&inv).is_identity());
        }

        /// Valuation codes are permutation stable.
        #[test]
        fn code_is_twist_stable(code_bits in 0u32..512) {
            let edges: Vec<(usize, usize)> = (0..9)
                .filter(|b| code_bits >> b & 1 == 1)
                .map(|b| (b / 3, b % 3))
                .collect();
            let g = Graph::new(3, vec![vec![1], vec![2], vec![3]], &edges).unwrap();
            let code = ValCode::build(&g);
            for rank in 0..1u64 << code.dim() {
                let w = code.decode(rank);
                for t in 0..2 {
                    prop_assert!(code.contains(swap_bits(w, t)));
                }
            }
        }
    }
}
