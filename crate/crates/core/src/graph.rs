//! Bipartite graphs with a labelled right side, partial maps between them,
//! and the small-scale structure checks built on those.
//!
//! Left vertices are naturals `0..left_size`. Right vertices are identified
//! by finite sequences of naturals; the sequence is the vertex's label and
//! the position in the label list is its index. The two sides never mix: a
//! map between graphs always consists of a left part and a right part.

use std::collections::BTreeMap;

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

use crate::bits::Bitset;

/// Label of a right vertex: a finite sequence of naturals.
pub type Label = Vec<u32>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph sides must be nonempty")]
    EmptySide,
    #[error("duplicate right label {0:?}")]
    DuplicateLabel(Label),
    #[error("vertex index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("map is not injective on one side")]
    NotInjective,
}

/// A finite bipartite graph. Adjacency is stored as one bit row per right
/// vertex, indexed by left vertex.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    left_size: usize,
    right_labels: Vec<Label>,
    rows: Vec<Bitset>,
}

impl Graph {
    /// Build a graph, validating that both sides are nonempty, right labels
    /// are pairwise distinct, and edges are in range and not repeated.
    pub fn new(
        left_size: usize,
        right_labels: Vec<Label>,
        edges: &[(usize, usize)],
    ) -> Result<Graph, GraphError> {
        if left_size == 0 || right_labels.is_empty() {
            return Err(GraphError::EmptySide);
        }
        let mut seen = std::collections::HashSet::new();
        for label in &right_labels {
            if !seen.insert(label.clone()) {
                return Err(GraphError::DuplicateLabel(label.clone()));
            }
        }
        let mut rows = vec![Bitset::new(left_size); right_labels.len()];
        for &(x, u) in edges {
            if x >= left_size {
                return Err(GraphError::IndexOutOfRange(format!("left {x}")));
            }
            if u >= right_labels.len() {
                return Err(GraphError::IndexOutOfRange(format!("right {u}")));
            }
            if rows[u].get(x) {
                return Err(GraphError::DuplicateEdge(x, u));
            }
            rows[u].set(x, true);
        }
        Ok(Graph {
            left_size,
            right_labels,
            rows,
        })
    }

    /// Build a graph directly from adjacency rows (one per right vertex,
    /// each over the left side), avoiding an explicit edge list.
    pub fn from_rows(
        left_size: usize,
        right_labels: Vec<Label>,
        rows: Vec<Bitset>,
    ) -> Result<Graph, GraphError> {
        if left_size == 0 || right_labels.is_empty() {
            return Err(GraphError::EmptySide);
        }
        if rows.len() != right_labels.len() || rows.iter().any(|r| r.len() != left_size) {
            return Err(GraphError::IndexOutOfRange("row shape".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for label in &right_labels {
            if !seen.insert(label.clone()) {
                return Err(GraphError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Graph {
            left_size,
            right_labels,
            rows,
        })
    }

    pub fn left_size(&self) -> usize {
        self.left_size
    }

    pub fn right_size(&self) -> usize {
        self.right_labels.len()
    }

    pub fn label(&self, u: usize) -> &Label {
        &self.right_labels[u]
    }

    pub fn labels(&self) -> &[Label] {
        &self.right_labels
    }

    pub fn label_index(&self, label: &[u32]) -> Option<usize> {
        self.right_labels.iter().position(|l| l == label)
    }

    #[inline]
    pub fn edge(&self, x: usize, u: usize) -> bool {
        self.rows[u].get(x)
    }

    /// Bit row of right vertex `u` over the left side.
    pub fn row(&self, u: usize) -> &Bitset {
        &self.rows[u]
    }

    /// Neighbour set of left vertex `x` as a bit row over the right side.
    pub fn left_neighbors(&self, x: usize) -> Bitset {
        let mut b = Bitset::new(self.right_size());
        for u in 0..self.right_size() {
            if self.edge(x, u) {
                b.set(u, true);
            }
        }
        b
    }

    pub fn left_degree(&self, x: usize) -> usize {
        (0..self.right_size()).filter(|&u| self.edge(x, u)).count()
    }

    pub fn right_degree(&self, u: usize) -> usize {
        self.rows[u].count()
    }

    /// Edges in (left, right) lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for x in 0..self.left_size {
            for u in 0..self.right_size() {
                if self.edge(x, u) {
                    out.push((x, u));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Bitset::count).sum()
    }

    /// Same adjacency with the right side renamed.
    pub fn with_labels(&self, labels: Vec<Label>) -> Result<Graph, GraphError> {
        Graph::from_rows(self.left_size, labels, self.rows.clone())
    }

    /// Same vertices and labels, complemented adjacency.
    pub fn complement(&self) -> Graph {
        let mut g = self.clone();
        for row in &mut g.rows {
            let mut full = Bitset::new(self.left_size);
            for x in 0..self.left_size {
                full.set(x, true);
            }
            full.xor_assign(row);
            *row = full;
        }
        g
    }

    /// Swap the two sides. Old left vertices become right vertices labelled
    /// by their singleton index.
    pub fn transpose(&self) -> Graph {
        let labels: Vec<Label> = (0..self.left_size).map(|x| vec![x as u32]).collect();
        let edges: Vec<(usize, usize)> =
            self.edges().into_iter().map(|(x, u)| (u, x)).collect();
        Graph::new(self.right_size(), labels, &edges).expect("transpose preserves validity")
    }
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Graph({}x{}, {} edges)",
            self.left_size,
            self.right_size(),
            self.edge_count()
        )
    }
}

// ---------------------------------------------------------------------------
// Maps between sides
// ---------------------------------------------------------------------------

/// A finite side-respecting injective partial map on a graph's vertices.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct PartialMap {
    pub left: BTreeMap<usize, usize>,
    pub right: BTreeMap<usize, usize>,
}

impl PartialMap {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(left: &[(usize, usize)], right: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut m = PartialMap::empty();
        for &(x, y) in left {
            if m.left.insert(x, y).is_some() {
                return Err(GraphError::NotInjective);
            }
        }
        for &(u, v) in right {
            if m.right.insert(u, v).is_some() {
                return Err(GraphError::NotInjective);
            }
        }
        if m.left.values().unique().count() != m.left.len()
            || m.right.values().unique().count() != m.right.len()
        {
            return Err(GraphError::NotInjective);
        }
        Ok(m)
    }

    /// Total number of mapped points across both sides.
    pub fn len(&self) -> usize {
        self.left.len() + self.right.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty() && self.right.is_empty()
    }
}

/// A total side-respecting automorphism: one permutation per side.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TotalAut {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl TotalAut {
    pub fn identity(left: usize, right: usize) -> Self {
        TotalAut {
            left: (0..left).collect(),
            right: (0..right).collect(),
        }
    }

    pub fn new(left: Vec<usize>, right: Vec<usize>) -> Result<Self, GraphError> {
        if !is_permutation(&left) || !is_permutation(&right) {
            return Err(GraphError::NotInjective);
        }
        Ok(TotalAut { left, right })
    }

    /// Check edge preservation against `g`.
    pub fn verify(&self, g: &Graph) -> bool {
        if self.left.len() != g.left_size() || self.right.len() != g.right_size() {
            return false;
        }
        for x in 0..g.left_size() {
            for u in 0..g.right_size() {
                if g.edge(x, u) != g.edge(self.left[x], self.right[u]) {
                    return false;
                }
            }
        }
        true
    }

    pub fn as_partial_map(&self) -> PartialMap {
        PartialMap {
            left: self.left.iter().copied().enumerate().collect(),
            right: self.right.iter().copied().enumerate().collect(),
        }
    }

    /// Does this automorphism extend `p` pointwise?
    pub fn extends(&self, p: &PartialMap) -> bool {
        p.left.iter().all(|(&x, &y)| self.left[x] == y)
            && p.right.iter().all(|(&u, &v)| self.right[u] == v)
    }

    pub fn inverse(&self) -> TotalAut {
        TotalAut {
            left: invert_permutation(&self.left),
            right: invert_permutation(&self.right),
        }
    }
}

pub(crate) fn is_permutation(v: &[usize]) -> bool {
    let mut seen = vec![false; v.len()];
    for &x in v {
        if x >= v.len() || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

pub(crate) fn invert_permutation(v: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; v.len()];
    for (i, &x) in v.iter().enumerate() {
        inv[x] = i;
    }
    inv
}

// ---------------------------------------------------------------------------
// Signed conditions
// ---------------------------------------------------------------------------

/// Sign of a membership requirement.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// A finite map from handles (right vertices, or automorphism indices in the
/// splitting engine) to signs. Domain entries are distinct and sorted.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
#[serde(transparent)]
pub struct SignedCond<H: Ord> {
    entries: Vec<(H, Sign)>,
}

impl<H: Ord + Clone> SignedCond<H> {
    pub fn empty() -> Self {
        SignedCond {
            entries: Vec::new(),
        }
    }

    pub fn new(mut entries: Vec<(H, Sign)>) -> Result<Self, GraphError> {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(GraphError::NotInjective);
        }
        Ok(SignedCond { entries })
    }

    pub fn insert(&mut self, handle: H, sign: Sign) -> Result<(), GraphError> {
        match self.entries.binary_search_by(|e| e.0.cmp(&handle)) {
            Ok(_) => Err(GraphError::NotInjective),
            Err(pos) => {
                self.entries.insert(pos, (handle, sign));
                Ok(())
            }
        }
    }

    pub fn contains(&self, handle: &H) -> bool {
        self.entries
            .binary_search_by(|e| e.0.cmp(handle))
            .is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(H, Sign)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Union of two conditions with disjoint domains.
    pub fn union(&self, other: &SignedCond<H>) -> Result<SignedCond<H>, GraphError> {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().cloned());
        SignedCond::new(entries)
    }
}

// ---------------------------------------------------------------------------
// Checks
// ---------------------------------------------------------------------------

/// Is `p` a partial automorphism of `g`: injective, side-respecting, and
/// edge-preserving on its domain?
pub fn check_partial_automorphism(g: &Graph, p: &PartialMap) -> Result<bool, GraphError> {
    for (&x, &y) in &p.left {
        if x >= g.left_size() || y >= g.left_size() {
            return Err(GraphError::IndexOutOfRange(format!("left {x}->{y}")));
        }
    }
    for (&u, &v) in &p.right {
        if u >= g.right_size() || v >= g.right_size() {
            return Err(GraphError::IndexOutOfRange(format!("right {u}->{v}")));
        }
    }
    for (&x, &y) in &p.left {
        for (&u, &v) in &p.right {
            if g.edge(x, u) != g.edge(y, v) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// All total automorphisms of `g`, ordered by (left permutation, right
/// permutation) lexicographically. Brute force; intended for small graphs
/// (both sides at most 6 or so).
pub fn total_automorphisms(g: &Graph) -> Vec<TotalAut> {
    let l = g.left_size();
    let r = g.right_size();
    let left_degrees: Vec<usize> = (0..l).map(|x| g.left_degree(x)).collect();
    let right_degrees: Vec<usize> = (0..r).map(|u| g.right_degree(u)).collect();
    let mut out = Vec::new();
    for lp in (0..l).permutations(l) {
        if (0..l).any(|x| left_degrees[x] != left_degrees[lp[x]]) {
            continue;
        }
        for rp in (0..r).permutations(r) {
            if (0..r).any(|u| right_degrees[u] != right_degrees[rp[u]]) {
                continue;
            }
            let cand = TotalAut {
                left: lp.clone(),
                right: rp,
            };
            if cand.verify(g) {
                out.push(cand);
            }
        }
    }
    out
}

/// Stream of all partial automorphisms of `g` with at most `cap` points,
/// each exactly once, smallest first. Within one size, maps with more left
/// points come first; within one shape the domain and image choices advance
/// lexicographically.
pub fn enumerate_partial_automorphisms(
    g: &Graph,
    cap: usize,
) -> impl Iterator<Item = PartialMap> + '_ {
    PartialAutomorphisms {
        g,
        cap,
        size: 0,
        buffer: std::collections::VecDeque::new(),
        primed: false,
    }
}

struct PartialAutomorphisms<'a> {
    g: &'a Graph,
    cap: usize,
    size: usize,
    buffer: std::collections::VecDeque<PartialMap>,
    primed: bool,
}

impl<'a> PartialAutomorphisms<'a> {
    fn fill_level(&mut self) {
        let l = self.g.left_size();
        let r = self.g.right_size();
        let s = self.size;
        for a in (0..=s).rev() {
            let b = s - a;
            if a > l || b > r {
                continue;
            }
            for dom_l in (0..l).combinations(a) {
                for img_l in (0..l).permutations(a) {
                    for dom_r in (0..r).combinations(b) {
                        for img_r in (0..r).permutations(b) {
                            let p = PartialMap {
                                left: dom_l.iter().copied().zip(img_l.iter().copied()).collect(),
                                right: dom_r.iter().copied().zip(img_r.iter().copied()).collect(),
                            };
                            if check_partial_automorphism(self.g, &p) == Ok(true) {
                                self.buffer.push_back(p);
                            }
                        }
                    }
                }
            }
        }
    }
}

impl<'a> Iterator for PartialAutomorphisms<'a> {
    type Item = PartialMap;

    fn next(&mut self) -> Option<PartialMap> {
        loop {
            if let Some(p) = self.buffer.pop_front() {
                return Some(p);
            }
            if !self.primed {
                self.primed = true;
            } else {
                self.size += 1;
            }
            if self.size > self.cap {
                return None;
            }
            self.fill_level();
        }
    }
}

/// Partial automorphisms of `g` with at most `cap` points that do not extend
/// to any total automorphism of `g`, in enumeration order. Empty iff `g` is
/// homogeneous up to `cap`. Requires `cap <= |L| + |R|`.
pub fn homogeneity_defect(g: &Graph, cap: usize) -> Vec<PartialMap> {
    assert!(cap <= g.left_size() + g.right_size());
    let total = total_automorphisms(g);
    enumerate_partial_automorphisms(g, cap)
        .filter(|p| !total.iter().any(|t| t.extends(p)))
        .collect()
}

/// Is every partial automorphism with at most `cap` points extendable?
pub fn homogeneous_up_to(g: &Graph, cap: usize) -> bool {
    homogeneity_defect(g, cap).is_empty()
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum ClassKind {
    Empty,
    Complete,
    PerfectMatching,
    CoMatching,
    Other,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub struct Classification {
    pub kind: ClassKind,
    pub extensional: bool,
}

fn is_perfect_matching(g: &Graph) -> bool {
    g.left_size() == g.right_size()
        && (0..g.left_size()).all(|x| g.left_degree(x) == 1)
        && (0..g.right_size()).all(|u| g.right_degree(u) == 1)
}

/// Distinct vertices on the same side always have distinct neighbour sets?
pub fn is_extensional(g: &Graph) -> bool {
    let rows: Vec<&Bitset> = (0..g.right_size()).map(|u| g.row(u)).collect();
    for (i, a) in rows.iter().enumerate() {
        if rows[..i].contains(a) {
            return false;
        }
    }
    let cols: Vec<Bitset> = (0..g.left_size()).map(|x| g.left_neighbors(x)).collect();
    for (i, a) in cols.iter().enumerate() {
        if cols[..i].contains(a) {
            return false;
        }
    }
    true
}

/// Decide the shape of `g`, testing in the fixed order empty, complete,
/// perfect matching, co-matching, other. A single edge on a 1x1 graph is
/// complete, the edgeless 1x1 graph is empty.
pub fn classify(g: &Graph) -> Classification {
    let total = g.left_size() * g.right_size();
    let kind = if g.edge_count() == 0 {
        ClassKind::Empty
    } else if g.edge_count() == total {
        ClassKind::Complete
    } else if is_perfect_matching(g) {
        ClassKind::PerfectMatching
    } else if is_perfect_matching(&g.complement()) {
        ClassKind::CoMatching
    } else {
        ClassKind::Other
    };
    Classification {
        kind,
        extensional: is_extensional(g),
    }
}

// ---------------------------------------------------------------------------
// Saturation
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, Serialize)]
pub struct SaturationFailure {
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
    pub witnesses: usize,
}

/// Result of an exhaustive witness count over all signed tuples of one side.
#[derive(Clone, Debug, Serialize)]
pub struct SaturationReport {
    pub side: Side,
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub tuples_checked: usize,
    pub failures: Vec<SaturationFailure>,
}

impl SaturationReport {
    pub fn holds(&self) -> bool {
        self.failures.is_empty()
    }
}

/// For every choice of `k+1` positive plus `l+1` negative distinct vertices
/// on `side`, count opposite-side vertices adjacent to all positive and none
/// of the negative ones; record the choices with fewer than `m` witnesses.
pub fn saturation_check(g: &Graph, k: usize, l: usize, m: usize, side: Side) -> SaturationReport {
    let n = match side {
        Side::Left => g.left_size(),
        Side::Right => g.right_size(),
    };
    let mut report = SaturationReport {
        side,
        k,
        l,
        m,
        tuples_checked: 0,
        failures: Vec::new(),
    };
    if k + l + 2 > n {
        return report;
    }
    for pos in (0..n).combinations(k + 1) {
        let rest: Vec<usize> = (0..n).filter(|v| !pos.contains(v)).collect();
        for neg_idx in (0..rest.len()).combinations(l + 1) {
            let neg: Vec<usize> = neg_idx.iter().map(|&i| rest[i]).collect();
            report.tuples_checked += 1;
            let witnesses = count_witnesses(g, side, &pos, &neg);
            if witnesses < m {
                report.failures.push(SaturationFailure {
                    positive: pos.clone(),
                    negative: neg,
                    witnesses,
                });
            }
        }
    }
    report
}

fn count_witnesses(g: &Graph, side: Side, pos: &[usize], neg: &[usize]) -> usize {
    match side {
        Side::Left => (0..g.right_size())
            .filter(|&u| {
                pos.iter().all(|&x| g.edge(x, u)) && neg.iter().all(|&x| !g.edge(x, u))
            })
            .count(),
        Side::Right => (0..g.left_size())
            .filter(|&x| {
                pos.iter().all(|&u| g.edge(x, u)) && neg.iter().all(|&u| !g.edge(x, u))
            })
            .count(),
    }
}

// ---------------------------------------------------------------------------
// Squares and canonical forms
// ---------------------------------------------------------------------------

/// Number of 4-cycles: over unordered left pairs, common neighbours choose 2.
pub fn squares(g: &Graph) -> usize {
    let cols: Vec<Bitset> = (0..g.left_size()).map(|x| g.left_neighbors(x)).collect();
    let mut total = 0;
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            let common = cols[i]
                .words()
                .iter()
                .zip(cols[j].words())
                .map(|(a, b)| (a & b).count_ones() as usize)
                .sum::<usize>();
            total += common * common.saturating_sub(1) / 2;
        }
    }
    total
}

/// Isomorphism-invariant code: the minimal row-major adjacency bit string
/// over all side-respecting permutation pairs. Intended for graphs with at
/// most 11 vertices per side (the code must fit in 128 bits).
pub fn canonical_form(g: &Graph) -> (usize, usize, u128) {
    let l = g.left_size();
    let r = g.right_size();
    assert!(l * r <= 128, "canonical_form supports up to 128 cells");
    let mut best = u128::MAX;
    for lp in (0..l).permutations(l) {
        for rp in (0..r).permutations(r) {
            let mut code: u128 = 0;
            for (xi, &x) in lp.iter().enumerate() {
                for (ui, &u) in rp.iter().enumerate() {
                    if g.edge(x, u) {
                        code |= 1u128 << (xi * r + ui);
                    }
                }
            }
            if code < best {
                best = code;
            }
        }
    }
    (l, r, best)
}
