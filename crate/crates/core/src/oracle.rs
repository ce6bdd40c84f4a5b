//! Oracles present a possibly infinite bipartite graph through a narrow
//! query interface: left vertices are naturals, right vertices are opaque
//! ordered handles, and adjacency is answered per pair. Witness streams and
//! a back-and-forth matcher are built only from that interface, so they run
//! unchanged against hash-generated graphs, finite graphs, and tower
//! limits.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{Graph, Sign, SignedCond};
use crate::tower::{Branch, Tower, TowerError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("queried vertex is not present")]
    NotYetPresent,
    #[error("budget exhausted after finding {found} witnesses")]
    BudgetExhausted { found: usize },
}

pub trait Oracle {
    type Right: Clone + Ord + std::fmt::Debug;

    fn edge(&self, x: u64, r: &Self::Right) -> Result<bool, OracleError>;

    /// Number of left vertices, or `None` when unbounded.
    fn left_limit(&self) -> Option<u64>;

    /// Right handle at position `i` of the canonical enumeration.
    fn right_at(&self, i: u64) -> Result<Self::Right, OracleError>;

    /// Number of right vertices, or `None` when unbounded.
    fn right_limit(&self) -> Option<u64>;

    fn right_label(&self, r: &Self::Right) -> String;
}

fn sign_of(b: bool) -> Sign {
    if b {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

// ---------------------------------------------------------------------------
// Witness streams
// ---------------------------------------------------------------------------

/// Left vertices satisfying a signed right condition, scanned in order.
/// Yields `Ok` per witness; ends with one `Err(BudgetExhausted)` if the scan
/// budget runs out, or cleanly when the left side is exhausted.
pub struct LeftWitnesses<'a, O: Oracle> {
    oracle: &'a O,
    cond: SignedCond<O::Right>,
    next: u64,
    scanned: u64,
    budget: u64,
    found: usize,
    done: bool,
}

pub fn left_witnesses<'a, O: Oracle>(
    oracle: &'a O,
    cond: &SignedCond<O::Right>,
    budget: u64,
) -> LeftWitnesses<'a, O> {
    LeftWitnesses {
        oracle,
        cond: cond.clone(),
        next: 0,
        scanned: 0,
        budget,
        found: 0,
        done: false,
    }
}

impl<'a, O: Oracle> Iterator for LeftWitnesses<'a, O> {
    type Item = Result<u64, OracleError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            if let Some(limit) = self.oracle.left_limit() {
                if self.next >= limit {
                    self.done = true;
                    return None;
                }
            }
            if self.scanned >= self.budget {
                self.done = true;
                return Some(Err(OracleError::BudgetExhausted { found: self.found }));
            }
            let x = self.next;
            self.next += 1;
            self.scanned += 1;
            let mut ok = true;
            for (r, sign) in self.cond.iter() {
                match self.oracle.edge(x, r) {
                    Ok(e) => {
                        if sign_of(e) != *sign {
                            ok = false;
                            break;
                        }
                    }
                    Err(e) => {
                        self.done = true;
                        return Some(Err(e));
                    }
                }
            }
            if ok {
                self.found += 1;
                return Some(Ok(x));
            }
        }
    }
}

/// Right handles adjacent to all of `pos` and none of `neg`, scanned in
/// enumeration order with the same budget protocol as [`LeftWitnesses`].
pub struct RightWitnesses<'a, O: Oracle> {
    oracle: &'a O,
    pos: Vec<u64>,
    neg: Vec<u64>,
    next: u64,
    scanned: u64,
    budget: u64,
    found: usize,
    done: bool,
}

pub fn right_witnesses<'a, O: Oracle>(
    oracle: &'a O,
    pos: &[u64],
    neg: &[u64],
    budget: u64,
) -> RightWitnesses<'a, O> {
    RightWitnesses {
        oracle,
        pos: pos.to_vec(),
        neg: neg.to_vec(),
        next: 0,
        scanned: 0,
        budget,
        found: 0,
        done: false,
    }
}

impl<'a, O: Oracle> Iterator for RightWitnesses<'a, O> {
    type Item = Result<O::Right, OracleError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            if let Some(limit) = self.oracle.right_limit() {
                if self.next >= limit {
                    self.done = true;
                    return None;
                }
            }
            if self.scanned >= self.budget {
                self.done = true;
                return Some(Err(OracleError::BudgetExhausted { found: self.found }));
            }
            let r = match self.oracle.right_at(self.next) {
                Ok(r) => r,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            };
            self.next += 1;
            self.scanned += 1;
            let mut ok = true;
            for &x in &self.pos {
                match self.oracle.edge(x, &r) {
                    Ok(true) => {}
                    Ok(false) => {
                        ok = false;
                        break;
                    }
                    Err(e) => {
                        self.done = true;
                        return Some(Err(e));
                    }
                }
            }
            if ok {
                for &x in &self.neg {
                    match self.oracle.edge(x, &r) {
                        Ok(false) => {}
                        Ok(true) => {
                            ok = false;
                            break;
                        }
                        Err(e) => {
                            self.done = true;
                            return Some(Err(e));
                        }
                    }
                }
            }
            if ok {
                self.found += 1;
                return Some(Ok(r));
            }
        }
    }
}

/// Drain a witness stream for up to `want` witnesses. Returns the witnesses
/// found together with the terminal error, if the stream ended on one.
pub fn first_witnesses<T, I: Iterator<Item = Result<T, OracleError>>>(
    stream: I,
    want: usize,
) -> (Vec<T>, Option<OracleError>) {
    let mut out = Vec::new();
    for item in stream {
        match item {
            Ok(w) => {
                out.push(w);
                if out.len() >= want {
                    return (out, None);
                }
            }
            Err(e) => return (out, Some(e)),
        }
    }
    (out, None)
}

// ---------------------------------------------------------------------------
// Hash oracle
// ---------------------------------------------------------------------------

/// The standard 64-bit mixing finalizer used by the hash oracle.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// A pseudo-random bipartite graph on naturals x naturals: the edge bit of
/// `(x, r)` is a fixed pure function of the seed, so queries are
/// reproducible across runs and platforms.
#[derive(Clone, Copy, Debug)]
pub struct HashOracle {
    pub seed: u64,
}

impl HashOracle {
    pub fn new(seed: u64) -> Self {
        HashOracle { seed }
    }
}

impl Oracle for HashOracle {
    type Right = u64;

    fn edge(&self, x: u64, r: &u64) -> Result<bool, OracleError> {
        let xm = splitmix64(self.seed ^ x.wrapping_mul(0x9E3779B97F4A7C15));
        let rm = splitmix64(r.wrapping_mul(0xBF58476D1CE4E5B9));
        Ok(splitmix64(xm ^ rm) & 1 == 1)
    }

    fn left_limit(&self) -> Option<u64> {
        None
    }

    fn right_at(&self, i: u64) -> Result<u64, OracleError> {
        Ok(i)
    }

    fn right_limit(&self) -> Option<u64> {
        None
    }

    fn right_label(&self, r: &u64) -> String {
        r.to_string()
    }
}

/// The top-left `rows x cols` adjacency corner as '0'/'1' lines, one line
/// per left vertex.
pub fn hash_matrix(seed: u64, rows: u64, cols: u64) -> String {
    let o = HashOracle::new(seed);
    let mut out = String::new();
    for x in 0..rows {
        for r in 0..cols {
            out.push(if o.edge(x, &r).expect("hash edges are total") {
                '1'
            } else {
                '0'
            });
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Finite graph and tower oracles
// ---------------------------------------------------------------------------

/// A finite graph behind the oracle interface; rights are their indices.
pub struct GraphOracle {
    graph: Graph,
}

impl GraphOracle {
    pub fn new(graph: Graph) -> Self {
        GraphOracle { graph }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }
}

impl Oracle for GraphOracle {
    type Right = usize;

    fn edge(&self, x: u64, r: &usize) -> Result<bool, OracleError> {
        if x >= self.graph.left_size() as u64 || *r >= self.graph.right_size() {
            return Err(OracleError::NotYetPresent);
        }
        Ok(self.graph.edge(x as usize, *r))
    }

    fn left_limit(&self) -> Option<u64> {
        Some(self.graph.left_size() as u64)
    }

    fn right_at(&self, i: u64) -> Result<usize, OracleError> {
        if i >= self.graph.right_size() as u64 {
            return Err(OracleError::NotYetPresent);
        }
        Ok(i as usize)
    }

    fn right_limit(&self) -> Option<u64> {
        Some(self.graph.right_size() as u64)
    }

    fn right_label(&self, r: &usize) -> String {
        crate::io::label_text(self.graph.label(*r))
    }
}

/// The limit of a built tower: left vertices of the deepest stage and one
/// handle per branch, ordered by (stem stage, stem index).
pub struct TowerOracle {
    tower: Arc<Tower>,
    branches: Vec<Branch>,
}

impl TowerOracle {
    pub fn new(tower: Arc<Tower>) -> Self {
        let mut branches = Vec::new();
        for n in 1..=tower.depth() {
            branches.extend(
                tower
                    .new_branches_at(n)
                    .expect("stages of a built tower enumerate"),
            );
        }
        TowerOracle { tower, branches }
    }

    pub fn tower(&self) -> &Arc<Tower> {
        &self.tower
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }
}

impl Oracle for TowerOracle {
    type Right = Branch;

    fn edge(&self, x: u64, r: &Branch) -> Result<bool, OracleError> {
        self.tower
            .limit_edge(x as usize, r)
            .map_err(|e| match e {
                TowerError::NotYetPresent => OracleError::NotYetPresent,
                _ => OracleError::NotYetPresent,
            })
    }

    fn left_limit(&self) -> Option<u64> {
        Some(self.tower.stage(self.tower.depth()).graph.left_size() as u64)
    }

    fn right_at(&self, i: u64) -> Result<Branch, OracleError> {
        self.branches
            .get(i as usize)
            .copied()
            .ok_or(OracleError::NotYetPresent)
    }

    fn right_limit(&self) -> Option<u64> {
        Some(self.branches.len() as u64)
    }

    fn right_label(&self, r: &Branch) -> String {
        let label = self
            .tower
            .branch_label_at(r, r.stem_stage)
            .expect("stems of enumerated branches exist");
        crate::io::label_text(&label)
    }
}

// ---------------------------------------------------------------------------
// Back and forth
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum BnfError {
    #[error("stuck at turn {turn}: {description}")]
    Stuck { turn: usize, description: String },
    #[error("oracle failure: {0}")]
    Oracle(#[from] OracleError),
}

/// A partial correspondence between two oracles: left index pairs and right
/// handle pairs, first component from the first oracle.
#[derive(Clone, Debug, Serialize)]
pub struct CrossMap<RA, RB> {
    pub left: Vec<(u64, u64)>,
    pub right: Vec<(RA, RB)>,
}

impl<RA: Clone + Ord + std::fmt::Debug, RB: Clone + Ord + std::fmt::Debug> CrossMap<RA, RB> {
    /// Injective on each side, and all cross adjacencies agree.
    pub fn verify<A, B>(&self, a: &A, b: &B) -> Result<bool, OracleError>
    where
        A: Oracle<Right = RA>,
        B: Oracle<Right = RB>,
    {
        let la: BTreeSet<u64> = self.left.iter().map(|p| p.0).collect();
        let lb: BTreeSet<u64> = self.left.iter().map(|p| p.1).collect();
        let ra: BTreeSet<RA> = self.right.iter().map(|p| p.0.clone()).collect();
        let rb: BTreeSet<RB> = self.right.iter().map(|p| p.1.clone()).collect();
        if la.len() != self.left.len()
            || lb.len() != self.left.len()
            || ra.len() != self.right.len()
            || rb.len() != self.right.len()
        {
            return Ok(false);
        }
        for (xa, xb) in &self.left {
            for (ha, hb) in &self.right {
                if a.edge(*xa, ha)? != b.edge(*xb, hb)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

fn least_unmatched_left<O: Oracle>(oracle: &O, used: &BTreeSet<u64>) -> Option<u64> {
    let mut x = 0u64;
    while used.contains(&x) {
        x += 1;
    }
    match oracle.left_limit() {
        Some(limit) if x >= limit => None,
        _ => Some(x),
    }
}

fn least_unmatched_right<O: Oracle>(oracle: &O, used: &BTreeSet<O::Right>) -> Option<O::Right> {
    let mut i = 0u64;
    loop {
        if let Some(limit) = oracle.right_limit() {
            if i >= limit {
                return None;
            }
        }
        match oracle.right_at(i) {
            Ok(r) => {
                if !used.contains(&r) {
                    return Some(r);
                }
            }
            Err(_) => return None,
        }
        i += 1;
    }
}

/// Pick a fresh left vertex on the witness side realizing the type of `x`
/// over the shared right pairs.
fn match_left<N: Oracle, W: Oracle>(
    new_oracle: &N,
    witness_oracle: &W,
    x: u64,
    rights: &[(N::Right, W::Right)],
    witness_used: &BTreeSet<u64>,
    budget: u64,
    turn: usize,
) -> Result<u64, BnfError> {
    let mut entries = Vec::new();
    for (rn, rw) in rights {
        entries.push((rw.clone(), sign_of(new_oracle.edge(x, rn)?)));
    }
    let cond = SignedCond::new(entries).expect("matched right handles are distinct");
    for item in left_witnesses(witness_oracle, &cond, budget) {
        match item {
            Ok(y) if witness_used.contains(&y) => continue,
            Ok(y) => return Ok(y),
            Err(OracleError::BudgetExhausted { found }) => {
                return Err(BnfError::Stuck {
                    turn,
                    description: format!(
                        "budget exhausted matching left vertex {x} ({found} used witnesses)"
                    ),
                })
            }
            Err(e) => return Err(BnfError::Oracle(e)),
        }
    }
    Err(BnfError::Stuck {
        turn,
        description: format!("no fresh left witness for vertex {x}"),
    })
}

/// Pick a fresh right handle on the witness side realizing the type of `r`
/// over the shared left pairs.
fn match_right<N: Oracle, W: Oracle>(
    new_oracle: &N,
    witness_oracle: &W,
    r: &N::Right,
    lefts: &[(u64, u64)],
    witness_used: &BTreeSet<W::Right>,
    budget: u64,
    turn: usize,
) -> Result<W::Right, BnfError> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for &(xn, xw) in lefts {
        if new_oracle.edge(xn, r)? {
            pos.push(xw);
        } else {
            neg.push(xw);
        }
    }
    for item in right_witnesses(witness_oracle, &pos, &neg, budget) {
        match item {
            Ok(h) if witness_used.contains(&h) => continue,
            Ok(h) => return Ok(h),
            Err(OracleError::BudgetExhausted { found }) => {
                return Err(BnfError::Stuck {
                    turn,
                    description: format!(
                        "budget exhausted matching right handle {} ({found} used witnesses)",
                        new_oracle.right_label(r)
                    ),
                })
            }
            Err(e) => return Err(BnfError::Oracle(e)),
        }
    }
    Err(BnfError::Stuck {
        turn,
        description: format!(
            "no fresh right witness for handle {}",
            new_oracle.right_label(r)
        ),
    })
}

/// Grow a partial correspondence between two oracles for `steps` turns,
/// cycling through the four frontiers (left of each oracle, then right of
/// each): take the least unmatched vertex on the due side and match it with
/// the first fresh witness realizing its full type over the current map.
/// Each witness search scans at most `budget` candidates. A turn whose side
/// is already fully matched is skipped.
pub fn back_and_forth<A: Oracle, B: Oracle>(
    a: &A,
    b: &B,
    steps: usize,
    budget: u64,
) -> Result<CrossMap<A::Right, B::Right>, BnfError> {
    let mut map: CrossMap<A::Right, B::Right> = CrossMap {
        left: Vec::new(),
        right: Vec::new(),
    };
    for turn in 0..steps {
        match turn % 4 {
            0 => {
                let used_a: BTreeSet<u64> = map.left.iter().map(|p| p.0).collect();
                let used_b: BTreeSet<u64> = map.left.iter().map(|p| p.1).collect();
                let Some(x) = least_unmatched_left(a, &used_a) else {
                    continue;
                };
                let y = match_left(a, b, x, &map.right, &used_b, budget, turn)?;
                map.left.push((x, y));
            }
            1 => {
                let used_b: BTreeSet<u64> = map.left.iter().map(|p| p.1).collect();
                let used_a: BTreeSet<u64> = map.left.iter().map(|p| p.0).collect();
                let Some(y) = least_unmatched_left(b, &used_b) else {
                    continue;
                };
                let swapped: Vec<(B::Right, A::Right)> = map
                    .right
                    .iter()
                    .map(|(ra, rb)| (rb.clone(), ra.clone()))
                    .collect();
                let x = match_left(b, a, y, &swapped, &used_a, budget, turn)?;
                map.left.push((x, y));
            }
            2 => {
                let used_a: BTreeSet<A::Right> = map.right.iter().map(|p| p.0.clone()).collect();
                let used_b: BTreeSet<B::Right> = map.right.iter().map(|p| p.1.clone()).collect();
                let Some(r) = least_unmatched_right(a, &used_a) else {
                    continue;
                };
                let h = match_right(a, b, &r, &map.left, &used_b, budget, turn)?;
                map.right.push((r, h));
            }
            3 => {
                let used_b: BTreeSet<B::Right> = map.right.iter().map(|p| p.1.clone()).collect();
                let used_a: BTreeSet<A::Right> = map.right.iter().map(|p| p.0.clone()).collect();
                let Some(r) = least_unmatched_right(b, &used_b) else {
                    continue;
                };
                let swapped: Vec<(u64, u64)> = map.left.iter().map(|&(p, q)| (q, p)).collect();
                let h = match_right(b, a, &r, &swapped, &used_a, budget, turn)?;
                map.right.push((h, r));
            }
            _ => unreachable!(),
        }
    }
    Ok(map)
}
