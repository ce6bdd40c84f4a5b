//! A splitting engine over oracles: grow two disjoint left sets that cover
//! an initial segment while staying compatible with a scheduled family of
//! signed automorphism conditions, with every step recorded for later
//! auditing; on top of it, binary extension trees whose sibling nodes carry
//! machine-checkable incompatibility certificates.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{Sign, SignedCond, TotalAut};
use crate::oracle::{left_witnesses, right_witnesses, Oracle, OracleError};
use crate::tower::{LiftedAut, LimitMap, Tower, TowerError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SplitError {
    #[error("the two automorphisms agree on every probed vertex")]
    FunctionsAgree,
    #[error("scan budget exhausted")]
    BudgetExhausted,
    #[error("witness stream exhausted")]
    StreamExhausted,
    #[error("complementarity fails at vertex {x}")]
    ComplementarityFails { x: u64 },
    #[error("oracle failure: {0}")]
    Oracle(#[from] OracleError),
}

// ---------------------------------------------------------------------------
// Automorphisms over oracles
// ---------------------------------------------------------------------------

/// A total automorphism of an oracle's graph, applied one vertex at a time.
pub trait GraphAut<R> {
    fn left(&self, x: u64) -> Result<u64, OracleError>;
    fn left_inv(&self, x: u64) -> Result<u64, OracleError>;
    fn right(&self, r: &R) -> Result<R, OracleError>;
    fn right_inv(&self, r: &R) -> Result<R, OracleError>;
    fn describe(&self) -> String;
}

/// The identity automorphism of any oracle.
pub struct IdentityAut;

impl<R: Clone> GraphAut<R> for IdentityAut {
    fn left(&self, x: u64) -> Result<u64, OracleError> {
        Ok(x)
    }
    fn left_inv(&self, x: u64) -> Result<u64, OracleError> {
        Ok(x)
    }
    fn right(&self, r: &R) -> Result<R, OracleError> {
        Ok(r.clone())
    }
    fn right_inv(&self, r: &R) -> Result<R, OracleError> {
        Ok(r.clone())
    }
    fn describe(&self) -> String {
        "id".into()
    }
}

/// A finite-graph automorphism for [`crate::oracle::GraphOracle`]; rights
/// are indices.
pub struct TotalGraphAut {
    aut: TotalAut,
    inv: TotalAut,
    name: String,
}

impl TotalGraphAut {
    pub fn new(aut: TotalAut, name: impl Into<String>) -> Self {
        let inv = aut.inverse();
        TotalGraphAut {
            aut,
            inv,
            name: name.into(),
        }
    }
}

impl GraphAut<usize> for TotalGraphAut {
    fn left(&self, x: u64) -> Result<u64, OracleError> {
        self.aut
            .left
            .get(x as usize)
            .map(|&y| y as u64)
            .ok_or(OracleError::NotYetPresent)
    }
    fn left_inv(&self, x: u64) -> Result<u64, OracleError> {
        self.inv
            .left
            .get(x as usize)
            .map(|&y| y as u64)
            .ok_or(OracleError::NotYetPresent)
    }
    fn right(&self, r: &usize) -> Result<usize, OracleError> {
        self.aut.right.get(*r).copied().ok_or(OracleError::NotYetPresent)
    }
    fn right_inv(&self, r: &usize) -> Result<usize, OracleError> {
        self.inv.right.get(*r).copied().ok_or(OracleError::NotYetPresent)
    }
    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// A lifted tower automorphism for [`crate::oracle::TowerOracle`]; rights
/// are branches.
pub struct LiftAut {
    tower: std::sync::Arc<Tower>,
    lifted: LiftedAut,
    inv: LiftedAut,
    name: String,
}

impl LiftAut {
    pub fn new(
        tower: std::sync::Arc<Tower>,
        input: &LimitMap,
        name: impl Into<String>,
    ) -> Result<Self, TowerError> {
        let lifted = tower.lift(input)?;
        let inv = lifted.inverse();
        Ok(LiftAut {
            tower,
            lifted,
            inv,
            name: name.into(),
        })
    }

    pub fn lifted(&self) -> &LiftedAut {
        &self.lifted
    }
}

fn tower_err(_: TowerError) -> OracleError {
    OracleError::NotYetPresent
}

impl GraphAut<crate::tower::Branch> for LiftAut {
    fn left(&self, x: u64) -> Result<u64, OracleError> {
        self.lifted
            .left_apply(&self.tower, x as usize)
            .map(|y| y as u64)
            .map_err(tower_err)
    }
    fn left_inv(&self, x: u64) -> Result<u64, OracleError> {
        self.inv
            .left_apply(&self.tower, x as usize)
            .map(|y| y as u64)
            .map_err(tower_err)
    }
    fn right(&self, r: &crate::tower::Branch) -> Result<crate::tower::Branch, OracleError> {
        self.lifted.branch_apply(&self.tower, r).map_err(tower_err)
    }
    fn right_inv(&self, r: &crate::tower::Branch) -> Result<crate::tower::Branch, OracleError> {
        self.inv.branch_apply(&self.tower, r).map_err(tower_err)
    }
    fn describe(&self) -> String {
        self.name.clone()
    }
}

// ---------------------------------------------------------------------------
// Separation primitives
// ---------------------------------------------------------------------------

const SAMPLE_N: usize = 8;

/// A separating right pair (positive handle, negative handle) together with
/// the sampled left witnesses used to double-check it.
pub type SeparatingPair<R> = (R, R, Vec<u64>);

/// A fallible left-vertex map, as consumed by [`disjoint_images`].
pub type LeftMap<'a> = Box<dyn Fn(u64) -> Result<u64, OracleError> + 'a>;

/// Find a signed right pair separating the inverse actions of `f` and `g`:
/// left vertices adjacent to the first and not the second returned handle
/// are guaranteed distinct `f`- and `g`-preimages. Scans for left vertices
/// the two maps treat differently and, for each, tries right witness pairs
/// off the stream, skipping `excluded` handles; up to [`SAMPLE_N`] sample
/// witnesses are drawn to double-check the separation before a pair is
/// accepted.
pub fn distinct_on_difference<O: Oracle>(
    oracle: &O,
    f: &dyn GraphAut<O::Right>,
    g: &dyn GraphAut<O::Right>,
    excluded: &BTreeSet<O::Right>,
    budget: u64,
) -> Result<SeparatingPair<O::Right>, SplitError> {
    // h = g after f-inverse; h fixes x exactly when the preimages agree.
    let h_left = |x: u64| -> Result<u64, OracleError> { g.left(f.left_inv(x)?) };
    let h_right =
        |r: &O::Right| -> Result<O::Right, OracleError> { g.right(&f.right_inv(r)?) };

    let mut last_err = SplitError::FunctionsAgree;
    for x0 in 0..budget {
        if let Some(limit) = oracle.left_limit() {
            if x0 >= limit {
                break;
            }
        }
        let hx0 = h_left(x0)?;
        if hx0 == x0 {
            continue;
        }
        if matches!(last_err, SplitError::FunctionsAgree) {
            last_err = SplitError::StreamExhausted;
        }
        for item in right_witnesses(oracle, &[x0], &[hx0], budget) {
            let u = match item {
                Ok(u) => u,
                Err(OracleError::BudgetExhausted { .. }) => {
                    last_err = SplitError::BudgetExhausted;
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            if excluded.contains(&u) {
                continue;
            }
            let v = h_right(&u)?;
            if excluded.contains(&v) || v == u {
                continue;
            }
            let cond = SignedCond::new(vec![(u.clone(), Sign::Plus), (v.clone(), Sign::Minus)])
                .expect("the pair is distinct");
            let (samples, _) = crate::oracle::first_witnesses(
                left_witnesses(oracle, &cond, budget),
                SAMPLE_N,
            );
            let mut all_separate = true;
            for &w in &samples {
                if f.left_inv(w)? == g.left_inv(w)? {
                    all_separate = false;
                    break;
                }
            }
            if all_separate {
                return Ok((u, v, samples));
            }
        }
    }
    Err(last_err)
}

/// One separating right pair per unordered pair of the listed automorphisms,
/// assembled into a single signed condition. Handles already claimed by the
/// ambient condition (and by earlier pairs) are never reused, so the result
/// unions cleanly with it. Each accepted pair is additionally checked to keep
/// the joint condition satisfiable: on a structured graph two individually
/// fine pairs can contradict each other on every vertex, in which case the
/// search moves on to the next admissible pair.
pub fn separating_condition<O: Oracle>(
    oracle: &O,
    gs: &[&dyn GraphAut<O::Right>],
    dom: &[usize],
    ambient: &SignedCond<O::Right>,
    budget: u64,
) -> Result<SignedCond<O::Right>, SplitError> {
    let mut excluded: BTreeSet<O::Right> = ambient.iter().map(|(r, _)| r.clone()).collect();
    let mut tau = SignedCond::empty();
    for (a, &i) in dom.iter().enumerate() {
        for &j in &dom[a + 1..] {
            loop {
                let (u, v, _) = distinct_on_difference(oracle, gs[i], gs[j], &excluded, budget)?;
                excluded.insert(u.clone());
                excluded.insert(v.clone());
                let mut trial = tau.clone();
                trial
                    .insert(u, Sign::Plus)
                    .expect("separating handles are fresh");
                trial
                    .insert(v, Sign::Minus)
                    .expect("separating handles are fresh");
                let joint = trial
                    .union(ambient)
                    .expect("separating handles avoid the ambient condition");
                if matches!(left_witnesses(oracle, &joint, budget).next(), Some(Ok(_))) {
                    tau = trial;
                    break;
                }
            }
        }
    }
    Ok(tau)
}

/// Greedily select `n` stream elements whose images under all the given maps
/// are pairwise fresh: a candidate is accepted only if none of its images
/// was produced by an earlier accepted element.
pub fn disjoint_images<I>(
    stream: I,
    maps: &[LeftMap<'_>],
    n: usize,
) -> Result<Vec<u64>, SplitError>
where
    I: Iterator<Item = Result<u64, OracleError>>,
{
    let mut taken: BTreeSet<u64> = BTreeSet::new();
    let mut out = Vec::new();
    if n == 0 {
        return Ok(out);
    }
    for item in stream {
        let x = match item {
            Ok(x) => x,
            Err(OracleError::BudgetExhausted { .. }) => return Err(SplitError::BudgetExhausted),
            Err(e) => return Err(e.into()),
        };
        let mut images = Vec::with_capacity(maps.len());
        for m in maps {
            images.push(m(x)?);
        }
        if images.iter().any(|y| taken.contains(y)) {
            continue;
        }
        taken.extend(images);
        out.push(x);
        if out.len() >= n {
            return Ok(out);
        }
    }
    Err(SplitError::StreamExhausted)
}

/// A signed condition on right handles combined with signed automorphism
/// requirements (indices into a shared automorphism list).
#[derive(Clone, Debug, Serialize)]
pub struct GCond<R: Ord> {
    pub right: SignedCond<R>,
    pub autos: SignedCond<usize>,
}

impl<R: Ord + Clone> GCond<R> {
    pub fn empty() -> Self {
        GCond {
            right: SignedCond::empty(),
            autos: SignedCond::empty(),
        }
    }

    pub fn auto_indices(&self) -> Vec<usize> {
        self.autos.iter().map(|(i, _)| *i).collect()
    }
}

#[derive(Clone, Debug)]
pub struct IndependentBlock<R: Ord> {
    /// The full signed condition every member satisfies: the ambient right
    /// requirements plus the pairwise separating handles.
    pub condition: SignedCond<R>,
    pub members: Vec<u64>,
}

/// Members satisfying the condition's right part and a fresh separating
/// condition for its automorphisms, with pairwise disjoint inverse images.
pub fn independent_block<O: Oracle>(
    oracle: &O,
    gs: &[&dyn GraphAut<O::Right>],
    cond: &GCond<O::Right>,
    size: usize,
    budget: u64,
) -> Result<IndependentBlock<O::Right>, SplitError> {
    let dom = cond.auto_indices();
    let tau = separating_condition(oracle, gs, &dom, &cond.right, budget)?;
    let full = tau
        .union(&cond.right)
        .expect("separating handles avoid the ambient condition");
    let maps: Vec<LeftMap<'_>> = dom
        .iter()
        .map(|&i| {
            let g = gs[i];
            Box::new(move |x: u64| g.left_inv(x)) as LeftMap<'_>
        })
        .collect();
    let members = disjoint_images(left_witnesses(oracle, &full, budget), &maps, size)?;
    Ok(IndependentBlock {
        condition: full,
        members,
    })
}

// ---------------------------------------------------------------------------
// The split
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct SplitStep<R: Ord> {
    pub condition: GCond<R>,
    pub separating: SignedCond<R>,
    pub exclusions: Vec<u64>,
    pub block: Vec<u64>,
    pub selected: Vec<u64>,
    pub added_to_a: Vec<u64>,
    pub added_to_b: Vec<u64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SplitTrace<R: Ord> {
    pub steps: Vec<SplitStep<R>>,
    pub a: Vec<u64>,
    pub b: Vec<u64>,
}

#[derive(Debug)]
pub struct SplitFailure<R: Ord> {
    pub error: SplitError,
    pub partial: SplitTrace<R>,
}

/// Run one scheduled condition per step `n = 0, 1, ...`: put `n` itself on
/// the side named by the condition's first sign if it is still uncolored,
/// then select `demand(n)` members of an independent block avoiding the
/// images of everything colored so far, and color the automorphism
/// preimages of the selected members by their signs. The recorded trace
/// carries enough data to re-audit every step against the oracle.
pub fn split<O: Oracle>(
    oracle: &O,
    gs: &[&dyn GraphAut<O::Right>],
    schedule: &[GCond<O::Right>],
    demand: &dyn Fn(usize) -> usize,
    budget: u64,
) -> Result<SplitTrace<O::Right>, SplitFailure<O::Right>> {
    let mut a: BTreeSet<u64> = BTreeSet::new();
    let mut b: BTreeSet<u64> = BTreeSet::new();
    let mut steps: Vec<SplitStep<O::Right>> = Vec::new();

    let fail = |error: SplitError, steps: Vec<SplitStep<O::Right>>, a: &BTreeSet<u64>, b: &BTreeSet<u64>| {
        SplitFailure {
            error,
            partial: SplitTrace {
                steps,
                a: a.iter().copied().collect(),
                b: b.iter().copied().collect(),
            },
        }
    };

    for (n, cond) in schedule.iter().enumerate() {
        let n_vertex = n as u64;
        let mut added_to_a = Vec::new();
        let mut added_to_b = Vec::new();

        let first_sign = cond
            .autos
            .iter()
            .next()
            .map(|(_, s)| *s)
            .unwrap_or(Sign::Plus);
        if !a.contains(&n_vertex) && !b.contains(&n_vertex) {
            match first_sign {
                Sign::Plus => {
                    a.insert(n_vertex);
                    added_to_a.push(n_vertex);
                }
                Sign::Minus => {
                    b.insert(n_vertex);
                    added_to_b.push(n_vertex);
                }
            }
        }

        let mut exclusions: BTreeSet<u64> = BTreeSet::new();
        exclusions.insert(n_vertex);
        for &i in &cond.auto_indices() {
            match gs[i].left(n_vertex) {
                Ok(y) => {
                    exclusions.insert(y);
                }
                Err(e) => return Err(fail(e.into(), steps, &a, &b)),
            }
            for &z in a.iter().chain(b.iter()) {
                match gs[i].left(z) {
                    Ok(y) => {
                        exclusions.insert(y);
                    }
                    Err(e) => return Err(fail(e.into(), steps, &a, &b)),
                }
            }
        }

        let want = demand(n) + exclusions.len();
        let block = match independent_block(oracle, gs, cond, want, budget) {
            Ok(bl) => bl,
            Err(e) => return Err(fail(e, steps, &a, &b)),
        };
        let selected: Vec<u64> = block
            .members
            .iter()
            .copied()
            .filter(|x| !exclusions.contains(x))
            .take(demand(n))
            .collect();
        debug_assert_eq!(selected.len(), demand(n), "the block oversamples exclusions");

        for &x in &selected {
            for (&i, &sign) in cond.autos.iter().map(|(i, s)| (i, s)) {
                let y = match gs[i].left_inv(x) {
                    Ok(y) => y,
                    Err(e) => return Err(fail(e.into(), steps, &a, &b)),
                };
                match sign {
                    Sign::Plus => {
                        debug_assert!(!b.contains(&y), "fresh preimages cannot clash");
                        if a.insert(y) {
                            added_to_a.push(y);
                        }
                    }
                    Sign::Minus => {
                        debug_assert!(!a.contains(&y), "fresh preimages cannot clash");
                        if b.insert(y) {
                            added_to_b.push(y);
                        }
                    }
                }
            }
        }

        steps.push(SplitStep {
            condition: cond.clone(),
            separating: block.condition,
            exclusions: exclusions.into_iter().collect(),
            block: block.members,
            selected,
            added_to_a,
            added_to_b,
        });
    }

    Ok(SplitTrace {
        steps,
        a: a.into_iter().collect(),
        b: b.into_iter().collect(),
    })
}

/// Re-derive the four split guarantees from the oracle and the trace:
/// disjointness of the two sides, coverage of the processed initial
/// segment, genuineness of every recorded witness (separating condition and
/// exclusions), and sign-consistent membership of every recorded preimage.
pub fn audit_split_trace<O: Oracle>(
    oracle: &O,
    gs: &[&dyn GraphAut<O::Right>],
    trace: &SplitTrace<O::Right>,
) -> Result<(), String> {
    let a: BTreeSet<u64> = trace.a.iter().copied().collect();
    let b: BTreeSet<u64> = trace.b.iter().copied().collect();
    if let Some(x) = a.intersection(&b).next() {
        return Err(format!("sides intersect at {x}"));
    }
    for n in 0..trace.steps.len() as u64 {
        if !a.contains(&n) && !b.contains(&n) {
            return Err(format!("vertex {n} is uncovered"));
        }
    }
    for (n, step) in trace.steps.iter().enumerate() {
        let excl: BTreeSet<u64> = step.exclusions.iter().copied().collect();
        for &x in &step.selected {
            if !step.block.contains(&x) {
                return Err(format!("step {n}: selected {x} outside its block"));
            }
            if excl.contains(&x) {
                return Err(format!("step {n}: selected {x} was excluded"));
            }
        }
        for &x in &step.block {
            for (r, sign) in step.separating.iter() {
                let e = oracle
                    .edge(x, r)
                    .map_err(|e| format!("step {n}: oracle failed on {x}: {e}"))?;
                let expected = *sign == Sign::Plus;
                if e != expected {
                    return Err(format!("step {n}: block member {x} violates its condition"));
                }
            }
        }
        for &x in &step.selected {
            let mut seen: std::collections::BTreeMap<u64, Sign> = std::collections::BTreeMap::new();
            for (&i, &sign) in step.condition.autos.iter().map(|(i, s)| (i, s)) {
                let y = gs[i]
                    .left_inv(x)
                    .map_err(|e| format!("step {n}: automorphism failed on {x}: {e}"))?;
                let side_ok = match sign {
                    Sign::Plus => a.contains(&y),
                    Sign::Minus => b.contains(&y),
                };
                if !side_ok {
                    return Err(format!(
                        "step {n}: preimage {y} of {x} is on the wrong side"
                    ));
                }
                if *seen.entry(y).or_insert(sign) != sign {
                    return Err(format!("step {n}: preimages of {x} clash across signs"));
                }
            }
        }
        for &y in step.added_to_a.iter() {
            if !a.contains(&y) {
                return Err(format!("step {n}: recorded addition {y} missing from side a"));
            }
        }
        for &y in step.added_to_b.iter() {
            if !b.contains(&y) {
                return Err(format!("step {n}: recorded addition {y} missing from side b"));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Certificates and extension trees
// ---------------------------------------------------------------------------

/// Proof that two described left sets are exact complements below `probe`:
/// the bits of the first set are recorded, and validity means the second set
/// is their pointwise negation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Certificate {
    pub probe: u64,
    pub s_id: String,
    pub t_id: String,
    pub s_below: Vec<bool>,
}

pub fn certify_incompatible(
    s: &BTreeSet<u64>,
    t: &BTreeSet<u64>,
    probe: u64,
    s_id: impl Into<String>,
    t_id: impl Into<String>,
) -> Result<Certificate, SplitError> {
    let mut s_below = Vec::with_capacity(probe as usize);
    for x in 0..probe {
        let in_s = s.contains(&x);
        if t.contains(&x) != !in_s {
            return Err(SplitError::ComplementarityFails { x });
        }
        s_below.push(in_s);
    }
    Ok(Certificate {
        probe,
        s_id: s_id.into(),
        t_id: t_id.into(),
        s_below,
    })
}

/// Re-check a certificate against freshly supplied membership sets.
pub fn verify_certificate(
    cert: &Certificate,
    s: &BTreeSet<u64>,
    t: &BTreeSet<u64>,
) -> Result<(), SplitError> {
    for x in 0..cert.probe {
        let bit = cert.s_below[x as usize];
        if s.contains(&x) != bit || t.contains(&x) != !bit {
            return Err(SplitError::ComplementarityFails { x });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub struct TreeParams {
    pub steps: usize,
    pub probe: u64,
    pub budget: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TreeNode {
    /// Root-to-node path bits; empty at the root.
    pub address: Vec<u8>,
    pub description: String,
    /// Membership below the probe bound.
    pub family: Vec<bool>,
    pub a_size: usize,
    pub b_size: usize,
    /// Present on internal nodes: incompatibility of the two child sets.
    pub certificate: Option<Certificate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtensionTree {
    pub probe: u64,
    /// Breadth-first: node `i` has children `2i+1` and `2i+2`.
    pub nodes: Vec<TreeNode>,
}

impl ExtensionTree {
    pub fn leaves(&self) -> &[TreeNode] {
        let internal = (self.nodes.len() - 1) / 2;
        &self.nodes[internal..]
    }
}

/// Deterministic one-automorphism signed schedule for a node address.
fn address_schedule<R: Ord + Clone>(
    address: &[u8],
    steps: usize,
    num_autos: usize,
) -> Vec<GCond<R>> {
    let code = address
        .iter()
        .fold(1u64, |acc, &bit| acc << 1 | bit as u64);
    (0..steps)
        .map(|n| {
            let h = crate::oracle::splitmix64(code ^ crate::oracle::splitmix64(n as u64));
            let idx = ((h >> 1) % num_autos as u64) as usize;
            let sign = if h & 1 == 1 { Sign::Plus } else { Sign::Minus };
            GCond {
                right: SignedCond::empty(),
                autos: SignedCond::new(vec![(idx, sign)]).expect("single entry"),
            }
        })
        .collect()
}

/// Grow a full binary tree of left-set refinements of the given depth (at
/// most 4). Each internal node runs a split under its own address-derived
/// schedule; its children intersect the node's family with the two sides,
/// and the node records a certificate that the sides are complementary
/// below the probe.
pub fn extension_tree<O: Oracle>(
    oracle: &O,
    gs: &[&dyn GraphAut<O::Right>],
    depth: usize,
    params: &TreeParams,
) -> Result<ExtensionTree, SplitFailure<O::Right>> {
    assert!((1..=4).contains(&depth), "tree depth must be between 1 and 4");
    assert!(!gs.is_empty(), "at least one automorphism is required");
    let probe = params.probe;
    let mut nodes = vec![TreeNode {
        address: Vec::new(),
        description: "all".into(),
        family: vec![true; probe as usize],
        a_size: 0,
        b_size: 0,
        certificate: None,
    }];
    let internal = (1 << depth) - 1;
    for i in 0..internal {
        let (address, family, description) = {
            let node = &nodes[i];
            (node.address.clone(), node.family.clone(), node.description.clone())
        };
        let schedule: Vec<GCond<O::Right>> = address_schedule(&address, params.steps, gs.len());
        let trace = split(oracle, gs, &schedule, &|_| 1, params.budget)?;
        let a: BTreeSet<u64> = trace.a.iter().copied().collect();
        let b: BTreeSet<u64> = trace.b.iter().copied().collect();
        let addr_text = if address.is_empty() {
            "root".to_string()
        } else {
            address.iter().map(u8::to_string).collect::<Vec<_>>().join("")
        };
        let cert = certify_incompatible(
            &a,
            &b,
            probe,
            format!("{addr_text}/a"),
            format!("{addr_text}/b"),
        )
        .map_err(|error| SplitFailure {
            error,
            partial: trace.clone(),
        })?;
        nodes[i].a_size = trace.a.len();
        nodes[i].b_size = trace.b.len();
        nodes[i].certificate = Some(cert);
        for (bit, side) in [(0u8, &a), (1u8, &b)] {
            let mut child_address = address.clone();
            child_address.push(bit);
            let child_family: Vec<bool> = (0..probe)
                .map(|x| family[x as usize] && side.contains(&x))
                .collect();
            let side_name = if bit == 0 { "a" } else { "b" };
            nodes.push(TreeNode {
                address: child_address,
                description: format!("{description} & {addr_text}/{side_name}"),
                family: child_family,
                a_size: 0,
                b_size: 0,
                certificate: None,
            });
        }
    }
    Ok(ExtensionTree { probe, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::oracle::{GraphOracle, HashOracle};

    fn matching_oracle() -> GraphOracle {
        GraphOracle::new(
            Graph::new(2, vec![vec![1], vec![2]], &[(0, 0), (1, 1)]).unwrap(),
        )
    }

    fn swap_aut() -> TotalGraphAut {
        TotalGraphAut::new(
            TotalAut::new(vec![1, 0], vec![1, 0]).unwrap(),
            "swap",
        )
    }

    #[test]
    fn disjoint_images_greedy_example() {
        // Identity plus the neighbour swap 2k <-> 2k+1 over the naturals.
        let id: Box<dyn Fn(u64) -> Result<u64, OracleError>> = Box::new(Ok);
        let swap: Box<dyn Fn(u64) -> Result<u64, OracleError>> =
            Box::new(|x| Ok(if x % 2 == 0 { x + 1 } else { x - 1 }));
        let stream = (0u64..).map(Ok);
        let picked = disjoint_images(stream, &[id, swap], 3).unwrap();
        assert_eq!(picked, vec![0, 2, 4]);
    }

    #[test]
    fn disjoint_images_exhaustion() {
        let id: Box<dyn Fn(u64) -> Result<u64, OracleError>> = Box::new(Ok);
        let short = (0u64..2).map(Ok);
        assert_eq!(
            disjoint_images(short, &[id], 5),
            Err(SplitError::StreamExhausted)
        );
    }

    #[test]
    fn distinct_on_difference_on_matching() {
        let o = matching_oracle();
        let id = IdentityAut;
        let swap = swap_aut();
        let (u, v, samples) =
            distinct_on_difference(&o, &id, &swap, &BTreeSet::new(), 100).unwrap();
        // Left 0 moves; right 0 sees it positively, its swap image is right 1.
        assert_eq!((u, v), (0, 1));
        assert_eq!(samples, vec![0]);
        // Verified witnesses have distinct preimages.
        assert_ne!(
            GraphAut::<usize>::left_inv(&id, 0).unwrap(),
            swap.left_inv(0).unwrap()
        );
    }

    #[test]
    fn distinct_on_difference_agreeing_functions() {
        let o = matching_oracle();
        let id1 = IdentityAut;
        let id2 = IdentityAut;
        assert_eq!(
            distinct_on_difference(&o, &id1, &id2, &BTreeSet::new(), 100).unwrap_err(),
            SplitError::FunctionsAgree
        );
    }

    #[test]
    fn separating_condition_one_pair() {
        let o = matching_oracle();
        let id = IdentityAut;
        let swap = swap_aut();
        let gs: Vec<&dyn GraphAut<usize>> = vec![&id, &swap];
        let tau = separating_condition(&o, &gs, &[0, 1], &SignedCond::empty(), 100).unwrap();
        assert_eq!(tau.len(), 2);
        // On the 2x2 matching the pair is forced, so an ambient condition
        // claiming one of its handles exhausts the search.
        let ambient = SignedCond::new(vec![(0usize, Sign::Plus)]).unwrap();
        assert_eq!(
            separating_condition(&o, &gs, &[0, 1], &ambient, 100).unwrap_err(),
            SplitError::StreamExhausted
        );
    }

    #[test]
    fn distinct_on_difference_retries_later_vertices() {
        // A 4x4 matching with the pairwise swap automorphism: claiming
        // right 0 rules out the pairs seen from lefts 0 and 1, and the scan
        // moves on to left 2.
        let o = GraphOracle::new(
            Graph::new(
                4,
                vec![vec![1], vec![2], vec![3], vec![4]],
                &[(0, 0), (1, 1), (2, 2), (3, 3)],
            )
            .unwrap(),
        );
        let id = IdentityAut;
        let swap = TotalGraphAut::new(
            TotalAut::new(vec![1, 0, 3, 2], vec![1, 0, 3, 2]).unwrap(),
            "pairswap",
        );
        let claimed: BTreeSet<usize> = [0usize].into_iter().collect();
        let (u, v, _) = distinct_on_difference(&o, &id, &swap, &claimed, 100).unwrap();
        assert_eq!((u, v), (2, 3));
    }

    #[test]
    fn independent_block_respects_condition() {
        let o = matching_oracle();
        let id = IdentityAut;
        let swap = swap_aut();
        let gs: Vec<&dyn GraphAut<usize>> = vec![&id, &swap];
        let cond = GCond {
            right: SignedCond::empty(),
            autos: SignedCond::new(vec![(0, Sign::Plus), (1, Sign::Minus)]).unwrap(),
        };
        let block = independent_block(&o, &gs, &cond, 1, 100).unwrap();
        assert_eq!(block.members, vec![0]);
        // Asking for more witnesses than the 2x2 graph can carry fails
        // cleanly.
        assert_eq!(
            independent_block(&o, &gs, &cond, 2, 100).unwrap_err(),
            SplitError::StreamExhausted
        );
    }

    #[test]
    fn split_over_hash_oracle_audits() {
        let o = HashOracle::new(11);
        let id = IdentityAut;
        let gs: Vec<&dyn GraphAut<u64>> = vec![&id];
        let schedule: Vec<GCond<u64>> = vec![
            GCond {
                right: SignedCond::empty(),
                autos: SignedCond::new(vec![(0, Sign::Plus)]).unwrap(),
            },
            GCond {
                right: SignedCond::empty(),
                autos: SignedCond::new(vec![(0, Sign::Minus)]).unwrap(),
            },
            GCond {
                right: SignedCond::empty(),
                autos: SignedCond::new(vec![(0, Sign::Plus)]).unwrap(),
            },
            GCond {
                right: SignedCond::empty(),
                autos: SignedCond::new(vec![(0, Sign::Minus)]).unwrap(),
            },
        ];
        let trace = split(&o, &gs, &schedule, &|n| n, 10_000).unwrap();
        assert_eq!(trace.steps.len(), 4);
        audit_split_trace(&o, &gs, &trace).unwrap();
        let a: BTreeSet<u64> = trace.a.iter().copied().collect();
        let b: BTreeSet<u64> = trace.b.iter().copied().collect();
        assert!(a.intersection(&b).next().is_none());
        for n in 0..4 {
            assert!(a.contains(&n) || b.contains(&n));
        }
    }

    #[test]
    fn split_failure_keeps_partial_trace() {
        // Two left vertices cannot host a growing demand for long.
        let o = matching_oracle();
        let id = IdentityAut;
        let gs: Vec<&dyn GraphAut<usize>> = vec![&id];
        let schedule: Vec<GCond<usize>> = (0..4)
            .map(|_| GCond {
                right: SignedCond::empty(),
                autos: SignedCond::new(vec![(0, Sign::Plus)]).unwrap(),
            })
            .collect();
        let failure = split(&o, &gs, &schedule, &|n| n + 1, 100).unwrap_err();
        assert_eq!(failure.error, SplitError::StreamExhausted);
        assert!(!failure.partial.a.is_empty());
    }

    #[test]
    fn certificates_demand_exact_complements() {
        let s: BTreeSet<u64> = [0, 2, 4].into_iter().collect();
        let t: BTreeSet<u64> = [1, 3, 5].into_iter().collect();
        let cert = certify_incompatible(&s, &t, 6, "s", "t").unwrap();
        assert_eq!(cert.s_below, vec![true, false, true, false, true, false]);
        verify_certificate(&cert, &s, &t).unwrap();
        let holey: BTreeSet<u64> = [1, 3].into_iter().collect();
        assert_eq!(
            certify_incompatible(&s, &holey, 6, "s", "t").unwrap_err(),
            SplitError::ComplementarityFails { x: 5 }
        );
        assert_eq!(
            verify_certificate(&cert, &s, &holey).unwrap_err(),
            SplitError::ComplementarityFails { x: 5 }
        );
    }

    #[test]
    fn extension_tree_depth_two() {
        let o = HashOracle::new(3);
        let id = IdentityAut;
        let gs: Vec<&dyn GraphAut<u64>> = vec![&id];
        let params = TreeParams {
            steps: 16,
            probe: 16,
            budget: 10_000,
        };
        let tree = extension_tree(&o, &gs, 2, &params).unwrap();
        assert_eq!(tree.nodes.len(), 7);
        let certs: Vec<_> = tree
            .nodes
            .iter()
            .filter(|n| n.certificate.is_some())
            .collect();
        assert_eq!(certs.len(), 3);
        let leaves = tree.leaves();
        assert_eq!(leaves.len(), 4);
        for (i, l) in leaves.iter().enumerate() {
            for other in &leaves[i + 1..] {
                assert_ne!(l.family, other.family, "leaf families must differ");
            }
        }
        // Children partition the parent family below the probe.
        let root = &tree.nodes[0];
        for x in 0..16usize {
            let in_children = tree.nodes[1].family[x] || tree.nodes[2].family[x];
            assert_eq!(root.family[x], in_children);
        }
    }
}
