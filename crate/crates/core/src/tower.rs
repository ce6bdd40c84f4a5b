//! An increasing tower of finite bipartite graphs approximating a limit
//! structure whose right side consists of branches of the infinite binary
//! tree.
//!
//! Stage 1 is the two-point perfect matching. Every even stage is the magic
//! closure of the previous stage (rights renamed by appending `1`), every
//! odd stage past the first doubles each right vertex into two children
//! carrying the parent's adjacency row. Both side embeddings between
//! consecutive stages are identity on indices, so a vertex keeps its index
//! forever once born; in particular a branch is represented at every depth
//! by a single fixed index.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cover::{extend_in_cover, CoverAut, CoverError, MagicClosure};
use crate::graph::{
    check_partial_automorphism, Graph, Label, PartialMap, TotalAut,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TowerError {
    #[error("size guard exceeded while building stage {stage}")]
    SizeGuardExceeded { stage: usize },
    #[error("requested vertex or stage is not present in the built tower")]
    NotYetPresent,
    #[error("input does not induce a partial automorphism")]
    NotPartialIso,
    #[error("induced map is larger than the stage's scheduled budget")]
    KBudgetExceeded,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    Initial,
    Doubled,
    Magic,
}

pub struct Stage {
    pub index: usize,
    pub kind: StageKind,
    pub graph: Graph,
    closure: Option<MagicClosure>,
}

impl Stage {
    pub fn closure(&self) -> Option<&MagicClosure> {
        self.closure.as_ref()
    }
}

pub struct Tower {
    stages: Vec<Stage>,
    k_schedule: Vec<usize>,
}

/// Build `depth` stages. `k_schedule[n-1]` is the closure budget used when
/// stage `n` is a magic stage; the schedule must cover every stage.
pub fn build_tower(depth: usize, k_schedule: &[usize]) -> Result<Tower, TowerError> {
    assert!(depth >= 1, "tower needs at least one stage");
    assert!(k_schedule.len() >= depth, "schedule must cover every stage");
    let first = Graph::new(2, vec![vec![1], vec![2]], &[(0, 0), (1, 1)])
        .expect("initial stage is valid");
    let mut stages = vec![Stage {
        index: 1,
        kind: StageKind::Initial,
        graph: first,
        closure: None,
    }];
    for n in 2..=depth {
        let prev = &stages[n - 2].graph;
        let stage = if n % 2 == 0 {
            magic_stage(prev, n, k_schedule[n - 1])?
        } else {
            doubled_stage(prev, n)?
        };
        stages.push(stage);
    }
    Ok(Tower {
        stages,
        k_schedule: k_schedule[..depth].to_vec(),
    })
}

fn appended(label: &[u32], last: u32) -> Label {
    let mut l = label.to_vec();
    l.push(last);
    l
}

fn doubled_stage(prev: &Graph, index: usize) -> Result<Stage, TowerError> {
    if prev.right_size() * 2 > 1 << 18 {
        return Err(TowerError::SizeGuardExceeded { stage: index });
    }
    let mut labels: Vec<Label> = prev.labels().iter().map(|l| appended(l, 1)).collect();
    labels.extend(prev.labels().iter().map(|l| appended(l, 2)));
    let mut rows: Vec<_> = (0..prev.right_size()).map(|u| prev.row(u).clone()).collect();
    rows.extend(rows.clone());
    let graph = Graph::from_rows(prev.left_size(), labels, rows)
        .expect("doubling preserves validity");
    Ok(Stage {
        index,
        kind: StageKind::Doubled,
        graph,
        closure: None,
    })
}

fn magic_stage(prev: &Graph, index: usize, k: usize) -> Result<Stage, TowerError> {
    let renamed_labels: Vec<Label> = prev.labels().iter().map(|l| appended(l, 1)).collect();
    let base = prev
        .with_labels(renamed_labels)
        .expect("renaming preserves validity");
    let closure = crate::cover::k_magic_closure(&base, k).map_err(|e| match e {
        CoverError::SizeGuardExceeded(_) => TowerError::SizeGuardExceeded { stage: index },
        _ => TowerError::NotPartialIso,
    })?;
    // Rename the fresh right vertices to zero-padded sequences of the
    // stage's label length, so they can never collide with genuine tree
    // labels now or after later doublings.
    let mut labels: Vec<Label> = closure.graph().labels()[..base.right_size()].to_vec();
    for m in 1..=closure.graph().right_size() - base.right_size() {
        let mut l = vec![0u32; index - 1];
        l.push(m as u32);
        labels.push(l);
    }
    let graph = closure
        .graph()
        .with_labels(labels)
        .expect("fresh labels are distinct");
    Ok(Stage {
        index,
        kind: StageKind::Magic,
        graph,
        closure: Some(closure),
    })
}

impl Tower {
    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    pub fn k_schedule(&self) -> &[usize] {
        &self.k_schedule
    }

    /// Stages are numbered from 1.
    pub fn stage(&self, n: usize) -> &Stage {
        &self.stages[n - 1]
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// First stage whose left side contains `x`, if any.
    pub fn first_left_stage(&self, x: usize) -> Option<usize> {
        self.stages
            .iter()
            .find(|s| x < s.graph.left_size())
            .map(|s| s.index)
    }

    /// Canonical branch through the right vertex `index` of stage `stage`:
    /// descend to the earliest stage already containing that index.
    pub fn branch(&self, stage: usize, index: usize) -> Result<Branch, TowerError> {
        if stage == 0 || stage > self.depth() {
            return Err(TowerError::NotYetPresent);
        }
        if index >= self.stage(stage).graph.right_size() {
            return Err(TowerError::NotYetPresent);
        }
        let mut stem_stage = stage;
        while stem_stage > 1 && index < self.stage(stem_stage - 1).graph.right_size() {
            stem_stage -= 1;
        }
        Ok(Branch {
            stem_stage,
            stem_index: index,
        })
    }

    /// All branches represented in stage `n`, one per right index.
    pub fn branches_at(&self, n: usize) -> Result<Vec<Branch>, TowerError> {
        (0..self.stage(n).graph.right_size())
            .map(|i| self.branch(n, i))
            .collect()
    }

    /// Branches whose stem first appears at stage `n`.
    pub fn new_branches_at(&self, n: usize) -> Result<Vec<Branch>, TowerError> {
        let lo = if n == 1 {
            0
        } else {
            self.stage(n - 1).graph.right_size()
        };
        (lo..self.stage(n).graph.right_size())
            .map(|i| self.branch(n, i))
            .collect()
    }

    /// Label of the branch representative at stage `n >= stem stage`.
    pub fn branch_label_at(&self, b: &Branch, n: usize) -> Result<Label, TowerError> {
        if n < b.stem_stage || n > self.depth() {
            return Err(TowerError::NotYetPresent);
        }
        Ok(self.stage(n).graph.label(b.stem_index).clone())
    }

    /// Adjacency between a limit left vertex and a branch. The value is read
    /// at the first stage where both exist and audited against every later
    /// stage; the tower construction keeps it constant.
    pub fn limit_edge(&self, x: usize, b: &Branch) -> Result<bool, TowerError> {
        let first = self.first_left_stage(x).ok_or(TowerError::NotYetPresent)?;
        let m = first.max(b.stem_stage);
        if m > self.depth() {
            return Err(TowerError::NotYetPresent);
        }
        let value = self.stage(m).graph.edge(x, b.stem_index);
        for n in m + 1..=self.depth() {
            debug_assert_eq!(
                self.stage(n).graph.edge(x, b.stem_index),
                value,
                "stage adjacency must be stable above stage {m}"
            );
        }
        Ok(value)
    }

    /// Projection of a stage-`n` right index into stage `n-1`, when the
    /// vertex has an ancestor there.
    pub fn project_right(&self, n: usize, index: usize) -> Option<usize> {
        if n <= 1 || index >= self.stage(n).graph.right_size() {
            return None;
        }
        let prev = self.stage(n - 1).graph.right_size();
        match self.stage(n).kind {
            StageKind::Doubled => Some(if index < prev { index } else { index - prev }),
            StageKind::Magic => (index < prev).then_some(index),
            StageKind::Initial => None,
        }
    }

    pub fn manifest(&self) -> TowerManifest {
        let stages = self
            .stages
            .iter()
            .map(|s| {
                let prev_right = if s.index == 1 {
                    0
                } else {
                    self.stage(s.index - 1).graph.right_size()
                };
                StageSummary {
                    index: s.index,
                    kind: s.kind,
                    left: s.graph.left_size(),
                    right: s.graph.right_size(),
                    scheduled_k: s.closure.as_ref().map(|c| c.scheduled_k()),
                    witness_k: s.closure.as_ref().map(|c| c.witness_k()),
                    generators: s.closure.as_ref().map(|c| c.generators().len()),
                    code_dim: s.closure.as_ref().map(|c| c.code().dim()),
                    new_branches: s.graph.right_size() - prev_right,
                }
            })
            .collect();
        TowerManifest {
            depth: self.depth(),
            total_branches: self.stage(self.depth()).graph.right_size(),
            stages,
        }
    }
}

/// A branch of the limit structure, named by the earliest stage and right
/// index of its stem. Thanks to the identity-on-indices embeddings the same
/// index represents the branch at every later stage.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Branch {
    pub stem_stage: usize,
    pub stem_index: usize,
}

#[derive(Serialize)]
pub struct StageSummary {
    pub index: usize,
    pub kind: StageKind,
    pub left: usize,
    pub right: usize,
    pub scheduled_k: Option<usize>,
    pub witness_k: Option<usize>,
    pub generators: Option<usize>,
    pub code_dim: Option<usize>,
    pub new_branches: usize,
}

#[derive(Serialize)]
pub struct TowerManifest {
    pub depth: usize,
    pub total_branches: usize,
    pub stages: Vec<StageSummary>,
}

// ---------------------------------------------------------------------------
// Lifting limit maps through the tower
// ---------------------------------------------------------------------------

/// A finite partial map of the limit structure: left index pairs plus
/// branch pairs.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LimitMap {
    pub left: Vec<(usize, usize)>,
    pub branches: Vec<(Branch, Branch)>,
}

impl LimitMap {
    pub fn support(&self) -> usize {
        self.left.len() + self.branches.len()
    }

    pub fn inverse(&self) -> LimitMap {
        LimitMap {
            left: self.left.iter().map(|&(a, b)| (b, a)).collect(),
            branches: self.branches.iter().map(|&(a, b)| (b, a)).collect(),
        }
    }
}

/// One stage of a lifted map: partial at the starting stage, total above it.
#[derive(Clone, Debug)]
pub enum StageAut {
    Partial(PartialMap),
    Total(TotalAut),
}

/// A compatible family of stage automorphisms extending a limit map: the
/// induced partial map at its starting stage and total automorphisms of
/// every later built stage, agreeing along the stage embeddings.
#[derive(Clone, Debug)]
pub struct LiftedAut {
    n0: usize,
    maps: BTreeMap<usize, StageAut>,
}

impl Tower {
    /// Extend a limit map to a lifted automorphism family. The starting
    /// stage is the earliest odd stage containing every constituent; the
    /// first closure above it must have a budget at least the induced map's
    /// size.
    pub fn lift(&self, input: &LimitMap) -> Result<LiftedAut, TowerError> {
        let mut n0 = 1usize;
        for &(x, y) in &input.left {
            n0 = n0
                .max(self.first_left_stage(x).ok_or(TowerError::NotYetPresent)?)
                .max(self.first_left_stage(y).ok_or(TowerError::NotYetPresent)?);
        }
        for (a, b) in &input.branches {
            if a.stem_stage > self.depth() || b.stem_stage > self.depth() {
                return Err(TowerError::NotYetPresent);
            }
            n0 = n0.max(a.stem_stage).max(b.stem_stage);
        }
        if n0.is_multiple_of(2) {
            n0 += 1;
        }
        if n0 > self.depth() {
            return Err(TowerError::NotYetPresent);
        }

        let right_pairs: Vec<(usize, usize)> = input
            .branches
            .iter()
            .map(|(a, b)| (a.stem_index, b.stem_index))
            .collect();
        let induced = PartialMap::new(&input.left, &right_pairs)
            .map_err(|_| TowerError::NotPartialIso)?;
        if check_partial_automorphism(&self.stage(n0).graph, &induced) != Ok(true) {
            return Err(TowerError::NotPartialIso);
        }

        let mut maps: BTreeMap<usize, StageAut> = BTreeMap::new();
        maps.insert(n0, StageAut::Partial(induced.clone()));
        let mut prev = StageAut::Partial(induced);
        for m in n0 + 1..=self.depth() {
            let stage = self.stage(m);
            let next = match stage.kind {
                StageKind::Magic => {
                    let mc = stage.closure().expect("magic stages carry closures");
                    let aut = match &prev {
                        StageAut::Partial(p) => {
                            if p.len() > mc.scheduled_k() {
                                return Err(TowerError::KBudgetExceeded);
                            }
                            extend_in_cover(mc.base(), p)
                                .map_err(|_| TowerError::NotPartialIso)?
                        }
                        StageAut::Total(t) => CoverAut::new(
                            t.left.clone(),
                            t.right.clone(),
                            vec![0; t.left.len()],
                        )
                        .expect("total stage maps are valid permutations"),
                    };
                    let total = mc
                        .restrict(&aut)
                        .expect("the closure is stable under lifted automorphisms");
                    StageAut::Total(total)
                }
                StageKind::Doubled => {
                    let StageAut::Total(t) = &prev else {
                        unreachable!("a magic stage always precedes a doubling above n0")
                    };
                    let r_prev = self.stage(m - 1).graph.right_size();
                    let right: Vec<usize> = (0..2 * r_prev)
                        .map(|j| {
                            if j < r_prev {
                                t.right[j]
                            } else {
                                t.right[j - r_prev] + r_prev
                            }
                        })
                        .collect();
                    StageAut::Total(TotalAut {
                        left: t.left.clone(),
                        right,
                    })
                }
                StageKind::Initial => unreachable!("stage 1 is never above n0"),
            };
            maps.insert(m, next.clone());
            prev = next;
        }
        Ok(LiftedAut { n0, maps })
    }
}

impl LiftedAut {
    pub fn start_stage(&self) -> usize {
        self.n0
    }

    pub fn stage_map(&self, n: usize) -> Option<&StageAut> {
        self.maps.get(&n)
    }

    /// Image of a limit left vertex, read off the first total stage where it
    /// exists.
    pub fn left_apply(&self, tower: &Tower, x: usize) -> Result<usize, TowerError> {
        let first = tower.first_left_stage(x).ok_or(TowerError::NotYetPresent)?;
        let m = first.max(self.n0 + 1);
        match self.maps.get(&m) {
            Some(StageAut::Total(t)) => Ok(t.left[x]),
            _ => Err(TowerError::NotYetPresent),
        }
    }

    /// Image of a branch, read off the first total stage where its stem
    /// exists, re-canonicalized.
    pub fn branch_apply(&self, tower: &Tower, b: &Branch) -> Result<Branch, TowerError> {
        let m = b.stem_stage.max(self.n0 + 1);
        match self.maps.get(&m) {
            Some(StageAut::Total(t)) => tower.branch(m, t.right[b.stem_index]),
            _ => Err(TowerError::NotYetPresent),
        }
    }

    /// Stagewise inverse; a lifted family for the inverse limit map.
    pub fn inverse(&self) -> LiftedAut {
        let maps = self
            .maps
            .iter()
            .map(|(&n, m)| {
                let inv = match m {
                    StageAut::Partial(p) => StageAut::Partial(PartialMap {
                        left: p.left.iter().map(|(&a, &b)| (b, a)).collect(),
                        right: p.right.iter().map(|(&a, &b)| (b, a)).collect(),
                    }),
                    StageAut::Total(t) => StageAut::Total(t.inverse()),
                };
                (n, inv)
            })
            .collect();
        LiftedAut { n0: self.n0, maps }
    }

    /// Check that every stage map is an automorphism of its stage and that
    /// consecutive stage maps agree on shared vertices (both side
    /// embeddings are identity on indices, so agreement is equality where
    /// both are defined).
    pub fn verify(&self, tower: &Tower) -> bool {
        for (&n, m) in &self.maps {
            let g = &tower.stage(n).graph;
            let ok = match m {
                StageAut::Partial(p) => check_partial_automorphism(g, p) == Ok(true),
                StageAut::Total(t) => t.verify(g),
            };
            if !ok {
                return false;
            }
        }
        for (&n, m) in &self.maps {
            let Some(next) = self.maps.get(&(n + 1)) else {
                continue;
            };
            let agree = match (m, next) {
                (StageAut::Partial(p), StageAut::Total(t)) => {
                    p.left.iter().all(|(&x, &y)| t.left[x] == y)
                        && p.right.iter().all(|(&u, &v)| t.right[u] == v)
                }
                (StageAut::Total(a), StageAut::Total(b)) => {
                    a.left.iter().enumerate().all(|(x, &y)| b.left[x] == y)
                        && a.right.iter().enumerate().all(|(u, &v)| b.right[u] == v)
                }
                _ => false,
            };
            if !agree {
                return false;
            }
        }
        true
    }
}

/// A finite, invariant left block: the orbit closure of `seed` under the
/// lifted map's action at the least total stage containing all of `seed`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window {
    pub stage: usize,
    pub members: Vec<usize>,
}

pub fn locally_finite_window(
    tower: &Tower,
    lifted: &LiftedAut,
    seed: &[usize],
) -> Result<Window, TowerError> {
    let m = (lifted.n0 + 1..=tower.depth())
        .find(|&n| {
            seed.iter().all(|&x| x < tower.stage(n).graph.left_size())
                && matches!(lifted.maps.get(&n), Some(StageAut::Total(_)))
        })
        .ok_or(TowerError::NotYetPresent)?;
    let Some(StageAut::Total(t)) = lifted.maps.get(&m) else {
        unreachable!()
    };
    let inv = t.inverse();
    let mut members: std::collections::BTreeSet<usize> = seed.iter().copied().collect();
    let mut frontier: Vec<usize> = members.iter().copied().collect();
    while let Some(x) = frontier.pop() {
        for y in [t.left[x], inv.left[x]] {
            if members.insert(y) {
                frontier.push(y);
            }
        }
    }
    Ok(Window {
        stage: m,
        members: members.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_tower() -> Tower {
        build_tower(3, &[3, 3, 3]).unwrap()
    }

    #[test]
    fn stage_sizes_to_depth_three() {
        let t = small_tower();
        let dims: Vec<(usize, usize)> = t
            .stages()
            .iter()
            .map(|s| (s.graph.left_size(), s.graph.right_size()))
            .collect();
        assert_eq!(dims, vec![(2, 2), (4, 8), (4, 16)]);
        assert_eq!(t.stage(1).kind, StageKind::Initial);
        assert_eq!(t.stage(2).kind, StageKind::Magic);
        assert_eq!(t.stage(3).kind, StageKind::Doubled);
    }

    #[test]
    fn stage_two_labels() {
        let t = small_tower();
        let g = &t.stage(2).graph;
        assert_eq!(g.label(0), &vec![1, 1]);
        assert_eq!(g.label(1), &vec![2, 1]);
        assert_eq!(g.label(2), &vec![0, 1]);
        assert_eq!(g.label(7), &vec![0, 6]);
    }

    #[test]
    fn stage_three_doubles_labels_and_rows() {
        let t = small_tower();
        let g2 = &t.stage(2).graph;
        let g3 = &t.stage(3).graph;
        assert_eq!(g3.label(0), &vec![1, 1, 1]);
        assert_eq!(g3.label(8), &vec![1, 1, 2]);
        for j in 0..8 {
            assert_eq!(g3.row(j), g2.row(j));
            assert_eq!(g3.row(j + 8), g2.row(j));
        }
    }

    #[test]
    fn embedded_corners_are_preserved() {
        let t = small_tower();
        for n in 1..t.depth() {
            let a = &t.stage(n).graph;
            let b = &t.stage(n + 1).graph;
            for x in 0..a.left_size() {
                for u in 0..a.right_size() {
                    assert_eq!(a.edge(x, u), b.edge(x, u), "stage {n} corner");
                }
            }
        }
    }

    #[test]
    fn branches_canonicalize() {
        let t = small_tower();
        // Index 0 descends to the very first stage.
        assert_eq!(
            t.branch(3, 0).unwrap(),
            Branch { stem_stage: 1, stem_index: 0 }
        );
        // Index 5 was born at stage 2.
        assert_eq!(
            t.branch(3, 5).unwrap(),
            Branch { stem_stage: 2, stem_index: 5 }
        );
        // Index 9 is new at stage 3.
        assert_eq!(
            t.branch(3, 9).unwrap(),
            Branch { stem_stage: 3, stem_index: 9 }
        );
        assert!(t.branch(3, 16).is_err());
        // Distinct branches have distinct indices; one branch per index.
        let all = t.branches_at(3).unwrap();
        let set: std::collections::BTreeSet<Branch> = all.iter().copied().collect();
        assert_eq!(set.len(), 16);
        assert_eq!(t.new_branches_at(3).unwrap().len(), 8);
    }

    #[test]
    fn branch_labels_extend_by_ones() {
        let t = small_tower();
        let b = t.branch(1, 1).unwrap();
        assert_eq!(t.branch_label_at(&b, 1).unwrap(), vec![2]);
        assert_eq!(t.branch_label_at(&b, 2).unwrap(), vec![2, 1]);
        assert_eq!(t.branch_label_at(&b, 3).unwrap(), vec![2, 1, 1]);
        assert!(t.branch_label_at(&b, 4).is_err());
    }

    #[test]
    fn limit_edges_match_first_stage() {
        let t = small_tower();
        let b0 = t.branch(1, 0).unwrap();
        let b1 = t.branch(1, 1).unwrap();
        assert_eq!(t.limit_edge(0, &b0), Ok(true));
        assert_eq!(t.limit_edge(0, &b1), Ok(false));
        assert_eq!(t.limit_edge(1, &b1), Ok(true));
        assert!(t.limit_edge(99, &b0).is_err());
    }

    #[test]
    fn limit_edges_are_stable_everywhere() {
        let t = small_tower();
        for x in 0..t.stage(t.depth()).graph.left_size() {
            let first = t.first_left_stage(x).unwrap();
            for b in t.branches_at(t.depth()).unwrap() {
                let v = t.limit_edge(x, &b).unwrap();
                for n in first.max(b.stem_stage)..=t.depth() {
                    assert_eq!(t.stage(n).graph.edge(x, b.stem_index), v);
                }
            }
        }
    }

    #[test]
    fn manifest_shape() {
        let t = small_tower();
        let m = t.manifest();
        assert_eq!(m.depth, 3);
        assert_eq!(m.total_branches, 16);
        assert_eq!(m.stages[1].code_dim, Some(1));
        assert_eq!(m.stages[1].witness_k, Some(3));
        assert_eq!(m.stages[2].scheduled_k, None);
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"kind\":\"magic\""));
    }

    #[test]
    fn lift_of_empty_map_is_identity() {
        let t = small_tower();
        let lifted = t.lift(&LimitMap::default()).unwrap();
        assert_eq!(lifted.start_stage(), 1);
        assert!(lifted.verify(&t));
        for x in 0..4 {
            assert_eq!(lifted.left_apply(&t, x), Ok(x));
        }
        for b in t.branches_at(3).unwrap() {
            assert_eq!(lifted.branch_apply(&t, &b), Ok(b));
        }
    }

    #[test]
    fn lift_of_left_swap() {
        let t = small_tower();
        let input = LimitMap {
            left: vec![(0, 1)],
            branches: vec![],
        };
        let lifted = t.lift(&input).unwrap();
        assert!(lifted.verify(&t));
        assert_eq!(lifted.left_apply(&t, 0), Ok(1));
        // Branch images are free, but adjacency to the mapped left must be
        // preserved.
        for b in t.branches_at(1).unwrap() {
            let image = lifted.branch_apply(&t, &b).unwrap();
            assert_eq!(t.limit_edge(1, &image), t.limit_edge(0, &b));
        }
    }

    #[test]
    fn lift_of_pinned_full_swap() {
        let t = build_tower(3, &[4, 4, 4]).unwrap();
        let b0 = t.branch(1, 0).unwrap();
        let b1 = t.branch(1, 1).unwrap();
        let input = LimitMap {
            left: vec![(0, 1), (1, 0)],
            branches: vec![(b0, b1), (b1, b0)],
        };
        let lifted = t.lift(&input).unwrap();
        assert!(lifted.verify(&t));
        assert_eq!(lifted.branch_apply(&t, &b0), Ok(b1));
        assert_eq!(lifted.branch_apply(&t, &b1), Ok(b0));
        assert_eq!(lifted.left_apply(&t, 0), Ok(1));
    }

    #[test]
    fn lift_of_branch_swap() {
        let t = small_tower();
        let b0 = t.branch(1, 0).unwrap();
        let b1 = t.branch(1, 1).unwrap();
        let input = LimitMap {
            left: vec![],
            branches: vec![(b0, b1)],
        };
        let lifted = t.lift(&input).unwrap();
        assert!(lifted.verify(&t));
        assert_eq!(lifted.branch_apply(&t, &b0), Ok(b1));
        let inv = lifted.inverse();
        assert!(inv.verify(&t));
        assert_eq!(inv.branch_apply(&t, &b1), Ok(b0));
    }

    #[test]
    fn lift_rejects_non_automorphisms() {
        let t = small_tower();
        // Left 0 is matched to branch 0; sending 0 -> 1 while fixing the
        // branch breaks the edge.
        let b0 = t.branch(1, 0).unwrap();
        let input = LimitMap {
            left: vec![(0, 1)],
            branches: vec![(b0, b0)],
        };
        assert!(matches!(t.lift(&input), Err(TowerError::NotPartialIso)));
    }

    #[test]
    fn lift_respects_budget() {
        let t = build_tower(2, &[1, 1]).unwrap();
        let input = LimitMap {
            left: vec![(0, 0), (1, 1)],
            branches: vec![],
        };
        assert!(matches!(t.lift(&input), Err(TowerError::KBudgetExceeded)));
    }

    #[test]
    fn lift_from_later_stages() {
        let t = small_tower();
        // A left vertex born at stage 2 forces the start stage up to 3.
        let input = LimitMap {
            left: vec![(2, 2)],
            branches: vec![],
        };
        let lifted = t.lift(&input).unwrap();
        assert_eq!(lifted.start_stage(), 3);
        // Depth 3 has no closure above stage 3 yet.
        assert!(lifted.left_apply(&t, 2).is_err());
        let deeper = build_tower(4, &[3; 4]).unwrap();
        let lifted = deeper.lift(&input).unwrap();
        assert_eq!(lifted.start_stage(), 3);
        assert!(lifted.verify(&deeper));
        assert_eq!(lifted.left_apply(&deeper, 2), Ok(2));
    }

    #[test]
    fn window_is_invariant() {
        let t = small_tower();
        let input = LimitMap {
            left: vec![(0, 1)],
            branches: vec![],
        };
        let lifted = t.lift(&input).unwrap();
        let w = locally_finite_window(&t, &lifted, &[0]).unwrap();
        assert_eq!(w.stage, 2);
        assert!(w.members.contains(&0) && w.members.contains(&1));
        let Some(StageAut::Total(total)) = lifted.stage_map(w.stage) else {
            panic!("window stage must be total")
        };
        for &x in &w.members {
            assert!(w.members.contains(&total.left[x]));
        }
    }

    #[test]
    fn depth_four_closure_dimensions() {
        let t = build_tower(4, &[3; 4]).unwrap();
        let dims: Vec<(usize, usize)> = t
            .stages()
            .iter()
            .map(|s| (s.graph.left_size(), s.graph.right_size()))
            .collect();
        assert_eq!(dims, vec![(2, 2), (4, 8), (4, 16), (131072, 256)]);
        let c = t.stage(4).closure().unwrap();
        assert_eq!(c.code().dim(), 15);
        assert_eq!(c.witness_k(), 2);
        assert_eq!(c.scheduled_k(), 3);
    }

    #[test]
    fn projection_retracts_the_identity_embedding() {
        // Rights keep their index when a stage grows, so projecting an
        // embedded right must give it back at every built stage kind.
        let t = build_tower(4, &[3; 4]).unwrap();
        for n in 2..=4 {
            let prev = t.stage(n - 1).graph.right_size();
            for v in 0..prev {
                assert_eq!(t.project_right(n, v), Some(v), "stage {n} right {v}");
            }
            assert_eq!(t.project_right(n, prev + t.stage(n).graph.right_size()), None);
        }
    }

    /// Count right tuples (2 positive, 2 negative, drawn from the first six
    /// rights) with no left witness at all.
    fn window_saturation_failures(g: &Graph) -> usize {
        let w = 6.min(g.right_size());
        let mut failures = 0;
        for a in 0..w {
            for b in a + 1..w {
                let rest: Vec<usize> = (0..w).filter(|&v| v != a && v != b).collect();
                for (i, &c) in rest.iter().enumerate() {
                    for &d in &rest[i + 1..] {
                        let found = (0..g.left_size()).any(|x| {
                            g.edge(x, a) && g.edge(x, b) && !g.edge(x, c) && !g.edge(x, d)
                        });
                        if !found {
                            failures += 1;
                        }
                    }
                }
            }
        }
        failures
    }

    #[test]
    fn deeper_closure_stages_saturate_more() {
        // The randomness shadow: unrealized one-one types over a fixed
        // window must not grow with stage depth. Counts are pinned so any
        // construction drift shows up.
        let t = build_tower(4, &[3; 4]).unwrap();
        let shallow = window_saturation_failures(&t.stage(2).graph);
        let deep = window_saturation_failures(&t.stage(4).graph);
        assert!(deep <= shallow);
        assert_eq!((shallow, deep), (56, 0));
    }
}
