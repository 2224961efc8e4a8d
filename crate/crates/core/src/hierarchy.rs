//! Class hierarchy: a rooted tree of traffic classes with integer weights.
//!
//! Ids are dense: the root is `ClassId(0)` and every other class has an id in
//! `1..len`. Weights are positive integers and, unless explicitly relaxed,
//! must be superadditive (a parent weighs at least the sum of its children).

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Zero;

use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub u32);

impl ClassId {
    pub const ROOT: ClassId = ClassId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassKind {
    Root,
    Internal,
    Leaf,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HierarchyError {
    #[error("class list is empty")]
    Empty,
    #[error("duplicate class id {0}")]
    DuplicateId(ClassId),
    #[error("class ids must be dense in 0..{len}, found {id}")]
    SparseId { id: ClassId, len: usize },
    #[error("no root class (a class without parent)")]
    MissingRoot,
    #[error("more than one root class: {0} and {1}")]
    MultipleRoots(ClassId, ClassId),
    #[error("the root class must have id 0, found {0}")]
    RootNotZero(ClassId),
    #[error("class {child} names unknown parent {parent}")]
    UnknownParent { child: ClassId, parent: ClassId },
    #[error("cycle detected through class {0}")]
    CycleDetected(ClassId),
    #[error("class {0} has non-positive weight")]
    NonPositiveWeight(ClassId),
    #[error("class {class} ({name}) violates superadditivity: weight {weight} < children sum {children_sum}")]
    SuperadditivityViolated {
        class: ClassId,
        name: String,
        weight: u64,
        children_sum: u64,
    },
    #[error("guarantee of class {0} is not an integer")]
    NonIntegerGuarantee(ClassId),
    #[error("unknown class {0}")]
    UnknownClass(ClassId),
}

/// One entry of the input class list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSpec {
    pub id: ClassId,
    pub parent: Option<ClassId>,
    pub weight: u64,
    pub name: Option<String>,
}

impl NodeSpec {
    pub fn new(id: u32, parent: Option<u32>, weight: u64) -> Self {
        NodeSpec {
            id: ClassId(id),
            parent: parent.map(ClassId),
            weight,
            name: None,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Superadditivity {
    Enforce,
    /// Weights are local ratios only. Bound calculators accept such trees; the
    /// weight/guarantee equivalence does not hold for them.
    Relaxed,
}

/// Immutable, validated class tree with precomputed navigation indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hierarchy {
    names: Vec<String>,
    weights: Vec<u64>,
    parents: Vec<Option<ClassId>>,
    children: Vec<Vec<ClassId>>,
    depth: Vec<u32>,
    leaves: Vec<ClassId>,
    /// Pre-order traversal starting at the root.
    preorder: Vec<ClassId>,
    superadditive: bool,
}

impl Hierarchy {
    pub fn build(nodes: &[NodeSpec]) -> Result<Self, HierarchyError> {
        Self::build_with(nodes, Superadditivity::Enforce)
    }

    pub fn build_with(nodes: &[NodeSpec], check: Superadditivity) -> Result<Self, HierarchyError> {
        if nodes.is_empty() {
            return Err(HierarchyError::Empty);
        }
        let len = nodes.len();
        let mut slots: Vec<Option<&NodeSpec>> = vec![None; len];
        for node in nodes {
            let idx = node.id.index();
            if idx >= len {
                return Err(HierarchyError::SparseId { id: node.id, len });
            }
            if slots[idx].is_some() {
                return Err(HierarchyError::DuplicateId(node.id));
            }
            slots[idx] = Some(node);
        }
        // every slot is filled: ids are unique and < len
        let specs: Vec<&NodeSpec> = slots.into_iter().map(|s| s.unwrap()).collect();

        let mut root = None;
        for spec in &specs {
            if spec.parent.is_none() {
                if let Some(first) = root {
                    return Err(HierarchyError::MultipleRoots(first, spec.id));
                }
                root = Some(spec.id);
            }
        }
        match root {
            None => return Err(HierarchyError::MissingRoot),
            Some(r) if r != ClassId::ROOT => return Err(HierarchyError::RootNotZero(r)),
            Some(_) => {}
        }

        for spec in &specs {
            if spec.weight == 0 {
                return Err(HierarchyError::NonPositiveWeight(spec.id));
            }
            if let Some(p) = spec.parent {
                if p.index() >= len {
                    return Err(HierarchyError::UnknownParent {
                        child: spec.id,
                        parent: p,
                    });
                }
                if p == spec.id {
                    return Err(HierarchyError::CycleDetected(spec.id));
                }
            }
        }

        let parents: Vec<Option<ClassId>> = specs.iter().map(|s| s.parent).collect();
        let mut children: Vec<Vec<ClassId>> = vec![Vec::new(); len];
        for spec in &specs {
            if let Some(p) = spec.parent {
                children[p.index()].push(spec.id);
            }
        }

        // reachability from the root; anything unreachable sits on a cycle
        let mut depth = vec![u32::MAX; len];
        let mut preorder = Vec::with_capacity(len);
        let mut stack = vec![ClassId::ROOT];
        depth[0] = 0;
        while let Some(c) = stack.pop() {
            preorder.push(c);
            for &k in children[c.index()].iter().rev() {
                depth[k.index()] = depth[c.index()] + 1;
                stack.push(k);
            }
        }
        if preorder.len() != len {
            let stray = (0..len).find(|&i| depth[i] == u32::MAX).unwrap();
            return Err(HierarchyError::CycleDetected(ClassId(stray as u32)));
        }

        let weights: Vec<u64> = specs.iter().map(|s| s.weight).collect();
        let names: Vec<String> = specs
            .iter()
            .map(|s| match &s.name {
                Some(n) => n.clone(),
                None if s.id == ClassId::ROOT => "root".to_string(),
                None => alloc::format!("c{}", s.id.0),
            })
            .collect();

        let mut superadditive = true;
        for i in 0..len {
            if children[i].is_empty() {
                continue;
            }
            let sum: u64 = children[i].iter().map(|c| weights[c.index()]).sum();
            if weights[i] < sum {
                superadditive = false;
                if check == Superadditivity::Enforce {
                    return Err(HierarchyError::SuperadditivityViolated {
                        class: ClassId(i as u32),
                        name: names[i].clone(),
                        weight: weights[i],
                        children_sum: sum,
                    });
                }
            }
        }

        let leaves = (1..len)
            .filter(|&i| children[i].is_empty())
            .map(|i| ClassId(i as u32))
            .collect();

        Ok(Hierarchy {
            names,
            weights,
            parents,
            children,
            depth,
            leaves,
            preorder,
            superadditive,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn contains(&self, id: ClassId) -> bool {
        id.index() < self.len()
    }

    fn check(&self, id: ClassId) -> Result<(), HierarchyError> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(HierarchyError::UnknownClass(id))
        }
    }

    pub fn is_superadditive(&self) -> bool {
        self.superadditive
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.len() as u32).map(ClassId)
    }

    /// All classes, parents before children.
    pub fn preorder(&self) -> &[ClassId] {
        &self.preorder
    }

    /// Leaf classes in ascending id order. The root is never a leaf, even
    /// when it has no children.
    pub fn leaves(&self) -> &[ClassId] {
        &self.leaves
    }

    pub fn kind(&self, id: ClassId) -> ClassKind {
        if id == ClassId::ROOT {
            ClassKind::Root
        } else if self.children[id.index()].is_empty() {
            ClassKind::Leaf
        } else {
            ClassKind::Internal
        }
    }

    pub fn is_leaf(&self, id: ClassId) -> bool {
        self.kind(id) == ClassKind::Leaf
    }

    pub fn weight(&self, id: ClassId) -> u64 {
        self.weights[id.index()]
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn name(&self, id: ClassId) -> &str {
        &self.names[id.index()]
    }

    pub fn find(&self, name: &str) -> Option<ClassId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| ClassId(i as u32))
    }

    pub fn depth(&self, id: ClassId) -> u32 {
        self.depth[id.index()]
    }

    pub fn parent_of(&self, id: ClassId) -> Option<ClassId> {
        self.parents[id.index()]
    }

    pub fn children_of(&self, id: ClassId) -> &[ClassId] {
        &self.children[id.index()]
    }

    pub fn parent(&self, id: ClassId) -> Result<Option<ClassId>, HierarchyError> {
        self.check(id)?;
        Ok(self.parent_of(id))
    }

    pub fn children(&self, id: ClassId) -> Result<&[ClassId], HierarchyError> {
        self.check(id)?;
        Ok(self.children_of(id))
    }

    /// Path from the parent of `id` up to and including the root.
    pub fn ancestors(&self, id: ClassId) -> Result<Vec<ClassId>, HierarchyError> {
        self.check(id)?;
        Ok(self.ancestors_of(id).collect())
    }

    pub(crate) fn ancestors_of(&self, id: ClassId) -> impl Iterator<Item = ClassId> + '_ {
        let mut cur = self.parent_of(id);
        core::iter::from_fn(move || {
            let c = cur?;
            cur = self.parent_of(c);
            Some(c)
        })
    }

    /// Children of the parent of `id`, including `id` itself. The root is its
    /// own only sibling.
    pub fn siblings(&self, id: ClassId) -> Result<&[ClassId], HierarchyError> {
        self.check(id)?;
        Ok(self.siblings_of(id))
    }

    pub(crate) fn siblings_of(&self, id: ClassId) -> &[ClassId] {
        match self.parent_of(id) {
            Some(p) => &self.children[p.index()],
            None => core::slice::from_ref(&self.preorder[0]),
        }
    }

    /// Every class below `id`, in pre-order, excluding `id`.
    pub fn descendants(&self, id: ClassId) -> Result<Vec<ClassId>, HierarchyError> {
        self.check(id)?;
        let mut out = Vec::new();
        let mut stack: Vec<ClassId> = self.children_of(id).iter().rev().copied().collect();
        while let Some(c) = stack.pop() {
            out.push(c);
            stack.extend(self.children_of(c).iter().rev().copied());
        }
        Ok(out)
    }

    /// Leaves at or below `id`; a leaf maps to itself.
    pub fn leaf_descendants(&self, id: ClassId) -> Result<Vec<ClassId>, HierarchyError> {
        self.check(id)?;
        if id != ClassId::ROOT && self.is_leaf(id) {
            return Ok(vec![id]);
        }
        let mut out: Vec<ClassId> = self
            .descendants(id)?
            .into_iter()
            .filter(|&c| self.is_leaf(c))
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// True if `anc` is a proper ancestor of `id`.
    pub fn is_ancestor(&self, anc: ClassId, id: ClassId) -> bool {
        self.ancestors_of(id).any(|a| a == anc)
    }

    /// Height above the leaves: 0 for leaves, `1 + max(child level)` otherwise.
    pub fn level(&self, id: ClassId) -> u32 {
        let mut levels = vec![0u32; self.len()];
        for &c in self.preorder.iter().rev() {
            let l = self
                .children_of(c)
                .iter()
                .map(|k| levels[k.index()] + 1)
                .max()
                .unwrap_or(0);
            levels[c.index()] = l;
        }
        levels[id.index()]
    }

    /// Sum of the weights of the children of `id`.
    pub fn child_weight_sum(&self, id: ClassId) -> u64 {
        self.children_of(id).iter().map(|c| self.weight(*c)).sum()
    }

    /// Copy of this tree with new weights (same structure and names).
    pub fn with_weights(
        &self,
        weights: &[u64],
        check: Superadditivity,
    ) -> Result<Self, HierarchyError> {
        let nodes: Vec<NodeSpec> = self
            .ids()
            .map(|id| NodeSpec {
                id,
                parent: self.parent_of(id),
                weight: weights.get(id.index()).copied().unwrap_or(0),
                name: Some(self.name(id).to_string()),
            })
            .collect();
        Hierarchy::build_with(&nodes, check)
    }

    pub fn to_specs(&self) -> Vec<NodeSpec> {
        self.ids()
            .map(|id| NodeSpec {
                id,
                parent: self.parent_of(id),
                weight: self.weight(id),
                name: Some(self.name(id).to_string()),
            })
            .collect()
    }
}

/// Incremental construction by name, mostly for presets and tests.
#[derive(Debug, Clone)]
pub struct HierarchyBuilder {
    nodes: Vec<NodeSpec>,
}

impl HierarchyBuilder {
    pub fn new(root_weight: u64) -> Self {
        HierarchyBuilder {
            nodes: vec![NodeSpec::new(0, None, root_weight).named("root")],
        }
    }

    pub fn add(&mut self, parent: ClassId, name: &str, weight: u64) -> ClassId {
        let id = ClassId(self.nodes.len() as u32);
        self.nodes.push(NodeSpec {
            id,
            parent: Some(parent),
            weight,
            name: Some(name.to_string()),
        });
        id
    }

    pub fn build(&self) -> Result<Hierarchy, HierarchyError> {
        Hierarchy::build(&self.nodes)
    }

    pub fn build_with(&self, check: Superadditivity) -> Result<Hierarchy, HierarchyError> {
        Hierarchy::build_with(&self.nodes, check)
    }
}

/// Absolute rate guarantees per class, in the same unit as the capacity.
#[derive(Clone, Debug, PartialEq)]
pub struct GuaranteeMap {
    pub capacity: Rational,
    pub guarantees: Vec<Rational>,
}

impl GuaranteeMap {
    pub fn get(&self, id: ClassId) -> &Rational {
        &self.guarantees[id.index()]
    }
}

/// Converts weights into absolute guarantees: each class receives the product
/// of its weight share within every sibling group on its path to the root.
pub fn weights_to_guarantees(h: &Hierarchy, capacity: &Rational) -> GuaranteeMap {
    let mut g = vec![Rational::zero(); h.len()];
    g[0] = capacity.clone();
    for &c in h.preorder() {
        let kids = h.children_of(c);
        if kids.is_empty() {
            continue;
        }
        let sum = h.child_weight_sum(c);
        for &k in kids {
            g[k.index()] = &g[c.index()] * rational::ratio(h.weight(k), sum);
        }
    }
    GuaranteeMap {
        capacity: capacity.clone(),
        guarantees: g,
    }
}

/// Reads superadditive integer guarantees back as weights.
pub fn guarantees_to_weights(h: &Hierarchy, g: &GuaranteeMap) -> Result<Hierarchy, HierarchyError> {
    let mut weights = Vec::with_capacity(h.len());
    for id in h.ids() {
        let v = g.get(id);
        let w = rational::as_integer(v)
            .filter(|w| *w >= 0)
            .ok_or(HierarchyError::NonIntegerGuarantee(id))?;
        weights.push(u64::try_from(w).map_err(|_| HierarchyError::NonIntegerGuarantee(id))?);
    }
    h.with_weights(&weights, Superadditivity::Enforce)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fig1() -> Hierarchy {
        let mut b = HierarchyBuilder::new(1000);
        let a = b.add(ClassId::ROOT, "A", 300);
        let bb = b.add(ClassId::ROOT, "B", 300);
        b.add(ClassId::ROOT, "C", 400);
        b.add(a, "A1", 100);
        b.add(a, "A2", 200);
        b.add(bb, "B1", 100);
        b.add(bb, "B2", 200);
        b.build().unwrap()
    }

    fn id(h: &Hierarchy, n: &str) -> ClassId {
        h.find(n).unwrap()
    }

    #[test]
    fn fig1_builds() {
        let h = fig1();
        assert_eq!(h.len(), 8);
        assert_eq!(h.leaves().len(), 5);
        assert_eq!(h.kind(ClassId::ROOT), ClassKind::Root);
        assert_eq!(h.kind(id(&h, "A")), ClassKind::Internal);
        assert_eq!(h.kind(id(&h, "C")), ClassKind::Leaf);
    }

    #[test]
    fn lone_root_has_no_leaves() {
        let h = Hierarchy::build(&[NodeSpec::new(0, None, 10)]).unwrap();
        assert_eq!(h.len(), 1);
        assert!(h.leaves().is_empty());
    }

    #[test]
    fn superadditivity_is_enforced() {
        let err = Hierarchy::build(&[
            NodeSpec::new(0, None, 10),
            NodeSpec::new(1, Some(0), 6),
            NodeSpec::new(2, Some(0), 7),
        ])
        .unwrap_err();
        assert!(matches!(
            err,
            HierarchyError::SuperadditivityViolated {
                class: ClassId::ROOT,
                weight: 10,
                children_sum: 13,
                ..
            }
        ));
        let relaxed = Hierarchy::build_with(
            &[
                NodeSpec::new(0, None, 10),
                NodeSpec::new(1, Some(0), 6),
                NodeSpec::new(2, Some(0), 7),
            ],
            Superadditivity::Relaxed,
        )
        .unwrap();
        assert!(!relaxed.is_superadditive());
    }

    #[test]
    fn structural_errors() {
        assert_eq!(Hierarchy::build(&[]), Err(HierarchyError::Empty));
        assert_eq!(
            Hierarchy::build(&[NodeSpec::new(0, None, 1), NodeSpec::new(1, None, 1)]),
            Err(HierarchyError::MultipleRoots(ClassId(0), ClassId(1)))
        );
        assert_eq!(
            Hierarchy::build(&[NodeSpec::new(0, None, 0)]),
            Err(HierarchyError::NonPositiveWeight(ClassId(0)))
        );
        assert_eq!(
            Hierarchy::build(&[
                NodeSpec::new(0, None, 5),
                NodeSpec::new(1, Some(2), 1),
                NodeSpec::new(2, Some(1), 1),
            ]),
            Err(HierarchyError::CycleDetected(ClassId(1)))
        );
        assert_eq!(
            Hierarchy::build(&[NodeSpec::new(0, None, 5), NodeSpec::new(0, Some(0), 1)]),
            Err(HierarchyError::DuplicateId(ClassId(0)))
        );
        assert_eq!(
            Hierarchy::build(&[NodeSpec::new(0, Some(1), 5), NodeSpec::new(1, None, 1)]),
            Err(HierarchyError::RootNotZero(ClassId(1)))
        );
    }

    #[test]
    fn navigation_matches_fig1() {
        let h = fig1();
        let (a, a1, b, b1, b2, c) = (
            id(&h, "A"),
            id(&h, "A1"),
            id(&h, "B"),
            id(&h, "B1"),
            id(&h, "B2"),
            id(&h, "C"),
        );
        assert_eq!(h.ancestors(a1).unwrap(), vec![a, ClassId::ROOT]);
        assert_eq!(h.leaf_descendants(b).unwrap(), vec![b1, b2]);
        assert_eq!(h.leaf_descendants(c).unwrap(), vec![c]);
        assert!(h.siblings(a1).unwrap().contains(&a1));
        assert_eq!(h.siblings(c).unwrap(), &[a, b, c]);
        assert_eq!(h.descendants(ClassId::ROOT).unwrap().len(), 7);
        assert!(!h.descendants(a).unwrap().contains(&a));
        assert_eq!(h.parent(ClassId::ROOT).unwrap(), None);
        assert_eq!(
            h.ancestors(ClassId(99)),
            Err(HierarchyError::UnknownClass(ClassId(99)))
        );
        assert_eq!(h.level(a1), 0);
        assert_eq!(h.level(a), 1);
        assert_eq!(h.level(ClassId::ROOT), 2);
    }

    #[test]
    fn fig1_guarantees() {
        let h = fig1();
        let g = weights_to_guarantees(&h, &rational::int(1000));
        assert_eq!(g.get(id(&h, "A1")), &rational::int(100));
        assert_eq!(g.get(id(&h, "C")), &rational::int(400));
        assert_eq!(g.get(ClassId::ROOT), &rational::int(1000));
        let back = guarantees_to_weights(&h, &g).unwrap();
        assert_eq!(back.weights(), h.weights());
    }

    #[test]
    fn equal_weights_split_evenly() {
        let mut b = HierarchyBuilder::new(3);
        for n in ["x", "y", "z"] {
            b.add(ClassId::ROOT, n, 1);
        }
        let h = b.build().unwrap();
        let g = weights_to_guarantees(&h, &rational::int(900));
        for &l in h.leaves() {
            assert_eq!(g.get(l), &rational::int(300));
        }
    }

    #[test]
    fn root_only_guarantee_roundtrip() {
        let h = Hierarchy::build(&[NodeSpec::new(0, None, 7)]).unwrap();
        let g = GuaranteeMap {
            capacity: rational::int(1000),
            guarantees: vec![rational::int(1000)],
        };
        assert_eq!(guarantees_to_weights(&h, &g).unwrap().weights(), &[1000]);
    }

    #[test]
    fn fractional_guarantee_is_rejected() {
        let h = fig1();
        let mut g = weights_to_guarantees(&h, &rational::int(1000));
        g.guarantees[3] = rational::ratio(201, 2);
        assert_eq!(
            guarantees_to_weights(&h, &g),
            Err(HierarchyError::NonIntegerGuarantee(ClassId(3)))
        );
    }
}
