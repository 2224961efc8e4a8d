mod common;

use linkshare::hierarchy::{
    guarantees_to_weights, weights_to_guarantees, NodeSpec, Superadditivity,
};
use linkshare::rational::int;
use linkshare::sim::ScenarioGen;
use linkshare::{ClassId, Hierarchy, HierarchyError, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tree(seed: u64) -> Hierarchy {
    let g = ScenarioGen {
        max_levels: 5,
        max_leaves: 20,
        ..ScenarioGen::default()
    };
    g.hierarchy(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Same shape, with every parent's weight split exactly among its children.
fn tight(h: &Hierarchy, rng: &mut ChaCha8Rng) -> Hierarchy {
    let mut w = vec![0u64; h.len()];
    w[0] = 1000 * h.leaves().len() as u64;
    for &c in h.preorder() {
        let kids = h.children_of(c);
        if kids.is_empty() {
            continue;
        }
        // every leaf below needs at least one unit
        let floor = |k: ClassId| h.leaf_descendants(k).unwrap().len() as u64;
        let mut spare = w[c.index()] - kids.iter().map(|k| floor(*k)).sum::<u64>();
        for (k, &kid) in kids.iter().enumerate() {
            let extra = if k + 1 == kids.len() {
                spare
            } else {
                rng.random_range(0..=spare)
            };
            w[kid.index()] = floor(kid) + extra;
            spare -= extra;
        }
    }
    h.with_weights(&w, Superadditivity::Enforce).unwrap()
}

#[test]
fn guarantees_round_trip_on_exactly_split_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..100 {
        let h = tight(&random_tree(seed), &mut rng);
        let g = weights_to_guarantees(&h, &int(h.weight(ClassId::ROOT)));
        let back = guarantees_to_weights(&h, &g).unwrap();
        assert_eq!(back.weights(), h.weights(), "seed {seed}");
    }
}

#[test]
fn guarantees_are_superadditive_and_rooted_at_capacity() {
    for seed in 0..100 {
        let h = random_tree(seed);
        let cap = int(1_000_000_000u64);
        let g = weights_to_guarantees(&h, &cap);
        assert_eq!(g.get(ClassId::ROOT), &cap);
        for id in h.ids() {
            let kids = h.children_of(id);
            if !kids.is_empty() {
                let sum: Rational = kids.iter().map(|k| g.get(*k).clone()).sum();
                assert!(&sum <= g.get(id));
            }
        }
    }
}

#[test]
fn navigation_is_consistent() {
    for seed in 0..100 {
        let h = random_tree(seed);
        for id in h.ids() {
            let mut expect = Vec::new();
            for &c in h.children_of(id) {
                expect.push(c);
                expect.extend(h.descendants(c).unwrap());
            }
            let mut got = h.descendants(id).unwrap();
            expect.sort();
            got.sort();
            assert_eq!(got, expect);

            if let Some(p) = h.parent_of(id) {
                assert_eq!(h.siblings(id).unwrap(), h.children_of(p));
                let anc = h.ancestors(id).unwrap();
                assert_eq!(anc[0], p);
                assert_eq!(*anc.last().unwrap(), ClassId::ROOT);
                assert!(!anc.contains(&id));
            }

            let leaves = h.leaf_descendants(id).unwrap();
            if h.is_leaf(id) {
                assert_eq!(leaves, vec![id]);
            } else {
                assert!(leaves
                    .iter()
                    .all(|l| h.is_leaf(*l) && h.is_ancestor(id, *l)));
            }
        }
    }
}

#[test]
fn fig1_navigation_and_guarantees() {
    let h = common::fig1();
    let a1 = common::id(&h, "A1");
    assert_eq!(
        h.ancestors(a1).unwrap(),
        vec![common::id(&h, "A"), ClassId::ROOT]
    );
    let g = weights_to_guarantees(&h, &int(1000));
    assert_eq!(g.get(a1), &int(100));
    assert_eq!(g.get(common::id(&h, "C")), &int(400));
}

#[test]
fn build_rejects_bad_trees() {
    let over = [
        NodeSpec::new(0, None, 10),
        NodeSpec::new(1, Some(0), 6),
        NodeSpec::new(2, Some(0), 7),
    ];
    assert!(matches!(
        Hierarchy::build(&over),
        Err(HierarchyError::SuperadditivityViolated { .. })
    ));
    let zero = [NodeSpec::new(0, None, 10), NodeSpec::new(1, Some(0), 0)];
    assert!(Hierarchy::build(&zero).is_err());
    let two_roots = [NodeSpec::new(0, None, 10), NodeSpec::new(1, None, 5)];
    assert!(Hierarchy::build(&two_roots).is_err());
    let cycle = [
        NodeSpec::new(0, None, 10),
        NodeSpec::new(1, Some(2), 1),
        NodeSpec::new(2, Some(1), 1),
    ];
    assert!(Hierarchy::build(&cycle).is_err());
}
