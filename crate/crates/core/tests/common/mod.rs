#![allow(dead_code)]

pub mod oracle;

use linkshare::hierarchy::{HierarchyBuilder, Superadditivity};
use linkshare::{ClassId, Hierarchy};

pub fn fig1() -> Hierarchy {
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

pub fn exp1() -> Hierarchy {
    let mut b = HierarchyBuilder::new(1000);
    let a = b.add(ClassId::ROOT, "A", 700);
    let bb = b.add(ClassId::ROOT, "B", 300);
    b.add(a, "A1", 300);
    b.add(a, "A2", 400);
    b.add(bb, "B1", 100);
    b.add(bb, "B2", 200);
    b.build().unwrap()
}

pub fn exp3() -> Hierarchy {
    let mut b = HierarchyBuilder::new(1000);
    b.add(ClassId::ROOT, "A", 200);
    let bb = b.add(ClassId::ROOT, "B", 250);
    let c = b.add(ClassId::ROOT, "C", 250);
    b.add(ClassId::ROOT, "D", 300);
    b.add(bb, "B1", 240);
    b.add(bb, "B2", 10);
    b.add(c, "C1", 50);
    b.add(c, "C2", 200);
    b.build().unwrap()
}

/// Root with one leaf per weight.
pub fn flat(weights: &[u64]) -> Hierarchy {
    let mut b = HierarchyBuilder::new(weights.iter().sum::<u64>().max(1));
    for (k, &w) in weights.iter().enumerate() {
        b.add(ClassId::ROOT, &format!("f{k}"), w);
    }
    b.build_with(Superadditivity::Relaxed).unwrap()
}

pub fn id(h: &Hierarchy, name: &str) -> ClassId {
    h.find(name).unwrap_or_else(|| panic!("no class {name}"))
}
