use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::{PacketSize, Scenario, Source, SourceMode};
use crate::hierarchy::{Hierarchy, NodeSpec, Superadditivity};
use crate::sched::Nanos;

/// Seeded generator of random hierarchies and traffic mixes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioGen {
    /// Levels including the root.
    pub max_levels: u32,
    pub max_leaves: usize,
    pub max_weight: u64,
    pub capacity_bps: u64,
    pub duration: Nanos,
}

impl Default for ScenarioGen {
    fn default() -> Self {
        ScenarioGen {
            max_levels: 4,
            max_leaves: 12,
            max_weight: 100,
            capacity_bps: 100_000_000,
            duration: Nanos(40_000_000),
        }
    }
}

fn below(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    rng.next_u64() % n
}

fn between(rng: &mut ChaCha8Rng, lo: u64, hi: u64) -> u64 {
    lo + below(rng, hi - lo + 1)
}

impl ScenarioGen {
    /// A random tree with at least one leaf below the root. Weights are drawn
    /// independently, so parents need not cover their children.
    pub fn hierarchy(&self, rng: &mut ChaCha8Rng) -> Hierarchy {
        let max_depth = self.max_levels.max(2) - 1;
        let target = between(rng, 1, self.max_leaves.max(1) as u64) as usize;
        let mut parent: Vec<Option<u32>> = vec![None];
        let mut depth = vec![0u32];
        let mut is_leaf = vec![true];
        loop {
            let first = parent.len() == 1;
            // the bare root does not count as a leaf
            let leaves = if first {
                0
            } else {
                is_leaf.iter().filter(|&&b| b).count()
            };
            let open: Vec<usize> = (0..parent.len())
                .filter(|&k| is_leaf[k] && depth[k] < max_depth)
                .collect();
            if open.is_empty() || leaves >= target {
                break;
            }
            let k = open[below(rng, open.len() as u64) as usize];
            // splitting one leaf into `fanout` must not overshoot the target
            let room = (target - leaves + usize::from(!first)).clamp(1, 4) as u64;
            let fanout = between(rng, 1, room);
            is_leaf[k] = false;
            for _ in 0..fanout {
                parent.push(Some(k as u32));
                depth.push(depth[k] + 1);
                is_leaf.push(true);
            }
        }
        let specs: Vec<NodeSpec> = (0..parent.len())
            .map(|k| NodeSpec::new(k as u32, parent[k], between(rng, 1, self.max_weight.max(1))))
            .collect();
        Hierarchy::build_with(&specs, Superadditivity::Relaxed)
            .expect("generated tree is well formed")
    }

    /// A random scenario; the scheduler defaults to HLS.
    pub fn scenario(&self, seed: u64) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = self.hierarchy(&mut rng);
        let mut lmax = vec![0u32; h.len()];
        for &l in h.leaves() {
            lmax[l.index()] = between(&mut rng, 200, 1500) as u32;
        }
        let d = self.duration.0.max(1);
        let mut sources = Vec::new();
        for &l in h.leaves() {
            if below(&mut rng, 100) >= 85 {
                continue;
            }
            let cap = lmax[l.index()] as u64;
            let size = if below(&mut rng, 2) == 0 {
                PacketSize::Fixed(between(&mut rng, 64, cap) as u32)
            } else {
                PacketSize::Uniform {
                    min: 64,
                    max: cap as u32,
                }
            };
            let mode = match below(&mut rng, 10) {
                0..=3 => SourceMode::Saturated,
                4..=7 => {
                    let n = between(&mut rng, 1, 4) as usize;
                    let mut cuts: Vec<u64> = (0..2 * n).map(|_| below(&mut rng, d + 1)).collect();
                    cuts.sort_unstable();
                    cuts.dedup();
                    let iv: Vec<(Nanos, Nanos)> = cuts
                        .chunks_exact(2)
                        .filter(|c| c[0] < c[1])
                        .map(|c| (Nanos(c[0]), Nanos(c[1])))
                        .collect();
                    SourceMode::OnOff(iv)
                }
                _ => SourceMode::Rate(
                    between(&mut rng, self.capacity_bps / 50, self.capacity_bps / 2).max(1),
                ),
            };
            sources.push(Source {
                leaf: l,
                size,
                mode,
            });
        }
        let mut sc = Scenario::new(h, self.capacity_bps, self.duration);
        sc.lmax = lmax;
        sc.sources = sources;
        sc.seed = seed;
        sc
    }
}
