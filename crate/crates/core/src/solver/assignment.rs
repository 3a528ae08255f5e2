use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{CoverageMode, ScenarioSpec};
use crate::tree::{NodeId, Topology};

/// A tree state that carries a region decision: the state reached after local
/// step `step - 1` of `node`, i.e. global time `first_step + step`, with
/// `step` in `1..=N_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Slot {
    pub node: NodeId,
    pub step: usize,
}

/// Region decisions for tree states. Missing entries are uncommitted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct RegionAssignment {
    map: BTreeMap<Slot, usize>,
}

impl RegionAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, slot: Slot) -> Option<usize> {
        self.map.get(&slot).copied()
    }

    pub fn set(&mut self, slot: Slot, region: usize) {
        self.map.insert(slot, region);
    }

    pub fn with(&self, slot: Slot, region: usize) -> Self {
        let mut next = self.clone();
        next.set(slot, region);
        next
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Slot, usize)> + '_ {
        self.map.iter().map(|(s, r)| (*s, *r))
    }

    /// Region chosen for the state where `node`'s children are branched.
    pub fn measurement_region(&self, topology: &Topology, node: NodeId) -> Option<usize> {
        self.get(measurement_slot(topology, node))
    }

    /// True when every entry of `self` agrees with `other`.
    pub fn is_subset_of(&self, other: &RegionAssignment) -> bool {
        self.map.iter().all(|(s, r)| other.map.get(s) == Some(r))
    }

    pub fn check_regions(&self, num_regions: usize) -> Result<()> {
        for (slot, r) in self.iter() {
            if r >= num_regions {
                return Err(Error::index(format!(
                    "slot {slot:?} assigned region {r}, only {num_regions} regions"
                )));
            }
        }
        Ok(())
    }

    /// Every slot the scenario requires is assigned.
    pub fn is_complete(&self, spec: &ScenarioSpec, topology: &Topology) -> bool {
        decision_slots(spec, topology)
            .iter()
            .all(|s| self.map.contains_key(s))
    }
}

/// Branch-time state of an internal node.
pub fn measurement_slot(topology: &Topology, node: NodeId) -> Slot {
    Slot {
        node,
        step: topology.period(),
    }
}

/// One slot per internal node, breadth-first.
pub fn measurement_slots(topology: &Topology) -> Vec<Slot> {
    topology
        .internal_nodes()
        .map(|n| measurement_slot(topology, n.id))
        .collect()
}

/// Remaining tree states that must be placed in free space.
pub fn space_slots(spec: &ScenarioSpec, topology: &Topology) -> Vec<Slot> {
    if spec.partition.mode() != CoverageMode::FreeSpaceDisjunction {
        return Vec::new();
    }
    let period = topology.period();
    topology
        .nodes()
        .iter()
        .flat_map(|n| {
            let last = if n.is_leaf() { period } else { period - 1 };
            (1..=last).map(move |step| Slot { node: n.id, step })
        })
        .collect()
}

/// All slots that a complete assignment must cover: measurement slots
/// followed by space slots.
pub fn decision_slots(spec: &ScenarioSpec, topology: &Topology) -> Vec<Slot> {
    let mut slots = measurement_slots(topology);
    slots.extend(space_slots(spec, topology));
    slots
}
