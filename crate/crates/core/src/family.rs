//! Relay families as a partition of relays.
//!
//! Two relays are linked when each names the other in its family
//! declaration. Families are the connected components of that graph, so
//! membership is transitive even where the declarations themselves are not.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::io::FamilyDeclarations;
use crate::model::{Consensus, Fingerprint};

/// Opaque family identifier. Only meaningful within one partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FamilyId(pub u32);

/// Disjoint groups of at least two relays each.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FamilyPartition {
    members: BTreeMap<FamilyId, Vec<Fingerprint>>,
    index: HashMap<Fingerprint, FamilyId>,
}

impl FamilyPartition {
    pub fn new() -> Self {
        FamilyPartition::default()
    }

    /// Builds a partition from explicit groups.
    ///
    /// Groups with fewer than two members are dropped. A fingerprint that
    /// shows up in more than one group is an error.
    pub fn from_groups<I>(groups: I) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<Fingerprint>>,
    {
        let mut partition = FamilyPartition::new();
        for group in groups {
            partition.insert_group(group)?;
        }
        Ok(partition)
    }

    /// Adds a new family; returns its id, or `None` if the group was too
    /// small to count as a family.
    pub fn insert_group(&mut self, mut group: Vec<Fingerprint>) -> Result<Option<FamilyId>> {
        group.sort();
        group.dedup();
        if group.len() < 2 {
            return Ok(None);
        }
        if let Some(fp) = group.iter().find(|fp| self.index.contains_key(fp)) {
            return Err(Error::Parameter(format!("{fp} is already in a family")));
        }
        let id = self.next_id();
        for fp in &group {
            self.index.insert(*fp, id);
        }
        self.members.insert(id, group);
        Ok(Some(id))
    }

    /// Adds `fingerprint` to an existing family.
    pub fn join(&mut self, id: FamilyId, fingerprint: Fingerprint) -> Result<()> {
        if self.index.contains_key(&fingerprint) {
            return Err(Error::Parameter(format!("{fingerprint} is already in a family")));
        }
        let group = self.members.get_mut(&id).ok_or_else(|| Error::Parameter(format!("no family with id {}", id.0)))?;
        let pos = group.binary_search(&fingerprint).unwrap_err();
        group.insert(pos, fingerprint);
        self.index.insert(fingerprint, id);
        Ok(())
    }

    pub fn next_id(&self) -> FamilyId {
        FamilyId(self.members.keys().next_back().map_or(0, |id| id.0 + 1))
    }

    pub fn family_of(&self, fingerprint: &Fingerprint) -> Option<FamilyId> {
        self.index.get(fingerprint).copied()
    }

    pub fn members(&self, id: FamilyId) -> &[Fingerprint] {
        self.members.get(&id).map_or(&[], Vec::as_slice)
    }

    /// Families in id order, members sorted by fingerprint.
    pub fn groups(&self) -> impl Iterator<Item = (FamilyId, &[Fingerprint])> {
        self.members.iter().map(|(id, m)| (*id, m.as_slice()))
    }

    pub fn family_count(&self) -> usize {
        self.members.len()
    }

    /// Number of relays that belong to some family.
    pub fn relay_count(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Checks that every member is in `consensus`.
    pub fn check_against(&self, consensus: &Consensus) -> Result<()> {
        let known = consensus.fingerprints();
        match self.index.keys().find(|fp| !known.contains(fp)) {
            Some(fp) => Err(Error::UnknownFingerprint(*fp)),
            None => Ok(()),
        }
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

/// Builds families from declarations: mutual declarations become edges and
/// connected components become families. One-sided declarations are ignored.
///
/// Every fingerprint in `declarations` must belong to `consensus`. Family ids
/// are assigned in order of each family's smallest fingerprint.
pub fn build_family_partition(declarations: &FamilyDeclarations, consensus: &Consensus) -> Result<FamilyPartition> {
    let position: HashMap<Fingerprint, usize> =
        consensus.relays.iter().enumerate().map(|(i, r)| (r.fingerprint, i)).collect();
    let lookup = |fp: &Fingerprint| position.get(fp).copied().ok_or(Error::UnknownFingerprint(*fp));

    let mut declared: HashSet<(usize, usize)> = HashSet::new();
    for decl in declarations.iter() {
        let from = lookup(&decl.declarer)?;
        for named in &decl.named {
            let to = lookup(named)?;
            if to != from {
                declared.insert((from, to));
            }
        }
    }

    let mut sets = DisjointSets::new(consensus.len());
    for &(a, b) in &declared {
        if a < b && declared.contains(&(b, a)) {
            sets.union(a, b);
        }
    }

    let mut components: HashMap<usize, Vec<Fingerprint>> = HashMap::new();
    for (i, relay) in consensus.relays.iter().enumerate() {
        let root = sets.find(i);
        components.entry(root).or_default().push(relay.fingerprint);
    }
    let mut groups: Vec<Vec<Fingerprint>> = components
        .into_values()
        .filter(|g| g.len() >= 2)
        .map(|mut g| {
            g.sort();
            g
        })
        .collect();
    groups.sort();
    FamilyPartition::from_groups(groups)
}
