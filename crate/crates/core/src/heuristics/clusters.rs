use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::address::ChainAddress;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClusterSource {
    H3,
    H4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberRole {
    Stealth,
    /// A withdrawal recipient that anchors a collector cluster.
    Anchor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Merge {
    pub left: ChainAddress,
    pub right: ChainAddress,
    pub source: ClusterSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterMember {
    pub address: ChainAddress,
    pub role: MemberRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<ClusterMember>,
    pub sources: BTreeSet<ClusterSource>,
}

impl Cluster {
    pub fn stealth_addresses(&self) -> impl Iterator<Item = &ChainAddress> {
        self.members
            .iter()
            .filter(|m| m.role == MemberRole::Stealth)
            .map(|m| &m.address)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Partition of addresses into clusters, with the merge history that built it.
///
/// Members keep insertion order, which callers make the order of first
/// appearance in the ledger, so [`ClusterSet::clusters`] is deterministic.
#[derive(Debug, Clone, Default)]
pub struct ClusterSet {
    members: Vec<ChainAddress>,
    roles: Vec<MemberRole>,
    slot: HashMap<ChainAddress, usize>,
    parent: Vec<usize>,
    rank: Vec<u8>,
    merges: Vec<Merge>,
}

impl ClusterSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `address` as a singleton if unseen. A stealth role overrides an
    /// earlier anchor role for the same address.
    pub fn insert(&mut self, address: ChainAddress, role: MemberRole) -> usize {
        if let Some(&i) = self.slot.get(&address) {
            if role == MemberRole::Stealth {
                self.roles[i] = MemberRole::Stealth;
            }
            return i;
        }
        let i = self.members.len();
        self.members.push(address);
        self.roles.push(role);
        self.parent.push(i);
        self.rank.push(0);
        self.slot.insert(address, i);
        i
    }

    fn find(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    fn find_compress(&mut self, i: usize) -> usize {
        let root = self.find(i);
        let mut node = i;
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    /// Joins the clusters of two members, inserting either as needed.
    pub fn union(&mut self, left: ChainAddress, right: ChainAddress, source: ClusterSource) {
        let a = self.insert_default(left);
        let b = self.insert_default(right);
        self.merges.push(Merge {
            left,
            right,
            source,
        });
        let (ra, rb) = (self.find_compress(a), self.find_compress(b));
        if ra == rb {
            return;
        }
        let (hi, lo) = if self.rank[ra] >= self.rank[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[lo] = hi;
        if self.rank[hi] == self.rank[lo] {
            self.rank[hi] = self.rank[hi].saturating_add(1);
        }
    }

    fn insert_default(&mut self, address: ChainAddress) -> usize {
        match self.slot.get(&address) {
            Some(&i) => i,
            None => self.insert(address, MemberRole::Stealth),
        }
    }

    pub fn contains(&self, address: &ChainAddress) -> bool {
        self.slot.contains_key(address)
    }

    pub fn same_cluster(&self, a: &ChainAddress, b: &ChainAddress) -> bool {
        match (self.slot.get(a), self.slot.get(b)) {
            (Some(&i), Some(&j)) => self.find(i) == self.find(j),
            _ => false,
        }
    }

    /// Equal ids mean the same cluster. Ids are only stable until the next
    /// union.
    pub fn cluster_id(&self, address: &ChainAddress) -> Option<usize> {
        self.slot.get(address).map(|&i| self.find(i))
    }

    pub fn role(&self, address: &ChainAddress) -> Option<MemberRole> {
        self.slot.get(address).map(|&i| self.roles[i])
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Clusters ordered by their earliest member; members in insertion order.
    pub fn clusters(&self) -> Vec<Cluster> {
        let mut by_root: HashMap<usize, usize> = HashMap::new();
        let mut out: Vec<Cluster> = Vec::new();
        for (i, address) in self.members.iter().enumerate() {
            let root = self.find(i);
            let slot = *by_root.entry(root).or_insert_with(|| {
                out.push(Cluster {
                    members: Vec::new(),
                    sources: BTreeSet::new(),
                });
                out.len() - 1
            });
            out[slot].members.push(ClusterMember {
                address: *address,
                role: self.roles[i],
            });
        }
        for m in &self.merges {
            let root = self.find(self.slot[&m.left]);
            out[by_root[&root]].sources.insert(m.source);
        }
        out
    }

    /// Clusters with more than one member.
    pub fn nontrivial_clusters(&self) -> Vec<Cluster> {
        self.clusters()
            .into_iter()
            .filter(|c| c.len() > 1)
            .collect()
    }

    /// Order-free view of the partition, for comparisons.
    pub fn partition(&self) -> BTreeSet<BTreeSet<ChainAddress>> {
        self.clusters()
            .into_iter()
            .map(|c| c.members.into_iter().map(|m| m.address).collect())
            .collect()
    }

    /// Union of partitions: every member of every input, every merge replayed.
    pub fn merged<'a>(sets: impl IntoIterator<Item = &'a ClusterSet>) -> ClusterSet {
        let sets: Vec<&ClusterSet> = sets.into_iter().collect();
        let mut out = ClusterSet::new();
        for set in &sets {
            for (address, role) in set.members.iter().zip(&set.roles) {
                out.insert(*address, *role);
            }
        }
        for set in &sets {
            for m in &set.merges {
                out.union(m.left, m.right, m.source);
            }
        }
        out
    }
}

#[derive(Serialize)]
struct ClusterSetView {
    clusters: Vec<Cluster>,
    merges: Vec<Merge>,
}

impl Serialize for ClusterSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ClusterSetView {
            clusters: self.nontrivial_clusters(),
            merges: self.merges.clone(),
        }
        .serialize(serializer)
    }
}
