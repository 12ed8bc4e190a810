//! Demand-instance model: `N` servers holding `K` replicated messages, a
//! demand size `D`, and a family of candidate demand index sets.
//!
//! Instances are normalized before any bound or scheme computation: indices
//! appearing in no candidate set are irrelevant and dropped; indices
//! appearing in every candidate set can be retrieved separately and are
//! dropped from both the sets and the index range. After normalization the
//! union of the family covers `[1:K]` and its intersection is empty.

use serde::{Deserialize, Serialize};

use crate::subset::{SubsetMask, MAX_MESSAGES};

/// A retrieval instance: `servers` replicas of `messages` messages, demands
/// of size `demand_size` drawn from `family`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct DemandInstance {
    pub servers: u32,
    pub messages: u32,
    pub demand_size: u32,
    pub family: Vec<SubsetMask>,
}

/// How a demand family is specified.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    /// Explicit list of 1-based index sets.
    Explicit(Vec<Vec<u32>>),
    /// All `binomial(K, D)` subsets of size `D`.
    Full,
    /// All `K - D + 1` contiguous length-`D` windows, no wrap-around.
    Contiguous,
    /// The `K / D` disjoint blocks; requires `D | K`.
    Partition,
}

/// Record of the index renumbering performed by [`normalize`], so results can
/// be reported in the original numbering.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRemap {
    /// `kept[new - 1] = old` for new indices `1..=K'`.
    pub kept: Vec<u32>,
    /// Original indices appearing in no candidate set.
    pub dropped_unused: Vec<u32>,
    /// Original indices appearing in every candidate set.
    pub dropped_universal: Vec<u32>,
}

impl IndexRemap {
    pub fn identity(k: u32) -> Self {
        IndexRemap {
            kept: (1..=k).collect(),
            dropped_unused: Vec::new(),
            dropped_universal: Vec::new(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.dropped_unused.is_empty() && self.dropped_universal.is_empty()
    }

    /// Map a normalized index back to the original numbering.
    pub fn to_original(&self, new_index: u32) -> u32 {
        self.kept[(new_index - 1) as usize]
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("need at least 2 servers, got {0}")]
    TooFewServers(u32),
    #[error("message count {0} exceeds the supported cap of {1} (subset state grows as 2^K)")]
    TooManyMessages(u32, u32),
    #[error("demand size must lie in [2:K-1]; got D={d} with K={k}")]
    BadDemandSize { d: u32, k: u32 },
    #[error("family must contain at least 2 candidate sets, got {0}")]
    FamilyTooSmall(usize),
    #[error("candidate set {0} has {1} elements, expected demand size {2}")]
    WrongCardinality(String, u32, u32),
    #[error("candidate set {0} uses indices outside [1:{1}]")]
    IndexOutOfRange(String, u32),
    #[error("candidate sets must be pairwise distinct; {0} repeats")]
    DuplicateMember(String),
    #[error(
        "degenerate instance: normalization leaves demand size {0} (< 2); \
         the remaining demand is trivially retrievable outside this model"
    )]
    DegenerateAfterNormalization(u32),
    #[error("partition family requires D | K; got K={k}, D={d}")]
    PartitionNotDivisible { k: u32, d: u32 },
    #[error("invalid parameters for family generator: {0}")]
    BadGeneratorParams(String),
}

impl DemandInstance {
    pub fn new(
        servers: u32,
        messages: u32,
        demand_size: u32,
        family: Vec<SubsetMask>,
    ) -> Result<Self, InstanceError> {
        let inst = DemandInstance {
            servers,
            messages,
            demand_size,
            family,
        };
        inst.check_shape()?;
        Ok(inst)
    }

    /// Basic shape checks: sizes, ranges, distinctness. Does not require the
    /// normalization invariants.
    pub fn check_shape(&self) -> Result<(), InstanceError> {
        if self.servers < 2 {
            return Err(InstanceError::TooFewServers(self.servers));
        }
        if self.messages > MAX_MESSAGES {
            return Err(InstanceError::TooManyMessages(self.messages, MAX_MESSAGES));
        }
        if self.demand_size < 2 || self.demand_size + 1 > self.messages {
            return Err(InstanceError::BadDemandSize {
                d: self.demand_size,
                k: self.messages,
            });
        }
        if self.family.len() < 2 {
            return Err(InstanceError::FamilyTooSmall(self.family.len()));
        }
        let range = SubsetMask::full(self.messages);
        let mut seen = std::collections::BTreeSet::new();
        for &w in &self.family {
            if !w.is_subset_of(range) {
                return Err(InstanceError::IndexOutOfRange(w.to_string(), self.messages));
            }
            if w.card() != self.demand_size {
                return Err(InstanceError::WrongCardinality(
                    w.to_string(),
                    w.card(),
                    self.demand_size,
                ));
            }
            if !seen.insert(w) {
                return Err(InstanceError::DuplicateMember(w.to_string()));
            }
        }
        Ok(())
    }

    pub fn num_candidates(&self) -> usize {
        self.family.len()
    }

    /// True when the family union covers `[1:K]` and its intersection is
    /// empty.
    pub fn is_normalized(&self) -> bool {
        let union = self
            .family
            .iter()
            .fold(SubsetMask::EMPTY, |a, &w| a.union(w));
        let inter = self
            .family
            .iter()
            .fold(SubsetMask::full(self.messages), |a, &w| a.intersect(w));
        union == SubsetMask::full(self.messages) && inter.is_empty()
    }

    /// All `V ⊆ W_j \ S` with `|V| = l`, ascending mask order.
    pub fn enum_v(&self, j: usize, s: SubsetMask, l: u32) -> Vec<SubsetMask> {
        debug_assert!((1..=self.demand_size).contains(&l));
        self.family[j].diff(s).submasks_of_size(l).collect()
    }

    /// All `U ⊆ [1:K] \ S` with `U ⊄ W_j` and `|U ∩ W_j| = l`, ascending
    /// mask order.
    pub fn enum_u(&self, j: usize, s: SubsetMask, l: u32) -> Vec<SubsetMask> {
        debug_assert!(l < self.demand_size);
        let w = self.family[j];
        SubsetMask::full(self.messages)
            .diff(s)
            .submasks()
            .filter(|&u| !u.is_subset_of(w) && u.intersect(w).card() == l)
            .collect()
    }

    /// All `U ⊆ [1:K] \ S` with `U ⊄ W_j`, over every demand-overlap size
    /// `l ∈ [0:D-1]`, ascending mask order.
    pub fn enum_u_all(&self, j: usize, s: SubsetMask) -> Vec<SubsetMask> {
        let w = self.family[j];
        SubsetMask::full(self.messages)
            .diff(s)
            .submasks()
            .filter(|&u| !u.is_subset_of(w))
            .collect()
    }
}

/// Normalize an instance: drop indices used by no candidate set, strip
/// indices common to all candidate sets, and renumber the remainder
/// `1..=K'`. Returns the normalized instance and the renumbering record.
pub fn normalize(raw: &DemandInstance) -> Result<(DemandInstance, IndexRemap), InstanceError> {
    raw.check_shape()?;

    let union = raw
        .family
        .iter()
        .fold(SubsetMask::EMPTY, |a, &w| a.union(w));
    let inter = raw
        .family
        .iter()
        .fold(SubsetMask::full(raw.messages), |a, &w| a.intersect(w));

    let dropped_unused: Vec<u32> = (1..=raw.messages).filter(|&i| !union.contains(i)).collect();
    let dropped_universal: Vec<u32> = inter.indices();

    let kept: Vec<u32> = (1..=raw.messages)
        .filter(|&i| union.contains(i) && !inter.contains(i))
        .collect();
    let new_d = raw.demand_size - inter.card();
    if new_d < 2 {
        return Err(InstanceError::DegenerateAfterNormalization(new_d));
    }

    let mut old_to_new = vec![0u32; raw.messages as usize + 1];
    for (pos, &old) in kept.iter().enumerate() {
        old_to_new[old as usize] = pos as u32 + 1;
    }

    let family: Vec<SubsetMask> = raw
        .family
        .iter()
        .map(|w| {
            SubsetMask::from_indices(
                &w.diff(inter)
                    .iter()
                    .map(|i| old_to_new[i as usize])
                    .collect::<Vec<_>>(),
            )
        })
        .collect();

    let normalized = DemandInstance::new(raw.servers, kept.len() as u32, new_d, family)?;
    debug_assert!(normalized.is_normalized());
    Ok((
        normalized,
        IndexRemap {
            kept,
            dropped_unused,
            dropped_universal,
        },
    ))
}

/// Generate a demand family of the given kind. The output is deterministic,
/// with candidate sets in ascending mask order.
pub fn generate_family(
    kind: &FamilyKind,
    servers: u32,
    messages: u32,
    demand_size: u32,
) -> Result<DemandInstance, InstanceError> {
    let (k, d) = (messages, demand_size);
    if k > MAX_MESSAGES {
        return Err(InstanceError::TooManyMessages(k, MAX_MESSAGES));
    }
    if d < 2 || d + 1 > k {
        return Err(InstanceError::BadDemandSize { d, k });
    }
    let family = match kind {
        FamilyKind::Explicit(sets) => sets.iter().map(|s| SubsetMask::from_indices(s)).collect(),
        FamilyKind::Full => {
            let mut f: Vec<SubsetMask> = SubsetMask::full(k).submasks_of_size(d).collect();
            f.sort();
            f
        }
        FamilyKind::Contiguous => (1..=k - d + 1)
            .map(|start| SubsetMask::from_indices(&(start..start + d).collect::<Vec<_>>()))
            .collect(),
        FamilyKind::Partition => {
            if k % d != 0 {
                return Err(InstanceError::PartitionNotDivisible { k, d });
            }
            (0..k / d)
                .map(|b| {
                    SubsetMask::from_indices(&(b * d + 1..=(b + 1) * d).collect::<Vec<_>>())
                })
                .collect()
        }
    };
    DemandInstance::new(servers, k, d, family)
}
