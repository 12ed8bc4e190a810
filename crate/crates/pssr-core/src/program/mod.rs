//! Constraint systems for balanced {0,1}-linear retrieval schemes and the
//! two-stage optimization: maximize the retrieval rate, then minimize the
//! subpacketization level at that rate.
//!
//! The per-server symbol counts are parameterized by `T_U` (symbols with
//! support `U`), `I^{(j)}_{U,V}` (side--target pairings with side support
//! `U` producing demand-only support `V`), and `J^{(j)}_{V,i}(k)`
//! (demand-only symbols on `V` consumed in round `k` to recover a subpacket
//! of message `i`), together with the subpacketization level `L`.

mod check;
mod general;
mod optimize;
mod reduced;

pub use check::check_scheme_counts;
pub use general::{build_general_program, GeneralIndexing, ProgramScale};
pub use optimize::{
    maximize_rate, minimize_subpacketization, minimize_subpacketization_free_l, MinSubpackOutcome,
    OptimizeError, RateOptimum,
};
pub use reduced::{
    build_mpir_restricted_program, build_reduced_full_family_program, maximize_rate_reduced,
    ReducedIndexing, ReducedRateOptimum,
};

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use crate::instance::DemandInstance;
use crate::rational::Rat;
use crate::subset::SubsetMask;

/// An integral per-server symbol-count assignment together with the
/// subpacketization level: the abstract scheme emitted by the optimizer.
/// Only nonzero counts are stored. Serialization runs through the report
/// schema, which spells counts as decimal strings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemeCounts {
    pub instance: DemandInstance,
    pub l: BigInt,
    /// `T_U`: symbols with support `U`, per server.
    pub t: BTreeMap<SubsetMask, BigInt>,
    /// Per demand index `j`: `(side U, new V) -> count`.
    pub i: Vec<BTreeMap<(SubsetMask, SubsetMask), BigInt>>,
    /// Per demand index `j`: `(V, recovered message, round) -> count`.
    pub j: Vec<BTreeMap<(SubsetMask, u32, u32), BigInt>>,
}

impl SchemeCounts {
    pub fn zero(instance: &DemandInstance) -> Self {
        let e = instance.family.len();
        SchemeCounts {
            instance: instance.clone(),
            l: BigInt::zero(),
            t: BTreeMap::new(),
            i: vec![BTreeMap::new(); e],
            j: vec![BTreeMap::new(); e],
        }
    }

    /// The naive scheme: `L/N` distinct subpackets of every message from
    /// each server, no pairings, no multi-demand recoveries. Feasible for
    /// any family; rate `D/K`.
    pub fn naive(instance: &DemandInstance, l: BigInt) -> Self {
        let per_server = &l / BigInt::from(instance.servers);
        let mut counts = SchemeCounts::zero(instance);
        counts.l = l;
        for m in 1..=instance.messages {
            counts
                .t
                .insert(SubsetMask::singleton(m), per_server.clone());
        }
        counts
    }

    pub fn t_of(&self, u: SubsetMask) -> BigInt {
        self.t.get(&u).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn i_of(&self, j: usize, side: SubsetMask, new: SubsetMask) -> BigInt {
        self.i[j]
            .get(&(side, new))
            .cloned()
            .unwrap_or_else(BigInt::zero)
    }

    pub fn j_of(&self, j: usize, v: SubsetMask, recover: u32, round: u32) -> BigInt {
        self.j[j]
            .get(&(v, recover, round))
            .cloned()
            .unwrap_or_else(BigInt::zero)
    }

    /// Per-server total download `Σ_U T_U`.
    pub fn t_total(&self) -> BigInt {
        self.t.values().sum()
    }

    /// Retrieval rate `D·L / (N·T_total)`.
    pub fn rate(&self) -> Rat {
        let num = Rat::from_int(BigInt::from(self.instance.demand_size) * &self.l);
        let den = Rat::from_int(BigInt::from(self.instance.servers) * self.t_total());
        &num / &den
    }

    /// Drop zero entries (canonical form).
    pub fn prune_zeros(&mut self) {
        self.t.retain(|_, v| !v.is_zero());
        for m in &mut self.i {
            m.retain(|_, v| !v.is_zero());
        }
        for m in &mut self.j {
            m.retain(|_, v| !v.is_zero());
        }
    }

    pub fn has_negative(&self) -> bool {
        self.t.values().any(|v| v.is_negative())
            || self.i.iter().flat_map(|m| m.values()).any(|v| v.is_negative())
            || self.j.iter().flat_map(|m| m.values()).any(|v| v.is_negative())
    }
}

/// Accumulating sparse row builder: coefficients on the same variable add
/// up, zeros drop out.
pub(crate) struct RowBuilder {
    coeffs: BTreeMap<usize, Rat>,
}

impl RowBuilder {
    pub fn new() -> Self {
        RowBuilder {
            coeffs: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, var: usize, coef: Rat) {
        if coef.is_zero() {
            return;
        }
        let slot = self.coeffs.entry(var).or_insert_with(Rat::zero);
        *slot += &coef;
        if slot.is_zero() {
            self.coeffs.remove(&var);
        }
    }

    pub fn into_terms(self) -> Vec<(usize, Rat)> {
        self.coeffs.into_iter().collect()
    }
}

pub(crate) fn binomial_big(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::from(1);
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

pub(crate) fn binomial_rat(n: u32, k: u32) -> Rat {
    Rat::from_int(binomial_big(n, k))
}
