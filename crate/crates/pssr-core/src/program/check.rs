//! From-scratch verifier for scheme counts.
//!
//! Walks the defining count identities directly over integer arithmetic,
//! independent of the constraint-program builder and the solvers, so a bug
//! in either cannot hide itself. Every emitted `SchemeCounts` passes through
//! here before leaving the optimizer.

use num_bigint::BigInt;
use num_traits::Zero;

use crate::instance::DemandInstance;
use crate::subset::SubsetMask;

use super::SchemeCounts;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CountsViolation {
    #[error("negative count present")]
    Negative,
    #[error("subpacketization {l} not divisible by server count {n}")]
    LNotDivisible { l: BigInt, n: u32 },
    #[error("subpacketization must be positive, got {0}")]
    LNotPositive(BigInt),
    #[error("side/target budget exceeded at demand {j}, support {u}: used {used}, have {have}")]
    SideTargetBudget {
        j: usize,
        u: String,
        used: BigInt,
        have: BigInt,
    },
    #[error("recovery quota missed at demand {j}, message {i}: got {got}, need {need}")]
    Quota {
        j: usize,
        i: u32,
        got: BigInt,
        need: BigInt,
    },
    #[error("demand-only availability exceeded at demand {j}, set {v}: used {used}, have {have}")]
    Availability {
        j: usize,
        v: String,
        used: BigInt,
        have: BigInt,
    },
    #[error(
        "round-{m} inventory short at demand {j}, message {i}: need {need}, recovered {have}"
    )]
    RoundInventory {
        j: usize,
        i: u32,
        m: u32,
        need: BigInt,
        have: BigInt,
    },
    #[error("message {i} appears in {used} symbols per server, above L = {l}")]
    NonReuse { i: u32, used: BigInt, l: BigInt },
    #[error("stray count outside the valid index set: {0}")]
    StrayIndex(String),
}

/// Exact feasibility check of `counts` against every defining constraint of
/// the general program.
pub fn check_scheme_counts(
    instance: &DemandInstance,
    counts: &SchemeCounts,
) -> Result<(), CountsViolation> {
    let n = instance.servers;
    let d = instance.demand_size;
    let nm1 = BigInt::from(n - 1);

    if counts.has_negative() {
        return Err(CountsViolation::Negative);
    }
    if counts.l <= BigInt::zero() {
        return Err(CountsViolation::LNotPositive(counts.l.clone()));
    }
    if (&counts.l % BigInt::from(n)) != BigInt::zero() {
        return Err(CountsViolation::LNotDivisible {
            l: counts.l.clone(),
            n,
        });
    }
    let l_over_n = &counts.l / BigInt::from(n);

    // Index-set sanity for the sparse maps.
    for (u, _) in counts.t.iter().filter(|(_, c)| !c.is_zero()) {
        if u.is_empty() || !u.is_subset_of(SubsetMask::full(instance.messages)) {
            return Err(CountsViolation::StrayIndex(format!("T_{u}")));
        }
    }
    for (j, &w) in instance.family.iter().enumerate() {
        for ((u, v), _) in counts.i[j].iter().filter(|(_, c)| !c.is_zero()) {
            let ok = !v.is_empty()
                && v.is_subset_of(w)
                && !u.is_subset_of(w)
                && u.intersect(*v).is_empty()
                && u.is_subset_of(SubsetMask::full(instance.messages));
            if !ok {
                return Err(CountsViolation::StrayIndex(format!(
                    "I[{}]_{u},{v}",
                    j + 1
                )));
            }
        }
        for ((v, i, k), _) in counts.j[j].iter().filter(|(_, c)| !c.is_zero()) {
            let ok = v.card() >= 2 && v.is_subset_of(w) && v.contains(*i) && (v.card()..=d).contains(k);
            if !ok {
                return Err(CountsViolation::StrayIndex(format!(
                    "J[{}]_{v},{i}({k})",
                    j + 1
                )));
            }
        }
    }

    for (j, &w) in instance.family.iter().enumerate() {
        // Side/target budget per support not within W_j.
        for u in instance.enum_u_all(j, SubsetMask::EMPTY) {
            let side: BigInt = w
                .diff(u)
                .nonempty_submasks()
                .map(|v| counts.i_of(j, u, v))
                .sum();
            let target: BigInt = w
                .intersect(u)
                .nonempty_submasks()
                .map(|v| counts.i_of(j, u.diff(v), v))
                .sum();
            let used = side + &nm1 * target;
            let have = counts.t_of(u);
            if used > have {
                return Err(CountsViolation::SideTargetBudget {
                    j,
                    u: u.to_string(),
                    used,
                    have,
                });
            }
        }

        // Quota per demand message.
        for i in w.iter() {
            let singleton = SubsetMask::singleton(i);
            let mut got = counts.t_of(singleton);
            for u in instance.enum_u_all(j, singleton) {
                got += &nm1 * counts.i_of(j, u, singleton);
            }
            for k in 2..=d {
                for l in 1..k {
                    for v in w.without(i).submasks_of_size(l) {
                        got += counts.j_of(j, v.with(i), i, k);
                    }
                }
            }
            if got != l_over_n {
                return Err(CountsViolation::Quota {
                    j,
                    i,
                    got,
                    need: l_over_n.clone(),
                });
            }
        }

        // Demand-only availability.
        for v in w.nonempty_submasks().filter(|v| v.card() >= 2) {
            let mut have = counts.t_of(v);
            for u in instance.enum_u_all(j, v) {
                have += &nm1 * counts.i_of(j, u, v);
            }
            let mut used = BigInt::zero();
            for k in v.card()..=d {
                for i in v.iter() {
                    used += counts.j_of(j, v, i, k);
                }
            }
            if used > have {
                return Err(CountsViolation::Availability {
                    j,
                    v: v.to_string(),
                    used,
                    have,
                });
            }
        }

        // Round inventory.
        for i in w.iter() {
            let singleton = SubsetMask::singleton(i);
            for m in 1..d {
                let mut have = &nm1 * counts.t_of(singleton);
                for k in 1..=m {
                    for u in instance.enum_u(j, singleton, k - 1) {
                        have += &nm1 * &nm1 * counts.i_of(j, u, singleton);
                    }
                }
                for k in 2..=m {
                    for l in 1..k {
                        for v in w.without(i).submasks_of_size(l) {
                            have += &nm1 * counts.j_of(j, v.with(i), i, k);
                        }
                    }
                }
                let mut need = BigInt::zero();
                for k in 2..=m + 1 {
                    for l in 1..k {
                        for v in w.without(i).submasks_of_size(l) {
                            for u in instance.enum_u(j, v.with(i), k - 1 - l) {
                                need += BigInt::from(n) * counts.i_of(j, u.with(i), v);
                            }
                            for ip in v.iter() {
                                need += counts.j_of(j, v.with(i), ip, k);
                            }
                        }
                    }
                }
                if need > have {
                    return Err(CountsViolation::RoundInventory {
                        j,
                        i,
                        m,
                        need,
                        have,
                    });
                }
            }
        }
    }

    // Per-message non-reuse.
    for i in 1..=instance.messages {
        let used: BigInt = counts
            .t
            .iter()
            .filter(|(u, _)| u.contains(i))
            .map(|(_, c)| c.clone())
            .sum();
        if used > counts.l {
            return Err(CountsViolation::NonReuse {
                i,
                used,
                l: counts.l.clone(),
            });
        }
    }

    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::DemandInstance;

    fn example_instance() -> DemandInstance {
        DemandInstance::new(
            2,
            5,
            2,
            vec![
                SubsetMask::from_indices(&[1, 3]),
                SubsetMask::from_indices(&[2, 3]),
                SubsetMask::from_indices(&[3, 4]),
                SubsetMask::from_indices(&[4, 5]),
            ],
        )
        .unwrap()
    }

    fn m(ix: &[u32]) -> SubsetMask {
        SubsetMask::from_indices(ix)
    }

    /// The published optimal assignment for the running example: L = 8,
    /// per-server total 13, with the pairing and round tables for W_1 and
    /// W_3 spelled out.
    pub(crate) fn example_counts() -> SchemeCounts {
        let inst = example_instance();
        let mut c = SchemeCounts::zero(&inst);
        c.l = BigInt::from(8);
        for (u, v) in [
            (m(&[2]), 1),
            (m(&[3]), 2),
            (m(&[4]), 1),
            (m(&[5]), 2),
            (m(&[1, 3]), 1),
            (m(&[2, 4]), 1),
            (m(&[3, 5]), 2),
            (m(&[1, 2, 3]), 1),
            (m(&[1, 3, 4]), 1),
            (m(&[1, 2, 3, 4]), 1),
        ] {
            c.t.insert(u, BigInt::from(v));
        }
        // W_1 = {1,3}: sides {5}->{3} twice; {2},{4},{2,4} -> {1,3}.
        for (u, v, n) in [
            (m(&[5]), m(&[3]), 2),
            (m(&[2]), m(&[1, 3]), 1),
            (m(&[4]), m(&[1, 3]), 1),
            (m(&[2, 4]), m(&[1, 3]), 1),
        ] {
            c.i[0].insert((u, v), BigInt::from(n));
        }
        c.j[0].insert((m(&[1, 3]), 1, 2), BigInt::from(4));
        // W_2 = {2,3}: message 2 comes from singleton-V pairings with sides
        // {4}, {1,3}, {1,3,4}; no multi-demand recoveries.
        for (u, v, n) in [
            (m(&[5]), m(&[3]), 2),
            (m(&[4]), m(&[2]), 1),
            (m(&[1, 3]), m(&[2]), 1),
            (m(&[1, 3, 4]), m(&[2]), 1),
        ] {
            c.i[1].insert((u, v), BigInt::from(n));
        }
        // W_3 = {3,4}: published table.
        for (u, v, n) in [
            (m(&[5]), m(&[3]), 2),
            (m(&[2]), m(&[4]), 1),
            (m(&[1, 3]), m(&[4]), 1),
            (m(&[1, 2, 3]), m(&[4]), 1),
        ] {
            c.i[2].insert((u, v), BigInt::from(n));
        }
        // W_4 = {4,5}: all pairings have pure-interference sides.
        for (u, v, n) in [
            (m(&[3]), m(&[5]), 2),
            (m(&[2]), m(&[4]), 1),
            (m(&[1, 3]), m(&[4]), 1),
            (m(&[1, 2, 3]), m(&[4]), 1),
        ] {
            c.i[3].insert((u, v), BigInt::from(n));
        }
        c
    }

    #[test]
    fn published_example_counts_verify() {
        let inst = example_instance();
        let counts = example_counts();
        assert_eq!(counts.t_total(), BigInt::from(13));
        assert_eq!(counts.rate(), crate::rational::Rat::ratio(8, 13));
        assert_eq!(check_scheme_counts(&inst, &counts), Ok(()));
    }

    #[test]
    fn naive_counts_verify() {
        let inst = example_instance();
        let counts = SchemeCounts::naive(&inst, BigInt::from(2));
        assert_eq!(check_scheme_counts(&inst, &counts), Ok(()));
        assert_eq!(counts.rate(), crate::rational::Rat::ratio(2, 5));
    }

    #[test]
    fn quota_violation_detected() {
        let inst = example_instance();
        let mut counts = SchemeCounts::naive(&inst, BigInt::from(2));
        counts.t.insert(m(&[1]), BigInt::from(2));
        assert!(matches!(
            check_scheme_counts(&inst, &counts),
            Err(CountsViolation::Quota { .. })
        ));
    }

    #[test]
    fn odd_l_rejected() {
        let inst = example_instance();
        let counts = SchemeCounts::naive(&inst, BigInt::from(3));
        assert!(matches!(
            check_scheme_counts(&inst, &counts),
            Err(CountsViolation::LNotDivisible { .. })
        ));
    }
}
