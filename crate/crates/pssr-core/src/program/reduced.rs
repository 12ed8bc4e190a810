//! Orbit-reduced program for the full demand family.
//!
//! Relabeling the message indices preserves the full family, so the count
//! variables collapse onto orbit representatives: `T~_u` by support size,
//! `I~_{(u1,u2),v}` by (interference part, demand part, new-demand size),
//! and `J~_v(k)` by (support size, round). Binomial multiplicities replace
//! the per-set sums, shrinking the program from exponential to polynomial in
//! `K` and `D`.
//!
//! The restricted variant pins the extra degrees of freedom down to the
//! classical message-symmetric construction: sides carry no demand messages,
//! every matching side is consumed, demand-only symbols are used in their
//! own round, and round recoveries split evenly across the messages of a
//! support.

use num_bigint::BigInt;
use std::collections::HashMap;

use crate::lp::{solve_lp, Program, Relation, Sense, SolveBudget, Status};
use crate::rational::Rat;

use super::general::ProgramScale;
use super::optimize::OptimizeError;
use super::{binomial_rat, RowBuilder};

/// Variable ids for the reduced program: `T~_u` for `u ∈ [1:K]`, then
/// `I~_{(u1,u2),v}` for `u1 ∈ [1:K-D]`, `v ∈ [1:D]`, `u2 ∈ [0:D-v]`, then
/// `J~_v(k)` for `v ∈ [2:D]`, `k ∈ [v:D]`.
pub struct ReducedIndexing {
    pub messages: u32,
    pub demand_size: u32,
    pub t_count: usize,
    pub i_count: usize,
    pub j_count: usize,
    pub l_var: Option<usize>,
    i_ids: HashMap<(u32, u32, u32), usize>,
    j_ids: HashMap<(u32, u32), usize>,
}

impl ReducedIndexing {
    pub fn t(&self, u: u32) -> usize {
        debug_assert!((1..=self.messages).contains(&u));
        (u - 1) as usize
    }

    pub fn i(&self, u1: u32, u2: u32, v: u32) -> usize {
        self.i_ids[&(u1, u2, v)]
    }

    pub fn j(&self, v: u32, k: u32) -> usize {
        self.j_ids[&(v, k)]
    }
}

/// Build the reduced program for the full family on `K` messages with
/// demand size `D` over `N` servers. Emits `(K-D)(D+1)` side/target rows,
/// one quota row, `D-1` availability rows, `D-1` round rows, and one
/// weighted non-reuse row.
pub fn build_reduced_full_family_program(
    servers: u32,
    messages: u32,
    demand_size: u32,
    scale: &ProgramScale,
) -> (Program, ReducedIndexing) {
    let (n, k, d) = (servers, messages, demand_size);
    assert!(d >= 2 && d < k, "demand size must lie in [2:K-1]");
    let nm1 = Rat::from_int(i64::from(n) - 1);
    let integral = !matches!(scale, ProgramScale::Normalized);

    let mut prog = Program::new(Sense::Min);
    for u in 1..=k {
        prog.add_var(format!("Tt_{u}"), Rat::zero(), integral);
    }
    let t_count = prog.num_vars();

    let mut i_ids = HashMap::new();
    for u1 in 1..=k - d {
        for u2 in 0..=d {
            for v in 1..=d - u2 {
                let id = prog.add_var(format!("It_{u1}_{u2}_v{v}"), Rat::zero(), integral);
                i_ids.insert((u1, u2, v), id);
            }
        }
    }
    let i_count = prog.num_vars() - t_count;

    let mut j_ids = HashMap::new();
    for v in 2..=d {
        for round in v..=d {
            let id = prog.add_var(format!("Jt_{v}r{round}"), Rat::zero(), integral);
            j_ids.insert((v, round), id);
        }
    }
    let j_count = prog.num_vars() - t_count - i_count;

    let l_var = match scale {
        ProgramScale::FreeL => Some(prog.add_var("L", Rat::one(), true)),
        _ => None,
    };
    let ix = ReducedIndexing {
        messages: k,
        demand_size: d,
        t_count,
        i_count,
        j_count,
        l_var,
        i_ids,
        j_ids,
    };

    let l_over_n: Rat = match scale {
        ProgramScale::Normalized => Rat::ratio(1, i64::from(n)),
        ProgramScale::FixedL(l) => &Rat::from_int(l.clone()) / &Rat::from_int(i64::from(n)),
        ProgramScale::FreeL => Rat::zero(),
    };
    let l_const: Rat = match scale {
        ProgramScale::Normalized => Rat::one(),
        ProgramScale::FixedL(l) => Rat::from_int(l.clone()),
        ProgramScale::FreeL => Rat::zero(),
    };

    // Side/target budget per orbit (u1, u2).
    for u1 in 1..=k - d {
        for u2 in 0..=d {
            let mut row = RowBuilder::new();
            for v in 1..=d - u2 {
                row.add(ix.i(u1, u2, v), binomial_rat(d - u2, v));
            }
            for v in 1..=u2 {
                row.add(ix.i(u1, u2 - v, v), &nm1 * &binomial_rat(u2, v));
            }
            row.add(ix.t(u1 + u2), -Rat::one());
            prog.add_constraint(
                format!("side_target[u1={u1},u2={u2}]"),
                row.into_terms(),
                Relation::Le,
                Rat::zero(),
            );
        }
    }

    // Single quota equality.
    {
        let mut row = RowBuilder::new();
        row.add(ix.t(1), Rat::one());
        for u1 in 1..=k - d {
            for u2 in 0..d {
                row.add(
                    ix.i(u1, u2, 1),
                    &nm1 * &(&binomial_rat(k - d, u1) * &binomial_rat(d - 1, u2)),
                );
            }
        }
        for v in 2..=d {
            for round in v..=d {
                row.add(ix.j(v, round), binomial_rat(d - 1, v - 1));
            }
        }
        if let Some(lv) = ix.l_var {
            row.add(lv, -Rat::ratio(1, i64::from(n)));
        }
        prog.add_constraint("quota", row.into_terms(), Relation::Eq, l_over_n);
    }

    // Availability per new-demand size v.
    for v in 2..=d {
        let mut row = RowBuilder::new();
        row.add(ix.t(v), Rat::one());
        for u1 in 1..=k - d {
            for u2 in 0..=d - v {
                row.add(
                    ix.i(u1, u2, v),
                    &nm1 * &(&binomial_rat(k - d, u1) * &binomial_rat(d - v, u2)),
                );
            }
        }
        for round in v..=d {
            row.add(ix.j(v, round), -Rat::from_int(i64::from(v)));
        }
        prog.add_constraint(
            format!("avail[v={v}]"),
            row.into_terms(),
            Relation::Ge,
            Rat::zero(),
        );
    }

    // Round availability per cutoff m.
    for m in 1..d {
        let mut row = RowBuilder::new();
        row.add(ix.t(1), nm1.clone());
        for round in 1..=m {
            for u1 in 1..=k - d {
                row.add(
                    ix.i(u1, round - 1, 1),
                    &(&nm1 * &nm1) * &(&binomial_rat(k - d, u1) * &binomial_rat(d - 1, round - 1)),
                );
            }
        }
        for round in 2..=m {
            for v in 1..round {
                row.add(ix.j(v + 1, round), &nm1 * &binomial_rat(d - 1, v));
            }
        }
        for round in 2..=m + 1 {
            for v in 1..round {
                for u1 in 1..=k - d {
                    row.add(
                        ix.i(u1, round - v, v),
                        -(&Rat::from_int(i64::from(n))
                            * &(&binomial_rat(k - d, u1)
                                * &(&binomial_rat(d - 1, v)
                                    * &binomial_rat(d - v - 1, round - v - 1)))),
                    );
                }
                row.add(
                    ix.j(v + 1, round),
                    -(&Rat::from_int(i64::from(v)) * &binomial_rat(d - 1, v)),
                );
            }
        }
        prog.add_constraint(
            format!("round[m={m}]"),
            row.into_terms(),
            Relation::Ge,
            Rat::zero(),
        );
    }

    // Weighted non-reuse: a fixed message appears in binomial(K-1, u-1) of
    // the size-u supports.
    {
        let mut row = RowBuilder::new();
        for u in 1..=k {
            row.add(ix.t(u), binomial_rat(k - 1, u - 1));
        }
        if let Some(lv) = ix.l_var {
            row.add(lv, -Rat::one());
        }
        prog.add_constraint(
            "nonreuse",
            row.into_terms(),
            Relation::Le,
            if ix.l_var.is_some() { Rat::zero() } else { l_const },
        );
    }

    // Objective: per-server total over all supports of each size.
    prog.objective = (1..=k).map(|u| (ix.t(u), binomial_rat(k, u))).collect();

    debug_assert_eq!(ix.t_count, k as usize);
    debug_assert_eq!(
        ix.i_count,
        (k - d) as usize * (d as usize * (d as usize + 1)) / 2
    );
    debug_assert_eq!(ix.j_count, (d as usize * (d as usize - 1)) / 2);

    (prog, ix)
}

/// Reduced program plus the restrictions recovering the message-symmetric
/// construction: `I~_{(u1,u2),v} = 0` for `u2 ≥ 1`;
/// `(N-1)·I~_{(u1,0),v} = T~_{u1+v}`; `J~_v(k) = 0` for `k > v`; and
/// `v·J~_v(v) = Σ_i binomial(K-D, i)·T~_{v+i}`.
pub fn build_mpir_restricted_program(
    servers: u32,
    messages: u32,
    demand_size: u32,
    scale: &ProgramScale,
) -> (Program, ReducedIndexing) {
    let (mut prog, ix) = build_reduced_full_family_program(servers, messages, demand_size, scale);
    let (n, k, d) = (servers, messages, demand_size);

    for u1 in 1..=k - d {
        for v in 1..=d {
            for u2 in 1..=d - v {
                prog.add_constraint(
                    format!("restrict_demand_free_side[{u1},{u2},{v}]"),
                    vec![(ix.i(u1, u2, v), Rat::one())],
                    Relation::Eq,
                    Rat::zero(),
                );
            }
            let mut row = RowBuilder::new();
            row.add(ix.i(u1, 0, v), Rat::from_int(i64::from(n) - 1));
            row.add(ix.t(u1 + v), -Rat::one());
            prog.add_constraint(
                format!("restrict_full_pairing[{u1},{v}]"),
                row.into_terms(),
                Relation::Eq,
                Rat::zero(),
            );
        }
    }
    for v in 2..=d {
        for round in v + 1..=d {
            prog.add_constraint(
                format!("restrict_own_round[{v},{round}]"),
                vec![(ix.j(v, round), Rat::one())],
                Relation::Eq,
                Rat::zero(),
            );
        }
        let mut row = RowBuilder::new();
        row.add(ix.j(v, v), Rat::from_int(i64::from(v)));
        for i in 0..=k - d {
            row.add(ix.t(v + i), -binomial_rat(k - d, i));
        }
        prog.add_constraint(
            format!("restrict_even_split[{v}]"),
            row.into_terms(),
            Relation::Eq,
            Rat::zero(),
        );
    }
    (prog, ix)
}

/// Rate optimum of the reduced (optionally restricted) formulation.
#[derive(Clone, Debug)]
pub struct ReducedRateOptimum {
    pub rate: Rat,
    pub normalized_total: Rat,
    /// Normalized orbit-representative values `(T~, I~, J~)` keyed by name.
    pub values: Vec<(String, Rat)>,
}

pub fn maximize_rate_reduced(
    servers: u32,
    messages: u32,
    demand_size: u32,
    mpir_restricted: bool,
    budget: &SolveBudget,
) -> Result<ReducedRateOptimum, OptimizeError> {
    let scale = ProgramScale::Normalized;
    let (prog, _ix) = if mpir_restricted {
        build_mpir_restricted_program(servers, messages, demand_size, &scale)
    } else {
        build_reduced_full_family_program(servers, messages, demand_size, &scale)
    };
    let sol = solve_lp(&prog, budget)?;
    if sol.status != Status::Optimal {
        return Err(OptimizeError::UnexpectedLpStatus(sol.status));
    }
    let rate = &Rat::from_int(i64::from(demand_size))
        / &(&Rat::from_int(i64::from(servers)) * &sol.objective);
    let values = prog
        .vars
        .iter()
        .zip(&sol.values)
        .filter(|(_, v)| !v.is_zero())
        .map(|(def, v)| (def.name.clone(), v.clone()))
        .collect();
    Ok(ReducedRateOptimum {
        rate,
        normalized_total: sol.objective,
        values,
    })
}

#[allow(unused)]
fn _bigint_used(_: BigInt) {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_family, FamilyKind};
    use crate::program::{build_general_program, maximize_rate};

    #[test]
    fn reduced_counts_match_closed_forms() {
        let (prog, ix) = build_reduced_full_family_program(2, 5, 2, &ProgramScale::Normalized);
        assert_eq!(ix.t_count, 5);
        assert_eq!(ix.i_count, 9); // (K-D) * binom(D+1, 2) = 3 * 3
        assert_eq!(ix.j_count, 1);
        // (K-D)(D+1) side/target rows, 1 quota, D-1 avail, D-1 round, 1
        // non-reuse.
        let side_target = prog
            .constraints
            .iter()
            .filter(|c| c.name.starts_with("side_target"))
            .count();
        assert_eq!(side_target, 9);
        assert_eq!(prog.constraints.len(), 9 + 1 + 1 + 1 + 1);
        prog.validate().unwrap();
    }

    #[test]
    fn full_family_k5_d2_reduced_rate_is_82_135() {
        let opt = maximize_rate_reduced(2, 5, 2, false, &SolveBudget::default()).unwrap();
        assert_eq!(opt.rate, Rat::ratio(82, 135));
    }

    #[test]
    fn mpir_restricted_matches_reduced_on_k5_d2() {
        let opt = maximize_rate_reduced(2, 5, 2, true, &SolveBudget::default()).unwrap();
        assert_eq!(opt.rate, Rat::ratio(82, 135));
    }

    #[test]
    fn restricted_never_beats_unrestricted() {
        for (k, d) in [(5u32, 2u32), (5, 3), (6, 2), (6, 4)] {
            let free = maximize_rate_reduced(2, k, d, false, &SolveBudget::default()).unwrap();
            let tied = maximize_rate_reduced(2, k, d, true, &SolveBudget::default()).unwrap();
            assert!(tied.rate <= free.rate, "K={k} D={d}");
        }
    }

    #[test]
    fn reduced_equals_general_on_small_full_families() {
        for (k, d) in [(4u32, 2u32), (5, 2), (5, 3)] {
            let inst = generate_family(&FamilyKind::Full, 2, k, d).unwrap();
            let general = maximize_rate(&inst, &SolveBudget::default(), None).unwrap();
            let reduced = maximize_rate_reduced(2, k, d, false, &SolveBudget::default()).unwrap();
            assert_eq!(general.rate, reduced.rate, "K={k} D={d}");
        }
    }

    #[test]
    fn full_family_k5_d3_rate_is_3_4() {
        let opt = maximize_rate_reduced(2, 5, 3, false, &SolveBudget::default()).unwrap();
        assert_eq!(opt.rate, Rat::ratio(3, 4));
        let opt = maximize_rate_reduced(2, 5, 3, true, &SolveBudget::default()).unwrap();
        assert_eq!(opt.rate, Rat::ratio(3, 4));
    }
}
