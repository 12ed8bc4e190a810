//! The general constraint program over the full `T`/`I`/`J` variable space
//! for an arbitrary normalized demand family.
//!
//! Row families, per demand index `j`:
//!   * side/target budget, for every support `U ⊄ W_j`: symbols of support
//!     `U` consumed as sides plus `N-1` times those consumed as targets
//!     cannot exceed `T_U`;
//!   * recovery quota, for every demand message `i ∈ W_j`: singleton reads,
//!     pairing-generated singletons, and multi-demand round recoveries total
//!     exactly `L/N` per server;
//!   * demand-only availability, for every `V ⊆ W_j` with `|V| ≥ 2`: round
//!     usage of `V`-symbols cannot exceed direct retrievals plus
//!     pairing-generated copies;
//!   * round availability, for every `i ∈ W_j` and round cutoff `m`:
//!     subpackets of `i` needed from other servers by the end of round `m`
//!     cannot exceed those recovered from other servers by then;
//! plus the per-message non-reuse rows `Σ_{U ∋ i} T_U ≤ L`.

use std::collections::HashMap;

use num_bigint::BigInt;

use crate::instance::DemandInstance;
use crate::lp::{Program, Relation, Sense};
use crate::rational::Rat;
use crate::subset::SubsetMask;

use super::RowBuilder;

/// How the subpacketization level enters the program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProgramScale {
    /// All counts divided by `L` (so `L = 1`); continuous variables. The
    /// rate-maximization LP.
    Normalized,
    /// `L` pinned to a constant; all counts integral.
    FixedL(BigInt),
    /// `L` is an integral variable (`L ≥ 1`).
    FreeL,
}

/// Variable ids for the general program, in canonical order: `T` by
/// ascending support mask, then `I` by `(j, V asc, U asc)`, then `J` by
/// `(j, V asc, i asc, k asc)`, then `L` when free.
pub struct GeneralIndexing {
    pub messages: u32,
    pub t_count: usize,
    pub i_count: usize,
    pub j_count: usize,
    pub l_var: Option<usize>,
    i_ids: HashMap<(usize, u32, u32), usize>,
    j_ids: HashMap<(usize, u32, u32, u32), usize>,
    /// Reverse map for `I`/`J` ids (offset by `t_count`).
    kinds: Vec<VarKind>,
}

#[derive(Clone, Debug)]
pub enum VarKind {
    T(SubsetMask),
    I {
        j: usize,
        side: SubsetMask,
        new: SubsetMask,
    },
    J {
        j: usize,
        dset: SubsetMask,
        recover: u32,
        round: u32,
    },
    L,
}

impl GeneralIndexing {
    pub fn t(&self, u: SubsetMask) -> usize {
        debug_assert!(!u.is_empty());
        u.0 as usize - 1
    }

    pub fn i(&self, j: usize, side: SubsetMask, new: SubsetMask) -> usize {
        self.i_ids[&(j, side.0, new.0)]
    }

    pub fn j(&self, j: usize, v: SubsetMask, recover: u32, round: u32) -> usize {
        self.j_ids[&(j, v.0, recover, round)]
    }

    pub fn num_vars(&self) -> usize {
        self.t_count + self.i_count + self.j_count + usize::from(self.l_var.is_some())
    }

    pub fn kind(&self, var: usize) -> VarKind {
        if var < self.t_count {
            VarKind::T(SubsetMask(var as u32 + 1))
        } else if var - self.t_count < self.kinds.len() {
            self.kinds[var - self.t_count].clone()
        } else {
            VarKind::L
        }
    }
}

/// Build the general program. Emits exactly `E(2^K - 2^D)` side/target
/// rows, `E·D` quota rows, `E(2^D - D - 1)` availability rows, `E·D(D-1)`
/// round rows, and `K` non-reuse rows; the objective is the per-server
/// total `Σ_U T_U` (scaled by `1/L` under `Normalized`).
pub fn build_general_program(
    instance: &DemandInstance,
    scale: &ProgramScale,
) -> (Program, GeneralIndexing) {
    let k = instance.messages;
    let d = instance.demand_size;
    let e = instance.family.len();
    let n = instance.servers;
    let n_minus_1 = Rat::from_int(i64::from(n) - 1);
    let integral = !matches!(scale, ProgramScale::Normalized);

    let mut prog = Program::new(Sense::Min);
    let mut kinds = Vec::new();

    // T variables, dense over nonempty masks.
    for mask in 1..(1u32 << k) {
        prog.add_var(
            format!("T_{}", SubsetMask(mask)),
            Rat::zero(),
            integral,
        );
    }
    let t_count = prog.num_vars();

    // I variables: side support U (not within W_j) producing demand-only V.
    let mut i_ids = HashMap::new();
    for (j, &w) in instance.family.iter().enumerate() {
        for v in w.nonempty_submasks() {
            for u in instance.enum_u_all(j, v) {
                let id = prog.add_var(
                    format!("I{}_{}_{}", j + 1, u, v),
                    Rat::zero(),
                    integral,
                );
                i_ids.insert((j, u.0, v.0), id);
                kinds.push(VarKind::I { j, side: u, new: v });
            }
        }
    }
    let i_count = prog.num_vars() - t_count;

    // J variables: demand-only support V used in round k to recover i.
    let mut j_ids = HashMap::new();
    for (j, &w) in instance.family.iter().enumerate() {
        for v in w.nonempty_submasks().filter(|v| v.card() >= 2) {
            for i in v.iter() {
                for round in v.card()..=d {
                    let id = prog.add_var(
                        format!("J{}_{}_{}r{}", j + 1, v, i, round),
                        Rat::zero(),
                        integral,
                    );
                    j_ids.insert((j, v.0, i, round), id);
                    kinds.push(VarKind::J {
                        j,
                        dset: v,
                        recover: i,
                        round,
                    });
                }
            }
        }
    }
    let j_count = prog.num_vars() - t_count - i_count;

    let l_var = match scale {
        ProgramScale::FreeL => {
            let id = prog.add_var("L", Rat::one(), true);
            kinds.push(VarKind::L);
            Some(id)
        }
        _ => None,
    };

    let ix = GeneralIndexing {
        messages: k,
        t_count,
        i_count,
        j_count,
        l_var,
        i_ids,
        j_ids,
        kinds,
    };

    // Quota right-hand side L/N and non-reuse right-hand side L, by scale.
    let l_over_n: Rat = match scale {
        ProgramScale::Normalized => Rat::ratio(1, i64::from(n)),
        ProgramScale::FixedL(l) => &Rat::from_int(l.clone()) / &Rat::from_int(i64::from(n)),
        ProgramScale::FreeL => Rat::zero(), // moved onto the L variable
    };
    let l_const: Rat = match scale {
        ProgramScale::Normalized => Rat::one(),
        ProgramScale::FixedL(l) => Rat::from_int(l.clone()),
        ProgramScale::FreeL => Rat::zero(),
    };

    // Side/target budget rows.
    for (j, &w) in instance.family.iter().enumerate() {
        for u in instance.enum_u_all(j, SubsetMask::EMPTY) {
            let mut row = RowBuilder::new();
            for v in w.diff(u).nonempty_submasks() {
                row.add(ix.i(j, u, v), Rat::one());
            }
            for v in w.intersect(u).nonempty_submasks() {
                row.add(ix.i(j, u.diff(v), v), n_minus_1.clone());
            }
            row.add(ix.t(u), -Rat::one());
            prog.add_constraint(
                format!("side_target[j{},U{}]", j + 1, u),
                row.into_terms(),
                Relation::Le,
                Rat::zero(),
            );
        }
    }

    // Per-demand-message quota equalities.
    for (j, &w) in instance.family.iter().enumerate() {
        for i in w.iter() {
            let mut row = RowBuilder::new();
            row.add(ix.t(SubsetMask::singleton(i)), Rat::one());
            for u in instance.enum_u_all(j, SubsetMask::singleton(i)) {
                row.add(ix.i(j, u, SubsetMask::singleton(i)), n_minus_1.clone());
            }
            for round in 2..=d {
                for l in 1..round {
                    for v in w.without(i).submasks_of_size(l) {
                        row.add(ix.j(j, v.with(i), i, round), Rat::one());
                    }
                }
            }
            if let Some(lv) = ix.l_var {
                row.add(lv, -Rat::ratio(1, i64::from(n)));
            }
            prog.add_constraint(
                format!("quota[j{},i{}]", j + 1, i),
                row.into_terms(),
                Relation::Eq,
                l_over_n.clone(),
            );
        }
    }

    // Demand-only availability rows.
    for (j, &w) in instance.family.iter().enumerate() {
        for v in w.nonempty_submasks().filter(|v| v.card() >= 2) {
            let mut row = RowBuilder::new();
            row.add(ix.t(v), Rat::one());
            for u in instance.enum_u_all(j, v) {
                row.add(ix.i(j, u, v), n_minus_1.clone());
            }
            for round in v.card()..=d {
                for i in v.iter() {
                    row.add(ix.j(j, v, i, round), -Rat::one());
                }
            }
            prog.add_constraint(
                format!("avail[j{},V{}]", j + 1, v),
                row.into_terms(),
                Relation::Ge,
                Rat::zero(),
            );
        }
    }

    // Round availability rows: recovered-elsewhere inventory through round m
    // must cover cancellation needs through round m+1.
    for (j, &w) in instance.family.iter().enumerate() {
        for i in w.iter() {
            let singleton = SubsetMask::singleton(i);
            for m in 1..d {
                let mut row = RowBuilder::new();
                row.add(ix.t(singleton), n_minus_1.clone());
                for round in 1..=m {
                    for u in instance.enum_u(j, singleton, round - 1) {
                        row.add(ix.i(j, u, singleton), &n_minus_1 * &n_minus_1);
                    }
                }
                for round in 2..=m {
                    for l in 1..round {
                        for v in w.without(i).submasks_of_size(l) {
                            row.add(ix.j(j, v.with(i), i, round), n_minus_1.clone());
                        }
                    }
                }
                for round in 2..=m + 1 {
                    for l in 1..round {
                        for v in w.without(i).submasks_of_size(l) {
                            for u in instance.enum_u(j, v.with(i), round - 1 - l) {
                                row.add(
                                    ix.i(j, u.with(i), v),
                                    -Rat::from_int(i64::from(n)),
                                );
                            }
                            for ip in v.iter() {
                                row.add(ix.j(j, v.with(i), ip, round), -Rat::one());
                            }
                        }
                    }
                }
                prog.add_constraint(
                    format!("round[j{},i{},m{}]", j + 1, i, m),
                    row.into_terms(),
                    Relation::Ge,
                    Rat::zero(),
                );
            }
        }
    }

    // Per-message non-reuse rows.
    for i in 1..=k {
        let mut row = RowBuilder::new();
        for mask in 1..(1u32 << k) {
            let u = SubsetMask(mask);
            if u.contains(i) {
                row.add(ix.t(u), Rat::one());
            }
        }
        if let Some(lv) = ix.l_var {
            row.add(lv, -Rat::one());
        }
        prog.add_constraint(
            format!("nonreuse[i{i}]"),
            row.into_terms(),
            Relation::Le,
            if ix.l_var.is_some() { Rat::zero() } else { l_const.clone() },
        );
    }

    // Objective: per-server total download.
    prog.objective = (0..t_count).map(|v| (v, Rat::one())).collect();

    debug_assert_eq!(ix.t_count, (1usize << k) - 1);
    debug_assert_eq!(
        ix.i_count,
        e * ((1usize << (k - d)) - 1) * (3usize.pow(d) - 2usize.pow(d))
    );
    debug_assert_eq!(
        ix.j_count,
        e * d as usize * (((d as usize + 1) << (d - 2)) - d as usize)
    );

    (prog, ix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_family, FamilyKind};
    use crate::lp::{solve_lp, verify_certificate, SolveBudget, Status};

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

    #[test]
    fn variable_and_row_counts_match_closed_forms() {
        let inst = example_instance();
        let (prog, ix) = build_general_program(&inst, &ProgramScale::Normalized);
        assert_eq!(ix.t_count, 31);
        assert_eq!(ix.i_count, 140); // E * (2^(K-D)-1)(3^D-2^D) = 4*7*5
        assert_eq!(ix.j_count, 8);
        let e = 4usize;
        let side_target = e * ((1 << 5) - (1 << 2));
        let quota = e * 2;
        let avail = e * ((1 << 2) - 2 - 1);
        let round = e * 2 * 1;
        let nonreuse = 5;
        assert_eq!(
            prog.constraints.len(),
            side_target + quota + avail + round + nonreuse
        );
        prog.validate().unwrap();
    }

    #[test]
    fn counts_match_closed_forms_on_random_shapes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let k = rng.gen_range(4..=6u32);
            let d = rng.gen_range(2..=k - 1);
            let all: Vec<SubsetMask> = SubsetMask::full(k).submasks_of_size(d).collect();
            let e = rng.gen_range(2..=all.len());
            let family: Vec<SubsetMask> = all.into_iter().take(e).collect();
            let Ok(inst) = DemandInstance::new(2, k, d, family) else {
                continue;
            };
            let (prog, ix) = build_general_program(&inst, &ProgramScale::Normalized);
            assert_eq!(ix.t_count, (1usize << k) - 1);
            assert_eq!(
                ix.i_count,
                e * ((1usize << (k - d)) - 1) * (3usize.pow(d) - 2usize.pow(d))
            );
            assert_eq!(
                ix.j_count,
                e * d as usize * (((d as usize + 1) << (d - 2)) - d as usize)
            );
            let expected_rows = e * ((1usize << k) - (1usize << d))
                + e * d as usize
                + e * ((1usize << d) - d as usize - 1)
                + e * (d as usize) * (d as usize - 1)
                + k as usize;
            assert_eq!(prog.constraints.len(), expected_rows);
        }
    }

    #[test]
    fn naive_point_is_feasible_and_quota_violations_fail() {
        let inst = example_instance();
        let l = BigInt::from(2);
        let counts = super::super::SchemeCounts::naive(&inst, l.clone());
        let (prog, ix) = build_general_program(&inst, &ProgramScale::FixedL(l));
        let mut x = vec![Rat::zero(); prog.num_vars()];
        for (u, c) in &counts.t {
            x[ix.t(*u)] = Rat::from_int(c.clone());
        }
        assert_eq!(prog.check_point(&x, true), Ok(()));

        // Violating one quota by 1 fails the exact check.
        let idx = ix.t(SubsetMask::singleton(1));
        x[idx] = &x[idx] + &Rat::one();
        assert!(prog.check_point(&x, true).is_err());
    }

    #[test]
    fn normalized_lp_on_example_gives_13_halves_total() {
        // min per-server total is 13/8 of L, i.e. normalized 13/8; the rate
        // D/(N*opt) = 2/(2*13/8) = 8/13.
        let inst = example_instance();
        let (prog, _) = build_general_program(&inst, &ProgramScale::Normalized);
        let sol = solve_lp(&prog, &SolveBudget::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert_eq!(sol.objective, Rat::ratio(13, 8));
        verify_certificate(&prog, &sol).unwrap();
    }

    #[test]
    fn partition_lp_matches_classical_rate() {
        let inst = generate_family(&FamilyKind::Partition, 2, 4, 2).unwrap();
        let (prog, _) = build_general_program(&inst, &ProgramScale::Normalized);
        let sol = solve_lp(&prog, &SolveBudget::default()).unwrap();
        // rate 2/3 -> objective D/(N*rate) = 3/2.
        assert_eq!(sol.objective, Rat::ratio(3, 2));
    }
}
