//! Two-stage optimization over the general program.
//!
//! Stage one maximizes the retrieval rate: in variables normalized by `L`
//! the per-server total download is linear, so an exact LP gives the best
//! rate directly, and the optimal vertex lifts to an integral scheme at
//! `L = lcm(denominators, N)`.
//!
//! Stage two minimizes the subpacketization at that rate: candidate values
//! of `L` step over multiples of `lcm(L_lower, N)` (the two divisibility
//! requirements) up to the lift from stage one, solving a fixed-`L`
//! feasibility ILP at each step and returning the first feasible candidate.
//! A single free-`L` ILP formulation is kept available for cross-checking.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;

use crate::converse::subpacketization_lower_bound;
use crate::instance::DemandInstance;
use crate::lp::{
    solve_ilp_seeded, solve_lp, Program, Relation, Solution, SolveBudget, SolveError, Status,
};
use crate::rational::{lift_to_integral, Rat};

use super::check::{check_scheme_counts, CountsViolation};
use super::general::{build_general_program, GeneralIndexing, ProgramScale, VarKind};
use super::SchemeCounts;

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error("solver: {0}")]
    Solve(#[from] SolveError),
    #[error(
        "rate LP reported {0:?}; the naive scheme is always feasible, so the \
         program builder is broken"
    )]
    UnexpectedLpStatus(Status),
    #[error("optimized rate {rate} exceeds the converse bound {bound}")]
    RateAboveConverse { rate: Rat, bound: Rat },
    #[error("optimized rate {rate} falls below the naive rate {naive}")]
    RateBelowNaive { rate: Rat, naive: Rat },
    #[error("emitted counts fail the independent re-check: {0}")]
    CountsRejected(#[from] CountsViolation),
    #[error("converse: {0}")]
    Converse(#[from] crate::converse::ConverseError),
    #[error(
        "min-L search exhausted its budget at candidate L = {candidate} \
         (verified infeasible below; lift upper bound {upper})"
    )]
    MinLBudget { candidate: BigInt, upper: BigInt },
    #[error("internal: no feasible L up to the lift bound {0}; lift counts should be feasible")]
    MinLInconsistent(BigInt),
}

/// Outcome of the rate stage.
#[derive(Clone, Debug)]
pub struct RateOptimum {
    /// Best achievable rate within the balanced {0,1}-linear class.
    pub rate: Rat,
    /// Optimal normalized per-server total `min Σ_U T_U / L`.
    pub normalized_total: Rat,
    /// Integral scheme from lifting the LP vertex; its `L` is an upper bound
    /// for the min-subpacketization stage, not the minimum.
    pub counts: SchemeCounts,
    pub lp_iterations: u64,
}

/// Maximize the retrieval rate. When `upper_bound` (the converse) is given,
/// the result is verified against it; the naive rate `D/K` is always
/// enforced as a floor.
pub fn maximize_rate(
    instance: &DemandInstance,
    budget: &SolveBudget,
    upper_bound: Option<&Rat>,
) -> Result<RateOptimum, OptimizeError> {
    let (prog, ix) = build_general_program(instance, &ProgramScale::Normalized);
    let sol = solve_lp(&prog, budget)?;
    if sol.status != Status::Optimal {
        return Err(OptimizeError::UnexpectedLpStatus(sol.status));
    }
    let d = Rat::from_int(i64::from(instance.demand_size));
    let n = Rat::from_int(i64::from(instance.servers));
    let rate = &d / &(&n * &sol.objective);

    let naive = &d / &Rat::from_int(i64::from(instance.messages));
    if rate < naive {
        return Err(OptimizeError::RateBelowNaive { rate, naive });
    }
    if let Some(bound) = upper_bound {
        if &rate > bound {
            return Err(OptimizeError::RateAboveConverse {
                rate,
                bound: bound.clone(),
            });
        }
    }

    let counts = lift_counts(instance, &ix, &sol)?;
    debug_assert_eq!(counts.rate(), rate);
    Ok(RateOptimum {
        rate,
        normalized_total: sol.objective,
        counts,
        lp_iterations: 0,
    })
}

/// Scale a normalized LP vertex to the smallest integral scheme: multiply by
/// the lcm of all value denominators, then by whatever factor makes `L`
/// divisible by `N`.
fn lift_counts(
    instance: &DemandInstance,
    ix: &GeneralIndexing,
    sol: &Solution,
) -> Result<SchemeCounts, OptimizeError> {
    let (multiplier, _) = lift_to_integral(&sol.values);
    let l = multiplier.lcm(&BigInt::from(instance.servers));
    let scale = Rat::from_int(l.clone());
    let mut counts = SchemeCounts::zero(instance);
    counts.l = l;
    for (var, value) in sol.values.iter().enumerate() {
        if value.is_zero() {
            continue;
        }
        let scaled = value * &scale;
        debug_assert!(scaled.is_integer());
        let scaled = scaled.numer().clone();
        match ix.kind(var) {
            VarKind::T(u) => {
                counts.t.insert(u, scaled);
            }
            VarKind::I { j, side, new } => {
                counts.i[j].insert((side, new), scaled);
            }
            VarKind::J {
                j,
                dset,
                recover,
                round,
            } => {
                counts.j[j].insert((dset, recover, round), scaled);
            }
            VarKind::L => {}
        }
    }
    check_scheme_counts(instance, &counts)?;
    Ok(counts)
}

/// Outcome of the min-subpacketization stage.
#[derive(Clone, Debug)]
pub struct MinSubpackOutcome {
    pub l_star: BigInt,
    pub l_lower_bound: BigInt,
    pub counts: SchemeCounts,
    /// Candidate values of `L` proved infeasible before the winner.
    pub rejected: Vec<String>,
}

/// Minimum subpacketization achieving `rate`: iterate candidate `L` over
/// multiples of `lcm(L_lower, N)` up to `upper_hint` (the lift from the rate
/// stage), solving a fixed-`L` feasibility ILP at each.
pub fn minimize_subpacketization(
    instance: &DemandInstance,
    rate: &Rat,
    upper_hint: &SchemeCounts,
    budget: &SolveBudget,
) -> Result<MinSubpackOutcome, OptimizeError> {
    // The hint must itself be a feasible scheme at the pinned rate; it then
    // witnesses termination of the candidate scan.
    check_scheme_counts(instance, upper_hint)?;
    if upper_hint.rate() != *rate {
        return Err(OptimizeError::RateAboveConverse {
            rate: upper_hint.rate(),
            bound: rate.clone(),
        });
    }
    let lb = subpacketization_lower_bound(instance.servers, instance.demand_size, rate)?;
    let step = lb.value.lcm(&BigInt::from(instance.servers));
    let upper = upper_hint.l.clone();
    debug_assert!((&upper % &step).is_zero());

    let mut rejected = Vec::new();
    let mut candidate = step.clone();
    while candidate <= upper {
        if candidate == upper {
            // The lifted counts witness feasibility at the upper bound.
            return Ok(MinSubpackOutcome {
                l_star: upper,
                l_lower_bound: lb.value,
                counts: upper_hint.clone(),
                rejected,
            });
        }
        let (prog, ix) = fixed_l_program(instance, rate, &candidate);
        let seed = naive_seed_if_feasible(instance, rate, &candidate, &prog, &ix);
        let outcome = solve_ilp_seeded(&prog, budget, seed.as_deref());
        match outcome {
            Ok(sol) if sol.status == Status::Optimal => {
                let counts = extract_counts(instance, &ix, &candidate, &sol.values)?;
                return Ok(MinSubpackOutcome {
                    l_star: candidate,
                    l_lower_bound: lb.value,
                    counts,
                    rejected,
                });
            }
            Ok(sol) if sol.status == Status::Infeasible => {
                rejected.push(candidate.to_string());
                candidate += &step;
            }
            Ok(sol) => return Err(OptimizeError::UnexpectedLpStatus(sol.status)),
            Err(SolveError::BudgetExceeded { .. }) => {
                return Err(OptimizeError::MinLBudget { candidate, upper })
            }
            Err(e) => return Err(e.into()),
        }
    }
    Err(OptimizeError::MinLInconsistent(upper))
}

/// Single free-`L` ILP minimizing `L` directly, bounded by the lift value.
/// Cross-check path for [`minimize_subpacketization`].
pub fn minimize_subpacketization_free_l(
    instance: &DemandInstance,
    rate: &Rat,
    upper_hint: &SchemeCounts,
    budget: &SolveBudget,
) -> Result<MinSubpackOutcome, OptimizeError> {
    let lb = subpacketization_lower_bound(instance.servers, instance.demand_size, rate)?;
    let (mut prog, ix) = build_general_program(instance, &ProgramScale::FreeL);
    let l_var = ix.l_var.expect("free-L program has an L variable");

    // Rate equality: Σ_U T_U = (D·β / (N·α)) · L.
    let coef = rate_equality_coefficient(instance, rate);
    let mut terms: Vec<(usize, Rat)> = (0..ix.t_count).map(|v| (v, Rat::one())).collect();
    terms.push((l_var, -coef));
    prog.add_constraint("rate_equality", terms, Relation::Eq, Rat::zero());
    prog.add_constraint(
        "l_upper",
        vec![(l_var, Rat::one())],
        Relation::Le,
        Rat::from_int(upper_hint.l.clone()),
    );
    prog.objective = vec![(l_var, Rat::one())];

    // Seed with the lifted scheme.
    let mut seed = vec![Rat::zero(); prog.num_vars()];
    fill_from_counts(&ix, upper_hint, &mut seed);
    seed[l_var] = Rat::from_int(upper_hint.l.clone());

    let sol = solve_ilp_seeded(&prog, budget, Some(&seed))?;
    if sol.status != Status::Optimal {
        return Err(OptimizeError::UnexpectedLpStatus(sol.status));
    }
    let l_star = sol.values[l_var].numer().clone();
    let counts = extract_counts(instance, &ix, &l_star, &sol.values)?;
    Ok(MinSubpackOutcome {
        l_star,
        l_lower_bound: lb.value,
        counts,
        rejected: Vec::new(),
    })
}

/// `D·β/(N·α)` for `rate = α/β`: per-server download per unit of `L`.
fn rate_equality_coefficient(instance: &DemandInstance, rate: &Rat) -> Rat {
    &Rat::from_int(i64::from(instance.demand_size)) / &(&Rat::from_int(i64::from(instance.servers)) * rate)
}

fn fixed_l_program(
    instance: &DemandInstance,
    rate: &Rat,
    l: &BigInt,
) -> (Program, GeneralIndexing) {
    let (mut prog, ix) = build_general_program(instance, &ProgramScale::FixedL(l.clone()));
    let total = &rate_equality_coefficient(instance, rate) * &Rat::from_int(l.clone());
    debug_assert!(total.is_integer());
    let terms: Vec<(usize, Rat)> = (0..ix.t_count).map(|v| (v, Rat::one())).collect();
    prog.add_constraint("rate_equality", terms, Relation::Eq, total);
    (prog, ix)
}

/// The naive scheme seeds the ILP whenever it satisfies the pinned rate
/// (exactly when `rate = D/K`).
fn naive_seed_if_feasible(
    instance: &DemandInstance,
    rate: &Rat,
    l: &BigInt,
    prog: &Program,
    ix: &GeneralIndexing,
) -> Option<Vec<Rat>> {
    let naive_rate = Rat::ratio(
        i64::from(instance.demand_size),
        i64::from(instance.messages),
    );
    if *rate != naive_rate {
        return None;
    }
    let counts = SchemeCounts::naive(instance, l.clone());
    let mut x = vec![Rat::zero(); prog.num_vars()];
    fill_from_counts(ix, &counts, &mut x);
    prog.check_point(&x, true).ok().map(|_| x)
}

fn fill_from_counts(ix: &GeneralIndexing, counts: &SchemeCounts, x: &mut [Rat]) {
    for (u, c) in &counts.t {
        x[ix.t(*u)] = Rat::from_int(c.clone());
    }
    for (j, map) in counts.i.iter().enumerate() {
        for ((u, v), c) in map {
            x[ix.i(j, *u, *v)] = Rat::from_int(c.clone());
        }
    }
    for (j, map) in counts.j.iter().enumerate() {
        for ((v, i, k), c) in map {
            x[ix.j(j, *v, *i, *k)] = Rat::from_int(c.clone());
        }
    }
}

fn extract_counts(
    instance: &DemandInstance,
    ix: &GeneralIndexing,
    l: &BigInt,
    values: &[Rat],
) -> Result<SchemeCounts, OptimizeError> {
    let mut counts = SchemeCounts::zero(instance);
    counts.l = l.clone();
    for (var, value) in values.iter().enumerate() {
        if value.is_zero() || ix.l_var == Some(var) {
            continue;
        }
        debug_assert!(value.is_integer());
        let v = value.numer().clone();
        match ix.kind(var) {
            VarKind::T(u) => {
                counts.t.insert(u, v);
            }
            VarKind::I { j, side, new } => {
                counts.i[j].insert((side, new), v);
            }
            VarKind::J {
                j,
                dset,
                recover,
                round,
            } => {
                counts.j[j].insert((dset, recover, round), v);
            }
            VarKind::L => {}
        }
    }
    counts.prune_zeros();
    check_scheme_counts(instance, &counts)?;
    Ok(counts)
}

/// Per-server total download `D·β·L/(N·α)` pinned by the rate equality;
/// integral exactly when `L` is a multiple of the subpacketization lower
/// bound.
pub fn per_server_total(instance: &DemandInstance, rate: &Rat, l: &BigInt) -> Rat {
    &rate_equality_coefficient(instance, rate) * &Rat::from_int(l.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_family, DemandInstance, FamilyKind};
    use crate::subset::SubsetMask;

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
    fn example_rate_is_8_13() {
        let opt = maximize_rate(&example_instance(), &SolveBudget::default(), None).unwrap();
        assert_eq!(opt.rate, Rat::ratio(8, 13));
        assert_eq!(opt.counts.rate(), Rat::ratio(8, 13));
        assert!((&opt.counts.l % BigInt::from(2)).is_zero());
    }

    #[test]
    fn example_min_l_is_8_with_total_13() {
        let inst = example_instance();
        let opt = maximize_rate(&inst, &SolveBudget::default(), None).unwrap();
        let min = minimize_subpacketization(&inst, &opt.rate, &opt.counts, &SolveBudget::default())
            .unwrap();
        assert_eq!(min.l_star, BigInt::from(8));
        assert_eq!(min.l_lower_bound, BigInt::from(8));
        assert_eq!(min.counts.t_total(), BigInt::from(13));
        assert_eq!(min.counts.rate(), Rat::ratio(8, 13));
    }

    #[test]
    fn partition_rate_matches_converse() {
        let inst = generate_family(&FamilyKind::Partition, 2, 4, 2).unwrap();
        let report =
            crate::converse::rate_upper_bound(&inst, &crate::converse::SearchBudget::default())
                .unwrap();
        let opt = maximize_rate(&inst, &SolveBudget::default(), Some(&report.rate_upper_bound))
            .unwrap();
        assert_eq!(opt.rate, Rat::ratio(2, 3));
        assert_eq!(opt.rate, report.rate_upper_bound);
    }

    #[test]
    fn naive_rate_min_l_is_n() {
        // At rate D/K the naive counts are feasible with L = N.
        let inst = example_instance();
        let rate = Rat::ratio(2, 5);
        let hint = SchemeCounts::naive(&inst, BigInt::from(2));
        let min =
            minimize_subpacketization(&inst, &rate, &hint, &SolveBudget::default()).unwrap();
        assert_eq!(min.l_star, BigInt::from(2));
    }

    #[test]
    fn below_lower_bound_is_infeasible() {
        // At rate 8/13 the per-server total D·β·L/(N·α) is integral only for
        // multiples of 8; a fixed-L program at L = 4 has a fractional rhs.
        let inst = example_instance();
        let total = per_server_total(&inst, &Rat::ratio(8, 13), &BigInt::from(4));
        assert!(!total.is_integer());
    }

    #[test]
    fn free_l_cross_check_on_example() {
        let inst = example_instance();
        let opt = maximize_rate(&inst, &SolveBudget::default(), None).unwrap();
        let min =
            minimize_subpacketization_free_l(&inst, &opt.rate, &opt.counts, &SolveBudget::default())
                .unwrap();
        assert_eq!(min.l_star, BigInt::from(8));
        assert_eq!(min.counts.t_total(), BigInt::from(13));
    }
}
