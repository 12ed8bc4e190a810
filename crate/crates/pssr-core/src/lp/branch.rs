//! Branch-and-bound over exact LP relaxations.
//!
//! Branching is on the most-fractional integer variable; the search is
//! depth-first with periodic best-bound restarts. Optimality is proved by
//! bound exhaustion, and budget exhaustion is reported with the verified
//! interval rather than silently truncated.

use std::time::Instant;

use num_bigint::BigInt;

use crate::rational::Rat;

use super::simplex::solve_for_branch;
use super::{Program, Relation, Solution, SolveBudget, SolveError, Status};

/// How often the node selector jumps to the best-bound node instead of the
/// deepest one.
const BEST_BOUND_STRIDE: u64 = 32;

#[derive(Clone)]
struct Node {
    /// Extra bound rows accumulated on the path from the root:
    /// `(var, relation, integer rhs)` with relation `Le` or `Ge`.
    bounds: Vec<(usize, Relation, BigInt)>,
    /// LP objective of the parent (a valid bound for this node), in the
    /// internal Min sense.
    bound: Option<Rat>,
}

/// Exact integer optimum of `program` via branch-and-bound. Every variable
/// flagged `integral` is driven to an integer; the rest stay continuous.
pub fn solve_ilp(program: &Program, budget: &SolveBudget) -> Result<Solution, SolveError> {
    solve_ilp_seeded(program, budget, None)
}

/// [`solve_ilp`] with an optional caller-supplied incumbent (a feasible
/// integral point) used to seed the bound.
pub fn solve_ilp_seeded(
    program: &Program,
    budget: &SolveBudget,
    seed: Option<&[Rat]>,
) -> Result<Solution, SolveError> {
    program.validate()?;
    let deadline = budget.time_limit.map(|d| Instant::now() + d);
    let minimize = matches!(program.sense, super::Sense::Min);
    // Internally everything is a minimization.
    let to_min = |r: &Rat| if minimize { r.clone() } else { -r };

    let mut incumbent: Option<(Rat, Vec<Rat>)> = None;
    if let Some(x) = seed {
        program
            .check_point(x, true)
            .map_err(SolveError::BadIncumbent)?;
        incumbent = Some((to_min(&program.objective_value(x)), x.to_vec()));
    }

    let mut lp_iterations: u64 = 0;
    let mut nodes: u64 = 0;
    let mut selections: u64 = 0;
    let mut pool: Vec<Node> = vec![Node {
        bounds: Vec::new(),
        bound: None,
    }];

    let budget_error = |nodes, lp_iterations, pool: &[Node], inc: &Option<(Rat, Vec<Rat>)>| {
        SolveError::BudgetExceeded {
            nodes,
            lp_iterations,
            best_bound: pool.iter().filter_map(|n| n.bound.clone()).min(),
            incumbent_objective: inc.as_ref().map(|(o, _)| o.clone()),
        }
    };

    while let Some(node) = select_node(&mut pool, &mut selections) {
        if nodes >= budget.max_nodes || lp_iterations >= budget.max_lp_iterations {
            pool.push(node);
            return Err(budget_error(nodes, lp_iterations, &pool, &incumbent));
        }
        if let Some(d) = deadline {
            if Instant::now() > d {
                pool.push(node);
                return Err(budget_error(nodes, lp_iterations, &pool, &incumbent));
            }
        }
        nodes += 1;

        // Fathom by bound before paying for the LP.
        if let (Some(b), Some((inc, _))) = (&node.bound, &incumbent) {
            if b >= inc {
                continue;
            }
        }

        let relaxed = with_bounds(program, &node.bounds);
        let (sol, iters) = solve_for_branch(
            &relaxed,
            budget.max_lp_iterations - lp_iterations,
            deadline,
        )?;
        lp_iterations += iters;
        match sol.status {
            Status::Infeasible => continue,
            Status::Unbounded => {
                if node.bounds.is_empty() && incumbent.is_none() {
                    return Err(SolveError::UnboundedRelaxation);
                }
                // With an incumbent we keep branching; the budget is the
                // backstop if bounds never close.
                if incumbent.is_none() {
                    return Err(SolveError::UnboundedRelaxation);
                }
            }
            Status::Optimal => {
                let bound = to_min(&sol.objective);
                if let Some((inc, _)) = &incumbent {
                    if &bound >= inc {
                        continue;
                    }
                }
                match most_fractional(program, &sol.values) {
                    None => {
                        // Integral: new incumbent (strictly better than any
                        // previous one by the bound test above).
                        incumbent = Some((bound, sol.values));
                        continue;
                    }
                    Some(v) => {
                        let val = &sol.values[v];
                        let fl = val.floor_int();
                        let up = Node {
                            bounds: node
                                .bounds
                                .iter()
                                .cloned()
                                .chain([(v, Relation::Ge, &fl + 1)])
                                .collect(),
                            bound: Some(bound.clone()),
                        };
                        let down = Node {
                            bounds: node
                                .bounds
                                .iter()
                                .cloned()
                                .chain([(v, Relation::Le, fl)])
                                .collect(),
                            bound: Some(bound),
                        };
                        // DFS explores the rounded-down child first.
                        pool.push(up);
                        pool.push(down);
                    }
                }
            }
        }
    }

    match incumbent {
        None => Ok(Solution::infeasible()),
        Some((_, values)) => {
            let objective = program.objective_value(&values);
            debug_assert_eq!(program.check_point(&values, true), Ok(()));
            Ok(Solution {
                status: Status::Optimal,
                values,
                objective,
                duals: None,
            })
        }
    }
}

fn select_node(pool: &mut Vec<Node>, selections: &mut u64) -> Option<Node> {
    if pool.is_empty() {
        return None;
    }
    *selections += 1;
    if *selections % BEST_BOUND_STRIDE == 0 {
        let mut best = pool.len() - 1;
        for (i, n) in pool.iter().enumerate() {
            if let (Some(b), bb) = (&n.bound, &pool[best].bound) {
                if bb.as_ref().map_or(true, |x| b < x) {
                    best = i;
                }
            }
        }
        return Some(pool.swap_remove(best));
    }
    pool.pop()
}

fn with_bounds(program: &Program, bounds: &[(usize, Relation, BigInt)]) -> Program {
    let mut p = program.clone();
    for (v, rel, b) in bounds {
        p.add_constraint(
            format!("branch_{}", p.vars[*v].name),
            vec![(*v, Rat::one())],
            *rel,
            Rat::from_int(b.clone()),
        );
    }
    p
}

fn most_fractional(program: &Program, x: &[Rat]) -> Option<usize> {
    let mut best: Option<(Rat, usize)> = None;
    for (v, def) in program.vars.iter().enumerate() {
        if !def.integral || x[v].is_integer() {
            continue;
        }
        let d = x[v].frac_distance();
        match &best {
            Some((bd, _)) if d <= *bd => {}
            _ => best = Some((d, v)),
        }
    }
    best.map(|(_, v)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Sense;
    use num_traits::ToPrimitive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rat(n: i64, d: i64) -> Rat {
        Rat::ratio(n, d)
    }

    #[test]
    fn ceiling_of_fractional_bound() {
        let mut p = Program::new(Sense::Min);
        let x = p.add_var("x", Rat::zero(), true);
        p.add_constraint("lb", vec![(x, Rat::one())], Relation::Ge, rat(3, 2));
        p.objective = vec![(x, Rat::one())];
        let s = solve_ilp(&p, &SolveBudget::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.objective, rat(2, 1));
    }

    #[test]
    fn two_var_integer_optimum() {
        // min 2x+3y s.t. x+y >= 5/2 -> (3,0) with objective 6.
        let mut p = Program::new(Sense::Min);
        let x = p.add_var("x", Rat::zero(), true);
        let y = p.add_var("y", Rat::zero(), true);
        p.add_constraint(
            "c",
            vec![(x, Rat::one()), (y, Rat::one())],
            Relation::Ge,
            rat(5, 2),
        );
        p.objective = vec![(x, rat(2, 1)), (y, rat(3, 1))];
        let s = solve_ilp(&p, &SolveBudget::default()).unwrap();
        assert_eq!(s.objective, rat(6, 1));
        assert_eq!(s.values, vec![rat(3, 1), Rat::zero()]);
    }

    #[test]
    fn integral_infeasibility_detected() {
        // x = 1/2 with 0 <= x <= 1 integral.
        let mut p = Program::new(Sense::Min);
        let x = p.add_var("x", Rat::zero(), true);
        p.add_constraint("fix", vec![(x, Rat::one())], Relation::Eq, rat(1, 2));
        p.add_constraint("ub", vec![(x, Rat::one())], Relation::Le, Rat::one());
        p.objective = vec![(x, Rat::one())];
        let s = solve_ilp(&p, &SolveBudget::default()).unwrap();
        assert_eq!(s.status, Status::Infeasible);
    }

    #[test]
    fn unbounded_relaxation_reported() {
        let mut p = Program::new(Sense::Max);
        let x = p.add_var("x", Rat::zero(), true);
        p.add_constraint("lb", vec![(x, Rat::one())], Relation::Ge, Rat::zero());
        p.objective = vec![(x, Rat::one())];
        assert!(matches!(
            solve_ilp(&p, &SolveBudget::default()),
            Err(SolveError::UnboundedRelaxation)
        ));
    }

    #[test]
    fn node_budget_is_reported() {
        let mut p = Program::new(Sense::Min);
        let vars: Vec<_> = (0..6)
            .map(|i| p.add_var(format!("x{i}"), Rat::zero(), true))
            .collect();
        // Knapsack-ish equality with awkward coefficients.
        p.add_constraint(
            "c",
            vars.iter().map(|&v| (v, rat(2, 3))).collect(),
            Relation::Eq,
            rat(7, 3),
        );
        for &v in &vars {
            p.add_constraint("ub", vec![(v, Rat::one())], Relation::Le, rat(8, 1));
        }
        p.objective = vars.iter().map(|&v| (v, Rat::one())).collect();
        let tight = SolveBudget {
            max_nodes: 1,
            ..SolveBudget::default()
        };
        assert!(matches!(
            solve_ilp(&p, &tight),
            Err(SolveError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn bad_seed_rejected() {
        let mut p = Program::new(Sense::Min);
        let x = p.add_var("x", Rat::zero(), true);
        p.add_constraint("lb", vec![(x, Rat::one())], Relation::Ge, rat(3, 1));
        p.objective = vec![(x, Rat::one())];
        let seed = vec![rat(1, 1)];
        assert!(matches!(
            solve_ilp_seeded(&p, &SolveBudget::default(), Some(&seed)),
            Err(SolveError::BadIncumbent(_))
        ));
    }

    /// Exhaustive lattice oracle on random small boxes: branch-and-bound
    /// must agree exactly.
    #[test]
    fn agrees_with_lattice_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for trial in 0..40 {
            let n = rng.gen_range(2..=4usize);
            let box_max = 4i64;
            let mut p = Program::new(Sense::Min);
            let vars: Vec<_> = (0..n)
                .map(|i| p.add_var(format!("x{i}"), Rat::zero(), true))
                .collect();
            for &v in &vars {
                p.add_constraint("ub", vec![(v, Rat::one())], Relation::Le, rat(box_max, 1));
            }
            let n_cons = rng.gen_range(1..=3usize);
            for c in 0..n_cons {
                let terms: Vec<_> = vars
                    .iter()
                    .map(|&v| (v, rat(rng.gen_range(-3..=3), rng.gen_range(1..=3))))
                    .filter(|(_, c)| !c.is_zero())
                    .collect();
                if terms.is_empty() {
                    continue;
                }
                let rel = match rng.gen_range(0..3) {
                    0 => Relation::Le,
                    1 => Relation::Ge,
                    _ => Relation::Eq,
                };
                p.add_constraint(
                    format!("c{c}"),
                    terms,
                    rel,
                    rat(rng.gen_range(-4..=6), rng.gen_range(1..=2)),
                );
            }
            p.objective = vars
                .iter()
                .map(|&v| (v, rat(rng.gen_range(-3..=3), 1)))
                .collect();

            // Oracle: full enumeration of the box.
            let mut best: Option<Rat> = None;
            let mut counters = vec![0i64; n];
            loop {
                let x: Vec<Rat> = counters.iter().map(|&c| rat(c, 1)).collect();
                if p.check_point(&x, true).is_ok() {
                    let obj = p.objective_value(&x);
                    if best.as_ref().map_or(true, |b| obj < *b) {
                        best = Some(obj);
                    }
                }
                let mut i = 0;
                loop {
                    if i == n {
                        break;
                    }
                    counters[i] += 1;
                    if counters[i] <= box_max {
                        break;
                    }
                    counters[i] = 0;
                    i += 1;
                }
                if i == n {
                    break;
                }
            }

            let got = solve_ilp(&p, &SolveBudget::default()).unwrap();
            match best {
                None => assert_eq!(got.status, Status::Infeasible, "trial {trial}"),
                Some(b) => {
                    assert_eq!(got.status, Status::Optimal, "trial {trial}");
                    assert_eq!(got.objective, b, "trial {trial}");
                    assert_eq!(p.check_point(&got.values, true), Ok(()));
                }
            }
        }
    }
}
