//! Exact two-phase revised simplex over rationals.
//!
//! The basis inverse is kept in product form (a file of eta vectors,
//! refactorized periodically from the basis columns). Pricing is Dantzig's
//! rule; after a run of degenerate pivots the solver switches to Bland's
//! rule, which is finite, until the objective strictly improves again. That
//! combination terminates on every input, including adversarially degenerate
//! ones.

use std::time::Instant;

use crate::rational::Rat;

use super::{Program, Relation, Sense, Solution, SolveBudget, SolveError, Status};

/// Consecutive degenerate pivots tolerated before falling back to Bland's
/// rule.
const STALL_LIMIT: u32 = 250;
/// Eta-file length that triggers refactorization.
const REFACTOR_INTERVAL: usize = 120;

struct Eta {
    row: usize,
    pivot: Rat,
    /// Non-pivot entries of the transformed entering column.
    others: Vec<(usize, Rat)>,
}

struct Tableau {
    m: usize,
    /// Sparse columns, rows ascending: structural, then slack/surplus, then
    /// artificial.
    cols: Vec<Vec<(usize, Rat)>>,
    art_start: usize,
    /// Working right-hand side (lower bounds shifted out, rows sign-flipped
    /// to be nonnegative).
    rhs: Vec<Rat>,
    /// Phase-2 cost per column.
    cost: Vec<Rat>,
    /// Column occupying each basis row.
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    /// Basic variable values, indexed by basis row.
    x_b: Vec<Rat>,
    etas: Vec<Eta>,
    /// Scratch buffers.
    work: Vec<Rat>,
}

pub(super) struct LpOutcome {
    pub status: Status,
    /// Structural variable values in the shifted space.
    pub values: Vec<Rat>,
    /// Row duals in the flipped row space.
    pub duals: Vec<Rat>,
    pub iterations: u64,
}

impl Tableau {
    fn ftran(&mut self, col: &[(usize, Rat)]) -> Vec<Rat> {
        let mut z = std::mem::take(&mut self.work);
        z.iter_mut().for_each(|v| *v = Rat::zero());
        z.resize(self.m, Rat::zero());
        for (r, v) in col {
            z[*r] = v.clone();
        }
        for eta in &self.etas {
            if z[eta.row].is_zero() {
                continue;
            }
            let zr = &z[eta.row] / &eta.pivot;
            for (i, v) in &eta.others {
                z[*i] -= &(v * &zr);
            }
            z[eta.row] = zr;
        }
        self.work = Vec::new();
        z
    }

    /// Solve `y B = c` for a dense cost-by-row vector `c`.
    fn btran(&self, mut y: Vec<Rat>) -> Vec<Rat> {
        for eta in self.etas.iter().rev() {
            let mut acc = std::mem::replace(&mut y[eta.row], Rat::zero());
            for (i, v) in &eta.others {
                if !y[*i].is_zero() {
                    acc -= &(&y[*i] * v);
                }
            }
            y[eta.row] = &acc / &eta.pivot;
        }
        y
    }

    fn column_dot(&self, y: &[Rat], col: usize) -> Rat {
        let mut acc = Rat::zero();
        for (r, v) in &self.cols[col] {
            if !y[*r].is_zero() {
                acc += &(&y[*r] * v);
            }
        }
        acc
    }

    /// Rebuild the eta file from the current basis columns. Unit columns are
    /// pivoted first (no fill), then the rest in ascending sparsity.
    fn refactorize(&mut self) -> Result<(), SolveError> {
        self.etas.clear();
        let mut pivoted = vec![false; self.m];
        let mut assigned: Vec<Option<usize>> = vec![None; self.m];
        let basis_cols: Vec<usize> = self.basis.clone();

        let mut rest: Vec<usize> = Vec::new();
        for &c in &basis_cols {
            if self.cols[c].len() == 1 {
                let r = self.cols[c][0].0;
                if !pivoted[r] {
                    pivoted[r] = true;
                    assigned[r] = Some(c);
                    self.etas.push(Eta {
                        row: r,
                        pivot: self.cols[c][0].1.clone(),
                        others: Vec::new(),
                    });
                    continue;
                }
            }
            rest.push(c);
        }
        rest.sort_by_key(|&c| (self.cols[c].len(), c));
        for c in rest {
            let col = self.cols[c].clone();
            let w = self.ftran(&col);
            // Among unpivoted rows, prefer the smallest pivot entry.
            let mut best: Option<(u64, usize)> = None;
            for (r, v) in w.iter().enumerate() {
                if !pivoted[r] && !v.is_zero() {
                    let sz = v.bit_size();
                    if best.map_or(true, |(bs, _)| sz < bs) {
                        best = Some((sz, r));
                    }
                }
            }
            let Some((_, r)) = best else {
                return Err(SolveError::Malformed(
                    "singular basis during refactorization".into(),
                ));
            };
            pivoted[r] = true;
            assigned[r] = Some(c);
            let mut others: Vec<(usize, Rat)> = Vec::new();
            let mut pivot = Rat::zero();
            for (i, v) in w.into_iter().enumerate() {
                if v.is_zero() {
                    continue;
                }
                if i == r {
                    pivot = v;
                } else {
                    others.push((i, v));
                }
            }
            self.etas.push(Eta {
                row: r,
                pivot,
                others,
            });
        }
        for (r, a) in assigned.iter().enumerate() {
            self.basis[r] = a.expect("every row pivoted");
        }
        let rhs = self.rhs.clone();
        let entries: Vec<(usize, Rat)> = rhs
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(r, v)| (r, v.clone()))
            .collect();
        self.x_b = self.ftran(&entries);
        Ok(())
    }
}

/// Solve the LP relaxation of `program` (integrality flags ignored). The
/// returned solution is an exact optimal vertex, with duals certifying
/// optimality.
pub fn solve_lp(program: &Program, budget: &SolveBudget) -> Result<Solution, SolveError> {
    program.validate()?;
    let deadline = budget.time_limit.map(|d| Instant::now() + d);
    let out = solve_core(program, budget.max_lp_iterations, deadline)?;
    finish(program, out)
}

/// Internal entry point shared with branch-and-bound: solves and maps back
/// to the caller's variable space.
pub(super) fn solve_for_branch(
    program: &Program,
    max_iters: u64,
    deadline: Option<Instant>,
) -> Result<(Solution, u64), SolveError> {
    let out = solve_core(program, max_iters, deadline)?;
    let iters = out.iterations;
    Ok((finish(program, out)?, iters))
}

fn finish(program: &Program, out: LpOutcome) -> Result<Solution, SolveError> {
    match out.status {
        Status::Infeasible => Ok(Solution::infeasible()),
        Status::Unbounded => Ok(Solution::unbounded()),
        Status::Optimal => {
            // Shift lower bounds back in.
            let values: Vec<Rat> = out
                .values
                .iter()
                .zip(&program.vars)
                .map(|(v, def)| v + &def.lower)
                .collect();
            let objective = program.objective_value(&values);
            debug_assert_eq!(program.check_point(&values, false), Ok(()));
            Ok(Solution {
                status: Status::Optimal,
                values,
                objective,
                duals: Some(out.duals),
            })
        }
    }
}

fn solve_core(
    program: &Program,
    max_iters: u64,
    deadline: Option<Instant>,
) -> Result<LpOutcome, SolveError> {
    let m = program.constraints.len();
    let n = program.num_vars();
    let obj_sign = match program.sense {
        Sense::Min => Rat::one(),
        Sense::Max => -Rat::one(),
    };

    // Shift each variable by its lower bound and make every rhs nonnegative.
    let mut flip = vec![false; m];
    let mut rhs: Vec<Rat> = Vec::with_capacity(m);
    for (r, c) in program.constraints.iter().enumerate() {
        let mut b = c.rhs.clone();
        for (v, a) in &c.terms {
            if !program.vars[*v].lower.is_zero() {
                b -= &(a * &program.vars[*v].lower);
            }
        }
        if b.is_negative() {
            flip[r] = true;
            b = -b;
        }
        rhs.push(b);
    }

    let mut cols: Vec<Vec<(usize, Rat)>> = vec![Vec::new(); n];
    for (r, c) in program.constraints.iter().enumerate() {
        for (v, a) in &c.terms {
            if a.is_zero() {
                continue;
            }
            let a = if flip[r] { -a } else { a.clone() };
            cols[*v].push((r, a));
        }
    }
    for col in &mut cols {
        col.sort_by_key(|(r, _)| *r);
    }

    // Slack (+1) for <=, surplus (-1) for >=, none for =; in the flipped row
    // space the signs flip with the row.
    let mut cost = vec![Rat::zero(); n];
    for (v, c) in &program.objective {
        cost[*v] += &(&obj_sign * c);
    }
    let mut slack_of_row: Vec<Option<usize>> = vec![None; m];
    for (r, c) in program.constraints.iter().enumerate() {
        let sign = match c.rel {
            Relation::Le => Some(Rat::one()),
            Relation::Ge => Some(-Rat::one()),
            Relation::Eq => None,
        };
        if let Some(s) = sign {
            let s = if flip[r] { -s } else { s };
            slack_of_row[r] = Some(cols.len());
            cols.push(vec![(r, s)]);
            cost.push(Rat::zero());
        }
    }
    let art_start = cols.len();

    // Initial basis: the slack when it can sit at +rhs, otherwise an
    // artificial unit column.
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    let mut phase1_cost: Vec<Rat> = vec![Rat::zero(); cols.len()];
    for r in 0..m {
        let slack_ok = matches!(
            slack_of_row[r].map(|s| cols[s][0].1.is_positive()),
            Some(true)
        );
        if slack_ok {
            basis.push(slack_of_row[r].unwrap());
        } else {
            let a = cols.len();
            cols.push(vec![(r, Rat::one())]);
            cost.push(Rat::zero());
            phase1_cost.push(Rat::one());
            basis.push(a);
        }
    }

    let total_cols = cols.len();
    let mut in_basis = vec![false; total_cols];
    for &b in &basis {
        in_basis[b] = true;
    }

    let mut t = Tableau {
        m,
        cols,
        art_start,
        rhs,
        cost,
        basis,
        in_basis,
        x_b: Vec::new(),
        etas: Vec::new(),
        work: Vec::new(),
    };
    t.refactorize()?;

    let mut iterations: u64 = 0;
    let needs_phase1 = t.basis.iter().any(|&c| c >= t.art_start);
    if needs_phase1 {
        phase1_cost.resize(total_cols, Rat::zero());
        let status = run_phase(&mut t, &phase1_cost, true, max_iters, &mut iterations, deadline)?;
        debug_assert_eq!(status, Status::Optimal, "phase 1 is bounded below by 0");
        let p1_obj: Rat = t
            .basis
            .iter()
            .zip(&t.x_b)
            .filter(|(c, _)| **c >= t.art_start)
            .fold(Rat::zero(), |acc, (_, v)| acc + v);
        if !p1_obj.is_zero() {
            return Ok(LpOutcome {
                status: Status::Infeasible,
                values: Vec::new(),
                duals: Vec::new(),
                iterations,
            });
        }
    }

    let cost2 = t.cost.clone();
    let status = run_phase(&mut t, &cost2, false, max_iters, &mut iterations, deadline)?;
    if status == Status::Unbounded {
        return Ok(LpOutcome {
            status,
            values: Vec::new(),
            duals: Vec::new(),
            iterations,
        });
    }

    // Extract primal values (shifted space) and row duals.
    let mut values = vec![Rat::zero(); n];
    for (r, &c) in t.basis.iter().enumerate() {
        if c < n {
            values[c] = t.x_b[r].clone();
        }
    }
    let mut cb = vec![Rat::zero(); m];
    for (r, &c) in t.basis.iter().enumerate() {
        cb[r] = cost2[c].clone();
    }
    let y = t.btran(cb);
    let duals: Vec<Rat> = y
        .into_iter()
        .enumerate()
        .map(|(r, v)| {
            let v = if flip[r] { -v } else { v };
            &obj_sign * &v
        })
        .collect();

    Ok(LpOutcome {
        status: Status::Optimal,
        values,
        duals,
        iterations,
    })
}

fn run_phase(
    t: &mut Tableau,
    cost: &[Rat],
    phase1: bool,
    max_iters: u64,
    iterations: &mut u64,
    deadline: Option<Instant>,
) -> Result<Status, SolveError> {
    let mut stall: u32 = 0;
    let mut bland = false;
    loop {
        if *iterations >= max_iters {
            return Err(SolveError::BudgetExceeded {
                nodes: 0,
                lp_iterations: *iterations,
                best_bound: None,
                incumbent_objective: None,
            });
        }
        if let Some(d) = deadline {
            if *iterations % 64 == 0 && Instant::now() > d {
                return Err(SolveError::BudgetExceeded {
                    nodes: 0,
                    lp_iterations: *iterations,
                    best_bound: None,
                    incumbent_objective: None,
                });
            }
        }
        *iterations += 1;

        let mut cb = vec![Rat::zero(); t.m];
        for (r, &c) in t.basis.iter().enumerate() {
            cb[r] = cost[c].clone();
        }
        let y = t.btran(cb);

        // Entering column: artificials never re-enter; in phase 2, columns
        // beyond art_start are excluded entirely.
        let mut entering: Option<(usize, Rat)> = None;
        for j in 0..t.art_start {
            if t.in_basis[j] {
                continue;
            }
            let d = &cost[j] - &t.column_dot(&y, j);
            if d.is_negative() {
                if bland {
                    entering = Some((j, d));
                    break;
                }
                match &entering {
                    Some((_, best)) if d >= *best => {}
                    _ => entering = Some((j, d)),
                }
            }
        }
        let Some((q, dq)) = entering else {
            return Ok(Status::Optimal);
        };

        let col = t.cols[q].clone();
        let w = t.ftran(&col);

        // Ratio test. Artificials pinned at zero leave as soon as the
        // entering column touches their row, in either direction.
        let mut leave: Option<(Rat, usize)> = None;
        for r in 0..t.m {
            if w[r].is_zero() {
                continue;
            }
            let basic_is_art = t.basis[r] >= t.art_start;
            let candidate = if w[r].is_positive() {
                Some(&t.x_b[r] / &w[r])
            } else if basic_is_art && !phase1 {
                // Keep finished artificials at exactly zero.
                debug_assert!(t.x_b[r].is_zero());
                Some(Rat::zero())
            } else {
                None
            };
            let Some(ratio) = candidate else { continue };
            let better = match &leave {
                None => true,
                Some((best, br)) => {
                    ratio < *best
                        || (ratio == *best && {
                            let (cur, old) = (t.basis[r], t.basis[*br]);
                            let cur_art = cur >= t.art_start;
                            let old_art = old >= t.art_start;
                            // Prefer kicking artificials, then smallest id.
                            cur_art && !old_art || (cur_art == old_art && cur < old)
                        })
                }
            };
            if better {
                leave = Some((ratio, r));
            }
        }
        let Some((theta, r)) = leave else {
            return if phase1 {
                Err(SolveError::Malformed(
                    "phase-1 objective unbounded below; inconsistent internal state".into(),
                ))
            } else {
                Ok(Status::Unbounded)
            };
        };

        // Pivot: update basic values, swap basis, append an eta.
        let degenerate = theta.is_zero();
        if !degenerate {
            for i in 0..t.m {
                if !w[i].is_zero() && i != r {
                    t.x_b[i] -= &(&w[i] * &theta);
                }
            }
        }
        t.x_b[r] = theta;
        let leaving = t.basis[r];
        t.in_basis[leaving] = false;
        t.in_basis[q] = true;
        t.basis[r] = q;

        let mut others = Vec::new();
        let mut pivot = Rat::zero();
        for (i, v) in w.into_iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            if i == r {
                pivot = v;
            } else {
                others.push((i, v));
            }
        }
        t.etas.push(Eta {
            row: r,
            pivot,
            others,
        });
        if t.etas.len() >= t.m + REFACTOR_INTERVAL {
            t.refactorize()?;
        }

        // A degenerate streak flips us to Bland's finite rule; any strict
        // improvement flips back to Dantzig.
        let improving = !degenerate && dq.is_negative();
        if improving {
            stall = 0;
            bland = false;
        } else {
            stall += 1;
            if stall > STALL_LIMIT {
                bland = true;
            }
        }
    }
}
