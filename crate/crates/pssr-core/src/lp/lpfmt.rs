//! Dump a program in CPLEX LP text format for cross-checking against
//! external solvers. Debug aid only.
//!
//! Rows (and the objective) are scaled by the least common multiple of their
//! coefficient denominators so the emitted file carries exact integers; the
//! objective scale factor is recorded in a comment.

use std::fmt::Write as _;

use num_traits::Zero;

use crate::rational::{lift_to_integral, Rat};

use super::{Program, Relation, Sense};

pub fn write_lp_format(p: &Program) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ exact rational program, rows scaled to integers");

    let sanitize = |s: &str| -> String {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect()
    };

    let row_text = |terms: &[(usize, Rat)]| -> (String, Rat) {
        let coeffs: Vec<Rat> = terms.iter().map(|(_, c)| c.clone()).collect();
        let (scale, ints) = lift_to_integral(&coeffs);
        let mut s = String::new();
        for ((v, _), i) in terms.iter().zip(&ints) {
            if i.is_zero() {
                continue;
            }
            if i.sign() == num_bigint::Sign::Minus {
                let _ = write!(s, " - {} {}", i.magnitude(), sanitize(&p.vars[*v].name));
            } else {
                let _ = write!(s, " + {} {}", i, sanitize(&p.vars[*v].name));
            }
        }
        if s.is_empty() {
            s = " 0 ".into();
        }
        (s, Rat::from_int(scale))
    };

    let (obj, obj_scale) = row_text(&p.objective);
    let _ = writeln!(out, "\\ objective scaled by {obj_scale}");
    let _ = writeln!(
        out,
        "{}",
        match p.sense {
            Sense::Min => "Minimize",
            Sense::Max => "Maximize",
        }
    );
    let _ = writeln!(out, " obj:{obj}");
    let _ = writeln!(out, "Subject To");
    for (i, c) in p.constraints.iter().enumerate() {
        let all: Vec<Rat> = c
            .terms
            .iter()
            .map(|(_, x)| x.clone())
            .chain([c.rhs.clone()])
            .collect();
        let (_, ints) = lift_to_integral(&all);
        let rhs = ints.last().unwrap().clone();
        let mut s = String::new();
        for ((v, _), iv) in c.terms.iter().zip(&ints) {
            if iv.is_zero() {
                continue;
            }
            if iv.sign() == num_bigint::Sign::Minus {
                let _ = write!(s, " - {} {}", iv.magnitude(), sanitize(&p.vars[*v].name));
            } else {
                let _ = write!(s, " + {} {}", iv, sanitize(&p.vars[*v].name));
            }
        }
        let rel = match c.rel {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let _ = writeln!(out, " r{}_{}:{} {} {}", i, sanitize(&c.name), s, rel, rhs);
    }
    let _ = writeln!(out, "Bounds");
    for v in &p.vars {
        let _ = writeln!(out, " {} >= {}", sanitize(&v.name), v.lower);
    }
    let generals: Vec<String> = p
        .vars
        .iter()
        .filter(|v| v.integral)
        .map(|v| sanitize(&v.name))
        .collect();
    if !generals.is_empty() {
        let _ = writeln!(out, "General");
        let _ = writeln!(out, " {}", generals.join(" "));
    }
    let _ = writeln!(out, "End");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emits_integer_rows() {
        let mut p = Program::new(Sense::Min);
        let x = p.add_var("x", Rat::zero(), true);
        let y = p.add_var("y", Rat::zero(), false);
        p.add_constraint(
            "half",
            vec![(x, Rat::ratio(1, 2)), (y, Rat::ratio(-2, 3))],
            Relation::Ge,
            Rat::ratio(5, 6),
        );
        p.objective = vec![(x, Rat::ratio(1, 3)), (y, Rat::one())];
        let text = write_lp_format(&p);
        assert!(text.contains("Minimize"));
        assert!(text.contains("+ 3 x - 4 y >= 5"));
        assert!(text.contains("General"));
        assert!(!text.contains('.'), "no decimals anywhere:\n{text}");
    }
}
