use std::fmt::Write;

use crate::program::{MixedProgram, RowSense};

fn term_list(out: &mut String, coeffs: &[f64], names: &[String]) {
    let mut first = true;
    for (a, name) in coeffs.iter().zip(names) {
        if *a == 0.0 {
            continue;
        }
        let sign = if *a < 0.0 {
            "-"
        } else if first {
            ""
        } else {
            "+"
        };
        if first {
            let _ = write!(out, " {sign}{} {name}", a.abs());
        } else {
            let _ = write!(out, " {sign} {} {name}", a.abs());
        }
        first = false;
    }
    if first {
        out.push_str(" 0");
    }
}

/// Renders a program in CPLEX LP text format for cross-checking with external
/// solvers. Variables are named `x0, x1, ...` unless `names` is given.
pub fn write_lp(mp: &MixedProgram, names: Option<&[String]>) -> String {
    let n = mp.lp.num_vars();
    let names: Vec<String> = match names {
        Some(ns) if ns.len() == n => ns.to_vec(),
        _ => (0..n).map(|j| format!("x{j}")).collect(),
    };
    let lp = &mp.lp;
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    term_list(&mut out, &lp.objective, &names);
    out.push_str("\nSubject To\n");
    for (i, row) in lp.constraints.iter().enumerate() {
        let _ = write!(out, " c{i}:");
        term_list(&mut out, &row.coeffs, &names);
        let op = match row.sense {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", row.rhs);
    }
    out.push_str("Bounds\n");
    for (j, name) in names.iter().enumerate() {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        let _ = match (l.is_finite(), u.is_finite()) {
            (true, true) => writeln!(out, " {l} <= {name} <= {u}"),
            (true, false) => writeln!(out, " {name} >= {l}"),
            (false, true) => writeln!(out, " -inf <= {name} <= {u}"),
            (false, false) => writeln!(out, " {name} free"),
        };
    }
    if !mp.integers.is_empty() {
        out.push_str("General\n");
        let mut ints = mp.integers.clone();
        ints.sort_unstable();
        for j in ints {
            let _ = writeln!(out, " {}", names[j]);
        }
    }
    out.push_str("End\n");
    out
}
