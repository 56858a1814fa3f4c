use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::program::{LinearProgram, MixedProgram};
use crate::simplex::solve_lp;
use crate::{LpError, Result, SolveResult, Status, INTEGRALITY_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct MilpOptions {
    /// Stop once the best open bound is within this much of the incumbent.
    pub gap_tol: f64,
    /// Largest number of integer variables accepted.
    pub max_integers: usize,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions { gap_tol: 0.0, max_integers: 64 }
    }
}

struct Node {
    bound: f64,
    seq: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    values: Vec<f64>,
}

// Min-heap on (bound, seq).
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}

/// Most fractional integer variable, ties broken by lowest index.
fn branching_var(values: &[f64], integers: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    let mut sorted = integers.to_vec();
    sorted.sort_unstable();
    for j in sorted {
        let frac = values[j] - values[j].floor();
        let dist = frac.min(1.0 - frac);
        if dist > INTEGRALITY_TOL && best.is_none_or(|(_, d)| dist > d) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

fn finish(lp: &LinearProgram, integers: &[usize], values: Vec<f64>, branches: usize) -> SolveResult {
    let mut rounded = values.clone();
    for &j in integers {
        rounded[j] = rounded[j].round();
    }
    let values = if lp.is_feasible(&rounded) { rounded } else { values };
    let objective = lp.objective_value(&values);
    SolveResult { status: Status::Optimal, values, objective, branches }
}

/// Solves a mixed-integer program by best-first branch-and-bound.
///
/// Each node is the linear relaxation with tightened bounds; the node with the
/// smallest relaxation bound is expanded first, branching on the most
/// fractional integer variable.
pub fn solve_milp(mp: &MixedProgram, opts: &MilpOptions) -> Result<SolveResult> {
    mp.validate()?;
    if mp.integers.len() > opts.max_integers {
        return Err(LpError::Capacity { count: mp.integers.len(), cap: opts.max_integers });
    }
    let mut lp = mp.lp.clone();
    // Integer variables can have their bounds tightened to integers up front.
    for &j in &mp.integers {
        lp.lower[j] = (lp.lower[j] - INTEGRALITY_TOL).ceil();
        lp.upper[j] = (lp.upper[j] + INTEGRALITY_TOL).floor();
        if lp.lower[j] > lp.upper[j] {
            return Ok(SolveResult::infeasible());
        }
    }

    let root = solve_lp(&lp)?;
    match root.status {
        Status::Optimal => {}
        _ => return Ok(root),
    }
    if branching_var(&root.values, &mp.integers).is_none() {
        return Ok(finish(&lp, &mp.integers, root.values, 0));
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    heap.push(Node {
        bound: root.objective,
        seq,
        lower: lp.lower.clone(),
        upper: lp.upper.clone(),
        values: root.values,
    });
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut branches = 0;
    let mut sub = lp.clone();

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - opts.gap_tol - 1e-9 {
                break;
            }
        }
        let Some(j) = branching_var(&node.values, &mp.integers) else {
            continue;
        };
        let v = node.values[j];
        for down in [true, false] {
            let mut lower = node.lower.clone();
            let mut upper = node.upper.clone();
            if down {
                upper[j] = v.floor();
            } else {
                lower[j] = v.ceil();
            }
            if lower[j] > upper[j] {
                continue;
            }
            branches += 1;
            sub.lower.clone_from(&lower);
            sub.upper.clone_from(&upper);
            let r = solve_lp(&sub)?;
            if r.status != Status::Optimal {
                continue;
            }
            if let Some((best, _)) = &incumbent {
                if r.objective >= best - opts.gap_tol - 1e-9 {
                    continue;
                }
            }
            if branching_var(&r.values, &mp.integers).is_none() {
                incumbent = Some((r.objective, r.values));
            } else {
                seq += 1;
                heap.push(Node { bound: r.objective, seq, lower, upper, values: r.values });
            }
        }
    }

    Ok(match incumbent {
        Some((_, values)) => finish(&lp, &mp.integers, values, branches),
        None => SolveResult { branches, ..SolveResult::infeasible() },
    })
}
