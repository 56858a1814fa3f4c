//! Brute-force oracles sharing no code with the solvers: vertex enumeration
//! for linear programs and exhaustive assignment enumeration for binary
//! programs. Also used by the core crate's acceptance runner.

#![allow(dead_code)]

use colcert_lp::{LinearProgram, MixedProgram, RowSense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` if singular.
#[allow(clippy::needless_range_loop)]
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

pub fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    go(0, n, k, &mut Vec::new(), f);
}

/// Minimum over all feasible vertices of a bounded-box program; `None` if no
/// vertex is feasible (the program is then infeasible).
pub fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    if n == 0 {
        return lp.constraints.iter().all(|c| c.violation(&[]) <= 1e-9).then_some(0.0);
    }
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &lp.constraints {
        planes.push((c.coeffs.clone(), c.rhs));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lower[j]));
        planes.push((e, lp.upper[j]));
    }
    let mut best: Option<f64> = None;
    combinations(planes.len(), n, &mut |idx| {
        let a = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            if lp.max_violation(&x) <= 1e-9 {
                let v = lp.objective_value(&x);
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    });
    best
}

pub fn random_program(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LinearProgram {
    let mut lp = LinearProgram::new(n);
    for j in 0..n {
        lp.objective[j] = rng.random_range(-5..=5) as f64 + rng.random_range(-0.5..0.5);
        let l = rng.random_range(-3.0..0.5);
        let u = l + rng.random_range(0.25..5.0);
        lp.set_bounds(j, l, u);
    }
    for _ in 0..m {
        let coeffs: Vec<f64> =
            (0..n).map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random_range(-4..=4) as f64 }).collect();
        let sense = match rng.random_range(0..10) {
            0 => RowSense::Eq,
            1..=5 => RowSense::Le,
            _ => RowSense::Ge,
        };
        let rhs = rng.random_range(-4.0..4.0);
        lp.add_constraint(coeffs, sense, rhs);
    }
    lp
}

pub fn enumerate_binary(mp: &MixedProgram) -> Option<f64> {
    let n = mp.lp.num_vars();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        let x: Vec<f64> = (0..n).map(|j| ((mask >> j) & 1) as f64).collect();
        if mp.lp.max_violation(&x) <= 1e-9 {
            let v = mp.lp.objective_value(&x);
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}

pub fn random_binary_program(seed: u64) -> MixedProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=10);
    let m = rng.random_range(1..=5);
    let mut lp = LinearProgram::new(n);
    for j in 0..n {
        lp.objective[j] = rng.random_range(-6.0..3.0);
    }
    for _ in 0..m {
        let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..4.0)).collect();
        let sense = if rng.random_bool(0.7) { RowSense::Le } else { RowSense::Ge };
        let rhs = rng.random_range(0.0..(n as f64));
        lp.add_constraint(coeffs, sense, rhs);
    }
    let mut mp = MixedProgram::new(lp);
    for j in 0..n {
        mp.mark_binary(j);
    }
    mp
}
