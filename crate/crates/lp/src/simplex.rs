use crate::program::{LinearProgram, RowSense};
use crate::{LpError, Result, SolveResult, Status, FEASIBILITY_TOL};

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-10;
const DROP_EPS: f64 = 1e-13;
// Consecutive degenerate pivots tolerated before falling back to Bland's rule.
const DEGENERATE_STREAK: usize = 32;

/// How an original variable is expressed through non-negative columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = offset + y
    Shift { col: usize, offset: f64 },
    /// x = offset - y
    Mirror { col: usize, offset: f64 },
    /// x = y⁺ - y⁻
    Free { pos: usize, neg: usize },
}

struct Row {
    coeffs: Vec<f64>,
    sense: RowSense,
    rhs: f64,
}

struct StandardForm {
    map: Vec<VarMap>,
    cost: Vec<f64>,
    rows: Vec<Row>,
}

fn standardize(lp: &LinearProgram) -> StandardForm {
    let mut map = Vec::with_capacity(lp.num_vars());
    let mut ncols = 0;
    for j in 0..lp.num_vars() {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        let m = if l.is_finite() {
            VarMap::Shift { col: ncols, offset: l }
        } else if u.is_finite() {
            VarMap::Mirror { col: ncols, offset: u }
        } else {
            ncols += 1;
            VarMap::Free { pos: ncols - 1, neg: ncols }
        };
        ncols += 1;
        map.push(m);
    }

    let mut cost = vec![0.0; ncols];
    for (j, m) in map.iter().enumerate() {
        let c = lp.objective[j];
        match *m {
            VarMap::Shift { col, .. } => cost[col] += c,
            VarMap::Mirror { col, .. } => cost[col] -= c,
            VarMap::Free { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }

    let mut rows = Vec::with_capacity(lp.constraints.len() + lp.num_vars());
    for con in &lp.constraints {
        let mut coeffs = vec![0.0; ncols];
        let mut rhs = con.rhs;
        for (j, m) in map.iter().enumerate() {
            let a = con.coeffs[j];
            if a == 0.0 {
                continue;
            }
            match *m {
                VarMap::Shift { col, offset } => {
                    coeffs[col] += a;
                    rhs -= a * offset;
                }
                VarMap::Mirror { col, offset } => {
                    coeffs[col] -= a;
                    rhs -= a * offset;
                }
                VarMap::Free { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        rows.push(Row { coeffs, sense: con.sense, rhs });
    }
    // Finite upper bounds on shifted variables become explicit rows.
    for (j, m) in map.iter().enumerate() {
        if let VarMap::Shift { col, offset } = *m {
            if lp.upper[j].is_finite() {
                let mut coeffs = vec![0.0; ncols];
                coeffs[col] = 1.0;
                rows.push(Row { coeffs, sense: RowSense::Le, rhs: lp.upper[j] - offset });
            }
        }
    }
    StandardForm { map, cost, rows }
}

struct Tableau {
    /// `m` constraint rows followed by the reduced-cost row; last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Columns at or beyond this index are artificial.
    first_artificial: usize,
    width: usize,
    bland: bool,
    streak: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn m(&self) -> usize {
        self.basis.len()
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        self.t[r][c] = 1.0;
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f == 0.0 {
                continue;
            }
            for k in 0..=w {
                row[k] -= f * pivot_row[k];
                if row[k].abs() < DROP_EPS {
                    row[k] = 0.0;
                }
            }
            row[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn entering(&self, allow_artificial: bool) -> Option<usize> {
        let z = &self.t[self.m()];
        let limit = if allow_artificial { self.width } else { self.first_artificial };
        if self.bland {
            return (0..limit).find(|&j| z[j] < -COST_EPS);
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, &d) in z.iter().enumerate().take(limit) {
            if d < -COST_EPS && best.is_none_or(|(_, b)| d < b) {
                best = Some((j, d));
            }
        }
        best.map(|(j, _)| j)
    }

    fn leaving(&self, c: usize, allow_artificial: bool) -> Option<usize> {
        // An artificial left basic at zero after phase 1 must stay at zero:
        // it leaves at once if the entering column would move it.
        if !allow_artificial {
            if let Some(i) =
                (0..self.m()).find(|&i| self.basis[i] >= self.first_artificial && self.t[i][c].abs() > PIVOT_EPS)
            {
                return Some(i);
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m() {
            let a = self.t[i][c];
            if a <= PIVOT_EPS {
                continue;
            }
            let ratio = self.rhs(i).max(0.0) / a;
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                    if (tie && self.basis[i] < self.basis[bi]) || (!tie && ratio < br) {
                        Some((i, ratio))
                    } else {
                        Some((bi, br))
                    }
                }
            };
        }
        best.map(|(i, _)| i)
    }

    fn run(&mut self, allow_artificial: bool) -> Outcome {
        let cap = 50_000 + 200 * (self.m() + self.width);
        for _ in 0..cap {
            let Some(c) = self.entering(allow_artificial) else {
                return Outcome::Optimal;
            };
            let Some(r) = self.leaving(c, allow_artificial) else {
                return Outcome::Unbounded;
            };
            let degenerate = self.rhs(r).abs() <= PIVOT_EPS;
            self.streak = if degenerate { self.streak + 1 } else { 0 };
            if self.streak > DEGENERATE_STREAK {
                self.bland = true;
            }
            self.pivot(r, c);
        }
        // Bland's rule terminates; reaching here means numerical trouble.
        // The current basis is still primal feasible.
        Outcome::Optimal
    }

    fn set_costs(&mut self, cost: &[f64]) {
        let m = self.m();
        let w = self.width;
        let mut z = vec![0.0; w + 1];
        z[..cost.len()].copy_from_slice(cost);
        for i in 0..m {
            let cb = cost.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb == 0.0 {
                continue;
            }
            for (zk, &tk) in z.iter_mut().zip(&self.t[i][..=w]) {
                *zk -= cb * tk;
            }
        }
        for &b in &self.basis {
            z[b] = 0.0;
        }
        self.t[m] = z;
    }
}

/// Solves `lp` to optimality with a dense two-phase simplex.
///
/// Pricing is Dantzig's rule until a run of degenerate pivots, after which the
/// solve switches permanently to Bland's rule. The pivot sequence depends only
/// on the program, so identical inputs give identical outputs.
pub fn solve_lp(lp: &LinearProgram) -> Result<SolveResult> {
    lp.validate()?;
    let sf = standardize(lp);
    let ncols = sf.cost.len();

    let mut rows = sf.rows;
    for r in rows.iter_mut() {
        if r.rhs < 0.0 {
            r.rhs = -r.rhs;
            r.coeffs.iter_mut().for_each(|a| *a = -*a);
            r.sense = match r.sense {
                RowSense::Le => RowSense::Ge,
                RowSense::Ge => RowSense::Le,
                RowSense::Eq => RowSense::Eq,
            };
        }
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.sense != RowSense::Eq).count();
    let n_art = rows.iter().filter(|r| r.sense != RowSense::Le).count();
    let first_artificial = ncols + n_slack;
    let width = first_artificial + n_art;

    let mut t = vec![vec![0.0; width + 1]; m + 1];
    let mut basis = vec![0; m];
    let (mut s, mut a) = (ncols, first_artificial);
    for (i, r) in rows.iter().enumerate() {
        t[i][..ncols].copy_from_slice(&r.coeffs);
        t[i][width] = r.rhs;
        match r.sense {
            RowSense::Le => {
                t[i][s] = 1.0;
                basis[i] = s;
                s += 1;
            }
            RowSense::Ge => {
                t[i][s] = -1.0;
                s += 1;
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
            RowSense::Eq => {
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
        }
    }
    let mut tab = Tableau { t, basis, first_artificial, width, bland: false, streak: 0 };

    if n_art > 0 {
        let mut phase1 = vec![0.0; width];
        phase1[first_artificial..].iter_mut().for_each(|c| *c = 1.0);
        tab.set_costs(&phase1);
        tab.run(true);
        let infeasibility = -tab.t[m][width];
        let scale = rows.iter().map(|r| r.rhs.abs()).fold(1.0, f64::max);
        if infeasibility > 1e-9 * scale {
            return Ok(SolveResult::infeasible());
        }
        // Drive zero-valued artificials out of the basis where possible.
        for i in 0..m {
            if tab.basis[i] >= first_artificial {
                if let Some(c) = (0..first_artificial).find(|&c| tab.t[i][c].abs() > PIVOT_EPS) {
                    tab.pivot(i, c);
                }
            }
        }
    }

    let mut cost = sf.cost.clone();
    cost.resize(width, 0.0);
    tab.set_costs(&cost);
    if let Outcome::Unbounded = tab.run(false) {
        return Ok(SolveResult::unbounded());
    }

    let mut y = vec![0.0; width];
    for (i, &b) in tab.basis.iter().enumerate() {
        y[b] = tab.rhs(i).max(0.0);
    }
    let values: Vec<f64> = sf
        .map
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let v = match *m {
                VarMap::Shift { col, offset } => offset + y[col],
                VarMap::Mirror { col, offset } => offset - y[col],
                VarMap::Free { pos, neg } => y[pos] - y[neg],
            };
            v.clamp(lp.lower[j], lp.upper[j])
        })
        .collect();
    let objective = lp.objective_value(&values);
    // Relative to the size of the terms actually present in each row.
    let violation = lp
        .constraints
        .iter()
        .map(|c| {
            let scale = c.coeffs.iter().zip(&values).fold(c.rhs.abs().max(1.0), |m, (a, v)| m.max((a * v).abs()));
            c.violation(&values) / scale
        })
        .fold(0.0, f64::max);
    if violation > FEASIBILITY_TOL * 1e3 {
        return Err(LpError::Numerical(violation));
    }
    Ok(SolveResult { status: Status::Optimal, values, objective, branches: 0 })
}
