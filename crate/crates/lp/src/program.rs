use crate::{LpError, Result, FEASIBILITY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// How far `x` is from satisfying this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            RowSense::Le => (lhs - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - lhs).max(0.0),
            RowSense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `minimize c·x` subject to linear rows and per-variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// A program over `n` variables, each bounded to `[0, +inf)`.
    pub fn new(n: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; n],
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_objective(&mut self, j: usize, c: f64) -> &mut Self {
        self.objective[j] = c;
        self
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[j] = lower;
        self.upper[j] = upper;
        self
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, sense: RowSense, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coeffs, sense, rhs });
        self
    }

    /// Sparse convenience: `(index, coefficient)` pairs.
    pub fn add_sparse(&mut self, terms: &[(usize, f64)], sense: RowSense, rhs: f64) -> &mut Self {
        let mut coeffs = vec![0.0; self.num_vars()];
        for &(j, a) in terms {
            coeffs[j] += a;
        }
        self.add_constraint(coeffs, sense, rhs)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed(format!(
                "bound vectors have lengths {}/{} for {} variables",
                self.lower.len(),
                self.upper.len(),
                n
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed("non-finite objective coefficient".into()));
        }
        for (j, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("variable {j} has bounds [{l}, {u}]")));
            }
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "row {i} has {} coefficients for {} variables",
                    row.coeffs.len(),
                    n
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(LpError::Malformed(format!("row {i} has non-finite entries")));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|r| r.violation(x));
        let bounds = x.iter().zip(self.lower.iter().zip(&self.upper)).map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.max_violation(x) <= FEASIBILITY_TOL
    }
}

/// A linear program in which some variables must take integer values.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedProgram {
    pub lp: LinearProgram,
    pub integers: Vec<usize>,
}

impl MixedProgram {
    pub fn new(lp: LinearProgram) -> Self {
        MixedProgram { lp, integers: Vec::new() }
    }

    /// Marks `j` as a binary variable, clamping its bounds to `[0, 1]`.
    pub fn mark_binary(&mut self, j: usize) -> &mut Self {
        self.lp.lower[j] = self.lp.lower[j].max(0.0);
        self.lp.upper[j] = self.lp.upper[j].min(1.0);
        self.mark_integer(j)
    }

    pub fn mark_integer(&mut self, j: usize) -> &mut Self {
        if !self.integers.contains(&j) {
            self.integers.push(j);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.lp.validate()?;
        let n = self.lp.num_vars();
        for &j in &self.integers {
            if j >= n {
                return Err(LpError::Malformed(format!("integer index {j} out of range ({n} variables)")));
            }
        }
        Ok(())
    }
}
