//! Linear programs and a self-contained two-phase primal simplex solver.
//!
//! Problems are stated as
//!
//! ```text
//! minimize    c^T x
//! subject to  a_i^T x  {<=, =, >=}  b_i
//!             lo_j <= x_j <= hi_j        (either side may be infinite)
//! ```
//!
//! [`solve`] first presolves (fixed variables, singleton rows turned into
//! bounds, rows implied by the variable bounds), splits what remains into
//! independent blocks, and runs a dense bounded-variable tableau simplex on
//! each block. Pricing is Dantzig's rule with a switch to Bland's rule after a
//! run of degenerate pivots, so the method cannot cycle.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

mod presolve;
mod simplex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T: Scalar = f64> {
    /// Sparse row `(variable, coefficient)`.
    pub coeffs: Vec<(usize, T)>,
    pub relation: Relation,
    pub rhs: T,
}

impl<T: Scalar> Constraint<T> {
    pub fn activity(&self, x: &[T]) -> T {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (zero when satisfied).
    pub fn violation(&self, x: &[T]) -> T {
        let act = self.activity(x);
        let zero = T::zero();
        match self.relation {
            Relation::Le => (act - self.rhs).max(zero),
            Relation::Ge => (self.rhs - act).max(zero),
            Relation::Eq => (act - self.rhs).abs(),
        }
    }
}

/// A minimisation LP with bounded variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram<T: Scalar = f64> {
    objective: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
    constraints: Vec<Constraint<T>>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new() -> Self {
        Self {
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            constraints: Vec::new(),
        }
    }

    /// `n` variables in `[0, +inf)` with zero cost.
    pub fn with_vars(n: usize) -> Self {
        Self {
            objective: vec![T::zero(); n],
            lower: vec![T::zero(); n],
            upper: vec![T::infinity(); n],
            constraints: Vec::new(),
        }
    }

    /// Adds a variable and returns its index.
    pub fn add_var(&mut self, lower: T, upper: T, cost: T) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn set_cost(&mut self, var: usize, cost: T) {
        self.objective[var] = cost;
    }

    pub fn set_bounds(&mut self, var: usize, lower: T, upper: T) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    /// Adds a row and returns its index.
    pub fn add_constraint(&mut self, coeffs: Vec<(usize, T)>, relation: Relation, rhs: T) -> usize {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &[T] {
        &self.objective
    }

    pub fn bounds(&self, var: usize) -> (T, T) {
        (self.lower[var], self.upper[var])
    }

    pub fn lower_bounds(&self) -> &[T] {
        &self.lower
    }

    pub fn upper_bounds(&self) -> &[T] {
        &self.upper
    }

    pub fn constraints(&self) -> &[Constraint<T>] {
        &self.constraints
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).map(|(&c, &v)| c * v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for j in 0..self.num_vars() {
            worst = worst
                .max(self.lower[j] - x[j])
                .max(x[j] - self.upper[j]);
        }
        for c in &self.constraints {
            worst = worst.max(c.violation(x));
        }
        worst
    }

    pub fn is_feasible(&self, x: &[T], tol: T) -> bool {
        x.len() == self.num_vars() && self.max_violation(x) <= tol
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo == T::infinity() || hi == T::neg_infinity() {
                return Err(Error::MalformedLp(format!("variable {j} has invalid bounds [{lo}, {hi}]")));
            }
            if lo > hi {
                return Err(Error::MalformedLp(format!("variable {j} has lo {lo} > hi {hi}")));
            }
            if !self.objective[j].is_finite() {
                return Err(Error::MalformedLp(format!("variable {j} has non-finite cost")));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(Error::MalformedLp(format!("row {i} has non-finite rhs")));
            }
            for &(j, a) in &c.coeffs {
                if j >= n {
                    return Err(Error::MalformedLp(format!("row {i} references variable {j} of {n}")));
                }
                if !a.is_finite() {
                    return Err(Error::MalformedLp(format!("row {i} has a non-finite coefficient")));
                }
            }
        }
        Ok(())
    }
}

impl<T: Scalar> fmt::Display for LinearProgram<T> {
    /// Human-readable dump: objective, one constraint per line, then bounds.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "minimize")?;
        let mut any = false;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != T::zero() {
                write!(f, " {} {c}*x{j}", if c < T::zero() { "-" } else { "+" }).ok();
                any = true;
            }
        }
        if !any {
            write!(f, " 0")?;
        }
        writeln!(f)?;
        writeln!(f, "subject to")?;
        for (i, c) in self.constraints.iter().enumerate() {
            write!(f, "  r{i}:")?;
            for &(j, a) in &c.coeffs {
                write!(f, " {a:+}*x{j}")?;
            }
            writeln!(f, " {} {}", c.relation.symbol(), c.rhs)?;
        }
        writeln!(f, "bounds")?;
        for j in 0..self.num_vars() {
            writeln!(f, "  {} <= x{j} <= {}", self.lower[j], self.upper[j])?;
        }
        Ok(())
    }
}

/// A two-sided row `lower <= coeffs . w <= upper`; either side may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct RangedRow<T: Scalar = f64> {
    pub coeffs: Vec<(usize, T)>,
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> RangedRow<T> {
    pub fn violation(&self, w: &[T]) -> T {
        let act: T = self.coeffs.iter().map(|&(p, g)| g * w[p]).sum();
        (self.lower - act).max(act - self.upper).max(T::zero())
    }
}

/// Minimum-L1 point satisfying every ranged row, or `None` if there is none.
///
/// Solved through its dual, which has one row per entry of `w`; this is far
/// cheaper than the primal tableau when rows greatly outnumber entries.
pub fn solve_min_l1<T: Scalar>(
    num_params: usize,
    rows: &[RangedRow<T>],
    opts: &SolverOptions<T>,
) -> Result<Option<Vec<T>>> {
    for (i, row) in rows.iter().enumerate() {
        if row.lower.is_nan() || row.upper.is_nan() || row.lower > row.upper {
            return Err(Error::MalformedLp(format!("ranged row {i} has bounds [{}, {}]", row.lower, row.upper)));
        }
        if row.lower == T::infinity() || row.upper == T::neg_infinity() {
            return Err(Error::MalformedLp(format!("ranged row {i} is unsatisfiable by construction")));
        }
        if let Some(&(p, _)) = row.coeffs.iter().find(|&&(p, g)| p >= num_params || !g.is_finite()) {
            return Err(Error::MalformedLp(format!("ranged row {i} has a bad entry for parameter {p}")));
        }
    }
    let cap = opts.max_iterations.unwrap_or(50 * (num_params + 2 * rows.len()).max(1));
    let mut iterations = 0;

    // parameters only interact through shared rows; solve each group alone
    let mut parent: Vec<usize> = (0..num_params).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for row in rows {
        if let Some(&(first, _)) = row.coeffs.first() {
            for &(p, _) in &row.coeffs[1..] {
                let (a, b) = (find(&mut parent, first), find(&mut parent, p));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut group_of = vec![usize::MAX; num_params];
    let mut groups: Vec<(Vec<usize>, Vec<RangedRow<T>>)> = Vec::new();
    let mut local = vec![0usize; num_params];
    for p in 0..num_params {
        let root = find(&mut parent, p);
        if group_of[root] == usize::MAX {
            group_of[root] = groups.len();
            groups.push((Vec::new(), Vec::new()));
        }
        let g = group_of[root];
        local[p] = groups[g].0.len();
        groups[g].0.push(p);
    }
    for row in rows {
        match row.coeffs.first() {
            Some(&(first, _)) => {
                let g = group_of[find(&mut parent, first)];
                groups[g].1.push(RangedRow {
                    coeffs: row.coeffs.iter().map(|&(p, v)| (local[p], v)).collect(),
                    lower: row.lower,
                    upper: row.upper,
                });
            }
            None => {
                let zero = T::zero();
                if row.lower > zero + opts.tol || row.upper < zero - opts.tol {
                    return Ok(None);
                }
            }
        }
    }

    let mut w = vec![T::zero(); num_params];
    for (params, group_rows) in &groups {
        if group_rows.is_empty() {
            continue;
        }
        match simplex::solve_min_l1_dual(params.len(), group_rows, opts.tol, cap, &mut iterations)? {
            Some(part) => {
                for (&p, v) in params.iter().zip(part) {
                    w[p] = v;
                }
            }
            None => return Ok(None),
        }
    }
    Ok(Some(w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T: Scalar = f64> {
    pub status: LpStatus,
    /// Variable values; empty unless `status` is `Optimal`.
    pub values: Vec<T>,
    /// Objective at `values`; NaN unless `status` is `Optimal`.
    pub objective: T,
    pub iterations: usize,
}

impl<T: Scalar> LpSolution<T> {
    fn without_point(status: LpStatus, iterations: usize) -> Self {
        Self {
            status,
            values: Vec::new(),
            objective: T::nan(),
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T: Scalar = f64> {
    /// Feasibility and optimality tolerance.
    pub tol: T,
    /// Pivot cap; defaults to `50 * (vars + constraints)`.
    pub max_iterations: Option<usize>,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::of(DEFAULT_TOL),
            max_iterations: None,
        }
    }
}

pub const DEFAULT_TOL: f64 = 1e-7;

/// Solves `lp` with feasibility/optimality tolerance `tol`.
pub fn solve<T: Scalar>(lp: &LinearProgram<T>, tol: T) -> Result<LpSolution<T>> {
    solve_with(
        lp,
        &SolverOptions {
            tol,
            max_iterations: None,
        },
    )
}

pub fn solve_with<T: Scalar>(lp: &LinearProgram<T>, opts: &SolverOptions<T>) -> Result<LpSolution<T>> {
    lp.validate()?;
    if !(opts.tol >= T::zero()) {
        return Err(Error::MalformedLp("tolerance must be non-negative".into()));
    }
    let cap = opts
        .max_iterations
        .unwrap_or(50 * (lp.num_vars() + lp.num_constraints()).max(1));

    let reduced = match presolve::presolve(lp, opts.tol) {
        Some(r) => r,
        None => return Ok(LpSolution::without_point(LpStatus::Infeasible, 0)),
    };

    let mut values = reduced.values.clone();
    let mut iterations = 0usize;
    let mut unbounded = false;

    for block in reduced.blocks() {
        let outcome = simplex::solve_block(&reduced, &block, opts.tol, cap, &mut iterations)?;
        match outcome {
            simplex::BlockOutcome::Optimal(vals) => {
                for (&j, v) in block.vars.iter().zip(vals) {
                    values[j] = v;
                }
            }
            simplex::BlockOutcome::Infeasible => {
                return Ok(LpSolution::without_point(LpStatus::Infeasible, iterations));
            }
            simplex::BlockOutcome::Unbounded => unbounded = true,
        }
    }

    for &j in &reduced.loose_vars() {
        let (lo, hi, c) = (reduced.lower[j], reduced.upper[j], lp.objective()[j]);
        values[j] = if c > T::zero() {
            if lo.is_finite() {
                lo
            } else {
                unbounded = true;
                T::zero()
            }
        } else if c < T::zero() {
            if hi.is_finite() {
                hi
            } else {
                unbounded = true;
                T::zero()
            }
        } else if lo.is_finite() {
            lo
        } else if hi.is_finite() {
            hi
        } else {
            T::zero()
        };
    }

    if unbounded {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, iterations));
    }
    let objective = lp.objective_value(&values);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        values,
        objective,
        iterations,
    })
}
