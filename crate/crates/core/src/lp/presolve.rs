//! Problem reduction ahead of the simplex.
//!
//! Every transformation here is exact: the reduced problem has the same
//! feasible set over the remaining variables, and removed variables are fixed
//! at values that every optimal solution can share.

use super::{LinearProgram, Relation};
use crate::scalar::Scalar;

/// A row that survived presolve, with fixed variables folded into `rhs`.
#[derive(Debug, Clone)]
pub(crate) struct Row<T> {
    pub coeffs: Vec<(usize, T)>,
    pub relation: Relation,
    pub rhs: T,
}

/// Variables and rows that only interact with each other.
#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub vars: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct Reduced<T> {
    pub costs: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    /// Values for fixed variables; other entries are placeholders.
    pub values: Vec<T>,
    pub fixed: Vec<bool>,
    pub rows: Vec<Row<T>>,
}

impl<T: Scalar> Reduced<T> {
    /// Connected components of the variable/row incidence graph.
    pub fn blocks(&self) -> Vec<Block> {
        let n = self.costs.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        for row in &self.rows {
            let first = row.coeffs[0].0;
            for &(j, _) in &row.coeffs[1..] {
                let (a, b) = (find(&mut parent, first), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut index_of = vec![usize::MAX; n];
        let mut blocks: Vec<Block> = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            let root = find(&mut parent, row.coeffs[0].0);
            if index_of[root] == usize::MAX {
                index_of[root] = blocks.len();
                blocks.push(Block {
                    vars: Vec::new(),
                    rows: Vec::new(),
                });
            }
            blocks[index_of[root]].rows.push(r);
        }
        let mut in_row = vec![false; n];
        for row in &self.rows {
            for &(j, _) in &row.coeffs {
                in_row[j] = true;
            }
        }
        for j in 0..n {
            if in_row[j] {
                let root = find(&mut parent, j);
                blocks[index_of[root]].vars.push(j);
            }
        }
        blocks
    }

    /// Unfixed variables that appear in no remaining row.
    pub fn loose_vars(&self) -> Vec<usize> {
        let mut in_row = vec![false; self.costs.len()];
        for row in &self.rows {
            for &(j, _) in &row.coeffs {
                in_row[j] = true;
            }
        }
        (0..self.costs.len())
            .filter(|&j| !self.fixed[j] && !in_row[j])
            .collect()
    }
}

/// Reduces `lp`; `None` when presolve alone proves infeasibility.
pub(crate) fn presolve<T: Scalar>(lp: &LinearProgram<T>, tol: T) -> Option<Reduced<T>> {
    let n = lp.num_vars();
    let mut lower = lp.lower_bounds().to_vec();
    let mut upper = lp.upper_bounds().to_vec();
    let mut values = vec![T::zero(); n];
    let mut fixed = vec![false; n];

    // merge duplicate entries and drop explicit zeros
    let mut rows: Vec<Row<T>> = lp
        .constraints()
        .iter()
        .map(|c| {
            let mut coeffs = c.coeffs.clone();
            coeffs.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, T)> = Vec::with_capacity(coeffs.len());
            for (j, a) in coeffs {
                match merged.last_mut() {
                    Some((k, acc)) if *k == j => *acc += a,
                    _ => merged.push((j, a)),
                }
            }
            merged.retain(|&(_, a)| a != T::zero());
            Row {
                coeffs: merged,
                relation: c.relation,
                rhs: c.rhs,
            }
        })
        .collect();
    let mut alive = vec![true; rows.len()];

    let fix = |j: usize, lower: &mut [T], upper: &mut [T], values: &mut [T], fixed: &mut [bool]| {
        let v = lower[j];
        upper[j] = v;
        values[j] = v;
        fixed[j] = true;
    };

    for j in 0..n {
        if lower[j] == upper[j] {
            fix(j, &mut lower, &mut upper, &mut values, &mut fixed);
        }
    }

    let mut changed = true;
    while changed {
        changed = false;
        for (r, row) in rows.iter_mut().enumerate() {
            if !alive[r] {
                continue;
            }
            if row.coeffs.iter().any(|&(j, _)| fixed[j]) {
                let mut shift = T::zero();
                row.coeffs.retain(|&(j, a)| {
                    if fixed[j] {
                        shift += a * values[j];
                        false
                    } else {
                        true
                    }
                });
                row.rhs -= shift;
            }

            match row.coeffs.len() {
                0 => {
                    let ok = match row.relation {
                        Relation::Le => row.rhs >= -tol,
                        Relation::Ge => row.rhs <= tol,
                        Relation::Eq => row.rhs.abs() <= tol,
                    };
                    if !ok {
                        return None;
                    }
                    alive[r] = false;
                }
                1 => {
                    let (j, a) = row.coeffs[0];
                    let bound = row.rhs / a;
                    let rel = if a < T::zero() {
                        match row.relation {
                            Relation::Le => Relation::Ge,
                            Relation::Ge => Relation::Le,
                            Relation::Eq => Relation::Eq,
                        }
                    } else {
                        row.relation
                    };
                    if matches!(rel, Relation::Le | Relation::Eq) && bound < upper[j] {
                        upper[j] = bound;
                    }
                    if matches!(rel, Relation::Ge | Relation::Eq) && bound > lower[j] {
                        lower[j] = bound;
                    }
                    let scale = T::one().max(lower[j].abs()).max(upper[j].abs());
                    if lower[j] > upper[j] {
                        if lower[j] - upper[j] > tol * scale {
                            return None;
                        }
                        let mid = (lower[j] + upper[j]) / T::of(2.0);
                        lower[j] = mid;
                        upper[j] = mid;
                    }
                    if lower[j] == upper[j] {
                        fix(j, &mut lower, &mut upper, &mut values, &mut fixed);
                    }
                    alive[r] = false;
                    changed = true;
                }
                _ => {
                    let (mut min_act, mut max_act) = (T::zero(), T::zero());
                    for &(j, a) in &row.coeffs {
                        let (lo, hi) = if a > T::zero() {
                            (a * lower[j], a * upper[j])
                        } else {
                            (a * upper[j], a * lower[j])
                        };
                        min_act += lo;
                        max_act += hi;
                    }
                    let scale = T::one().max(row.rhs.abs());
                    let redundant = match row.relation {
                        Relation::Le => {
                            if min_act > row.rhs + tol * scale {
                                return None;
                            }
                            max_act <= row.rhs
                        }
                        Relation::Ge => {
                            if max_act < row.rhs - tol * scale {
                                return None;
                            }
                            min_act >= row.rhs
                        }
                        Relation::Eq => {
                            if min_act > row.rhs + tol * scale || max_act < row.rhs - tol * scale {
                                return None;
                            }
                            false
                        }
                    };
                    if redundant {
                        alive[r] = false;
                        changed = true;
                    }
                }
            }
        }
    }

    let rows = rows
        .into_iter()
        .zip(alive)
        .filter_map(|(row, keep)| keep.then_some(row))
        .collect();
    Some(Reduced {
        costs: lp.objective().to_vec(),
        lower,
        upper,
        values,
        fixed,
        rows,
    })
}
