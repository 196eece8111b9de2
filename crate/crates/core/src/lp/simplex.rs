//! Dense bounded-variable tableau simplex for one presolved block.
//!
//! Each structural variable is shifted so its finite bound sits at zero
//! (free variables are split in two). Finite upper bounds are handled by
//! complementing columns (`x -> u - x`) instead of adding rows, so the tableau
//! only carries the original constraints plus one slack per inequality and
//! an artificial where no slack can start basic.

use super::presolve::{Block, Reduced};
use super::RangedRow;
use super::Relation;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) enum BlockOutcome<T> {
    Optimal(Vec<T>),
    Infeasible,
    Unbounded,
}

/// How a tableau column maps back to an original variable.
#[derive(Clone, Copy)]
enum ColMap<T> {
    /// `x = lo + col`
    Shifted { var: usize, lo: T },
    /// `x = hi - col`
    Mirrored { var: usize, hi: T },
    /// `x = pos - neg`, this column is one half
    Split { var: usize, positive: bool },
    Slack,
    Artificial,
}

// consecutive degenerate pivots tolerated before switching to Bland's rule
const DEGENERATE_RUN: usize = 50;

struct Tableau<T> {
    m: usize,
    n: usize,
    a: Vec<T>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    upper: Vec<T>,
    flipped: Vec<bool>,
    cost: Vec<T>,
    d: Vec<T>,
    z: T,
    piv_tol: T,
}

enum Step {
    Optimal,
    Unbounded,
}

impl<T: Scalar> Tableau<T> {
    #[inline]
    fn at(&self, r: usize, c: usize) -> T {
        self.a[r * self.n + c]
    }

    /// Reduced costs and objective constant for the current basis and `cost`.
    fn price(&mut self) {
        let mut z = T::zero();
        let mut d = vec![T::zero(); self.n];
        for j in 0..self.n {
            let c = self.cost[j];
            if self.flipped[j] {
                d[j] = -c;
                z += c * self.upper[j];
            } else {
                d[j] = c;
            }
        }
        for r in 0..self.m {
            let b = self.basis[r];
            let cb = d[b];
            if cb == T::zero() {
                continue;
            }
            let row = &self.a[r * self.n..(r + 1) * self.n];
            for j in 0..self.n {
                d[j] -= cb * row[j];
            }
            z += cb * self.rhs[r];
        }
        self.d = d;
        self.z = z;
    }

    /// Replaces column `j` by `u_j - x_j`.
    fn complement(&mut self, j: usize) {
        let u = self.upper[j];
        for r in 0..self.m {
            let idx = r * self.n + j;
            let v = self.a[idx];
            if v != T::zero() {
                self.rhs[r] -= v * u;
                self.a[idx] = -v;
            }
        }
        self.z += self.d[j] * u;
        self.d[j] = -self.d[j];
        self.flipped[j] = !self.flipped[j];
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.n;
        let inv = T::one() / self.a[r * n + j];
        let mut nz = Vec::new();
        for k in 0..n {
            let idx = r * n + k;
            if self.a[idx] != T::zero() {
                self.a[idx] *= inv;
                nz.push(k);
            }
        }
        self.a[r * n + j] = T::one();
        self.rhs[r] *= inv;
        let prow: Vec<T> = nz.iter().map(|&k| self.a[r * n + k]).collect();
        let pr = self.rhs[r];
        // a dense pivot row is cheaper to apply as a contiguous sweep
        let dense = nz.len() * 3 > n;
        let full: Vec<T> = if dense {
            self.a[r * n..(r + 1) * n].to_vec()
        } else {
            Vec::new()
        };
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * n + j];
            if f == T::zero() {
                continue;
            }
            let base = i * n;
            if dense {
                for (dst, &v) in self.a[base..base + n].iter_mut().zip(&full) {
                    *dst -= f * v;
                }
            } else {
                for (&k, &v) in nz.iter().zip(&prow) {
                    self.a[base + k] -= f * v;
                }
            }
            self.a[base + j] = T::zero();
            self.rhs[i] -= f * pr;
            if self.rhs[i].abs() < self.piv_tol * T::of(1e-3) {
                self.rhs[i] = T::zero();
            }
        }
        let f = self.d[j];
        if f != T::zero() {
            for (&k, &v) in nz.iter().zip(&prow) {
                self.d[k] -= f * v;
            }
            self.d[j] = T::zero();
            self.z += f * pr;
        }
        self.basis[r] = j;
    }

    /// Primal simplex on the current cost vector; `eligible` masks entering columns.
    fn run(
        &mut self,
        eligible: &[bool],
        tol: T,
        cap: usize,
        iterations: &mut usize,
    ) -> Result<Step> {
        let mut degenerate = 0usize;
        loop {
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -tol;
            for j in 0..self.n {
                if !eligible[j] || self.upper[j] == T::zero() {
                    continue;
                }
                let dj = self.d[j];
                if dj < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = dj;
                }
            }
            let Some(j) = enter else {
                return Ok(Step::Optimal);
            };

            // ratio test: basic variables must stay within [0, u]
            let mut leave: Option<(usize, bool)> = None;
            let mut theta = T::infinity();
            let mut best_alpha = T::zero();
            for r in 0..self.m {
                let alpha = self.at(r, j);
                let (t, to_upper) = if alpha > self.piv_tol {
                    ((self.rhs[r] / alpha).max(T::zero()), false)
                } else if alpha < -self.piv_tol && self.upper[self.basis[r]].is_finite() {
                    (((self.upper[self.basis[r]] - self.rhs[r]) / -alpha).max(T::zero()), true)
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((lr, _)) => {
                        if t < theta {
                            true
                        } else if t == theta {
                            if bland {
                                self.basis[r] < self.basis[lr]
                            } else {
                                alpha.abs() > best_alpha
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some((r, to_upper));
                    theta = t;
                    best_alpha = alpha.abs();
                }
            }

            *iterations += 1;
            if *iterations > cap {
                return Err(Error::SolverStalled {
                    iterations: *iterations - 1,
                });
            }

            let u = self.upper[j];
            if u <= theta {
                if !u.is_finite() {
                    return Ok(Step::Unbounded);
                }
                self.complement(j);
                degenerate = 0;
                continue;
            }
            let (r, to_upper) = leave.expect("finite step implies a blocking row");
            if theta <= T::zero() {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let out = self.basis[r];
            if to_upper {
                // leaving variable hits its upper bound: pivot, then complement it
                self.pivot(r, j);
                self.complement(out);
            } else {
                self.pivot(r, j);
            }
            for v in &mut self.rhs {
                if *v < T::zero() && *v > -tol {
                    *v = T::zero();
                }
            }
        }
    }

    fn column_value(&self, c: usize, basic_row: &[usize]) -> T {
        let v = if basic_row[c] == usize::MAX {
            T::zero()
        } else {
            self.rhs[basic_row[c]]
        };
        if self.flipped[c] {
            self.upper[c] - v
        } else {
            v
        }
    }
}

pub(crate) fn solve_block<T: Scalar>(
    reduced: &Reduced<T>,
    block: &Block,
    tol: T,
    cap: usize,
    iterations: &mut usize,
) -> Result<BlockOutcome<T>> {
    let mut local = vec![usize::MAX; reduced.costs.len()];
    for (i, &v) in block.vars.iter().enumerate() {
        local[v] = i;
    }

    // structural columns
    let mut maps: Vec<ColMap<T>> = Vec::new();
    let mut upper: Vec<T> = Vec::new();
    let mut cost: Vec<T> = Vec::new();
    // per local var: (first column, sign, second column for free vars)
    let mut var_cols: Vec<(usize, T, Option<usize>)> = Vec::with_capacity(block.vars.len());
    for &v in &block.vars {
        let (lo, hi, c) = (reduced.lower[v], reduced.upper[v], reduced.costs[v]);
        let col = maps.len();
        if lo.is_finite() {
            maps.push(ColMap::Shifted { var: v, lo });
            upper.push(hi - lo);
            cost.push(c);
            var_cols.push((col, T::one(), None));
        } else if hi.is_finite() {
            maps.push(ColMap::Mirrored { var: v, hi });
            upper.push(T::infinity());
            cost.push(-c);
            var_cols.push((col, -T::one(), None));
        } else {
            maps.push(ColMap::Split { var: v, positive: true });
            maps.push(ColMap::Split { var: v, positive: false });
            upper.extend([T::infinity(), T::infinity()]);
            cost.extend([c, -c]);
            var_cols.push((col, T::one(), Some(col + 1)));
        }
    }
    let n_struct = maps.len();

    // dense rows over structural columns, shifted rhs
    let m = block.rows.len();
    let mut dense: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut rhs: Vec<T> = Vec::with_capacity(m);
    let mut rels: Vec<Relation> = Vec::with_capacity(m);
    for &ri in &block.rows {
        let row = &reduced.rows[ri];
        let mut d = vec![T::zero(); n_struct];
        let mut b = row.rhs;
        for &(v, a) in &row.coeffs {
            let (col, sign, second) = var_cols[local[v]];
            match maps[col] {
                ColMap::Shifted { lo, .. } => b -= a * lo,
                ColMap::Mirrored { hi, .. } => b -= a * hi,
                _ => {}
            }
            d[col] += a * sign;
            if let Some(c2) = second {
                d[c2] -= a;
            }
        }
        dense.push(d);
        rhs.push(b);
        rels.push(row.relation);
    }

    // slacks, sign normalisation, artificials
    let n_slack = rels.iter().filter(|r| **r != Relation::Eq).count();
    let mut slack_coef: Vec<Option<(usize, T)>> = Vec::with_capacity(m);
    let mut next = n_struct;
    for rel in &rels {
        match rel {
            Relation::Le => {
                slack_coef.push(Some((next, T::one())));
                next += 1;
            }
            Relation::Ge => {
                slack_coef.push(Some((next, -T::one())));
                next += 1;
            }
            Relation::Eq => slack_coef.push(None),
        }
    }
    let mut needs_art = Vec::with_capacity(m);
    for r in 0..m {
        let negate = rhs[r] < T::zero();
        if negate {
            rhs[r] = -rhs[r];
            for v in &mut dense[r] {
                *v = -*v;
            }
            if let Some((_, s)) = slack_coef[r].as_mut() {
                *s = -*s;
            }
        }
        needs_art.push(!matches!(slack_coef[r], Some((_, s)) if s > T::zero()));
    }
    let n_art = needs_art.iter().filter(|&&b| b).count();
    let n = n_struct + n_slack + n_art;

    let mut a = vec![T::zero(); m * n];
    let mut basis = vec![0usize; m];
    let mut art_col = n_struct + n_slack;
    for r in 0..m {
        a[r * n..r * n + n_struct].copy_from_slice(&dense[r]);
        if let Some((c, s)) = slack_coef[r] {
            a[r * n + c] = s;
            if s > T::zero() {
                basis[r] = c;
            }
        }
        if needs_art[r] {
            a[r * n + art_col] = T::one();
            basis[r] = art_col;
            art_col += 1;
        }
    }
    maps.extend(std::iter::repeat_n(ColMap::Slack, n_slack));
    maps.extend(std::iter::repeat_n(ColMap::Artificial, n_art));
    upper.extend(std::iter::repeat_n(T::infinity(), n_slack + n_art));
    cost.extend(std::iter::repeat_n(T::zero(), n_slack + n_art));

    let piv_tol = T::of(1e-9).max(T::epsilon() * T::of(100.0));
    let mut tab = Tableau {
        m,
        n,
        a,
        rhs,
        basis,
        upper,
        flipped: vec![false; n],
        cost: vec![T::zero(); n],
        d: Vec::new(),
        z: T::zero(),
        piv_tol,
    };

    if n_art > 0 {
        for c in n_struct + n_slack..n {
            tab.cost[c] = T::one();
        }
        tab.price();
        let all = vec![true; n];
        if let Step::Unbounded = tab.run(&all, tol, cap, iterations)? {
            return Err(Error::Internal("phase one cannot be unbounded".into()));
        }
        let scale = T::one() + tab.rhs.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        if tab.z > tol * scale {
            return Ok(BlockOutcome::Infeasible);
        }
        drive_out_artificials(&mut tab, n_struct + n_slack);
        tab = compact(tab, n_struct + n_slack, &mut maps);
    }

    tab.cost = cost[..tab.n].to_vec();
    tab.price();
    let eligible = vec![true; tab.n];
    if let Step::Unbounded = tab.run(&eligible, tol, cap, iterations)? {
        return Ok(BlockOutcome::Unbounded);
    }

    let mut basic_row = vec![usize::MAX; tab.n];
    for (r, &b) in tab.basis.iter().enumerate() {
        basic_row[b] = r;
    }
    let mut values = vec![T::zero(); block.vars.len()];
    for c in 0..tab.n {
        let v = tab.column_value(c, &basic_row);
        match maps[c] {
            ColMap::Shifted { var, lo } => values[local[var]] = lo + v,
            ColMap::Mirrored { var, hi } => values[local[var]] = hi - v,
            ColMap::Split { var, positive } => {
                if positive {
                    values[local[var]] += v;
                } else {
                    values[local[var]] -= v;
                }
            }
            ColMap::Slack | ColMap::Artificial => {}
        }
    }
    // clamp round-off back into the variable box
    for (i, &v) in block.vars.iter().enumerate() {
        values[i] = values[i].max(reduced.lower[v]).min(reduced.upper[v]);
    }
    Ok(BlockOutcome::Optimal(values))
}

/// Solves `min ||w||_1` subject to ranged rows through the dual program
///
/// ```text
/// max  sum_r lower_r y+_r - upper_r y-_r
/// s.t. -1 <= sum_r g_r (y+_r - y-_r) <= 1,   y+, y- >= 0
/// ```
///
/// which has one row per parameter and is feasible at `y = 0` with every
/// slack basic, so no phase one is needed. The optimal `w` is read off the
/// reduced costs of the slacks. Returns `None` when the dual is unbounded,
/// i.e. the ranged rows admit no `w`.
pub(crate) fn solve_min_l1_dual<T: Scalar>(
    num_params: usize,
    rows: &[RangedRow<T>],
    tol: T,
    cap: usize,
    iterations: &mut usize,
) -> Result<Option<Vec<T>>> {
    let m = num_params;
    // dual columns: (row, sign) for every finite side
    let mut cols: Vec<(usize, bool)> = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        if row.lower.is_finite() {
            cols.push((r, true));
        }
        if row.upper.is_finite() {
            cols.push((r, false));
        }
    }
    let n_y = cols.len();
    let n = n_y + m;
    let mut a = vec![T::zero(); m * n];
    let mut cost = vec![T::zero(); n];
    for (c, &(r, plus)) in cols.iter().enumerate() {
        let row = &rows[r];
        let sign = if plus { T::one() } else { -T::one() };
        for &(p, g) in &row.coeffs {
            a[p * n + c] += sign * g;
        }
        cost[c] = if plus { -row.lower } else { row.upper };
    }
    let mut upper = vec![T::infinity(); n];
    for p in 0..m {
        a[p * n + n_y + p] = T::one();
        upper[n_y + p] = T::of(2.0);
    }
    let mut tab = Tableau {
        m,
        n,
        a,
        rhs: vec![T::one(); m],
        basis: (n_y..n).collect(),
        upper,
        flipped: vec![false; n],
        cost,
        d: Vec::new(),
        z: T::zero(),
        piv_tol: T::of(1e-9).max(T::epsilon() * T::of(100.0)),
    };
    tab.price();
    let eligible = vec![true; n];
    if let Step::Unbounded = tab.run(&eligible, tol, cap, iterations)? {
        return Ok(None);
    }
    let w = (0..m)
        .map(|p| {
            let d = tab.d[n_y + p];
            if tab.flipped[n_y + p] {
                -d
            } else {
                d
            }
        })
        .collect();
    Ok(Some(w))
}

/// Pivots zero-valued artificials out of the basis; rows where that is
/// impossible are linearly dependent and get dropped by [`compact`].
fn drive_out_artificials<T: Scalar>(tab: &mut Tableau<T>, first_art: usize) {
    for r in 0..tab.m {
        if tab.basis[r] < first_art {
            continue;
        }
        let mut best: Option<usize> = None;
        let mut best_abs = tab.piv_tol;
        for c in 0..first_art {
            let v = tab.at(r, c).abs();
            if v > best_abs {
                best_abs = v;
                best = Some(c);
            }
        }
        if let Some(c) = best {
            tab.pivot(r, c);
            // the artificial was at zero, so the entering value stays near zero
            let v = tab.rhs[r];
            if v < T::zero() || (tab.upper[c].is_finite() && v > tab.upper[c]) {
                tab.rhs[r] = v.max(T::zero()).min(tab.upper[c]);
            }
        }
    }
}

/// Drops artificial columns and rows still held by an artificial.
fn compact<T: Scalar>(tab: Tableau<T>, first_art: usize, maps: &mut Vec<ColMap<T>>) -> Tableau<T> {
    let keep_rows: Vec<usize> = (0..tab.m).filter(|&r| tab.basis[r] < first_art).collect();
    let n = first_art;
    let mut a = Vec::with_capacity(keep_rows.len() * n);
    for &r in &keep_rows {
        a.extend_from_slice(&tab.a[r * tab.n..r * tab.n + n]);
    }
    maps.truncate(n);
    Tableau {
        m: keep_rows.len(),
        n,
        a,
        rhs: keep_rows.iter().map(|&r| tab.rhs[r]).collect(),
        basis: keep_rows.iter().map(|&r| tab.basis[r]).collect(),
        upper: tab.upper[..n].to_vec(),
        flipped: tab.flipped[..n].to_vec(),
        cost: vec![T::zero(); n],
        d: Vec::new(),
        z: T::zero(),
        piv_tol: tab.piv_tol,
    }
}
