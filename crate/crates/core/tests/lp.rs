mod common;

use common::lp_suite::suite;
use proptest::prelude::*;
use vnn_core::lp::{solve, solve_min_l1, LinearProgram, LpStatus, RangedRow, Relation, SolverOptions};

#[test]
fn known_optima() {
    for case in suite() {
        let sol = solve(&case.lp, 1e-9).unwrap();
        assert_eq!(sol.status, case.status, "{}", case.name);
        if let Some(obj) = case.objective {
            assert!((sol.objective - obj).abs() < 1e-8, "{}: {} vs {obj}", case.name, sol.objective);
            assert!(case.lp.is_feasible(&sol.values, 1e-9), "{}", case.name);
        }
    }
}

#[test]
fn unbounded_with_rows() {
    let mut lp = LinearProgram::<f64>::with_vars(2);
    lp.set_cost(0, -1.0);
    lp.set_cost(1, -1.0);
    lp.add_constraint(vec![(0, 1.0), (1, -1.0)], Relation::Le, 1.0);
    assert_eq!(solve(&lp, 1e-9).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn redundant_equalities() {
    let mut lp = LinearProgram::<f64>::with_vars(2);
    lp.set_cost(0, 1.0);
    lp.set_cost(1, -1.0);
    lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 1.0);
    lp.add_constraint(vec![(0, 2.0), (1, 2.0)], Relation::Eq, 2.0);
    let s = solve(&lp, 1e-9).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.objective + 1.0).abs() < 1e-12);
}

#[test]
fn upper_bounded_only_variable() {
    // x in (-inf, 2], maximise x subject to x + y <= 5, y >= 1
    let mut lp = LinearProgram::new();
    let x = lp.add_var(f64::NEG_INFINITY, 2.0, -1.0);
    let y = lp.add_var(1.0, f64::INFINITY, 0.0);
    lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Le, 2.5);
    let s = solve(&lp, 1e-9).unwrap();
    assert!((s.objective + 1.5).abs() < 1e-12);
}

#[test]
fn repeated_solves_are_identical() {
    for case in suite() {
        let a = solve(&case.lp, 1e-9).unwrap();
        let b = solve(&case.lp, 1e-9).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(
            a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}

/// Minimum over all basic points of a boxed LP, or `None` if none is feasible.
fn vertex_oracle(lp: &LinearProgram<f64>) -> Option<f64> {
    let n = lp.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in lp.constraints() {
        let mut row = vec![0.0; n];
        for &(j, a) in &c.coeffs {
            row[j] += a;
        }
        planes.push((row, c.rhs));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let (lo, hi) = lp.bounds(j);
        planes.push((e.clone(), lo));
        planes.push((e, hi));
    }
    let mut best: Option<f64> = None;
    let mut pick = Vec::new();
    choose(&planes, n, 0, &mut pick, &mut |sel| {
        if let Some(x) = solve_square(sel) {
            if lp.max_violation(&x) <= 1e-7 {
                let v = lp.objective_value(&x);
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    });
    best
}

fn choose<'a>(
    planes: &'a [(Vec<f64>, f64)],
    k: usize,
    start: usize,
    pick: &mut Vec<&'a (Vec<f64>, f64)>,
    visit: &mut dyn FnMut(&[&(Vec<f64>, f64)]),
) {
    if pick.len() == k {
        visit(pick);
        return;
    }
    for i in start..planes.len() {
        pick.push(&planes[i]);
        choose(planes, k, i + 1, pick, visit);
        pick.pop();
    }
}

fn solve_square(sel: &[&(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let n = sel.len();
    let mut m: Vec<Vec<f64>> = sel
        .iter()
        .map(|(row, b)| {
            let mut r = row.clone();
            r.push(*b);
            r
        })
        .collect();
    for col in 0..n {
        let p = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[p][col].abs() < 1e-9 {
            return None;
        }
        m.swap(col, p);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

fn arb_lp() -> impl Strategy<Value = LinearProgram<f64>> {
    (2usize..=4, 1usize..=4).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(-5i32..=5, n),
            prop::collection::vec((-3i32..=0, 0i32..=3), n),
            prop::collection::vec((prop::collection::vec(-4i32..=4, n), 0u8..3, -6i32..=6), m),
        )
            .prop_map(move |(costs, bounds, rows)| {
                let mut lp = LinearProgram::new();
                for (c, (lo, hi)) in costs.into_iter().zip(bounds) {
                    lp.add_var(lo as f64, hi as f64, c as f64);
                }
                for (coeffs, rel, rhs) in rows {
                    let rel = [Relation::Le, Relation::Eq, Relation::Ge][rel as usize];
                    let coeffs = coeffs
                        .into_iter()
                        .enumerate()
                        .filter(|(_, a)| *a != 0)
                        .map(|(j, a)| (j, a as f64))
                        .collect();
                    lp.add_constraint(coeffs, rel, rhs as f64);
                }
                lp
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn matches_vertex_enumeration(lp in arb_lp()) {
        let sol = solve(&lp, 1e-9).unwrap();
        match vertex_oracle(&lp) {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - best).abs() < 1e-6, "{} vs {}", sol.objective, best);
                prop_assert!(lp.is_feasible(&sol.values, 1e-7));
            }
        }
    }
}

fn primal_l1(num_params: usize, rows: &[RangedRow<f64>]) -> LinearProgram<f64> {
    let mut lp = LinearProgram::with_vars(2 * num_params);
    for j in 0..2 * num_params {
        lp.set_cost(j, 1.0);
    }
    for row in rows {
        let coeffs: Vec<(usize, f64)> = row
            .coeffs
            .iter()
            .flat_map(|&(p, g)| [(2 * p, g), (2 * p + 1, -g)])
            .collect();
        if row.lower == row.upper {
            lp.add_constraint(coeffs, Relation::Eq, row.lower);
            continue;
        }
        if row.lower.is_finite() {
            lp.add_constraint(coeffs.clone(), Relation::Ge, row.lower);
        }
        if row.upper.is_finite() {
            lp.add_constraint(coeffs, Relation::Le, row.upper);
        }
    }
    lp
}

fn arb_ranged() -> impl Strategy<Value = (usize, Vec<RangedRow<f64>>)> {
    (1usize..=5, 1usize..=8).prop_flat_map(|(p, m)| {
        let row = (
            prop::collection::vec(-4i32..=4, p),
            -6i32..=6,
            0i32..=4,
            0u8..4,
        )
            .prop_map(|(g, lo, width, kind)| {
                let coeffs = g
                    .into_iter()
                    .enumerate()
                    .filter(|(_, v)| *v != 0)
                    .map(|(j, v)| (j, v as f64))
                    .collect();
                let lo = lo as f64;
                let (lower, upper) = match kind {
                    0 => (lo, lo),
                    1 => (lo, f64::INFINITY),
                    2 => (f64::NEG_INFINITY, lo),
                    _ => (lo, lo + width as f64),
                };
                RangedRow { coeffs, lower, upper }
            });
        (Just(p), prop::collection::vec(row, m))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn min_l1_dual_matches_primal((p, rows) in arb_ranged()) {
        let primal = solve(&primal_l1(p, &rows), 1e-9).unwrap();
        let dual = solve_min_l1(p, &rows, &SolverOptions { tol: 1e-9, max_iterations: None }).unwrap();
        match dual {
            None => prop_assert_eq!(primal.status, LpStatus::Infeasible),
            Some(w) => {
                prop_assert_eq!(primal.status, LpStatus::Optimal);
                let l1: f64 = w.iter().map(|v| v.abs()).sum();
                prop_assert!((l1 - primal.objective).abs() < 1e-7, "{} vs {}", l1, primal.objective);
                for row in &rows {
                    prop_assert!(row.violation(&w) < 1e-7);
                }
            }
        }
    }
}
