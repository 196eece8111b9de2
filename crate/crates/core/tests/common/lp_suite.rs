//! Linear programs with optima worked out by hand.

use vnn_core::lp::{LinearProgram, LpStatus, Relation};

pub struct KnownLp {
    pub name: &'static str,
    pub lp: LinearProgram<f64>,
    pub status: LpStatus,
    pub objective: Option<f64>,
}

const INF: f64 = f64::INFINITY;

fn free(lp: &mut LinearProgram<f64>, cost: f64) -> usize {
    lp.add_var(-INF, INF, cost)
}

pub fn suite() -> Vec<KnownLp> {
    let mut out = Vec::new();

    let mut lp = LinearProgram::with_vars(2);
    lp.set_cost(0, 1.0);
    lp.set_cost(1, 1.0);
    lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Ge, 1.0);
    out.push(KnownLp { name: "covering row", lp, status: LpStatus::Optimal, objective: Some(1.0) });

    let mut lp = LinearProgram::new();
    let x = free(&mut lp, 0.0);
    lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 1.0);
    lp.add_constraint(vec![(x, 1.0)], Relation::Le, 0.0);
    out.push(KnownLp { name: "contradictory bounds", lp, status: LpStatus::Infeasible, objective: None });

    let mut lp = LinearProgram::new();
    let x = free(&mut lp, -1.0);
    lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 0.0);
    out.push(KnownLp { name: "open ray", lp, status: LpStatus::Unbounded, objective: None });

    let mut lp = LinearProgram::new();
    let w = free(&mut lp, 0.0);
    let t = free(&mut lp, 1.0);
    lp.add_constraint(vec![(t, 1.0), (w, -1.0)], Relation::Ge, 0.0);
    lp.add_constraint(vec![(t, 1.0), (w, 1.0)], Relation::Ge, 0.0);
    lp.add_constraint(vec![(w, 1.0)], Relation::Eq, -3.0);
    out.push(KnownLp { name: "absolute value gadget", lp, status: LpStatus::Optimal, objective: Some(3.0) });

    // max 3x + 5y, optimum at (2, 6)
    let mut lp = LinearProgram::with_vars(2);
    lp.set_cost(0, -3.0);
    lp.set_cost(1, -5.0);
    lp.add_constraint(vec![(0, 1.0)], Relation::Le, 4.0);
    lp.add_constraint(vec![(1, 2.0)], Relation::Le, 12.0);
    lp.add_constraint(vec![(0, 3.0), (1, 2.0)], Relation::Le, 18.0);
    out.push(KnownLp { name: "textbook production", lp, status: LpStatus::Optimal, objective: Some(-36.0) });

    // optimum at (3, 1)
    let mut lp = LinearProgram::with_vars(2);
    lp.set_cost(0, 0.6);
    lp.set_cost(1, 1.0);
    lp.add_constraint(vec![(0, 10.0), (1, 4.0)], Relation::Ge, 20.0);
    lp.add_constraint(vec![(0, 5.0), (1, 5.0)], Relation::Ge, 20.0);
    lp.add_constraint(vec![(0, 2.0), (1, 6.0)], Relation::Ge, 12.0);
    out.push(KnownLp { name: "diet", lp, status: LpStatus::Optimal, objective: Some(2.8) });

    // unique solution x1 = 2, x2 = -1
    let mut lp = LinearProgram::new();
    let x1 = free(&mut lp, 1.0);
    let x2 = free(&mut lp, 2.0);
    lp.add_constraint(vec![(x1, 1.0), (x2, 1.0)], Relation::Eq, 1.0);
    lp.add_constraint(vec![(x1, 1.0), (x2, -1.0)], Relation::Eq, 3.0);
    out.push(KnownLp { name: "free equality system", lp, status: LpStatus::Optimal, objective: Some(0.0) });

    // x at its upper bound 3, y = 0.5
    let mut lp = LinearProgram::new();
    let x = lp.add_var(0.0, 3.0, -1.0);
    let y = lp.add_var(0.0, 3.0, -1.0);
    lp.add_constraint(vec![(x, 1.0), (y, 2.0)], Relation::Le, 4.0);
    out.push(KnownLp { name: "boxed variables", lp, status: LpStatus::Optimal, objective: Some(-3.5) });

    // Beale's example, cycles under plain Dantzig pricing
    let mut lp = LinearProgram::with_vars(4);
    for (j, c) in [-0.75, 150.0, -0.02, 6.0].into_iter().enumerate() {
        lp.set_cost(j, c);
    }
    lp.add_constraint(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], Relation::Le, 0.0);
    lp.add_constraint(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], Relation::Le, 0.0);
    lp.add_constraint(vec![(2, 1.0)], Relation::Le, 1.0);
    out.push(KnownLp { name: "degenerate cycling example", lp, status: LpStatus::Optimal, objective: Some(-0.05) });

    let mut lp = LinearProgram::with_vars(2);
    lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 1.0);
    lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 2.0);
    out.push(KnownLp { name: "parallel equalities", lp, status: LpStatus::Infeasible, objective: None });

    out
}
