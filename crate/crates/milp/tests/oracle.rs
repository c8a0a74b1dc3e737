use optsort_milp::{
    solve, solve_with, solver_by_name, to_lp_string, Limits, Model, ObjectiveSense, Relation,
    SolveError, Status,
};
use proptest::prelude::*;

/// Exhaustive optimum over an integer box; `None` if infeasible.
fn enumerate(model: &Model) -> Option<f64> {
    let vars = model.vars();
    let ranges: Vec<(i64, i64)> = vars
        .iter()
        .map(|v| (v.lower.ceil() as i64, v.upper.floor() as i64))
        .collect();
    if ranges.iter().any(|&(l, h)| l > h) {
        return None;
    }
    let mut x: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let maximize = model.sense() == ObjectiveSense::Maximize;
    let mut best: Option<f64> = None;
    loop {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        if model.is_feasible(&xf, 1e-9) {
            let obj = model.objective_value(&xf);
            best = Some(match best {
                None => obj,
                Some(b) if maximize => b.max(obj),
                Some(b) => b.min(obj),
            });
        }
        let mut k = 0;
        loop {
            if k == x.len() {
                return best;
            }
            if x[k] < ranges[k].1 {
                x[k] += 1;
                break;
            }
            x[k] = ranges[k].0;
            k += 1;
        }
    }
}

#[derive(Debug, Clone)]
struct Spec {
    upper: Vec<i64>,
    rows: Vec<(Vec<i64>, i64, u8)>,
    obj: Vec<i64>,
    maximize: bool,
}

impl Spec {
    fn model(&self) -> Model {
        let mut m = Model::new("random");
        let vars: Vec<_> = self
            .upper
            .iter()
            .enumerate()
            .map(|(i, &u)| m.add_integer(format!("x{i}"), 0.0, u as f64))
            .collect();
        for (r, (coefs, rhs, rel)) in self.rows.iter().enumerate() {
            let terms = vars.iter().zip(coefs).map(|(&v, &c)| (v, c as f64));
            let rel = match rel % 3 {
                0 => Relation::Le,
                1 => Relation::Ge,
                _ => Relation::Eq,
            };
            m.add_constraint(format!("r{r}"), terms, rel, *rhs as f64);
        }
        let sense = if self.maximize {
            ObjectiveSense::Maximize
        } else {
            ObjectiveSense::Minimize
        };
        m.set_objective(
            sense,
            vars.iter().zip(&self.obj).map(|(&v, &c)| (v, c as f64)),
        );
        m
    }
}

fn spec_strategy(max_vars: usize, max_upper: i64) -> impl Strategy<Value = Spec> {
    (1..=max_vars).prop_flat_map(move |n| {
        (
            prop::collection::vec(0..=max_upper, n),
            prop::collection::vec(
                (prop::collection::vec(-3i64..=5, n), -2i64..=12, 0u8..6),
                0..=5,
            ),
            prop::collection::vec(-5i64..=9, n),
            any::<bool>(),
        )
            .prop_map(|(upper, rows, obj, maximize)| Spec {
                upper,
                rows,
                obj,
                maximize,
            })
    })
}

fn check_against_enumeration(m: &Model, limits: &Limits) {
    let sol = solve(m, limits).unwrap();
    match enumerate(m) {
        None => assert_eq!(sol.status, Status::Infeasible),
        Some(best) => {
            assert_eq!(sol.status, Status::Optimal, "{}", to_lp_string(m));
            let obj = sol.objective.unwrap();
            assert!(
                (obj - best).abs() < 1e-6,
                "solver {obj} vs enumeration {best}"
            );
            let x = sol.values.as_ref().unwrap();
            assert!(m.is_feasible(x, 1e-6));
            assert!(x.iter().all(|v| (v - v.round()).abs() < 1e-6));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn binary_programs_match_enumeration(spec in spec_strategy(12, 1)) {
        check_against_enumeration(&spec.model(), &Limits::nodes(100_000));
    }

    #[test]
    fn general_integer_programs_match_enumeration(spec in spec_strategy(5, 3)) {
        check_against_enumeration(&spec.model(), &Limits::nodes(100_000));
    }

    #[test]
    fn dual_bound_is_valid_on_large_path(spec in spec_strategy(8, 2)) {
        // Force the Lagrangian path: only the warm start or the zero point can
        // be returned, but the bound must still dominate the true optimum.
        let mut spec = spec;
        spec.maximize = true;
        let m = spec.model();
        let limits = Limits { dense_rows: 0, ..Limits::nodes(1000) };
        let sol = solve(&m, &limits).unwrap();
        if let Some(best) = enumerate(&m) {
            prop_assert!(sol.bound >= best - 1e-6, "bound {} below optimum {}", sol.bound, best);
            if let Some(obj) = sol.objective {
                prop_assert!(obj <= best + 1e-6);
                prop_assert!(m.is_feasible(sol.values.as_ref().unwrap(), 1e-6));
            }
        }
    }

    #[test]
    fn solves_are_deterministic(spec in spec_strategy(10, 2)) {
        let m = spec.model();
        let a = solve(&m, &Limits::nodes(50_000)).unwrap();
        let b = solve(&m, &Limits::nodes(50_000)).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.values, b.values);
        prop_assert_eq!(a.nodes, b.nodes);
    }

    #[test]
    fn bound_never_below_incumbent(spec in spec_strategy(10, 3)) {
        let mut spec = spec;
        spec.maximize = true;
        let m = spec.model();
        // A tiny node budget leaves most searches unfinished.
        let sol = solve(&m, &Limits::nodes(3)).unwrap();
        if let Some(obj) = sol.objective {
            prop_assert!(sol.bound >= obj - 1e-9);
        }
        if let Some(best) = enumerate(&m) {
            prop_assert!(sol.bound >= best - 1e-6);
        }
    }
}

#[test]
fn single_row_knapsack() {
    let mut m = Model::new("k");
    let x1 = m.add_binary("x1");
    let x2 = m.add_binary("x2");
    m.add_constraint("c", [(x1, 1.0), (x2, 1.0)], Relation::Le, 1.0);
    m.set_objective(ObjectiveSense::Maximize, [(x1, 1.0), (x2, 1.0)]);
    let sol = solve(&m, &Limits::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert_eq!(sol.objective, Some(1.0));
}

#[test]
fn contradictory_bounds_are_infeasible() {
    let mut m = Model::new("c");
    let x = m.add_integer("x", 0.0, 10.0);
    m.add_constraint("lo", [(x, 1.0)], Relation::Ge, 2.0);
    m.add_constraint("hi", [(x, 1.0)], Relation::Le, 1.0);
    m.set_objective(ObjectiveSense::Maximize, [(x, 1.0)]);
    assert_eq!(
        solve(&m, &Limits::default()).unwrap().status,
        Status::Infeasible
    );
}

#[test]
fn weighted_knapsack_needs_branching() {
    // LP optimum is fractional; integer optimum picks items 1 and 2 (value 22).
    let mut m = Model::new("knap");
    let w = [5.0, 4.0, 3.0, 6.0];
    let v = [10.0, 12.0, 10.0, 13.0];
    let xs: Vec<_> = (0..4).map(|i| m.add_binary(format!("x{i}"))).collect();
    m.add_constraint(
        "w",
        xs.iter().zip(w).map(|(&x, c)| (x, c)),
        Relation::Le,
        8.0,
    );
    m.set_objective(
        ObjectiveSense::Maximize,
        xs.iter().zip(v).map(|(&x, c)| (x, c)),
    );
    let sol = solve(&m, &Limits::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert_eq!(sol.objective, Some(22.0));
    assert!(sol.nodes > 1);
}

#[test]
fn continuous_variables_and_ranges() {
    // max x + y, 1 <= x - y <= 2, x + 2y <= 8, x, y >= 0 continuous: x = 4, y = 2
    let mut m = Model::new("lp");
    let x = m.add_continuous("x", 0.0, f64::INFINITY);
    let y = m.add_continuous("y", 0.0, f64::INFINITY);
    m.add_range("band", [(x, 1.0), (y, -1.0)], 1.0, 2.0);
    m.add_constraint("cap", [(x, 1.0), (y, 2.0)], Relation::Le, 8.0);
    m.set_objective(ObjectiveSense::Maximize, [(x, 1.0), (y, 1.0)]);
    let sol = solve(&m, &Limits::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective.unwrap() - 6.0).abs() < 1e-9);
    assert!((sol.value(x) - 4.0).abs() < 1e-9);
}

#[test]
fn unbounded_is_reported() {
    let mut m = Model::new("u");
    let x = m.add_integer("x", 0.0, f64::INFINITY);
    let y = m.add_integer("y", 0.0, f64::INFINITY);
    m.add_constraint("c", [(x, 1.0), (y, -1.0)], Relation::Le, 3.0);
    m.set_objective(ObjectiveSense::Maximize, [(x, 1.0)]);
    assert_eq!(
        solve(&m, &Limits::default()).unwrap().status,
        Status::Unbounded
    );
}

#[test]
fn warm_start_is_used_on_large_path() {
    let mut m = Model::new("w");
    let xs: Vec<_> = (0..6).map(|i| m.add_binary(format!("x{i}"))).collect();
    for pair in xs.chunks(2) {
        m.add_constraint("p", [(pair[0], 1.0), (pair[1], 1.0)], Relation::Le, 1.0);
    }
    m.add_constraint("all", xs.iter().map(|&x| (x, 1.0)), Relation::Le, 3.0);
    m.set_objective(ObjectiveSense::Maximize, xs.iter().map(|&x| (x, 1.0)));
    let warm = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
    let limits = Limits {
        dense_rows: 0,
        ..Limits::default()
    };
    let sol = solve_with(&m, &limits, Some(&warm)).unwrap();
    assert_eq!(sol.values.as_deref(), Some(&warm[..]));
    // The bound 3 is reached by the dual, so the warm start is certified optimal.
    assert_eq!(sol.status, Status::Optimal);

    let err = solve_with(&m, &limits, Some(&warm[..2])).unwrap_err();
    assert_eq!(
        err,
        SolveError::WarmStartLength {
            expected: 6,
            got: 2
        }
    );
}

#[test]
fn backend_registry() {
    assert_eq!(solver_by_name("embedded").unwrap().name(), "embedded");
    assert!(matches!(
        solver_by_name("cplex"),
        Err(SolveError::UnknownBackend(_))
    ));
}
