//! Best-first branch and bound over the simplex relaxation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::error::SolveError;
use crate::lagrange::dual_bound;
use crate::model::{Model, ObjectiveSense, VarId};
use crate::presolve::{presolve, Problem, Row};
use crate::simplex::{solve_lp, LpProblem, LpStatus};

const FEAS_TOL: f64 = 1e-6;
const INT_TOL: f64 = 1e-6;

/// Search limits. Runs that stop on `time` are not reproducible; tests and
/// deterministic pipelines should rely on `nodes`.
#[derive(Debug, Clone)]
pub struct Limits {
    pub time: Option<Duration>,
    pub nodes: usize,
    /// Components with more rows than this skip the dense simplex and are
    /// answered by the warm start plus a Lagrangian bound.
    pub dense_rows: usize,
    pub lagrange_iters: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            time: Some(Duration::from_secs(60)),
            nodes: 200_000,
            dense_rows: 400,
            lagrange_iters: 400,
        }
    }
}

impl Limits {
    pub fn nodes(nodes: usize) -> Self {
        Self {
            time: None,
            nodes,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status {
    Optimal,
    /// A limit stopped the search with an incumbent; `gap` is relative.
    Feasible {
        gap: f64,
    },
    Infeasible,
    Unbounded,
    /// A limit stopped the search before any feasible point was found.
    LimitReached,
}

impl Status {
    pub fn has_solution(&self) -> bool {
        matches!(self, Status::Optimal | Status::Feasible { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub values: Option<Vec<f64>>,
    pub objective: Option<f64>,
    /// Dual bound in the model's own sense (upper bound when maximizing).
    pub bound: f64,
    pub nodes: usize,
}

impl Solution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values.as_ref().map_or(0.0, |x| x[v.index()])
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Interface for swapping in another MILP engine.
pub trait MilpSolver: Send + Sync {
    fn name(&self) -> &str;

    fn solve(
        &self,
        model: &Model,
        limits: &Limits,
        warm_start: Option<&[f64]>,
    ) -> Result<Solution, SolveError>;
}

/// Built-in engine: presolve, component split, dense simplex, best-first B&B.
#[derive(Debug, Clone, Copy, Default)]
pub struct BranchAndBound;

impl MilpSolver for BranchAndBound {
    fn name(&self) -> &str {
        "embedded"
    }

    fn solve(
        &self,
        model: &Model,
        limits: &Limits,
        warm_start: Option<&[f64]>,
    ) -> Result<Solution, SolveError> {
        solve_with(model, limits, warm_start)
    }
}

pub fn solver_by_name(name: &str) -> Result<Box<dyn MilpSolver>, SolveError> {
    match name {
        "embedded" | "bnb" => Ok(Box::new(BranchAndBound)),
        other => Err(SolveError::UnknownBackend(other.to_string())),
    }
}

pub fn solve(model: &Model, limits: &Limits) -> Result<Solution, SolveError> {
    solve_with(model, limits, None)
}

pub fn solve_with(
    model: &Model,
    limits: &Limits,
    warm_start: Option<&[f64]>,
) -> Result<Solution, SolveError> {
    model.validate()?;
    if let Some(w) = warm_start {
        if w.len() != model.num_vars() {
            return Err(SolveError::WarmStartLength {
                expected: model.num_vars(),
                got: w.len(),
            });
        }
    }
    let sign = match model.sense() {
        ObjectiveSense::Maximize => 1.0,
        ObjectiveSense::Minimize => -1.0,
    };
    let problem = Problem {
        lo: model.vars().iter().map(|v| v.lower).collect(),
        hi: model.vars().iter().map(|v| v.upper).collect(),
        integer: model.vars().iter().map(|v| v.integer).collect(),
        cost: model.objective().iter().map(|c| sign * c).collect(),
        rows: model
            .rows()
            .iter()
            .map(|r| Row {
                terms: r.terms.iter().map(|&(v, c)| (v.index(), c)).collect(),
                lo: r.lower,
                hi: r.upper,
            })
            .collect(),
    };
    let deadline = limits.time.map(|t| Instant::now() + t);
    let mut lo = problem.lo.clone();
    let mut hi = problem.hi.clone();
    let infeasible = Solution {
        status: Status::Infeasible,
        values: None,
        objective: None,
        bound: -sign * f64::INFINITY,
        nodes: 0,
    };
    let Ok(active) = presolve(&problem, &mut lo, &mut hi) else {
        return Ok(infeasible);
    };

    let n = problem.lo.len();
    let components = components(&problem, &active, n);
    let mut values = vec![0.0; n];
    let mut total_obj = 0.0;
    let mut total_bound = 0.0;
    let mut nodes_left = limits.nodes;
    let mut all_optimal = true;
    let mut missing = false;
    let mut nodes_used = 0;
    for comp in &components {
        let warm: Option<Vec<f64>> = warm_start.map(|w| comp.vars.iter().map(|&j| w[j]).collect());
        let r = solve_component(
            &problem,
            comp,
            &lo,
            &hi,
            warm.as_deref(),
            limits,
            deadline,
            &mut nodes_left,
        );
        nodes_used += r.nodes;
        match r.outcome {
            Outcome::Infeasible => {
                return Ok(Solution {
                    nodes: nodes_used,
                    ..infeasible
                })
            }
            Outcome::Unbounded => {
                return Ok(Solution {
                    status: Status::Unbounded,
                    values: None,
                    objective: None,
                    bound: sign * f64::INFINITY,
                    nodes: nodes_used,
                })
            }
            Outcome::Solved {
                x,
                obj,
                bound,
                proven,
            } => {
                total_bound += bound;
                match x {
                    Some(x) => {
                        for (k, &j) in comp.vars.iter().enumerate() {
                            values[j] = x[k];
                        }
                        total_obj += obj;
                    }
                    None => missing = true,
                }
                all_optimal &= proven;
            }
        }
    }
    for (j, v) in values.iter_mut().enumerate() {
        if problem.integer[j] {
            *v = v.round();
        }
    }
    if missing {
        return Ok(Solution {
            status: Status::LimitReached,
            values: None,
            objective: None,
            bound: sign * total_bound,
            nodes: nodes_used,
        });
    }
    debug_assert!(
        model.max_violation(&values) <= FEAS_TOL,
        "assembled solution violates the model by {}",
        model.max_violation(&values)
    );
    let objective = model.objective_value(&values);
    let status = if all_optimal {
        total_bound = total_obj;
        Status::Optimal
    } else {
        let gap = ((total_bound - total_obj) / total_obj.abs().max(1.0)).max(0.0);
        if gap <= 1e-9 {
            Status::Optimal
        } else {
            Status::Feasible { gap }
        }
    };
    Ok(Solution {
        status,
        values: Some(values),
        objective: Some(objective),
        bound: sign * total_bound,
        nodes: nodes_used,
    })
}

struct Component {
    vars: Vec<usize>,
    rows: Vec<usize>,
}

fn components(p: &Problem, active: &[bool], n: usize) -> Vec<Component> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    for (r, row) in p.rows.iter().enumerate() {
        if !active[r] {
            continue;
        }
        if let Some(&(first, _)) = row.terms.first() {
            for &(j, _) in &row.terms[1..] {
                let (a, b) = (find(&mut parent, first), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut index_of_root = vec![usize::MAX; n];
    let mut comps: Vec<Component> = Vec::new();
    for j in 0..n {
        let root = find(&mut parent, j);
        if index_of_root[root] == usize::MAX {
            index_of_root[root] = comps.len();
            comps.push(Component {
                vars: Vec::new(),
                rows: Vec::new(),
            });
        }
        comps[index_of_root[root]].vars.push(j);
    }
    for (r, row) in p.rows.iter().enumerate() {
        if active[r] {
            if let Some(&(j, _)) = row.terms.first() {
                let root = find(&mut parent, j);
                comps[index_of_root[root]].rows.push(r);
            }
        }
    }
    comps
}

enum Outcome {
    Infeasible,
    Unbounded,
    Solved {
        x: Option<Vec<f64>>,
        obj: f64,
        bound: f64,
        proven: bool,
    },
}

struct ComponentResult {
    outcome: Outcome,
    nodes: usize,
}

#[allow(clippy::too_many_arguments)]
fn solve_component(
    p: &Problem,
    comp: &Component,
    lo: &[f64],
    hi: &[f64],
    warm: Option<&[f64]>,
    limits: &Limits,
    deadline: Option<Instant>,
    nodes_left: &mut usize,
) -> ComponentResult {
    let mut local_of = std::collections::HashMap::with_capacity(comp.vars.len());
    for (k, &j) in comp.vars.iter().enumerate() {
        local_of.insert(j, k);
    }
    let local = Problem {
        lo: comp.vars.iter().map(|&j| lo[j]).collect(),
        hi: comp.vars.iter().map(|&j| hi[j]).collect(),
        integer: comp.vars.iter().map(|&j| p.integer[j]).collect(),
        cost: comp.vars.iter().map(|&j| p.cost[j]).collect(),
        rows: comp
            .rows
            .iter()
            .map(|&r| Row {
                terms: p.rows[r]
                    .terms
                    .iter()
                    .map(|&(j, a)| (local_of[&j], a))
                    .collect(),
                lo: p.rows[r].lo,
                hi: p.rows[r].hi,
            })
            .collect(),
    };
    let integral_obj =
        local
            .cost
            .iter()
            .zip(&local.integer)
            .all(|(&c, &int)| if int { c.fract() == 0.0 } else { c == 0.0 });

    if local.rows.is_empty() {
        return ComponentResult {
            outcome: box_only(&local),
            nodes: 0,
        };
    }

    let mut search = Search {
        p: &local,
        integral_obj,
        incumbent: None,
    };
    if let Some(w) = warm {
        search.offer(w.to_vec());
    }
    if local.rows.len() > limits.dense_rows {
        return ComponentResult {
            outcome: search.large(limits, deadline),
            nodes: 0,
        };
    }
    search.branch_and_bound(deadline, nodes_left)
}

fn box_only(p: &Problem) -> Outcome {
    let mut x = Vec::with_capacity(p.lo.len());
    for j in 0..p.lo.len() {
        let v = if p.cost[j] > 0.0 {
            p.hi[j]
        } else if p.cost[j] < 0.0 {
            p.lo[j]
        } else if p.lo[j].is_finite() {
            p.lo[j]
        } else if p.hi[j].is_finite() {
            p.hi[j]
        } else {
            0.0
        };
        if !v.is_finite() {
            return Outcome::Unbounded;
        }
        x.push(v);
    }
    let obj = x.iter().zip(&p.cost).map(|(a, b)| a * b).sum();
    Outcome::Solved {
        x: Some(x),
        obj,
        bound: obj,
        proven: true,
    }
}

struct Search<'a> {
    p: &'a Problem,
    integral_obj: bool,
    incumbent: Option<(f64, Vec<f64>)>,
}

struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    bound: f64,
}

#[derive(PartialEq)]
struct Key {
    bound: f64,
    id: usize,
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

enum NodeLp {
    Infeasible,
    Unbounded,
    Unknown,
    Solved(Vec<f64>, f64),
}

impl Search<'_> {
    fn objective(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.p.cost).map(|(a, b)| a * b).sum()
    }

    /// Snaps integers and records `x` as incumbent when feasible and better.
    /// The presolved box plus the surviving rows imply every original row.
    fn offer(&mut self, mut x: Vec<f64>) -> bool {
        for (v, &int) in x.iter_mut().zip(&self.p.integer) {
            if int {
                *v = v.round();
            }
        }
        for j in 0..x.len() {
            if x[j] < self.p.lo[j] - FEAS_TOL || x[j] > self.p.hi[j] + FEAS_TOL {
                return false;
            }
        }
        for row in &self.p.rows {
            let a: f64 = row.terms.iter().map(|&(j, c)| c * x[j]).sum();
            if a < row.lo - FEAS_TOL || a > row.hi + FEAS_TOL {
                return false;
            }
        }
        let obj = self.objective(&x);
        match &self.incumbent {
            Some((best, _)) if *best >= obj => false,
            _ => {
                self.incumbent = Some((obj, x));
                true
            }
        }
    }

    fn effective(&self, bound: f64) -> f64 {
        if self.integral_obj {
            (bound + 1e-6).floor()
        } else {
            bound
        }
    }

    fn prunable(&self, bound: f64) -> bool {
        match &self.incumbent {
            None => false,
            Some((best, _)) => {
                let b = self.effective(bound);
                b <= best + 1e-9 * (1.0 + best.abs())
            }
        }
    }

    fn solve_node(&self, lo: &mut [f64], hi: &mut [f64]) -> NodeLp {
        let Ok(active) = presolve(self.p, lo, hi) else {
            return NodeLp::Infeasible;
        };
        let n = lo.len();
        let mut col_of = vec![usize::MAX; n];
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut col_lo = Vec::new();
        let mut col_hi = Vec::new();
        let mut cost = Vec::new();
        for j in 0..n {
            if lo[j] != hi[j] {
                col_of[j] = cols.len();
                cols.push(Vec::new());
                col_lo.push(lo[j]);
                col_hi.push(hi[j]);
                cost.push(self.p.cost[j]);
            }
        }
        let mut row_lo = Vec::new();
        let mut row_hi = Vec::new();
        for (r, row) in self.p.rows.iter().enumerate() {
            if !active[r] {
                continue;
            }
            let i = row_lo.len();
            let mut fixed = 0.0;
            for &(j, a) in &row.terms {
                if col_of[j] == usize::MAX {
                    fixed += a * lo[j];
                } else {
                    cols[col_of[j]].push((i, a));
                }
            }
            row_lo.push(row.lo - fixed);
            row_hi.push(row.hi - fixed);
        }
        let lp = LpProblem {
            nrows: row_lo.len(),
            cols,
            row_lo,
            row_hi,
            col_lo,
            col_hi,
            cost,
        };
        let res = solve_lp(&lp);
        match res.status {
            LpStatus::Infeasible => NodeLp::Infeasible,
            LpStatus::Unbounded => NodeLp::Unbounded,
            LpStatus::IterationLimit => NodeLp::Unknown,
            LpStatus::Optimal => {
                let mut x: Vec<f64> = lo.to_vec();
                for j in 0..n {
                    if col_of[j] != usize::MAX {
                        x[j] = res.x[col_of[j]];
                    }
                }
                let obj = self.objective(&x);
                NodeLp::Solved(x, obj)
            }
        }
    }

    fn branching_var(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (j, &v) in x.iter().enumerate() {
            if !self.p.integer[j] {
                continue;
            }
            let f = v - v.floor();
            let score = f.min(1.0 - f);
            if score <= INT_TOL {
                continue;
            }
            match best {
                Some((_, s)) if s >= score => {}
                _ => best = Some((j, score)),
            }
        }
        best.map(|(j, _)| j)
    }

    fn branch_and_bound(
        mut self,
        deadline: Option<Instant>,
        nodes_left: &mut usize,
    ) -> ComponentResult {
        let mut nodes = 0usize;
        let mut lo = self.p.lo.clone();
        let mut hi = self.p.hi.clone();
        if *nodes_left == 0 {
            return self.finish(f64::INFINITY, false, 0);
        }
        *nodes_left -= 1;
        nodes += 1;
        let (x, bound) = match self.solve_node(&mut lo, &mut hi) {
            NodeLp::Infeasible => {
                return ComponentResult {
                    outcome: Outcome::Infeasible,
                    nodes,
                }
            }
            NodeLp::Unbounded => {
                return ComponentResult {
                    outcome: Outcome::Unbounded,
                    nodes,
                }
            }
            NodeLp::Unknown => return self.finish(f64::INFINITY, false, nodes),
            NodeLp::Solved(x, b) => (x, b),
        };
        let mut heap: BinaryHeap<Key> = BinaryHeap::new();
        let mut store: Vec<Option<Node>> = Vec::new();
        self.offer(x.clone());
        store.push(Some(Node { lo, hi, x, bound }));
        heap.push(Key { bound, id: 0 });
        let open_bound;
        loop {
            let Some(key) = heap.pop() else {
                open_bound = f64::NEG_INFINITY;
                break;
            };
            if self.prunable(key.bound) {
                open_bound = f64::NEG_INFINITY;
                break;
            }
            let limit_hit = *nodes_left < 2 || deadline.is_some_and(|d| Instant::now() >= d);
            if limit_hit {
                open_bound = key.bound;
                break;
            }
            let node = store[key.id].take().expect("node stored once");
            let Some(j) = self.branching_var(&node.x) else {
                // Integral LP optimum: the node is solved.
                self.offer(node.x);
                continue;
            };
            let v = node.x[j];
            for (child_lo, child_hi) in [(node.lo[j], v.floor()), (v.ceil(), node.hi[j])] {
                if child_lo > child_hi {
                    continue;
                }
                let mut lo = node.lo.clone();
                let mut hi = node.hi.clone();
                lo[j] = child_lo;
                hi[j] = child_hi;
                *nodes_left -= 1;
                nodes += 1;
                match self.solve_node(&mut lo, &mut hi) {
                    NodeLp::Infeasible => {}
                    NodeLp::Unbounded | NodeLp::Unknown => {
                        // Cannot bound this subtree; keep it open at the parent bound.
                        let id = store.len();
                        store.push(Some(Node {
                            lo,
                            hi,
                            x: node.x.clone(),
                            bound: node.bound,
                        }));
                        heap.push(Key {
                            bound: node.bound,
                            id,
                        });
                        return self.finish(node.bound, false, nodes);
                    }
                    NodeLp::Solved(x, b) => {
                        let b = b.min(node.bound);
                        self.offer(x.clone());
                        if self.prunable(b) {
                            continue;
                        }
                        let id = store.len();
                        store.push(Some(Node {
                            lo,
                            hi,
                            x,
                            bound: b,
                        }));
                        heap.push(Key { bound: b, id });
                    }
                }
            }
        }
        let proven = open_bound == f64::NEG_INFINITY;
        self.finish(open_bound, proven, nodes)
    }

    fn finish(self, open_bound: f64, proven: bool, nodes: usize) -> ComponentResult {
        let outcome = match self.incumbent {
            None if proven => Outcome::Infeasible,
            None => Outcome::Solved {
                x: None,
                obj: 0.0,
                bound: open_bound,
                proven: false,
            },
            Some((obj, x)) => {
                let bound = if proven {
                    obj
                } else {
                    let b = if self.integral_obj {
                        (open_bound + 1e-6).floor()
                    } else {
                        open_bound
                    };
                    b.max(obj)
                };
                Outcome::Solved {
                    x: Some(x),
                    obj,
                    bound,
                    proven: proven || bound <= obj,
                }
            }
        };
        ComponentResult { outcome, nodes }
    }

    /// Large components: keep the warm start (or the trivial point if it is
    /// feasible) and certify it with a Lagrangian bound.
    fn large(mut self, limits: &Limits, deadline: Option<Instant>) -> Outcome {
        if self.incumbent.is_none() {
            let trivial: Vec<f64> = (0..self.p.lo.len())
                .map(|j| 0.0f64.clamp(self.p.lo[j], self.p.hi[j]))
                .collect();
            self.offer(trivial);
        }
        let rows: Vec<usize> = (0..self.p.rows.len()).collect();
        let target = self.incumbent.as_ref().map(|(o, _)| *o);
        let stop_gap = if self.integral_obj { 1.0 - 1e-6 } else { 1e-9 };
        let db = dual_bound(
            self.p,
            &rows,
            &self.p.lo,
            &self.p.hi,
            target.unwrap_or(f64::NEG_INFINITY),
            stop_gap,
            limits.lagrange_iters,
            deadline,
        );
        if !db.is_finite() && db > 0.0 && self.incumbent.is_none() {
            return Outcome::Solved {
                x: None,
                obj: 0.0,
                bound: f64::INFINITY,
                proven: false,
            };
        }
        let bound = if self.integral_obj {
            (db + 1e-6).floor()
        } else {
            db
        };
        match self.incumbent {
            None => Outcome::Solved {
                x: None,
                obj: 0.0,
                bound,
                proven: false,
            },
            Some((obj, x)) => {
                let bound = bound.max(obj);
                Outcome::Solved {
                    proven: bound <= obj + 1e-9 * (1.0 + obj.abs()),
                    x: Some(x),
                    obj,
                    bound,
                }
            }
        }
    }
}
