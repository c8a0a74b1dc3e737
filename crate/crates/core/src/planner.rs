//! Shift planning: destination to chute matching with planned volumes.

use optsort_milp::{Limits, MilpSolver, Model, ObjectiveSense, Relation, Status, VarId};
use serde::{Deserialize, Serialize};

use crate::demand::DemandForecast;
use crate::error::{CoreError, Result};
use crate::layout::{chute_shift_capacity, ChuteKind, Layout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    /// Σ X: number of destination/chute matches.
    MatchCount,
    /// Σ Y: number of planned parcels.
    #[default]
    ParcelCount,
    /// Σ Y first, then as many matches as possible (weighted sum).
    ParcelsThenMatches,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BigM {
    /// min(B_i, ⌊T/t_j⌋), the tightest valid constant.
    #[default]
    Tight,
    Constant(u64),
}

/// Whether a destination pinned to a direct chute may also use spiral chutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectRule {
    /// Up to M_i - 1 further spiral chutes, without the at-least-one bound.
    #[default]
    SpiralRemainder,
    /// The direct chute is the destination's only chute.
    Exclusive,
}

#[derive(Debug, Clone)]
pub struct PlanningProblem {
    pub forecast: DemandForecast,
    pub layout: Layout,
    pub big_m: BigM,
    pub objective: ObjectiveKind,
    pub direct_rule: DirectRule,
}

impl PlanningProblem {
    pub fn new(forecast: DemandForecast, layout: Layout) -> Self {
        Self {
            forecast,
            layout,
            big_m: BigM::Tight,
            objective: ObjectiveKind::ParcelCount,
            direct_rule: DirectRule::SpiralRemainder,
        }
    }

    pub fn with_objective(mut self, objective: ObjectiveKind) -> Self {
        self.objective = objective;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortPlan {
    /// X, `n × k`.
    pub x: Vec<Vec<bool>>,
    /// Y, `n × k`.
    pub y: Vec<Vec<u64>>,
    pub objective_value: f64,
    pub objective_kind: ObjectiveKind,
    /// Solver status for the residual model (direct pins are not searched).
    pub status: Status,
    /// Dual bound on `objective_value`.
    pub bound: f64,
}

impl SortPlan {
    pub fn planned_parcels(&self) -> u64 {
        self.y.iter().flatten().sum()
    }

    pub fn matches(&self) -> usize {
        self.x.iter().flatten().filter(|&&b| b).count()
    }

    pub fn chute_load(&self, j: usize) -> u64 {
        self.y.iter().map(|row| row[j]).sum()
    }

    pub fn chutes_of(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.x[i]
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| j)
    }
}

/// Direct-chute pins and what is left for the matching model.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectAssignment {
    /// `(destination, chute, planned volume)`.
    pub fixed: Vec<(usize, usize, u64)>,
    pub residual: Residual,
}

/// The matching model's index sets and right-hand sides.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub dests: Vec<usize>,
    pub chutes: Vec<usize>,
    pub load: Vec<u64>,
    pub max_matches: Vec<u32>,
    /// Destinations that need at least one match (constraint lower bound).
    pub must_match: Vec<bool>,
    pub chute_cap: Vec<u64>,
    pub chute_slots: Vec<u32>,
}

/// Pins one destination to every direct chute: in chute id order, the heaviest
/// admissible destination not yet pinned. Ties in load go to the lower index.
pub fn assign_direct_chutes(
    forecast: &DemandForecast,
    layout: &Layout,
    rule: DirectRule,
) -> Result<DirectAssignment> {
    let n = layout.n();
    let direct: Vec<usize> = layout.direct_chutes().collect();
    if direct.len() > n {
        return Err(CoreError::config(format!(
            "{} direct chutes but only {n} destinations",
            direct.len()
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| forecast.loads[b].cmp(&forecast.loads[a]).then(a.cmp(&b)));
    let mut fixed = Vec::with_capacity(direct.len());
    let mut pinned = vec![None; n];
    for &j in &direct {
        let Some(i) = order
            .iter()
            .copied()
            .find(|&i| pinned[i].is_none() && layout.is_admissible(i, j))
        else {
            return Err(CoreError::config(format!(
                "no unpinned destination is admissible to direct chute {j}"
            )));
        };
        let cap = chute_shift_capacity(&layout.chutes[j], forecast.shift_ms);
        let vol = forecast.loads[i].min(cap);
        fixed.push((i, j, vol));
        pinned[i] = Some(vol);
    }
    let chutes: Vec<usize> = layout.spiral_chutes().collect();
    let mut residual = Residual {
        dests: Vec::new(),
        chute_cap: chutes
            .iter()
            .map(|&j| chute_shift_capacity(&layout.chutes[j], forecast.shift_ms))
            .collect(),
        chute_slots: chutes
            .iter()
            .map(|&j| layout.max_dests_per_chute[j])
            .collect(),
        chutes,
        load: Vec::new(),
        max_matches: Vec::new(),
        must_match: Vec::new(),
    };
    for i in 0..n {
        match pinned[i] {
            None => {
                residual.dests.push(i);
                residual.load.push(forecast.loads[i]);
                residual.max_matches.push(layout.max_chutes_per_dest[i]);
                residual.must_match.push(true);
            }
            Some(vol) if rule == DirectRule::SpiralRemainder => {
                residual.dests.push(i);
                residual.load.push(forecast.loads[i] - vol);
                residual
                    .max_matches
                    .push(layout.max_chutes_per_dest[i].saturating_sub(1));
                residual.must_match.push(false);
            }
            Some(_) => {}
        }
    }
    Ok(DirectAssignment { fixed, residual })
}

/// Variable handles of a built planning model, indexed like the residual.
#[derive(Debug, Clone)]
pub struct PlanModel {
    pub model: Model,
    pub direct: DirectAssignment,
    pub x: Vec<Vec<VarId>>,
    pub y: Vec<Vec<VarId>>,
}

fn big_m(problem: &PlanningProblem, load: u64, cap: u64) -> u64 {
    match problem.big_m {
        BigM::Tight => load.min(cap),
        BigM::Constant(m) => m,
    }
}

fn match_weight(r: &Residual) -> f64 {
    let slots: u64 = r.chute_slots.iter().map(|&s| s as u64).sum();
    let fan: u64 = r.max_matches.iter().map(|&m| m as u64).sum();
    let pairs = (r.dests.len() * r.chutes.len()) as u64;
    (slots.min(fan).min(pairs) + 1) as f64
}

pub fn build_plan_model(problem: &PlanningProblem) -> Result<PlanModel> {
    let direct = assign_direct_chutes(&problem.forecast, &problem.layout, problem.direct_rule)?;
    let r = &direct.residual;
    let (nr, kr) = (r.dests.len(), r.chutes.len());
    let mut m = Model::new("plan");
    let mut x = vec![Vec::with_capacity(kr); nr];
    let mut y = vec![Vec::with_capacity(kr); nr];
    for a in 0..nr {
        for b in 0..kr {
            let (i, j) = (r.dests[a], r.chutes[b]);
            x[a].push(m.add_binary(format!("X_{i}_{j}")));
            let ub = big_m(problem, r.load[a], r.chute_cap[b]);
            y[a].push(m.add_integer(format!("Y_{i}_{j}"), 0.0, ub as f64));
        }
    }
    for a in 0..nr {
        let lo = if r.must_match[a] { 1.0 } else { 0.0 };
        let i = r.dests[a];
        m.add_range(
            format!("match_{i}"),
            x[a].iter().map(|&v| (v, 1.0)),
            lo,
            r.max_matches[a] as f64,
        );
    }
    for b in 0..kr {
        m.add_constraint(
            format!("slots_{}", r.chutes[b]),
            (0..nr).map(|a| (x[a][b], 1.0)),
            Relation::Le,
            r.chute_slots[b] as f64,
        );
    }
    for a in 0..nr {
        m.add_constraint(
            format!("load_{}", r.dests[a]),
            y[a].iter().map(|&v| (v, 1.0)),
            Relation::Le,
            r.load[a] as f64,
        );
    }
    for b in 0..kr {
        m.add_constraint(
            format!("cap_{}", r.chutes[b]),
            (0..nr).map(|a| (y[a][b], 1.0)),
            Relation::Le,
            r.chute_cap[b] as f64,
        );
    }
    for a in 0..nr {
        for b in 0..kr {
            let (i, j) = (r.dests[a], r.chutes[b]);
            let ub = big_m(problem, r.load[a], r.chute_cap[b]) as f64;
            m.add_constraint(
                format!("link_lo_{i}_{j}"),
                [(y[a][b], 1.0), (x[a][b], -1.0)],
                Relation::Ge,
                0.0,
            );
            m.add_constraint(
                format!("link_hi_{i}_{j}"),
                [(y[a][b], 1.0), (x[a][b], -ub)],
                Relation::Le,
                0.0,
            );
        }
    }
    if let Some(adm) = &problem.layout.admissible {
        for a in 0..nr {
            for b in 0..kr {
                let (i, j) = (r.dests[a], r.chutes[b]);
                let allowed = if adm[i][j] { 1.0 } else { 0.0 };
                m.add_constraint(
                    format!("adm_{i}_{j}"),
                    [(x[a][b], 1.0)],
                    Relation::Le,
                    allowed,
                );
            }
        }
    }
    let w = match problem.objective {
        ObjectiveKind::ParcelCount => (0.0, 1.0),
        ObjectiveKind::MatchCount => (1.0, 0.0),
        ObjectiveKind::ParcelsThenMatches => (1.0, match_weight(r)),
    };
    let mut obj = Vec::with_capacity(2 * nr * kr);
    for a in 0..nr {
        for b in 0..kr {
            if w.0 != 0.0 {
                obj.push((x[a][b], w.0));
            }
            if w.1 != 0.0 {
                obj.push((y[a][b], w.1));
            }
        }
    }
    m.set_objective(ObjectiveSense::Maximize, obj);
    Ok(PlanModel {
        model: m,
        direct,
        x,
        y,
    })
}

/// Structural reasons the matching model cannot be feasible, checked before
/// any search so the caller gets a named cause.
pub fn check_preconditions(problem: &PlanningProblem, r: &Residual) -> Result<()> {
    let hint =
        Some("drop the at-least-one-chute bound for the lowest-demand destinations".to_string());
    let needed = r.must_match.iter().filter(|&&b| b).count() as u64;
    let slots: u64 = r.chute_slots.iter().map(|&s| s as u64).sum();
    if slots < needed {
        return Err(CoreError::Infeasible {
            reason: format!("Σ N_j = {slots} < {needed} destinations that need a chute"),
            hint,
        });
    }
    for a in 0..r.dests.len() {
        if !r.must_match[a] {
            continue;
        }
        let i = r.dests[a];
        if r.load[a] == 0 {
            return Err(CoreError::Infeasible {
                reason: format!(
                    "destination {i} has zero projected load but every match needs at least one parcel"
                ),
                hint,
            });
        }
        let reachable = (0..r.chutes.len()).any(|b| {
            problem.layout.is_admissible(i, r.chutes[b])
                && big_m(problem, r.load[a], r.chute_cap[b]) >= 1
        });
        if !reachable {
            return Err(CoreError::Infeasible {
                reason: format!("destination {i} has no admissible chute with capacity"),
                hint,
            });
        }
    }
    Ok(())
}

/// Greedy warm start for the matching model, in model variable order
/// (X and Y interleaved per pair). `None` if it could not satisfy every bound.
pub fn heuristic_plan(
    problem: &PlanningProblem,
    r: &Residual,
    spare_matches: bool,
) -> Option<Vec<Vec<u64>>> {
    let (nr, kr) = (r.dests.len(), r.chutes.len());
    let mut y = vec![vec![0u64; kr]; nr];
    let mut cap = r.chute_cap.clone();
    let mut slots = r.chute_slots.clone();
    let mut matches = vec![0u32; nr];
    let ub = |a: usize, b: usize| big_m(problem, r.load[a], r.chute_cap[b]);
    let ok = |a: usize, b: usize| problem.layout.is_admissible(r.dests[a], r.chutes[b]);

    let mut order: Vec<usize> = (0..nr).collect();
    order.sort_by(|&p, &q| r.load[q].cmp(&r.load[p]).then(p.cmp(&q)));
    // Heaviest first onto the admissible chute with the most room.
    for &a in &order {
        let mut left = r.load[a];
        while left > 0 && matches[a] < r.max_matches[a] {
            let best = (0..kr)
                .filter(|&b| ok(a, b) && slots[b] > 0 && y[a][b] == 0 && cap[b] > 0 && ub(a, b) > 0)
                .max_by(|&p, &q| cap[p].cmp(&cap[q]).then(q.cmp(&p)));
            let Some(b) = best else { break };
            let vol = left.min(cap[b]).min(ub(a, b));
            y[a][b] = vol;
            cap[b] -= vol;
            slots[b] -= 1;
            matches[a] += 1;
            left -= vol;
        }
    }
    // Destinations still unmatched take a parcel from any chute with room,
    // or displace one parcel of a destination that has several.
    for &a in &order {
        if !r.must_match[a] || matches[a] > 0 {
            continue;
        }
        let b = (0..kr).find(|&b| ok(a, b) && slots[b] > 0 && ub(a, b) > 0 && r.load[a] > 0)?;
        if cap[b] == 0 {
            let donor = (0..nr).find(|&d| d != a && y[d][b] >= 2)?;
            y[donor][b] -= 1;
            cap[b] += 1;
        }
        y[a][b] = 1;
        cap[b] -= 1;
        slots[b] -= 1;
        matches[a] += 1;
    }
    if spare_matches {
        // Round-robin so the spare slots spread over many destinations.
        loop {
            let mut added = false;
            for &a in &order {
                if matches[a] >= r.max_matches[a] {
                    continue;
                }
                let Some(src) = (0..kr)
                    .filter(|&b| y[a][b] >= 2)
                    .max_by_key(|&b| (y[a][b], std::cmp::Reverse(b)))
                else {
                    continue;
                };
                let target = (0..kr)
                    .filter(|&b| {
                        ok(a, b) && y[a][b] == 0 && slots[b] > 0 && cap[b] > 0 && ub(a, b) > 0
                    })
                    .max_by(|&p, &q| {
                        slots[p]
                            .cmp(&slots[q])
                            .then(cap[p].cmp(&cap[q]))
                            .then(q.cmp(&p))
                    });
                let Some(b) = target else { continue };
                y[a][src] -= 1;
                cap[src] += 1;
                y[a][b] = 1;
                cap[b] -= 1;
                slots[b] -= 1;
                matches[a] += 1;
                added = true;
            }
            if !added {
                break;
            }
        }
    }
    Some(y)
}

/// Builds and solves the matching model, warm-started by [`heuristic_plan`].
pub fn solve_plan(
    problem: &PlanningProblem,
    solver: &dyn MilpSolver,
    limits: &Limits,
) -> Result<SortPlan> {
    let pm = build_plan_model(problem)?;
    let r = &pm.direct.residual;
    check_preconditions(problem, r)?;
    let spare = problem.objective != ObjectiveKind::ParcelCount;
    let warm = heuristic_plan(problem, r, spare).map(|y| {
        let mut w = vec![0.0; pm.model.num_vars()];
        for a in 0..r.dests.len() {
            for b in 0..r.chutes.len() {
                w[pm.y[a][b].index()] = y[a][b] as f64;
                w[pm.x[a][b].index()] = if y[a][b] > 0 { 1.0 } else { 0.0 };
            }
        }
        w
    });
    let sol = solver.solve(&pm.model, limits, warm.as_deref())?;
    let values = match sol.status {
        Status::Infeasible => {
            return Err(CoreError::Infeasible {
                reason: "planning model has no feasible matching".into(),
                hint: Some("relax M_i/N_j or the admissibility matrix".into()),
            })
        }
        Status::LimitReached => return Err(CoreError::SolverLimit),
        Status::Unbounded => unreachable!("planning variables are bounded"),
        Status::Optimal | Status::Feasible { .. } => sol.values.as_ref().expect("incumbent"),
    };
    let (n, k) = (problem.layout.n(), problem.layout.k());
    let mut x = vec![vec![false; k]; n];
    let mut y = vec![vec![0u64; k]; n];
    for &(i, j, vol) in &pm.direct.fixed {
        x[i][j] = true;
        y[i][j] = vol;
    }
    for (a, &i) in r.dests.iter().enumerate() {
        for (b, &j) in r.chutes.iter().enumerate() {
            x[i][j] = values[pm.x[a][b].index()] > 0.5;
            y[i][j] = values[pm.y[a][b].index()].round() as u64;
        }
    }
    let fixed_value = objective_of(problem.objective, r, &pm.direct.fixed);
    let objective_value = objective_value(problem.objective, r, &x, &y);
    let bound = (sol.bound.min(domain_bound(problem, r)) + fixed_value).max(objective_value);
    Ok(SortPlan {
        x,
        y,
        objective_value,
        objective_kind: problem.objective,
        status: if objective_value >= bound - 1e-6 {
            Status::Optimal
        } else {
            Status::Feasible {
                gap: (bound - objective_value) / objective_value.abs().max(1.0),
            }
        },
        bound,
    })
}

/// Upper bound from totals alone: no more parcels than demand or chute
/// capacity, no more matches than fan-out, slots or admissible pairs.
fn domain_bound(problem: &PlanningProblem, r: &Residual) -> f64 {
    let load: u64 = r.load.iter().sum();
    let cap: u64 = r.chute_cap.iter().sum();
    let parcels = load.min(cap) as f64;
    let fan: u64 = r.max_matches.iter().map(|&m| m as u64).sum();
    let slots: u64 = r.chute_slots.iter().map(|&s| s as u64).sum();
    let pairs = r
        .dests
        .iter()
        .map(|&i| {
            r.chutes
                .iter()
                .filter(|&&j| problem.layout.is_admissible(i, j))
                .count() as u64
        })
        .sum::<u64>();
    let matches = fan.min(slots).min(pairs) as f64;
    match problem.objective {
        ObjectiveKind::ParcelCount => parcels,
        ObjectiveKind::MatchCount => matches,
        ObjectiveKind::ParcelsThenMatches => match_weight(r) * parcels + matches,
    }
}

fn objective_of(kind: ObjectiveKind, r: &Residual, fixed: &[(usize, usize, u64)]) -> f64 {
    let parcels: u64 = fixed.iter().map(|f| f.2).sum();
    match kind {
        ObjectiveKind::ParcelCount => parcels as f64,
        ObjectiveKind::MatchCount => fixed.len() as f64,
        ObjectiveKind::ParcelsThenMatches => match_weight(r) * parcels as f64 + fixed.len() as f64,
    }
}

fn objective_value(kind: ObjectiveKind, r: &Residual, x: &[Vec<bool>], y: &[Vec<u64>]) -> f64 {
    let parcels: u64 = y.iter().flatten().sum();
    let matches = x.iter().flatten().filter(|&&b| b).count();
    match kind {
        ObjectiveKind::ParcelCount => parcels as f64,
        ObjectiveKind::MatchCount => matches as f64,
        ObjectiveKind::ParcelsThenMatches => match_weight(r) * parcels as f64 + matches as f64,
    }
}

/// Independent check of a plan against the matching constraints, the
/// admissibility matrix and the direct-chute pins. Returns readable failures.
pub fn audit_plan(problem: &PlanningProblem, plan: &SortPlan) -> Vec<String> {
    let l = &problem.layout;
    let f = &problem.forecast;
    let (n, k) = (l.n(), l.k());
    let mut errs = Vec::new();
    if plan.x.len() != n || plan.y.len() != n {
        return vec![format!("plan must have {n} rows")];
    }
    let direct_pinned: Vec<usize> = l
        .direct_chutes()
        .filter(|&j| (0..n).any(|i| plan.x[i][j]))
        .collect();
    for i in 0..n {
        let m: u32 = plan.x[i].iter().filter(|&&b| b).count() as u32;
        let pinned = direct_pinned.iter().any(|&j| plan.x[i][j]);
        let lo = if pinned { 0 } else { 1 };
        if m < lo || m > l.max_chutes_per_dest[i] {
            errs.push(format!(
                "destination {i}: {m} matches outside [{lo}, {}]",
                l.max_chutes_per_dest[i]
            ));
        }
        let vol: u64 = plan.y[i].iter().sum();
        if vol > f.loads[i] {
            errs.push(format!(
                "destination {i}: planned {vol} > load {}",
                f.loads[i]
            ));
        }
    }
    for j in 0..k {
        let spec = &l.chutes[j];
        let dests = (0..n).filter(|&i| plan.x[i][j]).count() as u32;
        let limit = if spec.kind == ChuteKind::Direct {
            1
        } else {
            l.max_dests_per_chute[j]
        };
        if dests > limit {
            errs.push(format!("chute {j}: {dests} destinations > {limit}"));
        }
        let cap = chute_shift_capacity(spec, f.shift_ms);
        let load = plan.chute_load(j);
        if load > cap {
            errs.push(format!("chute {j}: planned {load} > capacity {cap}"));
        }
        for i in 0..n {
            let (x, y) = (plan.x[i][j], plan.y[i][j]);
            let m = big_m(problem, f.loads[i], cap);
            if x && (y < 1 || (spec.kind != ChuteKind::Direct && y > m)) {
                errs.push(format!(
                    "pair ({i},{j}): matched with volume {y} outside [1, {m}]"
                ));
            }
            if !x && y > 0 {
                errs.push(format!("pair ({i},{j}): volume {y} without a match"));
            }
            if x && !l.is_admissible(i, j) {
                errs.push(format!("pair ({i},{j}): matched but not admissible"));
            }
        }
    }
    errs
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanFile {
    destinations: Vec<PlanEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanEntry {
    id: usize,
    chutes: Vec<usize>,
    volumes: Vec<u64>,
}

/// Plan export: one table per destination with its chutes and volumes.
pub fn plan_to_toml(plan: &SortPlan) -> String {
    let file = PlanFile {
        destinations: (0..plan.x.len())
            .map(|i| {
                let chutes: Vec<usize> = plan.chutes_of(i).collect();
                PlanEntry {
                    id: i,
                    volumes: chutes.iter().map(|&j| plan.y[i][j]).collect(),
                    chutes,
                }
            })
            .collect(),
    };
    toml::to_string(&file).expect("plan serializes")
}
