//! Wave execution: parcel to chute allocation under per-chute window limits.
//!
//! Parcel `m` reaches chute `j` at τ_mj = τ_m + τ̄_j. A chute with service time
//! `s` may receive at most C̄_j of its allocated parcels inside any window
//! [r, r + C_j·s], and at most min(⌊T_w/s⌋, L_j) over the wave.

use std::fmt::Write;

use optsort_milp::{Limits, MilpSolver, Model, ObjectiveSense, Relation, Status, VarId};

use crate::demand::Wave;
use crate::error::{CoreError, Result};
use crate::layout::Layout;
use crate::planner::SortPlan;

#[derive(Debug, Clone, PartialEq)]
pub struct ChuteExec {
    pub travel_ms: u64,
    /// Effective per-parcel time; `None` if the chute cannot process.
    pub service_ms: Option<u64>,
    pub capacity: u32,
    /// C̄_j, the window limit handed to the model.
    pub cap_bar: u32,
    pub wave_cap: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionProblem {
    pub wave: Wave,
    /// Q as lists: admissible chutes per parcel, ascending.
    pub admissible: Vec<Vec<usize>>,
    pub chutes: Vec<ChuteExec>,
}

impl ExecutionProblem {
    /// Q_mj = X_{i_m j}. `service_ms` comes from staffing; `cap_bar` per chute.
    pub fn from_plan(
        wave: &Wave,
        plan: &SortPlan,
        layout: &Layout,
        service_ms: &[Option<u64>],
        cap_bar: &[u32],
    ) -> Self {
        let admissible = wave
            .parcels
            .iter()
            .map(|p| plan.chutes_of(p.destination).collect())
            .collect();
        let chutes = layout
            .chutes
            .iter()
            .enumerate()
            .map(|(j, c)| ChuteExec {
                travel_ms: c.travel_ms,
                service_ms: service_ms[j],
                capacity: c.capacity,
                cap_bar: cap_bar[j],
                wave_cap: c.wave_cap,
            })
            .collect();
        Self {
            wave: wave.clone(),
            admissible,
            chutes,
        }
    }

    pub fn arrival(&self, m: usize, j: usize) -> u64 {
        self.wave.parcels[m].arrival_ms + self.chutes[j].travel_ms
    }

    /// min(⌊T_w / s_j⌋, L_j); zero for chutes that cannot process.
    pub fn wave_bound(&self, j: usize) -> u64 {
        let c = &self.chutes[j];
        match c.service_ms {
            None => 0,
            Some(s) => {
                let b = self.wave.length_ms / s;
                c.wave_cap.map_or(b, |l| b.min(l as u64))
            }
        }
    }

    /// Window length C_j·s_j.
    pub fn window_ms(&self, j: usize) -> Option<u64> {
        let c = &self.chutes[j];
        c.service_ms.map(|s| c.capacity as u64 * s)
    }

    /// Parcels that have at least one chute able to take them.
    pub fn servable(&self) -> usize {
        self.admissible
            .iter()
            .filter(|adm| adm.iter().any(|&j| self.wave_bound(j) > 0))
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowMode {
    /// One row per allocation event start; rows that cannot bind or that are
    /// contained in an earlier row are left out.
    #[default]
    EventStarts,
    /// One row per distinct parcel set over every integer start (test oracle).
    EveryInteger,
}

#[derive(Debug, Clone)]
pub struct WaveModel {
    pub model: Model,
    /// `(parcel, chute, variable)`, parcel-major.
    pub vars: Vec<(usize, usize, VarId)>,
    pub window_rows: usize,
}

pub fn build_wave_model(problem: &ExecutionProblem, mode: WindowMode) -> WaveModel {
    let mut model = Model::new("wave");
    let n = problem.wave.len();
    let k = problem.chutes.len();
    let mut vars = Vec::new();
    let mut by_chute: Vec<Vec<(u64, VarId)>> = vec![Vec::new(); k];
    let mut by_parcel: Vec<Vec<VarId>> = vec![Vec::new(); n];
    for m in 0..n {
        for &j in &problem.admissible[m] {
            let v = model.add_binary(format!("P_{m}_{j}"));
            vars.push((m, j, v));
            by_chute[j].push((problem.arrival(m, j), v));
            by_parcel[m].push(v);
        }
    }
    for (j, list) in by_chute.iter().enumerate() {
        model.add_constraint(
            format!("wave_{j}"),
            list.iter().map(|&(_, v)| (v, 1.0)),
            Relation::Le,
            problem.wave_bound(j) as f64,
        );
    }
    for (m, list) in by_parcel.iter().enumerate() {
        if !list.is_empty() {
            model.add_constraint(
                format!("once_{m}"),
                list.iter().map(|&v| (v, 1.0)),
                Relation::Le,
                1.0,
            );
        }
    }
    let mut window_rows = 0;
    for (j, list) in by_chute.iter().enumerate() {
        let Some(w) = problem.window_ms(j) else {
            continue;
        };
        let cap = problem.chutes[j].cap_bar as f64;
        let sets = match mode {
            WindowMode::EventStarts => event_windows(list, w, problem.chutes[j].cap_bar as usize),
            WindowMode::EveryInteger => integer_windows(list, w),
        };
        for (a, b) in sets {
            model.add_constraint(
                format!("win_{j}_{a}"),
                list[a..=b].iter().map(|&(_, v)| (v, 1.0)),
                Relation::Le,
                cap,
            );
            window_rows += 1;
        }
    }
    model.set_objective(
        ObjectiveSense::Maximize,
        vars.iter().map(|&(_, _, v)| (v, 1.0)),
    );
    WaveModel {
        model,
        vars,
        window_rows,
    }
}

/// Index ranges `[a, b]` of windows starting at each event.
fn event_windows(list: &[(u64, VarId)], w: u64, cap: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut b = 0;
    let mut prev_b = None;
    for a in 0..list.len() {
        b = b.max(a);
        while b + 1 < list.len() && list[b + 1].0 <= list[a].0 + w {
            b += 1;
        }
        if b - a + 1 > cap && prev_b != Some(b) {
            out.push((a, b));
        }
        prev_b = Some(b);
    }
    out
}

/// Distinct non-empty sets `{τ in [r, r + w]}` over all integer `r`.
fn integer_windows(list: &[(u64, VarId)], w: u64) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    if list.is_empty() {
        return out;
    }
    let first = list[0].0.saturating_sub(w);
    let last = list[list.len() - 1].0;
    let (mut a, mut b) = (0usize, 0usize);
    for r in first..=last {
        while a < list.len() && list[a].0 < r {
            a += 1;
        }
        if a == list.len() {
            break;
        }
        while b + 1 < list.len() && list[b + 1].0 <= r + w {
            b += 1;
        }
        if list[a].0 > r + w {
            continue;
        }
        if out.last() != Some(&(a, b)) {
            out.push((a, b));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveAllocation {
    /// Chute per parcel; `None` is a planned rejection.
    pub assignment: Vec<Option<usize>>,
    pub cap_bar: Vec<u32>,
    pub status: Status,
    /// Upper bound on the number of allocated parcels.
    pub bound: f64,
}

impl WaveAllocation {
    pub fn allocated(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_some()).count()
    }

    pub fn rejected(&self) -> usize {
        self.assignment.len() - self.allocated()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    Fits,
    /// Removing any allocated parcel arriving in this range makes room.
    Eject(u64, u64),
    Hopeless,
}

/// Allocated arrival times per chute, kept sorted, with window checks.
struct Occupancy<'a> {
    p: &'a ExecutionProblem,
    times: Vec<Vec<u64>>,
}

impl<'a> Occupancy<'a> {
    fn new(p: &'a ExecutionProblem) -> Self {
        Self {
            p,
            times: vec![Vec::new(); p.chutes.len()],
        }
    }

    fn fits(&self, j: usize, t: u64) -> bool {
        let list = &self.times[j];
        if list.len() as u64 >= self.p.wave_bound(j) {
            return false;
        }
        let Some(w) = self.p.window_ms(j) else {
            return false;
        };
        let cap = self.p.chutes[j].cap_bar as usize;
        let lo = list.partition_point(|&x| x < t.saturating_sub(w));
        let hi = list.partition_point(|&x| x <= t + w);
        let pos = list.partition_point(|&x| x <= t);
        // Windows containing t start at an event in [t - w, t].
        let mut merged: Vec<u64> = Vec::with_capacity(hi - lo + 1);
        merged.extend_from_slice(&list[lo..pos]);
        merged.push(t);
        merged.extend_from_slice(&list[pos..hi]);
        let mut end = 0;
        for a in 0..merged.len() {
            if merged[a] > t {
                break;
            }
            end = end.max(a);
            while end + 1 < merged.len() && merged[end + 1] <= merged[a] + w {
                end += 1;
            }
            if merged[a] + w >= t && end - a + 1 > cap {
                return false;
            }
        }
        true
    }

    /// Which single removal would let `t` fit on chute `j`.
    fn blocking(&self, j: usize, t: u64) -> Block {
        let list = &self.times[j];
        let full = list.len() as u64 >= self.p.wave_bound(j);
        let Some(w) = self.p.window_ms(j) else {
            return Block::Hopeless;
        };
        if self.p.wave_bound(j) == 0 || list.len() as u64 > self.p.wave_bound(j) {
            return Block::Hopeless;
        }
        let cap = self.p.chutes[j].cap_bar as usize;
        let lo = list.partition_point(|&x| x < t.saturating_sub(w));
        let hi = list.partition_point(|&x| x <= t + w);
        let pos = list.partition_point(|&x| x <= t);
        let mut x: Vec<u64> = Vec::with_capacity(hi - lo + 1);
        x.extend_from_slice(&list[lo..pos]);
        x.push(t);
        x.extend_from_slice(&list[pos..hi]);
        let p = pos - lo;
        let last_le = |v: u64| x.partition_point(|&y| y <= v) - 1;
        // Every window containing t starts at some r in [t - w, t]; with a the
        // first index >= r, the window holds [a, e] for e between e_lo and
        // e_hi. A removal fixes all of them iff it lies in the smallest
        // violated set of every start.
        let (mut a_max, mut e_min) = (0usize, usize::MAX);
        let mut violated = false;
        for a in 0..=p {
            let r_lo = if a == 0 {
                t.saturating_sub(w)
            } else {
                (x[a - 1] + 1).max(t.saturating_sub(w))
            };
            if r_lo > x[a] {
                continue;
            }
            let e_lo = last_le(r_lo + w).max(p);
            let e_hi = last_le(x[a] + w);
            if e_hi + 1 - a > cap + 1 {
                return Block::Hopeless;
            }
            if e_hi + 1 - a > cap {
                violated = true;
                a_max = a_max.max(a);
                e_min = e_min.min(e_lo.max(a + cap));
            }
        }
        match (violated, full) {
            (false, false) => Block::Fits,
            (false, true) => Block::Eject(0, u64::MAX),
            (true, _) if a_max > e_min => Block::Hopeless,
            (true, _) => Block::Eject(x[a_max], x[e_min]),
        }
    }

    /// Free room in the window that ends at `t`.
    fn slack(&self, j: usize, t: u64) -> i64 {
        let list = &self.times[j];
        let w = self.p.window_ms(j).unwrap_or(0);
        let lo = list.partition_point(|&x| x < t.saturating_sub(w));
        let hi = list.partition_point(|&x| x <= t);
        self.p.chutes[j].cap_bar as i64 - (hi - lo) as i64
    }

    fn insert(&mut self, j: usize, t: u64) {
        let pos = self.times[j].partition_point(|&x| x <= t);
        self.times[j].insert(pos, t);
    }

    fn remove(&mut self, j: usize, t: u64) {
        let pos = self.times[j].partition_point(|&x| x < t);
        debug_assert_eq!(self.times[j][pos], t);
        self.times[j].remove(pos);
    }
}

/// Arrival-order greedy followed by one-step ejection repair. Always feasible.
pub fn heuristic_allocation(p: &ExecutionProblem) -> Vec<Option<usize>> {
    let travel =
        |a: &[Option<usize>]| -> u64 { a.iter().flatten().map(|&j| p.chutes[j].travel_ms).sum() };
    let count = |a: &[Option<usize>]| a.iter().flatten().count();
    let spread = construct(p, true);
    let near = construct(p, false);
    if (count(&near), std::cmp::Reverse(travel(&near)))
        >= (count(&spread), std::cmp::Reverse(travel(&spread)))
    {
        near
    } else {
        spread
    }
}

/// Arrival-order construction, then repair and shortening. `spread` prefers
/// the chute with the most window slack, otherwise the nearest chute that fits.
fn construct(p: &ExecutionProblem, spread: bool) -> Vec<Option<usize>> {
    let n = p.wave.len();
    let mut occ = Occupancy::new(p);
    let mut assign: Vec<Option<usize>> = vec![None; n];
    for m in 0..n {
        let fitting = p.admissible[m]
            .iter()
            .copied()
            .filter(|&j| occ.fits(j, p.arrival(m, j)));
        let best = if spread {
            fitting.max_by(|&a, &b| {
                occ.slack(a, p.arrival(m, a))
                    .cmp(&occ.slack(b, p.arrival(m, b)))
                    .then(p.chutes[b].travel_ms.cmp(&p.chutes[a].travel_ms))
                    .then(b.cmp(&a))
            })
        } else {
            fitting.min_by_key(|&j| (p.chutes[j].travel_ms, j))
        };
        if let Some(j) = best {
            occ.insert(j, p.arrival(m, j));
            assign[m] = Some(j);
        }
    }
    repair(p, &mut occ, &mut assign);
    shorten(p, &mut occ, &mut assign);
    assign
}

/// Moves allocated parcels to nearer admissible chutes where the windows
/// allow it. The allocated count is unchanged.
fn shorten(p: &ExecutionProblem, occ: &mut Occupancy, assign: &mut [Option<usize>]) {
    for _ in 0..SHORTEN_PASSES {
        let mut moved = false;
        for m in 0..assign.len() {
            let Some(j) = assign[m] else { continue };
            let mut nearer: Vec<usize> = p.admissible[m]
                .iter()
                .copied()
                .filter(|&b| p.chutes[b].travel_ms < p.chutes[j].travel_ms)
                .collect();
            nearer.sort_by_key(|&b| (p.chutes[b].travel_ms, b));
            occ.remove(j, p.arrival(m, j));
            let to = nearer
                .into_iter()
                .find(|&b| occ.fits(b, p.arrival(m, b)))
                .unwrap_or(j);
            occ.insert(to, p.arrival(m, to));
            if to != j {
                assign[m] = Some(to);
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

const SHORTEN_PASSES: usize = 5;

/// Augmenting paths: an unallocated parcel may displace an allocated one,
/// which then needs room elsewhere, possibly displacing another. Breadth
/// first, each parcel expanded at most once per search.
struct Repair<'a, 'b> {
    p: &'a ExecutionProblem,
    occ: &'b mut Occupancy<'a>,
    assign: &'b mut [Option<usize>],
    /// Allocated parcels per chute, sorted by arrival at the chute.
    members: Vec<Vec<(u64, usize)>>,
    seen: Vec<u32>,
    stamp: u32,
}

/// Parcels expanded per search.
const SEARCH_LIMIT: usize = 4_000;

struct Node {
    parcel: usize,
    /// Chute the parcel is being pushed out of.
    from: Option<usize>,
    parent: usize,
}

impl Repair<'_, '_> {
    fn put(&mut self, m: usize, j: usize) {
        let t = self.p.arrival(m, j);
        self.occ.insert(j, t);
        self.assign[m] = Some(j);
        let pos = self.members[j].partition_point(|&e| e < (t, m));
        self.members[j].insert(pos, (t, m));
    }

    fn take(&mut self, m: usize, j: usize) {
        let t = self.p.arrival(m, j);
        self.occ.remove(j, t);
        self.assign[m] = None;
        let pos = self.members[j].partition_point(|&e| e < (t, m));
        debug_assert_eq!(self.members[j][pos], (t, m));
        self.members[j].remove(pos);
    }

    fn search(&mut self, m: usize) -> bool {
        let p = self.p;
        self.stamp += 1;
        let mut nodes = vec![Node {
            parcel: m,
            from: None,
            parent: usize::MAX,
        }];
        self.seen[m] = self.stamp;
        let mut head = 0;
        while head < nodes.len() && head < SEARCH_LIMIT {
            let x = nodes[head].parcel;
            let from = nodes[head].from;
            for &j in &p.admissible[x] {
                if Some(j) == from {
                    continue;
                }
                let t = p.arrival(x, j);
                match self.occ.blocking(j, t) {
                    Block::Fits => return self.apply(&nodes, head, j),
                    Block::Hopeless => {}
                    Block::Eject(lo, hi) => {
                        let a = self.members[j].partition_point(|e| e.0 < lo);
                        let b = self.members[j].partition_point(|e| e.0 <= hi);
                        for idx in a..b {
                            let o = self.members[j][idx].1;
                            if self.seen[o] != self.stamp && p.admissible[o].len() > 1 {
                                self.seen[o] = self.stamp;
                                nodes.push(Node {
                                    parcel: o,
                                    from: Some(j),
                                    parent: head,
                                });
                            }
                        }
                    }
                }
            }
            head += 1;
        }
        false
    }

    /// Commits the path ending with `nodes[end]` placed on `to`; rolls back if
    /// the path interferes with itself.
    fn apply(&mut self, nodes: &[Node], end: usize, to: usize) -> bool {
        let mut path = Vec::new();
        let mut i = end;
        while i != usize::MAX {
            path.push(i);
            i = nodes[i].parent;
        }
        path.reverse();
        let mut done: Vec<(usize, usize, Option<usize>)> = Vec::new();
        let mut ok = true;
        for (step, &ni) in path.iter().enumerate() {
            let x = nodes[ni].parcel;
            let dest = match path.get(step + 1) {
                Some(&next) => nodes[next].from.expect("ejected node"),
                None => to,
            };
            // The parcel that vacates `dest` for `x`.
            let out = path.get(step + 1).map(|&next| nodes[next].parcel);
            if let Some(o) = out {
                self.take(o, dest);
            }
            if !self.occ.fits(dest, self.p.arrival(x, dest)) {
                if let Some(o) = out {
                    self.put(o, dest);
                }
                ok = false;
                break;
            }
            self.put(x, dest);
            done.push((x, dest, out));
        }
        if !ok {
            for &(x, dest, out) in done.iter().rev() {
                self.take(x, dest);
                if let Some(o) = out {
                    self.put(o, dest);
                }
            }
        }
        ok
    }
}

fn repair<'a>(p: &'a ExecutionProblem, occ: &mut Occupancy<'a>, assign: &mut [Option<usize>]) {
    let n = p.wave.len();
    let mut members: Vec<Vec<(u64, usize)>> = vec![Vec::new(); p.chutes.len()];
    for (m, a) in assign.iter().enumerate() {
        if let Some(j) = *a {
            members[j].push((p.arrival(m, j), m));
        }
    }
    for list in &mut members {
        list.sort_unstable();
    }
    let mut r = Repair {
        p,
        occ,
        assign,
        members,
        seen: vec![0; n],
        stamp: 0,
    };
    loop {
        let mut improved = false;
        for m in 0..n {
            if r.assign[m].is_none() && r.search(m) {
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
}

/// Solves the wave model warm-started by [`heuristic_allocation`].
pub fn solve_wave(
    problem: &ExecutionProblem,
    solver: &dyn MilpSolver,
    limits: &Limits,
) -> Result<WaveAllocation> {
    let wm = build_wave_model(problem, WindowMode::EventStarts);
    let heur = heuristic_allocation(problem);
    let mut warm = vec![0.0; wm.model.num_vars()];
    for &(m, j, v) in &wm.vars {
        if heur[m] == Some(j) {
            warm[v.index()] = 1.0;
        }
    }
    let sol = solver.solve(&wm.model, limits, Some(&warm))?;
    let values = match sol.status {
        Status::Optimal | Status::Feasible { .. } => sol.values.as_ref().expect("incumbent"),
        Status::LimitReached => &warm,
        Status::Infeasible | Status::Unbounded => {
            return Err(CoreError::Infeasible {
                reason: "wave model rejected the empty allocation".into(),
                hint: None,
            })
        }
    };
    let mut assignment = vec![None; problem.wave.len()];
    for &(m, j, v) in &wm.vars {
        if values[v.index()] > 0.5 {
            assignment[m] = Some(j);
        }
    }
    let allocated = assignment.iter().filter(|a| a.is_some()).count() as f64;
    let bound = sol.bound.min(problem.servable() as f64).max(allocated);
    let status = if allocated >= bound {
        Status::Optimal
    } else {
        Status::Feasible {
            gap: (bound - allocated) / allocated.max(1.0),
        }
    };
    Ok(WaveAllocation {
        assignment,
        cap_bar: problem.chutes.iter().map(|c| c.cap_bar).collect(),
        status,
        bound,
    })
}

/// Independent check of admissibility, per-wave bounds, single assignment
/// and every window, written without the model builder.
pub fn audit_allocation(p: &ExecutionProblem, assignment: &[Option<usize>]) -> Vec<String> {
    let mut errs = Vec::new();
    if assignment.len() != p.wave.len() {
        return vec![format!(
            "{} entries for {} parcels",
            assignment.len(),
            p.wave.len()
        )];
    }
    let k = p.chutes.len();
    let mut times: Vec<Vec<u64>> = vec![Vec::new(); k];
    for (m, a) in assignment.iter().enumerate() {
        if let Some(j) = *a {
            if j >= k || !p.admissible[m].contains(&j) {
                errs.push(format!("parcel {m}: chute {j} is not admissible"));
                continue;
            }
            times[j].push(p.arrival(m, j));
        }
    }
    for j in 0..k {
        let count = times[j].len() as u64;
        if count > p.wave_bound(j) {
            errs.push(format!(
                "chute {j}: {count} parcels > wave bound {}",
                p.wave_bound(j)
            ));
        }
        let Some(w) = p.window_ms(j) else { continue };
        let cap = p.chutes[j].cap_bar as usize;
        for &r in &times[j] {
            let inside = times[j].iter().filter(|&&t| t >= r && t <= r + w).count();
            if inside > cap {
                errs.push(format!(
                    "chute {j}: {inside} parcels in window starting {r} ms > {cap}"
                ));
                break;
            }
        }
    }
    errs
}

/// Allocation export ordered by parcel id.
pub fn allocation_csv(alloc: &WaveAllocation) -> String {
    let mut s = String::from("parcel,chute\n");
    for (m, a) in alloc.assignment.iter().enumerate() {
        match a {
            Some(j) => {
                let _ = writeln!(s, "{m},{j}");
            }
            None => {
                let _ = writeln!(s, "{m},REJECT");
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::Wave;
    use optsort_milp::BranchAndBound;

    fn chute(travel_ms: u64, service_ms: u64, capacity: u32) -> ChuteExec {
        ChuteExec {
            travel_ms,
            service_ms: Some(service_ms),
            capacity,
            cap_bar: capacity,
            wave_cap: None,
        }
    }

    fn problem(arrivals: &[u64], adm: Vec<Vec<usize>>, chutes: Vec<ChuteExec>) -> ExecutionProblem {
        ExecutionProblem {
            wave: Wave::from_arrivals(arrivals.iter().map(|&t| (0, t)).collect(), 3_000_000),
            admissible: adm,
            chutes,
        }
    }

    #[test]
    fn no_admissible_chute_means_no_variables() {
        let p = problem(&[0, 10], vec![vec![], vec![0]], vec![chute(0, 1000, 2)]);
        let wm = build_wave_model(&p, WindowMode::EventStarts);
        assert_eq!(wm.vars.len(), 1);
        assert_eq!(wm.vars[0].0, 1);
    }

    #[test]
    fn window_forces_one_of_two() {
        let p = problem(
            &[0, 1000],
            vec![vec![0], vec![0]],
            vec![chute(2000, 30_000, 1)],
        );
        let wm = build_wave_model(&p, WindowMode::EventStarts);
        assert_eq!(wm.window_rows, 1);
        let alloc = solve_wave(&p, &BranchAndBound, &Limits::default()).unwrap();
        assert_eq!(alloc.allocated(), 1);
        assert_eq!(alloc.status, Status::Optimal);
        assert!(audit_allocation(&p, &alloc.assignment).is_empty());
    }

    #[test]
    fn single_parcel_is_assigned() {
        let p = problem(&[5], vec![vec![0]], vec![chute(0, 1000, 1)]);
        let alloc = solve_wave(&p, &BranchAndBound, &Limits::default()).unwrap();
        assert_eq!(alloc.assignment, vec![Some(0)]);
    }

    #[test]
    fn unstaffed_chute_takes_nothing() {
        let mut c = chute(0, 1000, 5);
        c.service_ms = None;
        let p = problem(&[0, 1], vec![vec![0], vec![0]], vec![c]);
        let alloc = solve_wave(&p, &BranchAndBound, &Limits::default()).unwrap();
        assert_eq!(alloc.allocated(), 0);
        assert_eq!(alloc.status, Status::Optimal);
    }

    #[test]
    fn repair_moves_a_parcel_to_make_room() {
        // Parcel 0 may use either chute and greedily takes chute 0 (more
        // slack ties go to the nearer chute); parcel 1 only fits chute 0.
        let p = problem(
            &[0, 10],
            vec![vec![0, 1], vec![0]],
            vec![chute(0, 1000, 1), chute(500, 1000, 1)],
        );
        let a = heuristic_allocation(&p);
        assert_eq!(a, vec![Some(1), Some(0)]);
        assert!(audit_allocation(&p, &a).is_empty());
    }

    #[test]
    fn pruned_windows_match_every_integer_start() {
        let arrivals = [0, 100, 150, 400, 420, 900, 1000, 1010, 1500];
        let adm = vec![vec![0, 1]; arrivals.len()];
        let p = problem(&arrivals, adm, vec![chute(0, 200, 2), chute(300, 150, 3)]);
        let a = build_wave_model(&p, WindowMode::EventStarts);
        let b = build_wave_model(&p, WindowMode::EveryInteger);
        assert!(a.window_rows <= b.window_rows);
        let sa = optsort_milp::solve(&a.model, &Limits::default()).unwrap();
        let sb = optsort_milp::solve(&b.model, &Limits::default()).unwrap();
        assert_eq!(sa.objective, sb.objective);
        let vals = sa.values.unwrap();
        assert!(b.model.is_feasible(&vals, 1e-9));
    }

    proptest::proptest! {
        #[test]
        fn blocking_interval_matches_single_removals(
            times in proptest::collection::vec(0u64..3_000, 0..12),
            t in 0u64..3_000,
            cap in 1u32..4,
            service in 100u64..800,
            bound in 4u32..14,
        ) {
            let p = problem(&[], vec![], vec![ChuteExec { cap_bar: cap, ..chute(0, service, bound) }]);
            let mut occ = Occupancy::new(&p);
            for &x in &times {
                if occ.fits(0, x) {
                    occ.insert(0, x);
                }
            }
            let list = occ.times[0].clone();
            let block = occ.blocking(0, t);
            proptest::prop_assert_eq!(block == Block::Fits, occ.fits(0, t));
            for &x in &list {
                occ.remove(0, x);
                let ok = occ.fits(0, t);
                occ.insert(0, x);
                let claimed = matches!(block, Block::Eject(lo, hi) if lo <= x && x <= hi);
                if block != Block::Fits {
                    proptest::prop_assert_eq!(ok, claimed, "removing {} from {:?}", x, list);
                }
            }
        }
    }
}
