//! Scenario-level orchestration: plan, staff, allocate, simulate.

use optsort_milp::{Limits, MilpSolver};
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::executor::{solve_wave, ExecutionProblem, WaveAllocation};
use crate::kpi::KpiReport;
use crate::labor::{assign_workers, penalty_from_load, PenaltyMatrix, StaffingPlan};
use crate::layout::{ChuteKind, Layout};
use crate::planner::{solve_plan, PlanningProblem, SortPlan};
use crate::scenario::Scenario;
use crate::tuner::{ChuteFeedback, Evaluation};
use crate::twin::{
    assign_profiles, run_waves, sample_efficiencies, service_times, Outcome, Policy, SimConfig,
    SimResult, WorkerProfile,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Optsort,
    Greedy,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Optsort => "optsort",
            Algo::Greedy => "greedy",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub plan: SortPlan,
    pub penalty: PenaltyMatrix,
    pub staffing: StaffingPlan,
}

pub fn planning_problem(s: &Scenario) -> PlanningProblem {
    let mut p =
        PlanningProblem::new(s.forecast.clone(), s.layout.clone()).with_objective(s.objective);
    p.direct_rule = s.direct_rule;
    p
}

/// Penalties from the planned shift load of every spiral chute.
pub fn staffing_penalty(s: &Scenario, plan: &SortPlan, workers: usize) -> PenaltyMatrix {
    let spirals: Vec<usize> = s.layout.spiral_chutes().collect();
    let c = |j: usize| &s.layout.chutes[j];
    penalty_from_load(
        &spirals
            .iter()
            .map(|&j| plan.chute_load(j))
            .collect::<Vec<_>>(),
        &spirals.iter().map(|&j| c(j).process_ms).collect::<Vec<_>>(),
        s.forecast.shift_ms,
        &spirals
            .iter()
            .map(|&j| c(j).two_handler)
            .collect::<Vec<_>>(),
        workers,
        s.penalty_shape,
    )
}

/// Shift plan and staffing; shared by every run on the scenario.
pub fn prepare(
    s: &Scenario,
    workers: usize,
    solver: &dyn MilpSolver,
    limits: &Limits,
) -> Result<Prepared> {
    let plan = solve_plan(&planning_problem(s), solver, limits)?;
    let penalty = staffing_penalty(s, &plan, workers);
    let staffing = assign_workers(&penalty, workers);
    Ok(Prepared {
        plan,
        penalty,
        staffing,
    })
}

/// Worker profiles for `seed`, assigned to chutes per `staffing`.
pub fn workforce(
    s: &Scenario,
    staffing: &StaffingPlan,
    workers: usize,
    range: (f64, f64),
    seed: u64,
) -> Result<Vec<WorkerProfile>> {
    let mut w = sample_efficiencies(workers, range, seed)?;
    assign_profiles(&mut w, &s.layout, staffing)?;
    Ok(w)
}

/// C̄ per chute: `spiral` on spiral chutes, C_j elsewhere.
pub fn cap_bar_vector(layout: &Layout, spiral: Option<u32>) -> Vec<u32> {
    layout
        .chutes
        .iter()
        .map(|c| match (c.kind, spiral) {
            (ChuteKind::Spiral, Some(v)) => v,
            _ => c.capacity,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub problems: Vec<ExecutionProblem>,
    /// Empty for the greedy policy.
    pub allocations: Vec<WaveAllocation>,
    pub sim: SimResult,
}

#[derive(Debug, Clone)]
pub struct RunSpec<'a> {
    pub algo: Algo,
    pub cap_bar: &'a [u32],
    /// Service times the allocation model assumes.
    pub model_service: &'a [Option<u64>],
    /// Service times the twin runs with.
    pub actual_service: &'a [Option<u64>],
    pub waves: usize,
    pub sim: SimConfig,
}

/// Allocates (in parallel across waves) and simulates the first `waves` waves.
pub fn execute(
    s: &Scenario,
    plan: &SortPlan,
    spec: &RunSpec,
    solver: &(dyn MilpSolver + Sync),
    limits: &Limits,
) -> Result<RunOutput> {
    let waves = &s.waves[..spec.waves.min(s.waves.len())];
    let problems: Vec<ExecutionProblem> = waves
        .iter()
        .map(|w| ExecutionProblem::from_plan(w, plan, &s.layout, spec.model_service, spec.cap_bar))
        .collect();
    let allocations = match spec.algo {
        Algo::Greedy => Vec::new(),
        Algo::Optsort => problems
            .par_iter()
            .map(|p| solve_wave(p, solver, limits))
            .collect::<Result<Vec<_>>>()?,
    };
    let policies: Vec<Policy> = match spec.algo {
        Algo::Greedy => vec![Policy::Greedy; problems.len()],
        Algo::Optsort => allocations
            .iter()
            .map(|a| Policy::Allocation(&a.assignment))
            .collect(),
    };
    let sim = run_waves(
        &s.layout,
        &problems,
        spec.actual_service,
        &policies,
        spec.sim,
    )?;
    Ok(RunOutput {
        problems,
        allocations,
        sim,
    })
}

pub fn require_waves(s: &Scenario) -> Result<()> {
    if s.waves.is_empty() {
        Err(CoreError::config("scenario has no waves to execute"))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub workers: usize,
    pub efficiency_range: (f64, f64),
    pub seeds: Vec<u64>,
    /// Solve with the sampled efficiencies; otherwise with nominal ones.
    pub known_efficiency: bool,
    pub waves: usize,
}

/// One OPTSORT run per seed at `cap_bar`, reduced to the worst seed.
pub fn evaluate_cap_bar(
    s: &Scenario,
    prep: &Prepared,
    cap_bar: &[u32],
    e: &EvalSettings,
    solver: &(dyn MilpSolver + Sync),
    limits: &Limits,
) -> Result<Evaluation> {
    let k = s.layout.k();
    let nominal = service_times(
        &s.layout,
        &workforce(s, &prep.staffing, e.workers, (1.0, 1.0), 0)?,
    );
    let runs = e
        .seeds
        .par_iter()
        .map(|&seed| {
            let actual = service_times(
                &s.layout,
                &workforce(s, &prep.staffing, e.workers, e.efficiency_range, seed)?,
            );
            let spec = RunSpec {
                algo: Algo::Optsort,
                cap_bar,
                model_service: if e.known_efficiency {
                    &actual
                } else {
                    &nominal
                },
                actual_service: &actual,
                waves: e.waves,
                sim: SimConfig::default(),
            };
            let out = execute(s, &prep.plan, &spec, solver, limits)?;
            let mut chutes = vec![ChuteFeedback::default(); k];
            for (p, w) in out.problems.iter().zip(&out.sim.waves) {
                for (j, c) in w.chutes.iter().enumerate() {
                    chutes[j].blockages += c.blockages;
                }
                for (m, o) in w.outcomes.iter().enumerate() {
                    if matches!(o, Outcome::Rejected { .. }) {
                        for &j in &p.admissible[m] {
                            chutes[j].rejections += 1;
                        }
                    }
                }
            }
            Ok(Evaluation {
                kpis: out.sim.kpis,
                chutes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst = runs
        .first()
        .cloned()
        .ok_or_else(|| CoreError::config("no seeds to evaluate"))?;
    for r in &runs[1..] {
        worst.kpis = KpiReport::worst(&worst.kpis, &r.kpis);
        for (w, c) in worst.chutes.iter_mut().zip(&r.chutes) {
            w.blockages = w.blockages.max(c.blockages);
            w.rejections = w.rejections.max(c.rejections);
        }
    }
    Ok(worst)
}
