//! Batch harness behind the `optsort` binary: scenario in, reports out.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use optsort_core::executor::allocation_csv;
use optsort_core::kpi::{kpi_csv, KpiReport, KpiRow};
use optsort_core::labor::staffing_csv;
use optsort_core::pipeline::{
    cap_bar_vector, evaluate_cap_bar, execute, prepare, require_waves, workforce, Algo,
    EvalSettings, Prepared, RunOutput, RunSpec,
};
use optsort_core::planner::plan_to_toml;
use optsort_core::scenario::Scenario;
use optsort_core::tuner::{
    robustness_sweep, sweep_csv, tune_capacity, tuning_csv, SweepReport, TuneOptions, TuningTrace,
};
use optsort_core::twin::{service_times, trace_csv, SimConfig};
use optsort_core::CoreError;
use optsort_milp::{BranchAndBound, Limits};
use rayon::prelude::*;

pub mod exit {
    pub const OK: u8 = 0;
    pub const CONFIG: u8 = 2;
    pub const INFEASIBLE: u8 = 3;
    pub const SOLVER_LIMIT: u8 = 4;
    pub const IO: u8 = 5;
}

/// Exit status for an error chain; anything unrecognised counts as config.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e.root() {
                CoreError::Config(_) => exit::CONFIG,
                CoreError::Infeasible { .. } => exit::INFEASIBLE,
                CoreError::SolverLimit | CoreError::Solver(_) => exit::SOLVER_LIMIT,
                CoreError::Io(_) => exit::IO,
                CoreError::Tuning { .. } => unreachable!("root looks through tuning errors"),
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return exit::IO;
        }
    }
    exit::CONFIG
}

/// Flags shared by every subcommand that executes waves.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Seed for worker efficiencies.
    pub seed: u64,
    pub workers: Option<usize>,
    pub efficiency_range: Option<(f64, f64)>,
    pub waves: Option<usize>,
    /// Solve with the sampled efficiencies instead of nominal ones.
    pub known_efficiency: bool,
    pub limits: Limits,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: None,
            efficiency_range: None,
            waves: None,
            known_efficiency: false,
            limits: Limits::default(),
        }
    }
}

/// A loaded scenario with its plan and staffing.
pub struct Session {
    pub scenario: Scenario,
    pub prep: Prepared,
    pub opts: RunOptions,
}

impl Session {
    pub fn open(path: &Path, opts: RunOptions) -> Result<Self> {
        let scenario =
            Scenario::load(path).with_context(|| format!("loading {}", path.display()))?;
        Self::new(scenario, opts)
    }

    pub fn new(scenario: Scenario, opts: RunOptions) -> Result<Self> {
        require_waves(&scenario)?;
        let prep = prepare(
            &scenario,
            Self::workers_of(&scenario, &opts),
            &BranchAndBound,
            &opts.limits,
        )?;
        Ok(Self {
            scenario,
            prep,
            opts,
        })
    }

    fn workers_of(s: &Scenario, o: &RunOptions) -> usize {
        o.workers.unwrap_or(s.workers.count)
    }

    pub fn workers(&self) -> usize {
        Self::workers_of(&self.scenario, &self.opts)
    }

    pub fn efficiency_range(&self) -> (f64, f64) {
        self.opts
            .efficiency_range
            .unwrap_or(self.scenario.workers.efficiency_range)
    }

    pub fn waves(&self) -> usize {
        self.opts
            .waves
            .unwrap_or(self.scenario.waves.len())
            .min(self.scenario.waves.len())
    }

    fn eval_settings(&self, seeds: Vec<u64>) -> EvalSettings {
        EvalSettings {
            workers: self.workers(),
            efficiency_range: self.efficiency_range(),
            seeds,
            known_efficiency: self.opts.known_efficiency,
            waves: self.waves(),
        }
    }

    /// One execution with efficiencies drawn from `seed`.
    pub fn run_seed(
        &self,
        algo: Algo,
        cap_bar: Option<u32>,
        seed: u64,
        trace: bool,
    ) -> optsort_core::Result<RunOutput> {
        let s = &self.scenario;
        let w = self.workers();
        let nominal = service_times(
            &s.layout,
            &workforce(s, &self.prep.staffing, w, (1.0, 1.0), 0)?,
        );
        let actual = service_times(
            &s.layout,
            &workforce(s, &self.prep.staffing, w, self.efficiency_range(), seed)?,
        );
        let cap = cap_bar_vector(&s.layout, cap_bar);
        let spec = RunSpec {
            algo,
            cap_bar: &cap,
            model_service: if self.opts.known_efficiency {
                &actual
            } else {
                &nominal
            },
            actual_service: &actual,
            waves: self.waves(),
            sim: SimConfig {
                trace,
                horizon_ms: None,
            },
        };
        execute(
            s,
            &self.prep.plan,
            &spec,
            &BranchAndBound,
            &self.opts.limits,
        )
    }

    pub fn run(&self, algo: Algo, cap_bar: Option<u32>, trace: bool) -> Result<RunOutput> {
        Ok(self.run_seed(algo, cap_bar, self.opts.seed, trace)?)
    }

    pub fn row(&self, algo: Algo, cap_bar: Option<u32>, kpis: KpiReport) -> KpiRow {
        KpiRow {
            algo: algo.name().into(),
            scenario: self.scenario.name.clone(),
            cap_bar: match algo {
                Algo::Greedy => None,
                Algo::Optsort => Some(cap_bar.unwrap_or_else(|| self.default_cap_bar())),
            },
            kpis,
        }
    }

    /// C_j of the first spiral chute, the tuner's starting point.
    pub fn default_cap_bar(&self) -> u32 {
        let l = &self.scenario.layout;
        l.spiral_chutes()
            .map(|j| l.chutes[j].capacity)
            .next()
            .unwrap_or(1)
    }

    /// Uniform C̄ loop from C_j, certified against the worst of `seeds`.
    pub fn tune(&self, opts: &TuneOptions, seeds: Vec<u64>) -> Result<TuningTrace> {
        let capacity: Vec<u32> = self
            .scenario
            .layout
            .chutes
            .iter()
            .map(|c| c.capacity)
            .collect();
        let tunable = self.tunable();
        let e = self.eval_settings(seeds);
        Ok(tune_capacity(
            &capacity,
            &capacity,
            &tunable,
            opts,
            |cap| {
                evaluate_cap_bar(
                    &self.scenario,
                    &self.prep,
                    cap,
                    &e,
                    &BranchAndBound,
                    &self.opts.limits,
                )
            },
        )?)
    }

    pub fn tunable(&self) -> Vec<bool> {
        let l = &self.scenario.layout;
        (0..l.k())
            .map(|j| l.spiral_chutes().any(|s| s == j))
            .collect()
    }

    pub fn sweep(&self, cap_bar: Option<u32>, seeds: &[u64]) -> Result<SweepReport> {
        Ok(robustness_sweep(seeds, |seed| {
            self.run_seed(Algo::Optsort, cap_bar, seed, false)
                .map(|o| o.sim.kpis)
        })?)
    }

    /// GREEDY plus OPTSORT at each C̄, in that order.
    pub fn compare(&self, cap_bars: &[u32]) -> Result<Vec<KpiRow>> {
        let mut jobs: Vec<(Algo, Option<u32>)> = vec![(Algo::Greedy, None)];
        jobs.extend(cap_bars.iter().map(|&c| (Algo::Optsort, Some(c))));
        jobs.par_iter()
            .map(|&(algo, cap)| Ok(self.row(algo, cap, self.run(algo, cap, false)?.sim.kpis)))
            .collect()
    }
}

/// Aligned plain-text KPI table, one row per run.
pub fn comparison_table(rows: &[KpiRow]) -> String {
    let label = |r: &KpiRow| match r.cap_bar {
        None => format!("{} {}", r.scenario, r.algo.to_uppercase()),
        Some(c) => format!("{} {} (C̄={c})", r.scenario, r.algo.to_uppercase()),
    };
    let width = rows
        .iter()
        .map(|r| label(r).chars().count())
        .max()
        .unwrap_or(0)
        .max(20);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:>6}  {:>6}  {:>8}  {:>9}",
        "Algorithm+Situation", "Rc", "Rj", "St(min)", "blockages"
    );
    for r in rows {
        let k = &r.kpis;
        let pad = width - label(r).chars().count();
        let _ = writeln!(
            s,
            "{}{}  {:>6}  {:>6}  {:>8.3}  {:>9}",
            label(r),
            " ".repeat(pad),
            k.recirculated,
            k.rejected,
            k.st_min(),
            k.blockages
        );
    }
    s
}

/// Where reports go; nothing is written when `dir` is `None`.
pub struct Reports {
    dir: Option<PathBuf>,
}

impl Reports {
    pub fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Self { dir })
    }

    pub fn write(&self, name: &str, body: &str) -> Result<()> {
        if let Some(d) = &self.dir {
            let p = d.join(name);
            fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
        }
        Ok(())
    }

    /// KPI row, plan, staffing, allocations and optional traces of one run.
    pub fn run(&self, session: &Session, out: &RunOutput, row: &KpiRow) -> Result<()> {
        self.write("kpi.csv", &kpi_csv(std::slice::from_ref(row)))?;
        self.write("plan.toml", &plan_to_toml(&session.prep.plan))?;
        let spirals: Vec<usize> = session.scenario.layout.spiral_chutes().collect();
        self.write(
            "staffing.csv",
            &staffing_csv(&session.prep.staffing, &spirals),
        )?;
        for (w, a) in out.allocations.iter().enumerate() {
            self.write(&format!("allocation_wave{w}.csv"), &allocation_csv(a))?;
        }
        for (w, r) in out.sim.waves.iter().enumerate() {
            if !r.trace.is_empty() {
                self.write(&format!("trace_wave{w}.csv"), &trace_csv(&r.trace))?;
            }
        }
        self.write("report.txt", &comparison_table(std::slice::from_ref(row)))
    }

    pub fn compare(&self, rows: &[KpiRow]) -> Result<()> {
        self.write("kpi.csv", &kpi_csv(rows))?;
        self.write("report.txt", &comparison_table(rows))
    }

    pub fn tune(&self, trace: &TuningTrace, tunable: &[bool]) -> Result<()> {
        self.write("tuning.csv", &tuning_csv(trace, tunable))
    }

    pub fn sweep(&self, r: &SweepReport) -> Result<()> {
        self.write("sweep.csv", &sweep_csv(r))
    }
}

/// Parses `lo,hi`.
pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected lo,hi, got {s:?}"))?;
    let lo: f64 = a
        .trim()
        .parse()
        .map_err(|_| format!("bad lower bound {a:?}"))?;
    let hi: f64 = b
        .trim()
        .parse()
        .map_err(|_| format!("bad upper bound {b:?}"))?;
    if !(lo > 0.0 && lo <= hi) {
        return Err(format!("range {lo},{hi} must satisfy 0 < lo <= hi"));
    }
    Ok((lo, hi))
}

/// Parses `a..b` or a comma list of seeds.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let lo: u64 = a.trim().parse().map_err(|_| format!("bad seed {a:?}"))?;
        let hi: u64 = b.trim().parse().map_err(|_| format!("bad seed {b:?}"))?;
        if lo >= hi {
            return Err(format!("empty seed range {s}"));
        }
        return Ok((lo..hi).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| format!("bad seed {x:?}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_seeds() {
        assert_eq!(parse_range("0.8,1.2"), Ok((0.8, 1.2)));
        assert!(parse_range("1.2,0.8").is_err());
        assert!(parse_range("1").is_err());
        assert_eq!(parse_seeds("1..4"), Ok(vec![1, 2, 3]));
        assert_eq!(parse_seeds("7, 9"), Ok(vec![7, 9]));
        assert!(parse_seeds("3..3").is_err());
    }

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let e = anyhow::Error::from(CoreError::config("x"));
        assert_eq!(exit_code(&e), exit::CONFIG);
        let e = anyhow::Error::from(CoreError::Infeasible {
            reason: "x".into(),
            hint: None,
        })
        .context("planning");
        assert_eq!(exit_code(&e), exit::INFEASIBLE);
        let e = anyhow::Error::from(CoreError::Tuning {
            iteration: 2,
            source: Box::new(CoreError::SolverLimit),
        });
        assert_eq!(exit_code(&e), exit::SOLVER_LIMIT);
        let e = anyhow::Error::from(std::io::Error::other("disk"));
        assert_eq!(exit_code(&e), exit::IO);
    }

    #[test]
    fn table_aligns_columns() {
        let rows = vec![
            KpiRow {
                algo: "greedy".into(),
                scenario: "s".into(),
                cap_bar: None,
                kpis: KpiReport::default(),
            },
            KpiRow {
                algo: "optsort".into(),
                scenario: "s".into(),
                cap_bar: Some(55),
                kpis: KpiReport::default(),
            },
        ];
        let t = comparison_table(&rows);
        let lens: Vec<usize> = t.lines().map(|l| l.chars().count()).collect();
        assert!(lens.iter().all(|&n| n == lens[0]), "{t}");
        assert!(t.contains("s OPTSORT (C̄=55)"));
    }
}
