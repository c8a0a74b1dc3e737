//! Discrete-event model of the ring, chutes, workers and cages.
//!
//! The belt runs at constant speed, so a parcel that entered at τ passes a
//! mouth at offset `o` at τ + o + laps·lap. Chute mouths are the only
//! contention points. Each wave is simulated on its own and run to completion
//! unless a horizon is set.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::executor::ExecutionProblem;
use crate::kpi::KpiReport;
use crate::labor::StaffingPlan;
use crate::layout::Layout;

/// Declaration order is the tie-break at equal times: capacity frees up
/// before anything tries to use it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    ProcessComplete,
    CageSwap,
    ParcelEnter,
    ChuteMouthPass,
    ChuteEnter,
    Reject,
    Blockage,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub time_ms: u64,
    pub kind: EventKind,
    pub parcel: Option<usize>,
    /// `None` is the rejection chute or no chute at all.
    pub chute: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    /// Chute per parcel from the wave model; `None` is a planned rejection.
    Allocation(&'a [Option<usize>]),
    /// First admissible chute with room, in ring order.
    Greedy,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimConfig {
    pub trace: bool,
    /// Stop at this time; unfinished parcels count as in system.
    pub horizon_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChuteStats {
    pub entered: u64,
    pub high_water: u32,
    pub blockages: u64,
    pub cage_swaps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Sorted {
        chute: usize,
        time_ms: u64,
        laps: u32,
    },
    Rejected {
        time_ms: u64,
        laps: u32,
    },
    InSystem,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveResult {
    pub kpis: KpiReport,
    pub chutes: Vec<ChuteStats>,
    pub outcomes: Vec<Outcome>,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub waves: Vec<WaveResult>,
    pub kpis: KpiReport,
}

#[derive(Debug, Clone, Copy, Default)]
struct ParcelState {
    laps: u32,
    attempts: u32,
    /// Position in the greedy candidate list.
    cursor: usize,
}

type Key = Reverse<(u64, EventKind, usize, u64, usize)>;

struct Sim<'a> {
    layout: &'a Layout,
    problem: &'a ExecutionProblem,
    service: &'a [Option<u64>],
    policy: Policy<'a>,
    cfg: SimConfig,
    heap: BinaryHeap<Key>,
    seq: u64,
    parcels: Vec<ParcelState>,
    candidates: Vec<Vec<usize>>,
    in_chute: Vec<u32>,
    queue: Vec<VecDeque<usize>>,
    busy: Vec<bool>,
    cage_fill: Vec<u32>,
    stats: Vec<ChuteStats>,
    outcomes: Vec<Outcome>,
    trace: Vec<TraceEvent>,
    last_ms: u64,
}

const NONE: usize = usize::MAX;

impl<'a> Sim<'a> {
    fn push(&mut self, time: u64, kind: EventKind, parcel: usize, chute: usize) {
        self.seq += 1;
        self.heap
            .push(Reverse((time, kind, parcel, self.seq, chute)));
    }

    fn log(&mut self, time_ms: u64, kind: EventKind, parcel: usize, chute: usize) {
        if self.cfg.trace {
            self.trace.push(TraceEvent {
                time_ms,
                kind,
                parcel: (parcel != NONE).then_some(parcel),
                chute: (chute != NONE).then_some(chute),
            });
        }
    }

    fn entry(&self, m: usize) -> u64 {
        self.problem.wave.parcels[m].arrival_ms
    }

    fn pass_time(&self, m: usize, j: usize) -> u64 {
        self.entry(m)
            + self.layout.chutes[j].travel_ms
            + self.parcels[m].laps as u64 * self.layout.lap_ms
    }

    /// Sends `m` to the next pass of the rejection mouth after `now`.
    fn reject_next(&mut self, m: usize, now: u64) {
        let rej = self.entry(m) + self.layout.rejection.travel_ms;
        let lap = self.layout.lap_ms;
        let mut laps = self.parcels[m].laps;
        while rej + laps as u64 * lap <= now {
            laps += 1;
        }
        self.parcels[m].laps = laps;
        self.push(rej + laps as u64 * lap, EventKind::Reject, m, NONE);
    }

    fn on_enter(&mut self, m: usize, t: u64) {
        self.log(t, EventKind::ParcelEnter, m, NONE);
        let first = match self.policy {
            Policy::Allocation(a) => a[m],
            Policy::Greedy => self.candidates[m].first().copied(),
        };
        match first {
            Some(j) => {
                let at = self.pass_time(m, j);
                self.push(at, EventKind::ChuteMouthPass, m, j);
            }
            None => {
                let at = t + self.layout.rejection.travel_ms;
                self.push(at, EventKind::Reject, m, NONE);
            }
        }
    }

    fn on_pass(&mut self, m: usize, j: usize, t: u64) {
        self.log(t, EventKind::ChuteMouthPass, m, j);
        if self.in_chute[j] < self.layout.chutes[j].capacity {
            self.push(t, EventKind::ChuteEnter, m, j);
            // Reserve the slot now so a same-time pass cannot take it.
            self.in_chute[j] += 1;
            return;
        }
        let r = self.layout.max_reattempts;
        match self.policy {
            Policy::Allocation(_) => {
                self.stats[j].blockages += 1;
                self.log(t, EventKind::Blockage, m, j);
                let p = &mut self.parcels[m];
                p.attempts += 1;
                if p.attempts <= r {
                    p.laps += 1;
                    let at = self.pass_time(m, j);
                    self.push(at, EventKind::ChuteMouthPass, m, j);
                } else {
                    self.reject_next(m, t);
                }
            }
            Policy::Greedy => {
                let p = &mut self.parcels[m];
                p.cursor += 1;
                if p.cursor == self.candidates[m].len() {
                    p.cursor = 0;
                    p.attempts += 1;
                    if p.attempts > r {
                        self.reject_next(m, t);
                        return;
                    }
                    p.laps += 1;
                }
                let next = self.candidates[m][self.parcels[m].cursor];
                let at = self.pass_time(m, next);
                self.push(at, EventKind::ChuteMouthPass, m, next);
            }
        }
    }

    fn on_chute_enter(&mut self, m: usize, j: usize, t: u64) {
        self.log(t, EventKind::ChuteEnter, m, j);
        let s = &mut self.stats[j];
        s.entered += 1;
        s.high_water = s.high_water.max(self.in_chute[j]);
        self.outcomes[m] = Outcome::Sorted {
            chute: j,
            time_ms: t,
            laps: self.parcels[m].laps,
        };
        self.queue[j].push_back(m);
        self.start_service(j, t);
    }

    fn start_service(&mut self, j: usize, t: u64) {
        if self.busy[j] {
            return;
        }
        let Some(s) = self.service[j] else { return };
        if let Some(&m) = self.queue[j].front() {
            self.busy[j] = true;
            self.push(t + s, EventKind::ProcessComplete, m, j);
        }
    }

    fn on_complete(&mut self, m: usize, j: usize, t: u64) {
        self.log(t, EventKind::ProcessComplete, m, j);
        self.queue[j].pop_front();
        self.in_chute[j] -= 1;
        self.busy[j] = false;
        self.cage_fill[j] += 1;
        if self.cage_fill[j] >= self.layout.cage_size {
            self.push(t, EventKind::CageSwap, m, j);
        }
        self.start_service(j, t);
    }

    fn on_swap(&mut self, m: usize, j: usize, t: u64) {
        self.log(t, EventKind::CageSwap, m, j);
        self.cage_fill[j] = 0;
        self.stats[j].cage_swaps += 1;
    }

    fn on_reject(&mut self, m: usize, t: u64) {
        self.log(t, EventKind::Reject, m, NONE);
        self.outcomes[m] = Outcome::Rejected {
            time_ms: t,
            laps: self.parcels[m].laps,
        };
    }

    fn run(mut self) -> WaveResult {
        for m in 0..self.problem.wave.len() {
            let t = self.entry(m);
            self.push(t, EventKind::ParcelEnter, m, NONE);
        }
        while let Some(Reverse((t, kind, m, _, j))) = self.heap.pop() {
            if self.cfg.horizon_ms.is_some_and(|h| t > h) {
                break;
            }
            self.last_ms = t;
            match kind {
                EventKind::ParcelEnter => self.on_enter(m, t),
                EventKind::ChuteMouthPass => self.on_pass(m, j, t),
                EventKind::ChuteEnter => self.on_chute_enter(m, j, t),
                EventKind::ProcessComplete => self.on_complete(m, j, t),
                EventKind::CageSwap => self.on_swap(m, j, t),
                EventKind::Reject => self.on_reject(m, t),
                EventKind::Blockage => {}
            }
        }
        let mut k = KpiReport {
            parcels: self.problem.wave.len() as u64,
            elapsed_ms: if self.problem.wave.is_empty() {
                0
            } else {
                self.last_ms.max(self.problem.wave.length_ms)
            },
            ..Default::default()
        };
        for (m, o) in self.outcomes.iter().enumerate() {
            let entry = self.problem.wave.parcels[m].arrival_ms;
            match *o {
                Outcome::Sorted { time_ms, laps, .. } => {
                    k.processed += 1;
                    k.sort_time_ms += time_ms - entry;
                    k.laps += laps as u64;
                    k.recirculated += (laps > 0) as u64;
                }
                Outcome::Rejected { time_ms, laps } => {
                    k.rejected += 1;
                    k.sort_time_ms += time_ms - entry;
                    k.laps += laps as u64;
                    k.recirculated += (laps > 0) as u64;
                }
                Outcome::InSystem => k.in_system += 1,
            }
        }
        k.blockages = self.stats.iter().map(|s| s.blockages).sum();
        k.cage_swaps = self.stats.iter().map(|s| s.cage_swaps).sum();
        WaveResult {
            kpis: k,
            chutes: self.stats,
            outcomes: self.outcomes,
            trace: self.trace,
        }
    }
}

/// Simulates one wave with the service times assumed by `problem`.
pub fn simulate_wave(
    layout: &Layout,
    problem: &ExecutionProblem,
    policy: Policy,
    cfg: SimConfig,
) -> Result<WaveResult> {
    let service: Vec<Option<u64>> = problem.chutes.iter().map(|c| c.service_ms).collect();
    simulate_wave_with_service(layout, problem, &service, policy, cfg)
}

/// Simulates one wave with actual service times that may differ from the
/// ones the allocation was computed with.
pub fn simulate_wave_with_service(
    layout: &Layout,
    problem: &ExecutionProblem,
    service: &[Option<u64>],
    policy: Policy,
    cfg: SimConfig,
) -> Result<WaveResult> {
    let k = layout.k();
    let n = problem.wave.len();
    if service.len() != k || problem.chutes.len() != k {
        return Err(CoreError::config(format!(
            "expected {k} chutes in the wave problem"
        )));
    }
    if let Policy::Allocation(a) = policy {
        if a.len() != n {
            return Err(CoreError::config(format!(
                "allocation has {} entries for {n} parcels",
                a.len()
            )));
        }
        if let Some((m, j)) = a
            .iter()
            .enumerate()
            .find_map(|(m, j)| j.filter(|&j| j >= k).map(|j| (m, j)))
        {
            return Err(CoreError::config(format!(
                "parcel {m} allocated to unknown chute {j}"
            )));
        }
    }
    if layout.lap_ms == 0 {
        return Err(CoreError::config("lap time must be positive"));
    }
    let ring = layout.ring_order();
    let candidates = match policy {
        Policy::Greedy => problem
            .admissible
            .iter()
            .map(|adm| {
                ring.iter()
                    .copied()
                    .filter(|j| adm.contains(j) && service[*j].is_some())
                    .collect()
            })
            .collect(),
        Policy::Allocation(_) => Vec::new(),
    };
    let sim = Sim {
        layout,
        problem,
        service,
        policy,
        cfg,
        heap: BinaryHeap::new(),
        seq: 0,
        parcels: vec![ParcelState::default(); n],
        candidates,
        in_chute: vec![0; k],
        queue: vec![VecDeque::new(); k],
        busy: vec![false; k],
        cage_fill: vec![0; k],
        stats: vec![ChuteStats::default(); k],
        outcomes: vec![Outcome::InSystem; n],
        trace: Vec::new(),
        last_ms: 0,
    };
    Ok(sim.run())
}

/// Simulates consecutive waves independently and sums their KPIs.
pub fn run_waves(
    layout: &Layout,
    problems: &[ExecutionProblem],
    service: &[Option<u64>],
    policies: &[Policy],
    cfg: SimConfig,
) -> Result<SimResult> {
    if policies.len() != problems.len() {
        return Err(CoreError::config("one policy per wave is required"));
    }
    let mut waves = Vec::with_capacity(problems.len());
    let mut kpis = KpiReport::default();
    for (p, &policy) in problems.iter().zip(policies) {
        let w = simulate_wave_with_service(layout, p, service, policy, cfg)?;
        kpis.merge(&w.kpis);
        waves.push(w);
    }
    Ok(SimResult { waves, kpis })
}

pub fn trace_csv(trace: &[TraceEvent]) -> String {
    let mut s = String::from("time_ms,kind,parcel,chute\n");
    for e in trace {
        let parcel = e.parcel.map(|p| p.to_string()).unwrap_or_default();
        let chute = match (e.kind, e.chute) {
            (_, Some(j)) => j.to_string(),
            (EventKind::Reject, None) => "REJECT".to_string(),
            _ => String::new(),
        };
        let _ = writeln!(s, "{},{},{},{}", e.time_ms, e.kind, parcel, chute);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerProfile {
    pub efficiency: f64,
    pub chute: Option<usize>,
}

/// Uniform efficiencies on `[lo, hi]`, one ChaCha8 stream per seed.
pub fn sample_efficiencies(
    count: usize,
    range: (f64, f64),
    seed: u64,
) -> Result<Vec<WorkerProfile>> {
    let (lo, hi) = range;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(CoreError::config(format!(
            "efficiency range [{lo}, {hi}] must satisfy 0 < lo <= hi"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| WorkerProfile {
            efficiency: if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            },
            chute: None,
        })
        .collect())
}

/// Hands workers to spiral chutes in id order following `staffing`, whose
/// rows follow [`Layout::spiral_chutes`]. Leftover workers stay idle.
pub fn assign_profiles(
    workers: &mut [WorkerProfile],
    layout: &Layout,
    staffing: &StaffingPlan,
) -> Result<()> {
    let spirals: Vec<usize> = layout.spiral_chutes().collect();
    if staffing.sigma.len() != spirals.len() {
        return Err(CoreError::config(format!(
            "staffing covers {} chutes, layout has {} spiral chutes",
            staffing.sigma.len(),
            spirals.len()
        )));
    }
    if staffing.assigned() > workers.len() {
        return Err(CoreError::config(format!(
            "staffing uses {} workers, only {} available",
            staffing.assigned(),
            workers.len()
        )));
    }
    let mut w = workers.iter_mut();
    for (&j, &count) in spirals.iter().zip(&staffing.sigma) {
        for p in w.by_ref().take(count) {
            p.chute = Some(j);
        }
    }
    for p in w {
        p.chute = None;
    }
    Ok(())
}

/// Per-chute service times implied by the assigned workers.
pub fn service_times(layout: &Layout, workers: &[WorkerProfile]) -> Vec<Option<u64>> {
    layout
        .chutes
        .iter()
        .map(|c| {
            let eff: Vec<f64> = workers
                .iter()
                .filter(|w| w.chute == Some(c.id))
                .map(|w| w.efficiency)
                .collect();
            c.service_ms(&eff)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::Wave;
    use crate::executor::ChuteExec;
    use crate::layout::ChuteSpec;

    fn layout(k: usize, capacity: u32, reattempts: u32) -> Layout {
        Layout {
            chutes: (0..k)
                .map(|j| ChuteSpec::spiral(j, capacity, 30_000, 2_000 * (j as u64 + 1)))
                .collect(),
            rejection: ChuteSpec::rejection(1_000),
            lap_ms: 4_000 * k as u64,
            destinations: 1,
            max_chutes_per_dest: vec![k as u32],
            max_dests_per_chute: vec![1; k],
            admissible: None,
            max_reattempts: reattempts,
            cage_size: 40,
        }
    }

    fn problem(l: &Layout, arrivals: &[u64]) -> ExecutionProblem {
        ExecutionProblem {
            wave: Wave::from_arrivals(arrivals.iter().map(|&t| (0, t)).collect(), 3_000_000),
            admissible: vec![(0..l.k()).collect(); arrivals.len()],
            chutes: l
                .chutes
                .iter()
                .map(|c| ChuteExec {
                    travel_ms: c.travel_ms,
                    service_ms: Some(c.process_ms),
                    capacity: c.capacity,
                    cap_bar: c.capacity,
                    wave_cap: None,
                })
                .collect(),
        }
    }

    #[test]
    fn empty_wave_is_all_zero() {
        let l = layout(2, 2, 0);
        let p = problem(&l, &[]);
        let r = simulate_wave(&l, &p, Policy::Greedy, SimConfig::default()).unwrap();
        assert_eq!(r.kpis, KpiReport::default());
    }

    #[test]
    fn greedy_counts_each_overflow_in_both() {
        // One chute holding one parcel: the second parcel finds it full,
        // laps once and is rejected.
        let l = layout(1, 1, 0);
        let p = problem(&l, &[0, 10]);
        let r = simulate_wave(&l, &p, Policy::Greedy, SimConfig::default()).unwrap();
        assert_eq!(r.kpis.processed, 1);
        assert_eq!(r.kpis.rejected, 1);
        assert_eq!(r.kpis.recirculated, 1);
        assert_eq!(r.kpis.blockages, 0);
        assert_eq!(
            r.outcomes[1],
            Outcome::Rejected {
                time_ms: 10 + 1_000 + 4_000,
                laps: 1
            }
        );
        assert!(r.kpis.is_conserved());
    }

    #[test]
    fn blocked_allocation_recirculates_then_enters() {
        let l = layout(1, 1, 2);
        let p = problem(&l, &[0, 10]);
        let a = [Some(0), Some(0)];
        let r = simulate_wave(&l, &p, Policy::Allocation(&a), SimConfig::default()).unwrap();
        // Service is 30 s and a lap is 4 s, so the second parcel is blocked
        // on two passes, then rejected.
        assert_eq!(r.kpis.blockages, 3);
        assert_eq!(r.kpis.rejected, 1);
        assert_eq!(r.kpis.recirculated, 1);
    }

    #[test]
    fn planned_rejection_leaves_on_first_pass() {
        let l = layout(1, 1, 0);
        let p = problem(&l, &[0]);
        let a = [None];
        let r = simulate_wave(&l, &p, Policy::Allocation(&a), SimConfig::default()).unwrap();
        assert_eq!(
            r.outcomes[0],
            Outcome::Rejected {
                time_ms: 1_000,
                laps: 0
            }
        );
        assert_eq!(r.kpis.recirculated, 0);
    }

    #[test]
    fn sort_time_is_travel_time() {
        let l = layout(2, 5, 0);
        let p = problem(&l, &[0]);
        let a = [Some(1)];
        let r = simulate_wave(&l, &p, Policy::Allocation(&a), SimConfig::default()).unwrap();
        assert_eq!(r.kpis.sort_time_ms, 4_000);
    }

    #[test]
    fn unknown_chute_is_a_config_error() {
        let l = layout(1, 1, 0);
        let p = problem(&l, &[0]);
        let a = [Some(3)];
        assert!(simulate_wave(&l, &p, Policy::Allocation(&a), SimConfig::default()).is_err());
    }

    #[test]
    fn horizon_leaves_parcels_in_system() {
        let l = layout(1, 5, 0);
        let p = problem(&l, &[0, 100_000]);
        let cfg = SimConfig {
            horizon_ms: Some(50_000),
            ..Default::default()
        };
        let r = simulate_wave(&l, &p, Policy::Greedy, cfg).unwrap();
        assert_eq!(r.kpis.in_system, 1);
        assert!(r.kpis.is_conserved());
    }

    #[test]
    fn cage_swaps_are_counted() {
        let mut l = layout(1, 100, 0);
        l.cage_size = 2;
        let p = problem(&l, &[0, 1, 2, 3, 4]);
        let r = simulate_wave(&l, &p, Policy::Greedy, SimConfig::default()).unwrap();
        assert_eq!(r.kpis.cage_swaps, 2);
    }

    #[test]
    fn trace_is_deterministic() {
        let l = layout(2, 1, 1);
        let p = problem(&l, &[0, 0, 5, 7, 9]);
        let cfg = SimConfig {
            trace: true,
            ..Default::default()
        };
        let a = simulate_wave(&l, &p, Policy::Greedy, cfg).unwrap();
        let b = simulate_wave(&l, &p, Policy::Greedy, cfg).unwrap();
        assert_eq!(trace_csv(&a.trace), trace_csv(&b.trace));
        assert!(trace_csv(&a.trace).starts_with("time_ms,kind,parcel,chute\n0,ParcelEnter,0,\n"));
    }

    #[test]
    fn efficiency_sampling() {
        let a = sample_efficiencies(5, (1.0, 1.0), 3).unwrap();
        assert!(a.iter().all(|w| w.efficiency == 1.0));
        let b = sample_efficiencies(100, (0.8, 1.2), 7).unwrap();
        assert_eq!(b, sample_efficiencies(100, (0.8, 1.2), 7).unwrap());
        assert!(b.iter().all(|w| (0.8..=1.2).contains(&w.efficiency)));
        let big = sample_efficiencies(10_000, (0.8, 1.2), 11).unwrap();
        let mean = big.iter().map(|w| w.efficiency).sum::<f64>() / 10_000.0;
        assert!((0.99..=1.01).contains(&mean));
        assert!(sample_efficiencies(1, (0.0, 1.0), 0).is_err());
    }
}
