//! Closed-loop tuning of the window cap C̄: allocate, simulate, adjust.

use std::fmt::{self, Write};

use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::kpi::KpiReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ZeroRejections,
    /// A blockage was seen; the last blockage-free C̄ is returned.
    BlockageBoundary,
    MaxIters,
    /// The next step would exceed C_j + overdrive.
    OverdriveLimit,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Per-chute signals for vector tuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChuteFeedback {
    pub blockages: u64,
    /// Rejected parcels that had this chute among their admissible ones.
    pub rejections: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub kpis: KpiReport,
    pub chutes: Vec<ChuteFeedback>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningIteration {
    pub cap_bar: Vec<u32>,
    pub kpis: KpiReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningTrace {
    pub iterations: Vec<TuningIteration>,
    pub stop: StopReason,
    /// Index of the returned iteration: the last one without blockages.
    pub certified: Option<usize>,
}

impl TuningTrace {
    pub fn final_cap_bar(&self) -> Option<&[u32]> {
        self.certified
            .map(|i| self.iterations[i].cap_bar.as_slice())
    }

    pub fn certificate(&self) -> Option<&KpiReport> {
        self.certified.map(|i| &self.iterations[i].kpis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TuneOptions {
    pub step: u32,
    pub max_iters: usize,
    pub overdrive: u32,
    /// Adjust each chute from its own signals instead of one uniform value.
    pub per_chute: bool,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            step: 5,
            max_iters: 10,
            overdrive: 20,
            per_chute: false,
        }
    }
}

/// Runs the loop from `start`. Only chutes with `tunable[j]` move; their
/// ceiling is `capacity[j] + overdrive`.
pub fn tune_capacity(
    start: &[u32],
    capacity: &[u32],
    tunable: &[bool],
    opts: &TuneOptions,
    mut evaluate: impl FnMut(&[u32]) -> Result<Evaluation>,
) -> Result<TuningTrace> {
    if opts.step < 1 {
        return Err(CoreError::config("tuning step must be >= 1"));
    }
    if opts.max_iters < 1 {
        return Err(CoreError::config(
            "at least one tuning iteration is required",
        ));
    }
    let k = start.len();
    if capacity.len() != k || tunable.len() != k {
        return Err(CoreError::config(
            "C̄, capacity and tunable vectors differ in length",
        ));
    }
    let ceiling: Vec<u32> = capacity.iter().map(|&c| c + opts.overdrive).collect();
    if let Some(j) = (0..k).find(|&j| start[j] < 1 || (tunable[j] && start[j] > ceiling[j])) {
        return Err(CoreError::config(format!(
            "initial C̄ of chute {j} outside [1, C_j + overdrive]"
        )));
    }
    let mut iterations: Vec<TuningIteration> = Vec::new();
    let mut certified: Option<usize> = None;
    let mut cap = start.to_vec();
    let mut frozen = vec![false; k];
    let stop = loop {
        let iteration = iterations.len();
        let eval = evaluate(&cap).map_err(|e| CoreError::Tuning {
            iteration,
            source: Box::new(e),
        })?;
        iterations.push(TuningIteration {
            cap_bar: cap.clone(),
            kpis: eval.kpis,
        });
        if eval.kpis.blockages > 0 {
            if !opts.per_chute || certified.is_none() {
                break StopReason::BlockageBoundary;
            }
            // Freeze the offending chutes at their last safe value and go on.
            let safe = &iterations[certified.expect("checked")].cap_bar;
            let mut any = false;
            for j in 0..k {
                if eval.chutes.get(j).is_some_and(|c| c.blockages > 0) {
                    cap[j] = safe[j];
                    frozen[j] = true;
                    any = true;
                }
            }
            if !any {
                break StopReason::BlockageBoundary;
            }
        } else {
            certified = Some(iteration);
            if eval.kpis.rejected == 0 {
                break StopReason::ZeroRejections;
            }
            let grow: Vec<usize> = if opts.per_chute {
                (0..k)
                    .filter(|&j| {
                        tunable[j]
                            && !frozen[j]
                            && eval.chutes.get(j).is_some_and(|c| c.rejections > 0)
                    })
                    .collect()
            } else {
                (0..k).filter(|&j| tunable[j]).collect()
            };
            if grow.is_empty() || grow.iter().any(|&j| cap[j] + opts.step > ceiling[j]) {
                break StopReason::OverdriveLimit;
            }
            for j in grow {
                cap[j] += opts.step;
            }
        }
        if iterations.len() >= opts.max_iters {
            break StopReason::MaxIters;
        }
    };
    Ok(TuningTrace {
        iterations,
        stop,
        certified,
    })
}

/// `cap_bar` column: the value if uniform over tunable chutes, else a
/// `;`-joined vector.
fn cap_label(cap: &[u32]) -> String {
    match cap.first() {
        Some(&c) if cap.iter().all(|&x| x == c) => c.to_string(),
        _ => cap
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(";"),
    }
}

pub fn tuning_csv(trace: &TuningTrace, tunable: &[bool]) -> String {
    let mut s = String::from("iter,cap_bar,Rc,Rj,blockages,St_min\n");
    for (i, it) in trace.iterations.iter().enumerate() {
        let shown: Vec<u32> = it
            .cap_bar
            .iter()
            .zip(tunable)
            .filter(|(_, &t)| t)
            .map(|(&c, _)| c)
            .collect();
        let k = &it.kpis;
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{:.4}",
            cap_label(&shown),
            k.recirculated,
            k.rejected,
            k.blockages,
            k.st_min()
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub per_seed: Vec<(u64, KpiReport)>,
    pub worst: KpiReport,
}

/// Runs `run` for every seed concurrently; results keep seed order.
pub fn robustness_sweep(
    seeds: &[u64],
    run: impl Fn(u64) -> Result<KpiReport> + Sync,
) -> Result<SweepReport> {
    if seeds.is_empty() {
        return Err(CoreError::config("a sweep needs at least one seed"));
    }
    let per_seed = seeds
        .par_iter()
        .map(|&s| run(s).map(|k| (s, k)))
        .collect::<Result<Vec<_>>>()?;
    let worst = per_seed
        .iter()
        .skip(1)
        .fold(per_seed[0].1, |w, (_, k)| KpiReport::worst(&w, k));
    Ok(SweepReport { per_seed, worst })
}

pub fn sweep_csv(r: &SweepReport) -> String {
    let mut s = String::from("seed,Rc,Rj,St_min,pph,blockages\n");
    for (seed, k) in &r.per_seed {
        let _ = writeln!(
            s,
            "{seed},{},{},{:.4},{:.1},{}",
            k.recirculated,
            k.rejected,
            k.st_min(),
            k.pph(),
            k.blockages
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kpi(rejected: u64, blockages: u64) -> KpiReport {
        KpiReport {
            parcels: 2000,
            processed: 2000 - rejected,
            rejected,
            blockages,
            ..Default::default()
        }
    }

    /// Rejections vanish at `clear`, blockages start at `block`.
    fn model(clear: u32, block: u32) -> impl FnMut(&[u32]) -> Result<Evaluation> {
        move |cap: &[u32]| {
            let c = cap[0];
            Ok(Evaluation {
                kpis: kpi(
                    if c >= clear { 0 } else { (clear - c) as u64 },
                    if c >= block { 1 } else { 0 },
                ),
                chutes: vec![ChuteFeedback::default(); cap.len()],
            })
        }
    }

    #[test]
    fn stops_at_zero_rejections() {
        let t = tune_capacity(
            &[50],
            &[50],
            &[true],
            &TuneOptions::default(),
            model(55, 100),
        )
        .unwrap();
        assert_eq!(t.stop, StopReason::ZeroRejections);
        assert_eq!(t.final_cap_bar(), Some(&[55][..]));
        assert_eq!(t.iterations.len(), 2);
    }

    #[test]
    fn benign_load_stops_immediately() {
        let t = tune_capacity(
            &[50],
            &[50],
            &[true],
            &TuneOptions::default(),
            model(10, 100),
        )
        .unwrap();
        assert_eq!(t.iterations.len(), 1);
        assert_eq!(t.stop, StopReason::ZeroRejections);
    }

    #[test]
    fn blockage_reverts_to_last_safe() {
        let t = tune_capacity(
            &[50],
            &[50],
            &[true],
            &TuneOptions::default(),
            model(70, 60),
        )
        .unwrap();
        assert_eq!(t.stop, StopReason::BlockageBoundary);
        assert_eq!(t.final_cap_bar(), Some(&[55][..]));
        assert_eq!(t.certificate().unwrap().blockages, 0);
    }

    #[test]
    fn overdrive_bounds_the_search() {
        let t = tune_capacity(
            &[50],
            &[50],
            &[true],
            &TuneOptions::default(),
            model(1000, 1000),
        )
        .unwrap();
        assert_eq!(t.stop, StopReason::OverdriveLimit);
        assert_eq!(t.final_cap_bar(), Some(&[70][..]));
        let caps: Vec<u32> = t.iterations.iter().map(|i| i.cap_bar[0]).collect();
        assert!(caps.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn max_iters() {
        let opts = TuneOptions {
            max_iters: 2,
            ..Default::default()
        };
        let t = tune_capacity(&[50], &[50], &[true], &opts, model(1000, 1000)).unwrap();
        assert_eq!(t.stop, StopReason::MaxIters);
        assert_eq!(t.iterations.len(), 2);
    }

    #[test]
    fn zero_step_is_rejected() {
        let opts = TuneOptions {
            step: 0,
            ..Default::default()
        };
        assert!(tune_capacity(&[50], &[50], &[true], &opts, model(55, 100)).is_err());
    }

    #[test]
    fn errors_carry_the_iteration() {
        let mut calls = 0;
        let err = tune_capacity(&[50], &[50], &[true], &TuneOptions::default(), |_| {
            calls += 1;
            if calls == 2 {
                Err(CoreError::Infeasible {
                    reason: "x".into(),
                    hint: None,
                })
            } else {
                Ok(Evaluation {
                    kpis: kpi(5, 0),
                    chutes: vec![],
                })
            }
        })
        .unwrap_err();
        assert!(matches!(err, CoreError::Tuning { iteration: 1, .. }));
    }

    #[test]
    fn per_chute_moves_only_rejecting_chutes() {
        let t = tune_capacity(
            &[50, 50],
            &[50, 50],
            &[true, true],
            &TuneOptions {
                per_chute: true,
                ..Default::default()
            },
            |cap: &[u32]| {
                let r = if cap[0] < 60 { 1 } else { 0 };
                Ok(Evaluation {
                    kpis: kpi(r, 0),
                    chutes: vec![
                        ChuteFeedback {
                            blockages: 0,
                            rejections: r,
                        },
                        ChuteFeedback::default(),
                    ],
                })
            },
        )
        .unwrap();
        assert_eq!(t.final_cap_bar(), Some(&[60, 50][..]));
    }

    #[test]
    fn sweep_reports_the_worst_seed() {
        let r = robustness_sweep(&[1, 2, 3], |s| Ok(kpi(s, 0))).unwrap();
        assert_eq!(r.worst.rejected, 3);
        assert_eq!(
            r.per_seed.iter().map(|p| p.0).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        assert!(robustness_sweep(&[], |_| Ok(kpi(0, 0))).is_err());
    }

    #[test]
    fn csv_layout() {
        let t = tune_capacity(
            &[50],
            &[50],
            &[true],
            &TuneOptions::default(),
            model(55, 100),
        )
        .unwrap();
        let csv = tuning_csv(&t, &[true]);
        assert!(csv.starts_with("iter,cap_bar,Rc,Rj,blockages,St_min\n0,50,0,5,0,"));
    }
}
