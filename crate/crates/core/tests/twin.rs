//! Simulation properties on small generated scenarios.

use optsort_core::pipeline::{cap_bar_vector, execute, prepare, workforce, Algo, RunSpec};
use optsort_core::scenario::{generate, GenerateOptions, LayoutKind, Scenario};
use optsort_core::twin::{service_times, Outcome, SimConfig, SimResult};
use optsort_milp::{BranchAndBound, Limits};
use proptest::prelude::*;

fn scenario() -> impl Strategy<Value = (Scenario, u32)> {
    (
        (8usize..30, 3usize..9, 0usize..3, any::<u64>()),
        (40usize..300, 3u32..12, 4u64..15, 0u32..12),
    )
        .prop_map(|((n, k, kind, seed), (wave, capacity, process_s, cut))| {
            let kind = [
                LayoutKind::Unrestricted,
                LayoutKind::Restricted,
                LayoutKind::DirectRestricted,
            ][kind];
            let wave_ms = 1_200_000;
            let per_wave = wave_ms / (process_s * 1000) * k as u64;
            let o = GenerateOptions {
                name: "prop".into(),
                destinations: n,
                chutes: k,
                load: per_wave * 9 / 10 * 2,
                kind,
                seed,
                waves: 2,
                wave_size: wave,
                wave_ms,
                arrival_span_ms: wave_ms * 4 / 5,
                shift_ms: wave_ms * 2,
                max_dests_per_chute: n as u32,
                capacity,
                process_ms: process_s * 1000,
                travel_spacing_ms: 1_000,
                zones: 2,
                ..Default::default()
            };
            let s = generate(&o).expect("valid options").scenario;
            (s, capacity.saturating_sub(cut).max(1))
        })
}

fn run(s: &Scenario, algo: Algo, cap_bar: u32) -> SimResult {
    let workers = s.workers.count;
    let prep = prepare(s, workers, &BranchAndBound, &Limits::default()).unwrap();
    let w = workforce(s, &prep.staffing, workers, (1.0, 1.0), 0).unwrap();
    let svc = service_times(&s.layout, &w);
    let cap = cap_bar_vector(&s.layout, Some(cap_bar));
    let spec = RunSpec {
        algo,
        cap_bar: &cap,
        model_service: &svc,
        actual_service: &svc,
        waves: s.waves.len(),
        sim: SimConfig::default(),
    };
    execute(s, &prep.plan, &spec, &BranchAndBound, &Limits::default())
        .unwrap()
        .sim
}

fn settled(r: &SimResult) -> bool {
    r.waves
        .iter()
        .all(|w| w.outcomes.iter().all(|o| !matches!(o, Outcome::InSystem)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn window_limited_allocation_never_recirculates((s, cap_bar) in scenario()) {
        let r = run(&s, Algo::Optsort, cap_bar);
        prop_assert_eq!(r.kpis.recirculated, 0);
        prop_assert_eq!(r.kpis.blockages, 0);
        prop_assert!(r.kpis.is_conserved());
        prop_assert!(settled(&r));
        for w in &r.waves {
            for (j, c) in w.chutes.iter().enumerate() {
                prop_assert!(c.high_water <= s.layout.chutes[j].capacity);
            }
        }
    }

    #[test]
    fn greedy_never_blocks_and_rejects_what_it_recirculates((s, _) in scenario()) {
        let r = run(&s, Algo::Greedy, 1);
        prop_assert_eq!(r.kpis.blockages, 0);
        prop_assert_eq!(r.kpis.recirculated, r.kpis.rejected);
        prop_assert!(r.kpis.is_conserved());
        prop_assert!(settled(&r));
    }

    #[test]
    fn reruns_are_identical((s, cap_bar) in scenario()) {
        prop_assert_eq!(run(&s, Algo::Optsort, cap_bar), run(&s, Algo::Optsort, cap_bar));
    }
}
