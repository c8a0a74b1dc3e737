//! Planning solutions against exhaustive enumeration of the matching.

use optsort_core::demand::DemandForecast;
use optsort_core::layout::{ChuteSpec, Layout};
use optsort_core::planner::{audit_plan, solve_plan, ObjectiveKind, PlanningProblem};
use optsort_milp::{BranchAndBound, Limits, Status};
use proptest::prelude::*;

const SHIFT_MS: u64 = 6_000;

#[derive(Debug, Clone)]
struct Instance {
    loads: Vec<u64>,
    /// ⌊T/t_j⌋ per chute.
    caps: Vec<u64>,
    m: Vec<u32>,
    n: Vec<u32>,
    adm: Vec<Vec<bool>>,
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=4, 1usize..=3).prop_flat_map(|(n, k)| {
        (
            prop::collection::vec(1u64..=6, n),
            prop::collection::vec(1u64..=6, k),
            prop::collection::vec(1u32..=3, n),
            prop::collection::vec(1u32..=4, k),
            prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.8), k), n),
        )
            .prop_map(|(loads, caps, m, n, adm)| Instance {
                loads,
                caps,
                m,
                n,
                adm,
            })
    })
}

fn problem(inst: &Instance, objective: ObjectiveKind) -> PlanningProblem {
    let k = inst.caps.len();
    let layout = Layout {
        chutes: inst
            .caps
            .iter()
            .enumerate()
            .map(|(j, &c)| ChuteSpec::spiral(j, 10, SHIFT_MS / c, 1_000 * (j as u64 + 1)))
            .collect(),
        rejection: ChuteSpec::rejection(500),
        lap_ms: 10_000,
        destinations: inst.loads.len(),
        max_chutes_per_dest: inst.m.clone(),
        max_dests_per_chute: inst.n.clone(),
        admissible: Some(inst.adm.clone()),
        max_reattempts: 0,
        cage_size: 10,
    };
    assert_eq!(layout.k(), k);
    PlanningProblem::new(
        DemandForecast {
            loads: inst.loads.clone(),
            shift_ms: SHIFT_MS,
        },
        layout,
    )
    .with_objective(objective)
}

/// Max flow on a tiny bipartite network by repeated DFS augmentation.
fn max_flow(src: &[u64], dst: &[u64], pair: &[Vec<u64>]) -> u64 {
    let (n, k) = (src.len(), dst.len());
    let mut s = src.to_vec();
    let mut d = dst.to_vec();
    let mut res: Vec<Vec<u64>> = pair.to_vec();
    let mut back = vec![vec![0u64; k]; n];
    let mut total = 0;
    loop {
        // Search from any source with spare supply to any chute with spare room.
        let mut found = None;
        for start in (0..n).filter(|&i| s[i] > 0) {
            let mut seen_d = vec![false; n];
            let mut seen_c = vec![false; k];
            let mut path = Vec::new();
            if augment(start, &res, &back, &d, &mut seen_d, &mut seen_c, &mut path) {
                found = Some((start, path));
                break;
            }
        }
        let Some((start, path)) = found else {
            return total;
        };
        s[start] -= 1;
        // path alternates: (i, j, forward) edges
        for &(i, j, fwd) in &path {
            if fwd {
                res[i][j] -= 1;
                back[i][j] += 1;
            } else {
                res[i][j] += 1;
                back[i][j] -= 1;
            }
        }
        let last = path.last().expect("non-empty path").1;
        d[last] -= 1;
        total += 1;
    }
}

fn augment(
    i: usize,
    res: &[Vec<u64>],
    back: &[Vec<u64>],
    d: &[u64],
    seen_d: &mut [bool],
    seen_c: &mut [bool],
    path: &mut Vec<(usize, usize, bool)>,
) -> bool {
    seen_d[i] = true;
    for j in 0..d.len() {
        if res[i][j] == 0 || seen_c[j] {
            continue;
        }
        seen_c[j] = true;
        path.push((i, j, true));
        if d[j] > 0 {
            return true;
        }
        for i2 in 0..res.len() {
            if back[i2][j] > 0 && !seen_d[i2] {
                path.push((i2, j, false));
                if augment(i2, res, back, d, seen_d, seen_c, path) {
                    return true;
                }
                path.pop();
            }
        }
        path.pop();
    }
    false
}

/// Best objective key per kind (parcels, matches, lexicographic pair) over
/// every feasible X; `None` if no X is feasible.
fn enumerate(inst: &Instance) -> Option<((u64, u64), (u64, u64), (u64, u64))> {
    let (n, k) = (inst.loads.len(), inst.caps.len());
    let mut best: [Option<(u64, u64)>; 3] = [None; 3];
    for mask in 0u32..(1 << (n * k)) {
        let x = |i: usize, j: usize| mask >> (i * k + j) & 1 == 1;
        let ok_rows = (0..n).all(|i| {
            let c = (0..k).filter(|&j| x(i, j)).count() as u32;
            c >= 1 && c <= inst.m[i] && (0..k).all(|j| !x(i, j) || inst.adm[i][j])
        });
        let ok_cols = (0..k).all(|j| (0..n).filter(|&i| x(i, j)).count() as u32 <= inst.n[j]);
        if !ok_rows || !ok_cols {
            continue;
        }
        // One parcel on every match first, then the rest by max flow.
        let deg_d: Vec<u64> = (0..n)
            .map(|i| (0..k).filter(|&j| x(i, j)).count() as u64)
            .collect();
        let deg_c: Vec<u64> = (0..k)
            .map(|j| (0..n).filter(|&i| x(i, j)).count() as u64)
            .collect();
        if (0..n).any(|i| deg_d[i] > inst.loads[i]) || (0..k).any(|j| deg_c[j] > inst.caps[j]) {
            continue;
        }
        let src: Vec<u64> = (0..n).map(|i| inst.loads[i] - deg_d[i]).collect();
        let dst: Vec<u64> = (0..k).map(|j| inst.caps[j] - deg_c[j]).collect();
        let pair: Vec<Vec<u64>> = (0..n)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        if x(i, j) {
                            inst.loads[i].min(inst.caps[j]) - 1
                        } else {
                            0
                        }
                    })
                    .collect()
            })
            .collect();
        let parcels = deg_d.iter().sum::<u64>() + max_flow(&src, &dst, &pair);
        let matches = mask.count_ones() as u64;
        let keys = [(parcels, 0), (matches, 0), (parcels, matches)];
        for (b, key) in best.iter_mut().zip(keys) {
            if b.is_none_or(|v| key > v) {
                *b = Some(key);
            }
        }
    }
    Some((best[0]?, best[1]?, best[2]?))
}

#[test]
fn oracle_on_a_hand_instance() {
    let inst = Instance {
        loads: vec![5, 1],
        caps: vec![3, 3],
        m: vec![2, 2],
        n: vec![2, 1],
        adm: vec![vec![true, true], vec![true, true]],
    };
    // X = both chutes for destination 0 plus chute 0 for destination 1.
    assert_eq!(enumerate(&inst), Some(((6, 0), (3, 0), (6, 3))));
    let mut tight = inst.clone();
    tight.n = vec![1, 1];
    assert_eq!(enumerate(&tight).map(|b| b.0), Some((4, 0)));
    tight.loads = vec![1, 1, 1];
    tight.m = vec![1, 1, 1];
    tight.adm = vec![vec![true, true]; 3];
    assert_eq!(enumerate(&tight), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solver_matches_enumeration(inst in instance()) {
        let oracle = enumerate(&inst);
        for (kind, pick) in [
            (ObjectiveKind::ParcelCount, 0),
            (ObjectiveKind::MatchCount, 1),
            (ObjectiveKind::ParcelsThenMatches, 2),
        ] {
            let p = problem(&inst, kind);
            let got = solve_plan(&p, &BranchAndBound, &Limits::default());
            match (oracle, got) {
                (None, Err(_)) => {}
                (None, Ok(plan)) => prop_assert!(false, "solver found {:?} on an infeasible instance", plan.y),
                (Some(_), Err(e)) => prop_assert!(false, "solver failed on a feasible instance: {e}"),
                (Some(best), Ok(plan)) => {
                    prop_assert!(audit_plan(&p, &plan).is_empty(), "{:?}", audit_plan(&p, &plan));
                    prop_assert_eq!(plan.status, Status::Optimal);
                    let got = (plan.planned_parcels(), plan.matches() as u64);
                    let want = [best.0, best.1, best.2][pick];
                    let key = match pick {
                        0 => (got.0, 0),
                        1 => (got.1, 0),
                        _ => got,
                    };
                    prop_assert_eq!(key, want, "{:?}", kind);
                }
            }
        }
    }

    #[test]
    fn restricting_a_pair_never_helps(inst in instance(), i in 0usize..4, j in 0usize..3) {
        let full = solve_plan(&problem(&inst, ObjectiveKind::ParcelCount), &BranchAndBound, &Limits::default());
        let mut cut = inst.clone();
        if i < cut.loads.len() && j < cut.caps.len() {
            cut.adm[i][j] = false;
        }
        let less = solve_plan(&problem(&cut, ObjectiveKind::ParcelCount), &BranchAndBound, &Limits::default());
        if let Ok(l) = less {
            let f = full.expect("a restricted feasible instance stays feasible unrestricted");
            prop_assert!(l.planned_parcels() <= f.planned_parcels());
        }
    }
}
