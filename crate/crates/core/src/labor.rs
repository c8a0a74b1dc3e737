//! Worker-to-chute assignment over a penalty matrix.
//!
//! `z[c][w]` is the penalty of chute `c` staffed by `w` workers. The greedy
//! hands out workers one at a time to the chute with the largest penalty
//! reduction, with a paired move for chutes that need two handlers.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    pub z: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PenaltyShape {
    /// Unprocessed parcels.
    #[default]
    Linear,
    /// Square of the unprocessed fraction of one worker's capacity.
    NormalizedSquare,
}

/// Extra lookahead columns beyond `p`, so `z[c][σ+2]` always exists.
pub const PADDING: usize = 4;

impl PenaltyMatrix {
    pub fn new(z: Vec<Vec<f64>>) -> Self {
        Self { z }
    }

    pub fn chutes(&self) -> usize {
        self.z.len()
    }

    /// Penalty at `w` workers; columns past the end repeat the last one.
    pub fn get(&self, c: usize, w: usize) -> f64 {
        let row = &self.z[c];
        row[w.min(row.len() - 1)]
    }

    /// Chutes where one worker does not help: z[c][0] = z[c][1] > 0.
    pub fn two_handler(&self) -> Vec<usize> {
        (0..self.chutes())
            .filter(|&c| self.get(c, 0) == self.get(c, 1) && self.get(c, 0) > 0.0)
            .collect()
    }

    pub fn total(&self, sigma: &[usize]) -> f64 {
        sigma.iter().enumerate().map(|(c, &w)| self.get(c, w)).sum()
    }
}

/// Penalty of each chute as a function of its worker count.
///
/// A worker processes ⌊T / t_c⌋ parcels; two-handler chutes process nothing
/// with fewer than two workers. Columns run from 0 to `max_workers + PADDING`
/// and the padding follows the same function, which keeps both monotonicity
/// conditions intact where zero padding would break them.
pub fn penalty_from_load(
    loads: &[u64],
    process_ms: &[u64],
    horizon_ms: u64,
    two_handler: &[bool],
    max_workers: usize,
    shape: PenaltyShape,
) -> PenaltyMatrix {
    let cols = max_workers + 1 + PADDING;
    let z = loads
        .iter()
        .enumerate()
        .map(|(c, &load)| {
            let per_worker = if process_ms[c] == 0 {
                0
            } else {
                horizon_ms / process_ms[c]
            };
            (0..cols)
                .map(|w| {
                    let cap = if two_handler[c] && w < 2 {
                        0
                    } else {
                        w as u64 * per_worker
                    };
                    let left = load.saturating_sub(cap) as f64;
                    match shape {
                        PenaltyShape::Linear => left,
                        PenaltyShape::NormalizedSquare if per_worker == 0 => {
                            if left > 0.0 {
                                f64::from(u32::MAX)
                            } else {
                                0.0
                            }
                        }
                        PenaltyShape::NormalizedSquare => (left / per_worker as f64).powi(2),
                    }
                })
                .collect()
        })
        .collect();
    PenaltyMatrix { z }
}

/// Checks non-negativity, non-increasing penalties and non-increasing
/// marginals (waived where z[w] = z[w+1] > 0).
pub fn validate_penalties(m: &PenaltyMatrix) -> Vec<String> {
    let mut out = Vec::new();
    for (c, row) in m.z.iter().enumerate() {
        if row.is_empty() {
            out.push(format!("row {c}: empty"));
            continue;
        }
        for w in 0..row.len() {
            if row[w] < 0.0 || row[w].is_nan() {
                out.push(format!("row {c}: z[{w}] = {} is negative", row[w]));
            }
            if w + 1 < row.len() && row[w] < row[w + 1] {
                out.push(format!(
                    "row {c}: z[{w}] < z[{}] (penalty increases)",
                    w + 1
                ));
            }
            if w + 2 < row.len() {
                let plateau = row[w] == row[w + 1] && row[w] > 0.0;
                if !plateau && row[w] - row[w + 1] < row[w + 1] - row[w + 2] {
                    out.push(format!(
                        "row {c}: marginal at {w} smaller than at {}",
                        w + 1
                    ));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaffingPlan {
    pub sigma: Vec<usize>,
    pub penalty: f64,
    /// Workers left over when no chute could use them.
    pub idle: usize,
}

impl StaffingPlan {
    fn from_sigma(m: &PenaltyMatrix, sigma: Vec<usize>, p: usize) -> Self {
        let used: usize = sigma.iter().sum();
        Self {
            penalty: m.total(&sigma),
            idle: p.saturating_sub(used),
            sigma,
        }
    }

    pub fn assigned(&self) -> usize {
        self.sigma.iter().sum()
    }
}

fn best_single(m: &PenaltyMatrix, sigma: &[usize]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (c, &s) in sigma.iter().enumerate() {
        let d = m.get(c, s) - m.get(c, s + 1);
        if best.is_none_or(|(_, bd)| d > bd) {
            best = Some((c, d));
        }
    }
    best
}

/// The sequential greedy alone, without the local-move polish.
pub fn assign_workers_greedy(m: &PenaltyMatrix, p: usize) -> StaffingPlan {
    let k = m.chutes();
    let mut sigma = vec![0usize; k];
    if k == 0 {
        return StaffingPlan::from_sigma(m, sigma, p);
    }
    let pairs = m.two_handler();
    let mut assigned = 0usize;
    let mut last: Option<usize> = None;
    while assigned < p {
        let residual = (0..k).map(|c| m.get(c, sigma[c])).fold(0.0, f64::max);
        if residual <= 0.0 {
            break;
        }
        let (single, d1) = best_single(m, &sigma).expect("k > 0");
        let mut paired = None;
        if !pairs.is_empty() && p - assigned >= 2 {
            let d0 = last.map_or(0.0, |c| m.get(c, sigma[c]) - m.get(c, sigma[c] + 1));
            let mut best: Option<(usize, f64)> = None;
            for &c in &pairs {
                let d = m.get(c, sigma[c]) - m.get(c, sigma[c] + 2);
                if best.is_none_or(|(_, bd)| d > bd) {
                    best = Some((c, d));
                }
            }
            if let Some((c, dc)) = best {
                if dc > d0 + d1 {
                    paired = Some(c);
                }
            }
        }
        match paired {
            Some(c) => {
                sigma[c] += 2;
                assigned += 2;
                last = Some(c);
            }
            None if d1 > 0.0 => {
                sigma[single] += 1;
                assigned += 1;
                last = Some(single);
            }
            None => break,
        }
    }
    StaffingPlan::from_sigma(m, sigma, p)
}

/// Greedy assignment followed by improving single-worker moves (between
/// chutes, or from the idle pool) until none is left.
pub fn assign_workers(m: &PenaltyMatrix, p: usize) -> StaffingPlan {
    let plan = assign_workers_greedy(m, p);
    let sigma = polish(m, plan.sigma, p);
    StaffingPlan::from_sigma(m, sigma, p)
}

fn improving_move(m: &PenaltyMatrix, sigma: &[usize], p: usize) -> Option<(Option<usize>, usize)> {
    let k = sigma.len();
    let idle = p - sigma.iter().sum::<usize>();
    let mut best: Option<(Option<usize>, usize, f64)> = None;
    for to in 0..k {
        let gain = m.get(to, sigma[to]) - m.get(to, sigma[to] + 1);
        let mut consider = |from: Option<usize>, loss: f64| {
            let delta = gain - loss;
            if delta > 1e-9 * (1.0 + gain.abs()) && best.as_ref().is_none_or(|b| delta > b.2) {
                best = Some((from, to, delta));
            }
        };
        if idle > 0 {
            consider(None, 0.0);
        }
        for from in 0..k {
            if from != to && sigma[from] > 0 {
                consider(
                    Some(from),
                    m.get(from, sigma[from] - 1) - m.get(from, sigma[from]),
                );
            }
        }
    }
    best.map(|(f, t, _)| (f, t))
}

fn polish(m: &PenaltyMatrix, mut sigma: Vec<usize>, p: usize) -> Vec<usize> {
    while let Some((from, to)) = improving_move(m, &sigma, p) {
        if let Some(f) = from {
            sigma[f] -= 1;
        }
        sigma[to] += 1;
    }
    sigma
}

/// True if no single worker move (between chutes or from the idle pool)
/// lowers the total penalty.
pub fn is_locally_optimal(m: &PenaltyMatrix, sigma: &[usize], p: usize) -> bool {
    improving_move(m, sigma, p).is_none()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaffingMode {
    /// Σσ = p.
    Exactly,
    /// Σσ ≤ p.
    AtMost,
}

pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Exhaustive minimizer, refusing instances with more than
/// [`BRUTE_FORCE_LIMIT`] candidate assignments.
pub fn brute_force_staffing(
    m: &PenaltyMatrix,
    p: usize,
    mode: StaffingMode,
) -> Result<StaffingPlan, String> {
    let k = m.chutes();
    // C(p + k - 1, k - 1) compositions, or C(p + k, k) with a slack bin.
    let bins = if mode == StaffingMode::AtMost {
        k + 1
    } else {
        k
    };
    let count = binomial(
        (p + bins).saturating_sub(1) as u128,
        bins.saturating_sub(1) as u128,
    );
    if count > BRUTE_FORCE_LIMIT {
        return Err(format!("{count} assignments exceed the enumeration limit"));
    }
    if k == 0 {
        return Ok(StaffingPlan::from_sigma(m, Vec::new(), p));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut sigma = vec![0usize; k];
    fn rec(
        m: &PenaltyMatrix,
        c: usize,
        left: usize,
        exact: bool,
        sigma: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if c + 1 == sigma.len() {
            let options: Vec<usize> = if exact {
                vec![left]
            } else {
                (0..=left).collect()
            };
            for w in options {
                sigma[c] = w;
                let total = m.total(sigma);
                if best.as_ref().is_none_or(|(b, _)| total < *b) {
                    *best = Some((total, sigma.clone()));
                }
            }
            sigma[c] = 0;
            return;
        }
        for w in 0..=left {
            sigma[c] = w;
            rec(m, c + 1, left - w, exact, sigma, best);
        }
        sigma[c] = 0;
    }
    rec(
        m,
        0,
        p,
        mode == StaffingMode::Exactly,
        &mut sigma,
        &mut best,
    );
    let (_, sigma) = best.expect("at least one assignment");
    Ok(StaffingPlan::from_sigma(m, sigma, p))
}

fn binomial(n: u128, r: u128) -> u128 {
    let r = r.min(n.saturating_sub(r));
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Staffing export: `chute,workers` rows and a trailing idle count.
pub fn staffing_csv(plan: &StaffingPlan, chute_ids: &[usize]) -> String {
    let mut s = String::from("chute,workers\n");
    for (&j, &w) in chute_ids.iter().zip(&plan.sigma) {
        let _ = writeln!(s, "{j},{w}");
    }
    let _ = writeln!(s, "idle,{}", plan.idle);
    s
}
