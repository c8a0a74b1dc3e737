//! Bound tightening: integer rounding, singleton rows, activity-based
//! propagation and removal of rows that can never bind.

const TOL: f64 = 1e-9;
const MAX_PASSES: usize = 20;

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub terms: Vec<(usize, f64)>,
    pub lo: f64,
    pub hi: f64,
}

/// Maximization form of a model, indices local to the solver.
#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub integer: Vec<bool>,
    pub cost: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Infeasible;

/// Tightens `lo`/`hi` in place and returns which rows are still needed.
pub(crate) fn presolve(
    p: &Problem,
    lo: &mut [f64],
    hi: &mut [f64],
) -> Result<Vec<bool>, Infeasible> {
    let mut active = vec![true; p.rows.len()];
    round_integer_bounds(p, lo, hi)?;
    for _ in 0..MAX_PASSES {
        let mut changed = false;
        for (r, row) in p.rows.iter().enumerate() {
            if !active[r] {
                continue;
            }
            let live: Vec<(usize, f64)> = row
                .terms
                .iter()
                .copied()
                .filter(|&(j, _)| lo[j] != hi[j])
                .collect();
            let fixed: f64 = row
                .terms
                .iter()
                .filter(|&&(j, _)| lo[j] == hi[j])
                .map(|&(j, a)| a * lo[j])
                .sum();
            let rlo = row.lo - fixed;
            let rhi = row.hi - fixed;
            if live.len() <= 1 {
                if let Some(&(j, a)) = live.first() {
                    let (mut nl, mut nh) = (rlo / a, rhi / a);
                    if a < 0.0 {
                        std::mem::swap(&mut nl, &mut nh);
                    }
                    changed |= tighten(p, j, nl, nh, lo, hi)?;
                } else if rlo > tol_for(rlo) || rhi < -tol_for(rhi) {
                    return Err(Infeasible);
                }
                active[r] = false;
                continue;
            }
            let act = Activity::of(&live, lo, hi);
            if act.min > rhi + tol_for(rhi) || act.max < rlo - tol_for(rlo) {
                return Err(Infeasible);
            }
            if act.min >= rlo - TOL && act.max <= rhi + TOL {
                active[r] = false;
                changed = true;
                continue;
            }
            for &(j, a) in &live {
                if !p.integer[j] {
                    continue;
                }
                let (rest_min, rest_max) = act.without(a, lo[j], hi[j]);
                // a x_j <= rhi - rest_min and a x_j >= rlo - rest_max
                let upper_side = rhi - rest_min;
                let lower_side = rlo - rest_max;
                let (nl, nh) = if a > 0.0 {
                    (lower_side / a, upper_side / a)
                } else {
                    (upper_side / a, lower_side / a)
                };
                changed |= tighten(p, j, nl, nh, lo, hi)?;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(active)
}

fn tol_for(v: f64) -> f64 {
    1e-7 * (1.0 + v.abs())
}

fn round_integer_bounds(p: &Problem, lo: &mut [f64], hi: &mut [f64]) -> Result<(), Infeasible> {
    for j in 0..lo.len() {
        if p.integer[j] {
            lo[j] = (lo[j] - 1e-6).ceil();
            hi[j] = (hi[j] + 1e-6).floor();
        }
        if lo[j] > hi[j] + tol_for(hi[j]) {
            return Err(Infeasible);
        }
        if lo[j] > hi[j] {
            hi[j] = lo[j];
        }
    }
    Ok(())
}

fn tighten(
    p: &Problem,
    j: usize,
    mut nl: f64,
    mut nh: f64,
    lo: &mut [f64],
    hi: &mut [f64],
) -> Result<bool, Infeasible> {
    if nl.is_nan() || nh.is_nan() {
        return Ok(false);
    }
    if p.integer[j] {
        nl = (nl - 1e-6).ceil();
        nh = (nh + 1e-6).floor();
    }
    let mut changed = false;
    if nl > lo[j] + 1e-7 {
        lo[j] = nl;
        changed = true;
    }
    if nh < hi[j] - 1e-7 {
        hi[j] = nh;
        changed = true;
    }
    if lo[j] > hi[j] + tol_for(hi[j]) {
        return Err(Infeasible);
    }
    if lo[j] > hi[j] {
        // within tolerance: collapse
        lo[j] = hi[j];
    }
    Ok(changed)
}

/// Row activity range with separate counts of infinite contributions so a
/// single term can be removed exactly.
struct Activity {
    min: f64,
    max: f64,
    min_finite: f64,
    max_finite: f64,
    min_inf: usize,
    max_inf: usize,
}

impl Activity {
    fn of(terms: &[(usize, f64)], lo: &[f64], hi: &[f64]) -> Self {
        let mut a = Activity {
            min: 0.0,
            max: 0.0,
            min_finite: 0.0,
            max_finite: 0.0,
            min_inf: 0,
            max_inf: 0,
        };
        for &(j, c) in terms {
            let (l, h) = if c > 0.0 {
                (c * lo[j], c * hi[j])
            } else {
                (c * hi[j], c * lo[j])
            };
            if l.is_finite() {
                a.min_finite += l;
            } else {
                a.min_inf += 1;
            }
            if h.is_finite() {
                a.max_finite += h;
            } else {
                a.max_inf += 1;
            }
        }
        a.min = if a.min_inf > 0 {
            f64::NEG_INFINITY
        } else {
            a.min_finite
        };
        a.max = if a.max_inf > 0 {
            f64::INFINITY
        } else {
            a.max_finite
        };
        a
    }

    fn without(&self, c: f64, l: f64, h: f64) -> (f64, f64) {
        let (tl, th) = if c > 0.0 {
            (c * l, c * h)
        } else {
            (c * h, c * l)
        };
        let min = if tl.is_finite() {
            if self.min_inf > 0 {
                f64::NEG_INFINITY
            } else {
                self.min_finite - tl
            }
        } else if self.min_inf > 1 {
            f64::NEG_INFINITY
        } else {
            self.min_finite
        };
        let max = if th.is_finite() {
            if self.max_inf > 0 {
                f64::INFINITY
            } else {
                self.max_finite - th
            }
        } else if self.max_inf > 1 {
            f64::INFINITY
        } else {
            self.max_finite
        };
        (min, max)
    }
}
