//! Subgradient Lagrangian dual bound for models too large for the dense
//! simplex. Every row is dualized; the inner problem over the variable box is
//! solved by inspection, so each iteration costs one pass over the nonzeros.

use std::time::Instant;

use crate::presolve::Problem;

/// Returns a valid upper bound on `max cost·x` over the rows in `rows` and the
/// box `lo..hi`. `target` is the incumbent value used for Polyak steps; the
/// loop stops early once the bound is within `stop_gap` of it.
#[allow(clippy::too_many_arguments)]
pub(crate) fn dual_bound(
    p: &Problem,
    rows: &[usize],
    lo: &[f64],
    hi: &[f64],
    target: f64,
    stop_gap: f64,
    max_iters: usize,
    deadline: Option<Instant>,
) -> f64 {
    let mut y = vec![0.0; rows.len()];
    let mut best = f64::INFINITY;
    let mut theta = 2.0;
    let mut stall = 0usize;
    let mut x = vec![0.0; lo.len()];
    for _ in 0..max_iters {
        let mut d = p.cost.clone();
        for (k, &r) in rows.iter().enumerate() {
            if y[k] != 0.0 {
                for &(j, a) in &p.rows[r].terms {
                    d[j] -= y[k] * a;
                }
            }
        }
        let mut value = 0.0;
        let mut unbounded = false;
        for (k, &r) in rows.iter().enumerate() {
            let row = &p.rows[r];
            if y[k] > 0.0 {
                value += y[k] * row.hi;
            } else if y[k] < 0.0 {
                value += y[k] * row.lo;
            }
        }
        for j in 0..lo.len() {
            x[j] = if d[j] > 0.0 {
                hi[j]
            } else if d[j] < 0.0 {
                lo[j]
            } else if lo[j].is_finite() {
                lo[j]
            } else if hi[j].is_finite() {
                hi[j]
            } else {
                0.0
            };
            if !x[j].is_finite() {
                unbounded = true;
                break;
            }
            value += d[j] * x[j];
        }
        if !unbounded && value < best {
            best = value;
            stall = 0;
        } else {
            stall += 1;
            if stall >= 20 {
                theta /= 2.0;
                stall = 0;
            }
        }
        if best - target <= stop_gap || theta < 1e-6 {
            break;
        }
        if let Some(dl) = deadline {
            if Instant::now() >= dl {
                break;
            }
        }
        if unbounded {
            // Keep y at zero-ish; nothing finite to follow.
            break;
        }
        // Subgradient of the dual function with respect to y.
        let mut g = vec![0.0; rows.len()];
        let mut norm = 0.0;
        for (k, &r) in rows.iter().enumerate() {
            let row = &p.rows[r];
            let ax: f64 = row.terms.iter().map(|&(j, a)| a * x[j]).sum();
            let gk = if y[k] > 0.0 {
                row.hi - ax
            } else if y[k] < 0.0 {
                row.lo - ax
            } else if row.hi < ax {
                row.hi - ax
            } else if row.lo > ax {
                row.lo - ax
            } else {
                0.0
            };
            g[k] = gk;
            norm += gk * gk;
        }
        if norm <= 1e-18 {
            break;
        }
        let goal = if target.is_finite() {
            target
        } else {
            value - 0.05 * value.abs() - 1.0
        };
        let step = theta * (value - goal).max(1e-3) / norm;
        for (k, &r) in rows.iter().enumerate() {
            let row = &p.rows[r];
            let mut v = y[k] - step * g[k];
            if !row.hi.is_finite() {
                v = v.min(0.0);
            }
            if !row.lo.is_finite() {
                v = v.max(0.0);
            }
            y[k] = v;
        }
    }
    best
}
