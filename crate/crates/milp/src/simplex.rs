//! Bounded-variable revised primal simplex with an explicit dense basis inverse.
//!
//! Every row `i` gets a logical column `s_i = a_i·x` carrying the row bounds, so
//! the equality system is `A x - s (+ artificials) = 0` and all bound handling
//! lives in the variables. Rows whose initial activity falls outside their range
//! get an artificial column that phase one drives to zero.

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const DEGENERATE_SWITCH: usize = 50;

/// Sparse LP in maximization form: `max cost·x` s.t. `row_lo <= A x <= row_hi`,
/// `col_lo <= x <= col_hi`. Columns are stored sparse, column-major.
#[derive(Debug, Clone)]
pub(crate) struct LpProblem {
    pub cols: Vec<Vec<(usize, f64)>>,
    pub nrows: usize,
    pub row_lo: Vec<f64>,
    pub row_hi: Vec<f64>,
    pub col_lo: Vec<f64>,
    pub col_hi: Vec<f64>,
    pub cost: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    #[allow(dead_code)]
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Logical(usize),
    Artificial(usize, i8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NonBasic {
    Lower,
    Upper,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic(usize),
    At(NonBasic),
}

struct Tableau<'a> {
    p: &'a LpProblem,
    m: usize,
    n: usize,
    kinds: Vec<ColKind>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    cost: Vec<f64>,
    y: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
    degenerate_run: usize,
}

pub(crate) fn solve_lp(p: &LpProblem) -> LpResult {
    let n = p.cols.len();
    let m = p.nrows;
    if m == 0 {
        return solve_box(p);
    }
    let mut t = Tableau::new(p);
    let has_artificials = t.kinds.len() > n + m;
    if has_artificials {
        t.cost = t
            .kinds
            .iter()
            .map(|k| match k {
                ColKind::Artificial(..) => -1.0,
                _ => 0.0,
            })
            .collect();
        let status = t.run();
        if status == LpStatus::IterationLimit {
            return t.result(LpStatus::IterationLimit);
        }
        let infeasibility: f64 = t
            .kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| matches!(k, ColKind::Artificial(..)))
            .map(|(j, _)| t.x[j].abs())
            .sum();
        if infeasibility > 1e-7 * (1.0 + m as f64).sqrt() {
            return t.result(LpStatus::Infeasible);
        }
        for j in n + m..t.kinds.len() {
            t.lo[j] = 0.0;
            t.hi[j] = 0.0;
            if let State::At(_) = t.state[j] {
                t.x[j] = 0.0;
                t.state[j] = State::At(NonBasic::Lower);
            }
        }
    }
    t.cost = (0..t.kinds.len())
        .map(|j| if j < n { p.cost[j] } else { 0.0 })
        .collect();
    t.refactor();
    let status = t.run();
    t.result(status)
}

/// No rows: every column goes to its best bound.
fn solve_box(p: &LpProblem) -> LpResult {
    let mut x = Vec::with_capacity(p.cols.len());
    for j in 0..p.cols.len() {
        let c = p.cost[j];
        let v = if c > 0.0 {
            p.col_hi[j]
        } else if c < 0.0 {
            p.col_lo[j]
        } else if p.col_lo[j].is_finite() {
            p.col_lo[j]
        } else if p.col_hi[j].is_finite() {
            p.col_hi[j]
        } else {
            0.0
        };
        if !v.is_finite() {
            return LpResult {
                status: LpStatus::Unbounded,
                x: vec![0.0; p.cols.len()],
                objective: f64::INFINITY,
            };
        }
        x.push(v);
    }
    let objective = x.iter().zip(&p.cost).map(|(a, b)| a * b).sum();
    LpResult {
        status: LpStatus::Optimal,
        x,
        objective,
    }
}

impl<'a> Tableau<'a> {
    fn new(p: &'a LpProblem) -> Self {
        let n = p.cols.len();
        let m = p.nrows;
        let mut kinds: Vec<ColKind> = vec![ColKind::Structural; n];
        kinds.extend((0..m).map(ColKind::Logical));
        let mut lo: Vec<f64> = p.col_lo.clone();
        let mut hi: Vec<f64> = p.col_hi.clone();
        lo.extend_from_slice(&p.row_lo);
        hi.extend_from_slice(&p.row_hi);

        let mut x = vec![0.0; n + m];
        let mut state = vec![State::At(NonBasic::Free); n + m];
        for j in 0..n {
            let (v, s) = initial_position(lo[j], hi[j]);
            x[j] = v;
            state[j] = State::At(s);
        }
        let mut activity = vec![0.0; m];
        for (j, col) in p.cols.iter().enumerate() {
            if x[j] != 0.0 {
                for &(i, a) in col {
                    activity[i] += a * x[j];
                }
            }
        }
        let mut basis = vec![0usize; m];
        let mut diag = vec![0.0; m];
        for i in 0..m {
            let s = n + i;
            let act = activity[i];
            if act >= lo[s] - PRIMAL_TOL && act <= hi[s] + PRIMAL_TOL {
                basis[i] = s;
                state[s] = State::Basic(i);
                x[s] = act;
                diag[i] = -1.0;
            } else {
                let v = if act < lo[s] { lo[s] } else { hi[s] };
                x[s] = v;
                state[s] = State::At(if act < lo[s] {
                    NonBasic::Lower
                } else {
                    NonBasic::Upper
                });
                let sign: i8 = if v - act >= 0.0 { 1 } else { -1 };
                let r = kinds.len();
                kinds.push(ColKind::Artificial(i, sign));
                lo.push(0.0);
                hi.push(f64::INFINITY);
                x.push((v - act).abs());
                state.push(State::Basic(i));
                basis[i] = r;
                diag[i] = sign as f64;
            }
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0 / diag[i];
        }
        let total = kinds.len();
        Self {
            p,
            m,
            n,
            kinds,
            lo,
            hi,
            x,
            state,
            basis,
            binv,
            cost: vec![0.0; total],
            y: vec![0.0; m],
            iterations: 0,
            max_iterations: 200 * (n + m) + 10_000,
            degenerate_run: 0,
        }
    }

    fn column(&self, j: usize) -> ColumnRef<'_> {
        match self.kinds[j] {
            ColKind::Structural => ColumnRef::Sparse(&self.p.cols[j]),
            ColKind::Logical(i) => ColumnRef::Unit(i, -1.0),
            ColKind::Artificial(i, s) => ColumnRef::Unit(i, s as f64),
        }
    }

    fn compute_duals(&mut self) {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let c = self.cost[self.basis[i]];
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, b) in y.iter_mut().zip(row) {
                    *yk += c * b;
                }
            }
        }
        self.y = y;
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let c = self.cost[j];
        match self.column(j) {
            ColumnRef::Sparse(col) => c - col.iter().map(|&(i, a)| self.y[i] * a).sum::<f64>(),
            ColumnRef::Unit(i, a) => c - self.y[i] * a,
        }
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        match self.column(j) {
            ColumnRef::Sparse(col) => {
                for &(k, a) in col {
                    for i in 0..m {
                        alpha[i] += self.binv[i * m + k] * a;
                    }
                }
            }
            ColumnRef::Unit(k, a) => {
                for i in 0..m {
                    alpha[i] = self.binv[i * m + k] * a;
                }
            }
        }
        alpha
    }

    fn choose_entering(&self) -> Option<(usize, f64)> {
        let bland = self.degenerate_run >= DEGENERATE_SWITCH;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.kinds.len() {
            let s = match self.state[j] {
                State::Basic(_) => continue,
                State::At(s) => s,
            };
            if self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.reduced_cost(j);
            let eligible = match s {
                NonBasic::Lower => d > DUAL_TOL,
                NonBasic::Upper => d < -DUAL_TOL,
                NonBasic::Free => d.abs() > DUAL_TOL,
            };
            if !eligible {
                continue;
            }
            if bland {
                return Some((j, d));
            }
            match best {
                Some((_, bd)) if bd.abs() >= d.abs() => {}
                _ => best = Some((j, d)),
            }
        }
        best
    }

    fn run(&mut self) -> LpStatus {
        self.compute_duals();
        let mut since_refactor = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return LpStatus::IterationLimit;
            }
            if since_refactor >= REFACTOR_EVERY {
                self.refactor();
                since_refactor = 0;
            }
            let Some((q, d)) = self.choose_entering() else {
                return LpStatus::Optimal;
            };
            let dir = if d > 0.0 { 1.0 } else { -1.0 };
            let alpha = self.ftran(q);

            // Harris two-pass ratio test over the basic variables.
            let mut relaxed = f64::INFINITY;
            for (i, &a) in alpha.iter().enumerate() {
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let rate = -dir * a;
                let lim = if rate < 0.0 {
                    if self.lo[b].is_finite() {
                        (self.x[b] - self.lo[b] + PRIMAL_TOL) / -rate
                    } else {
                        continue;
                    }
                } else if self.hi[b].is_finite() {
                    (self.hi[b] - self.x[b] + PRIMAL_TOL) / rate
                } else {
                    continue;
                };
                relaxed = relaxed.min(lim);
            }
            let mut leave: Option<usize> = None;
            let mut step = f64::INFINITY;
            if relaxed.is_finite() {
                let mut best_pivot = 0.0;
                for (i, &a) in alpha.iter().enumerate() {
                    if a.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let b = self.basis[i];
                    let rate = -dir * a;
                    let lim = if rate < 0.0 {
                        if !self.lo[b].is_finite() {
                            continue;
                        }
                        (self.x[b] - self.lo[b]) / -rate
                    } else {
                        if !self.hi[b].is_finite() {
                            continue;
                        }
                        (self.hi[b] - self.x[b]) / rate
                    };
                    if lim <= relaxed && a.abs() > best_pivot {
                        best_pivot = a.abs();
                        leave = Some(i);
                        step = lim.max(0.0);
                    }
                }
            }
            let flip = self.hi[q] - self.lo[q];
            let flips = flip.is_finite() && flip <= step;
            if flips {
                step = flip;
                leave = None;
            }
            if !step.is_finite() {
                return LpStatus::Unbounded;
            }
            if step <= PRIMAL_TOL {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
            self.iterations += 1;

            // Apply the step.
            self.x[q] += dir * step;
            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let b = self.basis[i];
                    self.x[b] -= dir * step * a;
                }
            }
            match leave {
                None => {
                    // Bound flip: entering column lands on its opposite bound.
                    if dir > 0.0 {
                        self.x[q] = self.hi[q];
                        self.state[q] = State::At(NonBasic::Upper);
                    } else {
                        self.x[q] = self.lo[q];
                        self.state[q] = State::At(NonBasic::Lower);
                    }
                }
                Some(r) => {
                    let b = self.basis[r];
                    let rate = -dir * alpha[r];
                    if rate < 0.0 {
                        self.x[b] = self.lo[b];
                        self.state[b] = State::At(NonBasic::Lower);
                    } else {
                        self.x[b] = self.hi[b];
                        self.state[b] = State::At(NonBasic::Upper);
                    }
                    self.basis[r] = q;
                    self.state[q] = State::Basic(r);
                    self.pivot(r, &alpha);
                    // y' = y + d_q * (row r of the new inverse)
                    let m = self.m;
                    let row = &self.binv[r * m..(r + 1) * m];
                    for (yk, b) in self.y.iter_mut().zip(row) {
                        *yk += d * b;
                    }
                    since_refactor += 1;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        {
            let row = &mut self.binv[r * m..(r + 1) * m];
            for v in row.iter_mut() {
                *v /= piv;
            }
        }
        let (head, tail) = self.binv.split_at_mut(r * m);
        let (pivot_row, rest) = tail.split_at_mut(m);
        for (i, &a) in alpha.iter().enumerate() {
            if i == r || a == 0.0 {
                continue;
            }
            let target = if i < r {
                &mut head[i * m..(i + 1) * m]
            } else {
                let off = (i - r - 1) * m;
                &mut rest[off..off + m]
            };
            for (t, p) in target.iter_mut().zip(pivot_row.iter()) {
                *t -= a * p;
            }
        }
    }

    /// Rebuilds the inverse from the basis columns and recomputes basic values.
    fn refactor(&mut self) {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (pos, &j) in self.basis.iter().enumerate() {
            match self.column(j) {
                ColumnRef::Sparse(col) => {
                    for &(i, a) in col {
                        b[i * m + pos] = a;
                    }
                }
                ColumnRef::Unit(i, a) => b[i * m + pos] = a,
            }
        }
        if let Some(inv) = invert(b, m) {
            self.binv = inv;
        }
        // x_B = -B^{-1} (N x_N)
        let mut rhs = vec![0.0; m];
        for j in 0..self.kinds.len() {
            if let State::At(_) = self.state[j] {
                let v = self.x[j];
                if v == 0.0 {
                    continue;
                }
                match self.column(j) {
                    ColumnRef::Sparse(col) => {
                        for &(i, a) in col {
                            rhs[i] += a * v;
                        }
                    }
                    ColumnRef::Unit(i, a) => rhs[i] += a * v,
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
            self.x[self.basis[i]] = -v;
        }
        self.compute_duals();
    }

    fn result(&self, status: LpStatus) -> LpResult {
        let x: Vec<f64> = self.x[..self.n].to_vec();
        let objective = x.iter().zip(&self.p.cost).map(|(a, b)| a * b).sum();
        LpResult {
            status,
            x,
            objective,
        }
    }
}

enum ColumnRef<'a> {
    Sparse(&'a [(usize, f64)]),
    Unit(usize, f64),
}

fn initial_position(lo: f64, hi: f64) -> (f64, NonBasic) {
    if lo.is_finite() {
        (lo, NonBasic::Lower)
    } else if hi.is_finite() {
        (hi, NonBasic::Upper)
    } else {
        (0.0, NonBasic::Free)
    }
}

/// Gauss-Jordan inversion with partial pivoting. `None` when singular.
fn invert(mut a: Vec<f64>, m: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    for col in 0..m {
        let mut piv = col;
        let mut best = a[col * m + col].abs();
        for r in col + 1..m {
            let v = a[r * m + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best < 1e-12 {
            return None;
        }
        if piv != col {
            for k in 0..m {
                a.swap(col * m + k, piv * m + k);
                inv.swap(col * m + k, piv * m + k);
            }
        }
        let d = a[col * m + col];
        for k in 0..m {
            a[col * m + k] /= d;
            inv[col * m + k] /= d;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = a[r * m + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..m {
                a[r * m + k] -= f * a[col * m + k];
                inv[r * m + k] -= f * inv[col * m + k];
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(
        cols: Vec<Vec<(usize, f64)>>,
        rows: Vec<(f64, f64)>,
        bounds: Vec<(f64, f64)>,
        cost: Vec<f64>,
    ) -> LpProblem {
        LpProblem {
            nrows: rows.len(),
            row_lo: rows.iter().map(|r| r.0).collect(),
            row_hi: rows.iter().map(|r| r.1).collect(),
            col_lo: bounds.iter().map(|b| b.0).collect(),
            col_hi: bounds.iter().map(|b| b.1).collect(),
            cols,
            cost,
        }
    }

    #[test]
    fn textbook_two_variable_lp() {
        // max 3x + 5y; x <= 4; 2y <= 12; 3x + 2y <= 18 -> (2, 6), 36
        let inf = f64::INFINITY;
        let p = lp(
            vec![vec![(0, 1.0), (2, 3.0)], vec![(1, 2.0), (2, 2.0)]],
            vec![(-inf, 4.0), (-inf, 12.0), (-inf, 18.0)],
            vec![(0.0, inf), (0.0, inf)],
            vec![3.0, 5.0],
        );
        let r = solve_lp(&p);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 36.0).abs() < 1e-9);
        assert!((r.x[0] - 2.0).abs() < 1e-9 && (r.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn phase_one_finds_ge_rows() {
        // min x + y (max -x - y) with x + y >= 2, x - y = 0.5
        let inf = f64::INFINITY;
        let p = lp(
            vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, -1.0)]],
            vec![(2.0, inf), (0.5, 0.5)],
            vec![(0.0, 10.0), (0.0, 10.0)],
            vec![-1.0, -1.0],
        );
        let r = solve_lp(&p);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 2.0).abs() < 1e-9);
        assert!((r.x[0] - 1.25).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let inf = f64::INFINITY;
        let p = lp(
            vec![vec![(0, 1.0)]],
            vec![(2.0, inf)],
            vec![(0.0, 1.0)],
            vec![1.0],
        );
        assert_eq!(solve_lp(&p).status, LpStatus::Infeasible);
        let p = lp(
            vec![vec![(0, 1.0)], vec![(0, 1.0)]],
            vec![(-inf, 3.0)],
            vec![(0.0, inf), (-inf, inf)],
            vec![1.0, 0.0],
        );
        assert_eq!(solve_lp(&p).status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_negative_bounds() {
        // max x with x free, -3 <= x - y <= 1, y in [-2, 5] -> x = 6
        let inf = f64::INFINITY;
        let p = lp(
            vec![vec![(0, 1.0)], vec![(0, -1.0)]],
            vec![(-3.0, 1.0)],
            vec![(-inf, inf), (-2.0, 5.0)],
            vec![1.0, 0.0],
        );
        let r = solve_lp(&p);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 6.0).abs() < 1e-9);
    }

    #[test]
    fn inversion_roundtrip() {
        let a = vec![2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        let inv = invert(a.clone(), 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12);
            }
        }
        assert!(invert(vec![1.0, 2.0, 2.0, 4.0], 2).is_none());
    }
}
