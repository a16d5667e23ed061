//! Dense bounded-variable primal simplex.
//!
//! Solves `max c'x  s.t.  A x {<=,=,>=} b,  l <= x <= u` with a two-phase
//! tableau method. Nonbasic variables rest at one of their bounds; entering
//! variables may flip bounds without a basis change. Dantzig pricing with a
//! switch to Bland's rule after a pivot threshold guarantees termination.

use crate::error::{Error, Result};
use crate::matrix::Mat;

/// Row sense of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ConstraintSense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

/// A dense linear program, maximization form.
#[derive(Debug, Clone)]
pub struct LpProblem {
    /// Objective coefficients (maximize).
    pub objective: Vec<f64>,
    /// Constraint matrix, one row per constraint.
    pub constraints: Mat,
    pub senses: Vec<ConstraintSense>,
    pub rhs: Vec<f64>,
    /// Variable bounds; `-inf`/`+inf` allowed.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: f64,
    pub primal: Vec<f64>,
}

/// Feasibility tolerance used for validation and the phase-1 exit test.
pub const FEAS_TOL: f64 = 1e-7;
/// Entries smaller than this are never used as pivots.
pub const PIVOT_TOL: f64 = 1e-9;

impl LpProblem {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        let m = self.n_rows();
        if self.constraints.rows() != m || self.senses.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{} constraint rows, {} senses, {} rhs entries",
                self.constraints.rows(),
                self.senses.len(),
                m
            )));
        }
        if self.constraints.cols() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} columns for {} variables ({} lower, {} upper bounds)",
                self.constraints.cols(),
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        for j in 0..n {
            if self.lower[j] > self.upper[j] {
                return Err(Error::InvalidInput(format!(
                    "variable {} has lower bound {} above upper bound {}",
                    j, self.lower[j], self.upper[j]
                )));
            }
            if self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(Error::InvalidInput(format!("variable {j} has NaN bound")));
            }
        }
        Ok(())
    }

    /// Maximum constraint violation of a point, over rows and variable bounds.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.n_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        for i in 0..self.n_rows() {
            let ax: f64 = (0..self.n_vars())
                .map(|j| self.constraints.get(i, j) * x[j])
                .sum();
            let slack = ax - self.rhs[i];
            let v = match self.senses[i] {
                ConstraintSense::Le => slack,
                ConstraintSense::Ge => -slack,
                ConstraintSense::Eq => slack.abs(),
            };
            worst = worst.max(v);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Free variable resting at zero.
    FreeZero,
}

struct Tableau {
    m: usize,
    /// Total columns including slacks and artificials.
    n_all: usize,
    /// First artificial column.
    art0: usize,
    /// m x n_all row-major `B^-1 A`.
    body: Vec<f64>,
    /// `B^-1 b`.
    beta: Vec<f64>,
    /// Reduced costs for the current phase objective.
    rc: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<VarState>,
    xval: Vec<f64>,
    basic: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.body[i * self.n_all + j]
    }

    /// Recompute basic values from `beta` and the nonbasic rest points.
    fn refresh_basics(&mut self) {
        for i in 0..self.m {
            let mut v = self.beta[i];
            let row = &self.body[i * self.n_all..(i + 1) * self.n_all];
            for j in 0..self.n_all {
                if !matches!(self.state[j], VarState::Basic(_)) && self.xval[j] != 0.0 {
                    v -= row[j] * self.xval[j];
                }
            }
            self.xval[self.basic[i]] = v;
        }
    }

    /// Recompute the reduced-cost row for the current phase objective.
    fn refresh_rc(&mut self) {
        let mut cb = vec![0.0; self.m];
        for i in 0..self.m {
            cb[i] = self.cost[self.basic[i]];
        }
        for j in 0..self.n_all {
            let mut v = self.cost[j];
            for i in 0..self.m {
                if cb[i] != 0.0 {
                    v -= cb[i] * self.at(i, j);
                }
            }
            self.rc[j] = v;
        }
    }

    fn entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n_all {
            if self.lower[j] >= self.upper[j] {
                continue; // fixed variable (includes frozen artificials)
            }
            let dir = match self.state[j] {
                VarState::Basic(_) => continue,
                VarState::AtLower => {
                    if self.rc[j] > PIVOT_TOL {
                        1.0
                    } else {
                        continue;
                    }
                }
                VarState::AtUpper => {
                    if self.rc[j] < -PIVOT_TOL {
                        -1.0
                    } else {
                        continue;
                    }
                }
                VarState::FreeZero => {
                    if self.rc[j] > PIVOT_TOL {
                        1.0
                    } else if self.rc[j] < -PIVOT_TOL {
                        -1.0
                    } else {
                        continue;
                    }
                }
            };
            if bland {
                // Bland's rule: first eligible index.
                return Some((j, dir));
            }
            let score = self.rc[j].abs();
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    /// One simplex step. Returns false when the phase objective is optimal.
    fn step(&mut self, bland: bool) -> Result<bool> {
        let Some((q, dir)) = self.entering(bland) else {
            return Ok(false);
        };

        // Ratio test: how far q can move in direction `dir`.
        let mut t_best = f64::INFINITY;
        // Blocking basic row and the bound it hits (false = lower, true = upper).
        let mut block: Option<(usize, bool)> = None;
        for i in 0..self.m {
            let a = self.at(i, q);
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basic[i];
            let xb = self.xval[b];
            // xb moves by -dir * t * a.
            let (limit, hits_upper) = if dir * a > 0.0 {
                (self.lower[b], false)
            } else {
                (self.upper[b], true)
            };
            if limit.is_infinite() {
                continue;
            }
            let t = (xb - limit) / (dir * a);
            let t = t.max(0.0);
            if t < t_best - 1e-12 {
                t_best = t;
                block = Some((i, hits_upper));
            } else if t <= t_best + 1e-12 {
                // Tie break: larger pivot magnitude for stability, or the
                // smallest basic index under Bland's rule.
                if let Some((bi, _)) = block {
                    let better = if bland {
                        self.basic[i] < self.basic[bi]
                    } else {
                        a.abs() > self.at(bi, q).abs()
                    };
                    if better {
                        t_best = t_best.min(t);
                        block = Some((i, hits_upper));
                    }
                } else {
                    t_best = t;
                    block = Some((i, hits_upper));
                }
            }
        }

        // The entering variable's own opposite bound may bind first.
        let span = self.upper[q] - self.lower[q];
        let flip_limit = if span.is_finite() { span } else { f64::INFINITY };
        if flip_limit < t_best - 1e-12 {
            // Bound flip: no basis change.
            let delta = dir * flip_limit;
            for i in 0..self.m {
                let a = self.at(i, q);
                if a != 0.0 {
                    let b = self.basic[i];
                    self.xval[b] -= a * delta;
                }
            }
            self.xval[q] += delta;
            self.state[q] = if dir > 0.0 {
                VarState::AtUpper
            } else {
                VarState::AtLower
            };
            self.pivots += 1;
            return Ok(true);
        }

        let Some((r, hits_upper)) = block else {
            if t_best.is_infinite() {
                return Err(Error::InvalidInput("unbounded ray".into()));
            }
            unreachable!();
        };

        // Move values.
        let delta = dir * t_best;
        for i in 0..self.m {
            let a = self.at(i, q);
            if a != 0.0 {
                let b = self.basic[i];
                self.xval[b] -= a * delta;
            }
        }
        self.xval[q] += delta;
        let leaving = self.basic[r];
        self.xval[leaving] = if hits_upper {
            self.upper[leaving]
        } else {
            self.lower[leaving]
        };
        self.state[leaving] = if hits_upper {
            VarState::AtUpper
        } else {
            VarState::AtLower
        };

        // Row-reduce so column q becomes the r-th unit vector.
        let piv = self.at(r, q);
        let inv = 1.0 / piv;
        {
            let row = &mut self.body[r * self.n_all..(r + 1) * self.n_all];
            for v in row.iter_mut() {
                *v *= inv;
            }
            self.beta[r] *= inv;
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.at(i, q);
            if f == 0.0 {
                continue;
            }
            let (head, tail) = self.body.split_at_mut(r.max(i) * self.n_all);
            let (src, dst) = if r < i {
                (
                    &head[r * self.n_all..(r + 1) * self.n_all],
                    &mut tail[..self.n_all],
                )
            } else {
                (
                    &tail[..self.n_all],
                    &mut head[i * self.n_all..(i + 1) * self.n_all],
                )
            };
            for (d, s) in dst.iter_mut().zip(src) {
                *d -= f * s;
            }
            self.beta[i] -= f * self.beta[r];
        }
        let f = self.rc[q];
        if f != 0.0 {
            let row = &self.body[r * self.n_all..(r + 1) * self.n_all];
            for (rc, s) in self.rc.iter_mut().zip(row) {
                *rc -= f * s;
            }
        }

        self.state[q] = VarState::Basic(r);
        self.basic[r] = q;
        self.pivots += 1;
        if self.pivots % 128 == 0 {
            self.refresh_basics();
        }
        Ok(true)
    }

    fn run_phase(&mut self, bland_threshold: usize, max_pivots: usize) -> Result<()> {
        let start = self.pivots;
        loop {
            let bland = self.pivots - start > bland_threshold;
            if !self.step(bland)? {
                return Ok(());
            }
            if self.pivots - start > max_pivots {
                return Err(Error::IterationLimit(self.pivots));
            }
        }
    }
}

/// Solve a bounded-variable LP. Deterministic: identical inputs give
/// bit-identical outputs.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    problem.validate()?;
    let n = problem.n_vars();
    let m = problem.n_rows();

    // Equality standard form: append one slack per inequality row.
    let n_slack = problem
        .senses
        .iter()
        .filter(|s| **s != ConstraintSense::Eq)
        .count();
    let n_struct = n + n_slack;
    let n_all = n_struct + m; // artificials at the end
    let art0 = n_struct;

    let mut lower = Vec::with_capacity(n_all);
    let mut upper = Vec::with_capacity(n_all);
    lower.extend_from_slice(&problem.lower);
    upper.extend_from_slice(&problem.upper);

    let mut body = vec![0.0; m * n_all];
    for i in 0..m {
        for j in 0..n {
            body[i * n_all + j] = problem.constraints.get(i, j);
        }
    }
    let mut sj = n;
    for (i, sense) in problem.senses.iter().enumerate() {
        match sense {
            ConstraintSense::Le => {
                body[i * n_all + sj] = 1.0;
                lower.push(0.0);
                upper.push(f64::INFINITY);
                sj += 1;
            }
            ConstraintSense::Ge => {
                body[i * n_all + sj] = -1.0;
                lower.push(0.0);
                upper.push(f64::INFINITY);
                sj += 1;
            }
            ConstraintSense::Eq => {}
        }
    }
    for _ in 0..m {
        lower.push(0.0);
        upper.push(f64::INFINITY);
    }

    // Rest structurals and slacks at the finite bound closest to zero.
    let mut xval = vec![0.0; n_all];
    let mut state = vec![VarState::FreeZero; n_all];
    for j in 0..n_struct {
        let (lo, up) = (lower[j], upper[j]);
        if lo.is_finite() && lo >= 0.0 {
            xval[j] = lo;
            state[j] = VarState::AtLower;
        } else if up.is_finite() && up <= 0.0 {
            xval[j] = up;
            state[j] = VarState::AtUpper;
        } else if lo.is_finite() && up.is_finite() {
            // 0 is interior; park at lower.
            xval[j] = lo;
            state[j] = VarState::AtLower;
        } else {
            xval[j] = 0.0;
            state[j] = VarState::FreeZero;
        }
    }

    // Artificial basis absorbing the residual of each row.
    let mut beta = vec![0.0; m];
    let mut basic = vec![0; m];
    for i in 0..m {
        let mut resid = problem.rhs[i];
        for j in 0..n_struct {
            resid -= body[i * n_all + j] * xval[j];
        }
        let sign = if resid < 0.0 { -1.0 } else { 1.0 };
        if sign < 0.0 {
            for j in 0..n_all {
                body[i * n_all + j] = -body[i * n_all + j];
            }
        }
        beta[i] = sign * problem.rhs[i];
        let aj = art0 + i;
        body[i * n_all + aj] = 1.0;
        basic[i] = aj;
        state[aj] = VarState::Basic(i);
        xval[aj] = resid.abs();
    }

    let mut t = Tableau {
        m,
        n_all,
        art0,
        body,
        beta,
        rc: vec![0.0; n_all],
        cost: vec![0.0; n_all],
        lower,
        upper,
        state,
        xval,
        basic,
        pivots: 0,
    };

    let bland_threshold = 3 * (m + n_all) + 200;
    let max_pivots = 200 * (m + n_all) + 20_000;

    // Phase 1: drive artificials to zero.
    for j in t.art0..t.n_all {
        t.cost[j] = -1.0;
    }
    t.refresh_rc();
    t.run_phase(bland_threshold, max_pivots)?;
    t.refresh_basics();
    let infeas: f64 = (t.art0..t.n_all).map(|j| t.xval[j]).sum();
    let scale = problem.rhs.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
    if infeas > FEAS_TOL * scale {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            objective_value: f64::NEG_INFINITY,
            primal: vec![],
        });
    }

    // Pivot residual artificials out of the basis where possible; freeze all.
    for i in 0..m {
        let b = t.basic[i];
        if b < t.art0 {
            continue;
        }
        let mut target = None;
        for j in 0..t.art0 {
            if !matches!(t.state[j], VarState::Basic(_)) && t.at(i, j).abs() > FEAS_TOL {
                target = Some(j);
                break;
            }
        }
        if let Some(q) = target {
            // Degenerate pivot: the artificial sits at zero.
            let piv = t.at(i, q);
            let inv = 1.0 / piv;
            for j in 0..t.n_all {
                t.body[i * t.n_all + j] *= inv;
            }
            t.beta[i] *= inv;
            for r in 0..m {
                if r == i {
                    continue;
                }
                let f = t.at(r, q);
                if f == 0.0 {
                    continue;
                }
                for j in 0..t.n_all {
                    let v = t.at(i, j);
                    t.body[r * t.n_all + j] -= f * v;
                }
                t.beta[r] -= f * t.beta[i];
            }
            t.state[b] = VarState::AtLower;
            t.xval[b] = 0.0;
            t.state[q] = VarState::Basic(i);
            t.basic[i] = q;
        }
    }
    for j in t.art0..t.n_all {
        t.upper[j] = 0.0; // fixed at zero from here on
        t.cost[j] = 0.0;
    }
    t.refresh_basics();

    // Phase 2: original objective.
    for j in 0..n {
        t.cost[j] = problem.objective[j];
    }
    for j in n..t.art0 {
        t.cost[j] = 0.0;
    }
    t.refresh_rc();
    match t.run_phase(bland_threshold, max_pivots) {
        Ok(()) => {}
        Err(Error::InvalidInput(msg)) if msg == "unbounded ray" => {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                objective_value: f64::INFINITY,
                primal: vec![],
            });
        }
        Err(e) => return Err(e),
    }
    t.refresh_basics();

    let primal: Vec<f64> = t.xval[..n].to_vec();
    let objective_value = problem
        .objective
        .iter()
        .zip(&primal)
        .map(|(c, x)| c * x)
        .sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value,
        primal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple(
        objective: Vec<f64>,
        rows: Vec<Vec<f64>>,
        senses: Vec<ConstraintSense>,
        rhs: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> LpProblem {
        LpProblem {
            objective,
            constraints: Mat::from_rows(&rows).unwrap(),
            senses,
            rhs,
            lower,
            upper,
        }
    }

    #[test]
    fn single_bound_constraint() {
        // max x s.t. x <= 3, 0 <= x <= 10
        let p = simple(
            vec![1.0],
            vec![vec![1.0]],
            vec![ConstraintSense::Le],
            vec![3.0],
            vec![0.0],
            vec![10.0],
        );
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 3.0).abs() < 1e-9);
        assert!((s.primal[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_constraints_are_infeasible() {
        // max x+y s.t. x+y <= 1, x-y >= 2, x,y >= 0
        let p = simple(
            vec![1.0, 1.0],
            vec![vec![1.0, 1.0], vec![1.0, -1.0]],
            vec![ConstraintSense::Le, ConstraintSense::Ge],
            vec![1.0, 2.0],
            vec![0.0, 0.0],
            vec![f64::INFINITY, f64::INFINITY],
        );
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let p = simple(
            vec![1.0],
            vec![vec![-1.0]],
            vec![ConstraintSense::Le],
            vec![0.0],
            vec![0.0],
            vec![f64::INFINITY],
        );
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_rows_and_negative_bounds() {
        // max x + 2y s.t. x + y = 1, -1 <= x <= 1, -1 <= y <= 1 -> x=0? no: y=1, x=0.
        let p = simple(
            vec![1.0, 2.0],
            vec![vec![1.0, 1.0]],
            vec![ConstraintSense::Eq],
            vec![1.0],
            vec![-1.0, -1.0],
            vec![1.0, 1.0],
        );
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 2.0).abs() < 1e-9, "{}", s.objective_value);
        assert!((s.primal[0] - 0.0).abs() < 1e-9);
        assert!((s.primal[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = simple(
            vec![1.0, 1.0],
            vec![vec![1.0]],
            vec![ConstraintSense::Le],
            vec![1.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        );
        assert!(solve_lp(&p).is_err());
    }

    /// Brute-force LP oracle: enumerate all basic points (intersections of n
    /// constraint/bound hyperplanes), keep the feasible ones, take the best.
    /// Only valid when every variable has finite bounds (compact region).
    /// Independent of the simplex implementation.
    mod vertex_oracle {
        use super::super::*;

        fn solve_square(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
            let n = b.len();
            let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
            let mut rhs = b.to_vec();
            for col in 0..n {
                let (piv, _) = (col..n)
                    .map(|r| (r, m[r][col].abs()))
                    .max_by(|x, y| x.1.total_cmp(&y.1))?;
                if m[piv][col].abs() < 1e-9 {
                    return None;
                }
                m.swap(col, piv);
                rhs.swap(col, piv);
                for r in 0..n {
                    if r == col {
                        continue;
                    }
                    let f = m[r][col] / m[col][col];
                    if f == 0.0 {
                        continue;
                    }
                    for c in col..n {
                        m[r][c] -= f * m[col][c];
                    }
                    rhs[r] -= f * rhs[col];
                }
            }
            Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
        }

        pub fn best_vertex(p: &LpProblem) -> Option<(f64, Vec<f64>)> {
            let n = p.n_vars();
            let m = p.n_rows();
            // Candidate hyperplanes: constraint rows as equalities, then each
            // variable's lower and upper bound.
            let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
            for i in 0..m {
                planes.push(((0..n).map(|j| p.constraints.get(i, j)).collect(), p.rhs[i]));
            }
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                planes.push((e.clone(), p.lower[j]));
                planes.push((e, p.upper[j]));
            }
            let mut best: Option<(f64, Vec<f64>)> = None;
            let mut idx: Vec<usize> = (0..n).collect();
            loop {
                let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
                let b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
                if let Some(x) = solve_square(&a, &b) {
                    if p.violation(&x) <= 1e-8 {
                        let obj: f64 = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                        if best.as_ref().map_or(true, |(bv, _)| obj > *bv) {
                            best = Some((obj, x));
                        }
                    }
                }
                // Next n-combination of planes.
                let total = planes.len();
                let mut k = n;
                loop {
                    if k == 0 {
                        return best;
                    }
                    k -= 1;
                    if idx[k] + 1 <= total - (n - k) {
                        idx[k] += 1;
                        for l in k + 1..n {
                            idx[l] = idx[l - 1] + 1;
                        }
                        break;
                    }
                }
            }
        }
    }

    fn random_lp(seed: u64, n: usize, m: usize, force_infeasible: bool) -> LpProblem {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let lower = vec![0.0; n];
        let upper: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
        let x0: Vec<f64> = upper.iter().map(|u| rng.gen_range(0.0..*u)).collect();
        let mut rows = Vec::with_capacity(m);
        let mut senses = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        for i in 0..m {
            let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ax: f64 = row.iter().zip(&x0).map(|(a, x)| a * x).sum();
            match i % 3 {
                0 => {
                    senses.push(ConstraintSense::Le);
                    rhs.push(ax + rng.gen_range(0.0..1.0));
                }
                1 => {
                    senses.push(ConstraintSense::Ge);
                    rhs.push(ax - rng.gen_range(0.0..1.0));
                }
                _ => {
                    senses.push(ConstraintSense::Eq);
                    rhs.push(ax);
                }
            }
            rows.push(row);
        }
        if force_infeasible {
            // x_0 >= upper + 1 contradicts the variable bound.
            let mut row = vec![0.0; n];
            row[0] = 1.0;
            rhs.push(upper[0] + 1.0);
            senses.push(ConstraintSense::Ge);
            rows.push(row);
        }
        LpProblem {
            objective: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            constraints: Mat::from_rows(&rows).unwrap(),
            senses,
            rhs,
            lower,
            upper,
        }
    }

    #[test]
    fn random_instances_match_vertex_enumeration() {
        for seed in 0..30u64 {
            let n = 3 + (seed as usize % 4); // 3..=6 variables
            let m = 2 + (seed as usize % 7);
            let p = random_lp(1000 + seed, n, m, false);
            let s = solve_lp(&p).unwrap();
            assert_eq!(s.status, LpStatus::Optimal, "seed {seed}");
            let (oracle_obj, _) = vertex_oracle::best_vertex(&p).expect("feasible by construction");
            assert!(
                (s.objective_value - oracle_obj).abs() <= 1e-8 * oracle_obj.abs().max(1.0),
                "seed {seed}: simplex {} vs oracle {}",
                s.objective_value,
                oracle_obj
            );
        }
    }

    #[test]
    fn infeasible_instances_agree_with_oracle() {
        for seed in 0..10u64 {
            let p = random_lp(7000 + seed, 4, 4, true);
            let s = solve_lp(&p).unwrap();
            assert_eq!(s.status, LpStatus::Infeasible, "seed {seed}");
            assert!(vertex_oracle::best_vertex(&p).is_none(), "seed {seed}");
        }
    }

    #[test]
    fn twenty_var_lps_stay_feasible_within_tolerance() {
        for seed in 0..10u64 {
            let p = random_lp(400 + seed, 20, 15, false);
            let s = solve_lp(&p).unwrap();
            assert_eq!(s.status, LpStatus::Optimal, "seed {seed}");
            // Weak-duality style re-substitution: no constraint violated
            // beyond tolerance, objective equals c'x exactly.
            assert!(p.violation(&s.primal) <= 1e-7, "seed {seed}: {}", p.violation(&s.primal));
            let direct: f64 = p.objective.iter().zip(&s.primal).map(|(c, x)| c * x).sum();
            assert_eq!(direct.to_bits(), s.objective_value.to_bits());
        }
    }

    #[test]
    fn deterministic_bit_for_bit() {
        let p = simple(
            vec![1.0, 0.3, -0.2, 2.1],
            vec![
                vec![1.0, 2.0, -1.0, 0.5],
                vec![0.3, -1.0, 2.0, 1.0],
                vec![1.0, 1.0, 1.0, 1.0],
            ],
            vec![ConstraintSense::Le, ConstraintSense::Ge, ConstraintSense::Eq],
            vec![4.0, -1.0, 2.0],
            vec![0.0; 4],
            vec![3.0; 4],
        );
        let a = solve_lp(&p).unwrap();
        let b = solve_lp(&p).unwrap();
        assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.primal), bits(&b.primal));
    }
}
