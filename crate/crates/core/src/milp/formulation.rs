//! The per-step disjunctive extended formulation and its LP relaxation.
//!
//! For each step the bilinear relation `u_{n-1} T_n = u_n`, `T_n` drawn from
//! `{T_1..T_K}`, is lifted with copy blocks `v_{n-1,k}` and binaries
//! `x_{n-1,k}`. Relaxing the binaries to `[0,1]` yields the per-step convex
//! hull of the disjunction, so the LP optimum is a valid upper bound.

use crate::chain::{ChainProblem, FamilySpec, IntervalBox, ObjectiveSpec};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, ConstraintSense, LpProblem, LpStatus};
use crate::matrix::{dot, row_times_mat, Mat};

use super::{BbNode, FiniteFamily};

/// Outer box for one reachable set, bounding the copy blocks of a step.
#[derive(Debug, Clone)]
pub enum UBox {
    /// The standard simplex: entries nonnegative, summing to one. Used for
    /// probability-vector chains.
    Simplex,
    /// Entrywise interval bounds on a 1 x d state row.
    Box(IntervalBox),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VarInfo {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

/// A linear row `sum(terms) sense rhs`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinRow {
    pub terms: Vec<(usize, f64)>,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

/// The assembled mixed-integer formulation of a finite-family chain problem,
/// together with the data needed to rebuild node relaxations.
#[derive(Debug, Clone)]
pub struct DisjunctiveFormulation {
    pub variables: Vec<VarInfo>,
    pub rows: Vec<LinRow>,
    /// Sparse objective, maximization.
    pub objective: Vec<(usize, f64)>,
    /// `u_idx[n][j]`: state variable for step n, coordinate j.
    pub u_idx: Vec<Vec<usize>>,
    /// `v_idx[n][k][j]`: copy block of `u_n` for choice k.
    pub v_idx: Vec<Vec<Vec<usize>>>,
    /// `x_idx[n][k]`: binary selecting choice k at step n+1.
    pub x_idx: Vec<Vec<usize>>,
    pub family: FiniteFamily,
    pub initial: Vec<f64>,
    pub linear_objective: Vec<f64>,
    pub boxes: Vec<UBox>,
    pub n_steps: usize,
}

impl DisjunctiveFormulation {
    pub fn n_binary(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }
}

struct Builder {
    variables: Vec<VarInfo>,
    rows: Vec<LinRow>,
}

impl Builder {
    fn var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> usize {
        self.variables.push(VarInfo {
            name,
            kind,
            lower,
            upper,
        });
        self.variables.len() - 1
    }

    fn row(&mut self, terms: Vec<(usize, f64)>, sense: ConstraintSense, rhs: f64) {
        self.rows.push(LinRow { terms, sense, rhs });
    }
}

/// Interval bounds a `UBox` induces on one coordinate.
fn ubox_bounds(b: &UBox, j: usize) -> (f64, f64) {
    match b {
        UBox::Simplex => (0.0, 1.0),
        UBox::Box(ib) => (ib.lower.get(0, j), ib.upper.get(0, j)),
    }
}

/// One-step image bounds of a `UBox` under the whole family, used to bound
/// the next state block.
fn ubox_image_bounds(b: &UBox, family: &FiniteFamily, j: usize) -> (f64, f64) {
    match b {
        UBox::Simplex => (0.0, 1.0),
        UBox::Box(_) => {
            let d = family.dim();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for m in family.matrices() {
                let mut l = 0.0;
                let mut h = 0.0;
                for i in 0..d {
                    let (bl, bh) = ubox_bounds(b, i);
                    let c = m.get(i, j);
                    if c >= 0.0 {
                        l += bl * c;
                        h += bh * c;
                    } else {
                        l += bh * c;
                        h += bl * c;
                    }
                }
                lo = lo.min(l);
                hi = hi.max(h);
            }
            (lo, hi)
        }
    }
}

/// Build the extended formulation for a finite-family chain problem with a
/// linear objective. `boxes[n-1]` outer-approximates the reachable set of
/// `u_{n-1}` and must be sound for the formulation to be exact.
pub fn build_extended_formulation(
    problem: &ChainProblem,
    boxes: &[UBox],
) -> Result<DisjunctiveFormulation> {
    problem.validate()?;
    let FamilySpec::Finite(family) = &problem.family else {
        return Err(Error::InvalidInput(
            "extended formulation requires a finite family".into(),
        ));
    };
    let ObjectiveSpec::Linear(q) = &problem.objective else {
        return Err(Error::InvalidInput(
            "extended formulation requires a linear objective".into(),
        ));
    };
    if problem.initial.rows() != 1 {
        return Err(Error::InvalidInput(
            "extended formulation expects a row-vector initial state".into(),
        ));
    }
    let n_steps = problem.horizon;
    if boxes.len() != n_steps {
        return Err(Error::DimensionMismatch(format!(
            "{} boxes for {} steps",
            boxes.len(),
            n_steps
        )));
    }
    let d = family.dim();
    let k_count = family.len();
    let p: Vec<f64> = problem.initial.row(0).to_vec();

    let mut b = Builder {
        variables: Vec::new(),
        rows: Vec::new(),
    };

    // State variables u_0 .. u_N.
    let mut u_idx = Vec::with_capacity(n_steps + 1);
    for n in 0..=n_steps {
        let mut block = Vec::with_capacity(d);
        for j in 0..d {
            let (lo, hi) = if n < n_steps {
                ubox_bounds(&boxes[n], j)
            } else {
                ubox_image_bounds(&boxes[n_steps - 1], family, j)
            };
            block.push(b.var(format!("u[{n}][{j}]"), VarKind::Continuous, lo, hi));
        }
        u_idx.push(block);
    }

    // Copy blocks and binaries for each step.
    let mut v_idx = Vec::with_capacity(n_steps);
    let mut x_idx = Vec::with_capacity(n_steps);
    for n in 0..n_steps {
        let mut v_step = Vec::with_capacity(k_count);
        let mut x_step = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let mut block = Vec::with_capacity(d);
            for j in 0..d {
                let (lo, hi) = ubox_bounds(&boxes[n], j);
                block.push(b.var(
                    format!("v[{n}][{k}][{j}]"),
                    VarKind::Continuous,
                    lo.min(0.0),
                    hi.max(0.0),
                ));
            }
            v_step.push(block);
            x_step.push(b.var(format!("x[{n}][{k}]"), VarKind::Binary, 0.0, 1.0));
        }
        v_idx.push(v_step);
        x_idx.push(x_step);
    }

    // Boundary: u_0 = p.
    for j in 0..d {
        b.row(vec![(u_idx[0][j], 1.0)], ConstraintSense::Eq, p[j]);
    }

    for n in 0..n_steps {
        // Copies sum back to the state: sum_k v[n][k] = u[n].
        for j in 0..d {
            let mut terms: Vec<(usize, f64)> =
                (0..k_count).map(|k| (v_idx[n][k][j], 1.0)).collect();
            terms.push((u_idx[n][j], -1.0));
            b.row(terms, ConstraintSense::Eq, 0.0);
        }
        // Transition: sum_k v[n][k] T_k = u[n+1].
        for j in 0..d {
            let mut terms = Vec::with_capacity(k_count * d + 1);
            for k in 0..k_count {
                let t = family.matrix(k);
                for l in 0..d {
                    let c = t.get(l, j);
                    if c != 0.0 {
                        terms.push((v_idx[n][k][l], c));
                    }
                }
            }
            terms.push((u_idx[n + 1][j], -1.0));
            b.row(terms, ConstraintSense::Eq, 0.0);
        }
        // Exactly one choice per step.
        let terms: Vec<(usize, f64)> = (0..k_count).map(|k| (x_idx[n][k], 1.0)).collect();
        b.row(terms, ConstraintSense::Eq, 1.0);
        // Copy membership v[n][k] in U_n * x[n][k].
        for k in 0..k_count {
            match &boxes[n] {
                UBox::Simplex => {
                    let mut terms: Vec<(usize, f64)> =
                        (0..d).map(|j| (v_idx[n][k][j], 1.0)).collect();
                    terms.push((x_idx[n][k], -1.0));
                    b.row(terms, ConstraintSense::Eq, 0.0);
                }
                UBox::Box(ib) => {
                    for j in 0..d {
                        let lo = ib.lower.get(0, j);
                        let hi = ib.upper.get(0, j);
                        b.row(
                            vec![(v_idx[n][k][j], 1.0), (x_idx[n][k], -hi)],
                            ConstraintSense::Le,
                            0.0,
                        );
                        b.row(
                            vec![(v_idx[n][k][j], 1.0), (x_idx[n][k], -lo)],
                            ConstraintSense::Ge,
                            0.0,
                        );
                    }
                }
            }
        }
    }

    let objective: Vec<(usize, f64)> = (0..d)
        .filter(|j| q[*j] != 0.0)
        .map(|j| (u_idx[n_steps][j], q[j]))
        .collect();

    Ok(DisjunctiveFormulation {
        variables: b.variables,
        rows: b.rows,
        objective,
        u_idx,
        v_idx,
        x_idx,
        family: family.clone(),
        initial: p,
        linear_objective: q.clone(),
        boxes: boxes.to_vec(),
        n_steps,
    })
}

impl DisjunctiveFormulation {
    /// Exact state after applying a choice prefix to the initial vector.
    pub fn prefix_state(&self, prefix: &[usize]) -> Vec<f64> {
        let mut u = self.initial.clone();
        for &k in prefix {
            u = row_times_mat(&u, self.family.matrix(k));
        }
        u
    }

    /// LP relaxation restricted to the steps after a fixed prefix. The
    /// prefix's state is pinned exactly; all later binaries relax to [0,1].
    pub fn node_relaxation(&self, node: &BbNode) -> Result<LpProblem> {
        let depth = node.depth();
        if depth > self.n_steps {
            return Err(Error::InvalidInput(format!(
                "node depth {} exceeds horizon {}",
                depth, self.n_steps
            )));
        }
        if node.prefix.iter().any(|k| *k >= self.family.len()) {
            return Err(Error::InvalidInput("node prefix uses unknown choice".into()));
        }
        let u_fixed = self.prefix_state(&node.prefix);
        let d = self.family.dim();
        let k_count = self.family.len();
        let remaining = self.n_steps - depth;

        // Local variable layout: u-blocks for depth..=n_steps, then (v, x)
        // per remaining step.
        let mut b = Builder {
            variables: Vec::new(),
            rows: Vec::new(),
        };
        let mut u_local = Vec::with_capacity(remaining + 1);
        for n in depth..=self.n_steps {
            let block: Vec<usize> = (0..d)
                .map(|j| {
                    let (lo, hi) = if n < self.n_steps {
                        ubox_bounds(&self.boxes[n], j)
                    } else {
                        ubox_image_bounds(&self.boxes[self.n_steps - 1], &self.family, j)
                    };
                    b.var(format!("u[{n}][{j}]"), VarKind::Continuous, lo, hi)
                })
                .collect();
            u_local.push(block);
        }
        let mut v_local = Vec::with_capacity(remaining);
        let mut x_local = Vec::with_capacity(remaining);
        for (r, n) in (depth..self.n_steps).enumerate() {
            let mut v_step = Vec::with_capacity(k_count);
            let mut x_step = Vec::with_capacity(k_count);
            for k in 0..k_count {
                let block: Vec<usize> = (0..d)
                    .map(|j| {
                        let (lo, hi) = ubox_bounds(&self.boxes[n], j);
                        b.var(
                            format!("v[{n}][{k}][{j}]"),
                            VarKind::Continuous,
                            lo.min(0.0),
                            hi.max(0.0),
                        )
                    })
                    .collect();
                v_step.push(block);
                x_step.push(b.var(format!("x[{n}][{k}]"), VarKind::Continuous, 0.0, 1.0));
            }
            v_local.push(v_step);
            x_local.push(x_step);
            let _ = r;
        }

        // Pin the prefix state.
        for j in 0..d {
            b.row(vec![(u_local[0][j], 1.0)], ConstraintSense::Eq, u_fixed[j]);
        }
        for r in 0..remaining {
            let n = depth + r;
            for j in 0..d {
                let mut terms: Vec<(usize, f64)> =
                    (0..k_count).map(|k| (v_local[r][k][j], 1.0)).collect();
                terms.push((u_local[r][j], -1.0));
                b.row(terms, ConstraintSense::Eq, 0.0);
            }
            for j in 0..d {
                let mut terms = Vec::with_capacity(k_count * d + 1);
                for k in 0..k_count {
                    let t = self.family.matrix(k);
                    for l in 0..d {
                        let c = t.get(l, j);
                        if c != 0.0 {
                            terms.push((v_local[r][k][l], c));
                        }
                    }
                }
                terms.push((u_local[r + 1][j], -1.0));
                b.row(terms, ConstraintSense::Eq, 0.0);
            }
            let terms: Vec<(usize, f64)> = (0..k_count).map(|k| (x_local[r][k], 1.0)).collect();
            b.row(terms, ConstraintSense::Eq, 1.0);
            for k in 0..k_count {
                match &self.boxes[n] {
                    UBox::Simplex => {
                        let mut terms: Vec<(usize, f64)> =
                            (0..d).map(|j| (v_local[r][k][j], 1.0)).collect();
                        terms.push((x_local[r][k], -1.0));
                        b.row(terms, ConstraintSense::Eq, 0.0);
                    }
                    UBox::Box(ib) => {
                        for j in 0..d {
                            let lo = ib.lower.get(0, j);
                            let hi = ib.upper.get(0, j);
                            b.row(
                                vec![(v_local[r][k][j], 1.0), (x_local[r][k], -hi)],
                                ConstraintSense::Le,
                                0.0,
                            );
                            b.row(
                                vec![(v_local[r][k][j], 1.0), (x_local[r][k], -lo)],
                                ConstraintSense::Ge,
                                0.0,
                            );
                        }
                    }
                }
            }
        }

        let n_vars = b.variables.len();
        let mut objective = vec![0.0; n_vars];
        for (j, &c) in self.linear_objective.iter().enumerate() {
            objective[u_local[remaining][j]] = c;
        }
        let mut constraints = Mat::zeros(b.rows.len(), n_vars);
        let mut senses = Vec::with_capacity(b.rows.len());
        let mut rhs = Vec::with_capacity(b.rows.len());
        for (i, row) in b.rows.iter().enumerate() {
            for &(j, c) in &row.terms {
                constraints.set(i, j, constraints.get(i, j) + c);
            }
            senses.push(row.sense);
            rhs.push(row.rhs);
        }
        Ok(LpProblem {
            objective,
            constraints,
            senses,
            rhs,
            lower: b.variables.iter().map(|v| v.lower).collect(),
            upper: b.variables.iter().map(|v| v.upper).collect(),
        })
    }
}

/// LP upper bound on the best completion value of a node. A fully fixed node
/// evaluates the trajectory exactly.
pub fn lp_bound(formulation: &DisjunctiveFormulation, node: &BbNode) -> Result<f64> {
    if node.depth() == formulation.n_steps {
        let u = formulation.prefix_state(&node.prefix);
        return Ok(dot(&u, &formulation.linear_objective));
    }
    let lp = formulation.node_relaxation(node)?;
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective_value),
        // An infeasible relaxation certifies the node has no completion.
        LpStatus::Infeasible => Ok(f64::NEG_INFINITY),
        LpStatus::Unbounded => Err(Error::InvalidInput(
            "node relaxation unbounded; boxes must be bounded".into(),
        )),
    }
}
