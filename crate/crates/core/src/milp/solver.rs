//! Branch-and-bound over choice sequences, plus the enumeration oracle.
//!
//! Depth-first search on steps in order, children ordered by descending
//! bound. Bounds come from an adaptive value-iteration table (cheap, valid
//! for entrywise-nonnegative families) and/or the LP relaxation of the
//! disjunctive formulation. Pruning uses `bound <= incumbent + gap`, so the
//! returned value is within the absolute gap of the optimum independent of
//! thread scheduling; with `gap = 0` it is exact.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Instant;

use crate::chain::{ChainProblem, FamilySpec, IntervalBox, ObjectiveSpec};
use crate::error::{Error, Result};
use crate::matrix::{dot, row_times_mat, Mat};

use super::formulation::{build_extended_formulation, lp_bound, DisjunctiveFormulation, UBox};
use super::{BbNode, BbOptions, BoundMode, FiniteFamily, SolveReport};

/// Adaptive value-iteration table: `beta[n][l]` bounds the best completion
/// value from state `l` with steps `n..N` left to choose, allowing the choice
/// to depend on the state. The adaptive optimum dominates every static plan,
/// so `u . beta[n]` is a valid upper bound for nonnegative `u`.
#[derive(Debug, Clone)]
pub struct DpTable {
    beta: Vec<Vec<f64>>,
}

impl DpTable {
    pub fn new(family: &FiniteFamily, q: &[f64], n_steps: usize) -> Result<Self> {
        family.validate()?;
        if !family.all_nonnegative() {
            return Err(Error::InvalidInput(
                "value-iteration bound requires entrywise nonnegative matrices".into(),
            ));
        }
        let d = family.dim();
        if q.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "objective has {} entries for dimension {}",
                q.len(),
                d
            )));
        }
        let mut beta = vec![vec![0.0; d]; n_steps + 1];
        beta[n_steps] = q.to_vec();
        for n in (0..n_steps).rev() {
            let next = beta[n + 1].clone();
            let cur = &mut beta[n];
            for l in 0..d {
                let mut best = f64::NEG_INFINITY;
                for m in family.matrices() {
                    let row = m.row(l);
                    let v = dot(row, &next);
                    if v > best {
                        best = v;
                    }
                }
                cur[l] = best;
            }
        }
        Ok(Self { beta })
    }

    /// Bound for a nonnegative state row `u` with `depth` steps already fixed.
    pub fn bound(&self, u: &[f64], depth: usize) -> f64 {
        dot(u, &self.beta[depth])
    }
}

/// Value-iteration upper bound on the best completion of a node.
pub fn dp_bound(
    family: &FiniteFamily,
    q: &[f64],
    n_steps: usize,
    initial: &[f64],
    node: &BbNode,
) -> Result<f64> {
    if initial.iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidInput(
            "value-iteration bound requires a nonnegative initial state".into(),
        ));
    }
    let table = DpTable::new(family, q, n_steps)?;
    let mut u = initial.to_vec();
    for &k in &node.prefix {
        if k >= family.len() {
            return Err(Error::InvalidInput("node prefix uses unknown choice".into()));
        }
        u = row_times_mat(&u, family.matrix(k));
    }
    Ok(table.bound(&u, node.depth()))
}

fn problem_parts(problem: &ChainProblem) -> Result<(&FiniteFamily, Vec<f64>, &[f64], usize)> {
    problem.validate()?;
    let FamilySpec::Finite(family) = &problem.family else {
        return Err(Error::InvalidInput("solver requires a finite family".into()));
    };
    let ObjectiveSpec::Linear(q) = &problem.objective else {
        return Err(Error::InvalidInput("solver requires a linear objective".into()));
    };
    if problem.initial.rows() != 1 {
        return Err(Error::InvalidInput(
            "solver expects a row-vector initial state".into(),
        ));
    }
    Ok((family, problem.initial.row(0).to_vec(), q, problem.horizon))
}

/// Exhaustive evaluation of every choice sequence, reusing prefix products.
/// Refuses when `K^N` exceeds `budget` sequences.
pub fn enumerate_exact(problem: &ChainProblem, budget: f64) -> Result<SolveReport> {
    let (family, p, q, n_steps) = problem_parts(problem)?;
    let k_count = family.len();
    let sequences = (k_count as f64).powi(n_steps as i32);
    if sequences > budget {
        return Err(Error::BudgetExceeded { sequences, budget });
    }
    let start = Instant::now();
    let mut best_value = f64::NEG_INFINITY;
    let mut best_seq: Vec<usize> = Vec::new();
    let mut prefix: Vec<usize> = Vec::new();
    let mut states: Vec<Vec<f64>> = vec![p];
    let mut leaves: u64 = 0;

    // Lexicographic DFS; strict improvement keeps the first (smallest) tie.
    loop {
        if prefix.len() == n_steps {
            leaves += 1;
            let value = dot(states.last().unwrap(), q);
            if value > best_value {
                best_value = value;
                best_seq = prefix.clone();
            }
            // Backtrack to the next sequence.
            loop {
                match prefix.pop() {
                    None => {
                        return Ok(SolveReport {
                            optimal_value: best_value,
                            optimal_sequence: best_seq,
                            node_count: leaves,
                            lp_count: 0,
                            wall_time_s: start.elapsed().as_secs_f64(),
                            gap: 0.0,
                            limit_reached: false,
                        });
                    }
                    Some(k) => {
                        states.pop();
                        if k + 1 < k_count {
                            prefix.push(k + 1);
                            let u = row_times_mat(states.last().unwrap(), family.matrix(k + 1));
                            states.push(u);
                            break;
                        }
                    }
                }
            }
        } else {
            prefix.push(0);
            let u = row_times_mat(states.last().unwrap(), family.matrix(0));
            states.push(u);
        }
    }
}

/// Default outer boxes: the nonnegative subsimplex for probability chains
/// (nonnegative substochastic family, nonnegative initial mass at most one),
/// interval propagation otherwise.
fn default_boxes(family: &FiniteFamily, p: &[f64], n_steps: usize) -> Result<Vec<UBox>> {
    let simplex_ok = family.all_nonnegative()
        && p.iter().all(|v| *v >= 0.0)
        && p.iter().sum::<f64>() <= 1.0 + 1e-9
        && family.matrices().iter().all(|m| {
            (0..m.rows()).all(|i| m.row(i).iter().sum::<f64>() <= 1.0 + 1e-9)
        });
    if simplex_ok {
        return Ok(vec![UBox::Simplex; n_steps]);
    }
    let point = IntervalBox::point(&Mat::row_vector(p));
    let boxes = crate::chain::propagate_box(&point, family, n_steps)?;
    Ok(boxes[..n_steps].iter().cloned().map(UBox::Box).collect())
}

/// One logged branch-and-bound node.
#[derive(Debug, Clone)]
pub struct AuditNode {
    pub prefix: Vec<usize>,
    pub bound: f64,
}

struct Node {
    prefix: Vec<usize>,
    u: Vec<f64>,
    bound: f64,
}

struct Pool {
    stack: Vec<Node>,
    active: usize,
}

struct Search<'a> {
    family: &'a FiniteFamily,
    q: &'a [f64],
    n_steps: usize,
    gap: f64,
    dp: Option<DpTable>,
    form: Option<DisjunctiveFormulation>,
    pool: Mutex<Pool>,
    cv: Condvar,
    incumbent: Mutex<(f64, Vec<usize>)>,
    inc_bits: AtomicU64,
    node_count: AtomicU64,
    lp_count: AtomicU64,
    pruned_max_bits: AtomicU64,
    node_limit: u64,
    stop: AtomicBool,
    audit: Option<Mutex<Vec<AuditNode>>>,
    failure: Mutex<Option<Error>>,
}

fn atomic_f64_max(cell: &AtomicU64, value: f64) {
    let mut cur = cell.load(Ordering::Relaxed);
    loop {
        if f64::from_bits(cur) >= value {
            return;
        }
        match cell.compare_exchange_weak(
            cur,
            value.to_bits(),
            Ordering::Relaxed,
            Ordering::Relaxed,
        ) {
            Ok(_) => return,
            Err(actual) => cur = actual,
        }
    }
}

impl<'a> Search<'a> {
    fn incumbent_value(&self) -> f64 {
        f64::from_bits(self.inc_bits.load(Ordering::Relaxed))
    }

    fn offer_incumbent(&self, value: f64, seq: &[usize]) {
        if value < self.incumbent_value() {
            return;
        }
        let mut inc = self.incumbent.lock().unwrap();
        if value > inc.0 || (value == inc.0 && seq < inc.1.as_slice()) {
            inc.0 = value;
            inc.1 = seq.to_vec();
            self.inc_bits.store(value.to_bits(), Ordering::Relaxed);
        }
    }

    fn log_audit(&self, prefix: &[usize], bound: f64) {
        if let Some(log) = &self.audit {
            log.lock().unwrap().push(AuditNode {
                prefix: prefix.to_vec(),
                bound,
            });
        }
    }

    /// Bound a child state; `None` means the LP relaxation was not consulted.
    fn child_bound(&self, u: &[f64], depth: usize, prefix: &[usize]) -> Result<f64> {
        let mut bound = f64::INFINITY;
        if let Some(dp) = &self.dp {
            bound = dp.bound(u, depth);
        }
        // Lazy LP: skip when the cheap bound already prunes.
        if let Some(form) = &self.form {
            if bound > self.incumbent_value() + self.gap {
                let node = BbNode::with_prefix(prefix.to_vec());
                let lp = lp_bound(form, &node)?;
                self.lp_count.fetch_add(1, Ordering::Relaxed);
                bound = bound.min(lp);
            }
        }
        Ok(bound)
    }

    fn expand(&self, node: Node) -> Result<Vec<Node>> {
        let depth = node.prefix.len();
        let k_count = self.family.len();
        let mut children: Vec<Node> = Vec::with_capacity(k_count);
        let mut prefix = node.prefix.clone();
        for k in 0..k_count {
            let u = row_times_mat(&node.u, self.family.matrix(k));
            prefix.push(k);
            if depth + 1 == self.n_steps {
                let value = dot(&u, self.q);
                self.log_audit(&prefix, value);
                self.offer_incumbent(value, &prefix);
            } else {
                let bound = self.child_bound(&u, depth + 1, &prefix)?;
                self.log_audit(&prefix, bound);
                if bound <= self.incumbent_value() + self.gap {
                    atomic_f64_max(&self.pruned_max_bits, bound);
                } else {
                    children.push(Node {
                        prefix: prefix.clone(),
                        u,
                        bound,
                    });
                }
            }
            prefix.pop();
        }
        // Best bound explored first; ties keep ascending choice order.
        children.sort_by(|a, b| b.bound.total_cmp(&a.bound));
        children.reverse(); // stack pops from the back
        Ok(children)
    }

    fn worker(&self) {
        loop {
            let node = {
                let mut g = self.pool.lock().unwrap();
                loop {
                    if let Some(n) = g.stack.pop() {
                        g.active += 1;
                        break n;
                    }
                    if g.active == 0 {
                        self.cv.notify_all();
                        return;
                    }
                    g = self.cv.wait(g).unwrap();
                }
            };

            let count = self.node_count.fetch_add(1, Ordering::Relaxed) + 1;
            if count >= self.node_limit {
                self.stop.store(true, Ordering::Relaxed);
            }

            let result = if self.stop.load(Ordering::Relaxed) {
                // Discard unexplored work but keep its bound for the gap.
                atomic_f64_max(&self.pruned_max_bits, node.bound);
                Ok(Vec::new())
            } else if node.bound <= self.incumbent_value() + self.gap {
                atomic_f64_max(&self.pruned_max_bits, node.bound);
                Ok(Vec::new())
            } else {
                self.expand(node)
            };

            let mut g = self.pool.lock().unwrap();
            match result {
                Ok(children) => g.stack.extend(children),
                Err(e) => {
                    *self.failure.lock().unwrap() = Some(e);
                    self.stop.store(true, Ordering::Relaxed);
                }
            }
            g.active -= 1;
            self.cv.notify_all();
        }
    }

    /// Lexicographically smallest sequence whose value reaches `target`.
    /// Deterministic and independent of the main search's scheduling.
    fn reconstruct(&self, p: &[f64], target: f64, budget: u64) -> Option<(f64, Vec<usize>)> {
        let k_count = self.family.len();
        let mut stack: Vec<(Vec<usize>, Vec<f64>)> = vec![(Vec::new(), p.to_vec())];
        let mut visited: u64 = 0;
        while let Some((prefix, u)) = stack.pop() {
            visited += 1;
            if visited > budget {
                return None;
            }
            let depth = prefix.len();
            let mut pushes: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
            for k in 0..k_count {
                let child_u = row_times_mat(&u, self.family.matrix(k));
                let mut child_prefix = prefix.clone();
                child_prefix.push(k);
                if depth + 1 == self.n_steps {
                    let value = dot(&child_u, self.q);
                    if value >= target {
                        return Some((value, child_prefix));
                    }
                } else {
                    let bound = match self.child_bound_quiet(&child_u, depth + 1, &child_prefix) {
                        Ok(b) => b,
                        Err(_) => f64::INFINITY,
                    };
                    if bound >= target {
                        pushes.push((child_prefix, child_u));
                    }
                }
            }
            // Ascending choice order: last pushed is popped first.
            while let Some(item) = pushes.pop() {
                stack.push(item);
            }
        }
        None
    }

    fn child_bound_quiet(&self, u: &[f64], depth: usize, prefix: &[usize]) -> Result<f64> {
        if let Some(dp) = &self.dp {
            return Ok(dp.bound(u, depth));
        }
        if let Some(form) = &self.form {
            let node = BbNode::with_prefix(prefix.to_vec());
            return lp_bound(form, &node);
        }
        Ok(f64::INFINITY)
    }
}

/// Greedy dive guided by the bound table, for a warm-start incumbent.
fn greedy_dive(
    family: &FiniteFamily,
    q: &[f64],
    p: &[f64],
    n_steps: usize,
    dp: Option<&DpTable>,
) -> (f64, Vec<usize>) {
    let mut u = p.to_vec();
    let mut seq = Vec::with_capacity(n_steps);
    for depth in 0..n_steps {
        let mut best_k = 0;
        let mut best_score = f64::NEG_INFINITY;
        for k in 0..family.len() {
            let cand = row_times_mat(&u, family.matrix(k));
            let score = if depth + 1 == n_steps {
                dot(&cand, q)
            } else if let Some(t) = dp {
                t.bound(&cand, depth + 1)
            } else {
                dot(&cand, q)
            };
            if score > best_score {
                best_score = score;
                best_k = k;
            }
        }
        u = row_times_mat(&u, family.matrix(best_k));
        seq.push(best_k);
    }
    (dot(&u, q), seq)
}

/// Branch-and-bound solve of a finite-family chain problem.
pub fn solve_bb(problem: &ChainProblem, options: &BbOptions) -> Result<SolveReport> {
    solve_bb_audited(problem, options, false).map(|(report, _)| report)
}

/// As [`solve_bb`], additionally logging every bounded node when `audit` is
/// set (used by the bound-validity test suite).
pub fn solve_bb_audited(
    problem: &ChainProblem,
    options: &BbOptions,
    audit: bool,
) -> Result<(SolveReport, Vec<AuditNode>)> {
    let start = Instant::now();
    let (family, p, q, n_steps) = problem_parts(problem)?;

    let dp = match options.bound_mode {
        BoundMode::Lp => None,
        BoundMode::Dp => {
            if p.iter().any(|v| *v < 0.0) {
                return Err(Error::InvalidInput(
                    "value-iteration bound requires a nonnegative initial state".into(),
                ));
            }
            Some(DpTable::new(family, q, n_steps)?)
        }
        BoundMode::Best => {
            if family.all_nonnegative() && p.iter().all(|v| *v >= 0.0) {
                Some(DpTable::new(family, q, n_steps)?)
            } else {
                None
            }
        }
    };
    let form = match options.bound_mode {
        BoundMode::Dp => None,
        BoundMode::Lp | BoundMode::Best => {
            let boxes = default_boxes(family, &p, n_steps)?;
            Some(build_extended_formulation(problem, &boxes)?)
        }
    };

    let (inc_value, inc_seq) = greedy_dive(family, q, &p, n_steps, dp.as_ref());

    let search = Search {
        family,
        q,
        n_steps,
        gap: options.gap,
        dp,
        form,
        pool: Mutex::new(Pool {
            stack: vec![Node {
                prefix: Vec::new(),
                u: p.clone(),
                bound: f64::INFINITY,
            }],
            active: 0,
        }),
        cv: Condvar::new(),
        incumbent: Mutex::new((inc_value, inc_seq)),
        inc_bits: AtomicU64::new(inc_value.to_bits()),
        node_count: AtomicU64::new(0),
        lp_count: AtomicU64::new(0),
        pruned_max_bits: AtomicU64::new(f64::NEG_INFINITY.to_bits()),
        node_limit: options.node_limit.unwrap_or(u64::MAX),
        stop: AtomicBool::new(false),
        audit: audit.then(|| Mutex::new(Vec::new())),
        failure: Mutex::new(None),
    };

    let threads = options.threads.max(1);
    if threads == 1 {
        search.worker();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| search.worker());
            }
        });
    }
    if let Some(e) = search.failure.lock().unwrap().take() {
        return Err(e);
    }

    // Fold any abandoned nodes into the proven gap.
    {
        let g = search.pool.lock().unwrap();
        for n in &g.stack {
            atomic_f64_max(&search.pruned_max_bits, n.bound);
        }
    }

    let limit_reached = search.stop.load(Ordering::Relaxed);
    let (mut value, mut sequence) = {
        let inc = search.incumbent.lock().unwrap();
        (inc.0, inc.1.clone())
    };

    // Deterministic tie-break: the lexicographically smallest sequence
    // achieving the incumbent value (or better, when the gap allowed the
    // main search to stop early).
    if !limit_reached {
        let budget = 20 * search.node_count.load(Ordering::Relaxed).max(50_000);
        if let Some((rec_value, rec_seq)) = search.reconstruct(&p, value, budget) {
            value = rec_value;
            sequence = rec_seq;
        }
    }

    let pruned_max = f64::from_bits(search.pruned_max_bits.load(Ordering::Relaxed));
    let gap = (pruned_max - value).max(0.0);
    let report = SolveReport {
        optimal_value: value,
        optimal_sequence: sequence,
        node_count: search.node_count.load(Ordering::Relaxed),
        lp_count: search.lp_count.load(Ordering::Relaxed),
        wall_time_s: start.elapsed().as_secs_f64(),
        gap,
        limit_reached,
    };
    let audit_log = search
        .audit
        .map(|m| m.into_inner().unwrap())
        .unwrap_or_default();
    Ok((report, audit_log))
}
