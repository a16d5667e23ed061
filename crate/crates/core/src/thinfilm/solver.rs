//! Spatial branch-and-bound for the thin-film design problem.
//!
//! Search scheme: branch on material assignments layer by layer (skipping
//! designs with two consecutive layers of the same material, which merging
//! makes redundant), then bisect phase-thickness intervals. Node bounds come
//! from interval propagation of the cumulative tilde matrix followed by an
//! endpoint bound on the denominator `D`; the determinant-one identity is
//! applied only at the final matrix, turning the `D` bound into a
//! reflectance bound.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::milp::SolveReport;

use super::bounds::{d_upper, propagate_layer, TildeBox};
use super::{
    quarter_wave_heuristic, reflectance_of, MaterialLibrary, Provenance, StackDesign,
    TildeMatrix, TransferLayer,
};

/// Options for [`solve_thinfilm`].
#[derive(Debug, Clone)]
pub struct ThinFilmOptions {
    /// Relative optimality gap at termination.
    pub rel_gap: f64,
    /// Stop as soon as the incumbent reaches this reflectance.
    pub target_stop: Option<f64>,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<u64>,
    pub threads: usize,
    /// Forbid equal consecutive materials (preserves the optimum).
    pub symmetry_break: bool,
}

impl Default for ThinFilmOptions {
    fn default() -> Self {
        Self {
            rel_gap: 1e-3,
            target_stop: None,
            time_limit: None,
            node_limit: None,
            threads: 1,
            symmetry_break: true,
        }
    }
}

/// One logged node of the spatial search.
#[derive(Debug, Clone)]
pub struct ThinFilmAuditNode {
    pub materials: Vec<usize>,
    pub sigmas: Vec<(f64, f64)>,
    pub upper_bound: f64,
}

#[derive(Clone)]
struct Node {
    /// Fixed materials for the leading layers.
    materials: Vec<usize>,
    /// Phase-thickness range per layer.
    sigmas: Vec<Interval>,
    ub: f64,
    /// Set when the node just became material-complete.
    fresh: bool,
}

struct Pool {
    stack: Vec<Node>,
    active: usize,
}

struct Search<'a> {
    lib: &'a MaterialLibrary,
    n_layers: usize,
    rel_gap: f64,
    symmetry_break: bool,
    pool: Mutex<Pool>,
    cv: Condvar,
    incumbent: Mutex<(f64, Vec<TransferLayer>)>,
    inc_bits: AtomicU64,
    node_count: AtomicU64,
    pruned_max_bits: AtomicU64,
    stop: AtomicBool,
    limit_hit: AtomicBool,
    node_limit: u64,
    deadline: Option<Instant>,
    target: Option<f64>,
    audit: Option<Mutex<Vec<ThinFilmAuditNode>>>,
}

fn atomic_f64_max(cell: &AtomicU64, value: f64) {
    let mut cur = cell.load(Ordering::Relaxed);
    loop {
        if f64::from_bits(cur) >= value {
            return;
        }
        match cell.compare_exchange_weak(cur, value.to_bits(), Ordering::Relaxed, Ordering::Relaxed)
        {
            Ok(_) => return,
            Err(actual) => cur = actual,
        }
    }
}

impl<'a> Search<'a> {
    fn incumbent_value(&self) -> f64 {
        f64::from_bits(self.inc_bits.load(Ordering::Relaxed))
    }

    fn offer(&self, value: f64, layers: &[TransferLayer]) {
        if !value.is_finite() || value < self.incumbent_value() {
            return;
        }
        let mut inc = self.incumbent.lock().unwrap();
        if value > inc.0 {
            inc.0 = value;
            inc.1 = layers.to_vec();
            self.inc_bits.store(value.to_bits(), Ordering::Relaxed);
        }
        if let Some(t) = self.target {
            if inc.0 >= t {
                self.stop.store(true, Ordering::Relaxed);
            }
        }
    }

    /// Allowed refractive indices for a layer of a node.
    fn allowed_indices(&self, node: &Node, layer: usize) -> Vec<f64> {
        if layer < node.materials.len() {
            vec![self.lib.coating_indices[node.materials[layer]]]
        } else if self.symmetry_break && layer == node.materials.len() && layer > 0 {
            // First free layer cannot repeat the last fixed material.
            let prev = node.materials[layer - 1];
            self.lib
                .coating_indices
                .iter()
                .enumerate()
                .filter(|(m, _)| *m != prev)
                .map(|(_, a)| *a)
                .collect()
        } else {
            self.lib.coating_indices.clone()
        }
    }

    /// Interval boxes of the cumulative matrices u_0..u_N for a node.
    fn boxes(&self, node: &Node) -> Vec<TildeBox> {
        let mut boxes = Vec::with_capacity(self.n_layers + 1);
        boxes.push(TildeBox::identity());
        for layer in 0..self.n_layers {
            let indices = self.allowed_indices(node, layer);
            boxes.push(propagate_layer(
                boxes.last().unwrap(),
                &indices,
                node.sigmas[layer],
            ));
        }
        boxes
    }

    /// Reflectance upper bound of a node.
    fn bound(&self, node: &Node) -> (f64, Vec<TildeBox>) {
        let boxes = self.boxes(node);
        let d_hi = d_upper(boxes.last().unwrap(), self.lib.substrate_index);
        let ub = (1.0 - 4.0 * self.lib.substrate_index.re / d_hi).min(1.0);
        (ub, boxes)
    }

    fn midpoint_layers(&self, node: &Node) -> Vec<TransferLayer> {
        (0..self.n_layers)
            .map(|i| {
                let m = node
                    .materials
                    .get(i)
                    .copied()
                    .unwrap_or_else(|| self.lib.high_material());
                TransferLayer::from_sigma(m, node.sigmas[i].mid())
            })
            .collect()
    }

    fn eval(&self, layers: &[TransferLayer]) -> f64 {
        let mut w = TildeMatrix::identity();
        for l in layers {
            match l.matrix(self.lib) {
                Ok(m) => w = w.mul(&m),
                Err(_) => return f64::NEG_INFINITY,
            }
        }
        reflectance_of(&w, self.lib.substrate_index).unwrap_or(f64::NEG_INFINITY)
    }

    fn expand(&self, node: Node) -> Vec<Node> {
        let depth = node.materials.len();
        let mut children = Vec::new();
        if depth < self.n_layers {
            // Material branching.
            for m in 0..self.lib.n_materials() {
                if self.symmetry_break && depth > 0 && node.materials[depth - 1] == m {
                    continue;
                }
                let mut materials = node.materials.clone();
                materials.push(m);
                children.push(Node {
                    fresh: materials.len() == self.n_layers,
                    materials,
                    sigmas: node.sigmas.clone(),
                    ub: f64::INFINITY,
                });
            }
        } else {
            // Sigma bisection on the widest scaled interval.
            let boxes = self.boxes(&node);
            let mut best_layer = None;
            let mut best_score = 0.0;
            for i in 0..self.n_layers {
                let width = node.sigmas[i].width();
                if width < 1e-10 {
                    continue;
                }
                let a_max = self
                    .allowed_indices(&node, i)
                    .iter()
                    .fold(1.0_f64, |acc, a| acc.max(*a));
                let score = width * boxes[i].magnitude().max(1e-12) * a_max;
                if score > best_score {
                    best_score = score;
                    best_layer = Some(i);
                }
            }
            let Some(i) = best_layer else {
                return children; // point node: nothing left to split
            };
            let mid = node.sigmas[i].mid();
            for half in [
                Interval::new(node.sigmas[i].lo, mid),
                Interval::new(mid, node.sigmas[i].hi),
            ] {
                let mut sigmas = node.sigmas.clone();
                sigmas[i] = half;
                children.push(Node {
                    materials: node.materials.clone(),
                    sigmas,
                    ub: f64::INFINITY,
                    fresh: false,
                });
            }
        }

        let mut surviving = Vec::with_capacity(children.len());
        for mut child in children {
            let (ub, _) = self.bound(&child);
            child.ub = ub;
            if let Some(log) = &self.audit {
                log.lock().unwrap().push(ThinFilmAuditNode {
                    materials: child.materials.clone(),
                    sigmas: child.sigmas.iter().map(|s| (s.lo, s.hi)).collect(),
                    upper_bound: ub,
                });
            }
            if child.materials.len() == self.n_layers {
                // Material-complete: midpoint incumbent, refined when fresh
                // or improving.
                let layers = self.midpoint_layers(&child);
                let mid_val = self.eval(&layers);
                let improving = mid_val > self.incumbent_value();
                self.offer(mid_val, &layers);
                if child.fresh || improving {
                    if let Ok(refined) = local_refine_within(
                        &StackDesign {
                            layers,
                            reflectance: mid_val.max(0.0),
                            provenance: Provenance::Incumbent,
                        },
                        self.lib,
                        None,
                    ) {
                        self.offer(refined.reflectance, &refined.layers);
                    }
                }
            }
            let inc = self.incumbent_value();
            if child.ub <= inc + self.rel_gap * inc.abs() {
                atomic_f64_max(&self.pruned_max_bits, child.ub);
            } else {
                surviving.push(child);
            }
        }
        surviving.sort_by(|a, b| b.ub.total_cmp(&a.ub));
        surviving.reverse(); // stack pops from the back
        surviving
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
                self.limit_hit.store(true, Ordering::Relaxed);
            }
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    self.stop.store(true, Ordering::Relaxed);
                    self.limit_hit.store(true, Ordering::Relaxed);
                }
            }

            let inc = self.incumbent_value();
            let children = if self.stop.load(Ordering::Relaxed) {
                atomic_f64_max(&self.pruned_max_bits, node.ub);
                Vec::new()
            } else if node.ub <= inc + self.rel_gap * inc.abs() {
                atomic_f64_max(&self.pruned_max_bits, node.ub);
                Vec::new()
            } else {
                self.expand(node)
            };

            let mut g = self.pool.lock().unwrap();
            g.stack.extend(children);
            g.active -= 1;
            self.cv.notify_all();
        }
    }
}

/// Coordinate-ascent refinement of the phase thicknesses, materials fixed.
/// Reflectance never decreases. `domains` restricts each layer's sigma.
fn local_refine_within(
    design: &StackDesign,
    lib: &MaterialLibrary,
    domains: Option<&[Interval]>,
) -> Result<StackDesign> {
    let n = design.layers.len();
    let mut layers = design.layers.clone();
    for l in &layers {
        l.validate()?;
    }
    let mats: Vec<TildeMatrix> = layers
        .iter()
        .map(|l| l.matrix(lib))
        .collect::<Result<_>>()?;
    let mut mats = mats;
    let eval_with = |mats: &[TildeMatrix]| -> f64 {
        let mut w = TildeMatrix::identity();
        for m in mats {
            w = w.mul(m);
        }
        reflectance_of(&w, lib.substrate_index).unwrap_or(f64::NEG_INFINITY)
    };
    let mut best = eval_with(&mats);

    for _pass in 0..60 {
        let mut improved = 0.0;
        for i in 0..n {
            let domain = domains
                .map(|d| d[i])
                .unwrap_or(Interval { lo: 0.0, hi: PI });
            // Prefix and suffix products around layer i.
            let mut prefix = TildeMatrix::identity();
            for m in &mats[..i] {
                prefix = prefix.mul(m);
            }
            let mut suffix = TildeMatrix::identity();
            for m in &mats[i + 1..] {
                suffix = suffix.mul(m);
            }
            let a = lib.index_of(layers[i].material)?;
            let value_at = |sigma: f64| -> f64 {
                let t = TildeMatrix {
                    m11: sigma.cos(),
                    m12: sigma.sin() / a,
                    m21: a * sigma.sin(),
                    m22: sigma.cos(),
                };
                let w = prefix.mul(&t).mul(&suffix);
                reflectance_of(&w, lib.substrate_index).unwrap_or(f64::NEG_INFINITY)
            };

            // Coarse scan, then golden-section refinement of the best cell;
            // the slice objective need not be unimodal over the full range.
            let cells = 64;
            let step = domain.width() / cells as f64;
            let mut best_sigma = layers[i].sigma().clamp(domain.lo, domain.hi);
            let mut best_val = value_at(best_sigma);
            if step > 0.0 {
                for c in 0..=cells {
                    let s = domain.lo + step * c as f64;
                    let v = value_at(s);
                    if v > best_val {
                        best_val = v;
                        best_sigma = s;
                    }
                }
                let mut lo = (best_sigma - step).max(domain.lo);
                let mut hi = (best_sigma + step).min(domain.hi);
                let phi = 0.5 * (3.0 - 5.0_f64.sqrt());
                let mut x1 = lo + phi * (hi - lo);
                let mut x2 = hi - phi * (hi - lo);
                let mut f1 = value_at(x1);
                let mut f2 = value_at(x2);
                for _ in 0..80 {
                    if f1 < f2 {
                        lo = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = hi - phi * (hi - lo);
                        f2 = value_at(x2);
                    } else {
                        hi = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = lo + phi * (hi - lo);
                        f1 = value_at(x1);
                    }
                }
                let cand = if f1 > f2 { x1 } else { x2 };
                let cand_val = value_at(cand);
                if cand_val > best_val {
                    best_val = cand_val;
                    best_sigma = cand;
                }
            }
            if best_val > best {
                improved += best_val - best;
                best = best_val;
                layers[i] = TransferLayer::from_sigma(layers[i].material, best_sigma);
                mats[i] = layers[i].matrix(lib)?;
            }
        }
        if improved < 1e-13 {
            break;
        }
    }

    Ok(StackDesign {
        layers,
        reflectance: best,
        provenance: design.provenance,
    })
}

/// Cyclic coordinate ascent on the layer phase thicknesses; materials stay
/// fixed and the reflectance never decreases.
pub fn local_refine(design: &StackDesign, lib: &MaterialLibrary) -> Result<StackDesign> {
    lib.validate()?;
    local_refine_within(design, lib, None)
}

/// Globally optimize an N-layer design to the requested relative gap.
pub fn solve_thinfilm(
    lib: &MaterialLibrary,
    n_layers: usize,
    options: &ThinFilmOptions,
) -> Result<(SolveReport, StackDesign)> {
    solve_thinfilm_audited(lib, n_layers, options, false).map(|(r, d, _)| (r, d))
}

/// As [`solve_thinfilm`], optionally logging every bounded node.
pub fn solve_thinfilm_audited(
    lib: &MaterialLibrary,
    n_layers: usize,
    options: &ThinFilmOptions,
    audit: bool,
) -> Result<(SolveReport, StackDesign, Vec<ThinFilmAuditNode>)> {
    lib.validate()?;
    if n_layers == 0 {
        return Err(Error::InvalidInput("need at least one layer".into()));
    }
    let start = Instant::now();
    let symmetry_break = options.symmetry_break && lib.n_materials() > 1;

    // Warm start: refined quarter-wave stack when available.
    let seed_design = if lib.n_materials() >= 2 {
        quarter_wave_heuristic(lib, n_layers)?
    } else {
        StackDesign {
            layers: (0..n_layers)
                .map(|_| TransferLayer::from_sigma(0, PI / 2.0))
                .collect(),
            reflectance: 0.0,
            provenance: Provenance::Incumbent,
        }
    };
    let refined = local_refine_within(&seed_design, lib, None)?;

    let search = Search {
        lib,
        n_layers,
        rel_gap: options.rel_gap,
        symmetry_break,
        pool: Mutex::new(Pool {
            stack: vec![Node {
                materials: Vec::new(),
                sigmas: vec![Interval { lo: 0.0, hi: PI }; n_layers],
                ub: f64::INFINITY,
                fresh: false,
            }],
            active: 0,
        }),
        cv: Condvar::new(),
        incumbent: Mutex::new((refined.reflectance, refined.layers.clone())),
        inc_bits: AtomicU64::new(refined.reflectance.to_bits()),
        node_count: AtomicU64::new(0),
        pruned_max_bits: AtomicU64::new(f64::NEG_INFINITY.to_bits()),
        stop: AtomicBool::new(false),
        limit_hit: AtomicBool::new(false),
        node_limit: options.node_limit.unwrap_or(u64::MAX),
        deadline: options.time_limit.map(|d| start + d),
        target: options.target_stop,
        audit: audit.then(|| Mutex::new(Vec::new())),
    };
    if let Some(t) = search.target {
        if refined.reflectance >= t {
            search.stop.store(true, Ordering::Relaxed);
        }
    }

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

    {
        let g = search.pool.lock().unwrap();
        for n in &g.stack {
            atomic_f64_max(&search.pruned_max_bits, n.ub);
        }
    }

    let (value, layers) = {
        let inc = search.incumbent.lock().unwrap();
        (inc.0, inc.1.clone())
    };
    let pruned_max = f64::from_bits(search.pruned_max_bits.load(Ordering::Relaxed));
    let gap = (pruned_max - value).max(0.0);
    let limit_reached = search.limit_hit.load(Ordering::Relaxed);
    let provenance = if limit_reached {
        Provenance::Incumbent
    } else {
        Provenance::Optimal
    };
    let report = SolveReport {
        optimal_value: value,
        optimal_sequence: layers.iter().map(|l| l.material).collect(),
        node_count: search.node_count.load(Ordering::Relaxed),
        lp_count: 0,
        wall_time_s: start.elapsed().as_secs_f64(),
        gap,
        limit_reached,
    };
    let design = StackDesign {
        layers,
        reflectance: value,
        provenance,
    };
    let audit_log = search
        .audit
        .map(|m| m.into_inner().unwrap())
        .unwrap_or_default();
    Ok((report, design, audit_log))
}
