//! Interval bounds on cumulative tilde matrices.
//!
//! Every entry of the one-layer update has the shape `alpha C + gamma beta S`
//! with `(C, S) = (cos sigma, sin sigma)`, `sigma` restricted to a subinterval
//! of `[0, pi]`, `alpha`/`beta` taken from entry intervals of the previous
//! state, and `gamma` the layer's index factor. The extremum over that set is
//! computed exactly, so the only slack in the propagated boxes is the loss of
//! correlation between entries.

use num_complex::Complex64;

use crate::interval::Interval;

/// Entrywise interval bounds on a tilde matrix, ordered (11, 12, 21, 22).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TildeBox {
    pub e11: Interval,
    pub e12: Interval,
    pub e21: Interval,
    pub e22: Interval,
}

impl TildeBox {
    pub fn identity() -> Self {
        Self {
            e11: Interval::point(1.0),
            e12: Interval::point(0.0),
            e21: Interval::point(0.0),
            e22: Interval::point(1.0),
        }
    }

    pub fn contains(&self, w: &super::TildeMatrix, tol: f64) -> bool {
        self.e11.contains_with_tol(w.m11, tol)
            && self.e12.contains_with_tol(w.m12, tol)
            && self.e21.contains_with_tol(w.m21, tol)
            && self.e22.contains_with_tol(w.m22, tol)
    }

    /// Largest entry magnitude the box allows.
    pub fn magnitude(&self) -> f64 {
        self.e11
            .max_abs()
            .max(self.e12.max_abs())
            .max(self.e21.max_abs())
            .max(self.e22.max_abs())
    }
}

/// Max of `p cos(theta) + q sin(theta)` over `theta` in `[lo, hi]`, a
/// subinterval of `[0, pi]`. The interior peak is at atan2(q, p).
fn sinusoid_max(p: f64, q: f64, theta: Interval) -> f64 {
    let end = (p * theta.lo.cos() + q * theta.lo.sin())
        .max(p * theta.hi.cos() + q * theta.hi.sin());
    let peak = q.atan2(p);
    if peak >= theta.lo && peak <= theta.hi {
        end.max(p.hypot(q))
    } else {
        end
    }
}

/// Max of `alpha C + gamma beta S` over the boxed coefficients and the
/// theta range (`gamma >= 0`; `sin >= 0` on `[0, pi]` puts beta at its
/// upper end, while the best alpha end depends on the sign of cos).
fn directional_max(alpha: Interval, beta: Interval, gamma: f64, theta: Interval) -> f64 {
    let q = gamma * beta.hi;
    sinusoid_max(alpha.lo, q, theta).max(sinusoid_max(alpha.hi, q, theta))
}

fn directional_min(alpha: Interval, beta: Interval, gamma: f64, theta: Interval) -> f64 {
    -directional_max(alpha.neg(), beta.neg(), gamma, theta)
}

/// Extremal range of `alpha C + gamma beta S` over a finite set of gammas.
fn entry_range(alpha: Interval, beta: Interval, gammas: &[f64], theta: Interval) -> Interval {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &g in gammas {
        lo = lo.min(directional_min(alpha, beta, g, theta));
        hi = hi.max(directional_max(alpha, beta, g, theta));
    }
    Interval::new(lo, hi)
}

/// Closed-form bound over the full half-circle and a gamma set: the upper
/// bound is `sqrt(max(lo^2, hi^2) of alpha + max gamma^2 * max(0, beta_hi)^2)`
/// and the lower bound mirrors it through `beta_lo`.
pub fn tighten_bounds(alpha: Interval, beta: Interval, gammas: &[f64]) -> Interval {
    debug_assert!(gammas.iter().all(|g| *g >= 0.0));
    let alpha_sq = alpha.lo.powi(2).max(alpha.hi.powi(2));
    let gamma_sq = gammas.iter().fold(0.0_f64, |acc, g| acc.max(g * g));
    let hi = (alpha_sq + gamma_sq * beta.hi.max(0.0).powi(2)).sqrt();
    let lo = -(alpha_sq + gamma_sq * (-beta.lo).max(0.0).powi(2)).sqrt();
    Interval::new(lo, hi)
}

/// One-layer image of a state box. `indices` lists the refractive indices the
/// layer may use; `theta` is its phase-thickness range within `[0, pi]`.
pub fn propagate_layer(state: &TildeBox, indices: &[f64], theta: Interval) -> TildeBox {
    let inv: Vec<f64> = indices.iter().map(|a| 1.0 / a).collect();
    TildeBox {
        e11: entry_range(state.e11, state.e12.neg(), indices, theta),
        e12: entry_range(state.e12, state.e11, &inv, theta),
        e21: entry_range(state.e21, state.e22, indices, theta),
        e22: entry_range(state.e22, state.e21.neg(), &inv, theta),
    }
}

/// Upper bound on the denominator `D` over a box; each affine form is
/// bounded by interval arithmetic and squared at its endpoints.
pub fn d_upper(state: &TildeBox, a_s: Complex64) -> f64 {
    let re = a_s.re;
    let im = a_s.im;
    let t1 = state.e11.add(state.e12.scale(-im)).square().hi;
    let t2 = state.e12.scale(re).square().hi;
    let t3 = state.e21.add(state.e22.scale(im)).square().hi;
    let t4 = state.e22.scale(re).square().hi;
    t1 + t2 + t3 + t4 + 2.0 * re
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const FULL: Interval = Interval { lo: 0.0, hi: PI };

    /// Dense grid over the feasible half-circle, interval endpoints and the
    /// gamma set; sweeps both the C-axis and S-axis parametrizations so the
    /// poles are covered densely too.
    fn grid_max_min(alpha: Interval, beta: Interval, gammas: &[f64]) -> (f64, f64) {
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        let step = 1e-3;
        let mut eval = |c: f64, s: f64| {
            for &a in &[alpha.lo, alpha.hi] {
                for &b in &[beta.lo, beta.hi] {
                    for &g in gammas {
                        let v = a * c + g * b * s;
                        hi = hi.max(v);
                        lo = lo.min(v);
                    }
                }
            }
        };
        let mut c = -1.0;
        while c <= 1.0 {
            eval(c, (1.0 - c * c).max(0.0).sqrt());
            c += step;
        }
        let mut s = 0.0;
        while s <= 1.0 {
            let c = (1.0 - s * s).max(0.0).sqrt();
            eval(c, s);
            eval(-c, s);
            s += step;
        }
        (hi, lo)
    }

    #[test]
    fn pure_cosine_extremes() {
        let r = tighten_bounds(Interval::point(1.0), Interval::point(0.0), &[2.0]);
        assert_eq!(r.hi, 1.0);
        assert_eq!(r.lo, -1.0);
    }

    #[test]
    fn worked_example_matches_closed_form() {
        // alpha in [-1, 2], beta in [-1, 3], gamma = 2:
        // upper = sqrt(4 + 4*9) = sqrt(40), lower = -sqrt(4 + 4*1) = -sqrt(8).
        let r = tighten_bounds(Interval::new(-1.0, 2.0), Interval::new(-1.0, 3.0), &[2.0]);
        assert!((r.hi - 40.0_f64.sqrt()).abs() < 1e-12);
        assert!((r.lo + 8.0_f64.sqrt()).abs() < 1e-12);
        let (ghi, glo) = grid_max_min(Interval::new(-1.0, 2.0), Interval::new(-1.0, 3.0), &[2.0]);
        assert!((r.hi - ghi).abs() < 2e-3);
        assert!((r.lo - glo).abs() < 2e-3);
    }

    #[test]
    fn closed_form_matches_grid_on_random_cases() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let a1 = rng.gen_range(-3.0..3.0);
            let a2 = rng.gen_range(-3.0..3.0);
            let b1 = rng.gen_range(-3.0..3.0);
            let b2 = rng.gen_range(-3.0..3.0);
            let alpha = Interval::new(a1.min(a2), a1.max(a2));
            let beta = Interval::new(b1.min(b2), b1.max(b2));
            let gammas: Vec<f64> = (0..rng.gen_range(1..4))
                .map(|_| rng.gen_range(0.1..3.0))
                .collect();
            let r = tighten_bounds(alpha, beta, &gammas);
            let (ghi, glo) = grid_max_min(alpha, beta, &gammas);
            assert!(r.hi >= ghi - 1e-9, "upper bound below grid: {} < {}", r.hi, ghi);
            assert!(r.lo <= glo + 1e-9, "lower bound above grid: {} > {}", r.lo, glo);
            assert!((r.hi - ghi).abs() < 2e-3, "upper slack: {} vs {}", r.hi, ghi);
            assert!((r.lo - glo).abs() < 2e-3, "lower slack: {} vs {}", r.lo, glo);
        }
    }

    #[test]
    fn entry_range_on_full_circle_is_no_looser_than_closed_form() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a1 = rng.gen_range(-2.0..2.0);
            let a2 = rng.gen_range(-2.0..2.0);
            let b1 = rng.gen_range(-2.0..2.0);
            let b2 = rng.gen_range(-2.0..2.0);
            let alpha = Interval::new(a1.min(a2), a1.max(a2));
            let beta = Interval::new(b1.min(b2), b1.max(b2));
            let gammas = [rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0)];
            let per_gamma = entry_range(alpha, beta, &gammas, FULL);
            let closed = tighten_bounds(alpha, beta, &gammas);
            assert!(per_gamma.hi <= closed.hi + 1e-12);
            assert!(per_gamma.lo >= closed.lo - 1e-12);
            // And it is still sound against the grid.
            let (ghi, glo) = grid_max_min(alpha, beta, &gammas);
            assert!(per_gamma.hi >= ghi - 1e-9);
            assert!(per_gamma.lo <= glo + 1e-9);
        }
    }

    #[test]
    fn recursive_boxes_contain_random_three_layer_states() {
        use rand::{Rng, SeedableRng};
        let indices = [2.35, 1.38];
        let mut boxes = vec![TildeBox::identity()];
        for _ in 0..3 {
            boxes.push(propagate_layer(boxes.last().unwrap(), &indices, FULL));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100_000 {
            let mut w = super::super::TildeMatrix::identity();
            for step in 1..=3 {
                let a = indices[rng.gen_range(0..indices.len())];
                let sigma: f64 = rng.gen_range(0.0..PI);
                w = w.mul(&super::super::TildeMatrix {
                    m11: sigma.cos(),
                    m12: sigma.sin() / a,
                    m21: a * sigma.sin(),
                    m22: sigma.cos(),
                });
                assert!(boxes[step].contains(&w, 1e-9));
            }
        }
    }
}
