//! Closed-interval arithmetic for the bound-propagation machinery.

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}] is inverted");
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_with_tol(&self, v: f64, tol: f64) -> bool {
        self.lo - tol <= v && v <= self.hi + tol
    }

    pub fn add(&self, other: Interval) -> Interval {
        Interval::new(self.lo + other.lo, self.hi + other.hi)
    }

    pub fn neg(&self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }

    pub fn scale(&self, c: f64) -> Interval {
        if c >= 0.0 {
            Interval::new(self.lo * c, self.hi * c)
        } else {
            Interval::new(self.hi * c, self.lo * c)
        }
    }

    /// Largest absolute value attained on the interval.
    pub fn max_abs(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Range of `x^2` for `x` in the interval.
    pub fn square(&self) -> Interval {
        let hi = self.max_abs();
        let lo = if self.contains(0.0) {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        };
        Interval::new(lo * lo, hi * hi)
    }

    pub fn hull(&self, other: Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }
}
