//! Chain problem model: a system state evolves by right-multiplication with
//! matrices chosen from a family, and the objective scores the final state.
//!
//! Thin-film chains are stored in the real "tilde" form (real diagonal,
//! imaginary off-diagonal entries of the underlying complex matrix), which is
//! closed under multiplication, so every state matrix here is real.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::matrix::Mat;
use crate::milp::FiniteFamily;
use crate::thinfilm::MaterialLibrary;

/// The family the step matrices are drawn from.
#[derive(Debug, Clone)]
pub enum FamilySpec {
    /// An explicit finite list of d x d matrices.
    Finite(FiniteFamily),
    /// The parametric thin-film transfer-matrix family at one wavelength.
    ThinFilm(MaterialLibrary),
}

/// Objective applied to the final state `w`.
#[derive(Debug, Clone)]
pub enum ObjectiveSpec {
    /// Linear functional `w . q`.
    Linear(Vec<f64>),
    /// Thin-film reflectance of the cumulative transfer matrix.
    Reflectance,
}

/// A horizon-N chain problem.
#[derive(Debug, Clone)]
pub struct ChainProblem {
    pub initial: Mat,
    pub horizon: usize,
    pub family: FamilySpec,
    pub objective: ObjectiveSpec,
}

impl ChainProblem {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        match &self.family {
            FamilySpec::Finite(f) => {
                f.validate()?;
                if self.initial.cols() != f.dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "initial state has {} columns, family is {}x{}",
                        self.initial.cols(),
                        f.dim(),
                        f.dim()
                    )));
                }
                if let ObjectiveSpec::Linear(q) = &self.objective {
                    if q.len() != f.dim() {
                        return Err(Error::DimensionMismatch(format!(
                            "objective has {} coefficients for dimension {}",
                            q.len(),
                            f.dim()
                        )));
                    }
                }
            }
            FamilySpec::ThinFilm(lib) => {
                lib.validate()?;
                if self.initial.rows() != 2 || self.initial.cols() != 2 {
                    return Err(Error::DimensionMismatch(
                        "thin-film chains act on 2x2 tilde matrices".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A realized trajectory `u_0, ..., u_N` with its chosen step matrices.
#[derive(Debug, Clone)]
pub struct ChainTrajectory {
    pub states: Vec<Mat>,
    pub choices: Vec<Mat>,
}

impl ChainTrajectory {
    pub fn final_state(&self) -> &Mat {
        self.states.last().expect("trajectory holds u_0")
    }

    /// Re-multiplies the recursion and reports the worst entry deviation.
    pub fn recursion_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (n, step) in self.choices.iter().enumerate() {
            let expected = self.states[n].mul(step).expect("validated dims");
            worst = worst.max(expected.max_abs_diff(&self.states[n + 1]));
        }
        worst
    }
}

/// Evolve `p` through the given step matrices: `u_n = u_{n-1} T_n`.
pub fn evolve_chain(p: &Mat, choices: &[Mat]) -> Result<ChainTrajectory> {
    let mut states = Vec::with_capacity(choices.len() + 1);
    states.push(p.clone());
    for step in choices {
        let next = states.last().unwrap().mul(step)?;
        states.push(next);
    }
    Ok(ChainTrajectory {
        states,
        choices: choices.to_vec(),
    })
}

/// Entrywise interval bounds on an r x d state matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox {
    pub lower: Mat,
    pub upper: Mat,
}

impl IntervalBox {
    pub fn point(m: &Mat) -> Self {
        Self {
            lower: m.clone(),
            upper: m.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.rows() != self.upper.rows() || self.lower.cols() != self.upper.cols() {
            return Err(Error::DimensionMismatch("box bound shapes differ".into()));
        }
        for (lo, hi) in self.lower.data().iter().zip(self.upper.data()) {
            if lo > hi {
                return Err(Error::InvalidInput(format!(
                    "box has inverted bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn entry(&self, i: usize, j: usize) -> Interval {
        Interval::new(self.lower.get(i, j), self.upper.get(i, j))
    }

    pub fn contains(&self, m: &Mat, tol: f64) -> bool {
        self.lower
            .data()
            .iter()
            .zip(self.upper.data())
            .zip(m.data())
            .all(|((lo, hi), v)| lo - tol <= *v && *v <= hi + tol)
    }

    fn hull(&self, other: &IntervalBox) -> IntervalBox {
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        for i in 0..lower.rows() {
            for j in 0..lower.cols() {
                lower.set(i, j, lower.get(i, j).min(other.lower.get(i, j)));
                upper.set(i, j, upper.get(i, j).max(other.upper.get(i, j)));
            }
        }
        IntervalBox { lower, upper }
    }

    /// Exact entrywise image of the box under right-multiplication by a fixed
    /// matrix: each output entry is a linear functional of one input row, so
    /// interval arithmetic per entry is tight.
    fn image(&self, step: &Mat) -> IntervalBox {
        let r = self.lower.rows();
        let d = step.cols();
        let mut lower = Mat::zeros(r, d);
        let mut upper = Mat::zeros(r, d);
        for i in 0..r {
            for j in 0..d {
                let mut acc = Interval::point(0.0);
                for l in 0..step.rows() {
                    acc = acc.add(self.entry(i, l).scale(step.get(l, j)));
                }
                lower.set(i, j, acc.lo);
                upper.set(i, j, acc.hi);
            }
        }
        IntervalBox { lower, upper }
    }
}

/// Propagate an initial box through `n_steps` choices from a finite family:
/// at each step, take the entrywise hull of the K one-step interval images.
/// Sound: every realizable state lies inside the box of its step.
pub fn propagate_box(box0: &IntervalBox, family: &FiniteFamily, n_steps: usize) -> Result<Vec<IntervalBox>> {
    box0.validate()?;
    family.validate()?;
    if box0.lower.cols() != family.dim() {
        return Err(Error::DimensionMismatch(format!(
            "box has {} columns, family dimension is {}",
            box0.lower.cols(),
            family.dim()
        )));
    }
    let mut boxes = Vec::with_capacity(n_steps + 1);
    boxes.push(box0.clone());
    for _ in 0..n_steps {
        let cur = boxes.last().unwrap();
        let mut next: Option<IntervalBox> = None;
        for step in family.matrices() {
            let img = cur.image(step);
            next = Some(match next {
                None => img,
                Some(acc) => acc.hull(&img),
            });
        }
        boxes.push(next.expect("family is non-empty"));
    }
    Ok(boxes)
}
