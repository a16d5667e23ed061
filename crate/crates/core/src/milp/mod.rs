//! Finite-family chain optimization: the per-step disjunctive extended
//! formulation, LP and value-iteration bounds, a branch-and-bound solver and
//! a brute-force enumeration oracle.

mod formulation;
mod solver;

pub use formulation::{
    build_extended_formulation, lp_bound, DisjunctiveFormulation, LinRow, UBox, VarInfo, VarKind,
};
pub use solver::{dp_bound, enumerate_exact, solve_bb, solve_bb_audited, AuditNode, DpTable};

use crate::error::{Error, Result};
use crate::matrix::Mat;

/// A finite family of square step matrices.
#[derive(Debug, Clone)]
pub struct FiniteFamily {
    matrices: Vec<Mat>,
}

impl FiniteFamily {
    pub fn new(matrices: Vec<Mat>) -> Result<Self> {
        let family = Self { matrices };
        family.validate()?;
        Ok(family)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.matrices.first() else {
            return Err(Error::InvalidInput("family needs at least one matrix".into()));
        };
        let d = first.rows();
        for (k, m) in self.matrices.iter().enumerate() {
            if m.rows() != d || m.cols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "family matrix {} is {}x{}, expected {}x{}",
                    k,
                    m.rows(),
                    m.cols(),
                    d,
                    d
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].rows()
    }

    pub fn matrices(&self) -> &[Mat] {
        &self.matrices
    }

    pub fn matrix(&self, k: usize) -> &Mat {
        &self.matrices[k]
    }

    pub fn all_nonnegative(&self) -> bool {
        self.matrices
            .iter()
            .all(|m| m.data().iter().all(|v| *v >= 0.0))
    }
}

/// Branch-and-bound node: a fixed prefix of family choices.
#[derive(Debug, Clone)]
pub struct BbNode {
    /// Chosen family index for steps `1..=depth()`.
    pub prefix: Vec<usize>,
    /// Upper bound on the best completion value of the prefix.
    pub bound: f64,
}

impl BbNode {
    pub fn root() -> Self {
        Self {
            prefix: Vec::new(),
            bound: f64::INFINITY,
        }
    }

    pub fn with_prefix(prefix: Vec<usize>) -> Self {
        Self {
            prefix,
            bound: f64::INFINITY,
        }
    }

    pub fn depth(&self) -> usize {
        self.prefix.len()
    }
}

/// Which relaxation supplies node bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    Lp,
    Dp,
    /// Minimum of the two; the LP is consulted only when the cheap DP bound
    /// fails to prune.
    Best,
}

/// Options for [`solve_bb`].
#[derive(Debug, Clone)]
pub struct BbOptions {
    /// Absolute optimality gap at termination.
    pub gap: f64,
    pub bound_mode: BoundMode,
    pub node_limit: Option<u64>,
    pub threads: usize,
}

impl Default for BbOptions {
    fn default() -> Self {
        Self {
            gap: 1e-3,
            bound_mode: BoundMode::Best,
            node_limit: None,
            threads: 1,
        }
    }
}

/// Outcome of a solve or enumeration run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveReport {
    pub optimal_value: f64,
    pub optimal_sequence: Vec<usize>,
    pub node_count: u64,
    pub lp_count: u64,
    pub wall_time_s: f64,
    /// Proven absolute gap: max over discarded bounds minus the incumbent.
    pub gap: f64,
    /// True when a node or time limit stopped the search early.
    pub limit_reached: bool,
}
