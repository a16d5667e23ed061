//! Solvers for optimization problems whose feasible region is a product of
//! matrices chosen from a family.
//!
//! Two concrete problem classes are covered:
//!
//! * finite families with a linear objective (drug-sequencing / antibiotics
//!   time machine), solved by a disjunctive-formulation branch-and-bound with
//!   LP and value-iteration bounds ([`milp`], [`timemachine`]);
//! * the mixed discrete/continuous family of thin-film transfer matrices with
//!   a reflectance objective, solved by a spatial branch-and-bound with
//!   interval bound tightening ([`thinfilm`]).
//!
//! Shared plumbing: a dense bounded-variable simplex ([`lp`]), the chain
//! model and interval outer approximation ([`chain`]), and data/formulation
//! I/O ([`io`]).

pub mod chain;
pub mod error;
pub mod interval;
pub mod io;
pub mod lp;
pub mod matrix;
pub mod milp;
pub mod thinfilm;
pub mod timemachine;

pub use chain::{
    evolve_chain, propagate_box, ChainProblem, ChainTrajectory, FamilySpec, IntervalBox,
    ObjectiveSpec,
};
pub use error::{Error, Result};
pub use interval::Interval;
pub use lp::{solve_lp, ConstraintSense, LpProblem, LpSolution, LpStatus};
pub use matrix::Mat;
pub use milp::{
    build_extended_formulation, dp_bound, enumerate_exact, lp_bound, solve_bb, BbNode, BbOptions,
    BoundMode, DisjunctiveFormulation, FiniteFamily, SolveReport, UBox,
};
pub use thinfilm::{
    denominator_d, local_refine, quarter_wave_heuristic, reflectance_of,
    reflectance_via_denominator, solve_thinfilm, tighten_bounds, transfer_matrix, MaterialLibrary,
    Provenance, StackDesign, ThinFilmOptions, TildeMatrix, TransferLayer,
};
pub use timemachine::{
    build_cpm, build_epm, gen_synthetic, neighbors, solve_atm, GenotypeSpace, GrowthTable,
    TieMode, TransitionMatrix,
};
