//! Genotype lattice, growth-data-driven transition matrices, and the drug
//! sequencing solve path.
//!
//! Genotypes are bit strings of length `g`; only pairs at Hamming distance
//! one can exchange probability mass (strong selection, weak mutation). The
//! string-to-index convention is little-endian: character `i` of the label
//! maps to bit `i` of the index, so the wild type `00..0` is index 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::{ChainProblem, FamilySpec, ObjectiveSpec};
use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::milp::{solve_bb, BbOptions, FiniteFamily, SolveReport};

/// The lattice of genotypes over `g` alleles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenotypeSpace {
    pub alleles: usize,
}

impl GenotypeSpace {
    pub fn new(alleles: usize) -> Self {
        Self { alleles }
    }

    /// Number of states, `2^g`.
    pub fn n_states(&self) -> usize {
        1 << self.alleles
    }

    pub fn wild_type(&self) -> usize {
        0
    }

    /// Genotype label, character i = allele i.
    pub fn label(&self, genotype: usize) -> String {
        (0..self.alleles)
            .map(|i| if genotype >> i & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    /// Parse a bit-string label.
    pub fn parse_label(&self, label: &str) -> Result<usize> {
        if label.len() != self.alleles {
            return Err(Error::InvalidInput(format!(
                "genotype {label} has {} characters, expected {}",
                label.len(),
                self.alleles
            )));
        }
        let mut genotype = 0;
        for (i, ch) in label.chars().enumerate() {
            match ch {
                '1' => genotype |= 1 << i,
                '0' => {}
                other => {
                    return Err(Error::InvalidInput(format!(
                        "genotype {label} contains {other}"
                    )))
                }
            }
        }
        Ok(genotype)
    }

    pub fn hamming(&self, a: usize, b: usize) -> usize {
        ((a ^ b) as u64).count_ones() as usize
    }
}

/// All genotypes at Hamming distance one, ordered by flipped allele.
pub fn neighbors(space: &GenotypeSpace, genotype: usize) -> Vec<usize> {
    (0..space.alleles).map(|i| genotype ^ (1 << i)).collect()
}

/// Growth rates `rates[drug][genotype]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthTable {
    pub drug_names: Vec<String>,
    pub alleles: usize,
    pub rates: Vec<Vec<f64>>,
}

impl GrowthTable {
    pub fn space(&self) -> GenotypeSpace {
        GenotypeSpace::new(self.alleles)
    }

    pub fn n_drugs(&self) -> usize {
        self.rates.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = 1 << self.alleles;
        if self.rates.len() != self.drug_names.len() {
            return Err(Error::DimensionMismatch(
                "drug names and rate rows differ".into(),
            ));
        }
        for (k, row) in self.rates.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "drug {} has {} rates for {} genotypes",
                    self.drug_names[k],
                    row.len(),
                    d
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "drug {} has a non-finite growth rate",
                    self.drug_names[k]
                )));
            }
        }
        Ok(())
    }
}

/// Row-substochastic genotype transition matrix.
pub type TransitionMatrix = Mat;

/// What to do with a genotype that neither strictly improves toward any
/// neighbor nor strictly dominates all of them: its row is undefined by the
/// growth-gain rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieMode {
    /// Leave the row empty (it sums to zero): mass is lost, matching the
    /// published convention read literally.
    #[default]
    Strict,
    /// Add the missing mass to the diagonal so every row sums to one.
    AbsorbResidual,
}

fn build_matrices<F>(growth: &GrowthTable, mode: TieMode, weight: F) -> Result<Vec<TransitionMatrix>>
where
    F: Fn(f64, f64) -> f64,
{
    growth.validate()?;
    let space = growth.space();
    let d = space.n_states();
    let mut out = Vec::with_capacity(growth.n_drugs());
    for row in &growth.rates {
        let mut t = Mat::zeros(d, d);
        for j in 0..d {
            let nbrs = neighbors(&space, j);
            let weights: Vec<f64> = nbrs.iter().map(|&n| weight(row[j], row[n])).collect();
            let total: f64 = weights.iter().sum();
            if total > 0.0 {
                for (&n, &w) in nbrs.iter().zip(&weights) {
                    if w > 0.0 {
                        t.set(j, n, w / total);
                    }
                }
            } else if nbrs.iter().all(|&n| row[j] > row[n]) {
                // Strictly dominant over every neighbor: absorbing.
                t.set(j, j, 1.0);
            } else if mode == TieMode::AbsorbResidual {
                t.set(j, j, 1.0);
            }
        }
        out.push(t);
    }
    Ok(out)
}

/// Correlated probability model: transition probability proportional to the
/// positive growth-rate gain, normalized over improving neighbors (0/0 = 0).
pub fn build_cpm(growth: &GrowthTable, mode: TieMode) -> Result<Vec<TransitionMatrix>> {
    build_matrices(growth, mode, |from, to| (to - from).max(0.0))
}

/// Equal probability model: uniform over strictly improving neighbors.
pub fn build_epm(growth: &GrowthTable, mode: TieMode) -> Result<Vec<TransitionMatrix>> {
    build_matrices(growth, mode, |from, to| if to > from { 1.0 } else { 0.0 })
}

/// Synthetic growth rates: 0, 1, 2 with probabilities 1/3, 1/6, 1/2.
pub fn gen_synthetic(alleles: usize, n_drugs: usize, seed: u64) -> Result<GrowthTable> {
    if alleles == 0 || alleles > 12 {
        return Err(Error::InvalidInput(format!(
            "allele count {alleles} outside supported range 1..=12"
        )));
    }
    let d = 1 << alleles;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rates = (0..n_drugs)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let u: f64 = rng.gen_range(0.0..1.0);
                    if u < 1.0 / 3.0 {
                        0.0
                    } else if u < 0.5 {
                        1.0
                    } else {
                        2.0
                    }
                })
                .collect()
        })
        .collect();
    Ok(GrowthTable {
        drug_names: (0..n_drugs).map(|k| format!("D{:02}", k + 1)).collect(),
        alleles,
        rates,
    })
}

/// Options for [`solve_atm`]; wraps the branch-and-bound options.
pub type AtmOptions = BbOptions;

/// Solve the drug-sequencing problem: the probability of moving from
/// `initial` to `target` in exactly `n_steps` transitions, maximized over
/// static drug sequences.
pub fn solve_atm(
    matrices: &[TransitionMatrix],
    initial: usize,
    target: usize,
    n_steps: usize,
    options: &AtmOptions,
) -> Result<SolveReport> {
    let problem = atm_problem(matrices, initial, target, n_steps)?;
    solve_bb(&problem, options)
}

/// Assemble the chain problem for a drug-sequencing instance.
pub fn atm_problem(
    matrices: &[TransitionMatrix],
    initial: usize,
    target: usize,
    n_steps: usize,
) -> Result<ChainProblem> {
    let family = FiniteFamily::new(matrices.to_vec())?;
    let d = family.dim();
    if initial >= d || target >= d {
        return Err(Error::InvalidInput(format!(
            "genotype index out of range for {d} states"
        )));
    }
    for (k, m) in family.matrices().iter().enumerate() {
        for i in 0..d {
            let row_sum: f64 = m.row(i).iter().sum();
            if row_sum > 1.0 + 1e-9 || m.row(i).iter().any(|v| *v < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "matrix {k} row {i} is not substochastic"
                )));
            }
        }
    }
    let mut p = vec![0.0; d];
    p[initial] = 1.0;
    let mut q = vec![0.0; d];
    q[target] = 1.0;
    Ok(ChainProblem {
        initial: Mat::row_vector(&p),
        horizon: n_steps,
        family: FamilySpec::Finite(family),
        objective: ObjectiveSpec::Linear(q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::enumerate_exact;

    #[test]
    fn neighbor_structure() {
        let space = GenotypeSpace::new(3);
        assert_eq!(neighbors(&space, 0b000), vec![0b001, 0b010, 0b100]);
        let space4 = GenotypeSpace::new(4);
        for j in 0..space4.n_states() {
            let nbrs = neighbors(&space4, j);
            assert_eq!(nbrs.len(), 4);
            for n in nbrs {
                assert_eq!(space4.hamming(j, n), 1);
                assert!(neighbors(&space4, n).contains(&j));
            }
        }
    }

    #[test]
    fn label_round_trip_is_little_endian() {
        let space = GenotypeSpace::new(4);
        assert_eq!(space.parse_label("1000").unwrap(), 1);
        assert_eq!(space.parse_label("0001").unwrap(), 8);
        for j in 0..space.n_states() {
            assert_eq!(space.parse_label(&space.label(j)).unwrap(), j);
        }
        assert!(space.parse_label("10").is_err());
        assert!(space.parse_label("10x0").is_err());
    }

    #[test]
    fn cpm_single_allele() {
        let growth = GrowthTable {
            drug_names: vec!["A".into()],
            alleles: 1,
            rates: vec![vec![1.0, 3.0]],
        };
        let t = &build_cpm(&growth, TieMode::Strict).unwrap()[0];
        assert_eq!(t.get(0, 1), 1.0);
        assert_eq!(t.get(1, 1), 1.0); // strictly dominant: absorbing
        assert_eq!(t.get(1, 0), 0.0);
    }

    #[test]
    fn cpm_gains_normalize_and_epm_flattens() {
        // Hand oracle, little-endian: rates indexed 00, 10, 01, 11.
        // From 00: gains 2 (to 10) and 1 (to 01) -> 2/3, 1/3.
        let growth = GrowthTable {
            drug_names: vec!["A".into()],
            alleles: 2,
            rates: vec![vec![0.0, 2.0, 1.0, 3.0]],
        };
        let cpm = &build_cpm(&growth, TieMode::Strict).unwrap()[0];
        assert!((cpm.get(0, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((cpm.get(0, 2) - 1.0 / 3.0).abs() < 1e-15);
        let epm = &build_epm(&growth, TieMode::Strict).unwrap()[0];
        assert!((epm.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((epm.get(0, 2) - 0.5).abs() < 1e-15);
        // Shared zero pattern.
        for j in 0..4 {
            for n in 0..4 {
                assert_eq!(cpm.get(j, n) > 0.0, epm.get(j, n) > 0.0);
            }
        }
    }

    #[test]
    fn all_equal_rows_lose_mass_in_strict_mode() {
        let growth = GrowthTable {
            drug_names: vec!["A".into()],
            alleles: 2,
            rates: vec![vec![1.0, 1.0, 1.0, 1.0]],
        };
        let strict = &build_cpm(&growth, TieMode::Strict).unwrap()[0];
        for j in 0..4 {
            let sum: f64 = strict.row(j).iter().sum();
            assert_eq!(sum, 0.0);
        }
        let absorb = &build_cpm(&growth, TieMode::AbsorbResidual).unwrap()[0];
        for j in 0..4 {
            let sum: f64 = absorb.row(j).iter().sum();
            assert_eq!(sum, 1.0);
        }
    }

    #[test]
    fn sswm_support_and_row_sums() {
        let growth = gen_synthetic(4, 6, 7).unwrap();
        let space = growth.space();
        for mode in [TieMode::Strict, TieMode::AbsorbResidual] {
            for t in build_cpm(&growth, mode).unwrap() {
                for j in 0..space.n_states() {
                    let sum: f64 = t.row(j).iter().sum();
                    if mode == TieMode::AbsorbResidual {
                        assert!((sum - 1.0).abs() < 1e-12);
                    } else {
                        assert!(sum.abs() < 1e-12 || (sum - 1.0).abs() < 1e-12);
                    }
                    for n in 0..space.n_states() {
                        if t.get(j, n) != 0.0 {
                            assert!(j == n || space.hamming(j, n) == 1);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn synthetic_generation_is_seeded_and_distributed() {
        let a = gen_synthetic(3, 5, 42).unwrap();
        let b = gen_synthetic(3, 5, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_synthetic(3, 5, 43).unwrap());

        // Empirical frequencies over 1e5 draws within 0.01 of (1/3, 1/6, 1/2).
        let big = gen_synthetic(5, 3125, 1).unwrap();
        let mut counts = [0usize; 3];
        let mut total = 0usize;
        for row in &big.rates {
            for &v in row {
                counts[v as usize] += 1;
                total += 1;
            }
        }
        assert!(total >= 100_000);
        let freqs: Vec<f64> = counts.iter().map(|c| *c as f64 / total as f64).collect();
        assert!((freqs[0] - 1.0 / 3.0).abs() < 0.01, "{freqs:?}");
        assert!((freqs[1] - 1.0 / 6.0).abs() < 0.01, "{freqs:?}");
        assert!((freqs[2] - 0.5).abs() < 0.01, "{freqs:?}");

        // Largest published synthetic scale: g=5 gives 32 states, 30 drugs.
        let table = gen_synthetic(5, 30, 2).unwrap();
        assert_eq!(table.rates.len(), 30);
        assert_eq!(table.rates[0].len(), 32);
    }

    #[test]
    fn absorbing_wild_type_keeps_probability_one() {
        // One drug pushes 1 -> 0 deterministically and keeps 0 absorbing.
        let growth = GrowthTable {
            drug_names: vec!["A".into()],
            alleles: 1,
            rates: vec![vec![3.0, 1.0]],
        };
        let matrices = build_cpm(&growth, TieMode::Strict).unwrap();
        for n in 1..=4 {
            let report = solve_atm(&matrices, 1, 0, n, &BbOptions::default()).unwrap();
            assert!((report.optimal_value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hamming_distance_beyond_horizon_gives_zero() {
        let growth = gen_synthetic(4, 5, 11).unwrap();
        let matrices = build_epm(&growth, TieMode::Strict).unwrap();
        let space = growth.space();
        let initial = space.parse_label("1111").unwrap();
        let report = solve_atm(
            &matrices,
            initial,
            0,
            3,
            &BbOptions {
                gap: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(report.optimal_value, 0.0);
    }

    #[test]
    fn substochasticity_enforced() {
        let bad = Mat::from_rows(&[vec![0.7, 0.7], vec![0.0, 1.0]]).unwrap();
        assert!(solve_atm(&[bad], 0, 1, 2, &BbOptions::default()).is_err());
        let negative = Mat::from_rows(&[vec![-0.1, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(solve_atm(&[negative], 0, 1, 2, &BbOptions::default()).is_err());
    }

    #[test]
    fn raising_target_growth_never_hurts_epm_optimum() {
        // Conjecture-level check: pushing the target genotype's growth above
        // everything else (making it absorbing under every drug) should not
        // reduce the optimal probability of reaching it.
        for seed in 0..10u64 {
            let growth = gen_synthetic(3, 3, 100 + seed).unwrap();
            let target = 0usize;
            let n = 4;
            let before_m = build_epm(&growth, TieMode::Strict).unwrap();
            let before = enumerate_exact(
                &atm_problem(&before_m, 5, target, n).unwrap(),
                1e8,
            )
            .unwrap();

            let mut raised = growth.clone();
            let max_rate = raised
                .rates
                .iter()
                .flat_map(|r| r.iter())
                .fold(f64::NEG_INFINITY, |a, b| a.max(*b));
            for row in &mut raised.rates {
                row[target] = max_rate + 1.0;
            }
            let after_m = build_epm(&raised, TieMode::Strict).unwrap();
            let after = enumerate_exact(
                &atm_problem(&after_m, 5, target, n).unwrap(),
                1e8,
            )
            .unwrap();
            assert!(
                after.optimal_value >= before.optimal_value - 1e-12,
                "seed {seed}: {} -> {}",
                before.optimal_value,
                after.optimal_value
            );
        }
    }
}
