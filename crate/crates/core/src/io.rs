//! Data ingestion, formulation export, and report serialization.
//!
//! Formulations are exported as JSON rather than MPS because the thin-film
//! model carries bilinear terms that MPS cannot represent portably. All
//! variable references in terms are by declared name, so a file is
//! self-describing and round-trips losslessly.

use std::collections::BTreeSet;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lp::ConstraintSense;
use crate::milp::{DisjunctiveFormulation, SolveReport, VarKind};
use crate::thinfilm::{MaterialLibrary, StackDesign, TransferLayer};
use crate::timemachine::{GenotypeSpace, GrowthTable, TransitionMatrix};

// ---------------------------------------------------------------------------
// Refractive-index data
// ---------------------------------------------------------------------------

/// One row of the refractive-index table. Dielectrics carry `n_imag = 0`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RefractiveRow {
    pub material: String,
    pub wavelength_nm: f64,
    pub n_real: f64,
    pub n_imag: f64,
}

/// Parsed refractive-index table.
#[derive(Debug, Clone)]
pub struct RefractiveData {
    pub rows: Vec<RefractiveRow>,
}

pub fn parse_refractive_csv(path: impl AsRef<Path>) -> Result<RefractiveData> {
    let path = path.as_ref();
    let err = |message: String| Error::CsvData {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut rows: Vec<RefractiveRow> = Vec::new();
    let mut seen: BTreeSet<(String, u64)> = BTreeSet::new();
    for record in reader.deserialize() {
        let row: RefractiveRow = record?;
        if row.wavelength_nm <= 0.0 {
            return Err(err(format!(
                "non-positive wavelength {} for {}",
                row.wavelength_nm, row.material
            )));
        }
        if row.n_real <= 0.0 {
            return Err(err(format!(
                "non-positive index {} for {} at {} nm",
                row.n_real, row.material, row.wavelength_nm
            )));
        }
        let key = (row.material.clone(), row.wavelength_nm.to_bits());
        if !seen.insert(key) {
            return Err(err(format!(
                "duplicate entry for {} at {} nm",
                row.material, row.wavelength_nm
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(err("no data rows".into()));
    }
    Ok(RefractiveData { rows })
}

impl RefractiveData {
    /// Material library for one substrate at one wavelength. Lookup is by
    /// exact wavelength; rows with zero imaginary part become the coatings.
    pub fn library(&self, substrate: &str, wavelength_nm: f64) -> Result<MaterialLibrary> {
        let at_wavelength: Vec<&RefractiveRow> = self
            .rows
            .iter()
            .filter(|r| r.wavelength_nm == wavelength_nm)
            .collect();
        if at_wavelength.is_empty() {
            return Err(Error::InvalidInput(format!(
                "no refractive data at {wavelength_nm} nm (no interpolation is performed)"
            )));
        }
        let sub = at_wavelength
            .iter()
            .find(|r| r.material == substrate)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "substrate {substrate} has no entry at {wavelength_nm} nm"
                ))
            })?;
        let mut coating_names = Vec::new();
        let mut coating_indices = Vec::new();
        for row in &at_wavelength {
            if row.material != substrate && row.n_imag == 0.0 {
                coating_names.push(row.material.clone());
                coating_indices.push(row.n_real);
            }
        }
        let lib = MaterialLibrary {
            wavelength_nm,
            substrate_name: sub.material.clone(),
            substrate_index: Complex64::new(sub.n_real, sub.n_imag),
            coating_names,
            coating_indices,
        };
        lib.validate()?;
        Ok(lib)
    }
}

// ---------------------------------------------------------------------------
// Growth data
// ---------------------------------------------------------------------------

pub fn parse_growth_csv(path: impl AsRef<Path>) -> Result<GrowthTable> {
    let path = path.as_ref();
    let err = |message: String| Error::CsvData {
        path: path.display().to_string(),
        message,
    };
    #[derive(serde::Deserialize)]
    struct GrowthRow {
        drug: String,
        genotype: String,
        growth_rate: f64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut drug_names: Vec<String> = Vec::new();
    let mut cells: Vec<(usize, String, f64)> = Vec::new();
    let mut alleles: Option<usize> = None;
    for record in reader.deserialize() {
        let row: GrowthRow = record?;
        match alleles {
            None => alleles = Some(row.genotype.len()),
            Some(g) => {
                if row.genotype.len() != g {
                    return Err(err(format!(
                        "genotype {} has length {}, expected {}",
                        row.genotype,
                        row.genotype.len(),
                        g
                    )));
                }
            }
        }
        let k = match drug_names.iter().position(|d| *d == row.drug) {
            Some(k) => k,
            None => {
                drug_names.push(row.drug.clone());
                drug_names.len() - 1
            }
        };
        cells.push((k, row.genotype, row.growth_rate));
    }
    let alleles = alleles.ok_or_else(|| err("no data rows".into()))?;
    let space = GenotypeSpace::new(alleles);
    let d = space.n_states();
    let mut rates = vec![vec![f64::NAN; d]; drug_names.len()];
    for (k, genotype, rate) in cells {
        let j = space.parse_label(&genotype).map_err(|e| err(e.to_string()))?;
        if !rates[k][j].is_nan() {
            return Err(err(format!(
                "duplicate cell for drug {} genotype {}",
                drug_names[k], genotype
            )));
        }
        rates[k][j] = rate;
    }
    for (k, row) in rates.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if v.is_nan() {
                return Err(err(format!(
                    "drug {} is missing genotype {}",
                    drug_names[k],
                    space.label(j)
                )));
            }
        }
    }
    let table = GrowthTable {
        drug_names,
        alleles,
        rates,
    };
    table.validate()?;
    Ok(table)
}

pub fn write_growth_csv(path: impl AsRef<Path>, table: &GrowthTable) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["drug", "genotype", "growth_rate"])?;
    let space = table.space();
    for (k, name) in table.drug_names.iter().enumerate() {
        for j in 0..space.n_states() {
            writer.write_record([name.as_str(), &space.label(j), &format!("{}", table.rates[k][j])])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Long-format dump of transition matrices (nonzero entries only).
pub fn write_matrices_csv(
    path: impl AsRef<Path>,
    drug_names: &[String],
    matrices: &[TransitionMatrix],
    space: &GenotypeSpace,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["drug", "from", "to", "probability"])?;
    for (name, m) in drug_names.iter().zip(matrices) {
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let p = m.get(i, j);
                if p != 0.0 {
                    writer.write_record([
                        name.as_str(),
                        &space.label(i),
                        &space.label(j),
                        &format!("{p}"),
                    ])?;
                }
            }
        }
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Formulation JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulationKind {
    Milp,
    Miqcqp,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinTerm {
    pub var: String,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadTerm {
    pub var1: String,
    pub var2: String,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConstraintDecl {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub linear: Vec<LinTerm>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quadratic: Vec<QuadTerm>,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ObjectiveDecl {
    pub sense: String,
    #[serde(default)]
    pub constant: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub linear: Vec<LinTerm>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quadratic: Vec<QuadTerm>,
}

/// A solver-agnostic optimization model.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Formulation {
    pub kind: FormulationKind,
    pub variables: Vec<VarDecl>,
    pub constraints: Vec<ConstraintDecl>,
    pub objective: ObjectiveDecl,
}

impl Formulation {
    /// Every term must reference a declared variable.
    pub fn validate(&self) -> Result<()> {
        let names: BTreeSet<&str> = self.variables.iter().map(|v| v.name.as_str()).collect();
        if names.len() != self.variables.len() {
            return Err(Error::InvalidInput("duplicate variable names".into()));
        }
        let check = |var: &str| -> Result<()> {
            if names.contains(var) {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!(
                    "term references undeclared variable {var}"
                )))
            }
        };
        for c in &self.constraints {
            for t in &c.linear {
                check(&t.var)?;
            }
            for t in &c.quadratic {
                check(&t.var1)?;
                check(&t.var2)?;
            }
        }
        for t in &self.objective.linear {
            check(&t.var)?;
        }
        for t in &self.objective.quadratic {
            check(&t.var1)?;
            check(&t.var2)?;
        }
        Ok(())
    }

    pub fn n_binary(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }
}

/// Serialize the disjunctive MILP into the JSON schema.
pub fn milp_formulation(form: &DisjunctiveFormulation) -> Formulation {
    let name_of = |idx: usize| form.variables[idx].name.clone();
    let variables = form
        .variables
        .iter()
        .map(|v| VarDecl {
            name: v.name.clone(),
            kind: v.kind,
            lower: v.lower,
            upper: v.upper,
        })
        .collect();
    let constraints = form
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| ConstraintDecl {
            name: format!("row[{i}]"),
            linear: row
                .terms
                .iter()
                .map(|(idx, c)| LinTerm {
                    var: name_of(*idx),
                    coeff: *c,
                })
                .collect(),
            quadratic: Vec::new(),
            sense: row.sense,
            rhs: row.rhs,
        })
        .collect();
    Formulation {
        kind: FormulationKind::Milp,
        variables,
        constraints,
        objective: ObjectiveDecl {
            sense: "maximize".into(),
            constant: 0.0,
            linear: form
                .objective
                .iter()
                .map(|(idx, c)| LinTerm {
                    var: name_of(*idx),
                    coeff: *c,
                })
                .collect(),
            quadratic: Vec::new(),
        },
    }
}

/// Assemble the thin-film design problem as a mixed-integer quadratically
/// constrained model: bilinear chain rows per layer, the unit-circle rows,
/// the material disjunction, the final-matrix determinant cut and the
/// consecutive-material symmetry breaking rows. The objective maximizes the
/// reflectance denominator.
pub fn thinfilm_formulation(lib: &MaterialLibrary, n_layers: usize) -> Result<Formulation> {
    lib.validate()?;
    if n_layers == 0 {
        return Err(Error::InvalidInput("need at least one layer".into()));
    }
    let a_high = lib.coating_indices[lib.high_material()];
    let a_low = lib.coating_indices[lib.low_material()];
    let s = lib.substrate_index;

    let mut variables = Vec::new();
    let mut constraints = Vec::new();
    let mut var = |name: String, kind: VarKind, lower: f64, upper: f64| -> String {
        variables.push(VarDecl {
            name: name.clone(),
            kind,
            lower,
            upper,
        });
        name
    };

    // Cumulative-state bounds from interval propagation over the full range.
    let entry_names = ["u11", "u12", "u21", "u22"];
    let mut state_box = crate::thinfilm::TildeBox::identity();
    let mut u: Vec<[String; 4]> = Vec::with_capacity(n_layers + 1);
    for n in 0..=n_layers {
        if n > 0 {
            state_box = crate::thinfilm::propagate_tilde_layer(
                &state_box,
                &lib.coating_indices,
                crate::interval::Interval {
                    lo: 0.0,
                    hi: std::f64::consts::PI,
                },
            );
        }
        let bounds = [state_box.e11, state_box.e12, state_box.e21, state_box.e22];
        let block: Vec<String> = entry_names
            .iter()
            .zip(bounds)
            .map(|(e, iv)| var(format!("{e}[{n}]"), VarKind::Continuous, iv.lo, iv.hi))
            .collect();
        u.push([
            block[0].clone(),
            block[1].clone(),
            block[2].clone(),
            block[3].clone(),
        ]);
    }

    let mut c_vars = Vec::with_capacity(n_layers);
    let mut s_vars = Vec::with_capacity(n_layers);
    let mut t12 = Vec::with_capacity(n_layers);
    let mut t21 = Vec::with_capacity(n_layers);
    let mut x: Vec<Vec<String>> = Vec::with_capacity(n_layers);
    let mut v: Vec<Vec<String>> = Vec::with_capacity(n_layers);
    for n in 1..=n_layers {
        c_vars.push(var(format!("C[{n}]"), VarKind::Continuous, -1.0, 1.0));
        s_vars.push(var(format!("S[{n}]"), VarKind::Continuous, 0.0, 1.0));
        t12.push(var(format!("T12[{n}]"), VarKind::Continuous, 0.0, 1.0 / a_low));
        t21.push(var(format!("T21[{n}]"), VarKind::Continuous, 0.0, a_high));
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (m, _name) in lib.coating_names.iter().enumerate() {
            xs.push(var(format!("x[{n}][{m}]"), VarKind::Binary, 0.0, 1.0));
            vs.push(var(format!("v[{n}][{m}]"), VarKind::Continuous, 0.0, 1.0));
        }
        x.push(xs);
        v.push(vs);
    }

    let lin = |var: &str, coeff: f64| LinTerm {
        var: var.to_string(),
        coeff,
    };
    let quad = |v1: &str, v2: &str, coeff: f64| QuadTerm {
        var1: v1.to_string(),
        var2: v2.to_string(),
        coeff,
    };

    // u_0 is the identity.
    for (e, value) in entry_names.iter().zip([1.0, 0.0, 0.0, 1.0]) {
        constraints.push(ConstraintDecl {
            name: format!("init_{e}"),
            linear: vec![lin(&u[0][entry_names.iter().position(|x| x == e).unwrap()], 1.0)],
            quadratic: Vec::new(),
            sense: ConstraintSense::Eq,
            rhs: value,
        });
    }

    for n in 1..=n_layers {
        let i = n - 1;
        let prev = &u[n - 1];
        let cur = &u[n];
        // Bilinear chain rows: u_n = u_{n-1} * T_n in tilde arithmetic.
        let rows: [(&str, Vec<QuadTerm>); 4] = [
            (
                "11",
                vec![
                    quad(&prev[0], &c_vars[i], 1.0),
                    quad(&prev[1], &t21[i], -1.0),
                ],
            ),
            (
                "12",
                vec![
                    quad(&prev[0], &t12[i], 1.0),
                    quad(&prev[1], &c_vars[i], 1.0),
                ],
            ),
            (
                "21",
                vec![
                    quad(&prev[2], &c_vars[i], 1.0),
                    quad(&prev[3], &t21[i], 1.0),
                ],
            ),
            (
                "22",
                vec![
                    quad(&prev[3], &c_vars[i], 1.0),
                    quad(&prev[2], &t12[i], -1.0),
                ],
            ),
        ];
        for (entry, quadratic) in rows {
            let cur_var = match entry {
                "11" => &cur[0],
                "12" => &cur[1],
                "21" => &cur[2],
                _ => &cur[3],
            };
            constraints.push(ConstraintDecl {
                name: format!("chain[{n}][{entry}]"),
                linear: vec![lin(cur_var, -1.0)],
                quadratic,
                sense: ConstraintSense::Eq,
                rhs: 0.0,
            });
        }
        // C^2 + S^2 = 1.
        constraints.push(ConstraintDecl {
            name: format!("circle[{n}]"),
            linear: Vec::new(),
            quadratic: vec![
                quad(&c_vars[i], &c_vars[i], 1.0),
                quad(&s_vars[i], &s_vars[i], 1.0),
            ],
            sense: ConstraintSense::Eq,
            rhs: 1.0,
        });
        // Disjunction over materials.
        constraints.push(ConstraintDecl {
            name: format!("copy_sum[{n}]"),
            linear: v[i]
                .iter()
                .map(|vv| lin(vv, 1.0))
                .chain([lin(&s_vars[i], -1.0)])
                .collect(),
            quadratic: Vec::new(),
            sense: ConstraintSense::Eq,
            rhs: 0.0,
        });
        constraints.push(ConstraintDecl {
            name: format!("off_diag_12[{n}]"),
            linear: v[i]
                .iter()
                .zip(&lib.coating_indices)
                .map(|(vv, a)| lin(vv, 1.0 / a))
                .chain([lin(&t12[i], -1.0)])
                .collect(),
            quadratic: Vec::new(),
            sense: ConstraintSense::Eq,
            rhs: 0.0,
        });
        constraints.push(ConstraintDecl {
            name: format!("off_diag_21[{n}]"),
            linear: v[i]
                .iter()
                .zip(&lib.coating_indices)
                .map(|(vv, a)| lin(vv, *a))
                .chain([lin(&t21[i], -1.0)])
                .collect(),
            quadratic: Vec::new(),
            sense: ConstraintSense::Eq,
            rhs: 0.0,
        });
        constraints.push(ConstraintDecl {
            name: format!("choose_one[{n}]"),
            linear: x[i].iter().map(|xx| lin(xx, 1.0)).collect(),
            quadratic: Vec::new(),
            sense: ConstraintSense::Eq,
            rhs: 1.0,
        });
        for (m, (vv, xx)) in v[i].iter().zip(&x[i]).enumerate() {
            constraints.push(ConstraintDecl {
                name: format!("copy_bound[{n}][{m}]"),
                linear: vec![lin(vv, 1.0), lin(xx, -1.0)],
                quadratic: Vec::new(),
                sense: ConstraintSense::Le,
                rhs: 0.0,
            });
        }
    }

    // Determinant cut at the final matrix only.
    let w = &u[n_layers];
    constraints.push(ConstraintDecl {
        name: "det_cut".into(),
        linear: Vec::new(),
        quadratic: vec![quad(&w[0], &w[3], 1.0), quad(&w[1], &w[2], 1.0)],
        sense: ConstraintSense::Eq,
        rhs: 1.0,
    });

    // Symmetry breaking: consecutive layers use different materials.
    for n in 1..n_layers {
        for m in 0..lib.n_materials() {
            constraints.push(ConstraintDecl {
                name: format!("symmetry[{n}][{m}]"),
                linear: vec![lin(&x[n - 1][m], 1.0), lin(&x[n][m], 1.0)],
                quadratic: Vec::new(),
                sense: ConstraintSense::Le,
                rhs: 1.0,
            });
        }
    }

    // Maximize the reflectance denominator D(w).
    let norm = s.norm_sqr();
    let objective = ObjectiveDecl {
        sense: "maximize".into(),
        constant: 2.0 * s.re,
        linear: Vec::new(),
        quadratic: vec![
            quad(&w[0], &w[0], 1.0),
            quad(&w[0], &w[1], -2.0 * s.im),
            quad(&w[1], &w[1], norm),
            quad(&w[2], &w[2], 1.0),
            quad(&w[2], &w[3], 2.0 * s.im),
            quad(&w[3], &w[3], norm),
        ],
    };

    let formulation = Formulation {
        kind: FormulationKind::Miqcqp,
        variables,
        constraints,
        objective,
    };
    formulation.validate()?;
    Ok(formulation)
}

pub fn write_formulation(path: impl AsRef<Path>, formulation: &Formulation) -> Result<()> {
    formulation.validate()?;
    let json = serde_json::to_string_pretty(formulation)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn read_formulation(path: impl AsRef<Path>) -> Result<Formulation> {
    let text = std::fs::read_to_string(path)?;
    let formulation: Formulation = serde_json::from_str(&text)?;
    formulation.validate()?;
    Ok(formulation)
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Round to 12 significant digits; report fields go through this so output
/// is stable across platforms.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// JSON report for a sequencing solve. Timing fields are omitted when
/// `with_timing` is false so reports are byte-identical across runs.
pub fn solve_report_json(
    report: &SolveReport,
    drug_names: Option<&[String]>,
    with_timing: bool,
) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    map.insert("optimal_value".into(), sig12(report.optimal_value).into());
    map.insert(
        "optimal_sequence".into(),
        report.optimal_sequence.clone().into(),
    );
    if let Some(names) = drug_names {
        let labels: Vec<String> = report
            .optimal_sequence
            .iter()
            .map(|k| names.get(*k).cloned().unwrap_or_else(|| format!("{k}")))
            .collect();
        map.insert("sequence_names".into(), labels.into());
    }
    map.insert("node_count".into(), report.node_count.into());
    map.insert("lp_count".into(), report.lp_count.into());
    map.insert("gap".into(), sig12(report.gap).into());
    map.insert("limit_reached".into(), report.limit_reached.into());
    if with_timing {
        map.insert("wall_time_s".into(), sig12(report.wall_time_s).into());
    }
    serde_json::Value::Object(map)
}

/// JSON description of a stack design.
pub fn stack_design_json(design: &StackDesign, lib: &MaterialLibrary) -> serde_json::Value {
    let layers: Vec<serde_json::Value> = design
        .layers
        .iter()
        .enumerate()
        .map(|(i, layer)| layer_json(i, layer, lib))
        .collect();
    serde_json::json!({
        "substrate": lib.substrate_name,
        "wavelength_nm": sig12(lib.wavelength_nm),
        "reflectance": sig12(design.reflectance),
        "provenance": design.provenance,
        "layers": layers,
    })
}

fn layer_json(i: usize, layer: &TransferLayer, lib: &MaterialLibrary) -> serde_json::Value {
    let name = lib
        .coating_names
        .get(layer.material)
        .cloned()
        .unwrap_or_else(|| format!("material{}", layer.material));
    serde_json::json!({
        "layer": i + 1,
        "material": name,
        "c": sig12(layer.c),
        "s": sig12(layer.s),
        "sigma_rad": sig12(layer.sigma()),
        "thickness_nm": sig12(layer.thickness_nm(lib).unwrap_or(f64::NAN)),
    })
}

/// Per-layer thickness table.
pub fn write_design_csv(
    path: impl AsRef<Path>,
    design: &StackDesign,
    lib: &MaterialLibrary,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["layer", "material", "c", "s", "sigma_rad", "thickness_nm"])?;
    for (i, layer) in design.layers.iter().enumerate() {
        let name = lib
            .coating_names
            .get(layer.material)
            .cloned()
            .unwrap_or_else(|| format!("material{}", layer.material));
        writer.write_record([
            format!("{}", i + 1),
            name,
            format!("{}", sig12(layer.c)),
            format!("{}", sig12(layer.s)),
            format!("{}", sig12(layer.sigma())),
            format!("{}", sig12(layer.thickness_nm(lib)?)),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn refractive_parsing_and_library() {
        let f = write_tmp(
            "material,wavelength_nm,n_real,n_imag\n\
             Tungsten,450,3.40,2.69\n\
             SiO2,450,1.4656,0\n\
             TiO2,450,2.8134,0\n\
             MgF2,450,1.3815,0\n\
             Al2O3,450,1.7746,0\n\
             Tungsten,600,3.58,2.92\n",
        );
        let data = parse_refractive_csv(f.path()).unwrap();
        let lib = data.library("Tungsten", 450.0).unwrap();
        assert_eq!(lib.n_materials(), 4);
        assert_eq!(lib.substrate_index.im, 2.69);
        assert!(data.library("Tungsten", 500.0).is_err());
        assert!(data.library("Molybdenum", 450.0).is_err());
    }

    #[test]
    fn refractive_error_cases() {
        let empty = write_tmp("material,wavelength_nm,n_real,n_imag\n");
        assert!(parse_refractive_csv(empty.path()).is_err());
        let dup = write_tmp(
            "material,wavelength_nm,n_real,n_imag\nA,450,1.5,0\nA,450,1.6,0\n",
        );
        assert!(parse_refractive_csv(dup.path()).is_err());
        let nonpos = write_tmp("material,wavelength_nm,n_real,n_imag\nA,450,-1.0,0\n");
        assert!(parse_refractive_csv(nonpos.path()).is_err());
    }

    #[test]
    fn growth_parsing_infers_shape() {
        let f = write_tmp(
            "drug,genotype,growth_rate\n\
             A,00,1.0\nA,10,2.0\nA,01,0.5\nA,11,1.5\n\
             B,00,0.0\nB,10,1.0\nB,01,2.0\nB,11,3.0\n",
        );
        let table = parse_growth_csv(f.path()).unwrap();
        assert_eq!(table.n_drugs(), 2);
        assert_eq!(table.alleles, 2);
        assert_eq!(table.rates[0][1], 2.0); // genotype "10" is index 1
        assert_eq!(table.rates[1][2], 2.0); // genotype "01" is index 2
    }

    #[test]
    fn growth_error_cases() {
        let missing = write_tmp(
            "drug,genotype,growth_rate\nA,00,1.0\nA,10,2.0\nA,01,0.5\n",
        );
        let err = parse_growth_csv(missing.path()).unwrap_err().to_string();
        assert!(err.contains('A') && err.contains("11"), "{err}");
        let ragged = write_tmp("drug,genotype,growth_rate\nA,00,1.0\nA,100,2.0\n");
        assert!(parse_growth_csv(ragged.path()).is_err());
        let dup = write_tmp(
            "drug,genotype,growth_rate\nA,0,1.0\nA,0,2.0\nA,1,0.5\n",
        );
        assert!(parse_growth_csv(dup.path()).is_err());
    }

    #[test]
    fn growth_round_trip() {
        let table = crate::timemachine::gen_synthetic(3, 4, 9).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_growth_csv(f.path(), &table).unwrap();
        let back = parse_growth_csv(f.path()).unwrap();
        assert_eq!(table, back);
    }

    #[test]
    fn sig12_rounds() {
        assert_eq!(sig12(0.2871234567891234), 0.287123456789);
        assert_eq!(sig12(0.0), 0.0);
        assert_eq!(sig12(1.0), 1.0);
    }
}
