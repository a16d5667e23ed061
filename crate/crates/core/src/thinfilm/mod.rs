//! Multi-layer thin-film optics and the spatial branch-and-bound that
//! maximizes reflectance over material choices and layer thicknesses.
//!
//! All transfer matrices live in the real tilde form: the underlying complex
//! matrix has a real diagonal and purely imaginary off-diagonal, so four
//! reals suffice and the form is closed under multiplication.

mod bounds;
mod solver;

pub use bounds::{d_upper, propagate_layer as propagate_tilde_layer, tighten_bounds, TildeBox};
pub use solver::{local_refine, solve_thinfilm, solve_thinfilm_audited, ThinFilmAuditNode, ThinFilmOptions};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Refractive indices available at one wavelength: one metallic substrate
/// (complex; the imaginary part models reflection loss) and the dielectric
/// coating materials (real, greater than one).
#[derive(Debug, Clone)]
pub struct MaterialLibrary {
    pub wavelength_nm: f64,
    pub substrate_name: String,
    pub substrate_index: Complex64,
    pub coating_names: Vec<String>,
    pub coating_indices: Vec<f64>,
}

impl MaterialLibrary {
    pub fn validate(&self) -> Result<()> {
        if self.wavelength_nm <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "wavelength must be positive, got {}",
                self.wavelength_nm
            )));
        }
        if self.substrate_index.re <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "substrate index must have positive real part, got {}",
                self.substrate_index
            )));
        }
        if self.coating_indices.is_empty() {
            return Err(Error::InvalidInput("no coating materials".into()));
        }
        if self.coating_names.len() != self.coating_indices.len() {
            return Err(Error::DimensionMismatch(
                "coating names and indices differ in length".into(),
            ));
        }
        for (name, &a) in self.coating_names.iter().zip(&self.coating_indices) {
            if a <= 1.0 {
                return Err(Error::InvalidInput(format!(
                    "coating index of {name} must exceed 1, got {a}"
                )));
            }
        }
        Ok(())
    }

    pub fn n_materials(&self) -> usize {
        self.coating_indices.len()
    }

    pub fn index_of(&self, material: usize) -> Result<f64> {
        self.coating_indices
            .get(material)
            .copied()
            .ok_or(Error::UnknownMaterial(material))
    }

    /// Material with the highest refractive index.
    pub fn high_material(&self) -> usize {
        let mut best = 0;
        for (m, &a) in self.coating_indices.iter().enumerate() {
            if a > self.coating_indices[best] {
                best = m;
            }
        }
        best
    }

    /// Material with the lowest refractive index.
    pub fn low_material(&self) -> usize {
        let mut best = 0;
        for (m, &a) in self.coating_indices.iter().enumerate() {
            if a < self.coating_indices[best] {
                best = m;
            }
        }
        best
    }
}

/// Real representation of a complex 2x2 matrix with real diagonal and
/// imaginary off-diagonal: diagonal entries store the real part, off-diagonal
/// entries the imaginary part.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TildeMatrix {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl TildeMatrix {
    pub fn identity() -> Self {
        Self {
            m11: 1.0,
            m12: 0.0,
            m21: 0.0,
            m22: 1.0,
        }
    }

    /// Product of the underlying complex matrices, expressed in tilde form.
    /// The cross terms pick up a minus sign from i^2.
    pub fn mul(&self, r: &TildeMatrix) -> TildeMatrix {
        TildeMatrix {
            m11: self.m11 * r.m11 - self.m12 * r.m21,
            m12: self.m11 * r.m12 + self.m12 * r.m22,
            m21: self.m21 * r.m11 + self.m22 * r.m21,
            m22: self.m22 * r.m22 - self.m21 * r.m12,
        }
    }

    /// Determinant of the underlying complex matrix.
    pub fn det(&self) -> f64 {
        self.m11 * self.m22 + self.m12 * self.m21
    }

    pub fn neg(&self) -> TildeMatrix {
        TildeMatrix {
            m11: -self.m11,
            m12: -self.m12,
            m21: -self.m21,
            m22: -self.m22,
        }
    }
}

/// One coating layer: a material and the (C, S) = (cos, sin) pair of its
/// phase thickness, with S >= 0.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TransferLayer {
    pub material: usize,
    pub c: f64,
    pub s: f64,
}

impl TransferLayer {
    pub fn from_sigma(material: usize, sigma: f64) -> Self {
        Self {
            material,
            c: sigma.cos(),
            s: sigma.sin().max(0.0),
        }
    }

    /// Phase thickness in radians, in [0, pi].
    pub fn sigma(&self) -> f64 {
        self.s.atan2(self.c)
    }

    /// Physical thickness in nanometers: t = lambda * arccos(C) / (2 pi a).
    pub fn thickness_nm(&self, lib: &MaterialLibrary) -> Result<f64> {
        let a = lib.index_of(self.material)?;
        Ok(lib.wavelength_nm * self.c.clamp(-1.0, 1.0).acos() / (2.0 * std::f64::consts::PI * a))
    }

    pub fn matrix(&self, lib: &MaterialLibrary) -> Result<TildeMatrix> {
        let a = lib.index_of(self.material)?;
        Ok(TildeMatrix {
            m11: self.c,
            m12: self.s / a,
            m21: a * self.s,
            m22: self.c,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if (self.c * self.c + self.s * self.s - 1.0).abs() > 1e-10 || self.s < 0.0 {
            return Err(Error::InvalidInput(format!(
                "layer (C, S) = ({}, {}) is not on the upper unit half-circle",
                self.c, self.s
            )));
        }
        Ok(())
    }
}

/// Where a design came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Heuristic,
    Optimal,
    Incumbent,
}

/// A full N-layer design with its reflectance.
#[derive(Debug, Clone)]
pub struct StackDesign {
    pub layers: Vec<TransferLayer>,
    pub reflectance: f64,
    pub provenance: Provenance,
}

impl StackDesign {
    /// Cumulative transfer matrix of the whole stack.
    pub fn cumulative(&self, lib: &MaterialLibrary) -> Result<TildeMatrix> {
        let mut w = TildeMatrix::identity();
        for layer in &self.layers {
            w = w.mul(&layer.matrix(lib)?);
        }
        Ok(w)
    }
}

/// Transfer matrix of `material` with physical thickness `t_nm`, in tilde
/// form: diagonal cos(sigma), off-diagonals sin(sigma)/a and a sin(sigma),
/// with sigma = 2 pi a t / lambda.
pub fn transfer_matrix(material: usize, t_nm: f64, lib: &MaterialLibrary) -> Result<TildeMatrix> {
    if t_nm < 0.0 {
        return Err(Error::InvalidInput(format!(
            "thickness must be nonnegative, got {t_nm}"
        )));
    }
    let a = lib.index_of(material)?;
    let sigma = 2.0 * std::f64::consts::PI * a * t_nm / lib.wavelength_nm;
    Ok(TildeMatrix {
        m11: sigma.cos(),
        m12: sigma.sin() / a,
        m21: a * sigma.sin(),
        m22: sigma.cos(),
    })
}

/// Reflectance of a stack with cumulative tilde matrix `w` on a substrate
/// with complex index `a_s`: the ratio of two convex quadratics in `w`.
pub fn reflectance_of(w: &TildeMatrix, a_s: Complex64) -> Result<f64> {
    let re = a_s.re;
    let im = a_s.im;
    let num_1 = w.m11 - im * w.m12 - re * w.m22;
    let num_2 = w.m21 + im * w.m22 - re * w.m12;
    let den_1 = w.m11 - im * w.m12 + re * w.m22;
    let den_2 = w.m21 + im * w.m22 + re * w.m12;
    let den = den_1 * den_1 + den_2 * den_2;
    if den <= f64::MIN_POSITIVE {
        return Err(Error::Nonphysical(format!(
            "zero reflectance denominator for w = {w:?}, substrate {a_s}"
        )));
    }
    Ok((num_1 * num_1 + num_2 * num_2) / den)
}

/// The five-term denominator `D`: reflectance equals `1 - 4 Re(a_s) / D`
/// whenever `det(w) = 1`.
pub fn denominator_d(w: &TildeMatrix, a_s: Complex64) -> f64 {
    let re = a_s.re;
    let im = a_s.im;
    let t1 = w.m11 - im * w.m12;
    let t2 = re * w.m12;
    let t3 = w.m21 + im * w.m22;
    let t4 = re * w.m22;
    t1 * t1 + t2 * t2 + t3 * t3 + t4 * t4 + 2.0 * re
}

/// Reflectance through the denominator identity; agrees with
/// [`reflectance_of`] exactly on determinant-one matrices.
pub fn reflectance_via_denominator(w: &TildeMatrix, a_s: Complex64) -> f64 {
    1.0 - 4.0 * a_s.re / denominator_d(w, a_s)
}

/// Alternating quarter-wave stack: odd layers use the highest-index material,
/// even layers the lowest, each with optical thickness lambda/4 (C = 0).
pub fn quarter_wave_heuristic(lib: &MaterialLibrary, n_layers: usize) -> Result<StackDesign> {
    lib.validate()?;
    if lib.n_materials() < 2 {
        return Err(Error::InvalidInput(
            "quarter-wave heuristic needs at least two materials".into(),
        ));
    }
    let high = lib.high_material();
    let low = lib.low_material();
    let layers: Vec<TransferLayer> = (1..=n_layers)
        .map(|n| TransferLayer {
            material: if n % 2 == 1 { high } else { low },
            c: 0.0,
            s: 1.0,
        })
        .collect();
    let design = StackDesign {
        layers,
        reflectance: 0.0,
        provenance: Provenance::Heuristic,
    };
    let w = design.cumulative(lib)?;
    let reflectance = reflectance_of(&w, lib.substrate_index)?;
    Ok(StackDesign {
        reflectance,
        ..design
    })
}
