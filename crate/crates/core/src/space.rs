//! Finite-dimensional *-vector spaces, matrix levels over them, and cone
//! membership oracles.
//!
//! Elements are coefficient vectors over a declared basis. The involution acts
//! on coefficients as `v ↦ Θ·conj(v)` for a real matrix `Θ`. Cones are
//! implemented for spaces whose basis is hermitian (`Θ = I`), which covers
//! every space built by this crate, including quotients of such spaces.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conic::{hvec, lp_feasible, psd_affine_feasible, LpProblem, PsdAffineProblem};
use crate::error::{Error, Result};
use crate::linalg::{
    c, hermitian_eigen_unchecked, identity, kron, max_abs, orthonormal_span, spectrum_bounds, ComplexMatrix,
    RealMatrix, Tolerance, C64, HERMITIAN_TOL,
};
use crate::verdict::{complex_payload, Certificate, Round, Status, Verdict};

pub const DEFAULT_SCHEDULE: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

pub fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidSchedule("schedule is empty".into()));
    }
    for (i, &eps) in schedule.iter().enumerate() {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "entry {} ({eps}) is not a positive real",
                i + 1
            )));
        }
        if i > 0 && eps >= schedule[i - 1] {
            return Err(Error::InvalidSchedule(format!(
                "entry {} ({eps}) does not decrease",
                i + 1
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceElement {
    pub coeffs: Vec<C64>,
}

impl SpaceElement {
    pub fn new(coeffs: Vec<C64>) -> Self {
        Self { coeffs }
    }

    pub fn real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&v| c(v)).collect())
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(vec![C64::new(0.0, 0.0); dim])
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zero(dim);
        v.coeffs[i] = c(1.0);
        v
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|a| a * s).collect())
    }

    /// Real parts of the coefficients.
    pub fn re(&self) -> Vec<f64> {
        self.coeffs.iter().map(|z| z.re).collect()
    }

    pub fn max_imag(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarSpace {
    labels: Vec<String>,
    involution: Vec<Vec<f64>>,
    unit: SpaceElement,
}

impl StarSpace {
    pub fn new(labels: Vec<String>, involution: RealMatrix, unit: SpaceElement) -> Result<Self> {
        let d = labels.len();
        if involution.shape() != (d, d) || unit.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "space of dimension {d} with involution {}x{} and unit of length {}",
                involution.nrows(),
                involution.ncols(),
                unit.dim()
            )));
        }
        let sq = &involution * &involution;
        if (sq - RealMatrix::identity(d, d)).amax() > HERMITIAN_TOL {
            return Err(Error::InvalidModel("involution does not square to the identity".into()));
        }
        let space = Self {
            labels,
            involution: (0..d).map(|i| involution.row(i).iter().copied().collect()).collect(),
            unit,
        };
        if !space.is_hermitian(&space.unit) {
            return Err(Error::InvalidModel("unit is not hermitian".into()));
        }
        Ok(space)
    }

    /// A space whose basis vectors are all hermitian.
    pub fn hermitian_basis(labels: Vec<String>, unit: &[f64]) -> Result<Self> {
        let d = labels.len();
        Self::new(labels, RealMatrix::identity(d, d), SpaceElement::real(unit))
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn unit(&self) -> &SpaceElement {
        &self.unit
    }

    pub fn involution(&self) -> RealMatrix {
        let d = self.dim();
        RealMatrix::from_fn(d, d, |i, j| self.involution[i][j])
    }

    pub fn has_hermitian_basis(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| self.involution[i][j] == if i == j { 1.0 } else { 0.0 }))
    }

    pub fn adjoint(&self, v: &SpaceElement) -> SpaceElement {
        let d = self.dim();
        SpaceElement::new(
            (0..d)
                .map(|i| (0..d).map(|j| v.coeffs[j].conj() * self.involution[i][j]).sum())
                .collect(),
        )
    }

    pub fn hermitian_deviation(&self, v: &SpaceElement) -> f64 {
        self.adjoint(v)
            .coeffs
            .iter()
            .zip(&v.coeffs)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn is_hermitian(&self, v: &SpaceElement) -> bool {
        v.dim() == self.dim() && self.hermitian_deviation(v) <= HERMITIAN_TOL
    }

    pub fn element(&self, coeffs: &[f64]) -> Result<SpaceElement> {
        if coeffs.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a space of dimension {}",
                coeffs.len(),
                self.dim()
            )));
        }
        Ok(SpaceElement::real(coeffs))
    }

    fn require_hermitian_basis(&self) -> Result<()> {
        if self.has_hermitian_basis() {
            Ok(())
        } else {
            Err(Error::InvalidModel(
                "cones are supported only over hermitian bases".into(),
            ))
        }
    }
}

/// An element `Σ_c X_c ⊗ b_c` of `M_n(V)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixElement {
    level: usize,
    coeffs: Vec<ComplexMatrix>,
}

impl MatrixElement {
    pub fn new(coeffs: Vec<ComplexMatrix>) -> Result<Self> {
        let level = coeffs.first().map(|m| m.nrows()).unwrap_or(0);
        for m in &coeffs {
            if m.nrows() != level || m.ncols() != level {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient matrix {}x{} at level {level}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(Self { level, coeffs })
    }

    pub fn zeros(dim: usize, level: usize) -> Self {
        Self {
            level,
            coeffs: vec![ComplexMatrix::zeros(level, level); dim],
        }
    }

    /// `a ⊗ v` for a scalar matrix `a`.
    pub fn tensor(a: &ComplexMatrix, v: &SpaceElement) -> Self {
        Self {
            level: a.nrows(),
            coeffs: v.coeffs.iter().map(|&z| a * z).collect(),
        }
    }

    pub fn from_element(v: &SpaceElement) -> Self {
        Self::tensor(&identity(1), v)
    }

    /// `I_n ⊗ e`.
    pub fn unit(space: &StarSpace, n: usize) -> Self {
        Self::tensor(&identity(n), space.unit())
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[ComplexMatrix] {
        &self.coeffs
    }

    pub fn coeff(&self, c: usize) -> &ComplexMatrix {
        &self.coeffs[c]
    }

    fn zip(&self, other: &Self, f: impl Fn(&ComplexMatrix, &ComplexMatrix) -> ComplexMatrix) -> Self {
        assert_eq!(
            (self.level, self.dim()),
            (other.level, other.dim()),
            "matrix elements of different shapes"
        );
        Self {
            level: self.level,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        self.zip(other, |a, b| a + b * c(s))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            level: self.level,
            coeffs: self.coeffs.iter().map(|a| a * c(s)).collect(),
        }
    }

    /// `a ⊗ X`.
    pub fn kron_left(&self, a: &ComplexMatrix) -> Self {
        Self {
            level: a.nrows() * self.level,
            coeffs: self.coeffs.iter().map(|m| kron(a, m)).collect(),
        }
    }

    /// `X ⊗ a`.
    pub fn kron_right(&self, a: &ComplexMatrix) -> Self {
        Self {
            level: self.level * a.nrows(),
            coeffs: self.coeffs.iter().map(|m| kron(m, a)).collect(),
        }
    }

    pub fn direct_sum(&self, other: &Self) -> Self {
        let (n, m) = (self.level, other.level);
        Self {
            level: n + m,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| {
                    let mut out = ComplexMatrix::zeros(n + m, n + m);
                    out.view_mut((0, 0), (n, n)).copy_from(a);
                    out.view_mut((n, n), (m, m)).copy_from(b);
                    out
                })
                .collect(),
        }
    }

    /// `a* X a` for a scalar matrix `a ∈ M_{n,m}`.
    pub fn congruence(&self, a: &ComplexMatrix) -> Self {
        let adj = a.adjoint();
        Self {
            level: a.ncols(),
            coeffs: self.coeffs.iter().map(|m| &adj * m * a).collect(),
        }
    }

    /// Image under the coefficient functional `φ`: `Σ_c φ[c] X_c`.
    pub fn evaluate(&self, phi: &[f64]) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.level, self.level);
        for (m, &w) in self.coeffs.iter().zip(phi) {
            if w != 0.0 {
                out += m * c(w);
            }
        }
        out
    }

    /// The element `X*` (conjugate transpose combined with the involution).
    pub fn adjoint(&self, space: &StarSpace) -> Self {
        let theta = space.involution();
        let d = self.dim();
        let coeffs = (0..d)
            .map(|i| {
                let mut m = ComplexMatrix::zeros(self.level, self.level);
                for j in 0..d {
                    if theta[(i, j)] != 0.0 {
                        m += self.coeffs[j].adjoint() * c(theta[(i, j)]);
                    }
                }
                m
            })
            .collect();
        Self {
            level: self.level,
            coeffs,
        }
    }

    pub fn hermitian_deviation(&self, space: &StarSpace) -> f64 {
        let adj = self.adjoint(space);
        adj.coeffs
            .iter()
            .zip(&self.coeffs)
            .fold(0.0, |m, (a, b)| m.max(max_abs(&(a - b))))
    }

    pub fn is_hermitian(&self, space: &StarSpace) -> bool {
        let scale = self.coeffs.iter().fold(0.0f64, |m, a| m.max(max_abs(a)));
        self.hermitian_deviation(space) <= HERMITIAN_TOL * (1.0 + scale)
    }

    /// Stacked [`hvec`] coordinates of the coefficient matrices.
    pub fn hvec(&self) -> Vec<f64> {
        self.coeffs.iter().flat_map(hvec).collect()
    }

    /// Level-1 elements as a plain coefficient vector.
    pub fn to_element(&self) -> Option<SpaceElement> {
        (self.level == 1).then(|| SpaceElement::new(self.coeffs.iter().map(|m| m[(0, 0)]).collect()))
    }
}

pub(crate) fn check_element(space: &StarSpace, x: &MatrixElement) -> Result<()> {
    if x.dim() != space.dim() {
        return Err(Error::DimensionMismatch(format!(
            "element has {} coefficients, space has dimension {}",
            x.dim(),
            space.dim()
        )));
    }
    if !x.is_hermitian(space) {
        return Err(Error::ElementNotHermitian {
            deviation: x.hermitian_deviation(space),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    Generated,
    DiagonalConcrete,
    DMaxLift,
    Compression,
    Level,
    InductiveLimit,
    ArchClosure,
}

/// Exact positivity description: `x` is in the cone iff every annihilator
/// vanishes on `x` and every fiber image `Σ_c φ_f[c] X_c` is PSD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberData {
    pub fibers: Vec<Vec<f64>>,
    pub annihilators: Vec<Vec<f64>>,
}

impl FiberData {
    fn annihilator_residual(&self, x: &MatrixElement) -> Option<(usize, f64)> {
        self.annihilators
            .iter()
            .enumerate()
            .map(|(i, psi)| (i, max_abs(&x.evaluate(psi))))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn membership(&self, x: &MatrixElement, tol: &Tolerance) -> Verdict {
        if let Some((i, r)) = self.annihilator_residual(x) {
            if r > tol.affine_eps {
                return Verdict::non_member(Certificate::Relation {
                    relation: format!("span constraint {}", i + 1),
                    residual: r,
                });
            }
        }
        let mut mins = Vec::with_capacity(self.fibers.len());
        for (f, phi) in self.fibers.iter().enumerate() {
            let m = x.evaluate(phi);
            let (lo, norm) = spectrum_bounds(&m);
            if lo < -tol.psd_slack(norm) {
                let (vals, vecs) = hermitian_eigen_unchecked(&m);
                let v: Vec<C64> = vecs.column(0).iter().copied().collect();
                return Verdict::non_member(Certificate::FiberSeparator {
                    fiber: f,
                    vector: complex_payload(&v),
                    value: vals[0],
                });
            }
            mins.push(lo);
        }
        Verdict::member(Certificate::Fibers { min_eigenvalues: mins })
    }

    /// Looks for a fiber vector `v` with `v* B v = 0` for the summed
    /// directions `B` and `v* A v < 0` for the base `A`. Such a vector rules
    /// out `base + Σ t_k d_k` in the cone for every `t ≥ 0`.
    pub fn shift_obstruction(
        &self,
        base: &MatrixElement,
        dirs: &[MatrixElement],
        tol: &Tolerance,
    ) -> Option<Certificate> {
        if let Some((i, r)) = self.annihilator_residual(base) {
            let dir_res = dirs
                .iter()
                .map(|d| max_abs(&d.evaluate(&self.annihilators[i])))
                .fold(0.0, f64::max);
            if r > tol.affine_eps && dir_res <= tol.affine_eps {
                return Some(Certificate::Relation {
                    relation: format!("span constraint {}", i + 1),
                    residual: r,
                });
            }
        }
        for (f, phi) in self.fibers.iter().enumerate() {
            let a = base.evaluate(phi);
            let n = a.nrows();
            let mut b = ComplexMatrix::zeros(n, n);
            for d in dirs {
                b += d.evaluate(phi);
            }
            let (bvals, bvecs) = hermitian_eigen_unchecked(&b);
            let bnorm = bvals.last().map(|v| v.abs()).unwrap_or(0.0);
            let kernel: Vec<usize> = (0..n).filter(|&i| bvals[i].abs() <= 1e-10 * (1.0 + bnorm)).collect();
            if kernel.is_empty() {
                continue;
            }
            let k = ComplexMatrix::from_fn(n, kernel.len(), |i, j| bvecs[(i, kernel[j])]);
            let compressed = k.adjoint() * &a * &k;
            let (lo, norm) = spectrum_bounds(&compressed);
            if lo < -tol.psd_slack(norm) {
                let (vals, vecs) = hermitian_eigen_unchecked(&compressed);
                let v = &k * vecs.column(0);
                return Some(Certificate::FiberSeparator {
                    fiber: f,
                    vector: complex_payload(&v.iter().copied().collect::<Vec<_>>()),
                    value: vals[0],
                });
            }
        }
        None
    }
}

/// A membership oracle for a cone at every matrix level.
pub trait Cone: Send + Sync + fmt::Debug {
    fn kind(&self) -> ConeKind;
    fn space(&self) -> &StarSpace;
    fn tolerance(&self) -> Tolerance;

    /// Membership of a hermitian element, any level. Callers go through
    /// [`membership`], which validates the element first.
    fn contains(&self, x: &MatrixElement) -> Result<Verdict>;

    /// Exact fiber description, when the cone has one.
    fn fibers(&self) -> Option<&FiberData> {
        None
    }

    /// A functional that is nonnegative on the cone, vanishes on every
    /// direction and is negative on `base`, if one can be found. Directions
    /// are assumed to lie in the cone.
    fn shift_obstruction(&self, base: &MatrixElement, dirs: &[MatrixElement]) -> Result<Option<Certificate>> {
        Ok(self
            .fibers()
            .and_then(|f| f.shift_obstruction(base, dirs, &self.tolerance())))
    }
}

pub type ConeHandle = Arc<dyn Cone>;

pub fn membership(cone: &dyn Cone, x: &MatrixElement) -> Result<Verdict> {
    check_element(cone.space(), x)?;
    cone.contains(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalModel {
    space: StarSpace,
    size: usize,
    /// Diagonal of the concrete matrix representing each basis vector.
    embedding: Vec<Vec<f64>>,
}

impl DiagonalModel {
    pub fn new(labels: Vec<String>, embedding: Vec<Vec<f64>>, unit: &[f64]) -> Result<Self> {
        let size = embedding.first().map(|v| v.len()).unwrap_or(0);
        if embedding.len() != labels.len() || embedding.iter().any(|v| v.len() != size) {
            return Err(Error::InvalidModel(
                "embedding must give one diagonal of common size per basis vector".into(),
            ));
        }
        let space = StarSpace::hermitian_basis(labels, unit)?;
        let model = Self { space, size, embedding };
        let vecs: Vec<Vec<f64>> = model.embedding.clone();
        if orthonormal_span(&vecs, size, 1e-10).ncols() != model.space.dim() {
            return Err(Error::InvalidModel("embedding is not injective".into()));
        }
        let image = model.image(&SpaceElement::real(unit));
        if image.iter().any(|v| (v - 1.0).abs() > 1e-12) {
            return Err(Error::InvalidModel("unit does not map to the identity".into()));
        }
        Ok(model)
    }

    /// The full algebra `D_d` with basis the diagonal matrix units.
    pub fn full(d: usize) -> Self {
        let labels = (1..=d).map(|i| format!("E{i}")).collect();
        let embedding = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(labels, embedding, &vec![1.0; d]).expect("matrix units form a valid model")
    }

    pub fn space(&self) -> &StarSpace {
        &self.space
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn embedding(&self) -> &[Vec<f64>] {
        &self.embedding
    }

    /// Concrete diagonal of a level-1 element (real parts).
    pub fn image(&self, v: &SpaceElement) -> Vec<f64> {
        (0..self.size)
            .map(|f| v.coeffs.iter().zip(&self.embedding).map(|(z, e)| z.re * e[f]).sum())
            .collect()
    }

    /// Coordinates of a concrete diagonal in the model basis, if it lies in the image.
    pub fn preimage(&self, diagonal: &[f64]) -> Option<SpaceElement> {
        let a = RealMatrix::from_fn(self.size, self.space.dim(), |i, j| self.embedding[j][i]);
        let x = crate::linalg::least_squares(&a, diagonal)?;
        let fit = &a * nalgebra::DVector::from_column_slice(&x);
        let residual = fit.iter().zip(diagonal).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        (residual <= 1e-9).then(|| SpaceElement::real(&x))
    }

    pub fn fiber_data(&self) -> FiberData {
        FiberData {
            fibers: (0..self.size)
                .map(|f| self.embedding.iter().map(|e| e[f]).collect())
                .collect(),
            annihilators: Vec::new(),
        }
    }
}

#[derive(Debug)]
pub struct DiagonalCone {
    model: DiagonalModel,
    fibers: FiberData,
    tol: Tolerance,
}

impl Cone for DiagonalCone {
    fn kind(&self) -> ConeKind {
        ConeKind::DiagonalConcrete
    }

    fn space(&self) -> &StarSpace {
        self.model.space()
    }

    fn tolerance(&self) -> Tolerance {
        self.tol
    }

    fn contains(&self, x: &MatrixElement) -> Result<Verdict> {
        Ok(self.fibers.membership(x, &self.tol))
    }

    fn fibers(&self) -> Option<&FiberData> {
        Some(&self.fibers)
    }
}

/// Concrete positivity of the diagonal image: at level `n` each diagonal
/// position contributes an `n×n` block that must be PSD (at level 1 this is
/// entrywise nonnegativity).
pub fn diagonal_cone(model: &DiagonalModel) -> ConeHandle {
    diagonal_cone_with(model, Tolerance::default())
}

pub fn diagonal_cone_with(model: &DiagonalModel, tol: Tolerance) -> ConeHandle {
    Arc::new(DiagonalCone {
        fibers: model.fiber_data(),
        model: model.clone(),
        tol,
    })
}

/// The cone generated by finitely many hermitian elements at level 1 and
/// its maximal matrix ordering `D^max` at higher levels.
#[derive(Debug)]
pub struct GeneratedCone {
    space: StarSpace,
    gens: Vec<Vec<f64>>,
    /// Present when the generators are linearly independent.
    simplicial: Option<FiberData>,
    tol: Tolerance,
}

impl GeneratedCone {
    pub fn new(space: &StarSpace, gens: &[SpaceElement], tol: Tolerance) -> Result<Self> {
        space.require_hermitian_basis()?;
        for (i, g) in gens.iter().enumerate() {
            if g.dim() != space.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "generator {} has {} coefficients, space has dimension {}",
                    i + 1,
                    g.dim(),
                    space.dim()
                )));
            }
            if !space.is_hermitian(g) {
                return Err(Error::ElementNotHermitian {
                    deviation: space.hermitian_deviation(g),
                });
            }
        }
        let gens: Vec<Vec<f64>> = gens.iter().map(|g| g.re()).collect();
        let simplicial = simplicial_fibers(&gens, space.dim());
        Ok(Self {
            space: space.clone(),
            gens,
            simplicial,
            tol,
        })
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.gens
    }

    pub fn is_simplicial(&self) -> bool {
        self.simplicial.is_some()
    }

    fn level_one(&self, x: &MatrixElement) -> Result<Verdict> {
        let d = self.space.dim();
        let a = RealMatrix::from_fn(d, self.gens.len(), |i, j| self.gens[j][i]);
        let b: Vec<f64> = x.coeffs().iter().map(|m| m[(0, 0)].re).collect();
        lp_feasible(&LpProblem::feasibility(a, b))
    }

    /// The PSD-affine formulation `Σ_j g_j ⊗ S_j = x`, ignoring any shortcut.
    pub fn dmax_psd(&self, x: &MatrixElement) -> Result<Verdict> {
        psd_affine_feasible(&self.dmax_problem(x, &[])?)
    }

    /// Blocks: one `n×n` block per generator, then one `1×1` block per extra direction
    /// entering with coefficient `-t_k`.
    fn dmax_problem(&self, x: &MatrixElement, dirs: &[MatrixElement]) -> Result<PsdAffineProblem> {
        let n = x.level();
        let mut sizes = vec![n; self.gens.len()];
        sizes.extend(std::iter::repeat_n(1, dirs.len()));
        let r = self.gens.len();
        let gens = &self.gens;
        let map = |blocks: &[ComplexMatrix]| {
            let mut out = Vec::new();
            for cidx in 0..x.dim() {
                let mut m = ComplexMatrix::zeros(n, n);
                for j in 0..r {
                    if gens[j][cidx] != 0.0 {
                        m += &blocks[j] * c(gens[j][cidx]);
                    }
                }
                for (k, d) in dirs.iter().enumerate() {
                    m -= d.coeff(cidx) * blocks[r + k][(0, 0)];
                }
                out.extend(hvec(&m));
            }
            out
        };
        PsdAffineProblem::from_map(sizes, map, x.hvec(), self.tol)
    }
}

/// Rows of the pseudo-inverse of the generator matrix, plus annihilators of its
/// column span, when the generators are independent.
fn simplicial_fibers(gens: &[Vec<f64>], dim: usize) -> Option<FiberData> {
    let r = gens.len();
    if r == 0 || r > dim {
        return None;
    }
    let g = RealMatrix::from_fn(dim, r, |i, j| gens[j][i]);
    let svd = g.clone().svd(true, true);
    let top = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-10 * top {
        return None;
    }
    let pinv = svd.pseudo_inverse(1e-12).ok()?;
    let fibers = (0..r).map(|j| pinv.row(j).iter().copied().collect()).collect();
    let u = g.svd(true, false).u.expect("requested U");
    let span: Vec<Vec<f64>> = (0..r).map(|j| u.column(j).iter().copied().collect()).collect();
    let mut annihilators = Vec::new();
    // complete the column span to a basis; the added directions annihilate it
    let mut basis = span;
    for i in 0..dim {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        for q in &basis {
            let s: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(q) {
                *a -= s * b;
            }
        }
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nv > 1e-8 {
            let v: Vec<f64> = v.iter().map(|a| a / nv).collect();
            basis.push(v.clone());
            annihilators.push(v);
        }
    }
    Some(FiberData { fibers, annihilators })
}

impl Cone for GeneratedCone {
    fn kind(&self) -> ConeKind {
        ConeKind::DMaxLift
    }

    fn space(&self) -> &StarSpace {
        &self.space
    }

    fn tolerance(&self) -> Tolerance {
        self.tol
    }

    fn contains(&self, x: &MatrixElement) -> Result<Verdict> {
        if let Some(f) = &self.simplicial {
            return Ok(f.membership(x, &self.tol));
        }
        if self.gens.is_empty() {
            let zero = x.coeffs().iter().all(|m| max_abs(m) <= self.tol.affine_eps);
            return Ok(Verdict::trivial(
                if zero { Status::Member } else { Status::NonMember },
                "the cone generated by no elements is {0}",
            ));
        }
        if x.level() == 1 {
            return self.level_one(x);
        }
        self.dmax_psd(x)
    }

    fn fibers(&self) -> Option<&FiberData> {
        self.simplicial.as_ref()
    }

    fn shift_obstruction(&self, base: &MatrixElement, dirs: &[MatrixElement]) -> Result<Option<Certificate>> {
        if let Some(f) = &self.simplicial {
            return Ok(f.shift_obstruction(base, dirs, &self.tol));
        }
        if self.gens.is_empty() {
            return Ok(None);
        }
        let v = psd_affine_feasible(&self.dmax_problem(base, dirs)?)?;
        Ok(match v.status {
            Status::NonMember => Some(v.certificate),
            _ => None,
        })
    }
}

/// Membership in `D_n^max` of the cone generated by `gens`.
pub fn dmax_membership(space: &StarSpace, gens: &[SpaceElement], x: &MatrixElement) -> Result<Verdict> {
    let cone = GeneratedCone::new(space, gens, Tolerance::default())?;
    membership(&cone, x)
}

pub fn generated_cone(space: &StarSpace, gens: &[SpaceElement]) -> Result<ConeHandle> {
    Ok(Arc::new(GeneratedCone::new(space, gens, Tolerance::default())?))
}

pub fn generated_cone_with(space: &StarSpace, gens: &[SpaceElement], tol: Tolerance) -> Result<ConeHandle> {
    Ok(Arc::new(GeneratedCone::new(space, gens, tol)?))
}

/// Runs `x + ε(I_n ⊗ e)` through `test` for each scheduled `ε`.
pub(crate) fn schedule_rounds(
    schedule: &[f64],
    mut test: impl FnMut(f64) -> Result<(Verdict, Option<usize>)>,
) -> Result<Verdict> {
    validate_schedule(schedule)?;
    let mut rounds = Vec::with_capacity(schedule.len());
    let mut status = Status::Member;
    for &eps in schedule {
        let (v, level) = test(eps)?;
        rounds.push(Round {
            eps,
            status: v.status,
            level,
            certificate: Box::new(v.certificate),
        });
        match v.status {
            Status::NonMember => {
                status = Status::NonMember;
                break;
            }
            Status::Unknown => status = Status::Unknown,
            Status::Member => {}
        }
    }
    Ok(Verdict::new(status, Certificate::Schedule { rounds }))
}

pub fn archimedean_membership(cone: &dyn Cone, x: &MatrixElement, schedule: &[f64]) -> Result<Verdict> {
    check_element(cone.space(), x)?;
    let unit = MatrixElement::unit(cone.space(), x.level());
    schedule_rounds(schedule, |eps| Ok((cone.contains(&x.axpy(eps, &unit))?, None)))
}

/// Archimedean closure of a cone along a finite schedule.
#[derive(Debug)]
pub struct ArchClosure {
    inner: ConeHandle,
    schedule: Vec<f64>,
}

impl Cone for ArchClosure {
    fn kind(&self) -> ConeKind {
        ConeKind::ArchClosure
    }

    fn space(&self) -> &StarSpace {
        self.inner.space()
    }

    fn tolerance(&self) -> Tolerance {
        self.inner.tolerance()
    }

    fn contains(&self, x: &MatrixElement) -> Result<Verdict> {
        archimedean_membership(self.inner.as_ref(), x, &self.schedule)
    }
}

pub fn arch_closure(inner: ConeHandle, schedule: &[f64]) -> Result<ConeHandle> {
    validate_schedule(schedule)?;
    Ok(Arc::new(ArchClosure {
        inner,
        schedule: schedule.to_vec(),
    }))
}

/// `inf { t > 0 : t e ± v ∈ C }` by bisection on `t`.
pub fn order_norm(space: &StarSpace, cone: &dyn Cone, v: &SpaceElement, tol: f64) -> Result<f64> {
    if !space.is_hermitian(v) {
        return Err(Error::ElementNotHermitian {
            deviation: space.hermitian_deviation(v),
        });
    }
    let unit = space.unit();
    let bounded = |t: f64| -> Result<bool> {
        let plus = MatrixElement::from_element(&unit.scale(t).add(v));
        let minus = MatrixElement::from_element(&unit.scale(t).sub(v));
        Ok(cone.contains(&plus)?.is_member() && cone.contains(&minus)?.is_member())
    };
    let mut hi = 1.0 + v.coeffs.iter().map(|z| z.norm()).sum::<f64>();
    let mut grow = 0;
    while !bounded(hi)? {
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(Error::InvalidModel("unit is not an order unit for this cone".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if bounded(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Result of quotienting a space by a subspace `J`.
#[derive(Clone, Debug)]
pub struct Quotient {
    pub space: StarSpace,
    /// Coefficients in the parent space ↦ coefficients in the quotient (`dim_q × dim`).
    pub projection: RealMatrix,
    /// Representatives of the quotient basis, as columns (`dim × dim_q`).
    pub lift: RealMatrix,
    /// Orthonormal basis of `J`, as columns.
    pub subspace: RealMatrix,
}

impl Quotient {
    pub fn project(&self, v: &SpaceElement) -> SpaceElement {
        let q = self.projection.nrows();
        SpaceElement::new(
            (0..q)
                .map(|i| {
                    v.coeffs
                        .iter()
                        .enumerate()
                        .map(|(j, z)| z * self.projection[(i, j)])
                        .sum()
                })
                .collect(),
        )
    }

    pub fn project_matrix(&self, x: &MatrixElement) -> MatrixElement {
        let q = self.projection.nrows();
        let n = x.level();
        let coeffs = (0..q)
            .map(|i| {
                let mut m = ComplexMatrix::zeros(n, n);
                for j in 0..x.dim() {
                    let w = self.projection[(i, j)];
                    if w != 0.0 {
                        m += x.coeff(j) * c(w);
                    }
                }
                m
            })
            .collect();
        MatrixElement::new(coeffs).expect("uniform levels")
    }
}

/// Quotient by `span(j_basis)`, with the quotient basis chosen greedily among
/// images of the standard basis vectors.
pub fn quotient_by_subspace(space: &StarSpace, j_basis: &[SpaceElement]) -> Result<Quotient> {
    let d = space.dim();
    let j = subspace_basis(space, j_basis)?;
    let mut cols: Vec<Vec<f64>> = (0..j.ncols()).map(|k| j.column(k).iter().copied().collect()).collect();
    let mut reps = Vec::new();
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        cols.push(e.clone());
        if orthonormal_span(&cols, d, 1e-10).ncols() == cols.len() {
            reps.push((i, e));
        } else {
            cols.pop();
        }
    }
    let labels = reps.iter().map(|(i, _)| space.labels()[*i].clone()).collect();
    let vectors = reps.into_iter().map(|(_, e)| e).collect();
    build_quotient(space, j, vectors, labels)
}

/// Quotient by `span(j_basis)` with a prescribed basis of representatives.
pub fn quotient_with_basis(
    space: &StarSpace,
    j_basis: &[SpaceElement],
    representatives: &[Vec<f64>],
    labels: Vec<String>,
) -> Result<Quotient> {
    let j = subspace_basis(space, j_basis)?;
    build_quotient(space, j, representatives.to_vec(), labels)
}

fn subspace_basis(space: &StarSpace, j_basis: &[SpaceElement]) -> Result<RealMatrix> {
    space.require_hermitian_basis()?;
    let d = space.dim();
    for v in j_basis {
        if v.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "subspace vector has {} coefficients, space has dimension {d}",
                v.dim()
            )));
        }
        // with a hermitian basis the involution is coefficientwise conjugation,
        // so invariance of a real span is automatic and complex vectors need
        // their conjugates in the span
    }
    let mut real_parts: Vec<Vec<f64>> = Vec::new();
    for v in j_basis {
        real_parts.push(v.re());
        if v.max_imag() > 0.0 {
            real_parts.push(v.coeffs.iter().map(|z| z.im).collect());
        }
    }
    let j = orthonormal_span(&real_parts, d, 1e-10);
    let complex_dim = complex_span_dim(j_basis, d);
    if j.ncols() != complex_dim {
        return Err(Error::NotInvolutionInvariant);
    }
    Ok(j)
}

fn complex_span_dim(vs: &[SpaceElement], d: usize) -> usize {
    if vs.is_empty() {
        return 0;
    }
    let m = ComplexMatrix::from_fn(d, vs.len(), |i, j| vs[j].coeffs[i]);
    let sv = m.svd(false, false).singular_values;
    let top = sv.max();
    sv.iter().filter(|&&s| s > 1e-10 * top.max(1e-300)).count()
}

fn build_quotient(space: &StarSpace, j: RealMatrix, reps: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Quotient> {
    let d = space.dim();
    let q = reps.len();
    if q + j.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "{q} representatives and a {}-dimensional subspace in dimension {d}",
            j.ncols()
        )));
    }
    let m = RealMatrix::from_fn(d, d, |i, k| if k < q { reps[k][i] } else { j[(i, k - q)] });
    let inv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidModel("representatives are dependent modulo the subspace".into()))?;
    let projection = inv.rows(0, q).into_owned();
    let lift = m.columns(0, q).into_owned();
    let unit: Vec<f64> = (0..q)
        .map(|i| (0..d).map(|k| projection[(i, k)] * space.unit().coeffs[k].re).sum())
        .collect();
    if unit.iter().all(|v| v.abs() <= 1e-10) {
        return Err(Error::UnitInSubspace);
    }
    let space = StarSpace::hermitian_basis(labels, &unit)?;
    Ok(Quotient {
        space,
        projection,
        lift,
        subspace: j,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, from_real, is_psd_unchecked, ones};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_gen_space() -> (StarSpace, Vec<SpaceElement>) {
        let space = StarSpace::hermitian_basis(vec!["g1".into(), "g2".into()], &[1.0, 1.0]).unwrap();
        let gens = vec![SpaceElement::real(&[1.0, 0.0]), SpaceElement::real(&[0.0, 1.0])];
        (space, gens)
    }

    #[test]
    fn dmax_examples() {
        let (space, gens) = two_gen_space();
        let x = MatrixElement::new(vec![identity(2), ones(2)]).unwrap();
        let v = dmax_membership(&space, &gens, &x).unwrap();
        assert_eq!(v.status, Status::Member);

        let flip = from_real(2, 2, &[0., 1., 1., 0.]);
        let y = MatrixElement::new(vec![identity(2), flip.clone()]).unwrap();
        let v = dmax_membership(&space, &gens, &y).unwrap();
        assert_eq!(v.status, Status::NonMember);
        // eigen oracle on the forced second block
        assert!(crate::linalg::min_eigenvalue(&flip).unwrap() < -0.5);

        // the PSD-affine route agrees on both
        let cone = GeneratedCone::new(&space, &gens, Tolerance::default()).unwrap();
        assert_eq!(cone.dmax_psd(&x).unwrap().status, Status::Member);
        assert_eq!(cone.dmax_psd(&y).unwrap().status, Status::NonMember);
    }

    #[test]
    fn dmax_rejects_non_hermitian() {
        let (space, gens) = two_gen_space();
        let x = MatrixElement::new(vec![from_real(2, 2, &[0., 1., 0., 0.]), identity(2)]).unwrap();
        assert!(matches!(
            dmax_membership(&space, &gens, &x),
            Err(Error::ElementNotHermitian { .. })
        ));
    }

    #[test]
    fn archimedean_examples() {
        let cone = diagonal_cone(&DiagonalModel::full(2));
        let x = MatrixElement::from_element(&SpaceElement::real(&[0.0, 1.0]));
        assert!(archimedean_membership(cone.as_ref(), &x, &DEFAULT_SCHEDULE)
            .unwrap()
            .is_member());

        let x = MatrixElement::from_element(&SpaceElement::real(&[-1.0, 1.0]));
        let v = archimedean_membership(cone.as_ref(), &x, &DEFAULT_SCHEDULE).unwrap();
        assert!(v.is_non_member());
        let Certificate::Schedule { rounds } = v.certificate else {
            panic!()
        };
        assert_eq!(rounds[0].eps, 0.1);
        assert_eq!(rounds[0].status, Status::NonMember);

        let x = MatrixElement::from_element(&SpaceElement::real(&[-1e-12, 1.0]));
        assert!(archimedean_membership(cone.as_ref(), &x, &DEFAULT_SCHEDULE)
            .unwrap()
            .is_member());

        assert!(matches!(
            archimedean_membership(cone.as_ref(), &x, &[1e-2, 1e-1]),
            Err(Error::InvalidSchedule(_))
        ));
    }

    #[test]
    fn order_norm_examples() {
        let model = DiagonalModel::full(2);
        let cone = diagonal_cone(&model);
        let space = model.space();
        let n = order_norm(space, cone.as_ref(), space.unit(), 1e-8).unwrap();
        assert!((n - 1.0).abs() < 1e-7);
        let n = order_norm(space, cone.as_ref(), &SpaceElement::real(&[1.0, 0.0]), 1e-8).unwrap();
        assert!((n - 1.0).abs() < 1e-7);
        let n = order_norm(space, cone.as_ref(), &space.unit().scale(-3.5), 1e-8).unwrap();
        assert!((n - 3.5).abs() < 1e-7);
        let bad = SpaceElement::new(vec![C64::new(0.0, 1.0), c(0.0)]);
        assert!(order_norm(space, cone.as_ref(), &bad, 1e-8).is_err());
    }

    #[test]
    fn quotient_examples() {
        let space = StarSpace::hermitian_basis(vec!["a".into(), "b".into(), "c".into()], &[1.0, 1.0, 1.0]).unwrap();
        let q = quotient_by_subspace(&space, &[]).unwrap();
        assert_eq!(q.space.dim(), 3);
        assert!((q.projection.clone() - RealMatrix::identity(3, 3)).amax() < 1e-12);

        let q = quotient_by_subspace(&space, &[SpaceElement::real(&[1.0, -1.0, 0.0])]).unwrap();
        assert_eq!(q.space.dim(), 2);
        let e1 = q.project(&SpaceElement::basis(3, 0));
        let e2 = q.project(&SpaceElement::basis(3, 1));
        assert!(e1.sub(&e2).coeffs.iter().all(|z| z.norm() < 1e-12));

        assert!(matches!(
            quotient_by_subspace(&space, &[SpaceElement::real(&[1.0, 1.0, 1.0])]),
            Err(Error::UnitInSubspace)
        ));
        // a purely imaginary direction whose conjugate is outside the span
        let twisted = SpaceElement::new(vec![c(1.0), C64::new(0.0, 1.0), c(0.0)]);
        assert!(matches!(
            quotient_by_subspace(&space, &[twisted]),
            Err(Error::NotInvolutionInvariant)
        ));
    }

    #[test]
    fn diagonal_examples() {
        let cone = diagonal_cone(&DiagonalModel::full(3));
        let x = MatrixElement::from_element(&SpaceElement::real(&[0.0, 2.0, 1.0]));
        assert!(membership(cone.as_ref(), &x).unwrap().is_member());
        let cone2 = diagonal_cone(&DiagonalModel::full(2));
        let x = MatrixElement::from_element(&SpaceElement::real(&[-0.5, 1.0]));
        assert!(membership(cone2.as_ref(), &x).unwrap().is_non_member());
        for n in 1..5 {
            let u = MatrixElement::unit(cone.space(), n);
            assert!(membership(cone.as_ref(), &u).unwrap().is_member());
        }
    }

    #[test]
    fn diagonal_model_validation() {
        let bad = DiagonalModel::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 0.0], vec![2.0, 0.0]],
            &[1.0, 0.0],
        );
        assert!(bad.is_err());
        let non_unital = DiagonalModel::new(vec!["a".into()], vec![vec![1.0, 2.0]], &[1.0]);
        assert!(non_unital.is_err());
        let model = DiagonalModel::full(3);
        let v = model.preimage(&[1.0, 2.0, 3.0]).unwrap();
        assert!((v.re()[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn generated_cone_level_one_lp() {
        // non-simplicial: three generators in the plane
        let space = StarSpace::hermitian_basis(vec!["x".into(), "y".into()], &[1.0, 1.0]).unwrap();
        let gens = vec![
            SpaceElement::real(&[1.0, 0.0]),
            SpaceElement::real(&[0.0, 1.0]),
            SpaceElement::real(&[1.0, 1.0]),
        ];
        let cone = generated_cone(&space, &gens).unwrap();
        assert!(cone.fibers().is_none());
        let inside = MatrixElement::from_element(&SpaceElement::real(&[2.0, 0.5]));
        assert!(membership(cone.as_ref(), &inside).unwrap().is_member());
        let outside = MatrixElement::from_element(&SpaceElement::real(&[-0.1, 0.5]));
        let v = membership(cone.as_ref(), &outside).unwrap();
        assert!(v.is_non_member());
        // level 2 via the PSD-affine route: I ⊗ (2,0.5) is a member
        let x2 = MatrixElement::tensor(&identity(2), &SpaceElement::real(&[2.0, 0.5]));
        assert!(membership(cone.as_ref(), &x2).unwrap().is_member());
    }

    #[test]
    fn simplicial_fibers_handle_non_spanning_generators() {
        let space = StarSpace::hermitian_basis(vec!["a".into(), "b".into(), "c".into()], &[1.0, 1.0, 0.0]).unwrap();
        let gens = vec![
            SpaceElement::real(&[1.0, 0.0, 0.0]),
            SpaceElement::real(&[0.0, 1.0, 0.0]),
        ];
        let cone = generated_cone(&space, &gens).unwrap();
        assert!(cone.fibers().is_some());
        let off_span = MatrixElement::from_element(&SpaceElement::real(&[1.0, 1.0, 0.5]));
        assert!(membership(cone.as_ref(), &off_span).unwrap().is_non_member());
    }

    fn random_psd(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
        let a = ComplexMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        &a * a.adjoint()
    }

    #[test]
    fn constructive_dmax_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let space = StarSpace::hermitian_basis(vec!["x".into(), "y".into()], &[1.0, 1.0]).unwrap();
        let gens = vec![
            SpaceElement::real(&[1.0, 0.0]),
            SpaceElement::real(&[0.0, 1.0]),
            SpaceElement::real(&[1.0, 1.0]),
        ];
        let cone = GeneratedCone::new(&space, &gens, Tolerance::default()).unwrap();
        for _ in 0..10 {
            let mut x = MatrixElement::zeros(2, 2);
            for g in &gens {
                x = x.add(&MatrixElement::tensor(&random_psd(&mut rng, 2), g));
            }
            assert!(cone.dmax_psd(&x).unwrap().is_member());
        }
    }

    // a*(⊕v_i)a with v_i in the level-1 cone lands in the Σ g_j ⊗ S_j form,
    // and an eigen-split of each S_j rebuilds x as a*(⊕ g_j)a
    #[test]
    fn conjugated_direct_sums_match_generator_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let space = StarSpace::hermitian_basis(vec!["x".into(), "y".into()], &[1.0, 1.0]).unwrap();
        let gens = vec![
            SpaceElement::real(&[1.0, 0.0]),
            SpaceElement::real(&[0.0, 1.0]),
            SpaceElement::real(&[1.0, 1.0]),
        ];
        let cone = GeneratedCone::new(&space, &gens, Tolerance::default()).unwrap();
        for trial in 0..10 {
            let (m, n) = (1 + trial % 3, 2);
            let mut sum: Option<MatrixElement> = None;
            for _ in 0..m {
                let w: Vec<f64> = (0..gens.len()).map(|_| rng.random_range(0.0..1.0)).collect();
                let v = gens
                    .iter()
                    .zip(&w)
                    .fold(SpaceElement::real(&[0.0, 0.0]), |acc, (g, &c)| acc.add(&g.scale(c)));
                let v = MatrixElement::from_element(&v);
                sum = Some(match sum {
                    None => v,
                    Some(s) => s.direct_sum(&v),
                });
            }
            let a = ComplexMatrix::from_fn(m, n, |_, _| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let x = sum.unwrap().congruence(&a);
            assert!(cone.dmax_psd(&x).unwrap().is_member(), "trial {trial}");
        }

        for _ in 0..10 {
            let blocks: Vec<ComplexMatrix> = gens.iter().map(|_| random_psd(&mut rng, 2)).collect();
            let x = gens
                .iter()
                .zip(&blocks)
                .fold(MatrixElement::zeros(2, 2), |acc, (g, s)| {
                    acc.add(&MatrixElement::tensor(s, g))
                });
            // S = Σ_r s_r s_r*, so g ⊗ s s* = (s*)* g (s*)
            let mut rebuilt = MatrixElement::zeros(2, 2);
            for (g, s) in gens.iter().zip(&blocks) {
                let eig = s.clone().symmetric_eigen();
                for r in 0..2 {
                    let lam = eig.eigenvalues[r].max(0.0);
                    let col = eig.eigenvectors.column(r).map(|z| z * lam.sqrt());
                    let row = ComplexMatrix::from_fn(1, 2, |_, j| col[j].conj());
                    rebuilt = rebuilt.add(&MatrixElement::from_element(g).congruence(&row));
                }
            }
            let diff = x.sub(&rebuilt);
            assert!(diff.coeffs().iter().all(|c| c.norm() < 1e-10));
        }
    }

    #[test]
    fn diagonal_cone_tests_fibers_above_level_one() {
        // entrywise nonnegative but not positive at level 2
        let cone = diagonal_cone(&DiagonalModel::full(1));
        let x = MatrixElement::new(vec![from_real(2, 2, &[1., 2., 2., 1.])]).unwrap();
        assert!(membership(cone.as_ref(), &x).unwrap().is_non_member());
        let y = MatrixElement::new(vec![diag(&[1.0, 0.0])]).unwrap();
        assert!(membership(cone.as_ref(), &y).unwrap().is_member());
    }

    fn random_diag_member(rng: &mut impl Rng, d: usize, n: usize) -> MatrixElement {
        MatrixElement::new((0..d).map(|_| random_psd(rng, n)).collect()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn dmax_contained_in_diagonal_cone(seed in any::<u64>()) {
            // generators embed as diagonal PSD matrices
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = DiagonalModel::full(3);
            let gens = vec![
                SpaceElement::real(&[1.0, 1.0, 0.0]),
                SpaceElement::real(&[0.0, 1.0, 1.0]),
                SpaceElement::real(&[1.0, 0.0, 1.0]),
                SpaceElement::real(&[1.0, 0.0, 0.0]),
            ];
            let dmax = GeneratedCone::new(model.space(), &gens, Tolerance::default()).unwrap();
            let conc = diagonal_cone(&model);
            let mut x = MatrixElement::zeros(3, 2);
            for g in &gens {
                let s = if rng.random_bool(0.5) {
                    random_psd(&mut rng, 2)
                } else {
                    let h = random_psd(&mut rng, 2);
                    h - identity(2) * c(0.6)
                };
                x = x.add(&MatrixElement::tensor(&s, g));
            }
            let v = membership(&dmax, &x).unwrap();
            if v.is_member() {
                prop_assert!(membership(conc.as_ref(), &x).unwrap().is_member());
            }
        }

        #[test]
        fn closure_contains_cone(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cone = diagonal_cone(&DiagonalModel::full(3));
            let x = random_diag_member(&mut rng, 3, 2);
            prop_assert!(membership(cone.as_ref(), &x).unwrap().is_member());
            prop_assert!(archimedean_membership(cone.as_ref(), &x, &DEFAULT_SCHEDULE).unwrap().is_member());
        }

        #[test]
        fn cones_closed_under_sums_and_congruence(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cone = diagonal_cone(&DiagonalModel::full(2));
            prop_assert!(membership(cone.as_ref(), &MatrixElement::zeros(2, 3)).unwrap().is_member());
            let x = random_diag_member(&mut rng, 2, 2);
            let y = random_diag_member(&mut rng, 2, 3);
            prop_assert!(membership(cone.as_ref(), &x.direct_sum(&y)).unwrap().is_member());
            let a = ComplexMatrix::from_fn(2, 4, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let z = x.congruence(&a);
            prop_assert!(membership(cone.as_ref(), &z).unwrap().is_member());
        }

        #[test]
        fn order_norm_symmetries(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = DiagonalModel::full(3);
            let cone = diagonal_cone(&model);
            let space = model.space();
            let v = SpaceElement::real(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
            let lambda = rng.random_range(0.1..5.0);
            let n = order_norm(space, cone.as_ref(), &v, 1e-9).unwrap();
            let n_adj = order_norm(space, cone.as_ref(), &space.adjoint(&v), 1e-9).unwrap();
            let n_scaled = order_norm(space, cone.as_ref(), &v.scale(1.0 / lambda), 1e-9).unwrap();
            prop_assert!((n - n_adj).abs() < 1e-8);
            prop_assert!((n - lambda * n_scaled).abs() < 1e-7 * (1.0 + lambda));
            // diagonal oracle: the sup norm of the image
            let sup = v.re().iter().fold(0.0f64, |m, a| m.max(a.abs()));
            prop_assert!((n - sup).abs() < 1e-8);
        }

        #[test]
        fn quotient_is_unital_and_positive(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = DiagonalModel::full(3);
            let space = model.space();
            let gens: Vec<SpaceElement> = (0..3).map(|i| SpaceElement::basis(3, i)).collect();
            let j = SpaceElement::real(&[1.0, -1.0, 0.0]);
            let q = quotient_by_subspace(space, std::slice::from_ref(&j)).unwrap();
            let unit_image = q.project(space.unit());
            prop_assert!(unit_image.sub(q.space.unit()).coeffs.iter().all(|z| z.norm() < 1e-12));
            let images: Vec<SpaceElement> = gens.iter().map(|g| q.project(g)).collect();
            let qcone = generated_cone(&q.space, &images).unwrap();
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..2.0)).collect();
            let combo = gens.iter().zip(&w).fold(SpaceElement::zero(3), |acc, (g, &t)| acc.add(&g.scale(t)));
            let img = MatrixElement::from_element(&q.project(&combo));
            prop_assert!(membership(qcone.as_ref(), &img).unwrap().is_member());
        }
    }

    #[test]
    fn psd_witness_blocks_are_psd() {
        let (space, gens) = two_gen_space();
        let cone = GeneratedCone::new(&space, &gens, Tolerance::default()).unwrap();
        let x = MatrixElement::new(vec![identity(2), ones(2)]).unwrap();
        let v = cone.dmax_psd(&x).unwrap();
        let Certificate::PsdWitness { blocks, .. } = v.certificate else {
            panic!()
        };
        for b in blocks {
            assert!(is_psd_unchecked(&b.to_matrix(), &Tolerance::default()));
        }
    }
}
