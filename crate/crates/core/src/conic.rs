//! Feasibility oracles: a dense simplex LP with Farkas certificates, a
//! PSD-affine solver based on alternating projections, and lineality spaces
//! of finitely generated cones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c, eigenvalues_unchecked, psd_projection, spectrum_bounds, ComplexMatrix, RealMatrix, Tolerance, C64,
};
use crate::verdict::{Certificate, MatrixPayload, Verdict};

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const LP_MAX_PIVOTS: usize = 200_000;

/// `A x = b` with per-variable sign constraints and an optional objective to minimize.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub num_vars: usize,
    pub a_eq: RealMatrix,
    pub b_eq: Vec<f64>,
    pub nonneg: Vec<bool>,
    pub objective: Option<Vec<f64>>,
}

impl LpProblem {
    /// All variables nonnegative, no objective.
    pub fn feasibility(a_eq: RealMatrix, b_eq: Vec<f64>) -> Self {
        let num_vars = a_eq.ncols();
        Self {
            num_vars,
            a_eq,
            b_eq,
            nonneg: vec![true; num_vars],
            objective: None,
        }
    }

    pub fn with_objective(mut self, objective: Vec<f64>) -> Self {
        self.objective = Some(objective);
        self
    }

    fn check(&self) -> Result<()> {
        let mismatch = |what: String| Err(Error::DimensionMismatch(what));
        if self.a_eq.ncols() != self.num_vars {
            return mismatch(format!(
                "constraint matrix has {} columns for {} variables",
                self.a_eq.ncols(),
                self.num_vars
            ));
        }
        if self.a_eq.nrows() != self.b_eq.len() {
            return mismatch(format!(
                "{} constraint rows but {} right-hand sides",
                self.a_eq.nrows(),
                self.b_eq.len()
            ));
        }
        if self.nonneg.len() != self.num_vars {
            return mismatch(format!(
                "sign mask has {} entries for {} variables",
                self.nonneg.len(),
                self.num_vars
            ));
        }
        if let Some(obj) = &self.objective {
            if obj.len() != self.num_vars {
                return mismatch(format!(
                    "objective has {} entries for {} variables",
                    obj.len(),
                    self.num_vars
                ));
            }
        }
        Ok(())
    }

    /// Residual `max |A x - b|`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.a_eq.nrows() {
            let row: f64 = (0..self.num_vars).map(|j| self.a_eq[(i, j)] * x[j]).sum();
            worst = worst.max((row - self.b_eq[i]).abs());
        }
        worst
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal {
        x: Vec<f64>,
        value: f64,
    },
    /// `f` with `fᵀA ≥ 0` on sign-constrained columns, `fᵀA = 0` on free
    /// columns and `fᵀb < 0`.
    Infeasible {
        farkas: Vec<f64>,
    },
    Unbounded,
    IterationLimit,
}

struct Tableau {
    rows: usize,
    width: usize,
    t: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let w = self.width;
        let inv = 1.0 / self.t[p * w + q];
        for j in 0..w {
            self.t[p * w + j] *= inv;
        }
        self.t[p * w + q] = 1.0;
        let prow: Vec<f64> = self.t[p * w..(p + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == p {
                continue;
            }
            let f = self.t[i * w + q];
            if f != 0.0 {
                for j in 0..w {
                    self.t[i * w + j] -= f * prow[j];
                }
                self.t[i * w + q] = 0.0;
            }
        }
        let f = self.cost[q];
        if f != 0.0 {
            for j in 0..w {
                self.cost[j] -= f * prow[j];
            }
            self.cost[q] = 0.0;
        }
        self.basis[p] = q;
    }

    fn remove_row(&mut self, p: usize) {
        let w = self.width;
        self.t.drain(p * w..(p + 1) * w);
        self.basis.remove(p);
        self.rows -= 1;
    }

    /// Bland-rule simplex over columns `< allowed`. Returns false when unbounded.
    fn optimize(&mut self, allowed: usize, pivots: &mut usize) -> Option<bool> {
        loop {
            let Some(q) = (0..allowed).find(|&j| self.cost[j] < -OPT_TOL) else {
                return Some(true);
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, q);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((p, _)) = best else {
                return Some(false);
            };
            self.pivot(p, q);
            *pivots += 1;
            if *pivots > LP_MAX_PIVOTS {
                return None;
            }
        }
    }
}

/// Two-phase dense simplex minimizing the objective (zero if absent).
pub fn lp_solve(prob: &LpProblem) -> Result<LpOutcome> {
    prob.check()?;
    let m = prob.a_eq.nrows();
    // structural columns: one per variable, plus a negative copy for free ones
    let mut columns: Vec<(usize, f64)> = Vec::new();
    for j in 0..prob.num_vars {
        columns.push((j, 1.0));
        if !prob.nonneg[j] {
            columns.push((j, -1.0));
        }
    }
    let s = columns.len();
    let width = s + m + 1;
    let mut t = vec![0.0; m * width];
    let mut flipped = vec![false; m];
    for i in 0..m {
        let sign = if prob.b_eq[i] < 0.0 { -1.0 } else { 1.0 };
        flipped[i] = sign < 0.0;
        for (col, &(j, sgn)) in columns.iter().enumerate() {
            t[i * width + col] = sign * sgn * prob.a_eq[(i, j)];
        }
        t[i * width + s + i] = 1.0;
        t[i * width + width - 1] = sign * prob.b_eq[i];
    }
    let mut cost = vec![0.0; width];
    for i in 0..m {
        for j in 0..s {
            cost[j] -= t[i * width + j];
        }
        cost[width - 1] -= t[i * width + width - 1];
    }
    let mut tab = Tableau {
        rows: m,
        width,
        t,
        cost,
        basis: (s..s + m).collect(),
    };
    let mut pivots = 0;
    if tab.optimize(s, &mut pivots).is_none() {
        return Ok(LpOutcome::IterationLimit);
    }
    let infeasibility = -tab.cost[width - 1];
    let scale = 1.0 + prob.b_eq.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if infeasibility > 1e-9 * scale {
        let farkas = (0..m)
            .map(|i| {
                let y = 1.0 - tab.cost[s + i];
                if flipped[i] {
                    y
                } else {
                    -y
                }
            })
            .collect();
        return Ok(LpOutcome::Infeasible { farkas });
    }

    // drive remaining artificials out of the basis, dropping redundant rows
    let mut i = 0;
    while i < tab.rows {
        if tab.basis[i] >= s {
            let candidate = (0..s)
                .filter(|&j| tab.at(i, j).abs() > PIVOT_TOL)
                .max_by(|&a, &b| tab.at(i, a).abs().total_cmp(&tab.at(i, b).abs()));
            match candidate {
                Some(q) => tab.pivot(i, q),
                None => {
                    tab.remove_row(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    let obj: Vec<f64> = match &prob.objective {
        Some(o) => columns.iter().map(|&(j, sgn)| sgn * o[j]).collect(),
        None => vec![0.0; s],
    };
    let mut cost = vec![0.0; width];
    cost[..s].copy_from_slice(&obj);
    for r in 0..tab.rows {
        let cb = obj.get(tab.basis[r]).copied().unwrap_or(0.0);
        if cb != 0.0 {
            for j in 0..width {
                cost[j] -= cb * tab.at(r, j);
            }
        }
    }
    tab.cost = cost;
    match tab.optimize(s, &mut pivots) {
        None => return Ok(LpOutcome::IterationLimit),
        Some(false) => return Ok(LpOutcome::Unbounded),
        Some(true) => {}
    }
    let mut z = vec![0.0; s];
    for r in 0..tab.rows {
        if tab.basis[r] < s {
            z[tab.basis[r]] = tab.rhs(r).max(0.0);
        }
    }
    let mut x = vec![0.0; prob.num_vars];
    for (col, &(j, sgn)) in columns.iter().enumerate() {
        x[j] += sgn * z[col];
    }
    let value = match &prob.objective {
        Some(o) => o.iter().zip(&x).map(|(a, b)| a * b).sum(),
        None => 0.0,
    };
    Ok(LpOutcome::Optimal { x, value })
}

/// Smallest value of `fᵀA_j` over columns, where free columns count with `-|fᵀA_j|`.
fn farkas_margin(prob: &LpProblem, f: &[f64]) -> (f64, f64) {
    let mut min_gen = f64::INFINITY;
    for j in 0..prob.num_vars {
        let v: f64 = (0..prob.a_eq.nrows()).map(|i| f[i] * prob.a_eq[(i, j)]).sum();
        let v = if prob.nonneg[j] { v } else { -v.abs() };
        min_gen = min_gen.min(v);
    }
    let target: f64 = f.iter().zip(&prob.b_eq).map(|(a, b)| a * b).sum();
    (if min_gen.is_finite() { min_gen } else { 0.0 }, target)
}

pub fn lp_feasible(prob: &LpProblem) -> Result<Verdict> {
    let feas = LpProblem {
        objective: None,
        ..prob.clone()
    };
    Ok(match lp_solve(&feas)? {
        LpOutcome::Optimal { x, .. } => {
            let residual = prob.residual(&x);
            Verdict::member(Certificate::LpWitness { x, residual })
        }
        LpOutcome::Infeasible { farkas } => {
            let (min_generator_value, target_value) = farkas_margin(prob, &farkas);
            Verdict::non_member(Certificate::Separator {
                functional: farkas,
                target_value,
                min_generator_value,
            })
        }
        LpOutcome::Unbounded => unreachable!("feasibility problems have a zero objective"),
        LpOutcome::IterationLimit => Verdict::unknown(Certificate::Budget {
            reason: format!("simplex pivot limit {LP_MAX_PIVOTS} reached"),
        }),
    })
}

/// Isometric real coordinates of a hermitian matrix: the diagonal, then
/// `√2·Re` and `√2·Im` of each strictly upper entry.
pub fn hvec(m: &ComplexMatrix) -> Vec<f64> {
    let n = m.nrows();
    let mut v = Vec::with_capacity(n * n);
    for i in 0..n {
        v.push(m[(i, i)].re);
    }
    let r2 = std::f64::consts::SQRT_2;
    for i in 0..n {
        for j in i + 1..n {
            v.push(r2 * m[(i, j)].re);
            v.push(r2 * m[(i, j)].im);
        }
    }
    v
}

pub fn hmat(v: &[f64], n: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = c(v[i]);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut k = n;
    for i in 0..n {
        for j in i + 1..n {
            let z = C64::new(s * v[k], s * v[k + 1]);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    m
}

/// Find PSD blocks `S_1, …, S_r` with `A · vec(S) = b`, where `vec` stacks the
/// [`hvec`] coordinates of the blocks.
#[derive(Clone, Debug)]
pub struct PsdAffineProblem {
    pub block_sizes: Vec<usize>,
    pub matrix: RealMatrix,
    pub rhs: Vec<f64>,
    pub tol: Tolerance,
    pub max_iter: usize,
    pub stall_window: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverBudget {
    pub max_iter: usize,
    pub stall_window: usize,
}

impl Default for SolverBudget {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            stall_window: 200,
        }
    }
}

impl PsdAffineProblem {
    pub fn new(block_sizes: Vec<usize>, matrix: RealMatrix, rhs: Vec<f64>, tol: Tolerance) -> Result<Self> {
        let budget = SolverBudget::default();
        let p = Self {
            block_sizes,
            matrix,
            rhs,
            tol,
            max_iter: budget.max_iter,
            stall_window: budget.stall_window,
        };
        p.check()?;
        Ok(p)
    }

    /// Builds the constraint matrix column by column from a real-linear map on
    /// block tuples.
    pub fn from_map(
        block_sizes: Vec<usize>,
        map: impl Fn(&[ComplexMatrix]) -> Vec<f64>,
        rhs: Vec<f64>,
        tol: Tolerance,
    ) -> Result<Self> {
        let dof: usize = block_sizes.iter().map(|n| n * n).sum();
        let rows = rhs.len();
        let mut matrix = RealMatrix::zeros(rows, dof);
        let mut unit = vec![0.0; dof];
        for col in 0..dof {
            unit[col] = 1.0;
            let blocks = unstack(&unit, &block_sizes);
            let image = map(&blocks);
            if image.len() != rows {
                return Err(Error::DimensionMismatch(format!(
                    "map produced {} values for {rows} constraints",
                    image.len()
                )));
            }
            for (r, v) in image.into_iter().enumerate() {
                matrix[(r, col)] = v;
            }
            unit[col] = 0.0;
        }
        Self::new(block_sizes, matrix, rhs, tol)
    }

    pub fn dof(&self) -> usize {
        self.block_sizes.iter().map(|n| n * n).sum()
    }

    fn check(&self) -> Result<()> {
        if self.matrix.ncols() != self.dof() {
            return Err(Error::DimensionMismatch(format!(
                "constraint matrix has {} columns for {} block coordinates",
                self.matrix.ncols(),
                self.dof()
            )));
        }
        if self.matrix.nrows() != self.rhs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} constraint rows but {} right-hand sides",
                self.matrix.nrows(),
                self.rhs.len()
            )));
        }
        Ok(())
    }
}

fn unstack(v: &[f64], sizes: &[usize]) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut off = 0;
    for &n in sizes {
        out.push(hmat(&v[off..off + n * n], n));
        off += n * n;
    }
    out
}

fn project_cone(v: &[f64], sizes: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len());
    let mut off = 0;
    for &n in sizes {
        let block = hmat(&v[off..off + n * n], n);
        out.extend(hvec(&psd_projection(&block)));
        off += n * n;
    }
    out
}

/// Minimum over blocks of `λ_min + slack(‖block‖)`, and the smallest eigenvalue.
fn block_margin(v: &[f64], sizes: &[usize], tol: &Tolerance) -> (f64, f64) {
    let mut margin = f64::INFINITY;
    let mut lowest = f64::INFINITY;
    let mut off = 0;
    for &n in sizes {
        let block = hmat(&v[off..off + n * n], n);
        let (lo, norm) = spectrum_bounds(&block);
        margin = margin.min(lo + tol.psd_slack(norm));
        lowest = lowest.min(lo);
        off += n * n;
    }
    if sizes.is_empty() {
        (0.0, 0.0)
    } else {
        (margin, lowest)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct AffineProjector {
    /// Orthonormal basis of the row space (D × r).
    v: RealMatrix,
    /// Orthonormal basis of the column space (m × r).
    u: RealMatrix,
    sigma: Vec<f64>,
    /// Minimum-norm solution of `A z = b` (least squares if inconsistent).
    z0: Vec<f64>,
    /// Component of `b` outside the range of `A`.
    b_perp: Vec<f64>,
}

impl AffineProjector {
    fn new(a: &RealMatrix, b: &[f64]) -> Self {
        let (m, d) = a.shape();
        if m == 0 || d == 0 {
            return Self {
                v: RealMatrix::zeros(d, 0),
                u: RealMatrix::zeros(m, 0),
                sigma: Vec::new(),
                z0: vec![0.0; d],
                b_perp: b.to_vec(),
            };
        }
        let svd = a.clone().svd(true, true);
        let u_full = svd.u.expect("requested U");
        let vt_full = svd.v_t.expect("requested V^T");
        let top = svd.singular_values.iter().fold(0.0f64, |x, &y| x.max(y));
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > 1e-12 * top.max(1e-300))
            .collect();
        let r = keep.len();
        let u = RealMatrix::from_fn(m, r, |i, k| u_full[(i, keep[k])]);
        let v = RealMatrix::from_fn(d, r, |i, k| vt_full[(keep[k], i)]);
        let sigma: Vec<f64> = keep.iter().map(|&i| svd.singular_values[i]).collect();
        let bv = nalgebra::DVector::from_column_slice(b);
        let ub = u.transpose() * &bv;
        let scaled = nalgebra::DVector::from_fn(r, |k, _| ub[k] / sigma[k]);
        let z0 = (&v * scaled).iter().copied().collect();
        let b_perp = (&bv - &u * ub).iter().copied().collect();
        Self {
            v,
            u,
            sigma,
            z0,
            b_perp,
        }
    }

    fn project(&self, z: &[f64]) -> Vec<f64> {
        let zv = nalgebra::DVector::from_column_slice(z);
        let coords = self.v.transpose() * &zv;
        let inside = &self.v * coords;
        z.iter()
            .zip(inside.iter())
            .zip(&self.z0)
            .map(|((a, b), c0)| a - b + c0)
            .collect()
    }

    /// Least-squares `y` with `Aᵀ y ≈ g`, together with `Aᵀ y`.
    fn adjoint_solve(&self, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let gv = nalgebra::DVector::from_column_slice(g);
        let coords = self.v.transpose() * &gv;
        let scaled = nalgebra::DVector::from_fn(self.sigma.len(), |k, _| coords[k] / self.sigma[k]);
        let y = (&self.u * scaled).iter().copied().collect();
        let image = (&self.v * coords).iter().copied().collect();
        (y, image)
    }
}

fn residual(a: &RealMatrix, z: &[f64], b: &[f64]) -> f64 {
    let zv = nalgebra::DVector::from_column_slice(z);
    let az = a * zv;
    az.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn witness(prob: &PsdAffineProblem, z: &[f64]) -> Verdict {
    let blocks = unstack(z, &prob.block_sizes);
    let min_eigenvalue = blocks
        .iter()
        .filter_map(|b| eigenvalues_unchecked(b).first().copied())
        .fold(f64::INFINITY, f64::min);
    Verdict::member(Certificate::PsdWitness {
        blocks: blocks.iter().map(MatrixPayload::from).collect(),
        residual: residual(&prob.matrix, z, &prob.rhs),
        min_eigenvalue: if min_eigenvalue.is_finite() {
            min_eigenvalue
        } else {
            0.0
        },
    })
}

/// Tries to turn the current gap direction into a verified separator.
fn try_separator(
    prob: &PsdAffineProblem,
    proj: &AffineProjector,
    gap: &[f64],
    repair: Option<&(Vec<f64>, Vec<f64>)>,
) -> Option<Verdict> {
    let neg: Vec<f64> = gap.iter().map(|x| -x).collect();
    let (mut y, mut image) = proj.adjoint_solve(&neg);
    let scale = norm(&image);
    if scale <= 1e-300 {
        return None;
    }
    for v in y.iter_mut().chain(image.iter_mut()) {
        *v /= scale;
    }
    let (_, lowest) = block_margin(&image, &prob.block_sizes, &prob.tol);
    if lowest < 0.0 {
        // push the adjoint image into the cone along a strictly positive direction
        if let Some((ry, rimage)) = repair {
            let (_, rlow) = block_margin(rimage, &prob.block_sizes, &prob.tol);
            if rlow > 0.0 {
                let s = -lowest / rlow;
                for (a, b) in y.iter_mut().zip(ry) {
                    *a += s * b;
                }
                for (a, b) in image.iter_mut().zip(rimage) {
                    *a += s * b;
                }
            }
        }
    }
    let (margin, lowest) = block_margin(&image, &prob.block_sizes, &prob.tol);
    let pairing = dot(&y, &prob.rhs);
    let norm_img = norm(&image);
    if margin >= 0.0 && pairing < -prob.tol.affine_eps * norm_img.max(1.0) {
        Some(Verdict::non_member(Certificate::PsdSeparator {
            functional: y,
            target_value: pairing,
            min_block_eigenvalue: lowest,
        }))
    } else {
        None
    }
}

/// Alternating projections between the PSD block cone and the affine set.
pub fn psd_affine_feasible(prob: &PsdAffineProblem) -> Result<Verdict> {
    prob.check()?;
    let d = prob.dof();
    let proj = AffineProjector::new(&prob.matrix, &prob.rhs);
    let tol = prob.tol;

    let inconsistency = norm(&proj.b_perp);
    if inconsistency > tol.affine_eps {
        // the affine system alone has no solution: y = -b_perp has Aᵀy = 0
        let y: Vec<f64> = proj.b_perp.iter().map(|v| -v / inconsistency).collect();
        let pairing = dot(&y, &prob.rhs);
        return Ok(Verdict::non_member(Certificate::PsdSeparator {
            functional: y,
            target_value: pairing,
            min_block_eigenvalue: 0.0,
        }));
    }

    // direction whose adjoint image is the identity in every block, if reachable
    let identity: Vec<f64> = prob
        .block_sizes
        .iter()
        .flat_map(|&n| hvec(&ComplexMatrix::identity(n, n)))
        .collect();
    let repair = if d > 0 && proj.sigma.len() > 0 {
        Some(proj.adjoint_solve(&identity))
    } else {
        None
    };

    let mut z = proj.z0.clone();
    let mut checkpoint = f64::INFINITY;
    for iter in 0..prob.max_iter {
        let (margin, _) = block_margin(&z, &prob.block_sizes, &tol);
        if margin >= 0.0 && residual(&prob.matrix, &z, &prob.rhs) <= tol.affine_eps {
            return Ok(witness(prob, &z));
        }
        let k = project_cone(&z, &prob.block_sizes);
        if residual(&prob.matrix, &k, &prob.rhs) <= tol.affine_eps {
            return Ok(witness(prob, &k));
        }
        let next = proj.project(&k);
        let gap: Vec<f64> = next.iter().zip(&k).map(|(a, b)| a - b).collect();
        let gap_norm = norm(&gap);
        z = next;
        if (iter + 1) % prob.stall_window == 0 {
            if gap_norm > 0.99 * checkpoint {
                let diff: Vec<f64> = z
                    .iter()
                    .zip(project_cone(&z, &prob.block_sizes))
                    .map(|(a, b)| a - b)
                    .collect();
                if let Some(v) = try_separator(prob, &proj, &diff, repair.as_ref()) {
                    return Ok(v);
                }
            }
            checkpoint = gap_norm;
        }
    }
    let diff: Vec<f64> = z
        .iter()
        .zip(project_cone(&z, &prob.block_sizes))
        .map(|(a, b)| a - b)
        .collect();
    if let Some(v) = try_separator(prob, &proj, &diff, repair.as_ref()) {
        return Ok(v);
    }
    Ok(Verdict::unknown(Certificate::Budget {
        reason: format!(
            "alternating projections: {} iterations without a verified witness or separator",
            prob.max_iter
        ),
    }))
}

/// Basis of the lineality space `cone ∩ −cone` of the cone generated by the
/// given vectors. One LP per generator decides whether `−g` lies in the cone.
pub fn lineality_basis(generators: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let Some(first) = generators.first() else {
        return Ok(Vec::new());
    };
    let dim = first.len();
    if generators.iter().any(|g| g.len() != dim) {
        return Err(Error::DimensionMismatch("generators have different lengths".into()));
    }
    let a = RealMatrix::from_fn(dim, generators.len(), |i, j| generators[j][i]);
    let mut lineal: Vec<&Vec<f64>> = Vec::new();
    for g in generators {
        let b: Vec<f64> = g.iter().map(|v| -v).collect();
        let verdict = lp_feasible(&LpProblem::feasibility(a.clone(), b))?;
        if verdict.is_member() {
            lineal.push(g);
        }
    }
    // greedy Gram-Schmidt selection keeps actual generators as the basis
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut ortho: Vec<Vec<f64>> = Vec::new();
    for g in lineal {
        let mut r = g.clone();
        for q in &ortho {
            let s = dot(&r, q);
            for (x, y) in r.iter_mut().zip(q) {
                *x -= s * y;
            }
        }
        let nr = norm(&r);
        if nr > 1e-9 * norm(g).max(1e-300) {
            ortho.push(r.iter().map(|x| x / nr).collect());
            basis.push(g.clone());
        }
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real, is_psd_unchecked};
    use crate::verdict::Status;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lp(rows: usize, cols: usize, a: &[f64], b: &[f64]) -> LpProblem {
        LpProblem::feasibility(RealMatrix::from_row_slice(rows, cols, a), b.to_vec())
    }

    fn check_separator(prob: &LpProblem, v: &Verdict) {
        let Certificate::Separator { functional, .. } = &v.certificate else {
            panic!("expected separator, got {:?}", v.certificate);
        };
        let (min_gen, target) = farkas_margin(prob, functional);
        assert!(min_gen >= -1e-9, "generator value {min_gen}");
        assert!(target < 0.0, "target value {target}");
    }

    #[test]
    fn lp_examples() {
        let p = lp(1, 1, &[1.0], &[-1.0]);
        let v = lp_feasible(&p).unwrap();
        assert_eq!(v.status, Status::NonMember);
        check_separator(&p, &v);

        let v = lp_feasible(&lp(1, 2, &[1.0, 1.0], &[1.0])).unwrap();
        let Certificate::LpWitness { x, residual } = v.certificate else {
            panic!()
        };
        assert!(residual < 1e-12 && x.iter().all(|&t| t >= 0.0));

        let v = lp_feasible(&lp(1, 1, &[2.0], &[1.0])).unwrap();
        let Certificate::LpWitness { x, .. } = v.certificate else {
            panic!()
        };
        assert!((x[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lp_rejects_bad_dimensions() {
        let mut p = lp(1, 2, &[1.0, 1.0], &[1.0]);
        p.nonneg.pop();
        assert!(matches!(lp_feasible(&p), Err(Error::DimensionMismatch(_))));
        let p = LpProblem::feasibility(RealMatrix::zeros(2, 2), vec![1.0]);
        assert!(lp_feasible(&p).is_err());
    }

    #[test]
    fn lp_redundant_and_free_rows() {
        // duplicate rows, one free variable
        let mut p = lp(3, 3, &[1., 1., 0., 2., 2., 0., 0., 1., 1.], &[1., 2., -3.]);
        p.nonneg[2] = false;
        let v = lp_feasible(&p).unwrap();
        let Certificate::LpWitness { residual, x } = v.certificate else {
            panic!("{v:?}")
        };
        assert!(residual < 1e-9);
        assert!(x[0] >= 0.0 && x[1] >= 0.0);

        let p = lp(2, 2, &[1., 1., 1., 1.], &[1., 2.]);
        let v = lp_feasible(&p).unwrap();
        assert_eq!(v.status, Status::NonMember);
        check_separator(&p, &v);
    }

    #[test]
    fn lp_optimizes() {
        // maximize x + 2y subject to x + y + s = 4, x + 3y + s2 = 6
        let p = LpProblem::feasibility(
            RealMatrix::from_row_slice(2, 4, &[1., 1., 1., 0., 1., 3., 0., 1.]),
            vec![4., 6.],
        )
        .with_objective(vec![-1., -2., 0., 0.]);
        let LpOutcome::Optimal { x, value } = lp_solve(&p).unwrap() else {
            panic!()
        };
        assert!((value + 5.0).abs() < 1e-9, "{value} {x:?}");

        let p = LpProblem::feasibility(RealMatrix::from_row_slice(1, 2, &[1., -1.]), vec![0.])
            .with_objective(vec![-1., 0.]);
        assert_eq!(lp_solve(&p).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn hvec_is_isometric() {
        let m = from_real(2, 2, &[1., 2., 2., 3.]);
        let v = hvec(&m);
        let frob: f64 = m.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm(&v).powi(2) - frob).abs() < 1e-12);
        assert!((hmat(&v, 2) - m).iter().all(|z| z.norm() < 1e-14));
    }

    fn trace_offdiag_problem(off: f64) -> PsdAffineProblem {
        PsdAffineProblem::from_map(
            vec![2],
            |b| vec![b[0][(0, 0)].re + b[0][(1, 1)].re, b[0][(0, 1)].re, b[0][(0, 1)].im],
            vec![1.0, off, 0.0],
            Tolerance::default(),
        )
        .unwrap()
    }

    #[test]
    fn psd_affine_infeasible_offdiagonal() {
        // grid oracle: a(1-a) never reaches 0.36
        let best = (0..=10_000)
            .map(|i| {
                let a = i as f64 / 10_000.0;
                a * (1.0 - a)
            })
            .fold(0.0f64, f64::max);
        assert!(best < 0.36);

        let prob = trace_offdiag_problem(0.6);
        let v = psd_affine_feasible(&prob).unwrap();
        assert_eq!(v.status, Status::NonMember, "{v:?}");
        let Certificate::PsdSeparator {
            functional,
            target_value,
            ..
        } = &v.certificate
        else {
            panic!()
        };
        assert!(*target_value < -prob.tol.affine_eps);
        // adjoint image must be PSD
        let y = nalgebra::DVector::from_column_slice(functional);
        let img: Vec<f64> = (prob.matrix.transpose() * y).iter().copied().collect();
        assert!(is_psd_unchecked(&hmat(&img, 2), &prob.tol));
    }

    #[test]
    fn psd_affine_feasible_offdiagonal() {
        let prob = trace_offdiag_problem(0.3);
        let v = psd_affine_feasible(&prob).unwrap();
        let Certificate::PsdWitness { blocks, residual, .. } = &v.certificate else {
            panic!("{v:?}")
        };
        assert!(*residual <= prob.tol.affine_eps);
        let s = blocks[0].to_matrix();
        assert!(is_psd_unchecked(&s, &prob.tol));
        let expected = from_real(2, 2, &[0.5, 0.3, 0.3, 0.5]);
        assert!((s - expected).iter().all(|z| z.norm() < 1e-6));
    }

    #[test]
    fn psd_affine_no_constraints() {
        let prob = PsdAffineProblem::new(vec![2, 1], RealMatrix::zeros(0, 5), vec![], Tolerance::default()).unwrap();
        let v = psd_affine_feasible(&prob).unwrap();
        let Certificate::PsdWitness { blocks, .. } = &v.certificate else {
            panic!()
        };
        assert!(blocks.iter().all(|b| b.entries.iter().all(|e| *e == [0.0, 0.0])));
    }

    #[test]
    fn psd_affine_inconsistent_system() {
        let prob = PsdAffineProblem::from_map(
            vec![1],
            |b| vec![b[0][(0, 0)].re, b[0][(0, 0)].re],
            vec![1.0, 2.0],
            Tolerance::default(),
        )
        .unwrap();
        assert_eq!(psd_affine_feasible(&prob).unwrap().status, Status::NonMember);
    }

    #[test]
    fn lineality_examples() {
        let b = lineality_basis(&[vec![1., 0.], vec![-1., 0.], vec![0., 1.]]).unwrap();
        assert_eq!(b.len(), 1);
        assert!(b[0][1].abs() < 1e-12 && b[0][0].abs() > 0.5);
        assert!(lineality_basis(&[vec![1., 0.], vec![0., 1.]]).unwrap().is_empty());
        assert!(lineality_basis(&[]).unwrap().is_empty());
    }

    fn random_lp(rng: &mut ChaCha8Rng) -> LpProblem {
        let m = rng.random_range(1..4);
        let n = rng.random_range(1..5);
        let a = RealMatrix::from_fn(m, n, |_, _| rng.random_range(-2i32..3) as f64);
        let b = (0..m).map(|_| rng.random_range(-3i32..4) as f64).collect();
        let mut p = LpProblem::feasibility(a, b);
        for j in 0..n {
            p.nonneg[j] = rng.random_bool(0.8);
        }
        p
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn lp_certificates_round_trip(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_lp(&mut rng);
            let v = lp_feasible(&p).unwrap();
            match &v.certificate {
                Certificate::LpWitness { x, residual } => {
                    prop_assert!(*residual <= 1e-8);
                    for j in 0..p.num_vars {
                        prop_assert!(!p.nonneg[j] || x[j] >= 0.0);
                    }
                }
                Certificate::Separator { functional, .. } => {
                    let (min_gen, target) = farkas_margin(&p, functional);
                    prop_assert!(min_gen >= -1e-9);
                    prop_assert!(target < 0.0);
                }
                other => prop_assert!(false, "unexpected {other:?}"),
            }
            // determinism
            prop_assert_eq!(lp_feasible(&p).unwrap(), v);
        }

        #[test]
        fn psd_affine_round_trip(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let off = rng.random_range(0.0..0.9);
            let im = rng.random_range(-0.3..0.3);
            let prob = PsdAffineProblem::from_map(
                vec![2],
                |b| vec![b[0][(0, 0)].re + b[0][(1, 1)].re, b[0][(0, 1)].re, b[0][(0, 1)].im],
                vec![1.0, off, im],
                Tolerance::default(),
            ).unwrap();
            let v = psd_affine_feasible(&prob).unwrap();
            let feasible = off * off + im * im <= 0.25;
            match &v.certificate {
                Certificate::PsdWitness { blocks, residual, min_eigenvalue } => {
                    prop_assert!(*residual <= prob.tol.affine_eps);
                    prop_assert!(is_psd_unchecked(&blocks[0].to_matrix(), &prob.tol));
                    prop_assert!(*min_eigenvalue >= -1e-8);
                }
                Certificate::PsdSeparator { functional, target_value, .. } => {
                    prop_assert!(!feasible);
                    prop_assert!(*target_value < 0.0);
                    let y = nalgebra::DVector::from_column_slice(functional);
                    let img: Vec<f64> = (prob.matrix.transpose() * y).iter().copied().collect();
                    prop_assert!(is_psd_unchecked(&hmat(&img, 2), &prob.tol));
                }
                Certificate::Budget { .. } => {
                    // near-boundary instances may exhaust the budget
                    prop_assert!((off * off + im * im - 0.25).abs() < 1e-2);
                }
                other => prop_assert!(false, "unexpected {other:?}"),
            }
        }
    }
}
