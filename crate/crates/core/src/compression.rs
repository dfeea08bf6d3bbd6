//! Compression cones built from tuples of positive contractions, their level
//! hierarchy and inductive limit, and the probe-based projection test.
//!
//! For a contraction tuple `p_1, …, p_N` the operators are
//! `P_k = I_{2^{k-1}} ⊗ (p_k ⊕ p_k^⊥) ⊗ J_{2^{N-k}}` and `Q_k` with `p_k` and
//! `p_k^⊥` swapped; the hat variants replace the leading identity by `J`.
//! An element `x` at level `n·2^N` is in the compression cone when for every
//! scheduled `ε` some `t ∈ (0, t_max]^N` puts
//! `x + Σ ε I_n⊗P_k + Σ t_k I_n⊗Q_k` in the ambient cone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, identity, ones, ComplexMatrix, Tolerance};
use crate::space::{
    check_element, membership, schedule_rounds, validate_schedule, Cone, MatrixElement, SpaceElement, StarSpace,
    DEFAULT_SCHEDULE,
};
use crate::verdict::{Certificate, Status, Verdict};

pub const DEFAULT_T_MAX: f64 = 1e6;
pub const DEFAULT_BUDGET_ROWS: usize = 4096;

/// A tuple of positive contractions `0 ≤ p_i ≤ e` in an ambient cone.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionTuple {
    space: StarSpace,
    ps: Vec<SpaceElement>,
}

impl ContractionTuple {
    pub fn new(ambient: &dyn Cone, ps: Vec<SpaceElement>) -> Result<Self> {
        let space = ambient.space().clone();
        for (i, p) in ps.iter().enumerate() {
            let index = i + 1;
            if p.dim() != space.dim() {
                return Err(Error::NotContraction {
                    index,
                    detail: format!("{} coefficients in dimension {}", p.dim(), space.dim()),
                });
            }
            if !space.is_hermitian(p) {
                return Err(Error::NotContraction {
                    index,
                    detail: "not hermitian".into(),
                });
            }
            let lower = membership(ambient, &MatrixElement::from_element(p))?;
            if !lower.is_member() {
                return Err(Error::NotContraction {
                    index,
                    detail: format!("p is not positive ({})", lower.status),
                });
            }
            let upper = membership(ambient, &MatrixElement::from_element(&space.unit().sub(p)))?;
            if !upper.is_member() {
                return Err(Error::NotContraction {
                    index,
                    detail: format!("e - p is not positive ({})", upper.status),
                });
            }
        }
        if ps.is_empty() {
            return Err(Error::NotContraction {
                index: 0,
                detail: "the tuple is empty".into(),
            });
        }
        Ok(Self { space, ps })
    }

    pub fn len(&self) -> usize {
        self.ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ps.is_empty()
    }

    pub fn space(&self) -> &StarSpace {
        &self.space
    }

    pub fn ps(&self) -> &[SpaceElement] {
        &self.ps
    }

    /// `p_i^⊥ = e − p_i` (zero-based).
    pub fn complement(&self, i: usize) -> SpaceElement {
        self.space.unit().sub(&self.ps[i])
    }

    /// The tuple listed `times` times in a row.
    pub fn repeated(&self, times: usize) -> Self {
        Self {
            space: self.space.clone(),
            ps: (0..times).flat_map(|_| self.ps.iter().cloned()).collect(),
        }
    }

    /// The tuple in the order given by `perm` (zero-based positions).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            space: self.space.clone(),
            ps: perm.iter().map(|&i| self.ps[i].clone()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub eps: Vec<f64>,
    pub t_max: f64,
    pub budget_rows: usize,
    pub tol: Tolerance,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            eps: DEFAULT_SCHEDULE.to_vec(),
            t_max: DEFAULT_T_MAX,
            budget_rows: DEFAULT_BUDGET_ROWS,
            tol: Tolerance::default(),
        }
    }
}

impl ScheduleParams {
    pub fn validate(&self) -> Result<()> {
        validate_schedule(&self.eps)?;
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "t_max must be a positive real, got {}",
                self.t_max
            )));
        }
        Ok(())
    }
}

fn pow2(e: usize) -> usize {
    1usize << e
}

/// Rows needed for level `n` with `bits` doubling factors, saturating.
pub fn required_rows(n: usize, bits: usize) -> u128 {
    if bits >= 100 {
        return u128::MAX;
    }
    (n as u128).saturating_mul(1u128 << bits)
}

fn check_budget(n: usize, bits: usize, params: &ScheduleParams) -> Result<()> {
    let rows = required_rows(n, bits);
    if rows > params.budget_rows as u128 {
        return Err(Error::BudgetExceeded {
            rows,
            budget: params.budget_rows,
        });
    }
    Ok(())
}

fn operator(tuple: &ContractionTuple, i: usize, swap: bool, hat: bool) -> Result<MatrixElement> {
    let n = tuple.len();
    if i == 0 || i > n {
        return Err(Error::IndexOutOfRange {
            what: "contraction",
            index: i,
            bound: n,
        });
    }
    let p = &tuple.ps[i - 1];
    let q = tuple.complement(i - 1);
    let (top, bottom) = if swap { (&q, p) } else { (p, &q) };
    let left = if hat { ones(pow2(i - 1)) } else { identity(pow2(i - 1)) };
    let right = ones(pow2(n - i));
    let coeffs = top
        .coeffs
        .iter()
        .zip(&bottom.coeffs)
        .map(|(&a, &b)| {
            let mut block = ComplexMatrix::zeros(2, 2);
            block[(0, 0)] = a;
            block[(1, 1)] = b;
            left.kronecker(&block).kronecker(&right)
        })
        .collect();
    MatrixElement::new(coeffs)
}

/// `P_i^N` (one-based `i`, `N` = tuple length).
pub fn build_p(tuple: &ContractionTuple, i: usize) -> Result<MatrixElement> {
    operator(tuple, i, false, false)
}

pub fn build_q(tuple: &ContractionTuple, i: usize) -> Result<MatrixElement> {
    operator(tuple, i, true, false)
}

pub fn build_p_hat(tuple: &ContractionTuple, i: usize) -> Result<MatrixElement> {
    operator(tuple, i, false, true)
}

pub fn build_q_hat(tuple: &ContractionTuple, i: usize) -> Result<MatrixElement> {
    operator(tuple, i, true, true)
}

fn level_operator(tuple: &ContractionTuple, i: usize, j: usize, levels: usize, swap: bool) -> Result<MatrixElement> {
    if j == 0 || j > levels {
        return Err(Error::IndexOutOfRange {
            what: "level copy",
            index: j,
            bound: levels,
        });
    }
    let n = tuple.len();
    let base = operator(tuple, i, swap, false)?;
    Ok(base
        .kron_left(&identity(pow2(n * (j - 1))))
        .kron_right(&ones(pow2(n * (levels - j)))))
}

/// `P_{i,j}^{N,L} = I_{2^{N(j-1)}} ⊗ P_i^N ⊗ J_{2^{N(L-j)}}`.
pub fn build_p_level(tuple: &ContractionTuple, i: usize, j: usize, levels: usize) -> Result<MatrixElement> {
    level_operator(tuple, i, j, levels, false)
}

pub fn build_q_level(tuple: &ContractionTuple, i: usize, j: usize, levels: usize) -> Result<MatrixElement> {
    level_operator(tuple, i, j, levels, true)
}

/// `(Σ_k ε_k I_n⊗P_k, [I_n⊗Q_k])` for a tuple at outer size `n`.
fn shift_operators(
    tuple: &ContractionTuple,
    n: usize,
    eps: &[f64],
    hat: bool,
) -> Result<(MatrixElement, Vec<MatrixElement>)> {
    let id = identity(n);
    let big = n * pow2(tuple.len());
    let mut psum = MatrixElement::zeros(tuple.space.dim(), big);
    let mut dirs = Vec::with_capacity(tuple.len());
    for k in 1..=tuple.len() {
        let p = operator(tuple, k, false, hat)?.kron_left(&id);
        psum = psum.axpy(eps[k - 1], &p);
        dirs.push(operator(tuple, k, true, hat)?.kron_left(&id));
    }
    Ok((psum, dirs))
}

fn sum_all(dirs: &[MatrixElement], dim: usize, level: usize) -> MatrixElement {
    dirs.iter().fold(MatrixElement::zeros(dim, level), |acc, d| acc.add(d))
}

fn outer_size(tuple: &ContractionTuple, x: &MatrixElement) -> Result<usize> {
    let block = pow2(tuple.len());
    if x.level() == 0 || x.level() % block != 0 {
        return Err(Error::DimensionMismatch(format!(
            "compression cone of {} contractions needs a level divisible by {block}, got {}",
            tuple.len(),
            x.level()
        )));
    }
    Ok(x.level() / block)
}

/// One scheduled round with an explicit `ε`-vector. With `find_t` the
/// smallest uniform `t` (up to bisection accuracy) is reported; otherwise
/// the witness is `t_max`.
fn round(
    cone: &dyn Cone,
    tuple: &ContractionTuple,
    x: &MatrixElement,
    eps: &[f64],
    params: &ScheduleParams,
    hat: bool,
    find_t: bool,
) -> Result<Verdict> {
    let n = outer_size(tuple, x)?;
    let (psum, dirs) = shift_operators(tuple, n, eps, hat)?;
    let base = x.add(&psum);
    let qsum = sum_all(&dirs, x.dim(), x.level());
    let n_ops = tuple.len();
    // the Q directions lie in the cone, so feasibility is monotone in t
    let top = cone.contains(&base.axpy(params.t_max, &qsum))?;
    match top.status {
        Status::Member => {}
        Status::NonMember => {
            return Ok(match cone.shift_obstruction(&base, &dirs)? {
                Some(cert) => Verdict::non_member(Certificate::ShiftObstruction {
                    reason: "functional is nonnegative on the cone, vanishes on every Q direction and is negative on the shifted element".into(),
                    inner: Box::new(cert),
                }),
                None => Verdict::unknown(Certificate::Budget {
                    reason: format!("infeasible at t_max = {} without a certificate for larger t", params.t_max),
                }),
            });
        }
        Status::Unknown => return Ok(top),
    }
    if !find_t {
        return Ok(Verdict::member(Certificate::Shift {
            t: vec![params.t_max; n_ops],
            inner: Box::new(top.certificate),
        }));
    }
    let at_zero = cone.contains(&base)?;
    if at_zero.is_member() {
        let t = eps.iter().copied().fold(f64::INFINITY, f64::min).min(params.t_max);
        let v = cone.contains(&base.axpy(t, &qsum))?;
        if v.is_member() {
            return Ok(Verdict::member(Certificate::Shift {
                t: vec![t; n_ops],
                inner: Box::new(v.certificate),
            }));
        }
    }
    let (mut lo, mut hi) = (1e-12f64.ln(), params.t_max.ln());
    let mut best = top.certificate;
    let mut hi_t = params.t_max;
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        let v = cone.contains(&base.axpy(mid.exp(), &qsum))?;
        if v.is_member() {
            hi = mid;
            hi_t = mid.exp();
            best = v.certificate;
        } else {
            lo = mid;
        }
    }
    Ok(Verdict::member(Certificate::Shift {
        t: vec![hi_t; n_ops],
        inner: Box::new(best),
    }))
}

/// A single compression round at an explicit `ε`-vector, reporting the
/// smallest uniform `t` found.
pub fn compression_round(
    cone: &dyn Cone,
    tuple: &ContractionTuple,
    x: &MatrixElement,
    eps: &[f64],
    params: &ScheduleParams,
    hat: bool,
) -> Result<Verdict> {
    check_element(cone.space(), x)?;
    if eps.len() != tuple.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} epsilon values for {} contractions",
            eps.len(),
            tuple.len()
        )));
    }
    check_budget(x.level(), 0, params)?;
    round(cone, tuple, x, eps, params, hat, true)
}

fn compression_inner(
    cone: &dyn Cone,
    tuple: &ContractionTuple,
    x: &MatrixElement,
    params: &ScheduleParams,
    hat: bool,
    find_t: bool,
) -> Result<Verdict> {
    params.validate()?;
    check_element(cone.space(), x)?;
    outer_size(tuple, x)?;
    check_budget(x.level(), 0, params)?;
    schedule_rounds(&params.eps, |eps| {
        let v = round(cone, tuple, x, &vec![eps; tuple.len()], params, hat, find_t)?;
        Ok((v, None))
    })
}

/// Membership of `x` (level `n·2^N`) in the compression cone of the tuple.
pub fn compression_membership(
    cone: &dyn Cone,
    tuple: &ContractionTuple,
    x: &MatrixElement,
    params: &ScheduleParams,
    hat: bool,
) -> Result<Verdict> {
    compression_inner(cone, tuple, x, params, hat, true)
}

/// Converts a hat witness at `ε̂` into a plain witness: since
/// `J_{2^{k-1}} ≤ 2^{k-1} I`, the plain test succeeds at `ε_k = 2^{k-1} ε̂_k`
/// with `t_k = 2^{k-1} t̂_k`.
pub fn hat_to_plain(eps_hat: &[f64], t_hat: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let scale = |k: usize| pow2(k) as f64;
    (
        eps_hat.iter().enumerate().map(|(k, e)| e * scale(k)).collect(),
        t_hat.iter().enumerate().map(|(k, t)| t * scale(k)).collect(),
    )
}

/// Direct check that `x + Σ ε_k I⊗P_k + Σ t_k I⊗Q_k` is in the cone.
pub fn check_shift(
    cone: &dyn Cone,
    tuple: &ContractionTuple,
    x: &MatrixElement,
    eps: &[f64],
    t: &[f64],
    hat: bool,
) -> Result<Verdict> {
    check_element(cone.space(), x)?;
    let n = outer_size(tuple, x)?;
    let (psum, dirs) = shift_operators(tuple, n, eps, hat)?;
    let mut y = x.add(&psum);
    for (d, &tk) in dirs.iter().zip(t) {
        y = y.axpy(tk, d);
    }
    cone.contains(&y)
}

/// Membership of `x ⊗ J_{2^{NL}}` in the compression cone of the tuple
/// repeated `L` times; `x` sits at level `n`.
pub fn level_membership(
    cone: &dyn Cone,
    tuple: &ContractionTuple,
    x: &MatrixElement,
    levels: usize,
    params: &ScheduleParams,
) -> Result<Verdict> {
    if levels == 0 {
        return Err(Error::IndexOutOfRange {
            what: "level",
            index: 0,
            bound: usize::MAX,
        });
    }
    check_element(cone.space(), x)?;
    check_budget(x.level(), tuple.len() * levels, params)?;
    let lifted = x.kron_right(&ones(pow2(tuple.len() * levels)));
    compression_inner(cone, &tuple.repeated(levels), &lifted, params, false, false)
}

/// Boolean form of [`level_membership`]. Rounds are monotone in `ε` (the
/// `P_k` lie in the cone), so only the smallest scheduled `ε` is checked and
/// no obstruction certificate is searched for.
pub fn level_contains(
    cone: &dyn Cone,
    tuple: &ContractionTuple,
    x: &MatrixElement,
    levels: usize,
    params: &ScheduleParams,
) -> Result<bool> {
    params.validate()?;
    check_element(cone.space(), x)?;
    check_budget(x.level(), tuple.len() * levels.max(1), params)?;
    let lifted = x.kron_right(&ones(pow2(tuple.len() * levels.max(1))));
    let tuple = tuple.repeated(levels.max(1));
    let n = outer_size(&tuple, &lifted)?;
    let eps = params.eps.iter().copied().fold(f64::INFINITY, f64::min);
    let (psum, dirs) = shift_operators(&tuple, n, &vec![eps; tuple.len()], false)?;
    let qsum = sum_all(&dirs, lifted.dim(), lifted.level());
    let y = lifted.add(&psum).axpy(params.t_max, &qsum);
    Ok(cone.contains(&y)?.is_member())
}

/// Fibers at which evaluation is nonnegative on every level pullback cone:
/// those where the all-ones vector has a nonzero component in the common
/// kernel of the `Q` fiber matrices.
pub fn certifiable_fibers(cone: &dyn Cone, tuple: &ContractionTuple, params: &ScheduleParams) -> Vec<usize> {
    let Some(fd) = cone.fibers() else {
        return Vec::new();
    };
    let size = pow2(tuple.len().min(63));
    if tuple.len() >= 63 || size > params.budget_rows {
        return Vec::new();
    }
    let unit = tuple.space().unit().re();
    let mut out = Vec::new();
    for (f, phi) in fd.fibers.iter().enumerate() {
        let ef: f64 = phi.iter().zip(&unit).map(|(a, b)| a * b).sum();
        let mut qsum = ComplexMatrix::zeros(size, size);
        for (i, p) in tuple.ps().iter().enumerate() {
            let pf: f64 = phi.iter().zip(p.re()).map(|(a, b)| a * b).sum();
            let left = identity(pow2(i));
            let right = ones(pow2(tuple.len() - i - 1));
            let mut block = ComplexMatrix::zeros(2, 2);
            block[(0, 0)] = c(ef - pf);
            block[(1, 1)] = c(pf);
            qsum += left.kronecker(&block).kronecker(&right);
        }
        let (vals, vecs) = crate::linalg::hermitian_eigen_unchecked(&qsum);
        let top = vals.last().map(|v| v.abs()).unwrap_or(0.0);
        let mut weight = 0.0;
        for (k, &lambda) in vals.iter().enumerate() {
            if lambda.abs() <= 1e-10 * (1.0 + top) {
                let s: crate::linalg::C64 = vecs.column(k).iter().sum();
                weight += s.norm_sqr();
            }
        }
        if weight > 1e-12 * size as f64 {
            out.push(f);
        }
    }
    out
}

/// Sound rejection for the inductive limit: a certifiable fiber on which
/// `x` fails to be PSD, or a violated span constraint.
pub fn universal_rejection(
    cone: &dyn Cone,
    tuple: &ContractionTuple,
    x: &MatrixElement,
    params: &ScheduleParams,
) -> Option<Verdict> {
    let fd = cone.fibers()?;
    let tol = cone.tolerance();
    for (i, psi) in fd.annihilators.iter().enumerate() {
        let r = crate::linalg::max_abs(&x.evaluate(psi));
        if r > tol.affine_eps {
            return Some(Verdict::non_member(Certificate::UniversalState {
                description: format!("span constraint {} vanishes on every level cone", i + 1),
                functional: psi.clone(),
                value: r,
            }));
        }
    }
    for f in certifiable_fibers(cone, tuple, params) {
        let m = x.evaluate(&fd.fibers[f]);
        let (lo, norm) = crate::linalg::spectrum_bounds(&m);
        if lo < -tol.psd_slack(norm) {
            return Some(Verdict::non_member(Certificate::UniversalState {
                description: format!(
                    "fiber {} is nonnegative on every level cone and negative on the element",
                    f + 1
                ),
                functional: fd.fibers[f].clone(),
                value: lo,
            }));
        }
    }
    None
}

/// Membership in the inductive limit: for each scheduled `ε`, scan
/// `L = 1..=L_max` for level membership of `x + ε(I_n⊗e)`.
pub fn inductive_membership(
    cone: &dyn Cone,
    tuple: &ContractionTuple,
    x: &MatrixElement,
    l_max: usize,
    params: &ScheduleParams,
) -> Result<Verdict> {
    params.validate()?;
    check_element(cone.space(), x)?;
    if let Some(v) = universal_rejection(cone, tuple, x, params) {
        return Ok(v);
    }
    let unit = MatrixElement::unit(cone.space(), x.level());
    schedule_rounds(&params.eps, |eps| {
        let y = x.axpy(eps, &unit);
        let mut separated = true;
        let mut last = None;
        for levels in 1..=l_max.max(1) {
            match level_membership(cone, tuple, &y, levels, params) {
                Err(Error::BudgetExceeded { .. }) if levels > 1 => {
                    separated = false;
                    last = Some(Verdict::unknown(Certificate::Budget {
                        reason: format!("level {levels} exceeds the row budget {}", params.budget_rows),
                    }));
                    break;
                }
                Err(e) => return Err(e),
                Ok(v) => match v.status {
                    Status::Member => return Ok((v, Some(levels))),
                    Status::NonMember => last = Some(v),
                    Status::Unknown => {
                        separated = false;
                        last = Some(v);
                    }
                },
            }
        }
        let last = last.expect("at least one level is scanned");
        if separated {
            Ok((
                Verdict::non_member(Certificate::ShiftObstruction {
                    reason: format!("separated at every level up to {}", l_max.max(1)),
                    inner: Box::new(last.certificate),
                }),
                Some(l_max.max(1)),
            ))
        } else {
            Ok((Verdict::unknown(last.certificate), None))
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub probe: Vec<f64>,
    /// Membership in the ground cone.
    pub in_cone: Status,
    /// Membership of the pullback through the inductive limit.
    pub pullback: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ProjectionVerdict {
    /// All probes agree. Evidence relative to probe coverage, not a proof.
    Pass {
        probes: usize,
    },
    /// A probe outside the cone whose pullback is a member: the tuple is not
    /// a tuple of abstract projections.
    Fail {
        probe: usize,
        witness: Vec<f64>,
    },
    Unknown {
        undecided: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub verdict: ProjectionVerdict,
    pub outcomes: Vec<ProbeOutcome>,
}

/// Basis vectors, every `p_i`, every `-p_i`, then `random` seeded hermitians
/// with coefficients in `[-1, 1]`.
pub fn default_probes(tuple: &ContractionTuple, random: usize, seed: u64) -> Vec<SpaceElement> {
    use rand::{Rng, SeedableRng};
    let d = tuple.space().dim();
    let mut probes: Vec<SpaceElement> = (0..d).map(|i| SpaceElement::basis(d, i)).collect();
    probes.extend(tuple.ps().iter().cloned());
    probes.extend(tuple.ps().iter().map(|p| p.scale(-1.0)));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        probes.push(SpaceElement::real(&v));
    }
    probes
}

pub fn projection_test(
    aou_cone: &dyn Cone,
    tuple: &ContractionTuple,
    probes: &[SpaceElement],
    l_max: usize,
    params: &ScheduleParams,
) -> Result<ProjectionReport> {
    let mut outcomes = Vec::with_capacity(probes.len());
    for v in probes {
        let x = MatrixElement::from_element(v);
        let a = membership(aou_cone, &x)?;
        let b = inductive_membership(aou_cone, tuple, &x, l_max, params)?;
        let level = match &b.certificate {
            Certificate::Schedule { rounds } if b.is_member() => rounds.iter().filter_map(|r| r.level).max(),
            _ => None,
        };
        outcomes.push(ProbeOutcome {
            probe: v.re(),
            in_cone: a.status,
            pullback: b.status,
            level,
        });
    }
    let fail = outcomes
        .iter()
        .position(|o| o.in_cone == Status::NonMember && o.pullback == Status::Member);
    let undecided = outcomes
        .iter()
        .filter(|o| !(o.in_cone.is_decided() && o.in_cone == o.pullback))
        .count();
    let verdict = match fail {
        Some(i) => ProjectionVerdict::Fail {
            probe: i,
            witness: outcomes[i].probe.clone(),
        },
        None if undecided == 0 => ProjectionVerdict::Pass { probes: outcomes.len() },
        None => ProjectionVerdict::Unknown { undecided },
    };
    Ok(ProjectionReport { verdict, outcomes })
}
