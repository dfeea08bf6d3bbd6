//! The universal nonsignalling space `V_ns = C^{n²k²} / J`, its cones and the
//! commutative diagonal model.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::compression::{inductive_membership, ContractionTuple, ScheduleParams};
use crate::error::{Error, Result};
use crate::linalg::{exact_rank, is_psd_unchecked, orthonormal_span, RealMatrix, Tolerance};
use crate::space::{
    quotient_with_basis, Cone, ConeHandle, ConeKind, DiagonalModel, GeneratedCone, MatrixElement, Quotient,
    SpaceElement, StarSpace,
};
use crate::verdict::{Certificate, Status, Verdict};

/// Vertex enumeration is refused beyond this many deterministic strategies.
pub const MAX_DETERMINISTIC: usize = 4096;

/// `n` inputs and `k` outputs per party.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub n: usize,
    pub k: usize,
}

impl Scenario {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n < 1 || k < 2 {
            return Err(Error::InvalidScenario(format!(
                "need n >= 1 inputs and k >= 2 outputs, got n = {n}, k = {k}"
            )));
        }
        Ok(Self { n, k })
    }

    /// Number of generators `n²k²`.
    pub fn num_generators(&self) -> usize {
        self.n * self.n * self.k * self.k
    }

    /// `(n(k−1)+1)²`.
    pub fn ns_dimension(&self) -> usize {
        let s = self.n * (self.k - 1) + 1;
        s * s
    }

    /// Lexicographic position of `(x, y, a, b)`, zero-based.
    pub fn index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.n + y) * self.k + a) * self.k + b
    }

    /// Zero-based `(x, y, a, b)` of a lexicographic position.
    pub fn unindex(&self, i: usize) -> (usize, usize, usize, usize) {
        let b = i % self.k;
        let a = (i / self.k) % self.k;
        let y = (i / (self.k * self.k)) % self.n;
        let x = i / (self.k * self.k * self.n);
        (x, y, a, b)
    }

    pub fn generator_label(&self, i: usize) -> String {
        let (x, y, a, b) = self.unindex(i);
        format!("Q({},{}|{},{})", a + 1, b + 1, x + 1, y + 1)
    }

    /// Number of deterministic strategies `k^{2n}`, saturating.
    pub fn deterministic_count(&self) -> usize {
        (self.k as u128)
            .checked_pow(2 * self.n as u32)
            .map(|v| v.min(usize::MAX as u128) as usize)
            .unwrap_or(usize::MAX)
    }

    /// The `i`-th deterministic strategy: Alice's outputs per input, then Bob's.
    pub fn deterministic_strategy(&self, mut i: usize) -> (Vec<usize>, Vec<usize>) {
        let mut digits = Vec::with_capacity(2 * self.n);
        for _ in 0..2 * self.n {
            digits.push(i % self.k);
            i /= self.k;
        }
        let bob = digits.split_off(self.n);
        (digits, bob)
    }
}

/// A named linear relation on `C^{n²k²}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    pub coeffs: Vec<i64>,
}

/// The full list of F, G and H relation vectors, including the zero ones.
pub fn relation_vectors(s: Scenario) -> Vec<Relation> {
    let (n, k, len) = (s.n, s.k, s.num_generators());
    let mut out = Vec::new();
    let block = |v: &mut Vec<i64>, x: usize, y: usize, sign: i64| {
        for a in 0..k {
            for b in 0..k {
                v[s.index(x, y, a, b)] += sign;
            }
        }
    };
    for x in 0..n {
        for y in 0..n {
            for xp in 0..n {
                for yp in 0..n {
                    let mut v = vec![0; len];
                    block(&mut v, x, y, 1);
                    block(&mut v, xp, yp, -1);
                    out.push(Relation {
                        name: format!("F({},{}|{},{})", x + 1, y + 1, xp + 1, yp + 1),
                        coeffs: v,
                    });
                }
            }
        }
    }
    for a in 0..k {
        for x in 0..n {
            for z in 0..n {
                for w in 0..n {
                    let mut v = vec![0; len];
                    for c in 0..k {
                        v[s.index(x, z, a, c)] += 1;
                        v[s.index(x, w, a, c)] -= 1;
                    }
                    out.push(Relation {
                        name: format!("G({}|{},{},{})", a + 1, x + 1, z + 1, w + 1),
                        coeffs: v,
                    });
                }
            }
        }
    }
    for b in 0..k {
        for y in 0..n {
            for z in 0..n {
                for w in 0..n {
                    let mut v = vec![0; len];
                    for d in 0..k {
                        v[s.index(z, y, d, b)] += 1;
                        v[s.index(w, y, d, b)] -= 1;
                    }
                    out.push(Relation {
                        name: format!("H({}|{},{},{})", b + 1, y + 1, z + 1, w + 1),
                        coeffs: v,
                    });
                }
            }
        }
    }
    out
}

/// Exact rank of the relation span.
pub fn relation_rank(s: Scenario) -> usize {
    let rows: Vec<Vec<i64>> = relation_vectors(s)
        .into_iter()
        .map(|r| r.coeffs)
        .filter(|v| v.iter().any(|&c| c != 0))
        .collect();
    exact_rank(&rows)
}

/// The basis `B`: unit, `Q(a,b|x,y)` for `a,b < k`, `E(a|x)` and `F(b|y)` for
/// `a,b < k`, as integer representatives in `C^{n²k²}` with labels.
pub fn basis_representatives(s: Scenario) -> Vec<(String, Vec<i64>)> {
    let (n, k, len) = (s.n, s.k, s.num_generators());
    let mut out = Vec::with_capacity(s.ns_dimension());
    let mut unit = vec![0; len];
    for a in 0..k {
        for b in 0..k {
            unit[s.index(0, 0, a, b)] = 1;
        }
    }
    out.push(("e".to_string(), unit));
    for x in 0..n {
        for y in 0..n {
            for a in 0..k - 1 {
                for b in 0..k - 1 {
                    let mut v = vec![0; len];
                    v[s.index(x, y, a, b)] = 1;
                    out.push((s.generator_label(s.index(x, y, a, b)), v));
                }
            }
        }
    }
    for x in 0..n {
        for a in 0..k - 1 {
            let mut v = vec![0; len];
            for c in 0..k {
                v[s.index(x, 0, a, c)] = 1;
            }
            out.push((format!("E({}|{})", a + 1, x + 1), v));
        }
    }
    for y in 0..n {
        for b in 0..k - 1 {
            let mut v = vec![0; len];
            for d in 0..k {
                v[s.index(0, y, d, b)] = 1;
            }
            out.push((format!("F({}|{})", b + 1, y + 1), v));
        }
    }
    out
}

/// Exact rank of `B` together with the relation vectors; equals `n²k²`
/// exactly when `B` is a basis of the quotient.
pub fn basis_rank_with_relations(s: Scenario) -> usize {
    let mut rows: Vec<Vec<i64>> = basis_representatives(s).into_iter().map(|(_, v)| v).collect();
    rows.extend(
        relation_vectors(s)
            .into_iter()
            .map(|r| r.coeffs)
            .filter(|v| v.iter().any(|&c| c != 0)),
    );
    exact_rank(&rows)
}

#[derive(Clone, Debug)]
pub struct NsSpace {
    scenario: Scenario,
    quotient: Quotient,
    generators: Vec<SpaceElement>,
    alice: Vec<SpaceElement>,
    bob: Vec<SpaceElement>,
}

pub fn build_ns_space(s: Scenario) -> Result<NsSpace> {
    let s = Scenario::new(s.n, s.k)?;
    let len = s.num_generators();
    let parent_labels = (0..len).map(|i| s.generator_label(i)).collect();
    let mut parent_unit = vec![0.0; len];
    for a in 0..s.k {
        for b in 0..s.k {
            parent_unit[s.index(0, 0, a, b)] = 1.0;
        }
    }
    let parent = StarSpace::hermitian_basis(parent_labels, &parent_unit)?;
    let j: Vec<SpaceElement> = relation_vectors(s)
        .iter()
        .filter(|r| r.coeffs.iter().any(|&c| c != 0))
        .map(|r| SpaceElement::real(&r.coeffs.iter().map(|&c| c as f64).collect::<Vec<_>>()))
        .collect();
    let (labels, reps): (Vec<String>, Vec<Vec<f64>>) = basis_representatives(s)
        .into_iter()
        .map(|(l, v)| (l, v.into_iter().map(|c| c as f64).collect()))
        .unzip();
    let quotient = quotient_with_basis(&parent, &j, &reps, labels)?;
    let generators: Vec<SpaceElement> = (0..len)
        .map(|i| quotient.project(&SpaceElement::basis(len, i)))
        .collect();
    let sum = |f: &dyn Fn(usize) -> bool| {
        (0..len)
            .filter(|&i| f(i))
            .fold(SpaceElement::zero(quotient.space.dim()), |acc, i| {
                acc.add(&generators[i])
            })
    };
    let alice = (0..s.n * s.k)
        .map(|i| {
            let (x, a) = (i / s.k, i % s.k);
            sum(&|g| {
                let (gx, gy, ga, _) = s.unindex(g);
                gx == x && gy == 0 && ga == a
            })
        })
        .collect();
    let bob = (0..s.n * s.k)
        .map(|i| {
            let (y, b) = (i / s.k, i % s.k);
            sum(&|g| {
                let (gx, gy, _, gb) = s.unindex(g);
                gx == 0 && gy == y && gb == b
            })
        })
        .collect();
    let ns = NsSpace {
        scenario: s,
        quotient,
        generators,
        alice,
        bob,
    };
    ns.check_invariants()?;
    Ok(ns)
}

const EXACT_TOL: f64 = 1e-9;

fn max_diff(a: &SpaceElement, b: &SpaceElement) -> f64 {
    a.coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

impl NsSpace {
    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn space(&self) -> &StarSpace {
        &self.quotient.space
    }

    pub fn dim(&self) -> usize {
        self.quotient.space.dim()
    }

    pub fn quotient(&self) -> &Quotient {
        &self.quotient
    }

    pub fn unit(&self) -> &SpaceElement {
        self.quotient.space.unit()
    }

    /// Generators in lexicographic `(x, y, a, b)` order.
    pub fn generators(&self) -> &[SpaceElement] {
        &self.generators
    }

    pub fn generator(&self, x: usize, y: usize, a: usize, b: usize) -> &SpaceElement {
        &self.generators[self.scenario.index(x, y, a, b)]
    }

    /// `E(a|x)`, zero-based.
    pub fn alice_marginal(&self, a: usize, x: usize) -> &SpaceElement {
        &self.alice[x * self.scenario.k + a]
    }

    /// `F(b|y)`, zero-based.
    pub fn bob_marginal(&self, b: usize, y: usize) -> &SpaceElement {
        &self.bob[y * self.scenario.k + b]
    }

    pub fn basis_labels(&self) -> &[String] {
        self.quotient.space.labels()
    }

    fn check_invariants(&self) -> Result<()> {
        let s = self.scenario;
        let d = self.dim();
        for x in 0..s.n {
            for y in 0..s.n {
                let mut total = SpaceElement::zero(d);
                for a in 0..s.k {
                    for b in 0..s.k {
                        total = total.add(self.generator(x, y, a, b));
                    }
                }
                let r = max_diff(&total, self.unit());
                if r > EXACT_TOL {
                    return Err(Error::RelationViolated {
                        relation: format!("sum of Q(.,.|{},{}) equals the unit", x + 1, y + 1),
                        residual: r,
                    });
                }
                for a in 0..s.k {
                    let mut alice = SpaceElement::zero(d);
                    let mut bob = SpaceElement::zero(d);
                    for c in 0..s.k {
                        alice = alice.add(self.generator(x, y, a, c));
                        bob = bob.add(self.generator(y, x, c, a));
                    }
                    let ra = max_diff(&alice, self.alice_marginal(a, x));
                    let rb = max_diff(&bob, self.bob_marginal(a, x));
                    if ra.max(rb) > EXACT_TOL {
                        return Err(Error::RelationViolated {
                            relation: format!("marginals of output {} at input {}", a + 1, x + 1),
                            residual: ra.max(rb),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Coordinates (on `B`) of the functional with values `values` on the
    /// generators. Meaningful when `values` annihilates every relation.
    pub fn functional(&self, values: &[f64]) -> Vec<f64> {
        let lift = &self.quotient.lift;
        (0..lift.ncols())
            .map(|j| (0..lift.nrows()).map(|i| lift[(i, j)] * values[i]).sum())
            .collect()
    }

    /// Generator values of the deterministic strategy `i`.
    pub fn deterministic_values(&self, i: usize) -> Vec<f64> {
        let s = self.scenario;
        let (alice, bob) = s.deterministic_strategy(i);
        (0..s.num_generators())
            .map(|g| {
                let (x, y, a, b) = s.unindex(g);
                if alice[x] == a && bob[y] == b {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// A linear map out of `V_ns`, as a matrix on coordinates.
#[derive(Clone, Debug)]
pub struct LinearMap {
    pub matrix: RealMatrix,
}

impl LinearMap {
    pub fn apply(&self, v: &SpaceElement) -> SpaceElement {
        SpaceElement::new(
            (0..self.matrix.nrows())
                .map(|i| v.coeffs.iter().enumerate().map(|(j, z)| z * self.matrix[(i, j)]).sum())
                .collect(),
        )
    }

    /// Coefficient-wise application at any matrix level.
    pub fn apply_matrix(&self, x: &MatrixElement) -> MatrixElement {
        let n = x.level();
        let coeffs = (0..self.matrix.nrows())
            .map(|i| {
                let mut m = crate::linalg::zeros(n, n);
                for j in 0..x.dim() {
                    let w = self.matrix[(i, j)];
                    if w != 0.0 {
                        m += x.coeff(j) * crate::linalg::c(w);
                    }
                }
                m
            })
            .collect();
        MatrixElement::new(coeffs).expect("uniform levels")
    }

    pub fn rank(&self) -> usize {
        crate::linalg::numeric_rank(&self.matrix, 1e-10)
    }
}

/// The unique linear map sending each `Q_ns(a,b|x,y)` to the matching target.
/// Fails with the first relation vector the targets violate.
pub fn universal_map(ns: &NsSpace, targets: &[SpaceElement]) -> Result<LinearMap> {
    let s = ns.scenario;
    if targets.len() != s.num_generators() {
        return Err(Error::DimensionMismatch(format!(
            "{} targets for {} generators",
            targets.len(),
            s.num_generators()
        )));
    }
    let dim_w = targets[0].dim();
    if targets.iter().any(|t| t.dim() != dim_w) {
        return Err(Error::DimensionMismatch("targets live in different spaces".into()));
    }
    for r in relation_vectors(s) {
        let mut acc = SpaceElement::zero(dim_w);
        for (i, &c) in r.coeffs.iter().enumerate() {
            if c != 0 {
                acc = acc.add(&targets[i].scale(c as f64));
            }
        }
        let residual = acc.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if residual > EXACT_TOL {
            return Err(Error::RelationViolated {
                relation: r.name,
                residual,
            });
        }
    }
    let lift = &ns.quotient.lift;
    let matrix = RealMatrix::from_fn(dim_w, ns.dim(), |i, j| {
        (0..lift.nrows()).map(|g| targets[g].coeffs[i].re * lift[(g, j)]).sum()
    });
    Ok(LinearMap { matrix })
}

/// The diagonal model of size `k^{2n}` spanned by the products
/// `Q(a,b|x,y) = E(a|x)F(b|y)` of 0/1 diagonal projections.
#[derive(Clone, Debug)]
pub struct CommutativeModel {
    pub scenario: Scenario,
    pub model: DiagonalModel,
    /// Concrete diagonals of the generators, lexicographic order.
    pub diagonals: Vec<Vec<f64>>,
    /// Generators in the model basis.
    pub generators: Vec<SpaceElement>,
}

/// Diagonal of `I^{⊗x} ⊗ E_a ⊗ I^{⊗(n-x-1)} ⊗ I^{⊗y} ⊗ E_b ⊗ I^{⊗(n-y-1)}`
/// (zero-based), entry `i` read as `2n` base-`k` digits, most significant first.
pub fn commutative_diagonal(s: Scenario, x: usize, y: usize, a: usize, b: usize) -> Vec<f64> {
    let size = s.deterministic_count();
    let digit = |mut i: usize, pos: usize| {
        // pos counts from the most significant factor
        for _ in 0..(2 * s.n - 1 - pos) {
            i /= s.k;
        }
        i % s.k
    };
    (0..size)
        .map(|i| {
            if digit(i, x) == a && digit(i, s.n + y) == b {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

pub fn alice_diagonal(s: Scenario, x: usize, a: usize) -> Vec<f64> {
    let mut out = vec![0.0; s.deterministic_count()];
    for b in 0..s.k {
        for (o, v) in out.iter_mut().zip(commutative_diagonal(s, x, 0, a, b)) {
            *o += v;
        }
    }
    out
}

pub fn bob_diagonal(s: Scenario, y: usize, b: usize) -> Vec<f64> {
    let mut out = vec![0.0; s.deterministic_count()];
    for a in 0..s.k {
        for (o, v) in out.iter_mut().zip(commutative_diagonal(s, 0, y, a, b)) {
            *o += v;
        }
    }
    out
}

pub fn build_commutative_model(s: Scenario, budget: usize) -> Result<CommutativeModel> {
    let s = Scenario::new(s.n, s.k)?;
    let size = s.deterministic_count();
    if size > budget {
        return Err(Error::BudgetExceeded {
            rows: size as u128,
            budget,
        });
    }
    let diagonals: Vec<Vec<f64>> = (0..s.num_generators())
        .map(|g| {
            let (x, y, a, b) = s.unindex(g);
            commutative_diagonal(s, x, y, a, b)
        })
        .collect();
    // basis: generators that are independent of the earlier ones
    let mut chosen: Vec<usize> = Vec::new();
    let mut vecs: Vec<Vec<f64>> = Vec::new();
    for (g, d) in diagonals.iter().enumerate() {
        vecs.push(d.clone());
        if orthonormal_span(&vecs, size, 1e-10).ncols() == vecs.len() {
            chosen.push(g);
        } else {
            vecs.pop();
        }
    }
    let labels: Vec<String> = chosen.iter().map(|&g| s.generator_label(g)).collect();
    let embedding: Vec<Vec<f64>> = chosen.iter().map(|&g| diagonals[g].clone()).collect();
    // coordinates of the identity diagonal in the chosen basis
    let a = RealMatrix::from_fn(size, chosen.len(), |i, j| embedding[j][i]);
    let unit = crate::linalg::least_squares(&a, &vec![1.0; size])
        .ok_or_else(|| Error::InvalidModel("dependent model basis".into()))?;
    let model = DiagonalModel::new(labels, embedding, &unit)?;
    let generators = diagonals
        .iter()
        .map(|d| {
            model
                .preimage(d)
                .ok_or_else(|| Error::InvalidModel("generator outside the model span".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CommutativeModel {
        scenario: s,
        model,
        diagonals,
        generators,
    })
}

/// Exact rank of the universal map into the commutative model, computed on
/// the integer diagonals of the images of `B`.
pub fn commutative_map_rank_exact(s: Scenario) -> usize {
    let len = s.num_generators();
    let diagonals: Vec<Vec<f64>> = (0..len)
        .map(|g| {
            let (x, y, a, b) = s.unindex(g);
            commutative_diagonal(s, x, y, a, b)
        })
        .collect();
    let rows: Vec<Vec<i64>> = basis_representatives(s)
        .into_iter()
        .map(|(_, rep)| {
            let mut img = vec![0i64; s.deterministic_count()];
            for (g, &c) in rep.iter().enumerate() {
                if c != 0 {
                    for (o, v) in img.iter_mut().zip(&diagonals[g]) {
                        *o += c * (*v as i64);
                    }
                }
            }
            img
        })
        .collect();
    exact_rank(&rows)
}

/// `D_ns`: the cone generated by the `Q_ns`, with its maximal matrix ordering.
pub fn dns_cone(ns: &NsSpace) -> Result<ConeHandle> {
    Ok(Arc::new(dns_generated(ns, Tolerance::default())?))
}

fn dns_generated(ns: &NsSpace, tol: Tolerance) -> Result<GeneratedCone> {
    GeneratedCone::new(ns.space(), ns.generators(), tol)
}

/// `D_qc`: the inductive limit of compression cones of `D_ns` with all
/// generators as the contraction tuple, enumerated lexicographically.
#[derive(Debug)]
pub struct DqcCone {
    ns: NsSpace,
    dns: Arc<GeneratedCone>,
    tuple: ContractionTuple,
    l_max: usize,
    params: ScheduleParams,
}

impl DqcCone {
    pub fn new(ns: &NsSpace, l_max: usize, params: ScheduleParams) -> Result<Self> {
        let dns = Arc::new(dns_generated(ns, params.tol)?);
        let tuple = ContractionTuple::new(dns.as_ref(), ns.generators().to_vec())?;
        Ok(Self {
            ns: ns.clone(),
            dns,
            tuple,
            l_max,
            params,
        })
    }

    pub fn tuple(&self) -> &ContractionTuple {
        &self.tuple
    }

    pub fn enumeration(&self) -> Vec<String> {
        let s = self.ns.scenario;
        (0..s.num_generators()).map(|i| s.generator_label(i)).collect()
    }

    /// A deterministic state that is negative on `x`; such states are
    /// nonnegative on `D_qc`.
    fn deterministic_rejection(&self, x: &MatrixElement) -> Option<Verdict> {
        let s = self.ns.scenario;
        let count = s.deterministic_count();
        if count > MAX_DETERMINISTIC {
            return None;
        }
        for i in 0..count {
            let phi = self.ns.functional(&self.ns.deterministic_values(i));
            let m = x.evaluate(&phi);
            if !is_psd_unchecked(&m, &self.params.tol) {
                let value = crate::linalg::eigenvalues_unchecked(&m)[0];
                let (alice, bob) = s.deterministic_strategy(i);
                return Some(Verdict::non_member(Certificate::UniversalState {
                    description: format!(
                        "deterministic strategy alice {:?} bob {:?} (1-based outputs per input)",
                        alice.iter().map(|a| a + 1).collect::<Vec<_>>(),
                        bob.iter().map(|b| b + 1).collect::<Vec<_>>()
                    ),
                    functional: phi,
                    value,
                }));
            }
        }
        None
    }
}

impl Cone for DqcCone {
    fn kind(&self) -> ConeKind {
        ConeKind::InductiveLimit
    }

    fn space(&self) -> &StarSpace {
        self.ns.space()
    }

    fn tolerance(&self) -> Tolerance {
        self.params.tol
    }

    fn contains(&self, x: &MatrixElement) -> Result<Verdict> {
        let inner = self.dns.contains(x)?;
        if inner.is_member() {
            return Ok(Verdict::member(Certificate::Schedule {
                rounds: self
                    .params
                    .eps
                    .iter()
                    .map(|&eps| crate::verdict::Round {
                        eps,
                        status: Status::Member,
                        level: Some(1),
                        certificate: Box::new(Certificate::Trivial {
                            reason: "member of the ground cone, contained in every level".into(),
                        }),
                    })
                    .collect(),
            }));
        }
        if let Some(v) = self.deterministic_rejection(x) {
            return Ok(v);
        }
        inductive_membership(self.dns.as_ref(), &self.tuple, x, self.l_max, &self.params)
    }
}

pub fn dqc_cone(ns: &NsSpace, l_max: usize, params: ScheduleParams) -> Result<ConeHandle> {
    Ok(Arc::new(DqcCone::new(ns, l_max, params)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::lineality_basis;
    use crate::space::{diagonal_cone, membership};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sc(n: usize, k: usize) -> Scenario {
        Scenario::new(n, k).unwrap()
    }

    #[test]
    fn scenario_validation() {
        assert!(Scenario::new(0, 2).is_err());
        assert!(Scenario::new(2, 1).is_err());
        let s = sc(2, 3);
        for i in 0..s.num_generators() {
            let (x, y, a, b) = s.unindex(i);
            assert_eq!(s.index(x, y, a, b), i);
        }
        assert_eq!(s.generator_label(0), "Q(1,1|1,1)");
    }

    #[test]
    fn relation_examples() {
        assert!(relation_vectors(sc(1, 2))
            .iter()
            .all(|r| r.coeffs.iter().all(|&c| c == 0)));
        assert!(relation_vectors(sc(1, 3))
            .iter()
            .all(|r| r.coeffs.iter().all(|&c| c == 0)));
        assert_eq!(relation_rank(sc(2, 2)), 7);
        assert_eq!(relation_rank(sc(2, 3)), 11);
        assert_eq!(relation_rank(sc(3, 2)), 36 - 16);
    }

    #[test]
    fn dimensions_match_formula() {
        for (n, k, d) in [(2, 2, 9), (2, 3, 25), (3, 2, 16), (3, 3, 49), (1, 2, 4)] {
            let s = sc(n, k);
            assert_eq!(s.ns_dimension(), d);
            let ns = build_ns_space(s).unwrap();
            assert_eq!(ns.dim(), d);
            assert_eq!(basis_representatives(s).len(), d);
            assert_eq!(basis_rank_with_relations(s), s.num_generators());
            assert_eq!(s.num_generators() - relation_rank(s), d);
        }
    }

    #[test]
    fn basis_elements_have_unit_coordinates() {
        let ns = build_ns_space(sc(2, 2)).unwrap();
        assert_eq!(ns.unit().re(), {
            let mut u = vec![0.0; 9];
            u[0] = 1.0;
            u
        });
        let q = ns.generator(1, 0, 0, 0).re();
        assert!((q[ns.basis_labels().iter().position(|l| l == "Q(1,1|2,1)").unwrap()] - 1.0).abs() < 1e-12);
        let e12 = ns.basis_labels().iter().position(|l| l == "E(1|2)").unwrap();
        assert!((ns.alice_marginal(0, 1).re()[e12] - 1.0).abs() < 1e-12);
    }

    fn random_ns_correlation(s: Scenario, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let count = s.deterministic_count();
        let mut p = vec![0.0; s.num_generators()];
        let mut total = 0.0;
        for _ in 0..5 {
            let w: f64 = rng.random_range(0.0..1.0);
            total += w;
            let (alice, bob) = s.deterministic_strategy(rng.random_range(0..count));
            for g in 0..s.num_generators() {
                let (x, y, a, b) = s.unindex(g);
                if alice[x] == a && bob[y] == b {
                    p[g] += w;
                }
            }
        }
        p.iter().map(|v| v / total).collect()
    }

    #[test]
    fn relations_annihilate_nonsignalling_correlations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in [sc(2, 2), sc(2, 3), sc(3, 2)] {
            for _ in 0..10 {
                let p = random_ns_correlation(s, &mut rng);
                for r in relation_vectors(s) {
                    let v: f64 = r.coeffs.iter().zip(&p).map(|(&c, q)| c as f64 * q).sum();
                    assert!(v.abs() < 1e-12, "{}", r.name);
                }
            }
        }
    }

    #[test]
    fn commutative_model_examples() {
        let s = sc(2, 2);
        let cm = build_commutative_model(s, 4096).unwrap();
        assert_eq!(cm.model.size(), 16);
        assert_eq!(cm.model.space().dim(), 9);
        for g in 0..s.num_generators() {
            let (x, y, a, b) = s.unindex(g);
            let e = alice_diagonal(s, x, a);
            let f = bob_diagonal(s, y, b);
            for i in 0..16 {
                assert_eq!(cm.diagonals[g][i], e[i] * f[i]);
                assert!(cm.diagonals[g][i] == 0.0 || cm.diagonals[g][i] == 1.0);
            }
        }
        // Kronecker oracle for Q(1,2|2,1) at n = k = 2
        let e = |i: usize| {
            let mut v = vec![0.0; 2];
            v[i] = 1.0;
            v
        };
        let one = vec![1.0, 1.0];
        let kron = |a: &[f64], b: &[f64]| {
            a.iter()
                .flat_map(|x| b.iter().map(move |y| x * y))
                .collect::<Vec<f64>>()
        };
        let oracle = kron(&kron(&kron(&one, &e(0)), &e(1)), &one);
        assert_eq!(commutative_diagonal(s, 1, 0, 0, 1), oracle);
        assert!(matches!(
            build_commutative_model(sc(3, 3), 100),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn universal_map_examples() {
        let ns = build_ns_space(sc(2, 2)).unwrap();
        let id = universal_map(&ns, ns.generators()).unwrap();
        assert!((id.matrix.clone() - RealMatrix::identity(9, 9)).amax() < 1e-10);

        for (n, k) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
            let s = sc(n, k);
            let ns = build_ns_space(s).unwrap();
            let cm = build_commutative_model(s, 4096).unwrap();
            let map = universal_map(&ns, &cm.generators).unwrap();
            assert_eq!(map.matrix.nrows(), ns.dim());
            assert_eq!(map.rank(), ns.dim());
            assert_eq!(commutative_map_rank_exact(s), ns.dim());
            // unital: the unit goes to the all-ones diagonal
            let img = cm.model.image(&map.apply(ns.unit()));
            assert!(img.iter().all(|v| (v - 1.0).abs() < 1e-9));
        }

        let mut bad = ns.generators().to_vec();
        bad[ns.scenario().index(0, 0, 0, 0)] = bad[0].scale(2.0);
        let err = universal_map(&ns, &bad).unwrap_err();
        assert!(matches!(err, Error::RelationViolated { ref relation, .. } if relation.starts_with('F')));
    }

    #[test]
    fn dns_examples() {
        let ns = build_ns_space(sc(2, 2)).unwrap();
        let cone = dns_cone(&ns).unwrap();
        let lvl = |v: &SpaceElement| MatrixElement::from_element(v);
        assert!(membership(cone.as_ref(), &lvl(ns.unit())).unwrap().is_member());
        assert!(membership(cone.as_ref(), &lvl(ns.alice_marginal(0, 0)))
            .unwrap()
            .is_member());
        let v = membership(cone.as_ref(), &lvl(&ns.generator(0, 0, 0, 0).scale(-1.0))).unwrap();
        assert!(v.is_non_member());
        let Certificate::Separator {
            functional,
            target_value,
            min_generator_value,
        } = v.certificate
        else {
            panic!()
        };
        assert!(target_value < 0.0 && min_generator_value >= -1e-9);
        assert_eq!(functional.len(), 9);
    }

    #[test]
    fn dns_is_proper_and_unit_is_interior() {
        for s in [sc(2, 2), sc(2, 3)] {
            let ns = build_ns_space(s).unwrap();
            let gens: Vec<Vec<f64>> = ns.generators().iter().map(|g| g.re()).collect();
            assert!(lineality_basis(&gens).unwrap().is_empty());
            let cone = dns_cone(&ns).unwrap();
            let delta = 1.0 / (s.num_generators() as f64 * 4.0);
            for i in 0..ns.dim() {
                for sign in [1.0, -1.0] {
                    let v = ns.unit().sub(&SpaceElement::basis(ns.dim(), i).scale(sign * delta));
                    assert!(membership(cone.as_ref(), &MatrixElement::from_element(&v))
                        .unwrap()
                        .is_member());
                }
            }
        }
    }

    #[test]
    fn dqc_examples() {
        let ns = build_ns_space(sc(1, 2)).unwrap();
        let params = ScheduleParams::default();
        let cone = dqc_cone(&ns, 2, params.clone()).unwrap();
        let unit = MatrixElement::from_element(ns.unit());
        let v = membership(cone.as_ref(), &unit).unwrap();
        assert!(v.is_member());
        let Certificate::Schedule { rounds } = &v.certificate else {
            panic!()
        };
        assert!(rounds.iter().all(|r| r.level == Some(1)));
        assert!(membership(cone.as_ref(), &unit.scale(-1.0)).unwrap().is_non_member());

        let ns22 = build_ns_space(sc(2, 2)).unwrap();
        let cone = dqc_cone(&ns22, 1, params).unwrap();
        let u = MatrixElement::from_element(ns22.unit());
        assert!(membership(cone.as_ref(), &u).unwrap().is_member());
        assert!(membership(cone.as_ref(), &u.scale(-1.0)).unwrap().is_non_member());
        // 2e − CHSH: nonnegative on every deterministic state, negative on the
        // PR box, so level 1 needs 2^16 rows
        let mut x = ns22.unit().scale(2.0);
        for g in 0..16 {
            let (xi, yi, a, b) = ns22.scenario().unindex(g);
            let sign = if (a == b) == (xi * yi == 0) { -1.0 } else { 1.0 };
            x = x.add(&ns22.generators()[g].scale(sign));
        }
        assert!(matches!(
            membership(cone.as_ref(), &MatrixElement::from_element(&x)),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn ucp_into_commutative_model(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = sc(2, 2);
            let ns = build_ns_space(s).unwrap();
            let cm = build_commutative_model(s, 4096).unwrap();
            let map = universal_map(&ns, &cm.generators).unwrap();
            // Σ g_j ⊗ S_j with PSD S_j lies in D^max at level 2
            let mut x = MatrixElement::zeros(ns.dim(), 2);
            for g in ns.generators() {
                let a = crate::linalg::from_real(2, 2, &[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
                let sj = &a * a.adjoint();
                x = x.add(&MatrixElement::tensor(&sj, g));
            }
            let img = map.apply_matrix(&x);
            let target = diagonal_cone(&cm.model);
            prop_assert!(membership(target.as_ref(), &img).unwrap().is_member());
        }
    }
}
