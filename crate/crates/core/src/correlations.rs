//! Bipartite correlations `p(a,b|x,y)`: validation, the nonsignalling, local
//! and level-`L` outer-bound oracles, and Bell functional optimization.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::compression::{level_contains, universal_rejection, ContractionTuple, ScheduleParams};
use crate::conic::{lp_solve, LpOutcome, LpProblem};
use crate::error::{Error, Result};
use crate::linalg::RealMatrix;
use crate::nonsignalling::{dns_cone, relation_vectors, NsSpace, Scenario, MAX_DETERMINISTIC};
use crate::space::{MatrixElement, SpaceElement};
use crate::verdict::{Certificate, Status, Verdict};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Probabilities indexed lexicographically by `(x, y, a, b)`, zero-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub scenario: Scenario,
    pub p: Vec<f64>,
}

/// Coefficients `c(a,b|x,y)` in the same layout as a correlation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellFunctional {
    pub scenario: Scenario,
    pub coefficients: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationIssue {
    NotFinite {
        x: usize,
        y: usize,
        a: usize,
        b: usize,
    },
    Negative {
        x: usize,
        y: usize,
        a: usize,
        b: usize,
        value: f64,
    },
    Normalization {
        x: usize,
        y: usize,
        sum: f64,
    },
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NotFinite { x, y, a, b } => write!(f, "p({a},{b}|{x},{y}) is not finite"),
            Self::Negative { x, y, a, b, value } => write!(f, "p({a},{b}|{x},{y}) = {value} is negative"),
            Self::Normalization { x, y, sum } => write!(f, "block ({x},{y}) sums to {sum}"),
        }
    }
}

fn check_len(s: Scenario, len: usize) -> Result<()> {
    if len != s.num_generators() {
        return Err(Error::DimensionMismatch(format!(
            "{len} entries for a scenario with {} outcomes",
            s.num_generators()
        )));
    }
    Ok(())
}

fn check_scenario(expected: Scenario, got: Scenario) -> Result<()> {
    if expected != got {
        return Err(Error::ScenarioMismatch {
            expected_n: expected.n,
            expected_k: expected.k,
            got_n: got.n,
            got_k: got.k,
        });
    }
    Ok(())
}

impl Correlation {
    pub fn new(scenario: Scenario, p: Vec<f64>) -> Result<Self> {
        check_len(scenario, p.len())?;
        Ok(Self { scenario, p })
    }

    pub fn from_fn(s: Scenario, f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let p = (0..s.num_generators())
            .map(|i| {
                let (x, y, a, b) = s.unindex(i);
                f(x, y, a, b)
            })
            .collect();
        Self { scenario: s, p }
    }

    pub fn uniform(s: Scenario) -> Self {
        let w = 1.0 / (s.k * s.k) as f64;
        Self::from_fn(s, |_, _, _, _| w)
    }

    /// `p = 1/2` iff `a ⊕ b = x·y` (zero-based), for two inputs and outputs.
    pub fn pr_box() -> Self {
        let s = Scenario { n: 2, k: 2 };
        Self::from_fn(s, |x, y, a, b| if (a ^ b) == (x & y) { 0.5 } else { 0.0 })
    }

    /// The deterministic strategy with index `i` (see [`Scenario::deterministic_strategy`]).
    pub fn deterministic(s: Scenario, i: usize) -> Self {
        let (alice, bob) = s.deterministic_strategy(i);
        Self::from_fn(s, |x, y, a, b| if alice[x] == a && bob[y] == b { 1.0 } else { 0.0 })
    }

    pub fn get(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.p[self.scenario.index(x, y, a, b)]
    }

    /// `p_A(a|x)` computed with Bob's input `w`.
    pub fn alice_marginal(&self, a: usize, x: usize, w: usize) -> f64 {
        (0..self.scenario.k).map(|d| self.get(x, w, a, d)).sum()
    }

    /// `p_B(b|y)` computed with Alice's input `w`.
    pub fn bob_marginal(&self, b: usize, y: usize, w: usize) -> f64 {
        (0..self.scenario.k).map(|d| self.get(w, y, d, b)).sum()
    }

    /// Parses `scenario n k` followed by `x y a b value` lines (1-based
    /// indices, omitted entries zero, `#` comments).
    pub fn parse(text: &str) -> Result<Self> {
        let (s, p) = parse_table(text)?;
        Ok(Self { scenario: s, p })
    }

    pub fn to_text(&self) -> String {
        table_text(self.scenario, &self.p)
    }
}

impl BellFunctional {
    pub fn new(scenario: Scenario, coefficients: Vec<f64>) -> Result<Self> {
        check_len(scenario, coefficients.len())?;
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidCorrelation("Bell coefficients must be finite".into()));
        }
        Ok(Self { scenario, coefficients })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (s, c) = parse_table(text)?;
        Self::new(s, c)
    }

    pub fn to_text(&self) -> String {
        table_text(self.scenario, &self.coefficients)
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_table(text: &str) -> Result<(Scenario, Vec<f64>)> {
    let mut scenario = None;
    let mut values = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let Some(s) = scenario else {
            if fields.len() != 3 || fields[0] != "scenario" {
                return Err(parse_error(line_no, "expected header `scenario n k`"));
            }
            let num = |i: usize, name: &str| {
                fields[i].parse::<usize>().map_err(|_| {
                    parse_error(
                        line_no,
                        format!("field {} ({name}): `{}` is not a count", i + 1, fields[i]),
                    )
                })
            };
            let s = Scenario::new(num(1, "n")?, num(2, "k")?).map_err(|e| parse_error(line_no, e.to_string()))?;
            values = vec![0.0; s.num_generators()];
            scenario = Some(s);
            continue;
        };
        if fields.len() != 5 {
            return Err(parse_error(
                line_no,
                format!("expected 5 fields `x y a b value`, got {}", fields.len()),
            ));
        }
        let mut idx = [0usize; 4];
        for (i, name) in ["x", "y", "a", "b"].iter().enumerate() {
            let bound = if i < 2 { s.n } else { s.k };
            let v: usize = fields[i].parse().map_err(|_| {
                parse_error(
                    line_no,
                    format!("field {} ({name}): `{}` is not an index", i + 1, fields[i]),
                )
            })?;
            if v < 1 || v > bound {
                return Err(parse_error(
                    line_no,
                    format!("field {} ({name}): {v} outside 1..={bound}", i + 1),
                ));
            }
            idx[i] = v - 1;
        }
        let value: f64 = fields[4]
            .parse()
            .map_err(|_| parse_error(line_no, format!("field 5 (value): `{}` is not a number", fields[4])))?;
        if !value.is_finite() {
            return Err(parse_error(line_no, "field 5 (value): not finite"));
        }
        let i = s.index(idx[0], idx[1], idx[2], idx[3]);
        if !seen.insert(i) {
            return Err(parse_error(line_no, "duplicate entry"));
        }
        values[i] = value;
    }
    let s = scenario.ok_or_else(|| parse_error(0, "empty input, expected header `scenario n k`"))?;
    Ok((s, values))
}

fn table_text(s: Scenario, values: &[f64]) -> String {
    let mut out = format!("scenario {} {}\n", s.n, s.k);
    for (i, v) in values.iter().enumerate() {
        let (x, y, a, b) = s.unindex(i);
        out.push_str(&format!("{} {} {} {} {:?}\n", x + 1, y + 1, a + 1, b + 1, v));
    }
    out
}

/// Nonnegativity and per-block normalization within `1e-9`.
pub fn validate(p: &Correlation) -> std::result::Result<(), Vec<ValidationIssue>> {
    let s = p.scenario;
    let mut issues = Vec::new();
    for x in 0..s.n {
        for y in 0..s.n {
            let mut sum = 0.0;
            for a in 0..s.k {
                for b in 0..s.k {
                    let v = p.get(x, y, a, b);
                    let at = (x + 1, y + 1, a + 1, b + 1);
                    if !v.is_finite() {
                        issues.push(ValidationIssue::NotFinite {
                            x: at.0,
                            y: at.1,
                            a: at.2,
                            b: at.3,
                        });
                    } else if v < -DEFAULT_TOL {
                        issues.push(ValidationIssue::Negative {
                            x: at.0,
                            y: at.1,
                            a: at.2,
                            b: at.3,
                            value: v,
                        });
                    }
                    sum += v;
                }
            }
            if !((sum - 1.0).abs() <= DEFAULT_TOL) {
                issues.push(ValidationIssue::Normalization {
                    x: x + 1,
                    y: y + 1,
                    sum,
                });
            }
        }
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(issues)
    }
}

fn require_valid(p: &Correlation) -> Result<()> {
    validate(p).map_err(|issues| {
        Error::InvalidCorrelation(issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsDirect {
    pub nonsignalling: bool,
    pub max_violation: f64,
}

/// Marginal consistency: `p_A(a|x)` independent of Bob's input and
/// `p_B(b|y)` independent of Alice's.
pub fn is_nonsignalling_direct(p: &Correlation, tol: f64) -> NsDirect {
    let s = p.scenario;
    let mut worst = 0.0f64;
    for x in 0..s.n {
        for a in 0..s.k {
            let base_a = p.alice_marginal(a, x, 0);
            let base_b = p.bob_marginal(a, x, 0);
            for w in 1..s.n {
                worst = worst.max((p.alice_marginal(a, x, w) - base_a).abs());
                worst = worst.max((p.bob_marginal(a, x, w) - base_b).abs());
            }
        }
    }
    NsDirect {
        nonsignalling: worst <= tol,
        max_violation: worst,
    }
}

/// Whether `p` defines a state on `(V_ns, D_ns, e_ns)`: it annihilates every
/// relation vector and is nonnegative on the generators. The certificate of a
/// member is the state's values on the basis.
pub fn ns_state_membership(p: &Correlation, ns: &NsSpace, tol: f64) -> Result<Verdict> {
    check_scenario(ns.scenario(), p.scenario)?;
    let mut worst: Option<(String, f64)> = None;
    for r in relation_vectors(p.scenario) {
        let v: f64 = r.coeffs.iter().zip(&p.p).map(|(&c, q)| c as f64 * q).sum();
        if v.abs() > tol && worst.as_ref().is_none_or(|(_, w)| v.abs() > *w) {
            worst = Some((r.name, v.abs()));
        }
    }
    if let Some((relation, residual)) = worst {
        return Ok(Verdict::non_member(Certificate::Relation { relation, residual }));
    }
    if let Some((i, &v)) = p.p.iter().enumerate().find(|(_, &v)| v < -tol) {
        return Ok(Verdict::non_member(Certificate::Relation {
            relation: format!("positivity on {}", p.scenario.generator_label(i)),
            residual: -v,
        }));
    }
    let values = ns.functional(&p.p);
    if (values[0] - 1.0).abs() > tol {
        return Ok(Verdict::non_member(Certificate::Relation {
            relation: "unital".into(),
            residual: (values[0] - 1.0).abs(),
        }));
    }
    Ok(Verdict::member(Certificate::State {
        labels: ns.basis_labels().to_vec(),
        values,
    }))
}

fn deterministic_matrix(s: Scenario) -> Result<RealMatrix> {
    let count = s.deterministic_count();
    if count > MAX_DETERMINISTIC {
        return Err(Error::BudgetExceeded {
            rows: count as u128,
            budget: MAX_DETERMINISTIC,
        });
    }
    let mut m = RealMatrix::zeros(s.num_generators(), count);
    for i in 0..count {
        let (alice, bob) = s.deterministic_strategy(i);
        for x in 0..s.n {
            for y in 0..s.n {
                m[(s.index(x, y, alice[x], bob[y]), i)] = 1.0;
            }
        }
    }
    Ok(m)
}

/// Largest value of `f` over deterministic strategies, with the maximizer.
pub fn maximize_over_local(f: &BellFunctional) -> Result<(f64, usize)> {
    let d = deterministic_matrix(f.scenario)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for i in 0..d.ncols() {
        let v: f64 = (0..d.nrows()).map(|g| d[(g, i)] * f.coefficients[g]).sum();
        if v > best.0 {
            best = (v, i);
        }
    }
    Ok(best)
}

/// Convex-hull membership over the `k^{2n}` deterministic correlations.
/// Rejections carry a Bell functional whose local maximum is 2 and whose
/// value on `p` exceeds 2.
pub fn is_local(p: &Correlation, tol: f64) -> Result<Verdict> {
    require_valid(p)?;
    let s = p.scenario;
    let d = deterministic_matrix(s)?;
    let (rows, count) = (d.nrows(), d.ncols());
    let mut a = RealMatrix::zeros(rows + 1, count);
    a.view_mut((0, 0), (rows, count)).copy_from(&d);
    a.row_mut(rows).fill(1.0);
    let mut b = p.p.clone();
    b.push(1.0);
    match lp_solve(&LpProblem::feasibility(a, b))? {
        LpOutcome::Optimal { x, .. } => {
            let (vertices, weights): (Vec<usize>, Vec<f64>) = x
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 1e-12)
                .map(|(i, &w)| (i, w))
                .unzip();
            Ok(Verdict::member(Certificate::ConvexWeights { vertices, weights }))
        }
        LpOutcome::Infeasible { farkas } => {
            if let Some(v) = chsh_witness(p, tol)? {
                return Ok(v);
            }
            let raw: Vec<f64> = farkas[..rows].iter().map(|v| -v).collect();
            let scale = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if scale == 0.0 {
                return Ok(Verdict::unknown(Certificate::Budget {
                    reason: "degenerate Farkas vector".into(),
                }));
            }
            let mut c: Vec<f64> = raw.iter().map(|v| v / scale).collect();
            let f = BellFunctional {
                scenario: s,
                coefficients: c.clone(),
            };
            let (local, _) = maximize_over_local(&f)?;
            // a constant on every block adds n² times itself to every correlation
            let shift = (2.0 - local) / (s.n * s.n) as f64;
            for v in c.iter_mut() {
                *v += shift;
            }
            let f = BellFunctional {
                scenario: s,
                coefficients: c,
            };
            let (bound, _) = maximize_over_local(&f)?;
            let value = bell_value(p, &f)?;
            if value > bound + tol {
                Ok(Verdict::non_member(Certificate::BellWitness {
                    name: "lp-dual".into(),
                    coefficients: f.coefficients,
                    bound,
                    value,
                }))
            } else {
                Ok(Verdict::unknown(Certificate::BellWitness {
                    name: "lp-dual".into(),
                    coefficients: f.coefficients,
                    bound,
                    value,
                }))
            }
        }
        LpOutcome::Unbounded | LpOutcome::IterationLimit => Ok(Verdict::unknown(Certificate::Budget {
            reason: "vertex LP did not terminate".into(),
        })),
    }
}

pub fn bell_value(p: &Correlation, f: &BellFunctional) -> Result<f64> {
    check_scenario(f.scenario, p.scenario)?;
    Ok(p.p.iter().zip(&f.coefficients).map(|(a, b)| a * b).sum())
}

/// Maximum of `f` over the nonsignalling polytope, with a maximizer.
pub fn maximize_over_ns(f: &BellFunctional) -> Result<(f64, Correlation)> {
    let s = f.scenario;
    let len = s.num_generators();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for x in 0..s.n {
        for y in 0..s.n {
            let mut r = vec![0.0; len];
            for a in 0..s.k {
                for b in 0..s.k {
                    r[s.index(x, y, a, b)] = 1.0;
                }
            }
            rows.push(r);
            rhs.push(1.0);
        }
    }
    for r in relation_vectors(s) {
        if r.name.starts_with('F') || r.coeffs.iter().all(|&c| c == 0) {
            continue;
        }
        rows.push(r.coeffs.iter().map(|&c| c as f64).collect());
        rhs.push(0.0);
    }
    let a = RealMatrix::from_fn(rows.len(), len, |i, j| rows[i][j]);
    let prob = LpProblem::feasibility(a, rhs).with_objective(f.coefficients.iter().map(|c| -c).collect());
    match lp_solve(&prob)? {
        LpOutcome::Optimal { x, value } => Ok((-value, Correlation { scenario: s, p: x })),
        other => Err(Error::InvalidCorrelation(format!(
            "nonsignalling polytope LP ended as {other:?}"
        ))),
    }
}

/// CHSH: `Σ (−1)^{xy} (p(a=b|x,y) − p(a≠b|x,y))`, zero-based inputs.
/// The eight CHSH forms: the minus sign on one input pair, either overall sign.
pub fn chsh_variants() -> Vec<BellFunctional> {
    let s = Scenario { n: 2, k: 2 };
    let mut out = Vec::with_capacity(8);
    for flipped in 0..4 {
        for overall in [1.0, -1.0] {
            let c = (0..s.num_generators())
                .map(|i| {
                    let (x, y, a, b) = s.unindex(i);
                    let sign = if 2 * x + y == flipped { -overall } else { overall };
                    if a == b {
                        sign
                    } else {
                        -sign
                    }
                })
                .collect();
            out.push(BellFunctional {
                scenario: s,
                coefficients: c,
            });
        }
    }
    out
}

/// In the (2,2) scenario the CHSH forms are the nontrivial facets of the
/// local polytope, so a nonlocal correlation violates one of them.
fn chsh_witness(p: &Correlation, tol: f64) -> Result<Option<Verdict>> {
    if p.scenario != (Scenario { n: 2, k: 2 }) {
        return Ok(None);
    }
    let mut best: Option<(f64, BellFunctional)> = None;
    for f in chsh_variants() {
        let v = bell_value(p, &f)?;
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, f));
        }
    }
    let Some((value, f)) = best else {
        return Ok(None);
    };
    let (bound, _) = maximize_over_local(&f)?;
    Ok((value > bound + tol).then(|| {
        Verdict::non_member(Certificate::BellWitness {
            name: "chsh".into(),
            coefficients: f.coefficients,
            bound,
            value,
        })
    }))
}

pub fn chsh() -> BellFunctional {
    let s = Scenario { n: 2, k: 2 };
    let c = (0..s.num_generators())
        .map(|i| {
            let (x, y, a, b) = s.unindex(i);
            let sign = if x & y == 1 { -1.0 } else { 1.0 };
            if a == b {
                sign
            } else {
                -sign
            }
        })
        .collect();
    BellFunctional {
        scenario: s,
        coefficients: c,
    }
}

/// Dirichlet-uniform blocks: generic valid correlations, almost surely signalling.
pub fn random_valid(s: Scenario, rng: &mut impl Rng) -> Correlation {
    let kk = s.k * s.k;
    let mut p = vec![0.0; s.num_generators()];
    for block in 0..s.n * s.n {
        let draws: Vec<f64> = (0..kk).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        for (j, d) in draws.iter().enumerate() {
            p[block * kk + j] = d / total;
        }
    }
    Correlation { scenario: s, p }
}

/// `p(a,b|x,y) = 1/k` iff `b − a ≡ g(x,y) (mod k)`, uniform marginals.
pub fn pr_type(s: Scenario, g: &[usize]) -> Correlation {
    let w = 1.0 / s.k as f64;
    Correlation::from_fn(s, |x, y, a, b| {
        if (b + s.k - a) % s.k == g[x * s.n + y] % s.k {
            w
        } else {
            0.0
        }
    })
}

/// Random mixture of deterministic strategies and PR-type vertices.
pub fn random_nonsignalling(s: Scenario, rng: &mut impl Rng) -> Correlation {
    let terms = rng.random_range(1..=4);
    let mut p = vec![0.0; s.num_generators()];
    let mut total = 0.0;
    let count = s.deterministic_count().min(MAX_DETERMINISTIC);
    for _ in 0..terms {
        let w: f64 = Exp1.sample(rng);
        total += w;
        let vertex = if rng.random_bool(0.5) {
            Correlation::deterministic(s, rng.random_range(0..count))
        } else {
            let g: Vec<usize> = (0..s.n * s.n).map(|_| rng.random_range(0..s.k)).collect();
            pr_type(s, &g)
        };
        for (a, b) in p.iter_mut().zip(&vertex.p) {
            *a += w * b;
        }
    }
    Correlation {
        scenario: s,
        p: p.iter().map(|v| v / total).collect(),
    }
}

/// Random local correlation: a mixture of deterministic strategies.
pub fn random_local(s: Scenario, rng: &mut impl Rng) -> Correlation {
    let count = s.deterministic_count().min(MAX_DETERMINISTIC);
    let mut p = vec![0.0; s.num_generators()];
    let mut total = 0.0;
    for _ in 0..rng.random_range(1..=4) {
        let w: f64 = Exp1.sample(rng);
        total += w;
        for (a, b) in p
            .iter_mut()
            .zip(&Correlation::deterministic(s, rng.random_range(0..count)).p)
        {
            *a += w * b;
        }
    }
    Correlation {
        scenario: s,
        p: p.iter().map(|v| v / total).collect(),
    }
}

/// Probes for the level-`L` battery: basis vectors and their negatives,
/// generators, and `random` seeded hermitians.
fn probe_battery(ns: &NsSpace, random: usize, seed: u64) -> Vec<SpaceElement> {
    use rand::SeedableRng;
    let d = ns.dim();
    let mut out: Vec<SpaceElement> = (0..d).map(|i| SpaceElement::basis(d, i)).collect();
    out.extend((0..d).map(|i| SpaceElement::basis(d, i).scale(-1.0)));
    out.extend(ns.generators().iter().cloned());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        out.push(SpaceElement::real(
            &(0..d).map(|_| rng.random_range(-1.0..=1.0)).collect::<Vec<_>>(),
        ));
    }
    out
}

/// Probe-based test of `φ_p` against the level-`L` pullback cone of the
/// compression hierarchy over `D_ns`. Member means "Member-at-L": no probe
/// of the level cone is negative under `φ_p`. NonMember is sound, since the
/// level cones only shrink toward the limit.
const ADVERSARIAL_DIRECTIONS: usize = 6;

pub fn qc_outer_membership(
    p: &Correlation,
    ns: &NsSpace,
    levels: usize,
    params: &ScheduleParams,
    seed: u64,
) -> Result<Verdict> {
    check_scenario(ns.scenario(), p.scenario)?;
    require_valid(p)?;
    let direct = is_nonsignalling_direct(p, DEFAULT_TOL);
    if !direct.nonsignalling {
        return Err(Error::Signalling {
            violation: direct.max_violation,
        });
    }
    let s = p.scenario;
    let rows = crate::compression::required_rows(1, s.num_generators() * levels.max(1));
    if rows > params.budget_rows as u128 {
        return Err(Error::BudgetExceeded {
            rows,
            budget: params.budget_rows,
        });
    }
    let cone = dns_cone(ns)?;
    let tuple = ContractionTuple::new(cone.as_ref(), ns.generators().to_vec())?;
    let phi = ns.functional(&p.p);
    let eval = |v: &SpaceElement| -> f64 { v.re().iter().zip(&phi).map(|(a, b)| a * b).sum() };
    // the finite schedule admits elements slightly outside the level cone;
    // probes refuted by a certifiable fiber are dropped
    let member = |v: &SpaceElement| -> Result<bool> {
        let x = MatrixElement::from_element(v);
        if universal_rejection(cone.as_ref(), &tuple, &x, params).is_some() {
            return Ok(false);
        }
        level_contains(cone.as_ref(), &tuple, &x, levels, params)
    };
    let mut members = 0;
    let mut min_value = f64::INFINITY;
    let probes = probe_battery(ns, 20, seed);
    for v in &probes {
        if !member(v)? {
            continue;
        }
        members += 1;
        let value = eval(v);
        min_value = min_value.min(value);
        if value < -DEFAULT_TOL {
            return Ok(Verdict::non_member(Certificate::Probe {
                level: levels,
                probe: v.re(),
                value,
            }));
        }
    }
    // adversarial probes: push along directions where φ_p is negative as far
    // as the level cone allows, starting from the unit
    let mut dirs: Vec<(f64, &SpaceElement)> = probes
        .iter()
        .map(|d| {
            (
                eval(d) / d.re().iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300),
                d,
            )
        })
        .filter(|(slope, _)| *slope < 0.0)
        .collect();
    dirs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (_, dir) in dirs.into_iter().take(ADVERSARIAL_DIRECTIONS) {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi < 1e3 && member(&ns.unit().add(&dir.scale(hi)))? {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..12 {
            let mid = 0.5 * (lo + hi);
            if member(&ns.unit().add(&dir.scale(mid)))? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v = ns.unit().add(&dir.scale(lo));
        members += 1;
        let value = eval(&v);
        min_value = min_value.min(value);
        if value < -DEFAULT_TOL {
            return Ok(Verdict::non_member(Certificate::Probe {
                level: levels,
                probe: v.re(),
                value,
            }));
        }
    }
    Ok(Verdict::member(Certificate::ProbeBattery {
        level: levels,
        probes: probes.len(),
        members,
        min_value,
    }))
}

/// Full classification of one correlation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub scenario: Scenario,
    pub valid: bool,
    pub issues: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ns_direct: Option<NsDirect>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ns_state: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local: Option<Verdict>,
    /// One verdict per level `1..=L_max`; budget overruns appear as Unknown.
    pub qc_outer: Vec<(usize, Verdict)>,
}

impl Classification {
    /// Every verdict decided.
    pub fn decided(&self) -> bool {
        let verdicts = self
            .ns_state
            .iter()
            .chain(&self.local)
            .chain(self.qc_outer.iter().map(|(_, v)| v));
        verdicts.into_iter().all(|v| v.status.is_decided())
    }
}

fn budget_as_unknown(r: Result<Verdict>) -> Result<Verdict> {
    match r {
        Err(Error::BudgetExceeded { rows, budget }) => Ok(Verdict::unknown(Certificate::Budget {
            reason: format!("needs {rows} rows, budget {budget}"),
        })),
        other => other,
    }
}

pub fn classify(
    p: &Correlation,
    ns: &NsSpace,
    l_max: usize,
    params: &ScheduleParams,
    tol: f64,
    seed: u64,
) -> Result<Classification> {
    check_scenario(ns.scenario(), p.scenario)?;
    let mut out = Classification {
        scenario: p.scenario,
        valid: true,
        issues: Vec::new(),
        ns_direct: None,
        ns_state: None,
        local: None,
        qc_outer: Vec::new(),
    };
    if let Err(issues) = validate(p) {
        out.valid = false;
        out.issues = issues.iter().map(|i| i.to_string()).collect();
        return Ok(out);
    }
    let direct = is_nonsignalling_direct(p, tol);
    out.ns_direct = Some(direct);
    out.ns_state = Some(ns_state_membership(p, ns, tol)?);
    out.local = Some(budget_as_unknown(is_local(p, tol))?);
    if direct.nonsignalling {
        for levels in 1..=l_max {
            let v = budget_as_unknown(qc_outer_membership(p, ns, levels, params, seed))?;
            let stop = v.status == Status::Unknown && matches!(v.certificate, Certificate::Budget { .. });
            out.qc_outer.push((levels, v));
            if stop {
                break;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonsignalling::build_ns_space;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s22() -> Scenario {
        Scenario::new(2, 2).unwrap()
    }

    fn signalling_example() -> Correlation {
        // p(a,b|x,y) = [a = y][b = 1]
        Correlation::from_fn(s22(), |_, y, a, b| if a == y && b == 0 { 1.0 } else { 0.0 })
    }

    #[test]
    fn validation_examples() {
        assert!(validate(&Correlation::uniform(s22())).is_ok());
        let mut p = Correlation::uniform(s22());
        p.p[0] = -0.1;
        p.p[1] = 0.45;
        let issues = validate(&p).unwrap_err();
        assert!(issues.iter().any(|i| matches!(
            i,
            ValidationIssue::Negative {
                x: 1,
                y: 1,
                a: 1,
                b: 1,
                ..
            }
        )));
        let mut q = Correlation::uniform(s22());
        q.p[4] = 0.15;
        let issues = validate(&q).unwrap_err();
        assert_eq!(issues, vec![ValidationIssue::Normalization { x: 1, y: 2, sum: 0.9 }]);
    }

    #[test]
    fn direct_nonsignalling_examples() {
        let pr = Correlation::pr_box();
        assert!(validate(&pr).is_ok());
        assert!(is_nonsignalling_direct(&pr, 1e-9).nonsignalling);
        for x in 0..2 {
            for a in 0..2 {
                for w in 0..2 {
                    assert_eq!(pr.alice_marginal(a, x, w), 0.5);
                    assert_eq!(pr.bob_marginal(a, x, w), 0.5);
                }
            }
        }
        let sig = signalling_example();
        assert!(validate(&sig).is_ok());
        let d = is_nonsignalling_direct(&sig, 1e-9);
        assert!(!d.nonsignalling);
        assert_eq!(d.max_violation, 1.0);
        assert!(is_nonsignalling_direct(&Correlation::uniform(s22()), 1e-9).nonsignalling);
    }

    #[test]
    fn ns_state_examples() {
        let ns = build_ns_space(s22()).unwrap();
        let v = ns_state_membership(&Correlation::pr_box(), &ns, 1e-9).unwrap();
        assert!(v.is_member());
        let Certificate::State { values, .. } = v.certificate else {
            panic!()
        };
        assert_eq!(values[0], 1.0);
        assert!(ns_state_membership(&Correlation::uniform(s22()), &ns, 1e-9)
            .unwrap()
            .is_member());
        let v = ns_state_membership(&signalling_example(), &ns, 1e-9).unwrap();
        assert!(v.is_non_member());
        let Certificate::Relation { relation, .. } = v.certificate else {
            panic!()
        };
        assert!(relation.starts_with('G') || relation.starts_with('H'));
        let other = Correlation::uniform(Scenario::new(2, 3).unwrap());
        assert!(matches!(
            ns_state_membership(&other, &ns, 1e-9),
            Err(Error::ScenarioMismatch { .. })
        ));
    }

    #[test]
    fn ns_state_values_are_a_positive_functional() {
        // the state certificate reproduces p on every generator
        let ns = build_ns_space(s22()).unwrap();
        let p = Correlation::pr_box();
        let phi = ns.functional(&p.p);
        for (g, q) in ns.generators().iter().enumerate() {
            let v: f64 = q.re().iter().zip(&phi).map(|(a, b)| a * b).sum();
            assert!((v - p.p[g]).abs() < 1e-12);
        }
    }

    #[test]
    fn local_examples() {
        let s = s22();
        assert!(is_local(&Correlation::uniform(s), 1e-9).unwrap().is_member());
        for i in [0, 5, 11, 15] {
            let v = is_local(&Correlation::deterministic(s, i), 1e-9).unwrap();
            assert!(v.is_member());
        }
        let v = is_local(&Correlation::pr_box(), 1e-9).unwrap();
        assert!(v.is_non_member());
        let Certificate::BellWitness {
            coefficients,
            bound,
            value,
            ..
        } = v.certificate
        else {
            panic!()
        };
        assert!((bound - 2.0).abs() < 1e-9);
        assert!(value > 2.0 + 1e-6);
        // independent oracle: enumerate the 16 strategies by hand
        let mut best = f64::NEG_INFINITY;
        for a0 in 0..2 {
            for a1 in 0..2 {
                for b0 in 0..2 {
                    for b1 in 0..2 {
                        let al = [a0, a1];
                        let bo = [b0, b1];
                        let mut v = 0.0;
                        for x in 0..2 {
                            for y in 0..2 {
                                v += coefficients[s.index(x, y, al[x], bo[y])];
                            }
                        }
                        best = f64::max(best, v);
                    }
                }
            }
        }
        assert!((best - 2.0).abs() < 1e-9);
        assert!((value - 4.0).abs() < 1e-9);

        // outside (2,2) the witness comes from the LP dual
        let s23 = Scenario::new(2, 3).unwrap();
        let pr = Correlation::pr_box();
        let embedded = Correlation::from_fn(s23, |x, y, a, b| if a < 2 && b < 2 { pr.get(x, y, a, b) } else { 0.0 });
        let v = is_local(&embedded, 1e-9).unwrap();
        let Certificate::BellWitness {
            name,
            coefficients,
            bound,
            value,
        } = v.certificate
        else {
            panic!()
        };
        assert_eq!(name, "lp-dual");
        let f = BellFunctional::new(s23, coefficients).unwrap();
        assert!((maximize_over_local(&f).unwrap().0 - bound).abs() < 1e-9);
        assert!(value > bound + 1e-6);

        let variants = chsh_variants();
        assert!(variants.contains(&chsh()));
        for f in &variants {
            assert!((maximize_over_local(f).unwrap().0 - 2.0).abs() < 1e-12);
            assert!((maximize_over_ns(f).unwrap().0 - 4.0).abs() < 1e-6);
        }
        let big = Scenario::new(3, 5).unwrap();
        assert!(matches!(
            is_local(&Correlation::uniform(big), 1e-9),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn bell_examples() {
        let f = chsh();
        assert_eq!(bell_value(&Correlation::pr_box(), &f).unwrap(), 4.0);
        let (ns_max, arg) = maximize_over_ns(&f).unwrap();
        assert!((ns_max - 4.0).abs() < 1e-6);
        assert!(is_nonsignalling_direct(&arg, 1e-9).nonsignalling);
        let (local_max, _) = maximize_over_local(&f).unwrap();
        assert!((local_max - 2.0).abs() < 1e-9);
        let other = BellFunctional::new(Scenario::new(2, 3).unwrap(), vec![0.0; 36]).unwrap();
        assert!(bell_value(&Correlation::pr_box(), &other).is_err());
    }

    #[test]
    fn parse_round_trip_and_diagnostics() {
        let pr = Correlation::pr_box();
        assert_eq!(Correlation::parse(&pr.to_text()).unwrap(), pr);
        let text = "# PR box\nscenario 2 2\n1 1 1 1 0.5\n1 1 2 2 0.5\n";
        let p = Correlation::parse(text).unwrap();
        assert_eq!(p.get(0, 0, 0, 0), 0.5);
        assert_eq!(p.get(0, 1, 0, 0), 0.0);
        let err = Correlation::parse("scenario 2 2\n1 1 3 1 0.5\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 2,
                message: "field 3 (a): 3 outside 1..=2".into()
            }
        );
        assert!(matches!(
            Correlation::parse("1 1 1 1 0.5"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Correlation::parse("scenario 2 2\n1 1 1 x\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Correlation::parse("scenario 2 2\n1 1 1 1 zz\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Correlation::parse("scenario 2 2\n1 1 1 1 1\n1 1 1 1 1\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(Correlation::parse(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn qc_outer_examples() {
        let params = ScheduleParams::default();
        let s = Scenario::new(1, 2).unwrap();
        let ns = build_ns_space(s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..3 {
            let p = random_local(s, &mut rng);
            for l in 1..=(if i == 0 { 2 } else { 1 }) {
                let v = qc_outer_membership(&p, &ns, l, &params, 1).unwrap();
                assert!(v.is_member(), "{v:?}");
            }
        }
        let ns22 = build_ns_space(s22()).unwrap();
        assert!(matches!(
            qc_outer_membership(&signalling_example(), &ns22, 1, &params, 1),
            Err(Error::Signalling { .. })
        ));
        assert!(matches!(
            qc_outer_membership(&Correlation::pr_box(), &ns22, 1, &params, 1),
            Err(Error::BudgetExceeded { .. })
        ));
        let report = classify(&Correlation::pr_box(), &ns22, 1, &params, 1e-9, 1).unwrap();
        assert!(report.valid);
        assert!(report.ns_state.as_ref().unwrap().is_member());
        assert!(report.local.as_ref().unwrap().is_non_member());
        assert_eq!(report.qc_outer.len(), 1);
        assert_eq!(report.qc_outer[0].1.status, Status::Unknown);
        assert!(!report.decided());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn oracles_agree(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ns = build_ns_space(s22()).unwrap();
            let p = if rng.random_bool(0.5) { random_valid(s22(), &mut rng) } else { random_nonsignalling(s22(), &mut rng) };
            prop_assert!(validate(&p).is_ok());
            let direct = is_nonsignalling_direct(&p, 1e-9).nonsignalling;
            let state = ns_state_membership(&p, &ns, 1e-9).unwrap().is_member();
            prop_assert_eq!(direct, state);
        }

        #[test]
        fn inclusion_chain(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ns = build_ns_space(s22()).unwrap();
            let p = random_local(s22(), &mut rng);
            prop_assert!(is_local(&p, 1e-9).unwrap().is_member());
            prop_assert!(ns_state_membership(&p, &ns, 1e-9).unwrap().is_member());
            let f = BellFunctional::new(s22(), (0..16).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let (max, _) = maximize_over_ns(&f).unwrap();
            prop_assert!(max >= bell_value(&p, &f).unwrap() - 1e-9);
            let q = random_nonsignalling(s22(), &mut rng);
            prop_assert!(max >= bell_value(&q, &f).unwrap() - 1e-9);
        }

        #[test]
        fn bell_value_is_bilinear(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = s22();
            let (p, q) = (random_valid(s, &mut rng), random_valid(s, &mut rng));
            let f = BellFunctional::new(s, (0..16).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let g = BellFunctional::new(s, (0..16).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let (alpha, beta): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let mix = Correlation { scenario: s, p: p.p.iter().zip(&q.p).map(|(a, b)| alpha * a + beta * b).collect() };
            let lhs = bell_value(&mix, &f).unwrap();
            let rhs = alpha * bell_value(&p, &f).unwrap() + beta * bell_value(&q, &f).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
            let fg = BellFunctional { scenario: s, coefficients: f.coefficients.iter().zip(&g.coefficients).map(|(a, b)| alpha * a + beta * b).collect() };
            let lhs = bell_value(&p, &fg).unwrap();
            let rhs = alpha * bell_value(&p, &f).unwrap() + beta * bell_value(&p, &g).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
