//! Seeded invariant suite. Every check reports a pass count and a JSON
//! evidence record; the combined payload is deterministic for a fixed seed.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::compression::{
    build_p_hat, build_q, check_shift, compression_membership, compression_round, default_probes, hat_to_plain,
    level_membership, projection_test, ContractionTuple, ProjectionVerdict, ScheduleParams,
};
use crate::conic::{hmat, hvec, lineality_basis, lp_feasible, psd_affine_feasible, LpProblem, PsdAffineProblem};
use crate::correlations::{
    bell_value, chsh, classify, is_local, is_nonsignalling_direct, maximize_over_local, maximize_over_ns,
    ns_state_membership, qc_outer_membership, random_local, random_nonsignalling, random_valid, BellFunctional,
    Correlation,
};
use crate::linalg::{
    c, canonical_shuffle, identity, is_psd, kron, max_abs, min_eigenvalue, ones, ComplexMatrix, RealMatrix, Tolerance,
    C64,
};
use crate::nonsignalling::{
    alice_diagonal, basis_rank_with_relations, bob_diagonal, build_commutative_model, build_ns_space,
    commutative_diagonal, commutative_map_rank_exact, dns_cone, universal_map, Scenario,
};
use crate::space::{
    archimedean_membership, diagonal_cone, generated_cone, membership, order_norm, quotient_by_subspace, DiagonalModel,
    GeneratedCone, MatrixElement, SpaceElement, DEFAULT_SCHEDULE,
};
use crate::verdict::{Certificate, Status, Verdict};
use crate::{Error, Result};

pub const SCHEMA: &str = "ordercone-cert/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    All,
    /// Only the checks behind the acceptance criteria.
    Acceptance,
    Linalg,
    Conic,
    Space,
    Compression,
    Nonsignalling,
    Correlations,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "acceptance" => Suite::Acceptance,
            "linalg" => Suite::Linalg,
            "conic" => Suite::Conic,
            "space" => Suite::Space,
            "compression" => Suite::Compression,
            "nonsignalling" => Suite::Nonsignalling,
            "correlations" => Suite::Correlations,
            other => return Err(Error::InvalidInput(format!("unknown suite `{other}`"))),
        })
    }
}

/// One row of the report.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub id: String,
    pub module: String,
    pub property: String,
    pub passed: usize,
    pub total: usize,
    /// First few failures, human readable.
    pub failures: Vec<String>,
    pub evidence: Value,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl Check {
    pub fn ok(&self) -> bool {
        self.total > 0 && self.passed == self.total
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub schema: &'static str,
    pub seed: u64,
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::ok)
    }

    pub fn check(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// Machine-readable certificate payload. Timings are left out so the
    /// bytes depend only on the seed.
    pub fn payload(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.id.len()).max().unwrap_or(2).max(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:<14} {:>11}  {:>9}  result",
            "check", "module", "passed", "time"
        );
        for ch in &self.checks {
            let _ = writeln!(
                out,
                "{:<width$}  {:<14} {:>11}  {:>8.2}s  {}",
                ch.id,
                ch.module,
                format!("{}/{}", ch.passed, ch.total),
                ch.elapsed.as_secs_f64(),
                if ch.ok() { "PASS" } else { "FAIL" }
            );
            for f in &ch.failures {
                let _ = writeln!(out, "{:<width$}    - {f}", "");
            }
        }
        let passed = self.checks.iter().filter(|c| c.ok()).count();
        let _ = writeln!(out, "{passed}/{} checks passed", self.checks.len());
        out
    }
}

/// Pass/fail counter for one check.
#[derive(Default)]
pub struct Tally {
    passed: usize,
    total: usize,
    failures: Vec<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.total += 1;
        if ok {
            self.passed += 1;
        } else if self.failures.len() < 5 {
            self.failures.push(what());
        }
    }
}

type CheckFn = fn(&mut Tally, u64) -> Result<Value>;

struct CheckDef {
    id: &'static str,
    module: &'static str,
    property: &'static str,
    acceptance: bool,
    run: CheckFn,
}

const CHECKS: &[CheckDef] = &[
    CheckDef {
        id: "kron-associative-bilinear",
        module: "linalg",
        property: "kron is associative and bilinear",
        acceptance: false,
        run: kron_laws,
    },
    CheckDef {
        id: "shuffle-swaps-kron",
        module: "linalg",
        property: "canonical shuffle maps A⊗B to B⊗A",
        acceptance: false,
        run: shuffle_swaps,
    },
    CheckDef {
        id: "psd-unitary-invariance",
        module: "linalg",
        property: "positivity is invariant under unitary conjugation",
        acceptance: false,
        run: psd_unitary,
    },
    CheckDef {
        id: "lp-certificates-roundtrip",
        module: "conic",
        property: "LP witnesses and separators re-check",
        acceptance: false,
        run: lp_roundtrip,
    },
    CheckDef {
        id: "psd-certificates-roundtrip",
        module: "conic",
        property: "PSD witnesses and separators re-check",
        acceptance: false,
        run: psd_roundtrip,
    },
    CheckDef {
        id: "solver-determinism",
        module: "conic",
        property: "identical inputs give identical verdicts",
        acceptance: false,
        run: solver_determinism,
    },
    CheckDef {
        id: "dmax-inside-concrete-ordering",
        module: "ordered-space",
        property: "D^max members lie in the diagonal cone",
        acceptance: false,
        run: dmax_inside_diagonal,
    },
    CheckDef {
        id: "closure-contains-cone",
        module: "ordered-space",
        property: "Archimedean closure contains the cone",
        acceptance: false,
        run: closure_contains,
    },
    CheckDef {
        id: "order-norm-symmetries",
        module: "ordered-space",
        property: "order norm is *-invariant and homogeneous",
        acceptance: false,
        run: order_norm_laws,
    },
    CheckDef {
        id: "quotient-unital-positive",
        module: "ordered-space",
        property: "quotient map is unital and positive",
        acceptance: false,
        run: quotient_laws,
    },
    CheckDef {
        id: "dimension-formula",
        module: "nonsignalling",
        property: "dim V_ns = (n(k-1)+1)^2 with an independent basis",
        acceptance: true,
        run: dimension_formula,
    },
    CheckDef {
        id: "commutative-isomorphism",
        module: "nonsignalling",
        property: "universal map onto the commutative model is bijective, Q = E·F",
        acceptance: true,
        run: commutative_isomorphism,
    },
    CheckDef {
        id: "dns-proper-unit-interior",
        module: "nonsignalling",
        property: "D_ns is proper and e is interior",
        acceptance: false,
        run: dns_proper,
    },
    CheckDef {
        id: "ucp-into-commutative-model",
        module: "nonsignalling",
        property: "D^max members map to positive diagonals",
        acceptance: false,
        run: ucp_check,
    },
    CheckDef {
        id: "ns-oracle-equivalence",
        module: "correlations",
        property: "direct nonsignalling test agrees with state membership",
        acceptance: true,
        run: ns_equivalence,
    },
    CheckDef {
        id: "polytope-values",
        module: "correlations",
        property: "CHSH bounds and PR-box separation",
        acceptance: true,
        run: polytope_values,
    },
    CheckDef {
        id: "inclusion-chain",
        module: "correlations",
        property: "local ⊆ qc outer ⊆ nonsignalling on samples",
        acceptance: false,
        run: inclusion_chain,
    },
    CheckDef {
        id: "bell-value-bilinear",
        module: "correlations",
        property: "bell value is bilinear, ns maximum dominates",
        acceptance: false,
        run: bilinearity,
    },
    CheckDef {
        id: "concrete-case-equivalence",
        module: "compression",
        property: "x ≥ 0 ⟺ compression member ⟺ hat member",
        acceptance: true,
        run: concrete_equivalence,
    },
    CheckDef {
        id: "hat-containment",
        module: "compression",
        property: "hat members are plain members",
        acceptance: true,
        run: hat_containment,
    },
    CheckDef {
        id: "projection-detection",
        module: "compression",
        property: "projection test separates projections from contractions",
        acceptance: true,
        run: projection_detection,
    },
    CheckDef {
        id: "unitality-identities",
        module: "compression",
        property: "±off-diagonal blocks and ±Q are members, t near 1 + 1/ε",
        acceptance: true,
        run: unitality,
    },
    CheckDef {
        id: "level-monotonicity",
        module: "compression",
        property: "level cones are nested increasing",
        acceptance: true,
        run: level_monotonicity,
    },
    CheckDef {
        id: "compression-closure",
        module: "compression",
        property: "closed under direct sums and scalar conjugation",
        acceptance: false,
        run: compression_closure,
    },
    CheckDef {
        id: "hat-permutation-symmetry",
        module: "compression",
        property: "factor swap permutes hat operators",
        acceptance: false,
        run: hat_permutation,
    },
    CheckDef {
        id: "reproducibility",
        module: "cli",
        property: "same seed gives identical verdicts and certificates",
        acceptance: false,
        run: reproducibility,
    },
    CheckDef {
        id: "certificates-inline",
        module: "cli",
        property: "every NonMember verdict carries a certificate",
        acceptance: false,
        run: certificates_inline,
    },
];

fn selected(def: &CheckDef, suite: Suite) -> bool {
    match suite {
        Suite::All => true,
        Suite::Acceptance => def.acceptance,
        Suite::Linalg => def.module == "linalg",
        Suite::Conic => def.module == "conic",
        Suite::Space => def.module == "ordered-space",
        Suite::Compression => def.module == "compression",
        Suite::Nonsignalling => def.module == "nonsignalling",
        Suite::Correlations => def.module == "correlations" || def.module == "cli",
    }
}

/// Identifiers of every check, in report order.
pub fn check_ids() -> Vec<&'static str> {
    CHECKS.iter().map(|s| s.id).collect()
}

pub fn run_check(id: &str, seed: u64) -> Result<Check> {
    let def = CHECKS
        .iter()
        .find(|s| s.id == id)
        .ok_or_else(|| Error::InvalidInput(format!("unknown check `{id}`")))?;
    Ok(execute(def, seed))
}

pub fn run_suite(suite: Suite, seed: u64) -> SuiteReport {
    let checks = CHECKS
        .iter()
        .filter(|s| selected(s, suite))
        .map(|s| execute(s, seed))
        .collect();
    SuiteReport {
        schema: SCHEMA,
        seed,
        suite,
        checks,
    }
}

fn execute(def: &CheckDef, seed: u64) -> Check {
    let start = Instant::now();
    let mut tally = Tally::default();
    // each check draws from its own stream so subsets reproduce the full run
    let sub_seed = seed ^ fnv(def.id);
    let evidence = match (def.run)(&mut tally, sub_seed) {
        Ok(v) => v,
        Err(e) => {
            tally.total += 1;
            tally.failures.push(format!("error: {e}"));
            json!({ "error": e.to_string() })
        }
    };
    Check {
        id: def.id.to_string(),
        module: def.module.to_string(),
        property: def.property.to_string(),
        passed: tally.passed,
        total: tally.total,
        failures: tally.failures,
        evidence,
        elapsed: start.elapsed(),
    }
}

fn fnv(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    })
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_complex(rng: &mut impl Rng, r: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(r, cols, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn random_hermitian(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let a = random_complex(rng, n, n);
    (&a + a.adjoint()) * c(0.5)
}

fn random_psd(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let a = random_complex(rng, n, n);
    &a * a.adjoint()
}

fn random_real(rng: &mut impl Rng, d: usize) -> SpaceElement {
    SpaceElement::real(&(0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>())
}

fn diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    max_abs(&(a - b))
}

/// `t` values of each scheduled round of a compression verdict.
fn round_ts(v: &Verdict) -> Vec<(f64, f64)> {
    let Certificate::Schedule { rounds } = &v.certificate else {
        return Vec::new();
    };
    rounds
        .iter()
        .filter_map(|r| match r.certificate.as_ref() {
            Certificate::Shift { t, .. } => Some((r.eps, t.iter().copied().fold(0.0, f64::max))),
            _ => None,
        })
        .collect()
}

fn kron_laws(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let a = random_complex(&mut rng, 2, 2);
        let b = random_complex(&mut rng, 3, 2);
        let d = random_complex(&mut rng, 2, 3);
        let b2 = random_complex(&mut rng, 3, 2);
        let s = C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let assoc = diff(&kron(&kron(&a, &b), &d), &kron(&a, &kron(&b, &d)));
        let left = diff(&kron(&(&a * s), &(&b + &b2)), &((kron(&a, &b) + kron(&a, &b2)) * s));
        let r = assoc.max(left);
        worst = worst.max(r);
        t.check(r < 1e-12, || format!("triple {i}: residual {r:e}"));
    }
    Ok(json!({ "triples": 50, "max_residual_below_1e-12": worst < 1e-12 }))
}

fn shuffle_swaps(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    for i in 0..50 {
        let n = rng.random_range(1..4usize);
        let m = rng.random_range(1..4usize);
        let a = random_hermitian(&mut rng, n);
        let b = random_hermitian(&mut rng, m);
        let r = diff(&canonical_shuffle(&kron(&a, &b), n, m)?, &kron(&b, &a));
        t.check(r < 1e-14, || format!("pair {i} ({n},{m}): residual {r:e}"));
    }
    Ok(json!({ "pairs": 50 }))
}

fn psd_unitary(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let tol = Tolerance::default();
    let mut psd = 0;
    for i in 0..50 {
        let a = if i % 2 == 0 {
            random_psd(&mut rng, 4)
        } else {
            random_psd(&mut rng, 4) - identity(4) * c(rng.random_range(0.05..1.0))
        };
        let u = random_complex(&mut rng, 4, 4).qr().q();
        let b = &u * &a * u.adjoint();
        let (x, y) = (is_psd(&a, &tol)?, is_psd(&((&b + b.adjoint()) * c(0.5)), &tol)?);
        psd += x as usize;
        t.check(x == y, || format!("matrix {i}: {x} before, {y} after conjugation"));
    }
    Ok(json!({ "matrices": 50, "psd": psd }))
}

fn lp_roundtrip(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let tol = Tolerance::default();
    let (mut members, mut separated) = (0, 0);
    for i in 0..30 {
        let a = RealMatrix::from_fn(4, 7, |_, _| rng.random_range(0.0..1.0));
        let x0: Vec<f64> = (0..7).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut b: Vec<f64> = (0..4).map(|r| (0..7).map(|j| a[(r, j)] * x0[j]).sum()).collect();
        let feasible = i % 2 == 0;
        if !feasible {
            // nonnegative columns cannot reach a negative right-hand side
            b[i % 4] = -1.0 - b[i % 4];
        }
        let prob = LpProblem::feasibility(a.clone(), b.clone());
        let v = lp_feasible(&prob)?;
        match (&v.certificate, feasible) {
            (Certificate::LpWitness { x, .. }, true) => {
                members += 1;
                let res = prob.residual(x);
                let min = x.iter().copied().fold(f64::INFINITY, f64::min);
                t.check(res <= tol.affine_eps && min >= -tol.psd_eps, || {
                    format!("LP {i}: residual {res:e}, min {min:e}")
                });
            }
            (Certificate::Separator { functional, .. }, false) => {
                separated += 1;
                let col_min = (0..7)
                    .map(|j| (0..4).map(|r| functional[r] * a[(r, j)]).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                let target: f64 = functional.iter().zip(&b).map(|(f, v)| f * v).sum();
                t.check(col_min >= -tol.psd_eps && target < 0.0, || {
                    format!("LP {i}: separator column min {col_min:e}, target {target:e}")
                });
            }
            _ => t.check(false, || format!("LP {i}: unexpected verdict {:?}", v.status)),
        }
    }
    Ok(json!({ "problems": 30, "members": members, "separated": separated }))
}

/// `S ⪰ 0` (2×2), trace 1, real off-diagonal `s`.
fn trace_problem(s: f64) -> Result<PsdAffineProblem> {
    PsdAffineProblem::from_map(
        vec![2],
        |b| vec![b[0][(0, 0)].re + b[0][(1, 1)].re, b[0][(0, 1)].re, b[0][(0, 1)].im],
        vec![1.0, s, 0.0],
        Tolerance::default(),
    )
}

fn psd_roundtrip(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let tol = Tolerance::default();
    let mut cases = Vec::new();
    for i in 0..10 {
        let s0 = [random_psd(&mut rng, 2), random_psd(&mut rng, 3)];
        let z0: Vec<f64> = s0.iter().flat_map(hvec).collect();
        let a = RealMatrix::from_fn(4, z0.len(), |_, _| rng.random_range(-1.0..1.0));
        let b: Vec<f64> = (0..4).map(|r| (0..z0.len()).map(|j| a[(r, j)] * z0[j]).sum()).collect();
        cases.push((
            format!("random {i}"),
            PsdAffineProblem::new(vec![2, 3], a, b, tol)?,
            Status::Member,
        ));
    }
    for s in [0.2, 0.45] {
        cases.push((
            format!("trace one, off-diagonal {s}"),
            trace_problem(s)?,
            Status::Member,
        ));
    }
    for s in [0.6, 0.9] {
        cases.push((
            format!("trace one, off-diagonal {s}"),
            trace_problem(s)?,
            Status::NonMember,
        ));
    }
    let mut out = Vec::new();
    for (name, prob, expected) in &cases {
        let v = psd_affine_feasible(prob)?;
        let ok = match &v.certificate {
            Certificate::PsdWitness { blocks, .. } => {
                let z: Vec<f64> = blocks.iter().flat_map(|m| hvec(&m.to_matrix())).collect();
                let res = (0..prob.rhs.len())
                    .map(|r| ((0..z.len()).map(|j| prob.matrix[(r, j)] * z[j]).sum::<f64>() - prob.rhs[r]).abs())
                    .fold(0.0, f64::max);
                let mut ok = res <= tol.affine_eps * (1.0 + crate::linalg::max_abs(&prob.matrix.map(c)));
                for m in blocks {
                    ok &= min_eigenvalue(&m.to_matrix())? >= -tol.psd_slack(1.0);
                }
                ok
            }
            Certificate::PsdSeparator { functional, .. } => {
                // adjoint image blockwise PSD and negative pairing with b
                let adj: Vec<f64> = (0..prob.dof())
                    .map(|j| (0..prob.rhs.len()).map(|r| prob.matrix[(r, j)] * functional[r]).sum())
                    .collect();
                let mut ok = functional.iter().zip(&prob.rhs).map(|(y, b)| y * b).sum::<f64>() < 0.0;
                let mut off = 0;
                for &n in &prob.block_sizes {
                    let m = hmat(&adj[off..off + n * n], n);
                    ok &= min_eigenvalue(&m)? >= -tol.psd_slack(max_abs(&m));
                    off += n * n;
                }
                ok
            }
            _ => false,
        };
        t.check(ok && v.status == *expected, || {
            format!("{name}: {:?}, certificate re-check {ok}", v.status)
        });
        out.push(json!({ "case": name, "status": v.status }));
    }
    Ok(Value::Array(out))
}

fn solver_determinism(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let model = DiagonalModel::full(2);
    let gens = vec![SpaceElement::real(&[1.0, 0.0]), SpaceElement::real(&[1.0, 1.0])];
    let cone = GeneratedCone::new(model.space(), &gens, Tolerance::default())?;
    for i in 0..10 {
        let x = MatrixElement::new(vec![random_hermitian(&mut rng, 2), random_hermitian(&mut rng, 2)])?;
        let a = membership(&cone, &x)?;
        let b = membership(&cone, &x)?;
        t.check(a == b, || format!("element {i}: verdicts differ"));
    }
    Ok(json!({ "repeats": 10 }))
}

fn dmax_inside_diagonal(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let model = DiagonalModel::full(3);
    let gens = vec![
        SpaceElement::real(&[1.0, 1.0, 0.0]),
        SpaceElement::real(&[0.0, 1.0, 1.0]),
        SpaceElement::real(&[1.0, 0.0, 1.0]),
        SpaceElement::real(&[1.0, 0.0, 0.0]),
    ];
    let dmax = GeneratedCone::new(model.space(), &gens, Tolerance::default())?;
    let concrete = diagonal_cone(&model);
    let mut members = 0;
    for i in 0..20 {
        let mut x = MatrixElement::zeros(3, 2);
        for g in &gens {
            let mut s = random_psd(&mut rng, 2);
            if rng.random_bool(0.5) {
                s -= identity(2) * c(0.6);
            }
            x = x.add(&MatrixElement::tensor(&s, g));
        }
        if membership(&dmax, &x)?.is_member() {
            members += 1;
            let ok = membership(concrete.as_ref(), &x)?.is_member();
            t.check(ok, || {
                format!("element {i} is a D^max member outside the diagonal cone")
            });
        }
    }
    if members == 0 {
        t.check(false, || "no D^max members sampled".into());
    }
    Ok(json!({ "samples": 20, "dmax_members": members }))
}

fn closure_contains(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let model = DiagonalModel::full(3);
    let cone = diagonal_cone(&model);
    for i in 0..20 {
        let x = MatrixElement::new((0..3).map(|_| random_psd(&mut rng, 2)).collect())?;
        let a = membership(cone.as_ref(), &x)?.is_member();
        let b = archimedean_membership(cone.as_ref(), &x, &DEFAULT_SCHEDULE)?.is_member();
        t.check(a && b, || format!("element {i}: cone {a}, closure {b}"));
    }
    Ok(json!({ "samples": 20 }))
}

fn order_norm_laws(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let model = DiagonalModel::full(3);
    let cone = diagonal_cone(&model);
    let space = model.space();
    for i in 0..20 {
        let v = random_real(&mut rng, 3).scale(2.0);
        let lambda = rng.random_range(0.1..5.0);
        let n = order_norm(space, cone.as_ref(), &v, 1e-9)?;
        let adj = order_norm(space, cone.as_ref(), &space.adjoint(&v), 1e-9)?;
        let scaled = order_norm(space, cone.as_ref(), &v.scale(1.0 / lambda), 1e-9)?;
        // independent: in the diagonal model the order norm is the sup norm
        let sup = v.re().iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let ok =
            (n - adj).abs() < 1e-8 && (n - lambda * scaled).abs() < 1e-7 * (1.0 + lambda) && (n - sup).abs() < 1e-8;
        t.check(ok, || {
            format!("sample {i}: {n} vs adjoint {adj}, scaled {}", lambda * scaled)
        });
    }
    Ok(json!({ "samples": 20 }))
}

fn quotient_laws(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let model = DiagonalModel::full(3);
    let space = model.space();
    let gens: Vec<SpaceElement> = (0..3).map(|i| SpaceElement::basis(3, i)).collect();
    let q = quotient_by_subspace(space, &[SpaceElement::real(&[1.0, -1.0, 0.0])])?;
    let unit_err = q
        .project(space.unit())
        .sub(q.space.unit())
        .coeffs
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    t.check(unit_err < 1e-12, || format!("unit maps with error {unit_err:e}"));
    let images: Vec<SpaceElement> = gens.iter().map(|g| q.project(g)).collect();
    let qcone = generated_cone(&q.space, &images)?;
    for i in 0..20 {
        let combo = gens.iter().fold(SpaceElement::zero(3), |acc, g| {
            acc.add(&g.scale(rng.random_range(0.0..2.0)))
        });
        let ok = membership(qcone.as_ref(), &MatrixElement::from_element(&q.project(&combo)))?.is_member();
        t.check(ok, || format!("combination {i} not positive in the quotient"));
    }
    Ok(json!({ "samples": 20 }))
}

const SCENARIOS: [(usize, usize, usize); 4] = [(2, 2, 9), (2, 3, 25), (3, 2, 16), (3, 3, 49)];

fn dimension_formula(t: &mut Tally, _seed: u64) -> Result<Value> {
    let mut out = Vec::new();
    for (n, k, expected) in SCENARIOS {
        let s = Scenario::new(n, k)?;
        let ns = build_ns_space(s)?;
        let labels = ns.basis_labels().len();
        // B together with the relations spans everything exactly when B is a basis of the quotient
        let full = basis_rank_with_relations(s);
        t.check(
            ns.dim() == expected && labels == expected && full == s.num_generators(),
            || {
                format!(
                    "({n},{k}): dimension {}, |B| {labels}, rank with relations {full}",
                    ns.dim()
                )
            },
        );
        out.push(json!({ "n": n, "k": k, "dimension": ns.dim(), "basis": labels, "relation_rank": s.num_generators() - ns.dim() }));
    }
    Ok(Value::Array(out))
}

fn commutative_isomorphism(t: &mut Tally, _seed: u64) -> Result<Value> {
    let mut out = Vec::new();
    for (n, k, _) in SCENARIOS {
        let s = Scenario::new(n, k)?;
        let ns = build_ns_space(s)?;
        let exact = commutative_map_rank_exact(s);
        let cm = build_commutative_model(s, 4096)?;
        let map = universal_map(&ns, &cm.generators)?;
        let square = map.matrix.nrows() == ns.dim() && map.matrix.ncols() == ns.dim();
        t.check(exact == ns.dim() && square && map.rank() == ns.dim(), || {
            format!(
                "({n},{k}): exact rank {exact}, numeric rank {}, dimension {}",
                map.rank(),
                ns.dim()
            )
        });
        let mut product_ok = true;
        for x in 0..n {
            for y in 0..n {
                for a in 0..k {
                    for b in 0..k {
                        let q = commutative_diagonal(s, x, y, a, b);
                        let (e, f) = (alice_diagonal(s, x, a), bob_diagonal(s, y, b));
                        product_ok &= q.iter().zip(e.iter().zip(&f)).all(|(q, (e, f))| *q == e * f);
                    }
                }
            }
        }
        t.check(product_ok, || format!("({n},{k}): Q differs from E·F"));
        out.push(json!({ "n": n, "k": k, "exact_rank": exact, "model_size": cm.model.size() }));
    }
    Ok(Value::Array(out))
}

fn dns_proper(t: &mut Tally, _seed: u64) -> Result<Value> {
    let mut out = Vec::new();
    for (n, k) in [(2, 2), (2, 3)] {
        let s = Scenario::new(n, k)?;
        let ns = build_ns_space(s)?;
        let gens: Vec<Vec<f64>> = ns.generators().iter().map(|g| g.re()).collect();
        let lineal = lineality_basis(&gens)?.len();
        t.check(lineal == 0, || format!("({n},{k}): lineality dimension {lineal}"));
        let cone = dns_cone(&ns)?;
        let delta = 1.0 / (4.0 * s.num_generators() as f64);
        for i in 0..ns.dim() {
            for sign in [1.0, -1.0] {
                let v = ns.unit().sub(&SpaceElement::basis(ns.dim(), i).scale(sign * delta));
                let ok = membership(cone.as_ref(), &MatrixElement::from_element(&v))?.is_member();
                t.check(ok, || format!("({n},{k}): e ∓ δ·b_{i} not in D_ns"));
            }
        }
        out.push(json!({ "n": n, "k": k, "delta": delta }));
    }
    Ok(Value::Array(out))
}

fn ucp_check(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let s = Scenario::new(2, 2)?;
    let ns = build_ns_space(s)?;
    let cm = build_commutative_model(s, 4096)?;
    let map = universal_map(&ns, &cm.generators)?;
    let target = diagonal_cone(&cm.model);
    let img = cm.model.image(&map.apply(ns.unit()));
    t.check(img.iter().all(|v| (v - 1.0).abs() < 1e-9), || {
        "unit does not map to the identity".into()
    });
    for i in 0..10 {
        // Σ g_j ⊗ S_j with PSD S_j is in D^max
        let mut x = MatrixElement::zeros(ns.dim(), 2);
        for g in ns.generators() {
            x = x.add(&MatrixElement::tensor(&random_psd(&mut rng, 2), g));
        }
        let ok = membership(target.as_ref(), &map.apply_matrix(&x))?.is_member();
        t.check(ok, || format!("sample {i}: image not positive"));
    }
    Ok(json!({ "samples": 10, "level": 2 }))
}

fn ns_equivalence(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let s = Scenario::new(2, 2)?;
    let ns = build_ns_space(s)?;
    let (mut nonsignalling, mut disagreements) = (0, 0);
    for i in 0..1000 {
        let p = if rng.random_bool(0.5) {
            random_valid(s, &mut rng)
        } else {
            random_nonsignalling(s, &mut rng)
        };
        let direct = is_nonsignalling_direct(&p, 1e-9).nonsignalling;
        let state = ns_state_membership(&p, &ns, 1e-9)?.is_member();
        nonsignalling += direct as usize;
        disagreements += (direct != state) as usize;
        t.check(direct == state, || {
            format!("sample {i}: direct {direct}, state {state}")
        });
    }
    Ok(json!({ "samples": 1000, "nonsignalling": nonsignalling, "disagreements": disagreements }))
}

fn polytope_values(t: &mut Tally, _seed: u64) -> Result<Value> {
    let f = chsh();
    let (local, _) = maximize_over_local(&f)?;
    t.check((local - 2.0).abs() <= 1e-9, || format!("local CHSH maximum {local}"));
    let (ns_max, _) = maximize_over_ns(&f)?;
    t.check((ns_max - 4.0).abs() <= 1e-6, || {
        format!("nonsignalling CHSH maximum {ns_max}")
    });
    let pr = Correlation::pr_box();
    let ns = build_ns_space(pr.scenario)?;
    t.check(is_nonsignalling_direct(&pr, 1e-9).nonsignalling, || {
        "PR box signals".into()
    });
    t.check(ns_state_membership(&pr, &ns, 1e-9)?.is_member(), || {
        "PR box is not a state".into()
    });
    let v = is_local(&pr, 1e-9)?;
    let mut witness = Value::Null;
    match &v.certificate {
        Certificate::BellWitness {
            coefficients,
            bound,
            value,
            ..
        } if v.is_non_member() => {
            // re-derive the local bound of the witness over every vertex
            let g = BellFunctional::new(pr.scenario, coefficients.clone())?;
            let (wbound, _) = maximize_over_local(&g)?;
            let wvalue = bell_value(&pr, &g)?;
            t.check(
                wbound <= 2.0 + 1e-9 && wvalue > 2.0 + 1e-6 && (wvalue - value).abs() < 1e-9,
                || format!("witness bound {wbound}, value {wvalue} (reported {bound}, {value})"),
            );
            witness = json!({ "local_bound": wbound, "value": wvalue });
        }
        _ => t.check(false, || format!("PR box verdict {:?}", v.status)),
    }
    Ok(json!({ "local_chsh": local, "ns_chsh": ns_max, "pr_witness": witness }))
}

fn inclusion_chain(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let s22 = Scenario::new(2, 2)?;
    let ns22 = build_ns_space(s22)?;
    for i in 0..20 {
        let p = random_local(s22, &mut rng);
        let local = is_local(&p, 1e-9)?.is_member();
        let state = ns_state_membership(&p, &ns22, 1e-9)?.is_member();
        t.check(local && state, || {
            format!("local sample {i}: local {local}, ns {state}")
        });
    }
    // qc outer levels are reachable within the row budget for one input per party
    let s12 = Scenario::new(1, 2)?;
    let ns12 = build_ns_space(s12)?;
    let params = ScheduleParams::default();
    let mut reached = Vec::new();
    for i in 0..4 {
        let p = random_local(s12, &mut rng);
        let levels = if i == 0 { 2 } else { 1 };
        for l in 1..=levels {
            let v = qc_outer_membership(&p, &ns12, l, &params, seed)?;
            t.check(v.is_member(), || {
                format!("(1,2) sample {i}: qc outer level {l} {:?}", v.status)
            });
            reached.push(l);
        }
    }
    Ok(json!({ "local_samples": 20, "qc_levels_checked": reached }))
}

fn bilinearity(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let s = Scenario::new(2, 2)?;
    let mut worst = 0.0f64;
    for i in 0..20 {
        let (p, q) = (random_valid(s, &mut rng), random_valid(s, &mut rng));
        let coeffs = |rng: &mut ChaCha8Rng| (0..16).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (f, g) = (
            BellFunctional::new(s, coeffs(&mut rng))?,
            BellFunctional::new(s, coeffs(&mut rng))?,
        );
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let mix = Correlation::from_fn(s, |x, y, u, v| a * p.get(x, y, u, v) + b * q.get(x, y, u, v));
        let fmix = BellFunctional::new(
            s,
            (0..16).map(|j| a * f.coefficients[j] + b * g.coefficients[j]).collect(),
        )?;
        let r1 = (bell_value(&mix, &f)? - a * bell_value(&p, &f)? - b * bell_value(&q, &f)?).abs();
        let r2 = (bell_value(&p, &fmix)? - a * bell_value(&p, &f)? - b * bell_value(&p, &g)?).abs();
        worst = worst.max(r1).max(r2);
        t.check(r1 < 1e-12 && r2 < 1e-12, || {
            format!("sample {i}: residuals {r1:e}, {r2:e}")
        });
        let (max, _) = maximize_over_ns(&f)?;
        let member = random_nonsignalling(s, &mut rng);
        let val = bell_value(&member, &f)?;
        t.check(max >= val - 1e-9, || {
            format!("sample {i}: ns maximum {max} below {val}")
        });
    }
    Ok(json!({ "samples": 20, "linearity_below_1e-12": worst < 1e-12 }))
}

/// Two commuting 0/1 projections on a four-point diagonal model.
fn concrete_setup() -> Result<(crate::space::ConeHandle, ContractionTuple)> {
    let model = DiagonalModel::full(4);
    let cone = diagonal_cone(&model);
    let tuple = ContractionTuple::new(
        cone.as_ref(),
        vec![
            SpaceElement::real(&[1.0, 1.0, 0.0, 0.0]),
            SpaceElement::real(&[1.0, 0.0, 1.0, 0.0]),
        ],
    )?;
    Ok((cone, tuple))
}

/// Probes for the concrete-case comparison. Negative entries are kept at
/// least 0.05 away from zero: a finite schedule cannot see below its
/// smallest ε.
fn concrete_probes(seed: u64) -> Vec<SpaceElement> {
    let mut rng = rng(seed);
    (0..100)
        .map(|i| {
            let v: Vec<f64> = (0..4)
                .map(|_| {
                    if i % 2 == 0 {
                        rng.random_range(0.0..1.0)
                    } else {
                        let m = rng.random_range(0.05..1.0);
                        if rng.random_bool(0.5) {
                            m
                        } else {
                            -m
                        }
                    }
                })
                .collect();
            SpaceElement::real(&v)
        })
        .collect()
}

fn concrete_params() -> ScheduleParams {
    ScheduleParams {
        eps: vec![1e-1, 1e-2, 1e-3, 1e-4],
        t_max: 1e6,
        ..ScheduleParams::default()
    }
}

fn concrete_equivalence(t: &mut Tally, seed: u64) -> Result<Value> {
    let (cone, tuple) = concrete_setup()?;
    let params = concrete_params();
    let (mut members, mut disagreements) = (0, 0);
    for (i, v) in concrete_probes(seed).iter().enumerate() {
        let in_cone = v.re().iter().all(|&a| a >= 0.0);
        let x = MatrixElement::from_element(v).kron_right(&ones(4));
        let plain = compression_membership(cone.as_ref(), &tuple, &x, &params, false)?.is_member();
        let hat = compression_membership(cone.as_ref(), &tuple, &x, &params, true)?.is_member();
        members += in_cone as usize;
        let agree = in_cone == plain && plain == hat;
        disagreements += !agree as usize;
        t.check(agree, || {
            format!("probe {i} {:?}: cone {in_cone}, plain {plain}, hat {hat}", v.re())
        });
    }
    Ok(json!({ "probes": 100, "members": members, "disagreements": disagreements, "model_size": 4, "operators": 2 }))
}

fn hat_containment(t: &mut Tally, seed: u64) -> Result<Value> {
    let (cone, tuple) = concrete_setup()?;
    let params = concrete_params();
    let mut hat_members = 0;
    for (i, v) in concrete_probes(seed).iter().enumerate() {
        let x = MatrixElement::from_element(v).kron_right(&ones(4));
        if !compression_membership(cone.as_ref(), &tuple, &x, &params, true)?.is_member() {
            continue;
        }
        hat_members += 1;
        let plain = compression_membership(cone.as_ref(), &tuple, &x, &params, false)?.is_member();
        // the substitution ε_k = 2^{k-1} ε̂_k, t_k = 2^{k-1} t̂_k turns a hat witness into a plain one
        let mut substituted = true;
        for &eps in &params.eps {
            let eps_hat: Vec<f64> = (0..tuple.len()).map(|k| eps / (1u64 << k) as f64).collect();
            let r = compression_round(cone.as_ref(), &tuple, &x, &eps_hat, &params, true)?;
            let Certificate::Shift { t: t_hat, .. } = &r.certificate else {
                substituted = false;
                continue;
            };
            let (e2, t2) = hat_to_plain(&eps_hat, t_hat);
            substituted &= check_shift(cone.as_ref(), &tuple, &x, &e2, &t2, false)?.is_member();
        }
        t.check(plain && substituted, || {
            format!("probe {i}: plain {plain}, substituted witness {substituted}")
        });
    }
    if hat_members == 0 {
        t.check(false, || "no hat members among the probes".into());
    }
    Ok(json!({ "hat_members": hat_members }))
}

fn projection_detection(t: &mut Tally, seed: u64) -> Result<Value> {
    let params = ScheduleParams::default();
    let c2 = diagonal_cone(&DiagonalModel::full(2));
    let c3 = diagonal_cone(&DiagonalModel::full(3));
    let cases: Vec<(&str, &crate::space::ConeHandle, Vec<Vec<f64>>, bool)> = vec![
        ("diag(1,0)", &c2, vec![vec![1.0, 0.0]], true),
        (
            "diag(1,0,0), diag(1,1,0)",
            &c3,
            vec![vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]],
            true,
        ),
        ("e/2", &c2, vec![vec![0.5, 0.5]], false),
        ("diag(0.9,0)", &c2, vec![vec![0.9, 0.0]], false),
    ];
    let mut out = Vec::new();
    for (name, cone, ps, projection) in cases {
        let tuple = ContractionTuple::new(cone.as_ref(), ps.iter().map(|p| SpaceElement::real(p)).collect())?;
        let probes = default_probes(&tuple, 50, seed);
        let report = projection_test(cone.as_ref(), &tuple, &probes, 2, &params)?;
        let ok = match (&report.verdict, projection) {
            (ProjectionVerdict::Pass { .. }, true) => true,
            (ProjectionVerdict::Fail { witness, .. }, false) => {
                // the witness must be outside the cone while its pullback is a member
                let x = MatrixElement::from_element(&SpaceElement::real(witness));
                membership(cone.as_ref(), &x)?.is_non_member()
                    && crate::compression::inductive_membership(cone.as_ref(), &tuple, &x, 2, &params)?.is_member()
            }
            _ => false,
        };
        t.check(ok, || format!("{name}: {:?}", report.verdict));
        out.push(json!({ "tuple": name, "verdict": report.verdict }));
    }
    Ok(Value::Array(out))
}

fn unitality(t: &mut Tally, _seed: u64) -> Result<Value> {
    let params = ScheduleParams::default();
    let model = DiagonalModel::full(2);
    let cone = diagonal_cone(&model);
    let p = [1.0, 0.0];
    let tuple = ContractionTuple::new(cone.as_ref(), vec![SpaceElement::real(&p)])?;
    let off = crate::linalg::from_real(2, 2, &[0.0, 1.0, 1.0, 1.0]);
    // [[0,p],[p,p]] = off ⊗ p coefficient-wise
    let block = MatrixElement::new(p.iter().map(|&v| &off * c(v)).collect())?;
    let mut out = Vec::new();
    for (name, x) in [("+block", block.clone()), ("-block", block.scale(-1.0))] {
        let v = compression_membership(cone.as_ref(), &tuple, &x, &params, true)?;
        t.check(v.is_member(), || format!("{name}: {:?}", v.status));
        let mut ratios = Vec::new();
        for (eps, found) in round_ts(&v) {
            let closed = 1.0 + 1.0 / eps;
            let ratio = found / closed;
            ratios.push(ratio);
            t.check((0.1..=10.0).contains(&ratio), || {
                format!("{name} at ε = {eps}: t = {found}, closed form {closed}")
            });
            // the closed form itself is a witness
            let direct = check_shift(cone.as_ref(), &tuple, &x, &[eps], &[closed], false)?.is_member();
            t.check(direct, || format!("{name} at ε = {eps}: closed-form t rejected"));
        }
        out.push(json!({ "element": name, "t_over_closed_form": ratios }));
    }
    // ±Q_i^N for one and two projections
    let two = ContractionTuple::new(
        cone.as_ref(),
        vec![SpaceElement::real(&[1.0, 0.0]), SpaceElement::real(&[0.0, 1.0])],
    )?;
    for tp in [&tuple, &two] {
        for i in 1..=tp.len() {
            let q = build_q(tp, i)?;
            for sign in [1.0, -1.0] {
                let v = compression_membership(cone.as_ref(), tp, &q.scale(sign), &params, false)?;
                t.check(v.is_member(), || {
                    format!(
                        "{}Q_{i}^{}: {:?}",
                        if sign > 0.0 { "+" } else { "-" },
                        tp.len(),
                        v.status
                    )
                });
            }
        }
    }
    Ok(Value::Array(out))
}

fn level_monotonicity(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let params = ScheduleParams::default();
    let cone = diagonal_cone(&DiagonalModel::full(2));
    let tuple = ContractionTuple::new(cone.as_ref(), vec![SpaceElement::real(&[0.7, 0.2])])?;
    let mut member_counts = [0usize; 4];
    for i in 0..20 {
        let v = random_real(&mut rng, 2);
        let x = MatrixElement::from_element(&v);
        let verdicts = (1..=4)
            .map(|l| level_membership(cone.as_ref(), &tuple, &x, l, &params).map(|v| v.is_member()))
            .collect::<Result<Vec<bool>>>()?;
        for (l, &m) in verdicts.iter().enumerate() {
            member_counts[l] += m as usize;
        }
        for l in 0..3 {
            t.check(!verdicts[l] || verdicts[l + 1], || {
                format!("probe {i}: member at L={} but not at L={}", l + 1, l + 2)
            });
        }
    }
    Ok(json!({ "probes": 20, "members_per_level": member_counts }))
}

fn compression_closure(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let params = ScheduleParams::default();
    let cone = diagonal_cone(&DiagonalModel::full(2));
    let tuple = ContractionTuple::new(cone.as_ref(), vec![SpaceElement::real(&[0.6, 0.3])])?;
    let mut members = Vec::new();
    let mut draws = 0;
    while members.len() < 6 && draws < 200 {
        draws += 1;
        let x = MatrixElement::from_element(&random_real(&mut rng, 2)).kron_right(&ones(2));
        if compression_membership(cone.as_ref(), &tuple, &x, &params, false)?.is_member() {
            members.push(x);
        }
    }
    t.check(members.len() == 6, || {
        format!("only {} members in {draws} draws", members.len())
    });
    for (i, pair) in members.chunks(2).enumerate() {
        let sum = pair[0].direct_sum(&pair[1]);
        let ok = compression_membership(cone.as_ref(), &tuple, &sum, &params, false)?.is_member();
        t.check(ok, || format!("pair {i}: direct sum rejected"));
        // conjugation by α ⊗ I_2 at ε, from membership at ε/‖α‖²
        let alpha = ComplexMatrix::from_fn(1, 2, |_, _| c(rng.random_range(-1.0..1.0)));
        let norm2 = alpha.norm_squared().max(1e-12);
        let conj = pair[0].congruence(&kron(&alpha, &identity(2)));
        for &eps in &params.eps {
            if compression_round(cone.as_ref(), &tuple, &pair[0], &[eps / norm2], &params, false)?.is_member() {
                let ok = compression_round(cone.as_ref(), &tuple, &conj, &[eps], &params, false)?.is_member();
                t.check(ok, || format!("pair {i}: conjugate rejected at ε = {eps}"));
            }
        }
    }
    Ok(json!({ "members": members.len(), "draws": draws }))
}

fn hat_permutation(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let cone = diagonal_cone(&DiagonalModel::full(2));
    for trial in 0..10 {
        let ps: Vec<SpaceElement> = (0..2)
            .map(|_| SpaceElement::real(&[rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]))
            .collect();
        let tuple = ContractionTuple::new(cone.as_ref(), ps)?;
        let swapped = tuple.permuted(&[1, 0]);
        for i in 1..=2 {
            let op = build_p_hat(&tuple, i)?;
            let target = build_p_hat(&swapped, 3 - i)?;
            for cidx in 0..2 {
                let shuffled = canonical_shuffle(op.coeff(cidx), 2, 2)?;
                t.check(&shuffled == target.coeff(cidx), || {
                    format!("trial {trial}: operator {i}, coefficient {cidx}")
                });
            }
        }
    }
    Ok(json!({ "trials": 10 }))
}

fn sample_report(seed: u64) -> Result<String> {
    let mut rng = rng(seed);
    let s = Scenario::new(1, 2)?;
    let ns = build_ns_space(s)?;
    let params = ScheduleParams::default();
    let p = random_local(s, &mut rng);
    let report = classify(&p, &ns, 1, &params, 1e-9, seed)?;
    let cone = diagonal_cone(&DiagonalModel::full(2));
    let tuple = ContractionTuple::new(cone.as_ref(), vec![SpaceElement::real(&[0.5, 0.5])])?;
    let proj = projection_test(cone.as_ref(), &tuple, &default_probes(&tuple, 5, seed), 2, &params)?;
    Ok(serde_json::to_string(&(report, proj)).expect("serializes"))
}

fn reproducibility(t: &mut Tally, seed: u64) -> Result<Value> {
    let a = sample_report(seed)?;
    let b = sample_report(seed)?;
    t.check(a == b, || "two runs with the same seed differ".into());
    Ok(json!({ "bytes": a.len() }))
}

fn certificates_inline(t: &mut Tally, seed: u64) -> Result<Value> {
    let mut rng = rng(seed);
    let s = Scenario::new(2, 2)?;
    let ns = build_ns_space(s)?;
    let params = ScheduleParams::default();
    let mut inputs = vec![Correlation::pr_box(), Correlation::uniform(s)];
    inputs.push(random_valid(s, &mut rng));
    inputs.push(random_local(s, &mut rng));
    let mut non_members = 0;
    for (i, p) in inputs.iter().enumerate() {
        let report = classify(p, &ns, 1, &params, 1e-9, seed)?;
        let verdicts = report
            .ns_state
            .iter()
            .chain(&report.local)
            .chain(report.qc_outer.iter().map(|(_, v)| v));
        for v in verdicts.filter(|v| v.is_non_member()) {
            non_members += 1;
            t.check(!matches!(v.certificate, Certificate::None), || {
                format!("input {i}: NonMember without certificate")
            });
        }
    }
    if non_members == 0 {
        t.check(false, || "no NonMember verdicts produced".into());
    }
    Ok(json!({ "inputs": inputs.len(), "non_members": non_members }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_unique_and_suites_partition() {
        let mut ids = check_ids();
        let n = ids.len();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), n);
        let acceptance = CHECKS.iter().filter(|s| selected(s, Suite::Acceptance)).count();
        assert_eq!(acceptance, 9);
        for suite in [
            "linalg",
            "conic",
            "space",
            "compression",
            "nonsignalling",
            "correlations",
        ] {
            let s: Suite = suite.parse().unwrap();
            assert!(CHECKS.iter().any(|c| selected(c, s)));
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn small_suites_pass_and_reproduce() {
        for suite in [Suite::Linalg, Suite::Space] {
            let a = run_suite(suite, 7);
            assert!(a.all_passed(), "{}", a.table());
            assert_eq!(a.payload(), run_suite(suite, 7).payload());
        }
    }

    #[test]
    fn failing_check_is_reported() {
        let mut t = Tally::default();
        t.check(true, || unreachable!());
        t.check(false, || "bad".into());
        assert_eq!((t.passed, t.total), (1, 2));
        assert_eq!(t.failures, vec!["bad".to_string()]);
    }
}
