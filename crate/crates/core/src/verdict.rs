use serde::{Deserialize, Serialize};

use crate::linalg::{ComplexMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Member,
    NonMember,
    Unknown,
}

impl Status {
    pub fn is_decided(self) -> bool {
        self != Status::Unknown
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Member => "Member",
            Status::NonMember => "NonMember",
            Status::Unknown => "Unknown",
        };
        f.write_str(s)
    }
}

/// Row-major complex matrix in a serializable form, entries as `[re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixPayload {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<[f64; 2]>,
}

impl From<&ComplexMatrix> for MatrixPayload {
    fn from(m: &ComplexMatrix) -> Self {
        let mut entries = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                entries.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            entries,
        }
    }
}

impl MatrixPayload {
    pub fn to_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.entries[i * self.cols + j];
            C64::new(re, im)
        })
    }
}

/// One scheduled round of an epsilon-quantified test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub eps: f64,
    pub status: Status,
    /// Matrix-level `L` the round was decided at, when the test scans levels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    pub certificate: Box<Certificate>,
}

/// Evidence attached to a verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Certificate {
    None,
    /// The verdict follows from a structural fact stated in `reason`.
    Trivial {
        reason: String,
    },
    /// Primal LP solution.
    LpWitness {
        x: Vec<f64>,
        residual: f64,
    },
    /// Functional nonnegative on every cone generator and negative on the target.
    Separator {
        functional: Vec<f64>,
        target_value: f64,
        min_generator_value: f64,
    },
    /// PSD blocks solving an affine system.
    PsdWitness {
        blocks: Vec<MatrixPayload>,
        residual: f64,
        min_eigenvalue: f64,
    },
    /// Functional on the constraint space whose adjoint image is PSD blockwise
    /// and whose pairing with the right-hand side is negative.
    PsdSeparator {
        functional: Vec<f64>,
        target_value: f64,
        min_block_eigenvalue: f64,
    },
    /// Per-fiber minimum eigenvalues of a concrete positivity test.
    Fibers {
        min_eigenvalues: Vec<f64>,
    },
    /// A fiber in which the target has a negative direction.
    FiberSeparator {
        fiber: usize,
        vector: Vec<[f64; 2]>,
        value: f64,
    },
    /// Shift coefficients `t` making the shifted element positive.
    Shift {
        t: Vec<f64>,
        inner: Box<Certificate>,
    },
    /// Epsilon-schedule rounds.
    Schedule {
        rounds: Vec<Round>,
    },
    /// The ambient separating functional for a compression round: it is
    /// nonnegative on the ambient cone, vanishes on every `Q` direction and is
    /// negative on the base point, so no choice of `t` helps.
    ShiftObstruction {
        reason: String,
        inner: Box<Certificate>,
    },
    /// A state on the ground space certified nonnegative on every level cone.
    UniversalState {
        description: String,
        functional: Vec<f64>,
        value: f64,
    },
    /// Convex weights over listed vertices.
    ConvexWeights {
        vertices: Vec<usize>,
        weights: Vec<f64>,
    },
    /// Bell-type witness: `value` exceeds `bound` over the reference set.
    BellWitness {
        /// Which family the functional comes from, e.g. `chsh` or `lp-dual`.
        name: String,
        coefficients: Vec<f64>,
        bound: f64,
        value: f64,
    },
    /// A correlation is excluded by a violated linear relation.
    Relation {
        relation: String,
        residual: f64,
    },
    /// A state given by its values on a basis.
    State {
        labels: Vec<String>,
        values: Vec<f64>,
    },
    /// A probe of a level cone on which a functional is negative.
    Probe {
        level: usize,
        probe: Vec<f64>,
        value: f64,
    },
    /// Summary of a probe battery.
    ProbeBattery {
        level: usize,
        probes: usize,
        members: usize,
        min_value: f64,
    },
    /// An operation stopped at a resource limit.
    Budget {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub certificate: Certificate,
}

impl Verdict {
    pub fn new(status: Status, certificate: Certificate) -> Self {
        Self { status, certificate }
    }

    pub fn member(certificate: Certificate) -> Self {
        Self::new(Status::Member, certificate)
    }

    pub fn non_member(certificate: Certificate) -> Self {
        Self::new(Status::NonMember, certificate)
    }

    pub fn unknown(certificate: Certificate) -> Self {
        Self::new(Status::Unknown, certificate)
    }

    pub fn trivial(status: Status, reason: impl Into<String>) -> Self {
        Self::new(status, Certificate::Trivial { reason: reason.into() })
    }

    pub fn is_member(&self) -> bool {
        self.status == Status::Member
    }

    pub fn is_non_member(&self) -> bool {
        self.status == Status::NonMember
    }
}

pub(crate) fn complex_payload(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}
