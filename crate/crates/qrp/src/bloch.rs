//! Qubit states as Bloch vectors and CPTP qubit channels as affine maps.
//!
//! A qubit density operator is fully described by a real 3-vector inside the
//! closed unit ball, and every qubit channel acts on that vector as
//! `v -> M v + c`. Trace distance is half the Euclidean distance between
//! Bloch vectors, so the whole simulation runs on real 3-vector algebra; a
//! small density-matrix Kraus evaluator survives only as a test oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for unit-ball containment checks.
pub const BALL_TOLERANCE: f64 = 1e-9;
/// Tolerance for exact algebraic identities.
pub const ALGEBRA_TOLERANCE: f64 = 1e-12;

/// Qubit state `rho = (1 + r . sigma) / 2` represented by `r = (x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        BlochVector { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Physical states live inside the closed unit ball.
    pub fn is_physical(&self) -> bool {
        self.norm() <= 1.0 + 1e-12
    }

    /// Unit vector in the same direction; errors on (near-)zero input.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(Error::InvalidParameter(
                "cannot normalize a zero direction".into(),
            ));
        }
        Ok(BlochVector::new(self.x / n, self.y / n, self.z / n))
    }

    pub fn neg(&self) -> Self {
        BlochVector::new(-self.x, -self.y, -self.z)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }
}

/// Half the Euclidean distance between the Bloch vectors; equals the trace
/// distance of the corresponding density operators.
pub fn trace_distance(a: BlochVector, b: BlochVector) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    0.5 * (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Qubit channel as an affine Bloch-ball map `v -> M v + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineChannel {
    /// 3x3 real matrix, row major.
    pub matrix: [[f64; 3]; 3],
    /// Translation vector.
    pub translation: [f64; 3],
    /// Channel identifier for reports.
    pub label: String,
}

impl AffineChannel {
    pub fn identity() -> Self {
        AffineChannel {
            matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
            label: "id".into(),
        }
    }

    /// Amplitude damping with decay probability `gamma`: shrinks the ball by
    /// `sqrt(1-gamma)` transversely and `1-gamma` along z, translating toward
    /// the north pole by `gamma`.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "amplitude damping rate must lie in [0, 1], got {gamma}"
            )));
        }
        let s = (1.0 - gamma).sqrt();
        Ok(AffineChannel {
            matrix: [[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, 1.0 - gamma]],
            translation: [0.0, 0.0, gamma],
            label: format!("ad({gamma})"),
        })
    }

    /// Pi rotation about the x axis; involutive.
    pub fn pauli_x() -> Self {
        AffineChannel {
            matrix: [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]],
            translation: [0.0; 3],
            label: "x".into(),
        }
    }

    /// Sequential application `outer after inner`:
    /// `apply(outer.compose(inner), v) == outer.apply(inner.apply(v))`.
    pub fn compose(&self, inner: &AffineChannel) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.matrix[i][k] * inner.matrix[k][j]).sum();
            }
        }
        let mut c = [0.0; 3];
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = (0..3)
                .map(|k| self.matrix[i][k] * inner.translation[k])
                .sum::<f64>()
                + self.translation[i];
        }
        AffineChannel {
            matrix: m,
            translation: c,
            label: format!("{}*{}", self.label, inner.label),
        }
    }

    pub fn apply(&self, v: BlochVector) -> BlochVector {
        let m = &self.matrix;
        let c = &self.translation;
        BlochVector::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z + c[0],
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z + c[1],
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z + c[2],
        )
    }

    /// Checks `|M n + c| <= 1 + BALL_TOLERANCE` over a deterministic sphere
    /// mesh. A necessary condition for the map to be a channel; built-ins
    /// satisfy it by construction, user-supplied maps get a warning when it
    /// fails.
    pub fn maps_ball_into_ball(&self) -> bool {
        for n in fibonacci_sphere(2048) {
            if self.apply(n).norm() > 1.0 + BALL_TOLERANCE {
                return false;
            }
        }
        true
    }
}

/// Deterministic quasi-uniform unit-sphere mesh (Fibonacci lattice).
pub(crate) fn fibonacci_sphere(count: usize) -> impl Iterator<Item = BlochVector> {
    let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
    (0..count).map(move |i| {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = 2.0 * std::f64::consts::PI * (i as f64 / golden).fract();
        BlochVector::new(r * phi.cos(), r * phi.sin(), z)
    })
}

/// Pair of initial states evolved with shared jump randomness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatePair {
    pub plus: BlochVector,
    pub minus: BlochVector,
}

impl StatePair {
    pub fn new(plus: BlochVector, minus: BlochVector) -> Result<Self> {
        if !plus.is_physical() || !minus.is_physical() {
            return Err(Error::InvalidParameter(
                "state pair must consist of physical Bloch vectors".into(),
            ));
        }
        Ok(StatePair { plus, minus })
    }

    /// Antipodal pure pair `{+n, -n}` along `direction`; the form that
    /// maximizes the non-Markovianity measure.
    pub fn antipodal(direction: BlochVector) -> Result<Self> {
        let n = direction.normalized()?;
        Ok(StatePair { plus: n, minus: n.neg() })
    }
}
