use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{OrderError, PartialOrderOutcome};

/// Entries further than this from their transpose are rejected as non-symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Minimum eigenvalue accepted as "positive semi-definite".
pub const PSD_TOLERANCE: f64 = -1e-9;

/// Real symmetric matrix, stored after averaging with its transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self, OrderError> {
        if m.nrows() != m.ncols() {
            return Err(OrderError::Structure(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols())));
        }
        let asym = (&m - m.transpose()).abs().max();
        if asym > SYMMETRY_TOLERANCE * (1.0 + m.abs().max()) {
            return Err(OrderError::Structure(format!("matrix is not symmetric (max asymmetry {asym:e})")));
        }
        Ok(Self::symmetrized(m))
    }

    /// Builds from any square matrix by averaging with its transpose.
    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, OrderError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(OrderError::Structure("ragged matrix rows".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(d)))
    }

    pub fn scaled(&self, k: f64) -> Self {
        SymMatrix(&self.0 * k)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return f64::INFINITY;
        }
        SymmetricEigen::new(self.0.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= PSD_TOLERANCE
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect()).collect()
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Loewner order: `a ⪯ b` iff `b - a` is positive semi-definite.
pub fn loewner_compare(a: &SymMatrix, b: &SymMatrix) -> Result<PartialOrderOutcome, OrderError> {
    if a.dim() != b.dim() {
        return Err(OrderError::Structure(format!(
            "Loewner comparison of {}x{} with {}x{}",
            a.dim(),
            a.dim(),
            b.dim(),
            b.dim()
        )));
    }
    let diff = SymMatrix::symmetrized(b.as_matrix() - a.as_matrix());
    if diff.dim() == 0 {
        return Ok(PartialOrderOutcome::Equal);
    }
    let eig = SymmetricEigen::new(diff.0).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // b - a ⪰ 0 means a ⪯ b; a - b ⪰ 0 means -hi >= tol.
    Ok(PartialOrderOutcome::from_flags(lo >= PSD_TOLERANCE, -hi >= PSD_TOLERANCE))
}

/// Fixed-length sequence of symmetric matrices of a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SymMatrix>", into = "Vec<SymMatrix>")]
pub struct MatrixSequence {
    items: Vec<SymMatrix>,
}

impl MatrixSequence {
    pub fn new(items: Vec<SymMatrix>) -> Result<Self, OrderError> {
        if let Some(first) = items.first() {
            if items.iter().any(|m| m.dim() != first.dim()) {
                return Err(OrderError::Structure("matrix sequence items differ in dimension".into()));
            }
        }
        Ok(MatrixSequence { items })
    }

    pub fn items(&self) -> &[SymMatrix] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

impl TryFrom<Vec<SymMatrix>> for MatrixSequence {
    type Error = OrderError;
    fn try_from(v: Vec<SymMatrix>) -> Result<Self, OrderError> {
        MatrixSequence::new(v)
    }
}

impl From<MatrixSequence> for Vec<SymMatrix> {
    fn from(s: MatrixSequence) -> Self {
        s.items
    }
}

/// Pointwise Loewner comparison of two sequences of equal length.
pub fn sequence_compare(p: &MatrixSequence, q: &MatrixSequence) -> Result<PartialOrderOutcome, OrderError> {
    if p.len() != q.len() {
        return Err(OrderError::Structure(format!("sequence lengths differ ({} vs {})", p.len(), q.len())));
    }
    let mut out = PartialOrderOutcome::Equal;
    for (a, b) in p.items.iter().zip(&q.items) {
        out = out.and(loewner_compare(a, b)?);
        if out == PartialOrderOutcome::Incomparable {
            break;
        }
    }
    Ok(out)
}
