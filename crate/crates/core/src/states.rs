//! Bipartite density matrices: construction, validation, the portable text
//! record, and seeded random ensembles.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, herm_eigen, BipartiteShape, ComplexMatrix, C64};
use crate::prng::Prng;

/// Tolerance for the three density-matrix invariants.
pub const STATE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    shape: BipartiteShape,
}

/// Residuals of the density-matrix invariants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub hermiticity_defect: f64,
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
    pub hermiticity_violated: bool,
    pub trace_violated: bool,
    pub positivity_violated: bool,
}

impl Diagnostics {
    pub fn is_valid(&self) -> bool {
        !(self.hermiticity_violated || self.trace_violated || self.positivity_violated)
    }
}

impl std::fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "hermiticity defect {:.3e}{}, trace defect {:.3e}{}, min eigenvalue {:.3e}{}",
            self.hermiticity_defect,
            if self.hermiticity_violated { " (violated)" } else { "" },
            self.trace_defect,
            if self.trace_violated { " (violated)" } else { "" },
            self.min_eigenvalue,
            if self.positivity_violated { " (violated)" } else { "" },
        )
    }
}

/// Reports the hermiticity, trace and positivity residuals of a matrix.
pub fn validate(m: &ComplexMatrix) -> Diagnostics {
    if !m.is_square() {
        return Diagnostics {
            hermiticity_defect: f64::INFINITY,
            trace_defect: f64::INFINITY,
            min_eigenvalue: f64::NEG_INFINITY,
            hermiticity_violated: true,
            trace_violated: true,
            positivity_violated: true,
        };
    }
    let hermiticity_defect = m.hermiticity_defect();
    let tr = m.trace();
    let trace_defect = (tr - c64(1.0, 0.0)).norm();
    let min_eigenvalue = herm_eigen(&m.hermitian_part())
        .map(|e| e.min())
        .unwrap_or(f64::NEG_INFINITY);
    Diagnostics {
        hermiticity_defect,
        trace_defect,
        min_eigenvalue,
        hermiticity_violated: hermiticity_defect > STATE_TOL,
        trace_violated: trace_defect > STATE_TOL,
        positivity_violated: min_eigenvalue < -STATE_TOL,
    }
}

impl DensityMatrix {
    /// Validates all invariants; the error message carries the residuals.
    pub fn new(matrix: ComplexMatrix, shape: BipartiteShape) -> Result<Self> {
        shape.check(&matrix)?;
        let diag = validate(&matrix);
        if !diag.is_valid() {
            return Err(Error::InvalidState(diag.to_string()));
        }
        Ok(Self { matrix, shape })
    }

    pub fn maximally_mixed(shape: BipartiteShape) -> Self {
        let n = shape.total();
        Self {
            matrix: ComplexMatrix::identity(n).scale(1.0 / n as f64),
            shape,
        }
    }

    /// |ψ⟩⟨ψ| after normalizing ψ.
    pub fn from_pure(psi: &[C64], shape: BipartiteShape) -> Result<Self> {
        if psi.len() != shape.total() {
            return Err(Error::DimensionMismatch {
                expected: shape.total(),
                actual: psi.len(),
            });
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidParameter("zero or non-finite state vector".into()));
        }
        let v: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Self::new(ComplexMatrix::projector(&v), shape)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn shape(&self) -> BipartiteShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.total()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.hs_inner(&self.matrix).re
    }

    pub fn diagnostics(&self) -> Diagnostics {
        validate(&self.matrix)
    }

    pub(crate) fn require_two_qubit(&self) -> Result<()> {
        if self.shape.is_two_qubit() {
            Ok(())
        } else {
            Err(Error::NotTwoQubit(self.shape.dim_a, self.shape.dim_b))
        }
    }

    pub fn to_record(&self) -> StateRecord {
        StateRecord::from_matrix(&self.matrix, self.shape)
    }

    pub fn from_record(record: &StateRecord) -> Result<Self> {
        let [da, db] = record.dims;
        let shape = BipartiteShape::new(da, db)
            .map_err(|e| Error::MalformedRecord(e.to_string()))?;
        let n = shape.total();
        for (name, grid) in [("re", &record.re), ("im", &record.im)] {
            if grid.len() != n {
                return Err(Error::MalformedRecord(format!(
                    "dims {da}x{db} need {n} rows in \"{name}\", found {}",
                    grid.len()
                )));
            }
            if let Some((i, row)) = grid.iter().enumerate().find(|(_, r)| r.len() != n) {
                return Err(Error::MalformedRecord(format!(
                    "row {i} of \"{name}\" has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        let entries: Vec<C64> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| c64(record.re[i][j], record.im[i][j]))
            .collect();
        let matrix = ComplexMatrix::from_row_slice(n, n, &entries)
            .map_err(|e| Error::MalformedRecord(e.to_string()))?;
        Self::new(matrix, shape)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("state record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: StateRecord =
            serde_json::from_str(text).map_err(|e| Error::MalformedRecord(e.to_string()))?;
        Self::from_record(&record)
    }
}

/// Text record `{"dims": [dA, dB], "re": [[..]], "im": [[..]]}`, row-major grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateRecord {
    pub dims: [usize; 2],
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl StateRecord {
    /// Record of an arbitrary operator, without state validation.
    pub fn from_matrix(m: &ComplexMatrix, shape: BipartiteShape) -> Self {
        let (re, im) = m.to_grids();
        StateRecord {
            dims: [shape.dim_a, shape.dim_b],
            re,
            im,
        }
    }
}

/// Named state families with their parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum StateFamily {
    /// |Φ+⟩ = (|00⟩ + |11⟩)/√2.
    Bell,
    /// p|Φ+⟩⟨Φ+| + (1 − p)I/4.
    Werner { p: f64 },
    /// p|Φ_d⟩⟨Φ_d| + (1 − p)I/d² on d⊗d.
    Isotropic { p: f64, d: usize },
    /// |a⟩⊗|b⟩ with independent complex-Gaussian local vectors.
    ProductPure { dim_a: usize, dim_b: usize },
    /// Normalized complex-Gaussian vector.
    RandomPure { dim_a: usize, dim_b: usize },
    /// Hilbert–Schmidt ensemble G·G†/Tr(G·G†).
    RandomMixed { dim_a: usize, dim_b: usize },
    Explicit { state: StateRecord },
}

fn check_weight(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("mixing weight p = {p} outside [0, 1]")))
    }
}

fn gaussian_vector(rng: &mut impl Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| c64(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

fn max_entangled(d: usize) -> Vec<C64> {
    let amp = 1.0 / (d as f64).sqrt();
    (0..d * d)
        .map(|k| if k / d == k % d { c64(amp, 0.0) } else { C64::default() })
        .collect()
}

fn isotropic(p: f64, d: usize) -> Result<DensityMatrix> {
    check_weight(p)?;
    let shape = BipartiteShape::new(d, d)?;
    let n = d * d;
    let proj = ComplexMatrix::projector(&max_entangled(d));
    let noise = ComplexMatrix::identity(n).scale((1.0 - p) / n as f64);
    DensityMatrix::new(&proj.scale(p) + &noise, shape)
}

/// Builds a state of the given family; random families draw from `rng`.
pub fn make_state(spec: &StateFamily, rng: Prng) -> Result<DensityMatrix> {
    let mut g = rng.rng();
    match spec {
        StateFamily::Bell => {
            DensityMatrix::from_pure(&max_entangled(2), BipartiteShape::qubits())
        }
        StateFamily::Werner { p } => isotropic(*p, 2),
        StateFamily::Isotropic { p, d } => isotropic(*p, *d),
        StateFamily::ProductPure { dim_a, dim_b } => {
            let shape = BipartiteShape::new(*dim_a, *dim_b)?;
            let a = gaussian_vector(&mut g, *dim_a);
            let b = gaussian_vector(&mut g, *dim_b);
            let psi: Vec<C64> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
            DensityMatrix::from_pure(&psi, shape)
        }
        StateFamily::RandomPure { dim_a, dim_b } => {
            let shape = BipartiteShape::new(*dim_a, *dim_b)?;
            DensityMatrix::from_pure(&gaussian_vector(&mut g, shape.total()), shape)
        }
        StateFamily::RandomMixed { dim_a, dim_b } => {
            let shape = BipartiteShape::new(*dim_a, *dim_b)?;
            let n = shape.total();
            let entries = gaussian_vector(&mut g, n * n);
            let gm = ComplexMatrix::from_row_slice(n, n, &entries)?;
            let w = &gm * &gm.adjoint();
            let t = w.trace().re;
            DensityMatrix::new(w.scale(1.0 / t).hermitian_part(), shape)
        }
        StateFamily::Explicit { state } => DensityMatrix::from_record(state),
    }
}
