use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {left} vs {right} qubits")]
    LengthMismatch { left: usize, right: usize },

    #[error("{0} qubits requested, at most {max} supported", max = crate::pauli::MAX_QUBITS)]
    TooManyQubits(usize),

    #[error("qubit {qubit} out of range for a {n}-qubit register")]
    QubitOutOfRange { qubit: usize, n: usize },

    #[error("expectation has imaginary part {0:e}; operator is not Hermitian")]
    NonHermitian(f64),

    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("missing expectation value for {0}")]
    MissingExpectation(String),

    #[error("expectation value {label} = {value} outside [-1, 1]")]
    ExpectationRange { label: String, value: f64 },

    #[error("matrix is not orthogonal (deviation {0:e})")]
    NonOrthogonal(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported gate: {0}")]
    UnsupportedGate(String),

    #[error("purification did not converge after {iterations} iterations (residual {residual:e})")]
    PurificationDiverged { iterations: usize, residual: f64 },

    #[error("two-particle density matrix has trace {0}, inconsistent with a two-electron sector")]
    NotTwoElectron(f64),

    #[error("chemical potential loop did not converge; residuals {residuals:?}")]
    ChemicalPotential { residuals: Vec<f64> },

    #[error("histogram for {0} has no shots")]
    ZeroShots(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checksum mismatch for {file}: expected {expected}, found {found}")]
    Checksum {
        file: String,
        expected: String,
        found: String,
    },

    #[error("reference data for R = {0} not found")]
    UnknownBondLength(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
