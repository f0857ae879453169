use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Schema declaration is inconsistent.
    InvalidSchema(String),
    /// CSV header does not line up with the schema.
    HeaderMismatch {
        expected: String,
        found: String,
    },
    UnknownCategory {
        column: String,
        label: String,
        row: usize,
    },
    NotNumeric {
        column: String,
        text: String,
        row: usize,
    },
    EmptyTable,
    RaggedRecord {
        row: usize,
        expected: usize,
        found: usize,
    },
    /// A numeric column has no observed entry to fit scaling statistics on.
    NoObservedValues {
        column: String,
    },
    MissingScaling,
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    NonFiniteInput,
    NonFiniteGradient {
        param: String,
    },
    InvalidArgument(String),
    CalibrationFailed {
        target: f64,
    },
    NoMaskableColumns,
    EmptyCellSet,
    InvalidLabel {
        row: usize,
        col: usize,
        value: f64,
    },
    /// Training or validation split ended up with no cells.
    DegenerateSplit,
    Diverged {
        epoch: usize,
    },
    NoObservedCells,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidSchema(msg) => write!(f, "invalid schema: {msg}"),
            Error::HeaderMismatch { expected, found } => {
                write!(f, "header mismatch: expected column `{expected}`, found `{found}`")
            }
            Error::UnknownCategory { column, label, row } => {
                write!(f, "unknown category `{label}` in column `{column}` (row {row})")
            }
            Error::NotNumeric { column, text, row } => {
                write!(f, "non-numeric value `{text}` in column `{column}` (row {row})")
            }
            Error::EmptyTable => write!(f, "table has no rows"),
            Error::RaggedRecord { row, expected, found } => {
                write!(f, "row {row} has {found} fields, expected {expected}")
            }
            Error::NoObservedValues { column } => {
                write!(f, "numeric column `{column}` has no observed values")
            }
            Error::MissingScaling => write!(f, "table has no scaling metadata"),
            Error::ShapeMismatch { what, expected, found } => {
                write!(f, "{what}: expected {expected}, found {found}")
            }
            Error::IndexOutOfRange { what, index, len } => {
                write!(f, "{what} index {index} out of range (len {len})")
            }
            Error::NonFiniteInput => write!(f, "non-finite network input"),
            Error::NonFiniteGradient { param } => write!(f, "non-finite gradient in `{param}`"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::CalibrationFailed { target } => {
                write!(f, "could not calibrate intercept to target rate {target}")
            }
            Error::NoMaskableColumns => write!(f, "no maskable columns left after subset selection"),
            Error::EmptyCellSet => write!(f, "loss requested over an empty cell set"),
            Error::InvalidLabel { row, col, value } => {
                write!(f, "binary cell ({row}, {col}) has label {value}, expected 0 or 1")
            }
            Error::DegenerateSplit => write!(f, "train/validation split left one side empty"),
            Error::Diverged { epoch } => write!(f, "loss became non-finite at epoch {epoch}"),
            Error::NoObservedCells => write!(f, "no observed cells"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
