//! Shared error type for estimation and simulation routines.

use thiserror::Error;

/// Which side of a pairwise comparison a problem refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Positive,
    Negative,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Positive => write!(f, "positive"),
            Side::Negative => write!(f, "negative"),
        }
    }
}

/// Which trial arm a problem refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Control,
    Treated,
    Pooled,
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Arm::Control => write!(f, "control"),
            Arm::Treated => write!(f, "treated"),
            Arm::Pooled => write!(f, "pooled"),
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty {0} side: AUROC needs at least one score on each side")]
    EmptySide(Side),

    #[error("{arm} arm has no {missing} outcomes")]
    SingleClassArm { arm: Arm, missing: &'static str },

    #[error("{0} arm is empty")]
    EmptyArm(Arm),

    #[error("degenerate weighting: total pairwise weight is zero")]
    DegenerateWeighting,

    #[error("degenerate baseline rate: mu0*(1-mu0) below epsilon^2")]
    DegenerateBaselineRate,

    #[error("degenerate tau normalizer: |mean| below 1e-9, re-draw weights")]
    DegenerateTauNormalizer,

    #[error("length mismatch: {left} vs {right} ({context})")]
    LengthMismatch {
        left: usize,
        right: usize,
        context: &'static str,
    },

    #[error("no comparable pairs: all true values identical")]
    NoComparablePairs,

    #[error("insufficient arm data for cross-fitting: fold {fold} complement has no {arm} samples")]
    InsufficientArmData { fold: usize, arm: Arm },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, EvalError>;

impl EvalError {
    /// True for errors that signal a degenerate estimation instance
    /// (as opposed to malformed input); the harness skips such replicates.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            EvalError::EmptySide(_)
                | EvalError::SingleClassArm { .. }
                | EvalError::EmptyArm(_)
                | EvalError::DegenerateWeighting
                | EvalError::DegenerateBaselineRate
                | EvalError::NoComparablePairs
                | EvalError::InsufficientArmData { .. }
        )
    }
}
