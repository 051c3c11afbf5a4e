//! Verblunsky coefficient sequences and their boundary conventions.
//!
//! Three problem settings share one value type:
//!
//! - `Finite(k)`: `α_0..α_{k-2}` inside the disk, `α_{k-1} = -1` exactly,
//!   and `α_{-1} = -1` when queried.
//! - `Periodic(p)`: all moduli inside the disk; odd raw periods are doubled
//!   at construction so the effective period is always even.
//! - `InfiniteTruncated(N)`: stored prefix inside the disk, zero tail,
//!   `α_{-1} = 0` when queried.

use crate::C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Moduli this close to the unit circle degenerate the Poisson bracket
/// (`1/ρ_j` factors blow up); validation reports them as warnings.
pub const RHO_WARN_MARGIN: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum CoeffsError {
    #[error("|alpha_{index}| = {modulus} is not inside the unit disk")]
    ModulusOutOfRange { index: usize, modulus: f64 },
    #[error("finite boundary coefficient must be exactly -1, got {got}")]
    BadBoundaryPhase { got: C64 },
    #[error("odd period {period} must be canonicalized to {} before use", 2 * period)]
    OddPeriodNotCanonicalized { period: usize },
    #[error("index {index} is outside the domain of a {case:?} sequence")]
    IndexOutOfDomain { index: i64, case: SequenceCase },
    #[error("sequence must contain at least {min} coefficients, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("coefficient file: {0}")]
    BadFile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceCase {
    Finite,
    Periodic,
    #[serde(rename = "infinite")]
    InfiniteTruncated,
}

/// A warning produced by [`VerblunskySequence::validate`]; not an error.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationWarning {
    pub index: usize,
    pub message: String,
}

/// A Verblunsky coefficient sequence with its case tag.
///
/// Immutable after construction; cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub struct VerblunskySequence {
    case: SequenceCase,
    alphas: Vec<C64>,
    /// Period as supplied, before odd-period doubling (`Periodic` only).
    raw_period: usize,
}

impl VerblunskySequence {
    /// Periodic sequence; odd periods are doubled so downstream code can
    /// assume an even effective period.
    pub fn periodic(alphas: Vec<C64>) -> Result<Self, CoeffsError> {
        if alphas.is_empty() {
            return Err(CoeffsError::TooShort { min: 1, got: 0 });
        }
        for (j, a) in alphas.iter().enumerate() {
            check_in_disk(j, *a)?;
        }
        let raw_period = alphas.len();
        let alphas = if raw_period % 2 == 1 {
            let mut doubled = alphas.clone();
            doubled.extend_from_slice(&alphas);
            doubled
        } else {
            alphas
        };
        Ok(Self {
            case: SequenceCase::Periodic,
            alphas,
            raw_period,
        })
    }

    /// Finite sequence of length `k`; the last slot must be exactly `-1`.
    pub fn finite(alphas: Vec<C64>) -> Result<Self, CoeffsError> {
        let k = alphas.len();
        if k < 2 {
            return Err(CoeffsError::TooShort { min: 2, got: k });
        }
        for (j, a) in alphas.iter().take(k - 1).enumerate() {
            check_in_disk(j, *a)?;
        }
        let last = alphas[k - 1];
        if last != C64::new(-1.0, 0.0) {
            return Err(CoeffsError::BadBoundaryPhase { got: last });
        }
        Ok(Self {
            case: SequenceCase::Finite,
            alphas,
            raw_period: 0,
        })
    }

    /// Truncated half-line sequence: `alphas` holds `α_0..α_{N-1}`, the tail
    /// is exactly zero.
    pub fn infinite(alphas: Vec<C64>) -> Result<Self, CoeffsError> {
        for (j, a) in alphas.iter().enumerate() {
            check_in_disk(j, *a)?;
        }
        Ok(Self {
            case: SequenceCase::InfiniteTruncated,
            alphas,
            raw_period: 0,
        })
    }

    /// Periodize a finite sequence (period `k`, boundary slot included).
    ///
    /// The result intentionally carries a unimodular coefficient, so it is
    /// only fit for matrix assembly (the direct-sum decomposition of the
    /// extended CMV matrix), not for brackets. Requires even `k`.
    pub fn periodized_finite(finite: &VerblunskySequence) -> Result<Self, CoeffsError> {
        assert_eq!(finite.case, SequenceCase::Finite);
        let k = finite.alphas.len();
        if k % 2 != 0 {
            return Err(CoeffsError::OddPeriodNotCanonicalized { period: k });
        }
        Ok(Self {
            case: SequenceCase::Periodic,
            alphas: finite.alphas.clone(),
            raw_period: k,
        })
    }

    /// Raw construction for tests and file loading; performs no checks.
    pub(crate) fn from_parts_unchecked(
        case: SequenceCase,
        alphas: Vec<C64>,
        raw_period: usize,
    ) -> Self {
        Self {
            case,
            alphas,
            raw_period,
        }
    }

    pub fn case(&self) -> SequenceCase {
        self.case
    }

    pub fn alphas(&self) -> &[C64] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Even effective period (`Periodic` only).
    pub fn effective_period(&self) -> usize {
        assert_eq!(self.case, SequenceCase::Periodic, "not a periodic sequence");
        self.alphas.len()
    }

    /// Period as supplied before canonicalization.
    pub fn raw_period(&self) -> usize {
        assert_eq!(self.case, SequenceCase::Periodic, "not a periodic sequence");
        self.raw_period
    }

    /// Number of coefficient slots the Poisson bracket sums over: `p` in the
    /// periodic case, `k-1` in the finite case (the boundary slot is frozen),
    /// and the stored length in the truncated case.
    pub fn active_slots(&self) -> usize {
        match self.case {
            SequenceCase::Periodic => self.alphas.len(),
            SequenceCase::Finite => self.alphas.len() - 1,
            SequenceCase::InfiniteTruncated => self.alphas.len(),
        }
    }

    /// Checks every type invariant, reporting the first violation; returns
    /// near-boundary warnings on success.
    pub fn validate(&self) -> Result<Vec<ValidationWarning>, CoeffsError> {
        match self.case {
            SequenceCase::Periodic => {
                if self.alphas.len() % 2 == 1 {
                    return Err(CoeffsError::OddPeriodNotCanonicalized {
                        period: self.alphas.len(),
                    });
                }
                for (j, a) in self.alphas.iter().enumerate() {
                    check_in_disk(j, *a)?;
                }
            }
            SequenceCase::Finite => {
                let k = self.alphas.len();
                if k < 2 {
                    return Err(CoeffsError::TooShort { min: 2, got: k });
                }
                for (j, a) in self.alphas.iter().take(k - 1).enumerate() {
                    check_in_disk(j, *a)?;
                }
                if self.alphas[k - 1] != C64::new(-1.0, 0.0) {
                    return Err(CoeffsError::BadBoundaryPhase {
                        got: self.alphas[k - 1],
                    });
                }
            }
            SequenceCase::InfiniteTruncated => {
                for (j, a) in self.alphas.iter().enumerate() {
                    check_in_disk(j, *a)?;
                }
            }
        }
        let mut warnings = Vec::new();
        let interior = match self.case {
            SequenceCase::Finite => self.alphas.len() - 1,
            _ => self.alphas.len(),
        };
        for (j, a) in self.alphas.iter().take(interior).enumerate() {
            if 1.0 - a.norm() < RHO_WARN_MARGIN {
                warnings.push(ValidationWarning {
                    index: j,
                    message: format!(
                        "1 - |alpha_{j}| = {:.3e}: rho_{j} is nearly degenerate",
                        1.0 - a.norm()
                    ),
                });
            }
        }
        Ok(warnings)
    }

    /// Coefficient lookup with the case-appropriate boundary convention.
    ///
    /// Periodic sequences wrap modulo the effective period for any integer
    /// index; finite sequences return `-1` at `j = -1` and error outside
    /// `[-1, k)`; truncated sequences return `0` off the stored prefix.
    pub fn alpha_at(&self, j: i64) -> Result<C64, CoeffsError> {
        match self.case {
            SequenceCase::Periodic => {
                let p = self.alphas.len() as i64;
                Ok(self.alphas[j.rem_euclid(p) as usize])
            }
            SequenceCase::Finite => {
                let k = self.alphas.len() as i64;
                if j == -1 {
                    Ok(C64::new(-1.0, 0.0))
                } else if (0..k).contains(&j) {
                    Ok(self.alphas[j as usize])
                } else {
                    Err(CoeffsError::IndexOutOfDomain {
                        index: j,
                        case: self.case,
                    })
                }
            }
            SequenceCase::InfiniteTruncated => {
                if j < 0 || j as usize >= self.alphas.len() {
                    Ok(C64::new(0.0, 0.0))
                } else {
                    Ok(self.alphas[j as usize])
                }
            }
        }
    }

    /// `ρ_j = sqrt(1 - |α_j|²)`, with the same index conventions as
    /// [`alpha_at`](Self::alpha_at).
    pub fn rho_at(&self, j: i64) -> Result<f64, CoeffsError> {
        let a = self.alpha_at(j)?;
        Ok((1.0 - a.norm_sqr()).max(0.0).sqrt())
    }

    /// Replace slot `j` (panics out of range); used by perturbation code.
    pub fn with_alpha(&self, j: usize, value: C64) -> Self {
        let mut alphas = self.alphas.clone();
        alphas[j] = value;
        Self {
            case: self.case,
            alphas,
            raw_period: self.raw_period,
        }
    }

    /// Extend a truncated sequence with explicit zeros up to `len` slots, so
    /// gradients past the truncation point can be probed.
    pub fn zero_padded(&self, len: usize) -> Self {
        assert_eq!(self.case, SequenceCase::InfiniteTruncated);
        let mut alphas = self.alphas.clone();
        alphas.resize(len.max(alphas.len()), C64::new(0.0, 0.0));
        Self {
            case: self.case,
            alphas,
            raw_period: 0,
        }
    }
}

fn check_in_disk(index: usize, a: C64) -> Result<(), CoeffsError> {
    let modulus = a.norm();
    if modulus >= 1.0 || !modulus.is_finite() {
        Err(CoeffsError::ModulusOutOfRange { index, modulus })
    } else {
        Ok(())
    }
}

/// Double an odd period; even periods pass through unchanged. Idempotent.
pub fn canonicalize_period(seq: &VerblunskySequence) -> VerblunskySequence {
    assert_eq!(seq.case, SequenceCase::Periodic);
    // `periodic` already canonicalizes, so rebuilding is enough.
    VerblunskySequence {
        case: SequenceCase::Periodic,
        alphas: seq.alphas.clone(),
        raw_period: seq.raw_period,
    }
}

/// On-disk JSON schema: `{"case": "periodic"|"finite"|"infinite",
/// "alphas": [[re, im], ...]}`. Period/length is inferred from the array.
#[derive(Debug, Serialize, Deserialize)]
struct CoeffFile {
    case: SequenceCase,
    alphas: Vec<[f64; 2]>,
}

/// Parse a coefficient file; canonicalization is applied on load.
pub fn from_json(text: &str) -> Result<VerblunskySequence, CoeffsError> {
    let file: CoeffFile =
        serde_json::from_str(text).map_err(|e| CoeffsError::BadFile(e.to_string()))?;
    let alphas: Vec<C64> = file
        .alphas
        .iter()
        .map(|[re, im]| C64::new(*re, *im))
        .collect();
    match file.case {
        SequenceCase::Periodic => VerblunskySequence::periodic(alphas),
        SequenceCase::Finite => VerblunskySequence::finite(alphas),
        SequenceCase::InfiniteTruncated => VerblunskySequence::infinite(alphas),
    }
}

/// Serialize back to the JSON schema (raw stored coefficients).
pub fn to_json(seq: &VerblunskySequence) -> String {
    let file = CoeffFile {
        case: seq.case,
        alphas: seq.alphas.iter().map(|a| [a.re, a.im]).collect(),
    };
    serde_json::to_string_pretty(&file).expect("schema is serializable")
}
