//! Lax-pair residual verification.
//!
//! For each identity the module assembles both sides numerically and reports
//! the max-abs entrywise residual:
//!
//! - periodic: `{Q_(d), K_n} = [Q_(d), i Q_(d),+^n]` and its conjugate,
//!   real, and imaginary companions, plus `{Q_(d), K_0} = [Q_(d), P]`.
//!   Here `Q_(d),+^n` is the restriction of `(E^n)_+` to the periodic
//!   subspace — not the plus-projection of `Q_(d)^n`.
//! - finite: `{C_f, K_n^f} = [C_f, i (C_f^n)_+]` and its conjugate.
//! - truncated: the same identities for the half-line matrix, compared on a
//!   guarded interior index square untouched by the window cut.
//!
//! The bracket side uses analytic gradients by default with a pure
//! finite-difference fallback; both are exposed because the closed-form
//! gradient expressions are exactly where transcription errors hide.

use crate::cmv::{self, extended_power, plus_projection, CmvError, CmvOracle};
use crate::coeffs::{SequenceCase, VerblunskySequence};
use crate::hamiltonians::{self, HamiltonianSpec, HamiltoniansError};
use crate::matrix::ComplexMatrix;
use crate::poisson::{
    bracket_from_gradients, bracket_matrix, fd_gradient, FdMatrixObservable, FiniteCmvObservable,
    FloquetObservable, HalfLineWindowObservable, PoissonError, WirtingerGradient,
};
use crate::{C64, FD_STEP};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LaxError {
    #[error("variant {variant} needs a {expected:?} sequence")]
    WrongCase {
        variant: String,
        expected: SequenceCase,
    },
    #[error("window {window} leaves no guarded interior for n = {n}")]
    TruncationTooTight { window: usize, n: usize },
    #[error("matrix is not stair-shaped: {reason}")]
    NotStairShaped { reason: String },
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error(transparent)]
    Cmv(#[from] CmvError),
    #[error(transparent)]
    Hamiltonians(#[from] HamiltoniansError),
}

/// One verified identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaxVariant {
    PeriodicK(usize),
    PeriodicKbar(usize),
    PeriodicReK(usize),
    PeriodicImK(usize),
    PeriodicK0,
    FiniteK(usize),
    FiniteKbar(usize),
    InfiniteK(usize),
    InfiniteKbar(usize),
}

impl LaxVariant {
    pub fn label(&self) -> String {
        match self {
            Self::PeriodicK(n) => format!("PeriodicK:{n}"),
            Self::PeriodicKbar(n) => format!("PeriodicKbar:{n}"),
            Self::PeriodicReK(n) => format!("PeriodicReK:{n}"),
            Self::PeriodicImK(n) => format!("PeriodicImK:{n}"),
            Self::PeriodicK0 => "PeriodicK0".into(),
            Self::FiniteK(n) => format!("FiniteK:{n}"),
            Self::FiniteKbar(n) => format!("FiniteKbar:{n}"),
            Self::InfiniteK(n) => format!("InfiniteK:{n}"),
            Self::InfiniteKbar(n) => format!("InfiniteKbar:{n}"),
        }
    }

    /// Parse `Name` or `Name:n` labels as produced by [`label`](Self::label).
    pub fn parse(text: &str) -> Option<Self> {
        if text == "PeriodicK0" {
            return Some(Self::PeriodicK0);
        }
        let (name, n) = text.split_once(':')?;
        let n: usize = n.parse().ok()?;
        if n == 0 {
            return None;
        }
        match name {
            "PeriodicK" => Some(Self::PeriodicK(n)),
            "PeriodicKbar" => Some(Self::PeriodicKbar(n)),
            "PeriodicReK" => Some(Self::PeriodicReK(n)),
            "PeriodicImK" => Some(Self::PeriodicImK(n)),
            "FiniteK" => Some(Self::FiniteK(n)),
            "FiniteKbar" => Some(Self::FiniteKbar(n)),
            "InfiniteK" => Some(Self::InfiniteK(n)),
            "InfiniteKbar" => Some(Self::InfiniteKbar(n)),
            _ => None,
        }
    }

    pub fn expected_case(&self) -> SequenceCase {
        match self {
            Self::PeriodicK(_)
            | Self::PeriodicKbar(_)
            | Self::PeriodicReK(_)
            | Self::PeriodicImK(_)
            | Self::PeriodicK0 => SequenceCase::Periodic,
            Self::FiniteK(_) | Self::FiniteKbar(_) => SequenceCase::Finite,
            Self::InfiniteK(_) | Self::InfiniteKbar(_) => SequenceCase::InfiniteTruncated,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Self::PeriodicK(n)
            | Self::PeriodicKbar(n)
            | Self::PeriodicReK(n)
            | Self::PeriodicImK(n)
            | Self::FiniteK(n)
            | Self::FiniteKbar(n)
            | Self::InfiniteK(n)
            | Self::InfiniteKbar(n) => *n,
            Self::PeriodicK0 => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMethod {
    Analytic,
    Fd,
}

impl GradientMethod {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Analytic => "analytic",
            Self::Fd => "fd",
        }
    }

    /// Default pass threshold for this gradient route.
    pub fn default_threshold(&self) -> f64 {
        match self {
            Self::Analytic => crate::ANALYTIC_TOL,
            Self::Fd => crate::FD_TOL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub variant: LaxVariant,
    pub matrix_dim: usize,
    pub max_abs_residual: f64,
    pub worst_entry: (usize, usize),
    pub method: GradientMethod,
    /// True when `dp < 5`, where wraparound makes matrix entries sums of
    /// two entries of `E`; the identity still holds, but such runs are
    /// flagged for separate inspection in reports.
    pub wraparound_sums: bool,
}

/// Gradient of the generator appearing on the bracket side of a variant.
fn generator_gradient(
    variant: LaxVariant,
    seq: &VerblunskySequence,
    method: GradientMethod,
) -> Result<WirtingerGradient, LaxError> {
    let n = variant.order();
    let spec = match variant {
        LaxVariant::PeriodicK(_) | LaxVariant::FiniteK(_) | LaxVariant::InfiniteK(_) => {
            HamiltonianSpec::K(n)
        }
        LaxVariant::PeriodicKbar(_) | LaxVariant::FiniteKbar(_) | LaxVariant::InfiniteKbar(_) => {
            HamiltonianSpec::Kbar(n)
        }
        // The identities are stated for 2 Re K_n and 2 Im K_n.
        LaxVariant::PeriodicReK(_) => HamiltonianSpec::ReK(n),
        LaxVariant::PeriodicImK(_) => HamiltonianSpec::ImK(n),
        LaxVariant::PeriodicK0 => HamiltonianSpec::K0,
    };
    let scale = match variant {
        LaxVariant::PeriodicReK(_) | LaxVariant::PeriodicImK(_) => C64::new(2.0, 0.0),
        _ => C64::new(1.0, 0.0),
    };
    let slots = match variant.expected_case() {
        SequenceCase::InfiniteTruncated => seq.len() + 2 * n + 2,
        _ => seq.active_slots(),
    };
    let grad = match method {
        GradientMethod::Analytic => match variant.expected_case() {
            SequenceCase::InfiniteTruncated => {
                let base = crate::poisson::grad_k_infinite(n, seq, slots)?;
                match variant {
                    LaxVariant::InfiniteKbar(_) => base.conj_swap(),
                    _ => base,
                }
            }
            _ => spec.gradient(seq)?,
        },
        GradientMethod::Fd => fd_gradient(|s| spec.eval(s), seq, FD_STEP, slots)?,
    };
    Ok(grad.scale(scale))
}

/// The commutator partner on the right-hand side of a periodic variant:
/// `i Q_(d),+^n`, its adjoint and real/imaginary combinations, or the
/// diagonal matrix `P` for the `K_0` flow.
fn periodic_lax_generator(
    variant: LaxVariant,
    seq: &VerblunskySequence,
    d: usize,
) -> ComplexMatrix {
    let i = C64::new(0.0, 1.0);
    match variant {
        LaxVariant::PeriodicK0 => cmv::build_p_matrix(seq, d * seq.effective_period()),
        _ => {
            let qplus = cmv::floquet_power_plus(seq, d, variant.order());
            match variant {
                LaxVariant::PeriodicK(_) => qplus.scale(i),
                LaxVariant::PeriodicKbar(_) => qplus.adjoint().scale(i),
                LaxVariant::PeriodicReK(_) => qplus.scale(i).add(&qplus.adjoint().scale(i)),
                LaxVariant::PeriodicImK(_) => qplus.sub(&qplus.adjoint()),
                _ => unreachable!("periodic variants only"),
            }
        }
    }
}

/// Assemble both sides of the identity selected by `variant` and report the
/// max-abs entrywise residual. `d` selects the Floquet restriction for
/// periodic variants and is ignored otherwise.
pub fn lax_residual(
    variant: LaxVariant,
    seq: &VerblunskySequence,
    d: usize,
    method: GradientMethod,
) -> Result<ResidualReport, LaxError> {
    if seq.case() != variant.expected_case() {
        return Err(LaxError::WrongCase {
            variant: variant.label(),
            expected: variant.expected_case(),
        });
    }
    let grad = generator_gradient(variant, seq, method)?;
    let i = C64::new(0.0, 1.0);

    let (lhs, rhs, wraparound) = match variant.expected_case() {
        SequenceCase::Periodic => {
            let p = seq.effective_period();
            let dp = d * p;
            let q = cmv::build_floquet(seq, d)?.q;
            let lhs = match method {
                GradientMethod::Analytic => bracket_matrix(&FloquetObservable { d }, &grad, seq)?,
                GradientMethod::Fd => {
                    let obs = FdMatrixObservable {
                        builder: |s: &VerblunskySequence| Ok(cmv::build_floquet(s, d)?.q),
                        step: FD_STEP,
                    };
                    bracket_matrix(&obs, &grad, seq)?
                }
            };
            let gen = periodic_lax_generator(variant, seq, d);
            (lhs, q.commutator(&gen), dp < 5)
        }
        SequenceCase::Finite => {
            let c = cmv::build_finite_cmv(seq)?.c;
            let lhs = match method {
                GradientMethod::Analytic => bracket_matrix(&FiniteCmvObservable, &grad, seq)?,
                GradientMethod::Fd => {
                    let obs = FdMatrixObservable {
                        builder: |s: &VerblunskySequence| Ok(cmv::build_finite_cmv(s)?.c),
                        step: FD_STEP,
                    };
                    bracket_matrix(&obs, &grad, seq)?
                }
            };
            let n = variant.order();
            let plus = plus_projection(&c.pow(n))?;
            let gen = match variant {
                LaxVariant::FiniteK(_) => plus.scale(i),
                LaxVariant::FiniteKbar(_) => plus.adjoint().scale(i),
                _ => unreachable!(),
            };
            (lhs, c.commutator(&gen), false)
        }
        SequenceCase::InfiniteTruncated => {
            let n = variant.order();
            let window = seq.len() + 8 * n + 8;
            if window < 8 * n + 4 {
                return Err(LaxError::TruncationTooTight { window, n });
            }
            let c = cmv::halfline_window(seq, window)?;
            let lhs = match method {
                GradientMethod::Analytic => {
                    bracket_matrix(&HalfLineWindowObservable { size: window }, &grad, seq)?
                }
                GradientMethod::Fd => {
                    let obs = FdMatrixObservable {
                        builder: move |s: &VerblunskySequence| Ok(cmv::halfline_window(s, window)?),
                        step: FD_STEP,
                    };
                    bracket_matrix(&obs, &grad, seq)?
                }
            };
            // Exact entries of C^n over the window, then the plain
            // plus-projection (no wraparound on the half line).
            let oracle = CmvOracle::for_sequence(seq)?;
            let cn = extended_power(&oracle, n, 0, window as i64).exposed();
            let plus = plus_projection(&cn)?;
            let gen = match variant {
                LaxVariant::InfiniteK(_) => plus.scale(i),
                LaxVariant::InfiniteKbar(_) => plus.adjoint().scale(i),
                _ => unreachable!(),
            };
            let rhs = c.commutator(&gen);
            // Compare only on the guarded interior square [4n, window-4n).
            let guard = 4 * n;
            let diff = lhs.sub(&rhs);
            let mut worst = (0.0f64, (0usize, 0usize));
            for r in guard..window - guard {
                for s in guard..window - guard {
                    let a = diff[(r, s)].norm();
                    if a > worst.0 {
                        worst = (a, (r, s));
                    }
                }
            }
            return Ok(ResidualReport {
                variant,
                matrix_dim: window,
                max_abs_residual: worst.0,
                worst_entry: worst.1,
                method,
                wraparound_sums: false,
            });
        }
    };

    let diff = lhs.sub(&rhs);
    let (max_abs_residual, worst_entry) = diff.max_abs_entry();
    Ok(ResidualReport {
        variant,
        matrix_dim: diff.rows(),
        max_abs_residual,
        worst_entry,
        method,
        wraparound_sums: wraparound,
    })
}

// ---------------------------------------------------------------------------
// Stair-shape structural lemma
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct StairCheck {
    /// `max |[A,B_+]_{ij} - [A,B]_{ij}|` over tested entries.
    pub plus_defect: f64,
    /// `max |[A,B_-]_{ij}|` over tested entries.
    pub minus_defect: f64,
    pub tested_entries: usize,
}

/// Verify `[A, B_+]_{ij} = [A, B]_{ij}` and `[A, B_-]_{ij} = 0` on all
/// index pairs outside the stair shape of `A` (`j > j(i)`).
///
/// `shape`, when given, is the stair function `i -> j(i)` with `-1` for an
/// empty row; it must be non-decreasing and must dominate the support of
/// `A`. When omitted, the minimal non-decreasing shape of `A` is used.
pub fn stair_commutator_check(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    shape: Option<&[i64]>,
) -> Result<StairCheck, LaxError> {
    let n = a.ensure_square().map_err(CmvError::from)?;
    assert_eq!(b.rows(), n);
    assert_eq!(b.cols(), n);

    let shape: Vec<i64> = match shape {
        Some(s) => {
            if s.len() != n {
                return Err(LaxError::NotStairShaped {
                    reason: format!("shape has {} rows, matrix has {n}", s.len()),
                });
            }
            for w in s.windows(2) {
                if w[1] < w[0] {
                    return Err(LaxError::NotStairShaped {
                        reason: "shape function must be non-decreasing".into(),
                    });
                }
            }
            for (i, &ji) in s.iter().enumerate() {
                for j in 0..n {
                    if (j as i64) > ji && a[(i, j)].norm() > 0.0 {
                        return Err(LaxError::NotStairShaped {
                            reason: format!("A[{i}][{j}] is nonzero past j(i) = {ji}"),
                        });
                    }
                }
            }
            s.to_vec()
        }
        None => {
            let mut s = Vec::with_capacity(n);
            let mut running = -1i64;
            for i in 0..n {
                let row_max = (0..n)
                    .rev()
                    .find(|&j| a[(i, j)].norm() > 0.0)
                    .map(|j| j as i64)
                    .unwrap_or(-1);
                running = running.max(row_max);
                s.push(running);
            }
            s
        }
    };

    let b_plus = plus_projection(b)?;
    let b_minus = b.sub(&b_plus);
    let full = a.commutator(b);
    let plus = a.commutator(&b_plus);
    let minus = a.commutator(&b_minus);

    let mut check = StairCheck {
        plus_defect: 0.0,
        minus_defect: 0.0,
        tested_entries: 0,
    };
    for i in 0..n {
        for j in 0..n {
            if (j as i64) > shape[i] {
                check.tested_entries += 1;
                check.plus_defect = check.plus_defect.max((plus[(i, j)] - full[(i, j)]).norm());
                check.minus_defect = check.minus_defect.max(minus[(i, j)].norm());
            }
        }
    }
    Ok(check)
}

// ---------------------------------------------------------------------------
// K_0^f obstruction and trace conservation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct K0Obstruction {
    /// `Tr {C_f, K_0^f}`, computed from entrywise brackets.
    pub bracket_trace: C64,
    /// `-i K_0^f (ᾱ_0 - α_{k-2})`; a nonzero value certifies that no Lax
    /// pair in `C_f` exists for `K_0^f` (the trace of a commutator is zero).
    pub closed_form: C64,
}

pub fn finite_k0_obstruction(seq: &VerblunskySequence) -> Result<K0Obstruction, LaxError> {
    assert_eq!(seq.case(), SequenceCase::Finite);
    let grad = HamiltonianSpec::K0.gradient(seq)?;
    let bracket = bracket_matrix(&FiniteCmvObservable, &grad, seq)?;
    let k = seq.len() as i64;
    let k0 = hamiltonians::k0(seq);
    let closed_form = C64::new(0.0, -1.0)
        * k0
        * (seq.alpha_at(0).expect("index 0").conj() - seq.alpha_at(k - 2).expect("index k-2"));
    Ok(K0Obstruction {
        bracket_trace: bracket.trace(),
        closed_form,
    })
}

#[derive(Debug, Clone)]
pub struct ConservationReport {
    pub variant: LaxVariant,
    /// `|Tr RHS|`: the trace of a commutator.
    pub rhs_trace: f64,
    /// `|{Tr Q^m, H}|` for `m = 1..=3`, assembled from scalar brackets.
    pub scalar_brackets: Vec<(usize, f64)>,
}

/// Trace-level consistency of a periodic Lax identity: the commutator side
/// has zero trace, and the conserved traces Poisson-commute with the
/// generator.
pub fn conservation_under_lax(
    variant: LaxVariant,
    seq: &VerblunskySequence,
    d: usize,
) -> Result<ConservationReport, LaxError> {
    assert_eq!(variant.expected_case(), SequenceCase::Periodic);
    let grad = generator_gradient(variant, seq, GradientMethod::Analytic)?;
    let p = seq.effective_period();

    let q = cmv::build_floquet(seq, d)?.q;
    let rhs = q.commutator(&periodic_lax_generator(variant, seq, d));

    let mut scalar_brackets = Vec::new();
    for m in 1..=3usize {
        // Gradient of Tr(Q_(d)^m) from the Θ-block derivative assembly.
        let qm = q.pow(m - 1);
        let mut trace_grad = WirtingerGradient::zeros(p);
        for slot in 0..p {
            for (wrt, out) in [
                (cmv::Wirtinger::Alpha, &mut trace_grad.d_alpha),
                (cmv::Wirtinger::AlphaBar, &mut trace_grad.d_alphabar),
            ] {
                let dq = cmv::floquet_derivative(seq, d, slot, wrt)?;
                out[slot] = dq.mul(&qm).trace() * m as f64;
            }
        }
        let value = bracket_from_gradients(&trace_grad, &grad, seq)?;
        scalar_brackets.push((m, value.norm()));
    }
    Ok(ConservationReport {
        variant,
        rhs_trace: rhs.trace().norm(),
        scalar_brackets,
    })
}
