//! The Poisson bracket engine.
//!
//! On coefficient space the bracket acts through Wirtinger derivatives:
//!
//! ```text
//! {f, g} = i Σ_j ρ_j² [ (∂f/∂ᾱ_j)(∂g/∂α_j) - (∂f/∂α_j)(∂g/∂ᾱ_j) ]
//! ```
//!
//! with `∂/∂α = (∂/∂u - i ∂/∂v)/2` and `∂/∂ᾱ = (∂/∂u + i ∂/∂v)/2` for
//! `α = u + iv`. The sum runs over the active coefficient slots of the
//! sequence (one period, or `k-1` slots in the finite case, or the stored
//! prefix plus zero tail in the truncated case).
//!
//! Gradients of the trace Hamiltonians `K_n` come in three independent
//! flavors that cross-validate each other:
//! - [`grad_k`]: the closed-form expressions in terms of entries of `E^n`;
//! - [`grad_k_via_trace`]: `∂K_{n+1}/∂β_j = (1/d) Tr(∂Q_(d)/∂β_j · Q_(d)^n)`
//!   with the derivative matrix assembled from Θ-block derivatives;
//! - [`fd_gradient`]: central differences in the real coordinates.

use crate::cmv::{self, extended_power, CmvError, CmvOracle, Wirtinger};
use crate::coeffs::{SequenceCase, VerblunskySequence};
use crate::matrix::ComplexMatrix;
use crate::{C64, FD_STEP};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PoissonError {
    #[error("observable provides no gradient")]
    GradientUnavailable,
    #[error("rho_{index} = {rho} is numerically degenerate; 1/rho factors are unstable")]
    RhoDegenerate { index: i64, rho: f64 },
    #[error("step {step} would push |alpha_{index}| out of the unit disk")]
    StepTooLarge { index: usize, step: f64 },
    #[error("gradient lengths differ: {lhs} vs {rhs}")]
    SlotMismatch { lhs: usize, rhs: usize },
    #[error(transparent)]
    Cmv(#[from] CmvError),
}

/// Paired sequences `∂f/∂α_j` and `∂f/∂ᾱ_j` over the active slots.
#[derive(Debug, Clone, PartialEq)]
pub struct WirtingerGradient {
    pub d_alpha: Vec<C64>,
    pub d_alphabar: Vec<C64>,
}

impl WirtingerGradient {
    pub fn zeros(slots: usize) -> Self {
        Self {
            d_alpha: vec![C64::new(0.0, 0.0); slots],
            d_alphabar: vec![C64::new(0.0, 0.0); slots],
        }
    }

    pub fn len(&self) -> usize {
        self.d_alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_alpha.is_empty()
    }

    /// Gradient of the complex conjugate observable:
    /// `∂f̄/∂β = conj(∂f/∂β̄)`.
    pub fn conj_swap(&self) -> Self {
        Self {
            d_alpha: self.d_alphabar.iter().map(|z| z.conj()).collect(),
            d_alphabar: self.d_alpha.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            d_alpha: self.d_alpha.iter().map(|z| s * z).collect(),
            d_alphabar: self.d_alphabar.iter().map(|z| s * z).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.len(), rhs.len());
        Self {
            d_alpha: self
                .d_alpha
                .iter()
                .zip(&rhs.d_alpha)
                .map(|(a, b)| a + b)
                .collect(),
            d_alphabar: self
                .d_alphabar
                .iter()
                .zip(&rhs.d_alphabar)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Max deviation from the real-observable pairing
    /// `d_alphabar[j] = conj(d_alpha[j])`.
    pub fn reality_defect(&self) -> f64 {
        self.d_alpha
            .iter()
            .zip(&self.d_alphabar)
            .map(|(a, b)| (a.conj() - b).norm())
            .fold(0.0, f64::max)
    }
}

/// A scalar observable of the coefficients with a tagged gradient strategy.
pub struct Observable<'a> {
    eval: Box<dyn Fn(&VerblunskySequence) -> C64 + 'a>,
    strategy: GradientStrategy<'a>,
}

pub enum GradientStrategy<'a> {
    Analytic(
        #[allow(clippy::type_complexity)]
        Box<dyn Fn(&VerblunskySequence) -> Result<WirtingerGradient, PoissonError> + 'a>,
    ),
    FiniteDifference {
        step: f64,
    },
}

impl<'a> Observable<'a> {
    pub fn analytic(
        eval: impl Fn(&VerblunskySequence) -> C64 + 'a,
        gradient: impl Fn(&VerblunskySequence) -> Result<WirtingerGradient, PoissonError> + 'a,
    ) -> Self {
        Self {
            eval: Box::new(eval),
            strategy: GradientStrategy::Analytic(Box::new(gradient)),
        }
    }

    pub fn finite_difference(eval: impl Fn(&VerblunskySequence) -> C64 + 'a) -> Self {
        Self::finite_difference_with_step(eval, FD_STEP)
    }

    pub fn finite_difference_with_step(
        eval: impl Fn(&VerblunskySequence) -> C64 + 'a,
        step: f64,
    ) -> Self {
        Self {
            eval: Box::new(eval),
            strategy: GradientStrategy::FiniteDifference { step },
        }
    }

    pub fn eval(&self, seq: &VerblunskySequence) -> C64 {
        (self.eval)(seq)
    }

    pub fn gradient(&self, seq: &VerblunskySequence) -> Result<WirtingerGradient, PoissonError> {
        match &self.strategy {
            GradientStrategy::Analytic(g) => g(seq),
            GradientStrategy::FiniteDifference { step } => {
                fd_gradient(|s| (self.eval)(s), seq, *step, seq.active_slots())
            }
        }
    }
}

/// `{f, g}` from precomputed gradients; `ρ_j` taken from the sequence.
pub fn bracket_from_gradients(
    f: &WirtingerGradient,
    g: &WirtingerGradient,
    seq: &VerblunskySequence,
) -> Result<C64, PoissonError> {
    if f.len() != g.len() {
        return Err(PoissonError::SlotMismatch {
            lhs: f.len(),
            rhs: g.len(),
        });
    }
    let mut sum = C64::new(0.0, 0.0);
    for j in 0..f.len() {
        let rho2 = rho_sq_at_slot(seq, j);
        sum += rho2 * (f.d_alphabar[j] * g.d_alpha[j] - f.d_alpha[j] * g.d_alphabar[j]);
    }
    Ok(C64::new(0.0, 1.0) * sum)
}

/// The Poisson bracket `{f, g}` of two observables.
pub fn bracket(
    f: &Observable,
    g: &Observable,
    seq: &VerblunskySequence,
) -> Result<C64, PoissonError> {
    let fg = f.gradient(seq)?;
    let gg = g.gradient(seq)?;
    bracket_from_gradients(&fg, &gg, seq)
}

fn rho_sq_at_slot(seq: &VerblunskySequence, slot: usize) -> f64 {
    // Slots may extend past the stored prefix of a truncated sequence,
    // where ρ = 1.
    match seq.alpha_at(slot as i64) {
        Ok(a) => 1.0 - a.norm_sqr(),
        Err(_) => 1.0,
    }
}

/// Central-difference Wirtinger gradient over `slots` coefficient slots.
pub fn fd_gradient(
    f: impl Fn(&VerblunskySequence) -> C64,
    seq: &VerblunskySequence,
    step: f64,
    slots: usize,
) -> Result<WirtingerGradient, PoissonError> {
    let base = match seq.case() {
        SequenceCase::InfiniteTruncated if slots > seq.len() => seq.zero_padded(slots),
        _ => seq.clone(),
    };
    assert!(slots <= base.len());
    for j in 0..slots.min(base.active_slots()) {
        let a = base.alphas()[j];
        if a.norm() >= 1.0 - 2.0 * step {
            return Err(PoissonError::StepTooLarge { index: j, step });
        }
    }
    let mut grad = WirtingerGradient::zeros(slots);
    for j in 0..slots {
        let a = base.alphas()[j];
        let fu_plus = f(&base.with_alpha(j, a + C64::new(step, 0.0)));
        let fu_minus = f(&base.with_alpha(j, a - C64::new(step, 0.0)));
        let fv_plus = f(&base.with_alpha(j, a + C64::new(0.0, step)));
        let fv_minus = f(&base.with_alpha(j, a - C64::new(0.0, step)));
        let du = (fu_plus - fu_minus) / (2.0 * step);
        let dv = (fv_plus - fv_minus) / (2.0 * step);
        let i = C64::new(0.0, 1.0);
        grad.d_alpha[j] = 0.5 * (du - i * dv);
        grad.d_alphabar[j] = 0.5 * (du + i * dv);
    }
    Ok(grad)
}

// ---------------------------------------------------------------------------
// Closed-form gradients of K_{n+1} (periodic case)
// ---------------------------------------------------------------------------

/// `∂K_{n+1}/∂α_j`, `∂K_{n+1}/∂ᾱ_j` for all slots of a periodic sequence,
/// expressed through entries of `E^n`.
///
/// Even slots use the formulas as stated; odd slots use the paired
/// expressions written at index `j-1` with `j` even, re-indexed. A separate
/// trace-formula route ([`grad_k_via_trace`]) guards the transcription.
pub fn grad_k(
    n_plus_1: usize,
    seq: &VerblunskySequence,
) -> Result<WirtingerGradient, PoissonError> {
    assert!(n_plus_1 >= 1);
    assert_eq!(seq.case(), SequenceCase::Periodic);
    let p = seq.effective_period();
    let n = n_plus_1 - 1;

    for j in 0..p {
        let rho = seq.rho_at(j as i64).expect("periodic lookup");
        if rho < 1e-9 {
            return Err(PoissonError::RhoDegenerate {
                index: j as i64,
                rho,
            });
        }
    }

    let oracle = CmvOracle::for_sequence(seq)?;
    let en = extended_power(&oracle, n, -3, p as i64 + 3);
    let a = |i: i64| seq.alpha_at(i).expect("periodic lookup");
    let r = |i: i64| seq.rho_at(i).expect("periodic lookup");

    let mut grad = WirtingerGradient::zeros(p);
    for slot in 0..p {
        if slot % 2 == 0 {
            let j = slot as i64;
            let half = 1.0 / (2.0 * r(j));
            grad.d_alpha[slot] = -a(j).conj() * a(j + 1).conj() * half * en.entry(j + 1, j)
                - a(j).conj() * r(j + 1) * half * en.entry(j + 2, j)
                - a(j).conj() * r(j - 1) * half * en.entry(j - 1, j + 1)
                + a(j).conj() * a(j - 1) * half * en.entry(j, j + 1)
                - a(j + 1).conj() * en.entry(j + 1, j + 1)
                - r(j + 1) * en.entry(j + 2, j + 1);
            grad.d_alphabar[slot] = r(j - 1) * en.entry(j - 1, j)
                - a(j - 1) * en.entry(j, j)
                - a(j) * a(j + 1).conj() * half * en.entry(j + 1, j)
                - a(j) * r(j + 1) * half * en.entry(j + 2, j)
                - a(j) * r(j - 1) * half * en.entry(j - 1, j + 1)
                + a(j) * a(j - 1) * half * en.entry(j, j + 1);
        } else {
            // Odd slot j-1, written with j even.
            let j = slot as i64 + 1;
            let half = 1.0 / (2.0 * r(j - 1));
            grad.d_alpha[slot] = -a(j - 1).conj() * r(j - 2) * half * en.entry(j, j - 2)
                + a(j - 1).conj() * a(j - 2) * half * en.entry(j, j - 1)
                - a(j - 1).conj() * a(j).conj() * half * en.entry(j - 1, j)
                - a(j - 1).conj() * r(j) * half * en.entry(j - 1, j + 1)
                - a(j).conj() * en.entry(j, j)
                - r(j) * en.entry(j, j + 1);
            grad.d_alphabar[slot] = r(j - 2) * en.entry(j - 1, j - 2)
                - a(j - 2) * en.entry(j - 1, j - 1)
                - a(j - 1) * r(j - 2) * half * en.entry(j, j - 2)
                - a(j - 1) * a(j).conj() * half * en.entry(j - 1, j)
                - a(j - 1) * r(j) * half * en.entry(j - 1, j + 1)
                + a(j - 1) * a(j - 2) * half * en.entry(j, j - 1);
        }
    }
    Ok(grad)
}

/// Trace-formula gradient: `∂K_{n+1}/∂β_j = (1/d) Tr(∂Q_(d)/∂β_j · Q_(d)^n)`.
///
/// Requires `dp ≥ 2(n+1)+1` so that `K_{n+1} = Tr(Q_(d)^{n+1})/((n+1)d)`
/// holds for this `d`.
pub fn grad_k_via_trace(
    n_plus_1: usize,
    seq: &VerblunskySequence,
    d: usize,
) -> Result<WirtingerGradient, PoissonError> {
    assert!(n_plus_1 >= 1);
    assert_eq!(seq.case(), SequenceCase::Periodic);
    let p = seq.effective_period();
    let dp = d * p;
    assert!(
        dp >= 2 * n_plus_1 + 1,
        "dp = {dp} too small for K_{n_plus_1}: need dp >= {}",
        2 * n_plus_1 + 1
    );
    let n = n_plus_1 - 1;
    let q = cmv::build_floquet(seq, d)?.q;
    let qn = q.pow(n);
    let scale = 1.0 / d as f64;
    let mut grad = WirtingerGradient::zeros(p);
    for slot in 0..p {
        for (wrt, out) in [
            (Wirtinger::Alpha, &mut grad.d_alpha),
            (Wirtinger::AlphaBar, &mut grad.d_alphabar),
        ] {
            let dq = cmv::floquet_derivative(seq, d, slot, wrt).map_err(map_rho)?;
            out[slot] = dq.mul(&qn).trace() * scale;
        }
    }
    Ok(grad)
}

fn map_rho(e: CmvError) -> PoissonError {
    match e {
        CmvError::RhoDegenerate { index, rho } => PoissonError::RhoDegenerate { index, rho },
        other => PoissonError::Cmv(other),
    }
}

/// Finite-case gradient of `K_n^f = Tr(C_f^n)/n` over the `k-1` active slots.
pub fn grad_k_finite(
    n: usize,
    seq: &VerblunskySequence,
) -> Result<WirtingerGradient, PoissonError> {
    assert!(n >= 1);
    assert_eq!(seq.case(), SequenceCase::Finite);
    let slots = seq.active_slots();
    let c = cmv::build_finite_cmv(seq)?;
    let cn = c.c.pow(n - 1);
    let mut grad = WirtingerGradient::zeros(slots);
    for slot in 0..slots {
        for (wrt, out) in [
            (Wirtinger::Alpha, &mut grad.d_alpha),
            (Wirtinger::AlphaBar, &mut grad.d_alphabar),
        ] {
            let dc = cmv::finite_cmv_derivative(seq, slot, wrt).map_err(map_rho)?;
            out[slot] = dc.mul(&cn).trace();
        }
    }
    Ok(grad)
}

/// Truncated-case gradient of `K_n^i = Σ_k (C^n)_{kk}` over `slots`
/// coefficient slots (which may extend past the stored prefix; the gradient
/// support reaches `2n-1` slots beyond it).
pub fn grad_k_infinite(
    n: usize,
    seq: &VerblunskySequence,
    slots: usize,
) -> Result<WirtingerGradient, PoissonError> {
    assert!(n >= 1);
    assert_eq!(seq.case(), SequenceCase::InfiniteTruncated);
    let padded = if slots > seq.len() {
        seq.zero_padded(slots)
    } else {
        seq.clone()
    };
    let window = slots + 2 * n + 4;
    let oracle = CmvOracle::for_sequence(&padded)?;
    let en = extended_power(&oracle, n - 1, 0, window as i64);
    let mut grad = WirtingerGradient::zeros(slots);
    for slot in 0..slots {
        for (wrt, out) in [
            (Wirtinger::Alpha, &mut grad.d_alpha),
            (Wirtinger::AlphaBar, &mut grad.d_alphabar),
        ] {
            let dc =
                cmv::halfline_window_derivative(&padded, window, slot, wrt).map_err(map_rho)?;
            // Tr(∂C/∂β · C^{n-1}) contracted over the ≤6 nonzero entries.
            let mut sum = C64::new(0.0, 0.0);
            let lo = slot.saturating_sub(2);
            let hi = (slot + 3).min(window);
            for a in lo..hi {
                for b in lo.saturating_sub(2)..(hi + 2).min(window) {
                    let v = dc[(a, b)];
                    if v.norm() > 0.0 {
                        sum += v * en.entry(b as i64, a as i64);
                    }
                }
            }
            out[slot] = sum;
        }
    }
    Ok(grad)
}

// ---------------------------------------------------------------------------
// Entrywise brackets of matrix observables
// ---------------------------------------------------------------------------

/// A matrix-valued observable of the coefficients whose entries can be
/// differentiated slot by slot.
pub trait MatrixObservable {
    fn build(&self, seq: &VerblunskySequence) -> Result<ComplexMatrix, PoissonError>;
    fn derivative(
        &self,
        seq: &VerblunskySequence,
        slot: usize,
        wrt: Wirtinger,
    ) -> Result<ComplexMatrix, PoissonError>;
}

/// `Q_(d)` with analytic Θ-block derivatives.
pub struct FloquetObservable {
    pub d: usize,
}

impl MatrixObservable for FloquetObservable {
    fn build(&self, seq: &VerblunskySequence) -> Result<ComplexMatrix, PoissonError> {
        Ok(cmv::build_floquet(seq, self.d)?.q)
    }
    fn derivative(
        &self,
        seq: &VerblunskySequence,
        slot: usize,
        wrt: Wirtinger,
    ) -> Result<ComplexMatrix, PoissonError> {
        cmv::floquet_derivative(seq, self.d, slot, wrt).map_err(map_rho)
    }
}

/// `C_f` with analytic Θ-block derivatives.
pub struct FiniteCmvObservable;

impl MatrixObservable for FiniteCmvObservable {
    fn build(&self, seq: &VerblunskySequence) -> Result<ComplexMatrix, PoissonError> {
        Ok(cmv::build_finite_cmv(seq)?.c)
    }
    fn derivative(
        &self,
        seq: &VerblunskySequence,
        slot: usize,
        wrt: Wirtinger,
    ) -> Result<ComplexMatrix, PoissonError> {
        cmv::finite_cmv_derivative(seq, slot, wrt).map_err(map_rho)
    }
}

/// Leading window of the half-line CMV matrix, analytic derivatives.
pub struct HalfLineWindowObservable {
    pub size: usize,
}

impl MatrixObservable for HalfLineWindowObservable {
    fn build(&self, seq: &VerblunskySequence) -> Result<ComplexMatrix, PoissonError> {
        Ok(cmv::halfline_window(seq, self.size)?)
    }
    fn derivative(
        &self,
        seq: &VerblunskySequence,
        slot: usize,
        wrt: Wirtinger,
    ) -> Result<ComplexMatrix, PoissonError> {
        cmv::halfline_window_derivative(seq, self.size, slot, wrt).map_err(map_rho)
    }
}

/// Entrywise central differences of any matrix builder: the fully
/// independent fallback route.
pub struct FdMatrixObservable<F: Fn(&VerblunskySequence) -> Result<ComplexMatrix, PoissonError>> {
    pub builder: F,
    pub step: f64,
}

impl<F: Fn(&VerblunskySequence) -> Result<ComplexMatrix, PoissonError>> MatrixObservable
    for FdMatrixObservable<F>
{
    fn build(&self, seq: &VerblunskySequence) -> Result<ComplexMatrix, PoissonError> {
        (self.builder)(seq)
    }
    fn derivative(
        &self,
        seq: &VerblunskySequence,
        slot: usize,
        wrt: Wirtinger,
    ) -> Result<ComplexMatrix, PoissonError> {
        let h = self.step;
        let a = seq.alphas()[slot];
        if a.norm() >= 1.0 - 2.0 * h {
            return Err(PoissonError::StepTooLarge {
                index: slot,
                step: h,
            });
        }
        let half = C64::new(0.5 / h, 0.0);
        let du = (self.builder)(&seq.with_alpha(slot, a + C64::new(h, 0.0)))?
            .sub(&(self.builder)(
                &seq.with_alpha(slot, a - C64::new(h, 0.0)),
            )?)
            .scale(half);
        let dv = (self.builder)(&seq.with_alpha(slot, a + C64::new(0.0, h)))?
            .sub(&(self.builder)(
                &seq.with_alpha(slot, a - C64::new(0.0, h)),
            )?)
            .scale(half);
        let i = C64::new(0.0, 1.0);
        Ok(match wrt {
            Wirtinger::Alpha => du.sub(&dv.scale(i)).scale(C64::new(0.5, 0.0)),
            Wirtinger::AlphaBar => du.add(&dv.scale(i)).scale(C64::new(0.5, 0.0)),
        })
    }
}

/// The matrix with `(j,k)` entry `{M_{jk}, g}`, assembled as
/// `i Σ_s ρ_s² [ (∂M/∂ᾱ_s) g_α[s] - (∂M/∂α_s) g_ᾱ[s] ]`.
///
/// The sum runs over the slots of `g_grad`; slots past the stored prefix of
/// a truncated sequence carry `ρ = 1`.
pub fn bracket_matrix(
    m: &dyn MatrixObservable,
    g_grad: &WirtingerGradient,
    seq: &VerblunskySequence,
) -> Result<ComplexMatrix, PoissonError> {
    let padded = match seq.case() {
        SequenceCase::InfiniteTruncated if g_grad.len() > seq.len() => {
            seq.zero_padded(g_grad.len())
        }
        _ => seq.clone(),
    };
    let template = m.build(&padded)?;
    let mut acc = ComplexMatrix::zeros(template.rows(), template.cols());
    for s in 0..g_grad.len() {
        let rho2 = rho_sq_at_slot(&padded, s);
        if g_grad.d_alpha[s].norm() > 0.0 {
            let dbar = m.derivative(&padded, s, Wirtinger::AlphaBar)?;
            acc = acc.add(&dbar.scale(C64::new(rho2, 0.0) * g_grad.d_alpha[s]));
        }
        if g_grad.d_alphabar[s].norm() > 0.0 {
            let da = m.derivative(&padded, s, Wirtinger::Alpha)?;
            acc = acc.sub(&da.scale(C64::new(rho2, 0.0) * g_grad.d_alphabar[s]));
        }
    }
    Ok(acc.scale(C64::new(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians;
    use crate::rng::{random_infinite, random_periodic};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn fd_gradient_of_coordinate() {
        let seq = random_periodic(4, 2);
        let grad = fd_gradient(|s| s.alphas()[1], &seq, FD_STEP, 4).unwrap();
        for j in 0..4 {
            let expect = if j == 1 { 1.0 } else { 0.0 };
            assert!((grad.d_alpha[j] - c(expect, 0.0)).norm() < 1e-9);
            assert!(grad.d_alphabar[j].norm() < 1e-9);
        }
    }

    #[test]
    fn fd_gradient_of_modulus_squared() {
        let seq = random_periodic(2, 3);
        let grad = fd_gradient(|s| c(s.alphas()[0].norm_sqr(), 0.0), &seq, FD_STEP, 2).unwrap();
        let a = seq.alphas()[0];
        assert!((grad.d_alpha[0] - a.conj()).norm() < 1e-9);
        assert!((grad.d_alphabar[0] - a).norm() < 1e-9);
    }

    #[test]
    fn fd_gradient_of_k0() {
        let seq = random_periodic(4, 5);
        let k0 = hamiltonians::k0(&seq);
        let grad = fd_gradient(|s| c(hamiltonians::k0(s), 0.0), &seq, FD_STEP, 4).unwrap();
        for j in 0..4 {
            let a = seq.alphas()[j];
            let rho2 = 1.0 - a.norm_sqr();
            let expect = -a * k0 / rho2;
            assert!(
                (grad.d_alphabar[j] - expect).norm() < 1e-6,
                "slot {j}: {} vs {}",
                grad.d_alphabar[j],
                expect
            );
        }
    }

    #[test]
    fn fd_step_too_large_detected() {
        let seq = crate::coeffs::VerblunskySequence::periodic(vec![c(1.0 - 1e-7, 0.0)]).unwrap();
        let err = fd_gradient(|s| s.alphas()[0], &seq, 1e-6, 2).unwrap_err();
        assert!(matches!(err, PoissonError::StepTooLarge { .. }));
    }

    #[test]
    fn grad_k1_closed_form() {
        // E^0 = I collapses the formulas to ∂K_1/∂ᾱ_j = -α_{j-1} and
        // ∂K_1/∂α_j = -ᾱ_{j+1}.
        let seq = random_periodic(4, 11);
        let grad = grad_k(1, &seq).unwrap();
        for j in 0..4i64 {
            let expect_bar = -seq.alpha_at(j - 1).unwrap();
            let expect = -seq.alpha_at(j + 1).unwrap().conj();
            assert!((grad.d_alphabar[j as usize] - expect_bar).norm() < 1e-14);
            assert!((grad.d_alpha[j as usize] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn grad_k_vanishes_at_zero() {
        let seq = crate::coeffs::VerblunskySequence::periodic(vec![c(0.0, 0.0); 4]).unwrap();
        for n in 1..=3 {
            let grad = grad_k(n, &seq).unwrap();
            for j in 0..4 {
                assert!(grad.d_alpha[j].norm() < 1e-14);
                assert!(grad.d_alphabar[j].norm() < 1e-14);
            }
        }
    }

    #[test]
    fn grad_k_three_routes_agree() {
        for (p, seed) in [(2usize, 21u64), (4, 22), (4, 23), (6, 24)] {
            let seq = random_periodic(p, seed);
            for n_plus_1 in 1..=3usize {
                let closed = grad_k(n_plus_1, &seq).unwrap();
                let d = (2 * n_plus_1 + 1).div_ceil(p).max(1);
                let traced = grad_k_via_trace(n_plus_1, &seq, d).unwrap();
                let fd = fd_gradient(|s| hamiltonians::k(n_plus_1, s), &seq, FD_STEP, p).unwrap();
                for j in 0..p {
                    assert!(
                        (closed.d_alpha[j] - traced.d_alpha[j]).norm() < 1e-10,
                        "p={p} n={n_plus_1} slot={j} closed vs traced"
                    );
                    assert!(
                        (closed.d_alphabar[j] - traced.d_alphabar[j]).norm() < 1e-10,
                        "p={p} n={n_plus_1} slot={j} closed vs traced (bar)"
                    );
                    assert!(
                        (closed.d_alpha[j] - fd.d_alpha[j]).norm() < 1e-6,
                        "p={p} n={n_plus_1} slot={j} closed vs fd: {} vs {}",
                        closed.d_alpha[j],
                        fd.d_alpha[j]
                    );
                    assert!((closed.d_alphabar[j] - fd.d_alphabar[j]).norm() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn grad_k_trace_example() {
        let seq =
            crate::coeffs::VerblunskySequence::periodic(vec![c(0.5, 0.0), c(0.3, 0.0)]).unwrap();
        let grad = grad_k_via_trace(1, &seq, 2).unwrap();
        assert!((grad.d_alphabar[0] - c(-0.3, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn bracket_antisymmetry_and_reality() {
        let seq = random_periodic(4, 31);
        let f = Observable::finite_difference(|s| c(hamiltonians::k(1, s).re, 0.0));
        let g = Observable::finite_difference(|s| c(hamiltonians::k0(s), 0.0));
        let fg = bracket(&f, &g, &seq).unwrap();
        let gf = bracket(&g, &f, &seq).unwrap();
        assert!((fg + gf).norm() < 1e-12);
        // Real observables have a real bracket.
        assert!(fg.im.abs() < 1e-10);
        // {f, f} = 0.
        let ff = bracket(&f, &f, &seq).unwrap();
        assert!(ff.norm() < 1e-14);
    }

    #[test]
    fn bracket_alpha_with_2rek1() {
        // {α_j, 2Re K_1} = i ρ_j² (α_{j-1} + α_{j+1})
        let seq = random_periodic(4, 41);
        let p = 4;
        for j in 0..p {
            let f = Observable::finite_difference(move |s: &VerblunskySequence| s.alphas()[j]);
            let g = Observable::analytic(
                |s| c(2.0 * hamiltonians::k(1, s).re, 0.0),
                |s| {
                    let k1 = grad_k(1, s)?;
                    Ok(k1.add(&k1.conj_swap()))
                },
            );
            let got = bracket(&f, &g, &seq).unwrap();
            let rho2 = 1.0 - seq.alphas()[j].norm_sqr();
            let expect = C64::new(0.0, rho2)
                * (seq.alpha_at(j as i64 - 1).unwrap() + seq.alpha_at(j as i64 + 1).unwrap());
            assert!((got - expect).norm() < 1e-8, "slot {j}: {got} vs {expect}");
        }
    }

    #[test]
    fn bracket_alpha_with_log_k0() {
        // {α_j, log K_0} = i α_j
        let seq = random_periodic(4, 43);
        for j in 0..4 {
            let f = Observable::finite_difference(move |s: &VerblunskySequence| s.alphas()[j]);
            let g = Observable::finite_difference(|s| c(hamiltonians::k0(s).ln(), 0.0));
            let got = bracket(&f, &g, &seq).unwrap();
            let expect = C64::new(0.0, 1.0) * seq.alphas()[j];
            assert!((got - expect).norm() < 1e-8, "slot {j}");
        }
    }

    #[test]
    fn jacobi_identity_spot_check() {
        use crate::hamiltonians::HamiltonianSpec as H;
        let seq = random_periodic(4, 47);
        let specs = [H::ReK(1), H::ImK(1), H::K0, H::ReK(2)];
        for (fi, gi, hi) in [(0usize, 1usize, 2usize), (0, 2, 3), (1, 2, 3)] {
            let cycle = [(fi, gi, hi), (gi, hi, fi), (hi, fi, gi)];
            let mut sum = c(0.0, 0.0);
            for (x, y, z) in cycle {
                // Inner bracket with analytic gradients; the outer gradient
                // of that scalar is taken by finite differences.
                let inner = move |s: &VerblunskySequence| {
                    let gy = specs[y].gradient(s).unwrap();
                    let gz = specs[z].gradient(s).unwrap();
                    bracket_from_gradients(&gy, &gz, s).unwrap()
                };
                let outer = fd_gradient(inner, &seq, 1e-5, 4).unwrap();
                let gx = specs[x].gradient(&seq).unwrap();
                sum += bracket_from_gradients(&gx, &outer, &seq).unwrap();
            }
            assert!(sum.norm() < 1e-6, "cycle ({fi},{gi},{hi}): {sum}");
        }
    }

    #[test]
    fn grad_k_infinite_matches_fd() {
        let seq = random_infinite(3, 51);
        for n in 1..=2usize {
            let slots = seq.len() + 2 * n + 2;
            let analytic = grad_k_infinite(n, &seq, slots).unwrap();
            let window = slots + 2 * n + 4;
            let fd = fd_gradient(
                |s| {
                    let w = cmv::halfline_window(s, window).unwrap();
                    w.pow(n).trace() / n as f64
                },
                &seq,
                FD_STEP,
                slots,
            )
            .unwrap();
            for j in 0..slots {
                assert!(
                    (analytic.d_alpha[j] - fd.d_alpha[j]).norm() < 1e-6,
                    "n={n} slot {j}: {} vs {}",
                    analytic.d_alpha[j],
                    fd.d_alpha[j]
                );
                assert!((analytic.d_alphabar[j] - fd.d_alphabar[j]).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn bracket_matrix_constant_vanishes() {
        let seq = random_periodic(4, 61);
        // g = constant has zero gradient, so {M, g} = 0.
        let g = WirtingerGradient::zeros(4);
        let m = FloquetObservable { d: 1 };
        let out = bracket_matrix(&m, &g, &seq).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }
}
