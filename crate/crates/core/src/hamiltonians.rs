//! Conserved quantities of the hierarchy.
//!
//! For a periodic sequence the `n`-th Hamiltonian is the trace per volume of
//! the `n`-th power of the extended CMV matrix,
//! `K_n = (1/n) Σ_{k=0}^{p-1} (E^n)_{kk}`, evaluated here as
//! `Tr(Q_(d)^n)/(dn)` with the smallest `d` making `dp ≥ 2n+1`. `K_0` is the
//! product of the `ρ_j²` over the case-appropriate index set. The finite and
//! truncated cases replace `E` by `C_f` and by the half-line matrix.
//!
//! The discriminant is defined operationally through
//! `det(z - Q_(1)) = z^{p/2} (Π ρ_j) [Δ(z) - 2]`, with the characteristic
//! polynomial obtained from power traces via Newton's identities (no
//! eigensolver anywhere in the crate).

use crate::cmv::{self, extended_power, CmvError, CmvOracle};
use crate::coeffs::{SequenceCase, VerblunskySequence};
use crate::matrix::ComplexMatrix;
use crate::poisson::{grad_k, grad_k_finite, grad_k_infinite, PoissonError, WirtingerGradient};
use crate::C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HamiltoniansError {
    #[error("the discriminant is undefined at z = 0")]
    ZeroArgument,
    #[error("dimension {dim} exceeds the Newton-identity limit of 256")]
    DimensionTooLarge { dim: usize },
    #[error("window {got} too small: need at least {needed}")]
    WindowTooSmall { needed: usize, got: usize },
    #[error(transparent)]
    Cmv(#[from] CmvError),
}

/// Identifies a flow generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HamiltonianSpec {
    /// `K_n`, `n ≥ 1`.
    K(usize),
    /// `conj(K_n)`.
    Kbar(usize),
    /// `Re K_n`.
    ReK(usize),
    /// `Im K_n`.
    ImK(usize),
    /// `Π ρ_j²`.
    K0,
    /// `log Π ρ_j²`.
    LogK0,
    /// The Ablowitz-Ladik combination `2 Re K_1 - 2 log K_0`.
    Al,
}

impl HamiltonianSpec {
    pub fn eval(&self, seq: &VerblunskySequence) -> C64 {
        match self {
            Self::K(n) => k_any_case(*n, seq),
            Self::Kbar(n) => k_any_case(*n, seq).conj(),
            Self::ReK(n) => C64::new(k_any_case(*n, seq).re, 0.0),
            Self::ImK(n) => C64::new(k_any_case(*n, seq).im, 0.0),
            Self::K0 => C64::new(k0(seq), 0.0),
            Self::LogK0 => C64::new(k0(seq).ln(), 0.0),
            Self::Al => C64::new(2.0 * k_any_case(1, seq).re - 2.0 * k0(seq).ln(), 0.0),
        }
    }

    /// Analytic Wirtinger gradient over the active slots.
    pub fn gradient(&self, seq: &VerblunskySequence) -> Result<WirtingerGradient, PoissonError> {
        match self {
            Self::K(n) => grad_k_any_case(*n, seq),
            Self::Kbar(n) => Ok(grad_k_any_case(*n, seq)?.conj_swap()),
            Self::ReK(n) => {
                let g = grad_k_any_case(*n, seq)?;
                Ok(g.add(&g.conj_swap()).scale(C64::new(0.5, 0.0)))
            }
            Self::ImK(n) => {
                let g = grad_k_any_case(*n, seq)?;
                let diff = g.add(&g.conj_swap().scale(C64::new(-1.0, 0.0)));
                // 1/(2i) = -i/2
                Ok(diff.scale(C64::new(0.0, -0.5)))
            }
            Self::K0 => Ok(grad_k0(seq).scale(C64::new(k0(seq), 0.0))),
            Self::LogK0 => Ok(grad_k0(seq)),
            Self::Al => {
                let re = Self::ReK(1).gradient(seq)?.scale(C64::new(2.0, 0.0));
                let log = grad_k0(seq).scale(C64::new(-2.0, 0.0));
                Ok(re.add(&log))
            }
        }
    }

    /// Parse the CLI syntax `AL | K:n | Kbar:n | ReK:n | ImK:n | K0 | logK0`.
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "AL" | "al" => return Some(Self::Al),
            "K0" | "k0" => return Some(Self::K0),
            "logK0" | "logk0" | "LogK0" => return Some(Self::LogK0),
            _ => {}
        }
        let (kind, n) = text.split_once(':')?;
        let n: usize = n.parse().ok()?;
        if n == 0 {
            return None;
        }
        match kind {
            "K" | "k" => Some(Self::K(n)),
            "Kbar" | "kbar" => Some(Self::Kbar(n)),
            "ReK" | "rek" => Some(Self::ReK(n)),
            "ImK" | "imk" => Some(Self::ImK(n)),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::K(n) => format!("K:{n}"),
            Self::Kbar(n) => format!("Kbar:{n}"),
            Self::ReK(n) => format!("ReK:{n}"),
            Self::ImK(n) => format!("ImK:{n}"),
            Self::K0 => "K0".into(),
            Self::LogK0 => "logK0".into(),
            Self::Al => "AL".into(),
        }
    }
}

/// Gradient of `log K_0`: `∂/∂α_j = -ᾱ_j/ρ_j²`, `∂/∂ᾱ_j = -α_j/ρ_j²`.
fn grad_k0(seq: &VerblunskySequence) -> WirtingerGradient {
    let slots = seq.active_slots();
    let mut g = WirtingerGradient::zeros(slots);
    for j in 0..slots {
        let a = seq.alphas()[j];
        let rho2 = 1.0 - a.norm_sqr();
        g.d_alpha[j] = -a.conj() / rho2;
        g.d_alphabar[j] = -a / rho2;
    }
    g
}

fn k_any_case(n: usize, seq: &VerblunskySequence) -> C64 {
    match seq.case() {
        SequenceCase::Periodic => k(n, seq),
        SequenceCase::Finite => k_finite(n, seq),
        SequenceCase::InfiniteTruncated => {
            let window = seq.len() + 4 * n;
            k_infinite(n, seq, window)
                .expect("window satisfies the precondition")
                .value
        }
    }
}

fn grad_k_any_case(n: usize, seq: &VerblunskySequence) -> Result<WirtingerGradient, PoissonError> {
    match seq.case() {
        SequenceCase::Periodic => grad_k(n, seq),
        SequenceCase::Finite => grad_k_finite(n, seq),
        SequenceCase::InfiniteTruncated => grad_k_infinite(n, seq, seq.active_slots()),
    }
}

/// Smallest `d ≥ 1` with `dp ≥ 2n+1`; `dp` is even because `p` is.
pub fn minimal_d(n: usize, p: usize) -> usize {
    (2 * n + 1).div_ceil(p).max(1)
}

/// `K_n` of a periodic sequence via the minimal Floquet restriction.
pub fn k(n: usize, seq: &VerblunskySequence) -> C64 {
    let d = minimal_d(n, seq.effective_period());
    k_with_d(n, seq, d)
}

/// `K_n = Tr(Q_(d)^n) / (dn)`; requires `dp ≥ 2n+1`.
pub fn k_with_d(n: usize, seq: &VerblunskySequence, d: usize) -> C64 {
    assert!(n >= 1);
    let p = seq.effective_period();
    assert!(d * p >= 2 * n + 1, "dp = {} < 2n+1 = {}", d * p, 2 * n + 1);
    let q = cmv::build_floquet(seq, d).expect("periodic sequence").q;
    q.pow(n).trace() / (d as f64 * n as f64)
}

/// `K_n = (1/n) Σ_{k=0}^{p-1} (E^n)_{kk}`, the defining diagonal sum,
/// evaluated through the entry oracle as an independent route.
pub fn k_via_diagonal(n: usize, seq: &VerblunskySequence) -> C64 {
    assert!(n >= 1);
    let p = seq.effective_period() as i64;
    let oracle = CmvOracle::for_sequence(seq).expect("periodic oracle");
    let en = extended_power(&oracle, n, 0, p);
    let mut sum = C64::new(0.0, 0.0);
    for j in 0..p {
        sum += en.entry(j, j);
    }
    sum / n as f64
}

/// `K_0`: product of `ρ_j²` over one period, over `j ≤ k-2` in the finite
/// case, or over the stored prefix in the truncated case.
pub fn k0(seq: &VerblunskySequence) -> f64 {
    let range = match seq.case() {
        SequenceCase::Periodic => seq.effective_period(),
        SequenceCase::Finite => seq.len() - 1,
        SequenceCase::InfiniteTruncated => seq.len(),
    };
    (0..range)
        .map(|j| {
            let rho = seq.rho_at(j as i64).expect("index in range");
            rho * rho
        })
        .product()
}

/// The full finite-case product including the boundary slot, which is
/// identically zero because `ρ_{k-1} = 0`. Kept for documentation; the
/// usable quantity is [`k0`].
pub fn k0_full_finite(seq: &VerblunskySequence) -> f64 {
    assert_eq!(seq.case(), SequenceCase::Finite);
    (0..seq.len())
        .map(|j| {
            let rho = seq.rho_at(j as i64).expect("index in range");
            rho * rho
        })
        .product()
}

/// `K_n^f = Tr(C_f^n)/n`.
pub fn k_finite(n: usize, seq: &VerblunskySequence) -> C64 {
    assert!(n >= 1);
    let c = cmv::build_finite_cmv(seq).expect("finite sequence").c;
    c.pow(n).trace() / n as f64
}

/// `K_n^i` with its tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KInfinite {
    pub value: C64,
    /// `4^n Σ_{j > window-2n} (|α_{j-(2n-1)}| + … + |α_{j+2n-1}|)`; exactly
    /// zero once `window ≥ N + 2n`.
    pub tail_bound: f64,
}

/// `K_n^i = (1/n) Σ_{k=0}^{window} (C^n)_{kk}` for a truncated sequence.
///
/// Requires `window ≥ N + 4n`; the diagonal entries past `N + 2n - 2` vanish
/// identically, so the sum is exact and window-independent from there on.
pub fn k_infinite(
    n: usize,
    seq: &VerblunskySequence,
    window: usize,
) -> Result<KInfinite, HamiltoniansError> {
    assert!(n >= 1);
    assert_eq!(seq.case(), SequenceCase::InfiniteTruncated);
    let trunc = seq.len();
    let needed = trunc + 4 * n;
    if window < needed {
        return Err(HamiltoniansError::WindowTooSmall {
            needed,
            got: window,
        });
    }
    let oracle = CmvOracle::for_sequence(seq)?;
    let en = extended_power(&oracle, n, 0, window as i64 + 1);
    let mut sum = C64::new(0.0, 0.0);
    for j in 0..=window as i64 {
        sum += en.entry(j, j);
    }

    let reach = 2 * n as i64 - 1;
    let mut tail = 0.0;
    for j in (window as i64 - 2 * n as i64 + 1).max(0).. {
        if j - reach >= trunc as i64 {
            break;
        }
        if j <= window as i64 - 2 * n as i64 {
            continue;
        }
        for m in (j - reach).max(0)..=(j + reach).min(trunc as i64 - 1) {
            tail += seq.alphas()[m as usize].norm();
        }
    }
    Ok(KInfinite {
        value: sum / n as f64,
        tail_bound: 4f64.powi(n as i32) * tail,
    })
}

// ---------------------------------------------------------------------------
// Characteristic polynomials and the discriminant
// ---------------------------------------------------------------------------

/// Coefficients `c_0..c_m` of `det(z - M) = Σ_i c_i z^{m-i}` from the power
/// traces `Tr(M), …, Tr(M^m)` via Newton's identities.
pub fn char_poly_coeffs(m: &ComplexMatrix) -> Result<Vec<C64>, HamiltoniansError> {
    let dim = m.ensure_square().map_err(|_| CmvError::NonSquare {
        rows: m.rows(),
        cols: m.cols(),
    })?;
    if dim > 256 {
        return Err(HamiltoniansError::DimensionTooLarge { dim });
    }
    let mut traces = Vec::with_capacity(dim);
    let mut power = ComplexMatrix::identity(dim);
    for _ in 0..dim {
        power = power.mul(m);
        traces.push(power.trace());
    }
    let mut coeffs = vec![C64::new(1.0, 0.0)];
    for i in 1..=dim {
        let mut acc = traces[i - 1];
        for j in 1..i {
            acc += coeffs[j] * traces[i - j - 1];
        }
        coeffs.push(-acc / i as f64);
    }
    Ok(coeffs)
}

/// Evaluate `Σ_i c_i z^{m-i}` by Horner's rule.
pub fn eval_monic(coeffs: &[C64], z: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for &c in coeffs {
        acc = acc * z + c;
    }
    acc
}

/// The monic polynomial `det(z - Q_(1)) = z^{p/2} (Π ρ_j) [Δ(z) - 2]`
/// together with `K_0`.
#[derive(Debug, Clone)]
pub struct DiscriminantPoly {
    /// `c_0..c_p` of `det(z - Q_(1))`, `c_0 = 1`.
    pub char_coeffs: Vec<C64>,
    pub k0: f64,
}

impl DiscriminantPoly {
    pub fn from_sequence(seq: &VerblunskySequence) -> Result<Self, HamiltoniansError> {
        assert_eq!(seq.case(), SequenceCase::Periodic);
        let q = cmv::build_floquet(seq, 1)?.q;
        Ok(Self {
            char_coeffs: char_poly_coeffs(&q)?,
            k0: k0(seq),
        })
    }

    pub fn degree(&self) -> usize {
        self.char_coeffs.len() - 1
    }

    /// `det(z - Q_(1))`.
    pub fn det_at(&self, z: C64) -> C64 {
        eval_monic(&self.char_coeffs, z)
    }

    /// `Δ(z) = det(z - Q_(1)) / (z^{p/2} Π ρ_j) + 2`.
    pub fn delta_at(&self, z: C64) -> Result<C64, HamiltoniansError> {
        if z == C64::new(0.0, 0.0) {
            return Err(HamiltoniansError::ZeroArgument);
        }
        let p = self.degree();
        let norm = z.powu(p as u32 / 2) * self.k0.sqrt();
        Ok(self.det_at(z) / norm + C64::new(2.0, 0.0))
    }

    /// Coefficients of `z^{p/2} (Π ρ_j) Δ(z)`: the characteristic
    /// coefficients with `2 Π ρ_j` added at the `z^{p/2}` slot.
    pub fn delta_coeffs(&self) -> Vec<C64> {
        let mut c = self.char_coeffs.clone();
        let p = self.degree();
        c[p / 2] += C64::new(2.0 * self.k0.sqrt(), 0.0);
        c
    }
}

/// `Δ(z)` for a periodic sequence.
pub fn discriminant(seq: &VerblunskySequence, z: C64) -> Result<C64, HamiltoniansError> {
    DiscriminantPoly::from_sequence(seq)?.delta_at(z)
}

/// Closed form for period 2: `Δ(e^{iθ}) = (2/ρρ')[cos θ + Re(ᾱ α')]`.
pub fn delta_closed_form_p2(alpha: C64, alpha_prime: C64, theta: f64) -> C64 {
    let rho = (1.0 - alpha.norm_sqr()).sqrt();
    let rho_prime = (1.0 - alpha_prime.norm_sqr()).sqrt();
    C64::new(
        2.0 / (rho * rho_prime) * (theta.cos() + (alpha.conj() * alpha_prime).re),
        0.0,
    )
}

/// The `p` commuting integrals read off the discriminant polynomial:
/// `(Re c_1, Im c_1, …, Re c_{p/2-1}, Im c_{p/2-1}, c_{p/2}, Π ρ_j²)`.
pub fn invariant_vector(seq: &VerblunskySequence) -> Vec<f64> {
    let poly = DiscriminantPoly::from_sequence(seq).expect("periodic sequence");
    let dc = poly.delta_coeffs();
    let p = poly.degree();
    let mut out = Vec::with_capacity(p);
    for c in dc.iter().take(p / 2).skip(1) {
        out.push(c.re);
        out.push(c.im);
    }
    out.push(dc[p / 2].re);
    out.push(poly.k0);
    out
}
