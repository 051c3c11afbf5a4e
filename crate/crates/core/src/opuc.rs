//! Orthogonal polynomials on the unit circle: Szegő recursion and transfer
//! matrices.
//!
//! This module backs the CMV constructions with an independent computation
//! path. Monic polynomials obey
//!
//! ```text
//! Φ_{n+1}(z) = z Φ_n(z) - ᾱ_n Φ_n*(z)
//! Φ*_{n+1}(z) = Φ_n*(z) - α_n z Φ_n(z)
//! ```
//!
//! with `Φ*` the reversed polynomial, and `‖Φ_n‖ = Π_{l<n} ρ_l` scales them
//! to the orthonormal `φ_n`. The same recursion in matrix form is the
//! transfer matrix `A(α, z) = (1/ρ) [[z, -ᾱ], [-αz, 1]]` with
//! `T_n(z) (1,1)ᵀ = (φ_n, φ_n*)ᵀ` and `det T_n(z) = zⁿ`.
//!
//! Nothing here feeds the Lax verification path; agreement between the two
//! routes is evidence, not circularity.

use crate::coeffs::VerblunskySequence;
use crate::C64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OpucError {
    #[error(
        "polynomial degrees are inconsistent: phi has degree {phi}, phi* has degree {phi_star}"
    )]
    DegreeMismatch { phi: usize, phi_star: usize },
    #[error("rho = {rho} is numerically degenerate")]
    RhoDegenerate { rho: f64 },
}

/// Coefficients `c_0 + c_1 z + … + c_n zⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs {
    pub coeffs: Vec<C64>,
}

impl PolyCoeffs {
    pub fn constant_one() -> Self {
        Self {
            coeffs: vec![C64::new(1.0, 0.0)],
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// The reversed polynomial: `c_l -> conj(c_{n-l})`, i.e.
    /// `Φ*(z) = zⁿ conj(Φ(1/z̄))`.
    pub fn reversed(&self) -> Self {
        Self {
            coeffs: self.coeffs.iter().rev().map(|c| c.conj()).collect(),
        }
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs.last() == Some(&C64::new(1.0, 0.0))
    }
}

/// One Szegő step: `(Φ_n, Φ_n*) -> (Φ_{n+1}, Φ*_{n+1})`.
pub fn szego_step(
    phi: &PolyCoeffs,
    phi_star: &PolyCoeffs,
    alpha: C64,
) -> Result<(PolyCoeffs, PolyCoeffs), OpucError> {
    if phi.degree() != phi_star.degree() {
        return Err(OpucError::DegreeMismatch {
            phi: phi.degree(),
            phi_star: phi_star.degree(),
        });
    }
    let n = phi.degree();
    let zero = C64::new(0.0, 0.0);
    // z Φ_n - ᾱ Φ_n*
    let mut next = vec![zero; n + 2];
    for (l, &c) in phi.coeffs.iter().enumerate() {
        next[l + 1] += c;
    }
    for (l, &c) in phi_star.coeffs.iter().enumerate() {
        next[l] -= alpha.conj() * c;
    }
    // Φ_n* - α z Φ_n
    let mut next_star = vec![zero; n + 2];
    for (l, &c) in phi_star.coeffs.iter().enumerate() {
        next_star[l] += c;
    }
    for (l, &c) in phi.coeffs.iter().enumerate() {
        next_star[l + 1] -= alpha * c;
    }
    Ok((
        PolyCoeffs { coeffs: next },
        PolyCoeffs { coeffs: next_star },
    ))
}

/// Run the recursion from `Φ_0 = Φ_0* = 1` through `alphas[..n]`.
pub fn szego_run(alphas: &[C64], n: usize) -> Result<(PolyCoeffs, PolyCoeffs), OpucError> {
    assert!(n <= alphas.len());
    let mut phi = PolyCoeffs::constant_one();
    let mut phi_star = PolyCoeffs::constant_one();
    for &alpha in &alphas[..n] {
        let (p, ps) = szego_step(&phi, &phi_star, alpha)?;
        phi = p;
        phi_star = ps;
    }
    Ok((phi, phi_star))
}

/// `‖Φ_n‖ = Π_{l<n} ρ_l`, the monic-to-orthonormal scale.
pub fn norm_product(alphas: &[C64], n: usize) -> f64 {
    alphas[..n]
        .iter()
        .map(|a| (1.0 - a.norm_sqr()).max(0.0).sqrt())
        .product()
}

/// A 2×2 transfer-matrix value at fixed `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m: [[C64; 2]; 2],
}

impl TransferMatrix {
    pub fn identity() -> Self {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        Self {
            m: [[one, zero], [zero, one]],
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut out = [[C64::new(0.0, 0.0); 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry = self.m[r][0] * rhs.m[0][c] + self.m[r][1] * rhs.m[1][c];
            }
        }
        Self { m: out }
    }

    pub fn det(&self) -> C64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Apply to `(1, 1)ᵀ`.
    pub fn apply_ones(&self) -> (C64, C64) {
        (self.m[0][0] + self.m[0][1], self.m[1][0] + self.m[1][1])
    }
}

/// `A(α, z) = (1/ρ) [[z, -ᾱ], [-αz, 1]]`; `det A = z`.
pub fn transfer(alpha: C64, z: C64) -> Result<TransferMatrix, OpucError> {
    let rho = (1.0 - alpha.norm_sqr()).max(0.0).sqrt();
    if rho < 1e-9 {
        return Err(OpucError::RhoDegenerate { rho });
    }
    let inv = C64::new(1.0 / rho, 0.0);
    Ok(TransferMatrix {
        m: [[inv * z, -inv * alpha.conj()], [-inv * alpha * z, inv]],
    })
}

/// `T_n(z) = A(α_{n-1}, z) ··· A(α_0, z)`.
pub fn transfer_product(alphas: &[C64], n: usize, z: C64) -> Result<TransferMatrix, OpucError> {
    assert!(n <= alphas.len());
    let mut t = TransferMatrix::identity();
    for &alpha in &alphas[..n] {
        t = transfer(alpha, z)?.mul(&t);
    }
    Ok(t)
}

/// Experimental: `z^{-p/2} Tr T_p(z)` as a candidate route to the
/// discriminant. Compared against the determinant route in the self-test;
/// any disagreement is reported, never reconciled silently.
pub fn transfer_discriminant(seq: &VerblunskySequence, z: C64) -> Result<C64, OpucError> {
    let p = seq.effective_period();
    let t = transfer_product(seq.alphas(), p, z)?;
    let trace = t.m[0][0] + t.m[1][1];
    Ok(trace / z.powu(p as u32 / 2))
}

/// Winding number of `Φ(e^{iθ})` around 0 over a uniform grid; equals the
/// zero count inside the disk when no root sits near the circle. Returns
/// `None` when the grid sees a near-zero value and the count is unreliable.
pub fn zeros_inside_unit_circle(poly: &PolyCoeffs, grid: usize) -> Option<usize> {
    let mut total_turn = 0.0;
    let mut prev = poly.eval(C64::new(1.0, 0.0));
    if prev.norm() < 1e-9 {
        return None;
    }
    for i in 1..=grid {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / grid as f64;
        let value = poly.eval(C64::from_polar(1.0, theta));
        if value.norm() < 1e-9 {
            return None;
        }
        let turn = (value / prev).arg();
        if turn.abs() > std::f64::consts::FRAC_PI_2 {
            return None; // grid too coarse for this polynomial
        }
        total_turn += turn;
        prev = value;
    }
    Some((total_turn / (2.0 * std::f64::consts::PI)).round() as usize)
}
