//! CMV-type operators built from Verblunsky coefficients.
//!
//! All constructions factor through the 2×2 unitary blocks
//! `Θ(α) = [[ᾱ, ρ], [ρ, -α]]` with `ρ = sqrt(1 - |α|²)`:
//!
//! - the finite CMV matrix `C_f = L_f · M_f` (k×k unitary);
//! - the doubly-infinite extended CMV matrix `E = L̃ · M̃`, represented as an
//!   entry oracle plus finite window extraction — never as a stored object;
//! - its Floquet restrictions `Q_(d)` to `dp`-periodic sequences, built
//!   directly from Θ blocks with wraparound (the defining sum over shifted
//!   entries of `E` is implemented separately as a cross-check);
//! - the half-line CMV matrix of the truncated case, via windows.
//!
//! The half-line and finite factorizations fix the phase at the origin:
//! `M` starts with the 1×1 block `[1]`, which is `[-α_{-1}]` for the
//! boundary value `α_{-1} = -1`. This is a property of the matrix
//! construction in every case; the dynamical boundary condition of the
//! truncated flow (`α_{-1} = 0`) enters only through the vector fields.

use crate::coeffs::{SequenceCase, VerblunskySequence};
use crate::matrix::ComplexMatrix;
use crate::{C64, STRUCTURAL_ZERO_TOL};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CmvError {
    #[error("|alpha| = {modulus} exceeds 1")]
    ModulusOutOfRange { modulus: f64 },
    #[error("matrix is {rows}x{cols}, expected square")]
    NonSquare { rows: usize, cols: usize },
    #[error(transparent)]
    Matrix(#[from] crate::matrix::MatrixError),
    #[error("window of {size} rows cannot isolate the band of a power with n = {n}")]
    WindowTooSmall { size: usize, n: usize },
    #[error("rho_{index} = {rho} is numerically degenerate")]
    RhoDegenerate { index: i64, rho: f64 },
    #[error("operation needs a {expected:?} sequence")]
    WrongCase { expected: SequenceCase },
}

/// Which Wirtinger direction a derivative is taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wirtinger {
    Alpha,
    AlphaBar,
}

/// The 2×2 building block `Θ(α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaBlock {
    pub alpha: C64,
    pub rho: f64,
}

/// `Θ(α)` with `ρ = sqrt(1 - |α|²)`. Accepts `|α| ≤ 1` (boundary included);
/// tiny excursions past 1 from roundoff are clamped.
pub fn make_theta(alpha: C64) -> Result<ThetaBlock, CmvError> {
    let modulus = alpha.norm();
    if modulus > 1.0 + 1e-12 {
        return Err(CmvError::ModulusOutOfRange { modulus });
    }
    let rho = (1.0 - alpha.norm_sqr()).max(0.0).sqrt();
    Ok(ThetaBlock { alpha, rho })
}

impl ThetaBlock {
    /// Matrix view `[[ᾱ, ρ], [ρ, -α]]`; unitary and equal to its own
    /// transpose.
    pub fn matrix(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 0)] = self.alpha.conj();
        m[(0, 1)] = C64::new(self.rho, 0.0);
        m[(1, 0)] = C64::new(self.rho, 0.0);
        m[(1, 1)] = -self.alpha;
        m
    }
}

/// Wirtinger derivative of `Θ(α)` as a 2×2 block.
///
/// The only ρ-derivative rules in the crate: from `ρ² = 1 - αᾱ`,
/// `∂ρ/∂α = -ᾱ/(2ρ)` and `∂ρ/∂ᾱ = -α/(2ρ)`.
pub fn theta_derivative(alpha: C64, wrt: Wirtinger) -> Result<[[C64; 2]; 2], CmvError> {
    let rho = (1.0 - alpha.norm_sqr()).max(0.0).sqrt();
    if rho < 1e-9 {
        return Err(CmvError::RhoDegenerate { index: -1, rho });
    }
    let zero = C64::new(0.0, 0.0);
    Ok(match wrt {
        Wirtinger::Alpha => {
            let drho = -alpha.conj() / (2.0 * rho);
            [[zero, drho], [drho, C64::new(-1.0, 0.0)]]
        }
        Wirtinger::AlphaBar => {
            let drho = -alpha / (2.0 * rho);
            [[C64::new(1.0, 0.0), drho], [drho, zero]]
        }
    })
}

// ---------------------------------------------------------------------------
// Entry oracles
// ---------------------------------------------------------------------------

/// Entry of `E = L̃M̃` from the two Θ blocks that reach position `(j,k)`.
///
/// `alpha`/`rho` supply coefficients for arbitrary integer index.
fn lm_entry(alpha: &impl Fn(i64) -> C64, rho: &impl Fn(i64) -> f64, j: i64, k: i64) -> C64 {
    let zero = C64::new(0.0, 0.0);
    if j.rem_euclid(2) == 0 {
        match k - j {
            -1 => alpha(j).conj() * rho(j - 1),
            0 => -alpha(j).conj() * alpha(j - 1),
            1 => rho(j) * alpha(j + 1).conj(),
            2 => C64::new(rho(j) * rho(j + 1), 0.0),
            _ => zero,
        }
    } else {
        match k - j {
            -2 => C64::new(rho(j - 1) * rho(j - 2), 0.0),
            -1 => -rho(j - 1) * alpha(j - 2),
            0 => -alpha(j - 1) * alpha(j).conj(),
            1 => -alpha(j - 1) * rho(j),
            _ => zero,
        }
    }
}

/// Entry oracle for the doubly-infinite extended CMV matrix of a periodic
/// sequence. Coefficients for one effective period are cached.
#[derive(Debug, Clone)]
pub struct ExtendedCmvOracle {
    alphas: Vec<C64>,
    rhos: Vec<f64>,
}

impl ExtendedCmvOracle {
    pub fn new(seq: &VerblunskySequence) -> Result<Self, CmvError> {
        if seq.case() != SequenceCase::Periodic {
            return Err(CmvError::WrongCase {
                expected: SequenceCase::Periodic,
            });
        }
        let alphas = seq.alphas().to_vec();
        let rhos = alphas
            .iter()
            .map(|a| (1.0 - a.norm_sqr()).max(0.0).sqrt())
            .collect();
        Ok(Self { alphas, rhos })
    }

    pub fn period(&self) -> usize {
        self.alphas.len()
    }

    fn alpha(&self, j: i64) -> C64 {
        self.alphas[j.rem_euclid(self.alphas.len() as i64) as usize]
    }

    fn rho(&self, j: i64) -> f64 {
        self.rhos[j.rem_euclid(self.rhos.len() as i64) as usize]
    }

    /// `E_{jk}` for any integer pair; zero whenever `|j-k| ≥ 3`.
    pub fn entry(&self, j: i64, k: i64) -> C64 {
        lm_entry(&|i| self.alpha(i), &|i| self.rho(i), j, k)
    }
}

/// Entry oracle for the half-line CMV matrix `C` of a truncated sequence
/// (zero tail, `M` anchored by its leading `[1]` block).
#[derive(Debug, Clone)]
pub struct HalfLineOracle {
    alphas: Vec<C64>,
}

impl HalfLineOracle {
    pub fn new(seq: &VerblunskySequence) -> Result<Self, CmvError> {
        if seq.case() != SequenceCase::InfiniteTruncated {
            return Err(CmvError::WrongCase {
                expected: SequenceCase::InfiniteTruncated,
            });
        }
        Ok(Self {
            alphas: seq.alphas().to_vec(),
        })
    }

    fn alpha(&self, j: i64) -> C64 {
        if j == -1 {
            // Matrix boundary phase; see module docs.
            C64::new(-1.0, 0.0)
        } else if j < -1 || j as usize >= self.alphas.len() {
            C64::new(0.0, 0.0)
        } else {
            self.alphas[j as usize]
        }
    }

    fn rho(&self, j: i64) -> f64 {
        (1.0 - self.alpha(j).norm_sqr()).max(0.0).sqrt()
    }

    pub fn entry(&self, j: i64, k: i64) -> C64 {
        if j < 0 || k < 0 {
            return C64::new(0.0, 0.0);
        }
        lm_entry(&|i| self.alpha(i), &|i| self.rho(i), j, k)
    }
}

/// A common face for the two oracles.
#[derive(Debug, Clone)]
pub enum CmvOracle {
    Extended(ExtendedCmvOracle),
    HalfLine(HalfLineOracle),
}

impl CmvOracle {
    pub fn for_sequence(seq: &VerblunskySequence) -> Result<Self, CmvError> {
        match seq.case() {
            SequenceCase::Periodic => Ok(Self::Extended(ExtendedCmvOracle::new(seq)?)),
            SequenceCase::InfiniteTruncated => Ok(Self::HalfLine(HalfLineOracle::new(seq)?)),
            SequenceCase::Finite => Err(CmvError::WrongCase {
                expected: SequenceCase::Periodic,
            }),
        }
    }

    pub fn entry(&self, j: i64, k: i64) -> C64 {
        match self {
            Self::Extended(o) => o.entry(j, k),
            Self::HalfLine(o) => o.entry(j, k),
        }
    }

    /// Smallest meaningful row index (`None` for the doubly-infinite case).
    fn support_floor(&self) -> Option<i64> {
        match self {
            Self::Extended(_) => None,
            Self::HalfLine(_) => Some(0),
        }
    }

    /// Square window `[lo, lo+size) × [lo, lo+size)` of exact entries.
    pub fn window(&self, lo: i64, size: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(size, size, |r, c| self.entry(lo + r as i64, lo + c as i64))
    }
}

// ---------------------------------------------------------------------------
// Exact powers of E on index windows
// ---------------------------------------------------------------------------

/// Exact entries of `E^n` (or `C^n`) over the index range `[lo, hi)`.
///
/// Built by powering a window padded far enough that no length-`n` path
/// between exposed indices can leave it: each factor of `E` moves an index
/// by at most 2, so paths from `j` to `k` stay inside
/// `[min(j,k) - n, max(j,k) + n]`.
#[derive(Debug, Clone)]
pub struct EPower {
    n: usize,
    lo: i64,
    hi: i64,
    wlo: i64,
    mat: ComplexMatrix,
}

pub fn extended_power(oracle: &CmvOracle, n: usize, lo: i64, hi: i64) -> EPower {
    assert!(hi > lo);
    let pad = n as i64 + 2;
    let mut wlo = lo - pad;
    if let Some(floor) = oracle.support_floor() {
        wlo = wlo.max(floor);
    }
    let whi = hi + pad;
    let size = (whi - wlo) as usize;
    let window = oracle.window(wlo, size);
    EPower {
        n,
        lo,
        hi,
        wlo,
        mat: window.pow(n),
    }
}

impl EPower {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    /// `(E^n)_{jk}`; exact for `j, k ∈ [lo, hi)` and zero outside the band.
    pub fn entry(&self, j: i64, k: i64) -> C64 {
        assert!(
            (self.lo..self.hi).contains(&j) && (self.lo..self.hi).contains(&k),
            "requested entry ({j},{k}) outside guaranteed range [{}, {})",
            self.lo,
            self.hi
        );
        if (j - k).abs() > 2 * self.n as i64 {
            return C64::new(0.0, 0.0);
        }
        let (r, c) = ((j - self.wlo) as usize, (k - self.wlo) as usize);
        if r < self.mat.rows() && c < self.mat.cols() {
            self.mat[(r, c)]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// Dense view of the exposed square, for band checks.
    pub fn exposed(&self) -> ComplexMatrix {
        let size = (self.hi - self.lo) as usize;
        ComplexMatrix::from_fn(size, size, |r, c| {
            self.entry(self.lo + r as i64, self.lo + c as i64)
        })
    }
}

// ---------------------------------------------------------------------------
// Finite CMV
// ---------------------------------------------------------------------------

/// `C_f = L_f · M_f` together with its factors.
#[derive(Debug, Clone)]
pub struct FiniteCmv {
    pub c: ComplexMatrix,
    pub l: ComplexMatrix,
    pub m: ComplexMatrix,
}

/// Place `Θ(α_j)` blocks direct-sum style into an `size`×`size` matrix for
/// the factor selected by `parity` (0 = L, 1 = M). A block whose second row
/// would overflow contributes only its top-left `ᾱ` entry — for unimodular
/// boundary coefficients this is exact, since `Θ` is then diagonal.
fn factor_window(alpha: &impl Fn(i64) -> C64, size: usize, parity: i64) -> ComplexMatrix {
    let mut f = ComplexMatrix::zeros(size, size);
    if parity == 1 {
        // Top-left 1×1 block of M is -α_{-1} = 1.
        f[(0, 0)] = C64::new(1.0, 0.0);
    }
    let mut j = parity;
    while (j as usize) < size {
        let a = alpha(j);
        let rho = (1.0 - a.norm_sqr()).max(0.0).sqrt();
        let row = j as usize;
        f[(row, row)] = a.conj();
        if row + 1 < size {
            f[(row, row + 1)] = C64::new(rho, 0.0);
            f[(row + 1, row)] = C64::new(rho, 0.0);
            f[(row + 1, row + 1)] = -a;
        }
        j += 2;
    }
    f
}

/// Build the unitary k×k finite CMV matrix and its `L_f`, `M_f` factors.
pub fn build_finite_cmv(seq: &VerblunskySequence) -> Result<FiniteCmv, CmvError> {
    if seq.case() != SequenceCase::Finite {
        return Err(CmvError::WrongCase {
            expected: SequenceCase::Finite,
        });
    }
    let k = seq.len();
    let alpha = |j: i64| seq.alpha_at(j).expect("finite index in range");
    let l = factor_window(&alpha, k, 0);
    let m = factor_window(&alpha, k, 1);
    let c = l.mul(&m);
    Ok(FiniteCmv { c, l, m })
}

/// `∂C_f/∂β_slot` assembled from the Θ-block derivative. Only interior
/// slots (`0..k-1`) are movable; the boundary phase is frozen.
pub fn finite_cmv_derivative(
    seq: &VerblunskySequence,
    slot: usize,
    wrt: Wirtinger,
) -> Result<ComplexMatrix, CmvError> {
    assert_eq!(seq.case(), SequenceCase::Finite);
    let k = seq.len();
    assert!(slot + 1 < k, "boundary slot is frozen");
    let alpha = |j: i64| seq.alpha_at(j).expect("finite index in range");
    let dblock = theta_derivative(alpha(slot as i64), wrt).map_err(|e| match e {
        CmvError::RhoDegenerate { rho, .. } => CmvError::RhoDegenerate {
            index: slot as i64,
            rho,
        },
        other => other,
    })?;
    let mut dfactor = ComplexMatrix::zeros(k, k);
    dfactor[(slot, slot)] = dblock[0][0];
    dfactor[(slot, slot + 1)] = dblock[0][1];
    dfactor[(slot + 1, slot)] = dblock[1][0];
    dfactor[(slot + 1, slot + 1)] = dblock[1][1];
    let full = build_finite_cmv(seq)?;
    Ok(if slot % 2 == 0 {
        dfactor.mul(&full.m)
    } else {
        full.l.mul(&dfactor)
    })
}

// ---------------------------------------------------------------------------
// Floquet restrictions
// ---------------------------------------------------------------------------

/// The `dp × dp` Floquet restriction `Q_(d)` with its factors.
#[derive(Debug, Clone)]
pub struct Floquet {
    pub q: ComplexMatrix,
    pub l: ComplexMatrix,
    pub m: ComplexMatrix,
    pub d: usize,
}

/// Build `Q_(d)` directly from Θ blocks with wraparound indices.
pub fn build_floquet(seq: &VerblunskySequence, d: usize) -> Result<Floquet, CmvError> {
    if seq.case() != SequenceCase::Periodic {
        return Err(CmvError::WrongCase {
            expected: SequenceCase::Periodic,
        });
    }
    assert!(d >= 1);
    let p = seq.effective_period();
    let dp = d * p;
    let alpha = |j: i64| seq.alpha_at(j).expect("periodic lookup is total");
    let rho = |j: i64| seq.rho_at(j).expect("periodic lookup is total");

    let mut l = ComplexMatrix::zeros(dp, dp);
    for j in (0..dp).step_by(2) {
        place_wrapped_block(&mut l, j, dp, alpha(j as i64), rho(j as i64));
    }
    let mut m = ComplexMatrix::zeros(dp, dp);
    for j in (1..dp).step_by(2) {
        place_wrapped_block(&mut m, j, dp, alpha(j as i64), rho(j as i64));
    }
    let q = l.mul(&m);
    Ok(Floquet { q, l, m, d })
}

fn place_wrapped_block(f: &mut ComplexMatrix, j: usize, dp: usize, a: C64, rho: f64) {
    let next = (j + 1) % dp;
    f[(j, j)] = a.conj();
    f[(j, next)] = C64::new(rho, 0.0);
    f[(next, j)] = C64::new(rho, 0.0);
    f[(next, next)] = -a;
}

/// Cross-check construction of `Q_(d)^n` from its defining sum
/// `Σ_l (E^n)_{j, k+l·dp}`, evaluated through the entry oracle.
pub fn floquet_from_sum(seq: &VerblunskySequence, d: usize, n: usize) -> ComplexMatrix {
    let oracle = CmvOracle::for_sequence(seq).expect("periodic oracle");
    let p = seq.effective_period();
    let dp = (d * p) as i64;
    let band = 2 * n as i64;
    let power = extended_power(&oracle, n, -band - dp, 2 * dp + band);
    ComplexMatrix::from_fn(dp as usize, dp as usize, |r, c| {
        let (j, k) = (r as i64, c as i64);
        let mut sum = C64::new(0.0, 0.0);
        let mut l = (j - k - band).div_euclid(dp);
        while k + l * dp <= j + band {
            sum += power.entry(j, k + l * dp);
            l += 1;
        }
        sum
    })
}

/// Matrix representation of `(E^n)_+` restricted to the `dp`-periodic
/// subspace. Not the plus-projection of `Q_(d)^n`: entries of `(E^n)_+`
/// at shifted columns `k + l·dp` survive in full for `l ≥ 1`, which
/// populates the lower-left corner.
pub fn floquet_power_plus(seq: &VerblunskySequence, d: usize, n: usize) -> ComplexMatrix {
    let oracle = CmvOracle::for_sequence(seq).expect("periodic oracle");
    let p = seq.effective_period();
    let dp = (d * p) as i64;
    let band = 2 * n as i64;
    let power = extended_power(&oracle, n, -band - dp, 2 * dp + band);
    ComplexMatrix::from_fn(dp as usize, dp as usize, |r, c| {
        let (j, k) = (r as i64, c as i64);
        let mut sum = C64::new(0.0, 0.0);
        let mut l = (j - k - band).div_euclid(dp);
        while k + l * dp <= j + band {
            let col = k + l * dp;
            let weight = match j.cmp(&col) {
                std::cmp::Ordering::Less => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Greater => 0.0,
            };
            if weight > 0.0 {
                sum += power.entry(j, col) * weight;
            }
            l += 1;
        }
        sum
    })
}

/// `∂Q_(d)/∂β_slot` from Θ-block derivatives. The coefficient `α_slot`
/// appears in one Θ block per period copy, so the derivative has at most
/// `6d` nonzero entries.
pub fn floquet_derivative(
    seq: &VerblunskySequence,
    d: usize,
    slot: usize,
    wrt: Wirtinger,
) -> Result<ComplexMatrix, CmvError> {
    assert_eq!(seq.case(), SequenceCase::Periodic);
    let p = seq.effective_period();
    assert!(slot < p);
    let dp = d * p;
    let a = seq.alpha_at(slot as i64).expect("periodic lookup");
    let dblock = theta_derivative(a, wrt).map_err(|e| match e {
        CmvError::RhoDegenerate { rho, .. } => CmvError::RhoDegenerate {
            index: slot as i64,
            rho,
        },
        other => other,
    })?;
    let mut dfactor = ComplexMatrix::zeros(dp, dp);
    for copy in 0..d {
        let j = slot + copy * p;
        let next = (j + 1) % dp;
        dfactor[(j, j)] = dblock[0][0];
        dfactor[(j, next)] = dblock[0][1];
        dfactor[(next, j)] = dblock[1][0];
        dfactor[(next, next)] = dblock[1][1];
    }
    let full = build_floquet(seq, d)?;
    Ok(if slot % 2 == 0 {
        dfactor.mul(&full.m)
    } else {
        full.l.mul(&dfactor)
    })
}

// ---------------------------------------------------------------------------
// Half-line windows (truncated case)
// ---------------------------------------------------------------------------

/// Leading `size`×`size` block of the half-line CMV matrix, entrywise exact
/// (factors are assembled two rows past the window before multiplying).
pub fn halfline_window(seq: &VerblunskySequence, size: usize) -> Result<ComplexMatrix, CmvError> {
    let oracle = HalfLineOracle::new(seq)?;
    let padded = size + 2;
    let alpha = |j: i64| oracle.alpha(j);
    let l = factor_window(&alpha, padded, 0);
    let m = factor_window(&alpha, padded, 1);
    Ok(l.mul(&m).leading_block(size))
}

/// `∂C/∂β_slot` on the leading `size`×`size` block, entrywise exact.
pub fn halfline_window_derivative(
    seq: &VerblunskySequence,
    size: usize,
    slot: usize,
    wrt: Wirtinger,
) -> Result<ComplexMatrix, CmvError> {
    let oracle = HalfLineOracle::new(seq)?;
    let padded = size + 2;
    assert!(slot + 1 < padded, "slot must sit inside the padded window");
    let alpha = |j: i64| oracle.alpha(j);
    let dblock = theta_derivative(alpha(slot as i64), wrt).map_err(|e| match e {
        CmvError::RhoDegenerate { rho, .. } => CmvError::RhoDegenerate {
            index: slot as i64,
            rho,
        },
        other => other,
    })?;
    let mut dfactor = ComplexMatrix::zeros(padded, padded);
    dfactor[(slot, slot)] = dblock[0][0];
    dfactor[(slot, slot + 1)] = dblock[0][1];
    dfactor[(slot + 1, slot)] = dblock[1][0];
    dfactor[(slot + 1, slot + 1)] = dblock[1][1];
    let l = factor_window(&alpha, padded, 0);
    let m = factor_window(&alpha, padded, 1);
    let dc = if slot % 2 == 0 {
        dfactor.mul(&m)
    } else {
        l.mul(&dfactor)
    };
    Ok(dc.leading_block(size))
}

// ---------------------------------------------------------------------------
// Projections and diagonal generators
// ---------------------------------------------------------------------------

/// Plus-projection: strictly-upper entries copied, diagonal halved,
/// strictly-lower zeroed.
pub fn plus_projection(m: &ComplexMatrix) -> Result<ComplexMatrix, CmvError> {
    let n = m.ensure_square().map_err(|_| CmvError::NonSquare {
        rows: m.rows(),
        cols: m.cols(),
    })?;
    Ok(ComplexMatrix::from_fn(n, n, |r, c| {
        use std::cmp::Ordering::*;
        match r.cmp(&c) {
            Less => m[(r, c)],
            Equal => 0.5 * m[(r, c)],
            Greater => C64::new(0.0, 0.0),
        }
    }))
}

/// Diagonal generator of the `K_0` flow: `P_ll = (-1)^l (i/2) Π_k ρ_k²`,
/// with the product over one period.
pub fn build_p_matrix(seq: &VerblunskySequence, size: usize) -> ComplexMatrix {
    assert_eq!(seq.case(), SequenceCase::Periodic);
    let p = seq.effective_period();
    let mut prod = 1.0;
    for j in 0..p {
        let rho = seq.rho_at(j as i64).expect("periodic lookup");
        prod *= rho * rho;
    }
    let mut out = ComplexMatrix::zeros(size, size);
    for l in 0..size {
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        out[(l, l)] = C64::new(0.0, sign * 0.5 * prod);
    }
    out
}

// ---------------------------------------------------------------------------
// Band-shape predicate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct BandViolation {
    pub row: i64,
    pub col: i64,
    pub magnitude: f64,
}

/// Check the structural zero pattern of an `n`-th power: entries vanish for
/// `|j-k| ≥ 2n+1`, for `j-k = 2n` with `j,k` even, and for `j-k = -2n` with
/// `j,k` odd.
///
/// `first_index` is the absolute index of row 0 (parities are absolute).
/// With `wraps = true` the matrix is a `Q_(d)^n` and offsets are taken
/// circularly; that requires `dp ≥ 4n+2` so wraparound cannot reach the
/// band, otherwise the test is void and `WindowTooSmall` is returned.
pub fn band_shape_check(
    m: &ComplexMatrix,
    n: usize,
    first_index: i64,
    wraps: bool,
) -> Result<Vec<BandViolation>, CmvError> {
    let size = m.ensure_square().map_err(|_| CmvError::NonSquare {
        rows: m.rows(),
        cols: m.cols(),
    })?;
    if wraps && size < 4 * n + 2 {
        return Err(CmvError::WindowTooSmall { size, n });
    }
    let mut violations = Vec::new();
    for r in 0..size {
        for c in 0..size {
            let j = first_index + r as i64;
            let k = first_index + c as i64;
            let mut delta = j - k;
            if wraps {
                let dp = size as i64;
                delta = delta.rem_euclid(dp);
                if delta > dp / 2 {
                    delta -= dp;
                }
            }
            let n2 = 2 * n as i64;
            // The parity clauses apply for n ≥ 1; the zeroth power is the
            // identity and passes on the distance clause alone.
            let expected_zero = delta.abs() >= n2 + 1
                || (n > 0 && delta == n2 && j.rem_euclid(2) == 0 && k.rem_euclid(2) == 0)
                || (n > 0 && delta == -n2 && j.rem_euclid(2) == 1 && k.rem_euclid(2) == 1);
            if expected_zero {
                let magnitude = m[(r, c)].norm();
                if magnitude > STRUCTURAL_ZERO_TOL {
                    violations.push(BandViolation {
                        row: j,
                        col: k,
                        magnitude,
                    });
                }
            }
        }
    }
    Ok(violations)
}

/// Unitarity residual restricted to rows/columns whose Θ blocks are fully
/// inside the window: `max |(W W* - I)_{rs}|` over `2 ≤ r,s < size-2`.
pub fn interior_unitarity_residual(window: &ComplexMatrix) -> f64 {
    let size = window.rows();
    assert!(size > 4);
    let gram = window.mul(&window.adjoint());
    let mut worst: f64 = 0.0;
    for r in 2..size - 2 {
        for s in 2..size - 2 {
            let expected = if r == s { 1.0 } else { 0.0 };
            worst = worst.max((gram[(r, s)] - C64::new(expected, 0.0)).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::VerblunskySequence;
    use crate::rng::{random_infinite, random_periodic};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn theta_examples() {
        let t = make_theta(c(0.0, 0.0)).unwrap().matrix();
        assert_eq!(t[(0, 0)], c(0.0, 0.0));
        assert_eq!(t[(0, 1)], c(1.0, 0.0));

        let t = make_theta(c(-1.0, 0.0)).unwrap().matrix();
        assert_eq!(t[(0, 0)], c(-1.0, 0.0));
        assert_eq!(t[(0, 1)], c(0.0, 0.0));
        assert_eq!(t[(1, 1)], c(1.0, 0.0));

        let t = make_theta(c(0.6, 0.0)).unwrap().matrix();
        assert!((t[(0, 1)].re - 0.8).abs() < 1e-15);
        assert_eq!(t[(1, 1)], c(-0.6, 0.0));

        assert!(make_theta(c(1.5, 0.0)).is_err());
    }

    #[test]
    fn theta_is_unitary_and_symmetric() {
        let t = make_theta(c(0.3, -0.5)).unwrap().matrix();
        assert!(t.unitarity_residual() < 1e-15);
        assert_eq!(t[(0, 1)], t[(1, 0)]);
    }

    #[test]
    fn finite_cmv_k2_by_hand() {
        let seq = VerblunskySequence::finite(vec![c(0.6, 0.0), c(-1.0, 0.0)]).unwrap();
        let f = build_finite_cmv(&seq).unwrap();
        assert!((f.c[(0, 0)] - c(0.6, 0.0)).norm() < 1e-15);
        assert!((f.c[(0, 1)] - c(-0.8, 0.0)).norm() < 1e-15);
        assert!((f.c[(1, 0)] - c(0.8, 0.0)).norm() < 1e-15);
        assert!((f.c[(1, 1)] - c(0.6, 0.0)).norm() < 1e-15);

        let free = VerblunskySequence::finite(vec![c(0.0, 0.0), c(-1.0, 0.0)]).unwrap();
        let f0 = build_finite_cmv(&free).unwrap();
        assert!((f0.c[(0, 1)] - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((f0.c[(1, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn finite_cmv_unitary_both_parities() {
        for k in [2usize, 3, 4, 5, 6, 7] {
            let seq = crate::rng::random_finite(k, 1000 + k as u64);
            let f = build_finite_cmv(&seq).unwrap();
            assert!(
                f.c.unitarity_residual() < 1e-12,
                "k = {k}: residual {}",
                f.c.unitarity_residual()
            );
            assert!(f.l.unitarity_residual() < 1e-12);
            assert!(f.m.unitarity_residual() < 1e-12);
        }
    }

    #[test]
    fn extended_entries_free_case() {
        let seq = VerblunskySequence::periodic(vec![c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let oracle = ExtendedCmvOracle::new(&seq).unwrap();
        for j in (-6..6).step_by(2) {
            assert_eq!(oracle.entry(j, j + 2), c(1.0, 0.0));
            assert_eq!(oracle.entry(j + 1, j - 1), c(1.0, 0.0));
            assert_eq!(oracle.entry(j, j), c(0.0, 0.0));
            assert_eq!(oracle.entry(j, j + 1), c(0.0, 0.0));
            assert_eq!(oracle.entry(j + 1, j), c(0.0, 0.0));
        }
    }

    #[test]
    fn extended_corner_entry() {
        let seq = random_periodic(4, 3);
        let oracle = ExtendedCmvOracle::new(&seq).unwrap();
        let expect = -seq.alpha_at(-1).unwrap() * seq.alpha_at(0).unwrap().conj();
        assert!((oracle.entry(0, 0) - expect).norm() < 1e-15);
    }

    #[test]
    fn extended_band_width() {
        let seq = random_periodic(6, 11);
        let oracle = ExtendedCmvOracle::new(&seq).unwrap();
        for j in -8..8i64 {
            for k in -8..8i64 {
                if (j - k).abs() >= 3 {
                    assert_eq!(oracle.entry(j, k), c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn extended_periodicity_exact() {
        let seq = random_periodic(4, 5);
        let p = seq.effective_period() as i64;
        let oracle = ExtendedCmvOracle::new(&seq).unwrap();
        for j in -5..5 {
            for k in -5..5 {
                assert_eq!(oracle.entry(j + p, k + p), oracle.entry(j, k));
            }
        }
    }

    #[test]
    fn transpose_shift_symmetry_for_odd_raw_period() {
        let seq =
            VerblunskySequence::periodic(vec![c(0.3, 0.1), c(-0.2, 0.4), c(0.1, -0.5)]).unwrap();
        let p = seq.raw_period() as i64;
        let oracle = ExtendedCmvOracle::new(&seq).unwrap();
        for j in -6..6i64 {
            for k in (j - 2)..=(j + 2) {
                let lhs = oracle.entry(k + p, j + p);
                let rhs = oracle.entry(j, k);
                assert!((lhs - rhs).norm() < 1e-15, "({j},{k}): {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn halfline_agrees_with_section_one_display() {
        // A periodic sequence extending a half-line sequence: entries agree
        // on rows/columns ≥ 2, where the boundary block is out of reach.
        let seq = random_periodic(4, 21);
        let extended = ExtendedCmvOracle::new(&seq).unwrap();
        let mut prefix = Vec::new();
        for j in 0..20 {
            prefix.push(seq.alpha_at(j).unwrap());
        }
        let half = VerblunskySequence::infinite(prefix).unwrap();
        let halfline = HalfLineOracle::new(&half).unwrap();
        for j in 2..14i64 {
            for k in 2..14i64 {
                assert!((extended.entry(j, k) - halfline.entry(j, k)).norm() < 1e-15);
            }
        }
        // Row 0 carries the boundary phase: C_00 = conj(alpha_0).
        let a0 = half.alpha_at(0).unwrap();
        assert!((halfline.entry(0, 0) - a0.conj()).norm() < 1e-15);
        assert!((halfline.entry(1, 0).im).abs() < 1e-15);
    }

    #[test]
    fn shift_conjugation_on_windows() {
        // E({α_{j-1}})_{jk} = E({α_j})_{k-1,j-1}: conjugating the transpose
        // by the shift relabels the coefficient sequence.
        let seq = random_periodic(4, 33);
        let p = seq.effective_period();
        let mut shifted_alphas = vec![c(0.0, 0.0); p];
        for j in 0..p {
            shifted_alphas[j] = seq.alpha_at(j as i64 - 1).unwrap();
        }
        let shifted = VerblunskySequence::periodic(shifted_alphas).unwrap();
        let orig = ExtendedCmvOracle::new(&seq).unwrap();
        let shif = ExtendedCmvOracle::new(&shifted).unwrap();
        for j in -4..8i64 {
            for k in -4..8i64 {
                assert!((shif.entry(j, k) - orig.entry(k - 1, j - 1)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn floquet_free_case_is_permutation() {
        let seq = VerblunskySequence::periodic(vec![c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let f = build_floquet(&seq, 2).unwrap();
        for r in 0..4 {
            let ones = (0..4)
                .filter(|&c_| (f.q[(r, c_)] - c(1.0, 0.0)).norm() < 1e-15)
                .count();
            let zeros = (0..4).filter(|&c_| f.q[(r, c_)].norm() < 1e-15).count();
            assert_eq!(ones, 1, "row {r}");
            assert_eq!(zeros, 3, "row {r}");
        }
        assert!((f.q[(0, 2)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((f.q[(1, 3)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((f.q[(2, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((f.q[(3, 1)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn floquet_matches_defining_sum() {
        for (p, d, seed) in [
            (2usize, 1usize, 7u64),
            (2, 2, 8),
            (4, 1, 9),
            (4, 2, 10),
            (6, 1, 11),
        ] {
            let seq = random_periodic(p, seed);
            let direct = build_floquet(&seq, d).unwrap().q;
            let from_sum = floquet_from_sum(&seq, d, 1);
            assert!(
                direct.sub(&from_sum).max_abs() < 1e-14,
                "p={p} d={d}: {}",
                direct.sub(&from_sum).max_abs()
            );
        }
    }

    #[test]
    fn floquet_unitary() {
        for (p, d) in [(2usize, 1usize), (4, 2), (6, 1)] {
            let seq = random_periodic(p, 40 + (p + d) as u64);
            let f = build_floquet(&seq, d).unwrap();
            assert!(f.q.unitarity_residual() < 1e-12);
        }
    }

    #[test]
    fn floquet_powers_match_sum_route() {
        let seq = random_periodic(4, 17);
        for (d, n) in [(1usize, 2usize), (2, 3), (1, 3)] {
            let q = build_floquet(&seq, d).unwrap().q;
            let qn = q.pow(n);
            let from_sum = floquet_from_sum(&seq, d, n);
            assert!(
                qn.sub(&from_sum).max_abs() < 1e-13,
                "d={d} n={n}: {}",
                qn.sub(&from_sum).max_abs()
            );
        }
    }

    #[test]
    fn decomposition_of_periodized_finite() {
        let fin = crate::rng::random_finite(4, 91);
        let f = build_finite_cmv(&fin).unwrap();
        let per = VerblunskySequence::periodized_finite(&fin).unwrap();
        let d = 2;
        let q = build_floquet(&per, d).unwrap().q;
        let k = fin.len();
        for r in 0..d * k {
            for c_ in 0..d * k {
                let expected = if r / k == c_ / k {
                    f.c[(r % k, c_ % k)]
                } else {
                    c(0.0, 0.0)
                };
                assert!((q[(r, c_)] - expected).norm() < 1e-14, "entry ({r},{c_})");
            }
        }
    }

    #[test]
    fn plus_projection_rules() {
        let eye = ComplexMatrix::identity(3);
        let half = plus_projection(&eye).unwrap();
        assert_eq!(half[(0, 0)], c(0.5, 0.0));
        assert_eq!(half[(0, 1)], c(0.0, 0.0));

        let m = ComplexMatrix::from_data(
            2,
            2,
            vec![c(1.0, 1.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, -1.0)],
        )
        .unwrap();
        let plus = plus_projection(&m).unwrap();
        assert_eq!(plus[(0, 0)], c(0.5, 0.5));
        assert_eq!(plus[(0, 1)], c(2.0, 0.0));
        assert_eq!(plus[(1, 0)], c(0.0, 0.0));
        assert_eq!(plus[(1, 1)], c(2.0, -0.5));

        let rect = ComplexMatrix::zeros(2, 3);
        assert!(matches!(
            plus_projection(&rect),
            Err(CmvError::NonSquare { .. })
        ));
    }

    #[test]
    fn p_matrix_values() {
        let seq = VerblunskySequence::periodic(vec![c(0.6, 0.0), c(0.8, 0.0)]).unwrap();
        let p = build_p_matrix(&seq, 4);
        assert!((p[(0, 0)] - c(0.0, 0.1152)).norm() < 1e-15);
        assert!((p[(1, 1)] - c(0.0, -0.1152)).norm() < 1e-15);
        // Skew-Hermitian: P + P* = 0.
        assert!(p.add(&p.adjoint()).max_abs() < 1e-15);

        let free = VerblunskySequence::periodic(vec![c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let pf = build_p_matrix(&free, 2);
        assert!((pf[(0, 0)] - c(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn band_shape_on_powers() {
        let seq = random_periodic(4, 55);
        let oracle = CmvOracle::for_sequence(&seq).unwrap();
        for n in 0..4usize {
            let power = extended_power(&oracle, n, -6, 7);
            let violations = band_shape_check(&power.exposed(), n, -6, false).unwrap();
            assert!(violations.is_empty(), "n={n}: {violations:?}");
        }
    }

    #[test]
    fn band_extreme_entries_are_rho_products() {
        let seq = random_periodic(6, 77);
        let oracle = CmvOracle::for_sequence(&seq).unwrap();
        let n = 2;
        let power = extended_power(&oracle, n, -2, 12);
        for j in [0i64, 2, 4] {
            let mut expect = 1.0;
            for i in j..j + 2 * n as i64 {
                expect *= seq.rho_at(i).unwrap();
            }
            let got = power.entry(j, j + 2 * n as i64);
            assert!((got - c(expect, 0.0)).norm() < 1e-14, "j={j}");
            assert!(got.norm() > 1e-3, "generic rho product should not vanish");
        }
    }

    #[test]
    fn band_shape_floquet_wraparound_guard() {
        let seq = random_periodic(2, 5);
        let q = build_floquet(&seq, 1).unwrap().q;
        // dp = 2 < 4n+2 for n = 1: the test is void.
        assert!(matches!(
            band_shape_check(&q.pow(1), 1, 0, true),
            Err(CmvError::WindowTooSmall { .. })
        ));
        let q6 = build_floquet(&seq, 3).unwrap().q;
        let violations = band_shape_check(&q6, 1, 0, true).unwrap();
        assert!(violations.is_empty());
    }

    #[test]
    fn power_window_matches_floquet_interior() {
        // For dp large enough, interior entries of Q^n are plain E^n entries.
        let seq = random_periodic(4, 99);
        let n = 2;
        let d = 4; // dp = 16 ≥ 4n+2
        let q = build_floquet(&seq, d).unwrap().q;
        let qn = q.pow(n);
        let oracle = CmvOracle::for_sequence(&seq).unwrap();
        let power = extended_power(&oracle, n, 0, 16);
        for j in 5..11i64 {
            for k in 5..11i64 {
                assert!(
                    (qn[(j as usize, k as usize)] - power.entry(j, k)).norm() < 1e-13,
                    "({j},{k})"
                );
            }
        }
    }

    #[test]
    fn halfline_window_unitary_interior() {
        let seq = random_infinite(3, 13);
        let w = halfline_window(&seq, 12).unwrap();
        assert!(interior_unitarity_residual(&w) < 1e-12);
    }

    #[test]
    fn floquet_derivative_entry_count() {
        let seq = random_periodic(4, 123);
        for d in [1usize, 2] {
            for slot in 0..4usize {
                for wrt in [Wirtinger::Alpha, Wirtinger::AlphaBar] {
                    let dq = floquet_derivative(&seq, d, slot, wrt).unwrap();
                    let nonzero = (0..dq.rows())
                        .flat_map(|r| (0..dq.cols()).map(move |c_| (r, c_)))
                        .filter(|&(r, c_)| dq[(r, c_)].norm() > 1e-13)
                        .count();
                    assert_eq!(nonzero, 6 * d, "slot {slot} d {d} {wrt:?}");
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let seq = random_periodic(4, 7);
        let d = 2;
        let h = 1e-6;
        for slot in 0..4usize {
            let a = seq.alphas()[slot];
            let build = |val: C64| build_floquet(&seq.with_alpha(slot, val), d).unwrap().q;
            let du = build(a + C64::new(h, 0.0))
                .sub(&build(a - C64::new(h, 0.0)))
                .scale(C64::new(0.5 / h, 0.0));
            let dv = build(a + C64::new(0.0, h))
                .sub(&build(a - C64::new(0.0, h)))
                .scale(C64::new(0.5 / h, 0.0));
            // Wirtinger combination: d/dα = (d/du - i d/dv)/2.
            let fd = du
                .sub(&dv.scale(C64::new(0.0, 1.0)))
                .scale(C64::new(0.5, 0.0));
            let analytic = floquet_derivative(&seq, d, slot, Wirtinger::Alpha).unwrap();
            assert!(
                fd.sub(&analytic).max_abs() < 1e-8,
                "slot {slot}: {}",
                fd.sub(&analytic).max_abs()
            );
        }
    }
}
