//! Hamiltonian flows `α̇_j = {α_j, H}` and their conservation diagnostics.
//!
//! With the bracket of this hierarchy, `{α_j, H} = -i ρ_j² ∂H/∂ᾱ_j`, so any
//! generator with a Wirtinger gradient integrates directly. The integrator
//! is a fixed-step classical RK4 with step rejection at the disk boundary;
//! it is deliberately not structure-preserving — drift of the monitored
//! invariants at the O(dt⁴) rate is itself one of the acceptance signals.
//!
//! Every flow here is defined through the bracket, in all three settings.
//! The half-line lattice equation is sometimes written with the opposite
//! sign of time and without the `-2α_j` gauge term; that is a rephasing of
//! the same dynamics and is not modeled as a separate vector field.

use crate::coeffs::{SequenceCase, VerblunskySequence};
use crate::hamiltonians::{self, HamiltonianSpec};
use crate::lax::GradientMethod;
use crate::poisson::{fd_gradient, PoissonError};
use crate::{C64, FD_STEP};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("trajectory left the unit polydisk at t = {t} (slot {index})")]
    DiskExit { t: f64, index: usize },
    #[error("step at t = {t} still exits the disk after {halvings} halvings")]
    StepRejected { t: f64, halvings: u32 },
    #[error(transparent)]
    Gradient(#[from] PoissonError),
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub hamiltonian: HamiltonianSpec,
    pub t_end: f64,
    pub dt: f64,
    /// Monitors are evaluated every this many accepted steps (and always at
    /// the endpoints).
    pub monitor_every: usize,
    pub gradient_method: GradientMethod,
}

impl FlowConfig {
    pub fn new(hamiltonian: HamiltonianSpec, t_end: f64, dt: f64) -> Self {
        assert!(dt > 0.0 && t_end >= 0.0);
        Self {
            hamiltonian,
            t_end,
            dt,
            monitor_every: 10,
            gradient_method: GradientMethod::Analytic,
        }
    }
}

/// Conserved-quantity snapshot along a trajectory.
#[derive(Debug, Clone)]
pub struct Monitors {
    pub k0: f64,
    /// `K_1..K_3`.
    pub k: Vec<C64>,
    /// Characteristic-polynomial coefficients `c_1..c_p` of `Q_(1)`
    /// (periodic) or of `C_f` (finite).
    pub char_coeffs: Vec<C64>,
    /// The commuting-integral vector (periodic only).
    pub invariant: Vec<f64>,
    /// `max |(U U* - I)_{jk}|` for the monitored unitary.
    pub unitarity: f64,
    pub max_mod: f64,
}

impl Monitors {
    /// Flatten to named real values, in a stable order.
    pub fn named(&self) -> Vec<(String, f64)> {
        let mut out = vec![("K0".to_string(), self.k0)];
        for (i, k) in self.k.iter().enumerate() {
            out.push((format!("ReK{}", i + 1), k.re));
            out.push((format!("ImK{}", i + 1), k.im));
        }
        for (i, c) in self.char_coeffs.iter().enumerate() {
            out.push((format!("c{}_re", i + 1), c.re));
            out.push((format!("c{}_im", i + 1), c.im));
        }
        for (i, v) in self.invariant.iter().enumerate() {
            out.push((format!("inv{i}"), *v));
        }
        out.push(("unitarity".to_string(), self.unitarity));
        out.push(("maxmod".to_string(), self.max_mod));
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub alphas: Vec<C64>,
    pub monitors: Monitors,
}

/// `α̇_j = {α_j, H} = -i ρ_j² ∂H/∂ᾱ_j` over the active slots.
pub fn vector_field(
    h: &HamiltonianSpec,
    seq: &VerblunskySequence,
    method: GradientMethod,
) -> Result<Vec<C64>, FlowError> {
    let grad = match method {
        GradientMethod::Analytic => h.gradient(seq)?,
        GradientMethod::Fd => fd_gradient(|s| h.eval(s), seq, FD_STEP, seq.active_slots())?,
    };
    let mut field = Vec::with_capacity(seq.active_slots());
    for j in 0..seq.active_slots() {
        let rho2 = 1.0 - seq.alphas()[j].norm_sqr();
        field.push(C64::new(0.0, -rho2) * grad.d_alphabar[j]);
    }
    Ok(field)
}

fn state_of(seq: &VerblunskySequence) -> Vec<C64> {
    seq.alphas()[..seq.active_slots()].to_vec()
}

fn seq_with_state(template: &VerblunskySequence, state: &[C64]) -> VerblunskySequence {
    let mut alphas = state.to_vec();
    let raw_period = match template.case() {
        SequenceCase::Periodic => template.raw_period(),
        SequenceCase::Finite => {
            alphas.push(C64::new(-1.0, 0.0));
            0
        }
        SequenceCase::InfiniteTruncated => 0,
    };
    VerblunskySequence::from_parts_unchecked(template.case(), alphas, raw_period)
}

fn max_mod(state: &[C64]) -> f64 {
    state.iter().map(|a| a.norm()).fold(0.0, f64::max)
}

fn monitors_for(seq: &VerblunskySequence) -> Monitors {
    let k: Vec<C64> = (1..=3).map(|n| HamiltonianSpec::K(n).eval(seq)).collect();
    let (char_coeffs, invariant, unitarity) = match seq.case() {
        SequenceCase::Periodic => {
            let q = crate::cmv::build_floquet(seq, 1).expect("periodic").q;
            let coeffs = hamiltonians::char_poly_coeffs(&q).expect("small matrix");
            (
                coeffs[1..].to_vec(),
                hamiltonians::invariant_vector(seq),
                q.unitarity_residual(),
            )
        }
        SequenceCase::Finite => {
            let c = crate::cmv::build_finite_cmv(seq).expect("finite").c;
            let coeffs = hamiltonians::char_poly_coeffs(&c).expect("small matrix");
            (coeffs[1..].to_vec(), Vec::new(), c.unitarity_residual())
        }
        SequenceCase::InfiniteTruncated => {
            let w = crate::cmv::halfline_window(seq, seq.len() + 8).expect("window");
            (
                Vec::new(),
                Vec::new(),
                crate::cmv::interior_unitarity_residual(&w),
            )
        }
    };
    Monitors {
        k0: hamiltonians::k0(seq),
        k,
        char_coeffs,
        invariant,
        unitarity,
        max_mod: max_mod(&seq.alphas()[..seq.active_slots()]),
    }
}

/// Integrate forward in time. See [`integrate_signed`] for time reversal.
pub fn integrate(
    config: &FlowConfig,
    seq: &VerblunskySequence,
) -> Result<Vec<TrajectoryRecord>, FlowError> {
    integrate_signed(config, seq, 1.0)
}

/// Classical RK4 with step rejection: a trial step whose result touches
/// `|α_j| ≥ 1 - 1e-9` halves the step and retries, up to 20 halvings.
/// `sign = -1.0` integrates the time-reversed flow.
pub fn integrate_signed(
    config: &FlowConfig,
    seq: &VerblunskySequence,
    sign: f64,
) -> Result<Vec<TrajectoryRecord>, FlowError> {
    const EDGE: f64 = 1.0 - 1e-9;
    let field = |state: &[C64], t: f64| -> Result<Vec<C64>, FlowError> {
        let s = seq_with_state(seq, state);
        for (j, a) in state.iter().enumerate() {
            if a.norm() >= 1.0 {
                return Err(FlowError::DiskExit { t, index: j });
            }
        }
        let mut f = vector_field(&config.hamiltonian, &s, config.gradient_method)?;
        for v in &mut f {
            *v *= sign;
        }
        Ok(f)
    };

    let mut records = Vec::new();
    let mut state = state_of(seq);
    let mut t = 0.0;
    let mut dt = config.dt;
    let mut accepted: usize = 0;

    records.push(TrajectoryRecord {
        t,
        alphas: state.clone(),
        monitors: monitors_for(seq),
    });

    while t < config.t_end - 1e-15 {
        let step = dt.min(config.t_end - t);
        let mut halvings = 0u32;
        let mut h = step;
        let next = loop {
            match rk4_step(&field, &state, t, h) {
                Ok(candidate) if max_mod(&candidate) < EDGE => break candidate,
                Ok(_) | Err(FlowError::DiskExit { .. }) => {
                    halvings += 1;
                    if halvings > 20 {
                        return Err(FlowError::StepRejected { t, halvings });
                    }
                    h *= 0.5;
                }
                Err(e) => return Err(e),
            }
        };
        if halvings > 0 {
            // Keep the reduced step; the bracket degenerates at the boundary.
            dt = h;
        }
        state = next;
        t += h;
        accepted += 1;
        if accepted % config.monitor_every == 0 || t >= config.t_end - 1e-15 {
            let s = seq_with_state(seq, &state);
            records.push(TrajectoryRecord {
                t,
                alphas: state.clone(),
                monitors: monitors_for(&s),
            });
        }
    }
    Ok(records)
}

fn rk4_step(
    field: &impl Fn(&[C64], f64) -> Result<Vec<C64>, FlowError>,
    state: &[C64],
    t: f64,
    dt: f64,
) -> Result<Vec<C64>, FlowError> {
    let advance = |base: &[C64], k: &[C64], h: f64| -> Vec<C64> {
        base.iter().zip(k).map(|(b, kk)| b + h * kk).collect()
    };
    let k1 = field(state, t)?;
    let k2 = field(&advance(state, &k1, 0.5 * dt), t + 0.5 * dt)?;
    let k3 = field(&advance(state, &k2, 0.5 * dt), t + 0.5 * dt)?;
    let k4 = field(&advance(state, &k3, dt), t + dt)?;
    Ok(state
        .iter()
        .enumerate()
        .map(|(j, y)| y + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
        .collect())
}

/// Per-monitor max absolute deviation from the initial record.
pub fn drift_report(trajectory: &[TrajectoryRecord]) -> BTreeMap<String, f64> {
    assert!(!trajectory.is_empty());
    let initial: BTreeMap<String, f64> = trajectory[0].monitors.named().into_iter().collect();
    let mut drift: BTreeMap<String, f64> = initial.keys().map(|k| (k.clone(), 0.0)).collect();
    for record in trajectory.iter().skip(1) {
        for (name, value) in record.monitors.named() {
            let base = initial[&name];
            let entry = drift.get_mut(&name).expect("stable monitor names");
            *entry = entry.max((value - base).abs());
        }
    }
    drift
}
