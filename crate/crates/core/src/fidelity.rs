//! Ideal target state, dynamical fidelity and the analytic fidelity model.
//!
//! The ideal state is `(|0,…,0⟩ + |1,0,…,0,1⟩)/√2` carrying the phases the
//! protocol imprints when only the intended transitions happen: the moving
//! branch follows its resonant two-level evolution, the `|0,…,0⟩` branch
//! picks up the phase of its own near-resonant two-level evolution with its
//! population held fixed, and both go through the same frame changes as the
//! simulated state.

use crate::error::{Error, Result};
use crate::evolve_exact::{from_rotating, to_rotating, ExactEvolver};
use crate::evolve_pert::{Order, PertEvolver, TwoLevelBlock};
use crate::hamiltonian::ChainParams;
use crate::protocol::{build_entanglement_protocol, Protocol, ProtocolKind};
use crate::spinbasis::{Frame, StateVector};
use crate::C64;

pub fn build_ideal_state(prot: &Protocol) -> Result<StateVector> {
    if prot.kind() != ProtocolKind::Entanglement {
        return Err(Error::Unsupported(
            "the ideal state is defined for the entanglement protocol only".into(),
        ));
    }
    let p = prot.params();
    let mut psi = StateVector::ground_state(p.qubits())?;
    for (i, pulse) in prot.pulses().iter().enumerate() {
        let rot = to_rotating(&psi, pulse.frequency)?;
        let (mut amps, _, _) = rot.into_parts();
        let moving = TwoLevelBlock::new(pulse.source.index(), pulse.qubit, pulse, p)?;
        let (m, q) = (moving.state.index(), moving.partner.index());
        let (cm, cq) = moving.evolve(amps[m], amps[q], pulse.duration);
        if i > 0 {
            // The |0,…,0⟩ branch: phase of its own two-level evolution only.
            let spectator = TwoLevelBlock::new(0, pulse.qubit, pulse, p)?;
            let c0 = amps[0];
            let (c0_next, _) = spectator.evolve(c0, C64::new(0.0, 0.0), pulse.duration);
            amps[0] = if c0_next.norm() > 0.0 {
                c0_next * (c0.norm() / c0_next.norm())
            } else {
                c0
            };
            debug_assert!(spectator.partner.index() != m && spectator.partner.index() != q);
        }
        amps[m] = cm;
        amps[q] = cq;
        let moved = StateVector::from_parts(
            amps,
            p.qubits(),
            pulse.end(),
            Frame::Rotating(pulse.frequency),
        );
        psi = from_rotating(&moved)?;
    }
    Ok(psi)
}

/// `F = |⟨ψ_i|ψ_r⟩|²`. Both states must share size, frame and time.
pub fn dynamical_fidelity(ideal: &StateVector, real: &StateVector) -> Result<f64> {
    ideal.require_frame(real.frame())?;
    let (a, b) = (ideal.time(), real.time());
    if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
        return Err(Error::TimeMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(ideal.inner(real)?.norm_sqr())
}

/// Analytic fidelity after `M = 2L-3` near-resonant pulses with
/// `ε = Ω²/(4J²)` each.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictedFidelity {
    pub near_resonant_pulses: usize,
    pub epsilon: f64,
    /// `(2 - Mε + 2√(1-Mε))/4`.
    pub ansatz: f64,
    /// `-Ω²L/(4J²) + 1 + 3Ω²/(8J²)`.
    pub linear: f64,
    /// `m_th = -Ω²/(4J²)`.
    pub slope: f64,
}

pub fn slope_th(rabi: f64, coupling: f64) -> f64 {
    -rabi * rabi / (4.0 * coupling * coupling)
}

pub fn predicted_fidelity(qubits: usize, rabi: f64, coupling: f64) -> Result<PredictedFidelity> {
    if qubits < 3 {
        return Err(Error::ProtocolUndefined(qubits));
    }
    if coupling <= 0.0 {
        return Err(Error::InvalidParameter("J must be positive".into()));
    }
    let m = 2 * qubits - 3;
    let epsilon = rabi * rabi / (4.0 * coupling * coupling);
    let me = m as f64 * epsilon;
    if me >= 1.0 {
        return Err(Error::OutOfValidity(me));
    }
    let slope = slope_th(rabi, coupling);
    Ok(PredictedFidelity {
        near_resonant_pulses: m,
        epsilon,
        ansatz: 0.25 * (2.0 - me + 2.0 * (1.0 - me).sqrt()),
        linear: slope * qubits as f64 + 1.0 + 3.0 * rabi * rabi / (8.0 * coupling * coupling),
        slope,
    })
}

/// Couplings where near-resonant leakage vanishes for a given `Ω`:
/// `J = (Ω/2)√(4k²-1)`.
pub fn fidelity_minima_j(rabi: f64, k: u32) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidParameter("2πk index k must be >= 1".into()));
    }
    let k = k as f64;
    Ok(0.5 * rabi * (4.0 * k * k - 1.0).sqrt())
}

/// Unweighted least-squares line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (zero with only two points).
    pub slope_stderr: f64,
    pub points: usize,
}

impl LinearFit {
    /// `stderr / |slope|`, infinite for a flat fit.
    pub fn relative_error(&self) -> f64 {
        if self.slope == 0.0 {
            f64::INFINITY
        } else {
            self.slope_stderr / self.slope.abs()
        }
    }
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return Err(Error::InvalidParameter(
            "a linear fit needs at least two (x, y) pairs".into(),
        ));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let ssr: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        points: n,
    })
}

/// Which propagator(s) to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PropagatorChoice {
    #[default]
    Exact,
    Pert,
    Both,
}

impl PropagatorChoice {
    pub fn name(self) -> &'static str {
        match self {
            PropagatorChoice::Exact => "exact",
            PropagatorChoice::Pert => "pert",
            PropagatorChoice::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "pert" => Ok(Self::Pert),
            "both" => Ok(Self::Both),
            other => Err(Error::InvalidParameter(format!(
                "unknown propagator {other:?}, expected exact, pert or both"
            ))),
        }
    }

    fn exact(self) -> bool {
        self != Self::Pert
    }

    fn pert(self) -> bool {
        self != Self::Exact
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FidelityReport {
    pub params: ChainParams,
    pub rabi: f64,
    pub f_exact: Option<f64>,
    pub f_pert: Option<f64>,
    pub pulses: usize,
    /// `M = 2L-3`.
    pub near_resonant_pulses: usize,
    /// Detuning of the `|0,…,0⟩` branch at each pulse.
    pub spectator_detunings: Vec<f64>,
    /// `m_th = -Ω²/(4J²)`.
    pub slope_th: f64,
    pub total_time: f64,
}

impl FidelityReport {
    /// Exact fidelity when available, perturbative otherwise.
    pub fn fidelity(&self) -> f64 {
        self.f_exact.or(self.f_pert).unwrap_or(f64::NAN)
    }

    pub fn one_minus_f(&self) -> f64 {
        1.0 - self.fidelity()
    }
}

/// Final states of one protocol run.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub report: FidelityReport,
    pub protocol: Protocol,
    pub ideal: StateVector,
    pub exact: Option<StateVector>,
    pub pert: Option<StateVector>,
}

/// Runs the entanglement protocol and scores it against the ideal state.
pub fn simulate(
    params: &ChainParams,
    rabi: f64,
    choice: PropagatorChoice,
    order: Order,
) -> Result<Simulation> {
    simulate_with(&mut ExactEvolver::new(), params, rabi, choice, order)
}

pub fn simulate_with(
    exact_ev: &mut ExactEvolver,
    params: &ChainParams,
    rabi: f64,
    choice: PropagatorChoice,
    order: Order,
) -> Result<Simulation> {
    let protocol = build_entanglement_protocol(params, rabi)?;
    let ideal = build_ideal_state(&protocol)?;
    let psi0 = StateVector::ground_state(params.qubits())?;
    let exact = if choice.exact() {
        Some(exact_ev.run_protocol(&psi0, &protocol)?)
    } else {
        None
    };
    let pert = if choice.pert() {
        Some(PertEvolver::new(order).run_protocol(&psi0, &protocol)?)
    } else {
        None
    };
    let f_exact = exact
        .as_ref()
        .map(|s| dynamical_fidelity(&ideal, s))
        .transpose()?;
    let f_pert = pert
        .as_ref()
        .map(|s| dynamical_fidelity(&ideal, s))
        .transpose()?;
    let report = FidelityReport {
        params: *params,
        rabi,
        f_exact,
        f_pert,
        pulses: protocol.len(),
        near_resonant_pulses: protocol.near_resonant_count(),
        spectator_detunings: protocol.spectator_detunings(),
        slope_th: slope_th(rabi, params.coupling()),
        total_time: protocol.total_time(),
    };
    Ok(Simulation {
        report,
        protocol,
        ideal,
        exact,
        pert,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::two_pi_k_omega;
    use crate::spinbasis::BasisState;

    fn chain(l: usize, j: f64) -> ChainParams {
        ChainParams::new(l, 0.0, 100.0, j).unwrap()
    }

    #[test]
    fn ideal_state_populations() {
        for l in 3..=8 {
            let prot = build_entanglement_protocol(&chain(l, 1.0), 0.118).unwrap();
            let ideal = build_ideal_state(&prot).unwrap();
            let mut target = vec![0; 0];
            target.extend([0, l - 1]);
            let t = BasisState::from_excited(l, &target).unwrap().index();
            assert!((ideal.probability(0) - 0.5).abs() < 1e-14);
            assert!((ideal.probability(t) - 0.5).abs() < 1e-14);
            assert!((ideal.norm() - 1.0).abs() < 1e-14);
            assert_eq!(ideal.frame(), Frame::Lab);
            assert_eq!(ideal.time(), prot.total_time());
            assert!((dynamical_fidelity(&ideal, &ideal).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn ideal_rejects_custom_protocols() {
        let p = chain(3, 1.0);
        let custom = Protocol::custom(p, vec![]).unwrap();
        assert!(matches!(
            build_ideal_state(&custom),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn fidelity_basics() {
        let a = StateVector::basis(BasisState::new(2, 3).unwrap()).unwrap();
        let b = StateVector::basis(BasisState::new(5, 3).unwrap()).unwrap();
        assert_eq!(dynamical_fidelity(&a, &a).unwrap(), 1.0);
        assert_eq!(dynamical_fidelity(&a, &b).unwrap(), 0.0);
        let rotated = a.clone().with_global_phase(1.234);
        assert!((dynamical_fidelity(&a, &rotated).unwrap() - 1.0).abs() < 1e-15);
        let moved = StateVector::from_amplitudes(a.amplitudes().to_vec(), 3.0, Frame::Lab).unwrap();
        assert!(matches!(
            dynamical_fidelity(&a, &moved),
            Err(Error::TimeMismatch { .. })
        ));
        let rot = StateVector::from_amplitudes(a.amplitudes().to_vec(), 0.0, Frame::Rotating(1.0))
            .unwrap();
        assert!(matches!(
            dynamical_fidelity(&a, &rot),
            Err(Error::FrameMismatch { .. })
        ));
    }

    #[test]
    fn predicted_slope_and_limits() {
        let pf = predicted_fidelity(6, 0.118, 1.945).unwrap();
        assert!((pf.slope - (-9.2017e-4)).abs() < 1e-7);
        assert_eq!(pf.near_resonant_pulses, 9);
        let small = predicted_fidelity(6, 1e-6, 1.0).unwrap();
        assert!((small.ansatz - 1.0).abs() < 1e-11);
        assert!((small.linear - 1.0).abs() < 1e-11);
        assert!(matches!(
            predicted_fidelity(6, 1.0, 1.0),
            Err(Error::OutOfValidity(_))
        ));
        // Linear form is the first-order expansion of the ansatz.
        let pf = predicted_fidelity(8, 0.01, 1.0).unwrap();
        assert!((pf.ansatz - pf.linear).abs() < 1e-8);
    }

    #[test]
    fn minima_round_trip() {
        assert!((fidelity_minima_j(0.118, 1).unwrap() - 0.10219).abs() < 1e-5);
        for k in 1..10 {
            let j = fidelity_minima_j(0.37, k).unwrap();
            assert!((two_pi_k_omega(j, k).unwrap() - 0.37).abs() < 1e-14);
        }
        assert!(fidelity_minima_j(0.1, 0).is_err());
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [4.0, 5.0, 6.0, 7.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 2e-3 * x).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope + 2e-3).abs() < 1e-15);
        assert!((fit.intercept - 1.0).abs() < 1e-14);
        assert!(fit.slope_stderr < 1e-15);
        let flat = linear_fit(&xs, &[0.5; 4]).unwrap();
        assert_eq!(flat.slope, 0.0);
        assert!(flat.relative_error().is_infinite());
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn fidelity_at_reference_parameters() {
        let sim = simulate(&chain(6, 1.0), 0.118, PropagatorChoice::Both, Order::Block).unwrap();
        let r = &sim.report;
        assert_eq!(r.pulses, 10);
        assert_eq!(r.near_resonant_pulses, 9);
        let f = r.f_exact.unwrap();
        assert!(f > 0.0 && f < 1.0);
        assert!((r.f_pert.unwrap() - f).abs() < 1e-3);
    }

    #[test]
    fn fidelity_invariant_under_omega0_shift() {
        let base = simulate(&chain(5, 1.3), 0.118, PropagatorChoice::Exact, Order::Block)
            .unwrap()
            .report
            .fidelity();
        for w0 in [-40.0, 17.5, 250.0] {
            let p = chain(5, 1.3).with_omega0(w0).unwrap();
            let f = simulate(&p, 0.118, PropagatorChoice::Exact, Order::Block)
                .unwrap()
                .report
                .fidelity();
            assert!((f - base).abs() < 1e-10, "ω0 = {w0}: {f} vs {base}");
        }
    }
}
