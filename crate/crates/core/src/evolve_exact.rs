//! Exact time-ordered propagation through a protocol.
//!
//! Within a pulse the rotating-frame Hamiltonian is stationary, so
//! `U_p = V exp(-iΛτ) V†` from one dense Hermitian eigendecomposition. Lab
//! amplitudes are moved into the pulse's rotating frame at its start time and
//! back at its end time.

use std::collections::HashMap;
use std::sync::Arc;

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::hamiltonian::{build_rot_ham, ChainParams, RotFrameHam};
use crate::protocol::{Protocol, Pulse};
use crate::spinbasis::{check_qubits, total_spin_z_of, Frame, StateVector, MAX_EXACT_QUBITS};
use crate::C64;

/// Lab → frame rotating at `nu`, at the state's own time:
/// `c_n ← c_n exp(-iνt Σ_k I^z_k(n))`.
pub fn to_rotating(psi: &StateVector, nu: f64) -> Result<StateVector> {
    psi.require_frame(Frame::Lab)?;
    Ok(rotate(psi.clone(), -nu, Frame::Rotating(nu)))
}

/// Rotating frame → lab, at the state's own time.
pub fn from_rotating(psi: &StateVector) -> Result<StateVector> {
    match psi.frame() {
        Frame::Rotating(nu) => Ok(rotate(psi.clone(), nu, Frame::Lab)),
        Frame::Lab => Err(Error::FrameMismatch {
            expected: Frame::Rotating(f64::NAN),
            found: Frame::Lab,
        }),
    }
}

fn rotate(psi: StateVector, sign_nu: f64, frame: Frame) -> StateVector {
    let qubits = psi.qubits();
    let (mut amps, t, _) = psi.into_parts();
    // Σ I^z takes only L+1 values; reuse the phase per excitation count.
    let phases: Vec<C64> = (0..=qubits)
        .map(|n| {
            let sz = 0.5 * qubits as f64 - n as f64;
            C64::from_polar(1.0, sign_nu * t * sz)
        })
        .collect();
    for (i, c) in amps.iter_mut().enumerate() {
        debug_assert_eq!(
            total_spin_z_of(i, qubits),
            0.5 * qubits as f64 - i.count_ones() as f64
        );
        *c *= phases[i.count_ones() as usize];
    }
    StateVector::from_parts(amps, qubits, t, frame)
}

enum Eigenvectors {
    Real(Mat<f64>),
    Complex(Mat<C64>),
}

/// Eigendecomposition of one rotating-frame Hamiltonian.
pub struct Eigensystem {
    values: Vec<f64>,
    vectors: Eigenvectors,
}

impl Eigensystem {
    pub fn new(h: &RotFrameHam) -> Result<Self> {
        check_qubits(h.params().qubits(), MAX_EXACT_QUBITS)?;
        let n = h.dim();
        let diag = h.diagonal();
        let l = h.params().qubits();
        if h.is_real() {
            let off = -0.5 * h.rabi();
            let mut m = Mat::<f64>::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = diag[i];
                for k in 0..l {
                    m[(i ^ (1 << k), i)] = off;
                }
            }
            let eig = m
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Eigen(format!("{e:?}")))?;
            let values = (0..n).map(|i| eig.S().column_vector()[i]).collect();
            Ok(Self {
                values,
                vectors: Eigenvectors::Real(eig.U().to_owned()),
            })
        } else {
            let mut m = Mat::<C64>::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = C64::new(diag[i], 0.0);
                for k in 0..l {
                    let j = i ^ (1 << k);
                    m[(j, i)] = h.flip_element(j, k);
                }
            }
            let eig = m
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Eigen(format!("{e:?}")))?;
            let values = (0..n).map(|i| eig.S().column_vector()[i].re).collect();
            Ok(Self {
                values,
                vectors: Eigenvectors::Complex(eig.U().to_owned()),
            })
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V exp(-iΛτ) V† v`.
    pub fn evolve(&self, v: &[C64], tau: f64) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(v.len(), n);
        let phase = |i: usize| C64::from_polar(1.0, -self.values[i] * tau);
        match &self.vectors {
            Eigenvectors::Real(u) => {
                let x = Mat::<f64>::from_fn(n, 2, |i, j| if j == 0 { v[i].re } else { v[i].im });
                let y = u.transpose() * &x;
                let y = Mat::<f64>::from_fn(n, 2, |i, j| {
                    let z = C64::new(y[(i, 0)], y[(i, 1)]) * phase(i);
                    if j == 0 {
                        z.re
                    } else {
                        z.im
                    }
                });
                let z = u * &y;
                (0..n).map(|i| C64::new(z[(i, 0)], z[(i, 1)])).collect()
            }
            Eigenvectors::Complex(u) => {
                let x = Mat::<C64>::from_fn(n, 1, |i, _| v[i]);
                let y = u.adjoint() * &x;
                let y = Mat::<C64>::from_fn(n, 1, |i, _| y[(i, 0)] * phase(i));
                let z = u * &y;
                (0..n).map(|i| z[(i, 0)]).collect()
            }
        }
    }
}

/// Cached eigensystem paired with a pulse duration.
#[derive(Clone)]
pub struct PulsePropagator {
    eigen: Arc<Eigensystem>,
    duration: f64,
}

impl PulsePropagator {
    pub fn new(h: &RotFrameHam, duration: f64) -> Result<Self> {
        Ok(Self {
            eigen: Arc::new(Eigensystem::new(h)?),
            duration,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn eigensystem(&self) -> &Eigensystem {
        &self.eigen
    }

    /// Applies `exp(-iHτ)` to rotating-frame amplitudes.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.eigen.evolve(v, self.duration)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct CacheKey([u64; 7]);

impl CacheKey {
    fn new(p: &ChainParams, pulse: &Pulse) -> Self {
        Self([
            pulse.frequency.to_bits(),
            pulse.rabi.to_bits(),
            pulse.phase.to_bits(),
            p.qubits() as u64,
            p.omega0().to_bits(),
            p.gradient().to_bits(),
            p.coupling().to_bits(),
        ])
    }
}

/// Exact propagator with a per-instance eigendecomposition cache keyed by
/// `(ν, Ω, φ, params)`. Each sweep worker owns its own instance.
#[derive(Default)]
pub struct ExactEvolver {
    cache: HashMap<CacheKey, Arc<Eigensystem>>,
}

impl ExactEvolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }

    pub fn propagator(&mut self, pulse: &Pulse, p: &ChainParams) -> Result<PulsePropagator> {
        check_qubits(p.qubits(), MAX_EXACT_QUBITS)?;
        let key = CacheKey::new(p, pulse);
        let eigen = match self.cache.get(&key) {
            Some(e) => e.clone(),
            None => {
                let e = Arc::new(Eigensystem::new(&build_rot_ham(p, pulse)?)?);
                self.cache.insert(key, e.clone());
                e
            }
        };
        Ok(PulsePropagator {
            eigen,
            duration: pulse.duration,
        })
    }

    /// One pulse: lab → rotating at `t_start`, `exp(-iH^(p)τ)`, rotating → lab
    /// at `t_start + τ`.
    pub fn propagate_pulse(
        &mut self,
        psi: &StateVector,
        pulse: &Pulse,
        p: &ChainParams,
    ) -> Result<StateVector> {
        check_pulse_entry(psi, pulse, p)?;
        let prop = self.propagator(pulse, p)?;
        let rot = to_rotating(psi, pulse.frequency)?;
        let evolved = prop.apply(rot.amplitudes());
        let moved = StateVector::from_parts(
            evolved,
            psi.qubits(),
            pulse.end(),
            Frame::Rotating(pulse.frequency),
        );
        from_rotating(&moved)
    }

    pub fn run_protocol(&mut self, psi0: &StateVector, prot: &Protocol) -> Result<StateVector> {
        self.run_protocol_with(psi0, prot, |_, _| {})
    }

    /// Like [`ExactEvolver::run_protocol`], calling `observe(i, state)` after
    /// pulse `i`.
    pub fn run_protocol_with<F>(
        &mut self,
        psi0: &StateVector,
        prot: &Protocol,
        mut observe: F,
    ) -> Result<StateVector>
    where
        F: FnMut(usize, &StateVector),
    {
        check_start(psi0)?;
        let mut psi = psi0.clone();
        for (i, pulse) in prot.pulses().iter().enumerate() {
            psi = self.propagate_pulse(&psi, pulse, prot.params())?;
            observe(i, &psi);
        }
        Ok(psi)
    }
}

pub fn propagate_pulse(psi: &StateVector, pulse: &Pulse, p: &ChainParams) -> Result<StateVector> {
    ExactEvolver::new().propagate_pulse(psi, pulse, p)
}

pub fn run_protocol(psi0: &StateVector, prot: &Protocol) -> Result<StateVector> {
    ExactEvolver::new().run_protocol(psi0, prot)
}

pub(crate) fn check_start(psi0: &StateVector) -> Result<()> {
    if psi0.time() != 0.0 {
        return Err(Error::TimeMismatch {
            expected: 0.0,
            found: psi0.time(),
        });
    }
    psi0.require_frame(Frame::Lab)
}

pub(crate) fn check_pulse_entry(psi: &StateVector, pulse: &Pulse, p: &ChainParams) -> Result<()> {
    psi.require_frame(Frame::Lab)?;
    if psi.qubits() != p.qubits() {
        return Err(Error::DimensionMismatch {
            left: psi.dim(),
            right: p.dim(),
        });
    }
    if (psi.time() - pulse.start).abs() > 1e-9 * pulse.start.abs().max(1.0) {
        return Err(Error::TimeMismatch {
            expected: pulse.start,
            found: psi.time(),
        });
    }
    Ok(())
}
