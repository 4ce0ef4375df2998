//! Computational basis of an `L`-qubit chain.
//!
//! Basis index bit `k` is the state of qubit `k`: 0 is the ground
//! single-spin state (`I^z = +1/2`), 1 the excited one (`I^z = -1/2`).
//! Bit strings are the binary form of the index, `i_{L-1} … i_1 i_0`, so
//! qubit 0 is the rightmost symbol: `|0,0,1,1⟩` on four spins has qubits 0
//! and 1 excited.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::C64;

/// Largest chain any state vector may hold (`2^20` amplitudes).
pub const MAX_QUBITS: usize = 20;

/// Largest chain the dense exact propagator accepts.
pub const MAX_EXACT_QUBITS: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisState {
    index: usize,
    qubits: usize,
}

impl BasisState {
    pub fn new(index: usize, qubits: usize) -> Result<Self> {
        check_qubits(qubits, MAX_QUBITS)?;
        if index >> qubits != 0 {
            return Err(Error::BasisOutOfRange { index, qubits });
        }
        Ok(Self { index, qubits })
    }

    /// The all-ground state `|0,…,0⟩`.
    pub fn ground(qubits: usize) -> Result<Self> {
        Self::new(0, qubits)
    }

    /// Builds a state from the set of excited qubits.
    pub fn from_excited(qubits: usize, excited: &[usize]) -> Result<Self> {
        let mut s = Self::ground(qubits)?;
        for &k in excited {
            if s.is_excited(k)? {
                return Err(Error::InvalidParameter(format!("qubit {k} listed twice")));
            }
            s = s.flip(k)?;
        }
        Ok(s)
    }

    /// Parses a bit string written with qubit 0 rightmost (commas optional).
    pub fn parse_bits(text: &str) -> Result<Self> {
        let bits: Vec<char> = text.chars().filter(|c| *c != ',').collect();
        let mut index = 0usize;
        for (k, c) in bits.iter().rev().enumerate() {
            match c {
                '0' => {}
                '1' => index |= 1 << k,
                _ => return Err(Error::InvalidParameter(format!("bad bit string {text:?}"))),
            }
        }
        Self::new(index, bits.len())
    }

    pub fn index(self) -> usize {
        self.index
    }

    pub fn qubits(self) -> usize {
        self.qubits
    }

    fn check(self, k: usize) -> Result<()> {
        if k >= self.qubits {
            return Err(Error::QubitOutOfRange {
                index: k,
                qubits: self.qubits,
            });
        }
        Ok(())
    }

    pub fn is_excited(self, k: usize) -> Result<bool> {
        self.check(k)?;
        Ok(self.index >> k & 1 == 1)
    }

    /// Eigenvalue of `I^z_k`: `+1/2` for a ground spin, `-1/2` for an excited one.
    pub fn spin_z(self, k: usize) -> Result<f64> {
        self.check(k)?;
        Ok(spin_z_of(self.index, k))
    }

    pub fn flip(self, k: usize) -> Result<Self> {
        self.check(k)?;
        Ok(Self {
            index: self.index ^ (1 << k),
            qubits: self.qubits,
        })
    }

    /// `Σ_k I^z_k` for this state.
    pub fn total_spin_z(self) -> f64 {
        total_spin_z_of(self.index, self.qubits)
    }

    pub fn excitation_count(self) -> u32 {
        self.index.count_ones()
    }

    /// Bit string with qubit 0 rightmost.
    pub fn bit_string(self) -> String {
        (0..self.qubits)
            .rev()
            .map(|k| if self.index >> k & 1 == 1 { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}⟩", self.bit_string())
    }
}

#[inline]
pub(crate) fn spin_z_of(index: usize, k: usize) -> f64 {
    if index >> k & 1 == 0 {
        0.5
    } else {
        -0.5
    }
}

#[inline]
pub(crate) fn total_spin_z_of(index: usize, qubits: usize) -> f64 {
    0.5 * qubits as f64 - index.count_ones() as f64
}

pub(crate) fn check_qubits(qubits: usize, cap: usize) -> Result<()> {
    if qubits == 0 {
        return Err(Error::InvalidParameter(
            "chain needs at least one spin".into(),
        ));
    }
    if qubits > cap {
        return Err(Error::Capacity { qubits, cap });
    }
    Ok(())
}

/// Which frame a state's amplitudes are expressed in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Frame {
    Lab,
    /// Frame rotating with the given pulse frequency.
    Rotating(f64),
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frame::Lab => write!(f, "lab"),
            Frame::Rotating(nu) => write!(f, "rotating(ν={nu})"),
        }
    }
}

/// `2^L` complex amplitudes at a given time, in a given frame.
///
/// Amplitudes are the full coefficients in the fixed computational basis;
/// no dynamical phase is factored out.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
    qubits: usize,
    time: f64,
    frame: Frame,
}

impl StateVector {
    /// `|0,…,0⟩` in the lab frame at `t = 0`.
    pub fn ground_state(qubits: usize) -> Result<Self> {
        Self::basis(BasisState::ground(qubits)?)
    }

    /// A single basis state in the lab frame at `t = 0`.
    pub fn basis(state: BasisState) -> Result<Self> {
        let mut amplitudes = vec![C64::new(0.0, 0.0); 1 << state.qubits()];
        amplitudes[state.index()] = C64::new(1.0, 0.0);
        Ok(Self {
            amplitudes,
            qubits: state.qubits(),
            time: 0.0,
            frame: Frame::Lab,
        })
    }

    pub fn from_amplitudes(amplitudes: Vec<C64>, time: f64, frame: Frame) -> Result<Self> {
        let n = amplitudes.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "{n} amplitudes is not a power of two"
            )));
        }
        let qubits = n.trailing_zeros() as usize;
        check_qubits(qubits, MAX_QUBITS)?;
        Ok(Self {
            amplitudes,
            qubits,
            time,
            frame,
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, state: BasisState) -> C64 {
        self.amplitudes[state.index()]
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amplitudes[index].norm_sqr()
    }

    /// `⟨self|other⟩`, ignoring frame and time tags.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn with_global_phase(mut self, phase: f64) -> Self {
        let z = C64::from_polar(1.0, phase);
        for c in &mut self.amplitudes {
            *c *= z;
        }
        self
    }

    pub(crate) fn into_parts(self) -> (Vec<C64>, f64, Frame) {
        (self.amplitudes, self.time, self.frame)
    }

    pub(crate) fn from_parts(amplitudes: Vec<C64>, qubits: usize, time: f64, frame: Frame) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << qubits);
        Self {
            amplitudes,
            qubits,
            time,
            frame,
        }
    }

    pub(crate) fn renormalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for c in &mut self.amplitudes {
                *c /= n;
            }
        }
    }

    pub(crate) fn require_frame(&self, expected: Frame) -> Result<()> {
        if self.frame != expected {
            return Err(Error::FrameMismatch {
                expected,
                found: self.frame,
            });
        }
        Ok(())
    }

    /// Plain-text dump: one row per basis state with
    /// `index bits re im |c|^2`.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# t = {:.16e}, frame = {}", self.time, self.frame)?;
        writeln!(w, "# index bits re im prob")?;
        for (i, c) in self.amplitudes.iter().enumerate() {
            let bits = BasisState {
                index: i,
                qubits: self.qubits,
            }
            .bit_string();
            writeln!(
                w,
                "{i} {bits} {:.16e} {:.16e} {:.16e}",
                c.re,
                c.im,
                c.norm_sqr()
            )?;
        }
        Ok(())
    }
}
