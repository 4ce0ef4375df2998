//! Static chain Hamiltonian and the per-pulse rotating-frame Hamiltonian.
//!
//! ```text
//! H_0   = -Σ_k ω_k I^z_k - 2J Σ_k I^z_k I^z_{k+1}
//! H^(p) = -Σ_k (ξ_k I^z_k + α I^x_k - β I^y_k) - 2J Σ_k I^z_k I^z_{k+1}
//! ```
//!
//! with `ξ_k = ω_k - ν_p`, `α = Ω cos φ`, `β = Ω sin φ`. The matrix is kept as
//! a diagonal plus the implicit single-flip (hypercube) coupling pattern.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::protocol::Pulse;
use crate::spinbasis::{check_qubits, spin_z_of, BasisState, MAX_QUBITS};
use crate::C64;

/// Static model of the chain: `ω_k = ω_0 + a·k`, nearest-neighbour coupling `J`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainParams {
    qubits: usize,
    omega0: f64,
    gradient: f64,
    coupling: f64,
}

impl ChainParams {
    pub fn new(qubits: usize, omega0: f64, gradient: f64, coupling: f64) -> Result<Self> {
        check_qubits(qubits, MAX_QUBITS)?;
        if !(omega0.is_finite() && gradient.is_finite() && coupling.is_finite()) {
            return Err(Error::InvalidParameter(
                "chain parameters must be finite".into(),
            ));
        }
        if gradient <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "frequency step a must be positive, got {gradient}"
            )));
        }
        if coupling < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Ising coupling J must be non-negative, got {coupling}"
            )));
        }
        Ok(Self {
            qubits,
            omega0,
            gradient,
            coupling,
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// Larmor frequency step `a` between neighbouring sites.
    pub fn gradient(&self) -> f64 {
        self.gradient
    }

    /// Ising coupling `J`.
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn larmor(&self, k: usize) -> f64 {
        self.omega0 + self.gradient * k as f64
    }

    pub fn with_qubits(&self, qubits: usize) -> Result<Self> {
        Self::new(qubits, self.omega0, self.gradient, self.coupling)
    }

    pub fn with_omega0(&self, omega0: f64) -> Result<Self> {
        Self::new(self.qubits, omega0, self.gradient, self.coupling)
    }

    pub fn with_gradient(&self, gradient: f64) -> Result<Self> {
        Self::new(self.qubits, self.omega0, gradient, self.coupling)
    }

    pub fn with_coupling(&self, coupling: f64) -> Result<Self> {
        Self::new(self.qubits, self.omega0, self.gradient, coupling)
    }
}

/// Diagonal energy of basis index `i` in the frame rotating at `nu`
/// (`nu = 0` is the lab frame).
pub(crate) fn diagonal_energy(index: usize, p: &ChainParams, nu: f64) -> f64 {
    let l = p.qubits;
    let mut e = 0.0;
    for k in 0..l {
        let sz = spin_z_of(index, k);
        e -= (p.larmor(k) - nu) * sz;
        if k + 1 < l {
            e -= 2.0 * p.coupling * sz * spin_z_of(index, k + 1);
        }
    }
    e
}

/// Signed energy change `E(flip(s,k)) - E(s)` from the local Zeeman and
/// neighbour Ising terms, in the frame rotating at `nu`.
pub(crate) fn flip_energy(index: usize, k: usize, p: &ChainParams, nu: f64) -> f64 {
    let sz = spin_z_of(index, k);
    let mut field = p.larmor(k) - nu;
    if k > 0 {
        field += 2.0 * p.coupling * spin_z_of(index, k - 1);
    }
    if k + 1 < p.qubits {
        field += 2.0 * p.coupling * spin_z_of(index, k + 1);
    }
    2.0 * sz * field
}

/// Lab-frame eigenvalue of `H_0` for a basis state.
pub fn h0_energy(s: BasisState, p: &ChainParams) -> Result<f64> {
    check_chain(s, p)?;
    Ok(diagonal_energy(s.index(), p, 0.0))
}

/// `(k, |E_0(flip(s,k)) - E_0(s)|)` for every spin of the chain, lab frame.
pub fn single_flip_deltas(s: BasisState, p: &ChainParams) -> Result<Vec<(usize, f64)>> {
    check_chain(s, p)?;
    Ok((0..p.qubits)
        .map(|k| (k, flip_energy(s.index(), k, p, 0.0).abs()))
        .collect())
}

fn check_chain(s: BasisState, p: &ChainParams) -> Result<()> {
    if s.qubits() != p.qubits {
        return Err(Error::InvalidParameter(format!(
            "state has {} qubits but the chain has {}",
            s.qubits(),
            p.qubits
        )));
    }
    Ok(())
}

/// Stationary Hamiltonian of one pulse in the frame rotating at `ν_p`.
#[derive(Clone, Debug)]
pub struct RotFrameHam {
    params: ChainParams,
    nu: f64,
    rabi: f64,
    phase: f64,
    diagonal: Vec<f64>,
}

impl RotFrameHam {
    pub fn new(params: ChainParams, nu: f64, rabi: f64, phase: f64) -> Result<Self> {
        if !(nu.is_finite() && rabi.is_finite() && phase.is_finite()) {
            return Err(Error::InvalidParameter(
                "pulse fields must be finite".into(),
            ));
        }
        let diagonal = (0..params.dim())
            .map(|i| diagonal_energy(i, &params, nu))
            .collect();
        Ok(Self {
            params,
            nu,
            rabi,
            phase,
            diagonal,
        })
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn frequency(&self) -> f64 {
        self.nu
    }

    pub fn rabi(&self) -> f64 {
        self.rabi
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    /// `ξ_k = ω_k - ν`.
    pub fn detuning(&self, k: usize) -> f64 {
        self.params.larmor(k) - self.nu
    }

    pub fn alpha(&self) -> f64 {
        self.rabi * self.phase.cos()
    }

    pub fn beta(&self) -> f64 {
        self.rabi * self.phase.sin()
    }

    /// True when every matrix element is real (`φ = 0`).
    pub fn is_real(&self) -> bool {
        self.phase == 0.0
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// `⟨row|H|col⟩` for `col = flip(row, k)`: `-(α + iβ)/2` when the flip
    /// lowers qubit `k` into `row` (row has it in the ground state), its
    /// conjugate otherwise.
    pub fn flip_element(&self, row: usize, k: usize) -> C64 {
        let half = -0.5 * self.rabi;
        if row >> k & 1 == 0 {
            C64::from_polar(1.0, self.phase) * half
        } else {
            C64::from_polar(1.0, -self.phase) * half
        }
    }

    /// General matrix element `⟨row|H|col⟩`.
    pub fn element(&self, row: usize, col: usize) -> C64 {
        if row == col {
            return C64::new(self.diagonal[row], 0.0);
        }
        let diff = row ^ col;
        if diff.is_power_of_two() {
            self.flip_element(row, diff.trailing_zeros() as usize)
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// `H·v` using the sparse structure.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim());
        let l = self.params.qubits;
        let up = C64::from_polar(1.0, self.phase) * (-0.5 * self.rabi);
        let down = up.conj();
        (0..v.len())
            .map(|i| {
                let mut acc = v[i] * self.diagonal[i];
                for k in 0..l {
                    let j = i ^ (1 << k);
                    acc += if i >> k & 1 == 0 { up } else { down } * v[j];
                }
                acc
            })
            .collect()
    }

    /// Row-major dense matrix.
    pub fn to_dense(&self) -> Vec<C64> {
        let n = self.dim();
        let mut m = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            m[i * n + i] = C64::new(self.diagonal[i], 0.0);
            for k in 0..self.params.qubits {
                let j = i ^ (1 << k);
                m[i * n + j] = self.flip_element(i, k);
            }
        }
        m
    }

    /// `⟨v|H|v⟩` (real for Hermitian `H`).
    pub fn expectation(&self, v: &[C64]) -> f64 {
        self.apply(v)
            .iter()
            .zip(v)
            .map(|(hv, c)| (c.conj() * hv).re)
            .sum()
    }
}

pub fn build_rot_ham(p: &ChainParams, pulse: &Pulse) -> Result<RotFrameHam> {
    RotFrameHam::new(*p, pulse.frequency, pulse.rabi, pulse.phase)
}

/// Values of `J` at which an unwanted transition becomes exactly resonant:
/// `a·k/4` and `a·k/2` for `k = 1..=L-3`, `a·k` and `a·k/3` for `k = 1..=L-2`.
/// Sorted ascending, exact duplicates removed.
pub fn fake_transitions(p: &ChainParams) -> Result<Vec<f64>> {
    let l = p.qubits;
    if l < 3 {
        return Err(Error::ProtocolUndefined(l));
    }
    let mut ratios = BTreeSet::new();
    let families: [(u64, usize); 4] = [(4, l - 3), (2, l - 3), (1, l - 2), (3, l - 2)];
    for (den, kmax) in families {
        for k in 1..=kmax as u64 {
            let g = gcd(k, den);
            ratios.insert((k / g, den / g));
        }
    }
    let mut out: Vec<f64> = ratios
        .into_iter()
        .map(|(num, den)| p.gradient * num as f64 / den as f64)
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Closest fake-transition value to `J` and its relative distance
/// `|J - J_fake| / J_fake`.
pub fn nearest_fake_transition(p: &ChainParams) -> Option<(f64, f64)> {
    let j = p.coupling;
    fake_transitions(p)
        .ok()?
        .into_iter()
        .map(|f| (f, (j - f).abs() / f))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Border estimate of stationary chaos for one pulse with `ν = ω_0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChaosEstimate {
    /// `M_f`: number of states coupled to a given one.
    pub connectivity: usize,
    /// `(ΔE)_f`: largest energy change over the couplings.
    pub energy_spread: f64,
    /// `δ_f = (ΔE)_f / M_f`.
    pub mean_spacing: f64,
    /// `Ω_cr = 2 δ_f`, from `Ω/2 > δ_f`.
    pub critical_rabi: f64,
    /// The rounded form `a + J/L`.
    pub critical_rabi_approx: f64,
}

impl ChaosEstimate {
    /// Whether `Ω` exceeds the border.
    pub fn is_chaotic(&self, rabi: f64) -> bool {
        rabi / 2.0 > self.mean_spacing
    }
}

pub fn chaos_border(p: &ChainParams) -> ChaosEstimate {
    let l = p.qubits as f64;
    let a = p.gradient;
    let j = p.coupling;
    let energy_spread = a * (l - 1.0) + j;
    let mean_spacing = energy_spread / l;
    ChaosEstimate {
        connectivity: p.qubits,
        energy_spread,
        mean_spacing,
        critical_rabi: 2.0 * mean_spacing,
        critical_rabi_approx: a + j / l,
    }
}

/// Connectivity statistics found by scanning every matrix element of the
/// `ν = ω_0` rotating-frame Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingCensus {
    pub min_connectivity: usize,
    pub max_connectivity: usize,
    pub mean_connectivity: f64,
    /// Largest `|E_0^(2) - E_0^(1)|` over coupled pairs.
    pub max_spread: f64,
}

/// Largest chain the quadratic-cost census accepts.
pub const MAX_CENSUS_QUBITS: usize = 12;

pub fn coupling_census(p: &ChainParams) -> Result<CouplingCensus> {
    check_qubits(p.qubits, MAX_CENSUS_QUBITS)?;
    let h = RotFrameHam::new(*p, p.omega0, 1.0, 0.0)?;
    let n = h.dim();
    let mut min_c = usize::MAX;
    let mut max_c = 0;
    let mut total = 0usize;
    let mut spread: f64 = 0.0;
    for i in 0..n {
        let mut count = 0;
        for j in 0..n {
            if i != j && h.element(i, j).norm() > 0.0 {
                count += 1;
                spread = spread.max((h.diagonal[j] - h.diagonal[i]).abs());
            }
        }
        min_c = min_c.min(count);
        max_c = max_c.max(count);
        total += count;
    }
    Ok(CouplingCensus {
        min_connectivity: min_c,
        max_connectivity: max_c,
        mean_connectivity: total as f64 / n as f64,
        max_spread: spread,
    })
}
