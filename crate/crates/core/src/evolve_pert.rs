//! Two-level block propagator.
//!
//! For each pulse the basis is split into pairs of states connected by a
//! resonant or near-resonant single-spin flip, plus unpaired singletons.
//! Each pair evolves under its own 2×2 Hamiltonian in closed form; the
//! remaining couplings (detuned by roughly `a` or more) are dropped, or
//! reinstated to first order by dressing the block eigenstates.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::evolve_exact::{check_pulse_entry, check_start, from_rotating, to_rotating};
use crate::hamiltonian::{diagonal_energy, flip_energy, ChainParams};
use crate::protocol::{Protocol, Pulse};
use crate::spinbasis::{check_qubits, BasisState, Frame, StateVector, MAX_QUBITS};
use crate::C64;

/// Pairing threshold as a fraction of the frequency step `a`.
pub const DEFAULT_PAIRING_FRACTION: f64 = 0.5;

/// Two equally detuned partners make the pairing ambiguous when their common
/// `|Δ|` is below this multiple of `Ω`. Further out the unpaired one is a weak
/// off-resonant coupling like any other.
pub const AMBIGUITY_RABI_MULTIPLE: f64 = 10.0;

/// Two states coupled by one flip, evolved exactly as a two-level system.
///
/// `state` has the flipped qubit in the ground state and `partner` has it
/// excited. Energies are diagonal elements in the pulse's rotating frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLevelBlock {
    pub state: BasisState,
    pub partner: BasisState,
    pub qubit: usize,
    /// `Δ = (E_partner - E_state) - ν`.
    pub detuning: f64,
    /// `λ = √(Ω² + Δ²)`.
    pub lambda: f64,
    pub rabi: f64,
    pub phase: f64,
    pub state_energy: f64,
    pub partner_energy: f64,
}

impl TwoLevelBlock {
    /// Block for flipping qubit `k` of basis index `index` under `pulse`.
    pub fn new(index: usize, k: usize, pulse: &Pulse, p: &ChainParams) -> Result<Self> {
        let s = BasisState::new(index, p.qubits())?;
        let f = s.flip(k)?;
        let (state, partner) = if s.is_excited(k)? { (f, s) } else { (s, f) };
        let nu = pulse.frequency;
        let state_energy = diagonal_energy(state.index(), p, nu);
        let detuning = flip_energy(state.index(), k, p, nu);
        Ok(Self {
            state,
            partner,
            qubit: k,
            detuning,
            lambda: pulse.rabi.hypot(detuning),
            rabi: pulse.rabi,
            phase: pulse.phase,
            state_energy,
            partner_energy: state_energy + detuning,
        })
    }

    fn coupling(&self) -> C64 {
        C64::from_polar(1.0, self.phase) * (-0.5 * self.rabi)
    }

    /// `exp(-iH_b τ)` as `[[U_mm, U_mp], [U_pm, U_pp]]`.
    pub fn propagator(&self, tau: f64) -> [[C64; 2]; 2] {
        let mean = 0.5 * (self.state_energy + self.partner_energy);
        let global = C64::from_polar(1.0, -mean * tau);
        let half = 0.5 * self.lambda * tau;
        let (sin, cos) = half.sin_cos();
        // sin(λτ/2)/λ, with its λ → 0 limit.
        let sinc = if self.lambda > 0.0 {
            sin / self.lambda
        } else {
            0.5 * tau
        };
        let i = C64::i();
        let diag = i * (self.detuning * sinc);
        let off = i * (self.rabi * sinc);
        [
            [
                global * (cos + diag),
                global * off * C64::from_polar(1.0, self.phase),
            ],
            [
                global * off * C64::from_polar(1.0, -self.phase),
                global * (cos - diag),
            ],
        ]
    }

    /// Evolves `(c_state, c_partner)` for a time `tau`.
    pub fn evolve(&self, c_m: C64, c_p: C64, tau: f64) -> (C64, C64) {
        let u = self.propagator(tau);
        (u[0][0] * c_m + u[0][1] * c_p, u[1][0] * c_m + u[1][1] * c_p)
    }

    /// Eigenvalues (ascending) and eigenvectors `[c_state, c_partner]`.
    fn eigen(&self) -> [(f64, [C64; 2]); 2] {
        let a = self.state_energy;
        let d = self.partner_energy;
        let g = self.coupling();
        let mean = 0.5 * (a + d);
        let r = (0.5 * (a - d)).hypot(g.norm());
        [mean - r, mean + r].map(|e| {
            // Two candidate null vectors of H - e; take the better conditioned.
            let v1 = [g, C64::new(e - a, 0.0)];
            let v2 = [C64::new(e - d, 0.0), g.conj()];
            let n1 = (v1[0].norm_sqr() + v1[1].norm_sqr()).sqrt();
            let n2 = (v2[0].norm_sqr() + v2[1].norm_sqr()).sqrt();
            let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
            if n == 0.0 {
                // g = 0 and a = d: any basis works.
                return (e, [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
            }
            (e, [v[0] / n, v[1] / n])
        })
    }
}

/// Closed-form two-level step for a block.
pub fn block_evolve(block: &TwoLevelBlock, c_m: C64, c_p: C64, tau: f64) -> (C64, C64) {
    block.evolve(c_m, c_p, tau)
}

/// Probability of a transition detuned by `Δ` after a pulse of length `τ`,
/// starting from one state: `(Ω²/λ²) sin²(λτ/2)`.
pub fn epsilon_param(rabi: f64, detuning: f64, tau: f64) -> f64 {
    let lambda = rabi.hypot(detuning);
    if lambda == 0.0 {
        return 0.0;
    }
    let s = (0.5 * lambda * tau).sin();
    (rabi * rabi) / (lambda * lambda) * s * s
}

/// Non-resonant transition probability `η = Ω²/(4a²)`.
pub fn eta_param(rabi: f64, gradient: f64) -> Result<f64> {
    if gradient <= 0.0 {
        return Err(Error::InvalidParameter("a must be positive".into()));
    }
    Ok(rabi * rabi / (4.0 * gradient * gradient))
}

/// Per-pulse error probabilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorParams {
    /// Near-resonant transition probability.
    pub epsilon: f64,
    /// Non-resonant transition probability.
    pub eta: f64,
}

impl ErrorParams {
    /// `ε` for a `π/Ω` pulse at detuning `Δ`, and `η` for gradient `a`.
    pub fn for_pi_pulse(rabi: f64, detuning: f64, gradient: f64) -> Result<Self> {
        Ok(Self {
            epsilon: epsilon_param(rabi, detuning, PI / rabi),
            eta: eta_param(rabi, gradient)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Single,
    Block(usize),
}

/// Basis split for one pulse.
#[derive(Clone, Debug)]
pub struct Partition {
    pub blocks: Vec<TwoLevelBlock>,
    pub singletons: Vec<usize>,
    slots: Vec<Slot>,
}

impl Partition {
    /// Block containing basis index `i`, if any.
    pub fn block_of(&self, i: usize) -> Option<&TwoLevelBlock> {
        match self.slots[i] {
            Slot::Block(b) => Some(&self.blocks[b]),
            Slot::Single => None,
        }
    }
}

/// Partition with the default threshold `|Δ| ≤ a/2`.
pub fn partition_blocks(pulse: &Pulse, p: &ChainParams) -> Result<Partition> {
    partition_blocks_with(pulse, p, DEFAULT_PAIRING_FRACTION * p.gradient())
}

/// Pairs states along single-flip transitions with `|Δ| ≤ threshold`,
/// taking candidate transitions in order of increasing `|Δ|` and skipping
/// any that touch an already paired state. When every state's closest
/// partner chooses it back this is exactly the mutual closest-partner
/// pairing.
///
/// A state with two free partners at the same `|Δ|` is left unpaired: the
/// three levels do not reduce to a 2×2 block. If that `|Δ|` is within
/// [`AMBIGUITY_RABI_MULTIPLE`]`·Ω` of resonance this is a structural error.
pub fn partition_blocks_with(pulse: &Pulse, p: &ChainParams, threshold: f64) -> Result<Partition> {
    check_qubits(p.qubits(), MAX_QUBITS)?;
    let n = p.dim();
    let l = p.qubits();
    let nu = pulse.frequency;
    let scale = p.gradient().max(p.coupling()).max(nu.abs()).max(1.0);
    let tie = 1e-12 * scale;
    let mut cands: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n];
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for (i, c) in cands.iter_mut().enumerate() {
        for k in 0..l {
            let d = flip_energy(i, k, p, nu).abs();
            if d <= threshold {
                c.push((d, i ^ (1 << k)));
                if i >> k & 1 == 0 {
                    edges.push((d, i, k));
                }
            }
        }
    }
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut blocks = Vec::new();
    let mut slots = vec![Slot::Single; n];
    let mut blocked = vec![false; n];
    for (d, i, k) in edges {
        let j = i ^ (1 << k);
        let free =
            |x: usize, slots: &[Slot], blocked: &[bool]| slots[x] == Slot::Single && !blocked[x];
        if !free(i, &slots, &blocked) || !free(j, &slots, &blocked) {
            continue;
        }
        let mut ambiguous = false;
        for (s, partner) in [(i, j), (j, i)] {
            let rival = cands[s].iter().find(|&&(d2, x)| {
                x != partner && (d2 - d).abs() <= tie && free(x, &slots, &blocked)
            });
            if let Some(&(_, other)) = rival {
                if d < AMBIGUITY_RABI_MULTIPLE * pulse.rabi {
                    return Err(Error::Pairing {
                        pulse: 0,
                        state: s,
                        partner,
                        other,
                    });
                }
                blocked[s] = true;
                ambiguous = true;
            }
        }
        if !ambiguous {
            slots[i] = Slot::Block(blocks.len());
            slots[j] = Slot::Block(blocks.len());
            blocks.push(TwoLevelBlock::new(i, k, pulse, p)?);
        }
    }
    let singletons = (0..n).filter(|&i| slots[i] == Slot::Single).collect();
    Ok(Partition {
        blocks,
        singletons,
        slots,
    })
}

/// Accuracy of the block propagator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Order {
    /// 2×2 blocks only; exactly unitary.
    #[default]
    Block,
    /// Blocks plus first-order dressing by the neglected couplings.
    BlockFirstOrder,
}

impl Order {
    pub fn name(self) -> &'static str {
        match self {
            Order::Block => "block",
            Order::BlockFirstOrder => "block+pt1",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "block" => Ok(Order::Block),
            "block+pt1" | "pt1" => Ok(Order::BlockFirstOrder),
            other => Err(Error::InvalidParameter(format!(
                "unknown order {other:?}, expected block or block+pt1"
            ))),
        }
    }
}

/// One unperturbed eigenstate: up to two basis components.
#[derive(Clone, Copy)]
struct Eigenstate {
    energy: f64,
    comps: [(usize, C64); 2],
    len: usize,
}

impl Eigenstate {
    fn comps(&self) -> &[(usize, C64)] {
        &self.comps[..self.len]
    }
}

/// Unperturbed eigenbasis of the block Hamiltonian with, for each basis
/// index, the eigenstates supported on it.
struct BlockBasis {
    states: Vec<Eigenstate>,
    owner: Vec<[usize; 2]>,
}

impl BlockBasis {
    fn new(part: &Partition, p: &ChainParams, nu: f64) -> Self {
        let n = part.slots.len();
        let mut states = Vec::with_capacity(n);
        let mut owner = vec![[usize::MAX; 2]; n];
        for &i in &part.singletons {
            owner[i] = [states.len(), usize::MAX];
            states.push(Eigenstate {
                energy: diagonal_energy(i, p, nu),
                comps: [(i, C64::new(1.0, 0.0)), (usize::MAX, C64::new(0.0, 0.0))],
                len: 1,
            });
        }
        for b in &part.blocks {
            let (m, q) = (b.state.index(), b.partner.index());
            let first = states.len();
            for (e, v) in b.eigen() {
                states.push(Eigenstate {
                    energy: e,
                    comps: [(m, v[0]), (q, v[1])],
                    len: 2,
                });
            }
            owner[m] = [first, first + 1];
            owner[q] = [first, first + 1];
        }
        Self { states, owner }
    }

    fn to_eigen(&self, v: &[C64]) -> Vec<C64> {
        self.states
            .iter()
            .map(|q| q.comps().iter().map(|&(i, c)| c.conj() * v[i]).sum())
            .collect()
    }

    fn to_basis(&self, x: &[C64], n: usize) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); n];
        for (q, &xq) in self.states.iter().zip(x) {
            for &(i, c) in q.comps() {
                v[i] += c * xq;
            }
        }
        v
    }
}

/// Perturbative propagator.
#[derive(Clone, Copy, Debug)]
pub struct PertEvolver {
    pub order: Order,
    /// Pairing threshold as a fraction of `a`.
    pub pairing_fraction: f64,
}

impl Default for PertEvolver {
    fn default() -> Self {
        Self::new(Order::Block)
    }
}

impl PertEvolver {
    pub fn new(order: Order) -> Self {
        Self {
            order,
            pairing_fraction: DEFAULT_PAIRING_FRACTION,
        }
    }

    pub fn propagate_pulse(
        &self,
        psi: &StateVector,
        pulse: &Pulse,
        p: &ChainParams,
    ) -> Result<StateVector> {
        check_pulse_entry(psi, pulse, p)?;
        let part = partition_blocks_with(pulse, p, self.pairing_fraction * p.gradient())?;
        let rot = to_rotating(psi, pulse.frequency)?;
        let tau = pulse.duration;
        let evolved = match self.order {
            Order::Block => evolve_blocks(&part, rot.amplitudes(), p, pulse.frequency, tau),
            Order::BlockFirstOrder => evolve_dressed(&part, rot.amplitudes(), p, pulse, tau),
        };
        let mut moved = StateVector::from_parts(
            evolved,
            psi.qubits(),
            pulse.end(),
            Frame::Rotating(pulse.frequency),
        );
        if self.order == Order::BlockFirstOrder {
            moved.renormalize();
        }
        from_rotating(&moved)
    }

    pub fn run_protocol(&self, psi0: &StateVector, prot: &Protocol) -> Result<StateVector> {
        self.run_protocol_with(psi0, prot, |_, _| {})
    }

    pub fn run_protocol_with<F>(
        &self,
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
            psi = self
                .propagate_pulse(&psi, pulse, prot.params())
                .map_err(|e| match e {
                    Error::Pairing {
                        state,
                        partner,
                        other,
                        ..
                    } => Error::Pairing {
                        pulse: i + 1,
                        state,
                        partner,
                        other,
                    },
                    other => other,
                })?;
            observe(i, &psi);
        }
        Ok(psi)
    }
}

pub fn run_protocol_pert(psi0: &StateVector, prot: &Protocol, order: Order) -> Result<StateVector> {
    PertEvolver::new(order).run_protocol(psi0, prot)
}

fn evolve_blocks(part: &Partition, v: &[C64], p: &ChainParams, nu: f64, tau: f64) -> Vec<C64> {
    let mut out = v.to_vec();
    for b in &part.blocks {
        let (m, q) = (b.state.index(), b.partner.index());
        let (cm, cp) = b.evolve(v[m], v[q], tau);
        out[m] = cm;
        out[q] = cp;
    }
    for &i in &part.singletons {
        out[i] = v[i] * C64::from_polar(1.0, -diagonal_energy(i, p, nu) * tau);
    }
    out
}

/// `W exp(-iE⁰τ) W⁻¹` with `W = 1 + K` and
/// `K_{q'q} = ⟨q'|𝒱|q⟩ / (ε_q - ε_q')`, `W⁻¹ ≈ 1 - K`.
fn evolve_dressed(
    part: &Partition,
    v: &[C64],
    p: &ChainParams,
    pulse: &Pulse,
    tau: f64,
) -> Vec<C64> {
    let basis = BlockBasis::new(part, p, pulse.frequency);
    let n = v.len();
    let degenerate = 1e-9 * p.gradient();
    let mut skipped = 0usize;
    let up = C64::from_polar(1.0, pulse.phase) * (-0.5 * pulse.rabi);
    let l = p.qubits();
    // y = K x
    let mut apply_k = |x: &[C64]| -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        for (qi, q) in basis.states.iter().enumerate() {
            if x[qi] == C64::new(0.0, 0.0) {
                continue;
            }
            for &(i, ci) in q.comps() {
                for k in 0..l {
                    let j = i ^ (1 << k);
                    if basis.owner[j] == basis.owner[i] {
                        continue;
                    }
                    // ⟨j|H|i⟩
                    let h = if j >> k & 1 == 0 { up } else { up.conj() };
                    let amp = h * ci * x[qi];
                    for &qj in &basis.owner[j] {
                        if qj == usize::MAX {
                            continue;
                        }
                        let target = &basis.states[qj];
                        let gap = q.energy - target.energy;
                        if gap.abs() < degenerate {
                            skipped += 1;
                            continue;
                        }
                        let overlap = target
                            .comps()
                            .iter()
                            .find(|(idx, _)| *idx == j)
                            .map_or(C64::new(0.0, 0.0), |(_, c)| c.conj());
                        y[qj] += overlap * amp / gap;
                    }
                }
            }
        }
        y
    };
    let a = basis.to_eigen(v);
    let ka = apply_k(&a);
    let mut b: Vec<C64> = a.iter().zip(&ka).map(|(x, y)| x - y).collect();
    for (bq, q) in b.iter_mut().zip(&basis.states) {
        *bq *= C64::from_polar(1.0, -q.energy * tau);
    }
    let kb = apply_k(&b);
    let c: Vec<C64> = b.iter().zip(&kb).map(|(x, y)| x + y).collect();
    if skipped > 0 {
        log::warn!("first-order dressing skipped {skipped} near-degenerate couplings");
    }
    basis.to_basis(&c, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve_exact::ExactEvolver;
    use crate::protocol::build_entanglement_protocol;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn block(rabi: f64, detuning: f64) -> TwoLevelBlock {
        TwoLevelBlock {
            state: BasisState::ground(1).unwrap(),
            partner: BasisState::new(1, 1).unwrap(),
            qubit: 0,
            detuning,
            lambda: rabi.hypot(detuning),
            rabi,
            phase: 0.0,
            state_energy: -1.3,
            partner_energy: -1.3 + detuning,
        }
    }

    #[test]
    fn resonant_half_and_full_transfer() {
        let rabi = 0.118;
        let b = block(rabi, 0.0);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let (cm, cp) = b.evolve(one, zero, PI / (2.0 * rabi));
        assert!((cm.norm_sqr() - 0.5).abs() < 1e-14);
        assert!((cp.norm_sqr() - 0.5).abs() < 1e-14);
        let (cm, cp) = b.evolve(one, zero, PI / rabi);
        assert!(cm.norm_sqr() < 1e-28);
        assert!((cp.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_drive_is_pure_phase() {
        let b = block(0.0, 0.7);
        let (cm, cp) = b.evolve(C64::new(0.6, 0.0), C64::new(0.0, 0.8), 12.0);
        assert!((cm.norm() - 0.6).abs() < 1e-15);
        assert!((cp.norm() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn matches_printed_amplitudes() {
        // c_m(τ) = [cos(λτ/2) + iΔ/λ sin(λτ/2)] e^{-iΔτ/2 - iE_mτ},
        // c_p(τ) = [iΩ/λ sin(λτ/2)] e^{iΔτ/2 - iE_pτ}.
        let (rabi, delta, tau) = (0.3, 0.9, 4.1);
        let b = block(rabi, delta);
        let (cm, cp) = b.evolve(C64::new(1.0, 0.0), C64::new(0.0, 0.0), tau);
        let lam = b.lambda;
        let (s, c) = (0.5 * lam * tau).sin_cos();
        let i = C64::i();
        let em = b.state_energy;
        let ep = b.partner_energy;
        let want_m = (c + i * delta / lam * s) * (-i * (delta * tau / 2.0 + em * tau)).exp();
        let want_p = (i * rabi / lam * s) * (i * (delta * tau / 2.0 - ep * tau)).exp();
        assert!((cm - want_m).norm() < 1e-14);
        assert!((cp - want_p).norm() < 1e-14);
    }

    #[test]
    fn epsilon_consistent_with_block_evolve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let rabi = rng.gen_range(1e-3..2.0);
            let delta = rng.gen_range(-10.0..10.0);
            let tau = rng.gen_range(0.0..200.0);
            let (_, cp) = block(rabi, delta).evolve(C64::new(1.0, 0.0), C64::new(0.0, 0.0), tau);
            assert!((cp.norm_sqr() - epsilon_param(rabi, delta, tau)).abs() < 1e-12);
        }
    }

    #[test]
    fn epsilon_values() {
        assert!((epsilon_param(0.2, 0.0, PI / 0.2) - 1.0).abs() < 1e-15);
        let j = 1.0;
        for k in 1..8 {
            let omega = crate::protocol::two_pi_k_omega(j, k).unwrap();
            assert!(epsilon_param(omega, 2.0 * j, PI / omega) < 1e-12);
        }
        let (rabi, j) = (0.01, 1.0);
        for tau in [1.0, 10.0, 123.4] {
            let eps = epsilon_param(rabi, 2.0 * j, tau);
            assert!(eps <= rabi * rabi / (4.0 * j * j));
        }
    }

    #[test]
    fn eta_values() {
        assert!((eta_param(0.118, 100.0).unwrap() - 3.481e-7).abs() < 1e-18);
        assert_eq!(eta_param(0.0, 100.0).unwrap(), 0.0);
        assert!(eta_param(0.1, 0.0).is_err());
        let e = ErrorParams::for_pi_pulse(0.118, 2.0, 100.0).unwrap();
        assert!(e.eta < e.epsilon);
    }

    #[test]
    fn partitions_of_the_protocol() {
        let p = ChainParams::new(6, 0.0, 100.0, 1.0).unwrap();
        let prot = build_entanglement_protocol(&p, 0.118).unwrap();
        for (i, pulse) in prot.pulses().iter().enumerate() {
            let part = partition_blocks(pulse, &p).unwrap();
            assert!(part.blocks.len() <= 32);
            assert_eq!(2 * part.blocks.len() + part.singletons.len(), 64);
            let mut seen = [0u8; 64];
            for b in &part.blocks {
                seen[b.state.index()] += 1;
                seen[b.partner.index()] += 1;
                assert_eq!(part.block_of(b.partner.index()), Some(b));
                assert_eq!((b.state.index() ^ b.partner.index()).count_ones(), 1);
            }
            for &s in &part.singletons {
                seen[s] += 1;
            }
            assert!(seen.iter().all(|&c| c == 1));
            let spectator = part.block_of(0).unwrap();
            if i == 0 {
                assert!(spectator.detuning.abs() < 1e-12);
                assert_eq!(spectator.partner.index(), 1 << 5);
            } else {
                let m = spectator.detuning.abs() / p.coupling();
                assert!((m - 2.0).abs() < 1e-9 || (m - 4.0).abs() < 1e-9);
            }
            let moving = part.block_of(pulse.source.index()).unwrap();
            assert!(moving.detuning.abs() < 1e-9);
        }
    }

    #[test]
    fn first_pulse_gives_exact_superposition() {
        let p = ChainParams::new(5, 0.0, 100.0, 1.0).unwrap();
        let prot = build_entanglement_protocol(&p, 0.1).unwrap();
        let one = Protocol::custom(p, prot.pulses()[..1].to_vec()).unwrap();
        let out =
            run_protocol_pert(&StateVector::ground_state(5).unwrap(), &one, Order::Block).unwrap();
        assert!((out.probability(0) - 0.5).abs() < 1e-14);
        assert!((out.probability(1 << 4) - 0.5).abs() < 1e-14);
        assert!((out.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn block_only_is_unitary_and_tracks_exact() {
        let p = ChainParams::new(6, 0.0, 100.0, 1.945).unwrap();
        let prot = build_entanglement_protocol(&p, 0.118).unwrap();
        let psi0 = StateVector::ground_state(6).unwrap();
        let mut norms = Vec::new();
        let pert = PertEvolver::default()
            .run_protocol_with(&psi0, &prot, |_, s| norms.push(s.norm()))
            .unwrap();
        assert!(norms.iter().all(|n| (n - 1.0).abs() < 1e-12));
        let exact = ExactEvolver::new().run_protocol(&psi0, &prot).unwrap();
        let overlap = pert.inner(&exact).unwrap().norm_sqr();
        // The remainder is dominated by second-order level shifts of order
        // Ω²/a per unit time, i.e. a phase ~πΩ/(2a) per π-pulse.
        let phase = prot.len() as f64 * PI * 0.118 / (2.0 * 100.0);
        assert!(
            1.0 - overlap <= phase * phase,
            "1 - overlap = {}",
            1.0 - overlap
        );
        assert!(1.0 - overlap > eta_param(0.118, 100.0).unwrap());
    }

    #[test]
    fn first_order_closes_part_of_the_gap() {
        let p = ChainParams::new(4, 0.0, 30.0, 1.0).unwrap();
        let prot = build_entanglement_protocol(&p, 0.2).unwrap();
        let psi0 = StateVector::ground_state(4).unwrap();
        let exact = ExactEvolver::new().run_protocol(&psi0, &prot).unwrap();
        let block = run_protocol_pert(&psi0, &prot, Order::Block).unwrap();
        let dressed = run_protocol_pert(&psi0, &prot, Order::BlockFirstOrder).unwrap();
        let leak = |s: &StateVector| 1.0 - s.inner(&exact).unwrap().norm_sqr();
        assert!((dressed.norm() - 1.0).abs() < 1e-12);
        assert!(
            leak(&dressed) < leak(&block),
            "{} vs {}",
            leak(&dressed),
            leak(&block)
        );
    }

    #[test]
    fn zero_drive_pert_equals_exact() {
        let p = ChainParams::new(4, 0.0, 100.0, 1.0).unwrap();
        let prot = build_entanglement_protocol(&p, 0.1).unwrap();
        let pulses: Vec<Pulse> = prot
            .pulses()
            .iter()
            .map(|x| Pulse { rabi: 0.0, ..*x })
            .collect();
        let zero = Protocol::custom(p, pulses).unwrap();
        let amps: Vec<C64> = (0..16)
            .map(|i| C64::new(1.0, i as f64).unscale(30.0))
            .collect();
        let mut psi0 = StateVector::from_amplitudes(amps, 0.0, Frame::Lab).unwrap();
        psi0.renormalize();
        let a = run_protocol_pert(&psi0, &zero, Order::Block).unwrap();
        let b = ExactEvolver::new().run_protocol(&psi0, &zero).unwrap();
        assert!((a.inner(&b).unwrap().norm_sqr() - 1.0).abs() < 1e-12);
        for (x, y) in a.amplitudes().iter().zip(psi0.amplitudes()) {
            assert!((x.norm() - y.norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn pairing_breaks_down_at_fake_transition() {
        // At J = a/4 the moving-branch state |1,0,1,0,0,0⟩ is resonant with
        // two flips at once during the fourth pulse.
        let p = ChainParams::new(6, 0.0, 100.0, 25.0).unwrap();
        let prot = build_entanglement_protocol(&p, 0.118).unwrap();
        let errs = prot
            .pulses()
            .iter()
            .filter(|pulse| partition_blocks(pulse, &p).is_err())
            .count();
        assert!(errs > 0);
        let psi0 = StateVector::ground_state(6).unwrap();
        let err = run_protocol_pert(&psi0, &prot, Order::Block).unwrap_err();
        assert!(matches!(err, Error::Pairing { pulse, .. } if pulse >= 1));
    }

    #[test]
    fn order_names() {
        assert_eq!(Order::parse("block").unwrap(), Order::Block);
        assert_eq!(Order::parse("block+pt1").unwrap(), Order::BlockFirstOrder);
        assert!(Order::parse("pt2").is_err());
        assert_eq!(Order::BlockFirstOrder.name(), "block+pt1");
    }
}
