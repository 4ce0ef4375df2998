//! Rf-pulses and the remote-entanglement protocol.
//!
//! Starting from `|0,…,0⟩`, a π/2-pulse on the leftmost qubit `L-1` creates
//! `|0,…,0⟩ + |1,0,…,0⟩`; π-pulses then walk the excitation of the second
//! branch down the chain (`|1,1,0,…⟩`, `|1,1,1,0,…⟩`, `|1,0,1,0,…⟩`, …)
//! until qubits `L-1` and 0 are excited. Each pulse is tuned to the exact
//! `H_0` energy difference of its transition.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hamiltonian::{flip_energy, h0_energy, nearest_fake_transition, ChainParams};
use crate::spinbasis::BasisState;

/// One rectangular pulse, active on `(start, start + duration]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pulse {
    /// Frequency `ν_p` (also the rotating-frame frequency).
    pub frequency: f64,
    /// Rabi frequency `Ω_p`.
    pub rabi: f64,
    /// Phase `φ_p`.
    pub phase: f64,
    pub duration: f64,
    pub start: f64,
    /// State the pulse is meant to act on.
    pub source: BasisState,
    /// Qubit it is meant to flip.
    pub qubit: usize,
}

impl Pulse {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn target(&self) -> BasisState {
        // `qubit` is validated against `source` when the protocol is built.
        self.source.flip(self.qubit).expect("pulse qubit in range")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProtocolKind {
    /// The built-in `2L-2` pulse remote-entanglement sequence.
    Entanglement,
    /// A user-supplied pulse list.
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Protocol {
    params: ChainParams,
    pulses: Vec<Pulse>,
    kind: ProtocolKind,
}

/// Pulse frequency resonant with flipping qubit `k` of `s`:
/// `ν = E(upper) - E(lower)`, where `upper` is whichever of `s`, `flip(s,k)`
/// has qubit `k` excited.
///
/// Energies are full `H_0` eigenvalues. The sign is kept: a negative value
/// means the excited configuration lies lower, and the drive must then
/// rotate the other way to be resonant. For the protocol parameters of
/// interest the value is positive and equals `|E(flip(s,k)) - E(s)|`.
pub fn resonance_frequency(s: BasisState, k: usize, p: &ChainParams) -> Result<f64> {
    let f = s.flip(k)?;
    let (lower, upper) = if s.is_excited(k)? { (f, s) } else { (s, f) };
    Ok(h0_energy(upper, p)? - h0_energy(lower, p)?)
}

/// Rabi frequencies at which a pulse of length `π/Ω` leaves a transition
/// detuned by `2J` exactly unexcited: `Ω_k = 2J/√(4k²-1)`.
pub fn two_pi_k_omega(coupling: f64, k: u32) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidParameter("2πk index k must be >= 1".into()));
    }
    let k = k as f64;
    Ok(2.0 * coupling / (4.0 * k * k - 1.0).sqrt())
}

/// The `(source, qubit)` transitions of the entanglement walk, with the
/// moving-branch state before each pulse.
fn entanglement_transitions(l: usize) -> Result<Vec<(BasisState, usize)>> {
    if l < 3 {
        return Err(Error::ProtocolUndefined(l));
    }
    // Position `j` counted from the leftmost symbol is qubit `L-1-j`.
    let q = |j: usize| l - 1 - j;
    let mut out = Vec::with_capacity(2 * l - 2);
    let ground = BasisState::ground(l)?;
    out.push((ground, q(0)));
    let mut branch = ground.flip(q(0))?;
    out.push((branch, q(1)));
    branch = branch.flip(q(1))?;
    for j in 2..l {
        out.push((branch, q(j)));
        branch = branch.flip(q(j))?;
        out.push((branch, q(j - 1)));
        branch = branch.flip(q(j - 1))?;
    }
    Ok(out)
}

pub fn build_entanglement_protocol(p: &ChainParams, rabi: f64) -> Result<Protocol> {
    if !(rabi.is_finite() && rabi > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Rabi frequency must be positive, got {rabi}"
        )));
    }
    let transitions = entanglement_transitions(p.qubits())?;
    let mut pulses = Vec::with_capacity(transitions.len());
    let mut t = 0.0;
    for (i, (source, qubit)) in transitions.into_iter().enumerate() {
        let duration = if i == 0 { PI / (2.0 * rabi) } else { PI / rabi };
        pulses.push(Pulse {
            frequency: resonance_frequency(source, qubit, p)?,
            rabi,
            phase: 0.0,
            duration,
            start: t,
            source,
            qubit,
        });
        t += duration;
    }
    Ok(Protocol {
        params: *p,
        pulses,
        kind: ProtocolKind::Entanglement,
    })
}

impl Protocol {
    /// A user-supplied pulse list. Pulses must start at `t = 0`, have positive
    /// durations and abut one another.
    pub fn custom(params: ChainParams, pulses: Vec<Pulse>) -> Result<Self> {
        let mut t = 0.0;
        for (i, pulse) in pulses.iter().enumerate() {
            if !(pulse.duration.is_finite() && pulse.duration > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "pulse {}: duration must be positive",
                    i + 1
                )));
            }
            if !(pulse.frequency.is_finite() && pulse.rabi.is_finite() && pulse.phase.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "pulse {}: non-finite field",
                    i + 1
                )));
            }
            if (pulse.start - t).abs() > 1e-12 * t.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "pulse {} starts at {} but the previous pulse ends at {t}",
                    i + 1,
                    pulse.start
                )));
            }
            if pulse.source.qubits() != params.qubits() || pulse.qubit >= params.qubits() {
                return Err(Error::InvalidParameter(format!(
                    "pulse {}: transition does not fit a chain of {} spins",
                    i + 1,
                    params.qubits()
                )));
            }
            t = pulse.end();
        }
        Ok(Self {
            params,
            pulses,
            kind: ProtocolKind::Custom,
        })
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn kind(&self) -> ProtocolKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub fn total_time(&self) -> f64 {
        self.pulses.last().map_or(0.0, Pulse::end)
    }

    /// Number of pulses after which the `|0,…,0⟩` branch is only
    /// near-resonantly driven (`M = 2L-3` for the entanglement protocol).
    pub fn near_resonant_count(&self) -> usize {
        self.pulses.len().saturating_sub(1)
    }

    /// Signed detuning of the `|0,…,0⟩` branch from the flip of each pulse's
    /// qubit, in that pulse's rotating frame.
    pub fn spectator_detunings(&self) -> Vec<f64> {
        self.pulses
            .iter()
            .map(|p| flip_energy(0, p.qubit, &self.params, p.frequency))
            .collect()
    }

    /// Audit table: one pulse per line,
    /// `index nu omega phi tau t_start source qubit`.
    pub fn to_table(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let kind = match self.kind {
            ProtocolKind::Entanglement => "entanglement",
            ProtocolKind::Custom => "custom",
        };
        let _ = writeln!(out, "# kind {kind}");
        let _ = writeln!(
            out,
            "# L {} omega0 {:.16e} a {:.16e} J {:.16e}",
            p.qubits(),
            p.omega0(),
            p.gradient(),
            p.coupling()
        );
        let _ = writeln!(out, "# index nu omega phi tau t_start source qubit");
        for (i, pulse) in self.pulses.iter().enumerate() {
            let _ = writeln!(
                out,
                "{} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {} {}",
                i + 1,
                pulse.frequency,
                pulse.rabi,
                pulse.phase,
                pulse.duration,
                pulse.start,
                pulse.source.bit_string(),
                pulse.qubit
            );
        }
        out
    }

    /// Reads a table written by [`Protocol::to_table`].
    pub fn from_table(text: &str) -> Result<Self> {
        let mut kind = ProtocolKind::Custom;
        let mut params = None;
        let mut pulses = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let err = |msg: String| Error::Parse { line, msg };
            let fields: Vec<&str> = raw.split_whitespace().collect();
            match fields.as_slice() {
                [] => {}
                ["#", "kind", k] => {
                    kind = match *k {
                        "entanglement" => ProtocolKind::Entanglement,
                        "custom" => ProtocolKind::Custom,
                        other => return Err(err(format!("unknown protocol kind {other:?}"))),
                    }
                }
                ["#", "L", l, "omega0", w0, "a", a, "J", j] => {
                    let num = |s: &str| {
                        s.parse::<f64>()
                            .map_err(|e| err(format!("bad number {s:?}: {e}")))
                    };
                    let l = l
                        .parse::<usize>()
                        .map_err(|e| err(format!("bad L {l:?}: {e}")))?;
                    params = Some(
                        ChainParams::new(l, num(w0)?, num(a)?, num(j)?)
                            .map_err(|e| err(e.to_string()))?,
                    );
                }
                [first, ..] if first.starts_with('#') => {}
                [_, nu, om, phi, tau, t0, src, q] => {
                    let num = |s: &str| {
                        s.parse::<f64>()
                            .map_err(|e| err(format!("bad number {s:?}: {e}")))
                    };
                    let source = BasisState::parse_bits(src).map_err(|e| err(e.to_string()))?;
                    let qubit = q
                        .parse::<usize>()
                        .map_err(|e| err(format!("bad qubit {q:?}: {e}")))?;
                    pulses.push(Pulse {
                        frequency: num(nu)?,
                        rabi: num(om)?,
                        phase: num(phi)?,
                        duration: num(tau)?,
                        start: num(t0)?,
                        source,
                        qubit,
                    });
                }
                _ => return Err(err(format!("expected 8 fields, found {}", fields.len()))),
            }
        }
        let params = params.ok_or(Error::Parse {
            line: 0,
            msg: "missing chain parameter header".into(),
        })?;
        let mut prot = Protocol::custom(params, pulses)?;
        prot.kind = kind;
        Ok(prot)
    }
}

/// Outcome of one selective-regime inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Pass,
    Warn,
    Fail,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioCheck {
    pub name: &'static str,
    pub value: f64,
    pub level: Level,
}

/// Thresholds for reading `x ≪ y` as a ratio test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectiveThresholds {
    /// Ratios below this pass; up to 1 they warn; at or above 1 they fail.
    pub much_less: f64,
    /// Relative window `|J - J_fake| / J_fake` flagged as a fake transition.
    pub fake_window: f64,
}

impl Default for SelectiveThresholds {
    fn default() -> Self {
        Self {
            much_less: 0.25,
            fake_window: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectiveReport {
    pub checks: Vec<RatioCheck>,
    /// Nearest fake-transition coupling and the relative distance to it.
    pub nearest_fake: Option<(f64, f64)>,
    pub fake_flag: bool,
}

impl SelectiveReport {
    pub fn passed(&self) -> bool {
        !self.fake_flag && self.checks.iter().all(|c| c.level != Level::Fail)
    }

    pub fn has_warnings(&self) -> bool {
        self.checks.iter().any(|c| c.level == Level::Warn)
    }
}

/// Margins of `Ω ≪ J ≪ a`, `a ≫ 4J` and `Ω/J, Ω/a ≪ √(2/L)`, plus proximity
/// to a fake transition. Never fails; the report carries the verdict.
pub fn validate_selective(
    p: &ChainParams,
    rabi: f64,
    thresholds: &SelectiveThresholds,
) -> SelectiveReport {
    let j = p.coupling();
    let a = p.gradient();
    let growth = (p.qubits() as f64 / 2.0).sqrt();
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { f64::INFINITY };
    let level = |v: f64| {
        if v.is_nan() || v >= 1.0 {
            Level::Fail
        } else if v >= thresholds.much_less {
            Level::Warn
        } else {
            Level::Pass
        }
    };
    let checks = [
        ("omega/J", ratio(rabi, j)),
        ("J/a", ratio(j, a)),
        ("4J/a", ratio(4.0 * j, a)),
        ("omega*sqrt(L/2)/J", ratio(rabi * growth, j)),
        ("omega*sqrt(L/2)/a", ratio(rabi * growth, a)),
    ]
    .into_iter()
    .map(|(name, value)| RatioCheck {
        name,
        value,
        level: level(value),
    })
    .collect();
    let nearest_fake = nearest_fake_transition(p);
    let fake_flag = nearest_fake.is_some_and(|(_, rel)| rel < thresholds.fake_window);
    SelectiveReport {
        checks,
        nearest_fake,
        fake_flag,
    }
}
