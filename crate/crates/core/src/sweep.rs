//! Parameter sweeps, CSV output and the slope-vs-length fit.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve_pert::Order;
use crate::fidelity::{linear_fit, simulate, slope_th, LinearFit, PropagatorChoice};
use crate::hamiltonian::{chaos_border, nearest_fake_transition, ChainParams};
use crate::protocol::SelectiveThresholds;

pub const CSV_HEADER: [&str; 7] = [
    "param",
    "value",
    "f_exact",
    "f_pert",
    "one_minus_f",
    "status",
    "flags",
];

/// A point is flagged `2pik` when the spectator leakage is below this
/// fraction of its maximum `Ω²/λ²`.
pub const TWO_PI_K_WINDOW: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Coupling,
    Gradient,
    Rabi,
    Qubits,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Coupling => "J",
            SweepParam::Gradient => "a",
            SweepParam::Rabi => "omega",
            SweepParam::Qubits => "L",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "J" => Ok(Self::Coupling),
            "a" => Ok(Self::Gradient),
            "omega" | "Omega" => Ok(Self::Rabi),
            "L" => Ok(Self::Qubits),
            other => Err(Error::InvalidParameter(format!(
                "unknown sweep parameter {other:?}, expected J, a, omega or L"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    param: SweepParam,
    values: Vec<f64>,
    base: ChainParams,
    rabi: f64,
    choice: PropagatorChoice,
    order: Order,
}

impl SweepSpec {
    /// Evenly spaced values from `from` to `to` inclusive. A single step is
    /// accepted only when `from == to`.
    pub fn range(
        param: SweepParam,
        base: ChainParams,
        rabi: f64,
        from: f64,
        to: f64,
        steps: usize,
    ) -> Result<Self> {
        if !from.is_finite() || !to.is_finite() {
            return Err(Error::InvalidParameter(
                "sweep bounds must be finite".into(),
            ));
        }
        let values = match steps {
            0 => return Err(Error::InvalidParameter("steps must be >= 1".into())),
            1 if from == to => vec![from],
            1 => {
                return Err(Error::InvalidParameter(
                    "steps must be >= 2 for a range with from != to".into(),
                ))
            }
            n => (0..n)
                .map(|i| {
                    if i == n - 1 {
                        to
                    } else {
                        from + (to - from) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        };
        Self::list(param, base, rabi, values)
    }

    pub fn list(param: SweepParam, base: ChainParams, rabi: f64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty sweep".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "sweep values must be finite".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "sweep values must be strictly increasing".into(),
            ));
        }
        if param == SweepParam::Qubits && values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err(Error::InvalidParameter(
                "L values must be positive integers".into(),
            ));
        }
        if !(rabi.is_finite() && rabi >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "invalid Rabi frequency {rabi}"
            )));
        }
        Ok(Self {
            param,
            values,
            base,
            rabi,
            choice: PropagatorChoice::Exact,
            order: Order::Block,
        })
    }

    pub fn with_propagator(mut self, choice: PropagatorChoice, order: Order) -> Self {
        self.choice = choice;
        self.order = order;
        self
    }

    pub fn param(&self) -> SweepParam {
        self.param
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn base(&self) -> &ChainParams {
        &self.base
    }

    pub fn rabi(&self) -> f64 {
        self.rabi
    }

    pub fn propagator(&self) -> PropagatorChoice {
        self.choice
    }

    pub fn order(&self) -> Order {
        self.order
    }

    /// Chain parameters and `Ω` at one swept value.
    pub fn point(&self, value: f64) -> Result<(ChainParams, f64)> {
        let b = &self.base;
        Ok(match self.param {
            SweepParam::Coupling => (b.with_coupling(value)?, self.rabi),
            SweepParam::Gradient => (b.with_gradient(value)?, self.rabi),
            SweepParam::Rabi => {
                if value.is_nan() || value < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "invalid Rabi frequency {value}"
                    )));
                }
                (*b, value)
            }
            SweepParam::Qubits => (b.with_qubits(value as usize)?, self.rabi),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub f_exact: Option<f64>,
    pub f_pert: Option<f64>,
    /// `1 - F_exact`, or `1 - F_pert` for perturbative-only sweeps.
    pub one_minus_f: Option<f64>,
    /// `ok`, or the error that stopped this point.
    pub status: String,
    pub flags: Vec<&'static str>,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Proximity flags for one parameter point: `fake` inside the fake-transition
/// window, `2pik` close to a zero of the 2J spectator leakage, `chaos` above
/// the chaos border.
pub fn point_flags(p: &ChainParams, rabi: f64) -> Vec<&'static str> {
    let mut flags = Vec::new();
    let window = SelectiveThresholds::default().fake_window;
    if let Some((_, rel)) = nearest_fake_transition(p) {
        if rel < window {
            flags.push("fake");
        }
    }
    if near_two_pi_k(p.coupling(), rabi) {
        flags.push("2pik");
    }
    if chaos_border(p).is_chaotic(rabi) {
        flags.push("chaos");
    }
    flags
}

fn near_two_pi_k(coupling: f64, rabi: f64) -> bool {
    if rabi <= 0.0 || coupling <= 0.0 {
        return false;
    }
    // sin²(λτ/2) for the 2J-detuned spectator during a π-pulse.
    let half_phase = 0.5 * std::f64::consts::PI * (1.0 + (2.0 * coupling / rabi).powi(2)).sqrt();
    half_phase.sin().powi(2) < TWO_PI_K_WINDOW
}

fn run_point(spec: &SweepSpec, value: f64) -> SweepRow {
    let mut row = SweepRow {
        param: spec.param,
        value,
        f_exact: None,
        f_pert: None,
        one_minus_f: None,
        status: "ok".into(),
        flags: Vec::new(),
    };
    let result = spec.point(value).and_then(|(p, rabi)| {
        row.flags = point_flags(&p, rabi);
        simulate(&p, rabi, spec.choice, spec.order)
    });
    match result {
        Ok(sim) => {
            let r = sim.report;
            row.f_exact = r.f_exact;
            row.f_pert = r.f_pert;
            row.one_minus_f = Some(r.one_minus_f());
        }
        Err(e) => {
            log::warn!("{}={value}: {e}", spec.param.name());
            row.status = format!("error: {e}");
        }
    }
    row
}

/// Runs every point on the rayon pool. Rows come back in input order.
pub fn run_sweep(spec: &SweepSpec) -> Vec<SweepRow> {
    spec.values
        .par_iter()
        .map(|&v| run_point(spec, v))
        .collect()
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn write_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        out.write_record([
            r.param.name().to_string(),
            fmt_float(r.value),
            fmt_opt(r.f_exact),
            fmt_opt(r.f_pert),
            fmt_opt(r.one_minus_f),
            r.status.clone(),
            r.flags.join(";"),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Fitted slope of `F` against `L` next to `m_th`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeReport {
    pub rabi: f64,
    pub coupling: f64,
    pub qubits: Vec<usize>,
    pub fidelities: Vec<f64>,
    pub fit: LinearFit,
    pub slope_th: f64,
    /// `|m - m_th| / |m_th|`.
    pub relative_deviation: f64,
    /// `J~omega` when `J < 2Ω`, `deviates` when off by more than 25%.
    pub flags: Vec<&'static str>,
}

pub fn slope_scan(
    base: &ChainParams,
    rabi: f64,
    qubits: &[usize],
    choice: PropagatorChoice,
    order: Order,
) -> Result<SlopeReport> {
    if qubits.len() < 3 {
        return Err(Error::InvalidParameter(
            "a slope fit needs at least three L values".into(),
        ));
    }
    let fidelities = qubits
        .par_iter()
        .map(|&l| {
            let p = base.with_qubits(l)?;
            Ok(simulate(&p, rabi, choice, order)?.report.fidelity())
        })
        .collect::<Result<Vec<f64>>>()?;
    let xs: Vec<f64> = qubits.iter().map(|&l| l as f64).collect();
    let fit = linear_fit(&xs, &fidelities)?;
    let m_th = slope_th(rabi, base.coupling());
    let relative_deviation = if m_th == 0.0 {
        f64::INFINITY
    } else {
        (fit.slope - m_th).abs() / m_th.abs()
    };
    let mut flags = Vec::new();
    if base.coupling() < 2.0 * rabi {
        flags.push("J~omega");
    }
    if relative_deviation.is_nan() || relative_deviation > 0.25 {
        flags.push("deviates");
    }
    Ok(SlopeReport {
        rabi,
        coupling: base.coupling(),
        qubits: qubits.to_vec(),
        fidelities,
        fit,
        slope_th: m_th,
        relative_deviation,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::two_pi_k_omega;

    fn base() -> ChainParams {
        ChainParams::new(4, 0.0, 100.0, 1.0).unwrap()
    }

    #[test]
    fn range_validation() {
        let r = SweepSpec::range(SweepParam::Coupling, base(), 0.118, 1.0, 2.0, 5).unwrap();
        assert_eq!(r.values(), &[1.0, 1.25, 1.5, 1.75, 2.0]);
        assert!(SweepSpec::range(SweepParam::Coupling, base(), 0.118, 1.0, 2.0, 1).is_err());
        assert!(SweepSpec::range(SweepParam::Coupling, base(), 0.118, 2.0, 1.0, 3).is_err());
        assert!(SweepSpec::range(SweepParam::Coupling, base(), 0.118, 1.0, 1.0, 1).is_ok());
        assert!(SweepSpec::list(SweepParam::Qubits, base(), 0.118, vec![3.0, 4.5]).is_err());
        assert!(SweepSpec::list(SweepParam::Coupling, base(), 0.118, vec![]).is_err());
        assert_eq!(SweepParam::parse("Omega").unwrap(), SweepParam::Rabi);
        assert!(SweepParam::parse("x").is_err());
    }

    #[test]
    fn rows_in_order_with_errors_recorded() {
        let spec = SweepSpec::list(SweepParam::Qubits, base(), 0.118, vec![2.0, 3.0, 4.0]).unwrap();
        let rows = run_sweep(&spec);
        assert_eq!(rows.len(), 3);
        assert!(rows[0].status.starts_with("error"));
        assert!(rows[0].f_exact.is_none());
        assert!(rows[1].is_ok() && rows[2].is_ok());
        assert_eq!(rows[1].value, 3.0);
        let f = rows[2].f_exact.unwrap();
        assert_eq!(rows[2].one_minus_f.unwrap(), 1.0 - f);
    }

    #[test]
    fn csv_is_stable_and_well_formed() {
        let spec = SweepSpec::range(SweepParam::Coupling, base(), 0.118, 24.8, 25.2, 3)
            .unwrap()
            .with_propagator(PropagatorChoice::Exact, Order::Block);
        let rows = run_sweep(&spec);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&rows, &mut a).unwrap();
        write_csv(&run_sweep(&spec), &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "param,value,f_exact,f_pert,one_minus_f,status,flags"
        );
        let first = lines.next().unwrap();
        let fields: Vec<&str> = first.split(',').collect();
        assert_eq!(fields.len(), 7);
        assert_eq!(fields[0], "J");
        assert_eq!(fields[1], "2.4800000000000001e1");
        assert_eq!(fields[3], "");
        assert_eq!(fields[5], "ok");
        assert!(fields[6].split(';').any(|f| f == "fake"));
    }

    #[test]
    fn two_pi_k_flag() {
        let p = base();
        let w3 = two_pi_k_omega(1.0, 3).unwrap();
        assert!(point_flags(&p, w3).contains(&"2pik"));
        assert!(point_flags(&p, w3 * 1.002).contains(&"2pik"));
        let mid = 0.5 * (two_pi_k_omega(1.0, 3).unwrap() + two_pi_k_omega(1.0, 4).unwrap());
        assert!(!point_flags(&p, mid).contains(&"2pik"));
        assert!(point_flags(&p, 500.0).contains(&"chaos"));
    }

    #[test]
    fn slope_needs_three_points_and_flags_small_j() {
        let p = base().with_coupling(0.2).unwrap();
        assert!(slope_scan(&p, 0.118, &[3, 4], PropagatorChoice::Exact, Order::Block).is_err());
        let r = slope_scan(&p, 0.118, &[3, 4, 5], PropagatorChoice::Pert, Order::Block).unwrap();
        assert!(r.flags.contains(&"J~omega"));
        assert_eq!(r.fidelities.len(), 3);
    }
}
