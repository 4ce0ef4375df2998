//! `spinfid`: runs the entanglement protocol on an Ising spin chain, sweeps
//! parameters to CSV, fits the fidelity slope and checks the selective regime.

mod config;

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;

use spinfid_core::hamiltonian::{chaos_border, coupling_census, MAX_CENSUS_QUBITS};
use spinfid_core::protocol::{
    build_entanglement_protocol, validate_selective, Level, SelectiveThresholds,
};
use spinfid_core::sweep::{run_sweep, slope_scan, write_csv};
use spinfid_core::{fidelity, Error, SweepSpec};

use config::Settings;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "spinfid",
    version,
    about = "Fidelity of the entanglement protocol on an Ising spin chain"
)]
struct Cli {
    #[command(flatten)]
    opts: Opts,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug)]
struct Opts {
    /// Number of spins.
    #[arg(long = "L", global = true)]
    qubits: Option<usize>,
    /// Ising coupling.
    #[arg(long = "J", global = true, allow_negative_numbers = true)]
    coupling: Option<f64>,
    /// Larmor frequency gradient.
    #[arg(long = "a", global = true)]
    gradient: Option<f64>,
    /// Rabi frequency of the pulses.
    #[arg(long = "omega", global = true)]
    rabi: Option<f64>,
    /// Larmor frequency of spin 0.
    #[arg(long = "omega0", global = true, allow_negative_numbers = true)]
    omega0: Option<f64>,
    /// Swept parameter: J, a, omega or L.
    #[arg(long, global = true)]
    param: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    from: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    to: Option<f64>,
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Explicit comma-separated sweep values, instead of a range.
    #[arg(long, global = true)]
    values: Option<String>,
    /// exact, pert or both.
    #[arg(long, global = true)]
    propagator: Option<String>,
    /// Perturbative order: block or block+pt1.
    #[arg(long, global = true)]
    order: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exit with code 2 when the selective-regime check fails.
    #[arg(long, global = true)]
    strict: bool,
    /// key = value file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the protocol once and print the fidelity report.
    Run {
        /// Also dump the ideal and final state amplitudes.
        #[arg(long)]
        dump: bool,
    },
    /// Sweep one parameter and write CSV.
    Sweep,
    /// Fit F against L over --from..=--to spins (default 4..=10).
    Slope,
    /// Print the chaos-border estimate.
    Chaos,
    /// Check the selective-regime inequalities.
    Validate,
    /// Print the pulse table.
    ProtocolDump,
}

impl Opts {
    fn settings(&self) -> Result<Settings, CliError> {
        let values = match &self.values {
            Some(v) => {
                Some(config::parse_list(v).map_err(|m| CliError::Usage(format!("--values: {m}")))?)
            }
            None => None,
        };
        let flags = Settings {
            qubits: self.qubits,
            coupling: self.coupling,
            gradient: self.gradient,
            rabi: self.rabi,
            omega0: self.omega0,
            param: self.param.clone(),
            from: self.from,
            to: self.to,
            steps: self.steps,
            values,
            propagator: self.propagator.clone(),
            order: self.order.clone(),
            out: self.out.clone(),
            strict: self.strict.then_some(true),
        };
        match &self.config {
            Some(path) => Ok(flags.or(config::load(path)?)),
            None => Ok(flags),
        }
    }
}

fn output(s: &Settings) -> Result<Box<dyn Write>, CliError> {
    match &s.out {
        Some(path) => {
            let f = File::create(path)
                .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", path.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

/// Prints the regime checks to stderr and fails under `--strict`.
fn check_regime(s: &Settings, verbose: bool) -> Result<(), CliError> {
    let p = s.chain()?;
    let rabi = s.rabi()?;
    let report = validate_selective(&p, rabi, &SelectiveThresholds::default());
    if verbose {
        let mut out = output(s)?;
        for c in &report.checks {
            let level = match c.level {
                Level::Pass => "pass",
                Level::Warn => "warn",
                Level::Fail => "FAIL",
            };
            writeln!(out, "{:<20} {:>12.4e}  {level}", c.name, c.value)?;
        }
        match report.nearest_fake {
            Some((j, rel)) => writeln!(
                out,
                "nearest fake transition J = {j:.6}, relative distance {rel:.4}{}",
                if report.fake_flag { "  FAIL" } else { "" }
            )?,
            None => writeln!(out, "no fake transitions for this chain")?,
        }
        writeln!(
            out,
            "verdict: {}",
            if report.passed() {
                "selective"
            } else {
                "not selective"
            }
        )?;
        out.flush()?;
    } else if !report.passed() || report.has_warnings() {
        for c in report.checks.iter().filter(|c| c.level != Level::Pass) {
            eprintln!("warning: {} = {:.4e} is not small", c.name, c.value);
        }
        if report.fake_flag {
            eprintln!("warning: J is inside a fake-transition window");
        }
    }
    if s.strict() && !report.passed() {
        return Err(CliError::Validation(
            "parameters are outside the selective regime".into(),
        ));
    }
    Ok(())
}

fn cmd_run(s: &Settings, dump: bool) -> Result<(), CliError> {
    check_regime(s, false)?;
    let p = s.chain()?;
    let rabi = s.rabi()?;
    let t0 = Instant::now();
    let sim = fidelity::simulate(&p, rabi, s.propagator()?, s.order()?)?;
    info!("run finished in {:.3} s", t0.elapsed().as_secs_f64());
    let r = &sim.report;
    let mut out = output(s)?;
    writeln!(
        out,
        "L = {}  J = {}  a = {}  omega = {}  omega0 = {}",
        p.qubits(),
        p.coupling(),
        p.gradient(),
        rabi,
        p.omega0()
    )?;
    writeln!(out, "pulses               {}", r.pulses)?;
    writeln!(out, "near-resonant pulses {}", r.near_resonant_pulses)?;
    writeln!(out, "total time           {:.6e}", r.total_time)?;
    if let Some(f) = r.f_exact {
        writeln!(out, "F_exact              {f:.12}")?;
    }
    if let Some(f) = r.f_pert {
        writeln!(
            out,
            "F_pert               {f:.12}  (order {})",
            s.order()?.name()
        )?;
    }
    writeln!(out, "1 - F                {:.6e}", r.one_minus_f())?;
    writeln!(out, "slope m_th           {:.6e}", r.slope_th)?;
    match fidelity::predicted_fidelity(p.qubits(), rabi, p.coupling()) {
        Ok(pred) => writeln!(
            out,
            "predicted F          {:.12}  (linear {:.12})",
            pred.ansatz, pred.linear
        )?,
        Err(e) => writeln!(out, "predicted F          n/a ({e})")?,
    }
    let det: Vec<String> = r
        .spectator_detunings
        .iter()
        .map(|d| format!("{d:.4}"))
        .collect();
    writeln!(out, "spectator detunings  {}", det.join(" "))?;
    if dump {
        writeln!(out, "\n# ideal state")?;
        sim.ideal.write_dump(&mut out)?;
        if let Some(st) = &sim.exact {
            writeln!(out, "\n# exact final state")?;
            st.write_dump(&mut out)?;
        }
        if let Some(st) = &sim.pert {
            writeln!(out, "\n# perturbative final state")?;
            st.write_dump(&mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_sweep(s: &Settings) -> Result<(), CliError> {
    let param = s.sweep_param()?;
    let base = s.chain()?;
    let rabi = s.rabi()?;
    let spec = match (&s.values, s.from, s.to) {
        (Some(v), None, None) => SweepSpec::list(param, base, rabi, v.clone())?,
        (Some(_), _, _) => {
            return Err(CliError::Usage(
                "give either --values or --from/--to, not both".into(),
            ))
        }
        (None, Some(from), Some(to)) => {
            let steps = s
                .steps
                .ok_or_else(|| CliError::Usage("sweep range needs --steps".into()))?;
            SweepSpec::range(param, base, rabi, from, to, steps)?
        }
        _ => {
            return Err(CliError::Usage(
                "sweep needs --from and --to, or --values".into(),
            ))
        }
    }
    .with_propagator(s.propagator()?, s.order()?);
    let t0 = Instant::now();
    let rows = run_sweep(&spec);
    info!(
        "{} points in {:.3} s",
        rows.len(),
        t0.elapsed().as_secs_f64()
    );
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    write_csv(&rows, output(s)?)?;
    if failed > 0 {
        eprintln!("warning: {failed} of {} points failed", rows.len());
        if s.strict() {
            return Err(CliError::Numerical(format!("{failed} sweep points failed")));
        }
    }
    Ok(())
}

fn cmd_slope(s: &Settings) -> Result<(), CliError> {
    let base = s.chain()?;
    let rabi = s.rabi()?;
    let lo = s.from.unwrap_or(4.0);
    let hi = s.to.unwrap_or(10.0);
    if lo.fract() != 0.0 || hi.fract() != 0.0 || lo < 3.0 || hi < lo {
        return Err(CliError::Usage(format!(
            "slope needs integer L bounds with 3 <= from <= to, got {lo}..{hi}"
        )));
    }
    let qubits: Vec<usize> = (lo as usize..=hi as usize).collect();
    let rep = slope_scan(&base, rabi, &qubits, s.propagator()?, s.order()?)?;
    let mut out = output(s)?;
    writeln!(
        out,
        "J = {}  a = {}  omega = {}",
        base.coupling(),
        base.gradient(),
        rabi
    )?;
    writeln!(out, "# L F")?;
    for (l, f) in rep.qubits.iter().zip(&rep.fidelities) {
        writeln!(out, "{l} {f:.12}")?;
    }
    writeln!(
        out,
        "slope                {:.6e} +- {:.2e}",
        rep.fit.slope, rep.fit.slope_stderr
    )?;
    writeln!(out, "intercept            {:.12}", rep.fit.intercept)?;
    writeln!(out, "relative error       {:.4e}", rep.fit.relative_error())?;
    writeln!(out, "m_th                 {:.6e}", rep.slope_th)?;
    writeln!(out, "deviation from m_th  {:.4}", rep.relative_deviation)?;
    if !rep.flags.is_empty() {
        writeln!(out, "flags                {}", rep.flags.join(";"))?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_chaos(s: &Settings) -> Result<(), CliError> {
    let p = s.chain()?;
    let rabi = s.rabi()?;
    let est = chaos_border(&p);
    let mut out = output(s)?;
    writeln!(out, "M_f                  {}", est.connectivity)?;
    writeln!(out, "(dE)_f               {:.6}", est.energy_spread)?;
    writeln!(out, "delta_f              {:.6}", est.mean_spacing)?;
    writeln!(out, "omega_cr             {:.6}", est.critical_rabi)?;
    writeln!(out, "omega_cr (a + J/L)   {:.6}", est.critical_rabi_approx)?;
    if p.qubits() <= MAX_CENSUS_QUBITS {
        let c = coupling_census(&p)?;
        writeln!(
            out,
            "census               M_f in [{}, {}], max spread {:.6}",
            c.min_connectivity, c.max_connectivity, c.max_spread
        )?;
    } else {
        writeln!(
            out,
            "census               skipped above L = {MAX_CENSUS_QUBITS}"
        )?;
    }
    let verdict = if est.is_chaotic(rabi) {
        "chaos possible: omega is above the border"
    } else {
        "no chaos: omega is below the border"
    };
    writeln!(out, "omega / omega_cr     {:.4e}", rabi / est.critical_rabi)?;
    writeln!(out, "verdict              {verdict}")?;
    out.flush()?;
    Ok(())
}

fn cmd_protocol_dump(s: &Settings) -> Result<(), CliError> {
    let prot = build_entanglement_protocol(&s.chain()?, s.rabi()?)?;
    let mut out = output(s)?;
    out.write_all(prot.to_table().as_bytes())?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let s = cli.opts.settings()?;
    match cli.cmd {
        Command::Run { dump } => cmd_run(&s, dump),
        Command::Sweep => cmd_sweep(&s),
        Command::Slope => cmd_slope(&s),
        Command::Chaos => cmd_chaos(&s),
        Command::Validate => check_regime(&s, true),
        Command::ProtocolDump => cmd_protocol_dump(&s),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
