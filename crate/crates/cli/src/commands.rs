use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use delaycert::search::{self, FeasibilityOracle, GainProblem, StabilityOracle, SynthesisOracle};
use delaycert::spectral::{self, SpectralSettings};
use delaycert::synthesis::{self, GainKind, SynthesisOutcome};
use delaycert::{sim, stability, CertifyOutcome, DelaySystem, SlackMode, SolverSettings};

use crate::files::{write_atomic, write_json, CertificateFile, GainFile, SystemFile};
use crate::{
    AnalyzeArgs, CheckArgs, GainOptions, InequalityArgs, IntervalArgs, KindArg, Outcome, SimulateArgs, SweepArgs,
    SweepModeArg, SynthesizeArgs,
};

fn load_system(path: &Path, delay: Option<f64>) -> Result<SystemFile> {
    let sys = SystemFile::load(path)?;
    match delay {
        Some(h) => sys.with_delay(h),
        None => Ok(sys),
    }
}

fn gain_problem(kind: KindArg) -> GainProblem {
    match kind {
        KindArg::Controller => GainProblem::Controller,
        KindArg::Observer => GainProblem::Observer,
    }
}

fn kind_name(kind: KindArg) -> &'static str {
    match kind {
        KindArg::Controller => "controller",
        KindArg::Observer => "observer",
    }
}

/// Feasibility oracle and a label for the CSV `mode` column.
fn oracle_for(
    sys: &SystemFile,
    mode: SlackMode,
    gain: &GainOptions,
    settings: &SolverSettings,
) -> (Box<dyn FeasibilityOracle>, String) {
    match sys {
        SystemFile::Analysis(s) => (
            Box::new(StabilityOracle {
                system: s.clone(),
                mode,
                settings: settings.clone(),
            }),
            mode.label(),
        ),
        SystemFile::Controlled(s) => (
            Box::new(SynthesisOracle {
                system: s.clone(),
                problem: gain_problem(gain.kind),
                profile: gain.profile,
                settings: settings.clone(),
            }),
            format!(
                "{}:{}",
                kind_name(gain.kind),
                SlackMode::Structured { profile: gain.profile }.label()
            ),
        ),
    }
}

fn print_certificate(out: &mut dyn Write, cert: &delaycert::StabilityCertificate) -> Result<()> {
    writeln!(out, "beta1 = {:.6e}", cert.beta1)?;
    writeln!(out, "beta2 = {:.6e}", cert.beta2)?;
    writeln!(out, "gamma = {:.6}", cert.gamma)?;
    writeln!(
        out,
        "margins: decay max eig {:.3e}, positivity min eig {:.3e}, S min eig {:.3e}, R min eig {:.3e}",
        cert.margins.decay_max_eig, cert.margins.positivity_min_eig, cert.margins.s_min_eig, cert.margins.r_min_eig
    )?;
    Ok(())
}

fn print_infeasible(out: &mut dyn Write, margin: Option<f64>) -> Result<()> {
    match margin {
        Some(m) => writeln!(out, "INFEASIBLE (best normalized margin {m:.3e})")?,
        None => writeln!(out, "INFEASIBLE (dual certificate)")?,
    }
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs, settings: &SolverSettings, out: &mut dyn Write) -> Result<Outcome> {
    let file = load_system(&args.system, args.delay)?;
    let sys = file.analysis()?;
    let mode = args.mode.slack_mode();
    writeln!(
        out,
        "system: n = {}, h = {}, alpha = {}, mode = {}",
        sys.n(),
        sys.h,
        args.alpha,
        mode.label()
    )?;
    match stability::certify(sys, args.alpha, &mode, settings)? {
        CertifyOutcome::Certified(cert) => {
            writeln!(out, "FEASIBLE")?;
            print_certificate(out, &cert)?;
            if let Some(path) = &args.out {
                write_json(path, &CertificateFile::new(sys, &cert))?;
                writeln!(out, "certificate written to {}", path.display())?;
            }
            Ok(Outcome::Success)
        }
        CertifyOutcome::Infeasible { margin } => {
            print_infeasible(out, margin)?;
            Ok(Outcome::Negative)
        }
    }
}

pub fn interval(args: &IntervalArgs, settings: &SolverSettings, out: &mut dyn Write) -> Result<Outcome> {
    let sys = SystemFile::load(&args.system)?;
    let (oracle, label) = oracle_for(&sys, args.mode.slack_mode(), &args.gain, settings);
    let found = search::bisect_interval(oracle.as_ref(), args.alpha, args.h_lo, args.h_hi, args.tol)?;
    let Some(iv) = found else {
        writeln!(
            out,
            "INFEASIBLE: no feasible delay in [{}, {}] at alpha = {}",
            args.h_lo, args.h_hi, args.alpha
        )?;
        return Ok(Outcome::Negative);
    };
    writeln!(out, "h_min = {:.6}  h_max = {:.6}", iv.h_min, iv.h_max)?;
    if iv.infeasible_below.is_none() {
        writeln!(
            out,
            "note: feasible at the bottom of the search range, h = {}",
            args.h_lo
        )?;
    }
    if iv.infeasible_above.is_none() {
        writeln!(out, "note: feasible at the top of the search range, h = {}", args.h_hi)?;
    }
    if iv.other_runs > 0 {
        writeln!(out, "note: {} further feasible run(s) in the range", iv.other_runs)?;
    }
    let csv = format!(
        "alpha,mode,h_min,h_max\n{},{},{},{}\n",
        args.alpha, label, iv.h_min, iv.h_max
    );
    write!(out, "{csv}")?;
    if let Some(path) = &args.out {
        write_atomic(path, csv.as_bytes())?;
    }
    Ok(Outcome::Success)
}

pub fn sweep(args: &SweepArgs, settings: &SolverSettings, out: &mut dyn Write) -> Result<Outcome> {
    if args.h_grid.0.is_empty() || args.alpha_grid.0.is_empty() {
        bail!("sweep grids must be nonempty");
    }
    let sys = SystemFile::load(&args.system)?;
    let (oracle, label) = oracle_for(&sys, args.mode.lmi_mode().slack_mode(), &args.gain, settings);
    let result = search::sweep(oracle.as_ref(), &args.h_grid.0, &args.alpha_grid.0)?;
    for p in result.failures() {
        log::warn!("solver failed at h = {}, alpha = {}: {:?}", p.h, p.alpha, p.outcome);
    }

    let spectral_column = if args.mode == SweepModeArg::Spectral {
        let analysis = sys
            .analysis()
            .context("the spectral column needs an analysis-form system")?;
        let points = spectral::spectral_abscissa_frontier(analysis, &args.h_grid.0, &SpectralSettings::default())?;
        Some(points.iter().map(|p| p.decay_rate()).collect::<Vec<_>>())
    } else {
        None
    };
    let fmt_spec = |v: Option<f64>| v.map_or_else(|| "error".to_string(), |v| v.to_string());

    let mut grid_csv = String::from("h,alpha,feasible");
    if spectral_column.is_some() {
        grid_csv.push_str(",alpha_spec");
    }
    grid_csv.push('\n');
    for (ih, &h) in result.h_grid.iter().enumerate() {
        for ia in 0..result.alpha_grid.len() {
            let p = result.get(ih, ia);
            let flag = match p.outcome {
                Ok(true) => "1",
                Ok(false) => "0",
                Err(_) => "error",
            };
            let _ = write!(grid_csv, "{},{},{}", h, p.alpha, flag);
            if let Some(col) = &spectral_column {
                let _ = write!(grid_csv, ",{}", fmt_spec(col[ih]));
            }
            grid_csv.push('\n');
        }
    }

    let frontier: std::collections::HashMap<u64, f64> =
        result.frontier().into_iter().map(|(h, a)| (h.to_bits(), a)).collect();
    let mut frontier_csv = String::from("h,alpha_star");
    if spectral_column.is_some() {
        frontier_csv.push_str(",alpha_spec");
    }
    frontier_csv.push('\n');
    for (ih, &h) in result.h_grid.iter().enumerate() {
        let star = frontier
            .get(&h.to_bits())
            .map_or_else(|| "none".to_string(), |a| a.to_string());
        let _ = write!(frontier_csv, "{h},{star}");
        if let Some(col) = &spectral_column {
            let _ = write!(frontier_csv, ",{}", fmt_spec(col[ih]));
        }
        frontier_csv.push('\n');
    }

    let feasible = result.points.iter().filter(|p| matches!(p.outcome, Ok(true))).count();
    let failed = result.failures().count();
    match &args.out {
        Some(path) => {
            write_atomic(path, grid_csv.as_bytes())?;
            writeln!(
                out,
                "{} points ({label}): {feasible} feasible, {failed} solver failures; grid written to {}",
                result.points.len(),
                path.display()
            )?;
        }
        None => write!(out, "{grid_csv}")?,
    }
    if let Some(path) = &args.frontier_out {
        write_atomic(path, frontier_csv.as_bytes())?;
    }
    Ok(Outcome::Success)
}

pub fn synthesize(args: &SynthesizeArgs, settings: &SolverSettings, out: &mut dyn Write) -> Result<Outcome> {
    let file = load_system(&args.system, args.delay)?;
    let sys = file.controlled()?;
    let profile = args.gain.profile;
    writeln!(
        out,
        "system: n = {}, h = {}, alpha = {}, {} with {}",
        sys.n(),
        sys.h,
        args.alpha,
        kind_name(args.gain.kind),
        SlackMode::Structured { profile }.label()
    )?;
    let outcome = match args.gain.kind {
        KindArg::Controller => synthesis::synthesize_controller(sys, args.alpha, &profile, settings)?,
        KindArg::Observer => synthesis::synthesize_observer(sys, args.alpha, &profile, settings)?,
    };
    let res = match outcome {
        SynthesisOutcome::Synthesized(res) => res,
        SynthesisOutcome::Infeasible { margin } => {
            print_infeasible(out, margin)?;
            return Ok(Outcome::Negative);
        }
    };
    writeln!(out, "FEASIBLE")?;
    let name = match res.kind {
        GainKind::StateFeedback => "K",
        GainKind::Observer => "L",
    };
    for (i, row) in res.gain.to_rows().iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(out, "{}[{i}] = [{}]", name, cells.join(", "))?;
    }
    writeln!(out, "condition number of the congruence: {:.3e}", res.condition_number)?;
    writeln!(out, "re-certified closed loop (free slack):")?;
    print_certificate(out, &res.certificate)?;
    if let Some(path) = &args.out {
        write_json(path, &GainFile::new(sys, &res))?;
        writeln!(out, "gain written to {}", path.display())?;
    }
    if let Some(path) = &args.certificate_out {
        write_json(path, &CertificateFile::new(&res.closed_loop, &res.certificate))?;
        writeln!(out, "certificate written to {}", path.display())?;
    }
    Ok(Outcome::Success)
}

fn load_gain(path: &Path, expected: GainKind, sys: &delaycert::ControlledSystem) -> Result<GainFile> {
    let g = GainFile::load(path)?;
    if g.kind != expected {
        bail!("{} holds a {:?} gain, expected {:?}", path.display(), g.kind, expected);
    }
    if (g.h - sys.h).abs() > 1e-12 * sys.h {
        log::warn!(
            "gain in {} was designed for h = {}, simulating h = {}",
            path.display(),
            g.h,
            sys.h
        );
    }
    Ok(g)
}

/// The delay system to integrate, and a description of it.
fn simulated_system(file: &SystemFile, args: &SimulateArgs) -> Result<(DelaySystem, &'static str)> {
    match file {
        SystemFile::Analysis(s) => {
            if args.controller.is_some() || args.observer.is_some() {
                bail!("gain files only apply to controlled-form systems");
            }
            Ok((s.clone(), "system"))
        }
        SystemFile::Controlled(s) => {
            let k = args
                .controller
                .as_deref()
                .map(|p| load_gain(p, GainKind::StateFeedback, s))
                .transpose()?;
            let l = args
                .observer
                .as_deref()
                .map(|p| load_gain(p, GainKind::Observer, s))
                .transpose()?;
            match (k, l) {
                // The synthesized gain acts as u = K y; the observer loop is
                // written for u = −K x̂, hence the sign flip.
                (Some(k), Some(l)) => Ok((
                    synthesis::assemble_closed_loop(&s.a, &s.b, &s.c, &k.gain.scale(-1.0), &l.gain, s.h)?,
                    "observer-based loop, state [x; x - x_hat]",
                )),
                (Some(k), None) => Ok((s.close_loop(&k.gain)?, "closed loop")),
                (None, Some(l)) => Ok((s.observer_error(&l.gain)?, "observer error dynamics")),
                (None, None) => bail!("a controlled system needs --controller and/or --observer"),
            }
        }
    }
}

pub fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<Outcome> {
    let file = load_system(&args.system, args.delay)?;
    let (sys, what) = simulated_system(&file, args)?;
    let n = sys.n();
    let phi = match &args.history {
        Some(src) => src.resolve(n)?,
        None => sim::HistoryFunction::constant(&vec![1.0; n]),
    };
    let dt = args.dt.unwrap_or(sys.h / 64.0);

    // Check the certificate before spending time on the run.
    let cert = match &args.certificate {
        Some(path) => {
            let c = CertificateFile::load(path)?.certificate();
            if !c
                .verify(&sys, 0.0)
                .context("certificate does not match the simulated system")?
            {
                bail!(
                    "certificate in {} does not verify for the simulated system",
                    path.display()
                );
            }
            Some(c)
        }
        None => None,
    };

    let rec = sim::integrate(&sys, &phi, args.horizon, dt)?;
    let t_end = *rec.times.last().expect("record holds t = 0");
    let final_norm = rec.final_state().iter().map(|v| v * v).sum::<f64>().sqrt();
    writeln!(out, "{what}: n = {n}, h = {}, dt = {}, t_end = {t_end}", sys.h, rec.dt)?;
    writeln!(out, "|phi|_W = {:.6e}, |x(t_end)| = {:.6e}", rec.phi_norm_w, final_norm)?;
    let mut outcome = Outcome::Success;
    if rec.diverged {
        writeln!(out, "DIVERGED at t = {t_end}")?;
        outcome = Outcome::Negative;
    }
    if let Some(c) = &cert {
        let env = sim::envelope_check(&rec, c.gamma, c.alpha);
        let verdict = if env.holds {
            "ENVELOPE HOLDS"
        } else {
            "ENVELOPE VIOLATED"
        };
        writeln!(
            out,
            "{verdict}: worst |x(t)| / (gamma e^(-alpha t) |phi|_W) = {:.6} at t = {}",
            env.worst_margin, env.worst_time
        )?;
        if !env.holds {
            outcome = Outcome::Negative;
        }
        if !rec.diverged {
            let lyap = sim::lyapunov_diagnostic(&rec, &c.p, &c.s, &c.r, c.alpha)?;
            let verdict = if lyap.nonincreasing {
                "FUNCTIONAL NONINCREASING"
            } else {
                "FUNCTIONAL INCREASES"
            };
            writeln!(
                out,
                "{verdict}: worst relative rise of e^(2 alpha t) V = {:.3e}",
                lyap.worst_rise
            )?;
        }
    }
    if let Some(path) = &args.out {
        write_atomic(path, rec.to_csv(args.derivatives).as_bytes())?;
        writeln!(out, "trajectory written to {}", path.display())?;
    }
    Ok(outcome)
}

pub fn check_certificate(args: &CheckArgs, out: &mut dyn Write) -> Result<Outcome> {
    let cert = CertificateFile::load(&args.certificate)?;
    if let Some(path) = &args.system {
        let sys = SystemFile::load(path)?.with_delay(cert.h)?;
        if sys != cert.system {
            bail!("certificate was issued for a different system than {}", path.display());
        }
    }
    let valid = cert.verify()?;
    writeln!(
        out,
        "{}: mode {}, alpha = {}, h = {}, gamma = {}",
        if valid { "VALID" } else { "INVALID" },
        cert.mode.label(),
        cert.alpha,
        cert.h,
        cert.gamma
    )?;
    Ok(if valid { Outcome::Success } else { Outcome::Negative })
}

pub fn verify_inequalities(args: &InequalityArgs, out: &mut dyn Write) -> Result<Outcome> {
    let report = delaycert::inequality::run_trials(args.trials, args.seed)?;
    let text = report.render();
    write!(out, "{text}")?;
    if let Some(path) = &args.out {
        write_atomic(path, text.as_bytes())?;
    }
    Ok(if report.all_hold() {
        Outcome::Success
    } else {
        Outcome::Negative
    })
}
