//! Trial runner: loads a preset or TOML scenario, runs it (or a stiffness
//! sweep, one thread per trial), and writes `timeseries.csv`,
//! `summary.csv`, and `cycles.csv` into the output directory.
//!
//! Exit codes: 0 success, 2 bad preset/config, 3 simulation abort,
//! 4 unwritable output.

use clap::Parser;
use dyadsim::analysis::{
    band_stats, detect_heel_strikes, normalize_cycles, summarize, TrialSummary, CYCLE_POINTS,
    STRIKE_MIN_GAP, STRIKE_THRESHOLD,
};
use dyadsim::coupling::CouplingSpace;
use dyadsim::presets::{preset, PRESET_NAMES};
use dyadsim::sim::{run_trial, validate_scenario, Scenario, TrialLog};
use dyadsim::types::{Side, UserId};
use dyadsim::Error;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dyadsim", version, about = "Coupled-exoskeleton dyad trial runner")]
struct Cli {
    /// Built-in scenario name (nc, soft, hard, hard-hip30, hard-knee20,
    /// uni-joint, uni-task-static)
    #[arg(long, value_name = "NAME", conflicts_with = "config")]
    preset: Option<String>,

    /// Scenario TOML file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, created if missing
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Override the trial duration, seconds
    #[arg(long, value_name = "S")]
    duration: Option<f64>,

    /// Override the RNG seed
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Override the coupling latency, whole ticks
    #[arg(long, value_name = "TICKS")]
    latency: Option<usize>,

    /// Run one trial per stiffness, e.g. --sweep K=0,30,70; damping keeps
    /// the base scenario's C:K ratio (1:7 when the base is uncoupled)
    #[arg(long, value_name = "K=LIST")]
    sweep: Option<String>,

    /// Check the scenario (or every preset) and exit without simulating
    #[arg(long)]
    validate: bool,
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    if cli.validate {
        return validate_mode(cli);
    }
    let base = load_scenario(cli)?;
    match &cli.sweep {
        Some(spec) => run_sweep(cli, &base, spec),
        None => run_single(cli, &base),
    }
}

fn load_scenario(cli: &Cli) -> Result<Scenario, Failure> {
    let mut s = match (&cli.preset, &cli.config) {
        (Some(name), _) => preset(name).map_err(|_| {
            fail(
                2,
                format!(
                    "unknown preset '{name}'; available presets: {}",
                    PRESET_NAMES.join(", ")
                ),
            )
        })?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| fail(2, format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text)
                .map_err(|e| fail(2, format!("invalid config {}: {e}", path.display())))?
        }
        (None, None) => return Err(fail(2, "pass --preset <name> or --config <path>")),
    };
    if let Some(d) = cli.duration {
        s.duration = d;
    }
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(l) = cli.latency {
        s.latency_ticks = l;
    }
    Ok(s)
}

fn validate_mode(cli: &Cli) -> Result<(), Failure> {
    let targets: Vec<Scenario> = if cli.preset.is_none() && cli.config.is_none() {
        PRESET_NAMES
            .iter()
            .map(|n| preset(n).expect("shipped preset"))
            .collect()
    } else {
        let base = load_scenario(cli)?;
        match &cli.sweep {
            Some(spec) => sweep_variants(&base, spec)?
                .into_iter()
                .map(|(_, s)| s)
                .collect(),
            None => vec![base],
        }
    };

    let mut bad = false;
    for s in &targets {
        let report = validate_scenario(s);
        if report.is_clean() {
            println!("ok: {}", s.label);
        } else {
            bad = true;
            for v in &report.violations {
                println!("violation [{}]: {v}", s.label);
            }
        }
        for w in &report.warnings {
            println!("warning [{}]: {w}", s.label);
        }
    }
    if bad {
        Err(fail(2, "validation found violations"))
    } else {
        Ok(())
    }
}

fn check_valid(s: &Scenario) -> Result<(), Failure> {
    let report = validate_scenario(s);
    if report.is_clean() {
        Ok(())
    } else {
        Err(fail(
            2,
            format!(
                "invalid scenario '{}':\n  {}",
                s.label,
                report.violations.join("\n  ")
            ),
        ))
    }
}

fn run(s: &Scenario) -> Result<TrialLog, Failure> {
    run_trial(s).map_err(|e| match e {
        Error::Aborted { .. } => fail(3, e.to_string()),
        other => fail(2, other.to_string()),
    })
}

fn write_err(path: &Path, e: io::Error) -> Failure {
    fail(4, format!("cannot write {}: {e}", path.display()))
}

fn run_single(cli: &Cli, s: &Scenario) -> Result<(), Failure> {
    check_valid(s)?;
    let log = run(s)?;
    fs::create_dir_all(&cli.out).map_err(|e| write_err(&cli.out, e))?;
    let row = summarize(&log);

    let ts = cli.out.join("timeseries.csv");
    write_timeseries(&ts, &log).map_err(|e| write_err(&ts, e))?;
    let cy = cli.out.join("cycles.csv");
    write_cycles(&cy, &log).map_err(|e| write_err(&cy, e))?;
    let su = cli.out.join("summary.csv");
    write_summary(&su, std::slice::from_ref(&row)).map_err(|e| write_err(&su, e))?;

    print_row(&row);
    println!(
        "wrote {} ({} ticks), {}, {}",
        ts.display(),
        log.len(),
        su.display(),
        cy.display()
    );
    Ok(())
}

fn run_sweep(cli: &Cli, base: &Scenario, spec: &str) -> Result<(), Failure> {
    if base.coupling.space != CouplingSpace::Joint {
        return Err(fail(2, "--sweep varies joint-space gains; the base scenario couples in task space"));
    }
    let variants = sweep_variants(base, spec)?;
    for (_, s) in &variants {
        check_valid(s)?;
    }
    fs::create_dir_all(&cli.out).map_err(|e| write_err(&cli.out, e))?;

    let out = &cli.out;
    let outcomes: Vec<Result<TrialSummary, Failure>> = std::thread::scope(|scope| {
        let handles: Vec<_> = variants
            .iter()
            .map(|(label, s)| {
                scope.spawn(move || -> Result<TrialSummary, Failure> {
                    let log = run(s)?;
                    let dir = out.join(label);
                    fs::create_dir_all(&dir).map_err(|e| write_err(&dir, e))?;
                    let ts = dir.join("timeseries.csv");
                    write_timeseries(&ts, &log).map_err(|e| write_err(&ts, e))?;
                    let cy = dir.join("cycles.csv");
                    write_cycles(&cy, &log).map_err(|e| write_err(&cy, e))?;
                    Ok(summarize(&log))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trial thread"))
            .collect()
    });

    let mut rows = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        rows.push(outcome?);
    }
    rows.sort_by(|a, b| a.condition.cmp(&b.condition));

    let su = out.join("summary.csv");
    write_summary(&su, &rows).map_err(|e| write_err(&su, e))?;
    for row in &rows {
        print_row(row);
    }
    println!("wrote {} and {} trial directories", su.display(), rows.len());
    Ok(())
}

fn sweep_variants(base: &Scenario, spec: &str) -> Result<Vec<(String, Scenario)>, Failure> {
    let list = spec
        .strip_prefix("K=")
        .ok_or_else(|| fail(2, format!("sweep spec '{spec}' must look like K=0,30,70")))?;
    let mut values = Vec::new();
    for item in list.split(',') {
        let v: f64 = item
            .trim()
            .parse()
            .map_err(|_| fail(2, format!("sweep value '{item}' is not a number")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(fail(
                2,
                format!("sweep stiffness must be finite and non-negative (got {item})"),
            ));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(fail(2, "sweep list is empty"));
    }

    let ratio = if base.coupling.k_joint[0] > 0.0 {
        base.coupling.c_joint[0] / base.coupling.k_joint[0]
    } else {
        1.0 / 7.0
    };
    Ok(values
        .into_iter()
        .map(|k| {
            let mut s = base.clone();
            let label = sweep_label(k);
            s.label = label.clone();
            s.coupling.k_joint = [k; 4];
            s.coupling.c_joint = [k * ratio; 4];
            (label, s)
        })
        .collect())
}

fn sweep_label(k: f64) -> String {
    if k.fract() == 0.0 && (0.0..1000.0).contains(&k) {
        format!("K{:03}", k as u32)
    } else {
        format!("K{k}").replace('.', "p")
    }
}

fn print_row(r: &TrialSummary) {
    let mad = match &r.mean_abs_diff {
        Some(d) => format!("mad hip {:.2} knee {:.2} deg", d.hip_deg, d.knee_deg),
        None => "no gait cycles".to_string(),
    };
    println!(
        "{}: {mad}, torque rms {:.2}/{:.2} Nm",
        r.condition, r.torque_rms[0], r.torque_rms[1]
    );
}

/// Full per-tick state dump, radians and Nm, 17 significant digits so the
/// values round-trip exactly.
fn write_timeseries(path: &Path, log: &TrialLog) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let dim = log
        .records
        .first()
        .map_or(4, |rec| rec.torques[0].tau_des.dim());

    write!(w, "t")?;
    for user in ["userA", "userB"] {
        write!(w, ",{user}.phi")?;
        for j in 0..4 {
            write!(w, ",{user}.q{j}")?;
        }
        for j in 0..4 {
            write!(w, ",{user}.qdot{j}")?;
        }
        for j in 0..dim {
            write!(w, ",{user}.tau_des{j}")?;
        }
        for j in 0..dim {
            write!(w, ",{user}.tau_app{j}")?;
        }
    }
    writeln!(w, ",rA.x,rA.y,rB.x,rB.y,phaseA,phaseB,stanceA,stanceB")?;

    for rec in &log.records {
        write!(w, "{:.16e}", rec.t)?;
        for u in 0..2 {
            let s = &rec.states[u];
            write!(w, ",{:.16e}", s.phi)?;
            for j in 0..4 {
                write!(w, ",{:.16e}", s.q[j])?;
            }
            for j in 0..4 {
                write!(w, ",{:.16e}", s.qdot[j])?;
            }
            let tq = &rec.torques[u];
            for j in 0..dim {
                write!(w, ",{:.16e}", tq.tau_des.component(j))?;
            }
            for j in 0..dim {
                write!(w, ",{:.16e}", tq.tau_applied.component(j))?;
            }
        }
        write!(
            w,
            ",{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            rec.r[0].x, rec.r[0].y, rec.r[1].x, rec.r[1].y, rec.states[0].phase, rec.states[1].phase
        )?;
        writeln!(
            w,
            ",{},{}",
            stance_code(rec.stance[0]),
            stance_code(rec.stance[1])
        )?;
    }
    w.flush()
}

fn stance_code(side: Side) -> u8 {
    match side {
        Side::Left => 0,
        Side::Right => 1,
    }
}

/// Mean +- std gait-cycle bands per user/side/joint, degrees. Users without
/// detectable cycles (stationary conditions) contribute no rows.
fn write_cycles(path: &Path, log: &TrialLog) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "condition,user,side,joint,pct,mean_deg,std_deg")?;
    for user in [UserId::A, UserId::B] {
        let bands = detect_heel_strikes(log, user, STRIKE_MIN_GAP, STRIKE_THRESHOLD)
            .ok()
            .and_then(|st| normalize_cycles(log, &st, user).ok())
            .and_then(|c| band_stats(&c).ok());
        let Some(bands) = bands else { continue };
        for side in Side::BOTH {
            let jb = &bands.per_side[side.index()];
            for (joint, band) in [("hip", &jb.hip), ("knee", &jb.knee)] {
                for i in 0..CYCLE_POINTS {
                    writeln!(
                        w,
                        "{},{user},{side},{joint},{i},{:.6},{:.6}",
                        log.scenario.label, band.mean[i], band.std[i]
                    )?;
                }
            }
        }
    }
    w.flush()
}

/// One row per trial, degrees. Metrics that need gait cycles are left empty
/// when none were detected.
fn write_summary(path: &Path, rows: &[TrialSummary]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "condition,mad_hip_deg,mad_knee_deg,torque_rms_a_nm,torque_rms_b_nm,\
         sync_bounded,drift_span_cycles,peak_asym_hip_a_deg,peak_asym_knee_a_deg,\
         peak_asym_hip_b_deg,peak_asym_knee_b_deg"
    )?;
    for r in rows {
        write!(w, "{}", r.condition)?;
        match &r.mean_abs_diff {
            Some(d) => write!(w, ",{:.6},{:.6}", d.hip_deg, d.knee_deg)?,
            None => write!(w, ",,")?,
        }
        write!(w, ",{:.6},{:.6}", r.torque_rms[0], r.torque_rms[1])?;
        match r.sync_bounded {
            Some(b) => write!(w, ",{b}")?,
            None => write!(w, ",")?,
        }
        match r.drift_span {
            Some(d) => write!(w, ",{d:.6}")?,
            None => write!(w, ",")?,
        }
        for u in 0..2 {
            match r.peak_asym[u] {
                Some((hip, knee)) => write!(w, ",{hip:.6},{knee:.6}")?,
                None => write!(w, ",,")?,
            }
        }
        writeln!(w)?;
    }
    w.flush()
}
