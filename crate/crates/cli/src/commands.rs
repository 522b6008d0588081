use std::fs;
use std::path::Path;

use behinv::hankel::min_pe_length;
use behinv::io::{
    format_signal_columns, read_bank, read_bounds, read_signal, read_system, write_bank,
    write_signal,
};
use behinv::{
    generate_pe_input, run_algorithm1, run_algorithm2, run_dob, track as track_output,
    verify_transfer_relation, DataBank, DobConfig, Error, History, InputBox, Signal, SolverConfig,
    TrackingProblem,
};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::{AnalyzeArgs, CollectArgs, DobArgs, EstimateArgs, Mode, SimulateArgs, TrackArgs};

type Result<T> = std::result::Result<T, Error>;

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn whole(signal: &Signal<f64>) -> DVector<f64> {
    DVector::from_column_slice(signal.data().as_slice())
}

#[derive(Serialize)]
struct AnalyzeReport {
    n: usize,
    m: usize,
    p: usize,
    inputs_le_outputs: bool,
    controllable: bool,
    observable: bool,
    observability_index: Option<usize>,
    inherent_delay: Option<usize>,
    #[serde(rename = "T_p", skip_serializing_if = "Option::is_none")]
    t_p: Option<usize>,
    #[serde(rename = "T_f", skip_serializing_if = "Option::is_none")]
    t_f: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    required_pe_order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_bank_length: Option<usize>,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let sys = read_system(&args.plant)?;
    if sys.m() > sys.p() {
        return Err(Error::UnsupportedSystem {
            inputs: sys.m(),
            outputs: sys.p(),
        });
    }
    let observability_index = sys.observability_index().ok();
    let inherent_delay = sys.inherent_delay(args.max_delay)?;
    let t_p = args.tp.or(observability_index);
    let required_pe_order = match (t_p, args.tf, inherent_delay) {
        (Some(tp), Some(tf), Some(l)) => Some(sys.n() + tp + tf + l),
        _ => None,
    };
    let report = AnalyzeReport {
        n: sys.n(),
        m: sys.m(),
        p: sys.p(),
        inputs_le_outputs: sys.m() <= sys.p(),
        controllable: sys.is_controllable(),
        observable: sys.is_observable(),
        observability_index,
        inherent_delay,
        t_p: args.tf.and(t_p),
        t_f: args.tf,
        required_pe_order,
        min_bank_length: required_pe_order.map(|order| min_pe_length(sys.m(), order)),
    };
    print_json(&report)?;
    if inherent_delay.is_none() {
        return Err(invalid(format!(
            "no delay-L inverse with L <= {}",
            args.max_delay.unwrap_or(sys.n())
        )));
    }
    Ok(())
}

pub fn collect(args: &CollectArgs) -> Result<()> {
    let sys = read_system(&args.plant)?;
    let l = match args.delay {
        Some(l) => l,
        None => sys
            .inherent_delay(None)?
            .ok_or_else(|| invalid("plant has no delay-L inverse; pass --delay to force one"))?,
    };
    if args.tp == 0 || args.tf == 0 {
        return Err(invalid("--tp and --tf must be positive"));
    }
    if args.length < args.tp + args.tf {
        return Err(invalid(format!(
            "T = {} leaves no Hankel columns; need T >= T_p + T_f = {}",
            args.length,
            args.tp + args.tf
        )));
    }
    let order = args.order.unwrap_or(sys.n() + args.tp + args.tf + l);
    let need = min_pe_length(sys.m(), order);
    if args.length < need {
        return Err(invalid(format!(
            "T = {} is too short: PE of order {order} with {} inputs needs T >= {need}",
            args.length,
            sys.m()
        )));
    }
    let u_d = generate_pe_input::<f64>(sys.m(), args.length + l, order, args.seed)?;
    let (_, y_d) = sys.simulate(&DVector::zeros(sys.n()), &u_d)?;
    let bank = DataBank::build(&u_d, &y_d, args.tp, args.tf, l, Some(sys.n()))?;
    write_bank(&args.out, &bank)?;
    eprintln!(
        "bank: T = {}, L = {l}, {} columns, PE order {} {}",
        args.length,
        bank.columns(),
        bank.pe.map_or(0, |c| c.order),
        if bank.pe.is_some_and(|c| c.satisfied) {
            "satisfied"
        } else {
            "NOT satisfied"
        }
    );
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let sys = read_system(&args.plant)?;
    let u = match (&args.u, args.length) {
        (Some(path), _) => read_signal(path)?,
        (None, Some(len)) => generate_pe_input::<f64>(sys.m(), len, 1, args.seed.unwrap_or(0))?,
        (None, None) => return Err(invalid("pass --u or --length")),
    };
    let (_, y) = sys.simulate(&DVector::zeros(sys.n()), &u)?;
    fs::create_dir_all(&args.out)?;
    write_signal(args.out.join("u.csv"), &u, "u")?;
    write_signal(args.out.join("y.csv"), &y, "y")?;
    Ok(())
}

#[derive(Serialize)]
struct EstimateSummary {
    mode: &'static str,
    residual_max: f64,
    #[serde(rename = "delay_L")]
    delay_l: usize,
    #[serde(rename = "T_p")]
    t_p: usize,
    #[serde(rename = "T_f")]
    t_f: usize,
    steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_error: Option<f64>,
}

/// Side-by-side `k, u…, u_hat…` rows over the common time range.
fn comparison(truth: &Signal<f64>, u_hat: &Signal<f64>) -> Result<Option<String>> {
    let from = truth.start().max(u_hat.start());
    let to = truth.end().min(u_hat.end());
    if from >= to {
        return Ok(None);
    }
    let m = u_hat.dim();
    let mut data = DMatrix::zeros(2 * m, (to - from) as usize);
    for (j, k) in (from..to).enumerate() {
        data.view_mut((0, j), (m, 1)).copy_from(&truth.at(k));
        data.view_mut((m, j), (m, 1)).copy_from(&u_hat.at(k));
    }
    let names: Vec<String> = (0..m)
        .map(|i| format!("u{i}"))
        .chain((0..m).map(|i| format!("u_hat{i}")))
        .collect();
    format_signal_columns(&Signal::new(from, data), &names).map(Some)
}

pub fn estimate(args: &EstimateArgs) -> Result<()> {
    let stored = read_bank(&args.bank)?;
    let y = read_signal(&args.y)?;
    let history = match (&args.init_u, &args.init_y) {
        (Some(u), Some(y)) => Some(History {
            u: read_signal(u)?,
            y: read_signal(y)?,
        }),
        _ => None,
    };
    let (bank, est) = match args.mode {
        Mode::Batch => {
            let est = run_algorithm1(&stored, &y, history.as_ref())?;
            (stored, est)
        }
        Mode::Realtime => {
            let bp = stored.params;
            let bank = if bp.t_f == 1 {
                stored
            } else {
                stored.rebuild(bp.t_p, 1, bp.l)?
            };
            let est = run_algorithm2(&bank, &y, history.as_ref())?;
            (bank, est)
        }
    };
    let bp = bank.params;

    // real-time sample k estimates u(k − L); compare against the shifted truth
    let truth = match &args.u_true {
        Some(path) => {
            let u = read_signal(path)?;
            let shift = if args.mode == Mode::Realtime {
                bp.l as i64
            } else {
                0
            };
            let start = u.start();
            Some(u.with_start(start + shift))
        }
        None => None,
    };

    fs::create_dir_all(&args.out)?;
    write_signal(args.out.join("u_hat.csv"), &est.u_hat, "u_hat")?;
    let mut max_error = None;
    if let Some(truth) = &truth {
        max_error = est.u_hat.max_abs_diff(truth);
        if let Some(csv) = comparison(truth, &est.u_hat)? {
            fs::write(args.out.join("comparison.csv"), csv)?;
        }
    }
    let summary = EstimateSummary {
        mode: match args.mode {
            Mode::Batch => "batch",
            Mode::Realtime => "realtime",
        },
        residual_max: est.residual_max,
        delay_l: bp.l,
        t_p: bp.t_p,
        t_f: bp.t_f,
        steps: est.steps,
        max_error,
    };
    write_json(&args.out.join("summary.json"), &summary)
}

const SETTLING_TOLERANCE: f64 = 1e-4;

#[derive(Serialize)]
struct DobManifest {
    signals: Vec<SignalEntry>,
    #[serde(rename = "T_p")]
    t_p: usize,
    #[serde(rename = "L")]
    l: usize,
    startup: usize,
    steps: usize,
    residual_max: f64,
    /// Deviation of y from the plant driven by u0 + d − d(k − L).
    transfer_defect: f64,
    /// Largest |d_hat(k) − d(k − L)| after startup.
    d_hat_defect: f64,
    /// Largest |Δ(k) − (u0(k) − d(k − L))| after startup.
    delta_defect: f64,
    /// Largest |y − y_free| after startup.
    output_deviation: f64,
    /// First step from which |y − y_free| stays within the settling tolerance.
    settling_step: Option<i64>,
    settling_tolerance: f64,
}

#[derive(Serialize)]
struct SignalEntry {
    name: &'static str,
    file: &'static str,
}

pub fn dob(args: &DobArgs) -> Result<()> {
    let plant = read_system(&args.plant)?;
    let stored = read_bank(&args.bank)?;
    let bp = stored.params;
    let bank = if bp.t_f == 1 {
        stored
    } else {
        stored.rebuild(bp.t_p, 1, bp.l)?
    };
    let u0 = read_signal(&args.u0)?;
    let d = read_signal(&args.d)?;
    let config = DobConfig {
        x0: None,
        startup: args.startup,
    };
    let run = run_dob(&plant, &bank, &u0, &d, &config)?;
    let (_, y_free) = plant.simulate(&run.x0, &run.u0)?;
    let settled = run.u0.start() + run.startup as i64;
    let deviation: Vec<(i64, f64)> = (run.y.start()..run.y.end())
        .map(|k| (k, (run.y.at(k) - y_free.at(k)).amax()))
        .collect();
    let output_deviation = deviation
        .iter()
        .filter(|(k, _)| *k >= settled)
        .fold(0.0_f64, |acc, (_, e)| acc.max(*e));
    let settling_step = deviation
        .iter()
        .rposition(|(_, e)| *e > SETTLING_TOLERANCE)
        .map_or(Some(run.y.start()), |i| {
            deviation.get(i + 1).map(|(k, _)| *k)
        });

    fs::create_dir_all(&args.out)?;
    let signals: [(&'static str, &'static str, &Signal<f64>, &str); 7] = [
        ("u0", "u0.csv", &run.u0, "u0_"),
        ("d", "d.csv", &run.d, "d"),
        ("u", "u.csv", &run.u, "u"),
        ("y", "y.csv", &run.y, "y"),
        ("y_free", "y_free.csv", &y_free, "y_free"),
        ("u_hat", "u_hat.csv", &run.u_hat, "u_hat"),
        ("d_hat", "d_hat.csv", &run.d_hat, "d_hat"),
    ];
    let mut entries = Vec::new();
    for (name, file, signal, prefix) in signals {
        write_signal(args.out.join(file), signal, prefix)?;
        entries.push(SignalEntry { name, file });
    }
    write_signal(args.out.join("delta.csv"), &run.delta, "delta")?;
    entries.push(SignalEntry {
        name: "delta",
        file: "delta.csv",
    });

    let (d_hat_defect, delta_defect) = run.identity_defects();
    let manifest = DobManifest {
        signals: entries,
        t_p: run.t_p,
        l: run.l,
        startup: run.startup,
        steps: run.u0.len(),
        residual_max: run.residual_max,
        transfer_defect: verify_transfer_relation(&run),
        d_hat_defect,
        delta_defect,
        output_deviation,
        settling_step,
        settling_tolerance: SETTLING_TOLERANCE,
    };
    write_json(&args.out.join("manifest.json"), &manifest)
}

#[derive(Serialize)]
struct TrackReport {
    objective: f64,
    equality_residual: f64,
    box_violation: f64,
    iterations: usize,
}

pub fn track(args: &TrackArgs) -> Result<()> {
    let bank = read_bank(&args.bank)?;
    let bp = bank.params;
    let u_past = read_signal(&args.u_past)?;
    let y_past = read_signal(&args.y_past)?;
    let y_star = read_signal(&args.y_star)?;
    let bounds = match &args.bounds {
        Some(path) => read_bounds(path)?,
        None => InputBox::unbounded(bp.m),
    };
    let mut config = SolverConfig::default();
    if let Some(it) = args.max_iterations {
        config.max_iterations = it;
    }
    let problem = TrackingProblem {
        bank: &bank,
        u_past: whole(&u_past),
        y_past: whole(&y_past),
        y_star: whole(&y_star),
        bounds,
    };
    let sol = track_output(&problem, &config)?;

    // the tracked block follows the history window
    let u = Signal::from_stacked(u_past.end(), bp.m, &sol.u)?;
    fs::create_dir_all(&args.out)?;
    write_signal(args.out.join("u.csv"), &u, "u")?;
    let report = TrackReport {
        objective: sol.objective,
        equality_residual: sol.equality_residual,
        box_violation: sol.box_violation,
        iterations: sol.iterations,
    };
    write_json(&args.out.join("result.json"), &report)?;
    print_json(&report)
}
