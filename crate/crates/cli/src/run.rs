use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use nlskdv::bourgain::{run_suite, scan_symbol_bound, EnsembleConfig, SuiteConfig, TauSpec};
use nlskdv::control::{
    global_transfer, nonlinear_local_control, solve_linear_control, write_signal_csv, ControlProblem, Gramian,
    TransferConfig,
};
use nlskdv::dynamics::{fit_decay_rate, simulate_with, ControlSignal, Mode, SimOptions, Trajectory, WaveState};
use nlskdv::operators::{ActuatorProfile, ProfileSpec, SystemParams};
use nlskdv::spectral::TorusGrid;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, ControlKind, ScenarioConfig, StateConfig, StateKind};
use crate::failure::Failure;

/// Contents of `report.json`: the resolved config and the run's scalars.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub config: ScenarioConfig,
    pub results: Value,
}

/// Validated inputs of one run, built before anything touches the disk.
struct Prepared {
    params: SystemParams,
    initial: WaveState,
    target: WaveState,
}

fn build_state(grid: &std::sync::Arc<TorusGrid>, s: &StateConfig, seed: u64) -> WaveState {
    let mut state = match s.kind {
        StateKind::Zero => WaveState::zeros(grid),
        StateKind::Random => WaveState::random(grid, s.seed.unwrap_or(seed), s.max_mode, s.norm),
    };
    state.v_mean = s.v_mean;
    state
}

fn prepare(cfg: &ScenarioConfig) -> Result<Prepared, Failure> {
    cfg.validate()?;
    let grid = TorusGrid::new(cfg.n)?;
    let p = &cfg.params;
    let mut spec = ProfileSpec::new(p.center, p.width / 2.0, p.eta);
    if let Some(peak) = p.damping_peak {
        spec.damping_peak = peak;
    }
    let profile = ActuatorProfile::build(&grid, spec)?;
    let params = SystemParams {
        dealias: p.dealias,
        coupling: p.coupling,
        kdv_quadratic: p.kdv_quadratic,
        ..SystemParams::new(p.beta, p.mu, profile)
    };
    params.validate()?;
    if !(p.eps > 0.0 && p.eps < 0.5) {
        return Err(Failure::Validation(format!("`params.eps` must lie in (0, 1/2), got {}", p.eps)));
    }
    let initial = build_state(&grid, &cfg.initial, cfg.seed);
    let target = build_state(&grid, &cfg.target, cfg.seed.wrapping_add(1));
    Ok(Prepared {
        params,
        initial,
        target,
    })
}

fn write_atomic(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<(), Failure>) -> Result<(), Failure> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        f(&mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Failure::Io(e.into()))?;
        writeln!(w)?;
        Ok(())
    })
}

/// Files produced next to `report.json`.
enum Artifact {
    Trajectory(Trajectory),
    Controls(ControlSignal, bool),
    Json(&'static str, Value),
    Csv(&'static str, Vec<u8>),
}

struct Outcome {
    results: Value,
    artifacts: Vec<Artifact>,
}

fn monotone(tr: &Trajectory) -> bool {
    tr.samples.windows(2).all(|w| w[1].energy <= w[0].energy)
}

fn run_simulate(cfg: &ScenarioConfig, p: &Prepared) -> Result<Outcome, Failure> {
    let opts = SimOptions {
        mode: cfg.simulate.mode,
        record_every: cfg.record_every,
        keep_states: false,
    };
    let tr = simulate_with(&p.params, &p.initial, cfg.t, cfg.dt, None, opts)?;
    let results = json!({
        "mode": cfg.simulate.mode,
        "samples": tr.samples.len(),
        "initial_energy": p.initial.energy(),
        "final_energy": tr.last.energy(),
        "energy_monotone": monotone(&tr),
        "mean_deviation": tr.mean_deviation(),
        "max_mean_drift": tr.max_mean_drift,
    });
    let last = serde_json::to_value(tr.last.to_dump()).expect("state serializes");
    Ok(Outcome {
        results,
        artifacts: vec![Artifact::Trajectory(tr), Artifact::Json("final_state.json", last)],
    })
}

fn run_stabilize(cfg: &ScenarioConfig, p: &Prepared) -> Result<Outcome, Failure> {
    let opts = SimOptions {
        mode: Mode::ClosedLoop,
        record_every: cfg.record_every,
        keep_states: false,
    };
    let tr = simulate_with(&p.params, &p.initial, cfg.t, cfg.dt, None, opts)?;
    let fit = fit_decay_rate(&tr, cfg.stabilize.fit_start, cfg.t)?;
    let ratio = tr.last.energy() / p.initial.energy();
    let bound = (-2.0 * fit.gamma * (cfg.t - cfg.stabilize.fit_start)).exp() * 10.0;
    let results = json!({
        "gamma": fit.gamma,
        "c": fit.c,
        "r_squared": fit.r_squared,
        "fit_samples": fit.samples,
        "energy_ratio": ratio,
        "energy_ratio_bound": bound,
        "bound_holds": ratio <= bound,
        "energy_monotone": monotone(&tr),
        "mean_deviation": tr.mean_deviation(),
    });
    Ok(Outcome {
        results,
        artifacts: vec![Artifact::Trajectory(tr)],
    })
}

fn run_control(cfg: &ScenarioConfig, p: &Prepared) -> Result<Outcome, Failure> {
    let c = &cfg.control;
    let mut prob = ControlProblem::new(p.params.clone(), p.initial.clone(), p.target.clone(), c.horizon);
    prob.dt = cfg.dt;
    prob.tol = c.tol;
    prob.max_iterations = c.max_iterations;
    prob.validate()?;
    let (signal, results) = match c.kind {
        ControlKind::Linear => {
            prob.params = prob.params.linearized();
            let sol = solve_linear_control(&prob)?;
            let gram = Gramian::new(&prob.params, c.horizon, cfg.dt, p.initial.v_mean)?;
            let results = json!({
                "kind": "linear",
                "terminal_residual": sol.terminal_residual,
                "gramian": sol.report,
                "symmetry_defect": gram.symmetry_defect(cfg.seed, 4),
                "cg_iterations": sol.report.cg_iterations,
                "control_l2": sol.signal.l2_norm(),
            });
            (sol.signal, results)
        }
        ControlKind::Local => {
            let sol = nonlinear_local_control(&prob, c.delta, c.local_iterations)?;
            let results = json!({
                "kind": "local",
                "terminal_residual": sol.terminal_residual,
                "iterations": sol.iterations,
                "differences": sol.differences,
                "gramian_iterations": sol.gramian_iterations,
                "gramian": sol.last_report,
                "control_l2": sol.signal.l2_norm(),
            });
            (sol.signal, results)
        }
    };
    Ok(Outcome {
        results,
        artifacts: vec![Artifact::Controls(signal, c.compact_csv)],
    })
}

fn run_transfer(cfg: &ScenarioConfig, p: &Prepared) -> Result<Outcome, Failure> {
    let t = &cfg.transfer;
    let tc = TransferConfig {
        dt: cfg.dt,
        horizon: t.horizon,
        delta: t.delta,
        max_phase_time: t.max_phase_time,
        local_iterations: t.local_iterations,
        tol: t.tol,
    };
    let r = global_transfer(&p.initial, &p.target, &p.params, &tc)?;
    let phases: Vec<Value> = r
        .phases
        .iter()
        .map(|ph| json!({"kind": ph.kind, "mode": ph.mode, "steps": ph.steps, "duration": ph.duration}))
        .collect();
    let steer = r.steering.as_ref().expect("transfer always steers");
    let results = json!({
        "residual": r.residual,
        "total_time": r.total_time(),
        "phases": phases,
        "local_iterations": steer.iterations,
        "entry_norm": r.entry.norm(),
        "exit_norm": r.exit.norm(),
    });
    Ok(Outcome {
        results,
        artifacts: vec![Artifact::Controls(steer.signal.clone(), true)],
    })
}

fn run_diagnose(cfg: &ScenarioConfig) -> Result<Outcome, Failure> {
    let d = &cfg.diagnose;
    let mut results = serde_json::Map::new();
    let mut artifacts = Vec::new();
    if d.symbol {
        let tau = TauSpec {
            per_side: d.tau_per_side,
            ..TauSpec::default()
        };
        let scan = scan_symbol_bound(d.nmax, &tau, cfg.params.mu, cfg.params.eps)?;
        results.insert("symbol".into(), serde_json::to_value(scan).expect("scan serializes"));
    }
    if d.estimates {
        let suite = SuiteConfig {
            ensemble: EnsembleConfig {
                n: d.n,
                m: d.time_samples,
                half_span: d.half_span,
                samples: d.samples,
                seed: cfg.seed,
            },
            k: d.k,
            s: d.s,
            mu: cfg.params.mu,
            eps: cfg.params.eps,
            windows: d.windows.clone(),
            b: d.b,
            b_prime: d.b_prime,
            localization_window: d.localization_window,
        };
        let report = run_suite(&suite)?;
        let summary: Vec<Value> = report
            .stats
            .iter()
            .map(|s| {
                json!({"estimate": s.estimate, "label": s.label, "max": s.max, "median": s.median,
                       "excluded": s.excluded, "samples": s.samples})
            })
            .collect();
        results.insert("estimates".into(), Value::Array(summary));
        results.insert("bilinear_theta".into(), json!(report.bilinear_theta));
        results.insert("all_finite".into(), json!(report.all_finite()));
        if d.refine {
            let fine = run_suite(&SuiteConfig {
                ensemble: suite.ensemble.doubled(),
                ..suite.clone()
            })?;
            let factor = report
                .stats
                .iter()
                .zip(&fine.stats)
                .map(|(a, b)| (a.max / b.max).max(b.max / a.max))
                .fold(1.0, f64::max);
            results.insert("refined_sup_factor".into(), json!(factor));
            results.insert("refined_theta".into(), json!(fine.bilinear_theta));
        }
        let mut csv = Vec::new();
        report.write_csv(&mut csv)?;
        artifacts.push(Artifact::Csv("ratios.csv", csv));
    }
    Ok(Outcome {
        results: Value::Object(results),
        artifacts,
    })
}

/// Runs one scenario and writes its files into `out`. Nothing is written unless
/// the config validates.
pub fn run(command: Command, cfg: &ScenarioConfig, out: &Path) -> Result<Report, Failure> {
    let mut cfg = cfg.clone();
    cfg.command = Some(command);
    let prepared = prepare(&cfg)?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let outcome = match command {
        Command::Simulate => run_simulate(&cfg, &prepared),
        Command::Stabilize => run_stabilize(&cfg, &prepared),
        Command::Control => run_control(&cfg, &prepared),
        Command::Transfer => run_transfer(&cfg, &prepared),
        Command::Diagnose => run_diagnose(&cfg),
    }?;
    fs::create_dir_all(out)?;
    for a in &outcome.artifacts {
        match a {
            Artifact::Trajectory(tr) => write_atomic(&out.join("trajectory.csv"), |w| Ok(tr.write_csv(w)?))?,
            Artifact::Controls(sig, compact) => {
                write_atomic(&out.join("controls.csv"), |w| Ok(write_signal_csv(sig, *compact, w)?))?
            }
            Artifact::Json(name, v) => write_json(&out.join(name), v)?,
            Artifact::Csv(name, bytes) => write_atomic(&out.join(name), |w| Ok(w.write_all(bytes)?))?,
        }
    }
    let report = Report {
        command: command.name(),
        config: cfg,
        results: outcome.results,
    };
    write_json(&out.join("report.json"), &report)?;
    let meta = json!({
        "started_unix": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        "elapsed_seconds": clock.elapsed().as_secs_f64(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_json(&out.join("meta.json"), &meta)?;
    Ok(report)
}
