//! Command-line front end.
//!
//! ```text
//! g2flow check <suite> [--seed N]
//! g2flow run <scenario.cfg> [--print-config] [--force] [--threads N]
//! g2flow convergence <scenario.cfg> --sweep <dt=…|n=…|m=…> [--threads N]
//! g2flow info <snapshot.g2f>
//! ```
//!
//! Exit codes: 0 ok, 1 test failure, 2 usage error, 3 guard halt.
//! `G2FLOW_THREADS` is the fallback for `--threads`.

use crate::check;
use crate::integrate::{evolve, rk4_step, EvolveOpts, FlowSystem, RunStatus, StudyResult};
use crate::linalg3::{Mat3, SymMat3};
use crate::scenario::{InitialRecipe, LapseKind, Scenario, SystemKind};
use crate::snapshot::{self, Snapshot};
use crate::so3_flow::{
    constraints_so3, radial_flat, radial_rhs, su2_comm_sb, su2_torsion_groups, RadialState,
    RadialSystem, So3State, So3System, Su2State, Su2System,
};
use crate::torus_flow::{
    constraints_torus, double_curl_state, ma_curl_residual, ma_state_perturbed,
    torsion_coeffs_torus, wave_residual, LapseMode, TorusState, TorusSystem,
};
use crate::{Error, Result};
use rand::rngs::StdRng;
use rand::SeedableRng;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TEST_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GUARD_HALT: i32 = 3;

const USAGE: &str = "usage:
  g2flow check <suite> [--seed N]         run an identity check suite
  g2flow run <scenario.cfg> [--print-config] [--force] [--threads N]
  g2flow convergence <scenario.cfg> --sweep dt=a,b,c|n=a,b,c|m=a,b,c [--threads N]
  g2flow info <snapshot.g2f>              describe a snapshot file

suites: exterior-standard, su3g2-standard, normal-form, roundtrip,
        commutator, su2-reduction, all
exit codes: 0 ok, 1 test failure, 2 usage error, 3 guard halt";

/// Entry point; returns the process exit code.
pub fn run_cli(args: &[String]) -> i32 {
    match dispatch(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::UnknownSuite(_) | Error::Usage(_) | Error::Config { .. } => EXIT_USAGE,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn dispatch(args: &[String]) -> Result<i32> {
    let Some(cmd) = args.first() else {
        println!("{USAGE}");
        return Ok(EXIT_USAGE);
    };
    match cmd.as_str() {
        "check" => cmd_check(&args[1..]),
        "run" => cmd_run(&args[1..]),
        "convergence" => cmd_convergence(&args[1..]),
        "info" => cmd_info(&args[1..]),
        "--help" | "-h" | "help" => {
            println!("{USAGE}");
            Ok(EXIT_OK)
        }
        other => Err(Error::Usage(format!("unknown subcommand `{other}`"))),
    }
}

fn flag_value(args: &[String], flag: &str) -> Result<Option<String>> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == flag {
            return match it.next() {
                Some(v) => Ok(Some(v.clone())),
                None => Err(Error::Usage(format!("{flag} needs a value"))),
            };
        }
    }
    Ok(None)
}

fn threads_from(args: &[String]) -> Result<usize> {
    if let Some(v) = flag_value(args, "--threads")? {
        return v
            .parse()
            .map_err(|_| Error::Usage(format!("--threads expects a number, got `{v}`")));
    }
    if let Ok(v) = std::env::var("G2FLOW_THREADS") {
        return v
            .parse()
            .map_err(|_| Error::Usage(format!("G2FLOW_THREADS is not a number: `{v}`")));
    }
    Ok(0)
}

fn with_threads<T>(threads: usize, f: impl FnOnce() -> T + Send) -> T
where
    T: Send,
{
    if threads == 0 {
        f()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(f)
    }
}

fn cmd_check(args: &[String]) -> Result<i32> {
    let Some(suite) = args.first() else {
        return Err(Error::Usage("check needs a suite name".into()));
    };
    let seed: u64 = match flag_value(args, "--seed")? {
        Some(v) => v
            .parse()
            .map_err(|_| Error::Usage(format!("bad seed `{v}`")))?,
        None => 0,
    };
    let records = check::run_suite(suite, seed)?;
    print!("{}", check::jsonl(&records, suite, seed));
    let all_pass = records.iter().all(|r| r.pass);
    Ok(if all_pass { EXIT_OK } else { EXIT_TEST_FAILURE })
}

fn cmd_info(args: &[String]) -> Result<i32> {
    let Some(path) = args.first() else {
        return Err(Error::Usage("info needs a snapshot path".into()));
    };
    print!("{}", snapshot::describe(Path::new(path))?);
    Ok(EXIT_OK)
}

fn load_scenario(path: &str) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read `{path}`: {e}")))?;
    Scenario::parse(&text)
}

/// Initial state per system, built from the scenario recipe.
enum AnyState {
    Torus(TorusState),
    So3(So3State),
    Su2(Su2State),
    Radial(RadialState),
}

fn build_initial(sc: &Scenario) -> Result<AnyState> {
    let mut rng = StdRng::seed_from_u64(sc.seed);
    Ok(match (sc.system, &sc.initial) {
        (SystemKind::Torus, InitialRecipe::Flat) => AnyState::Torus(TorusState::flat(
            crate::grids::PeriodicGrid3::new(sc.n, sc.length)?,
        )),
        (SystemKind::Torus, InitialRecipe::DoubleCurl { amplitude, c }) => {
            let grid = crate::grids::PeriodicGrid3::new(sc.n, sc.length)?;
            AnyState::Torus(double_curl_state(grid, &mut rng, *amplitude, *c)?)
        }
        (
            SystemKind::Torus,
            InitialRecipe::MaPotential {
                hessian,
                perturbation,
            },
        ) => {
            let grid = crate::grids::PeriodicGrid3::new(sc.n, sc.length)?;
            AnyState::Torus(ma_state_perturbed(
                grid,
                &SymMat3(*hessian),
                *perturbation,
                &mut rng,
            )?)
        }
        (SystemKind::So3, InitialRecipe::Flat) => AnyState::So3(So3State::flat(
            crate::grids::PeriodicGrid3::new(sc.n, sc.length)?,
        )),
        (SystemKind::Su2, InitialRecipe::Su2 { a_matrix, s_matrix }) => {
            let mut a = Mat3::ZERO;
            for i in 0..3 {
                for j in 0..3 {
                    a.0[i][j] = a_matrix[3 * i + j];
                }
            }
            AnyState::Su2(Su2State {
                a,
                s: SymMat3(*s_matrix),
                t: 0.0,
            })
        }
        (SystemKind::Radial, InitialRecipe::RadialFlat { alpha, beta }) => {
            let grid = crate::grids::RadialGrid1::new(sc.r_min, sc.r_max, sc.m)?;
            AnyState::Radial(radial_flat(grid, *alpha, *beta, 0.0))
        }
        (
            SystemKind::Radial,
            InitialRecipe::RadialPerturbed {
                alpha,
                beta,
                amplitude,
            },
        ) => {
            let grid = crate::grids::RadialGrid1::new(sc.r_min, sc.r_max, sc.m)?;
            let mut st = radial_flat(grid, *alpha, *beta, 0.0);
            // bump in g keeping k = l: the constraint residual starts at 0
            let mid = 0.5 * (sc.r_min + sc.r_max);
            let width = 0.02 * (sc.r_max - sc.r_min).powi(2);
            for i in 0..grid.m() {
                let r = grid.r(i);
                st.g[i] *= 1.0 + amplitude * (-(r - mid) * (r - mid) / width).exp();
            }
            AnyState::Radial(st)
        }
        (_, InitialRecipe::Snapshot { path }) => {
            let snap = snapshot::read_snapshot(Path::new(path))?;
            match (sc.system, snap) {
                (SystemKind::Torus, Snapshot::Torus(st)) => AnyState::Torus(st),
                (SystemKind::So3, Snapshot::So3(st)) => AnyState::So3(st),
                (SystemKind::Su2, Snapshot::Su2(st)) => AnyState::Su2(st),
                (SystemKind::Radial, Snapshot::Radial(st)) => AnyState::Radial(st),
                (sys, snap) => {
                    return Err(Error::Usage(format!(
                        "snapshot kind `{}` does not fit system `{}`",
                        snap.kind(),
                        sys.name()
                    )))
                }
            }
        }
        (sys, recipe) => {
            return Err(Error::Usage(format!(
                "recipe `{}` does not fit system `{}`",
                recipe.name(),
                sys.name()
            )))
        }
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

/// Torus system with the lapse recomputed as `(det S)^{1/2}` each call —
/// equal to the canonical lapse, exercised through the explicit-field path.
struct TorusDetsHalf;

impl FlowSystem for TorusDetsHalf {
    type State = TorusState;
    type Deriv = crate::torus_flow::TorusDeriv;

    fn rhs(&self, state: &TorusState) -> Result<Self::Deriv> {
        let dets = state.dets_field();
        let mut f = crate::grids::ScalarField3::zeros(state.grid);
        for site in 0..state.grid.sites() {
            f.set(0, site, dets.at(0, site).sqrt());
        }
        crate::torus_flow::rhs_torus(state, &LapseMode::Explicit(f))
    }

    fn combine(
        &self,
        state: &TorusState,
        ks: [&Self::Deriv; 4],
        dt: f64,
    ) -> Result<(TorusState, f64)> {
        TorusSystem::default().combine(state, ks, dt)
    }

    fn step_euler(&self, state: &TorusState, k: &Self::Deriv, c: f64) -> Result<TorusState> {
        TorusSystem::default().step_euler(state, k, c)
    }

    fn guard(&self, state: &TorusState) -> Option<crate::integrate::GuardTrip> {
        TorusSystem::default().guard(state)
    }

    fn time(&self, state: &TorusState) -> f64 {
        state.t
    }
}

struct RunArtifacts {
    status: RunStatus,
    summary: String,
}

fn write_report(dir: &Path, sc: &Scenario, art: &RunArtifacts) -> Result<()> {
    let status = match &art.status {
        RunStatus::Completed => "\"completed\"".to_string(),
        RunStatus::GuardHalt { step, t, trip } => format!(
            "{{\"guard\":\"{}\",\"value\":{:e},\"threshold\":{:e},\"step\":{},\"t\":{:e}}}",
            trip.what, trip.value, trip.threshold, step, t
        ),
    };
    let line = format!(
        "{{\"system\":\"{}\",\"recipe\":\"{}\",\"seed\":{},\"status\":{},\"summary\":\"{}\"}}\n",
        sc.system.name(),
        sc.initial.name(),
        sc.seed,
        status,
        art.summary
    );
    std::fs::write(dir.join("report.jsonl"), line)?;
    Ok(())
}

fn cmd_run(args: &[String]) -> Result<i32> {
    let Some(path) = args.first() else {
        return Err(Error::Usage("run needs a scenario file".into()));
    };
    let mut sc = load_scenario(path)?;
    let threads = threads_from(args)?;
    if threads > 0 {
        sc.threads = threads;
    }
    if args.iter().any(|a| a == "--print-config") {
        print!("{}", sc.print());
        return Ok(EXIT_OK);
    }
    let force = args.iter().any(|a| a == "--force");
    let sc2 = sc.clone();
    with_threads(sc.threads, move || run_scenario(&sc2, force))
}

fn run_scenario(sc: &Scenario, force: bool) -> Result<i32> {
    let dir = PathBuf::from(&sc.output_dir);
    std::fs::create_dir_all(&dir)?;
    let initial = build_initial(sc)?;

    // initial-constraint precondition (absolute max-norm residuals)
    let initial_residual = match &initial {
        AnyState::Torus(st) => {
            let c = constraints_torus(st)?;
            c.de.max(c.omega_sym).max(c.div_s)
        }
        AnyState::So3(st) => {
            let (t, d) = constraints_so3(st)?;
            t.max(d)
        }
        AnyState::Su2(st) => su2_comm_sb(st)?,
        AnyState::Radial(st) => radial_rhs(st)?.1,
    };
    if initial_residual > sc.initial_tol && !force {
        return Err(Error::Precondition {
            what: "initial constraint residual (use --force to run anyway)",
            value: initial_residual,
            tol: sc.initial_tol,
        });
    }

    let opts = EvolveOpts {
        t_final: sc.t_final,
        dt: sc.dt,
        sample_every: sc.sample_every.max(1),
    };
    let art = match initial {
        AnyState::Torus(st) => run_torus(sc, st, &opts, &dir)?,
        AnyState::So3(st) => run_so3(sc, st, &opts, &dir)?,
        AnyState::Su2(st) => run_su2(sc, st, &opts, &dir)?,
        AnyState::Radial(st) => run_radial(sc, st, &opts, &dir)?,
    };
    write_report(&dir, sc, &art)?;
    println!("{}", art.summary);
    Ok(match art.status {
        RunStatus::Completed => EXIT_OK,
        RunStatus::GuardHalt { .. } => EXIT_GUARD_HALT,
    })
}

fn maybe_snapshot(
    dir: &Path,
    sc: &Scenario,
    step: usize,
    is_last: bool,
    make: impl Fn() -> Snapshot,
) -> Result<()> {
    let due = sc.snapshot_every > 0 && (step % sc.snapshot_every == 0 || is_last);
    if due {
        snapshot::write_snapshot(&dir.join(format!("snap_{step}.g2f")), &make())?;
    }
    Ok(())
}

fn run_torus(sc: &Scenario, st: TorusState, opts: &EvolveOpts, dir: &Path) -> Result<RunArtifacts> {
    let mut csv = String::from(
        "t,c_de,c_sym,c_div,tor_domega,tor_domsq,tor_dpsi,tor_dpsisharp,detS_min,detS_max\n",
    );
    let mut observe = |state: &TorusState, step: usize, is_last: bool| -> Result<()> {
        let c = constraints_torus(state)?;
        let g = torsion_coeffs_torus(state, &LapseMode::Canonical)?;
        let (lo, hi) = state.dets_range();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt(state.t),
            fmt(c.de),
            fmt(c.omega_sym),
            fmt(c.div_s),
            fmt(g.domega),
            fmt(g.domsq),
            fmt(g.dpsi),
            fmt(g.dpsisharp),
            fmt(lo),
            fmt(hi)
        );
        maybe_snapshot(dir, sc, step, is_last, || Snapshot::Torus(state.clone()))
    };
    let (fin, status) = match sc.lapse {
        LapseKind::Canonical => {
            let sys = TorusSystem {
                lapse: LapseMode::Canonical,
                dets_guard: sc.det_s_min,
            };
            if sc.project_every > 0 {
                evolve_torus_projected(&sys, st, opts, sc.project_every, &mut observe)?
            } else {
                evolve(&sys, st, opts, |s| observe(s.state, s.step, s.is_last))?
            }
        }
        LapseKind::DetsHalf => {
            let sys = TorusDetsHalf;
            evolve(&sys, st, opts, |s| observe(s.state, s.step, s.is_last))?
        }
    };
    std::fs::write(dir.join("diag.csv"), csv)?;
    let c = constraints_torus(&fin)?;
    let summary = format!(
        "torus run {}: t = {:.6}, omega_sym = {:.3e}, div_s = {:.3e}",
        status_word(&status),
        fin.t,
        c.omega_sym,
        c.div_s
    );
    Ok(RunArtifacts { status, summary })
}

fn run_so3(sc: &Scenario, st: So3State, opts: &EvolveOpts, dir: &Path) -> Result<RunArtifacts> {
    let mut csv = String::from(
        "t,c_torsion,c_divS,commSB,detS_min,tor_domega,tor_dpsi,tor_dpsisharp,tor_domsq\n",
    );
    let sys = So3System {
        dets_guard: sc.det_s_min,
    };
    let mut observe = |state: &So3State, step: usize, is_last: bool| -> Result<()> {
        let (tr, dr) = constraints_so3(state)?;
        let comm = state.comm_sb()?;
        let (lo, _) = state.dets_range();
        let g = crate::so3_flow::torsion_coeffs_so3(state)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            fmt(state.t),
            fmt(tr),
            fmt(dr),
            fmt(comm),
            fmt(lo),
            fmt(g.domega),
            fmt(g.dpsi),
            fmt(g.dpsisharp),
            fmt(g.domsq)
        );
        maybe_snapshot(dir, sc, step, is_last, || Snapshot::So3(state.clone()))
    };
    let (fin, status) = evolve(&sys, st, opts, |s| observe(s.state, s.step, s.is_last))?;
    std::fs::write(dir.join("diag.csv"), csv)?;
    let (tr, dr) = constraints_so3(&fin)?;
    let summary = format!(
        "so3 run {}: t = {:.6}, torsion = {:.3e}, div = {:.3e}",
        status_word(&status),
        fin.t,
        tr,
        dr
    );
    Ok(RunArtifacts { status, summary })
}

fn run_su2(sc: &Scenario, st: Su2State, opts: &EvolveOpts, dir: &Path) -> Result<RunArtifacts> {
    let mut csv = String::from(
        "t,c_torsion,c_divS,commSB,detS_min,tor_domega,tor_dpsi,tor_dpsisharp,tor_domsq\n",
    );
    let sys = Su2System {
        dets_guard: sc.det_s_min,
    };
    let mut observe = |state: &Su2State, step: usize, is_last: bool| -> Result<()> {
        let comm = su2_comm_sb(state)?;
        let g = su2_torsion_groups(state)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            fmt(state.t),
            fmt(0.0),
            fmt(comm),
            fmt(comm),
            fmt(state.s.det()),
            fmt(g.domega),
            fmt(g.dpsi),
            fmt(g.dpsisharp),
            fmt(g.domsq)
        );
        maybe_snapshot(dir, sc, step, is_last, || Snapshot::Su2(*state))
    };
    let (fin, status) = evolve(&sys, st, opts, |s| observe(s.state, s.step, s.is_last))?;
    std::fs::write(dir.join("diag.csv"), csv)?;
    let summary = format!(
        "su2 run {}: t = {:.6}, commSB = {:.3e}, det S = {:.6e}",
        status_word(&status),
        fin.t,
        su2_comm_sb(&fin)?,
        fin.s.det()
    );
    Ok(RunArtifacts { status, summary })
}

fn run_radial(
    sc: &Scenario,
    st: RadialState,
    opts: &EvolveOpts,
    dir: &Path,
) -> Result<RunArtifacts> {
    let flat_ref = match &sc.initial {
        InitialRecipe::RadialFlat { alpha, beta }
        | InitialRecipe::RadialPerturbed { alpha, beta, .. } => Some((*alpha, *beta)),
        _ => None,
    };
    let mut csv = String::from(if flat_ref.is_some() {
        "t,res_eq5,err_vs_flat\n"
    } else {
        "t,res_eq5\n"
    });
    let sys = RadialSystem {
        positivity_guard: sc.positivity_min,
    };
    let mut worst_err = 0.0_f64;
    let mut observe = |state: &RadialState, step: usize, is_last: bool| -> Result<()> {
        let res5 = match radial_rhs(state) {
            Ok((_, r)) => r,
            Err(_) => f64::NAN,
        };
        match flat_ref {
            Some((alpha, beta)) => {
                let exact = radial_flat(state.grid, alpha, beta, state.t);
                let mut err = 0.0_f64;
                for i in 0..state.grid.m() {
                    err = err.max((state.f[i] - exact.f[i]).abs());
                    err = err.max((state.g[i] - exact.g[i]).abs());
                    err = err.max((state.k[i] - exact.k[i]).abs());
                    err = err.max((state.l[i] - exact.l[i]).abs());
                }
                worst_err = worst_err.max(err);
                let _ = writeln!(csv, "{},{},{}", fmt(state.t), fmt(res5), fmt(err));
            }
            None => {
                let _ = writeln!(csv, "{},{}", fmt(state.t), fmt(res5));
            }
        }
        maybe_snapshot(dir, sc, step, is_last, || Snapshot::Radial(state.clone()))
    };
    let (fin, status) = evolve(&sys, st, opts, |s| observe(s.state, s.step, s.is_last))?;
    std::fs::write(dir.join("diag.csv"), csv)?;
    let summary = format!(
        "radial run {}: t = {:.6}, max err_vs_flat = {:.3e}",
        status_word(&status),
        fin.t,
        worst_err
    );
    Ok(RunArtifacts { status, summary })
}

/// Torus evolution with the divergence projection applied to `S` every
/// `cadence` steps — an optional maintenance pass for long runs.
fn evolve_torus_projected<F>(
    sys: &TorusSystem,
    initial: TorusState,
    opts: &EvolveOpts,
    cadence: usize,
    observe: &mut F,
) -> Result<(TorusState, RunStatus)>
where
    F: FnMut(&TorusState, usize, bool) -> Result<()>,
{
    let n_steps = (opts.t_final / opts.dt).round() as usize;
    let mut state = initial;
    observe(&state, 0, n_steps == 0)?;
    for stepno in 1..=n_steps {
        if let Some(trip) = crate::integrate::FlowSystem::guard(sys, &state) {
            let t = state.t;
            observe(&state, stepno, true)?;
            return Ok((
                state,
                RunStatus::GuardHalt {
                    step: stepno,
                    t,
                    trip,
                },
            ));
        }
        let (next, _) = rk4_step(sys, &state, opts.dt)?;
        state = next;
        if stepno % cadence == 0 {
            state.s = crate::torus_flow::project_divergence_free(&state.s)?;
        }
        let is_last = stepno == n_steps;
        if is_last || (opts.sample_every > 0 && stepno % opts.sample_every == 0) {
            observe(&state, stepno, is_last)?;
        }
    }
    Ok((state, RunStatus::Completed))
}

fn status_word(s: &RunStatus) -> &'static str {
    match s {
        RunStatus::Completed => "completed",
        RunStatus::GuardHalt { .. } => "guard-halt",
    }
}

#[derive(Debug, Clone)]
enum SweepSpec {
    Dt(Vec<f64>),
    N(Vec<usize>),
    M(Vec<usize>),
}

fn parse_sweep(spec: &str) -> Result<SweepSpec> {
    let Some((key, list)) = spec.split_once('=') else {
        return Err(Error::Usage(format!(
            "bad sweep spec `{spec}` (expected key=v1,v2,…)"
        )));
    };
    let parts: Vec<&str> = list.split(',').collect();
    if parts.len() < 3 {
        return Err(Error::Usage(format!(
            "convergence needs at least 3 resolutions, got {}",
            parts.len()
        )));
    }
    match key {
        "dt" => {
            let vals: std::result::Result<Vec<f64>, _> = parts.iter().map(|p| p.parse()).collect();
            Ok(SweepSpec::Dt(
                vals.map_err(|_| Error::Usage("bad dt list".into()))?,
            ))
        }
        "n" => {
            let vals: std::result::Result<Vec<usize>, _> =
                parts.iter().map(|p| p.parse()).collect();
            Ok(SweepSpec::N(
                vals.map_err(|_| Error::Usage("bad n list".into()))?,
            ))
        }
        "m" => {
            let vals: std::result::Result<Vec<usize>, _> =
                parts.iter().map(|p| p.parse()).collect();
            Ok(SweepSpec::M(
                vals.map_err(|_| Error::Usage("bad m list".into()))?,
            ))
        }
        other => Err(Error::Usage(format!("unknown sweep key `{other}`"))),
    }
}

/// The scenario-specific convergence error at one resolution, plus the
/// nominal order of the quantity measured.
fn convergence_metric(sc: &Scenario) -> Result<(f64, f64)> {
    match (sc.system, &sc.initial) {
        // central second time difference of S against the spatial operator:
        // the residual isolates the O(dt²) time truncation
        (SystemKind::Torus, InitialRecipe::DoubleCurl { .. }) => {
            let AnyState::Torus(st0) = build_initial(sc)? else {
                unreachable!()
            };
            let sys = TorusSystem {
                lapse: LapseMode::Canonical,
                dets_guard: sc.det_s_min,
            };
            let (mid, _) = rk4_step(&sys, &st0, sc.dt)?;
            let (next, _) = rk4_step(&sys, &mid, sc.dt)?;
            Ok((wave_residual(&st0, &mid, &next, sc.dt)?, 2.0))
        }
        // discrete residual of the curl-free row condition on Hessian data
        (SystemKind::Torus, InitialRecipe::MaPotential { .. }) => {
            let AnyState::Torus(st0) = build_initial(sc)? else {
                unreachable!()
            };
            Ok((ma_curl_residual(&st0)?, 2.0))
        }
        // tracking error against the closed form at t_final
        (SystemKind::Radial, _) => {
            let AnyState::Radial(st0) = build_initial(sc)? else {
                unreachable!()
            };
            let (alpha, beta) = match &sc.initial {
                InitialRecipe::RadialFlat { alpha, beta } => (*alpha, *beta),
                _ => {
                    return Err(Error::Usage(
                        "radial convergence needs the radial_flat recipe".into(),
                    ))
                }
            };
            let sys = RadialSystem {
                positivity_guard: sc.positivity_min,
            };
            let opts = EvolveOpts {
                t_final: sc.t_final,
                dt: sc.dt,
                sample_every: 0,
            };
            let (fin, _) = evolve(&sys, st0, &opts, |_| Ok(()))?;
            let exact = radial_flat(fin.grid, alpha, beta, fin.t);
            let mut err = 0.0_f64;
            for i in 0..fin.grid.m() {
                err = err.max((fin.f[i] - exact.f[i]).abs());
                err = err.max((fin.g[i] - exact.g[i]).abs());
                err = err.max((fin.k[i] - exact.k[i]).abs());
                err = err.max((fin.l[i] - exact.l[i]).abs());
            }
            Ok((err, 4.0))
        }
        // Richardson self-difference against the dt/2 run
        (SystemKind::Su2, _) => {
            let AnyState::Su2(st0) = build_initial(sc)? else {
                unreachable!()
            };
            let sys = Su2System {
                dets_guard: sc.det_s_min,
            };
            let run = |dt: f64| -> Result<Su2State> {
                let opts = EvolveOpts {
                    t_final: sc.t_final,
                    dt,
                    sample_every: 0,
                };
                Ok(evolve(&sys, st0, &opts, |_| Ok(()))?.0)
            };
            let coarse = run(sc.dt)?;
            let fine = run(0.5 * sc.dt)?;
            Ok(((coarse.s.to_mat3() - fine.s.to_mat3()).max_abs(), 4.0))
        }
        (sys, recipe) => Err(Error::Usage(format!(
            "no convergence metric for system `{}` with recipe `{}`",
            sys.name(),
            recipe.name()
        ))),
    }
}

fn cmd_convergence(args: &[String]) -> Result<i32> {
    let Some(path) = args.first() else {
        return Err(Error::Usage("convergence needs a scenario file".into()));
    };
    let base = load_scenario(path)?;
    let Some(spec) = flag_value(args, "--sweep")? else {
        return Err(Error::Usage("convergence needs --sweep".into()));
    };
    let sweep = parse_sweep(&spec)?;
    let threads = threads_from(args)?;
    let base2 = base.clone();
    with_threads(threads, move || convergence_inner(&base2, &sweep))
}

fn convergence_inner(base: &Scenario, sweep: &SweepSpec) -> Result<i32> {
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut nominal = 2.0;
    let mut rows = String::from("resolution,error\n");
    match sweep {
        SweepSpec::Dt(list) => {
            for &dt in list {
                let mut sc = base.clone();
                sc.dt = dt;
                let (err, nom) = convergence_metric(&sc)?;
                nominal = nom;
                points.push((dt, err));
                let _ = writeln!(rows, "{},{}", fmt(dt), fmt(err));
            }
        }
        SweepSpec::N(list) => {
            for &n in list {
                let mut sc = base.clone();
                sc.n = n;
                let (err, nom) = convergence_metric(&sc)?;
                nominal = nom;
                points.push((sc.length / n as f64, err));
                let _ = writeln!(rows, "{n},{}", fmt(err));
            }
        }
        SweepSpec::M(list) => {
            for &m in list {
                let mut sc = base.clone();
                sc.m = m;
                let (err, nom) = convergence_metric(&sc)?;
                nominal = nom;
                points.push(((sc.r_max - sc.r_min) / (m - 1) as f64, err));
                let _ = writeln!(rows, "{m},{}", fmt(err));
            }
        }
    }
    let study = crate::integrate::convergence_study(&points, nominal, 1e-13)?;
    let dir = PathBuf::from(&base.output_dir);
    std::fs::create_dir_all(&dir)?;
    let verdict = match &study {
        StudyResult::Slope {
            observed,
            nominal,
            flagged,
        } => {
            let _ = writeln!(
                rows,
                "# observed order = {observed:.3}, nominal = {nominal}, flagged = {flagged}"
            );
            println!("observed order {observed:.3} (nominal {nominal}, flagged {flagged})");
            if *flagged {
                EXIT_TEST_FAILURE
            } else {
                EXIT_OK
            }
        }
        StudyResult::AtFloor => {
            let _ = writeln!(rows, "# at floor");
            println!("errors at floor; no slope");
            EXIT_OK
        }
    };
    std::fs::write(dir.join("convergence.csv"), rows)?;
    Ok(verdict)
}
