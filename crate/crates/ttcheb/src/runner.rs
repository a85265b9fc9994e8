//! Experiment orchestration: checkpointed single runs, Chebyshev-order
//! convergence sweeps, and split-operator comparison sweeps, with CSV output
//! and binary state checkpoints. Sweep points are independent and can run on
//! a configurable number of worker threads; file contents are deterministic
//! regardless of the thread count.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::config::{FormatKind, RunConfig, SchemeKind};
use crate::error::{Result, TtError};
use crate::function_train::FunctionTrain;
use crate::hamiltonian::{System, WaveState};
use crate::models::{
    coherent_state_on, density_slice2d, initial_gaussian, l2_error, survival_amplitude,
    AnalyticCoherentState,
};
use crate::propagators::{chebyshev_propagate, soft_propagate, ChebyshevPlan};
use crate::tensor_train::TensorTrain;
use crate::C64;

/// One survival.csv record.
#[derive(Debug, Clone, Copy)]
pub struct CheckpointRow {
    pub t: f64,
    pub s: C64,
    pub norm: f64,
    pub max_rank: usize,
}

/// Outcome of a checkpointed run.
#[derive(Debug)]
pub struct RunReport {
    pub rows: Vec<CheckpointRow>,
    pub final_state: WaveState,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Writes `contents` to `path` atomically (temporary file + rename) so
/// concurrent sweep points never expose half-written files.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn checkpoint_extension(format: FormatKind) -> &'static str {
    match format {
        FormatKind::Tt => "ttc1",
        FormatKind::Ft => "ftc1",
    }
}

fn write_checkpoint(path: &Path, state: &WaveState) -> Result<()> {
    let mut buf = Vec::new();
    match state {
        WaveState::Tt(t) => t.write_to(&mut buf)?,
        WaveState::Ft(f) => f.write_to(&mut buf)?,
    }
    write_atomic(path, &buf)
}

/// Loads a state checkpoint, dispatching on the configured format.
pub fn load_checkpoint(path: &Path, format: FormatKind) -> Result<WaveState> {
    let data = fs::read(path)?;
    let mut cursor = std::io::Cursor::new(data);
    Ok(match format {
        FormatKind::Tt => WaveState::Tt(TensorTrain::read_from(&mut cursor)?),
        FormatKind::Ft => WaveState::Ft(FunctionTrain::read_from(&mut cursor)?),
    })
}

fn survival_csv(rows: &[CheckpointRow]) -> String {
    let mut s = String::from("t_au,re_s,im_s,abs_s,norm,max_rank\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.t,
            r.s.re,
            r.s.im,
            r.s.norm(),
            r.norm,
            r.max_rank
        ));
    }
    s
}

/// Propagates one checkpoint interval with the configured scheme.
fn step_checkpoint(
    cfg: &RunConfig,
    system: &System,
    plan: Option<&ChebyshevPlan>,
    psi: &WaveState,
) -> Result<(WaveState, usize)> {
    match cfg.scheme {
        SchemeKind::Soft => {
            let steps = (cfg.tau / cfg.dt).round();
            if steps < 1.0 || (cfg.tau / cfg.dt - steps).abs() > 1e-9 * steps {
                return Err(TtError::Config(format!(
                    "key 'dt': must divide tau ({} / {} is not an integer)",
                    cfg.tau, cfg.dt
                )));
            }
            let (out, stats) =
                soft_propagate(psi, system, cfg.dt, steps as usize, cfg.round_tol, cfg.rmax)?;
            Ok((out, stats.max_rank))
        }
        _ => {
            let plan = plan.expect("Chebyshev schemes carry a plan");
            let (out, stats) = chebyshev_propagate(psi, system, plan)?;
            Ok((out, stats.max_rank))
        }
    }
}

/// Runs a configured simulation from t = 0, writing survival.csv, any
/// configured 2-D density slices, and the final state checkpoint into the
/// output directory.
pub fn run_simulation(cfg: &RunConfig) -> Result<RunReport> {
    run_simulation_from(cfg, None)
}

/// Same as [`run_simulation`] but optionally resuming from a saved state at
/// checkpoint index `start` (time start·τ); already-passed checkpoints are
/// not recomputed and survival.csv covers only the resumed portion.
pub fn run_simulation_from(
    cfg: &RunConfig,
    resume: Option<(WaveState, usize)>,
) -> Result<RunReport> {
    cfg.validate()?;
    let system = System::new(cfg.hamiltonian_spec()?)?;
    let vol = system.volume_element();
    let disc = cfg.discretization()?;
    let (psi0, warnings) = initial_gaussian(&cfg.gaussian()?, &disc)?;
    let total = cfg.checkpoints();
    let (mut psi, start) = match resume {
        Some((state, idx)) => {
            if idx > total {
                return Err(TtError::InvalidArgument(format!(
                    "resume checkpoint {idx} is past the final checkpoint {total}"
                )));
            }
            (state, idx)
        }
        None => (psi0.clone(), 0),
    };
    let plan = match cfg.chebyshev_scheme() {
        Some(scheme) => Some(ChebyshevPlan::new(
            cfg.tau,
            cfg.n_poly,
            scheme,
            cfg.round_tol,
            cfg.rmax,
            system.bounds()?,
            cfg.auto_trim,
        )?),
        None => None,
    };

    let out_dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&out_dir)?;
    let mut files = Vec::new();
    let mut rows = Vec::new();
    let record = |rows: &mut Vec<CheckpointRow>, t: f64, psi: &WaveState, rank: usize| -> Result<()> {
        rows.push(CheckpointRow {
            t,
            s: survival_amplitude(&psi0, psi, vol)?,
            norm: psi.norm(vol)?,
            max_rank: rank.max(psi.max_rank()),
        });
        Ok(())
    };
    if start == 0 {
        record(&mut rows, 0.0, &psi, psi.max_rank())?;
    }

    let slice_due = |t: f64| {
        cfg.slice_times
            .iter()
            .any(|&st| (st - t).abs() <= 0.5 * cfg.tau)
    };
    let emit_slice = |files: &mut Vec<PathBuf>, i: usize, t: f64, psi: &WaveState| -> Result<()> {
        if cfg.dims < 2 || !slice_due(t) {
            return Ok(());
        }
        let (p, q) = cfg.slice_dims;
        let (xs, ys, dens) = density_slice2d(psi, &disc, p, q, &cfg.x0)?;
        let mut csv = format!("x{p}_au,x{q}_au,density\n");
        for (a, &x) in xs.iter().enumerate() {
            for (b, &y) in ys.iter().enumerate() {
                csv.push_str(&format!("{x},{y},{}\n", dens[[a, b]]));
            }
        }
        let slice_path = out_dir.join(format!("slice_{i:05}.csv"));
        write_atomic(&slice_path, csv.as_bytes())?;
        files.push(slice_path);
        let ck_path = out_dir
            .join(format!("checkpoint_{i:05}.{}", checkpoint_extension(cfg.format)));
        write_checkpoint(&ck_path, psi)?;
        files.push(ck_path);
        Ok(())
    };
    emit_slice(&mut files, start, start as f64 * cfg.tau, &psi)?;

    let survival_path = out_dir.join("survival.csv");
    for i in start + 1..=total {
        let (next, rank) = step_checkpoint(cfg, &system, plan.as_ref(), &psi)?;
        psi = next;
        let t = i as f64 * cfg.tau;
        record(&mut rows, t, &psi, rank)?;
        emit_slice(&mut files, i, t, &psi)?;
        // keep survival.csv current so long runs can be monitored and
        // partial results survive interruption
        write_atomic(&survival_path, survival_csv(&rows).as_bytes())?;
    }
    write_atomic(&survival_path, survival_csv(&rows).as_bytes())?;
    files.push(survival_path);
    let final_path = out_dir.join(format!("state_final.{}", checkpoint_extension(cfg.format)));
    write_checkpoint(&final_path, &psi)?;
    files.push(final_path);

    Ok(RunReport { rows, final_state: psi, warnings, files })
}

/// Maps `f` over `items` on up to `jobs` worker threads, preserving input
/// order in the output. `jobs = 1` runs inline and sequentially.
fn par_map<T, U, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync,
{
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<U>>>> =
        items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(items.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let out = f(&items[i]);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

/// One convergence-sweep record: L² error against the analytic coherent
/// state after a single Chebyshev step of length `t` with `n_poly` terms.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub t: f64,
    pub n_poly: usize,
    pub l2: f64,
}

fn analytic_oracle(cfg: &RunConfig) -> Result<AnalyticCoherentState> {
    let omega = match cfg.model {
        crate::config::ModelKind::Harmonic => cfg.omega,
        crate::config::ModelKind::Dna => {
            return Err(TtError::Config(
                "key 'model': analytic sweeps require the harmonic model".into(),
            ))
        }
    };
    if (cfg.w - cfg.mass * omega).abs() > 1e-12 {
        return Err(TtError::Config(format!(
            "key 'w': the analytic coherent state needs w = mass*omega = {}, got {}",
            cfg.mass * omega,
            cfg.w
        )));
    }
    AnalyticCoherentState::new(omega, cfg.mass, &cfg.x0, &cfg.p0)
}

/// Sweeps the Chebyshev order over `n_list` for each final time in `t_list`
/// (single propagation step per point, no trimming so the order is exactly
/// what is requested) and writes convergence.csv.
pub fn run_convergence_study(
    cfg: &RunConfig,
    t_list: &[f64],
    n_list: &[usize],
    jobs: usize,
) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    let cs = analytic_oracle(cfg)?;
    let system = System::new(cfg.hamiltonian_spec()?)?;
    let vol = system.volume_element();
    let disc = cfg.discretization()?;
    let (psi0, _) = initial_gaussian(&cfg.gaussian()?, &disc)?;
    let scheme = cfg
        .chebyshev_scheme()
        .ok_or_else(|| TtError::Config("key 'scheme': convergence sweeps are Chebyshev-only".into()))?;

    let mut points = Vec::new();
    for &t in t_list {
        for &n in n_list {
            points.push((t, n));
        }
    }
    let rows = par_map(&points, jobs, |&(t, n)| {
        let plan =
            ChebyshevPlan::new(t, n, scheme, cfg.round_tol, cfg.rmax, system.bounds()?, false)?;
        let (psi, _) = chebyshev_propagate(&psi0, &system, &plan)?;
        let reference = coherent_state_on(&cs, &disc, t)?;
        Ok(ConvergenceRow { t, n_poly: n, l2: l2_error(&psi, &reference, vol)? })
    })?;

    let out_dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&out_dir)?;
    let mut csv = String::from("t_au,n_poly,l2_error\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{}\n", r.t, r.n_poly, r.l2));
    }
    write_atomic(&out_dir.join("convergence.csv"), csv.as_bytes())?;
    Ok(rows)
}

/// One split-operator comparison record at time step `dt`: L² and
/// survival-amplitude (autocorrelation) relative errors at t_final for a
/// per-step Chebyshev propagation and for split-operator propagation.
#[derive(Debug, Clone, Copy)]
pub struct SoftCompareRow {
    pub dt: f64,
    pub err_ttc: f64,
    pub err_soft: f64,
    pub acorr_err_ttc: f64,
    pub acorr_err_soft: f64,
}

/// For each dt: propagates to t_final once with per-step Chebyshev series
/// (order n_poly, trimmed) and once with the split-operator method, scoring
/// both against the analytic coherent state. Writes soft_compare.csv.
pub fn run_soft_comparison(
    cfg: &RunConfig,
    dt_list: &[f64],
    jobs: usize,
) -> Result<Vec<SoftCompareRow>> {
    cfg.validate()?;
    let cs = analytic_oracle(cfg)?;
    let system = System::new(cfg.hamiltonian_spec()?)?;
    let vol = system.volume_element();
    let disc = cfg.discretization()?;
    let (psi0, _) = initial_gaussian(&cfg.gaussian()?, &disc)?;
    let reference = coherent_state_on(&cs, &disc, cfg.t_final)?;
    let s_ref = cs.survival(cfg.t_final);
    let scheme = cfg.chebyshev_scheme().unwrap_or(crate::propagators::ChebyshevScheme::Clenshaw);

    let rows = par_map(dt_list, jobs, |&dt| {
        let steps = (cfg.t_final / dt).round();
        if steps < 1.0 || (cfg.t_final / dt - steps).abs() > 1e-9 * steps {
            return Err(TtError::Config(format!(
                "dt = {dt} does not divide t_final = {}",
                cfg.t_final
            )));
        }
        let steps = steps as usize;
        let plan = ChebyshevPlan::new(
            dt,
            cfg.n_poly,
            scheme,
            cfg.round_tol,
            cfg.rmax,
            system.bounds()?,
            true,
        )?;
        let mut ttc = psi0.clone();
        for _ in 0..steps {
            ttc = chebyshev_propagate(&ttc, &system, &plan)?.0;
        }
        let (soft, _) = soft_propagate(&psi0, &system, dt, steps, cfg.round_tol, cfg.rmax)?;
        let score = |psi: &WaveState| -> Result<(f64, f64)> {
            let l2 = l2_error(psi, &reference, vol)?;
            let s = survival_amplitude(&psi0, psi, vol)?;
            Ok((l2, (s - s_ref).norm() / s_ref.norm()))
        };
        let (err_ttc, acorr_err_ttc) = score(&ttc)?;
        let (err_soft, acorr_err_soft) = score(&soft)?;
        Ok(SoftCompareRow { dt, err_ttc, err_soft, acorr_err_ttc, acorr_err_soft })
    })?;

    let out_dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&out_dir)?;
    let mut csv = String::from("dt_au,err_ttc,err_soft,acorr_err_ttc,acorr_err_soft\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.dt, r.err_ttc, r.err_soft, r.acorr_err_ttc, r.acorr_err_soft
        ));
    }
    write_atomic(&out_dir.join("soft_compare.csv"), csv.as_bytes())?;
    Ok(rows)
}

/// Writes a Bessel table CSV (k, J_k(x)) for auditing the series weights.
pub fn write_bessel_table(path: &Path, n: usize, x: f64) -> Result<()> {
    let table = crate::propagators::bessel_j_sequence(n, x)?;
    let mut csv = String::from("k,j_k\n");
    for (k, v) in table.values().iter().enumerate() {
        csv.push_str(&format!("{k},{v}\n"));
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(csv.as_bytes())?;
    Ok(())
}
