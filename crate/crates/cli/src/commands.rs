use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use hsstv_core::check::{run_self_checks, CheckOptions};
use hsstv_core::metrics::evaluate;
use hsstv_core::operators::operator_norm_estimate;
use hsstv_core::simulate::{blind_radii, make_test_cube, simulate_observations, DegradationSpec};
use hsstv_core::solver::{
    pds_solve, select_step_sizes, ConvergenceTrace, FusionProblem, ProblemParams, SolveStatus,
};
use hsstv_core::{CubeDims, Error, HsCube};
use serde::Serialize;
use toml::Table;

use crate::config::{read_table, ExperimentConfig, RadiiMode, StepMode};

/// A run that completed but failed a property or did not converge (exit 1).
#[derive(Debug)]
pub struct PropertyFailure(pub String);

impl std::fmt::Display for PropertyFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for PropertyFailure {}

fn load_cube(path: &Path, what: &str) -> Result<HsCube> {
    HsCube::load(path).with_context(|| format!("cannot load {what} from {}", path.display()))
}

fn save_cube(cube: &HsCube, path: &Path) -> Result<()> {
    cube.save(path)
        .with_context(|| format!("cannot write {}", path.display()))
}

fn create_out(cfg: &ExperimentConfig) -> Result<&Path> {
    let out = cfg.paths.out.as_path();
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    Ok(out)
}

/// Resolved config followed by a results table.
fn write_with_section<T: Serialize>(
    path: &Path,
    cfg: &ExperimentConfig,
    section: &str,
    body: &T,
) -> Result<()> {
    let mut results = Table::new();
    results.insert(section.into(), toml::Value::try_from(body)?);
    let text = format!("{}\n{}", cfg.to_toml()?, toml::to_string(&results)?);
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn warn_weights(cfg: &ExperimentConfig) {
    for w in cfg.weight_warnings() {
        eprintln!("warning: {w}");
    }
}

#[derive(Debug, Serialize)]
struct SimulationRecord {
    epsilon_oracle: f64,
    eta_oracle: f64,
    epsilon_blind: f64,
    eta_blind: f64,
    /// `[nv, nh, bands]` of the reference, `v` and `g`.
    truth_dims: [usize; 3],
    v_dims: [usize; 3],
    g_dims: [usize; 3],
}

fn dims_array(d: CubeDims) -> [usize; 3] {
    [d.nv, d.nh, d.bands]
}

pub fn simulate(mut cfg: ExperimentConfig) -> Result<()> {
    warn_weights(&cfg);
    let truth = match cfg.synthetic_truth()? {
        Some((pattern, nv, nh, b)) => make_test_cube(nv, nh, b, pattern, cfg.seed)?,
        None => {
            let path = cfg
                .paths
                .truth
                .as_deref()
                .context("simulate needs a reference cube: --truth PATH or --synthetic SPEC")?;
            load_cube(path, "reference cube")?
        }
    };
    let response = cfg.response(truth.bands())?;
    let d = &cfg.degradation;
    let spec = DegradationSpec {
        ratio: d.ratio,
        sigma_v: d.sigma_v,
        sigma_g: d.sigma_g,
        response,
        blur: cfg.blur()?,
        seed: cfg.seed,
    };
    let obs = simulate_observations(&truth, &spec)?;

    let out = create_out(&cfg)?.to_path_buf();
    if cfg.synthetic.is_some() {
        let path = out.join("truth.hsc");
        save_cube(&truth, &path)?;
        cfg.paths.truth = Some(path);
    }
    let (v_path, g_path, meta_path) = (out.join("v.hsc"), out.join("g.hsc"), out.join("meta.toml"));
    save_cube(&obs.v, &v_path)?;
    save_cube(obs.g.as_cube(), &g_path)?;
    let (epsilon_blind, eta_blind) = blind_radii(
        d.sigma_v,
        d.sigma_g,
        obs.v.data().len(),
        obs.g.as_cube().data().len(),
    );
    let record = SimulationRecord {
        epsilon_oracle: obs.epsilon_oracle,
        eta_oracle: obs.eta_oracle,
        epsilon_blind,
        eta_blind,
        truth_dims: dims_array(truth.dims()),
        v_dims: dims_array(obs.v.dims()),
        g_dims: dims_array(obs.g.as_cube().dims()),
    };
    cfg.paths.v = Some(v_path);
    cfg.paths.g = Some(g_path);
    cfg.paths.meta = Some(meta_path.clone());
    write_with_section(&meta_path, &cfg, "simulation", &record)?;
    println!(
        "simulate: v {} g {} -> {} (oracle epsilon {:.6}, eta {:.6})",
        obs.v.dims(),
        obs.g.as_cube().dims(),
        out.display(),
        obs.epsilon_oracle,
        obs.eta_oracle
    );
    Ok(())
}

/// Inputs for `fuse`; unset fields fall back to the config, then to `input`.
#[derive(Debug, Default)]
pub struct FuseInputs {
    pub input: Option<PathBuf>,
    pub v: Option<PathBuf>,
    pub g: Option<PathBuf>,
    pub meta: Option<PathBuf>,
}

fn oracle_radii(meta: &Path) -> Result<(f64, f64)> {
    let text =
        fs::read_to_string(meta).with_context(|| format!("cannot read {}", meta.display()))?;
    let table: Table = text
        .parse()
        .with_context(|| format!("cannot parse {}", meta.display()))?;
    let sim = table
        .get("simulation")
        .and_then(|s| s.as_table())
        .with_context(|| format!("{} has no [simulation] table", meta.display()))?;
    let get = |key: &str| {
        sim.get(key)
            .and_then(|v| v.as_float())
            .with_context(|| format!("{} lacks simulation.{key}", meta.display()))
    };
    Ok((get("epsilon_oracle")?, get("eta_oracle")?))
}

/// Warns when the simulation that produced the inputs used another degradation.
fn check_against_meta(cfg: &ExperimentConfig, meta: &Path) {
    let Ok(table) = read_table(meta) else {
        return;
    };
    let Some(sim) = table.get("degradation") else {
        return;
    };
    let ours = toml::Value::try_from(&cfg.degradation).ok();
    if ours.as_ref() != Some(sim) {
        eprintln!(
            "warning: degradation settings differ from those recorded in {}",
            meta.display()
        );
    }
}

#[derive(Debug, Serialize)]
struct RunRecord {
    status: String,
    iterations: usize,
    wall_time_s: f64,
    gamma1: f64,
    gamma2: f64,
    norm_estimate: f64,
    epsilon: f64,
    eta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_rel_change: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_v_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_g_gap: Option<f64>,
}

pub fn fuse(mut cfg: ExperimentConfig, inputs: FuseInputs) -> Result<()> {
    warn_weights(&cfg);
    let from_input = |name: &str| inputs.input.as_ref().map(|d| d.join(name));
    let v_path = inputs
        .v
        .or_else(|| cfg.paths.v.clone())
        .or_else(|| from_input("v.hsc"))
        .context("fuse needs v: --v PATH, --input DIR or paths.v")?;
    let g_path = inputs
        .g
        .or_else(|| cfg.paths.g.clone())
        .or_else(|| from_input("g.hsc"))
        .context("fuse needs g: --g PATH, --input DIR or paths.g")?;
    let meta_path = inputs
        .meta
        .or_else(|| cfg.paths.meta.clone())
        .or_else(|| from_input("meta.toml"))
        .or_else(|| v_path.parent().map(|p| p.join("meta.toml")))
        .filter(|p| p.exists());

    let v = load_cube(&v_path, "v")?;
    let g = load_cube(&g_path, "g")?;
    let response = cfg.response(v.bands())?;
    if g.bands() != response.guide_bands() {
        bail!(
            "g has {} bands but the spectral response produces {}",
            g.bands(),
            response.guide_bands()
        );
    }
    let ratio = cfg.degradation.ratio;
    let dims = CubeDims::new(g.nv(), g.nh(), v.bands())?;
    if ratio == 0 || v.nv() * ratio != g.nv() || v.nh() * ratio != g.nh() {
        bail!(
            "v is {}x{} and g is {}x{}, inconsistent with ratio {ratio}",
            v.nv(),
            v.nh(),
            g.nv(),
            g.nh()
        );
    }
    if let Some(meta) = &meta_path {
        check_against_meta(&cfg, meta);
    }

    let (epsilon, eta) = match cfg.problem.radii {
        RadiiMode::Oracle => {
            let meta = meta_path.as_deref().context(
                "oracle radii need the simulation metadata: --meta PATH or radii = \"blind\"",
            )?;
            oracle_radii(meta)?
        }
        RadiiMode::Blind => blind_radii(
            cfg.degradation.sigma_v,
            cfg.degradation.sigma_g,
            v.data().len(),
            g.data().len(),
        ),
        RadiiMode::Fixed => match (cfg.problem.epsilon, cfg.problem.eta) {
            (Some(e), Some(h)) => (e, h),
            _ => bail!("radii = \"fixed\" needs problem.epsilon and problem.eta"),
        },
    };

    let (u_bounds, q_bounds) = cfg.bounds()?;
    let guide_range = cfg.guide_range(&response);
    let problem = FusionProblem::new(ProblemParams {
        dims,
        ratio,
        blur: cfg.blur()?,
        response,
        guide_range,
        omega: cfg.problem.omega,
        norm: cfg.norm()?,
        lambda: cfg.problem.lambda,
        rho: cfg.problem.rho,
        epsilon,
        eta,
        u_bounds,
        q_bounds,
    })?;

    let mut solver = cfg.solver_config();
    let norm = operator_norm_estimate(problem.stacked_operator(), solver.norm_iters, solver.seed)?;
    if cfg.solver.steps == StepMode::Auto {
        (solver.gamma1, solver.gamma2) = select_step_sizes(norm, solver.gamma1)?;
    }

    let out = create_out(&cfg)?.to_path_buf();
    cfg.paths.v = Some(v_path);
    cfg.paths.g = Some(g_path);
    cfg.paths.meta = meta_path;
    let record = |status: SolveStatus, iterations: usize, trace: &ConvergenceTrace, secs: f64| {
        let last = trace.last();
        RunRecord {
            status: status.to_string(),
            iterations,
            wall_time_s: secs,
            gamma1: solver.gamma1,
            gamma2: solver.gamma2,
            norm_estimate: norm,
            epsilon,
            eta,
            final_rel_change: last.map(|r| r.rel_change).filter(|x| x.is_finite()),
            final_v_gap: last.map(|r| r.v_gap).filter(|x| x.is_finite()),
            final_g_gap: last.map(|r| r.g_gap).filter(|x| x.is_finite()),
        }
    };
    let trace_path = out.join("trace.csv");
    let manifest_path = out.join("manifest.toml");

    let start = Instant::now();
    let result = pds_solve(&problem, v.data(), g.data(), &solver, None);
    let secs = start.elapsed().as_secs_f64();
    let output = match result {
        Ok(output) => output,
        Err(Error::Diverged { iteration, trace }) => {
            trace.write_csv(&trace_path)?;
            let rec = record(SolveStatus::Diverged, iteration, &trace, secs);
            write_with_section(&manifest_path, &cfg, "run", &rec)?;
            return Err(PropertyFailure(format!(
                "solver diverged at iteration {iteration}; partial trace in {}",
                trace_path.display()
            ))
            .into());
        }
        Err(e) => return Err(e.into()),
    };

    save_cube(&output.u, &out.join("u.hsc"))?;
    save_cube(output.q.as_cube(), &out.join("q.hsc"))?;
    output.trace.write_csv(&trace_path)?;
    let rec = record(output.status, output.iterations, &output.trace, secs);
    write_with_section(&manifest_path, &cfg, "run", &rec)?;
    println!(
        "fuse: {} after {} iterations in {secs:.2}s (gamma1 {:.4e}, gamma2 {:.4e}) -> {}",
        output.status,
        output.iterations,
        solver.gamma1,
        solver.gamma2,
        out.display()
    );
    if output.status == SolveStatus::MaxIters {
        eprintln!(
            "warning: stopped at max_iters = {} before reaching rel_tol = {:e}",
            cfg.solver.max_iters, cfg.solver.rel_tol
        );
    }
    Ok(())
}

pub struct EvaluateInputs {
    pub estimate: PathBuf,
    pub truth: Option<PathBuf>,
    pub ratio: Option<usize>,
    pub per_band: bool,
}

pub fn evaluate_cmd(cfg: ExperimentConfig, inputs: EvaluateInputs) -> Result<()> {
    let truth_path = inputs
        .truth
        .or_else(|| cfg.paths.truth.clone())
        .context("evaluate needs a reference: --truth PATH or paths.truth")?;
    let estimate = load_cube(&inputs.estimate, "estimate")?;
    let truth = load_cube(&truth_path, "reference cube")?;
    let ratio = inputs.ratio.unwrap_or(cfg.degradation.ratio);
    let report = evaluate(&estimate, &truth, ratio as f64)?;

    let out = create_out(&cfg)?;
    let metrics = format!(
        "psnr_db,sam_deg,ergas\n{},{},{}\n",
        report.psnr, report.sam_mean, report.ergas
    );
    let path = out.join("metrics.csv");
    fs::write(&path, &metrics).with_context(|| format!("cannot write {}", path.display()))?;
    if inputs.per_band {
        let mut text = String::from("band,mse\n");
        for (k, mse) in report.per_band_mse.iter().enumerate() {
            writeln!(text, "{},{mse}", k + 1)?;
        }
        let path = out.join("per_band.csv");
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    if report.sam_excluded > 0 {
        eprintln!(
            "warning: {} zero-norm pixels left out of SAM",
            report.sam_excluded
        );
    }
    println!(
        "evaluate: PSNR {:.4} dB, SAM {:.4} deg, ERGAS {:.4}",
        report.psnr, report.sam_mean, report.ergas
    );
    Ok(())
}

pub fn check(seed: u64, perturb_adjoint: Option<String>) -> Result<()> {
    let start = Instant::now();
    let report = run_self_checks(&CheckOptions {
        seed,
        perturb_adjoint,
    })?;
    println!("{report}");
    println!("check: {:.2}s", start.elapsed().as_secs_f64());
    if report.all_passed() {
        Ok(())
    } else {
        let names: Vec<&str> = report.failures().map(|o| o.name.as_str()).collect();
        Err(PropertyFailure(format!("failed checks: {}", names.join(", "))).into())
    }
}
