//! Experiment configuration.
//!
//! Layers, later wins: built-in defaults, preset, config file, command-line
//! flags. Layers are merged as TOML tables and the result deserialized once,
//! so every resolved value can be echoed back. Manifests written by the
//! commands embed the resolved config and are themselves valid config files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hsstv_core::operators::{BlurSpec, SpectralResponse};
use hsstv_core::simulate::Pattern;
use hsstv_core::solver::{
    Bounds, HsstvNorm, SolverConfig, DEFAULT_FEAS_TOL, DEFAULT_MAX_ITERS, DEFAULT_REL_TOL,
    DEFAULT_TRACE_EVERY,
};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::presets::{self, Preset, Scenario};

/// Tables that commands append to their outputs; ignored when reading a config.
pub const RUN_SECTIONS: [&str; 2] = ["run", "simulation"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Generate the reference cube instead of reading `paths.truth`, as
    /// `pattern:NVxNHxB`, e.g. `blocks:32x32x16`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<String>,
    pub paths: Paths,
    pub degradation: Degradation,
    pub response: Response,
    pub problem: Problem,
    pub solver: Solver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<PathBuf>,
    /// Simulation metadata holding the oracle radii.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlurKind {
    /// Gaussian with radius `r` and standard deviation `r / 2`.
    Ratio,
    Identity,
    /// Gaussian with explicit `blur_radius` and `blur_sigma`.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Degradation {
    pub ratio: usize,
    pub sigma_v: f64,
    pub sigma_g: f64,
    pub blur: BlurKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blur_radius: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blur_sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseSource {
    /// One guide band averaging `range` (default: first half of the bands).
    Pan,
    /// `guide_bands` equal-width averaging windows over all bands.
    Windows,
    /// Weight matrix from `weights`, one CSV row per guide band.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Response {
    pub source: ResponseSource,
    /// 1-based inclusive band range averaged by the PAN response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[usize; 2]>,
    pub guide_bands: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
    /// Bands compared against the guide in the edge term; defaults to the
    /// support of the response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guide_range: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadiiMode {
    /// Exact noise norms recorded by `simulate`.
    Oracle,
    /// `sigma * sqrt(len)` from the degradation noise levels.
    Blind,
    /// `epsilon` and `eta` as given.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub omega: f64,
    pub p: u32,
    pub lambda: f64,
    pub rho: f64,
    pub radii: RadiiMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub u_box: [f64; 2],
    pub q_box: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepMode {
    /// `gamma2 = 1 / (gamma1 * (1.01 ||L||)^2)` from a power-iteration estimate.
    Auto,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solver {
    pub steps: StepMode,
    pub gamma1: f64,
    /// Ignored under auto steps.
    pub gamma2: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub trace_every: usize,
    pub feas_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let (gamma1, gamma2) = Scenario::Pan.steps();
        Self {
            seed: 0,
            preset: None,
            synthetic: None,
            paths: Paths {
                truth: None,
                v: None,
                g: None,
                meta: None,
                out: PathBuf::from("out"),
            },
            degradation: Degradation {
                ratio: 2,
                sigma_v: 0.1,
                sigma_g: 0.02,
                blur: BlurKind::Ratio,
                blur_radius: None,
                blur_sigma: None,
            },
            response: Response {
                source: ResponseSource::Pan,
                range: None,
                guide_bands: 1,
                weights: None,
                guide_range: None,
            },
            problem: Problem {
                omega: 0.01,
                p: 2,
                lambda: 0.04,
                rho: 1.0,
                radii: RadiiMode::Oracle,
                epsilon: None,
                eta: None,
                u_box: [0.0, 1.0],
                q_box: [0.0, 1.0],
            },
            solver: Solver {
                steps: StepMode::Auto,
                gamma1,
                gamma2,
                max_iters: DEFAULT_MAX_ITERS,
                rel_tol: DEFAULT_REL_TOL,
                trace_every: DEFAULT_TRACE_EVERY,
                feas_tol: DEFAULT_FEAS_TOL,
            },
        }
    }
}

/// Command-line values that override everything else.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub gamma: Option<GammaArg>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaArg {
    Auto,
    Fixed(f64, f64),
}

impl std::str::FromStr for GammaArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(GammaArg::Auto);
        }
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|g| *g > 0.0 && g.is_finite())
        };
        match s.split_once(',') {
            Some((a, b)) => match (parse(a), parse(b)) {
                (Some(g1), Some(g2)) => Ok(GammaArg::Fixed(g1, g2)),
                _ => Err(format!("step sizes must be positive numbers, got {s:?}")),
            },
            None => Err(format!("expected `auto` or `g1,g2`, got {s:?}")),
        }
    }
}

fn preset_layer(p: &Preset) -> Table {
    let (gamma1, gamma2) = p.scenario.steps();
    let source = match p.scenario {
        Scenario::Pan => "pan",
        Scenario::Fuse => "windows",
    };
    let text = format!(
        "preset = {name:?}\n\
         [degradation]\nratio = {r}\nsigma_v = {sv:?}\nsigma_g = {sg:?}\n\
         [response]\nsource = {source:?}\nguide_bands = {gb}\n\
         [problem]\nomega = {omega:?}\np = {p}\nlambda = {lambda:?}\nrho = {rho:?}\n\
         [solver]\ngamma1 = {gamma1:?}\ngamma2 = {gamma2:?}\n",
        name = p.name(),
        r = p.ratio,
        sv = p.sigma_v,
        sg = p.sigma_g,
        gb = p.scenario.guide_bands(),
        omega = p.omega,
        p = p.p,
        lambda = p.lambda,
        rho = p.rho,
    );
    text.parse().expect("preset layer is valid TOML")
}

/// Recursive merge; scalars and arrays in `over` replace those in `base`.
fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let mut table: Table = text
        .parse()
        .with_context(|| format!("cannot parse config {}", path.display()))?;
    for section in RUN_SECTIONS {
        table.remove(section);
    }
    Ok(table)
}

impl ExperimentConfig {
    pub fn resolve(config: Option<&Path>, cli: &Overrides) -> Result<Self> {
        let mut table = Table::try_from(ExperimentConfig::default())?;
        let file = config.map(read_table).transpose()?;

        let preset_name = cli.preset.clone().or_else(|| {
            file.as_ref()
                .and_then(|f| f.get("preset"))
                .and_then(Value::as_str)
                .map(str::to_owned)
        });
        if let Some(name) = &preset_name {
            merge(&mut table, preset_layer(&presets::lookup(name)?));
        }
        if let Some(file) = file {
            merge(&mut table, file);
        }

        let mut cfg: ExperimentConfig = table.try_into().context("invalid configuration")?;
        if cli.preset.is_some() {
            cfg.preset = cli.preset.clone();
        }
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &cli.out {
            cfg.paths.out = out.clone();
        }
        match cli.gamma {
            Some(GammaArg::Auto) => cfg.solver.steps = StepMode::Auto,
            Some(GammaArg::Fixed(g1, g2)) => {
                cfg.solver.steps = StepMode::Fixed;
                cfg.solver.gamma1 = g1;
                cfg.solver.gamma2 = g2;
            }
            None => {}
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Values outside the ranges the reference parameters were tuned over.
    pub fn weight_warnings(&self) -> Vec<String> {
        let p = &self.problem;
        [
            ("omega", p.omega, 0.0, 0.1),
            ("lambda", p.lambda, 0.01, 0.1),
            ("rho", p.rho, 0.5, 1.5),
        ]
        .into_iter()
        .filter(|&(_, v, lo, hi)| !(lo..=hi).contains(&v))
        .map(|(name, v, lo, hi)| format!("{name} = {v} is outside the tuned range [{lo}, {hi}]"))
        .collect()
    }

    pub fn synthetic_truth(&self) -> Result<Option<(Pattern, usize, usize, usize)>> {
        let Some(spec) = &self.synthetic else {
            return Ok(None);
        };
        let bad = || format!("synthetic must look like blocks:32x32x16, got {spec:?}");
        let (pattern, dims) = spec.split_once(':').with_context(bad)?;
        let pattern: Pattern = pattern.parse()?;
        let dims: Vec<usize> = dims
            .split('x')
            .map(|d| d.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .with_context(bad)?;
        match dims[..] {
            [nv, nh, b] => Ok(Some((pattern, nv, nh, b))),
            _ => bail!(bad()),
        }
    }

    pub fn blur(&self) -> Result<BlurSpec> {
        let d = &self.degradation;
        Ok(match d.blur {
            BlurKind::Ratio => BlurSpec::for_ratio(d.ratio),
            BlurKind::Identity => BlurSpec::Identity,
            BlurKind::Gaussian => {
                let (Some(radius), Some(sigma)) = (d.blur_radius, d.blur_sigma) else {
                    bail!("gaussian blur needs degradation.blur_radius and degradation.blur_sigma");
                };
                BlurSpec::Gaussian { radius, sigma }
            }
        })
    }

    pub fn response(&self, hs_bands: usize) -> Result<SpectralResponse> {
        let r = &self.response;
        Ok(match r.source {
            ResponseSource::Pan => {
                let [lo, hi] = r.range.unwrap_or_else(|| {
                    let (lo, hi) = SpectralResponse::default_pan_range(hs_bands);
                    [lo, hi]
                });
                SpectralResponse::pan_average(hs_bands, lo, hi)?
            }
            ResponseSource::Windows => SpectralResponse::uniform_windows(hs_bands, r.guide_bands)?,
            ResponseSource::File => {
                let path = r
                    .weights
                    .as_deref()
                    .context("response.source = \"file\" needs response.weights")?;
                SpectralResponse::new(read_weights(path)?)?
            }
        })
    }

    pub fn guide_range(&self, response: &SpectralResponse) -> (usize, usize) {
        match self.response.guide_range {
            Some([lo, hi]) => (lo, hi),
            None => response.support(),
        }
    }

    pub fn norm(&self) -> Result<HsstvNorm> {
        Ok(HsstvNorm::from_p(self.problem.p)?)
    }

    pub fn bounds(&self) -> Result<(Bounds, Bounds)> {
        let [ulo, uhi] = self.problem.u_box;
        let [qlo, qhi] = self.problem.q_box;
        Ok((Bounds::new(ulo, uhi)?, Bounds::new(qlo, qhi)?))
    }

    /// Solver settings with `gamma2` still unresolved under auto steps.
    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            gamma1: s.gamma1,
            gamma2: s.gamma2,
            max_iters: s.max_iters,
            rel_tol: s.rel_tol,
            trace_every: s.trace_every,
            feas_tol: s.feas_tol,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }
}

/// Headerless CSV, one row of per-band weights per guide band.
pub fn read_weights(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read weights {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{}: row {} is not numeric", path.display(), i + 1))?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let path = dir.path().join(name);
        std::fs::File::create(&path)
            .unwrap()
            .write_all(text.as_bytes())
            .unwrap();
        path
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let back: ExperimentConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn layers_apply_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(
            &dir,
            "c.toml",
            "preset = \"fuse-r4\"\nseed = 3\n[problem]\nlambda = 0.05\n",
        );
        let cli = Overrides {
            seed: Some(9),
            gamma: Some(GammaArg::Fixed(0.01, 0.2)),
            ..Overrides::default()
        };
        let cfg = ExperimentConfig::resolve(Some(&path), &cli).unwrap();
        assert_eq!(cfg.degradation.ratio, 4);
        assert_eq!(cfg.response.source, ResponseSource::Windows);
        assert_eq!(cfg.problem.lambda, 0.05);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.solver.steps, StepMode::Fixed);
        assert_eq!((cfg.solver.gamma1, cfg.solver.gamma2), (0.01, 0.2));
    }

    #[test]
    fn cli_preset_beats_file_preset() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "c.toml", "preset = \"pan-r4\"\n");
        let cli = Overrides {
            preset: Some("pan-r2".into()),
            ..Overrides::default()
        };
        let cfg = ExperimentConfig::resolve(Some(&path), &cli).unwrap();
        assert_eq!(cfg.degradation.ratio, 2);
        assert_eq!(cfg.preset.as_deref(), Some("pan-r2"));
    }

    #[test]
    fn manifests_are_configs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::default();
        let text = format!(
            "{}\n[run]\nstatus = \"converged\"\n",
            cfg.to_toml().unwrap()
        );
        let path = write_temp(&dir, "m.toml", &text);
        let back = ExperimentConfig::resolve(Some(&path), &Overrides::default()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "c.toml", "[problem]\nlamda = 0.05\n");
        assert!(ExperimentConfig::resolve(Some(&path), &Overrides::default()).is_err());
    }

    #[test]
    fn gamma_argument() {
        assert_eq!("auto".parse::<GammaArg>(), Ok(GammaArg::Auto));
        assert_eq!(
            "0.005, 0.1818".parse::<GammaArg>(),
            Ok(GammaArg::Fixed(0.005, 0.1818))
        );
        for bad in ["", "0.1", "0,1", "a,b", "-1,2"] {
            assert!(bad.parse::<GammaArg>().is_err(), "{bad}");
        }
    }

    #[test]
    fn weight_ranges_warn() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.weight_warnings().is_empty());
        cfg.problem.omega = 0.2;
        cfg.problem.rho = 2.0;
        let w = cfg.weight_warnings();
        assert_eq!(w.len(), 2);
        assert!(w[0].starts_with("omega"));
    }

    #[test]
    fn weights_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "w.csv", "0.5, 0.5, 0\n0, 0.25, 0.75\n");
        assert_eq!(
            read_weights(&path).unwrap(),
            vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.25, 0.75]]
        );
        let bad = write_temp(&dir, "bad.csv", "0.5,x\n");
        assert!(read_weights(&bad).is_err());
    }

    #[test]
    fn synthetic_spec() {
        let mut cfg = ExperimentConfig {
            synthetic: Some("blocks:8x6x4".into()),
            ..ExperimentConfig::default()
        };
        assert_eq!(
            cfg.synthetic_truth().unwrap(),
            Some((Pattern::Blocks, 8, 6, 4))
        );
        cfg.synthetic = Some("blocks:8x6".into());
        assert!(cfg.synthetic_truth().is_err());
    }
}
