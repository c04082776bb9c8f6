//! Named parameter sets for the standard pansharpening and HS+MS fusion scenarios.
//!
//! Full names are `{pan|fuse}-r{r}-s{sigma_g}-p{p}`, e.g. `pan-r4-s0.04-p1`.
//! The sigma and p parts may be dropped: `pan-r2` means `pan-r2-s0.02-p2`,
//! `fuse-r4-p1` means `fuse-r4-s0.05-p1`.

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Single-band guide averaging the first half of the bands.
    Pan,
    /// Four-band guide.
    Fuse,
}

impl Scenario {
    fn prefix(self) -> &'static str {
        match self {
            Scenario::Pan => "pan",
            Scenario::Fuse => "fuse",
        }
    }

    fn default_sigma_g(self) -> f64 {
        match self {
            Scenario::Pan => 0.02,
            Scenario::Fuse => 0.05,
        }
    }

    pub fn guide_bands(self) -> usize {
        match self {
            Scenario::Pan => 1,
            Scenario::Fuse => 4,
        }
    }

    /// Step pair used in the reference experiments; gamma1 also seeds auto steps.
    pub fn steps(self) -> (f64, f64) {
        match self {
            Scenario::Pan => hsstv_core::solver::PANSHARPENING_STEPS,
            Scenario::Fuse => hsstv_core::solver::MS_FUSION_STEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub scenario: Scenario,
    pub ratio: usize,
    pub sigma_v: f64,
    pub sigma_g: f64,
    pub p: u32,
    pub omega: f64,
    pub lambda: f64,
    pub rho: f64,
}

impl Preset {
    pub fn name(&self) -> String {
        format!(
            "{}-r{}-s{}-p{}",
            self.scenario.prefix(),
            self.ratio,
            self.sigma_g,
            self.p
        )
    }
}

// (r, sigma_v, sigma_g, p, omega, lambda); rho is 1 throughout.
type Row = (usize, f64, f64, u32, f64, f64);

const PAN: &[Row] = &[
    (2, 0.1, 0.0, 1, 0.01, 0.07),
    (2, 0.1, 0.02, 1, 0.01, 0.04),
    (2, 0.1, 0.04, 1, 0.01, 0.04),
    (4, 0.1, 0.0, 1, 0.01, 0.05),
    (4, 0.1, 0.02, 1, 0.01, 0.07),
    (4, 0.1, 0.04, 1, 0.01, 0.08),
    (8, 0.1, 0.02, 1, 0.02, 0.05),
    (16, 0.1, 0.02, 1, 0.02, 0.06),
    (2, 0.1, 0.0, 2, 0.01, 0.07),
    (2, 0.1, 0.02, 2, 0.01, 0.04),
    (2, 0.1, 0.04, 2, 0.01, 0.04),
    (4, 0.1, 0.0, 2, 0.01, 0.07),
    (4, 0.1, 0.02, 2, 0.02, 0.04),
    (4, 0.1, 0.04, 2, 0.02, 0.04),
    (8, 0.1, 0.02, 2, 0.02, 0.05),
    (16, 0.1, 0.02, 2, 0.03, 0.1),
];

const FUSE: &[Row] = &[
    (2, 0.2, 0.0, 1, 0.0, 0.07),
    (2, 0.2, 0.05, 1, 0.0, 0.03),
    (2, 0.2, 0.1, 1, 0.0, 0.02),
    (4, 0.2, 0.0, 1, 0.02, 0.1),
    (4, 0.2, 0.05, 1, 0.0, 0.08),
    (4, 0.2, 0.1, 1, 0.0, 0.05),
    (8, 0.1, 0.05, 1, 0.0, 0.08),
    (16, 0.1, 0.05, 1, 0.01, 0.1),
    (2, 0.2, 0.0, 2, 0.02, 0.07),
    (2, 0.2, 0.05, 2, 0.0, 0.03),
    (2, 0.2, 0.1, 2, 0.0, 0.02),
    (4, 0.2, 0.0, 2, 0.02, 0.08),
    (4, 0.2, 0.05, 2, 0.0, 0.07),
    (4, 0.2, 0.1, 2, 0.0, 0.05),
    (8, 0.1, 0.05, 2, 0.0, 0.07),
    (16, 0.1, 0.05, 2, 0.03, 0.09),
];

fn table(scenario: Scenario) -> &'static [Row] {
    match scenario {
        Scenario::Pan => PAN,
        Scenario::Fuse => FUSE,
    }
}

fn to_preset(scenario: Scenario, &(ratio, sigma_v, sigma_g, p, omega, lambda): &Row) -> Preset {
    Preset {
        scenario,
        ratio,
        sigma_v,
        sigma_g,
        p,
        omega,
        lambda,
        rho: 1.0,
    }
}

pub fn all() -> Vec<Preset> {
    [Scenario::Pan, Scenario::Fuse]
        .into_iter()
        .flat_map(|s| table(s).iter().map(move |row| to_preset(s, row)))
        .collect()
}

pub fn lookup(name: &str) -> Result<Preset> {
    let mut parts = name.split('-');
    let scenario = match parts.next() {
        Some("pan") => Scenario::Pan,
        Some("fuse") => Scenario::Fuse,
        _ => bail!("unknown preset {name:?}; expected pan-r<r>[-s<sigma>][-p<p>] or fuse-..."),
    };
    let mut ratio = None;
    let mut sigma_g = scenario.default_sigma_g();
    let mut p = 2;
    for part in parts {
        let (key, value) = part.split_at(1);
        let bad = || format!("malformed preset component {part:?} in {name:?}");
        match key {
            "r" => ratio = Some(value.parse::<usize>().with_context(bad)?),
            "s" => sigma_g = value.parse::<f64>().with_context(bad)?,
            "p" => p = value.parse::<u32>().with_context(bad)?,
            _ => bail!(bad()),
        }
    }
    let Some(ratio) = ratio else {
        bail!("preset {name:?} does not name a ratio (r<r>)");
    };
    table(scenario)
        .iter()
        .find(|row| row.0 == ratio && row.2 == sigma_g && row.3 == p)
        .map(|row| to_preset(scenario, row))
        .with_context(|| {
            let names: Vec<String> = all().iter().map(Preset::name).collect();
            format!("no preset {name:?}; available: {}", names.join(", "))
        })
}
