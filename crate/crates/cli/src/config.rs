use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use qhd_core::continuation::validate_ladder;
use qhd_core::weakform::MollifierSpec;
use qhd_core::{SolverConfig, TorusGrid, DEFAULT_LADDER};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Run,
    Sweep,
    Verify,
    Identities,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Initial {
    /// Band-limited field with random phases.
    Random,
    /// `A exp(i 2 pi x_1)`.
    PlaneWave,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basket {
    /// All six standard test functions.
    Default,
    /// Only the four scalar ones.
    Scalar,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    _ => Err(format!("expected one of {}", [$($name),+].join(", "))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name,)+ })
            }
        }
    };
}

keyword_enum!(Mode { Run => "run", Sweep => "sweep", Verify => "verify", Identities => "identities" });
keyword_enum!(Initial { Random => "random", PlaneWave => "plane_wave" });
keyword_enum!(Basket { Default => "default", Scalar => "scalar" });

/// Every configuration key with its default and help text, in serialization order.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("mode", "run", "run | sweep | verify | identities"),
    ("d", "2", "spatial dimension (1, 2 or 3)"),
    ("n", "32", "grid points per axis (even, >= 4)"),
    ("dt", "1e-3", "time step"),
    ("t_final", "1", "final time"),
    ("delta", "0.05", "regularization for run, verify and identities"),
    ("delta_ladder", "0.2,0.1,0.05,0.025,0.0125", "strictly decreasing ladder for sweep"),
    ("hbar", "1", "Planck constant"),
    ("initial", "random", "initial data: random | plane_wave"),
    ("seed", "42", "seed for random initial data and sampled suites"),
    ("max_mode", "2", "largest |m_j| of random initial data (3 max_mode < n)"),
    ("decay", "2", "spectral decay exponent of random initial data"),
    ("amplitude", "1", "scale factor applied to the initial data"),
    ("snapshot_stride", "10", "steps between snapshots (must divide the step count)"),
    ("dealias", "false", "apply 2/3-rule truncation after each step"),
    ("eps_vac", "auto", "vacuum threshold for hydrodynamic outputs (auto = 1e-12 max rho)"),
    ("epsilon", "0.2", "mollifier scale for verify"),
    ("basket", "default", "test functions for verify: default | scalar"),
    ("samples", "1000000", "sample pairs per sampled identity suite"),
    ("output", "qhd_out", "output directory"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub d: usize,
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub delta: f64,
    pub delta_ladder: Vec<f64>,
    pub hbar: f64,
    pub initial: Initial,
    pub seed: u64,
    pub max_mode: usize,
    pub decay: f64,
    pub amplitude: f64,
    pub snapshot_stride: usize,
    pub dealias: bool,
    pub eps_vac: Option<f64>,
    pub epsilon: f64,
    pub basket: Basket,
    pub samples: usize,
    pub output: PathBuf,
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

impl Default for RunConfig {
    fn default() -> Self {
        let raw: BTreeMap<String, String> =
            KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect();
        Self::from_map(&raw).expect("defaults are valid")
    }
}

impl RunConfig {
    /// Canonical `key = value` text; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let eps_vac = self.eps_vac.map_or("auto".to_string(), |v| format!("{v:?}"));
        let values = [
            self.mode.to_string(),
            self.d.to_string(),
            self.n.to_string(),
            format!("{:?}", self.dt),
            format!("{:?}", self.t_final),
            format!("{:?}", self.delta),
            fmt_list(&self.delta_ladder),
            format!("{:?}", self.hbar),
            self.initial.to_string(),
            self.seed.to_string(),
            self.max_mode.to_string(),
            format!("{:?}", self.decay),
            format!("{:?}", self.amplitude),
            self.snapshot_stride.to_string(),
            self.dealias.to_string(),
            eps_vac,
            format!("{:?}", self.epsilon),
            self.basket.to_string(),
            self.samples.to_string(),
            self.output.display().to_string(),
        ];
        KEYS.iter()
            .zip(values)
            .map(|((k, _, _), v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig::new(self.dt, self.t_final, self.snapshot_stride)
            .expect("validated")
            .with_dealias(self.dealias)
    }

    pub fn grid(&self) -> TorusGrid {
        TorusGrid::new(self.d, self.n).expect("validated")
    }

    /// Parses and validates a complete key map, reporting every problem at once.
    pub fn from_map(raw: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut errors = Vec::new();
        for key in raw.keys() {
            if !KEYS.iter().any(|(k, _, _)| k == key) {
                errors.push(format!("unknown key `{key}`"));
            }
        }
        let get = |key: &str| -> &str {
            raw.get(key)
                .map(String::as_str)
                .unwrap_or_else(|| KEYS.iter().find(|(k, _, _)| *k == key).unwrap().1)
        };
        fn parse<T: FromStr>(errors: &mut Vec<String>, key: &str, v: &str) -> Option<T>
        where
            T::Err: fmt::Display,
        {
            match v.trim().parse::<T>() {
                Ok(x) => Some(x),
                Err(e) => {
                    errors.push(format!("{key} = `{v}`: {e}"));
                    None
                }
            }
        }
        let check = |ok: bool, msg: String, errors: &mut Vec<String>| {
            if !ok {
                errors.push(msg);
            }
        };

        let mode = parse::<Mode>(&mut errors, "mode", get("mode"));
        let d = parse::<usize>(&mut errors, "d", get("d"));
        let n = parse::<usize>(&mut errors, "n", get("n"));
        let dt = parse::<f64>(&mut errors, "dt", get("dt"));
        let t_final = parse::<f64>(&mut errors, "t_final", get("t_final"));
        let delta = parse::<f64>(&mut errors, "delta", get("delta"));
        let ladder: Option<Vec<f64>> = get("delta_ladder")
            .split(',')
            .map(|s| parse::<f64>(&mut errors, "delta_ladder", s))
            .collect();
        let hbar = parse::<f64>(&mut errors, "hbar", get("hbar"));
        let initial = parse::<Initial>(&mut errors, "initial", get("initial"));
        let seed = parse::<u64>(&mut errors, "seed", get("seed"));
        let max_mode = parse::<usize>(&mut errors, "max_mode", get("max_mode"));
        let decay = parse::<f64>(&mut errors, "decay", get("decay"));
        let amplitude = parse::<f64>(&mut errors, "amplitude", get("amplitude"));
        let stride = parse::<usize>(&mut errors, "snapshot_stride", get("snapshot_stride"));
        let dealias = parse::<bool>(&mut errors, "dealias", get("dealias"));
        let eps_vac = match get("eps_vac").trim() {
            "auto" => Some(None),
            v => parse::<f64>(&mut errors, "eps_vac", v).map(Some),
        };
        let epsilon = parse::<f64>(&mut errors, "epsilon", get("epsilon"));
        let basket = parse::<Basket>(&mut errors, "basket", get("basket"));
        let samples = parse::<usize>(&mut errors, "samples", get("samples"));
        let output = get("output").trim().to_string();

        if let (Some(d), Some(n)) = (d, n) {
            if let Err(e) = TorusGrid::new(d, n) {
                errors.push(format!("d = {d}, n = {n}: {e}"));
            }
            if let Some(m) = max_mode {
                check(3 * m < n, format!("max_mode = {m}: must satisfy 3 max_mode < n = {n}"), &mut errors);
            }
        }
        if let (Some(dt), Some(t), Some(s)) = (dt, t_final, stride) {
            match SolverConfig::new(dt, t, s) {
                Err(e) => errors.push(format!("dt/t_final/snapshot_stride: {e}")),
                Ok(c) => check(
                    c.n_steps() % s == 0,
                    format!("snapshot_stride = {s} must divide the step count {}", c.n_steps()),
                    &mut errors,
                ),
            }
        }
        if let Some(v) = delta {
            check(v.is_finite() && v > 0.0, format!("delta = {v}: must be > 0"), &mut errors);
        }
        if let Some(l) = &ladder {
            if let Err(e) = validate_ladder(l) {
                errors.push(format!("delta_ladder: {e}"));
            }
        }
        if let Some(v) = hbar {
            check(v.is_finite() && v > 0.0, format!("hbar = {v}: must be > 0"), &mut errors);
        }
        if let Some(v) = decay {
            check(v.is_finite(), format!("decay = {v}: must be finite"), &mut errors);
        }
        if let Some(v) = amplitude {
            check(v.is_finite() && v > 0.0, format!("amplitude = {v}: must be > 0"), &mut errors);
        }
        if let Some(Some(v)) = eps_vac {
            check(v.is_finite() && v > 0.0, format!("eps_vac = {v}: must be > 0"), &mut errors);
        }
        if let Some(v) = epsilon {
            if let Err(e) = MollifierSpec::new(v) {
                errors.push(format!("epsilon: {e}"));
            }
        }
        if let Some(v) = samples {
            check(v > 0, "samples must be positive".into(), &mut errors);
        }
        check(!output.is_empty(), "output must not be empty".into(), &mut errors);

        if !errors.is_empty() {
            return Err(CliError::Config(errors));
        }
        Ok(Self {
            mode: mode.unwrap(),
            d: d.unwrap(),
            n: n.unwrap(),
            dt: dt.unwrap(),
            t_final: t_final.unwrap(),
            delta: delta.unwrap(),
            delta_ladder: ladder.unwrap(),
            hbar: hbar.unwrap(),
            initial: initial.unwrap(),
            seed: seed.unwrap(),
            max_mode: max_mode.unwrap(),
            decay: decay.unwrap(),
            amplitude: amplitude.unwrap(),
            snapshot_stride: stride.unwrap(),
            dealias: dealias.unwrap(),
            eps_vac: eps_vac.unwrap(),
            epsilon: epsilon.unwrap(),
            basket: basket.unwrap(),
            samples: samples.unwrap(),
            output: PathBuf::from(output),
        })
    }
}

/// Parses flat `key = value` text. `#` starts a comment.
pub fn parse_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                    errors.push(format!("line {}: duplicate key `{}`", i + 1, k.trim()));
                }
            }
            _ => errors.push(format!("line {}: expected `key = value`, got `{line}`", i + 1)),
        }
    }
    if errors.is_empty() {
        Ok(map)
    } else {
        Err(CliError::Config(errors))
    }
}

impl FromStr for RunConfig {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        Self::from_map(&parse_text(text)?)
    }
}

/// The default ladder as config text.
pub fn default_ladder_text() -> String {
    fmt_list(&DEFAULT_LADDER)
}
