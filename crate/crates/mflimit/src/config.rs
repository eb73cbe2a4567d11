//! Experiment configuration: a flat `key = value` text file.
//!
//! Blank lines and `#` comments are ignored; every key is optional and
//! unknown or repeated keys are errors. [`KEYS`] lists every key with its
//! default. The config hash is the SHA-256 of [`ExperimentConfig::canonical`],
//! which spells out every resolved value, so two files that differ only in
//! comments, order or omitted defaults hash identically.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mflimit_core::data::{CLaw, WLaw, XLaw};
use mflimit_core::meanfield::{MeanFieldConfig, QuadMode, QuadratureSpec, Refresh};
use mflimit_core::{Activation, DataModel, InitLaw, TrainSchedule};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// `(key, default, meaning)`.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("model", "teacher", "teacher | mnist"),
    ("noise", "0.1", "half-width of the uniform label noise (teacher model)"),
    ("x_law", "cube:1", "input law: cube:HALF_WIDTH | gaussian:SCALE:CUTOFF"),
    ("init_c", "uniform:-1:1", "law of c_0: uniform:LO:HI | laplace:SCALE:CUTOFF"),
    ("init_w", "gaussian:1", "law of w_0: gaussian:SCALE | cube:HALF_WIDTH"),
    ("activation", "tanh", "tanh | logistic | smooth-bump"),
    ("alpha", "1", "learning-rate constant; SGD steps are alpha / N"),
    ("horizon", "0.5", "scaled-time horizon T"),
    ("snapshots", "5", "snapshot intervals: snapshots at 0, T/k, ..., T"),
    ("n_grid", "100,400,1600", "network sizes N"),
    ("replicas", "50", "independent runs per N"),
    ("lln_replicas", "30", "replicas used by the variance-decay table (a prefix)"),
    ("particles", "10000", "mean-field sample paths M"),
    ("dt", "0.0005", "mean-field Euler step"),
    ("record_every", "100", "Euler steps between stored mean-field slices"),
    ("quadrature", "monte-carlo", "monte-carlo | grid"),
    ("quadrature_nodes", "4096", "quadrature nodes K"),
    ("quadrature_refresh", "frozen", "frozen | per-step"),
    ("solver", "self-consistent", "self-consistent | picard"),
    ("picard_tol", "1e-8", "Picard stopping distance"),
    ("picard_max_iters", "50", "Picard iteration cap"),
    ("martingale_grid", "200,800", "network sizes of the martingale table"),
    ("martingale_nodes", "512", "support size of the finite data law for the martingale table"),
    ("martingale_replicas", "30", "replicas per N of the martingale table"),
    ("bins", "40", "histogram bins"),
    ("mnist_images", "", "IDX3 image file (model = mnist); relative to the config file"),
    ("mnist_labels", "", "IDX1 label file (model = mnist); relative to the config file"),
    ("digits", "0,1", "digit pair for model = mnist; the first maps to y = -1"),
    ("seed", "1", "master seed; --seed overrides"),
    ("workers", "1", "worker threads"),
];

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Teacher,
    Mnist { images: PathBuf, labels: PathBuf, digits: (u8, u8) },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    SelfConsistent,
    Picard { tol: f64, max_iters: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub noise: f64,
    pub x_law: XLaw,
    pub c_law: CLaw,
    pub w_law: WLaw,
    pub activation: Activation,
    pub alpha: f64,
    pub horizon: f64,
    pub snapshots: usize,
    pub n_grid: Vec<usize>,
    pub replicas: usize,
    pub lln_replicas: usize,
    pub particles: usize,
    pub dt: f64,
    pub record_every: usize,
    pub quadrature: QuadratureSpec,
    pub solver: Solver,
    pub martingale_grid: Vec<usize>,
    pub martingale_nodes: usize,
    pub martingale_replicas: usize,
    pub bins: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_map(BTreeMap::new(), None).expect("defaults are valid")
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, Some(path))
    }

    /// Parses config text; relative data paths resolve against the
    /// directory of `origin` when given.
    pub fn parse(text: &str, origin: Option<&Path>) -> Result<Self> {
        let at = |line: usize, message: String| CliError::ConfigLine { path: origin.map(Path::to_path_buf).unwrap_or_else(|| "<config>".into()), line, message };
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(at(i + 1, format!("expected `key = value`, found `{body}`")));
            };
            let (k, v) = (k.trim(), v.trim());
            let Some(&(key, _, _)) = KEYS.iter().find(|(name, _, _)| *name == k) else {
                return Err(at(i + 1, format!("unknown key `{k}`")));
            };
            if map.insert(key, v.to_string()).is_some() {
                return Err(at(i + 1, format!("key `{k}` given twice")));
            }
        }
        Self::from_map(map, origin.and_then(Path::parent))
    }

    fn from_map(mut map: BTreeMap<&'static str, String>, base: Option<&Path>) -> Result<Self> {
        for (k, d, _) in KEYS {
            map.entry(k).or_insert_with(|| d.to_string());
        }
        let get = |k: &str| map[k].as_str();
        let model = match get("model") {
            "teacher" => ModelSpec::Teacher,
            "mnist" => {
                let path = |k: &str| -> Result<PathBuf> {
                    let v = get(k);
                    if v.is_empty() {
                        return Err(bad(k, "required when model = mnist"));
                    }
                    let p = PathBuf::from(v);
                    Ok(match base {
                        Some(b) if p.is_relative() => b.join(p),
                        _ => p,
                    })
                };
                let digits = list::<u8>("digits", get("digits"))?;
                let [a, b] = digits[..] else { return Err(bad("digits", "expected two digits")) };
                ModelSpec::Mnist { images: path("mnist_images")?, labels: path("mnist_labels")?, digits: (a, b) }
            }
            other => return Err(bad("model", format!("unknown model `{other}`"))),
        };
        let quadrature = QuadratureSpec {
            mode: match get("quadrature") {
                "monte-carlo" => QuadMode::MonteCarlo,
                "grid" => QuadMode::FixedGrid,
                other => return Err(bad("quadrature", format!("unknown mode `{other}`"))),
            },
            nodes: num("quadrature_nodes", get("quadrature_nodes"))?,
            refresh: match get("quadrature_refresh") {
                "frozen" => Refresh::Frozen,
                "per-step" => Refresh::PerStep,
                other => return Err(bad("quadrature_refresh", format!("unknown refresh `{other}`"))),
            },
        };
        let solver = match get("solver") {
            "self-consistent" => Solver::SelfConsistent,
            "picard" => Solver::Picard { tol: num("picard_tol", get("picard_tol"))?, max_iters: num("picard_max_iters", get("picard_max_iters"))? },
            other => return Err(bad("solver", format!("unknown solver `{other}`"))),
        };
        let cfg = Self {
            model,
            noise: num("noise", get("noise"))?,
            x_law: x_law(get("x_law"))?,
            c_law: c_law(get("init_c"))?,
            w_law: w_law(get("init_w"))?,
            activation: get("activation").parse().map_err(|e: mflimit_core::Error| bad("activation", e.to_string()))?,
            alpha: num("alpha", get("alpha"))?,
            horizon: num("horizon", get("horizon"))?,
            snapshots: num("snapshots", get("snapshots"))?,
            n_grid: list("n_grid", get("n_grid"))?,
            replicas: num("replicas", get("replicas"))?,
            lln_replicas: num("lln_replicas", get("lln_replicas"))?,
            particles: num("particles", get("particles"))?,
            dt: num("dt", get("dt"))?,
            record_every: num("record_every", get("record_every"))?,
            quadrature,
            solver,
            martingale_grid: list("martingale_grid", get("martingale_grid"))?,
            martingale_nodes: num("martingale_nodes", get("martingale_nodes"))?,
            martingale_replicas: num("martingale_replicas", get("martingale_replicas"))?,
            bins: num("bins", get("bins"))?,
            seed: num("seed", get("seed"))?,
            workers: num("workers", get("workers"))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replaces the seed, as `--seed` does.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Overrides keys as if they had appeared in the file.
    pub fn with(&self, text: &str) -> Result<Self> {
        let given: Vec<&str> = text.lines().filter_map(|l| l.split('#').next()?.split_once('=').map(|(k, _)| k.trim())).collect();
        let kept: String = self.canonical().lines().filter(|l| !given.iter().any(|k| l.split_once('=').is_some_and(|(key, _)| key == *k))).map(|l| format!("{l}\n")).collect();
        Self::parse(&(kept + text), None)
    }

    fn validate(&self) -> Result<()> {
        let positive = |k: &str, v: f64| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(bad(k, "must be positive and finite")) };
        positive("horizon", self.horizon)?;
        positive("dt", self.dt)?;
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(bad("alpha", "must be finite and >= 0"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(bad("noise", "must be finite and >= 0"));
        }
        for (k, v) in [("snapshots", self.snapshots), ("replicas", self.replicas), ("particles", self.particles), ("record_every", self.record_every), ("workers", self.workers), ("martingale_nodes", self.martingale_nodes), ("martingale_replicas", self.martingale_replicas), ("quadrature_nodes", self.quadrature.nodes)] {
            if v == 0 {
                return Err(bad(k, "must be at least 1"));
            }
        }
        if self.lln_replicas < 2 || self.lln_replicas > self.replicas {
            return Err(bad("lln_replicas", "must lie in [2, replicas]"));
        }
        if self.bins < 2 {
            return Err(bad("bins", "must be at least 2"));
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(bad("n_grid", "needs positive sizes"));
        }
        if self.martingale_grid.len() < 2 || self.martingale_grid.contains(&0) {
            return Err(bad("martingale_grid", "needs at least two positive sizes"));
        }
        if let Solver::Picard { tol, max_iters } = self.solver {
            if !(tol > 0.0) || max_iters == 0 {
                return Err(bad("picard_tol", "Picard needs tol > 0 and picard_max_iters >= 1"));
            }
        }
        if let ModelSpec::Mnist { digits: (a, b), .. } = self.model {
            if a == b || a > 9 || b > 9 {
                return Err(bad("digits", "need two different digits in 0..=9"));
            }
        }
        self.meanfield().validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    /// Every key with its resolved value, one `key=value` line each, in
    /// [`KEYS`] order. Parsing it gives back the same config.
    pub fn canonical(&self) -> String {
        let join = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        let (model, images, labels, digits) = match &self.model {
            ModelSpec::Teacher => ("teacher", String::new(), String::new(), "0,1".to_string()),
            ModelSpec::Mnist { images, labels, digits } => ("mnist", images.display().to_string(), labels.display().to_string(), format!("{},{}", digits.0, digits.1)),
        };
        let (tol, iters) = match self.solver {
            Solver::Picard { tol, max_iters } => (tol, max_iters),
            Solver::SelfConsistent => (1e-8, 50),
        };
        let values: [(&str, String); 30] = [
            ("model", model.into()),
            ("noise", self.noise.to_string()),
            ("x_law", match self.x_law {
                XLaw::UniformCube { half_width } => format!("cube:{half_width}"),
                XLaw::TruncatedGaussian { scale, cutoff } => format!("gaussian:{scale}:{cutoff}"),
            }),
            ("init_c", match self.c_law {
                CLaw::UniformInterval { lo, hi } => format!("uniform:{lo}:{hi}"),
                CLaw::TruncatedExponentialTail { scale, cutoff } => format!("laplace:{scale}:{cutoff}"),
            }),
            ("init_w", match self.w_law {
                WLaw::StandardGaussian { scale } => format!("gaussian:{scale}"),
                WLaw::UniformCube { half_width } => format!("cube:{half_width}"),
            }),
            ("activation", self.activation.name().into()),
            ("alpha", self.alpha.to_string()),
            ("horizon", self.horizon.to_string()),
            ("snapshots", self.snapshots.to_string()),
            ("n_grid", join(&self.n_grid)),
            ("replicas", self.replicas.to_string()),
            ("lln_replicas", self.lln_replicas.to_string()),
            ("particles", self.particles.to_string()),
            ("dt", self.dt.to_string()),
            ("record_every", self.record_every.to_string()),
            ("quadrature", match self.quadrature.mode {
                QuadMode::MonteCarlo => "monte-carlo".into(),
                QuadMode::FixedGrid => "grid".into(),
            }),
            ("quadrature_nodes", self.quadrature.nodes.to_string()),
            ("quadrature_refresh", match self.quadrature.refresh {
                Refresh::Frozen => "frozen".into(),
                Refresh::PerStep => "per-step".into(),
            }),
            ("solver", match self.solver {
                Solver::SelfConsistent => "self-consistent".into(),
                Solver::Picard { .. } => "picard".into(),
            }),
            ("picard_tol", tol.to_string()),
            ("picard_max_iters", iters.to_string()),
            ("martingale_grid", join(&self.martingale_grid)),
            ("martingale_nodes", self.martingale_nodes.to_string()),
            ("martingale_replicas", self.martingale_replicas.to_string()),
            ("bins", self.bins.to_string()),
            ("mnist_images", images),
            ("mnist_labels", labels),
            ("digits", digits),
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
        ];
        let mut out = String::new();
        for ((k, v), (key, _, _)) in values.iter().zip(KEYS) {
            debug_assert_eq!(k, key);
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// Hex SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn schedule(&self) -> TrainSchedule {
        TrainSchedule::uniform(self.horizon, self.snapshots)
    }

    pub fn init_law(&self, dim: usize) -> InitLaw {
        InitLaw { c_law: self.c_law, w_law: self.w_law, dim }
    }

    pub fn meanfield(&self) -> MeanFieldConfig {
        MeanFieldConfig {
            dt: self.dt,
            record_every: self.record_every,
            quadrature: self.quadrature,
            ..MeanFieldConfig::new(self.activation, self.alpha, self.horizon, self.particles)
        }
    }

    /// The data law; reads the IDX files for `model = mnist`.
    pub fn data_model(&self) -> Result<DataModel> {
        match &self.model {
            ModelSpec::Teacher => Ok(DataModel { x_law: self.x_law, ..DataModel::default_teacher().with_noise(self.noise) }),
            ModelSpec::Mnist { images, labels, digits } => crate::idx::load_mnist_idx(images, labels, *digits),
        }
    }
}

fn bad(key: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {message}"))
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(key, format!("cannot parse `{v}`")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| num(key, s.trim())).collect()
}

fn fields<'a>(key: &str, v: &'a str, kind: &str, count: usize) -> Result<Vec<f64>> {
    let mut parts = v.split(':');
    if parts.next() != Some(kind) {
        return Err(bad(key, format!("cannot parse `{v}`")));
    }
    let xs: Vec<f64> = parts.map(|p| num(key, p)).collect::<Result<_>>()?;
    if xs.len() != count {
        return Err(bad(key, format!("`{kind}` takes {count} parameter(s)")));
    }
    Ok(xs)
}

fn x_law(v: &str) -> Result<XLaw> {
    let k = "x_law";
    match v.split(':').next() {
        Some("cube") => Ok(XLaw::UniformCube { half_width: fields(k, v, "cube", 1)?[0] }),
        Some("gaussian") => {
            let p = fields(k, v, "gaussian", 2)?;
            Ok(XLaw::TruncatedGaussian { scale: p[0], cutoff: p[1] })
        }
        _ => Err(bad(k, format!("unknown law `{v}`"))),
    }
}

fn c_law(v: &str) -> Result<CLaw> {
    let k = "init_c";
    match v.split(':').next() {
        Some("uniform") => {
            let p = fields(k, v, "uniform", 2)?;
            Ok(CLaw::UniformInterval { lo: p[0], hi: p[1] })
        }
        Some("laplace") => {
            let p = fields(k, v, "laplace", 2)?;
            Ok(CLaw::TruncatedExponentialTail { scale: p[0], cutoff: p[1] })
        }
        _ => Err(bad(k, format!("unknown law `{v}`"))),
    }
}

fn w_law(v: &str) -> Result<WLaw> {
    let k = "init_w";
    match v.split(':').next() {
        Some("gaussian") => Ok(WLaw::StandardGaussian { scale: fields(k, v, "gaussian", 1)?[0] }),
        Some("cube") => Ok(WLaw::UniformCube { half_width: fields(k, v, "cube", 1)?[0] }),
        _ => Err(bad(k, format!("unknown law `{v}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_default_study() {
        let c = ExperimentConfig::default();
        assert_eq!(c.model, ModelSpec::Teacher);
        assert_eq!(c.n_grid, vec![100, 400, 1600]);
        assert_eq!(c.activation, Activation::Tanh);
        assert_eq!(c.horizon, 0.5);
        assert_eq!(c.meanfield().steps(), 1000);
    }

    #[test]
    fn comments_order_and_defaults_do_not_change_the_hash() {
        let a = ExperimentConfig::parse("alpha = 1\n# note\nn_grid = 100,400,1600\n", None).unwrap();
        let b = ExperimentConfig::parse("n_grid=100, 400, 1600   # grid\nalpha = 1.0\n", None).unwrap();
        assert_eq!(a.hash(), ExperimentConfig::default().hash());
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::parse("alpha = 0.5\n", None).unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_ne!(a.hash(), a.clone().with_seed(2).hash());
    }

    #[test]
    fn canonical_text_round_trips() {
        let c = ExperimentConfig::parse("solver = picard\npicard_tol = 1e-6\ninit_c = laplace:0.5:3\nx_law = gaussian:1:3\n", None).unwrap();
        assert_eq!(ExperimentConfig::parse(&c.canonical(), None).unwrap(), c);
        let d = c.with("alpha = 0\n").unwrap();
        assert_eq!(d.alpha, 0.0);
        assert_eq!(d.solver, c.solver);
    }

    #[test]
    fn unknown_and_repeated_keys_are_errors() {
        let e = ExperimentConfig::parse("alpah = 1\n", None).unwrap_err();
        assert!(matches!(e, CliError::ConfigLine { line: 1, .. }), "{e}");
        assert!(e.to_string().contains("alpah"));
        assert!(ExperimentConfig::parse("alpha = 1\nalpha = 2\n", None).is_err());
        assert!(ExperimentConfig::parse("alpha\n", None).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        for text in ["alpha = -1", "activation = relu", "dt = 0.3", "n_grid = 100,x", "init_w = gaussian", "lln_replicas = 60", "model = mnist", "solver = picard\npicard_tol = 0"] {
            let e = ExperimentConfig::parse(text, None).unwrap_err();
            assert_eq!(e.exit_code(), crate::error::EXIT_CONFIG, "{text}: {e}");
        }
    }

    #[test]
    fn mnist_paths_resolve_against_the_config_directory() {
        let c = ExperimentConfig::parse("model = mnist\nmnist_images = img\nmnist_labels = /abs/lab\ndigits = 3,8\n", Some(Path::new("/cfg/dir/run.cfg"))).unwrap();
        assert_eq!(c.model, ModelSpec::Mnist { images: "/cfg/dir/img".into(), labels: "/abs/lab".into(), digits: (3, 8) });
    }
}
