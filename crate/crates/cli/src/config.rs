//! Flat INI configuration: `[section]` headers, `key = value` lines and `#`
//! comments. Keys are addressed as `section.key`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ohx_core::analysis::ENTROPY_KAPPA;
use ohx_core::flux::DEFAULT_STATE_BOX_M;
use ohx_core::{FluxFamily, FluxSpec, InitialData, Integrator, NumericalFluxKind, SolverConfig};
use thiserror::Error;

use crate::tables::read_columns;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {message}")]
    Syntax {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: `{key}`: {message}")]
    Value {
        path: String,
        line: usize,
        key: String,
        message: String,
    },

    #[error("{path}: missing required key `{key}`{hint}")]
    Missing {
        path: String,
        key: String,
        hint: String,
    },

    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
}

/// Every key the driver understands; anything else is a typo.
const KNOWN_KEYS: &[&str] = &[
    "flux.family",
    "flux.a",
    "flux.s",
    "flux.M",
    "flux.table",
    "init.profile",
    "init.mu",
    "init.w",
    "init.value",
    "init.seed",
    "init.table",
    "init.zero_mean",
    "init.mollify",
    "grid.x_max",
    "grid.n",
    "grid.override",
    "solver.epsilon",
    "solver.flux",
    "solver.integrator",
    "solver.cfl",
    "solver.t_end",
    "solver.include_source",
    "solver.monitor_window",
    "output.dir",
    "output.dump_primitive",
    "output.stride",
    "sweep.eps_list",
    "converge.n_list",
    "converge.min_order",
    "converge.scale_cfl",
    "stability.R",
    "stability.seed_v",
    "stability.pairs",
    "stability.amplitude",
    "entropy.c_quantiles",
    "entropy.n_testfns",
    "entropy.seed",
    "entropy.kappa",
    "certify.import",
    "validate.x_lo",
    "validate.x_hi",
    "validate.n_x",
    "validate.tol",
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed key/value pairs with their line numbers.
#[derive(Debug, Clone)]
pub struct Ini {
    path: String,
    entries: BTreeMap<String, Entry>,
}

impl Ini {
    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        let syntax = |line: usize, message: String| ConfigError::Syntax {
            path: path.to_string(),
            line,
            message,
        };
        let mut section: Option<String> = None;
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| syntax(line, "unterminated section header".into()))?
                    .trim();
                if name.is_empty()
                    || !name
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
                {
                    return Err(syntax(line, format!("bad section name `{name}`")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                syntax(line, format!("expected `key = value`, found `{content}`"))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(syntax(line, "empty key".into()));
            }
            let sec = section
                .as_ref()
                .ok_or_else(|| syntax(line, format!("key `{key}` appears before any [section]")))?;
            let full = format!("{sec}.{key}");
            if !KNOWN_KEYS.contains(&full.as_str()) {
                return Err(syntax(line, format!("unknown key `{full}`")));
            }
            if let Some(prev) = entries.get(&full) {
                let prev: &Entry = prev;
                return Err(syntax(
                    line,
                    format!("duplicate key `{full}` (first set on line {})", prev.line),
                ));
            }
            entries.insert(
                full,
                Entry {
                    value: value.trim().to_string(),
                    line,
                },
            );
        }
        Ok(Self {
            path: path.to_string(),
            entries,
        })
    }

    /// Sorted `key → value` pairs, for echoing into manifests.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.entries
            .iter()
            .map(|(k, e)| (k.clone(), e.value.clone()))
            .collect()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn value_error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Value {
            path: self.path.clone(),
            line: self.entries.get(key).map_or(0, |e| e.line),
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn missing(&self, key: &str, hint: &str) -> ConfigError {
        ConfigError::Missing {
            path: self.path.clone(),
            key: key.to_string(),
            hint: if hint.is_empty() {
                String::new()
            } else {
                format!(" ({hint})")
            },
        }
    }

    pub fn string(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn parse_with<T>(
        &self,
        key: &str,
        what: &str,
        f: impl Fn(&str) -> Option<T>,
    ) -> Result<Option<T>, ConfigError> {
        match self.string(key) {
            None => Ok(None),
            Some(v) => f(v)
                .map(Some)
                .ok_or_else(|| self.value_error(key, format!("expected {what}, found `{v}`"))),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parse_with(key, "a finite decimal number", parse_f64)
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.parse_with(key, "a nonnegative integer", |v| v.parse().ok())
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.parse_with(key, "an unsigned 64-bit integer", |v| v.parse().ok())
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.parse_with(key, "`true` or `false`", |v| match v {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        })
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.parse_with(key, "a comma-separated list of numbers", |v| {
            v.split(',').map(|s| parse_f64(s.trim())).collect()
        })
    }

    pub fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>, ConfigError> {
        self.parse_with(key, "a comma-separated list of integers", |v| {
            v.split(',').map(|s| s.trim().parse().ok()).collect()
        })
    }

    fn require<T>(&self, v: Option<T>, key: &str) -> Result<T, ConfigError> {
        v.ok_or_else(|| self.missing(key, ""))
    }

    fn check(&self, ok: bool, key: &str, message: &str) -> Result<(), ConfigError> {
        if ok {
            Ok(())
        } else {
            Err(self.value_error(key, message))
        }
    }
}

fn parse_f64(v: &str) -> Option<f64> {
    v.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Which flux the run uses. `zero` is the f ≡ 0 fixture used by the
/// series-solution oracles; it is not one of the library's flux families.
#[derive(Debug, Clone, PartialEq)]
pub enum FluxChoice {
    Family(FluxSpec),
    Zero,
}

#[derive(Debug, Clone)]
pub struct InitConfig {
    pub data: InitialData,
    pub zero_mean: bool,
    pub mollify: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub x_max: f64,
    pub n: usize,
    pub override_rule: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub dump_primitive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeConfig {
    pub n_list: Option<Vec<usize>>,
    pub min_order: f64,
    /// Refine the CFL number with the grid (`cfl·n₀/n`) so that the time
    /// error shrinks with `dx` when the source cap fixes the step.
    pub scale_cfl: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConfig {
    pub r: Option<f64>,
    pub seed_v: Option<u64>,
    pub pairs: usize,
    /// Partner perturbation size relative to `‖u₀‖_∞`.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyConfig {
    pub c_quantiles: usize,
    pub n_testfns: usize,
    pub seed: Option<u64>,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateConfig {
    pub x_lo: f64,
    pub x_hi: Option<f64>,
    pub n_x: usize,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub ini: Ini,
    pub flux: FluxChoice,
    /// Absent for commands that only look at the flux.
    pub init: Option<InitConfig>,
    pub grid: Option<GridConfig>,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub sweep: Option<Vec<f64>>,
    pub converge: ConvergeConfig,
    pub stability: StabilityConfig,
    pub entropy: EntropyConfig,
    pub import: Option<PathBuf>,
    pub validate: ValidateConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// Parses `text`; relative table paths resolve against `base`.
    pub fn parse(text: &str, label: &str, base: &Path) -> Result<Self, ConfigError> {
        let ini = Ini::parse(text, label)?;
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let read_table = |key: &str, columns: usize| -> Result<Vec<Vec<f64>>, ConfigError> {
            let p = resolve(ini.string(key).unwrap_or_default());
            read_columns(&p, columns).map_err(|e| ini.value_error(key, e))
        };

        let flux = {
            let family = ini
                .string("flux.family")
                .ok_or_else(|| ini.missing("flux.family", ""))?;
            if family == "zero" {
                FluxChoice::Zero
            } else {
                let table = if family == "custom-table" {
                    if !ini.contains("flux.table") {
                        return Err(ini.missing("flux.table", "custom-table needs an `x,w` table"));
                    }
                    let cols = read_table("flux.table", 2)?;
                    Some((cols[0].clone(), cols[1].clone()))
                } else {
                    None
                };
                let fam = FluxFamily::parse(family, ini.f64("flux.a")?, ini.f64("flux.s")?, table)
                    .map_err(|e| ini.value_error("flux.family", e.to_string()))?;
                let m = ini.f64("flux.M")?.unwrap_or(DEFAULT_STATE_BOX_M);
                ini.check(m > 0.0, "flux.M", "must be positive")?;
                FluxChoice::Family(FluxSpec::new(fam).with_state_box(m))
            }
        };

        let init = if let Some(profile) = ini.string("init.profile") {
            let mu = ini.f64("init.mu")?;
            let w = ini.f64("init.w")?;
            let data = match profile {
                "zero" => InitialData::Zero,
                "constant" => {
                    InitialData::Constant(ini.require(ini.f64("init.value")?, "init.value")?)
                }
                "gaussian-dipole" => InitialData::GaussianDipole {
                    mu: mu.unwrap_or(5.0),
                    w: w.unwrap_or(1.0),
                },
                "box-dipole" => InitialData::BoxDipole {
                    mu: mu.unwrap_or(2.0),
                    w: w.unwrap_or(1.0),
                },
                "random" => InitialData::RandomZeroMean {
                    seed: ini.u64("init.seed")?.ok_or_else(|| {
                        ini.missing("init.seed", "random profiles need an explicit seed")
                    })?,
                },
                "table" => {
                    if !ini.contains("init.table") {
                        return Err(ini.missing("init.table", "table profiles need an `x,u` table"));
                    }
                    let cols = read_table("init.table", 2)?;
                    InitialData::table(cols[0].clone(), cols[1].clone())
                        .map_err(|e| ini.value_error("init.table", e.to_string()))?
                }
                other => {
                    return Err(
                        ini.value_error("init.profile", format!("unknown profile `{other}`"))
                    )
                }
            };
            if let Some(w) = w {
                ini.check(w > 0.0, "init.w", "must be positive")?;
            }
            let mollify = ini.f64("init.mollify")?;
            if let Some(d) = mollify {
                ini.check(d > 0.0, "init.mollify", "must be positive")?;
            }
            Some(InitConfig {
                data,
                zero_mean: ini.bool("init.zero_mean")?.unwrap_or(true),
                mollify,
            })
        } else {
            None
        };

        let grid = if ini.contains("grid.x_max") || ini.contains("grid.n") {
            let g = GridConfig {
                x_max: ini.require(ini.f64("grid.x_max")?, "grid.x_max")?,
                n: ini.require(ini.usize("grid.n")?, "grid.n")?,
                override_rule: ini.bool("grid.override")?.unwrap_or(false),
            };
            ini.check(g.x_max > 0.0, "grid.x_max", "must be positive")?;
            ini.check(g.n >= 4, "grid.n", "need at least 4 cells")?;
            Some(g)
        } else {
            None
        };

        let solver = {
            let d = SolverConfig::default();
            let numerical_flux = match ini.string("solver.flux") {
                None => d.numerical_flux,
                Some(v) => v
                    .parse::<NumericalFluxKind>()
                    .map_err(|e| ini.value_error("solver.flux", e.to_string()))?,
            };
            let integrator = match ini.string("solver.integrator") {
                None => d.integrator,
                Some(v) => v
                    .parse::<Integrator>()
                    .map_err(|e| ini.value_error("solver.integrator", e.to_string()))?,
            };
            let monitor_window = match ini.f64_list("solver.monitor_window")? {
                None => None,
                Some(v) if v.len() == 2 => Some((v[0], v[1])),
                Some(_) => {
                    return Err(ini.value_error("solver.monitor_window", "expected `lo, hi`"))
                }
            };
            let s = SolverConfig {
                epsilon: ini.f64("solver.epsilon")?.unwrap_or(d.epsilon),
                numerical_flux,
                integrator,
                cfl: ini.f64("solver.cfl")?.unwrap_or(d.cfl),
                t_end: ini.f64("solver.t_end")?.unwrap_or(d.t_end),
                output_stride: ini.usize("output.stride")?.unwrap_or(d.output_stride),
                include_source: ini
                    .bool("solver.include_source")?
                    .unwrap_or(d.include_source),
                monitor_window,
            };
            ini.check(
                s.cfl > 0.0 && s.cfl <= 1.0,
                "solver.cfl",
                "must lie in (0, 1]",
            )?;
            ini.check(s.epsilon >= 0.0, "solver.epsilon", "must be nonnegative")?;
            ini.check(s.t_end > 0.0, "solver.t_end", "must be positive")?;
            ini.check(s.output_stride >= 1, "output.stride", "must be at least 1")?;
            s
        };

        let output = OutputConfig {
            dir: ini.string("output.dir").map(resolve),
            dump_primitive: ini.bool("output.dump_primitive")?.unwrap_or(false),
        };

        let converge = ConvergeConfig {
            n_list: ini.usize_list("converge.n_list")?,
            min_order: ini.f64("converge.min_order")?.unwrap_or(1.8),
            scale_cfl: ini.bool("converge.scale_cfl")?.unwrap_or(true),
        };

        let stability = StabilityConfig {
            r: ini.f64("stability.R")?,
            seed_v: ini.u64("stability.seed_v")?,
            pairs: ini.usize("stability.pairs")?.unwrap_or(1),
            amplitude: ini.f64("stability.amplitude")?.unwrap_or(0.01),
        };
        ini.check(
            stability.pairs >= 1,
            "stability.pairs",
            "must be at least 1",
        )?;
        ini.check(
            stability.amplitude > 0.0,
            "stability.amplitude",
            "must be positive",
        )?;

        let entropy = EntropyConfig {
            c_quantiles: ini.usize("entropy.c_quantiles")?.unwrap_or(9),
            n_testfns: ini.usize("entropy.n_testfns")?.unwrap_or(20),
            seed: ini.u64("entropy.seed")?,
            kappa: ini.f64("entropy.kappa")?.unwrap_or(ENTROPY_KAPPA),
        };
        ini.check(
            entropy.c_quantiles >= 1,
            "entropy.c_quantiles",
            "must be at least 1",
        )?;
        ini.check(
            entropy.n_testfns >= 1,
            "entropy.n_testfns",
            "must be at least 1",
        )?;
        ini.check(entropy.kappa > 0.0, "entropy.kappa", "must be positive")?;

        let validate = ValidateConfig {
            x_lo: ini.f64("validate.x_lo")?.unwrap_or(0.01),
            x_hi: ini.f64("validate.x_hi")?,
            n_x: ini.usize("validate.n_x")?.unwrap_or(201),
            tol: ini.f64("validate.tol")?.unwrap_or(1e-6),
        };
        ini.check(validate.n_x >= 2, "validate.n_x", "need at least 2 samples")?;
        ini.check(validate.x_lo >= 0.0, "validate.x_lo", "must be nonnegative")?;

        let sweep = ini.f64_list("sweep.eps_list")?;
        let import = ini.string("certify.import").map(resolve);

        Ok(Self {
            ini,
            flux,
            init,
            grid,
            solver,
            output,
            sweep,
            converge,
            stability,
            entropy,
            import,
            validate,
        })
    }

    pub fn init(&self) -> Result<&InitConfig, ConfigError> {
        self.init
            .as_ref()
            .ok_or_else(|| self.ini.missing("init.profile", ""))
    }

    pub fn grid(&self) -> Result<GridConfig, ConfigError> {
        self.grid
            .ok_or_else(|| self.ini.missing("grid.x_max", "and grid.n"))
    }

    /// A required seed, or a config error naming the key.
    pub fn require_seed(&self, seed: Option<u64>, key: &str) -> Result<u64, ConfigError> {
        seed.ok_or_else(|| {
            self.ini
                .missing(key, "all randomness needs an explicit seed")
        })
    }

    pub fn value_error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        self.ini.value_error(key, message)
    }
}
