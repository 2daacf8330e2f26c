//! Flat `key = value` run configuration (see docs/config.md for the grammar).

use std::collections::BTreeMap;
use std::fmt;

use tfch::equilibrium::{BvpConfig, SweepParam};
use tfch::timestepper::Component;
use tfch::{Params64, Scheme, SolverConfig};

/// Every accepted key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("mode", "", "evolve | bvp | sweep | bound | galerkin | check-inequalities; must match the subcommand if given"),
    ("seed", "0", "64-bit seed for random initial data and property draws"),
    ("params.C", "1", "capillary number C > 0"),
    ("params.Cn", "1", "Cahn number Cn > 0"),
    ("params.r", "1", "backreaction strength r >= 0"),
    ("params.A", "-1", "Hamaker constant A (negative is repulsive)"),
    ("params.vdw_exponent", "3", "exponent n of the van der Waals potential A h^-n"),
    ("grid.L", "16*pi", "periodic domain length"),
    ("grid.n", "256", "number of grid points (even)"),
    ("init.kind", "perturbed", "perturbed | single_mode | uniform"),
    ("init.amplitude", "0.05", "perturbation amplitude"),
    ("init.mode", "1", "Fourier mode index for single_mode"),
    ("init.component", "c", "h | c, perturbed field for single_mode"),
    ("init.h", "1", "uniform height for uniform data"),
    ("init.c", "0", "uniform concentration for uniform data"),
    ("solver.scheme", "semi_implicit", "semi_implicit | fully_implicit"),
    ("solver.t_end", "100", "final time"),
    ("solver.dt", "1e-3", "initial (or fixed) time step"),
    ("solver.dt_min", "auto", "smallest step before aborting"),
    ("solver.dt_max", "auto", "largest adaptive step"),
    ("solver.fixed_step", "false", "keep dt constant"),
    ("solver.record_every", "auto", "diagnostic cadence (auto: t_end / 100)"),
    ("solver.newton_tol", "1e-10", "Newton residual tolerance of the implicit scheme"),
    ("solver.newton_max_iter", "20", "Newton iteration cap"),
    ("solver.max_change", "0.1", "largest accepted relative change per step"),
    ("solver.energy_guard", "true", "reject steps that raise the energy"),
    ("bvp.X", "40", "half width of the equilibrium domain"),
    ("bvp.n", "1601", "equilibrium grid points (odd)"),
    ("bvp.newton_tol", "1e-12", "equilibrium Newton tolerance"),
    ("bvp.max_iter", "50", "equilibrium Newton iteration cap"),
    ("bvp.fd_order", "8", "even order of the finite-difference stencils"),
    ("bvp.continuation", "auto", "comma-separated r ladder, or auto"),
    ("sweep.param", "r", "r | A_abs"),
    ("sweep.values", "auto", "comma-separated values, or auto for the range keys"),
    ("sweep.start", "0.1", "first value of a generated range"),
    ("sweep.stop", "50", "last value of a generated range"),
    ("sweep.count", "10", "number of generated values"),
    ("sweep.spacing", "log", "log | linear"),
    ("bound.F0", "auto", "energy constant F0 (auto: from the initial data)"),
    ("bound.F1", "auto", "energy constant F1 (auto: from the initial data)"),
    ("bound.C", "auto", "capillary number of the bound curve (auto: params.C)"),
    ("bound.L", "auto", "domain length of the bound curve (auto: grid.L)"),
    ("bound.A_min", "0.1", "smallest |A| of the curve"),
    ("bound.A_max", "10", "largest |A| of the curve"),
    ("bound.count", "100", "points on the curve (log spaced)"),
    ("galerkin.modes", "33", "odd number of Galerkin modes"),
    ("galerkin.eps", "1e-6", "regularization parameter"),
    ("inequalities.draws", "1000", "random fields to test"),
    ("inequalities.n", "128", "grid points per field"),
    ("inequalities.max_degree", "11", "largest trigonometric degree"),
    ("inequalities.L_min", "0.5", "smallest domain length"),
    ("inequalities.L_max", "50", "largest domain length"),
    ("output.plots", "false", "write SVG plots"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "field '{k}': ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

fn fail<T>(line: Option<usize>, key: Option<&str>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { line, key: key.map(str::to_owned), message: message.into() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Evolve,
    Bvp,
    Sweep,
    Bound,
    Galerkin,
    CheckInequalities,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Evolve => "evolve",
            Mode::Bvp => "bvp",
            Mode::Sweep => "sweep",
            Mode::Bound => "bound",
            Mode::Galerkin => "galerkin",
            Mode::CheckInequalities => "check-inequalities",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Mode::Evolve, Mode::Bvp, Mode::Sweep, Mode::Bound, Mode::Galerkin, Mode::CheckInequalities]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

/// Raw settings: key -> (value, source line).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    entries: BTreeMap<String, (String, Option<usize>)>,
}

impl Settings {
    /// Parse config text; comments start with `#`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut s = Settings::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return fail(Some(line), None, format!("expected 'key = value', got '{body}'"));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.iter().any(|e| e.0 == k) {
                return fail(Some(line), Some(k), "unknown key");
            }
            if v.is_empty() {
                return fail(Some(line), Some(k), "missing value");
            }
            if let Some((_, Some(prev))) = s.entries.get(k) {
                return fail(Some(line), Some(k), format!("already set on line {prev}"));
            }
            s.entries.insert(k.to_owned(), (v.to_owned(), Some(line)));
        }
        Ok(s)
    }

    /// Override (or add) a key from the command line.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_owned(), (value.into(), None));
    }

    /// Like `set`, but rejects unknown keys.
    pub fn set_checked(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.iter().any(|e| e.0 == key) {
            return fail(None, Some(key), "unknown key");
        }
        self.set(key, value);
        Ok(())
    }

    /// Rebuild settings from a metadata `config` echo.
    pub fn from_echo(echo: &serde_json::Value) -> Result<Self, ConfigError> {
        let obj = echo.as_object().ok_or_else(|| ConfigError {
            line: None,
            key: None,
            message: "metadata config echo must be an object".into(),
        })?;
        let mut s = Settings::default();
        for (k, v) in obj {
            if !KEYS.iter().any(|e| e.0 == k) {
                return fail(None, Some(k), "unknown key");
            }
            let v = v.as_str().ok_or_else(|| ConfigError {
                line: None,
                key: Some(k.clone()),
                message: "echoed values must be strings".into(),
            })?;
            s.set(k, v);
        }
        Ok(s)
    }

    fn get(&self, key: &str) -> (&str, Option<usize>) {
        match self.entries.get(key) {
            Some((v, l)) => (v.as_str(), *l),
            None => (KEYS.iter().find(|e| e.0 == key).map(|e| e.1).unwrap_or(""), None),
        }
    }
}

/// Reals accept products and quotients of numbers and `pi`, e.g. `16*pi` or `1/3`.
pub fn parse_real(text: &str) -> Option<f64> {
    let product = |s: &str| -> Option<f64> {
        s.split('*').try_fold(1.0, |acc, f| {
            let f = f.trim();
            let v = if f == "pi" { std::f64::consts::PI } else { f.parse::<f64>().ok()? };
            Some(acc * v)
        })
    };
    let mut parts = text.split('/');
    let mut value = product(parts.next()?)?;
    for d in parts {
        value /= product(d)?;
    }
    value.is_finite().then_some(value)
}

struct Reader<'a> {
    s: &'a Settings,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> (&str, Option<usize>) {
        self.s.get(key)
    }

    fn real(&self, key: &str) -> Result<f64, ConfigError> {
        let (v, line) = self.raw(key);
        parse_real(v).map_or_else(|| fail(line, Some(key), format!("expected a real number, got '{v}'")), Ok)
    }

    fn auto_real(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        if self.raw(key).0 == "auto" {
            Ok(None)
        } else {
            self.real(key).map(Some)
        }
    }

    fn count(&self, key: &str) -> Result<usize, ConfigError> {
        let (v, line) = self.raw(key);
        v.parse().map_or_else(|_| fail(line, Some(key), format!("expected a nonnegative integer, got '{v}'")), Ok)
    }

    fn flag(&self, key: &str) -> Result<bool, ConfigError> {
        let (v, line) = self.raw(key);
        match v {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => fail(line, Some(key), format!("expected true or false, got '{v}'")),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let (v, line) = self.raw(key);
        if v == "auto" {
            return Ok(None);
        }
        v.split(',')
            .map(|t| parse_real(t.trim()).ok_or(()))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
            .or_else(|_| fail(line, Some(key), format!("expected comma-separated reals, got '{v}'")))
    }

    fn choice<T>(&self, key: &str, options: &[(&str, T)]) -> Result<T, ConfigError>
    where
        T: Copy,
    {
        let (v, line) = self.raw(key);
        options.iter().find(|o| o.0 == v).map(|o| o.1).map_or_else(
            || {
                let names: Vec<&str> = options.iter().map(|o| o.0).collect();
                fail(line, Some(key), format!("expected one of {}, got '{v}'", names.join(", ")))
            },
            Ok,
        )
    }

    /// Attach the line of `key` to a validation message from the core crate.
    fn check<T>(&self, key: &str, r: tfch::Result<T>) -> Result<T, ConfigError> {
        r.or_else(|e| fail(self.raw(key).1, Some(key), e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitKind {
    Perturbed,
    SingleMode,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitSpec {
    pub kind: InitKind,
    pub amplitude: f64,
    pub mode: usize,
    pub component: Component,
    pub h: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSpec {
    pub f0: Option<f64>,
    pub f1: Option<f64>,
    pub capillary: f64,
    pub length: f64,
    pub a_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalitySpec {
    pub draws: usize,
    pub n: usize,
    pub max_degree: usize,
    pub length_range: (f64, f64),
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub params: Params64,
    pub grid_length: f64,
    pub grid_n: usize,
    pub init: InitSpec,
    pub solver: SolverConfig<f64>,
    pub bvp: BvpConfig<f64>,
    pub sweep: SweepParam<f64>,
    pub bound: BoundSpec,
    pub galerkin_modes: usize,
    pub galerkin_eps: f64,
    pub inequalities: InequalitySpec,
    pub plots: bool,
    /// Every key with its effective value, echoed into the metadata.
    pub echo: BTreeMap<String, String>,
}

fn spaced(start: f64, stop: f64, count: usize, log: bool) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            if log {
                start * (stop / start).powf(t)
            } else {
                start + (stop - start) * t
            }
        })
        .collect()
}

impl RunConfig {
    pub fn resolve(mode: Mode, settings: &Settings) -> Result<Self, ConfigError> {
        let rd = Reader { s: settings };
        let (m, line) = rd.raw("mode");
        if !m.is_empty() && Mode::parse(m) != Some(mode) {
            return fail(line, Some("mode"), format!("config is for mode '{m}' but '{}' was requested", mode.name()));
        }
        let (seed_text, seed_line) = rd.raw("seed");
        let seed = seed_text
            .parse::<u64>()
            .or_else(|_| fail(seed_line, Some("seed"), format!("expected a 64-bit unsigned integer, got '{seed_text}'")))?;

        let mut params = rd.check(
            "params.C",
            Params64::new(rd.real("params.C")?, rd.real("params.Cn")?, rd.real("params.r")?, rd.real("params.A")?),
        )?;
        let n_vdw = rd.count("params.vdw_exponent")?;
        params = rd.check("params.vdw_exponent", params.with_vdw_exponent(n_vdw as u32))?;

        let grid_length = rd.real("grid.L")?;
        let grid_n = rd.count("grid.n")?;
        rd.check("grid.n", tfch::Grid64::new(grid_length, grid_n).map(|_| ()))?;

        let init = InitSpec {
            kind: rd.choice(
                "init.kind",
                &[("perturbed", InitKind::Perturbed), ("single_mode", InitKind::SingleMode), ("uniform", InitKind::Uniform)],
            )?,
            amplitude: rd.real("init.amplitude")?,
            mode: rd.count("init.mode")?,
            component: rd.choice("init.component", &[("h", Component::Height), ("c", Component::Concentration)])?,
            h: rd.real("init.h")?,
            c: rd.real("init.c")?,
        };

        let t_end = rd.real("solver.t_end")?;
        let dt = rd.real("solver.dt")?;
        let mut solver = SolverConfig::new(t_end, dt).with_scheme(rd.choice(
            "solver.scheme",
            &[("semi_implicit", Scheme::SemiImplicit), ("fully_implicit", Scheme::FullyImplicit)],
        )?);
        if rd.flag("solver.fixed_step")? {
            solver = solver.fixed_step();
        }
        if let Some(v) = rd.auto_real("solver.dt_min")? {
            solver.dt_min = v;
        }
        if let Some(v) = rd.auto_real("solver.dt_max")? {
            solver.dt_max = v;
        }
        if let Some(v) = rd.auto_real("solver.record_every")? {
            solver.record_every = v;
        }
        solver.newton_tol = rd.real("solver.newton_tol")?;
        solver.newton_max_iter = rd.count("solver.newton_max_iter")?;
        solver.max_change = rd.real("solver.max_change")?;
        solver.energy_guard = rd.flag("solver.energy_guard")?;
        rd.check("solver", solver.validate())?;

        let bvp = BvpConfig {
            half_width: rd.real("bvp.X")?,
            n_points: rd.count("bvp.n")?,
            newton_tol: rd.real("bvp.newton_tol")?,
            max_iter: rd.count("bvp.max_iter")?,
            continuation: rd.list("bvp.continuation")?,
            fd_order: rd.count("bvp.fd_order")?,
        };
        rd.check("bvp", bvp.validate())?;

        let values = match rd.list("sweep.values")? {
            Some(v) => v,
            None => {
                let log = rd.choice("sweep.spacing", &[("log", true), ("linear", false)])?;
                let (start, stop, count) = (rd.real("sweep.start")?, rd.real("sweep.stop")?, rd.count("sweep.count")?);
                if count == 0 || (log && !(start > 0.0 && stop > 0.0)) {
                    return fail(rd.raw("sweep.count").1, Some("sweep.count"), "need count >= 1 and a positive range for log spacing");
                }
                spaced(start, stop, count, log)
            }
        };
        if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
            return fail(rd.raw("sweep.values").1, Some("sweep.values"), "sweep values must be positive");
        }
        let sweep = match rd.choice("sweep.param", &[("r", false), ("A_abs", true)])? {
            true => SweepParam::Hamaker(values),
            false => SweepParam::Backreaction(values),
        };

        let (a_min, a_max, count) = (rd.real("bound.A_min")?, rd.real("bound.A_max")?, rd.count("bound.count")?);
        if !(a_min > 0.0 && a_max >= a_min) || count == 0 {
            return fail(rd.raw("bound.A_min").1, Some("bound.A_min"), "need 0 < A_min <= A_max and count >= 1");
        }
        let bound = BoundSpec {
            f0: rd.auto_real("bound.F0")?,
            f1: rd.auto_real("bound.F1")?,
            capillary: rd.auto_real("bound.C")?.unwrap_or(params.capillary),
            length: rd.auto_real("bound.L")?.unwrap_or(grid_length),
            a_values: spaced(a_min, a_max, count, true),
        };

        let galerkin_modes = rd.count("galerkin.modes")?;
        if galerkin_modes % 2 == 0 || galerkin_modes < 3 {
            return fail(rd.raw("galerkin.modes").1, Some("galerkin.modes"), "need an odd number of modes >= 3");
        }
        let galerkin_eps = rd.real("galerkin.eps")?;
        rd.check("galerkin.eps", tfch::RegularizedFamily::new(galerkin_eps).map(|_| ()))?;

        let inequalities = InequalitySpec {
            draws: rd.count("inequalities.draws")?,
            n: rd.count("inequalities.n")?,
            max_degree: rd.count("inequalities.max_degree")?,
            length_range: (rd.real("inequalities.L_min")?, rd.real("inequalities.L_max")?),
        };
        let (lo, hi) = inequalities.length_range;
        if !(lo > 0.0 && hi >= lo) || inequalities.max_degree == 0 || inequalities.max_degree >= inequalities.n / 4 {
            return fail(
                rd.raw("inequalities.max_degree").1,
                Some("inequalities.max_degree"),
                "need 0 < L_min <= L_max and 1 <= max_degree < n / 4",
            );
        }

        let mut echo: BTreeMap<String, String> = KEYS.iter().map(|(k, _, _)| (k.to_string(), settings.get(k).0.to_owned())).collect();
        echo.insert("mode".into(), mode.name().into());
        Ok(RunConfig {
            mode,
            seed,
            params,
            grid_length,
            grid_n,
            init,
            solver,
            bvp,
            sweep,
            bound,
            galerkin_modes,
            galerkin_eps,
            inequalities,
            plots: rd.flag("output.plots")?,
            echo,
        })
    }

    /// Rebuild the configuration from a metadata document.
    pub fn from_metadata(meta: &serde_json::Value) -> Result<Self, ConfigError> {
        let echo = &meta["config"];
        let mode = echo["mode"]
            .as_str()
            .and_then(Mode::parse)
            .ok_or_else(|| ConfigError { line: None, key: Some("mode".into()), message: "missing or unknown mode in metadata".into() })?;
        RunConfig::resolve(mode, &Settings::from_echo(echo)?)
    }
}
