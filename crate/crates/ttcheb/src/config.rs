//! Flat key = value run configuration: parsing, validation, defaults, and a
//! round-trip printer. One setting per line, `#` starts a comment, vectors
//! are comma-separated lists with scalar broadcast over the dimension count.

use std::collections::BTreeMap;

use crate::error::{Result, TtError};
use crate::function_train::UnivariateBasis;
use crate::hamiltonian::{Discretization, HamiltonianSpec, PotentialModel};
use crate::models::GaussianParams;
use crate::propagators::ChebyshevScheme;
use crate::tensor_train::GridSpec;

/// Potential model selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Dna,
    Harmonic,
}

/// State representation selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatKind {
    Tt,
    Ft,
}

/// Propagation scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    ChebyshevRecurrence,
    ChebyshevClenshaw,
    Soft,
}

/// A fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub alpha_scale: f64,
    pub beta: f64,
    pub omega: f64,
    pub dims: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub degree: usize,
    pub format: FormatKind,
    pub mass: f64,
    pub w: f64,
    pub x0: Vec<f64>,
    pub p0: Vec<f64>,
    pub scheme: SchemeKind,
    pub t_final: f64,
    pub tau: f64,
    pub n_poly: usize,
    pub dt: f64,
    pub round_tol: f64,
    pub rmax: usize,
    pub auto_trim: bool,
    pub out_dir: String,
    pub slice_times: Vec<f64>,
    pub slice_dims: (usize, usize),
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Harmonic,
            alpha_scale: 0.1,
            beta: -2.0,
            omega: 1.0,
            dims: 2,
            x_min: -5.0,
            x_max: 5.0,
            n: 32,
            degree: 32,
            format: FormatKind::Tt,
            mass: 1.0,
            w: 1.0,
            x0: vec![1.0, 1.0],
            p0: vec![0.0, 0.0],
            scheme: SchemeKind::ChebyshevClenshaw,
            t_final: 1.0,
            tau: 0.01,
            n_poly: 50,
            dt: 0.01,
            round_tol: 1e-10,
            rmax: 200,
            auto_trim: true,
            out_dir: "out".into(),
            slice_times: Vec::new(),
            slice_dims: (0, 1),
        }
    }
}

const KEYS: &[&str] = &[
    "model", "alpha_scale", "beta", "omega", "dims", "x_min", "x_max", "n", "degree", "format",
    "mass", "w", "x0", "p0", "scheme", "t_final", "tau", "n_poly", "dt", "round_tol", "rmax",
    "auto_trim", "out_dir", "slice_times", "slice_dims",
];

fn bad(key: &str, why: impl std::fmt::Display) -> TtError {
    TtError::Config(format!("key '{key}': {why}"))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| bad(key, format!("expected a number, got '{v}'")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse::<usize>().map_err(|_| bad(key, format!("expected an integer, got '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(bad(key, format!("expected true or false, got '{other}'"))),
    }
}

fn parse_f64_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|p| parse_f64(key, p)).collect()
}

/// Broadcast a one-element list over `dims` entries; reject other mismatches.
fn broadcast(key: &str, mut v: Vec<f64>, dims: usize) -> Result<Vec<f64>> {
    if v.len() == 1 && dims > 1 {
        v = vec![v[0]; dims];
    }
    if v.len() != dims {
        return Err(bad(key, format!("expected 1 or {dims} values, got {}", v.len())));
    }
    Ok(v)
}

impl RunConfig {
    /// Parses a flat key = value text into a validated configuration.
    pub fn parse(text: &str) -> Result<Self> {
        let mut seen: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(TtError::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            if !KEYS.contains(&key.as_str()) {
                return Err(TtError::Config(format!("line {}: unknown key '{key}'", lineno + 1)));
            }
            if seen.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(TtError::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
        }
        let mut cfg = Self::default();
        if let Some(v) = seen.get("dims") {
            cfg.dims = parse_usize("dims", v)?;
        }
        // re-derive the default vectors at the configured dimension count
        cfg.x0 = vec![1.0; cfg.dims];
        cfg.p0 = vec![0.0; cfg.dims];
        for (key, v) in &seen {
            match key.as_str() {
                "model" => {
                    cfg.model = match v.as_str() {
                        "dna" => ModelKind::Dna,
                        "harmonic" => ModelKind::Harmonic,
                        other => return Err(bad(key, format!("expected dna or harmonic, got '{other}'"))),
                    }
                }
                "alpha_scale" => cfg.alpha_scale = parse_f64(key, v)?,
                "beta" => cfg.beta = parse_f64(key, v)?,
                "omega" => cfg.omega = parse_f64(key, v)?,
                "dims" => {} // already handled
                "x_min" => cfg.x_min = parse_f64(key, v)?,
                "x_max" => cfg.x_max = parse_f64(key, v)?,
                "n" => cfg.n = parse_usize(key, v)?,
                "degree" => cfg.degree = parse_usize(key, v)?,
                "format" => {
                    cfg.format = match v.as_str() {
                        "tt" => FormatKind::Tt,
                        "ft" => FormatKind::Ft,
                        other => return Err(bad(key, format!("expected tt or ft, got '{other}'"))),
                    }
                }
                "mass" => cfg.mass = parse_f64(key, v)?,
                "w" => cfg.w = parse_f64(key, v)?,
                "x0" => cfg.x0 = broadcast(key, parse_f64_list(key, v)?, cfg.dims)?,
                "p0" => cfg.p0 = broadcast(key, parse_f64_list(key, v)?, cfg.dims)?,
                "scheme" => {
                    cfg.scheme = match v.as_str() {
                        "chebyshev-recurrence" => SchemeKind::ChebyshevRecurrence,
                        "chebyshev-clenshaw" => SchemeKind::ChebyshevClenshaw,
                        "soft" => SchemeKind::Soft,
                        other => {
                            return Err(bad(
                                key,
                                format!("expected chebyshev-recurrence, chebyshev-clenshaw, or soft, got '{other}'"),
                            ))
                        }
                    }
                }
                "t_final" => cfg.t_final = parse_f64(key, v)?,
                "tau" => cfg.tau = parse_f64(key, v)?,
                "n_poly" => cfg.n_poly = parse_usize(key, v)?,
                "dt" => cfg.dt = parse_f64(key, v)?,
                "round_tol" => cfg.round_tol = parse_f64(key, v)?,
                "rmax" => cfg.rmax = parse_usize(key, v)?,
                "auto_trim" => cfg.auto_trim = parse_bool(key, v)?,
                "out_dir" => cfg.out_dir = v.clone(),
                "slice_times" => cfg.slice_times = parse_f64_list(key, v)?,
                "slice_dims" => {
                    let parts: Vec<usize> = v
                        .split(',')
                        .map(|p| parse_usize(key, p))
                        .collect::<Result<_>>()?;
                    if parts.len() != 2 {
                        return Err(bad(key, "expected exactly two comma-separated indices"));
                    }
                    cfg.slice_dims = (parts[0], parts[1]);
                }
                _ => unreachable!("key list is checked above"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every invariant, naming the offending key in the error.
    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(bad("dims", "must be at least 1"));
        }
        if !(self.x_max > self.x_min) {
            return Err(bad("x_max", "must exceed x_min"));
        }
        if self.n < 2 || !self.n.is_power_of_two() {
            return Err(bad("n", format!("{} must be a power of two and >= 2", self.n)));
        }
        if self.degree < 2 {
            return Err(bad("degree", "must be at least 2"));
        }
        if !(self.mass > 0.0) {
            return Err(bad("mass", "must be positive"));
        }
        if !(self.omega > 0.0) {
            return Err(bad("omega", "must be positive"));
        }
        if !(self.alpha_scale > 0.0) {
            return Err(bad("alpha_scale", "must be positive"));
        }
        if !(self.w > 0.0) {
            return Err(bad("w", "must be positive"));
        }
        if self.x0.len() != self.dims || self.p0.len() != self.dims {
            return Err(bad("x0", "vector length must equal dims"));
        }
        if !(self.t_final > 0.0) {
            return Err(bad("t_final", "must be positive"));
        }
        if !(self.tau > 0.0) {
            return Err(bad("tau", "must be positive"));
        }
        let steps = self.t_final / self.tau;
        if (steps - steps.round()).abs() > 1e-12 * steps.max(1.0) {
            return Err(bad("tau", format!("must divide t_final ({} / {} is not an integer)", self.t_final, self.tau)));
        }
        if self.n_poly == 0 {
            return Err(bad("n_poly", "must be at least 1"));
        }
        if !(self.dt > 0.0) {
            return Err(bad("dt", "must be positive"));
        }
        if !(self.round_tol > 0.0) {
            return Err(bad("round_tol", "must be positive"));
        }
        if self.rmax == 0 {
            return Err(bad("rmax", "must be at least 1"));
        }
        let (p, q) = self.slice_dims;
        if self.dims >= 2 && (p >= q || q >= self.dims) {
            return Err(bad("slice_dims", format!("need p < q < dims, got {p},{q}")));
        }
        for &t in &self.slice_times {
            if t < 0.0 || t > self.t_final {
                return Err(bad("slice_times", format!("time {t} outside [0, t_final]")));
            }
        }
        Ok(())
    }

    /// Number of checkpoint intervals τ in [0, t_final].
    pub fn checkpoints(&self) -> usize {
        (self.t_final / self.tau).round() as usize
    }

    /// The Chebyshev scheme, if the configured scheme is a Chebyshev variant.
    pub fn chebyshev_scheme(&self) -> Option<ChebyshevScheme> {
        match self.scheme {
            SchemeKind::ChebyshevRecurrence => Some(ChebyshevScheme::Recurrence),
            SchemeKind::ChebyshevClenshaw => Some(ChebyshevScheme::Clenshaw),
            SchemeKind::Soft => None,
        }
    }

    pub fn discretization(&self) -> Result<Discretization> {
        Ok(match self.format {
            FormatKind::Tt => {
                Discretization::Grid(GridSpec::uniform(self.x_min, self.x_max, self.n, self.dims)?)
            }
            FormatKind::Ft => {
                // Dirichlet sine modes: the kinetic operator is exactly
                // diagonal with the same spectral radius as the matching
                // grid, which keeps long Chebyshev propagations Hermitian
                // and inside the closed-form spectral bracket.
                let basis = UnivariateBasis::sine(self.x_min, self.x_max, self.degree)?;
                Discretization::Bases(vec![basis; self.dims])
            }
        })
    }

    pub fn potential_model(&self) -> PotentialModel {
        match self.model {
            ModelKind::Dna => PotentialModel::Dna { alpha_scale: self.alpha_scale, beta: self.beta },
            ModelKind::Harmonic => PotentialModel::Harmonic { omega: self.omega },
        }
    }

    pub fn hamiltonian_spec(&self) -> Result<HamiltonianSpec> {
        HamiltonianSpec::new(self.mass, self.potential_model(), self.discretization()?)
    }

    pub fn gaussian(&self) -> Result<GaussianParams> {
        GaussianParams::new(self.w, self.x0.clone(), self.p0.clone())
    }

    /// Serializes the configuration back to the flat text form; parsing the
    /// output reproduces the configuration exactly.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let model = match self.model {
            ModelKind::Dna => "dna",
            ModelKind::Harmonic => "harmonic",
        };
        let format = match self.format {
            FormatKind::Tt => "tt",
            FormatKind::Ft => "ft",
        };
        let scheme = match self.scheme {
            SchemeKind::ChebyshevRecurrence => "chebyshev-recurrence",
            SchemeKind::ChebyshevClenshaw => "chebyshev-clenshaw",
            SchemeKind::Soft => "soft",
        };
        s.push_str(&format!("model = {model}\n"));
        s.push_str(&format!("alpha_scale = {}\n", self.alpha_scale));
        s.push_str(&format!("beta = {}\n", self.beta));
        s.push_str(&format!("omega = {}\n", self.omega));
        s.push_str(&format!("dims = {}\n", self.dims));
        s.push_str(&format!("x_min = {}\n", self.x_min));
        s.push_str(&format!("x_max = {}\n", self.x_max));
        s.push_str(&format!("n = {}\n", self.n));
        s.push_str(&format!("degree = {}\n", self.degree));
        s.push_str(&format!("format = {format}\n"));
        s.push_str(&format!("mass = {}\n", self.mass));
        s.push_str(&format!("w = {}\n", self.w));
        s.push_str(&format!("x0 = {}\n", join(&self.x0)));
        s.push_str(&format!("p0 = {}\n", join(&self.p0)));
        s.push_str(&format!("scheme = {scheme}\n"));
        s.push_str(&format!("t_final = {}\n", self.t_final));
        s.push_str(&format!("tau = {}\n", self.tau));
        s.push_str(&format!("n_poly = {}\n", self.n_poly));
        s.push_str(&format!("dt = {}\n", self.dt));
        s.push_str(&format!("round_tol = {}\n", self.round_tol));
        s.push_str(&format!("rmax = {}\n", self.rmax));
        s.push_str(&format!("auto_trim = {}\n", self.auto_trim));
        s.push_str(&format!("out_dir = {}\n", self.out_dir));
        if !self.slice_times.is_empty() {
            s.push_str(&format!("slice_times = {}\n", join(&self.slice_times)));
        }
        s.push_str(&format!("slice_dims = {},{}\n", self.slice_dims.0, self.slice_dims.1));
        s
    }

    /// The default configuration in flat text form, with every key present.
    pub fn print_defaults() -> String {
        Self::default().to_text()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DNA50: &str = "\
model = dna
dims = 50
alpha_scale = 0.1
beta = -2
x_min = -5
x_max = 5
n = 32
w = 1
x0 = 1
p0 = 0
mass = 1
tau = 0.01
t_final = 1.0
n_poly = 50
";

    #[test]
    fn dna50_parses_and_round_trips() {
        let cfg = RunConfig::parse(DNA50).unwrap();
        assert_eq!(cfg.model, ModelKind::Dna);
        assert_eq!(cfg.dims, 50);
        assert_eq!(cfg.beta, -2.0);
        assert_eq!(cfg.x0, vec![1.0; 50]);
        assert_eq!(cfg.p0, vec![0.0; 50]);
        assert_eq!(cfg.n_poly, 50);
        assert_eq!(cfg.checkpoints(), 100);
        let again = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn beta_zero_broadcast_accepted() {
        let cfg = RunConfig::parse("model = dna\ndims = 50\nbeta = 0\nx0 = 1\n").unwrap();
        assert_eq!(cfg.beta, 0.0);
        assert_eq!(cfg.hamiltonian_spec().unwrap().coupling(), 0.0);
    }

    #[test]
    fn rejects_non_power_of_two_grid() {
        let err = RunConfig::parse("n = 33\n").unwrap_err();
        assert!(err.to_string().contains("'n'"), "{err}");
    }

    #[test]
    fn rejects_unknown_key() {
        let err = RunConfig::parse("frobnicate = 3\n").unwrap_err();
        assert!(err.to_string().contains("frobnicate"), "{err}");
    }

    #[test]
    fn rejects_duplicate_key_and_bad_tau() {
        assert!(RunConfig::parse("mass = 1\nmass = 2\n").is_err());
        let err = RunConfig::parse("t_final = 1\ntau = 0.3\n").unwrap_err();
        assert!(err.to_string().contains("tau"), "{err}");
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = RunConfig::parse("# header\n\nmass = 2.5 # trailing\n").unwrap();
        assert_eq!(cfg.mass, 2.5);
    }

    #[test]
    fn vector_length_mismatch_rejected() {
        let err = RunConfig::parse("dims = 3\nx0 = 1,2\n").unwrap_err();
        assert!(err.to_string().contains("x0"), "{err}");
    }

    #[test]
    fn defaults_parse_cleanly() {
        let cfg = RunConfig::parse(&RunConfig::print_defaults()).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn ft_discretization_uses_bases() {
        let cfg = RunConfig::parse("format = ft\ndegree = 24\ndims = 3\n").unwrap();
        match cfg.discretization().unwrap() {
            Discretization::Bases(b) => {
                assert_eq!(b.len(), 3);
                assert_eq!(b[0].degree(), 24);
            }
            _ => panic!("expected basis discretization"),
        }
    }
}
