//! Flat `key=value` run configuration shared by every subcommand.
//!
//! A config file is a sequence of lines; blank lines and lines starting with
//! `#` are skipped, everything else must be `key=value` with a known key.
//! Unknown keys are hard errors — a typo must not silently fall back to a
//! default. Values left unset keep the documented defaults below.

use std::fmt;
use std::path::PathBuf;

/// How the target forcing is produced.
///
/// * `eigpow:<c>` — `f = −c·(φ₁)₊^p` built from the computed ground state;
///   the solvability sign condition holds exactly when `c > 0`.
/// * `file:<path>` — a field CSV (`i,j,x,y,value`) on the run's grid.
#[derive(Debug, Clone)]
pub enum Forcing {
    Eigpow(f64),
    File(PathBuf),
}

impl Forcing {
    fn parse(text: &str) -> Result<Forcing, String> {
        if let Some(c) = text.strip_prefix("eigpow:") {
            let c: f64 = c
                .trim()
                .parse()
                .map_err(|_| format!("invalid eigpow coefficient {c:?}"))?;
            if !c.is_finite() {
                return Err(format!("eigpow coefficient must be finite, got {c}"));
            }
            Ok(Forcing::Eigpow(c))
        } else if let Some(path) = text.strip_prefix("file:") {
            if path.is_empty() {
                return Err("file forcing needs a path".into());
            }
            Ok(Forcing::File(PathBuf::from(path)))
        } else {
            Err(format!(
                "forcing must be eigpow:<c> or file:<path>, got {text:?}"
            ))
        }
    }
}

impl fmt::Display for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Eigpow(c) => write!(f, "eigpow:{c}"),
            Forcing::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Fully resolved run parameters. One struct serves all subcommands; each
/// command reads the fields it needs and ignores the rest.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Rectangle extents.
    pub a: f64,
    pub b: f64,
    /// Interior node counts.
    pub nx: usize,
    pub ny: usize,
    /// Dimension parameter of the exponent bookkeeping.
    pub n_dim: u32,
    /// Growth exponent of the one-sided nonlinearity.
    pub p: f64,
    /// Integrability exponent of the forcing norm.
    pub r: f64,
    /// Target forcing for `continue`.
    pub forcing: Forcing,
    /// Relative tolerance of the iterative linear/eigenvalue solves.
    pub linear_tol: f64,
    /// Quadrature-L² residual tolerance of the Newton iteration.
    pub newton_tol: f64,
    /// Newton iteration budget per solve.
    pub max_newton: usize,
    /// Initial number of homotopy segments.
    pub continuation_steps: usize,
    /// Amplitude of the reference state `t_ref·φ₁`.
    pub t_ref: f64,
    /// Forcing coefficients for `sweep`.
    pub c_values: Vec<f64>,
    /// Exponent grid for `hypotheses`.
    pub p_values: Vec<f64>,
    /// Random fields per resolution for `hardy-sobolev`.
    pub samples: usize,
    /// Where CSV artifacts go; created if missing.
    pub out_dir: PathBuf,
    /// Seed for every randomized draw.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            a: 1.0,
            b: 1.0,
            nx: 31,
            ny: 31,
            n_dim: 6,
            p: 2.1,
            r: 2.5,
            forcing: Forcing::Eigpow(0.05),
            linear_tol: 1e-9,
            newton_tol: 1e-8,
            max_newton: 30,
            continuation_steps: 8,
            t_ref: 0.3,
            c_values: vec![0.001, 0.01, 0.05, 0.1],
            p_values: vec![1.9, 2.0, 2.1, 2.3, 2.4],
            samples: 50,
            out_dir: PathBuf::from("out"),
            seed: 42,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value for {key}: {value:?}"))
}

fn parse_f64(key: &str, value: &str) -> Result<f64, String> {
    let x: f64 = parse_num(key, value)?;
    if !x.is_finite() {
        return Err(format!("{key} must be finite, got {value}"));
    }
    Ok(x)
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, String> {
    let trimmed = value.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    trimmed
        .split(',')
        .map(|tok| parse_f64(key, tok.trim()))
        .collect()
}

fn join_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "a" => self.a = parse_f64(key, value)?,
            "b" => self.b = parse_f64(key, value)?,
            "nx" => self.nx = parse_num(key, value)?,
            "ny" => self.ny = parse_num(key, value)?,
            "n_dim" => self.n_dim = parse_num(key, value)?,
            "p" => self.p = parse_f64(key, value)?,
            "r" => self.r = parse_f64(key, value)?,
            "forcing" => self.forcing = Forcing::parse(value)?,
            "linear_tol" => self.linear_tol = parse_f64(key, value)?,
            "newton_tol" => self.newton_tol = parse_f64(key, value)?,
            "max_newton" => self.max_newton = parse_num(key, value)?,
            "continuation_steps" => self.continuation_steps = parse_num(key, value)?,
            "t_ref" => self.t_ref = parse_f64(key, value)?,
            "c_values" => self.c_values = parse_list(key, value)?,
            "p_values" => self.p_values = parse_list(key, value)?,
            "samples" => self.samples = parse_num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = parse_num(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Structural sanity only; mathematical admissibility (exponent windows,
    /// sign conditions) is checked by the commands so that violations exit
    /// with the hypothesis code instead of the config code.
    fn validate(&self) -> Result<(), String> {
        if !(self.a > 0.0) || !(self.b > 0.0) {
            return Err(format!(
                "extents must be positive, got a={}, b={}",
                self.a, self.b
            ));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(format!(
                "grid sizes must be positive, got nx={}, ny={}",
                self.nx, self.ny
            ));
        }
        for (key, v) in [
            ("linear_tol", self.linear_tol),
            ("newton_tol", self.newton_tol),
            ("t_ref", self.t_ref),
        ] {
            if !(v > 0.0) {
                return Err(format!("{key} must be positive, got {v}"));
            }
        }
        if self.max_newton == 0 {
            return Err("max_newton must be at least 1".into());
        }
        if self.continuation_steps == 0 {
            return Err("continuation_steps must be at least 1".into());
        }
        Ok(())
    }

    /// `key=value` lines of the fully resolved configuration, sorted by key.
    /// Every emitted CSV carries these as `#` comments so any artifact can be
    /// traced back to the exact run that produced it.
    pub fn resolved_lines(&self, command: &str) -> Vec<String> {
        let mut lines = vec![
            format!("a={}", self.a),
            format!("b={}", self.b),
            format!("c_values={}", join_list(&self.c_values)),
            format!("command={command}"),
            format!("continuation_steps={}", self.continuation_steps),
            format!("forcing={}", self.forcing),
            format!("linear_tol={}", self.linear_tol),
            format!("max_newton={}", self.max_newton),
            format!("n_dim={}", self.n_dim),
            format!("newton_tol={}", self.newton_tol),
            format!("nx={}", self.nx),
            format!("ny={}", self.ny),
            format!("out_dir={}", self.out_dir.display()),
            format!("p={}", self.p),
            format!("p_values={}", join_list(&self.p_values)),
            format!("r={}", self.r),
            format!("samples={}", self.samples),
            format!("seed={}", self.seed),
            format!("t_ref={}", self.t_ref),
        ];
        lines.sort();
        lines
    }
}

/// Parse a whole config file against the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "line {}: expected key=value, got {line:?}",
                lineno + 1
            ));
        };
        cfg.set(key.trim(), value.trim())
            .map_err(|e| format!("line {}: {e}", lineno + 1))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_survive_empty_config() {
        let cfg = parse_config("# just a comment\n\n").unwrap();
        assert_eq!(cfg.nx, 31);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.p_values, vec![1.9, 2.0, 2.1, 2.3, 2.4]);
        assert!(matches!(cfg.forcing, Forcing::Eigpow(c) if c == 0.05));
    }

    #[test]
    fn keys_override_defaults() {
        let cfg = parse_config("nx=17\nny = 17\nseed=7\nforcing=eigpow:0.2\n").unwrap();
        assert_eq!((cfg.nx, cfg.ny, cfg.seed), (17, 17, 7));
        assert!(matches!(cfg.forcing, Forcing::Eigpow(c) if c == 0.2));
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = parse_config("frobnicate=1\n").unwrap_err();
        assert!(err.contains("unknown key"), "{err}");
    }

    #[test]
    fn malformed_line_is_an_error() {
        let err = parse_config("nx\n").unwrap_err();
        assert!(err.contains("key=value"), "{err}");
    }

    #[test]
    fn lists_parse_and_may_be_empty() {
        let cfg = parse_config("c_values=0.1, 0.2 ,0.3\np_values=\n").unwrap();
        assert_eq!(cfg.c_values, vec![0.1, 0.2, 0.3]);
        assert!(cfg.p_values.is_empty());
    }

    #[test]
    fn bad_numbers_are_errors() {
        assert!(parse_config("nx=three\n").is_err());
        assert!(parse_config("p=nan\n").is_err());
        assert!(parse_config("t_ref=-0.5\n").is_err());
        assert!(parse_config("forcing=mystery:1\n").is_err());
    }

    #[test]
    fn resolved_lines_are_sorted_and_complete() {
        let cfg = RunConfig::default();
        let lines = cfg.resolved_lines("eig");
        let mut sorted = lines.clone();
        sorted.sort();
        assert_eq!(lines, sorted);
        assert!(lines.iter().any(|l| l == "command=eig"));
        assert!(lines.iter().any(|l| l == "forcing=eigpow:0.05"));
        assert_eq!(lines.len(), 19);
    }
}
