//! Run configuration: a TOML file read as flat dotted keys.
//!
//! ```toml
//! lambda = 0.5
//! ambient.L = [[0.0, 0.0], [0.0, 0.0]]   # row-major, fixes the dimension
//! ambient.M = [0.0, 0.0]                  # optional, default 0
//! ambient.f.kind = "constant"             # or "inverse_quadratic"
//! ambient.f.c0 = 0.0                      # constant case only
//!
//! curve.kind = "circle"                   # circle | ellipse | fourier | file
//! curve.N = 128
//! curve.rho = 2.0                         # circle: rho, center, plane
//! # curve.a, curve.b                      # ellipse
//! # curve.modes, curve.amplitude, curve.seed   # fourier
//! # curve.path                            # file, relative to this file
//!
//! flow.integrator = "imex_euler"          # or "explicit_rk4"
//! flow.dt = 1e-2
//! flow.t_max = 20.0
//! output.dir = "out"                      # relative to this file
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;
use toml::Value;

use crate::ambient::{AffineMap, AmbientSpec, ScalarField};
use crate::curve::{ellipse, fourier_curve, resample_uniform, DiscreteCurve};
use crate::flow::{FlowConfig, Integrator};
use crate::stationary::circle_builder;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config is not valid TOML: {0}")]
    Syntax(String),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("key `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("unknown key `{0}`")]
    Unknown(String),
}

impl ConfigError {
    fn invalid(key: &str, message: impl Into<String>) -> Self {
        Self::Invalid { key: key.to_string(), message: message.into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CurveSource {
    Circle { rho: f64, center: Vec<f64>, plane: (usize, usize) },
    Ellipse { a: f64, b: f64 },
    Fourier { modes: usize, amplitude: f64, seed: u64 },
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub spec: AmbientSpec,
    pub flow: FlowConfig,
    pub curve: CurveSource,
    pub nodes: usize,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    /// Relative paths inside the file are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
        let mut keys = Keys::default();
        flatten("", &Value::Table(table), &mut keys.map);

        let lambda = keys.req_f64("lambda")?;
        let l = keys.req_matrix("ambient.L")?;
        let dim = l.nrows();
        if dim < 2 {
            return Err(ConfigError::invalid("ambient.L", "dimension must be at least 2"));
        }
        let m = match keys.opt_vec("ambient.M")? {
            Some(v) if v.len() != dim => {
                return Err(ConfigError::invalid("ambient.M", format!("expected {dim} entries, got {}", v.len())))
            }
            Some(v) => DVector::from_vec(v),
            None => DVector::zeros(dim),
        };
        let scalar = match keys.req_str("ambient.f.kind")?.as_str() {
            "constant" => ScalarField::Constant { c0: keys.req_f64("ambient.f.c0")? },
            "inverse_quadratic" => ScalarField::InverseQuadratic,
            other => return Err(ConfigError::invalid("ambient.f.kind", format!("unknown field kind `{other}`"))),
        };
        let affine = AffineMap::new(l, m).map_err(|e| ConfigError::invalid("ambient.L", e.to_string()))?;
        let spec = AmbientSpec::new(affine, scalar, lambda).map_err(|e| ConfigError::invalid("lambda", e.to_string()))?;

        let defaults = FlowConfig::default();
        let integrator = match keys.opt_str("flow.integrator")?.as_deref() {
            None | Some("imex_euler") => Integrator::ImexEuler,
            Some("explicit_rk4") => Integrator::ExplicitRk4,
            Some(other) => return Err(ConfigError::invalid("flow.integrator", format!("unknown integrator `{other}`"))),
        };
        let flow = FlowConfig {
            integrator,
            dt: keys.opt_f64("flow.dt")?.unwrap_or(defaults.dt),
            c_stab: keys.opt_f64("flow.c_stab")?.unwrap_or(defaults.c_stab),
            t_max: keys.req_f64("flow.t_max")?,
            resample_every: keys.opt_usize("flow.resample_every")?.unwrap_or(defaults.resample_every),
            residual_tol: keys.opt_f64("flow.residual_tol")?.unwrap_or(defaults.residual_tol),
            record_every: keys.opt_usize("flow.record_every")?.unwrap_or(defaults.record_every),
            seed: keys.opt_usize("flow.seed")?.unwrap_or(0) as u64,
        };
        flow.validate().map_err(|e| ConfigError::invalid("flow", e.to_string()))?;

        let nodes = keys.req_usize("curve.N")?;
        let curve = match keys.req_str("curve.kind")?.as_str() {
            "circle" => {
                let center = keys.opt_vec("curve.center")?.unwrap_or_else(|| vec![0.0; dim]);
                if center.len() != dim {
                    return Err(ConfigError::invalid("curve.center", format!("expected {dim} entries")));
                }
                let plane = match keys.opt_vec("curve.plane")? {
                    None => (0, 1),
                    Some(p) if p.len() == 2 && p.iter().all(|v| *v >= 0.0 && v.fract() == 0.0) => {
                        (p[0] as usize, p[1] as usize)
                    }
                    Some(_) => return Err(ConfigError::invalid("curve.plane", "expected two axis indices")),
                };
                CurveSource::Circle { rho: keys.req_f64("curve.rho")?, center, plane }
            }
            "ellipse" => CurveSource::Ellipse { a: keys.req_f64("curve.a")?, b: keys.req_f64("curve.b")? },
            "fourier" => CurveSource::Fourier {
                modes: keys.opt_usize("curve.modes")?.unwrap_or(5),
                amplitude: keys.opt_f64("curve.amplitude")?.unwrap_or(0.1),
                seed: keys.opt_usize("curve.seed")?.unwrap_or(0) as u64,
            },
            "file" => CurveSource::File { path: base.join(keys.req_str("curve.path")?) },
            other => return Err(ConfigError::invalid("curve.kind", format!("unknown curve kind `{other}`"))),
        };
        let output_dir = base.join(keys.opt_str("output.dir")?.unwrap_or_else(|| "out".into()));

        if let Some(extra) = keys.map.keys().next() {
            return Err(ConfigError::Unknown(extra.clone()));
        }
        Ok(Self { spec, flow, curve, nodes, output_dir })
    }

    /// Builds the initial curve; non-circles are resampled to equal chords.
    pub fn initial_curve(&self) -> Result<DiscreteCurve, ConfigError> {
        let dim = self.spec.dim();
        let n = self.nodes;
        let wrap = |key: &'static str| move |e: crate::Error| ConfigError::invalid(key, e.to_string());
        match &self.curve {
            CurveSource::Circle { rho, center, plane } => {
                circle_builder(*rho, center, *plane, dim, n).map_err(wrap("curve"))
            }
            CurveSource::Ellipse { a, b } => {
                let raw = ellipse(*a, *b, dim, n.max(64) * 4).map_err(wrap("curve"))?;
                resample_uniform(&raw, n).map_err(wrap("curve"))
            }
            CurveSource::Fourier { modes, amplitude, seed } => {
                let raw = fourier_curve(dim, n.max(64) * 4, *modes, *amplitude, *seed).map_err(wrap("curve"))?;
                resample_uniform(&raw, n).map_err(wrap("curve"))
            }
            CurveSource::File { path } => {
                let file = std::fs::File::open(path).map_err(|e| ConfigError::invalid("curve.path", e.to_string()))?;
                let raw = DiscreteCurve::read_csv(std::io::BufReader::new(file)).map_err(wrap("curve.path"))?;
                if raw.dim() != dim {
                    return Err(ConfigError::invalid("curve.path", format!("curve has dimension {}, ambient {dim}", raw.dim())));
                }
                resample_uniform(&raw, n).map_err(wrap("curve.path"))
            }
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, Value>) {
    match v {
        Value::Table(t) => {
            for (k, sub) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, sub, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

/// Consumes keys as they are read so leftovers can be reported.
#[derive(Default)]
struct Keys {
    map: BTreeMap<String, Value>,
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl Keys {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.map.remove(key)
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.take(key).map(|v| as_f64(&v).ok_or_else(|| ConfigError::invalid(key, "expected a number"))).transpose()
    }

    fn req_f64(&mut self, key: &str) -> Result<f64, ConfigError> {
        self.opt_f64(key)?.ok_or_else(|| ConfigError::Missing(key.into()))
    }

    fn opt_usize(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.take(key)
            .map(|v| match v {
                Value::Integer(i) if i >= 0 => Ok(i as usize),
                _ => Err(ConfigError::invalid(key, "expected a non-negative integer")),
            })
            .transpose()
    }

    fn req_usize(&mut self, key: &str) -> Result<usize, ConfigError> {
        self.opt_usize(key)?.ok_or_else(|| ConfigError::Missing(key.into()))
    }

    fn opt_str(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        self.take(key)
            .map(|v| match v {
                Value::String(s) => Ok(s),
                _ => Err(ConfigError::invalid(key, "expected a string")),
            })
            .transpose()
    }

    fn req_str(&mut self, key: &str) -> Result<String, ConfigError> {
        self.opt_str(key)?.ok_or_else(|| ConfigError::Missing(key.into()))
    }

    fn opt_vec(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.take(key).map(|v| number_list(&v).ok_or_else(|| ConfigError::invalid(key, "expected an array of numbers"))).transpose()
    }

    fn req_matrix(&mut self, key: &str) -> Result<DMatrix<f64>, ConfigError> {
        let v = self.take(key).ok_or_else(|| ConfigError::Missing(key.into()))?;
        let bad = || ConfigError::invalid(key, "expected a square array of number arrays");
        let rows: Vec<Vec<f64>> = match &v {
            Value::Array(rows) => rows.iter().map(number_list).collect::<Option<_>>().ok_or_else(bad)?,
            _ => return Err(bad()),
        };
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(bad());
        }
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

fn number_list(v: &Value) -> Option<Vec<f64>> {
    match v {
        Value::Array(items) => items.iter().map(as_f64).collect(),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
lambda = 0.5
ambient.L = [[0, 0], [0, 0]]
ambient.f.kind = "constant"
ambient.f.c0 = 0.0
curve.kind = "circle"
curve.N = 64
curve.rho = 2.0
flow.dt = 0.01
flow.t_max = 1.0
"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = RunConfig::parse(BASE, Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.spec.lambda, 0.5);
        assert_eq!(cfg.nodes, 64);
        assert_eq!(cfg.flow.integrator, Integrator::ImexEuler);
        assert_eq!(cfg.output_dir, Path::new("/tmp/x/out"));
        assert_eq!(cfg.initial_curve().unwrap().len(), 64);
    }

    #[test]
    fn names_the_offending_key() {
        let err = RunConfig::parse(&BASE.replace("lambda = 0.5\n", ""), Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("`lambda`"), "{err}");
        let err = RunConfig::parse(&BASE.replace("lambda = 0.5", "lambda = -1.0"), Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("`lambda`"), "{err}");
        let err = RunConfig::parse(&format!("{BASE}\nflow.bogus = 1\n"), Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("flow.bogus"), "{err}");
        let err = RunConfig::parse(&BASE.replace("[[0, 0], [0, 0]]", "[[0, 0], [0]]"), Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("ambient.L"), "{err}");
    }
}
