//! Flat `key=value` run configuration.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::flow::{IntegratorConfig, Method};
use crate::symplectic::Vec4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    PlotData,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "plot-data" => Ok(Self::PlotData),
            _ => Err(Error::Config(format!("unknown format {s:?}"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::PlotData => "plot-data",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub operation: String,
    pub system: String,
    pub t: f64,
    pub dt: f64,
    pub method: Method,
    pub energy_tol: f64,
    pub m: u32,
    pub m_max: u32,
    pub n: usize,
    pub seed: u64,
    pub energy: f64,
    pub y0: Vec4,
    /// Half-width of the sampling box around `y0`.
    pub half_width: f64,
    pub alpha: f64,
    pub r: f64,
    pub nu: f64,
    pub epsilon: f64,
    pub grid: usize,
    pub radius: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub delta: f64,
    pub alpha0: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ic = IntegratorConfig::default();
        Self {
            operation: String::new(),
            system: "hyperbolic-drift".into(),
            t: 50.0,
            dt: ic.dt,
            method: ic.method,
            energy_tol: ic.energy_tol,
            m: 1,
            m_max: 10,
            n: 100,
            seed: 0,
            energy: 0.0,
            y0: Vec4::zeros(),
            half_width: 1.0,
            alpha: 0.01,
            r: 0.1,
            nu: 0.5,
            epsilon: 0.5,
            grid: 1296,
            radius: 0.05,
            kappa: 0.1,
            gamma: 1e-3,
            delta: 0.2,
            alpha0: FRAC_PI_2,
            out: None,
            format: Format::Csv,
        }
    }
}

pub const KEYS: [&str; 25] = [
    "operation", "system", "t", "dt", "method", "energy_tol", "m", "m_max", "n", "seed", "energy", "y0", "half_width",
    "alpha", "r", "nu", "epsilon", "grid", "radius", "kappa", "gamma", "delta", "alpha0", "out", "format",
];

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
}

pub fn parse_vec4(key: &str, v: &str) -> Result<Vec4> {
    let parts: Vec<f64> = v.split(',').map(|p| parse(key, p)).collect::<Result<_>>()?;
    if parts.len() != 4 {
        return Err(Error::Config(format!("{key} needs four comma-separated numbers")));
    }
    Ok(Vec4::from_column_slice(&parts))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "operation" => self.operation = v.to_string(),
            "system" => self.system = v.to_string(),
            "t" => self.t = parse(key, v)?,
            "dt" => self.dt = parse(key, v)?,
            "method" => self.method = v.parse().map_err(|_| Error::Config(format!("unknown method {v:?}")))?,
            "energy_tol" => self.energy_tol = parse(key, v)?,
            "m" => self.m = parse(key, v)?,
            "m_max" => self.m_max = parse(key, v)?,
            "n" => self.n = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "energy" => self.energy = parse(key, v)?,
            "y0" => self.y0 = parse_vec4(key, v)?,
            "half_width" => self.half_width = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "r" => self.r = parse(key, v)?,
            "nu" => self.nu = parse(key, v)?,
            "epsilon" => self.epsilon = parse(key, v)?,
            "grid" => self.grid = parse(key, v)?,
            "radius" => self.radius = parse(key, v)?,
            "kappa" => self.kappa = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "delta" => self.delta = parse(key, v)?,
            "alpha0" => self.alpha0 = parse(key, v)?,
            "out" => self.out = (!v.is_empty()).then(|| PathBuf::from(v)),
            "format" => self.format = v.parse()?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            cfg.set(k.trim(), v)?;
        }
        Ok(cfg)
    }

    /// Reals are written in shortest round-trip form, so `from_text(to_text())`
    /// is the identity.
    pub fn to_text(&self) -> String {
        let y = &self.y0;
        let mut s = String::new();
        let mut put = |k: &str, v: String| s.push_str(&format!("{k}={v}\n"));
        put("operation", self.operation.clone());
        put("system", self.system.clone());
        put("t", format!("{:?}", self.t));
        put("dt", format!("{:?}", self.dt));
        put("method", self.method.to_string());
        put("energy_tol", format!("{:?}", self.energy_tol));
        put("m", self.m.to_string());
        put("m_max", self.m_max.to_string());
        put("n", self.n.to_string());
        put("seed", self.seed.to_string());
        put("energy", format!("{:?}", self.energy));
        put("y0", format!("{:?},{:?},{:?},{:?}", y[0], y[1], y[2], y[3]));
        put("half_width", format!("{:?}", self.half_width));
        put("alpha", format!("{:?}", self.alpha));
        put("r", format!("{:?}", self.r));
        put("nu", format!("{:?}", self.nu));
        put("epsilon", format!("{:?}", self.epsilon));
        put("grid", self.grid.to_string());
        put("radius", format!("{:?}", self.radius));
        put("kappa", format!("{:?}", self.kappa));
        put("gamma", format!("{:?}", self.gamma));
        put("delta", format!("{:?}", self.delta));
        put("alpha0", format!("{:?}", self.alpha0));
        put("out", self.out.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        put("format", self.format.to_string());
        s
    }

    pub fn integrator(&self) -> Result<IntegratorConfig> {
        let cfg = IntegratorConfig { dt: self.dt, method: self.method, energy_tol: self.energy_tol, ..IntegratorConfig::default() };
        cfg.validate()?;
        Ok(cfg)
    }
}
