use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value while evaluating {0}")]
    Evaluation(&'static str),
    #[error("near-critical point: |grad H| = {grad_norm:e}")]
    Regularity { grad_norm: f64 },
    #[error("no point of the level set found after {attempts} attempts")]
    EmptyLevelSet { attempts: usize },
    #[error("Newton iteration failed at t = {time} after {iterations} iterations")]
    Step { time: f64, iterations: usize },
    #[error("orbit left the domain at t = {time}")]
    Escape { time: f64 },
    #[error("energy drift {drift:e} exceeds tolerance {tol:e}")]
    EnergyDrift { drift: f64, tol: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("frame mismatch (distance {distance:e})")]
    FrameMismatch { distance: f64 },
    #[error("trivial splitting: exponent {exponent:e} below threshold {threshold:e}")]
    TrivialSplitting { exponent: f64, threshold: f64 },
    #[error("empty sample")]
    EmptySample,
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("outside validity region: {0}")]
    Validity(String),
    #[error("certificate violated: {bound} = {value:e} exceeds {limit:e}")]
    Certificate { bound: String, value: f64, limit: f64 },
    #[error("transversality failure: |X_H| = {0:e}")]
    Transversality(f64),
    #[error("chart construction failed: {0}")]
    Chart(String),
    #[error("flowbox overlaps itself (separation {separation:e} < radius {radius:e})")]
    FlowboxOverlap { separation: f64, radius: f64 },
    #[error("schedule error: {0}")]
    Schedule(String),
    #[error("no exchange within the rotation cap (achieved angle {achieved:e}): {reason}")]
    NoExchange { achieved: f64, reason: String },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
