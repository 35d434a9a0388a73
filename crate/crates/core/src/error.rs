use alloc::string::String;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} outside {allowed}")]
    Domain {
        name: &'static str,
        value: f64,
        allowed: &'static str,
    },
    #[error("spectral parameter hits the free spectrum at k = {k}")]
    Pole { k: f64 },
    #[error("non-finite integrand at quadrature node {node} (k = {k})")]
    Quadrature { node: usize, k: f64 },
    #[error("interaction does not have finite support: {0}")]
    UnsupportedInteraction(String),
    #[error("LS kernel block is singular (condition number {condition:.3e})")]
    SingularKernel { condition: f64 },
    #[error("epsilon extrapolation diverges (successive estimates {first:.3e}, {last:.3e})")]
    Extrapolation { first: f64, last: f64 },
    #[error("centre-of-mass momentum p = {p} is a multiple of pi/2")]
    DegenerateMomentum { p: f64 },
    #[error("no bracketed root for band pair ({s1}, {s2}) at omega = {omega}")]
    RootEnumeration { s1: i8, s2: i8, omega: f64 },
    #[error("stationary point of the dispersion at k = {k} (|d omega/dk| = {slope:.3e})")]
    StationaryPoint { k: f64, slope: f64 },
    #[error("resonance pole: closed-form denominator {denominator:.3e}")]
    ResonancePole { denominator: f64 },
    #[error("model assumption violated: {0}")]
    AssumptionViolation(String),
    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("time sum not converged after {steps} steps (tail bound {tail:.3e})")]
    TimeSumTruncation { steps: usize, tail: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
