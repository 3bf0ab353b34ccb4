use thiserror::Error;

pub type Result<T> = std::result::Result<T, DpError>;

/// Errors surfaced by the solver and its diagnostics.
#[derive(Debug, Error)]
pub enum DpError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("field values are not finite at t = {t}")]
    NonFinite { t: f64 },

    #[error(
        "field magnitude {magnitude:.3e} at x = {x:.3} exceeds the edge tolerance {tol:.1e}; \
         the periodic box is too small for this datum"
    )]
    DomainTooSmall { x: f64, magnitude: f64, tol: f64 },

    #[error("blow-up detected at t = {t:.6}: min u_x = {min_ux:.3e} at x = {x:.4}")]
    BlowUpDetected { t: f64, x: f64, min_ux: f64 },

    #[error("characteristic left the trusted interior at t = {t:.6} (q = {q:.3})")]
    FlowEscaped { t: f64, q: f64 },

    #[error("wedge density vanishes everywhere above the mask threshold")]
    DegenerateEverywhere,

    #[error("second fundamental form has an empty validity interval (sigma = {sigma}, b0 = {b0})")]
    NoImmersionDomain { sigma: f64, b0: f64 },

    #[error("immersion domain boundary reached at x = {x:.4} (discriminant {delta:.3e})")]
    ImmersionBoundary { x: f64, delta: f64 },

    #[error("pseudo-potential pole detected at x = {x:.6}")]
    PoleDetected { x: f64 },

    #[error("blow-up certificate invalid: {reason}")]
    CertificateInvalid { reason: String },

    #[error("no snapshot stored at t = {t}")]
    NoSuchSnapshot { t: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
