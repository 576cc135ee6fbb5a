//! Numerical tolerances used throughout the crate.

/// Relative tolerance for isometry and distance checks.
pub const GEOMETRY_REL: f64 = 1e-10;
/// Allowed numerical escape of an isometry image from the unit ball.
pub const BALL_ESCAPE: f64 = 1e-12;
/// Points with `|x| > 1 - BOUNDARY_MARGIN` are refused by evaluators.
pub const BOUNDARY_MARGIN: f64 = 1e-8;
/// Tolerance for the orthogonality tests between spheres and planes.
pub const ORTHOGONALITY: f64 = 1e-12;

/// Default relative tolerance of the radial integrator.
pub const ODE_RTOL: f64 = 1e-12;
/// Amplitude below which a trajectory counts as decayed.
pub const DECAY_AMPLITUDE: f64 = 1e-8;
/// Amplitude above which a trajectory counts as blown up.
pub const BLOW_UP: f64 = 1e8;
/// Allowed relative mismatch between the fitted log-slope and `-c(lambda)`.
pub const DECAY_SLOPE_REL: f64 = 0.05;

/// Default relative quadrature tolerance.
pub const QUAD_REL: f64 = 1e-10;

/// Relative tolerance for the Nehari constraint.
pub const NEHARI_REL: f64 = 1e-6;
