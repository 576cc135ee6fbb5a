//! Radial solutions of `-Delta u - lambda u = |u|^{p-1} u` on the Poincare ball.
//!
//! The crate is organised bottom up: [`geometry`] provides the ball model and its
//! isometries, [`radial`] integrates and shoots the radial ODE, [`energy`] evaluates
//! functionals, [`conformal`] maps to the Euclidean picture, [`bubbles`] builds
//! concentrating test functions and [`correspond`] transports solutions to the
//! Hardy-Sobolev-Maz'ya and Grushin problems.

pub mod bubbles;
pub mod conformal;
pub mod correspond;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod ode;
pub mod params;
pub mod quadrature;
pub mod radial;
pub mod scalar;
pub mod tolerances;

pub use error::{Error, Result};
pub use params::{LambdaRegime, Params};
pub use scalar::{Field, Real};

/// Double precision aliases.
pub type Params64 = params::Params<f64>;
pub type DiscPoint64 = geometry::DiscPoint<f64>;
pub type Isometry64 = geometry::Isometry<f64>;
pub type RadialProfile64 = radial::RadialProfile<f64>;
pub type Bubble64 = bubbles::Bubble<f64>;

/// Exact rational parameters used by the correspondence layer.
pub type Rational = num_rational::Ratio<i64>;
pub type RationalParams = params::Params<Rational>;
