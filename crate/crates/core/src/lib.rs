//! Simulation and small-signal stability workbench for a single grid-connected
//! inverter against an infinite bus.
//!
//! Four control modes are modeled in the controller dq frame:
//!
//! - **GFM (droop)** — dual-loop voltage control on both axes, P–ω droop
//!   synchronization (voltage source behavior).
//! - **GFL (PLL)** — current control on both axes, PLL synchronization
//!   (current source behavior).
//! - **Hybrid (droop)** and **Hybrid (PLL)** — dual-loop voltage control on
//!   the d-axis only, current control on the q-axis, under either
//!   synchronization scheme.
//!
//! The crate provides the closed-loop nonlinear ODE model, a damped-Newton
//! equilibrium solver, numerical linearization with a dense eigensolver for
//! pole maps over line-impedance sweeps, dq port-admittance frequency scans,
//! and a fixed-step RK4 simulator with SCR step events plus spectral
//! post-processing of the resulting traces.
//!
//! All numerics are generic over the scalar type through [`Real`]; concrete
//! `f64` aliases for the main types live at the crate root.

pub mod blocks;
pub mod equilibrium;
pub mod error;
pub mod linalg;
pub mod params;
pub mod plant;
pub mod smallsignal;
pub mod spectrum;
pub mod timedomain;

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

pub use error::Error;

/// Scalar type the whole workbench is generic over: `f32`, `f64`, or any
/// other IEEE-like float exposing the `num-traits` surface below.
pub trait Real:
    Float + FloatConst + NumAssign + FromPrimitive + Debug + Display + 'static
{
    /// Lift an `f64` literal (table constant, tolerance) into `Self`.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }
}

impl<T> Real for T where
    T: Float + FloatConst + NumAssign + FromPrimitive + Debug + Display + 'static
{
}

pub type Complex<T> = num_complex::Complex<T>;

// Concrete f64 aliases for the types most callers touch.
pub type Bases64 = params::Bases<f64>;
pub type SystemParams64 = params::SystemParams<f64>;
pub type ControlParams64 = params::ControlParams<f64>;
pub type NonlinearModel64 = plant::NonlinearModel<f64>;
pub type SignalSet64 = plant::SignalSet<f64>;
pub type Equilibrium64 = equilibrium::Equilibrium<f64>;
pub type OperatingTarget64 = equilibrium::OperatingTarget<f64>;
pub type LinearModel64 = smallsignal::LinearModel<f64>;
pub type PoleMap64 = smallsignal::PoleMap<f64>;
pub type AdmittanceResponse64 = smallsignal::AdmittanceResponse<f64>;
pub type ModeInfo64 = smallsignal::ModeInfo<f64>;
pub type SimConfig64 = timedomain::SimConfig<f64>;
pub type SimTrace64 = timedomain::SimTrace<f64>;
pub type OscillationMetrics64 = timedomain::OscillationMetrics<f64>;
