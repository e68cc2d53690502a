//! Analytic safe-basin prediction for a harmonically forced particle in a
//! truncated quartic potential well, verified by brute-force time integration.
//!
//! The library is organized bottom-up:
//!
//! * [`elliptic`] — AGM-based elliptic integrals and Jacobi elliptic functions,
//!   the numerical kernel behind every closed-form expression here.
//! * [`model`] — the potential, Hamiltonian, equations of motion and the two
//!   escape criteria (maximum displacement / maximum energy).
//! * [`action_angle`] — the canonical transform of the unforced well:
//!   energy ↔ action, angle ↔ displacement, and the averaged forcing coupling.
//! * [`slow_flow`] — the reduced flow on the resonance-manifold cylinder
//!   (slow phase γ, averaged energy ξ): first integral, saddle points,
//!   escape mechanisms and critical-force curves.
//! * [`basin`] — analytic safe-basin boundaries on the cylinder, classified by
//!   topology and mapped back to the initial-condition plane.
//! * [`simulate`] — adaptive Runge–Kutta verification harness: escape
//!   detection, critical-force bisection, basin rasters, stroboscopic maps.
//! * [`raster`] — connected-component labeling for basin rasters.
//! * [`io`] — CSV writers/readers for every artifact the tool emits.

pub mod action_angle;
pub mod basin;
pub mod elliptic;
pub mod io;
pub mod model;
pub mod raster;
pub mod simulate;
pub mod slow_flow;
