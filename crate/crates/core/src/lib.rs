//! Numerical laboratory for the boundary dynamics of Fatou components.
//!
//! The crate bundles the machinery needed to experiment with iteration on
//! boundaries of invariant Fatou components at desk scale:
//!
//! * [`geometry`] — extended-plane points, disks, Möbius transformations and
//!   the Koebe distortion constants;
//! * [`maps`] — a fixed catalog of iterated holomorphic maps with closed-form
//!   derivatives, preimage solvers and inverse-branch continuation;
//! * [`rho`] — the punctured conformal metric, separation machinery and the
//!   thin-singular-value checker;
//! * [`harmonic`] — harmonic-measure estimation (exact Riemann pushforward and
//!   walk-on-spheres) with decay-bound validators;
//! * [`inner`] — finite Blaschke products as inner functions of the disk:
//!   Denjoy-Wolff point, Cowen type, circle dynamics and invariant measures;
//! * [`ergodic`] — Lyapunov exponents, Birkhoff averages, first-return maps
//!   and growth diagnostics;
//! * [`pesin`] — backward-orbit sampling, certified inverse-branch towers and
//!   the periodic-boundary-point finder.
//!
//! All Monte-Carlo paths draw from per-trial substreams derived from a
//! `(seed, trial)` pair, so every experiment is reproducible bit-for-bit.

pub mod dd;
pub mod ergodic;
pub mod geometry;
pub mod harmonic;
pub mod inner;
pub mod maps;
pub mod pesin;
pub mod polyroots;
pub mod rho;
pub mod rng;
pub mod shortpath;

pub use geometry::{Disk, MobiusTransform, SpherePoint};
pub use maps::MapSpec;
