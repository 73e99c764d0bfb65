//! Core algorithms for the two-sided multi-species ASEP with long-range jumps
//! on the integer lattice.
//!
//! Particles carry positive integer species labels. A particle jumping right
//! follows the long-range drop-push rule (it lands on the nearest site held by
//! a smaller species, displacing the occupant onward); a particle jumping left
//! follows the multi-species TASEP rule. The crate provides
//!
//! * the exact continuous-time dynamics ([`state`]),
//! * the two-site scattering algebra and its tensor lifts ([`algebra`]),
//! * Bethe amplitude columns built from reduced words ([`bethe`]),
//! * transition probabilities as nested contour integrals ([`contour`]),
//! * a brute-force uniformization oracle ([`oracle`]),
//! * Gillespie trajectory sampling ([`mc`]),
//! * and the algebraic identity suites behind `verify` ([`verify`]).
//!
//! The crate is `no_std` (with `alloc`); all heavy lifting is pure
//! computation. IO, CLI, and file formats live in the companion `masep-cli`
//! crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod algebra;
pub mod bethe;
pub mod contour;
pub mod exec;
pub mod mc;
pub mod oracle;
pub mod state;
pub mod verify;
