//! Machinery for exploring homogeneous bipartite graphs at finite resolution.
//!
//! A bipartite graph here always keeps its two sides separate: left vertices
//! are naturals, right vertices carry finite label sequences. On top of the
//! plain graph type the crate provides
//!
//! * valuation covers in which every partial automorphism of a base graph
//!   extends to a total automorphism ([`cover`]),
//! * an inverse-limit tower of such covers with doubling stages and
//!   automorphism lifting ([`tower`]),
//! * lazy edge oracles (seeded pseudorandom and tower-backed) together with a
//!   deterministic back-and-forth matcher ([`oracle`]),
//! * a splitting engine that separates finitely many automorphisms by signed
//!   conditions and produces incompatibility certificates ([`split`]),
//! * JSON documents and DOT export for interchange ([`io`]).
//!
//! Everything is deterministic: identical inputs produce identical outputs,
//! byte for byte.

pub mod bits;
pub mod cover;
pub mod graph;
pub mod io;
pub mod oracle;
pub mod split;
pub mod tower;

pub use graph::Graph;
