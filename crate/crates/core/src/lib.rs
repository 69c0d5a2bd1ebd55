//! Core of a dual-process driving agent.
//!
//! The crate only needs `alloc`: simulation, ground-truth perception, the
//! contrastive scene encoder, the experience memory with its decision loop,
//! Frenet planning with PID tracking, and the episode harness. File formats,
//! network adapters and the command line live in the `dualdrive` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod geometry;
pub mod math;
pub mod sim;
pub mod control;
pub mod dual;
pub mod perceiver;
pub mod token;
pub mod encoder;
pub mod harness;
