//! Momentum-difficulty training: a per-sample loss bank ranks how hard each
//! sample currently is, RGB-shuffle augmentation is applied with probability
//! `1 − difficulty`, and a binary gate drops samples that are too easy or too
//! hard from the gradient step.
//!
//! Everything runs on a small from-scratch classifier and a synthetic
//! shape-vs-color benchmark; see [`synthdata`].

pub mod augment;
pub mod cli;
pub mod error;
pub mod image;
pub mod lossbank;
pub mod numerics;
pub mod rng;
pub mod scheduler;
pub mod stats;
pub mod synthdata;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
