//! Caputo fractional-order predictor-corrector solver and a food-borne
//! disease transmission model with its simulation studies.

pub mod cli;
pub mod experiments;
pub mod fracode;
pub mod model;
pub mod scenario;
pub mod sensitivity;
