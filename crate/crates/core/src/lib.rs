pub mod bie;
pub mod classify;
pub mod curve;
pub mod error;
pub mod flow;
pub mod moments;
pub mod operator;
pub mod radial;
pub mod schedule;
pub mod spectral;
