//! Multi-agent ideation engine with trajectory analytics and creativity scoring.

pub mod corpus;
pub mod embedding;
pub mod gateway;
pub mod matrix;
pub mod protocol;
pub mod runner;
pub mod stats;
pub mod trajectory;
