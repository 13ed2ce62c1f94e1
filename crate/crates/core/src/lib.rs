//! Grounded language learning in a text-adventure world: the GraphWorld
//! engine, Seq2Seq and action-centric learners, simulated annotators, and the
//! Mechanical Turker Descent data-collection protocol.

pub mod graphworld;
pub mod numerics;
pub mod data;
pub mod models;
pub mod annotators;
pub mod mtd;
pub mod eval;
