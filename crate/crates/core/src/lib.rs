//! Open information extraction with a BIO tagger, hinge-loss confidence
//! calibration and iterative self-training.

pub mod bio;
pub mod corpus;
pub mod decoder;
pub mod dump;
pub mod evaluation;
pub mod learning;
pub mod seed;
pub mod tagger;
pub mod synthetic;
pub mod cli;
