#![allow(dead_code)]

pub mod descriptors;
pub mod dims;
pub mod gradcheck;
pub mod metric_oracles;
pub mod smiles_gen;
pub mod synthetic;
pub mod training;
