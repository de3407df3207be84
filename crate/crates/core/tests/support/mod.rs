#![allow(dead_code)]

pub mod dense;
pub mod ecr;
pub mod geweke;
pub mod pairs;
