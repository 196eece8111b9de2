#![allow(dead_code)]

pub mod lp_suite;
pub mod nets;
