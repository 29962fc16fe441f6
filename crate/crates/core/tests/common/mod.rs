#![allow(dead_code)]

pub mod grad;
pub mod metrics_oracle;
