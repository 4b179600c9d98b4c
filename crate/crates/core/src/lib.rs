pub mod admm;
pub mod bench;
pub mod dual;
pub mod error;
pub mod farm;
pub mod gradient;
pub mod mlr;
pub mod wake;
