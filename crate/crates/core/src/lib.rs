pub mod app;
pub mod data;
pub mod eval;
pub mod interp;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod train;
