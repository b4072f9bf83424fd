pub mod ablate;
pub mod dataset;
pub mod eval;
pub mod simulate;
pub mod train;
