pub mod cli;
pub mod data;
pub mod eval;
pub mod nets;
pub mod tensor;
pub mod train;
pub mod voxel;
