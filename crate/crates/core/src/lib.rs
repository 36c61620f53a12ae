pub mod affine;
pub mod codegen;
pub mod deps;
pub mod detect;
pub mod exec;
pub mod frontend;
pub mod ir;
pub mod schedule;
