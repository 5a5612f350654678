pub mod describe;
pub mod eval;
pub mod keywords;
pub mod mine;
pub mod score;

mod common;
