pub mod evalstats;
pub mod generate;
pub mod selftrain;
pub mod train;
pub mod validate;
