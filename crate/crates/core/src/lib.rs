//! Packing of low-precision multiplications into wide FPGA multipliers,
//! bit-exact verification of each packing, throughput lookup tables, and
//! the resource allocator that consumes them.

pub mod alloc;
pub mod error;
pub mod exec;
pub mod network;
pub mod packing;
pub mod profile;
pub mod sim;
pub mod table;

pub use error::{Error, Result};
