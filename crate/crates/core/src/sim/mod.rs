//! Bit-exact simulation of packed multiplication.
//!
//! Operands are shifted into two port words, multiplied once as wide
//! integers, optionally accumulated, and decoded segment by segment. Every
//! decoded lane is checked against plain integer products.

mod decode;
mod engine;
mod verify;
mod word;

pub use decode::{decode, overpack_correct, DecodedLanes};
pub use engine::{simulate_choice, simulate_filter, simulate_filter_rows, simulate_kernel, simulate_kernel_acc};
pub use verify::{
    verify_choice, Counterexample, SamplePolicy, ScheduleContext, VerificationMode, VerificationReport, DEFAULT_SEED,
};
pub use word::{encode, PackedWord};
