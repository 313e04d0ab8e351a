//! The guide in `book/`, included chapter by chapter so its code blocks run
//! as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/potentials.md")]
pub mod potentials {}

#[doc = include_str!("../../../book/src/characteristic.md")]
pub mod characteristic {}

#[doc = include_str!("../../../book/src/thermodynamics.md")]
pub mod thermodynamics {}

#[doc = include_str!("../../../book/src/quantization.md")]
pub mod quantization {}

#[doc = include_str!("../../../book/src/propagator.md")]
pub mod propagator {}

#[doc = include_str!("../../../book/src/oracle.md")]
pub mod oracle {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../README.md")]
pub mod readme {}
