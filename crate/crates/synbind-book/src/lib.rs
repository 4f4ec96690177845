//! Runs every code block of the book as a doc-test.
//!
//! mdbook renders the chapters but does not compile them against the
//! workspace. Including each chapter as a module doc here makes
//! `cargo test` exercise all of its Rust snippets, so the book cannot
//! drift from the library. One module per chapter keeps failures
//! attributable to the chapter they came from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/bindings.md")]
pub mod bindings {}

#[doc = include_str!("../../../book/src/attention.md")]
pub mod attention {}

#[doc = include_str!("../../../book/src/losses.md")]
pub mod losses {}

#[doc = include_str!("../../../book/src/optimization.md")]
pub mod optimization {}

#[doc = include_str!("../../../book/src/dvmp.md")]
pub mod dvmp {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
