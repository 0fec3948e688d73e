//! Doc-test harness for the guide. Each chapter of `book/src` is attached to
//! a module so that `cargo test --doc` compiles and runs its snippets.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}
#[doc = include_str!("../../../book/src/regimes.md")]
pub mod regimes {}
#[doc = include_str!("../../../book/src/grid.md")]
pub mod grid {}
#[doc = include_str!("../../../book/src/fiber.md")]
pub mod fiber {}
#[doc = include_str!("../../../book/src/extremals.md")]
pub mod extremals {}
#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}
#[doc = include_str!("../../../book/src/sweeps.md")]
pub mod sweeps {}
#[doc = include_str!("../../../book/src/critical.md")]
pub mod critical {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
