//! Runs the code blocks of the guide in `book/` as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[doc = include_str!("../../../book/src/sets.md")]
pub mod sets {}

#[doc = include_str!("../../../book/src/until.md")]
pub mod until {}

#[doc = include_str!("../../../book/src/pctl.md")]
pub mod pctl {}

#[doc = include_str!("../../../book/src/tolerance.md")]
pub mod tolerance {}

#[doc = include_str!("../../../book/src/omega.md")]
pub mod omega {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
