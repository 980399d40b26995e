//! Compiles and runs the code listings of the guide under `book/src` as
//! doctests. One module per chapter so a failure names its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/bundles.md")]
pub mod bundles {}
#[doc = include_str!("../../../book/src/layers.md")]
pub mod layers {}
#[doc = include_str!("../../../book/src/tiering.md")]
pub mod tiering {}
#[doc = include_str!("../../../book/src/routing.md")]
pub mod routing {}
#[doc = include_str!("../../../book/src/contamination.md")]
pub mod contamination {}
#[doc = include_str!("../../../book/src/reporting.md")]
pub mod reporting {}
#[doc = include_str!("../../../book/src/audit.md")]
pub mod audit {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
