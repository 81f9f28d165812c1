//! Every chapter of the guide is compiled as a rustdoc page so that its
//! `rust` listings run under `cargo test --doc`. One module per chapter keeps
//! failures attributable.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/geometry.md")]
pub mod geometry {}
#[doc = include_str!("src/scene.md")]
pub mod scene {}
#[doc = include_str!("src/affordance.md")]
pub mod affordance {}
#[doc = include_str!("src/planning.md")]
pub mod planning {}
#[doc = include_str!("src/agent.md")]
pub mod agent {}
#[doc = include_str!("src/control.md")]
pub mod control {}
#[doc = include_str!("src/running.md")]
pub mod running {}
#[doc = include_str!("src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("src/endpoint.md")]
pub mod endpoint {}
