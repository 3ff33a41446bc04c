//! Guide snippets.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}

#[doc = include_str!("../../../book/src/system-model.md")]
pub mod system_model {}

#[doc = include_str!("../../../book/src/waveform.md")]
pub mod waveform {}

#[doc = include_str!("../../../book/src/radar.md")]
pub mod radar {}

#[doc = include_str!("../../../book/src/precoder.md")]
pub mod precoder {}

#[doc = include_str!("../../../book/src/communication.md")]
pub mod communication {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
