pub mod data;
pub mod error;
pub mod instrument;
pub mod model;
pub mod params;
pub mod recurrent;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tensor-tape.md")]
    mod tensor_tape {}
    #[doc = include_str!("../../../book/src/gru.md")]
    mod gru {}
    #[doc = include_str!("../../../book/src/attention.md")]
    mod attention {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/instrumentation.md")]
    mod instrumentation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
