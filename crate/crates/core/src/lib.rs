pub mod agreement;
pub mod audio;
pub mod corpus;
pub mod dsp;
pub mod error;
pub mod features;
pub mod harness;
pub mod nn;
pub mod splits;
pub mod vggb;

pub use error::{Error, Result};
