//! Dataset persistence: tensor files, the JSON manifest, the pipeline stages
//! that fill a dataset directory, and PNG export.
//!
//! Directory layout:
//!
//! ```text
//! DIR/manifest.json
//! DIR/samples/<id>/eps.ticn     truth permittivity, 128x128 f32
//! DIR/samples/<id>/sigma.ticn   truth conductivity, 128x128 f32
//! DIR/samples/<id>/clean.ticn   scattered E_z, receivers x samples, f32
//! DIR/samples/<id>/noisy.ticn   clean plus noise, f32
//! ```

pub mod dataset;
pub mod export;
pub mod manifest;
pub mod tensor;

pub use dataset::{evaluate, generate, invert_sample, noise, predicted_eps_path, simulate};
pub use export::export_png;
pub use manifest::{Manifest, SampleEntry, MANIFEST_FILE};
pub use tensor::{read_array, read_tensor, write_tensor, Tensor};
