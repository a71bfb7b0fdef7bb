//! Synthetic sequences from the sparse sequential model, a small grayscale
//! image pipeline, and reconstruction metrics.

pub mod dataset;
pub mod metrics;
pub mod model;
pub mod pgm;

pub use dataset::{generate_dataset, read_dataset, write_dataset, Dataset, DatasetSpec, Split};
pub use metrics::{mse, psnr, psnr_from_mse, sse};
pub use model::{measure, sample_sequence, SequenceSample, SequentialModelSpec};
pub use pgm::{decode_pgm, image_columns, load_image_columns, GrayImage};
