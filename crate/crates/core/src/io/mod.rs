//! File formats and synthetic data.

pub mod config_file;
pub mod factors_dir;
pub mod synth;
pub mod tensor_file;
pub mod trace_csv;

pub use config_file::{parse_config, read_config, render_config};
pub use factors_dir::{read_factors, write_factors};
pub use synth::{synthesize, write_synth};
pub use tensor_file::{read_csv_tensor, read_matrix, read_tensor, write_matrix, write_tensor};
pub use trace_csv::{render_trace, write_trace};
