//! On-disk formats: Gaussian-field PLY files, structure-from-motion text
//! directories, georeferenced raster output, and run configuration.

mod config;
mod ply;
mod raster;
mod sfm;

pub use config::{read_config, RunConfig};
pub use ply::{
    read_field, read_field_from, read_field_header, write_field, write_field_to, FieldFileHeader,
};
pub use raster::{
    read_raster, read_world_file, world_file_path, write_raster, write_world_file, WorldFile,
};
pub use sfm::{read_sfm, SfmCamera, SfmImage, SfmPoint, SfmScene};
