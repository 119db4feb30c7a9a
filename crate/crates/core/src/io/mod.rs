//! File formats: hypercube container, framed model files, RGB images and CSV tables.

mod container;
mod framed;
mod image_io;
mod table;

pub use container::{decode_cube, encode_cube, read_cube, write_cube, CubeHeader};
pub use framed::{read_framed, write_framed};
pub use image_io::{read_rgb, write_rgb};
pub use table::{parse_table, read_line, read_table, write_line, write_table, Table};
