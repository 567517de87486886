//! Unit-penalty balls `|x|^q + |y|^q = 1` with `q = 2 / layer`, written as
//! CSV files; the ball shrinks toward the axes with depth.
//!
//! cargo run --example contours -- [out_dir]

use std::fs::{self, File};
use std::path::PathBuf;

use bnn_tails::penalty::{contour, equal_coordinate_point, layer_exponent};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "contours-out".into()).into();
    fs::create_dir_all(&out)?;
    for layer in [1, 2, 3, 10] {
        let q = layer_exponent(layer);
        let c = contour(q, 1.0, 360)?;
        c.write_csv(File::create(out.join(format!("contour_layer{layer}.csv")))?)?;
        println!(
            "layer {layer:>2}  q = {q:.4}  x = y point {:.5}  max error {:.1e}",
            equal_coordinate_point(q, 1.0),
            c.max_relative_error()
        );
    }
    Ok(())
}
