use std::path::PathBuf;

use clap::{Args, ValueEnum};
use image::GrayImage;
use ndarray::{ArrayView2, Axis};
use slicesim_core::{IntensityDomain, Volume};

use super::{create_parent, file_stem, load, Context};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Plane {
    Axial,
    Coronal,
    Sagittal,
}

impl Plane {
    fn axis(self) -> Axis {
        match self {
            Plane::Axial => Axis(0),
            Plane::Coronal => Axis(1),
            Plane::Sagittal => Axis(2),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Plane::Axial => "axial",
            Plane::Coronal => "coronal",
            Plane::Sagittal => "sagittal",
        }
    }
}

#[derive(Args)]
pub struct SnapshotArgs {
    /// Volume to render.
    #[arg(long)]
    input: PathBuf,
    /// Directory receiving the PNG files.
    #[arg(long)]
    output_dir: PathBuf,
    /// Render a single plane instead of all three centre planes.
    #[arg(long, value_enum)]
    plane: Option<Plane>,
    /// Slice index along the plane normal (defaults to the centre).
    #[arg(long, requires = "plane")]
    index: Option<usize>,
}

pub fn run(ctx: &Context, args: SnapshotArgs) -> CliResult {
    let volume = load(&args.input)?;
    let planes = match args.plane {
        Some(p) => vec![p],
        None => vec![Plane::Axial, Plane::Coronal, Plane::Sagittal],
    };
    let (lo, hi) = match volume.intensity_domain() {
        IntensityDomain::Hu => (ctx.hu_window.lo_hu(), ctx.hu_window.hi_hu()),
        IntensityDomain::Normalized01 => (0.0, 1.0),
    };
    let stem = file_stem(&args.input);
    for plane in planes {
        let len = volume.voxels().len_of(plane.axis());
        let index = args.index.unwrap_or(len / 2);
        if index >= len {
            return Err(CliError::Usage(format!(
                "--index {index} out of range for {} plane with {len} positions",
                plane.name()
            )));
        }
        let name = match args.index {
            Some(i) => format!("{stem}_{}_{i}.png", plane.name()),
            None => format!("{stem}_{}.png", plane.name()),
        };
        let path = args.output_dir.join(name);
        create_parent(&path)?;
        render(&volume, plane, index, lo, hi)
            .save(&path)
            .map_err(|e| CliError::io(&path, e))?;
        println!("{}", path.display());
    }
    Ok(())
}

/// Grayscale image of one plane; rows of coronal and sagittal views follow slice order.
fn render(volume: &Volume, plane: Plane, index: usize, lo: f64, hi: f64) -> GrayImage {
    let view: ArrayView2<f32> = volume.voxels().index_axis(plane.axis(), index);
    let (rows, cols) = view.dim();
    GrayImage::from_fn(cols as u32, rows as u32, |x, y| {
        let v = view[[y as usize, x as usize]] as f64;
        let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        image::Luma([(t * 255.0).round() as u8])
    })
}
