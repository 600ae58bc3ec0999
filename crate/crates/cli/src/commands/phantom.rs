use std::path::PathBuf;

use clap::Args;
use slicesim_core::io::{write_volume, ElementType};
use slicesim_core::phantom::{uniform_locations, Phantom, PhantomConfig};

use super::{require_positive, Context};
use crate::error::{CliError, CliResult};

#[derive(Args)]
pub struct PhantomArgs {
    /// Root directory; volumes go to `thin/` and `thick/` below it.
    #[arg(long)]
    output_dir: PathBuf,
    /// Seed of the first phantom.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of phantoms (seeds `seed`, `seed + 1`, ...).
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// In-plane size in pixels of 1 mm.
    #[arg(long, default_value_t = 32)]
    size: usize,
    /// Number of thin slices.
    #[arg(long, default_value_t = 40)]
    slices: usize,
    /// Thin slice thickness in mm.
    #[arg(long, default_value_t = 1.0)]
    thin_thickness: f64,
    /// Thin slice increment in mm.
    #[arg(long, default_value_t = 1.0)]
    thin_increment: f64,
    /// True thick slice thickness in mm.
    #[arg(long, default_value_t = 3.0)]
    thickness: f64,
    /// True thick slice increment in mm.
    #[arg(long, default_value_t = 2.0)]
    increment: f64,
    /// Standard deviation of additive noise on both acquisitions.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
}

pub fn run(_ctx: &Context, args: PhantomArgs) -> CliResult {
    for (flag, v) in [
        ("--thin-thickness", args.thin_thickness),
        ("--thin-increment", args.thin_increment),
        ("--thickness", args.thickness),
        ("--increment", args.increment),
    ] {
        require_positive(flag, v)?;
    }
    if args.size == 0 || args.slices < 2 {
        return Err(CliError::Usage(
            "--size must be positive and --slices at least 2".into(),
        ));
    }
    if !(args.noise.is_finite() && args.noise >= 0.0) {
        return Err(CliError::Usage(format!(
            "--noise must be non-negative, got {}",
            args.noise
        )));
    }

    let thin_locs: Vec<f64> = (0..args.slices)
        .map(|k| k as f64 * args.thin_increment)
        .collect();
    let last = thin_locs[thin_locs.len() - 1];
    // Keep true thick slices far enough from the ends that their profile
    // support lies inside the thin stack.
    let margin = (args.thickness / args.increment).ceil() * args.increment;
    let thick_locs = uniform_locations(margin, last - margin, args.increment);
    if thick_locs.is_empty() || margin > last - margin {
        return Err(CliError::Usage(
            "--slices too small for the requested thick geometry".into(),
        ));
    }

    for seed in args.seed..args.seed + args.count {
        let phantom = Phantom::new(PhantomConfig {
            seed,
            dims: (args.size, args.size),
            z_extent_mm: (0.0, last),
            ..PhantomConfig::default()
        });
        let name = format!("phantom_{seed:04}.mha");
        let thin = phantom.acquire_noisy(&thin_locs, args.thin_thickness, args.noise, 1)?;
        let thick = phantom.acquire_noisy(&thick_locs, args.thickness, args.noise, 2)?;
        let thin_path = args.output_dir.join("thin").join(&name);
        let thick_path = args.output_dir.join("thick").join(&name);
        for (path, vol) in [(&thin_path, &thin), (&thick_path, &thick)] {
            super::create_parent(path)?;
            write_volume(vol, path, ElementType::Float32)?;
        }
        println!("{} {}", thin_path.display(), thick_path.display());
    }
    Ok(())
}
