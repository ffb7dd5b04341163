use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use fundus_mosaic::glare::{detect_glare, glare_measure};
use fundus_mosaic::imgcore::{Frame, GrayImage};
use fundus_mosaic::io;
use fundus_mosaic::phantom::{generate, PhantomConfig};
use fundus_mosaic::pipeline::{analyze_frame, frame_ga_config, run, Config, FrameAnalysis};
use fundus_mosaic::registration::register;
use fundus_mosaic::roi::{detect_roi, CanonicalEllipse};
use fundus_mosaic::vesselness::VesselnessMap;
use fundus_mosaic::Error;

#[derive(Parser)]
#[command(name = "fundus-mosaic", version, about = "Stitch narrow-field fundus video frames into a mosaic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline over a directory of PNG frames.
    Stitch {
        /// Directory of frames, processed in file-name order.
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Also write the blend weight map as a 16-bit PNG.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Write per-frame ROI, glare and vesselness images here.
        #[arg(long)]
        dump_intermediates: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit the aperture ellipse of one frame.
    Roi {
        frame: PathBuf,
        /// Overlay PNG with the fitted ellipse drawn in.
        #[arg(long)]
        overlay: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Detect glare in one frame.
    Glare {
        frame: PathBuf,
        /// Output directory for g.png, mask.png and preview.png.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compute the vesselness map of one frame.
    Vessel {
        frame: PathBuf,
        /// 16-bit PNG of the vesselness values.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Register one frame against another.
    Register {
        /// Frame to be placed.
        frame: PathBuf,
        /// Frame whose coordinates the result is expressed in.
        reference: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic sequence with ground truth.
    Phantom {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(common: &Common) -> Result<Config> {
    let mut config: Config = match &common.config {
        Some(path) => io::read_json(path).with_context(|| format!("reading config {}", path.display()))?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn load(path: &Path) -> Result<Frame> {
    io::load_frame(path, 0).with_context(|| format!("reading frame {}", path.display()))
}

fn analyze(frame: &Frame, config: &Config) -> Result<FrameAnalysis<f64>> {
    analyze_frame(frame, config)
        .map_err(|f| anyhow::Error::new(f.error).context(format!("frame rejected ({:?})", f.status)))
}

fn vessel_u16(map: &VesselnessMap<f64>) -> Vec<u16> {
    let (w, h) = map.dims();
    (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| if map.valid.get(x, y) { (map.get(x, y).clamp(0.0, 1.0) * 65535.0).round() as u16 } else { 0 })
        .collect()
}

fn draw_ellipse(frame: &Frame, ellipse: &CanonicalEllipse<f64>) -> Frame {
    let mut out = frame.clone();
    let (w, h) = frame.dims();
    let steps = (8.0 * (ellipse.a + ellipse.b)).ceil() as usize;
    for k in 0..steps {
        let [x, y] = ellipse.point_at(std::f64::consts::TAU * k as f64 / steps as f64);
        let (x, y) = (x.round(), y.round());
        if x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h {
            *out.pixel_mut(x as usize, y as usize) = [0, 255, 0];
        }
    }
    out
}

fn stitch(
    frames_dir: &Path,
    out: &Path,
    report_path: &Path,
    weights: Option<&Path>,
    dump: Option<&Path>,
    config: &Config,
) -> Result<()> {
    let frames =
        io::load_frames(frames_dir).with_context(|| format!("reading frames from {}", frames_dir.display()))?;
    log::info!("{} frames", frames.len());
    let output = run::<f64>(&frames, config)?;
    io::save_frame(&output.mosaic.to_frame()?, out).with_context(|| format!("writing {}", out.display()))?;
    io::write_json(&output.report(config), report_path)
        .with_context(|| format!("writing {}", report_path.display()))?;
    if let Some(path) = weights {
        let (w, h) = output.mosaic.dims();
        io::save_gray16(&output.mosaic.weight_map_u16(), w, h, path)?;
    }
    if let Some(dir) = dump {
        fs::create_dir_all(dir)?;
        for (i, a) in output.analyses.iter().enumerate() {
            let Some(a) = a else { continue };
            io::save_mask(&a.roi.mask, &dir.join(format!("frame_{i:04}_roi.png")))?;
            io::save_mask(&a.glare, &dir.join(format!("frame_{i:04}_glare.png")))?;
            let (w, h) = a.vessels.dims();
            io::save_gray16(&vessel_u16(&a.vessels), w, h, &dir.join(format!("frame_{i:04}_vessel.png")))?;
        }
    }
    let used = output.reports.iter().filter(|r| r.transform.is_some()).count();
    log::info!("start frame {}, {used} of {} frames used", output.start_index, frames.len());
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stitch { frames, out, report, weights, dump_intermediates, common } => {
            let config = load_config(&common)?;
            stitch(&frames, &out, &report, weights.as_deref(), dump_intermediates.as_deref(), &config)
        }
        Command::Roi { frame, overlay, common } => {
            let config = load_config(&common)?;
            let f = load(&frame)?;
            let roi = detect_roi::<f64>(&f, &frame_ga_config(&f, &config))?;
            let e = roi.ellipse;
            io::save_frame(&draw_ellipse(&f, &e), &overlay)?;
            println!(
                "{}",
                json!({"a": e.a, "b": e.b, "x0": e.x0, "y0": e.y0, "theta": e.theta, "fitness": roi.fitness})
            );
            Ok(())
        }
        Command::Glare { frame, out, common } => {
            let config = load_config(&common)?;
            let f = load(&frame)?;
            let roi = detect_roi::<f64>(&f, &frame_ga_config(&f, &config))?;
            let mask = detect_glare(&f, &roi.mask, &config.glare)?;
            fs::create_dir_all(&out)?;
            let g: GrayImage<f64> = glare_measure(&f);
            let g8 = Frame::from_fn(g.width, g.height, 0, |x, y| [g.get(x, y).round().clamp(0.0, 255.0) as u8; 3])?;
            io::save_frame(&g8, &out.join("g.png"))?;
            io::save_mask(&mask, &out.join("mask.png"))?;
            let preview =
                Frame::from_fn(f.width(), f.height(), 0, |x, y| if mask.get(x, y) { [0; 3] } else { f.pixel(x, y) })?;
            io::save_frame(&preview, &out.join("preview.png"))?;
            println!("{}", json!({"glare_pixels": mask.count()}));
            Ok(())
        }
        Command::Vessel { frame, out, common } => {
            let config = load_config(&common)?;
            let a = analyze(&load(&frame)?, &config)?;
            let (w, h) = a.vessels.dims();
            io::save_gray16(&vessel_u16(&a.vessels), w, h, &out)?;
            println!("{}", a.entropy);
            Ok(())
        }
        Command::Register { frame, reference, common } => {
            let config = load_config(&common)?;
            let a = analyze(&load(&frame)?, &config)?;
            let b = analyze(&load(&reference)?, &config)?;
            let r = register(&a.vessels, &b.vessels, &config.search)?;
            let t = r.transform;
            println!(
                "{}",
                json!({"scale": t.scale, "tx": t.tx, "ty": t.ty, "score": r.score, "second_score": r.second_score, "accepted": r.accepted})
            );
            Ok(())
        }
        Command::Phantom { config, out, seed } => {
            let mut pc: PhantomConfig = match &config {
                Some(path) => io::read_json(path).with_context(|| format!("reading config {}", path.display()))?,
                None => PhantomConfig::default(),
            };
            if let Some(seed) = seed {
                pc.seed = seed;
            }
            let (frames, truth) = generate(&pc)?;
            fs::create_dir_all(&out)?;
            io::write_phantom(&out, &pc, &frames, &truth)?;
            log::info!("wrote {} frames to {}", frames.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if matches!(e.downcast_ref::<Error>(), Some(Error::NoUsableFrames)) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
