use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use vidspeech::dataio::{load_frames, make_context_clips, save_wav, AudioFrontend};
use vidspeech::dsp::MelFilterbank;
use vidspeech::model::{generate as sample, load_checkpoint, FrameClip, ModelParams};
use vidspeech::rng::derive_seed;
use vidspeech::Matrix;

use crate::error::{io_error, CliError, CliResult};
use crate::manifest::{parent_dir, RunManifest};
use crate::melimage::save_mel_image;

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Directory of `000001.png ...` frames.
    #[arg(long)]
    frames: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output WAV.
    #[arg(long)]
    out: PathBuf,
    /// Mel image; defaults to the output path with a `.png` extension.
    #[arg(long)]
    png: Option<PathBuf>,
    /// Griffin-Lim iterations.
    #[arg(long, default_value_t = 60)]
    iters: usize,
}

#[derive(Args)]
pub struct DiversityArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    frames: PathBuf,
    /// Number of samples (at least 2).
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Base seed; sample `i` uses a seed derived from it and `i`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for `sample_XX.wav` and `pairwise.csv`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 60)]
    iters: usize,
}

struct Loaded {
    params: ModelParams,
    frontend: AudioFrontend,
    filterbank: MelFilterbank,
    clips: Vec<FrameClip>,
}

fn load_inputs(checkpoint: &Path, frames_dir: &Path) -> CliResult<Loaded> {
    let ckpt = load_checkpoint(checkpoint)?;
    let frontend = ckpt.frontend.ok_or_else(|| {
        CliError::Data(format!(
            "{} records no audio front end; cannot synthesize waveforms",
            checkpoint.display()
        ))
    })?;
    let frames = load_frames(frames_dir)?;
    let d = &ckpt.params.dims;
    let f = &frames[0];
    if (f.height, f.width, f.channels) != (d.frame_height, d.frame_width, d.frame_channels) {
        return Err(CliError::Data(format!(
            "frames in {} are {}x{}x{} (HxWxC) but the checkpoint expects {}x{}x{}",
            frames_dir.display(),
            f.height,
            f.width,
            f.channels,
            d.frame_height,
            d.frame_width,
            d.frame_channels
        )));
    }
    let clips = make_context_clips(&frames, d.context_frames)?;
    Ok(Loaded {
        filterbank: frontend.features.filterbank()?,
        params: ckpt.params,
        frontend,
        clips,
    })
}

/// Features and waveform for one seed.
fn render(l: &Loaded, seed: u64, iters: usize) -> CliResult<(Matrix, vidspeech::dsp::Waveform)> {
    let audio = sample(&l.params, &l.clips, seed)?;
    let wav = l
        .frontend
        .synthesize(&audio, &l.filterbank, iters, derive_seed(seed, &[0x91]))?;
    Ok((audio, wav))
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    let dir = parent_dir(path);
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))
}

pub fn generate(args: GenerateArgs) -> CliResult<()> {
    let started = Instant::now();
    let l = load_inputs(&args.checkpoint, &args.frames)?;
    let (audio, wav) = render(&l, args.seed, args.iters)?;
    ensure_parent(&args.out)?;
    save_wav(&wav, &args.out)?;
    let png = args.png.clone().unwrap_or_else(|| args.out.with_extension("png"));
    save_mel_image(&l.frontend.ungroup(&audio)?.frames, &png)?;
    println!("wrote {} and {}", args.out.display(), png.display());

    let config = serde_json::json!({ "frames": args.frames, "iters": args.iters });
    let mut m = RunManifest::new("generate", config, args.seed);
    m.checkpoint = Some(args.checkpoint.clone());
    m.outputs = vec![args.out.clone(), png];
    m.append(&parent_dir(&args.out), started)
}

fn l2(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Pairwise L2 distances between generated feature matrices, `(i, j, d)`
/// for `i < j`.
pub fn pairwise_distances(samples: &[Matrix]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            out.push((i, j, l2(&samples[i], &samples[j])));
        }
    }
    out
}

pub fn diversity(args: DiversityArgs) -> CliResult<()> {
    let started = Instant::now();
    if args.n < 2 {
        return Err(CliError::Usage(format!("diversity needs at least 2 samples, got {}", args.n)));
    }
    let l = load_inputs(&args.checkpoint, &args.frames)?;
    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let mut features = Vec::with_capacity(args.n);
    let mut outputs = Vec::with_capacity(args.n + 1);
    for i in 0..args.n {
        let (audio, wav) = render(&l, derive_seed(args.seed, &[i as u64]), args.iters)?;
        let path = args.out.join(format!("sample_{i:02}.wav"));
        save_wav(&wav, &path)?;
        outputs.push(path);
        features.push(audio);
    }

    let pairs = pairwise_distances(&features);
    let ds: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let min = ds.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = ds.iter().sum::<f64>() / ds.len() as f64;
    let mut csv = String::from("a,b,mel_l2\n");
    for (i, j, d) in &pairs {
        csv.push_str(&format!("{i},{j},{d:.6}\n"));
    }
    csv.push_str(&format!("MIN,,{min:.6}\nMEAN,,{mean:.6}\nMAX,,{max:.6}\n"));
    let csv_path = args.out.join("pairwise.csv");
    let mut f = fs::File::create(&csv_path).map_err(|e| io_error(&csv_path, e))?;
    f.write_all(csv.as_bytes()).map_err(|e| io_error(&csv_path, e))?;
    outputs.push(csv_path);
    println!("{} samples, pairwise mel L2 min {min:.4} mean {mean:.4} max {max:.4}", args.n);

    let config = serde_json::json!({ "frames": args.frames, "iters": args.iters, "n": args.n });
    let mut m = RunManifest::new("diversity", config, args.seed);
    m.checkpoint = Some(args.checkpoint.clone());
    m.outputs = outputs;
    m.append(&args.out, started)
}
