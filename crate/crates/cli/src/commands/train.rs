use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use vidspeech::dataio::{load_dataset, read_frontend, AudioFrontend, PairedSequence};
use vidspeech::dsp::FeatureConfig;
use vidspeech::model::{save_checkpoint, Checkpoint, ModelParams};
use vidspeech::training;

use crate::config::{self, TrainFile};
use crate::error::{io_error, CliError, CliResult};
use crate::manifest::{parent_dir, RunManifest};

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset root (`<root>/<id>/audio.wav`, `<root>/<id>/frames/`).
    #[arg(long)]
    data: PathBuf,
    /// Flat TOML file with training and model keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint path; rewritten after every epoch.
    #[arg(long)]
    out: PathBuf,
    /// Epoch log (JSON lines); defaults to `<out>.log.jsonl`.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    grad_clip: Option<f64>,
}

/// Per-dimension mean of every audio step in the dataset.
fn mean_frame(data: &[PairedSequence]) -> Vec<f64> {
    let dim = data[0].audio.cols();
    let n: usize = data.iter().map(|s| s.audio.rows()).sum();
    let mut mean = vec![0.0; dim];
    for row in data.iter().flat_map(|s| s.audio.iter_rows()) {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    mean
}

fn default_log_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".log.jsonl");
    out.with_file_name(name)
}

pub fn train(args: TrainArgs) -> CliResult<()> {
    let started = Instant::now();
    let mut file: TrainFile = config::load(args.config.as_deref())?;
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = args.$f { file.$f = v; })* };
    }
    set!(seed, lambda, beta, learning_rate, epochs, batch_size, grad_clip);
    let cfg = file.train_config();
    cfg.validate()?;

    let frontend = read_frontend(&args.data)?.unwrap_or(AudioFrontend {
        features: FeatureConfig::default(),
        fps: 25,
    });
    let data = load_dataset(&args.data, &frontend, file.context_frames)?;
    let clip = &data[0].clips[0];
    let dims = file.dims(data[0].audio.cols(), clip.height, clip.width, clip.channels);
    let mut params = ModelParams::init(dims, file.init_seed)?;
    // start the decoder at the data mean so early epochs fit structure, not offset
    params.set_output_bias(&mean_frame(&data))?;

    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    let log_path = args.log.clone().unwrap_or_else(|| default_log_path(&args.out));
    let log_file = File::create(&log_path).map_err(|e| io_error(&log_path, e))?;
    let mut log = BufWriter::new(log_file);
    let save = |params: &ModelParams| {
        let ckpt = Checkpoint {
            params: params.clone(),
            frontend: Some(frontend),
        };
        save_checkpoint(&args.out, &ckpt)
    };
    save(&params)?;

    println!(
        "training {} parameters on {} sequences for {} epochs",
        params.num_parameters(),
        data.len(),
        cfg.epochs
    );
    let outcome = training::train(&data, params, &cfg, |record, params| {
        writeln!(log, "{}", record.to_json_line())
            .and_then(|_| log.flush())
            .map_err(|e| vidspeech::Error::Io {
                path: log_path.clone(),
                source: e,
            })?;
        let b = &record.breakdown;
        println!(
            "epoch {:>4}  -elbo {:>12.4}  recon {:>12.4}  kl {:>10.4}",
            record.epoch, -b.elbo, b.recon_term, b.kl_term
        );
        save(params)
    });
    let (params, _) = outcome.map_err(|e| match e {
        vidspeech::Error::Diverged { .. } => CliError::Numerical(format!("{e}; last good checkpoint kept at {}", args.out.display())),
        other => other.into(),
    })?;
    save(&params)?;

    let mut m = RunManifest::new("train", serde_json::to_value(&file).expect("config serializes"), cfg.seed);
    m.config["data"] = serde_json::json!(args.data);
    m.checkpoint = Some(args.out.clone());
    m.outputs = vec![args.out.clone(), log_path];
    m.append(&parent_dir(&args.out), started)
}
