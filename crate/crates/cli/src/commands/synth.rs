use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use vidspeech::dataio::{generate_synthetic, write_dataset};

use crate::config;
use crate::error::CliResult;
use crate::manifest::RunManifest;

#[derive(Args)]
pub struct SynthArgs {
    /// Flat TOML file with synthetic-task keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset root to create.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_sequences: Option<usize>,
    #[arg(long)]
    seq_length: Option<usize>,
    #[arg(long)]
    modes_per_input: Option<usize>,
    #[arg(long)]
    image_height: Option<usize>,
    #[arg(long)]
    image_width: Option<usize>,
    #[arg(long)]
    noise_level: Option<f64>,
}

pub fn synth(args: SynthArgs) -> CliResult<()> {
    let started = Instant::now();
    let mut cfg = config::load_synth(args.config.as_deref())?;
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = args.$f { cfg.$f = v; })* };
    }
    set!(seed, n_sequences, seq_length, modes_per_input, image_height, image_width, noise_level);
    let ds = generate_synthetic(&cfg)?;
    write_dataset(&args.out, &ds)?;
    println!("wrote {} sequences to {}", ds.examples.len(), args.out.display());

    let mut m = RunManifest::new("synth", serde_json::to_value(&cfg).expect("config serializes"), cfg.seed);
    m.outputs = ds.examples.iter().map(|e| args.out.join(&e.id)).collect();
    m.append(&args.out, started)
}
