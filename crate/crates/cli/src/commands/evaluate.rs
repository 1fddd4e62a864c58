use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use vidspeech::dataio::load_wav;
use vidspeech::dsp::FeatureConfig;
use vidspeech::metrics::evaluate_batch;

use crate::error::{io_error, CliError, CliResult};
use crate::manifest::{parent_dir, RunManifest};

#[derive(Args)]
pub struct EvaluateArgs {
    /// Directory of reference WAVs.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Directory of generated WAVs with the same file names.
    #[arg(long)]
    hyp: PathBuf,
    /// Report CSV.
    #[arg(long)]
    out: PathBuf,
}

fn wav_names(dir: &Path) -> CliResult<BTreeSet<String>> {
    let entries = fs::read_dir(dir).map_err(|e| io_error(dir, e))?;
    let mut names = BTreeSet::new();
    for entry in entries {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
            if let Some(name) = path.file_name() {
                names.insert(name.to_string_lossy().into_owned());
            }
        }
    }
    Ok(names)
}

pub fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    let started = Instant::now();
    let refs = wav_names(&args.reference)?;
    let hyps = wav_names(&args.hyp)?;
    if refs != hyps {
        let list = |s: Vec<&String>| s.into_iter().cloned().collect::<Vec<_>>().join(", ");
        return Err(CliError::Data(format!(
            "file sets differ; only in {}: [{}]; only in {}: [{}]",
            args.reference.display(),
            list(refs.difference(&hyps).collect()),
            args.hyp.display(),
            list(hyps.difference(&refs).collect())
        )));
    }
    if refs.is_empty() {
        return Err(CliError::Data(format!(
            "no WAV files in {} or {}",
            args.reference.display(),
            args.hyp.display()
        )));
    }
    let pairs: Vec<(String, PathBuf, PathBuf)> = refs
        .iter()
        .map(|n| (n.clone(), args.reference.join(n), args.hyp.join(n)))
        .collect();
    let rate = load_wav(&pairs[0].1).map(|w| w.sample_rate).unwrap_or(16000);
    let features = FeatureConfig::for_sample_rate(rate);
    let report = evaluate_batch(&pairs, &features)?;

    let dir = parent_dir(&args.out);
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv).expect("writing to memory");
    fs::write(&args.out, csv).map_err(|e| io_error(&args.out, e))?;
    for row in &report.rows {
        if let Err(msg) = &row.outcome {
            eprintln!("warning: {}: {msg}", row.file);
        }
    }
    let (m, s) = (&report.mean, &report.std);
    println!(
        "{} pairs: STOI {:.4} ± {:.4}  ESTOI {:.4} ± {:.4}  mel L1 {:.4} ± {:.4}",
        report.rows.len(),
        m.stoi,
        s.stoi,
        m.estoi,
        s.estoi,
        m.mel_l1,
        s.mel_l1
    );

    let config = serde_json::json!({ "ref": args.reference, "hyp": args.hyp });
    let mut manifest = RunManifest::new("evaluate", config, 0);
    manifest.outputs = vec![args.out.clone()];
    manifest.append(&dir, started)
}
