use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mbaq::codec::{apply_emphasis_with, encode_frame, write_qp_matrix, QpMap};
use mbaq::experiment::{
    heatmap::AnyMap, load_corpus, prepare_split, run_ablation, run_sweep, split_scenes, test_sequences,
    train_on_corpus, write_corpus, write_csv, write_epoch_log, RunConfig,
};
use mbaq::frames::Frame;
use mbaq::oracle::BlobDetector;
use mbaq::pet::{lowest_quality_encode_with, proxy_emphasis_threshold};
use mbaq::quality::{mean_ssim, per_mb_ssim, psnr};
use mbaq::rer::LinearEaModel;
use mbaq::{Error, Result};

#[derive(Parser)]
#[command(name = "mbaq", version, about = "Macroblock-level adaptive quantization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the run seed and the trainer seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the accuracy margin
    #[arg(long)]
    tau: Option<f64>,
    /// Overrides the execution interval
    #[arg(long)]
    interval: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene corpus (PGM frames + JSON ground truth)
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Proxy emphasis thresholds of one frame
    Pet {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        frame: PathBuf,
        /// Write the thresholds JSON here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train an emphasis model on a corpus
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the trained model with the baselines on the test split
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render an emphasis or QP map JSON as a PPM heatmap
    Heatmap {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Routing × decay × interval ablation grid
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a frame with a map and write the reconstruction
    Encode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert map JSON files into one QP-matrix text file
    Qpmatrix {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true, num_args = 1..)]
        map: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) => 3,
        Error::Io { .. } => 4,
        Error::Training { .. } => 5,
        Error::Parse { .. } => 6,
        Error::InvalidInput(_) => 7,
        Error::Placement { .. } => 8,
    }
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
        cfg.trainer.seed = s;
    }
    if let Some(t) = c.tau {
        cfg.trainer.tau = t;
    }
    if let Some(k) = c.interval {
        cfg.interval = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_qp_map(path: &Path, cfg: &RunConfig) -> Result<QpMap> {
    Ok(match AnyMap::load(path)? {
        AnyMap::Emphasis(em) => apply_emphasis_with(&em, &cfg.trainer.qp_table),
        AnyMap::Qp(q) => q,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { common, out } => {
            let cfg = load_config(&common)?;
            let corpus = mbaq::experiment::generate_corpus(&cfg)?;
            let files = write_corpus(&out, &corpus)?;
            println!("wrote {} files to {}", files.len(), out.display());
        }
        Command::Pet { common, frame, out } => {
            let cfg = load_config(&common)?;
            let raw = Frame::read_pgm(&frame)?;
            let low = lowest_quality_encode_with(&raw, &cfg.trainer.qp_table);
            let thr = proxy_emphasis_threshold(&raw, &low, cfg.trainer.pct_roi, cfg.trainer.pct_bg)?;
            let text = serde_json::to_string_pretty(&thr).expect("thresholds serialize") + "\n";
            match out {
                Some(p) => write_text(&p, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Train { common, corpus, out } => {
            let cfg = load_config(&common)?;
            let scenes = load_corpus(&corpus)?;
            create_dir(&out)?;
            let oracle = BlobDetector::new(cfg.detector.clone());
            let outcome = match train_on_corpus(&scenes, &cfg, &oracle) {
                Ok(o) => o,
                Err(Error::Training { message, log }) => {
                    write_epoch_log(&out.join("epoch_log.csv"), &log)?;
                    return Err(Error::Training { message, log });
                }
                Err(e) => return Err(e),
            };
            outcome.model.save(&out.join("model.json"))?;
            write_epoch_log(&out.join("epoch_log.csv"), &outcome.log)?;
            let last = outcome.log.last().expect("at least one epoch");
            println!(
                "trained {} epochs (converged: {}), validation gap {:.4}, mean emphasis {:.3}",
                outcome.log.len(),
                outcome.converged,
                last.val_gap,
                last.val_mean_emphasis
            );
        }
        Command::Sweep { common, corpus, model, out } => {
            let cfg = load_config(&common)?;
            if !model.exists() {
                return Err(Error::InvalidConfig(format!("model file {} not found", model.display())));
            }
            let model = LinearEaModel::load(&model)?;
            let scenes = load_corpus(&corpus)?;
            let split = split_scenes(scenes.len(), cfg.seed);
            let oracle = BlobDetector::new(cfg.detector.clone());
            let report = run_sweep(&model, &test_sequences(&scenes, &split), &cfg, &oracle, cfg.trainer.tau)?;
            report.write(&out)?;
            for a in &report.aggregates {
                println!(
                    "{:<22} bits {:>10.0}  acc_c {:.3}  acc_r {:.3}  feasible {}  ssim {:.3}  savings {}",
                    a.method.as_str(),
                    a.mean_bits,
                    a.acc_c,
                    a.acc_r,
                    a.feasible,
                    a.mean_ssim,
                    a.savings_vs_uniform.map(|s| format!("{:.1}%", 100.0 * s)).unwrap_or_else(|| "-".into())
                );
            }
        }
        Command::Heatmap { map, out } => {
            AnyMap::load(&map)?.render().write_ppm(&out)?;
        }
        Command::Ablate { common, corpus, out } => {
            let cfg = load_config(&common)?;
            let scenes = load_corpus(&corpus)?;
            let split = split_scenes(scenes.len(), cfg.seed);
            let oracle = BlobDetector::new(cfg.detector.clone());
            let (tr, va) = prepare_split(&scenes, &split, &cfg, &oracle)?;
            let rows = run_ablation(&tr, &va, &test_sequences(&scenes, &split), &cfg, &oracle)?;
            create_dir(&out)?;
            write_csv(&out.join("ablation.csv"), &rows)?;
            println!("wrote {} ablation rows", rows.len());
        }
        Command::Encode { common, frame, map, out } => {
            let cfg = load_config(&common)?;
            let raw = Frame::read_pgm(&frame)?;
            let qp = load_qp_map(&map, &cfg)?;
            let enc = encode_frame(&raw, &qp)?;
            enc.recon.write_pgm(&out)?;
            let stats = serde_json::json!({
                "bits": enc.total_bits,
                "psnr": psnr(&raw, &enc.recon)?,
                "mean_ssim": mean_ssim(&per_mb_ssim(&raw, &enc.recon)?),
            });
            println!("{stats}");
        }
        Command::Qpmatrix { common, map, out } => {
            let cfg = load_config(&common)?;
            let maps = map.iter().map(|p| load_qp_map(p, &cfg)).collect::<Result<Vec<_>>>()?;
            write_qp_matrix(&maps, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
