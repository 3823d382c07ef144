use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ise_core::dataset::{load_dataset, save_dataset};
use ise_core::encoders::StateEmbedding;
use ise_core::envs::{generate_dataset, EnvKind};
use ise_core::replan::{
    ablation_sweep, embedding_csv, read_episodes_csv, results_svg, run_experiment, write_episodes_csv, Assets,
    ExperimentFile, Method, ResultsTable, Sweep, EPISODES_CSV,
};
use ise_core::Result;

const RESULTS_CSV: &str = "results.csv";
const RESULTS_SVG: &str = "results.svg";
const EMBED_CSV: &str = "embed.csv";
const CANONICAL_JSON: &str = "canonical.json";

#[derive(Parser)]
#[command(name = "ise", version, about = "Video replanning with implicit state estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out scripted and random actions into an experience dataset.
    GenData {
        #[arg(long)]
        env: EnvKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        per_theta_success: usize,
        #[arg(long, default_value_t = 40)]
        per_theta_fail: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit the PCA projection and embedding table for a dataset.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pca_k: Option<usize>,
    },
    /// Run an experiment file and write per-episode results.
    Run {
        #[arg(long)]
        experiment: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Record wall-clock time per component (makes the CSV nondeterministic).
        #[arg(long)]
        timing: bool,
    },
    /// Run an ablation grid: candidates, metric, modules or data-fraction.
    Ablate {
        #[arg(long)]
        sweep: Sweep,
        /// Base experiment; defaults to every task with 400 trials.
        #[arg(long)]
        experiment: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a run directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        embed_csv: bool,
    },
}

type Canonical = Vec<(EnvKind, Vec<String>, Vec<StateEmbedding>)>;

fn gen_data(env: EnvKind, out: &Path, success: usize, fail: usize, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ds = generate_dataset(env, success, fail, &mut rng)?;
    save_dataset(&ds, out)?;
    println!("wrote {} videos for {} objects to {}", ds.len(), ds.objects().len(), out.display());
    Ok(())
}

fn fit(data: &Path, out: &Path, pca_k: Option<usize>) -> Result<()> {
    let ds = load_dataset(data)?;
    let kind: EnvKind = ds.env().parse()?;
    let assets = Assets::fit(kind, &ds, pca_k)?;
    assets.save(out, data)?;
    let p = assets.table().projection();
    println!(
        "fit {kind}: {} objects, {} videos, k = {}{}",
        assets.table().objects().len(),
        assets.table().entries().len(),
        p.k,
        if p.degenerate { " (degenerate)" } else { "" }
    );
    Ok(())
}

fn run(experiment: &Path, out: &Path, timing: bool) -> Result<()> {
    let exp = ExperimentFile::load(experiment)?;
    let output = run_experiment(&exp, timing)?;
    std::fs::create_dir_all(out)?;
    write_episodes_csv(&output.rows, &out.join(EPISODES_CSV))?;
    output.table.write_csv(&out.join(RESULTS_CSV))?;
    std::fs::write(out.join(CANONICAL_JSON), serde_json::to_vec(&output.canonical)?)?;
    print!("{}", output.table.render());
    for q in &output.quality {
        println!("{:<16} psnr {:.3} ssim {:.4}", q.method.name(), q.mean_psnr, q.mean_ssim);
    }
    Ok(())
}

fn ablate(sweep: Sweep, experiment: Option<&Path>, trials: Option<usize>, out: Option<&Path>) -> Result<()> {
    let mut exp = match experiment {
        Some(p) => ExperimentFile::load(p)?,
        None => ExperimentFile::new(EnvKind::ALL.to_vec(), vec![Method::Ours], 400, 0),
    };
    if let Some(t) = trials {
        exp.trials = t;
    }
    for point in ablation_sweep(&exp, sweep)? {
        println!("== {} ==", point.label);
        print!("{}", point.table.render());
        if let Some(dir) = out {
            let dir = dir.join(point.label.replace('=', "_"));
            std::fs::create_dir_all(&dir)?;
            point.table.write_csv(&dir.join(RESULTS_CSV))?;
        }
    }
    Ok(())
}

fn report(input: &Path, csv: bool, svg: bool, embed: bool) -> Result<()> {
    let rows = read_episodes_csv(&input.join(EPISODES_CSV))?;
    let table = ResultsTable::from_rows(&rows);
    print!("{}", table.render());
    if csv {
        table.write_csv(&input.join(RESULTS_CSV))?;
    }
    if svg {
        std::fs::write(input.join(RESULTS_SVG), results_svg(&table))?;
    }
    if embed {
        let canonical: Canonical = serde_json::from_slice(&std::fs::read(input.join(CANONICAL_JSON))?)?;
        std::fs::write(input.join(EMBED_CSV), embedding_csv(&canonical)?)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData { env, out, per_theta_success, per_theta_fail, seed } => {
            gen_data(*env, out, *per_theta_success, *per_theta_fail, *seed)
        }
        Command::Fit { data, out, pca_k } => fit(data, out, *pca_k),
        Command::Run { experiment, out, timing } => run(experiment, out, *timing),
        Command::Ablate { sweep, experiment, trials, out } => {
            ablate(*sweep, experiment.as_deref(), *trials, out.as_deref())
        }
        Command::Report { input, csv, svg, embed_csv } => report(input, *csv, *svg, *embed_csv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
