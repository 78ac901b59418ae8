use brc::harness::{
    ablate_window, cross_day_eval, export_states, grow_summary, pca_embed, read_states_csv, run_family,
    run_shuffle_baseline, ExperimentReport, Family, HarnessConfig, Substrate,
};
use clap::{Args, Parser, Subcommand};
use std::error::Error;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "brc", version, about = "Reservoir computing on a simulated 64x64 HD-MEA culture")]
struct Cli {
    /// TOML config; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct FamilyArg {
    #[arg(long, value_parser = parse::<Family>)]
    family: Family,
}

#[derive(Subcommand)]
enum Cmd {
    /// Grow a culture and report its size and spontaneous activity.
    Grow {
        #[arg(long, default_value_t = 1000.0)]
        duration_ms: f64,
    },
    /// Record and classify one experiment family.
    Run {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, value_parser = parse::<Substrate>, default_value = "both")]
        substrate: Substrate,
        /// Number of MNIST images to sample.
        #[arg(long)]
        mnist_subset: Option<usize>,
    },
    /// Accuracy against the counting window.
    AblateWindow {
        #[command(flatten)]
        family: FamilyArg,
        /// Comma-separated windows in ms.
        #[arg(long, value_delimiter = ',')]
        w_list: Option<Vec<f64>>,
    },
    /// Train on day one, test on later days.
    CrossDay {
        #[command(flatten)]
        family: FamilyArg,
    },
    /// Culture accuracy against shuffled states.
    ShuffleBaseline {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, default_value_t = 10)]
        n_seeds: usize,
    },
    /// Write state CSVs without training.
    ExportStates {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, value_parser = parse::<Substrate>, default_value = "culture")]
        substrate: Substrate,
    },
    /// PCA embedding of a state CSV.
    Embed {
        #[arg(long)]
        states: PathBuf,
        #[arg(long, default_value_t = 2)]
        dims: usize,
    },
    /// Summarize the reports in the run directory.
    Report,
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

fn main() {
    if let Err(e) = real_main() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn real_main() -> Result<(), Box<dyn Error>> {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    let mut cfg = match &cli.config {
        Some(p) => HarnessConfig::from_file(p)?,
        None => HarnessConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.protocol.seed = s;
    }
    let out = cli.out.as_path();
    match cli.cmd {
        Cmd::Grow { duration_ms } => {
            let g = grow_summary(&cfg, duration_ms)?;
            fs::create_dir_all(out)?;
            fs::write(out.join("grow.json"), serde_json::to_string_pretty(&g)?)?;
            println!("{}", serde_json::to_string_pretty(&g)?);
        }
        Cmd::Run { family, substrate, mnist_subset } => {
            if let Some(n) = mnist_subset {
                cfg.protocol.mnist_images = n;
            }
            print_report(&run_family(family.family, substrate, &cfg, Some(out))?);
        }
        Cmd::AblateWindow { family, w_list } => {
            if let Some(w) = w_list {
                cfg.protocol.w_list = w;
            }
            print_report(&ablate_window(family.family, &cfg, Some(out))?);
        }
        Cmd::CrossDay { family } => print_report(&cross_day_eval(family.family, &cfg, Some(out))?),
        Cmd::ShuffleBaseline { family, n_seeds } => {
            print_report(&run_shuffle_baseline(family.family, &cfg, n_seeds, Some(out))?)
        }
        Cmd::ExportStates { family, substrate } => {
            for p in export_states(family.family, substrate, &cfg, out)? {
                println!("{}", p.display());
            }
        }
        Cmd::Embed { states, dims } => embed(&states, dims, out)?,
        Cmd::Report => {
            let mut paths: Vec<PathBuf> = fs::read_dir(out)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "grow.json"))
                .collect();
            paths.sort();
            for p in paths {
                let r: ExperimentReport = serde_json::from_slice(&fs::read(&p)?)?;
                print_report(&r);
            }
        }
    }
    Ok(())
}

fn embed(states: &Path, dims: usize, out: &Path) -> Result<(), Box<dyn Error>> {
    let rows = read_states_csv(states)?;
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.values.clone()).collect();
    let e = pca_embed(&x, dims);
    for w in &e.warnings {
        eprintln!("warning: {w}");
    }
    fs::create_dir_all(out)?;
    let stem = states.file_stem().and_then(|s| s.to_str()).unwrap_or("states");
    let path = out.join(format!("embedding_{stem}.csv"));
    let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
    write!(f, "session,replicate,day,stimulus_index,label")?;
    for k in 0..dims {
        write!(f, ",pc{}", k + 1)?;
    }
    writeln!(f)?;
    for (r, c) in rows.iter().zip(&e.coords) {
        write!(f, "{},{},{},{},{}", r.session, r.replicate, r.day, r.stimulus_index, r.label)?;
        for v in c {
            write!(f, ",{v}")?;
        }
        writeln!(f)?;
    }
    let ratios: Vec<String> = e.explained_ratio.iter().map(|r| format!("{:.3}", r)).collect();
    println!("{} (explained variance ratio {})", path.display(), ratios.join(", "));
    Ok(())
}

fn print_report(r: &ExperimentReport) {
    println!("{} {} (W = {} ms, seed {}, {:.1} s)", r.experiment, r.family, r.w_ms, r.seed, r.timing.wall_s);
    for s in [&r.culture, &r.ar, &r.shuffle].into_iter().flatten() {
        let days: Vec<String> = s.per_day.iter().map(|d| format!("{:.3}", d.mean)).collect();
        println!(
            "  {:<8} {:.3} +- {:.3} (n = {})  per day [{}]",
            s.substrate,
            s.overall.mean,
            s.overall.std,
            s.overall.n,
            days.join(", ")
        );
    }
    if let Some(c) = &r.w_curve {
        for p in c {
            println!("  W {:>5} ms  {:.3} +- {:.3} sem (n = {})", p.w_ms, p.mean, p.sem, p.n);
        }
    }
    if let Some(x) = &r.cross_day {
        println!("  day 0 within-day {:.3} +- {:.3}", x.within_day.mean, x.within_day.std);
        for d in &x.days {
            println!("  day {} transfer {:.3} +- {:.3}  shuffle {:.3}", d.day, d.accuracy.mean, d.accuracy.std, d.shuffle.mean);
        }
    }
}
