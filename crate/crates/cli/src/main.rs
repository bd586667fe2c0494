use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use skelet_core::io::{
    import_keypoint_json, read_params, read_sequence, write_params, write_sequence, RunConfig,
};
use skelet_core::network::synthetic::{
    random_tensor, synthetic_dataset, synthetic_setup, synthetic_train_config, toy_setup,
};
use skelet_core::network::{build_network, evaluate, train, NetworkConfig};
use skelet_core::profiler::count_flops;
use skelet_core::selection::{format_report, keypoint_stats, rank_keypoints, select_protocol, Protocol};
use skelet_core::skeleton::KeypointLayout;
use skelet_core::transform::PartitionMap;
use skelet_core::Error;

/// Expressive-keypoint action recognition with learnable joint downsampling.
#[derive(Parser)]
#[command(name = "skelet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    On,
    Off,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Table,
    Records,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckConfig {
    Toy,
    Synthetic,
}

#[derive(Subcommand)]
enum Command {
    /// Keypoint statistics over a set of sequence files, as a TSV report.
    Stats {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Applies a keypoint protocol to a whole-body sequence file.
    Select {
        input: PathBuf,
        output: PathBuf,
        /// wholebody, wo-face, wo-feet, simple-fingers or wo-hands.
        #[arg(long, default_value = "wo-face")]
        protocol: String,
    },
    /// FLOPs and parameter counts of the configured network.
    Profile {
        #[arg(long, value_enum, default_value = "both")]
        skelet: Variant,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: OutputFormat,
        /// Count each multiply-accumulate as 1 or 2 FLOPs.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=2))]
        flops_per_mac: u64,
    },
    /// Class scores for a single-person sequence.
    Infer {
        input: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Trains on sequence files, or on the built-in synthetic set.
    Train {
        /// Labelled single-person sequence files.
        inputs: Vec<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use the seeded four-class synthetic dataset and its small network.
        #[arg(long)]
        synthetic: bool,
        #[arg(long)]
        epochs: Option<usize>,
        /// Where to write the trained parameters.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of a small network's gradients.
    Gradcheck {
        #[arg(long, value_enum, default_value = "toy")]
        config: CheckConfig,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
    /// Validates a partition table and prints its parts.
    PartitionCheck {
        table: PathBuf,
        /// Source joint count.
        #[arg(long)]
        source: usize,
        /// Expected target part count.
        #[arg(long)]
        target: Option<usize>,
    },
    /// Converts line-delimited JSON keypoints into a sequence file.
    Import {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 10)]
        persons: usize,
        #[arg(long)]
        label: Option<usize>,
    },
}

/// Failure with the exit code for its category.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => 3,
            Error::Shape(_)
            | Error::Index(_)
            | Error::Layout(_)
            | Error::Partition(_)
            | Error::IsolatedJoint(_) => 4,
            Error::Format { .. } | Error::Parse { .. } => 5,
            Error::Io(_) => 6,
            Error::Numeric(_) | Error::InsufficientData(_) => 7,
        };
        Failure {
            code,
            message: format!("{} error: {e}", e.category()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn stats(inputs: &[PathBuf], config: &Option<PathBuf>) -> CmdResult {
    let cfg = load_config(config)?;
    let data = inputs.iter().map(read_sequence).collect::<Result<Vec<_>, _>>()?;
    let first = &data[0];
    let layout = match KeypointLayout::by_id(first.layout_id()) {
        Some(l) => l,
        None => KeypointLayout::custom(first.layout_id(), first.joints(), Vec::new())?,
    };
    let stats = keypoint_stats(&data, &layout, &cfg.selection)?;
    let rows = rank_keypoints(&stats, layout.names(), &cfg.selection)?;
    print!("{}", format_report(&rows));
    Ok(())
}

fn select(input: &PathBuf, output: &PathBuf, protocol: &str) -> CmdResult {
    let p = Protocol::parse(protocol)?;
    let seq = read_sequence(input)?;
    let out = select_protocol(&seq, p)?;
    write_sequence(&out, output)?;
    println!("{} -> {} keypoints ({})", seq.joints(), out.joints(), p.name());
    Ok(())
}

fn profile(
    variant: Variant,
    frames: Option<usize>,
    config: &Option<PathBuf>,
    format: OutputFormat,
    flops_per_mac: u64,
) -> CmdResult {
    let cfg = load_config(config)?;
    let layout = cfg.load_layout()?;
    let parts = cfg.load_partitions()?;
    let frames = frames.unwrap_or(cfg.network.frames);
    let variants: &[bool] = match variant {
        Variant::On => &[true],
        Variant::Off => &[false],
        Variant::Both => &[true, false],
    };
    let mut totals = Vec::new();
    for &skelet in variants {
        // costs do not depend on parameter values
        let net = build_network(&cfg.network, &layout, &parts, skelet, 0)?;
        let report = count_flops(&net, frames)?.with_flops_per_mac(flops_per_mac);
        let name = if skelet { "skelet" } else { "baseline" };
        match format {
            OutputFormat::Table => {
                println!("# {name}");
                print!("{}", report.to_table());
            }
            OutputFormat::Records => {
                for line in report.to_records().lines() {
                    println!("{{\"network\":\"{name}\",{}", &line[1..]);
                }
            }
        }
        totals.push(report.flops());
    }
    if let [s, b] = totals[..] {
        let ratio = s as f64 / b as f64;
        match format {
            OutputFormat::Table => println!("ratio skelet/baseline FLOPs: {ratio:.4}"),
            OutputFormat::Records => println!("{{\"record\":\"ratio\",\"flops_ratio\":{ratio}}}"),
        }
    }
    Ok(())
}

fn infer(input: &PathBuf, params: &PathBuf, config: &Option<PathBuf>) -> CmdResult {
    let cfg = load_config(config)?;
    let mut net = build_network(
        &cfg.network,
        &cfg.load_layout()?,
        &cfg.load_partitions()?,
        cfg.skelet,
        0,
    )?;
    read_params(params)?.load_into(&mut net)?;
    let seq = read_sequence(input)?;
    let logits = net.infer(&seq)?;
    let probs = skelet_core::diff::kernels::softmax(logits.data());
    let class = skelet_core::network::argmax(logits.data());
    let out = serde_json::json!({ "class": class, "logits": logits.data(), "probabilities": probs });
    println!("{out}");
    Ok(())
}

fn train_cmd(
    inputs: &[PathBuf],
    seed: u64,
    config: &Option<PathBuf>,
    synthetic: bool,
    epochs: Option<usize>,
    out: &Option<PathBuf>,
) -> CmdResult {
    let cfg = load_config(config)?;
    let mut tc = if synthetic && config.is_none() {
        synthetic_train_config(seed)
    } else {
        cfg.train.clone()
    };
    tc.seed = seed;
    if let Some(e) = epochs {
        tc.epochs = e;
    }
    let (mut net, data) = if synthetic {
        if !inputs.is_empty() {
            return Err(Error::config("--synthetic takes no input files").into());
        }
        let (ncfg, layout, parts) = synthetic_setup();
        let net = build_network(&ncfg, &layout, &parts, cfg.skelet, seed)?;
        (net, synthetic_dataset(64, seed)?)
    } else {
        if inputs.is_empty() {
            return Err(Error::config("no training files given (or pass --synthetic)").into());
        }
        let data = inputs.iter().map(read_sequence).collect::<Result<Vec<_>, _>>()?;
        let net = build_network(
            &cfg.network,
            &cfg.load_layout()?,
            &cfg.load_partitions()?,
            cfg.skelet,
            seed,
        )?;
        (net, data)
    };
    let log = train(&mut net, &data, &tc)?;
    for e in &log.epochs {
        println!("{}", serde_json::to_string(e).expect("serialisable"));
    }
    let acc = evaluate(&net, &data)?;
    println!("{}", serde_json::json!({ "record": "final", "train_accuracy": acc, "diverged_at": log.diverged_at }));
    if let Some(path) = out {
        write_params(&net, path)?;
    }
    if let Some(epoch) = log.diverged_at {
        return Err(Error::Numeric(format!(
            "training diverged in epoch {epoch}; last good parameters kept"
        ))
        .into());
    }
    Ok(())
}

fn gradcheck(config: CheckConfig, seed: u64, tolerance: f64) -> CmdResult {
    let (cfg, layout, parts): (NetworkConfig, _, _) = match config {
        CheckConfig::Toy => toy_setup(),
        CheckConfig::Synthetic => synthetic_setup(),
    };
    let net = build_network(&cfg, &layout, &parts, true, seed)?;
    let x = random_tensor(&[cfg.joints[0], cfg.frames, cfg.in_channels], seed);
    let label = (seed % cfg.num_classes as u64) as usize;
    let report = net.gradcheck(&x, label)?;
    let (name, idx) = report.worst.clone().unwrap_or_default();
    println!(
        "max relative error {:.3e} over {} coordinates (worst: {name}[{idx}])",
        report.max_rel_error, report.coordinates
    );
    if report.max_rel_error > tolerance {
        return Err(Failure {
            code: 1,
            message: format!(
                "gradient check failed: {:.3e} exceeds {tolerance:e}",
                report.max_rel_error
            ),
        });
    }
    Ok(())
}

fn partition_check(table: &PathBuf, source: usize, target: Option<usize>) -> CmdResult {
    let text = std::fs::read_to_string(table)
        .map_err(|e| Error::Io(format!("{}: {e}", table.display())))?;
    let p = PartitionMap::parse(&text, source)?;
    if let Some(t) = target {
        if p.target_count() != t {
            return Err(Error::Partition(format!(
                "table has {} parts, expected {t}",
                p.target_count()
            ))
            .into());
        }
    }
    println!("{} joints -> {} parts", p.source_count(), p.target_count());
    for (k, part) in p.parts().iter().enumerate() {
        let members: Vec<String> = part.iter().map(usize::to_string).collect();
        println!("{k}\t{}\t{}", part.len(), members.join(" "));
    }
    Ok(())
}

fn import(input: &PathBuf, output: &PathBuf, persons: usize, label: Option<usize>) -> CmdResult {
    let seq = import_keypoint_json(input, persons, label)?;
    write_sequence(&seq, output)?;
    println!(
        "imported {} persons x {} keypoints x {} frames",
        seq.persons(),
        seq.joints(),
        seq.frames()
    );
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Stats { inputs, config } => stats(&inputs, &config),
        Command::Select {
            input,
            output,
            protocol,
        } => select(&input, &output, &protocol),
        Command::Profile {
            skelet,
            frames,
            config,
            format,
            flops_per_mac,
        } => profile(skelet, frames, &config, format, flops_per_mac),
        Command::Infer {
            input,
            params,
            config,
        } => infer(&input, &params, &config),
        Command::Train {
            inputs,
            seed,
            config,
            synthetic,
            epochs,
            out,
        } => train_cmd(&inputs, seed, &config, synthetic, epochs, &out),
        Command::Gradcheck {
            config,
            seed,
            tolerance,
        } => gradcheck(config, seed, tolerance),
        Command::PartitionCheck {
            table,
            source,
            target,
        } => partition_check(&table, source, target),
        Command::Import {
            input,
            output,
            persons,
            label,
        } => import(&input, &output, persons, label),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("skelet: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
