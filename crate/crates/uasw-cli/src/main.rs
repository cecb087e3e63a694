//! Operator front end for the sensing stack.
//!
//! Every subcommand wires the library modules into one reproducible
//! experiment: simulation, calibration, detection, training,
//! classification, full-session replay and latency benchmarking. All
//! output is line-delimited text; given the same inputs and seed flags,
//! every subcommand produces byte-identical output.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures
//! (one-line diagnostic on stderr).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use uasw_core::bench::run_bench;
use uasw_core::classifier::{
    classify, ensemble_classify, model_io, train, Classification, MlpModel, Topology, TrainConfig,
};
use uasw_core::datastore::{build_dataset, read_corpus, CirLog, CirLogHeader, DEFAULT_SCALE};
use uasw_core::detector::{detect, DetectionVerdict, DetectorParams};
use uasw_core::pipeline::{calibrate, tap_distance, HopFeatureStream, HopFeatures, Windower};
use uasw_core::session::{
    parse_event_log, power_estimate, Action, SessionInput, SessionState, ACTIVE_CURRENT_MA,
};
use uasw_core::sim::{simulate_session, CirFrame, ScenarioFile};
use uasw_core::{FeatureVector, RadarConfig};

#[derive(Parser)]
#[command(name = "uasw", version, about = "IR-UWB obstacle sensing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario file into a CIR log.
    Sim {
        /// Scenario text file (scene timeline).
        #[arg(long)]
        scenario: PathBuf,
        /// Output `.uaswcir` log path.
        #[arg(long)]
        out: PathBuf,
        /// Noise seed; the same seed replays the same log bit for bit.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run length override; defaults to the scenario's `duration_ms`.
        #[arg(long)]
        duration_ms: Option<u64>,
        /// Fixed-point scale written into the log header.
        #[arg(long, default_value_t = DEFAULT_SCALE)]
        scale: f64,
    },
    /// Locate the leakage bin B0 in a recorded log.
    Calibrate {
        #[arg(long)]
        log: PathBuf,
    },
    /// Stream detection verdicts over a log, one line per buffer.
    Detect {
        #[arg(long)]
        log: PathBuf,
    },
    /// Train a classifier on a corpus directory of annotated logs.
    Train {
        /// Directory of `.uaswcir` logs with sibling `.labels` files.
        #[arg(long)]
        corpus: PathBuf,
        /// Output model path; history lands next to it as `.history.csv`.
        #[arg(long)]
        out: PathBuf,
        /// Split and shuffle seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        /// Epochs without validation improvement before stopping.
        #[arg(long, default_value_t = 10)]
        patience: usize,
        #[arg(long, value_enum, default_value_t = TopologyArg::TwoByTwelve)]
        topology: TopologyArg,
    },
    /// Stream classifications over a log, one line per buffer.
    Classify {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Add a majority vote over the trailing three buffers.
        #[arg(long)]
        ensemble: bool,
    },
    /// Replay a log plus a user-event file through the session machine.
    Replay {
        #[arg(long)]
        log: PathBuf,
        /// Event file: one `timestamp_ms,kind` per line.
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Time the compute stages of inference over a recorded log.
    Bench {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Inference iterations; short logs are cycled.
        #[arg(long, default_value_t = 1_000)]
        iters: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TopologyArg {
    /// Two hidden layers of twelve neurons.
    #[value(name = "2x12")]
    TwoByTwelve,
    /// No hidden layer; heads read the scaled features directly.
    Linear,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            std::process::exit(0);
        }
        Err(e) => {
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(2);
    }
}

fn run(command: Command) -> Result<()> {
    let config = RadarConfig::default();
    match command {
        Command::Sim {
            scenario,
            out,
            seed,
            duration_ms,
            scale,
        } => cmd_sim(&config, &scenario, &out, seed, duration_ms, scale),
        Command::Calibrate { log } => cmd_calibrate(&config, &log),
        Command::Detect { log } => cmd_detect(&config, &log),
        Command::Train {
            corpus,
            out,
            seed,
            epochs,
            patience,
            topology,
        } => cmd_train(&config, &corpus, &out, seed, epochs, patience, topology),
        Command::Classify {
            log,
            model,
            ensemble,
        } => cmd_classify(&config, &log, &model, ensemble),
        Command::Replay { log, events, model } => cmd_replay(&config, &log, &events, &model),
        Command::Bench { log, model, iters } => cmd_bench(&config, &log, &model, iters),
    }
}

/// Loads a log and checks it matches the radar's tap layout.
fn load_log(path: &Path, config: &RadarConfig) -> Result<CirLog> {
    let log = CirLog::load(path).with_context(|| format!("reading {}", path.display()))?;
    if log.header.taps != config.total_taps {
        bail!(
            "{}: log has {} taps per frame, expected {}",
            path.display(),
            log.header.taps,
            config.total_taps
        );
    }
    Ok(log)
}

/// Runs calibration, windowing, spectral features and detection over a
/// frame stream, invoking `on_buffer` once per completed buffer with the
/// frame that finished it. Returns (buffers, detections).
fn stream_buffers(
    frames: &[CirFrame],
    config: &RadarConfig,
    mut on_buffer: impl FnMut(&CirFrame, &HopFeatures, &DetectionVerdict) -> Result<()>,
) -> Result<(usize, usize)> {
    let calib = calibrate(frames, config)?;
    let params = DetectorParams::new(config);
    let mut windower = Windower::new(&calib, config)?;
    let mut features = HopFeatureStream::new(config);
    let mut buffers = 0usize;
    let mut detections = 0usize;
    for frame in frames {
        let Some(buffer) = windower.push(frame)?.buffer else {
            continue;
        };
        let hop = features.push(&buffer)?;
        let verdict = detect(&hop.delta, &params);
        buffers += 1;
        detections += verdict.detected as usize;
        on_buffer(frame, &hop, &verdict)?;
    }
    Ok((buffers, detections))
}

fn cmd_sim(
    config: &RadarConfig,
    scenario_path: &Path,
    out: &Path,
    seed: u64,
    duration_ms: Option<u64>,
    scale: f64,
) -> Result<()> {
    let text = fs::read_to_string(scenario_path)
        .with_context(|| format!("reading {}", scenario_path.display()))?;
    let file = ScenarioFile::parse(&text)
        .with_context(|| format!("parsing {}", scenario_path.display()))?;
    let duration = duration_ms.or(file.duration_ms).context(
        "no run length: pass --duration-ms or set duration_ms in the scenario",
    )?;
    let frames = simulate_session(&file.scenario, config, duration, seed)?;
    let log = CirLog {
        header: CirLogHeader::for_config(config, scale),
        frames,
    };
    log.save(out)
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "wrote {} frames ({} ms) to {}",
        log.frames.len(),
        duration,
        out.display()
    );
    Ok(())
}

fn cmd_calibrate(config: &RadarConfig, log_path: &Path) -> Result<()> {
    let log = load_log(log_path, config)?;
    let calib = calibrate(&log.frames, config)?;
    let near = tap_distance(1, config)?;
    let far = tap_distance(config.used_taps, config)?;
    println!(
        "b0_index={} confidence={:.2} used_bins=B1..B{} range_cm={:.0}..{:.0}",
        calib.b0_index,
        calib.confidence,
        config.used_taps,
        near.center_cm,
        far.center_cm
    );
    Ok(())
}

fn cmd_detect(config: &RadarConfig, log_path: &Path) -> Result<()> {
    let log = load_log(log_path, config)?;
    let (buffers, detections) = stream_buffers(&log.frames, config, |frame, _, verdict| {
        let mut line = format!(
            "seq={} t={}ms detected={} sigma={}",
            frame.seq,
            frame.timestamp_ms,
            if verdict.detected { "yes" } else { "no" },
            verdict.sigma
        );
        if let (Some(bin), Some(cm)) = (verdict.trigger_bin, verdict.range_estimate_cm) {
            write!(line, " trigger=B{bin} range_cm={cm:.0}").expect("writing to String");
        }
        println!("{line}");
        Ok(())
    })?;
    println!("# buffers={buffers} detections={detections}");
    Ok(())
}

fn cmd_train(
    config: &RadarConfig,
    corpus_dir: &Path,
    out: &Path,
    seed: u64,
    epochs: usize,
    patience: usize,
    topology: TopologyArg,
) -> Result<()> {
    let corpus = read_corpus(corpus_dir)
        .with_context(|| format!("reading corpus {}", corpus_dir.display()))?;
    if corpus.is_empty() {
        bail!("{}: no .uaswcir logs found", corpus_dir.display());
    }
    let dataset = build_dataset(&corpus, config, seed)?;
    let topology = match topology {
        TopologyArg::TwoByTwelve => Topology::two_by_twelve(),
        TopologyArg::Linear => Topology::linear(),
    };
    let train_cfg = TrainConfig {
        max_epochs: epochs,
        patience,
        seed,
        ..TrainConfig::default()
    };
    let (model, report) = train(&dataset, &topology, &train_cfg)?;
    model_io::save(&model, out)?;

    let history_path = out.with_extension("history.csv");
    let mut history = String::from("epoch,train_loss,val_loss,acc_material,acc_surface,acc_movement\n");
    for e in &report.history {
        writeln!(
            history,
            "{},{:.6},{:.6},{:.4},{:.4},{:.4}",
            e.epoch, e.train_loss, e.val_loss, e.val_accuracy[0], e.val_accuracy[1], e.val_accuracy[2]
        )
        .expect("writing to String");
    }
    fs::write(&history_path, history)
        .with_context(|| format!("writing {}", history_path.display()))?;

    let best = &report.history[report.best_epoch];
    println!(
        "trained on {} samples ({} train / {} val / {} test); best epoch {}: val_acc material={:.3} surface={:.3} movement={:.3}",
        dataset.samples.len(),
        dataset.split.train.len(),
        dataset.split.validation.len(),
        dataset.split.test.len(),
        best.epoch,
        best.val_accuracy[0],
        best.val_accuracy[1],
        best.val_accuracy[2]
    );
    println!("model: {}", out.display());
    println!("history: {}", history_path.display());
    Ok(())
}

fn cmd_classify(config: &RadarConfig, log_path: &Path, model_path: &Path, ensemble: bool) -> Result<()> {
    let log = load_log(log_path, config)?;
    let model =
        model_io::load(model_path).with_context(|| format!("reading {}", model_path.display()))?;
    let mut history: Vec<Classification> = Vec::new();
    stream_buffers(&log.frames, config, |frame, hop, _| {
        let features = FeatureVector::new(hop.newest.mean_mag.clone());
        let result = classify(&features, &model)?;
        let mut line = format!(
            "seq={} t={}ms material={} surface={} movement={} conf={:.2}/{:.2}/{:.2}",
            frame.seq,
            frame.timestamp_ms,
            result.label.material,
            result.label.surface,
            result.label.movement,
            result.confidence.material,
            result.confidence.surface,
            result.confidence.movement
        );
        if ensemble {
            history.push(result);
            let vote = ensemble_classify(&history)?;
            write!(line, " ensemble={},{},{}", vote.material, vote.surface, vote.movement)
                .expect("writing to String");
        }
        println!("{line}");
        Ok(())
    })?;
    Ok(())
}

fn cmd_replay(config: &RadarConfig, log_path: &Path, events_path: &Path, model_path: &Path) -> Result<()> {
    let log = load_log(log_path, config)?;
    let model =
        model_io::load(model_path).with_context(|| format!("reading {}", model_path.display()))?;
    let text = fs::read_to_string(events_path)
        .with_context(|| format!("reading {}", events_path.display()))?;
    let events = parse_event_log(&text)?;

    // One Detection input per buffer, labeled by the classifier.
    let mut inputs: Vec<SessionInput> = Vec::new();
    stream_buffers(&log.frames, config, |frame, hop, verdict| {
        let features = FeatureVector::new(hop.newest.mean_mag.clone());
        inputs.push(SessionInput::Detection {
            timestamp_ms: frame.timestamp_ms,
            verdict: *verdict,
            label: classify(&features, &model)?.label,
        });
        Ok(())
    })?;
    inputs.extend(events.into_iter().map(SessionInput::Event));
    // Host events sort before same-millisecond verdicts: a session change
    // takes effect before the radar's concurrent output is interpreted.
    inputs.sort_by_key(|input| {
        let rank = match input {
            SessionInput::Event(_) => 0u8,
            SessionInput::Detection { .. } => 1,
            SessionInput::Tick { .. } => 2,
        };
        (input.timestamp_ms(), rank)
    });
    let end_ms = inputs.last().map(SessionInput::timestamp_ms).unwrap_or(0);

    let mut session = SessionState::new(0);
    for input in &inputs {
        for action in session.step(input)? {
            match action {
                Action::StartRadar => println!("# t={}ms radar=on", input.timestamp_ms()),
                Action::StopRadar => println!("# t={}ms radar=off", input.timestamp_ms()),
                Action::Emit(alert) => println!("{}", alert.to_line()),
            }
        }
    }
    session.step(&SessionInput::Tick { timestamp_ms: end_ms })?;
    let avg = power_estimate(&session, ACTIVE_CURRENT_MA, 0.0)?;
    println!(
        "# active_ms={} idle_ms={} avg_ma={:.2}",
        session.accumulated_active_ms, session.accumulated_idle_ms, avg
    );
    Ok(())
}

fn cmd_bench(config: &RadarConfig, log_path: &Path, model_path: &Path, iters: usize) -> Result<()> {
    let log = load_log(log_path, config)?;
    let model =
        model_io::load(model_path).with_context(|| format!("reading {}", model_path.display()))?;
    let report = run_bench(&log.frames, &model, config, iters)?;
    println!("iterations: {}", report.iterations);
    print!("{}", report.render());
    Ok(())
}
