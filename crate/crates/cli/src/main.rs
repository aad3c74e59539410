use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use arraydiar::census::SpeakerCensus;
use arraydiar::der::{score_recordings, ScoreOptions, DEFAULT_COLLAR};
use arraydiar::doa::{DoaTrack, DEFAULT_DIRECTIONS, DEFAULT_LAG_RESOLUTION};
use arraydiar::fusion::{fuse, FusionOptions, WeightedHypothesis};
use arraydiar::io::{load_wav, read_embeddings, read_rttm, write_rttm, write_wav, FramePlan, MicArrayGeometry, SampleFormat};
use arraydiar::pipeline::{
    self, parse_stages, ClusterMethod, ClusterSettings, CountSettings, DiarizeSettings, DoaSettings, PipelineConfig,
};
use arraydiar::synth::{render, SceneSpec};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "arraydiar", version, about = "Speaker diarization for microphone-array meeting recordings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-frame SRP-PHAT direction of arrival over VAD speech.
    Doa(DoaArgs),
    /// Speaker count from a direction track.
    Count(CountArgs),
    /// Localize, count and label sectors in one pass.
    Diarize(DiarizeArgs),
    /// Cluster speaker embeddings with AHC or NME-SC.
    Cluster(ClusterArgs),
    /// Spectral clustering with the speaker count taken from a census.
    Recluster(ReclusterArgs),
    /// Weighted voting over several RTTM hypotheses.
    Fuse(FuseArgs),
    /// Diarization error rate of a hypothesis against a reference.
    Score(ScoreArgs),
    /// Render a synthetic multichannel scene.
    Synth(SynthArgs),
    /// Run the configured stages over a manifest of recordings.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct FrameArgs {
    /// Frame length in seconds.
    #[arg(long = "frame", default_value_t = FramePlan::default().frame_length)]
    frame_length: f64,
    /// Frame shift in seconds.
    #[arg(long = "shift", default_value_t = FramePlan::default().frame_shift)]
    frame_shift: f64,
}

#[derive(Args)]
struct SpatialInputs {
    #[arg(long)]
    audio: PathBuf,
    #[arg(long)]
    geometry: PathBuf,
    #[arg(long)]
    vad: PathBuf,
    /// Number of steering directions.
    #[arg(long, default_value_t = DEFAULT_DIRECTIONS)]
    grid: usize,
    /// Lag interpolation factor (lags per sample).
    #[arg(long, default_value_t = DEFAULT_LAG_RESOLUTION)]
    lag_resolution: usize,
    #[command(flatten)]
    frames: FrameArgs,
}

impl SpatialInputs {
    fn settings(&self) -> DoaSettings {
        DoaSettings {
            frame_length: self.frames.frame_length,
            frame_shift: self.frames.frame_shift,
            directions: self.grid,
            lag_resolution: self.lag_resolution,
        }
    }
}

#[derive(Args)]
struct DoaArgs {
    #[command(flatten)]
    inputs: SpatialInputs,
    /// Track CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CountArgs {
    #[arg(long)]
    track: PathBuf,
    /// Census JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the 36-bin histogram as CSV.
    #[arg(long)]
    hist_csv: Option<PathBuf>,
    /// Count frames flagged as low confidence too.
    #[arg(long)]
    include_low_confidence: bool,
    #[command(flatten)]
    frames: FrameArgs,
}

#[derive(Args)]
struct DiarizeArgs {
    #[command(flatten)]
    inputs: SpatialInputs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    hist_csv: Option<PathBuf>,
    /// Odd window length for a circular median over the track.
    #[arg(long)]
    smooth: Option<usize>,
    /// Label low-confidence frames by their own azimuth instead of the previous label.
    #[arg(long)]
    no_carry_forward: bool,
    #[arg(long)]
    include_low_confidence: bool,
    /// Recording id for the RTTM; defaults to the audio file stem.
    #[arg(long)]
    recording_id: Option<String>,
}

#[derive(Args)]
struct ClusterOpts {
    /// Upper bound on the speaker count searched by NME-SC.
    #[arg(long, default_value_t = ClusterSettings::default().max_speakers)]
    max_speakers: usize,
    /// k-means restarts.
    #[arg(long, default_value_t = ClusterSettings::default().restarts)]
    restarts: usize,
    #[arg(long, default_value_t = ClusterSettings::default().seed)]
    seed: u64,
    /// Recording id for the RTTM; defaults to the embeddings file stem.
    #[arg(long)]
    recording_id: Option<String>,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value = "nme-sc")]
    method: ClusterMethod,
    /// AHC merge threshold on average cosine similarity.
    #[arg(long, default_value_t = ClusterSettings::default().threshold, allow_hyphen_values = true)]
    threshold: f64,
    #[command(flatten)]
    opts: ClusterOpts,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReclusterArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    census: PathBuf,
    #[command(flatten)]
    opts: ClusterOpts,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FuseArgs {
    /// Hypothesis as PATH:WEIGHT; repeat for each system.
    #[arg(long = "hyp", required = true, value_parser = parse_weighted)]
    hyps: Vec<(PathBuf, f64)>,
    #[arg(long)]
    out: PathBuf,
    /// Keep only the top-voted label in each region.
    #[arg(long)]
    single_label: bool,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long, default_value_t = DEFAULT_COLLAR)]
    collar: f64,
    /// Leave regions with two or more reference speakers out of scoring.
    #[arg(long)]
    ignore_overlap: bool,
    /// JSON report; per-recording reports are included when there are several.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene description (TOML).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out_audio: PathBuf,
    #[arg(long)]
    out_ref: PathBuf,
    #[arg(long)]
    out_vad: PathBuf,
    /// Write 16-bit PCM instead of 32-bit float.
    #[arg(long)]
    int16: bool,
    /// Overrides the seed in the scene file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated stages: doa,count,diarize,cluster,recluster,fuse,score.
    #[arg(long)]
    stages: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override any config field, e.g. `--set cluster.seed=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn parse_weighted(text: &str) -> std::result::Result<(PathBuf, f64), String> {
    let (path, weight) = text.rsplit_once(':').ok_or_else(|| format!("expected PATH:WEIGHT, got {text:?}"))?;
    let weight: f64 = weight.parse().map_err(|_| format!("bad weight in {text:?}"))?;
    Ok((PathBuf::from(path), weight))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "rec".into())
}

fn cluster_settings(method: ClusterMethod, threshold: f64, opts: &ClusterOpts) -> ClusterSettings {
    ClusterSettings {
        method,
        threshold,
        max_speakers: opts.max_speakers,
        restarts: opts.restarts,
        seed: opts.seed,
    }
}

fn doa(args: DoaArgs) -> Result<()> {
    let i = &args.inputs;
    let clip = load_wav(&i.audio)?;
    let geometry = MicArrayGeometry::load(&i.geometry)?;
    let vad = read_rttm(&i.vad)?;
    let track = pipeline::run_doa(&clip, &geometry, &vad, &i.settings())?;
    track.write_csv(&args.out)?;
    log::info!("{} frames localized", track.len());
    Ok(())
}

fn count(args: CountArgs) -> Result<()> {
    let plan = FramePlan::new(args.frames.frame_length, args.frames.frame_shift)?;
    let track = DoaTrack::read_csv(&args.track, plan)?;
    let settings = CountSettings {
        include_low_confidence: args.include_low_confidence,
    };
    let (hist, census) = pipeline::run_count(&track, &settings)?;
    census.write_json(&args.out)?;
    if let Some(path) = &args.hist_csv {
        hist.write_csv(path)?;
    }
    println!("{} speaker(s) at {:?} deg", census.count, census.peak_azimuths);
    Ok(())
}

fn diarize(args: DiarizeArgs) -> Result<()> {
    let i = &args.inputs;
    let clip = load_wav(&i.audio)?;
    let geometry = MicArrayGeometry::load(&i.geometry)?;
    let vad = read_rttm(&i.vad)?;
    let id = args.recording_id.clone().unwrap_or_else(|| stem(&i.audio));
    let track = pipeline::run_doa(&clip, &geometry, &vad, &i.settings())?;
    let count = CountSettings {
        include_low_confidence: args.include_low_confidence,
    };
    let (hist, census) = pipeline::run_count(&track, &count)?;
    let diarize = DiarizeSettings {
        carry_forward: !args.no_carry_forward,
        smooth: args.smooth,
    };
    let segments = pipeline::run_sectors(&track, &census, &diarize, &id)?;
    write_rttm(&segments, &args.out)?;
    if let Some(path) = &args.hist_csv {
        hist.write_csv(path)?;
    }
    println!("{} speaker(s) at {:?} deg", census.count, census.peak_azimuths);
    Ok(())
}

fn cluster(args: ClusterArgs) -> Result<()> {
    if args.method == ClusterMethod::Ahc {
        log::warn!(
            "AHC threshold {} is tied to the similarity scale of the embedding extractor it was tuned on; \
             it does not transfer to embeddings from another extractor",
            args.threshold
        );
    }
    let set = read_embeddings(&args.embeddings)?;
    let id = args.opts.recording_id.clone().unwrap_or_else(|| stem(&args.embeddings));
    let settings = cluster_settings(args.method, args.threshold, &args.opts);
    let (assignment, rttm) = pipeline::cluster_embeddings(&set, &settings, &id)?;
    write_rttm(&rttm, &args.out)?;
    match assignment.p {
        Some(p) => println!("{} cluster(s), p = {p}", assignment.k),
        None => println!("{} cluster(s)", assignment.k),
    }
    Ok(())
}

fn recluster(args: ReclusterArgs) -> Result<()> {
    let set = read_embeddings(&args.embeddings)?;
    let census = SpeakerCensus::read_json(&args.census)?;
    let id = args.opts.recording_id.clone().unwrap_or_else(|| stem(&args.embeddings));
    let settings = cluster_settings(ClusterMethod::NmeSc, ClusterSettings::default().threshold, &args.opts);
    let (assignment, rttm) = pipeline::recluster_embeddings(&set, &census, &settings, &id)?;
    write_rttm(&rttm, &args.out)?;
    println!("{} cluster(s)", assignment.k);
    Ok(())
}

fn fuse_cmd(args: FuseArgs) -> Result<()> {
    let hyps = args
        .hyps
        .iter()
        .map(|(path, w)| Ok(WeightedHypothesis::new(read_rttm(path)?, *w)))
        .collect::<Result<Vec<_>>>()?;
    let fused = fuse(
        &hyps,
        FusionOptions {
            single_label: args.single_label,
        },
    )?;
    write_rttm(&fused, &args.out)?;
    Ok(())
}

fn score_cmd(args: ScoreArgs) -> Result<()> {
    let reference = read_rttm(&args.reference)?;
    let hyp = read_rttm(&args.hyp)?;
    let options = ScoreOptions {
        collar: args.collar,
        ignore_overlap: args.ignore_overlap,
    };
    let (per_recording, pooled) = score_recordings(&reference, &hyp, &options)?;
    if per_recording.len() > 1 {
        for (id, report) in &per_recording {
            println!("{id}\n{}", report.to_table());
        }
        println!("pooled");
    }
    println!("{}", pooled.to_table());
    if let Some(path) = &args.out {
        if per_recording.len() > 1 {
            let doc = serde_json::json!({ "recordings": per_recording, "pooled": pooled });
            std::fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")
                .with_context(|| format!("writing {}", path.display()))?;
        } else {
            pooled.write_json(path)?;
        }
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut spec = SceneSpec::load(&args.spec)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let scene = render(&spec)?;
    let format = if args.int16 { SampleFormat::Int16 } else { SampleFormat::Float32 };
    write_wav(&scene.clip, &args.out_audio, format)?;
    write_rttm(&scene.reference, &args.out_ref)?;
    write_rttm(&scene.vad, &args.out_vad)?;
    Ok(())
}

/// Sets `a.b.c = value` inside a TOML table; the value is parsed as TOML and
/// falls back to a plain string.
fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let Some((key, raw)) = assignment.split_once('=') else {
        bail!("override {assignment:?} is not KEY=VALUE");
    };
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut node = table;
    for part in parents {
        node = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .with_context(|| format!("override {key}: {part} is not a table"))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn load_config(args: &PipelineArgs) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut table: toml::Table = text.parse().with_context(|| format!("parsing {}", args.config.display()))?;
    for o in &args.overrides {
        apply_override(&mut table, o)?;
    }
    let mut config = PipelineConfig::from_toml_str(&toml::to_string(&table)?)?;
    if let Some(dir) = &args.output_dir {
        config.output_dir = dir.clone();
    }
    if let Some(stages) = &args.stages {
        config.stages = Some(parse_stages(stages)?);
    }
    let base = args.config.parent().unwrap_or(Path::new(""));
    config.resolve_paths(base);
    Ok(config)
}

fn pipeline_cmd(args: PipelineArgs) -> Result<()> {
    let config = load_config(&args)?;
    let (outcomes, summary) = pipeline::run(&config)?;
    for o in &outcomes {
        let stages: Vec<&str> = o.stages.iter().map(|s| s.name()).collect();
        let count = o.census.as_ref().map(|c| c.count.to_string()).unwrap_or_else(|| "-".into());
        println!("{}: stages {} / speakers {}", o.id, stages.join(","), count);
    }
    for (name, report) in &summary.pooled {
        println!("{name}: DER {:.2}%", report.der);
    }
    Ok(())
}

/// Error chain joined by ": ", skipping causes the outer message already shows.
fn describe(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !out.ends_with(&text) {
            out = format!("{out}: {text}");
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Doa(a) => doa(a),
        Command::Count(a) => count(a),
        Command::Diarize(a) => diarize(a),
        Command::Cluster(a) => cluster(a),
        Command::Recluster(a) => recluster(a),
        Command::Fuse(a) => fuse_cmd(a),
        Command::Score(a) => score_cmd(a),
        Command::Synth(a) => synth(a),
        Command::Pipeline(a) => pipeline_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{}", describe(&e));
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_paths() {
        assert_eq!(parse_weighted("a/b.rttm:0.3").unwrap(), (PathBuf::from("a/b.rttm"), 0.3));
        assert_eq!(parse_weighted("c:\\x.rttm:1").unwrap(), (PathBuf::from("c:\\x.rttm"), 1.0));
        assert!(parse_weighted("a.rttm").is_err());
        assert!(parse_weighted("a.rttm:x").is_err());
    }

    #[test]
    fn overrides_nest_and_parse() {
        let mut t: toml::Table = "output_dir = \"o\"\n[cluster]\nseed = 1\n".parse().unwrap();
        apply_override(&mut t, "cluster.seed=7").unwrap();
        apply_override(&mut t, "cluster.method=ahc").unwrap();
        apply_override(&mut t, "doa.frame_length=0.25").unwrap();
        assert_eq!(t["cluster"]["seed"].as_integer(), Some(7));
        assert_eq!(t["cluster"]["method"].as_str(), Some("ahc"));
        assert_eq!(t["doa"]["frame_length"].as_float(), Some(0.25));
        assert!(apply_override(&mut t, "output_dir.x=1").is_err());
        assert!(apply_override(&mut t, "novalue").is_err());
    }
}
