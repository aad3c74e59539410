//! End-to-end runs over a manifest of recordings: localization, counting,
//! sector diarization, embedding (re-)clustering, fusion and scoring, with
//! every intermediate written to disk.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::census::{build_histogram, count_speakers, AngularHistogram, SpeakerCensus};
use crate::cluster::{
    ahc, assignment_to_rttm, cosine_affinity, nme_sc, sc_fixed_k, ClusterAssignment, KMeansOptions, SpectralOptions,
    DEFAULT_AHC_THRESHOLD, DEFAULT_MAX_SPEAKERS,
};
use crate::der::{score, DerReport, ScoreOptions, DEFAULT_COLLAR};
use crate::doa::{localize, DoaTrack, SteeringGrid, DEFAULT_DIRECTIONS, DEFAULT_LAG_RESOLUTION};
use crate::fusion::{fuse, FusionOptions, WeightedHypothesis};
use crate::io::{load_wav, read_embeddings, read_rttm, write_rttm, EmbeddingSet, FramePlan, MicArrayGeometry, MultichannelClip, SegmentList};
use crate::sectors::{assign_frames, build_sectors, frames_to_rttm, smooth_track};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Doa,
    Count,
    Diarize,
    Cluster,
    Recluster,
    Fuse,
    Score,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Doa,
        Stage::Count,
        Stage::Diarize,
        Stage::Cluster,
        Stage::Recluster,
        Stage::Fuse,
        Stage::Score,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Doa => "doa",
            Stage::Count => "count",
            Stage::Diarize => "diarize",
            Stage::Cluster => "cluster",
            Stage::Recluster => "recluster",
            Stage::Fuse => "fuse",
            Stage::Score => "score",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// Parses a comma-separated stage list.
pub fn parse_stages(text: &str) -> Result<Vec<Stage>> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoaSettings {
    pub frame_length: f64,
    pub frame_shift: f64,
    pub directions: usize,
    pub lag_resolution: usize,
}

impl Default for DoaSettings {
    fn default() -> Self {
        let plan = FramePlan::default();
        Self {
            frame_length: plan.frame_length,
            frame_shift: plan.frame_shift,
            directions: DEFAULT_DIRECTIONS,
            lag_resolution: DEFAULT_LAG_RESOLUTION,
        }
    }
}

impl DoaSettings {
    pub fn plan(&self) -> Result<FramePlan> {
        FramePlan::new(self.frame_length, self.frame_shift)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountSettings {
    pub include_low_confidence: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiarizeSettings {
    pub carry_forward: bool,
    /// Odd circular-median window over the track; off when absent.
    pub smooth: Option<usize>,
}

impl Default for DiarizeSettings {
    fn default() -> Self {
        Self {
            carry_forward: true,
            smooth: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterMethod {
    Ahc,
    NmeSc,
}

impl FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ahc" => Ok(ClusterMethod::Ahc),
            "nme-sc" => Ok(ClusterMethod::NmeSc),
            other => Err(Error::Config(format!("unknown clustering method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSettings {
    pub method: ClusterMethod,
    pub threshold: f64,
    pub max_speakers: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        Self {
            method: ClusterMethod::NmeSc,
            threshold: DEFAULT_AHC_THRESHOLD,
            max_speakers: DEFAULT_MAX_SPEAKERS,
            restarts: KMeansOptions::default().restarts,
            seed: 0,
        }
    }
}

impl ClusterSettings {
    pub fn kmeans(&self) -> KMeansOptions {
        KMeansOptions {
            restarts: self.restarts,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuseInput {
    /// `spatial`, `cluster`, `recluster`, or a name from a recording's
    /// `hypotheses` table.
    pub source: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuseSettings {
    pub inputs: Vec<FuseInput>,
    pub single_label: bool,
}

impl Default for FuseSettings {
    fn default() -> Self {
        let input = |source: &str, weight| FuseInput {
            source: source.into(),
            weight,
        };
        Self {
            inputs: vec![input("spatial", 0.3), input("cluster", 0.3), input("recluster", 0.4)],
            single_label: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSettings {
    pub collar: f64,
    pub ignore_overlap: bool,
}

impl Default for ScoreSettings {
    fn default() -> Self {
        Self {
            collar: DEFAULT_COLLAR,
            ignore_overlap: false,
        }
    }
}

impl ScoreSettings {
    pub fn options(&self) -> ScoreOptions {
        ScoreOptions {
            collar: self.collar,
            ignore_overlap: self.ignore_overlap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recording {
    pub id: String,
    pub audio: Option<PathBuf>,
    /// Overrides the run-wide geometry.
    pub geometry: Option<PathBuf>,
    pub vad: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Externally produced RTTMs, available to fusion and scoring by name.
    #[serde(default)]
    pub hypotheses: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    pub geometry: Option<PathBuf>,
    /// When absent, each recording runs every stage its inputs allow.
    pub stages: Option<Vec<Stage>>,
    #[serde(default)]
    pub doa: DoaSettings,
    #[serde(default)]
    pub count: CountSettings,
    #[serde(default)]
    pub diarize: DiarizeSettings,
    #[serde(default)]
    pub cluster: ClusterSettings,
    /// Absent means the default 0.3/0.3/0.4 fusion of the three built-in
    /// hypotheses, used only when `fuse` is selected explicitly.
    pub fuse: Option<FuseSettings>,
    #[serde(default)]
    pub score: ScoreSettings,
    #[serde(default)]
    pub recordings: Vec<Recording>,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        self.geometry.iter_mut().for_each(fix);
        for r in &mut self.recordings {
            for p in [&mut r.audio, &mut r.geometry, &mut r.vad, &mut r.reference, &mut r.embeddings] {
                p.iter_mut().for_each(fix);
            }
            r.hypotheses.values_mut().for_each(fix);
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn fuse_settings(&self) -> FuseSettings {
        self.fuse.clone().unwrap_or_default()
    }

    fn recording_dir(&self, id: &str) -> PathBuf {
        self.output_dir.join(id)
    }
}

/// Output file names inside a recording's directory.
pub mod files {
    pub const TRACK: &str = "track.csv";
    pub const HISTOGRAM: &str = "histogram.csv";
    pub const CENSUS: &str = "census.json";
    pub const SPATIAL: &str = "spatial.rttm";
    pub const CLUSTER: &str = "cluster.rttm";
    pub const RECLUSTER: &str = "recluster.rttm";
    pub const FUSED: &str = "fused.rttm";
    pub const SUMMARY: &str = "summary.json";

    pub fn report(hypothesis: &str) -> String {
        format!("report_{hypothesis}.json")
    }
}

const BUILTIN_HYPOTHESES: [(&str, &str, Stage); 4] = [
    ("spatial", files::SPATIAL, Stage::Diarize),
    ("cluster", files::CLUSTER, Stage::Cluster),
    ("recluster", files::RECLUSTER, Stage::Recluster),
    ("fused", files::FUSED, Stage::Fuse),
];

/// Everything a recording's run needs, resolved and checked up front.
#[derive(Debug, Clone)]
struct Plan {
    recording: Recording,
    dir: PathBuf,
    geometry: Option<PathBuf>,
    stages: Vec<Stage>,
}

impl Plan {
    fn runs(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    fn output(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Whether an intermediate is produced by this run or already on disk.
    fn available(&self, name: &str, producer: Stage) -> bool {
        self.runs(producer) || self.output(name).is_file()
    }

    fn hypothesis_path(&self, name: &str) -> Option<PathBuf> {
        if let Some((_, file, _)) = BUILTIN_HYPOTHESES.iter().find(|(n, _, _)| *n == name) {
            return Some(self.output(file));
        }
        self.recording.hypotheses.get(name).cloned()
    }

    fn hypothesis_available(&self, name: &str) -> bool {
        match BUILTIN_HYPOTHESES.iter().find(|(n, _, _)| *n == name) {
            Some((_, file, producer)) => self.available(file, *producer),
            None => self.recording.hypotheses.get(name).is_some_and(|p| p.is_file()),
        }
    }
}

fn exists(path: &Option<PathBuf>) -> bool {
    path.as_ref().is_some_and(|p| p.is_file())
}

/// Reasons `stage` cannot run for `plan` (empty when it can).
fn missing_inputs(config: &PipelineConfig, plan: &Plan, stage: Stage) -> Vec<String> {
    let r = &plan.recording;
    let mut missing = Vec::new();
    let mut need = |ok: bool, what: &str| {
        if !ok {
            missing.push(what.to_string());
        }
    };
    match stage {
        Stage::Doa => {
            need(exists(&r.audio), "audio");
            need(exists(&plan.geometry), "geometry");
            need(exists(&r.vad), "vad");
        }
        Stage::Count => need(plan.available(files::TRACK, Stage::Doa), "DOA track"),
        Stage::Diarize => {
            need(plan.available(files::TRACK, Stage::Doa), "DOA track");
            need(plan.available(files::CENSUS, Stage::Count), "speaker census");
        }
        Stage::Cluster => need(exists(&r.embeddings), "embeddings"),
        Stage::Recluster => {
            need(exists(&r.embeddings), "embeddings");
            need(plan.available(files::CENSUS, Stage::Count), "speaker census");
        }
        Stage::Fuse => {
            let settings = config.fuse_settings();
            need(!settings.inputs.is_empty(), "fusion inputs");
            for input in &settings.inputs {
                need(plan.hypothesis_available(&input.source), &format!("hypothesis `{}`", input.source));
            }
        }
        Stage::Score => need(exists(&r.reference), "reference"),
    }
    missing
}

fn plan_recordings(config: &PipelineConfig) -> Result<Vec<Plan>> {
    if config.recordings.is_empty() {
        return Err(Error::Config("no recordings in the manifest".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut plans = Vec::new();
    let mut problems = Vec::new();
    for r in &config.recordings {
        if r.id.is_empty() || r.id.contains(['/', '\\']) || !seen.insert(r.id.clone()) {
            return Err(Error::Config(format!("recording id `{}` is empty, duplicated or not a plain name", r.id)));
        }
        let mut plan = Plan {
            recording: r.clone(),
            dir: config.recording_dir(&r.id),
            geometry: r.geometry.clone().or_else(|| config.geometry.clone()),
            stages: Vec::new(),
        };
        match &config.stages {
            Some(stages) => {
                let mut wanted = stages.clone();
                wanted.sort();
                wanted.dedup();
                plan.stages = wanted.clone();
                for stage in wanted {
                    let missing = missing_inputs(config, &plan, stage);
                    if !missing.is_empty() {
                        problems.push(format!("{}: stage {stage} is missing {}", r.id, missing.join(", ")));
                    }
                }
            }
            None => {
                for stage in Stage::ALL {
                    // fusion runs only when configured
                    if stage == Stage::Fuse && config.fuse.is_none() {
                        continue;
                    }
                    plan.stages.push(stage);
                    if !missing_inputs(config, &plan, stage).is_empty() {
                        plan.stages.pop();
                    }
                }
                if plan.stages.is_empty() {
                    problems.push(format!("{}: no stage has all of its inputs", r.id));
                }
            }
        }
        plans.push(plan);
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }
    Ok(plans)
}

/// Results of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingOutcome {
    pub id: String,
    pub stages: Vec<Stage>,
    pub census: Option<SpeakerCensus>,
    /// Hypothesis name to RTTM path, for every hypothesis written or used.
    pub hypotheses: BTreeMap<String, PathBuf>,
    pub reports: BTreeMap<String, DerReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    /// Per recording, per hypothesis.
    pub recordings: BTreeMap<String, BTreeMap<String, DerReport>>,
    /// Per hypothesis, pooled over recordings by scored time.
    pub pooled: BTreeMap<String, DerReport>,
}

/// Output of the spatial branch for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialResult {
    pub track: DoaTrack,
    pub histogram: AngularHistogram,
    pub census: SpeakerCensus,
    pub segments: SegmentList,
}

pub fn run_doa(clip: &MultichannelClip, geometry: &MicArrayGeometry, vad: &SegmentList, settings: &DoaSettings) -> Result<DoaTrack> {
    if clip.sample_rate() != geometry.sample_rate {
        return Err(Error::InvalidInput(format!(
            "audio sample rate {} differs from geometry sample rate {}",
            clip.sample_rate(),
            geometry.sample_rate
        )));
    }
    let grid = SteeringGrid::build(geometry, settings.directions)?.with_lag_resolution(settings.lag_resolution);
    localize(clip, &settings.plan()?, &grid, vad)
}

pub fn run_count(track: &DoaTrack, settings: &CountSettings) -> Result<(AngularHistogram, SpeakerCensus)> {
    let hist = build_histogram(track, settings.include_low_confidence)?;
    let census = count_speakers(&hist)?;
    Ok((hist, census))
}

pub fn run_sectors(track: &DoaTrack, census: &SpeakerCensus, settings: &DiarizeSettings, recording_id: &str) -> Result<SegmentList> {
    let map = build_sectors(census)?;
    let smoothed;
    let track = match settings.smooth {
        Some(n) if n > 1 => {
            smoothed = smooth_track(track, n)?;
            &smoothed
        }
        _ => track,
    };
    let labels = assign_frames(track, &map, settings.carry_forward);
    Ok(frames_to_rttm(&labels, &track.plan, recording_id))
}

/// Localization, counting and sector labeling in one pass.
pub fn spatial_diarize(
    clip: &MultichannelClip,
    geometry: &MicArrayGeometry,
    vad: &SegmentList,
    config: &PipelineConfig,
    recording_id: &str,
) -> Result<SpatialResult> {
    let track = run_doa(clip, geometry, vad, &config.doa)?;
    let (histogram, census) = run_count(&track, &config.count)?;
    let segments = run_sectors(&track, &census, &config.diarize, recording_id)?;
    Ok(SpatialResult {
        track,
        histogram,
        census,
        segments,
    })
}

pub fn cluster_embeddings(set: &EmbeddingSet, settings: &ClusterSettings, recording_id: &str) -> Result<(ClusterAssignment, SegmentList)> {
    let aff = cosine_affinity(set)?;
    let assignment = match settings.method {
        ClusterMethod::Ahc => ahc(&aff, settings.threshold),
        ClusterMethod::NmeSc => nme_sc(
            &aff,
            SpectralOptions {
                max_speakers: settings.max_speakers,
                kmeans: settings.kmeans(),
            },
        )?,
    };
    let rttm = assignment_to_rttm(&assignment, set, recording_id)?;
    Ok((assignment, rttm))
}

pub fn recluster_embeddings(
    set: &EmbeddingSet,
    census: &SpeakerCensus,
    settings: &ClusterSettings,
    recording_id: &str,
) -> Result<(ClusterAssignment, SegmentList)> {
    let aff = cosine_affinity(set)?;
    let assignment = sc_fixed_k(&aff, census.count, settings.kmeans())?;
    let rttm = assignment_to_rttm(&assignment, set, recording_id)?;
    Ok((assignment, rttm))
}

fn timed<T>(id: &str, stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let started = Instant::now();
    let out = f();
    match &out {
        Ok(_) => log::info!("{id}: {stage} finished in {:.3} s", started.elapsed().as_secs_f64()),
        Err(e) => log::error!("{id}: {stage} failed after {:.3} s: {e}", started.elapsed().as_secs_f64()),
    }
    out
}

fn run_recording(config: &PipelineConfig, plan: &Plan) -> Result<RecordingOutcome> {
    let id = plan.recording.id.as_str();
    let r = &plan.recording;
    std::fs::create_dir_all(&plan.dir).map_err(|e| Error::io(&plan.dir, e))?;
    let doa_plan = config.doa.plan()?;
    let mut track: Option<DoaTrack> = None;
    let mut census: Option<SpeakerCensus> = None;
    let mut hypotheses = BTreeMap::new();

    let load_track = |track: &Option<DoaTrack>| -> Result<DoaTrack> {
        match track {
            Some(t) => Ok(t.clone()),
            None => DoaTrack::read_csv(plan.output(files::TRACK), doa_plan),
        }
    };
    let load_census = |census: &Option<SpeakerCensus>| -> Result<SpeakerCensus> {
        match census {
            Some(c) => Ok(c.clone()),
            None => SpeakerCensus::read_json(plan.output(files::CENSUS)),
        }
    };
    let embeddings = || read_embeddings(r.embeddings.as_ref().expect("validated"));

    for &stage in plan.stages.iter().filter(|&&s| s != Stage::Score) {
        timed(id, stage, || {
            match stage {
                Stage::Doa => {
                    let clip = load_wav(r.audio.as_ref().expect("validated"))?;
                    let geometry = MicArrayGeometry::load(plan.geometry.as_ref().expect("validated"))?;
                    let vad = read_rttm(r.vad.as_ref().expect("validated"))?.for_recording_or_all(id);
                    let t = run_doa(&clip, &geometry, &vad, &config.doa)?;
                    t.write_csv(plan.output(files::TRACK))?;
                    track = Some(t);
                }
                Stage::Count => {
                    let t = load_track(&track)?;
                    let (hist, c) = run_count(&t, &config.count)?;
                    hist.write_csv(plan.output(files::HISTOGRAM))?;
                    c.write_json(plan.output(files::CENSUS))?;
                    census = Some(c);
                }
                Stage::Diarize => {
                    let t = load_track(&track)?;
                    let c = load_census(&census)?;
                    let rttm = run_sectors(&t, &c, &config.diarize, id)?;
                    write_rttm(&rttm, plan.output(files::SPATIAL))?;
                    hypotheses.insert("spatial".to_string(), plan.output(files::SPATIAL));
                }
                Stage::Cluster => {
                    let (_, rttm) = cluster_embeddings(&embeddings()?, &config.cluster, id)?;
                    write_rttm(&rttm, plan.output(files::CLUSTER))?;
                    hypotheses.insert("cluster".to_string(), plan.output(files::CLUSTER));
                }
                Stage::Recluster => {
                    let c = load_census(&census)?;
                    let (_, rttm) = recluster_embeddings(&embeddings()?, &c, &config.cluster, id)?;
                    write_rttm(&rttm, plan.output(files::RECLUSTER))?;
                    hypotheses.insert("recluster".to_string(), plan.output(files::RECLUSTER));
                }
                Stage::Fuse => {
                    let settings = config.fuse_settings();
                    let mut inputs = Vec::new();
                    for input in &settings.inputs {
                        let path = plan.hypothesis_path(&input.source).expect("validated");
                        let segments = read_rttm(&path)?.for_recording_or_all(id).with_recording_id(id);
                        inputs.push(WeightedHypothesis::new(segments, input.weight));
                        hypotheses.insert(input.source.clone(), path);
                    }
                    let fused = fuse(
                        &inputs,
                        FusionOptions {
                            single_label: settings.single_label,
                        },
                    )?;
                    write_rttm(&fused, plan.output(files::FUSED))?;
                    hypotheses.insert("fused".to_string(), plan.output(files::FUSED));
                }
                Stage::Score => unreachable!("scored after the other stages"),
            }
            Ok(())
        })?;
    }

    let mut reports = BTreeMap::new();
    if plan.runs(Stage::Score) {
        timed(id, Stage::Score, || {
            // score everything this run produced, or whatever exists on disk
            for (name, _, _) in BUILTIN_HYPOTHESES {
                if !hypotheses.contains_key(name) && plan.hypothesis_available(name) {
                    hypotheses.insert(name.to_string(), plan.hypothesis_path(name).expect("builtin"));
                }
            }
            for (name, path) in &r.hypotheses {
                hypotheses.entry(name.clone()).or_insert_with(|| path.clone());
            }
            let reference = read_rttm(r.reference.as_ref().expect("validated"))?.for_recording_or_all(id);
            for (name, path) in &hypotheses {
                let hyp = read_rttm(path)?.for_recording_or_all(id);
                let report = score(&reference, &hyp, &config.score.options())?;
                report.write_json(plan.output(&files::report(name)))?;
                reports.insert(name.clone(), report);
            }
            Ok(())
        })?;
    }
    Ok(RecordingOutcome {
        id: id.to_string(),
        stages: plan.stages.clone(),
        census,
        hypotheses,
        reports,
    })
}

/// Validates the whole manifest, then runs recordings in parallel.
pub fn run(config: &PipelineConfig) -> Result<(Vec<RecordingOutcome>, PipelineSummary)> {
    config.doa.plan()?;
    let plans = plan_recordings(config)?;
    std::fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    let outcomes: Vec<RecordingOutcome> = plans
        .par_iter()
        .map(|plan| run_recording(config, plan))
        .collect::<Result<_>>()?;

    let mut recordings = BTreeMap::new();
    let mut by_hypothesis: BTreeMap<String, Vec<DerReport>> = BTreeMap::new();
    for o in &outcomes {
        if o.reports.is_empty() {
            continue;
        }
        for (name, report) in &o.reports {
            by_hypothesis.entry(name.clone()).or_default().push(report.clone());
        }
        recordings.insert(o.id.clone(), o.reports.clone());
    }
    let pooled = by_hypothesis
        .into_iter()
        .map(|(name, reports)| Ok((name, DerReport::combine(&reports)?)))
        .collect::<Result<_>>()?;
    let summary = PipelineSummary { recordings, pooled };
    if !summary.recordings.is_empty() {
        let path = config.output_dir.join(files::SUMMARY);
        let text = serde_json::to_string_pretty(&summary)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok((outcomes, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stages_parse() {
        assert_eq!(parse_stages("doa, count,score").unwrap(), vec![Stage::Doa, Stage::Count, Stage::Score]);
        assert!(parse_stages("doa,nope").is_err());
    }

    #[test]
    fn config_defaults_and_unknown_fields() {
        let c = PipelineConfig::from_toml_str(
            r#"
            output_dir = "out"
            [[recordings]]
            id = "a"
            audio = "a.wav"
            "#,
        )
        .unwrap();
        assert_eq!(c.doa, DoaSettings::default());
        assert_eq!(c.cluster.threshold, -0.015);
        assert!(c.stages.is_none());
        assert!(PipelineConfig::from_toml_str("output_dir = \"o\"\ncolar = 1\n").is_err());
        let back = PipelineConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut c = PipelineConfig::from_toml_str(
            "output_dir = \"out\"\n[[recordings]]\nid = \"a\"\naudio = \"x/a.wav\"\n[recordings.hypotheses]\nvbx = \"/abs/v.rttm\"\n",
        )
        .unwrap();
        c.resolve_paths(Path::new("/data/run"));
        assert_eq!(c.output_dir, PathBuf::from("/data/run/out"));
        assert_eq!(c.recordings[0].audio, Some(PathBuf::from("/data/run/x/a.wav")));
        assert_eq!(c.recordings[0].hypotheses["vbx"], PathBuf::from("/abs/v.rttm"));
    }

    #[test]
    fn missing_inputs_fail_before_work() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = PipelineConfig::from_toml_str(
            "output_dir = \"out\"\nstages = [\"doa\", \"cluster\"]\n[[recordings]]\nid = \"a\"\naudio = \"a.wav\"\n",
        )
        .unwrap();
        c.resolve_paths(dir.path());
        let err = run(&c).unwrap_err().to_string();
        assert!(err.contains("stage doa is missing audio, geometry, vad"), "{err}");
        assert!(err.contains("stage cluster is missing embeddings"), "{err}");
        assert!(!dir.path().join("out").exists());
    }
}
