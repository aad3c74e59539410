mod common;

use std::collections::BTreeMap;
use std::path::Path;

use arraydiar::der::{score, ScoreOptions};
use arraydiar::io::{write_embeddings, write_rttm, write_wav, MicArrayGeometry, SampleFormat};
use arraydiar::pipeline::{run, spatial_diarize, PipelineConfig, Stage};
use arraydiar::synth::{render, SceneSpec, SignalKind, SourceSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn three_speaker_scene(id: &str, seed: u64, snr_db: f64) -> SceneSpec {
    let azimuths = [30.0, 150.0, 270.0];
    let turns = [2.0, 3.5, 2.5, 3.0, 2.0, 4.0, 3.0, 2.5, 3.5];
    let mut schedules = vec![Vec::new(); 3];
    let mut t = 0.5;
    for (i, d) in turns.iter().enumerate() {
        schedules[i % 3].push((t, t + d));
        t += d;
    }
    SceneSpec {
        recording_id: id.into(),
        geometry: MicArrayGeometry::circular(4, 0.1, 16_000).unwrap(),
        sources: azimuths
            .iter()
            .zip(schedules)
            .enumerate()
            .map(|(i, (&az, sched))| SourceSpec::new(az, sched, SignalKind::SpeechLike).labeled(format!("s{i}")))
            .collect(),
        snr_db,
        duration: t + 0.5,
        seed,
        gain: 0.25,
    }
}

#[test]
fn spatial_diarization_of_a_clean_scene() {
    let spec = three_speaker_scene("clean", 5, f64::INFINITY);
    let scene = render(&spec).unwrap();
    let config = PipelineConfig::from_toml_str("output_dir = \"unused\"").unwrap();
    let out = spatial_diarize(&scene.clip, &spec.geometry, &scene.vad, &config, "clean").unwrap();
    assert_eq!(out.census.count, 3);
    let report = score(&scene.reference, &out.segments, &ScoreOptions::default()).unwrap();
    assert!(report.der < 5.0, "DER {:.2}%", report.der);
}

fn write_manifest(dir: &Path) -> PipelineConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let centroids = common::orthonormal(&mut rng, 3, 32);
    let mut recordings = String::new();
    let mut geometry = None;
    for (i, id) in ["meet_a", "meet_b"].iter().enumerate() {
        let spec = three_speaker_scene(id, 40 + i as u64, 20.0);
        let scene = render(&spec).unwrap();
        write_wav(&scene.clip, dir.join(format!("{id}.wav")), SampleFormat::Int16).unwrap();
        write_rttm(&scene.vad, dir.join(format!("{id}.vad.rttm"))).unwrap();
        write_rttm(&scene.reference, dir.join(format!("{id}.ref.rttm"))).unwrap();
        let by_label: BTreeMap<String, Vec<f64>> = (0..3).map(|s| (format!("s{s}"), centroids[s].clone())).collect();
        let emb = common::embeddings_for(&mut rng, &scene.reference, &by_label, 0.4);
        write_embeddings(&emb, dir.join(format!("{id}.emb"))).unwrap();
        geometry = Some(spec.geometry.clone());
        recordings += &format!(
            "[[recordings]]\nid = \"{id}\"\naudio = \"{id}.wav\"\nvad = \"{id}.vad.rttm\"\nreference = \"{id}.ref.rttm\"\nembeddings = \"{id}.emb\"\n\n"
        );
    }
    std::fs::write(dir.join("array.toml"), geometry.unwrap().to_toml_string()).unwrap();
    let text = format!(
        "output_dir = \"out\"\ngeometry = \"array.toml\"\n\n[cluster]\nseed = 3\n\n[fuse]\nsingle_label = true\ninputs = [\n  {{ source = \"spatial\", weight = 0.3 }},\n  {{ source = \"cluster\", weight = 0.3 }},\n  {{ source = \"recluster\", weight = 0.4 }},\n]\n\n{recordings}"
    );
    std::fs::write(dir.join("run.toml"), text).unwrap();
    PipelineConfig::load(dir.join("run.toml")).unwrap()
}

#[test]
fn full_manifest_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_manifest(dir.path());
    let (outcomes, summary) = run(&config).unwrap();
    assert_eq!(outcomes.len(), 2);
    for o in &outcomes {
        assert_eq!(o.stages, Stage::ALL.to_vec());
        assert_eq!(o.census.as_ref().unwrap().count, 3);
        for name in ["track.csv", "histogram.csv", "census.json", "spatial.rttm", "cluster.rttm", "recluster.rttm", "fused.rttm", "report_fused.json"] {
            assert!(config.output_dir.join(&o.id).join(name).is_file(), "{} missing {name}", o.id);
        }
    }
    assert!(config.output_dir.join("summary.json").is_file());
    for name in ["spatial", "recluster", "fused"] {
        let der = summary.pooled[name].der;
        assert!(der < 10.0, "{name}: DER {der:.2}%");
    }
}

#[test]
fn subset_of_stages_reuses_intermediates() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = write_manifest(dir.path());
    config.stages = Some(vec![Stage::Doa, Stage::Count]);
    run(&config).unwrap();
    config.stages = Some(vec![Stage::Diarize, Stage::Score]);
    let (outcomes, summary) = run(&config).unwrap();
    assert_eq!(outcomes[0].stages, vec![Stage::Diarize, Stage::Score]);
    assert!(summary.pooled.contains_key("spatial"));
}

#[test]
fn runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = write_manifest(dir.path());
    run(&config).unwrap();
    let first = dir.path().join("out");
    let second = dir.path().join("out2");
    config.output_dir = second.clone();
    run(&config).unwrap();
    let mut compared = 0;
    for entry in walk(&first) {
        let rel = entry.strip_prefix(&first).unwrap();
        assert_eq!(std::fs::read(&entry).unwrap(), std::fs::read(second.join(rel)).unwrap(), "{}", rel.display());
        compared += 1;
    }
    assert!(compared > 10);
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}
