//! Fusion of several diarization hypotheses of the same recording:
//! speaker labels are aligned to a common label space, then every
//! elementary time region takes the labels with the most voting weight.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::assignment::max_weight_matching;
use crate::io::SegmentList;
use crate::timeline::{self, Span};
use crate::{Error, Result};

/// Regions shorter than this (ms) take the decision of their longer
/// neighbor.
pub const MIN_REGION_MS: i64 = 10;

/// Normalized vote sums closer than this are equal, so that exact ties
/// survive weight normalization.
const VOTE_TOLERANCE: f64 = 1e-9;

fn compare_votes(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= VOTE_TOLERANCE {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedHypothesis {
    pub segments: SegmentList,
    pub weight: f64,
}

impl WeightedHypothesis {
    pub fn new(segments: SegmentList, weight: f64) -> Self {
        Self { segments, weight }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FusionOptions {
    /// Keep only the top-voted label in every region.
    pub single_label: bool,
}

/// Milliseconds each label of `a` shares with each label of `b`.
fn overlap_matrix(a: &[Span], a_labels: &[String], b: &[Span], b_labels: &[String]) -> Vec<Vec<f64>> {
    let a_index: BTreeMap<&str, usize> = a_labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let b_index: BTreeMap<&str, usize> = b_labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut m = vec![vec![0.0; b_labels.len()]; a_labels.len()];
    let cuts = timeline::cuts(a.iter().chain(b).flat_map(|s| [s.start, s.end]));
    for w in cuts.windows(2) {
        let ra = timeline::active(a, w[0], w[1]);
        if ra.is_empty() {
            continue;
        }
        let rb = timeline::active(b, w[0], w[1]);
        for x in &ra {
            for y in &rb {
                m[a_index[x]][b_index[y]] += (w[1] - w[0]) as f64;
            }
        }
    }
    m
}

fn labels_of(spans: &[Span]) -> Vec<String> {
    spans
        .iter()
        .map(|s| s.label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Maps labels of `other` onto labels of `reference` so that the summed
/// overlap is maximal. Labels left unmatched, or matched with zero
/// overlap, map to `None`.
pub fn label_mapping(reference: &SegmentList, other: &SegmentList) -> BTreeMap<String, Option<String>> {
    let r = timeline::spans(reference);
    let o = timeline::spans(other);
    let r_labels = labels_of(&r);
    let o_labels = labels_of(&o);
    let overlap = overlap_matrix(&o, &o_labels, &r, &r_labels);
    let matching = max_weight_matching(&overlap);
    o_labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let target = matching[i].filter(|&j| overlap[i][j] > 0.0).map(|j| r_labels[j].clone());
            (l.clone(), target)
        })
        .collect()
}

/// Hypotheses rewritten into one label space `spk0, spk1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Index of the hypothesis every other one was aligned to.
    pub anchor: usize,
    pub relabeled: Vec<SegmentList>,
    /// Original label to global label, per hypothesis.
    pub mappings: Vec<BTreeMap<String, String>>,
}

/// Aligns labels to the hypothesis with the most speech (the earliest one
/// on ties). The others are mapped in input order against everything
/// aligned so far, so a speaker missing from the anchor but present in two
/// other hypotheses gets one shared fresh label.
pub fn align_labels(hyps: &[SegmentList]) -> Result<Alignment> {
    if hyps.is_empty() {
        return Err(Error::InvalidInput("no hypotheses to align".into()));
    }
    let anchor = (0..hyps.len())
        .rev()
        .max_by(|&a, &b| hyps[a].total_duration().total_cmp(&hyps[b].total_duration()))
        .expect("nonempty");
    let mut mappings: Vec<BTreeMap<String, String>> = vec![BTreeMap::new(); hyps.len()];
    let mut next = 0usize;
    for l in hyps[anchor].speakers() {
        mappings[anchor].insert(l, format!("spk{next}"));
        next += 1;
    }
    // everything aligned so far, in global labels
    let mut pool = relabel(&hyps[anchor], &mappings[anchor]);
    for i in (0..hyps.len()).filter(|&i| i != anchor) {
        let mapping = label_mapping(&pool, &hyps[i]);
        let mut fresh = Vec::new();
        for (label, target) in mapping {
            let global = match target {
                Some(g) => g,
                None => {
                    let g = format!("spk{next}");
                    next += 1;
                    fresh.push(label.clone());
                    g
                }
            };
            mappings[i].insert(label, global);
        }
        let aligned = relabel(&hyps[i], &mappings[i]);
        pool.entries.extend(aligned.entries.into_iter().filter(|s| {
            fresh.iter().any(|f| mappings[i][f] == s.speaker)
        }));
    }
    let relabeled = hyps.iter().zip(&mappings).map(|(h, m)| relabel(h, m)).collect();
    Ok(Alignment {
        anchor,
        relabeled,
        mappings,
    })
}

fn relabel(list: &SegmentList, mapping: &BTreeMap<String, String>) -> SegmentList {
    SegmentList::new(
        list.iter()
            .map(|s| {
                let mut s = s.clone();
                s.speaker = mapping[&s.speaker].clone();
                s
            })
            .collect(),
    )
}

fn normalized_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidInput(format!("fusion weights must be positive, got {w}")));
    }
    let total: f64 = weights.iter().sum();
    Ok(weights.iter().map(|w| w / total).collect())
}

/// Labels kept for one region, given each hypothesis's asserted labels:
/// every label backed by more than half the weight of the systems that
/// assert speech there, or the top-voted label if none is.
fn decide(asserted: &[Vec<&str>], weights: &[f64], single_label: bool) -> Vec<String> {
    // label -> (votes, heaviest supporting system)
    let mut tally: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    let mut speaking = 0.0;
    for (labels, &w) in asserted.iter().zip(weights) {
        if !labels.is_empty() {
            speaking += w;
        }
        for l in labels {
            let e = tally.entry(l).or_insert((0.0, 0.0));
            e.0 += w;
            e.1 = e.1.max(w);
        }
    }
    let mut ranked: Vec<(&str, (f64, f64))> = tally.into_iter().collect();
    ranked.sort_by(|a, b| {
        compare_votes(b.1 .0, a.1 .0)
            .then(compare_votes(b.1 .1, a.1 .1))
            .then(a.0.cmp(b.0))
    });
    let mut kept: Vec<String> = ranked
        .iter()
        .enumerate()
        .take_while(|(i, (_, (votes, _)))| {
            *i == 0 || (!single_label && compare_votes(2.0 * votes, speaking) == Ordering::Greater)
        })
        .map(|(_, (l, _))| l.to_string())
        .collect();
    kept.sort();
    kept
}

/// Weighted vote over hypotheses that already share a label space. All
/// segments must belong to one recording; its id is taken from the first
/// segment found.
pub fn vote(hyps: &[WeightedHypothesis], options: FusionOptions) -> Result<SegmentList> {
    let weights = normalized_weights(&hyps.iter().map(|h| h.weight).collect::<Vec<_>>())?;
    let Some(recording_id) = hyps.iter().find_map(|h| h.segments.iter().next()).map(|s| s.recording_id.clone()) else {
        return Ok(SegmentList::default());
    };
    let spans: Vec<Vec<Span>> = hyps.iter().map(|h| timeline::spans(&h.segments)).collect();
    let cuts = timeline::cuts(spans.iter().flatten().flat_map(|s| [s.start, s.end]));
    let mut regions: Vec<(i64, i64, Vec<String>)> = cuts
        .windows(2)
        .map(|w| {
            let asserted: Vec<Vec<&str>> = spans.iter().map(|s| timeline::active(s, w[0], w[1])).collect();
            (w[0], w[1], decide(&asserted, &weights, options.single_label))
        })
        .collect();

    // slivers follow the longer neighbor, judged on the original decisions
    let decided: Vec<Vec<String>> = regions.iter().map(|r| r.2.clone()).collect();
    for i in 0..regions.len() {
        let (lo, hi, _) = regions[i];
        if hi - lo >= MIN_REGION_MS {
            continue;
        }
        let len = |j: usize| regions[j].1 - regions[j].0;
        let prev = i.checked_sub(1);
        let next = (i + 1 < regions.len()).then_some(i + 1);
        let donor = match (prev, next) {
            (Some(p), Some(n)) => Some(if len(n) > len(p) { n } else { p }),
            (p, n) => p.or(n),
        };
        if let Some(d) = donor {
            regions[i].2 = decided[d].clone();
        }
    }

    let mut open: BTreeMap<String, i64> = BTreeMap::new();
    let mut out = Vec::new();
    let mut prev_end = None;
    for (lo, hi, labels) in &regions {
        let labels: BTreeSet<&String> = labels.iter().collect();
        let closing: Vec<String> = open.keys().filter(|l| !labels.contains(l)).cloned().collect();
        for l in closing {
            let start = open.remove(&l).expect("open label");
            out.push(timeline::segment(&recording_id, start, prev_end.expect("open run"), &l));
        }
        for l in labels {
            open.entry(l.clone()).or_insert(*lo);
        }
        prev_end = Some(*hi);
    }
    for (l, start) in open {
        out.push(timeline::segment(&recording_id, start, prev_end.expect("open run"), &l));
    }
    Ok(SegmentList::new(out).normalized())
}

/// Aligns and votes, recording by recording. Empty hypotheses are left out
/// with a warning.
pub fn fuse(hyps: &[WeightedHypothesis], options: FusionOptions) -> Result<SegmentList> {
    normalized_weights(&hyps.iter().map(|h| h.weight).collect::<Vec<_>>())?;
    let recordings: BTreeSet<String> = hyps.iter().flat_map(|h| h.segments.recording_ids()).collect();
    let mut out = Vec::new();
    for id in recordings {
        let mut lists = Vec::new();
        let mut weights = Vec::new();
        for (i, h) in hyps.iter().enumerate() {
            let part = h.segments.for_recording(&id);
            if part.is_empty() {
                log::warn!("hypothesis {i} has no segments for {id}; excluded");
                continue;
            }
            lists.push(part);
            weights.push(h.weight);
        }
        let aligned = align_labels(&lists)?;
        let weighted: Vec<WeightedHypothesis> = aligned
            .relabeled
            .into_iter()
            .zip(weights)
            .map(|(s, w)| WeightedHypothesis::new(s, w))
            .collect();
        out.extend(vote(&weighted, options)?.entries);
    }
    Ok(SegmentList::new(out).normalized())
}
