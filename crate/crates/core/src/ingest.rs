//! Turning planar tracking data into angular paths.
//!
//! Each track is a table of `t, x, y` (plus an optional `id` column when a
//! file holds several tracks). Missing coordinates are empty cells or
//! `NA`/`NaN`. Tracks with too many missing rows are rejected; the rest are
//! linearly interpolated, converted to `atan2(y, x)` and resampled onto the
//! modal time step.

use std::collections::BTreeMap;
use std::io::Read;

use serde::Serialize;

use crate::diffusion::{angular_distance, PathSample};
use crate::error::{Error, Result};
use crate::scalar::wrap_angle;

#[derive(Clone, Debug)]
pub struct IngestOptions {
    /// tracks with a larger fraction of missing rows are rejected
    pub max_missing_fraction: f64,
    /// total absolute angular variation below which a track is flagged as
    /// immobile
    pub immobile_floor: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            max_missing_fraction: 0.05,
            immobile_floor: 0.5,
        }
    }
}

/// Raw rows of one track.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackData {
    pub id: String,
    pub t: Vec<f64>,
    pub x: Vec<Option<f64>>,
    pub y: Vec<Option<f64>>,
}

impl TrackData {
    pub fn missing_mask(&self) -> Vec<bool> {
        self.x.iter().zip(&self.y).map(|(a, b)| a.is_none() || b.is_none()).collect()
    }

    pub fn missing_fraction(&self) -> f64 {
        let m = self.missing_mask().iter().filter(|&&v| v).count();
        m as f64 / self.t.len().max(1) as f64
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrackStatus {
    Accepted,
    Rejected { reason: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct IngestedTrack {
    pub id: String,
    pub rows: usize,
    pub missing_fraction: f64,
    pub status: TrackStatus,
    /// modal time step used for resampling
    pub delta: Option<f64>,
    pub immobile: bool,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub path: Option<PathSample>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IngestReport {
    pub tracks: Vec<IngestedTrack>,
}

impl IngestReport {
    pub fn accepted(&self) -> impl Iterator<Item = &IngestedTrack> {
        self.tracks.iter().filter(|t| matches!(t.status, TrackStatus::Accepted))
    }

    pub fn rejected_count(&self) -> usize {
        self.tracks.len() - self.accepted().count()
    }
}

fn parse_cell(s: &str, row: usize, col: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse(format!("row {row}: cannot parse {col} value '{s}'")))
}

/// Reads tracks, grouped by `id` in order of first appearance.
pub fn read_tracks<R: Read>(input: R) -> Result<Vec<TrackData>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(ti), Some(xi), Some(yi)) = (col("t"), col("x"), col("y")) else {
        return Err(Error::Parse("track file needs columns t, x and y".into()));
    };
    let idi = col("id");
    let mut order: Vec<String> = Vec::new();
    let mut tracks: BTreeMap<String, TrackData> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let id = idi.map(|c| rec.get(c).unwrap_or("").to_string()).unwrap_or_else(|| "track".into());
        let t = parse_cell(rec.get(ti).unwrap_or(""), row, "t")?
            .ok_or_else(|| Error::Parse(format!("row {row}: missing time stamp")))?;
        let x = parse_cell(rec.get(xi).unwrap_or(""), row, "x")?;
        let y = parse_cell(rec.get(yi).unwrap_or(""), row, "y")?;
        let entry = tracks.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            TrackData {
                id: id.clone(),
                t: vec![],
                x: vec![],
                y: vec![],
            }
        });
        if let Some(&last) = entry.t.last() {
            if !(t > last) {
                return Err(Error::Parse(format!(
                    "row {row}: time stamps of track '{id}' must increase ({t} after {last})"
                )));
            }
        }
        entry.t.push(t);
        entry.x.push(x);
        entry.y.push(y);
    }
    Ok(order.into_iter().filter_map(|id| tracks.remove(&id)).collect())
}

/// Linear interpolation of the missing entries; missing ends take the
/// nearest observed value. `None` if nothing is observed.
pub fn interpolate(t: &[f64], v: &[Option<f64>]) -> Option<Vec<f64>> {
    let known: Vec<usize> = (0..v.len()).filter(|&i| v[i].is_some()).collect();
    let (&first, &last) = (known.first()?, known.last()?);
    let mut out = Vec::with_capacity(v.len());
    let mut k = 0;
    for i in 0..v.len() {
        if let Some(x) = v[i] {
            out.push(x);
            continue;
        }
        if i < first {
            out.push(v[first].unwrap());
        } else if i > last {
            out.push(v[last].unwrap());
        } else {
            while known[k + 1] < i {
                k += 1;
            }
            let (a, b) = (known[k], known[k + 1]);
            let w = (t[i] - t[a]) / (t[b] - t[a]);
            out.push(v[a].unwrap() * (1.0 - w) + v[b].unwrap() * w);
        }
    }
    Some(out)
}

/// Most frequent gap after rounding to a relative resolution of `1e-6`
/// of the median gap.
pub fn modal_step(t: &[f64]) -> Option<f64> {
    let mut gaps: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    if gaps.is_empty() {
        return None;
    }
    gaps.sort_by(f64::total_cmp);
    let res = gaps[gaps.len() / 2] * 1e-6;
    let mut counts: BTreeMap<i64, (usize, f64)> = BTreeMap::new();
    for g in &gaps {
        let e = counts.entry((g / res).round() as i64).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += g;
    }
    counts
        .values()
        .max_by(|a, b| a.0.cmp(&b.0))
        .map(|&(n, s)| s / n as f64)
}

/// Processes one track.
pub fn ingest_track(track: &TrackData, opts: &IngestOptions) -> IngestedTrack {
    let rows = track.t.len();
    let missing_fraction = track.missing_fraction();
    let mut out = IngestedTrack {
        id: track.id.clone(),
        rows,
        missing_fraction,
        status: TrackStatus::Accepted,
        delta: None,
        immobile: false,
        warnings: vec![],
        path: None,
    };
    let reject = |mut o: IngestedTrack, reason: String| {
        o.status = TrackStatus::Rejected { reason };
        o
    };
    if missing_fraction > opts.max_missing_fraction {
        return reject(
            out,
            format!(
                "{:.1}% of rows missing exceeds the {:.1}% limit",
                100.0 * missing_fraction,
                100.0 * opts.max_missing_fraction
            ),
        );
    }
    if rows < 2 {
        return reject(out, "fewer than two rows".into());
    }
    let (Some(x), Some(y)) = (interpolate(&track.t, &track.x), interpolate(&track.t, &track.y)) else {
        return reject(out, "no observed coordinates".into());
    };
    let raw: Vec<f64> = x.iter().zip(&y).map(|(&a, &b)| wrap_angle(b.atan2(a))).collect();
    let delta = modal_step(&track.t).expect("at least two rows");
    let gaps: Vec<f64> = track.t.windows(2).map(|w| w[1] - w[0]).collect();
    let off = gaps.iter().filter(|g| ((*g - delta) / delta).abs() > 0.1).count();
    if off as f64 > 0.01 * gaps.len() as f64 {
        out.warnings.push(format!(
            "{off} of {} time gaps deviate from the modal step {delta} by more than 10%",
            gaps.len()
        ));
    }
    // nearest-neighbour resampling onto t₀ + iΔ
    let t0 = track.t[0];
    let n = ((track.t[rows - 1] - t0) / delta + 1e-9).floor() as usize;
    let mut angles = Vec::with_capacity(n + 1);
    let mut j = 0;
    for i in 0..=n {
        let target = t0 + i as f64 * delta;
        while j + 1 < rows && (track.t[j + 1] - target).abs() <= (track.t[j] - target).abs() {
            j += 1;
        }
        angles.push(raw[j]);
    }
    let variation: f64 = angles.windows(2).map(|w| angular_distance(w[0], w[1])).sum();
    out.immobile = variation < opts.immobile_floor;
    if out.immobile {
        out.warnings
            .push(format!("total angular variation {variation:.3} rad suggests an immobile track"));
    }
    out.delta = Some(delta);
    match PathSample::new(delta, 1, angles) {
        Ok(p) => {
            out.path = Some(p.with_label(track.id.clone()));
            out
        }
        Err(e) => reject(out, e.to_string()),
    }
}

pub fn ingest_tracks(tracks: &[TrackData], opts: &IngestOptions) -> IngestReport {
    IngestReport {
        tracks: tracks.iter().map(|t| ingest_track(t, opts)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_track(n: usize, missing: &[usize]) -> (TrackData, Vec<f64>) {
        let truth: Vec<f64> = (0..n).map(|i| wrap_angle(0.3 + 0.05 * i as f64 + 0.2 * (0.4 * i as f64).sin())).collect();
        let mut x: Vec<Option<f64>> = truth.iter().map(|a| Some(2.0 * a.cos())).collect();
        let mut y: Vec<Option<f64>> = truth.iter().map(|a| Some(2.0 * a.sin())).collect();
        for &i in missing {
            x[i] = None;
            y[i] = None;
        }
        let t = (0..n).map(|i| 0.48 * i as f64).collect();
        (TrackData { id: "a".into(), t, x, y }, truth)
    }

    #[test]
    fn complete_track_gives_atan2_angles() {
        let (track, truth) = circle_track(100, &[]);
        let r = ingest_track(&track, &IngestOptions::default());
        assert!(matches!(r.status, TrackStatus::Accepted));
        let p = r.path.unwrap();
        assert_eq!(p.n_steps(), 99);
        for (a, b) in p.angles().iter().zip(&truth) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((p.delta() - 0.48).abs() < 1e-12);
    }

    #[test]
    fn too_many_missing_rows_reject() {
        let missing: Vec<usize> = (10..16).collect();
        let (track, _) = circle_track(100, &missing);
        let r = ingest_track(&track, &IngestOptions::default());
        assert!(matches!(r.status, TrackStatus::Rejected { .. }));
        assert!((r.missing_fraction - 0.06).abs() < 1e-12);
    }

    #[test]
    fn masked_points_are_imputed() {
        let (track, truth) = circle_track(100, &[20, 47, 81]);
        let r = ingest_track(&track, &IngestOptions::default());
        let p = r.path.unwrap();
        for &i in &[20, 47, 81] {
            assert!(angular_distance(p.angles()[i], truth[i]) < 0.05);
        }
    }

    #[test]
    fn reads_multi_track_files() {
        let text = "id,t,x,y\na,0,1,0\nb,0,0,1\na,1,NA,1\nb,1,-1,0\na,2,0,1\n";
        let tracks = read_tracks(text.as_bytes()).unwrap();
        assert_eq!(tracks.len(), 2);
        assert_eq!(tracks[0].id, "a");
        assert_eq!(tracks[0].x[1], None);
        assert!(read_tracks("t,x,y\n1,0,0\n0.5,1,1\n".as_bytes()).is_err());
        assert!(read_tracks("t,x\n1,0\n".as_bytes()).is_err());
    }

    #[test]
    fn immobile_tracks_are_flagged_not_dropped() {
        let track = TrackData {
            id: "still".into(),
            t: (0..50).map(|i| i as f64).collect(),
            x: vec![Some(1.0); 50],
            y: vec![Some(1.0); 50],
        };
        let r = ingest_track(&track, &IngestOptions::default());
        assert!(r.immobile);
        assert!(matches!(r.status, TrackStatus::Accepted));
    }

    #[test]
    fn jittered_times_resample_with_warning() {
        let mut t: Vec<f64> = (0..200).map(|i| 0.5 * i as f64).collect();
        for i in (5..200).step_by(10) {
            t[i] += 0.2;
        }
        let track = TrackData {
            id: "j".into(),
            x: t.iter().map(|v| Some(v.cos())).collect(),
            y: t.iter().map(|v| Some(v.sin())).collect(),
            t,
        };
        let r = ingest_track(&track, &IngestOptions::default());
        assert_eq!(r.delta, Some(0.5));
        assert!(!r.warnings.is_empty());
        assert_eq!(r.path.unwrap().n_steps(), 199);
    }
}
