//! JSONL episode traces for replay and debugging.
//!
//! One record per vehicle per decision step, written line by line so a
//! killed run still leaves a readable prefix.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{MetaAction, VehicleKind, VehicleState};
use crate::env::RewardComponents;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    /// Simulation time in seconds.
    pub time: f64,
    pub vehicle_id: usize,
    pub kind: VehicleKind,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub lane: usize,
    /// Executed meta-action; HDVs have none.
    pub action: Option<MetaAction>,
    /// Whether the supervisor replaced this AV's proposed action.
    pub replaced: bool,
    pub crashed: bool,
    /// Reward earned this step; HDVs and step-0 records have none.
    pub reward: Option<RewardComponents>,
}

impl TraceRecord {
    pub fn of_vehicle(
        step: usize,
        dt: f64,
        v: &VehicleState,
        action: Option<MetaAction>,
        replaced: bool,
        crashed: bool,
        reward: Option<RewardComponents>,
    ) -> Self {
        Self {
            step,
            time: step as f64 * dt,
            vehicle_id: v.id,
            kind: v.kind,
            x: v.x,
            y: v.y,
            heading: v.heading,
            speed: v.speed,
            lane: v.lane,
            action,
            replaced,
            crashed,
            reward,
        }
    }
}

pub struct TraceWriter {
    out: BufWriter<File>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        Ok(Self {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn write(&mut self, record: &TraceRecord) -> anyhow::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

pub fn read_trace(path: &Path) -> anyhow::Result<Vec<TraceRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(step: usize, id: usize) -> TraceRecord {
        let road = crate::geometry::RoadGeometry::default();
        let v = VehicleState::new(id, VehicleKind::Av, 100.0, 0, 25.0, &road);
        TraceRecord::of_vehicle(
            step,
            0.2,
            &v,
            Some(MetaAction::Idle),
            false,
            false,
            Some(RewardComponents { r_s: 0.75, total: 0.75, ..Default::default() }),
        )
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("episode.jsonl");
        let records = vec![sample(0, 0), sample(0, 1), sample(1, 0)];
        let mut w = TraceWriter::create(&path).unwrap();
        for r in &records {
            w.write(r).unwrap();
        }
        w.finish().unwrap();
        let back = read_trace(&path).unwrap();
        assert_eq!(back, records);
        assert!((back[2].time - 0.2).abs() < 1e-12);
    }

    #[test]
    fn one_json_object_per_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("episode.jsonl");
        let mut w = TraceWriter::create(&path).unwrap();
        w.write(&sample(0, 0)).unwrap();
        w.write(&sample(1, 0)).unwrap();
        w.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        for line in text.lines() {
            serde_json::from_str::<TraceRecord>(line).unwrap();
        }
    }
}
