use nalgebra::DVector;

use super::delay::DelaySnapshot;
use super::graph::CommGraph;
use super::CommsError;

/// Slack for comparing sample timestamps produced by repeated `k * dt`.
const TIME_EPS: f64 = 1e-9;

/// Append-only broadcast log, one stream per robot. Queries before the first
/// sample fall back to the robot's initial payload.
#[derive(Clone, Debug, PartialEq)]
pub struct StateHistory {
    initial: Vec<DVector<f64>>,
    streams: Vec<Vec<(f64, DVector<f64>)>>,
}

/// A payload returned by a delayed lookup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Received<'a> {
    /// `None` when the initial payload was used.
    pub timestamp: Option<f64>,
    pub payload: &'a DVector<f64>,
}

impl StateHistory {
    pub fn new(initial: Vec<DVector<f64>>) -> Self {
        let streams = vec![Vec::new(); initial.len()];
        Self { initial, streams }
    }

    pub fn n(&self) -> usize {
        self.initial.len()
    }

    pub fn len(&self, robot: usize) -> usize {
        self.streams[robot].len()
    }

    pub fn is_empty(&self, robot: usize) -> bool {
        self.streams[robot].is_empty()
    }

    pub fn last(&self, robot: usize) -> Option<&(f64, DVector<f64>)> {
        self.streams[robot].last()
    }

    pub fn samples(&self, robot: usize) -> &[(f64, DVector<f64>)] {
        &self.streams[robot]
    }

    pub fn publish(&mut self, robot: usize, t: f64, sample: DVector<f64>) -> Result<(), CommsError> {
        let n = self.n();
        let stream = self.streams.get_mut(robot).ok_or(CommsError::UnknownRobot { robot, n })?;
        if let Some((last, _)) = stream.last() {
            if !(t > *last) {
                return Err(CommsError::NonMonotonicTime { robot, last: *last, t });
            }
        }
        stream.push((t, sample));
        Ok(())
    }

    /// Zero-order hold: latest sample of `robot` stamped at or before `t`.
    pub fn at(&self, robot: usize, t: f64) -> Received<'_> {
        let stream = &self.streams[robot];
        let idx = stream.partition_point(|(ts, _)| *ts <= t + TIME_EPS);
        match idx {
            0 => Received { timestamp: None, payload: &self.initial[robot] },
            k => Received { timestamp: Some(stream[k - 1].0), payload: &stream[k - 1].1 },
        }
    }

    /// Drops samples that can no longer be selected by a lookup at or after
    /// `horizon`, keeping the newest sample at or before it.
    pub fn prune_before(&mut self, horizon: f64) {
        for stream in &mut self.streams {
            let idx = stream.partition_point(|(ts, _)| *ts <= horizon + TIME_EPS);
            if idx > 1 {
                stream.drain(..idx - 1);
            }
        }
    }
}

/// What robot `i` sees of robot `j` at time `t`: `j`'s broadcast at
/// `t - τ_ij(t)`, held from the most recent sample.
pub fn receive_delayed<'a>(
    history: &'a StateHistory,
    graph: &CommGraph,
    delays: &DelaySnapshot,
    i: usize,
    j: usize,
    t: f64,
) -> Result<Received<'a>, CommsError> {
    if !graph.has_edge(i, j) {
        return Err(CommsError::NotNeighbor { receiver: i, sender: j });
    }
    Ok(history.at(j, t - delays.get(i, j)))
}
