use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoveLimits {
    pub v: f64,
    pub a: f64,
    pub j: f64,
}

/// One segment of a reference program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Segment {
    Dwell { time: f64 },
    Move { target: f64, v: f64, a: f64, j: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceParams {
    pub ts: f64,
    pub start: f64,
    pub segments: Vec<Segment>,
}

impl ReferenceParams {
    /// start → end → start with dwells before, between and after.
    pub fn back_and_forth(ts: f64, start: f64, end: f64, lim: MoveLimits, dwell: f64) -> Self {
        let mv = |t| Segment::Move { target: t, v: lim.v, a: lim.a, j: lim.j };
        Self {
            ts,
            start,
            segments: vec![
                Segment::Dwell { time: dwell },
                mv(end),
                Segment::Dwell { time: dwell },
                mv(start),
                Segment::Dwell { time: dwell },
            ],
        }
    }

    /// start → end with dwells before and after.
    pub fn point_to_point(ts: f64, start: f64, end: f64, lim: MoveLimits, dwell: f64) -> Self {
        Self {
            ts,
            start,
            segments: vec![
                Segment::Dwell { time: dwell },
                Segment::Move { target: end, v: lim.v, a: lim.a, j: lim.j },
                Segment::Dwell { time: dwell },
            ],
        }
    }
}

/// Sampled reference with its analytic velocity and acceleration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTrajectory {
    pub ts: f64,
    pub r: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
}

impl ReferenceTrajectory {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// r(k) with the first/last setpoint held outside the sampled range.
    pub fn at(&self, k: isize) -> f64 {
        if self.r.is_empty() {
            return 0.0;
        }
        let i = k.clamp(0, self.r.len() as isize - 1) as usize;
        self.r[i]
    }

    pub fn concat(&self, other: &ReferenceTrajectory) -> ReferenceTrajectory {
        let mut out = self.clone();
        out.r.extend_from_slice(&other.r);
        out.v.extend_from_slice(&other.v);
        out.a.extend_from_slice(&other.a);
        out
    }

    pub fn repeat(&self, n: usize) -> ReferenceTrajectory {
        let mut out = ReferenceTrajectory { ts: self.ts, r: vec![], v: vec![], a: vec![] };
        for _ in 0..n {
            out = out.concat(self);
        }
        out
    }
}

/// Phase durations (t_j, t_a, t_v) and the peak velocity actually reached.
fn phases(dist: f64, lim: &MoveLimits) -> (f64, f64, f64, f64) {
    let acc_dist = |v: f64| {
        let a = lim.a.min((v * lim.j).sqrt());
        let tj = a / lim.j;
        let ta = (v / a - tj).max(0.0);
        (v * (2.0 * tj + ta) / 2.0, tj, ta)
    };
    let (d, tj, ta) = acc_dist(lim.v);
    if 2.0 * d <= dist {
        return (tj, ta, (dist - 2.0 * d) / lim.v, lim.v);
    }
    let (mut lo, mut hi) = (0.0, lim.v);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 2.0 * acc_dist(mid).0 > dist {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let v = 0.5 * (lo + hi);
    let (_, tj, ta) = acc_dist(v);
    (tj, ta, 0.0, v)
}

/// Jerk-limited (seven-phase) point-to-point moves joined by dwells.
pub fn make_reference(p: &ReferenceParams) -> Result<ReferenceTrajectory> {
    if !(p.ts > 0.0) {
        return Err(Error::Invalid("sampling time must be positive".into()));
    }
    // build (duration, jerk) pieces
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    let mut pos = p.start;
    let mut ends = Vec::new();
    for s in &p.segments {
        match s {
            Segment::Dwell { time } => {
                if *time < 0.0 {
                    return Err(Error::Invalid("negative dwell".into()));
                }
                pieces.push((*time, 0.0));
            }
            Segment::Move { target, v, a, j } => {
                if !(*v > 0.0 && *a > 0.0 && *j > 0.0) {
                    return Err(Error::Invalid("kinematic limits must be positive".into()));
                }
                let dist = (target - pos).abs();
                if dist > 0.0 {
                    let sg = (target - pos).signum();
                    let (tj, ta, tv, _) = phases(dist, &MoveLimits { v: *v, a: *a, j: *j });
                    let jj = sg * j;
                    pieces.extend_from_slice(&[(tj, jj), (ta, 0.0), (tj, -jj), (tv, 0.0), (tj, -jj), (ta, 0.0), (tj, jj)]);
                }
                pos = *target;
            }
        }
        let t_end: f64 = pieces.iter().map(|x| x.0).sum();
        ends.push((t_end, pos));
    }
    let total: f64 = pieces.iter().map(|x| x.0).sum();
    // cover the whole program so the last sample sits on the final setpoint
    let n = (total / p.ts - 1e-9).ceil().max(0.0) as usize + 1;
    let (mut r, mut v, mut a) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    // integrate piecewise-constant jerk exactly
    let (mut t0, mut x0, mut v0, mut a0) = (0.0, p.start, 0.0, 0.0);
    let mut idx = 0;
    for k in 0..n {
        let t = k as f64 * p.ts;
        while idx < pieces.len() && t > t0 + pieces[idx].0 {
            let (d, jk) = pieces[idx];
            x0 += v0 * d + a0 * d * d / 2.0 + jk * d * d * d / 6.0;
            v0 += a0 * d + jk * d * d / 2.0;
            a0 += jk * d;
            t0 += d;
            idx += 1;
            // snap to exact setpoints at segment ends
            if let Some(&(te, pe)) = ends.iter().find(|(te, _)| (te - t0).abs() < 1e-12) {
                let _ = te;
                if a0.abs() < 1e-9 && v0.abs() < 1e-9 {
                    x0 = pe;
                    v0 = 0.0;
                    a0 = 0.0;
                }
            }
        }
        let d = t - t0;
        let jk = if idx < pieces.len() { pieces[idx].1 } else { 0.0 };
        r.push(x0 + v0 * d + a0 * d * d / 2.0 + jk * d * d * d / 6.0);
        v.push(v0 + a0 * d + jk * d * d / 2.0);
        a.push(a0 + jk * d);
    }
    Ok(ReferenceTrajectory { ts: p.ts, r, v, a })
}
