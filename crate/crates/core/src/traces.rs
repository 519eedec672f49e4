//! Head/eye movement trace files.
//!
//! Each line is one sample vector
//! `timestamp pitch yaw roll em_x em_y em_flag`, separated by whitespace or
//! commas (an enclosing `[...]` is tolerated). Angles are degrees; EM
//! positions are normalized viewport coordinates; the flag is 1 for a valid
//! gaze sample and 0 otherwise. Blank lines and `#` comments are skipped.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::media_io::VideoMeta;
use crate::sphere::Pose;

/// How the first column of a trace is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimestampMode {
    /// Milliseconds since the previous sample; the first sample is at t = 0.
    #[default]
    Interval,
    /// Milliseconds since playback start.
    Absolute,
}

/// Gaze position inside the viewport.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// Raw first column, in milliseconds.
    pub timestamp_ms: f64,
    pub pose: Pose,
    pub em_u: f64,
    pub em_v: f64,
    pub em_valid: bool,
}

impl TraceRecord {
    /// The gaze sample, only when the validity flag is set.
    pub fn gaze(&self) -> Option<GazeSample> {
        self.em_valid.then_some(GazeSample {
            u: self.em_u,
            v: self.em_v,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectTrace {
    pub subject: String,
    pub mode: TimestampMode,
    records: Vec<TraceRecord>,
}

impl SubjectTrace {
    pub fn new(
        subject: impl Into<String>,
        mode: TimestampMode,
        records: Vec<TraceRecord>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::invalid("a trace needs at least one record"));
        }
        Ok(SubjectTrace {
            subject: subject.into(),
            mode,
            records,
        })
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    /// Absolute time of every record in milliseconds.
    pub fn times_ms(&self) -> Vec<f64> {
        match self.mode {
            TimestampMode::Absolute => self.records.iter().map(|r| r.timestamp_ms).collect(),
            TimestampMode::Interval => {
                let mut t = 0.0;
                self.records
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        if i > 0 {
                            t += r.timestamp_ms;
                        }
                        t
                    })
                    .collect()
            }
        }
    }
}

fn parse_field(token: &str, line: usize, name: &str) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("{name} '{token}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("{name} is not finite"),
        });
    }
    Ok(v)
}

/// Parses a trace file's text.
pub fn parse_trace(subject: &str, text: &str, mode: TimestampMode) -> Result<SubjectTrace> {
    const NAMES: [&str; 7] = [
        "timestamp",
        "pitch",
        "yaw",
        "roll",
        "EM x",
        "EM y",
        "EM flag",
    ];
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        let body = body.trim_start_matches('[').trim_end_matches(']');
        let tokens: Vec<&str> = body
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 7 {
            return Err(Error::Parse {
                line,
                message: format!("expected 7 fields, found {}", tokens.len()),
            });
        }
        let mut f = [0.0; 7];
        for (k, token) in tokens.iter().enumerate() {
            f[k] = parse_field(token, line, NAMES[k])?;
        }
        if f[0] < 0.0 {
            return Err(Error::Parse {
                line,
                message: "timestamp must be non-negative".into(),
            });
        }
        let em_valid = match f[6] {
            v if v == 1.0 => true,
            v if v == 0.0 => false,
            v => {
                return Err(Error::Parse {
                    line,
                    message: format!("EM flag {v} is neither 0 nor 1"),
                })
            }
        };
        if em_valid && !((0.0..=1.0).contains(&f[4]) && (0.0..=1.0).contains(&f[5])) {
            return Err(Error::Parse {
                line,
                message: format!("valid EM position ({}, {}) outside [0, 1]", f[4], f[5]),
            });
        }
        let pose = Pose::new(f[1], f[2], f[3]).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        records.push(TraceRecord {
            timestamp_ms: f[0],
            pose,
            em_u: f[4],
            em_v: f[5],
            em_valid,
        });
    }
    if records.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: format!("trace for subject '{subject}' has no records"),
        });
    }
    SubjectTrace::new(subject, mode, records)
}

/// Writes a trace back out in the same line format.
pub fn format_trace(trace: &SubjectTrace) -> String {
    let mut out = String::new();
    for r in trace.records() {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            r.timestamp_ms,
            r.pose.pitch(),
            r.pose.yaw(),
            r.pose.roll(),
            r.em_u,
            r.em_v,
            u8::from(r.em_valid)
        );
    }
    out
}

/// One pose (and optional gaze) attributed to a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSample {
    pub pose: Pose,
    pub gaze: Option<GazeSample>,
}

/// Samples attributed to one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameSlot {
    pub samples: Vec<FrameSample>,
    /// Set when the frame had no records and holds the previous frame's last
    /// pose instead (without gaze).
    pub inherited: bool,
}

impl FrameSlot {
    pub fn first_pose(&self) -> Option<Pose> {
        self.samples.first().map(|s| s.pose)
    }

    /// First sample that carries a valid gaze.
    pub fn first_gaze(&self) -> Option<(Pose, GazeSample)> {
        self.samples
            .iter()
            .find_map(|s| s.gaze.map(|g| (s.pose, g)))
    }
}

/// Per-frame samples of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSamples {
    pub subject: String,
    pub frames: Vec<FrameSlot>,
}

impl FrameSamples {
    /// Number of trace records placed into frames (inherited poses excluded).
    pub fn record_count(&self) -> usize {
        self.frames
            .iter()
            .filter(|f| !f.inherited)
            .map(|f| f.samples.len())
            .sum()
    }
}

/// Assigns each record to frame `floor(t * fps)`, clamping late samples into
/// the last frame, and fills uncovered frames with the last earlier pose.
pub fn align_to_frames(trace: &SubjectTrace, meta: &VideoMeta) -> Result<FrameSamples> {
    let frame_count = meta.frame_count;
    if frame_count == 0 {
        return Err(Error::invalid("video has no frames"));
    }
    let mut frames = vec![FrameSlot::default(); frame_count];
    let mut last_frame = 0usize;
    for (record, t) in trace.records().iter().zip(trace.times_ms()) {
        // tolerate rounding in the interval sums just below a frame boundary
        let pos = t / 1000.0 * meta.frame_rate;
        let idx = ((pos + 1e-9).floor().max(0.0) as usize).min(frame_count - 1);
        last_frame = last_frame.max(idx);
        frames[idx].samples.push(FrameSample {
            pose: record.pose,
            gaze: record.gaze(),
        });
    }
    let covered = last_frame + 1;
    if (covered as f64) < 0.1 * frame_count as f64 {
        return Err(Error::invalid(format!(
            "trace of subject '{}' covers {covered} of {frame_count} frames (under 10%)",
            trace.subject
        )));
    }
    let mut held: Option<FrameSample> = None;
    for slot in &mut frames {
        if let Some(last) = slot.samples.last() {
            held = Some(FrameSample {
                pose: last.pose,
                gaze: None,
            });
        } else if let Some(h) = held {
            slot.samples.push(h);
            slot.inherited = true;
        }
    }
    Ok(FrameSamples {
        subject: trace.subject.clone(),
        frames,
    })
}
