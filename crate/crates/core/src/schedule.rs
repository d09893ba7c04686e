//! Resource availability: closed time intervals, availability maps, and the
//! schedule configuration file (`resource:[a,b];[c,d];...` per line).

use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

/// Closed interval of minutes, endpoints inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeInterval {
    pub start: u32,
    pub end: u32,
}

impl TimeInterval {
    pub fn new(start: u32, end: u32) -> Option<TimeInterval> {
        if start <= end {
            Some(TimeInterval { start, end })
        } else {
            None
        }
    }

    pub fn contains(&self, minute: u32) -> bool {
        self.start <= minute && minute <= self.end
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.start, self.end)
    }
}

/// Per-resource availability intervals, normalized (sorted by start,
/// overlapping intervals merged). A resource absent from the map is never
/// available.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AvailabilityMap {
    entries: IndexMap<String, Vec<TimeInterval>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("line {line}: malformed schedule entry: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: interval start {start} exceeds end {end}")]
    InvertedInterval { line: usize, start: u32, end: u32 },
    #[error("line {line}: duplicate resource `{resource}`")]
    DuplicateResource { line: usize, resource: String },
}

impl AvailabilityMap {
    pub fn new() -> AvailabilityMap {
        AvailabilityMap::default()
    }

    /// Builds a map from raw entries, normalizing each interval list.
    /// Duplicate resource names are rejected.
    pub fn from_entries(
        entries: impl IntoIterator<Item = (String, Vec<TimeInterval>)>,
    ) -> Result<AvailabilityMap, String> {
        let mut map = AvailabilityMap::new();
        for (resource, intervals) in entries {
            if map.entries.contains_key(&resource) {
                return Err(resource);
            }
            map.entries.insert(resource, normalize(intervals));
        }
        Ok(map)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resources(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn intervals(&self, resource: &str) -> &[TimeInterval] {
        self.entries.get(resource).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[TimeInterval])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// True iff `resource` is available at minute `t`. Unknown resources and
    /// minutes past every interval are unavailable.
    pub fn is_available(&self, resource: &str, t: u32) -> bool {
        self.intervals(resource).iter().any(|iv| iv.contains(t))
    }

    /// Latest interval end over all resources; 0 for an empty map.
    pub fn horizon(&self) -> u32 {
        self.entries
            .values()
            .flatten()
            .map(|iv| iv.end)
            .max()
            .unwrap_or(0)
    }
}

fn normalize(mut intervals: Vec<TimeInterval>) -> Vec<TimeInterval> {
    intervals.sort_by_key(|iv| (iv.start, iv.end));
    let mut out: Vec<TimeInterval> = Vec::with_capacity(intervals.len());
    for iv in intervals {
        match out.last_mut() {
            Some(last) if iv.start <= last.end => last.end = last.end.max(iv.end),
            _ => out.push(iv),
        }
    }
    out
}

/// Parses a schedule file: one `resource:[a,b];[c,d];...` line per resource,
/// `#` comments and blank lines ignored, whitespace tolerated around tokens.
pub fn parse_schedule(text: &str) -> Result<AvailabilityMap, ScheduleError> {
    let mut map = AvailabilityMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (resource, rest) = line.split_once(':').ok_or_else(|| ScheduleError::Malformed {
            line: line_no,
            reason: "expected `resource:[a,b];...`".into(),
        })?;
        let resource = resource.trim();
        if resource.is_empty() {
            return Err(ScheduleError::Malformed {
                line: line_no,
                reason: "empty resource name".into(),
            });
        }
        if map.entries.contains_key(resource) {
            return Err(ScheduleError::DuplicateResource {
                line: line_no,
                resource: resource.to_string(),
            });
        }
        let mut intervals = Vec::new();
        for part in rest.split(';') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            intervals.push(parse_interval(part, line_no)?);
        }
        map.entries.insert(resource.to_string(), normalize(intervals));
    }
    Ok(map)
}

fn parse_interval(text: &str, line: usize) -> Result<TimeInterval, ScheduleError> {
    let malformed = |reason: &str| ScheduleError::Malformed {
        line,
        reason: format!("{reason} in `{text}`"),
    };
    let inner = text
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| malformed("expected `[start,end]`"))?;
    let (a, b) = inner
        .split_once(',')
        .ok_or_else(|| malformed("expected `start,end`"))?;
    let start: u32 = a
        .trim()
        .parse()
        .map_err(|_| malformed("bad start minute"))?;
    let end: u32 = b.trim().parse().map_err(|_| malformed("bad end minute"))?;
    TimeInterval::new(start, end).ok_or(ScheduleError::InvertedInterval { line, start, end })
}

/// Canonical text form; `parse_schedule(format_schedule(m))` preserves
/// `is_available` at every minute.
pub fn format_schedule(map: &AvailabilityMap) -> String {
    let mut out = String::new();
    for (resource, intervals) in map.iter() {
        out.push_str(resource);
        out.push(':');
        for (i, iv) in intervals.iter().enumerate() {
            if i > 0 {
                out.push(';');
            }
            out.push_str(&iv.to_string());
        }
        out.push('\n');
    }
    out
}

/// The CT-scan scenario schedule used throughout the tests.
#[cfg(test)]
pub(crate) fn ct_schedule() -> AvailabilityMap {
    parse_schedule(
        "CT_machine:[10,25];[35,40]\n\
         CT_technician:[0,10];[15,25];[35,40]\n\
         radiologist:[0,15];[30,40]\n",
    )
    .unwrap()
}
