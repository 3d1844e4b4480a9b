//! CPU utilization time series and the peak-utilization procedure.
//!
//! Peak utilization is estimated in three steps: smooth the raw samples with
//! a trailing time-weighted window (5 minutes by default), take the maximum
//! smoothed value of each UTC calendar day, then take the nearest-rank 95th
//! percentile of those daily maxima.
//!
//! Energy integrals use the trapezoidal rule on the raw samples, treating
//! utilization as piecewise linear between samples.

use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use serde::Serialize;
use thiserror::Error;

use crate::stats;

pub const TRACE_COLUMNS: [&str; 2] = ["timestamp", "cpu_utilization_percent"];

pub const DEFAULT_WINDOW_SECONDS: f64 = 300.0;
pub const DEFAULT_PERCENTILE: f64 = 95.0;
pub const DEFAULT_MIN_DAYS: usize = 7;
/// Gaps between consecutive samples longer than this are flagged.
pub const GAP_WARNING_SECONDS: i64 = 3600;

const SECONDS_PER_DAY: i64 = 86_400;
pub(crate) const SECONDS_PER_HOUR: i64 = 3_600;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: utilization {value} is outside [0, 100] percent")]
    OutOfRange { line: u64, value: f64 },
    #[error("line {line}: timestamp is not after the previous sample")]
    NonMonotonic { line: u64 },
    #[error("sample {index}: utilization {value} is outside [0, 1]")]
    InvalidUtilization { index: usize, value: f64 },
    #[error("sample {index}: timestamp is not after the previous sample")]
    UnorderedSamples { index: usize },
    #[error("a trace needs at least 2 samples, found {found}")]
    TooFewSamples { found: usize },
    #[error("smoothing window must be positive, got {0}")]
    InvalidWindow(f64),
    #[error("percentile must lie in (0, 100], got {0}")]
    InvalidPercentile(f64),
    #[error("insufficient data: {required} days required, {available} available")]
    InsufficientDays { required: usize, available: usize },
}

/// One utilization observation. `timestamp` is Unix seconds (UTC) and
/// `utilization` a fraction in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub timestamp: i64,
    pub utilization: f64,
}

impl Sample {
    pub fn new(timestamp: i64, utilization: f64) -> Self {
        Self {
            timestamp,
            utilization,
        }
    }
}

/// A machine's CPU utilization samples: at least two, strictly increasing in
/// time, every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilizationTrace {
    machine_id: String,
    samples: Vec<Sample>,
}

impl UtilizationTrace {
    pub fn new(machine_id: impl Into<String>, samples: Vec<Sample>) -> Result<Self, TraceError> {
        if samples.len() < 2 {
            return Err(TraceError::TooFewSamples {
                found: samples.len(),
            });
        }
        for (index, sample) in samples.iter().enumerate() {
            if !(0.0..=1.0).contains(&sample.utilization) {
                return Err(TraceError::InvalidUtilization {
                    index,
                    value: sample.utilization,
                });
            }
            if index > 0 && sample.timestamp <= samples[index - 1].timestamp {
                return Err(TraceError::UnorderedSamples { index });
            }
        }
        Ok(Self {
            machine_id: machine_id.into(),
            samples,
        })
    }

    /// Builds a trace from `(timestamp, utilization)` pairs.
    pub fn from_pairs(
        machine_id: impl Into<String>,
        pairs: impl IntoIterator<Item = (i64, f64)>,
    ) -> Result<Self, TraceError> {
        Self::new(
            machine_id,
            pairs.into_iter().map(|(t, u)| Sample::new(t, u)).collect(),
        )
    }

    pub fn machine_id(&self) -> &str {
        &self.machine_id
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start(&self) -> i64 {
        self.samples[0].timestamp
    }

    pub fn end(&self) -> i64 {
        self.samples[self.samples.len() - 1].timestamp
    }

    /// Total covered time in seconds.
    pub fn duration(&self) -> f64 {
        (self.end() - self.start()) as f64
    }

    pub fn min_utilization(&self) -> f64 {
        self.utilizations().fold(f64::INFINITY, f64::min)
    }

    pub fn max_utilization(&self) -> f64 {
        self.utilizations().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn utilizations(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.utilization)
    }

    pub fn with_machine_id(mut self, machine_id: impl Into<String>) -> Self {
        self.machine_id = machine_id.into();
        self
    }

    /// Consecutive sample pairs further apart than `threshold_seconds`.
    pub fn coverage_gaps(&self, threshold_seconds: i64) -> Vec<CoverageGap> {
        self.samples
            .windows(2)
            .filter(|w| w[1].timestamp - w[0].timestamp > threshold_seconds)
            .map(|w| CoverageGap {
                start: format_timestamp(w[0].timestamp),
                end: format_timestamp(w[1].timestamp),
                seconds: w[1].timestamp - w[0].timestamp,
            })
            .collect()
    }

    /// Splits the piecewise-linear trace at clock-aligned UTC hour boundaries.
    ///
    /// Each slice holds the samples inside one hour plus linearly interpolated
    /// points at the hour's boundaries where the trace crosses them, so a
    /// slice's points cover exactly the part of the trace within that closed
    /// hour. Hours spanned only by the interior of a long segment still get a
    /// slice made of the two interpolated boundary points.
    pub fn hour_slices(&self) -> Vec<HourSlice> {
        let mut slices: Vec<HourSlice> = Vec::new();
        let mut push = |hour_start: i64, a: (f64, f64), b: (f64, f64)| match slices.last_mut() {
            Some(slice) if slice.hour_start == hour_start => slice.points.push(b),
            _ => slices.push(HourSlice {
                hour_start,
                points: vec![a, b],
            }),
        };
        for pair in self.samples.windows(2) {
            let (t0, u0) = (pair[0].timestamp, pair[0].utilization);
            let (t1, u1) = (pair[1].timestamp, pair[1].utilization);
            let mut left = (t0 as f64, u0);
            let mut hour = t0.div_euclid(SECONDS_PER_HOUR) * SECONDS_PER_HOUR;
            loop {
                let next = hour + SECONDS_PER_HOUR;
                if t1 <= next {
                    push(hour, left, (t1 as f64, u1));
                    break;
                }
                let frac = (next - t0) as f64 / (t1 - t0) as f64;
                let boundary = (next as f64, u0 + (u1 - u0) * frac);
                push(hour, left, boundary);
                left = boundary;
                hour = next;
            }
        }
        slices
    }
}

/// The part of a trace inside one UTC hour, as `(seconds, utilization)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct HourSlice {
    pub hour_start: i64,
    pub points: Vec<(f64, f64)>,
}

impl HourSlice {
    pub fn max_utilization(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        trapezoid(&self.points, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageGap {
    pub start: String,
    pub end: String,
    pub seconds: i64,
}

pub fn format_timestamp(seconds: i64) -> String {
    DateTime::<Utc>::from_timestamp(seconds, 0)
        .map(|t| t.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| seconds.to_string())
}

/// Parses an RFC 3339 timestamp with whole-second precision into Unix seconds.
pub fn parse_timestamp(raw: &str) -> Result<i64, String> {
    let parsed = DateTime::parse_from_rfc3339(raw)
        .map_err(|e| format!("malformed timestamp {raw:?}: {e}"))?;
    if parsed.timestamp_subsec_nanos() != 0 {
        return Err(format!("timestamp {raw:?} has sub-second precision"));
    }
    Ok(parsed.timestamp())
}

/// Parses a trace CSV (`timestamp,cpu_utilization_percent`), converting percent
/// to fractions. Unsorted rows are rejected, never reordered.
pub fn parse_trace<R: Read>(source: R, machine_id: &str) -> Result<UtilizationTrace, TraceError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(|e| TraceError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().ne(TRACE_COLUMNS.iter().copied()) {
        return Err(TraceError::Malformed {
            line: 1,
            message: format!(
                "expected header {:?}, found {:?}",
                TRACE_COLUMNS.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut samples: Vec<Sample> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| TraceError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |message: String| TraceError::Malformed { line, message };
        let timestamp = parse_timestamp(record.get(0).unwrap_or("")).map_err(malformed)?;
        let raw = record.get(1).unwrap_or("");
        let percent: f64 = raw
            .parse()
            .map_err(|_| malformed(format!("utilization is not a number: {raw:?}")))?;
        if !(0.0..=100.0).contains(&percent) {
            return Err(TraceError::OutOfRange {
                line,
                value: percent,
            });
        }
        if let Some(prev) = samples.last() {
            if timestamp <= prev.timestamp {
                return Err(TraceError::NonMonotonic { line });
            }
        }
        samples.push(Sample::new(timestamp, percent / 100.0));
    }
    UtilizationTrace::new(machine_id, samples)
}

/// Writes a trace in the CSV format read by [`parse_trace`].
pub fn write_trace<W: Write>(trace: &UtilizationTrace, sink: W) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(TRACE_COLUMNS)?;
    for sample in trace.samples() {
        writer.write_record([
            format_timestamp(sample.timestamp),
            format!("{:.4}", sample.utilization * 100.0),
        ])?;
    }
    writer.flush()
}

/// Trailing-window time-weighted mean.
///
/// Each sample stands for the interval since the previous sample (the first
/// sample takes the first gap). The output at `t` averages the samples whose
/// intervals overlap `(t - window, t]`, weighted by the overlap length.
pub fn smooth(trace: &UtilizationTrace, window_seconds: f64) -> Result<UtilizationTrace, TraceError> {
    if !(window_seconds.is_finite() && window_seconds > 0.0) {
        return Err(TraceError::InvalidWindow(window_seconds));
    }
    let samples = trace.samples();
    let span = |j: usize| -> f64 {
        if j == 0 {
            (samples[1].timestamp - samples[0].timestamp) as f64
        } else {
            (samples[j].timestamp - samples[j - 1].timestamp) as f64
        }
    };
    let smoothed = samples
        .iter()
        .enumerate()
        .map(|(i, sample)| {
            let window_start = sample.timestamp as f64 - window_seconds;
            let (mut weighted, mut total) = (0.0, 0.0);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for j in (0..=i).rev() {
                let end = samples[j].timestamp as f64;
                if end <= window_start {
                    break;
                }
                let weight = span(j).min(end - window_start);
                let u = samples[j].utilization;
                weighted += weight * u;
                total += weight;
                lo = lo.min(u);
                hi = hi.max(u);
            }
            Sample::new(sample.timestamp, (weighted / total).clamp(lo, hi))
        })
        .collect();
    UtilizationTrace::new(trace.machine_id(), smoothed)
}

/// Maximum utilization per UTC calendar day; days without samples are absent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailyMaxima {
    pub days: Vec<(NaiveDate, f64)>,
}

impl DailyMaxima {
    pub fn values(&self) -> Vec<f64> {
        self.days.iter().map(|d| d.1).collect()
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }
}

pub fn daily_maxima(trace: &UtilizationTrace) -> DailyMaxima {
    let mut days: Vec<(i64, f64)> = Vec::new();
    for sample in trace.samples() {
        let day = sample.timestamp.div_euclid(SECONDS_PER_DAY);
        match days.last_mut() {
            Some((d, max)) if *d == day => *max = max.max(sample.utilization),
            _ => days.push((day, sample.utilization)),
        }
    }
    DailyMaxima {
        days: days
            .into_iter()
            .map(|(day, max)| (day_to_date(day), max))
            .collect(),
    }
}

fn day_to_date(day: i64) -> NaiveDate {
    DateTime::<Utc>::from_timestamp(day * SECONDS_PER_DAY, 0)
        .expect("day index within chrono range")
        .date_naive()
}

/// Observed peak utilization `u_p`, a fraction in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct PeakUtilization(f64);

impl PeakUtilization {
    pub fn new(value: f64) -> Option<Self> {
        (0.0..=1.0).contains(&value).then_some(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Nearest-rank percentile of the daily maxima; requires `min_days` entries.
pub fn peak_utilization(
    maxima: &DailyMaxima,
    percentile: f64,
    min_days: usize,
) -> Result<PeakUtilization, TraceError> {
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(TraceError::InvalidPercentile(percentile));
    }
    let required = min_days.max(1);
    if maxima.len() < required {
        return Err(TraceError::InsufficientDays {
            required,
            available: maxima.len(),
        });
    }
    let value = stats::nearest_rank(&maxima.values(), percentile)
        .expect("non-empty maxima and valid percentile");
    Ok(PeakUtilization(value))
}

/// Settings of the peak-utilization procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakConfig {
    pub window_seconds: f64,
    pub percentile: f64,
    pub min_days: usize,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            window_seconds: DEFAULT_WINDOW_SECONDS,
            percentile: DEFAULT_PERCENTILE,
            min_days: DEFAULT_MIN_DAYS,
        }
    }
}

/// Smooth, take daily maxima, then the percentile.
pub fn estimate_peak(
    trace: &UtilizationTrace,
    config: &PeakConfig,
) -> Result<PeakUtilization, TraceError> {
    let smoothed = smooth(trace, config.window_seconds)?;
    peak_utilization(&daily_maxima(&smoothed), config.percentile, config.min_days)
}

/// Trapezoidal integral of `f(u(t))` over the trace, in value-seconds.
pub fn integrate(trace: &UtilizationTrace, f: impl Fn(f64) -> f64) -> f64 {
    trace
        .samples()
        .windows(2)
        .map(|w| {
            let dt = (w[1].timestamp - w[0].timestamp) as f64;
            dt * (f(w[0].utilization) + f(w[1].utilization)) / 2.0
        })
        .sum()
}

/// Trapezoidal integral over `(seconds, utilization)` points.
pub(crate) fn trapezoid(points: &[(f64, f64)], f: impl Fn(f64) -> f64) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (f(w[0].1) + f(w[1].1)) / 2.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DAY: i64 = SECONDS_PER_DAY;
    // 2016-06-01T00:00:00Z
    const T0: i64 = 1_464_739_200;

    fn trace(pairs: &[(i64, f64)]) -> UtilizationTrace {
        UtilizationTrace::from_pairs("m", pairs.iter().copied()).unwrap()
    }

    fn constant(value: f64, step: i64, count: i64) -> UtilizationTrace {
        UtilizationTrace::from_pairs("m", (0..count).map(|i| (T0 + i * step, value))).unwrap()
    }

    /// Direct evaluation of the trailing-window mean with explicit interval overlaps.
    fn brute_force_window_mean(trace: &UtilizationTrace, i: usize, window: f64) -> f64 {
        let s = trace.samples();
        let t = s[i].timestamp as f64;
        let (lo_edge, hi_edge) = (t - window, t);
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..s.len() {
            let end = s[j].timestamp as f64;
            let start = if j == 0 {
                end - (s[1].timestamp - s[0].timestamp) as f64
            } else {
                s[j - 1].timestamp as f64
            };
            let overlap = (end.min(hi_edge) - start.max(lo_edge)).max(0.0);
            num += overlap * s[j].utilization;
            den += overlap;
        }
        num / den
    }

    #[test]
    fn parses_percent_into_fractions() {
        let csv = "timestamp,cpu_utilization_percent\n2016-06-01T00:00:00Z,50.0\n2016-06-01T00:00:30Z,75.0\n";
        let t = parse_trace(csv.as_bytes(), "m1").unwrap();
        assert_eq!(t.machine_id(), "m1");
        assert_eq!(t.utilizations().collect::<Vec<_>>(), vec![0.5, 0.75]);
        assert_eq!(t.end() - t.start(), 30);
    }

    #[test]
    fn irregular_cadence_accepted() {
        let csv = "timestamp,cpu_utilization_percent\n\
                   2016-06-01T00:00:00Z,10\n2016-06-01T00:00:20Z,20\n2016-06-01T00:00:50Z,30\n";
        assert_eq!(parse_trace(csv.as_bytes(), "m").unwrap().len(), 3);
    }

    #[test]
    fn out_of_range_reports_line() {
        let csv = "timestamp,cpu_utilization_percent\n2016-06-01T00:00:00Z,50\n2016-06-01T00:00:30Z,101.2\n";
        assert_eq!(
            parse_trace(csv.as_bytes(), "m").unwrap_err(),
            TraceError::OutOfRange {
                line: 3,
                value: 101.2
            }
        );
    }

    #[test]
    fn equal_timestamps_rejected() {
        let csv = "timestamp,cpu_utilization_percent\n2016-06-01T00:00:00Z,50\n2016-06-01T00:00:00Z,60\n";
        assert_eq!(
            parse_trace(csv.as_bytes(), "m").unwrap_err(),
            TraceError::NonMonotonic { line: 3 }
        );
    }

    #[test]
    fn parse_errors() {
        let header = "timestamp,cpu_utilization_percent\n";
        let one_row = format!("{header}2016-06-01T00:00:00Z,50\n");
        assert_eq!(
            parse_trace(one_row.as_bytes(), "m").unwrap_err(),
            TraceError::TooFewSamples { found: 1 }
        );
        let bad_ts = format!("{header}2016-06-01T00:00:00Z,50\nyesterday,60\n");
        assert!(matches!(
            parse_trace(bad_ts.as_bytes(), "m").unwrap_err(),
            TraceError::Malformed { line: 3, .. }
        ));
        let subsecond = format!("{header}2016-06-01T00:00:00.5Z,50\n");
        assert!(matches!(
            parse_trace(subsecond.as_bytes(), "m").unwrap_err(),
            TraceError::Malformed { line: 2, .. }
        ));
        assert!(matches!(
            parse_trace("time,util\n".as_bytes(), "m").unwrap_err(),
            TraceError::Malformed { line: 1, .. }
        ));
        let negative = format!("{header}2016-06-01T00:00:00Z,-1\n");
        assert!(matches!(
            parse_trace(negative.as_bytes(), "m").unwrap_err(),
            TraceError::OutOfRange { line: 2, .. }
        ));
    }

    #[test]
    fn write_then_parse() {
        let original = trace(&[(T0, 0.125), (T0 + 20, 0.5), (T0 + 50, 1.0)]);
        let mut buf = Vec::new();
        write_trace(&original, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("timestamp,cpu_utilization_percent\n2016-06-01T00:00:00Z,12.5000\n"));
        assert_eq!(parse_trace(buf.as_slice(), "m").unwrap(), original);
    }

    #[test]
    fn constructor_validates() {
        assert!(matches!(
            UtilizationTrace::from_pairs("m", [(0, 0.5), (0, 0.5)]),
            Err(TraceError::UnorderedSamples { index: 1 })
        ));
        assert!(matches!(
            UtilizationTrace::from_pairs("m", [(0, 0.5), (1, 1.5)]),
            Err(TraceError::InvalidUtilization { index: 1, .. })
        ));
    }

    #[test]
    fn smoothing_preserves_constants() {
        let t = constant(0.4, 30, 100);
        let s = smooth(&t, 300.0).unwrap();
        assert!(s.utilizations().all(|u| u == 0.4));
    }

    #[test]
    fn smoothing_step_example() {
        let t = trace(&[(0, 0.0), (60, 0.0), (120, 0.0), (180, 0.0), (240, 0.0), (300, 1.0)]);
        let s = smooth(&t, 300.0).unwrap();
        assert!((s.samples()[5].utilization - 0.2).abs() < 1e-12);
        assert!((brute_force_window_mean(&t, 5, 300.0) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn short_window_is_identity() {
        let t = trace(&[(0, 0.1), (30, 0.9), (50, 0.3), (80, 0.6)]);
        let s = smooth(&t, 15.0).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn smoothing_rejects_bad_window() {
        let t = constant(0.4, 30, 3);
        assert_eq!(smooth(&t, 0.0).unwrap_err(), TraceError::InvalidWindow(0.0));
        assert!(smooth(&t, f64::NAN).is_err());
    }

    #[test]
    fn daily_maxima_examples() {
        let t = trace(&[(T0, 0.2), (T0 + 100, 0.6), (T0 + DAY, 0.8), (T0 + DAY + 50, 0.1)]);
        let m = daily_maxima(&t);
        let d1 = NaiveDate::from_ymd_opt(2016, 6, 1).unwrap();
        let d2 = NaiveDate::from_ymd_opt(2016, 6, 2).unwrap();
        assert_eq!(m.days, vec![(d1, 0.6), (d2, 0.8)]);

        assert_eq!(daily_maxima(&constant(0.3, 30, 10)).len(), 1);

        let gap = trace(&[(T0, 0.2), (T0 + 2 * DAY, 0.4)]);
        let days = daily_maxima(&gap).days;
        assert_eq!(days.len(), 2);
        assert_eq!(days[1].0, NaiveDate::from_ymd_opt(2016, 6, 3).unwrap());
    }

    fn maxima(values: &[f64]) -> DailyMaxima {
        let start = NaiveDate::from_ymd_opt(2016, 1, 1).unwrap();
        DailyMaxima {
            days: values
                .iter()
                .enumerate()
                .map(|(i, v)| (start + chrono::Days::new(i as u64), *v))
                .collect(),
        }
    }

    #[test]
    fn peak_examples() {
        let twenty: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
        let peak = peak_utilization(&maxima(&twenty), 95.0, 7).unwrap();
        assert_eq!(peak.value(), twenty[18]);
        assert!((peak.value() - 0.95).abs() < 1e-15);

        assert_eq!(peak_utilization(&maxima(&[0.7; 9]), 95.0, 7).unwrap().value(), 0.7);

        assert_eq!(
            peak_utilization(&maxima(&[0.1; 5]), 95.0, 7).unwrap_err(),
            TraceError::InsufficientDays {
                required: 7,
                available: 5
            }
        );
        assert!(peak_utilization(&maxima(&[0.1; 9]), 0.0, 7).is_err());
    }

    #[test]
    fn integrate_examples() {
        let t = trace(&[(0, 0.5), (50, 0.5), (100, 0.5)]);
        assert_eq!(integrate(&t, |u| u), 50.0);
        assert_eq!(integrate(&trace(&[(0, 0.0), (10, 1.0)]), |u| u), 5.0);
    }

    #[test]
    fn hour_slices_split_at_boundaries() {
        // 00:30 -> 02:30 ramp from 0 to 1.
        let t = trace(&[(T0 + 1800, 0.0), (T0 + 9000, 1.0)]);
        let slices = t.hour_slices();
        assert_eq!(slices.len(), 3);
        assert_eq!(slices[0].hour_start, T0);
        assert_eq!(slices[0].points, vec![((T0 + 1800) as f64, 0.0), ((T0 + 3600) as f64, 0.25)]);
        assert_eq!(slices[1].points, vec![((T0 + 3600) as f64, 0.25), ((T0 + 7200) as f64, 0.75)]);
        assert_eq!(slices[2].max_utilization(), 1.0);
        let total: f64 = slices.iter().map(|s| s.integrate(|u| u)).sum();
        assert!((total - integrate(&t, |u| u)).abs() < 1e-9);
    }

    #[test]
    fn sample_on_boundary_closes_hour() {
        let t = trace(&[(T0, 0.2), (T0 + 3600, 0.8), (T0 + 3630, 0.8)]);
        let slices = t.hour_slices();
        assert_eq!(slices.len(), 2);
        assert_eq!(slices[0].max_utilization(), 0.8);
        assert_eq!(slices[1].points.len(), 2);
    }

    #[test]
    fn long_gaps_flagged() {
        let t = trace(&[(T0, 0.1), (T0 + 30, 0.1), (T0 + 30 + 7200, 0.2)]);
        let gaps = t.coverage_gaps(GAP_WARNING_SECONDS);
        assert_eq!(gaps.len(), 1);
        assert_eq!(gaps[0].seconds, 7200);
        assert_eq!(gaps[0].start, "2016-06-01T00:00:30Z");
    }

    fn arb_trace() -> impl Strategy<Value = UtilizationTrace> {
        prop::collection::vec((1i64..400, 0.0f64..=1.0), 2..200).prop_map(|steps| {
            let mut t = T0;
            UtilizationTrace::from_pairs(
                "p",
                steps.into_iter().map(|(dt, u)| {
                    t += dt;
                    (t, u)
                }),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn smoothing_matches_brute_force(trace in arb_trace(), window in 1.0f64..2000.0) {
            let s = smooth(&trace, window).unwrap();
            for (i, sample) in s.samples().iter().enumerate() {
                let expected = brute_force_window_mean(&trace, i, window);
                prop_assert!((sample.utilization - expected).abs() < 1e-9);
                prop_assert!((0.0..=1.0).contains(&sample.utilization));
            }
        }

        #[test]
        fn peak_is_order_independent(mut values in prop::collection::vec(0.0f64..=1.0, 7..60), p in 1.0f64..=100.0) {
            let before = peak_utilization(&maxima(&values), p, 7).unwrap();
            values.reverse();
            values.rotate_left(3);
            let after = peak_utilization(&maxima(&values), p, 7).unwrap();
            prop_assert_eq!(before, after);
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(0.0, f64::max);
            prop_assert!(before.value() >= lo && before.value() <= hi);
        }

        #[test]
        fn integrate_is_linear(trace in arb_trace(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let f = |u: f64| u * u;
            let g = |u: f64| 1.0 + u;
            let combined = integrate(&trace, |u| alpha * f(u) + beta * g(u));
            let separate = alpha * integrate(&trace, f) + beta * integrate(&trace, g);
            let scale = integrate(&trace, |u| alpha.abs() * f(u) + beta.abs() * g(u)).max(1e-12);
            prop_assert!((combined - separate).abs() <= 1e-9 * scale);
        }

        #[test]
        fn integrate_bounded_for_monotone(trace in arb_trace()) {
            let f = |u: f64| u.powi(3) + 0.2;
            let total = integrate(&trace, f);
            let duration = trace.duration();
            prop_assert!(total >= duration * f(trace.min_utilization()) - 1e-9);
            prop_assert!(total <= duration * f(trace.max_utilization()) + 1e-9);
        }

        #[test]
        fn hour_slices_partition_integral(trace in arb_trace()) {
            let total: f64 = trace.hour_slices().iter().map(|s| s.integrate(|u| u)).sum();
            let direct = integrate(&trace, |u| u);
            prop_assert!((total - direct).abs() <= 1e-9 * direct.max(1.0));
        }
    }
}
