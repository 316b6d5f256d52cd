//! Declarative quench schedules λ(t).
//!
//! A schedule is an ordered list of segments, each a constant hold or a tanh
//! switch. Tanh segments are affinely rescaled so the segment endpoints are
//! hit exactly; the raw tanh only reaches them asymptotically, and the
//! extraction protocol needs λ(t_R) = λ_f exactly for the qubit and system to
//! decouple.
//!
//! Text form, one clause per segment, ';'-separated:
//!
//! ```text
//! const <value> dur=<time>
//! tanh <start> <end> T=<time> [dur=<time>]     (dur defaults to 8T)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for segment-junction continuity.
const JUNCTION_TOL: f64 = 1e-9;

/// One schedule segment over its own local time [0, duration].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    Constant { value: f64, duration: f64 },
    TanhSwitch {
        start: f64,
        end: f64,
        switching_time: f64,
        duration: f64,
    },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match self {
            Segment::Constant { duration, .. } => *duration,
            Segment::TanhSwitch { duration, .. } => *duration,
        }
    }

    pub fn start_value(&self) -> f64 {
        match self {
            Segment::Constant { value, .. } => *value,
            Segment::TanhSwitch { start, .. } => *start,
        }
    }

    pub fn end_value(&self) -> f64 {
        match self {
            Segment::Constant { value, .. } => *value,
            Segment::TanhSwitch { end, .. } => *end,
        }
    }

    /// Value at local time t ∈ [0, duration].
    fn eval_local(&self, t: f64) -> f64 {
        match *self {
            Segment::Constant { value, .. } => value,
            Segment::TanhSwitch {
                start,
                end,
                switching_time,
                duration,
            } => {
                // centered tanh profile, rescaled so s(0) ↦ start, s(d) ↦ end
                let s = |x: f64| 0.5 * (1.0 + ((x - duration / 2.0) / switching_time).tanh());
                let s0 = s(0.0);
                let s1 = s(duration);
                start + (end - start) * (s(t) - s0) / (s1 - s0)
            }
        }
    }

    fn reversed(&self) -> Segment {
        match *self {
            Segment::Constant { .. } => self.clone(),
            Segment::TanhSwitch {
                start,
                end,
                switching_time,
                duration,
            } => Segment::TanhSwitch {
                start: end,
                end: start,
                switching_time,
                duration,
            },
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        if !(self.duration() > 0.0) || !self.duration().is_finite() {
            return Err(Error::ScheduleSemantic {
                segment: index + 1,
                message: format!("duration must be positive and finite, got {}", self.duration()),
            });
        }
        if let Segment::TanhSwitch { switching_time, .. } = self {
            if !(*switching_time > 0.0) || !switching_time.is_finite() {
                return Err(Error::ScheduleSemantic {
                    segment: index + 1,
                    message: format!("switching time must be positive and finite, got {switching_time}"),
                });
            }
        }
        Ok(())
    }

    fn print(&self, out: &mut String) {
        match *self {
            Segment::Constant { value, duration } => {
                out.push_str(&format!("const {value} dur={duration}"));
            }
            Segment::TanhSwitch {
                start,
                end,
                switching_time,
                duration,
            } => {
                out.push_str(&format!("tanh {start} {end} T={switching_time} dur={duration}"));
            }
        }
    }
}

/// A control-parameter protocol λ(t) on [0, t_Q].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchSchedule {
    segments: Vec<Segment>,
    /// Segment start times, cumulative; same length as `segments`.
    starts: Vec<f64>,
    total: f64,
}

impl QuenchSchedule {
    /// Builds a schedule, checking durations and junction continuity.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::ScheduleSemantic {
                segment: 0,
                message: "schedule needs at least one segment".into(),
            });
        }
        let mut range: f64 = 0.0;
        for seg in &segments {
            range = range.max(seg.start_value().abs()).max(seg.end_value().abs());
        }
        let junction_tol = JUNCTION_TOL * range.max(1.0);
        for (i, seg) in segments.iter().enumerate() {
            seg.validate(i)?;
            if i > 0 {
                let prev_end = segments[i - 1].end_value();
                if (prev_end - seg.start_value()).abs() > junction_tol {
                    return Err(Error::ScheduleSemantic {
                        segment: i + 1,
                        message: format!(
                            "junction mismatch: previous segment ends at {prev_end}, this one starts at {}",
                            seg.start_value()
                        ),
                    });
                }
            }
        }
        let mut starts = Vec::with_capacity(segments.len());
        let mut acc = 0.0;
        for seg in &segments {
            starts.push(acc);
            acc += seg.duration();
        }
        Ok(Self {
            segments,
            starts,
            total: acc,
        })
    }

    pub fn constant(value: f64, duration: f64) -> Result<Self> {
        Self::new(vec![Segment::Constant { value, duration }])
    }

    /// Single tanh switch; duration defaults to 8T when `duration` is None.
    pub fn tanh_switch(start: f64, end: f64, switching_time: f64, duration: Option<f64>) -> Result<Self> {
        Self::new(vec![Segment::TanhSwitch {
            start,
            end,
            switching_time,
            duration: duration.unwrap_or(8.0 * switching_time),
        }])
    }

    /// Repeated fast/slow tanh switching between `start` and `end`:
    /// `cycles` repetitions of (slow up-switch, fast down-switch) followed by
    /// a final fast up-switch to `end`. Segment durations default to 8T.
    pub fn repeated_tanh(
        start: f64,
        end: f64,
        t_slow: f64,
        t_fast: f64,
        cycles: usize,
        dur_slow: Option<f64>,
        dur_fast: Option<f64>,
    ) -> Result<Self> {
        if cycles == 0 {
            return Err(Error::InvalidArgument("repeated_tanh needs at least one cycle".into()));
        }
        let ds = dur_slow.unwrap_or(8.0 * t_slow);
        let df = dur_fast.unwrap_or(8.0 * t_fast);
        let mut segments = Vec::with_capacity(2 * cycles + 1);
        for _ in 0..cycles {
            segments.push(Segment::TanhSwitch {
                start,
                end,
                switching_time: t_slow,
                duration: ds,
            });
            segments.push(Segment::TanhSwitch {
                start: end,
                end: start,
                switching_time: t_fast,
                duration: df,
            });
        }
        segments.push(Segment::TanhSwitch {
            start,
            end,
            switching_time: t_fast,
            duration: df,
        });
        Self::new(segments)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_time(&self) -> f64 {
        self.total
    }

    pub fn lambda_initial(&self) -> f64 {
        self.segments[0].start_value()
    }

    pub fn lambda_final(&self) -> f64 {
        self.segments[self.segments.len() - 1].end_value()
    }

    /// λ(t) for t ∈ [0, t_Q].
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.total).contains(&t) {
            return Err(Error::OutOfDomain { t, total: self.total });
        }
        // linear scan: segment counts are tiny
        let mut idx = self.segments.len() - 1;
        for (i, &s) in self.starts.iter().enumerate().skip(1) {
            if t < s {
                idx = i - 1;
                break;
            }
        }
        Ok(self.segments[idx].eval_local(t - self.starts[idx]))
    }

    /// Time-reversed protocol r with r(t) = s(t_Q − t).
    pub fn reversed(&self) -> Self {
        let segments: Vec<Segment> = self.segments.iter().rev().map(|s| s.reversed()).collect();
        Self::new(segments).expect("reversal preserves validity")
    }

    /// Pointwise scaling c·λ(t); exact on the segment representation because
    /// every segment family is affine in its endpoint values.
    pub fn scaled(&self, factor: f64) -> Self {
        let segments = self
            .segments
            .iter()
            .map(|s| match *s {
                Segment::Constant { value, duration } => Segment::Constant {
                    value: factor * value,
                    duration,
                },
                Segment::TanhSwitch {
                    start,
                    end,
                    switching_time,
                    duration,
                } => Segment::TanhSwitch {
                    start: factor * start,
                    end: factor * end,
                    switching_time,
                    duration,
                },
            })
            .collect();
        Self::new(segments).expect("scaling preserves validity")
    }

    /// Smallest tanh switching time in the schedule, if any.
    pub fn min_switching_time(&self) -> Option<f64> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::TanhSwitch { switching_time, .. } => Some(*switching_time),
                _ => None,
            })
            .fold(None, |acc, t| Some(acc.map_or(t, |a: f64| a.min(t))))
    }

    /// Largest |λ| over the schedule. Tanh segments are monotone, so the
    /// maximum is attained at a segment endpoint.
    pub fn max_abs_value(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| [s.start_value().abs(), s.end_value().abs()])
            .fold(0.0, f64::max)
    }

    /// Canonical text form; `parse` inverts this exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                out.push_str("; ");
            }
            seg.print(&mut out);
        }
        out
    }

    /// Parses the text grammar. Syntax errors carry line/column of the
    /// offending token; semantic errors carry the 1-based segment index.
    pub fn parse(text: &str) -> Result<Self> {
        let mut segments = Vec::new();
        let mut clause_start = 0usize;
        for clause in text.split(';') {
            if !clause.trim().is_empty() {
                segments.push(parse_clause(text, clause_start, clause)?);
            }
            clause_start += clause.len() + 1;
        }
        if segments.is_empty() {
            return Err(syntax_error(text, 0, "empty schedule"));
        }
        Self::new(segments)
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let clamped = offset.min(text.len());
    let before = &text[..clamped];
    let line = before.matches('\n').count() + 1;
    let col = clamped - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, col)
}

fn syntax_error(text: &str, offset: usize, message: impl Into<String>) -> Error {
    let (line, column) = line_col(text, offset);
    Error::ScheduleSyntax {
        line,
        column,
        message: message.into(),
    }
}

/// Tokens of a clause with their byte offsets in the full text.
fn tokens(full: &str, clause_start: usize, clause: &str) -> Vec<(usize, String)> {
    let _ = full;
    let mut out = Vec::new();
    let mut pos = 0;
    for tok in clause.split_whitespace() {
        let at = clause[pos..].find(tok).map(|p| p + pos).unwrap_or(pos);
        out.push((clause_start + at, tok.to_string()));
        pos = at + tok.len();
    }
    out
}

fn parse_number(full: &str, offset: usize, s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| syntax_error(full, offset, format!("expected a number for {what}, got '{s}'")))
}

fn parse_keyed(full: &str, offset: usize, tok: &str, key: &str) -> Result<f64> {
    match tok.split_once('=') {
        Some((k, v)) if k == key => parse_number(full, offset + key.len() + 1, v, key),
        _ => Err(syntax_error(
            full,
            offset,
            format!("expected {key}=<value>, got '{tok}'"),
        )),
    }
}

fn parse_clause(full: &str, clause_start: usize, clause: &str) -> Result<Segment> {
    let toks = tokens(full, clause_start, clause);
    let (head_off, head) = &toks[0];
    match head.as_str() {
        "const" => {
            if toks.len() != 3 {
                return Err(syntax_error(
                    full,
                    *head_off,
                    format!("const takes 2 arguments (value, dur=), got {}", toks.len() - 1),
                ));
            }
            let value = parse_number(full, toks[1].0, &toks[1].1, "value")?;
            let duration = parse_keyed(full, toks[2].0, &toks[2].1, "dur")?;
            Ok(Segment::Constant { value, duration })
        }
        "tanh" => {
            if toks.len() != 4 && toks.len() != 5 {
                return Err(syntax_error(
                    full,
                    *head_off,
                    format!(
                        "tanh takes 3 or 4 arguments (start, end, T=, [dur=]), got {}",
                        toks.len() - 1
                    ),
                ));
            }
            let start = parse_number(full, toks[1].0, &toks[1].1, "start")?;
            let end = parse_number(full, toks[2].0, &toks[2].1, "end")?;
            let switching_time = parse_keyed(full, toks[3].0, &toks[3].1, "T")?;
            let duration = if toks.len() == 5 {
                parse_keyed(full, toks[4].0, &toks[4].1, "dur")?
            } else {
                8.0 * switching_time
            };
            Ok(Segment::TanhSwitch {
                start,
                end,
                switching_time,
                duration,
            })
        }
        other => Err(syntax_error(
            full,
            *head_off,
            format!("unknown segment kind '{other}' (expected 'const' or 'tanh')"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn tanh_center_is_midpoint() {
        let g = 0.165;
        let t_sw = 0.3;
        let s = QuenchSchedule::tanh_switch(0.0, g, t_sw, None).unwrap();
        assert_abs_diff_eq!(s.eval(4.0 * t_sw).unwrap(), g / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn tanh_endpoints_clamped_exactly() {
        let g = 1.0;
        let s = QuenchSchedule::tanh_switch(0.0, g, 0.3, None).unwrap();
        assert_eq!(s.eval(0.0).unwrap(), 0.0);
        assert_eq!(s.eval(s.total_time()).unwrap(), g);
    }

    #[test]
    fn tanh_one_switching_time_past_center() {
        // clamped value at t = 4T + T, against the scalar oracle
        let t_sw = 0.25;
        let s = QuenchSchedule::tanh_switch(0.0, 1.0, t_sw, None).unwrap();
        let got = s.eval(5.0 * t_sw).unwrap();
        let raw = 0.5 * (1.0 + 1.0f64.tanh());
        let s0 = 0.5 * (1.0 + (-4.0f64).tanh());
        let expect = (raw - s0) / (1.0 - 2.0 * s0);
        assert_abs_diff_eq!(got, expect, epsilon = 1e-14);
        // before rescaling, the correction is of order tanh(−4) ≈ 7e-4
        assert_abs_diff_eq!(got, raw, epsilon = 2.0 * 6.7e-4);
    }

    #[test]
    fn eval_rejects_outside_domain() {
        let s = QuenchSchedule::constant(1.0, 2.0).unwrap();
        assert!(matches!(s.eval(-0.1), Err(Error::OutOfDomain { .. })));
        assert!(matches!(s.eval(2.1), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn reverse_constant_is_identity() {
        let s = QuenchSchedule::constant(0.7, 1.5).unwrap();
        assert_eq!(s.reversed(), s);
    }

    #[test]
    fn reverse_flips_tanh() {
        let s = QuenchSchedule::tanh_switch(0.0, 1.0, 0.3, None).unwrap();
        let r = s.reversed();
        assert_eq!(r.lambda_initial(), 1.0);
        assert_eq!(r.lambda_final(), 0.0);
        assert_eq!(r.total_time(), s.total_time());
        // pointwise mirror
        let n = 1000;
        for k in 0..=n {
            let t = s.total_time() * (k as f64 / n as f64);
            let a = r.eval(t).unwrap();
            let b = s.eval(s.total_time() - t).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn reverse_is_involution_on_grid() {
        let s = QuenchSchedule::repeated_tanh(0.0, 0.165, 2.0, 0.05, 2, None, None).unwrap();
        let rr = s.reversed().reversed();
        let n = 1000;
        for k in 0..=n {
            let t = s.total_time() * (k as f64 / n as f64);
            assert_abs_diff_eq!(rr.eval(t).unwrap(), s.eval(t).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn parse_single_tanh() {
        let s = QuenchSchedule::parse("tanh 0 1.0 T=0.3 dur=2.4").unwrap();
        assert_eq!(s.segments().len(), 1);
        assert_abs_diff_eq!(s.total_time(), 2.4, epsilon = 1e-15);
        assert_eq!(s.lambda_final(), 1.0);
    }

    #[test]
    fn parse_three_segments() {
        let s = QuenchSchedule::parse("const 0 dur=1; tanh 0 1 T=0.1 dur=0.8; const 1 dur=1").unwrap();
        assert_eq!(s.segments().len(), 3);
        assert_abs_diff_eq!(s.total_time(), 2.8, epsilon = 1e-15);
    }

    #[test]
    fn parse_junction_mismatch_names_segment() {
        let err = QuenchSchedule::parse("tanh 0 1 T=0.1 dur=0.8; tanh 0.5 1 T=0.1 dur=0.8").unwrap_err();
        match err {
            Error::ScheduleSemantic { segment, .. } => assert_eq!(segment, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parse_reports_position() {
        let err = QuenchSchedule::parse("const X dur=1").unwrap_err();
        match err {
            Error::ScheduleSyntax { line, column, .. } => {
                assert_eq!(line, 1);
                assert_eq!(column, 7);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn tanh_default_duration_is_8t() {
        let s = QuenchSchedule::parse("tanh 0 1 T=0.5").unwrap();
        assert_abs_diff_eq!(s.total_time(), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn repeated_tanh_shape() {
        let s = QuenchSchedule::repeated_tanh(0.0, 1.0, 2.0, 0.1, 2, None, None).unwrap();
        assert_eq!(s.segments().len(), 5);
        assert_eq!(s.lambda_initial(), 0.0);
        assert_eq!(s.lambda_final(), 1.0);
        assert_abs_diff_eq!(s.total_time(), 2.0 * 16.0 + 3.0 * 0.8, epsilon = 1e-12);
    }

    #[test]
    fn scaled_is_pointwise() {
        let s = QuenchSchedule::repeated_tanh(0.0, 0.5, 1.0, 0.1, 1, None, None).unwrap();
        let c = s.scaled(0.33);
        for k in 0..=100 {
            let t = s.total_time() * (k as f64 / 100.0);
            assert_abs_diff_eq!(c.eval(t).unwrap(), 0.33 * s.eval(t).unwrap(), epsilon = 1e-15);
        }
    }

    fn segment_strategy() -> impl Strategy<Value = Segment> {
        prop_oneof![
            (-2.0..2.0f64, 0.01..5.0f64).prop_map(|(value, duration)| Segment::Constant { value, duration }),
            (-2.0..2.0f64, -2.0..2.0f64, 0.01..2.0f64, 0.05..5.0f64).prop_map(
                |(start, end, switching_time, duration)| Segment::TanhSwitch {
                    start,
                    end,
                    switching_time,
                    duration,
                }
            ),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn print_parse_roundtrip(segs in proptest::collection::vec(segment_strategy(), 1..5)) {
            // stitch junctions so the schedule is valid
            let mut fixed = Vec::new();
            let mut level = 0.0f64;
            for seg in segs {
                let seg = match seg {
                    Segment::Constant { duration, .. } => Segment::Constant { value: level, duration },
                    Segment::TanhSwitch { end, switching_time, duration, .. } => {
                        let s = Segment::TanhSwitch { start: level, end, switching_time, duration };
                        level = end;
                        s
                    }
                };
                fixed.push(seg);
            }
            let sched = QuenchSchedule::new(fixed).unwrap();
            let reparsed = QuenchSchedule::parse(&sched.to_text()).unwrap();
            prop_assert_eq!(reparsed.segments(), sched.segments());
        }

        #[test]
        fn tanh_eval_monotone_within_segment(
            start in -1.0..1.0f64,
            end in -1.0..1.0f64,
            t_sw in 0.02..1.0f64,
        ) {
            prop_assume!((end - start).abs() > 1e-6);
            let s = QuenchSchedule::tanh_switch(start, end, t_sw, None).unwrap();
            let n = 200;
            let mut prev = s.eval(0.0).unwrap();
            let up = end > start;
            for k in 1..=n {
                let t = s.total_time() * (k as f64 / n as f64);
                let v = s.eval(t).unwrap();
                if up {
                    prop_assert!(v >= prev - 1e-12);
                } else {
                    prop_assert!(v <= prev + 1e-12);
                }
                prev = v;
            }
        }

        #[test]
        fn reverse_swaps_endpoints(
            start in -1.0..1.0f64,
            end in -1.0..1.0f64,
            t_sw in 0.02..1.0f64,
        ) {
            let s = QuenchSchedule::tanh_switch(start, end, t_sw, None).unwrap();
            let r = s.reversed();
            prop_assert_eq!(r.lambda_initial(), s.lambda_final());
            prop_assert_eq!(r.lambda_final(), s.lambda_initial());
            prop_assert_eq!(r.total_time(), s.total_time());
        }
    }
}
