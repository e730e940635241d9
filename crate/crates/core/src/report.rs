//! Session feedback report: code counts, summary indicators, fidelity score,
//! timeline, and JSON/HTML emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gate::GateVerdict;
use crate::taxonomy::{composite_reflection, DisplayCode, GlobalCodeName, GroupCode};
use crate::types::{Role, SpeakerTurn, TimeSpan, Utterance};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("report verdict is not Pass")]
    NotPassed,
    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdherenceDenominator {
    /// MIA + MIN
    #[default]
    MiRelevant,
    AllTherapist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TalkTime {
    pub therapist: f64,
    pub client: f64,
}

/// `None` marks an indicator whose denominator was zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryIndicators {
    pub reflection_to_question: Option<f64>,
    pub pct_open_questions: Option<f64>,
    pub pct_complex_reflections: Option<f64>,
    pub talk_time: Option<TalkTime>,
    pub mi_adherence: Option<f64>,
    pub mi_spirit: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Empathy,
    MiSpirit,
    ReflectionToQuestion,
    PctOpenQuestions,
    PctComplexReflections,
    MiAdherence,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::Empathy,
        Measure::MiSpirit,
        Measure::ReflectionToQuestion,
        Measure::PctOpenQuestions,
        Measure::PctComplexReflections,
        Measure::MiAdherence,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Measure::Empathy => "empathy",
            Measure::MiSpirit => "MI spirit",
            Measure::ReflectionToQuestion => "reflection to question ratio",
            Measure::PctOpenQuestions => "% open questions",
            Measure::PctComplexReflections => "% complex reflections",
            Measure::MiAdherence => "MI adherence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub basic: f64,
    pub advanced: f64,
}

/// Proficiency thresholds. The defaults are repository configuration in the
/// usual MI-fidelity tradition, not published values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityBenchmarks {
    pub thresholds: BTreeMap<Measure, Benchmark>,
}

impl Default for FidelityBenchmarks {
    fn default() -> Self {
        let b = |basic, advanced| Benchmark { basic, advanced };
        Self {
            thresholds: [
                (Measure::ReflectionToQuestion, b(1.0, 2.0)),
                (Measure::PctOpenQuestions, b(50.0, 70.0)),
                (Measure::PctComplexReflections, b(40.0, 50.0)),
                (Measure::MiAdherence, b(90.0, 98.0)),
                (Measure::Empathy, b(3.5, 4.0)),
                (Measure::MiSpirit, b(3.5, 4.0)),
            ]
            .into_iter()
            .collect(),
        }
    }
}

impl FidelityBenchmarks {
    pub fn validate(&self) -> Result<(), String> {
        for m in Measure::ALL {
            let b = self.thresholds.get(&m).ok_or_else(|| format!("missing benchmark for {}", m.label()))?;
            if b.advanced < b.basic {
                return Err(format!("advanced below basic for {}", m.label()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub total: u8,
    pub points: BTreeMap<Measure, u8>,
    /// Measures that were undefined and scored 0.
    pub undefined: Vec<Measure>,
}

/// Counts of every group code among therapist utterances.
pub fn code_counts(utterances: &[Utterance]) -> BTreeMap<GroupCode, usize> {
    let mut m: BTreeMap<GroupCode, usize> = GroupCode::ALL.iter().map(|&g| (g, 0)).collect();
    for u in utterances.iter().filter(|u| u.role == Role::Therapist) {
        if let Some(c) = u.pred_code {
            *m.entry(c).or_default() += 1;
        }
    }
    m
}

fn ratio(num: usize, den: usize, scale: f64) -> Option<f64> {
    (den > 0).then(|| scale * num as f64 / den as f64)
}

pub fn mi_spirit(globals: &BTreeMap<GlobalCodeName, f64>) -> Option<f64> {
    let e = globals.get(&GlobalCodeName::Evocation)?;
    let c = globals.get(&GlobalCodeName::Collaboration)?;
    let a = globals.get(&GlobalCodeName::AutonomySupport)?;
    Some((e + c + a) / 3.0)
}

pub fn summarize_counts(
    counts: &BTreeMap<GroupCode, usize>,
    turns: &[SpeakerTurn],
    globals: &BTreeMap<GlobalCodeName, f64>,
    denominator: AdherenceDenominator,
) -> SummaryIndicators {
    let n = |g: GroupCode| counts.get(&g).copied().unwrap_or(0);
    let refl = n(GroupCode::Res) + n(GroupCode::Rec);
    let questions = n(GroupCode::Quo) + n(GroupCode::Quc);
    let adherence_den = match denominator {
        AdherenceDenominator::MiRelevant => n(GroupCode::Mia) + n(GroupCode::Min),
        AdherenceDenominator::AllTherapist => counts.values().sum(),
    };
    let mut t = 0.0;
    let mut c = 0.0;
    for turn in turns {
        match turn.role {
            Some(Role::Therapist) => t += turn.span.duration(),
            Some(Role::Client) => c += turn.span.duration(),
            None => {}
        }
    }
    let talk_time = (t + c > 0.0).then(|| TalkTime {
        therapist: 100.0 * t / (t + c),
        client: 100.0 * c / (t + c),
    });
    SummaryIndicators {
        reflection_to_question: ratio(refl, questions, 1.0),
        pct_open_questions: ratio(n(GroupCode::Quo), questions, 100.0),
        pct_complex_reflections: ratio(n(GroupCode::Rec), refl, 100.0),
        talk_time,
        mi_adherence: ratio(n(GroupCode::Mia), adherence_den, 100.0),
        mi_spirit: mi_spirit(globals),
    }
}

pub fn summarize(
    utterances: &[Utterance],
    turns: &[SpeakerTurn],
    globals: &BTreeMap<GlobalCodeName, f64>,
    denominator: AdherenceDenominator,
) -> SummaryIndicators {
    summarize_counts(&code_counts(utterances), turns, globals, denominator)
}

pub fn measure_value(ind: &SummaryIndicators, empathy: Option<f64>, m: Measure) -> Option<f64> {
    match m {
        Measure::Empathy => empathy,
        Measure::MiSpirit => ind.mi_spirit,
        Measure::ReflectionToQuestion => ind.reflection_to_question,
        Measure::PctOpenQuestions => ind.pct_open_questions,
        Measure::PctComplexReflections => ind.pct_complex_reflections,
        Measure::MiAdherence => ind.mi_adherence,
    }
}

/// Two points per measure at or above the advanced threshold, one at or
/// above basic.
pub fn fidelity(ind: &SummaryIndicators, empathy: Option<f64>, b: &FidelityBenchmarks) -> Fidelity {
    let mut points = BTreeMap::new();
    let mut undefined = Vec::new();
    for m in Measure::ALL {
        let p = match (measure_value(ind, empathy, m), b.thresholds.get(&m)) {
            (Some(v), Some(t)) if v >= t.advanced => 2,
            (Some(v), Some(t)) if v >= t.basic => 1,
            (None, _) => {
                undefined.push(m);
                0
            }
            _ => 0,
        };
        points.insert(m, p);
    }
    Fidelity {
        total: points.values().sum(),
        points,
        undefined,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineUtterance {
    pub index: usize,
    pub span: Option<TimeSpan>,
    pub code: Option<DisplayCode>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineTurn {
    pub role: Role,
    pub span: TimeSpan,
    pub utterances: Vec<TimelineUtterance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub schema_version: u32,
    pub session: String,
    pub verdict: GateVerdict,
    pub globals: BTreeMap<GlobalCodeName, f64>,
    /// Raw group counts, RES and REC separate.
    pub code_counts: BTreeMap<GroupCode, usize>,
    /// Counts under the display labels, with RES and REC merged into RE.
    pub display_counts: BTreeMap<DisplayCode, usize>,
    pub indicators: SummaryIndicators,
    pub adherence_denominator: AdherenceDenominator,
    pub fidelity: Fidelity,
    pub flags: Vec<String>,
    pub timeline: Vec<TimelineTurn>,
}

/// Build the timeline by attaching utterances to the talk-turn whose span
/// holds their midpoint (or, untimed, to turns in order by role runs).
pub fn timeline(turns: &[SpeakerTurn], utterances: &[Utterance]) -> Vec<TimelineTurn> {
    let mut out: Vec<TimelineTurn> = turns
        .iter()
        .filter_map(|t| {
            Some(TimelineTurn {
                role: t.role?,
                span: t.span,
                utterances: Vec::new(),
            })
        })
        .collect();
    let mut cursor = 0usize;
    for u in utterances {
        let slot = match u.span {
            Some(s) => out
                .iter()
                .position(|t| t.role == u.role && t.span.start <= s.midpoint() && s.midpoint() <= t.span.end),
            None => None,
        }
        .or_else(|| (cursor..out.len()).find(|&i| out[i].role == u.role));
        if let Some(i) = slot {
            cursor = i;
            out[i].utterances.push(TimelineUtterance {
                index: u.index,
                span: u.span,
                code: u.pred_code.map(composite_reflection),
                text: u.tokens.join(" "),
            });
        }
    }
    out
}

fn undefined_flags(ind: &SummaryIndicators, empathy: Option<f64>) -> Vec<String> {
    let mut flags = Vec::new();
    let why = |m: Measure| match m {
        Measure::Empathy => "no empathy score",
        Measure::MiSpirit => "a global score it averages is missing",
        Measure::ReflectionToQuestion | Measure::PctOpenQuestions => "no questions were asked",
        Measure::PctComplexReflections => "no reflections were made",
        Measure::MiAdherence => "no MI-relevant utterances",
    };
    for m in Measure::ALL {
        if measure_value(ind, empathy, m).is_none() {
            flags.push(format!("{} undefined: {}", m.label(), why(m)));
        }
    }
    if ind.talk_time.is_none() {
        flags.push("talk time undefined: no role-labelled speech".into());
    }
    flags
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    pub benchmarks: FidelityBenchmarks,
    pub adherence_denominator: AdherenceDenominator,
}

pub fn build_report(
    session: &str,
    verdict: GateVerdict,
    turns: &[SpeakerTurn],
    utterances: &[Utterance],
    globals: BTreeMap<GlobalCodeName, f64>,
    cfg: &ReportConfig,
) -> Result<SessionReport, EmitError> {
    if !verdict.is_pass() {
        return Err(EmitError::NotPassed);
    }
    let counts = code_counts(utterances);
    let indicators = summarize_counts(&counts, turns, &globals, cfg.adherence_denominator);
    let empathy = globals.get(&GlobalCodeName::Empathy).copied();
    let mut display_counts: BTreeMap<DisplayCode, usize> = BTreeMap::new();
    for (&g, &n) in &counts {
        *display_counts.entry(composite_reflection(g)).or_default() += n;
    }
    Ok(SessionReport {
        schema_version: SCHEMA_VERSION,
        session: session.to_string(),
        verdict,
        fidelity: fidelity(&indicators, empathy, &cfg.benchmarks),
        flags: undefined_flags(&indicators, empathy),
        globals,
        code_counts: counts,
        display_counts,
        indicators,
        adherence_denominator: cfg.adherence_denominator,
        timeline: timeline(turns, utterances),
    })
}

impl SessionReport {
    pub fn to_json(&self) -> Result<String, EmitError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, EmitError> {
        let r: SessionReport = serde_json::from_str(s)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(EmitError::SchemaVersion(r.schema_version));
        }
        Ok(r)
    }

    pub fn to_html(&self) -> String {
        let mut h = String::new();
        let esc = html_escape;
        let fmt_opt = |v: Option<f64>, unit: &str| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.1}{unit}"));
        let _ = writeln!(h, "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">");
        let _ = writeln!(h, "<title>Session {}</title>", esc(&self.session));
        h.push_str(HTML_STYLE);
        let _ = writeln!(h, "</head>\n<body>\n<h1>Session {}</h1>", esc(&self.session));
        let _ = writeln!(h, "<p class=\"fidelity\">Fidelity: <strong>{}</strong> / 12</p>", self.fidelity.total);

        let start = self.timeline.first().map_or(0.0, |t| t.span.start);
        let end = self.timeline.last().map_or(1.0, |t| t.span.end);
        let total = (end - start).max(1e-9);
        h.push_str("<div class=\"bar\">");
        for t in &self.timeline {
            let _ = write!(
                h,
                "<span class=\"{}\" style=\"left:{:.3}%;width:{:.3}%\"></span>",
                role_class(t.role),
                100.0 * (t.span.start - start) / total,
                100.0 * t.span.duration() / total
            );
        }
        h.push_str("</div>\n");

        h.push_str("<h2>Indicators</h2>\n<table>\n");
        let i = &self.indicators;
        for (name, v) in [
            ("Reflection to question ratio", fmt_opt(i.reflection_to_question, "")),
            ("Open questions", fmt_opt(i.pct_open_questions, "%")),
            ("Complex reflections", fmt_opt(i.pct_complex_reflections, "%")),
            ("MI adherence", fmt_opt(i.mi_adherence, "%")),
            ("MI spirit", fmt_opt(i.mi_spirit, "")),
            ("Therapist talk time", fmt_opt(i.talk_time.map(|t| t.therapist), "%")),
            ("Client talk time", fmt_opt(i.talk_time.map(|t| t.client), "%")),
        ] {
            let _ = writeln!(h, "<tr><th>{name}</th><td>{v}</td></tr>");
        }
        h.push_str("</table>\n<h2>Global scores</h2>\n<table>\n");
        for (c, v) in &self.globals {
            let _ = writeln!(h, "<tr><th>{}</th><td>{v:.2}</td></tr>", esc(c.as_str()));
        }
        h.push_str("</table>\n<h2>Codes</h2>\n<table>\n");
        for (c, n) in &self.display_counts {
            let _ = writeln!(h, "<tr><th>{c}</th><td>{n}</td></tr>");
        }
        h.push_str("</table>\n");
        if !self.flags.is_empty() {
            h.push_str("<ul class=\"flags\">\n");
            for f in &self.flags {
                let _ = writeln!(h, "<li>{}</li>", esc(f));
            }
            h.push_str("</ul>\n");
        }
        h.push_str("<h2>Timeline</h2>\n");
        for t in &self.timeline {
            let _ = writeln!(
                h,
                "<div class=\"turn {}\"><span class=\"time\">{:.1}&ndash;{:.1}s</span>",
                role_class(t.role),
                t.span.start,
                t.span.end
            );
            for u in &t.utterances {
                let code = u.code.map_or(String::new(), |c| format!("<b>{c}</b> "));
                let _ = writeln!(h, "<p>{code}{}</p>", esc(&u.text));
            }
            h.push_str("</div>\n");
        }
        h.push_str("</body>\n</html>\n");
        h
    }
}

fn role_class(r: Role) -> &'static str {
    match r {
        Role::Therapist => "therapist",
        Role::Client => "client",
    }
}

fn html_escape(s: &str) -> String {
    let mut o = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => o.push_str("&amp;"),
            '<' => o.push_str("&lt;"),
            '>' => o.push_str("&gt;"),
            '"' => o.push_str("&quot;"),
            '\'' => o.push_str("&#39;"),
            c => o.push(c),
        }
    }
    o
}

const HTML_STYLE: &str = "<style>
body{font-family:sans-serif;max-width:60em;margin:2em auto}
.bar{position:relative;height:1.2em;background:#eee}
.bar span{position:absolute;top:0;bottom:0}
.therapist{background:#cfe3ff}.client{background:#ffe2c6}
.turn{margin:.4em 0;padding:.3em .6em;border-radius:4px}
.turn p{margin:.2em 0}.time{color:#666;font-size:.8em}
th{text-align:left;padding-right:1em}
</style>
";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gate::{GateMeasurements, GateOutcome};
    use crate::types::Cluster;
    use proptest::prelude::*;

    fn counts(pairs: &[(GroupCode, usize)]) -> BTreeMap<GroupCode, usize> {
        pairs.iter().copied().collect()
    }

    fn globals(e: f64, c: f64, a: f64) -> BTreeMap<GlobalCodeName, f64> {
        [
            (GlobalCodeName::Evocation, e),
            (GlobalCodeName::Collaboration, c),
            (GlobalCodeName::AutonomySupport, a),
        ]
        .into_iter()
        .collect()
    }

    fn pass() -> GateVerdict {
        GateVerdict { outcome: GateOutcome::Pass, measured: GateMeasurements::default() }
    }

    #[test]
    fn indicator_arithmetic() {
        let c = counts(&[
            (GroupCode::Rec, 4),
            (GroupCode::Res, 6),
            (GroupCode::Quo, 2),
            (GroupCode::Quc, 3),
            (GroupCode::Mia, 9),
            (GroupCode::Min, 1),
        ]);
        let i = summarize_counts(&c, &[], &globals(3.0, 4.0, 5.0), AdherenceDenominator::MiRelevant);
        assert_eq!(i.reflection_to_question, Some(2.0));
        assert_eq!(i.pct_open_questions, Some(40.0));
        assert_eq!(i.pct_complex_reflections, Some(40.0));
        assert_eq!(i.mi_adherence, Some(90.0));
        assert_eq!(i.mi_spirit, Some(4.0));
        assert_eq!(i.talk_time, None);
        let all = summarize_counts(&c, &[], &globals(3.0, 4.0, 5.0), AdherenceDenominator::AllTherapist);
        assert_eq!(all.mi_adherence, Some(100.0 * 9.0 / 25.0));
    }

    #[test]
    fn zero_denominators_are_undefined() {
        let i = summarize_counts(&counts(&[(GroupCode::Fa, 3)]), &[], &BTreeMap::new(), AdherenceDenominator::MiRelevant);
        assert_eq!(i.reflection_to_question, None);
        assert_eq!(i.pct_open_questions, None);
        assert_eq!(i.mi_adherence, None);
        assert_eq!(i.mi_spirit, None);
        let f = fidelity(&i, None, &FidelityBenchmarks::default());
        assert_eq!(f.total, 0);
        assert_eq!(f.undefined.len(), 6);
    }

    fn at(v: [f64; 6]) -> (SummaryIndicators, Option<f64>) {
        (
            SummaryIndicators {
                mi_spirit: Some(v[1]),
                reflection_to_question: Some(v[2]),
                pct_open_questions: Some(v[3]),
                pct_complex_reflections: Some(v[4]),
                mi_adherence: Some(v[5]),
                talk_time: None,
            },
            Some(v[0]),
        )
    }

    #[test]
    fn fidelity_extremes() {
        let b = FidelityBenchmarks::default();
        let (i, e) = at([4.0, 4.0, 2.0, 70.0, 50.0, 98.0]);
        assert_eq!(fidelity(&i, e, &b).total, 12);
        let (i, e) = at([1.0, 1.0, 0.1, 10.0, 10.0, 10.0]);
        assert_eq!(fidelity(&i, e, &b).total, 0);
        let (i, e) = at([4.0, 3.6, 2.5, 55.0, 45.0, 99.0]);
        assert_eq!(fidelity(&i, e, &b).total, 9);
    }

    proptest! {
        #[test]
        fn scaling_counts_keeps_ratios(c in prop::collection::vec(0usize..50, 9), k in 1usize..20) {
            let base: BTreeMap<GroupCode, usize> = GroupCode::ALL.iter().copied().zip(c.iter().copied()).collect();
            let scaled: BTreeMap<GroupCode, usize> = base.iter().map(|(g, n)| (*g, n * k)).collect();
            let g = globals(3.0, 3.0, 3.0);
            let a = summarize_counts(&base, &[], &g, AdherenceDenominator::MiRelevant);
            let b = summarize_counts(&scaled, &[], &g, AdherenceDenominator::MiRelevant);
            for (x, y) in [
                (a.reflection_to_question, b.reflection_to_question),
                (a.pct_open_questions, b.pct_open_questions),
                (a.pct_complex_reflections, b.pct_complex_reflections),
                (a.mi_adherence, b.mi_adherence),
            ] {
                prop_assert_eq!(x.is_some(), y.is_some());
                if let (Some(x), Some(y)) = (x, y) {
                    prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
                }
            }
            if let Some(open) = a.pct_open_questions {
                let closed = 100.0 * base[&GroupCode::Quc] as f64 / (base[&GroupCode::Quo] + base[&GroupCode::Quc]) as f64;
                prop_assert!((open + closed - 100.0).abs() < 1e-9);
            }
        }

        #[test]
        fn fidelity_is_monotone(v in prop::array::uniform6(0.0f64..100.0), which in 0usize..6, bump in 0.0f64..50.0) {
            let b = FidelityBenchmarks::default();
            let (i, e) = at(v);
            let mut w = v;
            w[which] += bump;
            let (j, f) = at(w);
            prop_assert!(fidelity(&j, f, &b).total >= fidelity(&i, e, &b).total);
        }
    }

    fn sample_report() -> SessionReport {
        let mk = |c: Cluster, r: Role, a: f64, b: f64| {
            let mut t = SpeakerTurn::new(c, TimeSpan::new(a, b).unwrap());
            t.role = Some(r);
            t
        };
        let turns = vec![
            mk(Cluster::A, Role::Therapist, 0.0, 4.0),
            mk(Cluster::B, Role::Client, 5.0, 9.0),
            mk(Cluster::A, Role::Therapist, 10.0, 13.0),
        ];
        let mut u0 = Utterance::new(0, Role::Therapist, vec!["how".into(), "are".into(), "you".into()]).unwrap();
        u0.span = Some(TimeSpan::new(0.5, 2.0).unwrap());
        u0.pred_code = Some(GroupCode::Quo);
        let mut u1 = Utterance::new(1, Role::Client, vec!["fine".into(), "<ok>".into()]).unwrap();
        u1.span = Some(TimeSpan::new(5.5, 8.0).unwrap());
        let mut u2 = Utterance::new(2, Role::Therapist, vec!["you".into(), "feel".into(), "fine".into()]).unwrap();
        u2.span = Some(TimeSpan::new(10.2, 12.0).unwrap());
        u2.pred_code = Some(GroupCode::Res);
        let mut g = globals(3.3, 4.1, 2.9);
        g.insert(GlobalCodeName::Empathy, 0.1 + 0.2);
        build_report("s01", pass(), &turns, &[u0, u1, u2], g, &ReportConfig::default()).unwrap()
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let r = sample_report();
        let s = r.to_json().unwrap();
        assert!(s.contains("\"pct_complex_reflections\": 0.0"));
        assert!(s.contains("\"mi_adherence\": null"));
        assert!(r.flags.iter().any(|f| f.starts_with("MI adherence undefined")));
        let back = SessionReport::from_json(&s).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.globals[&GlobalCodeName::Empathy].to_bits(), (0.1f64 + 0.2).to_bits());
        let t = r.indicators.talk_time.unwrap();
        assert!((t.therapist + t.client - 100.0).abs() < 0.01);
        assert_eq!(r.display_counts[&DisplayCode::Reflection], 1);
        assert_eq!(r.code_counts[&GroupCode::Res], 1);
    }

    #[test]
    fn html_has_one_block_per_turn() {
        let r = sample_report();
        let html = r.to_html();
        assert_eq!(html.matches("<div class=\"turn").count(), r.timeline.len());
        assert!(html.contains("&lt;ok&gt;"));
        assert!(html.contains("<b>RE</b>"));
        assert_eq!(r.timeline[2].utterances[0].index, 2);
    }

    #[test]
    fn failed_verdict_gets_no_report() {
        let v = GateVerdict { outcome: GateOutcome::SpeakerImbalance, measured: GateMeasurements::default() };
        assert!(matches!(build_report("x", v, &[], &[], BTreeMap::new(), &ReportConfig::default()), Err(EmitError::NotPassed)));
    }
}
