//! Turning a scenario's signals and camera frame into text.
//!
//! Signal text comes from an ordered list of [`SignalRule`]s, each rendering
//! a template when its condition fires. Frame text comes from a
//! [`VisionDescriber`], and a [`TextCombiner`] merges the two.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::{HttpFailure, HttpSettings, JsonClient};
use crate::ingest::{Scenario, SignalLog, SignalSource};

pub const DEFAULT_MIN_FRACTION: f64 = 0.5;
pub const NANODEGREES_PER_DEGREE: f64 = 1e9;

pub const DEFAULT_VISION_PROMPT: &str =
    "Describe the driving scene in this camera image in one or two sentences.";
pub const DEFAULT_COMBINER_PROMPT: &str = "Combine the following two descriptions of the same \
     30-second vehicle scenario into one concise description.\n\
     Signals: {signal_text}\nCamera: {vision_text}";

#[derive(Debug, Error)]
pub enum DescribeError {
    #[error("cannot read {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("invalid rule {rule_id:?}: {reason}")]
    InvalidRule { rule_id: String, reason: String },
    #[error("duplicate rule id {0:?}")]
    DuplicateRuleId(String),
    #[error("cannot read frame {path}: {reason}")]
    FrameUnreadable { path: String, reason: String },
    #[error("vision service unavailable: {0}")]
    VisionServiceUnavailable(String),
    #[error("vision service sent a malformed reply: {0}")]
    VisionServiceMalformedReply(String),
    #[error("combiner service unavailable: {0}")]
    CombinerServiceUnavailable(String),
    #[error("combiner service sent a malformed reply: {0}")]
    CombinerServiceMalformedReply(String),
    #[error("both signal and vision descriptions are empty")]
    EmptyDescription,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// `{min}`, `{mean}`, `{max}` of the slice.
    NumericSummary,
    /// Latitude/longitude pair in nanodegrees, rendered as `{lat}`, `{lon}`
    /// degrees at the slice's midpoint row.
    GeoPosition,
    /// `{count}` of 0 → target transitions while every guard equals 1.
    RisingEdge,
    /// Fires when the signal equals 1 for at least `min_fraction` of rows;
    /// exposes `{fraction}`.
    BooleanCondition,
}

impl RuleKind {
    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            RuleKind::NumericSummary => &["min", "mean", "max"],
            RuleKind::GeoPosition => &["lat", "lon"],
            RuleKind::RisingEdge => &["count"],
            RuleKind::BooleanCondition => &["fraction"],
        }
    }

    fn signal_arity(self) -> usize {
        match self {
            RuleKind::GeoPosition => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SignalRef {
    One(String),
    Many(Vec<String>),
}

impl SignalRef {
    pub fn names(&self) -> Vec<&str> {
        match self {
            SignalRef::One(s) => vec![s.as_str()],
            SignalRef::Many(v) => v.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleParams {
    /// Signals that must all equal 1 at the transition row (rising_edge).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub guards: Vec<String>,
    /// Value the edge rises to; defaults to 1 (rising_edge).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    /// Share of rows that must be 1 (boolean_condition).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalRule {
    pub rule_id: String,
    pub signal: SignalRef,
    pub kind: RuleKind,
    #[serde(default)]
    pub params: RuleParams,
    pub template: String,
}

impl SignalRule {
    pub fn validate(&self) -> Result<(), DescribeError> {
        let invalid = |reason: String| DescribeError::InvalidRule {
            rule_id: self.rule_id.clone(),
            reason,
        };
        if self.rule_id.is_empty() {
            return Err(invalid("empty rule_id".into()));
        }
        let names = self.signal.names();
        if names.len() != self.kind.signal_arity() {
            return Err(invalid(format!(
                "{:?} takes {} signal name(s), got {}",
                self.kind,
                self.kind.signal_arity(),
                names.len()
            )));
        }
        let allowed = self.kind.placeholders();
        for p in placeholders(&self.template).map_err(invalid)? {
            if !allowed.contains(&p) {
                return Err(invalid(format!(
                    "placeholder {{{p}}} not produced by {:?} (allowed: {allowed:?})",
                    self.kind
                )));
            }
        }
        let p = &self.params;
        if !p.guards.is_empty() && self.kind != RuleKind::RisingEdge {
            return Err(invalid("guards only apply to rising_edge".into()));
        }
        if p.target.is_some() && self.kind != RuleKind::RisingEdge {
            return Err(invalid("target only applies to rising_edge".into()));
        }
        if let Some(f) = p.min_fraction {
            if self.kind != RuleKind::BooleanCondition {
                return Err(invalid("min_fraction only applies to boolean_condition".into()));
            }
            if !(f > 0.0 && f <= 1.0) {
                return Err(invalid(format!("min_fraction {f} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

fn placeholders(template: &str) -> Result<Vec<&str>, String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| format!("unclosed '{{' in template {template:?}"))?;
        let name = &after[..close];
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("bad placeholder {{{name}}} in template {template:?}"));
        }
        out.push(name);
        rest = &after[close + 1..];
    }
    Ok(out)
}

/// Single pass, so substituted values are never re-expanded. Unknown
/// placeholders are left as written.
fn render(template: &str, values: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open..];
        let value = after.find('}').and_then(|close| {
            let name = &after[1..close];
            values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (v, close))
        });
        match value {
            Some((v, close)) => {
                out.push_str(v);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = &after[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Validates a rule list: every rule well-formed, ids unique.
pub fn validate_rules(rules: &[SignalRule]) -> Result<(), DescribeError> {
    let mut seen = HashSet::new();
    for r in rules {
        r.validate()?;
        if !seen.insert(r.rule_id.as_str()) {
            return Err(DescribeError::DuplicateRuleId(r.rule_id.clone()));
        }
    }
    Ok(())
}

pub fn load_rules(path: &Path) -> Result<Vec<SignalRule>, DescribeError> {
    let unreadable = |reason: String| DescribeError::Unreadable {
        path: path.display().to_string(),
        reason,
    };
    let bytes = fs::read(path).map_err(|e| unreadable(e.to_string()))?;
    let rules: Vec<SignalRule> =
        serde_json::from_slice(&bytes).map_err(|e| unreadable(e.to_string()))?;
    validate_rules(&rules)?;
    Ok(rules)
}

/// Fixed-point with at most nine fractional digits, trailing zeros trimmed
/// down to a single one.
pub fn format_number(v: f64) -> String {
    let mut s = format!("{v:.9}");
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    if s == "-0.0" {
        s = "0.0".into();
    }
    s
}

/// Signal text plus the rules that were skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SignalText {
    pub text: String,
    pub warnings: Vec<String>,
}

pub const RULE_SEPARATOR: &str = "; ";

pub fn describe_signals(scenario: &Scenario, log: &SignalLog, rules: &[SignalRule]) -> SignalText {
    describe_source(&log.window(scenario.signal_slice.clone()), rules)
}

/// Renders every firing rule, in list order, over the rows of `source`.
pub fn describe_source(source: &dyn SignalSource, rules: &[SignalRule]) -> SignalText {
    let mut parts = Vec::new();
    let mut warnings = Vec::new();
    for rule in rules {
        match apply_rule(source, rule) {
            Ok(Some(text)) => parts.push(text),
            Ok(None) => {}
            Err(missing) => {
                let w = format!("rule {}: unknown signal {missing:?}, skipped", rule.rule_id);
                log::warn!("{w}");
                warnings.push(w);
            }
        }
    }
    SignalText {
        text: parts.join(RULE_SEPARATOR),
        warnings,
    }
}

fn lookup<'a>(source: &'a dyn SignalSource, name: &str) -> Result<&'a [f64], String> {
    source.signal(name).ok_or_else(|| name.to_owned())
}

fn apply_rule(source: &dyn SignalSource, rule: &SignalRule) -> Result<Option<String>, String> {
    let names = rule.signal.names();
    let primary = lookup(source, names[0])?;
    if primary.is_empty() {
        return Ok(None);
    }
    let rendered = match rule.kind {
        RuleKind::NumericSummary => {
            let min = primary.iter().copied().fold(f64::INFINITY, f64::min);
            let max = primary.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = primary.iter().sum::<f64>() / primary.len() as f64;
            Some(render(
                &rule.template,
                &[
                    ("min", format_number(min)),
                    ("mean", format_number(mean)),
                    ("max", format_number(max)),
                ],
            ))
        }
        RuleKind::GeoPosition => {
            let lon = lookup(source, names[1])?;
            let mid = primary.len() / 2;
            Some(render(
                &rule.template,
                &[
                    ("lat", format_number(primary[mid] / NANODEGREES_PER_DEGREE)),
                    ("lon", format_number(lon[mid] / NANODEGREES_PER_DEGREE)),
                ],
            ))
        }
        RuleKind::RisingEdge => {
            let guards = rule
                .params
                .guards
                .iter()
                .map(|g| lookup(source, g))
                .collect::<Result<Vec<_>, _>>()?;
            let target = rule.params.target.unwrap_or(1.0);
            let count = count_rising_edges(primary, target, &guards);
            (count > 0).then(|| render(&rule.template, &[("count", count.to_string())]))
        }
        RuleKind::BooleanCondition => {
            let on = primary.iter().filter(|&&v| v == 1.0).count();
            let fraction = on as f64 / primary.len() as f64;
            let min_fraction = rule.params.min_fraction.unwrap_or(DEFAULT_MIN_FRACTION);
            (fraction >= min_fraction)
                .then(|| render(&rule.template, &[("fraction", format_number(fraction))]))
        }
    };
    Ok(rendered)
}

/// Rows `i` where `signal[i-1] == 0`, `signal[i] == target`, and every guard
/// is 1 at row `i`.
pub fn count_rising_edges(signal: &[f64], target: f64, guards: &[&[f64]]) -> usize {
    (1..signal.len())
        .filter(|&i| {
            signal[i - 1] == 0.0 && signal[i] == target && guards.iter().all(|g| g[i] == 1.0)
        })
        .count()
}

/// Produces text for one camera frame.
pub trait VisionDescriber: Send + Sync {
    fn describe(&self, frame: &Path) -> Result<String, DescribeError>;
}

/// Never produces text.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoVision;

impl VisionDescriber for NoVision {
    fn describe(&self, _frame: &Path) -> Result<String, DescribeError> {
        Ok(String::new())
    }
}

/// Canned descriptions keyed by frame file stem (the scenario id).
#[derive(Debug, Default, Clone)]
pub struct StubVision {
    canned: HashMap<String, String>,
}

impl StubVision {
    pub fn new(canned: HashMap<String, String>) -> Self {
        Self { canned }
    }

    pub fn from_file(path: &Path) -> Result<Self, DescribeError> {
        let unreadable = |reason: String| DescribeError::Unreadable {
            path: path.display().to_string(),
            reason,
        };
        let bytes = fs::read(path).map_err(|e| unreadable(e.to_string()))?;
        let canned = serde_json::from_slice(&bytes).map_err(|e| unreadable(e.to_string()))?;
        Ok(Self { canned })
    }
}

impl VisionDescriber for StubVision {
    fn describe(&self, frame: &Path) -> Result<String, DescribeError> {
        let key = frame.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        Ok(self.canned.get(key).cloned().unwrap_or_default())
    }
}

#[derive(Serialize)]
struct DescribeRequest<'a> {
    image_b64: String,
    prompt: &'a str,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
}

#[derive(Deserialize)]
struct TextReply {
    text: String,
}

/// Client for a remote image-captioning service (`POST /describe`).
pub struct HttpVision {
    client: JsonClient,
    prompt: String,
}

impl HttpVision {
    pub fn new(settings: HttpSettings, prompt: impl Into<String>) -> Self {
        Self {
            client: JsonClient::new(settings),
            prompt: prompt.into(),
        }
    }
}

impl VisionDescriber for HttpVision {
    fn describe(&self, frame: &Path) -> Result<String, DescribeError> {
        let bytes = fs::read(frame).map_err(|e| DescribeError::FrameUnreadable {
            path: frame.display().to_string(),
            reason: e.to_string(),
        })?;
        let request = DescribeRequest {
            image_b64: base64::engine::general_purpose::STANDARD.encode(bytes),
            prompt: &self.prompt,
        };
        match self.client.post::<_, TextReply>("/describe", &request) {
            Ok(reply) => Ok(reply.text),
            Err(HttpFailure::Unavailable(e)) => Err(DescribeError::VisionServiceUnavailable(e)),
            Err(HttpFailure::Malformed(e)) => Err(DescribeError::VisionServiceMalformedReply(e)),
        }
    }
}

/// Text for a frame, or the empty string when there is no frame on disk.
pub fn describe_frame(
    frame_ref: Option<&Path>,
    describer: &dyn VisionDescriber,
) -> Result<String, DescribeError> {
    match frame_ref {
        Some(p) if p.is_file() => Ok(describer.describe(p)?.trim().to_owned()),
        _ => Ok(String::new()),
    }
}

/// Merges signal and vision text into one description.
pub trait TextCombiner: Send + Sync {
    fn combine(&self, signal_text: &str, vision_text: &str) -> Result<String, DescribeError>;
}

/// `Signals: {signal_text} Camera: {vision_text}`, omitting an empty part.
#[derive(Debug, Default, Clone, Copy)]
pub struct TemplateCombiner;

impl TextCombiner for TemplateCombiner {
    fn combine(&self, signal_text: &str, vision_text: &str) -> Result<String, DescribeError> {
        let mut parts = Vec::with_capacity(2);
        if !signal_text.is_empty() {
            parts.push(format!("Signals: {signal_text}"));
        }
        if !vision_text.is_empty() {
            parts.push(format!("Camera: {vision_text}"));
        }
        Ok(parts.join(" "))
    }
}

/// Client for a remote text-generation service (`POST /generate`).
pub struct HttpCombiner {
    client: JsonClient,
    prompt_template: String,
}

impl HttpCombiner {
    /// `prompt_template` may reference `{signal_text}` and `{vision_text}`.
    pub fn new(settings: HttpSettings, prompt_template: impl Into<String>) -> Self {
        Self {
            client: JsonClient::new(settings),
            prompt_template: prompt_template.into(),
        }
    }
}

impl TextCombiner for HttpCombiner {
    fn combine(&self, signal_text: &str, vision_text: &str) -> Result<String, DescribeError> {
        let prompt = render(
            &self.prompt_template,
            &[
                ("signal_text", signal_text.to_owned()),
                ("vision_text", vision_text.to_owned()),
            ],
        );
        match self
            .client
            .post::<_, TextReply>("/generate", &GenerateRequest { prompt: &prompt })
        {
            Ok(reply) if reply.text.trim().is_empty() => Err(
                DescribeError::CombinerServiceMalformedReply("empty text".into()),
            ),
            Ok(reply) => Ok(reply.text),
            Err(HttpFailure::Unavailable(e)) => Err(DescribeError::CombinerServiceUnavailable(e)),
            Err(HttpFailure::Malformed(e)) => Err(DescribeError::CombinerServiceMalformedReply(e)),
        }
    }
}

pub fn combine(
    signal_text: &str,
    vision_text: &str,
    combiner: &dyn TextCombiner,
) -> Result<String, DescribeError> {
    let signal_text = signal_text.trim();
    let vision_text = vision_text.trim();
    if signal_text.is_empty() && vision_text.is_empty() {
        return Err(DescribeError::EmptyDescription);
    }
    Ok(combiner.combine(signal_text, vision_text)?.trim().to_owned())
}

/// The three texts produced for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDescription {
    pub scenario_id: String,
    pub signal_text: String,
    pub vision_text: String,
    pub combined_text: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use indexmap::IndexMap;

    struct Rows(IndexMap<String, Vec<f64>>);

    impl SignalSource for Rows {
        fn signal(&self, name: &str) -> Option<&[f64]> {
            self.0.get(name).map(Vec::as_slice)
        }
        fn rows(&self) -> usize {
            self.0.values().next().map_or(0, Vec::len)
        }
    }

    fn rows(cols: &[(&str, &[f64])]) -> Rows {
        Rows(cols.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect())
    }

    fn rule(json: serde_json::Value) -> SignalRule {
        let r: SignalRule = serde_json::from_value(json).unwrap();
        r.validate().unwrap();
        r
    }

    #[test]
    fn numeric_summary_renders_min_mean_max() {
        let r = rule(serde_json::json!({
            "rule_id": "speed", "kind": "numeric_summary", "signal": "vehicle/velocity",
            "template": "speed between {min} and {max} m/s, average {mean} m/s"
        }));
        let src = rows(&[("vehicle/velocity", &[14.0, 16.0, 15.0])]);
        let out = describe_source(&src, &[r]);
        assert_eq!(out.text, "speed between 14.0 and 16.0 m/s, average 15.0 m/s");
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn geo_position_divides_nanodegrees() {
        let r = rule(serde_json::json!({
            "rule_id": "pos", "kind": "geo_position", "signal": ["lat_nd", "lon_nd"],
            "template": "at latitude {lat} longitude {lon} degrees"
        }));
        let src = rows(&[("lat_nd", &[57123456789.0]), ("lon_nd", &[11987654321.0])]);
        assert_eq!(
            describe_source(&src, &[r]).text,
            "at latitude 57.123456789 longitude 11.987654321 degrees"
        );
    }

    fn lka_rule() -> SignalRule {
        rule(serde_json::json!({
            "rule_id": "lka_left", "kind": "rising_edge", "signal": "lka_intervention_side",
            "params": {"guards": ["lka_enabled", "emergency_lka_enabled"]},
            "template": "{count} left side emergency lka intervention"
        }))
    }

    #[test]
    fn rising_edge_counts_guarded_transitions() {
        let src = rows(&[
            ("lka_intervention_side", &[0.0, 0.0, 1.0, 1.0]),
            ("lka_enabled", &[1.0; 4]),
            ("emergency_lka_enabled", &[1.0; 4]),
        ]);
        assert_eq!(
            describe_source(&src, &[lka_rule()]).text,
            "1 left side emergency lka intervention"
        );

        let guarded_off = rows(&[
            ("lka_intervention_side", &[0.0, 0.0, 1.0, 1.0]),
            ("lka_enabled", &[1.0, 1.0, 0.0, 1.0]),
            ("emergency_lka_enabled", &[1.0; 4]),
        ]);
        assert_eq!(describe_source(&guarded_off, &[lka_rule()]).text, "");
    }

    #[test]
    fn boolean_condition_threshold() {
        let r = rule(serde_json::json!({
            "rule_id": "tunnel", "kind": "boolean_condition", "signal": "env/in_tunnel",
            "template": "driving inside a tunnel"
        }));
        let half = rows(&[("env/in_tunnel", &[1.0, 1.0, 0.0, 0.0])]);
        assert_eq!(describe_source(&half, std::slice::from_ref(&r)).text, "driving inside a tunnel");
        let less = rows(&[("env/in_tunnel", &[1.0, 0.0, 0.0, 0.0])]);
        assert_eq!(describe_source(&less, &[r]).text, "");
    }

    #[test]
    fn unknown_signals_are_skipped_with_warning() {
        let speed = rule(serde_json::json!({
            "rule_id": "speed", "kind": "numeric_summary", "signal": "v",
            "template": "speed {mean}"
        }));
        let out = describe_source(&rows(&[("v", &[2.0, 4.0])]), &[lka_rule(), speed]);
        assert_eq!(out.text, "speed 3.0");
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("lka_intervention_side"));
    }

    #[test]
    fn rule_validation() {
        let bad_placeholder: SignalRule = serde_json::from_value(serde_json::json!({
            "rule_id": "x", "kind": "rising_edge", "signal": "s", "template": "{mean}"
        }))
        .unwrap();
        assert!(matches!(
            bad_placeholder.validate(),
            Err(DescribeError::InvalidRule { .. })
        ));
        let bad_arity: SignalRule = serde_json::from_value(serde_json::json!({
            "rule_id": "x", "kind": "geo_position", "signal": "lat", "template": "{lat}"
        }))
        .unwrap();
        assert!(bad_arity.validate().is_err());
        let r = lka_rule();
        assert!(matches!(
            validate_rules(&[r.clone(), r]),
            Err(DescribeError::DuplicateRuleId(_))
        ));
        assert!(placeholders("a {b").is_err());
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(14.0), "14.0");
        assert_eq!(format_number(15.25), "15.25");
        assert_eq!(format_number(-0.0), "0.0");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333");
        assert_eq!(format_number(57123456789.0 / 1e9), "57.123456789");
    }

    #[test]
    fn frame_description() {
        let dir = tempfile::tempdir().unwrap();
        let frame = dir.path().join("scenario_007.jpg");
        fs::write(&frame, b"\xff\xd8").unwrap();
        let stub = StubVision::new(HashMap::from([(
            "scenario_007".to_string(),
            "  snow-covered rural road\n".to_string(),
        )]));
        assert_eq!(describe_frame(None, &stub).unwrap(), "");
        assert_eq!(
            describe_frame(Some(&dir.path().join("missing.jpg")), &stub).unwrap(),
            ""
        );
        assert_eq!(
            describe_frame(Some(&frame), &stub).unwrap(),
            "snow-covered rural road"
        );
    }

    #[test]
    fn template_combiner() {
        let c = TemplateCombiner;
        assert_eq!(
            combine("driving at 15 m/s", "", &c).unwrap(),
            "Signals: driving at 15 m/s"
        );
        assert_eq!(
            combine("driving at 15 m/s", "snowy highway", &c).unwrap(),
            "Signals: driving at 15 m/s Camera: snowy highway"
        );
        assert_eq!(combine("", "snowy highway", &c).unwrap(), "Camera: snowy highway");
        assert!(matches!(
            combine("", "", &c),
            Err(DescribeError::EmptyDescription)
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn oracle(sig: &[f64], g1: &[f64], g2: &[f64]) -> usize {
            let mut n = 0;
            for i in 0..sig.len() {
                if i > 0 && sig[i - 1] == 0.0 && sig[i] == 1.0 && g1[i] == 1.0 && g2[i] == 1.0 {
                    n += 1;
                }
            }
            n
        }

        proptest! {
            #[test]
            fn rising_edge_matches_row_scan(
                rows in prop::collection::vec((0u8..2, 0u8..2, 0u8..2), 0..64)
            ) {
                let sig: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
                let g1: Vec<f64> = rows.iter().map(|r| r.1 as f64).collect();
                let g2: Vec<f64> = rows.iter().map(|r| r.2 as f64).collect();
                prop_assert_eq!(count_rising_edges(&sig, 1.0, &[&g1, &g2]), oracle(&sig, &g1, &g2));
            }

            #[test]
            fn template_combine_contains_both(s in "[a-z ]{1,20}[a-z]", v in "[a-z ]{1,20}[a-z]") {
                let s = s.trim().to_string();
                let v = v.trim().to_string();
                prop_assume!(!s.is_empty() && !v.is_empty());
                let out = combine(&s, &v, &TemplateCombiner).unwrap();
                prop_assert!(out.contains(&s));
                prop_assert!(out.contains(&v));
            }
        }
    }
}
