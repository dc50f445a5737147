//! Policy programs over the robot's skill primitives.
//!
//! The rule-based path reads each consecutive change set: a moved object
//! becomes `pick` followed by `place` or `stack_object`, a faucet toggle
//! becomes `turn_on_faucet`/`turn_off_faucet`. Any other fixture change has
//! no primitive and is refused.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::env::{EnvError, EnvState, Environment};
use crate::llm::{self, literal, BridgeError, Provider};
use crate::support::{contents_of, support_of, Support};
use crate::timeline::{diff, Timeline};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "name", content = "args", rename_all = "snake_case")]
pub enum SkillPrimitive {
    Pick(String),
    Place(String),
    Grasp(String),
    Ungrasp,
    TurnOnFaucet,
    TurnOffFaucet,
    StackObject(String, String),
}

impl SkillPrimitive {
    pub const NAMES: [&'static str; 7] = [
        "pick",
        "place",
        "grasp",
        "ungrasp",
        "turn_on_faucet",
        "turn_off_faucet",
        "stack_object",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SkillPrimitive::Pick(_) => "pick",
            SkillPrimitive::Place(_) => "place",
            SkillPrimitive::Grasp(_) => "grasp",
            SkillPrimitive::Ungrasp => "ungrasp",
            SkillPrimitive::TurnOnFaucet => "turn_on_faucet",
            SkillPrimitive::TurnOffFaucet => "turn_off_faucet",
            SkillPrimitive::StackObject(..) => "stack_object",
        }
    }

    pub fn args(&self) -> Vec<&str> {
        match self {
            SkillPrimitive::Pick(t) | SkillPrimitive::Place(t) | SkillPrimitive::Grasp(t) => {
                vec![t]
            }
            SkillPrimitive::StackObject(s, t) => vec![s, t],
            SkillPrimitive::Ungrasp | SkillPrimitive::TurnOnFaucet | SkillPrimitive::TurnOffFaucet => {
                vec![]
            }
        }
    }

    pub fn arity(name: &str) -> Option<usize> {
        match name {
            "pick" | "place" | "grasp" => Some(1),
            "ungrasp" | "turn_on_faucet" | "turn_off_faucet" => Some(0),
            "stack_object" => Some(2),
            _ => None,
        }
    }

    fn build(name: &str, mut args: Vec<String>) -> Option<SkillPrimitive> {
        let mut next = || args.remove(0);
        Some(match name {
            "pick" => SkillPrimitive::Pick(next()),
            "place" => SkillPrimitive::Place(next()),
            "grasp" => SkillPrimitive::Grasp(next()),
            "ungrasp" => SkillPrimitive::Ungrasp,
            "turn_on_faucet" => SkillPrimitive::TurnOnFaucet,
            "turn_off_faucet" => SkillPrimitive::TurnOffFaucet,
            "stack_object" => {
                let s = next();
                SkillPrimitive::StackObject(s, next())
            }
            _ => return None,
        })
    }
}

impl fmt::Display for SkillPrimitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name())?;
        for (i, a) in self.args().iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(&serde_json::to_string(a).expect("strings serialize"))?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Call {
    pub primitive: SkillPrimitive,
    /// Id of the step whose change produced this call.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_step: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyProgram {
    pub calls: Vec<Call>,
}

impl PolicyProgram {
    pub fn primitives(&self) -> Vec<SkillPrimitive> {
        self.calls.iter().map(|c| c.primitive.clone()).collect()
    }

    pub fn from_primitives(ps: impl IntoIterator<Item = SkillPrimitive>) -> Self {
        PolicyProgram {
            calls: ps
                .into_iter()
                .map(|primitive| Call {
                    primitive,
                    source_step: None,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodegenError {
    #[error("fixture `{fixture}` changes from `{from}` to `{to}`, which no skill primitive performs")]
    UnsupportedFixture {
        fixture: String,
        from: String,
        to: String,
    },
    #[error("invalid state sequence: {0}")]
    InvalidSequence(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Program(#[from] ProgramParseError),
}

fn ordinal(n: usize) -> String {
    let suffix = match (n % 10, n % 100) {
        (1, 11) | (2, 12) | (3, 13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

/// Position word for rank `r` (0 = leftmost) among `n` items of one class.
fn position_word(r: usize, n: usize) -> String {
    match (n, r) {
        (2, 0) | (3, 0) => "left".into(),
        (2, 1) | (3, 2) => "right".into(),
        (3, 1) => "middle".into(),
        (_, 0) => "leftmost".into(),
        (n, r) if r + 1 == n => "rightmost".into(),
        (_, r) => format!("{} from left", ordinal(r + 1)),
    }
}

fn with_position(class: &str, peers: &[(u32, u32, &str)], name: &str) -> String {
    if peers.len() < 2 {
        return class.to_string();
    }
    let mut sorted = peers.to_vec();
    sorted.sort();
    let r = sorted
        .iter()
        .position(|p| p.2 == name)
        .expect("the target is among its peers");
    format!("{} {class}", position_word(r, sorted.len()))
}

/// The object's class, prefixed by its left-to-right position when other
/// objects share the class. Ties in x are broken by y, then name.
pub fn describe_target(env: &Environment, state: &EnvState, name: &str) -> Result<String, EnvError> {
    let spec = env.object(name)?;
    let mut peers = Vec::new();
    for o in env.objects.values().filter(|o| o.class == spec.class) {
        let p = state
            .object_poses
            .get(&o.name)
            .ok_or_else(|| EnvError::UnknownObject(o.name.clone()))?;
        peers.push((p.x, p.y, o.name.as_str()));
    }
    Ok(with_position(&spec.class, &peers, name))
}

/// Same rule for fixtures, by the position of their regions.
pub fn describe_fixture(env: &Environment, name: &str) -> Result<String, EnvError> {
    let spec = env.fixture(name)?;
    let peers: Vec<_> = env
        .fixtures
        .values()
        .filter(|f| f.class == spec.class)
        .map(|f| (f.bounding_box.x, f.bounding_box.y, f.name.as_str()))
        .collect();
    Ok(with_position(&spec.class, &peers, name))
}

/// Description of the receptacle `name`, naming what it holds in `state`.
fn describe_container(
    env: &Environment,
    state: &EnvState,
    name: &str,
    exclude: &str,
) -> Result<String, EnvError> {
    let mut out = describe_target(env, state, name)?;
    let contents = contents_of(env, state, name, &[exclude]);
    for (i, c) in contents.iter().enumerate() {
        out.push_str(if i == 0 { " with " } else { " and " });
        out.push_str(&describe_target(env, state, &c.name)?);
    }
    Ok(out)
}

fn is_faucet(env: &Environment, fixture: &str) -> bool {
    env.fixtures
        .get(fixture)
        .is_some_and(|f| f.class.to_lowercase().contains("faucet"))
}

fn translate_pair(
    env: &Environment,
    prev: &EnvState,
    next: &EnvState,
    step: u64,
    out: &mut Vec<Call>,
) -> Result<(), CodegenError> {
    let cs = diff(prev, next).map_err(|e| CodegenError::InvalidSequence(e.to_string()))?;
    let mut push = |primitive| {
        out.push(Call {
            primitive,
            source_step: Some(step),
        })
    };
    for m in &cs.moved_objects {
        let carried = describe_target(env, prev, &m.name)?;
        push(SkillPrimitive::Pick(carried.clone()));
        match support_of(env, next, &m.name, &[])? {
            Support::StackedOn(o) => {
                let target = describe_target(env, next, &o.name)?;
                push(SkillPrimitive::StackObject(carried, target));
            }
            Support::InReceptacle(r) => {
                push(SkillPrimitive::Place(describe_container(env, next, &r.name, &m.name)?));
            }
            Support::InFixture(f) => push(SkillPrimitive::Place(describe_fixture(env, &f.name)?)),
            Support::Counter => push(SkillPrimitive::Place(format!(
                "counter at ({}, {})",
                m.to.x, m.to.y
            ))),
        }
    }
    for f in &cs.fixture_changes {
        let unsupported = || CodegenError::UnsupportedFixture {
            fixture: f.name.clone(),
            from: f.from.clone(),
            to: f.to.clone(),
        };
        if !is_faucet(env, &f.name) {
            return Err(unsupported());
        }
        match f.to.to_lowercase().as_str() {
            "on" => push(SkillPrimitive::TurnOnFaucet),
            "off" => push(SkillPrimitive::TurnOffFaucet),
            _ => return Err(unsupported()),
        }
    }
    Ok(())
}

fn translate_ids(env: &Environment, steps: &[(u64, &EnvState)]) -> Result<PolicyProgram, CodegenError> {
    if steps.len() < 2 {
        return Err(CodegenError::InvalidSequence(
            "at least two states are needed".into(),
        ));
    }
    for (_, s) in steps {
        env.check_state(s)?;
    }
    let mut calls = Vec::new();
    for w in steps.windows(2) {
        translate_pair(env, w[0].1, w[1].1, w[1].0, &mut calls)?;
    }
    Ok(PolicyProgram { calls })
}

/// Rule-based translation; calls are attributed to the index of the state
/// whose change produced them.
pub fn translate_rule_based(env: &Environment, states: &[EnvState]) -> Result<PolicyProgram, CodegenError> {
    let indexed: Vec<(u64, &EnvState)> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (i as u64, s))
        .collect();
    translate_ids(env, &indexed)
}

/// Rule-based translation of a timeline; calls carry step ids.
pub fn translate_timeline(env: &Environment, tl: &Timeline) -> Result<PolicyProgram, CodegenError> {
    let steps: Vec<(u64, &EnvState)> = tl.steps().iter().map(|s| (s.id, &s.state)).collect();
    translate_ids(env, &steps)
}

/// Model-written translation through the code-generation prompt.
pub fn translate_llm(
    provider: &dyn Provider,
    env: &Environment,
    states: &[EnvState],
) -> Result<PolicyProgram, CodegenError> {
    if states.len() < 2 {
        return Err(CodegenError::InvalidSequence(
            "at least two states are needed".into(),
        ));
    }
    let prompt = llm::build_codegen_prompt(env, states);
    let c = provider.complete(&prompt).map_err(BridgeError::from)?;
    Ok(parse_program(&c.text)?)
}

/// One call per line; a call's source step follows as `# step <id>`.
pub fn emit(program: &PolicyProgram) -> String {
    let mut out = String::new();
    for c in &program.calls {
        out.push_str(&c.primitive.to_string());
        if let Some(s) = c.source_step {
            out.push_str(&format!("  # step {s}"));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramParseError {
    #[error("line {line}: unknown primitive `{name}`")]
    UnknownPrimitive { line: usize, name: String },
    #[error("line {line}: `{name}` takes {expected} argument(s), got {found}")]
    ArityError {
        line: usize,
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {message}")]
    UnparseableCall { line: usize, message: String },
}

/// Splits off a `#` comment that is not inside a string literal.
fn split_comment(line: &str) -> (&str, Option<&str>) {
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        if escaped {
            escaped = false;
            continue;
        }
        match (quote, c) {
            (Some(_), '\\') => escaped = true,
            (Some(q), c) if c == q => quote = None,
            (None, '"' | '\'') => quote = Some(c),
            (None, '#') => return (&line[..i], Some(&line[i + 1..])),
            _ => {}
        }
    }
    (line, None)
}

fn parse_call(code: &str, line: usize) -> Result<SkillPrimitive, ProgramParseError> {
    let bad = |message: String| ProgramParseError::UnparseableCall { line, message };
    let code = code.trim().trim_end_matches(';').trim_end();
    let open = code
        .find('(')
        .ok_or_else(|| bad(format!("`{code}` is not a call")))?;
    let name = code[..open].trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(bad(format!("`{name}` is not a function name")));
    }
    let mut args = Vec::new();
    let mut at = open + 1;
    let bytes = code.as_bytes();
    let skip_ws = |mut i: usize| {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        i
    };
    at = skip_ws(at);
    if bytes.get(at) != Some(&b')') {
        loop {
            at = skip_ws(at);
            let (v, end) = literal::parse_at(code, at)
                .map_err(|e| bad(format!("argument at column {}: {}", e.offset + 1, e.message)))?;
            match v {
                Value::String(s) => args.push(s),
                other => return Err(bad(format!("argument {other} is not a string"))),
            }
            at = skip_ws(end);
            match bytes.get(at) {
                Some(b',') => at += 1,
                Some(b')') => break,
                _ => return Err(bad("expected `,` or `)`".into())),
            }
        }
    }
    if at + 1 != code.len() {
        return Err(bad(format!("unexpected text after call: `{}`", &code[at + 1..])));
    }
    let expected = SkillPrimitive::arity(name).ok_or_else(|| ProgramParseError::UnknownPrimitive {
        line,
        name: name.to_string(),
    })?;
    if args.len() != expected {
        return Err(ProgramParseError::ArityError {
            line,
            name: name.to_string(),
            expected,
            found: args.len(),
        });
    }
    if args.iter().any(|a| a.trim().is_empty()) {
        return Err(bad("targets must not be empty".into()));
    }
    Ok(SkillPrimitive::build(name, args).expect("arity checked the name"))
}

/// Reads one call per line. Blank lines, code fences and `#` comments are
/// ignored, except that a `# step <id>` comment records the source step.
pub fn parse_program(text: &str) -> Result<PolicyProgram, ProgramParseError> {
    let mut calls = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim_start().starts_with("```") {
            continue;
        }
        let (code, comment) = split_comment(raw);
        if code.trim().is_empty() {
            continue;
        }
        let primitive = parse_call(code, line)?;
        let source_step = comment
            .and_then(|c| c.trim().strip_prefix("step "))
            .and_then(|n| n.trim().parse().ok());
        calls.push(Call {
            primitive,
            source_step,
        });
    }
    Ok(PolicyProgram { calls })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ProgramIssue {
    /// The target matches no object, container, fixture or counter spot.
    UnknownTarget { call: usize, target: String },
    /// A pick that is never followed by a place before the next pick.
    DanglingPick { call: usize },
    /// A place or stack with nothing carried.
    PlaceWithoutPick { call: usize },
    /// A call whose effect appears in no consecutive change.
    Extraneous { call: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramReport {
    pub issues: Vec<ProgramIssue>,
}

impl ProgramReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Every description a call may legitimately name, over all states.
fn known_targets(env: &Environment, states: &[EnvState]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for s in states {
        for name in env.objects.keys() {
            if let Ok(d) = describe_target(env, s, name) {
                out.insert(d);
            }
            if env.objects[name].is_receptacle {
                for other in env.objects.keys() {
                    if let Ok(d) = describe_container(env, s, name, other) {
                        out.insert(d);
                    }
                }
            }
        }
    }
    for name in env.fixtures.keys() {
        if let Ok(d) = describe_fixture(env, name) {
            out.insert(d);
        }
    }
    out
}

fn is_counter_spot(t: &str) -> bool {
    let Some(rest) = t.strip_prefix("counter at (").and_then(|r| r.strip_suffix(')')) else {
        return false;
    };
    let mut parts = rest.split(',').map(str::trim);
    matches!(
        (parts.next(), parts.next(), parts.next()),
        (Some(x), Some(y), None) if x.parse::<u32>().is_ok() && y.parse::<u32>().is_ok()
    )
}

/// Checks `program` against the changes in `states`.
pub fn validate_program(env: &Environment, states: &[EnvState], program: &PolicyProgram) -> ProgramReport {
    let mut issues = Vec::new();
    let known = known_targets(env, states);
    let check_target = |call: usize, t: &str, issues: &mut Vec<ProgramIssue>| {
        if !known.contains(t) && !is_counter_spot(t) {
            issues.push(ProgramIssue::UnknownTarget {
                call,
                target: t.to_string(),
            });
        }
    };

    // effects present in the sequence: (description at pick time) per move,
    // and faucet transitions
    let mut moves: Vec<(String, bool)> = Vec::new();
    let mut faucet_on = 0usize;
    let mut faucet_off = 0usize;
    for w in states.windows(2) {
        let Ok(cs) = diff(&w[0], &w[1]) else {
            continue;
        };
        for m in &cs.moved_objects {
            if let Ok(d) = describe_target(env, &w[0], &m.name) {
                moves.push((d, false));
            }
        }
        for f in cs.fixture_changes.iter().filter(|f| is_faucet(env, &f.name)) {
            match f.to.to_lowercase().as_str() {
                "on" => faucet_on += 1,
                "off" => faucet_off += 1,
                _ => {}
            }
        }
    }

    let mut carried: Option<usize> = None;
    for (i, c) in program.calls.iter().enumerate() {
        for t in c.primitive.args() {
            check_target(i, t, &mut issues);
        }
        match &c.primitive {
            SkillPrimitive::Pick(t) | SkillPrimitive::Grasp(t) => {
                if let Some(prev) = carried.replace(i) {
                    issues.push(ProgramIssue::DanglingPick { call: prev });
                }
                match moves.iter_mut().find(|(d, used)| !*used && d == t) {
                    Some(m) => m.1 = true,
                    None => issues.push(ProgramIssue::Extraneous { call: i }),
                }
            }
            SkillPrimitive::Place(_) | SkillPrimitive::Ungrasp | SkillPrimitive::StackObject(..) => {
                if carried.take().is_none() {
                    issues.push(ProgramIssue::PlaceWithoutPick { call: i });
                }
            }
            SkillPrimitive::TurnOnFaucet => {
                if faucet_on == 0 {
                    issues.push(ProgramIssue::Extraneous { call: i });
                } else {
                    faucet_on -= 1;
                }
            }
            SkillPrimitive::TurnOffFaucet => {
                if faucet_off == 0 {
                    issues.push(ProgramIssue::Extraneous { call: i });
                } else {
                    faucet_off -= 1;
                }
            }
        }
    }
    if let Some(prev) = carried {
        issues.push(ProgramIssue::DanglingPick { call: prev });
    }
    issues.sort_by_key(|i| match i {
        ProgramIssue::UnknownTarget { call, .. }
        | ProgramIssue::DanglingPick { call }
        | ProgramIssue::PlaceWithoutPick { call }
        | ProgramIssue::Extraneous { call } => *call,
    });
    ProgramReport { issues }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo;
    use crate::geometry::Pose;
    use SkillPrimitive::*;

    fn oracle_states(b: &crate::Bundle) -> Vec<EnvState> {
        b.oracle.as_ref().unwrap().steps.iter().map(|s| s.state.clone()).collect()
    }

    #[test]
    fn red_apple_into_white_bowl() {
        let b = demo::red_apple();
        let p = translate_rule_based(&b.environment, &oracle_states(&b)).unwrap();
        assert_eq!(p.primitives(), vec![Pick("red apple".into()), Place("white bowl".into())]);
    }

    #[test]
    fn donut_place_or_stack() {
        let b = demo::donut_stacking(true);
        let p = translate_rule_based(&b.environment, &oracle_states(&b)).unwrap();
        assert_eq!(
            p.primitives(),
            vec![Pick("orange donut".into()), Place("plate with pink donut".into())]
        );
        let b = demo::donut_stacking(false);
        let p = translate_rule_based(&b.environment, &oracle_states(&b)).unwrap();
        assert_eq!(
            p.primitives(),
            vec![
                Pick("orange donut".into()),
                StackObject("orange donut".into(), "plate".into())
            ]
        );
    }

    #[test]
    fn faucet_sequence() {
        let b = demo::faucet();
        let p = translate_rule_based(&b.environment, &oracle_states(&b)).unwrap();
        assert_eq!(
            p.primitives(),
            vec![
                Pick("bowl".into()),
                Place("sink".into()),
                Pick("left orange".into()),
                Place("bowl".into()),
                TurnOnFaucet,
            ]
        );
    }

    #[test]
    fn non_faucet_fixture_is_refused() {
        let b = demo::kitchen();
        let env = &b.environment;
        let s = &b.initial_state;
        let t = env.apply_fixture_toggle(s, "cabinet").unwrap();
        assert!(matches!(
            translate_rule_based(env, &[s.clone(), t]),
            Err(CodegenError::UnsupportedFixture { .. })
        ));
        assert!(matches!(
            translate_rule_based(env, &[s.clone()]),
            Err(CodegenError::InvalidSequence(_))
        ));
    }

    #[test]
    fn counter_spot() {
        let b = demo::kitchen();
        let env = &b.environment;
        let s = &b.initial_state;
        let t = env.apply_object_move(s, "orange", Pose::new(600, 450)).unwrap();
        let p = translate_rule_based(env, &[s.clone(), t.clone()]).unwrap();
        assert_eq!(p.primitives()[1], Place("counter at (600, 450)".into()));
        assert!(validate_program(env, &[s.clone(), t], &p).is_clean());
    }

    #[test]
    fn positions() {
        assert_eq!(position_word(0, 2), "left");
        assert_eq!(position_word(1, 3), "middle");
        assert_eq!(position_word(0, 5), "leftmost");
        assert_eq!(position_word(4, 5), "rightmost");
        assert_eq!(position_word(1, 5), "2nd from left");
        assert_eq!(ordinal(11), "11th");
        assert_eq!(ordinal(22), "22nd");
    }

    #[test]
    fn parser_forms() {
        let p = parse_program("pick(\"red apple\")\nplace(\"white bowl\")").unwrap();
        assert_eq!(p.primitives(), vec![Pick("red apple".into()), Place("white bowl".into())]);
        let fenced = "```python\n# plan\npick('red apple')  # step 1\n\nplace( \"white bowl\" );\n```";
        let p = parse_program(fenced).unwrap();
        assert_eq!(p.calls[0].source_step, Some(1));
        assert_eq!(p.calls.len(), 2);
        assert!(matches!(
            parse_program("fly(\"apple\")"),
            Err(ProgramParseError::UnknownPrimitive { .. })
        ));
        assert!(matches!(
            parse_program("stack_object(\"donut\")"),
            Err(ProgramParseError::ArityError { expected: 2, found: 1, .. })
        ));
        assert!(matches!(
            parse_program("pick(apple)"),
            Err(ProgramParseError::UnparseableCall { .. })
        ));
        assert!(parse_program("pick(\"a # b\")").unwrap().calls[0].primitive == Pick("a # b".into()));
        assert_eq!(emit(&PolicyProgram::default()), "");
    }

    #[test]
    fn emit_round_trips_with_steps() {
        let b = demo::faucet();
        let tl = b.oracle.as_ref().unwrap().to_timeline(&b.environment).unwrap();
        let p = translate_timeline(&b.environment, &tl).unwrap();
        assert!(p.calls.iter().all(|c| c.source_step.is_some()));
        assert_eq!(parse_program(&emit(&p)).unwrap(), p);
    }

    #[test]
    fn validation_flags() {
        let b = demo::donut_stacking(true);
        let env = &b.environment;
        let states = oracle_states(&b);
        let good = translate_rule_based(env, &states).unwrap();
        assert!(validate_program(env, &states, &good).is_clean());

        let mut spoons = good.clone();
        spoons.calls.extend(PolicyProgram::from_primitives([
            Pick("left spoon".into()),
            Place("counter at (10, 10)".into()),
        ]).calls);
        let r = validate_program(env, &states, &spoons);
        assert_eq!(r.issues, vec![ProgramIssue::Extraneous { call: 2 }]);

        let dangling = PolicyProgram::from_primitives([Pick("orange donut".into())]);
        assert_eq!(
            validate_program(env, &states, &dangling).issues,
            vec![ProgramIssue::DanglingPick { call: 0 }]
        );
        let unknown = PolicyProgram::from_primitives([
            Pick("orange donut".into()),
            Place("unicorn".into()),
        ]);
        assert_eq!(
            validate_program(env, &states, &unknown).issues,
            vec![ProgramIssue::UnknownTarget {
                call: 1,
                target: "unicorn".into()
            }]
        );
    }
}
